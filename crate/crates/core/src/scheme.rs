//! Grids, parameters, initial data and the three time steppers.
//!
//! Nodes are 0-based, `x_j = j * dx` for `j = 0..J`, with periodic neighbours
//! `phi_{-1} = phi_{J-1}` and `phi_J = phi_0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CyclicSolver;
use crate::potential::PotentialSpec;

/// Periodic uniform grid with `J` nodes on a domain of length `J * dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    points: usize,
    dx: f64,
    length: f64,
}

impl GridSpec {
    pub fn new(points: usize, length: f64) -> Result<Self> {
        if points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need J >= 3 nodes, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            points,
            dx: length / points as f64,
            length,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }
}

/// Interface width, time step and the cached mesh ratio `lambda = eps^2 dt / dx^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    epsilon: f64,
    dt: f64,
    lambda: f64,
}

impl SchemeParams {
    /// `epsilon = 0` is accepted and decouples the nodes.
    pub fn new(epsilon: f64, dt: f64, grid: &GridSpec) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let lambda = epsilon * epsilon * dt / (grid.dx() * grid.dx());
        Ok(Self {
            epsilon,
            dt,
            lambda,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// The discrete solution at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldState {
    pub values: Vec<f64>,
    pub time: f64,
    pub step: u64,
}

impl FieldState {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            time: 0.0,
            step: 0,
        }
    }

    pub fn constant(points: usize, value: f64) -> Self {
        Self::new(vec![value; points])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.values.len() != grid.points() {
            return Err(Error::InvalidGrid(format!(
                "state has {} values but grid has {} nodes",
                self.values.len(),
                grid.points()
            )));
        }
        Ok(())
    }

    fn advanced(&self, values: Vec<f64>, dt: f64) -> Self {
        Self {
            values,
            time: (self.step + 1) as f64 * dt,
            step: self.step + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Implicit diffusion, explicit reaction.
    SemiImplicit,
    /// Forward Euler on both terms.
    Explicit,
    /// Convex splitting of the double well: `u^3` implicit, `-u` explicit.
    ConvexSplitting,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::SemiImplicit => "semi_implicit",
            SchemeKind::Explicit => "explicit",
            SchemeKind::ConvexSplitting => "convex_splitting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 50,
        }
    }
}

/// `lambda * (phi_{j+1} - 2 phi_j + phi_{j-1})` with periodic wraparound.
fn scaled_laplacian(values: &[f64], lambda: f64, out: &mut [f64]) {
    let n = values.len();
    for j in 0..n {
        let left = values[(j + n - 1) % n];
        let right = values[(j + 1) % n];
        out[j] = lambda * (right - 2.0 * values[j] + left);
    }
}

/// A stepper bound to one potential, grid and parameter set. Holds the
/// factorized implicit operator so repeated steps cost `O(J)` each.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: SchemeKind,
    potential: PotentialSpec,
    grid: GridSpec,
    params: SchemeParams,
    newton: NewtonParams,
    implicit: Option<CyclicSolver>,
    scratch: Vec<f64>,
}

impl Stepper {
    pub fn new(
        kind: SchemeKind,
        potential: &PotentialSpec,
        grid: &GridSpec,
        params: &SchemeParams,
        newton: NewtonParams,
    ) -> Result<Self> {
        let lambda = params.lambda();
        let implicit = match kind {
            SchemeKind::SemiImplicit if lambda > 0.0 => Some(CyclicSolver::constant(
                grid.points(),
                1.0 + 2.0 * lambda,
                -lambda,
            )?),
            SchemeKind::ConvexSplitting if !potential.is_double_well() => {
                return Err(Error::UnsupportedPotential(format!(
                    "convex splitting is defined for the double well only, got {:?}",
                    potential.kind()
                )))
            }
            _ => None,
        };
        Ok(Self {
            kind,
            potential: potential.clone(),
            grid: *grid,
            params: *params,
            newton,
            implicit,
            scratch: vec![0.0; grid.points()],
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn advance(&mut self, state: &FieldState) -> Result<FieldState> {
        state.check_grid(&self.grid)?;
        let values = match self.kind {
            SchemeKind::SemiImplicit => self.semi_implicit(&state.values),
            SchemeKind::Explicit => self.explicit(&state.values),
            SchemeKind::ConvexSplitting => self.convex_splitting(&state.values)?,
        };
        Ok(state.advanced(values, self.params.dt()))
    }

    fn semi_implicit(&mut self, phi: &[f64]) -> Vec<f64> {
        let dt = self.params.dt();
        let p = &self.potential;
        for (r, &u) in self.scratch.iter_mut().zip(phi) {
            *r = u - dt * p.eval_force(u);
        }
        let Some(solver) = &self.implicit else {
            return self.scratch.clone();
        };
        // Rows of the diffusion matrix sum to one, so constants pass through
        // unchanged; solving for the offset from rhs[0] keeps that exact.
        let base = self.scratch[0];
        for r in self.scratch.iter_mut() {
            *r -= base;
        }
        let mut out = solver.solve(&self.scratch);
        for x in out.iter_mut() {
            *x += base;
        }
        out
    }

    fn explicit(&mut self, phi: &[f64]) -> Vec<f64> {
        let dt = self.params.dt();
        scaled_laplacian(phi, self.params.lambda(), &mut self.scratch);
        phi.iter()
            .zip(&self.scratch)
            .map(|(&u, &lap)| u + lap - dt * self.potential.eval_force(u))
            .collect()
    }

    /// Newton iteration on
    /// `phi_j - lambda (phi_{j+1} - 2 phi_j + phi_{j-1}) + dt phi_j^3 = old_j + dt old_j`.
    fn convex_splitting(&mut self, old: &[f64]) -> Result<Vec<f64>> {
        let dt = self.params.dt();
        let lambda = self.params.lambda();
        let rhs: Vec<f64> = old.iter().map(|&u| u + dt * u).collect();
        let mut phi = old.to_vec();
        let mut last_update = f64::INFINITY;

        for _ in 0..self.newton.max_iters {
            scaled_laplacian(&phi, lambda, &mut self.scratch);
            let neg_residual: Vec<f64> = phi
                .iter()
                .zip(&self.scratch)
                .zip(&rhs)
                .map(|((&u, &lap), &b)| b - (u - lap + dt * u * u * u))
                .collect();
            if neg_residual.iter().all(|&r| r == 0.0) {
                return Ok(phi);
            }
            let jac_diag: Vec<f64> = phi
                .iter()
                .map(|&u| 1.0 + 2.0 * lambda + 3.0 * dt * u * u)
                .collect();
            let update = CyclicSolver::new(&jac_diag, -lambda)?.solve(&neg_residual);
            last_update = update.iter().map(|d| d.abs()).fold(0.0, f64::max);
            for (u, d) in phi.iter_mut().zip(&update) {
                *u += d;
            }
            if last_update <= self.newton.tol {
                return Ok(phi);
            }
            if !last_update.is_finite() {
                break;
            }
        }
        Err(Error::NewtonDivergence {
            iters: self.newton.max_iters,
            last_update,
        })
    }
}

/// One step of the semi-implicit scheme:
/// `(1 + 2 lambda) u_j - lambda (u_{j+1} + u_{j-1}) = phi_j - dt f(phi_j)`.
pub fn step_semi_implicit(
    state: &FieldState,
    p: &PotentialSpec,
    g: &GridSpec,
    s: &SchemeParams,
) -> Result<FieldState> {
    Stepper::new(SchemeKind::SemiImplicit, p, g, s, NewtonParams::default())?.advance(state)
}

pub fn step_explicit(
    state: &FieldState,
    p: &PotentialSpec,
    g: &GridSpec,
    s: &SchemeParams,
) -> Result<FieldState> {
    Stepper::new(SchemeKind::Explicit, p, g, s, NewtonParams::default())?.advance(state)
}

pub fn step_convex_splitting(
    state: &FieldState,
    p: &PotentialSpec,
    g: &GridSpec,
    s: &SchemeParams,
    newton: NewtonParams,
) -> Result<FieldState> {
    Stepper::new(SchemeKind::ConvexSplitting, p, g, s, newton)?.advance(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Independent uniform samples on `[gamma_minus, gamma_plus]`.
    RandomUniform { seed: u64 },
    /// `mid + amplitude * sin(2 pi modes x / length)`, `mid` the interval centre.
    SineWave { amplitude: f64, modes: u32 },
    /// A periodic slab of the upper phase centred at `center`, half a domain
    /// wide, with `tanh` interfaces of the given width.
    TanhFront { center: f64, width: f64 },
}

pub fn make_initial(
    kind: &InitialCondition,
    p: &PotentialSpec,
    g: &GridSpec,
) -> Result<FieldState> {
    let (lo, hi) = (p.gamma_minus(), p.gamma_plus());
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let n = g.points();

    let values: Vec<f64> = match *kind {
        InitialCondition::RandomUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
        }
        InitialCondition::SineWave { amplitude, modes } => {
            if !(amplitude.is_finite() && amplitude >= 0.0) {
                return Err(Error::InvalidInitialData(format!(
                    "amplitude must be a non-negative number, got {amplitude}"
                )));
            }
            if amplitude > half {
                return Err(Error::InvalidInitialData(format!(
                    "amplitude {amplitude} does not fit in [{lo}, {hi}]"
                )));
            }
            let k = 2.0 * PI * f64::from(modes) / g.length();
            (0..n)
                .map(|j| mid + amplitude * (k * g.node(j)).sin())
                .collect()
        }
        InitialCondition::TanhFront { center, width } => {
            if !(width.is_finite() && width > 0.0) || !center.is_finite() {
                return Err(Error::InvalidInitialData(format!(
                    "tanh front needs a finite center and positive width, got ({center}, {width})"
                )));
            }
            let len = g.length();
            (0..n)
                .map(|j| {
                    let d = (g.node(j) - center).rem_euclid(len);
                    let dist = d.min(len - d);
                    mid + half * ((0.25 * len - dist) / width).tanh()
                })
                .collect()
        }
    };

    let mut clamped = 0usize;
    let values = values
        .into_iter()
        .map(|v| {
            let c = v.clamp(lo, hi);
            if c != v {
                clamped += 1;
            }
            c
        })
        .collect();
    if clamped > 0 {
        log::warn!("clamped {clamped} initial values into [{lo}, {hi}]");
    }
    Ok(FieldState::new(values))
}
