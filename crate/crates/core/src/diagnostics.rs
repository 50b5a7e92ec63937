//! Discrete energy, L1 norm, extrema, and the per-step monitors for bound
//! preservation, L1 growth and energy decay.

use serde::Serialize;

use crate::error::Result;
use crate::potential::{PotentialSpec, StabilityBounds, ValidationReport, HYPOTHESIS_TOL};
use crate::scheme::{FieldState, GridSpec, SchemeKind, SchemeParams};

/// `E_h = eps^2/2 sum (D+ phi_j)^2 dx + sum F(phi_j) dx`, with the forward
/// difference wrapping from the last node to the first.
pub fn discrete_energy(
    state: &FieldState,
    p: &PotentialSpec,
    g: &GridSpec,
    s: &SchemeParams,
) -> f64 {
    let phi = &state.values;
    let n = phi.len();
    let dx = g.dx();
    let potential: f64 = phi.iter().map(|&u| p.eval_energy(u)).sum::<f64>() * dx;
    if s.epsilon() == 0.0 {
        return potential;
    }
    let gradient: f64 = (0..n)
        .map(|j| {
            let d = (phi[(j + 1) % n] - phi[j]) / dx;
            d * d
        })
        .sum();
    0.5 * s.epsilon() * s.epsilon() * gradient * dx + potential
}

/// `sum |phi_j| dx`.
pub fn l1_norm(state: &FieldState, g: &GridSpec) -> f64 {
    state.values.iter().map(|v| v.abs()).sum::<f64>() * g.dx()
}

/// `(min, max)` of the field. NaN entries propagate.
pub fn extrema(state: &FieldState) -> (f64, f64) {
    state
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            if v.is_nan() {
                (f64::NAN, f64::NAN)
            } else {
                (lo.min(v), hi.max(v))
            }
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    MaxPrinciple,
    L1Bound,
    EnergyDecay,
}

impl MonitorKind {
    pub const ALL: [MonitorKind; 3] = [
        MonitorKind::MaxPrinciple,
        MonitorKind::L1Bound,
        MonitorKind::EnergyDecay,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MonitorKind::MaxPrinciple => "max_principle",
            MonitorKind::L1Bound => "l1_bound",
            MonitorKind::EnergyDecay => "energy_decay",
        }
    }
}

/// `active` says whether the hypotheses of the guarantee hold for this run;
/// `satisfied` is recorded either way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorVerdict {
    pub kind: MonitorKind,
    pub active: bool,
    pub satisfied: bool,
    pub margin: f64,
}

impl MonitorVerdict {
    /// An active monitor that failed.
    pub fn violated(&self) -> bool {
        self.active && !self.satisfied
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    pub energy: f64,
    pub l1_norm: f64,
    pub min_val: f64,
    pub max_val: f64,
    /// Ordered as [`MonitorKind::ALL`].
    pub monitors: [MonitorVerdict; 3],
}

impl StepRecord {
    pub fn monitor(&self, kind: MonitorKind) -> &MonitorVerdict {
        &self.monitors[kind as usize]
    }

    pub fn first_violation(&self) -> Option<MonitorKind> {
        self.monitors.iter().find(|m| m.violated()).map(|m| m.kind)
    }
}

/// Hypothesis gates and tolerances for one run.
#[derive(Debug, Clone)]
pub struct Monitors {
    potential: PotentialSpec,
    grid: GridSpec,
    params: SchemeParams,
    lipschitz_l: f64,
    bound_tol: f64,
    max_principle_active: bool,
    l1_active: bool,
}

impl Monitors {
    /// Gates follow the stability results for the semi-implicit scheme: the
    /// bound and energy monitors need `f(gamma_-) = f(gamma_+) = 0` and
    /// `dt <= dt_max`, the L1 monitor additionally `f(0) = 0` with
    /// `gamma_- < 0 < gamma_+`. Other schemes get every monitor inactive.
    pub fn new(
        scheme: SchemeKind,
        p: &PotentialSpec,
        g: &GridSpec,
        s: &SchemeParams,
        bounds: &StabilityBounds,
        report: &ValidationReport,
    ) -> Self {
        let max_principle_active = scheme == SchemeKind::SemiImplicit
            && report.endpoints_vanish
            && s.dt() <= bounds.dt_max;
        Self {
            potential: p.clone(),
            grid: *g,
            params: *s,
            lipschitz_l: bounds.lipschitz_l,
            bound_tol: HYPOTHESIS_TOL * (1.0 + p.gamma_minus().abs().max(p.gamma_plus().abs())),
            max_principle_active,
            l1_active: max_principle_active && report.f_vanishes_at_zero,
        }
    }

    /// Convenience constructor that computes bounds and the hypothesis report.
    pub fn for_semi_implicit(p: &PotentialSpec, g: &GridSpec, s: &SchemeParams) -> Result<Self> {
        let bounds = p.stability_bounds()?;
        Ok(Self::new(
            SchemeKind::SemiImplicit,
            p,
            g,
            s,
            &bounds,
            &p.validate_hypotheses(),
        ))
    }

    pub fn max_principle_active(&self) -> bool {
        self.max_principle_active
    }

    pub fn l1_active(&self) -> bool {
        self.l1_active
    }

    fn max_principle(&self, min_val: f64, max_val: f64) -> MonitorVerdict {
        let (lo, hi) = (self.potential.gamma_minus(), self.potential.gamma_plus());
        MonitorVerdict {
            kind: MonitorKind::MaxPrinciple,
            active: self.max_principle_active,
            satisfied: lo - self.bound_tol <= min_val && max_val <= hi + self.bound_tol,
            margin: (min_val - lo).min(hi - max_val),
        }
    }

    fn measure(&self, state: &FieldState) -> (f64, f64, f64, f64) {
        let (min_val, max_val) = extrema(state);
        (
            discrete_energy(state, &self.potential, &self.grid, &self.params),
            l1_norm(state, &self.grid),
            min_val,
            max_val,
        )
    }

    /// Record for the initial state. Only the bound monitor applies; the
    /// step-to-step monitors are reported inactive.
    pub fn initial_record(&self, state: &FieldState) -> StepRecord {
        let (energy, l1, min_val, max_val) = self.measure(state);
        let idle = |kind| MonitorVerdict {
            kind,
            active: false,
            satisfied: true,
            margin: 0.0,
        };
        StepRecord {
            step: state.step,
            time: state.time,
            energy,
            l1_norm: l1,
            min_val,
            max_val,
            monitors: [
                self.max_principle(min_val, max_val),
                idle(MonitorKind::L1Bound),
                idle(MonitorKind::EnergyDecay),
            ],
        }
    }

    /// Record for `curr`, judged against the record of the step before it.
    pub fn evaluate(&self, prev: &StepRecord, curr: &FieldState) -> StepRecord {
        let (energy, l1, min_val, max_val) = self.measure(curr);

        let l1_bound = (self.lipschitz_l * self.params.dt()).exp() * prev.l1_norm;
        let l1_verdict = MonitorVerdict {
            kind: MonitorKind::L1Bound,
            active: self.l1_active,
            satisfied: l1 <= l1_bound * (1.0 + 1e-12) + 1e-14,
            margin: if l1_bound > 0.0 {
                1.0 - l1 / l1_bound
            } else {
                l1_bound - l1
            },
        };
        let energy_verdict = MonitorVerdict {
            kind: MonitorKind::EnergyDecay,
            active: self.max_principle_active,
            satisfied: energy <= prev.energy + 1e-12 * (1.0 + prev.energy.abs()),
            margin: prev.energy - energy,
        };

        StepRecord {
            step: curr.step,
            time: curr.time,
            energy,
            l1_norm: l1,
            min_val,
            max_val,
            monitors: [
                self.max_principle(min_val, max_val),
                l1_verdict,
                energy_verdict,
            ],
        }
    }
}

/// Monitor verdicts for `curr` against `prev`, with gates computed for the
/// semi-implicit scheme.
pub fn evaluate_monitors(
    prev: &StepRecord,
    curr: &FieldState,
    p: &PotentialSpec,
    g: &GridSpec,
    s: &SchemeParams,
) -> Result<[MonitorVerdict; 3]> {
    Ok(Monitors::for_semi_implicit(p, g, s)?
        .evaluate(prev, curr)
        .monitors)
}
