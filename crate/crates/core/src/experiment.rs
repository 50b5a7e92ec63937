//! Run orchestration: single runs, time-step sweeps, and convergence studies.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{MonitorKind, Monitors, StepRecord};
use crate::error::{Error, Result};
use crate::potential::{PotentialSpec, StabilityBounds, ValidationReport};
use crate::scheme::{
    make_initial, FieldState, GridSpec, InitialCondition, NewtonParams, SchemeKind, SchemeParams,
    Stepper,
};

/// Relative slack when checking that grids nest and final times line up.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DtChoice {
    /// Resolve to `dt_max` of the potential.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub dt: DtChoice,
    pub steps: u64,
    pub record_every: u64,
    pub initial: InitialCondition,
    pub output: PathBuf,
    pub newton: NewtonParams,
}

impl RunConfig {
    /// Semi-implicit run of the double well with `dt = "auto"`.
    pub fn double_well(
        points: usize,
        length: f64,
        epsilon: f64,
        steps: u64,
        initial: InitialCondition,
    ) -> Result<Self> {
        Ok(Self {
            potential: PotentialSpec::double_well(),
            grid: GridSpec::new(points, length)?,
            scheme: SchemeKind::SemiImplicit,
            epsilon,
            dt: DtChoice::Auto,
            steps,
            record_every: 1,
            initial,
            output: PathBuf::from("out"),
            newton: NewtonParams::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::config("scheme.steps must be at least 1"));
        }
        if self.record_every < 1 {
            return Err(Error::config("scheme.record_every must be at least 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config(format!(
                "scheme.epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if let DtChoice::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config(format!(
                    "scheme.dt must be positive, got {dt}"
                )));
            }
        }
        if !(self.newton.tol >= 0.0 && self.newton.max_iters >= 1) {
            return Err(Error::config(
                "newton_tol must be >= 0 and newton_max_iters >= 1",
            ));
        }
        Ok(())
    }

    pub fn resolve_dt(&self, bounds: &StabilityBounds) -> Result<f64> {
        match self.dt {
            DtChoice::Fixed(dt) => Ok(dt),
            DtChoice::Auto if bounds.dt_max.is_finite() => Ok(bounds.dt_max),
            DtChoice::Auto => Err(Error::config(
                "dt = \"auto\" needs a finite dt_max, but max f' <= 0 on the interval",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub step: u64,
    pub monitor: MonitorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveMonitors {
    pub max_principle: bool,
    pub l1_bound: bool,
    pub energy_decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scheme: SchemeKind,
    pub points: usize,
    pub dx: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub lambda: f64,
    pub steps_requested: u64,
    pub steps_completed: u64,
    pub final_time: f64,
    pub bounds: StabilityBounds,
    pub hypotheses: ValidationReport,
    pub within_bound: bool,
    pub active: ActiveMonitors,
    pub min_val: f64,
    pub max_val: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_l1_norm: f64,
    /// First step where an active monitor failed.
    pub first_violation: Option<Violation>,
    /// First step outside the invariant interval, whether or not the gate holds.
    pub first_bound_violation_step: Option<u64>,
    /// First step whose energy exceeded the previous one beyond tolerance.
    pub first_energy_increase_step: Option<u64>,
    /// First step with a non-finite value; the run stops there.
    pub diverged_at_step: Option<u64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<StepRecord>,
    pub final_state: FieldState,
    pub summary: RunSummary,
}

/// Runs one configuration. Records step 0, every `record_every`-th step and
/// the last step; monitors are evaluated on every step.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let p = &cfg.potential;
    let g = &cfg.grid;
    let bounds = p.stability_bounds()?;
    let hypotheses = p.validate_hypotheses();
    let dt = cfg.resolve_dt(&bounds)?;
    let params = SchemeParams::new(cfg.epsilon, dt, g)?;
    let monitors = Monitors::new(cfg.scheme, p, g, &params, &bounds, &hypotheses);
    let mut stepper = Stepper::new(cfg.scheme, p, g, &params, cfg.newton)?;

    let mut state = make_initial(&cfg.initial, p, g)?;
    let mut prev = monitors.initial_record(&state);
    let initial_energy = prev.energy;
    let (mut min_val, mut max_val) = (prev.min_val, prev.max_val);
    let mut first_violation = prev
        .first_violation()
        .map(|monitor| Violation { step: 0, monitor });
    let mut first_bound_violation_step =
        (!prev.monitor(MonitorKind::MaxPrinciple).satisfied).then_some(0);
    let mut first_energy_increase_step = None;
    let mut diverged_at_step = None;
    let mut records = vec![prev.clone()];

    for n in 1..=cfg.steps {
        let next = stepper.advance(&state)?;
        let rec = monitors.evaluate(&prev, &next);

        min_val = min_val.min(rec.min_val);
        max_val = max_val.max(rec.max_val);
        if first_violation.is_none() {
            first_violation = rec
                .first_violation()
                .map(|monitor| Violation { step: n, monitor });
        }
        if first_bound_violation_step.is_none() && !rec.monitor(MonitorKind::MaxPrinciple).satisfied
        {
            first_bound_violation_step = Some(n);
        }
        if first_energy_increase_step.is_none() && !rec.monitor(MonitorKind::EnergyDecay).satisfied
        {
            first_energy_increase_step = Some(n);
        }
        let finite = next.is_finite();
        if !finite {
            diverged_at_step = Some(n);
            log::warn!("non-finite values at step {n} (dt = {dt}); stopping run");
        }
        if n % cfg.record_every == 0 || n == cfg.steps || !finite {
            records.push(rec.clone());
        }
        state = next;
        prev = rec;
        if !finite {
            break;
        }
    }

    let summary = RunSummary {
        scheme: cfg.scheme,
        points: g.points(),
        dx: g.dx(),
        epsilon: cfg.epsilon,
        dt,
        lambda: params.lambda(),
        steps_requested: cfg.steps,
        steps_completed: state.step,
        final_time: state.time,
        bounds,
        hypotheses,
        within_bound: dt <= bounds.dt_max,
        active: ActiveMonitors {
            max_principle: monitors.max_principle_active(),
            l1_bound: monitors.l1_active(),
            energy_decay: monitors.max_principle_active(),
        },
        min_val,
        max_val,
        initial_energy,
        final_energy: prev.energy,
        final_l1_norm: prev.l1_norm,
        first_violation,
        first_bound_violation_step,
        first_energy_increase_step,
        diverged_at_step,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        records,
        final_state: state,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// Strictly increasing, positive.
    pub dt_grid: Vec<f64>,
    /// Step budget for every row.
    pub steps: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt_grid.is_empty() {
            return Err(Error::config("sweep dt grid is empty"));
        }
        if let Some(bad) = self
            .dt_grid
            .iter()
            .find(|dt| !(dt.is_finite() && **dt > 0.0))
        {
            return Err(Error::config(format!(
                "sweep dt values must be positive, got {bad}"
            )));
        }
        if self.dt_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sweep dt values must be strictly increasing"));
        }
        if self.steps < 1 {
            return Err(Error::config("sweep steps must be at least 1"));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dt: f64,
    pub within_bound: bool,
    pub first_bound_violation_step: Option<u64>,
    pub first_energy_increase_step: Option<u64>,
    pub final_energy: f64,
    /// First violation of a monitor whose hypotheses held.
    pub first_violation: Option<Violation>,
    pub diverged_at_step: Option<u64>,
    /// Set when the row's run failed outright (for example Newton divergence).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub dt_max: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn any_active_violation(&self) -> bool {
        self.rows.iter().any(|r| r.first_violation.is_some())
    }
}

fn sweep_row(base: &RunConfig, dt: f64, steps: u64, dt_max: f64) -> SweepRow {
    let cfg = RunConfig {
        dt: DtChoice::Fixed(dt),
        steps,
        record_every: steps,
        ..base.clone()
    };
    match run(&cfg) {
        Ok(res) => {
            let s = res.summary;
            SweepRow {
                dt,
                within_bound: s.within_bound,
                first_bound_violation_step: s.first_bound_violation_step,
                first_energy_increase_step: s.first_energy_increase_step,
                final_energy: s.final_energy,
                first_violation: s.first_violation,
                diverged_at_step: s.diverged_at_step,
                error: None,
            }
        }
        Err(e) => {
            log::warn!("sweep row dt = {dt} failed: {e}");
            SweepRow {
                dt,
                within_bound: dt <= dt_max,
                first_bound_violation_step: None,
                first_energy_increase_step: None,
                final_energy: f64::NAN,
                first_violation: None,
                diverged_at_step: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// One run per `dt`. Rows run in parallel on at most `threads` workers
/// (all logical processors when `None`); a failing row does not stop the rest.
pub fn sweep(cfg: &SweepConfig, threads: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    let dt_max = cfg.base.potential.stability_bounds()?.dt_max;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        cfg.dt_grid
            .par_iter()
            .map(|&dt| sweep_row(&cfg.base, dt, cfg.steps, dt_max))
            .collect()
    });
    Ok(SweepResult { dt_max, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rung {
    pub dt: f64,
    pub dx: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub base: RunConfig,
    pub final_time: f64,
    pub ladder: Vec<Rung>,
    pub reference: Rung,
}

/// A rung resolved to an integer node count and step count.
#[derive(Debug, Clone, Copy)]
struct Resolved {
    points: usize,
    steps: u64,
}

fn whole_ratio(num: f64, den: f64, what: &str) -> Result<u64> {
    let ratio = num / den;
    let rounded = ratio.round();
    if !(rounded >= 1.0 && (ratio - rounded).abs() <= ALIGN_TOL * rounded) {
        return Err(Error::config(format!(
            "{what}: {num} / {den} = {ratio} is not a whole number"
        )));
    }
    Ok(rounded as u64)
}

impl ConvergenceConfig {
    fn resolve(&self, rung: &Rung) -> Result<Resolved> {
        if !(rung.dt > 0.0 && rung.dx > 0.0) {
            return Err(Error::config(format!(
                "rung {rung:?} needs positive dt and dx"
            )));
        }
        let points = whole_ratio(self.base.grid.length(), rung.dx, "grid length / dx")? as usize;
        if points < 3 {
            return Err(Error::config(format!(
                "rung {rung:?} gives fewer than 3 nodes"
            )));
        }
        let steps = whole_ratio(
            self.final_time,
            rung.dt,
            "final time / dt (times misaligned)",
        )?;
        Ok(Resolved { points, steps })
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(Error::config("converge.final_time must be positive"));
        }
        if self.ladder.is_empty() {
            return Err(Error::config("converge.ladder is empty"));
        }
        let reference = self.resolve(&self.reference)?;
        for rung in &self.ladder {
            let r = self.resolve(rung)?;
            if reference.points % r.points != 0 {
                return Err(Error::config(format!(
                    "reference grid ({} nodes) does not nest rung grid ({} nodes)",
                    reference.points, r.points
                )));
            }
            let finer = reference.points >= r.points && reference.steps >= r.steps;
            let strictly = reference.points > r.points || reference.steps > r.steps;
            if !(finer && strictly) {
                return Err(Error::config(format!(
                    "reference {:?} is not strictly finer than rung {rung:?}",
                    self.reference
                )));
            }
        }
        Ok(())
    }

    fn run_rung(&self, rung: &Rung) -> Result<RunResult> {
        let r = self.resolve(rung)?;
        let cfg = RunConfig {
            grid: GridSpec::new(r.points, self.base.grid.length())?,
            dt: DtChoice::Fixed(rung.dt),
            steps: r.steps,
            record_every: r.steps,
            ..self.base.clone()
        };
        run(&cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub dx: f64,
    /// The refined quantity: `dt` for a temporal ladder, `dx` for a spatial one.
    pub h: f64,
    /// Max-norm difference from the reference at the final time.
    pub error: f64,
    /// `log(e_prev / e) / log(h_prev / h)`; undefined for the first rung or
    /// when `h` did not change.
    pub observed_order: Option<f64>,
    pub first_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub reference: Rung,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn any_active_violation(&self) -> bool {
        self.rows.iter().any(|r| r.first_violation.is_some())
    }
}

/// Errors against a finer reference solution, compared by injection: rung
/// node `j` sits on reference node `j * (J_ref / J)`.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let reference = cfg.run_rung(&cfg.reference)?;
    let ref_values = &reference.final_state.values;

    let results: Vec<RunResult> = cfg
        .ladder
        .par_iter()
        .map(|rung| cfg.run_rung(rung))
        .collect::<Result<_>>()?;

    let spatial = cfg.ladder.iter().all(|r| r.dt == cfg.ladder[0].dt)
        && cfg.ladder.iter().any(|r| r.dx != cfg.ladder[0].dx);

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(results.len());
    for (rung, res) in cfg.ladder.iter().zip(&results) {
        let values = &res.final_state.values;
        let stride = ref_values.len() / values.len();
        let error = values
            .iter()
            .enumerate()
            .map(|(j, v)| (v - ref_values[j * stride]).abs())
            .fold(0.0, f64::max);
        let h = if spatial { rung.dx } else { rung.dt };
        let observed_order = rows.last().and_then(|prev| {
            (prev.h != h && prev.error > 0.0 && error > 0.0)
                .then(|| (prev.error / error).ln() / (prev.h / h).ln())
        });
        rows.push(ConvergenceRow {
            dt: rung.dt,
            dx: rung.dx,
            h,
            error,
            observed_order,
            first_violation: res
                .summary
                .first_violation
                .or(reference.summary.first_violation),
        });
    }
    Ok(ConvergenceTable {
        reference: cfg.reference,
        rows,
    })
}
