//! The three stability guarantees exercised on random polynomial potentials
//! whose force vanishes at both ends of the invariant interval.

use phasefield_core::diagnostics::Monitors;
use phasefield_core::scheme::{make_initial, NewtonParams, Stepper};
use phasefield_core::{
    run, DtChoice, FieldState, GridSpec, InitialCondition, PotentialKind, PotentialSpec, RunConfig,
    SchemeKind, SchemeParams,
};
use proptest::prelude::*;

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `F` with `F' = (u - lo)(u - hi) q(u)`, times `u` when `through_zero`.
fn potential_with_roots(lo: f64, hi: f64, q: &[f64], through_zero: bool) -> PotentialSpec {
    let mut force = mul(&[-lo, 1.0], &[-hi, 1.0]);
    force = mul(&force, q);
    if through_zero {
        force = mul(&force, &[0.0, 1.0]);
    }
    let mut energy = vec![0.0];
    energy.extend(force.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
    PotentialSpec::new(PotentialKind::Polynomial(energy), lo, hi).unwrap()
}

#[derive(Debug, Clone)]
struct Case {
    potential: PotentialSpec,
    points: usize,
    epsilon: f64,
    dt_fraction: f64,
    seed: u64,
}

fn case(through_zero: bool) -> impl Strategy<Value = Case> {
    (
        -2.0f64..-0.2,
        0.2f64..2.0,
        prop::collection::vec(-1.0f64..1.0, 1..3),
        3usize..96,
        0.0f64..0.2,
        0.05f64..=1.0,
        any::<u64>(),
    )
        .prop_map(move |(lo, hi, mut q, points, epsilon, dt_fraction, seed)| {
            // Keep q away from zero so the force is nontrivial.
            q[0] = q[0].signum() * (q[0].abs() + 0.1);
            Case {
                potential: potential_with_roots(lo, hi, &q, through_zero),
                points,
                epsilon,
                dt_fraction,
                seed,
            }
        })
}

fn check_case(c: &Case, steps: usize) -> Result<(), TestCaseError> {
    let p = &c.potential;
    let report = p.validate_hypotheses();
    prop_assert!(report.endpoints_vanish, "{report:?}");
    let bounds = p.stability_bounds().unwrap();
    prop_assume!(bounds.dt_max.is_finite());
    let g = GridSpec::new(c.points, 1.0).unwrap();
    let s = SchemeParams::new(c.epsilon, bounds.dt_max * c.dt_fraction, &g).unwrap();
    let monitors = Monitors::new(SchemeKind::SemiImplicit, p, &g, &s, &bounds, &report);
    prop_assert!(monitors.max_principle_active());

    let mut stepper =
        Stepper::new(SchemeKind::SemiImplicit, p, &g, &s, NewtonParams::default()).unwrap();
    let mut state = make_initial(&InitialCondition::RandomUniform { seed: c.seed }, p, &g).unwrap();
    let mut prev = monitors.initial_record(&state);
    for _ in 0..steps {
        state = stepper.advance(&state).unwrap();
        let rec = monitors.evaluate(&prev, &state);
        for v in &rec.monitors {
            prop_assert!(!v.violated(), "step {}: {v:?}", rec.step);
        }
        let tol = 1e-12 * (1.0 + p.gamma_minus().abs().max(p.gamma_plus().abs()));
        prop_assert!(rec.min_val >= p.gamma_minus() - tol && rec.max_val <= p.gamma_plus() + tol);
        prev = rec;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_and_energy_hold_for_general_potentials(c in case(false)) {
        check_case(&c, 60)?;
    }

    #[test]
    fn l1_growth_holds_when_force_vanishes_at_zero(c in case(true)) {
        let report = c.potential.validate_hypotheses();
        prop_assert!(report.f_vanishes_at_zero);
        check_case(&c, 60)?;
    }

    #[test]
    fn constant_fields_step_identically(c in -1.0f64..1.0, dt in 0.01f64..0.5, eps in 0.0f64..0.5) {
        let p = PotentialSpec::double_well();
        let g = GridSpec::new(12, 1.0).unwrap();
        let s = SchemeParams::new(eps, dt, &g).unwrap();
        let st = FieldState::constant(12, c);
        let expected = c - dt * p.eval_force(c);
        for kind in [SchemeKind::SemiImplicit, SchemeKind::Explicit] {
            let next = Stepper::new(kind, &p, &g, &s, NewtonParams::default()).unwrap().advance(&st).unwrap();
            for v in &next.values {
                prop_assert!((v - expected).abs() <= 1e-13);
            }
        }
    }
}

fn long_run() -> phasefield_core::RunResult {
    let mut cfg = RunConfig::double_well(
        128,
        1.0,
        0.02,
        10_000,
        InitialCondition::RandomUniform { seed: 9 },
    )
    .unwrap();
    cfg.dt = DtChoice::Fixed(0.25);
    run(&cfg).unwrap()
}

#[test]
fn energy_chain_drift_is_negligible() {
    let res = long_run();
    let drift: f64 = res
        .records
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy).max(0.0))
        .sum();
    assert!(drift <= 1e-8, "cumulative upward drift {drift}");
    assert!(res.summary.first_violation.is_none());
}

#[test]
fn l1_chain_over_whole_run() {
    let res = long_run();
    let l1_0 = res.records[0].l1_norm;
    for r in &res.records {
        let bound = (1.0 * r.time).exp() * l1_0 * (1.0 + 1e-9);
        assert!(
            r.l1_norm <= bound,
            "step {}: {} > {bound}",
            r.step,
            r.l1_norm
        );
    }
}

#[test]
fn energy_floor() {
    // E_h >= |Omega| min F over the observed range; F >= 0 for the double well.
    let res = long_run();
    for r in &res.records {
        assert!(r.energy >= -1e-10);
        assert!(r.min_val <= r.max_val);
    }
}
