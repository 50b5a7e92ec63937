//! Fixtures shared by the criterion benches.

use phasefield_core::scheme::{make_initial, NewtonParams};
use phasefield_core::{
    FieldState, GridSpec, InitialCondition, PotentialSpec, SchemeKind, SchemeParams, Stepper,
};

/// Grid sizes the benches sweep over.
pub const SIZES: [usize; 4] = [64, 256, 1024, 4096];

/// A deterministic right-hand side of length `n`.
pub fn rhs(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 * 0.37).sin()).collect()
}

/// Double-well stepper on `[0, 1)` with `eps = 0.01`, `dt = 0.5`, plus a
/// random starting field.
pub fn double_well_stepper(kind: SchemeKind, points: usize) -> (Stepper, FieldState) {
    let p = PotentialSpec::double_well();
    let g = GridSpec::new(points, 1.0).expect("grid");
    let dt = if kind == SchemeKind::Explicit {
        1e-3
    } else {
        0.5
    };
    let s = SchemeParams::new(0.01, dt, &g).expect("params");
    let stepper = Stepper::new(kind, &p, &g, &s, NewtonParams::default()).expect("stepper");
    let state =
        make_initial(&InitialCondition::RandomUniform { seed: 1 }, &p, &g).expect("initial");
    (stepper, state)
}
