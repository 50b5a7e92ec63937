//! Polynomial bulk potentials `F`, their derivatives `f = F'` and `f'`, and the
//! quantities the stability results depend on: the extrema of `f'` over the
//! invariant interval `[gamma_minus, gamma_plus]` and the admissible time step.
//!
//! Only polynomial potentials are supported. Differentiation is exact on the
//! coefficient vectors, so `F`, `f` and `f'` are always mutually consistent and
//! the extrema of `f'` can be located exactly through the real roots of `f''`.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of `F(u) = (u^2 - 1)^2 / 4`, ascending powers.
pub const DOUBLE_WELL_COEFFS: [f64; 5] = [0.25, 0.0, -0.5, 0.0, 0.25];

/// Relative tolerance used when checking that `f` vanishes at a point.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coeffs", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `F(u) = (u^2 - 1)^2 / 4`, so `f(u) = u^3 - u`.
    DoubleWell,
    /// Coefficients of `F` in ascending powers of `u`.
    Polynomial(Vec<f64>),
}

/// A polynomial potential together with its invariant interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    kind: PotentialKind,
    gamma_minus: f64,
    gamma_plus: f64,
    #[serde(skip)]
    energy: Vec<f64>,
    #[serde(skip)]
    force: Vec<f64>,
    #[serde(skip)]
    force_prime: Vec<f64>,
}

/// Extrema of `f'` over `[gamma_minus, gamma_plus]` and the resulting step bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBounds {
    pub max_fprime: f64,
    /// `L = -min f'` over the invariant interval.
    pub lipschitz_l: f64,
    /// Largest `dt` with `dt * max_fprime <= 1`; infinite when `max_fprime <= 0`.
    pub dt_max: f64,
}

/// Outcome of checking the hypotheses of the bound-preservation and
/// L1-stability results. A report never rejects a potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub endpoints_vanish: bool,
    pub f_at_gamma_minus: f64,
    pub f_at_gamma_plus: f64,
    pub f_vanishes_at_zero: bool,
    pub f_at_zero: f64,
    /// `gamma_minus < 0 < gamma_plus`.
    pub zero_interior: bool,
    pub tolerance: f64,
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn trim(coeffs: &[f64]) -> &[f64] {
    let len = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    &coeffs[..len]
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, gamma_minus: f64, gamma_plus: f64) -> Result<Self> {
        if !gamma_minus.is_finite() || !gamma_plus.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "interval bounds must be finite, got [{gamma_minus}, {gamma_plus}]"
            )));
        }
        if gamma_minus >= gamma_plus {
            return Err(Error::InvalidPotential(format!(
                "gamma_minus must be below gamma_plus, got [{gamma_minus}, {gamma_plus}]"
            )));
        }
        let energy = match &kind {
            PotentialKind::DoubleWell => DOUBLE_WELL_COEFFS.to_vec(),
            PotentialKind::Polynomial(c) => {
                if c.is_empty() {
                    return Err(Error::InvalidPotential("empty coefficient list".into()));
                }
                if let Some(bad) = c.iter().find(|c| !c.is_finite()) {
                    return Err(Error::InvalidPotential(format!(
                        "non-finite coefficient {bad}"
                    )));
                }
                c.clone()
            }
        };
        let force = derivative(&energy);
        let force_prime = derivative(&force);
        Ok(Self {
            kind,
            gamma_minus,
            gamma_plus,
            energy,
            force,
            force_prime,
        })
    }

    /// The standard double well on `[-1, 1]`.
    pub fn double_well() -> Self {
        Self::new(PotentialKind::DoubleWell, -1.0, 1.0).expect("valid double well")
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn gamma_minus(&self) -> f64 {
        self.gamma_minus
    }

    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }

    /// Coefficients of `F`, ascending powers.
    pub fn coefficients(&self) -> &[f64] {
        &self.energy
    }

    /// True when `F` is the double well, whichever way it was specified.
    pub fn is_double_well(&self) -> bool {
        trim(&self.energy) == DOUBLE_WELL_COEFFS
    }

    #[inline]
    pub fn eval_energy(&self, u: f64) -> f64 {
        horner(&self.energy, u)
    }

    #[inline]
    pub fn eval_force(&self, u: f64) -> f64 {
        horner(&self.force, u)
    }

    #[inline]
    pub fn eval_force_prime(&self, u: f64) -> f64 {
        horner(&self.force_prime, u)
    }

    fn scale(&self) -> f64 {
        1.0 + self.gamma_minus.abs().max(self.gamma_plus.abs())
    }

    pub fn validate_hypotheses(&self) -> ValidationReport {
        let tolerance = HYPOTHESIS_TOL * self.scale();
        let f_at_gamma_minus = self.eval_force(self.gamma_minus);
        let f_at_gamma_plus = self.eval_force(self.gamma_plus);
        let f_at_zero = self.eval_force(0.0);
        let zero_interior = self.gamma_minus < 0.0 && 0.0 < self.gamma_plus;
        ValidationReport {
            endpoints_vanish: f_at_gamma_minus.abs() <= tolerance
                && f_at_gamma_plus.abs() <= tolerance,
            f_at_gamma_minus,
            f_at_gamma_plus,
            f_vanishes_at_zero: zero_interior && f_at_zero.abs() <= tolerance,
            f_at_zero,
            zero_interior,
            tolerance,
        }
    }

    /// Exact extrema of `f'` on the closed invariant interval.
    ///
    /// Candidates are the two endpoints plus every real root of `f''` inside the
    /// interval; the roots come from the eigenvalues of the companion matrix.
    pub fn stability_bounds(&self) -> Result<StabilityBounds> {
        let (lo, hi) = (self.gamma_minus, self.gamma_plus);
        let second = derivative(&self.force_prime);
        let mut candidates = vec![lo, hi];
        candidates.extend(
            real_roots(trim(&second))?
                .into_iter()
                .filter(|r| (lo..=hi).contains(r)),
        );

        let values = candidates.iter().map(|&u| self.eval_force_prime(u));
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), v| {
            (mn.min(v), mx.max(v))
        });
        let dt_max = if max > 0.0 { 1.0 / max } else { f64::INFINITY };
        Ok(StabilityBounds {
            max_fprime: max,
            lipschitz_l: -min,
            dt_max,
        })
    }
}

pub fn eval_energy(p: &PotentialSpec, u: f64) -> f64 {
    p.eval_energy(u)
}

pub fn eval_force(p: &PotentialSpec, u: f64) -> f64 {
    p.eval_force(u)
}

pub fn eval_force_prime(p: &PotentialSpec, u: f64) -> f64 {
    p.eval_force_prime(u)
}

pub fn stability_bounds(p: &PotentialSpec) -> Result<StabilityBounds> {
    p.stability_bounds()
}

pub fn validate_hypotheses(p: &PotentialSpec) -> ValidationReport {
    p.validate_hypotheses()
}

/// Real roots of the polynomial with the given (trimmed) ascending coefficients.
///
/// Near-real eigenvalues are kept as their real part; the caller only uses
/// roots as evaluation points, so a spurious candidate can never overstate an
/// extremum. Each root is polished with a few Newton steps.
fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    // Zero roots come straight off the low-order coefficients; a nilpotent
    // companion block is a bad case for the Schur iteration.
    let zeros = coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots = if zeros > 0 { vec![0.0] } else { Vec::new() };
    roots.extend(nonzero_real_roots(&coeffs[zeros.min(coeffs.len())..])?);
    Ok(roots)
}

fn nonzero_real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    let degree = match coeffs.len() {
        0 | 1 => return Ok(Vec::new()),
        n => n - 1,
    };
    let lead = coeffs[degree];
    if degree == 1 {
        return Ok(vec![-coeffs[0] / lead]);
    }

    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for (i, &c) in coeffs[..degree].iter().enumerate() {
        let entry = -c / lead;
        if !entry.is_finite() {
            return Err(Error::RootFindingFailure(format!(
                "companion entry {entry} from coefficient {c} and leading {lead}"
            )));
        }
        companion[(i, degree - 1)] = entry;
    }

    let schur = Schur::try_new(companion, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::RootFindingFailure(format!("Schur iteration failed for degree {degree}"))
    })?;
    let slope = derivative(coeffs);
    let roots = schur
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| {
            let mut x = z.re;
            for _ in 0..3 {
                let d = horner(&slope, x);
                if d == 0.0 {
                    break;
                }
                let next = x - horner(coeffs, x) / d;
                if !next.is_finite() || horner(coeffs, next).abs() >= horner(coeffs, x).abs() {
                    break;
                }
                x = next;
            }
            x
        })
        .collect();
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(c: &[f64], lo: f64, hi: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialKind::Polynomial(c.to_vec()), lo, hi).unwrap()
    }

    #[test]
    fn double_well_values() {
        let p = PotentialSpec::double_well();
        assert_eq!(p.eval_energy(0.0), 0.25);
        assert_eq!(p.eval_energy(1.0), 0.0);
        assert_eq!(p.eval_force(1.0), 0.0);
        assert_eq!(p.eval_force(0.0), 0.0);
        assert_eq!(p.eval_force(0.5), -0.375);
        assert_eq!(p.eval_force_prime(0.0), -1.0);
        assert_eq!(p.eval_force_prime(1.0), 2.0);
        assert_eq!(p.eval_force_prime(-1.0), 2.0);
    }

    #[test]
    fn quartic_by_horner() {
        let p = poly(&[0.25, 0.0, -0.5, 0.0, 0.25], -1.0, 1.0);
        // (0.25 - 1)^2 / 4
        assert_eq!(p.eval_energy(0.5), 0.140625);
    }

    #[test]
    fn double_well_matches_explicit_polynomial_bitwise() {
        let dw = PotentialSpec::double_well();
        let p = poly(&DOUBLE_WELL_COEFFS, -1.0, 1.0);
        assert!(p.is_double_well());
        for k in -300..=300 {
            let u = k as f64 * 0.01 + 0.001;
            assert_eq!(dw.eval_energy(u).to_bits(), p.eval_energy(u).to_bits());
            assert_eq!(dw.eval_force(u).to_bits(), p.eval_force(u).to_bits());
            assert_eq!(
                dw.eval_force_prime(u).to_bits(),
                p.eval_force_prime(u).to_bits()
            );
        }
    }

    #[test]
    fn bounds_for_double_well() {
        let b = PotentialSpec::double_well().stability_bounds().unwrap();
        assert_eq!(b.max_fprime, 2.0);
        assert_eq!(b.lipschitz_l, 1.0);
        assert_eq!(b.dt_max, 0.5);
    }

    #[test]
    fn bounds_for_quadratics() {
        let b = poly(&[0.0, 0.0, 0.5], -1.0, 1.0)
            .stability_bounds()
            .unwrap();
        assert_eq!((b.max_fprime, b.dt_max), (1.0, 1.0));
        let b = poly(&[0.0, 0.0, -0.5], -1.0, 1.0)
            .stability_bounds()
            .unwrap();
        assert_eq!(b.max_fprime, -1.0);
        assert!(b.dt_max.is_infinite());
        assert!(b.max_fprime >= -b.lipschitz_l);
    }

    #[test]
    fn bounds_use_interior_critical_points() {
        // F = 0.4 u^6 - u^4, so f'(u) = 12 u^4 - 12 u^2.
        let p = poly(&[0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.4], -2.0, 2.0);
        let b = p.stability_bounds().unwrap();
        // Minimum at u^2 = 1/2 gives -3; maximum at |u| = 2 gives 144.
        assert!((b.lipschitz_l - 3.0).abs() < 1e-12, "{b:?}");
        assert!((b.max_fprime - 144.0).abs() < 1e-10, "{b:?}");
    }

    #[test]
    fn hypothesis_report() {
        let r = PotentialSpec::double_well().validate_hypotheses();
        assert!(r.endpoints_vanish && r.f_vanishes_at_zero);

        // F = u^2/2 - u/2: f = u - 0.5, f(1) = 0.5.
        let r = poly(&[0.0, -0.5, 0.5], -1.0, 1.0).validate_hypotheses();
        assert!(!r.endpoints_vanish);
        assert_eq!(r.f_at_gamma_plus, 0.5);

        let r = PotentialSpec::new(PotentialKind::DoubleWell, 0.0, 1.0)
            .unwrap()
            .validate_hypotheses();
        assert!(!r.f_vanishes_at_zero);
        assert!(r.endpoints_vanish);
        assert_eq!(r.f_at_zero, 0.0);
    }

    #[test]
    fn rejects_bad_intervals_and_coefficients() {
        assert!(PotentialSpec::new(PotentialKind::DoubleWell, 1.0, 1.0).is_err());
        assert!(PotentialSpec::new(PotentialKind::DoubleWell, f64::NAN, 1.0).is_err());
        assert!(PotentialSpec::new(PotentialKind::Polynomial(vec![]), -1.0, 1.0).is_err());
        assert!(PotentialSpec::new(
            PotentialKind::Polynomial(vec![1.0, f64::INFINITY]),
            -1.0,
            1.0
        )
        .is_err());
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn random_potential() -> impl Strategy<Value = PotentialSpec> {
        (
            prop::collection::vec(-1.0f64..1.0, 1..7),
            -1.5f64..0.5,
            0.1f64..1.0,
        )
            .prop_map(|(c, lo, width)| poly(&c, lo, lo + width))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn derivatives_match_central_differences(p in random_potential(), t in 0.0f64..1.0) {
            let h = 1e-5;
            let u = p.gamma_minus() - 1.0 + t * (p.gamma_plus() - p.gamma_minus() + 2.0);
            let fd = (p.eval_energy(u + h) - p.eval_energy(u - h)) / (2.0 * h);
            let f = p.eval_force(u);
            prop_assert!((fd - f).abs() <= 1e-6 * (1.0 + f.abs()), "F' {fd} vs f {f}");
            let fd = (p.eval_force(u + h) - p.eval_force(u - h)) / (2.0 * h);
            let df = p.eval_force_prime(u);
            prop_assert!((fd - df).abs() <= 1e-6 * (1.0 + df.abs()), "f' {fd} vs {df}");
        }

        #[test]
        fn bounds_for_shifted_monomials(c in -2.0f64..2.0, shift in -1.0f64..1.0, deg in 3usize..8) {
            // F = c (u - shift)^deg has f'' with a root of multiplicity deg - 3 at shift.
            let coeffs: Vec<f64> = (0..=deg)
                .map(|k| c * binomial(deg, k) * (-shift).powi((deg - k) as i32))
                .collect();
            let p = poly(&coeffs, -1.5, 1.5);
            let b = p.stability_bounds().unwrap();
            for k in 0..=2000 {
                let u = -1.5 + 3.0 * k as f64 / 2000.0;
                let v = p.eval_force_prime(u);
                prop_assert!(v <= b.max_fprime + 1e-9 * (1.0 + v.abs()));
                prop_assert!(v >= -b.lipschitz_l - 1e-9 * (1.0 + v.abs()));
            }
        }

        #[test]
        fn bounds_dominate_dense_sampling(p in random_potential()) {
            let b = p.stability_bounds().unwrap();
            let (lo, hi) = (p.gamma_minus(), p.gamma_plus());
            for k in 0..=10_000 {
                let u = lo + (hi - lo) * k as f64 / 10_000.0;
                let v = p.eval_force_prime(u);
                prop_assert!(v <= b.max_fprime + 1e-12, "{v} > {}", b.max_fprime);
                prop_assert!(v >= -b.lipschitz_l - 1e-12, "{v} < {}", -b.lipschitz_l);
            }
            prop_assert!(b.max_fprime >= -b.lipschitz_l);
            if b.max_fprime > 0.0 {
                prop_assert!(b.dt_max * b.max_fprime <= 1.0 + 1e-15);
            } else {
                prop_assert!(b.dt_max.is_infinite());
            }
        }
    }
}
