//! Shrinkage profiles φ(z) for rules of the form δ = (I − G·φ(z)/z)·x.
//!
//! Three families are supported: the MLE (φ ≡ 0), the Stein form
//! φ(z) = c₁z/(c₂ + z), and the generalized-Bayes profile under the
//! generalized harmonic prior,
//!
//! ```text
//!     φ*(z) = z · N(z) / D(z),   N(z) = ∫₀¹ λ^{p/2−1} e^{−zλ/2} dλ,
//!                                D(z) = ∫₀¹ λ^{p/2−2} e^{−zλ/2} dλ.
//! ```
//!
//! Writing I_a(z) = ∫₀¹ λ^a e^{−zλ/2} dλ and x = z/2, integration by parts
//! gives x·I_a = a·I_{a−1} − e^{−x}. Two consequences are used throughout:
//!
//! * φ*(z) = (p − 2) − 2e^{−x}/D(z), which is exact and free of cancellation
//!   for large z;
//! * φ*′(z) = e^{−x}(1 − N/D)/D, and (φ*/z − φ*′)/z = (M·D − N²)/(2D²) with
//!   M = I_{p/2}.
//!
//! The moments are evaluated from a positive (Kummer) series for I_{p/2}
//! followed by the downward recurrence, which only adds positive terms, when
//! z ≤ 50, and from the upward recurrence started at a closed form when z > 50.

use std::fmt;

use statrs::function::erf::erf;

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Above this z, φ* is returned as its limit p − 2.
pub const GB_LIMIT_Z: f64 = 1e8;

const SERIES_MAX_Z: f64 = 1e-3;
const RECURRENCE_MIN_Z: f64 = 50.0;
const QUAD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiSpec {
    /// φ ≡ 0, i.e. δ = x.
    Mle,
    /// φ(z) = c₁z/(c₂ + z) with c₁ > 0, c₂ ≥ 0.
    SteinForm { c1: f64, c2: f64 },
    /// Generalized-Bayes profile φ* for dimension p ≥ 3.
    GeneralizedBayes { p: usize },
}

/// φ(z) together with φ′(z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub value: f64,
    pub derivative: f64,
}

/// Everything the risk engines need from φ at one z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiTerms {
    /// φ(z)
    pub value: f64,
    /// φ(z)/z, its right limit at z = 0.
    pub ratio: f64,
    /// φ′(z)
    pub derivative: f64,
    /// (φ(z)/z − φ′(z))/z
    pub curvature: f64,
}

impl PhiTerms {
    const ZERO: PhiTerms = PhiTerms {
        value: 0.0,
        ratio: 0.0,
        derivative: 0.0,
        curvature: 0.0,
    };
}

impl PhiSpec {
    pub fn stein_form(c1: f64, c2: f64) -> Result<Self> {
        let spec = PhiSpec::SteinForm { c1, c2 };
        spec.validate()?;
        Ok(spec)
    }

    /// The James–Stein variant with c₁ = c₂ = p − 2.
    pub fn james_stein_variant(p: usize) -> Result<Self> {
        if p < 3 {
            return Err(Error::DimensionTooSmall(p));
        }
        Self::stein_form((p - 2) as f64, (p - 2) as f64)
    }

    pub fn generalized_bayes(p: usize) -> Result<Self> {
        let spec = PhiSpec::GeneralizedBayes { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PhiSpec::Mle => Ok(()),
            PhiSpec::SteinForm { c1, c2 } => {
                if !(c1.is_finite() && c1 > 0.0) {
                    return Err(invalid("c1", c1, "must be finite and positive"));
                }
                if !(c2.is_finite() && c2 >= 0.0) {
                    return Err(invalid("c2", c2, "must be finite and non-negative"));
                }
                Ok(())
            }
            PhiSpec::GeneralizedBayes { p } => {
                if p < 3 {
                    Err(Error::DimensionTooSmall(p))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// sup_z φ(z).
    pub fn sup(&self) -> f64 {
        match *self {
            PhiSpec::Mle => 0.0,
            PhiSpec::SteinForm { c1, .. } => c1,
            PhiSpec::GeneralizedBayes { p } => (p - 2) as f64,
        }
    }

    /// lim_{z→0⁺} φ(z)/z; infinite for the Stein form with c₂ = 0.
    pub fn ratio_at_zero(&self) -> f64 {
        match *self {
            PhiSpec::Mle => 0.0,
            PhiSpec::SteinForm { c1, c2 } => {
                if c2 > 0.0 {
                    c1 / c2
                } else {
                    f64::INFINITY
                }
            }
            PhiSpec::GeneralizedBayes { p } => (p - 2) as f64 / p as f64,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PhiSpec::Mle)
    }

    /// φ(z).
    pub fn eval(&self, z: f64) -> Result<f64> {
        self.checked(z).map(|t| t.value)
    }

    /// φ′(z).
    pub fn derivative(&self, z: f64) -> Result<f64> {
        self.checked(z).map(|t| t.derivative)
    }

    pub fn value(&self, z: f64) -> Result<PhiValue> {
        self.checked(z).map(|t| PhiValue {
            value: t.value,
            derivative: t.derivative,
        })
    }

    pub fn checked(&self, z: f64) -> Result<PhiTerms> {
        self.validate()?;
        if !(z >= 0.0) {
            return Err(invalid("z", z, "phi is defined for z >= 0"));
        }
        Ok(self.terms(z))
    }

    /// Unchecked evaluation for hot loops; assumes a validated spec and z ≥ 0.
    #[inline]
    pub fn terms(&self, z: f64) -> PhiTerms {
        match *self {
            PhiSpec::Mle => PhiTerms::ZERO,
            PhiSpec::SteinForm { c1, c2 } => stein_terms(c1, c2, z),
            PhiSpec::GeneralizedBayes { p } => gb_terms(p, z),
        }
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Mle => write!(f, "MLE"),
            PhiSpec::SteinForm { c1, c2 } => write!(f, "SteinForm(c1={c1}, c2={c2})"),
            PhiSpec::GeneralizedBayes { p } => write!(f, "GeneralizedBayes(p={p})"),
        }
    }
}

#[inline]
fn stein_terms(c1: f64, c2: f64, z: f64) -> PhiTerms {
    let denom = c2 + z;
    if denom == 0.0 {
        // c₂ = 0, z = 0: φ(0) = c₁ by continuity, φ/z diverges.
        return PhiTerms {
            value: c1,
            ratio: f64::INFINITY,
            derivative: 0.0,
            curvature: f64::INFINITY,
        };
    }
    let ratio = c1 / denom;
    PhiTerms {
        value: ratio * z,
        ratio,
        derivative: c1 * c2 / (denom * denom),
        curvature: ratio / denom,
    }
}

/// D, N, M = I_{p/2−2}, I_{p/2−1}, I_{p/2} at z, plus e^{−z/2}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GbMoments {
    pub d: f64,
    pub n: f64,
    pub m: f64,
    pub emx: f64,
}

pub(crate) fn gb_moments(p: usize, z: f64) -> GbMoments {
    let x = 0.5 * z;
    let emx = (-x).exp();
    let half_p = 0.5 * p as f64;
    if z <= RECURRENCE_MIN_Z || !upward_is_stable(half_p, z) {
        let m = if z <= RECURRENCE_MIN_Z || x < 600.0 {
            kummer_integral(half_p, x)
        } else {
            quadrature_integral(half_p, z)
        };
        let n = (x * m + emx) / half_p;
        let d = (x * n + emx) / (half_p - 1.0);
        GbMoments { d, n, m, emx }
    } else {
        let d = recurrence_integral(half_p - 2.0, x);
        let n = ((half_p - 1.0) * d - emx) / x;
        let m = (half_p * n - emx) / x;
        GbMoments { d, n, m, emx }
    }
}

fn gb_terms(p: usize, z: f64) -> PhiTerms {
    let pm2 = (p - 2) as f64;
    if z > GB_LIMIT_Z {
        let ratio = pm2 / z;
        return PhiTerms {
            value: pm2,
            ratio,
            derivative: 0.0,
            curvature: ratio / z,
        };
    }
    let GbMoments { d, n, m, emx } = gb_moments(p, z);
    let ratio = n / d;
    let value = if z > RECURRENCE_MIN_Z {
        pm2 - 2.0 * emx / d
    } else {
        z * ratio
    };
    PhiTerms {
        value,
        ratio,
        derivative: emx * (1.0 - ratio) / d,
        curvature: 0.5 * (m / d - ratio * ratio),
    }
}

/// φ*′ from the quotient rule with N′ = −M/2, D′ = −N/2; used as a
/// cross-check of the closed form in `PhiSpec::terms`.
pub fn gb_derivative_quotient_rule(p: usize, z: f64) -> f64 {
    let GbMoments { d, n, m, .. } = gb_moments(p, z);
    n / d - 0.5 * z * (m * d - n * n) / (d * d)
}

fn upward_is_stable(a_top: f64, z: f64) -> bool {
    // Each upward step multiplies rounding error by about 2a/z.
    4.0 * a_top < z
}

fn is_half_integer(a: f64) -> bool {
    (2.0 * a).fract() == 0.0 && a >= -0.5
}

/// I_a(z) = ∫₀¹ λ^a e^{−zλ/2} dλ for a > −1, z ≥ 0, to about 1e-10 relative.
///
/// Small z uses the alternating power series, large z the upward
/// recurrence from a closed-form base case (half-integer a only), and
/// everything else adaptive Gauss–Kronrod after the substitution λ = u².
pub fn incomplete_integral(a: f64, z: f64) -> Result<f64> {
    if !(a > -1.0) || !a.is_finite() {
        return Err(invalid("a", a, "exponent must exceed -1"));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(invalid("z", z, "must be finite and >= 0"));
    }
    if z == 0.0 {
        return Ok(1.0 / (a + 1.0));
    }
    if z < SERIES_MAX_Z {
        return Ok(power_series_integral(a, 0.5 * z));
    }
    if z > RECURRENCE_MIN_Z && is_half_integer(a) && upward_is_stable(a, z) {
        return Ok(recurrence_integral(a, 0.5 * z));
    }
    Ok(quadrature_integral(a, z))
}

/// Σₖ (−x)ᵏ / (k!·(a + k + 1)).
pub fn power_series_integral(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / (a + 1.0);
    for k in 1..200 {
        term *= -x / k as f64;
        let contrib = term / (a + k as f64 + 1.0);
        sum += contrib;
        if contrib.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// e^{−x} Σₖ xᵏ / ((a+1)(a+2)…(a+k+1)); every term is positive.
pub fn kummer_integral(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / (a + 1.0);
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= x / (a + k + 1.0);
        sum += term;
        if (term <= 1e-17 * sum && k > x) || k > 5000.0 {
            break;
        }
        k += 1.0;
    }
    (-x).exp() * sum
}

/// Upward recurrence x·I_a = a·I_{a−1} − e^{−x} from I_0 or I_{−1/2}.
fn recurrence_integral(a: f64, x: f64) -> f64 {
    let emx = (-x).exp();
    let (mut order, mut value) = if a.fract() == 0.0 {
        (0.0, -(-x).exp_m1() / x)
    } else {
        let r = x.sqrt();
        (-0.5, (std::f64::consts::PI / x).sqrt() * erf(r))
    };
    while order < a {
        order += 1.0;
        value = (order * value - emx) / x;
    }
    value
}

fn quadrature_integral(a: f64, z: f64) -> f64 {
    let x = 0.5 * z;
    let power = 2.0 * a + 1.0;
    // λ = u², dλ = 2u du.
    let integrand = move |u: f64| 2.0 * u.powf(power) * (-x * u * u).exp();
    if x > 100.0 {
        // Mass concentrates on u ≲ 40/√x; split so the first panel resolves it.
        let cut = (40.0 / x.sqrt()).min(1.0);
        let head = quadrature::integrate(integrand, 0.0, cut, QUAD_REL_TOL, 0.0).value;
        let tail = quadrature::integrate(integrand, cut, 1.0, QUAD_REL_TOL, 1e-300).value;
        return head + tail;
    }
    quadrature::integrate(integrand, 0.0, 1.0, QUAD_REL_TOL, 0.0).value
}

pub fn phi_eval(spec: &PhiSpec, z: f64) -> Result<f64> {
    spec.eval(z)
}

pub fn phi_prime(spec: &PhiSpec, z: f64) -> Result<f64> {
    spec.derivative(z)
}

/// Logarithmically spaced grid with `n ≥ 2` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "invalid log grid");
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// The z grid used for shape checks: 400 log-spaced points on [1e-4, 1e6].
pub fn standard_z_grid() -> Vec<f64> {
    log_grid(1e-4, 1e6, 400)
}

/// A grid point at which a shape property fails beyond rounding tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeViolation {
    pub property: &'static str,
    pub z: f64,
    pub excess: f64,
}

/// Checks on `grid` that φ is non-negative, non-decreasing and concave
/// (divided-difference slopes non-increasing) and that φ(z)/z is
/// non-increasing. Returns every violation found.
pub fn shape_violations(spec: &PhiSpec, grid: &[f64]) -> Vec<ShapeViolation> {
    let terms: Vec<PhiTerms> = grid.iter().map(|&z| spec.terms(z)).collect();
    let scale = spec.sup().max(1.0);
    let eps = 8.0 * f64::EPSILON * scale;
    let mut out = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        if t.value < -eps {
            out.push(ShapeViolation {
                property: "non-negative",
                z: grid[i],
                excess: -t.value,
            });
        }
    }
    for i in 1..grid.len() {
        let rise = terms[i - 1].value - terms[i].value;
        if rise > eps {
            out.push(ShapeViolation {
                property: "non-decreasing",
                z: grid[i],
                excess: rise,
            });
        }
        let ratio_rise = terms[i].ratio - terms[i - 1].ratio;
        if ratio_rise > 8.0 * f64::EPSILON * terms[i - 1].ratio.abs() {
            out.push(ShapeViolation {
                property: "phi/z non-increasing",
                z: grid[i],
                excess: ratio_rise,
            });
        }
    }
    for i in 1..grid.len().saturating_sub(1) {
        let h0 = grid[i] - grid[i - 1];
        let h1 = grid[i + 1] - grid[i];
        let s0 = (terms[i].value - terms[i - 1].value) / h0;
        let s1 = (terms[i + 1].value - terms[i].value) / h1;
        let tol = 2.0 * eps / h0.min(h1);
        if s1 - s0 > tol {
            out.push(ShapeViolation {
                property: "concave",
                z: grid[i],
                excess: s1 - s0,
            });
        }
    }
    out
}

/// `Ok(())` if φ passes every shape check on `grid`, otherwise the first
/// violation as an error.
pub fn check_shape(spec: &PhiSpec, grid: &[f64]) -> Result<()> {
    spec.validate()?;
    match shape_violations(spec, grid).into_iter().next() {
        None => Ok(()),
        Some(v) => Err(Error::ShapePrecondition {
            profile: spec.to_string(),
            property: v.property,
            z: v.z,
        }),
    }
}
