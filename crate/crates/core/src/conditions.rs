//! Sufficient conditions for ordinary and ensemble minimaxity.
//!
//! Every checker returns a `ConditionReport` whose `margin` is the smallest
//! slack of the inequality over its domain, divided by 2(p − 2) so that
//! reports are comparable across dimensions. `Method::Grid` reports are
//! numerical evidence on a finite grid; `Method::Analytic` reports are exact.

use std::fmt;

use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::model::{casella_g, CovarianceSpec, ShrinkageMatrix};
use crate::phi::{check_shape, log_grid, shape_violations, standard_z_grid, PhiSpec};
use crate::quadrature;

/// Slack within this of zero counts as equality (reported as margin 0).
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Analytic,
    Grid,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Analytic => "ANALYTIC",
            Method::Grid => "GRID",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionKind {
    /// φ non-decreasing and 0 ≤ φ ≤ h(Σ, G).
    Ordinary,
    /// φ(p·minᵢkᵢ) ≤ 2(p−2)·minᵢkᵢ/maxᵢkᵢ with kᵢ = gᵢ(1 + τ/σᵢ²), for all τ.
    EnsembleGeneral,
    /// The same condition specialised to G = Σ/σ₁².
    EnsembleCasella,
    /// The closed-form region for φ(z) = c₁z/(c₂ + z) under G = Σ/σ₁².
    SteinFormAnalytic,
}

impl ConditionKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ConditionKind::Ordinary => "ordinary",
            ConditionKind::EnsembleGeneral => "ensemble-general",
            ConditionKind::EnsembleCasella => "ensemble-casella",
            ConditionKind::SteinFormAnalytic => "ensemble-stein-analytic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: ConditionKind,
    pub holds: bool,
    /// Minimum normalised slack; `holds == (margin >= 0)`.
    pub margin: f64,
    /// τ (or z) where the slack is smallest. `0.0` and `f64::INFINITY` stand
    /// for the limits τ → 0⁺ and τ → ∞.
    pub witness: Option<f64>,
    pub method: Method,
    pub note: Option<String>,
}

fn finish(condition: ConditionKind, margin: f64, witness: Option<f64>, method: Method, note: Option<String>) -> ConditionReport {
    let margin = if (-MARGIN_TOL..0.0).contains(&margin) { 0.0 } else { margin };
    ConditionReport {
        condition,
        holds: margin >= 0.0,
        margin,
        witness,
        method,
        note,
    }
}

fn check_dims(sigma: &CovarianceSpec, g: &ShrinkageMatrix, phi: &PhiSpec) -> Result<()> {
    if g.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: g.dim(),
        });
    }
    phi.validate()?;
    if let PhiSpec::GeneralizedBayes { p } = *phi {
        if p != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: p,
            });
        }
    }
    Ok(())
}

/// h(Σ, G) = 2(Σgᵢσᵢ² / maxᵢ gᵢσᵢ² − 2).
pub fn h_value(sigma: &CovarianceSpec, g: &ShrinkageMatrix) -> Result<f64> {
    if g.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: g.dim(),
        });
    }
    let products: Vec<f64> = g.g().iter().zip(sigma.sigma2()).map(|(a, b)| a * b).collect();
    let top = products.iter().copied().fold(f64::MIN, f64::max);
    let total: f64 = products.iter().sum();
    Ok(2.0 * (total / top - 2.0))
}

/// Baranchik-type sufficient condition for ordinary minimaxity.
///
/// The bound sup φ ≤ h(Σ, G) is exact (sup φ is known per family);
/// monotonicity of φ* is checked on the standard z grid, so generalized-Bayes
/// reports carry `Method::Grid`.
pub fn ordinary_minimax_check(phi: &PhiSpec, sigma: &CovarianceSpec, g: &ShrinkageMatrix) -> Result<ConditionReport> {
    check_dims(sigma, g, phi)?;
    let p = sigma.dim();
    let scale = 2.0 * (p - 2) as f64;
    let h = h_value(sigma, g)?;
    if phi.is_zero() {
        return Ok(finish(
            ConditionKind::Ordinary,
            h.max(0.0) / scale,
            None,
            Method::Analytic,
            Some("phi = 0: the MLE is minimax".into()),
        ));
    }
    let margin = (h - phi.sup()) / scale;
    if h <= 0.0 {
        return Ok(finish(
            ConditionKind::Ordinary,
            margin.min(-f64::MIN_POSITIVE),
            None,
            Method::Analytic,
            Some("h(Sigma, G) <= 0: no nontrivial phi admissible".into()),
        ));
    }
    let method = match phi {
        PhiSpec::GeneralizedBayes { .. } => Method::Grid,
        _ => Method::Analytic,
    };
    if matches!(phi, PhiSpec::GeneralizedBayes { .. }) {
        let grid = standard_z_grid();
        if let Some(v) = shape_violations(phi, &grid)
            .into_iter()
            .find(|v| v.property == "non-negative" || v.property == "non-decreasing")
        {
            return Ok(ConditionReport {
                condition: ConditionKind::Ordinary,
                holds: false,
                margin: margin.min(-v.excess),
                witness: Some(v.z),
                method,
                note: Some(format!("{} fails on grid", v.property)),
            });
        }
    }
    Ok(finish(ConditionKind::Ordinary, margin, None, method, None))
}

/// τ grid: 200 log-spaced points on [1e-4·σₚ², 1e4·σ₁²].
pub fn standard_tau_grid(sigma: &CovarianceSpec) -> Vec<f64> {
    log_grid(1e-4 * sigma.smallest(), 1e4 * sigma.largest(), 200)
}

/// 2(p−2)·min kᵢ/max kᵢ − φ(p·min kᵢ) at one τ, with kᵢ = gᵢ(1 + τ/σᵢ²).
pub fn ensemble_slack_general(phi: &PhiSpec, sigma: &CovarianceSpec, g: &ShrinkageMatrix, tau: f64) -> f64 {
    let p = sigma.dim();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (gi, s) in g.g().iter().zip(sigma.sigma2()) {
        let k = gi * (1.0 + tau / s);
        lo = lo.min(k);
        hi = hi.max(k);
    }
    2.0 * (p - 2) as f64 * lo / hi - phi.terms(p as f64 * lo).value
}

/// 2(p−2)(σₚ² + τ)/(σ₁² + τ) − φ(p(σₚ² + τ)/σ₁²).
pub fn ensemble_slack_casella(phi: &PhiSpec, sigma: &CovarianceSpec, tau: f64) -> f64 {
    let p = sigma.dim() as f64;
    let (top, bottom) = (sigma.largest(), sigma.smallest());
    2.0 * (p - 2.0) * (bottom + tau) / (top + tau) - phi.terms(p * (bottom + tau) / top).value
}

struct SlackScan {
    margin: f64,
    witness: f64,
}

fn scan(tau_grid: &[f64], at_zero: f64, at_infinity: f64, slack: impl Fn(f64) -> f64) -> SlackScan {
    let mut best = SlackScan {
        margin: at_zero,
        witness: 0.0,
    };
    for &tau in tau_grid {
        let s = slack(tau);
        if s < best.margin {
            best = SlackScan { margin: s, witness: tau };
        }
    }
    if at_infinity < best.margin {
        best = SlackScan {
            margin: at_infinity,
            witness: f64::INFINITY,
        };
    }
    best
}

fn check_tau_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(invalid("tau_grid", 0.0, "grid must be non-empty"));
    }
    if let Some(&bad) = tau_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(invalid("tau_grid", bad, "grid points must be positive"));
    }
    Ok(())
}

/// Ensemble-minimaxity condition for general G, scanned over `tau_grid`
/// plus the limits τ → 0⁺ and τ → ∞.
///
/// Fails with `Error::ShapePrecondition` if φ is not non-negative,
/// non-decreasing and concave with φ/z non-increasing on the z grid.
pub fn ensemble_condition_general(
    phi: &PhiSpec,
    sigma: &CovarianceSpec,
    g: &ShrinkageMatrix,
    tau_grid: &[f64],
) -> Result<ConditionReport> {
    check_dims(sigma, g, phi)?;
    check_tau_grid(tau_grid)?;
    check_shape(phi, &standard_z_grid())?;
    let p = sigma.dim();
    let scale = 2.0 * (p - 2) as f64;
    let gs = g.g();
    let g_min = gs.iter().copied().fold(f64::INFINITY, f64::min);
    let g_max = gs.iter().copied().fold(0.0, f64::max);
    let at_zero = scale * g_min / g_max - phi.terms(p as f64 * g_min).value;
    let slopes: Vec<f64> = gs.iter().zip(sigma.sigma2()).map(|(gi, s)| gi / s).collect();
    let s_min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = slopes.iter().copied().fold(0.0, f64::max);
    let at_infinity = scale * s_min / s_max - phi.sup();
    let best = scan(tau_grid, at_zero, at_infinity, |tau| ensemble_slack_general(phi, sigma, g, tau));
    Ok(finish(
        ConditionKind::EnsembleGeneral,
        best.margin / scale,
        Some(best.witness),
        Method::Grid,
        None,
    ))
}

/// Ensemble-minimaxity condition for G = Σ/σ₁².
pub fn ensemble_condition_casella(phi: &PhiSpec, sigma: &CovarianceSpec, tau_grid: &[f64]) -> Result<ConditionReport> {
    check_dims(sigma, &casella_g(sigma), phi)?;
    check_tau_grid(tau_grid)?;
    check_shape(phi, &standard_z_grid())?;
    let p = sigma.dim() as f64;
    let scale = 2.0 * (p - 2.0);
    let ratio = sigma.smallest() / sigma.largest();
    let at_zero = scale * ratio - phi.terms(p * ratio).value;
    let at_infinity = scale - phi.sup();
    let best = scan(tau_grid, at_zero, at_infinity, |tau| ensemble_slack_casella(phi, sigma, tau));
    Ok(finish(
        ConditionKind::EnsembleCasella,
        best.margin / scale,
        Some(best.witness),
        Method::Grid,
        None,
    ))
}

/// Exact verdict for φ(z) = c₁z/(c₂ + z) under G = Σ/σ₁²:
/// 0 < c₁ ≤ 2(p−2) and c₂ ≥ max(0, p(c₁/(2(p−2)) − σₚ²/σ₁²)).
///
/// The condition is affine in τ, pτ(2(p−2) − c₁) + 2(p−2)σ₁²(c₂ − p(c₁/(2(p−2)) − σₚ²/σ₁²)) ≥ 0,
/// so it holds for every τ > 0 iff slope and intercept are both non-negative.
pub fn stein_form_ensemble_analytic(c1: f64, c2: f64, sigma: &CovarianceSpec, p: usize) -> Result<ConditionReport> {
    if p != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: p,
        });
    }
    PhiSpec::stein_form(c1, c2)?;
    let scale = 2.0 * (p - 2) as f64;
    let pf = p as f64;
    let slope_slack = (scale - c1) / scale;
    let required_c2 = (pf * (c1 / scale - sigma.smallest() / sigma.largest())).max(0.0);
    let intercept_slack = (c2 - required_c2) / scale;
    let (margin, witness, note) = if slope_slack <= intercept_slack {
        let note = (slope_slack < 0.0).then(|| format!("tau-slope {} < 0", pf * (scale - c1)));
        (slope_slack, f64::INFINITY, note)
    } else {
        let note = (intercept_slack < 0.0).then(|| format!("c2 must be at least {required_c2}"));
        (intercept_slack, 0.0, note)
    };
    Ok(finish(ConditionKind::SteinFormAnalytic, margin, Some(witness), Method::Analytic, note))
}

/// 2(Σᵢ σᵢ⁴/σ₁⁴ − 2) for Σ = diag(a^{p−1}, …, 1); equals h(Σ, Σ/σ₁²).
pub fn casella_budget_geometric(p: usize, a: f64) -> f64 {
    let r = a.powi(-2);
    let total: f64 = (0..p).map(|k| r.powi(k as i32)).sum();
    2.0 * (total - 2.0)
}

/// The a at which 2(Σᵢ σᵢ⁴/σ₁⁴ − 2) = p − 2 for the geometric spectrum,
/// i.e. where the ordinary-minimaxity budget of Casella's G stops covering
/// sup φ = p − 2. Bisection on [1, 2].
pub fn minimax_threshold_a(p: usize) -> Result<f64> {
    if p < 3 {
        return Err(Error::DimensionTooSmall(p));
    }
    let target = (p - 2) as f64;
    let f = |a: f64| casella_budget_geometric(p, a) - target;
    let (mut lo, mut hi) = (1.0, 2.0);
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::NoRoot {
            what: "casella budget = p - 2",
            lo,
            hi,
        });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// z / Σgᵢ²xᵢ² ≥ 1 / maxᵢ(gᵢσᵢ²), up to 1e-12.
pub fn z_ratio_bound_check(sigma: &CovarianceSpec, g: &ShrinkageMatrix, x: &[f64]) -> Result<bool> {
    if g.dim() != sigma.dim() || x.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: if g.dim() != sigma.dim() { g.dim() } else { x.len() },
        });
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(invalid("x", 0.0, "x must be non-zero"));
    }
    let mut z = 0.0;
    let mut g2x2 = 0.0;
    let mut top = 0.0f64;
    for ((gi, s), xi) in g.g().iter().zip(sigma.sigma2()).zip(x) {
        z += gi * xi * xi / s;
        g2x2 += gi * gi * xi * xi;
        top = top.max(gi * s);
    }
    Ok(z / g2x2 >= 1.0 / top - 1e-12)
}

/// (2π)^{−p/2} ∫₀¹ (λ/(1−λ))^{p/2} exp(−λr²/(2(1−λ))) λ^{−2} dλ, the marginal
/// prior density at ‖θ‖ = r when Σ = G = I.
pub fn harmonic_mixture_density(p: usize, r: f64) -> f64 {
    let half_p = 0.5 * p as f64;
    let r2 = r * r;
    // λ = u²; λ^{p/2−2}·dλ becomes 2u^{p−3}du, which is regular at 0 for p ≥ 3.
    let integrand = |u: f64| {
        let lam = u * u;
        let one_minus = 1.0 - lam;
        let log = (p as f64 - 3.0) * u.ln() - half_p * one_minus.ln() - lam * r2 / (2.0 * one_minus);
        2.0 * log.exp()
    };
    let value = quadrature::integrate(integrand, 0.0, 1.0, 1e-12, 0.0).value;
    value / (2.0 * std::f64::consts::PI).powf(half_p)
}

/// Γ(p/2 − 1)·2^{p/2−1}/(2π)^{p/2}·r^{2−p}.
pub fn harmonic_closed_form(p: usize, r: f64) -> f64 {
    let half_p = 0.5 * p as f64;
    gamma(half_p - 1.0) * 2f64.powf(half_p - 1.0) / (2.0 * std::f64::consts::PI).powf(half_p) * r.powf(2.0 - p as f64)
}

/// Largest relative deviation between the λ-mixture density and the
/// closed-form harmonic density over the given norms ‖θ‖.
pub fn harmonic_prior_identity_check(p: usize, theta_norms: &[f64]) -> Result<f64> {
    if p < 3 {
        return Err(Error::DimensionTooSmall(p));
    }
    let mut worst = 0.0f64;
    for &r in theta_norms {
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid("theta norm", r, "theta = 0 is excluded (density is singular)"));
        }
        let exact = harmonic_closed_form(p, r);
        let numeric = harmonic_mixture_density(p, r);
        worst = worst.max((numeric - exact).abs() / exact);
    }
    Ok(worst)
}
