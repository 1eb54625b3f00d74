//! Problem setup: diagonal covariance spectra, diagonal shrinkage matrices,
//! mean vectors, and the seeded Gaussian samplers shared by every risk engine.
//!
//! Randomness is organised in fixed-length blocks. Block `b` of a run with
//! master seed `s` draws from `ChaCha8Rng::seed_from_u64(s)` on stream `b`, so
//! any worker can regenerate any block and a reduction over blocks in index
//! order is independent of how many workers took part.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::stats::SampleStats;

/// Draws per independent random stream.
pub const BLOCK_LEN: usize = 4096;

/// Σ = diag(σ₁², …, σₚ²) with σ₁² ≥ … ≥ σₚ² > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    sigma2: Vec<f64>,
}

impl CovarianceSpec {
    /// Ties are accepted; any strict increase is rejected.
    pub fn new(sigma2: Vec<f64>) -> Result<Self> {
        if sigma2.len() < 3 {
            return Err(Error::DimensionTooSmall(sigma2.len()));
        }
        for &s in &sigma2 {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("sigma2", s, "variances must be finite and positive"));
            }
        }
        for i in 1..sigma2.len() {
            if sigma2[i] > sigma2[i - 1] {
                return Err(Error::IncreasingSpectrum {
                    index: i,
                    prev: sigma2[i - 1],
                    next: sigma2[i],
                });
            }
        }
        Ok(Self { sigma2 })
    }

    /// Σ = I_p.
    pub fn identity(p: usize) -> Result<Self> {
        Self::new(vec![1.0; p])
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn trace(&self) -> f64 {
        self.sigma2.iter().sum()
    }

    /// σ₁², the largest variance.
    pub fn largest(&self) -> f64 {
        self.sigma2[0]
    }

    /// σₚ², the smallest variance.
    pub fn smallest(&self) -> f64 {
        self.sigma2[self.sigma2.len() - 1]
    }

    /// Multiplies every variance by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("scale", c, "must be finite and positive"));
        }
        Self::new(self.sigma2.iter().map(|s| s * c).collect())
    }
}

/// Σ = diag(a^{p−1}, a^{p−2}, …, a, 1).
pub fn make_geometric_covariance(p: usize, a: f64) -> Result<CovarianceSpec> {
    if p < 3 {
        return Err(Error::DimensionTooSmall(p));
    }
    if !(a.is_finite() && a >= 1.0) {
        return Err(invalid("a", a, "spectrum base must be >= 1"));
    }
    CovarianceSpec::new((0..p).map(|i| a.powi((p - 1 - i) as i32)).collect())
}

/// G = diag(g₁, …, gₚ) with 0 < gᵢ ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageMatrix {
    g: Vec<f64>,
}

impl ShrinkageMatrix {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        for &gi in &g {
            if !(gi > 0.0 && gi <= 1.0) {
                return Err(invalid("g", gi, "entries must lie in (0, 1]"));
            }
        }
        Ok(Self { g })
    }

    pub fn identity(p: usize) -> Self {
        Self { g: vec![1.0; p] }
    }

    /// Scalar multiple c·I, 0 < c ≤ 1.
    pub fn scalar(p: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; p])
    }

    /// G = Σ/σ₁²: most shrinkage on the noisiest coordinates.
    pub fn casella(sigma: &CovarianceSpec) -> Self {
        let top = sigma.largest();
        Self {
            g: sigma.sigma2().iter().map(|s| s / top).collect(),
        }
    }

    /// G = σₚ²Σ⁻¹, the maximiser of the ordinary-minimaxity budget.
    pub fn berger(sigma: &CovarianceSpec) -> Self {
        let bottom = sigma.smallest();
        Self {
            g: sigma.sigma2().iter().map(|s| bottom / s).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }
}

pub fn casella_g(sigma: &CovarianceSpec) -> ShrinkageMatrix {
    ShrinkageMatrix::casella(sigma)
}

pub fn berger_g(sigma: &CovarianceSpec) -> ShrinkageMatrix {
    ShrinkageMatrix::berger(sigma)
}

/// θ ∈ ℝᵖ with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    theta: Vec<f64>,
}

impl MeanVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(invalid("theta", bad, "entries must be finite"));
        }
        Ok(Self { theta })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            theta: vec![0.0; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn norm_sq(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

/// θ = m·(trΣ)^{1/2}·1ₚ/√p, so that ‖θ‖² = m²·trΣ.
pub fn theta_on_diagonal(m: f64, sigma: &CovarianceSpec) -> Result<MeanVector> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(invalid("m", m, "signal multiplier must be >= 0"));
    }
    let p = sigma.dim();
    let coord = m * (sigma.trace() / p as f64).sqrt();
    MeanVector::new(vec![coord; p])
}

/// One cell of an experiment grid: signal multiplier m and prior variance τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentPoint {
    m: f64,
    tau: f64,
}

impl ExperimentPoint {
    pub fn new(m: f64, tau: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 0.0) {
            return Err(invalid("m", m, "signal multiplier must be >= 0"));
        }
        check_tau(tau)?;
        Ok(Self { m, tau })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", tau, "prior variance must be finite and positive"));
    }
    Ok(())
}

/// RNG for block `block` of the run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Fills `out[i] = mean[i] + sd[i]·ξᵢ` with ξᵢ i.i.d. standard normal.
#[inline]
pub fn draw_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: Option<&[f64]>, sd: &[f64], out: &mut [f64]) {
    match mean {
        Some(mu) => {
            for ((o, &m), &s) in out.iter_mut().zip(mu).zip(sd) {
                let xi: f64 = rng.sample(StandardNormal);
                *o = m + s * xi;
            }
        }
        None => {
            for (o, &s) in out.iter_mut().zip(sd) {
                let xi: f64 = rng.sample(StandardNormal);
                *o = s * xi;
            }
        }
    }
}

/// Runs `per_block` over `ceil(n / BLOCK_LEN)` independent blocks in parallel
/// and merges the per-block statistics in block order.
///
/// `per_block(rng, len, values)` must push exactly `len` values.
pub fn reduce_blocks<F>(n: u64, seed: u64, per_block: F) -> SampleStats
where
    F: Fn(&mut ChaCha8Rng, usize, &mut Vec<f64>) + Sync,
{
    let blocks = n.div_ceil(BLOCK_LEN as u64);
    let partial: Vec<SampleStats> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = (n - b * BLOCK_LEN as u64).min(BLOCK_LEN as u64) as usize;
            let mut rng = block_rng(seed, b);
            let mut values = Vec::with_capacity(len);
            per_block(&mut rng, len, &mut values);
            debug_assert_eq!(values.len(), len);
            SampleStats::from_block(&values)
        })
        .collect();
    let mut total = SampleStats::new();
    for s in &partial {
        total.merge(s);
    }
    total
}

/// Deterministic stream of Gaussian observation vectors.
///
/// Observation `i` comes from block `i / BLOCK_LEN`, consuming `p` standard
/// normals in coordinate order, which is the same layout the risk engines use.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    mean: Option<Vec<f64>>,
    sd: Vec<f64>,
    seed: u64,
    remaining: u64,
    emitted: u64,
    rng: ChaCha8Rng,
}

impl ObservationStream {
    fn new(mean: Option<Vec<f64>>, sd: Vec<f64>, n: u64, seed: u64) -> Self {
        Self {
            mean,
            sd,
            seed,
            remaining: n,
            emitted: 0,
            rng: block_rng(seed, 0),
        }
    }
}

impl Iterator for ObservationStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.remaining == 0 {
            return None;
        }
        if self.emitted > 0 && self.emitted.is_multiple_of(BLOCK_LEN as u64) {
            self.rng = block_rng(self.seed, self.emitted / BLOCK_LEN as u64);
        }
        let mut out = vec![0.0; self.sd.len()];
        draw_gaussian(&mut self.rng, self.mean.as_deref(), &self.sd, &mut out);
        self.remaining -= 1;
        self.emitted += 1;
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining as usize;
        (r, Some(r))
    }
}

impl ExactSizeIterator for ObservationStream {}

/// n draws of x ~ N_p(θ, Σ).
pub fn sample_conditional(
    theta: &MeanVector,
    sigma: &CovarianceSpec,
    n: u64,
    seed: u64,
) -> Result<ObservationStream> {
    if theta.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: theta.dim(),
        });
    }
    if n == 0 {
        return Err(invalid("n", 0.0, "at least one draw is required"));
    }
    let sd = sigma.sigma2().iter().map(|s| s.sqrt()).collect();
    Ok(ObservationStream::new(Some(theta.theta().to_vec()), sd, n, seed))
}

/// n draws of the marginal x ~ N_p(0, Σ + τI) under θ ~ N_p(0, τI).
pub fn sample_marginal(tau: f64, sigma: &CovarianceSpec, n: u64, seed: u64) -> Result<ObservationStream> {
    check_tau(tau)?;
    if n == 0 {
        return Err(invalid("n", 0.0, "at least one draw is required"));
    }
    let sd = marginal_sd(tau, sigma);
    Ok(ObservationStream::new(None, sd, n, seed))
}

pub(crate) fn marginal_sd(tau: f64, sigma: &CovarianceSpec) -> Vec<f64> {
    sigma.sigma2().iter().map(|s| (s + tau).sqrt()).collect()
}
