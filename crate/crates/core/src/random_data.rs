//! Randomized initial data `u₀ = Σ λ_{n,k} a_{n,k} e_{n,k}`,
//! `u₁ = Σ μ_{n,k} b_{n,k} e_{n,k}` and deterministic amplitude profiles.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::random_basis::RotatedBasis;
use crate::rng::StreamFactory;
use crate::sphere::{mode_count, sobolev_norm, SphereField};
use crate::stats::{linear_fit, median, LinearFit};

/// Position/velocity pair `(u, ∂_T u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair {
    pub pos: SphereField,
    pub vel: SphereField,
}

impl StatePair {
    pub fn new(pos: SphereField, vel: SphereField) -> Result<Self> {
        if pos.n_max() != vel.n_max() {
            return Err(invalid(format!("pos n_max {} != vel n_max {}", pos.n_max(), vel.n_max())));
        }
        Ok(Self { pos, vel })
    }

    pub fn zeros(n_max: usize) -> Self {
        Self { pos: SphereField::zeros(n_max), vel: SphereField::zeros(n_max) }
    }

    pub fn n_max(&self) -> usize {
        self.pos.n_max()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { pos: self.pos.scaled(c), vel: self.vel.scaled(c) }
    }

    pub fn add_scaled(&mut self, other: &StatePair, c: f64) {
        self.pos.add_scaled(&other.pos, c);
        self.vel.add_scaled(&other.vel, c);
    }

    pub fn sub(&self, other: &StatePair) -> Self {
        Self { pos: self.pos.sub(&other.pos), vel: self.vel.sub(&other.vel) }
    }

    /// `Σ n² pos² + vel²`, conserved by the linear flow.
    pub fn linear_energy(&self) -> f64 {
        sobolev_norm(&self.pos, 1.0).powi(2) + self.vel.l2_norm().powi(2)
    }

    pub fn max_abs(&self) -> f64 {
        self.pos.max_abs().max(self.vel.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.vel.is_finite()
    }
}

/// Deterministic amplitudes `u₀^{n,k} = scale·n^{−α}`, `u₁^{n,k} = n·u₀^{n,k}`.
/// The same numbers are the `λ_{n,k}`, `μ_{n,k}` of the randomization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    pub sigma: f64,
    pub alpha: f64,
    pub scale: f64,
    pub n_max: usize,
    /// Per-degree amplitudes, index `n − 1`.
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    /// `Σ n · Σ_k (u₀^{n,k})²` diverges as `n_max → ∞`.
    pub h_half_divergent: bool,
}

impl CoefficientProfile {
    pub fn new(sigma: f64, alpha: f64, n_max: usize) -> Result<Self> {
        Self::with_scale(sigma, alpha, n_max, 1.0)
    }

    pub fn with_scale(sigma: f64, alpha: f64, n_max: usize, scale: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&sigma) {
            return Err(invalid(format!("sigma must lie in [0, 1/2), got {sigma}")));
        }
        if n_max < 1 {
            return Err(invalid("n_max must be >= 1"));
        }
        // Σ n² · n^{2σ} · n^{−2α} converges iff 2α − 2σ − 2 > 1.
        if alpha <= 1.5 + sigma {
            return Err(invalid(format!("alpha = {alpha} gives a divergent H^sigma sum at sigma = {sigma}")));
        }
        let u0: Vec<f64> = (1..=n_max).map(|n| scale * (n as f64).powf(-alpha)).collect();
        let u1 = u0.iter().enumerate().map(|(i, a)| a * (i + 1) as f64).collect();
        Ok(Self { sigma, alpha, scale, n_max, u0, u1, h_half_divergent: alpha <= 2.0 })
    }

    /// Profile with every amplitude zero.
    pub fn zero(n_max: usize) -> Self {
        Self {
            sigma: 0.0,
            alpha: f64::INFINITY,
            scale: 0.0,
            n_max,
            u0: vec![0.0; n_max],
            u1: vec![0.0; n_max],
            h_half_divergent: false,
        }
    }

    /// Contribution of degree `n`: `n² (n^{2σ} u₀² + n^{2(σ−1)} u₁²)`.
    pub fn degree_term(&self, n: usize) -> f64 {
        let nf = n as f64;
        let (a, b) = (self.u0[n - 1], self.u1[n - 1]);
        nf * nf * (nf.powf(2.0 * self.sigma) * a * a + nf.powf(2.0 * (self.sigma - 1.0)) * b * b)
    }

    /// `S_N = Σ_{n ≤ N}` of the degree terms.
    pub fn partial_sum(&self, cutoff: usize) -> f64 {
        (1..=cutoff.min(self.n_max)).map(|n| self.degree_term(n)).sum()
    }

    /// `S^N = Σ_{N < n ≤ n_max}`.
    pub fn tail_sum(&self, cutoff: usize) -> f64 {
        (cutoff + 1..=self.n_max).map(|n| self.degree_term(n)).sum()
    }

    pub fn total(&self) -> f64 {
        self.partial_sum(self.n_max)
    }

    /// `Σ_n n · n² · u₀²`, the truncated `H^{1/2}`-level sum.
    pub fn h_half_sum(&self) -> f64 {
        (1..=self.n_max).map(|n| (n as f64).powi(3) * self.u0[n - 1].powi(2)).sum()
    }

    /// Amplitude fields in the `e`-basis.
    pub fn amplitude_fields(&self) -> (SphereField, SphereField) {
        let mut a = SphereField::zeros(self.n_max);
        let mut b = SphereField::zeros(self.n_max);
        for n in 1..=self.n_max {
            a.block_mut(n).iter_mut().for_each(|x| *x = self.u0[n - 1]);
            b.block_mut(n).iter_mut().for_each(|x| *x = self.u1[n - 1]);
        }
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Gaussian,
    Rademacher,
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `ln E e^{γX}` in closed form; both laws have unit variance.
    pub fn log_mgf(&self, gamma: f64) -> f64 {
        match self {
            Distribution::Gaussian => gamma * gamma / 2.0,
            Distribution::Rademacher => gamma.cosh().ln(),
        }
    }
}

/// Independent draws `a_{n,k}`, `b_{n,k}`, in flat mode order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDraw {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub distribution: Distribution,
    /// Sub-Gaussian constant `c` in `E e^{γX} ≤ e^{cγ²}`.
    pub subgaussian: f64,
}

impl RandomDraw {
    pub fn sample<R: Rng + ?Sized>(n_max: usize, distribution: Distribution, rng: &mut R) -> Self {
        let len = mode_count(n_max);
        let a = (0..len).map(|_| distribution.sample(rng)).collect();
        let b = (0..len).map(|_| distribution.sample(rng)).collect();
        Self { a, b, distribution, subgaussian: 0.5 }
    }

    pub fn constant(n_max: usize, value: f64) -> Self {
        let len = mode_count(n_max);
        Self { a: vec![value; len], b: vec![value; len], distribution: Distribution::Rademacher, subgaussian: 0.5 }
    }
}

/// Empirical `E e^{γX}` on a grid of `γ`.
pub fn empirical_mgf(samples: &[f64], gammas: &[f64]) -> Vec<f64> {
    gammas.iter().map(|g| samples.iter().map(|x| (g * x).exp()).sum::<f64>() / samples.len() as f64).collect()
}

/// Build `(u₀, u₁)` in reference coefficients: `e`-coefficients
/// `λ_{n,k} a_{n,k}`, `μ_{n,k} b_{n,k}` mapped through each `Q_n`.
pub fn draw_data(profile: &CoefficientProfile, basis: &RotatedBasis, draw: &RandomDraw) -> Result<StatePair> {
    let len = mode_count(profile.n_max);
    if draw.a.len() != len || draw.b.len() != len {
        return Err(crate::Error::DimensionMismatch { expected: len, found: draw.a.len().min(draw.b.len()) });
    }
    let (amp0, amp1) = profile.amplitude_fields();
    let e0: Vec<f64> = amp0.coeffs().iter().zip(&draw.a).map(|(l, a)| l * a).collect();
    let e1: Vec<f64> = amp1.coeffs().iter().zip(&draw.b).map(|(m, b)| m * b).collect();
    let pos = basis.to_reference(&SphereField::from_coeffs(profile.n_max, e0)?)?;
    let vel = basis.to_reference(&SphereField::from_coeffs(profile.n_max, e1)?)?;
    StatePair::new(pos, vel)
}

/// Median over draws of the truncated `‖u₀‖_{H^s}` as `n_max` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub s: f64,
    pub n_max: Vec<usize>,
    pub median_norm: Vec<f64>,
    /// Slope of `log median` against `log n_max`.
    pub exponent: f64,
    pub fit: Option<LinearFit>,
}

/// Each draw is generated once at the largest truncation and then
/// truncated, so the sweep follows nested partial sums of the same series.
/// `‖u₀‖_{H^s}` is invariant under the block rotations, so the reference
/// basis is used.
pub fn sobolev_divergence_stat(
    profile: &CoefficientProfile,
    s: f64,
    n_max_sweep: &[usize],
    draws: usize,
    distribution: Distribution,
    factory: &StreamFactory,
) -> Result<GrowthReport> {
    let top = n_max_sweep.iter().copied().max().ok_or_else(|| invalid("empty n_max sweep"))?;
    if top > profile.n_max {
        return Err(invalid(format!("sweep reaches n_max {top} beyond profile n_max {}", profile.n_max)));
    }
    let (amp0, _) = profile.amplitude_fields();
    let per_draw: Vec<Vec<f64>> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.draw(i);
            let mut u0 = amp0.resized(top);
            u0.coeffs_mut().iter_mut().for_each(|c| *c *= distribution.sample(&mut rng));
            n_max_sweep.iter().map(|&n| sobolev_norm(&u0.resized(n), s)).collect()
        })
        .collect();
    let median_norm: Vec<f64> =
        (0..n_max_sweep.len()).map(|j| median(&per_draw.iter().map(|v| v[j]).collect::<Vec<_>>())).collect();
    let positive = median_norm.iter().all(|&m| m > 0.0);
    let fit = if positive {
        let x: Vec<f64> = n_max_sweep.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = median_norm.iter().map(|m| m.ln()).collect();
        linear_fit(&x, &y)
    } else {
        None
    };
    Ok(GrowthReport { s, n_max: n_max_sweep.to_vec(), median_norm, exponent: fit.map(|f| f.slope).unwrap_or(0.0), fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(CoefficientProfile::new(0.6, 3.0, 4).is_err());
        assert!(CoefficientProfile::new(0.0, 1.5, 4).is_err());
        let p = CoefficientProfile::new(0.0, 1.55, 8).unwrap();
        assert!(p.h_half_divergent);
        assert!(!CoefficientProfile::new(0.0, 2.5, 8).unwrap().h_half_divergent);
    }

    #[test]
    fn partial_sums_partition_total() {
        let p = CoefficientProfile::new(0.1, 1.9, 12).unwrap();
        for cut in 0..=12 {
            let parts = p.partial_sum(cut) + p.tail_sum(cut);
            assert!((parts - p.total()).abs() <= 1e-15 * p.total());
        }
        assert_eq!(CoefficientProfile::zero(5).total(), 0.0);
    }

    #[test]
    fn unit_draw_with_identity_basis_reproduces_amplitudes() {
        let p = CoefficientProfile::new(0.0, 1.55, 4).unwrap();
        let s = draw_data(&p, &RotatedBasis::identity(4), &RandomDraw::constant(4, 1.0)).unwrap();
        let (a, b) = p.amplitude_fields();
        assert_eq!(s.pos, a);
        assert_eq!(s.vel, b);
        let z = draw_data(&p, &RotatedBasis::identity(4), &RandomDraw::constant(4, 0.0)).unwrap();
        assert_eq!(z, StatePair::zeros(4));
    }

    #[test]
    fn missing_rotation_is_reported() {
        let p = CoefficientProfile::new(0.0, 1.55, 3).unwrap();
        let err = draw_data(&p, &RotatedBasis::identity(2), &RandomDraw::constant(3, 1.0)).unwrap_err();
        assert!(matches!(err, crate::Error::MissingRotation(3)));
    }
}
