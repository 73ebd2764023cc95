//! The linear Klein–Gordon propagator `U(T)` on S³, frequency projections,
//! time-weighted space-time norms and their tail statistics over random data.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre_on;
use crate::random_basis::{RotatedBasis, TailEstimate};
use crate::random_data::{draw_data, CoefficientProfile, Distribution, RandomDraw, StatePair};
use crate::rng::StreamFactory;
use crate::sphere::{HarmonicTransform, Lp, SphereField, SphereGrid};
use crate::stats::{linear_fit, mean, pairwise_sum, LinearFit};

/// `U(T)(v₀, v₁)`: each mode rotates by `(cos nT, sin nT / n)`.
pub fn evolve_linear(state: &StatePair, t: f64) -> StatePair {
    let mut out = state.clone();
    for n in 1..=state.n_max() {
        let nf = n as f64;
        let (s, c) = (nf * t).sin_cos();
        let (p0, v0) = (state.pos.block(n), state.vel.block(n));
        let p = out.pos.block_mut(n);
        for (i, x) in p.iter_mut().enumerate() {
            *x = c * p0[i] + s / nf * v0[i];
        }
        let v = out.vel.block_mut(n);
        for (i, x) in v.iter_mut().enumerate() {
            *x = -nf * s * p0[i] + c * v0[i];
        }
    }
    out
}

/// Only the position component of [`evolve_linear`].
pub fn linear_position(state: &StatePair, t: f64) -> SphereField {
    let mut pos = SphereField::zeros(state.n_max());
    for n in 1..=state.n_max() {
        let nf = n as f64;
        let (s, c) = (nf * t).sin_cos();
        let (p0, v0) = (state.pos.block(n), state.vel.block(n));
        for (i, x) in pos.block_mut(n).iter_mut().enumerate() {
            *x = c * p0[i] + s / nf * v0[i];
        }
    }
    pos
}

/// `Π_N`, orthogonal projection on the modes with `n ≤ N`; `Π_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub cutoff: usize,
}

impl Projection {
    pub fn new(cutoff: usize) -> Self {
        Self { cutoff }
    }

    pub fn apply_field(&self, field: &SphereField) -> SphereField {
        let mut f = field.clone();
        for n in (self.cutoff + 1)..=f.n_max() {
            f.block_mut(n).iter_mut().for_each(|c| *c = 0.0);
        }
        f
    }

    /// `1 − Π_N`.
    pub fn complement_field(&self, field: &SphereField) -> SphereField {
        field.sub(&self.apply_field(field))
    }
}

pub fn apply_projection(state: &StatePair, cutoff: usize) -> StatePair {
    let p = Projection::new(cutoff);
    StatePair { pos: p.apply_field(&state.pos), vel: p.apply_field(&state.vel) }
}

pub fn apply_complement(state: &StatePair, cutoff: usize) -> StatePair {
    let p = Projection::new(cutoff);
    StatePair { pos: p.complement_field(&state.pos), vel: p.complement_field(&state.vel) }
}

/// `‖(1 + |T|^δ)^{−1} u(T)‖_{L^r_T L^p_x}` over `T ∈ ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub r: f64,
    pub p: Lp,
    pub delta: f64,
    /// Numerical integration window `[−T_w, T_w]`; the rest is added from
    /// an asymptotic expansion of the weight.
    pub window: f64,
    /// Samples per period `π` of `‖u(T)‖_p`; 0 picks a default from `n_max`.
    pub time_samples: usize,
    /// Bound on the unresolved part of the weight integrals, relative.
    pub tail_tolerance: f64,
}

impl WeightedNormSpec {
    /// The weights used throughout: `δ = 2/r`.
    pub fn new(r: f64, p: f64) -> Result<Self> {
        let spec = Self { r, p: Lp::new(p)?, delta: 2.0 / r, window: 50.0, time_samples: 0, tail_tolerance: 1e-6 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1.0 {
            return Err(invalid(format!("time exponent r must be >= 1, got {}", self.r)));
        }
        if self.delta * self.r <= 1.0 {
            return Err(invalid(format!("weight (1+|T|^{})^-{} is not integrable", self.delta, self.r)));
        }
        if self.window <= 1.0 {
            return Err(invalid("window must exceed 1"));
        }
        Ok(())
    }

    fn samples_for(&self, n_max: usize) -> usize {
        if self.time_samples > 0 {
            return self.time_samples + self.time_samples % 2;
        }
        let p = match self.p {
            Lp::Finite(p) => p.max(2.0),
            Lp::Infinity => 8.0,
        };
        let j = (p * n_max as f64).ceil() as usize + 16;
        j + j % 2
    }
}

/// Product-quadrature rule `∫_ℝ w(T)^r F(T) dT ≈ Σ_j ω_j F(T_j)` for
/// `π`-periodic `F` sampled at `T_j = jπ/J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWeights {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `∫_{|T|>T_w} w^r / ∫_ℝ w^r`: the share carried by the tail expansion.
    pub tail_fraction: f64,
    /// Size of the first neglected term of the tail expansions, relative.
    pub tail_residual: f64,
}

fn binomial_neg(r: f64, j: usize) -> f64 {
    // binom(−r, j) = (−1)^j r (r+1) ... (r+j−1) / j!
    (0..j).fold(1.0, |acc, i| acc * -(r + i as f64) / (i as f64 + 1.0))
}

/// `k`-th derivative of `g(T) = (1 + T^δ)^{−r}` at large `T` from its
/// expansion `Σ_j binom(−r, j) T^{−δ(r+j)}`.
fn weight_derivative_asymptotic(r: f64, delta: f64, t: f64, k: usize, terms: usize) -> f64 {
    (0..terms)
        .map(|j| {
            let a = delta * (r + j as f64);
            let falling = (0..k).fold(1.0, |acc, i| acc * (-a - i as f64));
            binomial_neg(r, j) * falling * t.powf(-a - k as f64)
        })
        .sum()
}

/// `∫_0^∞ (1 + T^δ)^{−r} cos(ωT) dT` split at the window.
fn half_line_cosine_integral(r: f64, delta: f64, window: f64, omega: f64) -> (f64, f64, f64) {
    let g = |t: f64| (1.0 + t.powf(delta)).powf(-r);
    // Panels short enough for the oscillation, 24-point Gauss each.
    let panel = if omega > 0.0 { (std::f64::consts::PI / omega).min(0.5) } else { 0.5 };
    let order = 24;
    let mut total = 0.0;
    // Near 0 the weight has a T^δ cusp: substitute T = s^q with qδ = 2.
    let q = (2.0 / delta).max(1.0);
    let s_panels = ((1.0 / panel).ceil() as usize).max(8);
    for i in 0..s_panels {
        let (a, b) = (i as f64 / s_panels as f64, (i + 1) as f64 / s_panels as f64);
        let (s, w) = gauss_legendre_on(order, a, b);
        for (&si, &wi) in s.iter().zip(&w) {
            let t = si.powf(q);
            total += wi * q * si.powf(q - 1.0) * g(t) * (omega * t).cos();
        }
    }
    let panels = ((window - 1.0) / panel).ceil() as usize;
    let h = (window - 1.0) / panels as f64;
    for i in 0..panels {
        let (a, b) = (1.0 + i as f64 * h, 1.0 + (i + 1) as f64 * h);
        let (t, w) = gauss_legendre_on(order, a, b);
        total += t.iter().zip(&w).map(|(&ti, &wi)| wi * g(ti) * (omega * ti).cos()).sum::<f64>();
    }
    let terms = 60;
    let (tail, residual) = if omega == 0.0 {
        let mut sum = 0.0;
        let mut last = 0.0;
        for j in 0..terms {
            let a = delta * (r + j as f64);
            last = binomial_neg(r, j) * window.powf(1.0 - a) / (a - 1.0);
            sum += last;
        }
        (sum, last.abs())
    } else {
        // ∫_A^∞ g e^{iωT} = −e^{iωA} Σ_k (−1)^k g^{(k)}(A) / (iω)^{k+1}.
        let (sn, cs) = (omega * window).sin_cos();
        let mut re = 0.0;
        let mut last = 0.0;
        for k in 0..5 {
            let dk = weight_derivative_asymptotic(r, delta, window, k, terms);
            // (−1)^k / (iω)^{k+1} = (−1)^k (−i)^{k+1} / ω^{k+1}.
            let (mut zr, mut zi) = (1.0, 0.0);
            for _ in 0..=k {
                let (nr, ni) = (zi, -zr);
                zr = nr;
                zi = ni;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let scale = sign * dk / omega.powi(k as i32 + 1);
            // −(cs + i sn)(zr + i zi)·scale, real part.
            last = -(cs * zr - sn * zi) * scale;
            re += last;
        }
        (re, last.abs())
    };
    (total, tail, residual)
}

pub fn time_weights(spec: &WeightedNormSpec, samples: usize) -> Result<TimeWeights> {
    spec.validate()?;
    let j_count = samples + samples % 2;
    let half = j_count / 2;
    let mut wc = Vec::with_capacity(half + 1);
    let mut tail_share = 0.0;
    let mut residual: f64 = 0.0;
    for m in 0..=half {
        let omega = 2.0 * m as f64;
        let (body, tail, res) = half_line_cosine_integral(spec.r, spec.delta, spec.window, omega);
        if m == 0 {
            tail_share = tail / (body + tail);
        }
        residual = residual.max(res);
        wc.push(2.0 * (body + tail));
    }
    residual /= wc[0] / 2.0;
    let nodes: Vec<f64> = (0..j_count).map(|j| std::f64::consts::PI * j as f64 / j_count as f64).collect();
    let weights = nodes
        .iter()
        .map(|&t| {
            let mut s = wc[0];
            for (m, w) in wc.iter().enumerate().take(half).skip(1) {
                s += 2.0 * w * (2.0 * m as f64 * t).cos();
            }
            s += wc[half] * (2.0 * half as f64 * t).cos();
            s / j_count as f64
        })
        .collect();
    if residual > spec.tail_tolerance {
        return Err(Error::Window { tail: residual, tolerance: spec.tail_tolerance });
    }
    Ok(TimeWeights { nodes, weights, tail_fraction: tail_share, tail_residual: residual })
}

/// Evaluates a [`WeightedNormSpec`] on states with `n ≤ n_max`.
#[derive(Debug, Clone)]
pub struct WeightedNorm {
    spec: WeightedNormSpec,
    n_max: usize,
    time: TimeWeights,
    space: SpaceNorm,
    refined: Option<SpaceNorm>,
    /// `(cos nT_j, sin nT_j)` laid out as a `2 n_max × J` matrix.
    phases: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct SpaceNorm {
    transform: HarmonicTransform,
    weights: Vec<f64>,
}

impl SpaceNorm {
    fn new(n_max: usize, exactness: usize) -> Result<Self> {
        let grid = SphereGrid::new(exactness.max(2 * (n_max - 1)));
        let weights = grid.weights();
        Ok(Self { transform: HarmonicTransform::new(n_max, grid)?, weights })
    }

    /// Per-degree fields `A_n = Σ pos f`, `B_n = Σ vel f / n`, as the columns
    /// of a `nodes × 2 n_max` matrix.
    fn degree_fields(&self, state: &StatePair, n_max: usize) -> Result<DMatrix<f64>> {
        let nodes = self.weights.len();
        let mut m = DMatrix::zeros(nodes, 2 * n_max);
        for n in 1..=state.n_max().min(n_max) {
            for (row, src, scale) in [(2 * (n - 1), &state.pos, 1.0), (2 * (n - 1) + 1, &state.vel, 1.0 / n as f64)] {
                let block = src.block(n);
                if block.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let mut f = SphereField::zeros(n);
                f.block_mut(n).iter_mut().zip(block).for_each(|(d, s)| *d = s * scale);
                let v = self.transform.synthesize(&f)?;
                m.column_mut(row).copy_from_slice(v.values());
            }
        }
        Ok(m)
    }

    /// `‖·‖_p` of each column of a `nodes × J` matrix.
    fn norms(&self, values: &DMatrix<f64>, p: Lp) -> Vec<f64> {
        values
            .column_iter()
            .map(|col| match p {
                Lp::Infinity => col.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
                Lp::Finite(p) => {
                    let even = p.fract() == 0.0 && (p as i64) % 2 == 0 && p <= 16.0;
                    let s: f64 = if even {
                        let half = p as usize / 2;
                        col.iter()
                            .zip(&self.weights)
                            .map(|(x, w)| {
                                let x2 = x * x;
                                (1..half).fold(x2, |acc, _| acc * x2) * w
                            })
                            .sum()
                    } else {
                        col.iter().zip(&self.weights).map(|(x, w)| w * x.abs().powf(p)).sum()
                    };
                    s.powf(1.0 / p)
                }
            })
            .collect()
    }
}

/// Result of a weighted norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    /// For `p = ∞`: change of the value between the base and refined grids.
    pub refinement_delta: f64,
}

impl WeightedNorm {
    pub fn new(spec: WeightedNormSpec, n_max: usize) -> Result<Self> {
        let samples = spec.samples_for(n_max);
        let time = time_weights(&spec, samples)?;
        let (space, refined) = match spec.p {
            Lp::Finite(p) => (SpaceNorm::new(n_max, p.ceil() as usize * (n_max - 1))?, None),
            Lp::Infinity => (SpaceNorm::new(n_max, 4 * (n_max - 1))?, Some(SpaceNorm::new(n_max, 8 * (n_max - 1))?)),
        };
        let mut phases = DMatrix::zeros(2 * n_max, time.nodes.len());
        for (j, &t) in time.nodes.iter().enumerate() {
            for n in 1..=n_max {
                let (s, c) = (n as f64 * t).sin_cos();
                phases[(2 * (n - 1), j)] = c;
                phases[(2 * (n - 1) + 1, j)] = s;
            }
        }
        Ok(Self { spec, n_max, time, space, refined, phases })
    }

    pub fn spec(&self) -> &WeightedNormSpec {
        &self.spec
    }

    pub fn time_weights(&self) -> &TimeWeights {
        &self.time
    }

    /// `‖u(T_j)‖_p` at the time samples of one period.
    pub fn space_norms(&self, state: &StatePair) -> Result<Vec<f64>> {
        self.space_norms_on(&self.space, state)
    }

    fn space_norms_on(&self, space: &SpaceNorm, state: &StatePair) -> Result<Vec<f64>> {
        if state.n_max() > self.n_max {
            return Err(Error::Resolution { required: 2 * (state.n_max() - 1), available: 2 * (self.n_max - 1) });
        }
        let fields = space.degree_fields(state, self.n_max)?;
        let values = fields * &self.phases;
        Ok(space.norms(&values, self.spec.p))
    }

    fn combine(&self, norms: &[f64]) -> f64 {
        let terms: Vec<f64> = norms.iter().zip(&self.time.weights).map(|(n, w)| w * n.powf(self.spec.r)).collect();
        pairwise_sum(&terms).max(0.0).powf(1.0 / self.spec.r)
    }

    pub fn evaluate(&self, state: &StatePair) -> Result<f64> {
        Ok(self.evaluate_detailed(state)?.value)
    }

    pub fn evaluate_detailed(&self, state: &StatePair) -> Result<NormValue> {
        let base = self.combine(&self.space_norms_on(&self.space, state)?);
        match &self.refined {
            None => Ok(NormValue { value: base, refinement_delta: 0.0 }),
            Some(fine) => {
                let finer = self.combine(&self.space_norms_on(fine, state)?);
                Ok(NormValue { value: base.max(finer), refinement_delta: (finer - base).abs() })
            }
        }
    }
}

/// Standalone evaluation of the weighted space-time norm.
pub fn weighted_spacetime_norm(state: &StatePair, spec: &WeightedNormSpec) -> Result<f64> {
    WeightedNorm::new(*spec, state.n_max())?.evaluate(state)
}

/// The three tail regimes for `(1 + |T|^δ)^{−1} U(T)(u₀, u₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `‖(1−Π_N) ·‖_{L^p(ℝ×S³)}` with `δ = 2/p`; tail `(C p √S^N / λ)^p`.
    HighFrequency { p: f64, cutoff: usize },
    /// `‖·‖_{L³_T L⁶}` with `δ = 2/3`; tail `C e^{−cλ²/S}`.
    Cubic,
    /// `‖Π_M ·‖_{L¹_T L^∞}` with weight `(1+T²)^{−1}`; tail `C e^{−cλ²/(M^s S)}`.
    LowFrequencySup { cutoff: usize },
}

impl Regime {
    pub fn spec(&self) -> Result<WeightedNormSpec> {
        match *self {
            Regime::HighFrequency { p, .. } => WeightedNormSpec::new(p, p),
            Regime::Cubic => WeightedNormSpec::new(3.0, 6.0),
            Regime::LowFrequencySup { .. } => WeightedNormSpec::new(1.0, f64::INFINITY),
        }
    }

    pub fn prepare(&self, state: &StatePair) -> StatePair {
        match *self {
            Regime::HighFrequency { cutoff, .. } => apply_complement(state, cutoff),
            Regime::Cubic => state.clone(),
            Regime::LowFrequencySup { cutoff } => apply_projection(state, cutoff),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            Regime::HighFrequency { .. } => 1,
            Regime::Cubic => 2,
            Regime::LowFrequencySup { .. } => 3,
        }
    }
}

/// Weighted norms of `n_draws` random data sets, plus the survival curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperiment {
    pub regime: Regime,
    pub samples: Vec<f64>,
    pub tail: TailEstimate,
    /// `S`, `S^N` or `S_M` as relevant to the regime's envelope.
    pub scale_sum: f64,
}

impl TailExperiment {
    /// Fit `log survival` against `λ²` over survivals in `[1e−3, 0.5]`.
    pub fn gaussian_fit(&self) -> Option<LinearFit> {
        self.tail.fit_log_survival(|l| l * l, 1e-3, 0.5)
    }

    /// Fit `log survival` against `log λ` over survivals in `[1e−3, 0.5]`.
    pub fn power_fit(&self) -> Option<LinearFit> {
        self.tail.fit_log_survival(|l| l.ln(), 1e-3, 0.5)
    }
}

/// Weighted norms of the regime's quantity over independent draws.
pub fn sample_weighted_norms(
    profile: &CoefficientProfile,
    basis: &RotatedBasis,
    regime: Regime,
    n_draws: usize,
    distribution: Distribution,
    factory: &StreamFactory,
) -> Result<Vec<f64>> {
    let norm = WeightedNorm::new(regime.spec()?, profile.n_max)?;
    (0..n_draws as u64)
        .into_par_iter()
        .map(|i| {
            let draw = RandomDraw::sample(profile.n_max, distribution, &mut factory.draw(i));
            let state = draw_data(profile, basis, &draw)?;
            norm.evaluate(&regime.prepare(&state))
        })
        .collect()
}

pub fn tail_experiment(
    profile: &CoefficientProfile,
    basis: &RotatedBasis,
    regime: Regime,
    levels: &[f64],
    n_draws: usize,
    factory: &StreamFactory,
) -> Result<TailExperiment> {
    let samples = sample_weighted_norms(profile, basis, regime, n_draws, Distribution::Gaussian, factory)?;
    let tail = TailEstimate::from_samples(&samples, levels, 0.99);
    let scale_sum = match regime {
        Regime::HighFrequency { cutoff, .. } => profile.tail_sum(cutoff),
        Regime::Cubic => profile.total(),
        Regime::LowFrequencySup { cutoff } => profile.partial_sum(cutoff),
    };
    Ok(TailExperiment { regime, samples, tail, scale_sum })
}

/// Levels spanning the empirical quantiles `[q_lo, q_hi]` of `samples`.
pub fn quantile_levels(samples: &[f64], q_lo: f64, q_hi: f64, count: usize) -> Vec<f64> {
    let s = crate::stats::sorted(samples);
    let (a, b) = (crate::stats::quantile_sorted(&s, q_lo), crate::stats::quantile_sorted(&s, q_hi));
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1).max(1) as f64).collect()
}

/// Growth of `(E X^q)^{1/q}` with `q`: slope of its log against `log q`.
pub fn moment_growth(samples: &[f64], qs: &[f64]) -> Option<LinearFit> {
    let x: Vec<f64> = qs.iter().map(|q| q.ln()).collect();
    let y: Vec<f64> =
        qs.iter().map(|&q| mean(&samples.iter().map(|s| s.powf(q)).collect::<Vec<_>>()).powf(1.0 / q).ln()).collect();
    linear_fit(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;
    use crate::sphere::{mode_count, HarmonicIndex, VOLUME};
    use rand::{Rng, SeedableRng};

    fn random_state(n_max: usize, seed: u64) -> StatePair {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut gen = || {
            SphereField::from_coeffs(n_max, (0..mode_count(n_max)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        StatePair::new(gen(), gen()).unwrap()
    }

    #[test]
    fn group_law_and_periodicity() {
        let s = random_state(6, 1);
        let a = evolve_linear(&evolve_linear(&s, 0.7), 1.9);
        let b = evolve_linear(&s, 2.6);
        assert!(a.sub(&b).max_abs() < 1e-12);
        let p = evolve_linear(&s, 2.0 * std::f64::consts::PI);
        assert!(p.sub(&s).max_abs() < 1e-12);
        assert!((evolve_linear(&s, 3.3).linear_energy() - s.linear_energy()).abs() < 1e-10);
    }

    #[test]
    fn first_mode_oscillates() {
        let e = SphereField::single(1, HarmonicIndex::new(1, 1).unwrap(), 1.0);
        let s = StatePair::new(e.clone(), SphereField::zeros(1)).unwrap();
        let t = 0.4;
        let u = evolve_linear(&s, t);
        assert!((u.pos.coeffs()[0] - t.cos()).abs() < 1e-15);
        assert!((u.vel.coeffs()[0] + t.sin()).abs() < 1e-15);
    }

    #[test]
    fn projections() {
        let s = random_state(5, 2);
        assert_eq!(apply_projection(&s, 0), StatePair::zeros(5));
        assert_eq!(apply_projection(&s, 5), s);
        let p = apply_projection(&s, 3);
        assert_eq!(apply_projection(&p, 3), p);
        let lhs = apply_projection(&evolve_linear(&s, 1.1), 3);
        let rhs = evolve_linear(&apply_projection(&s, 3), 1.1);
        assert_eq!(lhs, rhs);
    }

    fn weight_integral_oracle(r: f64, delta: f64, f: impl Fn(f64) -> f64, period_kinks: f64) -> f64 {
        // Panels between the kinks of f, up to a far cutoff, then a mean-value tail.
        let cutoff = 20_000.0;
        let mut total = 0.0;
        let mut a = 0.0;
        while a < cutoff {
            let b = a + period_kinks;
            let (t, w) = gauss_legendre_on(16, a, b);
            if a == 0.0 {
                // Resolve the T^δ cusp with a graded split.
                for k in 0..30 {
                    let (lo, hi) = (b * 0.5f64.powi(k + 1), b * 0.5f64.powi(k));
                    let (t, w) = gauss_legendre_on(16, lo, hi);
                    total += t.iter().zip(&w).map(|(&x, &wi)| wi * (1.0 + x.powf(delta)).powf(-r) * f(x)).sum::<f64>();
                }
            } else {
                total += t.iter().zip(&w).map(|(&x, &wi)| wi * (1.0 + x.powf(delta)).powf(-r) * f(x)).sum::<f64>();
            }
            a = b;
        }
        let mean_f = {
            let (t, w) = gauss_legendre_on(64, 0.0, period_kinks);
            t.iter().zip(&w).map(|(&x, &wi)| wi * f(x)).sum::<f64>() / period_kinks
        };
        let a = delta * r;
        let tail = cutoff.powf(1.0 - a) / (a - 1.0) - r * cutoff.powf(1.0 - a - delta) / (a + delta - 1.0);
        2.0 * (total + mean_f * tail)
    }

    #[test]
    fn first_mode_cubic_norm_matches_oracle() {
        let e = SphereField::single(1, HarmonicIndex::new(1, 1).unwrap(), 1.0);
        let s = StatePair::new(e, SphereField::zeros(1)).unwrap();
        let spec = WeightedNormSpec::new(3.0, 6.0).unwrap();
        let got = weighted_spacetime_norm(&s, &spec).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let integral = weight_integral_oracle(3.0, 2.0 / 3.0, |t: f64| t.cos().abs().powi(3), half_pi);
        let want = VOLUME.powf(1.0 / 6.0 - 0.5) * integral.powf(1.0 / 3.0);
        assert!((got - want).abs() < 1e-6 * want, "got {got}, want {want}");
        let doubled = weighted_spacetime_norm(&s.scaled(2.0), &spec).unwrap();
        assert!((doubled - 2.0 * got).abs() < 1e-12 * got);
    }

    #[test]
    fn time_weights_integrate_constants() {
        // Closed forms via T = s^{2/δ}: 3π/8, π and 6·B(3, 3) = 1/5.
        let pi = std::f64::consts::PI;
        for (r, p, want) in [(3.0, 6.0, 3.0 * pi / 8.0), (1.0, f64::INFINITY, pi), (6.0, 6.0, 0.2)] {
            let spec = WeightedNormSpec::new(r, p).unwrap();
            let tw = time_weights(&spec, 64).unwrap();
            let total: f64 = tw.weights.iter().sum();
            assert!((total - want).abs() < 1e-10 * want, "r = {r}: {total} vs {want}");
            assert!(tw.tail_residual < 1e-6);
        }
    }

    #[test]
    fn sup_norm_refinement_is_reported() {
        let s = random_state(3, 9);
        let spec = WeightedNormSpec::new(1.0, f64::INFINITY).unwrap();
        let v = WeightedNorm::new(spec, 3).unwrap().evaluate_detailed(&s).unwrap();
        assert!(v.value > 0.0 && v.refinement_delta >= 0.0 && v.refinement_delta < 0.1 * v.value);
    }
}
