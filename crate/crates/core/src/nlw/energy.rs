use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{invalid, Result};
use crate::linear_flow::{linear_position, Projection};
use crate::quadrature::gauss_legendre_on;
use crate::random_data::StatePair;
use crate::sphere::{lp_norm, HarmonicTransform, SphereGrid};

/// `𝓔 = (‖∂_T v‖² + ⟨v, (1−Δ)v⟩ + ½∫v⁴)^{1/2}` on a grid exact for `v⁴`.
pub fn energy_e(state: &StatePair) -> Result<f64> {
    let n = state.n_max();
    let tr = HarmonicTransform::new(n, SphereGrid::for_cubic(n))?;
    let v = tr.synthesize(&state.pos)?;
    let quartic = tr.grid().integrate(&v.map(|x| x.powi(4)))?;
    Ok((state.linear_energy() + 0.5 * quartic).sqrt())
}

/// `H(t) = (‖∂_t h‖² + ⟨h, (1−Δ)h⟩)^{1/2}` for `h` the difference of two
/// solutions, on the snapshot times of `a`. Snapshots of `b` are matched by
/// time, or interpolated when the grids differ.
pub fn uniqueness_energy(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if a.n_max() != b.n_max() {
        return Err(invalid("trajectories have different n_max"));
    }
    let tol = 1e-9 * a.dt.max(b.dt).max(1.0);
    a.times
        .iter()
        .zip(&a.states)
        .map(|(&t, sa)| {
            let sb = match b.times.iter().position(|&s| (s - t).abs() <= tol) {
                Some(j) => b.states[j].clone(),
                None => b.interpolate(t)?,
            };
            Ok((t, sa.sub(&sb).linear_energy().sqrt()))
        })
        .collect()
}

/// Spatial norms of the forcing `g(T) = U(T)(v₀, v₁)` on a uniform time grid
/// starting at 0 (either direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingNorms {
    pub times: Vec<f64>,
    pub l6: Vec<f64>,
    /// Maximum over a grid exact for sixth powers, nodes `≈ 3n` per direction.
    pub linf: Vec<f64>,
}

impl ForcingNorms {
    /// Samples on `[0, t_end]` with spacing at most `min(0.05, 0.25/n_max)`.
    pub fn compute(g: &StatePair, t_end: f64) -> Result<Self> {
        let n = g.n_max();
        let step = 0.05f64.min(0.25 / n as f64);
        let count = ((t_end.abs() / step).ceil() as usize).max(2);
        let times: Vec<f64> = (0..=count).map(|i| t_end * i as f64 / count as f64).collect();
        Self::at_times(g, &times)
    }

    pub fn at_times(g: &StatePair, times: &[f64]) -> Result<Self> {
        let n = g.n_max();
        let tr = HarmonicTransform::new(n, SphereGrid::for_power(n, 6.0))?;
        let pairs = times
            .par_iter()
            .map(|&t| {
                let v = tr.synthesize(&linear_position(g, t))?;
                Ok((lp_norm(&v, 6.0, tr.grid())?, v.max_abs()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (l6, linf) = pairs.into_iter().unzip();
        Ok(Self { times: times.to_vec(), l6, linf })
    }

    fn cumulative(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.times.len()];
        for i in 1..self.times.len() {
            let h = (self.times[i] - self.times[i - 1]).abs();
            out[i] = out[i - 1] + 0.5 * h * (f(i - 1) + f(i));
        }
        out
    }

    /// `∫₀ᵀ ‖g‖₆³` at every sample.
    pub fn cubic_integral(&self) -> Vec<f64> {
        self.cumulative(|i| self.l6[i].powi(3))
    }

    /// `∫₀ᵀ (‖g‖₆² + ‖g‖_∞)` at every sample.
    pub fn exponent_integral(&self) -> Vec<f64> {
        self.cumulative(|i| self.l6[i].powi(2) + self.linf[i])
    }

    /// `C ∫₀ᵀ‖g‖₆³ · exp(c ∫₀ᵀ(‖g‖₆² + ‖g‖_∞))` at every sample.
    pub fn envelope(&self, c_outer: f64, c_exp: f64) -> Vec<f64> {
        self.cubic_integral()
            .iter()
            .zip(self.exponent_integral())
            .map(|(a, b)| c_outer * a * (c_exp * b).exp())
            .collect()
    }

    /// Envelope linearly interpolated at `t` (between 0 and the last sample).
    pub fn envelope_at(&self, t: f64, c_outer: f64, c_exp: f64) -> Result<f64> {
        let env = self.envelope(c_outer, c_exp);
        let last = *self.times.last().expect("at least two samples");
        let x = t / last;
        if !(-1e-12..=1.0 + 1e-12).contains(&x) {
            return Err(invalid(format!("time {t} outside [0, {last}]")));
        }
        let pos = x.clamp(0.0, 1.0) * (self.times.len() - 1) as f64;
        let i = (pos.floor() as usize).min(self.times.len() - 2);
        let f = pos - i as f64;
        Ok(env[i] * (1.0 - f) + env[i + 1] * f)
    }
}

/// The Gronwall envelope of the energy for the forced equation started from
/// zero data at `T = 0`, evaluated at `t`, with constants `(C, c)`.
/// `(1, 1)` is the reference normalization.
pub fn gronwall_envelope_case1(g: &StatePair, t: f64, c_outer: f64, c_exp: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    ForcingNorms::compute(g, t)?.envelope_at(t, c_outer, c_exp)
}

/// Thresholds of the globalization sets for one `θ`. `C(T₀) = C(1 + T₀²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalizationBudget {
    pub theta: f64,
    pub t0: f64,
    /// Split `g₁ = Π_N g`, `g₂ = (1 − Π_N) g`.
    pub cutoff: usize,
    pub c: f64,
    /// Gauss nodes per unit time in the `T` integrals.
    pub time_density: usize,
}

impl GlobalizationBudget {
    pub fn new(theta: f64, t0: f64, cutoff: usize, c: f64) -> Result<Self> {
        if theta.is_nan() || theta <= 0.0 || theta > 1.0 {
            return Err(invalid(format!("theta must lie in (0, 1], got {theta}")));
        }
        if t0.is_nan() || t0 <= 0.0 || c.is_nan() || c <= 0.0 {
            return Err(invalid("horizon and constant must be positive"));
        }
        Ok(Self { theta, t0, cutoff, c, time_density: 32 })
    }

    pub fn p(&self) -> f64 {
        6.0 / self.theta
    }

    pub fn c_t0(&self) -> f64 {
        self.c * (1.0 + self.t0 * self.t0)
    }

    /// `e^{p/18}`, bound on the cubic norm.
    pub fn cubic_threshold(&self) -> f64 {
        (self.p() / 18.0).exp()
    }

    /// `p/18`, bound on the combined norm.
    pub fn combined_threshold(&self) -> f64 {
        self.p() / 18.0
    }

    /// `p/54`, per-set bound for G, H and I.
    pub fn set_threshold(&self) -> f64 {
        self.p() / 54.0
    }

    /// `e^{p/6}`, the energy ceiling.
    pub fn energy_ceiling(&self) -> f64 {
        (self.p() / 6.0).exp()
    }
}

/// Unweighted space-time norms of `g` over `[−T₀, T₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetNorms {
    /// `‖g‖_{L³_T L⁶_x}`.
    pub l3l6: f64,
    /// `‖Π_N g‖_{L¹_T L^∞_x}`.
    pub low_l1linf: f64,
    /// `‖(1 − Π_N) g‖_{L^p_{T,x}}`.
    pub high_lp: f64,
}

impl BudgetNorms {
    pub fn compute(g: &StatePair, budget: &GlobalizationBudget) -> Result<Self> {
        let n = g.n_max();
        let p = budget.p();
        let panels = ((2.0 * budget.t0 * budget.time_density as f64 / 8.0).ceil() as usize).max(1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let h = 2.0 * budget.t0 / panels as f64;
        for i in 0..panels {
            let a = -budget.t0 + i as f64 * h;
            let (x, w) = gauss_legendre_on(8, a, a + h);
            nodes.extend(x);
            weights.extend(w);
        }
        let six = HarmonicTransform::new(n, SphereGrid::for_power(n, 6.0))?;
        let high = HarmonicTransform::new(n, SphereGrid::for_power(n, p))?;
        let proj = Projection::new(budget.cutoff);
        let rows = nodes
            .par_iter()
            .map(|&t| {
                let u = linear_position(g, t);
                let full = six.synthesize(&u)?;
                let low = six.synthesize(&proj.apply_field(&u))?;
                let hi = high.synthesize(&proj.complement_field(&u))?;
                let hi_p = high.grid().integrate(&hi.map(|x| x.abs().powf(p)))?;
                Ok((lp_norm(&full, 6.0, six.grid())?, low.max_abs(), hi_p))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acc = [0.0; 3];
        for ((l6, linf, hp), w) in rows.iter().zip(&weights) {
            acc[0] += w * l6.powi(3);
            acc[1] += w * linf;
            acc[2] += w * hp;
        }
        Ok(Self { l3l6: acc[0].cbrt(), low_l1linf: acc[1], high_lp: acc[2].powf(1.0 / p) })
    }

    /// `C(T₀)‖g‖³ · exp(C(T₀)(‖g‖² + ‖g₁‖ + ‖g₂‖))` with `C(T₀) = c(1 + T₀²)`.
    pub fn gronwall_bound(&self, c: f64, t0: f64) -> f64 {
        let ct = c * (1.0 + t0 * t0);
        ct * self.l3l6.powi(3) * (ct * (self.l3l6.powi(2) + self.low_l1linf + self.high_lp)).exp()
    }
}

/// Membership of `(v₀, v₁)` in the sets F, G, H, I and their intersection J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: GlobalizationBudget,
    pub norms: BudgetNorms,
    pub f: bool,
    pub g: bool,
    pub h: bool,
    pub i: bool,
    pub j: bool,
    /// Left side over threshold for F, G, H, I; a set holds iff its ratio is `≤ 1`.
    pub ratios: [f64; 4],
    /// Left side over `p/18` for the combined hypothesis.
    pub combined_ratio: f64,
}

impl BudgetReport {
    pub const SETS: [&'static str; 4] = ["F", "G", "H", "I"];

    /// The set with the largest violation ratio, if any fails.
    pub fn worst_violation(&self) -> Option<&'static str> {
        let (k, r) = self.ratios.iter().enumerate().fold((0, f64::MIN), |b, (k, &r)| if r > b.1 { (k, r) } else { b });
        (r > 1.0).then_some(Self::SETS[k])
    }
}

pub fn check_globalization_budget(g: &StatePair, budget: &GlobalizationBudget) -> Result<BudgetReport> {
    let norms = BudgetNorms::compute(g, budget)?;
    let ct = budget.c_t0();
    let ratios = [
        ct * norms.l3l6.powi(3) / budget.cubic_threshold(),
        ct * norms.l3l6.powi(2) / budget.set_threshold(),
        ct * norms.low_l1linf / budget.set_threshold(),
        ct * norms.high_lp / budget.set_threshold(),
    ];
    let combined_ratio = ct * (norms.l3l6.powi(2) + norms.low_l1linf + norms.high_lp) / budget.combined_threshold();
    let [f, g, h, i] = ratios.map(|r| r <= 1.0);
    Ok(BudgetReport { budget: *budget, norms, f, g, h, i, j: f && g && h && i, ratios, combined_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlw::Solver;
    use crate::sphere::{HarmonicIndex, SphereField, VOLUME};

    #[test]
    fn energy_examples() {
        let e = SphereField::single(3, HarmonicIndex::new(1, 1).unwrap(), 1.0);
        let z = SphereField::zeros(3);
        assert_eq!(energy_e(&StatePair::zeros(3)).unwrap(), 0.0);
        let pos = energy_e(&StatePair::new(e.clone(), z.clone()).unwrap()).unwrap();
        assert!((pos * pos - (1.0 + 0.5 / VOLUME)).abs() < 1e-13);
        let vel = energy_e(&StatePair::new(z, e).unwrap()).unwrap();
        assert!((vel - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_forcing_budget_and_envelope() {
        let g = StatePair::zeros(4);
        let b = GlobalizationBudget::new(0.5, 4.0, 2, 1.0).unwrap();
        assert!((b.p() - 12.0).abs() < 1e-15);
        let r = check_globalization_budget(&g, &b).unwrap();
        assert!(r.f && r.g && r.h && r.i && r.j);
        assert_eq!(gronwall_envelope_case1(&g, 2.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn envelope_is_monotone() {
        let mut g = StatePair::zeros(3);
        g.pos.set(HarmonicIndex::new(2, 3).unwrap(), 0.3);
        g.vel.set(HarmonicIndex::new(3, 1).unwrap(), 0.2);
        let env = ForcingNorms::compute(&g, -3.0).unwrap().envelope(1.0, 1.0);
        assert!(env.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn identical_trajectories_have_zero_difference() {
        let s = Solver::new(3, 1.0).unwrap();
        let mut y = StatePair::zeros(3);
        y.pos.set(HarmonicIndex::new(2, 1).unwrap(), 0.5);
        let a = s.solve(&y, None, 0.0, 1.0, 0.01, 10).unwrap();
        assert!(uniqueness_energy(&a, &a).unwrap().iter().all(|&(_, h)| h == 0.0));
    }
}
