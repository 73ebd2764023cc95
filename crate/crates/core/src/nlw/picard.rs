use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Solver;
use crate::error::{invalid, Error, Result};
use crate::linear_flow::{evolve_linear, linear_position, weighted_spacetime_norm, WeightedNormSpec};
use crate::random_data::StatePair;
use crate::sphere::sobolev_norm;

/// `T₁ = min(1, 1/(CΛ²(1 + T₀²)³))`.
pub fn picard_time(lambda: f64, t0: f64, c: f64) -> f64 {
    1f64.min(1.0 / (c * lambda * lambda * (1.0 + t0 * t0).powi(3)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub t0: f64,
    pub lambda: f64,
    /// The constant `C` in `T₁`.
    pub c: f64,
    pub iterations: usize,
    /// Uniform intervals on `[T₀ − T₁, T₀ + T₁]`; 0 picks `h ≈ 0.05/n_max`.
    pub intervals: usize,
}

impl PicardConfig {
    pub fn new(t0: f64, lambda: f64, c: f64, iterations: usize) -> Self {
        Self { t0, lambda, c, iterations, intervals: 0 }
    }

    pub fn t1(&self) -> f64 {
        picard_time(self.lambda, self.t0, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub t1: f64,
    pub times: Vec<f64>,
    /// Index of `T₀` in `times`.
    pub center: usize,
    /// Iterate `k` at every time; iterate 0 is the free evolution.
    pub iterates: Vec<Vec<StatePair>>,
    /// `sup_T ‖v_{k+1} − v_k‖` in the energy norm `(‖·‖²_{H¹} + ‖∂_T ·‖²_{L²})^{1/2}`.
    pub distances: Vec<f64>,
    /// `distances[k+1] / distances[k]`.
    pub factors: Vec<f64>,
    /// `‖(1+|T|^{2/3})^{−1} g‖³_{L³L⁶}`, `‖v₀‖_{H¹}`, `‖v₁‖_{L²}`.
    pub hypotheses: [f64; 3],
}

impl PicardReport {
    /// Largest ratio of successive distances while they stay above roundoff.
    pub fn contraction_factor(&self) -> f64 {
        let floor = 1e-13 * self.distances.first().copied().unwrap_or(0.0).max(1e-300);
        self.factors.iter().zip(&self.distances).filter(|(_, &d)| d > floor).map(|(&f, _)| f).fold(0.0, f64::max)
    }

    pub fn limit(&self) -> &[StatePair] {
        self.iterates.last().expect("at least one iterate")
    }
}

/// Integral over each interval of a uniform grid, fourth order, from point
/// values: `∫_{x_i}^{x_{i+1}}` with weights `h(−1, 13, 13, −1)/24` inside and
/// one-sided stencils at the ends. Returns the running integral from `x_0`.
fn cumulative_integral(values: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let m = values.len();
    let len = values[0].len();
    let mut out = vec![vec![0.0; len]; m];
    for i in 0..m - 1 {
        let (idx, w): ([usize; 4], [f64; 4]) = if i == 0 {
            ([0, 1, 2, 3], [9.0, 19.0, -5.0, 1.0])
        } else if i == m - 2 {
            ([m - 4, m - 3, m - 2, m - 1], [1.0, -5.0, 19.0, 9.0])
        } else {
            ([i - 1, i, i + 1, i + 2], [-1.0, 13.0, 13.0, -1.0])
        };
        let (prev, next) = out.split_at_mut(i + 1);
        let (acc, dst) = (&prev[i], &mut next[0]);
        for c in 0..len {
            let s: f64 = idx.iter().zip(&w).map(|(&j, &wj)| wj * values[j][c]).sum();
            dst[c] = acc[c] + h * s / 24.0;
        }
    }
    out
}

/// One application of `v ↦ S(T − T₀)(v₀, v₁) − κ∫_{T₀}^T sin((T−τ)n)/n Π((g+v)³)(τ) dτ`
/// on a uniform grid containing `T₀` at `times[center]`, returning the state
/// `(v, ∂_T v)` at every node.
pub fn duhamel_map(
    solver: &Solver,
    g: Option<&StatePair>,
    data: &StatePair,
    times: &[f64],
    center: usize,
    v: &[StatePair],
) -> Result<Vec<StatePair>> {
    let m = times.len();
    if v.len() != m || center >= m || center < 3 || m - center < 4 {
        return Err(invalid("Duhamel grid needs four nodes on each side of T0 and one state per node"));
    }
    let n_max = solver.n_max();
    let t0 = times[center];
    let h = times[1] - times[0];
    let forcing: Vec<_> = times.par_iter().map(|&t| g.map(|g| linear_position(g, t))).collect();
    let cubes = v.par_iter().zip(&forcing).map(|(s, f)| solver.cube(&s.pos, f.as_ref())).collect::<Result<Vec<_>>>()?;
    // Integrands cos(nτ)F and sin(nτ)F, F = −κΠ((g+v)³), stacked per node.
    let len = cubes[0].coeffs().len();
    let integrands: Vec<Vec<f64>> = times
        .iter()
        .zip(&cubes)
        .map(|(&t, c)| {
            let mut row = vec![0.0; 2 * len];
            for n in 1..=n_max {
                let (s, co) = (n as f64 * t).sin_cos();
                let off = crate::sphere::degree_offset(n);
                for (i, &x) in c.block(n).iter().enumerate() {
                    row[off + i] = -solver.kappa() * co * x;
                    row[len + off + i] = -solver.kappa() * s * x;
                }
            }
            row
        })
        .collect();
    let fwd = cumulative_integral(&integrands[center..], h);
    let back_vals: Vec<Vec<f64>> = integrands[..=center].iter().rev().cloned().collect();
    let back = cumulative_integral(&back_vals, -h);
    let data = StatePair { pos: data.pos.resized(n_max), vel: data.vel.resized(n_max) };
    let mut out = Vec::with_capacity(m);
    for (j, &t) in times.iter().enumerate() {
        let integral = if j >= center { &fwd[j - center] } else { &back[center - j] };
        let mut s = evolve_linear(&data, t - t0);
        for n in 1..=n_max {
            let nf = n as f64;
            let (sn, cn) = (nf * t).sin_cos();
            let off = crate::sphere::degree_offset(n);
            for i in 0..n * n {
                let (ic, is) = (integral[off + i], integral[len + off + i]);
                s.pos.coeffs_mut()[off + i] += (sn * ic - cn * is) / nf;
                s.vel.coeffs_mut()[off + i] += cn * ic + sn * is;
            }
        }
        out.push(s);
    }
    Ok(out)
}

fn sup_distance(a: &[StatePair], b: &[StatePair]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.sub(y).linear_energy().sqrt()).fold(0.0, f64::max)
}

/// Hypotheses of the local theory: the weighted `L³L⁶` norm of `g` cubed,
/// `‖v₀‖_{H¹}` and `‖v₁‖_{L²}`.
pub fn local_hypotheses(g: Option<&StatePair>, data: &StatePair) -> Result<[f64; 3]> {
    let gn = match g {
        Some(g) => weighted_spacetime_norm(g, &WeightedNormSpec::new(3.0, 6.0)?)?.powi(3),
        None => 0.0,
    };
    Ok([gn, sobolev_norm(&data.pos, 1.0), data.vel.l2_norm()])
}

/// Picard iteration of the Duhamel map on `[T₀ − T₁, T₀ + T₁]` for data
/// `(v₀, v₁) = (data.pos, data.vel)` at `T₀`.
pub fn picard_local(
    solver: &Solver,
    g: Option<&StatePair>,
    data: &StatePair,
    config: &PicardConfig,
) -> Result<PicardReport> {
    if config.iterations < 1 || config.lambda.is_nan() || config.lambda <= 0.0 || config.c.is_nan() || config.c <= 0.0 {
        return Err(invalid("Picard iteration needs iterations >= 1 and positive Λ, C"));
    }
    let hypotheses = local_hypotheses(g, data)?;
    if let Some(k) = hypotheses.iter().position(|&x| x > config.lambda) {
        let what = ["weighted L3L6 norm of g, cubed", "H1 norm of v0", "L2 norm of v1"][k];
        return Err(Error::Precondition(format!("{what} = {:.6e} exceeds Λ = {}", hypotheses[k], config.lambda)));
    }
    let t1 = config.t1();
    let n_max = solver.n_max();
    let half = if config.intervals > 0 {
        config.intervals.div_ceil(2)
    } else {
        ((t1 / (0.05 / n_max as f64)).ceil() as usize).max(4)
    };
    let h = t1 / half as f64;
    let times: Vec<f64> = (0..=2 * half).map(|j| config.t0 + (j as f64 - half as f64) * h).collect();
    let data = StatePair { pos: data.pos.resized(n_max), vel: data.vel.resized(n_max) };
    let first: Vec<StatePair> = times.iter().map(|&t| evolve_linear(&data, t - config.t0)).collect();
    let mut iterates = vec![first];
    let mut distances = Vec::new();
    for _ in 0..config.iterations {
        let prev = iterates.last().expect("non-empty");
        let next = duhamel_map(solver, g, &data, &times, half, prev)?;
        distances.push(sup_distance(&next, prev));
        iterates.push(next);
    }
    let factors = distances.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let report = PicardReport { t1, times, center: half, iterates, distances, factors, hypotheses };
    let factor = report.contraction_factor();
    if factor >= 1.0 {
        return Err(Error::ContractionFailure { factor });
    }
    Ok(report)
}

/// Smallest `C = c₀·2^k` (`k ≤ 40`) for which the iterates contract; the
/// constant is then meant to be frozen for fresh data.
pub fn calibrate_picard_constant(
    solver: &Solver,
    g: Option<&StatePair>,
    data: &StatePair,
    config: &PicardConfig,
) -> Result<(f64, PicardReport)> {
    let mut cfg = *config;
    let mut last = None;
    for _ in 0..=40 {
        match picard_local(solver, g, data, &cfg) {
            Ok(r) => return Ok((cfg.c, r)),
            Err(Error::ContractionFailure { factor }) => last = Some(factor),
            Err(e) => return Err(e),
        }
        cfg.c *= 2.0;
    }
    Err(Error::ContractionFailure { factor: last.unwrap_or(f64::INFINITY) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{HarmonicIndex, SphereField};

    #[test]
    fn cumulative_weights_are_exact_for_cubics() {
        let h = 0.1;
        let vals: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64 * h).powi(3), 1.0]).collect();
        let out = cumulative_integral(&vals, h);
        for (i, o) in out.iter().enumerate() {
            let x = i as f64 * h;
            assert!((o[0] - x.powi(4) / 4.0).abs() < 1e-15);
            assert!((o[1] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_data_gives_zero_iterates() {
        let s = Solver::new(3, 1.0).unwrap();
        let r = picard_local(&s, None, &StatePair::zeros(3), &PicardConfig::new(0.5, 1.0, 1.0, 3)).unwrap();
        assert!(r.iterates.iter().flatten().all(|x| x.max_abs() == 0.0));
        assert!(r.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn precondition_is_checked() {
        let s = Solver::new(2, 1.0).unwrap();
        let e = SphereField::single(2, HarmonicIndex::new(2, 1).unwrap(), 3.0);
        let data = StatePair::new(e, SphereField::zeros(2)).unwrap();
        let err = picard_local(&s, None, &data, &PicardConfig::new(0.0, 1.0, 1.0, 2)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
