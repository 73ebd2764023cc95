use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::HarmonicIndex;
use crate::error::{invalid, Result};
use crate::quadrature::gauss_sin2;

/// Point of S³ in hyperspherical coordinates `(χ, θ, φ)`, with volume element
/// `sin²χ sinθ dχ dθ dφ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub chi: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub fn new(chi: f64, theta: f64, phi: f64) -> Self {
        Self { chi, theta, phi }
    }

    /// Embedding in ℝ⁴, with `x₄ = cos χ` as the polar axis.
    pub fn to_cartesian(&self) -> [f64; 4] {
        let (sc, cc) = self.chi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [sc * st * cp, sc * st * sp, sc * ct, cc]
    }

    pub fn from_cartesian(x: [f64; 4]) -> Self {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let chi = (x[3] / norm).clamp(-1.0, 1.0).acos();
        let rho = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let theta = if rho == 0.0 { 0.0 } else { (x[2] / rho).clamp(-1.0, 1.0).acos() };
        let phi = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        Self { chi, theta, phi }
    }

    pub fn antipode(&self) -> Self {
        let x = self.to_cartesian();
        Self::from_cartesian([-x[0], -x[1], -x[2], -x[3]])
    }
}

/// Gegenbauer polynomials `C^{(λ)}_j(x)` for `j = 0..=kmax`.
pub fn gegenbauer(lambda: f64, kmax: usize, x: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(kmax + 1);
    c.push(1.0);
    if kmax >= 1 {
        c.push(2.0 * lambda * x);
    }
    for j in 2..=kmax {
        let jf = j as f64;
        let next = (2.0 * x * (jf + lambda - 1.0) * c[j - 1] - (jf + 2.0 * lambda - 2.0) * c[j - 2]) / jf;
        c.push(next);
    }
    c
}

#[inline]
pub(crate) fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Normalized associated Legendre functions `P̄_l^m(cos θ)`, `0 ≤ m ≤ l ≤ l_max`,
/// stored at `l(l+1)/2 + m`. Normalized so that `P̄_l^m(θ) T_m(φ)` is a unit
/// vector in `L²(S²)`.
pub fn normalized_legendre(l_max: usize, theta: f64) -> Vec<f64> {
    let (s, x) = theta.sin_cos();
    let mut p = vec![0.0; tri(l_max, l_max) + 1];
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            p[tri(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[tri(m - 1, m - 1)];
        }
        if m < l_max {
            p[tri(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * p[tri(m, m)];
        }
        let mf = m as f64;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let l1 = lf - 1.0;
            let b = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    p
}

/// Real azimuthal factor: `1`, `√2 cos mφ` for `m > 0`, `√2 sin |m|φ` for `m < 0`.
pub fn trig_factor(m: i64, phi: f64) -> f64 {
    match m {
        0 => 1.0,
        m if m > 0 => SQRT_2 * (m as f64 * phi).cos(),
        m => SQRT_2 * ((-m) as f64 * phi).sin(),
    }
}

/// Tables for the reference harmonics
/// `f_{n,k} = c_{n,l} sin^l χ C^{(l+1)}_{n−1−l}(cos χ) P̄_l^{|m|}(cos θ) T_m(φ)`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    n_max: usize,
    /// `c_{n,l}` at `n(n−1)/2 + l`.
    radial_norm: Vec<f64>,
}

#[inline]
pub(crate) fn pair(n: usize, l: usize) -> usize {
    n * (n - 1) / 2 + l
}

impl ReferenceBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max must be at least 1"));
        }
        let (chi, w) = gauss_sin2(n_max + 1);
        let mut sq = vec![0.0; pair(n_max, n_max - 1) + 1];
        for (&c, &wi) in chi.iter().zip(&w) {
            let (s, x) = c.sin_cos();
            for l in 0..n_max {
                let g = gegenbauer(l as f64 + 1.0, n_max - 1 - l, x);
                let sl = s.powi(l as i32);
                for (j, gj) in g.iter().enumerate() {
                    let v = sl * gj;
                    sq[pair(l + 1 + j, l)] += wi * v * v;
                }
            }
        }
        let radial_norm = sq.into_iter().map(|v| 1.0 / v.sqrt()).collect();
        Ok(Self { n_max, radial_norm })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn pair_count(&self) -> usize {
        self.radial_norm.len()
    }

    /// Radial factors at `χ` for every `(n, l)`, indexed by `n(n−1)/2 + l`.
    pub fn radial_all(&self, chi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.pair_count()];
        let (s, x) = chi.sin_cos();
        for l in 0..self.n_max {
            let g = gegenbauer(l as f64 + 1.0, self.n_max - 1 - l, x);
            let sl = s.powi(l as i32);
            for (j, gj) in g.iter().enumerate() {
                let p = pair(l + 1 + j, l);
                out[p] = self.radial_norm[p] * sl * gj;
            }
        }
        out
    }

    /// Radial factor and its first two χ-derivatives for every `(n, l)`.
    pub fn radial_derivatives_all(&self, chi: f64) -> [Vec<f64>; 3] {
        let len = self.pair_count();
        let (mut v0, mut v1, mut v2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let (s, c) = chi.sin_cos();
        for l in 0..self.n_max {
            let lam = l as f64 + 1.0;
            let kmax = self.n_max - 1 - l;
            let g0 = gegenbauer(lam, kmax, c);
            let g1 = gegenbauer(lam + 1.0, kmax.max(1) - 1, c);
            let g2 = gegenbauer(lam + 2.0, kmax.max(2) - 2, c);
            let lf = l as f64;
            let sl = s.powi(l as i32);
            let slm1 = if l >= 1 { s.powi(l as i32 - 1) } else { 0.0 };
            let slm2 = if l >= 2 { s.powi(l as i32 - 2) } else { 0.0 };
            for j in 0..=kmax {
                let cv = g0[j];
                let d1 = if j >= 1 { 2.0 * lam * g1[j - 1] } else { 0.0 };
                let d2 = if j >= 2 { 4.0 * lam * (lam + 1.0) * g2[j - 2] } else { 0.0 };
                let p = pair(l + 1 + j, l);
                let nrm = self.radial_norm[p];
                v0[p] = nrm * sl * cv;
                v1[p] = nrm * (lf * slm1 * c * cv - sl * s * d1);
                v2[p] = nrm
                    * (lf * (lf - 1.0) * slm2 * c * c * cv - lf * sl * cv - (2.0 * lf + 1.0) * sl * c * d1
                        + sl * s * s * d2);
            }
        }
        [v0, v1, v2]
    }

    /// Direct evaluation of a single `f_{n,k}`; the slow oracle path.
    pub fn eval(&self, index: HarmonicIndex, point: SpherePoint) -> f64 {
        let (l, m) = (index.l(), index.m());
        let (s, x) = point.chi.sin_cos();
        let g = gegenbauer(l as f64 + 1.0, index.n - 1 - l, x);
        let radial = self.radial_norm[pair(index.n, l)] * s.powi(l as i32) * g[index.n - 1 - l];
        let leg = normalized_legendre(l, point.theta)[tri(l, m.unsigned_abs() as usize)];
        radial * leg * trig_factor(m, point.phi)
    }

    /// Every `f_{n,k}` with `n ≤ n_max` at one point, in flat mode order.
    pub fn eval_all(&self, point: SpherePoint) -> Vec<f64> {
        let radial = self.radial_all(point.chi);
        let l_max = self.n_max - 1;
        let leg = normalized_legendre(l_max, point.theta);
        let mut out = Vec::with_capacity(super::mode_count(self.n_max));
        for n in 1..=self.n_max {
            for l in 0..n {
                let r = radial[pair(n, l)];
                for m in -(l as i64)..=(l as i64) {
                    out.push(r * leg[tri(l, m.unsigned_abs() as usize)] * trig_factor(m, point.phi));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::VOLUME;

    #[test]
    fn constant_mode_value() {
        let b = ReferenceBasis::new(1).unwrap();
        let v = b.eval(HarmonicIndex::new(1, 1).unwrap(), SpherePoint::new(0.3, 1.1, 2.0));
        assert!((v - VOLUME.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn legendre_low_orders() {
        let th = 0.7_f64;
        let p = normalized_legendre(2, th);
        let c = th.cos();
        assert!((p[tri(1, 0)] - (3.0 / (4.0 * PI)).sqrt() * c).abs() < 1e-14);
        assert!((p[tri(1, 1)] - (3.0 / (8.0 * PI)).sqrt() * th.sin()).abs() < 1e-14);
        assert!((p[tri(2, 0)] - (5.0 / (16.0 * PI)).sqrt() * (3.0 * c * c - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn radial_derivatives_match_finite_differences() {
        let b = ReferenceBasis::new(7).unwrap();
        let h = 1e-4;
        for chi in [0.2, 1.0, 2.5] {
            let [f, d1, d2] = b.radial_derivatives_all(chi);
            let fp = b.radial_all(chi + h);
            let fm = b.radial_all(chi - h);
            for p in 0..f.len() {
                let fd1 = (fp[p] - fm[p]) / (2.0 * h);
                let fd2 = (fp[p] - 2.0 * f[p] + fm[p]) / (h * h);
                assert!((fd1 - d1[p]).abs() < 1e-6 * (1.0 + d1[p].abs()), "d1 pair {p}");
                assert!((fd2 - d2[p]).abs() < 1e-4 * (1.0 + d2[p].abs()), "d2 pair {p}");
            }
        }
    }

    #[test]
    fn cartesian_round_trip() {
        let p = SpherePoint::new(1.2, 0.4, 5.5);
        let q = SpherePoint::from_cartesian(p.to_cartesian());
        assert!((p.chi - q.chi).abs() < 1e-14 && (p.theta - q.theta).abs() < 1e-14 && (p.phi - q.phi).abs() < 1e-14);
    }
}
