use serde::{Deserialize, Serialize};

use super::basis::SpherePoint;
use super::grid::{GridValues, SphereGrid};
use super::transform::HarmonicTransform;
use super::{degree_offset, SphereField};
use crate::error::{invalid, Result};
use crate::stats::pairwise_sum;

/// Lebesgue exponent, finite `p ≥ 1` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lp {
    Finite(f64),
    Infinity,
}

impl Lp {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Lp::Infinity)
        } else if p >= 1.0 {
            Ok(Lp::Finite(p))
        } else {
            Err(invalid(format!("L^p exponent must be >= 1, got {p}")))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Lp::Finite(p) => *p,
            Lp::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, zero at infinity.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Lp::Finite(p) => 1.0 / p,
            Lp::Infinity => 0.0,
        }
    }
}

/// `(Σ w_i |v_i|^p)^{1/p}` by quadrature, or the node maximum for `p = ∞`.
pub fn lp_norm(values: &GridValues, p: f64, grid: &SphereGrid) -> Result<f64> {
    let p = Lp::new(p)?;
    values.check(grid)?;
    Ok(match p {
        Lp::Infinity => values.max_abs(),
        Lp::Finite(p) => {
            let w = grid.weights();
            let terms: Vec<f64> = values.values().iter().zip(&w).map(|(v, w)| w * v.abs().powf(p)).collect();
            pairwise_sum(&terms).powf(1.0 / p)
        }
    })
}

/// `‖(1 − Δ)^{s/2} u‖_{L²} = (Σ n^{2s} c_{n,k}²)^{1/2}`.
pub fn sobolev_norm(field: &SphereField, s: f64) -> f64 {
    (1..=field.n_max())
        .map(|n| (n as f64).powf(2.0 * s) * field.block(n).iter().map(|c| c * c).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// `K_n(x)² = Σ_k f_{n,k}(x)²` at every node of the transform's grid.
pub fn projection_kernel_diag(n: usize, transform: &HarmonicTransform) -> Result<GridValues> {
    if n == 0 || n > transform.n_max() {
        return Err(invalid(format!("degree {n} outside tables (n_max = {})", transform.n_max())));
    }
    let grid = transform.grid();
    let mut acc = grid.zeros();
    for k in 0..n * n {
        let mut f = SphereField::zeros(n);
        f.coeffs_mut()[degree_offset(n) + k] = 1.0;
        let v = transform.synthesize(&f)?;
        acc.values_mut().iter_mut().zip(v.values()).for_each(|(a, b)| *a += b * b);
    }
    Ok(acc)
}

/// Zonal reproducing kernel of `E_n` at `x₀`: `Z(x) = Σ_k f_{n,k}(x₀) f_{n,k}(x)`.
/// It attains `‖Z‖_∞ / ‖Z‖₂ = K_n` at `x₀`.
pub fn zonal_field(transform: &HarmonicTransform, n: usize, x0: SpherePoint) -> Result<SphereField> {
    if n == 0 || n > transform.n_max() {
        return Err(invalid(format!("degree {n} outside tables (n_max = {})", transform.n_max())));
    }
    let vals = transform.basis().eval_all(x0);
    let mut f = SphereField::zeros(n);
    let off = degree_offset(n);
    f.block_mut(n).copy_from_slice(&vals[off..off + n * n]);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{HarmonicIndex, VOLUME};

    #[test]
    fn sobolev_examples() {
        let f = SphereField::single(5, HarmonicIndex::new(5, 1).unwrap(), 1.0);
        assert!((sobolev_norm(&f, 1.0) - 5.0).abs() < 1e-14);
        let g = SphereField::single(4, HarmonicIndex::new(4, 7).unwrap(), 2.0);
        assert!((sobolev_norm(&g, -1.0) - 0.5).abs() < 1e-14);
        assert!((sobolev_norm(&g, 0.0) - g.l2_norm()).abs() < 1e-14);
    }

    #[test]
    fn constant_lp_norms() {
        let grid = SphereGrid::new(2);
        let c = grid.sample(|_| -3.0);
        for p in [1.0, 2.0, 3.5, 8.0] {
            let want = 3.0 * VOLUME.powf(1.0 / p);
            assert!((lp_norm(&c, p, &grid).unwrap() - want).abs() < 1e-11 * want);
        }
        assert_eq!(lp_norm(&c, f64::INFINITY, &grid).unwrap(), 3.0);
        assert!(lp_norm(&c, 0.5, &grid).is_err());
    }

    #[test]
    fn kernel_diagonal_is_constant() {
        let n_max = 6;
        let tr = HarmonicTransform::new(n_max, SphereGrid::for_products(n_max)).unwrap();
        for n in 1..=n_max {
            let k = projection_kernel_diag(n, &tr).unwrap();
            let want = (n * n) as f64 / VOLUME;
            assert!(k.values().iter().all(|v| (v - want).abs() < 1e-11 * want), "n = {n}");
        }
    }
}
