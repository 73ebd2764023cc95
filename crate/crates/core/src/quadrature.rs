//! One-dimensional Gauss rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (x.iter().map(|&t| mid + half * t).collect(), w.iter().map(|&v| v * half).collect())
}

/// Gauss rule for `∫_0^π f(χ) sin²χ dχ`: Chebyshev nodes of the second kind
/// in `x = cos χ`, returned as angles in ascending order together with their
/// weights. Exact when `f` is a polynomial of degree `≤ 2m − 1` in `cos χ`.
pub fn gauss_sin2(m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = PI / (m as f64 + 1.0);
    let chi: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
    let w = chi.iter().map(|&c| h * c.sin().powi(2)).collect();
    (chi, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        for n in [1, 2, 5, 17, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn sin2_rule_total_mass() {
        for m in 1..20 {
            let (_, w) = gauss_sin2(m);
            let s: f64 = w.iter().sum();
            assert!((s - PI / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sin2_rule_exactness() {
        // ∫ cos^{2j} χ sin² χ dχ over [0, π] = π (2j-1)!! / ((2j+2)!!)
        let m = 6;
        let (chi, w) = gauss_sin2(m);
        for j in 0..m {
            let q: f64 = chi.iter().zip(&w).map(|(c, wi)| wi * c.cos().powi(2 * j as i32)).sum();
            let mut exact = PI / 2.0;
            for i in 1..=j {
                exact *= (2 * i - 1) as f64 / (2 * i + 2) as f64;
            }
            assert!((q - exact).abs() < 1e-14, "j={j}");
        }
    }
}
