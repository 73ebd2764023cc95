//! One runner per catalog entry. Each draws its randomness from
//! [`Ctx::factory`], writes its tables through the context and records
//! checks against the tolerances pinned in the catalog defaults.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;

use super::{cell, Ctx, Params};
use crate::error::{Error, Result};
use crate::linear_flow::{evolve_linear, linear_position, quantile_levels, sample_weighted_norms, Regime};
use crate::nlw::{
    calibrate_picard_constant, check_globalization_budget, picard_local, uniqueness_energy, BudgetNorms, ForcingNorms,
    GlobalizationBudget, PicardConfig, Solver, Trajectory,
};
use crate::penrose::{
    chart_forward, chart_inverse, euclid_weighted_norm, log_spaced, lq_transfer as lq_transfer_op, omega0, pt0_inverse,
    pullback, radial_eigen_residual, scattering_decay, trajectory_difference, EuclideanRadialGrid, RadialOperator,
};
use crate::random_basis::{
    bernstein_ratio, coordinate_envelope, coordinate_tail_check, deviation_levels, empirical_tail, estimate_median_lq,
    fitted_tail_rate, left_invariance_ks, orthogonality_error, sample_haar, zonal_sup_ratio, RotatedBasis,
    TailEstimate,
};
use crate::random_data::{draw_data, CoefficientProfile, Distribution, RandomDraw, StatePair};
use crate::rng::StreamFactory;
use crate::sphere::{
    lp_norm, mode_count, projection_kernel_diag, HarmonicIndex, HarmonicTransform, SphereField, SphereGrid, VOLUME,
};
use crate::stats::{ks_critical, mean, LinearFit};

fn need<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Validation(vec![format!("params.{name}: required")]))
}

fn profile(p: &Params) -> Result<CoefficientProfile> {
    CoefficientProfile::with_scale(
        need(&p.sigma, "sigma")?,
        need(&p.alpha, "alpha")?,
        need(&p.n_max, "n_max")?,
        need(&p.scale, "scale")?,
    )
}

/// Data set `index`: its own Haar basis and Gaussian draw.
fn random_state(profile: &CoefficientProfile, factory: &StreamFactory, index: u64) -> Result<StatePair> {
    let f = factory.child(index);
    let basis = RotatedBasis::sample(profile.n_max, &f.child(0))?;
    let draw = RandomDraw::sample(profile.n_max, Distribution::Gaussian, &mut f.child(1).draw(0));
    draw_data(profile, &basis, &draw)
}

fn uniform_field<R: Rng>(n_max: usize, rng: &mut R) -> Result<SphereField> {
    SphereField::from_coeffs(n_max, (0..mode_count(n_max)).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fit_ci(f: &LinearFit, scale: f64) -> (f64, f64) {
    let (a, b) = ((f.slope - 2.0 * f.slope_stderr) * scale, (f.slope + 2.0 * f.slope_stderr) * scale);
    (a.min(b), a.max(b))
}

fn tail_rows(t: &TailEstimate) -> Vec<Vec<String>> {
    (0..t.levels.len())
        .map(|i| vec![cell(t.levels[i]), cell(t.survival[i]), cell(t.ci_low[i]), cell(t.ci_high[i])])
        .collect()
}

/// Snapshot stride giving a spacing near `0.05`.
fn stride(dt: f64) -> usize {
    ((0.05 / dt).round() as usize).max(1)
}

pub fn parseval(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let n_max = need(&p.n_max, "n_max")?;
    let field = uniform_field(n_max, &mut ctx.factory("field").draw(0))?;
    let grid = SphereGrid::for_products(n_max);
    let tr = HarmonicTransform::new(n_max, grid.clone())?;
    let values = tr.synthesize(&field)?;
    let back = tr.analyze(&values, n_max)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        let e = max_abs_diff(back.block(n), field.block(n));
        worst = worst.max(e);
        rows.push(vec![n.to_string(), cell(e)]);
    }
    ctx.csv("roundtrip", &["n", "max_error"], &rows)?;
    let l2 = field.l2_norm();
    let gap = (lp_norm(&values, 2.0, &grid)? - l2).abs() / l2;
    ctx.below("parseval", worst.max(gap), format!("coefficients {worst:.2e}, L2 vs l2 {gap:.2e}"))
}

pub fn kernel_constancy(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let n_max = need(&p.n_max, "n_max")?;
    let grid = SphereGrid::for_products(n_max);
    let tr = HarmonicTransform::new(n_max, grid.clone())?;
    let rows = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let k = projection_kernel_diag(n, &tr)?;
            let (lo, hi) = k.values().iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            let avg = grid.integrate(&k)? / VOLUME;
            let expected = (n * n) as f64 / VOLUME;
            let zonal = zonal_sup_ratio(n)?;
            let kn = n as f64 / VOLUME.sqrt();
            Ok([n as f64, lo, hi, (hi - lo) / avg, avg, expected, zonal, kn])
        })
        .collect::<Result<Vec<_>>>()?;
    let spread = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    let mean_gap = rows.iter().map(|r| (r[4] / r[5] - 1.0).abs()).fold(0.0, f64::max);
    let zonal_gap = rows.iter().map(|r| (r[6] / r[7] - 1.0).abs()).fold(0.0, f64::max);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| std::iter::once(r[0].to_string()).chain(r[1..].iter().map(|&x| cell(x))).collect())
        .collect();
    ctx.csv("kernel", &["n", "min", "max", "relative_spread", "mean", "expected_mean", "zonal_ratio", "k_n"], &table)?;
    ctx.below("kernel-constancy", spread, format!("max relative spread of K_n(x)^2 for n <= {n_max}"))?;
    ctx.below("kernel-mean", mean_gap, "grid mean against n^2/(2pi^2)".into())?;
    ctx.below("zonal-witness", zonal_gap, "|Z_n|_inf/|Z_n|_2 against n/sqrt(2pi^2), relative".into())
}

pub fn haar_orthogonality(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let dims = need(&p.dims, "dims")?;
    let draws = need(&p.draws, "draws")?;
    let f = ctx.factory("orthogonality");
    let errors = dims
        .par_iter()
        .enumerate()
        .map(|(i, &d)| Ok(orthogonality_error(&sample_haar(d, &mut f.draw(i as u64))?)))
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<Vec<String>> = dims.iter().zip(&errors).map(|(d, e)| vec![d.to_string(), cell(*e)]).collect();
    ctx.csv("orthogonality", &["N", "max_abs_QtQ_minus_I"], &rows)?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    ctx.below("haar-orthogonality", worst, format!("max |Q^T Q - I| up to N = {}", dims.iter().max().unwrap_or(&0)))?;

    // Left invariance at N = 9: first coordinate of Q e_1 against that of R Q e_1.
    let rot = sample_haar(9, &mut ctx.factory("rotation").draw(0))?;
    let d = left_invariance_ks(9, &rot, draws, &ctx.factory("invariance"))?;
    let alpha = ctx.tol("haar-left-invariance")?;
    let crit = ks_critical(alpha, draws, draws);
    ctx.record(
        "haar-left-invariance",
        d,
        None,
        Some(crit),
        true,
        format!("KS distance, critical value at alpha = {alpha}"),
    );

    // Q_11² ~ Beta(1/2, (N−1)/2): mean 1/N, variance 2(N−1)/(N²(N+2)).
    let n = 9.0;
    let fc = ctx.factory("coordinate");
    let sq = (0..draws as u64)
        .into_par_iter()
        .map(|i| Ok(sample_haar(9, &mut fc.draw(i))?[(0, 0)].powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    let se = (2.0 * (n - 1.0) / (n * n * (n + 2.0)) / draws as f64).sqrt();
    let z = (mean(&sq) - 1.0 / n).abs() / se;
    ctx.below("haar-coordinate-mean", z, format!("|mean Q_11^2 - 1/9| in standard errors over {draws} draws"))
}

pub fn median_sqrtq(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let ns = need(&p.n_list, "n_list")?;
    let qs = need(&p.q_list, "q_list")?;
    let draws = need(&p.draws, "draws")?;
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &n in &ns {
        for &q in &qs {
            let m = estimate_median_lq(n, q, draws, &ctx.factory(&format!("n{n}-q{q}")))?;
            let r = m.median / q.sqrt();
            ratios.push((r, m.ci_low / q.sqrt(), m.ci_high / q.sqrt()));
            rows.push(vec![n.to_string(), cell(q), cell(m.median), cell(m.ci_low), cell(m.ci_high), cell(r)]);
        }
    }
    ctx.csv("median", &["n", "q", "median", "ci_low", "ci_high", "median_over_sqrt_q"], &rows)?;
    let top = ratios.iter().copied().fold((f64::MIN, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let bottom = ratios.iter().map(|r| r.0).fold(f64::MAX, f64::min);
    ctx.constant("median_constant", top.0, Some((top.1, top.2)));
    ctx.at_most("median-sqrtq", top.0 / bottom, "max over min of median/sqrt(q) across the sweep".into())
}

pub fn tail_shape(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let ns = need(&p.n_list, "n_list")?;
    let q = need(&p.q, "q")?;
    let draws = need(&p.draws, "draws")?;
    let points = need(&p.points, "points")?;
    let mut rates = Vec::new();
    for &n in &ns {
        let f = ctx.factory(&format!("n{n}"));
        let levels = deviation_levels(n, q, draws, &f, points)?;
        let tail = empirical_tail(n, q, &levels, draws, &f)?;
        ctx.csv(&format!("tail-n{n}"), &["level", "survival", "ci_low", "ci_high"], &tail_rows(&tail))?;
        let fit = tail.fit_log_survival(|r| r * r, 1e-3, 0.5);
        let rate = fitted_tail_rate(&tail).unwrap_or(f64::NAN);
        let scaled = rate / (n as f64).powf(4.0 / q);
        ctx.constant(
            &format!("tail_rate_over_n^(4/q)_n{n}"),
            scaled,
            fit.map(|f| fit_ci(&f, -1.0 / (n as f64).powf(4.0 / q))),
        );
        rates.push((n, rate, fit.map_or(f64::NAN, |f| f.r_squared)));
    }
    let rows: Vec<Vec<String>> = rates.iter().map(|&(n, r, r2)| vec![n.to_string(), cell(r), cell(r2)]).collect();
    ctx.csv("rates", &["n", "rate", "r_squared"], &rows)?;
    let step = rates.windows(2).map(|w| w[1].1 / w[0].1).fold(f64::INFINITY, f64::min);
    let list: Vec<String> = rates.iter().map(|r| format!("{:.3}", r.1)).collect();
    ctx.above(
        "tail-rate-increasing",
        step,
        format!("smallest ratio of successive fitted rates; rates {}", list.join(", ")),
    )
}

pub fn bernstein(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let ns = need(&p.n_list, "n_list")?;
    let q = need(&p.q, "q")?;
    let draws = need(&p.draws, "draws")?;
    let mut table = Vec::new();
    let (mut l2_gap, mut zonal_gap): (f64, f64) = (0.0, 0.0);
    let mut ratios = Vec::new();
    for &n in &ns {
        let f = ctx.factory(&format!("n{n}"));
        let r = bernstein_ratio(n, q, draws, &f)?;
        let r2 = bernstein_ratio(n, 2.0, 10, &f)?;
        let z = zonal_sup_ratio(n)? / n as f64;
        l2_gap = l2_gap.max((r2 - 1.0).abs());
        zonal_gap = zonal_gap.max((z * VOLUME.sqrt() - 1.0).abs());
        ratios.push(r);
        table.push(vec![n.to_string(), cell(r), cell(r2), cell(z)]);
    }
    ctx.csv("bernstein", &["n", "ratio_q", "ratio_2", "zonal_sup_over_n"], &table)?;
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    ctx.constant("bernstein_constant", hi, None);
    ctx.at_most("bernstein-spread", hi / lo, format!("max over min of normalized ratios at q = {q}"))?;
    ctx.below("bernstein-l2", l2_gap, "q = 2 normalized ratio against 1".into())?;
    ctx.below("bernstein-zonal", zonal_gap, "zonal sup ratio / n against 1/sqrt(2pi^2), relative".into())
}

pub fn coordinate_tail(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let dims = need(&p.dims, "dims")?;
    let draws = need(&p.draws, "draws")?;
    let points = need(&p.points, "points")?;
    let levels: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    for &d in &dims {
        let tail = coordinate_tail_check(d, &levels, draws, &ctx.factory(&format!("N{d}")))?;
        let mut rows = tail_rows(&tail);
        for (row, &t) in rows.iter_mut().zip(&levels) {
            row.push(cell(coordinate_envelope(d, t)));
        }
        for (lo, &t) in tail.ci_low.iter().zip(&levels) {
            worst = worst.max(lo / coordinate_envelope(d, t));
        }
        ctx.csv(&format!("coordinate-N{d}"), &["level", "survival", "ci_low", "ci_high", "envelope"], &rows)?;
    }
    ctx.at_most("coordinate-tail", worst, "largest Wilson 99% lower bound over the envelope".into())
}

pub fn linear_periodicity(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let n_max = need(&p.n_max, "n_max")?;
    let mut rng = ctx.factory("state").draw(0);
    let s = StatePair::new(uniform_field(n_max, &mut rng)?, uniform_field(n_max, &mut rng)?)?;
    let mut group: f64 = 0.0;
    let mut rows = Vec::new();
    for (a, b) in [(0.7, 1.9), (-2.3, 5.1), (10.0, -3.7), (123.4, 0.25)] {
        let e = evolve_linear(&evolve_linear(&s, a), b).sub(&evolve_linear(&s, a + b)).max_abs();
        group = group.max(e);
        rows.push(vec![cell(a), cell(b), cell(e)]);
    }
    ctx.csv("group-law", &["s", "t", "max_error"], &rows)?;
    let period = evolve_linear(&s, TAU).sub(&s).max_abs().max(evolve_linear(&s, -TAU).sub(&s).max_abs());
    ctx.below("group-law", group, "max |U(s)U(t)y - U(s+t)y|".into())?;
    ctx.below("periodicity", period, "max |U(+-2pi)y - y|".into())
}

/// Weighted norms of the regime's quantity over the draws, the survival
/// curve on quantile levels, and the coefficient profile.
fn regime_tail(
    ctx: &mut Ctx,
    p: &Params,
    regime: Regime,
    name: &str,
    levels: Option<&[f64]>,
) -> Result<(Vec<f64>, TailEstimate)> {
    let prof = profile(p)?;
    let draws = need(&p.draws, "draws")?;
    let points = need(&p.points, "points")?;
    let basis = RotatedBasis::sample(prof.n_max, &ctx.factory("basis"))?;
    let samples = sample_weighted_norms(&prof, &basis, regime, draws, Distribution::Gaussian, &ctx.factory("draws"))?;
    let levels = match levels {
        Some(l) => l.to_vec(),
        None => quantile_levels(&samples, 0.3, 1.0 - 5.0 / draws as f64, points),
    };
    let tail = TailEstimate::from_samples(&samples, &levels, 0.99);
    ctx.csv(name, &["level", "survival", "ci_low", "ci_high"], &tail_rows(&tail))?;
    Ok((samples, tail))
}

pub fn prop_proba_1(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let q = need(&p.q, "q")?;
    let cutoffs = need(&p.cutoffs, "cutoffs")?;
    let (lo_cut, hi_cut) = (cutoffs.iter().copied().min().unwrap_or(1), cutoffs.iter().copied().max().unwrap_or(1));
    let (_, low) =
        regime_tail(ctx, p, Regime::HighFrequency { p: q, cutoff: lo_cut }, &format!("tail-N{lo_cut}"), None)?;
    let (_, high) = regime_tail(
        ctx,
        p,
        Regime::HighFrequency { p: q, cutoff: hi_cut },
        &format!("tail-N{hi_cut}"),
        Some(&low.levels),
    )?;
    let excess = high.ci_low.iter().zip(&low.ci_high).map(|(a, b)| a - b).fold(f64::MIN, f64::max);
    ctx.at_most(
        "proba-1-dominance",
        excess,
        format!("survival at N = {hi_cut} above N = {lo_cut} beyond the 99% intervals"),
    )?;
    let fit = low.fit_log_survival(f64::ln, 1e-3, 0.5);
    let slope = fit.map_or(f64::NAN, |f| f.slope);
    if let Some(f) = fit {
        ctx.constant("proba_1_power", -f.slope, Some(fit_ci(&f, -1.0)));
    }
    ctx.above("proba-1-decay", -slope, "minus slope of log survival against log lambda".into())
}

pub fn prop_proba_2(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let (_, tail) = regime_tail(ctx, p, Regime::Cubic, "tail", None)?;
    let s = profile(p)?.total();
    let fit = tail.fit_log_survival(|l| l * l, 1e-3, 0.5);
    let (slope, r2) = fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r_squared));
    if let Some(f) = fit {
        ctx.constant("proba_2_c", -f.slope * s, Some(fit_ci(&f, -s)));
    }
    ctx.above(
        "proba-2-r2",
        r2,
        format!("R^2 of log survival against lambda^2 over {} levels", fit.map_or(0, |f| f.points)),
    )?;
    ctx.above("proba-2-decay", -slope, "minus slope of log survival against lambda^2".into())
}

pub fn prop_proba_3(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let cutoff = need(&p.cutoff, "cutoff")?;
    let (_, tail) = regime_tail(ctx, p, Regime::LowFrequencySup { cutoff }, "tail", None)?;
    let s = profile(p)?.partial_sum(cutoff);
    let fit = tail.fit_log_survival(|l| l * l, 1e-3, 0.5);
    let slope = fit.map_or(f64::NAN, |f| f.slope);
    if let Some(f) = fit {
        ctx.constant("proba_3_c", -f.slope * s, Some(fit_ci(&f, -s)));
        ctx.constant("proba_3_r2", f.r_squared, None);
    }
    ctx.above("proba-3-decay", -slope, "minus slope of log survival against lambda^2".into())
}

pub fn tail_experiment(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let regime = match need(&p.regime, "regime")? {
        1 => Regime::HighFrequency { p: need(&p.q, "q")?, cutoff: need(&p.cutoff, "cutoff")? },
        2 => Regime::Cubic,
        _ => Regime::LowFrequencySup { cutoff: need(&p.cutoff, "cutoff")? },
    };
    let (samples, tail) = regime_tail(ctx, p, regime, "tail", None)?;
    ctx.csv("samples", &["norm"], &samples.iter().map(|&x| vec![cell(x)]).collect::<Vec<_>>())?;
    let gauss = tail.fit_log_survival(|l| l * l, 1e-3, 0.5);
    let power = tail.fit_log_survival(f64::ln, 1e-3, 0.5);
    for (name, fit) in [("gaussian_slope", gauss), ("power_slope", power)] {
        if let Some(f) = fit {
            ctx.constant(name, f.slope, Some(fit_ci(&f, 1.0)));
            ctx.constant(&format!("{name}_r2"), f.r_squared, None);
        }
    }
    ctx.above("tail-decay", -gauss.map_or(f64::NAN, |f| f.slope), "minus slope of log survival against lambda^2".into())
}

pub fn picard_contraction(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let solver = Solver::new(prof.n_max, 1.0)?;
    let dt = need(&p.dt, "dt")?;
    let fresh = need(&p.fresh_draws, "fresh_draws")?;
    let mut cfg = PicardConfig::new(
        need(&p.t0, "t0")?,
        need(&p.lambda, "lambda")?,
        need(&p.c, "c")?,
        need(&p.iterations, "iterations")?,
    );
    let cal = ctx.factory("calibration");
    let (g, data) = (random_state(&prof, &cal, 0)?, random_state(&prof, &cal, 1)?);
    let (c, _) = calibrate_picard_constant(&solver, Some(&g), &data, &cfg)?;
    ctx.constant("picard_C", c, None);
    cfg.c = c;
    let f = ctx.factory("fresh");
    let mut rows = Vec::new();
    let (mut worst, mut limit): (f64, f64) = (0.0, 0.0);
    for i in 0..fresh as u64 {
        let (g, data) = (random_state(&prof, &f, 2 * i)?, random_state(&prof, &f, 2 * i + 1)?);
        let r = picard_local(&solver, Some(&g), &data, &cfg);
        let r = match r {
            Ok(r) => r,
            Err(Error::ContractionFailure { factor }) => {
                worst = worst.max(factor);
                rows.push(vec![i.to_string(), cell(cfg.t1()), cell(factor), cell(f64::NAN)]);
                continue;
            }
            Err(e) => return Err(e),
        };
        let fwd = solver.solve(&data, Some(&g), cfg.t0, cfg.t0 + r.t1, dt, 1)?.complete()?;
        let err = r.limit().last().expect("grid has nodes").sub(fwd.last()).max_abs();
        worst = worst.max(r.contraction_factor());
        limit = limit.max(err);
        rows.push(vec![i.to_string(), cell(r.t1), cell(r.contraction_factor()), cell(err)]);
    }
    ctx.csv("fresh", &["draw", "t1", "contraction_factor", "limit_vs_solver"], &rows)?;
    ctx.below("picard-contraction", worst, format!("largest factor over {fresh} fresh draws with C = {c}"))?;
    ctx.below("picard-limit", limit, "Picard limit against the time stepper at T0 + T1".into())
}

/// `y'' + y + y³/(2π²) = 0`, `y(0) = y0`, `y'(0) = 0`: classical RK4.
fn scalar_oscillator(y0: f64, t_end: f64, steps: usize) -> Vec<f64> {
    let h = t_end / steps as f64;
    let f = |y: f64, v: f64| (v, -y - y.powi(3) / VOLUME);
    let (mut y, mut v) = (y0, 0.0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    for _ in 0..steps {
        let (a1, b1) = f(y, v);
        let (a2, b2) = f(y + 0.5 * h * a1, v + 0.5 * h * b1);
        let (a3, b3) = f(y + 0.5 * h * a2, v + 0.5 * h * b2);
        let (a4, b4) = f(y + h * a3, v + h * b3);
        y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        out.push(y);
    }
    out
}

pub fn duffing_oracle(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let n_max = need(&p.n_max, "n_max")?;
    let c = need(&p.scale, "scale")?;
    let dt = need(&p.dt, "dt")?;
    let t_end = need(&p.t_max, "t_max")?;
    let steps = need(&p.points, "points")?;
    let s = Solver::new(n_max, 1.0)?;
    let e = SphereField::single(n_max, HarmonicIndex::new(1, 1)?, c);
    let tr =
        s.solve(&StatePair::new(e, SphereField::zeros(n_max))?, None, 0.0, t_end, dt, stride(dt) * 2)?.complete()?;
    let oracle = scalar_oscillator(c, t_end, steps);
    let h = t_end / steps as f64;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (t, st) in tr.times.iter().zip(&tr.states) {
        let k = (t / h).round() as usize;
        if (k as f64 * h - t).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("snapshot {t} is not on the oracle grid")));
        }
        let err = (st.pos.coeffs()[0] - oracle[k]).abs();
        worst = worst.max(err);
        rows.push(vec![cell(*t), cell(st.pos.coeffs()[0]), cell(oracle[k]), cell(err)]);
    }
    ctx.csv("duffing", &["T", "solver", "oracle", "error"], &rows)?;
    ctx.below("duffing", worst, format!("constant mode against the scalar oscillator over [0, {t_end}]"))
}

pub fn hamiltonian_drift(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let s = Solver::new(prof.n_max, 1.0)?;
    let y = random_state(&prof, &ctx.factory("data"), 0)?;
    let t_end = need(&p.t_max, "t_max")?;
    let drift = |dt: f64| -> Result<f64> {
        let tr = s.solve(&y, None, 0.0, t_end, dt, 1)?.complete()?;
        let h0 = s.hamiltonian(&tr.states[0])?;
        let mut worst: f64 = 0.0;
        for x in &tr.states {
            worst = worst.max((s.hamiltonian(x)? - h0).abs());
        }
        Ok(worst / h0)
    };
    let dt = need(&p.dt, "dt")?;
    let coarse = need(&p.dt_coarse, "dt_coarse")?;
    let (d, d1, d2) = (drift(dt)?, drift(coarse)?, drift(coarse / 2.0)?);
    let order = (d1 / d2).log2();
    let rows = [(dt, d), (coarse, d1), (coarse / 2.0, d2)].map(|(a, b)| vec![cell(a), cell(b)]);
    ctx.csv("drift", &["dt", "relative_drift"], &rows)?;
    ctx.constant("hamiltonian_order", order, None);
    ctx.below("hamiltonian-drift", d, format!("max relative drift over [0, {t_end:.4}] at dt = {dt}"))?;
    ctx.at_least("hamiltonian-order", order, format!("log2 of drift ratio between dt = {coarse} and {}", coarse / 2.0))
}

/// `(T, 𝓔(v(T)), envelope(T))` at the snapshots of the forced solution with
/// zero data at `T = 0`, reference constants `C = c = 1`.
fn energy_and_envelope(s: &Solver, g: &StatePair, t_end: f64, dt: f64) -> Result<Vec<[f64; 3]>> {
    let tr = s.solve(&StatePair::zeros(s.n_max()), Some(g), 0.0, t_end, dt, stride(dt))?.complete()?;
    let norms = ForcingNorms::compute(g, t_end)?;
    tr.times.iter().zip(&tr.states).map(|(&t, st)| Ok([t, s.energy_e(st)?, norms.envelope_at(t, 1.0, 1.0)?])).collect()
}

fn worst_ratio(curve: &[[f64; 3]]) -> f64 {
    curve.iter().filter(|r| r[0] > 0.0 && r[2] > 0.0).map(|r| r[1] / r[2]).fold(0.0, f64::max)
}

pub fn gronwall_case1(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let s = Solver::new(prof.n_max, 1.0)?;
    let (t_end, dt) = (need(&p.t_max, "t_max")?, need(&p.dt, "dt")?);
    let cal = ctx.factory("calibration");
    let mut c_max: f64 = 0.0;
    for i in 0..need(&p.calibration_draws, "calibration_draws")? as u64 {
        let g = random_state(&prof, &cal, i)?;
        c_max = c_max.max(worst_ratio(&energy_and_envelope(&s, &g, t_end, dt)?));
    }
    // Safety factor 2 over the calibration batch, then frozen.
    let c = 2.0 * c_max;
    ctx.constant("gronwall_C", c, None);
    let fresh = ctx.factory("fresh");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..need(&p.fresh_draws, "fresh_draws")? as u64 {
        let g = random_state(&prof, &fresh, i)?;
        let curve = energy_and_envelope(&s, &g, t_end, dt)?;
        let r = worst_ratio(&curve) / c;
        worst = worst.max(r);
        rows.extend(curve.iter().map(|x| vec![i.to_string(), cell(x[0]), cell(x[1]), cell(c * x[2])]));
    }
    ctx.csv("fresh", &["draw", "T", "energy", "envelope"], &rows)?;
    ctx.at_most("gronwall-envelope", worst, format!("max energy over envelope on fresh draws, C = {c:.4e}, c = 1"))
}

/// `max |𝓔(v(T))|` over `[−T₀, T₀]` for the forced solution with zero data.
fn max_energy(s: &Solver, g: &StatePair, t0: f64, dt: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for end in [t0, -t0] {
        let tr = s.solve(&StatePair::zeros(s.n_max()), Some(g), 0.0, end, dt, stride(dt))?.complete()?;
        for st in &tr.states {
            worst = worst.max(s.energy_e(st)?);
        }
    }
    Ok(worst)
}

/// Smallest `c` with `gronwall_bound(c, t0) ≥ target`, by bisection in `log c`.
fn calibrate_bound(norms: &BudgetNorms, t0: f64, target: f64) -> f64 {
    if target <= 0.0 || norms.l3l6 == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12f64.ln(), 0.0f64);
    while norms.gronwall_bound(hi.exp(), t0) < target {
        hi += 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norms.gronwall_bound(mid.exp(), t0) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}

pub fn budget_case2(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let s = Solver::new(prof.n_max, 1.0)?;
    let (t0, dt) = (need(&p.t0, "t0")?, need(&p.dt, "dt")?);
    let base = GlobalizationBudget::new(need(&p.theta, "theta")?, t0, need(&p.cutoff, "cutoff")?, 1.0)?;
    let cal = ctx.factory("calibration");
    let mut c_max: f64 = 0.0;
    for i in 0..need(&p.calibration_draws, "calibration_draws")? as u64 {
        let g = random_state(&prof, &cal, i)?;
        let norms = BudgetNorms::compute(&g, &base)?;
        c_max = c_max.max(calibrate_bound(&norms, t0, max_energy(&s, &g, t0, dt)?));
    }
    let budget = GlobalizationBudget { c: 2.0 * c_max, ..base };
    ctx.constant("budget_C", budget.c, None);

    let fresh = ctx.factory("fresh");
    let want = need(&p.fresh_draws, "fresh_draws")?;
    let attempts = need(&p.max_attempts, "max_attempts")?;
    let (mut accepted, mut tried) = (0, 0);
    let mut rows = Vec::new();
    let (mut energy_ratio, mut bound_ratio): (f64, f64) = (0.0, 0.0);
    while accepted < want && tried < attempts {
        let g = random_state(&prof, &fresh, tried as u64)?;
        tried += 1;
        let report = check_globalization_budget(&g, &budget)?;
        let mut row = vec![(tried - 1).to_string()];
        row.extend(report.ratios.iter().map(|&r| cell(r)));
        row.push(report.j.to_string());
        if report.j {
            accepted += 1;
            let e = max_energy(&s, &g, t0, dt)?;
            let bound = report.norms.gronwall_bound(budget.c, t0);
            energy_ratio = energy_ratio.max(e / budget.energy_ceiling());
            bound_ratio = bound_ratio.max(e / bound);
            row.extend([cell(e), cell(bound)]);
        } else {
            row.extend([String::new(), String::new()]);
        }
        rows.push(row);
    }
    ctx.csv(
        "fresh",
        &["draw", "ratio_F", "ratio_G", "ratio_H", "ratio_I", "in_J", "max_energy", "gronwall_bound"],
        &rows,
    )?;
    ctx.constant("budget_acceptance_rate", accepted as f64 / tried.max(1) as f64, None);
    if accepted < want {
        energy_ratio = f64::NAN;
    }
    let detail = format!(
        "max energy over e^(p/6) = {:.4} on {accepted} of {want} J-draws ({tried} tried)",
        budget.energy_ceiling()
    );
    ctx.below("budget-energy", energy_ratio, detail)?;
    ctx.at_most("budget-bound", bound_ratio, "max energy over the calibrated Gronwall bound on J-draws".into())?;

    // A large multiple of a fresh draw: F should be the most violated set.
    let amp = need(&p.amplification, "amplification")?;
    let big = random_state(&prof, &fresh, 0)?.scaled(amp);
    let r = check_globalization_budget(&big, &budget)?;
    let others = r.ratios[1..].iter().copied().fold(f64::MIN, f64::max);
    let detail =
        format!("ratio_F over the largest of G, H, I at amplitude x{amp}; worst set {:?}", r.worst_violation());
    ctx.above("budget-f-first", r.ratios[0] / others, detail)
}

pub fn chart_roundtrip(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let draws = need(&p.draws, "draws")?;
    let n_max = need(&p.n_max, "n_max")?;
    let mut rng = ctx.factory("points").draw(0);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let (t, r): (f64, f64) = (rng.gen_range(-50.0..50.0), rng.gen_range(0.0..50.0));
        let c = chart_forward(t, r)?;
        let (t2, r2) = chart_inverse(c.t, c.r)?;
        worst = worst.max(((t2 - t).abs() + (r2 - r).abs()) / (1.0 + t.abs() + r));
    }
    ctx.below("chart-roundtrip", worst, format!("relative round trip over {draws} points with |t|, r < 50"))?;

    let a2 = 2f64.atan();
    let forward =
        [((0.0, 0.0), [0.0, 0.0, 2.0]), ((0.0, 1.0), [0.0, PI / 2.0, 1.0]), ((1.0, 1.0), [a2, a2, 2.0 / 5f64.sqrt()])];
    let mut ex: f64 = 0.0;
    for ((t, r), want) in forward {
        let c = chart_forward(t, r)?;
        ex = ex.max(max_abs_diff(&[c.t, c.r, c.omega], &want));
    }
    let h = 3f64.sqrt() / 2.0;
    for ((tc, rc), want) in [((0.0, 0.0), [0.0, 0.0]), ((0.0, PI / 2.0), [0.0, 1.0]), ((PI / 3.0, PI / 3.0), [h, h])] {
        let (t, r) = chart_inverse(tc, rc)?;
        ex = ex.max(max_abs_diff(&[t, r], &want));
    }
    ctx.below("chart-examples", ex, "closed-form chart values".into())?;

    // ∫_{S³}φ against ∫_{ℝ³}φ∘R₀ Ω₀³ dx for a positive band-limited φ.
    let prof = CoefficientProfile::with_scale(0.0, 2.0, n_max, 1.0)?;
    let state = random_state(&prof, &ctx.factory("pullback"), 0)?;
    let grid = SphereGrid::for_products(n_max);
    let tr = HarmonicTransform::new(n_max, grid.clone())?;
    let phi = tr.synthesize(&state.pos)?.map(|x| x * x);
    let sphere = grid.integrate(&phi)?;
    let eg = EuclideanRadialGrid::new(n_max, grid)?;
    let pulled: f64 =
        phi.values().iter().zip(eg.weights()).zip(eg.node_radii()).map(|((v, w), r)| v * w * omega0(r).powi(3)).sum();
    ctx.below("measure-pullback", (sphere - pulled).abs() / sphere, "relative gap of the pulled-back integral".into())
}

pub fn h0_h1_eigen(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let n_max = need(&p.n_max, "n_max")?;
    let eg = EuclideanRadialGrid::new(n_max, SphereGrid::for_products(n_max))?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        let mut ks = vec![1, n * n / 2 + 1, n * n];
        ks.dedup();
        for k in ks {
            let e = SphereField::single(n_max, HarmonicIndex::new(n, k)?, 1.0);
            for (name, op) in [("H0", RadialOperator::H0), ("H1", RadialOperator::H1)] {
                let r = radial_eigen_residual(op, &e, n, &eg)?;
                worst = worst.max(r);
                rows.push(vec![name.to_string(), n.to_string(), k.to_string(), cell(r)]);
            }
        }
    }
    ctx.csv("eigen", &["operator", "n", "k", "relative_residual"], &rows)?;
    ctx.below("h0-h1-eigen", worst, format!("eigen-residuals for n <= {n_max}"))?;

    let prof = CoefficientProfile::with_scale(0.0, 2.0, n_max, 1.0)?;
    let mut state = random_state(&prof, &ctx.factory("isometry"), 0)?;
    let norm = state.pos.l2_norm();
    state.pos.scale(1.0 / norm);
    let pair = pt0_inverse(&state, &eg)?;
    let l2 = euclid_weighted_norm(&pair.g0, &eg, 0.5, None)?;
    ctx.below("isometry-l2", (l2 - 1.0).abs(), "weighted L2 norm of g0 for unit v0".into())?;
    let mut gap: f64 = 0.0;
    for n in 1..=n_max {
        let e = SphereField::single(n_max, HarmonicIndex::new(n, n)?, 1.0);
        let h = pullback(RadialOperator::H1, &e, &eg)?;
        let v = euclid_weighted_norm(&h, &eg, -0.5, Some((RadialOperator::H1, -1.0)))?;
        gap = gap.max((v - 1.0 / n as f64).abs());
    }
    ctx.below("isometry-h-1", gap, "weighted H^-1 norm of g1 for v1 = e_{n,n} against 1/n".into())
}

pub fn lq_transfer(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let qs = need(&p.q_list, "q_list")?;
    let nodes = need(&p.nodes, "nodes")?;
    let one = SphereField::single(1, HarmonicIndex::new(1, 1)?, VOLUME.sqrt());
    let r = lq_transfer_op(|_| Ok(one.clone()), 1, 4.0, nodes)?;
    let exact = 2.0 * PI.powi(3);
    let mut rows = vec![vec![
        "constant".to_string(),
        cell(4.0),
        cell(r.euclid),
        cell(r.sphere),
        cell(r.relative_gap()),
        cell(r.bound_ratio()),
    ]];
    let c_gap = (r.euclid - exact).abs().max((r.sphere - exact).abs()) / exact;
    ctx.below("lq-constant", c_gap, "w = 1, q = 4 against 2 pi^3 on both sides".into())?;
    let data = random_state(&prof, &ctx.factory("data"), 0)?;
    let mut worst: f64 = 0.0;
    for &q in &qs {
        let r = lq_transfer_op(|t| Ok(linear_position(&data, t)), prof.n_max, q, nodes)?;
        worst = worst.max(r.relative_gap());
        rows.push(vec![
            "linear".into(),
            cell(q),
            cell(r.euclid),
            cell(r.sphere),
            cell(r.relative_gap()),
            cell(r.bound_ratio()),
        ]);
    }
    ctx.csv("lq", &["field", "q", "euclid", "sphere", "relative_gap", "bound_ratio"], &rows)?;
    ctx.below("lq-transfer", worst, format!("relative gap for q in {qs:?}"))
}

pub fn scattering_fit(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let n_max = prof.n_max;
    let (q, dt, nodes) = (need(&p.q, "q")?, need(&p.dt, "dt")?, need(&p.nodes, "nodes")?);
    let ts = log_spaced(need(&p.t_min, "t_min")?, need(&p.t_max, "t_max")?, need(&p.points, "points")?);
    let data = random_state(&prof, &ctx.factory("data"), 0)?;

    // Control: the κ = 0 run against the exact linear flow.
    let lin = Solver::new(n_max, 0.0)?.solve(&data, None, 0.0, PI, dt, 2)?.complete()?;
    let exact: Vec<StatePair> = lin.times.iter().map(|&t| evolve_linear(&data, t)).collect();
    let reference = Trajectory { states: exact, ..lin.clone() };
    let control = scattering_decay(&*trajectory_difference(&lin, Some(&reference)), n_max, q, &ts, nodes)?;
    let control_max = control.points.iter().map(|p| p.norm).fold(0.0, f64::max);
    ctx.csv_with("control", |f| control.write_csv(f))?;
    ctx.below("scattering-control", control_max, "largest norm of the zero-nonlinearity difference".into())?;

    let pert = Solver::new(n_max, 1.0)?.solve(&StatePair::zeros(n_max), Some(&data), 0.0, PI, dt, 2)?.complete()?;
    let fit = scattering_decay(&*trajectory_difference(&pert, None), n_max, q, &ts, nodes)?;
    ctx.csv_with("decay", |f| fit.write_csv(f))?;
    let beta = fit.beta().unwrap_or(f64::NAN);
    if let Some(f) = &fit.fit {
        ctx.constant("scattering_beta", beta, Some(fit_ci(f, -1.0)));
    }
    let (lo, hi) = (ctx.tol("scattering-beta-min")?, ctx.tol("scattering-beta-max")?);
    let r2 = fit.fit.as_ref().map_or(f64::NAN, |f| f.r_squared);
    ctx.record(
        "scattering-beta",
        beta,
        Some(lo),
        Some(hi),
        false,
        format!("fitted decay exponent at q = {q}, R^2 = {r2:.4}"),
    );
    Ok(())
}

pub fn uniqueness_h(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let s = Solver::new(prof.n_max, 1.0)?;
    let (dt, t_end) = (need(&p.dt, "dt")?, need(&p.t_max, "t_max")?);
    let data = random_state(&prof, &ctx.factory("data"), 0)?;
    let k = stride(dt);
    let a = s.solve(&data, None, 0.0, t_end, dt, k)?.complete()?;
    let b = s.solve(&data, None, 0.0, t_end, dt / 2.0, 2 * k)?.complete()?;
    let h = uniqueness_energy(&a, &b)?;
    ctx.csv("H", &["T", "H"], &h.iter().map(|(t, x)| vec![cell(*t), cell(*x)]).collect::<Vec<_>>())?;
    let worst = h.iter().map(|x| x.1).fold(0.0, f64::max);
    ctx.below("uniqueness-H", worst, format!("max H over [0, {t_end:.4}] between dt = {dt} and dt/2"))
}

pub fn simulate(ctx: &mut Ctx, p: &Params) -> Result<()> {
    let prof = profile(p)?;
    let s = Solver::new(prof.n_max, need(&p.kappa, "kappa")?)?;
    let (dt, t0, t1) = (need(&p.dt, "dt")?, need(&p.t_min, "t_min")?, need(&p.t_max, "t_max")?);
    let data = random_state(&prof, &ctx.factory("data"), 0)?;
    let tr = s.solve(&data, None, t0, t1, dt, need(&p.points, "points")?)?;
    ctx.csv_with("trajectory", |f| tr.write_csv(f))?;
    let mut rows = Vec::new();
    let h0 = s.hamiltonian(&tr.states[0])?;
    let mut drift: f64 = 0.0;
    for (t, st) in tr.times.iter().zip(&tr.states) {
        let h = s.hamiltonian(st)?;
        drift = drift.max((h - h0).abs() / h0.abs().max(f64::MIN_POSITIVE));
        rows.push(vec![cell(*t), cell(h), cell(s.energy_e(st)?)]);
    }
    ctx.csv("energy", &["T", "hamiltonian", "energy_e"], &rows)?;
    ctx.constant("hamiltonian_relative_drift", drift, None);
    // Fraction of [t0, t1] covered before any runaway.
    let reached = (tr.times.last().copied().unwrap_or(t0) - t0) / (t1 - t0);
    let detail = match tr.blow_up {
        Some(t) => format!("runaway after T = {t}"),
        None => "completed".into(),
    };
    ctx.at_least("finite", reached, detail)
}
