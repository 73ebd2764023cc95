use std::f64::consts::PI;

use pnlw::linear_flow::{evolve_linear, linear_position};
use pnlw::nlw::Solver;
use pnlw::penrose::{
    apply_radial_operator, chart_forward, chart_inverse, euclid_weighted_norm, log_spaced, lq_transfer,
    lq_transfer_trajectory, omega0, pt0_inverse, pullback, radial_eigen_residual, scattering_decay,
    trajectory_difference, EuclideanRadialGrid, RadialOperator, SCATTERING_NODES,
};
use pnlw::random_basis::RotatedBasis;
use pnlw::random_data::{draw_data, CoefficientProfile, Distribution, RandomDraw, StatePair};
use pnlw::rng::StreamFactory;
use pnlw::sphere::{HarmonicIndex, HarmonicTransform, SphereField, SphereGrid, VOLUME};
use rand::Rng;

fn random_state(n_max: usize, scale: f64, seed: u64) -> StatePair {
    let profile = CoefficientProfile::with_scale(0.0, 2.0, n_max, scale).unwrap();
    let factory = StreamFactory::new(seed, "penrose-test");
    let basis = RotatedBasis::sample(n_max, &factory.child(0)).unwrap();
    let draw = RandomDraw::sample(n_max, Distribution::Gaussian, &mut factory.child(1).draw(0));
    draw_data(&profile, &basis, &draw).unwrap()
}

#[test]
fn chart_round_trip() {
    let mut rng = StreamFactory::new(1, "chart").draw(0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (t, r) = (rng.gen_range(-50.0..50.0), rng.gen_range(0.0..50.0));
        let c = chart_forward(t, r).unwrap();
        assert!(c.omega > 0.0 && (0.0..PI).contains(&c.r));
        let (t2, r2) = chart_inverse(c.t, c.r).unwrap();
        worst = worst.max(((t2 - t).abs() + (r2 - r).abs()) / (1.0 + t.abs() + r));
    }
    println!("round trip {worst:e}");
    assert!(worst < 1e-12);
}

#[test]
fn radial_jacobian() {
    for r in [0.1, 0.5, 1.0, 3.0, 20.0] {
        let h = 1e-5 * (1.0 + r);
        let d = (chart_forward(0.0, r + h).unwrap().r - chart_forward(0.0, r - h).unwrap().r) / (2.0 * h);
        assert!((d - omega0(r)).abs() < 1e-8, "r = {r}");
    }
}

#[test]
fn measure_pullback() {
    let n_max = 5;
    let state = random_state(n_max, 1.0, 3);
    let grid = SphereGrid::for_products(n_max);
    let tr = HarmonicTransform::new(n_max, grid.clone()).unwrap();
    let phi = tr.synthesize(&state.pos).unwrap().map(|x| x * x);
    let sphere = grid.integrate(&phi).unwrap();
    let eg = EuclideanRadialGrid::new(n_max, grid).unwrap();
    let pulled: f64 =
        phi.values().iter().zip(eg.weights()).zip(eg.node_radii()).map(|((v, w), r)| v * w * omega0(r).powi(3)).sum();
    assert!((sphere - pulled).abs() < 1e-8 * sphere);
}

#[test]
fn eigenfunctions_of_h0_and_h1() {
    let n_max = 8;
    let eg = EuclideanRadialGrid::new(n_max, SphereGrid::for_products(n_max)).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        for k in [1, n * n / 2 + 1, n * n] {
            let e = SphereField::single(n_max, HarmonicIndex::new(n, k).unwrap(), 1.0);
            for op in [RadialOperator::H0, RadialOperator::H1] {
                worst = worst.max(radial_eigen_residual(op, &e, n, &eg).unwrap());
            }
        }
    }
    println!("eigen residual {worst:e}");
    assert!(worst < 1e-5);
    // Linearity of the discrete operator.
    let (a, b) = (random_state(n_max, 1.0, 5).pos, random_state(n_max, 1.0, 6).pos);
    let mut ab = a.scaled(2.0);
    ab.add_scaled(&b, -3.0);
    let lhs = apply_radial_operator(RadialOperator::H0, &ab, &eg).unwrap();
    let (ha, hb) = (
        apply_radial_operator(RadialOperator::H0, &a, &eg).unwrap(),
        apply_radial_operator(RadialOperator::H0, &b, &eg).unwrap(),
    );
    for ((l, x), y) in lhs.values().iter().zip(ha.values()).zip(hb.values()) {
        assert!((l - 2.0 * x + 3.0 * y).abs() < 1e-9 * (1.0 + l.abs()));
    }
}

#[test]
fn weighted_isometries() {
    let n_max = 6;
    let eg = EuclideanRadialGrid::new(n_max, SphereGrid::for_products(n_max)).unwrap();
    let mut state = random_state(n_max, 1.0, 8);
    let norm = state.pos.l2_norm();
    state.pos.scale(1.0 / norm);
    let pair = pt0_inverse(&state, &eg).unwrap();
    let l2 = euclid_weighted_norm(&pair.g0, &eg, 0.5, None).unwrap();
    assert!((l2 - 1.0).abs() < 1e-8);
    assert_eq!(euclid_weighted_norm(&eg.grid().zeros(), &eg, 0.5, None).unwrap(), 0.0);
    for n in 1..=n_max {
        let e = SphereField::single(n_max, HarmonicIndex::new(n, n).unwrap(), 1.0);
        let h = pullback(RadialOperator::H1, &e, &eg).unwrap();
        let hm1 = euclid_weighted_norm(&h, &eg, -0.5, Some((RadialOperator::H1, -1.0))).unwrap();
        assert!((hm1 - 1.0 / n as f64).abs() < 1e-6, "n = {n}: {hm1}");
    }
}

#[test]
fn lq_transfer_identity() {
    let one = SphereField::single(1, HarmonicIndex::new(1, 1).unwrap(), VOLUME.sqrt());
    let r = lq_transfer(|_| Ok(one.clone()), 1, 4.0, 64).unwrap();
    println!("w = 1: {} {} vs {}", r.euclid, r.sphere, 2.0 * PI.powi(3));
    assert!((r.euclid - 2.0 * PI.powi(3)).abs() < 1e-5 * 2.0 * PI.powi(3));
    assert!((r.sphere - 2.0 * PI.powi(3)).abs() < 1e-8);
    let zero = lq_transfer(|_| Ok(SphereField::zeros(2)), 2, 5.0, 16).unwrap();
    assert_eq!((zero.euclid, zero.sphere), (0.0, 0.0));

    let n_max = 3;
    let data = random_state(n_max, 1.0, 12);
    for q in [4.0, 5.0, 6.0] {
        let r = lq_transfer(|t| Ok(linear_position(&data, t)), n_max, q, 96).unwrap();
        println!("q = {q}: {} {} gap {:e} bound {}", r.euclid, r.sphere, r.relative_gap(), r.bound_ratio());
        assert!(r.relative_gap() < 1e-5);
        assert!(r.bound_ratio() <= 1.0);
        let s = lq_transfer(|t| Ok(linear_position(&data, t).scaled(-2.0)), n_max, q, 96).unwrap();
        assert!((s.sphere / r.sphere - 2f64.powf(q)).abs() < 1e-9 * 2f64.powf(q));
    }
}

#[test]
fn lq_transfer_on_a_solution() {
    let n_max = 3;
    let s = Solver::new(n_max, 1.0).unwrap();
    let data = random_state(n_max, 1.0, 13);
    let tr = s.solve(&data, None, -PI, PI, 2e-3, 5).unwrap();
    let r = lq_transfer_trajectory(&tr, 6.0, 96).unwrap();
    println!("solution q = 6: gap {:e}", r.relative_gap());
    assert!(r.relative_gap() < 1e-5);
}

#[test]
fn scattering_control_and_decay() {
    let n_max = 8;
    let s = Solver::new(n_max, 1.0).unwrap();
    let data = random_state(n_max, 0.1, 17);
    let ts = log_spaced(2.0, 40.0, 12);
    // Linear control: the nonlinear run with κ = 0 is the linear flow.
    let lin = Solver::new(n_max, 0.0).unwrap().solve(&data, None, 0.0, PI, 5e-3, 2).unwrap();
    let reference: Vec<StatePair> = lin.times.iter().map(|&t| evolve_linear(&data, t)).collect();
    let lin_ref = pnlw::nlw::Trajectory { states: reference, ..lin.clone() };
    let control =
        scattering_decay(&*trajectory_difference(&lin, Some(&lin_ref)), n_max, 6.0, &ts, SCATTERING_NODES).unwrap();
    let worst = control.points.iter().map(|p| p.norm).fold(0.0, f64::max);
    println!("control {worst:e}");
    assert!(worst < 1e-8);

    let pert = s.solve(&StatePair::zeros(n_max), Some(&data), 0.0, PI, 5e-3, 2).unwrap();
    let fit = scattering_decay(&*trajectory_difference(&pert, None), n_max, 6.0, &ts, SCATTERING_NODES).unwrap();
    for p in &fit.points {
        println!(
            "t {:.3} norm {:.6e} quad {:.1e} interp {:.1e}",
            p.t, p.norm, p.quadrature_error, p.interpolation_error
        );
    }
    println!("beta {:?}", fit.beta());
    assert!(fit.beta().unwrap() >= 0.30);
    assert!(scattering_decay(&*trajectory_difference(&pert, None), n_max, 3.6, &ts, 16).is_err());
}
