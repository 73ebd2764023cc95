use pnlw::linear_flow::evolve_linear;
use pnlw::nlw::{duhamel_map, energy_e, picard_local, PicardConfig, Solver};
use pnlw::random_basis::RotatedBasis;
use pnlw::random_data::{draw_data, CoefficientProfile, Distribution, RandomDraw, StatePair};
use pnlw::rng::StreamFactory;
use pnlw::sphere::{sobolev_norm, HarmonicIndex, SphereField, VOLUME};

fn random_state(n_max: usize, scale: f64, seed: u64) -> StatePair {
    let profile = CoefficientProfile::with_scale(0.2, 2.5, n_max, scale).unwrap();
    let factory = StreamFactory::new(seed, "nlw-test");
    let basis = RotatedBasis::sample(n_max, &factory.child(0)).unwrap();
    let draw = RandomDraw::sample(n_max, Distribution::Gaussian, &mut factory.child(1).draw(0));
    draw_data(&profile, &basis, &draw).unwrap()
}

/// `y'' + y + y³/(2π²) = 0`, classical RK4 at a step far below the solver's.
fn duffing_oracle(y0: f64, t_end: f64, steps: usize) -> Vec<f64> {
    let h = t_end / steps as f64;
    let f = |y: f64, v: f64| (v, -y - y.powi(3) / VOLUME);
    let (mut y, mut v) = (y0, 0.0);
    let mut out = vec![y];
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

#[test]
fn constant_mode_follows_scalar_oscillator() {
    let c = 3.0;
    let s = Solver::new(3, 1.0).unwrap();
    let e = SphereField::single(3, HarmonicIndex::new(1, 1).unwrap(), c);
    let tr = s.solve(&StatePair::new(e, SphereField::zeros(3)).unwrap(), None, 0.0, 20.0, 1e-3, 100).unwrap();
    let oracle = duffing_oracle(c, 20.0, 400_000);
    let err = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(t, st)| (st.pos.coeffs()[0] - oracle[(t / 5e-5).round() as usize]).abs())
        .fold(0.0, f64::max);
    println!("duffing max error {err:e}");
    assert!(err < 1e-6);
}

#[test]
fn hamiltonian_drift_and_order() {
    let s = Solver::new(8, 1.0).unwrap();
    let y = random_state(8, 1.0, 7);
    let drift = |dt: f64| {
        let tr = s.solve(&y, None, 0.0, 2.0 * std::f64::consts::PI, dt, 1).unwrap();
        let h0 = s.hamiltonian(&tr.states[0]).unwrap();
        tr.states.iter().map(|x| (s.hamiltonian(x).unwrap() - h0).abs()).fold(0.0, f64::max) / h0
    };
    let d = drift(1e-3);
    let (d1, d2) = (drift(0.02), drift(0.01));
    let order = (d1 / d2).log2();
    println!("drift {d:e}; coarse {d1:e} {d2:e} order {order}");
    assert!(d < 1e-6);
    assert!(order >= 3.5);
}

#[test]
fn time_reversal_returns_initial_state() {
    let s = Solver::new(6, 1.0).unwrap();
    let y = random_state(6, 1.0, 11);
    let fwd = s.solve(&y, None, 0.0, 3.0, 2e-3, 100).unwrap();
    let mut back = fwd.last().clone();
    back.vel.scale(-1.0);
    let ret = s.solve(&back, None, 0.0, 3.0, 2e-3, 100).unwrap();
    let mut end = ret.last().clone();
    end.vel.scale(-1.0);
    let err = end.sub(&y).max_abs();
    println!("reversal error {err:e}");
    assert!(err < 1e-8);
}

#[test]
fn energy_dominates_h1_and_l4() {
    let s = Solver::new(5, 1.0).unwrap();
    let g = random_state(5, 1.0, 3);
    let tr = s.solve(&StatePair::zeros(5), Some(&g), 0.0, 2.0, 5e-3, 20).unwrap();
    for st in &tr.states {
        let e = energy_e(st).unwrap();
        assert!(sobolev_norm(&st.pos, 1.0) <= e + 1e-14);
        assert!(st.vel.l2_norm() <= e + 1e-14);
        assert!(s.l4_norm(&st.pos).unwrap().powi(2) <= 2f64.sqrt() * e + 1e-14);
    }
}

#[test]
fn small_data_converges_to_linear_flow() {
    let s = Solver::new(4, 1.0).unwrap();
    let base = random_state(4, 1.0, 5);
    let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&a| {
            let y = base.scaled(a);
            let tr = s.solve(&y, None, 0.0, 1.0, 1e-2, 100).unwrap();
            tr.last().sub(&evolve_linear(&y, 1.0)).max_abs() / a.powi(3)
        })
        .collect();
    println!("defect ratios {ratios:?}");
    assert!(ratios.iter().all(|r| r.is_finite() && *r < 2.0 * ratios[2] + 1e-3));
}

#[test]
fn picard_iterates_contract_to_the_solver() {
    let s = Solver::new(4, 1.0).unwrap();
    let g = random_state(4, 0.3, 21);
    let data = random_state(4, 0.3, 22);
    let cfg = PicardConfig::new(0.5, 2.0, 1.0, 12);
    let r = picard_local(&s, Some(&g), &data, &cfg).unwrap();
    println!("T1 {} distances {:?} factor {}", r.t1, r.distances, r.contraction_factor());
    let fwd = s.solve(&data, Some(&g), cfg.t0, cfg.t0 + r.t1, 1e-3, 1).unwrap();
    let err = r.limit().last().unwrap().sub(fwd.last()).max_abs();
    println!("limit vs solve {err:e}");
    assert!(r.contraction_factor() < 1.0);
    assert!(err < 1e-6);
    // Duhamel residual of the time-stepped solution.
    let back = s.solve(&data, Some(&g), cfg.t0, cfg.t0 - r.t1, 1e-3, 1).unwrap();
    let mut states: Vec<StatePair> = Vec::new();
    for &t in &r.times {
        let tr = if t >= cfg.t0 { &fwd } else { &back };
        states.push(tr.interpolate(t).unwrap());
    }
    let mapped = duhamel_map(&s, Some(&g), &data, &r.times, r.center, &states).unwrap();
    let res = mapped.iter().zip(&states).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max);
    println!("duhamel residual {res:e}");
    assert!(res < 1e-5);
}

#[test]
fn picard_constant_mode_matches_oscillator() {
    let s = Solver::new(2, 1.0).unwrap();
    let e = SphereField::single(2, HarmonicIndex::new(1, 1).unwrap(), 0.1);
    let data = StatePair::new(e, SphereField::zeros(2)).unwrap();
    let r = picard_local(&s, None, &data, &PicardConfig::new(0.0, 1.0, 1.0, 8)).unwrap();
    let oracle = duffing_oracle(0.1, r.t1, 20_000);
    let got = r.limit().last().unwrap().pos.coeffs()[0];
    assert!((got - oracle.last().unwrap()).abs() < 1e-9);
    let tail: Vec<f64> = r.factors.iter().copied().filter(|f| *f > 0.0).collect();
    assert!(tail.iter().all(|&f| f < 1.0));
}
