use rbmm::apps::quadratic::QuadraticProblem;
use rbmm::apps::subspace::{st_generate, SubspaceProblem};
use rbmm::driver::{audit_trace, run_rbmm, stationarity_at, stationarity_measure, BlockProblem, SolverConfig};
use rbmm::rng;
use rbmm::surrogates::{Schedule, SurrogateFamily, SurrogateSpec};
use rbmm::{Constraint, Error, Manifold, Mat, Point, ProductPoint};

fn prox(l: f64) -> SurrogateSpec {
    SurrogateSpec::new(SurrogateFamily::EuclideanProximal(Schedule::Constant(l)))
}

fn scalar_state(a: f64, b: f64) -> ProductPoint {
    let m = Manifold::Euclidean { rows: 1, cols: 1 };
    ProductPoint::new(vec![
        Point::new(m, Mat::from_element(1, 1, a)).unwrap(),
        Point::new(m, Mat::from_element(1, 1, b)).unwrap(),
    ])
}

// 2θ₁ + θ₂ = 2 and θ₁ + 2θ₂ = 4 give the stationary point (0, 2), where f = 1.
#[test]
fn demo_reaches_the_stationary_point() {
    let p = QuadraticProblem::demo();
    let out = run_rbmm(&p, &SolverConfig::new(200, vec![prox(1.0), prox(1.0)]), &p.zero_init()).unwrap();
    let st = out.final_state.data();
    assert!(st[0][(0, 0)].abs() < 1e-8 && (st[1][(0, 0)] - 2.0).abs() < 1e-8);
    assert!((out.trace.last().unwrap().objective - 1.0).abs() < 1e-8);
    assert_eq!(out.trace.len(), 201);
    for w in out.trace.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-12);
        assert!(w[1].gaps.iter().all(|g| *g >= -1e-10));
    }
}

#[test]
fn single_block_prox_linear_is_gradient_descent() {
    let p = QuadraticProblem::random(vec![4], 5);
    let spec = SurrogateSpec::new(SurrogateFamily::ProxLinear { lambda: Schedule::Constant(0.0), add_smoothness: true });
    let out = run_rbmm(&p, &SolverConfig::new(3000, vec![spec]), &p.zero_init()).unwrap();
    for w in out.trace.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-12);
    }
    let x = &out.final_state.blocks[0].data;
    assert!((x - p.minimizer().unwrap()).norm() < 1e-6);
}

#[test]
fn stationary_init_with_identity_does_not_move() {
    let p = QuadraticProblem::demo();
    let spec = SurrogateSpec::new(SurrogateFamily::Identity);
    let out = run_rbmm(&p, &SolverConfig::new(5, vec![spec.clone(), spec]), &scalar_state(0.0, 2.0)).unwrap();
    for rec in &out.trace {
        assert!(rec.steps.iter().all(|s| *s == 0.0));
    }
}

#[test]
fn stationarity_examples() {
    let p = QuadraticProblem::demo();
    assert_eq!(stationarity_measure(&p, &scalar_state(0.0, 2.0)).unwrap(), 0.0);
    // grad = Aθ − b = (−2, −4) at the origin
    let s = stationarity_measure(&p, &scalar_state(0.0, 0.0)).unwrap();
    assert!((s - 6.0).abs() < 1e-14);
    let shifted = QuadraticProblem::new(p.a.clone(), p.b.clone(), p.c + 100.0, vec![1, 1]).unwrap();
    assert_eq!(stationarity_measure(&shifted, &scalar_state(0.3, 0.1)).unwrap(), s_at(&p, 0.3, 0.1));
}

fn s_at(p: &QuadraticProblem, a: f64, b: f64) -> f64 {
    stationarity_at(p, &scalar_state(a, b).data()).unwrap()
}

// Block 0 lives in the ball |θ₁ − 0.5| ≤ 0.5. At θ₁ = 0 the block gradients
// are θ₂ − 2 and 2θ₂ − 4.
#[test]
fn boundary_cone_projection() {
    let ball = Constraint::EuclideanBall { center: Mat::from_element(1, 1, 0.5), radius: 0.5 };
    let p = QuadraticProblem::demo().with_constraint(0, ball).unwrap();
    // block-0 gradient −1: −grad points inward and is kept
    assert!((s_at(&p, 0.0, 1.0) - 3.0).abs() < 1e-14);
    // block-0 gradient +1: −grad points outward and is removed
    assert!((s_at(&p, 0.0, 3.0) - 2.0).abs() < 1e-14);
}

#[test]
fn runs_are_deterministic() {
    let d = st_generate(8, 2, 4, 3, 0.1, 3).unwrap();
    let p = SubspaceProblem::from_data(&d, 0.1).unwrap();
    let mut r = rng::seeded(4);
    let init = p.random_init(&mut r);
    let cfg = SolverConfig::new(
        20,
        vec![
            SurrogateSpec::new(SurrogateFamily::EuclideanProximal(Schedule::Constant(0.1)))
                .with_inner(20, Schedule::Constant(1e-10)),
            SurrogateSpec::new(SurrogateFamily::Custom),
        ],
    );
    let a = run_rbmm(&p, &cfg, &init).unwrap();
    let b = run_rbmm(&p, &cfg, &init).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gap_partial_sums_are_bounded() {
    let p = QuadraticProblem::random(vec![2, 3, 1], 9);
    let cfg = SolverConfig::new(100, vec![prox(0.5); 3]);
    let out = run_rbmm(&p, &cfg, &p.zero_init()).unwrap();
    let audit = audit_trace(&out.trace, 3, 1e-12).unwrap();
    assert!(audit.violations.is_empty());
    let f0 = out.trace[0].objective;
    let fmin = out.trace.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    for w in audit.gap_partial_sums.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!(*audit.gap_partial_sums.last().unwrap() <= f0 - fmin + 1e-9);
}

#[test]
fn stop_tol_ends_early() {
    let p = QuadraticProblem::demo();
    let mut cfg = SolverConfig::new(1000, vec![prox(1.0), prox(1.0)]);
    cfg.stop_tol = Some(1e-6);
    let out = run_rbmm(&p, &cfg, &p.zero_init()).unwrap();
    assert!(out.trace.len() < 1001);
    assert!(out.trace.last().unwrap().stationarity.unwrap() <= 1e-6);
}

#[test]
fn fixed_point_barely_moves() {
    let p = QuadraticProblem::demo();
    let out = run_rbmm(&p, &SolverConfig::new(1, vec![prox(2.0), prox(2.0)]), &scalar_state(0.0, 2.0)).unwrap();
    assert!(out.trace[1].steps.iter().all(|s| *s <= 1e-8));
}

#[test]
fn infeasible_init_and_unsupported_family() {
    let ball = Constraint::EuclideanBall { center: Mat::from_element(1, 1, 0.0), radius: 0.1 };
    let p = QuadraticProblem::demo().with_constraint(0, ball).unwrap();
    let cfg = SolverConfig::new(3, vec![prox(1.0), prox(1.0)]);
    assert!(matches!(run_rbmm(&p, &cfg, &scalar_state(1.0, 0.0)), Err(Error::InfeasibleInit(_))));

    let d = st_generate(8, 2, 4, 3, 0.0, 3).unwrap();
    let sp = SubspaceProblem::from_data(&d, 0.0).unwrap();
    let cfg = SolverConfig::new(
        3,
        vec![
            SurrogateSpec::new(SurrogateFamily::RiemannianProximal(Schedule::Constant(1.0))),
            SurrogateSpec::new(SurrogateFamily::Custom),
        ],
    );
    let init = sp.init_from(&d.truth);
    assert!(matches!(run_rbmm(&sp, &cfg, &init), Err(Error::UnsupportedFamily { .. })));
    assert_eq!(sp.num_blocks(), 2);
}
