use rbmm::apps::cp::{cp_generate, CpProblem, FactorKind};
use rbmm::apps::likelihood::{ol_generate, OptimisticLikelihoodProblem};
use rbmm::apps::quadratic::QuadraticProblem;
use rbmm::apps::rpca::{rpca_generate, RpcaProblem};
use rbmm::apps::subspace::{st_generate, SubspaceProblem};
use rbmm::driver::{BlockMarginal, BlockProblem};
use rbmm::rng;
use rbmm::surrogates::{
    build_surrogate, check_majorization, check_majorization_at, BlockFacts, MajorizationReport, Schedule,
    SurrogateFamily,
};
use rbmm::Mat;

const SAMPLES: usize = 100;

fn facts(p: &dyn BlockProblem, i: usize, state: &[Mat], family: &SurrogateFamily) -> BlockFacts {
    BlockFacts {
        smoothness: p.smoothness_bound(i, state),
        curvature: p.curvature_bound(i, state),
        r_map: match family {
            SurrogateFamily::RegularizedLinearStiefel(_) => p.r_map(i, state),
            _ => None,
        },
    }
}

/// Retraction samples around the anchor, keeping only feasible ones.
fn sample(p: &dyn BlockProblem, i: usize, state: &[Mat], family: SurrogateFamily, scale: f64, seed: u64) -> MajorizationReport {
    let m = p.manifold(i);
    let marginal = BlockMarginal::new(p, i, state.to_vec());
    let f = facts(p, i, state, &family);
    let kind = family.resolve(1, f.smoothness).unwrap();
    let s = build_surrogate(kind, m, &marginal, &state[i], &f).unwrap();
    let c = p.constraint(i);
    let mut r = rng::seeded(seed);
    let mut pts = Vec::new();
    while pts.len() < SAMPLES {
        let eta = m.random_tangent(&state[i], &mut r).unwrap();
        let t = rng::uniform(&mut r, 0.0, scale);
        if let Ok(x) = m.retract_raw(&state[i], &(eta * t)) {
            if c.contains(&m, &x).unwrap() {
                pts.push(x);
            }
        }
    }
    check_majorization_at(&s, &marginal, &pts, 0.0, 2.0).unwrap()
}

fn assert_majorizes(rep: &MajorizationReport, label: &str) {
    assert_eq!(rep.samples, SAMPLES);
    assert!(rep.max_violation <= 1e-10, "{label}: {rep:?}");
    assert!(rep.sharpness <= 1e-10, "{label}: {rep:?}");
}

#[test]
fn quadratic_families() {
    let p = QuadraticProblem::random(vec![2, 2], 4);
    let mut r = rng::seeded(2);
    let st: Vec<Mat> = vec![rng::gaussian(&mut r, 2, 1), rng::gaussian(&mut r, 2, 1)];
    let families = [
        SurrogateFamily::Identity,
        SurrogateFamily::EuclideanProximal(Schedule::Constant(0.3)),
        SurrogateFamily::RiemannianProximal(Schedule::Constant(0.3)),
        SurrogateFamily::ProxLinear { lambda: Schedule::Constant(0.0), add_smoothness: true },
    ];
    for fam in families {
        for i in 0..2 {
            assert_majorizes(&sample(&p, i, &st, fam, 3.0, 10 + i as u64), fam.name());
        }
    }
}

#[test]
fn subspace_families() {
    let d = st_generate(10, 2, 5, 3, 0.1, 3).unwrap();
    let p = SubspaceProblem::from_data(&d, 0.2).unwrap();
    let mut r = rng::seeded(4);
    let st = p.random_init(&mut r).data();
    let families = [
        SurrogateFamily::ProxLinear { lambda: Schedule::Constant(0.0), add_smoothness: false },
        SurrogateFamily::RegularizedLinearStiefel(Schedule::Constant(0.5)),
        SurrogateFamily::EuclideanProximal(Schedule::Constant(0.1)),
    ];
    for fam in families {
        assert_majorizes(&sample(&p, 0, &st, fam, 2.0, 20), fam.name());
    }
    let s = p.custom_surrogate(1, &st, 1).unwrap().unwrap();
    let marginal = BlockMarginal::new(&p, 1, st.clone());
    let rep = check_majorization(&*s, &marginal, SAMPLES, 4.0, 0.0, 2.0, 21).unwrap();
    assert_majorizes(&rep, "theta");
}

#[test]
fn likelihood_families() {
    let d = ol_generate(5, 60, 30, 0.5, 5).unwrap();
    let p = OptimisticLikelihoodProblem::new(d.test, d.mu_hat, d.sigma_hat, Some(0.5), 1.0).unwrap();
    let st = p.init().data();
    for lam in [0.01, 0.1, 1.0] {
        let fam = SurrogateFamily::EuclideanProximal(Schedule::Constant(lam));
        assert_majorizes(&sample(&p, 0, &st, fam, 0.5, 30), "mu");
        let fam = SurrogateFamily::RiemannianProximal(Schedule::Constant(lam));
        assert_majorizes(&sample(&p, 1, &st, fam, 1.0, 31), "sigma");
    }
}

#[test]
fn cp_families() {
    let (x, _) = cp_generate(&[6, 5, 4], 2, true, 6).unwrap();
    let p = CpProblem::new(x, 2, vec![FactorKind::Stiefel, FactorKind::Euclidean, FactorKind::FixedRank(1)]).unwrap();
    let mut r = rng::seeded(7);
    let st = p.random_init(&mut r).data();
    let fam = SurrogateFamily::EuclideanProximal(Schedule::Constant(0.2));
    for i in 0..3 {
        assert_majorizes(&sample(&p, i, &st, fam, 1.0, 40 + i as u64), "cp");
    }
}

#[test]
fn rpca_families() {
    let d = rpca_generate(8, 8, 2, 0.1, 8).unwrap();
    let p = RpcaProblem::with_defaults(d.m, 2).unwrap();
    let st = p.init().unwrap().data();
    for fam in [SurrogateFamily::EuclideanProximal(Schedule::Constant(0.1)), SurrogateFamily::Identity] {
        for i in 0..2 {
            assert_majorizes(&sample(&p, i, &st, fam, 1.0, 50 + i as u64), "rpca");
        }
    }
}

// The proximal gap h = g − f is exactly (λ/2)·d², so the quadratic-gap
// ratio sits at λ/2.
#[test]
fn proximal_gap_ratio() {
    let d = ol_generate(4, 40, 20, 0.3, 9).unwrap();
    let p = OptimisticLikelihoodProblem::new(d.test, d.mu_hat, d.sigma_hat, None, 5.0).unwrap();
    let st = p.init().data();
    let rep = sample(&p, 1, &st, SurrogateFamily::RiemannianProximal(Schedule::Constant(0.8)), 1.0, 60);
    assert!((rep.min_ratio - 0.4).abs() < 1e-8, "{rep:?}");
}
