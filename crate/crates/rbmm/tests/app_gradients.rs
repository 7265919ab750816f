use rbmm::apps::cp::{cp_generate, CpProblem, FactorKind};
use rbmm::apps::likelihood::{ol_generate, OptimisticLikelihoodProblem};
use rbmm::apps::quadratic::QuadraticProblem;
use rbmm::apps::rpca::{rpca_generate, RpcaProblem};
use rbmm::apps::subspace::{st_generate, st_theta_coefficients, SubspaceProblem};
use rbmm::diagnostics::{fd_gradient_check, FD_THRESHOLD};
use rbmm::driver::BlockProblem;
use rbmm::rng;
use rbmm::{Mat, Point};

fn check_blocks(p: &dyn BlockProblem, state: &[Mat], label: &str) {
    for i in 0..p.num_blocks() {
        let m = p.manifold(i);
        let value = |x: &Mat| {
            let mut s = state.to_vec();
            s[i] = x.clone();
            p.value(&s)
        };
        let rgrad = |x: &Mat| {
            let mut s = state.to_vec();
            s[i] = x.clone();
            m.egrad_to_rgrad_raw(x, &p.egrad_block(i, &s)).unwrap()
        };
        let x = Point::new(m, state[i].clone()).unwrap();
        let rep = fd_gradient_check(&value, &rgrad, &x, 1e-5, 7).unwrap();
        assert!(rep.pass, "{label} block {i}: {rep:?}");
        assert!(rep.max <= FD_THRESHOLD);
    }
}

#[test]
fn quadratic_gradients() {
    let p = QuadraticProblem::random(vec![2, 3, 1], 3);
    let mut r = rng::seeded(1);
    let state: Vec<Mat> = [2, 3, 1].iter().map(|&n| rng::gaussian(&mut r, n, 1)).collect();
    check_blocks(&p, &state, "quadratic");
}

#[test]
fn subspace_gradients() {
    let d = st_generate(8, 2, 4, 3, 0.1, 2).unwrap();
    let p = SubspaceProblem::from_data(&d, 0.5).unwrap();
    let mut r = rng::seeded(3);
    let init = p.random_init(&mut r);
    check_blocks(&p, &init.data(), "subspace");
}

#[test]
fn theta_coefficients_gradient() {
    let d = st_generate(8, 2, 4, 3, 0.1, 4).unwrap();
    let p = SubspaceProblem::from_data(&d, 0.0).unwrap();
    let mut r = rng::seeded(5);
    let st = p.random_init(&mut r).data();
    let c = p.coefficients(&st[0]).unwrap();
    let theta = st[1].clone();
    let h = 1e-6;
    let g = c.grad(&theta);
    for j in 0..theta.nrows() {
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[(j, 0)] += h;
        dn[(j, 0)] -= h;
        let fd = (c.value(&up) - c.value(&dn)) / (2.0 * h);
        assert!((fd - g[(j, 0)]).abs() <= 1e-6 * g.norm().max(1.0));
    }
    let again = st_theta_coefficients(&st[0].columns(0, 2).into_owned(), &st[0].columns(2, 2).into_owned(), &p.x, &p.times);
    assert!(again.is_ok());
}

#[test]
fn likelihood_gradients() {
    let d = ol_generate(4, 30, 20, 0.5, 6).unwrap();
    let p = OptimisticLikelihoodProblem::new(d.test, d.mu_hat, d.sigma_hat, None, 1.0).unwrap();
    check_blocks(&p, &p.init().data(), "likelihood");
}

#[test]
fn cp_gradients() {
    let (x, _) = cp_generate(&[5, 4, 3], 2, true, 8).unwrap();
    let kinds = vec![FactorKind::Stiefel, FactorKind::Euclidean, FactorKind::FixedRank(2)];
    let p = CpProblem::new(x, 2, kinds).unwrap();
    let mut r = rng::seeded(9);
    check_blocks(&p, &p.random_init(&mut r).data(), "cp");
}

#[test]
fn rpca_gradients() {
    let d = rpca_generate(8, 7, 2, 0.1, 10).unwrap();
    let p = RpcaProblem::with_defaults(d.m.clone(), 2).unwrap();
    let mut r = rng::seeded(11);
    let s = rng::gaussian(&mut r, 8, 7) * 0.3;
    let l = p.init().unwrap().data()[0].clone();
    check_blocks(&p, &[l, s], "rpca");
}

// A deliberately wrong gradient must be caught.
#[test]
fn wrong_gradient_fails_the_check() {
    let p = QuadraticProblem::demo();
    let st = vec![Mat::from_element(1, 1, 0.3), Mat::from_element(1, 1, -0.4)];
    let m = p.manifold(0);
    let value = |x: &Mat| p.value(&[x.clone(), st[1].clone()]);
    let wrong = |x: &Mat| p.egrad_block(0, &[x.clone(), st[1].clone()]) * 1.5;
    let rep = fd_gradient_check(&value, &wrong, &Point::new(m, st[0].clone()).unwrap(), 1e-5, 1).unwrap();
    assert!(!rep.pass);
}
