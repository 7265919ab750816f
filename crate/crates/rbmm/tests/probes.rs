use rbmm::diagnostics::{
    circle_configuration, distance_equivalence_pairs, distance_equivalence_probe, fd_gradient_check,
    gsmooth_probe, gsmooth_probe_pairs, rate_fit, running_min, truncate_at_floor,
};
use rbmm::linalg;
use rbmm::rng;
use rbmm::{Manifold, Mat, Point};

fn half_dist_sq_grad(m: Manifold, p: Mat) -> impl Fn(&Mat) -> Mat {
    move |x: &Mat| m.grad_dist_sq_raw(x, &p).unwrap() * 0.5
}

#[test]
fn circle_ratio_is_two() {
    let m = Manifold::Sphere { dim: 2 };
    let (p, x, y) = circle_configuration();
    let rep = gsmooth_probe_pairs(&m, &half_dist_sq_grad(m, p), &[(x, y)], 2.0, 0).unwrap();
    assert!((rep.max - 2.0).abs() <= 1e-3, "{rep:?}");
}

#[test]
fn euclidean_ratio_is_one() {
    let m = Manifold::Euclidean { rows: 3, cols: 1 };
    let p = Mat::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
    let rep = gsmooth_probe(&m, &half_dist_sq_grad(m, p), 200, 3.0, 1.0, 4).unwrap();
    assert!((rep.max - 1.0).abs() < 1e-12 && (rep.min - 1.0).abs() < 1e-12);
    assert!(rep.pass);
}

#[test]
fn constant_function_has_ratio_zero() {
    let m = Manifold::Sphere { dim: 3 };
    let rep = gsmooth_probe(&m, &|x: &Mat| Mat::zeros(x.nrows(), 1), 20, 1.0, 0.0, 1).unwrap();
    assert_eq!(rep.max, 0.0);
}

// Pairs straddling the cut point of p make the squared distance fail the
// unit Lipschitz bound.
#[test]
fn sphere_squared_distance_is_not_unit_smooth() {
    let m = Manifold::Sphere { dim: 3 };
    let p = Mat::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    let rep = gsmooth_probe(&m, &half_dist_sq_grad(m, p), 500, 0.5, 1.0, 9).unwrap();
    assert!(rep.max > 1.0);
    assert!(!rep.pass);
}

#[test]
fn gsmooth_rejects_inexact_transport() {
    let m = Manifold::Stiefel { n: 4, k: 2 };
    assert!(gsmooth_probe(&m, &|x: &Mat| x.clone(), 5, 1.0, 1.0, 0).is_err());
}

#[test]
fn spd_logdet_gradient() {
    let m = Manifold::Spd { n: 4 };
    let mut r = rng::seeded(3);
    let x = Point::new(m, m.random_point(&mut r)).unwrap();
    let value = |s: &Mat| linalg::spd_logdet(s).unwrap();
    let rgrad = |s: &Mat| m.egrad_to_rgrad_raw(s, &linalg::spd_inv(s).unwrap()).unwrap();
    let rep = fd_gradient_check(&value, &rgrad, &x, 1e-5, 2).unwrap();
    assert!(rep.max <= 1e-5 && rep.pass);
    let quad = |s: &Mat| s.norm_squared();
    let egrad = |s: &Mat| Mat::from(s * 2.0);
    let e = Manifold::Euclidean { rows: 2, cols: 2 };
    let y = Point::new(e, Mat::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5])).unwrap();
    assert!(fd_gradient_check(&quad, &egrad, &y, 1e-5, 2).unwrap().max <= 1e-9);
    let double = |s: &Mat| egrad(s) * 2.0;
    assert!(!fd_gradient_check(&quad, &double, &y, 1e-5, 2).unwrap().pass);
    assert!(fd_gradient_check(&quad, &egrad, &y, 1.0, 2).is_err());
}

#[test]
fn chord_and_arc() {
    let m = Manifold::Sphere { dim: 3 };
    let rep = distance_equivalence_probe(&m, 300, 5).unwrap();
    assert!(rep.pass && rep.max <= 1.0);
    let x = Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let near_anti = |t: f64| Mat::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
    let t = std::f64::consts::PI - 1e-6;
    let rep = distance_equivalence_pairs(&m, &[(x.clone(), near_anti(t))], 0).unwrap();
    assert!((rep.min - 2.0 / std::f64::consts::PI).abs() < 1e-5);
    let rep = distance_equivalence_pairs(&m, &[(x.clone(), near_anti(1e-4)), (x.clone(), x.clone())], 0).unwrap();
    assert_eq!(rep.samples, 1);
    assert!((rep.max - 1.0).abs() < 1e-8);
}

#[test]
fn rate_fit_examples() {
    let half: Vec<f64> = (1..=1000).map(|n| (n as f64).powf(-0.5)).collect();
    assert!((rate_fit(&half).unwrap().slope + 0.5).abs() < 1e-6);
    let quarter: Vec<f64> = (1..=1000).map(|n| (n as f64).powf(-0.25)).collect();
    assert!((rate_fit(&quarter).unwrap().slope + 0.25).abs() < 1e-6);
    assert!(rate_fit(&[2.0; 50]).unwrap().slope.abs() < 1e-12);
    assert!(rate_fit(&[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    assert!(rate_fit(&[1.0; 5]).is_err());
}

#[test]
fn running_min_and_floor() {
    let rm = running_min(&[3.0, 4.0, 1.0, 2.0, 1e-20]);
    assert_eq!(rm, vec![3.0, 3.0, 1.0, 1.0, 1e-20]);
    assert_eq!(truncate_at_floor(&rm, 1e-12), &[3.0, 3.0, 1.0, 1.0]);
}
