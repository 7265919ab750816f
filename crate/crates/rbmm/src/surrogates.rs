//! Majorizing surrogates and their minimization over a block constraint.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::geometry::Manifold;
use crate::linalg::{self, frob_dot};
use crate::rng::{self, Rng};
use crate::Mat;

/// Parameter sequence indexed by the cycle number n ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum Schedule {
    Constant(f64),
    /// `initial · ratioⁿ`
    Geometric { initial: f64, ratio: f64 },
    /// `initial · n^(−exponent)`
    Power { initial: f64, exponent: f64 },
}

impl Schedule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::Geometric { initial, ratio } => initial * ratio.powi(n as i32),
            Schedule::Power { initial, exponent } => initial * (n.max(1) as f64).powf(-exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SurrogateFamily {
    /// `f + (λ/2) d²(θ, anchor)`
    RiemannianProximal(Schedule),
    /// `f + (λ/2) ‖θ − anchor‖²`
    EuclideanProximal(Schedule),
    /// `f(a) + ⟨∇f(a), θ − a⟩ + (λ/2)‖θ − a‖²`. With `add_smoothness` the
    /// problem's block smoothness bound is added to the scheduled value.
    ProxLinear {
        lambda: Schedule,
        add_smoothness: bool,
    },
    /// `f(a) − 2⟨R(a), θ − a⟩ + λ‖θ − a‖²` on a Stiefel block. `R` comes
    /// from the problem and defaults to `−∇f/2`.
    RegularizedLinearStiefel(Schedule),
    /// `g = f` (plain block minimization).
    Identity,
    /// Problem-defined majorizer.
    Custom,
}

impl SurrogateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateFamily::RiemannianProximal(_) => "riemannian-proximal",
            SurrogateFamily::EuclideanProximal(_) => "euclidean-proximal",
            SurrogateFamily::ProxLinear { .. } => "prox-linear",
            SurrogateFamily::RegularizedLinearStiefel(_) => "regularized-linear-stiefel",
            SurrogateFamily::Identity => "identity",
            SurrogateFamily::Custom => "custom",
        }
    }

    /// Resolve the schedule at cycle `n`.
    pub fn resolve(&self, n: usize, smoothness: Option<f64>) -> Result<SurrogateKind> {
        let check = |l: f64| {
            if l.is_finite() && l >= 0.0 {
                Ok(l)
            } else {
                Err(contract("proximal weight must be finite and nonnegative"))
            }
        };
        Ok(match self {
            SurrogateFamily::RiemannianProximal(s) => SurrogateKind::RiemannianProximal(check(s.at(n))?),
            SurrogateFamily::EuclideanProximal(s) => SurrogateKind::EuclideanProximal(check(s.at(n))?),
            SurrogateFamily::ProxLinear {
                lambda,
                add_smoothness,
            } => {
                let mut l = lambda.at(n);
                if *add_smoothness {
                    l += smoothness
                        .ok_or_else(|| contract("prox-linear needs a smoothness bound from the problem"))?;
                }
                SurrogateKind::ProxLinear(check(l)?)
            }
            SurrogateFamily::RegularizedLinearStiefel(s) => {
                SurrogateKind::RegularizedLinearStiefel(check(s.at(n))?)
            }
            SurrogateFamily::Identity => SurrogateKind::Identity,
            SurrogateFamily::Custom => SurrogateKind::Custom,
        })
    }
}

/// A family with its weight fixed for one cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurrogateKind {
    RiemannianProximal(f64),
    EuclideanProximal(f64),
    ProxLinear(f64),
    RegularizedLinearStiefel(f64),
    Identity,
    Custom,
}

impl SurrogateKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateKind::RiemannianProximal(_) => "riemannian-proximal",
            SurrogateKind::EuclideanProximal(_) => "euclidean-proximal",
            SurrogateKind::ProxLinear(_) => "prox-linear",
            SurrogateKind::RegularizedLinearStiefel(_) => "regularized-linear-stiefel",
            SurrogateKind::Identity => "identity",
            SurrogateKind::Custom => "custom",
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            SurrogateKind::RiemannianProximal(l)
            | SurrogateKind::EuclideanProximal(l)
            | SurrogateKind::ProxLinear(l)
            | SurrogateKind::RegularizedLinearStiefel(l) => l,
            SurrogateKind::Identity | SurrogateKind::Custom => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurrogateSpec {
    pub family: SurrogateFamily,
    pub inner_budget: usize,
    pub inner_tol: Schedule,
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
}

impl SurrogateSpec {
    pub fn new(family: SurrogateFamily) -> Self {
        SurrogateSpec {
            family,
            inner_budget: 500,
            inner_tol: Schedule::Constant(1e-10),
            armijo_sigma: 1e-4,
            armijo_beta: 0.5,
        }
    }

    pub fn with_inner(mut self, budget: usize, tol: Schedule) -> Self {
        self.inner_budget = budget;
        self.inner_tol = tol;
        self
    }

    pub fn inner_options(&self, n: usize) -> InnerOptions {
        InnerOptions {
            budget: self.inner_budget,
            tol: self.inner_tol.at(n),
            sigma: self.armijo_sigma,
            beta: self.armijo_beta,
        }
    }
}

/// Feasible set of one block.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    WholeManifold,
    /// `‖θ − center‖_F ≤ radius` on a Euclidean block.
    EuclideanBall { center: Mat, radius: f64 },
    /// `d(θ, center) ≤ radius` on a kind with a log map.
    GeodesicBall { center: Mat, radius: f64 },
}

impl Constraint {
    pub fn validate(&self, m: &Manifold) -> Result<()> {
        match self {
            Constraint::WholeManifold => Ok(()),
            Constraint::EuclideanBall { center, radius } => {
                if !matches!(m, Manifold::Euclidean { .. }) {
                    return Err(contract("Euclidean balls are only supported on Euclidean blocks"));
                }
                m.check_shape(center)?;
                if !(*radius > 0.0) {
                    return Err(contract("ball radius must be positive"));
                }
                Ok(())
            }
            Constraint::GeodesicBall { center, radius } => {
                if !m.has_exp_log() {
                    return Err(Error::UnsupportedKind {
                        op: "geodesic ball",
                        kind: m.name(),
                    });
                }
                m.validate(center)?;
                if !(*radius > 0.0) || *radius >= m.injectivity_floor() {
                    return Err(contract("geodesic ball radius must lie in (0, r0)"));
                }
                Ok(())
            }
        }
    }

    /// Distance from the center and the radius, or `None` without a ball.
    pub fn radial(&self, m: &Manifold, x: &Mat) -> Result<Option<(f64, f64)>> {
        match self {
            Constraint::WholeManifold => Ok(None),
            Constraint::EuclideanBall { center, radius } => Ok(Some(((x - center).norm(), *radius))),
            Constraint::GeodesicBall { center, radius } => Ok(Some((m.dist_raw(center, x)?, *radius))),
        }
    }

    pub fn contains(&self, m: &Manifold, x: &Mat) -> Result<bool> {
        Ok(match self.radial(m, x)? {
            None => true,
            Some((d, r)) => d <= r * (1.0 + 1e-9),
        })
    }

    /// Strictly inside, with the boundary layer `1e-9 · radius`.
    pub fn is_interior(&self, m: &Manifold, x: &Mat) -> Result<bool> {
        Ok(match self.radial(m, x)? {
            None => true,
            Some((d, r)) => r - d > 1e-9 * r,
        })
    }

    /// Radial pullback into the ball (normal coordinates at the center for
    /// geodesic balls). Points already inside are returned unchanged.
    pub fn pull_back(&self, m: &Manifold, x: &Mat) -> Result<Mat> {
        match self {
            Constraint::WholeManifold => Ok(x.clone()),
            Constraint::EuclideanBall { center, radius } => {
                let v = x - center;
                let d = v.norm();
                if d <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + v * (*radius / d))
                }
            }
            Constraint::GeodesicBall { center, radius } => {
                let v = m.log_raw(center, x)?;
                let d = m.norm_raw(center, &v)?;
                if d <= *radius {
                    Ok(x.clone())
                } else {
                    m.exp_raw(center, &(v * (*radius / d)))
                }
            }
        }
    }

    /// Unit outward normal at a boundary point, `None` in the interior.
    pub fn outward_normal(&self, m: &Manifold, x: &Mat) -> Result<Option<Mat>> {
        if self.is_interior(m, x)? {
            return Ok(None);
        }
        match self {
            Constraint::WholeManifold => Ok(None),
            Constraint::EuclideanBall { center, .. } => {
                let v = x - center;
                let n = v.norm();
                Ok(Some(v / n))
            }
            Constraint::GeodesicBall { center, .. } => {
                let w = m.log_raw(x, center)? * -1.0;
                let n = m.norm_raw(x, &w)?;
                Ok(Some(w / n))
            }
        }
    }

    /// Project a Riemannian gradient so that its negative lies in the inward
    /// tangent cone: on the boundary the outward part of `−grad` is removed.
    pub fn cone_project(&self, m: &Manifold, x: &Mat, grad: &Mat) -> Result<Mat> {
        match self.outward_normal(m, x)? {
            None => Ok(grad.clone()),
            Some(n) => {
                let a = -m.inner_raw(x, grad, &n)?;
                if a > 0.0 {
                    Ok(grad + n * a)
                } else {
                    Ok(grad.clone())
                }
            }
        }
    }

    fn diameter(&self) -> Option<f64> {
        match self {
            Constraint::WholeManifold => None,
            Constraint::EuclideanBall { radius, .. } | Constraint::GeodesicBall { radius, .. } => {
                Some(2.0 * radius)
            }
        }
    }
}

/// Marginal objective of one block with the others frozen.
pub trait Marginal {
    fn value(&self, x: &Mat) -> f64;
    fn egrad(&self, x: &Mat) -> Mat;
}

/// Marginal built from two closures.
pub struct FnMarginal<V, G> {
    pub value: V,
    pub egrad: G,
}

impl<V, G> Marginal for FnMarginal<V, G>
where
    V: Fn(&Mat) -> f64,
    G: Fn(&Mat) -> Mat,
{
    fn value(&self, x: &Mat) -> f64 {
        (self.value)(x)
    }
    fn egrad(&self, x: &Mat) -> Mat {
        (self.egrad)(x)
    }
}

pub trait Surrogate {
    fn kind(&self) -> SurrogateKind;
    fn manifold(&self) -> Manifold;
    fn anchor(&self) -> &Mat;
    fn value(&self, x: &Mat) -> f64;
    fn rgrad(&self, x: &Mat) -> Result<Mat>;
    /// Exact minimizer over `constraint` when one is available in closed form.
    fn closed_form(&self, _constraint: &Constraint) -> Option<Result<Mat>> {
        None
    }
    /// Geodesic strong-convexity modulus of the surrogate, when known.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }
}

impl<S: Surrogate + ?Sized> Surrogate for Box<S> {
    fn kind(&self) -> SurrogateKind {
        (**self).kind()
    }
    fn manifold(&self) -> Manifold {
        (**self).manifold()
    }
    fn anchor(&self) -> &Mat {
        (**self).anchor()
    }
    fn value(&self, x: &Mat) -> f64 {
        (**self).value(x)
    }
    fn rgrad(&self, x: &Mat) -> Result<Mat> {
        (**self).rgrad(x)
    }
    fn closed_form(&self, c: &Constraint) -> Option<Result<Mat>> {
        (**self).closed_form(c)
    }
    fn strong_convexity(&self) -> Option<f64> {
        (**self).strong_convexity()
    }
}

/// Problem facts that some families need.
#[derive(Clone, Debug, Default)]
pub struct BlockFacts {
    /// Block smoothness constant L_f.
    pub smoothness: Option<f64>,
    /// Lower bound κ on the geodesic convexity modulus of the marginal
    /// (κ = 0 for g-convex marginals, κ = −L_f in the worst case).
    pub curvature: Option<f64>,
    /// `R(anchor)` for the regularized linear Stiefel family.
    pub r_map: Option<Mat>,
}

/// A surrogate from one of the built-in families.
pub struct SurrogateInstance<'a> {
    kind: SurrogateKind,
    manifold: Manifold,
    anchor: Mat,
    marginal: &'a dyn Marginal,
    f_anchor: f64,
    linear: Option<Mat>,
    convexity: Option<f64>,
}

pub fn build_surrogate<'a>(
    kind: SurrogateKind,
    manifold: Manifold,
    marginal: &'a dyn Marginal,
    anchor: &Mat,
    facts: &BlockFacts,
) -> Result<SurrogateInstance<'a>> {
    manifold.check_shape(anchor)?;
    let unsupported = Err(Error::UnsupportedFamily {
        family: kind.name(),
        kind: manifold.name(),
    });
    let euclid = matches!(manifold, Manifold::Euclidean { .. });
    let kappa = facts.curvature.or(facts.smoothness.map(|l| -l));
    let positive = |a: f64| if a > 0.0 { Some(a) } else { None };
    let (linear, convexity) = match kind {
        SurrogateKind::RiemannianProximal(l) => {
            if !manifold.has_exp_log() {
                return unsupported;
            }
            let conv = if manifold.is_hadamard() {
                kappa.and_then(|k| positive(l + k))
            } else {
                None
            };
            (None, conv)
        }
        SurrogateKind::EuclideanProximal(l) => {
            let conv = if euclid { kappa.and_then(|k| positive(l + k)) } else { None };
            (None, conv)
        }
        SurrogateKind::ProxLinear(l) => {
            let conv = if euclid { positive(l) } else { None };
            (Some(marginal.egrad(anchor)), conv)
        }
        SurrogateKind::RegularizedLinearStiefel(_) => {
            if !matches!(manifold, Manifold::Stiefel { .. }) {
                return unsupported;
            }
            let r = match &facts.r_map {
                Some(r) => r.clone(),
                None => marginal.egrad(anchor) * -0.5,
            };
            manifold.check_shape(&r)?;
            (Some(r), None)
        }
        SurrogateKind::Identity => {
            let conv = if manifold.is_hadamard() { kappa.and_then(positive) } else { None };
            (None, conv)
        }
        SurrogateKind::Custom => return unsupported,
    };
    if let Some(g) = &linear {
        if !linalg::all_finite(g) {
            return Err(crate::error::degenerate("non-finite gradient at the anchor"));
        }
    }
    Ok(SurrogateInstance {
        kind,
        manifold,
        anchor: anchor.clone(),
        marginal,
        f_anchor: marginal.value(anchor),
        linear,
        convexity,
    })
}

impl Surrogate for SurrogateInstance<'_> {
    fn kind(&self) -> SurrogateKind {
        self.kind
    }

    fn manifold(&self) -> Manifold {
        self.manifold
    }

    fn anchor(&self) -> &Mat {
        &self.anchor
    }

    fn value(&self, x: &Mat) -> f64 {
        let a = &self.anchor;
        match self.kind {
            SurrogateKind::RiemannianProximal(l) => match self.manifold.dist_raw(x, a) {
                Ok(d) => self.marginal.value(x) + 0.5 * l * d * d,
                Err(_) => f64::INFINITY,
            },
            SurrogateKind::EuclideanProximal(l) => {
                self.marginal.value(x) + 0.5 * l * (x - a).norm_squared()
            }
            SurrogateKind::ProxLinear(l) => {
                let g = self.linear.as_ref().expect("linear term");
                let dx = x - a;
                self.f_anchor + frob_dot(g, &dx) + 0.5 * l * dx.norm_squared()
            }
            SurrogateKind::RegularizedLinearStiefel(l) => {
                let r = self.linear.as_ref().expect("linear term");
                let dx = x - a;
                self.f_anchor - 2.0 * frob_dot(r, &dx) + l * dx.norm_squared()
            }
            SurrogateKind::Identity | SurrogateKind::Custom => self.marginal.value(x),
        }
    }

    fn rgrad(&self, x: &Mat) -> Result<Mat> {
        let m = &self.manifold;
        let a = &self.anchor;
        match self.kind {
            SurrogateKind::RiemannianProximal(l) => {
                let gf = m.egrad_to_rgrad_raw(x, &self.marginal.egrad(x))?;
                Ok(gf - m.log_raw(x, a)? * l)
            }
            SurrogateKind::EuclideanProximal(l) => {
                m.egrad_to_rgrad_raw(x, &(self.marginal.egrad(x) + (x - a) * l))
            }
            SurrogateKind::ProxLinear(l) => {
                let g = self.linear.as_ref().expect("linear term");
                m.egrad_to_rgrad_raw(x, &(g + (x - a) * l))
            }
            SurrogateKind::RegularizedLinearStiefel(l) => {
                let r = self.linear.as_ref().expect("linear term");
                m.egrad_to_rgrad_raw(x, &(r * -2.0 + (x - a) * (2.0 * l)))
            }
            SurrogateKind::Identity | SurrogateKind::Custom => {
                m.egrad_to_rgrad_raw(x, &self.marginal.egrad(x))
            }
        }
    }

    fn closed_form(&self, constraint: &Constraint) -> Option<Result<Mat>> {
        let m = self.manifold;
        match self.kind {
            SurrogateKind::ProxLinear(l) => {
                let g = self.linear.as_ref()?;
                let target = if l > 0.0 {
                    &self.anchor - g / l
                } else if matches!(m, Manifold::Stiefel { .. } | Manifold::Sphere { .. }) {
                    -g
                } else {
                    return None;
                };
                match (m, constraint) {
                    (Manifold::Euclidean { .. }, Constraint::WholeManifold) => Some(Ok(target)),
                    (Manifold::Euclidean { .. }, Constraint::EuclideanBall { center, radius })
                    | (Manifold::Euclidean { .. }, Constraint::GeodesicBall { center, radius }) => {
                        let v = &target - center;
                        let d = v.norm();
                        Some(Ok(if d <= *radius {
                            target
                        } else {
                            center + v * (*radius / d)
                        }))
                    }
                    (
                        Manifold::Sphere { .. } | Manifold::Stiefel { .. } | Manifold::FixedRank { .. },
                        Constraint::WholeManifold,
                    ) => Some(m.proj_manifold_raw(&target)),
                    (Manifold::Spd { .. }, Constraint::WholeManifold) => {
                        let s = linalg::sym(&target);
                        match linalg::min_eigenvalue(&s) {
                            Ok(v) if v > linalg::EIG_FLOOR => Some(Ok(s)),
                            _ => None,
                        }
                    }
                    _ => None,
                }
            }
            SurrogateKind::RegularizedLinearStiefel(l) => match constraint {
                Constraint::WholeManifold => {
                    let r = self.linear.as_ref()?;
                    Some(linalg::polar(&(r + &self.anchor * l)))
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn strong_convexity(&self) -> Option<f64> {
        self.convexity
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerOptions {
    pub budget: usize,
    pub tol: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            budget: 500,
            tol: 1e-10,
            sigma: 1e-4,
            beta: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSolution {
    pub point: Mat,
    /// Upper bound on `g(point) − inf g` (certified or estimated).
    pub delta_bound: f64,
    /// The bound comes from strong convexity or an exact solve.
    pub certified: bool,
    /// Budget exhausted, line search stalled, or bound uncertified.
    pub flagged: bool,
    pub exact: bool,
    pub iterations: usize,
}

impl BlockSolution {
    pub fn exact(point: Mat) -> Self {
        BlockSolution {
            point,
            delta_bound: 0.0,
            certified: true,
            flagged: false,
            exact: true,
            iterations: 0,
        }
    }
}

/// Closed form when the surrogate has one, Armijo descent otherwise.
pub fn minimize_block(
    s: &dyn Surrogate,
    constraint: &Constraint,
    opts: &InnerOptions,
) -> Result<BlockSolution> {
    if let Some(p) = s.closed_form(constraint) {
        return Ok(BlockSolution::exact(p?));
    }
    minimize_iterative(s, constraint, opts)
}

/// Largest `β^j` (j ≤ 60) with `g(R_x(β^j d)) ≤ g(x) + σ β^j ⟨grad, d⟩`.
pub fn armijo_step(
    value: &dyn Fn(&Mat) -> f64,
    m: &Manifold,
    x: &Mat,
    grad: &Mat,
    d: &Mat,
    sigma: f64,
    beta: f64,
) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(contract("Armijo parameters must lie in (0, 1)"));
    }
    let fx = value(x);
    let slope = m.inner_raw(x, grad, d)?;
    if slope > 0.0 {
        return Err(Error::LineSearchFailure);
    }
    let mut t = 1.0;
    for _ in 0..=60 {
        if let Ok(y) = m.retract_raw(x, &(d * t)) {
            let fy = value(&y);
            if fy.is_finite() && fy <= fx + sigma * t * slope {
                return Ok(t);
            }
        }
        t *= beta;
    }
    Err(Error::LineSearchFailure)
}

fn cone_grad_norm(s: &dyn Surrogate, constraint: &Constraint, x: &Mat) -> Result<f64> {
    let m = s.manifold();
    let g = s.rgrad(x)?;
    let pg = constraint.cone_project(&m, x, &g)?;
    m.norm_raw(x, &pg)
}

/// Backtracking with pullback into the constraint. When the predicted
/// decrease is below the rounding level of `g`, a trial that keeps `g` within
/// rounding and shrinks the projected gradient is accepted instead.
fn constrained_search(
    s: &dyn Surrogate,
    constraint: &Constraint,
    x: &Mat,
    fx: f64,
    grad: &Mat,
    pg_norm: f64,
    d: &Mat,
    t0: f64,
    opts: &InnerOptions,
) -> Result<(Mat, f64, f64)> {
    let m = s.manifold();
    let noise = 8.0 * f64::EPSILON * fx.abs().max(f64::MIN_POSITIVE);
    let mut t = t0;
    for _ in 0..=60 {
        let trial = m
            .retract_raw(x, &(d * t))
            .and_then(|y| constraint.pull_back(&m, &y));
        if let Ok(y) = trial {
            let disp = if m.has_exp_log() {
                m.log_raw(x, &y)
            } else {
                m.proj_tangent_raw(x, &(&y - x))
            };
            if let Ok(disp) = disp {
                let slope = m.inner_raw(x, grad, &disp)?.min(0.0);
                let fy = s.value(&y);
                if fy.is_finite() {
                    let accept = if -opts.sigma * slope > noise {
                        fy <= fx + opts.sigma * slope
                    } else {
                        fy <= fx + noise && cone_grad_norm(s, constraint, &y)? < pg_norm
                    };
                    if accept {
                        return Ok((y, fy, t));
                    }
                }
            }
        }
        t *= opts.beta;
    }
    Err(Error::LineSearchFailure)
}

fn diameter_estimate(m: &Manifold, constraint: &Constraint, moved: f64) -> f64 {
    if let Some(d) = constraint.diameter() {
        return d;
    }
    match *m {
        Manifold::Sphere { .. } => core::f64::consts::PI,
        Manifold::Stiefel { k, .. } => 2.0 * (k as f64).sqrt(),
        _ => moved.max(1.0),
    }
}

/// Riemannian gradient descent with Armijo backtracking, pulled back into
/// the constraint after every trial step.
pub fn minimize_iterative(
    s: &dyn Surrogate,
    constraint: &Constraint,
    opts: &InnerOptions,
) -> Result<BlockSolution> {
    let m = s.manifold();
    let mut x = constraint.pull_back(&m, s.anchor())?;
    let mut fx = s.value(&x);
    let mut iterations = 0;
    let mut converged = false;
    let mut t_prev = 1.0;
    let mut pg_norm;
    loop {
        let g = s.rgrad(&x)?;
        let pg = constraint.cone_project(&m, &x, &g)?;
        pg_norm = m.norm_raw(&x, &pg)?;
        if !pg_norm.is_finite() {
            return Err(crate::error::degenerate("non-finite surrogate gradient"));
        }
        if pg_norm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.budget {
            break;
        }
        let d = -&pg;
        let t0 = (t_prev / opts.beta).min(1.0);
        match constrained_search(s, constraint, &x, fx, &g, pg_norm, &d, t0, opts) {
            Ok((y, fy, t)) => {
                iterations += 1;
                if y == x {
                    break;
                }
                x = y;
                fx = fy;
                t_prev = t;
            }
            Err(Error::LineSearchFailure) => break,
            Err(e) => return Err(e),
        }
    }
    let (delta_bound, certified) = match s.strong_convexity() {
        Some(a) if a > 0.0 => (pg_norm * pg_norm / (2.0 * a), true),
        _ => {
            let moved = m.dist_raw(s.anchor(), &x).unwrap_or(1.0);
            (pg_norm * diameter_estimate(&m, constraint, moved), false)
        }
    };
    Ok(BlockSolution {
        point: x,
        delta_bound,
        certified,
        flagged: !converged || !certified,
        exact: false,
        iterations,
    })
}

/// Result of sampling `h = g − f` around the anchor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajorizationReport {
    /// `max(f − g)` over the samples (≤ 0 when g majorizes f).
    pub max_violation: f64,
    /// `|g(anchor) − f(anchor)|`.
    pub sharpness: f64,
    /// `min h(θ)/d(θ, anchor)^p` over samples with θ ≠ anchor.
    pub min_ratio: f64,
    pub c: f64,
    /// `min_ratio ≥ c`, the quadratic-gap condition.
    pub gap_condition: bool,
    pub samples: usize,
}

/// Majorization check at explicit sample points.
pub fn check_majorization_at(
    s: &dyn Surrogate,
    marginal: &dyn Marginal,
    points: &[Mat],
    c: f64,
    phi_power: f64,
) -> Result<MajorizationReport> {
    let m = s.manifold();
    let a = s.anchor();
    let sharpness = (s.value(a) - marginal.value(a)).abs();
    let mut max_violation = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    for p in points {
        let h = s.value(p) - marginal.value(p);
        max_violation = max_violation.max(-h);
        let d = m.dist_raw(a, p)?;
        if d > 0.0 {
            min_ratio = min_ratio.min(h / d.powf(phi_power));
        }
    }
    Ok(MajorizationReport {
        max_violation,
        sharpness,
        min_ratio,
        c,
        gap_condition: min_ratio >= c,
        samples: points.len(),
    })
}

/// Majorization check at `samples` points `R_anchor(t·η)` with random unit
/// directions η and lengths t uniform in (0, scale].
pub fn check_majorization(
    s: &dyn Surrogate,
    marginal: &dyn Marginal,
    samples: usize,
    scale: f64,
    c: f64,
    phi_power: f64,
    seed: u64,
) -> Result<MajorizationReport> {
    if samples == 0 {
        return Err(contract("need at least one sample"));
    }
    let m = s.manifold();
    let mut r: Rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let eta = m.random_tangent(s.anchor(), &mut r)?;
        let t = rng::uniform(&mut r, 0.0, scale).max(1e-6 * scale);
        if let Ok(p) = m.retract_raw(s.anchor(), &(eta * t)) {
            points.push(p);
        }
    }
    check_majorization_at(s, marginal, &points, c, phi_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn square() -> FnMarginal<impl Fn(&Mat) -> f64, impl Fn(&Mat) -> Mat> {
        FnMarginal {
            value: |x: &Mat| x[(0, 0)] * x[(0, 0)],
            egrad: |x: &Mat| x * 2.0,
        }
    }

    const R1: Manifold = Manifold::Euclidean { rows: 1, cols: 1 };

    #[test]
    fn euclidean_proximal_values() {
        let f = square();
        let s = build_surrogate(SurrogateKind::EuclideanProximal(2.0), R1, &f, &scalar(1.0), &BlockFacts::default())
            .unwrap();
        assert_relative_eq!(s.value(&scalar(1.0)), 1.0);
        assert_relative_eq!(s.value(&scalar(0.0)), 1.0);
        let rep = check_majorization(&s, &f, 50, 3.0, 1.0 - 1e-9, 2.0, 1).unwrap();
        assert!(rep.max_violation <= 1e-12);
        assert!(rep.gap_condition);
        assert_relative_eq!(rep.min_ratio, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn prox_linear_at_lipschitz_boundary_equals_f() {
        let f = square();
        let s = build_surrogate(SurrogateKind::ProxLinear(2.0), R1, &f, &scalar(0.0), &BlockFacts::default()).unwrap();
        for t in [-2.0, 0.5, 3.0] {
            assert_relative_eq!(s.value(&scalar(t)), t * t, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_family_has_no_gap() {
        let f = square();
        let s = build_surrogate(SurrogateKind::Identity, R1, &f, &scalar(0.3), &BlockFacts::default()).unwrap();
        let rep = check_majorization(&s, &f, 20, 1.0, 1.0, 2.0, 2).unwrap();
        assert_eq!(rep.sharpness, 0.0);
        assert!(!rep.gap_condition);
    }

    #[test]
    fn riemannian_proximal_rejected_on_stiefel() {
        let f = FnMarginal {
            value: |_: &Mat| 0.0,
            egrad: |x: &Mat| x * 0.0,
        };
        let m = Manifold::Stiefel { n: 3, k: 1 };
        let a = Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(matches!(
            build_surrogate(SurrogateKind::RiemannianProximal(1.0), m, &f, &a, &BlockFacts::default()),
            Err(Error::UnsupportedFamily { .. })
        ));
    }

    #[test]
    fn prox_linear_closed_forms() {
        let m = Manifold::Euclidean { rows: 2, cols: 1 };
        let f = FnMarginal {
            value: |x: &Mat| x[(0, 0)],
            egrad: |_: &Mat| Mat::from_column_slice(2, 1, &[1.0, 0.0]),
        };
        let a = Mat::zeros(2, 1);
        let s = build_surrogate(SurrogateKind::ProxLinear(1.0), m, &f, &a, &BlockFacts::default()).unwrap();
        let sol = minimize_block(&s, &Constraint::WholeManifold, &InnerOptions::default()).unwrap();
        assert_eq!(sol.point, Mat::from_column_slice(2, 1, &[-1.0, 0.0]));
        assert_eq!(sol.delta_bound, 0.0);
        let ball = Constraint::EuclideanBall {
            center: Mat::zeros(2, 1),
            radius: 0.5,
        };
        let sol = minimize_block(&s, &ball, &InnerOptions::default()).unwrap();
        assert_relative_eq!(sol.point, Mat::from_column_slice(2, 1, &[-0.5, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn regularized_linear_stiefel_closed_form() {
        let m = Manifold::Stiefel { n: 3, k: 2 };
        let target = Mat::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let f = FnMarginal {
            value: |_: &Mat| 0.0,
            egrad: |x: &Mat| x * 0.0,
        };
        let anchor = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        // R + λ·anchor = target with λ = 1
        let facts = BlockFacts {
            r_map: Some(&target - &anchor),
            ..BlockFacts::default()
        };
        let s = build_surrogate(SurrogateKind::RegularizedLinearStiefel(1.0), m, &f, &anchor, &facts).unwrap();
        let sol = minimize_block(&s, &Constraint::WholeManifold, &InnerOptions::default()).unwrap();
        assert_relative_eq!(sol.point, anchor, epsilon = 1e-14);
    }

    #[test]
    fn armijo_examples() {
        let v = |x: &Mat| x[(0, 0)] * x[(0, 0)];
        let x = scalar(1.0);
        let g = scalar(2.0);
        let t = armijo_step(&v, &R1, &x, &g, &scalar(-2.0), 0.1, 0.5).unwrap();
        assert_eq!(t, 0.5);
        assert_eq!(armijo_step(&v, &R1, &x, &g, &scalar(0.0), 0.1, 0.5).unwrap(), 1.0);
        let lin = |x: &Mat| -x[(0, 0)];
        assert_eq!(armijo_step(&lin, &R1, &x, &scalar(-1.0), &scalar(1.0), 0.5, 0.5).unwrap(), 1.0);
        // ascent direction never satisfies the test
        assert_eq!(
            armijo_step(&v, &R1, &x, &g, &scalar(2.0), 0.1, 0.5),
            Err(Error::LineSearchFailure)
        );
    }

    #[test]
    fn iterative_matches_closed_form_on_ball() {
        let m = Manifold::Euclidean { rows: 2, cols: 1 };
        let f = FnMarginal {
            value: |x: &Mat| 3.0 * x[(0, 0)] - x[(1, 0)],
            egrad: |_: &Mat| Mat::from_column_slice(2, 1, &[3.0, -1.0]),
        };
        let a = Mat::from_column_slice(2, 1, &[0.2, 0.1]);
        let ball = Constraint::EuclideanBall {
            center: Mat::zeros(2, 1),
            radius: 1.0,
        };
        let s = build_surrogate(SurrogateKind::ProxLinear(2.0), m, &f, &a, &BlockFacts::default()).unwrap();
        let exact = minimize_block(&s, &ball, &InnerOptions::default()).unwrap();
        let opts = InnerOptions {
            budget: 10_000,
            tol: 1e-12,
            ..InnerOptions::default()
        };
        let it = minimize_iterative(&s, &ball, &opts).unwrap();
        assert!((&it.point - &exact.point).norm() < 1e-9, "{} {} {:?}", it.point, exact.point, it.iterations);
        assert!(it.certified);
    }

    #[test]
    fn cone_projection_on_ball_boundary() {
        let m = Manifold::Euclidean { rows: 2, cols: 1 };
        let ball = Constraint::EuclideanBall {
            center: Mat::zeros(2, 1),
            radius: 1.0,
        };
        let x = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        // -grad points outward: blocked entirely
        let g = Mat::from_column_slice(2, 1, &[-3.0, 0.0]);
        assert_eq!(ball.cone_project(&m, &x, &g).unwrap().norm(), 0.0);
        // -grad points inward: untouched
        let g = Mat::from_column_slice(2, 1, &[3.0, 0.0]);
        assert_eq!(ball.cone_project(&m, &x, &g).unwrap().norm(), 3.0);
        let g = Mat::from_column_slice(2, 1, &[-3.0, 4.0]);
        assert_eq!(ball.cone_project(&m, &x, &g).unwrap(), Mat::from_column_slice(2, 1, &[0.0, 4.0]));
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Constant(0.3).at(7), 0.3);
        assert_relative_eq!(Schedule::Geometric { initial: 0.1, ratio: 0.5 }.at(3), 0.0125);
        assert_relative_eq!(Schedule::Power { initial: 1.0, exponent: 2.0 }.at(4), 1.0 / 16.0);
        let _ = vec![0];
    }
}
