//! Trivial Lie group bundles, total spaces with a fibered action, and the
//! first jets of sections of both.
//!
//! Conventions. A tangent vector to the Lie group bundle at `(x, g)` is a
//! pair `(u, eta)` with `eta` right-trivialized: the curve is
//! `(x + t u, exp(t eta) g)`. A tangent vector to the total space at
//! `(v, h)` is `(U, xi)` with `xi` left-trivialized: the curve is
//! `(v + t U, h exp(t xi))`. The first `n` quotient coordinates are the
//! base coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::calculus::{random_vector, ChartDomain, ChartManifold, FD_STEP};
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupDescriptor, GroupElement, GroupKind};

/// Tangent vector to the Lie group bundle, fiber part right-trivialized.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTangent {
    pub base: DVector<f64>,
    pub right: AlgebraElement,
}

/// The trivial Lie group bundle `X x G`.
#[derive(Clone, Debug)]
pub struct LieGroupBundle {
    base: ChartDomain,
    group: Arc<GroupDescriptor>,
}

impl LieGroupBundle {
    pub fn new(base: ChartDomain, group: Arc<GroupDescriptor>) -> Result<Self> {
        base.validate()?;
        Ok(Self { base, group })
    }

    pub fn base(&self) -> &ChartDomain {
        &self.base
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    /// Point reached along the curve `(x + t u, exp(t eta) g)`.
    pub fn flow(
        &self,
        x: &DVector<f64>,
        g: &GroupElement,
        tangent: &GroupTangent,
        t: f64,
    ) -> Result<(DVector<f64>, GroupElement)> {
        let x1 = x + &tangent.base * t;
        self.base.require(&x1)?;
        Ok((x1, self.group.compose(&self.group.exp(&(&tangent.right * t))?, g)))
    }

    /// Associativity, unit and inverse residuals of the fiber group law on
    /// random samples.
    pub fn fiber_axioms_residual<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> Result<f64> {
        let g = &self.group;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (a, b, c) = (g.sample(rng, 0.8), g.sample(rng, 0.8), g.sample(rng, 0.8));
            let lhs = g.compose(&g.compose(&a, &b), &c);
            let rhs = g.compose(&a, &g.compose(&b, &c));
            worst = worst.max(lhs.distance(&rhs));
            worst = worst.max(g.compose(&a, &g.identity()).distance(&a));
            worst = worst.max(g.compose(&a, &g.inverse(&a)?).distance(&g.identity()));
        }
        Ok(worst)
    }
}

/// A point of the total space in a local trivialization.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalPoint {
    pub quotient: DVector<f64>,
    pub fiber: GroupElement,
}

/// Tangent vector to the total space, fiber part left-trivialized.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalTangent {
    pub quotient: DVector<f64>,
    pub fiber: AlgebraElement,
}

impl TotalTangent {
    pub fn zeros(q: usize, d: usize) -> Self {
        Self {
            quotient: DVector::zeros(q),
            fiber: AlgebraElement::zeros(d),
        }
    }

    pub fn vertical(q: usize, xi: AlgebraElement) -> Self {
        Self {
            quotient: DVector::zeros(q),
            fiber: xi,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            quotient: &self.quotient + &other.quotient,
            fiber: &self.fiber + &other.fiber,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            quotient: &self.quotient - &other.quotient,
            fiber: &self.fiber - &other.fiber,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            quotient: &self.quotient * s,
            fiber: &self.fiber * s,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.quotient.norm_squared() + self.fiber.0.norm_squared()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    /// Stacks the quotient and fiber parts into one frame vector.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.quotient.len() + self.fiber.dim(),
            self.quotient.iter().chain(self.fiber.0.iter()).copied(),
        )
    }

    pub fn from_vector(v: &DVector<f64>, q: usize) -> Self {
        Self {
            quotient: v.rows(0, q).into_owned(),
            fiber: AlgebraElement(v.rows(q, v.len() - q).into_owned()),
        }
    }
}

/// Total space `Y` of a fibered manifold `Y -> Y/G -> X` with fiber
/// modelled on `G` and quotient chart `R^q`, `q = n + p`.
#[derive(Clone, Debug)]
pub struct TotalSpace {
    base: ChartDomain,
    quotient: ChartDomain,
    group: Arc<GroupDescriptor>,
}

impl TotalSpace {
    /// `extra` adds quotient coordinates beyond those of the base.
    pub fn new(base: ChartDomain, extra: Option<ChartDomain>, group: Arc<GroupDescriptor>) -> Result<Self> {
        base.validate()?;
        let quotient = match &extra {
            Some(e) => {
                e.validate()?;
                base.product(e)
            }
            None => base.clone(),
        };
        Ok(Self {
            base,
            quotient,
            group,
        })
    }

    pub fn base(&self) -> &ChartDomain {
        &self.base
    }

    pub fn quotient(&self) -> &ChartDomain {
        &self.quotient
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn quotient_dim(&self) -> usize {
        self.quotient.dim()
    }

    pub fn algebra_dim(&self) -> usize {
        self.group.dim()
    }

    /// Dimension of the total space.
    pub fn dim(&self) -> usize {
        self.quotient_dim() + self.algebra_dim()
    }

    pub fn point(&self, quotient: DVector<f64>, fiber: GroupElement) -> Result<TotalPoint> {
        check_dim(self.quotient_dim(), quotient.len(), "quotient coordinates")?;
        self.quotient.require(&quotient)?;
        let fiber = self.group.element(fiber.0)?;
        Ok(TotalPoint { quotient, fiber })
    }

    /// For translation fibers, the point with fiber vector `w`.
    pub fn vector_point(&self, quotient: DVector<f64>, w: &DVector<f64>) -> Result<TotalPoint> {
        if self.group.kind() != GroupKind::Translation {
            return Err(Error::Usage("vector fibers need a translation group".into()));
        }
        let fiber = self.group.exp(&AlgebraElement(w.clone()))?;
        self.point(quotient, fiber)
    }

    /// Base point `pi_X(y)`.
    pub fn base_point(&self, y: &TotalPoint) -> DVector<f64> {
        y.quotient.rows(0, self.base_dim()).into_owned()
    }

    /// Image in the quotient `Y/G`.
    pub fn quotient_point(&self, y: &TotalPoint) -> DVector<f64> {
        y.quotient.clone()
    }

    /// Projection of a quotient point to the base.
    pub fn quotient_to_base(&self, v: &DVector<f64>) -> DVector<f64> {
        v.rows(0, self.base_dim()).into_owned()
    }

    /// Gap between the two ways of projecting `y` to the base.
    pub fn projection_residual(&self, y: &TotalPoint) -> f64 {
        (self.base_point(y) - self.quotient_to_base(&self.quotient_point(y))).norm()
    }

    /// Base component of a tangent vector.
    pub fn base_vector(&self, u: &TotalTangent) -> DVector<f64> {
        u.quotient.rows(0, self.base_dim()).into_owned()
    }

    /// Point reached along the chart curve `(v + t U, h exp(t xi))`.
    pub fn displace(&self, y: &TotalPoint, u: &TotalTangent, t: f64) -> Result<TotalPoint> {
        let v = &y.quotient + &u.quotient * t;
        self.quotient.require(&v)?;
        let fiber = self.group.compose(&y.fiber, &self.group.exp(&(&u.fiber * t))?);
        Ok(TotalPoint { quotient: v, fiber })
    }

    /// Chart logarithm: the tangent at `y` whose chart curve reaches `z`
    /// at `t = 1`.
    pub fn chart_log(&self, y: &TotalPoint, z: &TotalPoint) -> Result<TotalTangent> {
        let rel = self.group.compose(&self.group.inverse(&y.fiber)?, &z.fiber);
        Ok(TotalTangent {
            quotient: &z.quotient - &y.quotient,
            fiber: self.group.log(&rel)?,
        })
    }

    /// Velocity at `t = 0` of a curve, by central differences in the chart
    /// centred at `c(0)`.
    pub fn curve_velocity<F>(&self, c: F, h: f64) -> Result<TotalTangent>
    where
        F: Fn(f64) -> Result<TotalPoint>,
    {
        let y0 = c(0.0)?;
        let fwd = self.chart_log(&y0, &c(h)?)?;
        let bwd = self.chart_log(&y0, &c(-h)?)?;
        Ok(fwd.sub(&bwd).scale(1.0 / (2.0 * h)))
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> TotalPoint {
        TotalPoint {
            quotient: self.quotient.sample(rng, margin),
            fiber: self.group.sample(rng, 0.8),
        }
    }

    pub fn sample_tangent<R: Rng + ?Sized>(&self, rng: &mut R, r: f64) -> TotalTangent {
        TotalTangent {
            quotient: random_vector(rng, self.quotient_dim(), r),
            fiber: self.group.sample_algebra(rng, r),
        }
    }
}

impl ChartManifold for TotalSpace {
    type Point = TotalPoint;

    fn flow(&self, p: &TotalPoint, v: &DVector<f64>, t: f64) -> Result<TotalPoint> {
        self.displace(p, &TotalTangent::from_vector(v, self.quotient_dim()), t)
    }

    fn to_ambient(&self, p: &TotalPoint, v: &DVector<f64>) -> DVector<f64> {
        let u = TotalTangent::from_vector(v, self.quotient_dim());
        let m = &p.fiber.0 * self.group.hat(&u.fiber);
        DVector::from_iterator(
            self.quotient_dim() + m.len(),
            u.quotient.iter().chain(m.iter()).copied(),
        )
    }

    fn from_ambient(&self, p: &TotalPoint, w: &DVector<f64>) -> DVector<f64> {
        let q = self.quotient_dim();
        let k = self.group.matrix_dim();
        let m = DMatrix::from_column_slice(k, k, w.rows(q, k * k).as_slice());
        let inv = self
            .group
            .inverse(&p.fiber)
            .expect("fiber points are invertible");
        let xi = self.group.vee_unchecked(&(&inv.0 * m));
        TotalTangent {
            quotient: w.rows(0, q).into_owned(),
            fiber: xi,
        }
        .to_vector()
    }
}

/// A fiber-preserving right action of the Lie group bundle on the total
/// space. Only `act` is required; the other methods supply closed forms
/// that callers may use instead of finite differences.
pub trait FiberedAction: Send + Sync {
    fn name(&self) -> &str;

    /// `y . g` for `g` in the fiber of the bundle over `pi_X(y)`.
    fn act(&self, space: &TotalSpace, y: &TotalPoint, g: &GroupElement) -> Result<TotalPoint>;

    /// Whether `generator` and `push_forward` return closed forms.
    fn has_closed_forms(&self) -> bool {
        false
    }

    /// Closed form of the infinitesimal generator `xi^*_y`.
    fn generator(&self, _space: &TotalSpace, _y: &TotalPoint, _xi: &AlgebraElement) -> Option<TotalTangent> {
        None
    }

    /// Closed form of the differential of the action at `(y, g)`.
    fn push_forward(
        &self,
        _space: &TotalSpace,
        _y: &TotalPoint,
        _g: &GroupElement,
        _uy: &TotalTangent,
        _ug: &GroupTangent,
    ) -> Option<Result<TotalTangent>> {
        None
    }

    /// The element carrying `y1` to `y2`, when they share a fiber.
    fn relating_element(&self, _space: &TotalSpace, _y1: &TotalPoint, _y2: &TotalPoint) -> Option<Result<GroupElement>> {
        None
    }
}

/// Right multiplication in the fiber, `(v, h) . g = (v, h g)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RightMultiplication;

impl FiberedAction for RightMultiplication {
    fn name(&self) -> &str {
        "right-multiplication"
    }

    fn has_closed_forms(&self) -> bool {
        true
    }

    fn act(&self, space: &TotalSpace, y: &TotalPoint, g: &GroupElement) -> Result<TotalPoint> {
        Ok(TotalPoint {
            quotient: y.quotient.clone(),
            fiber: space.group().compose(&y.fiber, g),
        })
    }

    fn generator(&self, space: &TotalSpace, _y: &TotalPoint, xi: &AlgebraElement) -> Option<TotalTangent> {
        Some(TotalTangent::vertical(space.quotient_dim(), xi.clone()))
    }

    fn push_forward(
        &self,
        space: &TotalSpace,
        _y: &TotalPoint,
        g: &GroupElement,
        uy: &TotalTangent,
        ug: &GroupTangent,
    ) -> Option<Result<TotalTangent>> {
        Some(check_fibered(space, uy, ug).and_then(|_| {
            Ok(TotalTangent {
                quotient: uy.quotient.clone(),
                fiber: space.group().adjoint_inv(g, &(&uy.fiber + &ug.right))?,
            })
        }))
    }

    fn relating_element(&self, space: &TotalSpace, y1: &TotalPoint, y2: &TotalPoint) -> Option<Result<GroupElement>> {
        Some(if (&y1.quotient - &y2.quotient).norm() > 1e-12 * y1.quotient.norm().max(1.0) {
            Err(Error::NotSameFiber(format!(
                "quotient points {:?} and {:?} differ",
                y1.quotient.as_slice(),
                y2.quotient.as_slice()
            )))
        } else {
            space
                .group()
                .inverse(&y1.fiber)
                .map(|inv| space.group().compose(&inv, &y2.fiber))
        })
    }
}

/// The action in which every element acts as the identity.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrivialAction;

impl FiberedAction for TrivialAction {
    fn name(&self) -> &str {
        "trivial"
    }

    fn act(&self, _space: &TotalSpace, y: &TotalPoint, _g: &GroupElement) -> Result<TotalPoint> {
        Ok(y.clone())
    }
}

fn check_fibered(space: &TotalSpace, uy: &TotalTangent, ug: &GroupTangent) -> Result<()> {
    let u = space.base_vector(uy);
    check_dim(u.len(), ug.base.len(), "bundle tangent base")?;
    if (&u - &ug.base).norm() > 1e-9 * u.norm().max(1.0) {
        return Err(Error::InvalidAction(
            "tangent vectors of the fibered product lie over different base vectors".into(),
        ));
    }
    Ok(())
}

/// How derivatives of the action are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    /// Use the closed form if the action provides one.
    Analytic,
    /// Always differentiate numerically.
    FiniteDifference,
}

/// Differential of the action at `(y, g)` applied to `(U_y, U_g)`.
pub fn push_forward(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    y: &TotalPoint,
    g: &GroupElement,
    uy: &TotalTangent,
    ug: &GroupTangent,
    mode: Derivative,
) -> Result<TotalTangent> {
    if mode == Derivative::Analytic {
        if let Some(r) = action.push_forward(space, y, g, uy, ug) {
            return r;
        }
    }
    check_fibered(space, uy, ug)?;
    let group = space.group();
    space.curve_velocity(
        |t| {
            let yt = space.displace(y, uy, t)?;
            let gt = group.compose(&group.exp(&(&ug.right * t))?, g);
            action.act(space, &yt, &gt)
        },
        FD_STEP,
    )
}

/// Infinitesimal generator `xi^*_y = d/dt y . exp(t xi)`.
pub fn generator(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    y: &TotalPoint,
    xi: &AlgebraElement,
    mode: Derivative,
) -> Result<TotalTangent> {
    check_dim(space.algebra_dim(), xi.dim(), "generator argument")?;
    if mode == Derivative::Analytic {
        if let Some(t) = action.generator(space, y, xi) {
            return Ok(t);
        }
    }
    let group = space.group();
    space.curve_velocity(|t| action.act(space, y, &group.exp(&(xi * t))?), FD_STEP)
}

/// Residuals of the action axioms on random samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionAxiomReport {
    pub samples: usize,
    pub compatibility: f64,
    pub unit: f64,
    pub verticality: f64,
    /// Smallest ratio of `dist(y g, y)` to `dist(g, 1)` seen.
    pub freeness_ratio: f64,
}

impl ActionAxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.compatibility.max(self.unit).max(self.verticality)
    }
}

/// Checks `(y g) h = y (g h)`, `y 1 = y`, fiber preservation and freeness.
pub fn action_axioms<R: Rng + ?Sized>(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    rng: &mut R,
    samples: usize,
) -> Result<ActionAxiomReport> {
    let group = space.group();
    let mut rep = ActionAxiomReport {
        samples,
        freeness_ratio: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..samples {
        let y = space.sample_point(rng, 0.05);
        let g = group.sample(rng, 0.8);
        let h = group.sample(rng, 0.8);
        let lhs = action.act(space, &action.act(space, &y, &g)?, &h)?;
        let rhs = action.act(space, &y, &group.compose(&g, &h))?;
        rep.compatibility = rep.compatibility.max(point_distance(&lhs, &rhs));
        rep.unit = rep
            .unit
            .max(point_distance(&action.act(space, &y, &group.identity())?, &y));
        let yg = action.act(space, &y, &g)?;
        rep.verticality = rep.verticality.max((&yg.quotient - &y.quotient).norm());
        let gap = g.distance(&group.identity());
        if gap > 1e-3 {
            rep.freeness_ratio = rep.freeness_ratio.min(point_distance(&yg, &y) / gap);
        }
    }
    if rep.compatibility > 1e-10 || rep.unit > 1e-10 {
        return Err(Error::InvalidAction(format!(
            "{}: compatibility residual {:.3e}, unit residual {:.3e}",
            action.name(),
            rep.compatibility,
            rep.unit
        )));
    }
    if rep.verticality > 1e-10 {
        return Err(Error::InvalidAction(format!(
            "{}: action moves points between fibers ({:.3e})",
            action.name(),
            rep.verticality
        )));
    }
    Ok(rep)
}

/// Distance between two total-space points in the ambient coordinates.
pub fn point_distance(a: &TotalPoint, b: &TotalPoint) -> f64 {
    ((&a.quotient - &b.quotient).norm_squared() + (&a.fiber.0 - &b.fiber.0).norm_squared()).sqrt()
}

/// Rank data for the map `xi -> xi^*_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalIsoReport {
    pub rank: usize,
    pub dim: usize,
    pub min_singular_value: f64,
    /// Largest quotient component of a generator; zero for vertical maps.
    pub verticality: f64,
}

/// Checks that `xi -> xi^*_y` is an isomorphism onto the vertical space,
/// using numerical generators.
pub fn vertical_isomorphism(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    y: &TotalPoint,
) -> Result<VerticalIsoReport> {
    let d = space.algebra_dim();
    let mut m = DMatrix::zeros(d, d);
    let mut verticality: f64 = 0.0;
    for k in 0..d {
        let t = generator(space, action, y, &AlgebraElement::basis(d, k), Derivative::FiniteDifference)?;
        verticality = verticality.max(t.quotient.norm());
        m.set_column(k, &t.fiber.0);
    }
    let sv = m.svd(false, false).singular_values;
    let rank = sv.iter().filter(|s| **s > 1e-6).count();
    let report = VerticalIsoReport {
        rank,
        dim: d,
        min_singular_value: sv.min(),
        verticality,
    };
    if rank < d {
        return Err(Error::IsomorphismViolation { rank, dim: d });
    }
    Ok(report)
}

/// Residual of `d Phi_g (xi^*_y) = (Ad_{g^-1} xi)^*_{y g}`, both sides by
/// finite differences.
pub fn generator_equivariance_residual(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    y: &TotalPoint,
    g: &GroupElement,
    xi: &AlgebraElement,
) -> Result<f64> {
    let group = space.group();
    let lhs = space.curve_velocity(
        |t| action.act(space, &action.act(space, y, &group.exp(&(xi * t))?)?, g),
        FD_STEP,
    )?;
    let yg = action.act(space, y, g)?;
    let rhs = generator(space, action, &yg, &group.adjoint_inv(g, xi)?, Derivative::FiniteDifference)?;
    Ok(lhs.distance(&rhs))
}

/// Residual of `d Phi_(y,g) (xi^*_y, eta^*_g) = (Ad_{g^-1}(xi + eta))^*_{y g}`
/// where `eta^*_g` is the right-invariant field through `g`; both sides by
/// finite differences.
pub fn generator_sum_residual(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    y: &TotalPoint,
    g: &GroupElement,
    xi: &AlgebraElement,
    eta: &AlgebraElement,
) -> Result<f64> {
    let group = space.group();
    let lhs = space.curve_velocity(
        |t| {
            let yt = action.act(space, y, &group.exp(&(xi * t))?)?;
            let gt = group.compose(&group.exp(&(eta * t))?, g);
            action.act(space, &yt, &gt)
        },
        FD_STEP,
    )?;
    let yg = action.act(space, y, g)?;
    let rhs = generator(
        space,
        action,
        &yg,
        &group.adjoint_inv(g, &(xi + eta))?,
        Derivative::FiniteDifference,
    )?;
    Ok(lhs.distance(&rhs))
}

/// First jet of a section of the total space at one base point: the value
/// and the derivative along each base coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionJet {
    pub point: TotalPoint,
    pub derivatives: Vec<TotalTangent>,
}

/// First jet of a section of the Lie group bundle: the value and the
/// right-trivialized derivative along each base coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupJet {
    pub value: GroupElement,
    pub derivatives: Vec<AlgebraElement>,
}

impl SectionJet {
    pub fn distance(&self, other: &Self) -> f64 {
        let mut worst = point_distance(&self.point, &other.point);
        for (a, b) in self.derivatives.iter().zip(&other.derivatives) {
            worst = worst.max(a.distance(b));
        }
        worst
    }
}

/// The induced action of jets of the Lie group bundle on jets of the total
/// space: `j^1 s . j^1 gamma = j^1 (s . gamma)`.
pub fn jet_lift_action(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    s: &SectionJet,
    gamma: &GroupJet,
    mode: Derivative,
) -> Result<SectionJet> {
    let n = space.base_dim();
    check_dim(n, s.derivatives.len(), "section jet")?;
    check_dim(n, gamma.derivatives.len(), "group jet")?;
    let point = action.act(space, &s.point, &gamma.value)?;
    let mut derivatives = Vec::with_capacity(n);
    for mu in 0..n {
        let mut e = DVector::zeros(n);
        e[mu] = 1.0;
        let ds = &s.derivatives[mu];
        if (space.base_vector(ds) - &e).norm() > 1e-9 {
            return Err(Error::Usage(format!(
                "section jet derivative {mu} does not project to the coordinate direction"
            )));
        }
        let ug = GroupTangent {
            base: e,
            right: gamma.derivatives[mu].clone(),
        };
        derivatives.push(push_forward(space, action, &s.point, &gamma.value, ds, &ug, mode)?);
    }
    Ok(SectionJet { point, derivatives })
}

/// A point `[y, xi]` of the adjoint bundle `(Y x g) / G`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointBundlePoint {
    pub point: TotalPoint,
    pub value: AlgebraElement,
}

/// Distance between two adjoint-bundle representatives after moving the
/// second to the fiber point of the first: `|xi_1 - Ad_g xi_2|` where
/// `y_1 g = y_2`.
pub fn adjoint_class_distance(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    a: &AdjointBundlePoint,
    b: &AdjointBundlePoint,
) -> Result<f64> {
    let g = action
        .relating_element(space, &a.point, &b.point)
        .ok_or_else(|| Error::Usage(format!("{} cannot relate points", action.name())))??;
    let moved = space.group().adjoint(&g, &b.value)?;
    Ok(a.value.distance(&moved))
}

/// Whether two representatives define the same adjoint-bundle point.
pub fn adjoint_class_equal(
    space: &TotalSpace,
    action: &dyn FiberedAction,
    a: &AdjointBundlePoint,
    b: &AdjointBundlePoint,
    tol: f64,
) -> Result<bool> {
    Ok(adjoint_class_distance(space, action, a, b)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> TotalSpace {
        TotalSpace::new(
            ChartDomain::cube("X", 2, 1.0).unwrap(),
            None,
            Arc::new(GroupDescriptor::so3()),
        )
        .unwrap()
    }

    #[test]
    fn right_multiplication_satisfies_the_axioms() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rep = action_axioms(&s, &RightMultiplication, &mut rng, 20).unwrap();
        assert!(rep.max_residual() < 1e-14);
        assert!(rep.freeness_ratio > 0.1);
    }

    #[test]
    fn trivial_action_fails_the_vertical_isomorphism() {
        let s = space();
        let y = s.sample_point(&mut ChaCha8Rng::seed_from_u64(1), 0.1);
        let r = vertical_isomorphism(&s, &TrivialAction, &y);
        assert!(matches!(r, Err(Error::IsomorphismViolation { rank: 0, dim: 3 })));
    }

    #[test]
    fn analytic_push_forward_matches_finite_differences() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = s.sample_point(&mut rng, 0.2);
        let g = s.group().sample(&mut rng, 0.8);
        let uy = s.sample_tangent(&mut rng, 1.0);
        let ug = GroupTangent {
            base: s.base_vector(&uy),
            right: s.group().sample_algebra(&mut rng, 1.0),
        };
        let a = push_forward(&s, &RightMultiplication, &y, &g, &uy, &ug, Derivative::Analytic).unwrap();
        let f = push_forward(&s, &RightMultiplication, &y, &g, &uy, &ug, Derivative::FiniteDifference).unwrap();
        assert!(a.distance(&f) < 1e-8);
    }

    #[test]
    fn mismatched_base_vectors_are_rejected() {
        let s = space();
        let y = s.sample_point(&mut ChaCha8Rng::seed_from_u64(2), 0.2);
        let uy = TotalTangent {
            quotient: DVector::from_vec(vec![1.0, 0.0]),
            fiber: s.group().zero(),
        };
        let ug = GroupTangent {
            base: DVector::from_vec(vec![0.0, 1.0]),
            right: s.group().zero(),
        };
        let r = push_forward(&s, &RightMultiplication, &y, &s.group().identity(), &uy, &ug, Derivative::Analytic);
        assert!(matches!(r, Err(Error::InvalidAction(_))));
    }

    #[test]
    fn adjoint_classes_across_fibers_are_rejected() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = AdjointBundlePoint {
            point: s.sample_point(&mut rng, 0.1),
            value: s.group().zero(),
        };
        let b = AdjointBundlePoint {
            point: s.sample_point(&mut rng, 0.1),
            value: s.group().zero(),
        };
        assert!(matches!(
            adjoint_class_distance(&s, &RightMultiplication, &a, &b),
            Err(Error::NotSameFiber(_))
        ));
    }
}
