//! Generalized principal connections on a total space with a fibered
//! action of a Lie group bundle, their transport and their curvature.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::bundles::{
    adjoint_class_distance, generator, jet_lift_action, push_forward, AdjointBundlePoint, Derivative,
    FiberedAction, GroupJet, GroupTangent, RightMultiplication, SectionJet, TotalPoint, TotalSpace, TotalTangent,
};
use crate::calculus::{
    integrate_on_group, numerical_bracket, random_vector, AlgebraOneForm, BaseCurve, Integration, StepControl,
    FD_STEP,
};
use crate::connections::{group_connection_residuals, transport_group, transport_on_interval, LieGroupBundleConnection};
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupElement};

pub type FormFn = Arc<dyn Fn(&TotalPoint, &TotalTangent) -> Result<AlgebraElement> + Send + Sync>;
pub type AlgebraField = Arc<dyn Fn(&DVector<f64>) -> AlgebraElement + Send + Sync>;

/// Partition-of-unity weight, a function of one base coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    One,
    /// Equal to 1 below `lower`, 0 above `upper`, smooth (all orders) in
    /// between, built from `exp(-1/s)`.
    SmoothFall { axis: usize, lower: f64, upper: f64 },
    /// `1 - SmoothFall`.
    SmoothRise { axis: usize, lower: f64, upper: f64 },
}

impl Weight {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let fall = |axis: usize, lower: f64, upper: f64| {
            let s = ((x[axis] - lower) / (upper - lower)).clamp(0.0, 1.0);
            let bump = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
            let (a, b) = (bump(1.0 - s), bump(s));
            a / (a + b)
        };
        match *self {
            Weight::One => 1.0,
            Weight::SmoothFall { axis, lower, upper } => fall(axis, lower, upper),
            Weight::SmoothRise { axis, lower, upper } => 1.0 - fall(axis, lower, upper),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Weight::One => Ok(()),
            Weight::SmoothFall { axis, lower, upper } | Weight::SmoothRise { axis, lower, upper } => {
                if axis >= n || !(lower < upper) {
                    Err(Error::Construction(format!("bad bump on axis {axis} over [{lower}, {upper}]")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// One local trivialization of the total space, described relative to the
/// reference coordinates: its fiber coordinate is `sigma(v)^-1 h` with
/// `sigma = exp(s(v))`, it carries the algebra-valued shift `beta` on the
/// quotient, and it contributes with weight `theta(x)`.
#[derive(Clone)]
pub struct LocalChart {
    pub label: String,
    pub transition: Option<AlgebraField>,
    pub shift: Option<AlgebraOneForm>,
    pub weight: Weight,
}

impl LocalChart {
    pub fn reference(shift: Option<AlgebraOneForm>) -> Self {
        Self {
            label: "reference".into(),
            transition: None,
            shift,
            weight: Weight::One,
        }
    }
}

/// A generalized principal connection `omega` on `Y`, associated with a Lie
/// group bundle connection `nu`.
#[derive(Clone)]
pub struct GeneralizedPrincipalConnection {
    space: Arc<TotalSpace>,
    action: Arc<dyn FiberedAction>,
    nu: Arc<LieGroupBundleConnection>,
    form: FormFn,
    label: String,
}

impl std::fmt::Debug for GeneralizedPrincipalConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralizedPrincipalConnection")
            .field("label", &self.label)
            .field("action", &self.action.name())
            .field("nu", &self.nu)
            .finish()
    }
}

/// Complementarity residual allowed by [`GeneralizedPrincipalConnection::validate`].
pub const COMPLEMENTARITY_TOL: f64 = 1e-9;
/// Equivariance residual allowed with closed-form differentials.
pub const EQUIVARIANCE_TOL: f64 = 1e-9;
/// Equivariance residual allowed when differentials are numerical.
pub const EQUIVARIANCE_FD_TOL: f64 = 1e-6;

impl GeneralizedPrincipalConnection {
    /// Wraps an arbitrary form; nothing is checked.
    pub fn from_form(
        space: Arc<TotalSpace>,
        action: Arc<dyn FiberedAction>,
        nu: Arc<LieGroupBundleConnection>,
        label: impl Into<String>,
        form: FormFn,
    ) -> Self {
        Self {
            space,
            action,
            nu,
            form,
            label: label.into(),
        }
    }

    /// The connection obtained by gluing the canonical local forms
    /// `xi + Ad_{h^-1}(beta(U) - h(x, h, u))` of each chart with a partition
    /// of unity. The action is right multiplication.
    pub fn canonical(
        space: Arc<TotalSpace>,
        nu: Arc<LieGroupBundleConnection>,
        charts: Vec<LocalChart>,
    ) -> Result<Self> {
        check_dim(space.base_dim(), nu.bundle().base_dim(), "connection base")?;
        check_dim(space.algebra_dim(), nu.group().dim(), "connection group")?;
        if charts.is_empty() {
            return Err(Error::Construction("no charts".into()));
        }
        let n = space.base_dim();
        let q = space.quotient_dim();
        for c in &charts {
            c.weight.validate(n)?;
            if let Some(b) = &c.shift {
                check_dim(q, b.base_dim(), "chart shift")?;
                check_dim(space.algebra_dim(), b.algebra_dim(), "chart shift values")?;
            }
        }
        check_partition(&space, &charts)?;
        let label = if charts.len() == 1 { "canonical" } else { "glued" };
        let sp = space.clone();
        let nu2 = nu.clone();
        let form: FormFn = Arc::new(move |y, u| glued_form(&sp, &nu2, &charts, y, u));
        Ok(Self::from_form(space, Arc::new(RightMultiplication), nu, label, form))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn space(&self) -> &Arc<TotalSpace> {
        &self.space
    }

    pub fn action(&self) -> &Arc<dyn FiberedAction> {
        &self.action
    }

    pub fn nu(&self) -> &Arc<LieGroupBundleConnection> {
        &self.nu
    }

    pub fn form(&self) -> &FormFn {
        &self.form
    }

    pub fn eval(&self, y: &TotalPoint, u: &TotalTangent) -> Result<AlgebraElement> {
        check_dim(self.space.quotient_dim(), u.quotient.len(), "tangent quotient part")?;
        check_dim(self.space.algebra_dim(), u.fiber.dim(), "tangent fiber part")?;
        (self.form)(y, u)
    }

    /// `omega + alpha` for a tensorial form `alpha`.
    pub fn add_tensorial(&self, alpha: &TensorialAdjointForm) -> Self {
        let a = self.form.clone();
        let b = alpha.form.clone();
        Self {
            form: Arc::new(move |y, u| Ok(a(y, u)? + b(y, u)?)),
            label: format!("{}+tensorial", self.label),
            ..self.clone()
        }
    }

    /// Residuals of the two defining conditions on random samples.
    pub fn residuals<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize, mode: Derivative) -> Result<PrincipalReport> {
        let space = &*self.space;
        let group = space.group();
        let mut rep = PrincipalReport {
            samples,
            ..Default::default()
        };
        for _ in 0..samples {
            let y = space.sample_point(rng, 0.05);
            let xi = group.sample_algebra(rng, 1.0);
            let star = generator(space, &*self.action, &y, &xi, mode)?;
            rep.complementarity = rep.complementarity.max(self.eval(&y, &star)?.distance(&xi));

            let g = group.sample(rng, 0.8);
            let uy = space.sample_tangent(rng, 1.0);
            let ug = GroupTangent {
                base: space.base_vector(&uy),
                right: group.sample_algebra(rng, 1.0),
            };
            let yg = self.action.act(space, &y, &g)?;
            let pushed = push_forward(space, &*self.action, &y, &g, &uy, &ug, mode)?;
            let lhs = self.eval(&yg, &pushed)?;
            let x = space.base_point(&y);
            let rhs = group.adjoint_inv(&g, &(self.eval(&y, &uy)? + self.nu.nu(&x, &g, &ug)?))?;
            rep.equivariance = rep.equivariance.max(lhs.distance(&rhs));
        }
        Ok(rep)
    }

    /// Checks complementarity and equivariance; differentials of the
    /// action use closed forms when available.
    pub fn validate<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> Result<PrincipalReport> {
        let rep = self.residuals(rng, samples, Derivative::Analytic)?;
        let equi_tol = if self.action.has_closed_forms() {
            EQUIVARIANCE_TOL
        } else {
            EQUIVARIANCE_FD_TOL
        };
        if rep.complementarity > COMPLEMENTARITY_TOL || rep.equivariance > equi_tol {
            return Err(Error::InvalidPrincipalConnection(format!(
                "{}: complementarity {:.3e}, equivariance {:.3e}",
                self.label, rep.complementarity, rep.equivariance
            )));
        }
        Ok(rep)
    }

    /// Horizontal lift of a quotient vector `U` at `y`: the unique tangent
    /// `(U, zeta)` with `omega_y(U, zeta) = 0`.
    pub fn horizontal_lift(&self, y: &TotalPoint, u: &DVector<f64>) -> Result<TotalTangent> {
        let q = self.space.quotient_dim();
        let d = self.space.algebra_dim();
        check_dim(q, u.len(), "lifted vector")?;
        let offset = self.eval(
            y,
            &TotalTangent {
                quotient: u.clone(),
                fiber: AlgebraElement::zeros(d),
            },
        )?;
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d {
            let col = self.eval(y, &TotalTangent::vertical(q, AlgebraElement::basis(d, k)))?;
            m.set_column(k, &col.0);
        }
        let svd = m.svd(true, true);
        let smin = svd.singular_values.min();
        if smin < 1e-10 {
            return Err(Error::DegenerateConnection(smin));
        }
        let zeta = svd
            .solve(&(-offset.0), 0.0)
            .map_err(|e| Error::Inconsistency(e.to_string()))?;
        Ok(TotalTangent {
            quotient: u.clone(),
            fiber: AlgebraElement(zeta),
        })
    }

    /// Parallel transport of `y0` along a curve in the quotient chart.
    pub fn transport(&self, curve: &BaseCurve, y0: &TotalPoint, control: &StepControl) -> Result<TotalTransport> {
        curve.check(self.space.quotient(), 64)?;
        let start = curve.position(curve.interval().0);
        if (&start - &y0.quotient).norm() > 1e-9 * start.norm().max(1.0) {
            return Err(Error::MalformedCurve("curve does not start at the quotient point of y0".into()));
        }
        self.transport_on_interval(curve, y0, curve.interval(), control)
    }

    fn transport_on_interval(
        &self,
        curve: &BaseCurve,
        y0: &TotalPoint,
        interval: (f64, f64),
        control: &StepControl,
    ) -> Result<TotalTransport> {
        let group = self.space.group();
        let integration = integrate_on_group(
            group,
            |t, h| {
                let y = TotalPoint {
                    quotient: curve.position(t),
                    fiber: h.clone(),
                };
                let lift = self.horizontal_lift(&y, &curve.velocity(t))?;
                group.adjoint(h, &lift.fiber)
            },
            &y0.fiber,
            interval,
            control,
        )?;
        Ok(TotalTransport {
            end: TotalPoint {
                quotient: curve.position(interval.1),
                fiber: integration.end.clone(),
            },
            integration,
        })
    }

    /// `|T(y g) - T(y) T_nu(g)|` along a quotient curve.
    pub fn compatibility_residual(
        &self,
        curve: &BaseCurve,
        y: &TotalPoint,
        g: &GroupElement,
        control: &StepControl,
    ) -> Result<f64> {
        let base_curve = curve.project(self.space.base_dim())?;
        let lhs = self.transport(curve, &self.action.act(&self.space, y, g)?, control)?.end;
        let ty = self.transport(curve, y, control)?.end;
        let tg = transport_group(&self.nu, &base_curve, g, control)?.end;
        let rhs = self.action.act(&self.space, &ty, &tg)?;
        Ok(crate::bundles::point_distance(&lhs, &rhs))
    }

    /// The jet at `pi(y)` of the local section obtained by transporting `y`
    /// along straight lines, by central differences.
    pub fn transport_jet(&self, y: &TotalPoint, h: f64) -> Result<SectionJet> {
        let n = self.space.base_dim();
        if self.space.quotient_dim() != n {
            return Err(Error::Usage("transport jets need the quotient to equal the base".into()));
        }
        let control = StepControl::with_step(0.25);
        let mut derivatives = Vec::with_capacity(n);
        for mu in 0..n {
            let along = |t: f64| -> Result<TotalPoint> {
                let mut end = y.quotient.clone();
                end[mu] += t;
                let line = BaseCurve::line(y.quotient.clone(), end)?;
                Ok(self.transport_on_interval(&line, y, line.interval(), &control)?.end)
            };
            derivatives.push(self.space.curve_velocity(along, h)?);
        }
        Ok(SectionJet {
            point: y.clone(),
            derivatives,
        })
    }

    /// Residual of the equivariance of the induced jet map,
    /// `omega-hat(y g) = omega-hat(y) . nu-hat(g)`, all jets numerical.
    pub fn jet_equivariance_residual(&self, y: &TotalPoint, g: &GroupElement) -> Result<f64> {
        let h = 1e-4;
        let yg = self.action.act(&self.space, y, g)?;
        let lhs = self.transport_jet(&yg, h)?;
        let jet_y = self.transport_jet(y, h)?;
        let jet_g = nu_transport_jet(&self.nu, &self.space.base_point(y), g, h)?;
        let rhs = jet_lift_action(&self.space, &*self.action, &jet_y, &jet_g, Derivative::FiniteDifference)?;
        Ok(lhs.distance(&rhs))
    }

    /// Residual of
    /// `d Phi(Hor_y U, U_g) = Hor_{y g} U + (Ad_{g^-1} nu_g(U_g))^*_{y g}`.
    pub fn horizontal_transform_residual(
        &self,
        y: &TotalPoint,
        g: &GroupElement,
        u: &DVector<f64>,
        eta: &AlgebraElement,
    ) -> Result<f64> {
        let space = &*self.space;
        let ug = GroupTangent {
            base: space.quotient_to_base(u),
            right: eta.clone(),
        };
        let lhs = push_forward(
            space,
            &*self.action,
            y,
            g,
            &self.horizontal_lift(y, u)?,
            &ug,
            Derivative::FiniteDifference,
        )?;
        let yg = self.action.act(space, y, g)?;
        let x = space.base_point(y);
        let vert = space.group().adjoint_inv(g, &self.nu.nu(&x, g, &ug)?)?;
        let rhs = self
            .horizontal_lift(&yg, u)?
            .add(&generator(space, &*self.action, &yg, &vert, Derivative::FiniteDifference)?);
        Ok(lhs.distance(&rhs))
    }

    /// Residual of `Phi^* omega = varpi` for the product connection
    /// `varpi(U_y, U_g) = Ad_{g^-1}(omega(U_y) + nu(U_g))` on the fibered
    /// product, with `d Phi` by finite differences.
    pub fn product_connection_residual(
        &self,
        y: &TotalPoint,
        g: &GroupElement,
        uy: &TotalTangent,
        ug: &GroupTangent,
    ) -> Result<f64> {
        let space = &*self.space;
        let x = space.base_point(y);
        let varpi = space
            .group()
            .adjoint_inv(g, &(self.eval(y, uy)? + self.nu.nu(&x, g, ug)?))?;
        let yg = self.action.act(space, y, g)?;
        let pushed = push_forward(space, &*self.action, y, g, uy, ug, Derivative::FiniteDifference)?;
        Ok(self.eval(&yg, &pushed)?.distance(&varpi))
    }

    /// Curvature on two quotient vectors, computed from the bracket of
    /// horizontal lifts and from the exterior covariant derivative.
    pub fn curvature_paths(
        &self,
        y: &TotalPoint,
        u1: &DVector<f64>,
        u2: &DVector<f64>,
        step: Option<f64>,
    ) -> Result<CurvatureEval> {
        let space = &*self.space;
        let q = space.quotient_dim();
        let h1 = |p: &TotalPoint| -> Result<DVector<f64>> { Ok(self.horizontal_lift(p, u1)?.to_vector()) };
        let h2 = |p: &TotalPoint| -> Result<DVector<f64>> { Ok(self.horizontal_lift(p, u2)?.to_vector()) };
        let br = numerical_bracket(space, h1, h2, y, step)?;
        let bracket = -self.eval(y, &TotalTangent::from_vector(&br, q))?;

        let w1 = h1(y)?;
        let w2 = h2(y)?;
        let k1 = TotalTangent::from_vector(&w1, q);
        let k2 = TotalTangent::from_vector(&w2, q);
        let h = step.unwrap_or(FD_STEP);
        let x = space.base_point(y);
        let cov = |along: &DVector<f64>, field: &TotalTangent| -> Result<AlgebraElement> {
            let dir = TotalTangent::from_vector(along, q);
            let fp = self.eval(&space.displace(y, &dir, h)?, field)?;
            let fm = self.eval(&space.displace(y, &dir, -h)?, field)?;
            let deriv = (fp - fm) * (1.0 / (2.0 * h));
            let k = self.nu.algebra_coefficient(&x, &space.base_vector(&dir))?;
            Ok(AlgebraElement(deriv.0 + k * self.eval(y, field)?.0))
        };
        let c1 = |_: &TotalPoint| -> Result<DVector<f64>> { Ok(w1.clone()) };
        let c2 = |_: &TotalPoint| -> Result<DVector<f64>> { Ok(w2.clone()) };
        let wb = numerical_bracket(space, c1, c2, y, step)?;
        let covariant = cov(&w1, &k2)? - cov(&w2, &k1)? - self.eval(y, &TotalTangent::from_vector(&wb, q))?;
        Ok(CurvatureEval { bracket, covariant })
    }

    /// Curvature `Omega_y(Hor U1, Hor U2)`; fails when the two evaluation
    /// paths disagree by more than [`CURVATURE_PATH_TOL`].
    pub fn curvature(&self, y: &TotalPoint, u1: &DVector<f64>, u2: &DVector<f64>) -> Result<AlgebraElement> {
        let eval = self.curvature_paths(y, u1, u2, None)?;
        if eval.gap() > CURVATURE_PATH_TOL {
            return Err(Error::Inconsistency(format!(
                "curvature paths differ by {:.3e}",
                eval.gap()
            )));
        }
        Ok(eval.bracket)
    }

    /// The reduced curvature `[y, Omega_y(Hor U1, Hor U2)]`.
    pub fn reduced_curvature(
        &self,
        y: &TotalPoint,
        u1: &DVector<f64>,
        u2: &DVector<f64>,
    ) -> Result<AdjointBundlePoint> {
        Ok(AdjointBundlePoint {
            point: y.clone(),
            value: self.curvature(y, u1, u2)?,
        })
    }

    /// Gap between the reduced curvature computed at `y` and at `y g`.
    pub fn reduced_curvature_residual(
        &self,
        y: &TotalPoint,
        g: &GroupElement,
        u1: &DVector<f64>,
        u2: &DVector<f64>,
    ) -> Result<f64> {
        let a = self.reduced_curvature(y, u1, u2)?;
        let yg = self.action.act(&self.space, y, g)?;
        let b = self.reduced_curvature(&yg, u1, u2)?;
        adjoint_class_distance(&self.space, &*self.action, &a, &b)
    }

    /// Residual of `Ad_g Omega_{y g} = Omega_y + R_nu(g)` on horizontal lifts
    /// of `U1, U2`, where `R_nu` is the curvature of `nu`. The reduced
    /// curvature is well defined exactly when the correction vanishes.
    pub fn reduced_curvature_shift_residual(
        &self,
        y: &TotalPoint,
        g: &GroupElement,
        u1: &DVector<f64>,
        u2: &DVector<f64>,
    ) -> Result<f64> {
        let group = self.space.group();
        let at_y = self.curvature(y, u1, u2)?;
        let yg = self.action.act(&self.space, y, g)?;
        let moved = group.adjoint(g, &self.curvature(&yg, u1, u2)?)?;
        let x = self.space.base_point(y);
        let n = self.space.base_dim();
        let r = group_connection_curvature(
            &self.nu,
            &x,
            g,
            &u1.rows(0, n).into_owned(),
            &u2.rows(0, n).into_owned(),
            None,
        )?;
        Ok(moved.distance(&(at_y + r)))
    }
}

/// Curvature of a Lie group bundle connection at `(x, g)`,
/// `-nu([Hor U1, Hor U2])`, with the bracket by central differences.
pub fn group_connection_curvature(
    nu: &LieGroupBundleConnection,
    x: &DVector<f64>,
    g: &GroupElement,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
    step: Option<f64>,
) -> Result<AlgebraElement> {
    let n = nu.bundle().base_dim();
    check_dim(n, u1.len(), "curvature argument")?;
    check_dim(n, u2.len(), "curvature argument")?;
    let group = nu.group();
    let space = TotalSpace::new(nu.bundle().base().clone(), None, group.clone())?;
    let lift = |u: &DVector<f64>, p: &TotalPoint| -> Result<DVector<f64>> {
        let right = nu.cocycle(&p.quotient, &p.fiber, u)?;
        Ok(TotalTangent {
            quotient: u.clone(),
            fiber: group.adjoint_inv(&p.fiber, &right)?,
        }
        .to_vector())
    };
    let p = space.point(x.clone(), g.clone())?;
    let br = numerical_bracket(&space, |q: &TotalPoint| lift(u1, q), |q: &TotalPoint| lift(u2, q), &p, step)?;
    let br = TotalTangent::from_vector(&br, n);
    let value = nu.nu(
        x,
        g,
        &GroupTangent {
            base: br.quotient.clone(),
            right: group.adjoint(g, &br.fiber)?,
        },
    )?;
    Ok(-value)
}

/// Curvature gap allowed between the two evaluation paths.
pub const CURVATURE_PATH_TOL: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrincipalReport {
    pub samples: usize,
    pub complementarity: f64,
    pub equivariance: f64,
}

impl PrincipalReport {
    pub fn max_residual(&self) -> f64 {
        self.complementarity.max(self.equivariance)
    }
}

#[derive(Clone, Debug)]
pub struct TotalTransport {
    pub end: TotalPoint,
    pub integration: Integration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureEval {
    pub bracket: AlgebraElement,
    pub covariant: AlgebraElement,
}

impl CurvatureEval {
    pub fn gap(&self) -> f64 {
        self.bracket.distance(&self.covariant)
    }
}

/// Jet at `x` of the section of the Lie group bundle obtained by
/// transporting `g` along straight lines.
pub fn nu_transport_jet(
    nu: &LieGroupBundleConnection,
    x: &DVector<f64>,
    g: &GroupElement,
    h: f64,
) -> Result<GroupJet> {
    let group = nu.group();
    let ginv = group.inverse(g)?;
    let control = StepControl::with_step(0.25);
    let n = x.len();
    let mut derivatives = Vec::with_capacity(n);
    for mu in 0..n {
        let along = |t: f64| -> Result<DVector<f64>> {
            let mut end = x.clone();
            end[mu] += t;
            let line = BaseCurve::line(x.clone(), end)?;
            let out = transport_on_interval(nu, &line, g, line.interval(), &control)?.end;
            Ok(group.log(&group.compose(&out, &ginv))?.0)
        };
        derivatives.push(AlgebraElement((along(h)? - along(-h)?) / (2.0 * h)));
    }
    Ok(GroupJet {
        value: g.clone(),
        derivatives,
    })
}

fn check_partition(space: &TotalSpace, charts: &[LocalChart]) -> Result<()> {
    let base = space.base();
    let n = base.dim();
    let probes = 33;
    for i in 0..probes {
        for axis in 0..n {
            let mut x: DVector<f64> = DVector::from_iterator(
                n,
                base.lower.iter().zip(&base.upper).map(|(l, u)| 0.5 * (l + u)),
            );
            x[axis] = base.lower[axis] + (base.upper[axis] - base.lower[axis]) * i as f64 / (probes - 1) as f64;
            let mut sum = 0.0;
            for c in charts {
                let w = c.weight.eval(&x);
                if w < 0.0 {
                    return Err(Error::Construction(format!("negative weight in chart '{}'", c.label)));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Construction(format!(
                    "weights sum to {sum} at {:?}",
                    x.as_slice()
                )));
            }
        }
    }
    Ok(())
}

/// `sigma^-1 d sigma (U)` for `sigma = exp(s(v))`, by central differences.
fn transition_derivative(
    space: &TotalSpace,
    s: &AlgebraField,
    v: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<AlgebraElement> {
    let group = space.group();
    if u.norm() == 0.0 {
        return Ok(group.zero());
    }
    let h = 1e-5;
    let sinv = group.inverse(&group.exp(&s(v))?)?;
    let at = |t: f64| -> Result<DVector<f64>> {
        let sig = group.exp(&s(&(v + u * t)))?;
        Ok(group.log(&group.compose(&sinv, &sig))?.0)
    };
    Ok(AlgebraElement((at(h)? - at(-h)?) / (2.0 * h)))
}

fn glued_form(
    space: &TotalSpace,
    nu: &LieGroupBundleConnection,
    charts: &[LocalChart],
    y: &TotalPoint,
    u: &TotalTangent,
) -> Result<AlgebraElement> {
    let group = space.group();
    let x = space.base_point(y);
    let ux = space.base_vector(u);
    let mut total = group.zero();
    for c in charts {
        let w = c.weight.eval(&x);
        if w == 0.0 {
            continue;
        }
        let (h_alpha, xi_alpha) = match &c.transition {
            None => (y.fiber.clone(), u.fiber.clone()),
            Some(s) => {
                let sigma = group.exp(&s(&y.quotient))?;
                let h_alpha = group.compose(&group.inverse(&sigma)?, &y.fiber);
                let theta = transition_derivative(space, s, &y.quotient, &u.quotient)?;
                (h_alpha, &u.fiber - &group.adjoint_inv(&y.fiber, &theta)?)
            }
        };
        let beta = match &c.shift {
            Some(b) => b.eval(&y.quotient, &u.quotient)?,
            None => group.zero(),
        };
        let inner = beta - nu.cocycle(&x, &h_alpha, &ux)?;
        let local = xi_alpha + group.adjoint_inv(&h_alpha, &inner)?;
        total += &(local * w);
    }
    Ok(total)
}

/// A horizontal, `Ad`-equivariant algebra-valued form on `Y`, equivalently
/// a form on the quotient with values in the adjoint bundle.
#[derive(Clone)]
pub struct TensorialAdjointForm {
    space: Arc<TotalSpace>,
    action: Arc<dyn FiberedAction>,
    form: FormFn,
}

impl TensorialAdjointForm {
    pub fn eval(&self, y: &TotalPoint, u: &TotalTangent) -> Result<AlgebraElement> {
        (self.form)(y, u)
    }

    /// The adjoint-bundle value `[y, alpha_y(U)]` of a quotient vector.
    pub fn reduce(&self, y: &TotalPoint, u: &DVector<f64>) -> Result<AdjointBundlePoint> {
        let t = TotalTangent {
            quotient: u.clone(),
            fiber: self.space.group().zero(),
        };
        Ok(AdjointBundlePoint {
            point: y.clone(),
            value: self.eval(y, &t)?,
        })
    }

    /// Horizontality and equivariance residuals on random samples.
    pub fn residuals<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> Result<(f64, f64)> {
        let space = &*self.space;
        let group = space.group();
        let (mut hor, mut equi): (f64, f64) = (0.0, 0.0);
        for _ in 0..samples {
            let y = space.sample_point(rng, 0.05);
            let xi = group.sample_algebra(rng, 1.0);
            let star = generator(space, &*self.action, &y, &xi, Derivative::Analytic)?;
            hor = hor.max(self.eval(&y, &star)?.norm());
            let g = group.sample(rng, 0.8);
            let uy = space.sample_tangent(rng, 1.0);
            let ug = GroupTangent {
                base: space.base_vector(&uy),
                right: group.sample_algebra(rng, 1.0),
            };
            let yg = self.action.act(space, &y, &g)?;
            let pushed = push_forward(space, &*self.action, &y, &g, &uy, &ug, Derivative::FiniteDifference)?;
            let rhs = group.adjoint_inv(&g, &self.eval(&y, &uy)?)?;
            equi = equi.max(self.eval(&yg, &pushed)?.distance(&rhs));
        }
        Ok((hor, equi))
    }
}

/// The difference of two connections associated with the same `nu`.
pub fn connection_difference<R: Rng + ?Sized>(
    a: &GeneralizedPrincipalConnection,
    b: &GeneralizedPrincipalConnection,
    rng: &mut R,
    samples: usize,
) -> Result<TensorialAdjointForm> {
    if !Arc::ptr_eq(a.nu(), b.nu()) {
        let space = a.space();
        let n = space.base_dim();
        for _ in 0..samples.max(4) {
            let x = space.base().sample(rng, 0.0);
            let g = space.group().sample(rng, 0.8);
            let u = random_vector(rng, n, 1.0);
            let gap = a.nu().cocycle(&x, &g, &u)?.distance(&b.nu().cocycle(&x, &g, &u)?);
            if gap > 1e-12 {
                return Err(Error::InconsistentInputs(format!(
                    "connections are associated with different nu (cocycle gap {gap:.3e})"
                )));
            }
        }
    }
    let fa = a.form.clone();
    let fb = b.form.clone();
    let alpha = TensorialAdjointForm {
        space: a.space.clone(),
        action: a.action.clone(),
        form: Arc::new(move |y, u| Ok(fa(y, u)? - fb(y, u)?)),
    };
    let (hor, equi) = alpha.residuals(rng, samples)?;
    if hor > 1e-9 || equi > 1e-7 {
        return Err(Error::InconsistentInputs(format!(
            "difference is not tensorial: horizontality {hor:.3e}, equivariance {equi:.3e}"
        )));
    }
    Ok(alpha)
}

/// Builds a tensorial form from an adjoint-bundle valued form on the
/// quotient given in the reference chart: `alpha_(v,h)(U, xi) =
/// Ad_{h^-1} b_v(U)`.
pub fn tensorial_from_reference(
    space: Arc<TotalSpace>,
    b: AlgebraOneForm,
) -> Result<TensorialAdjointForm> {
    check_dim(space.quotient_dim(), b.base_dim(), "tensorial form base")?;
    check_dim(space.algebra_dim(), b.algebra_dim(), "tensorial form values")?;
    let sp = space.clone();
    Ok(TensorialAdjointForm {
        space,
        action: Arc::new(RightMultiplication),
        form: Arc::new(move |y, u| {
            let v = b.eval(&y.quotient, &u.quotient)?;
            sp.group().adjoint_inv(&y.fiber, &v)
        }),
    })
}

/// Validity of `omega` together with validity of `nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct NecessityReport {
    pub omega: PrincipalReport,
    pub nu_residual: f64,
}

/// If `omega` satisfies the defining conditions then `nu` must be a Lie
/// group bundle connection; a counterexample is a consistency failure.
pub fn necessity_check<R: Rng + ?Sized>(
    omega: &GeneralizedPrincipalConnection,
    rng: &mut R,
    samples: usize,
) -> Result<NecessityReport> {
    let rep = omega.residuals(rng, samples, Derivative::Analytic)?;
    let nu = group_connection_residuals(omega.nu(), rng, samples)?;
    let omega_ok = rep.complementarity <= COMPLEMENTARITY_TOL && rep.equivariance <= EQUIVARIANCE_TOL;
    let nu_ok = nu.max_residual() <= crate::connections::GROUP_CONNECTION_TOL;
    if omega_ok && !nu_ok {
        return Err(Error::ConsistencyFailure(format!(
            "omega passes (residual {:.3e}) while nu fails (residual {:.3e})",
            rep.max_residual(),
            nu.max_residual()
        )));
    }
    Ok(NecessityReport {
        omega: rep,
        nu_residual: nu.max_residual(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Scenario};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn principal() -> crate::config::PrincipalSetup {
        match preset("principal-so3").unwrap().build().unwrap() {
            Scenario::Principal(s) => *s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn smooth_weight_is_flat_at_the_ends() {
        let w = Weight::SmoothFall { axis: 0, lower: 0.0, upper: 1.0 };
        let at = |x: f64| w.eval(&DVector::from_vec(vec![x]));
        assert_eq!(at(-0.1), 1.0);
        assert_eq!(at(1.1), 0.0);
        assert!((at(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-3;
        assert!((at(h) - 1.0).abs() < 1e-12);
        assert!(at(1.0 - h) < 1e-12);
    }

    #[test]
    fn partition_must_sum_to_one() {
        let s = principal();
        let bump = Weight::SmoothFall { axis: 0, lower: -0.4, upper: 0.4 };
        let charts = vec![
            LocalChart { label: "a".into(), transition: None, shift: None, weight: bump.clone() },
            LocalChart { label: "b".into(), transition: None, shift: None, weight: bump },
        ];
        let err = GeneralizedPrincipalConnection::canonical(s.space.clone(), s.nu.clone(), charts).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn horizontal_lift_is_annihilated_and_generators_reproduce_xi() {
        let s = principal();
        let omega = s.glued.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let group = s.space.group().clone();
        for _ in 0..10 {
            let y = s.space.sample_point(&mut rng, 0.1);
            let u = random_vector(&mut rng, 2, 1.0);
            let lift = omega.horizontal_lift(&y, &u).unwrap();
            assert!(omega.eval(&y, &lift).unwrap().norm() < 1e-12);
            let xi = group.sample_algebra(&mut rng, 1.0);
            let star = generator(&s.space, &RightMultiplication, &y, &xi, Derivative::Analytic).unwrap();
            assert!(omega.eval(&y, &star).unwrap().distance(&xi) < 1e-12);
        }
    }

    #[test]
    fn group_connection_curvature_vanishes_on_the_unit_section_and_for_trivial_nu() {
        let s = principal();
        let group = s.space.group().clone();
        let x = DVector::from_vec(vec![0.2, -0.3]);
        let u1 = DVector::from_vec(vec![1.0, 0.0]);
        let u2 = DVector::from_vec(vec![0.0, 1.0]);
        let at_unit = group_connection_curvature(&s.nu, &x, &group.identity(), &u1, &u2, None).unwrap();
        assert!(at_unit.norm() < 1e-9);
        let g = group.exp(&AlgebraElement::from_slice(&[0.4, -0.2, 0.7])).unwrap();
        let curved = group_connection_curvature(&s.nu, &x, &g, &u1, &u2, None).unwrap();
        assert!(curved.norm() > 1e-3);
        let flat = LieGroupBundleConnection::trivial(s.nu.bundle().clone());
        assert!(group_connection_curvature(&flat, &x, &g, &u1, &u2, None).unwrap().norm() < 1e-12);
    }

    #[test]
    fn curvature_moves_by_the_curvature_of_nu() {
        let s = principal();
        let omega = &s.single;
        let group = s.space.group().clone();
        let y = s.space.point(DVector::from_vec(vec![0.1, 0.2]), group.exp(&AlgebraElement::from_slice(&[0.3, 0.1, -0.2])).unwrap()).unwrap();
        let g = group.exp(&AlgebraElement::from_slice(&[-0.5, 0.4, 0.2])).unwrap();
        let u1 = DVector::from_vec(vec![0.7, -0.1]);
        let u2 = DVector::from_vec(vec![0.2, 0.9]);
        assert!(omega.reduced_curvature_shift_residual(&y, &g, &u1, &u2).unwrap() < 1e-8);
        assert!(omega.reduced_curvature_residual(&y, &g, &u1, &u2).unwrap() > 1e-3);
    }

    #[test]
    fn differences_of_connections_are_tensorial() {
        let s = principal();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = &s.single;
        let b = GeneralizedPrincipalConnection::canonical(s.space.clone(), s.nu.clone(), vec![LocalChart::reference(None)]).unwrap();
        let alpha = connection_difference(a, &b, &mut rng, 10).unwrap();
        let (hor, equi) = alpha.residuals(&mut rng, 10).unwrap();
        assert!(hor < 1e-12 && equi < 1e-7);
        let back = b.add_tensorial(&alpha);
        assert!(back.validate(&mut rng, 10).is_ok());
    }
}
