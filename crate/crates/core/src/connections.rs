//! Connections on a trivial Lie group bundle.
//!
//! A connection `nu` is described by its cocycle `h(x, g, u)`: the
//! horizontal lift of `u` at `(x, g)` is `(u, h(x, g, u))` right-trivialized
//! and `nu_g(u, eta) = eta - h(x, g, u)`. The connection is compatible with
//! the group structure exactly when `h(x, 1, u) = 0` and
//! `h(x, g k, u) = h(x, g, u) + Ad_g h(x, k, u)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::bundles::{
    jet_lift_action, Derivative, GroupJet, GroupTangent, LieGroupBundle, RightMultiplication,
    SectionJet, TotalPoint, TotalSpace, TotalTangent,
};
use crate::calculus::{integrate_on_group, integrate_vector, random_vector, AlgebraOneForm, BaseCurve, Integration, StepControl, FD_STEP};
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupDescriptor, GroupElement};

pub type CocycleFn =
    Arc<dyn Fn(&DVector<f64>, &GroupElement, &DVector<f64>) -> Result<AlgebraElement> + Send + Sync>;

#[derive(Clone)]
pub enum ConnectionKind {
    /// `h(x, g, u) = A_x(u) - Ad_g A_x(u)` for an algebra-valued one-form.
    PrincipalForm(AlgebraOneForm),
    /// Any cocycle supplied as a function.
    Custom { label: String, cocycle: CocycleFn },
}

/// An Ehresmann connection on `X x G`, possibly incompatible with the group
/// structure; use [`validate_group_connection`] to check.
#[derive(Clone)]
pub struct LieGroupBundleConnection {
    bundle: LieGroupBundle,
    kind: ConnectionKind,
}

impl std::fmt::Debug for LieGroupBundleConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LieGroupBundleConnection")
            .field("group", &self.bundle.group().name())
            .field("kind", &self.label())
            .finish()
    }
}

impl LieGroupBundleConnection {
    pub fn new(bundle: LieGroupBundle, kind: ConnectionKind) -> Result<Self> {
        if let ConnectionKind::PrincipalForm(a) = &kind {
            check_dim(bundle.base_dim(), a.base_dim(), "connection form base")?;
            check_dim(bundle.group().dim(), a.algebra_dim(), "connection form values")?;
        }
        Ok(Self { bundle, kind })
    }

    pub fn principal_form(bundle: LieGroupBundle, a: AlgebraOneForm) -> Result<Self> {
        Self::new(bundle, ConnectionKind::PrincipalForm(a))
    }

    /// The flat connection `h = 0`.
    pub fn trivial(bundle: LieGroupBundle) -> Self {
        let a = AlgebraOneForm::zero(bundle.base_dim(), bundle.group().dim());
        Self {
            bundle,
            kind: ConnectionKind::PrincipalForm(a),
        }
    }

    pub fn custom(
        bundle: LieGroupBundle,
        label: impl Into<String>,
        cocycle: impl Fn(&DVector<f64>, &GroupElement, &DVector<f64>) -> Result<AlgebraElement> + Send + Sync + 'static,
    ) -> Self {
        Self {
            bundle,
            kind: ConnectionKind::Custom {
                label: label.into(),
                cocycle: Arc::new(cocycle),
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ConnectionKind::PrincipalForm(_) => "principal-form".into(),
            ConnectionKind::Custom { label, .. } => label.clone(),
        }
    }

    pub fn bundle(&self) -> &LieGroupBundle {
        &self.bundle
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        self.bundle.group()
    }

    pub fn kind(&self) -> &ConnectionKind {
        &self.kind
    }

    /// Right-trivialized fiber velocity of the horizontal lift.
    pub fn cocycle(&self, x: &DVector<f64>, g: &GroupElement, u: &DVector<f64>) -> Result<AlgebraElement> {
        match &self.kind {
            ConnectionKind::PrincipalForm(form) => {
                let a = form.eval(x, u)?;
                let moved = self.group().adjoint(g, &a)?;
                Ok(a - moved)
            }
            ConnectionKind::Custom { cocycle, .. } => {
                check_dim(self.bundle.base_dim(), u.len(), "cocycle argument")?;
                cocycle(x, g, u)
            }
        }
    }

    /// The vertical-valued form `nu_g(u, eta) = eta - h(x, g, u)`.
    pub fn nu(&self, x: &DVector<f64>, g: &GroupElement, tangent: &GroupTangent) -> Result<AlgebraElement> {
        Ok(&tangent.right - &self.cocycle(x, g, &tangent.base)?)
    }

    pub fn horizontal_lift(&self, x: &DVector<f64>, g: &GroupElement, u: &DVector<f64>) -> Result<GroupTangent> {
        Ok(GroupTangent {
            base: u.clone(),
            right: self.cocycle(x, g, u)?,
        })
    }

    /// Matrix `K(x, u)` of the induced connection on the algebra bundle:
    /// `nabla_u xi = d xi(u) + K(x, u) xi`.
    pub fn algebra_coefficient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let group = self.group();
        match &self.kind {
            ConnectionKind::PrincipalForm(form) => Ok(-group.ad_matrix(&form.eval(x, u)?)),
            ConnectionKind::Custom { .. } => {
                let d = group.dim();
                let eps = 1e-5;
                let mut k = DMatrix::zeros(d, d);
                for j in 0..d {
                    let e = AlgebraElement::basis(d, j);
                    let hp = self.cocycle(x, &group.exp(&(&e * eps))?, u)?;
                    let hm = self.cocycle(x, &group.exp(&(&e * -eps))?, u)?;
                    k.set_column(j, &((hm.0 - hp.0) / (2.0 * eps)));
                }
                Ok(k)
            }
        }
    }
}

/// Residuals of the compatibility conditions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupConnectionReport {
    pub samples: usize,
    /// `|h(x, 1, u)|`: horizontal lifts at the unit are tangent to the
    /// unit section.
    pub unit: f64,
    /// `|h(x, g k, u) - h(x, g, u) - Ad_g h(x, k, u)|`.
    pub cocycle: f64,
    /// Gap between the jet of `nu` at `g k` and the product of the jets at
    /// `g` and `k`.
    pub jet_multiplicativity: f64,
}

impl GroupConnectionReport {
    pub fn max_residual(&self) -> f64 {
        self.unit.max(self.cocycle).max(self.jet_multiplicativity)
    }
}

/// Tolerance above which a connection is reported as incompatible.
pub const GROUP_CONNECTION_TOL: f64 = 1e-6;

/// Checks that a connection is a Lie group bundle connection on random
/// samples.
pub fn validate_group_connection<R: Rng + ?Sized>(
    nu: &LieGroupBundleConnection,
    rng: &mut R,
    samples: usize,
) -> Result<GroupConnectionReport> {
    let report = group_connection_residuals(nu, rng, samples)?;
    if report.max_residual() > GROUP_CONNECTION_TOL {
        return Err(Error::InvalidConnection(format!(
            "{}: unit {:.3e}, cocycle {:.3e}, jet multiplicativity {:.3e}",
            nu.label(),
            report.unit,
            report.cocycle,
            report.jet_multiplicativity
        )));
    }
    Ok(report)
}

/// Same residuals as [`validate_group_connection`] without the verdict.
pub fn group_connection_residuals<R: Rng + ?Sized>(
    nu: &LieGroupBundleConnection,
    rng: &mut R,
    samples: usize,
) -> Result<GroupConnectionReport> {
    let group = nu.group().clone();
    let base = nu.bundle().base().clone();
    let n = base.dim();
    let torsor = TotalSpace::new(base.clone(), None, group.clone())?;
    let mut rep = GroupConnectionReport {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let x = base.sample(rng, 0.0);
        let u = random_vector(rng, n, 1.0);
        let g = group.sample(rng, 0.8);
        let k = group.sample(rng, 0.8);
        rep.unit = rep.unit.max(nu.cocycle(&x, &group.identity(), &u)?.norm());
        let gk = group.compose(&g, &k);
        let lhs = nu.cocycle(&x, &gk, &u)?;
        let rhs = nu.cocycle(&x, &g, &u)? + group.adjoint(&g, &nu.cocycle(&x, &k, &u)?)?;
        rep.cocycle = rep.cocycle.max(lhs.distance(&rhs));

        let jet_g = connection_section_jet(nu, &x, &g)?;
        let jet_k = connection_group_jet(nu, &x, &k)?;
        let product = jet_lift_action(&torsor, &RightMultiplication, &jet_g, &jet_k, Derivative::Analytic)?;
        let direct = connection_section_jet(nu, &x, &gk)?;
        rep.jet_multiplicativity = rep.jet_multiplicativity.max(product.distance(&direct));
    }
    Ok(rep)
}

/// The jet `nu-hat(g)` of the horizontal section through `g`, viewed in the
/// bundle as a torsor over itself.
fn connection_section_jet(
    nu: &LieGroupBundleConnection,
    x: &DVector<f64>,
    g: &GroupElement,
) -> Result<SectionJet> {
    let n = x.len();
    let group = nu.group();
    let mut derivatives = Vec::with_capacity(n);
    for mu in 0..n {
        let mut e = DVector::zeros(n);
        e[mu] = 1.0;
        let right = nu.cocycle(x, g, &e)?;
        derivatives.push(TotalTangent {
            quotient: e,
            fiber: group.adjoint_inv(g, &right)?,
        });
    }
    Ok(SectionJet {
        point: TotalPoint {
            quotient: x.clone(),
            fiber: g.clone(),
        },
        derivatives,
    })
}

/// The jet `nu-hat(g)` as an element of the jet group.
pub fn connection_group_jet(nu: &LieGroupBundleConnection, x: &DVector<f64>, g: &GroupElement) -> Result<GroupJet> {
    let n = x.len();
    let mut derivatives = Vec::with_capacity(n);
    for mu in 0..n {
        let mut e = DVector::zeros(n);
        e[mu] = 1.0;
        derivatives.push(nu.cocycle(x, g, &e)?);
    }
    Ok(GroupJet {
        value: g.clone(),
        derivatives,
    })
}

fn require_curve(nu: &LieGroupBundleConnection, curve: &BaseCurve) -> Result<()> {
    curve.check(nu.bundle().base(), 64)
}

/// Parallel transport of `g0` along a base curve.
pub fn transport_group(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g0: &GroupElement,
    control: &StepControl,
) -> Result<Integration> {
    require_curve(nu, curve)?;
    transport_on_interval(nu, curve, g0, curve.interval(), control)
}

/// Transport over a sub-interval `(t0, t1)` of the curve, in either
/// direction; the curve is not re-validated.
pub fn transport_on_interval(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g0: &GroupElement,
    interval: (f64, f64),
    control: &StepControl,
) -> Result<Integration> {
    let group = nu.group().clone();
    let g0 = group.element(g0.0.clone())?;
    integrate_on_group(
        &group,
        |t, g| nu.cocycle(&curve.position(t), g, &curve.velocity(t)),
        &g0,
        interval,
        control,
    )
}

/// `|T(g k) - T(g) T(k)|` for the transport map `T` along the curve.
pub fn transport_multiplicativity(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g: &GroupElement,
    k: &GroupElement,
    control: &StepControl,
) -> Result<f64> {
    let group = nu.group();
    let tg = transport_group(nu, curve, g, control)?.end;
    let tk = transport_group(nu, curve, k, control)?.end;
    let tgk = transport_group(nu, curve, &group.compose(g, k), control)?.end;
    Ok(tgk.distance(&group.compose(&tg, &tk)))
}

/// Residuals of `T(1) = 1`, `T(g^-1) = T(g)^-1` and of returning along the
/// reversed curve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransportIdentityReport {
    pub unit: f64,
    pub inverse: f64,
    pub reversal: f64,
}

pub fn transport_identities(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g: &GroupElement,
    control: &StepControl,
) -> Result<TransportIdentityReport> {
    let group = nu.group();
    let unit = transport_group(nu, curve, &group.identity(), control)?
        .end
        .distance(&group.identity());
    let tg = transport_group(nu, curve, g, control)?.end;
    let tinv = transport_group(nu, curve, &group.inverse(g)?, control)?.end;
    let inverse = tinv.distance(&group.inverse(&tg)?);
    let back = transport_group(nu, &curve.reversed(), &tg, control)?.end;
    Ok(TransportIdentityReport {
        unit,
        inverse,
        reversal: back.distance(g),
    })
}

/// Algebra transport computed in two independent ways.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraTransport {
    /// Solution of the linear transport equation for the induced
    /// connection on the algebra bundle.
    pub ode: AlgebraElement,
    /// Derivative at `eps = 0` of the group transport of `exp(eps xi)`.
    pub finite_difference: AlgebraElement,
}

impl AlgebraTransport {
    pub fn gap(&self) -> f64 {
        self.ode.distance(&self.finite_difference)
    }
}

/// Tolerance for agreement of the two algebra transport paths, relative to
/// `max(1, |xi|)`.
pub const ALGEBRA_PATH_TOL: f64 = 1e-5;

/// Parallel transport in the algebra bundle. Fails when the two paths
/// disagree.
pub fn algebra_transport(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    xi: &AlgebraElement,
    control: &StepControl,
) -> Result<AlgebraTransport> {
    require_curve(nu, curve)?;
    let out = AlgebraTransport {
        ode: algebra_transport_ode(nu, curve, xi, curve.interval(), control.step)?,
        finite_difference: algebra_transport_fd(nu, curve, xi, control)?,
    };
    if out.gap() > ALGEBRA_PATH_TOL * xi.norm().max(1.0) {
        return Err(Error::Inconsistency(format!(
            "algebra transport paths differ by {:.3e}",
            out.gap()
        )));
    }
    Ok(out)
}

/// Linear transport `xi' = -K(x, x') xi` over `interval`.
pub fn algebra_transport_ode(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    xi: &AlgebraElement,
    interval: (f64, f64),
    step: f64,
) -> Result<AlgebraElement> {
    check_dim(nu.group().dim(), xi.dim(), "transported element")?;
    let y = integrate_vector(
        |t, v| {
            let k = nu.algebra_coefficient(&curve.position(t), &curve.velocity(t))?;
            Ok(-(k * v))
        },
        &xi.0,
        interval,
        step,
    )?;
    Ok(AlgebraElement(y))
}

/// Derivative of the group transport at the unit in direction `xi`.
pub fn algebra_transport_fd(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    xi: &AlgebraElement,
    control: &StepControl,
) -> Result<AlgebraElement> {
    let group = nu.group();
    let eps = 1e-4 / xi.norm().max(1.0);
    let plus = transport_group(nu, curve, &group.exp(&(xi * eps))?, control)?.end;
    let minus = transport_group(nu, curve, &group.exp(&(xi * -eps))?, control)?.end;
    Ok(AlgebraElement(
        (group.log(&plus)?.0 - group.log(&minus)?.0) / (2.0 * eps),
    ))
}

/// `|P(a xi + b eta) - a P(xi) - b P(eta)|` for the finite-difference
/// path `P`.
pub fn algebra_transport_linearity(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    xi: &AlgebraElement,
    eta: &AlgebraElement,
    a: f64,
    b: f64,
    control: &StepControl,
) -> Result<f64> {
    let combo = xi * a + eta * b;
    let lhs = algebra_transport_fd(nu, curve, &combo, control)?;
    let rhs = algebra_transport_fd(nu, curve, xi, control)? * a + algebra_transport_fd(nu, curve, eta, control)? * b;
    Ok(lhs.distance(&rhs))
}

/// `|P(Ad_g xi) - Ad_{T(g)} P(xi)|`.
pub fn ad_compatibility(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g: &GroupElement,
    xi: &AlgebraElement,
    control: &StepControl,
) -> Result<f64> {
    require_curve(nu, curve)?;
    let group = nu.group();
    let span = curve.interval();
    let lhs = algebra_transport_ode(nu, curve, &group.adjoint(g, xi)?, span, control.step)?;
    let tg = transport_group(nu, curve, g, control)?.end;
    let rhs = group.adjoint(&tg, &algebra_transport_ode(nu, curve, xi, span, control.step)?)?;
    Ok(lhs.distance(&rhs))
}

/// Covariant derivative of a curve in the bundle along `curve` at `t`,
/// right-trivialized: `d/ds` at 0 of the transport of `g(t + s)` back to
/// `x(t)`.
pub fn covariant_derivative_group(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g_path: &dyn Fn(f64) -> Result<GroupElement>,
    t: f64,
    s: f64,
) -> Result<AlgebraElement> {
    let group = nu.group();
    let g_t = g_path(t)?;
    let ginv = group.inverse(&g_t)?;
    let back = |sig: f64| -> Result<DVector<f64>> {
        let control = StepControl::with_step(sig.abs() / 4.0);
        let b = transport_on_interval(nu, curve, &g_path(t + sig)?, (t + sig, t), &control)?.end;
        Ok(group.log(&group.compose(&b, &ginv))?.0)
    };
    Ok(AlgebraElement((back(s)? - back(-s)?) / (2.0 * s)))
}

/// Covariant derivative of a curve in the algebra bundle along `curve`.
pub fn covariant_derivative_algebra(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    xi_path: &dyn Fn(f64) -> Result<AlgebraElement>,
    t: f64,
    s: f64,
) -> Result<AlgebraElement> {
    let back = |sig: f64| -> Result<DVector<f64>> {
        Ok(algebra_transport_ode(nu, curve, &xi_path(t + sig)?, (t + sig, t), sig.abs() / 4.0)?.0)
    };
    Ok(AlgebraElement((back(s)? - back(-s)?) / (2.0 * s)))
}

/// Residual of the product rule
/// `nabla(Ad_g xi) = Ad_g nabla xi + [nabla g g^-1, Ad_g xi]` at `t`.
pub fn covariant_bracket_residual(
    nu: &LieGroupBundleConnection,
    curve: &BaseCurve,
    g_path: &dyn Fn(f64) -> Result<GroupElement>,
    xi_path: &dyn Fn(f64) -> Result<AlgebraElement>,
    t: f64,
) -> Result<f64> {
    let group = nu.group().clone();
    let (a, b) = curve.interval();
    let s = 1e-4 * (b - a);
    let conj = |tau: f64| -> Result<AlgebraElement> { group.adjoint(&g_path(tau)?, &xi_path(tau)?) };
    let lhs = covariant_derivative_algebra(nu, curve, &conj, t, s)?;
    let dg = covariant_derivative_group(nu, curve, g_path, t, s)?;
    let dxi = covariant_derivative_algebra(nu, curve, xi_path, t, s)?;
    let g_t = g_path(t)?;
    let rhs = group.adjoint(&g_t, &dxi)? + group.bracket(&dg, &group.adjoint(&g_t, &xi_path(t)?)?);
    Ok(lhs.distance(&rhs))
}

/// Residual of `dM(Hor_g u, U_k) = Hor_{g k} u + dL_g nu_k(U_k)` for the
/// group multiplication `M`, with the left side by finite differences.
pub fn horizontal_product_rule(
    nu: &LieGroupBundleConnection,
    x: &DVector<f64>,
    g: &GroupElement,
    k: &GroupElement,
    uk: &GroupTangent,
) -> Result<f64> {
    let group = nu.group();
    let bundle = nu.bundle();
    let hor = nu.horizontal_lift(x, g, &uk.base)?;
    let gk = group.compose(g, k);
    let gk_inv = group.inverse(&gk)?;
    let at = |t: f64| -> Result<DVector<f64>> {
        let (_, gt) = bundle.flow(x, g, &hor, t)?;
        let (_, kt) = bundle.flow(x, k, uk, t)?;
        Ok(group.log(&group.compose(&group.compose(&gt, &kt), &gk_inv))?.0)
    };
    let lhs = AlgebraElement((at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP));
    let rhs = nu.cocycle(x, &gk, &uk.base)? + group.adjoint(g, &nu.nu(x, k, uk)?)?;
    Ok(lhs.distance(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{ChartDomain, Polynomial};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle() -> LieGroupBundle {
        LieGroupBundle::new(ChartDomain::cube("X", 2, 1.0).unwrap(), Arc::new(GroupDescriptor::so3())).unwrap()
    }

    fn form() -> AlgebraOneForm {
        let p = |c: f64, e: &[u32]| Polynomial::zero().with_term(e, c);
        AlgebraOneForm::polynomial(
            vec![
                vec![p(0.3, &[0, 1]), Polynomial::zero(), Polynomial::constant(2, 1.0)],
                vec![Polynomial::zero(), p(0.5, &[1, 0]), p(0.2, &[1, 1])],
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn principal_form_cocycle_is_exact() {
        let nu = LieGroupBundleConnection::principal_form(bundle(), form()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rep = validate_group_connection(&nu, &mut rng, 25).unwrap();
        assert!(rep.max_residual() < 1e-12, "{rep:?}");
    }

    #[test]
    fn constant_shift_is_rejected() {
        let c = AlgebraElement::from_slice(&[0.1, 0.0, 0.0]);
        let nu = LieGroupBundleConnection::custom(bundle(), "shift", move |_, _, u| Ok(&c * u[0]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            validate_group_connection(&nu, &mut rng, 10),
            Err(Error::InvalidConnection(_))
        ));
    }

    #[test]
    fn coefficient_from_differences_matches_closed_form() {
        let nu = LieGroupBundleConnection::principal_form(bundle(), form()).unwrap();
        let h = nu.clone();
        let custom = LieGroupBundleConnection::custom(bundle(), "copy", move |x, g, u| h.cocycle(x, g, u));
        let x = DVector::from_vec(vec![0.2, -0.4]);
        let u = DVector::from_vec(vec![0.7, 0.1]);
        let a = nu.algebra_coefficient(&x, &u).unwrap();
        let b = custom.algebra_coefficient(&x, &u).unwrap();
        assert!((a - b).norm() < 1e-8);
    }

    #[test]
    fn transport_along_a_point_curve_is_the_identity_map() {
        let nu = LieGroupBundleConnection::principal_form(bundle(), form()).unwrap();
        let p = DVector::from_vec(vec![0.1, 0.1]);
        let curve = BaseCurve::line(p.clone(), p).unwrap();
        let g = nu.group().sample(&mut ChaCha8Rng::seed_from_u64(4), 0.8);
        let out = transport_group(&nu, &curve, &g, &StepControl::default()).unwrap();
        assert!(out.end.distance(&g) < 1e-15);
    }
}
