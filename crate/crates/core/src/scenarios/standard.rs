//! Ordinary principal bundles: a classical connection form is a
//! generalized principal connection for the flat `nu`.

use std::sync::Arc;

use rand::Rng;

use crate::bundles::{Derivative, LieGroupBundle, RightMultiplication, TotalPoint, TotalSpace, TotalTangent};
use crate::calculus::AlgebraOneForm;
use crate::connections::LieGroupBundleConnection;
use crate::error::{check_dim, Error, Result};
use crate::liegroup::AlgebraElement;
use crate::principal::{FormFn, GeneralizedPrincipalConnection, COMPLEMENTARITY_TOL, EQUIVARIANCE_TOL};

/// A principal bundle `X x G` with the connection form
/// `omega-hat = Ad_{h^-1} A-hat(u) + xi`.
#[derive(Clone)]
pub struct StandardPrincipalScenario {
    space: Arc<TotalSpace>,
    a_hat: AlgebraOneForm,
    nu: Arc<LieGroupBundleConnection>,
}

impl StandardPrincipalScenario {
    pub fn new(space: Arc<TotalSpace>, a_hat: AlgebraOneForm) -> Result<Self> {
        check_dim(space.base_dim(), a_hat.base_dim(), "connection form base")?;
        check_dim(space.algebra_dim(), a_hat.algebra_dim(), "connection form values")?;
        let bundle = LieGroupBundle::new(space.base().clone(), space.group().clone())?;
        Ok(Self {
            nu: Arc::new(LieGroupBundleConnection::trivial(bundle)),
            space,
            a_hat,
        })
    }

    pub fn space(&self) -> &Arc<TotalSpace> {
        &self.space
    }

    /// The classical form, or with `broken` the form without the `Ad`
    /// factor, which is not equivariant for non-abelian groups.
    pub fn form(&self, broken: bool) -> FormFn {
        let space = self.space.clone();
        let a = self.a_hat.clone();
        Arc::new(move |y: &TotalPoint, u: &TotalTangent| {
            let x = space.base_point(y);
            let val = a.eval(&x, &space.base_vector(u))?;
            let moved = if broken {
                val
            } else {
                space.group().adjoint_inv(&y.fiber, &val)?
            };
            Ok(moved + u.fiber.clone())
        })
    }

    /// The same form viewed as a generalized principal connection for the
    /// flat connection `nu_0`.
    pub fn generalized(&self, broken: bool) -> GeneralizedPrincipalConnection {
        GeneralizedPrincipalConnection::from_form(
            self.space.clone(),
            Arc::new(RightMultiplication),
            self.nu.clone(),
            if broken { "standard-broken" } else { "standard" },
            self.form(broken),
        )
    }

    /// Classical conditions, with the generator and `dR_g` written out
    /// directly: `omega(0, xi) = xi` and
    /// `omega_{y g}(U, Ad_{g^-1} xi) = Ad_{g^-1} omega_y(U, xi)`.
    pub fn classical_residuals<R: Rng + ?Sized>(&self, broken: bool, rng: &mut R, samples: usize) -> Result<(f64, f64)> {
        let form = self.form(broken);
        let space = &*self.space;
        let group = space.group();
        let (mut comp, mut equi): (f64, f64) = (0.0, 0.0);
        for _ in 0..samples {
            let y = space.sample_point(rng, 0.05);
            let xi = group.sample_algebra(rng, 1.0);
            let vertical = TotalTangent::vertical(space.quotient_dim(), xi.clone());
            comp = comp.max(form(&y, &vertical)?.distance(&xi));
            let g = group.sample(rng, 0.8);
            let u = space.sample_tangent(rng, 1.0);
            let yg = TotalPoint {
                quotient: y.quotient.clone(),
                fiber: group.compose(&y.fiber, &g),
            };
            let moved = TotalTangent {
                quotient: u.quotient.clone(),
                fiber: group.adjoint_inv(&g, &u.fiber)?,
            };
            let rhs = group.adjoint_inv(&g, &form(&y, &u)?)?;
            equi = equi.max(form(&yg, &moved)?.distance(&rhs));
        }
        Ok((comp, equi))
    }

    /// Residuals of both characterizations without a verdict.
    pub fn equivalence_report<R: Rng + ?Sized>(&self, broken: bool, rng: &mut R, samples: usize) -> Result<EquivalenceReport> {
        let (cc, ce) = self.classical_residuals(broken, rng, samples)?;
        let g = self.generalized(broken).residuals(rng, samples, Derivative::Analytic)?;
        Ok(EquivalenceReport {
            classical_complementarity: cc,
            classical_equivariance: ce,
            generalized_complementarity: g.complementarity,
            generalized_equivariance: g.equivariance,
        })
    }

    /// Checks that the form is a classical principal connection and a
    /// generalized principal connection for `nu_0`. Fails when either
    /// characterization fails.
    pub fn principal_equivalence_check<R: Rng + ?Sized>(
        &self,
        broken: bool,
        rng: &mut R,
        samples: usize,
    ) -> Result<EquivalenceReport> {
        let rep = self.equivalence_report(broken, rng, samples)?;
        let classical = rep.classical_ok();
        let generalized = rep.generalized_ok();
        if !(classical && generalized) {
            return Err(Error::EquivalenceViolation(format!(
                "classical {} (residual {:.3e}), generalized {} (residual {:.3e})",
                verdict(classical),
                rep.classical_complementarity.max(rep.classical_equivariance),
                verdict(generalized),
                rep.generalized_complementarity.max(rep.generalized_equivariance)
            )));
        }
        Ok(rep)
    }

    /// The generator of the action written out: `(0, xi)`.
    pub fn generator(&self, xi: &AlgebraElement) -> TotalTangent {
        TotalTangent::vertical(self.space.quotient_dim(), xi.clone())
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "fails"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub classical_complementarity: f64,
    pub classical_equivariance: f64,
    pub generalized_complementarity: f64,
    pub generalized_equivariance: f64,
}

impl EquivalenceReport {
    pub fn classical_ok(&self) -> bool {
        self.classical_complementarity <= COMPLEMENTARITY_TOL && self.classical_equivariance <= EQUIVARIANCE_TOL
    }

    pub fn generalized_ok(&self) -> bool {
        self.generalized_complementarity <= COMPLEMENTARITY_TOL && self.generalized_equivariance <= EQUIVARIANCE_TOL
    }

    pub fn max_residual(&self) -> f64 {
        self.classical_complementarity
            .max(self.classical_equivariance)
            .max(self.generalized_complementarity)
            .max(self.generalized_equivariance)
    }
}
