//! Affine connections on a vector bundle `E = X x R^m`, viewed as
//! generalized principal connections for the linear connection on the
//! translation bundle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::bundles::{LieGroupBundle, TotalPoint, TotalSpace, TotalTangent};
use crate::calculus::{random_vector, AlgebraOneForm, ChartDomain, Polynomial};
use crate::connections::LieGroupBundleConnection;
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupDescriptor};
use crate::principal::{GeneralizedPrincipalConnection, LocalChart};

type MatrixField = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;

/// The affine connection `omega = dy + N(x) y + Gamma(x)` on `X x R^m`.
#[derive(Clone)]
pub struct AffineScenario {
    space: Arc<TotalSpace>,
    n_coeffs: MatrixField,
    gamma: AlgebraOneForm,
    constant: bool,
    nu: Arc<LieGroupBundleConnection>,
}

/// Tolerance for the reconstruction of the local expression.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

impl AffineScenario {
    /// `n_table[mu][a][b]` is entry `(a, b)` of `N_mu(x)`; `gamma_table[mu][a]`
    /// is component `a` of `Gamma_mu(x)`.
    pub fn new(base: ChartDomain, n_table: Vec<Vec<Vec<Polynomial>>>, gamma_table: Vec<Vec<Polynomial>>) -> Result<Self> {
        let n = base.dim();
        check_dim(n, n_table.len(), "linear coefficients")?;
        check_dim(n, gamma_table.len(), "affine coefficients")?;
        let m = gamma_table.first().map_or(0, |r| r.len());
        for rows in &n_table {
            check_dim(m, rows.len(), "linear coefficient rows")?;
            for r in rows {
                check_dim(m, r.len(), "linear coefficient columns")?;
            }
        }
        let constant = n_table.iter().flatten().flatten().all(Polynomial::is_constant)
            && gamma_table.iter().flatten().all(Polynomial::is_constant);
        let n_coeffs: MatrixField = Arc::new(move |x: &DVector<f64>| {
            n_table
                .iter()
                .map(|rows| DMatrix::from_fn(m, m, |a, b| rows[a][b].eval(x.as_slice())))
                .collect()
        });
        let gamma = AlgebraOneForm::polynomial(gamma_table, m)?;
        let group = Arc::new(GroupDescriptor::translations(m)?);
        let space = Arc::new(TotalSpace::new(base.clone(), None, group.clone())?);
        let bundle = LieGroupBundle::new(base, group)?;
        let nf = n_coeffs.clone();
        let nu = LieGroupBundleConnection::custom(bundle, "linear", move |x, g, u| {
            let m = g.0.nrows() - 1;
            let v = g.0.view((0, m), (m, 1)).into_owned();
            Ok(AlgebraElement(-(contract(&nf(x), u) * v).column(0).into_owned()))
        });
        Ok(Self {
            space,
            n_coeffs,
            gamma,
            constant,
            nu: Arc::new(nu),
        })
    }

    pub fn space(&self) -> &Arc<TotalSpace> {
        &self.space
    }

    pub fn nu(&self) -> &Arc<LieGroupBundleConnection> {
        &self.nu
    }

    pub fn fiber_dim(&self) -> usize {
        self.space.algebra_dim()
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// `N(x, u) = sum_mu u^mu N_mu(x)`.
    pub fn linear_part(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        contract(&(self.n_coeffs)(x), u)
    }

    pub fn gamma(&self) -> &AlgebraOneForm {
        &self.gamma
    }

    /// The canonical connection with shift `Gamma`.
    pub fn connection(&self) -> Result<GeneralizedPrincipalConnection> {
        GeneralizedPrincipalConnection::canonical(
            self.space.clone(),
            self.nu.clone(),
            vec![LocalChart::reference(Some(self.gamma.clone()))],
        )
    }

    /// The local expression `w + N(x, u) y + Gamma(x, u)` written out.
    pub fn local_expression(&self, x: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(w + self.linear_part(x, u) * y + self.gamma.eval(x, u)?.0)
    }

    /// Checks that a generalized principal connection for the linear
    /// connection has the local form `dy + N y + Gamma_fit`, with
    /// `Gamma_fit` read off at the zero section. Fails when the
    /// reconstruction residual exceeds [`RECONSTRUCTION_TOL`].
    pub fn affine_equivalence_check<R: Rng + ?Sized>(
        &self,
        omega: &GeneralizedPrincipalConnection,
        rng: &mut R,
        samples: usize,
    ) -> Result<AffineReport> {
        let space = &*self.space;
        let group = space.group();
        let n = space.base_dim();
        let m = self.fiber_dim();
        let point = |x: &DVector<f64>, y: &DVector<f64>| -> Result<TotalPoint> {
            Ok(TotalPoint {
                quotient: x.clone(),
                fiber: group.exp(&AlgebraElement(y.clone()))?,
            })
        };
        let tangent = |u: &DVector<f64>, w: &DVector<f64>| TotalTangent {
            quotient: u.clone(),
            fiber: AlgebraElement(w.clone()),
        };
        let mut rep = AffineReport {
            samples,
            ..Default::default()
        };
        for _ in 0..samples {
            let x = space.base().sample(rng, 0.05);
            let y = random_vector(rng, m, 2.0);
            let v = random_vector(rng, m, 2.0);
            let u = random_vector(rng, n, 1.0);
            let w = random_vector(rng, m, 1.0);
            let z = random_vector(rng, m, 1.0);
            let lhs = omega.eval(&point(&x, &(&y + &v))?, &tangent(&u, &(&w + &z)))?;
            let nu_v = &z + self.linear_part(&x, &u) * &v;
            let rhs = omega.eval(&point(&x, &y)?, &tangent(&u, &w))?.0 + nu_v;
            rep.equivariance = rep.equivariance.max((lhs.0 - rhs).norm());

            let gamma_fit = omega.eval(&point(&x, &DVector::zeros(m))?, &tangent(&u, &DVector::zeros(m)))?;
            let rebuilt = &w + self.linear_part(&x, &u) * &y + gamma_fit.0;
            let direct = omega.eval(&point(&x, &y)?, &tangent(&u, &w))?;
            rep.reconstruction = rep.reconstruction.max((direct.0 - rebuilt).norm());
        }
        if rep.reconstruction > RECONSTRUCTION_TOL {
            return Err(Error::EquivalenceViolation(format!(
                "form is not of the shape dy + N y + Gamma (residual {:.3e})",
                rep.reconstruction
            )));
        }
        Ok(rep)
    }

    /// Transport of the fiber vector `y0` along the straight line from `x0`
    /// to `x1` for constant coefficients, in closed form: the horizontal
    /// equation `y' = -N(d) y - Gamma(d)` solved with an augmented matrix
    /// exponential.
    pub fn constant_transport(&self, x0: &DVector<f64>, x1: &DVector<f64>, y0: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.constant {
            return Err(Error::Usage("closed-form transport needs constant coefficients".into()));
        }
        let m = self.fiber_dim();
        let d = x1 - x0;
        let mut aug = DMatrix::zeros(m + 1, m + 1);
        aug.view_mut((0, 0), (m, m)).copy_from(&(-self.linear_part(x0, &d)));
        aug.view_mut((0, m), (m, 1)).copy_from(&(-self.gamma.eval(x0, &d)?.0));
        let e = aug.exp();
        let mut start = DVector::zeros(m + 1);
        start.rows_mut(0, m).copy_from(y0);
        start[m] = 1.0;
        Ok((e * start).rows(0, m).into_owned())
    }
}

fn contract(coeffs: &[DMatrix<f64>], u: &DVector<f64>) -> DMatrix<f64> {
    let m = coeffs.first().map_or(0, |c| c.nrows());
    let mut out = DMatrix::zeros(m, m);
    for (c, s) in coeffs.iter().zip(u.iter()) {
        out += c * *s;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineReport {
    pub samples: usize,
    /// `|omega_{y+v}(u, w+z) - omega_y(u, w) - nu_v(u, z)|`.
    pub equivariance: f64,
    /// Gap between the form and `dy + N y + Gamma_fit`.
    pub reconstruction: f64,
}
