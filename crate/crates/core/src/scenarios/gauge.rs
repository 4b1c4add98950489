//! Jets of gauge transformations and of connections at a single base
//! point, in a trivialization `P = X x G`.
//!
//! A first jet of a gauge transformation is `(g, xi)` with `xi_mu` the
//! right-trivialized derivative along `dx^mu`; a first jet of a connection
//! is `(A_mu, DA)` with `DA(mu, nu) = d A_mu / d x^nu`. The same index
//! convention is used for every two-index slot.

use std::sync::Arc;

use rand::Rng;

use crate::calculus::BiCovector;
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupDescriptor, GroupElement};

/// An element of `T*X (x) g` at one point.
pub type Covector = Vec<AlgebraElement>;

fn covector_distance(a: &[AlgebraElement], b: &[AlgebraElement]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y)).fold(0.0, f64::max)
}

/// The jet groups over a point of an `n`-dimensional base.
#[derive(Clone, Debug)]
pub struct JetGaugeGroup {
    group: Arc<GroupDescriptor>,
    n: usize,
}

/// A point `(g, xi)` of the first jet bundle of the adjoint group bundle;
/// the same pair also stands for a point `(h, A)` of the first jet bundle
/// of `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetGaugeElement {
    pub g: GroupElement,
    pub xi: Covector,
}

/// An element `(eta, phi)` of the Lie algebra of the jet group.
#[derive(Clone, Debug, PartialEq)]
pub struct JetGaugeAlgebraElement {
    pub eta: AlgebraElement,
    pub phi: Covector,
}

/// A point `(g, xi, eta, phi)` of the jets of sections of the first jet
/// bundle: a jet `(g, xi)`, the right-trivialized derivative `eta` of `g`
/// and the derivative `phi(mu, nu) = d xi_mu / d x^nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetOfJet {
    pub g: GroupElement,
    pub xi: Covector,
    pub eta: Covector,
    pub phi: BiCovector,
}

impl JetOfJet {
    pub fn distance(&self, other: &Self) -> f64 {
        self.g
            .distance(&other.g)
            .max(covector_distance(&self.xi, &other.xi))
            .max(covector_distance(&self.eta, &other.eta))
            .max(self.phi.sub(&other.phi).max_norm())
    }
}

impl JetGaugeElement {
    pub fn distance(&self, other: &Self) -> f64 {
        self.g.distance(&other.g).max(covector_distance(&self.xi, &other.xi))
    }
}

impl JetGaugeGroup {
    pub fn new(group: Arc<GroupDescriptor>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("jet groups need a base of positive dimension".into()));
        }
        Ok(Self { group, n })
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    fn check(&self, a: &JetGaugeElement) -> Result<()> {
        check_dim(self.n, a.xi.len(), "jet covector")
    }

    pub fn identity(&self) -> JetGaugeElement {
        JetGaugeElement {
            g: self.group.identity(),
            xi: vec![self.group.zero(); self.n],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JetGaugeElement {
        JetGaugeElement {
            g: self.group.sample(rng, 0.8),
            xi: (0..self.n).map(|_| self.group.sample_algebra(rng, 1.0)).collect(),
        }
    }

    pub fn sample_algebra<R: Rng + ?Sized>(&self, rng: &mut R) -> JetGaugeAlgebraElement {
        JetGaugeAlgebraElement {
            eta: self.group.sample_algebra(rng, 1.0),
            phi: (0..self.n).map(|_| self.group.sample_algebra(rng, 1.0)).collect(),
        }
    }

    pub fn sample_bicovector<R: Rng + ?Sized>(&self, rng: &mut R) -> BiCovector {
        BiCovector::from_fn(self.n, self.group.dim(), |_, _| self.group.sample_algebra(rng, 1.0))
    }

    pub fn sample_jet_of_jet<R: Rng + ?Sized>(&self, rng: &mut R) -> JetOfJet {
        let a = self.sample(rng);
        JetOfJet {
            g: a.g,
            xi: a.xi,
            eta: (0..self.n).map(|_| self.group.sample_algebra(rng, 1.0)).collect(),
            phi: self.sample_bicovector(rng),
        }
    }

    fn ad_covector(&self, g: &GroupElement, c: &[AlgebraElement]) -> Result<Covector> {
        c.iter().map(|v| self.group.adjoint(g, v)).collect()
    }

    fn ad_bicovector(&self, g: &GroupElement, b: &BiCovector) -> Result<BiCovector> {
        let mut out = BiCovector::zeros(self.n, self.group.dim());
        for mu in 0..self.n {
            for nu in 0..self.n {
                out.set(mu, nu, &self.group.adjoint(g, &b.get(mu, nu))?);
            }
        }
        Ok(out)
    }

    /// Semidirect product `(g, xi)(g', xi') = (g g', xi + Ad_g xi')`.
    pub fn mul(&self, a: &JetGaugeElement, b: &JetGaugeElement) -> Result<JetGaugeElement> {
        self.check(a)?;
        self.check(b)?;
        let moved = self.ad_covector(&a.g, &b.xi)?;
        Ok(JetGaugeElement {
            g: self.group.compose(&a.g, &b.g),
            xi: a.xi.iter().zip(&moved).map(|(x, y)| x + y).collect(),
        })
    }

    /// `(g, xi)^-1 = (g^-1, -Ad_{g^-1} xi)`.
    pub fn inverse(&self, a: &JetGaugeElement) -> Result<JetGaugeElement> {
        self.check(a)?;
        let ginv = self.group.inverse(&a.g)?;
        Ok(JetGaugeElement {
            xi: self.ad_covector(&ginv, &a.xi)?.into_iter().map(|v| -v).collect(),
            g: ginv,
        })
    }

    /// Adjoint action on the jet algebra:
    /// `Ad_(g, xi)(eta, phi) = (Ad_g eta, Ad_g phi - [Ad_g eta, xi])`.
    pub fn adjoint(&self, a: &JetGaugeElement, v: &JetGaugeAlgebraElement) -> Result<JetGaugeAlgebraElement> {
        self.check(a)?;
        let eta = self.group.adjoint(&a.g, &v.eta)?;
        let phi = self
            .ad_covector(&a.g, &v.phi)?
            .into_iter()
            .zip(&a.xi)
            .map(|(p, x)| p - self.group.bracket(&eta, x))
            .collect();
        Ok(JetGaugeAlgebraElement { eta, phi })
    }

    /// The adjoint action by central differences of
    /// `t -> a (exp(t eta), t phi) a^-1`.
    pub fn adjoint_fd(&self, a: &JetGaugeElement, v: &JetGaugeAlgebraElement) -> Result<JetGaugeAlgebraElement> {
        let h = 1e-5;
        let ainv = self.inverse(a)?;
        let at = |t: f64| -> Result<JetGaugeElement> {
            let b = JetGaugeElement {
                g: self.group.exp(&(&v.eta * t))?,
                xi: v.phi.iter().map(|p| p * t).collect(),
            };
            self.mul(&self.mul(a, &b)?, &ainv)
        };
        let (p, m) = (at(h)?, at(-h)?);
        let eta = (self.group.log(&p.g)? - self.group.log(&m.g)?) * (1.0 / (2.0 * h));
        let phi = p
            .xi
            .iter()
            .zip(&m.xi)
            .map(|(x, y)| (x - y) * (1.0 / (2.0 * h)))
            .collect();
        Ok(JetGaugeAlgebraElement { eta, phi })
    }

    /// Action on jets of connections, `(g, xi) . (h, A) = (g h, Ad_g A + xi)`.
    pub fn act(&self, a: &JetGaugeElement, p: &JetGaugeElement) -> Result<JetGaugeElement> {
        self.mul(a, p)
    }

    /// Product in the jet group of the jet group bundle: the jet of the
    /// pointwise product of sections,
    /// `(g g', xi + Ad_g xi', eta + Ad_g eta', phi + Ad_g phi' + [eta_nu, Ad_g xi'_mu])`.
    pub fn mul2(&self, a: &JetOfJet, b: &JetOfJet) -> Result<JetOfJet> {
        self.extended_action(a, b)
    }

    /// The jet-extended action `(g, xi, eta, phi) . (h, A, chi, alpha)`
    /// `= (g h, Ad_g A + xi, Ad_g chi + eta, Ad_g alpha + phi + [eta_nu, Ad_g A_mu])`.
    pub fn extended_action(&self, a: &JetOfJet, p: &JetOfJet) -> Result<JetOfJet> {
        let n = self.n;
        for j in [a, p] {
            check_dim(n, j.xi.len(), "jet covector")?;
            check_dim(n, j.eta.len(), "jet derivative")?;
            check_dim(n, j.phi.base_dim(), "jet second slot")?;
        }
        let ad_a = self.ad_covector(&a.g, &p.xi)?;
        let ad_chi = self.ad_covector(&a.g, &p.eta)?;
        let ad_alpha = self.ad_bicovector(&a.g, &p.phi)?;
        let phi = BiCovector::from_fn(n, self.group.dim(), |mu, nu| {
            ad_alpha.get(mu, nu) + a.phi.get(mu, nu) + self.group.bracket(&a.eta[nu], &ad_a[mu])
        });
        Ok(JetOfJet {
            g: self.group.compose(&a.g, &p.g),
            xi: ad_a.iter().zip(&a.xi).map(|(x, y)| x + y).collect(),
            eta: ad_chi.iter().zip(&a.eta).map(|(x, y)| x + y).collect(),
            phi,
        })
    }

    /// The lift `(g, xi) -> (g, xi, xi, 0)`.
    pub fn gauge_group_connection(&self, a: &JetGaugeElement) -> Result<JetOfJet> {
        self.check(a)?;
        Ok(JetOfJet {
            g: a.g.clone(),
            xi: a.xi.clone(),
            eta: a.xi.clone(),
            phi: BiCovector::zeros(self.n, self.group.dim()),
        })
    }

    /// `|lift(a b) - lift(a) lift(b)|` in the jet group of the jet group
    /// bundle.
    pub fn lift_multiplicativity(&self, a: &JetGaugeElement, b: &JetGaugeElement) -> Result<f64> {
        let lhs = self.gauge_group_connection(&self.mul(a, b)?)?;
        let rhs = self.mul2(&self.gauge_group_connection(a)?, &self.gauge_group_connection(b)?)?;
        Ok(lhs.distance(&rhs))
    }

    /// A section of the jet bundle through `(g, xi)` at `x = 0` with
    /// prescribed derivatives `eta` and `phi`, evaluated at `x`.
    pub fn realize(&self, j: &JetOfJet, x: &[f64]) -> Result<JetGaugeElement> {
        let mut gen = self.group.zero();
        for (nu, e) in j.eta.iter().enumerate() {
            gen += &(e * x[nu]);
        }
        let xi = (0..self.n)
            .map(|mu| {
                let mut v = j.xi[mu].clone();
                for (nu, s) in x.iter().enumerate() {
                    v += &(j.phi.get(mu, nu) * *s);
                }
                v
            })
            .collect();
        Ok(JetGaugeElement {
            g: self.group.compose(&self.group.exp(&gen)?, &j.g),
            xi,
        })
    }

    /// The first jet at `x = 0` of a section, by central differences.
    pub fn jet_at_origin(&self, section: &dyn Fn(&[f64]) -> Result<JetGaugeElement>) -> Result<JetOfJet> {
        let n = self.n;
        let h = 1e-5;
        let c = section(&vec![0.0; n])?;
        let ginv = self.group.inverse(&c.g)?;
        let mut eta = Vec::with_capacity(n);
        let mut phi = BiCovector::zeros(n, self.group.dim());
        for nu in 0..n {
            let mut xp = vec![0.0; n];
            let mut xm = vec![0.0; n];
            xp[nu] = h;
            xm[nu] = -h;
            let (p, m) = (section(&xp)?, section(&xm)?);
            let lp = self.group.log(&self.group.compose(&p.g, &ginv))?;
            let lm = self.group.log(&self.group.compose(&m.g, &ginv))?;
            eta.push((lp - lm) * (1.0 / (2.0 * h)));
            for mu in 0..n {
                phi.set(mu, nu, &((&p.xi[mu] - &m.xi[mu]) * (1.0 / (2.0 * h))));
            }
        }
        Ok(JetOfJet {
            g: c.g,
            xi: c.xi,
            eta,
            phi,
        })
    }

    /// Gap between the closed-form extended action and the jet of the
    /// pointwise action of two realized sections.
    pub fn extended_action_fd_residual(&self, a: &JetOfJet, p: &JetOfJet) -> Result<f64> {
        let sa = |x: &[f64]| self.realize(a, x);
        let sp = |x: &[f64]| self.realize(p, x);
        let prod = |x: &[f64]| self.act(&sa(x)?, &sp(x)?);
        let fd = self.jet_at_origin(&prod)?;
        Ok(fd.distance(&self.extended_action(a, p)?))
    }
}

/// An equivariant connection on the jet bundle of `P` built from sections
/// `f` of `T*X (x) g` and `g` of `T*X (x) T*X (x) g`, evaluated at one point:
/// `omega-hat(h, A) = (h, A, Ad_h f + A, Ad_h g)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedConnection {
    pub f: Covector,
    pub g: BiCovector,
    /// Drop the `Ad_h` factors; a negative control.
    pub broken: bool,
}

impl ClassifiedConnection {
    pub fn eval(&self, jets: &JetGaugeGroup, p: &JetGaugeElement) -> Result<JetOfJet> {
        let (f, g) = if self.broken {
            (self.f.clone(), self.g.clone())
        } else {
            (jets.ad_covector(&p.g, &self.f)?, jets.ad_bicovector(&p.g, &self.g)?)
        };
        Ok(JetOfJet {
            g: p.g.clone(),
            xi: p.xi.clone(),
            eta: f.iter().zip(&p.xi).map(|(a, b)| a + b).collect(),
            phi: g,
        })
    }

    /// `|omega-hat(a . p) - lift(a) . omega-hat(p)|`.
    pub fn equivariance_residual(&self, jets: &JetGaugeGroup, a: &JetGaugeElement, p: &JetGaugeElement) -> Result<f64> {
        let lhs = self.eval(jets, &jets.act(a, p)?)?;
        let rhs = jets.extended_action(&jets.gauge_group_connection(a)?, &self.eval(jets, p)?)?;
        Ok(lhs.distance(&rhs))
    }
}

/// Reads `f` and `g` off a connection given as a black box, at the point
/// `(1, 0)`, and rebuilds it.
pub fn reconstruct_classified(
    jets: &JetGaugeGroup,
    omega: &dyn Fn(&JetGaugeElement) -> Result<JetOfJet>,
) -> Result<ClassifiedConnection> {
    let at_unit = omega(&jets.identity())?;
    Ok(ClassifiedConnection {
        f: at_unit.eta,
        g: at_unit.phi,
        broken: false,
    })
}

/// Largest gap between a black-box connection and its reconstruction on
/// the given points.
pub fn reconstruction_residual(
    jets: &JetGaugeGroup,
    omega: &dyn Fn(&JetGaugeElement) -> Result<JetOfJet>,
    points: &[JetGaugeElement],
) -> Result<f64> {
    let rebuilt = reconstruct_classified(jets, omega)?;
    let mut worst: f64 = 0.0;
    for p in points {
        worst = worst.max(omega(p)?.distance(&rebuilt.eval(jets, p)?));
    }
    Ok(worst)
}

/// First jet of a connection at a point: `A_mu` and `DA(mu, nu) = d A_mu / d x^nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionJet {
    pub a: Covector,
    pub da: BiCovector,
}

impl ConnectionJet {
    pub fn distance(&self, other: &Self) -> f64 {
        covector_distance(&self.a, &other.a).max(self.da.sub(&other.da).max_norm())
    }
}

/// A second jet at the point of a gauge transformation equal to the unit
/// there: first derivatives `xi` and symmetric second derivatives `sigma`
/// in exponential coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSecondJet {
    xi: Covector,
    sigma: BiCovector,
}

impl GaugeSecondJet {
    pub fn new(xi: Covector, sigma: BiCovector) -> Result<Self> {
        check_dim(sigma.base_dim(), xi.len(), "second jet")?;
        let asym = sigma.sub(&sigma.transpose()).max_norm();
        if asym > 1e-12 {
            return Err(Error::Usage(format!("second derivatives are not symmetric ({asym:.3e})")));
        }
        Ok(Self { xi, sigma })
    }

    /// Builds a jet from any `sigma`, keeping its symmetric part.
    pub fn symmetrized(xi: Covector, sigma: &BiCovector) -> Result<Self> {
        Self::new(xi, sigma.add(&sigma.transpose()).scale(0.5))
    }

    pub fn xi(&self) -> &Covector {
        &self.xi
    }

    pub fn sigma(&self) -> &BiCovector {
        &self.sigma
    }

    pub fn norm(&self) -> f64 {
        self.xi.iter().map(|v| v.norm()).fold(0.0, f64::max).max(self.sigma.max_norm())
    }
}

/// The Utiyama map and the action of second jets of gauge transformations
/// on first jets of connections.
#[derive(Clone, Debug)]
pub struct Utiyama {
    jets: JetGaugeGroup,
}

impl Utiyama {
    pub fn new(jets: JetGaugeGroup) -> Self {
        Self { jets }
    }

    pub fn jets(&self) -> &JetGaugeGroup {
        &self.jets
    }

    fn group(&self) -> &GroupDescriptor {
        &self.jets.group
    }

    pub fn sample_jet<R: Rng + ?Sized>(&self, rng: &mut R) -> ConnectionJet {
        let n = self.jets.n;
        ConnectionJet {
            a: (0..n).map(|_| self.group().sample_algebra(rng, 1.0)).collect(),
            da: self.jets.sample_bicovector(rng),
        }
    }

    pub fn sample_gauge<R: Rng + ?Sized>(&self, rng: &mut R) -> GaugeSecondJet {
        let xi = (0..self.jets.n).map(|_| self.group().sample_algebra(rng, 1.0)).collect();
        GaugeSecondJet::symmetrized(xi, &self.jets.sample_bicovector(rng)).expect("symmetrized jet")
    }

    /// `F(mu, nu) = DA(mu, nu) - DA(nu, mu) + [A_mu, A_nu]`.
    pub fn curvature(&self, j: &ConnectionJet) -> Result<BiCovector> {
        let n = self.jets.n;
        check_dim(n, j.a.len(), "connection jet")?;
        check_dim(n, j.da.base_dim(), "connection jet derivative")?;
        Ok(BiCovector::from_fn(n, self.group().dim(), |mu, nu| {
            j.da.get(mu, nu) - j.da.get(nu, mu) + self.group().bracket(&j.a[mu], &j.a[nu])
        }))
    }

    /// Action of a second jet through the unit: `A' = A + xi` and
    /// `DA'(mu, nu) = DA(mu, nu) + sigma(mu, nu) + [xi_nu, A_mu] + [xi_nu, xi_mu] / 2`.
    pub fn apply(&self, gauge: &GaugeSecondJet, j: &ConnectionJet) -> Result<ConnectionJet> {
        let n = self.jets.n;
        check_dim(n, gauge.xi.len(), "gauge jet")?;
        check_dim(n, j.a.len(), "connection jet")?;
        let grp = self.group();
        let da = BiCovector::from_fn(n, grp.dim(), |mu, nu| {
            j.da.get(mu, nu)
                + gauge.sigma.get(mu, nu)
                + grp.bracket(&gauge.xi[nu], &j.a[mu])
                + grp.bracket(&gauge.xi[nu], &gauge.xi[mu]) * 0.5
        });
        Ok(ConnectionJet {
            a: j.a.iter().zip(&gauge.xi).map(|(a, x)| a + x).collect(),
            da,
        })
    }

    /// The unique second jet carrying `from` to `to`, when the two have the
    /// same curvature; fails otherwise.
    pub fn connecting_gauge(&self, from: &ConnectionJet, to: &ConnectionJet) -> Result<GaugeSecondJet> {
        let grp = self.group();
        let n = self.jets.n;
        let xi: Covector = to.a.iter().zip(&from.a).map(|(a, b)| a - b).collect();
        let raw = BiCovector::from_fn(n, grp.dim(), |mu, nu| {
            to.da.get(mu, nu)
                - from.da.get(mu, nu)
                - grp.bracket(&xi[nu], &from.a[mu])
                - grp.bracket(&xi[nu], &xi[mu]) * 0.5
        });
        let asym = raw.sub(&raw.transpose()).max_norm();
        if asym > 1e-9 {
            return Err(Error::InvarianceViolation(format!(
                "jets lie in different orbits (antisymmetric defect {asym:.3e})"
            )));
        }
        GaugeSecondJet::symmetrized(xi, &raw)
    }

    /// `|F(gauge . j) - F(j)|`; fails above `1e-9`.
    pub fn invariance_check(&self, gauge: &GaugeSecondJet, j: &ConnectionJet) -> Result<f64> {
        let r = self.curvature(&self.apply(gauge, j)?)?.sub(&self.curvature(j)?).max_norm();
        if r > 1e-9 {
            return Err(Error::InvarianceViolation(format!("curvature changes by {r:.3e}")));
        }
        Ok(r)
    }

    /// A first jet whose curvature is the given antisymmetric `F`.
    pub fn realize_curvature(&self, f: &BiCovector) -> Result<ConnectionJet> {
        check_dim(self.jets.n, f.base_dim(), "curvature")?;
        let asym = f.add(&f.transpose()).max_norm();
        if asym > 1e-12 {
            return Err(Error::Usage("curvature values must be antisymmetric".into()));
        }
        Ok(ConnectionJet {
            a: vec![self.group().zero(); self.jets.n],
            da: f.scale(0.5),
        })
    }

    /// Smallest singular value of the differential at the unit of
    /// `gauge -> gauge . j`; positive exactly when the action is locally
    /// free at `j`.
    pub fn orbit_map_min_singular_value(&self, j: &ConnectionJet) -> Result<f64> {
        let n = self.jets.n;
        let d = self.group().dim();
        let sym_pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        let params = n * d + sym_pairs.len() * d;
        let outputs = n * d + n * n * d;
        let mut m = nalgebra::DMatrix::zeros(outputs, params);
        let flatten = |c: &ConnectionJet| -> nalgebra::DVector<f64> {
            let mut v = Vec::with_capacity(outputs);
            for a in &c.a {
                v.extend(a.0.iter().copied());
            }
            for mu in 0..n {
                for nu in 0..n {
                    v.extend(c.da.get(mu, nu).0.iter().copied());
                }
            }
            nalgebra::DVector::from_vec(v)
        };
        let base = flatten(j);
        let h = 1e-6;
        for p in 0..params {
            let mut xi = vec![self.group().zero(); n];
            let mut sigma = BiCovector::zeros(n, d);
            if p < n * d {
                xi[p / d].0[p % d] = h;
            } else {
                let q = p - n * d;
                let (a, b) = sym_pairs[q / d];
                let mut e = AlgebraElement::zeros(d);
                e.0[q % d] = h;
                sigma.set(a, b, &e);
                sigma.set(b, a, &e);
            }
            let moved = self.apply(&GaugeSecondJet::new(xi, sigma)?, j)?;
            m.set_column(p, &((flatten(&moved) - &base) / h));
        }
        Ok(m.svd(false, false).singular_values.min())
    }
}

/// `(d/dt exp X) exp(-X)` for `dX/dt = v`, summed as `ad_X^k v / (k+1)!`.
pub fn right_dexp(group: &GroupDescriptor, x: &AlgebraElement, v: &AlgebraElement) -> AlgebraElement {
    let mut term = v.clone();
    let mut total = v.clone();
    for k in 1..60 {
        term = group.bracket(x, &term) * (1.0 / (k as f64 + 1.0));
        if term.norm() < 1e-18 * total.norm().max(1e-300) {
            break;
        }
        total = &total + &term;
    }
    total
}

/// A gauge transformation `s(x) = exp X(x)` with quadratic exponent
/// `X = c + xi_nu y^nu + sigma(nu, rho) y^nu y^rho / 2`, `y = x - centre`,
/// with `sigma` symmetric.
#[derive(Clone, Debug)]
pub struct QuadraticGauge {
    pub centre: Vec<f64>,
    pub c: AlgebraElement,
    pub xi: Covector,
    pub sigma: BiCovector,
}

impl QuadraticGauge {
    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.centre).map(|(a, b)| a - b).collect()
    }

    /// `d X / d x^mu` at `x`.
    fn exponent_derivative(&self, x: &[f64], mu: usize) -> AlgebraElement {
        let y = self.offset(x);
        y.iter().enumerate().fold(self.xi[mu].clone(), |acc, (rho, yr)| acc + self.sigma.get(mu, rho) * *yr)
    }

    pub fn exponent(&self, x: &[f64]) -> AlgebraElement {
        let y = self.offset(x);
        let mut out = self.c.clone();
        for (nu, yn) in y.iter().enumerate() {
            out = out + &self.xi[nu] * *yn;
            for (rho, yr) in y.iter().enumerate() {
                out = out + self.sigma.get(nu, rho) * (0.5 * yn * yr);
            }
        }
        out
    }

    /// Pointwise action on a potential: `A'_mu = Ad_s A_mu + (d_mu s) s^-1`.
    pub fn transform(&self, group: &GroupDescriptor, x: &[f64], a: &[AlgebraElement]) -> Result<Covector> {
        check_dim(self.xi.len(), a.len(), "potential")?;
        let exponent = self.exponent(x);
        let s = group.exp(&exponent)?;
        a.iter()
            .enumerate()
            .map(|(mu, am)| Ok(group.adjoint(&s, am)? + right_dexp(group, &exponent, &self.exponent_derivative(x, mu))))
            .collect()
    }
}

/// First jet at `x` of a potential, from the five-point central stencil.
pub fn potential_jet_fd(potential: &dyn Fn(&[f64]) -> Result<Covector>, x: &[f64], h: f64) -> Result<ConnectionJet> {
    let n = x.len();
    let a = potential(x)?;
    let d = a.first().map_or(0, |v| v.0.len());
    let mut da = BiCovector::zeros(n, d);
    for nu in 0..n {
        let at = |t: f64| {
            let mut y = x.to_vec();
            y[nu] += t;
            potential(&y)
        };
        let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
        for mu in 0..n {
            let v = (&m2[mu] - &p2[mu] + (&p1[mu] - &m1[mu]) * 8.0) * (1.0 / (12.0 * h));
            da.set(mu, nu, &v);
        }
    }
    Ok(ConnectionJet { a, da })
}

impl Utiyama {
    /// The affine potential `A_mu + DA(mu, nu) x^nu` with jet `j` at the origin.
    fn affine_potential(j: &ConnectionJet, x: &[f64]) -> Covector {
        j.a.iter()
            .enumerate()
            .map(|(mu, am)| x.iter().enumerate().fold(am.clone(), |acc, (nu, xn)| acc + j.da.get(mu, nu) * *xn))
            .collect()
    }

    /// `|gauge . j - J|` where `J` is the numerical jet of the pointwise
    /// action of `exp(xi_nu x^nu + sigma x x / 2)` on the affine potential
    /// through `j`.
    pub fn action_fd_residual(&self, gauge: &GaugeSecondJet, j: &ConnectionJet) -> Result<f64> {
        let n = self.jets.n;
        let grp = self.group();
        let field = QuadraticGauge {
            centre: vec![0.0; n],
            c: grp.zero(),
            xi: gauge.xi.clone(),
            sigma: gauge.sigma.clone(),
        };
        let moved = |x: &[f64]| field.transform(grp, x, &Self::affine_potential(j, x));
        let fd = potential_jet_fd(&moved, &vec![0.0; n], 1e-3)?;
        Ok(fd.distance(&self.apply(gauge, j)?))
    }

    /// `|F(J') - Ad_{s(x)} F(J)|` for the numerical jets `J`, `J'` at `x` of a
    /// potential and of its transform under `field`.
    pub fn covariance_residual(
        &self,
        field: &QuadraticGauge,
        potential: &dyn Fn(&[f64]) -> Result<Covector>,
        x: &[f64],
    ) -> Result<f64> {
        let grp = self.group();
        let moved = |y: &[f64]| field.transform(grp, y, &potential(y)?);
        let before = self.curvature(&potential_jet_fd(potential, x, 1e-3)?)?;
        let after = self.curvature(&potential_jet_fd(&moved, x, 1e-3)?)?;
        let s = grp.exp(&field.exponent(x))?;
        let n = self.jets.n;
        let mut worst: f64 = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                worst = worst.max(after.get(mu, nu).distance(&grp.adjoint(&s, &before.get(mu, nu))?));
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn utiyama() -> Utiyama {
        Utiyama::new(JetGaugeGroup::new(Arc::new(GroupDescriptor::so3()), 3).unwrap())
    }

    #[test]
    fn second_jets_must_be_symmetric() {
        let u = utiyama();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma = u.jets().sample_bicovector(&mut rng);
        let xi = vec![AlgebraElement::zeros(3); 3];
        assert!(matches!(GaugeSecondJet::new(xi.clone(), sigma.clone()), Err(Error::Usage(_))));
        let sym = GaugeSecondJet::symmetrized(xi, &sigma).unwrap();
        assert!(sym.sigma().sub(&sym.sigma().transpose()).max_norm() < 1e-15);
    }

    #[test]
    fn realized_curvature_is_reproduced() {
        let u = utiyama();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = u.jets().sample_bicovector(&mut rng);
        let f = b.sub(&b.transpose());
        let jet = u.realize_curvature(&f).unwrap();
        assert!(u.curvature(&jet).unwrap().sub(&f).max_norm() < 1e-14);
    }

    #[test]
    fn connecting_gauge_joins_jets_with_equal_curvature() {
        let u = utiyama();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let from = u.sample_jet(&mut rng);
        let gauge = u.sample_gauge(&mut rng);
        let to = u.apply(&gauge, &from).unwrap();
        let found = u.connecting_gauge(&from, &to).unwrap();
        assert!(u.apply(&found, &from).unwrap().distance(&to) < 1e-12);
        let other = u.sample_jet(&mut rng);
        assert!(u.connecting_gauge(&from, &other).is_err());
    }

    #[test]
    fn non_abelian_jet_lift_is_not_multiplicative() {
        let jets = JetGaugeGroup::new(Arc::new(GroupDescriptor::so3()), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (jets.sample(&mut rng), jets.sample(&mut rng));
        assert!(jets.lift_multiplicativity(&a, &b).unwrap() > 1e-3);
    }

    #[test]
    fn pointwise_action_jet_fixes_the_bracket_terms() {
        let u = utiyama();
        let grp = u.jets().group().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let j = u.sample_jet(&mut rng);
        let gauge = u.sample_gauge(&mut rng);
        assert!(u.action_fd_residual(&gauge, &j).unwrap() < 1e-9);
        let field = QuadraticGauge {
            centre: vec![0.0; 3],
            c: grp.zero(),
            xi: gauge.xi().clone(),
            sigma: gauge.sigma().clone(),
        };
        let moved = |x: &[f64]| field.transform(&grp, x, &Utiyama::affine_potential(&j, x));
        let fd = potential_jet_fd(&moved, &[0.0; 3], 1e-3).unwrap();
        let mut wrong = u.apply(&gauge, &j).unwrap();
        wrong.da = BiCovector::from_fn(3, 3, |mu, nu| wrong.da.get(mu, nu) - grp.bracket(&gauge.xi()[nu], &gauge.xi()[mu]));
        assert!(fd.distance(&wrong) > 1e-2);
    }

    #[test]
    fn curvature_is_covariant_away_from_the_unit() {
        let u = utiyama();
        let grp = u.jets().group().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let j = u.sample_jet(&mut rng);
        let raw = u.jets().sample_bicovector(&mut rng);
        let field = QuadraticGauge {
            centre: vec![0.1, -0.2, 0.3],
            c: grp.sample_algebra(&mut rng, 1.0),
            xi: (0..3).map(|_| grp.sample_algebra(&mut rng, 1.0)).collect(),
            sigma: raw.add(&raw.transpose()).scale(0.5),
        };
        let quadratic = |x: &[f64]| -> Result<Covector> {
            Ok(Utiyama::affine_potential(&j, x).iter().map(|a| a * (1.0 + x[0] * x[1])).collect())
        };
        assert!(u.covariance_residual(&field, &quadratic, &[0.1, -0.2, 0.3]).unwrap() < 1e-9);
    }
}
