//! Coordinate calculus: chart domains, base curves, algebra-valued forms,
//! the Lie group integrator and finite-difference helpers.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, GroupDescriptor, GroupElement};

/// Default central-difference step, near the cube root of machine epsilon.
pub const FD_STEP: f64 = 6e-6;

/// An axis-aligned open box used as a coordinate chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDomain {
    pub label: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ChartDomain {
    pub fn new(label: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Self {
            label: label.into(),
            lower,
            upper,
        };
        d.validate()?;
        Ok(d)
    }

    /// The box `[-r, r]^n`.
    pub fn cube(label: impl Into<String>, n: usize, r: f64) -> Result<Self> {
        Self::new(label, vec![-r; n], vec![r; n])
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.lower.len(), self.upper.len(), "chart bounds")?;
        if self.lower.is_empty() {
            return Err(Error::Domain(format!("chart '{}' has dimension zero", self.label)));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Domain(format!(
                    "chart '{}' has an empty or unbounded side [{l}, {u}]",
                    self.label
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn require(&self, x: &DVector<f64>) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point {:?} leaves chart '{}'",
                x.as_slice(),
                self.label
            )))
        }
    }

    /// Uniform sample from the box shrunk by `margin` on each side,
    /// expressed as a fraction of the side length.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(l, u)| {
                let w = u - l;
                rng.random_range((l + margin * w)..(u - margin * w))
            }),
        )
    }

    /// Product with a second box; coordinates of `self` come first.
    pub fn product(&self, other: &ChartDomain) -> ChartDomain {
        ChartDomain {
            label: format!("{}x{}", self.label, other.label),
            lower: self.lower.iter().chain(&other.lower).copied().collect(),
            upper: self.upper.iter().chain(&other.upper).copied().collect(),
        }
    }
}

/// Polynomial in several variables. Exponent keys are written "i,j,..".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::default();
        if c != 0.0 {
            p.terms.push((vec![0; nvars], c));
        }
        p
    }

    /// Adds `c * prod x_i^{e_i}`.
    pub fn with_term(mut self, exponents: &[u32], c: f64) -> Self {
        self.terms.push((exponents.to_vec(), c));
        self
    }

    pub fn from_table(table: &BTreeMap<String, f64>, nvars: usize) -> Result<Self> {
        let mut p = Self::default();
        for (key, c) in table {
            let exps = key
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad exponent key '{key}'")))?;
            if exps.len() != nvars {
                return Err(Error::Config(format!(
                    "exponent key '{key}' has {} entries, expected {nvars}",
                    exps.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::Config(format!("non-finite coefficient for '{key}'")));
            }
            p.terms.push((exps, *c));
        }
        Ok(p)
    }

    pub fn to_table(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (e, c) in &self.terms {
            let key = e.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            *out.entry(key).or_insert(0.0) += c;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    /// True when every term is constant.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(e, c)| *c == 0.0 || e.iter().all(|v| *v == 0))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(k, v)| v.powi(*k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

type CoeffFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A Lie-algebra-valued one-form on a chart, `A_x(u) = sum_mu u^mu A_mu(x)`.
/// The coefficient function returns the n x d matrix whose row mu holds
/// the coordinates of `A_mu(x)`.
#[derive(Clone)]
pub struct AlgebraOneForm {
    base_dim: usize,
    algebra_dim: usize,
    coeffs: CoeffFn,
    constant: bool,
}

impl std::fmt::Debug for AlgebraOneForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlgebraOneForm")
            .field("base_dim", &self.base_dim)
            .field("algebra_dim", &self.algebra_dim)
            .field("constant", &self.constant)
            .finish()
    }
}

impl AlgebraOneForm {
    pub fn from_fn(
        base_dim: usize,
        algebra_dim: usize,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            base_dim,
            algebra_dim,
            coeffs: Arc::new(f),
            constant: false,
        }
    }

    pub fn zero(base_dim: usize, algebra_dim: usize) -> Self {
        Self::constant(DMatrix::zeros(base_dim, algebra_dim))
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        Self {
            base_dim: n,
            algebra_dim: d,
            coeffs: Arc::new(move |_| m.clone()),
            constant: true,
        }
    }

    /// `table[mu][k]` is the polynomial coefficient of `E_k` in `A_mu`.
    pub fn polynomial(table: Vec<Vec<Polynomial>>, algebra_dim: usize) -> Result<Self> {
        let n = table.len();
        for row in &table {
            check_dim(algebra_dim, row.len(), "one-form row")?;
        }
        let constant = table.iter().flatten().all(Polynomial::is_constant);
        let mut form = Self::from_fn(n, algebra_dim, move |x| {
            DMatrix::from_fn(n, algebra_dim, |mu, k| table[mu][k].eval(x.as_slice()))
        });
        form.constant = constant;
        Ok(form)
    }

    /// Pulls the form back along the projection onto the first
    /// `self.base_dim` coordinates of a space of dimension `total_dim`.
    pub fn pullback_to(&self, total_dim: usize) -> Result<Self> {
        if total_dim < self.base_dim {
            return Err(Error::Dimension {
                expected: self.base_dim,
                found: total_dim,
                context: "pullback target".into(),
            });
        }
        let n = self.base_dim;
        let d = self.algebra_dim;
        let inner = self.coeffs.clone();
        let mut form = Self::from_fn(total_dim, d, move |v| {
            let x = v.rows(0, n).into_owned();
            let small = inner(&x);
            let mut out = DMatrix::zeros(total_dim, d);
            out.rows_mut(0, n).copy_from(&small);
            out
        });
        form.constant = self.constant;
        Ok(form)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn coefficients(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.coeffs)(x)
    }

    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<AlgebraElement> {
        check_dim(self.base_dim, x.len(), "one-form point")?;
        check_dim(self.base_dim, u.len(), "one-form argument")?;
        Ok(AlgebraElement(self.coefficients(x).transpose() * u))
    }

    /// Largest violation of linearity in the argument on random samples.
    pub fn linearity_residual<R: Rng + ?Sized>(
        &self,
        domain: &ChartDomain,
        rng: &mut R,
        samples: usize,
    ) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = domain.sample(rng, 0.0);
            let u = random_vector(rng, self.base_dim, 1.0);
            let w = random_vector(rng, self.base_dim, 1.0);
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let lhs = self.eval(&x, &(&u * a + &w * b))?;
            let rhs = self.eval(&x, &u)? * a + self.eval(&x, &w)? * b;
            worst = worst.max(lhs.distance(&rhs));
        }
        Ok(worst)
    }
}

/// Coordinates of an element of `T*X (x) T*X (x) g` at one point:
/// `get(mu, nu)` is the algebra element paired with `dx^mu (x) dx^nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiCovector {
    base_dim: usize,
    algebra_dim: usize,
    data: Vec<DVector<f64>>,
}

impl BiCovector {
    pub fn zeros(base_dim: usize, algebra_dim: usize) -> Self {
        Self {
            base_dim,
            algebra_dim,
            data: vec![DVector::zeros(algebra_dim); base_dim * base_dim],
        }
    }

    pub fn from_fn(
        base_dim: usize,
        algebra_dim: usize,
        mut f: impl FnMut(usize, usize) -> AlgebraElement,
    ) -> Self {
        let mut out = Self::zeros(base_dim, algebra_dim);
        for mu in 0..base_dim {
            for nu in 0..base_dim {
                out.set(mu, nu, &f(mu, nu));
            }
        }
        out
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn get(&self, mu: usize, nu: usize) -> AlgebraElement {
        AlgebraElement(self.data[mu * self.base_dim + nu].clone())
    }

    pub fn set(&mut self, mu: usize, nu: usize, v: &AlgebraElement) {
        self.data[mu * self.base_dim + nu] = v.0.clone();
    }

    /// Swaps the two covector slots.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.base_dim, self.algebra_dim, |mu, nu| self.get(nu, mu))
    }

    pub fn map(&self, mut f: impl FnMut(&AlgebraElement) -> AlgebraElement) -> Self {
        Self::from_fn(self.base_dim, self.algebra_dim, |mu, nu| f(&self.get(mu, nu)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.base_dim, self.algebra_dim, |mu, nu| {
            self.get(mu, nu) + other.get(mu, nu)
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.base_dim, self.algebra_dim, |mu, nu| {
            self.get(mu, nu) - other.get(mu, nu)
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Largest coordinate norm over all index pairs.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Evaluates on a pair of tangent vectors.
    pub fn pair(&self, u: &DVector<f64>, w: &DVector<f64>) -> AlgebraElement {
        let mut out = DVector::zeros(self.algebra_dim);
        for mu in 0..self.base_dim {
            for nu in 0..self.base_dim {
                out += &self.data[mu * self.base_dim + nu] * (u[mu] * w[nu]);
            }
        }
        AlgebraElement(out)
    }
}

type BiFn = Arc<dyn Fn(&DVector<f64>) -> BiCovector + Send + Sync>;

/// A section of `T*X (x) T*X (x) g`, bilinear in its two arguments.
#[derive(Clone)]
pub struct TwoIndexAlgebraForm {
    base_dim: usize,
    algebra_dim: usize,
    coeffs: BiFn,
}

impl TwoIndexAlgebraForm {
    pub fn from_fn(
        base_dim: usize,
        algebra_dim: usize,
        f: impl Fn(&DVector<f64>) -> BiCovector + Send + Sync + 'static,
    ) -> Self {
        Self {
            base_dim,
            algebra_dim,
            coeffs: Arc::new(f),
        }
    }

    /// `table[mu][nu][k]` is the polynomial coefficient of `E_k`.
    pub fn polynomial(table: Vec<Vec<Vec<Polynomial>>>, algebra_dim: usize) -> Result<Self> {
        let n = table.len();
        for row in &table {
            check_dim(n, row.len(), "two-index form row")?;
            for entry in row {
                check_dim(algebra_dim, entry.len(), "two-index form entry")?;
            }
        }
        Ok(Self::from_fn(n, algebra_dim, move |x| {
            BiCovector::from_fn(n, algebra_dim, |mu, nu| {
                AlgebraElement(DVector::from_iterator(
                    algebra_dim,
                    table[mu][nu].iter().map(|p| p.eval(x.as_slice())),
                ))
            })
        }))
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    pub fn at(&self, x: &DVector<f64>) -> Result<BiCovector> {
        check_dim(self.base_dim, x.len(), "two-index form point")?;
        Ok((self.coeffs)(x))
    }

    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<AlgebraElement> {
        check_dim(self.base_dim, u.len(), "two-index form argument")?;
        check_dim(self.base_dim, w.len(), "two-index form argument")?;
        Ok(self.at(x)?.pair(u, w))
    }
}

type PathFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A parametrized curve `[a, b] -> R^n`, with an analytic velocity when
/// one is known.
#[derive(Clone)]
pub struct BaseCurve {
    label: String,
    interval: (f64, f64),
    dim: usize,
    position: PathFn,
    velocity: Option<PathFn>,
    closed: bool,
}

impl BaseCurve {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        interval: (f64, f64),
        position: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        velocity: Option<PathFn>,
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::MalformedCurve(format!("empty interval [{a}, {b}]")));
        }
        let c = Self {
            label: label.into(),
            interval,
            dim,
            position: Arc::new(position),
            velocity,
            closed: false,
        };
        check_dim(dim, c.position(a).len(), "curve position")?;
        Ok(c)
    }

    /// Straight segment from `start` to `end` over `[0, 1]`.
    pub fn line(start: DVector<f64>, end: DVector<f64>) -> Result<Self> {
        check_dim(start.len(), end.len(), "line endpoints")?;
        let dir = &end - &start;
        let dir2 = dir.clone();
        let s = start.clone();
        Self::new(
            "line",
            start.len(),
            (0.0, 1.0),
            move |t| &s + &dir * t,
            Some(Arc::new(move |_| dir2.clone())),
        )
    }

    /// Circle of radius `r` about `center` in the plane of coordinate axes
    /// `(i, j)`, traversed once over `[0, 2 pi]`.
    pub fn circle(center: DVector<f64>, radius: f64, axes: (usize, usize)) -> Result<Self> {
        let n = center.len();
        let (i, j) = axes;
        if i >= n || j >= n || i == j {
            return Err(Error::MalformedCurve(format!("bad circle axes ({i}, {j}) in dimension {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::MalformedCurve("circle radius must be positive".into()));
        }
        let c = center.clone();
        let mut curve = Self::new(
            "circle",
            n,
            (0.0, 2.0 * std::f64::consts::PI),
            move |t| {
                let mut p = c.clone();
                p[i] += radius * t.cos();
                p[j] += radius * t.sin();
                p
            },
            Some(Arc::new(move |t| {
                let mut v = DVector::zeros(n);
                v[i] = -radius * t.sin();
                v[j] = radius * t.cos();
                v
            })),
        )?;
        curve.closed = true;
        Ok(curve)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn has_analytic_velocity(&self) -> bool {
        self.velocity.is_some()
    }

    pub fn position(&self, t: f64) -> DVector<f64> {
        (self.position)(t)
    }

    /// Analytic velocity, or a central difference when none was supplied.
    pub fn velocity(&self, t: f64) -> DVector<f64> {
        match &self.velocity {
            Some(v) => v(t),
            None => {
                let h = FD_STEP * (self.interval.1 - self.interval.0).max(1.0);
                (self.position(t + h) - self.position(t - h)) / (2.0 * h)
            }
        }
    }

    /// The same path traversed backwards.
    pub fn reversed(&self) -> Self {
        let (a, b) = self.interval;
        let p = self.position.clone();
        let v = self.velocity.clone();
        Self {
            label: format!("{}-reversed", self.label),
            interval: (a, b),
            dim: self.dim,
            position: Arc::new(move |t| p(a + b - t)),
            velocity: v.map(|v| Arc::new(move |t| -v(a + b - t)) as PathFn),
            closed: self.closed,
        }
    }

    /// Restriction to a sub-interval, reparametrized over `[0, 1]`.
    pub fn segment(&self, t0: f64, t1: f64) -> Result<Self> {
        if t0 == t1 {
            return Err(Error::MalformedCurve("degenerate segment".into()));
        }
        let p = self.position.clone();
        let v = self.velocity.clone();
        let span = t1 - t0;
        let curve = Self {
            label: format!("{}[{t0},{t1}]", self.label),
            interval: (0.0, 1.0),
            dim: self.dim,
            position: Arc::new(move |s| p(t0 + s * span)),
            velocity: v.map(|v| Arc::new(move |s| v(t0 + s * span) * span) as PathFn),
            closed: false,
        };
        Ok(curve)
    }

    /// Image under a smooth map of the ambient coordinates.
    pub fn map(
        &self,
        dim: usize,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        let p = self.position.clone();
        Self {
            label: self.label.clone(),
            interval: self.interval,
            dim,
            position: Arc::new(move |t| f(&p(t))),
            velocity: None,
            closed: self.closed,
        }
    }

    /// Projection onto the first `n` coordinates; keeps the analytic
    /// velocity.
    pub fn project(&self, n: usize) -> Result<Self> {
        if n > self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: n,
                context: "curve projection".into(),
            });
        }
        let p = self.position.clone();
        let v = self.velocity.clone();
        Ok(Self {
            label: self.label.clone(),
            interval: self.interval,
            dim: n,
            position: Arc::new(move |t| p(t).rows(0, n).into_owned()),
            velocity: v.map(|v| Arc::new(move |t| v(t).rows(0, n).into_owned()) as PathFn),
            closed: self.closed,
        })
    }

    /// Largest gap between the analytic velocity and a central difference
    /// of the position on evenly spaced samples.
    pub fn velocity_consistency(&self, samples: usize) -> f64 {
        let Some(v) = &self.velocity else { return 0.0 };
        let (a, b) = self.interval;
        let h = 1e-5 * (b - a).max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..samples.max(1) {
            let t = a + (b - a) * (i as f64 + 0.5) / samples.max(1) as f64;
            let fd = (self.position(t + h) - self.position(t - h)) / (2.0 * h);
            worst = worst.max((fd - v(t)).norm() / v(t).norm().max(1.0));
        }
        worst
    }

    /// Checks the curve stays inside a chart and that its velocity is
    /// consistent.
    pub fn check(&self, domain: &ChartDomain, samples: usize) -> Result<()> {
        check_dim(domain.dim(), self.dim, "curve dimension")?;
        let (a, b) = self.interval;
        for i in 0..=samples.max(1) {
            let t = a + (b - a) * i as f64 / samples.max(1) as f64;
            let p = self.position(t);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedCurve(format!("non-finite point at t = {t}")));
            }
            domain.require(&p).map_err(|e| Error::MalformedCurve(e.to_string()))?;
        }
        let gap = self.velocity_consistency(samples.max(1));
        if gap > 1e-6 {
            return Err(Error::MalformedCurve(format!(
                "analytic velocity disagrees with the position (gap {gap:.3e})"
            )));
        }
        Ok(())
    }
}

/// Settings for [`integrate_on_group`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    /// Requested step length in the curve parameter.
    pub step: f64,
    /// Smallest step accepted before reporting stiffness.
    pub min_step: f64,
    /// Run a second pass at half the step to estimate the error.
    pub estimate_error: bool,
    /// Project back onto the group after every step.
    pub retract: bool,
    /// Membership residual treated as a blow-up.
    pub blowup_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            step: 1e-3,
            min_step: 1e-12,
            estimate_error: false,
            retract: true,
            blowup_tol: 1e-6,
        }
    }
}

impl StepControl {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn estimating(mut self) -> Self {
        self.estimate_error = true;
        self
    }
}

/// Result of a group integration.
#[derive(Clone, Debug)]
pub struct Integration {
    pub end: GroupElement,
    pub steps: usize,
    /// Step-halving estimate of the error in `end`, when requested.
    pub error_estimate: Option<f64>,
    /// Largest membership residual seen before retraction.
    pub max_membership_residual: f64,
}

/// Solves `g'(t) g(t)^-1 = rhs(t, g(t))` with the fourth-order
/// Runge-Kutta-Munthe-Kaas scheme. `t1 < t0` integrates backwards.
pub fn integrate_on_group<F>(
    group: &GroupDescriptor,
    rhs: F,
    g0: &GroupElement,
    interval: (f64, f64),
    control: &StepControl,
) -> Result<Integration>
where
    F: Fn(f64, &GroupElement) -> Result<AlgebraElement>,
{
    let (t0, t1) = interval;
    let span = (t1 - t0).abs();
    if !(control.step.is_finite() && control.step > 0.0) {
        return Err(Error::Usage(format!("step must be positive, got {}", control.step)));
    }
    if control.step < control.min_step {
        return Err(Error::Stiffness {
            min_step: control.min_step,
        });
    }
    let n = if span == 0.0 {
        0
    } else {
        (span / control.step).ceil().max(1.0) as usize
    };
    if n > 200_000_000 {
        return Err(Error::Stiffness {
            min_step: control.min_step,
        });
    }
    let coarse = rkmk_run(group, &rhs, g0, t0, t1, n, control)?;
    let error_estimate = if control.estimate_error && n > 0 {
        let fine = rkmk_run(group, &rhs, g0, t0, t1, 2 * n, control)?;
        Some(coarse.end.distance(&fine.end) * 16.0 / 15.0)
    } else {
        None
    };
    Ok(Integration {
        error_estimate,
        ..coarse
    })
}

fn rkmk_run<F>(
    group: &GroupDescriptor,
    rhs: &F,
    g0: &GroupElement,
    t0: f64,
    t1: f64,
    n: usize,
    control: &StepControl,
) -> Result<Integration>
where
    F: Fn(f64, &GroupElement) -> Result<AlgebraElement>,
{
    let mut g = g0.clone();
    let mut worst: f64 = 0.0;
    if n == 0 {
        return Ok(Integration {
            end: g,
            steps: 0,
            error_estimate: None,
            max_membership_residual: 0.0,
        });
    }
    let h = (t1 - t0) / n as f64;
    let at = |u: &AlgebraElement, g: &GroupElement| -> Result<GroupElement> {
        Ok(group.compose(&group.exp(u)?, g))
    };
    for i in 0..n {
        let t = t0 + h * i as f64;
        let k1 = rhs(t, &g)?;
        let u2 = &k1 * (h / 2.0);
        let k2 = group.dexpinv(&u2, &rhs(t + h / 2.0, &at(&u2, &g)?)?);
        let u3 = &k2 * (h / 2.0);
        let k3 = group.dexpinv(&u3, &rhs(t + h / 2.0, &at(&u3, &g)?)?);
        let u4 = &k3 * h;
        let k4 = group.dexpinv(&u4, &rhs(t + h, &at(&u4, &g)?)?);
        let incr = AlgebraElement(
            (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0),
        );
        let next = at(&incr, &g)?;
        let residual = group.membership_residual(&next.0);
        if !residual.is_finite() || residual > control.blowup_tol {
            return Err(Error::Instability {
                residual,
                t: t + h,
            });
        }
        worst = worst.max(residual);
        g = if control.retract {
            group.retract(&next.0)
        } else {
            next
        };
    }
    Ok(Integration {
        end: g,
        steps: n,
        error_estimate: None,
        max_membership_residual: worst,
    })
}

/// Classical fourth-order Runge-Kutta for `y' = f(t, y)` in a vector space.
pub fn integrate_vector<F>(
    f: F,
    y0: &DVector<f64>,
    interval: (f64, f64),
    step: f64,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let (t0, t1) = interval;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Usage(format!("step must be positive, got {step}")));
    }
    let n = ((t1 - t0).abs() / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut y = y0.clone();
    for i in 0..n {
        let t = t0 + h * i as f64;
        let k1 = f(t, &y)?;
        let k2 = f(t + h / 2.0, &(&y + &k1 * (h / 2.0)))?;
        let k3 = f(t + h / 2.0, &(&y + &k2 * (h / 2.0)))?;
        let k4 = f(t + h, &(&y + &k3 * h))?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability {
                residual: f64::INFINITY,
                t: t + h,
            });
        }
    }
    Ok(y)
}

/// A manifold presented by a single chart, with curves through a point in
/// any direction and an embedding of tangent vectors into an ambient space.
pub trait ChartManifold {
    type Point: Clone;

    /// Point reached at parameter `t` along the chart curve with initial
    /// velocity `v` (frame coordinates).
    fn flow(&self, p: &Self::Point, v: &DVector<f64>, t: f64) -> Result<Self::Point>;

    /// Ambient coordinates of the frame vector `v` at `p`.
    fn to_ambient(&self, p: &Self::Point, v: &DVector<f64>) -> DVector<f64>;

    /// Frame coordinates of an ambient vector tangent at `p`.
    fn from_ambient(&self, p: &Self::Point, w: &DVector<f64>) -> DVector<f64>;
}

/// Euclidean space restricted to a chart box.
pub struct Euclidean<'a>(pub &'a ChartDomain);

impl ChartManifold for Euclidean<'_> {
    type Point = DVector<f64>;

    fn flow(&self, p: &DVector<f64>, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let q = p + v * t;
        self.0.require(&q)?;
        Ok(q)
    }

    fn to_ambient(&self, _p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn from_ambient(&self, _p: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        w.clone()
    }
}

/// Lie bracket `[V1, V2] = D_{V1} V2 - D_{V2} V1` of two vector fields,
/// with directional derivatives taken by central differences of the
/// ambient representatives along chart curves.
pub fn numerical_bracket<M, V1, V2>(
    manifold: &M,
    v1: V1,
    v2: V2,
    p: &M::Point,
    step: Option<f64>,
) -> Result<DVector<f64>>
where
    M: ChartManifold,
    V1: Fn(&M::Point) -> Result<DVector<f64>>,
    V2: Fn(&M::Point) -> Result<DVector<f64>>,
{
    let h = step.unwrap_or(FD_STEP);
    let a = v1(p)?;
    let b = v2(p)?;
    let derivative = |dir: &DVector<f64>, field: &V2| -> Result<DVector<f64>> {
        let pp = manifold.flow(p, dir, h)?;
        let pm = manifold.flow(p, dir, -h)?;
        let fp = manifold.to_ambient(&pp, &field(&pp)?);
        let fm = manifold.to_ambient(&pm, &field(&pm)?);
        Ok((fp - fm) / (2.0 * h))
    };
    let d1 = derivative(&a, &v2)?;
    let pp = manifold.flow(p, &b, h)?;
    let pm = manifold.flow(p, &b, -h)?;
    let d2 = (manifold.to_ambient(&pp, &v1(&pp)?) - manifold.to_ambient(&pm, &v1(&pm)?)) / (2.0 * h);
    Ok(manifold.from_ambient(p, &(d1 - d2)))
}

/// Central-difference Jacobian; column j is the derivative along e_j.
pub fn finite_diff_jacobian<F>(
    f: F,
    x: &DVector<f64>,
    step: Option<f64>,
    domain: Option<&ChartDomain>,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let h = step.unwrap_or(FD_STEP);
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        if let Some(d) = domain {
            d.require(&xp)?;
            d.require(&xm)?;
        }
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    let m = cols.first().map_or(0, |c| c.len());
    let mut out = DMatrix::zeros(m, n);
    for (j, c) in cols.iter().enumerate() {
        check_dim(m, c.len(), "jacobian column")?;
        out.set_column(j, c);
    }
    Ok(out)
}

/// Central difference of a vector-valued function of one variable at 0.
pub fn central_diff<F>(f: F, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

/// Observed convergence order from errors at steps `h` and `h / ratio`.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

/// Least-squares slope of log(error) against log(step).
pub fn fitted_order(steps: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Vector with independent uniform coordinates in `[-r, r]`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-r..r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::GroupDescriptor;

    #[test]
    fn bracket_of_coordinate_fields() {
        let dom = ChartDomain::cube("plane", 2, 2.0).unwrap();
        let p = DVector::from_vec(vec![0.3, -0.7]);
        let v1 = |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[1], 0.0]));
        let v2 = |_: &DVector<f64>| Ok(DVector::from_vec(vec![0.0, 1.0]));
        let b = numerical_bracket(&Euclidean(&dom), v1, v2, &p, None).unwrap();
        assert!((b - DVector::from_vec(vec![-1.0, 0.0])).norm() < 1e-9);
    }

    #[test]
    fn polynomial_table_round_trip() {
        let p = Polynomial::zero().with_term(&[2, 0], 1.5).with_term(&[1, 1], -0.5);
        let back = Polynomial::from_table(&p.to_table(), 2).unwrap();
        assert_eq!(back.eval(&[2.0, 3.0]), p.eval(&[2.0, 3.0]));
        assert_eq!(p.eval(&[2.0, 3.0]), 6.0 - 3.0);
    }

    #[test]
    fn bad_exponent_key_is_rejected() {
        let mut t = BTreeMap::new();
        t.insert("1,x".to_string(), 1.0);
        assert!(Polynomial::from_table(&t, 2).is_err());
    }

    #[test]
    fn empty_interval_is_malformed() {
        let r = BaseCurve::new("bad", 1, (1.0, 1.0), |t| DVector::from_vec(vec![t]), None);
        assert!(matches!(r, Err(Error::MalformedCurve(_))));
    }

    #[test]
    fn circle_velocity_matches_position() {
        let c = BaseCurve::circle(DVector::zeros(2), 0.5, (0, 1)).unwrap();
        assert!(c.velocity_consistency(50) < 1e-8);
    }

    #[test]
    fn constant_generator_integrates_to_exp() {
        let g = GroupDescriptor::so3();
        let xi = AlgebraElement::from_slice(&[0.4, -0.3, 0.9]);
        let out = integrate_on_group(
            &g,
            |_, _| Ok(xi.clone()),
            &g.identity(),
            (0.0, 1.0),
            &StepControl::with_step(0.1),
        )
        .unwrap();
        assert!(out.end.distance(&g.exp(&xi).unwrap()) < 1e-13);
    }

    #[test]
    fn one_form_is_linear() {
        let dom = ChartDomain::cube("plane", 2, 1.0).unwrap();
        let form = AlgebraOneForm::polynomial(
            vec![
                vec![Polynomial::constant(2, 1.0), Polynomial::zero(), Polynomial::zero().with_term(&[0, 1], 2.0)],
                vec![Polynomial::zero(), Polynomial::zero().with_term(&[2, 0], 1.0), Polynomial::zero()],
            ],
            3,
        )
        .unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        assert!(form.linearity_residual(&dom, &mut rng, 20).unwrap() < 1e-14);
    }
}
