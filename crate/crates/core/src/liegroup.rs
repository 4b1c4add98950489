//! Matrix Lie groups described by a basis of their Lie algebra.
//!
//! Algebra elements are coordinate vectors with respect to the basis and
//! group elements are square matrices. Conversions between the two go
//! through [`GroupDescriptor::hat`] and [`GroupDescriptor::vee`].

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Residual allowed when projecting a matrix onto the span of the basis.
pub const SPAN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// Special orthogonal group; compact, retraction by polar projection.
    Orthogonal,
    /// Translations of R^m embedded as unipotent (m+1)x(m+1) matrices.
    Translation,
    /// Any other matrix group; no retraction.
    General,
}

/// Coordinates of a Lie algebra element in the basis of its descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement(pub DVector<f64>);

impl AlgebraElement {
    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl Add for AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a AlgebraElement> for &'a AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement(&self.0 + &rhs.0)
    }
}

impl AddAssign<&AlgebraElement> for AlgebraElement {
    fn add_assign(&mut self, rhs: &AlgebraElement) {
        self.0 += &rhs.0;
    }
}

impl Sub for AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a AlgebraElement> for &'a AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement(&self.0 - &rhs.0)
    }
}

impl Neg for AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul<f64> for AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, s: f64) -> Self {
        Self(self.0 * s)
    }
}

impl Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, s: f64) -> AlgebraElement {
        AlgebraElement(&self.0 * s)
    }
}

/// A group element stored as its defining matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(pub DMatrix<f64>);

impl GroupElement {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Frobenius distance between the defining matrices.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// Serialized form of a descriptor; basis matrices are row-major arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorSpec {
    pub name: String,
    pub kind: GroupKind,
    pub matrix_dim: usize,
    pub basis: Vec<Vec<f64>>,
    #[serde(default = "default_membership_tol")]
    pub membership_tol: f64,
    /// `None` selects the default for the kind.
    #[serde(default)]
    pub injectivity_radius: Option<f64>,
}

fn default_membership_tol() -> f64 {
    1e-8
}

/// A matrix Lie group together with a basis of its Lie algebra.
#[derive(Clone, Debug)]
pub struct GroupDescriptor {
    name: String,
    kind: GroupKind,
    matrix_dim: usize,
    basis: Vec<DMatrix<f64>>,
    gram_inv: DMatrix<f64>,
    /// `structure[k][(i, j)]` is the coefficient of `E_k` in `[E_i, E_j]`.
    structure: Vec<DMatrix<f64>>,
    membership_tol: f64,
    injectivity_radius: f64,
}

impl GroupDescriptor {
    pub fn new(
        name: impl Into<String>,
        kind: GroupKind,
        basis: Vec<DMatrix<f64>>,
        membership_tol: f64,
        injectivity_radius: Option<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if basis.is_empty() {
            return Err(Error::DescriptorInconsistency(format!("{name}: empty basis")));
        }
        let m = basis[0].nrows();
        for (i, e) in basis.iter().enumerate() {
            if e.nrows() != m || e.ncols() != m {
                return Err(Error::DescriptorInconsistency(format!(
                    "{name}: basis element {i} is {}x{}, expected {m}x{m}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::DescriptorInconsistency(format!(
                    "{name}: basis element {i} has non-finite entries"
                )));
            }
        }
        if !(membership_tol.is_finite() && membership_tol > 0.0) {
            return Err(Error::DescriptorInconsistency(format!(
                "{name}: membership tolerance must be positive"
            )));
        }
        let d = basis.len();
        let gram = DMatrix::from_fn(d, d, |i, j| basis[i].dot(&basis[j]));
        let svd = gram.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-12 * smax.max(1.0) {
            return Err(Error::DescriptorInconsistency(format!(
                "{name}: basis is linearly dependent"
            )));
        }
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::DescriptorInconsistency(format!("{name}: singular Gram matrix")))?;
        let radius = match injectivity_radius {
            Some(r) if r > 0.0 => r,
            Some(_) => {
                return Err(Error::DescriptorInconsistency(format!(
                    "{name}: injectivity radius must be positive"
                )))
            }
            None => match kind {
                GroupKind::Orthogonal => PI - 0.1,
                _ => f64::INFINITY,
            },
        };
        let mut desc = Self {
            name,
            kind,
            matrix_dim: m,
            basis,
            gram_inv,
            structure: Vec::new(),
            membership_tol,
            injectivity_radius: radius,
        };
        let mut structure = vec![DMatrix::zeros(d, d); d];
        for i in 0..d {
            for j in 0..d {
                let c = &desc.basis[i] * &desc.basis[j] - &desc.basis[j] * &desc.basis[i];
                let coords = desc.vee(&c).map_err(|_| {
                    Error::DescriptorInconsistency(format!(
                        "{}: span of the basis is not closed under the commutator ([E{i}, E{j}])",
                        desc.name
                    ))
                })?;
                for (k, s) in structure.iter_mut().enumerate() {
                    s[(i, j)] = coords.0[k];
                }
            }
        }
        desc.structure = structure;
        if kind == GroupKind::Translation {
            desc.check_translation_layout()?;
        }
        Ok(desc)
    }

    fn check_translation_layout(&self) -> Result<()> {
        let m = self.matrix_dim;
        if self.dim() != m - 1 {
            return Err(Error::DescriptorInconsistency(format!(
                "{}: translation group in dimension {} needs {} basis elements",
                self.name,
                m,
                m - 1
            )));
        }
        for (i, e) in self.basis.iter().enumerate() {
            let mut expected = DMatrix::zeros(m, m);
            expected[(i, m - 1)] = 1.0;
            if (e - expected).norm() > 1e-14 {
                return Err(Error::DescriptorInconsistency(format!(
                    "{}: translation basis element {i} must be the unit in column {}",
                    self.name,
                    m - 1
                )));
            }
        }
        Ok(())
    }

    /// SO(3) with `[E1, E2] = E3` and cyclic permutations.
    pub fn so3() -> Self {
        Self::so(3).expect("so(3) basis is valid")
    }

    /// SO(2), the abelian rotation group of the plane.
    pub fn so2() -> Self {
        Self::so(2).expect("so(2) basis is valid")
    }

    /// SO(n) with basis ordered as in `so3` for n = 3 and lexicographically
    /// by index pairs otherwise.
    pub fn so(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DescriptorInconsistency("SO(n) needs n >= 2".into()));
        }
        let mut basis = Vec::new();
        if n == 3 {
            for (a, b) in [(2, 1), (0, 2), (1, 0)] {
                let mut e = DMatrix::zeros(3, 3);
                e[(a, b)] = 1.0;
                e[(b, a)] = -1.0;
                basis.push(e);
            }
        } else {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut e = DMatrix::zeros(n, n);
                    e[(j, i)] = 1.0;
                    e[(i, j)] = -1.0;
                    basis.push(e);
                }
            }
        }
        Self::new(format!("SO({n})"), GroupKind::Orthogonal, basis, 1e-8, None)
    }

    /// The additive group R^m acting as translations.
    pub fn translations(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::DescriptorInconsistency("translation group needs m >= 1".into()));
        }
        let basis = (0..m)
            .map(|i| {
                let mut e = DMatrix::zeros(m + 1, m + 1);
                e[(i, m)] = 1.0;
                e
            })
            .collect();
        Self::new(format!("R^{m}"), GroupKind::Translation, basis, 1e-8, None)
    }

    pub fn from_spec(spec: &DescriptorSpec) -> Result<Self> {
        let m = spec.matrix_dim;
        let basis = spec
            .basis
            .iter()
            .enumerate()
            .map(|(i, flat)| {
                if flat.len() != m * m {
                    Err(Error::DescriptorInconsistency(format!(
                        "{}: basis element {i} has {} entries, expected {}",
                        spec.name,
                        flat.len(),
                        m * m
                    )))
                } else {
                    Ok(DMatrix::from_row_slice(m, m, flat))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            spec.name.clone(),
            spec.kind,
            basis,
            spec.membership_tol,
            spec.injectivity_radius,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DescriptorSpec =
            serde_json::from_str(text).map_err(|e| Error::DescriptorInconsistency(e.to_string()))?;
        Self::from_spec(&spec)
    }

    /// Looks up a built-in group by name: `so3`, `so2`, `so<n>`, `r<m>`.
    pub fn preset(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        if let Some(n) = lower.strip_prefix("so") {
            let n: usize = n.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| {
                Error::Config(format!("unknown group preset '{name}'"))
            })?;
            return Self::so(n);
        }
        if let Some(m) = lower.strip_prefix("r").or_else(|| lower.strip_prefix("translations")) {
            let m: usize = m.trim_start_matches('^').parse().map_err(|_| {
                Error::Config(format!("unknown group preset '{name}'"))
            })?;
            return Self::translations(m);
        }
        Err(Error::Config(format!("unknown group preset '{name}'")))
    }

    pub fn to_spec(&self) -> DescriptorSpec {
        DescriptorSpec {
            name: self.name.clone(),
            kind: self.kind,
            matrix_dim: self.matrix_dim,
            basis: self
                .basis
                .iter()
                .map(|e| e.transpose().iter().copied().collect())
                .collect(),
            membership_tol: self.membership_tol,
            injectivity_radius: self.injectivity_radius.is_finite().then_some(self.injectivity_radius),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.matrix_dim
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    /// Structure constants, `c[k][(i, j)]` with `[E_i, E_j] = c^k_ij E_k`.
    pub fn structure_constants(&self) -> &[DMatrix<f64>] {
        &self.structure
    }

    /// True when every structure constant vanishes.
    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|c| c.amax() == 0.0)
    }

    /// Largest violation of antisymmetry and of the Jacobi identity among
    /// the structure constants.
    pub fn structure_residuals(&self) -> (f64, f64) {
        let d = self.dim();
        let mut anti: f64 = 0.0;
        for c in &self.structure {
            anti = anti.max((c + c.transpose()).amax());
        }
        let mut jacobi: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for m in 0..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += self.structure[l][(i, j)] * self.structure[m][(l, k)]
                                + self.structure[l][(j, k)] * self.structure[m][(l, i)]
                                + self.structure[l][(k, i)] * self.structure[m][(l, j)];
                        }
                        jacobi = jacobi.max(s.abs());
                    }
                }
            }
        }
        (anti, jacobi)
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement::zeros(self.dim())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(DMatrix::identity(self.matrix_dim, self.matrix_dim))
    }

    fn check_algebra(&self, xi: &AlgebraElement) -> Result<()> {
        check_dim(self.dim(), xi.dim(), "algebra element")
    }

    fn check_matrix(&self, m: &DMatrix<f64>) -> Result<()> {
        check_dim(self.matrix_dim, m.nrows(), "matrix rows")?;
        check_dim(self.matrix_dim, m.ncols(), "matrix columns")
    }

    /// Matrix representative `sum xi_i E_i`.
    pub fn hat(&self, xi: &AlgebraElement) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.matrix_dim, self.matrix_dim);
        for (c, e) in xi.0.iter().zip(&self.basis) {
            if *c != 0.0 {
                out += e * *c;
            }
        }
        out
    }

    /// Orthogonal projection onto the basis span without a residual check.
    pub fn vee_unchecked(&self, m: &DMatrix<f64>) -> AlgebraElement {
        let rhs = DVector::from_iterator(self.dim(), self.basis.iter().map(|e| e.dot(m)));
        AlgebraElement(&self.gram_inv * rhs)
    }

    /// Coordinates of a matrix in the basis; fails when the matrix is not in
    /// the span.
    pub fn vee(&self, m: &DMatrix<f64>) -> Result<AlgebraElement> {
        self.check_matrix(m)?;
        let xi = self.vee_unchecked(m);
        let residual = (self.hat(&xi) - m).norm();
        if residual > SPAN_TOL * m.norm().max(1.0) {
            return Err(Error::DescriptorInconsistency(format!(
                "{}: matrix is not in the algebra (residual {residual:.3e})",
                self.name
            )));
        }
        Ok(xi)
    }

    /// Lie bracket computed from the structure constants.
    pub fn bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for (k, c) in self.structure.iter().enumerate() {
            out[k] = (a.0.transpose() * c * &b.0)[(0, 0)];
        }
        AlgebraElement(out)
    }

    /// Matrix of `ad_a` acting on coordinates.
    pub fn ad_matrix(&self, a: &AlgebraElement) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |k, j| {
            (0..d).map(|i| a.0[i] * self.structure[k][(i, j)]).sum()
        })
    }

    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        GroupElement(&g.0 * &h.0)
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_matrix(&g.0)?;
        match self.kind {
            GroupKind::Orthogonal => Ok(GroupElement(g.0.transpose())),
            GroupKind::Translation => {
                let m = self.matrix_dim;
                let mut out = g.0.clone();
                for i in 0..m - 1 {
                    out[(i, m - 1)] = -g.0[(i, m - 1)];
                }
                Ok(GroupElement(out))
            }
            GroupKind::General => g
                .0
                .clone()
                .try_inverse()
                .map(GroupElement)
                .ok_or_else(|| Error::Domain("singular matrix has no inverse".into())),
        }
    }

    /// Distance from the group; zero for exact members.
    pub fn membership_residual(&self, m: &DMatrix<f64>) -> f64 {
        if m.nrows() != self.matrix_dim || m.ncols() != self.matrix_dim {
            return f64::INFINITY;
        }
        if m.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let n = self.matrix_dim;
        match self.kind {
            GroupKind::Orthogonal => {
                let orth = (m.transpose() * m - DMatrix::identity(n, n)).norm();
                orth + (m.determinant() - 1.0).abs()
            }
            GroupKind::Translation => {
                let mut r = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if j == n - 1 && i < n - 1 {
                            continue;
                        }
                        let target = if i == j { 1.0 } else { 0.0 };
                        r += (m[(i, j)] - target).powi(2);
                    }
                }
                r.sqrt()
            }
            GroupKind::General => {
                if m.determinant().abs() > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Wraps a matrix after checking membership.
    pub fn element(&self, m: DMatrix<f64>) -> Result<GroupElement> {
        self.check_matrix(&m)?;
        let residual = self.membership_residual(&m);
        if residual > self.membership_tol {
            return Err(Error::NotInGroup {
                residual,
                tol: self.membership_tol,
            });
        }
        Ok(GroupElement(m))
    }

    /// Nearest group element to a matrix that is close to the group.
    pub fn retract(&self, m: &DMatrix<f64>) -> GroupElement {
        let n = self.matrix_dim;
        match self.kind {
            GroupKind::Orthogonal => {
                let svd = m.clone().svd(true, true);
                let mut u = svd.u.expect("u requested");
                let v_t = svd.v_t.expect("v_t requested");
                if (&u * &v_t).determinant() < 0.0 {
                    let last = u.ncols() - 1;
                    u.column_mut(last).neg_mut();
                }
                GroupElement(u * v_t)
            }
            GroupKind::Translation => {
                let mut out = DMatrix::identity(n, n);
                for i in 0..n - 1 {
                    out[(i, n - 1)] = m[(i, n - 1)];
                }
                GroupElement(out)
            }
            GroupKind::General => GroupElement(m.clone()),
        }
    }

    /// Exponential map.
    pub fn exp(&self, xi: &AlgebraElement) -> Result<GroupElement> {
        self.check_algebra(xi)?;
        if xi.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("exp of a non-finite algebra element".into()));
        }
        let k = self.hat(xi);
        let n = self.matrix_dim;
        let out = match (self.kind, n) {
            (GroupKind::Translation, _) => DMatrix::identity(n, n) + k,
            (GroupKind::Orthogonal, 2) => {
                let th = k[(1, 0)];
                let (s, c) = th.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            (GroupKind::Orthogonal, 3) => rodrigues(&k),
            (GroupKind::Orthogonal, _) => self.retract(&k.exp()).0,
            (GroupKind::General, _) => k.exp(),
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("exp overflowed".into()));
        }
        Ok(GroupElement(out))
    }

    /// Logarithm inside the injectivity radius.
    pub fn log(&self, g: &GroupElement) -> Result<AlgebraElement> {
        self.check_matrix(&g.0)?;
        let residual = self.membership_residual(&g.0);
        if residual > self.membership_tol {
            return Err(Error::NotInGroup {
                residual,
                tol: self.membership_tol,
            });
        }
        let n = self.matrix_dim;
        let xi = match (self.kind, n) {
            (GroupKind::Translation, _) => self.vee(&(&g.0 - DMatrix::identity(n, n)))?,
            (GroupKind::Orthogonal, 2) => {
                AlgebraElement::from_slice(&[g.0[(1, 0)].atan2(g.0[(0, 0)])])
            }
            (GroupKind::Orthogonal, 3) => {
                let r = &g.0;
                let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
                let th = cos.acos();
                if th > self.injectivity_radius {
                    return Err(Error::OutOfRange {
                        norm: th,
                        radius: self.injectivity_radius,
                    });
                }
                let factor = if th < 1e-6 {
                    1.0 + th * th / 6.0
                } else {
                    th / th.sin()
                };
                let skew = (r - r.transpose()) * (0.5 * factor);
                self.vee_unchecked(&skew)
            }
            _ => self.vee(&matrix_log(&g.0)?)?,
        };
        let norm = self.algebra_norm(&xi);
        if norm > self.injectivity_radius {
            return Err(Error::OutOfRange {
                norm,
                radius: self.injectivity_radius,
            });
        }
        Ok(xi)
    }

    /// Norm used for the injectivity radius: the rotation angle for
    /// orthogonal groups and the coordinate norm otherwise.
    pub fn algebra_norm(&self, xi: &AlgebraElement) -> f64 {
        match self.kind {
            GroupKind::Orthogonal => (self.hat(xi).norm_squared() / 2.0).sqrt(),
            _ => xi.norm(),
        }
    }

    /// Adjoint action `Ad_g xi = g xi g^-1`.
    pub fn adjoint(&self, g: &GroupElement, xi: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_algebra(xi)?;
        let ginv = self.inverse(g)?;
        let m = &g.0 * self.hat(xi) * &ginv.0;
        let out = self.vee_unchecked(&m);
        let residual = (self.hat(&out) - &m).norm();
        if residual > SPAN_TOL * m.norm().max(1.0) {
            return Err(Error::DescriptorInconsistency(format!(
                "{}: Ad_g leaves the algebra (residual {residual:.3e})",
                self.name
            )));
        }
        Ok(out)
    }

    /// `Ad_{g^-1} xi`.
    pub fn adjoint_inv(&self, g: &GroupElement, xi: &AlgebraElement) -> Result<AlgebraElement> {
        self.adjoint(&self.inverse(g)?, xi)
    }

    /// Matrix of `Ad_g` acting on coordinates.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            let col = self.adjoint(g, &AlgebraElement::basis(d, j))?;
            out.set_column(j, &col.0);
        }
        Ok(out)
    }

    /// Random algebra element with coordinates uniform in `[-r, r]`.
    pub fn sample_algebra<R: rand::Rng + ?Sized>(&self, rng: &mut R, r: f64) -> AlgebraElement {
        AlgebraElement(DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.random_range(-r..r)),
        ))
    }

    /// `exp` of a random algebra element with coordinates in `[-r, r]`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, r: f64) -> GroupElement {
        self.exp(&self.sample_algebra(rng, r))
            .expect("exp of a finite element succeeds")
    }

    /// Inverse of the differential of exp in right trivialization,
    /// truncated after the cubic term.
    pub fn dexpinv(&self, u: &AlgebraElement, k: &AlgebraElement) -> AlgebraElement {
        let uk = self.bracket(u, k);
        let uuk = self.bracket(u, &uk);
        AlgebraElement(&k.0 - &uk.0 * 0.5 + &uuk.0 * (1.0 / 12.0))
    }
}

fn rodrigues(k: &DMatrix<f64>) -> DMatrix<f64> {
    let th2 = 0.5 * k.norm_squared();
    let th = th2.sqrt();
    let (a, b) = if th < 1e-4 {
        (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
    } else {
        (th.sin() / th, (1.0 - th.cos()) / th2)
    };
    DMatrix::identity(3, 3) + k * a + k * k * b
}

/// Principal matrix logarithm by inverse scaling and squaring.
fn matrix_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::identity(n, n);
    let mut x = a.clone();
    let mut squarings = 0;
    while (&x - &id).norm() > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::Domain("matrix logarithm did not converge".into()));
        }
    }
    let e = &x - &id;
    let mut term = e.clone();
    let mut sum = e.clone();
    for j in 2..200 {
        term = &term * &e;
        let add = &term * (if j % 2 == 0 { -1.0 } else { 1.0 } / j as f64);
        sum += &add;
        if add.norm() < 1e-18 {
            break;
        }
    }
    Ok(sum * 2f64.powi(squarings))
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("square root iteration hit a singular matrix".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("square root iteration hit a singular matrix".into()))?;
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let delta = (&ny - &y).norm();
        y = ny;
        z = nz;
        if delta <= 1e-15 * y.norm().max(1.0) {
            return Ok(y);
        }
    }
    if y.iter().all(|v| v.is_finite()) {
        Ok(y)
    } else {
        Err(Error::Domain("square root iteration diverged".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let k = (m.norm().log2().ceil().max(0.0) as i32) + 4;
        let s = m / 2f64.powi(k);
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for j in 1..30 {
            term = &term * &s / j as f64;
            sum += &term;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn so3_bracket_convention() {
        let g = GroupDescriptor::so3();
        let e = |k| AlgebraElement::basis(3, k);
        assert_eq!(g.bracket(&e(0), &e(1)), e(2));
        assert_eq!(g.bracket(&e(1), &e(2)), e(0));
        assert_eq!(g.bracket(&e(2), &e(0)), e(1));
    }

    #[test]
    fn exp_quarter_turn_about_third_axis() {
        let g = GroupDescriptor::so3();
        let r = g.exp(&AlgebraElement::from_slice(&[0.0, 0.0, PI / 2.0])).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 1.]);
        assert!((r.0 - expected).norm() < 1e-15);
    }

    #[test]
    fn log_rejects_angle_beyond_radius() {
        let g = GroupDescriptor::so3();
        let r = g.exp(&AlgebraElement::from_slice(&[PI - 0.01, 0.0, 0.0])).unwrap();
        assert!(matches!(g.log(&r), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rodrigues_matches_series() {
        let g = GroupDescriptor::so3();
        let xi = AlgebraElement::from_slice(&[0.3, -1.1, 0.7]);
        let a = g.exp(&xi).unwrap();
        assert!((a.0 - taylor_exp(&g.hat(&xi))).norm() < 1e-13);
    }

    #[test]
    fn general_log_inverts_exp_on_so4() {
        let g = GroupDescriptor::so(4).unwrap();
        let xi = AlgebraElement::from_slice(&[0.3, -0.2, 0.5, 0.1, -0.4, 0.25]);
        let back = g.log(&g.exp(&xi).unwrap()).unwrap();
        assert!(back.distance(&xi) < 1e-10);
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let e = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let err = GroupDescriptor::new("bad", GroupKind::Orthogonal, vec![e.clone(), e * 2.0], 1e-8, None);
        assert!(matches!(err, Err(Error::DescriptorInconsistency(_))));
    }

    #[test]
    fn non_closed_span_is_rejected() {
        let a = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]);
        let b = DMatrix::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 0., -1., 0., 0.]);
        let err = GroupDescriptor::new("half", GroupKind::Orthogonal, vec![a, b], 1e-8, None);
        assert!(matches!(err, Err(Error::DescriptorInconsistency(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = GroupDescriptor::so3();
        let text = serde_json::to_string(&g.to_spec()).unwrap();
        let back = GroupDescriptor::from_json(&text).unwrap();
        for (a, b) in g.basis().iter().zip(back.basis()) {
            assert_eq!(a, b);
        }
        assert_eq!(back.injectivity_radius(), g.injectivity_radius());
    }

    #[test]
    fn translation_exp_log_are_exact() {
        let g = GroupDescriptor::translations(2).unwrap();
        let v = AlgebraElement::from_slice(&[1.5, -2.0]);
        let t = g.exp(&v).unwrap();
        assert_eq!(g.log(&t).unwrap(), v);
        let w = AlgebraElement::from_slice(&[0.25, 4.0]);
        let sum = g.compose(&t, &g.exp(&w).unwrap());
        assert_eq!(g.log(&sum).unwrap(), v + w);
    }

    #[test]
    fn retraction_restores_membership() {
        let g = GroupDescriptor::so3();
        let r = g.exp(&AlgebraElement::from_slice(&[0.2, 0.4, -0.1])).unwrap();
        let noisy = &r.0 + DMatrix::from_fn(3, 3, |i, j| 1e-7 * ((i * 3 + j) as f64).sin());
        let fixed = g.retract(&noisy);
        assert!(g.membership_residual(&fixed.0) < 1e-14);
        assert!(fixed.distance(&r) < 1e-6);
    }

    #[test]
    fn non_member_is_rejected_by_log() {
        let g = GroupDescriptor::so3();
        let m = DMatrix::identity(3, 3) * 1.01;
        assert!(matches!(g.log(&GroupElement(m)), Err(Error::NotInGroup { .. })));
    }
}
