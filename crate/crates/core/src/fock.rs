//! Truncated-Fock-space linear algebra: kets, operators, ladder operators,
//! coherent/displaced/rotated states, norms, and commutators.
//!
//! Conventions: mode `a` keeps `na` levels `0..na−1`, mode `b` keeps `nb`.
//! Joint objects use A-index-major ordering, i.e. the joint basis index of
//! `|n⟩⊗|m⟩` is `n·nb + m`, matching the Kronecker product `A ⊗ B`.
//! Ladder operators are the exact matrices of the truncated basis (hard
//! cutoff); the resulting top-level defect of `[a,a†]` is quarantined
//! downstream by interior-subspace projections.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::{C64, CMat, CVec};

/// Which factor of `H = H_a ⊗ H_b` an object lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Space {
    A,
    B,
    AB,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::A => write!(f, "A"),
            Space::B => write!(f, "B"),
            Space::AB => write!(f, "AB"),
        }
    }
}

/// Fock truncations of the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FockDims {
    na: usize,
    nb: usize,
}

impl FockDims {
    pub fn new(na: usize, nb: usize) -> Result<Self> {
        if na == 0 || nb == 0 {
            return Err(Error::InvalidDimension(format!(
                "Fock truncations must be at least 1, got na={na}, nb={nb}"
            )));
        }
        Ok(Self { na, nb })
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn joint(&self) -> usize {
        self.na * self.nb
    }

    pub fn dim_of(&self, space: Space) -> usize {
        match space {
            Space::A => self.na,
            Space::B => self.nb,
            Space::AB => self.joint(),
        }
    }

    /// Joint index of `|n⟩⊗|m⟩`.
    pub fn joint_index(&self, n: usize, m: usize) -> usize {
        debug_assert!(n < self.na && m < self.nb);
        n * self.nb + m
    }

    /// Decompose a joint index into `(a-level, b-level)`.
    pub fn levels_of(&self, idx: usize) -> (usize, usize) {
        (idx / self.nb, idx % self.nb)
    }

    /// Joint indices with a-level `< na − margin_a` and b-level `< nb − margin_b`.
    ///
    /// This is the interior subspace on which ladder identities are
    /// uncorrupted by the cutoff.
    pub fn interior_indices(&self, margin_a: usize, margin_b: usize) -> Vec<usize> {
        let ka = self.na.saturating_sub(margin_a);
        let kb = self.nb.saturating_sub(margin_b);
        let mut idx = Vec::with_capacity(ka * kb);
        for n in 0..ka {
            for m in 0..kb {
                idx.push(self.joint_index(n, m));
            }
        }
        idx
    }

    /// Joint indices on the top truncation band (highest level of either mode).
    pub fn top_band_indices(&self) -> Vec<usize> {
        let mut idx = Vec::new();
        for n in 0..self.na {
            for m in 0..self.nb {
                if n == self.na - 1 || m == self.nb - 1 {
                    idx.push(self.joint_index(n, m));
                }
            }
        }
        idx
    }
}

/// State vector on one of the three spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: Space,
    dims: FockDims,
    amp: CVec,
}

impl Ket {
    pub fn from_vec(space: Space, dims: FockDims, amp: CVec) -> Result<Self> {
        if amp.len() != dims.dim_of(space) {
            return Err(Error::InvalidDimension(format!(
                "ket length {} does not match space {space} dimension {}",
                amp.len(),
                dims.dim_of(space)
            )));
        }
        Ok(Self { space, dims, amp })
    }

    /// Fock basis state `|index⟩`.
    pub fn basis(space: Space, dims: FockDims, index: usize) -> Result<Self> {
        let dim = dims.dim_of(space);
        if index >= dim {
            return Err(Error::InvalidDimension(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amp = CVec::zeros(dim);
        amp[index] = C64::new(1.0, 0.0);
        Ok(Self { space, dims, amp })
    }

    /// Joint basis state `|n⟩⊗|m⟩`.
    pub fn joint_basis(dims: FockDims, n: usize, m: usize) -> Result<Self> {
        if n >= dims.na() || m >= dims.nb() {
            return Err(Error::InvalidDimension(format!(
                "joint basis ({n},{m}) out of range for dims ({},{})",
                dims.na(),
                dims.nb()
            )));
        }
        Self::basis(Space::AB, dims, dims.joint_index(n, m))
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dims(&self) -> FockDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    pub fn normalize(&self) -> Ket {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize a zero ket");
        Ket {
            space: self.space,
            dims: self.dims,
            amp: &self.amp / C64::new(n, 0.0),
        }
    }

    /// `⟨self|other⟩`.
    pub fn dot(&self, other: &Ket) -> C64 {
        assert_eq!(self.space, other.space, "dot requires matching spaces");
        self.amp.dotc(&other.amp)
    }

    /// `|self⟩⟨other|` as an operator.
    pub fn outer(&self, other: &Ket) -> Operator {
        assert_eq!(self.space, other.space, "outer requires matching spaces");
        let mat = &self.amp * other.amp.adjoint();
        Operator {
            space: self.space,
            dims: self.dims,
            mat,
        }
    }

    /// Density matrix `|self⟩⟨self|` of the normalized ket.
    pub fn density(&self) -> Operator {
        let n = self.normalize();
        n.outer(&n)
    }

    /// Tensor product of a mode-a ket with a mode-b ket.
    pub fn tensor(a: &Ket, b: &Ket) -> Result<Ket> {
        if a.space != Space::A || b.space != Space::B {
            return Err(Error::SpaceMismatch {
                expected: "A ⊗ B".into(),
                got: format!("{} ⊗ {}", a.space, b.space),
            });
        }
        if a.dims != b.dims {
            return Err(Error::InvalidDimension("tensor of kets with different dims".into()));
        }
        let dims = a.dims;
        let mut amp = CVec::zeros(dims.joint());
        for n in 0..dims.na() {
            for m in 0..dims.nb() {
                amp[dims.joint_index(n, m)] = a.amp[n] * b.amp[m];
            }
        }
        Ok(Ket {
            space: Space::AB,
            dims,
            amp,
        })
    }
}

/// Truncated coherent state together with its truncation certificate.
#[derive(Debug, Clone)]
pub struct CoherentKet {
    /// Renormalized truncated coherent state.
    pub ket: Ket,
    /// Probability mass of the dropped series tail, `e^{−|z|²} Σ_{m≥n} |z|^{2m}/m!`.
    pub tail_mass: f64,
    /// Set when the tail mass exceeded the caller-supplied tolerance.
    pub truncation_warning: bool,
}

/// Coherent state `|z⟩` truncated to `n` levels and renormalized.
///
/// The dropped tail mass is reported rather than raised: a heavy tail flags
/// `truncation_warning` against `tail_tol` but still returns the state.
pub fn coherent_state(space: Space, dims: FockDims, z: C64, tail_tol: f64) -> Result<CoherentKet> {
    if space == Space::AB {
        return Err(Error::SpaceMismatch {
            expected: "single mode".into(),
            got: "AB".into(),
        });
    }
    let n = dims.dim_of(space);
    let mut amp = CVec::zeros(n);
    let prefactor = (-z.norm_sqr() / 2.0).exp();
    let mut coeff = C64::new(prefactor, 0.0);
    for m in 0..n {
        amp[m] = coeff;
        coeff *= z / C64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    // tail = e^{−x} Σ_{m≥n} x^m/m!, summed directly to avoid cancellation
    let x = z.norm_sqr();
    let mut term = (-x).exp();
    for m in 1..=n {
        term *= x / m as f64;
    }
    let mut tail = 0.0;
    let mut m = n;
    loop {
        tail += term;
        m += 1;
        term *= x / m as f64;
        if term < 1e-300 || term < 1e-18 * tail.max(1e-30) {
            break;
        }
    }
    let kept = amp.norm();
    if kept == 0.0 {
        return Err(Error::TruncationTooSmall(format!(
            "coherent state |z|={} has no mass below level {n}",
            z.norm()
        )));
    }
    let ket = Ket {
        space,
        dims,
        amp: amp / C64::new(kept, 0.0),
    };
    Ok(CoherentKet {
        ket,
        tail_mass: tail,
        truncation_warning: tail > tail_tol,
    })
}

/// Matrix of the annihilation operator on `n` levels: entry `(m−1, m) = √m`.
pub fn annihilation_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidDimension("annihilation requires n ≥ 1".into()));
    }
    let mut mat = CMat::zeros(n, n);
    for m in 1..n {
        mat[(m - 1, m)] = C64::new((m as f64).sqrt(), 0.0);
    }
    Ok(mat)
}

/// Operator on one of the three spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: Space,
    dims: FockDims,
    mat: CMat,
}

impl Operator {
    pub fn from_matrix(space: Space, dims: FockDims, mat: CMat) -> Result<Self> {
        let dim = dims.dim_of(space);
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::InvalidDimension(format!(
                "operator is {}×{} but space {space} has dimension {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { space, dims, mat })
    }

    pub fn identity(space: Space, dims: FockDims) -> Self {
        let dim = dims.dim_of(space);
        Self {
            space,
            dims,
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn zeros(space: Space, dims: FockDims) -> Self {
        let dim = dims.dim_of(space);
        Self {
            space,
            dims,
            mat: CMat::zeros(dim, dim),
        }
    }

    /// Single-mode annihilation operator.
    pub fn annihilation(space: Space, dims: FockDims) -> Result<Self> {
        if space == Space::AB {
            return Err(Error::SpaceMismatch {
                expected: "single mode".into(),
                got: "AB".into(),
            });
        }
        let mat = annihilation_matrix(dims.dim_of(space))?;
        Ok(Self { space, dims, mat })
    }

    /// Single-mode creation operator.
    pub fn creation(space: Space, dims: FockDims) -> Result<Self> {
        Ok(Self::annihilation(space, dims)?.adjoint())
    }

    /// Single-mode number operator `a†a`.
    pub fn number(space: Space, dims: FockDims) -> Result<Self> {
        if space == Space::AB {
            return Err(Error::SpaceMismatch {
                expected: "single mode".into(),
                got: "AB".into(),
            });
        }
        let n = dims.dim_of(space);
        let mat = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self { space, dims, mat })
    }

    /// Rotation `e^{iθ a†a}`: diagonal `e^{iθm}`, exactly unitary at any
    /// truncation. `rotation(π)` is the parity operator.
    pub fn rotation(space: Space, dims: FockDims, theta: f64) -> Result<Self> {
        if space == Space::AB {
            return Err(Error::SpaceMismatch {
                expected: "single mode".into(),
                got: "AB".into(),
            });
        }
        let n = dims.dim_of(space);
        let mat = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(0.0, theta * i as f64).exp()
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self { space, dims, mat })
    }

    /// Glauber displacement `exp(α a† − ᾱ a)` on the truncated space.
    ///
    /// Computed through the eigendecomposition of the Hermitian generator
    /// `−i(α a† − ᾱ a)`, so the result is unitary to eigensolver precision.
    pub fn displacement(space: Space, dims: FockDims, alpha: C64) -> Result<Self> {
        let a = Self::annihilation(space, dims)?;
        let adag = a.adjoint();
        let gen = adag.mat.map(|z| alpha * z) - a.mat.map(|z| alpha.conj() * z);
        let herm = gen.map(|z| -C64::i() * z);
        let (vals, vecs) = linalg::hermitian_eigen(&herm);
        let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&l| C64::new(0.0, l).exp()));
        let mat = &vecs * CMat::from_diagonal(&phases) * vecs.adjoint();
        Ok(Self {
            space,
            dims: a.dims,
            mat,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dims(&self) -> FockDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            space: self.space,
            dims: self.dims,
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator {
            space: self.space,
            dims: self.dims,
            mat: self.mat.map(|z| c * z),
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.diagonal().sum()
    }

    /// Trace norm: sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        linalg::singular_values(&self.mat).iter().sum()
    }

    /// Hilbert–Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.mat - self.mat.adjoint()).norm() <= tol
    }

    /// Matrix power with a small non-negative exponent.
    pub fn pow(&self, exp: usize) -> Operator {
        let mut out = Operator::identity(self.space, self.dims);
        for _ in 0..exp {
            out = &out * self;
        }
        out
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        assert_eq!(self.space, ket.space, "apply requires matching spaces");
        Ket {
            space: ket.space,
            dims: ket.dims,
            amp: &self.mat * &ket.amp,
        }
    }

    /// Embed a single-mode operator into the joint space
    /// (`X ↦ X⊗I_b` or `Y ↦ I_a⊗Y`). Joint operators pass through.
    pub fn embed(&self) -> Operator {
        match self.space {
            Space::AB => self.clone(),
            Space::A => {
                let ib = Operator::identity(Space::B, self.dims);
                tensor(self, &ib).expect("embed_a")
            }
            Space::B => {
                let ia = Operator::identity(Space::A, self.dims);
                tensor(&ia, self).expect("embed_b")
            }
        }
    }
}

/// Kronecker product of a mode-a operator with a mode-b operator,
/// A-index major.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.space != Space::A || b.space != Space::B {
        return Err(Error::SpaceMismatch {
            expected: "A ⊗ B".into(),
            got: format!("{} ⊗ {}", a.space, b.space),
        });
    }
    if a.dims != b.dims {
        return Err(Error::InvalidDimension("tensor of operators with different dims".into()));
    }
    let mat = a.mat.kronecker(&b.mat);
    Ok(Operator {
        space: Space::AB,
        dims: a.dims,
        mat,
    })
}

/// `[X, Y] = XY − YX`.
pub fn commutator(x: &Operator, y: &Operator) -> Result<Operator> {
    if x.space != y.space || x.dims != y.dims {
        return Err(Error::SpaceMismatch {
            expected: format!("{}", x.space),
            got: format!("{}", y.space),
        });
    }
    let mat = &x.mat * &y.mat - &y.mat * &x.mat;
    Ok(Operator {
        space: x.space,
        dims: x.dims,
        mat,
    })
}

/// Iterated right commutator: `[X,Y]⁽¹⁾ = [X,Y]`, `[X,Y]⁽ˢ⁾ = [[X,Y]⁽ˢ⁻¹⁾, Y]`.
pub fn iterated_commutator(x: &Operator, y: &Operator, s: usize) -> Result<Operator> {
    if s == 0 {
        return Err(Error::InvalidArgument(
            "iterated commutator depth must be at least 1".into(),
        ));
    }
    let mut out = commutator(x, y)?;
    for _ in 1..s {
        out = commutator(&out, y)?;
    }
    Ok(out)
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for &Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                assert_eq!(self.space, rhs.space, "operator spaces must match");
                assert_eq!(self.dims, rhs.dims, "operator dims must match");
                Operator {
                    space: self.space,
                    dims: self.dims,
                    mat: &self.mat $op &rhs.mat,
                }
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces must match");
        assert_eq!(self.dims, rhs.dims, "operator dims must match");
        Operator {
            space: self.space,
            dims: self.dims,
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl std::ops::Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

/// `Tr(ρ X)` for two matrices on the same space.
pub fn pair_trace(rho: &CMat, x: &CMat) -> C64 {
    debug_assert_eq!(rho.nrows(), x.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..rho.nrows() {
        for k in 0..rho.ncols() {
            acc += rho[(i, k)] * x[(k, i)];
        }
    }
    acc
}

/// Hilbert–Schmidt pairing `⟨⟨X, Y⟩⟩ = Tr(X† Y)`.
pub fn hs_pairing(x: &CMat, y: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            acc += x[(i, j)].conj() * y[(i, j)];
        }
    }
    acc
}

pub(crate) fn factorial_sqrt(m: usize) -> f64 {
    let mut acc = 1.0_f64;
    for j in 1..=m {
        acc *= (j as f64).sqrt();
    }
    acc
}
