//! The bipartite cat-qubit model: `L = aᵏ − αᵏ`, `H = L b† + L† b`,
//! `G = −iH − (κ/2) b†b`, the Lindbladian and its adjoint, the kernel basis
//! of `L`, and the projector onto the kernel manifold `H_L = ker L ⊗ |0⟩`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{coherent_state, FockDims, Ket, Operator, Space};
use crate::linalg;
use crate::sparse::SparseMat;
use crate::{C64, CMat};

/// Parameters generating the whole model.
///
/// `alpha` is stored real: a complex amplitude is reduced to its modulus by
/// a unitary change of frame before the model is built, which leaves the
/// dynamics equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    k: usize,
    alpha: f64,
    kappa: f64,
    dims: FockDims,
}

impl ModelParams {
    pub fn new(k: usize, alpha: f64, kappa: f64, dims: FockDims) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be ≥ 1".into()));
        }
        if kappa <= 0.0 || !kappa.is_finite() {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {kappa}")));
        }
        if dims.na() <= k {
            return Err(Error::InvalidParams(format!(
                "na must exceed k so that L acts nontrivially (na={}, k={k})",
                dims.na()
            )));
        }
        if dims.nb() < 2 {
            return Err(Error::InvalidParams(format!("nb must be ≥ 2, got {}", dims.nb())));
        }
        Ok(Self {
            k,
            alpha: alpha.abs(),
            kappa,
            dims,
        })
    }

    /// Reduce a complex cat amplitude to its modulus.
    pub fn from_complex_alpha(k: usize, alpha: C64, kappa: f64, dims: FockDims) -> Result<Self> {
        Self::new(k, alpha.norm(), kappa, dims)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dims(&self) -> FockDims {
        self.dims
    }

    /// Interior margin used by the matrix-identity checks: `2k` levels in
    /// mode a and one level in mode b.
    pub fn interior_margins(&self) -> (usize, usize) {
        (2 * self.k, 1)
    }
}

/// Assembled model operators plus cached sparse forms for the integrators.
#[derive(Debug, Clone)]
pub struct CatModel {
    params: ModelParams,
    op_l: Operator,
    hamiltonian: Operator,
    damping: Operator,
    lindblad_ops: Vec<(f64, Operator)>,
    sp_h: SparseMat,
    sp_b: SparseMat,
    sp_bdag: SparseMat,
    sp_nb: SparseMat,
}

/// Build `L`, `H` and `G` from the parameters.
pub fn build_model(params: ModelParams) -> Result<CatModel> {
    let dims = params.dims();
    let a = Operator::annihilation(Space::A, dims)?;
    let alpha_k = params.alpha().powi(params.k() as i32);
    let op_l = &a.pow(params.k()) - &Operator::identity(Space::A, dims).scale(C64::new(alpha_k, 0.0));

    let b = Operator::annihilation(Space::B, dims)?;
    let l_joint = op_l.embed();
    let b_joint = b.embed();
    let hamiltonian = &(&l_joint * &b_joint.adjoint()) + &(&l_joint.adjoint() * &b_joint);

    CatModel::assemble(params, op_l, hamiltonian, b_joint)
}

impl CatModel {
    fn assemble(
        params: ModelParams,
        op_l: Operator,
        hamiltonian: Operator,
        b_joint: Operator,
    ) -> Result<Self> {
        let nb_joint = &b_joint.adjoint() * &b_joint;
        let damping = &hamiltonian.scale(C64::new(0.0, -1.0))
            - &nb_joint.scale(C64::new(params.kappa() / 2.0, 0.0));

        let sp_h = SparseMat::from_dense(hamiltonian.matrix(), 0.0);
        let sp_b = SparseMat::from_dense(b_joint.matrix(), 0.0);
        let sp_bdag = SparseMat::from_dense(&b_joint.matrix().adjoint(), 0.0);
        let sp_nb = SparseMat::from_dense(nb_joint.matrix(), 0.0);

        Ok(Self {
            params,
            op_l,
            hamiltonian,
            damping,
            lindblad_ops: vec![(params.kappa(), b_joint)],
            sp_h,
            sp_b,
            sp_bdag,
            sp_nb,
        })
    }

    /// Degenerate variant with the coupling switched off (`H = 0`), leaving
    /// pure buffer decay `κ D[b]`. Exposed for integrator tests.
    pub fn pure_decay(kappa: f64, dims: FockDims) -> Result<Self> {
        let params = ModelParams::new(1, 0.0, kappa, dims)?;
        let op_l = Operator::zeros(Space::A, dims);
        let hamiltonian = Operator::zeros(Space::AB, dims);
        let b_joint = Operator::annihilation(Space::B, dims)?.embed();
        Self::assemble(params, op_l, hamiltonian, b_joint)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dims(&self) -> FockDims {
        self.params.dims()
    }

    /// `L = aᵏ − αᵏ` on mode a.
    pub fn op_l(&self) -> &Operator {
        &self.op_l
    }

    /// `H = L b† + L† b` on the joint space.
    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    /// `G = −iH − (κ/2) b†b` on the joint space.
    pub fn damping(&self) -> &Operator {
        &self.damping
    }

    /// The dissipation channels: here the single pair `(κ, b)`.
    pub fn lindblad_ops(&self) -> &[(f64, Operator)] {
        &self.lindblad_ops
    }

    /// `L(ρ) = −i[H,ρ] + κ(bρb† − ½b†bρ − ½ρb†b)` on raw matrices.
    pub fn apply_lindbladian(&self, rho: &CMat) -> CMat {
        let h_rho = self.sp_h.mul_dense(rho);
        let rho_h = self.sp_h.dense_mul(rho);
        let b_rho = self.sp_b.mul_dense(rho);
        let b_rho_bdag = self.sp_bdag.dense_mul(&b_rho);
        let n_rho = self.sp_nb.mul_dense(rho);
        let rho_n = self.sp_nb.dense_mul(rho);

        let kappa = C64::new(self.params.kappa(), 0.0);
        let half = C64::new(0.5, 0.0);
        (h_rho - rho_h).map(|z| -C64::i() * z)
            + (b_rho_bdag - (n_rho + rho_n).map(|z| half * z)).map(|z| kappa * z)
    }

    /// `L*(X) = i[H,X] + κ(b†Xb − ½b†bX − ½Xb†b)` on raw matrices.
    pub fn apply_adjoint_lindbladian(&self, x: &CMat) -> CMat {
        let h_x = self.sp_h.mul_dense(x);
        let x_h = self.sp_h.dense_mul(x);
        let bdag_x = self.sp_bdag.mul_dense(x);
        let bdag_x_b = self.sp_b.dense_mul(&bdag_x);
        let n_x = self.sp_nb.mul_dense(x);
        let x_n = self.sp_nb.dense_mul(x);

        let kappa = C64::new(self.params.kappa(), 0.0);
        let half = C64::new(0.5, 0.0);
        (h_x - x_h).map(|z| C64::i() * z)
            + (bdag_x_b - (n_x + x_n).map(|z| half * z)).map(|z| kappa * z)
    }

    /// Interior indices with the model's default margins.
    pub fn interior_indices(&self) -> Vec<usize> {
        let (ma, mb) = self.params.interior_margins();
        self.dims().interior_indices(ma, mb)
    }
}

/// Schrödinger-picture generator applied to an operator-typed state.
pub fn lindbladian_apply(model: &CatModel, rho: &Operator) -> Result<Operator> {
    if rho.space() != Space::AB || rho.dims() != model.dims() {
        return Err(Error::SpaceMismatch {
            expected: "AB at model dims".into(),
            got: format!("{}", rho.space()),
        });
    }
    Operator::from_matrix(Space::AB, model.dims(), model.apply_lindbladian(rho.matrix()))
}

/// Heisenberg-picture generator applied to an observable.
pub fn adjoint_lindbladian_apply(model: &CatModel, x: &Operator) -> Result<Operator> {
    if x.space() != Space::AB || x.dims() != model.dims() {
        return Err(Error::SpaceMismatch {
            expected: "AB at model dims".into(),
            got: format!("{}", x.space()),
        });
    }
    Operator::from_matrix(Space::AB, model.dims(), model.apply_adjoint_lindbladian(x.matrix()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelConstruction {
    /// `α = 0`: the Fock states `|0⟩..|k−1⟩`.
    Fock,
    /// `α ≠ 0`: orthonormalized cat combinations of coherent states.
    Cat,
}

/// Orthonormal basis of `ker L` on mode a.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    /// `k` orthonormal mode-a kets spanning the kernel.
    pub vectors: Vec<Ket>,
    /// Primitive k-th root of unity `ω = e^{2πi/k}`.
    pub omega: C64,
    pub construction: KernelConstruction,
    /// Largest truncation tail among the constituent coherent states.
    pub max_tail: f64,
    /// Largest off-diagonal Gram entry of the raw (pre-cleanup) vectors.
    pub gram_defect: f64,
}

impl KernelBasis {
    /// Truncation-aware bound for `‖L ψ_r‖`.
    ///
    /// Each kernel vector is built from coherent states that lose a tail of
    /// mass `t`; the annihilation residual concentrates on the top `k`
    /// levels, whose amplitudes are at most `√t · na^{k/2}/α^k` apart from
    /// combinatorial factors. The factor 10 absorbs those.
    pub fn annihilation_residual_bound(&self, params: &ModelParams) -> f64 {
        let k = params.k() as f64;
        let na = params.dims().na() as f64;
        10.0 * (k * self.max_tail).sqrt() * na.powf(k / 2.0) + 1e-12
    }
}

/// Orthonormal kernel basis of `L`.
///
/// For `α=0` the kernel is spanned by the first `k` Fock states. For
/// `α≠0` the vectors `ψ_L^r = Σ_j ω^{rj}|αω^j⟩` are built from truncated
/// coherent states; each is supported on the Fock levels `n ≡ k−r (mod k)`,
/// so distinct `r` are orthogonal by residue class and only the
/// normalization is numerical. Components off the residue class (rounding
/// noise) are zeroed.
pub fn kernel_basis(params: &ModelParams) -> Result<KernelBasis> {
    let dims = params.dims();
    let k = params.k();
    let omega = C64::new(0.0, 2.0 * std::f64::consts::PI / k as f64).exp();

    if params.alpha() == 0.0 {
        let vectors: Result<Vec<Ket>> = (0..k).map(|r| Ket::basis(Space::A, dims, r)).collect();
        return Ok(KernelBasis {
            vectors: vectors?,
            omega,
            construction: KernelConstruction::Fock,
            max_tail: 0.0,
            gram_defect: 0.0,
        });
    }

    let mut max_tail = 0.0_f64;
    let mut constituents = Vec::with_capacity(k);
    for j in 0..k {
        let z = C64::new(params.alpha(), 0.0) * omega.powu(j as u32);
        let c = coherent_state(Space::A, dims, z, 1e-6)?;
        max_tail = max_tail.max(c.tail_mass);
        constituents.push(c.ket);
    }

    let mut raw = Vec::with_capacity(k);
    for r in 0..k {
        let mut amp = crate::CVec::zeros(dims.na());
        for (j, c) in constituents.iter().enumerate() {
            let w = omega.powu((r * j) as u32);
            amp += c.amplitudes().map(|u| w * u);
        }
        raw.push(amp);
    }

    // Gram defect of the raw normalized vectors, before residue cleanup.
    let mut gram_defect = 0.0_f64;
    let norms: Vec<f64> = raw.iter().map(|v| v.norm()).collect();
    for r in 0..k {
        for s in 0..k {
            if r != s && norms[r] > 0.0 && norms[s] > 0.0 {
                let g = raw[r].dotc(&raw[s]).norm() / (norms[r] * norms[s]);
                gram_defect = gram_defect.max(g);
            }
        }
    }
    if gram_defect > 1e-8 {
        return Err(Error::TruncationTooSmall(format!(
            "kernel Gram defect {gram_defect:.3e} exceeds 1e-8; increase na"
        )));
    }
    // the residue-class construction keeps the Gram defect at rounding level
    // even when the truncation is hopeless, so gate on the annihilation
    // residual implied by the coherent tails as well
    let residual_scale =
        10.0 * (k as f64 * max_tail).sqrt() * (dims.na() as f64).powf(k as f64 / 2.0);
    if residual_scale > 1e-2 {
        return Err(Error::TruncationTooSmall(format!(
            "coherent tails give an L-annihilation residual scale {residual_scale:.3e}; increase na"
        )));
    }

    let mut vectors = Vec::with_capacity(k);
    for (r, mut amp) in raw.into_iter().enumerate() {
        let residue = (k - r) % k;
        for n in 0..dims.na() {
            if n % k != residue {
                amp[n] = C64::new(0.0, 0.0);
            }
        }
        let norm = amp.norm();
        if norm < 1e-12 {
            return Err(Error::TruncationTooSmall(format!(
                "kernel vector r={r} has no support below the truncation"
            )));
        }
        vectors.push(Ket::from_vec(Space::A, dims, amp / C64::new(norm, 0.0))?);
    }

    Ok(KernelBasis {
        vectors,
        omega,
        construction: KernelConstruction::Cat,
        max_tail,
        gram_defect,
    })
}

/// Projector `Π_L = Σ_r |ψ_L^r⟩⟨ψ_L^r| ⊗ |0⟩⟨0|` onto the kernel manifold.
pub fn projector_hl(model: &CatModel) -> Result<Operator> {
    let basis = kernel_basis(model.params())?;
    projector_from_basis(model, &basis)
}

/// Same as [`projector_hl`] but reusing an existing kernel basis.
pub fn projector_from_basis(model: &CatModel, basis: &KernelBasis) -> Result<Operator> {
    let dims = model.dims();
    let vac_b = Ket::basis(Space::B, dims, 0)?;
    let mut mat = CMat::zeros(dims.joint(), dims.joint());
    for v in &basis.vectors {
        let joint = Ket::tensor(v, &vac_b)?;
        mat += joint.outer(&joint).matrix();
    }
    Operator::from_matrix(Space::AB, dims, mat)
}

/// Hermitian-floor helper: smallest eigenvalue of an operator compressed to
/// the given index set.
pub fn min_interior_eigenvalue(op: &Operator, idx: &[usize]) -> f64 {
    linalg::min_eigvalsh(&linalg::compress(op.matrix(), idx))
}

/// Binomial coefficient as f64 (arguments stay tiny here).
pub fn binomial(n: usize, r: usize) -> f64 {
    let mut acc = 1.0_f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Falling-factorial ratio `k!/r!` as f64.
pub fn falling_factorial(k: usize, r: usize) -> f64 {
    let mut acc = 1.0_f64;
    for i in (r + 1)..=k {
        acc *= i as f64;
    }
    acc
}
