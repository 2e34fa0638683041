//! Krylov-span density probes.
//!
//! The convergence theorem needs the span of all words in `{G†, b†}`
//! applied to the kernel manifold to be dense. At finite truncation that
//! becomes a numerical-rank statement on an interior subspace: generate the
//! span breadth-first with modified Gram–Schmidt (one reorthogonalization
//! pass), project onto the interior, and count singular values above a
//! relative threshold. The single-mode variants probe the same question
//! for `span{L†ʲ v}` with and without the iterated-commutator enrichment.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{iterated_commutator, FockDims, Ket, Operator, Space};
use crate::linalg;
use crate::model::{binomial, build_model, falling_factorial, kernel_basis, CatModel, ModelParams};
use crate::sparse::SparseMat;
use crate::{C64, CMat, CVec};

pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-8;

/// Numerical rank of a generated span against an interior target space.
#[derive(Debug, Clone, Serialize)]
pub struct SpanReport {
    /// Dimension of the interior subspace being probed.
    pub target_dim: usize,
    /// Singular values above `threshold` relative to the largest.
    pub achieved_rank: usize,
    /// All singular values of the interior-projected basis, descending;
    /// the sub-threshold tail is the deficiency signal.
    pub residual_spectrum: Vec<f64>,
    pub degree_budget: usize,
    pub threshold: f64,
    /// Budget exhausted with the rank unchanged for three consecutive
    /// degrees while still below target.
    pub stalled: bool,
    /// Interior rank after each completed degree.
    pub rank_by_degree: Vec<usize>,
    /// Degrees whose generated vectors have truncation-exact interior
    /// components: `(na − interior_na)/reach` per application.
    pub uncorrupted_degree: usize,
    /// For single-mode runs: rank per Fock residue class mod k.
    pub class_ranks: Option<Vec<usize>>,
}

fn rank_of(matrix: &CMat, threshold: f64) -> (usize, Vec<f64>) {
    if matrix.ncols() == 0 {
        return (0, Vec::new());
    }
    let sigma = linalg::singular_values(matrix);
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return (0, sigma);
    }
    let rank = sigma.iter().filter(|&&s| s > threshold * smax).count();
    (rank, sigma)
}

struct SpanGenerator {
    basis: Vec<CVec>,
    threshold: f64,
}

impl SpanGenerator {
    fn new(threshold: f64) -> Self {
        Self {
            basis: Vec::new(),
            threshold,
        }
    }

    /// MGS-orthogonalize against the accumulated basis; keep the vector if
    /// its out-of-span component is above threshold. Returns whether it was
    /// added.
    fn push(&mut self, v: &CVec) -> bool {
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        let (r, rnorm) = linalg::mgs_residual(&self.basis, v);
        if rnorm <= self.threshold * scale {
            return false;
        }
        self.basis.push(r / C64::new(rnorm, 0.0));
        true
    }

    fn interior_matrix(&self, interior_rows: &[usize]) -> CMat {
        let mut m = CMat::zeros(interior_rows.len(), self.basis.len());
        for (c, v) in self.basis.iter().enumerate() {
            for (r, &row) in interior_rows.iter().enumerate() {
                m[(r, c)] = v[row];
            }
        }
        m
    }
}

/// Breadth-first span of words in `{G†, b†}` applied to the seeded kernel
/// manifold, rank-measured on the interior subspace.
pub fn generate_joint_span(
    model: &CatModel,
    degree_budget: usize,
    interior: FockDims,
) -> Result<SpanReport> {
    let dims = model.dims();
    let k = model.params().k();
    if interior.na() + 2 * k > dims.na() || interior.nb() + 2 > dims.nb() {
        return Err(Error::InvalidArgument(format!(
            "interior ({},{}) needs margins ≥ (2k={}, 2) inside dims ({},{})",
            interior.na(),
            interior.nb(),
            2 * k,
            dims.na(),
            dims.nb()
        )));
    }

    let basis = kernel_basis(model.params())?;
    let vac_b = Ket::basis(Space::B, dims, 0)?;
    let threshold = DEFAULT_RANK_THRESHOLD;
    let mut gen = SpanGenerator::new(threshold);
    let mut frontier: Vec<CVec> = Vec::new();
    for v in &basis.vectors {
        let joint = Ket::tensor(v, &vac_b)?;
        if gen.push(joint.amplitudes()) {
            frontier.push(gen.basis.last().unwrap().clone());
        }
    }

    let gdag = SparseMat::from_dense(&model.damping().matrix().adjoint(), 0.0);
    let bdag = SparseMat::from_dense(
        &Operator::annihilation(Space::B, dims)?.embed().matrix().adjoint(),
        0.0,
    );

    // interior joint indices in full-dims indexing
    let interior_rows: Vec<usize> = {
        let mut rows = Vec::new();
        for n in 0..interior.na() {
            for m in 0..interior.nb() {
                rows.push(dims.joint_index(n, m));
            }
        }
        rows
    };
    let target_dim = interior_rows.len();

    let mut rank_by_degree = Vec::new();
    let (mut rank, mut spectrum) = rank_of(&gen.interior_matrix(&interior_rows), threshold);
    rank_by_degree.push(rank);

    let mut stalled = false;
    for _degree in 1..=degree_budget {
        let mut next = Vec::new();
        for v in &frontier {
            for op in [&gdag, &bdag] {
                let w = op.mul_vec(v);
                if gen.push(&w) {
                    next.push(gen.basis.last().unwrap().clone());
                }
            }
        }
        frontier = next;
        let (r, s) = rank_of(&gen.interior_matrix(&interior_rows), threshold);
        rank = r;
        spectrum = s;
        rank_by_degree.push(rank);
        if rank >= target_dim || frontier.is_empty() {
            break;
        }
    }
    let n = rank_by_degree.len();
    if rank < target_dim && n >= 4 && rank_by_degree[n - 4..].iter().all(|&x| x == rank) {
        stalled = true;
    }

    // each G† application can climb k levels in mode a and one in mode b
    let uncorrupted_degree = ((dims.na() - interior.na()) / k).min(dims.nb() - interior.nb());

    Ok(SpanReport {
        target_dim,
        achieved_rank: rank,
        residual_spectrum: spectrum,
        degree_budget,
        threshold,
        stalled,
        rank_by_degree,
        uncorrupted_degree,
        class_ranks: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpanVariant {
    /// `span{L†ʲ v}` only.
    ELa,
    /// Seeds enriched by `[L,L†]⁽ˢ⁾ v` for `s = 1..k−1`.
    ELaPlusSharp,
}

/// Single-mode span probe on mode a.
pub fn span_single_mode(
    params: &ModelParams,
    variant: SpanVariant,
    degree_budget: usize,
    interior_na: usize,
) -> Result<SpanReport> {
    let dims = params.dims();
    let k = params.k();
    if interior_na + 2 * k > dims.na() {
        return Err(Error::InvalidArgument(format!(
            "interior_na {} needs margin ≥ 2k = {} inside na = {}",
            interior_na,
            2 * k,
            dims.na()
        )));
    }
    let model = build_model(*params)?;
    let basis = kernel_basis(params)?;

    let mut seeds: Vec<CVec> = basis.vectors.iter().map(|v| v.amplitudes().clone()).collect();
    if variant == SpanVariant::ELaPlusSharp {
        let l = model.op_l();
        for s in 1..k {
            let bracket = iterated_commutator(l, &l.adjoint(), s)?;
            for v in &basis.vectors {
                seeds.push(bracket.matrix() * v.amplitudes());
            }
        }
    }

    let threshold = DEFAULT_RANK_THRESHOLD;
    let mut gen = SpanGenerator::new(threshold);
    let mut frontier = Vec::new();
    for s in &seeds {
        if gen.push(s) {
            frontier.push(gen.basis.last().unwrap().clone());
        }
    }

    let ldag = SparseMat::from_dense(&model.op_l().matrix().adjoint(), 0.0);
    let interior_rows: Vec<usize> = (0..interior_na).collect();

    let mut rank_by_degree = Vec::new();
    let (mut rank, mut spectrum) = rank_of(&gen.interior_matrix(&interior_rows), threshold);
    rank_by_degree.push(rank);
    let mut stalled = false;
    for _ in 1..=degree_budget {
        let mut next = Vec::new();
        for v in &frontier {
            let w = ldag.mul_vec(v);
            if gen.push(&w) {
                next.push(gen.basis.last().unwrap().clone());
            }
        }
        frontier = next;
        let (r, s) = rank_of(&gen.interior_matrix(&interior_rows), threshold);
        rank = r;
        spectrum = s;
        rank_by_degree.push(rank);
        if rank >= interior_na || frontier.is_empty() {
            break;
        }
    }
    {
        let n = rank_by_degree.len();
        if rank < interior_na && n >= 4 && rank_by_degree[n - 4..].iter().all(|&x| x == rank) {
            stalled = true;
        }
    }

    // every generated vector has a pure Fock residue class mod k, so the
    // span splits cleanly and per-class ranks are well-defined
    let mut class_ranks = Vec::with_capacity(k);
    for class in 0..k {
        let cols: Vec<&CVec> = gen
            .basis
            .iter()
            .filter(|v| residue_class_of(v, k) == Some(class))
            .collect();
        let rows: Vec<usize> = (0..interior_na).filter(|n| n % k == class).collect();
        let mut m = CMat::zeros(rows.len(), cols.len());
        for (c, v) in cols.iter().enumerate() {
            for (r, &row) in rows.iter().enumerate() {
                m[(r, c)] = v[row];
            }
        }
        class_ranks.push(rank_of(&m, threshold).0);
    }

    Ok(SpanReport {
        target_dim: interior_na,
        achieved_rank: rank,
        residual_spectrum: spectrum,
        degree_budget,
        threshold,
        stalled,
        rank_by_degree,
        uncorrupted_degree: (dims.na() - interior_na) / k,
        class_ranks: Some(class_ranks),
    })
}

fn residue_class_of(v: &CVec, k: usize) -> Option<usize> {
    let mut class = None;
    for (n, z) in v.iter().enumerate() {
        if z.norm() > 1e-10 {
            match class {
                None => class = Some(n % k),
                Some(c) if c != n % k => return None,
                _ => {}
            }
        }
    }
    class
}

/// Fitted coefficients of one iterated commutator in the normally ordered
/// ladder basis.
#[derive(Debug, Clone, Serialize)]
pub struct TriangularLevel {
    pub s: usize,
    /// `c_{s,r}` for `r = 0..=k−s` in
    /// `[L,L†]⁽ˢ⁾ = a†^{k(s−1)} Σ_r c_{s,r} a†ʳ aʳ`.
    pub coefficients: Vec<f64>,
    pub leading_coefficient: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangularReport {
    pub k: usize,
    pub levels: Vec<TriangularLevel>,
}

/// Verify the triangular normal-ordered expansion of the iterated
/// commutators `[L,L†]⁽ˢ⁾` on the interior, solving for the coefficients by
/// least squares. A residual above 1e-8 is an implementation bug and is
/// reported as a structure violation.
pub fn triangular_structure_check(params: &ModelParams, interior_na: usize) -> Result<TriangularReport> {
    let dims = params.dims();
    let k = params.k();
    if interior_na + k * (k + 1) > dims.na() {
        return Err(Error::InvalidArgument(format!(
            "interior_na {interior_na} needs margin ≥ k(k+1) = {} inside na = {}",
            k * (k + 1),
            dims.na()
        )));
    }
    let model = build_model(*params)?;
    let l = model.op_l();
    let a = Operator::annihilation(Space::A, dims)?;
    let idx: Vec<usize> = (0..interior_na).collect();

    let mut levels = Vec::new();
    for s in 1..=k {
        let target = iterated_commutator(l, &l.adjoint(), s)?;
        let target_int = linalg::compress(target.matrix(), &idx);

        let n_terms = k - s + 1;
        let mut columns = CMat::zeros(idx.len() * idx.len(), n_terms);
        for r in 0..n_terms {
            let basis_op = &a.adjoint().pow(k * (s - 1) + r) * &a.pow(r);
            let b_int = linalg::compress(basis_op.matrix(), &idx);
            let col = crate::evolve::vec_columns(&b_int);
            columns.set_column(r, &col);
        }
        let rhs = crate::evolve::vec_columns(&target_int);
        let coeffs = linalg::lstsq(&columns, &rhs);

        let fitted = &columns * &coeffs;
        let scale = rhs.norm().max(1.0);
        let residual = (fitted - &rhs).norm() / scale;
        if residual > 1e-8 {
            return Err(Error::StructureViolation { residual });
        }
        let real_coeffs: Vec<f64> = coeffs.iter().map(|z| z.re).collect();
        levels.push(TriangularLevel {
            s,
            leading_coefficient: real_coeffs[n_terms - 1],
            coefficients: real_coeffs,
            residual,
        });
    }
    Ok(TriangularReport { k, levels })
}

/// Exact first-level coefficients, for cross-checking the fit:
/// `[aᵏ, a†ᵏ] = Σ_{r<k} C(k,r)·k!/r!·a†ʳaʳ`.
pub fn leibniz_coefficients(k: usize) -> Vec<f64> {
    (0..k).map(|r| binomial(k, r) * falling_factorial(k, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(na: usize, nb: usize) -> FockDims {
        FockDims::new(na, nb).unwrap()
    }

    #[test]
    fn joint_span_seeds_only() {
        let p = ModelParams::new(2, 0.7, 1.0, dims(16, 6)).unwrap();
        let model = build_model(p).unwrap();
        let report = generate_joint_span(&model, 0, dims(10, 3)).unwrap();
        assert_eq!(report.achieved_rank, 2);
    }

    #[test]
    fn joint_span_saturates_k1_alpha0() {
        let p = ModelParams::new(1, 0.0, 1.0, dims(10, 5)).unwrap();
        let model = build_model(p).unwrap();
        let report = generate_joint_span(&model, 30, dims(7, 3)).unwrap();
        assert_eq!(report.achieved_rank, report.target_dim, "report {report:?}");
        assert!(!report.stalled);
    }

    #[test]
    fn joint_span_saturates_k2_cat() {
        let p = ModelParams::new(2, 0.7, 1.0, dims(16, 6)).unwrap();
        let model = build_model(p).unwrap();
        let report = generate_joint_span(&model, 60, dims(10, 3)).unwrap();
        assert_eq!(report.achieved_rank, report.target_dim, "rank_by_degree {:?}", report.rank_by_degree);
    }

    #[test]
    fn rank_monotone_in_budget() {
        let p = ModelParams::new(2, 0.7, 1.0, dims(14, 5)).unwrap();
        let model = build_model(p).unwrap();
        let r_small = generate_joint_span(&model, 4, dims(8, 3)).unwrap();
        let r_big = generate_joint_span(&model, 12, dims(8, 3)).unwrap();
        assert!(r_big.achieved_rank >= r_small.achieved_rank);
        for w in r_big.rank_by_degree.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn single_mode_k1_ela_is_dense() {
        let p = ModelParams::new(1, 0.5, 1.0, dims(14, 2)).unwrap();
        let report = span_single_mode(&p, SpanVariant::ELa, 30, 10).unwrap();
        assert_eq!(report.achieved_rank, 10, "spectrum {:?}", report.residual_spectrum);
    }

    #[test]
    fn single_mode_alpha0_ela_is_dense() {
        for k in 1..=3usize {
            let p = ModelParams::new(k, 0.0, 1.0, dims(18, 2)).unwrap();
            let report = span_single_mode(&p, SpanVariant::ELa, 30, 10).unwrap();
            assert_eq!(report.achieved_rank, 10, "k={k}");
        }
    }

    #[test]
    fn single_mode_k2_cat_ela_deficient_sharp_restores() {
        // the deficiency of E_L^a becomes numerically visible once the
        // interior section is large enough for the missing directions to
        // press the spectrum below threshold; the enriched span stays
        // fully conditioned at the same settings
        let p = ModelParams::new(2, 0.7, 1.0, dims(52, 2)).unwrap();
        let ela = span_single_mode(&p, SpanVariant::ELa, 100, 36).unwrap();
        assert!(
            ela.achieved_rank < ela.target_dim,
            "E_L^a unexpectedly full: {:?}",
            ela.residual_spectrum
        );
        assert!(ela.stalled);
        // deficiency localizes in the even residue class (the class whose
        // obstruction sits closest to the origin)
        let classes = ela.class_ranks.as_ref().unwrap();
        assert_eq!(classes[0], 17, "even-class rank {classes:?}");
        assert_eq!(classes[1], 18, "odd-class rank {classes:?}");

        let sharp = span_single_mode(&p, SpanVariant::ELaPlusSharp, 100, 36).unwrap();
        assert_eq!(sharp.achieved_rank, sharp.target_dim);
        // and with a wide conditioning margin
        let sigma_min = *sharp.residual_spectrum.last().unwrap();
        assert!(sigma_min > 0.5, "sharp span σ_min {sigma_min}");
    }

    #[test]
    fn ela_class_ranks_match_bargmann_route() {
        // independent construction of the same spans through coefficient
        // sequences: even class = {z^{2j}·cosh(αz)}, odd = {z^{2j}·sinh(αz)}
        use crate::bargmann::{combine, exponential_coeffs, from_bargmann, shift_up};
        let alpha = 0.7;
        let na = 52;
        let interior = 36;
        let budget = 100usize;
        let d = dims(na, 2);
        let p = ModelParams::new(2, alpha, 1.0, d).unwrap();
        let ela = span_single_mode(&p, SpanVariant::ELa, budget, interior).unwrap();

        let half = C64::new(0.5, 0.0);
        let ep = exponential_coeffs(C64::new(alpha, 0.0), na);
        let em = exponential_coeffs(C64::new(-alpha, 0.0), na);
        let cosh = combine(half, &ep, half, &em);
        let sinh = combine(half, &ep, -half, &em);

        let mut predicted = Vec::new();
        for (class, seed) in [(0usize, &cosh), (1usize, &sinh)] {
            let rows: Vec<usize> = (0..interior).filter(|n| n % 2 == class).collect();
            let mut cols = Vec::new();
            for j in 0..=budget {
                if 2 * j + class >= na {
                    break;
                }
                let ket = from_bargmann(&shift_up(seed, 2 * j), Space::A, d).unwrap();
                let ket = ket.normalize();
                cols.push(ket);
            }
            let mut m = CMat::zeros(rows.len(), cols.len());
            for (c, ket) in cols.iter().enumerate() {
                for (r, &row) in rows.iter().enumerate() {
                    m[(r, c)] = ket.amplitudes()[row];
                }
            }
            predicted.push(rank_of(&m, DEFAULT_RANK_THRESHOLD).0);
        }
        assert_eq!(ela.class_ranks.as_ref().unwrap(), &predicted, "operator vs Bargmann route");
    }

    #[test]
    fn triangular_first_level_matches_leibniz() {
        let p = ModelParams::new(2, 0.7, 1.0, dims(16, 2)).unwrap();
        let report = triangular_structure_check(&p, 8).unwrap();
        let level1 = &report.levels[0];
        // [L,L†] = 4a†a + 2 for k=2
        assert!((level1.coefficients[0] - 2.0).abs() < 1e-8);
        assert!((level1.coefficients[1] - 4.0).abs() < 1e-8);
        assert_eq!(leibniz_coefficients(2), vec![2.0, 4.0]);
    }

    #[test]
    fn triangular_k3_leading_nonzero() {
        let p = ModelParams::new(3, 0.6, 1.0, dims(22, 2)).unwrap();
        let report = triangular_structure_check(&p, 8).unwrap();
        let level2 = report.levels.iter().find(|l| l.s == 2).unwrap();
        assert!(level2.leading_coefficient.abs() > 1e-6, "c_{{2,1}} = {}", level2.leading_coefficient);
        for level in &report.levels {
            assert!(level.residual <= 1e-8);
        }
    }

    #[test]
    fn triangular_degenerate_top_level() {
        // s = k: single term c·a†^{k(k−1)}, still a clean fit
        let p = ModelParams::new(2, 0.5, 1.0, dims(16, 2)).unwrap();
        let report = triangular_structure_check(&p, 8).unwrap();
        let top = report.levels.iter().find(|l| l.s == 2).unwrap();
        assert_eq!(top.coefficients.len(), 1);
        assert!(top.residual <= 1e-8);
    }

    #[test]
    fn interior_margin_validated() {
        let p = ModelParams::new(2, 0.7, 1.0, dims(10, 4)).unwrap();
        assert!(span_single_mode(&p, SpanVariant::ELa, 10, 9).is_err());
        let model = build_model(p).unwrap();
        assert!(generate_joint_span(&model, 10, dims(9, 3)).is_err());
    }

    #[test]
    fn joint_span_dominates_embedded_single_mode_span() {
        // the joint words reproduce the single-mode constructions inside the
        // b=0 slice at a third of the budget (each L† costs a commutator of
        // two G† words plus one b†)
        let p = ModelParams::new(2, 0.7, 1.0, dims(16, 6)).unwrap();
        let model = build_model(p).unwrap();
        for budget in [6usize, 12, 24] {
            let joint = generate_joint_span(&model, budget, dims(10, 3)).unwrap();
            let single = span_single_mode(&p, SpanVariant::ELaPlusSharp, budget / 3, 10).unwrap();
            assert!(
                joint.achieved_rank >= single.achieved_rank,
                "budget {budget}: joint rank {} below embedded single-mode rank {}",
                joint.achieved_rank,
                single.achieved_rank
            );
        }
    }
}
