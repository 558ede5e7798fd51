//! Symmetric quantum Markov semigroups in finite dimension: generators,
//! evolution, Markovianity checks, fixed-point algebras, Choi operators and
//! CB-return times.
//!
//! A generator is a superoperator matrix acting on the vectorized algebra
//! (L₂ ONB coordinates). Symmetry of the semigroup means the matrix is
//! Hermitian; Markovianity additionally needs a PSD spectrum and `A(1) = 0`.
//! Evolution `T_t = e^{-At}` runs through the cached spectral decomposition.

use crate::algebra::{CondExpectation, Element, FiniteAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, operator_norm, psd_min_eig, CMatrix, HermitianEig};
use crate::tol::Tolerances;
use num_complex::Complex64;

/// A linear map on the algebra stored as a matrix in the vectorization ONB.
#[derive(Debug, Clone)]
pub struct Superoperator {
    algebra: FiniteAlgebra,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn new(algebra: FiniteAlgebra, matrix: CMatrix) -> Result<Self> {
        let d = algebra.l2_dim();
        if matrix.rows != d || matrix.cols != d {
            return Err(Error::Dimension(format!(
                "superoperator must be {d}x{d} for this algebra, got {}x{}",
                matrix.rows, matrix.cols
            )));
        }
        Ok(Superoperator { algebra, matrix })
    }

    /// Evaluate a linear map on the vectorization ONB and store its matrix.
    pub fn from_map(alg: &FiniteAlgebra, f: impl Fn(&Element) -> Element) -> Self {
        let d = alg.l2_dim();
        let mut matrix = CMatrix::zeros(d, d);
        for j in 0..d {
            let img = f(&alg.basis_element(j));
            let col = alg.vectorize(&img);
            for i in 0..d {
                matrix[(i, j)] = col[i];
            }
        }
        Superoperator {
            algebra: alg.clone(),
            matrix,
        }
    }

    pub fn identity(alg: &FiniteAlgebra) -> Self {
        Superoperator {
            algebra: alg.clone(),
            matrix: CMatrix::identity(alg.l2_dim()),
        }
    }

    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.algebra
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &Element) -> Result<Element> {
        if x.algebra() != &self.algebra {
            return Err(Error::Dimension("element from a different algebra".into()));
        }
        let v = self.algebra.vectorize(x);
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                *o += self.matrix[(i, j)] * vj;
            }
        }
        Ok(self.algebra.unvectorize(&out))
    }

    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.algebra != other.algebra {
            return Err(Error::Dimension("superoperators on different algebras".into()));
        }
        Ok(Superoperator {
            algebra: self.algebra.clone(),
            matrix: self.matrix.mul(&other.matrix),
        })
    }

    pub fn sub(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.algebra != other.algebra {
            return Err(Error::Dimension("superoperators on different algebras".into()));
        }
        Ok(Superoperator {
            algebra: self.algebra.clone(),
            matrix: self.matrix.sub(&other.matrix),
        })
    }

    pub fn scale(&self, c: f64) -> Superoperator {
        Superoperator {
            algebra: self.algebra.clone(),
            matrix: self.matrix.scale(Complex64::new(c, 0.0)),
        }
    }
}

/// A symmetric quantum Markov semigroup `T_t = e^{-At}` with its generator's
/// spectral decomposition and the fixed-point conditional expectation cached.
#[derive(Debug, Clone)]
pub struct QMSemigroup {
    generator: Superoperator,
    spectral: HermitianEig,
    fixed_point: CondExpectation,
}

/// Verify a generator (symmetric, PSD, `A(1) = 0`) and build the semigroup.
pub fn build_semigroup(gen: Superoperator, tol: &Tolerances) -> Result<QMSemigroup> {
    let scale = 1.0 + gen.matrix.max_abs();
    let herm = gen.matrix.hermiticity_residual();
    if herm > 1e-10 * scale {
        return Err(Error::NotSymmetric(herm));
    }
    let spectral = hermitian_eig(&gen.matrix, tol)?;
    let min = spectral.eigenvalues.first().copied().unwrap_or(0.0);
    if min < -tol.psd {
        return Err(Error::NotDissipative(min));
    }
    let one = gen.algebra.one();
    let res = gen.apply(&one)?.l2_norm();
    if res > 1e-10 * scale {
        return Err(Error::NotUnital(res));
    }
    QMSemigroup::assemble(gen, spectral, tol)
}

impl QMSemigroup {
    fn assemble(generator: Superoperator, spectral: HermitianEig, tol: &Tolerances) -> Result<Self> {
        let fixed_point = fixed_point_from_spectral(&generator.algebra, &spectral, tol)?;
        Ok(QMSemigroup {
            generator,
            spectral,
            fixed_point,
        })
    }

    /// Build without Markovianity verification. Used for non-examples
    /// (time-reversed generators) whose failures the checks should report.
    pub fn from_generator_unchecked(gen: Superoperator, tol: &Tolerances) -> Result<Self> {
        let sym = gen.matrix.symmetrized();
        let gen = Superoperator {
            algebra: gen.algebra.clone(),
            matrix: sym,
        };
        let spectral = hermitian_eig(&gen.matrix, tol)?;
        Self::assemble(gen, spectral, tol)
    }

    /// Build from a known spectral decomposition: `eigvecs[k]` is an L₂-ONB
    /// of the algebra and the generator acts as `eigvals[k]` on it.
    pub fn from_eigenbasis(
        alg: &FiniteAlgebra,
        eigvecs: &[Element],
        eigvals: &[f64],
        tol: &Tolerances,
    ) -> Result<Self> {
        let d = alg.l2_dim();
        if eigvecs.len() != d || eigvals.len() != d {
            return Err(Error::Dimension(format!(
                "need {d} eigenpairs, got {} vectors and {} values",
                eigvecs.len(),
                eigvals.len()
            )));
        }
        if eigvals.iter().any(|&v| v < -tol.psd) {
            return Err(Error::NotDissipative(
                eigvals.iter().cloned().fold(f64::INFINITY, f64::min),
            ));
        }
        // sort ascending to match hermitian_eig conventions
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigvals[a].partial_cmp(&eigvals[b]).unwrap());
        let mut u = CMatrix::zeros(d, d);
        for (col, &k) in order.iter().enumerate() {
            let v = alg.vectorize(&eigvecs[k]);
            for i in 0..d {
                u[(i, col)] = v[i];
            }
        }
        // verify the eigenvectors form an ONB
        let gram_res = u.adjoint().mul(&u).sub(&CMatrix::identity(d)).max_abs();
        if gram_res > tol.orthonormal {
            return Err(Error::NotOrthonormal(gram_res));
        }
        let spectral = HermitianEig {
            eigenvalues: order.iter().map(|&k| eigvals[k]).collect(),
            eigenvectors: u,
        };
        let matrix = spectral.apply(|x| x);
        let generator = Superoperator {
            algebra: alg.clone(),
            matrix,
        };
        let one = generator.apply(&alg.one())?.l2_norm();
        if one > 1e-10 {
            return Err(Error::NotUnital(one));
        }
        Self::assemble(generator, spectral, tol)
    }

    pub fn algebra(&self) -> &FiniteAlgebra {
        self.generator.algebra()
    }

    pub fn generator(&self) -> &Superoperator {
        &self.generator
    }

    pub fn spectral(&self) -> &HermitianEig {
        &self.spectral
    }

    /// Apply the generator `A` to an element.
    pub fn apply_generator(&self, x: &Element) -> Result<Element> {
        self.generator.apply(x)
    }

    /// The fixed-point conditional expectation (spectral projection onto the
    /// generator kernel, verified to be an expectation at construction).
    pub fn fixed_point_expectation(&self) -> &CondExpectation {
        &self.fixed_point
    }

    /// Whether the fixed-point algebra is trivial (`C·1`).
    pub fn is_ergodic(&self) -> bool {
        self.fixed_point.basis().len() == 1
    }

    /// `T_t = e^{-At}` as a superoperator.
    pub fn evolve_superop(&self, t: f64) -> Result<Superoperator> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("evolution time must be ≥ 0, got {t}")));
        }
        let matrix = self.spectral.apply(|mu| (-mu * t).exp());
        Ok(Superoperator {
            algebra: self.generator.algebra.clone(),
            matrix,
        })
    }

    /// Evolve an element: `e^{-At} x`.
    pub fn evolve(&self, x: &Element, t: f64) -> Result<Element> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("evolution time must be ≥ 0, got {t}")));
        }
        if x.algebra() != self.algebra() {
            return Err(Error::Dimension("element from a different algebra".into()));
        }
        let v = self.algebra().vectorize(x);
        let u = &self.spectral.eigenvectors;
        let d = v.len();
        // coords in eigenbasis
        let mut c = vec![Complex64::new(0.0, 0.0); d];
        for k in 0..d {
            for i in 0..d {
                c[k] += u[(i, k)].conj() * v[i];
            }
        }
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= Complex64::new((-self.spectral.eigenvalues[k] * t).exp(), 0.0);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for k in 0..d {
            for i in 0..d {
                out[i] += u[(i, k)] * c[k];
            }
        }
        Ok(self.algebra().unvectorize(&out))
    }

    /// Evolve a density state.
    pub fn evolve_density(
        &self,
        rho: &crate::algebra::DensityState,
        t: f64,
        tol: &Tolerances,
    ) -> Result<crate::algebra::DensityState> {
        crate::algebra::DensityState::new(self.evolve(rho.element(), t)?, tol)
    }

    /// Smallest generator eigenvalue strictly above the kernel floor, or 0
    /// when the generator has no gap (all eigenvalues in the kernel).
    pub fn spectral_gap(&self, tol: &Tolerances) -> f64 {
        self.spectral
            .eigenvalues
            .iter()
            .cloned()
            .filter(|&mu| mu > tol.gap)
            .fold(f64::INFINITY, f64::min)
            .min(f64::INFINITY)
            .pipe_finite_or_zero()
    }
}

trait PipeFiniteOrZero {
    fn pipe_finite_or_zero(self) -> f64;
}

impl PipeFiniteOrZero for f64 {
    fn pipe_finite_or_zero(self) -> f64 {
        if self.is_finite() {
            self
        } else {
            0.0
        }
    }
}

fn fixed_point_from_spectral(
    alg: &FiniteAlgebra,
    spectral: &HermitianEig,
    tol: &Tolerances,
) -> Result<CondExpectation> {
    let d = alg.l2_dim();
    let mut kernel = Vec::new();
    for k in 0..d {
        if spectral.eigenvalues[k].abs() <= tol.gap {
            let coords: Vec<Complex64> = (0..d).map(|i| spectral.eigenvectors[(i, k)]).collect();
            kernel.push(alg.unvectorize(&coords));
        }
    }
    if kernel.is_empty() {
        return Err(Error::Internal(
            "generator kernel is empty; the unit is not fixed".into(),
        ));
    }
    CondExpectation::from_span(alg, &kernel, tol).map_err(|e| {
        Error::Internal(format!(
            "generator kernel is not a subalgebra ({e}); generator is not a symmetric Markov generator"
        ))
    })
}

/// One line of a Markovianity report.
#[derive(Debug, Clone)]
pub struct MarkovCheckEntry {
    pub t: f64,
    pub unitality_residual: f64,
    pub trace_residual: f64,
    pub choi_min_eig: f64,
    pub completely_positive: bool,
}

/// Report produced by [`markov_check`].
#[derive(Debug, Clone)]
pub struct MarkovReport {
    pub entries: Vec<MarkovCheckEntry>,
    pub pass: bool,
}

/// Check unitality, trace preservation and complete positivity (Choi PSD)
/// of `T_t` on a time grid. Failures are reported, not raised.
pub fn markov_check(s: &QMSemigroup, t_grid: &[f64], tol: &Tolerances) -> Result<MarkovReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let alg = s.algebra();
    let one = alg.one();
    let mut entries = Vec::with_capacity(t_grid.len());
    let mut pass = true;
    for &t in t_grid {
        let tt = s.evolve_superop(t)?;
        let unital = tt.apply(&one)?.sub(&one)?.op_norm()?;
        // trace preservation: τ(T_t x) = τ(x) for all x ⟺ T_t†(1) = 1; for
        // symmetric semigroups the adjoint is T_t itself, but measure directly.
        let mut trace_res = 0.0f64;
        for j in 0..alg.l2_dim() {
            let b = alg.basis_element(j);
            let diff = (tt.apply(&b)?.trace() - b.trace()).norm();
            trace_res = trace_res.max(diff);
        }
        let choi = choi_blocks(&tt)?;
        let min_eig = choi.min_eig(tol)?;
        let cp = min_eig >= -tol.psd;
        pass = pass && cp && unital <= 1e-9 && trace_res <= 1e-9;
        entries.push(MarkovCheckEntry {
            t,
            unitality_residual: unital,
            trace_residual: trace_res,
            choi_min_eig: min_eig,
            completely_positive: cp,
        });
    }
    Ok(MarkovReport { entries, pass })
}

/// Choi operator of a superoperator in block-pair form: for every pair of
/// blocks `(b, b')` the matrix `Σ_i conj(x_i)_b ⊗ T(x_i)_{b'}` over the
/// vectorization ONB `{x_i}`. Operator norm and spectrum of the dense Choi
/// operator are the maxima/unions over pairs.
#[derive(Debug, Clone)]
pub struct ChoiBlocks {
    algebra: FiniteAlgebra,
    /// `pairs[b][b']`, square of size `d_b · d_{b'}`.
    pub pairs: Vec<Vec<CMatrix>>,
}

impl ChoiBlocks {
    pub fn operator_norm(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for row in &self.pairs {
            for m in row {
                worst = worst.max(operator_norm(m)?);
            }
        }
        Ok(worst)
    }

    pub fn min_eig(&self, tol: &Tolerances) -> Result<f64> {
        let mut min = f64::INFINITY;
        for row in &self.pairs {
            for m in row {
                min = min.min(psd_min_eig(&m.symmetrized(), tol)?);
            }
        }
        Ok(min)
    }

    pub fn sub(&self, other: &ChoiBlocks) -> Result<ChoiBlocks> {
        if self.algebra != other.algebra {
            return Err(Error::Dimension("Choi blocks on different algebras".into()));
        }
        let pairs = self
            .pairs
            .iter()
            .zip(&other.pairs)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| a.sub(b)).collect())
            .collect();
        Ok(ChoiBlocks {
            algebra: self.algebra.clone(),
            pairs,
        })
    }

    /// Assemble the dense Choi matrix on `C^{rep} ⊗ C^{rep}` (indices grouped
    /// by block pairs along the diagonal, zero elsewhere).
    pub fn to_dense(&self) -> CMatrix {
        let alg = &self.algebra;
        let rep = alg.rep_dim();
        let mut out = CMatrix::zeros(rep * rep, rep * rep);
        let offsets: Vec<usize> = {
            let mut acc = 0;
            alg.block_dims()
                .iter()
                .map(|&d| {
                    let o = acc;
                    acc += d;
                    o
                })
                .collect()
        };
        for (b1, &d1) in alg.block_dims().iter().enumerate() {
            for (b2, &d2) in alg.block_dims().iter().enumerate() {
                let m = &self.pairs[b1][b2];
                for i in 0..d1 {
                    for ip in 0..d2 {
                        for j in 0..d1 {
                            for jp in 0..d2 {
                                let row = (offsets[b1] + i) * rep + offsets[b2] + ip;
                                let col = (offsets[b1] + j) * rep + offsets[b2] + jp;
                                out[(row, col)] = m[(i * d2 + ip, j * d2 + jp)];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Choi blocks of `T` over the canonical vectorization ONB.
pub fn choi_blocks(t: &Superoperator) -> Result<ChoiBlocks> {
    let alg = t.algebra().clone();
    let nb = alg.num_blocks();
    let mut pairs: Vec<Vec<CMatrix>> = (0..nb)
        .map(|b1| {
            (0..nb)
                .map(|b2| {
                    let d = alg.block_dims()[b1] * alg.block_dims()[b2];
                    CMatrix::zeros(d, d)
                })
                .collect()
        })
        .collect();
    for idx in 0..alg.l2_dim() {
        let x = alg.basis_element(idx);
        let tx = t.apply(&x)?;
        for (b1, xb) in x.blocks.iter().enumerate() {
            if xb.max_abs() == 0.0 {
                continue;
            }
            let xc = xb.conj();
            for (b2, yb) in tx.blocks.iter().enumerate() {
                if yb.max_abs() == 0.0 {
                    continue;
                }
                let k = xc.kron(yb);
                pairs[b1][b2] = pairs[b1][b2].add(&k);
            }
        }
    }
    Ok(ChoiBlocks { algebra: alg, pairs })
}

/// Dense Choi operator `Σ_i x_i^{*op} ⊗ T(x_i)` over a caller-provided ONB,
/// with the opposite algebra realized by transposition.
///
/// The ONB must be orthonormal in L₂ and span the algebra; its Gram residual
/// is checked against `tol.orthonormal`.
pub fn choi_operator(t: &Superoperator, onb: &[Element], tol: &Tolerances) -> Result<CMatrix> {
    let alg = t.algebra();
    if onb.len() != alg.l2_dim() {
        return Err(Error::Dimension(format!(
            "ONB must have {} elements, got {}",
            alg.l2_dim(),
            onb.len()
        )));
    }
    let mut gram_res = 0.0f64;
    for (i, x) in onb.iter().enumerate() {
        for (j, y) in onb.iter().enumerate() {
            let ip = x.l2_inner(y)?;
            let expect = if i == j { 1.0 } else { 0.0 };
            gram_res = gram_res.max((ip - Complex64::new(expect, 0.0)).norm());
        }
    }
    if gram_res > tol.orthonormal {
        return Err(Error::NotOrthonormal(gram_res));
    }
    let rep = alg.rep_dim();
    let mut out = CMatrix::zeros(rep * rep, rep * rep);
    for x in onb {
        let tx = t.apply(x)?;
        // x^{*op} via transposition = conj(x) in the direct-sum representation
        let xc = to_dense(x).conj();
        let txd = to_dense(&tx);
        out = out.add(&xc.kron(&txd));
    }
    Ok(out)
}

/// Direct-sum (block diagonal) dense matrix of an element.
pub fn to_dense(x: &Element) -> CMatrix {
    let rep: usize = x.algebra().rep_dim();
    let mut out = CMatrix::zeros(rep, rep);
    let mut off = 0;
    for b in &x.blocks {
        for i in 0..b.rows {
            for j in 0..b.cols {
                out[(off + i, off + j)] = b[(i, j)];
            }
        }
        off += b.rows;
    }
    out
}

/// Result of a CB-return-time computation.
#[derive(Debug, Clone)]
pub struct CbReturnTime {
    pub t_cb: f64,
    /// Set when the semigroup is not ergodic, in which case the plain
    /// L₁→L∞ norm is only an upper-bound surrogate for the conditioned
    /// cb norm.
    pub surrogate: bool,
}

/// First time `‖C(T_t) − C(E)‖` falls to `threshold` (default 1/2), found by
/// bisection. The norm is nonincreasing in `t` for symmetric semigroups.
pub fn cb_return_time(
    s: &QMSemigroup,
    threshold: f64,
    tol: &Tolerances,
) -> Result<CbReturnTime> {
    if !(threshold > 0.0) {
        return Err(Error::Domain("threshold must be positive".into()));
    }
    let surrogate = !s.is_ergodic();
    let e_choi = {
        let e = s.fixed_point_expectation();
        let sup = Superoperator::new(s.algebra().clone(), e.superoperator().clone())?;
        choi_blocks(&sup)?
    };
    let f = |t: f64| -> Result<f64> {
        let tt = s.evolve_superop(t)?;
        choi_blocks(&tt)?.sub(&e_choi)?.operator_norm()
    };
    if f(0.0)? <= threshold {
        return Ok(CbReturnTime { t_cb: 0.0, surrogate });
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while f(hi)? > threshold {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoBracket(format!(
                "‖C(T_t) − C(E)‖ stays above {threshold} up to t = 1e3"
            )));
        }
    }
    while hi - lo > tol.t_bisect {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CbReturnTime {
        t_cb: 0.5 * (lo + hi),
        surrogate,
    })
}

/// Tensor-product semigroup with generator `A ⊗ id + id ⊗ B`.
pub fn tensor_semigroup(sa: &QMSemigroup, sb: &QMSemigroup, tol: &Tolerances) -> Result<QMSemigroup> {
    let alg_a = sa.algebra();
    let alg_b = sb.algebra();
    let alg = alg_a.tensor(alg_b);
    let da = alg_a.l2_dim();
    let db = alg_b.l2_dim();
    let d = alg.l2_dim();
    let mut matrix = CMatrix::zeros(d, d);
    let a = sa.generator().matrix();
    let b = sb.generator().matrix();
    // index translation: tensor basis index of (alpha, beta)
    let index = tensor_basis_indices(alg_a, alg_b, &alg);
    for alpha in 0..da {
        for beta in 0..db {
            let row = index[alpha * db + beta];
            for alpha2 in 0..da {
                let col = index[alpha2 * db + beta];
                matrix[(row, col)] += a[(alpha, alpha2)];
            }
            for beta2 in 0..db {
                let col = index[alpha * db + beta2];
                matrix[(row, col)] += b[(beta, beta2)];
            }
        }
    }
    build_semigroup(Superoperator::new(alg, matrix)?, tol)
}

/// For each `(alpha, beta)` pair of factor ONB indices, the index of
/// `basis_A(alpha) ⊗ basis_B(beta)` in the tensor algebra's ONB.
fn tensor_basis_indices(
    alg_a: &FiniteAlgebra,
    alg_b: &FiniteAlgebra,
    tensor_alg: &FiniteAlgebra,
) -> Vec<usize> {
    let da = alg_a.l2_dim();
    let db = alg_b.l2_dim();
    let mut out = vec![0usize; da * db];
    for alpha in 0..da {
        let ea = alg_a.basis_element(alpha);
        for beta in 0..db {
            let eb = alg_b.basis_element(beta);
            let prod = crate::algebra::tensor_element(tensor_alg, &ea, &eb).expect("tensor dims");
            let v = tensor_alg.vectorize(&prod);
            let (idx, _) = v
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).unwrap())
                .expect("nonzero");
            out[alpha * db + beta] = idx;
        }
    }
    out
}

/// Report of a commuting-square verification for two semigroups on the same
/// algebra.
#[derive(Debug, Clone)]
pub struct CommutingSquareReport {
    pub commutation_residual: f64,
    pub es_et_residual: f64,
    pub et_es_residual: f64,
    pub pass: bool,
}

/// Check that `T_t` and `S_s` commute on a grid, and that their fixed-point
/// expectations satisfy `E_S E_T = E_T E_S = E` where `E` is the fixed-point
/// expectation of the product semigroup (generator `A + B`).
pub fn commuting_square_check(
    sa: &QMSemigroup,
    sb: &QMSemigroup,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<CommutingSquareReport> {
    if sa.algebra() != sb.algebra() {
        return Err(Error::Dimension("semigroups act on different algebras".into()));
    }
    let mut comm = 0.0f64;
    for &t in grid {
        for &s in grid {
            let ts = sa.evolve_superop(t)?.compose(&sb.evolve_superop(s)?)?;
            let st = sb.evolve_superop(s)?.compose(&sa.evolve_superop(t)?)?;
            comm = comm.max(operator_norm(&ts.matrix.sub(&st.matrix))?);
        }
    }
    if comm > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "semigroups do not commute (residual {comm:.3e})"
        )));
    }
    // joint fixed-point expectation from the sum generator
    let sum_gen = Superoperator::new(
        sa.algebra().clone(),
        sa.generator().matrix().add(sb.generator().matrix()),
    )?;
    let joint = build_semigroup(sum_gen, tol)?;
    let e = joint.fixed_point_expectation().superoperator().clone();
    let es = sa.fixed_point_expectation().superoperator().clone();
    let et = sb.fixed_point_expectation().superoperator().clone();
    let es_et = operator_norm(&es.mul(&et).sub(&e))?;
    let et_es = operator_norm(&et.mul(&es).sub(&e))?;
    let pass = es_et <= 1e-9 && et_es <= 1e-9;
    Ok(CommutingSquareReport {
        commutation_residual: comm,
        es_et_residual: es_et,
        et_es_residual: et_es,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random_element;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// The two-point word-length semigroup, built from its eigenbasis.
    fn two_point() -> QMSemigroup {
        let alg = FiniteAlgebra::two_point();
        let one = alg.one();
        let eps = alg
            .element(vec![
                CMatrix::from_real(1, 1, &[1.0]),
                CMatrix::from_real(1, 1, &[-1.0]),
            ])
            .unwrap();
        QMSemigroup::from_eigenbasis(&alg, &[one, eps], &[0.0, 1.0], &tol()).unwrap()
    }

    fn depolarizing(n: usize) -> QMSemigroup {
        let alg = FiniteAlgebra::matrix(n);
        let gen = Superoperator::from_map(&alg, |x| {
            x.sub(&alg.one().scale(x.trace())).unwrap()
        });
        build_semigroup(gen, &tol()).unwrap()
    }

    #[test]
    fn zero_generator_gives_identity() {
        let alg = FiniteAlgebra::matrix(2);
        let gen = Superoperator::new(alg.clone(), CMatrix::zeros(16 / 4, 16 / 4)).unwrap_err();
        // wrong dims rejected
        assert!(matches!(gen, Error::Dimension(_)));
        let gen = Superoperator::new(alg.clone(), CMatrix::zeros(4, 4)).unwrap();
        let s = build_semigroup(gen, &tol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_element(&alg, &mut rng);
        for &t in &[0.0, 0.7, 3.0] {
            assert!(s.evolve(&x, t).unwrap().sub(&x).unwrap().l2_norm() < 1e-12);
        }
    }

    #[test]
    fn two_point_evolution_closed_form() {
        let s = two_point();
        let alg = s.algebra().clone();
        let eps = alg
            .element(vec![
                CMatrix::from_real(1, 1, &[1.0]),
                CMatrix::from_real(1, 1, &[-1.0]),
            ])
            .unwrap();
        let t = std::f64::consts::LN_2;
        let out = s.evolve(&eps, t).unwrap();
        let expect = eps.scale_re(0.5);
        assert!(out.sub(&expect).unwrap().l2_norm() < 1e-12);
        // t = 0 fixes everything
        let out = s.evolve(&eps, 0.0).unwrap();
        assert!(out.sub(&eps).unwrap().l2_norm() < 1e-14);
        assert!(s.evolve(&eps, -0.1).is_err());
    }

    #[test]
    fn depolarizing_closed_form() {
        let s = depolarizing(2);
        let alg = s.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_element(&alg, &mut rng);
        let t = 0.8;
        let out = s.evolve(&x, t).unwrap();
        let expect = x
            .scale_re((-t).exp())
            .add(&alg.one().scale(x.trace()).scale_re(1.0 - (-t).exp()))
            .unwrap();
        assert!(out.sub(&expect).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn semigroup_law_on_random_pairs() {
        let s = depolarizing(2);
        let alg = s.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_element(&alg, &mut rng);
            let (t1, t2) = (0.3, 1.1);
            let a = s.evolve(&s.evolve(&x, t1).unwrap(), t2).unwrap();
            let b = s.evolve(&x, t1 + t2).unwrap();
            assert!(a.sub(&b).unwrap().l2_norm() < 1e-10);
        }
    }

    #[test]
    fn symmetry_in_l2() {
        let s = depolarizing(3);
        let alg = s.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = random_element(&alg, &mut rng);
            let y = random_element(&alg, &mut rng);
            let t = 0.9;
            let a = x.l2_inner(&s.evolve(&y, t).unwrap()).unwrap();
            let b = s.evolve(&x, t).unwrap().l2_inner(&y).unwrap();
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn build_rejects_bad_generators() {
        let alg = FiniteAlgebra::two_point();
        // asymmetric
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let gen = Superoperator::new(alg.clone(), m).unwrap();
        assert!(matches!(build_semigroup(gen, &tol()), Err(Error::NotSymmetric(_))));
        // negative spectrum
        let mut m = CMatrix::zeros(2, 2);
        m[(1, 1)] = Complex64::new(-1.0, 0.0);
        let gen = Superoperator::new(alg.clone(), m).unwrap();
        assert!(matches!(build_semigroup(gen, &tol()), Err(Error::NotDissipative(_))));
        // A(1) != 0
        let m = CMatrix::identity(2);
        let gen = Superoperator::new(alg.clone(), m).unwrap();
        assert!(matches!(build_semigroup(gen, &tol()), Err(Error::NotUnital(_))));
    }

    #[test]
    fn markov_check_passes_for_depolarizing_and_identity() {
        let s = depolarizing(2);
        let rep = markov_check(&s, &[0.0, 0.5, 1.0, 2.0], &tol()).unwrap();
        assert!(rep.pass, "{:?}", rep.entries);

        let alg = FiniteAlgebra::matrix(2);
        let id = build_semigroup(
            Superoperator::new(alg.clone(), CMatrix::zeros(4, 4)).unwrap(),
            &tol(),
        )
        .unwrap();
        assert!(markov_check(&id, &[1.0], &tol()).unwrap().pass);
    }

    #[test]
    fn markov_check_fails_for_time_reversal() {
        let s = depolarizing(2);
        let neg = Superoperator::new(s.algebra().clone(), s.generator().matrix().scale(Complex64::new(-1.0, 0.0))).unwrap();
        let rev = QMSemigroup::from_generator_unchecked(neg, &tol()).unwrap();
        let rep = markov_check(&rev, &[1.0], &tol()).unwrap();
        assert!(!rep.pass);
        assert!(rep.entries[0].choi_min_eig < -1e-6);
    }

    #[test]
    fn fixed_point_expectations() {
        // ergodic two-point: E = E_tau
        let s = two_point();
        let e = s.fixed_point_expectation();
        assert!(s.is_ergodic());
        let alg = s.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_element(&alg, &mut rng);
        let ex = e.apply(&x).unwrap();
        assert!(ex.sub(&alg.one().scale(x.trace())).unwrap().l2_norm() < 1e-10);

        // E commutes with T_t and E T_t = E
        let t = 0.6;
        let tt = s.evolve_superop(t).unwrap();
        let es = e.superoperator();
        let te = tt.matrix().mul(es);
        let et = es.mul(tt.matrix());
        assert!(te.sub(&et).max_abs() < 1e-10);
        assert!(te.sub(es).max_abs() < 1e-10);
    }

    #[test]
    fn spectral_gaps() {
        assert!((two_point().spectral_gap(&tol()) - 1.0).abs() < 1e-12);
        assert!((depolarizing(2).spectral_gap(&tol()) - 1.0).abs() < 1e-12);
        let alg = FiniteAlgebra::matrix(2);
        let zero = build_semigroup(
            Superoperator::new(alg, CMatrix::zeros(4, 4)).unwrap(),
            &tol(),
        )
        .unwrap();
        assert_eq!(zero.spectral_gap(&tol()), 0.0);
    }

    #[test]
    fn choi_of_e_tau_is_unit() {
        // C(E_tau) = 1^{op} ⊗ 1 on C ⊕ C
        let alg = FiniteAlgebra::two_point();
        let e = CondExpectation::trivial(&alg);
        let sup = Superoperator::new(alg.clone(), e.superoperator().clone()).unwrap();
        let onb: Vec<Element> = (0..2).map(|i| alg.basis_element(i)).collect();
        let dense = choi_operator(&sup, &onb, &tol()).unwrap();
        let expect = CMatrix::identity(4);
        assert!(dense.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn choi_norm_is_onb_invariant() {
        let alg = FiniteAlgebra::matrix(2);
        let s = depolarizing(2);
        let tt = s.evolve_superop(0.7).unwrap();
        let onb1: Vec<Element> = (0..4).map(|i| alg.basis_element(i)).collect();
        // random unitary rotation of the ONB
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_element(&alg, &mut rng).symmetrized();
        let hm = Superoperator::from_map(&alg, |x| {
            // conjugation by e^{iH}: x -> u x u*
            let u = crate::linalg::matrix_func(&h.blocks[0], |v| v, "id", &tol()).unwrap();
            let _ = u;
            x.clone()
        });
        let _ = hm;
        // simpler: mix the ONB by a known unitary matrix of coefficients
        let c = 0.6f64;
        let s2 = (1.0 - c * c).sqrt();
        let mut onb2 = onb1.clone();
        onb2[0] = onb1[0].scale_re(c).add(&onb1[3].scale_re(s2)).unwrap();
        onb2[3] = onb1[0].scale_re(-s2).add(&onb1[3].scale_re(c)).unwrap();
        let n1 = operator_norm(&choi_operator(&tt, &onb1, &tol()).unwrap()).unwrap();
        let n2 = operator_norm(&choi_operator(&tt, &onb2, &tol()).unwrap()).unwrap();
        assert!((n1 - n2).abs() < 1e-10, "{n1} vs {n2}");
    }

    #[test]
    fn choi_rejects_non_onb() {
        let alg = FiniteAlgebra::matrix(2);
        let s = depolarizing(2);
        let tt = s.evolve_superop(0.1).unwrap();
        let mut onb: Vec<Element> = (0..4).map(|i| alg.basis_element(i)).collect();
        onb[1] = onb[1].scale_re(2.0);
        assert!(matches!(
            choi_operator(&tt, &onb, &tol()),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn choi_blocks_match_dense() {
        let s = depolarizing(2);
        let tt = s.evolve_superop(0.4).unwrap();
        let blocks = choi_blocks(&tt).unwrap();
        let alg = s.algebra().clone();
        let onb: Vec<Element> = (0..4).map(|i| alg.basis_element(i)).collect();
        let dense = choi_operator(&tt, &onb, &tol()).unwrap();
        assert!(blocks.to_dense().sub(&dense).max_abs() < 1e-11);
        assert!(
            (blocks.operator_norm().unwrap() - operator_norm(&dense).unwrap()).abs() < 1e-10
        );
    }

    #[test]
    fn cb_return_time_depolarizing_matches_log_formula() {
        let s = depolarizing(2);
        let e = s.fixed_point_expectation();
        let id = Superoperator::identity(s.algebra());
        let ec = Superoperator::new(s.algebra().clone(), e.superoperator().clone()).unwrap();
        let norm0 = choi_blocks(&id)
            .unwrap()
            .sub(&choi_blocks(&ec).unwrap())
            .unwrap()
            .operator_norm()
            .unwrap();
        let expect = (2.0 * norm0).ln();
        let got = cb_return_time(&s, 0.5, &tol()).unwrap();
        assert!(!got.surrogate);
        assert!((got.t_cb - expect).abs() < 1e-8, "{} vs {}", got.t_cb, expect);
        // for M2 the norm is 3, so t_cb = ln 6
        assert!((norm0 - 3.0).abs() < 1e-10);
    }

    #[test]
    fn cb_return_time_two_point() {
        let s = two_point();
        let got = cb_return_time(&s, 0.5, &tol()).unwrap();
        assert!((got.t_cb - std::f64::consts::LN_2).abs() < 1e-8);
    }

    #[test]
    fn cb_scaling_halves_return_time() {
        let s = depolarizing(2);
        let doubled = build_semigroup(s.generator().scale(2.0), &tol()).unwrap();
        let t1 = cb_return_time(&s, 0.5, &tol()).unwrap().t_cb;
        let t2 = cb_return_time(&doubled, 0.5, &tol()).unwrap().t_cb;
        assert!((t2 - 0.5 * t1).abs() < 1e-8);
    }

    #[test]
    fn choi_norm_monotone_in_t() {
        let s = depolarizing(2);
        let e = s.fixed_point_expectation();
        let ec = choi_blocks(
            &Superoperator::new(s.algebra().clone(), e.superoperator().clone()).unwrap(),
        )
        .unwrap();
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let t = 0.2 * k as f64;
            let n = choi_blocks(&s.evolve_superop(t).unwrap())
                .unwrap()
                .sub(&ec)
                .unwrap()
                .operator_norm()
                .unwrap();
            assert!(n <= last + 1e-10);
            last = n;
        }
    }

    #[test]
    fn tensor_gap_is_min_of_gaps() {
        let a = two_point();
        let b = depolarizing(2);
        let prod = tensor_semigroup(&a, &b, &tol()).unwrap();
        let expect = a.spectral_gap(&tol()).min(b.spectral_gap(&tol()));
        assert!((prod.spectral_gap(&tol()) - expect).abs() < 1e-10);

        let b3 = build_semigroup(depolarizing(2).generator().scale(2.5), &tol()).unwrap();
        let prod = tensor_semigroup(&a, &b3, &tol()).unwrap();
        assert!((prod.spectral_gap(&tol()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_semigroup_factorizes() {
        let a = two_point();
        let b = two_point();
        let prod = tensor_semigroup(&a, &b, &tol()).unwrap();
        let alg = prod.algebra().clone();
        let alg_a = a.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_element(&alg_a, &mut rng);
        let y = random_element(&alg_a, &mut rng);
        let xy = crate::algebra::tensor_element(&alg, &x, &y).unwrap();
        let t = 0.85;
        let lhs = prod.evolve(&xy, t).unwrap();
        let rhs = crate::algebra::tensor_element(
            &alg,
            &a.evolve(&x, t).unwrap(),
            &b.evolve(&y, t).unwrap(),
        )
        .unwrap();
        assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-11);
    }

    #[test]
    fn commuting_square_on_tensor_legs() {
        // A ⊗ id and id ⊗ B on (C⊕C) ⊗ (C⊕C)
        let a = two_point();
        let id_alg = a.algebra().clone();
        let zero = build_semigroup(
            Superoperator::new(id_alg.clone(), CMatrix::zeros(2, 2)).unwrap(),
            &tol(),
        )
        .unwrap();
        let left = tensor_semigroup(&a, &zero, &tol()).unwrap();
        let right = tensor_semigroup(&zero, &a, &tol()).unwrap();
        let rep = commuting_square_check(&left, &right, &[0.3, 1.0], &tol()).unwrap();
        assert!(rep.pass, "{rep:?}");

        // joint fixed point of the word-length tensor is E_tau
        let sum_gen = Superoperator::new(
            left.algebra().clone(),
            left.generator().matrix().add(right.generator().matrix()),
        )
        .unwrap();
        let joint = build_semigroup(sum_gen, &tol()).unwrap();
        assert!(joint.is_ergodic());
    }

    #[test]
    fn non_commuting_inputs_error() {
        // conjugation generators that do not commute on M2
        let alg = FiniteAlgebra::matrix(2);
        let x_mat = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let z_mat = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let mk = |u: CMatrix| {
            let alg = alg.clone();
            Superoperator::from_map(&alg.clone(), move |el| {
                // A(x) = x - u x u*  (commutator-type generator)
                let uxu = alg
                    .element(vec![u.mul(&el.blocks[0]).mul(&u.adjoint())])
                    .unwrap();
                el.sub(&uxu).unwrap()
            })
        };
        let sa = build_semigroup(mk(x_mat), &tol()).unwrap();
        let sb = build_semigroup(mk(z_mat), &tol()).unwrap();
        assert!(commuting_square_check(&sa, &sb, &[0.5], &tol()).is_err());
    }

    #[test]
    fn unchecked_constructor_keeps_kernel_expectation() {
        let s = depolarizing(2);
        let neg = Superoperator::new(
            s.algebra().clone(),
            s.generator().matrix().scale(Complex64::new(-1.0, 0.0)),
        )
        .unwrap();
        let rev = QMSemigroup::from_generator_unchecked(neg, &tol()).unwrap();
        assert!(rev.is_ergodic());
    }
}
