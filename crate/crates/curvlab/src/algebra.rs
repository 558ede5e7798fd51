//! Finite von Neumann algebras as direct sums of matrix blocks with a
//! normalized faithful trace, plus states and conditional expectations.
//!
//! An algebra `⊕_b M_{d_b}` carries the trace `τ(x) = Σ_b w_b tr(x_b)/d_b`
//! with positive weights summing to one, so `τ(1) = 1`. Elements are tuples
//! of dense blocks. The vectorization order used by superoperators is the
//! L₂-orthonormal basis of scaled matrix units, blocks first, then row-major
//! within each block.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, HermitianEig};
use crate::tol::Tolerances;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, PartialEq)]
struct AlgebraData {
    block_dims: Vec<usize>,
    trace_weights: Vec<f64>,
}

/// A finite von Neumann algebra `⊕_b M_{d_b}` with normalized trace weights.
#[derive(Debug, Clone)]
pub struct FiniteAlgebra(Arc<AlgebraData>);

impl PartialEq for FiniteAlgebra {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl FiniteAlgebra {
    /// Build an algebra from block dimensions and optional trace weights.
    /// Without explicit weights, blocks are weighted proportionally to
    /// `d_b²` (the Plancherel convention).
    pub fn new(block_dims: Vec<usize>, trace_weights: Option<Vec<f64>>) -> Result<Self> {
        if block_dims.is_empty() || block_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput("block dimensions must be positive".into()));
        }
        let weights = match trace_weights {
            Some(w) => {
                if w.len() != block_dims.len() {
                    return Err(Error::Dimension(
                        "trace weight count does not match block count".into(),
                    ));
                }
                if w.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                    return Err(Error::InvalidInput("trace weights must be positive".into()));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "trace weights must sum to 1, got {sum}"
                    )));
                }
                w
            }
            None => {
                let total: f64 = block_dims.iter().map(|&d| (d * d) as f64).sum();
                block_dims.iter().map(|&d| (d * d) as f64 / total).collect()
            }
        };
        Ok(FiniteAlgebra(Arc::new(AlgebraData {
            block_dims,
            trace_weights: weights,
        })))
    }

    /// The full matrix algebra `M_n`.
    pub fn matrix(n: usize) -> Self {
        FiniteAlgebra::new(vec![n], None).expect("n > 0")
    }

    /// The two-point space `C ⊕ C` with weights (1/2, 1/2).
    pub fn two_point() -> Self {
        FiniteAlgebra::new(vec![1, 1], None).expect("static")
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.0.block_dims
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.0.trace_weights
    }

    pub fn num_blocks(&self) -> usize {
        self.0.block_dims.len()
    }

    /// Dimension of L₂: `Σ_b d_b²`.
    pub fn l2_dim(&self) -> usize {
        self.0.block_dims.iter().map(|&d| d * d).sum()
    }

    /// Dimension of the direct-sum representation: `Σ_b d_b`.
    pub fn rep_dim(&self) -> usize {
        self.0.block_dims.iter().sum()
    }

    pub fn zero(&self) -> Element {
        Element {
            algebra: self.clone(),
            blocks: self.0.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect(),
        }
    }

    pub fn one(&self) -> Element {
        Element {
            algebra: self.clone(),
            blocks: self.0.block_dims.iter().map(|&d| CMatrix::identity(d)).collect(),
        }
    }

    pub fn element(&self, blocks: Vec<CMatrix>) -> Result<Element> {
        if blocks.len() != self.num_blocks()
            || blocks
                .iter()
                .zip(self.block_dims())
                .any(|(m, &d)| m.rows != d || m.cols != d)
        {
            return Err(Error::Dimension("blocks do not match algebra".into()));
        }
        Ok(Element {
            algebra: self.clone(),
            blocks,
        })
    }

    /// Unscaled matrix units `e_ij` of every block, blocks first then row-major.
    pub fn matrix_units(&self) -> Vec<Element> {
        let mut out = Vec::with_capacity(self.l2_dim());
        for (b, &d) in self.block_dims().iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    let mut x = self.zero();
                    x.blocks[b][(i, j)] = Complex64::new(1.0, 0.0);
                    out.push(x);
                }
            }
        }
        out
    }

    /// The `idx`-th element of the vectorization ONB (scaled matrix units).
    pub fn basis_element(&self, idx: usize) -> Element {
        let (b, i, j) = self.basis_index(idx);
        let d = self.block_dims()[b] as f64;
        let w = self.trace_weights()[b];
        let mut x = self.zero();
        x.blocks[b][(i, j)] = Complex64::new((d / w).sqrt(), 0.0);
        x
    }

    fn basis_index(&self, mut idx: usize) -> (usize, usize, usize) {
        for (b, &d) in self.block_dims().iter().enumerate() {
            if idx < d * d {
                return (b, idx / d, idx % d);
            }
            idx -= d * d;
        }
        panic!("basis index out of range");
    }

    /// Coordinates of `x` in the vectorization ONB.
    pub fn vectorize(&self, x: &Element) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.l2_dim());
        for (b, &d) in self.block_dims().iter().enumerate() {
            let s = (self.trace_weights()[b] / d as f64).sqrt();
            for i in 0..d {
                for j in 0..d {
                    out.push(x.blocks[b][(i, j)] * s);
                }
            }
        }
        out
    }

    /// Inverse of [`FiniteAlgebra::vectorize`].
    pub fn unvectorize(&self, coords: &[Complex64]) -> Element {
        assert_eq!(coords.len(), self.l2_dim());
        let mut x = self.zero();
        let mut idx = 0;
        for (b, &d) in self.block_dims().iter().enumerate() {
            let s = (d as f64 / self.trace_weights()[b]).sqrt();
            for i in 0..d {
                for j in 0..d {
                    x.blocks[b][(i, j)] = coords[idx] * s;
                    idx += 1;
                }
            }
        }
        x
    }

    /// Tensor product algebra, blockwise Kronecker, first factor major.
    pub fn tensor(&self, other: &FiniteAlgebra) -> FiniteAlgebra {
        let mut dims = Vec::new();
        let mut weights = Vec::new();
        for (da, wa) in self.block_dims().iter().zip(self.trace_weights()) {
            for (db, wb) in other.block_dims().iter().zip(other.trace_weights()) {
                dims.push(da * db);
                weights.push(wa * wb);
            }
        }
        FiniteAlgebra::new(dims, Some(weights)).expect("valid tensor weights")
    }
}

/// Tensor of elements: `x ⊗ y` as an element of `tensor_alg = A ⊗ B`.
pub fn tensor_element(tensor_alg: &FiniteAlgebra, x: &Element, y: &Element) -> Result<Element> {
    let mut blocks = Vec::new();
    for xb in &x.blocks {
        for yb in &y.blocks {
            blocks.push(xb.kron(yb));
        }
    }
    tensor_alg.element(blocks)
}

/// An element of a [`FiniteAlgebra`].
#[derive(Debug, Clone)]
pub struct Element {
    algebra: FiniteAlgebra,
    pub blocks: Vec<CMatrix>,
}

impl Element {
    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.algebra
    }

    fn check_same(&self, other: &Element) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(Error::Dimension("elements of different algebras".into()));
        }
        Ok(())
    }

    /// Normalized trace `τ(x)`.
    pub fn trace(&self) -> Complex64 {
        self.blocks
            .iter()
            .zip(self.algebra.trace_weights())
            .map(|(m, &w)| m.trace() * Complex64::new(w / m.rows as f64, 0.0))
            .sum()
    }

    /// GNS inner product `⟨x, y⟩ = τ(x* y)`.
    pub fn l2_inner(&self, other: &Element) -> Result<Complex64> {
        self.check_same(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for ((a, b), (&w, &d)) in self
            .blocks
            .iter()
            .zip(&other.blocks)
            .zip(self.algebra.trace_weights().iter().zip(self.algebra.block_dims()))
        {
            let s = w / d as f64;
            let mut inner = Complex64::new(0.0, 0.0);
            for (za, zb) in a.data.iter().zip(&b.data) {
                inner += za.conj() * zb;
            }
            acc += inner * s;
        }
        Ok(acc)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Operator norm (max over blocks).
    pub fn op_norm(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for b in &self.blocks {
            worst = worst.max(crate::linalg::operator_norm(b)?);
        }
        Ok(worst)
    }

    pub fn adjoint(&self) -> Element {
        Element {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(Element {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(Element {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.sub(b))
                .collect(),
        })
    }

    pub fn mul(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(Element {
            algebra: self.algebra.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.mul(b))
                .collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Element {
        Element {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.scale(c)).collect(),
        }
    }

    pub fn scale_re(&self, c: f64) -> Element {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.hermiticity_residual())
            .fold(0.0, f64::max)
    }

    pub fn symmetrized(&self) -> Element {
        Element {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.symmetrized()).collect(),
        }
    }

    /// Blockwise eigendecomposition (Hermitian elements).
    pub fn eig(&self, tol: &Tolerances) -> Result<Vec<HermitianEig>> {
        self.blocks.iter().map(|m| hermitian_eig(m, tol)).collect()
    }

    /// Spectral calculus `f(x)` for Hermitian `x`, blockwise.
    pub fn func(
        &self,
        f: impl Fn(f64) -> f64 + Copy,
        name: &'static str,
        tol: &Tolerances,
    ) -> Result<Element> {
        let blocks = self
            .blocks
            .iter()
            .map(|m| crate::linalg::matrix_func(m, f, name, tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Element {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    /// Smallest eigenvalue across blocks (Hermitian elements).
    pub fn min_eig(&self, tol: &Tolerances) -> Result<f64> {
        let mut min = f64::INFINITY;
        for m in &self.blocks {
            min = min.min(crate::linalg::psd_min_eig(m, tol)?);
        }
        Ok(min)
    }
}

/// A density operator: positive semidefinite with `τ(ρ) = 1`.
///
/// The validated blockwise eigendecomposition is cached; entropy functionals
/// reuse it.
#[derive(Debug, Clone)]
pub struct DensityState {
    element: Element,
    eig: Vec<HermitianEig>,
}

impl DensityState {
    /// Validate Hermiticity, positivity (min eigenvalue ≥ −tol.psd) and
    /// normalization `|τ(ρ) − 1| ≤ 1e−10`.
    pub fn new(element: Element, tol: &Tolerances) -> Result<Self> {
        let herm = element.hermiticity_residual();
        let scale = 1.0 + element.blocks.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
        if herm > tol.herm * scale {
            return Err(Error::NotHermitian(herm));
        }
        let element = element.symmetrized();
        let eig = element.eig(tol)?;
        let min = eig
            .iter()
            .flat_map(|e| e.eigenvalues.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -tol.psd {
            return Err(Error::NotPositive(min));
        }
        let tr = element.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "density must have τ(ρ) = 1, got {tr}"
            )));
        }
        Ok(DensityState { element, eig })
    }

    pub fn element(&self) -> &Element {
        &self.element
    }

    pub fn eig(&self) -> &[HermitianEig] {
        &self.eig
    }

    pub fn algebra(&self) -> &FiniteAlgebra {
        self.element.algebra()
    }

    /// Smallest eigenvalue (faithfulness margin).
    pub fn min_eig(&self) -> f64 {
        self.eig
            .iter()
            .flat_map(|e| e.eigenvalues.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether all eigenvalues exceed the faithfulness floor.
    pub fn is_faithful(&self, tol: &Tolerances) -> bool {
        self.min_eig() > tol.density_floor
    }
}

/// Sampling modes for [`random_density`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    /// `ρ ∝ GG*` with a square complex Ginibre block.
    HilbertSchmidt,
    /// `ρ ∝ GG*` with `k` Ginibre columns per block.
    GinibreRank(usize),
    /// Diagonal density from squared Gaussians.
    Diagonal,
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministic faithful random density for the given `(seed, mode)`.
///
/// Eigenvalues are floored at `tol.density_floor` and the result is
/// renormalized, so `log ρ` is always finite.
pub fn random_density(
    alg: &FiniteAlgebra,
    seed: u64,
    mode: DensityMode,
    tol: &Tolerances,
) -> DensityState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(alg.num_blocks());
    for &d in alg.block_dims() {
        let m = match mode {
            DensityMode::HilbertSchmidt | DensityMode::GinibreRank(_) => {
                let k = match mode {
                    DensityMode::GinibreRank(k) => k.max(1).min(d),
                    _ => d,
                };
                let g = CMatrix::from_fn(d, k, |_, _| {
                    Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng))
                });
                g.mul(&g.adjoint())
            }
            DensityMode::Diagonal => {
                let entries: Vec<Complex64> = (0..d)
                    .map(|_| {
                        let x = standard_normal(&mut rng);
                        let y = standard_normal(&mut rng);
                        Complex64::new(x * x + y * y, 0.0)
                    })
                    .collect();
                CMatrix::diag(&entries)
            }
        };
        blocks.push(m);
    }
    let mut x = alg.element(blocks).expect("dims match");
    let tr = x.trace().re;
    if tr <= 0.0 {
        x = alg.one();
    } else {
        x = x.scale_re(1.0 / tr);
    }
    // floor the spectrum, renormalize
    let floor = tol.density_floor;
    let mut x = x
        .func(|v| v.max(floor), "clip", tol)
        .expect("hermitian by construction");
    let tr = x.trace().re;
    x = x.scale_re(1.0 / tr);
    DensityState::new(x, tol).expect("constructed density is valid")
}

/// A trace-preserving conditional expectation onto a subalgebra, stored as a
/// superoperator together with an orthonormal basis of its range.
#[derive(Debug, Clone)]
pub struct CondExpectation {
    algebra: FiniteAlgebra,
    superop: CMatrix,
    basis: Vec<Element>,
    idempotent: bool,
}

impl CondExpectation {
    /// Orthogonal projection in L₂ onto the span of `span`, verified to be a
    /// conditional expectation: the span must contain 1 and be closed under
    /// products and adjoints within `tol.subalgebra`.
    pub fn from_span(alg: &FiniteAlgebra, span: &[Element], tol: &Tolerances) -> Result<Self> {
        if span.is_empty() {
            return Err(Error::InvalidInput("empty span".into()));
        }
        for x in span {
            if x.algebra() != alg {
                return Err(Error::Dimension("span element from a different algebra".into()));
            }
        }
        let basis = gram_schmidt(alg, span)?;
        let project = |x: &Element, basis: &[Element]| -> Result<Element> {
            let mut p = alg.zero();
            for b in basis {
                let c = b.l2_inner(x)?;
                p = p.add(&b.scale(c))?;
            }
            Ok(p)
        };

        // 1 must lie in the span
        let one = alg.one();
        let res_one = one.sub(&project(&one, &basis)?)?.l2_norm();
        if res_one > tol.subalgebra {
            return Err(Error::NotSubalgebra(res_one));
        }

        // closure under * and multiplication
        let mut worst = 0.0f64;
        for (i, bi) in basis.iter().enumerate() {
            let adj = bi.adjoint();
            worst = worst.max(adj.sub(&project(&adj, &basis)?)?.l2_norm());
            for bj in &basis[i..] {
                let prod = bi.mul(bj)?;
                let scale = 1.0 + prod.l2_norm();
                worst = worst.max(prod.sub(&project(&prod, &basis)?)?.l2_norm() / scale);
                let prod = bj.mul(bi)?;
                worst = worst.max(prod.sub(&project(&prod, &basis)?)?.l2_norm() / scale);
            }
        }
        if worst > tol.subalgebra {
            return Err(Error::NotSubalgebra(worst));
        }

        Ok(Self::projection_onto(alg, basis))
    }

    /// Projection superoperator onto an already-orthonormal basis.
    /// Internal constructor: no subalgebra verification.
    pub(crate) fn projection_onto(alg: &FiniteAlgebra, basis: Vec<Element>) -> Self {
        let dim = alg.l2_dim();
        let mut superop = CMatrix::zeros(dim, dim);
        for b in &basis {
            let v = alg.vectorize(b);
            for i in 0..dim {
                for j in 0..dim {
                    superop[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        CondExpectation {
            algebra: alg.clone(),
            superop,
            basis,
            idempotent: true,
        }
    }

    /// The ergodic expectation `E_τ(x) = τ(x)·1`.
    pub fn trivial(alg: &FiniteAlgebra) -> Self {
        Self::projection_onto(alg, vec![alg.one()])
    }

    /// The identity map (expectation onto the whole algebra).
    pub fn identity(alg: &FiniteAlgebra) -> Self {
        let basis = (0..alg.l2_dim()).map(|i| alg.basis_element(i)).collect();
        Self::projection_onto(alg, basis)
    }

    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.algebra
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superop
    }

    pub fn basis(&self) -> &[Element] {
        &self.basis
    }

    pub fn is_idempotent_flagged(&self) -> bool {
        self.idempotent
    }

    pub fn apply(&self, x: &Element) -> Result<Element> {
        if x.algebra() != &self.algebra {
            return Err(Error::Dimension("element from a different algebra".into()));
        }
        let v = self.algebra.vectorize(x);
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                *o += self.superop[(i, j)] * vj;
            }
        }
        Ok(self.algebra.unvectorize(&out))
    }

    /// Apply to a density; the result is again a density.
    pub fn apply_density(&self, rho: &DensityState, tol: &Tolerances) -> Result<DensityState> {
        DensityState::new(self.apply(rho.element())?, tol)
    }

    /// `‖E² − E‖` in superoperator Frobenius norm.
    pub fn idempotency_residual(&self) -> f64 {
        self.superop.mul(&self.superop).sub(&self.superop).frobenius_norm()
    }
}

/// Modified Gram–Schmidt in L₂, dropping near-dependent vectors.
pub(crate) fn gram_schmidt(alg: &FiniteAlgebra, span: &[Element]) -> Result<Vec<Element>> {
    let mut basis: Vec<Element> = Vec::new();
    for x in span {
        let mut v = x.clone();
        for b in &basis {
            let c = b.l2_inner(&v)?;
            v = v.sub(&b.scale(c))?;
        }
        // second pass for numerical orthogonality
        for b in &basis {
            let c = b.l2_inner(&v)?;
            v = v.sub(&b.scale(c))?;
        }
        let n = v.l2_norm();
        if n > 1e-10 * (1.0 + x.l2_norm()) {
            basis.push(v.scale_re(1.0 / n));
        }
        let _ = alg;
    }
    Ok(basis)
}

#[cfg(test)]
pub(crate) fn random_element(alg: &FiniteAlgebra, rng: &mut ChaCha8Rng) -> Element {
    let blocks = alg
        .block_dims()
        .iter()
        .map(|&d| {
            CMatrix::from_fn(d, d, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            })
        })
        .collect();
    alg.element(blocks).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn trace_of_unit_is_one() {
        for alg in [
            FiniteAlgebra::matrix(3),
            FiniteAlgebra::two_point(),
            FiniteAlgebra::new(vec![2, 3], None).unwrap(),
        ] {
            let tr = alg.one().trace();
            assert!((tr.re - 1.0).abs() < 1e-14 && tr.im.abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_trace_of_matrix_unit() {
        let alg = FiniteAlgebra::matrix(2);
        let e11 = alg.matrix_units()[0].clone();
        assert!((e11.trace().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_point_trace_of_epsilon_vanishes() {
        let alg = FiniteAlgebra::two_point();
        let eps = alg
            .element(vec![
                CMatrix::from_real(1, 1, &[1.0]),
                CMatrix::from_real(1, 1, &[-1.0]),
            ])
            .unwrap();
        assert!(eps.trace().norm() < 1e-15);
    }

    #[test]
    fn l2_inner_examples() {
        let alg = FiniteAlgebra::matrix(2);
        let one = alg.one();
        assert!((one.l2_inner(&one).unwrap().re - 1.0).abs() < 1e-14);
        let e12 = alg.matrix_units()[1].clone();
        assert!((e12.l2_inner(&e12).unwrap().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn traciality_on_random_pairs() {
        let alg = FiniteAlgebra::new(vec![2, 3], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = random_element(&alg, &mut rng);
            let y = random_element(&alg, &mut rng);
            let xy = x.mul(&y).unwrap().trace();
            let yx = y.mul(&x).unwrap().trace();
            let bound = 1e-10 * x.op_norm().unwrap() * y.op_norm().unwrap();
            assert!((xy - yx).norm() <= bound.max(1e-12));
        }
    }

    #[test]
    fn vectorize_roundtrip_and_onb() {
        let alg = FiniteAlgebra::new(vec![2, 1], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_element(&alg, &mut rng);
        let back = alg.unvectorize(&alg.vectorize(&x));
        assert!(x.sub(&back).unwrap().l2_norm() < 1e-14);
        for i in 0..alg.l2_dim() {
            for j in 0..alg.l2_dim() {
                let ip = alg.basis_element(i).l2_inner(&alg.basis_element(j)).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-14 && ip.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conditional_expectation_trivial_and_identity() {
        let alg = FiniteAlgebra::matrix(2);
        let e_tau = CondExpectation::from_span(&alg, &[alg.one()], &tol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_element(&alg, &mut rng);
        let ex = e_tau.apply(&x).unwrap();
        let expect = alg.one().scale(x.trace());
        assert!(ex.sub(&expect).unwrap().l2_norm() < 1e-12);

        let span: Vec<Element> = alg.matrix_units();
        let e_id = CondExpectation::from_span(&alg, &span, &tol()).unwrap();
        let ex = e_id.apply(&x).unwrap();
        assert!(ex.sub(&x).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn conditional_expectation_diagonal_subalgebra() {
        let alg = FiniteAlgebra::matrix(2);
        let units = alg.matrix_units();
        // span {1, e11 - e22}
        let diff = units[0].sub(&units[3]).unwrap();
        let e = CondExpectation::from_span(&alg, &[alg.one(), diff], &tol()).unwrap();
        let e12 = units[1].clone();
        assert!(e.apply(&e12).unwrap().l2_norm() < 1e-12);
        let e11 = units[0].clone();
        let out = e.apply(&e11).unwrap();
        assert!(out.sub(&e11).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn not_a_subalgebra_is_rejected() {
        let alg = FiniteAlgebra::matrix(2);
        let units = alg.matrix_units();
        // span {1, e12}: adjoint e21 leaves the span
        let res = CondExpectation::from_span(&alg, &[alg.one(), units[1].clone()], &tol());
        assert!(matches!(res, Err(Error::NotSubalgebra(_))));
    }

    #[test]
    fn span_must_contain_one() {
        let alg = FiniteAlgebra::two_point();
        let eps = alg
            .element(vec![
                CMatrix::from_real(1, 1, &[1.0]),
                CMatrix::from_real(1, 1, &[-1.0]),
            ])
            .unwrap();
        assert!(CondExpectation::from_span(&alg, &[eps], &tol()).is_err());
    }

    #[test]
    fn expectation_invariants() {
        let alg = FiniteAlgebra::matrix(2);
        let units = alg.matrix_units();
        let diff = units[0].sub(&units[3]).unwrap();
        let e = CondExpectation::from_span(&alg, &[alg.one(), diff], &tol()).unwrap();
        assert!(e.idempotency_residual() < 1e-10);
        // self-adjoint superoperator
        assert!(e.superoperator().hermiticity_residual() < 1e-12);
        // E(1) = 1 and trace preservation
        let one = alg.one();
        assert!(e.apply(&one).unwrap().sub(&one).unwrap().l2_norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = random_element(&alg, &mut rng);
        assert!((e.apply(&x).unwrap().trace() - x.trace()).norm() < 1e-12);
    }

    #[test]
    fn bimodule_identity() {
        let alg = FiniteAlgebra::matrix(2);
        let units = alg.matrix_units();
        let diff = units[0].sub(&units[3]).unwrap();
        let e = CondExpectation::from_span(&alg, &[alg.one(), diff.clone()], &tol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let x = random_element(&alg, &mut rng);
            let a = diff.clone();
            let b = alg.one().add(&diff.scale_re(0.25)).unwrap();
            let lhs = e.apply(&a.mul(&x).unwrap().mul(&b).unwrap()).unwrap();
            let rhs = a.mul(&e.apply(&x).unwrap()).unwrap().mul(&b).unwrap();
            assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-9);
        }
    }

    #[test]
    fn expectation_is_l2_contraction() {
        let alg = FiniteAlgebra::new(vec![2, 2], None).unwrap();
        let e = CondExpectation::trivial(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x = random_element(&alg, &mut rng);
            assert!(e.apply(&x).unwrap().l2_norm() <= x.l2_norm() + 1e-12);
        }
    }

    #[test]
    fn random_density_shapes_and_determinism() {
        let alg = FiniteAlgebra::two_point();
        let a = random_density(&alg, 42, DensityMode::Diagonal, &tol());
        let b = random_density(&alg, 42, DensityMode::Diagonal, &tol());
        assert!(a.element().sub(b.element()).unwrap().l2_norm() == 0.0);
        let p = a.element().blocks[0][(0, 0)].re;
        assert!(p > 0.0 && p < 2.0);
        assert!((a.element().trace().re - 1.0).abs() < 1e-12);

        let c = random_density(&alg, 43, DensityMode::Diagonal, &tol());
        assert!(a.element().sub(c.element()).unwrap().l2_norm() > 0.0);
    }

    #[test]
    fn density_rejects_negative() {
        let alg = FiniteAlgebra::two_point();
        let x = alg
            .element(vec![
                CMatrix::from_real(1, 1, &[3.0]),
                CMatrix::from_real(1, 1, &[-1.0]),
            ])
            .unwrap();
        assert!(matches!(
            DensityState::new(x, &tol()),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn hilbert_schmidt_mean_is_maximally_mixed() {
        let alg = FiniteAlgebra::matrix(2);
        let n = 10_000;
        let mut mean = alg.zero();
        for seed in 0..n {
            mean = mean
                .add(random_density(&alg, seed as u64, DensityMode::HilbertSchmidt, &tol()).element())
                .unwrap();
        }
        mean = mean.scale_re(1.0 / n as f64);
        let dev = mean.sub(&alg.one()).unwrap().op_norm().unwrap();
        assert!(dev < 0.02, "mean deviates by {dev}");
    }

    #[test]
    fn tensor_structure() {
        let a = FiniteAlgebra::two_point();
        let t = a.tensor(&a);
        assert_eq!(t.block_dims(), &[1, 1, 1, 1]);
        assert!(t.trace_weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));

        let m2 = FiniteAlgebra::matrix(2);
        let t = m2.tensor(&m2);
        let e11 = m2.matrix_units()[0].clone();
        let x = tensor_element(&t, &e11, &e11).unwrap();
        assert!((x.trace().re - 0.25).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_element(&m2, &mut rng);
        let xt = tensor_element(&t, &x, &m2.one()).unwrap();
        assert!((xt.trace() - x.trace()).norm() < 1e-13);
    }
}
