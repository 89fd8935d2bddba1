//! Dense complex linear algebra on small multi-qubit Hilbert spaces.
//!
//! Everything else in the crate is built on two types: [`ComplexMatrix`], a
//! square complex matrix, and [`DensityMatrix`], a validated state on a tensor
//! product of subsystems. Subsystem 0 is the leftmost tensor factor (the most
//! significant digit of a basis index).
//!
//! Entropies are in nats.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::KrausSet;

pub type C64 = Complex64;

/// Largest Hilbert-space dimension any operation will build (2^13).
pub const MAX_DIM: usize = 1 << 13;

/// Tolerance for the Hermitian, trace and positivity checks on states.
pub const STATE_TOL: f64 = 1e-10;

/// Eigenvalues below this are dropped from entropy sums.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn guard_dim(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        Err(Error::DimensionGuard { dim, max: MAX_DIM })
    } else {
        Ok(())
    }
}

/// A square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, &mut f))
    }

    /// Builds a matrix from entries listed row by row.
    ///
    /// Panics if `entries.len()` is not a perfect square.
    pub fn from_rows(entries: &[C64]) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, entries.len(), "entry count must be a perfect square");
        ComplexMatrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Real-valued variant of [`ComplexMatrix::from_rows`].
    pub fn from_real_rows(entries: &[f64]) -> Self {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(&c)
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// The projector |ψ⟩⟨ψ| (not normalized).
    pub fn outer(ket: &[C64]) -> Self {
        let n = ket.len();
        Self::from_fn(n, |i, j| ket[i] * ket[j].conj())
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        ComplexMatrix(m)
    }

    pub fn as_inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Entrywise max-norm of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |a_ij − conj(a_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†) / 2.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// max |A†A − I|.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        (&self.adjoint() * self).max_abs_diff(&ComplexMatrix::identity(n))
    }

    /// Real parts of the diagonal (populations).
    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.dim(), self.dim())?;
        for i in 0..self.dim() {
            write!(f, "  ")?;
            for j in 0..self.dim() {
                let z = self.0[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = a.dim().checked_mul(b.dim()).ok_or(Error::DimensionGuard { dim: usize::MAX, max: MAX_DIM })?;
    guard_dim(dim)?;
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// A Hermitian, unit-trace, positive-semidefinite matrix on a tensor product
/// of subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates `mat` against `dims` and the state invariants.
    pub fn new(mat: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(mat.dim(), &dims)?;
        let rho = DensityMatrix { mat, dims };
        rho.validate()?;
        Ok(rho)
    }

    /// A state on `log2(dim)` qubits.
    pub fn qubits(mat: ComplexMatrix) -> Result<Self> {
        let dim = mat.dim();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidSubsystems(format!("dimension {dim} is not a power of two")));
        }
        Self::new(mat, vec![2; dim.trailing_zeros() as usize])
    }

    /// The pure state |ψ⟩⟨ψ| on qubits, normalizing `ket`.
    pub fn pure(ket: &[C64]) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::param("zero ket"));
        }
        let k: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Self::qubits(ComplexMatrix::outer(&k))
    }

    pub(crate) fn from_parts_unchecked(mat: ComplexMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(mat.dim(), dims.iter().product::<usize>());
        DensityMatrix { mat, dims }
    }

    /// Checks the Hermitian, trace and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let herm = self.mat.hermiticity_error();
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.mat.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min_ev = herm_eig(&self.mat)?.values[0];
        if min_ev < -STATE_TOL {
            return Err(Error::NotPsd(min_ev));
        }
        Ok(())
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// tr(ρ²).
    pub fn purity(&self) -> f64 {
        self.mat.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ρ ⊗ σ with subsystem lists concatenated.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let mat = kron(&self.mat, &other.mat)?;
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ok(DensityMatrix::from_parts_unchecked(mat, dims))
    }

    /// Spectrum in ascending order with tiny negative eigenvalues clipped to
    /// zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        clip_spectrum(herm_eig(&self.mat)?.values)
    }

    /// Maximally mixed state on the given subsystems.
    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        guard_dim(d)?;
        Ok(DensityMatrix::from_parts_unchecked(ComplexMatrix::identity(d).scale_real(1.0 / d as f64), dims))
    }
}

fn check_dims(dim: usize, dims: &[usize]) -> Result<()> {
    guard_dim(dim)?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidSubsystems("subsystem dimensions must be positive".into()));
    }
    let prod: usize = dims.iter().product();
    if prod != dim {
        return Err(Error::DimensionMismatch { expected: prod, got: dim });
    }
    Ok(())
}

/// Clips eigenvalues in [−STATE_TOL, 0) to zero; anything more negative is
/// an invariant violation.
pub(crate) fn clip_spectrum(values: Vec<f64>) -> Result<Vec<f64>> {
    values.into_iter().map(|v| if v < -STATE_TOL { Err(Error::NotPsd(v)) } else { Ok(v.max(0.0)) }).collect()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Offsets into the full index space for every assignment of the listed
/// subsystems, enumerated with the first listed subsystem most significant.
fn offsets(dims: &[usize], strides: &[usize], which: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &k in which {
        let mut next = Vec::with_capacity(out.len() * dims[k]);
        for &base in &out {
            for d in 0..dims[k] {
                next.push(base + d * strides[k]);
            }
        }
        out = next;
    }
    out
}

fn normalize_selection(selection: &[usize], n: usize, allow_unsorted: bool) -> Result<Vec<usize>> {
    if selection.is_empty() {
        return Err(Error::InvalidSubsystems("empty subsystem selection".into()));
    }
    let mut seen = vec![false; n];
    for &k in selection {
        if k >= n {
            return Err(Error::InvalidSubsystems(format!("index {k} out of range for {n} subsystems")));
        }
        if seen[k] {
            return Err(Error::InvalidSubsystems(format!("index {k} repeated")));
        }
        seen[k] = true;
    }
    if allow_unsorted {
        Ok(selection.to_vec())
    } else {
        Ok((0..n).filter(|&k| seen[k]).collect())
    }
}

/// Reduced state on the subsystems in `keep`, which come out in their
/// original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_subsystems();
    let keep = normalize_selection(keep, n, false)?;
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let st = strides(&rho.dims);
    let keep_off = offsets(&rho.dims, &st, &keep);
    let traced_off = offsets(&rho.dims, &st, &traced);
    let dk = keep_off.len();
    let m = &rho.mat.0;
    let out = DMatrix::from_fn(dk, dk, |i, j| {
        let (oi, oj) = (keep_off[i], keep_off[j]);
        traced_off.iter().map(|&t| m[(oi + t, oj + t)]).sum()
    });
    let dims = keep.iter().map(|&k| rho.dims[k]).collect();
    Ok(DensityMatrix::from_parts_unchecked(ComplexMatrix(out).hermitian_part(), dims))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.0.column(k).iter().copied().collect()
    }

    /// V Λ V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_spectral(|x| C64::new(x, 0.0))
    }

    /// V f(Λ) V†.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = &self.vectors.0;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= s;
            }
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
/// matrix.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermEig> {
    let herm = a.hermiticity_error();
    if herm > STATE_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let eig = SymmetricEigen::new(a.hermitian_part().0);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = a.dim();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermEig { values, vectors: ComplexMatrix(vectors) })
}

/// U = exp(−i H t) with ħ = 1, built from the spectrum of `h`.
pub fn unitary_from_hamiltonian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(h)?;
    Ok(eig.apply_spectral(|lam| C64::from_polar(1.0, -lam * t)))
}

/// −Σ λ ln λ in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let values = herm_eig(&rho.mat).map(|e| e.values).unwrap_or_default();
    entropy_of_spectrum(&values)
}

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values.iter().filter(|&&l| l > ENTROPY_CUTOFF).map(|&l| -l * l.ln()).sum()
}

/// An operation acting on a subset of subsystems.
#[derive(Clone, Copy, Debug)]
pub enum SubsystemOp<'a> {
    Unitary(&'a ComplexMatrix),
    Kraus(&'a KrausSet),
}

impl<'a> From<&'a ComplexMatrix> for SubsystemOp<'a> {
    fn from(u: &'a ComplexMatrix) -> Self {
        SubsystemOp::Unitary(u)
    }
}

impl<'a> From<&'a KrausSet> for SubsystemOp<'a> {
    fn from(k: &'a KrausSet) -> Self {
        SubsystemOp::Kraus(k)
    }
}

/// Tolerance on U†U = I accepted for unitaries passed to
/// [`apply_on_subsystems`].
const UNITARY_TOL: f64 = 1e-10;

/// Applies a unitary or a Kraus channel to the ordered `targets`; the first
/// target is the most significant factor of the operator.
pub fn apply_on_subsystems<'a>(
    rho: &DensityMatrix,
    op: impl Into<SubsystemOp<'a>>,
    targets: &[usize],
) -> Result<DensityMatrix> {
    let targets = normalize_selection(targets, rho.n_subsystems(), true)?;
    let target_dim: usize = targets.iter().map(|&k| rho.dims[k]).product();
    let ops: Vec<&ComplexMatrix> = match op.into() {
        SubsystemOp::Unitary(u) => {
            let err = u.unitarity_error();
            if u.dim() == target_dim && err > UNITARY_TOL {
                return Err(Error::NotCptp(err));
            }
            vec![u]
        }
        SubsystemOp::Kraus(k) => k.ops().iter().collect(),
    };
    for k in &ops {
        if k.dim() != target_dim {
            return Err(Error::DimensionMismatch { expected: target_dim, got: k.dim() });
        }
    }
    let st = strides(&rho.dims);
    let t_off = offsets(&rho.dims, &st, &targets);
    let rest: Vec<usize> = (0..rho.n_subsystems()).filter(|k| !targets.contains(k)).collect();
    let r_off = offsets(&rho.dims, &st, &rest);

    let mut acc = DMatrix::<C64>::zeros(rho.dim(), rho.dim());
    for k in ops {
        // K ρ K† = (K (K ρ)†)† for Hermitian ρ.
        let left = left_apply(&rho.mat.0, &k.0, &t_off, &r_off);
        let both = left_apply(&left.adjoint(), &k.0, &t_off, &r_off).adjoint();
        acc += both;
    }
    let mat = ComplexMatrix(acc).hermitian_part();
    Ok(DensityMatrix::from_parts_unchecked(mat, rho.dims.clone()))
}

fn left_apply(m: &DMatrix<C64>, op: &DMatrix<C64>, t_off: &[usize], r_off: &[usize]) -> DMatrix<C64> {
    let dt = t_off.len();
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    let mut v = vec![ZERO; dt];
    for c in 0..m.ncols() {
        for &r in r_off {
            for (a, &t) in t_off.iter().enumerate() {
                v[a] = m[(r + t, c)];
            }
            for (a, &t) in t_off.iter().enumerate() {
                let mut s = ZERO;
                for (b, vb) in v.iter().enumerate() {
                    s += op[(a, b)] * vb;
                }
                out[(r + t, c)] = s;
            }
        }
    }
    out
}

/// Random Hermitian matrix with standard normal entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| C64::new(normal(rng), normal(rng)));
    g.hermitian_part()
}

/// Random full-rank state G G† / tr(G G†) with Ginibre G.
pub fn random_density_matrix<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = ComplexMatrix::from_fn(d, |_, _| C64::new(normal(rng), normal(rng)));
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_parts_unchecked(m.scale_real(1.0 / tr).hermitian_part(), dims.to_vec())
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box–Muller.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pauli and ladder operators in the {|g⟩, |e⟩} basis, σ_z|e⟩ = +|e⟩ and
/// σ⁻|e⟩ = |g⟩.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> ComplexMatrix {
        let i = C64::new(0.0, 1.0);
        ComplexMatrix::from_rows(&[C64::new(0.0, 0.0), i, -i, C64::new(0.0, 0.0)])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[-1.0, 1.0])
    }

    /// σ⁺ = |e⟩⟨g|.
    pub fn raising() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[0.0, 0.0, 1.0, 0.0])
    }

    /// σ⁻ = |g⟩⟨e|.
    pub fn lowering() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[0.0, 1.0, 0.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(s, 0.0), ZERO, ZERO, c(s, 0.0)]).unwrap()
    }

    #[test]
    fn kron_basics() {
        let i4 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(i4, ComplexMatrix::identity(4));

        let zz = kron(&pauli::z(), &pauli::z()).unwrap();
        assert_eq!(zz, ComplexMatrix::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]));

        let p0 = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::from_real_diagonal(&[0.0, 1.0]);
        let p01 = kron(&p0, &p1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 1) { 1.0 } else { 0.0 };
                assert_eq!(p01[(i, j)], c(expect, 0.0));
            }
        }
    }

    #[test]
    fn kron_guard() {
        let big = ComplexMatrix::identity(1 << 7);
        let err = kron(&big, &big).unwrap_err();
        assert!(matches!(err, Error::DimensionGuard { dim: 16384, .. }));
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(&[2], &mut rng);
        let sigma = random_density_matrix(&[2, 2], &mut rng);
        let joint = rho.tensor(&sigma).unwrap();
        let back = partial_trace(&joint, &[0]).unwrap();
        assert!(back.mat().max_abs_diff(rho.mat()) < 1e-12);
        let back = partial_trace(&joint, &[2, 1]).unwrap();
        assert_eq!(back.dims(), &[2, 2]);
        assert!(back.mat().max_abs_diff(sigma.mat()) < 1e-12);

        let reduced = partial_trace(&bell(), &[0]).unwrap();
        assert!(reduced.mat().max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        assert!(matches!(partial_trace(&bell(), &[]), Err(Error::InvalidSubsystems(_))));
        assert!(matches!(partial_trace(&bell(), &[2]), Err(Error::InvalidSubsystems(_))));
    }

    #[test]
    fn herm_eig_small_cases() {
        let e = herm_eig(&ComplexMatrix::from_real_diagonal(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);

        let e = herm_eig(&pauli::x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let minus = e.vector(0);
        // (|0⟩ − |1⟩)/√2 up to a global phase
        assert!((minus[0] + minus[1]).norm() < 1e-14);
        assert!((minus[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn herm_eig_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(8, &mut rng);
        let e = herm_eig(&a).unwrap();
        assert!(e.reconstruct().max_abs_diff(&a) < 1e-10);
        assert!(e.vectors.unitarity_error() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(herm_eig(&a), Err(Error::NotHermitian(_))));
        assert!(unitary_from_hamiltonian(&a, 1.0).is_err());
    }

    #[test]
    fn unitary_examples() {
        let h = random_hermitian(4, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(unitary_from_hamiltonian(&h, 0.0).unwrap().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);

        // (g/2) σz⊗σz for gτ = π.
        let zz = kron(&pauli::z(), &pauli::z()).unwrap().scale_real(0.5);
        let u = unitary_from_hamiltonian(&zz, std::f64::consts::PI).unwrap();
        let m = C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2);
        let p = m.conj();
        assert!(u.max_abs_diff(&ComplexMatrix::from_diagonal(&[m, p, p, m])) < 1e-12);
    }

    #[test]
    fn swap_hamiltonian_matches_series() {
        let sp = kron(&pauli::raising(), &pauli::lowering()).unwrap();
        let h = &sp + &sp.adjoint();
        let t = std::f64::consts::FRAC_PI_2;
        let u = unitary_from_hamiltonian(&h, t).unwrap();

        // Oracle: truncated Taylor series of exp(−iHt).
        let a = h.scale(C64::new(0.0, -t));
        let mut term = ComplexMatrix::identity(4);
        let mut sum = ComplexMatrix::identity(4);
        for k in 1..60 {
            term = (&term * &a).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        assert!(u.max_abs_diff(&sum) < 1e-12);
        // |eg⟩ (index 2) → −i|ge⟩ (index 1)
        assert!((u[(1, 2)] - c(0.0, -1.0)).norm() < 1e-12);
        assert!(u[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&bell()).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(vec![2]).unwrap();
        assert!((von_neumann_entropy(&mixed) - 2f64.ln()).abs() < 1e-14);
        let gibbs = DensityMatrix::qubits(ComplexMatrix::from_real_diagonal(&[2.0 / 3.0, 1.0 / 3.0])).unwrap();
        let expect = -(2.0f64 / 3.0) * (2.0f64 / 3.0).ln() - (1.0f64 / 3.0) * (1.0f64 / 3.0).ln();
        assert!((von_neumann_entropy(&gibbs) - expect).abs() < 1e-14);
        assert!((expect - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn apply_identity_and_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random_density_matrix(&[2], &mut rng);
        let sigma = random_density_matrix(&[2], &mut rng);
        let joint = rho.tensor(&sigma).unwrap();

        let same = apply_on_subsystems(&joint, &ComplexMatrix::identity(4), &[0, 1]).unwrap();
        assert!(same.mat().max_abs_diff(joint.mat()) < 1e-15);

        let swap = ComplexMatrix::from_real_rows(&[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ]);
        let swapped = apply_on_subsystems(&joint, &swap, &[0, 1]).unwrap();
        let expect = sigma.tensor(&rho).unwrap();
        assert!(swapped.mat().max_abs_diff(expect.mat()) < 1e-15);
        // reversing the target order is the same swap
        let swapped = apply_on_subsystems(&joint, &swap, &[1, 0]).unwrap();
        assert!(swapped.mat().max_abs_diff(expect.mat()) < 1e-15);
    }

    #[test]
    fn apply_matches_embedded_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density_matrix(&[2, 2, 2], &mut rng);
        let u = unitary_from_hamiltonian(&random_hermitian(4, &mut rng), 0.7).unwrap();
        // targets (2, 0): embed by conjugating with a permutation
        let out = apply_on_subsystems(&rho, &u, &[2, 0]).unwrap();

        // explicit: U acts on (q2, q0); build full operator entry by entry
        let full = ComplexMatrix::from_fn(8, |i, j| {
            let bits = |x: usize| ((x >> 2) & 1, (x >> 1) & 1, x & 1);
            let (i0, i1, i2) = bits(i);
            let (j0, j1, j2) = bits(j);
            if i1 != j1 {
                return ZERO;
            }
            u[(i2 * 2 + i0, j2 * 2 + j0)]
        });
        let expect = &(&full * rho.mat()) * &full.adjoint();
        assert!(out.mat().max_abs_diff(&expect) < 1e-13);
        let before = rho.eigenvalues().unwrap();
        let after = out.eigenvalues().unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_errors() {
        let rho = bell();
        let u = ComplexMatrix::identity(2);
        assert!(matches!(
            apply_on_subsystems(&rho, &u, &[0, 1]),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
        let not_unitary = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(apply_on_subsystems(&rho, &not_unitary, &[0]), Err(Error::NotCptp(_))));
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = ComplexMatrix::from_real_diagonal(&[0.5, 0.4]);
        assert!(matches!(DensityMatrix::qubits(bad_trace), Err(Error::InvalidTrace(_))));
        let not_psd = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::qubits(not_psd), Err(Error::NotPsd(_))));
        let not_herm = ComplexMatrix::from_real_rows(&[0.5, 0.1, 0.0, 0.5]);
        assert!(matches!(DensityMatrix::qubits(not_herm), Err(Error::NotHermitian(_))));
        let wrong_dims = DensityMatrix::new(ComplexMatrix::identity(4).scale_real(0.25), vec![2, 3]);
        assert!(matches!(wrong_dims, Err(Error::DimensionMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn partial_trace_inverts_kron(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&[2, 2], &mut rng);
                let sigma = random_density_matrix(&[2], &mut rng);
                let back = partial_trace(&rho.tensor(&sigma).unwrap(), &[0, 1]).unwrap();
                prop_assert!(back.mat().max_abs_diff(rho.mat()) < 1e-12);
                prop_assert!(back.validate().is_ok());
            }

            #[test]
            fn unitary_group_law(seed in any::<u64>(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
                let h = random_hermitian(4, &mut ChaCha8Rng::seed_from_u64(seed));
                let u12 = unitary_from_hamiltonian(&h, t1 + t2).unwrap();
                let prod = &unitary_from_hamiltonian(&h, t1).unwrap() * &unitary_from_hamiltonian(&h, t2).unwrap();
                prop_assert!(u12.max_abs_diff(&prod) < 1e-10);
                prop_assert!(u12.unitarity_error() < 1e-10);
            }

            #[test]
            fn entropy_unitarily_invariant(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&[2, 2], &mut rng);
                let u = unitary_from_hamiltonian(&random_hermitian(4, &mut rng), 1.3).unwrap();
                let rotated = apply_on_subsystems(&rho, &u, &[0, 1]).unwrap();
                prop_assert!(rotated.validate().is_ok());
                prop_assert!((von_neumann_entropy(&rho) - von_neumann_entropy(&rotated)).abs() < 1e-10);
            }
        }
    }
}
