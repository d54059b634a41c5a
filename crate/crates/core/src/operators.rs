//! Dense complex matrix algebra for small spin systems.
//!
//! Everything here works on dense `nalgebra` matrices; the systems of
//! interest have Hilbert-space dimension at most `2^MAX_SITES`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::dynamics::{LeftStateVector, StateVector};
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest supported spin chain.
pub const MAX_SITES: usize = 8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A dense square complex matrix: Hamiltonians, jump operators, Pauli strings.
#[derive(Clone, PartialEq)]
pub struct Operator {
    mat: CMatrix,
}

impl Operator {
    /// Wraps a matrix, checking that it is square, non-empty and finite.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension { expected: mat.nrows(), found: mat.ncols() });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidInput("operator dimension must be positive".into()));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entries".into()));
        }
        Ok(Self { mat })
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let diag = CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0)));
        Self::new(CMatrix::from_diagonal(&diag))
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim, dim) }
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { mat: &self.mat * factor }
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self { mat: self.mat.kronecker(&other.mat) }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    /// Largest entrywise modulus of `self - self^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.mat, &self.mat.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        norm_one(&self.mat)
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator{}", self.mat)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat - &rhs.mat }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat * &rhs.mat }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { mat: -&self.mat }
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn norm_one(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Axis selector for single-qubit Pauli matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Identity,
}

/// The standard 2x2 Pauli matrix for `axis`.
pub fn pauli(axis: PauliAxis) -> Operator {
    let entries = match axis {
        PauliAxis::X => [ZERO, ONE, ONE, ZERO],
        PauliAxis::Y => [ZERO, -I, I, ZERO],
        PauliAxis::Z => [ONE, ZERO, ZERO, -ONE],
        PauliAxis::Identity => [ONE, ZERO, ZERO, ONE],
    };
    Operator::from_matrix_unchecked(CMatrix::from_row_slice(2, 2, &entries))
}

/// Embeds a Pauli matrix at `site_index` (1-based) of an `chain_length`-site chain.
///
/// Site 1 is the leftmost, most significant, tensor factor.
pub fn site_operator(axis: PauliAxis, site_index: usize, chain_length: usize) -> Result<Operator> {
    if chain_length == 0 || chain_length > MAX_SITES {
        return Err(Error::InvalidInput(format!("chain length {chain_length} outside 1..={MAX_SITES}")));
    }
    if site_index == 0 || site_index > chain_length {
        return Err(Error::SiteIndex { index: site_index, chain_length });
    }
    let sigma = pauli(axis);
    let id = pauli(PauliAxis::Identity);
    let mut out = if site_index == 1 { sigma.clone() } else { id.clone() };
    for site in 2..=chain_length {
        let factor = if site == site_index { &sigma } else { &id };
        out = out.kron(factor);
    }
    Ok(out)
}

/// Splits `h` into its Hermitian part `(H + H^dagger)/2` and anti-Hermitian
/// part `(H - H^dagger)/2`.
pub fn hermitian_split(h: &Operator) -> (Operator, Operator) {
    let adj = h.mat.adjoint();
    let half = C64::new(0.5, 0.0);
    let plus = (&h.mat + &adj) * half;
    // h - plus keeps plus + minus == h bit-for-bit.
    let minus = &h.mat - &plus;
    (Operator::from_matrix_unchecked(plus), Operator::from_matrix_unchecked(minus))
}

/// Paired right and left eigenvectors with `<left_n|right_m> = delta_nm`.
#[derive(Debug, Clone)]
pub struct BiorthogonalEigensystem {
    pub eigenvalues: Vec<C64>,
    pub right_vectors: Vec<StateVector>,
    pub left_vectors: Vec<LeftStateVector>,
}

impl BiorthogonalEigensystem {
    /// `sum_n E_n |right_n><left_n|`.
    pub fn reconstruct(&self) -> Operator {
        let dim = self.eigenvalues.len();
        let mut acc = CMatrix::zeros(dim, dim);
        for ((e, r), l) in self.eigenvalues.iter().zip(&self.right_vectors).zip(&self.left_vectors) {
            acc += r.amplitudes() * l.amplitudes().adjoint() * *e;
        }
        Operator::from_matrix_unchecked(acc)
    }
}

/// Relative tolerance used to decide that two real parts tie when sorting.
const SORT_TIE_TOL: f64 = 1e-9;

/// Sorts by real part, breaking ties (within a relative tolerance) by
/// imaginary part. Consecutive runs of near-equal real parts are grouped
/// first, so the comparator is a proper total order.
fn sort_spectral<T>(items: &mut [(C64, T)]) {
    let scale = items.iter().map(|(e, _)| e.norm()).fold(1.0, f64::max);
    let tie = SORT_TIE_TOL * scale;
    items.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    let mut start = 0;
    while start < items.len() {
        let anchor = items[start].0.re;
        let mut end = start + 1;
        while end < items.len() && items[end].0.re - anchor <= tie {
            end += 1;
        }
        items[start..end].sort_by(|a, b| a.0.im.total_cmp(&b.0.im));
        start = end;
    }
}

pub(crate) fn min_gap(values: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    gap
}

/// Eigenvalues of a 2x2 matrix, `m_+ ± sqrt(((a-d)/2)^2 + bc)`.
fn eigenvalues_2x2(m: &CMatrix) -> [C64; 2] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let root = (half_diff * half_diff + b * c).sqrt();
    [mean + root, mean - root]
}

fn eigenvector_2x2(m: &CMatrix, lambda: C64) -> CVector {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let v1 = CVector::from_vec(vec![b, lambda - a]);
    let v2 = CVector::from_vec(vec![lambda - d, c]);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    if v.norm() == 0.0 {
        // scalar matrix: any vector works; pick by position of lambda
        return CVector::from_vec(vec![ONE, ZERO]);
    }
    let n = v.norm();
    v / C64::new(n, 0.0)
}

fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let max_iter = 1000 * m.nrows().max(1);
    let s = Schur::try_new(m.clone(), f64::EPSILON, max_iter).ok_or(Error::NoConvergence)?;
    Ok(s.unpack())
}

/// Unsorted eigenvalues.
fn raw_eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    match m.nrows() {
        1 => Ok(vec![m[(0, 0)]]),
        2 => Ok(eigenvalues_2x2(m).to_vec()),
        _ => {
            let (_, t) = schur(m)?;
            Ok(t.diagonal().iter().copied().collect())
        }
    }
}

/// Unsorted eigenpairs with unit-norm right eigenvectors.
fn raw_eigenpairs(m: &CMatrix) -> Result<Vec<(C64, CVector)>> {
    let n = m.nrows();
    match n {
        1 => Ok(vec![(m[(0, 0)], CVector::from_vec(vec![ONE]))]),
        2 => Ok(eigenvalues_2x2(m).iter().map(|&e| (e, eigenvector_2x2(m, e))).collect()),
        _ => {
            let (q, t) = schur(m)?;
            let smin = f64::EPSILON * norm_one(&t).max(f64::MIN_POSITIVE);
            let mut pairs = Vec::with_capacity(n);
            for k in 0..n {
                let lambda = t[(k, k)];
                let mut x = CVector::zeros(n);
                x[k] = ONE;
                for i in (0..k).rev() {
                    let mut sum = ZERO;
                    for j in i + 1..=k {
                        sum += t[(i, j)] * x[j];
                    }
                    let mut denom = t[(i, i)] - lambda;
                    if denom.norm() < smin {
                        denom = C64::new(smin, 0.0);
                    }
                    x[i] = -sum / denom;
                }
                let v = &q * x;
                let norm = v.norm();
                pairs.push((lambda, v / C64::new(norm, 0.0)));
            }
            Ok(pairs)
        }
    }
}

/// The spectrum of `h`, sorted by real part then imaginary part.
pub fn spectrum(h: &Operator) -> Result<Vec<C64>> {
    let mut items: Vec<(C64, ())> = raw_eigenvalues(&h.mat)?.into_iter().map(|e| (e, ())).collect();
    sort_spectral(&mut items);
    Ok(items.into_iter().map(|(e, _)| e).collect())
}

/// Biorthogonal eigendecomposition of a diagonalizable operator.
///
/// Right vectors have unit norm; left vectors are rescaled so that
/// `<left_n|right_m> = delta_nm`. Eigenpairs are sorted by real part, then
/// imaginary part. Spectra with two eigenvalues closer than `tol` are
/// rejected with [`Error::Defective`], which is how exceptional points show up.
pub fn biorthogonal_eig(h: &Operator, tol: f64) -> Result<BiorthogonalEigensystem> {
    let mut pairs = raw_eigenpairs(&h.mat)?;
    sort_spectral(&mut pairs);
    let eigenvalues: Vec<C64> = pairs.iter().map(|(e, _)| *e).collect();
    let gap = min_gap(&eigenvalues);
    if gap < tol {
        return Err(Error::Defective { min_gap: gap });
    }
    let n = h.dim();
    let right = CMatrix::from_columns(&pairs.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
    let inverse = right.clone().try_inverse().ok_or(Error::Defective { min_gap: gap })?;
    // <left_n| is row n of R^{-1}
    let left = inverse.adjoint();
    let right_vectors = (0..n).map(|k| StateVector::from_vector(right.column(k).into_owned())).collect();
    let left_vectors = (0..n).map(|k| LeftStateVector::from_vector(left.column(k).into_owned())).collect();
    Ok(BiorthogonalEigensystem { eigenvalues, right_vectors, left_vectors })
}

/// Hermitian eigendecomposition `A = U diag(d) U^dagger` after symmetrizing.
pub(crate) fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub(crate) fn min_hermitian_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigen(a).0.into_iter().fold(f64::INFINITY, f64::min)
}

pub(crate) fn check_hermitian(a: &CMatrix, tol: f64) -> Result<()> {
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let deviation = max_abs_diff(a, &a.adjoint());
    if deviation > tol * scale {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Principal square root of a Hermitian operator through its spectral
/// decomposition.
///
/// Negative eigenvalues map to positive-imaginary roots, so an indefinite
/// input yields a complex, non-Hermitian result with `S S = A`.
pub fn principal_sqrt_hermitian(a: &Operator) -> Result<Operator> {
    check_hermitian(&a.mat, 1e-10)?;
    let (d, u) = hermitian_eigen(&a.mat);
    let roots = CVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0).sqrt()));
    let s = &u * CMatrix::from_diagonal(&roots) * u.adjoint();
    Ok(Operator::from_matrix_unchecked(s))
}

// Padé coefficients and thresholds from Higham, "The scaling and squaring
// method for the matrix exponential revisited" (2005).
const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn real(c: f64) -> C64 {
    C64::new(c, 0.0)
}

/// Odd/even Padé sums `(U, V)` for orders 3..9 from precomputed even powers.
fn pade_low(a: &CMatrix, powers: &[CMatrix], coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let mut u = &id * real(coeffs[1]);
    let mut v = &id * real(coeffs[0]);
    for (k, p) in powers.iter().enumerate() {
        let order = 2 * (k + 1);
        if order + 1 < coeffs.len() {
            u += p * real(coeffs[order + 1]);
        }
        if order < coeffs.len() {
            v += p * real(coeffs[order]);
        }
    }
    (a * u, v)
}

/// `exp(a)` by Padé scaling and squaring.
pub fn matrix_exponential(a: &Operator) -> Operator {
    Operator::from_matrix_unchecked(expm(&a.mat))
}

pub(crate) fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let norm = norm_one(a);
    if norm == 0.0 {
        return id;
    }
    let a2 = a * a;
    let (u, v, squarings) = if norm <= THETA_9 {
        let a4 = &a2 * &a2;
        if norm <= THETA_3 {
            let (u, v) = pade_low(a, &[a2], &PADE_3);
            (u, v, 0)
        } else if norm <= THETA_5 {
            let (u, v) = pade_low(a, &[a2, a4], &PADE_5);
            (u, v, 0)
        } else if norm <= THETA_7 {
            let a6 = &a4 * &a2;
            let (u, v) = pade_low(a, &[a2, a4, a6], &PADE_7);
            (u, v, 0)
        } else {
            let a6 = &a4 * &a2;
            let a8 = &a6 * &a2;
            let (u, v) = pade_low(a, &[a2, a4, a6, a8], &PADE_9);
            (u, v, 0)
        }
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let factor = real(2f64.powi(-s));
        let a1 = a * factor;
        let a2 = &a2 * (factor * factor);
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = &PADE_13;
        let inner_u = &a6 * (&a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]));
        let u = &a1 * (inner_u + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + &id * real(b[1]));
        let inner_v = &a6 * (&a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]));
        let v = inner_v + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + &id * real(b[0]);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is nonsingular for finite input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
