//! Dense complex linear algebra shared by every other module: validated
//! Hermitian/unitary wrappers, matrix exponentials through eigendecomposition,
//! fractional powers and principal logarithms of unitaries, characteristic
//! polynomials and the polynomial purity functional, and phase-invariant gate
//! fidelity.
//!
//! All quantities are in atomic units with hbar = 1; unit conversions happen
//! only at module boundaries.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense N x N complex matrix, the substrate for Hamiltonians and unitaries.
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
/// Eigenphases closer than this to the branch cut at pi collapse onto pi so
/// that fractional powers are deterministic.
const BRANCH_NUDGE: f64 = 1e-8;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Validated Hermitian matrix: ||M - M'||_F <= 1e-12 * ||M||_F at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: CMat,
}

impl HermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = (&m - m.adjoint()).norm();
        let tolerance = HERMITIAN_TOL * m.norm();
        if deviation > tolerance && deviation > 0.0 {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        // Symmetrize so downstream eigensolves see an exactly Hermitian input.
        let inner = (&m + m.adjoint()).scale(0.5);
        Ok(Self { inner })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: CMat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.inner
    }

    pub fn into_inner(self) -> CMat {
        self.inner
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Largest eigenvalue magnitude (spectral norm for Hermitian input).
    pub fn spectral_norm(&self) -> f64 {
        let eig = hermitian_eigen(self);
        eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Validated unitary matrix: ||U'U - I||_F <= 1e-10 * N at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    inner: CMat,
}

impl UnitaryMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let deviation = (m.adjoint() * &m - identity(n)).norm();
        let tolerance = UNITARY_TOL * n as f64;
        if deviation > tolerance {
            return Err(Error::NotUnitary {
                deviation,
                tolerance,
            });
        }
        Ok(Self { inner: m })
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.inner
    }

    pub fn into_inner(self) -> CMat {
        self.inner
    }
}

/// Monic characteristic polynomial coefficients a_0..a_N of
/// P(lambda) = det(lambda I - U) = sum_j a_j lambda^j, with a_N = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPolyCoefficients {
    coeffs: Vec<Complex64>,
}

impl CharPolyCoefficients {
    /// Coefficients in ascending order a_0, a_1, ..., a_N.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues ascending,
/// eigenvector columns phase-fixed so the largest-modulus component of each
/// column is real positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(h: &HermitianMatrix) -> HermitianEigen {
    let se = nalgebra::SymmetricEigen::new(h.inner.clone());
    sort_and_fix(se.eigenvalues.as_slice(), &se.eigenvectors)
}

fn sort_and_fix(values: &[f64], vectors: &CMat) -> HermitianEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(values[src]);
        let mut col = vectors.column(src).clone_owned();
        fix_column_phase(&mut col);
        vecs.set_column(dst, &col);
    }
    HermitianEigen {
        values: vals,
        vectors: vecs,
    }
}

fn fix_column_phase(col: &mut CVec) {
    let mut best = 0usize;
    let mut best_mod = 0.0f64;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = col[best] / Complex64::new(best_mod, 0.0);
        let rot = phase.conj();
        for z in col.iter_mut() {
            *z *= rot;
        }
    }
}

/// Cached eigendecomposition of a Hamiltonian for repeated evolutions
/// exp(-i H t) at many different t.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: Vec<f64>,
    vectors: CMat,
    hamiltonian: CMat,
}

impl Propagator {
    pub fn new(h: &HermitianMatrix) -> Self {
        let eig = hermitian_eigen(h);
        Self {
            values: eig.values,
            vectors: eig.vectors,
            hamiltonian: h.matrix().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    /// exp(-i H t) as a raw matrix.
    pub fn evolve_raw(&self, t: f64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, lambda) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * t);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn evolve(&self, t: f64) -> UnitaryMatrix {
        // Product of exactly unitary factors; the invariant holds by
        // construction up to rounding.
        UnitaryMatrix {
            inner: self.evolve_raw(t),
        }
    }
}

/// exp(-i H t) by eigendecomposition of H.
pub fn expm_hermitian(h: &HermitianMatrix, t: f64) -> Result<UnitaryMatrix> {
    if !t.is_finite() {
        return Err(Error::Numeric(format!("non-finite evolution time {t}")));
    }
    let u = Propagator::new(h).evolve_raw(t);
    UnitaryMatrix::new(u)
}

/// Monic characteristic polynomial det(lambda I - A) by the
/// Faddeev-LeVerrier recursion.
pub fn char_poly(a: &CMat) -> CharPolyCoefficients {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "char_poly needs a square matrix");
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    if n == 0 {
        return CharPolyCoefficients { coeffs };
    }
    let mut mk = a.clone();
    let mut c = -mk.trace();
    coeffs[n - 1] = c;
    for k in 2..=n {
        let shifted = &mk + identity(n).scale_c(c);
        mk = a * shifted;
        c = -mk.trace() / Complex64::new(k as f64, 0.0);
        coeffs[n - k] = c;
    }
    CharPolyCoefficients { coeffs }
}

/// Monic coefficients from the eigenvalue product expansion
/// prod_k (lambda - mu_k); the independent route used to cross-check
/// `char_poly` in tests.
pub fn char_poly_from_eigenvalues(eigs: &[Complex64]) -> CharPolyCoefficients {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); eigs.len() + 1];
    coeffs[0] = Complex64::new(1.0, 0.0);
    let mut deg = 0usize;
    for mu in eigs {
        deg += 1;
        // multiply current polynomial (stored descending) by (lambda - mu)
        for j in (1..=deg).rev() {
            let lower = coeffs[j - 1];
            coeffs[j] += lower * (-mu);
        }
    }
    // stored descending: coeffs[j] multiplies lambda^{deg-j}; flip to ascending
    let n = eigs.len();
    let mut ascending = vec![Complex64::new(0.0, 0.0); n + 1];
    for (j, c) in coeffs.iter().enumerate() {
        ascending[n - j] = *c;
    }
    CharPolyCoefficients { coeffs: ascending }
}

/// F_N = sum_j |a_j|^2 over the characteristic polynomial of U.
/// Always >= 2 for unitary input; equals 2 exactly on nondegenerate N-th
/// roots of the identity (up to global phase).
pub fn poly_purity(u: &UnitaryMatrix) -> f64 {
    poly_purity_raw(u.matrix())
}

/// Purity from a raw matrix; used in optimizer inner loops where the input is
/// a product of exactly unitary factors and revalidation would dominate cost.
pub fn poly_purity_raw(m: &CMat) -> f64 {
    char_poly(m).coeffs().iter().map(|a| a.norm_sqr()).sum()
}

/// Eigendecomposition of a unitary matrix through the commuting Hermitian
/// parts (U + U')/2 and (U - U')/2i; degenerate clusters of the first are
/// resolved by diagonalizing the projection of the second.
///
/// Returns unit-modulus eigenvalues and the common orthonormal eigenbasis,
/// validated by reconstruction error <= 1e-10 * N.
pub fn unitary_eigen(u: &UnitaryMatrix) -> Result<(Vec<Complex64>, CMat)> {
    let n = u.dim();
    unitary_eigen_with_tol(u, 1e-10 * n as f64)
}

/// Same decomposition with a caller-chosen reconstruction bound. When two
/// eigenvalues of U genuinely nearly coincide (gap delta), any strict
/// eigenpair carries an irreducible residual of order delta; matrix
/// functions built from such pairs are still accurate to O(delta), so
/// internal consumers of the principal log accept a looser bound.
pub(crate) fn unitary_eigen_with_tol(
    u: &UnitaryMatrix,
    recon_tol: f64,
) -> Result<(Vec<Complex64>, CMat)> {
    let w = u.matrix();
    let n = w.nrows();
    let a_part = HermitianMatrix::new((w + w.adjoint()).scale(0.5))?;
    let b_raw = (w - w.adjoint()).scale(0.5) * Complex64::new(0.0, -1.0);
    let b_part = HermitianMatrix::new(b_raw)?;
    let eig_a = hermitian_eigen(&a_part);
    let mut vectors = eig_a.vectors;

    // cluster nearly equal cosine eigenvalues; they lie in [-1, 1]. The
    // window is generous: near-degenerate cosines leave the A-eigenvectors
    // poorly determined (error ~ eps/gap), and the B projection below
    // resolves any cluster exactly because A and B commute.
    let cluster_tol = 1e-5;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig_a.values[end] - eig_a.values[end - 1]).abs() < cluster_tol {
            end += 1;
        }
        let k = end - start;
        if k > 1 {
            let vc = vectors.columns(start, k).clone_owned();
            let sub = vc.adjoint() * b_part.matrix() * &vc;
            let sub = HermitianMatrix::new((&sub + sub.adjoint()).scale(0.5))?;
            let eig_b = hermitian_eigen(&sub);
            let rotated = vc * eig_b.vectors;
            for j in 0..k {
                let mut col = rotated.column(j).clone_owned();
                fix_column_phase(&mut col);
                vectors.set_column(start + j, &col);
            }
        }
        start = end;
    }

    let mut eigenvalues = Vec::with_capacity(n);
    for j in 0..n {
        let v = vectors.column(j);
        let mu = (v.adjoint() * w * v)[(0, 0)];
        let modulus = mu.norm();
        if modulus == 0.0 {
            return Err(Error::Numeric(
                "unitary eigendecomposition produced a zero Rayleigh quotient".into(),
            ));
        }
        eigenvalues.push(mu / Complex64::new(modulus, 0.0));
    }

    let mut recon = CMat::zeros(n, n);
    for (lam, v) in eigenvalues.iter().zip(vectors.column_iter()) {
        let v = v.clone_owned();
        recon += (&v * v.adjoint()).scale_c(*lam);
    }
    let err = (recon - w).norm();
    if err > recon_tol {
        return Err(Error::Numeric(format!(
            "unitary eigendecomposition reconstruction error {err:.3e} (condition report: \
             dim {n}, min cosine-eigenvalue gap {:.3e})",
            min_gap(&eig_a.values)
        )));
    }
    Ok((eigenvalues, vectors))
}

fn min_gap(sorted: &[f64]) -> f64 {
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Principal eigenphase in (-pi, pi]; phases within `BRANCH_NUDGE` of the cut
/// collapse onto pi so repeated calls branch identically.
fn principal_phase(mu: Complex64) -> f64 {
    let mut phi = mu.arg(); // in (-pi, pi]
    if phi < -std::f64::consts::PI + BRANCH_NUDGE {
        phi += 2.0 * std::f64::consts::PI;
    }
    if (std::f64::consts::PI - phi).abs() < BRANCH_NUDGE {
        phi = std::f64::consts::PI;
    }
    phi
}

/// Principal n-th root of a unitary: eigenphases taken in (-pi, pi] and
/// divided by n. The result raised to the n-th power reproduces U.
pub fn unitary_fractional_power(u: &UnitaryMatrix, n: u32) -> Result<UnitaryMatrix> {
    assert!(n >= 1, "fractional power order must be >= 1");
    if n == 1 {
        return Ok(u.clone());
    }
    let (eigenvalues, vectors) = unitary_eigen(u)?;
    let dim = u.dim();
    let mut root = CMat::zeros(dim, dim);
    for (lam, v) in eigenvalues.iter().zip(vectors.column_iter()) {
        let phi = principal_phase(*lam);
        let v = v.clone_owned();
        root += (&v * v.adjoint()).scale_c(Complex64::from_polar(1.0, phi / n as f64));
    }
    UnitaryMatrix::new(root)
}

/// Hermitian generator G with U = exp(i G), eigenphases in (-pi, pi].
pub fn unitary_principal_log(u: &UnitaryMatrix) -> Result<HermitianMatrix> {
    unitary_principal_log_with_tol(u, 1e-10 * u.dim() as f64)
}

/// Principal log with a relaxed eigendecomposition bound; an O(delta)
/// reconstruction residual from a near-degenerate eigenvalue pair perturbs
/// the log by O(delta), which iterative refiners tolerate.
pub(crate) fn unitary_principal_log_with_tol(
    u: &UnitaryMatrix,
    recon_tol: f64,
) -> Result<HermitianMatrix> {
    let (eigenvalues, vectors) = unitary_eigen_with_tol(u, recon_tol)?;
    let dim = u.dim();
    let mut g = CMat::zeros(dim, dim);
    for (lam, v) in eigenvalues.iter().zip(vectors.column_iter()) {
        let phi = principal_phase(*lam);
        let v = v.clone_owned();
        g += (&v * v.adjoint()).scale(phi);
    }
    HermitianMatrix::new(g)
}

/// |trace(U'V)| / N: equals 1 iff U = e^{i alpha} V; global-phase invariant.
pub fn gate_fidelity(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    gate_fidelity_raw(u.matrix(), v.matrix())
}

pub fn gate_fidelity_raw(u: &CMat, v: &CMat) -> Result<f64> {
    if u.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "gate_fidelity: {} vs {}",
            u.nrows(),
            v.nrows()
        )));
    }
    let n = u.nrows() as f64;
    Ok(((u.adjoint() * v).trace().norm() / n).min(1.0))
}

/// Haar-random unitary: QR of a Ginibre matrix with the R-diagonal phases
/// folded back into Q.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryMatrix {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / Complex64::new(std::f64::consts::SQRT_2, 0.0)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let m = d.norm();
        let phase = if m > 0.0 {
            d / Complex64::new(m, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { inner: q }
}

/// Dense random Hermitian matrix with O(1) entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let h = (&g + g.adjoint()).scale(0.5);
    HermitianMatrix { inner: h }
}

/// A nondegenerate N-th root of the identity: conjugation of
/// diag(e^{2 pi i k / N}) by a supplied unitary.
pub fn root_of_identity(conjugator: &UnitaryMatrix) -> UnitaryMatrix {
    let n = conjugator.dim();
    let mut d = CMat::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
    }
    let m = conjugator.matrix();
    UnitaryMatrix {
        inner: m * d * m.adjoint(),
    }
}

trait ScaleC {
    fn scale_c(self, c: Complex64) -> CMat;
}

impl ScaleC for CMat {
    fn scale_c(mut self, c: Complex64) -> CMat {
        for z in self.iter_mut() {
            *z *= c;
        }
        self
    }
}
