//! Controllability of a two-Hamiltonian switched system: brute-force closure
//! of the Lie algebra generated by {iH_a, iH_b}, and the cheaper sufficient
//! conditions of Kac (no zero cross-basis elements; distinct eigenvalues and
//! pairwise eigenvalue differences).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMat, HermitianMatrix};

/// Largest dimension for which the brute-force closure is attempted.
pub const MAX_CLOSURE_DIM: usize = 12;

/// Gram-Schmidt residual threshold for admitting a new Lie-algebra direction.
const CLOSURE_RESIDUAL_TOL: f64 = 1e-8;

/// The two Hermitian generators the control alternates between.
#[derive(Debug, Clone)]
pub struct HamiltonianPair {
    h_a: HermitianMatrix,
    h_b: HermitianMatrix,
}

impl HamiltonianPair {
    pub fn new(h_a: HermitianMatrix, h_b: HermitianMatrix) -> Result<Self> {
        if h_a.dim() != h_b.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian pair: {} vs {}",
                h_a.dim(),
                h_b.dim()
            )));
        }
        if h_a.dim() < 2 {
            return Err(Error::Config("control needs dimension >= 2".into()));
        }
        Ok(Self { h_a, h_b })
    }

    pub fn dim(&self) -> usize {
        self.h_a.dim()
    }

    pub fn h_a(&self) -> &HermitianMatrix {
        &self.h_a
    }

    pub fn h_b(&self) -> &HermitianMatrix {
        &self.h_b
    }

    pub fn swapped(&self) -> Self {
        Self {
            h_a: self.h_b.clone(),
            h_b: self.h_a.clone(),
        }
    }
}

/// Outcome of the controllability checks.
#[derive(Debug, Clone)]
pub struct ControllabilityReport {
    /// Real dimension of the generated Lie algebra; `None` when the closure
    /// was skipped (N > MAX_CLOSURE_DIM).
    pub lie_rank: Option<usize>,
    pub fully_controllable: bool,
    pub kac_offdiag_ok: bool,
    pub kac_spectrum_ok: bool,
    /// Per-condition diagnostics: which element vanished, which gap collided.
    pub details: Vec<String>,
}

/// Options for the Kac tests.
#[derive(Debug, Clone)]
pub struct KacOptions {
    /// Apply the "no zero elements" test to every entry of the cross-basis
    /// representation (the literal reading); `false` restricts it to
    /// off-diagonal entries.
    pub include_diagonal: bool,
}

impl Default for KacOptions {
    fn default() -> Self {
        Self {
            include_diagonal: true,
        }
    }
}

fn re_trace_inner(x: &CMat, y: &CMat) -> f64 {
    (x.adjoint() * y).trace().re
}

fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

/// Orthogonalize `cand` against the orthonormal `basis` (two passes) and
/// return the residual.
fn orthogonalize(basis: &[CMat], mut cand: CMat) -> CMat {
    for _ in 0..2 {
        for b in basis {
            let coeff = re_trace_inner(b, &cand);
            cand -= b.scale(coeff);
        }
    }
    cand
}

/// Real dimension of the Lie algebra generated by {iH_a, iH_b} together with
/// the global-phase direction iI, by repeated commutation with the generators
/// and Gram-Schmidt under Re trace(X'Y). The phase direction is physically
/// unobservable and always counted, so traceless generator pairs filling
/// su(N) still report the full rank N^2.
pub fn lie_closure_rank(pair: &HamiltonianPair) -> usize {
    let n = pair.dim();
    assert!(
        n <= MAX_CLOSURE_DIM,
        "lie_closure_rank cost guard: N = {n} exceeds {MAX_CLOSURE_DIM}"
    );
    let full = n * n;
    let i = Complex64::new(0.0, 1.0);
    let gens: Vec<CMat> = [pair.h_a(), pair.h_b()]
        .iter()
        .map(|h| {
            let m = h.matrix() * i;
            let norm = m.norm();
            if norm > 0.0 {
                m.scale(1.0 / norm)
            } else {
                m
            }
        })
        .collect();

    let mut basis: Vec<CMat> = Vec::new();
    let phase_dir = crate::linalg::identity(n).scale(1.0 / (n as f64).sqrt()) * i;
    for g in gens.iter().chain(std::iter::once(&phase_dir)) {
        let res = orthogonalize(&basis, g.clone());
        let norm = res.norm();
        if norm > CLOSURE_RESIDUAL_TOL {
            basis.push(res.scale(1.0 / norm));
        }
    }

    loop {
        if basis.len() >= full {
            break;
        }
        let snapshot = basis.len();
        for idx in 0..snapshot {
            for g in &gens {
                let cand = commutator(&basis[idx], g);
                let res = orthogonalize(&basis, cand);
                let norm = res.norm();
                if norm > CLOSURE_RESIDUAL_TOL {
                    basis.push(res.scale(1.0 / norm));
                    if basis.len() >= full {
                        break;
                    }
                }
            }
            if basis.len() >= full {
                break;
            }
        }
        if basis.len() == snapshot {
            break;
        }
    }
    basis.len()
}

/// Kac sufficient conditions plus (for small N) the brute-force rank.
pub fn kac_check(pair: &HamiltonianPair) -> ControllabilityReport {
    kac_check_with(pair, &KacOptions::default())
}

pub fn kac_check_with(pair: &HamiltonianPair, opts: &KacOptions) -> ControllabilityReport {
    let n = pair.dim();
    let mut details = Vec::new();

    let offdiag_ab = cross_basis_nonzero(pair.h_a(), pair.h_b(), "H_b", opts, &mut details);
    let offdiag_ba = cross_basis_nonzero(pair.h_b(), pair.h_a(), "H_a", opts, &mut details);
    let kac_offdiag_ok = offdiag_ab && offdiag_ba;

    let spec_a = spectrum_nondegenerate(pair.h_a(), "H_a", &mut details);
    let spec_b = spectrum_nondegenerate(pair.h_b(), "H_b", &mut details);
    let kac_spectrum_ok = spec_a && spec_b;

    let lie_rank = if n <= MAX_CLOSURE_DIM {
        Some(lie_closure_rank(pair))
    } else {
        details.push(format!(
            "lie closure skipped: N = {n} exceeds {MAX_CLOSURE_DIM}"
        ));
        None
    };

    let fully_controllable = match lie_rank {
        Some(rank) => rank == n * n,
        None => kac_offdiag_ok && kac_spectrum_ok,
    };

    // Kac positivity is a sufficient condition for full controllability.
    if let Some(rank) = lie_rank {
        assert!(
            !(kac_offdiag_ok && kac_spectrum_ok) || rank == n * n,
            "Kac conditions hold but closure rank is {rank} < {}",
            n * n
        );
    }

    ControllabilityReport {
        lie_rank,
        fully_controllable,
        kac_offdiag_ok,
        kac_spectrum_ok,
        details,
    }
}

/// True iff every tested entry of `other` expressed in the eigenbasis of
/// `basis_of` exceeds the scale-invariant zero tolerance.
fn cross_basis_nonzero(
    basis_of: &HermitianMatrix,
    other: &HermitianMatrix,
    other_name: &str,
    opts: &KacOptions,
    details: &mut Vec<String>,
) -> bool {
    let n = basis_of.dim();
    let eig = hermitian_eigen(basis_of);
    let rep = eig.vectors.adjoint() * other.matrix() * &eig.vectors;
    let tol_zero = 1e-10 * other.norm() / n as f64;
    let mut ok = true;
    for i in 0..n {
        for j in 0..n {
            if i == j && !opts.include_diagonal {
                continue;
            }
            let m = rep[(i, j)].norm();
            if m <= tol_zero {
                ok = false;
                details.push(format!(
                    "{other_name} in the other eigenbasis has |entry({i},{j})| = {m:.3e} <= {tol_zero:.3e}"
                ));
            }
        }
    }
    ok
}

/// True iff all eigenvalues are pairwise distinct and all pairwise
/// differences are pairwise distinct, with separations above the
/// scale-invariant gap tolerance.
fn spectrum_nondegenerate(h: &HermitianMatrix, name: &str, details: &mut Vec<String>) -> bool {
    let eig = hermitian_eigen(h);
    let vals = &eig.values;
    let n = vals.len();
    let range = vals[n - 1] - vals[0];
    let tol_gap = 1e-8 * range;
    let mut ok = true;
    if range <= 0.0 {
        details.push(format!("{name} spectrum is a single point"));
        return false;
    }
    for w in vals.windows(2) {
        if w[1] - w[0] <= tol_gap {
            ok = false;
            details.push(format!(
                "{name} eigenvalue gap {:.3e} below tolerance {:.3e}",
                w[1] - w[0],
                tol_gap
            ));
        }
    }
    let mut diffs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push((vals[j] - vals[i], i, j));
        }
    }
    diffs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in diffs.windows(2) {
        if w[1].0 - w[0].0 <= tol_gap {
            ok = false;
            details.push(format!(
                "{name} eigenvalue differences ({},{}) and ({},{}) collide: {:.3e} vs {:.3e}",
                w[0].1, w[0].2, w[1].1, w[1].2, w[0].0, w[1].0
            ));
        }
    }
    ok
}
