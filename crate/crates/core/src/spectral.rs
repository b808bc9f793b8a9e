//! Leading eigenvector of the modularity matrix, its sign readout, and
//! the state-preparation unitary that loads it onto qubits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ModularityMatrix, Partition};

/// Eigenvalues closer than this are treated as one degenerate level.
const DEGENERACY_GAP: f64 = 1e-9;
/// Amplitudes below this cannot be signed with confidence.
const SIGN_STABILITY: f64 = 1e-12;
/// Above this dimension the dense eigensolver gives way to iteration.
const DENSE_LIMIT: usize = 512;

/// Unit-norm leading eigenvector, zero-padded to the next power of two
/// and gauge-fixed so the majority sign is positive.
#[derive(Debug, Clone, Serialize)]
pub struct MaxVector {
    amplitudes: Vec<f64>,
    active: usize,
    n_qubits: usize,
    eigenvalue: Option<f64>,
    degenerate: bool,
}

impl MaxVector {
    /// Wraps a raw amplitude vector (for fixtures and perturbation
    /// studies): pads to 2^n, normalizes, and gauge-fixes.
    pub fn from_amplitudes(raw: &[f64]) -> Result<Self> {
        Self::build(raw, None, false)
    }

    fn build(raw: &[f64], eigenvalue: Option<f64>, degenerate: bool) -> Result<Self> {
        let active = raw.len();
        if active < 2 {
            return Err(Error::InvalidArgument("need at least two amplitudes".into()));
        }
        let n_qubits = active.next_power_of_two().trailing_zeros() as usize;
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return Err(Error::InvalidArgument("amplitude vector is zero".into()));
        }
        let mut amplitudes = vec![0.0; 1 << n_qubits];
        for (i, &x) in raw.iter().enumerate() {
            amplitudes[i] = x / norm;
        }
        gauge_fix(&mut amplitudes[..active]);
        Ok(MaxVector { amplitudes, active, n_qubits, eigenvalue, degenerate })
    }

    /// Padded amplitudes, length 2^n. Entries at and past `active()` are
    /// exactly zero.
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Number of real nodes (unpadded dimension).
    pub fn active(&self) -> usize {
        self.active
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn eigenvalue(&self) -> Option<f64> {
        self.eigenvalue
    }

    /// Set when the top eigenvalue was degenerate within 1e-9; the
    /// returned vector is then a deterministic representative.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Smallest nonzero |amplitude| over active entries; drives the sign
    /// polynomial's domain edge downstream.
    pub fn min_active_abs(&self) -> f64 {
        self.amplitudes[..self.active]
            .iter()
            .map(|x| x.abs())
            .filter(|&a| a > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Returns a copy with seeded Gaussian noise of scale `eps` on the
    /// active entries, renormalized and re-gauged. Padding stays zero.
    pub fn perturbed(&self, eps: f64, seed: u64) -> Result<MaxVector> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let raw: Vec<f64> = self.amplitudes[..self.active]
            .iter()
            .map(|&x| {
                let g: f64 = StandardNormal.sample(&mut rng);
                x + eps * g
            })
            .collect();
        Self::build(&raw, None, false)
    }
}

/// Majority sign positive; on an exact tie, entry 0 made non-negative.
fn gauge_fix(active: &mut [f64]) {
    let pos = active.iter().filter(|&&x| x > 0.0).count();
    let neg = active.iter().filter(|&&x| x < 0.0).count();
    let flip = match pos.cmp(&neg) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => active[0] < 0.0,
    };
    if flip {
        for x in active.iter_mut() {
            *x = -*x;
        }
    }
}

/// Largest-eigenvalue eigenvector of the modularity matrix. Dense
/// symmetric solve up to 512 nodes, shifted power iteration beyond.
/// A degenerate top level is flagged and broken deterministically by
/// taking the lexicographically largest gauge-fixed candidate.
pub fn max_eigenvector(b: &ModularityMatrix) -> Result<MaxVector> {
    let n = b.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("matrix must be at least 2x2".into()));
    }
    if n <= DENSE_LIMIT {
        let eig = nalgebra::SymmetricEigen::new(b.matrix().clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        let top = eig.eigenvalues[order[0]];
        let level: Vec<usize> = order
            .iter()
            .copied()
            .take_while(|&i| (eig.eigenvalues[i] - top).abs() <= DEGENERACY_GAP)
            .collect();
        let degenerate = level.len() > 1;
        let mut best: Option<Vec<f64>> = None;
        for &col in &level {
            let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            gauge_fix(&mut v);
            let better = match &best {
                None => true,
                Some(b) => lex_greater(&v, b),
            };
            if better {
                best = Some(v);
            }
        }
        MaxVector::build(&best.unwrap(), Some(top), degenerate)
    } else {
        let (value, vector) = power_iteration(b.matrix());
        MaxVector::build(vector.as_slice(), Some(value), false)
    }
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return x > y;
        }
    }
    false
}

/// Shifted power iteration for the algebraically largest eigenpair.
/// The shift makes the spectrum non-negative so the dominant mode of
/// B + cI is the algebraic top of B; the all-ones kernel direction is
/// deflated away each step since it rides at exactly c.
fn power_iteration(b: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = b.nrows();
    let shift: f64 = (0..n)
        .map(|i| (0..n).map(|j| b[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x = DVector::from_fn(n, |i, _| ((i + 1) as f64).sin());
    deflate_ones(&mut x);
    x /= x.norm();
    let mut value = 0.0;
    for _ in 0..50_000 {
        let mut y = b * &x + &x * shift;
        deflate_ones(&mut y);
        let norm = y.norm();
        if norm < 1e-300 {
            break;
        }
        y /= norm;
        value = y.dot(&(b * &y));
        let residual = (b * &y - &y * value).norm();
        x = y;
        if residual < 1e-12 {
            break;
        }
    }
    (value, x)
}

fn deflate_ones(x: &mut DVector<f64>) {
    let n = x.len();
    let mean = x.sum() / n as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Signs the active amplitudes: strictly positive is +1, everything
/// else (including exact zero) is -1. Amplitudes under 1e-12 are
/// reported as unstable since noise could flip them.
pub fn classical_sign_partition(v: &MaxVector) -> Result<Partition> {
    let active = &v.amplitudes()[..v.active()];
    let signs: Vec<i8> = active.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect();
    let unstable: Vec<usize> = (0..active.len())
        .filter(|&i| active[i].abs() < SIGN_STABILITY)
        .collect();
    Partition::from_signs(signs, unstable)
}

/// Real orthogonal completion of a unit vector to a full basis: a
/// Householder reflection whose first column is the vector. Loading
/// |0..0> through it prepares the padded eigenvector exactly.
#[derive(Debug, Clone)]
pub struct PreparationUnitary {
    matrix: DMatrix<f64>,
    n_qubits: usize,
}

impl PreparationUnitary {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.matrix.map(|x| Complex64::new(x, 0.0))
    }
}

pub fn complete_unitary(v: &MaxVector) -> Result<PreparationUnitary> {
    let dim = v.amplitudes().len();
    let norm: f64 = v.amplitudes().iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "vector norm {norm} is not 1 within 1e-10"
        )));
    }
    let mut w = DVector::from_column_slice(v.amplitudes());
    w[0] -= 1.0;
    let wn = w.norm();
    let matrix = if wn < 1e-14 {
        DMatrix::identity(dim, dim)
    } else {
        let w = w / wn;
        DMatrix::identity(dim, dim) - (&w * w.transpose()) * 2.0
    };
    Ok(PreparationUnitary { matrix, n_qubits: v.n_qubits() })
}
