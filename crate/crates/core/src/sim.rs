//! Dense statevector simulator.
//!
//! Qubit i is bit i of the basis index (little-endian), so register
//! values read directly as integers. Gates carry explicit condition
//! lists of (qubit, required bit) pairs, which covers closed and open
//! controls uniformly; an empty list means unconditioned.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Default ceiling on simulated qubits (1 GiB of amplitudes); the
/// DETEQT_MAX_QUBITS environment variable overrides it.
const DEFAULT_MAX_QUBITS: usize = 26;

pub fn max_qubits() -> usize {
    std::env::var("DETEQT_MAX_QUBITS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone)]
pub enum Gate {
    H(usize),
    X(usize),
    /// diag(e^{-i a/2}, e^{+i a/2}) on one qubit.
    Rz { target: usize, angle: f64 },
    /// Phase -1 where every (qubit, bit) condition holds. With a single
    /// true condition this is Z; with several it is a multi-controlled Z
    /// whose open controls are written as `false` bits.
    PhaseFlip { conditions: Vec<(usize, bool)> },
    /// Phase e^{i angle} where every condition holds.
    Phase { conditions: Vec<(usize, bool)>, angle: f64 },
    /// X on `target` where every condition holds.
    ControlledX { target: usize, conditions: Vec<(usize, bool)> },
    /// Dense unitary on `targets` (targets[0] is the least significant
    /// row bit), applied where every condition holds.
    Unitary {
        targets: Vec<usize>,
        conditions: Vec<(usize, bool)>,
        matrix: Arc<DMatrix<Complex64>>,
    },
    /// Global phase e^{i angle}; bookkeeping so assembled blocks match
    /// their defining polynomials exactly.
    GlobalPhase(f64),
}

impl Gate {
    pub fn z(target: usize) -> Gate {
        Gate::PhaseFlip { conditions: vec![(target, true)] }
    }

    pub fn cz(a: usize, b: usize) -> Gate {
        Gate::PhaseFlip { conditions: vec![(a, true), (b, true)] }
    }

    pub fn unitary(targets: Vec<usize>, matrix: DMatrix<Complex64>) -> Gate {
        Gate::Unitary { targets, conditions: Vec::new(), matrix: Arc::new(matrix) }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::H(t) => Gate::H(*t),
            Gate::X(t) => Gate::X(*t),
            Gate::Rz { target, angle } => Gate::Rz { target: *target, angle: -angle },
            Gate::PhaseFlip { conditions } => {
                Gate::PhaseFlip { conditions: conditions.clone() }
            }
            Gate::Phase { conditions, angle } => {
                Gate::Phase { conditions: conditions.clone(), angle: -angle }
            }
            Gate::ControlledX { target, conditions } => Gate::ControlledX {
                target: *target,
                conditions: conditions.clone(),
            },
            Gate::Unitary { targets, conditions, matrix } => Gate::Unitary {
                targets: targets.clone(),
                conditions: conditions.clone(),
                matrix: Arc::new(matrix.adjoint()),
            },
            Gate::GlobalPhase(a) => Gate::GlobalPhase(-a),
        }
    }

    fn max_qubit(&self) -> Option<usize> {
        let cond_max = |conds: &Vec<(usize, bool)>| conds.iter().map(|c| c.0).max();
        match self {
            Gate::H(t) | Gate::X(t) => Some(*t),
            Gate::Rz { target, .. } => Some(*target),
            Gate::PhaseFlip { conditions } | Gate::Phase { conditions, .. } => {
                cond_max(conditions)
            }
            Gate::ControlledX { target, conditions } => {
                Some((*target).max(cond_max(conditions).unwrap_or(0)))
            }
            Gate::Unitary { targets, conditions, .. } => targets
                .iter()
                .copied()
                .max()
                .map(|t| t.max(cond_max(conditions).unwrap_or(0))),
            Gate::GlobalPhase(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Circuit {
    pub qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize) -> Circuit {
        Circuit { qubits, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) {
        self.qubits = self.qubits.max(gate.max_qubit().map_or(0, |q| q + 1));
        self.gates.push(gate);
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.qubits = self.qubits.max(other.qubits);
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            qubits: self.qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl StateVector {
    /// |0...0> on `qubits` qubits. Fails above the memory cap.
    pub fn zero(qubits: usize) -> Result<StateVector> {
        let cap = max_qubits();
        if qubits > cap {
            return Err(Error::QubitCap { requested: qubits, cap });
        }
        let mut amps = vec![Complex64::ZERO; 1usize << qubits];
        amps[0] = Complex64::ONE;
        Ok(StateVector { amps, qubits })
    }

    pub fn from_amplitudes(qubits: usize, amps: Vec<Complex64>) -> Result<StateVector> {
        if amps.len() != 1 << qubits {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                1usize << qubits,
                amps.len()
            )));
        }
        Ok(StateVector { amps, qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

fn condition_mask(conditions: &[(usize, bool)]) -> Result<(usize, usize)> {
    let mut mask = 0usize;
    let mut value = 0usize;
    for &(q, bit) in conditions {
        let b = 1usize << q;
        if mask & b != 0 {
            return Err(Error::InvalidArgument(format!(
                "qubit {q} appears twice in one condition list"
            )));
        }
        mask |= b;
        if bit {
            value |= b;
        }
    }
    Ok((mask, value))
}

fn apply_single(amps: &mut [Complex64], target: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << target;
    let n = amps.len();
    let mut base = 0usize;
    while base < n {
        for i in base..base + bit {
            let a = amps[i];
            let b = amps[i | bit];
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i | bit] = m[1][0] * a + m[1][1] * b;
        }
        base += bit << 1;
    }
}

pub fn apply_gate(state: &mut StateVector, gate: &Gate) -> Result<()> {
    if let Some(q) = gate.max_qubit() {
        if q >= state.qubits {
            return Err(Error::InvalidArgument(format!(
                "gate touches qubit {q} but the state has {} qubits",
                state.qubits
            )));
        }
    }
    let amps = &mut state.amps;
    match gate {
        Gate::H(t) => {
            let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            apply_single(amps, *t, [[s, s], [s, -s]]);
        }
        Gate::X(t) => {
            let bit = 1usize << t;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    amps.swap(i, i | bit);
                }
            }
        }
        Gate::Rz { target, angle } => {
            let bit = 1usize << target;
            let lo = Complex64::from_polar(1.0, -angle / 2.0);
            let hi = Complex64::from_polar(1.0, angle / 2.0);
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= if i & bit == 0 { lo } else { hi };
            }
        }
        Gate::PhaseFlip { conditions } => {
            let (mask, value) = condition_mask(conditions)?;
            for (i, a) in amps.iter_mut().enumerate() {
                if i & mask == value {
                    *a = -*a;
                }
            }
        }
        Gate::Phase { conditions, angle } => {
            let (mask, value) = condition_mask(conditions)?;
            let phase = Complex64::from_polar(1.0, *angle);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & mask == value {
                    *a *= phase;
                }
            }
        }
        Gate::ControlledX { target, conditions } => {
            let (mask, value) = condition_mask(conditions)?;
            let bit = 1usize << target;
            if mask & bit != 0 {
                return Err(Error::InvalidArgument(
                    "controlled-X target cannot also be a condition".into(),
                ));
            }
            for i in 0..amps.len() {
                if i & bit == 0 && i & mask == value {
                    amps.swap(i, i | bit);
                }
            }
        }
        Gate::Unitary { targets, conditions, matrix } => {
            let t = targets.len();
            let dim = 1usize << t;
            if matrix.nrows() != dim || matrix.ncols() != dim {
                return Err(Error::InvalidArgument(format!(
                    "matrix is {}x{} but {t} targets need {dim}x{dim}",
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            check_unitary(matrix)?;
            let (cmask, cvalue) = condition_mask(conditions)?;
            let mut tmask = 0usize;
            let mut spread = vec![0usize; dim];
            for (b, &q) in targets.iter().enumerate() {
                let bit = 1usize << q;
                if tmask & bit != 0 || cmask & bit != 0 {
                    return Err(Error::InvalidArgument(
                        "unitary targets overlap each other or the conditions".into(),
                    ));
                }
                tmask |= bit;
                for (j, s) in spread.iter_mut().enumerate() {
                    if j >> b & 1 == 1 {
                        *s |= bit;
                    }
                }
            }
            let mut sub = vec![Complex64::ZERO; dim];
            for i in 0..amps.len() {
                if i & tmask != 0 || i & cmask != cvalue {
                    continue;
                }
                for (j, s) in spread.iter().enumerate() {
                    sub[j] = amps[i | s];
                }
                for (r, s) in spread.iter().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (c, x) in sub.iter().enumerate() {
                        acc += matrix[(r, c)] * x;
                    }
                    amps[i | s] = acc;
                }
            }
        }
        Gate::GlobalPhase(a) => {
            let phase = Complex64::from_polar(1.0, *a);
            for amp in amps.iter_mut() {
                *amp *= phase;
            }
        }
    }
    Ok(())
}

fn check_unitary(m: &DMatrix<Complex64>) -> Result<()> {
    let gram = m.adjoint() * m;
    let mut deviation = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
            deviation = deviation.max((gram[(i, j)] - expect).norm());
        }
    }
    if deviation > 1e-8 {
        return Err(Error::NonUnitary { deviation });
    }
    Ok(())
}

pub fn apply_circuit(state: &mut StateVector, circuit: &Circuit) -> Result<()> {
    if circuit.qubits > state.qubits {
        return Err(Error::InvalidArgument(format!(
            "circuit needs {} qubits, state has {}",
            circuit.qubits, state.qubits
        )));
    }
    for gate in &circuit.gates {
        apply_gate(state, gate)?;
    }
    Ok(())
}

/// Projects the listed qubits onto |0>, renormalizes, and returns the
/// success probability (the pre-normalization retained mass).
pub fn project_zero(state: &mut StateVector, register: &[usize]) -> Result<f64> {
    let mut mask = 0usize;
    for &q in register {
        if q >= state.qubits {
            return Err(Error::InvalidArgument(format!("qubit {q} out of range")));
        }
        mask |= 1usize << q;
    }
    let mut kept = 0.0;
    for (i, a) in state.amps.iter().enumerate() {
        if i & mask == 0 {
            kept += a.norm_sqr();
        }
    }
    if kept < 1e-14 {
        return Err(Error::ProjectionDepleted { mass: kept });
    }
    let scale = 1.0 / kept.sqrt();
    for (i, a) in state.amps.iter_mut().enumerate() {
        if i & mask == 0 {
            *a *= scale;
        } else {
            *a = Complex64::ZERO;
        }
    }
    Ok(kept)
}

/// Born-rule marginal over a register: p[x] with bit j of x read from
/// qubit register[j].
pub fn marginal_register(state: &StateVector, register: &[usize]) -> Result<Vec<f64>> {
    let r = register.len();
    if r > 30 {
        return Err(Error::InvalidArgument("register too wide to tabulate".into()));
    }
    for &q in register {
        if q >= state.qubits {
            return Err(Error::InvalidArgument(format!("qubit {q} out of range")));
        }
    }
    let mut probs = vec![0.0f64; 1 << r];
    for (i, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut x = 0usize;
        for (j, &q) in register.iter().enumerate() {
            x |= ((i >> q) & 1) << j;
        }
        probs[x] += p;
    }
    Ok(probs)
}

/// Draws `shots` measurement outcomes of the register in one pass,
/// deterministic for a fixed seed.
pub fn sample_register(
    state: &StateVector,
    register: &[usize],
    shots: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let probs = marginal_register(state, register)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dist = CumulativeSampler::new(&probs)?;
    Ok((0..shots).map(|_| dist.draw(&mut rng)).collect())
}

/// Inverse-CDF sampler over a fixed categorical distribution.
pub struct CumulativeSampler {
    cumulative: Vec<f64>,
}

impl CumulativeSampler {
    pub fn new(probs: &[f64]) -> Result<CumulativeSampler> {
        let total: f64 = probs.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidArgument("distribution has no mass".into()));
        }
        if probs.iter().any(|&p| p < -1e-15) {
            return Err(Error::InvalidArgument("negative probability".into()));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            acc += p.max(0.0) / total;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(CumulativeSampler { cumulative })
    }

    pub fn draw(&self, rng: &mut ChaCha12Rng) -> u64 {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u) as u64
    }
}
