//! Real equally-weighted states, their hypergraph-circuit realization,
//! and the truncated linear-combination circuit that superposes one
//! such state per candidate subset.
//!
//! A sign pattern sigma: {0,1}^n -> {+,-} determines the state with
//! amplitudes sigma(y)/sqrt(2^n). Its algebraic normal form over GF(2)
//! lists exactly the multi-controlled-Z gates (hyperedges) that build
//! the state from |+>^n.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate};

/// Number of distinct equally-weighted real states on n qubits, up to
/// global phase: half of the 2^(2^n) sign patterns.
pub fn universe_size(n: usize) -> Result<u128> {
    let dim = 1usize
        .checked_shl(n as u32)
        .filter(|d| *d <= 128)
        .ok_or_else(|| Error::InvalidArgument(format!("universe overflows u128 for n={n}")))?;
    Ok(1u128 << (dim - 1))
}

/// Moebius transform over GF(2): from the truth table f (true = minus
/// sign) to the set of ANF monomials, returned as variable bitmasks.
/// The empty monomial (mask 0) is a global sign flip.
pub fn signs_to_hyperedges(signs: &[bool]) -> Result<Vec<usize>> {
    let len = signs.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "truth table length {len} is not a power of two"
        )));
    }
    let n = len.trailing_zeros() as usize;
    let mut coeff: Vec<bool> = signs.to_vec();
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..len {
            if mask & bit != 0 {
                coeff[mask] ^= coeff[mask ^ bit];
            }
        }
    }
    Ok((0..len).filter(|&m| coeff[m]).collect())
}

/// Inverse of `signs_to_hyperedges`: expand ANF monomials back into the
/// truth table. Same butterfly, run over set membership.
pub fn hyperedges_to_signs(n: usize, edges: &[usize]) -> Result<Vec<bool>> {
    let len = 1usize << n;
    let mut table = vec![false; len];
    for &e in edges {
        if e >= len {
            return Err(Error::InvalidArgument(format!(
                "hyperedge mask {e:#x} uses variables beyond n={n}"
            )));
        }
        table[e] = true;
    }
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..len {
            if mask & bit != 0 {
                let low = table[mask ^ bit];
                table[mask] ^= low;
            }
        }
    }
    Ok(table)
}

/// Gates realizing the sign pattern on a register that is already in
/// |+>^n: one multi-controlled Z per hyperedge, each optionally gated on
/// extra conditions (used by the branch-selected combination circuit).
pub fn hyperedge_gates(
    qubits: &[usize],
    edges: &[usize],
    extra_conditions: &[(usize, bool)],
) -> Vec<Gate> {
    edges
        .iter()
        .map(|&edge| {
            let mut conditions: Vec<(usize, bool)> = extra_conditions.to_vec();
            for (i, &q) in qubits.iter().enumerate() {
                if edge >> i & 1 == 1 {
                    conditions.push((q, true));
                }
            }
            Gate::PhaseFlip { conditions }
        })
        .collect()
}

/// Full preparation circuit |0>^n -> the equally-weighted state with
/// the given sign pattern.
pub fn hypergraph_circuit(n: usize, signs: &[bool]) -> Result<Circuit> {
    if signs.len() != 1 << n {
        return Err(Error::InvalidArgument(format!(
            "expected {} signs, got {}",
            1usize << n,
            signs.len()
        )));
    }
    let mut circuit = Circuit::new(n);
    for q in 0..n {
        circuit.push(Gate::H(q));
    }
    let edges = signs_to_hyperedges(signs)?;
    for gate in hyperedge_gates(&(0..n).collect::<Vec<_>>(), &edges, &[]) {
        circuit.push(gate);
    }
    Ok(circuit)
}

/// Reference amplitudes of the equally-weighted state: sigma(y)/sqrt(2^n).
pub fn rew_amplitudes(signs: &[bool]) -> Vec<Complex64> {
    let norm = 1.0 / (signs.len() as f64).sqrt();
    signs
        .iter()
        .map(|&neg| Complex64::new(if neg { -norm } else { norm }, 0.0))
        .collect()
}

/// Sign pattern of the probe state for a node subset: minus exactly on
/// the members.
pub fn subset_signs(n: usize, members: &[usize]) -> Vec<bool> {
    let mut signs = vec![false; 1 << n];
    for &m in members {
        signs[m] = true;
    }
    signs
}

/// Binomial coefficient in u128, exact (numerator factors divided out
/// incrementally so every intermediate stays integral).
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
    }
    c
}

/// Lexicographic rank of a sorted k-subset of {0, .., n-1}.
pub fn subset_rank(n: usize, members: &[usize]) -> u128 {
    let k = members.len();
    let mut rank: u128 = 0;
    let mut prev = 0usize;
    for (i, &m) in members.iter().enumerate() {
        for v in prev..m {
            rank += binomial(n - 1 - v, k - 1 - i);
        }
        prev = m + 1;
    }
    rank
}

/// Inverse of `subset_rank`: the sorted k-subset at the given
/// lexicographic rank.
pub fn subset_unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut remaining = k;
    let mut next = 0usize;
    while remaining > 0 {
        let with_next = binomial(n - 1 - next, remaining - 1);
        if rank < with_next {
            out.push(next);
            remaining -= 1;
        } else {
            rank -= with_next;
        }
        next += 1;
    }
    out
}

/// How the probe-subset size relates to the candidate size k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// Probe size N/2 - k (or 2 when k = N/2): the true botnet makes a
    /// characteristic overlap value impossible, so observing it refutes
    /// a candidate outright.
    ZeroOverlap,
    /// Smaller probes: every subset stays observable, but disjoint ones
    /// are the least likely, so elimination is statistical.
    SmallOverlap,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ProbePlan {
    pub subset_size: usize,
    pub mode: OverlapMode,
}

/// Picks the probe-subset size. With no request, uses the
/// impossibility-based size N/2 - k, which needs even N; an explicit
/// smaller size switches to the statistical mode.
pub fn probe_plan(node_count: usize, k: usize, requested: Option<usize>) -> Result<ProbePlan> {
    if k == 0 || 2 * k > node_count {
        return Err(Error::InvalidArgument(format!(
            "candidate size k={k} must satisfy 1 <= k <= N/2 with N={node_count}"
        )));
    }
    let zero_size = if 2 * k == node_count { 2 } else { node_count / 2 - k };
    match requested {
        None => {
            if node_count % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "the impossibility probe size (N/2 - k) needs even N, got N={node_count}; \
                     request an explicit probe size instead"
                )));
            }
            Ok(ProbePlan { subset_size: zero_size, mode: OverlapMode::ZeroOverlap })
        }
        Some(s) => {
            if s == 0 {
                return Err(Error::InvalidArgument("probe size must be positive".into()));
            }
            if node_count % 2 == 0 && s == zero_size {
                return Ok(ProbePlan { subset_size: s, mode: OverlapMode::ZeroOverlap });
            }
            if node_count % 2 == 0 && s > node_count / 2 - k {
                return Err(Error::InvalidArgument(format!(
                    "probe size {s} exceeds N/2 - k = {}",
                    node_count / 2 - k
                )));
            }
            if node_count % 2 != 0 && 2 * (s + k) > node_count {
                return Err(Error::InvalidArgument(format!(
                    "probe size {s} too large: need k + size <= N/2"
                )));
            }
            Ok(ProbePlan { subset_size: s, mode: OverlapMode::SmallOverlap })
        }
    }
}

/// The branch-selected preparation: subset register in uniform
/// superposition, system driven to the probe state of the branch's
/// subset. Padding branches (rank >= M) leave the system at |+>^n.
pub struct BranchedPreparation {
    pub circuit: Circuit,
    /// Subset-register qubits (low bit first).
    pub register: Vec<usize>,
    pub branch_count: u128,
    pub register_width: usize,
}

/// Builds the combination circuit for all C(node_count, subset_size)
/// probe subsets. System qubits [0, n); register directly above unless
/// `register_base` lifts it higher (to leave room for other ancillas).
pub fn branched_preparation(
    n: usize,
    node_count: usize,
    subset_size: usize,
    register_base: Option<usize>,
) -> Result<BranchedPreparation> {
    let m = binomial(node_count, subset_size);
    let width = m.next_power_of_two().trailing_zeros() as usize;
    let width = width.max(1);
    if m > (1u128 << 40) {
        return Err(Error::InvalidArgument(format!(
            "{m} branches cannot be simulated explicitly"
        )));
    }
    let base = register_base.unwrap_or(n);
    if base < n {
        return Err(Error::InvalidArgument(
            "subset register would overlap the system".into(),
        ));
    }
    let register: Vec<usize> = (base..base + width).collect();

    let mut circuit = Circuit::new(base + width);
    for q in 0..n {
        circuit.push(Gate::H(q));
    }
    for &q in &register {
        circuit.push(Gate::H(q));
    }
    let sys: Vec<usize> = (0..n).collect();
    for rank in 0..m {
        let members = subset_unrank(node_count, subset_size, rank);
        let edges = signs_to_hyperedges(&subset_signs(n, &members))?;
        let branch: Vec<(usize, bool)> = register
            .iter()
            .enumerate()
            .map(|(i, &q)| (q, rank >> i & 1 == 1))
            .collect();
        for gate in hyperedge_gates(&sys, &edges, &branch) {
            circuit.push(gate);
        }
    }
    Ok(BranchedPreparation { circuit, register, branch_count: m, register_width: width })
}
