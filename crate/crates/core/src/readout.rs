//! Readout stage: project the branched preparation onto the signed
//! spectral state, classify the per-branch overlaps, and eliminate
//! candidate subsets until one survives.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{binomial, subset_unrank, BranchedPreparation, OverlapMode, ProbePlan};
use crate::sim::{
    apply_circuit, marginal_register, project_zero, Circuit, CumulativeSampler, Gate,
    StateVector,
};
use crate::qsvt::QsvtCircuit;

/// |<candidate | probe>| for the 1/sqrt(N)-supported signed candidate
/// vector against the full equally-weighted probe state:
/// |N - 2d| / sqrt(N 2^n) with d the symmetric-difference size.
pub fn overlap(node_count: usize, n_qubits: usize, candidate: u128, probe: u128) -> f64 {
    let k = candidate.count_ones() as i64;
    let kl = probe.count_ones() as i64;
    let j = (candidate & probe).count_ones() as i64;
    let d = k + kl - 2 * j;
    let numerator = (node_count as i64 - 2 * d).abs() as f64;
    numerator / ((node_count as f64) * (1u64 << n_qubits) as f64).sqrt()
}

/// The disjoint-subsets overlap level: |N - 2k - 2 k_lcu| / sqrt(N 2^n).
pub fn threshold(node_count: usize, n_qubits: usize, k: usize, subset_size: usize) -> f64 {
    let numerator = (node_count as i64 - 2 * k as i64 - 2 * subset_size as i64).abs() as f64;
    numerator / ((node_count as f64) * (1u64 << n_qubits) as f64).sqrt()
}

/// All size-k node subsets as bitmasks (ascending mask value).
pub fn enumerate_candidates(node_count: usize, sizes: &[usize]) -> Result<Vec<u128>> {
    if node_count > 127 {
        return Err(Error::InvalidArgument(format!(
            "{node_count} nodes exceed the 127-node mask limit"
        )));
    }
    let mut out = Vec::new();
    for &k in sizes {
        if k == 0 || k > node_count {
            return Err(Error::InvalidArgument(format!(
                "candidate size {k} invalid for {node_count} nodes"
            )));
        }
        let limit = 1u128 << node_count;
        let mut c: u128 = (1u128 << k) - 1;
        while c < limit {
            out.push(c);
            // Gosper's hack: next mask with the same popcount.
            let lo = c & c.wrapping_neg();
            let lifted = c + lo;
            c = lifted | (((c ^ lifted) / lo) >> 2);
        }
    }
    Ok(out)
}

/// Classification tables: which probe draws refute which candidates.
/// The refuting condition reduces to an integer intersection test, so
/// no per-pair floating data is stored; rows are materialized only to
/// verify identifiability on small instances.
#[derive(Debug, Clone)]
pub struct OverlapTables {
    pub node_count: usize,
    pub n_qubits: usize,
    pub k: usize,
    pub plan: ProbePlan,
    pub c_th: f64,
    /// |N - 2k - 2 k_lcu|, the integer form of the threshold.
    pub integer_threshold: u32,
    /// A probe refutes a candidate iff their intersection has exactly
    /// this size (0, or 1 in the k = N/2 regime).
    pub elimination_overlap: u32,
    pub candidates: Arc<Vec<u128>>,
    /// k = N/2: complements share a refutation signature and are
    /// reported as one equivalence class.
    pub complement_classes: bool,
}

impl OverlapTables {
    /// Integer-form membership test for the refutation set of `candidate`.
    pub fn refutes(&self, candidate: u128, probe: u128) -> bool {
        (candidate & probe).count_ones() == self.elimination_overlap
    }

    pub fn branch_count(&self) -> u128 {
        binomial(self.node_count, self.plan.subset_size)
    }

    pub fn register_width(&self) -> usize {
        register_width(self.branch_count())
    }
}

pub fn register_width(branches: u128) -> usize {
    (128 - (branches.max(2) - 1).leading_zeros()) as usize
}

/// Builds the classification tables and verifies that no two candidates
/// share a refutation signature (complement pairs at k = N/2 excepted,
/// since no probe can tell a split from its mirror).
pub fn build_tables(
    node_count: usize,
    n_qubits: usize,
    k: usize,
    extend_range: bool,
    plan: ProbePlan,
) -> Result<OverlapTables> {
    if node_count > (1 << n_qubits) {
        return Err(Error::InvalidArgument(format!(
            "{node_count} nodes do not fit in {n_qubits} qubits"
        )));
    }
    let at_half = 2 * k == node_count;
    let mut sizes = vec![k];
    if extend_range {
        if plan.mode == OverlapMode::ZeroOverlap {
            return Err(Error::InvalidArgument(
                "the k-range extension needs the statistical mode: candidates of \
                 off-by-one size have empty refutation sets under the impossibility rule"
                    .into(),
            ));
        }
        if k > 1 {
            sizes.insert(0, k - 1);
        }
        if 2 * (k + 1) <= node_count {
            sizes.push(k + 1);
        }
    }
    let candidates = Arc::new(enumerate_candidates(node_count, &sizes)?);
    let elimination_overlap = if plan.mode == OverlapMode::ZeroOverlap && at_half { 1 } else { 0 };

    let tables = OverlapTables {
        node_count,
        n_qubits,
        k,
        plan,
        c_th: threshold(node_count, n_qubits, k, plan.subset_size),
        integer_threshold: (node_count as i64 - 2 * k as i64 - 2 * plan.subset_size as i64)
            .unsigned_abs() as u32,
        candidates,
        elimination_overlap,
        complement_classes: at_half && plan.mode == OverlapMode::ZeroOverlap,
    };
    verify_identifiability(&tables)?;
    Ok(tables)
}

/// Exhaustive signature-collision check when the table is small enough
/// to materialize. Larger instances rely on the structural argument:
/// for k < N/2 a probe fitting beside one candidate while touching the
/// other always exists, so distinct candidates get distinct rows.
fn verify_identifiability(tables: &OverlapTables) -> Result<()> {
    let branches = tables.branch_count();
    let cells = tables.candidates.len() as u128 * branches;
    if cells > 1 << 24 {
        return Ok(());
    }
    let m = branches as usize;
    let words = m.div_ceil(64);
    let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let full = (1u128 << tables.node_count) - 1;
    for (rank, &candidate) in tables.candidates.iter().enumerate() {
        let mut row = vec![0u64; words];
        for x in 0..m {
            let members = subset_unrank(tables.node_count, tables.plan.subset_size, x as u128);
            let probe = members.iter().fold(0u128, |acc, &v| acc | 1 << v);
            if tables.refutes(candidate, probe) {
                row[x / 64] |= 1 << (x % 64);
            }
        }
        if let Some(&other) = seen.get(&row) {
            let pair_ok = tables.complement_classes
                && tables.candidates[other] == full ^ candidate;
            if !pair_ok {
                return Err(Error::Identifiability {
                    first: format_members(tables.candidates[other]),
                    second: format_members(candidate),
                });
            }
        } else {
            seen.insert(row, rank);
        }
    }
    Ok(())
}

fn format_members(mask: u128) -> String {
    let members: Vec<String> = (0..128)
        .filter(|&i| mask >> i & 1 == 1)
        .map(|i| i.to_string())
        .collect();
    format!("{{{}}}", members.join(","))
}

/// The signed spectral state for a node subset: -1/sqrt(N) on members,
/// +1/sqrt(N) on other nodes, zero on padding.
pub fn sign_vector(node_count: usize, botnet: u128, n_qubits: usize) -> Vec<Complex64> {
    let norm = 1.0 / (node_count as f64).sqrt();
    (0..1usize << n_qubits)
        .map(|y| {
            if y >= node_count {
                Complex64::ZERO
            } else if botnet >> y & 1 == 1 {
                Complex64::new(-norm, 0.0)
            } else {
                Complex64::new(norm, 0.0)
            }
        })
        .collect()
}

/// The projection stage: inverse transform, basis change, a one-ancilla
/// zero-state reflection on every transform qubit, and the transform
/// again. Post-selecting all `ancillas` at |0> applies the rank-one
/// projector onto the transform's output state.
#[derive(Debug, Clone)]
pub struct ProjectionCircuit {
    pub circuit: Circuit,
    pub n_sys: usize,
    pub ancillas: Vec<usize>,
}

pub fn build_projection_circuit(qsvt: &QsvtCircuit) -> ProjectionCircuit {
    let n = qsvt.n_sys;
    let width = qsvt.circuit.qubits;
    let reflector = width;
    let mut circuit = Circuit::new(width + 1);

    circuit.extend(&qsvt.circuit.inverse());
    for q in 0..n {
        circuit.push(Gate::H(q));
    }
    // (I + R)/2 with R the reflection about |0...0> of the first
    // `width` qubits, combined through the reflector ancilla.
    circuit.push(Gate::H(reflector));
    circuit.push(Gate::PhaseFlip { conditions: vec![(reflector, true)] });
    let mut all_zero: Vec<(usize, bool)> = (0..width).map(|q| (q, false)).collect();
    all_zero.push((reflector, true));
    circuit.push(Gate::PhaseFlip { conditions: all_zero });
    circuit.push(Gate::H(reflector));
    for q in 0..n {
        circuit.push(Gate::H(q));
    }
    circuit.extend(&qsvt.circuit);

    let mut ancillas = qsvt.projection.clone();
    ancillas.push(reflector);
    ProjectionCircuit { circuit, n_sys: n, ancillas }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SizeEstimate {
    pub k: usize,
    pub residual: f64,
    pub low_confidence: bool,
}

/// k from the uniform-state overlap of the normalized signed state:
/// k = (N - sqrt(N) |sum of amplitudes|) / 2, rounded into [0, N/2].
pub fn estimate_botnet_size(amplitudes: &[Complex64], node_count: usize) -> Result<SizeEstimate> {
    let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "size estimation needs a normalized state (norm^2 = {norm_sq})"
        )));
    }
    let total: Complex64 = amplitudes.iter().sum();
    let raw = (node_count as f64 - (node_count as f64).sqrt() * total.norm()) / 2.0;
    let clamped = raw.clamp(0.0, node_count as f64 / 2.0);
    let k = clamped.round() as usize;
    let residual = (clamped - k as f64).abs();
    Ok(SizeEstimate { k, residual, low_confidence: residual > 0.25 })
}

/// One measurement of the subset register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDraw {
    Subset(u128),
    /// A register value beyond the last real branch; carries no
    /// information, eliminates nothing.
    Padding,
}

/// Draw source for elimination trials. All variants expose the same
/// contract: seeded draws over subset masks plus padding.
pub enum Sampler {
    Enumerated(EnumeratedSampler),
    ClassBased(ClassSampler),
}

impl Sampler {
    pub fn draw(&self, rng: &mut ChaCha12Rng) -> ProbeDraw {
        match self {
            Sampler::Enumerated(s) => s.draw(rng),
            Sampler::ClassBased(s) => s.draw(rng),
        }
    }

    pub fn success_probability(&self) -> f64 {
        match self {
            Sampler::Enumerated(s) => s.success_probability,
            Sampler::ClassBased(s) => s.success_probability,
        }
    }
}

pub const MAX_ENUMERATED_SLOTS: u128 = 1 << 22;

/// Sampler with an explicitly tabulated distribution over register
/// values (all branches plus padding slots).
pub struct EnumeratedSampler {
    cumulative: CumulativeSampler,
    masks: Vec<Option<u128>>,
    /// Normalized probability per register value; exposed for
    /// distribution-level comparisons between backends.
    pub probabilities: Vec<f64>,
    pub success_probability: f64,
}

impl EnumeratedSampler {
    fn draw(&self, rng: &mut ChaCha12Rng) -> ProbeDraw {
        match self.masks[self.cumulative.draw(rng) as usize] {
            Some(mask) => ProbeDraw::Subset(mask),
            None => ProbeDraw::Padding,
        }
    }

    fn branch_masks(node_count: usize, subset_size: usize, slots: usize, m: usize) -> Vec<Option<u128>> {
        (0..slots)
            .map(|rank| {
                if rank < m {
                    let members = subset_unrank(node_count, subset_size, rank as u128);
                    Some(members.iter().fold(0u128, |acc, &v| acc | 1 << v))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Closed-path construction: per-branch overlap amplitudes computed
    /// directly from the (possibly unnormalized) signed state.
    pub fn from_signed_state(
        lambda: &[Complex64],
        node_count: usize,
        subset_size: usize,
    ) -> Result<EnumeratedSampler> {
        let dim = lambda.len();
        if !dim.is_power_of_two() {
            return Err(Error::InvalidArgument("state length must be a power of two".into()));
        }
        let m_big = binomial(node_count, subset_size);
        let width = register_width(m_big);
        let slots_big = 1u128 << width;
        if slots_big > MAX_ENUMERATED_SLOTS {
            return Err(Error::InvalidArgument(format!(
                "{m_big} branches are too many to enumerate; use the class sampler"
            )));
        }
        let (m, slots) = (m_big as usize, slots_big as usize);
        // <lambda|G_x> = (T - 2 sum_{y in S_x} lambda_y^*) / sqrt(2^n).
        let total: Complex64 = lambda.iter().map(|a| a.conj()).sum();
        let lambda_norm_sq: f64 = lambda.iter().map(|a| a.norm_sqr()).sum();
        let masks = Self::branch_masks(node_count, subset_size, slots, m);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut weights = Vec::with_capacity(slots);
        for mask in &masks {
            let inner = match mask {
                Some(mask) => {
                    let member_sum: Complex64 = (0..node_count)
                        .filter(|&y| mask >> y & 1 == 1)
                        .map(|y| lambda[y].conj())
                        .sum();
                    total - 2.0 * member_sum
                }
                None => total,
            };
            weights.push((inner * scale).norm_sqr());
        }
        let mean_weight: f64 = weights.iter().sum::<f64>() / slots as f64;
        let success_probability = lambda_norm_sq * mean_weight;
        Self::finish(weights, masks, success_probability)
    }

    /// Full-circuit construction: branched preparation followed by the
    /// projection stage, post-selected on its ancillas, register
    /// marginal read out.
    pub fn from_full_circuit(
        prep: &BranchedPreparation,
        projection: &ProjectionCircuit,
        node_count: usize,
        subset_size: usize,
    ) -> Result<EnumeratedSampler> {
        let mut state = StateVector::zero(prep.circuit.qubits.max(projection.circuit.qubits))?;
        apply_circuit(&mut state, &prep.circuit)?;
        apply_circuit(&mut state, &projection.circuit)?;
        let success_probability = project_zero(&mut state, &projection.ancillas)?;
        let weights = marginal_register(&state, &prep.register)?;
        let m = prep.branch_count as usize;
        let masks = Self::branch_masks(node_count, subset_size, weights.len(), m);
        Self::finish(weights, masks, success_probability)
    }

    /// Circuit preparation with an explicit signed vector in place of
    /// the projection stage: branch amplitudes are inner products of
    /// the prepared state against the vector.
    pub fn from_prepared_state(
        prep: &BranchedPreparation,
        lambda: &[Complex64],
        node_count: usize,
        subset_size: usize,
    ) -> Result<EnumeratedSampler> {
        let n = lambda.len().trailing_zeros() as usize;
        if lambda.len() != 1 << n {
            return Err(Error::InvalidArgument("state length must be a power of two".into()));
        }
        let mut state = StateVector::zero(prep.circuit.qubits)?;
        apply_circuit(&mut state, &prep.circuit)?;
        let slots = 1usize << prep.register_width;
        let m = prep.branch_count as usize;
        let mut weights = Vec::with_capacity(slots);
        for rank in 0..slots {
            let inner: Complex64 = (0..1usize << n)
                .map(|y| lambda[y].conj() * state.amplitudes()[(rank << n) | y])
                .sum();
            weights.push(inner.norm_sqr());
        }
        let success_probability = weights.iter().sum();
        let masks = Self::branch_masks(node_count, subset_size, slots, m);
        Self::finish(weights, masks, success_probability)
    }

    fn finish(
        weights: Vec<f64>,
        masks: Vec<Option<u128>>,
        success_probability: f64,
    ) -> Result<EnumeratedSampler> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::DetectionFailed(
                "every branch has zero overlap with the signed state".into(),
            ));
        }
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Ok(EnumeratedSampler {
            cumulative: CumulativeSampler::new(&probabilities)?,
            masks,
            probabilities,
            success_probability,
        })
    }
}

/// Sampler over intersection classes for branch counts too large to
/// enumerate. Valid for exact sign patterns, where the branch weight
/// depends only on |S_x intersect S_lambda| (and padding).
pub struct ClassSampler {
    class_sampler: CumulativeSampler,
    /// classes[i] = Some(j): intersection size j; None: padding.
    classes: Vec<Option<usize>>,
    members: Vec<usize>,
    outsiders: Vec<usize>,
    subset_size: usize,
    pub success_probability: f64,
}

impl ClassSampler {
    pub fn from_sign_pattern(
        node_count: usize,
        botnet: u128,
        subset_size: usize,
        n_qubits: usize,
    ) -> Result<ClassSampler> {
        let members: Vec<usize> = (0..node_count).filter(|&v| botnet >> v & 1 == 1).collect();
        let outsiders: Vec<usize> = (0..node_count).filter(|&v| botnet >> v & 1 == 0).collect();
        let k = members.len();
        let m = binomial(node_count, subset_size);
        let width = register_width(m);
        let padding = (1u128 << width) - m;

        let n_big = node_count as i64;
        let mut classes = Vec::new();
        let mut weights = Vec::new();
        for j in 0..=subset_size.min(k) {
            let count = binomial(k, j) as f64 * binomial(node_count - k, subset_size - j) as f64;
            if count == 0.0 {
                continue;
            }
            let d = (k + subset_size) as i64 - 2 * j as i64;
            let value = (n_big - 2 * d).pow(2) as f64;
            classes.push(Some(j));
            weights.push(count * value);
        }
        classes.push(None);
        weights.push(padding as f64 * ((n_big - 2 * k as i64).pow(2)) as f64);

        let slots = 2f64.powi(width as i32);
        let scale = 1.0 / ((node_count as f64) * (1u64 << n_qubits) as f64);
        let success_probability = weights.iter().sum::<f64>() * scale / slots;

        Ok(ClassSampler {
            class_sampler: CumulativeSampler::new(&weights)?,
            classes,
            members,
            outsiders,
            subset_size,
            success_probability,
        })
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> ProbeDraw {
        let class = self.classes[self.class_sampler.draw(rng) as usize];
        let Some(j) = class else { return ProbeDraw::Padding };
        let mut mask = 0u128;
        for idx in rand::seq::index::sample(rng, self.members.len(), j) {
            mask |= 1 << self.members[idx];
        }
        for idx in rand::seq::index::sample(rng, self.outsiders.len(), self.subset_size - j) {
            mask |= 1 << self.outsiders[idx];
        }
        ProbeDraw::Subset(mask)
    }
}

/// Survivor bookkeeping for one elimination trial.
#[derive(Debug, Clone)]
pub struct EliminationState {
    survivors: Vec<u64>,
    survivor_count: usize,
    samples: usize,
    eliminated_per_sample: Vec<usize>,
}

impl EliminationState {
    fn new(candidate_count: usize) -> EliminationState {
        let words = candidate_count.div_ceil(64);
        let mut survivors = vec![u64::MAX; words];
        if candidate_count % 64 != 0 {
            survivors[words - 1] = (1u64 << (candidate_count % 64)) - 1;
        }
        EliminationState {
            survivors,
            survivor_count: candidate_count,
            samples: 0,
            eliminated_per_sample: Vec::new(),
        }
    }

    pub fn survivor_count(&self) -> usize {
        self.survivor_count
    }

    pub fn samples_used(&self) -> usize {
        self.samples
    }

    pub fn eliminated_log(&self) -> &[usize] {
        &self.eliminated_per_sample
    }

    pub fn survivor_masks(&self, tables: &OverlapTables, limit: usize) -> Vec<u128> {
        let mut out = Vec::new();
        for (w, &word) in self.survivors.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(tables.candidates[w * 64 + b]);
                if out.len() == limit {
                    return out;
                }
                bits &= bits - 1;
            }
        }
        out
    }

    fn eliminate(&mut self, tables: &OverlapTables, probe: u128) -> usize {
        let mut removed = 0usize;
        let candidates = tables.candidates.as_slice();
        let target = tables.elimination_overlap;
        for (w, word) in self.survivors.iter_mut().enumerate() {
            let mut bits = *word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let rank = w * 64 + b;
                if (candidates[rank] & probe).count_ones() == target {
                    *word &= !(1u64 << b);
                    removed += 1;
                }
            }
        }
        self.survivor_count -= removed;
        removed
    }

    /// The unique surviving candidate (canonical representative when
    /// complements form a class), if the trial has resolved.
    pub fn resolved(&self, tables: &OverlapTables) -> Option<u128> {
        match self.survivor_count {
            1 => self.survivor_masks(tables, 1).first().copied(),
            2 if tables.complement_classes => {
                let pair = self.survivor_masks(tables, 2);
                let full = (1u128 << tables.node_count) - 1;
                if pair[0] ^ pair[1] == full {
                    // Canonical member: the one without node 0.
                    Some(if pair[0] & 1 == 0 { pair[0] } else { pair[1] })
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Default per-trial sample budget: 4 ceil(log2 |candidates|).
pub fn default_budget(candidate_count: u128) -> usize {
    if candidate_count <= 1 {
        return 1;
    }
    4 * (128 - (candidate_count - 1).leading_zeros()) as usize
}

/// Draw-and-eliminate loop: stops on a unique survivor, an empty
/// survivor set, or an exhausted budget.
pub fn sample_and_eliminate(
    sampler: &Sampler,
    tables: &OverlapTables,
    budget: usize,
    seed: u64,
) -> EliminationState {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = EliminationState::new(tables.candidates.len());
    while state.samples < budget
        && state.survivor_count > 0
        && state.resolved(tables).is_none()
    {
        state.samples += 1;
        match sampler.draw(&mut rng) {
            ProbeDraw::Padding => state.eliminated_per_sample.push(0),
            ProbeDraw::Subset(mask) => {
                let removed = state.eliminate(tables, mask);
                state.eliminated_per_sample.push(removed);
            }
        }
    }
    state
}

/// Outcome of one elimination trial.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TrialRecord {
    /// Sorted node list of the surviving candidate; absent when the
    /// trial did not resolve to a single class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<Vec<usize>>,
    pub samples_used: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

/// Aggregate of independent trials: how often each node appeared in a
/// trial winner, and the top-k consensus.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BotnetDistribution {
    pub node_frequencies: Vec<u64>,
    pub trials: Vec<TrialRecord>,
    pub successful_trials: usize,
    /// Top-k nodes by winner frequency (ties broken toward the lower
    /// node index); empty when no trial succeeded.
    pub detected_botnet: Vec<usize>,
}

/// Default trial count: ceil(N (N/2 - k - k_lcu)) when probes keep a
/// small overlap, ceil(sqrt(N)) in the impossibility regime.
pub fn default_trials(node_count: usize, k: usize, plan: ProbePlan) -> usize {
    let n = node_count as f64;
    let t = match plan.mode {
        OverlapMode::ZeroOverlap => n.sqrt(),
        OverlapMode::SmallOverlap => n * (n / 2.0 - k as f64 - plan.subset_size as f64),
    };
    (t.ceil() as usize).max(1)
}

pub fn mask_members(mask: u128) -> Vec<usize> {
    (0..128).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Runs `trials` independent elimination trials with seeds split from
/// the master seed and aggregates winner membership per node.
pub fn run_trials(
    sampler: &Sampler,
    tables: &OverlapTables,
    trials: usize,
    budget: usize,
    master_seed: u64,
) -> Result<BotnetDistribution> {
    use rayon::prelude::*;

    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = crate::seeding::split_seed(master_seed, t);
            let state = sample_and_eliminate(sampler, tables, budget, seed);
            match state.resolved(tables) {
                Some(mask) => TrialRecord {
                    winner: Some(mask_members(mask)),
                    samples_used: state.samples_used(),
                    failed: false,
                },
                None => TrialRecord {
                    winner: None,
                    samples_used: state.samples_used(),
                    failed: true,
                },
            }
        })
        .collect();

    let mut node_frequencies = vec![0u64; tables.node_count];
    let mut successful = 0usize;
    for record in &records {
        if let Some(winner) = &record.winner {
            successful += 1;
            for &v in winner {
                node_frequencies[v] += 1;
            }
        }
    }
    let detected_botnet = if successful == 0 {
        Vec::new()
    } else {
        top_k_nodes(&node_frequencies, tables.k)
    };
    Ok(BotnetDistribution {
        node_frequencies,
        trials: records,
        successful_trials: successful,
        detected_botnet,
    })
}

/// The k highest-frequency nodes, ties toward the lower index.
pub fn top_k_nodes(frequencies: &[u64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[b].cmp(&frequencies[a]).then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{probe_plan, rew_amplitudes, subset_signs};
    use crate::qsp::{find_sign_angles, qsp_value, AngleSearchConfig};
    use crate::qsvt::{assemble_qsvt, prepared_encoding};
    use crate::spectral::MaxVector;
    use approx::assert_abs_diff_eq;

    fn mask_of(members: &[usize]) -> u128 {
        members.iter().fold(0u128, |acc, &v| acc | 1 << v)
    }

    #[test]
    fn overlap_fixture_values() {
        // Disjoint candidate/probe at N=10, k=3, size 1.
        let c = mask_of(&[2, 5, 8]);
        assert_abs_diff_eq!(
            overlap(10, 4, c, mask_of(&[0])),
            2.0 / 160f64.sqrt(),
            epsilon = 1e-15
        );
        // Probe inside the candidate: j=1, d=2, 6/sqrt(160).
        assert_abs_diff_eq!(
            overlap(10, 4, c, mask_of(&[2])),
            6.0 / 160f64.sqrt(),
            epsilon = 1e-15
        );
        // Identical subsets: maximum sqrt(N / 2^n).
        assert_abs_diff_eq!(
            overlap(10, 4, c, c),
            (10f64 / 16.0).sqrt(),
            epsilon = 1e-15
        );
        // Threshold fixture: 2/sqrt(160) = 0.158 to three decimals.
        let th = threshold(10, 4, 3, 1);
        assert_abs_diff_eq!(th, 2.0 / 160f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(th, 0.158, epsilon = 5e-4);
    }

    #[test]
    fn overlap_matches_brute_force_inner_products_exhaustively() {
        for node_count in [6usize, 8, 10] {
            let n = (node_count as f64).log2().ceil() as usize;
            for k in 1..=node_count / 2 {
                for kl in 1..=(node_count / 2).saturating_sub(k).max(1) {
                    for c_rank in 0..binomial(node_count, k) {
                        let c_members = subset_unrank(node_count, k, c_rank);
                        let c_mask = mask_of(&c_members);
                        let signed = sign_vector(node_count, c_mask, n);
                        for x_rank in 0..binomial(node_count, kl) {
                            let x_members = subset_unrank(node_count, kl, x_rank);
                            let probe = rew_amplitudes(&subset_signs(n, &x_members));
                            let inner: Complex64 = signed
                                .iter()
                                .zip(&probe)
                                .map(|(a, b)| a.conj() * b)
                                .sum();
                            let direct = inner.norm();
                            let closed = overlap(node_count, n, c_mask, mask_of(&x_members));
                            assert!(
                                (direct - closed).abs() < 1e-12,
                                "N={node_count} k={k} kl={kl}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn integer_classification_agrees_with_floating_threshold() {
        let node_count = 12usize;
        let n = 4;
        let plan = probe_plan(node_count, 3, Some(2)).unwrap();
        let tables = build_tables(node_count, n, 3, false, plan).unwrap();
        for &c in tables.candidates.iter() {
            for x_rank in 0..binomial(node_count, 2) {
                let x = mask_of(&subset_unrank(node_count, 2, x_rank));
                let by_float =
                    (overlap(node_count, n, c, x) - tables.c_th).abs() < 1e-12;
                assert_eq!(tables.refutes(c, x), by_float);
            }
        }
    }

    #[test]
    fn counting_fixtures_for_sixteen_nodes() {
        let plan = probe_plan(16, 3, None).unwrap();
        assert_eq!(plan.subset_size, 5);
        let tables = build_tables(16, 4, 3, false, plan).unwrap();
        assert_eq!(tables.candidates.len(), 560);
        assert_eq!(tables.branch_count(), 4368);
        assert_eq!(tables.register_width(), 13);
        assert_abs_diff_eq!(tables.c_th, 0.0);

        let small = probe_plan(16, 3, Some(1)).unwrap();
        let tables = build_tables(16, 4, 3, false, small).unwrap();
        assert_eq!(tables.branch_count(), 16);
        assert_eq!(tables.register_width(), 4);
    }

    #[test]
    fn half_split_tables_form_complement_classes() {
        // N=4, k=2: probes of size 2, refutation on intersection 1;
        // complements are indistinguishable by construction.
        let plan = probe_plan(4, 2, None).unwrap();
        assert_eq!(plan.subset_size, 2);
        let tables = build_tables(4, 2, 2, false, plan).unwrap();
        assert!(tables.complement_classes);
        assert_eq!(tables.elimination_overlap, 1);
        assert_eq!(tables.candidates.len(), 6);
        // Hand check: candidate {0,1} is refuted by probes with exactly
        // one member in it.
        let c = mask_of(&[0, 1]);
        assert!(tables.refutes(c, mask_of(&[0, 2])));
        assert!(tables.refutes(c, mask_of(&[1, 3])));
        assert!(!tables.refutes(c, mask_of(&[0, 1])));
        assert!(!tables.refutes(c, mask_of(&[2, 3])));
    }

    #[test]
    fn single_candidate_tables_build() {
        let plan = probe_plan(2, 1, None).unwrap();
        let tables = build_tables(2, 1, 1, false, plan).unwrap();
        assert_eq!(tables.candidates.len(), 2);
        assert!(tables.complement_classes);
    }

    #[test]
    fn projection_circuit_block_is_the_rank_one_projector() {
        // n=2 fixture spectrum; the extracted ancilla-zero block must be
        // lambda lambda^dagger for the polynomial-filtered lambda.
        let v = MaxVector::from_amplitudes(&[0.602, 0.372, -0.602, 0.372]).unwrap();
        let be = prepared_encoding(&v).unwrap();
        let set = find_sign_angles(&AngleSearchConfig::new(0.15, 1e-2, 21)).unwrap();
        let qsvt = assemble_qsvt(&be, &set.phases).unwrap();
        let proj = build_projection_circuit(&qsvt);
        assert_eq!(proj.ancillas.len(), v.n_qubits() + 4);

        let dim = 1usize << v.n_qubits();
        let scale = 1.0 / (dim as f64).sqrt();
        let lambda: Vec<Complex64> = v
            .amplitudes()
            .iter()
            .map(|&c| qsp_value(&set.phases, be.scale * c) * scale)
            .collect();
        let block = crate::qsvt::extract_block(&proj.circuit, proj.n_sys).unwrap();
        for r in 0..dim {
            for c in 0..dim {
                let want = lambda[r] * lambda[c].conj();
                assert!(
                    (block[(r, c)] - want).norm() < 1e-6,
                    "entry ({r},{c}): {} vs {want}",
                    block[(r, c)]
                );
            }
        }
    }

    #[test]
    fn size_estimate_is_exact_on_ideal_sign_vectors() {
        // All-positive: k = 0.
        let v = sign_vector(10, 0, 4);
        let e = estimate_botnet_size(&v, 10).unwrap();
        assert_eq!(e.k, 0);
        assert!(!e.low_confidence);
        // |S| = 3 on N = 10.
        let v = sign_vector(10, mask_of(&[1, 4, 7]), 4);
        let e = estimate_botnet_size(&v, 10).unwrap();
        assert_eq!(e.k, 3);
        assert_abs_diff_eq!(e.residual, 0.0, epsilon = 1e-12);
        // Fixture (1/2)[1,1,-1,1]: k = 1.
        let v: Vec<Complex64> = [0.5, 0.5, -0.5, 0.5]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let e = estimate_botnet_size(&v, 4).unwrap();
        assert_eq!(e.k, 1);
    }

    #[test]
    fn size_estimate_flags_ambiguous_inputs() {
        // A vector halfway between k=1 and k=2 patterns on N=8.
        let mut v = sign_vector(8, mask_of(&[0]), 3);
        let flip = 1.0 / 8f64.sqrt();
        v[1] = Complex64::new(0.0, 0.0);
        // Redistribute to keep the norm while making the sum land
        // between integers.
        v[2] = Complex64::new(flip * 2f64.sqrt(), 0.0);
        let e = estimate_botnet_size(&v, 8).unwrap();
        assert!(e.residual > 0.0);
    }

    #[test]
    fn enumerated_sampler_matches_between_closed_and_prepared_paths() {
        // N=6 nodes on 3 qubits, exact signs, probes of size 1.
        let node_count = 6usize;
        let n = 3usize;
        let botnet = mask_of(&[1, 4]);
        let lambda = sign_vector(node_count, botnet, n);
        let closed = EnumeratedSampler::from_signed_state(&lambda, node_count, 1).unwrap();
        let prep = crate::hypergraph::branched_preparation(n, node_count, 1, None).unwrap();
        let circuit = EnumeratedSampler::from_prepared_state(&prep, &lambda, node_count, 1).unwrap();
        assert_eq!(closed.probabilities.len(), circuit.probabilities.len());
        for (a, b) in closed.probabilities.iter().zip(&circuit.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(
            closed.success_probability,
            circuit.success_probability,
            epsilon = 1e-10
        );
    }

    #[test]
    fn class_sampler_weights_match_enumeration() {
        let node_count = 10usize;
        let n = 4usize;
        let botnet = mask_of(&[0, 3, 7]);
        let subset_size = 2usize;
        let lambda = sign_vector(node_count, botnet, n);
        let enumerated =
            EnumeratedSampler::from_signed_state(&lambda, node_count, subset_size).unwrap();
        let class =
            ClassSampler::from_sign_pattern(node_count, botnet, subset_size, n).unwrap();
        assert_abs_diff_eq!(
            enumerated.success_probability,
            class.success_probability,
            epsilon = 1e-12
        );
        // Group enumerated probabilities by intersection size and
        // compare against the class weights through a long draw run.
        let mut by_class = vec![0.0f64; subset_size + 2];
        for (slot, mask) in enumerated.masks.iter().enumerate() {
            let idx = match mask {
                Some(m) => (m & botnet).count_ones() as usize,
                None => subset_size + 1,
            };
            by_class[idx] += enumerated.probabilities[slot];
        }
        let mut rng = ChaCha12Rng::seed_from_u64(500);
        let draws = 200_000usize;
        let mut counts = vec![0usize; subset_size + 2];
        for _ in 0..draws {
            match class.draw(&mut rng) {
                ProbeDraw::Padding => counts[subset_size + 1] += 1,
                ProbeDraw::Subset(m) => {
                    assert_eq!(m.count_ones() as usize, subset_size);
                    counts[(m & botnet).count_ones() as usize] += 1;
                }
            }
        }
        for j in 0..counts.len() {
            let freq = counts[j] as f64 / draws as f64;
            assert!(
                (freq - by_class[j]).abs() < 0.01,
                "class {j}: drawn {freq:.4} expected {:.4}",
                by_class[j]
            );
        }
    }

    #[test]
    fn zero_overlap_with_exact_signs_always_finds_the_planted_set() {
        // Soundness: the planted candidate is never refuted, and every
        // trial resolves to it.
        for (node_count, planted, seed) in
            [(8usize, mask_of(&[1, 6]), 40u64), (8, mask_of(&[0, 2, 5]), 41), (12, mask_of(&[3, 4, 9]), 42)]
        {
            let n = (node_count as f64).log2().ceil() as usize;
            let k = planted.count_ones() as usize;
            let plan = probe_plan(node_count, k, None).unwrap();
            let tables = build_tables(node_count, n, k, false, plan).unwrap();
            let lambda = sign_vector(node_count, planted, n);
            let sampler = Sampler::Enumerated(
                EnumeratedSampler::from_signed_state(&lambda, node_count, plan.subset_size)
                    .unwrap(),
            );
            for trial in 0..20 {
                let budget = default_budget(tables.candidates.len() as u128) * 4;
                let state = sample_and_eliminate(&sampler, &tables, budget, seed + trial);
                assert_eq!(
                    state.resolved(&tables),
                    Some(planted),
                    "N={node_count} trial={trial} survivors={}",
                    state.survivor_count()
                );
            }
        }
    }

    #[test]
    fn single_sample_eliminates_a_sizable_fraction() {
        // N=16, k=3, impossibility probes: each draw removes a fair
        // share of the 560 candidates.
        let plan = probe_plan(16, 3, None).unwrap();
        let tables = build_tables(16, 4, 3, false, plan).unwrap();
        let planted = mask_of(&[2, 9, 13]);
        let lambda = sign_vector(16, planted, 4);
        let sampler = Sampler::Enumerated(
            EnumeratedSampler::from_signed_state(&lambda, 16, plan.subset_size).unwrap(),
        );
        // Padding draws carry no bitstring and are not counted; the
        // invariant is about actual subset samples.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut total = 0usize;
        let mut rounds = 0usize;
        for _ in 0..400 {
            if rounds == 25 {
                break;
            }
            if let ProbeDraw::Subset(mask) = sampler.draw(&mut rng) {
                let mut state = EliminationState::new(tables.candidates.len());
                total += state.eliminate(&tables, mask);
                rounds += 1;
            }
        }
        assert_eq!(rounds, 25, "padding dominated 400 draws");
        let average = total as f64 / rounds as f64;
        assert!(
            average >= 0.10 * 560.0,
            "average elimination {average:.1} below 10% of 560"
        );
    }

    #[test]
    fn budget_exhaustion_and_extinction_are_reported_not_thrown() {
        let plan = probe_plan(8, 2, Some(1)).unwrap();
        let tables = build_tables(8, 3, 2, false, plan).unwrap();
        let lambda = sign_vector(8, mask_of(&[1, 5]), 3);
        let sampler = Sampler::Enumerated(
            EnumeratedSampler::from_signed_state(&lambda, 8, 1).unwrap(),
        );
        // Budget 1 cannot resolve 28 candidates.
        let state = sample_and_eliminate(&sampler, &tables, 1, 9);
        assert!(state.resolved(&tables).is_none());
        assert!(state.survivor_count() > 1);
        assert_eq!(state.samples_used(), 1);
    }

    #[test]
    fn default_budget_grows_with_the_candidate_count() {
        assert_eq!(default_budget(1), 1);
        assert_eq!(default_budget(2), 4);
        assert_eq!(default_budget(560), 4 * 10);
        assert_eq!(default_budget(120), 4 * 7);
    }

    #[test]
    fn candidate_enumeration_covers_all_subsets_once() {
        let c = enumerate_candidates(10, &[3]).unwrap();
        assert_eq!(c.len(), 120);
        let unique: std::collections::HashSet<u128> = c.iter().copied().collect();
        assert_eq!(unique.len(), 120);
        assert!(c.iter().all(|m| m.count_ones() == 3 && *m < 1 << 10));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }
}
