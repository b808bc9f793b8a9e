//! End-to-end detection runs: network ingest, modularity spectrum,
//! sign filtering, branched probe sampling, elimination trials, and
//! cross-trial consensus, emitted as a reproducible report.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{modularity_matrix, Network, Partition};
use crate::hypergraph::{binomial, branched_preparation, probe_plan, OverlapMode, ProbePlan};
use crate::qsp::{find_sign_angles, AngleCache, AngleSearchConfig, AngleSet, SignApproximant};
use crate::qsvt::{assemble_qsvt, prepared_encoding};
use crate::readout::{
    build_projection_circuit, build_tables, default_budget, default_trials, estimate_botnet_size,
    register_width, run_trials, sign_vector, ClassSampler, EnumeratedSampler, Sampler,
    SizeEstimate, TrialRecord, MAX_ENUMERATED_SLOTS,
};
use crate::seeding::split_seed;
use crate::spectral::{classical_sign_partition, max_eigenvector, MaxVector};

/// Fraction of the prepared-encoding block scale: every spectral entry
/// enters the sign polynomial as alpha * c.
pub const BLOCK_SCALE: f64 = 0.5;

/// Safety margin between the smallest scaled spectral entry and the
/// sign polynomial's plateau edge.
pub(crate) const PLATEAU_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Statevector simulation of the full preparation + projection
    /// circuit; feasible to roughly 16 nodes.
    Circuit,
    /// Closed-form branch distribution from the signed state; scales to
    /// hundreds of nodes.
    Oracle,
}

/// Where the sign transformation comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SignSource {
    /// Analytically signed vector, bypassing the polynomial stage.
    Exact,
    /// Phase-factor optimization at the given tolerance (degree from
    /// the schedule unless forced).
    Optimize {
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<usize>,
    },
    /// Composed sign quintic of the given order (closed-form path only).
    Recursive { order: usize },
    /// Pre-computed phase factors from a JSON file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Known botnet size; estimated from the signed state when absent.
    pub k: Option<usize>,
    /// Probe-subset size override; the zero-overlap default otherwise.
    pub k_lcu: Option<usize>,
    /// Extend the candidate list over k-1 and k+1 (statistical mode only).
    #[serde(default)]
    pub extend_range: bool,
    pub backend: Backend,
    pub sign: SignSource,
    pub trials: Option<usize>,
    pub budget: Option<usize>,
    pub seed: u64,
}

impl DetectionConfig {
    /// Oracle backend, exact signs, defaults everywhere: the fastest
    /// honest configuration.
    pub fn exact_oracle(seed: u64) -> DetectionConfig {
        DetectionConfig {
            k: None,
            k_lcu: None,
            extend_range: false,
            backend: Backend::Oracle,
            sign: SignSource::Exact,
            trials: None,
            budget: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: DetectionConfig,
    pub node_count: usize,
    pub n_qubits: usize,
    pub k: usize,
    pub subset_size: usize,
    pub mode: OverlapMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_estimate: Option<SizeEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_degree: Option<usize>,
    pub trials: Vec<TrialRecord>,
    pub node_frequencies: Vec<u64>,
    pub successful_trials: usize,
    /// Top-k consensus nodes; empty when no trial resolved.
    pub detected_botnet: Vec<usize>,
    /// 1 / post-selection success probability: how many circuit shots
    /// one accepted sample costs on average.
    pub expected_postselect_repetitions: f64,
}

impl RunReport {
    pub fn detection_succeeded(&self) -> bool {
        !self.detected_botnet.is_empty()
    }
}

/// node,frequency rows for plotting.
pub fn frequencies_csv(report: &RunReport) -> String {
    let mut out = String::from("node,frequency\n");
    for (node, f) in report.node_frequencies.iter().enumerate() {
        out.push_str(&format!("{node},{f}\n"));
    }
    out
}

pub(crate) fn bit_mask(nodes: impl IntoIterator<Item = usize>) -> u128 {
    nodes.into_iter().fold(0u128, |acc, v| acc | 1 << v)
}

/// Resolves the sign source to an approximant. Angle searches are
/// seeded from the bucketed plateau edge and tolerance (not the run
/// seed), so cached and fresh runs produce identical phases.
pub(crate) fn build_approximant(
    sign: &SignSource,
    x_min: f64,
    cache: Option<&AngleCache>,
) -> Result<(SignApproximant, Option<usize>)> {
    match sign {
        SignSource::Exact => Ok((SignApproximant::Exact, None)),
        SignSource::Recursive { order } => {
            let a = SignApproximant::recursive(*order)?;
            Ok((a, None))
        }
        SignSource::File { path } => {
            let text = std::fs::read_to_string(path)?;
            let set: AngleSet = serde_json::from_str(&text)?;
            let degree = set.degree;
            Ok((SignApproximant::Angles(Arc::new(set)), Some(degree)))
        }
        SignSource::Optimize { eps, degree } => {
            let set = match (degree, cache) {
                (None, Some(cache)) => cache.get_or_find(x_min, *eps, angle_seed(*eps, 0))?,
                (forced, _) => {
                    let mut cfg =
                        AngleSearchConfig::new(x_min, *eps, angle_seed(*eps, forced.unwrap_or(0)));
                    cfg.degree = *forced;
                    Arc::new(find_sign_angles(&cfg)?)
                }
            };
            let degree = set.degree;
            Ok((SignApproximant::Angles(set), Some(degree)))
        }
    }
}

fn angle_seed(eps: f64, degree: usize) -> u64 {
    split_seed(eps.to_bits(), degree as u64)
}

/// The signed state driving both size estimation and the oracle
/// sampler. Exact mode returns the ideal 1/sqrt(N) vector; polynomial
/// modes return the filtered (unnormalized) state P(alpha c)/sqrt(2^n).
pub(crate) fn signed_state(
    approximant: &SignApproximant,
    v: &MaxVector,
    partition: &Partition,
) -> Vec<Complex64> {
    match approximant {
        SignApproximant::Exact => sign_vector(
            partition.node_count(),
            bit_mask(partition.botnet().iter().copied()),
            v.n_qubits(),
        ),
        poly => {
            let scale = 1.0 / ((1u64 << v.n_qubits()) as f64).sqrt();
            v.amplitudes()
                .iter()
                .map(|&c| poly.apply(BLOCK_SCALE * c) * scale)
                .collect()
        }
    }
}

pub(crate) fn build_sampler(
    config: &DetectionConfig,
    v: &MaxVector,
    partition: &Partition,
    approximant: &SignApproximant,
    lambda: &[Complex64],
    plan: ProbePlan,
) -> Result<Sampler> {
    let node_count = partition.node_count();
    let n = v.n_qubits();
    match config.backend {
        Backend::Oracle => {
            let branches = binomial(node_count, plan.subset_size);
            if 1u128 << register_width(branches) <= MAX_ENUMERATED_SLOTS {
                Ok(Sampler::Enumerated(EnumeratedSampler::from_signed_state(
                    lambda,
                    node_count,
                    plan.subset_size,
                )?))
            } else if matches!(approximant, SignApproximant::Exact) {
                Ok(Sampler::ClassBased(ClassSampler::from_sign_pattern(
                    node_count,
                    bit_mask(partition.botnet().iter().copied()),
                    plan.subset_size,
                    n,
                )?))
            } else {
                Err(Error::InvalidArgument(format!(
                    "{branches} probe branches are too many for the polynomial-sign \
                     oracle; rerun with the exact-sign shortcut"
                )))
            }
        }
        Backend::Circuit => match approximant {
            SignApproximant::Exact => {
                let prep = branched_preparation(n, node_count, plan.subset_size, None)?;
                Ok(Sampler::Enumerated(EnumeratedSampler::from_prepared_state(
                    &prep,
                    lambda,
                    node_count,
                    plan.subset_size,
                )?))
            }
            SignApproximant::Angles(set) => {
                let be = prepared_encoding(v)?;
                let qsvt = assemble_qsvt(&be, &set.phases)?;
                let projection = build_projection_circuit(&qsvt);
                let prep = branched_preparation(
                    n,
                    node_count,
                    plan.subset_size,
                    Some(projection.circuit.qubits),
                )?;
                Ok(Sampler::Enumerated(EnumeratedSampler::from_full_circuit(
                    &prep,
                    &projection,
                    node_count,
                    plan.subset_size,
                )?))
            }
            SignApproximant::Recursive { .. } => Err(Error::InvalidArgument(
                "the recursive sign polynomial has no phase-factor realization; \
                 it cannot drive the circuit backend"
                    .into(),
            )),
        },
    }
}

/// Runs the whole detection pipeline on a network. `cache` shares
/// angle-optimization results across calls; pass None for one-shot runs.
pub fn detect(
    net: &Network,
    config: &DetectionConfig,
    cache: Option<&AngleCache>,
) -> Result<RunReport> {
    let node_count = net.node_count();
    let b = modularity_matrix(net)?;
    let v = max_eigenvector(&b)?;
    let n = v.n_qubits();
    let partition = classical_sign_partition(&v)?;

    let x_min = PLATEAU_MARGIN * BLOCK_SCALE * v.min_active_abs();
    let (approximant, sign_degree) = build_approximant(&config.sign, x_min, cache)?;
    if config.backend == Backend::Circuit && !approximant.circuit_capable() {
        return Err(Error::InvalidArgument(
            "the recursive sign polynomial has no phase-factor realization; \
             it cannot drive the circuit backend"
                .into(),
        ));
    }
    let lambda = signed_state(&approximant, &v, &partition);

    let norm_sq: f64 = lambda.iter().map(|a| a.norm_sqr()).sum();
    let k_estimate: Option<SizeEstimate> = if norm_sq > 1e-12 {
        let scale = 1.0 / norm_sq.sqrt();
        let normalized: Vec<Complex64> = lambda.iter().map(|a| a * scale).collect();
        Some(estimate_botnet_size(&normalized, node_count)?)
    } else {
        None
    };
    let k = match (config.k, &k_estimate) {
        (Some(k), _) => k,
        (None, Some(e)) => e.k,
        (None, None) => {
            return Err(Error::DetectionFailed(
                "signed state vanished; cannot estimate the botnet size".into(),
            ))
        }
    };
    if k == 0 {
        return Err(Error::DetectionFailed(
            "estimated botnet size is 0: no minority community stands out".into(),
        ));
    }

    let plan = probe_plan(node_count, k, config.k_lcu)?;
    let tables = build_tables(node_count, n, k, config.extend_range, plan)?;
    let sampler = build_sampler(config, &v, &partition, &approximant, &lambda, plan)?;

    let budget = config
        .budget
        .unwrap_or_else(|| default_budget(tables.candidates.len() as u128));
    let trials = config.trials.unwrap_or_else(|| default_trials(node_count, k, plan));
    let dist = run_trials(&sampler, &tables, trials, budget, config.seed)?;

    Ok(RunReport {
        config: config.clone(),
        node_count,
        n_qubits: n,
        k,
        subset_size: plan.subset_size,
        mode: plan.mode,
        k_estimate,
        sign_degree,
        trials: dist.trials,
        node_frequencies: dist.node_frequencies,
        successful_trials: dist.successful_trials,
        detected_botnet: dist.detected_botnet,
        expected_postselect_repetitions: 1.0 / sampler.success_probability(),
    })
}

/// Instance-level cost accounting, independent of any concrete graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResourceReport {
    pub node_count: usize,
    pub n_qubits: usize,
    pub k: usize,
    pub subset_size: usize,
    pub mode: OverlapMode,
    /// |candidates| = C(N, k), exact decimal.
    pub candidate_count: String,
    /// |probe branches| = C(N, k_lcu), exact decimal.
    pub branch_count: String,
    /// a = ceil(log2 of branch count).
    pub register_width: usize,
    pub system_qubits: usize,
    /// 2n + 4 + a: system, comparator, two flags, reflector, register.
    pub total_qubits: usize,
    pub sample_budget: usize,
    pub trial_count: usize,
    /// Under exact signs; the polynomial path matches to O(eps).
    pub expected_postselect_repetitions: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qsvt: Option<QsvtCost>,
}

/// Per-shot gate counts of the projection circuit for a degree-d
/// sign polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsvtCost {
    pub degree: usize,
    /// Block-encoding applications: d per transform, twice per shot.
    pub block_encoding_calls: usize,
    /// One controlled preparation-unitary per block encoding.
    pub preparation_unitary_calls: usize,
    /// Projector-controlled phase blocks: d+1 per transform, twice.
    pub phase_reflections: usize,
}

pub fn resource_report(
    node_count: usize,
    k: usize,
    k_lcu: Option<usize>,
    degree: Option<usize>,
) -> Result<ResourceReport> {
    let n = (node_count.max(2) as f64).log2().ceil() as usize;
    let plan = probe_plan(node_count, k, k_lcu)?;
    let candidates = binomial(node_count, k);
    let branches = binomial(node_count, plan.subset_size);
    let width = register_width(branches);
    // The analytic success probability only depends on N, k, size, n;
    // any concrete planted mask gives the same class weights.
    let success = ClassSampler::from_sign_pattern(
        node_count,
        (1u128 << k) - 1,
        plan.subset_size,
        n,
    )?
    .success_probability;
    Ok(ResourceReport {
        node_count,
        n_qubits: n,
        k,
        subset_size: plan.subset_size,
        mode: plan.mode,
        candidate_count: candidates.to_string(),
        branch_count: branches.to_string(),
        register_width: width,
        system_qubits: n,
        total_qubits: 2 * n + 4 + width,
        sample_budget: default_budget(candidates),
        trial_count: default_trials(node_count, k, plan),
        expected_postselect_repetitions: 1.0 / success,
        qsvt: degree.map(|d| QsvtCost {
            degree: d,
            block_encoding_calls: 2 * d,
            preparation_unitary_calls: 2 * d,
            phase_reflections: 2 * (d + 1),
        }),
    })
}
