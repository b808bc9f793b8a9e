//! Classical ground truth: exhaustive modularity maximization and a
//! staged cross-check of the detection pipeline against closed forms.
//!
//! The spectral stage is only quasi-optimal, so the report carries the
//! planted set, the spectral split, and the brute-force optimum side by
//! side instead of assuming they coincide.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    modularity_matrix, modularity_score, ModularityMatrix, Network, Partition,
};
use crate::hypergraph::{binomial, probe_plan};
use crate::pipeline::{
    build_approximant, build_sampler, signed_state, Backend, DetectionConfig, BLOCK_SCALE,
    PLATEAU_MARGIN,
};
use crate::qsp::SignApproximant;
use crate::qsvt::{assemble_qsvt, extract_block, prepared_encoding};
use crate::readout::{
    build_tables, default_budget, default_trials, enumerate_candidates, register_width,
    run_trials, Sampler, MAX_ENUMERATED_SLOTS,
};
use crate::spectral::{classical_sign_partition, max_eigenvector, MaxVector};

/// Full-enumeration cap: 2^(N-1) sign vectors are scanned when no size
/// is given.
pub const MAX_FULL_ENUMERATION_NODES: usize = 24;

/// Modularity of the bipartition that puts `mask` on one side. Row sums
/// of the modularity matrix vanish, so only the masked block
/// contributes: Q = 2 * sum_{i,j in S} B_ij / 2m.
fn mask_modularity(b: &ModularityMatrix, mask: u128) -> f64 {
    let members: Vec<usize> = (0..b.dim()).filter(|&i| mask >> i & 1 == 1).collect();
    let mut block = 0.0;
    for &i in &members {
        for &j in &members {
            block += b.matrix()[(i, j)];
        }
    }
    2.0 * block / b.two_m()
}

fn mask_to_partition(node_count: usize, mask: u128) -> Result<Partition> {
    let signs: Vec<i8> = (0..node_count)
        .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
        .collect();
    Partition::from_signs(signs, [])
}

/// Exhaustive modularity maximization: over all bipartitions when `k`
/// is absent (N <= 24), or over the C(N, k) size-k splits otherwise.
/// Exact ties go to the smallest membership mask, i.e. the
/// lexicographically earliest node set.
pub fn brute_force_modularity(net: &Network, k: Option<usize>) -> Result<(Partition, f64)> {
    let n = net.node_count();
    let b = modularity_matrix(net)?;
    let better = |a: (f64, u128), c: (f64, u128)| {
        if c.0 > a.0 || (c.0 == a.0 && c.1 < a.1) {
            c
        } else {
            a
        }
    };
    let (q, mask) = match k {
        Some(k) => {
            if k == 0 || 2 * k > n {
                return Err(Error::InvalidArgument(format!(
                    "botnet size {k} is outside 1..={} for {n} nodes",
                    n / 2
                )));
            }
            enumerate_candidates(n, &[k])?
                .into_par_iter()
                .map(|mask| (mask_modularity(&b, mask), mask))
                .reduce(|| (f64::NEG_INFINITY, 0), better)
        }
        None => {
            if n > MAX_FULL_ENUMERATION_NODES {
                return Err(Error::InvalidArgument(format!(
                    "{n} nodes exceed the 2^N enumeration cap of \
                     {MAX_FULL_ENUMERATION_NODES}; pass a botnet size"
                )));
            }
            // Node 0 is pinned to the +1 side: a global sign flip is
            // the same split.
            (0u128..1 << (n - 1))
                .into_par_iter()
                .map(|half| {
                    let mask = half << 1;
                    (mask_modularity(&b, mask), mask)
                })
                .reduce(|| (f64::NEG_INFINITY, 0), better)
        }
    };
    Ok((mask_to_partition(n, mask)?, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Passed,
    Failed,
    /// Not checked: a prior stage failed, or the stage does not apply
    /// to this configuration (size caps, no circuit realization).
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageCheck {
    pub stage: String,
    pub status: StageStatus,
    /// Worst absolute deviation observed; zero when skipped.
    pub deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub node_count: usize,
    pub planted_botnet: Vec<usize>,
    pub planted_q: f64,
    pub spectral_botnet: Vec<usize>,
    pub spectral_q: f64,
    /// Exhaustive optimum: all bipartitions for N <= 24, the size-k
    /// family otherwise.
    pub best_botnet: Vec<usize>,
    pub best_q: f64,
    /// spectral_q / best_q whenever the optimum is positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quasi_optimality: Option<f64>,
    pub stages: Vec<StageCheck>,
    pub detected_botnet: Vec<usize>,
    pub all_passed: bool,
}

struct StageLog {
    stages: Vec<StageCheck>,
    failed: bool,
}

impl StageLog {
    fn new() -> StageLog {
        StageLog { stages: Vec::new(), failed: false }
    }

    /// Records a measured deviation, or a skip when `deviation` is None.
    fn record(&mut self, stage: &str, deviation: Option<f64>, tolerance: f64) {
        let (status, deviation) = match deviation {
            _ if self.failed => (StageStatus::Skipped, 0.0),
            None => (StageStatus::Skipped, 0.0),
            Some(d) if d <= tolerance => (StageStatus::Passed, d),
            Some(d) => (StageStatus::Failed, d),
        };
        if status == StageStatus::Failed {
            self.failed = true;
        }
        self.stages.push(StageCheck {
            stage: stage.into(),
            status,
            deviation,
            tolerance,
        });
    }
}

const EIGEN_TOLERANCE: f64 = 1e-8;
const SIGN_TOLERANCE: f64 = 0.05;
const BLOCK_TOLERANCE: f64 = 1e-8;
const TV_TOLERANCE: f64 = 1e-6;
/// Full-circuit cross-checks are skipped beyond this many total qubits.
const CIRCUIT_QUBIT_CAP: usize = 22;

fn eigen_residual(b: &ModularityMatrix, v: &MaxVector) -> f64 {
    let n = b.dim();
    let active = &v.amplitudes()[..n];
    let eigenvalue = v.eigenvalue().unwrap_or_else(|| {
        let mut r = 0.0;
        for i in 0..n {
            for j in 0..n {
                r += active[i] * b.matrix()[(i, j)] * active[j];
            }
        }
        r
    });
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += b.matrix()[(i, j)] * active[j];
        }
        worst = worst.max((row - eigenvalue * active[i]).abs());
    }
    worst
}

/// Largest gap between the filtered amplitudes and the ideal two-valued
/// pattern: max over active entries of |P(alpha c) - sign(c)|.
fn sign_deviation(v: &MaxVector, partition: &Partition, approximant: &SignApproximant) -> f64 {
    let amps = v.amplitudes();
    let mut worst = 0.0f64;
    for (y, &sign) in partition.signs().iter().enumerate() {
        let filtered = approximant.apply(BLOCK_SCALE * amps[y]);
        let ideal = f64::from(sign);
        worst = worst.max((filtered - ideal).norm());
    }
    worst
}

/// Deviation of the prepared block encoding from alpha * diag(c), plus,
/// when phase factors are available, of the transformed block from
/// diag(P(alpha c)).
fn block_deviation(v: &MaxVector, approximant: &SignApproximant) -> Result<f64> {
    let be = prepared_encoding(v)?;
    let dim = 1usize << v.n_qubits();
    let block = extract_block(&be.circuit, v.n_qubits())?;
    let amps = v.amplitudes();
    let mut worst = 0.0f64;
    for row in 0..dim {
        for col in 0..dim {
            let want = if row == col { be.scale * amps[row] } else { 0.0 };
            worst = worst.max((block[(row, col)].re - want).abs());
            worst = worst.max(block[(row, col)].im.abs());
        }
    }
    if let SignApproximant::Angles(set) = approximant {
        let qsvt = assemble_qsvt(&be, &set.phases)?;
        let transformed = extract_block(&qsvt.circuit, qsvt.n_sys)?;
        for row in 0..dim {
            for col in 0..dim {
                let want = if row == col {
                    approximant.apply(be.scale * amps[row])
                } else {
                    0.0.into()
                };
                worst = worst.max((transformed[(row, col)] - want).norm());
            }
        }
    }
    Ok(worst)
}

/// Cross-checks every pipeline stage on one instance and reports the
/// worst deviation per stage. A failed stage skips the ones after it;
/// infeasible circuit stages are skipped without failing the report.
pub fn verify_pipeline(
    net: &Network,
    planted: &BTreeSet<usize>,
    config: &DetectionConfig,
) -> Result<OracleReport> {
    let node_count = net.node_count();
    let b = modularity_matrix(net)?;
    let v = max_eigenvector(&b)?;
    let partition = classical_sign_partition(&v)?;
    let k = config.k.unwrap_or_else(|| partition.botnet_size());
    if k == 0 {
        return Err(Error::InvalidArgument(
            "degenerate spectral split: no minority side to verify".into(),
        ));
    }

    let planted_signs: Vec<i8> = (0..node_count)
        .map(|i| if planted.contains(&i) { -1 } else { 1 })
        .collect();
    let planted_q = modularity_score(&b, &planted_signs)?;
    let spectral_q = modularity_score(&b, partition.signs())?;
    let (best_partition, best_q) = if node_count <= MAX_FULL_ENUMERATION_NODES {
        brute_force_modularity(net, None)?
    } else {
        brute_force_modularity(net, Some(k))?
    };

    let x_min = PLATEAU_MARGIN * BLOCK_SCALE * v.min_active_abs();
    let (approximant, _) = build_approximant(&config.sign, x_min, None)?;
    let lambda = signed_state(&approximant, &v, &partition);
    let plan = probe_plan(node_count, k, config.k_lcu)?;

    let mut log = StageLog::new();
    log.record("eigen-residual", Some(eigen_residual(&b, &v)), EIGEN_TOLERANCE);
    log.record(
        "sign-agreement",
        Some(sign_deviation(&v, &partition, &approximant)),
        SIGN_TOLERANCE,
    );

    // Block comparisons simulate the encoding circuit on 2n + 2 qubits.
    let block = if 2 * v.n_qubits() + 2 <= CIRCUIT_QUBIT_CAP {
        Some(block_deviation(&v, &approximant)?)
    } else {
        None
    };
    log.record("block-encoding", block, BLOCK_TOLERANCE);

    let circuit_qubits =
        2 * v.n_qubits() + 4 + register_width(binomial(node_count, plan.subset_size));
    let tv = if approximant.circuit_capable()
        && circuit_qubits <= CIRCUIT_QUBIT_CAP
        && 1u128 << register_width(binomial(node_count, plan.subset_size))
            <= MAX_ENUMERATED_SLOTS
        && !log.failed
    {
        let oracle = build_sampler(
            &DetectionConfig { backend: Backend::Oracle, ..config.clone() },
            &v,
            &partition,
            &approximant,
            &lambda,
            plan,
        )?;
        let circuit = build_sampler(
            &DetectionConfig { backend: Backend::Circuit, ..config.clone() },
            &v,
            &partition,
            &approximant,
            &lambda,
            plan,
        )?;
        match (&oracle, &circuit) {
            (Sampler::Enumerated(a), Sampler::Enumerated(b)) => Some(
                a.probabilities
                    .iter()
                    .zip(&b.probabilities)
                    .map(|(p, q)| (p - q).abs())
                    .sum::<f64>()
                    / 2.0,
            ),
            _ => None,
        }
    } else {
        None
    };
    log.record("sampler-tv", tv, TV_TOLERANCE);

    let detected = if log.failed {
        log.record("elimination", None, 0.5);
        Vec::new()
    } else {
        let tables = build_tables(node_count, v.n_qubits(), k, config.extend_range, plan)?;
        let sampler = build_sampler(config, &v, &partition, &approximant, &lambda, plan)?;
        let budget = config
            .budget
            .unwrap_or_else(|| default_budget(tables.candidates.len() as u128));
        let trials = config
            .trials
            .unwrap_or_else(|| default_trials(node_count, k, plan));
        let dist = run_trials(&sampler, &tables, trials, budget, config.seed)?;
        let detected: BTreeSet<usize> = dist.detected_botnet.iter().copied().collect();
        let misses = planted.symmetric_difference(&detected).count();
        log.record("elimination", Some(misses as f64), 0.5);
        dist.detected_botnet
    };

    let all_passed = !log.failed;
    Ok(OracleReport {
        node_count,
        planted_botnet: planted.iter().copied().collect(),
        planted_q,
        spectral_botnet: partition.botnet().iter().copied().collect(),
        spectral_q,
        best_botnet: best_partition.botnet().iter().copied().collect(),
        best_q,
        quasi_optimality: (best_q > 1e-12).then_some(spectral_q / best_q),
        stages: log.stages,
        detected_botnet: detected,
        all_passed,
    })
}
