//! Command-line front end: reproducible generation, detection, cost
//! accounting, ground-truth verification, and phase-factor searches.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input, 3
//! when a run completes but detection (or verification) fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use deteqt_core::error::Error;
use deteqt_core::graph::{generate_planted_botnet, load_edge_list, Network, PlantStyle};
use deteqt_core::oracle::verify_pipeline;
use deteqt_core::pipeline::{
    detect, frequencies_csv, resource_report, Backend, DetectionConfig, SignSource,
};
use deteqt_core::qsp::{find_sign_angles, AngleSearchConfig};

#[derive(Parser)]
#[command(
    name = "deteqt",
    version,
    about = "Spectral botnet detection with simulated quantum sign filtering and \
             elimination readout"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-botnet network as an edge list plus a JSON sidecar
    /// carrying the ground truth.
    Generate(GenerateArgs),
    /// Run the detection pipeline and emit a run report (JSON) and
    /// optional node-frequency CSV.
    Detect(DetectArgs),
    /// Print qubit, sample, and gate cost accounting for an instance
    /// shape; no concrete graph needed.
    Resources(ResourcesArgs),
    /// Cross-check every pipeline stage against classical ground truth
    /// and report per-stage deviations.
    Oracle(OracleArgs),
    /// Optimize sign-approximation phase factors and write them as JSON
    /// consumable by `detect --angles`.
    Angles(AnglesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    /// Botnet-to-rest edges drawn at the background rate.
    Hidden,
    /// No botnet-to-rest edges.
    Isolated,
}

impl StyleArg {
    fn to_style(self) -> PlantStyle {
        match self {
            StyleArg::Hidden => PlantStyle::Hidden,
            StyleArg::Isolated => PlantStyle::Isolated,
        }
    }

    fn name(self) -> &'static str {
        match self {
            StyleArg::Hidden => "hidden",
            StyleArg::Isolated => "isolated",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    /// Full statevector simulation of the preparation and projection
    /// circuits; feasible to roughly 16 nodes.
    Circuit,
    /// Closed-form branch distribution; scales to hundreds of nodes.
    Oracle,
}

impl BackendArg {
    fn to_backend(self) -> Backend {
        match self {
            BackendArg::Circuit => Backend::Circuit,
            BackendArg::Oracle => Backend::Oracle,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Planted botnet size (at most N/2).
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = StyleArg::Hidden)]
    style: StyleArg,
    /// Edge probability inside the botnet.
    #[arg(long, default_value_t = 1.0)]
    p_intra: f64,
    /// Background edge probability (hidden botnets also use it for
    /// botnet-to-rest edges).
    #[arg(long, default_value_t = 0.1)]
    p_inter: f64,
    #[arg(long)]
    seed: u64,
    /// Output prefix: writes <out>.edges and <out>.json.
    #[arg(long, default_value = "network")]
    out: PathBuf,
}

/// Ground-truth sidecar written next to every generated edge list.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    node_count: usize,
    k: usize,
    style: String,
    p_intra: f64,
    p_inter: f64,
    seed: u64,
    edge_count: usize,
    planted: Vec<usize>,
}

/// Where the network comes from: an edge-list file or an inline
/// generator call.
#[derive(Args)]
struct NetworkSource {
    /// Edge-list file (one "u v" pair per line).
    #[arg(long, conflicts_with_all = ["n", "style", "p_intra", "p_inter", "gen_seed", "gen_k"])]
    network: Option<PathBuf>,
    /// Generate the instance inline: node count.
    #[arg(long)]
    n: Option<usize>,
    /// Planted size for inline generation; defaults to --k.
    #[arg(long)]
    gen_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = StyleArg::Hidden)]
    style: StyleArg,
    #[arg(long, default_value_t = 1.0)]
    p_intra: f64,
    #[arg(long, default_value_t = 0.1)]
    p_inter: f64,
    /// Generator seed for inline generation (independent of the run seed).
    #[arg(long)]
    gen_seed: Option<u64>,
}

impl NetworkSource {
    fn resolve(&self, k_hint: Option<usize>) -> Result<(Network, Option<BTreeSet<usize>>), Error> {
        match (&self.network, self.n) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                Ok((load_edge_list(&text)?, None))
            }
            (None, Some(n)) => {
                let k = self.gen_k.or(k_hint).ok_or_else(|| {
                    Error::InvalidArgument(
                        "inline generation needs --gen-k (or --k) for the planted size".into(),
                    )
                })?;
                let seed = self.gen_seed.ok_or_else(|| {
                    Error::InvalidArgument("inline generation needs --gen-seed".into())
                })?;
                let (net, planted) = generate_planted_botnet(
                    n,
                    k,
                    self.p_intra,
                    self.p_inter,
                    self.style.to_style(),
                    seed,
                )?;
                Ok((net, Some(planted)))
            }
            _ => Err(Error::InvalidArgument(
                "pass exactly one of --network <file> or --n <nodes>".into(),
            )),
        }
    }
}

/// Sign-transformation source; the optimized polynomial is the default.
#[derive(Args)]
struct SignArgs {
    /// Plateau tolerance for the optimized sign polynomial.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Force the polynomial degree instead of the automatic schedule.
    #[arg(long)]
    degree: Option<usize>,
    /// Composed sign quintic of this order (closed-form backend only).
    #[arg(long, conflicts_with_all = ["exact_sign", "angles"])]
    recursive: Option<usize>,
    /// Load phase factors from a JSON file written by `angles`.
    #[arg(long, conflicts_with = "exact_sign")]
    angles: Option<PathBuf>,
    /// Replace the polynomial stage with the analytically signed vector,
    /// isolating readout from sign-approximation error.
    #[arg(long)]
    exact_sign: bool,
}

impl SignArgs {
    fn to_source(&self) -> SignSource {
        if self.exact_sign {
            SignSource::Exact
        } else if let Some(path) = &self.angles {
            SignSource::File { path: path.clone() }
        } else if let Some(order) = self.recursive {
            SignSource::Recursive { order }
        } else {
            SignSource::Optimize { eps: self.eps, degree: self.degree }
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    source: NetworkSource,
    /// Known botnet size; estimated from the signed state when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Probe subset size; anything below N/2 - k switches readout to the
    /// statistical small-overlap mode.
    #[arg(long)]
    k_lcu: Option<usize>,
    /// Also enumerate candidates of sizes k-1 and k+1.
    #[arg(long)]
    extend_range: bool,
    #[arg(long, value_enum, default_value_t = BackendArg::Oracle)]
    backend: BackendArg,
    #[command(flatten)]
    sign: SignArgs,
    /// Elimination trials; a size-dependent default otherwise.
    #[arg(long)]
    trials: Option<usize>,
    /// Samples per trial; a size-dependent default otherwise.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Node-frequency CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ResourcesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Probe subset size override.
    #[arg(long)]
    k_lcu: Option<usize>,
    /// Sign polynomial degree for gate-count accounting.
    #[arg(long)]
    degree: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: NetworkSource,
    /// Ground-truth sidecar JSON (from `generate`); required with
    /// --network, implied by inline generation.
    #[arg(long)]
    planted: Option<PathBuf>,
    /// Known botnet size; the spectral minority size when absent.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_lcu: Option<usize>,
    #[arg(long, value_enum, default_value_t = BackendArg::Oracle)]
    backend: BackendArg,
    #[command(flatten)]
    sign: SignArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnglesArgs {
    /// Left edge of the sign plateau the polynomial must cover.
    #[arg(long)]
    x_min: f64,
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Force the degree instead of the automatic schedule.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes through a sibling temp file so readers never observe a
/// half-written report.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    let (net, planted) = generate_planted_botnet(
        args.n,
        args.k,
        args.p_intra,
        args.p_inter,
        args.style.to_style(),
        args.seed,
    )?;
    let sidecar = Sidecar {
        node_count: net.node_count(),
        k: args.k,
        style: args.style.name().into(),
        p_intra: args.p_intra,
        p_inter: args.p_inter,
        seed: args.seed,
        edge_count: net.edge_count(),
        planted: planted.iter().copied().collect(),
    };
    let edges_path = args.out.with_extension("edges");
    let sidecar_path = args.out.with_extension("json");
    write_atomic(&edges_path, net.to_edge_list().as_bytes())?;
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    write_atomic(&sidecar_path, json.as_bytes())?;
    eprintln!(
        "wrote {} ({} nodes, {} edges) and {}",
        edges_path.display(),
        net.node_count(),
        net.edge_count(),
        sidecar_path.display()
    );
    Ok(())
}

fn cmd_detect(args: &DetectArgs) -> Result<(), Error> {
    let config = DetectionConfig {
        k: args.k,
        k_lcu: args.k_lcu,
        extend_range: args.extend_range,
        backend: args.backend.to_backend(),
        sign: args.sign.to_source(),
        trials: args.trials,
        budget: args.budget,
        seed: args.seed,
    };
    let echo = serde_json::to_string(&config)?;
    let run = || -> Result<(), Error> {
        let (net, _) = args.source.resolve(args.k)?;
        let report = detect(&net, &config, None)?;
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        emit(args.report.as_deref(), json.trim_end())?;
        if let Some(path) = &args.report {
            eprintln!("wrote {}", path.display());
        }
        if let Some(csv) = &args.csv {
            write_atomic(csv, frequencies_csv(&report).as_bytes())?;
            eprintln!("wrote {}", csv.display());
        }
        if !report.detection_succeeded() {
            return Err(Error::DetectionFailed(
                "no elimination trial resolved a winner".into(),
            ));
        }
        Ok(())
    };
    run().inspect_err(|_| eprintln!("config: {echo}"))
}

fn cmd_resources(args: &ResourcesArgs) -> Result<(), Error> {
    let report = resource_report(args.n, args.k, args.k_lcu, args.degree)?;
    let json = serde_json::to_string_pretty(&report)?;
    emit(args.out.as_deref(), &json)
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Error> {
    let (net, generated) = args.source.resolve(args.k)?;
    let planted: BTreeSet<usize> = match (&args.planted, generated) {
        (Some(path), _) => {
            let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            sidecar.planted.into_iter().collect()
        }
        (None, Some(planted)) => planted,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "--network runs need --planted <sidecar.json> for the ground truth".into(),
            ))
        }
    };
    let config = DetectionConfig {
        k: args.k,
        k_lcu: args.k_lcu,
        extend_range: false,
        backend: args.backend.to_backend(),
        sign: args.sign.to_source(),
        trials: args.trials,
        budget: args.budget,
        seed: args.seed,
    };
    let report = verify_pipeline(&net, &planted, &config)?;
    let json = serde_json::to_string_pretty(&report)?;
    emit(args.out.as_deref(), &json)?;
    if !report.all_passed {
        return Err(Error::DetectionFailed(
            "one or more verification stages failed; see the report".into(),
        ));
    }
    Ok(())
}

fn cmd_angles(args: &AnglesArgs) -> Result<(), Error> {
    let mut config = AngleSearchConfig::new(args.x_min, args.eps, args.seed);
    config.degree = args.degree;
    let set = find_sign_angles(&config)?;
    eprintln!(
        "degree {}, sup error {:.3e}, converged: {}",
        set.degree, set.sup_error, set.converged
    );
    let json = serde_json::to_string_pretty(&set)?;
    emit(args.out.as_deref(), &json)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Resources(args) => cmd_resources(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Angles(args) => cmd_angles(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::DetectionFailed(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
