//! Reproducible experiment driver for the wedgefield library.
//!
//! Every subcommand emits a single JSON document (JSON Lines for sweeps)
//! with an echo of the resolved configuration; runs are bit-reproducible
//! for a fixed seed. Exit codes: 0 success, 2 configuration errors,
//! 3 numerical failures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use wedgefield_core::{
    deformed_s_matrix_element, function_from_specs, identity_suite, limit_sweep, orbit_suite,
    vacuum_functional, wedge_locality_experiment, wedge_ordering_check, FockLattice, FourVector,
    LocalityConfig, MassShellMeasure, NoncommMatrix, OrbitParams, PacketSpec, SMatrixInput,
    SMatrixModel, TensorPoly, ThetaSpec, TwistedTensor,
};

#[derive(Parser)]
#[command(name = "wedgefield", version, about = "Deformed free-field experiments")]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orbit invariants, section residuals and wedge facts W1-W4.
    Orbit(OrbitArgs),
    /// Kernel identity suite (products, involutions, covariance, u_theta).
    Identities(IdentityArgs),
    /// Deformed n-point functional on configured packets.
    Npoint(NpointArgs),
    /// Wedge locality experiment.
    Locality(LocalityArgs),
    /// Deformed two-particle S-matrix element.
    Smatrix(SmatrixArgs),
    /// Commutative-limit sweep over twist scales.
    Limit(LimitArgs),
    /// Twisted Wick sum against the truncated-Fock oracle.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long = "kappa-e", allow_hyphen_values = true)]
    kappa_e: f64,
    #[arg(long = "kappa-m", allow_hyphen_values = true)]
    kappa_m: f64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit nonzero if any residual exceeds its tolerance.
    #[arg(long, default_value_t = false)]
    check: bool,
}

#[derive(Args)]
struct IdentityArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NpointArgs {
    /// JSON file: {"factors": [[packet, ...], ...], "theta": {...},
    ///  "mass": m, "cutoff": P, "nodes": n, "quality": q}
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct LocalityArgs {
    /// JSON file with a locality configuration; the canonical run when
    /// omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SmatrixArgs {
    /// Four comma-separated components per momentum.
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    p: FourVector,
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    q: FourVector,
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    pp: FourVector,
    #[arg(long, value_parser = parse_vec4, allow_hyphen_values = true)]
    qp: FourVector,
    /// Inline theta specification JSON.
    #[arg(long)]
    theta: String,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Undeformed model: "unit" or "phase:c,s0".
    #[arg(long, default_value = "unit")]
    s0: String,
}

#[derive(Args)]
struct LimitArgs {
    /// Comma-separated twist scales.
    #[arg(long, default_value = "1,0.5,0.25,0.125")]
    scales: String,
    #[arg(long = "kappa-e", default_value_t = 0.16, allow_hyphen_values = true)]
    kappa_e: f64,
    #[arg(long = "kappa-m", default_value_t = 0.1, allow_hyphen_values = true)]
    kappa_m: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 6.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 8)]
    nodes: usize,
    #[arg(long, default_value_t = 0.55)]
    quality: f64,
    /// Optional CSV table of the sweep rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "lattice-nodes", default_value_t = 5)]
    lattice_nodes: usize,
    #[arg(long, default_value_t = 3.0)]
    cutoff: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    configs: usize,
}

fn parse_vec4(s: &str) -> Result<FourVector, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad four-vector '{s}': {e}"))?;
    if parts.len() != 4 {
        return Err(format!("expected 4 components, got {}", parts.len()));
    }
    Ok(FourVector::new(parts[0], parts[1], parts[2], parts[3]))
}

#[derive(serde::Deserialize, Serialize, Clone)]
struct NpointConfig {
    factors: Vec<Vec<PacketSpec>>,
    theta: ThetaSpec,
    #[serde(default = "default_mass")]
    mass: f64,
    #[serde(default = "default_cutoff")]
    cutoff: f64,
    #[serde(default = "default_nodes")]
    nodes: usize,
    #[serde(default = "default_quality")]
    quality: f64,
}

fn default_mass() -> f64 {
    1.0
}
fn default_cutoff() -> f64 {
    6.0
}
fn default_nodes() -> usize {
    8
}
fn default_quality() -> f64 {
    1.0
}

enum Failure {
    Config(String),
    Numerical(String),
}

fn numerical<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Numerical(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output.clone();
    match run(cli) {
        Ok(doc) => {
            emit(&out, &doc);
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            emit(&out, &json!({"error": "config", "message": msg}).to_string());
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            emit(&out, &json!({"error": "numerical", "message": msg}).to_string());
            ExitCode::from(3)
        }
    }
}

fn emit(path: &Option<PathBuf>, doc: &str) {
    match path {
        Some(p) => std::fs::write(p, format!("{doc}\n")).expect("write output file"),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{doc}").expect("write stdout");
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Orbit(args) => {
            let params = OrbitParams::new(args.kappa_e, args.kappa_m);
            let report = orbit_suite(args.seed, &params, args.samples).map_err(numerical)?;
            if args.check {
                let ok = report.max_invariant_residual < 1e-10
                    && (params.is_degenerate() || report.max_section_residual < 1e-8)
                    && report.w4_min_slack > -1e-12;
                if !ok {
                    return Err(Failure::Numerical(format!(
                        "orbit residuals out of tolerance: {}",
                        serde_json::to_string(&report).unwrap()
                    )));
                }
            }
            Ok(serde_json::to_string_pretty(&report).unwrap())
        }
        Command::Identities(args) => {
            let report =
                identity_suite(args.seed, args.samples, args.pairs).map_err(numerical)?;
            if report.max_residual >= 1e-12 || report.continuity_violations > 0 {
                return Err(Failure::Numerical(format!(
                    "identity residuals out of tolerance: {}",
                    serde_json::to_string(&report).unwrap()
                )));
            }
            Ok(serde_json::to_string_pretty(&report).unwrap())
        }
        Command::Npoint(args) => {
            let raw = std::fs::read_to_string(&args.config)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let config: NpointConfig =
                serde_json::from_str(&raw).map_err(|e| Failure::Config(e.to_string()))?;
            let (theta, _) = config.theta.resolve().map_err(numerical)?;
            let mut factors = Vec::new();
            for specs in &config.factors {
                factors.push(function_from_specs(specs).ok_or_else(|| {
                    Failure::Config("every factor needs at least one packet".into())
                })?);
            }
            let degree = factors.len();
            let mu = MassShellMeasure::new(config.mass, config.cutoff, config.nodes)
                .map_err(numerical)?
                .with_quality(config.quality);
            let poly = TensorPoly::from_tensor(TwistedTensor::plain(factors))
                .u_theta(&theta)
                .map_err(numerical)?;
            let (value, estimate) = vacuum_functional(&poly, &mu).map_err(numerical)?;
            Ok(serde_json::to_string_pretty(&json!({
                "config": config,
                "degree": degree,
                "value": [value.re, value.im],
                "estimate": estimate,
            }))
            .unwrap())
        }
        Command::Locality(args) => {
            let config = match &args.config {
                Some(path) => {
                    let raw = std::fs::read_to_string(path)
                        .map_err(|e| Failure::Config(e.to_string()))?;
                    serde_json::from_str::<LocalityConfig>(&raw)
                        .map_err(|e| Failure::Config(e.to_string()))?
                }
                None => LocalityConfig::default(),
            };
            let report = wedge_locality_experiment(&config).map_err(numerical)?;
            Ok(serde_json::to_string_pretty(&report).unwrap())
        }
        Command::Smatrix(args) => {
            let spec: ThetaSpec = serde_json::from_str(&args.theta)
                .map_err(|e| Failure::Config(format!("bad theta spec: {e}")))?;
            let (theta, params) = spec.resolve().map_err(numerical)?;
            let undeformed = parse_model(&args.s0)?;
            let input = SMatrixInput {
                mass: args.mass,
                p: args.p,
                q: args.q,
                p_prime: args.pp,
                q_prime: args.qp,
                theta,
                params,
                undeformed,
            };
            let ordering = wedge_ordering_check(&input.p, &input.q, &theta, &params)
                .map_err(numerical)?
                && wedge_ordering_check(&input.p_prime, &input.q_prime, &theta, &params)
                    .map_err(numerical)?;
            let value = deformed_s_matrix_element(&input).map_err(numerical)?;
            let shift = -0.5
                * (theta.bilinear(&input.p, &input.q)
                    + theta.bilinear(&input.p_prime, &input.q_prime));
            Ok(serde_json::to_string_pretty(&json!({
                "theta": spec,
                "mass": args.mass,
                "value": [value.re, value.im],
                "phaseShift": shift,
                "ordering": ordering,
            }))
            .unwrap())
        }
        Command::Limit(args) => {
            let scales: Vec<f64> = args
                .scales
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Config(format!("bad scales: {e}")))?;
            let params = OrbitParams::new(args.kappa_e, args.kappa_m);
            let theta = NoncommMatrix::reference(&params);
            let mu = MassShellMeasure::new(args.mass, args.cutoff, args.nodes)
                .map_err(numerical)?
                .with_quality(args.quality);
            let rows = limit_sweep(&theta, &scales, &mu).map_err(numerical)?;
            if let Some(csv) = &args.csv {
                let mut table = String::from("scale,value_re,value_im,delta,estimate\n");
                for r in &rows {
                    table.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.scale, r.value[0], r.value[1], r.delta, r.estimate
                    ));
                }
                std::fs::write(csv, table).map_err(|e| Failure::Config(e.to_string()))?;
            }
            // JSON Lines: a header echo followed by one row per scale
            let mut lines = vec![json!({
                "kappaE": args.kappa_e,
                "kappaM": args.kappa_m,
                "mass": args.mass,
                "cutoff": args.cutoff,
                "nodes": args.nodes,
                "quality": args.quality,
                "scales": scales,
            })
            .to_string()];
            for r in &rows {
                lines.push(serde_json::to_string(r).unwrap());
            }
            Ok(lines.join("\n"))
        }
        Command::Oracle(args) => {
            let mu = MassShellMeasure::fixed_grid(args.mass, args.cutoff, args.lattice_nodes);
            let lattice = FockLattice::from_measure(&mu).map_err(numerical)?;
            let rows = wedgefield_core::oracle_comparison(args.seed, args.configs, &mu, &lattice)
                .map_err(numerical)?;
            let worst = rows
                .iter()
                .map(|r| r.relative_difference)
                .fold(0.0, f64::max);
            Ok(serde_json::to_string_pretty(&json!({
                "latticeNodes": args.lattice_nodes,
                "cutoff": args.cutoff,
                "mass": args.mass,
                "seed": args.seed,
                "configs": args.configs,
                "worst_relative_difference": worst,
                "cases": rows,
            }))
            .unwrap())
        }
    }
}

fn parse_model(s: &str) -> Result<SMatrixModel, Failure> {
    if s == "unit" {
        return Ok(SMatrixModel::Unit);
    }
    if let Some(rest) = s.strip_prefix("phase:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(c), Ok(s0)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
                return Ok(SMatrixModel::Phase { c, s0 });
            }
        }
    }
    Err(Failure::Config(format!(
        "undeformed model must be 'unit' or 'phase:c,s0', got '{s}'"
    )))
}
