//! `fdc`: build branch networks, compute and certify optimal consensus
//! weights, and regenerate the comparison experiments.

mod output;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fdc_core::experiments::{
    certify_branch, default_spectrum_sweep, fig15, simulate_star, table1, verify_spectra, STAR_BRANCHES,
};
use fdc_core::optimizer::{closed_form_candidate, minimize_slem, OptConfig};
use fdc_core::spectral::{eig_sym, slem, stratify};
use fdc_core::topology::{compose_star, BranchKind, GraphJson};
use fdc_core::weighting::{closed_form_internal_edges, closed_form_weights, WeightFile};
use fdc_core::{
    build_branch, BranchSpec, Edge, EdgeWeights, FdcError, InitDistribution, Network, SimConfig, WeightMatrix,
    WeightingMethod,
};

use output::{Format, Output};

/// Exit status for numerical non-convergence. Results are still written.
const EXIT_NOT_CONVERGED: u8 = 3;
/// Exit status for an invalid manifest (bad arguments, specs or inputs).
const EXIT_INVALID: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdc", version, about = "Optimal consensus weights for network branches")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct BranchArgs {
    /// path, lollipop, semi-complete, ladder or palm.
    #[arg(long)]
    kind: Option<BranchKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

impl BranchArgs {
    fn spec(&self) -> anyhow::Result<BranchSpec> {
        let kind = self.kind.context("--kind is required")?;
        Ok(BranchSpec::from_parts(kind, self.m, self.n, self.n1, self.n2, self.k)?)
    }
}

#[derive(Debug, Args, Clone)]
struct NetworkArgs {
    #[command(flatten)]
    branch: BranchArgs,
    /// Attach this many copies of the branch to one hub; without it the
    /// branch stands alone.
    #[arg(long)]
    count: Option<usize>,
    /// Read the network from a graph JSON file instead.
    #[arg(long, conflicts_with = "kind")]
    graph: Option<PathBuf>,
}

impl NetworkArgs {
    fn network(&self) -> anyhow::Result<Network> {
        if let Some(path) = &self.graph {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let graph: GraphJson = serde_json::from_str(&text).map_err(FdcError::from)?;
            return Ok(graph.to_network()?);
        }
        let spec = self.branch.spec()?;
        Ok(match self.count {
            Some(c) => compose_star(&spec, c)?,
            None => Network::standalone(&spec)?,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FreeEdges {
    /// Every edge weight is optimized.
    All,
    /// Closed forms inside branches; bridges and core edges are optimized.
    Bridges,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a branch or star network and print its graph JSON.
    Build(NetworkArgs),
    /// Spectrum and SLEM of a weighted network.
    Slem {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, default_value = "optimal")]
        weights: WeightingMethod,
        /// Weight JSON file; overrides --weights.
        #[arg(long)]
        weights_file: Option<PathBuf>,
    },
    /// Stratified block form of a branch with a one-node stub.
    Stratify {
        #[command(flatten)]
        branch: BranchArgs,
        /// Weight of the bridge into the stub.
        #[arg(long, default_value_t = 0.5)]
        bridge: f64,
    },
    /// Minimize the SLEM numerically.
    Optimize {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, value_enum, default_value = "all")]
        free: FreeEdges,
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
        /// Skip the interior-point refinement after the subgradient phase.
        #[arg(long)]
        no_polish: bool,
    },
    /// Certify closed-form weights of a branch attached to a random core.
    Certify {
        #[command(flatten)]
        branch: BranchArgs,
        #[arg(long, default_value_t = 4)]
        core_nodes: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Added to every branch-internal candidate weight.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        tamper: f64,
    },
    /// SLEM of the five ten-node branches under all weighting methods.
    Table1,
    /// Compare closed-form spectra with their predicted multisets.
    VerifySpectra {
        /// Also report the SLEM with every weight optimized.
        #[arg(long)]
        optimize: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Monte-Carlo convergence curves.
    Simulate {
        #[command(flatten)]
        branch: BranchArgs,
        #[arg(long, default_value_t = STAR_BRANCHES)]
        count: usize,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "optimal,metropolis,maxdeg,bestconst")]
        methods: Vec<WeightingMethod>,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// uniform, normal or constant:<value>.
        #[arg(long, default_value = "uniform")]
        init: String,
        /// Compare the five ten-node branches under optimal weights instead.
        #[arg(long)]
        fig15: bool,
    },
}

fn parse_init(text: &str) -> anyhow::Result<InitDistribution> {
    match text {
        "uniform" => Ok(InitDistribution::Uniform01),
        "normal" => Ok(InitDistribution::StandardNormal),
        other => match other.strip_prefix("constant:") {
            Some(v) => Ok(InitDistribution::Constant(v.parse().context("constant init value")?)),
            None => Err(FdcError::InvalidSpec(format!("unknown init distribution {other:?}")).into()),
        },
    }
}

fn weights_from_file(path: &PathBuf, network: &Network) -> anyhow::Result<WeightMatrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = WeightFile::from_json(&text)?;
    let edges = file.to_edge_weights(network)?;
    Ok(WeightMatrix::from_edge_weights(network.node_count, &edges)?)
}

/// Runs the command; `Ok(false)` means results were written but a solver
/// did not converge.
fn run(cli: &Cli, out: &Output) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Build(args) => {
            let net = args.network()?;
            let graph = GraphJson::from_network(&net);
            match out.format(Format::Json) {
                Format::Json => out.json(serde_json::to_value(&graph)?)?,
                Format::Csv => {
                    let mut csv = String::from("u,v,orbit\n");
                    for [u, v] in &graph.edges {
                        let orbit = graph.orbits.get(&Edge::new(*u, *v).key()).copied().unwrap_or_default();
                        csv.push_str(&format!("{u},{v},{orbit}\n"));
                    }
                    out.csv(&csv)?;
                }
            }
        }
        Command::Slem {
            net,
            weights,
            weights_file,
        } => {
            let network = net.network()?;
            let w = match weights_file {
                Some(path) => weights_from_file(path, &network)?,
                None => weights.matrix(&network)?,
            };
            let spectrum = eig_sym(&w)?;
            let report = slem(&spectrum)?;
            match out.format(Format::Json) {
                Format::Csv => out.csv(&spectrum.to_csv())?,
                Format::Json => out.json(serde_json::json!({
                    "slem": report.slem,
                    "side": report.side,
                    "spectral_gap": report.spectral_gap,
                    "eigenvalues": spectrum.eigenvalues,
                }))?,
            }
        }
        Command::Stratify { branch, bridge } => {
            let spec = branch.spec()?;
            let b = build_branch(&spec)?;
            let form = stratify(&b, &closed_form_weights(&b), *bridge)?;
            match out.format(Format::Json) {
                Format::Json => out.json(form.to_json())?,
                Format::Csv => {
                    let mut csv = String::from("eigenvalue,multiplicity\n");
                    for (v, k) in &form.decoupled {
                        csv.push_str(&format!("{v:.16e},{k}\n"));
                    }
                    out.csv(&csv)?;
                }
            }
        }
        Command::Optimize {
            net,
            free,
            max_iters,
            no_polish,
        } => {
            let network = net.network()?;
            let config = OptConfig {
                max_iters: *max_iters,
                record_history: true,
                polish: !no_polish,
                ..OptConfig::default()
            };
            let result = match free {
                FreeEdges::All => {
                    let all: BTreeSet<Edge> = network.edges.iter().copied().collect();
                    minimize_slem(&network, &EdgeWeights::new(), &all, &config)?
                }
                FreeEdges::Bridges => {
                    if closed_form_internal_edges(&network).len() == network.edges.len() {
                        bail!(FdcError::InvalidSpec("network has no bridge or core edges to optimize".into()));
                    }
                    closed_form_candidate(&network, &config)?.0
                }
            };
            match out.format(Format::Json) {
                Format::Json => out.json(result.to_json(&network))?,
                Format::Csv => out.csv(&result.trace_csv())?,
            }
            return Ok(result.converged);
        }
        Command::Certify {
            branch,
            core_nodes,
            tol,
            tamper,
        } => {
            let spec = branch.spec()?;
            let outcome = certify_branch(&spec, *core_nodes, cli.seed, *tol, *tamper, &OptConfig::default())?;
            out.json(outcome.to_json())?;
            return Ok(outcome.report.starts.iter().all(|s| s.converged));
        }
        Command::Table1 => {
            let table = table1()?;
            match out.format(Format::Csv) {
                Format::Csv => out.csv(&table.to_csv())?,
                Format::Json => out.json(serde_json::to_value(&table)?)?,
            }
        }
        Command::VerifySpectra { optimize, tol } => {
            let checks = verify_spectra(&default_spectrum_sweep(), *optimize)?;
            match out.format(Format::Csv) {
                Format::Json => out.json(serde_json::to_value(&checks)?)?,
                Format::Csv => {
                    let mut csv = String::from(
                        "network,predicted_slem,computed_slem,slem_deviation,multiset_deviation,\
                         predicted_zeros,predicted_total_zeros,observed_zeros,optimized_slem,within_tol\n",
                    );
                    for c in &checks {
                        let name = serde_json::to_string(&c.network)?.replace('"', "'");
                        let optimized = c.optimized_slem.map(|v| format!("{v:.12e}")).unwrap_or_default();
                        csv.push_str(&format!(
                            "\"{name}\",{:.12e},{:.12e},{:.3e},{:.3e},{},{},{},{optimized},{}\n",
                            c.predicted_slem,
                            c.computed_slem,
                            c.slem_deviation,
                            c.multiset_deviation,
                            c.predicted_zeros,
                            c.predicted_total_zeros,
                            c.observed_zeros,
                            c.multiset_deviation <= *tol && c.slem_deviation <= *tol,
                        ));
                    }
                    out.csv(&csv)?;
                }
            }
        }
        Command::Simulate {
            branch,
            count,
            methods,
            steps,
            trials,
            init,
            fig15: fifteen,
        } => {
            let config = SimConfig {
                steps: *steps,
                trials: *trials,
                seed: cli.seed,
                init: parse_init(init)?,
            };
            let result = if *fifteen {
                fig15(&config)?
            } else {
                simulate_star(&branch.spec()?, *count, methods, &config)?
            };
            match out.format(Format::Csv) {
                Format::Csv => out.csv(&result.to_csv())?,
                Format::Json => out.json(serde_json::to_value(&result)?)?,
            }
        }
    }
    Ok(true)
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("FDC_THREADS") {
        let threads: usize = value
            .parse()
            .map_err(|_| FdcError::InvalidSpec(format!("FDC_THREADS must be a positive integer, got {value:?}")))?;
        if threads == 0 {
            bail!(FdcError::InvalidSpec("FDC_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn is_invalid_manifest(err: &anyhow::Error) -> bool {
    match err.downcast_ref::<FdcError>() {
        Some(FdcError::ConvergenceFailure { .. } | FdcError::NotStochasticSpectrum(_)) => false,
        Some(_) => true,
        None => err.downcast_ref::<std::io::Error>().is_some() || err.chain().any(|c| c.is::<std::num::ParseFloatError>()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line = std::iter::once("fdc".to_string())
        .chain(std::env::args().skip(1))
        .collect::<Vec<_>>()
        .join(" ");
    let out = Output::new(cli.out.clone(), cli.format, command_line, cli.seed);
    let result = configure_threads().and_then(|()| run(&cli, &out));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: optimizer did not reach its tolerance; results were written anyway");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_invalid_manifest(&err) {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
