//! Command-line front end: dataset generation, pipeline runs, the
//! brute-force oracle, coverage reports, and the benchmark harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topsim::bench;
use topsim::metrics::{FourierParams, MetricWeights};
use topsim::pipeline::{
    self, generate_synthetic, GeneratorProfile, GeneratorSpec, PipelineConfig, PipelineError,
    SampleMode, SiMembers,
};

#[derive(Parser)]
#[command(
    name = "topsim",
    about = "Finds the top-p% highest-similarity polygon clusters without scoring every cluster"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic source/target dataset pair as WKT files.
    Generate(GenerateArgs),
    /// Run the full pipeline and write l_r.csv, features.csv, run_metrics.json.
    Run(RunArgs),
    /// Compute exact similarity indexes for every cluster (scale-guarded).
    Oracle(OracleArgs),
    /// Sweep the pipeline over several top fractions and write report.csv.
    Report(ReportArgs),
    /// Benchmark harness: kernel timings or the SI histogram.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of target geometries (one candidate cluster each).
    #[arg(long, default_value_t = 200)]
    targets: usize,
    /// Mean source members per cluster.
    #[arg(long, default_value_t = 6)]
    members: usize,
    /// Fraction of clusters generated as high-similarity neighborhoods.
    #[arg(long, default_value_t = 0.12)]
    high_fraction: f64,
    /// Vertex noise scale; 0 makes members congruent to their target.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Similarity-index landscape to generate.
    #[arg(long, value_parser = ["separable", "gradient"], default_value = "separable")]
    profile: String,
    /// Output directory for sources.wkt and targets.wkt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CommonRunArgs {
    /// Source dataset (WKT per line).
    #[arg(long)]
    source: PathBuf,
    /// Target dataset (WKT per line).
    #[arg(long)]
    target: PathBuf,
    /// Requested share of highest-SI clusters, in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    top_fraction: f64,
    /// Desired recall, in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    desired_recall: f64,
    /// Pair ids drawn per sample.
    #[arg(long, default_value_t = 800)]
    sample_size: usize,
    /// Class size for labeling and the simulation queue.
    #[arg(long, default_value_t = 400)]
    class_size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Eight comma-separated metric weights summing to 1.
    #[arg(long)]
    weights: Option<String>,
    /// Normalize features by (max - min) instead of the max denominator.
    #[arg(long)]
    range_normalize: bool,
    /// Objects the similarity index averages over.
    #[arg(long, value_parser = ["with-rep", "sources-only"], default_value = "with-rep")]
    si_members: String,
    /// Cluster sampling scheme.
    #[arg(long, value_parser = ["pair-weighted", "uniform"], default_value = "pair-weighted")]
    sample_mode: String,
}

impl CommonRunArgs {
    fn to_config(&self) -> Result<PipelineConfig, PipelineError> {
        let weights = match &self.weights {
            None => MetricWeights::equal(),
            Some(text) => {
                let parts: Vec<f64> = text
                    .split(',')
                    .map(|w| w.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| PipelineError::Config {
                        reason: format!("cannot parse --weights: {e}"),
                    })?;
                let arr: [f64; 8] = parts.try_into().map_err(|v: Vec<f64>| {
                    PipelineError::Config {
                        reason: format!("--weights needs exactly 8 values, got {}", v.len()),
                    }
                })?;
                MetricWeights::new(arr).map_err(PipelineError::Metrics)?
            }
        };
        let cfg = PipelineConfig {
            top_fraction: self.top_fraction,
            desired_recall: self.desired_recall,
            sample_size: self.sample_size,
            class_size: self.class_size,
            weights,
            fourier: FourierParams::default(),
            seed: self.seed,
            range_normalize: self.range_normalize,
            si_members: if self.si_members == "sources-only" {
                SiMembers::SourcesOnly
            } else {
                SiMembers::WithRepresentative
            },
            sample_mode: if self.sample_mode == "uniform" {
                SampleMode::Uniform
            } else {
                SampleMode::PairWeighted
            },
            exhaustive: false,
            oracle_check: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Force the verification budget to the full cluster count.
    #[arg(long)]
    exhaustive: bool,
    /// Also compute the brute-force oracle and report achieved recall.
    #[arg(long)]
    oracle_check: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Override the scale guard.
    #[arg(long)]
    force: bool,
    /// Output directory for oracle.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Comma-separated top fractions to sweep.
    #[arg(long, default_value = "0.1,0.3,0.5")]
    p_values: String,
    /// Also compute achieved recall per run (scale-guarded oracle).
    #[arg(long)]
    oracle_check: bool,
    /// Output directory for report.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    mode: BenchMode,
}

#[derive(Subcommand)]
enum BenchMode {
    /// Time every metric kernel over seeded random pairs.
    Kernels {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory for timings.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact SI histogram in ten bins (scale-guarded).
    Histogram {
        #[command(flatten)]
        common: CommonRunArgs,
        #[arg(long)]
        force: bool,
        /// Output directory for si_histogram.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn ensure_dir(dir: &PathBuf) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Generate(args) => {
            ensure_dir(&args.out)?;
            let spec = GeneratorSpec {
                targets: args.targets,
                members_per_cluster: args.members,
                high_fraction: args.high_fraction,
                noise: args.noise,
                seed: args.seed,
                profile: if args.profile == "gradient" {
                    GeneratorProfile::QualityGradient
                } else {
                    GeneratorProfile::SeparableFamilies
                },
            };
            let (sources, targets) = generate_synthetic(&spec);
            pipeline::write_wkt_file(&args.out.join("sources.wkt"), &sources)?;
            pipeline::write_wkt_file(&args.out.join("targets.wkt"), &targets)?;
            println!(
                "generated {} sources and {} targets in {}",
                sources.len(),
                targets.len(),
                args.out.display()
            );
        }
        Command::Run(args) => {
            let mut cfg = args.common.to_config()?;
            cfg.exhaustive = args.exhaustive;
            cfg.oracle_check = args.oracle_check;
            let (sources, targets) = pipeline::ingest(&args.common.source, &args.common.target)?;
            ensure_dir(&args.out)?;
            let outcome = pipeline::run(&sources, &targets, &cfg, Some(&args.out))?;
            println!(
                "threshold {:.6}; checked {} of {} clusters; {} results",
                outcome.metrics.threshold,
                outcome.metrics.checked,
                outcome.metrics.total_clusters,
                outcome.l_r.len()
            );
            if let Some(recall) = outcome.metrics.achieved_recall_vs_oracle {
                println!("achieved recall vs oracle top set: {recall:.4}");
            }
        }
        Command::Oracle(args) => {
            let cfg = args.common.to_config()?;
            let (sources, targets) = pipeline::ingest(&args.common.source, &args.common.target)?;
            ensure_dir(&args.out)?;
            let oracle = pipeline::brute_force_oracle(&sources, &targets, &cfg, args.force)?;
            let mut out = String::from("cluster_id,similarity_index\n");
            for (id, si) in &oracle {
                out.push_str(&format!("{id},{si}\n"));
            }
            let path = args.out.join("oracle.csv");
            std::fs::write(&path, out).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let top = pipeline::oracle_top_set(&oracle, cfg.top_fraction);
            println!(
                "{} clusters scored; top {:.0}% holds {} clusters",
                oracle.len(),
                cfg.top_fraction * 100.0,
                top.len()
            );
        }
        Command::Report(args) => {
            let mut cfg = args.common.to_config()?;
            cfg.oracle_check = args.oracle_check;
            let p_values: Vec<f64> = if args.p_values.trim().is_empty() {
                Vec::new()
            } else {
                args.p_values
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| PipelineError::Config {
                        reason: format!("cannot parse --p-values: {e}"),
                    })?
            };
            let (sources, targets) = pipeline::ingest(&args.common.source, &args.common.target)?;
            ensure_dir(&args.out)?;
            let rows = bench::sweep(&sources, &targets, &cfg, &p_values)?;
            pipeline::write_report(&args.out.join("report.csv"), &rows)?;
            for r in &rows {
                println!(
                    "p={:.2} checked_fraction={:.4} ratio={:.3}",
                    r.p, r.checked_fraction, r.checked_to_targeted
                );
            }
        }
        Command::Bench(args) => match args.mode {
            BenchMode::Kernels { pairs, seed, out } => {
                ensure_dir(&out)?;
                let timings = bench::time_kernels(pairs, seed);
                bench::write_timings(&out.join("timings.csv"), &timings)?;
                for t in &timings {
                    println!(
                        "{:<26} {:>12.1} ns/op (var {:.1})",
                        t.name, t.mean_ns, t.variance_ns2
                    );
                }
            }
            BenchMode::Histogram { common, force, out } => {
                let cfg = common.to_config()?;
                let (sources, targets) = pipeline::ingest(&common.source, &common.target)?;
                ensure_dir(&out)?;
                let bins = bench::si_histogram(&sources, &targets, &cfg, force)?;
                bench::write_histogram(&out.join("si_histogram.csv"), &bins)?;
                for (k, count) in bins.iter().enumerate() {
                    println!("[{:.1}, {:.1}) {count}", k as f64 / 10.0, (k + 1) as f64 / 10.0);
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
