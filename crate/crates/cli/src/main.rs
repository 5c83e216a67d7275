use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use banzhaf_core::experiment::{run_experiment, ExperimentSpec, RunOptions};
use banzhaf_core::simplex::parse_vector;
use banzhaf_core::solver::BestWeightsPolicy;
use banzhaf_core::{
    build_exact_oracle, build_sampled_atlas, fmt_sig, nearest, raw_banzhaf, run,
    sample_ordered_simplex, BanzhafAtlas, Error, Omega0Mode, SampleRng, SolverConfig, SolverRun,
    TargetVector, Variant, WeightedVotingGame,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Banzhaf power indices and the inverse power problem.
#[derive(Parser)]
#[command(name = "banzhaf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Raw and normalized Banzhaf index of a game literal, e.g. "0.5; 0.6,0.3,0.1".
    Power {
        #[arg(long)]
        game: String,
    },
    /// Draw targets uniformly from the ordered simplex as CSV.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for weights whose power is close to a target.
    Solve(SolveArgs),
    /// Enumerate every attainable vector for small n.
    Oracle {
        #[arg(long)]
        n: usize,
        /// Largest integer weight; defaults to 2^n.
        #[arg(long)]
        max_weight: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or query an atlas of attainable vectors.
    #[command(subcommand)]
    Atlas(AtlasCommand),
    /// Run a batch experiment described by a JSON spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every per-sample distance.
        #[arg(long)]
        dump_samples: bool,
        /// Also render SVG plots.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 0.5)]
    quota: f64,
    #[arg(long, default_value = "target")]
    omega0: Omega0Mode,
    #[arg(long, default_value = "base")]
    variant: Variant,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    #[arg(long, default_value_t = banzhaf_core::solver::DEFAULT_MAX_DISTANCE)]
    max_distance: f64,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report the post-update weights of the best iteration, as the restart
    /// pseudocode assigns them.
    #[arg(long)]
    literal_best: bool,
}

#[derive(Subcommand)]
enum AtlasCommand {
    /// Collect the vectors seen by solver runs on random targets.
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        quota: f64,
        /// Stop after this many consecutive samples add nothing.
        #[arg(long, default_value_t = 250)]
        stability: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "target")]
        omega0: Omega0Mode,
        #[arg(long, default_value = "restart")]
        variant: Variant,
        #[arg(long, default_value_t = 50)]
        max_iterations: usize,
        #[arg(long)]
        max_samples: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest stored vector to a target.
    Query {
        #[arg(long)]
        atlas: PathBuf,
        #[arg(long)]
        target: String,
    },
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &serde_json::Value) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_trace(path: &Path, result: &SolverRun) -> anyhow::Result<()> {
    let n = result.target.n();
    let mut out = output(Some(path))?;
    let w: Vec<String> = (1..=n).map(|i| format!("w_{i}")).collect();
    let b: Vec<String> = (1..=n).map(|i| format!("beta_{i}")).collect();
    writeln!(out, "iter,action,distance,{},{}", w.join(","), b.join(","))?;
    for r in &result.trace {
        let cells: Vec<String> = r
            .weights_before
            .iter()
            .chain(&r.power.values)
            .map(|&x| fmt_sig(x, 17))
            .collect();
        writeln!(
            out,
            "{},{},{},{}",
            r.index,
            r.action,
            fmt_sig(r.distance, 17),
            cells.join(",")
        )?;
    }
    out.flush()?;
    Ok(())
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let target = TargetVector::new(parse_vector(&args.target)?)?;
    let policy = if args.literal_best {
        BestWeightsPolicy::PostUpdate
    } else {
        BestWeightsPolicy::Measured
    };
    let config = SolverConfig::new(args.quota)
        .with_omega0(args.omega0)
        .with_variant(args.variant)
        .with_max_iterations(args.max_iterations)
        .with_max_distance(args.max_distance)
        .with_best_weights(policy);
    let result = run(&target, &config)?;
    if let Some(path) = &args.trace {
        write_trace(path, &result)?;
    }
    print_json(&json!({
        "bestWeights": result.best_weights,
        "bestPower": result.best_power.values,
        "bestDistance": result.best_distance,
        "stopReason": result.stop_reason.to_string(),
        "iterations": result.iterations(),
    }))
}

fn write_atlas(atlas: &BanzhafAtlas, path: Option<&Path>) -> anyhow::Result<()> {
    let mut out = output(path)?;
    atlas.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Power { game } => {
            let game: WeightedVotingGame = game.parse()?;
            let raw = raw_banzhaf(&game)?;
            print_json(&json!({
                "swings": raw.counts,
                "denominator": raw.denominator,
                "raw": raw.raw_index(),
                "normalized": raw.normalized().values,
            }))
        }
        Command::Sample {
            n,
            count,
            seed,
            out,
        } => {
            if n == 0 {
                bail!("n must be at least 1");
            }
            let samples: Vec<TargetVector> = (0..count)
                .map(|i| sample_ordered_simplex(n, &mut SampleRng::for_sample(seed, i as u64)))
                .collect();
            let mut w = output(out.as_deref())?;
            banzhaf_core::simplex::write_samples_csv(&mut w, &samples)?;
            w.flush()?;
            Ok(())
        }
        Command::Solve(args) => solve(args),
        Command::Oracle { n, max_weight, out } => {
            let max_weight = max_weight.unwrap_or(1 << n.min(16));
            write_atlas(&build_exact_oracle(n, max_weight)?, out.as_deref())
        }
        Command::Atlas(AtlasCommand::Build {
            n,
            quota,
            stability,
            seed,
            omega0,
            variant,
            max_iterations,
            max_samples,
            out,
        }) => {
            let config = SolverConfig::new(quota)
                .with_omega0(omega0)
                .with_variant(variant)
                .with_max_iterations(max_iterations);
            let build = build_sampled_atlas(n, &config, seed, stability, max_samples)?;
            write_atlas(&build.atlas, Some(&out))?;
            eprintln!(
                "{} vectors from {} samples{}",
                build.atlas.len(),
                build.samples,
                if build.stable {
                    ""
                } else {
                    " (sample cap reached before stability)"
                }
            );
            Ok(())
        }
        Command::Atlas(AtlasCommand::Query { atlas, target }) => {
            let file =
                File::open(&atlas).with_context(|| format!("opening {}", atlas.display()))?;
            let atlas = BanzhafAtlas::read_from(BufReader::new(file))?;
            let (v, d) = nearest(&atlas, &parse_vector(&target)?)?;
            print_json(&json!({ "nearest": v.values, "distance": d }))
        }
        Command::Experiment {
            spec,
            out,
            dump_samples,
            svg,
        } => {
            let spec = ExperimentSpec::load(&spec)?;
            spec.validate()?;
            let manifest = run_experiment(&spec, &out, RunOptions { dump_samples, svg })?;
            for file in &manifest.files {
                println!("{}", out.join(file).display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::InvalidSpec(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
