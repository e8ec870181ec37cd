use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use adhoc_edp::bench::{
    emit_plots, generate_instance, instance_seed, read_histogram, read_summary, replay, run_sweep,
    BenchError, EpisodeLog, PrecomputeCache, SweepConfig,
};

#[derive(Parser)]
#[command(version, about = "Tool-fetching benchmark for EDP-based query planning")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, env = "ADHOC_EDP_OUT", default_value = "out", global = true)]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Sweep config file (TOML). Overrides --profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in profile: desk or paper.
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SweepConfig, BenchError> {
        let mut c = match &self.config {
            Some(path) => SweepConfig::load(path)?,
            None => SweepConfig::profile(&self.profile)
                .ok_or_else(|| BenchError::Config(format!("unknown profile '{}'", self.profile)))?,
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.instances {
            c.instances = n;
        }
        if let Some(n) = self.episodes {
            c.episodes_per_instance = n;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances as JSON layouts.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
    },
    /// Build and save the EDP / divergence tables for every instance.
    Precompute {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "cache")]
        out: PathBuf,
    },
    /// Run the planner sweep and write CSV results.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        /// Keep replayable logs for the first N instances.
        #[arg(long, default_value_t = 1)]
        log_instances: usize,
    },
    /// Render plot data from a sweep directory.
    Plot {
        #[arg(long, default_value = "sweep")]
        input: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Re-run logged episodes and compare decision traces.
    Replay {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "sweep/episodes.jsonl")]
        log: PathBuf,
        /// Replay only this line of the log.
        #[arg(long)]
        index: Option<usize>,
    },
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let root = cli.out_root;
    match cli.command {
        Command::Gen { config, out } => {
            let c = config.load()?;
            let dir = resolve(&root, &out);
            std::fs::create_dir_all(&dir)?;
            for id in 0..c.instances {
                let inst = generate_instance(&c, instance_seed(&c, id))?;
                let path = dir.join(format!("instance_{id:04}.json"));
                std::fs::write(&path, serde_json::to_string_pretty(inst.layout())?)?;
            }
            println!("wrote {} instances to {}", c.instances, dir.display());
        }
        Command::Precompute { config, out } => {
            let c = config.load()?;
            let dir = resolve(&root, &out);
            std::fs::create_dir_all(&dir)?;
            let started = Instant::now();
            for id in 0..c.instances {
                let inst = generate_instance(&c, instance_seed(&c, id))?;
                let t = Instant::now();
                let cache = PrecomputeCache::build(&inst, &c.edp_config())
                    .map_err(|source| BenchError::Precompute { instance: id, source })?;
                cache.save(&dir.join(format!("instance_{id:04}.cache")))?;
                println!("instance {id}: {} in {:.3}s", cache.digest_hex(), t.elapsed().as_secs_f64());
            }
            println!("precompute total {:.3}s", started.elapsed().as_secs_f64());
        }
        Command::Sweep {
            config,
            out,
            log_instances,
        } => {
            let c = config.load()?;
            let dir = resolve(&root, &out);
            let started = Instant::now();
            let output = run_sweep(&c, log_instances)?;
            output.write(&dir)?;
            std::fs::write(dir.join("config.toml"), c.to_toml())?;
            for s in &output.summary {
                println!(
                    "{:<28} cost {:.1} {:<16} marginal {:.3} ± {:.3}  queries {:>5}  p {:.3}",
                    s.prior.name(),
                    s.per_station_cost,
                    s.planner.name(),
                    s.mean_marginal_cost,
                    s.se_marginal_cost,
                    s.total_queries,
                    s.sign_test_p
                );
            }
            let pre: f64 = output.timing.precompute_secs.iter().sum();
            println!(
                "{} rows, {} failed cells; precompute {:.2}s, max decision {:.4}s, wall {:.1}s",
                output.rows.len(),
                output.failures.len(),
                pre,
                output.timing.max_decision_secs(),
                started.elapsed().as_secs_f64()
            );
        }
        Command::Plot { input, out } => {
            let input = resolve(&root, &input);
            let summary = read_summary(&input.join("summary.csv"))?;
            let histogram = read_histogram(&input.join("histogram.csv"))?;
            for f in emit_plots(&summary, &histogram, &resolve(&root, &out))? {
                println!("{}", f.display());
            }
        }
        Command::Replay { config, log, index } => {
            let c = config.load()?;
            let text = std::fs::read_to_string(resolve(&root, &log))?;
            let logs: Vec<EpisodeLog> = text
                .lines()
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()?;
            let picked: Vec<(usize, &EpisodeLog)> = match index {
                Some(i) => vec![(
                    i,
                    logs.get(i)
                        .ok_or_else(|| BenchError::Config(format!("log has {} lines", logs.len())))?,
                )],
                None => logs.iter().enumerate().collect(),
            };
            let mut mismatches = 0;
            for (i, l) in picked {
                let outcome = replay(&c, l, None)?;
                match outcome.first_mismatch {
                    None => println!("episode {i}: identical ({} decisions)", l.decisions.len()),
                    Some(at) => {
                        mismatches += 1;
                        println!("episode {i}: differs at decision {at}");
                    }
                }
            }
            if mismatches > 0 {
                return Err(BenchError::Config(format!("{mismatches} episodes did not replay")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                BenchError::Config(_) => 2,
                BenchError::Precompute { .. } => 3,
                BenchError::Io(_) | BenchError::Csv(_) | BenchError::Json(_) | BenchError::Cache(_) => 4,
                _ => 1,
            })
        }
    }
}
