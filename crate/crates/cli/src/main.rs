use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrtwin_core::agents::{RunOptions, Variant};
use vrtwin_core::config::SimConfig;
use vrtwin_core::harness::{self, HarnessError};

#[derive(Parser)]
#[command(name = "vrtwin", version, about = "Twin-driven resource allocation for attention-based VR streaming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (may `include` a preset).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset used when no file is given: paper-table1 or desk-scale.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; defaults to $VRTWIN_OUT_DIR or ./runs.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Ignore the configured trace directory and synthesize gaze.
    #[arg(long)]
    synthetic: bool,
}

impl Common {
    fn config(&self) -> Result<SimConfig, HarnessError> {
        harness::load_config(self.config.as_deref(), self.preset.as_deref())
    }

    fn out(&self) -> PathBuf {
        harness::resolve_out_dir(self.out_dir.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant and write per-slot, per-round and summary files.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "fper")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
    },
    /// Run several variants over several seeds and tabulate final-window results.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "fper,per,cddpg,offline_ddpg,avg_alloc,fixed_2k")]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
    },
    /// Vary one parameter and record run metrics per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of beta1, beta2, mu, t_th, hfqoe_th, omega, users, f_max, b_max.
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "avg_alloc")]
        variant: Variant,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        rounds: usize,
    },
    /// Time training steps per variant and user count.
    BenchOptime {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "fper,per,cddpg")]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        users: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Turn gaze traces (or synthetic gaze) into per-GoP attention profiles.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Directory of gaze trace files; omit with --synthetic.
        #[arg(long)]
        gaze_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        slots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { common, variant, seed, rounds } => {
            let cfg = common.config()?;
            let gaze = harness::gaze_input(&cfg, common.synthetic)?;
            let out = common.out();
            let summary = harness::cmd_run(&cfg, &RunOptions { variant, seed, rounds, gaze }, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            eprintln!("wrote {}", out.display());
        }
        Command::Compare { common, variants, seeds, rounds } => {
            let cfg = common.config()?;
            let gaze = harness::gaze_input(&cfg, common.synthetic)?;
            let out = common.out();
            let rows = harness::cmd_compare(&cfg, &variants, &seeds, rounds, &gaze, Some(&out))?;
            println!("{:<14} {:>5} {:>12} {:>10} {:>8} {:>10} {:>9} {:>7}", "variant", "runs", "reward", "ci95", "success", "latency", "qoe", "hfqoe");
            for r in rows {
                println!(
                    "{:<14} {:>5} {:>12.4} {:>10.4} {:>8.4} {:>10.5} {:>9.4} {:>7.4}",
                    r.variant.name(),
                    r.runs,
                    r.reward,
                    r.reward_ci95,
                    r.success_rate,
                    r.mean_latency,
                    r.mean_qoe,
                    r.hfqoe
                );
            }
        }
        Command::Sweep { common, parameter, values, variant, seeds, rounds } => {
            let cfg = common.config()?;
            let out = common.out();
            let rows = harness::cmd_sweep(&cfg, &parameter, &values, variant, &seeds, rounds, Some(&out))?;
            println!("{:>12} {:>6} {:>12} {:>10} {:>8} {:>9}", parameter, "seed", "reward", "latency", "success", "qoe");
            for r in rows {
                println!(
                    "{:>12} {:>6} {:>12.4} {:>10.5} {:>8.4} {:>9.4}",
                    r.value, r.seed, r.mean_reward, r.mean_latency, r.success_rate, r.mean_qoe
                );
            }
        }
        Command::BenchOptime { common, variants, users, steps } => {
            let cfg = common.config()?;
            let out = common.out();
            let rows = harness::cmd_bench_optime(&cfg, &variants, &users, steps, Some(&out))?;
            println!("{:<8} {:>5} {:>6} {:>10} {:>10}", "variant", "users", "steps", "mean_ms", "std_ms");
            for r in rows {
                println!("{:<8} {:>5} {:>6} {:>10.4} {:>10.4}", r.variant.name(), r.users, r.steps, r.mean_ms, r.std_ms);
            }
        }
        Command::Ingest { common, gaze_dir, slots, seed } => {
            let cfg = common.config()?;
            let dir: Option<&Path> = match (&gaze_dir, common.synthetic) {
                (_, true) => None,
                (Some(d), false) => Some(d),
                (None, false) if !cfg.attention.trace_dir.is_empty() => Some(Path::new(&cfg.attention.trace_dir)),
                (None, false) => {
                    return Err(HarnessError::Usage("ingest needs --gaze-dir or --synthetic".into()));
                }
            };
            let out = common.out();
            let rows = harness::cmd_ingest(&cfg, dir, slots, seed, Some(&out))?;
            eprintln!("wrote {} profiles to {}", rows.len(), out.join("attention.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
