use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use proactive_cache::experiment::{
    curves_to_csv, learning_curves, rows_to_csv, sweep_capacity, sweep_lifetime, sweep_memory,
    Context, ExperimentConfig, Row, Scheme,
};
use proactive_cache::pg::{dp_oracle, tiny_instance_family};
use proactive_cache::policy::{Policy, ThresholdParams};
use proactive_cache::{CacheError, Result};

#[derive(Parser)]
#[command(
    name = "proactive-cache",
    version,
    about = "Proactive caching experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold tables of the unlimited-cache and non-causal bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Trains one scheme and writes its best parameters.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: String,
        /// Also write the learning curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluates one scheme, optionally from a parameter checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    SweepCapacity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 10, 20, 30, 40])]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    SweepLifetime {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 15, 20, 25])]
        values: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    SweepMemory {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1f64, 0.5, 0.9])]
        p1: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1f64, 0.3, 0.5, 0.7, 0.9])]
        p2: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Learning curves of the trained schemes.
    Curves {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
    /// Solves every tiny instance exactly and checks the optimal policy's structure.
    DpOracle {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.jobs > 0 {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(common.jobs)
            .build_global();
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn schemes(list: &Option<Vec<String>>) -> Result<Vec<Scheme>> {
    match list {
        Some(v) => v.iter().map(|s| Scheme::parse(s)).collect(),
        None => Ok(Scheme::ALL.to_vec()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bounds { common } => {
            let ctx = Context::new(&load(&common)?)?;
            let mut s = format!(
                "# lb_uc thresholds (mW) by remaining lifetime, mean cost {:.6}\n",
                ctx.stats.mean()
            );
            for (l, t) in ctx.uc.by_lifetime.iter().enumerate() {
                s += &format!("{} {:.6}\n", l + 1, t);
            }
            s += "# lb_nck thresholds (mW) by slots until access\n";
            for (g, t) in ctx.nck.by_gap.iter().enumerate() {
                s += &format!("{} {:.6}\n", g + 1, t);
            }
            emit(&common.out, &s)
        }
        Command::Train {
            common,
            scheme,
            curve,
        } => {
            let ctx = Context::new(&load(&common)?)?;
            let out = ctx.train_scheme(Scheme::parse(&scheme)?)?;
            let header = [
                ("scheme", scheme.clone()),
                ("iteration", out.best_iteration.to_string()),
                ("j_estimate", format!("{:.6}", out.best_j)),
            ];
            emit(&common.out, &out.best.to_text(&header))?;
            if let Some(p) = curve {
                let pts: Vec<_> = out
                    .curve
                    .iter()
                    .map(|c| (Scheme::parse(&scheme).expect("parsed above"), *c))
                    .collect();
                fs::write(p, curves_to_csv(&pts))?;
            }
            Ok(())
        }
        Command::Eval {
            common,
            scheme,
            params,
        } => {
            let cfg = load(&common)?;
            let ctx = Context::new(&cfg)?;
            let scheme = Scheme::parse(&scheme)?;
            let result = match params {
                Some(p) => {
                    let (theta, _) = ThresholdParams::from_text(&fs::read_to_string(p)?)?;
                    ctx.run_eval(&Policy::Threshold(theta))?
                }
                None => ctx.eval_scheme(scheme)?.0,
            };
            let row = Row {
                sweep_var: cfg.capacity.to_string(),
                scheme,
                mean_mw: result.mean,
                stderr_mw: result.stderr,
                n_traj: result.n_traj,
                n_slots: result.n_slots,
                seed: cfg.seed,
            };
            emit(&common.out, &rows_to_csv(&[row]))
        }
        Command::SweepCapacity {
            common,
            values,
            schemes: s,
        } => {
            let rows = sweep_capacity(&load(&common)?, &values, &schemes(&s)?)?;
            emit(&common.out, &rows_to_csv(&rows))
        }
        Command::SweepLifetime {
            common,
            values,
            schemes: s,
        } => {
            let rows = sweep_lifetime(&load(&common)?, &values, &schemes(&s)?)?;
            emit(&common.out, &rows_to_csv(&rows))
        }
        Command::SweepMemory {
            common,
            p1,
            p2,
            schemes: s,
        } => {
            let rows = sweep_memory(&load(&common)?, &p1, &p2, &schemes(&s)?)?;
            emit(&common.out, &rows_to_csv(&rows))
        }
        Command::Curves { common, schemes: s } => {
            let pts = learning_curves(&load(&common)?, &schemes(&s)?)?;
            emit(&common.out, &curves_to_csv(&pts))
        }
        Command::DpOracle { out } => {
            let start = Instant::now();
            let mut s = String::from("instance,support,m_max,capacity,p_a,states,rho,threshold_violations,order_pairs,order_violations\n");
            let mut failures = 0;
            for (i, inst) in tiny_instance_family().iter().enumerate() {
                let sol = dp_oracle(inst, 200_000, 1e-10)?;
                let tv = sol.threshold_violations().len();
                let (ov, pairs) = sol.order_violations(1e-7);
                failures += tv + ov.len();
                let support: Vec<String> = inst
                    .lifetime_support
                    .iter()
                    .map(|l| l.to_string())
                    .collect();
                s += &format!(
                    "{i},{},{},{},{},{},{:.9},{tv},{pairs},{}\n",
                    support.join(" "),
                    inst.m_max,
                    inst.capacity,
                    inst.p_a,
                    sol.states.len(),
                    sol.rho,
                    ov.len()
                );
            }
            emit(&out, &s)?;
            eprintln!(
                "solved {} instances in {:.1?}, {failures} violations",
                tiny_instance_family().len(),
                start.elapsed()
            );
            if failures > 0 {
                return Err(CacheError::Diverged(format!(
                    "{failures} structural violations"
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CacheError::Config(_) | CacheError::Parse { .. } => 2,
                CacheError::NoConvergence(_)
                | CacheError::Diverged(_)
                | CacheError::SingularRegression => 3,
                _ => 1,
            })
        }
    }
}
