//! `resalloc`: train, compare and plot the DQN variants on the allocation simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resalloc_core::harness::{self, emit_plot_data, render_svgs, write_metrics_csv, write_run_outputs};
use resalloc_core::{Error, Result, RunConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "resalloc", version, about = "Deep Q-learning for resource allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate one variant on one seed.
    Run {
        #[arg(long)]
        variant: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        /// JSON file with RunConfig fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate several variants over several seeds.
    Compare {
        /// `all` or a comma-separated list such as `1,4,8`.
        #[arg(long, default_value = "all")]
        variants: String,
        /// Comma-separated seeds; defaults to the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts from the plot CSVs in a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))
}

fn parse_variants(spec: &str) -> Result<Vec<Variant>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Variant::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| {
            let id: u8 = s.trim().parse().map_err(|_| Error::Config(format!("bad variant '{s}'")))?;
            Variant::from_id(id)
        })
        .collect()
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { variant, seed, episodes, config, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(v) = variant {
                cfg.variant_id = v;
            }
            if let Some(n) = episodes {
                cfg.training_episodes = n;
            }
            let seed = seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
            let out = output_dir(out, &cfg)?;
            let outcome = harness::run(&cfg, seed)?;
            write_run_outputs(&out, &outcome)?;
            let r = &outcome.report;
            println!(
                "variant {} seed {}: efficiency {:.1}%, mean eval reward {:.4}, under/over/at {}/{}/{}",
                outcome.variant,
                seed,
                r.efficiency_percent,
                r.mean_eval_reward,
                r.time_periods_under_capacity,
                r.time_periods_over_capacity,
                r.time_periods_at_target
            );
            Ok(())
        }
        Command::Compare { variants, seeds, episodes, config, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = episodes {
                cfg.training_episodes = n;
            }
            let variants = parse_variants(&variants)?;
            let seeds = seeds.unwrap_or_else(|| cfg.seeds.clone());
            let out = output_dir(out, &cfg)?;
            let cmp = harness::compare_variants(&cfg, &variants, &seeds)?;
            std::fs::create_dir_all(&out)?;
            write_metrics_csv(&out.join("comparison.csv"), &cmp.rows)?;

            // Plot data comes from the first successful seed of each variant.
            let firsts: Vec<_> = variants
                .iter()
                .filter_map(|&v| cmp.cells.iter().find(|c| c.variant == v && c.outcome.is_ok()))
                .map(|c| (c.variant, c.outcome.as_ref().unwrap()))
                .collect();
            let logs: Vec<_> = firsts.iter().map(|(v, (log, _))| (*v, log)).collect();
            let reports: Vec<_> = firsts.iter().map(|(v, (_, report))| (*v, report)).collect();
            emit_plot_data(&logs, &reports, &out)?;

            for row in cmp.rows.iter().filter(|r| r.seed == "median") {
                println!(
                    "variant {} median: efficiency {:.1}%, mean eval reward {:.4}{}",
                    row.variant,
                    row.efficiency_percent,
                    row.mean_eval_reward,
                    if row.is_error() { format!(" ({})", row.error) } else { String::new() }
                );
            }
            Ok(())
        }
        Command::Plot { input, out } => {
            for path in render_svgs(&input, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
