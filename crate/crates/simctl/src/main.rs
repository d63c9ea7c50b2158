use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use simctl::bench::benchmark;
use simctl::config::ExperimentConfig;
use simctl::oracle::{coarse_grid, run_oracle};
use simctl::plots::emit_plot_data;
use simctl::runner::{build_models, run_matrix};
use simctl::table_io::{load_table, save_table};

#[derive(Parser)]
#[command(name = "simctl", about = "Transmit power and rate control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller × density × N_A × seed matrix and write CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Exit 0 even if some cell did not converge or had infeasible vehicles.
        #[arg(long)]
        allow_partial: bool,
    },
    /// Time single controller invocations.
    Bench {
        /// N_A values: `3`, `1,3,5` or `1..5`.
        #[arg(long, default_value = "1..5", value_parser = parse_na)]
        na: NaList,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the model PDR table or check a table file.
    Table {
        #[command(subcommand)]
        action: TableAction,
    },
    /// Check PRESTO and MERLIN against exhaustive search on a coarse grid.
    Oracle {
        #[arg(long)]
        na: usize,
        #[arg(long, value_enum, default_value_t = OracleGrid::Coarse)]
        grid: OracleGrid,
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TableAction {
    /// Write the table built from the configuration's PHY model.
    Export {
        csv: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Load and validate a table file.
    Import { csv: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleGrid {
    Coarse,
}

#[derive(Clone, Debug)]
struct NaList(Vec<usize>);

fn parse_na(s: &str) -> Result<NaList, String> {
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let b: usize = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| format!("bad N_A {x:?}")))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|n| !(1..=5).contains(n)) {
        return Err(format!("N_A values must lie in 1..=5, got {s:?}"));
    }
    Ok(NaList(values))
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Exit status 2 marks a run with unconverged or infeasible cells.
fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, allow_partial } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let models = build_models(&cfg)?;
            let result = run_matrix(&cfg, &models)?;
            for path in emit_plot_data(&cfg.output_dir, &result, &models.table)? {
                println!("wrote {}", path.display());
            }
            for c in &result.cells {
                let median_ms = c.report.runtime_stats.as_ref().map_or(0.0, |r| r.p50_s * 1e3);
                eprintln!(
                    "{} density={} n_a={} seed={}: cbr={:.4} sar={:.2} iterations={} controller_p50={median_ms:.3}ms",
                    c.controller, c.density, c.n_a, c.seed, c.report.mean_cbr, c.report.sar, c.fixed_point.iterations
                );
            }
            let problems = result.problems();
            for p in &problems {
                eprintln!("problem: {p}");
            }
            if !problems.is_empty() && !allow_partial {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Bench {
            na,
            reps,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(config.as_ref())?;
            let models = build_models(&cfg)?;
            let report = benchmark(&models, &cfg.grid, &cfg.merlin, &na.0, reps, seed)?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    report.write_csv(file)?;
                }
                None => report.write_csv(std::io::stdout().lock())?,
            }
            for &n_a in &na.0 {
                if let Some(r) = report.ratio(n_a) {
                    eprintln!("n_a={n_a}: merlin/presto median ratio {r:.1}");
                }
            }
        }
        Command::Table { action } => match action {
            TableAction::Export { csv, config } => {
                let cfg = load_config(config.as_ref())?;
                save_table(&csv, &build_models(&cfg)?.table)?;
                println!("wrote {}", csv.display());
            }
            TableAction::Import { csv } => {
                let t = load_table(&csv)?;
                println!(
                    "ok: {} distances × {} powers × {} CBR levels",
                    t.distances().len(),
                    t.powers().len(),
                    t.cbr_levels().len()
                );
            }
        },
        Command::Oracle {
            na,
            grid: OracleGrid::Coarse,
            cases,
            seed,
            config,
        } => {
            if !(1..=5).contains(&na) {
                bail!("--na must lie in 1..=5");
            }
            let cfg = load_config(config.as_ref())?;
            let models = build_models(&cfg)?;
            let results = run_oracle(&models, &coarse_grid(), &cfg.merlin, na, cases, seed)?;
            let mut stdout = std::io::stdout().lock();
            let mut failed = 0;
            for (k, c) in results.iter().enumerate() {
                failed += usize::from(!c.passed());
                let merlin = c
                    .merlin_vs_oracle
                    .map(|(m, b)| format!(" merlin={m:.4} bound={b:.4}"))
                    .unwrap_or_default();
                let note = c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
                writeln!(
                    stdout,
                    "case {k}: {} presto_mismatches={:?}{merlin}{note}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.presto_mismatches
                )?;
            }
            writeln!(stdout, "{} of {} cases passed", results.len() - failed, results.len())?;
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
