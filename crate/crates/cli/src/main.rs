use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rsu_radar::harness::{
    congruence_to_csv, emit_csv, emit_plot, emit_similarity_plot, mean_by, parse_congruence_csv, parse_csv,
    run_congruence, run_experiment, ExperimentConfig, ResultRow, Strategy, CONGRUENCE_HEADER,
};

const THREADS_ENV: &str = "RSU_RADAR_THREADS";

#[derive(Parser)]
#[command(name = "rsu-radar", version, about = "Radar-assisted RSU link configuration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment described by a config file
    Run {
        config: PathBuf,
        /// Override the output directory from the config
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Validate a config file and print the resolved settings
    Check { config: PathBuf },
    /// Render a results or congruence CSV as an SVG plot
    Plot { csv: PathBuf, svg: PathBuf },
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn summarize(rows: &[ResultRow]) {
    let mut t_cohs: Vec<f64> = rows.iter().map(|r| r.t_coh).collect();
    t_cohs.sort_by(|a, b| b.total_cmp(a));
    t_cohs.dedup();
    for t in t_cohs {
        for s in [Strategy::Exhaustive, Strategy::Location, Strategy::Radar] {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.t_coh == t && r.strategy == s).collect();
            if sel.is_empty() {
                continue;
            }
            let mean = sel.iter().map(|r| r.rate_bps).sum::<f64>() / sel.len() as f64;
            println!("t_coh={t:<8} {:<10} mean rate {:.4} Gbit/s over {} rows", s.as_str(), mean / 1e9, sel.len());
        }
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.run.output_dir));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let report = run_experiment(&cfg)?;
    if !report.aborted.is_empty() {
        println!("{} of {} drops aborted", report.aborted.len(), cfg.run.n_drops);
    }
    let csv = dir.join("results.csv");
    emit_csv(&report.rows, &csv).with_context(|| format!("writing {}", csv.display()))?;
    emit_plot(&report.rows, &dir.join("rates.svg"))?;
    summarize(&report.rows);
    println!("wrote {} rows to {}", report.rows.len(), csv.display());

    if cfg.congruence.enabled {
        let rows = run_congruence(&cfg)?;
        let path = dir.join("congruence.csv");
        std::fs::write(&path, congruence_to_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
        emit_similarity_plot(&rows, &dir.join("similarity.svg"))?;
        for &n in &cfg.metric.n {
            for &l in &cfg.metric.l {
                if let (Some(a), Some(b)) = (mean_by(&rows, n, l, |r| r.s_raw), mean_by(&rows, n, l, |r| r.s_corrected)) {
                    println!("N={n:<4} L={l}  S uncorrected {a:.4}  S corrected {b:.4}");
                }
            }
        }
    }
    Ok(())
}

fn check(config: &Path) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.validate()?;
    println!("{}", cfg.to_toml());
    Ok(())
}

fn plot(csv: &Path, svg: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    if text.starts_with(CONGRUENCE_HEADER) {
        emit_similarity_plot(&parse_congruence_csv(&text)?, svg)?;
    } else {
        emit_plot(&parse_csv(&text)?, svg)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Check { config } => check(&config),
        Command::Plot { csv, svg } => plot(&csv, &svg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rsu-radar: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
