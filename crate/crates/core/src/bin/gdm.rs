//! Command-line driver for the convergence studies and verification suites.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gdm_core::error::GdmError;
use gdm_core::experiments::{run_case, run_lemmas, CaseId, CaseOutcome, DiscKind, ExperimentConfig};
use gdm_core::plot;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gdm",
    about = "Implicit Euler / gradient-discretisation studies for 1D parabolic problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Irregular-initial-data study: unit datum, no sources.
    RunCase1(RunArgs),
    /// Irregular right-hand-side study: the tent solution (odd mesh sizes).
    RunCase2(RunArgs),
    /// Time-periodic manufactured study with the identity time boundary.
    RunPeriodic(RunArgs),
    /// Randomized verification of the operator inequalities.
    RunLemmas(LemmaArgs),
    /// Least-squares slopes of the error columns of a results table.
    Rates { csv: PathBuf },
    /// Log-log SVG plot of a results table with reference slopes.
    Plot { csv: PathBuf, svg: PathBuf },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated interior node counts, e.g. 31,63,127,255.
    #[arg(long)]
    mesh_list: Option<String>,
    /// c in the step rule k = c·h².
    #[arg(long)]
    time_const: Option<f64>,
    /// Final time T.
    #[arg(long)]
    final_time: Option<f64>,
    /// Spatial discretisation: cvfe or p1.
    #[arg(long)]
    disc: Option<String>,
    /// Output directory for the CSV table.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Interior time samples per step for the uniform error.
    #[arg(long)]
    samples_per_step: Option<usize>,
    /// Termwise-exact time integration for the series case.
    #[arg(long)]
    fast_e1: bool,
}

#[derive(Args, Clone)]
struct LemmaArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Tamper the inf-sup constant past the measured value and require the
    /// harness to report the constructed failure.
    #[arg(long)]
    self_test_tamper: bool,
}

fn apply_overrides(mut cfg: ExperimentConfig, args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg = serde_json::from_str(&text).with_context(|| "parsing config JSON")?;
    }
    if let Some(list) = &args.mesh_list {
        cfg.mesh_list = list
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .with_context(|| "parsing --mesh-list")?;
    }
    if let Some(c) = args.time_const {
        cfg.time_const = c;
    }
    if let Some(t) = args.final_time {
        cfg.final_time = t;
    }
    if let Some(d) = &args.disc {
        cfg.disc = match d.as_str() {
            "cvfe" => DiscKind::Cvfe,
            "p1" => DiscKind::P1,
            other => anyhow::bail!("unknown discretisation {other:?} (expected cvfe or p1)"),
        };
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.samples_per_step {
        cfg.samples_per_step = s;
    }
    if args.fast_e1 {
        cfg.fast_e1 = true;
    }
    Ok(cfg)
}

fn csv_name(case: CaseId) -> &'static str {
    match case {
        CaseId::IrregularInitial => "case1.csv",
        CaseId::IrregularRhs => "case2.csv",
        CaseId::Periodic => "periodic.csv",
        CaseId::Custom => "custom.csv",
    }
}

fn print_outcome(out: &CaseOutcome) {
    println!("M        h            k            N       E1           E2           zeta_T");
    for run in &out.runs {
        let r = &run.report;
        println!(
            "{:<8} {:<12.5e} {:<12.5e} {:<7} {:<12.5e} {:<12.5e} {:<12.5e}",
            r.mesh_m, r.h, r.k, r.n_steps, r.e1, r.e2, r.zeta_t
        );
    }
    if let Some(r) = out.e1_rate {
        println!("E1 slope: {r:.4}");
    }
    if let Some(r) = out.e2_rate {
        println!("E2 slope: {r:.4}");
    }
    println!(
        "max scheme residual: {:.3e}; conformity lower bound: {}; estimate ratio max: {:.3}",
        out.max_residual,
        if out.lower_bound_ok { "ok" } else { "VIOLATED" },
        out.estimate_ratio_max
    );
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<GdmError>() {
        Some(GdmError::InvalidConfig(_))
        | Some(GdmError::RateExtraction(_))
        | Some(GdmError::Io(_)) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn run_study(case: CaseId, args: RunArgs) -> anyhow::Result<u8> {
    let cfg = apply_overrides(ExperimentConfig::for_case(case), &args)?;
    let outcome = run_case(&cfg)?;
    print_outcome(&outcome);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path: PathBuf = Path::new(&args.out).join(csv_name(cfg.case));
    std::fs::write(&path, &outcome.csv).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    if !outcome.windows_ok {
        match cfg.case {
            CaseId::Periodic => eprintln!(
                "FAIL: periodic study requires decreasing E1 and residual <= 1e-9 \
                 (residual {:.3e})",
                outcome.max_residual
            ),
            _ => eprintln!(
                "FAIL: rate outside window (E1 slope {:?} wants {:?}, E2 slope {:?} wants {:?})",
                outcome.e1_rate, cfg.rate_window_e1, outcome.e2_rate, cfg.rate_window_e2
            ),
        }
        return Ok(2);
    }
    Ok(0)
}

fn run_lemma_suite(args: LemmaArgs) -> anyhow::Result<u8> {
    let summary = run_lemmas(args.seed, args.count, args.self_test_tamper)?;
    println!(
        "zigoto     {}/{}\npeterpaul  {}/{}\nhypsufbnb  {}/{}\ninfsup     {}/{}\nenergy     {}/{}",
        summary.zigoto_passed,
        summary.count,
        summary.peterpaul_passed,
        summary.count,
        summary.hypsufbnb_passed,
        summary.count,
        summary.infsup_passed,
        summary.count,
        summary.energy_passed,
        summary.count
    );
    if let Some((factor, reported)) = summary.tamper {
        println!(
            "self-test: constant tampered x{factor:.1}; falsified inequality {}",
            if reported {
                "reported as expected"
            } else {
                "NOT reported"
            }
        );
    }
    if let Some((check, seed)) = &summary.first_failure {
        println!("first failure: {check} at seed {seed}");
    }
    Ok(if summary.all_passed() { 0 } else { 2 })
}

fn run_rates(csv: &Path) -> anyhow::Result<u8> {
    let text =
        std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let rows = plot::parse_csv(&text)?;
    let series = [
        ("E1", rows.iter().map(|r| (r.h, r.e1)).collect::<Vec<_>>()),
        ("E2", rows.iter().map(|r| (r.h, r.e2)).collect()),
        (
            "riesz_gap",
            rows.iter().map(|r| (r.h, r.riesz_gap)).collect(),
        ),
        ("delta_T", rows.iter().map(|r| (r.h, r.delta_t)).collect()),
    ];
    for (name, pts) in series {
        match gdm_core::metrics::convergence_rate(&pts) {
            Ok(rate) => println!("{name:<10} slope {rate:.4}"),
            Err(e) => println!("{name:<10} not extractable: {e}"),
        }
    }
    Ok(0)
}

fn run_plot(csv: &Path, svg: &Path) -> anyhow::Result<u8> {
    let text =
        std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let rows = plot::parse_csv(&text)?;
    let rendered = plot::render_svg(&rows)?;
    std::fs::write(svg, rendered).with_context(|| format!("writing {}", svg.display()))?;
    println!("wrote {}", svg.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunCase1(args) => run_study(CaseId::IrregularInitial, args),
        Command::RunCase2(args) => run_study(CaseId::IrregularRhs, args),
        Command::RunPeriodic(args) => run_study(CaseId::Periodic, args),
        Command::RunLemmas(args) => run_lemma_suite(args),
        Command::Rates { csv } => run_rates(&csv),
        Command::Plot { csv, svg } => run_plot(&csv, &svg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
