//! Command-line interface: `diag` for trace-file reports, `toy` for the
//! conjugate-model replication studies, and `geo synth|pilot|run` for the
//! geostatistical study. Experiment options can come from flags or from a
//! TOML config file with the same keys; explicit flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mcse::batch_means::{cbm_variance, significant_figures, CbmOptions};
use mcse::csv_io;
use mcse::gelman_rubin::psrf;
use mcse::harness::{
    emit_histogram, run_geo_cbm, run_geo_grd, run_geo_pilot, run_toy_cbm, run_toy_grd,
    summarize, with_worker_pool, write_decisions_csv, write_histogram_csv,
    write_replications_csv, write_summary_csv, GeoCbmConfig, GeoGrdConfig, GeoPilotConfig,
    PilotArtifact, StudyOutput, SummaryTable, DEFAULT_CAP,
};
use mcse::models::geo::{synth_geo_data, GeoState, Region, Sigma2Update, DEFAULT_PROPOSAL_VAR};
use mcse::models::toy::{toy_true_means, ToyData};
use mcse::rng::RngStream;
use mcse::stopping::Growth;
use mcse::traces::MultiChainTrace;

#[derive(Parser)]
#[command(
    name = "mcse",
    about = "MCMC output analysis: batch-means standard errors, R-hat diagnostics, and sequential stopping studies",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report point estimates, MCSEs, half-widths and significant figures
    /// for each column of one or more trace CSVs; with several files (one
    /// chain each) also report R-hat and its upper bound per column.
    Diag(DiagArgs),
    /// Replication studies on the conjugate toy model.
    Toy(ToyArgs),
    /// Geostatistical model: synthesize data, run the pilot, run a study.
    #[command(subcommand)]
    Geo(GeoCommand),
}

#[derive(Args)]
struct DiagArgs {
    /// Trace CSV files; each file is one chain with one column per functional
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// CBM batch exponent
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Confidence level for half-widths
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Discard the first half of each chain before the multi-chain diagnostic
    #[arg(long)]
    discard_first_half: bool,
    /// Write the report as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Method {
    Cbm,
    Grd,
}

#[derive(Args)]
struct ToyArgs {
    /// Stopping method
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Half-width cutoff(s) for cbm, comma separated (single value is
    /// broadcast to both functionals)
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// R-hat upper bound cutoff for grd
    #[arg(long)]
    delta: Option<f64>,
    /// Parallel chain count for grd
    #[arg(long)]
    chains: Option<usize>,
    /// Replication count
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum total draws before stopping is allowed
    #[arg(long)]
    n_star: Option<u64>,
    /// Relative growth between checks
    #[arg(long)]
    growth: Option<f64>,
    /// grd only: keep entire chains (no burn-in) for both the diagnostic
    /// and the estimates
    #[arg(long)]
    no_burn_in: bool,
    /// Per-replication draw cap
    #[arg(long)]
    cap: Option<u64>,
    /// Worker pool size (0 = library default)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Log every stopping decision to decisions.csv
    #[arg(long)]
    trace_decisions: bool,
    /// Output directory for replications.csv, summary.csv, histograms
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GeoCommand {
    /// Generate a synthetic data set and its sidecar description.
    Synth(GeoSynthArgs),
    /// One long run fixing truth values and starting percentiles.
    Pilot(GeoPilotArgs),
    /// A replication study arm against an existing pilot artifact.
    Run(GeoRunArgs),
}

#[derive(Args)]
struct GeoSynthArgs {
    /// Site count
    #[arg(long, default_value_t = 50)]
    sites: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generating nugget variance
    #[arg(long, default_value_t = 8.0)]
    tau2: f64,
    /// Generating partial sill
    #[arg(long, default_value_t = 12.0)]
    sigma2: f64,
    /// Generating range
    #[arg(long, default_value_t = 2.0)]
    phi: f64,
    /// Generating regression slope
    #[arg(long, default_value_t = 4.0)]
    beta: f64,
    /// Region as x_min,x_max,y_min,y_max
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 25.0, 0.0, 25.0])]
    region: Vec<f64>,
    /// Output CSV path (sidecar written next to it)
    #[arg(long, default_value = "geo_data.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GeoPilotArgs {
    /// Data CSV produced by `geo synth`
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pilot chain length
    #[arg(long, default_value_t = 100_000)]
    iterations: usize,
    /// Starting state as tau2,sigma2,phi,beta
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 5.0, 1.9, 0.0])]
    start: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_PROPOSAL_VAR)]
    proposal_var: f64,
    /// sigma2 update move: slice or rw-log
    #[arg(long, default_value = "slice")]
    sigma2_update: String,
    /// Artifact output path
    #[arg(long, default_value = "geo_pilot.toml")]
    out: PathBuf,
}

#[derive(Args)]
struct GeoRunArgs {
    /// Data CSV produced by `geo synth`
    #[arg(long)]
    data: Option<PathBuf>,
    /// Pilot artifact produced by `geo pilot`
    #[arg(long)]
    pilot: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Half-width cutoffs for cbm: tau2,sigma2,phi,beta
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// R-hat upper bound cutoff for grd
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum total draws
    #[arg(long)]
    n_star: Option<u64>,
    /// cbm: absolute draws added between checks
    #[arg(long)]
    growth_add: Option<u64>,
    /// grd: relative per-chain growth between checks
    #[arg(long)]
    growth: Option<f64>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    proposal_var: Option<f64>,
    /// sigma2 update move: slice or rw-log
    #[arg(long)]
    sigma2_update: Option<String>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    trace_decisions: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file with the same keys as the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Config-file mirror of the study flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    method: Option<String>,
    epsilon: Option<Vec<f64>>,
    delta: Option<f64>,
    chains: Option<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
    n_star: Option<u64>,
    growth: Option<f64>,
    growth_add: Option<u64>,
    no_burn_in: Option<bool>,
    cap: Option<u64>,
    proposal_var: Option<f64>,
    sigma2_update: Option<String>,
    data: Option<PathBuf>,
    pilot: Option<PathBuf>,
    out: Option<PathBuf>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Diag(args) => run_diag(args),
        Command::Toy(args) => run_toy(args),
        Command::Geo(GeoCommand::Synth(args)) => run_geo_synth(args),
        Command::Geo(GeoCommand::Pilot(args)) => run_geo_pilot_cmd(args),
        Command::Geo(GeoCommand::Run(args)) => run_geo_run(args),
    }
}

fn parse_sigma2_update(text: &str) -> anyhow::Result<Sigma2Update> {
    match text {
        "slice" => Ok(Sigma2Update::Slice),
        "rw-log" | "rw_log" => Ok(Sigma2Update::RandomWalkLog { step_var: 0.25 }),
        other => bail!("unknown sigma2 update {other:?}; use slice or rw-log"),
    }
}

fn run_diag(args: DiagArgs) -> anyhow::Result<()> {
    let opts = CbmOptions {
        theta: args.theta,
        confidence: args.confidence,
    };
    let mut chains = Vec::new();
    let mut names: Option<Vec<String>> = None;
    for path in &args.traces {
        let (file_names, columns) = csv_io::read_trace_csv(path)?;
        if let Some(existing) = &names {
            if *existing != file_names {
                bail!(
                    "{} has columns {:?}, expected {:?}",
                    path.display(),
                    file_names,
                    existing
                );
            }
        } else {
            names = Some(file_names);
        }
        chains.push(columns);
    }
    let names = names.expect("at least one trace file");

    let mut report_rows: Vec<Vec<String>> = Vec::new();
    if chains.len() == 1 {
        println!(
            "{:<16} {:>14} {:>12} {:>12} {:>9}",
            "functional", "point", "mcse", "half_width", "sig_figs"
        );
        for (name, trace) in names.iter().zip(&chains[0]) {
            let est = cbm_variance(trace, &opts)?;
            let figs = significant_figures(est.point, est.half_width)?;
            println!(
                "{:<16} {:>14.6} {:>12.6} {:>12.6} {:>9}",
                name, est.point, est.mcse, est.half_width, figs
            );
            report_rows.push(vec![
                name.clone(),
                est.point.to_string(),
                est.mcse.to_string(),
                est.half_width.to_string(),
                figs.to_string(),
            ]);
        }
        if let Some(out) = &args.out {
            write_report(out, &["functional", "point", "mcse", "half_width", "sig_figs"], &report_rows)?;
        }
    } else {
        println!(
            "{:<16} {:>14} {:>10} {:>10}",
            "functional", "pooled_mean", "r_hat", "r_upper"
        );
        for (idx, name) in names.iter().enumerate() {
            let multi = MultiChainTrace::new(
                chains.iter().map(|c| c[idx].clone()).collect(),
            )?;
            let working = if args.discard_first_half {
                multi.retain_last_half()?
            } else {
                multi
            };
            let report = psrf(&working)?;
            let pooled = working.pooled_mean()?;
            println!(
                "{:<16} {:>14.6} {:>10.4} {:>10.4}",
                name, pooled, report.r_hat, report.r_upper
            );
            report_rows.push(vec![
                name.clone(),
                pooled.to_string(),
                report.r_hat.to_string(),
                report.r_upper.to_string(),
            ]);
        }
        if let Some(out) = &args.out {
            write_report(out, &["functional", "pooled_mean", "r_hat", "r_upper"], &report_rows)?;
        }
    }
    Ok(())
}

fn write_report(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn run_toy(args: ToyArgs) -> anyhow::Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let method = match (args.method, file.method.as_deref()) {
        (Some(m), _) => m,
        (None, Some("cbm")) => Method::Cbm,
        (None, Some("grd")) => Method::Grd,
        (None, Some(other)) => bail!("unknown method {other:?} in config"),
        (None, None) => bail!("--method (or a config with one) is required"),
    };
    let reps = args.reps.or(file.reps).unwrap_or(1000);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let n_star = args.n_star.or(file.n_star).unwrap_or(400);
    let growth = Growth::Relative(args.growth.or(file.growth).unwrap_or(0.10));
    let cap = args.cap.or(file.cap).unwrap_or(DEFAULT_CAP);
    let no_burn_in = args.no_burn_in || file.no_burn_in.unwrap_or(false);
    let data = ToyData::new(11, 1.0, 14.0).expect("reference data");
    let (mu_truth, lambda_truth) = toy_true_means(&data);

    let output = match method {
        Method::Cbm => {
            let epsilons = args
                .epsilon
                .or(file.epsilon)
                .context("cbm needs --epsilon")?;
            let epsilons = broadcast(epsilons, 2)?;
            let mut config = mcse::harness::ToyCbmConfig::new(data, epsilons[0], reps, seed);
            config.rule.epsilons = epsilons;
            config.rule.n_star = n_star;
            config.rule.growth = growth;
            config.cap = cap;
            config.collect_decisions = args.trace_decisions;
            with_worker_pool(args.workers, || run_toy_cbm(&config))?
        }
        Method::Grd => {
            let delta = args.delta.or(file.delta).context("grd needs --delta")?;
            let chains = args.chains.or(file.chains).unwrap_or(2);
            let mut config = mcse::harness::ToyGrdConfig::new(data, delta, chains, reps, seed);
            config.rule.n_star = n_star;
            config.rule.growth = growth;
            config.rule.discard_first_half = !no_burn_in;
            config.cap = cap;
            config.collect_decisions = args.trace_decisions;
            with_worker_pool(args.workers, || run_toy_grd(&config))?
        }
    };

    let truth = vec![mu_truth, lambda_truth];
    let table = summarize(
        &output.results,
        &truth,
        &output.functionals,
        method == Method::Cbm,
    )?;
    print_summary(&table);
    let out_dir = args.out.or(file.out);
    persist_study(out_dir.as_deref(), &output, &table)?;

    let failed = output.failed_count();
    if failed > 0 {
        bail!("{failed} replications failed (draw cap reached)");
    }
    Ok(())
}

fn broadcast(values: Vec<f64>, want: usize) -> anyhow::Result<Vec<f64>> {
    if values.len() == want {
        Ok(values)
    } else if values.len() == 1 {
        Ok(vec![values[0]; want])
    } else {
        bail!("expected 1 or {want} cutoff values, got {}", values.len())
    }
}

fn run_geo_synth(args: GeoSynthArgs) -> anyhow::Result<()> {
    if args.region.len() != 4 {
        bail!("--region needs x_min,x_max,y_min,y_max");
    }
    let state = GeoState {
        tau2: args.tau2,
        sigma2: args.sigma2,
        phi: args.phi,
        beta: args.beta,
    };
    let region = Region {
        x_min: args.region[0],
        x_max: args.region[1],
        y_min: args.region[2],
        y_max: args.region[3],
    };
    let mut stream = RngStream::new(args.seed, mcse::rng::SYNTH_STREAM);
    let data = synth_geo_data(&mut stream, args.sites, &state, &region)?;
    csv_io::write_geo_csv(&args.out, &data)?;

    let sidecar = args.out.with_extension("meta.txt");
    std::fs::write(
        &sidecar,
        format!(
            "sites = {}\nseed = {}\ntau2 = {}\nsigma2 = {}\nphi = {}\nbeta = {}\nregion = [{}, {}, {}, {}]\n",
            args.sites,
            args.seed,
            state.tau2,
            state.sigma2,
            state.phi,
            state.beta,
            region.x_min,
            region.x_max,
            region.y_min,
            region.y_max,
        ),
    )?;
    println!(
        "wrote {} sites to {} (sidecar {})",
        data.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn run_geo_pilot_cmd(args: GeoPilotArgs) -> anyhow::Result<()> {
    if args.start.len() != 4 {
        bail!("--start needs tau2,sigma2,phi,beta");
    }
    let data = csv_io::read_geo_csv(&args.data)?;
    let config = GeoPilotConfig {
        iterations: args.iterations,
        seed: args.seed,
        start: GeoState {
            tau2: args.start[0],
            sigma2: args.start[1],
            phi: args.start[2],
            beta: args.start[3],
        },
        proposal_var: args.proposal_var,
        sigma2_update: parse_sigma2_update(&args.sigma2_update)?,
    };
    let pilot = run_geo_pilot(&data, &config)?;
    pilot.save(&args.out)?;
    println!("pilot truth (posterior means with MCSE):");
    for ((name, mean), mcse) in pilot.names.iter().zip(&pilot.truth).zip(&pilot.truth_mcse) {
        println!("  {name:<8} {mean:>12.5} ({mcse:.5})");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_geo_run(args: GeoRunArgs) -> anyhow::Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data_path = args.data.or(file.data).context("--data is required")?;
    let pilot_path = args.pilot.or(file.pilot).context("--pilot is required")?;
    let data = csv_io::read_geo_csv(&data_path)?;
    let pilot = PilotArtifact::load(&pilot_path)?;

    let method = match (args.method, file.method.as_deref()) {
        (Some(m), _) => m,
        (None, Some("cbm")) => Method::Cbm,
        (None, Some("grd")) => Method::Grd,
        (None, Some(other)) => bail!("unknown method {other:?} in config"),
        (None, None) => bail!("--method (or a config with one) is required"),
    };
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let cap = args.cap.or(file.cap).unwrap_or(DEFAULT_CAP);
    let n_star = args.n_star.or(file.n_star).unwrap_or(1000);
    let proposal_var = args
        .proposal_var
        .or(file.proposal_var)
        .unwrap_or(DEFAULT_PROPOSAL_VAR);
    let sigma2_update = parse_sigma2_update(
        args.sigma2_update
            .or(file.sigma2_update)
            .as_deref()
            .unwrap_or("slice"),
    )?;

    let output = match method {
        Method::Cbm => {
            let reps = args.reps.or(file.reps).unwrap_or(400);
            let mut config = GeoCbmConfig::new(reps, seed);
            if let Some(eps) = args.epsilon.or(file.epsilon) {
                config.rule.epsilons = broadcast(eps, 4)?;
            }
            config.rule.n_star = n_star;
            config.rule.growth = Growth::Absolute(args.growth_add.or(file.growth_add).unwrap_or(10));
            config.cap = cap;
            config.proposal_var = proposal_var;
            config.sigma2_update = sigma2_update;
            config.collect_decisions = args.trace_decisions;
            with_worker_pool(args.workers, || run_geo_cbm(&data, &pilot, &config))?
        }
        Method::Grd => {
            let reps = args.reps.or(file.reps).unwrap_or(100);
            let mut config = GeoGrdConfig::new(reps, seed);
            if let Some(delta) = args.delta.or(file.delta) {
                config.rule.delta = delta;
            }
            config.rule.n_star = n_star;
            config.rule.growth = Growth::Relative(args.growth.or(file.growth).unwrap_or(0.10));
            config.cap = cap;
            config.proposal_var = proposal_var;
            config.sigma2_update = sigma2_update;
            config.collect_decisions = args.trace_decisions;
            with_worker_pool(args.workers, || run_geo_grd(&data, &pilot, &config))?
        }
    };

    let table = summarize(
        &output.results,
        &pilot.truth,
        &output.functionals,
        method == Method::Cbm,
    )?;
    print_summary(&table);
    let out_dir = args.out.or(file.out);
    persist_study(out_dir.as_deref(), &output, &table)?;

    let failed = output.failed_count();
    if failed > 0 {
        bail!("{failed} replications failed (draw cap reached)");
    }
    Ok(())
}

fn print_summary(table: &SummaryTable) {
    println!(
        "replications: {} ({} failed)",
        table.replications, table.failed
    );
    println!(
        "mean effort: {:.1} (se {:.1})",
        table.mean_effort.0, table.mean_effort.1
    );
    println!(
        "prop at minimum: {:.3} (se {:.4}); prop <= 1000 draws: {:.3} (se {:.4})",
        table.prop_at_minimum.0,
        table.prop_at_minimum.1,
        table.prop_at_most_1000.0,
        table.prop_at_most_1000.1
    );
    for row in &table.rows {
        match row.coverage {
            Some((p, se)) => println!(
                "  {:<8} mse {:.6e} (se {:.2e})  coverage {:.3} (se {:.4})",
                row.functional, row.mse, row.mse_se, p, se
            ),
            None => println!(
                "  {:<8} mse {:.6e} (se {:.2e})",
                row.functional, row.mse, row.mse_se
            ),
        }
    }
}

fn persist_study(
    out_dir: Option<&Path>,
    output: &StudyOutput,
    table: &SummaryTable,
) -> anyhow::Result<()> {
    let Some(dir) = out_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    write_replications_csv(&dir.join("replications.csv"), output)?;
    write_summary_csv(&dir.join("summary.csv"), table)?;
    if let Some(decisions) = &output.decisions {
        write_decisions_csv(&dir.join("decisions.csv"), &output.functionals, decisions)?;
    }
    for (idx, name) in output.functionals.iter().enumerate() {
        let hist = emit_histogram(&output.results, idx, 30)?;
        write_histogram_csv(&dir.join(format!("hist_{name}.csv")), &hist)?;
    }
    println!("wrote study output under {}", dir.display());
    Ok(())
}
