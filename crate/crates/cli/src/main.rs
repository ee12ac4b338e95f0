mod manifest;
mod report;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afmm::eventstudy::exposure::{read_exposure_csv, read_filings_dir, read_keywords, write_exposure_csv};
use afmm::eventstudy::tables::{car_by_firm, read_event_table_csv, write_car_rows_csv, write_event_table_csv, write_regression_csv};
use afmm::eventstudy::{
    cross_section_regression, default_keywords, firm_records, group_event_table, load_price_panel, read_events,
    read_firms, run_event_study, score_filings, ScoreMode, DEFAULT_REGRESSION_EVENT, HEADLINE_WINDOW,
};
use afmm::experiments::{read_sweep_csv, run_sweep, write_propositions_csv, write_sweep_csv, ExperimentConfig};
use afmm::market::{hex_digest, simulate_run, write_series};
use afmm::Error;
use anyhow::Context;
use clap::{Parser, Subcommand};

use manifest::{inputs_digest, ManifestBuilder};

#[derive(Debug, Parser)]
#[command(name = "afmm", version, about = "Agent-based market simulation and event-study toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its price series and metrics.
    Simulate {
        /// JSON configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured parameter sweep.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the proposition sweeps and the similarity regression.
    Propositions {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score filings for legacy-modernization exposure.
    ScoreFilings {
        /// Directory of `TICKER_FORM_YYYY-MM-DD.txt` files.
        #[arg(long)]
        filings: PathBuf,
        /// `phrase,weight,category` file; the built-in keyword set when omitted.
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Normalise each document's counts per 10 000 tokens.
        #[arg(long = "per-10k")]
        per_10k: bool,
    },
    /// Market-model event study with group table and cross-sectional regression.
    EventStudy {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        firms: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        exposure: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Event whose headline CARs are regressed; E3 when present, else the first event.
        #[arg(long)]
        regression_event: Option<String>,
    },
    /// Render an SVG report from `sweep.csv` and/or `event_table.csv`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit status for an error chain: 1 configuration or usage, 2 data,
/// 3 numerical.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::Json(_)) => 1,
        Some(Error::Numerical(_) | Error::Undefined(_)) => 3,
        Some(Error::Contract(_) | Error::Data(_) | Error::Io { .. } | Error::Csv(_)) | None => 2,
    }
}

/// The error chain joined by `: `, skipping causes already quoted by an
/// outer message.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    Ok(std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads the configuration (defaults when absent) and its digest. An
/// unreadable configuration file is a configuration error.
fn load_config(path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<(ExperimentConfig<f64>, String)> {
    let (mut cfg, bytes) = match path {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {path}: {source}")),
            other => other,
        })?,
        None => {
            let cfg = ExperimentConfig::default();
            let bytes = serde_json::to_vec_pretty(&cfg)?;
            (cfg, bytes)
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, hex_digest(&bytes)))
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let (cfg, digest) = load_config(config, seed)?;
    let mut m = ManifestBuilder::new("simulate", digest, Some(cfg.seed));
    let result = simulate_run(&cfg.simulation, &cfg.population, cfg.seed)?;
    create_dir(out)?;
    let series = out.join("series.csv");
    write_series(&result.records, create(&series)?)?;
    m.output(&series);
    let metrics = out.join("metrics.json");
    let summary = serde_json::json!({
        "seed": cfg.seed,
        "metrics": result.metrics,
        "aggregates": result.aggregates,
        "run_config_digest": result.run.config_digest,
    });
    std::fs::write(&metrics, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&metrics, e))?;
    m.output(&metrics);
    m.finish(&out.join("manifest.json"))?;
    Ok(())
}

fn sweep(config: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let (cfg, digest) = load_config(config, seed)?;
    let mut m = ManifestBuilder::new("sweep", digest, Some(cfg.seed));
    let table = run_sweep(&cfg.sweep_spec())?;
    create_dir(out)?;
    let path = out.join("sweep.csv");
    write_sweep_csv(&table, create(&path)?)?;
    m.output(&path);
    m.finish(&out.join("manifest.json"))?;
    Ok(())
}

fn propositions(config: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let (cfg, digest) = load_config(config, seed)?;
    let mut m = ManifestBuilder::new("propositions", digest, Some(cfg.seed));
    let outcome = cfg.run_propositions()?;
    create_dir(out)?;
    for (name, table) in &outcome.tables {
        let path = out.join(format!("sweep_{name}.csv"));
        write_sweep_csv(table, create(&path)?)?;
        m.output(&path);
    }
    let path = out.join("propositions.csv");
    write_propositions_csv(&outcome.reports, create(&path)?)?;
    m.output(&path);
    for r in &outcome.reports {
        println!("{}: {}", r.id, r.verdict.as_str());
    }
    m.details(serde_json::json!({ "verdicts": outcome.reports.iter().map(|r| (r.id.clone(), r.verdict)).collect::<BTreeMap<_, _>>() }));
    m.finish(&out.join("manifest.json"))?;
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn score(filings: &Path, keywords: Option<&Path>, out: &Path, per_10k: bool) -> anyhow::Result<()> {
    let mut inputs = Vec::new();
    let kw = match keywords {
        Some(p) => {
            let bytes = read(p)?;
            let kw = read_keywords(bytes.as_slice()).with_context(|| p.display().to_string())?;
            inputs.push((p.display().to_string(), bytes));
            kw
        }
        None => default_keywords(),
    };
    let docs = read_filings_dir(filings)?;
    if docs.is_empty() {
        return Err(Error::Data(format!("{}: no filings named TICKER_FORM_YYYY-MM-DD.txt", filings.display())).into());
    }
    for (t, d) in &docs {
        inputs.push((t.clone(), d.clone().into_bytes()));
    }
    let refs: Vec<(&str, &[u8])> = inputs.iter().map(|(n, b)| (n.as_str(), b.as_slice())).collect();
    let mut m = ManifestBuilder::new("score-filings", inputs_digest(&refs), None);
    let mode = if per_10k { ScoreMode::Per10k } else { ScoreMode::Raw };
    let scores = score_filings(&docs, &kw, mode)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_exposure_csv(&scores, mode, create(out)?)?;
    m.output(out);
    m.details(serde_json::json!({ "mode": mode.as_str(), "documents": docs.len(), "keywords": kw.len() }));
    m.finish(&sidecar(out))?;
    Ok(())
}

struct EventStudyArgs<'a> {
    prices: &'a Path,
    firms: &'a Path,
    events: &'a Path,
    exposure: &'a Path,
    out: &'a Path,
    regression_event: Option<&'a str>,
}

fn event_study(a: EventStudyArgs<'_>) -> anyhow::Result<()> {
    let price_bytes = read(a.prices)?;
    let firm_bytes = read(a.firms)?;
    let event_bytes = read(a.events)?;
    let exposure_bytes = read(a.exposure)?;
    let digest = inputs_digest(&[
        ("prices", &price_bytes),
        ("firms", &firm_bytes),
        ("events", &event_bytes),
        ("exposure", &exposure_bytes),
    ]);
    let mut m = ManifestBuilder::new("event-study", digest, None);
    let with_path = |p: &Path| {
        let p = p.display().to_string();
        move |e: Error| match e {
            Error::Data(msg) => Error::Data(format!("{p}: {msg}")),
            other => other,
        }
    };
    let panel = load_price_panel::<f64>(a.prices)?;
    let groups = read_firms(firm_bytes.as_slice()).map_err(with_path(a.firms))?;
    let events = read_events(event_bytes.as_slice()).map_err(with_path(a.events))?;
    let exposure = read_exposure_csv(exposure_bytes.as_slice()).map_err(with_path(a.exposure))?;
    let firms = firm_records::<f64>(&groups, &exposure)?;

    let reg_event = match a.regression_event {
        Some(id) if events.iter().any(|e| e.event_id == id) => id.to_owned(),
        Some(id) => return Err(Error::Config(format!("regression event `{id}` is not in the events file")).into()),
        None if events.iter().any(|e| e.event_id == DEFAULT_REGRESSION_EVENT) => DEFAULT_REGRESSION_EVENT.to_owned(),
        None => events[0].event_id.clone(),
    };

    let result = run_event_study(&panel, &firms, &events)?;
    create_dir(a.out)?;
    let cars = a.out.join("car.csv");
    write_car_rows_csv(&result.car_rows, create(&cars)?)?;
    m.output(&cars);
    let table = group_event_table(&result.car_rows, &firms, &events, HEADLINE_WINDOW)?;
    let table_path = a.out.join("event_table.csv");
    write_event_table_csv(&table, create(&table_path)?)?;
    m.output(&table_path);

    let details = serde_json::json!({
        "headline_window": HEADLINE_WINDOW.label(),
        "event_day_rule": "day 0 is the first benchmark trading date on or after the event date",
        "day0": result.day0,
        "regression_event": reg_event,
        "dropped_missing_closes": panel.dropped_missing,
        "skipped": result.skipped.iter().map(|(e, t, r)| serde_json::json!({"event_id": e, "ticker": t, "reason": r})).collect::<Vec<_>>(),
    });
    m.details(details);
    let reg = cross_section_regression(&car_by_firm(&result.car_rows, &reg_event, HEADLINE_WINDOW), &firms);
    let manifest_path = a.out.join("manifest.json");
    match reg {
        Ok(reg) => {
            let path = a.out.join("regression.csv");
            write_regression_csv(&reg, create(&path)?)?;
            m.output(&path);
            m.finish(&manifest_path)?;
            Ok(())
        }
        Err(e) => {
            m.finish(&manifest_path)?;
            Err(anyhow::Error::from(e).context(format!("cross-sectional regression for {reg_event}")))
        }
    }
}

fn render_report(input: &Path, out: &Path) -> anyhow::Result<()> {
    let sweep_path = input.join("sweep.csv");
    let table_path = input.join("event_table.csv");
    let mut inputs: Vec<(String, Vec<u8>)> = Vec::new();
    let sweep = if sweep_path.is_file() {
        inputs.push(("sweep.csv".into(), read(&sweep_path)?));
        Some(read_sweep_csv::<f64>(&sweep_path)?)
    } else {
        None
    };
    let events = if table_path.is_file() {
        let bytes = read(&table_path)?;
        let rows = read_event_table_csv(bytes.as_slice()).with_context(|| table_path.display().to_string())?;
        inputs.push(("event_table.csv".into(), bytes));
        Some(rows)
    } else {
        None
    };
    let refs: Vec<(&str, &[u8])> = inputs.iter().map(|(n, b)| (n.as_str(), b.as_slice())).collect();
    let mut m = ManifestBuilder::new("report", inputs_digest(&refs), None);
    let svg = report::render(sweep.as_ref(), events.as_deref()).with_context(|| input.display().to_string())?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))?;
    m.output(out);
    m.finish(&sidecar(out))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(config.as_deref(), seed, &out),
        Command::Sweep { config, seed, out } => sweep(config.as_deref(), seed, &out),
        Command::Propositions { config, seed, out } => propositions(config.as_deref(), seed, &out),
        Command::ScoreFilings {
            filings,
            keywords,
            out,
            per_10k,
        } => score(&filings, keywords.as_deref(), &out, per_10k),
        Command::EventStudy {
            prices,
            firms,
            events,
            exposure,
            out,
            regression_event,
        } => event_study(EventStudyArgs {
            prices: &prices,
            firms: &firms,
            events: &events,
            exposure: &exposure,
            out: &out,
            regression_event: regression_event.as_deref(),
        }),
        Command::Report { input, out } => render_report(&input, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
