mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mermin_core::extended::builtin::{ModelSpec, PSpec};
use mermin_core::extended::{model_report, ModelReport, PairSchedule};
use mermin_core::fallacy::{self, AuditOutcome, CoinConfig, CountLedger, Magnet};
use mermin_core::instruction::{average_eq1, BoundReport};
use mermin_core::rational::{self, Rational};
use mermin_core::realizability::{joint_realizability, NineDistributions, RealizabilityResult};
use mermin_core::runlog;
use mermin_core::types::{product_table, InstructionSet, Outcome, ProbabilityVector8, SettingPair};
use mermin_core::MasterSeed;

#[derive(Parser, Debug)]
#[command(
    name = "mermin",
    version,
    about = "Instruction-set bounds, realizability and local-model simulation"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Output format; defaults to text for `table` and json elsewhere.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// JSON file whose keys mirror the long flags (plus an optional "command").
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Counting {
    Actual,
    Potential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Quantum,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the outcome products of every instruction set under every setting pair.
    Table,
    /// Average product of the instruction-set model for a law over the eight rows.
    Bound {
        /// `uniform`, `point:RRG` or eight comma-separated rationals.
        #[arg(long, conflicts_with = "p_file", required_unless_present = "p_file")]
        p: Option<String>,
        /// JSON file holding the law as an array, a string, or {"p": ...}.
        #[arg(long)]
        p_file: Option<PathBuf>,
    },
    /// Decide whether nine pair tables come from one law over instruction sets.
    Realize {
        /// JSON document with the nine tables.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a local model and summarise the runs.
    Simulate {
        /// Built-in selector (`static:<p>`, `timeslot`, `desync[:<jitter>]`) or a model config file.
        #[arg(long)]
        model: String,
        #[arg(long)]
        runs: u64,
        #[arg(long)]
        seed: u64,
        /// Setting-pair schedule: `balanced` or `iid`.
        #[arg(long, default_value = "balanced")]
        pairs: String,
        #[arg(long)]
        out_log: Option<PathBuf>,
        #[arg(long)]
        out_stats: Option<PathBuf>,
    },
    /// Magnetic-coin experiment: honest frequency against the double-counting estimate.
    Coin {
        #[arg(long, default_value = "7/10")]
        bias_n: String,
        #[arg(long, default_value = "3/10")]
        bias_s: String,
        /// Pattern such as `N*70000,S*30000`, or a file containing one.
        #[arg(long)]
        choices: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a counting procedure counts one element per run.
    Audit {
        /// Run log CSV written by `simulate`.
        #[arg(long, conflicts_with = "ledger", required_unless_present = "ledger")]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "actual")]
        counting: Counting,
        /// Count ledger JSON: {"entries": [[label, count], ...], "declared_run_count": N}.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Number of runs; defaults to the log length or the ledger's declared count.
        #[arg(long)]
        runs: Option<u64>,
    },
}

/// Bad flag combination detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Table => table(format.unwrap_or(Format::Text)),
        Command::Bound { p, p_file } => bound(format.unwrap_or(Format::Json), p, p_file),
        Command::Realize { input, preset, out } => {
            realize(format.unwrap_or(Format::Json), input, preset, out)
        }
        Command::Simulate {
            model,
            runs,
            seed,
            pairs,
            out_log,
            out_stats,
        } => simulate(
            format.unwrap_or(Format::Json),
            &model,
            runs,
            seed,
            &pairs,
            out_log,
            out_stats,
        ),
        Command::Coin {
            bias_n,
            bias_s,
            choices,
            seed,
            out,
        } => coin(
            format.unwrap_or(Format::Json),
            &bias_n,
            &bias_s,
            &choices,
            seed,
            out,
        ),
        Command::Audit {
            log,
            counting,
            ledger,
            runs,
        } => audit(format.unwrap_or(Format::Json), log, counting, ledger, runs),
    }
}

fn unsupported(format: Format, what: &str) -> anyhow::Error {
    UsageError(format!("--format {format:?} is not available for {what}").to_lowercase()).into()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn table(format: Format) -> Result<()> {
    let t = product_table();
    let text = match format {
        Format::Text => {
            let mut s = String::from("    ");
            for pair in SettingPair::ALL {
                s.push_str(&format!(" {pair:>2}"));
            }
            s.push('\n');
            for (row, products) in t.rows() {
                s.push_str(&row.to_string());
                s.push(' ');
                for o in products {
                    s.push_str(&format!(" {o}"));
                }
                s.push('\n');
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("instruction");
            for pair in SettingPair::ALL {
                s.push_str(&format!(",{pair}"));
            }
            s.push('\n');
            for (row, products) in t.rows() {
                s.push_str(&row.to_string());
                for o in products {
                    s.push_str(&format!(",{}", o.value()));
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = t
                .rows()
                .map(|(row, products)| json!({"instruction": row, "products": products}))
                .collect();
            to_json(&json!({"pairs": SettingPair::ALL, "rows": rows}))?
        }
    };
    emit(None, &text)
}

fn read_p_file(path: &Path) -> Result<ProbabilityVector8> {
    let value: serde_json::Value = read_json(path)?;
    let value = match value {
        serde_json::Value::Object(mut map) if map.contains_key("p") => {
            map.remove("p").unwrap_or_default()
        }
        other => other,
    };
    let spec: PSpec = serde_json::from_value(value)
        .with_context(|| format!("reading a law from {}", path.display()))?;
    Ok(spec.resolve()?)
}

fn bound(format: Format, p: Option<String>, p_file: Option<PathBuf>) -> Result<()> {
    let p = match (p, p_file) {
        (Some(text), _) => text.parse::<ProbabilityVector8>()?,
        (None, Some(path)) => read_p_file(&path)?,
        (None, None) => return Err(UsageError("one of --p or --p-file is required".into()).into()),
    };
    let report = average_eq1(&p);
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Text => bound_text(&report),
        Format::Csv => return Err(unsupported(format, "bound")),
    };
    emit(None, &text)
}

fn bound_text(r: &BoundReport) -> String {
    let rows: Vec<&str> = r.equality_rows.iter().map(String::as_str).collect();
    format!(
        "average: {}\nbound: {}\nmargin: {}\nsatisfied: {}\nequality: {}\nequality rows: {}\n",
        rational::format(&r.average),
        rational::format(&r.bound),
        rational::format(&r.margin),
        r.satisfied,
        r.equality,
        rows.join(" ")
    )
}

fn realize(
    format: Format,
    input: Option<PathBuf>,
    preset: Option<Preset>,
    out: Option<PathBuf>,
) -> Result<()> {
    let nine: NineDistributions = match (input, preset) {
        (Some(path), _) => read_json(&path)?,
        (None, Some(Preset::Quantum)) => NineDistributions::quantum_target(),
        (None, None) => {
            return Err(UsageError("one of --input or --preset is required".into()).into())
        }
    };
    let result = joint_realizability(&nine);
    let text = match format {
        Format::Json => to_json(&result)?,
        Format::Text => realize_text(&result)?,
        Format::Csv => return Err(unsupported(format, "realize")),
    };
    emit(out.as_deref(), &text)
}

fn realize_text(r: &RealizabilityResult) -> Result<String> {
    let mut s = format!("status: {:?}\n", r.status);
    if let Some(w) = &r.witness {
        for (row, p) in InstructionSet::ALL.iter().zip(w.as_slice()) {
            s.push_str(&format!("{row} {}\n", rational::format(p)));
        }
    }
    if let Some(c) = &r.certificate {
        s.push_str("certificate:\n");
        s.push_str(&to_json(c)?);
    }
    Ok(s)
}

fn load_model(selector: &str) -> Result<ModelSpec> {
    let path = Path::new(selector);
    if path.is_file() {
        return read_json(path);
    }
    Ok(ModelSpec::from_selector(selector)?)
}

fn simulate(
    format: Format,
    model: &str,
    runs: u64,
    seed: u64,
    pairs: &str,
    out_log: Option<PathBuf>,
    out_stats: Option<PathBuf>,
) -> Result<()> {
    let schedule: PairSchedule = pairs
        .parse()
        .map_err(|e| UsageError(format!("--pairs: {e}")))?;
    let model = load_model(model)?.build()?;
    let (report, records) = model_report(&model, runs, MasterSeed(seed), schedule)?;
    if let Some(path) = &out_log {
        let file =
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = io::BufWriter::new(file);
        runlog::write_run_log(&records, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &out_stats {
        emit(Some(path), &to_json(&report)?)?;
    }
    let text = match format {
        Format::Json => {
            if out_stats.is_some() {
                return Ok(());
            }
            to_json(&report)?
        }
        Format::Text => simulate_text(&report),
        Format::Csv => pair_counts_csv(&report),
    };
    emit(None, &text)
}

fn simulate_text(r: &ModelReport) -> String {
    let opt = |v: &Option<Rational>| v.as_ref().map_or("undefined".to_string(), rational::format);
    let mut s = format!(
        "model: {}\nseed: {}\nruns: {}\n",
        r.model, r.seed, r.stats.runs
    );
    s.push_str(&format!(
        "average (uniform over pairs): {}\n",
        opt(&r.stats.overall_average_uniform)
    ));
    s.push_str(&format!(
        "average (per run): {}\n",
        opt(&r.stats.overall_average_runweighted)
    ));
    if let Some(e) = &r.stats.estimate {
        s.push_str(&format!("estimate: {} +/- {}\n", e.value, e.std_error));
    }
    if let Some(m) = &r.stats.marginal_report {
        s.push_str(&format!("marginals consistent: {}\n", m.consistent));
    }
    if let Some(real) = &r.stats.realizability {
        s.push_str(&format!("realizability: {:?}\n", real.status));
    }
    let pc = &r.perfect_correlation.overall;
    s.push_str(&format!(
        "same-setting agreement: {}/{} (equal times: {}/{})\n",
        pc.agreements, pc.runs, pc.equal_time_agreements, pc.equal_time_runs
    ));
    s
}

fn pair_counts_csv(r: &ModelReport) -> String {
    let mut s = String::from("pair,++,+-,-+,--\n");
    for pair in SettingPair::ALL {
        let counts = &r.stats.per_pair_counts[&pair.to_string()];
        let cell = |x: Outcome, y: Outcome| counts[&format!("{}{}", x.sign(), y.sign())];
        s.push_str(&format!(
            "{pair},{},{},{},{}\n",
            cell(Outcome::Plus, Outcome::Plus),
            cell(Outcome::Plus, Outcome::Minus),
            cell(Outcome::Minus, Outcome::Plus),
            cell(Outcome::Minus, Outcome::Minus)
        ));
    }
    s
}

fn read_choices(choices: &str) -> Result<Vec<Magnet>> {
    let path = Path::new(choices);
    let pattern = if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        choices.to_string()
    };
    Ok(fallacy::parse_choices(&pattern)?)
}

#[derive(Serialize)]
struct CoinReport {
    seed: u64,
    tosses: usize,
    #[serde(with = "rational::serde_str")]
    bias_n: Rational,
    #[serde(with = "rational::serde_str")]
    bias_s: Rational,
    heads: u64,
    #[serde(with = "rational::serde_str")]
    honest_frequency: Rational,
    #[serde(with = "rational::serde_str_opt")]
    honest_frequency_given_n: Option<Rational>,
    #[serde(with = "rational::serde_str_opt")]
    honest_frequency_given_s: Option<Rational>,
    #[serde(with = "rational::serde_str")]
    naive_estimate: Rational,
    /// Audit of the ledger the naive estimator counts from.
    audit: AuditOutcome,
    audit_actual: AuditOutcome,
}

fn coin(
    format: Format,
    bias_n: &str,
    bias_s: &str,
    choices: &str,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = CoinConfig::new(rational::parse(bias_n)?, rational::parse(bias_s)?)?;
    let choices = read_choices(choices)?;
    let log = fallacy::run_coin_experiment(&cfg, &choices, MasterSeed(seed))?;
    let runs = log.len() as u64;
    let report = CoinReport {
        seed,
        tosses: log.len(),
        bias_n: cfg.bias(Magnet::N).clone(),
        bias_s: cfg.bias(Magnet::S).clone(),
        heads: log.heads(),
        honest_frequency: fallacy::honest_frequency(&log)?,
        honest_frequency_given_n: fallacy::honest_frequency_given(&log, Magnet::N),
        honest_frequency_given_s: fallacy::honest_frequency_given(&log, Magnet::S),
        naive_estimate: fallacy::naive_double_count(&log)?,
        audit: fallacy::audit_counts(&fallacy::coin_potential_ledger(&log), runs)?,
        audit_actual: fallacy::audit_counts(&fallacy::coin_actual_ledger(&log), runs)?,
    };
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Text => format!(
            "tosses: {}\nheads: {}\nhonest frequency: {}\nnaive estimate: {}\naudit (naive ledger): {}\naudit (observed ledger): {}\n",
            report.tosses,
            report.heads,
            rational::format(&report.honest_frequency),
            rational::format(&report.naive_estimate),
            report.audit,
            report.audit_actual
        ),
        Format::Csv => return Err(unsupported(format, "coin")),
    };
    emit(out.as_deref(), &text)
}

fn audit(
    format: Format,
    log: Option<PathBuf>,
    counting: Counting,
    ledger: Option<PathBuf>,
    runs: Option<u64>,
) -> Result<()> {
    let (ledger, default_runs) = match (log, ledger) {
        (Some(path), _) => {
            let file =
                fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let records = runlog::read_run_log(io::BufReader::new(file))?;
            let ledger = match counting {
                Counting::Actual => fallacy::epr_actual_ledger(&records),
                Counting::Potential => fallacy::epr_potential_ledger(&records),
            };
            (ledger, records.len() as u64)
        }
        (None, Some(path)) => {
            let ledger: CountLedger = read_json(&path)?;
            let declared = ledger.declared_run_count;
            (ledger, declared)
        }
        (None, None) => {
            return Err(UsageError("one of --log or --ledger is required".into()).into())
        }
    };
    let outcome = fallacy::audit_counts(&ledger, runs.unwrap_or(default_runs))?;
    let text = match format {
        Format::Json => to_json(&outcome)?,
        Format::Text => format!("{outcome}\n"),
        Format::Csv => return Err(unsupported(format, "audit")),
    };
    emit(None, &text)
}
