//! Subcommands. Exit status is 0 on success, 1 when the operation itself
//! fails, 2 for bad arguments or configuration.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use revenue_core::agent::{
    evaluate, read_examples, to_training_pairs, train, write_examples, AnnModel, LabeledExample, Metrics,
    TrainOptions, DEFAULT_ALERT_THRESHOLD, LAYER_SIZES,
};
use revenue_core::miner::MiningReport;
use revenue_core::sim::{simulate, Credentials, FraudMix, SimulationOutcome, SimulationSpec};
use revenue_core::workflow::WorkflowError;

use crate::client::{ApiClient, HttpGateway};
use crate::config::{Config, ConfigError};
use crate::server::{self, Deployment, ServeError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_EPOCHS: usize = 3000;
pub const DEFAULT_LEARNING_RATE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Config(c) => CliError::Config(c),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<WorkflowError> for CliError {
    fn from(e: WorkflowError) -> Self {
        CliError::Domain(e.display_message().map(|m| m.text().to_string()).unwrap_or_else(|| e.to_string()))
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Domain(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "revctl", version, about = "Revenue collection service: API server and operator tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Path to the TOML config file.
    #[arg(long, short, default_value = "rev.toml")]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API until interrupted.
    Serve(ConfigArg),
    /// Import taxpayers from a capture CSV into the pool.
    Seed {
        #[command(flatten)]
        config: ConfigArg,
        /// Capture CSV with the standard header.
        csv: PathBuf,
        /// Also issue TINs (and spool notifications) for every imported taxpayer.
        #[arg(long)]
        issue_tins: bool,
    },
    /// Classify every business into a tier and assess its tax.
    Mine(ConfigArg),
    /// Write the current assessments as a mining report CSV.
    Report {
        #[command(flatten)]
        config: ConfigArg,
        /// Output file; `-` for stdout.
        #[arg(long, short, default_value = "-")]
        out: PathBuf,
    },
    /// Drive honest and fraudulent payment streams against a running API.
    Simulate(SimulateArgs),
    /// Train the fraud scorer on a labeled example file.
    Train {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Score labeled examples and print precision, recall and AUC.
    Eval {
        /// Model file; omit to score with an untrained (all-zero) model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALERT_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// API base URL; defaults to the config's bind address.
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub taxpayers: usize,
    #[arg(long, default_value_t = 1)]
    pub months: u32,
    /// Behavior shares, e.g. `honest=0.8,suppression=0.05,stolen_code=0.05,replay=0.05,fabricated_code=0.05`.
    #[arg(long)]
    pub mix: Option<FraudMix>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Prefix for the staff accounts the run creates.
    #[arg(long, default_value = "sim")]
    pub namespace: String,
    /// Where to write the labeled examples.
    #[arg(long)]
    pub examples: PathBuf,
    /// Where to write the ground-truth CSV.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Reference time for the captured periods (RFC 3339); defaults to now.
    #[arg(long)]
    pub as_of: Option<DateTime<Utc>>,
    #[arg(long)]
    pub admin_user: Option<String>,
    #[arg(long)]
    pub admin_password: Option<String>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Serve(c) => serve(&Config::load(&c.config)?),
        Command::Seed { config, csv, issue_tins } => seed(&Config::load(&config.config)?, &csv, issue_tins, out),
        Command::Mine(c) => mine(&Config::load(&c.config)?, out),
        Command::Report { config, out: path } => report(&Config::load(&config.config)?, &path, out),
        Command::Simulate(args) => {
            let config = Config::load(&args.config.config)?;
            simulate_cmd(&config, &args, out).map(drop)
        }
        Command::Train { examples, out: path, epochs, lr, seed } => train_cmd(&examples, &path, epochs, lr, seed, out),
        Command::Eval { model, examples, threshold } => eval_cmd(model.as_deref(), &examples, threshold, out).map(drop),
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) {
    let _ = writeln!(out, "{line}");
}

pub fn serve(config: &Config) -> Result<(), CliError> {
    let deployment = Deployment::open(config.clone())?;
    deployment.bootstrap_admin()?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Domain(format!("runtime: {e}")))?;
    let served = rt.block_on(async {
        let listener = server::bind(config.bind).await?;
        tracing::info!(addr = %config.bind, pool = %config.pool_dir.display(), "serving");
        server::serve(listener, deployment.service.clone(), config.static_dir.clone(), server::shutdown_signal())
            .await
            .map_err(|e| ServeError::Io { path: config.pool_dir.clone(), source: e })
    });
    let closed = deployment.close();
    tracing::info!(last_seq = deployment.service.pool().last_seq(), "pool closed");
    served?;
    closed?;
    Ok(())
}

pub fn seed(config: &Config, csv: &Path, issue_tins: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(csv).map_err(|e| io_error(csv, e))?;
    let deployment = Deployment::open(config.clone())?;
    let sys = deployment.service.system();
    let result = (|| {
        let batch = sys.import_captures(&text)?;
        say(out, format_args!("imported {} row(s)", batch.stored.len()));
        if issue_tins {
            for c in &batch.stored {
                let grant = sys.issue_tin(&c.taxpayer_id)?;
                say(out, format_args!("{} {}", grant.taxpayer_id, grant.tin));
            }
        }
        Ok::<_, CliError>(batch)
    })();
    deployment.close()?;
    let batch = result?;
    if batch.failures.is_empty() {
        Ok(())
    } else {
        let lines: Vec<String> = batch.failures.iter().map(|f| format!("row {}: {}", f.row, f.reason)).collect();
        Err(CliError::Domain(format!("{} row(s) rejected\n{}", batch.failures.len(), lines.join("\n"))))
    }
}

pub fn mine(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    let deployment = Deployment::open(config.clone())?;
    let result = deployment.service.system().mine();
    deployment.close()?;
    let outcome = result?;
    say(out, outcome.display_message.text());
    for (tier, count) in outcome.report.content().0 {
        say(out, format_args!("{tier}\t{count}"));
    }
    say(out, format_args!("total_tax_kobo\t{}", outcome.report.total_tax().kobo()));
    Ok(())
}

pub fn report(config: &Config, path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let deployment = Deployment::open(config.clone())?;
    let report = deployment.service.pool().read(MiningReport::from_state);
    deployment.close()?;
    let csv = report.to_csv();
    if path == Path::new("-") {
        let _ = out.write_all(csv.as_bytes());
    } else {
        fs::write(path, csv).map_err(|e| io_error(path, e))?;
        say(out, format_args!("{} business(es), total tax {} kobo", report.content().1.len(), report.total_tax().kobo()));
    }
    Ok(())
}

pub fn simulate_cmd(config: &Config, args: &SimulateArgs, out: &mut dyn Write) -> Result<SimulationOutcome, CliError> {
    let admin = match (&args.admin_user, &args.admin_password, &config.admin) {
        (Some(u), Some(p), _) => Credentials { username: u.clone(), password: p.clone() },
        (None, None, Some(a)) => Credentials { username: a.username.clone(), password: a.password.clone() },
        _ => return Err(CliError::Usage("administrator credentials: set [admin] in the config or pass both --admin-user and --admin-password".into())),
    };
    let mut spec = SimulationSpec::new(args.taxpayers, args.mix.clone().unwrap_or_else(FraudMix::standard), args.seed);
    spec.months = args.months;
    spec.parallelism = args.parallelism;
    spec.namespace = args.namespace.clone();
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let url = args.url.clone().unwrap_or_else(|| format!("http://{}", config.bind));
    let client = ApiClient::new(&url).map_err(|e| CliError::Domain(e.to_string()))?;
    match client.get("/api/health", None) {
        Ok(r) if r.is_success() => {}
        Ok(r) => return Err(CliError::Domain(format!("service at {url} answered {}", r.status))),
        Err(e) => return Err(CliError::Domain(format!("service unreachable at {url}: {}", e.message))),
    }
    let gateway = HttpGateway::new(client, &config.spool_dir);
    let outcome = simulate(&gateway, &spec, &admin, args.as_of.unwrap_or_else(Utc::now))
        .map_err(|e| CliError::Domain(e.to_string()))?;

    let file = fs::File::create(&args.examples).map_err(|e| io_error(&args.examples, e))?;
    write_examples(io::BufWriter::new(file), &outcome.examples).map_err(|e| io_error(&args.examples, e))?;
    fs::write(&args.ground_truth, outcome.ground_truth_csv()).map_err(|e| io_error(&args.ground_truth, e))?;

    say(out, "behavior\tattempts\tfraudulent\taccepted\trule_flagged");
    for (b, s) in outcome.summary() {
        say(out, format_args!("{}\t{}\t{}\t{}\t{}", b.as_str(), s.attempts, s.fraudulent, s.accepted, s.rule_flagged));
    }
    say(out, format_args!("rule_recall\t{:.4}", outcome.rule_recall()));
    say(out, format_args!("honest_rule_flags\t{}", outcome.honest_rule_flags()));
    say(out, format_args!("examples\t{}", outcome.examples.len()));
    Ok(outcome)
}

pub fn load_examples(path: &Path) -> Result<Vec<LabeledExample>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    read_examples(io::BufReader::new(file)).map_err(|e| io_error(path, e))
}

pub fn train_cmd(examples: &Path, path: &Path, epochs: usize, lr: f64, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    if epochs == 0 || !(lr > 0.0 && lr.is_finite()) {
        return Err(CliError::Usage("epochs must be positive and lr a positive number".into()));
    }
    let data = load_examples(examples)?;
    let pairs = to_training_pairs(&data);
    let opts = TrainOptions { epochs, learning_rate: lr, seed, base_version: 0 };
    let (model, curve) = train(&LAYER_SIZES, &pairs, opts).map_err(|e| CliError::Domain(e.to_string()))?;
    model.save(path).map_err(|e| io_error(path, e))?;
    let first = curve.first().copied().unwrap_or(f64::NAN);
    let last = curve.last().copied().unwrap_or(f64::NAN);
    say(out, format_args!("trained on {} example(s): loss {first:.6} -> {last:.6}", data.len()));
    say(out, format_args!("wrote {}", path.display()));
    Ok(())
}

pub fn score_examples(model: &AnnModel, examples: &[LabeledExample]) -> Result<Vec<f64>, CliError> {
    examples
        .iter()
        .map(|e| model.forward(&e.features.to_array()).map_err(|err| CliError::Domain(err.to_string())))
        .collect()
}

pub fn eval_cmd(model: Option<&Path>, examples: &Path, threshold: f64, out: &mut dyn Write) -> Result<Metrics, CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("threshold must be in [0, 1], got {threshold}")));
    }
    let model = match model {
        Some(p) => AnnModel::load(p).map_err(|e| io_error(p, e))?,
        None => AnnModel::zeros(&LAYER_SIZES, 0),
    };
    let data = load_examples(examples)?;
    if data.is_empty() {
        return Err(CliError::Domain(format!("{}: no examples", examples.display())));
    }
    let scores = score_examples(&model, &data)?;
    let labels: Vec<bool> = data.iter().map(LabeledExample::is_fraud).collect();
    let m = evaluate(&scores, &labels, threshold);
    say(out, format_args!("examples\t{}", data.len()));
    say(out, format_args!("positives\t{}", labels.iter().filter(|&&y| y).count()));
    say(out, format_args!("threshold\t{:.4}", m.threshold));
    say(out, format_args!("precision\t{:.4}", m.precision));
    say(out, format_args!("recall\t{:.4}", m.recall));
    say(out, format_args!("accuracy\t{:.4}", m.accuracy));
    say(out, format_args!("auc\t{:.4}", m.auc));
    Ok(m)
}
