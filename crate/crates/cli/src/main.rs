//! `fairpath`: audit a classifier's scores for a direct protected-attribute
//! effect and derive a mitigation policy.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairpath_core::encoding::EncodingSchema;
use fairpath_core::synth::to_ingest_csv;
use fairpath_core::{
    build_schema, calibration_trial, encode, fit_logistic, generate, load_adult_csv, predict,
    run_audit, AuditConfig, Dataset, Error, Logistic, Result, SynthSpec, Variant,
};

#[derive(Parser)]
#[command(
    name = "fairpath",
    version,
    about = "Path-model bias audit for binary classifier scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and encode the data; report row counts and the encoding schema.
    Ingest(Common),
    /// Fit the reference logistic scorer on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Where to write the model dump (default: <out>/model.txt).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a split with a saved model; writes `row_index,score`.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Score the test split instead of the training split.
        #[arg(long)]
        split_test: bool,
        /// Subtract the bias path recorded in this policy file.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Output score file (default: stdout).
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Run the full pipeline and write the report files.
    Audit(Common),
    /// Generate a synthetic dataset and scores from the path model.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        /// Output directory for data.csv and scores.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection rate of the bias test over seeded synthetic trials.
    Calibrate {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

/// Settings shared by the data-driven subcommands. Each flag overrides the
/// same key from `--config`.
#[derive(Args)]
struct Common {
    /// Key-value config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<String>,
    /// Test split path, or `none`.
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    protected: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    positive_label: Option<String>,
    #[arg(long)]
    negative_label: Option<String>,
    #[arg(long)]
    group1_label: Option<String>,
    #[arg(long)]
    group0_label: Option<String>,
    /// Comma-separated columns to leave out of the features.
    #[arg(long)]
    drop: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// `row_index,score` file for the training split; replaces the built-in scorer.
    #[arg(long)]
    external_scores: Option<String>,
    #[arg(long)]
    external_test_scores: Option<String>,
    /// Round the bias coefficient to this many decimals, or `off`.
    #[arg(long)]
    round_coefficient: Option<String>,
    /// `all-rows` or `valid-rows`.
    #[arg(long)]
    rank_basis: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Common {
    fn config(&self) -> Result<AuditConfig> {
        let mut c = AuditConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        // Order matters: external-test-scores needs external-scores first.
        let flags = [
            ("train", &self.train),
            ("test", &self.test),
            ("protected", &self.protected),
            ("target", &self.target),
            ("positive-label", &self.positive_label),
            ("negative-label", &self.negative_label),
            ("group1-label", &self.group1_label),
            ("group0-label", &self.group0_label),
            ("drop", &self.drop),
            ("alpha", &self.alpha),
            ("external-scores", &self.external_scores),
            ("external-test-scores", &self.external_test_scores),
            ("round-coefficient", &self.round_coefficient),
            ("rank-basis", &self.rank_basis),
            ("max-iter", &self.max_iter),
            ("tol", &self.tol),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    p_a: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    beta_0_y: f64,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    beta_a_y: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    beta_0_yhat: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    beta_a_yhat: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    beta_y_yhat: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_sd: f64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            n: self.n,
            p_a: self.p_a,
            beta_0_y: self.beta_0_y,
            beta_a_y: self.beta_a_y,
            beta_0_yhat: self.beta_0_yhat,
            beta_a_yhat: self.beta_a_yhat,
            beta_y_yhat: self.beta_y_yhat,
            noise_sd: self.noise_sd,
            seed: self.seed,
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn out_dir(c: &AuditConfig) -> Result<Option<&Path>> {
    match &c.out_dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            Ok(Some(d))
        }
        None => Ok(None),
    }
}

/// Training split, optional test split, and the schema built from training.
fn load(c: &AuditConfig) -> Result<(EncodingSchema, Dataset, Option<Dataset>)> {
    let train_raw = load_adult_csv(&c.train, Variant::Train)?;
    let schema = build_schema(&train_raw, &c.schema)?;
    let train = encode(&train_raw, &schema)?;
    let test = match &c.test {
        Some(p) => Some(encode(&load_adult_csv(p, Variant::Test)?, &schema)?),
        None => None,
    };
    Ok((schema, train, test))
}

fn describe(name: &str, d: &Dataset) -> String {
    format!(
        "{name}: {} rows, {} valid, {} excluded, {} features",
        d.len(),
        d.valid_count(),
        d.len() - d.valid_count(),
        d.features().cols()
    )
}

fn cmd_ingest(common: &Common) -> Result<()> {
    let c = common.config()?;
    let (schema, train, test) = load(&c)?;
    println!("{}", describe("train", &train));
    if let Some(t) = &test {
        println!("{}", describe("test", t));
    }
    println!("schema fingerprint: {}", schema.fingerprint());
    if let Some(dir) = out_dir(&c)? {
        write(&dir.join("schema.txt"), &schema.dump())?;
    }
    Ok(())
}

fn cmd_train(common: &Common, model_path: Option<&Path>) -> Result<()> {
    let c = common.config()?;
    let (_, train, _) = load(&c)?;
    let model = fit_logistic(&train, &c.schema.protected, &c.logistic)?;
    for w in model.warnings() {
        eprintln!("warning: {w}");
    }
    println!(
        "fitted {} coefficients in {} iterations, deviance {:.6}",
        model.coefficients().len(),
        model.iterations(),
        model.deviance()
    );
    let target = match (model_path, out_dir(&c)?) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join("model.txt")),
        (None, None) => None,
    };
    match target {
        Some(p) => model.write_dump(&p),
        None => {
            print!("{}", model.dump());
            Ok(())
        }
    }
}

/// Reads `bias_coefficient` from a policy dump, checking the schema fingerprint.
fn policy_coefficient(path: &Path, fingerprint: &str) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut coefficient = None;
    for line in text.lines() {
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        match k.trim() {
            "schema_fingerprint" if v.trim() != fingerprint => {
                return Err(Error::FingerprintMismatch {
                    expected: fingerprint.to_string(),
                    found: v.trim().to_string(),
                })
            }
            "bias_coefficient" => {
                coefficient = Some(v.trim().parse().map_err(|_| {
                    Error::Config(format!("{}: bad bias_coefficient {v:?}", path.display()))
                })?)
            }
            _ => {}
        }
    }
    coefficient.ok_or_else(|| Error::Config(format!("{}: no bias_coefficient", path.display())))
}

fn cmd_score(
    common: &Common,
    model_path: &Path,
    split_test: bool,
    policy: Option<&Path>,
    scores_out: Option<&Path>,
) -> Result<()> {
    let c = common.config()?;
    let (schema, train, test) = load(&c)?;
    let data = if split_test {
        test.ok_or_else(|| Error::Config("--split-test needs a test split".into()))?
    } else {
        train
    };
    let model = Logistic::read_dump(model_path)?;
    let (data, unsupported) = model.mask_unsupported(&data);
    if !unsupported.is_empty() {
        eprintln!(
            "warning: {} rows use a dropped column and are not scored",
            unsupported.len()
        );
    }
    let scores = predict(&model, &data)?;
    let text = match policy {
        None => scores.to_csv(),
        Some(p) => {
            let beta = policy_coefficient(p, &schema.fingerprint())?;
            let mut out = String::from("row_index,score\n");
            for (i, s) in scores.raw().iter().enumerate() {
                if let Some(s) = s {
                    let m = s - beta * f64::from(data.a_of(i));
                    out.push_str(&format!("{i},{m:?}\n"));
                }
            }
            out
        }
    };
    match scores_out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_audit(common: &Common) -> Result<()> {
    let c = common.config()?;
    out_dir(&c)?;
    let run = run_audit(&c)?;
    print!("{}", run.report.render_tables());
    if let Some(dir) = &c.out_dir {
        println!("\nreport written to {}", dir.display());
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs, out: &Path) -> Result<()> {
    let (data, scores) = generate::<f64>(&args.spec())?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("data.csv"), &to_ingest_csv(&data))?;
    scores.write_csv(out.join("scores.csv"))?;
    println!("wrote {} rows to {}", data.len(), out.display());
    Ok(())
}

fn cmd_calibrate(args: &SynthArgs, trials: usize, alpha: f64) -> Result<()> {
    let r = calibration_trial(&args.spec(), trials, alpha)?;
    println!(
        "rejections {} / {} at alpha {} (rate {:.4})",
        r.rejections,
        r.trials,
        r.alpha,
        r.rate()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(common) => cmd_ingest(common),
        Command::Train { common, model } => cmd_train(common, model.as_deref()),
        Command::Score {
            common,
            model,
            split_test,
            policy,
            scores_out,
        } => cmd_score(
            common,
            model,
            *split_test,
            policy.as_deref(),
            scores_out.as_deref(),
        ),
        Command::Audit(common) => cmd_audit(common),
        Command::Synth { synth, out } => cmd_synth(synth, out),
        Command::Calibrate {
            synth,
            trials,
            alpha,
        } => cmd_calibrate(synth, *trials, *alpha),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
