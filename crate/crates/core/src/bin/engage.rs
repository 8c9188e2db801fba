//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 when the
//! program itself fails (a panic).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use engage::eval::{
    ablate_emotions, read_report_csv, render_report_rows, run_experiment, sweep_z, train_model, write_report_csv,
    ExperimentConfig, ReportRow,
};
use engage::ingest::{
    clip_frame_census, parse_emotion_set, parse_feature_stream, parse_label_table, Dataset, ParseOptions, SplitName,
    FEATURES_FILE, LABELS_FILE, SPLITS_FILE,
};
use engage::labels::{adapt_dataset, balance_undersample, render_distribution_table, write_adapted_labels, AdaptedLabel};
use engage::learn::{load_model, save_model, ClassifierSpec, DistanceMetric, ModelKind, ModelMetadata, TrainedModel};
use engage::pipeline::{featurize_clip, featurize_dataset, write_featurized, FeaturizationConfig, WeightProfile};
use engage::synth::{generate, SynthConfig};
use engage::{PolicyId, ShortClipPolicy};

#[derive(Parser)]
#[command(name = "engage", version, about = "Learner-engagement detection from per-frame emotion streams")]
struct Cli {
    /// Worker threads for featurization, sweeps and ablations (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and summarize it.
    Ingest(IngestArgs),
    /// Count clips whose face-bearing frame count meets each threshold.
    Census(CensusArgs),
    /// Map four-state severities to binary labels under a policy.
    Adapt(AdaptArgs),
    /// Undersample the majority class of adapted labels.
    Balance(BalanceArgs),
    /// Turn frame streams into fixed-length feature vectors.
    Featurize(FeaturizeArgs),
    /// Fit a classifier on the train and validation splits.
    Train(TrainArgs),
    /// Score clips with a saved model.
    Predict(PredictArgs),
    /// Train and score one configuration on the test split.
    Evaluate(EvaluateArgs),
    /// Evaluate every (z, m) cell of a grid.
    Sweep(SweepArgs),
    /// Evaluate the baseline and each single-emotion removal.
    Ablate(AblateArgs),
    /// Generate a synthetic dataset with planted labels.
    Synth(SynthArgs),
    /// Render report CSV files as an aligned table.
    Report(ReportArgs),
}

#[derive(Args, Serialize)]
struct DataArgs {
    /// Directory holding features.jsonl, labels.csv and splits.csv.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Accept emotion vectors that do not sum to one (scores must still lie in [0, 1]).
    #[arg(long)]
    allow_unnormalized: bool,
}

impl DataArgs {
    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            require_normalized: !self.allow_unnormalized,
        }
    }

    fn load(&self) -> Result<Dataset> {
        Dataset::load_dir(&self.data, &self.parse_options())
            .with_context(|| format!("loading dataset from {}", self.data.display()))
    }

    /// SHA-256 over the three input files, in a fixed order.
    fn digest(&self) -> Result<String> {
        let mut bytes = Vec::new();
        for name in [FEATURES_FILE, LABELS_FILE, SPLITS_FILE] {
            let path = self.data.join(name);
            bytes.extend(engage::sha256_hex(&read(&path)?).into_bytes());
        }
        Ok(engage::sha256_hex(&bytes))
    }
}

#[derive(Args, Serialize)]
struct FeatureArgs {
    /// Frame stride.
    #[arg(long, default_value_t = 30)]
    z: usize,
    /// Frames kept per clip.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Emotions to remove, comma separated, or "none" (ablate ignores the
    /// default and starts from no removals).
    #[arg(long, default_value = "angry")]
    drop: String,
    /// Seven comma-separated per-emotion weights in (0, 1]; default is the
    /// emotion network's true-positive rates.
    #[arg(long)]
    weights: Option<String>,
    /// Use raw emotion scores instead of weighted ones.
    #[arg(long)]
    no_weighting: bool,
    /// Handling of clips too short for the stride: reject or uniform_resample.
    #[arg(long, default_value_t = ShortClipPolicy::Reject)]
    short_clip: ShortClipPolicy,
}

impl FeatureArgs {
    fn config(&self) -> Result<FeaturizationConfig> {
        let weights = match &self.weights {
            None => WeightProfile::tp_rates(),
            Some(text) => {
                let values: Vec<f64> = text
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .context("--weights: expected seven numbers")?;
                let array: [f64; 7] = values
                    .try_into()
                    .map_err(|v: Vec<f64>| anyhow::anyhow!("--weights: expected 7 values, got {}", v.len()))?;
                WeightProfile::new(array).context("--weights")?
            }
        };
        let cfg = FeaturizationConfig {
            z: self.z,
            m: self.m,
            dropped_emotions: parse_emotion_set(&self.drop).map_err(|e| anyhow::anyhow!("--drop: {e}"))?,
            weights,
            short_clip_policy: self.short_clip,
            weighting_enabled: !self.no_weighting,
        };
        cfg.validate().context("featurization flags")?;
        Ok(cfg)
    }
}

#[derive(Args, Serialize)]
struct ModelArgs {
    /// Classifier: knn, logreg or mlp.
    #[arg(long, default_value_t = ModelKind::Knn)]
    model: ModelKind,
    /// KNN neighbours (odd) [default: 5].
    #[arg(long)]
    k: Option<usize>,
    /// KNN distance: euclidean or manhattan [default: euclidean].
    #[arg(long)]
    metric: Option<DistanceMetric>,
    /// Gradient-descent epochs [default: 500 for logreg, 200 for mlp].
    #[arg(long)]
    epochs: Option<usize>,
    /// Gradient-descent step size [default: 0.1 for logreg, 0.05 for mlp].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Logistic-regression L2 penalty [default: 0.001].
    #[arg(long)]
    l2: Option<f64>,
    /// MLP hidden units [default: 64].
    #[arg(long)]
    hidden: Option<usize>,
}

impl ModelArgs {
    fn spec(&self) -> Result<ClassifierSpec> {
        let mut spec = ClassifierSpec::default_for(self.model);
        let unused = |flag: &str| anyhow::anyhow!("--{flag} does not apply to --model {}", self.model);
        match &mut spec {
            ClassifierSpec::Knn { k, metric } => {
                if self.epochs.is_some() || self.learning_rate.is_some() || self.l2.is_some() || self.hidden.is_some() {
                    bail!(unused("epochs/--learning-rate/--l2/--hidden"));
                }
                *k = self.k.unwrap_or(*k);
                *metric = self.metric.unwrap_or(*metric);
            }
            ClassifierSpec::Logreg {
                epochs,
                learning_rate,
                l2,
            } => {
                if self.k.is_some() || self.metric.is_some() || self.hidden.is_some() {
                    bail!(unused("k/--metric/--hidden"));
                }
                *epochs = self.epochs.unwrap_or(*epochs);
                *learning_rate = self.learning_rate.unwrap_or(*learning_rate);
                *l2 = self.l2.unwrap_or(*l2);
            }
            ClassifierSpec::Mlp {
                hidden,
                epochs,
                learning_rate,
            } => {
                if self.k.is_some() || self.metric.is_some() || self.l2.is_some() {
                    bail!(unused("k/--metric/--l2"));
                }
                *hidden = self.hidden.unwrap_or(*hidden);
                *epochs = self.epochs.unwrap_or(*epochs);
                *learning_rate = self.learning_rate.unwrap_or(*learning_rate);
            }
        }
        if let ClassifierSpec::Knn { k, .. } = spec {
            if k == 0 || k % 2 == 0 {
                bail!("--k must be a positive odd number, got {k}");
            }
        }
        Ok(spec)
    }
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Label policy, e.g. engagement or engagement_confusion.
    #[arg(long, default_value_t = PolicyId::EngagementConfusion)]
    policy: PolicyId,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Seed for balancing and training unless overridden below.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the undersampling of the training pool [default: --seed].
    #[arg(long)]
    balance_seed: Option<u64>,
    /// Seed for classifier initialization [default: --seed].
    #[arg(long)]
    train_seed: Option<u64>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            policy: self.policy,
            featurization: self.features.config()?,
            classifier: self.model.spec()?,
            balance_seed: self.balance_seed.unwrap_or(self.seed),
            training_seed: self.train_seed.unwrap_or(self.seed),
        })
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct CensusArgs {
    /// Frame stream in JSON Lines.
    #[arg(long, value_name = "FILE")]
    features: PathBuf,
    #[arg(long)]
    allow_unnormalized: bool,
}

#[derive(Args)]
struct AdaptArgs {
    /// Label table with header ClipID,Boredom,Engagement,Confusion,Frustration.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    #[arg(long, default_value_t = PolicyId::EngagementConfusion)]
    policy: PolicyId,
    /// Adapted labels CSV (ClipID,AdaptedLabel); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also print the distribution under every policy.
    #[arg(long)]
    all_policies: bool,
}

#[derive(Args)]
struct BalanceArgs {
    /// Label table with header ClipID,Boredom,Engagement,Confusion,Frustration.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    #[arg(long, default_value_t = PolicyId::EngagementConfusion)]
    policy: PolicyId,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Balanced list as CSV (ClipID,AdaptedLabel); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    features: FeatureArgs,
    /// Output JSON Lines of {clip_id, config_digest, flattened}.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Where to write the model JSON.
    #[arg(long, value_name = "FILE")]
    model_out: PathBuf,
    /// Timestamp recorded in the model metadata.
    #[arg(long, default_value = "1970-01-01T00:00:00Z")]
    created_at: String,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by train or evaluate.
    #[arg(long, value_name = "FILE")]
    model_file: PathBuf,
    /// Frame stream in JSON Lines.
    #[arg(long, value_name = "FILE")]
    features: PathBuf,
    #[arg(long)]
    allow_unnormalized: bool,
    /// Predictions CSV (ClipID,Score,Label); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Report CSV for the balanced test set; the full test set goes to
    /// <stem>_unbalanced.csv beside it.
    #[arg(long, value_name = "FILE", default_value = "report.csv")]
    report: PathBuf,
    /// Also write the trained model.
    #[arg(long, value_name = "FILE")]
    model_out: Option<PathBuf>,
    #[arg(long, default_value = "1970-01-01T00:00:00Z")]
    created_at: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated strides to try.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30])]
    z_values: Vec<usize>,
    /// Comma-separated frame counts to try.
    #[arg(long, value_delimiter = ',', default_values_t = [10])]
    m_values: Vec<usize>,
    #[arg(long, value_name = "FILE", default_value = "sweep.csv")]
    report: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_name = "FILE", default_value = "ablation.csv")]
    report: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 400)]
    clips: usize,
    #[arg(long, default_value_t = 300)]
    frames: usize,
    /// Strength of the planted label signal in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    separability: f64,
    /// Emotions carrying the label, comma separated.
    #[arg(long, default_value = "happy,sad")]
    informative: String,
    /// Per-frame logit noise.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Probability that a frame has no face, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSV files to render.
    #[arg(required = true, value_name = "FILE")]
    inputs: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writes to `path` when given, otherwise to stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn show_config(command: &str, config: &impl Serialize) {
    let text = serde_json::to_string(config).expect("config serializes");
    eprintln!("engage {command}: {text}");
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = create(path)?;
    write_report_csv(rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn write_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(&save_model(model))?;
    out.flush()?;
    Ok(())
}

fn stamp(model: &mut TrainedModel, created_at: &str, data: &DataArgs) -> Result<()> {
    model.metadata = ModelMetadata {
        created_at: created_at.to_string(),
        dataset_digest: data.digest()?,
    };
    Ok(())
}

fn parse_stream(path: &Path, allow_unnormalized: bool) -> Result<Vec<engage::Clip>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let opts = ParseOptions {
        require_normalized: !allow_unnormalized,
    };
    parse_feature_stream(BufReader::new(file), &opts).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    show_config("ingest", &args.data);
    let dataset = args.data.load()?;
    let frames: usize = dataset.clips().values().map(|c| c.face_count()).sum();
    println!("clips: {}", dataset.len());
    println!("face frames: {frames}");
    for name in SplitName::ALL {
        println!("{name}: {}", dataset.split(name).clip_ids.len());
    }
    print!("{}", clip_frame_census(dataset.clips().values()));
    Ok(())
}

fn cmd_census(args: CensusArgs) -> Result<()> {
    show_config("census", &serde_json::json!({ "features": args.features }));
    let clips = parse_stream(&args.features, args.allow_unnormalized)?;
    print!("{}", clip_frame_census(&clips));
    Ok(())
}

fn load_labels(path: &Path) -> Result<BTreeMap<String, engage::AffectiveLabels>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_label_table(file).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_adapt(args: AdaptArgs) -> Result<()> {
    show_config(
        "adapt",
        &serde_json::json!({ "labels": args.labels, "policy": args.policy, "out": args.out, "all_policies": args.all_policies }),
    );
    let table = load_labels(&args.labels)?;
    let (adapted, distribution) = adapt_dataset(&table, args.policy);
    let mut out = output(args.out.as_deref())?;
    write_adapted_labels(&adapted, &mut out)?;
    out.flush()?;
    let rows: Vec<_> = if args.all_policies {
        PolicyId::ALL.iter().map(|&p| adapt_dataset(&table, p).1).collect()
    } else {
        vec![distribution]
    };
    eprint!("{}", render_distribution_table(&rows));
    Ok(())
}

fn cmd_balance(args: BalanceArgs) -> Result<()> {
    show_config(
        "balance",
        &serde_json::json!({ "labels": args.labels, "policy": args.policy, "seed": args.seed, "out": args.out }),
    );
    let table = load_labels(&args.labels)?;
    let (adapted, _) = adapt_dataset(&table, args.policy);
    let ids = balance_undersample(&adapted, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    let mut writer = csv::Writer::from_writer(&mut out);
    writer.write_record(["ClipID", "AdaptedLabel"])?;
    for id in &ids {
        writer.write_record([id.as_str(), adapted[id].code()])?;
    }
    writer.flush()?;
    drop(writer);
    out.flush()?;
    let engaged = ids.iter().filter(|id| adapted[*id] == AdaptedLabel::Engaged).count();
    eprintln!("balanced clips: {} ({engaged} per class)", ids.len());
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<()> {
    let cfg = args.features.config()?;
    show_config("featurize", &serde_json::json!({ "data": args.data, "featurization": cfg, "out": args.out }));
    let dataset = args.data.load()?;
    let featurized = featurize_dataset(dataset.clips().values(), &cfg);
    let mut out = create(&args.out)?;
    write_featurized(&featurized.features, &cfg, &mut out)?;
    out.flush()?;
    eprintln!("featurized: {}, rejected: {}", featurized.features.len(), featurized.rejects.len());
    for (id, reason) in &featurized.rejects {
        eprintln!("  reject {id}: {reason}");
    }
    Ok(())
}

#[derive(Serialize)]
struct EffectiveExperiment<'a> {
    data: &'a DataArgs,
    #[serde(flatten)]
    config: &'a ExperimentConfig,
    eval_balance_seed: u64,
}

fn show_experiment(command: &str, args: &ExperimentArgs, cfg: &ExperimentConfig) {
    show_config(
        command,
        &EffectiveExperiment {
            data: &args.data,
            config: cfg,
            eval_balance_seed: cfg.eval_balance_seed(),
        },
    );
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = args.experiment.config()?;
    show_experiment("train", &args.experiment, &cfg);
    let dataset = args.experiment.data.load()?;
    let mut outcome = train_model(&cfg, &dataset)?;
    stamp(&mut outcome.model, &args.created_at, &args.experiment.data)?;
    write_model(&args.model_out, &outcome.model)?;
    println!(
        "trained {} on {} clips ({} rejected) -> {}",
        cfg.classifier.kind(),
        outcome.train_clip_ids.len(),
        outcome.rejects.len(),
        args.model_out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    show_config(
        "predict",
        &serde_json::json!({ "model_file": args.model_file, "features": args.features, "out": args.out }),
    );
    let model = load_model(&read(&args.model_file)?).with_context(|| format!("loading {}", args.model_file.display()))?;
    let clips = parse_stream(&args.features, args.allow_unnormalized)?;
    let mut out = output(args.out.as_deref())?;
    let mut writer = csv::Writer::from_writer(&mut out);
    writer.write_record(["ClipID", "Score", "Label"])?;
    let mut rejected = 0;
    for clip in clips.into_iter().map(engage::Clip::retain_faces) {
        match featurize_clip(&clip, &model.featurization) {
            Ok(matrix) => {
                let p = model.predict(matrix.flattened())?;
                writer.write_record([matrix.clip_id.as_str(), &p.score.to_string(), &p.label.to_string()])?;
            }
            Err(e) => {
                rejected += 1;
                eprintln!("  reject {}: {e}", clip.clip_id);
            }
        }
    }
    writer.flush()?;
    drop(writer);
    out.flush()?;
    if rejected > 0 {
        eprintln!("{rejected} clips could not be featurized");
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = args.experiment.config()?;
    show_experiment("evaluate", &args.experiment, &cfg);
    let dataset = args.experiment.data.load()?;
    let mut report = run_experiment(&cfg, &dataset)?;
    print!("{}", report.render());
    write_rows(&args.report, &[ReportRow::balanced(&report)])?;
    write_rows(&sibling(&args.report, "_unbalanced"), &[ReportRow::unbalanced(&report)])?;
    if let Some(path) = &args.model_out {
        stamp(&mut report.model, &args.created_at, &args.experiment.data)?;
        write_model(path, &report.model)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.experiment.config()?;
    if args.z_values.is_empty() || args.m_values.is_empty() {
        bail!("--z-values and --m-values must be non-empty");
    }
    show_config(
        "sweep",
        &serde_json::json!({
            "experiment": EffectiveExperiment { data: &args.experiment.data, config: &cfg, eval_balance_seed: cfg.eval_balance_seed() },
            "z_values": args.z_values,
            "m_values": args.m_values,
        }),
    );
    let dataset = args.experiment.data.load()?;
    let table = sweep_z(&cfg, &dataset, &args.z_values, &args.m_values);
    print!("{}", table.render());
    let rows: Vec<ReportRow> = table.rows.iter().map(|r| ReportRow::balanced(&r.report)).collect();
    write_rows(&args.report, &rows)?;
    Ok(())
}

fn cmd_ablate(args: AblateArgs, drop_given: bool) -> Result<()> {
    let mut cfg = args.experiment.config()?;
    if !drop_given {
        // The baseline keeps every emotion, so the default drop set does not apply here.
        cfg.featurization.dropped_emotions.clear();
    }
    show_experiment("ablate", &args.experiment, &cfg);
    let dataset = args.experiment.data.load()?;
    let table = ablate_emotions(&cfg, &dataset)?;
    print!("{}", table.render());
    let rows: Vec<ReportRow> = table.rows.iter().map(|r| ReportRow::balanced(&r.report)).collect();
    write_rows(&args.report, &rows)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    show_config("synth", &args);
    let informative = parse_emotion_set(&args.informative).map_err(|e| anyhow::anyhow!("--informative: {e}"))?;
    let cfg = SynthConfig {
        clip_count: args.clips,
        frames_per_clip: args.frames,
        separability: args.separability,
        informative_emotions: informative,
        temporal_noise: args.noise,
        face_dropout_rate: args.dropout,
        seed: args.seed,
    };
    let data = generate(&cfg)?;
    data.write_dir(&args.out)?;
    let engaged = data.oracle.values().filter(|&&y| y == 1).count();
    println!(
        "wrote {} clips ({engaged} engaged) to {}",
        data.clips.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        rows.extend(read_report_csv(file).with_context(|| format!("parsing {}", path.display()))?);
    }
    print!("{}", render_report_rows(&rows));
    Ok(())
}

fn run(cli: Cli, ablate_drop_given: bool) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Census(a) => cmd_census(a),
        Command::Adapt(a) => cmd_adapt(a),
        Command::Balance(a) => cmd_balance(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ablate(a) => cmd_ablate(a, ablate_drop_given),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let parsed = Cli::command()
        .try_get_matches()
        .and_then(|matches| Cli::from_arg_matches(&matches).map(|cli| (cli, matches)));
    let (cli, matches) = match parsed {
        Ok(parsed) => parsed,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let ablate_drop_given = matches
        .subcommand_matches("ablate")
        .and_then(|m| m.value_source("drop"))
        .is_some_and(|source| source != ValueSource::DefaultValue);
    match std::panic::catch_unwind(|| run(cli, ablate_drop_given)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(2),
    }
}
