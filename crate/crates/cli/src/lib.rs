//! `rehab-assess`: command-line front end for the assessment pipeline.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rehab_core::evaluation::{emit_results_table, loso_evaluate, TpAgreement};
use rehab_core::feedback::{deviation_scores, generate_feedback, profile_for, Templates};
use rehab_core::kinematics::{FeatureRow, FeatureTable, FeatureVector};
use rehab_core::motion::{parse_dataset, Exercise, Side};
use rehab_core::nn::{encode_full, train, Checkpoint};
use rehab_core::selector::{select_and_classify, train_selector, QNetworks, SelectorModel, TraceRecord};
use rehab_core::synth::{synth_dataset, CorpusSpec};
use rehab_core::RunConfig;

pub const ROLE_CLASSIFIER: &str = "classifier";
pub const ROLE_SELECTOR_ONLINE: &str = "selector.online";
pub const ROLE_SELECTOR_TARGET: &str = "selector.target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rehab-assess", version, about = "Personalized rehabilitation exercise assessment")]
struct Cli {
    /// Run configuration (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (JSONL).
    Synth {
        /// Corpus specification (JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Extract kinematic features to CSV.
    Extract(Input),
    /// Train the classifier and the acquisition agent; writes a checkpoint.
    Train(Input),
    /// Run the acquisition agent and write per-repetition traces.
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        rep: Option<usize>,
    },
    /// Leave-one-subject-out comparison; writes results JSON and prints the table.
    Evaluate {
        #[command(flatten)]
        input: Input,
        /// Therapist-agreement side file.
        #[arg(long)]
        tp: Option<PathBuf>,
    },
    /// Corrective feedback for one repetition.
    Feedback {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        rep: usize,
        #[arg(long, value_parser = parse_side)]
        side: Option<Side>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Input {
    /// Corpus (JSONL).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Restrict to one exercise (E1, E2 or E3).
    #[arg(long, value_parser = parse_exercise)]
    exercise: Option<Exercise>,
}

fn parse_exercise(s: &str) -> std::result::Result<Exercise, String> {
    s.parse::<Exercise>().map_err(|e| e.to_string())
}

fn parse_side(s: &str) -> std::result::Result<Side, String> {
    [Side::Affected, Side::Unaffected, Side::Dominant]
        .into_iter()
        .find(|side| side.as_str() == s)
        .ok_or_else(|| format!("unknown side '{s}' (affected, unaffected or dominant)"))
}

/// Parses `argv` (including the program name), runs the command and returns the
/// process exit code: 0 on success, 2 on a usage error, 1 on a pipeline error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("REHAB_ASSESS_LOG", "warn")).try_init();
    let name = command_name(&cli.command);
    let outcome = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build()
        .map_err(anyhow::Error::from)
        .and_then(|pool| pool.install(|| dispatch(&cli)));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rehab-assess {name}: {e:#}");
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth { .. } => "synth",
        Command::Extract(_) => "extract",
        Command::Train(_) => "train",
        Command::Select { .. } => "select",
        Command::Evaluate { .. } => "evaluate",
        Command::Feedback { .. } => "feedback",
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { spec } => cmd_synth(cli, &cfg, spec.as_deref()),
        Command::Extract(input) => cmd_extract(cli, &cfg, input),
        Command::Train(input) => cmd_train(cli, &cfg, input),
        Command::Select { input, model, subject, rep } => cmd_select(cli, &cfg, input, model.as_deref(), subject.as_deref(), *rep),
        Command::Evaluate { input, tp } => cmd_evaluate(cli, &cfg, input, tp.as_deref()),
        Command::Feedback { input, subject, rep, side, model, templates } => {
            cmd_feedback(cli, &cfg, input, subject, *rep, *side, model.as_deref(), templates.as_deref())
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn corpus_path<'a>(input: &'a Input, cfg: &'a RunConfig) -> Result<&'a Path> {
    input.input.as_deref().or(cfg.paths.corpus.as_deref()).ok_or_else(|| anyhow!("no corpus given (use --in or paths.corpus)"))
}

fn load_table(input: &Input, cfg: &RunConfig) -> Result<FeatureTable> {
    let path = corpus_path(input, cfg)?;
    let ds = parse_dataset(path).with_context(|| format!("reading corpus {}", path.display()))?;
    let ds = match input.exercise {
        Some(ex) => ds.for_exercise(ex),
        None => ds,
    };
    if ds.repetitions().is_empty() {
        bail!("corpus {} has no repetitions for the requested exercise", path.display());
    }
    Ok(FeatureTable::extract(&ds, &cfg.features)?)
}

fn cmd_synth(cli: &Cli, cfg: &RunConfig, spec: Option<&Path>) -> Result<()> {
    let mut corpus = match spec {
        Some(p) => serde_json::from_str::<CorpusSpec>(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("corpus spec {}", p.display()))?,
        None => CorpusSpec::default(),
    };
    if let Some(s) = cli.seed {
        corpus.seed = s;
    }
    let ds = synth_dataset(&corpus)?;
    log::info!("synthesized {} repetitions for {} subjects", ds.repetitions().len(), ds.subjects().len());
    write_output(cli.out.as_deref().or(cfg.paths.corpus.as_deref()), ds.to_jsonl().as_bytes())
}

fn cmd_extract(cli: &Cli, cfg: &RunConfig, input: &Input) -> Result<()> {
    let table = load_table(input, cfg)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_output(cli.out.as_deref().or(cfg.paths.features.as_deref()), &buf)
}

fn labelled(table: &FeatureTable) -> Result<(Vec<&FeatureRow>, Vec<u8>)> {
    let rows: Vec<&FeatureRow> = table.rows.iter().filter(|r| r.label.is_some()).collect();
    if rows.is_empty() {
        bail!("corpus has no labelled repetitions");
    }
    let labels = rows.iter().map(|r| u8::from(r.label.unwrap_or(false))).collect();
    Ok((rows, labels))
}

fn standardize(ckpt: &Checkpoint, fv: &FeatureVector) -> FeatureVector {
    fv.with_values(ckpt.norm.apply_values(fv.values()))
}

#[derive(Serialize)]
struct TrainSummary {
    instances: usize,
    classifier_hidden: Vec<usize>,
    classifier_lr: f64,
    classifier_val_f1: f64,
    selector_hidden: Vec<usize>,
    selector_lr: f64,
}

fn cmd_train(cli: &Cli, cfg: &RunConfig, input: &Input) -> Result<()> {
    let out = cli.out.as_deref().or(cfg.paths.model.as_deref()).ok_or_else(|| anyhow!("no checkpoint path (use --out or paths.model)"))?;
    let table = load_table(input, cfg)?;
    let (rows, labels) = labelled(&table)?;
    let raw: Vec<&[f64]> = rows.iter().map(|r| r.features.values()).collect();
    let norm = rehab_core::NormParams::fit_rows(table.names.clone(), &raw)?;
    let std_rows: Vec<FeatureVector> = rows.iter().map(|r| r.features.with_values(norm.apply_values(r.features.values()))).collect();
    let x = encode_full(&std_rows.iter().map(|f| f.values()).collect::<Vec<_>>());
    let (classifier, report) = train(x.view(), &labels, &cfg.train).context("classifier")?;
    let selector = train_selector(&std_rows, &labels, &cfg.rl).context("acquisition agent")?;
    Checkpoint::new(norm)
        .with_network(ROLE_CLASSIFIER, &classifier)
        .with_network(ROLE_SELECTOR_ONLINE, &selector.qnets.online)
        .with_network(ROLE_SELECTOR_TARGET, &selector.qnets.target)
        .save(out)
        .with_context(|| format!("writing checkpoint {}", out.display()))?;
    let best = &report.cells[report.best];
    let sel = &selector.cells[selector.best];
    let summary = TrainSummary {
        instances: labels.len(),
        classifier_hidden: best.hidden.clone(),
        classifier_lr: best.lr,
        classifier_val_f1: best.val_f1,
        selector_hidden: sel.hidden.clone(),
        selector_lr: sel.lr,
    };
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&summary)? + "\n",
        Format::Text => format!(
            "trained on {} repetitions\nclassifier: hidden {:?}, lr {}, validation F1 {:.4}\nselector: hidden {:?}, lr {}\ncheckpoint: {}\n",
            summary.instances,
            summary.classifier_hidden,
            summary.classifier_lr,
            summary.classifier_val_f1,
            summary.selector_hidden,
            summary.selector_lr,
            out.display()
        ),
    };
    write_output(None, text.as_bytes())
}

fn load_selector(path: &Path, cfg: &RunConfig) -> Result<(Checkpoint, SelectorModel)> {
    let ckpt = Checkpoint::load(path, &cfg.features.feature_names()).with_context(|| format!("checkpoint {}", path.display()))?;
    let qnets = QNetworks { online: ckpt.network(ROLE_SELECTOR_ONLINE)?, target: ckpt.network(ROLE_SELECTOR_TARGET)? };
    let model = SelectorModel { qnets, feature_names: ckpt.feature_names.clone(), cells: vec![], best: 0 };
    Ok((ckpt, model))
}

fn model_path<'a>(flag: Option<&'a Path>, cfg: &'a RunConfig) -> Option<&'a Path> {
    flag.or(cfg.paths.model.as_deref())
}

#[derive(Serialize)]
struct SelectRecord {
    subject: String,
    exercise: Exercise,
    side: Side,
    rep: usize,
    #[serde(flatten)]
    trace: TraceRecord,
}

fn cmd_select(cli: &Cli, cfg: &RunConfig, input: &Input, model: Option<&Path>, subject: Option<&str>, rep: Option<usize>) -> Result<()> {
    let path = model_path(model, cfg).ok_or_else(|| anyhow!("no checkpoint given (use --model or paths.model)"))?;
    let (ckpt, selector) = load_selector(path, cfg)?;
    let table = load_table(input, cfg)?;
    let rows: Vec<&FeatureRow> =
        table.rows.iter().filter(|r| subject.is_none_or(|s| r.subject_id == s) && rep.is_none_or(|k| r.rep == k)).collect();
    if rows.is_empty() {
        bail!("no repetitions match the requested subject/rep");
    }
    let mut records = Vec::with_capacity(rows.len());
    for r in rows {
        let fv = standardize(&ckpt, &r.features);
        let truth = r.label.map(u8::from);
        let (mask, _, trace) = select_and_classify(&selector, &fv, truth, &cfg.rl)?;
        records.push(SelectRecord {
            subject: r.subject_id.clone(),
            exercise: r.exercise,
            side: r.side,
            rep: r.rep,
            trace: trace.record(&ckpt.feature_names, &mask),
        });
    }
    let json = serde_json::to_string_pretty(&records)? + "\n";
    if let Some(out) = cli.out.as_deref() {
        write_output(Some(out), json.as_bytes())?;
    }
    let report = match cli.format {
        Format::Json if cli.out.is_none() => json,
        Format::Json => String::new(),
        Format::Text => {
            let mut s = String::new();
            for r in &records {
                let acquired: Vec<&str> = r.trace.actions.iter().filter_map(|a| a.strip_prefix("acquire:")).collect();
                let truth = r.trace.truth.map_or("-".to_string(), |t| t.to_string());
                s += &format!(
                    "{} {} {} rep {}: prediction {} truth {} acquired {} [{}]\n",
                    r.subject,
                    r.exercise.code(),
                    r.side,
                    r.rep,
                    r.trace.prediction,
                    truth,
                    acquired.len(),
                    acquired.join(", ")
                );
            }
            s
        }
    };
    write_output(None, report.as_bytes())
}

fn cmd_evaluate(cli: &Cli, cfg: &RunConfig, input: &Input, tp: Option<&Path>) -> Result<()> {
    let table = load_table(input, cfg)?;
    let labelled = table.filter(|r| r.label.is_some());
    let result = loso_evaluate(&labelled, &cfg.eval_config())?;
    let out = cli.out.as_deref().or(cfg.paths.results.as_deref());
    let json = result.to_json()?;
    if let Some(p) = out {
        write_output(Some(p), json.as_bytes())?;
    }
    let side = tp
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.tp_agreement.clone())
        .or_else(|| out.map(|p| p.with_file_name("tp_agreement.json")).filter(|p| p.exists()));
    let tp = side.map(|p| TpAgreement::load(&p).with_context(|| format!("reading {}", p.display()))).transpose()?;
    let report = match cli.format {
        Format::Text => emit_results_table(&result, tp.as_ref()),
        Format::Json if out.is_some() => String::new(),
        Format::Json => json,
    };
    write_output(None, report.as_bytes())
}

#[allow(clippy::too_many_arguments)]
fn cmd_feedback(
    cli: &Cli,
    cfg: &RunConfig,
    input: &Input,
    subject: &str,
    rep: usize,
    side: Option<Side>,
    model: Option<&Path>,
    templates: Option<&Path>,
) -> Result<()> {
    let table = load_table(input, cfg)?;
    let own: Vec<&FeatureRow> = table.rows.iter().filter(|r| r.subject_id == subject).collect();
    if own.is_empty() {
        return Err(rehab_core::Error::UnknownSubject(subject.to_string()).into());
    }
    let side = side.unwrap_or(if own.iter().any(|r| r.side == Side::Affected) { Side::Affected } else { Side::Dominant });
    let matches: Vec<&&FeatureRow> = own.iter().filter(|r| r.side == side && r.rep == rep).collect();
    let row = match matches.as_slice() {
        [one] => **one,
        [] => bail!("subject {subject} has no {side} repetition {rep}"),
        _ => bail!("subject {subject} has repetition {rep} in several exercises; pass --exercise"),
    };
    let profile = profile_for(&table.rows, subject, row.exercise)?;
    let templates = match templates.or(cfg.paths.templates.as_deref()) {
        Some(p) => Templates::load(p).with_context(|| format!("templates {}", p.display()))?,
        None => Templates::default(),
    };
    let report = match model_path(model, cfg) {
        Some(path) => {
            let (ckpt, selector) = load_selector(path, cfg)?;
            let fv = standardize(&ckpt, &row.features);
            let (mask, label, _) = select_and_classify(&selector, &fv, None, &cfg.rl)?;
            let scores = deviation_scores(&profile, &row.features, &mask)?;
            generate_feedback(&scores, label, &templates, cfg.feedback_threshold)?
        }
        None => {
            // Without a trained agent every feature is scored and the verdict
            // follows the deviation profile.
            let mask = vec![true; row.features.dim()];
            let scores = deviation_scores(&profile, &row.features, &mask)?;
            let label = u8::from(scores.iter().all(|s| s.z.abs() <= cfg.feedback_threshold));
            generate_feedback(&scores, label, &templates, cfg.feedback_threshold)?
        }
    };
    let text = match cli.format {
        Format::Text => report.render_text(),
        Format::Json => report.render_json()? + "\n",
    };
    write_output(cli.out.as_deref(), text.as_bytes())
}
