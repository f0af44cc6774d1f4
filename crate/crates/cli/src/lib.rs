//! Command implementations behind the `gmnet` binary.
//!
//! Every command writes a [`RunManifest`] next to its primary output. Errors
//! map onto a fixed set of exit codes, see [`CliError::exit_code`].

mod manifest;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gmnet_core::autodiff::fault::{with_fault, Fault};
use gmnet_core::autodiff::Tensor;
use gmnet_core::corpus::{
    build_vocab, generate_synthetic, load_features, read_captions, read_predictions,
    save_features, write_captions, write_predictions, CaptionRecord, Prediction, Split,
    SyntheticSpec, Vocabulary,
};
use gmnet_core::layers::ParamStore;
use gmnet_core::metrics::{evaluate_corpus, EvalPair, MetricReport};
use gmnet_core::model::gradcheck::{run_suite, ComponentCheck, TOLERANCE};
use gmnet_core::model::{
    greedy_decode, is_guidance_param, load_checkpoint, save_checkpoint, train, Checkpoint,
    EpochLog, FeatureClip, Mode, ModelConfig, Sample, StepLog, TrainOptions, TrainOutcome,
};
use gmnet_core::parallel::threads_from_env;
use gmnet_core::Error;

pub use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// A self-check failed.
    Check(String),
}

impl CliError {
    /// 1 for failed checks, 3 for numeric failures, 2 for everything else
    /// (usage, data, format and I/O errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Core(Error::Numeric(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Usage(msg.into()))
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Data(msg.into()))
}

/// `dir/name` with `suffix` appended to the file stem: `a/m.gmck` →
/// `a/m.loss.csv` for suffix `loss.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_key_values(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_override(s: &str) -> CliResult<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| usage(format!("override {s:?} is not key=value")))
}

/// Defaults, then the config file, then `--set` overrides.
pub fn model_config(file: Option<&Path>, overrides: &[String]) -> CliResult<ModelConfig> {
    let mut cfg = ModelConfig::default();
    if let Some(f) = file {
        for (k, v) in read_key_values(f)? {
            cfg.set(&k, &v)?;
        }
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        cfg.set(&k, &v)?;
    }
    Ok(cfg)
}

fn set_spec(spec: &mut SyntheticSpec, key: &str, value: &str) -> CliResult<()> {
    let n = || -> CliResult<u64> {
        value
            .parse()
            .map_err(|_| usage(format!("bad value {value:?} for {key}")))
    };
    match key {
        "n_clips" => spec.n_clips = n()? as usize,
        "frames" | "m" => spec.frames = n()? as usize,
        "feature_dim" | "d" => spec.feature_dim = n()? as usize,
        "vocab_size" | "v" => spec.vocab_size = n()? as usize,
        "min_words" => spec.min_words = n()? as usize,
        "max_words" => spec.max_words = n()? as usize,
        "seed" => spec.seed = n()?,
        _ => return Err(usage(format!("unknown synthetic spec key {key:?}"))),
    }
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Clone, Debug, Default)]
pub struct SynthArgs {
    pub out: PathBuf,
    /// Optional `key=value` spec file.
    pub spec: Option<PathBuf>,
    pub n_clips: Option<usize>,
    pub frames: Option<usize>,
    pub feature_dim: Option<usize>,
    pub vocab_size: Option<usize>,
    pub seed: Option<u64>,
}

pub const FEATURES_FILE: &str = "features.gmnf";
pub const CAPTIONS_FILE: &str = "captions.jsonl";

pub fn cmd_synth(args: &SynthArgs) -> CliResult<SyntheticSpec> {
    let run = RunManifest::start("synth");
    let mut spec = SyntheticSpec::default();
    if let Some(f) = &args.spec {
        for (k, v) in read_key_values(f)? {
            set_spec(&mut spec, &k, &v)?;
        }
    }
    let opts = [
        ("n_clips", args.n_clips.map(|v| v as u64)),
        ("frames", args.frames.map(|v| v as u64)),
        ("feature_dim", args.feature_dim.map(|v| v as u64)),
        ("vocab_size", args.vocab_size.map(|v| v as u64)),
        ("seed", args.seed),
    ];
    for (k, v) in opts {
        if let Some(v) = v {
            set_spec(&mut spec, k, &v.to_string())?;
        }
    }
    spec.validate(ModelConfig::default().max_len)?;
    let corpus = generate_synthetic(&spec)?;
    fs::create_dir_all(&args.out)?;
    let features = args.out.join(FEATURES_FILE);
    let captions = args.out.join(CAPTIONS_FILE);
    save_features(&features, &corpus.clips)?;
    write_captions(&captions, &corpus.captions)?;
    run.finish(
        serde_json::to_value(&spec).expect("serializable"),
        spec.seed,
        args.spec.iter().cloned().collect(),
        vec![features, captions],
        &args.out.join("synth.manifest.json"),
    )?;
    Ok(spec)
}

// ---------------------------------------------------------------- corpus

/// Features, captions and the vocabulary built from the training split.
pub struct Corpus {
    pub clips: Vec<FeatureClip>,
    pub records: Vec<CaptionRecord>,
    pub index: HashMap<String, usize>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn load(features: &Path, captions: &Path, min_count: usize) -> CliResult<Self> {
        let clips = load_features(features)?;
        let mut index = HashMap::with_capacity(clips.len());
        for (i, c) in clips.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(data(format!("duplicate clip id {:?} in {}", c.id, features.display())));
            }
        }
        let records = read_captions(captions)?;
        let missing: Vec<&str> = records
            .iter()
            .filter(|r| !index.contains_key(&r.id))
            .map(|r| r.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(data(format!("captions refer to clips without features: {missing:?}")));
        }
        let train_text = records
            .iter()
            .filter(|r| r.split == Split::Train)
            .map(|r| r.caption.as_str());
        let vocab = build_vocab(train_text, min_count)?;
        Ok(Corpus {
            clips,
            records,
            index,
            vocab,
        })
    }

    /// Sets data-determined sizes on `cfg`.
    pub fn configure(&self, cfg: &mut ModelConfig) -> CliResult<()> {
        let first = self
            .clips
            .first()
            .ok_or_else(|| usage("feature file holds no clips"))?;
        cfg.frames = first.frames();
        cfg.feature_dim = first.dim();
        cfg.vocab_size = self.vocab.len();
        cfg.validate()?;
        Ok(())
    }

    pub fn samples(&self, split: Split, max_len: usize) -> CliResult<Vec<Sample>> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| {
                Ok(Sample {
                    clip: self.index[&r.id],
                    caption: self.vocab.encode(&r.caption, max_len)?,
                })
            })
            .collect()
    }

    /// Clips that have at least one caption in `split`, in file order.
    pub fn clips_in(&self, split: Split) -> Vec<FeatureClip> {
        let wanted: std::collections::HashSet<&str> = self
            .records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.id.as_str())
            .collect();
        self.clips
            .iter()
            .filter(|c| wanted.contains(c.id.as_str()))
            .cloned()
            .collect()
    }
}

// ---------------------------------------------------------------- train

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub mode: Mode,
    pub features: PathBuf,
    pub captions: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub min_count: usize,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub ckpt: PathBuf,
}

pub fn write_loss_csv(path: &Path, epochs: &[EpochLog]) -> CliResult<()> {
    let mut s = String::from("epoch,L,L_e,L_all,val_L_all\n");
    for e in epochs {
        let val = e.val_l_all.map(|v| v.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{},{},{}", e.epoch, e.l, e.l_e, e.l_all, val).expect("string");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_steps_csv(path: &Path, steps: &[StepLog]) -> CliResult<()> {
    let mut s = String::from("step,epoch,L,L_e,L_all,grad_norm\n");
    for e in steps {
        writeln!(s, "{},{},{},{},{},{}", e.step, e.epoch, e.l, e.l_e, e.l_all, e.grad_norm)
            .expect("string");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Trains one model and writes checkpoint, loss logs and manifest.
fn train_and_save(
    corpus: &Corpus,
    cfg: &ModelConfig,
    epochs: usize,
    batch_size: usize,
    ckpt: &Path,
    inputs: Vec<PathBuf>,
) -> CliResult<TrainOutcome> {
    let run = RunManifest::start("train");
    let train_set = corpus.samples(Split::Train, cfg.max_len)?;
    let val_set = corpus.samples(Split::Val, cfg.max_len)?;
    let opts = TrainOptions {
        epochs,
        batch_size,
        threads: threads_from_env(),
    };
    log::info!(
        "training {} on {} samples ({} val), {} epochs",
        cfg.mode,
        train_set.len(),
        val_set.len(),
        epochs
    );
    let out = train(cfg, &corpus.clips, &train_set, &val_set, &opts)?;
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_checkpoint(
        &Checkpoint {
            config: cfg.clone(),
            params: out.params.clone(),
            vocab: corpus.vocab.tokens().to_vec(),
        },
        ckpt,
    )?;
    let loss = sibling(ckpt, "loss.csv");
    let steps = sibling(ckpt, "steps.csv");
    write_loss_csv(&loss, &out.epochs)?;
    write_steps_csv(&steps, &out.steps)?;
    let mut config = serde_json::to_value(cfg).expect("serializable");
    config["epochs"] = epochs.into();
    config["batch_size"] = batch_size.into();
    config["shuffle_digests"] = out
        .shuffle_digests
        .iter()
        .map(|d| format!("{d:016x}"))
        .collect::<Vec<_>>()
        .into();
    run.finish(
        config,
        cfg.seed,
        inputs,
        vec![ckpt.to_path_buf(), loss, steps],
        &sibling(ckpt, "manifest.json"),
    )?;
    Ok(out)
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<TrainOutcome> {
    let corpus = Corpus::load(&args.features, &args.captions, args.min_count)?;
    let mut cfg = model_config(args.config.as_deref(), &args.overrides)?;
    cfg.mode = args.mode;
    corpus.configure(&mut cfg)?;
    let mut inputs = vec![args.features.clone(), args.captions.clone()];
    inputs.extend(args.config.clone());
    train_and_save(&corpus, &cfg, args.epochs, args.batch_size, &args.ckpt, inputs)
}

// ---------------------------------------------------------------- caption

#[derive(Clone, Debug)]
pub struct CaptionArgs {
    pub ckpt: PathBuf,
    pub features: PathBuf,
    pub out: PathBuf,
}

/// A copy of `params` with every guidance entry set to zero.
pub fn zero_guidance(params: &ParamStore) -> ParamStore {
    let mut p = params.clone();
    let names: Vec<String> = p
        .names()
        .filter(|n| is_guidance_param(n))
        .map(String::from)
        .collect();
    for n in names {
        let shape = p.get(&n).expect("listed").shape().to_vec();
        p.set(&n, Tensor::zeros(&shape)).expect("same shape");
    }
    p
}

fn decode_all(ck: &Checkpoint, vocab: &Vocabulary, clips: &[FeatureClip]) -> CliResult<Vec<Prediction>> {
    let cfg = &ck.config;
    if let Some(c) = clips
        .iter()
        .find(|c| (c.frames(), c.dim()) != (cfg.frames, cfg.feature_dim))
    {
        return Err(data(format!(
            "clip {:?} is {}×{}, checkpoint expects {}×{}",
            c.id,
            c.frames(),
            c.dim(),
            cfg.frames,
            cfg.feature_dim
        )));
    }
    let zeroed = (cfg!(debug_assertions) && cfg.mode.guidance()).then(|| zero_guidance(&ck.params));
    clips
        .iter()
        .map(|c| {
            let ids = greedy_decode(cfg, &ck.params, c, cfg.max_len)?;
            if let Some(z) = &zeroed {
                if greedy_decode(cfg, z, c, cfg.max_len)? != ids {
                    return Err(CliError::Check(format!(
                        "clip {:?}: zeroing guidance weights changed the caption",
                        c.id
                    )));
                }
            }
            Ok(Prediction {
                id: c.id.clone(),
                caption: vocab.decode(&ids),
            })
        })
        .collect()
}

fn checkpoint_vocab(ck: &Checkpoint) -> CliResult<Vocabulary> {
    if ck.vocab.is_empty() {
        return Err(usage("checkpoint carries no vocabulary"));
    }
    Ok(Vocabulary::from_tokens(ck.vocab.clone())?)
}

pub fn cmd_caption(args: &CaptionArgs) -> CliResult<Vec<Prediction>> {
    let run = RunManifest::start("caption");
    let ck = load_checkpoint(&args.ckpt)?;
    let vocab = checkpoint_vocab(&ck)?;
    let clips = load_features(&args.features)?;
    let preds = decode_all(&ck, &vocab, &clips)?;
    write_predictions(&args.out, &preds)?;
    run.finish(
        serde_json::to_value(&ck.config).expect("serializable"),
        ck.config.seed,
        vec![args.ckpt.clone(), args.features.clone()],
        vec![args.out.clone()],
        &sibling(&args.out, "manifest.json"),
    )?;
    Ok(preds)
}

// ---------------------------------------------------------------- evaluate

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub preds: PathBuf,
    pub refs: PathBuf,
    pub report: PathBuf,
}

/// Joins predictions with every reference caption of the same clip.
pub fn join_pairs(preds: &[Prediction], refs: &[CaptionRecord]) -> CliResult<Vec<EvalPair>> {
    if preds.is_empty() {
        return Err(usage("no predictions to evaluate"));
    }
    let mut by_id: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in refs {
        by_id.entry(&r.id).or_default().push(&r.caption);
    }
    let unmatched: Vec<&str> = preds
        .iter()
        .filter(|p| !by_id.contains_key(p.id.as_str()))
        .map(|p| p.id.as_str())
        .collect();
    if !unmatched.is_empty() {
        return Err(data(format!("predictions without references: {unmatched:?}")));
    }
    Ok(preds
        .iter()
        .map(|p| EvalPair::from_text(&p.id, &p.caption, &by_id[p.id.as_str()]))
        .collect::<Result<_, _>>()?)
}

pub fn report_json(r: &MetricReport) -> serde_json::Value {
    let p = r.percent();
    serde_json::json!({
        "bleu4": r.bleu4,
        "rouge_l": r.rouge_l,
        "cider": r.cider,
        "n_pairs": r.n_pairs,
        "percent": { "bleu4": p.bleu4, "rouge_l": p.rouge_l, "cider": p.cider },
    })
}

pub fn percent_table(r: &MetricReport) -> String {
    let p = r.percent();
    format!(
        "| BLEU_4 | ROUGE_L | CIDEr |\n|-------:|--------:|------:|\n| {:6.1} | {:7.1} | {:5.1} |\n",
        p.bleu4, p.rouge_l, p.cider
    )
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<MetricReport> {
    let run = RunManifest::start("evaluate");
    let preds = read_predictions(&args.preds)?;
    let refs = read_captions(&args.refs)?;
    let report = evaluate_corpus(&join_pairs(&preds, &refs)?)?;
    print!("{}", percent_table(&report));
    fs::write(
        &args.report,
        serde_json::to_string_pretty(&report_json(&report)).expect("serializable"),
    )?;
    run.finish(
        serde_json::Value::Null,
        0,
        vec![args.preds.clone(), args.refs.clone()],
        vec![args.report.clone()],
        &sibling(&args.report, "manifest.json"),
    )?;
    Ok(report)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Clone, Debug, Default)]
pub struct GradcheckArgs {
    /// Only `tiny` is available.
    pub config: String,
    pub seed: u64,
    /// Test hook: corrupt a backward rule.
    pub inject_fault: Option<String>,
    pub report: Option<PathBuf>,
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> CliResult<Vec<ComponentCheck>> {
    let run = RunManifest::start("gradcheck");
    if args.config != "tiny" {
        return Err(usage(format!("unknown gradcheck config {:?} (only \"tiny\")", args.config)));
    }
    let results = match args.inject_fault.as_deref() {
        None => run_suite(args.seed)?,
        Some("layer_norm") => with_fault(Fault::LayerNormBackward, || run_suite(args.seed))?,
        Some(other) => return Err(usage(format!("unknown fault {other:?}"))),
    };
    for c in &results {
        let verdict = if c.passed() { "ok" } else { "FAIL" };
        println!("{:<28} {:.3e}  {verdict}", c.component, c.max_rel_err);
    }
    if let Some(path) = &args.report {
        let rows: Vec<_> = results
            .iter()
            .map(|c| serde_json::json!({"component": c.component, "max_rel_err": c.max_rel_err, "passed": c.passed()}))
            .collect();
        fs::write(path, serde_json::to_string_pretty(&rows).expect("serializable"))?;
        run.finish(
            serde_json::json!({"config": args.config, "tolerance": TOLERANCE}),
            args.seed,
            vec![],
            vec![path.clone()],
            &sibling(path, "manifest.json"),
        )?;
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.component.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Check(format!(
            "relative error ≥ {TOLERANCE:e} in {}",
            failed.join(", ")
        )));
    }
    Ok(results)
}

// ---------------------------------------------------------------- ablate

#[derive(Clone, Debug)]
pub struct AblateArgs {
    pub features: PathBuf,
    pub captions: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub min_count: usize,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub metrics: MetricReport,
    /// Final-epoch mean training losses.
    pub l: f64,
    pub l_e: f64,
    pub l_all: f64,
    pub shuffle_digests: Vec<String>,
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "| Model | BLEU_4 | ROUGE_L | CIDEr | L | L_e |\n|-------|-------:|--------:|------:|--:|----:|\n",
    );
    for r in rows {
        let p = r.metrics.percent();
        writeln!(
            s,
            "| {} | {:.1} | {:.1} | {:.1} | {:.4} | {:.4} |",
            r.mode, p.bleu4, p.rouge_l, p.cider, r.l, r.l_e
        )
        .expect("string");
    }
    s
}

pub fn cmd_ablate(args: &AblateArgs) -> CliResult<Vec<AblationRow>> {
    let run = RunManifest::start("ablate");
    let corpus = Corpus::load(&args.features, &args.captions, args.min_count)?;
    let base = model_config(args.config.as_deref(), &args.overrides)?;
    let test_clips = corpus.clips_in(Split::Test);
    if test_clips.is_empty() {
        return Err(usage("caption file has no test split"));
    }
    fs::create_dir_all(&args.out)?;
    let mut inputs = vec![args.features.clone(), args.captions.clone()];
    inputs.extend(args.config.clone());
    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    for mode in Mode::ALL {
        let mut cfg = ModelConfig { mode, ..base.clone() };
        corpus.configure(&mut cfg)?;
        let ckpt = args.out.join(format!("{mode}.gmck"));
        let out = train_and_save(&corpus, &cfg, args.epochs, args.batch_size, &ckpt, inputs.clone())?;
        let ck = Checkpoint {
            config: cfg.clone(),
            params: out.params,
            vocab: corpus.vocab.tokens().to_vec(),
        };
        let preds = decode_all(&ck, &corpus.vocab, &test_clips)?;
        let preds_path = args.out.join(format!("{mode}.preds.jsonl"));
        write_predictions(&preds_path, &preds)?;
        let metrics = evaluate_corpus(&join_pairs(&preds, &corpus.records)?)?;
        let last = out.epochs.last().expect("epoch 0 always logged");
        log::info!("{mode}: {:?}", metrics.percent());
        rows.push(AblationRow {
            mode,
            metrics,
            l: last.l,
            l_e: last.l_e,
            l_all: last.l_all,
            shuffle_digests: out.shuffle_digests.iter().map(|d| format!("{d:016x}")).collect(),
        });
        outputs.extend([ckpt, preds_path]);
    }
    let shared = rows.windows(2).all(|w| w[0].shuffle_digests == w[1].shuffle_digests);
    log::info!("shared shuffle stream across modes: {shared}");
    let table = ablation_table(&rows);
    print!("{table}");
    let md = args.out.join("ablation.md");
    let json = args.out.join("ablation.json");
    fs::write(&md, &table)?;
    let rows_json: Vec<_> = rows
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("serializable");
            v["percent"] = report_json(&r.metrics)["percent"].clone();
            v
        })
        .collect();
    fs::write(
        &json,
        serde_json::to_string_pretty(&serde_json::json!({
            "rows": rows_json,
            "shared_shuffle_stream": shared,
        }))
        .expect("serializable"),
    )?;
    outputs.extend([md, json]);
    let mut config = serde_json::to_value(&base).expect("serializable");
    config["epochs"] = args.epochs.into();
    config["batch_size"] = args.batch_size.into();
    run.finish(config, base.seed, inputs, outputs, &args.out.join("ablate.manifest.json"))?;
    Ok(rows)
}
