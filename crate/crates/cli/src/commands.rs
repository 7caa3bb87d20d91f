use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sric_core::augment::{
    augment_from_embeddings, augmented_examples, train_student, write_augmented_jsonl,
    AugmentationSummary, AugmentedSample, TeacherEmbeddings,
};
use sric_core::config::RunConfig;
use sric_core::corpus::{
    generate_with, ingest_corpus, partition, read_records, write_jsonl, CorpusFormat, Lexicon,
    Post, SynthOptions,
};
use sric_core::encoder::ToyEncoder;
use sric_core::eval::{
    evaluate_examples, fit_model, holdout_split, metrics_json, run_crossval, train_lr_baseline,
    weighted_metrics, write_similarity_csv, LinearModel, TfIdf, Variant,
};
use sric_core::model::{Checkpoint, CheckpointMeta, ModelState, TrainExample, TrainHistory};
use sric_core::segment::FrequencyTable;
use sric_core::{Error, Result};

use crate::{Cli, Command, DataArgs};

const ARTIFACT_FORMAT_VERSION: u32 = 1;

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Error::config("config", format!("{} does not exist", path.display())));
            }
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.out_dir = o.clone();
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    Ok(config)
}

fn apply_data(config: &mut RunConfig, data: &DataArgs) {
    if let Some(c) = &data.corpus {
        config.corpus = Some(c.clone());
    }
    if let Some(l) = &data.lexicon {
        config.lexicon = Some(l.clone());
    }
}

fn require_file(field: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(field, format!("{} does not exist", path.display())))
    }
}

fn frequency_table(config: &RunConfig) -> Result<FrequencyTable> {
    match &config.frequency_table {
        Some(p) => {
            require_file("frequency_table", p)?;
            FrequencyTable::load(p)
        }
        None => Ok(FrequencyTable::shipped()),
    }
}

fn load_inputs(config: &RunConfig) -> Result<(Vec<Post>, Lexicon)> {
    let corpus = config.corpus_path();
    let lexicon = config.lexicon_path();
    require_file("corpus", &corpus)?;
    require_file("lexicon", &lexicon)?;
    let freq = frequency_table(config)?;
    let lexicon = Lexicon::load(&lexicon, &freq)?;
    let posts = ingest_corpus(&corpus, CorpusFormat::from_path(&corpus))?;
    Ok((posts, lexicon))
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_out_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s)
}

fn stamp(config: &RunConfig) -> Value {
    json!({
        "format_version": ARTIFACT_FORMAT_VERSION,
        "seed": config.seed,
        "config_hash": config.config_hash(),
    })
}

fn with_stamp(config: &RunConfig, fields: Value) -> Value {
    let mut v = stamp(config);
    if let (Value::Object(base), Value::Object(extra)) = (&mut v, fields) {
        base.extend(extra);
    }
    v
}

fn print_line(v: &Value) {
    println!("{v}");
}

fn examples(posts: &[Post], lexicon: &Lexicon, variant: Variant) -> Vec<TrainExample> {
    posts
        .iter()
        .map(|p| TrainExample::from_post(p, lexicon, variant.text_mode(), variant.is_joint()))
        .collect()
}

struct Holdout {
    train: Vec<TrainExample>,
    validation: Vec<TrainExample>,
}

/// Stratified train/validation split of the posts carrying hashtags.
fn holdout(t_o: &[Post], lexicon: &Lexicon, config: &RunConfig) -> Result<Holdout> {
    if t_o.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 posts with lexicon hashtags to train".into(),
        ));
    }
    let all = examples(t_o, lexicon, config.variant);
    let labels: Vec<_> = t_o.iter().map(|p| p.label).collect();
    let (tr, va) = holdout_split(&labels, config.val_fraction, config.derive_seed("holdout", 0))?;
    if tr.is_empty() || va.is_empty() {
        return Err(Error::config("val_fraction", "leaves an empty training or validation split"));
    }
    Ok(Holdout {
        train: tr.iter().map(|&i| all[i].clone()).collect(),
        validation: va.iter().map(|&i| all[i].clone()).collect(),
    })
}

fn write_history(path: &Path, history: &TrainHistory) -> Result<()> {
    write_file(path, history.to_jsonl())
}

fn checkpoint_path(config: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| config.checkpoint.clone())
        .unwrap_or_else(|| config.out_dir.join("model.json"))
}

fn load_teacher(config: &RunConfig, path: &Path) -> Result<(Checkpoint, ModelState<ToyEncoder>, String)> {
    require_file("checkpoint", path)?;
    let ckpt = Checkpoint::load(path)?;
    if ckpt.meta.compat_hash != config.compat_hash() {
        return Err(Error::Incompatible(format!(
            "{} was trained with a different backend, dimension, sequence length or text mode",
            path.display()
        )));
    }
    let state = ckpt.to_state()?;
    let hash = Checkpoint::file_hash(path)?;
    Ok((ckpt, state, hash))
}

fn pseudo_label(
    config: &RunConfig,
    teacher: &ModelState<ToyEncoder>,
    checkpoint_hash: &str,
    hashtag_free: &[Post],
    lexicon: &Lexicon,
) -> Result<Vec<AugmentedSample>> {
    let embeddings = TeacherEmbeddings::load_or_compute(
        teacher,
        lexicon,
        hashtag_free,
        checkpoint_hash,
        &config.out_dir.join("cache"),
    )?;
    augment_from_embeddings(&embeddings, hashtag_free, lexicon)
}

fn cmd_synth(config: &RunConfig, n_per_class: Option<usize>, hashtag_rate: Option<f64>) -> Result<()> {
    let mut config = config.clone();
    if let Some(n) = n_per_class {
        config.n_per_class = n;
    }
    if let Some(r) = hashtag_rate {
        config.hashtag_rate = r;
    }
    config.validate()?;
    if config.n_per_class == 0 {
        return Err(Error::config("n_per_class", "must be positive"));
    }
    let opts = SynthOptions {
        implicit_rate: config.implicit_rate,
        ..SynthOptions::new(config.seed, config.n_per_class, config.hashtag_rate)
    };
    let (posts, lexicon) = generate_with(&opts);
    create_out_dir(&config.out_dir)?;
    let corpus_path = config.out_dir.join("corpus.jsonl");
    let file = File::create(&corpus_path).map_err(|e| Error::io(&corpus_path, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&posts, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&corpus_path, e))?;
    let lexicon_path = config.out_dir.join("lexicon.tsv");
    lexicon.write(&lexicon_path)?;
    let part = partition(&posts, &lexicon);
    let manifest = with_stamp(
        &config,
        json!({
            "n_per_class": config.n_per_class,
            "hashtag_rate": config.hashtag_rate,
            "implicit_rate": config.implicit_rate,
            "n_posts": posts.len(),
            "n_with_hashtags": part.with_hashtags.len(),
            "corpus": corpus_path,
            "lexicon": lexicon_path,
        }),
    );
    write_json(&config.out_dir.join("synth.json"), &manifest)?;
    print_line(&manifest);
    Ok(())
}

fn cmd_segment(config: &RunConfig, lexicon: Option<PathBuf>, freq: Option<PathBuf>, output: Option<PathBuf>) -> Result<()> {
    let mut config = config.clone();
    if freq.is_some() {
        config.frequency_table = freq;
    }
    let input = lexicon.or_else(|| config.lexicon.clone()).unwrap_or_else(|| config.lexicon_path());
    require_file("lexicon", &input)?;
    let freq = frequency_table(&config)?;
    let resolved = Lexicon::resolve(read_records(&input)?, &freq)?;
    let output = output.unwrap_or_else(|| config.out_dir.join("lexicon.segmented.tsv"));
    if let Some(parent) = output.parent() {
        create_out_dir(parent)?;
    }
    resolved.write(&output)?;
    print_line(&with_stamp(
        &config,
        json!({"lexicon": output, "entries": resolved.len()}),
    ));
    Ok(())
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let (posts, lexicon) = load_inputs(config)?;
    let t_o = partition(&posts, &lexicon).with_hashtags;
    let split = holdout(&t_o, &lexicon, config)?;
    let out = &config.out_dir;

    if config.variant == Variant::LrBaseline {
        let docs: Vec<&str> = split.train.iter().map(|e| e.text.as_str()).collect();
        let tfidf = TfIdf::fit(&docs)?;
        let x: Vec<_> = docs.iter().map(|d| tfidf.transform(d)).collect();
        let y: Vec<_> = split.train.iter().map(|e| e.label).collect();
        let model = train_lr_baseline(&x, &y, tfidf.len(), config.l2_weight)?;
        let val_pred = split
            .validation
            .iter()
            .map(|e| model.predict(&tfidf.transform(&e.text)))
            .collect::<Result<Vec<_>>>()?;
        let val_true: Vec<_> = split.validation.iter().map(|e| e.label).collect();
        let f1 = weighted_metrics(&val_true, &val_pred)?.weighted_f1;
        let path = out.join("lr_model.json");
        write_json(
            &path,
            &with_stamp(
                config,
                json!({"kind": "lr_baseline", "compat_hash": config.compat_hash(), "tfidf": tfidf, "model": model}),
            ),
        )?;
        print_line(&with_stamp(
            config,
            json!({"variant": config.variant, "model": path, "validation_weighted_f1": f1}),
        ));
        return Ok(());
    }

    let candidates = if config.variant.is_joint() {
        config.weight_candidates()
    } else {
        vec![sric_core::model::LossWeights::sentiment_only()]
    };
    let fit = fit_model(&config.toy_encoder(), &split.train, &split.validation, &candidates, config, 0)?;
    let meta = CheckpointMeta {
        seed: config.seed,
        config_hash: config.config_hash(),
        compat_hash: config.compat_hash(),
        text_mode: config.variant.text_mode(),
        variant: config.variant.as_str().to_string(),
    };
    let path = out.join("model.json");
    create_out_dir(out)?;
    Checkpoint::from_state(&fit.state, fit.weights, meta).save(&path)?;
    write_history(&out.join("history.jsonl"), &fit.history)?;
    let summary = with_stamp(
        config,
        json!({
            "variant": config.variant,
            "checkpoint": path,
            "loss_weights": fit.weights,
            "best_epoch": fit.history.best_epoch,
            "stopped_epoch": fit.history.stopped_epoch,
            "validation_weighted_f1": fit.validation_f1,
            "n_train": split.train.len(),
            "n_validation": split.validation.len(),
        }),
    );
    write_json(&out.join("train_summary.json"), &summary)?;
    print_line(&summary);
    Ok(())
}

fn cmd_augment(config: &RunConfig, checkpoint: &Option<PathBuf>) -> Result<()> {
    config.validate()?;
    let path = checkpoint_path(config, checkpoint);
    let (posts, lexicon) = load_inputs(config)?;
    let (_, teacher, hash) = load_teacher(config, &path)?;
    let hashtag_free = partition(&posts, &lexicon).without_hashtags;
    let samples = pseudo_label(config, &teacher, &hash, &hashtag_free, &lexicon)?;
    let out = config.out_dir.join("augmented.jsonl");
    let mut buf = Vec::new();
    write_augmented_jsonl(&samples, &mut buf).map_err(|e| Error::io(&out, e))?;
    write_file(&out, buf)?;
    let summary = with_stamp(
        config,
        json!({
            "checkpoint": path,
            "checkpoint_hash": hash,
            "augmented": out,
            "counts": AugmentationSummary::from_samples(&samples),
        }),
    );
    write_json(&config.out_dir.join("augmentation_summary.json"), &summary)?;
    print_line(&summary);
    Ok(())
}

fn cmd_train_student(config: &RunConfig, checkpoint: &Option<PathBuf>) -> Result<()> {
    let mut config = config.clone();
    config.variant = Variant::Sric;
    config.validate()?;
    let path = checkpoint_path(&config, checkpoint);
    let (posts, lexicon) = load_inputs(&config)?;
    let (teacher_ckpt, teacher, hash) = load_teacher(&config, &path)?;
    let part = partition(&posts, &lexicon);
    let split = holdout(&part.with_hashtags, &lexicon, &config)?;
    let samples = pseudo_label(&config, &teacher, &hash, &part.without_hashtags, &lexicon)?;
    let augmented = augmented_examples(&samples, &part.without_hashtags, &lexicon, config.variant.text_mode())?;
    let tc = config.train_config(teacher_ckpt.loss_weights, config.derive_seed("student-shuffle", 0));
    let (student, history) = train_student(
        &config.toy_encoder(),
        &split.train,
        &augmented,
        &split.validation,
        &tc,
        config.dropout,
        config.derive_seed("student-init", 0),
    )?;
    let validation = evaluate_examples(&student, &split.validation)?;
    let meta = CheckpointMeta {
        seed: config.seed,
        config_hash: config.config_hash(),
        compat_hash: config.compat_hash(),
        text_mode: config.variant.text_mode(),
        variant: Variant::SricAugmented.as_str().to_string(),
    };
    let out = &config.out_dir;
    create_out_dir(out)?;
    let student_path = out.join("student.json");
    Checkpoint::from_state(&student, teacher_ckpt.loss_weights, meta).save(&student_path)?;
    write_history(&out.join("student_history.jsonl"), &history)?;
    let summary = with_stamp(
        &config,
        json!({
            "teacher": path,
            "teacher_hash": hash,
            "checkpoint": student_path,
            "loss_weights": teacher_ckpt.loss_weights,
            "n_train": split.train.len(),
            "n_augmented": augmented.len(),
            "augmentation": AugmentationSummary::from_samples(&samples),
            "best_epoch": history.best_epoch,
            "stopped_epoch": history.stopped_epoch,
            "validation_weighted_f1": validation.weighted_f1,
        }),
    );
    write_json(&out.join("student_summary.json"), &summary)?;
    print_line(&summary);
    Ok(())
}

fn cmd_evaluate(config: &RunConfig, checkpoint: &Option<PathBuf>) -> Result<()> {
    let mut config = config.clone();
    let path = checkpoint_path(&config, checkpoint);
    require_file("checkpoint", &path)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: Value = serde_json::from_str(&text)?;
    let kind = raw.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
    let (posts, lexicon) = load_inputs(&config)?;

    let (metrics, checkpoint_config_hash) = if kind == "lr_baseline" {
        config.variant = Variant::LrBaseline;
        config.validate()?;
        if raw["compat_hash"] != json!(config.compat_hash()) {
            return Err(Error::Incompatible(format!("{} does not match this config", path.display())));
        }
        let tfidf: TfIdf = serde_json::from_value(raw["tfidf"].clone())?;
        let model: LinearModel = serde_json::from_value(raw["model"].clone())?;
        let all = examples(&posts, &lexicon, config.variant);
        let y_true: Vec<_> = all.iter().map(|e| e.label).collect();
        let y_pred = all
            .iter()
            .map(|e| model.predict(&tfidf.transform(&e.text)))
            .collect::<Result<Vec<_>>>()?;
        (weighted_metrics(&y_true, &y_pred)?, raw["config_hash"].clone())
    } else {
        let ckpt = Checkpoint::load(&path)?;
        config.variant = ckpt
            .meta
            .variant
            .parse()
            .map_err(|e: String| Error::Checkpoint(e))?;
        config.validate()?;
        let (ckpt, state, _) = load_teacher(&config, &path)?;
        let all = examples(&posts, &lexicon, config.variant);
        (evaluate_examples(&state, &all)?, json!(ckpt.meta.config_hash))
    };
    let report = with_stamp(
        &config,
        json!({
            "checkpoint": path,
            "checkpoint_config_hash": checkpoint_config_hash,
            "variant": config.variant,
            "n_posts": posts.len(),
            "metrics": metrics.to_json(),
        }),
    );
    write_json(&config.out_dir.join("evaluation.json"), &report)?;
    print_line(&report);
    Ok(())
}

fn cmd_crossval(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let (posts, lexicon) = load_inputs(config)?;
    let report = run_crossval(&posts, &lexicon, config)?;
    let dir = config.out_dir.join(format!("crossval-{}", config.variant));
    let metrics_path = dir.join("metrics.json");
    write_file(&metrics_path, metrics_json(&report))?;
    let mut outputs = json!({"metrics": metrics_path});
    if let Some((surfaces, matrix)) = &report.similarity {
        let csv_path = dir.join("similarity.csv");
        let mut buf = Vec::new();
        write_similarity_csv(surfaces, matrix, &mut buf)?;
        write_file(&csv_path, buf)?;
        outputs["similarity"] = json!(csv_path);
    }
    print_line(&with_stamp(
        config,
        json!({
            "variant": config.variant,
            "weighted_f1": format!("{:.4} ({:.3})", report.mean.weighted_f1, report.std.weighted_f1),
            "accuracy": format!("{:.4} ({:.3})", report.mean.accuracy, report.std.accuracy),
            "outputs": outputs,
        }),
    ));
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(&cli)?;
    if let Some(jobs) = config.jobs {
        if jobs == 0 {
            return Err(Error::config("jobs", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth { n_per_class, hashtag_rate } => cmd_synth(&config, *n_per_class, *hashtag_rate),
        Command::Segment { lexicon, freq, output } => {
            cmd_segment(&config, lexicon.clone(), freq.clone(), output.clone())
        }
        Command::Train { data, variant } => {
            apply_data(&mut config, data);
            if let Some(v) = variant {
                config.variant = *v;
            }
            cmd_train(&config)
        }
        Command::Augment { data, checkpoint } => {
            apply_data(&mut config, data);
            cmd_augment(&config, checkpoint)
        }
        Command::TrainStudent { data, checkpoint } => {
            apply_data(&mut config, data);
            cmd_train_student(&config, checkpoint)
        }
        Command::Evaluate { data, checkpoint } => {
            apply_data(&mut config, data);
            cmd_evaluate(&config, checkpoint)
        }
        Command::Crossval { data, variant } => {
            apply_data(&mut config, data);
            if let Some(v) = variant {
                config.variant = *v;
            }
            cmd_crossval(&config)
        }
    }
}
