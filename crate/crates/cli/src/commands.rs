use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use rehab_contrast::evaluation::{evaluate, export_embeddings, mean_squared_error, spearman, svm_probe, tsne, SvmConfig, TsneConfig};
use rehab_contrast::inference::{
    build_reference_set, calibrate_thresholds, classify, represent_dataset, score_dataset, ReferenceSet,
};
use rehab_contrast::model::{checkpoint_id, load_checkpoint, save_checkpoint, write_atomic, Head, HeadMode, ModelState};
use rehab_contrast::skeleton::{export_canonical, ingest, load_canonical, split_indices, Dataset, Label, SplitOptions};
use rehab_contrast::synthetic::{generate_binary, generate_regression, SyntheticConfig};
use rehab_contrast::training::{predict_scores, train_contrastive, transfer_to_regression, EncoderInit};

use crate::cli::*;
use crate::config::{parse_dataset_kind, require_exists, resolve_output, RunConfig, ThresholdPolicy};
use crate::error::{CliError, CliResult};
use crate::plot::{self, Marker, Point};

pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Prepare(a) => prepare(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Transfer(a) => transfer(a),
        Command::Eval(a) => eval(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Infer(a) => infer(a),
        Command::Embed(a) => embed(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    write_atomic(path, contents.as_ref())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(rehab_contrast::Error::from)?;
    text.push('\n');
    write_file(path, text)
}

/// A directory that may be replaced only when it holds a canonical dataset.
fn claim_dataset_dir(out: &Path, force: bool) -> CliResult<()> {
    let occupied = out.exists() && fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_some();
    if !occupied {
        return Ok(());
    }
    if !force {
        return Err(CliError::Exists(out.to_owned()));
    }
    if !out.join("meta.json").is_file() {
        return Err(CliError::Usage(format!(
            "{} is not a canonical dataset directory; refusing to replace it",
            out.display()
        )));
    }
    fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn prepare(args: &PrepareArgs) -> CliResult<()> {
    let kind = parse_dataset_kind(&args.dataset)?;
    require_exists(&args.root, "dataset root")?;
    let out = resolve_output(&args.out);
    claim_dataset_dir(&out, args.force)?;
    let data = ingest(kind, &args.root)?.canonicalize(args.length)?;
    let summary = export_canonical(&data, &out)?;
    println!(
        "{} samples, {} exercise types -> {}",
        summary.sample_count,
        summary.exercise_types.len(),
        summary.path.display()
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> CliResult<()> {
    let out = resolve_output(&args.out);
    claim_dataset_dir(&out, args.force)?;
    let cfg = SyntheticConfig {
        frames: args.frames,
        samples_per_type: args.samples_per_type,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let data = match args.regression {
        Some(kind) => generate_regression(&cfg, kind)?,
        None => generate_binary(&cfg)?,
    };
    let summary = export_canonical(&data, &out)?;
    println!("{} samples -> {}", summary.sample_count, summary.path.display());
    Ok(())
}

fn apply_common(cfg: &mut RunConfig, args: &ConfigArgs) {
    if let Some(d) = &args.data {
        cfg.dataset.canonical = Some(d.clone());
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(s) = args.split_seed {
        cfg.eval.seed = s;
    }
    if let Some(p) = args.protocol {
        cfg.eval.protocol = p;
    }
    if let Some(f) = args.fold {
        cfg.eval.fold = f;
    }
    if let Some(t) = &args.exercise_type {
        cfg.dataset.exercise_type = Some(t.clone());
    }
}

fn run_dir(cfg: &mut RunConfig, default: &str) -> CliResult<PathBuf> {
    let dir = resolve_output(cfg.out_dir.as_deref().unwrap_or(Path::new(default)));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    cfg.out_dir = Some(dir.clone());
    Ok(dir)
}

/// Training and held-out parts under the configured protocol.
fn split_data(data: &Dataset, cfg: &RunConfig) -> CliResult<(Dataset, Dataset)> {
    let Some(scheme) = cfg.eval.protocol.scheme() else {
        return Ok((data.clone(), data.subset(&[])));
    };
    let folds = split_indices(data, scheme, cfg.eval.seed, SplitOptions::default())?;
    let fold = folds.get(cfg.eval.fold).ok_or_else(|| {
        CliError::Usage(format!("fold {} out of range: {scheme} has {} fold(s)", cfg.eval.fold, folds.len()))
    })?;
    Ok((data.subset(&fold.train), data.subset(&fold.validation)))
}

fn ids(data: &Dataset) -> Vec<&str> {
    data.samples().iter().map(|s| s.id.as_str()).collect()
}

fn open_log(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn log_line<T: Serialize>(w: &mut BufWriter<File>, path: &Path, record: &T) -> rehab_contrast::Result<()> {
    let line = serde_json::to_string(record)?;
    writeln!(w, "{line}")
        .and_then(|_| w.flush())
        .map_err(|e| rehab_contrast::Error::io(path, e))
}

fn progress_every(epochs: usize) -> usize {
    (epochs / 20).max(1)
}

/// References from `train`, thresholds per the configured policy.
fn references_for(
    state: &ModelState,
    train: &Dataset,
    cfg: &RunConfig,
    checkpoint: Option<String>,
) -> CliResult<ReferenceSet> {
    let mut refs = build_reference_set(state, train, &cfg.inference.reference_options())?;
    if cfg.inference.threshold == ThresholdPolicy::Calibrate {
        refs = calibrate_thresholds(state, &refs, train)?;
    }
    refs.checkpoint_id = checkpoint;
    Ok(refs)
}

fn covered(data: &Dataset, refs: &ReferenceSet) -> Dataset {
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| refs.references.contains_key(&data.samples()[i].exercise_type))
        .collect();
    if keep.len() < data.len() {
        log::warn!("{} held-out sample(s) have no reference and are not scored", data.len() - keep.len());
    }
    data.subset(&keep)
}

fn loss_series(log: &[(usize, f64)], name: &str) -> (String, Vec<(f64, f64)>) {
    (name.to_owned(), log.iter().map(|&(e, v)| (e as f64, v)).collect())
}

fn train(args: &TrainArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    let t = &mut cfg.train;
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_tuples {
        t.batch_tuples = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.loss_mode {
        t.loss.denominator_mode = v;
    }
    if let Some(v) = args.temperature {
        t.loss.temperature = v;
    }
    if let Some(v) = args.checkpoint_every {
        t.checkpoint_every = v;
    }
    if args.ri {
        cfg.model.encoder.use_ri = true;
    }
    if let Some(v) = args.head_mode {
        cfg.inference.head_mode = v;
    }

    let data = cfg.dataset.load()?;
    if let Some(c) = data.channel_count() {
        cfg.model.encoder.in_channels = c;
    }
    cfg.model.projection.in_dim = cfg.model.encoder.embedding_dim;
    cfg.model.regression.in_dim = cfg.model.encoder.embedding_dim;
    let (train_part, held_out) = split_data(&data, &cfg)?;

    let state = match &args.resume {
        Some(path) => {
            require_exists(path, "checkpoint")?;
            let state = load_checkpoint(path)?;
            cfg.model.encoder = state.encoder_config().clone();
            if let Some(p) = state.projection_config() {
                cfg.model.projection = p;
            }
            state
        }
        None => ModelState::new(
            cfg.model.encoder.clone(),
            cfg.model.projection,
            data.graph().clone(),
            cfg.train.seed,
        )?,
    };

    let dir = run_dir(&mut cfg, "runs/train")?;
    write_file(&dir.join("config.toml"), cfg.to_toml()?)?;
    write_json(
        &dir.join("split.json"),
        &json!({
            "protocol": cfg.eval.protocol,
            "seed": cfg.eval.seed,
            "fold": cfg.eval.fold,
            "train": ids(&train_part),
            "validation": ids(&held_out),
        }),
    )?;

    let log_path = dir.join("train_log.jsonl");
    let mut log_file = open_log(&log_path)?;
    let ckpt_dir = dir.join("checkpoints");
    let every = progress_every(cfg.train.epochs);
    let mut curve = Vec::new();
    log::info!(
        "training on {} of {} samples for {} epochs",
        train_part.len(),
        data.len(),
        cfg.train.epochs
    );
    let outcome = train_contrastive(state, &train_part, &cfg.train, &mut |rec, state| {
        log_line(&mut log_file, &log_path, rec)?;
        curve.push((rec.epoch, rec.loss));
        if rec.checkpoint_due {
            save_checkpoint(state, &ckpt_dir.join(format!("epoch_{:05}.ckpt", rec.epoch)))?;
        }
        if rec.epoch % every == 0 {
            log::info!("epoch {} loss {:.4} ({} anchors)", rec.epoch, rec.loss, rec.anchors);
        }
        Ok(())
    })?;

    let model_path = dir.join("model.ckpt");
    let id = save_checkpoint(&outcome.state, &model_path)?;
    log::info!("wrote {} ({id})", model_path.display());
    let refs = references_for(&outcome.state, &train_part, &cfg, Some(id))?;
    refs.save(&dir.join("references.json"))?;
    plot::curves(&[loss_series(&curve, "loss")], "Contrastive loss", "mean batch loss", &dir.join("loss_curve.svg"))?;

    if !held_out.is_empty() && held_out.is_binary() {
        let report = evaluate(
            &outcome.state,
            &refs,
            &covered(&held_out, &refs),
            cfg.eval.protocol.scheme(),
            cfg.eval.seed,
        )?;
        write_json(&dir.join("report.json"), &report)?;
        write_file(&dir.join("report.txt"), report.to_table())?;
        print!("{}", report.to_table());
    }
    println!("run directory: {}", dir.display());
    Ok(())
}

fn clinical_truth(data: &Dataset) -> Vec<f64> {
    data.samples().iter().filter_map(|s| s.label.clinical_score()).collect()
}

fn transfer(args: &TransferArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_tuples {
        cfg.train.batch_tuples = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if args.freeze_encoder {
        cfg.model.regression.freeze_encoder = true;
    }
    if args.fine_tune {
        cfg.model.regression.freeze_encoder = false;
    }
    require_exists(&args.checkpoint, "checkpoint")?;
    let pretrained = load_checkpoint(&args.checkpoint)?;
    let source_id = checkpoint_id(&args.checkpoint)?;
    cfg.model.encoder = pretrained.encoder_config().clone();
    cfg.model.regression.in_dim = pretrained.encoder.embedding_dim();

    let data = cfg.dataset.load()?;
    let (train_part, validation) = match &args.validation {
        Some(v) => {
            require_exists(v, "validation directory")?;
            let val = load_canonical(v)?;
            let val = match &cfg.dataset.exercise_type {
                Some(ty) => val.filter_type(&ty.as_str().into()),
                None => val,
            };
            (data, val)
        }
        None => split_data(&data, &cfg)?,
    };
    let init = if args.from_scratch {
        EncoderInit::FromScratch
    } else {
        EncoderInit::Pretrained
    };

    let dir = run_dir(&mut cfg, "runs/transfer")?;
    write_file(&dir.join("config.toml"), cfg.to_toml()?)?;
    let log_path = dir.join("transfer_log.jsonl");
    let mut log_file = open_log(&log_path)?;
    let every = progress_every(cfg.train.epochs);
    let mut train_curve = Vec::new();
    let mut val_curve = Vec::new();
    let val = (!validation.is_empty()).then_some(&validation);
    let outcome = transfer_to_regression(
        &pretrained,
        &train_part,
        val,
        cfg.model.regression,
        init,
        &cfg.train,
        &mut |rec, _| {
            log_line(&mut log_file, &log_path, rec)?;
            train_curve.push((rec.epoch, rec.train_mse));
            if let Some(v) = rec.validation_mse {
                val_curve.push((rec.epoch, v));
            }
            if rec.epoch % every == 0 {
                log::info!("epoch {} train mse {:.4}", rec.epoch, rec.train_mse);
            }
            Ok(())
        },
    )?;
    let model_path = dir.join("regression.ckpt");
    let id = save_checkpoint(&outcome.state, &model_path)?;
    log::info!("wrote {} ({id})", model_path.display());

    let mut series = vec![loss_series(&train_curve, "train")];
    if !val_curve.is_empty() {
        series.push(loss_series(&val_curve, "validation"));
    }
    plot::curves(&series, "Regression fine-tuning", "mean squared error (scaled)", &dir.join("transfer_curve.svg"))?;

    let mut report = json!({
        "source_checkpoint": source_id,
        "checkpoint": id,
        "init": init,
        "freeze_encoder": outcome.state.meta.freeze_encoder,
        "train_samples": train_part.len(),
        "validation_samples": validation.len(),
    });
    if !validation.is_empty() {
        let predicted = predict_scores(&outcome.state, &validation)?;
        let truth = clinical_truth(&validation);
        write_predictions(&dir.join("predictions.tsv"), &validation, &predicted)?;
        let rho = spearman(&predicted, &truth).ok();
        let mse = mean_squared_error(&predicted, &truth)?;
        report["spearman"] = json!(rho);
        report["mse"] = json!(mse);
        match rho {
            Some(r) => println!("validation spearman {r:.4}, mse {mse:.3}"),
            None => println!("validation spearman undefined, mse {mse:.3}"),
        }
    }
    write_json(&dir.join("report.json"), &report)?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn write_predictions(path: &Path, data: &Dataset, predicted: &[f64]) -> CliResult<()> {
    let mut text = String::from("id\texercise_type\tclinical_score\tpredicted\n");
    for (s, p) in data.samples().iter().zip(predicted) {
        let truth = s.label.clinical_score().map_or_else(String::new, |v| v.to_string());
        text.push_str(&format!("{}\t{}\t{truth}\t{p}\n", s.id, s.exercise_type));
    }
    write_file(path, text)
}

fn load_references(path: &Path, checkpoint: &Path) -> CliResult<ReferenceSet> {
    require_exists(path, "reference file")?;
    let refs = ReferenceSet::load(path)?;
    if let Some(expected) = &refs.checkpoint_id {
        if *expected != checkpoint_id(checkpoint)? {
            log::warn!("{} was built for a different checkpoint", path.display());
        }
    }
    Ok(refs)
}

fn load_model(path: &Path) -> CliResult<ModelState> {
    require_exists(path, "checkpoint")?;
    Ok(load_checkpoint(path)?)
}

fn svm_report(state: &ModelState, train: &Dataset, held_out: &Dataset, mode: HeadMode) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for ty in held_out.exercise_types() {
        let (tr, va) = (train.filter_type(&ty), held_out.filter_type(&ty));
        let labels = |d: &Dataset| d.samples().iter().filter_map(|s| s.label.assessment()).collect::<Vec<_>>();
        let (xt, xv) = (represent_dataset(state, &tr, mode)?, represent_dataset(state, &va, mode)?);
        match svm_probe(xt.view(), &labels(&tr), xv.view(), &labels(&va), &SvmConfig::default()) {
            Ok(acc) => {
                out.insert(ty.to_string(), acc);
            }
            Err(e) => log::warn!("svm probe skipped for {ty}: {e}"),
        }
    }
    Ok(out)
}

fn eval(args: &EvalArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(m) = args.head_mode {
        cfg.inference.head_mode = m;
    }
    if let Some(t) = args.threshold {
        cfg.inference.threshold = t;
    }
    let state = load_model(&args.checkpoint)?;
    let data = cfg.dataset.load()?;
    let id = checkpoint_id(&args.checkpoint)?;

    let (report, svm) = match &args.references {
        Some(path) => {
            if args.svm {
                return Err(CliError::Usage("--svm needs a training part; omit --references".into()));
            }
            let refs = load_references(path, &args.checkpoint)?;
            (evaluate(&state, &refs, &data, None, cfg.eval.seed)?, None)
        }
        None => {
            let Some(scheme) = cfg.eval.protocol.scheme() else {
                return Err(CliError::Usage("eval needs --references or a split protocol".into()));
            };
            let (train_part, held_out) = split_data(&data, &cfg)?;
            let refs = references_for(&state, &train_part, &cfg, Some(id.clone()))?;
            let report = evaluate(&state, &refs, &covered(&held_out, &refs), Some(scheme), cfg.eval.seed)?;
            let svm = if args.svm {
                Some(svm_report(&state, &train_part, &held_out, cfg.inference.head_mode)?)
            } else {
                None
            };
            (report, svm)
        }
    };
    print!("{}", report.to_table());
    if let Some(svm) = &svm {
        for (ty, acc) in svm {
            println!("svm probe {ty}: {acc:.4}");
        }
    }
    if let Some(out) = &args.common.out {
        let dir = resolve_output(out);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_json(
            &dir.join("report.json"),
            &json!({
                "checkpoint": id,
                "head_mode": cfg.inference.head_mode,
                "report": report,
                "svm_probe": svm,
            }),
        )?;
        write_file(&dir.join("report.txt"), report.to_table())?;
    }
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    if let Some(m) = args.head_mode {
        cfg.inference.head_mode = m;
    }
    if let Some(e) = args.epsilon {
        cfg.inference.variance_epsilon = e;
    }
    if let Some(v) = args.variance {
        cfg.inference.variance = v;
    }
    if let Some(t) = args.threshold {
        cfg.inference.threshold = t;
    }
    let state = load_model(&args.checkpoint)?;
    let data = cfg.dataset.load()?;
    let (train_part, _) = split_data(&data, &cfg)?;
    let refs = references_for(&state, &train_part, &cfg, Some(checkpoint_id(&args.checkpoint)?))?;
    let dir = run_dir(&mut cfg, "runs/calibrate")?;
    let path = dir.join("references.json");
    refs.save(&path)?;
    for (ty, r) in &refs.references {
        println!("{ty}\tthreshold {:.4}", r.threshold);
    }
    println!("references: {}", path.display());
    Ok(())
}

fn infer(args: &InferArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    let state = load_model(&args.checkpoint)?;
    let data = cfg.dataset.load()?;
    let dir = run_dir(&mut cfg, "runs/infer")?;
    let path = dir.join("predictions.tsv");
    if matches!(state.head, Head::Regression(_)) {
        let predicted = predict_scores(&state, &data)?;
        return write_predictions(&path, &data, &predicted);
    }
    let Some(refs_path) = &args.references else {
        return Err(CliError::Usage("--references is required for contrastive checkpoints".into()));
    };
    let refs = load_references(refs_path, &args.checkpoint)?;
    let scores = score_dataset(&state, &refs, &data)?;
    let mut text = String::from("id\texercise_type\tscore\tthreshold\tprediction\tassessment\n");
    for (s, &score) in data.samples().iter().zip(&scores) {
        let theta = refs.threshold(&s.exercise_type)?;
        let truth = match s.label {
            Label::Binary(a) => a.symbol().to_owned(),
            Label::Clinical(v) => v.to_string(),
        };
        text.push_str(&format!(
            "{}\t{}\t{score}\t{theta}\t{}\t{truth}\n",
            s.id,
            s.exercise_type,
            classify(score, theta).symbol()
        ));
    }
    write_file(&path, text)
}

fn embed(args: &EmbedArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load_or_default(args.common.config.as_deref())?;
    apply_common(&mut cfg, &args.common);
    let state = load_model(&args.checkpoint)?;
    let data = cfg.dataset.load()?;
    let refs = args
        .references
        .as_deref()
        .map(|p| load_references(p, &args.checkpoint))
        .transpose()?;
    let mode = args
        .head_mode
        .or(refs.as_ref().map(|r| r.head_mode))
        .unwrap_or(cfg.inference.head_mode);
    let projection = args.project.then(|| TsneConfig {
        perplexity: args.perplexity,
        iterations: args.iterations,
        seed: cfg.train.seed,
        ..TsneConfig::default()
    });
    let dir = run_dir(&mut cfg, "runs/embed")?;
    let path = dir.join("embeddings.tsv");
    export_embeddings(&state, &data, mode, refs.as_ref(), projection.as_ref(), &path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    require_exists(path, "table")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{} is empty", path.display())))?
        .split('\t')
        .map(str::to_owned)
        .collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split('\t').map(str::to_owned).collect()).collect();
    if let Some(i) = rows.iter().position(|r| r.len() != header.len()) {
        return Err(CliError::Usage(format!("{} row {} has {} columns, expected {}", path.display(), i + 2, rows[i].len(), header.len())));
    }
    Ok(Table { header, rows })
}

fn numeric(table: &Table, cols: &[usize], path: &Path) -> CliResult<Array2<f64>> {
    let mut m = Array2::zeros((table.rows.len(), cols.len()));
    for (i, row) in table.rows.iter().enumerate() {
        for (k, &c) in cols.iter().enumerate() {
            m[[i, k]] = row[c].parse().map_err(|_| {
                CliError::Usage(format!("{} row {}: `{}` is not a number", path.display(), i + 2, row[c]))
            })?;
        }
    }
    Ok(m)
}

fn plot_cmd(args: &PlotArgs) -> CliResult<()> {
    let out = resolve_output(&args.out);
    if let Some(path) = &args.log {
        return plot_log(path, &out);
    }
    let path = args.embeddings.as_deref().expect("clap requires --embeddings or --log");
    let table = read_table(path)?;
    let col = |name: &str| table.header.iter().position(|h| h == name);
    let (Some(ty_col), Some(label_col)) = (col("exercise_type"), col("assessment")) else {
        return Err(CliError::Usage(format!("{} lacks exercise_type/assessment columns", path.display())));
    };
    let coords = match (col("proj_0"), col("proj_1")) {
        (Some(a), Some(b)) => numeric(&table, &[a, b], path)?,
        _ => {
            let features: Vec<usize> = (0..table.header.len()).filter(|&i| table.header[i].starts_with('e') && table.header[i][1..].parse::<usize>().is_ok()).collect();
            if features.is_empty() {
                return Err(CliError::Usage(format!("{} has no embedding columns", path.display())));
            }
            let x = numeric(&table, &features, path)?;
            tsne(x.view(), &TsneConfig { perplexity: args.perplexity, seed: args.seed, ..TsneConfig::default() })
        }
    };
    let points: Vec<Point> = table
        .rows
        .iter()
        .zip(coords.rows())
        .map(|(row, xy)| Point {
            x: xy[0],
            y: xy[1],
            group: row[ty_col].clone(),
            marker: match row[label_col].as_str() {
                "+" => Marker::Correct,
                "ref" => Marker::Reference,
                s if s.parse::<f64>().is_ok() => Marker::Scored,
                _ => Marker::Incorrect,
            },
        })
        .collect();
    plot::scatter(&points, "Representations (t-SNE)", &out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn plot_log(path: &Path, out: &Path) -> CliResult<()> {
    require_exists(path, "log")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1)))?;
        let epoch = v["epoch"].as_f64().unwrap_or((i + 1) as f64);
        for key in ["loss", "train_mse", "validation_mse"] {
            if let Some(y) = v[key].as_f64() {
                series.entry(key).or_default().push((epoch, y));
            }
        }
    }
    if series.is_empty() {
        return Err(CliError::Usage(format!("{} has no loss or mse records", path.display())));
    }
    let (title, y) = if series.contains_key("loss") {
        ("Contrastive loss", "mean batch loss")
    } else {
        ("Regression fine-tuning", "mean squared error (scaled)")
    };
    let series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    plot::curves(&series, title, y, out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}
