//! End-to-end acceptance checks. Prints one status line per criterion and
//! exits nonzero when a required criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,4,5` restricts the run to the listed criteria.
//! Criterion 9 runs only when dataset roots are supplied through
//! `REHAB_UIPRMD_DIR`, `REHAB_IRDS_DIR` and `REHAB_KIMORE_DIR`; its outcome is
//! reported but never affects the exit status.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rehab_contrast::contrastive::{contrastive_loss, partition_labels, DenominatorMode, LossConfig};
use rehab_contrast::evaluation::{auc_pr, auc_roc, accuracy, evaluate, spearman, cross_validate, EvalReport};
use rehab_contrast::inference::{
    build_reference, build_reference_set, calibrate_thresholds, classify, score_representation, ReferenceOptions,
    ReferenceSet, TypeReference, VarianceKind,
};
use rehab_contrast::model::{
    EncoderConfig, HeadMode, ModelState, ProjectionConfig, ProjectionHead, RegressionHeadConfig,
};
use rehab_contrast::model::layers::Module;
use rehab_contrast::skeleton::{
    ingest, split_indices, Assessment, Dataset, DatasetKind, ExerciseType, SplitOptions, SplitScheme,
};
use rehab_contrast::synthetic::{generate_binary, generate_regression, synthetic_graph, SyntheticConfig};
use rehab_contrast::training::{
    predict_scores, train_contrastive, transfer_to_regression, EncoderInit, TrainConfig,
};

use common::*;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

const SEEDS: u64 = 5;
const EPOCHS: usize = 200;

fn small_encoder() -> EncoderConfig {
    let mut enc = EncoderConfig::tiny(vec![8, 16]);
    enc.temporal_strides = vec![1, 2];
    enc
}

fn small_projection() -> ProjectionConfig {
    ProjectionConfig { in_dim: 16, out_dim: 16 }
}

fn train_split(data: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let folds = split_indices(data, SplitScheme::Ratio3To1, seed, SplitOptions::default()).expect("split");
    (data.subset(&folds[0].train), data.subset(&folds[0].validation))
}

/// A contrastively trained small model for one seed of the synthetic data.
struct Pretrained {
    state: ModelState,
    train: Dataset,
    validation: Dataset,
    losses: Vec<f64>,
}

fn pretrain(seed: u64) -> Pretrained {
    let data = generate_binary(&SyntheticConfig { seed, ..Default::default() }).expect("synthetic data");
    let (train, validation) = train_split(&data, seed);
    let state = ModelState::new(small_encoder(), small_projection(), data.graph().clone(), seed).expect("model");
    let cfg = TrainConfig {
        epochs: EPOCHS,
        batch_tuples: 32,
        seed,
        ..Default::default()
    };
    let out = train_contrastive(state, &train, &cfg, &mut |_, _| Ok(())).expect("training");
    Pretrained {
        state: out.state,
        train,
        validation,
        losses: out.log.iter().map(|r| r.loss).collect(),
    }
}

fn held_out_report(p: &Pretrained, mode: HeadMode) -> EvalReport {
    let opts = ReferenceOptions { head_mode: mode, ..Default::default() };
    let refs = build_reference_set(&p.state, &p.train, &opts).expect("references");
    let refs = calibrate_thresholds(&p.state, &refs, &p.train).expect("calibration");
    evaluate(&p.state, &refs, &p.validation, Some(SplitScheme::Ratio3To1), 0).expect("evaluation")
}

fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

fn loss_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    while compared < 1000 {
        let tuples = rng.random_range(1..=8);
        let d = rng.random_range(1..=8);
        let tau = [0.05, 0.1, 1.0][rng.random_range(0..3)];
        let type_count = rng.random_range(1..=3);
        let (t, z) = random_labels(&mut rng, tuples, type_count);
        let types: Vec<ExerciseType> = t.iter().flat_map(|x| [x.clone(), x.clone()]).collect();
        let z: Vec<Assessment> = z.iter().flat_map(|&x| [x, x]).collect();
        if !z.iter().any(|a| a.is_correct()) {
            continue;
        }
        let emb = gaussian(&mut rng, (2 * tuples, d));
        let parts = partition_labels(&types, &z).expect("partitions");
        for mode in [DenominatorMode::Literal, DenominatorMode::Prose] {
            let expected = brute_force_loss(emb.view(), &types, &z, tau, mode);
            if !expected.is_finite() {
                continue;
            }
            let cfg = LossConfig { temperature: tau, denominator_mode: mode };
            let got = contrastive_loss(emb.view(), &parts, &cfg).expect("loss").loss;
            worst = worst.max((got - expected).abs());
            compared += 1;
        }
    }
    Outcome::check(worst <= 1e-6, format!("{compared} batches, max abs diff {worst:.2e}"))
}

fn loss_gradient_check(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let tuples = rng.random_range(2..=6);
        let d = rng.random_range(2..=8);
        let tau = [0.05, 0.1, 1.0][rng.random_range(0..3)];
        let mode = if rng.random() { DenominatorMode::Literal } else { DenominatorMode::Prose };
        let (t, z) = random_labels(rng, tuples, 2);
        let types: Vec<ExerciseType> = t.iter().flat_map(|x| [x.clone(), x.clone()]).collect();
        let z: Vec<Assessment> = z.iter().flat_map(|&x| [x, x]).collect();
        let Ok(parts) = partition_labels(&types, &z) else { continue };
        let cfg = LossConfig { temperature: tau, denominator_mode: mode };
        let emb = gaussian(rng, (2 * tuples, d));
        let Ok(out) = contrastive_loss(emb.view(), &parts, &cfg) else { continue };
        let h = 1e-5;
        let mut numeric = Vec::with_capacity(emb.len());
        for idx in 0..emb.len() {
            let (i, k) = (idx / d, idx % d);
            let mut up = emb.clone();
            up[[i, k]] += h;
            let mut down = emb.clone();
            down[[i, k]] -= h;
            let lu = contrastive_loss(up.view(), &parts, &cfg).expect("loss").loss;
            let ld = contrastive_loss(down.view(), &parts, &cfg).expect("loss").loss;
            numeric.push((lu - ld) / (2.0 * h));
        }
        let analytic: Vec<f64> = out.gradient.iter().copied().collect();
        return rel_err_floor(&analytic, &numeric, 1e-4);
    }
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let loss_worst = (0..100).map(|_| loss_gradient_check(&mut rng)).fold(0.0, f64::max);
    let net_worst = (0..100)
        .map(|_| network::gradient_check(&mut rng, 12, 1e-6))
        .fold(0.0, f64::max);
    Outcome::check(
        loss_worst <= 1e-4 && net_worst <= 1e-3,
        format!("100+100 instances, loss rel err {loss_worst:.2e}, network rel err {net_worst:.2e}"),
    )
}

fn rotate(views: &Array4<f64>, r: &[[f64; 3]; 3]) -> Array4<f64> {
    let mut out = views.clone();
    for (mut dst, src) in out
        .lanes_mut(Axis(3))
        .into_iter()
        .zip(views.lanes(Axis(3)))
    {
        for a in 0..3 {
            dst[a] = (0..3).map(|b| r[a][b] * src[b]).sum();
        }
    }
    out
}

fn ri_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut enc = small_encoder();
    enc.use_ri = true;
    let state = ModelState::new(enc, small_projection(), synthetic_graph(), 3).expect("model");
    let views = Array4::from_shape_simple_fn((50, 16, 8, 3), || StandardNormal.sample(&mut rng));
    let base = state.encode(views.view()).expect("encode");
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let rotated = rotate(&views, &random_rotation(&mut rng));
        let emb = state.encode(rotated.view()).expect("encode");
        for (a, b) in base.rows().into_iter().zip(emb.rows()) {
            worst = worst.max(rel_err(&a.to_vec(), &b.to_vec()));
        }
    }
    Outcome::check(worst <= 1e-4, format!("50 sequences x 5 rotations, max rel err {worst:.2e}"))
}

fn reference_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let m = rng.random_range(2..=20);
        let d = rng.random_range(1..=16);
        let v = gaussian(&mut rng, (m, d)) * rng.random_range(0.01..10.0);
        let got = build_reference(v.view(), 1e-8, VarianceKind::Population).expect("reference");
        let expected = naive_reference(&v, 1e-8);
        worst = worst.max(rel_err(&got.to_vec(), &expected));
    }
    let ty = ExerciseType::from("e");
    let mut flips = 0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=16);
        let r: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = gaussian(&mut rng, (1, d)).row(0).to_owned();
        let theta = rng.random_range(-1.0..1.0);
        let set = |vector: Vec<f64>| ReferenceSet {
            references: BTreeMap::from([(ty.clone(), TypeReference { vector, threshold: theta })]),
            head_mode: HeadMode::WithProjection,
            variance_epsilon: 1e-8,
            variance: VarianceKind::Population,
            checkpoint_id: None,
        };
        let (a, b) = (rng.random_range(1e-3..1e3), rng.random_range(1e-3..1e3));
        let plain = score_representation(&set(r.clone()), &ty, e.view()).expect("score");
        let scaled_ref = set(r.iter().map(|x| x * a).collect());
        let scaled = score_representation(&scaled_ref, &ty, (&e * b).view()).expect("score");
        if classify(plain, theta) != classify(scaled, theta) {
            flips += 1;
        }
    }
    Outcome::check(
        worst <= 1e-9 && flips == 0,
        format!("reference max rel err {worst:.2e}; {flips} decision changes in 1000 scalings"),
    )
}

fn random_assessments(rng: &mut ChaCha8Rng, n: usize) -> Vec<Assessment> {
    (0..n)
        .map(|_| if rng.random() { Assessment::Correct } else { Assessment::Incorrect })
        .collect()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut monotone_ok = true;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=30);
        let truth = random_assessments(&mut rng, n);
        if truth.iter().all(|z| z.is_correct()) || truth.iter().all(|z| !z.is_correct()) {
            continue;
        }
        let grid = rng.random_range(3..=20) as f64;
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).round() / grid).collect();
        let preds = random_assessments(&mut rng, n);
        let a: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).round()).collect();
        let b: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).round()).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if constant(&a) || constant(&b) {
            continue;
        }
        let roc = auc_roc(&scores, &truth).expect("auc roc");
        let diffs = [
            accuracy(&preds, &truth).expect("accuracy") - naive_accuracy(&preds, &truth),
            roc - naive_auc_roc(&scores, &truth),
            auc_pr(&scores, &truth).expect("auc pr") - naive_auc_pr(&scores, &truth),
            spearman(&a, &b).expect("spearman") - naive_spearman(&a, &b),
        ];
        worst = diffs.iter().fold(worst, |m, d| m.max(d.abs()));
        for f in [|x: f64| (3.0 * x).exp(), |x: f64| x.powi(3) - 7.0, |x: f64| x.atan() * 0.1] {
            let mapped: Vec<f64> = scores.iter().map(|&x| f(x)).collect();
            monotone_ok &= (auc_roc(&mapped, &truth).expect("auc roc") - roc).abs() <= 1e-12;
        }
        done += 1;
    }
    Outcome::check(
        worst <= 1e-9 && monotone_ok,
        format!("1000 instances, max diff {worst:.2e}, monotone invariance {monotone_ok}"),
    )
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn window_means(losses: &[f64], windows: usize) -> Vec<f64> {
    let size = losses.len() / windows;
    losses.chunks(size).take(windows).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn synthetic_end_to_end(p: &Pretrained, seconds: f64) -> Outcome {
    let report = held_out_report(p, HeadMode::WithProjection);
    let mut ok = true;
    let mut parts = Vec::new();
    for (ty, m) in &report.per_exercise {
        ok &= m.accuracy.is_some_and(|a| a >= 0.90) && m.auc_roc.is_some_and(|a| a >= 0.95);
        parts.push(format!("{ty} acc {:.3} auc {:.3}", or_nan(m.accuracy), or_nan(m.auc_roc)));
    }
    let means = window_means(&p.losses, 4);
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing && seconds < 600.0;
    let means: Vec<String> = means.iter().map(|m| format!("{m:.2}")).collect();
    Outcome::check(
        ok,
        format!("{}; loss window means {}; trained in {seconds:.0}s", parts.join(", "), means.join(" > ")),
    )
}

fn head_ablation(models: &[Pretrained]) -> Outcome {
    let mut with = Vec::new();
    let mut without = Vec::new();
    for p in models {
        with.push(or_nan(held_out_report(p, HeadMode::WithProjection).macro_average.accuracy));
        without.push(or_nan(held_out_report(p, HeadMode::EncoderOnly).macro_average.accuracy));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Outcome::check(
        mean(&with) >= mean(&without),
        format!(
            "mean accuracy with_projection {:.3} vs encoder_only {:.3} over {} seeds",
            mean(&with),
            mean(&without),
            models.len()
        ),
    )
}

fn transfer_direction(models: &[Pretrained]) -> Outcome {
    let mut pre = Vec::new();
    let mut scratch = Vec::new();
    for (seed, p) in models.iter().enumerate() {
        let seed = seed as u64;
        let reg = generate_regression(&SyntheticConfig { seed: seed + 100, ..Default::default() }, 0).expect("data");
        let (train, validation) = train_split(&reg, seed);
        let truth: Vec<f64> = validation.samples().iter().map(|s| s.label.clinical_score().unwrap()).collect();
        let cfg = TrainConfig {
            epochs: 300,
            batch_tuples: 16,
            seed,
            ..Default::default()
        };
        let head = RegressionHeadConfig { in_dim: 16, hidden_dim: 128, freeze_encoder: true };
        for (init, sink) in [(EncoderInit::Pretrained, &mut pre), (EncoderInit::FromScratch, &mut scratch)] {
            let out = transfer_to_regression(&p.state, &train, Some(&validation), head, init, &cfg, &mut |_, _| Ok(()))
                .expect("transfer");
            let predicted = predict_scores(&out.state, &validation).expect("prediction");
            sink.push(spearman(&predicted, &truth).expect("spearman"));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Outcome::check(
        mean(&pre) >= mean(&scratch),
        format!(
            "mean validation Spearman pretrained {:.3} vs from scratch {:.3} over {} seeds",
            mean(&pre),
            mean(&scratch),
            models.len()
        ),
    )
}

fn env_dir(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from)
}

fn full_scale() -> Outcome {
    let roots = [
        (DatasetKind::Uiprmd, env_dir("REHAB_UIPRMD_DIR")),
        (DatasetKind::Irds, env_dir("REHAB_IRDS_DIR")),
    ];
    let kimore = env_dir("REHAB_KIMORE_DIR");
    if roots.iter().all(|(_, r)| r.is_none()) && kimore.is_none() {
        return Outcome {
            status: Status::Skip,
            detail: "set REHAB_UIPRMD_DIR, REHAB_IRDS_DIR and/or REHAB_KIMORE_DIR to run".into(),
        };
    }
    let epochs = std::env::var("REHAB_FULL_EPOCHS").ok().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let cfg = TrainConfig { epochs, ..Default::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    let mut irds_data = None;
    for (kind, root) in roots {
        let Some(root) = root else { continue };
        let result = ingest(kind, &root).and_then(|d| d.canonicalize(64)).and_then(|data| {
            let encoder = EncoderConfig { in_channels: data.channel_count().unwrap_or(3), ..Default::default() };
            let cv = cross_validate(
                &data,
                SplitScheme::Ratio3To1,
                0,
                &encoder,
                ProjectionConfig::default(),
                &cfg,
                &ReferenceOptions::default(),
            )?;
            Ok((data, cv))
        });
        match result {
            Ok((data, cv)) => {
                let m = &cv.summary.macro_average;
                let pass = [(m.accuracy, 0.95), (m.auc_roc, 0.97), (m.auc_pr, 0.97)]
                    .iter()
                    .all(|(v, min)| v.is_some_and(|v| v >= *min));
                ok &= pass;
                parts.push(format!(
                    "{} acc {:.4} roc {:.4} pr {:.4}",
                    kind.name(),
                    or_nan(m.accuracy),
                    or_nan(m.auc_roc),
                    or_nan(m.auc_pr)
                ));
                if kind == DatasetKind::Irds {
                    irds_data = Some(data);
                }
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{} failed: {e}", kind.name()));
            }
        }
    }
    if let Some(root) = kimore {
        match kimore_transfer(&root, irds_data.as_ref(), &cfg) {
            Ok(rhos) => {
                let published = [0.79, 0.62, 0.77, 0.80, 0.74];
                ok &= rhos.len() == published.len() && rhos.iter().zip(published).all(|(r, p)| (r - p).abs() <= 0.15);
                let shown: Vec<String> = rhos.iter().map(|r| format!("{r:.2}")).collect();
                parts.push(format!("kimore rho {}", shown.join("/")));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("kimore failed: {e}"));
            }
        }
    }
    Outcome::check(ok, parts.join("; "))
}

fn kimore_transfer(
    root: &std::path::Path,
    source: Option<&Dataset>,
    cfg: &TrainConfig,
) -> rehab_contrast::Result<Vec<f64>> {
    let data = ingest(DatasetKind::Kimore, root)?.canonicalize(64)?;
    let encoder = EncoderConfig { in_channels: data.channel_count().unwrap_or(3), ..Default::default() };
    let mut pretrained = ModelState::new(encoder, ProjectionConfig::default(), data.graph().clone(), 0)?;
    if let Some(src) = source.filter(|s| s.graph() == data.graph()) {
        pretrained = train_contrastive(pretrained, src, cfg, &mut |_, _| Ok(()))?.state;
    }
    let mut rhos = Vec::new();
    for ty in data.exercise_types() {
        let subset = data.filter_type(&ty);
        let (train, validation) = train_split(&subset, 0);
        let out = transfer_to_regression(
            &pretrained,
            &train,
            Some(&validation),
            RegressionHeadConfig::default(),
            EncoderInit::Pretrained,
            cfg,
            &mut |_, _| Ok(()),
        )?;
        let predicted = predict_scores(&out.state, &validation)?;
        let truth: Vec<f64> = validation.samples().iter().filter_map(|s| s.label.clinical_score()).collect();
        rhos.push(spearman(&predicted, &truth)?);
    }
    Ok(rhos)
}

fn parameter_accounting() -> Outcome {
    let state = ModelState::new(
        EncoderConfig::default(),
        ProjectionConfig::default(),
        rehab_contrast::skeleton::SkeletonGraph::kinect_v2(),
        0,
    )
    .expect("default model");
    let total = state.count_parameters();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let head = ProjectionHead::new(ProjectionConfig::default(), &mut rng).expect("head").parameter_count();
    let target = 1_249_536.0;
    let ratio = total as f64 / target;
    Outcome::check(
        (0.75..=1.25).contains(&ratio) && head == 32_896,
        format!("default model {total} parameters ({:+.1}% of {target}), projection head {head}", (ratio - 1.0) * 100.0),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|v| v.contains(&n));
    let needs_training = [6, 7, 8].iter().any(|&n| wanted(n));

    let mut failed = false;
    let mut report = |n: u32, name: &str, started: Instant, outcome: Outcome| {
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail if n == 9 => "FAIL (optional)",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        if matches!(outcome.status, Status::Fail) && n != 9 {
            failed = true;
        }
        println!(
            "criterion {n:>2} {name:<28} {tag:<6} {} [{:.1}s]",
            outcome.detail,
            started.elapsed().as_secs_f64()
        );
    };

    let simple: [(u32, &str, fn() -> Outcome); 5] = [
        (1, "loss oracle", loss_oracle),
        (2, "gradient checks", gradient_checks),
        (3, "rotation invariance", ri_invariance),
        (4, "reference and decisions", reference_properties),
        (5, "metric oracles", metric_oracles),
    ];
    for (n, name, run) in simple {
        if wanted(n) {
            let t = Instant::now();
            report(n, name, t, run());
        }
    }

    if needs_training {
        let t = Instant::now();
        let first = pretrain(0);
        let seconds = t.elapsed().as_secs_f64();
        if wanted(6) {
            report(6, "synthetic end to end", t, synthetic_end_to_end(&first, seconds));
        }
        if wanted(7) || wanted(8) {
            let t = Instant::now();
            let mut models = vec![first];
            models.extend((1..SEEDS).map(pretrain));
            if wanted(7) {
                report(7, "projection head ablation", t, head_ablation(&models));
            }
            if wanted(8) {
                let t = Instant::now();
                report(8, "transfer learning direction", t, transfer_direction(&models));
            }
        }
    }
    if wanted(9) {
        let t = Instant::now();
        report(9, "full-scale reproduction", t, full_scale());
    }
    if wanted(10) {
        let t = Instant::now();
        report(10, "parameter accounting", t, parameter_accounting());
    }
    if failed {
        std::process::exit(1);
    }
}
