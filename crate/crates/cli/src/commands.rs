use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bev_core::dataset::{read_dataset, read_lenient_path, write_dataset, write_predictions, Dataset, DatasetHeader};
use bev_core::datagen::{SceneConfig, SceneGenerator};
use bev_core::eval::{emit_report, evaluate, BucketEdges, MetricReport, ModelMetrics};
use bev_core::filter::filter_dataset;
use bev_core::geometry::Homography;
use bev_core::gridmap::{fit_grid, GridSpec};
use bev_core::models::{train_network, FeatureProvider, ModelKind};
use bev_core::pipeline::{ModelArtifact, PredictOptions};
use bev_core::{BBox, Error};

use crate::config::RunConfig;
use crate::{Cli, Command, CompareArgs, EvalArgs, FilterArgs, FitArgs, FitKind, GenerateArgs, NetKind, PredictArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref()).map_err(usage)?;
    cfg.apply_seed(cli.seed);
    let out = cli.out;
    match cli.command {
        Command::Generate(a) => generate(&mut cfg, &out, a),
        Command::Filter(a) => filter(&mut cfg, &out, a),
        Command::Train(a) => train(&mut cfg, &out, a),
        Command::Fit(a) => fit(&mut cfg, &out, a),
        Command::Predict(a) => predict(&mut cfg, &out, a),
        Command::Eval(a) => eval(&mut cfg, &out, a),
        Command::Compare(a) => compare(&mut cfg, &out, a),
    }
}

fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let path = out.join("effective_config.toml");
    let text = cfg.to_toml().map_err(usage)?;
    fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn generate(cfg: &mut RunConfig, out: &Path, a: GenerateArgs) -> Result<()> {
    if a.benchmark {
        cfg.scene = SceneConfig::benchmark(cfg.seed);
    }
    if let Some(j) = a.jitter_px {
        cfg.scene.noise.jitter_px = j;
    }
    if let Some(p) = a.absurd_prob {
        cfg.scene.noise.absurd_size_prob = p;
    }
    if a.frames == 0 {
        return Err(usage("--frames must be positive"));
    }
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(usage("--test-fraction must be in [0, 1)"));
    }
    let generator = SceneGenerator::new(cfg.scene.clone())?;
    prepare_out(out, cfg)?;

    let header = DatasetHeader {
        frontal_dims: cfg.scene.frontal_camera.dims,
        birdeye_dims: cfg.scene.birdeye_camera.dims,
    };
    let n_test = (a.frames as f64 * a.test_fraction).round() as u64;
    let n_train = a.frames - n_test;
    let collect = |range: std::ops::Range<u64>| Dataset {
        header,
        records: range.flat_map(|i| generator.frame(i).records).collect(),
    };
    if n_test == 0 {
        let data = collect(0..a.frames);
        write_dataset(&out.join("dataset.jsonl"), &data)?;
        eprintln!("{} records from {} frames", data.records.len(), a.frames);
    } else {
        let train = collect(0..n_train);
        let test = collect(n_train..a.frames);
        write_dataset(&out.join("train.jsonl"), &train)?;
        write_dataset(&out.join("test.jsonl"), &test)?;
        eprintln!("{} train / {} test records", train.records.len(), test.records.len());
    }
    Ok(())
}

fn filter(cfg: &mut RunConfig, out: &Path, a: FilterArgs) -> Result<()> {
    let parsed = read_lenient_path(&a.input)?;
    for e in &parsed.errors {
        eprintln!("{}:{}: {}", a.input.display(), e.line, e.message);
    }
    // Containment is checked against the frames the dataset declares.
    cfg.rules.frontal_dims = parsed.header.frontal_dims;
    cfg.rules.birdeye_dims = parsed.header.birdeye_dims;
    cfg.rules.validate()?;
    prepare_out(out, cfg)?;

    let header = parsed.header;
    let total = parsed.records.len();
    let mut outcome = filter_dataset(parsed.records, &cfg.rules);
    outcome.report.parse_errors = parsed.errors;
    let output = a.output.unwrap_or_else(|| out.join("filtered.jsonl"));
    write_dataset(
        &output,
        &Dataset {
            header,
            records: outcome.kept,
        },
    )?;
    let report_path = out.join("rejections.csv");
    let file = fs::File::create(&report_path).map_err(|e| Error::io(&report_path, e))?;
    outcome
        .report
        .write_csv(BufWriter::new(file))
        .map_err(|e| Error::io(&report_path, e))?;
    eprintln!(
        "kept {} of {} records; {} rejected",
        total - outcome.report.total_rejected(),
        total,
        outcome.report.total_rejected()
    );
    match outcome.report.parse_errors.len() {
        0 => Ok(()),
        n => Err(CliError::Data(format!("{n} malformed lines were skipped"))),
    }
}

fn feature_provider(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<Option<FeatureProvider>> {
    match flag.or_else(|| cfg.features.file.clone()) {
        Some(path) => Ok(Some(FeatureProvider::from_file(&path)?)),
        None => Ok(None),
    }
}

fn train(cfg: &mut RunConfig, out: &Path, a: TrainArgs) -> Result<()> {
    let h = &mut cfg.hyper;
    h.max_epochs = a.epochs.unwrap_or(h.max_epochs);
    h.batch_size = a.batch_size.unwrap_or(h.batch_size);
    h.lr = a.lr.unwrap_or(h.lr);
    h.lr_decay = a.lr_decay.unwrap_or(h.lr_decay);
    h.patience = a.patience.unwrap_or(h.patience);
    h.validate()?;
    if let Some(d) = a.feature_dim {
        cfg.features.dim = d;
    }
    if a.features.is_some() {
        cfg.features.file = a.features.clone();
    }
    if !(0.0..1.0).contains(&a.val_fraction) {
        return Err(usage("--val-fraction must be in [0, 1)"));
    }
    let features = match feature_provider(cfg, None)? {
        Some(p) => p,
        None => FeatureProvider::Synthetic {
            seed: cfg.seed,
            dim: cfg.features.dim,
            perturbation: cfg.features.perturbation,
        },
    };
    cfg.features.dim = features.dim();

    let data = read_dataset(&a.train)?;
    let (train_recs, val_recs) = match &a.val {
        Some(path) => (data.records.clone(), read_dataset(path)?.records),
        None => {
            let n_val = (data.records.len() as f64 * a.val_fraction).round() as usize;
            let (t, v) = data.records.split_at(data.records.len() - n_val);
            (t.to_vec(), v.to_vec())
        }
    };
    prepare_out(out, cfg)?;

    let kind = match a.kind {
        NetKind::Mlp => ModelKind::Mlp,
        NetKind::Sdpn => ModelKind::Sdpn,
    };
    let (model, history) = train_network(
        kind,
        &train_recs,
        &val_recs,
        &data.header,
        &features,
        &cfg.hyper,
        |e| eprintln!("epoch {:>3}  train {:.6}  val {:.6}", e.epoch, e.train_loss, e.val_loss),
    )?;
    model.save(&out.join(format!("{}.bin", kind.name())))?;
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for e in &history {
        csv.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    let path = out.join(format!("{}_loss.csv", kind.name()));
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn fit(cfg: &mut RunConfig, out: &Path, a: FitArgs) -> Result<()> {
    if let Some(c) = a.cell_px {
        cfg.grid.cell_px = c;
    }
    let data = read_dataset(&a.train)?;
    let spec = GridSpec::new(cfg.grid.cell_px, data.header.frontal_dims, data.header.birdeye_dims)?;
    prepare_out(out, cfg)?;
    match a.kind {
        FitKind::Homography => {
            let model = Homography::fit(&data.records)?;
            model.save(&out.join("homography.json"))?;
        }
        FitKind::Grid => {
            let (model, report) = fit_grid(&data.records, spec)?;
            model.save(&out.join("grid.csv"))?;
            eprintln!("grid fitted on {} records, {} skipped", report.used, report.skipped);
        }
    }
    Ok(())
}

fn predict(cfg: &mut RunConfig, out: &Path, a: PredictArgs) -> Result<()> {
    let model = ModelArtifact::load(&a.model)?;
    let data = read_dataset(&a.input)?;
    let features = feature_provider(cfg, a.features)?;
    prepare_out(out, cfg)?;
    let opts = PredictOptions {
        features: features.as_ref(),
        grid_sample_seed: a.grid_sample_seed,
    };
    let preds = model.predict(&data.records, &opts)?;
    let failed = report_failures(&data.records, &preds);
    let kept: Vec<Option<BBox>> = preds.into_iter().map(|p| p.ok()).collect();
    let output = a.output.unwrap_or_else(|| out.join("predictions.jsonl"));
    write_predictions(&output, &data.header, &data.records, &kept)?;
    eprintln!("{} predictions, {failed} failed", kept.len() - failed);
    Ok(())
}

fn report_failures(records: &[bev_core::DetectionRecord], preds: &[bev_core::Result<BBox>]) -> usize {
    const SHOWN: usize = 5;
    let failures: Vec<_> = records.iter().zip(preds).filter_map(|(r, p)| p.as_ref().err().map(|e| (r, e))).collect();
    for (r, e) in failures.iter().take(SHOWN) {
        eprintln!("{}: {e}", r.key());
    }
    if failures.len() > SHOWN {
        eprintln!("... and {} more", failures.len() - SHOWN);
    }
    failures.len()
}

fn bucket_edges(cfg: &mut RunConfig, flag: Option<Vec<f64>>) -> Result<BucketEdges> {
    if let Some(edges) = flag {
        cfg.eval.bucket_edges = edges;
    }
    Ok(BucketEdges::new(cfg.eval.bucket_edges.clone())?)
}

fn print_metrics(m: &ModelMetrics) {
    eprintln!(
        "{:<12} n={:<6} skipped={:<4} IoU {:.4}  CD {:.2}  hE {:.4}  wE {:.4}  arE {:.4}",
        m.model, m.count, m.skipped, m.iou, m.cd, m.h_err, m.w_err, m.ar_err
    );
}

fn eval(cfg: &mut RunConfig, out: &Path, a: EvalArgs) -> Result<()> {
    let edges = bucket_edges(cfg, a.bucket_edges)?;
    let metrics = if let Some(path) = &a.predictions {
        let parsed = read_lenient_path(path)?;
        if let Some(e) = parsed.errors.first() {
            return Err(CliError::Data(format!("{}:{}: {}", path.display(), e.line, e.message)));
        }
        prepare_out(out, cfg)?;
        let preds: Vec<bev_core::Result<BBox>> = parsed
            .predictions
            .iter()
            .map(|p| p.ok_or_else(|| Error::Model("no predicted_birdeye_box".into())))
            .collect();
        let name = a.name.clone().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "predictions".into())
        });
        evaluate(&name, &parsed.records, &preds, &edges)?
    } else {
        let model_path = a.model.as_ref().ok_or_else(|| usage("--predictions or --model is required"))?;
        let input = a.input.as_ref().ok_or_else(|| usage("--model needs --input"))?;
        let model = ModelArtifact::load(model_path)?;
        let data = read_dataset(input)?;
        let features = feature_provider(cfg, a.features.clone())?;
        prepare_out(out, cfg)?;
        let opts = PredictOptions {
            features: features.as_ref(),
            grid_sample_seed: a.grid_sample_seed,
        };
        let preds = model.predict(&data.records, &opts)?;
        report_failures(&data.records, &preds);
        evaluate(a.name.as_deref().unwrap_or(model.name()), &data.records, &preds, &edges)?
    };
    print_metrics(&metrics);
    emit_report(
        &MetricReport {
            edges,
            models: vec![metrics],
        },
        out,
    )?;
    Ok(())
}

fn compare(cfg: &mut RunConfig, out: &Path, a: CompareArgs) -> Result<()> {
    let edges = bucket_edges(cfg, a.bucket_edges)?;
    let data = read_dataset(&a.input)?;
    let features = feature_provider(cfg, a.features)?;
    let models = a
        .models
        .iter()
        .map(|p| ModelArtifact::load(p).map(|m| (p, m)))
        .collect::<bev_core::Result<Vec<_>>>()?;
    prepare_out(out, cfg)?;
    let opts = PredictOptions {
        features: features.as_ref(),
        grid_sample_seed: a.grid_sample_seed,
    };
    let mut report = MetricReport {
        edges,
        models: Vec::new(),
    };
    for (path, model) in &models {
        let preds = model.predict(&data.records, &opts)?;
        report_failures(&data.records, &preds);
        let mut name = model.name().to_string();
        if report.get(&name).is_some() {
            name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name);
        }
        let m = evaluate(&name, &data.records, &preds, &report.edges)?;
        print_metrics(&m);
        report.models.push(m);
    }
    emit_report(&report, out)?;
    Ok(())
}
