use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::info;
use lookalike_core::dataio::{
    self, load_embeddings, load_pairs, read_embeddings, write_embeddings, write_landmarks, write_pairs, DatasetManifest,
};
use lookalike_core::embed_adapter::{extract_batch, extract_landmarks_via_process, ExtractorSpec};
use lookalike_core::features::{build_feature_set, pair_feature};
use lookalike_core::metrics::{self, DetCurve, VULNERABILITY_FMRS};
use lookalike_core::morphgen::{self, MorphJob, MorphParams};
use lookalike_core::svm::{self, parse_model, write_model};
use lookalike_core::synth::{self, SynthConfig};
use lookalike_core::verify::{self, ScoreSet};
use lookalike_core::{Class, EmbeddingIndex, Error, FeatureConfig, PairLabel, Result, SvmConfig, TrialPair};
use rayon::prelude::*;

use crate::output::{config_digest, header_line, io_error, pct, Outputs};
use crate::{Cli, Command, DataArgs, EvaluateArgs, ExtractArgs, MorphArgs, ScoreArgs, StatsArgs, SynthArgs, TrainArgs};

pub const SCORE_HEADER: &str = "reference_id,probe_id,score";
pub const REPORT_HEADER: &str = "dataset,configuration,metric,operating_point,value";
/// Configuration column of report rows computed from comparison scores.
pub const SIMILARITY_CONFIGURATION: &str = "cosine";

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth_cmd(cli, a),
        Command::Morph(a) => morph_cmd(cli, a),
        Command::Train(a) => train_cmd(cli, a),
        Command::Score(a) => score_cmd(cli, a),
        Command::Evaluate(a) => evaluate_cmd(cli, a),
        Command::Stats(a) => stats_cmd(cli, a),
        Command::Extract(a) => extract_cmd(cli, a),
    }
}

fn outputs<'a>(cli: &'a Cli, subcommand: &str, canonical: &str) -> Outputs<'a> {
    Outputs {
        out_dir: &cli.out_dir,
        header: header_line(subcommand, cli.seed, canonical),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_index(paths: &[PathBuf], dim: Option<usize>) -> Result<EmbeddingIndex> {
    let mut all = Vec::new();
    let mut file_dim = dim;
    for p in paths {
        match file_dim {
            Some(d) => all.extend(load_embeddings(p, d)?),
            None => {
                let (d, e) = read_embeddings(p)?;
                file_dim = Some(d);
                all.extend(e);
            }
        }
    }
    EmbeddingIndex::new(all)
}

/// Embeddings and pairs, checked against each other.
fn load_data(data: &DataArgs, dim: Option<usize>) -> Result<(EmbeddingIndex, Vec<TrialPair>)> {
    if let Some(path) = &data.manifest {
        let mut m = DatasetManifest::load(path)?;
        if let Some(d) = dim {
            m.dim = d;
        }
        let ds = m.ingest()?;
        return Ok((ds.index, ds.pairs));
    }
    if data.embeddings.is_empty() || data.pairs.is_empty() {
        return Err(usage("give --manifest, or --embeddings and --pairs"));
    }
    let index = load_index(&data.embeddings, dim)?;
    let pairs = load_all_pairs(&data.pairs)?;
    dataio::check_pairs(&pairs, &index)?;
    Ok((index, pairs))
}

fn load_all_pairs(paths: &[PathBuf]) -> Result<Vec<TrialPair>> {
    let mut pairs = Vec::new();
    for p in paths {
        pairs.extend(load_pairs(p)?);
    }
    Ok(pairs)
}

fn synth_cmd(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: cli.seed,
        dim: cli.dim.unwrap_or(128),
        subjects: a.subjects,
        doppelganger_pairs: a.doppelganger_pairs,
        doppelganger_angle: a
            .doppelganger_angle
            .unwrap_or_else(|| synth::angle_for_mean_cosine(a.doppelganger_cosine, a.noise)),
        samples_per_subject: a.samples,
        noise: a.noise,
        train_subjects: a.train_subjects,
        train_morphs: a.train_morphs,
        morph_weight: a.morph_weight,
        nonmated_pairs: a.nonmated,
    };
    let data = synth::generate(&cfg)?;
    let out = outputs(cli, "synth", &format!("{cfg:?}"));
    let emb = out.path(None, "embeddings.emb");
    out.write(&emb, |w| write_embeddings(w, data.dim, &data.embeddings))?;
    out.write(&out.path(None, "train_pairs.csv"), |w| {
        write_pairs(w, &data.train_pairs)
    })?;
    out.write(&out.path(None, "test_pairs.csv"), |w| write_pairs(w, &data.test_pairs))?;
    for split in ["train", "test"] {
        out.write(&out.path(None, &format!("{split}.manifest")), |w| {
            writeln!(
                w,
                "embeddings=embeddings.emb\npairs={split}_pairs.csv\ndim={}",
                data.dim
            )
        })?;
    }
    let count = |ps: &[TrialPair], l| ps.iter().filter(|p| p.label == l).count();
    println!(
        "embeddings: {} (dim {}), doppelganger angle {:.4} rad",
        data.embeddings.len(),
        data.dim,
        cfg.doppelganger_angle
    );
    println!(
        "train pairs: {} mated, {} doppelganger",
        count(&data.train_pairs, PairLabel::Mated),
        count(&data.train_pairs, PairLabel::Doppelganger)
    );
    println!(
        "test pairs: {} mated, {} doppelganger, {} nonmated",
        count(&data.test_pairs, PairLabel::Mated),
        count(&data.test_pairs, PairLabel::Doppelganger),
        count(&data.test_pairs, PairLabel::Nonmated)
    );
    Ok(())
}

fn lmk_path(png: &Path) -> PathBuf {
    png.with_extension("lmk")
}

fn morph_cmd(cli: &Cli, a: &MorphArgs) -> Result<()> {
    let params = MorphParams {
        warp_weight: a.warp,
        blend_alpha: a.blend,
        feather_radius: a.feather,
    };
    params.validate()?;
    let canonical = format!("{params:?} include_source={}", a.include_source);
    let out = outputs(cli, "morph", &canonical);

    let mut rows = Vec::new();
    let mut first_error = None;
    if let Some(batch) = &a.batch {
        let jobs = morphgen::load_batch(batch)?;
        let mut n_ok = 0;
        for (i, (job, result)) in jobs.iter().zip(morphgen::run_batch(&jobs, &params)).enumerate() {
            let written = result.and_then(|r| {
                out.write(&lmk_path(&job.output_png), |w| {
                    write_landmarks(w, std::slice::from_ref(&r.landmarks))
                })?;
                Ok(r)
            });
            match written {
                Ok(r) => {
                    n_ok += 1;
                    rows.extend(morphgen::pair_rows(
                        &r,
                        &morphgen::image_id(&job.output_png),
                        a.include_source,
                    ));
                }
                Err(e) => {
                    eprintln!("row {}: {}: {e}", i + 1, job.output_png.display());
                    first_error.get_or_insert(e);
                }
            }
        }
        println!("morphed {} of {} rows", n_ok, jobs.len());
    } else {
        let need = |p: &Option<PathBuf>, flag: &str| p.clone().ok_or_else(|| usage(format!("missing --{flag}")));
        let job = MorphJob {
            target_png: need(&a.target, "target")?,
            target_lmk: need(&a.target_lmk, "target-lmk")?,
            source_png: need(&a.source, "source")?,
            source_lmk: need(&a.source_lmk, "source-lmk")?,
            output_png: need(&a.out, "out")?,
        };
        let r = morphgen::run_job(&job, &params)?;
        if let Some(path) = &a.emit_landmarks {
            out.write(path, |w| write_landmarks(w, std::slice::from_ref(&r.landmarks)))?;
        }
        println!(
            "morph of {} (target) and {} (source): warp {}, blend {}, feather {} px",
            r.provenance.target_id,
            r.provenance.source_id,
            r.provenance.warp_weight,
            r.provenance.blend_alpha,
            r.provenance.feather_radius
        );
        rows.extend(morphgen::pair_rows(
            &r,
            &morphgen::image_id(&job.output_png),
            a.include_source,
        ));
    }
    if let Some(path) = &a.pair_list {
        out.write(path, |w| write_pairs(w, &rows))?;
    }
    first_error.map_or(Ok(()), Err)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let (index, pairs) = load_data(&a.data, cli.dim)?;
    let fc = FeatureConfig {
        mode: a.mode,
        normalize: !a.raw,
        symmetrize: !a.no_symmetrize,
    };
    let features = build_feature_set(&pairs, &index, &fc)?;
    let n_dop = features.iter().filter(|f| f.label == Some(Class::Doppelganger)).count();
    let n_mated = features.len() - n_dop;
    if n_dop == 0 || n_mated == 0 {
        return Err(Error::Training(format!(
            "training needs mated and doppelganger pairs; got {n_mated} mated and {n_dop} doppelganger features"
        )));
    }
    let config = SvmConfig {
        c: a.c,
        gamma: a.gamma,
        tolerance: a.tolerance,
        max_passes: a.max_passes,
        seed: cli.seed,
        cache_bytes: a.cache_mb.saturating_mul(1 << 20),
        calibration_fraction: a.calibration_fraction,
    };
    let canonical = format!(
        "mode={} normalize={} symmetrize={} c={} gamma={} tolerance={} max_passes={} calibration_fraction={}",
        fc.mode,
        fc.normalize,
        fc.symmetrize,
        config.c,
        config.gamma,
        config.tolerance,
        config.max_passes,
        config.calibration_fraction
    );
    let model = svm::train_detector(&features, fc, &config)?;
    let out = outputs(cli, "train", &canonical);
    let path = out.path(a.model.as_ref(), "model.svm");
    out.write(&path, |w| write_model(w, &model))?;
    println!("features: {} ({n_mated} mated, {n_dop} doppelganger)", features.len());
    println!("support vectors: {}", model.n_support());
    println!("gamma: {}", model.gamma);
    println!("sigmoid: A={} B={}", model.calibration.a, model.calibration.b);
    println!("model: {}", path.display());
    Ok(())
}

fn score_cmd(cli: &Cli, a: &ScoreArgs) -> Result<()> {
    let model_text = read_text(&a.model)?;
    let model = parse_model(&model_text, &a.model.display().to_string())?;
    let (index, pairs) = load_data(&a.data, cli.dim)?;
    if index.dim() != model.dim {
        return Err(Error::Dimension {
            expected: model.dim,
            actual: index.dim(),
        });
    }
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let f = pair_feature(
                index.resolve(&p.reference_id)?,
                index.resolve(&p.probe_id)?,
                &model.feature_config,
            )?;
            model.score(&f.values)
        })
        .collect::<Result<_>>()?;
    let out = outputs(cli, "score", &format!("model={}", config_digest(&model_text)));
    let path = out.path(a.out.as_ref(), "scores.csv");
    out.write(&path, |w| {
        writeln!(w, "{SCORE_HEADER}")?;
        for (p, s) in pairs.iter().zip(&scores) {
            writeln!(w, "{},{},{s}", p.reference_id, p.probe_id)?;
        }
        Ok(())
    })?;
    println!("scored {} pairs: {}", scores.len(), path.display());
    Ok(())
}

/// Rows of a detector score file.
pub fn parse_scores(text: &str, origin: &str) -> Result<Vec<(String, String, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == SCORE_HEADER {
            continue;
        }
        let bad = |m: String| Error::Format {
            origin: origin.to_owned(),
            line: i + 1,
            message: m,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(format!("expected `{SCORE_HEADER}`")));
        }
        let s = f[2]
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite())
            .ok_or_else(|| bad(format!("invalid score `{}`", f[2])))?;
        rows.push((f[0].to_owned(), f[1].to_owned(), s));
    }
    Ok(rows)
}

/// Splits detector scores into (doppelganger, mated) by the pairs' labels.
/// Nonmated pairs are ignored.
pub fn label_scores(rows: &[(String, String, f64)], pairs: &[TrialPair]) -> Result<(Vec<f64>, Vec<f64>)> {
    let labels: HashMap<(&str, &str), PairLabel> = pairs
        .iter()
        .map(|p| ((p.reference_id.as_str(), p.probe_id.as_str()), p.label))
        .collect();
    let (mut attack, mut bonafide) = (Vec::new(), Vec::new());
    for (r, p, s) in rows {
        match labels.get(&(r.as_str(), p.as_str())) {
            Some(PairLabel::Doppelganger) => attack.push(*s),
            Some(PairLabel::Mated) => bonafide.push(*s),
            Some(PairLabel::Nonmated) => {}
            None => return Err(Error::Unresolved(format!("no label for scored pair {r},{p}"))),
        }
    }
    Ok((attack, bonafide))
}

/// Summary operating points and DET curve of detector scores.
pub struct DetectionReport {
    pub summary: metrics::DetectionSummary,
    pub curve: DetCurve,
}

pub fn detection_report(attack: &[f64], bonafide: &[f64], det_points: usize) -> Result<DetectionReport> {
    Ok(DetectionReport {
        summary: metrics::detection_summary(attack, bonafide)?,
        curve: metrics::det_curve(attack, bonafide, det_points)?,
    })
}

fn evaluate_cmd(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    if a.scores.is_none() && a.similarity.is_none() && a.data.embeddings.is_empty() && a.data.manifest.is_none() {
        return Err(usage(
            "nothing to evaluate: give --scores, --similarity, or embeddings to compare",
        ));
    }
    let manifest = a.data.manifest.as_ref().map(DatasetManifest::load).transpose()?;
    let pairs = match &manifest {
        Some(m) => load_all_pairs(&m.pairs)?,
        None => load_all_pairs(&a.data.pairs)?,
    };
    let embedding_files = manifest.as_ref().map_or(&a.data.embeddings, |m| &m.embeddings);
    let dim = cli.dim.or(manifest.as_ref().map(|m| m.dim));

    let canonical = format!(
        "dataset={} configuration={} scale={:?} det_points={}",
        a.dataset, a.configuration, a.scale, a.det_points
    );
    let out = outputs(cli, "evaluate", &canonical);
    let mut report = String::new();
    let (ds, cfg) = (&a.dataset, &a.configuration);
    let mut row = |config: &str, metric: &str, point: &str, value: f64| {
        let _ = writeln!(report, "{ds},{config},{metric},{point},{value}");
    };

    if let Some(path) = &a.scores {
        if pairs.is_empty() {
            return Err(usage("--scores needs --pairs (or --manifest) for the labels"));
        }
        let rows = parse_scores(&read_text(path)?, &path.display().to_string())?;
        let (attack, bonafide) = label_scores(&rows, &pairs)?;
        let det = detection_report(&attack, &bonafide, a.det_points)?;
        let s = &det.summary;
        row(cfg, "D-EER", "APCER=BPCER", s.d_eer.rate);
        row(cfg, "APCER", "APCER=BPCER", s.d_eer.point.apcer.value());
        row(cfg, "BPCER", "APCER=BPCER", s.d_eer.point.bpcer.value());
        row(cfg, "threshold", "APCER=BPCER", s.d_eer.point.threshold.value);
        for (name, b) in [("BPCER10", &s.bpcer10), ("BPCER20", &s.bpcer20)] {
            let point = &b.point.threshold.criterion;
            row(cfg, name, point, b.point.bpcer.value());
            row(cfg, "APCER", point, b.point.apcer.value());
            row(cfg, "threshold", point, b.point.threshold.value);
        }
        out.write(&out.path(None, "detection.csv"), |w| {
            writeln!(w, "dataset,configuration,D-EER,BPCER10,BPCER20")?;
            writeln!(
                w,
                "{ds},{cfg},{},{},{}",
                pct(s.d_eer.rate),
                pct(s.bpcer10.point.bpcer.value()),
                pct(s.bpcer20.point.bpcer.value())
            )
        })?;
        out.write(&out.path(None, "det.csv"), |w| det.curve.write_csv(w))?;
        out.write_plain(
            &out.path(None, "det.svg"),
            metrics::render_det_svg(&[(cfg.as_str(), &det.curve)]).as_bytes(),
        )?;
        println!(
            "{:<12} {:<16} {:>8} {:>8} {:>8}",
            "dataset", "configuration", "D-EER", "BPCER10", "BPCER20"
        );
        println!(
            "{:<12} {:<16} {:>8} {:>8} {:>8}",
            ds,
            cfg,
            pct(s.d_eer.rate),
            pct(s.bpcer10.point.bpcer.value()),
            pct(s.bpcer20.point.bpcer.value())
        );
    }

    let similarity = match &a.similarity {
        Some(path) => Some(ScoreSet::load_csv(path)?),
        None if !embedding_files.is_empty() => {
            let index = load_index(embedding_files, dim)?;
            dataio::check_pairs(&pairs, &index)?;
            Some(verify::score_pairs(&pairs, &index, a.scale)?)
        }
        None => None,
    };
    if let Some(set) = &similarity {
        let table = metrics::vulnerability_table(&set.mated, &set.nonmated, &set.attack, &VULNERABILITY_FMRS)?;
        for r in &table {
            let point = &r.threshold.threshold.criterion;
            row(SIMILARITY_CONFIGURATION, "FMR", point, r.threshold.achieved.value());
            row(SIMILARITY_CONFIGURATION, "FNMR", point, r.fnmr.value());
            if let Some(i) = r.iapmr {
                row(SIMILARITY_CONFIGURATION, "IAPMR", point, i.value());
            }
            row(
                SIMILARITY_CONFIGURATION,
                "threshold",
                point,
                r.threshold.threshold.value,
            );
        }
        out.write(&out.path(None, "vulnerability.csv"), |w| {
            writeln!(w, "dataset,target_FMR,threshold,achieved_FMR,FNMR,IAPMR,resolvable")?;
            for r in &table {
                writeln!(
                    w,
                    "{ds},{},{},{},{},{},{}",
                    100.0 * r.target_fmr,
                    r.threshold.threshold.value,
                    pct(r.threshold.achieved.value()),
                    pct(r.fnmr.value()),
                    r.iapmr.map_or_else(|| "NA".to_owned(), |i| pct(i.value())),
                    r.threshold.reachable
                )?;
            }
            Ok(())
        })?;
        out.write(&out.path(None, "stats.csv"), |w| verify::write_stats_csv(w, set))?;
        let curve = metrics::verification_det_curve(&set.mated, &set.nonmated, a.det_points)?;
        out.write(&out.path(None, "verification_det.csv"), |w| curve.write_csv(w))?;
        out.write_plain(
            &out.path(None, "verification_det.svg"),
            metrics::render_det_svg(&[(ds.as_str(), &curve)]).as_bytes(),
        )?;
        println!("{:<12} {:>10} {:>8} {:>8}", "FMR target", "FMR", "FNMR", "IAPMR");
        for r in &table {
            println!(
                "{:<12} {:>10} {:>8} {:>8}",
                format!("{}%", 100.0 * r.target_fmr),
                pct(r.threshold.achieved.value()),
                pct(r.fnmr.value()),
                r.iapmr.map_or_else(|| "NA".to_owned(), |i| pct(i.value()))
            );
        }
    }

    out.write(&out.path(None, "report.csv"), |w| {
        writeln!(w, "{REPORT_HEADER}")?;
        w.write_all(report.as_bytes())
    })?;
    info!("reports written to {}", cli.out_dir.display());
    Ok(())
}

fn stats_cmd(cli: &Cli, a: &StatsArgs) -> Result<()> {
    let (index, pairs) = load_data(&a.data, cli.dim)?;
    let set = verify::score_pairs(&pairs, &index, a.scale)?;
    let out = outputs(cli, "stats", &format!("scale={:?}", a.scale));
    out.write(&out.path(None, "similarity.csv"), |w| set.write_csv(w))?;
    let mut table = Vec::new();
    verify::write_stats_csv(&mut table, &set).map_err(|e| io_error(Path::new("stats.csv"), e))?;
    out.write(&out.path(None, "stats.csv"), |w| w.write_all(&table))?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}

fn extract_cmd(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let timeout = Duration::from_secs(a.timeout_secs);
    let canonical = format!(
        "command={} landmarks={} timeout={}",
        a.command, a.landmarks, a.timeout_secs
    );
    let out = outputs(cli, "extract", &canonical);
    if a.landmarks {
        let spec = ExtractorSpec::new(&a.command, a.count, timeout)?;
        let sets = a
            .images
            .iter()
            .map(|p| extract_landmarks_via_process(&spec, p))
            .collect::<Result<Vec<_>>>()?;
        out.write(&a.output, |w| write_landmarks(w, &sets))?;
        println!("extracted landmarks for {} images", sets.len());
    } else {
        let dim = cli.dim.unwrap_or(dataio::DEFAULT_EMBEDDING_DIM);
        let spec = ExtractorSpec::new(&a.command, dim, timeout)?;
        let embeddings = extract_batch(&spec, &a.images, a.max_processes)?
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        out.write(&a.output, |w| write_embeddings(w, dim, &embeddings))?;
        println!("extracted {} embeddings of dimension {dim}", embeddings.len());
    }
    Ok(())
}
