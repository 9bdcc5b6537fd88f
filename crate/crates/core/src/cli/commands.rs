//! Command bodies. Each writes into `<out_dir>/<command>-<config hash>/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::Value;

use super::config::{config_hash, sha256_hex, RunConfig, TOOL_VERSION};
use super::ingest::{ingest, write_cohort_csv, Ingested};
use crate::encode::{Group, Instrument};
use crate::error::{Error, Result};
use crate::forest::{Mode, TreeEnsemble};
use crate::sigcore::stream_signature;
use crate::spectrum::{emit_plot, kde2d, simplex_project, PlotSpec, SimplexPoint};
use crate::synth::generate_cohort;
use crate::tasks::{run_classification, run_rollout, run_score_prediction, run_state_prediction, Exclusion};

/// Column header of spectrum-input CSVs, before the three component names.
pub const SPECTRUM_HEADER: [&str; 3] = ["participant_id", "group", "series"];

/// An open run directory and the provenance stamped into its files.
pub struct Run {
    pub dir: PathBuf,
    pub hash: String,
}

impl Run {
    fn create(out_dir: &Path, command: &str, settings: &impl Serialize, input_sha256: Option<&str>) -> Result<Self> {
        let hash = config_hash(command, settings, input_sha256)?;
        let dir = out_dir.join(format!("{command}-{hash}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let run = Run { dir, hash };
        let config = serde_json::json!({
            "command": command,
            "settings": settings,
            "input_sha256": input_sha256,
        });
        run.write_json("config.json", &config)?;
        info!("run directory {}", run.dir.display());
        Ok(run)
    }

    fn comments(&self) -> Vec<String> {
        vec![format!("config_hash: {}", self.hash), format!("tool_version: {TOOL_VERSION}")]
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Pretty JSON of `body` with `config_hash` and `tool_version` added at
    /// the top level.
    fn write_json(&self, name: &str, body: &impl Serialize) -> Result<()> {
        let mut doc = match serde_json::to_value(body)? {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        doc.insert("config_hash".into(), Value::String(self.hash.clone()));
        doc.insert("tool_version".into(), Value::String(TOOL_VERSION.into()));
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn write_model(&self, name: &str, model: &TreeEnsemble) -> Result<()> {
        let doc: Value = serde_json::from_str(&model.to_json()?)?;
        self.write_json(name, &doc)
    }

    fn write_spectrum_csv(&self, name: &str, components: [&str; 3], rows: &[SpectrumRow]) -> Result<()> {
        let mut out = Vec::new();
        for c in self.comments() {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SPECTRUM_HEADER.iter().chain(&components))?;
        for r in rows {
            w.write_record([
                r.participant_id.clone(),
                r.group.to_string(),
                r.series.clone(),
                r.probs[0].to_string(),
                r.probs[1].to_string(),
                r.probs[2].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }
}

/// One row of a spectrum-input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub participant_id: String,
    pub group: Group,
    pub series: String,
    pub probs: [f64; 3],
}

fn load_cohort(config: &RunConfig) -> Result<(Ingested, String)> {
    let path = config.require_input()?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let sha = sha256_hex(&bytes);
    let ingested = ingest(path)?;
    info!(
        "ingested {} participants from {} ({} excluded)",
        ingested.cohort.len(),
        path.display(),
        ingested.exclusions.len()
    );
    Ok((ingested, sha))
}

fn merged(mut ingest: Vec<Exclusion>, task: &[Exclusion]) -> Vec<Exclusion> {
    ingest.extend_from_slice(task);
    ingest
}

pub fn synth(config: &RunConfig) -> Result<Run> {
    let spec = config.synth.to_spec(config.seed);
    let run = Run::create(&config.out_dir, "synth", &spec, None)?;
    let cohort = generate_cohort(&spec)?;
    write_cohort_csv(&cohort, &run.path("cohort.csv"), &run.comments())?;
    info!("wrote {} participants", cohort.len());
    Ok(run)
}

#[derive(Serialize)]
struct ClassificationFile<'a> {
    test_predictions: &'a [crate::tasks::TestPrediction],
    exclusions: Vec<Exclusion>,
}

pub fn classify(config: &RunConfig) -> Result<Run> {
    let task = config.classify_config();
    task.validate()?;
    let (ingested, sha) = load_cohort(config)?;
    let run = Run::create(&config.out_dir, "classify", &task, Some(&sha))?;
    let outcome = run_classification(&ingested.cohort, &task)?;
    run.write_json("report_mrsf.json", &outcome.mrsf)?;
    run.write_json("report_naive.json", &outcome.naive)?;
    run.write_json(
        "classification.json",
        &ClassificationFile {
            test_predictions: &outcome.test_predictions,
            exclusions: merged(ingested.exclusions, &outcome.exclusions),
        },
    )?;
    if let Some((m, n)) = &outcome.models {
        run.write_model("model_mrsf.json", m)?;
        run.write_model("model_naive.json", n)?;
    }
    if !outcome.leave_one_out.is_empty() {
        let rows: Vec<SpectrumRow> = outcome
            .leave_one_out
            .iter()
            .map(|p| SpectrumRow {
                participant_id: p.participant_id.clone(),
                group: p.group,
                series: "loo".into(),
                probs: p.probs,
            })
            .collect();
        let names = Group::ALL.map(Group::as_str);
        run.write_spectrum_csv("loo_spectrum.csv", names, &rows)?;
    }
    Ok(run)
}

fn cell_model_name(kind: &str, group: Group, instrument: Instrument, map: &str) -> String {
    format!("model_{kind}_{group}_{instrument}_{map}.json")
}

pub fn predict_state(config: &RunConfig) -> Result<Run> {
    let task = config.state_config();
    task.validate()?;
    let (ingested, sha) = load_cohort(config)?;
    let run = Run::create(&config.out_dir, "predict-state", &task, Some(&sha))?;
    let outcome = run_state_prediction(&ingested.cohort, &task)?;
    for cell in &outcome.cells {
        if let Some((m, n)) = &cell.models {
            run.write_model(&cell_model_name("state", cell.group, cell.instrument, "mrsf"), m)?;
            run.write_model(&cell_model_name("state", cell.group, cell.instrument, "naive"), n)?;
        }
    }
    let exclusions = merged(ingested.exclusions.clone(), &outcome.exclusions);
    run.write_json(
        "state_report.json",
        &serde_json::json!({ "cells": outcome.cells, "exclusions": exclusions }),
    )?;
    if task.rollout_horizon > 0 {
        let rollout = run_rollout(&ingested.cohort, &task)?;
        let mut rows = Vec::with_capacity(2 * rollout.entries.len());
        for e in &rollout.entries {
            for (series, probs) in [("true", e.true_proportions), ("predicted", e.predicted)] {
                rows.push(SpectrumRow {
                    participant_id: e.participant_id.clone(),
                    group: e.group,
                    series: format!("{series}_{}", e.instrument),
                    probs,
                });
            }
        }
        run.write_json("rollout.json", &rollout)?;
        run.write_spectrum_csv("rollout_spectrum.csv", ["no_answer", "normal", "elevated"], &rows)?;
    }
    Ok(run)
}

pub fn predict_score(config: &RunConfig) -> Result<Run> {
    let task = config.score_config();
    task.validate()?;
    let (ingested, sha) = load_cohort(config)?;
    let run = Run::create(&config.out_dir, "predict-score", &task, Some(&sha))?;
    let outcome = run_score_prediction(&ingested.cohort, &task)?;
    for cell in &outcome.cells {
        if let Some((m, n)) = &cell.models {
            run.write_model(&cell_model_name("score", cell.group, cell.instrument, "mrsf"), m)?;
            run.write_model(&cell_model_name("score", cell.group, cell.instrument, "naive"), n)?;
        }
    }
    let exclusions = merged(ingested.exclusions, &outcome.exclusions);
    run.write_json(
        "score_report.json",
        &serde_json::json!({ "cells": outcome.cells, "exclusions": exclusions }),
    )?;
    Ok(run)
}

/// Reads a spectrum-input CSV; returns the three component names and rows.
pub fn read_spectrum_csv(path: &Path) -> Result<([String; 3], Vec<SpectrumRow>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if header.len() != 6 || header.iter().take(3).ne(SPECTRUM_HEADER) {
        return Err(parse_err(
            1,
            format!("header must be {},<c1>,<c2>,<c3>", SPECTRUM_HEADER.join(",")),
        ));
    }
    let names = [header[3].to_string(), header[4].to_string(), header[5].to_string()];
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let group = record[1]
            .parse::<Group>()
            .map_err(|_| parse_err(line, format!("unknown group {:?}", &record[1])))?;
        let mut probs = [0.0; 3];
        for (k, p) in probs.iter_mut().enumerate() {
            *p = record[3 + k]
                .parse()
                .map_err(|_| parse_err(line, format!("{:?} is not a number", &record[3 + k])))?;
        }
        rows.push(SpectrumRow {
            participant_id: record[0].to_string(),
            group,
            series: record[2].to_string(),
            probs,
        });
    }
    Ok((names, rows))
}

pub fn spectrum(config: &RunConfig) -> Result<Run> {
    let path = config.require_input()?;
    let sha = sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?);
    let (names, rows) = read_spectrum_csv(path)?;

    let mut panels: BTreeMap<(String, usize), Vec<SimplexPoint>> = BTreeMap::new();
    for r in &rows {
        let point = simplex_project(r.probs)
            .map_err(|e| Error::invalid(format!("participant {} ({}): {e}", r.participant_id, r.series)))?;
        panels.entry((r.series.clone(), r.group.index())).or_default().push(point);
    }
    if panels.is_empty() {
        return Err(Error::insufficient(format!("{} has no rows", path.display())));
    }
    let mut grids = Vec::with_capacity(panels.len());
    for ((series, g), points) in &panels {
        let group = Group::from_index(*g).expect("stored from a group");
        let grid = kde2d(points, None, config.spectrum.bandwidth, config.spectrum.resolution)
            .map_err(|e| Error::insufficient(format!("series {series}, group {group}: {e}")))?;
        grids.push((series, group, points, grid));
    }
    let run = Run::create(&config.out_dir, "spectrum", &config.spectrum, Some(&sha))?;
    for (series, group, points, grid) in grids {
        let spec = PlotSpec {
            title: format!("{series}: {group} (n = {})", points.len()),
            vertex_labels: names.clone(),
            comments: run.comments(),
        };
        let files = emit_plot(&grid, points, &spec, &run.path(&format!("{series}-{group}")))?;
        info!("wrote {}", files.svg.display());
    }
    Ok(run)
}

/// Flattened signature of the stream in a headed CSV of numeric columns.
pub fn sig(path: &Path, level: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut points: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("{v:?} is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(row);
    }
    Ok(stream_signature(&points, level)?.to_flat())
}

/// Human-readable summary of a saved forest.
pub fn model_info(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model = TreeEnsemble::from_json(&text)?;
    let extra: Value = serde_json::from_str(&text)?;
    let mode = match model.mode() {
        Mode::Classify { n_classes } => format!("classification, {n_classes} classes"),
        Mode::Regress => "regression".into(),
    };
    let nodes: usize = model.trees().iter().map(|t| t.nodes().len()).sum();
    let depth = model.trees().iter().map(|t| t.depth()).max().unwrap_or(0);
    let mut out = format!(
        "mode: {mode}\nfeatures: {}\ntrees: {}\nnodes: {nodes}\nmax depth: {depth}\nseed: {}\nparams: {}\n",
        model.feature_count(),
        model.trees().len(),
        model.seed(),
        serde_json::to_string(model.params())?,
    );
    for key in ["config_hash", "tool_version"] {
        if let Some(Value::String(v)) = extra.get(key) {
            out.push_str(&format!("{key}: {v}\n"));
        }
    }
    Ok(out)
}
