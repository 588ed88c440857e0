//! File formats: edge, event, dataset and summary CSVs, JSON-lines traces and
//! TOML scenario files.
//!
//! Cluster labels are 1-based in every file and 0-based in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Dataset, EdgeSummary};
use crate::error::{Error, Result};
use crate::geometry::{Edge, EdgeId, EventPattern, LinearNetwork, Point2};
use crate::gibbs::{Trace, TraceRecord};
use crate::model::Partition;
use crate::posterior::{GroupCountPosterior, HotspotSelection, PartitionEstimate};
use crate::synth::{GroundTruth, Scenario};

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    edge_id: EdgeId,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_id: Option<EdgeId>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    edge_id: EdgeId,
    count: u64,
    cx: f64,
    cy: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn expect_headers<R: Read>(
    rdr: &mut csv::Reader<R>,
    required: &[&str],
    optional: &[&str],
) -> Result<()> {
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let ok = names.len() >= required.len()
        && names[..required.len()] == *required
        && names[required.len()..].iter().all(|n| optional.contains(n));
    if ok {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "expected CSV header `{}`, found `{}`",
            required.join(","),
            names.join(",")
        )))
    }
}

pub fn read_edges<R: Read>(reader: R) -> Result<LinearNetwork> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    expect_headers(&mut rdr, &["edge_id", "x1", "y1", "x2", "y2"], &[])?;
    let edges = rdr
        .deserialize::<EdgeRow>()
        .map(|row| {
            let r = row?;
            Edge::new(r.edge_id, Point2::new(r.x1, r.y1), Point2::new(r.x2, r.y2))
        })
        .collect::<Result<Vec<_>>>()?;
    LinearNetwork::new(edges)
}

pub fn read_edges_file(path: &Path) -> Result<LinearNetwork> {
    read_edges(open(path)?)
}

pub fn write_edges<W: Write>(writer: W, network: &LinearNetwork) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in network.edges() {
        w.serialize(EdgeRow {
            edge_id: e.id,
            x1: e.a.x,
            y1: e.a.y,
            x2: e.b.x,
            y2: e.b.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges_file(path: &Path, network: &LinearNetwork) -> Result<()> {
    write_edges(create(path)?, network)
}

/// Reads `x,y` rows, or `x,y,edge_id` rows whose assignments bypass snapping.
pub fn read_events<R: Read>(reader: R) -> Result<EventPattern> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    expect_headers(&mut rdr, &["x", "y"], &["edge_id"])?;
    let assigned = rdr.headers()?.len() == 3;
    let mut events = Vec::new();
    let mut ids = Vec::new();
    for (i, row) in rdr.deserialize::<EventRow>().enumerate() {
        let r = row?;
        events.push(Point2::new(r.x, r.y));
        match (assigned, r.edge_id) {
            (true, Some(id)) => ids.push(id),
            (true, None) => return Err(Error::Usage(format!("event {i} has no edge_id"))),
            _ => {}
        }
    }
    if assigned {
        EventPattern::with_assignments(events, ids)
    } else {
        Ok(EventPattern::new(events))
    }
}

pub fn read_events_file(path: &Path) -> Result<EventPattern> {
    read_events(open(path)?)
}

pub fn write_events<W: Write>(writer: W, events: &EventPattern) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, p) in events.events.iter().enumerate() {
        let edge_id = events.assignments.as_ref().map(|a| a[i]);
        w.serialize(EventRow {
            x: p.x,
            y: p.y,
            edge_id,
        })?;
    }
    if events.is_empty() {
        let header: &[&str] = if events.assignments.is_some() {
            &["x", "y", "edge_id"]
        } else {
            &["x", "y"]
        };
        w.write_record(header)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_file(path: &Path, events: &EventPattern) -> Result<()> {
    write_events(create(path)?, events)
}

pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in dataset.summaries() {
        w.serialize(DatasetRow {
            edge_id: s.edge_id,
            count: s.count,
            cx: s.centroid.x,
            cy: s.centroid.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(path: &Path, dataset: &Dataset) -> Result<()> {
    write_dataset(create(path)?, dataset)
}

pub fn read_dataset_summaries<R: Read>(reader: R) -> Result<Vec<EdgeSummary>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    expect_headers(&mut rdr, &["edge_id", "count", "cx", "cy"], &[])?;
    rdr.deserialize::<DatasetRow>()
        .map(|row| {
            let r = row?;
            Ok(EdgeSummary {
                edge_id: r.edge_id,
                count: r.count,
                centroid: Point2::new(r.cx, r.cy),
            })
        })
        .collect()
}

pub fn read_dataset_summaries_file(path: &Path) -> Result<Vec<EdgeSummary>> {
    read_dataset_summaries(open(path)?)
}

pub fn write_ground_truth_file(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["edge_id", "cluster"])?;
    for &(id, j) in &truth.labels {
        w.write_record([id.to_string(), (j + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth_file(path: &Path) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    expect_headers(&mut rdr, &["edge_id", "cluster"], &[])?;
    let labels = rdr
        .deserialize::<(EdgeId, usize)>()
        .map(|row| {
            let (id, c) = row?;
            if c == 0 {
                return Err(Error::Usage("cluster labels are 1-based".into()));
            }
            Ok((id, c - 1))
        })
        .collect::<Result<_>>()?;
    Ok(GroundTruth { labels })
}

/// One line of a trace file.
#[derive(Debug, Serialize, Deserialize)]
struct TraceLine {
    iter: usize,
    d: Vec<usize>,
    lambda: Vec<f64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
    theta: f64,
    tau: f64,
}

impl From<&TraceRecord> for TraceLine {
    fn from(r: &TraceRecord) -> Self {
        TraceLine {
            iter: r.iter,
            d: r.partition.labels().iter().map(|l| l + 1).collect(),
            lambda: r.lambdas.clone(),
            ux: r.locations.iter().map(|u| u.x).collect(),
            uy: r.locations.iter().map(|u| u.y).collect(),
            theta: r.theta,
            tau: r.tau,
        }
    }
}

impl TryFrom<TraceLine> for TraceRecord {
    type Error = Error;

    fn try_from(line: TraceLine) -> Result<Self> {
        let k = line.lambda.len();
        if line.ux.len() != k || line.uy.len() != k {
            return Err(Error::Usage(format!(
                "trace record {} has ragged cluster arrays",
                line.iter
            )));
        }
        if line.d.iter().any(|&l| l == 0 || l > k) {
            return Err(Error::Usage(format!(
                "trace record {} has labels outside 1..={k}",
                line.iter
            )));
        }
        let raw: Vec<usize> = line.d.iter().map(|l| l - 1).collect();
        let (partition, original) = Partition::canonicalize(&raw);
        if partition.k() != k {
            return Err(Error::Usage(format!(
                "trace record {} has empty clusters",
                line.iter
            )));
        }
        Ok(TraceRecord {
            iter: line.iter,
            partition,
            lambdas: original.iter().map(|&j| line.lambda[j]).collect(),
            locations: original
                .iter()
                .map(|&j| Point2::new(line.ux[j], line.uy[j]))
                .collect(),
            theta: line.theta,
            tau: line.tau,
        })
    }
}

pub fn write_trace<W: Write>(mut writer: W, trace: &Trace) -> Result<()> {
    for r in &trace.records {
        serde_json::to_writer(&mut writer, &TraceLine::from(r))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &Trace) -> Result<()> {
    write_trace(create(path)?, trace)
}

pub fn read_trace<R: Read>(reader: R) -> Result<Trace> {
    let mut records = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line)?;
        records.push(parsed.try_into()?);
    }
    Ok(Trace { records })
}

pub fn read_trace_file(path: &Path) -> Result<Trace> {
    read_trace(open(path)?)
}

pub fn read_scenario_str(text: &str) -> Result<Scenario> {
    Ok(toml::from_str(text)?)
}

pub fn read_scenario_file(path: &Path) -> Result<Scenario> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    read_scenario_str(&text)
}

/// `edge_id,cluster,lambda_bar` for every item of the modal partition.
pub fn write_modal_partition_file(
    path: &Path,
    summaries: &[EdgeSummary],
    est: &PartitionEstimate,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["edge_id", "cluster", "lambda_bar"])?;
    for (s, &j) in summaries.iter().zip(est.partition.labels()) {
        w.write_record([
            s.edge_id.to_string(),
            (j + 1).to_string(),
            est.mean_intensity[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `cluster,sample,lambda` in long format, one row per retained intensity draw.
pub fn write_lambda_samples_file(path: &Path, est: &PartitionEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["cluster", "sample", "lambda"])?;
    for (j, samples) in est.lambda_samples.iter().enumerate() {
        for (l, v) in samples.iter().enumerate() {
            w.write_record([(j + 1).to_string(), (l + 1).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `edge_id,cluster,lambda_bar,selected` for one resolution threshold.
pub fn write_hotspots_file(
    path: &Path,
    summaries: &[EdgeSummary],
    est: &PartitionEstimate,
    selection: &HotspotSelection,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["edge_id", "cluster", "lambda_bar", "selected"])?;
    for (s, &j) in summaries.iter().zip(est.partition.labels()) {
        w.write_record([
            s.edge_id.to_string(),
            (j + 1).to_string(),
            est.mean_intensity[j].to_string(),
            selection.is_selected(j).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,mass` rows in ascending `k`.
pub fn write_distribution_file(path: &Path, post: &GroupCountPosterior) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["k", "mass"])?;
    for (k, m) in &post.masses {
        w.write_record([k.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
