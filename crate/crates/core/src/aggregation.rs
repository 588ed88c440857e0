//! Reduction of an assigned event pattern to per-edge counts and locations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EdgeId, EventPattern, LinearNetwork, Point2, Region};

/// Count and representative location of one edge with at least one event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub edge_id: EdgeId,
    pub count: u64,
    pub centroid: Point2,
}

/// Statistic used as the spatial location of an edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LocationSummary {
    /// Mean of the events on the edge.
    #[default]
    Centroid,
    /// Midpoint of the segment, ignoring where on it the events fall.
    Midpoint,
}

/// The clustering input: nonzero edges in ascending id order plus the region.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    summaries: Vec<EdgeSummary>,
    region: Region,
}

impl Dataset {
    pub fn new(mut summaries: Vec<EdgeSummary>, region: Region) -> Result<Self> {
        if summaries.is_empty() {
            return Err(Error::Usage("dataset has no nonzero edges".into()));
        }
        summaries.sort_by_key(|s| s.edge_id);
        if let Some(w) = summaries.windows(2).find(|w| w[0].edge_id == w[1].edge_id) {
            return Err(Error::Usage(format!(
                "duplicate edge id {} in dataset",
                w[0].edge_id
            )));
        }
        for s in &summaries {
            if s.count == 0 {
                return Err(Error::Usage(format!("edge {} has a zero count", s.edge_id)));
            }
            if !s.centroid.is_finite() || !region.contains(s.centroid) {
                return Err(Error::Usage(format!(
                    "centroid of edge {} lies outside the region",
                    s.edge_id
                )));
            }
        }
        Ok(Dataset { summaries, region })
    }

    pub fn summaries(&self) -> &[EdgeSummary] {
        &self.summaries
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn n(&self) -> usize {
        self.summaries.len()
    }

    pub fn count(&self, i: usize) -> u64 {
        self.summaries[i].count
    }

    pub fn centroid(&self, i: usize) -> Point2 {
        self.summaries[i].centroid
    }

    pub fn total_events(&self) -> u64 {
        self.summaries.iter().map(|s| s.count).sum()
    }
}

/// Per-edge counts and centroids of an assigned event pattern.
pub fn aggregate(
    network: &LinearNetwork,
    events: &EventPattern,
    region: &Region,
) -> Result<Dataset> {
    aggregate_with(network, events, region, LocationSummary::Centroid)
}

pub fn aggregate_with(
    network: &LinearNetwork,
    events: &EventPattern,
    region: &Region,
    location: LocationSummary,
) -> Result<Dataset> {
    let assign = events.assignments.as_ref().ok_or_else(|| {
        Error::Usage("events must be assigned to edges before aggregation".into())
    })?;
    events.validate(network)?;
    let mut by_edge: BTreeMap<EdgeId, Vec<Point2>> = BTreeMap::new();
    for (i, (&p, &id)) in events.events.iter().zip(assign).enumerate() {
        if !region.contains(p) {
            return Err(Error::Usage(format!("event {i} lies outside the region")));
        }
        by_edge.entry(id).or_default().push(p);
    }
    let summaries = by_edge
        .into_iter()
        .map(|(edge_id, pts)| {
            let centroid = match location {
                LocationSummary::Centroid => centroid(pts.clone()),
                LocationSummary::Midpoint => network.edge(edge_id).expect("validated").midpoint(),
            };
            EdgeSummary {
                edge_id,
                count: pts.len() as u64,
                centroid,
            }
        })
        .collect();
    Dataset::new(summaries, *region)
}

/// Mean of the points, summed in a fixed order and clamped to their bounding box.
fn centroid(mut pts: Vec<Point2>) -> Point2 {
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    let m = pts.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        sx += p.x;
        sy += p.y;
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    Point2::new((sx / m).clamp(xmin, xmax), (sy / m).clamp(ymin, ymax))
}
