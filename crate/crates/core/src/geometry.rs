//! Linear networks, the planar region that embeds them, and event points.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;

pub type EdgeId = u64;

/// A point in the plane, in network units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dist(self, other: Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// A straight segment of the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: Point2,
    pub b: Point2,
}

impl Edge {
    pub fn new(id: EdgeId, a: Point2, b: Point2) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Usage(format!(
                "edge {id} has non-finite coordinates"
            )));
        }
        if a == b {
            return Err(Error::Usage(format!("edge {id} has zero length")));
        }
        Ok(Edge { id, a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn midpoint(&self) -> Point2 {
        (self.a + self.b) * 0.5
    }

    /// Orthogonal projection of `p` onto the segment and the distance to it.
    pub fn project(&self, p: Point2) -> (Point2, f64) {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
        let q = self.a + ab * t;
        (q, p.dist(q))
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.project(p).1
    }
}

/// A set of edges with unique ids, stored in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearNetwork {
    edges: Vec<Edge>,
}

impl LinearNetwork {
    pub fn new(mut edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Usage("network has no edges".into()));
        }
        for e in &edges {
            if !e.a.is_finite() || !e.b.is_finite() || e.a == e.b {
                return Err(Error::Usage(format!("edge {} is degenerate", e.id)));
            }
        }
        edges.sort_by_key(|e| e.id);
        if let Some(w) = edges.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Usage(format!("duplicate edge id {}", w[0].id)));
        }
        Ok(LinearNetwork { edges })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| &self.edges[i])
    }

    /// Largest absolute coordinate among the endpoints, at least 1.
    fn coordinate_scale(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|e| [e.a.x, e.a.y, e.b.x, e.b.y])
            .fold(1.0_f64, |m, v| m.max(v.abs()))
    }

    /// Distances closer than this are treated as ties when snapping.
    fn snap_epsilon(&self) -> f64 {
        let extent = self.edges.iter().map(Edge::length).fold(0.0_f64, f64::max);
        (1e-12 * extent).max(4.0 * f64::EPSILON * self.coordinate_scale())
    }
}

/// Axis-aligned rectangle embedding the network; support of the location prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Region {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !finite || xmin >= xmax || ymin >= ymax {
            return Err(Error::Usage(format!(
                "invalid region [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Region {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    pub fn contains(&self, p: Point2) -> bool {
        (self.xmin..=self.xmax).contains(&p.x) && (self.ymin..=self.ymax).contains(&p.y)
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.xmin <= other.xmin
            && self.xmax >= other.xmax
            && self.ymin <= other.ymin
            && self.ymax >= other.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Bounding box of all edge endpoints, each side grown by `margin` times its length.
///
/// A side of zero length is grown by a small absolute amount instead, so the
/// result is always a proper rectangle.
pub fn bounding_region(network: &LinearNetwork, margin: f64) -> Result<Region> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Usage(format!(
            "margin must be a nonnegative number, got {margin}"
        )));
    }
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in network.edges().iter().flat_map(|e| [e.a, e.b]) {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let (xmin, xmax) = expand(xmin, xmax, margin);
    let (ymin, ymax) = expand(ymin, ymax, margin);
    Region::new(xmin, xmax, ymin, ymax)
}

fn expand(lo: f64, hi: f64, margin: f64) -> (f64, f64) {
    let len = hi - lo;
    let pad = if len > 0.0 {
        margin * len
    } else {
        1e-9 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

/// Raw event locations, optionally already assigned to edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventPattern {
    pub events: Vec<Point2>,
    pub assignments: Option<Vec<EdgeId>>,
}

impl EventPattern {
    pub fn new(events: Vec<Point2>) -> Self {
        EventPattern {
            events,
            assignments: None,
        }
    }

    pub fn with_assignments(events: Vec<Point2>, assignments: Vec<EdgeId>) -> Result<Self> {
        if events.len() != assignments.len() {
            return Err(Error::Usage(format!(
                "{} events but {} edge assignments",
                events.len(),
                assignments.len()
            )));
        }
        Ok(EventPattern {
            events,
            assignments: Some(assignments),
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks that every assignment names an edge of `network`.
    pub fn validate(&self, network: &LinearNetwork) -> Result<()> {
        if let Some((i, p)) = self.events.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::Usage(format!(
                "event {i} has non-finite coordinates {p:?}"
            )));
        }
        if let Some(assign) = &self.assignments {
            if assign.len() != self.events.len() {
                return Err(Error::Usage(
                    "assignment count differs from event count".into(),
                ));
            }
            if let Some((i, id)) = assign
                .iter()
                .enumerate()
                .find(|(_, id)| network.edge(**id).is_none())
            {
                return Err(Error::Usage(format!(
                    "event {i} references unknown edge {id}"
                )));
            }
        }
        Ok(())
    }
}

/// Assigns every event to its nearest edge and moves it onto that edge.
///
/// Ties go to the smallest edge id. Events already on their edge keep their
/// coordinates, which makes snapping idempotent. Any existing assignments in
/// `events` are ignored and recomputed.
pub fn snap_events(
    network: &LinearNetwork,
    events: &EventPattern,
    tolerance: f64,
) -> Result<EventPattern> {
    snap_events_with(network, events, tolerance, Execution::default())
}

pub fn snap_events_with(
    network: &LinearNetwork,
    events: &EventPattern,
    tolerance: f64,
    exec: Execution,
) -> Result<EventPattern> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::Usage(format!(
            "snap tolerance must be nonnegative, got {tolerance}"
        )));
    }
    let eps = network.snap_epsilon();
    let snapped = exec.try_map(events.len(), |i| {
        let p = events.events[i];
        if !p.is_finite() {
            return Err(Error::Usage(format!(
                "event {i} has non-finite coordinates"
            )));
        }
        let (edge, q, dist) = nearest_edge(network, p, eps);
        if dist > tolerance + eps {
            return Err(Error::Snap {
                index: i,
                distance: dist,
                tolerance,
            });
        }
        let q = if dist <= eps { p } else { q };
        Ok((q, edge))
    })?;
    let (pts, ids) = snapped.into_iter().unzip();
    Ok(EventPattern {
        events: pts,
        assignments: Some(ids),
    })
}

fn nearest_edge(network: &LinearNetwork, p: Point2, eps: f64) -> (EdgeId, Point2, f64) {
    let mut best: Option<(EdgeId, Point2, f64)> = None;
    // edges are in ascending id order, so a later edge wins only when strictly closer
    for e in network.edges() {
        let (q, d) = e.project(p);
        match best {
            Some((_, _, bd)) if d >= bd - eps => {}
            _ => best = Some((e.id, q, d)),
        }
    }
    best.expect("network is nonempty")
}
