//! Synthetic grid networks with planted clusters of events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Edge, EdgeId, EventPattern, LinearNetwork, Point2};
use crate::parallel::Execution;

/// One planted cluster: the `edge_count` edges nearest `center` receive events.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: Point2,
    pub radius: f64,
    /// Mean number of events per selected edge; at least 1.
    pub intensity: f64,
    pub edge_count: usize,
}

/// Rectangular lattice with `rows * cols` vertices, origin at `(0, 0)`.
///
/// Horizontal edges are numbered first, row by row from id 1, then vertical
/// edges column by column.
pub fn make_grid_network(rows: usize, cols: usize, spacing: f64) -> Result<LinearNetwork> {
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2x2 vertices, got {rows}x{cols}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let vertex = |r: usize, c: usize| Point2::new(c as f64 * spacing, r as f64 * spacing);
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    let mut id = 0;
    for r in 0..rows {
        for c in 0..cols - 1 {
            id += 1;
            edges.push(Edge::new(id, vertex(r, c), vertex(r, c + 1))?);
        }
    }
    for c in 0..cols {
        for r in 0..rows - 1 {
            id += 1;
            edges.push(Edge::new(id, vertex(r, c), vertex(r + 1, c))?);
        }
    }
    LinearNetwork::new(edges)
}

/// Planted cluster label (index into the spec list) of every edge that received events.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<(EdgeId, usize)>,
}

fn select_edges(network: &LinearNetwork, spec: &ClusterSpec) -> Result<Vec<EdgeId>> {
    if spec.radius.is_nan()
        || spec.radius <= 0.0
        || spec.intensity.is_nan()
        || spec.intensity < 1.0
        || spec.edge_count == 0
    {
        return Err(Error::Config(format!(
            "cluster spec needs radius > 0, intensity >= 1 and edge_count >= 1: {spec:?}"
        )));
    }
    let in_disc = network
        .edges()
        .iter()
        .filter(|e| e.distance_to(spec.center) <= spec.radius)
        .count();
    if in_disc < spec.edge_count {
        return Err(Error::Config(format!(
            "disc around {:?} with radius {} meets {in_disc} edges, fewer than the {} requested",
            spec.center, spec.radius, spec.edge_count
        )));
    }
    let mut by_distance: Vec<(f64, EdgeId)> = network
        .edges()
        .iter()
        .map(|e| (e.midpoint().dist(spec.center), e.id))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ids: Vec<EdgeId> = by_distance
        .iter()
        .take(spec.edge_count)
        .map(|&(_, id)| id)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Draws events for every spec; each selected edge gets `1 + Poisson(intensity - 1)`
/// events placed uniformly along it.
pub fn simulate_events(
    network: &LinearNetwork,
    specs: &[ClusterSpec],
    seed: u64,
) -> Result<(EventPattern, GroundTruth)> {
    simulate_events_with(network, specs, seed, Execution::default())
}

pub fn simulate_events_with(
    network: &LinearNetwork,
    specs: &[ClusterSpec],
    seed: u64,
    exec: Execution,
) -> Result<(EventPattern, GroundTruth)> {
    if specs.is_empty() {
        return Err(Error::Config(
            "at least one cluster spec is required".into(),
        ));
    }
    let selections: Vec<Vec<EdgeId>> = specs
        .iter()
        .map(|s| select_edges(network, s))
        .collect::<Result<_>>()?;
    let mut truth: Vec<(EdgeId, usize)> = selections
        .iter()
        .enumerate()
        .flat_map(|(j, ids)| ids.iter().map(move |&id| (id, j)))
        .collect();
    truth.sort_unstable();
    if let Some(w) = truth.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Config(format!(
            "edge {} is claimed by clusters {} and {}",
            w[0].0,
            w[0].1 + 1,
            w[1].1 + 1
        )));
    }

    let per_spec = exec.map(specs.len(), |j| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let extra = (specs[j].intensity > 1.0)
            .then(|| Poisson::new(specs[j].intensity - 1.0).expect("positive Poisson mean"));
        let mut pts = Vec::new();
        let mut ids = Vec::new();
        for &id in &selections[j] {
            let edge = network.edge(id).expect("selected from the network");
            let count = 1 + extra.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
            for _ in 0..count {
                let t: f64 = rng.random();
                pts.push(edge.a + (edge.b - edge.a) * t);
                ids.push(id);
            }
        }
        (pts, ids)
    });
    let (mut events, mut assignments) = (Vec::new(), Vec::new());
    for (pts, ids) in per_spec {
        events.extend(pts);
        assignments.extend(ids);
    }
    Ok((
        EventPattern::with_assignments(events, assignments)?,
        GroundTruth { labels: truth },
    ))
}

/// A complete synthetic study: grid dimensions, spacing and planted clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "cluster")]
    pub clusters: Vec<ClusterSpec>,
}

impl Scenario {
    pub fn network(&self) -> Result<LinearNetwork> {
        make_grid_network(self.rows, self.cols, self.spacing)
    }

    pub fn generate(&self, seed: u64) -> Result<(LinearNetwork, EventPattern, GroundTruth)> {
        let network = self.network()?;
        let (events, truth) = simulate_events(&network, &self.clusters, seed)?;
        Ok((network, events, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::aggregate;
    use crate::geometry::{bounding_region, snap_events};

    fn spec(x: f64, y: f64, intensity: f64, edge_count: usize) -> ClusterSpec {
        ClusterSpec {
            center: Point2::new(x, y),
            radius: 2.0,
            intensity,
            edge_count,
        }
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(make_grid_network(2, 2, 1.0).unwrap().len(), 4);
        let g = make_grid_network(3, 3, 1.0).unwrap();
        assert_eq!(g.len(), 12);
        assert!(g.edges().iter().all(|e| (e.length() - 1.0).abs() < 1e-15));
        assert!(make_grid_network(1, 5, 1.0).is_err());
    }

    #[test]
    fn planted_edges_become_summaries() {
        let g = make_grid_network(8, 8, 1.0).unwrap();
        let (ev, truth) = simulate_events(&g, &[spec(3.0, 3.0, 4.0, 14)], 1).unwrap();
        assert_eq!(truth.labels.len(), 14);
        let r = bounding_region(&g, 0.05).unwrap();
        let d = aggregate(&g, &ev, &r).unwrap();
        assert_eq!(d.n(), 14);
        snap_events(&g, &EventPattern::new(ev.events.clone()), 0.0).unwrap();
    }

    #[test]
    fn unit_intensity_gives_single_events() {
        let g = make_grid_network(6, 6, 1.0).unwrap();
        let (ev, truth) = simulate_events(&g, &[spec(2.0, 2.0, 1.0, 6)], 4).unwrap();
        assert_eq!(ev.len(), 6);
        assert_eq!(truth.labels.len(), 6);
    }

    #[test]
    fn disjoint_specs_two_groups() {
        let g = make_grid_network(10, 10, 1.0).unwrap();
        let (_, truth) =
            simulate_events(&g, &[spec(1.0, 1.0, 3.0, 4), spec(8.0, 8.0, 3.0, 4)], 4).unwrap();
        let labels: std::collections::BTreeSet<usize> = truth.labels.iter().map(|l| l.1).collect();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn infeasible_and_overlapping_specs() {
        let g = make_grid_network(4, 4, 1.0).unwrap();
        let tiny = ClusterSpec {
            center: Point2::new(1.5, 1.5),
            radius: 0.1,
            intensity: 2.0,
            edge_count: 3,
        };
        assert!(matches!(
            simulate_events(&g, &[tiny], 0),
            Err(Error::Config(_))
        ));
        let a = spec(1.0, 1.0, 2.0, 4);
        assert!(matches!(
            simulate_events(&g, &[a, a], 0),
            Err(Error::Config(_))
        ));
        assert!(simulate_events(&g, &[spec(1.0, 1.0, 0.5, 2)], 0).is_err());
    }

    #[test]
    fn mean_count_tracks_intensity() {
        let g = make_grid_network(10, 10, 1.0).unwrap();
        let s = spec(4.5, 4.5, 5.0, 20);
        let (mut total, mut edges) = (0usize, 0usize);
        for seed in 0..200 {
            let (ev, truth) = simulate_events(&g, &[s], seed).unwrap();
            total += ev.len();
            edges += truth.labels.len();
        }
        let mean = total as f64 / edges as f64;
        // sd of the mean: sqrt(4 / 4000)
        assert!((mean - 5.0).abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn execution_policy_does_not_change_output() {
        let g = make_grid_network(10, 10, 1.0).unwrap();
        let specs = [spec(1.0, 1.0, 3.0, 4), spec(8.0, 8.0, 6.0, 4)];
        let a = simulate_events_with(&g, &specs, 9, Execution::Sequential).unwrap();
        let b = simulate_events_with(&g, &specs, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
