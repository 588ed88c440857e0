//! Probabilistic ingredients: the shifted-Poisson kernel, the spatial penalty,
//! the Dirichlet-process partition prior and its penalized predictive weights.
//!
//! Everything is computed in log space. Callers exponentiate only after
//! subtracting the maximum, which keeps weights finite for penalties as large
//! as `1e9`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Prior on a positive scalar: either held fixed or gamma distributed (shape, rate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Prior {
    Fixed { value: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl Prior {
    pub fn fixed(value: f64) -> Self {
        Prior::Fixed { value }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Prior::Gamma { shape, rate }
    }

    /// The fixed value, or the prior mean `shape / rate`.
    pub fn initial_value(&self) -> f64 {
        match *self {
            Prior::Fixed { value } => value,
            Prior::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Prior::Fixed { .. })
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Prior::Fixed { value } => value > 0.0 && value.is_finite(),
            Prior::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior for {name}: {self:?}")))
        }
    }
}

/// Hyperparameters of the model.
///
/// `lambda_shape` and `lambda_rate` parametrize the gamma prior on cluster
/// intensities. The defaults are gamma(1.1, 0.1) for intensities and for the
/// total mass, and gamma(1e11, 1e4) for the penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda_shape: f64,
    pub lambda_rate: f64,
    pub theta: Prior,
    pub tau: Prior,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda_shape: 1.1,
            lambda_rate: 0.1,
            theta: Prior::gamma(1.1, 0.1),
            tau: Prior::gamma(1e11, 1e4),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        Prior::gamma(self.lambda_shape, self.lambda_rate).validate("lambda")?;
        self.theta.validate("theta")?;
        self.tau.validate("tau")
    }
}

/// A set partition of `0..n` stored as a canonical membership vector.
///
/// Labels are `0..k`, and label `j` first appears before label `j + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub(crate) labels: Vec<usize>,
    pub(crate) sizes: Vec<usize>,
}

impl Partition {
    /// Builds the canonical partition from arbitrary labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        Self::canonicalize(labels).0
    }

    /// Canonical partition plus the map from new label to the original label.
    pub fn canonicalize(labels: &[usize]) -> (Self, Vec<usize>) {
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut original = Vec::new();
        let mut sizes = Vec::new();
        let canon = labels
            .iter()
            .map(|&l| {
                let j = *map.entry(l).or_insert_with(|| {
                    original.push(l);
                    sizes.push(0);
                    original.len() - 1
                });
                sizes[j] += 1;
                j
            })
            .collect();
        (
            Partition {
                labels: canon,
                sizes,
            },
            original,
        )
    }

    pub fn one_group(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            sizes: if n == 0 { vec![] } else { vec![n] },
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn members(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == j)
            .map(|(i, _)| i)
    }

    /// Checks canonical labeling, nonempty groups and size bookkeeping.
    pub fn is_valid(&self) -> bool {
        let mut counts = vec![0usize; self.sizes.len()];
        let mut next = 0;
        for &l in &self.labels {
            if l > next || l >= self.sizes.len() {
                return false;
            }
            if l == next {
                next += 1;
            }
            counts[l] += 1;
        }
        next == self.sizes.len() && counts == self.sizes && counts.iter().all(|&c| c > 0)
    }
}

/// `ln Γ(x)`, exact at the zeros `x = 1` and `x = 2`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(x)
    }
}

/// Log of the penalty `exp(-tau * |e - u|^2)`.
pub fn log_penalty(e: Point2, u: Point2, tau: f64) -> f64 {
    -tau * e.dist_sq(u)
}

/// Spatial penalty `exp(-tau * |e - u|^2)`, in `(0, 1]` for finite inputs.
pub fn penalty_w(e: Point2, u: Point2, tau: f64) -> Result<f64> {
    if !e.is_finite() || !u.is_finite() || !tau.is_finite() || tau < 0.0 {
        return Err(Error::Domain(format!("penalty_w({e:?}, {u:?}, {tau})")));
    }
    Ok(log_penalty(e, u, tau).exp())
}

/// Log pmf of the shifted Poisson `lambda^(y-1) e^(-lambda) / (y-1)!` on `y >= 1`.
pub fn shifted_poisson_logpmf(y: u64, lambda: f64) -> Result<f64> {
    if y < 1 {
        return Err(Error::Domain("shifted Poisson support starts at 1".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "shifted Poisson rate must be positive, got {lambda}"
        )));
    }
    Ok(kernel_ln(y, lambda))
}

/// Unchecked kernel used in the sampler's inner loop.
pub(crate) fn kernel_ln(y: u64, lambda: f64) -> f64 {
    let m = (y - 1) as f64;
    let lead = if y == 1 { 0.0 } else { m * lambda.ln() };
    lead - lambda - ln_gamma(y as f64)
}

/// Log probability of a partition under the Dirichlet-process EPPF with total mass `theta`.
pub fn eppf_logprob(partition: &Partition, theta: f64) -> f64 {
    let k = partition.k() as f64;
    let rising: f64 = (0..partition.n()).map(|i| (theta + i as f64).ln()).sum();
    let groups: f64 = partition.sizes().iter().map(|&s| ln_gamma(s as f64)).sum();
    k * theta.ln() - rising + groups
}

/// Log predictive weights for placing one item, existing groups first and the new group last.
///
/// `sizes` are the group sizes with the item removed (all positive) and
/// `locations` the matching cluster locations. The existing-group weight is
/// `n_j * w(e, u_j)` and the new-group weight is `theta * w(e, u_new)`.
pub fn predictive_log_weights(
    sizes: &[usize],
    e: Point2,
    locations: &[Point2],
    aux_location: Point2,
    theta: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    if sizes.len() != locations.len() {
        return Err(Error::Usage(format!(
            "{} group sizes but {} locations",
            sizes.len(),
            locations.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Usage(
            "empty group passed to predictive weights".into(),
        ));
    }
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::Domain(format!(
            "theta must be positive, got {theta}"
        )));
    }
    penalty_w(e, aux_location, tau)?;
    let mut w: Vec<f64> = sizes
        .iter()
        .zip(locations)
        .map(|(&n, &u)| (n as f64).ln() + log_penalty(e, u, tau))
        .collect();
    w.push(theta.ln() + log_penalty(e, aux_location, tau));
    Ok(w)
}

/// Unnormalized predictive weights on the natural scale.
///
/// These can underflow for a large penalty; use [`predictive_log_weights`] there.
pub fn predictive_weights(
    sizes: &[usize],
    e: Point2,
    locations: &[Point2],
    aux_location: Point2,
    theta: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    predictive_log_weights(sizes, e, locations, aux_location, theta, tau)?;
    let mut w: Vec<f64> = sizes
        .iter()
        .zip(locations)
        .map(|(&n, &u)| n as f64 * log_penalty(e, u, tau).exp())
        .collect();
    w.push(theta * log_penalty(e, aux_location, tau).exp());
    Ok(w)
}

/// Prior expected number of groups among `n` items, `sum_i theta / (theta + i)`.
pub fn expected_num_groups(n: usize, theta: f64) -> f64 {
    (0..n).map(|i| theta / (theta + i as f64)).sum()
}

/// Normalizes log weights into probabilities after subtracting the maximum.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}
