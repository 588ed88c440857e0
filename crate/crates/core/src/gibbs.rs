//! Gibbs sampler over memberships, cluster intensities and locations, the
//! total mass and the penalty.
//!
//! Membership updates follow the single-auxiliary scheme for nonconjugate
//! mixtures: every item update uses exactly one auxiliary pair of intensity
//! and location for the new-group option. When the item was alone in its
//! group, the emptied group's own parameters serve as that pair; otherwise the
//! pair is drawn from the priors. This keeps the joint target exactly
//! invariant.
//!
//! A sweep applies memberships, intensities, locations, total mass and penalty
//! in that order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::aggregation::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Region};
use crate::model::{kernel_ln, log_penalty, Hyperparams, Partition, Prior};
use crate::parallel::Execution;
use crate::truncnorm::TruncatedNormal;

/// Intensity and location of one cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub lambda: f64,
    pub location: Point2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub hyper: Hyperparams,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 15_000,
            burnin: 10_000,
            thin: 1,
            seed: 1,
            hyper: Hyperparams::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burnin >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning stride must be positive".into()));
        }
        self.hyper.validate()
    }

    /// Number of records a run keeps.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burnin).div_ceil(self.thin)
    }
}

/// One configuration of the chain together with its random stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerState {
    pub(crate) partition: Partition,
    pub(crate) lambdas: Vec<f64>,
    pub(crate) locations: Vec<Point2>,
    pub(crate) theta: f64,
    pub(crate) tau: f64,
    pub(crate) rng: ChaCha8Rng,
}

impl SamplerState {
    /// Assembles a state from explicit values; the random stream is seeded with `seed`.
    pub fn from_parts(
        partition: Partition,
        params: &[ClusterParams],
        theta: f64,
        tau: f64,
        seed: u64,
    ) -> Result<Self> {
        let state = SamplerState {
            lambdas: params.iter().map(|p| p.lambda).collect(),
            locations: params.iter().map(|p| p.location).collect(),
            partition,
            theta,
            tau,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        if !state.partition.is_valid() || state.lambdas.len() != state.partition.k() {
            return Err(Error::Usage(
                "partition and cluster parameters disagree".into(),
            ));
        }
        Ok(state)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn locations(&self) -> &[Point2] {
        &self.locations
    }

    pub fn params(&self, j: usize) -> ClusterParams {
        ClusterParams {
            lambda: self.lambdas[j],
            location: self.locations[j],
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Verifies every structural and support constraint of a state.
    pub fn check(&self, region: &Region) -> Result<()> {
        let k = self.partition.k();
        let fail = |msg: &str| Err(Error::Usage(format!("invalid sampler state: {msg}")));
        if !self.partition.is_valid() {
            return fail("partition is not canonical or has empty groups");
        }
        if self.lambdas.len() != k || self.locations.len() != k {
            return fail("parameter arrays do not match the number of groups");
        }
        if !self.lambdas.iter().all(|&l| l > 0.0 && l.is_finite()) {
            return fail("non-positive intensity");
        }
        if !self.locations.iter().all(|&u| region.contains(u)) {
            return fail("cluster location outside the region");
        }
        if !(self.theta > 0.0 && self.theta.is_finite() && self.tau > 0.0 && self.tau.is_finite()) {
            return fail("non-positive total mass or penalty");
        }
        Ok(())
    }

    fn record(&self, iter: usize) -> TraceRecord {
        TraceRecord {
            iter,
            partition: self.partition.clone(),
            lambdas: self.lambdas.clone(),
            locations: self.locations.clone(),
            theta: self.theta,
            tau: self.tau,
        }
    }
}

/// A retained post-burn-in state.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub partition: Partition,
    pub lambdas: Vec<f64>,
    pub locations: Vec<Point2>,
    pub theta: f64,
    pub tau: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates several chains into one sample.
    pub fn pool(traces: impl IntoIterator<Item = Trace>) -> Trace {
        Trace {
            records: traces.into_iter().flat_map(|t| t.records).collect(),
        }
    }
}

/// Full conditionals and updates for one dataset under fixed hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct Sampler<'a> {
    dataset: &'a Dataset,
    hyper: Hyperparams,
}

impl<'a> Sampler<'a> {
    pub fn new(dataset: &'a Dataset, hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(Sampler { dataset, hyper })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// All items in one group with parameters drawn from their priors.
    pub fn init_state(&self, seed: u64) -> SamplerState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = self.draw_from_base(&mut rng);
        SamplerState {
            partition: Partition::one_group(self.dataset.n()),
            lambdas: vec![first.lambda],
            locations: vec![first.location],
            theta: self.hyper.theta.initial_value(),
            tau: self.hyper.tau.initial_value(),
            rng,
        }
    }

    /// Draws an intensity from the gamma prior and a location uniformly on the region.
    pub fn draw_from_base<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterParams {
        let r = self.dataset.region();
        let lambda = gamma(self.hyper.lambda_shape, self.hyper.lambda_rate, rng);
        let location = Point2::new(
            r.xmin + rng.random::<f64>() * r.width(),
            r.ymin + rng.random::<f64>() * r.height(),
        );
        ClusterParams {
            lambda,
            location: Point2::new(location.x.min(r.xmax), location.y.min(r.ymax)),
        }
    }

    /// Sums of counts and centroids and the size of every group.
    fn group_stats(&self, partition: &Partition) -> Vec<GroupStats> {
        let mut stats = vec![GroupStats::default(); partition.k()];
        for (i, &l) in partition.labels().iter().enumerate() {
            let g = &mut stats[l];
            g.n += 1;
            g.count_sum += self.dataset.count(i);
            g.centroid_sum = g.centroid_sum + self.dataset.centroid(i);
        }
        stats
    }

    /// Gamma (shape, rate) full conditional of each cluster intensity.
    pub fn lambda_conditionals(&self, state: &SamplerState) -> Vec<(f64, f64)> {
        self.group_stats(&state.partition)
            .iter()
            .map(|g| {
                (
                    (g.count_sum - g.n as u64) as f64 + self.hyper.lambda_shape,
                    g.n as f64 + self.hyper.lambda_rate,
                )
            })
            .collect()
    }

    pub fn update_lambdas(&self, state: &mut SamplerState) {
        for (j, (shape, rate)) in self.lambda_conditionals(state).into_iter().enumerate() {
            state.lambdas[j] = gamma(shape, rate, &mut state.rng);
        }
    }

    /// Per-axis truncated normal full conditionals of each cluster location.
    pub fn location_conditionals(&self, state: &SamplerState) -> Result<Vec<[TruncatedNormal; 2]>> {
        let r = self.dataset.region();
        self.group_stats(&state.partition)
            .iter()
            .map(|g| {
                let n = g.n as f64;
                let mean = g.centroid_sum * (1.0 / n);
                let sd = (2.0 * state.tau * n).sqrt().recip();
                Ok([
                    TruncatedNormal::new(mean.x, sd, r.xmin, r.xmax)?,
                    TruncatedNormal::new(mean.y, sd, r.ymin, r.ymax)?,
                ])
            })
            .collect()
    }

    pub fn update_locations(&self, state: &mut SamplerState) -> Result<()> {
        for (j, [tx, ty]) in self.location_conditionals(state)?.into_iter().enumerate() {
            let x = tx.sample(&mut state.rng);
            let y = ty.sample(&mut state.rng);
            state.locations[j] = Point2::new(x, y);
        }
        Ok(())
    }

    /// Removes item `i` from its group.
    ///
    /// If the group empties it is deleted and its parameters are returned; they
    /// then serve as the auxiliary new-group pair. The item is left without a
    /// label until [`Sampler::attach`] is called, and the labeling is not
    /// canonical until [`Sampler::canonicalize`] runs.
    pub fn detach(&self, state: &mut SamplerState, i: usize) -> Option<ClusterParams> {
        let p = &mut state.partition;
        let c = p.labels[i];
        p.labels[i] = usize::MAX;
        p.sizes[c] -= 1;
        if p.sizes[c] > 0 {
            return None;
        }
        let last = p.sizes.len() - 1;
        p.sizes.swap_remove(c);
        let lambda = state.lambdas.swap_remove(c);
        let location = state.locations.swap_remove(c);
        if c != last {
            for l in p.labels.iter_mut().filter(|l| **l == last) {
                *l = c;
            }
        }
        Some(ClusterParams { lambda, location })
    }

    /// Log selection weights for a detached item: existing groups in label
    /// order, then the new group carrying `aux`.
    pub fn membership_log_weights(
        &self,
        state: &SamplerState,
        i: usize,
        aux: ClusterParams,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(state.partition.k() + 1);
        self.fill_membership_log_weights(state, i, aux, &mut out);
        out
    }

    fn fill_membership_log_weights(
        &self,
        state: &SamplerState,
        i: usize,
        aux: ClusterParams,
        out: &mut Vec<f64>,
    ) {
        let e = self.dataset.centroid(i);
        let y = self.dataset.count(i);
        out.clear();
        out.extend(
            state
                .partition
                .sizes
                .iter()
                .zip(&state.lambdas)
                .zip(&state.locations)
                .map(|((&n, &lambda), &u)| {
                    (n as f64).ln() + log_penalty(e, u, state.tau) + kernel_ln(y, lambda)
                }),
        );
        out.push(
            state.theta.ln() + log_penalty(e, aux.location, state.tau) + kernel_ln(y, aux.lambda),
        );
    }

    /// Places a detached item into group `choice`; `choice == k` opens a new group with `aux`.
    pub fn attach(&self, state: &mut SamplerState, i: usize, choice: usize, aux: ClusterParams) {
        let p = &mut state.partition;
        let k = p.sizes.len();
        if choice == k {
            p.sizes.push(1);
            state.lambdas.push(aux.lambda);
            state.locations.push(aux.location);
        } else {
            p.sizes[choice] += 1;
        }
        p.labels[i] = choice;
    }

    /// Restores first-appearance labels, permuting the cluster parameters to match.
    pub fn canonicalize(&self, state: &mut SamplerState) {
        let (partition, original) = Partition::canonicalize(&state.partition.labels);
        state.lambdas = original.iter().map(|&j| state.lambdas[j]).collect();
        state.locations = original.iter().map(|&j| state.locations[j]).collect();
        state.partition = partition;
    }

    pub fn update_memberships(&self, state: &mut SamplerState) {
        let mut weights = Vec::new();
        for i in 0..self.dataset.n() {
            let aux = match self.detach(state, i) {
                Some(own) => own,
                None => self.draw_from_base(&mut state.rng),
            };
            self.fill_membership_log_weights(state, i, aux, &mut weights);
            let choice = sample_log_categorical(&weights, &mut state.rng);
            self.attach(state, i, choice, aux);
        }
        self.canonicalize(state);
    }

    /// Escobar–West auxiliary-variable update of the total mass.
    pub fn update_theta(&self, state: &mut SamplerState) {
        let Prior::Gamma { shape, rate } = self.hyper.theta else {
            return;
        };
        let n = self.dataset.n() as f64;
        let k = state.partition.k() as f64;
        let eta: f64 = Beta::new(state.theta + 1.0, n)
            .expect("positive beta parameters")
            .sample(&mut state.rng);
        // eta can round to zero for tiny theta; keep the rate finite
        let post_rate = rate - eta.max(f64::MIN_POSITIVE).ln();
        let odds = (shape + k - 1.0) / (n * post_rate);
        let post_shape = if state.rng.random::<f64>() < odds / (1.0 + odds) {
            shape + k
        } else {
            shape + k - 1.0
        };
        state.theta = gamma(post_shape, post_rate, &mut state.rng).max(f64::MIN_POSITIVE);
    }

    /// Sum of squared distances between centroids and their group locations.
    pub fn spatial_residual(&self, state: &SamplerState) -> f64 {
        state
            .partition
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &l)| self.dataset.centroid(i).dist_sq(state.locations[l]))
            .sum()
    }

    /// Gamma (shape, rate) full conditional of the penalty, or `None` when it is fixed.
    pub fn tau_conditional(&self, state: &SamplerState) -> Option<(f64, f64)> {
        match self.hyper.tau {
            Prior::Fixed { .. } => None,
            Prior::Gamma { shape, rate } => {
                let sse = self.spatial_residual(state);
                debug_assert!(sse >= 0.0);
                Some((shape, rate + sse))
            }
        }
    }

    pub fn update_tau(&self, state: &mut SamplerState) {
        if let Some((shape, rate)) = self.tau_conditional(state) {
            state.tau = gamma(shape, rate, &mut state.rng).max(f64::MIN_POSITIVE);
        }
    }

    pub fn sweep(&self, state: &mut SamplerState) -> Result<()> {
        self.update_memberships(state);
        self.update_lambdas(state);
        self.update_locations(state)?;
        self.update_theta(state);
        self.update_tau(state);
        Ok(())
    }

    pub fn run(&self, iterations: usize, burnin: usize, thin: usize, seed: u64) -> Result<Trace> {
        let mut state = self.init_state(seed);
        let mut records =
            Vec::with_capacity((iterations.saturating_sub(burnin)).div_ceil(thin.max(1)));
        for t in 1..=iterations {
            self.sweep(&mut state)?;
            if t > burnin && (t - burnin - 1).is_multiple_of(thin) {
                records.push(state.record(t));
            }
        }
        Ok(Trace { records })
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct GroupStats {
    n: usize,
    count_sum: u64,
    centroid_sum: Point2,
}

fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, rate.recip())
        .expect("positive gamma parameters")
        .sample(rng)
}

/// Draws an index with probability proportional to `exp(log_w)`.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|&l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (j, &l) in log_w.iter().enumerate() {
        u -= (l - max).exp();
        if u < 0.0 {
            return j;
        }
    }
    // rounding left a sliver of mass past the end; the last positive weight takes it
    log_w
        .iter()
        .rposition(|&l| l > f64::NEG_INFINITY)
        .expect("at least one finite weight")
}

/// Runs one chain from the prior-drawn initial state.
pub fn run(dataset: &Dataset, config: &SamplerConfig) -> Result<Trace> {
    config.validate()?;
    Sampler::new(dataset, config.hyper)?.run(
        config.iterations,
        config.burnin,
        config.thin,
        config.seed,
    )
}

/// Runs independent chains; chain `c` is seeded with `seed + c`.
pub fn run_chains(
    dataset: &Dataset,
    config: &SamplerConfig,
    chains: usize,
    exec: Execution,
) -> Result<Vec<Trace>> {
    config.validate()?;
    if chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    exec.try_map(chains, |c| {
        let cfg = SamplerConfig {
            seed: config.seed.wrapping_add(c as u64),
            ..*config
        };
        run(dataset, &cfg)
    })
}
