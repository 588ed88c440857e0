//! Posterior summaries of a trace: the modal partition with per-group
//! intensity samples, hot-spot selection by a resolution threshold, and the
//! posterior of the number of groups.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::gibbs::Trace;
use crate::model::Partition;

/// The most frequent partition and the intensity samples recorded alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionEstimate {
    pub partition: Partition,
    /// Share of trace records carrying this partition.
    pub frequency: f64,
    /// `lambda_samples[j][l]`: intensity of group `j` in the `l`-th matching record.
    pub lambda_samples: Vec<Vec<f64>>,
    pub mean_intensity: Vec<f64>,
}

impl PartitionEstimate {
    /// Number of records the intensity means are based on.
    pub fn m(&self) -> usize {
        self.lambda_samples.first().map_or(0, Vec::len)
    }
}

/// Groups of the modal partition whose mean intensity reaches `lambda_star`.
#[derive(Clone, Debug, PartialEq)]
pub struct HotspotSelection {
    pub lambda_star: f64,
    pub selected_groups: Vec<usize>,
}

impl HotspotSelection {
    pub fn is_selected(&self, group: usize) -> bool {
        self.selected_groups.binary_search(&group).is_ok()
    }
}

/// Distribution of the number of groups, with its mean.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCountPosterior {
    pub masses: BTreeMap<usize, f64>,
    pub mean: f64,
}

fn nonempty(trace: &Trace) -> Result<()> {
    if trace.is_empty() {
        Err(Error::Usage("trace has no records".into()))
    } else {
        Ok(())
    }
}

/// Most frequent canonical partition in the trace; ties go to the earliest first occurrence.
pub fn modal_partition(trace: &Trace) -> Result<PartitionEstimate> {
    nonempty(trace)?;
    // records read from disk or pooled across chains may carry raw labels
    let canon: Vec<(Partition, Vec<usize>)> = trace
        .records
        .iter()
        .map(|r| Partition::canonicalize(r.partition.labels()))
        .collect();
    let mut counts: HashMap<&Partition, (usize, usize)> = HashMap::new();
    for (t, (p, _)) in canon.iter().enumerate() {
        counts.entry(p).or_insert((0, t)).0 += 1;
    }
    let (&mode, &(hits, _)) = counts
        .iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .expect("trace is nonempty");
    let mut lambda_samples = vec![Vec::with_capacity(hits); mode.k()];
    for (record, (p, original)) in trace.records.iter().zip(&canon) {
        if p == mode {
            for (j, &old) in original.iter().enumerate() {
                lambda_samples[j].push(record.lambdas[old]);
            }
        }
    }
    let mean_intensity = lambda_samples
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    Ok(PartitionEstimate {
        partition: mode.clone(),
        frequency: hits as f64 / trace.len() as f64,
        lambda_samples,
        mean_intensity,
    })
}

/// Keeps the groups whose mean intensity is at least `lambda_star`.
pub fn restrict(estimate: &PartitionEstimate, lambda_star: f64) -> HotspotSelection {
    HotspotSelection {
        lambda_star,
        selected_groups: estimate
            .mean_intensity
            .iter()
            .enumerate()
            .filter(|(_, &l)| l >= lambda_star)
            .map(|(j, _)| j)
            .collect(),
    }
}

fn empirical(values: impl ExactSizeIterator<Item = usize>) -> GroupCountPosterior {
    let t = values.len() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for v in values {
        *counts.entry(v).or_default() += 1;
        total += v;
    }
    GroupCountPosterior {
        masses: counts.into_iter().map(|(k, c)| (k, c as f64 / t)).collect(),
        mean: total as f64 / t,
    }
}

/// Empirical posterior of the number of groups.
pub fn num_groups_posterior(trace: &Trace) -> Result<GroupCountPosterior> {
    nonempty(trace)?;
    Ok(empirical(trace.records.iter().map(|r| r.partition.k())))
}

/// Empirical distribution of the per-record number of groups with intensity
/// at least `lambda_star`. The mean of this distribution is the average count.
pub fn num_groups_posterior_restricted(
    trace: &Trace,
    lambda_star: f64,
) -> Result<GroupCountPosterior> {
    nonempty(trace)?;
    Ok(empirical(trace.records.iter().map(|r| {
        r.lambdas.iter().filter(|&&l| l >= lambda_star).count()
    })))
}

/// Fraction of item pairs on which two partitions agree.
pub fn rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::Usage(format!(
            "partitions have different sizes ({} and {})",
            p.n(),
            q.n()
        )));
    }
    let n = p.n();
    if n < 2 {
        return Ok(1.0);
    }
    let (a, b) = (p.labels(), q.labels());
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::gibbs::TraceRecord;
    use proptest::prelude::*;

    fn rec(labels: &[usize], lambdas: &[f64]) -> TraceRecord {
        let (partition, _) = Partition::canonicalize(labels);
        TraceRecord {
            iter: 0,
            locations: vec![Point2::default(); lambdas.len()],
            partition: Partition {
                labels: labels.to_vec(),
                sizes: partition.sizes,
            },
            lambdas: lambdas.to_vec(),
            theta: 1.0,
            tau: 1.0,
        }
    }

    fn raw_trace(recs: Vec<TraceRecord>) -> Trace {
        Trace { records: recs }
    }

    #[test]
    fn identical_records() {
        let t = raw_trace(
            (0..10)
                .map(|i| rec(&[0, 0, 1], &[1.0 + i as f64, 2.0]))
                .collect(),
        );
        let est = modal_partition(&t).unwrap();
        assert_eq!(est.frequency, 1.0);
        assert_eq!(est.m(), 10);
        assert_eq!(est.mean_intensity, vec![5.5, 2.0]);
    }

    #[test]
    fn majority_and_ties() {
        let a = [0, 0, 1];
        let b = [0, 1, 1];
        let t = raw_trace(vec![
            rec(&b, &[1.0, 1.0]),
            rec(&a, &[1.0, 1.0]),
            rec(&a, &[1.0, 1.0]),
            rec(&b, &[1.0, 1.0]),
            rec(&a, &[1.0, 1.0]),
        ]);
        let est = modal_partition(&t).unwrap();
        assert_eq!(est.partition.labels(), &a);
        assert!((est.frequency - 0.6).abs() < 1e-15);

        let tie = raw_trace(vec![
            rec(&a, &[1.0, 1.0]),
            rec(&b, &[1.0, 1.0]),
            rec(&b, &[1.0, 1.0]),
            rec(&a, &[1.0, 1.0]),
        ]);
        assert_eq!(modal_partition(&tie).unwrap().partition.labels(), &a);
    }

    #[test]
    fn relabeled_records_align_intensities() {
        // the same partition written with swapped raw labels
        let t = raw_trace(vec![
            rec(&[0, 0, 1], &[1.0, 10.0]),
            rec(&[1, 1, 0], &[12.0, 3.0]),
        ]);
        let est = modal_partition(&t).unwrap();
        assert_eq!(est.frequency, 1.0);
        assert_eq!(est.lambda_samples, vec![vec![1.0, 3.0], vec![10.0, 12.0]]);
    }

    #[test]
    fn restriction_cases() {
        let est = PartitionEstimate {
            partition: Partition::from_labels(&[0, 1, 2]),
            frequency: 1.0,
            lambda_samples: vec![vec![0.5], vec![3.2], vec![7.1]],
            mean_intensity: vec![0.5, 3.2, 7.1],
        };
        assert_eq!(restrict(&est, 0.0).selected_groups, vec![0, 1, 2]);
        assert_eq!(restrict(&est, 4.0).selected_groups, vec![2]);
        assert!(restrict(&est, 8.0).selected_groups.is_empty());
        assert!(restrict(&est, 7.1).is_selected(2));
    }

    #[test]
    fn group_count_posteriors() {
        let t = raw_trace(vec![
            rec(&[0, 1, 1, 1, 1], &[1.0, 1.0]),
            rec(&[0, 1, 1, 1, 1], &[1.0, 1.0]),
            rec(&[0, 1, 2, 2, 2], &[1.0, 1.0, 1.0]),
            rec(&[0, 1, 2, 3, 4], &[1.0; 5]),
        ]);
        let post = num_groups_posterior(&t).unwrap();
        assert_eq!(
            post.masses,
            BTreeMap::from([(2, 0.5), (3, 0.25), (5, 0.25)])
        );

        let t = raw_trace(vec![
            rec(&[0, 1], &[1.0, 5.0]),
            rec(&[0, 1, 2], &[2.0, 6.0, 9.0]),
        ]);
        let r = num_groups_posterior_restricted(&t, 4.0).unwrap();
        assert_eq!(r.masses, BTreeMap::from([(1, 0.5), (2, 0.5)]));
        assert_eq!(r.mean, 1.5);

        let t = raw_trace(vec![rec(&[0, 1], &[0.5, 3.0]); 4]);
        let r = num_groups_posterior_restricted(&t, 1.0).unwrap();
        assert_eq!(r.masses, BTreeMap::from([(1, 1.0)]));
        assert_eq!(r.mean, 1.0);
        assert_eq!(
            num_groups_posterior_restricted(&t, 0.0).unwrap(),
            num_groups_posterior(&t).unwrap()
        );
        assert!(num_groups_posterior(&Trace::default()).is_err());
    }

    #[test]
    fn rand_index_cases() {
        let p = Partition::from_labels(&[0, 0, 1, 1]);
        assert_eq!(rand_index(&p, &p).unwrap(), 1.0);
        assert_eq!(
            rand_index(&Partition::singletons(3), &Partition::one_group(3)).unwrap(),
            0.0
        );
        assert!(rand_index(&p, &Partition::one_group(3)).is_err());
    }

    proptest! {
        #[test]
        fn rand_index_label_invariant(a in prop::collection::vec(0usize..4, 2..12), off in 1usize..50) {
            let b: Vec<usize> = a.iter().map(|x| (x + off) * 3).collect();
            let p = Partition::from_labels(&a);
            let q = Partition::from_labels(&b);
            prop_assert_eq!(rand_index(&p, &q).unwrap(), 1.0);
        }

        #[test]
        fn restrict_is_antitone(means in prop::collection::vec(0.0..10.0f64, 1..10), l1 in 0.0..10.0f64, dl in 0.0..10.0f64) {
            let k = means.len();
            let est = PartitionEstimate {
                partition: Partition::singletons(k),
                frequency: 1.0,
                lambda_samples: means.iter().map(|&m| vec![m]).collect(),
                mean_intensity: means,
            };
            let low = restrict(&est, l1);
            let high = restrict(&est, l1 + dl);
            prop_assert!(high.selected_groups.iter().all(|g| low.is_selected(*g)));
        }

        #[test]
        fn modal_partition_ignores_raw_labels(labels in prop::collection::vec(prop::collection::vec(0usize..3, 5), 1..12), perm_seed in 0usize..6) {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let perm = perms[perm_seed];
            let mk = |ls: &Vec<usize>| rec(&Partition::from_labels(ls).labels, &[1.0; 3]);
            let plain = raw_trace(labels.iter().map(mk).collect());
            let shuffled = raw_trace(labels.iter().map(|ls| {
                let relabeled: Vec<usize> = Partition::from_labels(ls).labels.iter().map(|&l| perm[l]).collect();
                rec(&relabeled, &[1.0; 3])
            }).collect());
            let a = modal_partition(&plain).unwrap();
            let b = modal_partition(&shuffled).unwrap();
            prop_assert_eq!(a.partition, b.partition);
            prop_assert_eq!(a.frequency, b.frequency);
        }
    }
}
