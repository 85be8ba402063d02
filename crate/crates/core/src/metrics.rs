//! Readouts used by the experiments: mean-opinion histograms, network
//! clusters, polarization and bimodality indices.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::euclidean;
use crate::scenario::{InteractionRadius, OMEGA_LEN, OMEGA_MAX, OMEGA_MIN};
use crate::state::ParticleState;
use crate::transport::{reconstruct, total_variation, wasserstein1};

/// Opinions with `|x|` at least this count as polarized.
pub const POLARIZATION_THRESHOLD: f64 = 0.75;

/// Fraction of agents required on each side of a bimodality gap.
pub const BIMODAL_SIDE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Uniform-bin histogram of `values` over [-1, 1]; 1 falls in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    assert!(bins >= 1);
    let width = OMEGA_LEN / bins as f64;
    let edges = (0..=bins).map(|b| OMEGA_MIN + b as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - OMEGA_MIN) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

pub fn mean_opinion_histogram(state: &ParticleState, bins: usize) -> Histogram {
    histogram(&state.means(), bins)
}

/// Connected components of the radius graph on the nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clusters {
    /// Smallest member index of each agent's component.
    pub labels: Vec<usize>,
    /// Components ordered by label, members ascending.
    pub members: Vec<Vec<usize>>,
}

impl Clusters {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Clusters of nodes joined by edges `|a_i - a_j| <= radius`.
pub fn clusters_of(nodes: &[&[f64]], radius: InteractionRadius) -> Clusters {
    let m = nodes.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            if radius.contains(euclidean(nodes[i], nodes[j])) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                // the smaller index becomes the root, so roots are minimal members
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let labels: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for (i, &l) in labels.iter().enumerate() {
        if slot[l] == usize::MAX {
            slot[l] = members.len();
            members.push(Vec::new());
        }
        members[slot[l]].push(i);
    }
    Clusters { labels, members }
}

pub fn network_clusters(state: &ParticleState, radius: InteractionRadius) -> Clusters {
    let nodes: Vec<&[f64]> = (0..state.n_agents()).map(|i| state.node(i)).collect();
    clusters_of(&nodes, radius)
}

/// Share of the total opinion mass with `|x| >= 0.75`, from the reconstructions.
pub fn polarization_index(state: &ParticleState) -> Result<f64> {
    let mut polarized = 0.0;
    for i in 0..state.n_agents() {
        let d = reconstruct(state.particles(i), state.sigma_n(i))?;
        polarized += d.mass_in(OMEGA_MIN, -POLARIZATION_THRESHOLD) + d.mass_in(POLARIZATION_THRESHOLD, OMEGA_MAX);
    }
    let total: f64 = state.masses().iter().sum();
    Ok((polarized / total).clamp(0.0, 1.0))
}

/// Largest gap between consecutive sorted means that leaves at least 20% of
/// the agents on each side, or 0 when no such gap exceeds the median gap.
pub fn bimodality_gap(means: &[f64]) -> f64 {
    let m = means.len();
    if m < 2 {
        return 0.0;
    }
    let mut sorted = means.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let mut ordered = gaps.clone();
    ordered.sort_by(f64::total_cmp);
    let g = ordered.len();
    let median = if g % 2 == 1 {
        ordered[g / 2]
    } else {
        0.5 * (ordered[g / 2 - 1] + ordered[g / 2])
    };
    let need = BIMODAL_SIDE_FRACTION * m as f64;
    let best = gaps
        .iter()
        .enumerate()
        .filter(|(k, _)| (k + 1) as f64 >= need && (m - k - 1) as f64 >= need)
        .map(|(_, &gap)| gap)
        .fold(0.0, f64::max);
    // equal gaps computed from rounded differences must not count as larger
    if best > median + 1e-12 * median.abs().max(1e-300) {
        best
    } else {
        0.0
    }
}

/// Mean over clusters of the sample standard deviation of the members' mean
/// opinions; singleton clusters contribute 0.
pub fn cluster_opinion_spread(means: &[f64], clusters: &Clusters) -> f64 {
    if clusters.is_empty() {
        return 0.0;
    }
    let sum: f64 = clusters
        .members
        .iter()
        .map(|c| {
            if c.len() < 2 {
                return 0.0;
            }
            let n = c.len() as f64;
            let mean = c.iter().map(|&i| means[i]).sum::<f64>() / n;
            let var = c.iter().map(|&i| (means[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        })
        .sum();
    sum / clusters.len() as f64
}

/// All readouts of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub t: f64,
    pub mean_opinions: Vec<f64>,
    pub histogram: Histogram,
    pub n_clusters: usize,
    pub cluster_opinion_spread: f64,
    pub polarization_index: f64,
    pub bimodality_gap: f64,
    pub total_variation: Vec<f64>,
    pub w1_to_initial: Vec<f64>,
}

impl MetricsRecord {
    pub fn compute(state: &ParticleState, initial: &ParticleState, radius: InteractionRadius, bins: usize) -> Result<Self> {
        let means = state.means();
        let clusters = network_clusters(state, radius);
        let mut tv = Vec::with_capacity(state.n_agents());
        let mut w1 = Vec::with_capacity(state.n_agents());
        for i in 0..state.n_agents() {
            let d = reconstruct(state.particles(i), state.sigma_n(i))?;
            let d0 = reconstruct(initial.particles(i), initial.sigma_n(i))?;
            tv.push(total_variation(&d));
            w1.push(wasserstein1(&d, &d0)?);
        }
        Ok(MetricsRecord {
            t: state.t,
            histogram: histogram(&means, bins),
            n_clusters: clusters.len(),
            cluster_opinion_spread: cluster_opinion_spread(&means, &clusters),
            polarization_index: polarization_index(state)?,
            bimodality_gap: bimodality_gap(&means),
            total_variation: tv,
            w1_to_initial: w1,
            mean_opinions: means,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state_with(rows: Vec<Vec<f64>>, nodes: Vec<Vec<f64>>) -> ParticleState {
        let m = rows.len();
        ParticleState::new(0.0, rows, nodes, vec![1.0; m])
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0.1; 7], 10);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total(), 7);
        let h = histogram(&[-1.0, 1.0, 0.0, -0.5], 4);
        assert_eq!(h.counts, vec![1, 1, 1, 1]);
        assert_eq!(h.edges.len(), 5);
    }

    #[test]
    fn clusters_of_chain_and_extremes() {
        let nodes: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let refs: Vec<&[f64]> = nodes.iter().map(|v| v.as_slice()).collect();
        assert_eq!(clusters_of(&refs, InteractionRadius::Finite(1.0)).len(), 1);
        assert_eq!(clusters_of(&refs, InteractionRadius::Finite(1e-9)).len(), 3);
        assert_eq!(clusters_of(&refs, InteractionRadius::Infinite).len(), 1);
    }

    #[test]
    fn cluster_labels_are_smallest_members() {
        let nodes: Vec<Vec<f64>> = vec![vec![5.0], vec![0.0], vec![5.5], vec![0.4]];
        let refs: Vec<&[f64]> = nodes.iter().map(|v| v.as_slice()).collect();
        let c = clusters_of(&refs, InteractionRadius::Finite(1.0));
        assert_eq!(c.labels, vec![0, 1, 0, 1]);
        assert_eq!(c.members, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn polarization_cases() {
        let center = state_with(vec![vec![-1.0, -0.75, -0.7, 0.7, 0.75, 1.0]], vec![vec![0.0]]);
        // uniform reconstruction pieces: mass 0.2 each; the outer two lie in the tails
        assert!((polarization_index(&center).unwrap() - 0.4).abs() < 1e-12);
        let uniform: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
        let s = state_with(vec![uniform], vec![vec![0.0]]);
        assert!((polarization_index(&s).unwrap() - 0.25).abs() < 1e-12);
        let extreme = state_with(vec![vec![-1.0, -0.8, 0.8, 1.0]], vec![vec![0.0]]);
        // the middle piece of mass 1/3 lies mostly inside
        let p = polarization_index(&extreme).unwrap();
        assert!((p - (2.0 / 3.0 + (1.0 / 3.0) * 0.1 / 1.6)).abs() < 1e-12);
    }

    #[test]
    fn bimodality_cases() {
        let mut two = vec![-0.5; 10];
        two.extend(vec![0.5; 10]);
        assert!((bimodality_gap(&two) - 1.0).abs() < 1e-12);
        let even: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
        assert_eq!(bimodality_gap(&even), 0.0);
        let lopsided = [-0.9, 0.1, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17, 0.18];
        assert!(bimodality_gap(&lopsided) < 0.5);
    }

    #[test]
    fn bimodality_of_two_gaussian_groups() {
        use statrs::distribution::{ContinuousCDF, Normal};
        // deterministic quantile draws from N(+-0.4, 0.05)
        let n = Normal::new(0.0, 0.05).unwrap();
        let mut means = Vec::new();
        for k in 0..20 {
            let z = n.inverse_cdf((k as f64 + 0.5) / 20.0);
            means.push(-0.4 + z);
            means.push(0.4 + z);
        }
        let gap = bimodality_gap(&means);
        // innermost draws sit at the 2.5% quantile of each group
        let inner = n.inverse_cdf(0.975);
        assert!((gap - (0.8 - 2.0 * inner)).abs() < 1e-12, "{gap}");
    }

    #[test]
    fn spread_cases() {
        let clusters = Clusters {
            labels: vec![0, 0, 2, 2],
            members: vec![vec![0, 1], vec![2, 3]],
        };
        let means = [0.1, 0.2, -0.3, -0.1];
        let sd = |a: f64, b: f64| ((a - b) * (a - b) / 2.0).sqrt();
        let expected = 0.5 * (sd(0.1, 0.2) + sd(-0.3, -0.1));
        assert!((cluster_opinion_spread(&means, &clusters) - expected).abs() < 1e-15);
        let single = Clusters {
            labels: vec![0, 1],
            members: vec![vec![0], vec![1]],
        };
        assert_eq!(cluster_opinion_spread(&[0.3, -0.2], &single), 0.0);
        let same = Clusters {
            labels: vec![0, 0, 0],
            members: vec![vec![0, 1, 2]],
        };
        assert!(cluster_opinion_spread(&[0.4, 0.4, 0.4], &same) < 1e-15);
    }

    proptest! {
        #[test]
        fn clusters_partition_agents(coords in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..30), r in 0.1f64..6.0) {
            let nodes: Vec<Vec<f64>> = coords.iter().map(|&(x, y)| vec![x, y]).collect();
            let refs: Vec<&[f64]> = nodes.iter().map(|v| v.as_slice()).collect();
            let c = clusters_of(&refs, InteractionRadius::Finite(r));
            let mut all: Vec<usize> = c.members.concat();
            all.sort();
            prop_assert_eq!(all, (0..nodes.len()).collect::<Vec<_>>());
            for (i, &l) in c.labels.iter().enumerate() {
                prop_assert!(l <= i);
                prop_assert_eq!(c.labels[l], l);
            }
        }

        #[test]
        fn polarization_is_reflection_and_relabel_invariant(raw in proptest::collection::vec(proptest::collection::vec(-0.99f64..0.99, 3), 1..6)) {
            let rows: Vec<Vec<f64>> = raw.iter().map(|r| {
                let mut v = r.clone();
                v.sort_by(f64::total_cmp);
                v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                let mut row = vec![-1.0];
                row.extend(v);
                row.push(1.0);
                row
            }).filter(|r| r.len() == 5).collect();
            prop_assume!(!rows.is_empty());
            let m = rows.len();
            let s = state_with(rows.clone(), vec![vec![0.0]; m]);
            let mirrored: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().rev().map(|x| -x).collect()).collect();
            let mut reversed = rows.clone();
            reversed.reverse();
            let p = polarization_index(&s).unwrap();
            let pm = polarization_index(&state_with(mirrored, vec![vec![0.0]; m])).unwrap();
            let pr = polarization_index(&state_with(reversed, vec![vec![0.0]; m])).unwrap();
            prop_assert!((p - pm).abs() < 1e-12);
            prop_assert!((p - pr).abs() < 1e-12);
        }

        #[test]
        fn histogram_total_is_agent_count(v in proptest::collection::vec(-1.0f64..=1.0, 1..50), bins in 2usize..30) {
            prop_assert_eq!(histogram(&v, bins).total(), v.len());
        }
    }
}
