//! Population-structure analysis: z-score standardization, k-means with
//! k-means++ seeding, archetype labeling and Hotelling's T²
//! centroid-separation tests.

mod hotelling;
mod kmeans;
pub mod special;

pub use hotelling::{hotelling_t2, SeparationTest};
pub use kmeans::{kmeans, KMeansFit};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::timeline::{segment_episodes, ClientTimeline, GapPolicy};

/// (total stays, total episodes) for one client.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub client_id: String,
    pub total_stays: usize,
    pub total_episodes: usize,
}

pub fn features_from_timelines<'a, I>(timelines: I, policy: GapPolicy) -> Vec<FeatureVector>
where
    I: IntoIterator<Item = &'a ClientTimeline>,
{
    timelines
        .into_iter()
        .map(|t| FeatureVector {
            client_id: t.client_id().to_string(),
            total_stays: t.stay_count(),
            total_episodes: segment_episodes(t, policy).len(),
        })
        .collect()
}

/// Per-dimension scaling recovered during standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

/// Z-scores each dimension to sample mean 0 and sample standard
/// deviation 1 (divisor n − 1).
pub fn standardize(points: &[[f64; 2]]) -> Result<(Vec<[f64; 2]>, [Scaling; 2])> {
    if points.len() < 2 {
        return Err(Error::config("standardization needs at least 2 points"));
    }
    let n = points.len() as f64;
    let mut scalings = [Scaling { mean: 0.0, sd: 0.0 }; 2];
    for dim in 0..2 {
        let mean = points.iter().map(|p| p[dim]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            return Err(Error::Numeric(format!(
                "dimension {dim} has zero variance and cannot be standardized"
            )));
        }
        scalings[dim] = Scaling {
            mean,
            sd: var.sqrt(),
        };
    }
    let standardized = points
        .iter()
        .map(|p| {
            [
                (p[0] - scalings[0].mean) / scalings[0].sd,
                (p[1] - scalings[1].mean) / scalings[1].sd,
            ]
        })
        .collect();
    Ok((standardized, scalings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArchetypeLabel {
    Transitional,
    Episodic,
    Chronic,
}

impl std::fmt::Display for ArchetypeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArchetypeLabel::Transitional => "transitional",
            ArchetypeLabel::Episodic => "episodic",
            ArchetypeLabel::Chronic => "chronic",
        };
        f.write_str(s)
    }
}

/// Per-cluster summary in unstandardized units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub label: Option<ArchetypeLabel>,
    pub size: usize,
    pub population_fraction: f64,
    pub mean_total_stays: f64,
    pub mean_total_episodes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Centroids in standardized (stays, episodes) space.
    pub centroids: Vec<[f64; 2]>,
    /// Cluster index per input feature vector, in input order.
    pub assignments: Vec<usize>,
    pub clusters: Vec<ClusterSummary>,
    pub scalings: [Scaling; 2],
    pub wcss: f64,
}

/// Assigns archetype labels for k = 3: the cluster with the highest mean
/// total stays is chronic; of the remaining two, the one with the higher
/// mean total episodes is episodic; the last is transitional. For any
/// other k the labels stay unset.
pub fn label_clusters(summaries: &mut [ClusterSummary]) {
    if summaries.len() != 3 {
        return;
    }
    let chronic = (0..3)
        .max_by(|&a, &b| {
            summaries[a]
                .mean_total_stays
                .total_cmp(&summaries[b].mean_total_stays)
        })
        .unwrap();
    let rest: Vec<usize> = (0..3).filter(|&i| i != chronic).collect();
    let episodic = if summaries[rest[0]].mean_total_episodes >= summaries[rest[1]].mean_total_episodes
    {
        rest[0]
    } else {
        rest[1]
    };
    for (i, summary) in summaries.iter_mut().enumerate() {
        summary.label = Some(if i == chronic {
            ArchetypeLabel::Chronic
        } else if i == episodic {
            ArchetypeLabel::Episodic
        } else {
            ArchetypeLabel::Transitional
        });
    }
}

/// End-to-end §-style pipeline: standardize features, run seeded
/// k-means, summarize clusters in raw units and (for k = 3) label the
/// archetypes.
pub fn cluster_population(
    features: &[FeatureVector],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel> {
    let raw: Vec<[f64; 2]> = features
        .iter()
        .map(|f| [f.total_stays as f64, f.total_episodes as f64])
        .collect();
    let (standardized, scalings) = standardize(&raw)?;
    let fit = kmeans(&standardized, k, seed, restarts)?;

    let mut clusters: Vec<ClusterSummary> = (0..k)
        .map(|_| ClusterSummary {
            label: None,
            size: 0,
            population_fraction: 0.0,
            mean_total_stays: 0.0,
            mean_total_episodes: 0.0,
        })
        .collect();
    for (point, &cluster) in raw.iter().zip(&fit.assignments) {
        clusters[cluster].size += 1;
        clusters[cluster].mean_total_stays += point[0];
        clusters[cluster].mean_total_episodes += point[1];
    }
    for summary in &mut clusters {
        if summary.size > 0 {
            summary.mean_total_stays /= summary.size as f64;
            summary.mean_total_episodes /= summary.size as f64;
        }
        summary.population_fraction = summary.size as f64 / features.len() as f64;
    }
    label_clusters(&mut clusters);

    Ok(ClusterModel {
        k,
        centroids: fit.centroids,
        assignments: fit.assignments,
        clusters,
        scalings,
        wcss: fit.wcss,
    })
}
