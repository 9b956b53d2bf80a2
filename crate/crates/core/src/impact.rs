//! Referral impact metrics, cohort summary statistics, referral load and
//! the under-the-radar analysis.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{self, PercentileMethod};
use crate::timeline::{inter_episode_gaps, segment_episodes, ClientTimeline, GapPolicy};

/// Mean Gregorian month length in days.
pub const DAYS_PER_MONTH: f64 = 30.44;

/// Outcome of a perfect housing referral: the client leaves shelter on
/// the referral date and every later stay is saved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferralOutcome {
    pub client_id: String,
    pub referral_date: NaiveDate,
    pub stays_saved: usize,
    pub tenure_reduction_days: i64,
    pub time_to_id_days: i64,
}

/// Computes stays saved, tenure reduction and time to identification for
/// a referral on one of the client's stay dates.
pub fn referral_impact(timeline: &ClientTimeline, referral_date: NaiveDate) -> Result<ReferralOutcome> {
    if !timeline.stay_dates().contains(&referral_date) {
        return Err(Error::contract(format!(
            "referral date {referral_date} is not a stay date of client {}",
            timeline.client_id()
        )));
    }
    let stays_saved = timeline
        .stay_dates()
        .iter()
        .filter(|&&d| d > referral_date)
        .count();
    Ok(ReferralOutcome {
        client_id: timeline.client_id().to_string(),
        referral_date,
        stays_saved,
        tenure_reduction_days: (timeline.last_stay() - referral_date).num_days(),
        time_to_id_days: (referral_date - timeline.first_stay()).num_days(),
    })
}

/// Population-level aggregation of referral outcomes. Averages are
/// absent when no client was identified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactSummary {
    pub identified: usize,
    pub population: usize,
    pub identified_fraction: f64,
    pub mean_stays_saved: Option<f64>,
    pub mean_tenure_reduction_days: Option<f64>,
    pub mean_time_to_id_days: Option<f64>,
    pub median_time_to_id_days: Option<f64>,
}

pub fn aggregate_impact(outcomes: &[ReferralOutcome], population: usize) -> ImpactSummary {
    let identified = outcomes.len();
    let stays: Vec<f64> = outcomes.iter().map(|o| o.stays_saved as f64).collect();
    let tenure: Vec<f64> = outcomes
        .iter()
        .map(|o| o.tenure_reduction_days as f64)
        .collect();
    let times: Vec<f64> = outcomes.iter().map(|o| o.time_to_id_days as f64).collect();
    ImpactSummary {
        identified,
        population,
        identified_fraction: if population == 0 {
            0.0
        } else {
            identified as f64 / population as f64
        },
        mean_stays_saved: stats::mean(&stays),
        mean_tenure_reduction_days: stats::mean(&tenure),
        mean_time_to_id_days: stats::mean(&times),
        median_time_to_id_days: stats::median(&times),
    }
}

/// Mean/median/90th-percentile for one cohort metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
}

/// Summary of a flagged cohort in the four standard metrics, plus the
/// cohort's share of the full population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStats {
    pub total_stays: Option<MetricSummary>,
    pub total_episodes: Option<MetricSummary>,
    pub tenure_days: Option<MetricSummary>,
    pub usage_percentage: Option<MetricSummary>,
    pub coverage_count: usize,
    pub population: usize,
    pub coverage_fraction: f64,
}

fn summarize(values: &[f64], method: PercentileMethod) -> Option<MetricSummary> {
    Some(MetricSummary {
        mean: stats::mean(values)?,
        median: stats::median(values)?,
        p90: stats::percentile(values, 0.9, method)?,
    })
}

pub fn cohort_stats<'a, I>(
    cohort: I,
    population: usize,
    policy: GapPolicy,
    method: PercentileMethod,
) -> CohortStats
where
    I: IntoIterator<Item = &'a ClientTimeline>,
{
    let mut stays = Vec::new();
    let mut episodes = Vec::new();
    let mut tenure = Vec::new();
    let mut usage = Vec::new();
    for timeline in cohort {
        stays.push(timeline.stay_count() as f64);
        episodes.push(segment_episodes(timeline, policy).len() as f64);
        tenure.push(timeline.tenure_days() as f64);
        usage.push(timeline.usage_percentage());
    }
    let coverage_count = stays.len();
    CohortStats {
        total_stays: summarize(&stays, method),
        total_episodes: summarize(&episodes, method),
        tenure_days: summarize(&tenure, method),
        usage_percentage: summarize(&usage, method),
        coverage_count,
        population,
        coverage_fraction: if population == 0 {
            0.0
        } else {
            coverage_count as f64 / population as f64
        },
    }
}

/// Referrals per month over a span in days. The span defaults to the
/// first-to-last referral date when not supplied.
pub fn referrals_per_month(outcomes: &[ReferralOutcome], span_days: Option<f64>) -> Result<f64> {
    if outcomes.is_empty() {
        return Ok(0.0);
    }
    let span_days = match span_days {
        Some(days) => days,
        None => {
            let first = outcomes.iter().map(|o| o.referral_date).min().unwrap();
            let last = outcomes.iter().map(|o| o.referral_date).max().unwrap();
            (last - first).num_days() as f64
        }
    };
    if span_days <= 0.0 {
        return Err(Error::config(
            "observation span must be positive to compute a monthly referral rate",
        ));
    }
    Ok(outcomes.len() as f64 / (span_days / DAYS_PER_MONTH))
}

/// Statistics of the unflagged population plus its long-tenure tail:
/// clients at or above the unflagged 90th-percentile tenure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnderRadarReport {
    pub unflagged: CohortStats,
    pub p90_tenure_days: Option<f64>,
    pub long_tenure_count: usize,
    pub long_tenure_fraction: f64,
    pub long_tenure_mean_inter_episode_gap: Option<f64>,
}

pub fn under_radar_report<'a, I>(
    timelines: I,
    flagged: &BTreeSet<String>,
    population: usize,
    policy: GapPolicy,
    method: PercentileMethod,
) -> UnderRadarReport
where
    I: IntoIterator<Item = &'a ClientTimeline>,
{
    let unflagged: Vec<&ClientTimeline> = timelines
        .into_iter()
        .filter(|t| !flagged.contains(t.client_id()))
        .collect();
    let stats = cohort_stats(unflagged.iter().copied(), population, policy, method);
    let p90_tenure = stats.tenure_days.map(|s| s.p90);

    let (long_tenure_count, gap_mean) = match p90_tenure {
        None => (0, None),
        Some(p90) => {
            let tail: Vec<&&ClientTimeline> = unflagged
                .iter()
                .filter(|t| t.tenure_days() as f64 >= p90)
                .collect();
            let gaps: Vec<f64> = tail
                .iter()
                .flat_map(|t| inter_episode_gaps(&segment_episodes(t, policy)))
                .map(|g| g as f64)
                .collect();
            (tail.len(), crate::stats::mean(&gaps))
        }
    };

    UnderRadarReport {
        unflagged: stats,
        p90_tenure_days: p90_tenure,
        long_tenure_count,
        long_tenure_fraction: if population == 0 {
            0.0
        } else {
            long_tenure_count as f64 / population as f64
        },
        long_tenure_mean_inter_episode_gap: gap_mean,
    }
}
