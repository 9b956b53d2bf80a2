//! Per-client stay timelines: episode segmentation, tenure, usage
//! percentage and inter-episode gaps.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A client's strictly increasing sequence of distinct stay dates.
/// The unit of all downstream analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientTimeline {
    client_id: String,
    stay_dates: Vec<NaiveDate>,
}

impl ClientTimeline {
    pub fn new(client_id: String, stay_dates: Vec<NaiveDate>) -> Result<Self> {
        if client_id.is_empty() {
            return Err(Error::contract("client_id must be non-empty"));
        }
        if stay_dates.is_empty() {
            return Err(Error::contract("a timeline needs at least one stay"));
        }
        if stay_dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract(format!(
                "stay dates for {client_id} must be strictly increasing"
            )));
        }
        Ok(ClientTimeline {
            client_id,
            stay_dates,
        })
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn stay_dates(&self) -> &[NaiveDate] {
        &self.stay_dates
    }

    pub fn stay_count(&self) -> usize {
        self.stay_dates.len()
    }

    pub fn first_stay(&self) -> NaiveDate {
        self.stay_dates[0]
    }

    pub fn last_stay(&self) -> NaiveDate {
        *self.stay_dates.last().expect("timeline is nonempty")
    }

    /// Inclusive day span from first to last stay; a single-stay client
    /// has tenure 1.
    pub fn tenure_days(&self) -> i64 {
        (self.last_stay() - self.first_stay()).num_days() + 1
    }

    /// Total stays divided by tenure, in (0, 1].
    pub fn usage_percentage(&self) -> f64 {
        self.stay_count() as f64 / self.tenure_days() as f64
    }
}

/// A maximal run of stays whose consecutive gaps are all under the gap
/// policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub stay_count: usize,
}

impl Episode {
    /// Inclusive day span, (end − start) + 1.
    pub fn span_days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Consecutive stays with a date difference under `gap_days` belong to
/// the same episode; a difference of exactly `gap_days` starts a new one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPolicy {
    gap_days: i64,
}

pub const DEFAULT_GAP_DAYS: i64 = 30;

impl Default for GapPolicy {
    fn default() -> Self {
        GapPolicy {
            gap_days: DEFAULT_GAP_DAYS,
        }
    }
}

impl GapPolicy {
    pub fn new(gap_days: i64) -> Result<Self> {
        if gap_days < 1 {
            return Err(Error::config("gap_days must be at least 1"));
        }
        Ok(GapPolicy { gap_days })
    }

    pub fn gap_days(&self) -> i64 {
        self.gap_days
    }

    pub fn same_episode(&self, prev: NaiveDate, next: NaiveDate) -> bool {
        (next - prev).num_days() < self.gap_days
    }
}

/// Splits a timeline into chronological episodes that partition its stays.
pub fn segment_episodes(timeline: &ClientTimeline, policy: GapPolicy) -> Vec<Episode> {
    segment_dates(timeline.stay_dates(), policy)
}

/// Episode segmentation over any strictly increasing date slice; also
/// used for window-restricted episode counting.
pub fn segment_dates(dates: &[NaiveDate], policy: GapPolicy) -> Vec<Episode> {
    let mut episodes = Vec::new();
    let Some(&first) = dates.first() else {
        return episodes;
    };
    let mut start = first;
    let mut prev = first;
    let mut count = 1usize;
    for &date in &dates[1..] {
        if policy.same_episode(prev, date) {
            count += 1;
        } else {
            episodes.push(Episode {
                start,
                end: prev,
                stay_count: count,
            });
            start = date;
            count = 1;
        }
        prev = date;
    }
    episodes.push(Episode {
        start,
        end: prev,
        stay_count: count,
    });
    episodes
}

/// Gaps between consecutive episodes, start(next) − end(prev) in days.
/// Empty for a single episode.
pub fn inter_episode_gaps(episodes: &[Episode]) -> Vec<i64> {
    episodes
        .windows(2)
        .map(|pair| (pair[1].start - pair[0].end).num_days())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 1, 1).unwrap() + chrono::Days::new(n as u64)
    }

    fn timeline(days: &[i64]) -> ClientTimeline {
        ClientTimeline::new("c".into(), days.iter().map(|&n| day(n)).collect()).unwrap()
    }

    #[test]
    fn april_client_is_one_episode() {
        // Stays Apr 10, 12, 13, 20, 22, 30: all gaps under 30 days.
        let apr = |d| NaiveDate::from_ymd_opt(2012, 4, d).unwrap();
        let tl = ClientTimeline::new(
            "c".into(),
            vec![apr(10), apr(12), apr(13), apr(20), apr(22), apr(30)],
        )
        .unwrap();
        let eps = segment_episodes(&tl, GapPolicy::default());
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].start, apr(10));
        assert_eq!(eps[0].end, apr(30));
        assert_eq!(eps[0].stay_count, 6);
        assert_eq!(tl.tenure_days(), 21);
        assert!((tl.usage_percentage() - 6.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn gap_of_exactly_thirty_splits() {
        let eps = segment_episodes(&timeline(&[0, 30]), GapPolicy::default());
        assert_eq!(eps.len(), 2);
    }

    #[test]
    fn gap_of_twenty_nine_does_not_split() {
        let eps = segment_episodes(&timeline(&[0, 29]), GapPolicy::default());
        assert_eq!(eps.len(), 1);
    }

    #[test]
    fn single_stay_client() {
        let tl = timeline(&[5]);
        assert_eq!(tl.tenure_days(), 1);
        assert_eq!(tl.usage_percentage(), 1.0);
        let eps = segment_episodes(&tl, GapPolicy::default());
        assert_eq!(eps.len(), 1);
        assert!(inter_episode_gaps(&eps).is_empty());
    }

    #[test]
    fn inter_episode_gap_is_start_minus_end() {
        let eps = segment_episodes(&timeline(&[0, 10, 40]), GapPolicy::default());
        assert_eq!(eps.len(), 2);
        assert_eq!(inter_episode_gaps(&eps), vec![30]);
    }

    #[test]
    fn episodes_partition_stays() {
        let tl = timeline(&[0, 1, 45, 46, 47, 120]);
        let eps = segment_episodes(&tl, GapPolicy::default());
        let total: usize = eps.iter().map(|e| e.stay_count).sum();
        assert_eq!(total, tl.stay_count());
        for pair in eps.windows(2) {
            assert!(pair[0].end < pair[1].start);
        }
    }

    #[test]
    fn non_increasing_dates_rejected() {
        let err = ClientTimeline::new("c".into(), vec![day(3), day(3)]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
