//! Shared helpers for the integration suites: date arithmetic, random
//! timeline generation and independent brute-force oracles.

#![allow(dead_code)]

use chrono::{NaiveDate, TimeDelta};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rapid_core::detect::TestKind;
use rapid_core::timeline::ClientTimeline;

pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
}

pub fn day(n: i64) -> NaiveDate {
    epoch() + TimeDelta::days(n)
}

pub fn day_num(d: NaiveDate) -> i64 {
    (d - epoch()).num_days()
}

/// Random strictly increasing timeline with up to `max_stays` stays.
/// Gap mix leans short so episodes of several stays actually form, with
/// occasional episode-breaking gaps.
pub fn random_timeline(rng: &mut ChaCha8Rng, id: &str, max_stays: usize) -> ClientTimeline {
    let n = rng.gen_range(1..=max_stays);
    let mut current = rng.gen_range(0..1000i64);
    let mut days = Vec::with_capacity(n);
    days.push(current);
    for _ in 1..n {
        let gap = match rng.gen_range(0..10) {
            0..=5 => rng.gen_range(1..=4),
            6..=7 => rng.gen_range(5..=29),
            _ => rng.gen_range(30..=90),
        };
        current += gap;
        days.push(current);
    }
    ClientTimeline::new(id.to_string(), days.into_iter().map(day).collect()).unwrap()
}

pub fn day_numbers(timeline: &ClientTimeline) -> Vec<i64> {
    timeline.stay_dates().iter().map(|&d| day_num(d)).collect()
}

/// Naive segment count over a sorted day slice: one segment plus one per
/// episode-breaking gap.
pub fn naive_segments(days: &[i64], gap_days: i64) -> usize {
    if days.is_empty() {
        return 0;
    }
    1 + days.windows(2).filter(|w| w[1] - w[0] >= gap_days).count()
}

/// Brute-force window test oracle: slides the backward window over every
/// calendar day from the first to the last stay and re-counts the window
/// content from scratch.
pub fn oracle_window_test(
    days: &[i64],
    kind: TestKind,
    window_days: i64,
    threshold: usize,
    gap_days: i64,
) -> Option<i64> {
    let first = days[0];
    let last = *days.last().unwrap();
    for d in first..=last {
        let lo = days.partition_point(|&x| x < d - window_days + 1);
        let hi = days.partition_point(|&x| x <= d);
        let in_window = &days[lo..hi];
        let value = match kind {
            TestKind::StayCount => in_window.len(),
            TestKind::EpisodeCount => naive_segments(in_window, gap_days),
        };
        if value >= threshold {
            return Some(d);
        }
    }
    None
}

/// The 35 grid tests: 15 stay-count cells and 20 episode-count cells.
pub fn all_grid_tests() -> Vec<rapid_core::detect::WindowTest> {
    use rapid_core::search::{expand_grid, GridSpec};
    let mut tests = expand_grid(&GridSpec::default_chronic()).unwrap();
    tests.extend(expand_grid(&GridSpec::default_episodic()).unwrap());
    tests
}
