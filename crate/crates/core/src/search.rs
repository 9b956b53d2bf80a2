//! Window/threshold grid enumeration and ranking by referral impact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{eval_window_test, TestKind, WindowTest};
use crate::error::{Error, Result};
use crate::impact::{aggregate_impact, referral_impact, ReferralOutcome};
use crate::timeline::{ClientTimeline, GapPolicy};

/// Ranking objective for a grid run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    AvgStaysSaved,
    AvgTenureReduction,
}

/// Thresholds are window fractions for stay grids and absolute counts
/// for episode grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Thresholds {
    Fractions(Vec<f64>),
    Counts(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: TestKind,
    pub windows: Vec<i64>,
    pub thresholds: Thresholds,
    pub objective: Objective,
}

impl GridSpec {
    /// Defaults mirroring the chronic sweep: windows
    /// {30, 90, 180, 365, 547} and stay fractions {0.5, 0.75, 0.9}.
    pub fn default_chronic() -> Self {
        GridSpec {
            kind: TestKind::StayCount,
            windows: vec![30, 90, 180, 365, 547],
            thresholds: Thresholds::Fractions(vec![0.5, 0.75, 0.9]),
            objective: Objective::AvgStaysSaved,
        }
    }

    /// Defaults mirroring the episodic sweep: same windows, episode
    /// counts {2, 3, 4, 5}.
    pub fn default_episodic() -> Self {
        GridSpec {
            kind: TestKind::EpisodeCount,
            windows: vec![30, 90, 180, 365, 547],
            thresholds: Thresholds::Counts(vec![2, 3, 4, 5]),
            objective: Objective::AvgTenureReduction,
        }
    }
}

/// Expands a grid spec into window tests, window-major. Stay-count
/// thresholds are floor(window × fraction).
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<WindowTest>> {
    if spec.windows.is_empty() {
        return Err(Error::config("grid needs at least one window"));
    }
    if spec.windows.iter().any(|&w| w < 1) {
        return Err(Error::config("grid windows must be positive"));
    }
    let mut tests = Vec::new();
    match &spec.thresholds {
        Thresholds::Fractions(fractions) => {
            if spec.kind != TestKind::StayCount {
                return Err(Error::config("fraction thresholds require a stay-count grid"));
            }
            if fractions.is_empty() {
                return Err(Error::config("grid needs at least one threshold"));
            }
            for &window in &spec.windows {
                for &fraction in fractions {
                    if !(fraction > 0.0 && fraction <= 1.0) {
                        return Err(Error::config(format!(
                            "stay fraction {fraction} outside (0, 1]"
                        )));
                    }
                    let threshold = (window as f64 * fraction).floor() as usize;
                    if threshold == 0 {
                        return Err(Error::config(format!(
                            "window {window} × fraction {fraction} floors to threshold 0"
                        )));
                    }
                    tests.push(WindowTest {
                        kind: TestKind::StayCount,
                        window_days: window,
                        threshold,
                    });
                }
            }
        }
        Thresholds::Counts(counts) => {
            if counts.is_empty() {
                return Err(Error::config("grid needs at least one threshold"));
            }
            for &window in &spec.windows {
                for &count in counts {
                    if count == 0 {
                        return Err(Error::config("episode threshold 0 is degenerate"));
                    }
                    tests.push(WindowTest {
                        kind: spec.kind,
                        window_days: window,
                        threshold: count,
                    });
                }
            }
        }
    }
    Ok(tests)
}

/// One ranked grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub window_days: i64,
    pub threshold: usize,
    pub identified: usize,
    pub identified_fraction: f64,
    pub objective_value: Option<f64>,
    pub median_time_to_id_days: Option<f64>,
}

/// Evaluates every grid cell over the population and ranks rows by the
/// objective, descending; rows with no identified clients sort last.
/// Ties break toward the smaller window, then the smaller threshold.
pub fn run_grid(
    timelines: &[&ClientTimeline],
    spec: &GridSpec,
    policy: GapPolicy,
) -> Result<Vec<GridRow>> {
    let tests = expand_grid(spec)?;
    let mut rows = tests
        .par_iter()
        .map(|test| evaluate_cell(timelines, test, spec.objective, policy))
        .collect::<Result<Vec<GridRow>>>()?;

    rows.sort_by(|a, b| {
        match (b.objective_value, a.objective_value) {
            (Some(x), Some(y)) => x
                .partial_cmp(&y)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.window_days.cmp(&b.window_days))
                .then(a.threshold.cmp(&b.threshold)),
            (Some(_), None) => std::cmp::Ordering::Greater,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (None, None) => a
                .window_days
                .cmp(&b.window_days)
                .then(a.threshold.cmp(&b.threshold)),
        }
    });
    Ok(rows)
}

fn evaluate_cell(
    timelines: &[&ClientTimeline],
    test: &WindowTest,
    objective: Objective,
    policy: GapPolicy,
) -> Result<GridRow> {
    let mut outcomes: Vec<ReferralOutcome> = Vec::new();
    for timeline in timelines {
        if let Some(date) = eval_window_test(timeline, test, policy)? {
            outcomes.push(referral_impact(timeline, date)?);
        }
    }
    let summary = aggregate_impact(&outcomes, timelines.len());
    let objective_value = match objective {
        Objective::AvgStaysSaved => summary.mean_stays_saved,
        Objective::AvgTenureReduction => summary.mean_tenure_reduction_days,
    };
    Ok(GridRow {
        window_days: test.window_days,
        threshold: test.threshold,
        identified: summary.identified,
        identified_fraction: summary.identified_fraction,
        objective_value,
        median_time_to_id_days: summary.median_time_to_id_days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Days, NaiveDate};

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 1, 1).unwrap() + Days::new(n)
    }

    fn timeline(id: &str, days: &[u64]) -> ClientTimeline {
        ClientTimeline::new(id.into(), days.iter().map(|&n| day(n)).collect()).unwrap()
    }

    #[test]
    fn single_cell_expansion() {
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![90],
            thresholds: Thresholds::Fractions(vec![0.9]),
            objective: Objective::AvgStaysSaved,
        };
        let tests = expand_grid(&spec).unwrap();
        assert_eq!(
            tests,
            vec![WindowTest {
                kind: TestKind::StayCount,
                window_days: 90,
                threshold: 81
            }]
        );
    }

    #[test]
    fn fraction_conversion_floors() {
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![547],
            thresholds: Thresholds::Fractions(vec![0.9]),
            objective: Objective::AvgStaysSaved,
        };
        // 547 × 0.9 = 492.3 → 492
        assert_eq!(expand_grid(&spec).unwrap()[0].threshold, 492);
    }

    #[test]
    fn default_chronic_grid_has_fifteen_cells() {
        assert_eq!(expand_grid(&GridSpec::default_chronic()).unwrap().len(), 15);
        assert_eq!(expand_grid(&GridSpec::default_episodic()).unwrap().len(), 20);
    }

    #[test]
    fn degenerate_floored_threshold_is_rejected() {
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![1],
            thresholds: Thresholds::Fractions(vec![0.5]),
            objective: Objective::AvgStaysSaved,
        };
        assert!(expand_grid(&spec).is_err());
    }

    #[test]
    fn unsatisfiable_grid_rows_rank_last() {
        let tl = timeline("c", &[0]);
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![30, 90],
            thresholds: Thresholds::Fractions(vec![0.9]),
            objective: Objective::AvgStaysSaved,
        };
        let rows = run_grid(&[&tl], &spec, GapPolicy::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.identified == 0));
        assert!(rows.iter().all(|r| r.objective_value.is_none()));
        // Tie among empty rows breaks toward the smaller window.
        assert_eq!(rows[0].window_days, 30);
    }

    #[test]
    fn higher_objective_ranks_first() {
        // Client with 120 daily stays: the 30/15 test refers on day 15
        // (105 saved) and the 90/81 test on day 81 (39 saved).
        let days: Vec<u64> = (0..120).collect();
        let tl = timeline("c", &days);
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![30, 90],
            thresholds: Thresholds::Fractions(vec![0.5, 0.9]),
            objective: Objective::AvgStaysSaved,
        };
        let rows = run_grid(&[&tl], &spec, GapPolicy::default()).unwrap();
        let objectives: Vec<f64> = rows.iter().map(|r| r.objective_value.unwrap()).collect();
        assert!(objectives.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(rows[0].window_days, 30);
        assert_eq!(rows[0].threshold, 15);
    }

    #[test]
    fn raising_stay_threshold_never_adds_clients() {
        let days: Vec<u64> = (0..50).collect();
        let tl = timeline("c", &days);
        let other = timeline("d", &[0, 40, 80]);
        let population = [&tl, &other];
        let spec = GridSpec {
            kind: TestKind::StayCount,
            windows: vec![90],
            thresholds: Thresholds::Fractions(vec![0.25, 0.5, 0.75, 0.9]),
            objective: Objective::AvgStaysSaved,
        };
        let tests = expand_grid(&spec).unwrap();
        let mut counts = Vec::new();
        for test in &tests {
            let n = population
                .iter()
                .filter(|t| {
                    eval_window_test(t, test, GapPolicy::default())
                        .unwrap()
                        .is_some()
                })
                .count();
            counts.push(n);
        }
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }
}
