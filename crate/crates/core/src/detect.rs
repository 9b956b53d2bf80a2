//! Windowed threshold tests and composite published definitions.
//!
//! A test looks backward from an evaluation date: the window
//! `[d − window_days + 1, d]` includes the evaluation date itself.
//! Evaluation happens only at stay dates, since stay and episode counts
//! inside a backward window can only rise on a stay date. A definition is
//! an OR over clauses and its referral date is the earliest clause
//! satisfaction date.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::{segment_episodes, ClientTimeline, GapPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    StayCount,
    EpisodeCount,
}

/// A single (kind, window, threshold) test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTest {
    pub kind: TestKind,
    pub window_days: i64,
    pub threshold: usize,
}

impl WindowTest {
    pub fn validate(&self) -> Result<()> {
        if self.window_days < 1 {
            return Err(Error::config("window_days must be at least 1"));
        }
        if self.threshold < 1 {
            return Err(Error::config("threshold must be at least 1"));
        }
        if self.kind == TestKind::StayCount && self.threshold as i64 > self.window_days {
            return Err(Error::config(format!(
                "stay threshold {} exceeds window of {} days",
                self.threshold, self.window_days
            )));
        }
        Ok(())
    }
}

/// One clause of a definition. `ContinuousEpisode` is satisfied on the
/// first stay date at which the current episode's inclusive span reaches
/// `min_span_days`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clause {
    Window(WindowTest),
    ContinuousEpisode { min_span_days: i64 },
}

impl Clause {
    pub fn validate(&self) -> Result<()> {
        match self {
            Clause::Window(test) => test.validate(),
            Clause::ContinuousEpisode { min_span_days } => {
                if *min_span_days < 1 {
                    Err(Error::config("min_span_days must be at least 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClauseLabel {
    Chronic,
    Episodic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClause {
    pub clause: Clause,
    pub label: ClauseLabel,
}

/// An OR-composite of window tests naming a published definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionSpec {
    pub name: String,
    pub clauses: Vec<LabeledClause>,
}

impl DefinitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clauses.is_empty() {
            return Err(Error::config(format!(
                "definition {:?} has no clauses",
                self.name
            )));
        }
        for labeled in &self.clauses {
            labeled.clause.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferralLabel {
    Chronic,
    Episodic,
    Both,
    None,
}

impl std::fmt::Display for ReferralLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ReferralLabel::Chronic => "chronic",
            ReferralLabel::Episodic => "episodic",
            ReferralLabel::Both => "both",
            ReferralLabel::None => "none",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferralDecision {
    pub client_id: String,
    pub referral_date: Option<NaiveDate>,
    pub satisfied_clause: Option<usize>,
    pub label: ReferralLabel,
}

/// Earliest stay date at which the backward window holds at least
/// `threshold` stays (StayCount) or episode segments (EpisodeCount).
pub fn eval_window_test(
    timeline: &ClientTimeline,
    test: &WindowTest,
    policy: GapPolicy,
) -> Result<Option<NaiveDate>> {
    test.validate()?;
    let dates = timeline.stay_dates();

    // Prefix count of episode-starting gaps: segments in the contiguous
    // slice j..=i equal 1 + (starts[i] − starts[j]).
    let gap_starts: Vec<usize> = match test.kind {
        TestKind::EpisodeCount => {
            let mut acc = vec![0usize; dates.len()];
            for i in 1..dates.len() {
                let breaks = !policy.same_episode(dates[i - 1], dates[i]);
                acc[i] = acc[i - 1] + usize::from(breaks);
            }
            acc
        }
        TestKind::StayCount => Vec::new(),
    };

    let mut window_start_idx = 0usize;
    for (i, &date) in dates.iter().enumerate() {
        let window_start = date - Days::new(test.window_days as u64 - 1);
        while dates[window_start_idx] < window_start {
            window_start_idx += 1;
        }
        let satisfied = match test.kind {
            TestKind::StayCount => i - window_start_idx + 1 >= test.threshold,
            TestKind::EpisodeCount => 1 + gap_starts[i] - gap_starts[window_start_idx] >= test.threshold,
        };
        if satisfied {
            return Ok(Some(date));
        }
    }
    Ok(None)
}

/// Earliest stay date at which the current episode's inclusive span
/// reaches `min_span_days`.
pub fn eval_continuous_episode(
    timeline: &ClientTimeline,
    min_span_days: i64,
    policy: GapPolicy,
) -> Option<NaiveDate> {
    let dates = timeline.stay_dates();
    let mut episode_start = dates[0];
    let mut prev = dates[0];
    for &date in dates {
        if !policy.same_episode(prev, date) {
            episode_start = date;
        }
        if (date - episode_start).num_days() + 1 >= min_span_days {
            return Some(date);
        }
        prev = date;
    }
    None
}

pub fn eval_clause(
    timeline: &ClientTimeline,
    clause: &Clause,
    policy: GapPolicy,
) -> Result<Option<NaiveDate>> {
    match clause {
        Clause::Window(test) => eval_window_test(timeline, test, policy),
        Clause::ContinuousEpisode { min_span_days } => {
            Ok(eval_continuous_episode(timeline, *min_span_days, policy))
        }
    }
}

/// Evaluates every clause and returns the earliest referral date, ties
/// broken by lowest clause index. Clauses of both labels satisfied on
/// the same date yield `Both`.
pub fn eval_definition(
    timeline: &ClientTimeline,
    spec: &DefinitionSpec,
    policy: GapPolicy,
) -> Result<ReferralDecision> {
    spec.validate()?;
    let mut earliest: Option<NaiveDate> = None;
    let mut winning_clause = None;
    let mut chronic_at_earliest = false;
    let mut episodic_at_earliest = false;

    for (idx, labeled) in spec.clauses.iter().enumerate() {
        let Some(date) = eval_clause(timeline, &labeled.clause, policy)? else {
            continue;
        };
        if earliest.is_none_or(|cur| date < cur) {
            earliest = Some(date);
            winning_clause = Some(idx);
            chronic_at_earliest = labeled.label == ClauseLabel::Chronic;
            episodic_at_earliest = labeled.label == ClauseLabel::Episodic;
        } else if earliest == Some(date) {
            chronic_at_earliest |= labeled.label == ClauseLabel::Chronic;
            episodic_at_earliest |= labeled.label == ClauseLabel::Episodic;
        }
    }

    let label = match (earliest.is_some(), chronic_at_earliest, episodic_at_earliest) {
        (false, _, _) => ReferralLabel::None,
        (true, true, true) => ReferralLabel::Both,
        (true, _, true) => ReferralLabel::Episodic,
        (true, _, _) => ReferralLabel::Chronic,
    };

    Ok(ReferralDecision {
        client_id: timeline.client_id().to_string(),
        referral_date: earliest,
        satisfied_clause: winning_clause,
        label,
    })
}

fn chronic(clause: Clause) -> LabeledClause {
    LabeledClause {
        clause,
        label: ClauseLabel::Chronic,
    }
}

fn episodic(clause: Clause) -> LabeledClause {
    LabeledClause {
        clause,
        label: ClauseLabel::Episodic,
    }
}

fn stay_test(window_days: i64, threshold: usize) -> Clause {
    Clause::Window(WindowTest {
        kind: TestKind::StayCount,
        window_days,
        threshold,
    })
}

fn episode_test(window_days: i64, threshold: usize) -> Clause {
    Clause::Window(WindowTest {
        kind: TestKind::EpisodeCount,
        window_days,
        threshold,
    })
}

/// The published definitions: GoC, GoA, RAPID-Chronic, RAPID-Episodic
/// and the RAPID composite.
pub fn builtin_definitions() -> BTreeMap<String, DefinitionSpec> {
    let rapid_chronic = chronic(stay_test(90, 81));
    let rapid_episodic = episodic(episode_test(90, 2));

    let defs = [
        DefinitionSpec {
            name: "GoC".into(),
            clauses: vec![chronic(stay_test(365, 180)), chronic(stay_test(1095, 546))],
        },
        DefinitionSpec {
            name: "GoA".into(),
            clauses: vec![
                chronic(Clause::ContinuousEpisode { min_span_days: 365 }),
                chronic(episode_test(1095, 4)),
            ],
        },
        DefinitionSpec {
            name: "RAPID-Chronic".into(),
            clauses: vec![rapid_chronic.clone()],
        },
        DefinitionSpec {
            name: "RAPID-Episodic".into(),
            clauses: vec![rapid_episodic.clone()],
        },
        DefinitionSpec {
            name: "RAPID".into(),
            clauses: vec![rapid_chronic, rapid_episodic],
        },
    ];
    defs.into_iter().map(|d| (d.name.clone(), d)).collect()
}

#[derive(Debug, Deserialize)]
struct DefinitionFile {
    name: String,
    #[serde(rename = "clauses")]
    clauses: Vec<ClauseEntry>,
}

#[derive(Debug, Deserialize)]
struct ClauseEntry {
    kind: String,
    window: i64,
    threshold: Option<usize>,
    label: Option<String>,
}

/// Loads a custom composite definition from a small declarative TOML
/// file: a `name` plus a list of `[[clauses]]` entries with `kind`
/// (stays | episodes | continuous), `window`, `threshold` (not used by
/// continuous) and an optional `label` (chronic | episodic).
pub fn load_definition(path: &Path) -> Result<DefinitionSpec> {
    let text = std::fs::read_to_string(path)?;
    let parsed: DefinitionFile =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let mut clauses = Vec::new();
    for entry in parsed.clauses {
        let clause = match entry.kind.as_str() {
            "stays" => stay_test(
                entry.window,
                entry
                    .threshold
                    .ok_or_else(|| Error::config("stays clause requires a threshold"))?,
            ),
            "episodes" => episode_test(
                entry.window,
                entry
                    .threshold
                    .ok_or_else(|| Error::config("episodes clause requires a threshold"))?,
            ),
            "continuous" => Clause::ContinuousEpisode {
                min_span_days: entry.window,
            },
            other => {
                return Err(Error::config(format!(
                    "unknown clause kind {other:?} (expected stays, episodes or continuous)"
                )))
            }
        };
        let label = match entry.label.as_deref() {
            None | Some("chronic") => ClauseLabel::Chronic,
            Some("episodic") => ClauseLabel::Episodic,
            Some(other) => {
                return Err(Error::config(format!(
                    "unknown clause label {other:?} (expected chronic or episodic)"
                )))
            }
        };
        clauses.push(LabeledClause { clause, label });
    }

    let spec = DefinitionSpec {
        name: parsed.name,
        clauses,
    };
    spec.validate()?;
    Ok(spec)
}

/// Alternative episode-in-window route: counts global episodes that have
/// at least one stay inside `[window_start, window_end]`. Equal to
/// window-restricted segmentation because a window is a contiguous date
/// interval; the equivalence is exercised in tests.
pub fn count_intersecting_global_episodes(
    timeline: &ClientTimeline,
    window_start: NaiveDate,
    window_end: NaiveDate,
    policy: GapPolicy,
) -> usize {
    segment_episodes(timeline, policy)
        .iter()
        .filter(|ep| {
            timeline
                .stay_dates()
                .iter()
                .any(|&d| d >= ep.start && d <= ep.end && d >= window_start && d <= window_end)
        })
        .count()
}
