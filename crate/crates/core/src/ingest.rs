//! Raw event parsing, daily-stay collapse and the censoring inclusion filter.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::ClientTimeline;

/// One timestamped service-access record for one client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub client_id: String,
    pub date: NaiveDate,
    pub service: Option<Service>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Service {
    DaySleep,
    NightSleep,
    Other,
}

impl Service {
    fn parse(s: &str) -> Option<Service> {
        match s {
            "day-sleep" => Some(Service::DaySleep),
            "night-sleep" => Some(Service::NightSleep),
            "other" => Some(Service::Other),
            _ => None,
        }
    }
}

/// Inclusion bounds on a client's *first* stay date. Both ends exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensorBounds {
    pub earliest_first_stay: NaiveDate,
    pub latest_first_stay: NaiveDate,
}

impl CensorBounds {
    pub fn new(earliest_first_stay: NaiveDate, latest_first_stay: NaiveDate) -> Result<Self> {
        if earliest_first_stay >= latest_first_stay {
            return Err(Error::config(format!(
                "censor bounds must satisfy start < end, got {earliest_first_stay} .. {latest_first_stay}"
            )));
        }
        Ok(CensorBounds {
            earliest_first_stay,
            latest_first_stay,
        })
    }

    /// A first stay is retained iff it falls strictly inside the bounds.
    pub fn retains(&self, first_stay: NaiveDate) -> bool {
        first_stay > self.earliest_first_stay && first_stay < self.latest_first_stay
    }
}

/// Result of parsing a raw event stream.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub events: Vec<RawEvent>,
    pub malformed_lines: usize,
    pub total_lines: usize,
    /// Line number and content of the first malformed line, if any.
    pub first_bad_line: Option<(usize, String)>,
}

pub const DEFAULT_MAX_BAD_FRACTION: f64 = 0.10;

/// Parses delimiter-separated event records, one per line:
/// `client_id,timestamp[,service]` with an ISO 8601 date or date-time.
/// A header row is auto-detected by a non-date second field on line 1.
/// Malformed lines are counted and reported; if they exceed
/// `max_bad_fraction` of all data lines the whole parse fails.
pub fn parse_events<R: Read>(reader: R, max_bad_fraction: f64) -> Result<ParseOutcome> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut events = Vec::new();
    let mut malformed_lines = 0usize;
    let mut total_lines = 0usize;
    let mut first_bad_line: Option<(usize, String)> = None;

    for (idx, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
            _ => Error::Format(e.to_string()),
        })?;
        let line_no = idx + 1;

        // Header detection: first line whose second field is not a date and
        // names a column. The name check keeps a malformed first data line
        // (e.g. "c1,not-a-date") from being swallowed as a header.
        if idx == 0 && is_header(&record) {
            continue;
        }

        total_lines += 1;
        match parse_record(&record) {
            Some(event) => events.push(event),
            None => {
                malformed_lines += 1;
                if first_bad_line.is_none() {
                    let content = record.iter().collect::<Vec<_>>().join(",");
                    first_bad_line = Some((line_no, content));
                }
            }
        }
    }

    if total_lines > 0 && malformed_lines as f64 > max_bad_fraction * total_lines as f64 {
        let (line_no, content) = first_bad_line.expect("malformed lines imply a first bad line");
        return Err(Error::Format(format!(
            "{malformed_lines}/{total_lines} malformed lines exceeds tolerance {max_bad_fraction}; first bad line {line_no}: {content:?}"
        )));
    }

    Ok(ParseOutcome {
        events,
        malformed_lines,
        total_lines,
        first_bad_line,
    })
}

fn is_header(record: &csv::StringRecord) -> bool {
    let Some(second) = record.get(1) else {
        return false;
    };
    if parse_date(second).is_some() {
        return false;
    }
    matches!(
        second.to_ascii_lowercase().as_str(),
        "timestamp" | "date" | "datetime" | "time" | "stay_date"
    )
}

fn parse_record(record: &csv::StringRecord) -> Option<RawEvent> {
    let client_id = record.get(0)?.trim();
    if client_id.is_empty() {
        return None;
    }
    let date = parse_date(record.get(1)?)?;
    let service = match record.get(2) {
        None | Some("") => None,
        Some(tag) => Some(Service::parse(tag)?),
    };
    Some(RawEvent {
        client_id: client_id.to_string(),
        date,
        service,
    })
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS`, a space-separated
/// date-time, or an RFC 3339 timestamp with offset.
fn parse_date(field: &str) -> Option<NaiveDate> {
    let field = field.trim();
    if let Ok(d) = NaiveDate::parse_from_str(field, "%Y-%m-%d") {
        return Some(d);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(field, fmt) {
            return Some(dt.date());
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(field) {
        return Some(dt.date_naive());
    }
    None
}

/// Collapses events to per-client sorted sets of distinct stay dates.
/// Multiple same-day events (day sleep plus night sleep) yield one stay.
pub fn collapse_to_stays(events: &[RawEvent]) -> BTreeMap<String, ClientTimeline> {
    let mut date_sets: BTreeMap<&str, BTreeSet<NaiveDate>> = BTreeMap::new();
    for event in events {
        date_sets
            .entry(event.client_id.as_str())
            .or_default()
            .insert(event.date);
    }
    date_sets
        .into_iter()
        .map(|(client_id, dates)| {
            (
                client_id.to_string(),
                ClientTimeline::new(client_id.to_string(), dates.into_iter().collect())
                    .expect("set-derived dates are strictly increasing and nonempty"),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensorReport {
    pub input_clients: usize,
    pub retained_clients: usize,
    pub retained_fraction: f64,
}

/// Retains exactly the clients whose first stay falls strictly inside
/// the bounds.
pub fn apply_censoring_filter(
    timelines: BTreeMap<String, ClientTimeline>,
    bounds: CensorBounds,
) -> (BTreeMap<String, ClientTimeline>, CensorReport) {
    let input_clients = timelines.len();
    let retained: BTreeMap<String, ClientTimeline> = timelines
        .into_iter()
        .filter(|(_, timeline)| bounds.retains(timeline.first_stay()))
        .collect();
    let retained_clients = retained.len();
    let retained_fraction = if input_clients == 0 {
        0.0
    } else {
        retained_clients as f64 / input_clients as f64
    };
    (
        retained,
        CensorReport {
            input_clients,
            retained_clients,
            retained_fraction,
        },
    )
}
