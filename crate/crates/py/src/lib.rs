//! Python bindings exposing the main analytics operations.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rapid_core::cluster;
use rapid_core::detect;
use rapid_core::impact;
use rapid_core::ingest;
use rapid_core::synth;
use rapid_core::timeline::{ClientTimeline, GapPolicy};

fn to_py_err(err: rapid_core::Error) -> PyErr {
    match err {
        rapid_core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn make_timeline(dates: Vec<NaiveDate>) -> PyResult<ClientTimeline> {
    ClientTimeline::new("py".into(), dates).map_err(to_py_err)
}

fn make_policy(gap_days: i64) -> PyResult<GapPolicy> {
    GapPolicy::new(gap_days).map_err(to_py_err)
}

/// Parse an events CSV and return {client_id: [stay dates]}.
#[pyfunction]
#[pyo3(signature = (path, max_bad_fraction=0.1))]
fn load_timelines(
    path: PathBuf,
    max_bad_fraction: f64,
) -> PyResult<BTreeMap<String, Vec<NaiveDate>>> {
    let file = std::fs::File::open(&path)?;
    let outcome = ingest::parse_events(file, max_bad_fraction).map_err(to_py_err)?;
    Ok(ingest::collapse_to_stays(&outcome.events)
        .into_iter()
        .map(|(id, tl)| (id, tl.stay_dates().to_vec()))
        .collect())
}

/// Episode segmentation: [(start, end, stay_count)].
#[pyfunction]
#[pyo3(signature = (dates, gap_days=30))]
fn segment_episodes(
    dates: Vec<NaiveDate>,
    gap_days: i64,
) -> PyResult<Vec<(NaiveDate, NaiveDate, usize)>> {
    let timeline = make_timeline(dates)?;
    let policy = make_policy(gap_days)?;
    Ok(rapid_core::timeline::segment_episodes(&timeline, policy)
        .into_iter()
        .map(|e| (e.start, e.end, e.stay_count))
        .collect())
}

#[pyfunction]
fn tenure(dates: Vec<NaiveDate>) -> PyResult<i64> {
    Ok(make_timeline(dates)?.tenure_days())
}

#[pyfunction]
fn usage_percentage(dates: Vec<NaiveDate>) -> PyResult<f64> {
    Ok(make_timeline(dates)?.usage_percentage())
}

/// Earliest referral date for a (kind, window, threshold) test, or None.
#[pyfunction]
#[pyo3(signature = (dates, kind, window_days, threshold, gap_days=30))]
fn eval_window_test(
    dates: Vec<NaiveDate>,
    kind: &str,
    window_days: i64,
    threshold: usize,
    gap_days: i64,
) -> PyResult<Option<NaiveDate>> {
    let kind = match kind {
        "stays" => detect::TestKind::StayCount,
        "episodes" => detect::TestKind::EpisodeCount,
        other => {
            return Err(PyValueError::new_err(format!(
                "kind must be 'stays' or 'episodes', got {other:?}"
            )))
        }
    };
    let timeline = make_timeline(dates)?;
    let test = detect::WindowTest {
        kind,
        window_days,
        threshold,
    };
    detect::eval_window_test(&timeline, &test, make_policy(gap_days)?).map_err(to_py_err)
}

/// Evaluate a built-in definition; returns (referral_date, label) or None.
#[pyfunction]
#[pyo3(signature = (dates, definition, gap_days=30))]
fn eval_definition(
    dates: Vec<NaiveDate>,
    definition: &str,
    gap_days: i64,
) -> PyResult<Option<(NaiveDate, String)>> {
    let defs = detect::builtin_definitions();
    let spec = defs.get(definition).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown definition {definition:?}; available: {}",
            defs.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let timeline = make_timeline(dates)?;
    let decision =
        detect::eval_definition(&timeline, spec, make_policy(gap_days)?).map_err(to_py_err)?;
    Ok(decision
        .referral_date
        .map(|d| (d, decision.label.to_string())))
}

/// (stays_saved, tenure_reduction_days, time_to_id_days) for a referral.
#[pyfunction]
fn referral_impact(dates: Vec<NaiveDate>, referral_date: NaiveDate) -> PyResult<(usize, i64, i64)> {
    let timeline = make_timeline(dates)?;
    let outcome = impact::referral_impact(&timeline, referral_date).map_err(to_py_err)?;
    Ok((
        outcome.stays_saved,
        outcome.tenure_reduction_days,
        outcome.time_to_id_days,
    ))
}

/// CDF of the F distribution.
#[pyfunction]
fn f_cdf(x: f64, d1: f64, d2: f64) -> PyResult<f64> {
    cluster::special::f_cdf(x, d1, d2).map_err(to_py_err)
}

/// Two-sample Hotelling's T² on 2-D points: (t2, f_statistic, p_value).
#[pyfunction]
fn hotelling_t2(a: Vec<[f64; 2]>, b: Vec<[f64; 2]>) -> PyResult<(f64, f64, f64)> {
    let test = cluster::hotelling_t2(&a, &b).map_err(to_py_err)?;
    Ok((test.t2, test.f_statistic, test.p_value))
}

/// Seeded k-means with k-means++ init: (centroids, assignments, wcss).
#[pyfunction]
#[pyo3(signature = (points, k, seed=42, restarts=10))]
fn kmeans(
    points: Vec<[f64; 2]>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<(Vec<[f64; 2]>, Vec<usize>, f64)> {
    let fit = cluster::kmeans(&points, k, seed, restarts).map_err(to_py_err)?;
    Ok((fit.centroids, fit.assignments, fit.wcss))
}

/// Deterministic synthetic population: {client_id: [stay dates]}.
#[pyfunction]
#[pyo3(signature = (size, seed=42, gap_days=30))]
fn generate_population(
    size: usize,
    seed: u64,
    gap_days: i64,
) -> PyResult<BTreeMap<String, Vec<NaiveDate>>> {
    let spec = synth::default_population_spec();
    let clients = synth::generate_population(
        &spec,
        size,
        seed,
        synth::default_start_range(),
        make_policy(gap_days)?,
    )
    .map_err(to_py_err)?;
    Ok(clients
        .into_iter()
        .map(|c| (c.client_id, c.stay_dates))
        .collect())
}

#[pymodule]
fn rapid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(load_timelines, m)?)?;
    m.add_function(wrap_pyfunction!(segment_episodes, m)?)?;
    m.add_function(wrap_pyfunction!(tenure, m)?)?;
    m.add_function(wrap_pyfunction!(usage_percentage, m)?)?;
    m.add_function(wrap_pyfunction!(eval_window_test, m)?)?;
    m.add_function(wrap_pyfunction!(eval_definition, m)?)?;
    m.add_function(wrap_pyfunction!(referral_impact, m)?)?;
    m.add_function(wrap_pyfunction!(f_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(hotelling_t2, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(generate_population, m)?)?;
    Ok(())
}
