//! Acceptance suite: one test per criterion, each printing a pass line
//! with the measured values. Criterion 9 (CLI byte-identity) lives in
//! the CLI crate's acceptance suite.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use common::{all_grid_tests, day, day_num, day_numbers, oracle_window_test, random_timeline};
use rapid_core::cluster::{hotelling_t2, kmeans, special::f_cdf};
use rapid_core::detect::{
    builtin_definitions, count_intersecting_global_episodes, eval_definition, eval_window_test,
    TestKind, WindowTest,
};
use rapid_core::impact::{aggregate_impact, referral_impact};
use rapid_core::search::{expand_grid, GridSpec};
use rapid_core::synth::{default_population_spec, default_start_range, generate_population};
use rapid_core::timeline::{segment_dates, segment_episodes, ClientTimeline, GapPolicy};

fn policy() -> GapPolicy {
    GapPolicy::default()
}

fn synthetic_timelines(size: usize, seed: u64) -> BTreeMap<String, (String, ClientTimeline)> {
    generate_population(
        &default_population_spec(),
        size,
        seed,
        default_start_range(),
        policy(),
    )
    .unwrap()
    .into_iter()
    .map(|c| {
        let timeline = ClientTimeline::new(c.client_id.clone(), c.stay_dates).unwrap();
        (c.client_id, (c.archetype, timeline))
    })
    .collect()
}

#[test]
fn criterion_01_worked_example_exact() {
    let apr = |d| NaiveDate::from_ymd_opt(2012, 4, d).unwrap();
    let timeline = ClientTimeline::new(
        "client".into(),
        vec![apr(10), apr(12), apr(13), apr(20), apr(22), apr(30)],
    )
    .unwrap();
    // Warm call, then timed call.
    let _ = referral_impact(&timeline, apr(13)).unwrap();
    let start = Instant::now();
    let outcome = referral_impact(&timeline, apr(13)).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(outcome.stays_saved, 3);
    assert_eq!(outcome.tenure_reduction_days, 17);
    assert!(
        elapsed.as_micros() < 1000,
        "took {elapsed:?}, expected < 1 ms"
    );
    println!(
        "criterion 1: PASS — worked example referral: stays saved 3, tenure reduction 17 ({elapsed:?})"
    );
}

#[test]
fn criterion_02_grid_identifiers_exact() {
    let tests = expand_grid(&GridSpec::default_chronic()).unwrap();
    let ids: Vec<String> = tests
        .iter()
        .map(|t| format!("{}/{}", t.window_days, t.threshold))
        .collect();
    let expected = [
        "30/15", "30/22", "30/27", "90/45", "90/67", "90/81", "180/90", "180/135", "180/162",
        "365/182", "365/273", "365/328", "547/273", "547/410", "547/492",
    ];
    assert_eq!(ids.len(), 15);
    for id in expected {
        assert!(ids.contains(&id.to_string()), "missing grid id {id}");
    }
    for must_have in [492, 410, 328, 273, 162, 135, 81] {
        assert!(
            tests.iter().any(|t| t.threshold == must_have),
            "missing threshold {must_have}"
        );
    }
    println!("criterion 2: PASS — chronic grid expands to the 15 published window/threshold ids");
}

#[test]
fn criterion_03_sliding_window_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let timelines: Vec<ClientTimeline> = (0..500)
        .map(|i| random_timeline(&mut rng, &format!("c{i}"), 400))
        .collect();
    let tests = all_grid_tests();
    assert_eq!(tests.len(), 35);

    let comparisons: usize = timelines
        .par_iter()
        .map(|tl| {
            let days = day_numbers(tl);
            let mut done = 0;
            for test in &tests {
                let fast = eval_window_test(tl, test, policy()).unwrap().map(day_num);
                let slow = oracle_window_test(
                    &days,
                    test.kind,
                    test.window_days,
                    test.threshold,
                    policy().gap_days(),
                );
                assert_eq!(
                    fast,
                    slow,
                    "client {} test {:?}",
                    tl.client_id(),
                    test
                );
                done += 1;
            }
            done
        })
        .sum();
    let elapsed = start.elapsed();
    assert_eq!(comparisons, 500 * 35);
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, expected < 30 s");
    println!(
        "criterion 3: PASS — {comparisons} window-test evaluations match the brute-force oracle ({elapsed:?})"
    );
}

#[test]
fn criterion_04_monotonicity_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut cases = 0usize;
    while cases < 1000 {
        let tl = random_timeline(&mut rng, "m", 150);
        let kind = if rng.gen_bool(0.5) {
            TestKind::StayCount
        } else {
            TestKind::EpisodeCount
        };
        let window = rng.gen_range(10..400);
        let threshold = rng.gen_range(1..8usize);

        // Threshold up: referral never earlier.
        let lo = eval_window_test(
            &tl,
            &WindowTest {
                kind,
                window_days: window,
                threshold,
            },
            policy(),
        )
        .unwrap();
        let hi = eval_window_test(
            &tl,
            &WindowTest {
                kind,
                window_days: window,
                threshold: threshold + 1,
            },
            policy(),
        )
        .unwrap();
        match (lo, hi) {
            (None, Some(_)) => panic!("raising threshold created a referral"),
            (Some(a), Some(b)) => assert!(b >= a, "threshold up moved referral earlier"),
            _ => {}
        }

        // Window up: referral never later.
        let wide = eval_window_test(
            &tl,
            &WindowTest {
                kind,
                window_days: window + rng.gen_range(1..200),
                threshold,
            },
            policy(),
        )
        .unwrap();
        match (lo, wide) {
            (Some(_), None) => panic!("widening window removed the referral"),
            (Some(a), Some(b)) => assert!(b <= a, "window up moved referral later"),
            _ => {}
        }

        // Gap up: episode count never larger.
        let gap = rng.gen_range(2..60);
        let narrow = segment_episodes(&tl, GapPolicy::new(gap).unwrap()).len();
        let wide_gap = segment_episodes(&tl, GapPolicy::new(gap + rng.gen_range(1..30)).unwrap()).len();
        assert!(wide_gap <= narrow, "gap up increased episode count");

        cases += 1;
    }
    println!("criterion 4: PASS — {cases} randomized monotonicity cases, zero violations");
}

#[test]
fn criterion_05_conservation_suite() {
    let population = synthetic_timelines(2000, 5);
    let rapid = builtin_definitions().remove("RAPID").unwrap();
    let mut referred = 0usize;
    for (_, timeline) in population.values() {
        let decision = eval_definition(timeline, &rapid, policy()).unwrap();
        let Some(date) = decision.referral_date else {
            continue;
        };
        let outcome = referral_impact(timeline, date).unwrap();
        let before = timeline.stay_dates().iter().filter(|&&d| d <= date).count();
        assert_eq!(
            before + outcome.stays_saved,
            timeline.stay_count(),
            "stay conservation failed for {}",
            timeline.client_id()
        );
        assert_eq!(
            outcome.tenure_reduction_days + outcome.time_to_id_days,
            timeline.tenure_days() - 1,
            "tenure identity failed for {}",
            timeline.client_id()
        );
        referred += 1;
    }
    assert!(referred > 0, "no clients referred in the synthetic population");
    println!(
        "criterion 5: PASS — conservation identities hold for all {referred} referred clients of 2000"
    );
}

#[test]
fn criterion_06_episode_counting_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..1000 {
        let tl = random_timeline(&mut rng, "e", 200);
        let span = (tl.last_stay() - tl.first_stay()).num_days().max(1);
        let start = day_num(tl.first_stay()) + rng.gen_range(-30..span);
        let len = rng.gen_range(1..600);
        let (ws, we) = (day(start), day(start + len));
        let in_window: Vec<NaiveDate> = tl
            .stay_dates()
            .iter()
            .copied()
            .filter(|&d| d >= ws && d <= we)
            .collect();
        let restricted = segment_dates(&in_window, policy()).len();
        let global = count_intersecting_global_episodes(&tl, ws, we, policy());
        assert_eq!(restricted, global, "case {case} window {ws}..{we}");
    }
    println!("criterion 6: PASS — 1000 random (timeline, window) pairs, both counting routes agree");
}

#[test]
fn criterion_07_cluster_recovery() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let normal = Normal::new(0.0, 1.0).unwrap();

    // Blob sizes at the published population split of n = 2000.
    let sizes = [1704usize, 238, 58];
    let centers = [[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (blob, (&size, center)) in sizes.iter().zip(&centers).enumerate() {
        for _ in 0..size {
            points.push([
                center[0] + rng.sample(normal),
                center[1] + rng.sample(normal),
            ]);
            truth.push(blob);
        }
    }

    let fit = kmeans(&points, 3, 11, 10).unwrap();

    // Permutation matching: best agreement over all label permutations.
    let permutations = [
        [0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0],
    ];
    let best = permutations
        .iter()
        .map(|perm| {
            fit.assignments
                .iter()
                .zip(&truth)
                .filter(|(&a, &t)| perm[a] == t)
                .count()
        })
        .max()
        .unwrap();
    let recovery = best as f64 / points.len() as f64;
    assert!(recovery >= 0.99, "recovery {recovery} below 99%");

    let mut groups: Vec<Vec<[f64; 2]>> = vec![Vec::new(); 3];
    for (point, &cluster) in points.iter().zip(&fit.assignments) {
        groups[cluster].push(*point);
    }
    let mut worst_p: f64 = 0.0;
    for a in 0..3 {
        for b in (a + 1)..3 {
            let test = hotelling_t2(&groups[a], &groups[b]).unwrap();
            worst_p = worst_p.max(test.p_value);
            assert!(
                test.p_value < 0.001,
                "pair ({a},{b}) p = {} not significant",
                test.p_value
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, expected < 10 s");
    println!(
        "criterion 7: PASS — label recovery {:.2}%, all pairwise p ≤ {:.2e} ({elapsed:?})",
        recovery * 100.0,
        worst_p
    );
}

#[test]
fn criterion_08_f_cdf_reference_lattice() {
    let xs = [0.25, 0.5, 1.0, 2.0, 5.0];
    let d1s = [1.0, 2.0, 5.0, 10.0, 50.0];
    let d2s = [1.0, 20.0];
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for &x in &xs {
        for &d1 in &d1s {
            for &d2 in &d2s {
                let ours = f_cdf(x, d1, d2).unwrap();
                let reference = FisherSnedecor::new(d1, d2).unwrap().cdf(x);
                let err = (ours - reference).abs();
                worst = worst.max(err);
                assert!(
                    err <= 1e-8,
                    "f_cdf({x}, {d1}, {d2}) = {ours}, reference {reference}"
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 50);
    let median = f_cdf(1.0, 1.0, 1.0).unwrap();
    assert!((median - 0.5).abs() <= 1e-12, "f_cdf(1,1,1) = {median}");
    println!(
        "criterion 8: PASS — 50-point lattice max |error| {worst:.2e}; f_cdf(1,1,1) = 0.5 within 1e-12"
    );
}

#[test]
fn criterion_10_definition_ordering_on_calibrated_population() {
    let population = synthetic_timelines(2000, 42);
    let defs = builtin_definitions();
    let mut medians = BTreeMap::new();
    let mut mean_saved = BTreeMap::new();
    for name in ["GoC", "GoA", "RAPID"] {
        let mut outcomes = Vec::new();
        for (_, timeline) in population.values() {
            if let Some(date) = eval_definition(timeline, &defs[name], policy())
                .unwrap()
                .referral_date
            {
                outcomes.push(referral_impact(timeline, date).unwrap());
            }
        }
        assert!(!outcomes.is_empty(), "{name} identified nobody");
        let summary = aggregate_impact(&outcomes, population.len());
        medians.insert(name, summary.median_time_to_id_days.unwrap());
        mean_saved.insert(name, summary.mean_stays_saved.unwrap());
    }
    assert!(
        medians["RAPID"] < medians["GoC"],
        "RAPID median {} !< GoC median {}",
        medians["RAPID"],
        medians["GoC"]
    );
    assert!(
        medians["RAPID"] < medians["GoA"],
        "RAPID median {} !< GoA median {}",
        medians["RAPID"],
        medians["GoA"]
    );
    assert!(
        mean_saved["GoC"] > mean_saved["RAPID"],
        "GoC stays saved {} !> RAPID {}",
        mean_saved["GoC"],
        mean_saved["RAPID"]
    );
    println!(
        "criterion 10: PASS — median time to ID: RAPID {:.1} < GoC {:.1}, GoA {:.1}; stays saved: GoC {:.1} > RAPID {:.1}",
        medians["RAPID"], medians["GoC"], medians["GoA"], mean_saved["GoC"], mean_saved["RAPID"]
    );
}

/// Calibration backstop for the default generator: per-archetype mean
/// stays/episodes within 15% of the published targets.
#[test]
fn synthetic_population_hits_calibration_targets() {
    let population = synthetic_timelines(2000, 42);
    let targets: BTreeMap<&str, (f64, f64)> = [
        ("transitional", (30.3, 1.8)),
        ("episodic", (167.0, 9.2)),
        ("chronic", (1273.1, 3.7)),
    ]
    .into();
    for (name, (target_stays, target_episodes)) in targets {
        let cohort: Vec<&ClientTimeline> = population
            .values()
            .filter(|(arch, _)| arch == name)
            .map(|(_, tl)| tl)
            .collect();
        let n = cohort.len() as f64;
        let mean_stays = cohort.iter().map(|t| t.stay_count() as f64).sum::<f64>() / n;
        let mean_episodes = cohort
            .iter()
            .map(|t| segment_episodes(t, policy()).len() as f64)
            .sum::<f64>()
            / n;
        assert!(
            (mean_stays - target_stays).abs() <= 0.15 * target_stays,
            "{name}: mean stays {mean_stays:.1} vs target {target_stays}"
        );
        assert!(
            (mean_episodes - target_episodes).abs() <= 0.15 * target_episodes,
            "{name}: mean episodes {mean_episodes:.2} vs target {target_episodes}"
        );
    }
}
