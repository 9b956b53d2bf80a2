//! Seeded synthetic populations with transitional/episodic/chronic
//! archetypes, so the whole pipeline is testable without real shelter
//! records.

use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RawEvent;
use crate::timeline::GapPolicy;

/// Inclusive integer range, drawn uniformly.
pub type Range = (u64, u64);

/// One client archetype: how many episodes, how dense, and how far apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    pub fraction: f64,
    pub episodes: Range,
    pub stays_per_episode: Range,
    /// Days between the end of one episode and the start of the next;
    /// must be at least the gap policy so drawn episode counts are
    /// realized exactly.
    pub inter_episode_gap: Range,
    /// Days between consecutive stays inside an episode; must stay
    /// under the gap policy.
    pub within_episode_spacing: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub archetypes: Vec<ArchetypeSpec>,
}

impl PopulationSpec {
    pub fn validate(&self, policy: GapPolicy) -> Result<()> {
        if self.archetypes.is_empty() {
            return Err(Error::config("population spec has no archetypes"));
        }
        let total: f64 = self.archetypes.iter().map(|a| a.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "archetype fractions sum to {total}, expected 1"
            )));
        }
        for a in &self.archetypes {
            let ranges = [
                ("episodes", a.episodes, 1),
                ("stays_per_episode", a.stays_per_episode, 1),
                ("inter_episode_gap", a.inter_episode_gap, 1),
                ("within_episode_spacing", a.within_episode_spacing, 1),
            ];
            for (field, (lo, hi), min) in ranges {
                if lo < min || lo > hi {
                    return Err(Error::config(format!(
                        "archetype {:?}: invalid {field} range [{lo}, {hi}]",
                        a.name
                    )));
                }
            }
            if a.within_episode_spacing.1 as i64 >= policy.gap_days() {
                return Err(Error::config(format!(
                    "archetype {:?}: within-episode spacing up to {} would split episodes under a {}-day gap policy",
                    a.name,
                    a.within_episode_spacing.1,
                    policy.gap_days()
                )));
            }
            if (a.inter_episode_gap.0 as i64) < policy.gap_days() {
                return Err(Error::config(format!(
                    "archetype {:?}: inter-episode gap down to {} would merge episodes under a {}-day gap policy",
                    a.name,
                    a.inter_episode_gap.0,
                    policy.gap_days()
                )));
            }
        }
        Ok(())
    }
}

/// Default three-archetype mix tuned once so the generated per-archetype
/// mean stays/episodes land near (30.3, 1.8), (167.0, 9.2) and
/// (1273.1, 3.7) at the 85.2/11.9/2.9% population split.
pub fn default_population_spec() -> PopulationSpec {
    PopulationSpec {
        archetypes: vec![
            ArchetypeSpec {
                name: "transitional".into(),
                fraction: 0.852,
                episodes: (1, 3),
                stays_per_episode: (5, 26),
                inter_episode_gap: (90, 700),
                within_episode_spacing: (1, 4),
            },
            ArchetypeSpec {
                name: "episodic".into(),
                fraction: 0.119,
                episodes: (6, 12),
                stays_per_episode: (10, 27),
                inter_episode_gap: (30, 60),
                within_episode_spacing: (1, 3),
            },
            ArchetypeSpec {
                name: "chronic".into(),
                fraction: 0.029,
                episodes: (2, 5),
                stays_per_episode: (200, 528),
                inter_episode_gap: (30, 90),
                within_episode_spacing: (1, 1),
            },
        ],
    }
}

/// Loads a population spec from a declarative TOML file with one
/// `[[archetypes]]` table per archetype.
pub fn load_population_spec(path: &Path) -> Result<PopulationSpec> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// A generated client with its archetype, for calibration checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedClient {
    pub client_id: String,
    pub archetype: String,
    pub episode_count: u64,
    pub stay_dates: Vec<NaiveDate>,
}

/// Deterministically generates a population: client counts per archetype
/// by largest remainder, per-client RNG streams derived from (seed,
/// client index), first stays uniform over `start_range`.
pub fn generate_population(
    spec: &PopulationSpec,
    size: usize,
    seed: u64,
    start_range: (NaiveDate, NaiveDate),
    policy: GapPolicy,
) -> Result<Vec<GeneratedClient>> {
    spec.validate(policy)?;
    if size == 0 {
        return Ok(Vec::new());
    }
    if start_range.0 > start_range.1 {
        return Err(Error::config("start date range is inverted"));
    }

    let counts = apportion(&spec.archetypes, size);
    let mut clients = Vec::with_capacity(size);
    let mut index = 0usize;
    let width = size.to_string().len().max(4);
    for (archetype, count) in spec.archetypes.iter().zip(counts) {
        for _ in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let client_id = format!("c{:0width$}", index + 1);
            clients.push(generate_client(client_id, archetype, start_range, &mut rng));
            index += 1;
        }
    }
    Ok(clients)
}

/// Largest-remainder apportionment of `size` clients over the fractions.
fn apportion(archetypes: &[ArchetypeSpec], size: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = archetypes
        .iter()
        .map(|a| (a.fraction * size as f64).floor() as usize)
        .collect();
    let mut assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = archetypes
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.fraction * size as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cursor = 0;
    while assigned < size {
        counts[remainders[cursor % remainders.len()].0] += 1;
        assigned += 1;
        cursor += 1;
    }
    counts
}

fn draw(rng: &mut ChaCha8Rng, range: Range) -> u64 {
    rng.gen_range(range.0..=range.1)
}

fn generate_client(
    client_id: String,
    archetype: &ArchetypeSpec,
    start_range: (NaiveDate, NaiveDate),
    rng: &mut ChaCha8Rng,
) -> GeneratedClient {
    let span = (start_range.1 - start_range.0).num_days() as u64;
    let mut date = start_range.0 + Days::new(rng.gen_range(0..=span));
    let episode_count = draw(rng, archetype.episodes);

    let mut stay_dates = Vec::new();
    for episode in 0..episode_count {
        if episode > 0 {
            date = date + Days::new(draw(rng, archetype.inter_episode_gap));
        }
        let stays = draw(rng, archetype.stays_per_episode);
        for stay in 0..stays {
            if stay > 0 {
                date = date + Days::new(draw(rng, archetype.within_episode_spacing));
            }
            stay_dates.push(date);
        }
    }
    GeneratedClient {
        client_id,
        archetype: archetype.name.clone(),
        episode_count,
        stay_dates,
    }
}

/// Flattens generated clients into raw events, one per stay date, in
/// client then date order.
pub fn to_events(clients: &[GeneratedClient]) -> Vec<RawEvent> {
    clients
        .iter()
        .flat_map(|client| {
            client.stay_dates.iter().map(|&date| RawEvent {
                client_id: client.client_id.clone(),
                date,
                service: None,
            })
        })
        .collect()
}

pub const DEFAULT_START_RANGE: (&str, &str) = ("2010-01-01", "2016-12-31");

pub fn default_start_range() -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::parse_from_str(DEFAULT_START_RANGE.0, "%Y-%m-%d").unwrap(),
        NaiveDate::parse_from_str(DEFAULT_START_RANGE.1, "%Y-%m-%d").unwrap(),
    )
}
