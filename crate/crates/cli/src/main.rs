//! `rapid` — batch analytics over shelter access records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use rapid_core::cluster::{
    cluster_population, features_from_timelines, hotelling_t2, standardize, ClusterModel,
    SeparationTest,
};
use rapid_core::detect::{
    builtin_definitions, eval_definition, load_definition, DefinitionSpec, ReferralLabel, TestKind,
};
use rapid_core::impact::{
    aggregate_impact, cohort_stats, referral_impact, referrals_per_month, under_radar_report,
    ImpactSummary, ReferralOutcome,
};
use rapid_core::ingest::{
    apply_censoring_filter, collapse_to_stays, parse_events, CensorBounds, ParseOutcome,
    DEFAULT_MAX_BAD_FRACTION,
};
use rapid_core::report::{
    cluster_table, cohort_table, compare_table, config_header, fmt_pct, grid_table,
    separation_table, under_radar_tables, OutputFormat, Table,
};
use rapid_core::search::{run_grid, GridSpec, Objective, Thresholds};
use rapid_core::stats::PercentileMethod;
use rapid_core::synth::{
    default_population_spec, default_start_range, generate_population, load_population_spec,
    to_events,
};
use rapid_core::timeline::{ClientTimeline, GapPolicy, DEFAULT_GAP_DAYS};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DATA_DIR_ENV: &str = "RAPID_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "rapid",
    version,
    about = "Identify chronic and episodic shelter users from access records and quantify housing referral impact"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Input events CSV (client_id,timestamp[,service]); resolved
    /// against $RAPID_DATA_DIR when relative and not found locally.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Episode gap threshold in days.
    #[arg(long, global = true, default_value_t = DEFAULT_GAP_DAYS)]
    gap_days: i64,

    /// Exclusive lower bound on a client's first stay date (censoring).
    #[arg(long, global = true)]
    censor_start: Option<NaiveDate>,

    /// Exclusive upper bound on a client's first stay date (censoring).
    #[arg(long, global = true)]
    censor_end: Option<NaiveDate>,

    /// Maximum tolerated fraction of malformed input lines.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_BAD_FRACTION)]
    max_bad_fraction: f64,

    /// Output format for report tables.
    #[arg(long, global = true, default_value = "markdown")]
    format: FormatArg,

    /// Percentile convention for cohort statistics.
    #[arg(long, global = true, default_value = "linear")]
    percentile: PercentileArg,

    /// Cap on worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => OutputFormat::Markdown,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PercentileArg {
    Linear,
    Nearest,
}

impl From<PercentileArg> for PercentileMethod {
    fn from(p: PercentileArg) -> Self {
        match p {
            PercentileArg::Linear => PercentileMethod::Linear,
            PercentileArg::Nearest => PercentileMethod::NearestRank,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse the input, collapse to stays and report ingest/censoring counts.
    IngestStats,
    /// Per-definition cohort statistics tables.
    Stats {
        /// Built-in definition name (GoC, GoA, RAPID, RAPID-Chronic,
        /// RAPID-Episodic); repeatable. Defaults to all built-ins.
        #[arg(long = "definition")]
        definitions: Vec<String>,
        /// Custom definition TOML file; repeatable.
        #[arg(long = "definition-file")]
        definition_files: Vec<PathBuf>,
    },
    /// Compare GoA, GoC and RAPID on referral impact.
    Compare,
    /// Rank window/threshold combinations by referral impact.
    GridSearch {
        #[arg(long, value_enum, default_value = "stays")]
        kind: KindArg,
        /// Comma-separated window sizes in days.
        #[arg(long, value_delimiter = ',', default_value = "30,90,180,365,547")]
        windows: Vec<i64>,
        /// Stay thresholds as window fractions (stay grids).
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        /// Episode thresholds as absolute counts (episode grids).
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Keep only the best N rows.
        #[arg(long)]
        top: Option<usize>,
    },
    /// k-means population structure with Hotelling separation tests.
    Cluster {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
    },
    /// Statistics of clients a definition does not identify.
    UnderRadar {
        #[arg(long, default_value = "RAPID")]
        definition: String,
    },
    /// Generate a seeded synthetic population.
    Synth {
        #[arg(long, default_value_t = 2000)]
        size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Archetype spec TOML; defaults to the built-in three-archetype mix.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output events CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Stays,
    Episodes,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Stays,
    Tenure,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut stdout = std::io::stdout().lock();
    run(&cli, &mut stdout)
}

fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let common = &cli.common;
    let format: OutputFormat = common.format.into();
    let policy = GapPolicy::new(common.gap_days)?;
    let method: PercentileMethod = common.percentile.into();

    match &cli.command {
        Command::IngestStats => {
            let loaded = load_population(common, policy)?;
            write!(out, "{}", header(common, &[]))?;
            let table = Table {
                title: "Ingest statistics".into(),
                headers: vec!["Metric".into(), "Value".into()],
                rows: vec![
                    vec!["Input lines".into(), loaded.parse.total_lines.to_string()],
                    vec![
                        "Malformed lines".into(),
                        loaded.parse.malformed_lines.to_string(),
                    ],
                    vec!["Events parsed".into(), loaded.parse.events.len().to_string()],
                    vec!["Clients (pre-censor)".into(), loaded.pre_censor.to_string()],
                    vec!["Clients retained".into(), loaded.timelines.len().to_string()],
                    vec![
                        "Retained fraction".into(),
                        fmt_pct(loaded.retained_fraction),
                    ],
                ],
                footer: None,
            };
            write!(out, "{}", table.render(format))?;
        }
        Command::Stats {
            definitions,
            definition_files,
        } => {
            let loaded = load_population(common, policy)?;
            let specs = select_definitions(definitions, definition_files)?;
            let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
            write!(out, "{}", header(common, &[("definitions", names.join(","))]))?;
            for spec in &specs {
                let flagged = flag_clients(&loaded.timelines, spec, policy)?;
                let cohort = loaded
                    .timelines
                    .values()
                    .filter(|t| flagged.contains_key(t.client_id()));
                let stats = cohort_stats(cohort, loaded.timelines.len(), policy, method);
                write!(
                    out,
                    "{}",
                    cohort_table(&format!("Clients identified by {}", spec.name), &stats)
                        .render(format)
                )?;
            }
        }
        Command::Compare => {
            let loaded = load_population(common, policy)?;
            let builtins = builtin_definitions();
            let mut rows: Vec<(String, ImpactSummary)> = Vec::new();
            let mut loads: Vec<(String, f64)> = Vec::new();
            for name in ["GoA", "GoC", "RAPID"] {
                let spec = &builtins[name];
                let outcomes = referral_outcomes(&loaded.timelines, spec, policy)?;
                rows.push((
                    name.to_string(),
                    aggregate_impact(&outcomes, loaded.timelines.len()),
                ));
                if outcomes.len() > 1 {
                    loads.push((name.to_string(), referrals_per_month(&outcomes, None)?));
                }
            }
            write!(out, "{}", header(common, &[]))?;
            write!(
                out,
                "{}",
                compare_table("Definition performance comparison", &rows).render(format)
            )?;
            if !loads.is_empty() {
                let table = Table {
                    title: "Referral load".into(),
                    headers: vec!["Definition".into(), "Referrals per Month".into()],
                    rows: loads
                        .iter()
                        .map(|(n, r)| vec![n.clone(), format!("{r:.1}")])
                        .collect(),
                    footer: None,
                };
                write!(out, "{}", table.render(format))?;
            }
        }
        Command::GridSearch {
            kind,
            windows,
            fractions,
            counts,
            objective,
            top,
        } => {
            let loaded = load_population(common, policy)?;
            let spec = build_grid_spec(*kind, windows, fractions, counts, *objective)?;
            let timelines: Vec<&ClientTimeline> = loaded.timelines.values().collect();
            let mut rows = run_grid(&timelines, &spec, policy)?;
            if let Some(top) = top {
                rows.truncate(*top);
            }
            write!(
                out,
                "{}",
                header(
                    common,
                    &[
                        ("kind", format!("{:?}", spec.kind)),
                        ("objective", format!("{:?}", spec.objective)),
                    ],
                )
            )?;
            let title = match spec.kind {
                TestKind::StayCount => "Window/threshold performance for chronic detection",
                TestKind::EpisodeCount => "Window/threshold performance for episodic detection",
            };
            write!(out, "{}", grid_table(title, &rows, spec.objective).render(format))?;
        }
        Command::Cluster { k, seed, restarts } => {
            let loaded = load_population(common, policy)?;
            let features = features_from_timelines(loaded.timelines.values(), policy);
            let model = cluster_population(&features, *k, *seed, *restarts)?;
            write!(
                out,
                "{}",
                header(
                    common,
                    &[
                        ("k", k.to_string()),
                        ("seed", seed.to_string()),
                        ("restarts", restarts.to_string()),
                    ],
                )
            )?;
            write!(out, "{}", cluster_table(&model).render(format))?;

            let raw: Vec<[f64; 2]> = features
                .iter()
                .map(|f| [f.total_stays as f64, f.total_episodes as f64])
                .collect();
            for (title, points) in pairwise_point_sets(&model, &raw)? {
                write!(out, "{}", separation_table(&points).render(format))?;
                let _ = title;
            }
        }
        Command::UnderRadar { definition } => {
            let loaded = load_population(common, policy)?;
            let spec = select_definitions(&[definition.clone()], &[])?.remove(0);
            let flagged = flag_clients(&loaded.timelines, &spec, policy)?;
            let flagged_ids: BTreeSet<String> = flagged.keys().cloned().collect();
            let report = under_radar_report(
                loaded.timelines.values(),
                &flagged_ids,
                loaded.timelines.len(),
                policy,
                method,
            );
            write!(out, "{}", header(common, &[("definition", spec.name.clone())]))?;
            for table in under_radar_tables(&report) {
                write!(out, "{}", table.render(format))?;
            }
        }
        Command::Synth {
            size,
            seed,
            spec,
            out: out_path,
        } => {
            let population_spec = match spec {
                Some(path) => load_population_spec(path)?,
                None => default_population_spec(),
            };
            let clients =
                generate_population(&population_spec, *size, *seed, default_start_range(), policy)?;
            let events = to_events(&clients);
            let mut file = File::create(out_path)
                .with_context(|| format!("creating {}", out_path.display()))?;
            writeln!(file, "client_id,timestamp")?;
            for event in &events {
                writeln!(file, "{},{}", event.client_id, event.date)?;
            }
            write!(
                out,
                "{}",
                header(
                    common,
                    &[
                        ("size", size.to_string()),
                        ("seed", seed.to_string()),
                        ("out", out_path.display().to_string()),
                    ],
                )
            )?;
            writeln!(
                out,
                "wrote {} events for {} clients to {}",
                events.len(),
                clients.len(),
                out_path.display()
            )?;
        }
    }
    Ok(())
}

struct LoadedPopulation {
    parse: ParseOutcome,
    pre_censor: usize,
    retained_fraction: f64,
    timelines: BTreeMap<String, ClientTimeline>,
}

fn resolve_input(common: &CommonArgs) -> Result<PathBuf> {
    let Some(input) = &common.input else {
        bail!("--input is required for this command");
    };
    if input.exists() || input.is_absolute() {
        return Ok(input.clone());
    }
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        let joined = Path::new(&dir).join(input);
        if joined.exists() {
            return Ok(joined);
        }
    }
    Ok(input.clone())
}

fn load_population(common: &CommonArgs, _policy: GapPolicy) -> Result<LoadedPopulation> {
    let path = resolve_input(common)?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let parse = parse_events(file, common.max_bad_fraction)?;
    let timelines = collapse_to_stays(&parse.events);
    let pre_censor = timelines.len();
    let (timelines, retained_fraction) = match (common.censor_start, common.censor_end) {
        (Some(start), Some(end)) => {
            let bounds = CensorBounds::new(start, end)?;
            let (retained, report) = apply_censoring_filter(timelines, bounds);
            (retained, report.retained_fraction)
        }
        (None, None) => (timelines, 1.0),
        _ => bail!("--censor-start and --censor-end must be given together"),
    };
    Ok(LoadedPopulation {
        parse,
        pre_censor,
        retained_fraction,
        timelines,
    })
}

fn header(common: &CommonArgs, extra: &[(&str, String)]) -> String {
    let mut entries: Vec<(&str, String)> = vec![
        (
            "input",
            common
                .input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
        ),
        ("gap-days", common.gap_days.to_string()),
        (
            "censor",
            match (common.censor_start, common.censor_end) {
                (Some(s), Some(e)) => format!("{s}..{e} (exclusive)"),
                _ => "off".into(),
            },
        ),
        ("max-bad-fraction", common.max_bad_fraction.to_string()),
        (
            "percentile",
            match common.percentile {
                PercentileArg::Linear => "linear".into(),
                PercentileArg::Nearest => "nearest-rank".into(),
            },
        ),
    ];
    for (k, v) in extra {
        entries.push((k, v.clone()));
    }
    config_header(VERSION, &entries)
}

fn select_definitions(
    names: &[String],
    files: &[PathBuf],
) -> Result<Vec<DefinitionSpec>> {
    let builtins = builtin_definitions();
    let mut specs = Vec::new();
    if names.is_empty() && files.is_empty() {
        specs.extend(builtins.values().cloned());
        return Ok(specs);
    }
    for name in names {
        let spec = builtins
            .get(name)
            .with_context(|| format!("unknown definition {name:?}; built-ins: {}",
                builtins.keys().cloned().collect::<Vec<_>>().join(", ")))?;
        specs.push(spec.clone());
    }
    for file in files {
        specs.push(load_definition(file)?);
    }
    Ok(specs)
}

/// Referral decisions for every identified client, keyed by client id.
fn flag_clients(
    timelines: &BTreeMap<String, ClientTimeline>,
    spec: &DefinitionSpec,
    policy: GapPolicy,
) -> Result<BTreeMap<String, NaiveDate>> {
    let mut flagged = BTreeMap::new();
    for timeline in timelines.values() {
        let decision = eval_definition(timeline, spec, policy)?;
        if decision.label != ReferralLabel::None {
            flagged.insert(
                timeline.client_id().to_string(),
                decision.referral_date.expect("labelled decisions carry a date"),
            );
        }
    }
    Ok(flagged)
}

fn referral_outcomes(
    timelines: &BTreeMap<String, ClientTimeline>,
    spec: &DefinitionSpec,
    policy: GapPolicy,
) -> Result<Vec<ReferralOutcome>> {
    let mut outcomes = Vec::new();
    for timeline in timelines.values() {
        if let Some(date) = eval_definition(timeline, spec, policy)?.referral_date {
            outcomes.push(referral_impact(timeline, date)?);
        }
    }
    Ok(outcomes)
}

fn build_grid_spec(
    kind: KindArg,
    windows: &[i64],
    fractions: &Option<Vec<f64>>,
    counts: &Option<Vec<usize>>,
    objective: Option<ObjectiveArg>,
) -> Result<GridSpec> {
    let (kind, thresholds, default_objective) = match kind {
        KindArg::Stays => {
            if counts.is_some() {
                bail!("--counts applies to episode grids; use --fractions for stay grids");
            }
            let fractions = fractions.clone().unwrap_or_else(|| vec![0.5, 0.75, 0.9]);
            (
                TestKind::StayCount,
                Thresholds::Fractions(fractions),
                Objective::AvgStaysSaved,
            )
        }
        KindArg::Episodes => {
            if fractions.is_some() {
                bail!("--fractions applies to stay grids; use --counts for episode grids");
            }
            let counts = counts.clone().unwrap_or_else(|| vec![2, 3, 4, 5]);
            (
                TestKind::EpisodeCount,
                Thresholds::Counts(counts),
                Objective::AvgTenureReduction,
            )
        }
    };
    let objective = match objective {
        Some(ObjectiveArg::Stays) => Objective::AvgStaysSaved,
        Some(ObjectiveArg::Tenure) => Objective::AvgTenureReduction,
        None => default_objective,
    };
    Ok(GridSpec {
        kind,
        windows: windows.to_vec(),
        thresholds,
        objective,
    })
}

type PairwiseTests = Vec<(String, Vec<(String, String, SeparationTest)>)>;

/// Pairwise Hotelling tests in raw feature space and, when the variances
/// allow, in standardized space as well.
fn pairwise_point_sets(model: &ClusterModel, raw: &[[f64; 2]]) -> Result<PairwiseTests> {
    let mut sets: Vec<(String, Vec<[f64; 2]>)> = vec![("raw features".into(), raw.to_vec())];
    if let Ok((standardized, _)) = standardize(raw) {
        sets.push(("standardized features".into(), standardized));
    }

    let mut result = Vec::new();
    for (title, points) in sets {
        let mut groups: Vec<Vec<[f64; 2]>> = vec![Vec::new(); model.k];
        for (point, &cluster) in points.iter().zip(&model.assignments) {
            groups[cluster].push(*point);
        }
        let name = |i: usize| {
            model.clusters[i]
                .label
                .map(|l| l.to_string())
                .unwrap_or_else(|| format!("cluster {i}"))
        };
        let mut tests = Vec::new();
        for a in 0..model.k {
            for b in (a + 1)..model.k {
                let test = hotelling_t2(&groups[a], &groups[b])?;
                tests.push((format!("{} [{title}]", name(a)), name(b), test));
            }
        }
        result.push((title, tests));
    }
    Ok(result)
}
