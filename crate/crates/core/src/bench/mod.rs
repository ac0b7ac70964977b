//! Batched trials over benchmark conditions.
//!
//! A [`BenchSpec`] lists conditions (obstacle count or occupancy target,
//! destruction probability) and observation-count checkpoints. Each trial
//! generates its own map and runs one episode; every trial is then sampled
//! at each checkpoint using the last log row whose `obs_count` does not
//! exceed it. Means and Student-t intervals over trials are written as CSV
//! and one SVG chart per simplex dimension.

pub mod maps;
pub mod stats;
pub mod svg;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{CurriculumConfig, CurriculumError};
use crate::env::gateway::ExternalPolicy;
use crate::env::{EnvError, EnvSettings, Episode, EpisodeLog, Policy};
use crate::frontier::{FrontierPolicy, RandomPolicy};
use crate::rng::derive_seed;
use crate::world::{WorldError, WorldFileError};

use maps::{map_config, ObstacleSpec};
use stats::{summarize, Summary};
use svg::{line_chart, Series};

pub const METRICS: [&str; 3] = ["c0", "c1", "c2"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error("occupancy {target} not reached (best {reached:.4})")]
    Occupancy { target: f64, reached: f64 },
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    WorldFile(#[from] WorldFileError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Frontier,
    Random,
    /// A controller reached over the gateway protocol.
    External,
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frontier" => Ok(PolicyKind::Frontier),
            "random" => Ok(PolicyKind::Random),
            "external" => Ok(PolicyKind::External),
            _ => Err(format!("unknown policy {s:?} (frontier, random, external)")),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Frontier => "frontier",
            PolicyKind::Random => "random",
            PolicyKind::External => "external",
        })
    }
}

/// Builds a fresh policy. `endpoint` is required for [`PolicyKind::External`].
pub fn make_policy(
    kind: PolicyKind,
    endpoint: Option<&str>,
    seed: u64,
) -> Result<Box<dyn Policy + Send>, BenchError> {
    Ok(match kind {
        PolicyKind::Frontier => Box::new(FrontierPolicy::default()),
        PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
        PolicyKind::External => {
            let endpoint = endpoint.ok_or_else(|| {
                BenchError::InvalidSpec("external policy needs an endpoint".into())
            })?;
            Box::new(ExternalPolicy::connect(endpoint)?)
        }
    })
}

/// One benchmark condition. At most one of `n_obstacles` and `occupancy`
/// may be set; with neither the arena is obstacle-free.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Condition {
    pub label: Option<String>,
    pub n_obstacles: Option<usize>,
    pub occupancy: Option<f64>,
    pub p_l: f64,
}

impl Condition {
    pub fn count(n: usize, p_l: f64) -> Self {
        Condition {
            n_obstacles: Some(n),
            p_l,
            ..Condition::default()
        }
    }

    pub fn occupancy(target: f64, p_l: f64) -> Self {
        Condition {
            occupancy: Some(target),
            p_l,
            ..Condition::default()
        }
    }

    pub fn obstacles(&self) -> Result<ObstacleSpec, BenchError> {
        match (self.n_obstacles, self.occupancy) {
            (Some(_), Some(_)) => Err(BenchError::InvalidSpec(
                "condition sets both n_obstacles and occupancy".into(),
            )),
            (Some(n), None) => Ok(ObstacleSpec::Count(n)),
            (None, Some(o)) => Ok(ObstacleSpec::Occupancy(o)),
            (None, None) => Ok(ObstacleSpec::Count(0)),
        }
    }

    pub fn name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.obstacles() {
            Ok(ObstacleSpec::Occupancy(o)) => format!("occ={o} p_l={}", self.p_l),
            Ok(ObstacleSpec::Count(n)) => format!("n={n} p_l={}", self.p_l),
            Err(_) => "invalid".into(),
        }
    }
}

/// Checkpoints `step, 2 step, ..` up to and including `max`.
pub fn every(step: u64, max: u64) -> Vec<u64> {
    (1..=max / step.max(1)).map(|k| k * step).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub policy: PolicyKind,
    pub endpoint: Option<String>,
    pub trials: usize,
    pub conditions: Vec<Condition>,
    /// Observation counts at which trials are sampled, ascending.
    pub checkpoints: Vec<u64>,
    /// Base seed; trial `t` uses `derive_seed(seed, t)` under every condition.
    pub seed: u64,
    /// Explicit per-trial seeds, overriding `seed`. Length must equal `trials`.
    pub seeds: Option<Vec<u64>>,
    /// Confidence level of the intervals.
    pub level: f64,
    pub settings: EnvSettings,
    /// Obstacle size ranges.
    pub shapes: CurriculumConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            policy: PolicyKind::Frontier,
            endpoint: None,
            trials: 10,
            conditions: Vec::new(),
            checkpoints: every(50, 3000),
            seed: 0,
            seeds: None,
            level: 0.95,
            settings: EnvSettings::default(),
            shapes: CurriculumConfig::default(),
        }
    }
}

impl BenchSpec {
    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let spec: BenchSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.trials < 2 {
            return bad(format!("{} trials; intervals need at least 2", self.trials));
        }
        if self.conditions.is_empty() {
            return bad("no conditions".into());
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be non-empty and strictly ascending".into());
        }
        if let Some(s) = &self.seeds {
            if s.len() != self.trials {
                return bad(format!("{} seeds for {} trials", s.len(), self.trials));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("confidence level {} outside (0, 1)", self.level));
        }
        if self.policy == PolicyKind::External && self.endpoint.is_none() {
            return bad("external policy needs an endpoint".into());
        }
        for c in &self.conditions {
            if let ObstacleSpec::Occupancy(o) = c.obstacles()? {
                if !(0.0..1.0).contains(&o) {
                    return bad(format!("occupancy target {o} outside [0, 1)"));
                }
            }
            if !(0.0..=1.0).contains(&c.p_l) {
                return bad(format!("p_l {} outside [0, 1]", c.p_l));
            }
        }
        self.shapes.validate()?;
        self.settings.world.validate()?;
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[trial],
            None => derive_seed(self.seed, trial as u64),
        }
    }
}

/// Counts of one trial at one checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub checkpoint: u64,
    /// `obs_count` of the sampled row; 0 if no row qualifies.
    pub obs_count: u64,
    pub step: u64,
    pub counts: [usize; 3],
}

/// Samples `log` at each checkpoint: the last row with `obs_count <= k`, or
/// the empty start state if there is none.
pub fn sample_checkpoints(log: &EpisodeLog, checkpoints: &[u64]) -> Vec<Sample> {
    checkpoints
        .iter()
        .map(|&k| {
            let idx = log.rows.partition_point(|r| r.obs_count <= k);
            match idx.checked_sub(1).map(|i| &log.rows[i]) {
                Some(r) => Sample {
                    checkpoint: k,
                    obs_count: r.obs_count,
                    step: r.step,
                    counts: [r.c0, r.c1, r.c2],
                },
                None => Sample {
                    checkpoint: k,
                    obs_count: 0,
                    step: 0,
                    counts: [0; 3],
                },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub n_obstacles: usize,
    pub occupancy: f64,
    pub landmarks: usize,
    pub remaining: usize,
    pub done: bool,
    pub truncated: bool,
    pub steps: u64,
    pub obs_count: u64,
    pub counts: [usize; 3],
    pub comm_total: u64,
    pub collisions: u64,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub condition: usize,
    pub trial: usize,
    pub seed: u64,
    /// The error message if the trial could not be run.
    pub outcome: Result<TrialOutcome, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub condition: String,
    pub checkpoint: u64,
    pub metric: &'static str,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs one trial: builds the map from the trial seed, then one episode.
pub fn run_trial(spec: &BenchSpec, condition: usize, trial: usize) -> TrialRecord {
    let seed = spec.trial_seed(trial);
    let outcome = run_trial_inner(spec, &spec.conditions[condition], seed).map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::warn!("condition {condition} trial {trial} failed: {e}");
    }
    TrialRecord {
        condition,
        trial,
        seed,
        outcome,
    }
}

fn run_trial_inner(spec: &BenchSpec, cond: &Condition, seed: u64) -> Result<TrialOutcome, BenchError> {
    let cfg = map_config(&spec.settings, &spec.shapes, cond.obstacles()?, cond.p_l, seed)?;
    let episode = Episode::new(spec.settings.clone(), &cfg)?;
    let world = episode.world();
    let (n_obstacles, occupancy, landmarks) = (
        world.obstacles().len(),
        world.occupancy_percentage(),
        world.landmarks().len(),
    );
    let mut policy = make_policy(spec.policy, spec.endpoint.as_deref(), seed)?;
    let log = episode.run(&mut policy)?;
    let last = log.last().cloned();
    Ok(TrialOutcome {
        n_obstacles,
        occupancy,
        landmarks,
        remaining: log.remaining,
        done: log.done,
        truncated: log.truncated,
        steps: log.rows.len() as u64,
        obs_count: last.as_ref().map_or(0, |r| r.obs_count),
        counts: last.as_ref().map_or([0; 3], |r| [r.c0, r.c1, r.c2]),
        comm_total: last.as_ref().map_or(0, |r| r.comm_total),
        collisions: last.as_ref().map_or(0, |r| r.collisions),
        samples: sample_checkpoints(&log, &spec.checkpoints),
    })
}

/// Means and intervals per condition, checkpoint and metric over the
/// trials that completed.
pub fn aggregate(spec: &BenchSpec, trials: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (ci, cond) in spec.conditions.iter().enumerate() {
        let done: Vec<&TrialOutcome> = trials
            .iter()
            .filter(|t| t.condition == ci)
            .filter_map(|t| t.outcome.as_ref().ok())
            .collect();
        for (k, &checkpoint) in spec.checkpoints.iter().enumerate() {
            for (m, metric) in METRICS.iter().enumerate() {
                let values: Vec<f64> = done.iter().map(|t| t.samples[k].counts[m] as f64).collect();
                rows.push(AggregateRow {
                    condition: cond.name(),
                    checkpoint,
                    metric,
                    summary: summarize(&values, spec.level),
                });
            }
        }
    }
    rows
}

/// Runs every trial of every condition. Trials of a condition run on the
/// rayon pool; aggregation is sequential.
pub fn bench(spec: &BenchSpec) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let mut trials = Vec::with_capacity(spec.conditions.len() * spec.trials);
    for ci in 0..spec.conditions.len() {
        let mut batch: Vec<TrialRecord> = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, ci, t))
            .collect();
        batch.sort_by_key(|r| r.trial);
        log::info!(
            "condition {:?}: {}/{} trials completed",
            spec.conditions[ci].name(),
            batch.iter().filter(|r| r.outcome.is_ok()).count(),
            spec.trials
        );
        trials.extend(batch);
    }
    let aggregate = aggregate(spec, &trials);
    Ok(BenchReport {
        spec: spec.clone(),
        trials,
        aggregate,
    })
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

impl BenchReport {
    /// Conditions with fewer than two completed trials.
    pub fn degenerate_conditions(&self) -> Vec<String> {
        self.spec
            .conditions
            .iter()
            .enumerate()
            .filter(|(ci, _)| {
                self.trials
                    .iter()
                    .filter(|t| t.condition == *ci && t.outcome.is_ok())
                    .count()
                    < 2
            })
            .map(|(_, c)| c.name())
            .collect()
    }

    /// One row per trial and checkpoint:
    /// `condition,trial,seed,checkpoint,obs_count,step,c0,c1,c2`.
    pub fn write_raw<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["condition", "trial", "seed", "checkpoint", "obs_count", "step", "c0", "c1", "c2"])?;
        for t in &self.trials {
            let Ok(o) = &t.outcome else { continue };
            let name = self.spec.conditions[t.condition].name();
            for s in &o.samples {
                w.write_record([
                    name.clone(),
                    t.trial.to_string(),
                    t.seed.to_string(),
                    s.checkpoint.to_string(),
                    s.obs_count.to_string(),
                    s.step.to_string(),
                    s.counts[0].to_string(),
                    s.counts[1].to_string(),
                    s.counts[2].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per trial with its map and final state; failed trials carry
    /// the error text.
    pub fn write_trials<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "condition", "trial", "seed", "n_obstacles", "occupancy", "landmarks", "remaining", "done",
            "truncated", "steps", "obs_count", "c0", "c1", "c2", "comm_total", "collisions", "error",
        ])?;
        for t in &self.trials {
            let mut rec = vec![
                self.spec.conditions[t.condition].name(),
                t.trial.to_string(),
                t.seed.to_string(),
            ];
            match &t.outcome {
                Ok(o) => {
                    rec.extend([
                        o.n_obstacles.to_string(),
                        o.occupancy.to_string(),
                        o.landmarks.to_string(),
                        o.remaining.to_string(),
                        o.done.to_string(),
                        o.truncated.to_string(),
                        o.steps.to_string(),
                        o.obs_count.to_string(),
                        o.counts[0].to_string(),
                        o.counts[1].to_string(),
                        o.counts[2].to_string(),
                        o.comm_total.to_string(),
                        o.collisions.to_string(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    rec.extend(std::iter::repeat_n(String::new(), 13));
                    rec.push(e.clone());
                }
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `condition,checkpoint,metric,mean,ci_lo,ci_hi,n,degenerate`. Undefined
    /// values are left empty.
    pub fn write_aggregate<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["condition", "checkpoint", "metric", "mean", "ci_lo", "ci_hi", "n", "degenerate"])?;
        for r in &self.aggregate {
            let s = &r.summary;
            w.write_record([
                r.condition.clone(),
                r.checkpoint.to_string(),
                r.metric.to_string(),
                num(s.mean),
                num(s.ci_lo),
                num(s.ci_hi),
                s.n.to_string(),
                s.degenerate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Chart of one metric against observation count, one series per condition.
    pub fn svg(&self, metric: &str) -> String {
        let series: Vec<Series> = self
            .spec
            .conditions
            .iter()
            .map(|c| {
                let name = c.name();
                Series {
                    points: self
                        .aggregate
                        .iter()
                        .filter(|r| r.condition == name && r.metric == metric)
                        .map(|r| (r.checkpoint as f64, r.summary.mean, r.summary.ci_lo, r.summary.ci_hi))
                        .collect(),
                    label: name,
                }
            })
            .collect();
        let title = format!(
            "{metric} vs observations ({}, {} trials, {:.0}% CI)",
            self.spec.policy,
            self.spec.trials,
            self.spec.level * 100.0
        );
        line_chart(&title, "observations", &format!("{metric} count"), &series)
    }

    /// Writes `raw.csv`, `trials.csv`, `aggregate.csv` and one SVG per
    /// metric into `dir`, returning the paths.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, BenchError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let mut file = |name: &str| -> Result<fs::File, BenchError> {
            let p = dir.join(name);
            paths.push(p.clone());
            Ok(fs::File::create(p)?)
        };
        self.write_raw(file("raw.csv")?)?;
        self.write_trials(file("trials.csv")?)?;
        self.write_aggregate(file("aggregate.csv")?)?;
        for m in METRICS {
            fs::write(dir.join(format!("{m}.svg")), self.svg(m))?;
            paths.push(dir.join(format!("{m}.svg")));
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LogRow;
    use crate::world::WorldConfig;

    fn row(step: u64, obs: u64, c0: usize) -> LogRow {
        LogRow {
            episode: 0,
            step,
            obs_count: obs,
            c0,
            c1: c0 / 2,
            c2: 0,
            comm_total: 0,
            collisions: 0,
            reward_group: 0.0,
            reward_agents: vec![],
        }
    }

    #[test]
    fn checkpoint_sampling() {
        let log = EpisodeLog {
            rows: vec![row(0, 2, 1), row(1, 2, 3), row(2, 5, 4), row(3, 9, 8)],
            ..EpisodeLog::default()
        };
        let s = sample_checkpoints(&log, &[1, 2, 4, 5, 100]);
        assert_eq!(s[0].counts, [0, 0, 0]);
        assert_eq!((s[1].step, s[1].counts[0]), (1, 3));
        assert_eq!(s[2].counts[0], 3);
        assert_eq!(s[3].counts[0], 4);
        assert_eq!((s[4].obs_count, s[4].counts[0]), (9, 8));
    }

    #[test]
    fn spec_defaults_and_validation() {
        let spec = BenchSpec::from_json(r#"{"conditions":[{"n_obstacles":2,"p_l":0.1}]}"#).unwrap();
        assert_eq!(spec.trials, 10);
        assert_eq!(spec.checkpoints.len(), 60);
        assert_eq!(*spec.checkpoints.last().unwrap(), 3000);
        assert_eq!(spec.conditions[0].name(), "n=2 p_l=0.1");
        for bad in [
            r#"{"conditions":[]}"#,
            r#"{"trials":1,"conditions":[{}]}"#,
            r#"{"conditions":[{"n_obstacles":1,"occupancy":0.2}]}"#,
            r#"{"conditions":[{"p_l":1.5}]}"#,
            r#"{"checkpoints":[10,10],"conditions":[{}]}"#,
            r#"{"seeds":[1],"conditions":[{}]}"#,
            r#"{"policy":"external","conditions":[{}]}"#,
        ] {
            assert!(matches!(BenchSpec::from_json(bad), Err(BenchError::InvalidSpec(_))), "{bad}");
        }
        assert_eq!("random".parse::<PolicyKind>(), Ok(PolicyKind::Random));
        assert!("nope".parse::<PolicyKind>().is_err());
    }

    fn tiny_spec() -> BenchSpec {
        BenchSpec {
            policy: PolicyKind::Random,
            trials: 3,
            conditions: vec![Condition::count(0, 0.0)],
            checkpoints: every(5, 30),
            settings: EnvSettings {
                world: WorldConfig {
                    width: 40.0,
                    height: 40.0,
                    ..WorldConfig::default()
                },
                max_steps: 200,
                ..EnvSettings::default()
            },
            ..BenchSpec::default()
        }
    }

    #[test]
    fn identical_seeds_give_zero_width() {
        let spec = BenchSpec {
            seeds: Some(vec![5, 5, 5]),
            ..tiny_spec()
        };
        let report = bench(&spec).unwrap();
        assert!(report.degenerate_conditions().is_empty());
        for r in &report.aggregate {
            assert_eq!(r.summary.ci_lo, r.summary.mean);
            assert_eq!(r.summary.ci_hi, r.summary.mean);
        }
    }

    #[test]
    fn failed_trials_make_a_condition_degenerate() {
        let mut spec = tiny_spec();
        // An obstacle larger than the arena cannot be placed.
        spec.shapes.width_range = (45.0, 50.0);
        spec.conditions.push(Condition::count(1, 0.0));
        let report = bench(&spec).unwrap();
        assert_eq!(report.degenerate_conditions(), vec!["n=1 p_l=0".to_string()]);
        let mut out = Vec::new();
        report.write_trials(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().last().unwrap().contains("could not place"));
        let mut agg = Vec::new();
        report.write_aggregate(&mut agg).unwrap();
        assert!(String::from_utf8(agg).unwrap().contains("n=1 p_l=0,5,c0,,,,0,true"));
    }

    #[test]
    fn samples_are_monotone_and_outputs_written() {
        let report = bench(&tiny_spec()).unwrap();
        for t in &report.trials {
            let o = t.outcome.as_ref().unwrap();
            for w in o.samples.windows(2) {
                for m in 0..3 {
                    assert!(w[0].counts[m] <= w[1].counts[m]);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let paths = report.write_outputs(dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        let svg = fs::read_to_string(dir.path().join("c0.svg")).unwrap();
        assert!(svg.contains("<polyline"));
        let raw = fs::read_to_string(dir.path().join("raw.csv")).unwrap();
        assert_eq!(raw.lines().count(), 1 + 3 * 6);
    }
}
