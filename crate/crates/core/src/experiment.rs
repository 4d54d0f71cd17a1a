//! Monte Carlo harness: perception configurations × seeded runs, the
//! pass/fail judgement and per-config aggregation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    required_capacity, CoPem, EngineError, GroundTruth, Mount, Perception, PerceptionUnit,
    WorldBuffer,
};
use crate::geometry::footprint_distance;
use crate::pem::{ActorId, ClassTag, WorldState};
use crate::policy::{decide, Mode, PolicyError, PolicyParams, PolicyState};
use crate::rng::{run_seed, FrameStreams};
use crate::scenario::{min_actor_distance, step_world, Scenario, ScenarioError};

/// A run fails once the ego comes this close (m) to any actor.
pub const SAFETY_DISTANCE: f64 = 0.5;
/// Width of detection-distance histogram bins (m).
pub const HISTOGRAM_BIN_WIDTH: f64 = 1.0;
/// Number of histogram bins, covering `[0, 25)` m; larger values land in the last bin.
pub const HISTOGRAM_BINS: usize = 25;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid perception config '{label}': {reason}")]
    Config { label: String, reason: String },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerceptionKind {
    GroundTruth,
    PemOnly,
    Copem { latency: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionConfig {
    pub kind: PerceptionKind,
    pub label: String,
}

impl PerceptionConfig {
    pub fn new(label: impl Into<String>, kind: PerceptionKind) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }

    pub fn latency(&self) -> f64 {
        match self.kind {
            PerceptionKind::Copem { latency } => latency,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let l = self.latency();
        if !(l >= 0.0) || !l.is_finite() {
            return Err(RunError::Config {
                label: self.label.clone(),
                reason: format!("latency {l} must be >= 0"),
            });
        }
        if self.label.is_empty() || self.label.contains([',', '\n', '"']) {
            return Err(RunError::Config {
                label: self.label.clone(),
                reason: "label must be non-empty and free of commas, quotes and newlines".into(),
            });
        }
        Ok(())
    }

    /// Builds the perception model this config stands for.
    pub fn build(&self, scenario: &Scenario) -> Result<Box<dyn Perception>, RunError> {
        let onboard = || PerceptionUnit {
            unit_id: 0,
            mount: Mount::Ego,
            pem: scenario.perception.onboard.clone(),
        };
        Ok(match self.kind {
            PerceptionKind::GroundTruth => Box::new(GroundTruth),
            PerceptionKind::PemOnly => Box::new(CoPem::new(vec![onboard()], 0.0)?),
            PerceptionKind::Copem { latency } => {
                let mut units = vec![onboard()];
                units.extend(scenario.perception.external.iter().cloned());
                Box::new(CoPem::new(units, latency)?)
            }
        })
    }
}

/// The six configurations of the reference experiment.
pub fn default_configs() -> Vec<PerceptionConfig> {
    let mut v = vec![
        PerceptionConfig::new("GT", PerceptionKind::GroundTruth),
        PerceptionConfig::new("PEM", PerceptionKind::PemOnly),
    ];
    for (label, latency) in [("0s", 0.0), ("0.5s", 0.5), ("1s", 1.0), ("1.5s", 1.5)] {
        v.push(PerceptionConfig::new(
            format!("coPEM:{label}"),
            PerceptionKind::Copem { latency },
        ));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Pass,
    FailCollision,
    FailTimeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::FailCollision => "fail_collision",
            Outcome::FailTimeout => "fail_timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pass" => Ok(Outcome::Pass),
            "fail_collision" => Ok(Outcome::FailCollision),
            "fail_timeout" => Ok(Outcome::FailTimeout),
            other => Err(format!("unknown outcome '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub ego_speed: f64,
    pub pedestrian_distance: f64,
    pub pedestrian_detected: bool,
    pub braking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config_index: usize,
    pub run_index: usize,
    pub label: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub min_distance: f64,
    /// True ego–object gap when the first threat was perceived.
    pub detection_distance: Option<f64>,
    pub steps: u64,
    pub trace: Vec<TraceRecord>,
}

fn nearest_pedestrian(world: &WorldState) -> f64 {
    world
        .objects
        .iter()
        .filter(|o| o.class_tag == ClassTag::Pedestrian)
        .map(|o| footprint_distance(&world.ego.footprint, &o.footprint))
        .fold(f64::INFINITY, f64::min)
}

fn object_gap(world: &WorldState, id: ActorId) -> Option<f64> {
    world
        .object(id)
        .map(|o| footprint_distance(&world.ego.footprint, &o.footprint))
}

/// Validates everything a run needs before any stepping happens.
pub fn validate_setup(
    scenario: &Scenario,
    configs: &[PerceptionConfig],
    params: &PolicyParams,
) -> Result<(), RunError> {
    scenario.validate()?;
    params.validate(scenario.ego.half_width)?;
    for c in configs {
        c.validate()?;
        c.build(scenario)?;
    }
    Ok(())
}

/// Simulates one run: perceive → decide → step, until the destination,
/// a contact closer than [`SAFETY_DISTANCE`], or the timeout.
pub fn run_once(
    scenario: &Scenario,
    config: &PerceptionConfig,
    config_index: usize,
    run_index: usize,
    params: &PolicyParams,
    seed: u64,
) -> Result<RunResult, RunError> {
    run_once_with_buffer(
        scenario,
        config,
        config_index,
        run_index,
        params,
        seed,
        None,
    )
}

/// [`run_once`] with an explicit world-history capacity. `None` sizes the
/// buffer from the config's latency.
pub fn run_once_with_buffer(
    scenario: &Scenario,
    config: &PerceptionConfig,
    config_index: usize,
    run_index: usize,
    params: &PolicyParams,
    seed: u64,
    buffer_capacity: Option<usize>,
) -> Result<RunResult, RunError> {
    validate_setup(scenario, std::slice::from_ref(config), params)?;
    let perception = config.build(scenario)?;
    let need = required_capacity(perception.latency(), scenario.dt);
    let capacity = match buffer_capacity {
        None => need + 1,
        Some(c) if c >= need => c,
        Some(c) => {
            return Err(RunError::Config {
                label: config.label.clone(),
                reason: format!("buffer capacity {c} below the {need} states its latency needs"),
            })
        }
    };
    let mut buffer = WorldBuffer::new(capacity);

    let mut state = scenario.initial_state();
    let mut policy = PolicyState::default();
    let mut min_distance = min_actor_distance(&state.world);
    let mut detection_distance = None;
    let mut trace = Vec::new();
    let mut outcome = Outcome::FailTimeout;

    for step in 0..scenario.max_steps() {
        let world = &state.world;
        buffer.push(world.clone())?;
        let streams = FrameStreams::for_step(seed, step);
        let perceived = perception.perceive(&buffer, world.time, &streams)?;
        let (accel, next_policy) = decide(&perceived, &world.ego, world.time, policy, params);
        if policy.threat_detected_at.is_none() {
            if let Some(ev) = next_policy.threat_detected_at {
                detection_distance = object_gap(world, ev.object);
            }
        }
        policy = next_policy;
        trace.push(TraceRecord {
            time: world.time,
            ego_speed: world.ego.speed,
            pedestrian_distance: nearest_pedestrian(world),
            pedestrian_detected: perceived
                .iter()
                .any(|o| o.class_tag == ClassTag::Pedestrian),
            braking: policy.mode == Mode::Braking,
        });

        state = step_world(scenario, &state, accel);
        let d = min_actor_distance(&state.world);
        min_distance = min_distance.min(d);
        if d <= SAFETY_DISTANCE {
            outcome = Outcome::FailCollision;
            break;
        }
        if scenario.destination_reached(&state.world) {
            outcome = Outcome::Pass;
            break;
        }
    }

    Ok(RunResult {
        config_index,
        run_index,
        label: config.label.clone(),
        seed,
        outcome,
        min_distance,
        detection_distance,
        steps: trace.len() as u64,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum TraceRetention {
    #[default]
    All,
    Failures,
    None,
}

impl TraceRetention {
    fn keep(self, outcome: Outcome) -> bool {
        match self {
            TraceRetention::All => true,
            TraceRetention::Failures => outcome != Outcome::Pass,
            TraceRetention::None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    pub runs_per_config: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub retention: TraceRetention,
    pub buffer_capacity: Option<usize>,
}

/// Runs every (config, run) pair. Seeds depend only on
/// `(base_seed, config index, run index)`, and results come back sorted by
/// that pair, so output is independent of scheduling.
pub fn run_batch(
    scenario: &Scenario,
    configs: &[PerceptionConfig],
    params: &PolicyParams,
    opts: &BatchOptions,
) -> Result<(Vec<RunResult>, Summary), RunError> {
    validate_setup(scenario, configs, params)?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..opts.runs_per_config).map(move |r| (c, r)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(c, r)| {
                let seed = run_seed(opts.base_seed, c, r);
                let mut res = run_once_with_buffer(
                    scenario,
                    &configs[c],
                    c,
                    r,
                    params,
                    seed,
                    opts.buffer_capacity,
                )?;
                if !opts.retention.keep(res.outcome) {
                    res.trace.clear();
                }
                Ok(res)
            })
            .collect::<Result<Vec<_>, RunError>>()
    };
    let mut results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RunError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    results.sort_by_key(|r| (r.config_index, r.run_index));
    let rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    let summary = Summary::from_rows(&rows);
    Ok((results, summary))
}

/// Rounds to the 6-decimal precision used in every exported table.
pub fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// Per-run record as exported, with distances at export precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config_index: usize,
    pub run_index: usize,
    pub label: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub min_distance: f64,
    pub detection_distance: Option<f64>,
    pub steps: u64,
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        Self {
            config_index: r.config_index,
            run_index: r.run_index,
            label: r.label.clone(),
            seed: r.seed,
            outcome: r.outcome,
            min_distance: round6(r.min_distance),
            detection_distance: r.detection_distance.map(round6),
            steps: r.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub config_index: usize,
    pub label: String,
    pub runs: usize,
    pub successes: usize,
    pub detections: usize,
    pub detection_mean: Option<f64>,
    /// Sample standard deviation; `None` below two detections.
    pub detection_std: Option<f64>,
    pub histogram: [usize; HISTOGRAM_BINS],
}

impl ConfigSummary {
    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub configs: Vec<ConfigSummary>,
}

fn histogram_bin(d: f64) -> usize {
    ((d / HISTOGRAM_BIN_WIDTH).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

impl Summary {
    /// Aggregates rows per config index (ascending).
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let mut sorted: Vec<&ResultRow> = rows.iter().collect();
        sorted.sort_by_key(|r| (r.config_index, r.run_index));
        let mut configs: Vec<ConfigSummary> = Vec::new();
        for group in sorted.chunk_by(|a, b| a.config_index == b.config_index) {
            let dists: Vec<f64> = group.iter().filter_map(|r| r.detection_distance).collect();
            let n = dists.len();
            let mean = (n > 0).then(|| dists.iter().sum::<f64>() / n as f64);
            let std = (n > 1).then(|| {
                let m = mean.expect("n > 0");
                (dists.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            });
            let mut histogram = [0; HISTOGRAM_BINS];
            for &d in &dists {
                histogram[histogram_bin(d)] += 1;
            }
            configs.push(ConfigSummary {
                config_index: group[0].config_index,
                label: group[0].label.clone(),
                runs: group.len(),
                successes: group.iter().filter(|r| r.outcome == Outcome::Pass).count(),
                detections: n,
                detection_mean: mean,
                detection_std: std,
                histogram,
            });
        }
        Summary { configs }
    }

    pub fn get(&self, label: &str) -> Option<&ConfigSummary> {
        self.configs.iter().find(|c| c.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    fn row(c: usize, r: usize, outcome: Outcome, det: Option<f64>) -> ResultRow {
        ResultRow {
            config_index: c,
            run_index: r,
            label: format!("c{c}"),
            seed: 0,
            outcome,
            min_distance: 1.0,
            detection_distance: det,
            steps: 10,
        }
    }

    #[test]
    fn summary_aggregates() {
        let rows = vec![
            row(1, 0, Outcome::Pass, Some(3.5)),
            row(0, 0, Outcome::Pass, Some(19.2)),
            row(0, 1, Outcome::FailCollision, Some(17.2)),
            row(1, 1, Outcome::FailTimeout, None),
        ];
        let s = Summary::from_rows(&rows);
        assert_eq!(s.configs.len(), 2);
        let c0 = &s.configs[0];
        assert_eq!((c0.runs, c0.successes, c0.detections), (2, 1, 2));
        assert!((c0.detection_mean.unwrap() - 18.2).abs() < 1e-12);
        assert!((c0.detection_std.unwrap() - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(c0.histogram[19] + c0.histogram[17], 2);
        assert_eq!(s.configs[1].detection_std, None);
        assert_eq!(s.configs[1].histogram.iter().sum::<usize>(), 1);
    }

    #[test]
    fn ground_truth_run_passes_and_detects_at_trigger() {
        let s = default_scenario();
        let gt = PerceptionConfig::new("GT", PerceptionKind::GroundTruth);
        let r = run_once(&s, &gt, 0, 0, &PolicyParams::default(), 7).unwrap();
        assert_eq!(r.outcome, Outcome::Pass, "{r:?}");
        assert!(r.min_distance > SAFETY_DISTANCE);
        let d = r.detection_distance.unwrap();
        assert!(
            d <= 20.0 && d > 20.0 - 10.0 * s.dt - 1e-9,
            "detected at {d}"
        );
        assert_eq!(r.steps as usize, r.trace.len());
    }

    #[test]
    fn same_seed_same_result() {
        let s = default_scenario();
        let cfg = PerceptionConfig::new("PEM", PerceptionKind::PemOnly);
        let p = PolicyParams::default();
        let a = run_once(&s, &cfg, 1, 3, &p, 99).unwrap();
        let b = run_once(&s, &cfg, 1, 3, &p, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outcome_strings_roundtrip() {
        for o in [Outcome::Pass, Outcome::FailCollision, Outcome::FailTimeout] {
            assert_eq!(o.as_str().parse::<Outcome>().unwrap(), o);
        }
        assert!("crash".parse::<Outcome>().is_err());
    }

    #[test]
    fn bad_label_rejected() {
        let c = PerceptionConfig::new("a,b", PerceptionKind::GroundTruth);
        assert!(c.validate().is_err());
        let c = PerceptionConfig::new("x", PerceptionKind::Copem { latency: -1.0 });
        assert!(c.validate().is_err());
    }
}
