//! TOML scenario and experiment files.
//!
//! Parsing rejects unknown keys. Semantic problems are collected rather
//! than stopping at the first one, each with the file position it came from.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::engine::{required_capacity, Mount, PerceptionUnit};
use crate::experiment::{PerceptionConfig, PerceptionKind};
use crate::geometry::{Footprint, Pose2, SectorGate, Vec2, DEFAULT_VISIBILITY_SAMPLES};
use crate::linalg::Mat2;
use crate::pem::{ActorId, ConditionRule, DetectionModel, ErrorModel, GaussianError, Pem};
use crate::policy::PolicyParams;
use crate::scenario::{
    Actor, ActorKind, EgoRoute, PerceptionSetup, Scenario, Trigger, TriggerAction, TriggerCondition,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: PathBuf,
    /// 1-based line and column, when the problem has a location.
    pub position: Option<(usize, usize)>,
    pub source_line: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self.file.display();
        match self.position {
            Some((line, col)) => write!(f, "{file}:{line}:{col}: error: {}", self.message)?,
            None => write!(f, "{file}: error: {}", self.message)?,
        }
        if let (Some((line, _)), Some(text)) = (self.position, &self.source_line) {
            write!(f, "\n{line:>5} | {text}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(Diagnostics),
}

/// A config file's text, for turning byte spans into positions.
#[derive(Debug, Clone)]
struct Source {
    path: PathBuf,
    text: String,
}

impl Source {
    fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
        })
    }

    fn diag(&self, span: Option<Range<usize>>, message: impl Into<String>) -> Diagnostic {
        let located = span.map(|s| {
            let start = s.start.min(self.text.len());
            let before = &self.text[..start];
            let line_start = before.rfind('\n').map_or(0, |i| i + 1);
            let line = before.matches('\n').count() + 1;
            let col = self.text[line_start..start].chars().count() + 1;
            let text = self.text[line_start..]
                .lines()
                .next()
                .unwrap_or("")
                .to_string();
            ((line, col), text)
        });
        Diagnostic {
            file: self.path.clone(),
            position: located.as_ref().map(|(p, _)| *p),
            source_line: located.map(|(_, t)| t),
            message: message.into(),
        }
    }

    fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T, Diagnostic> {
        toml::from_str(&self.text).map_err(|e| self.diag(e.span(), e.message().trim().to_string()))
    }
}

// ---------------------------------------------------------------- scenario

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    dt: Spanned<f64>,
    timeout: Spanned<f64>,
    ego: Spanned<EgoSection>,
    #[serde(default)]
    actors: Vec<Spanned<ActorSection>>,
    #[serde(default)]
    triggers: Vec<Spanned<TriggerSection>>,
    pems: BTreeMap<String, Spanned<PemSection>>,
    onboard_pem: Spanned<String>,
    #[serde(default)]
    units: Vec<Spanned<UnitSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgoSection {
    start: [f64; 2],
    heading: f64,
    destination: Spanned<[f64; 2]>,
    cruise_speed: f64,
    initial_speed: Option<f64>,
    half_length: f64,
    half_width: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActorKindName {
    Pedestrian,
    ParkedVehicle,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorSection {
    id: u64,
    kind: ActorKindName,
    center: [f64; 2],
    half_length: f64,
    half_width: f64,
    heading: f64,
    #[serde(default)]
    speed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerSection {
    actor: u64,
    ego_within: f64,
    walk_speed: f64,
    walk_direction: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PemSection {
    #[serde(default = "default_samples")]
    visibility_samples: usize,
    rules: Vec<Spanned<RuleSection>>,
}

fn default_samples() -> usize {
    DEFAULT_VISIBILITY_SAMPLES
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DetectionSpec {
    Always,
    Never,
    FixedRate(f64),
    VisibilityProportional,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSection {
    fov_half_angle: f64,
    #[serde(default)]
    min_range: f64,
    max_range: f64,
    detection: Spanned<DetectionSpec>,
    /// Without `covariance` the rule reports positions offset by exactly `mean`.
    #[serde(default)]
    mean: [f64; 2],
    covariance: Option<Spanned<[[f64; 2]; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitSection {
    id: usize,
    pem: Spanned<String>,
    position: Option<[f64; 2]>,
    heading: Option<f64>,
    actor: Option<u64>,
}

fn vec2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn build_rule(
    src: &Source,
    r: &Spanned<RuleSection>,
    out: &mut Vec<Diagnostic>,
) -> Option<ConditionRule> {
    let rule = r.get_ref();
    let mut ok = true;
    let gate = SectorGate {
        fov_half_angle: rule.fov_half_angle,
        min_range: rule.min_range,
        max_range: rule.max_range,
    };
    if let Err(e) = gate.validate() {
        out.push(src.diag(Some(r.span()), e.to_string()));
        ok = false;
    }
    let detection = match *rule.detection.get_ref() {
        DetectionSpec::Always => DetectionModel::Always,
        DetectionSpec::Never => DetectionModel::Never,
        DetectionSpec::VisibilityProportional => DetectionModel::VisibilityProportional,
        DetectionSpec::FixedRate(q) => {
            if !(0.0..=1.0).contains(&q) {
                out.push(src.diag(
                    Some(rule.detection.span()),
                    format!("fixed detection rate {q} outside [0, 1]"),
                ));
                ok = false;
            }
            DetectionModel::FixedRate(q)
        }
    };
    let mean = vec2(rule.mean);
    let error = match &rule.covariance {
        None if mean.is_finite() => ErrorModel::Exact { offset: mean },
        None => {
            out.push(src.diag(Some(r.span()), "non-finite error mean"));
            return None;
        }
        Some(cov) => {
            let [[xx, xy], [yx, yy]] = *cov.get_ref();
            let m = Mat2 { xx, xy, yx, yy };
            if !m.is_symmetric(1e-12) {
                out.push(src.diag(
                    Some(cov.span()),
                    format!("covariance {:?} is not symmetric", cov.get_ref()),
                ));
                return None;
            }
            match GaussianError::new(mean, m) {
                Ok(g) => ErrorModel::Gaussian(g),
                Err(_) => {
                    let (a, b) = m.sym_eigenvalues();
                    out.push(src.diag(
                        Some(cov.span()),
                        format!(
                            "non-positive-definite covariance {:?} (eigenvalues {a}, {b})",
                            cov.get_ref()
                        ),
                    ));
                    return None;
                }
            }
        }
    };
    ok.then_some(ConditionRule {
        gate,
        detection,
        error,
    })
}

fn build_pem(
    src: &Source,
    name: &str,
    p: &Spanned<PemSection>,
    out: &mut Vec<Diagnostic>,
) -> Option<Pem> {
    let before = out.len();
    let rules: Vec<ConditionRule> = p
        .get_ref()
        .rules
        .iter()
        .filter_map(|r| build_rule(src, r, out))
        .collect();
    if out.len() > before {
        return None;
    }
    Pem::with_samples(rules, p.get_ref().visibility_samples)
        .map_err(|e| out.push(src.diag(Some(p.span()), format!("pem '{name}': {e}"))))
        .ok()
}

fn build_scenario(src: &Source, file: ScenarioFile) -> Result<Scenario, Vec<Diagnostic>> {
    let mut out = Vec::new();

    let dt = *file.dt.get_ref();
    if !(dt > 0.0 && dt <= 0.5) {
        out.push(src.diag(Some(file.dt.span()), format!("dt {dt} outside (0, 0.5]")));
    }
    let timeout = *file.timeout.get_ref();
    if !(timeout > 0.0) {
        out.push(src.diag(
            Some(file.timeout.span()),
            format!("timeout {timeout} must be positive"),
        ));
    }

    let e = file.ego.get_ref();
    let ego = EgoRoute {
        start: Pose2::new(vec2(e.start), e.heading),
        destination: vec2(*e.destination.get_ref()),
        cruise_speed: e.cruise_speed,
        initial_speed: e.initial_speed.unwrap_or(e.cruise_speed),
        half_length: e.half_length,
        half_width: e.half_width,
    };
    if !(ego.half_length > 0.0 && ego.half_width > 0.0) {
        out.push(src.diag(Some(file.ego.span()), "ego extents must be positive"));
    }
    if !(ego.cruise_speed > 0.0) || !(ego.initial_speed >= 0.0) {
        out.push(src.diag(
            Some(file.ego.span()),
            "ego cruise speed must be positive and initial speed non-negative",
        ));
    } else if let Err(msg) = ego.check_reachable(timeout) {
        out.push(src.diag(
            Some(e.destination.span()),
            format!("unreachable destination: {msg}"),
        ));
    }

    let mut actors = Vec::new();
    let mut actor_ids = HashSet::new();
    for a in &file.actors {
        let s = a.get_ref();
        if !actor_ids.insert(s.id) {
            out.push(src.diag(Some(a.span()), format!("duplicate actor id {}", s.id)));
        }
        let footprint = Footprint {
            center: vec2(s.center),
            half_length: s.half_length,
            half_width: s.half_width,
            heading: s.heading,
        };
        if let Err(err) = footprint.validate() {
            out.push(src.diag(Some(a.span()), format!("actor {}: {err}", s.id)));
        }
        actors.push(Actor {
            id: ActorId(s.id),
            kind: match s.kind {
                ActorKindName::Pedestrian => ActorKind::Pedestrian,
                ActorKindName::ParkedVehicle => ActorKind::ParkedVehicle,
            },
            footprint,
            speed: s.speed,
            heading: s.heading,
        });
    }

    let triggers: Vec<Trigger> = file
        .triggers
        .iter()
        .map(|t| {
            let s = t.get_ref();
            if !actor_ids.contains(&s.actor) {
                out.push(src.diag(
                    Some(t.span()),
                    format!("trigger references unknown actor {}", s.actor),
                ));
            }
            Trigger {
                actor: ActorId(s.actor),
                condition: TriggerCondition::EgoWithinRange(s.ego_within),
                action: TriggerAction::StartWalking {
                    speed: s.walk_speed,
                    direction: s.walk_direction,
                },
            }
        })
        .collect();

    let pems: BTreeMap<&str, Option<Pem>> = file
        .pems
        .iter()
        .map(|(name, p)| (name.as_str(), build_pem(src, name, p, &mut out)))
        .collect();
    let lookup = |name: &Spanned<String>, out: &mut Vec<Diagnostic>| -> Option<Pem> {
        match pems.get(name.get_ref().as_str()) {
            Some(p) => p.clone(),
            None => {
                out.push(src.diag(
                    Some(name.span()),
                    format!("unknown pem '{}'", name.get_ref()),
                ));
                None
            }
        }
    };
    let onboard = lookup(&file.onboard_pem, &mut out);

    let mut external = Vec::new();
    let mut unit_ids = HashSet::new();
    for u in &file.units {
        let s = u.get_ref();
        if s.id == 0 {
            out.push(src.diag(Some(u.span()), "unit id 0 is reserved for the ego"));
        } else if !unit_ids.insert(s.id) {
            out.push(src.diag(Some(u.span()), format!("duplicate unit id {}", s.id)));
        }
        let mount = match (s.position, s.heading, s.actor) {
            (Some(p), Some(h), None) => Some(Mount::Static(Pose2::new(vec2(p), h))),
            (None, None, Some(id)) => {
                if !actor_ids.contains(&id) {
                    out.push(src.diag(
                        Some(u.span()),
                        format!("unit {} mounted on unknown actor {id}", s.id),
                    ));
                }
                Some(Mount::Actor(ActorId(id)))
            }
            _ => {
                out.push(src.diag(
                    Some(u.span()),
                    format!("unit {} needs either position and heading, or actor", s.id),
                ));
                None
            }
        };
        if let (Some(mount), Some(pem)) = (mount, lookup(&s.pem, &mut out)) {
            external.push(PerceptionUnit {
                unit_id: s.id,
                mount,
                pem,
            });
        }
    }

    if !out.is_empty() {
        return Err(out);
    }
    let scenario = Scenario {
        actors,
        triggers,
        ego,
        dt,
        timeout,
        perception: PerceptionSetup {
            onboard: onboard.expect("diagnosed above"),
            external,
        },
    };
    scenario
        .validate()
        .map_err(|e| vec![src.diag(None, e.to_string())])?;
    Ok(scenario)
}

fn scenario_from_source(src: &Source) -> Result<Scenario, Vec<Diagnostic>> {
    let file = src.parse::<ScenarioFile>().map_err(|d| vec![d])?;
    build_scenario(src, file)
}

pub fn parse_scenario(text: &str, path: impl AsRef<Path>) -> Result<Scenario, Diagnostics> {
    let src = Source {
        path: path.as_ref().to_path_buf(),
        text: text.to_string(),
    };
    scenario_from_source(&src).map_err(Diagnostics)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let src = Source::read(path)?;
    scenario_from_source(&src).map_err(|d| ConfigError::Invalid(Diagnostics(d)))
}

// -------------------------------------------------------------- experiment

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    runs_per_config: Spanned<usize>,
    base_seed: u64,
    /// World-state history kept for latency; derived from the largest
    /// latency when absent.
    buffer_capacity: Option<Spanned<usize>>,
    policy: Option<Spanned<PolicyParams>>,
    configs: Vec<Spanned<ConfigSection>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindName {
    GroundTruth,
    PemOnly,
    Copem,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSection {
    label: String,
    kind: KindName,
    latency: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub configs: Vec<PerceptionConfig>,
    pub runs_per_config: usize,
    pub base_seed: u64,
    pub buffer_capacity: Option<usize>,
    pub policy: PolicyParams,
}

impl Experiment {
    pub fn max_latency(&self) -> f64 {
        self.configs
            .iter()
            .map(PerceptionConfig::latency)
            .fold(0.0, f64::max)
    }
}

/// Parsed experiment plus what is needed to locate cross-file problems.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub experiment: Experiment,
    src: Source,
    capacity_span: Option<Range<usize>>,
    policy_span: Option<Range<usize>>,
    config_spans: Vec<Range<usize>>,
}

fn experiment_from_source(src: Source) -> Result<LoadedExperiment, Vec<Diagnostic>> {
    let file = src.parse::<ExperimentFile>().map_err(|d| vec![d])?;
    let mut out = Vec::new();
    if *file.runs_per_config.get_ref() == 0 {
        out.push(src.diag(
            Some(file.runs_per_config.span()),
            "runs_per_config must be at least 1",
        ));
    }
    if file.configs.is_empty() {
        out.push(src.diag(None, "at least one [[configs]] entry is required"));
    }
    let mut labels = HashSet::new();
    let mut configs = Vec::new();
    for c in &file.configs {
        let s = c.get_ref();
        let kind = match (s.kind, &s.latency) {
            (KindName::GroundTruth, None) => PerceptionKind::GroundTruth,
            (KindName::PemOnly, None) => PerceptionKind::PemOnly,
            (KindName::Copem, Some(l)) => PerceptionKind::Copem {
                latency: *l.get_ref(),
            },
            (KindName::Copem, None) => {
                out.push(src.diag(
                    Some(c.span()),
                    format!("config '{}': copem needs a latency", s.label),
                ));
                continue;
            }
            (_, Some(l)) => {
                out.push(src.diag(
                    Some(l.span()),
                    format!("config '{}': latency only applies to copem", s.label),
                ));
                continue;
            }
        };
        let config = PerceptionConfig::new(s.label.clone(), kind);
        if let Err(e) = config.validate() {
            let span = s.latency.as_ref().map_or(c.span(), |l| l.span());
            out.push(src.diag(Some(span), e.to_string()));
        }
        if !labels.insert(s.label.clone()) {
            out.push(src.diag(
                Some(c.span()),
                format!("duplicate config label '{}'", s.label),
            ));
        }
        configs.push(config);
    }
    if !out.is_empty() {
        return Err(out);
    }
    Ok(LoadedExperiment {
        experiment: Experiment {
            configs,
            runs_per_config: *file.runs_per_config.get_ref(),
            base_seed: file.base_seed,
            buffer_capacity: file.buffer_capacity.as_ref().map(|c| *c.get_ref()),
            policy: file
                .policy
                .as_ref()
                .map(|p| *p.get_ref())
                .unwrap_or_default(),
        },
        capacity_span: file.buffer_capacity.as_ref().map(Spanned::span),
        policy_span: file.policy.as_ref().map(Spanned::span),
        config_spans: file.configs.iter().map(Spanned::span).collect(),
        src,
    })
}

pub fn parse_experiment(
    text: &str,
    path: impl AsRef<Path>,
) -> Result<LoadedExperiment, Diagnostics> {
    experiment_from_source(Source {
        path: path.as_ref().to_path_buf(),
        text: text.to_string(),
    })
    .map_err(Diagnostics)
}

pub fn load_experiment(path: &Path) -> Result<LoadedExperiment, ConfigError> {
    experiment_from_source(Source::read(path)?).map_err(|d| ConfigError::Invalid(Diagnostics(d)))
}

impl LoadedExperiment {
    /// Problems that need the scenario as well: history buffer size against
    /// the largest latency, policy against the ego, and unit composition.
    pub fn check_against(&self, scenario: &Scenario) -> Vec<Diagnostic> {
        let exp = &self.experiment;
        let mut out = Vec::new();
        if let Some(cap) = exp.buffer_capacity {
            let max = exp.max_latency();
            let need = required_capacity(max, scenario.dt);
            if cap < need {
                out.push(self.src.diag(
                    self.capacity_span.clone(),
                    format!(
                        "buffer capacity {cap} too small: coPEM latency {max} s at dt {} s needs ceil({max}/{})+1 = {need}",
                        scenario.dt, scenario.dt
                    ),
                ));
            }
        }
        if let Err(e) = exp.policy.validate(scenario.ego.half_width) {
            out.push(self.src.diag(self.policy_span.clone(), e.to_string()));
        }
        for (c, span) in exp.configs.iter().zip(&self.config_spans) {
            if let Err(e) = c.build(scenario) {
                out.push(self.src.diag(Some(span.clone()), e.to_string()));
            }
        }
        out
    }
}

/// Loads and cross-checks both files, reporting every problem found.
pub fn load_pair(
    scenario: &Path,
    experiment: &Path,
) -> Result<(Scenario, Experiment), ConfigError> {
    let s = load_scenario(scenario);
    let e = load_experiment(experiment);
    let mut diags = Vec::new();
    let mut take = |r: ConfigError| match r {
        ConfigError::Invalid(d) => {
            diags.extend(d.0);
            Ok(())
        }
        io => Err(io),
    };
    let s = match s {
        Ok(s) => Some(s),
        Err(err) => {
            take(err)?;
            None
        }
    };
    let e = match e {
        Ok(e) => Some(e),
        Err(err) => {
            take(err)?;
            None
        }
    };
    if let (Some(s), Some(e)) = (&s, &e) {
        diags.extend(e.check_against(s));
    }
    match (s, e) {
        (Some(s), Some(e)) if diags.is_empty() => Ok((s, e.experiment)),
        _ => Err(ConfigError::Invalid(Diagnostics(diags))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dt = 0.1
timeout = 60.0
onboard_pem = "onboard"

[ego]
start = [0.0, 0.0]
heading = 0.0
destination = [100.0, 0.0]
cruise_speed = 10.0
half_length = 2.3
half_width = 0.9

[pems.onboard]
[[pems.onboard.rules]]
fov_half_angle = 3.141592653589793
max_range = 100.0
detection = "visibility_proportional"
covariance = [[1.0, 0.0], [0.0, 1.0]]
"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = parse_scenario(MINIMAL, "s.toml").unwrap();
        assert_eq!(s.ego.initial_speed, 10.0);
        assert!(s.actors.is_empty());
        assert_eq!(s.perception.onboard.rules().len(), 1);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("cruise_speed = 10.0", "cruise_speed = 10.0\nturbo = true");
        let d = parse_scenario(&text, "s.toml").unwrap_err();
        assert_eq!(d.0.len(), 1);
        assert!(d.0[0].message.contains("turbo"), "{}", d);
        assert_eq!(d.0[0].position.unwrap().0, 11);
    }

    #[test]
    fn bad_covariance_and_destination_both_reported() {
        let text = MINIMAL
            .replace("[[1.0, 0.0], [0.0, 1.0]]", "[[1.0, 2.0], [2.0, 1.0]]")
            .replace("destination = [100.0, 0.0]", "destination = [-5.0, 0.0]");
        let d = parse_scenario(&text, "s.toml").unwrap_err();
        let all = d.to_string();
        assert_eq!(d.0.len(), 2, "{all}");
        assert!(all.contains("non-positive-definite covariance"), "{all}");
        assert!(all.contains("unreachable destination"), "{all}");
        let cov =
            d.0.iter()
                .find(|x| x.message.contains("covariance"))
                .unwrap();
        assert!(cov
            .source_line
            .as_deref()
            .unwrap()
            .starts_with("covariance"));
    }

    #[test]
    fn fixed_rate_and_exact_error() {
        let text = MINIMAL
            .replace("\"visibility_proportional\"", "{ fixed_rate = 0.25 }")
            .replace("covariance = [[1.0, 0.0], [0.0, 1.0]]", "mean = [0.5, 0.0]");
        let s = parse_scenario(&text, "s.toml").unwrap();
        let r = s.perception.onboard.rules()[0];
        assert_eq!(r.detection, DetectionModel::FixedRate(0.25));
        assert_eq!(
            r.error,
            ErrorModel::Exact {
                offset: Vec2::new(0.5, 0.0)
            }
        );
    }

    const EXPERIMENT: &str = r#"
runs_per_config = 10
base_seed = 1
buffer_capacity = 5

[[configs]]
label = "GT"
kind = "ground_truth"

[[configs]]
label = "coPEM:1.5s"
kind = "copem"
latency = 1.5
"#;

    #[test]
    fn capacity_diagnostic() {
        let s = parse_scenario(MINIMAL, "s.toml").unwrap();
        let e = parse_experiment(EXPERIMENT, "e.toml").unwrap();
        let d = e.check_against(&s);
        assert_eq!(d.len(), 1);
        assert!(
            d[0].message.contains("needs") && d[0].message.contains("= 16"),
            "{}",
            d[0]
        );
        assert_eq!(d[0].position.unwrap().0, 4);
        let ok = parse_experiment(&EXPERIMENT.replace("= 5", "= 16"), "e.toml").unwrap();
        assert!(ok.check_against(&s).is_empty());
    }

    #[test]
    fn latency_rules() {
        let text = EXPERIMENT.replace("latency = 1.5", "latency = -1.0");
        assert!(parse_experiment(&text, "e.toml").is_err());
        let text = EXPERIMENT.replace(
            "kind = \"ground_truth\"",
            "kind = \"ground_truth\"\nlatency = 1.0",
        );
        assert!(parse_experiment(&text, "e.toml").is_err());
        let text = EXPERIMENT.replace("latency = 1.5\n", "");
        assert!(parse_experiment(&text, "e.toml").is_err());
    }
}
