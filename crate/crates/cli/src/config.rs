//! Experiment configuration: the JSON schema read by `--config`, its
//! validation and the hash recorded in every output header.
//!
//! A config is one object:
//!
//! ```json
//! {
//!   "experiment": { "kind": "waist", "measure": {...}, "map": {...}, "y": [0.0] },
//!   "t_grid": { "min": 0.2, "max": 1.0, "count": 5 },
//!   "samples": 100000,
//!   "seed": 1,
//!   "format": "csv",
//!   "out": "curve.csv"
//! }
//! ```
//!
//! `t_grid` is either `{min, max, count}` or an explicit list of radii.
//! Unknown fields are rejected at every level.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use waist_core::convex::ConvexBody;
use waist_core::manifold::{EmbeddedManifold, ManifoldSpec};
use waist_core::measures::MeasureSpec;
use waist_core::tube::{t_grid, Ambient};
use waist_core::waist::{BodyMeasure, TestMap};

use crate::error::{CliError, Result};

/// The seven entry points of the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Tube,
    Pancake,
    Transport,
    Waist,
    Counterexample,
    Manifold,
    Demo,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Tube => "tube",
            Subcommand::Pancake => "pancake",
            Subcommand::Transport => "transport",
            Subcommand::Waist => "waist",
            Subcommand::Counterexample => "counterexample",
            Subcommand::Manifold => "manifold",
            Subcommand::Demo => "demo",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Radii at which curves are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    Points(Vec<f64>),
    Range(Range),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl TGrid {
    pub fn range(min: f64, max: f64, count: usize) -> Self {
        TGrid::Range(Range { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            TGrid::Points(p) => p.clone(),
            TGrid::Range(r) => t_grid(r.min, r.max, r.count),
        }
    }
}

fn default_trials() -> usize {
    100
}

/// What to compute. The `kind` tag selects the variant; each variant
/// belongs to one subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Model tube fraction over the t grid. A radial `measure` switches the
    /// Euclidean case from Gaussian scales to the radial tube.
    Tube {
        ambient: Ambient,
        core_dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gaussian_scales: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        measure: Option<MeasureSpec>,
    },
    /// Random sorted scale vectors: every k-subset tube against the tube of
    /// the k smallest scales.
    SubsetDomination {
        #[serde(default = "default_trials")]
        trials: usize,
        max_n: usize,
        max_k: usize,
    },
    /// Equal-measure cut tree of the ball with leaf pancake deficiencies.
    Partition { measure: MeasureSpec, radius: f64, depth: usize, k: usize },
    /// Largest leaf deficiency for each depth.
    Deficiency { measure: MeasureSpec, radius: f64, k: usize, depths: Vec<usize> },
    /// Width decrease of random polytopes under one halving cut, for the
    /// uniform measure on the unit ball of `R^n`.
    WidthAudit { n: usize, instances: usize },
    /// Monotone transport from the Gaussian with these scales onto its
    /// restriction to `body`, with map audits.
    Transport {
        scales: Vec<f64>,
        body: ConvexBody,
        #[serde(default)]
        resolution: Option<usize>,
        #[serde(default)]
        force_grid: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
        /// Points per axis of the residual grid; no residual check when 0.
        #[serde(default)]
        residual_grid: usize,
        #[serde(default)]
        residual_half_width: f64,
    },
    /// Second-order expansion of `ln det` against finite differences on
    /// random symmetric instances.
    Logdet { dim: usize, instances: usize },
    /// Tube measure of one fiber against the model tube.
    Waist { measure: MeasureSpec, map: waist_core::waist::MapSpec, y: Vec<f64> },
    /// Gauge-neighborhood measure of the zero fiber against `t`.
    NormWaist { body: ConvexBody, body_measure: BodyMeasure, map: waist_core::waist::MapSpec },
    /// Tries every candidate fiber for a shortfall below the model tube.
    Counterexample { measure: MeasureSpec, map: waist_core::waist::MapSpec, candidates: Vec<Vec<f64>> },
    /// Monte Carlo tube fractions with model bounds; `degree` enables the
    /// upper bound for projective manifolds.
    ManifoldTube {
        manifold: ManifoldSpec,
        #[serde(default)]
        degree: Option<u32>,
    },
    /// Tube fractions of a projective manifold and of its Hopf lift.
    Hopf { base: ManifoldSpec },
    /// Degree from intersection counts with random complex lines.
    Crofton { manifold: ManifoldSpec, lines: usize },
    /// Voronoi cells around sites on a hypersurface of a sphere.
    Voronoi { manifold: ManifoldSpec, sites: usize },
    /// Pancake partition of the Gaussian ball equalizing `map` at the
    /// transport centers, then the tube of the common fiber.
    Demo {
        scales: Vec<f64>,
        map: waist_core::waist::MapSpec,
        depth: usize,
        radius: f64,
        #[serde(default)]
        resolution: Option<usize>,
        #[serde(default)]
        tv_samples: Option<usize>,
    },
}

impl Experiment {
    pub fn subcommand(&self) -> Subcommand {
        match self {
            Experiment::Tube { .. } | Experiment::SubsetDomination { .. } => Subcommand::Tube,
            Experiment::Partition { .. } | Experiment::Deficiency { .. } | Experiment::WidthAudit { .. } => Subcommand::Pancake,
            Experiment::Transport { .. } | Experiment::Logdet { .. } => Subcommand::Transport,
            Experiment::Waist { .. } | Experiment::NormWaist { .. } => Subcommand::Waist,
            Experiment::Counterexample { .. } => Subcommand::Counterexample,
            Experiment::ManifoldTube { .. } | Experiment::Hopf { .. } | Experiment::Crofton { .. } | Experiment::Voronoi { .. } => {
                Subcommand::Manifold
            }
            Experiment::Demo { .. } => Subcommand::Demo,
        }
    }

    /// Whether the experiment reads `t_grid`.
    pub fn uses_grid(&self) -> bool {
        !matches!(
            self,
            Experiment::SubsetDomination { .. }
                | Experiment::Partition { .. }
                | Experiment::Deficiency { .. }
                | Experiment::WidthAudit { .. }
                | Experiment::Transport { .. }
                | Experiment::Logdet { .. }
                | Experiment::Crofton { .. }
                | Experiment::Voronoi { .. }
        )
    }

    /// Whether the experiment reads `samples`.
    pub fn uses_samples(&self) -> bool {
        !matches!(
            self,
            Experiment::Tube { .. }
                | Experiment::SubsetDomination { .. }
                | Experiment::Partition { .. }
                | Experiment::Deficiency { .. }
                | Experiment::WidthAudit { .. }
                | Experiment::Logdet { .. }
                | Experiment::Crofton { .. }
        )
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output format; counterexamples default to JSON, everything else to CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, t_grid: None, samples: None, seed: default_seed(), format: None, out: None }
    }

    pub fn with_grid(mut self, grid: TGrid) -> Self {
        self.t_grid = Some(grid);
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parses JSON text, reporting the line and column of the first problem.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(match self.experiment.subcommand() {
            Subcommand::Counterexample => Format::Json,
            _ => Format::Csv,
        })
    }

    /// SHA-256 of the config with the output location removed, so moving
    /// the artifact keeps its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.format = Some(self.format());
        hex::encode(Sha256::digest(c.to_json().as_bytes()))
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let g = self.t_grid.as_ref().ok_or_else(|| CliError::field("t_grid", "this experiment needs a t grid"))?;
        Ok(g.points())
    }

    pub fn sample_count(&self) -> Result<usize> {
        self.samples.ok_or_else(|| CliError::field("samples", "this experiment needs a sample count"))
    }

    /// Schema checks that need no heavy computation: shapes, ranges and the
    /// constructors of every map, body and manifold involved.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.uses_grid() {
            let g = self.grid()?;
            if g.is_empty() {
                return Err(CliError::field("t_grid", "grid is empty"));
            }
            if let Some(bad) = g.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(CliError::field("t_grid", format!("radius {bad} is not a finite nonnegative number")));
            }
        }
        if self.experiment.uses_samples() && self.sample_count()? == 0 {
            return Err(CliError::field("samples", "must be positive"));
        }
        let field = |name: &str| {
            let name = name.to_string();
            move |e: waist_core::Error| CliError::field(format!("experiment.{name}"), e.to_string())
        };
        match &self.experiment {
            Experiment::Tube { ambient, core_dim, gaussian_scales, measure } => {
                if let Some(m) = measure {
                    let Ambient::Euclidean(n) = ambient else {
                        return Err(CliError::field("experiment.measure", "a measure only applies to the euclidean ambient"));
                    };
                    if m.dim != *n || !m.is_radial() {
                        return Err(CliError::field("experiment.measure", "need a rotation-invariant measure on the ambient space"));
                    }
                    if gaussian_scales.is_some() {
                        return Err(CliError::field("experiment", "give either gaussian_scales or measure"));
                    }
                }
                let probe = waist_core::tube::TubeQuery { ambient: *ambient, core_dim: *core_dim, t: 0.0, gaussian_scales: gaussian_scales.clone() };
                if measure.is_none() {
                    probe.evaluate().map_err(field("ambient"))?;
                }
            }
            Experiment::SubsetDomination { trials, max_n, max_k } => {
                if *trials == 0 || *max_n < 2 || *max_k == 0 || *max_k > *max_n {
                    return Err(CliError::field("experiment", "need trials >= 1, max_n >= 2 and 1 <= max_k <= max_n"));
                }
            }
            Experiment::Partition { measure, radius, depth, k } => {
                check_partition(measure, *radius, *k)?;
                if *depth == 0 || *depth > 10 {
                    return Err(CliError::field("experiment.depth", "must lie in 1..=10"));
                }
            }
            Experiment::Deficiency { measure, radius, k, depths } => {
                check_partition(measure, *radius, *k)?;
                if depths.is_empty() || depths.iter().any(|d| *d == 0 || *d > 10) {
                    return Err(CliError::field("experiment.depths", "need depths in 1..=10"));
                }
            }
            Experiment::WidthAudit { n, instances } => {
                if *n < 2 || *instances == 0 {
                    return Err(CliError::field("experiment", "need n >= 2 and at least one instance"));
                }
            }
            Experiment::Transport { scales, body, resolution, shift, residual_grid, residual_half_width, .. } => {
                check_body(body).map_err(field("body"))?;
                if scales.len() != body.dim || scales.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(CliError::field("experiment.scales", "need one positive scale per body dimension"));
                }
                if matches!(resolution, Some(r) if *r < 8) {
                    return Err(CliError::field("experiment.resolution", "must be at least 8"));
                }
                if matches!(shift, Some(s) if s.len() != body.dim) {
                    return Err(CliError::field("experiment.shift", "must match the body dimension"));
                }
                if *residual_grid > 0 && !(*residual_half_width > 0.0) {
                    return Err(CliError::field("experiment.residual_half_width", "must be positive when residual_grid is set"));
                }
            }
            Experiment::Logdet { dim, instances } => {
                if *dim == 0 || *instances == 0 {
                    return Err(CliError::field("experiment", "need a positive dimension and instance count"));
                }
            }
            Experiment::Waist { measure, map, y } => {
                let f = TestMap::new(map.clone()).map_err(field("map"))?;
                if f.n != measure.dim || y.len() != f.k {
                    return Err(CliError::field("experiment", "map, measure and fiber value dimensions disagree"));
                }
            }
            Experiment::NormWaist { body, map, .. } => {
                check_body(body).map_err(field("body"))?;
                let f = TestMap::new(map.clone()).map_err(field("map"))?;
                if f.n != body.dim {
                    return Err(CliError::field("experiment", "map and body dimensions disagree"));
                }
            }
            Experiment::Counterexample { measure, map, candidates } => {
                let f = TestMap::new(map.clone()).map_err(field("map"))?;
                if f.n != measure.dim || candidates.is_empty() || candidates.iter().any(|y| y.len() != f.k) {
                    return Err(CliError::field("experiment", "need candidate fiber values in the map's target"));
                }
            }
            Experiment::ManifoldTube { manifold, .. } | Experiment::Crofton { manifold, .. } | Experiment::Voronoi { manifold, .. } => {
                check_manifold(manifold).map_err(field("manifold"))?;
            }
            Experiment::Hopf { base } => {
                check_manifold(base).map_err(field("base"))?;
                if !matches!(base, ManifoldSpec::Projective { .. }) {
                    return Err(CliError::field("experiment.base", "the Hopf lift needs a projective base"));
                }
            }
            Experiment::Demo { scales, map, depth, radius, .. } => {
                let f = TestMap::new(map.clone()).map_err(field("map"))?;
                if f.n != scales.len() || f.k != 1 {
                    return Err(CliError::field("experiment", "demo needs a real-valued map on R^n with n scales"));
                }
                if *depth == 0 || *depth > 6 || !(radius.is_finite() && *radius > 0.0) {
                    return Err(CliError::field("experiment", "need depth in 1..=6 and a positive radius"));
                }
            }
        }
        Ok(())
    }
}

fn check_partition(measure: &MeasureSpec, radius: f64, k: usize) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(CliError::field("experiment.radius", "must be positive"));
    }
    if k >= measure.dim {
        return Err(CliError::field("experiment.k", "must be below the dimension"));
    }
    Ok(())
}

fn check_body(body: &ConvexBody) -> waist_core::Result<ConvexBody> {
    let hs = body.halfspaces.iter().map(|h| (h.normal.clone(), h.offset)).collect();
    ConvexBody::new(body.dim, body.radius, hs)
}

fn check_manifold(spec: &ManifoldSpec) -> waist_core::Result<()> {
    // builds the chart, or the variety with a small point cloud
    EmbeddedManifold::new(spec.clone(), 0).map(|_| ())
}

/// Re-validates a body read from JSON through its constructor.
pub fn normalized_body(body: &ConvexBody) -> Result<ConvexBody> {
    Ok(check_body(body)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_a_position() {
        let text = "{\n  \"experiment\": {\"kind\": \"logdet\", \"dim\": 3, \"instances\": 2, \"extra\": 1},\n  \"seed\": 4\n}";
        match ExperimentConfig::from_json(text) {
            Err(CliError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("extra"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let top = r#"{"experiment": {"kind": "logdet", "dim": 3, "instances": 2}, "sead": 4}"#;
        assert!(ExperimentConfig::from_json(top).is_err());
        let grid = r#"{"experiment": {"kind": "hopf", "base": {"kind": "projective", "n": 2}}, "t_grid": {"min": 0.1, "max": 1, "count": 3, "step": 1}}"#;
        assert!(ExperimentConfig::from_json(grid).is_err());
    }

    #[test]
    fn empty_text_is_a_parse_error() {
        assert!(matches!(ExperimentConfig::from_json(""), Err(CliError::Parse { .. })));
    }

    #[test]
    fn round_trip_keeps_the_hash() {
        let c = ExperimentConfig::new(Experiment::Logdet { dim: 3, instances: 5 }).with_seed(9);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut moved = c.clone();
        moved.out = Some("elsewhere.csv".into());
        assert_eq!(moved.hash(), c.hash());
        assert_ne!(c.clone().with_seed(10).hash(), c.hash());
    }

    #[test]
    fn grids_parse_as_ranges_or_lists() {
        let a: TGrid = serde_json::from_str(r#"{"min": 0, "max": 1, "count": 3}"#).unwrap();
        assert_eq!(a.points(), vec![0.0, 0.5, 1.0]);
        let b: TGrid = serde_json::from_str("[0.25, 2]").unwrap();
        assert_eq!(b.points(), vec![0.25, 2.0]);
    }

    #[test]
    fn validation_catches_mismatched_dimensions() {
        let c = ExperimentConfig::new(Experiment::Waist {
            measure: MeasureSpec::standard_gaussian(3),
            map: waist_core::waist::MapSpec::SineShear { amp: 0.1 },
            y: vec![0.0],
        })
        .with_grid(TGrid::Points(vec![0.5]))
        .with_samples(10);
        assert!(matches!(c.validate(), Err(CliError::Field { .. })));
        let no_grid = ExperimentConfig::new(Experiment::Hopf { base: ManifoldSpec::line() }).with_samples(10);
        assert!(matches!(no_grid.validate(), Err(CliError::Field { ref field, .. }) if field == "t_grid"));
    }
}
