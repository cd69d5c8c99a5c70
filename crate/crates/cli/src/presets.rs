//! Named configurations that reproduce each acceptance experiment in one
//! command, for example `waist counterexample --preset delta-sphere`.

use std::f64::consts::FRAC_PI_2;

use waist_core::convex::ConvexBody;
use waist_core::manifold::ManifoldSpec;
use waist_core::measures::MeasureSpec;
use waist_core::tube::Ambient;
use waist_core::waist::{BodyMeasure, MapSpec};

use crate::config::{Experiment, ExperimentConfig, Subcommand, TGrid};

/// A preset name, the subcommand it belongs to and a one-line description.
pub struct Preset {
    pub name: &'static str,
    pub subcommand: Subcommand,
    pub about: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "gaussian-plane", subcommand: Subcommand::Tube, about: "planar Gaussian disk mass 1 - exp(-t^2) on 64 radii" },
    Preset { name: "equator-tube", subcommand: Subcommand::Tube, about: "tube of the equator in S^2, equal to sin t" },
    Preset { name: "projective-line-tube", subcommand: Subcommand::Tube, about: "tube of a line in CP^2, equal to 1 - cos^4 t" },
    Preset { name: "subset-domination", subcommand: Subcommand::Tube, about: "k-subset tubes against the smallest-scale tube" },
    Preset { name: "half-line", subcommand: Subcommand::Transport, about: "1-D Gaussian onto a half-line: center and audits" },
    Preset { name: "slab-grid", subcommand: Subcommand::Transport, about: "2-D grid solve onto a slab at 128^2" },
    Preset { name: "logdet-expansion", subcommand: Subcommand::Transport, about: "log-det second-order term on random 3x3 instances" },
    Preset { name: "disk-partition", subcommand: Subcommand::Pancake, about: "depth-3 equal-measure partition of the uniform disk" },
    Preset { name: "width-audit", subcommand: Subcommand::Pancake, about: "width decrease on 50 random round polytopes" },
    Preset { name: "deficiency-regression", subcommand: Subcommand::Pancake, about: "largest leaf deficiency at depths 4 and 8" },
    Preset { name: "delta-sphere", subcommand: Subcommand::Counterexample, about: "half atom, half sphere measure with the radius map" },
    Preset { name: "ball-sector", subcommand: Subcommand::Counterexample, about: "uniform 3-ball with the half-plane sector map" },
    Preset { name: "cone-sphere", subcommand: Subcommand::Counterexample, about: "uniform 2-sphere with the cone-corrected map" },
    Preset { name: "equator-map", subcommand: Subcommand::Waist, about: "height function on S^2, fiber tube sin t" },
    Preset { name: "odd-cubic", subcommand: Subcommand::Waist, about: "x1 + 0.1 x2^3 on S^2" },
    Preset { name: "cube-slab", subcommand: Subcommand::Waist, about: "first coordinate on the cube with its own norm" },
    Preset { name: "gaussian-demo", subcommand: Subcommand::Demo, about: "depth-2 partition of the Gaussian plane, a = (1, 2)" },
    Preset { name: "projective-line", subcommand: Subcommand::Manifold, about: "line in CP^2 with both degree bounds" },
    Preset { name: "conic", subcommand: Subcommand::Manifold, about: "smooth conic in CP^2 between one and two lines" },
    Preset { name: "hopf-line", subcommand: Subcommand::Manifold, about: "line in CP^2 against its Hopf lift in S^5" },
    Preset { name: "hopf-conic", subcommand: Subcommand::Manifold, about: "conic in CP^2 against its Hopf lift in S^5" },
    Preset { name: "crofton-line", subcommand: Subcommand::Manifold, about: "degree of a line from random line sections" },
    Preset { name: "crofton-conic", subcommand: Subcommand::Manifold, about: "degree of a conic from random line sections" },
];

/// Radii of the manifold bound checks.
pub const CONIC_RADII: [f64; 3] = [0.2, 0.4, 0.6];
/// Radii of the end-to-end demo.
pub const DEMO_RADII: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Builds the config of a preset.
pub fn config(name: &str) -> Option<ExperimentConfig> {
    let sphere2 = || MeasureSpec::uniform_sphere(3, 1.0);
    let disk = || MeasureSpec::uniform_ball(2, 1.0);
    let slab = || ConvexBody::new(2, 12.0, vec![(vec![1.0, 0.0], 1.0), (vec![-1.0, 0.0], 1.0)]).expect("slab is a valid body");
    let cfg = ExperimentConfig::new;
    let c = match name {
        "gaussian-plane" => cfg(Experiment::Tube {
            ambient: Ambient::Euclidean(2),
            core_dim: 0,
            gaussian_scales: Some(vec![1.0, 1.0]),
            measure: None,
        })
        .with_grid(TGrid::range(0.0, 3.0, 64)),
        "equator-tube" => cfg(Experiment::Tube { ambient: Ambient::Sphere(2), core_dim: 1, gaussian_scales: None, measure: None })
            .with_grid(TGrid::range(0.0, FRAC_PI_2, 64)),
        "projective-line-tube" => {
            cfg(Experiment::Tube { ambient: Ambient::ComplexProjective(2), core_dim: 1, gaussian_scales: None, measure: None })
                .with_grid(TGrid::range(0.0, FRAC_PI_2, 64))
        }
        "subset-domination" => cfg(Experiment::SubsetDomination { trials: 100, max_n: 6, max_k: 3 }),
        "half-line" => cfg(Experiment::Transport {
            scales: vec![0.5],
            body: ConvexBody::new(1, 12.0, vec![(vec![1.0], 0.0)]).expect("half-line is a valid body"),
            resolution: None,
            force_grid: false,
            shift: None,
            residual_grid: 0,
            residual_half_width: 0.0,
        })
        .with_samples(100_000),
        "slab-grid" => cfg(Experiment::Transport {
            scales: vec![0.5, 0.5],
            body: slab(),
            resolution: Some(128),
            force_grid: true,
            shift: None,
            residual_grid: 41,
            residual_half_width: 2.0,
        })
        .with_samples(100_000),
        "logdet-expansion" => cfg(Experiment::Logdet { dim: 3, instances: 100 }),
        "disk-partition" => cfg(Experiment::Partition { measure: disk(), radius: 1.0, depth: 3, k: 1 }),
        "width-audit" => cfg(Experiment::WidthAudit { n: 2, instances: 50 }),
        "deficiency-regression" => cfg(Experiment::Deficiency { measure: disk(), radius: 1.0, k: 1, depths: vec![4, 8] }),
        "delta-sphere" => cfg(Experiment::Counterexample {
            measure: MeasureSpec::atom_sphere(2, 0.5, 1.0),
            map: MapSpec::Radius { n: 2 },
            candidates: vec![vec![0.0], vec![1.0]],
        })
        .with_grid(TGrid::Points(vec![0.5, 0.75, 0.95]))
        .with_samples(1_000_000),
        "ball-sector" => cfg(Experiment::Counterexample {
            measure: MeasureSpec::uniform_ball(3, 1.0),
            map: MapSpec::HalfPlaneSector { n: 3, k: 2, width: 0.01 },
            candidates: vec![vec![0.0, 0.0]],
        })
        .with_grid(TGrid::Points(vec![0.25, 0.5, 0.75]))
        .with_samples(1_000_000),
        "cone-sphere" => cfg(Experiment::Counterexample {
            measure: sphere2(),
            map: MapSpec::ConeCorrected { n: 3, theta: 1.15 },
            candidates: vec![vec![1.0]],
        })
        .with_grid(TGrid::Points(vec![0.05, 0.1, 0.2, 0.3, 0.5]))
        .with_samples(1_000_000),
        "equator-map" => cfg(Experiment::Waist {
            measure: sphere2(),
            map: MapSpec::Coordinates { n: 3, indices: vec![2], sphere_radius: Some(1.0) },
            y: vec![0.0],
        })
        .with_grid(TGrid::Points(vec![0.2, 0.5, 1.0, 1.4]))
        .with_samples(400_000),
        "odd-cubic" => cfg(Experiment::Waist {
            measure: sphere2(),
            map: MapSpec::OddCubic { n: 3, eps: 0.1, sphere_radius: Some(1.0) },
            y: vec![0.0],
        })
        .with_grid(TGrid::Points(vec![0.2, 0.5, 1.0]))
        .with_samples(100_000),
        "cube-slab" => cfg(Experiment::NormWaist {
            body: ConvexBody::aligned_box(&[-1.0; 3], &[1.0; 3], 2.0).expect("cube is a valid body"),
            body_measure: BodyMeasure::Uniform,
            map: MapSpec::Coordinates { n: 3, indices: vec![0], sphere_radius: None },
        })
        .with_grid(TGrid::Points(vec![0.2, 0.5, 0.8]))
        .with_samples(400_000),
        "gaussian-demo" => cfg(Experiment::Demo {
            scales: vec![1.0, 2.0],
            map: MapSpec::SineShear { amp: 0.3 },
            depth: 2,
            radius: 6.0,
            resolution: None,
            tv_samples: None,
        })
        .with_grid(TGrid::Points(DEMO_RADII.to_vec()))
        .with_samples(1_000_000),
        "projective-line" => cfg(Experiment::ManifoldTube { manifold: ManifoldSpec::line(), degree: Some(1) })
            .with_grid(TGrid::Points(vec![0.1, 0.3, 0.6, 1.0, 1.4]))
            .with_samples(1_000_000),
        "conic" => cfg(Experiment::ManifoldTube { manifold: ManifoldSpec::conic(), degree: Some(2) })
            .with_grid(TGrid::Points(CONIC_RADII.to_vec()))
            .with_samples(200_000),
        "hopf-line" => cfg(Experiment::Hopf { base: ManifoldSpec::line() })
            .with_grid(TGrid::Points(vec![0.2, 0.5, 0.9]))
            .with_samples(200_000),
        "hopf-conic" => cfg(Experiment::Hopf { base: ManifoldSpec::conic() })
            .with_grid(TGrid::Points(vec![0.2, 0.5, 0.9]))
            .with_samples(60_000),
        "crofton-line" => cfg(Experiment::Crofton { manifold: ManifoldSpec::fermat(1), lines: 2000 }),
        "crofton-conic" => cfg(Experiment::Crofton { manifold: ManifoldSpec::conic(), lines: 2000 }),
        _ => return None,
    };
    Some(c)
}
