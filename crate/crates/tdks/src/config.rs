//! Experiment configuration: a flat key = value text format with optional
//! `[section]` headers that prefix the keys that follow. Unknown keys are
//! rejected; every run writes back a canonical echo of the fully-resolved
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::control::CostWeights;
use crate::error::{Result, TdksError};
use crate::optim::{DirectionMethod, InitialStep, OptimizerConfig};
use crate::potentials::{ControlShape, PotentialPreset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Tracking,
    DoubleWell,
    Convergence,
    Custom,
}

impl ExperimentKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "tracking" => Ok(Self::Tracking),
            "doublewell" => Ok(Self::DoubleWell),
            "convergence" => Ok(Self::Convergence),
            "custom" => Ok(Self::Custom),
            other => Err(TdksError::Config(format!(
                "unknown experiment {other:?}; expected tracking | doublewell | convergence | custom"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Tracking => "tracking",
            Self::DoubleWell => "doublewell",
            Self::Convergence => "convergence",
            Self::Custom => "custom",
        }
    }
}

/// Terminal-region choice for χ_A.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetRegion {
    None,
    LeftHalf,
    All,
}

impl TargetRegion {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "left-half" => Ok(Self::LeftHalf),
            "all" => Ok(Self::All),
            other => Err(TdksError::Config(format!(
                "unknown target region {other:?}; expected none | left-half | all"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::LeftHalf => "left-half",
            Self::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceParams {
    /// Coarsest rung step count for the temporal ladder.
    pub base_steps: usize,
    /// Number of halvings in the temporal ladder.
    pub rungs: usize,
    /// Reference refinement relative to the coarsest rung (64 -> dt/64).
    pub reference_refinement: usize,
    /// Mesh ladder for the spatial study.
    pub spatial_points: Vec<usize>,
    pub spatial_reference_points: usize,
    /// Step count of the spatial study (dt = T/steps).
    pub spatial_steps: usize,
    /// Coherent-state displacement of the two initial orbitals.
    pub displacement: f64,
}

/// Fully-resolved experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid_dim: usize,
    pub grid_extent: f64,
    pub grid_points: usize,
    pub time_horizon: f64,
    pub time_steps: usize,
    pub particles: usize,
    pub interacting: bool,
    pub beta: f64,
    pub eta: f64,
    pub nu: f64,
    pub h1_weight_a: f64,
    pub preset: PotentialPreset,
    pub control: ControlShape,
    pub potential_offset: f64,
    pub exchange_cutoff: f64,
    pub correlation_saturation: f64,
    pub correlation_scale: f64,
    pub tracking_amplitude: f64,
    pub target_region: TargetRegion,
    pub gs_dtau: f64,
    pub gs_tol: f64,
    pub gs_max_steps: usize,
    pub opt_max_iterations: usize,
    pub opt_tolerance: f64,
    pub opt_c1: f64,
    pub opt_c2: f64,
    pub opt_ls_max_trials: usize,
    pub opt_hz_eta: f64,
    pub opt_initial_step: f64, // 0 = auto
    pub opt_steepest_descent: bool,
    pub convergence: ConvergenceParams,
    pub sweep_nus: Vec<f64>,
    pub snapshot_stride: usize,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let common_convergence = ConvergenceParams {
            base_steps: 50,
            rungs: 5,
            reference_refinement: 64,
            spatial_points: vec![16, 32, 64],
            spatial_reference_points: 128,
            spatial_steps: 20_000,
            displacement: 0.5,
        };
        match kind {
            ExperimentKind::Tracking | ExperimentKind::Custom => Self {
                experiment: kind,
                grid_dim: 2,
                grid_extent: 7.0,
                grid_points: 64,
                time_horizon: 1.0,
                time_steps: 1000,
                particles: 2,
                interacting: true,
                beta: 1.0,
                eta: 0.0,
                nu: 1e-5,
                h1_weight_a: 1.0,
                preset: PotentialPreset::Harmonic50,
                control: ControlShape::Quadratic,
                potential_offset: 0.0,
                exchange_cutoff: crate::potentials::DEFAULT_EXCHANGE_CUTOFF,
                correlation_saturation: 0.1925,
                correlation_scale: 1.0,
                tracking_amplitude: 10.0,
                target_region: TargetRegion::None,
                gs_dtau: 1e-3,
                gs_tol: 1e-11,
                gs_max_steps: 200_000,
                opt_max_iterations: 100,
                opt_tolerance: 5e-7,
                opt_c1: 1e-4,
                opt_c2: 0.1,
                opt_ls_max_trials: 25,
                opt_hz_eta: 0.01,
                opt_initial_step: 0.0,
                opt_steepest_descent: false,
                convergence: common_convergence,
                sweep_nus: vec![1e-5, 1e-6, 1e-7],
                snapshot_stride: 0,
            },
            ExperimentKind::DoubleWell => Self {
                experiment: kind,
                grid_extent: 14.0,
                time_horizon: 5.0,
                time_steps: 5000,
                beta: 0.0,
                eta: 1.0,
                nu: 1e-7,
                preset: PotentialPreset::DoubleWell,
                control: ControlShape::Dipole { px: 1.0, py: 0.0 },
                target_region: TargetRegion::LeftHalf,
                opt_tolerance: 5e-5,
                gs_dtau: 5e-3,
                ..Self::defaults(ExperimentKind::Tracking)
            },
            ExperimentKind::Convergence => Self {
                experiment: kind,
                grid_points: 60, // h = 7/60 ≈ 0.117, nearest even mesh to the study's h
                time_horizon: 0.1,
                time_steps: 50,
                ..Self::defaults(ExperimentKind::Tracking)
            },
        }
    }

    /// Parse a config file and apply `overrides` (key=value strings) on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                TdksError::Config(format!("override {item:?} is not of the form key=value"))
            })?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_pairs(pairs)
    }

    fn from_pairs(mut pairs: BTreeMap<String, String>) -> Result<Self> {
        let kind = match pairs.remove("experiment") {
            Some(v) => ExperimentKind::parse(&v)?,
            None => {
                return Err(TdksError::Config(
                    "missing required key \"experiment\"".into(),
                ))
            }
        };
        let mut cfg = Self::defaults(kind);
        let take_f64 = |pairs: &mut BTreeMap<String, String>, key: &str| -> Result<Option<f64>> {
            match pairs.remove(key) {
                None => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| TdksError::Config(format!("key {key}: {e} (value {v:?})"))),
            }
        };
        macro_rules! set_f64 {
            ($field:expr, $key:literal) => {
                if let Some(v) = take_f64(&mut pairs, $key)? {
                    $field = v;
                }
            };
        }
        macro_rules! set_usize {
            ($field:expr, $key:literal) => {
                if let Some(v) = pairs.remove($key) {
                    $field = v.parse::<usize>().map_err(|e| {
                        TdksError::Config(format!("key {}: {e} (value {v:?})", $key))
                    })?;
                }
            };
        }
        macro_rules! set_bool {
            ($field:expr, $key:literal) => {
                if let Some(v) = pairs.remove($key) {
                    $field = match v.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(TdksError::Config(format!(
                                "key {}: expected true or false, got {v:?}",
                                $key
                            )))
                        }
                    };
                }
            };
        }

        set_usize!(cfg.grid_dim, "grid.dim");
        set_f64!(cfg.grid_extent, "grid.extent");
        set_usize!(cfg.grid_points, "grid.points");
        set_f64!(cfg.time_horizon, "time.horizon");
        set_usize!(cfg.time_steps, "time.steps");
        set_usize!(cfg.particles, "particles.count");
        set_bool!(cfg.interacting, "particles.interacting");
        set_f64!(cfg.beta, "weights.beta");
        set_f64!(cfg.eta, "weights.eta");
        set_f64!(cfg.nu, "weights.nu");
        set_f64!(cfg.h1_weight_a, "weights.h1_a");
        if let Some(v) = pairs.remove("potential.preset") {
            cfg.preset = parse_preset(&v)?;
        }
        if let Some(v) = pairs.remove("potential.control") {
            cfg.control = parse_control(&v)?;
        }
        set_f64!(cfg.potential_offset, "potential.offset");
        set_f64!(cfg.exchange_cutoff, "exchange.cutoff");
        set_f64!(cfg.correlation_saturation, "correlation.saturation");
        set_f64!(cfg.correlation_scale, "correlation.scale");
        set_f64!(cfg.tracking_amplitude, "tracking.amplitude");
        if let Some(v) = pairs.remove("target.region") {
            cfg.target_region = TargetRegion::parse(&v)?;
        }
        set_f64!(cfg.gs_dtau, "groundstate.dtau");
        set_f64!(cfg.gs_tol, "groundstate.tol");
        set_usize!(cfg.gs_max_steps, "groundstate.max_steps");
        set_usize!(cfg.opt_max_iterations, "optimizer.max_iterations");
        set_f64!(cfg.opt_tolerance, "optimizer.tolerance");
        set_f64!(cfg.opt_c1, "optimizer.c1");
        set_f64!(cfg.opt_c2, "optimizer.c2");
        set_usize!(cfg.opt_ls_max_trials, "optimizer.ls_max_trials");
        set_f64!(cfg.opt_hz_eta, "optimizer.hz_eta");
        if let Some(v) = pairs.remove("optimizer.initial_step") {
            cfg.opt_initial_step = if v == "auto" {
                0.0
            } else {
                v.parse::<f64>().map_err(|e| {
                    TdksError::Config(format!("key optimizer.initial_step: {e} (value {v:?})"))
                })?
            };
        }
        if let Some(v) = pairs.remove("optimizer.direction") {
            cfg.opt_steepest_descent = match v.as_str() {
                "hager-zhang" => false,
                "steepest-descent" => true,
                _ => {
                    return Err(TdksError::Config(format!(
                        "key optimizer.direction: expected hager-zhang or steepest-descent, got {v:?}"
                    )))
                }
            };
        }
        set_usize!(cfg.convergence.base_steps, "convergence.base_steps");
        set_usize!(cfg.convergence.rungs, "convergence.rungs");
        set_usize!(
            cfg.convergence.reference_refinement,
            "convergence.reference_refinement"
        );
        if let Some(v) = pairs.remove("convergence.spatial_points") {
            cfg.convergence.spatial_points = parse_usize_list(&v)?;
        }
        set_usize!(
            cfg.convergence.spatial_reference_points,
            "convergence.spatial_reference_points"
        );
        set_usize!(cfg.convergence.spatial_steps, "convergence.spatial_steps");
        set_f64!(cfg.convergence.displacement, "convergence.displacement");
        if let Some(v) = pairs.remove("sweep.nu_values") {
            cfg.sweep_nus = parse_f64_list(&v)?;
        }
        set_usize!(cfg.snapshot_stride, "output.snapshot_stride");

        if let Some(unknown) = pairs.keys().next() {
            return Err(TdksError::Config(format!("unknown key {unknown:?}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        crate::grid::make_grid(self.grid_dim, self.grid_extent, self.grid_points)?;
        crate::propagation::TimeGrid::new(self.time_horizon, self.time_steps)?;
        if self.particles == 0 {
            return Err(TdksError::Config("particles.count must be >= 1".into()));
        }
        if self.experiment != ExperimentKind::Convergence {
            CostWeights::new(self.beta, self.eta, self.nu, self.h1_weight_a)?;
        }
        if self.interacting && self.grid_dim != 2 {
            return Err(TdksError::Config(
                "interacting particles require grid.dim = 2 (the exchange constant is dimension-specific)"
                    .into(),
            ));
        }
        self.optimizer_config().validate()?;
        if self.sweep_nus.is_empty() {
            return Err(TdksError::Config("sweep.nu_values must not be empty".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<CostWeights> {
        CostWeights::new(self.beta, self.eta, self.nu, self.h1_weight_a)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_iterations: self.opt_max_iterations,
            tolerance: self.opt_tolerance,
            c1: self.opt_c1,
            c2: self.opt_c2,
            ls_max_trials: self.opt_ls_max_trials,
            hz_eta: self.opt_hz_eta,
            initial_step: if self.opt_initial_step == 0.0 {
                InitialStep::Auto
            } else {
                InitialStep::Fixed(self.opt_initial_step)
            },
            direction: if self.opt_steepest_descent {
                DirectionMethod::SteepestDescent
            } else {
                DirectionMethod::HagerZhang
            },
        }
    }

    /// Canonical echo of the resolved configuration; byte-stable for a
    /// given configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let _ = writeln!(s, "grid.dim = {}", self.grid_dim);
        let _ = writeln!(s, "grid.extent = {}", self.grid_extent);
        let _ = writeln!(s, "grid.points = {}", self.grid_points);
        let _ = writeln!(s, "time.horizon = {}", self.time_horizon);
        let _ = writeln!(s, "time.steps = {}", self.time_steps);
        let _ = writeln!(s, "particles.count = {}", self.particles);
        let _ = writeln!(s, "particles.interacting = {}", self.interacting);
        let _ = writeln!(s, "weights.beta = {}", self.beta);
        let _ = writeln!(s, "weights.eta = {}", self.eta);
        let _ = writeln!(s, "weights.nu = {}", self.nu);
        let _ = writeln!(s, "weights.h1_a = {}", self.h1_weight_a);
        let _ = writeln!(s, "potential.preset = {}", preset_name(&self.preset));
        let _ = writeln!(s, "potential.control = {}", control_name(&self.control));
        let _ = writeln!(s, "potential.offset = {}", self.potential_offset);
        let _ = writeln!(s, "exchange.cutoff = {}", self.exchange_cutoff);
        let _ = writeln!(s, "correlation.saturation = {}", self.correlation_saturation);
        let _ = writeln!(s, "correlation.scale = {}", self.correlation_scale);
        let _ = writeln!(s, "tracking.amplitude = {}", self.tracking_amplitude);
        let _ = writeln!(s, "target.region = {}", self.target_region.name());
        let _ = writeln!(s, "groundstate.dtau = {}", self.gs_dtau);
        let _ = writeln!(s, "groundstate.tol = {}", self.gs_tol);
        let _ = writeln!(s, "groundstate.max_steps = {}", self.gs_max_steps);
        let _ = writeln!(s, "optimizer.max_iterations = {}", self.opt_max_iterations);
        let _ = writeln!(s, "optimizer.tolerance = {}", self.opt_tolerance);
        let _ = writeln!(s, "optimizer.c1 = {}", self.opt_c1);
        let _ = writeln!(s, "optimizer.c2 = {}", self.opt_c2);
        let _ = writeln!(s, "optimizer.ls_max_trials = {}", self.opt_ls_max_trials);
        let _ = writeln!(s, "optimizer.hz_eta = {}", self.opt_hz_eta);
        let _ = writeln!(
            s,
            "optimizer.initial_step = {}",
            if self.opt_initial_step == 0.0 {
                "auto".to_string()
            } else {
                self.opt_initial_step.to_string()
            }
        );
        let _ = writeln!(
            s,
            "optimizer.direction = {}",
            if self.opt_steepest_descent {
                "steepest-descent"
            } else {
                "hager-zhang"
            }
        );
        let _ = writeln!(s, "convergence.base_steps = {}", self.convergence.base_steps);
        let _ = writeln!(s, "convergence.rungs = {}", self.convergence.rungs);
        let _ = writeln!(
            s,
            "convergence.reference_refinement = {}",
            self.convergence.reference_refinement
        );
        let _ = writeln!(
            s,
            "convergence.spatial_points = {}",
            self.convergence
                .spatial_points
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(
            s,
            "convergence.spatial_reference_points = {}",
            self.convergence.spatial_reference_points
        );
        let _ = writeln!(
            s,
            "convergence.spatial_steps = {}",
            self.convergence.spatial_steps
        );
        let _ = writeln!(
            s,
            "convergence.displacement = {}",
            self.convergence.displacement
        );
        let _ = writeln!(
            s,
            "sweep.nu_values = {}",
            self.sweep_nus
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "output.snapshot_stride = {}", self.snapshot_stride);
        s
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(TdksError::Config(format!(
                    "line {}: malformed section header {line:?}",
                    lineno + 1
                )));
            }
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            TdksError::Config(format!(
                "line {}: expected key = value, got {line:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let full_key = if section.is_empty() || key.contains('.') {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        pairs.insert(full_key, value.trim().to_string());
    }
    Ok(pairs)
}

fn parse_preset(s: &str) -> Result<PotentialPreset> {
    if s == "harmonic50" {
        return Ok(PotentialPreset::Harmonic50);
    }
    if s == "doublewell" {
        return Ok(PotentialPreset::DoubleWell);
    }
    if let Some(args) = s.strip_prefix("harmonic(").and_then(|r| r.strip_suffix(')')) {
        let kappa = args
            .trim()
            .parse::<f64>()
            .map_err(|e| TdksError::Config(format!("harmonic preset stiffness: {e}")))?;
        return Ok(PotentialPreset::Harmonic { kappa });
    }
    Err(TdksError::Config(format!(
        "unknown potential preset {s:?}; expected harmonic50 | doublewell | harmonic(kappa)"
    )))
}

fn parse_control(s: &str) -> Result<ControlShape> {
    if s == "quadratic" {
        return Ok(ControlShape::Quadratic);
    }
    if let Some(args) = s.strip_prefix("dipole(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(TdksError::Config(
                "dipole control expects dipole(px,py)".into(),
            ));
        }
        let px = parts[0]
            .parse::<f64>()
            .map_err(|e| TdksError::Config(format!("dipole px: {e}")))?;
        let py = parts[1]
            .parse::<f64>()
            .map_err(|e| TdksError::Config(format!("dipole py: {e}")))?;
        return Ok(ControlShape::Dipole { px, py });
    }
    Err(TdksError::Config(format!(
        "unknown control shape {s:?}; expected quadratic | dipole(px,py)"
    )))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|e| TdksError::Config(format!("list item {part:?}: {e}")))
        })
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| TdksError::Config(format!("list item {part:?}: {e}")))
        })
        .collect()
}

fn preset_name(p: &PotentialPreset) -> String {
    match p {
        PotentialPreset::Harmonic50 => "harmonic50".into(),
        PotentialPreset::DoubleWell => "doublewell".into(),
        PotentialPreset::Harmonic { kappa } => format!("harmonic({kappa})"),
        PotentialPreset::Offset { base, shift } => {
            format!("{}+{shift}", preset_name(base))
        }
    }
}

fn control_name(c: &ControlShape) -> String {
    match c {
        ControlShape::Quadratic => "quadratic".into(),
        ControlShape::Dipole { px, py } => format!("dipole({px},{py})"),
    }
}
