//! Run configuration: one JSON document with a section per command.
//!
//! Every field has a default, so `{}` is a valid config. Fields whose
//! sensible value depends on the model (bounds, energies, scenario) start
//! out as `null` and are filled in by [`RunConfig::resolve`]; the resolved
//! document is what the manifest records, so a rerun never depends on
//! defaults that might move.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use xpoint_core::control::{ControlPolicy, DwellScenario, PolicySet, PonderomotiveOptions, Reward, StimulusOptions};
use xpoint_core::hjb::{Branch, Region};
use xpoint_core::hst::{Normalization, Pooling};
use xpoint_core::rom::{DatasetConfig, TrainConfig};
use xpoint_core::{Rect, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub equilibria: EquilibriaConfig,
    pub separatrix: SeparatrixConfig,
    pub orbit: OrbitConfig,
    pub control: ControlConfig,
    pub hjb: HjbSection,
    pub hst: HstSection,
    pub rom: RomSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            id: "pendulum".into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub q0: f64,
    pub p0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub output_stride: usize,
    pub scheme: Scheme,
    pub policies: PolicySet,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            q0: 0.1,
            p0: 0.0,
            dt: 1e-2,
            n_steps: 10_000,
            output_stride: 10,
            scheme: Scheme::Leapfrog,
            policies: PolicySet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaConfig {
    pub bounds: Option<Rect>,
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatrixConfig {
    pub ds: f64,
    pub bounds: Option<Rect>,
    pub max_length: Option<f64>,
}

impl Default for SeparatrixConfig {
    fn default() -> Self {
        Self {
            ds: 1e-3,
            bounds: None,
            max_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    /// o-point coordinate of the well; defaults to the first o-point found.
    pub center: Option<f64>,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub n_energies: usize,
    /// Distances `E_s - E` below the separatrix for the log-period fit.
    pub log_eps: Vec<f64>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            center: None,
            e_min: None,
            e_max: None,
            n_energies: 20,
            log_eps: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Stimulus,
    Viscosity,
    Threshold,
    Ponderomotive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub kind: ControlKind,
    pub stimulus: StimulusSection,
    pub viscosity: ViscositySection,
    pub threshold: ThresholdSection,
    pub ponderomotive: PonderomotiveSection,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            kind: ControlKind::Viscosity,
            stimulus: StimulusSection::default(),
            viscosity: ViscositySection::default(),
            threshold: ThresholdSection::default(),
            ponderomotive: PonderomotiveSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusSection {
    /// Start state; defaults to rest at the first o-point.
    pub q0: Option<f64>,
    pub p0: f64,
    pub delta: f64,
    pub options: StimulusOptions,
}

impl Default for StimulusSection {
    fn default() -> Self {
        Self {
            q0: None,
            p0: 0.0,
            delta: 1e-3,
            options: StimulusOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscositySection {
    pub nu_grid: Vec<f64>,
    /// Defaults to the bundled double-well demo.
    pub scenario: Option<DwellScenario>,
}

impl Default for ViscositySection {
    fn default() -> Self {
        Self {
            nu_grid: vec![0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
            scenario: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub a: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub grid_n: usize,
    pub theta0: f64,
    pub duration: f64,
    pub tol: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            a: 0.1,
            omega_lo: 5.0,
            omega_hi: 30.0,
            grid_n: 11,
            theta0: 0.01,
            duration: 200.0,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PonderomotiveSection {
    pub a: f64,
    pub omega: f64,
    pub theta0: f64,
    pub duration: f64,
    pub options: PonderomotiveOptions,
}

impl Default for PonderomotiveSection {
    fn default() -> Self {
        Self {
            a: 0.1,
            omega: 30.0,
            theta0: 0.01,
            duration: 1000.0,
            options: PonderomotiveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HjbKind {
    Characteristics,
    Viscous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HjbSection {
    pub kind: HjbKind,
    /// Characteristics: orbit energy, defaults to halfway up the well.
    pub energy: Option<f64>,
    pub branch: Branch,
    /// Characteristics: defaults to the well of the first o-point.
    pub region: Option<Region>,
    pub grid_n: usize,
    /// Viscous solve settings.
    pub nu: f64,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub reward: Reward,
}

impl Default for HjbSection {
    fn default() -> Self {
        Self {
            kind: HjbKind::Characteristics,
            energy: None,
            branch: Branch::Upper,
            region: None,
            grid_n: 4096,
            nu: 1.0,
            q_min: None,
            q_max: None,
            max_iter: 10_000,
            tol: 1e-12,
            reward: Reward::Gaussian {
                center: 0.0,
                width: 0.2,
            },
        }
    }
}

/// Built-in test signal: a cosine on FFT bin `bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToneSignal {
    pub n: usize,
    pub bin: f64,
    pub amplitude: f64,
}

impl Default for ToneSignal {
    fn default() -> Self {
        Self {
            n: 1024,
            bin: 16.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HstSection {
    /// CSV with columns `x,re[,im]`; the tone is used when absent.
    pub input: Option<PathBuf>,
    pub tone: ToneSignal,
    pub j: usize,
    pub xi0: f64,
    pub sigma: Option<f64>,
    pub m_max: usize,
    pub pooling: Pooling,
    pub normalization: Normalization,
}

impl Default for HstSection {
    fn default() -> Self {
        Self {
            input: None,
            tone: ToneSignal::default(),
            j: 6,
            xi0: FRAC_PI_2,
            sigma: None,
            m_max: 2,
            pooling: Pooling::Window,
            normalization: Normalization::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RomSection {
    /// Training trajectories written by `rom dataset`; generated when absent.
    pub data: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub held_out: DatasetConfig,
    pub train: TrainConfig,
    /// Parameter file prefix for `rom predict`.
    pub params: Option<PathBuf>,
    /// States for `rom predict` (`tau,q,p`); the held-out set when absent.
    pub predict_input: Option<PathBuf>,
    pub predict_tau: f64,
    pub grad_check_batch: usize,
    pub grad_check_hidden: usize,
}

impl Default for RomSection {
    fn default() -> Self {
        Self {
            data: None,
            dataset: DatasetConfig::default(),
            held_out: DatasetConfig {
                n_trajectories: 20,
                seed: 99,
                ..Default::default()
            },
            train: TrainConfig::default(),
            params: None,
            predict_input: None,
            predict_tau: 0.0,
            grad_check_batch: 4,
            grad_check_hidden: 64,
        }
    }
}

/// Model-dependent default boxes.
pub fn default_bounds(model_id: &str) -> (Rect, usize) {
    match model_id {
        "pendulum" | "kapitza" => (Rect::new(-FRAC_PI_2, 1.5 * PI, -1.0, 1.0), 12),
        "double_well" => (Rect::new(-2.0, 2.0, -2.0, 2.0), 9),
        _ => (Rect::new(-2.0, 2.0, -2.0, 2.0), 8),
    }
}

pub fn default_separatrix_box(model_id: &str) -> (Rect, f64) {
    match model_id {
        "pendulum" | "kapitza" => (Rect::new(-4.0, 10.0, -3.0, 3.0), 30.0),
        _ => (Rect::new(-3.0, 3.0, -3.0, 3.0), 20.0),
    }
}

impl RunConfig {
    /// Fills model-dependent defaults that do not need any computation.
    /// The rest (o-points, energies) are filled by the commands themselves.
    pub fn resolve_static(&mut self) {
        let (b, n) = default_bounds(&self.model.id);
        self.equilibria.bounds.get_or_insert(b);
        self.equilibria.grid_n.get_or_insert(n);
        let (sb, len) = default_separatrix_box(&self.model.id);
        self.separatrix.bounds.get_or_insert(sb);
        self.separatrix.max_length.get_or_insert(len);
        if self.control.viscosity.scenario.is_none() && self.model.id == "double_well" {
            self.control.viscosity.scenario = Some(DwellScenario::double_well_demo());
        }
        self.rom.train.seed = self.seed;
    }

    pub fn ponderomotive_policy(&self) -> ControlPolicy {
        ControlPolicy::Ponderomotive {
            a: self.control.ponderomotive.a,
            omega: self.control.ponderomotive.omega,
        }
    }
}
