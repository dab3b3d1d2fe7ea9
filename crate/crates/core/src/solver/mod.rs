//! Time stepping for the mobility-weighted multiphase Allen-Cahn system.
//!
//! Each step is a split: a stabilized semi-implicit diffusion step per phase
//! ([`step_diffusion`]), followed by a pointwise projection onto the
//! partition constraint, optionally with per-phase volume constraints
//! ([`project_partition`], [`project_partition_volume`]).

mod projection;
mod run;
mod step;

pub use projection::{project_partition, project_partition_volume, Potential, ProjectionReport, VolumeTargets};
pub use run::{
    run, step_count, Diagnostics, DiagnosticsRow, Observer, RunOutput, RunSettings, StepReport, VolumeSetup,
};
pub use step::{energy, step_diffusion, step_general};

use thiserror::Error;

use crate::model::ModelError;
use crate::spectral::{Field, Grid, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("phase state needs at least 2 fields (got {0})")]
    TooFewPhases(usize),
    #[error("phase {0} lives on a different grid")]
    GridMismatch(usize),
    #[error("epsilon must be positive and finite (got {0})")]
    BadEpsilon(f64),
    #[error("invalid solver parameter: {0}")]
    BadParams(&'static str),
    #[error("expected {expected} per-phase values, got {got}")]
    PhaseCount { expected: usize, got: usize },
    #[error("every phase is frozen but the partition residual is {0:e}")]
    AllPhasesFrozen(f64),
    #[error("volume targets sum to {sum}, box volume is {volume}")]
    InconsistentTargets { sum: f64, volume: f64 },
    #[error("volume constraint system is singular: {0}")]
    SingularConstraintSystem(String),
    #[error("vapor target would become negative ({0:e})")]
    TargetUnderflow(f64),
    #[error("state became non-finite at step {0}")]
    NonFiniteState(usize),
    #[error("volume constraints are only supported for harmonically additive mobilities")]
    GeneralMobilityWithVolume,
    #[error("general mobility metric is singular on the partition subspace")]
    DegenerateMetric,
    #[error("run aborted by observer: {0}")]
    Aborted(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// The `N` phase fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    grid: Grid,
    fields: Vec<Field>,
    epsilon: f64,
    time: f64,
}

impl PhaseState {
    pub fn new(fields: Vec<Field>, epsilon: f64, time: f64) -> Result<Self, SolverError> {
        if fields.len() < 2 {
            return Err(SolverError::TooFewPhases(fields.len()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(SolverError::BadEpsilon(epsilon));
        }
        let grid = *fields[0].grid();
        for (k, f) in fields.iter().enumerate() {
            if *f.grid() != grid {
                return Err(SolverError::GridMismatch(k));
            }
            if !f.is_finite() {
                return Err(SolverError::NonFiniteState(0));
            }
        }
        Ok(Self {
            grid,
            fields,
            epsilon,
            time,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_phases(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, k: usize) -> &Field {
        &self.fields[k]
    }

    pub fn fields_mut(&mut self) -> &mut [Field] {
        &mut self.fields
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.fields.iter().map(Field::integral).collect()
    }

    /// `max_x |Σ_k u_k(x) - 1|`.
    pub fn partition_residual(&self) -> f64 {
        let fields = &self.fields;
        crate::par::max(self.grid.len(), |i| {
            (fields.iter().map(|f| f.values()[i]).sum::<f64>() - 1.0).abs()
        })
    }

    /// Number of samples outside `[-0.1, 1.1]`.
    pub fn out_of_range_count(&self) -> usize {
        self.fields
            .iter()
            .flat_map(|f| f.values())
            .filter(|&&v| !(-0.1..=1.1).contains(&v))
            .count()
    }

    pub(crate) fn replace_fields(&mut self, fields: Vec<Field>) {
        debug_assert_eq!(fields.len(), self.fields.len());
        self.fields = fields;
    }
}

/// Numerical parameters shared by every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub dt: f64,
    /// Stabilization `α`; values above 2 give unconditional energy decrease.
    pub alpha: f64,
    /// Projection denominator guard `η`.
    pub sum_floor: f64,
    /// Residual tolerance of the volume-constraint system, relative to `|Q|`.
    pub linear_tol: f64,
}

impl SolverParams {
    pub const DEFAULT_ALPHA: f64 = 2.5;
    pub const DEFAULT_SUM_FLOOR: f64 = 1e-12;
    pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;

    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            alpha: Self::DEFAULT_ALPHA,
            sum_floor: Self::DEFAULT_SUM_FLOOR,
            linear_tol: Self::DEFAULT_LINEAR_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SolverError::BadParams("dt must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(SolverError::BadParams("alpha must be non-negative"));
        }
        if !(self.sum_floor.is_finite() && self.sum_floor > 0.0) {
            return Err(SolverError::BadParams("sum_floor must be positive"));
        }
        if !(self.linear_tol.is_finite() && self.linear_tol > 0.0) {
            return Err(SolverError::BadParams("linear_tol must be positive"));
        }
        Ok(())
    }

    /// Whether the stabilization guarantees energy decrease of Step 1.
    pub fn energy_stable(&self) -> bool {
        self.alpha > 2.0
    }
}

/// Per-phase volume behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeMode {
    Free,
    Constant,
}

/// Solid growth fed by the liquid-solid contact: the solid target increases
/// by `dt (c_S/ε) ∫ u_L u_S` per step and the vapor target decreases by the
/// same amount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlsCoupling {
    pub solid: usize,
    pub liquid: usize,
    pub vapor: usize,
    pub growth_rate: f64,
}

/// Volume targets and how they evolve.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSchedule {
    modes: Vec<VolumeMode>,
    targets: Vec<f64>,
    coupling: Option<VlsCoupling>,
}

impl VolumeSchedule {
    pub fn new(modes: Vec<VolumeMode>, targets: Vec<f64>, coupling: Option<VlsCoupling>) -> Result<Self, SolverError> {
        if modes.len() != targets.len() {
            return Err(SolverError::PhaseCount {
                expected: modes.len(),
                got: targets.len(),
            });
        }
        if let Some(c) = coupling {
            let n = modes.len();
            let idx = [c.solid, c.liquid, c.vapor];
            if idx.iter().any(|&i| i >= n) || c.solid == c.liquid || c.solid == c.vapor || c.liquid == c.vapor {
                return Err(SolverError::BadParams("VLS coupling indices must be distinct phases"));
            }
            if idx.iter().any(|&i| modes[i] != VolumeMode::Constant) {
                return Err(SolverError::BadParams(
                    "VLS-coupled phases must have constrained volumes",
                ));
            }
            if !(c.growth_rate.is_finite() && c.growth_rate >= 0.0) {
                return Err(SolverError::BadParams("growth rate must be non-negative"));
            }
        }
        Ok(Self {
            modes,
            targets,
            coupling,
        })
    }

    /// Every phase held at its current volume.
    pub fn constant_from(state: &PhaseState) -> Self {
        Self {
            modes: vec![VolumeMode::Constant; state.n_phases()],
            targets: state.volumes(),
            coupling: None,
        }
    }

    pub fn modes(&self) -> &[VolumeMode] {
        &self.modes
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn coupling(&self) -> Option<&VlsCoupling> {
        self.coupling.as_ref()
    }

    pub fn constrained(&self) -> Vec<usize> {
        (0..self.modes.len())
            .filter(|&k| self.modes[k] == VolumeMode::Constant)
            .collect()
    }

    /// Volume moved from vapor to solid during one step of length `dt`.
    pub fn growth_increment(&self, state: &PhaseState, dt: f64) -> f64 {
        let Some(c) = self.coupling else { return 0.0 };
        if c.growth_rate == 0.0 {
            return 0.0;
        }
        let ul = state.field(c.liquid).values();
        let us = state.field(c.solid).values();
        let contact = crate::par::sum(ul.len(), |i| ul[i] * us[i]) * state.grid().cell_volume();
        dt * c.growth_rate / state.epsilon() * contact
    }

    /// Advances coupled targets by one step using the contact area of `state`.
    pub fn advance_targets(&mut self, state: &PhaseState, dt: f64) -> Result<f64, SolverError> {
        let Some(c) = self.coupling else { return Ok(0.0) };
        let inc = self.growth_increment(state, dt);
        let vapor = self.targets[c.vapor] - inc;
        if vapor < 0.0 {
            return Err(SolverError::TargetUnderflow(vapor));
        }
        self.targets[c.solid] += inc;
        self.targets[c.vapor] = vapor;
        Ok(inc)
    }

    pub fn set_targets(&mut self, targets: Vec<f64>) {
        assert_eq!(targets.len(), self.targets.len());
        self.targets = targets;
    }

    pub fn set_growth_rate(&mut self, rate: f64) {
        if let Some(c) = self.coupling.as_mut() {
            c.growth_rate = rate;
        }
    }
}

/// Free-function form of [`VolumeSchedule::advance_targets`].
pub fn advance_targets(schedule: &VolumeSchedule, state: &PhaseState, dt: f64) -> Result<VolumeSchedule, SolverError> {
    let mut next = schedule.clone();
    next.advance_targets(state, dt)?;
    Ok(next)
}
