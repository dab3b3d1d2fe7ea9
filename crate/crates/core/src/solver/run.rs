use super::projection::{project_partition, project_partition_volume, Potential, ProjectionReport, VolumeTargets};
use super::step::{energy, step_diffusion, step_general};
use super::{PhaseState, SolverError, SolverParams, VolumeSchedule};
use crate::model::{MobilitySet, TensionSet};
use crate::spectral::Spectral;

/// Volume schedule plus the potential `G_k` used by each constrained phase.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSetup {
    pub schedule: VolumeSchedule,
    /// One entry per phase; only entries of constrained phases are used.
    pub potentials: Vec<Potential>,
}

impl VolumeSetup {
    pub fn new(schedule: VolumeSchedule, potentials: Vec<Potential>) -> Result<Self, SolverError> {
        if potentials.len() != schedule.modes().len() {
            return Err(SolverError::PhaseCount {
                expected: schedule.modes().len(),
                got: potentials.len(),
            });
        }
        Ok(Self { schedule, potentials })
    }

    /// `G_k = √(2W(u_k))` for every phase.
    pub fn sqrt_well(schedule: VolumeSchedule) -> Self {
        let n = schedule.modes().len();
        Self {
            schedule,
            potentials: vec![Potential::SqrtWell; n],
        }
    }
}

/// One sampled diagnostics row.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub volumes: Vec<f64>,
    pub lambda_norm: f64,
    pub partition_residual: f64,
    /// Extra columns filled in by an [`Observer`].
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub metric_names: Vec<String>,
    pub rows: Vec<DiagnosticsRow>,
}

/// Everything known about one completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based step index.
    pub step: usize,
    pub t: f64,
    /// `E(u^{n+½}) - E(u^n)` when energy checking is enabled.
    pub step1_energy_change: Option<f64>,
    /// Volume moved from vapor to solid by the VLS coupling this step.
    pub growth: f64,
    /// Solid target after the update (VLS runs only).
    pub targets: Option<Vec<f64>>,
    pub projection: ProjectionReport,
}

/// Hooks invoked by [`run`].
pub trait Observer {
    /// Names of the extra metric columns appended to each row.
    fn metric_names(&self) -> Vec<String> {
        Vec::new()
    }

    /// Computes extra metrics for a sampled state.
    fn metrics(&mut self, _state: &PhaseState) -> Vec<f64> {
        Vec::new()
    }

    /// Called after every step.
    fn on_step(&mut self, _state: &PhaseState, _report: &StepReport) -> Result<(), SolverError> {
        Ok(())
    }

    /// Called after each diagnostics sample.
    fn on_sample(&mut self, _state: &PhaseState, _row: &DiagnosticsRow) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Observer that does nothing.
impl Observer for () {}

/// Loop controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub t_end: f64,
    /// Sample diagnostics every this many steps (0: only first and last).
    pub sample_every: usize,
    /// Evaluate the energy before and after every Step 1.
    pub check_energy: bool,
}

impl RunSettings {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            sample_every: 0,
            check_energy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: PhaseState,
    pub diagnostics: Diagnostics,
    pub steps: usize,
    /// Largest `|Σu - 1|` outside fallback cells after any projection.
    pub max_partition_residual: f64,
    /// Largest fraction of samples using the `η` fallback in one step.
    pub max_fallback_fraction: f64,
    /// Largest Step-1 energy increase (negative if the energy always fell).
    pub max_step1_energy_increase: Option<f64>,
    /// Largest `max_k |∫u_k - V_k|` over constrained phases after any step.
    pub max_volume_error: f64,
}

/// Number of steps of length `dt` needed to reach `t_end`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        return 0;
    }
    ((t_end / dt) - 1e-9).ceil().max(0.0) as usize
}

/// Iterates Step 1 and Step 2 from the initial state's time until
/// `t ≥ t_end`.
///
/// The VLS targets are advanced from `u^n` before the projection of step
/// `n + 1`. Volume constraints require a harmonically additive mobility.
pub fn run(
    spectral: &Spectral,
    initial: &PhaseState,
    sigma: &TensionSet,
    mobility: &MobilitySet,
    mut volume: Option<&mut VolumeSetup>,
    params: &SolverParams,
    settings: &RunSettings,
    observer: &mut dyn Observer,
) -> Result<RunOutput, SolverError> {
    params.validate()?;
    let n = initial.n_phases();
    if sigma.n_phases() != n {
        return Err(SolverError::PhaseCount {
            expected: n,
            got: sigma.n_phases(),
        });
    }
    if mobility.n_phases() != n {
        return Err(SolverError::PhaseCount {
            expected: n,
            got: mobility.n_phases(),
        });
    }
    if spectral.grid() != initial.grid() {
        return Err(SolverError::GridMismatch(0));
    }
    if let Some(v) = volume.as_deref() {
        if v.schedule.modes().len() != n {
            return Err(SolverError::PhaseCount {
                expected: n,
                got: v.schedule.modes().len(),
            });
        }
        if matches!(mobility, MobilitySet::General { .. }) && !v.schedule.constrained().is_empty() {
            return Err(SolverError::GeneralMobilityWithVolume);
        }
    }
    let sig = sigma.per_phase().to_vec();
    let projection_weights: Vec<f64> = match mobility {
        MobilitySet::HarmonicallyAdditive { per_phase } => per_phase.clone(),
        // Σu is preserved by the general step; the projection only removes rounding.
        MobilitySet::General { .. } => vec![1.0; n],
    };
    let t0 = initial.time();
    let steps = step_count(settings.t_end - t0, params.dt);
    let len = initial.grid().len() as f64;

    let mut diagnostics = Diagnostics {
        metric_names: observer.metric_names(),
        rows: Vec::new(),
    };
    let mut state = initial.clone();
    let mut last = ProjectionReport {
        lambda_bar: vec![0.0; n],
        ..Default::default()
    };
    last.residual = state.partition_residual();
    let sample = |state: &PhaseState,
                  report: &ProjectionReport,
                  diagnostics: &mut Diagnostics,
                  observer: &mut dyn Observer|
     -> Result<(), SolverError> {
        let row = DiagnosticsRow {
            t: state.time(),
            energy: energy(spectral, state, &sig),
            volumes: state.volumes(),
            lambda_norm: report.lambda_norm(),
            partition_residual: report.residual,
            metrics: observer.metrics(state),
        };
        observer.on_sample(state, &row)?;
        diagnostics.rows.push(row);
        Ok(())
    };
    sample(&state, &last, &mut diagnostics, observer)?;

    let mut max_residual: f64 = 0.0;
    let mut max_fallback: f64 = 0.0;
    let mut max_increase: Option<f64> = None;
    let mut max_volume_error: f64 = 0.0;
    for step in 1..=steps {
        let e0 = settings.check_energy.then(|| energy(spectral, &state, &sig));
        let half = match mobility {
            MobilitySet::HarmonicallyAdditive { per_phase } => {
                step_diffusion(spectral, &state, &sig, per_phase, params)
            }
            MobilitySet::General { metric, .. } => step_general(spectral, &state, &sig, metric, params)?,
        };
        let change = e0.map(|e| energy(spectral, &half, &sig) - e);
        if let Some(c) = change {
            max_increase = Some(max_increase.map_or(c, |m: f64| m.max(c)));
        }

        let mut growth = 0.0;
        let mut targets = None;
        let (mut next, report) = match volume.as_deref_mut() {
            Some(v) if !v.schedule.constrained().is_empty() => {
                growth = v.schedule.advance_targets(&state, params.dt)?;
                let phases = v.schedule.constrained();
                let tv: Vec<f64> = phases.iter().map(|&k| v.schedule.targets()[k]).collect();
                let pots: Vec<Potential> = phases.iter().map(|&k| v.potentials[k]).collect();
                let vt = VolumeTargets {
                    phases: &phases,
                    targets: &tv,
                    potentials: &pots,
                };
                let out = project_partition_volume(&half, &projection_weights, &vt, params)?;
                let vols = out.0.volumes();
                for (a, &k) in phases.iter().enumerate() {
                    max_volume_error = max_volume_error.max((vols[k] - tv[a]).abs());
                }
                if v.schedule.coupling().is_some() {
                    targets = Some(v.schedule.targets().to_vec());
                }
                out
            }
            _ => project_partition(&half, &projection_weights, params)?,
        };
        if next.fields().iter().any(|f| !f.is_finite()) {
            return Err(SolverError::NonFiniteState(step));
        }
        next.set_time(t0 + step as f64 * params.dt);
        max_residual = max_residual.max(report.residual);
        max_fallback = max_fallback.max(report.fallback_cells as f64 / len);
        let step_report = StepReport {
            step,
            t: next.time(),
            step1_energy_change: change,
            growth,
            targets,
            projection: report,
        };
        observer.on_step(&next, &step_report)?;
        state = next;
        let due = settings.sample_every > 0 && step % settings.sample_every == 0;
        if due || step == steps {
            sample(&state, &step_report.projection, &mut diagnostics, observer)?;
        }
    }
    Ok(RunOutput {
        state,
        diagnostics,
        steps,
        max_partition_residual: max_residual,
        max_fallback_fraction: max_fallback,
        max_step1_energy_increase: max_increase,
        max_volume_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::optimal_profile;
    use crate::solver::{VolumeMode, VolumeSchedule};
    use crate::spectral::{Field, Grid};

    fn junction(k: usize) -> PhaseState {
        let g = Grid::cube(2, k, 1.0).unwrap();
        let eps = 1.0 / k as f64;
        let band = move |x: [f64; 3]| optimal_profile(((x[1] - 0.5).abs() - 0.25) / eps);
        let strip = move |x: [f64; 3]| optimal_profile(((x[0] - 0.5).abs() - 0.25) / eps);
        let u1 = Field::from_fn(g, band);
        let u2 = Field::from_fn(g, move |x| (1.0 - band(x)) * strip(x));
        let u3 = Field::from_fn(g, move |x| (1.0 - band(x)) * (1.0 - strip(x)));
        let s = PhaseState::new(vec![u1, u2, u3], eps, 0.0).unwrap();
        project_partition(&s, &[1.0; 3], &SolverParams::new(1e-4)).unwrap().0
    }

    #[test]
    fn zero_end_time_returns_input() {
        let s = junction(32);
        let sp = Spectral::new(*s.grid());
        let sigma = TensionSet::from_pairs3([1.0; 3]).unwrap();
        let m = MobilitySet::from_per_phase(vec![1.0; 3]).unwrap();
        let out = run(
            &sp,
            &s,
            &sigma,
            &m,
            None,
            &SolverParams::new(1e-4),
            &RunSettings::new(0.0),
            &mut (),
        )
        .unwrap();
        assert_eq!(out.state, s);
        assert_eq!(out.steps, 0);
        assert_eq!(out.diagnostics.rows.len(), 1);
    }

    #[test]
    fn step_count_reaches_end() {
        assert_eq!(step_count(0.0, 0.1), 0);
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.05, 0.1), 11);
        assert_eq!(step_count(0.03, 1.0 / 65536.0), 1967);
    }

    #[test]
    fn constrained_run_keeps_volumes() {
        let s = junction(32);
        let sp = Spectral::new(*s.grid());
        let sigma = TensionSet::from_pairs3([1.0; 3]).unwrap();
        let m = MobilitySet::from_per_phase(vec![1.0; 3]).unwrap();
        let mut v = VolumeSetup::sqrt_well(VolumeSchedule::constant_from(&s));
        let params = SolverParams::new(1.0 / 1024.0);
        let mut settings = RunSettings::new(20.0 / 1024.0);
        settings.sample_every = 5;
        let out = run(&sp, &s, &sigma, &m, Some(&mut v), &params, &settings, &mut ()).unwrap();
        assert!(out.max_volume_error <= 1e-10);
        assert!(out.max_partition_residual <= 1e-10);
        assert_eq!(out.diagnostics.rows.len(), 5);
    }

    #[test]
    fn energy_decreases_without_constraints() {
        let s = junction(32);
        let sp = Spectral::new(*s.grid());
        let sigma = TensionSet::from_pairs3([1.0; 3]).unwrap();
        let m = MobilitySet::from_per_phase(vec![1.0; 3]).unwrap();
        let mut settings = RunSettings::new(20.0 / 1024.0);
        settings.check_energy = true;
        let out = run(
            &sp,
            &s,
            &sigma,
            &m,
            None,
            &SolverParams::new(1.0 / 1024.0),
            &settings,
            &mut (),
        )
        .unwrap();
        assert!(out.max_step1_energy_increase.unwrap() <= 1e-10);
    }

    #[test]
    fn general_mobility_rejects_volume_constraints() {
        let s = junction(16);
        let sp = Spectral::new(*s.grid());
        let sigma = TensionSet::from_pairs3([1.0; 3]).unwrap();
        let m = MobilitySet::general(crate::model::symmetric_from_pairs(3, &[1.0, 1.0, 1.0]).unwrap()).unwrap();
        let sched = VolumeSchedule::new(
            vec![VolumeMode::Constant, VolumeMode::Free, VolumeMode::Free],
            s.volumes(),
            None,
        )
        .unwrap();
        let mut v = VolumeSetup::sqrt_well(sched);
        let r = run(
            &sp,
            &s,
            &sigma,
            &m,
            Some(&mut v),
            &SolverParams::new(1e-4),
            &RunSettings::new(1e-3),
            &mut (),
        );
        assert_eq!(r.unwrap_err(), SolverError::GeneralMobilityWithVolume);
    }
}
