//! Wetting on a frozen solid and the two-stage VLS growth protocol.

use super::angles::{measure_contact_angle, ContactAngle};
use super::metrics::{grid_line, level_crossings, rise_width};
use super::ScenarioError;
use crate::model::{MobilitySet, TensionSet};
use crate::solver::{
    run, DiagnosticsRow, Observer, PhaseState, Potential, RunOutput, RunSettings, SolverError, SolverParams,
    StepReport, VlsCoupling, VolumeMode, VolumeSchedule, VolumeSetup,
};
use crate::spectral::Spectral;

/// Tensions, mobilities and numerical parameters of one simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spectral: Spectral,
    pub sigma: TensionSet,
    pub mobility: MobilitySet,
    pub params: SolverParams,
}

impl Simulation {
    pub fn new(
        spectral: Spectral,
        sigma: TensionSet,
        mobility: MobilitySet,
        params: SolverParams,
    ) -> Result<Self, ScenarioError> {
        params.validate()?;
        if sigma.n_phases() != mobility.n_phases() {
            return Err(ScenarioError::BadSetup(format!(
                "{} tensions but {} mobilities",
                sigma.n_phases(),
                mobility.n_phases()
            )));
        }
        Ok(Self {
            spectral,
            sigma,
            mobility,
            params,
        })
    }

    pub fn run(
        &self,
        initial: &PhaseState,
        volume: Option<&mut VolumeSetup>,
        settings: &RunSettings,
        observer: &mut dyn Observer,
    ) -> Result<RunOutput, ScenarioError> {
        Ok(run(
            &self.spectral,
            initial,
            &self.sigma,
            &self.mobility,
            volume,
            &self.params,
            settings,
            observer,
        )?)
    }
}

/// Indices of the solid, liquid and vapor phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VlsPhases {
    pub solid: usize,
    pub liquid: usize,
    pub vapor: usize,
}

impl Default for VlsPhases {
    fn default() -> Self {
        Self {
            solid: 0,
            liquid: 1,
            vapor: 2,
        }
    }
}

impl VlsPhases {
    fn check(&self, n: usize) -> Result<(), ScenarioError> {
        let [s, l, v] = [self.solid, self.liquid, self.vapor];
        if n != 3 || s >= n || l >= n || v >= n || s == l || s == v || l == v {
            return Err(ScenarioError::BadSetup(
                "solid, liquid and vapor must be three distinct phases of a 3-phase state".into(),
            ));
        }
        Ok(())
    }

    fn per_phase(&self, s: f64, l: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; 3];
        out[self.solid] = s;
        out[self.liquid] = l;
        out[self.vapor] = v;
        out
    }

    /// `G_L = √(2W(u_L))`, `G_S = u_S u_L`, `G_V = u_V u_L`.
    fn potentials(&self) -> Vec<Potential> {
        let mut out = vec![Potential::SqrtWell; 3];
        out[self.solid] = Potential::ProductWith(self.liquid);
        out[self.vapor] = Potential::ProductWith(self.liquid);
        out
    }
}

/// Wraps another observer and tracks whether one phase ever changes.
struct FrozenWatch<'a> {
    phase: usize,
    reference: Vec<f64>,
    max_change: f64,
    bitwise: bool,
    inner: &'a mut dyn Observer,
}

impl Observer for FrozenWatch<'_> {
    fn metric_names(&self) -> Vec<String> {
        self.inner.metric_names()
    }

    fn metrics(&mut self, state: &PhaseState) -> Vec<f64> {
        self.inner.metrics(state)
    }

    fn on_step(&mut self, state: &PhaseState, report: &StepReport) -> Result<(), SolverError> {
        for (a, b) in state.field(self.phase).values().iter().zip(&self.reference) {
            if a.to_bits() != b.to_bits() {
                self.bitwise = false;
            }
            self.max_change = self.max_change.max((a - b).abs());
        }
        self.inner.on_step(state, report)
    }

    fn on_sample(&mut self, state: &PhaseState, row: &DiagnosticsRow) -> Result<(), SolverError> {
        self.inner.on_sample(state, row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WettingOutcome {
    pub run: RunOutput,
    /// Largest `|u_S - u_S(0)|` after any step.
    pub solid_max_change: f64,
    /// Solid field identical bit for bit after every step.
    pub solid_bitwise_constant: bool,
    pub contact: ContactAngle,
}

/// Liquid droplet relaxing on a frozen solid: per-phase mobilities
/// `(m_S, m_L, m_V) = (0, 2m_LV, 2m_LV)`, so `m_LS = m_SV = 0` and the
/// liquid-vapor mobility is `m_LV`. Only the liquid volume is constrained.
pub fn wetting_scenario(
    initial: &PhaseState,
    sigma: &TensionSet,
    phases: VlsPhases,
    m_lv: f64,
    params: &SolverParams,
    settings: &RunSettings,
    observer: &mut dyn Observer,
) -> Result<WettingOutcome, ScenarioError> {
    phases.check(initial.n_phases())?;
    let mobility = MobilitySet::from_per_phase(phases.per_phase(0.0, 2.0 * m_lv, 2.0 * m_lv))?;
    let sim = Simulation::new(Spectral::new(*initial.grid()), sigma.clone(), mobility, *params)?;
    let mut modes = vec![VolumeMode::Free; 3];
    modes[phases.liquid] = VolumeMode::Constant;
    let schedule = VolumeSchedule::new(modes, initial.volumes(), None)?;
    let mut volume = VolumeSetup::new(schedule, vec![Potential::SqrtWell; 3])?;
    let mut watch = FrozenWatch {
        phase: phases.solid,
        reference: initial.field(phases.solid).values().to_vec(),
        max_change: 0.0,
        bitwise: true,
        inner: observer,
    };
    let out = sim.run(initial, Some(&mut volume), settings, &mut watch)?;
    let contact = measure_contact_angle(&out.state, phases.solid, phases.liquid)?;
    Ok(WettingOutcome {
        solid_max_change: watch.max_change,
        solid_bitwise_constant: watch.bitwise,
        run: out,
        contact,
    })
}

/// Parameters of the two-stage growth protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlsSettings {
    /// End of the relaxation stage.
    pub t_growth: f64,
    pub t_end: f64,
    /// Solid mobility `δ` of the growth stage (liquid and vapor use 1).
    pub delta: f64,
    /// Prescribed solid increase rate `c_S` of the growth stage.
    pub c_s: f64,
    /// Diagnostics cadence in steps (0: stage ends only).
    pub sample_every: usize,
}

impl VlsSettings {
    pub const DEFAULT_T_GROWTH: f64 = 0.2;
    pub const DEFAULT_C_S: f64 = 0.25;

    /// Defaults with `δ = 1/(2K)` for a grid of `k` samples per axis.
    pub fn new(t_end: f64, k: usize) -> Self {
        Self {
            t_growth: Self::DEFAULT_T_GROWTH,
            t_end,
            delta: 0.5 / k as f64,
            c_s: Self::DEFAULT_C_S,
            sample_every: 0,
        }
    }
}

/// Growth bookkeeping of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRecord {
    pub step: usize,
    pub t: f64,
    /// Change of the solid target applied by the solver.
    pub growth: f64,
    /// `dt (c_S/ε) ∫ u_L u_S` evaluated independently on `u^n`.
    pub expected: f64,
    /// Measured `∫u_S(t^{n+1}) - ∫u_S(t^n)`.
    pub solid_increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlsOutcome {
    pub stage_a: RunOutput,
    pub stage_b: RunOutput,
    /// Droplet shape at the end of the relaxation stage.
    pub stage_a_contact: Result<ContactAngle, ScenarioError>,
    /// Growth-stage steps.
    pub records: Vec<GrowthRecord>,
    /// Largest `|∫u_L - V_L(0)|` after any step of either stage.
    pub max_liquid_error: f64,
    /// Largest `|∫u_S(t^n)|` change during the relaxation stage.
    pub max_stage_a_solid_change: f64,
}

impl VlsOutcome {
    pub fn solid_monotone(&self) -> bool {
        self.records.iter().all(|r| r.solid_increment >= 0.0)
    }

    /// Largest mismatch between measured and expected solid increments.
    pub fn max_increment_mismatch(&self) -> f64 {
        self.records
            .iter()
            .map(|r| {
                (r.solid_increment - r.expected)
                    .abs()
                    .max((r.growth - r.expected).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Tracks liquid and solid volumes; in the growth stage also the expected
/// increments.
struct VlsWatch<'a> {
    phases: VlsPhases,
    liquid0: f64,
    solid0: f64,
    prev_solid: f64,
    /// `ε`-scaled contact integral of the previous state, as a volume increment.
    prev_contact: f64,
    rate: f64,
    scale: f64,
    max_liquid_error: f64,
    max_solid_change: f64,
    records: Vec<GrowthRecord>,
    inner: &'a mut dyn Observer,
}

impl VlsWatch<'_> {
    fn contact(&self, state: &PhaseState) -> f64 {
        let ul = state.field(self.phases.liquid).values();
        let us = state.field(self.phases.solid).values();
        let mut acc = 0.0;
        for (l, s) in ul.iter().zip(us) {
            acc += l * s;
        }
        acc * state.grid().cell_volume()
    }
}

impl Observer for VlsWatch<'_> {
    fn metric_names(&self) -> Vec<String> {
        self.inner.metric_names()
    }

    fn metrics(&mut self, state: &PhaseState) -> Vec<f64> {
        self.inner.metrics(state)
    }

    fn on_step(&mut self, state: &PhaseState, report: &StepReport) -> Result<(), SolverError> {
        let v = state.volumes();
        let (liquid, solid) = (v[self.phases.liquid], v[self.phases.solid]);
        self.max_liquid_error = self.max_liquid_error.max((liquid - self.liquid0).abs());
        self.max_solid_change = self.max_solid_change.max((solid - self.solid0).abs());
        if self.rate > 0.0 {
            self.records.push(GrowthRecord {
                step: report.step,
                t: report.t,
                growth: report.growth,
                expected: self.prev_contact,
                solid_increment: solid - self.prev_solid,
            });
        }
        self.prev_solid = solid;
        self.prev_contact = self.scale * self.contact(state);
        self.inner.on_step(state, report)
    }

    fn on_sample(&mut self, state: &PhaseState, row: &DiagnosticsRow) -> Result<(), SolverError> {
        self.inner.on_sample(state, row)
    }
}

/// Two-stage growth protocol.
///
/// Stage A (`t ≤ t_growth`): per-phase mobilities `(1, 1, 1)`, `c_S = 0`,
/// every phase held at its initial volume, so the droplet relaxes on a
/// fixed amount of solid. Stage B: per-phase mobilities `(δ, 1, 1)` for
/// `(S, L, V)`, i.e. `m_LS = m_SV = δ/(1+δ)` and `m_LV = ½`, with the solid
/// target fed by the liquid-solid contact at rate `c_S`.
pub fn vls_protocol(
    initial: &PhaseState,
    sigma: &TensionSet,
    phases: VlsPhases,
    params: &SolverParams,
    settings: &VlsSettings,
    observer: &mut dyn Observer,
) -> Result<VlsOutcome, ScenarioError> {
    phases.check(initial.n_phases())?;
    if !(settings.delta > 0.0 && settings.delta.is_finite()) {
        return Err(ScenarioError::BadSetup("delta must be positive".into()));
    }
    if !(settings.c_s >= 0.0 && settings.c_s.is_finite()) {
        return Err(ScenarioError::BadSetup("c_S must be non-negative".into()));
    }
    if !(settings.t_growth >= initial.time() && settings.t_end >= settings.t_growth) {
        return Err(ScenarioError::BadSetup("need t0 <= t_growth <= t_end".into()));
    }
    let spectral = Spectral::new(*initial.grid());
    let v0 = initial.volumes();
    let coupling = |rate| VlsCoupling {
        solid: phases.solid,
        liquid: phases.liquid,
        vapor: phases.vapor,
        growth_rate: rate,
    };
    let schedule = VolumeSchedule::new(vec![VolumeMode::Constant; 3], v0.clone(), Some(coupling(0.0)))?;
    let mut volume = VolumeSetup::new(schedule, phases.potentials())?;
    let mut watch = VlsWatch {
        phases,
        liquid0: v0[phases.liquid],
        solid0: v0[phases.solid],
        prev_solid: v0[phases.solid],
        prev_contact: 0.0,
        rate: 0.0,
        scale: 0.0,
        max_liquid_error: 0.0,
        max_solid_change: 0.0,
        records: Vec::new(),
        inner: observer,
    };

    let relax = Simulation::new(
        spectral.clone(),
        sigma.clone(),
        MobilitySet::from_per_phase(vec![1.0; 3])?,
        *params,
    )?;
    let mut s_a = RunSettings::new(settings.t_growth);
    s_a.sample_every = settings.sample_every;
    let stage_a = relax.run(initial, Some(&mut volume), &s_a, &mut watch)?;
    let stage_a_contact = measure_contact_angle(&stage_a.state, phases.solid, phases.liquid);
    let max_stage_a_solid_change = watch.max_solid_change;

    let grow = Simulation::new(
        spectral,
        sigma.clone(),
        MobilitySet::from_per_phase(phases.per_phase(settings.delta, 1.0, 1.0))?,
        *params,
    )?;
    volume.schedule.set_growth_rate(settings.c_s);
    watch.rate = settings.c_s;
    watch.prev_solid = stage_a.state.volumes()[phases.solid];
    watch.scale = params.dt * settings.c_s / initial.epsilon();
    watch.prev_contact = watch.scale * watch.contact(&stage_a.state);
    let mut s_b = RunSettings::new(settings.t_end);
    s_b.sample_every = settings.sample_every;
    let stage_b = grow.run(&stage_a.state, Some(&mut volume), &s_b, &mut watch)?;
    Ok(VlsOutcome {
        stage_a,
        stage_b,
        stage_a_contact,
        records: watch.records,
        max_liquid_error: watch.max_liquid_error,
        max_stage_a_solid_change,
    })
}

/// Half-level crossing of `phase` along the vertical grid line through
/// `x`, closest to height `near`.
pub fn vertical_crossing(state: &PhaseState, phase: usize, x: f64, near: f64) -> Option<f64> {
    let (ix, hy, ly) = column_index(state, x);
    let line = grid_line(state.field(phase), 1, [ix, 0, 0]);
    level_crossings(&line, hy, 0.5).into_iter().map(|c| c.0).min_by(|a, b| {
        super::min_image(a - near, ly)
            .abs()
            .total_cmp(&super::min_image(b - near, ly).abs())
    })
}

/// 10–90% rise distance of `phase` along the vertical grid line through
/// `x`, at the transition closest to height `near`.
pub fn vertical_width(state: &PhaseState, phase: usize, x: f64, near: f64) -> Option<f64> {
    let (ix, hy, _) = column_index(state, x);
    let line = grid_line(state.field(phase), 1, [ix, 0, 0]);
    rise_width(&line, hy, near, 0.1, 0.9)
}

fn column_index(state: &PhaseState, x: f64) -> (usize, f64, f64) {
    let g = state.grid();
    let nx = g.sizes()[0];
    let ix = ((x / g.spacing(0)).round() as i64).rem_euclid(nx as i64) as usize;
    (ix, g.spacing(1), g.lengths()[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{init_from_shapes, HeightProfile, ShapeSpec};
    use crate::spectral::Grid;

    fn droplet(k: usize) -> PhaseState {
        let g = Grid::cube(2, k, 1.0).unwrap();
        let shapes = [
            ShapeSpec::half_plane_substrate(0.1, HeightProfile::flat(0.3)),
            ShapeSpec::droplet_on_substrate([0.5, 0.3], 0.2),
            ShapeSpec::Rest,
        ];
        init_from_shapes(g, 1.0 / k as f64, &shapes).unwrap()
    }

    #[test]
    fn wetting_keeps_solid_bitwise() {
        let k = 32;
        let s = droplet(k);
        let sigma = TensionSet::from_pairs3([1.0, 1.0, 1.0]).unwrap();
        let params = SolverParams::new(1.0 / (k * k) as f64);
        let settings = RunSettings::new(20.0 * params.dt);
        let out = wetting_scenario(&s, &sigma, VlsPhases::default(), 1.0, &params, &settings, &mut ()).unwrap();
        assert!(out.solid_bitwise_constant);
        assert_eq!(out.solid_max_change, 0.0);
        assert!(out.run.max_volume_error <= 1e-10);
    }

    #[test]
    fn zero_growth_keeps_solid_volume() {
        let k = 32;
        let s = droplet(k);
        let sigma = TensionSet::from_pairs3([1.0, 1.0, 1.0]).unwrap();
        let params = SolverParams::new(1.0 / (k * k) as f64);
        let mut vs = VlsSettings::new(40.0 * params.dt, k);
        vs.t_growth = 20.0 * params.dt;
        vs.c_s = 0.0;
        let out = vls_protocol(&s, &sigma, VlsPhases::default(), &params, &vs, &mut ()).unwrap();
        let solid0 = s.volumes()[0];
        assert!((out.stage_b.state.volumes()[0] - solid0).abs() <= 1e-8);
        assert!(out.max_stage_a_solid_change <= 1e-8);
        assert!(out.records.is_empty());
    }

    #[test]
    fn growth_tracks_contact() {
        let k = 32;
        let s = droplet(k);
        let sigma = TensionSet::from_pairs3([1.0, 1.0, 1.0]).unwrap();
        let params = SolverParams::new(1.0 / (k * k) as f64);
        let mut vs = VlsSettings::new(40.0 * params.dt, k);
        vs.t_growth = 20.0 * params.dt;
        let out = vls_protocol(&s, &sigma, VlsPhases::default(), &params, &vs, &mut ()).unwrap();
        assert_eq!(out.records.len(), 20);
        assert!(out.solid_monotone());
        assert!(
            out.max_increment_mismatch() <= 1e-10,
            "{}",
            out.max_increment_mismatch()
        );
        assert!(out.max_liquid_error <= 1e-8);
        assert!(out.records.iter().all(|r| r.expected > 0.0));
    }
}
