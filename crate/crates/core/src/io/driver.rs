//! Executes a [`RunConfig`]: initial data, the chosen scenario, and every
//! output file.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::config::{RunConfig, Scenario, ValidationError};
use super::format_real;
use super::output::{contours_csv, diagnostics_csv, write_frame};
use crate::scenarios::{
    extract_contour, init_from_shapes, measure_contact_angle, vls_protocol, wetting_scenario, ScenarioError,
    Simulation, VlsPhases, VlsSettings,
};
use crate::solver::{
    Diagnostics, Observer, PhaseState, RunOutput, RunSettings, SolverError, StepReport, VolumeSchedule, VolumeSetup,
};
use crate::spectral::Spectral;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Io(#[from] io::Error),
}

/// Headline numbers of a completed run, as `key = value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub entries: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

/// Writes frames (and contours) when the state reaches each frame time.
struct FrameWriter<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    comments: Vec<String>,
    next: usize,
    written: Vec<PathBuf>,
    contact: bool,
}

impl FrameWriter<'_> {
    fn due(&self, t: f64) -> bool {
        self.next < self.config.output.frame_times.len()
            && self.config.output.frame_times[self.next] <= t + 0.5 * self.config.solver.dt
    }

    fn write(&mut self, s: &PhaseState) -> io::Result<()> {
        let stem = format!("frame_{:03}", self.next);
        self.written
            .extend(write_frame(s, &self.config.names, self.dir, &stem, &self.comments)?);
        if self.config.output.contours && s.grid().dim() >= 2 {
            let contours: Vec<_> = self
                .config
                .names
                .iter()
                .zip(s.fields())
                .map(|(n, f)| (n.clone(), extract_contour(f, 0.5)))
                .collect();
            let mut comments = self.comments.clone();
            comments.push(format!("t = {}", format_real(s.time())));
            let path = self.dir.join(format!("contours_{:03}.csv", self.next));
            std::fs::write(&path, contours_csv(&contours, &comments))
                .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            self.written.push(path);
        }
        self.next += 1;
        Ok(())
    }

    fn catch_up(&mut self, s: &PhaseState) -> io::Result<()> {
        while self.due(s.time()) {
            self.write(s)?;
        }
        Ok(())
    }
}

impl Observer for FrameWriter<'_> {
    fn metric_names(&self) -> Vec<String> {
        if self.contact {
            vec!["contact_angle_deg".into()]
        } else {
            Vec::new()
        }
    }

    fn metrics(&mut self, s: &PhaseState) -> Vec<f64> {
        if self.contact {
            let p = VlsPhases::default();
            vec![measure_contact_angle(s, p.solid, p.liquid).map_or(f64::NAN, |c| c.theta.to_degrees())]
        } else {
            Vec::new()
        }
    }

    fn on_step(&mut self, s: &PhaseState, _report: &StepReport) -> Result<(), SolverError> {
        self.catch_up(s).map_err(|e| SolverError::Aborted(e.to_string()))
    }
}

fn push(entries: &mut Vec<(String, String)>, key: &str, value: impl ToString) {
    entries.push((key.to_string(), value.to_string()));
}

fn run_entries(entries: &mut Vec<(String, String)>, prefix: &str, out: &RunOutput) {
    push(entries, &format!("{prefix}steps"), out.steps);
    push(
        entries,
        &format!("{prefix}max_partition_residual"),
        format_real(out.max_partition_residual),
    );
    push(
        entries,
        &format!("{prefix}max_fallback_fraction"),
        format_real(out.max_fallback_fraction),
    );
    push(
        entries,
        &format!("{prefix}max_volume_error"),
        format_real(out.max_volume_error),
    );
    if let Some(e) = out.max_step1_energy_increase {
        push(entries, &format!("{prefix}max_step1_energy_increase"), format_real(e));
    }
}

/// Runs `config`, writing every output into `dir` (created if missing).
pub fn execute(config: &RunConfig, dir: &Path) -> Result<RunSummary, RunError> {
    config.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", dir.display())))?;
    let comments = vec![format!("mobflow {}", env!("CARGO_PKG_VERSION")), config.to_text()];
    let grid = config.grid();
    let sigma = config.tension_set()?;
    let initial = init_from_shapes(grid, config.epsilon, &config.shapes)?;
    let mut frames = FrameWriter {
        config,
        dir,
        comments: comments.clone(),
        next: 0,
        written: Vec::new(),
        contact: matches!(config.scenario, Scenario::Wetting),
    };
    frames.catch_up(&initial)?;

    let settings = RunSettings {
        t_end: config.t_end,
        sample_every: config.output.sample_every,
        check_energy: config.check_energy,
    };
    let mut entries = Vec::new();
    push(&mut entries, "scenario", config.scenario.name());
    let (final_state, diagnostics): (PhaseState, Diagnostics) = match &config.scenario {
        Scenario::Plain { volume } => {
            let mobility = config.mobility_set()?.expect("plain runs carry mobilities");
            let sim = Simulation::new(Spectral::new(grid), sigma, mobility, config.solver)?;
            let mut setup = volume
                .contains(&crate::solver::VolumeMode::Constant)
                .then(|| VolumeSchedule::new(volume.clone(), initial.volumes(), None).map(VolumeSetup::sqrt_well))
                .transpose()
                .map_err(ScenarioError::from)?;
            let out = sim.run(&initial, setup.as_mut(), &settings, &mut frames)?;
            run_entries(&mut entries, "", &out);
            (out.state, out.diagnostics)
        }
        Scenario::Wetting => {
            let m_lv = match &config.mobilities {
                Some(super::config::Mobilities::Pairwise(p)) => p[2],
                _ => unreachable!("validated"),
            };
            let out = wetting_scenario(
                &initial,
                &sigma,
                VlsPhases::default(),
                m_lv,
                &config.solver,
                &settings,
                &mut frames,
            )?;
            run_entries(&mut entries, "", &out.run);
            push(&mut entries, "solid_bitwise_constant", out.solid_bitwise_constant);
            push(
                &mut entries,
                "contact_angle_deg",
                format_real(out.contact.theta.to_degrees()),
            );
            push(
                &mut entries,
                "contact_circularity",
                format_real(out.contact.circularity),
            );
            (out.run.state, out.run.diagnostics)
        }
        Scenario::Vls { t_growth, c_s, delta } => {
            let vs = VlsSettings {
                t_growth: *t_growth,
                t_end: config.t_end,
                delta: *delta,
                c_s: *c_s,
                sample_every: config.output.sample_every,
            };
            let out = vls_protocol(&initial, &sigma, VlsPhases::default(), &config.solver, &vs, &mut frames)?;
            run_entries(&mut entries, "stage_a_", &out.stage_a);
            run_entries(&mut entries, "stage_b_", &out.stage_b);
            push(
                &mut entries,
                "max_liquid_volume_error",
                format_real(out.max_liquid_error),
            );
            push(
                &mut entries,
                "max_increment_mismatch",
                format_real(out.max_increment_mismatch()),
            );
            push(&mut entries, "solid_monotone", out.solid_monotone());
            if let Ok(c) = &out.stage_a_contact {
                push(&mut entries, "stage_a_circularity", format_real(c.circularity));
            }
            let mut d = out.stage_a.diagnostics;
            let b = out.stage_b.diagnostics;
            let last_t = d.rows.last().map(|r| r.t);
            d.rows.extend(b.rows.into_iter().skip_while(|r| Some(r.t) == last_t));
            (out.stage_b.state, d)
        }
    };
    frames.catch_up(&final_state)?;
    push(&mut entries, "t_final", format_real(final_state.time()));

    let mut header = comments;
    if !config.output.deterministic {
        header.push(format!("wall_time_s = {}", started.elapsed().as_secs_f64()));
    }
    let path = dir.join("diagnostics.csv");
    std::fs::write(&path, diagnostics_csv(&diagnostics, config.n_phases(), &header))
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut files = frames.written;
    files.push(path);
    let path = dir.join("config.cfg");
    std::fs::write(&path, config.to_text())
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(RunSummary { entries, files })
}
