//! Line-oriented `section.key = value` run configuration.
//!
//! ```text
//! # comment
//! grid.sizes = 256, 256
//! phases.names = a, b, c
//! model.tensions = 1, 1, 1
//! shapes.a = slab y, 0.4, 0.6
//! shapes.b = rect 0, 0, 0.5, 1
//! shapes.c = rest
//! solver.t_end = 0.15
//! ```
//!
//! Syntax problems and unknown keys are [`ParseError`]s carrying the line
//! number; semantic problems (missing keys, out-of-range values, mismatched
//! lengths) are [`ValidationError`]s. Omitted optional keys are resolved to
//! their defaults so that [`RunConfig::to_text`] records every value used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use super::format_real;
use crate::model::{symmetric_from_pairs, MobilitySet, TensionSet, TriangleCheck};
use crate::scenarios::{HeightProfile, Region, ShapeSpec};
use crate::solver::{SolverParams, VolumeMode};
use crate::spectral::Grid;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ValidationError(pub String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Surface tensions as given: pairwise upper triangle or per phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensions {
    Pairwise(Vec<f64>),
    PerPhase(Vec<f64>),
}

/// Mobilities as given: pairwise upper triangle or per phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobilities {
    Pairwise(Vec<f64>),
    PerPhase(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityModel {
    /// Harmonically additive when the pairs allow it, general otherwise.
    Auto,
    /// Always the general metric `A_ij = -1/m_ij`.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Plain flow with optional per-phase volume constraints.
    Plain { volume: Vec<VolumeMode> },
    /// Frozen solid; phases are ordered solid, liquid, vapor.
    Wetting,
    /// Two-stage nanowire growth; phases are ordered solid, liquid, vapor.
    Vls { t_growth: f64, c_s: f64, delta: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Plain { .. } => "plain",
            Self::Wetting => "wetting",
            Self::Vls { .. } => "vls",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Diagnostics row every this many steps (0: first and last only).
    pub sample_every: usize,
    /// Times at which frames (and contours) are written.
    pub frame_times: Vec<f64>,
    pub contours: bool,
    /// Keep outputs free of wall-clock data so reruns are bit-identical.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub names: Vec<String>,
    pub epsilon: f64,
    pub tensions: Tensions,
    /// `None` only for protocols that choose their own mobilities.
    pub mobilities: Option<Mobilities>,
    pub mobility_model: MobilityModel,
    pub solver: SolverParams,
    pub t_end: f64,
    pub check_energy: bool,
    pub scenario: Scenario,
    pub shapes: Vec<ShapeSpec>,
    pub output: OutputConfig,
}

const KEYS: &[&str] = &[
    "grid.sizes",
    "grid.lengths",
    "phases.names",
    "model.epsilon",
    "model.tensions",
    "model.phase_tensions",
    "model.mobilities",
    "model.phase_mobilities",
    "model.mobility_model",
    "solver.dt",
    "solver.alpha",
    "solver.sum_floor",
    "solver.linear_tol",
    "solver.t_end",
    "solver.check_energy",
    "scenario.kind",
    "volume.modes",
    "vls.t_growth",
    "vls.c_s",
    "vls.delta",
    "output.dir",
    "output.sample_every",
    "output.frame_times",
    "output.contours",
    "output.deterministic",
];

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = RawConfig::parse(text)?;
    raw.resolve().map_err(Into::into)
}

struct Entry {
    line: usize,
    value: String,
}

struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn perr(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

fn verr(message: impl Into<String>) -> ValidationError {
    ValidationError(message.into())
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ParseError> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| perr(line, format!("expected `section.key = value`, got `{content}`")))?;
            let key = key.trim();
            let (section, name) = key
                .split_once('.')
                .ok_or_else(|| perr(line, format!("key `{key}` has no section")))?;
            let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ident(section) || !ident(name) {
                return Err(perr(line, format!("malformed key `{key}`")));
            }
            if section != "shapes" && !KEYS.contains(&key) {
                return Err(perr(line, format!("unknown key `{key}`")));
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(perr(line, format!("`{key}` has no value")));
            }
            if entries.contains_key(key) {
                return Err(perr(line, format!("duplicate key `{key}`")));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn list<T>(&self, key: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<Vec<T>>, ParseError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                f(s).ok_or_else(|| perr(e.line, format!("`{key}`: `{s}` is not {what}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        self.list(key, parse_real, "a number")
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ParseError> {
        scalar(key, self.reals(key)?, self.get(key))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ParseError> {
        scalar(
            key,
            self.list(key, |s| s.parse().ok(), "a non-negative integer")?,
            self.get(key),
        )
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ParseError> {
        let b = |s: &str| match s {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        };
        scalar(key, self.list(key, b, "`true` or `false`")?, self.get(key))
    }

    fn word(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let sizes = self
            .list("grid.sizes", |s| s.parse::<usize>().ok(), "a positive integer")?
            .ok_or_else(|| verr("grid.sizes is required"))?;
        let dim = sizes.len();
        if !(1..=3).contains(&dim) {
            return Err(verr(format!("grid.sizes needs 1 to 3 entries, got {dim}")).into());
        }
        let lengths = self.reals("grid.lengths")?.unwrap_or_else(|| vec![1.0; dim]);
        let grid = Grid::new(&sizes, &lengths).map_err(|e| verr(format!("grid: {e}")))?;

        let names: Vec<String> = self
            .list("phases.names", |s| Some(s.to_string()), "a name")?
            .ok_or_else(|| verr("phases.names is required"))?;
        let n = names.len();
        if n < 2 {
            return Err(verr(format!("phases.names needs at least 2 phases, got {n}")).into());
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(verr(format!("phase name `{name}` must be alphanumeric")).into());
            }
            if names[..i].contains(name) {
                return Err(verr(format!("phase name `{name}` is repeated")).into());
            }
        }

        let epsilon = self.real("model.epsilon")?.unwrap_or_else(|| grid.spacing(0));
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(verr("model.epsilon must be positive").into());
        }
        let tensions = match (self.reals("model.tensions")?, self.reals("model.phase_tensions")?) {
            (Some(p), None) => Tensions::Pairwise(p),
            (None, Some(p)) => Tensions::PerPhase(p),
            (None, None) => return Err(verr("one of model.tensions or model.phase_tensions is required").into()),
            (Some(_), Some(_)) => {
                return Err(verr("model.tensions and model.phase_tensions are mutually exclusive").into())
            }
        };
        let mobilities = match (self.reals("model.mobilities")?, self.reals("model.phase_mobilities")?) {
            (Some(p), None) => Some(Mobilities::Pairwise(p)),
            (None, Some(p)) => Some(Mobilities::PerPhase(p)),
            (None, None) => None,
            (Some(_), Some(_)) => {
                return Err(verr("model.mobilities and model.phase_mobilities are mutually exclusive").into())
            }
        };
        let mobility_model = match self.word("model.mobility_model") {
            None | Some("auto") => MobilityModel::Auto,
            Some("general") => MobilityModel::General,
            Some(other) => {
                let line = self.get("model.mobility_model").unwrap().line;
                return Err(perr(
                    line,
                    format!("model.mobility_model: `{other}` is not `auto` or `general`"),
                )
                .into());
            }
        };

        let dt = self.real("solver.dt")?.unwrap_or(epsilon * epsilon);
        let solver = SolverParams {
            dt,
            alpha: self.real("solver.alpha")?.unwrap_or(SolverParams::DEFAULT_ALPHA),
            sum_floor: self
                .real("solver.sum_floor")?
                .unwrap_or(SolverParams::DEFAULT_SUM_FLOOR),
            linear_tol: self
                .real("solver.linear_tol")?
                .unwrap_or(SolverParams::DEFAULT_LINEAR_TOL),
        };
        let t_end = self
            .real("solver.t_end")?
            .ok_or_else(|| verr("solver.t_end is required"))?;
        let check_energy = self.bool("solver.check_energy")?.unwrap_or(false);

        let kind = self.word("scenario.kind").unwrap_or("plain");
        let volume = self.list(
            "volume.modes",
            |s| match s {
                "free" => Some(VolumeMode::Free),
                "constant" => Some(VolumeMode::Constant),
                _ => None,
            },
            "`free` or `constant`",
        )?;
        let vls_keys = ["vls.t_growth", "vls.c_s", "vls.delta"];
        if kind != "vls" {
            if let Some(k) = vls_keys.iter().find(|k| self.get(k).is_some()) {
                return Err(verr(format!("{k} only applies to scenario.kind = vls")).into());
            }
        }
        if kind != "plain" && volume.is_some() {
            return Err(verr("volume.modes only applies to scenario.kind = plain").into());
        }
        let scenario = match kind {
            "plain" => Scenario::Plain {
                volume: volume.unwrap_or_else(|| vec![VolumeMode::Free; n]),
            },
            "wetting" => Scenario::Wetting,
            "vls" => Scenario::Vls {
                t_growth: self.real("vls.t_growth")?.unwrap_or(0.2),
                c_s: self.real("vls.c_s")?.unwrap_or(0.25),
                delta: self.real("vls.delta")?.unwrap_or(0.5 / sizes[0] as f64),
            },
            other => {
                let line = self.get("scenario.kind").unwrap().line;
                return Err(perr(line, format!("scenario.kind: `{other}` is not plain, wetting or vls")).into());
            }
        };

        for (key, e) in &self.entries {
            if let Some(name) = key.strip_prefix("shapes.") {
                if !names.iter().any(|n| n == name) {
                    return Err(perr(e.line, format!("`{key}` names no declared phase")).into());
                }
            }
        }
        let mut shapes = Vec::with_capacity(n);
        for name in &names {
            let key = format!("shapes.{name}");
            let e = self.get(&key).ok_or_else(|| verr(format!("{key} is required")))?;
            shapes.push(parse_shape(&e.value, dim).map_err(|m| perr(e.line, format!("{key}: {m}")))?);
        }

        let output = OutputConfig {
            dir: PathBuf::from(self.word("output.dir").unwrap_or("output")),
            sample_every: self.usize("output.sample_every")?.unwrap_or(0),
            frame_times: self.reals("output.frame_times")?.unwrap_or_else(|| vec![0.0, t_end]),
            contours: self.bool("output.contours")?.unwrap_or(true),
            deterministic: self.bool("output.deterministic")?.unwrap_or(true),
        };

        let mobilities = match (&scenario, mobilities) {
            (Scenario::Vls { .. }, Some(_)) => {
                return Err(verr("the vls protocol sets its own mobilities; remove model.mobilities").into())
            }
            (Scenario::Vls { .. }, None) => None,
            // Every pair at unit mobility.
            (_, None) => Some(Mobilities::PerPhase(vec![2.0; n])),
            (_, Some(m)) => Some(m),
        };

        let config = RunConfig {
            sizes,
            lengths,
            names,
            epsilon,
            tensions,
            mobilities,
            mobility_model,
            solver,
            t_end,
            check_energy,
            scenario,
            shapes,
            output,
        };
        config.validate()?;
        Ok(config)
    }
}

fn scalar<T>(key: &str, v: Option<Vec<T>>, e: Option<&Entry>) -> Result<Option<T>, ParseError> {
    match v {
        None => Ok(None),
        Some(mut v) if v.len() == 1 => Ok(v.pop()),
        Some(v) => Err(perr(
            e.map_or(0, |e| e.line),
            format!("`{key}` takes one value, got {}", v.len()),
        )),
    }
}

/// Decimal or scientific number; also `a/b` for exact fractions such as
/// `1/256`.
fn parse_real(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let (a, b) = (parse_plain(a.trim())?, parse_plain(b.trim())?);
        return Some(a / b);
    }
    parse_plain(s)
}

fn parse_plain(s: &str) -> Option<f64> {
    // `f64::from_str` also accepts `inf` / `nan`; those are never valid here.
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn parse_shape(text: &str, dim: usize) -> Result<ShapeSpec, String> {
    if text.trim() == "rest" {
        return Ok(ShapeSpec::Rest);
    }
    let mut parts = text
        .split(';')
        .map(|p| parse_region(p.trim(), dim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShapeSpec::Region(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Region::Union(parts)
    }))
}

fn parse_region(text: &str, dim: usize) -> Result<Region, String> {
    let (kind, args) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let args: Vec<&str> = args.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let nums = |from: usize| -> Result<Vec<f64>, String> {
        args[from..]
            .iter()
            .map(|s| parse_real(s).ok_or_else(|| format!("`{s}` is not a number")))
            .collect()
    };
    let expect = |got: usize, want: usize, what: &str| {
        if got == want {
            Ok(())
        } else {
            Err(format!("{kind} takes {want} values ({what}), got {got}"))
        }
    };
    let vec3 = |v: &[f64]| {
        let mut out = [0.0; 3];
        out[..v.len()].copy_from_slice(v);
        out
    };
    match kind {
        "disk" => {
            let v = nums(0)?;
            expect(v.len(), dim + 1, "center coordinates then radius")?;
            Ok(Region::Disk {
                center: vec3(&v[..dim]),
                radius: v[dim],
            })
        }
        "rect" => {
            let v = nums(0)?;
            expect(v.len(), 2 * dim, "lower corner then upper corner")?;
            Ok(Region::Rect {
                lo: vec3(&v[..dim]),
                hi: vec3(&v[dim..]),
            })
        }
        "slab" => {
            let axis = args
                .first()
                .and_then(|a| AXES.iter().position(|x| x == a))
                .ok_or("slab needs an axis x, y or z first")?;
            let v = nums(1)?;
            expect(v.len(), 2, "axis, lo, hi")?;
            Ok(Region::Slab {
                axis,
                lo: v[0],
                hi: v[1],
            })
        }
        "substrate" => {
            let v = nums(0)?;
            let profile = match v.len() {
                2 => HeightProfile::flat(v[1]),
                k if k >= 3 && k % 2 == 1 => HeightProfile::new(v[1..].chunks(2).map(|c| [c[0], c[1]]).collect())?,
                _ => return Err("substrate takes floor, height or floor, x1, h1, x2, h2, ...".into()),
            };
            Ok(Region::Substrate { floor: v[0], profile })
        }
        "wire" => {
            let v = nums(0)?;
            expect(v.len(), 5, "floor, surface, center x, half width, top")?;
            match ShapeSpec::wire_seed(v[0], v[1], v[2], v[3], v[4]) {
                ShapeSpec::Region(r) => Ok(r),
                ShapeSpec::Rest => unreachable!(),
            }
        }
        other => Err(format!(
            "unknown shape `{other}` (disk, rect, slab, substrate, wire, rest)"
        )),
    }
}

fn region_text(r: &Region, dim: usize) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(", ");
    match r {
        Region::Disk { center, radius } => format!("disk {}, {}", join(&center[..dim]), format_real(*radius)),
        Region::Rect { lo, hi } => format!("rect {}, {}", join(&lo[..dim]), join(&hi[..dim])),
        Region::Slab { axis, lo, hi } => format!("slab {}, {}", AXES[*axis], join(&[*lo, *hi])),
        Region::Substrate { floor, profile } => {
            let pts: Vec<f64> = profile.points().iter().flat_map(|p| [p[0], p[1]]).collect();
            format!("substrate {}, {}", format_real(*floor), join(&pts))
        }
        Region::Union(parts) => parts.iter().map(|p| region_text(p, dim)).collect::<Vec<_>>().join("; "),
    }
}

impl RunConfig {
    pub fn n_phases(&self) -> usize {
        self.names.len()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&self.sizes, &self.lengths).expect("validated grid")
    }

    pub fn tension_set(&self) -> Result<TensionSet, ValidationError> {
        let n = self.n_phases();
        match &self.tensions {
            Tensions::Pairwise(p) => {
                let m = symmetric_from_pairs(n, p)
                    .map_err(|_| verr(format!("model.tensions needs {} pairwise values", n * (n - 1) / 2)))?;
                TensionSet::new(m, TriangleCheck::Strict).map_err(|e| verr(format!("model.tensions: {e}")))
            }
            Tensions::PerPhase(p) => {
                TensionSet::from_per_phase(p.clone()).map_err(|e| verr(format!("model.phase_tensions: {e}")))
            }
        }
    }

    /// `None` for protocols that choose their own mobilities.
    pub fn mobility_set(&self) -> Result<Option<MobilitySet>, ValidationError> {
        let n = self.n_phases();
        let Some(m) = &self.mobilities else { return Ok(None) };
        let set = match (m, self.mobility_model) {
            (Mobilities::Pairwise(p), model) => {
                let pw = symmetric_from_pairs(n, p)
                    .map_err(|_| verr(format!("model.mobilities needs {} pairwise values", n * (n - 1) / 2)))?;
                match model {
                    MobilityModel::Auto => MobilitySet::from_pairwise(pw),
                    MobilityModel::General => MobilitySet::general(pw),
                }
                .map_err(|e| verr(format!("model.mobilities: {e}")))?
            }
            (Mobilities::PerPhase(_), MobilityModel::General) => {
                return Err(verr("model.mobility_model = general needs pairwise model.mobilities"))
            }
            (Mobilities::PerPhase(p), MobilityModel::Auto) => {
                if p.len() != n {
                    return Err(verr(format!(
                        "model.phase_mobilities needs {n} values, got {}",
                        p.len()
                    )));
                }
                MobilitySet::from_per_phase(p.clone()).map_err(|e| verr(format!("model.phase_mobilities: {e}")))?
            }
        };
        Ok(Some(set))
    }

    /// Checks every numeric field against the solver and scenario
    /// preconditions.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let n = self.n_phases();
        if self.sizes.len() != self.lengths.len() {
            return Err(verr("grid.lengths must have one entry per grid axis"));
        }
        Grid::new(&self.sizes, &self.lengths).map_err(|e| verr(format!("grid: {e}")))?;
        if self.shapes.len() != n {
            return Err(verr(format!("need {n} shapes, got {}", self.shapes.len())));
        }
        self.solver.validate().map_err(|e| verr(format!("solver: {e}")))?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(verr("solver.t_end must be positive"));
        }
        self.tension_set()?;
        let mobility = self.mobility_set()?;
        let grid = self.grid();
        for (name, s) in self.names.iter().zip(&self.shapes) {
            s.check(&grid).map_err(|m| verr(format!("shapes.{name}: {m}")))?;
        }
        if self.shapes.iter().filter(|s| matches!(s, ShapeSpec::Rest)).count() > 1 {
            return Err(verr("at most one phase may be `rest`"));
        }
        match &self.scenario {
            Scenario::Plain { volume } => {
                if volume.len() != n {
                    return Err(verr(format!("volume.modes needs {n} entries, got {}", volume.len())));
                }
                if volume.contains(&VolumeMode::Constant) && matches!(mobility, Some(MobilitySet::General { .. })) {
                    return Err(verr("volume constraints need harmonically additive mobilities"));
                }
            }
            Scenario::Wetting => {
                if n != 3 {
                    return Err(verr("wetting needs exactly 3 phases (solid, liquid, vapor)"));
                }
                match &self.mobilities {
                    Some(Mobilities::Pairwise(p)) if p.len() == 3 && p[0] == 0.0 && p[1] == 0.0 && p[2] > 0.0 => {}
                    _ => {
                        return Err(verr(
                            "wetting needs model.mobilities = 0, 0, m_LV (frozen solid, m_LV > 0)",
                        ))
                    }
                }
            }
            Scenario::Vls { t_growth, c_s, delta } => {
                if n != 3 {
                    return Err(verr("vls needs exactly 3 phases (solid, liquid, vapor)"));
                }
                if !(t_growth.is_finite() && *t_growth >= 0.0 && *t_growth <= self.t_end) {
                    return Err(verr("vls.t_growth must lie in [0, solver.t_end]"));
                }
                if !(c_s.is_finite() && *c_s >= 0.0) {
                    return Err(verr("vls.c_s must be non-negative"));
                }
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(verr("vls.delta must be positive"));
                }
            }
        }
        if self.check_energy && !self.solver.energy_stable() {
            return Err(verr("solver.check_energy needs solver.alpha > 2"));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(verr("output.dir must not be empty"));
        }
        if let Some(t) = self
            .output
            .frame_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_end))
        {
            return Err(verr(format!(
                "output.frame_times entry {t} lies outside [0, solver.t_end]"
            )));
        }
        if self.output.frame_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(verr("output.frame_times must increase"));
        }
        Ok(())
    }

    /// Canonical text form listing every resolved key.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let reals = |v: &[f64]| v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(", ");
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut kv = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").unwrap();
        };
        kv("grid.sizes", ints(&self.sizes));
        kv("grid.lengths", reals(&self.lengths));
        kv("phases.names", self.names.join(", "));
        kv("model.epsilon", format_real(self.epsilon));
        match &self.tensions {
            Tensions::Pairwise(p) => kv("model.tensions", reals(p)),
            Tensions::PerPhase(p) => kv("model.phase_tensions", reals(p)),
        }
        match &self.mobilities {
            Some(Mobilities::Pairwise(p)) => kv("model.mobilities", reals(p)),
            Some(Mobilities::PerPhase(p)) => kv("model.phase_mobilities", reals(p)),
            None => {}
        }
        kv(
            "model.mobility_model",
            match self.mobility_model {
                MobilityModel::Auto => "auto",
                MobilityModel::General => "general",
            }
            .into(),
        );
        kv("solver.dt", format_real(self.solver.dt));
        kv("solver.alpha", format_real(self.solver.alpha));
        kv("solver.sum_floor", format_real(self.solver.sum_floor));
        kv("solver.linear_tol", format_real(self.solver.linear_tol));
        kv("solver.t_end", format_real(self.t_end));
        kv("solver.check_energy", self.check_energy.to_string());
        kv("scenario.kind", self.scenario.name().into());
        match &self.scenario {
            Scenario::Plain { volume } => kv(
                "volume.modes",
                volume
                    .iter()
                    .map(|m| match m {
                        VolumeMode::Free => "free",
                        VolumeMode::Constant => "constant",
                    })
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
            Scenario::Wetting => {}
            Scenario::Vls { t_growth, c_s, delta } => {
                kv("vls.t_growth", format_real(*t_growth));
                kv("vls.c_s", format_real(*c_s));
                kv("vls.delta", format_real(*delta));
            }
        }
        let dim = self.sizes.len();
        for (name, shape) in self.names.iter().zip(&self.shapes) {
            let text = match shape {
                ShapeSpec::Rest => "rest".to_string(),
                ShapeSpec::Region(r) => region_text(r, dim),
            };
            kv(&format!("shapes.{name}"), text);
        }
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.sample_every", self.output.sample_every.to_string());
        kv("output.frame_times", reals(&self.output.frame_times));
        kv("output.contours", self.output.contours.to_string());
        kv("output.deterministic", self.output.deterministic.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "grid.sizes = 32, 32\nphases.names = a, b\nmodel.tensions = 1\nshapes.a = disk 0.5, 0.5, 0.25\nshapes.b = rest\nsolver.t_end = 0.01\n";

    #[test]
    fn empty_is_validation_error() {
        assert!(matches!(parse_config(""), Err(ConfigError::Validation(_))));
        assert!(matches!(
            parse_config("# only a comment\n\n"),
            Err(ConfigError::Validation(_))
        ));
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = MINIMAL.replace("solver.t_end = 0.01", "solver.t_end = 0.0x1");
        match parse_config(&text) {
            Err(ConfigError::Parse(e)) => assert_eq!(e.line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_phase_rejected() {
        let e = parse_config(&format!("{MINIMAL}solver.speed = 2\n")).unwrap_err();
        assert_eq!(e, ConfigError::Parse(perr(7, "unknown key `solver.speed`")));
        let e = parse_config(&format!("{MINIMAL}shapes.c = rest\n")).unwrap_err();
        assert!(matches!(e, ConfigError::Parse(ParseError { line: 7, .. })), "{e:?}");
    }

    #[test]
    fn defaults_resolve_and_round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.epsilon, 1.0 / 32.0);
        assert_eq!(c.solver.dt, 1.0 / 1024.0);
        assert_eq!(c.mobilities, Some(Mobilities::PerPhase(vec![2.0, 2.0])));
        assert_eq!(c.output.frame_times, vec![0.0, 0.01]);
        let text = c.to_text();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn fractions_and_unions() {
        let text = MINIMAL
            .replace(
                "shapes.a = disk 0.5, 0.5, 0.25",
                "shapes.a = rect 0, 0, 1/3, 1/2; disk 0.7, 0.7, 0.1",
            )
            .replace("solver.t_end = 0.01", "solver.t_end = 1/100");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.t_end, 0.01);
        match &c.shapes[0] {
            ShapeSpec::Region(Region::Union(p)) => {
                assert_eq!(p.len(), 2);
                assert_eq!(
                    p[0],
                    Region::Rect {
                        lo: [0.0; 3],
                        hi: [1.0 / 3.0, 0.5, 0.0]
                    }
                );
            }
            s => panic!("{s:?}"),
        }
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn semantic_errors_are_validation() {
        for (from, to) in [
            ("model.tensions = 1", "model.tensions = -1"),
            ("model.tensions = 1", "model.tensions = 1, 2"),
            ("solver.t_end = 0.01", "solver.t_end = 0"),
            ("shapes.a = disk 0.5, 0.5, 0.25", "shapes.a = rest"),
        ] {
            let e = parse_config(&MINIMAL.replace(from, to)).unwrap_err();
            assert!(matches!(e, ConfigError::Validation(_)), "{to}: {e:?}");
        }
    }
}
