//! Reference experiments with known answers: shrinking circle, flat
//! interface energy and the relaxed triple junction.

use std::f64::consts::PI;

use super::angles::{find_junctions, herring_sectors, measure_angles_between, JunctionAngles};
use super::contour::extract_contour;
use super::protocols::Simulation;
use super::shapes::{Region, ShapeSpec};
use super::{init_from_shapes, ScenarioError};
use crate::model::{profile_constant, MobilitySet, TensionSet};
use crate::solver::{energy, Observer, PhaseState, RunSettings, SolverParams};
use crate::spectral::{Grid, Spectral};

/// Radius of the largest closed half-level contour of `phase`, from its
/// enclosed area.
pub fn circle_radius(state: &PhaseState, phase: usize) -> Option<f64> {
    extract_contour(state.field(phase), 0.5)
        .iter()
        .filter(|p| p.closed && p.winding == [0, 0])
        .map(|p| p.area().abs())
        .max_by(f64::total_cmp)
        .map(|a| (a / PI).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Two-phase shrinking circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSetup {
    pub samples: usize,
    pub epsilon: f64,
    pub dt: f64,
    /// Stabilization `α` of the diffusion step.
    pub alpha: f64,
    pub sigma: f64,
    pub mobility: f64,
    pub r0: f64,
    pub t_end: f64,
    /// Number of radius measurements after `t = 0`.
    pub measurements: usize,
}

impl CircleSetup {
    /// `K` samples per axis, `ε = 1/K`, `δt = ε²`, `σ = m = 1`, `R0 = 0.3`,
    /// `t ∈ [0, 0.03]`.
    pub fn new(k: usize) -> Self {
        let eps = 1.0 / k as f64;
        Self {
            samples: k,
            epsilon: eps,
            dt: eps * eps,
            alpha: SolverParams::DEFAULT_ALPHA,
            sigma: 1.0,
            mobility: 1.0,
            r0: 0.3,
            t_end: 0.03,
            measurements: 10,
        }
    }

    /// Sharp-interface law `R² = R0² + slope·t`.
    pub fn expected_slope(&self) -> f64 {
        -2.0 * self.mobility * self.sigma
    }

    pub fn expected_radius(&self, t: f64) -> f64 {
        (self.r0 * self.r0 + self.expected_slope() * t).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleOracle {
    pub setup: CircleSetup,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    /// Fitted slope of `R²` against `t`.
    pub slope: f64,
    pub expected_slope: f64,
}

impl CircleOracle {
    pub fn slope_error(&self) -> f64 {
        (self.slope / self.expected_slope - 1.0).abs()
    }

    /// `|R(t_end) - R_sharp(t_end)|`.
    pub fn final_error(&self) -> f64 {
        let (t, r) = (*self.times.last().unwrap(), *self.radii.last().unwrap());
        (r - self.setup.expected_radius(t)).abs()
    }
}

struct RadiusProbe;

impl Observer for RadiusProbe {
    fn metric_names(&self) -> Vec<String> {
        vec!["radius".into()]
    }

    fn metrics(&mut self, state: &PhaseState) -> Vec<f64> {
        vec![circle_radius(state, 0).unwrap_or(f64::NAN)]
    }
}

pub fn circle_oracle(setup: &CircleSetup) -> Result<CircleOracle, ScenarioError> {
    let grid = Grid::cube(2, setup.samples, 1.0)?;
    let initial = init_from_shapes(
        grid,
        setup.epsilon,
        &[ShapeSpec::circle([0.5, 0.5], setup.r0), ShapeSpec::Rest],
    )?;
    let sim = Simulation::new(
        Spectral::new(grid),
        TensionSet::two_phase(setup.sigma)?,
        MobilitySet::two_phase(setup.mobility)?,
        SolverParams {
            alpha: setup.alpha,
            ..SolverParams::new(setup.dt)
        },
    )?;
    let mut settings = RunSettings::new(setup.t_end);
    let steps = crate::solver::step_count(setup.t_end, setup.dt);
    settings.sample_every = (steps / setup.measurements.max(1)).max(1);
    let out = sim.run(&initial, None, &settings, &mut RadiusProbe)?;
    let (times, radii): (Vec<f64>, Vec<f64>) = out
        .diagnostics
        .rows
        .iter()
        .map(|r| (r.t, r.metrics[0]))
        .filter(|(_, r)| r.is_finite())
        .unzip();
    if times.len() < 2 {
        return Err(ScenarioError::NoInterface("circle"));
    }
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    Ok(CircleOracle {
        setup: *setup,
        slope: fit_slope(&times, &r2),
        expected_slope: setup.expected_slope(),
        times,
        radii,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatOracle {
    pub energy: f64,
    /// `layers · ½σ12 · c_W`.
    pub expected: f64,
    pub layers: usize,
}

impl FlatOracle {
    pub fn relative_error(&self) -> f64 {
        (self.energy / self.expected - 1.0).abs()
    }
}

/// Energy of a 1D two-phase slab `[¼, ¾)` on the unit periodic line (two
/// transition layers).
pub fn flat_oracle(samples: usize, epsilon: f64, sigma12: f64) -> Result<FlatOracle, ScenarioError> {
    let grid = Grid::new(&[samples], &[1.0])?;
    let slab = ShapeSpec::Region(Region::Slab {
        axis: 0,
        lo: 0.25,
        hi: 0.75,
    });
    let state = init_from_shapes(grid, epsilon, &[slab, ShapeSpec::Rest])?;
    let sigma = TensionSet::two_phase(sigma12)?;
    let e = energy(&Spectral::new(grid), &state, sigma.per_phase());
    let layers = 2;
    Ok(FlatOracle {
        energy: e,
        expected: layers as f64 * 0.5 * sigma12 * profile_constant(),
        layers,
    })
}

/// Band of phase 1 (`0.4 ≤ y < 0.6`), phase 2 on `x < ½` outside the band,
/// phase 3 elsewhere: four T-junctions at `x ∈ {0, ½}`, `y ∈ {0.4, 0.6}`.
pub fn junction_shapes() -> Vec<ShapeSpec> {
    vec![
        ShapeSpec::Region(Region::Slab {
            axis: 1,
            lo: 0.4,
            hi: 0.6,
        }),
        ShapeSpec::Region(Region::Slab {
            axis: 0,
            lo: 0.0,
            hi: 0.5,
        }),
        ShapeSpec::Rest,
    ]
}

/// Three-coloured brick wall: two rows of three bricks, the upper row offset
/// by half a brick. Every brick has six neighbours, so the wall relaxes
/// towards a hexagonal tiling with straight edges and twelve triple
/// junctions.
pub fn brick_wall_shapes() -> Vec<ShapeSpec> {
    let brick = |x0: f64, y0: f64| Region::Rect {
        lo: [x0, y0, 0.0],
        hi: [x0 + 1.0 / 3.0, y0 + 0.5, 0.0],
    };
    vec![
        ShapeSpec::Region(Region::Union(vec![brick(0.0, 0.0), brick(0.5, 0.5)])),
        ShapeSpec::Region(Region::Union(vec![brick(1.0 / 3.0, 0.0), brick(5.0 / 6.0, 0.5)])),
        ShapeSpec::Rest,
    ]
}

/// Phases 1 and 2 as two half-width blocks `0.6 ≤ y < 1.4` (periodic), phase
/// 3 the band `0.4 ≤ y < 0.6` between them. Suited to tensions where phase 3
/// opens to nearly 180°.
pub fn stripe_shapes() -> Vec<ShapeSpec> {
    let block = |x0: f64| Region::Rect {
        lo: [x0, 0.6, 0.0],
        hi: [x0 + 0.5, 1.4, 0.0],
    };
    vec![
        ShapeSpec::Region(block(0.0)),
        ShapeSpec::Region(block(0.5)),
        ShapeSpec::Rest,
    ]
}

/// Initial layout of the junction experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JunctionGeometry {
    BrickWall,
    Stripes,
}

impl JunctionGeometry {
    pub fn shapes(self) -> Vec<ShapeSpec> {
        match self {
            Self::BrickWall => brick_wall_shapes(),
            Self::Stripes => stripe_shapes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionSetup {
    pub samples: usize,
    pub epsilon: f64,
    pub dt: f64,
    /// `(σ12, σ13, σ23)`.
    pub sigma: [f64; 3],
    /// `(m12, m13, m23)`.
    pub mobility: [f64; 3],
    pub t_end: f64,
    pub geometry: JunctionGeometry,
    /// Inner and outer tangent radius in units of ε.
    pub radii: (f64, f64),
}

impl JunctionSetup {
    /// Tangent sampling annulus, in units of ε.
    pub const DEFAULT_RADII: (f64, f64) = (4.0, 6.0);

    pub fn new(k: usize) -> Self {
        let eps = 1.0 / k as f64;
        Self {
            samples: k,
            epsilon: eps,
            dt: eps * eps,
            sigma: [1.0; 3],
            mobility: [1.0; 3],
            t_end: 0.05,
            geometry: JunctionGeometry::BrickWall,
            radii: Self::DEFAULT_RADII,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionOracle {
    pub junctions: Vec<JunctionAngles>,
    /// Herring sectors of phases 1, 2, 3.
    pub expected: [f64; 3],
}

impl JunctionOracle {
    /// Largest `|sector - expected|` over all junctions and phases.
    pub fn max_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in &self.junctions {
            for (k, e) in self.expected.iter().enumerate() {
                let a = j.sector_of(k).unwrap_or(f64::INFINITY);
                worst = worst.max((a - e).abs());
            }
        }
        worst
    }
}

pub fn junction_oracle(setup: &JunctionSetup) -> Result<JunctionOracle, ScenarioError> {
    let [s12, s13, s23] = setup.sigma;
    let expected = herring_sectors(s12, s13, s23)
        .ok_or_else(|| ScenarioError::BadSetup("tensions admit no Herring balance".into()))?;
    let grid = Grid::cube(2, setup.samples, 1.0)?;
    let initial = init_from_shapes(grid, setup.epsilon, &setup.geometry.shapes())?;
    let sim = Simulation::new(
        Spectral::new(grid),
        TensionSet::from_pairs3(setup.sigma)?,
        MobilitySet::from_pairs3(setup.mobility)?,
        SolverParams::new(setup.dt),
    )?;
    let out = sim.run(&initial, None, &RunSettings::new(setup.t_end), &mut ())?;
    let centers = find_junctions(&out.state, [0, 1, 2], 0.05)?;
    if centers.is_empty() {
        return Err(ScenarioError::NoJunction);
    }
    let junctions = centers
        .into_iter()
        .map(|c| {
            let (a, b) = setup.radii;
            measure_angles_between(&out.state, [0, 1, 2], c, a * setup.epsilon, b * setup.epsilon)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(JunctionOracle { junctions, expected })
}
