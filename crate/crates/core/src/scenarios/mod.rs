//! Initial data, geometric diagnostics and the wetting / VLS protocols.

mod angles;
mod contour;
mod metrics;
mod oracles;
mod protocols;
mod shapes;

pub use angles::{
    find_junctions, herring_sectors, locate_junction, measure_angles, measure_angles_between, measure_contact_angle,
    sample_bilinear, ContactAngle, JunctionAngles,
};
pub use contour::{extract_contour, extract_contour_slices, fit_circle, Polyline};
pub use metrics::{grid_line, level_crossings, rise_width};
pub use oracles::{
    brick_wall_shapes, circle_oracle, circle_radius, fit_slope, flat_oracle, junction_oracle, junction_shapes,
    stripe_shapes, CircleOracle, CircleSetup, FlatOracle, JunctionGeometry, JunctionOracle, JunctionSetup,
};
pub use protocols::{
    vertical_crossing, vertical_width, vls_protocol, wetting_scenario, GrowthRecord, Simulation, VlsOutcome, VlsPhases,
    VlsSettings, WettingOutcome,
};
pub use shapes::{min_image, HeightProfile, Region, ShapeSpec};

use thiserror::Error;

use crate::model::{optimal_profile, ModelError};
use crate::solver::{project_partition, PhaseState, SolverError, SolverParams};
use crate::spectral::{Field, Grid, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("initial partition residual {0:e} exceeds 1e-8")]
    BadPartition(f64),
    #[error("invalid shape: {0}")]
    BadShape(String),
    #[error("no triple junction found")]
    NoJunction,
    #[error("no {0} interface found")]
    NoInterface(&'static str),
    #[error("diagnostic needs a 2D state")]
    NotTwoDimensional,
    #[error("invalid scenario: {0}")]
    BadSetup(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `u_k = q(d_k / ε)` from per-phase signed distances, then one partition
/// projection with unit weights.
///
/// Earlier phases take priority where regions overlap and at most one phase
/// may be [`ShapeSpec::Rest`].
pub fn init_from_shapes(grid: Grid, epsilon: f64, shapes: &[ShapeSpec]) -> Result<PhaseState, ScenarioError> {
    let n = shapes.len();
    if n < 2 {
        return Err(ScenarioError::BadShape(format!("need at least 2 phases, got {n}")));
    }
    if shapes.iter().filter(|s| matches!(s, ShapeSpec::Rest)).count() > 1 {
        return Err(ScenarioError::BadShape("at most one phase may be `rest`".into()));
    }
    for s in shapes {
        s.check(&grid).map_err(ScenarioError::BadShape)?;
    }
    let mut cellwise = vec![0.0; grid.len() * n];
    crate::par::for_each_chunk_mut(&mut cellwise, n, |i, out| {
        shapes::phase_distances(&grid, shapes, grid.position(i), out);
        for d in out.iter_mut() {
            *d = optimal_profile(*d / epsilon);
        }
    });
    let fields = (0..n)
        .map(|k| Field::from_fn_indexed(grid, |idx| cellwise[grid.ravel(idx) * n + k]))
        .collect();
    let raw = PhaseState::new(fields, epsilon, 0.0)?;
    let (state, report) = project_partition(&raw, &vec![1.0; n], &SolverParams::new(1.0))?;
    let residual = report.residual_all;
    if !(residual <= 1e-8) {
        return Err(ScenarioError::BadPartition(residual));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_saturates_and_measures() {
        let k = 128;
        let g = Grid::cube(2, k, 1.0).unwrap();
        let eps = 1.0 / k as f64;
        let s = init_from_shapes(g, eps, &[ShapeSpec::circle([0.5, 0.5], 0.3), ShapeSpec::Rest]).unwrap();
        let center = g.ravel([k / 2, k / 2, 0]);
        assert!(s.field(0).values()[center] >= 1.0 - 1e-6);
        assert!(s.field(0).values()[0] <= 1e-6);
        let c = extract_contour(s.field(0), 0.5);
        assert_eq!(c.len(), 1);
        assert!((c[0].mean_radius([0.5, 0.5]) - 0.3).abs() <= g.spacing(0));
        assert!((c[0].length() / (2.0 * PI * 0.3) - 1.0).abs() < 0.02);
        assert!(s.partition_residual() <= 1e-12);
    }

    #[test]
    fn rejects_two_rest_phases() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        assert!(matches!(
            init_from_shapes(g, 0.1, &[ShapeSpec::Rest, ShapeSpec::Rest]),
            Err(ScenarioError::BadShape(_))
        ));
    }
}
