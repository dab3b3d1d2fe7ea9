//! Step 2: pointwise projection onto `Σ_k u_k = 1`, optionally with volume
//! constraints `∫ u_k = V_k`.
//!
//! The correction has the form
//! `u_k ← u_k + λ m_k √(2W(u_k)) + μ_k m_k G_k(u)`. Writing the weights
//! `ω_k = m_k √(2W(u_k)) / Σ_j m_j √(2W(u_j))`, the partition residual
//! `Λ = 1 - Σ u - Σ_k μ_k m_k G_k` is distributed as `ω_k Λ`. Where the
//! denominator falls below `η` the weights are uniform over unfrozen phases.
//! The scalars `λ̄_k = ∫ ω_k Λ` solve `(I - A) λ̄ = b`.

use nalgebra::{DMatrix, DVector};

use super::{PhaseState, SolverError, SolverParams};
use crate::model::sqrt_two_well;
use crate::par;
use crate::spectral::Field;

/// Partition residual tolerated when every phase is frozen.
const FROZEN_RESIDUAL_TOL: f64 = 1e-12;

/// Shape function `G_k` used for the volume multiplier of phase `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    /// `G_k(u) = √(2W(u_k))`.
    SqrtWell,
    /// `G_k(u) = u_k u_j` for the given partner phase `j`.
    ProductWith(usize),
}

impl Potential {
    fn eval(self, k: usize, values: &[f64]) -> f64 {
        match self {
            Self::SqrtWell => sqrt_two_well(values[k]),
            Self::ProductWith(j) => values[k] * values[j],
        }
    }
}

/// Constrained phases with their target volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTargets<'a> {
    pub phases: &'a [usize],
    pub targets: &'a [f64],
    pub potentials: &'a [Potential],
}

/// What a projection did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectionReport {
    /// `λ̄_k = ∫ ω_k Λ` for every phase.
    pub lambda_bar: Vec<f64>,
    /// Volume multipliers `μ_k` (zero for unconstrained phases).
    pub mu: Vec<f64>,
    /// Samples where the `η` fallback was used.
    pub fallback_cells: usize,
    /// `max |Σ u - 1|` outside fallback cells after the projection.
    pub residual: f64,
    /// `max |Σ u - 1|` over all samples after the projection.
    pub residual_all: f64,
    /// Residual of the reduced linear system (zero without constraints).
    pub system_residual: f64,
}

impl ProjectionReport {
    pub fn lambda_norm(&self) -> f64 {
        self.lambda_bar.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Projection onto the partition constraint only.
pub fn project_partition(
    state: &PhaseState,
    mobility: &[f64],
    params: &SolverParams,
) -> Result<(PhaseState, ProjectionReport), SolverError> {
    project(state, mobility, None, params)
}

/// Projection onto the partition and volume constraints.
pub fn project_partition_volume(
    state: &PhaseState,
    mobility: &[f64],
    volume: &VolumeTargets<'_>,
    params: &SolverParams,
) -> Result<(PhaseState, ProjectionReport), SolverError> {
    project(state, mobility, Some(volume), params)
}

fn project(
    state: &PhaseState,
    mobility: &[f64],
    volume: Option<&VolumeTargets<'_>>,
    params: &SolverParams,
) -> Result<(PhaseState, ProjectionReport), SolverError> {
    let n = state.n_phases();
    if mobility.len() != n {
        return Err(SolverError::PhaseCount {
            expected: n,
            got: mobility.len(),
        });
    }
    let grid = *state.grid();
    let len = grid.len();
    let cell = grid.cell_volume();
    let box_volume = grid.volume();
    let eta = params.sum_floor;
    let unfrozen: Vec<usize> = (0..n).filter(|&k| mobility[k] > 0.0).collect();
    let fields = state.fields();
    let gather = |i: usize, u: &mut [f64]| {
        for (uk, f) in u.iter_mut().zip(fields) {
            *uk = f.values()[i];
        }
    };

    if unfrozen.is_empty() {
        let r = state.partition_residual();
        if r > FROZEN_RESIDUAL_TOL {
            return Err(SolverError::AllPhasesFrozen(r));
        }
    }
    let uniform = if unfrozen.is_empty() {
        0.0
    } else {
        1.0 / unfrozen.len() as f64
    };
    // Fills `w` with ω_k at sample `i`; returns (residual 1 - Σu, fallback?).
    let weights = |u: &[f64], w: &mut [f64]| -> bool {
        let mut denom = 0.0;
        for k in 0..n {
            w[k] = mobility[k] * sqrt_two_well(u[k]);
            denom += w[k];
        }
        if denom >= eta {
            for wk in w.iter_mut() {
                *wk /= denom;
            }
            false
        } else {
            for k in 0..n {
                w[k] = if mobility[k] > 0.0 { uniform } else { 0.0 };
            }
            true
        }
    };

    let constrained: Vec<usize> = volume.map(|v| v.phases.to_vec()).unwrap_or_default();
    let nc = constrained.len();
    let mut mu = vec![0.0; n];
    let mut system_residual = 0.0;
    let mut integral_g: Vec<f64> = Vec::new();

    if let Some(v) = volume {
        if v.targets.len() != nc || v.potentials.len() != nc {
            return Err(SolverError::PhaseCount {
                expected: nc,
                got: v.targets.len().min(v.potentials.len()),
            });
        }
        let all = nc == n;
        if all {
            let sum: f64 = v.targets.iter().sum();
            if (sum - box_volume).abs() > 1e-8 * box_volume {
                return Err(SolverError::InconsistentTargets {
                    sum,
                    volume: box_volume,
                });
            }
        }
        // One pass: ∫ m_k G_k, ∫ u_k, ∫ ω_i r, ∫ ω_i m_k G_k for i, k constrained.
        let width = nc + nc + nc + nc * nc;
        let sums = par::sum_vec_blocks(len, width, |range, acc| {
            let mut u = vec![0.0; n];
            let mut w = vec![0.0; n];
            let mut g = vec![0.0; nc];
            for i in range {
                gather(i, &mut u);
                weights(&u, &mut w);
                let r = 1.0 - u.iter().sum::<f64>();
                for (b, &j) in constrained.iter().enumerate() {
                    g[b] = mobility[j] * v.potentials[b].eval(j, &u);
                }
                for (a, &k) in constrained.iter().enumerate() {
                    acc[a] += g[a];
                    acc[nc + a] += u[k];
                    acc[2 * nc + a] += w[k] * r;
                    for b in 0..nc {
                        acc[3 * nc + a * nc + b] += w[k] * g[b];
                    }
                }
            }
        });
        integral_g = sums[..nc].iter().map(|s| s * cell).collect();
        let integral_u: Vec<f64> = sums[nc..2 * nc].iter().map(|s| s * cell).collect();
        let scale = integral_g.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for (a, &k) in constrained.iter().enumerate() {
            if !(integral_g[a].abs() > 1e-14 * box_volume) || !integral_g[a].is_finite() {
                return Err(SolverError::SingularConstraintSystem(format!(
                    "∫ m_{k} G_{k} = {:e} (scale {scale:e})",
                    integral_g[a]
                )));
            }
        }
        let dv: Vec<f64> = (0..nc).map(|a| v.targets[a] - integral_u[a]).collect();
        let mut a_mat = DMatrix::zeros(nc, nc);
        let mut b_vec = DVector::zeros(nc);
        for a in 0..nc {
            let mut b = sums[2 * nc + a] * cell;
            for c in 0..nc {
                let p = sums[3 * nc + a * nc + c] * cell;
                a_mat[(a, c)] = p / integral_g[c];
                b -= dv[c] * p / integral_g[c];
            }
            b_vec[a] = b;
        }
        let system = DMatrix::identity(nc, nc) - &a_mat;
        let lambda_bar = solve_constraint_system(&system, &b_vec, all)?;
        system_residual = (&system * &lambda_bar - &b_vec).amax();
        if !(system_residual <= params.linear_tol * box_volume) {
            return Err(SolverError::SingularConstraintSystem(format!(
                "residual {system_residual:e} exceeds {:e}",
                params.linear_tol * box_volume
            )));
        }
        for (a, &k) in constrained.iter().enumerate() {
            mu[k] = (dv[a] - lambda_bar[a]) / integral_g[a];
        }
    }

    // Pointwise update, written cell-major with one trailing fallback flag
    // per sample, then scattered per phase.
    let potentials: Vec<Option<Potential>> = (0..n)
        .map(|k| volume.and_then(|v| v.phases.iter().position(|&p| p == k).map(|a| v.potentials[a])))
        .collect();
    let stride = n + 1;
    let mut scratch = vec![0.0; len * stride];
    const CELLS: usize = 1024;
    par::for_each_chunk_mut(&mut scratch, stride * CELLS, |c, out| {
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut g = vec![0.0; n];
        for (o, cell_out) in out.chunks_mut(stride).enumerate() {
            gather(c * CELLS + o, &mut u);
            let fell_back = weights(&u, &mut w);
            let mut lambda = 1.0 - u.iter().sum::<f64>();
            for k in 0..n {
                if let Some(p) = potentials[k] {
                    g[k] = mobility[k] * p.eval(k, &u);
                    lambda -= mu[k] * g[k];
                }
            }
            for k in 0..n {
                cell_out[k] = u[k] + w[k] * lambda + mu[k] * g[k];
            }
            cell_out[n] = if fell_back { 1.0 } else { 0.0 };
        }
    });
    // Frozen phases must come back untouched.
    let new_fields: Vec<Field> = (0..n)
        .map(|k| {
            if mobility[k] == 0.0 {
                return state.field(k).clone();
            }
            let mut col = vec![0.0; len];
            par::for_each_mut(&mut col, |i, v| *v = scratch[i * stride + k]);
            Field::from_raw(grid, col)
        })
        .collect();

    let fallback_cells = par::sum(len, |i| scratch[i * stride + n]) as usize;
    let cell_sum = |i: usize| new_fields.iter().map(|f| f.values()[i]).sum::<f64>();
    let residual = par::max(len, |i| {
        if scratch[i * stride + n] != 0.0 {
            0.0
        } else {
            (cell_sum(i) - 1.0).abs()
        }
    })
    .max(0.0);
    let residual_all = par::max(len, |i| (cell_sum(i) - 1.0).abs()).max(0.0);

    // λ̄_k = ∫ ω_k Λ = ∫ (u_k^new - u_k) - μ_k ∫ m_k G_k.
    let lambda_bar: Vec<f64> = (0..n)
        .map(|k| {
            let corr = new_fields[k].integral() - state.field(k).integral();
            match constrained.iter().position(|&p| p == k) {
                Some(a) => corr - mu[k] * integral_g[a],
                None => corr,
            }
        })
        .collect();

    let mut next = state.clone();
    next.replace_fields(new_fields);
    Ok((
        next,
        ProjectionReport {
            lambda_bar,
            mu,
            fallback_cells,
            residual,
            residual_all,
            system_residual,
        },
    ))
}

/// Minimum-norm least-squares solve; when every phase is constrained the
/// row `Σ λ̄ = 0` is appended to fix the kernel of `I - A`.
fn solve_constraint_system(
    system: &DMatrix<f64>,
    rhs: &DVector<f64>,
    append_zero_sum: bool,
) -> Result<DVector<f64>, SolverError> {
    let nc = system.nrows();
    let (mat, vec) = if append_zero_sum {
        let mut m = DMatrix::zeros(nc + 1, nc);
        m.view_mut((0, 0), (nc, nc)).copy_from(system);
        m.row_mut(nc).fill(1.0);
        let mut v = DVector::zeros(nc + 1);
        v.rows_mut(0, nc).copy_from(rhs);
        (m, v)
    } else {
        (system.clone(), rhs.clone())
    };
    let svd = mat.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0);
    svd.solve(&vec, tol)
        .map_err(|e| SolverError::SingularConstraintSystem(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn pointwise(values: [f64; 3]) -> PhaseState {
        let g = Grid::new(&[4], &[1.0]).unwrap();
        let fields = values.iter().map(|&v| Field::constant(g, v)).collect();
        PhaseState::new(fields, 0.1, 0.0).unwrap()
    }

    #[test]
    fn partitioned_input_is_unchanged() {
        let s = pointwise([0.5, 0.3, 0.2]);
        let (out, rep) = project_partition(&s, &[1.0, 1.0, 1.0], &SolverParams::new(1e-3)).unwrap();
        assert_eq!(out, s);
        assert!(rep.lambda_bar.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn hand_evaluated_projection() {
        let s = pointwise([0.5, 0.3, 0.1]);
        let (out, rep) = project_partition(&s, &[1.0, 1.0, 1.0], &SolverParams::new(1e-3)).unwrap();
        let lambda = 0.1 / 0.55;
        let expected = [0.5 + 0.25 * lambda, 0.3 + 0.21 * lambda, 0.1 + 0.09 * lambda];
        for k in 0..3 {
            assert!((out.field(k).values()[0] - expected[k]).abs() < 1e-15);
        }
        assert!((expected[0] - 0.545455).abs() < 1e-6);
        assert!((expected[1] - 0.338182).abs() < 1e-6);
        assert!((expected[2] - 0.116364).abs() < 1e-6);
        assert!(rep.residual < 1e-15);
    }

    #[test]
    fn frozen_phase_drops_out() {
        let s = pointwise([0.5, 0.3, 0.1]);
        let (out, _) = project_partition(&s, &[1.0, 0.0, 1.0], &SolverParams::new(1e-3)).unwrap();
        let lambda = 0.1 / (0.25 + 0.09);
        assert_eq!(out.field(1), s.field(1));
        assert!((out.field(0).values()[0] - (0.5 + 0.25 * lambda)).abs() < 1e-15);
        assert!((out.field(2).values()[0] - (0.1 + 0.09 * lambda)).abs() < 1e-15);
        assert!(out.partition_residual() < 1e-15);
    }

    #[test]
    fn bulk_fallback_is_uniform() {
        let s = pointwise([1.0, 0.0, 0.1]);
        let (out, rep) = project_partition(&s, &[1.0, 1.0, 0.0], &SolverParams::new(1e-3)).unwrap();
        // Denominator m·√(2W) = 0 for the two unfrozen phases.
        assert_eq!(rep.fallback_cells, 4);
        assert!((out.field(0).values()[0] - 0.95).abs() < 1e-15);
        assert!((out.field(1).values()[0] + 0.05).abs() < 1e-15);
        assert_eq!(out.field(2), s.field(2));
        assert!(rep.residual_all < 1e-15);
    }

    #[test]
    fn all_frozen_with_residual_fails() {
        let s = pointwise([0.5, 0.3, 0.1]);
        assert!(matches!(
            project_partition(&s, &[0.0; 3], &SolverParams::new(1e-3)),
            Err(SolverError::AllPhasesFrozen(_))
        ));
        let ok = pointwise([0.5, 0.3, 0.2]);
        assert!(project_partition(&ok, &[0.0; 3], &SolverParams::new(1e-3)).is_ok());
    }

    #[test]
    fn inconsistent_targets_rejected() {
        let s = pointwise([0.5, 0.3, 0.2]);
        let vt = VolumeTargets {
            phases: &[0, 1, 2],
            targets: &[0.5, 0.3, 0.3],
            potentials: &[Potential::SqrtWell; 3],
        };
        assert!(matches!(
            project_partition_volume(&s, &[1.0; 3], &vt, &SolverParams::new(1e-3)),
            Err(SolverError::InconsistentTargets { .. })
        ));
    }

    #[test]
    fn vanishing_potential_is_singular() {
        let s = pointwise([0.5, 0.3, 0.2]);
        let vt = VolumeTargets {
            phases: &[0, 1, 2],
            targets: &[0.5, 0.3, 0.2],
            potentials: &[Potential::SqrtWell, Potential::SqrtWell, Potential::SqrtWell],
        };
        // Frozen constrained phase: ∫ m G = 0.
        assert!(matches!(
            project_partition_volume(&s, &[1.0, 0.0, 1.0], &vt, &SolverParams::new(1e-3)),
            Err(SolverError::SingularConstraintSystem(_))
        ));
    }
}
