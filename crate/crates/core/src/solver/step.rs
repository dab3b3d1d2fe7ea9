use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PhaseState, SolverError, SolverParams};
use crate::model::{partition_subspace_basis, well_derivative, well_value};
use crate::par;
use crate::spectral::{Field, Spectral};

/// Multiphase Cahn-Hilliard energy `½ Σ σ_i ∫ (ε|∇u_i|²/2 + W(u_i)/ε)`.
///
/// The gradient term is evaluated spectrally via `∫|∇u|² = -∫ u Δu`.
pub fn energy(spectral: &Spectral, state: &PhaseState, sigma: &[f64]) -> f64 {
    assert_eq!(sigma.len(), state.n_phases());
    let eps = state.epsilon();
    let cell = state.grid().cell_volume();
    let per_phase = par::map(state.fields(), |f| {
        let v = f.values();
        let bulk = par::sum(v.len(), |i| well_value(v[i])) * cell;
        let grad = spectral.dirichlet_energy(f);
        0.5 * eps * grad + bulk / eps
    });
    0.5 * sigma.iter().zip(&per_phase).map(|(s, e)| s * e).sum::<f64>()
}

fn explicit_rhs(u: &Field, c: f64, alpha: f64, eps: f64) -> Field {
    let k = c / (eps * eps);
    let mut out = u.clone();
    par::for_each_mut(out.values_mut(), |_, v| {
        let s = *v;
        *v = s - k * (well_derivative(s) - alpha * s);
    });
    out
}

/// One stabilized semi-implicit step per phase:
/// `(Id - δt m_k σ_k (Δ - α/ε²)) u_k^{n+½} = u_k^n - (δt m_k σ_k/ε²)(W'(u_k^n) - α u_k^n)`.
///
/// Phases with `m_k σ_k = 0` are returned bit-for-bit unchanged.
pub fn step_diffusion(
    spectral: &Spectral,
    state: &PhaseState,
    sigma: &[f64],
    mobility: &[f64],
    params: &SolverParams,
) -> PhaseState {
    let n = state.n_phases();
    assert_eq!(sigma.len(), n);
    assert_eq!(mobility.len(), n);
    let eps = state.epsilon();
    let coeff: Vec<f64> = (0..n).map(|k| params.dt * mobility[k] * sigma[k]).collect();
    let active: Vec<usize> = (0..n).filter(|&k| coeff[k] != 0.0).collect();

    let mut out: Vec<Option<Field>> = vec![None; n];
    // Pair active phases so each pair shares one complex transform.
    let tasks: Vec<&[usize]> = active.chunks(2).collect();
    let solved = par::map(&tasks, |pair| match **pair {
        [a, b] => {
            let ra = explicit_rhs(state.field(a), coeff[a], params.alpha, eps);
            let rb = explicit_rhs(state.field(b), coeff[b], params.alpha, eps);
            let (va, vb) = spectral.solve_semi_implicit_pair((&ra, coeff[a]), (&rb, coeff[b]), params.alpha, eps);
            vec![(a, va), (b, vb)]
        }
        [a] => {
            let ra = explicit_rhs(state.field(a), coeff[a], params.alpha, eps);
            vec![(a, spectral.solve_semi_implicit(&ra, coeff[a], params.alpha, eps))]
        }
        _ => unreachable!(),
    });
    for (k, f) in solved.into_iter().flatten() {
        out[k] = Some(f);
    }
    let fields = out
        .into_iter()
        .enumerate()
        .map(|(k, f)| f.unwrap_or_else(|| state.field(k).clone()))
        .collect();
    let mut next = state.clone();
    next.replace_fields(fields);
    next
}

/// Mobility operator `B = P (Pᵀ A P)⁻¹ Pᵀ` for the general metric `A`, where
/// the columns of `P` span `(1,…,1)^⊥`.
pub(crate) fn general_mobility_operator(metric: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
    let p = partition_subspace_basis(metric.nrows());
    let restricted = p.transpose() * metric * &p;
    let inv = restricted.clone().try_inverse().ok_or(SolverError::DegenerateMetric)?;
    let eig = nalgebra::SymmetricEigen::new(restricted).eigenvalues;
    if eig.iter().any(|&e| e <= 1e-12 * metric.amax().max(1.0)) {
        return Err(SolverError::DegenerateMetric);
    }
    Ok(&p * inv * p.transpose())
}

/// Diffusion step for a general (non-additive) mobility metric.
///
/// The velocity is `B f` with `f_k = σ_k(Δu_k - W'(u_k)/ε²)`; `B` maps onto
/// `(1,…,1)^⊥`, so `Σ_k u_k` is preserved. The linear part is implicit with
/// the same stabilization as [`step_diffusion`], one `N × N` solve per
/// distinct wavenumber.
pub fn step_general(
    spectral: &Spectral,
    state: &PhaseState,
    sigma: &[f64],
    metric: &DMatrix<f64>,
    params: &SolverParams,
) -> Result<PhaseState, SolverError> {
    let n = state.n_phases();
    let b = general_mobility_operator(metric)?;
    let eps = state.epsilon();
    let shift = params.alpha / (eps * eps);
    let dt = params.dt;
    // B S with S = diag(σ).
    let bs = DMatrix::from_fn(n, n, |i, j| b[(i, j)] * sigma[j]);

    let u_hat: Vec<_> = par::map(state.fields(), |f| spectral.forward(f));
    let nl_hat: Vec<_> = par::map(state.fields(), |f| {
        let mut g = f.clone();
        par::for_each_mut(g.values_mut(), |_, v| {
            let s = *v;
            *v = (params.alpha * s - well_derivative(s)) / (eps * eps);
        });
        spectral.forward(&g)
    });

    let sym = spectral.symbol();
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let mut out_hat: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); sym.len()]; n];
    for idx in 0..sym.len() {
        let kappa = shift - sym[idx];
        let inv = cache.entry(kappa.to_bits()).or_insert_with(|| {
            let m = DMatrix::identity(n, n) + &bs * (dt * kappa);
            m.try_inverse()
                .expect("I + dt κ B S is invertible for B S with non-negative spectrum")
        });
        for i in 0..n {
            let mut rhs_i = u_hat[i].coeffs()[idx];
            for j in 0..n {
                rhs_i += nl_hat[j].coeffs()[idx] * (dt * bs[(i, j)]);
            }
            out_hat[i][idx] = rhs_i;
        }
        let rhs: Vec<Complex64> = (0..n).map(|i| out_hat[i][idx]).collect();
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += rhs[j] * inv[(i, j)];
            }
            out_hat[i][idx] = acc;
        }
    }
    let grid = *state.grid();
    let fields = out_hat
        .into_iter()
        .map(|c| {
            let s = crate::spectral::SpectralField::new(grid, c).expect("grid-sized buffer");
            spectral.inverse(&s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut next = state.clone();
    next.replace_fields(fields);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{optimal_profile, profile_constant, MobilitySet};
    use crate::spectral::Grid;

    fn slab(k: usize, eps: f64) -> PhaseState {
        let g = Grid::new(&[k], &[1.0]).unwrap();
        let u1 = Field::from_fn(g, |x| optimal_profile(((x[0] - 0.5).abs() - 0.25) / eps));
        let mut u2 = u1.clone();
        u2.values_mut().iter_mut().for_each(|v| *v = 1.0 - *v);
        PhaseState::new(vec![u1, u2], eps, 0.0).unwrap()
    }

    #[test]
    fn bulk_state_has_zero_energy() {
        let g = Grid::new(&[16, 16], &[1.0, 1.0]).unwrap();
        let s = PhaseState::new(
            vec![Field::constant(g, 1.0), Field::zeros(g), Field::zeros(g)],
            0.05,
            0.0,
        )
        .unwrap();
        assert_eq!(energy(&Spectral::new(g), &s, &[0.5, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn flat_interface_energy() {
        // Two layers on the periodic line, σ12 = 1: 2 · ½ σ12 c_W.
        let eps = 1.0 / 64.0;
        let s = slab(1024, eps);
        let sp = Spectral::new(*s.grid());
        let e = energy(&sp, &s, &[0.5, 0.5]);
        let expected = 2.0 * 0.5 * profile_constant();
        assert!((e - expected).abs() < 0.01 * expected, "{e} vs {expected}");
        let e2 = energy(&sp, &s, &[1.0, 1.0]);
        assert_eq!(e2, 2.0 * e);
    }

    #[test]
    fn frozen_dynamics_is_identity() {
        let s = slab(64, 0.05);
        let sp = Spectral::new(*s.grid());
        let p = SolverParams::new(1e-3);
        let next = step_diffusion(&sp, &s, &[0.5, 0.5], &[0.0, 0.0], &p);
        assert_eq!(next, s);
    }

    #[test]
    fn constant_bulk_is_fixed_point() {
        let g = Grid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let s = PhaseState::new(
            vec![Field::constant(g, 1.0), Field::zeros(g), Field::zeros(g)],
            0.1,
            0.0,
        )
        .unwrap();
        let sp = Spectral::new(g);
        let next = step_diffusion(&sp, &s, &[0.5, 0.5, 0.5], &[1.0, 1.0, 1.0], &SolverParams::new(0.01));
        for (a, b) in next.fields().iter().zip(s.fields()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_state_matches_scalar_recurrence() {
        // Spatially constant u: v = (u - c/ε²(W'(u) - αu)) / (1 + cα/ε²).
        let g = Grid::new(&[8], &[1.0]).unwrap();
        let u0 = 0.3;
        let s = PhaseState::new(vec![Field::constant(g, u0), Field::constant(g, 1.0 - u0)], 0.1, 0.0).unwrap();
        let p = SolverParams::new(1e-3);
        let next = step_diffusion(&Spectral::new(g), &s, &[0.5, 0.5], &[2.0, 2.0], &p);
        let c = p.dt;
        let k = c / 0.01;
        let expected = (u0 - k * (well_derivative(u0) - p.alpha * u0)) / (1.0 + k * p.alpha);
        assert!(next.field(0).values().iter().all(|&v| (v - expected).abs() < 1e-14));
    }

    #[test]
    fn planar_front_is_stationary() {
        let eps = 1.0 / 64.0;
        let s0 = slab(1024, eps);
        let sp = Spectral::new(*s0.grid());
        let p = SolverParams::new(1.0 / 4096.0);
        let mut s = s0.clone();
        for _ in 0..100 {
            s = step_diffusion(&sp, &s, &[1.0, 1.0], &[1.0, 1.0], &p);
        }
        let drift = s
            .field(0)
            .values()
            .iter()
            .zip(s0.field(0).values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-3, "drift {drift}");
    }

    #[test]
    fn general_two_phase_matches_derived_law() {
        // Two phases with A = [[0,-1],[-1,0]] move at half the additive speed
        // for m12 = 1 (paired σ_k = ½).
        let eps = 1.0 / 32.0;
        let g = Grid::new(&[128, 128], &[1.0, 1.0]).unwrap();
        let u1 = Field::from_fn(g, |x| {
            optimal_profile((((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt() - 0.25) / eps)
        });
        let mut u2 = u1.clone();
        u2.values_mut().iter_mut().for_each(|v| *v = 1.0 - *v);
        let s = PhaseState::new(vec![u1, u2], eps, 0.0).unwrap();
        let sp = Spectral::new(g);
        let p = SolverParams::new(1e-7);
        let MobilitySet::General { metric, .. } =
            MobilitySet::general(crate::model::symmetric_from_pairs(2, &[1.0]).unwrap()).unwrap()
        else {
            unreachable!()
        };
        let gen = step_general(&sp, &s, &[0.5, 0.5], &metric, &p).unwrap();
        let add = step_diffusion(&sp, &s, &[0.5, 0.5], &[2.0, 2.0], &p);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..g.len() {
            let dg = gen.field(0).values()[i] - s.field(0).values()[i];
            let da = add.field(0).values()[i] - s.field(0).values()[i];
            num += dg * da;
            den += da * da;
        }
        assert!((num / den - 0.5).abs() < 1e-3, "ratio {}", num / den);
        // Partition preserved by construction.
        assert!(gen.partition_residual() < 1e-12);
    }
}
