//! Property tests over the public API.

use mobflow::io::{parse_config, RunConfig};
use mobflow::nanowire::{
    droplet_radius, droplet_radius_derivative, integrate_profile, invert_radius, CapModel, WireParams,
};
use mobflow::scenarios::{init_from_shapes, ShapeSpec};
use mobflow::solver::{project_partition, PhaseState, SolverParams};
use mobflow::spectral::{Field, Grid, Spectral};
use proptest::prelude::*;

const PRESET: &str = include_str!("../../../presets/isotropic_junction.cfg");

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

fn grid8() -> Grid {
    Grid::new(&[8, 8], &[1.0, 1.0]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn transform_round_trip(v in field_strategy(64)) {
        let sp = Spectral::new(grid8());
        let f = Field::new(grid8(), v.clone()).unwrap();
        let back = sp.inverse(&sp.forward(&f)).unwrap();
        for (a, b) in back.values().iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn parseval(v in field_strategy(64)) {
        let sp = Spectral::new(grid8());
        let f = Field::new(grid8(), v.clone()).unwrap();
        let s = sp.forward(&f);
        let spectral: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let physical = v.iter().map(|x| x * x).sum::<f64>() / 64.0;
        prop_assert!((spectral - physical).abs() <= 1e-12 * physical.max(1e-300) + 1e-15);
    }

    #[test]
    fn transform_is_linear(a in field_strategy(64), b in field_strategy(64), k in -3.0..3.0f64) {
        let sp = Spectral::new(grid8());
        let fa = Field::new(grid8(), a.clone()).unwrap();
        let fb = Field::new(grid8(), b.clone()).unwrap();
        let mix = Field::new(grid8(), a.iter().zip(&b).map(|(x, y)| x + k * y).collect()).unwrap();
        let (sa, sb, sm) = (sp.forward(&fa), sp.forward(&fb), sp.forward(&mix));
        for i in 0..64 {
            let want = sa.coeffs()[i] + sb.coeffs()[i] * k;
            prop_assert!((sm.coeffs()[i] - want).norm() < 1e-13);
        }
    }

    /// The semi-implicit solve damps every mode; the mean is divided by
    /// exactly `1 + c α / ε²`.
    #[test]
    fn semi_implicit_contracts(v in field_strategy(64), c in 1e-6..1e-2f64, alpha in 0.0..4.0f64) {
        let sp = Spectral::new(grid8());
        let eps = 0.125;
        let f = Field::new(grid8(), v.clone()).unwrap();
        let u = sp.solve_semi_implicit(&f, c, alpha, eps);
        let norm = |x: &[f64]| x.iter().map(|y| y * y).sum::<f64>();
        prop_assert!(norm(u.values()) <= norm(&v) * (1.0 + 1e-12));
        let want = f.integral() / (1.0 + c * alpha / (eps * eps));
        prop_assert!((u.integral() - want).abs() < 1e-12);
    }

    /// After the partition projection every sample sums to one and frozen
    /// phases are untouched.
    #[test]
    fn projection_restores_partition(
        raw in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 64), 3),
        m in prop::collection::vec(0.1..3.0f64, 3),
        freeze in any::<bool>(),
    ) {
        let fields: Vec<Field> = raw.iter().map(|v| Field::new(grid8(), v.clone()).unwrap()).collect();
        let state = PhaseState::new(fields, 0.125, 0.0).unwrap();
        let mut mobility = m.clone();
        if freeze {
            mobility[0] = 0.0;
        }
        let (out, report) = project_partition(&state, &mobility, &SolverParams::new(1e-4)).unwrap();
        prop_assert!(out.partition_residual() <= 1e-12, "residual {}", out.partition_residual());
        prop_assert!(report.residual_all <= 1e-12);
        if freeze {
            prop_assert_eq!(out.field(0).values(), state.field(0).values());
        }
    }

    #[test]
    fn disk_initial_data_is_a_partition(cx in 0.0..1.0f64, cy in 0.0..1.0f64, r in 0.05..0.4f64) {
        let grid = Grid::new(&[32, 32], &[1.0, 1.0]).unwrap();
        let s = init_from_shapes(grid, 1.0 / 32.0, &[ShapeSpec::circle([cx, cy], r), ShapeSpec::Rest]).unwrap();
        prop_assert!(s.partition_residual() <= 1e-12);
        prop_assert_eq!(s.out_of_range_count(), 0);
    }

    #[test]
    fn radius_inversion_round_trips(a in 0.4..1.8f64, b in 0.4..1.8f64, t in 0.0..0.95f64, geometric in any::<bool>()) {
        let w = WireParams::new(a, b, 1.0);
        prop_assume!(w.is_ok());
        let model = if geometric { CapModel::GeometricF } else { CapModel::PaperF };
        let w = w.unwrap().with_cap_model(model);
        prop_assume!(w.alpha_max() > 0.05);
        let alpha = t * (w.alpha_max() - 0.02);
        let r = droplet_radius(alpha, &w);
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let back = invert_radius(r, &w);
        prop_assume!(back.is_ok());
        let back = back.unwrap();
        prop_assert!((droplet_radius(back, &w).unwrap() - r).abs() <= 1e-9);
    }

    #[test]
    fn profile_starts_at_seed_and_tracks_radius(a in 0.4..1.8f64, b in 0.4..1.8f64, r0 in 0.1..5.0f64) {
        let w = WireParams::new(a, b, r0);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let p = integrate_profile(&w, 21);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let first = p.samples[0];
        prop_assert_eq!((first.alpha, first.r, first.h), (0.0, r0, 0.0));
        for s in &p.samples {
            prop_assert!(s.h.is_finite());
            prop_assert!((s.r - droplet_radius(s.alpha, &w).unwrap()).abs() <= 1e-9 * r0);
        }
        // dh = -tan α dR: the height rises exactly where the radius shrinks.
        for win in p.samples.windows(2) {
            let (dr, dh) = (win[1].r - win[0].r, win[1].h - win[0].h);
            let d0 = droplet_radius_derivative(win[0].alpha, &w).unwrap();
            let d1 = droplet_radius_derivative(win[1].alpha, &w).unwrap();
            if dr.abs() > 1e-9 * r0 && d0 * d1 > 0.0 {
                prop_assert!(dh * dr < 0.0, "dr {dr:e}, dh {dh:e} at α {}", win[1].alpha);
            }
        }
        if p.samples.iter().all(|s| s.r <= r0) {
            for s in &p.samples[1..] {
                prop_assert!(s.h > 0.0 && s.r < r0);
            }
        }
    }

    #[test]
    fn config_text_round_trips(dt_den in 1u32..1_000_000, alpha in 0.0..10.0f64, eps in 1e-4..0.1f64) {
        let text = PRESET
            .lines()
            .map(|l| match l.split('=').next().map(str::trim) {
                Some("solver.dt") => format!("solver.dt = 1/{dt_den}"),
                Some("solver.alpha") => format!("solver.alpha = {alpha}"),
                Some("model.epsilon") => format!("model.epsilon = {eps}"),
                _ => l.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let a: RunConfig = parse_config(&text).unwrap();
        let canonical = a.to_text();
        let b = parse_config(&canonical).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(b.to_text(), canonical);
        prop_assert_eq!(a.solver.dt, 1.0 / dt_den as f64);
        prop_assert_eq!(a.solver.alpha, alpha);
        prop_assert_eq!(a.epsilon, eps);
    }
}
