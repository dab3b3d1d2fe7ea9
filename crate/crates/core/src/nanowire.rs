//! Sharp-interface nanowire shape under quasi-static VLS growth.
//!
//! A liquid droplet of constant volume sits on a wire of radius `R`. Its
//! volume is the sum of two spherical caps,
//! `V_L = (π R³ / 3) (f(θ_V) + f(θ_S))`, and as the solid-liquid interface
//! tilts by `α` the caps change to `f(θ_V - α)` and `f(θ_S + α)`. Keeping
//! `V_L` fixed gives the radius `R_α`; the wire profile follows from
//! `h'(r) = -tan(R_α⁻¹(r))`.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

/// Distance from `0` and `π` below which cap factors are rejected.
const CAP_GUARD: f64 = 1e-9;
/// Gap kept from `α_max` and from `π/2` when integrating the profile.
pub const ALPHA_MARGIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NanowireError {
    #[error("invalid wire parameter: {0}")]
    BadParams(&'static str),
    #[error("tension ratios admit no triple point (cos θ_V = {cos_v}, cos θ_S = {cos_s})")]
    Unrealizable { cos_v: f64, cos_s: f64 },
    #[error("cap factor is singular at θ = {0}")]
    CapSingularity(f64),
    #[error("rotation α = {alpha} outside [0, {alpha_max})")]
    DomainExceeded { alpha: f64, alpha_max: f64 },
    #[error("radius {r} outside the attained range ({lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("radius is not monotone on the admissible rotation range")]
    NonMonotone,
}

/// Spherical-cap volume factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapModel {
    /// `(1 + cos θ)(2 - cos θ) / sin³θ`.
    #[default]
    PaperF,
    /// `(1 - cos θ)²(2 + cos θ) / sin³θ`, the volume of a cap of unit base
    /// radius with contact angle `θ`, divided by `π/3`.
    GeometricF,
}

impl CapModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::PaperF => "paper",
            Self::GeometricF => "geometric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(Self::PaperF),
            "geometric" => Some(Self::GeometricF),
            _ => None,
        }
    }
}

/// Which way round the cap-factor ratio enters `R_α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusOrientation {
    /// `R_α = R₀ [S(0) / S(α)]^{1/3}`: liquid volume is conserved.
    #[default]
    VolumeConserving,
    /// `R_α = R₀ [S(α) / S(0)]^{1/3}`. Volume is not conserved; kept for
    /// comparison only.
    AsPrinted,
}

/// `cos θ_V = (b² - a² - 1) / 2a` and `cos θ_S = (a² - b² - 1) / 2b`.
pub fn contact_angles(a: f64, b: f64) -> Result<(f64, f64), NanowireError> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(NanowireError::BadParams("tension ratios must be positive"));
    }
    let cos_v = (b * b - a * a - 1.0) / (2.0 * a);
    let cos_s = (a * a - b * b - 1.0) / (2.0 * b);
    if !((-1.0..=1.0).contains(&cos_v) && (-1.0..=1.0).contains(&cos_s)) {
        return Err(NanowireError::Unrealizable { cos_v, cos_s });
    }
    Ok((cos_v.acos(), cos_s.acos()))
}

/// `(sin θ/2, cos θ/2, cos θ)`, rejecting θ near the singular multiples of π.
fn check_cap_domain(theta: f64) -> Result<(f64, f64, f64), NanowireError> {
    let t = theta.rem_euclid(2.0 * PI);
    if !theta.is_finite() || t < CAP_GUARD || (t - PI).abs() < CAP_GUARD || 2.0 * PI - t < CAP_GUARD {
        return Err(NanowireError::CapSingularity(theta));
    }
    let (sh, ch) = (0.5 * theta).sin_cos();
    Ok((sh, ch, theta.cos()))
}

// Half-angle forms: 1 + cos θ = 2cos²(θ/2), 1 - cos θ = 2sin²(θ/2) and
// sin θ = 2 sin(θ/2) cos(θ/2). The direct forms cancel catastrophically
// next to θ = 0 and θ = π.

/// `PaperF`: `(1 + cos θ)(2 - cos θ) / sin³θ`; `GeometricF`:
/// `(1 - cos θ)²(2 + cos θ) / sin³θ`.
pub fn cap_factor(theta: f64, model: CapModel) -> Result<f64, NanowireError> {
    let (sh, ch, c) = check_cap_domain(theta)?;
    Ok(match model {
        CapModel::PaperF => (2.0 - c) / (4.0 * sh * sh * sh * ch),
        CapModel::GeometricF => sh * (2.0 + c) / (2.0 * ch * ch * ch),
    })
}

/// `df/dθ`.
pub fn cap_factor_derivative(theta: f64, model: CapModel) -> Result<f64, NanowireError> {
    let (sh, ch, c) = check_cap_domain(theta)?;
    Ok(match model {
        // (1 + c)(c² - 3c - 1) / sin⁴θ
        CapModel::PaperF => (c * c - 3.0 * c - 1.0) / (8.0 * sh.powi(4) * ch * ch),
        // 3 - 3c(2 + c) / (1 + c)²
        CapModel::GeometricF => 3.0 - 3.0 * c * (2.0 + c) / (4.0 * ch.powi(4)),
    })
}

/// Liquid volume `(π R³ / 3)(f(θ_V) + f(θ_S))`.
pub fn liquid_volume(radius: f64, theta_v: f64, theta_s: f64, model: CapModel) -> Result<f64, NanowireError> {
    Ok(PI / 3.0 * radius.powi(3) * (cap_factor(theta_v, model)? + cap_factor(theta_s, model)?))
}

/// Sharp-interface wire description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireParams {
    a: f64,
    b: f64,
    r0: f64,
    theta_v: f64,
    theta_s: f64,
    cap_model: CapModel,
    orientation: RadiusOrientation,
}

impl WireParams {
    /// `a = σ_VL/σ_SV`, `b = σ_LS/σ_SV`, `r0` the initial wire radius.
    pub fn new(a: f64, b: f64, r0: f64) -> Result<Self, NanowireError> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(NanowireError::BadParams("R0 must be positive"));
        }
        let (theta_v, theta_s) = contact_angles(a, b)?;
        Ok(Self {
            a,
            b,
            r0,
            theta_v,
            theta_s,
            cap_model: CapModel::default(),
            orientation: RadiusOrientation::default(),
        })
    }

    /// From the three surface tensions.
    pub fn from_tensions(sigma_ls: f64, sigma_vl: f64, sigma_sv: f64, r0: f64) -> Result<Self, NanowireError> {
        if !(sigma_sv.is_finite() && sigma_sv > 0.0) {
            return Err(NanowireError::BadParams("σ_SV must be positive"));
        }
        Self::new(sigma_vl / sigma_sv, sigma_ls / sigma_sv, r0)
    }

    pub fn with_cap_model(mut self, model: CapModel) -> Self {
        self.cap_model = model;
        self
    }

    pub fn with_orientation(mut self, orientation: RadiusOrientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn theta_v(&self) -> f64 {
        self.theta_v
    }

    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }

    pub fn cap_model(&self) -> CapModel {
        self.cap_model
    }

    pub fn orientation(&self) -> RadiusOrientation {
        self.orientation
    }

    /// `min(θ_V, π - θ_S, π/2)`.
    pub fn alpha_max(&self) -> f64 {
        self.theta_v.min(PI - self.theta_s).min(FRAC_PI_2)
    }

    /// Last rotation reached by [`integrate_profile`].
    pub fn alpha_stop(&self) -> f64 {
        (self.alpha_max() - ALPHA_MARGIN).min(FRAC_PI_2 - ALPHA_MARGIN)
    }

    /// Whether the stationary rotation `α = π/2` lies in the domain.
    pub fn stationary_reachable(&self) -> bool {
        self.alpha_max() >= FRAC_PI_2
    }

    fn check_alpha(&self, alpha: f64) -> Result<(), NanowireError> {
        let alpha_max = self.alpha_max();
        if !(alpha >= 0.0 && alpha < alpha_max) {
            return Err(NanowireError::DomainExceeded { alpha, alpha_max });
        }
        Ok(())
    }

    /// `S(α) = f(θ_V - α) + f(θ_S + α)`.
    pub fn cap_sum(&self, alpha: f64) -> Result<f64, NanowireError> {
        Ok(cap_factor(self.theta_v - alpha, self.cap_model)? + cap_factor(self.theta_s + alpha, self.cap_model)?)
    }

    fn cap_sum_derivative(&self, alpha: f64) -> Result<f64, NanowireError> {
        Ok(-cap_factor_derivative(self.theta_v - alpha, self.cap_model)?
            + cap_factor_derivative(self.theta_s + alpha, self.cap_model)?)
    }
}

/// Droplet radius `R_α` after rotating the solid-liquid interface by `α`.
pub fn droplet_radius(alpha: f64, w: &WireParams) -> Result<f64, NanowireError> {
    w.check_alpha(alpha)?;
    let s0 = w.cap_sum(0.0)?;
    let sa = w.cap_sum(alpha)?;
    Ok(match w.orientation {
        RadiusOrientation::VolumeConserving => w.r0 * (s0 / sa).cbrt(),
        RadiusOrientation::AsPrinted => w.r0 * (sa / s0).cbrt(),
    })
}

/// `dR_α/dα`, from the analytic derivative of the cap factors.
pub fn droplet_radius_derivative(alpha: f64, w: &WireParams) -> Result<f64, NanowireError> {
    let r = droplet_radius(alpha, w)?;
    let ratio = w.cap_sum_derivative(alpha)? / w.cap_sum(alpha)?;
    Ok(match w.orientation {
        RadiusOrientation::VolumeConserving => -r * ratio / 3.0,
        RadiusOrientation::AsPrinted => r * ratio / 3.0,
    })
}

/// Solves `R_α = r` for `α` by safeguarded Newton iteration on `[0, α_max)`.
pub fn invert_radius(r: f64, w: &WireParams) -> Result<f64, NanowireError> {
    let r0 = w.r0;
    let tol = 1e-10 * r0;
    let hi_alpha = w.alpha_max() - 4.0 * CAP_GUARD;
    let r_hi = droplet_radius(hi_alpha, w)?;
    let (lo_r, hi_r) = (r_hi.min(r0), r_hi.max(r0));
    if !(r.is_finite() && r >= lo_r - tol && r <= hi_r + tol) {
        return Err(NanowireError::OutOfRange { r, lo: lo_r, hi: hi_r });
    }
    if (r - r0).abs() <= tol {
        // A radius that first grows meets R0 again further on.
        if droplet_radius_derivative(0.0, w)? > 0.0 {
            return Err(NanowireError::NonMonotone);
        }
        return Ok(0.0);
    }
    let phi = |a: f64| droplet_radius(a, w).map(|v| v - r);
    let (mut lo, mut hi) = (0.0, hi_alpha);
    let (f_lo, f_hi) = (phi(lo)?, phi(hi)?);
    if f_lo * f_hi > 0.0 {
        return Err(NanowireError::NonMonotone);
    }
    let lo_sign = f_lo.signum();
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = phi(alpha)?;
        if f.abs() <= 1e-3 * tol {
            return Ok(alpha);
        }
        if f.signum() == lo_sign {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let d = droplet_radius_derivative(alpha, w)?;
        let newton = alpha - f / d;
        alpha = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi_alpha.max(1.0) {
            break;
        }
    }
    if phi(alpha)?.abs() <= tol {
        Ok(alpha)
    } else {
        Err(NanowireError::NonMonotone)
    }
}

/// One point of the wire profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub alpha: f64,
    pub r: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireProfile {
    pub samples: Vec<ProfileSample>,
    pub alpha_max: f64,
    pub alpha_stop: f64,
    /// True when `α_stop` reached `π/2 - ALPHA_MARGIN`.
    pub stationary: bool,
}

/// Integrates `dh/dα = -tan α · dR_α/dα` from `α = 0` to `α_stop` and
/// samples `n_samples` equispaced rotations.
pub fn integrate_profile(w: &WireParams, n_samples: usize) -> Result<WireProfile, NanowireError> {
    if n_samples < 2 {
        return Err(NanowireError::BadParams("profile needs at least 2 samples"));
    }
    let alpha_stop = w.alpha_stop();
    let mut samples = vec![ProfileSample {
        alpha: 0.0,
        r: w.r0,
        h: 0.0,
    }];
    if alpha_stop > 0.0 {
        let rhs = |a: f64| droplet_radius_derivative(a, w).map(|d| -a.tan() * d);
        let mut h = 0.0;
        for i in 1..n_samples {
            let a0 = alpha_stop * (i - 1) as f64 / (n_samples - 1) as f64;
            let a1 = alpha_stop * i as f64 / (n_samples - 1) as f64;
            h += adaptive_rk4(&rhs, a0, a1, 1e-13 * w.r0)?;
            samples.push(ProfileSample {
                alpha: a1,
                r: droplet_radius(a1, w)?,
                h,
            });
        }
    }
    Ok(WireProfile {
        samples,
        alpha_max: w.alpha_max(),
        alpha_stop: alpha_stop.max(0.0),
        stationary: w.stationary_reachable(),
    })
}

/// Integrates `y' = g(α)` over `[a, b]` with step-doubling RK4.
fn adaptive_rk4(
    g: &impl Fn(f64) -> Result<f64, NanowireError>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, NanowireError> {
    // With a right-hand side independent of y, RK4 reduces to Simpson's rule.
    let step =
        |x: f64, h: f64| -> Result<f64, NanowireError> { Ok(h / 6.0 * (g(x)? + 4.0 * g(x + 0.5 * h)? + g(x + h)?)) };
    let mut x = a;
    let mut h = b - a;
    let mut total = 0.0;
    let mut guard = 0;
    while x < b {
        h = h.min(b - x);
        let full = step(x, h)?;
        let halves = step(x, 0.5 * h)? + step(x + 0.5 * h, 0.5 * h)?;
        let err = (halves - full).abs() / 15.0;
        guard += 1;
        // Relative floor: next to α_max the integrand grows like 1/sin⁴θ and
        // its evaluation noise (~1e-12 relative) defeats an absolute target.
        let allowed = (tol * h / (b - a)).max(1e-10 * halves.abs());
        if err <= allowed || h < 1e-12 * (b - a) || guard > 1_000_000 {
            total += halves + (halves - full) / 15.0;
            x += h;
            if err < 0.1 * allowed {
                h *= 2.0;
            }
        } else {
            h *= 0.5;
        }
    }
    Ok(total)
}

/// `1 - R(α_stop)/R₀`, with the domain flag of the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterReduction {
    pub value: f64,
    pub alpha_stop: f64,
    /// False when the stationary rotation `π/2` was not reached.
    pub stationary: bool,
}

pub fn diameter_reduction(w: &WireParams) -> Result<DiameterReduction, NanowireError> {
    let alpha_stop = w.alpha_stop();
    if alpha_stop <= 0.0 {
        return Ok(DiameterReduction {
            value: 0.0,
            alpha_stop: 0.0,
            stationary: false,
        });
    }
    let r = droplet_radius(alpha_stop, w)?;
    Ok(DiameterReduction {
        value: 1.0 - r / w.r0,
        alpha_stop,
        stationary: w.stationary_reachable(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn isotropic_angles() {
        let (tv, ts) = contact_angles(1.0, 1.0).unwrap();
        assert_relative_eq!(tv, 2.0 * PI / 3.0, epsilon = 1e-15);
        assert_relative_eq!(ts, 2.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn au_si_angles() {
        let (tv, ts) = contact_angles(0.85 / 1.24, 0.62 / 1.24).unwrap();
        assert!((tv - 2.667_705).abs() < 1e-6, "{tv}");
        assert!((ts - 2.465_641).abs() < 1e-6, "{ts}");
    }

    #[test]
    fn degenerate_ratio_is_unrealizable() {
        // With b = 1, cos θ_V = -a/2 stays bounded; b ≠ 1 diverges as a → 0.
        assert!(contact_angles(1e-6, 1.0).is_ok());
        assert!(matches!(
            contact_angles(1e-6, 0.5),
            Err(NanowireError::Unrealizable { .. })
        ));
        assert!(matches!(contact_angles(0.0, 1.0), Err(NanowireError::BadParams(_))));
    }

    #[test]
    fn cap_factor_examples() {
        for m in [CapModel::PaperF, CapModel::GeometricF] {
            assert_relative_eq!(cap_factor(FRAC_PI_2, m).unwrap(), 2.0, epsilon = 1e-14);
        }
        assert!((cap_factor(2.0 * PI / 3.0, CapModel::PaperF).unwrap() - 1.924_500_9).abs() < 1e-6);
        assert!((cap_factor(2.0 * PI / 3.0, CapModel::GeometricF).unwrap() - 5.196_152_4).abs() < 1e-6);
        assert!(matches!(
            cap_factor(PI, CapModel::PaperF),
            Err(NanowireError::CapSingularity(_))
        ));
        assert!(matches!(
            cap_factor(0.0, CapModel::GeometricF),
            Err(NanowireError::CapSingularity(_))
        ));
    }

    #[test]
    fn cap_derivative_matches_central_difference() {
        for m in [CapModel::PaperF, CapModel::GeometricF] {
            for &t in &[0.3, 1.0, FRAC_PI_2, 2.0, 2.8, 3.6, 5.0] {
                let h = 1e-6;
                let fd = (cap_factor(t + h, m).unwrap() - cap_factor(t - h, m).unwrap()) / (2.0 * h);
                let an = cap_factor_derivative(t, m).unwrap();
                assert_relative_eq!(an, fd, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn radius_identity_at_zero() {
        let w = WireParams::new(1.0, 1.0, 0.7).unwrap();
        assert_eq!(droplet_radius(0.0, &w).unwrap(), 0.7);
        assert_eq!(invert_radius(0.7, &w).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let w = WireParams::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(w.alpha_max(), PI / 3.0, epsilon = 1e-15);
        assert!(matches!(
            droplet_radius(w.alpha_max(), &w),
            Err(NanowireError::DomainExceeded { .. })
        ));
        assert!(matches!(
            droplet_radius(-0.1, &w),
            Err(NanowireError::DomainExceeded { .. })
        ));
        assert!(matches!(invert_radius(0.0, &w), Err(NanowireError::OutOfRange { .. })));
        assert!(matches!(invert_radius(1.5, &w), Err(NanowireError::OutOfRange { .. })));
    }

    #[test]
    fn printed_orientation_breaks_conservation() {
        let w = WireParams::new(1.0, 1.0, 1.0)
            .unwrap()
            .with_orientation(RadiusOrientation::AsPrinted);
        let v0 = liquid_volume(1.0, w.theta_v(), w.theta_s(), w.cap_model()).unwrap();
        let r = droplet_radius(0.3, &w).unwrap();
        let v = liquid_volume(r, w.theta_v() - 0.3, w.theta_s() + 0.3, w.cap_model()).unwrap();
        assert!((v / v0 - 1.0).abs() > 1e-2);
    }

    #[test]
    fn degenerate_domain_reports_flag() {
        // a = b - 1 puts θ_S at π and θ_V at 0: no room to rotate.
        let w = WireParams::new(1.0 + 1e-7, 2.0, 1.0).unwrap();
        assert!(w.alpha_max() < ALPHA_MARGIN);
        let d = diameter_reduction(&w).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(!d.stationary);
        let p = integrate_profile(&w, 10).unwrap();
        assert_eq!(p.samples.len(), 1);
    }

    #[test]
    fn cap_factor_is_accurate_next_to_singularities() {
        // Against the direct forms at moderate angles.
        for theta in [0.3f64, 1.1, 2.0, 2.9] {
            let (s, c) = theta.sin_cos();
            let paper = (1.0 + c) * (2.0 - c) / s.powi(3);
            let geo = (1.0 - c).powi(2) * (2.0 + c) / s.powi(3);
            assert!((cap_factor(theta, CapModel::PaperF).unwrap() / paper - 1.0).abs() < 1e-14);
            assert!((cap_factor(theta, CapModel::GeometricF).unwrap() / geo - 1.0).abs() < 1e-14);
        }
        // Leading orders: PaperF ~ 3/(2δ) at θ = π - δ, GeometricF ~ 3θ/4 at 0.
        let d = 1e-6f64;
        let p = cap_factor(PI - d, CapModel::PaperF).unwrap();
        assert!((p * d / 1.5 - 1.0).abs() < 1e-6);
        let g = cap_factor(d, CapModel::GeometricF).unwrap();
        assert!((g / (0.75 * d) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn seed_radius_is_ambiguous_when_radius_first_grows() {
        let w = WireParams::new(0.85 / 1.24, 0.62 / 1.24, 1.0).unwrap();
        assert!(droplet_radius_derivative(0.0, &w).unwrap() > 0.0);
        assert_eq!(invert_radius(1.0, &w), Err(NanowireError::NonMonotone));
        assert!(matches!(
            invert_radius(1.001, &w),
            Err(NanowireError::OutOfRange { .. })
        ));
        let iso = WireParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(invert_radius(1.0, &iso), Ok(0.0));
    }
}
