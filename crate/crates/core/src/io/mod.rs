//! Run configuration, file output and the run driver used by the CLI.

mod config;
mod driver;
mod output;

pub use config::{
    parse_config, ConfigError, Mobilities, MobilityModel, OutputConfig, ParseError, RunConfig, Scenario, Tensions,
    ValidationError,
};
pub use driver::{execute, RunError, RunSummary};
pub use output::{
    contours_csv, decode_pnm, diagnostics_csv, encode_pgm, encode_ppm, gray_level, parse_diagnostics_csv, profile_csv,
    write_frame, Pnm, PALETTE,
};

/// Shortest decimal text that parses back to exactly `v`.
///
/// Plain notation for `1e-4 ≤ |v| < 1e16` (and zero), scientific
/// otherwise, so `1` prints as `1` and `2^-16` as `1.52587890625e-5`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integers_print_bare() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(-2.5), "-2.5");
        assert_eq!(format_real(1e-12), "1e-12");
        assert_eq!(format_real(1.0 / 65536.0), "1.52587890625e-5");
        assert_eq!(format_real(1.0 / 256.0), "0.00390625");
    }

    proptest! {
        #[test]
        fn format_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = format_real(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
