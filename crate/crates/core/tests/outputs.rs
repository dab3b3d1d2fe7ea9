//! Configuration round trips and file outputs of complete runs.

mod common;

use common::{load_preset, presets, reduce};
use mobflow::io::{encode_pgm, execute, parse_config, parse_diagnostics_csv};
use mobflow::scenarios::init_from_shapes;

#[test]
fn isotropic_junction_round_trips_exactly() {
    let a = load_preset("isotropic_junction");
    assert_eq!(a.solver.dt.to_bits(), (1.0f64 / 65536.0).to_bits());
    assert_eq!(a.epsilon.to_bits(), (1.0f64 / 256.0).to_bits());
    let text = a.to_text();
    let b = parse_config(&text).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.to_text(), text);
}

#[test]
fn every_preset_round_trips() {
    for (name, text) in presets() {
        let a = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let b = parse_config(&a.to_text()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

/// Minimal binary PGM reader: magic, comment lines, width, height, maxval,
/// one byte per pixel.
fn read_pgm(bytes: &[u8]) -> (Vec<String>, usize, usize, Vec<u8>) {
    let mut pos = 0;
    let mut line = || {
        let end = pos + bytes[pos..].iter().position(|&b| b == b'\n').unwrap();
        let s = String::from_utf8(bytes[pos..end].to_vec()).unwrap();
        pos = end + 1;
        s
    };
    assert_eq!(line(), "P5");
    let mut comments = Vec::new();
    let mut l = line();
    while let Some(c) = l.strip_prefix("# ") {
        comments.push(c.to_string());
        l = line();
    }
    let dims: Vec<usize> = l.split(' ').map(|v| v.parse().unwrap()).collect();
    assert_eq!(line(), "255");
    let data = bytes[pos..].to_vec();
    assert_eq!(data.len(), dims[0] * dims[1]);
    (comments, dims[0], dims[1], data)
}

#[test]
fn pgm_pixels_match_field_values() {
    let c = reduce(&load_preset("isotropic_junction"), 32, 1);
    let s = init_from_shapes(c.grid(), c.epsilon, &c.shapes).unwrap();
    let f = s.field(0);
    let (comments, w, h, data) = read_pgm(&encode_pgm(f, &["hello".into(), "two\nlines".into()]));
    assert_eq!(comments, ["hello", "two", "lines"]);
    assert_eq!((w, h), (32, 32));
    for row in 0..h {
        for i in 0..w {
            // Top row is the largest y.
            let j = h - 1 - row;
            let u = f.values()[f.grid().ravel([i, j, 0])];
            let want = (255.0 * u.clamp(0.0, 1.0)).round_ties_even() as u8;
            assert_eq!(data[row * w + i], want);
        }
    }
}

#[test]
fn run_writes_echoed_outputs_with_decreasing_energy() {
    let mut c = reduce(&load_preset("isotropic_junction"), 64, 40);
    c.check_energy = true;
    let dir = tempfile::tempdir().unwrap();
    let summary = execute(&c, dir.path()).unwrap();
    assert_eq!(summary.files.len(), 2 * 5 + 2);

    let echo = std::fs::read_to_string(dir.path().join("config.cfg")).unwrap();
    assert_eq!(parse_config(&echo).unwrap(), c);

    let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(!csv.contains('\r'));
    for line in echo.lines() {
        assert!(csv.contains(&format!("# {line}\n")), "missing echo of {line}");
    }
    let d = parse_diagnostics_csv(&csv).unwrap();
    assert_eq!(d.rows.len(), 41);
    for w in d.rows.windows(2) {
        assert!(w[1].energy <= w[0].energy, "energy rose at t = {}", w[1].t);
    }
    assert!(d.rows.iter().all(|r| r.partition_residual <= 1e-10));

    let ppm = std::fs::read(dir.path().join("frame_001.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n# mobflow "));
}

#[test]
fn wetting_and_vls_presets_run_reduced() {
    for name in ["wetting_isotropic", "vls_au_si"] {
        let c = reduce(&load_preset(name), 64, 10);
        let dir = tempfile::tempdir().unwrap();
        let summary = execute(&c, dir.path()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let get = |k: &str| summary.entries.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        if name.starts_with("wetting") {
            assert_eq!(get("solid_bitwise_constant").as_deref(), Some("true"));
        } else {
            assert_eq!(get("solid_monotone").as_deref(), Some("true"));
        }
    }
}
