//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mobflow::io::{parse_config, RunConfig, Scenario};

pub fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

/// Every shipped preset as `(file stem, text)`, sorted by name.
pub fn presets() -> Vec<(String, String)> {
    let mut out: Vec<_> = std::fs::read_dir(presets_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn load_preset(stem: &str) -> RunConfig {
    let text = std::fs::read_to_string(presets_dir().join(format!("{stem}.cfg"))).unwrap();
    parse_config(&text).unwrap()
}

/// The same run on `k` samples per axis, keeping ε/h and dt/ε² fixed.
pub fn rescale(config: &RunConfig, k: usize) -> RunConfig {
    let mut c = config.clone();
    let scale = config.sizes[0] as f64 / k as f64;
    c.sizes = vec![k; config.sizes.len()];
    c.epsilon *= scale;
    c.solver.dt *= scale * scale;
    if let Scenario::Vls { delta, .. } = &mut c.scenario {
        *delta *= scale;
    }
    c
}

/// [`rescale`] to `k` samples, then cut the run to `steps` time steps.
pub fn reduce(config: &RunConfig, k: usize, steps: usize) -> RunConfig {
    let mut c = rescale(config, k);
    c.t_end = steps as f64 * c.solver.dt;
    c.output.frame_times = vec![0.0, c.t_end];
    c.output.sample_every = 1;
    if let Scenario::Vls { t_growth, .. } = &mut c.scenario {
        *t_growth = 0.5 * c.t_end;
    }
    c
}
