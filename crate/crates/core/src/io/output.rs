//! Raster frames (binary PGM/PPM) and CSV tables.
//!
//! Every file starts with `#` comment lines echoing the resolved
//! configuration; CSV readers should skip lines starting with `#`.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::format_real;
use crate::nanowire::WireProfile;
use crate::scenarios::Polyline;
use crate::solver::{Diagnostics, DiagnosticsRow, PhaseState};
use crate::spectral::Field;

/// Composite colours of phases 1, 2, 3, …: blue, red, green, then
/// yellow, magenta, cyan (cycled).
pub const PALETTE: [[f64; 3]; 6] = [
    [0.0, 0.0, 255.0],
    [255.0, 0.0, 0.0],
    [0.0, 255.0, 0.0],
    [255.0, 255.0, 0.0],
    [255.0, 0.0, 255.0],
    [0.0, 255.0, 255.0],
];

/// `round(255·clamp(u, 0, 1))` with ties to even, so `½ → 128`.
pub fn gray_level(u: f64) -> u8 {
    (255.0 * u.clamp(0.0, 1.0)).round_ties_even() as u8
}

/// Raster layout of a field: width along x, height along y, rows from the
/// top (largest y) down. 3D fields show their middle z slice.
fn raster_dims(f: &Field) -> (usize, usize, usize) {
    let s = f.grid().sizes();
    let w = s[0];
    let h = if f.grid().dim() >= 2 { s[1] } else { 1 };
    let z = if f.grid().dim() == 3 { s[2] / 2 } else { 0 };
    (w, h, z)
}

fn pnm_header(magic: &str, w: usize, h: usize, comments: &[String]) -> Vec<u8> {
    let mut s = format!("{magic}\n");
    for c in comments {
        for line in c.lines() {
            writeln!(s, "# {line}").unwrap();
        }
    }
    write!(s, "{w} {h}\n255\n").unwrap();
    s.into_bytes()
}

/// Binary graymap of one field.
pub fn encode_pgm(f: &Field, comments: &[String]) -> Vec<u8> {
    let (w, h, z) = raster_dims(f);
    let mut out = pnm_header("P5", w, h, comments);
    let g = f.grid();
    for row in 0..h {
        let j = h - 1 - row;
        for i in 0..w {
            out.push(gray_level(f.values()[g.ravel([i, j, z])]));
        }
    }
    out
}

/// Binary pixmap mixing all phases with [`PALETTE`].
pub fn encode_ppm(s: &PhaseState, comments: &[String]) -> Vec<u8> {
    let f0 = s.field(0);
    let (w, h, z) = raster_dims(f0);
    let mut out = pnm_header("P6", w, h, comments);
    let g = f0.grid();
    for row in 0..h {
        let j = h - 1 - row;
        for i in 0..w {
            let idx = g.ravel([i, j, z]);
            let mut rgb = [0.0; 3];
            for (k, f) in s.fields().iter().enumerate() {
                let u = f.values()[idx].clamp(0.0, 1.0);
                for c in 0..3 {
                    rgb[c] += u * PALETTE[k % PALETTE.len()][c];
                }
            }
            out.extend(rgb.map(|v| v.clamp(0.0, 255.0).round_ties_even() as u8));
        }
    }
    out
}

/// Decoded binary PNM image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Minimal reader for the P5/P6 files written here (comments allowed).
pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm, String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(format!("unsupported magic {m}")),
    };
    let num = |t: String| t.parse::<usize>().map_err(|_| format!("bad header number {t}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    if num(token()?)? != 255 {
        return Err("only maxval 255 is supported".into());
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = bytes.get(pos + 1..).ok_or("missing raster")?.to_vec();
    if data.len() != width * height * channels {
        return Err(format!(
            "raster has {} bytes, expected {}",
            data.len(),
            width * height * channels
        ));
    }
    Ok(Pnm {
        channels,
        width,
        height,
        data,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    std::fs::write(path, bytes).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes `{stem}_{name}.pgm` for every phase and the composite
/// `{stem}.ppm` into `dir`; returns the paths written.
pub fn write_frame(
    s: &PhaseState,
    names: &[String],
    dir: &Path,
    stem: &str,
    comments: &[String],
) -> io::Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(s.n_phases() + 1);
    let mut comments = comments.to_vec();
    comments.push(format!("t = {}", format_real(s.time())));
    for (k, f) in s.fields().iter().enumerate() {
        let path = dir.join(format!("{stem}_{}.pgm", names[k]));
        write_file(&path, &encode_pgm(f, &comments))?;
        paths.push(path);
    }
    let path = dir.join(format!("{stem}.ppm"));
    write_file(&path, &encode_ppm(s, &comments))?;
    paths.push(path);
    Ok(paths)
}

fn comment_block(comments: &[String]) -> String {
    let mut s = String::new();
    for c in comments {
        for line in c.lines() {
            writeln!(s, "# {line}").unwrap();
        }
    }
    s
}

/// Diagnostics table: `t, energy, vol_1..vol_N, lambda_norm,
/// partition_residual` followed by the metric columns.
pub fn diagnostics_csv(d: &Diagnostics, n_phases: usize, comments: &[String]) -> String {
    let mut s = comment_block(comments);
    let mut header = vec!["t".to_string(), "energy".to_string()];
    header.extend((1..=n_phases).map(|k| format!("vol_{k}")));
    header.push("lambda_norm".into());
    header.push("partition_residual".into());
    header.extend(d.metric_names.iter().cloned());
    writeln!(s, "{}", header.join(",")).unwrap();
    for r in &d.rows {
        let mut cells = vec![r.t, r.energy];
        cells.extend(&r.volumes);
        cells.push(r.lambda_norm);
        cells.push(r.partition_residual);
        cells.extend(&r.metrics);
        writeln!(
            s,
            "{}",
            cells.iter().map(|v| format_real(*v)).collect::<Vec<_>>().join(",")
        )
        .unwrap();
    }
    s
}

/// Reads back a table written by [`diagnostics_csv`].
pub fn parse_diagnostics_csv(text: &str) -> Result<Diagnostics, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("missing header")?.split(',').collect();
    let n = header.iter().filter(|h| h.starts_with("vol_")).count();
    let fixed = 4 + n;
    if header.len() < fixed || header[0] != "t" || header[1] != "energy" {
        return Err("unexpected header".into());
    }
    let metric_names = header[fixed..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let v = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|_| format!("row {}: bad number {c}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != header.len() {
            return Err(format!(
                "row {} has {} cells, expected {}",
                i + 1,
                v.len(),
                header.len()
            ));
        }
        rows.push(DiagnosticsRow {
            t: v[0],
            energy: v[1],
            volumes: v[2..2 + n].to_vec(),
            lambda_norm: v[2 + n],
            partition_residual: v[3 + n],
            metrics: v[fixed..].to_vec(),
        });
    }
    Ok(Diagnostics { metric_names, rows })
}

/// Half-level contours: one row per vertex, `phase, polyline, closed, x, y`.
pub fn contours_csv(contours: &[(String, Vec<Polyline>)], comments: &[String]) -> String {
    let mut s = comment_block(comments);
    s.push_str("phase,polyline,closed,x,y\n");
    for (name, polys) in contours {
        for (i, p) in polys.iter().enumerate() {
            for q in &p.points {
                writeln!(s, "{name},{i},{},{},{}", p.closed, format_real(q[0]), format_real(q[1])).unwrap();
            }
        }
    }
    s
}

/// Nanowire profile samples as `alpha, r, h`.
pub fn profile_csv(p: &WireProfile, comments: &[String]) -> String {
    let mut s = comment_block(comments);
    s.push_str("alpha,r,h\n");
    for q in &p.samples {
        writeln!(s, "{},{},{}", format_real(q.alpha), format_real(q.r), format_real(q.h)).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn gray_levels() {
        assert_eq!(gray_level(1.0), 255);
        assert_eq!(gray_level(0.5), 128);
        assert_eq!(gray_level(-0.2), 0);
        assert_eq!(gray_level(1.7), 255);
        // 255·u = 126.5 rounds to the even neighbour.
        assert_eq!(gray_level(126.5 / 255.0), 126);
    }

    #[test]
    fn constant_fields_encode_uniformly() {
        let g = Grid::new(&[6, 4], &[1.0, 1.0]).unwrap();
        let one = decode_pnm(&encode_pgm(&Field::constant(g, 1.0), &["c".into()])).unwrap();
        assert_eq!((one.width, one.height, one.channels), (6, 4, 1));
        assert!(one.data.iter().all(|&b| b == 255));
        let half = decode_pnm(&encode_pgm(&Field::constant(g, 0.5), &[])).unwrap();
        assert!(half.data.iter().all(|&b| b == 128));
    }

    #[test]
    fn top_row_is_largest_y() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        let f = Field::from_fn_indexed(g, |i| if i[1] == 3 { 1.0 } else { 0.0 });
        let p = decode_pnm(&encode_pgm(&f, &[])).unwrap();
        assert_eq!(&p.data[..4], &[255; 4]);
        assert_eq!(&p.data[4..], &[0; 12]);
    }

    #[test]
    fn composite_colours() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        let s = PhaseState::new(
            vec![
                Field::constant(g, 0.5),
                Field::constant(g, 0.5),
                Field::constant(g, 0.0),
            ],
            0.1,
            0.0,
        )
        .unwrap();
        let p = decode_pnm(&encode_ppm(&s, &[])).unwrap();
        assert_eq!(p.channels, 3);
        assert_eq!(&p.data[..3], &[128, 0, 128]);
    }

    #[test]
    fn diagnostics_round_trip() {
        let d = Diagnostics {
            metric_names: vec!["radius".into()],
            rows: vec![DiagnosticsRow {
                t: 0.1,
                energy: 1.0 / 3.0,
                volumes: vec![0.25, 0.75],
                lambda_norm: 1e-300,
                partition_residual: 4.4e-16,
                metrics: vec![std::f64::consts::PI],
            }],
        };
        let text = diagnostics_csv(&d, 2, &["x = 1".into()]);
        assert!(text.starts_with("# x = 1\nt,energy,vol_1,vol_2,lambda_norm,partition_residual,radius\n"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_diagnostics_csv(&text).unwrap(), d);
        let empty = Diagnostics::default();
        assert_eq!(diagnostics_csv(&empty, 2, &[]).lines().count(), 1);
    }
}
