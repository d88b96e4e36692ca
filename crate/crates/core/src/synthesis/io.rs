//! On-disk layout of a generated sequence:
//!
//! - `frame_0000.pgm` ... 16-bit binary PGM, one per frame
//! - `truth.csv` with columns `frame,x,y,vx,vy,I0`
//! - `scene.txt`, key=value scene parameters plus the per-frame PGM scale
//!
//! Frames holding integer counts in `[0, 65535]` are stored with scale 1 and round-trip
//! exactly. Anything else is scaled so its maximum maps to 65535.

use std::fs;
use std::path::{Path, PathBuf};

use ini::Ini;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, NoiseModel, SceneConfig, Sequence};
use crate::error::{Error, Result};
use crate::imaging::{ImageFrame, PsfParams};
use crate::state::{DynamicsParams, StateVector};

pub const TRUTH_FILE: &str = "truth.csv";
pub const SCENE_FILE: &str = "scene.txt";

pub fn frame_file_name(k: usize) -> String {
    format!("frame_{k:04}.pgm")
}

fn pgm_scale(frame: &ImageFrame) -> f64 {
    let px = frame.pixels();
    let counts = px.iter().all(|&v| (0.0..=65535.0).contains(&v) && v.fract() == 0.0);
    let max = px.iter().cloned().fold(0.0, f64::max);
    if counts || max <= 0.0 {
        1.0
    } else {
        65535.0 / max
    }
}

/// Writes `frame * scale` (rounded, clamped to u16) as binary 16-bit PGM and returns the scale used.
pub fn write_pgm(path: &Path, frame: &ImageFrame) -> Result<f64> {
    let scale = pgm_scale(frame);
    let mut out = format!("P5\n{} {}\n65535\n", frame.width(), frame.height()).into_bytes();
    out.reserve(2 * frame.pixels().len());
    for &v in frame.pixels() {
        out.extend_from_slice(&((v * scale).round().clamp(0.0, 65535.0) as u16).to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    Ok(scale)
}

/// Header fields of a binary PGM: whitespace-separated tokens, `#` comments to end of line.
fn pgm_header(bytes: &[u8], path: &Path) -> Result<([usize; 3], usize)> {
    let mut fields = [0usize; 3];
    let mut pos = 2;
    if !bytes.starts_with(b"P5") {
        return Err(Error::format(path, "not a binary PGM (P5)"));
    }
    for f in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(path, "truncated PGM header"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(path, "truncated PGM header"));
    }
    Ok((fields, pos + 1))
}

/// Reads a PGM written by [`write_pgm`], dividing by `scale`. 8-bit files are accepted too.
pub fn read_pgm(path: &Path, scale: f64) -> Result<ImageFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ([w, h, maxval], start) = pgm_header(&bytes, path)?;
    let depth = match maxval {
        1..=255 => 1,
        256..=65535 => 2,
        _ => return Err(Error::format(path, format!("unsupported maxval {maxval}"))),
    };
    let raster = &bytes[start..];
    if raster.len() != w * h * depth {
        return Err(Error::format(
            path,
            format!("expected {} raster bytes, found {}", w * h * depth, raster.len()),
        ));
    }
    let pixels = raster
        .chunks_exact(depth)
        .map(|c| {
            let v = if depth == 2 { u16::from_be_bytes([c[0], c[1]]) } else { c[0] as u16 };
            v as f64 / scale
        })
        .collect();
    ImageFrame::new(w, h, pixels)
}

#[derive(Serialize, Deserialize)]
struct TruthRow {
    frame: usize,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    #[serde(rename = "I0")]
    i0: f64,
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for (frame, s) in truth.states.iter().enumerate() {
        w.serialize(TruthRow {
            frame,
            x: s.x,
            y: s.y,
            vx: s.vx,
            vy: s.vy,
            i0: s.intensity,
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut states = Vec::new();
    for (k, row) in r.deserialize::<TruthRow>().enumerate() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        if row.frame != k {
            return Err(Error::format(path, format!("expected frame {k}, found {}", row.frame)));
        }
        states.push(StateVector::new(row.x, row.y, row.vx, row.vy, row.i0));
    }
    Ok(GroundTruth { states })
}

fn scene_ini(cfg: &SceneConfig, scales: &[f64]) -> Ini {
    let (noise, read) = match cfg.noise {
        NoiseModel::None => ("none", 0.0),
        NoiseModel::Poisson { read_noise_std } => ("poisson", read_noise_std),
    };
    let mut ini = Ini::new();
    ini.with_section(Some("scene"))
        .set("frames", cfg.frames.to_string())
        .set("width", cfg.width.to_string())
        .set("height", cfg.height.to_string())
        .set("sigma_psf", cfg.psf.sigma_psf.to_string())
        .set("i_bg", cfg.psf.i_bg.to_string())
        .set("snr", cfg.snr.to_string())
        .set("speed_min", cfg.speed_range.0.to_string())
        .set("speed_max", cfg.speed_range.1.to_string())
        .set("margin", cfg.margin.to_string())
        .set("sigma_pos", cfg.dynamics.sigma_pos.to_string())
        .set("sigma_vel", cfg.dynamics.sigma_vel.to_string())
        .set("sigma_int", cfg.dynamics.sigma_int.to_string())
        .set("dt", cfg.dynamics.dt.to_string())
        .set("noise", noise)
        .set("read_noise_std", read.to_string())
        .set("seed", cfg.seed.to_string());
    let mut s = ini.with_section(Some("scales"));
    for (k, scale) in scales.iter().enumerate() {
        s.set(k.to_string(), scale.to_string());
    }
    ini
}

fn get<T: std::str::FromStr>(ini: &Ini, path: &Path, section: &str, key: &str) -> Result<T> {
    let raw = ini
        .get_from(Some(section), key)
        .ok_or_else(|| Error::format(path, format!("missing [{section}] {key}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("bad value for {key}: {raw:?}")))
}

fn parse_scene(ini: &Ini, path: &Path) -> Result<(SceneConfig, Vec<f64>)> {
    let g = |k: &str| get::<f64>(ini, path, "scene", k);
    let u = |k: &str| get::<usize>(ini, path, "scene", k);
    let noise = match get::<String>(ini, path, "scene", "noise")?.as_str() {
        "none" => NoiseModel::None,
        "poisson" => NoiseModel::Poisson {
            read_noise_std: g("read_noise_std")?,
        },
        other => return Err(Error::format(path, format!("unknown noise model {other:?}"))),
    };
    let cfg = SceneConfig {
        frames: u("frames")?,
        width: u("width")?,
        height: u("height")?,
        psf: PsfParams {
            sigma_psf: g("sigma_psf")?,
            i_bg: g("i_bg")?,
        },
        snr: g("snr")?,
        speed_range: (g("speed_min")?, g("speed_max")?),
        margin: u("margin")?,
        dynamics: DynamicsParams {
            sigma_pos: g("sigma_pos")?,
            sigma_vel: g("sigma_vel")?,
            sigma_int: g("sigma_int")?,
            dt: g("dt")?,
        },
        noise,
        seed: get(ini, path, "scene", "seed")?,
    };
    let scales = (0..cfg.frames)
        .map(|k| get::<f64>(ini, path, "scales", &k.to_string()))
        .collect::<Result<Vec<_>>>()?;
    Ok((cfg, scales))
}

/// Writes frames, truth and scene parameters into `dir`, creating it if needed.
pub fn write_sequence(dir: &Path, seq: &Sequence) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scales = seq
        .frames
        .iter()
        .enumerate()
        .map(|(k, f)| write_pgm(&dir.join(frame_file_name(k)), f))
        .collect::<Result<Vec<_>>>()?;
    write_truth(&dir.join(TRUTH_FILE), &seq.truth)?;
    let scene: PathBuf = dir.join(SCENE_FILE);
    scene_ini(&seq.config, &scales)
        .write_to_file(&scene)
        .map_err(|e| Error::io(&scene, e))
}

pub fn read_sequence(dir: &Path) -> Result<Sequence> {
    let scene = dir.join(SCENE_FILE);
    let ini = Ini::load_from_file(&scene).map_err(|e| Error::format(&scene, e.to_string()))?;
    let (config, scales) = parse_scene(&ini, &scene)?;
    let truth = read_truth(&dir.join(TRUTH_FILE))?;
    if truth.len() != config.frames {
        return Err(Error::format(
            dir.join(TRUTH_FILE),
            format!("{} truth rows for {} frames", truth.len(), config.frames),
        ));
    }
    let frames = scales
        .iter()
        .enumerate()
        .map(|(k, &s)| read_pgm(&dir.join(frame_file_name(k)), s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence { config, truth, frames })
}
