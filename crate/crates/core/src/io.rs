//! Density files, frame output and run manifests. All formats are ASCII;
//! see `docs/formats.md`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::admm::{ResidualRecord, SolverConfig};
use crate::error::{Error, Result};
use crate::mesh::{normalize_density, DensityField, TriangleMesh};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Parses a density file without normalizing it: `delta:<vertex>`, a JSON
/// list, or one number per line (blank lines and `#` comments skipped).
/// A delta comes back as the indicator of the vertex.
pub fn parse_density_values(text: &str, n: usize) -> Result<Vec<f64>> {
    let trimmed = text.trim();
    let values: Vec<f64> = if let Some(rest) = trimmed.strip_prefix("delta:") {
        let v: usize = rest.trim().parse().map_err(|_| Error::Parse {
            line: 1,
            message: format!("bad vertex index in '{trimmed}'"),
        })?;
        if v >= n {
            return Err(Error::InvalidDensity(format!("delta vertex {v} out of range (mesh has {n})")));
        }
        let mut out = vec![0.0; n];
        out[v] = 1.0;
        out
    } else if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)?
    } else {
        let mut out = Vec::with_capacity(n);
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            out.push(line.parse::<f64>().map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?);
        }
        out
    };
    if values.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDensity(format!("entry {i} is {}", values[i])));
    }
    Ok(values)
}

/// Raw per-vertex values from a file, checked for count and sign.
pub fn read_density_values(path: impl AsRef<Path>, n: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_density_values(&text, n)
}

/// Reads and normalizes a density; `delta:7` gives `1 / |v_7|` at vertex 7.
pub fn load_density(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<DensityField> {
    let raw = read_density_values(path, mesh.num_vertices())?;
    normalize_density(mesh, &raw)
}

pub fn write_values(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(values.len() * 24);
    for v in values {
        text.push_str(&format!("{v:.16e}\n"));
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn frame_name(k: usize) -> String {
    format!("frame_{k:04}.txt")
}

/// Writes `frame_0000.txt, ...` into `dir` and returns the file names.
pub fn save_frames(dir: impl AsRef<Path>, frames: &[Vec<f64>]) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut names = Vec::with_capacity(frames.len());
    for (k, frame) in frames.iter().enumerate() {
        let name = frame_name(k);
        write_values(dir.join(&name), frame)?;
        names.push(name);
    }
    Ok(names)
}

pub fn write_residuals(path: impl AsRef<Path>, history: &[ResidualRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    let mut text = String::from("iteration,primal,dual,r\n");
    for h in history {
        text.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", h.iteration, h.primal, h.dual, h.penalty));
    }
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Absent for commands that build their own meshes.
    pub mesh: Option<PathBuf>,
    pub mesh_sha256: Option<String>,
    pub config: SolverConfig,
    /// Command-specific parameters (functional, step, seed, ...).
    #[serde(default)]
    pub parameters: serde_json::Value,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Option<String>,
    pub distance: Option<f64>,
    #[serde(default)]
    pub frames: Vec<String>,
    /// Other files written next to the manifest.
    #[serde(default)]
    pub extra_files: Vec<String>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}
