//! ASCII OFF and OBJ readers.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Raw polygon soup as read from disk, before validation.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    /// OBJ `l` records, split into consecutive segments.
    pub segments: Vec<[usize; 2]>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("expected a number, found {tok:?}")))
}

pub fn parse_off(text: &str) -> Result<RawMesh> {
    // tokens paired with their 1-based line numbers, comments stripped
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(parse_err(line_no, "missing OFF header"));
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (counts_line, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (n, l) = lines.next().ok_or_else(|| parse_err(line_no, "missing counts line"))?;
        (n, l.split_whitespace().collect())
    } else {
        (line_no, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(counts_line, "counts line needs vertex and face counts"));
    }
    let parse_count = |tok: &str| {
        tok.parse::<usize>().map_err(|_| parse_err(counts_line, format!("bad count {tok:?}")))
    };
    let nv = parse_count(counts[0])?;
    let nf = parse_count(counts[1])?;

    let mut raw = RawMesh::default();
    raw.vertices.reserve(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| parse_err(counts_line, "truncated vertex list"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(n, "vertex needs three coordinates"));
        }
        raw.vertices.push([parse_f64(toks[0], n)?, parse_f64(toks[1], n)?, parse_f64(toks[2], n)?]);
    }
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| parse_err(counts_line, "truncated face list"))?;
        let mut toks = l.split_whitespace();
        let arity: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(n, "face line must start with a vertex count"))?;
        let idx: Vec<usize> = toks
            .take(arity)
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(n, format!("bad index {t:?}"))))
            .collect::<Result<_>>()?;
        if idx.len() != arity {
            return Err(parse_err(n, "face has fewer indices than declared"));
        }
        raw.faces.push(idx);
    }
    Ok(raw)
}

fn obj_index(tok: &str, count: usize, line: usize) -> Result<usize> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head.parse().map_err(|_| parse_err(line, format!("bad index {tok:?}")))?;
    let resolved = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || resolved < 0 {
        return Err(parse_err(line, format!("invalid index {i}")));
    }
    Ok(resolved as usize)
}

pub fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut raw = RawMesh::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_err(n, "vertex needs three coordinates"));
                }
                raw.vertices.push([parse_f64(c[0], n)?, parse_f64(c[1], n)?, parse_f64(c[2], n)?]);
            }
            Some("f") => {
                let count = raw.vertices.len();
                let idx = toks.map(|t| obj_index(t, count, n)).collect::<Result<Vec<_>>>()?;
                raw.faces.push(idx);
            }
            Some("l") => {
                let count = raw.vertices.len();
                let idx = toks.map(|t| obj_index(t, count, n)).collect::<Result<Vec<_>>>()?;
                raw.segments.extend(idx.windows(2).map(|w| [w[0], w[1]]));
            }
            _ => {}
        }
    }
    Ok(raw)
}

pub fn read_raw(path: &Path, format: MeshFormat) -> Result<RawMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

pub fn write_off(path: &Path, vertices: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "OFF\n{} {} 0", vertices.len(), faces.len());
    for p in vertices {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
