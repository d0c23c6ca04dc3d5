//! Plain-text graph formats.
//!
//! * Edge list: one `i j [w]` per line, whitespace or comma separated, 1-based
//!   node indices, `#` starts a comment. A `# nodes N` comment fixes the node
//!   count so trailing isolated nodes survive a round trip.
//! * Dense CSV: `n` rows of `n` integers.
//! * Weighted CSV: `n` rows of `n` reals (raw weights before thresholding).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Assignment, BuildReport, EdgeMode, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Edgelist,
    Dense,
    Weighted,
}

/// Result of [`load_graph`]: weighted CSV files stay as raw matrices.
#[derive(Debug, Clone)]
pub enum Loaded {
    Graph(Graph, BuildReport),
    Weights(DMatrix<f64>),
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn declared_nodes(line: &str) -> Option<usize> {
    let rest = line.trim_start().strip_prefix('#')?.trim();
    let rest = rest.strip_prefix("nodes")?;
    rest.trim_start_matches([':', '=', ' ']).trim().parse().ok()
}

pub fn read_edgelist<R: Read>(reader: R, mode: EdgeMode, n: Option<usize>) -> Result<(Graph, BuildReport)> {
    let mut declared = n;
    let mut edges = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_number = lineno + 1;
        if declared.is_none() {
            declared = declared_nodes(&line);
        }
        let body = strip_comment(&line);
        let parts: Vec<&str> = fields(body).collect();
        if parts.is_empty() {
            continue;
        }
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::Parse {
                line: line_number,
                message: format!("expected `i j [w]`, found {} fields", parts.len()),
            });
        }
        let parse_index = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| Error::Parse {
                line: line_number,
                message: format!("invalid node index `{s}`"),
            })?;
            if v == 0 {
                return Err(Error::Parse {
                    line: line_number,
                    message: "node indices are 1-based".into(),
                });
            }
            Ok(v)
        };
        let i = parse_index(parts[0])?;
        let j = parse_index(parts[1])?;
        let w = match parts.get(2) {
            None => 1,
            Some(s) => parse_weight(s, line_number)?,
        };
        if let Some(limit) = declared {
            for v in [i, j] {
                if v > limit {
                    return Err(Error::NodeOutOfRange {
                        index: v,
                        n: limit,
                        line: line_number,
                    });
                }
            }
        }
        max_index = max_index.max(i).max(j);
        edges.push((i - 1, j - 1, w));
    }
    let n = declared.unwrap_or(max_index);
    let (g, report) = Graph::from_edges(n, mode, edges)?;
    if report.self_loops_dropped > 0 {
        warn!("dropped {} self-loop(s)", report.self_loops_dropped);
    }
    if report.duplicates > 0 {
        warn!(
            "{} duplicate edge(s) {}",
            report.duplicates,
            match mode {
                EdgeMode::Binary => "collapsed",
                EdgeMode::Counts => "summed",
            }
        );
    }
    Ok((g, report))
}

fn parse_weight(s: &str, line: usize) -> Result<u32> {
    if let Ok(v) = s.parse::<u32>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(v as u32),
        _ => Err(Error::Parse {
            line,
            message: format!("edge weight `{s}` is not a nonnegative integer"),
        }),
    }
}

fn read_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let body = strip_comment(&line);
        let parts: Vec<&str> = fields(body).collect();
        if parts.is_empty() {
            continue;
        }
        let row = parts
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("invalid number `{s}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n > 0 && rows[0].len() != n {
        return Err(Error::InvalidInput(format!(
            "matrix must be square, got {}x{}",
            n,
            rows[0].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Dense adjacency. Nonzero diagonal entries are dropped with a warning.
pub fn read_dense<R: Read>(reader: R, mode: EdgeMode) -> Result<(Graph, BuildReport)> {
    let m = read_matrix(reader)?;
    let n = m.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "adjacency entry {v} at ({}, {}) is not a nonnegative integer",
                    i + 1,
                    j + 1
                )));
            }
            if v != m[(j, i)] {
                return Err(Error::InvalidInput(format!(
                    "adjacency not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            if mode == EdgeMode::Binary && v > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "binary adjacency has entry {v} at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            if j >= i && v > 0.0 {
                edges.push((i, j, v as u32));
            }
        }
    }
    let (g, report) = Graph::from_edges(n, mode, edges)?;
    if report.self_loops_dropped > 0 {
        warn!("dropped {} self-loop(s) from the diagonal", report.self_loops_dropped);
    }
    Ok((g, report))
}

pub fn read_weighted<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    read_matrix(reader)
}

pub fn load_graph(path: &Path, format: GraphFormat, mode: EdgeMode) -> Result<Loaded> {
    let file = fs::File::open(path)?;
    Ok(match format {
        GraphFormat::Edgelist => {
            let (g, r) = read_edgelist(file, mode, None)?;
            Loaded::Graph(g, r)
        }
        GraphFormat::Dense => {
            let (g, r) = read_dense(file, mode)?;
            Loaded::Graph(g, r)
        }
        GraphFormat::Weighted => Loaded::Weights(read_weighted(file)?),
    })
}

pub fn write_edgelist<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    writeln!(out, "# nodes {}", g.n())?;
    for (i, j, w) in g.edges() {
        match g.mode() {
            EdgeMode::Binary => writeln!(out, "{} {}", i + 1, j + 1)?,
            EdgeMode::Counts => writeln!(out, "{} {} {}", i + 1, j + 1, w)?,
        }
    }
    Ok(())
}

pub fn write_dense<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    for i in 0..g.n() {
        let row: Vec<String> = (0..g.n()).map(|j| g.entry(i, j).to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_weighted<W: Write>(w: &DMatrix<f64>, mut out: W) -> Result<()> {
    for i in 0..w.nrows() {
        let row: Vec<String> = (0..w.ncols()).map(|j| w[(i, j)].to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// One 1-based label per line.
pub fn write_labels<W: Write>(z: &Assignment, mut out: W) -> Result<()> {
    for l in z.one_based() {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Assignment> {
    let mut labels = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let body = strip_comment(&line).trim();
        if body.is_empty() {
            continue;
        }
        labels.push(body.parse::<usize>().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("invalid label `{body}`"),
        })?);
    }
    Assignment::from_one_based(&labels)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
