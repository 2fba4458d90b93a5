//! Plain-text graph files.
//!
//! * features: one node per line, whitespace-separated reals
//! * edges: one undirected edge per line, `src dst`, 0-based
//! * labels: one node per line, `label split`, label an integer or `-`
//!
//! Blank lines are ignored. Reals are written with the shortest
//! representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{AttributedGraph, NodeId, Split};
use crate::error::{Error, Result};

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(path, e))))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty())))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (lineno, line) in lines(path)? {
        let line = line?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad real {tok:?}")))?;
            data.push(v);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected {expected} values, found {w}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Array2::from_shape_vec((rows, width), data).map_err(|e| Error::Shape(e.to_string()))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(NodeId, NodeId)>> {
    let mut edges = Vec::new();
    for (lineno, line) in lines(path)? {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, lineno, "expected `src dst`"));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("bad node id {t:?}")))
        };
        let (u, v) = (parse(toks[0])?, parse(toks[1])?);
        if u >= n || v >= n {
            return Err(parse_err(
                path,
                lineno,
                format!("endpoint out of range for {n} nodes"),
            ));
        }
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop on node {u}")));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_labels(path: &Path) -> Result<(Vec<Option<usize>>, Vec<Split>)> {
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for (lineno, line) in lines(path)? {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, lineno, "expected `label split`"));
        }
        let label = match toks[0] {
            "-" => None,
            t => Some(
                t.parse::<usize>()
                    .map_err(|_| parse_err(path, lineno, format!("bad label {t:?}")))?,
            ),
        };
        let tag = toks[1]
            .parse::<Split>()
            .map_err(|m| parse_err(path, lineno, m))?;
        if tag == Split::Train && label.is_none() {
            return Err(parse_err(path, lineno, "train node without label"));
        }
        labels.push(label);
        split.push(tag);
    }
    Ok((labels, split))
}

/// Reads and validates a graph from the three text files.
pub fn load_graph(
    features_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<AttributedGraph> {
    let features = read_features(features_path.as_ref())?;
    let (labels, split) = read_labels(labels_path.as_ref())?;
    if labels.len() != features.nrows() {
        return Err(Error::InvalidGraph(format!(
            "{} attribute rows but {} label rows",
            features.nrows(),
            labels.len()
        )));
    }
    let edges = read_edges(edges_path.as_ref(), features.nrows())?;
    AttributedGraph::new(features, edges, labels, split)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `edges` one per line as `src dst`.
pub fn write_edges(path: impl AsRef<Path>, edges: &[(NodeId, NodeId)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (u, v) in edges {
        writeln!(w, "{u} {v}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_graph(
    g: &AttributedGraph,
    features_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let path = features_path.as_ref();
    let mut w = create(path)?;
    for row in g.features().rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b" ").map_err(|e| Error::io(path, e))?;
            }
            first = false;
            write!(w, "{v}").map_err(|e| Error::io(path, e))?;
        }
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    write_edges(edges_path, g.edges())?;

    let path = labels_path.as_ref();
    let mut w = create(path)?;
    for (label, tag) in g.labels().iter().zip(g.splits()) {
        match label {
            Some(c) => writeln!(w, "{c} {tag}"),
            None => writeln!(w, "- {tag}"),
        }
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
