//! Plain-text edge lists (`n m` header, then `i j w` per line, 0-based) and
//! label files (one integer per line).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Edge, Graph, LabelVector};
use crate::error::{invalid, Error, Result};

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", g.n(), g.edge_count())?;
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.i, e.j, e.w)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an edge list. Each undirected edge may appear in one or both
/// orientations; a pair listed twice with different weights, or twice in the
/// same orientation, is rejected.
pub fn read_edge_list<R: BufRead>(input: R) -> Result<Graph> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `n m` header".into(),
    })?;
    let header = header?;
    let mut fields = header.split_whitespace();
    let n: usize = parse_field(fields.next(), hline, "n")?;
    let m: usize = parse_field(fields.next(), hline, "m")?;
    if fields.next().is_some() {
        return Err(parse_err(hline, "header must be exactly `n m`"));
    }

    let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
    let mut edges = Vec::new();
    let mut count = 0;
    for (lineno, line) in lines {
        let line = line?;
        let mut f = line.split_whitespace();
        let a: usize = parse_field(f.next(), lineno, "i")?;
        let b: usize = parse_field(f.next(), lineno, "j")?;
        let w: f64 = parse_field(f.next(), lineno, "w")?;
        if f.next().is_some() {
            return Err(parse_err(lineno, "expected `i j w`"));
        }
        count += 1;
        if a >= n || b >= n {
            return Err(parse_err(lineno, format!("node index out of range for n = {n}")));
        }
        if a == b {
            return Err(parse_err(lineno, "self-loop"));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(parse_err(lineno, format!("weight {w} must be positive")));
        }
        if seen.contains_key(&(a, b)) {
            return Err(parse_err(lineno, format!("edge ({a}, {b}) listed twice")));
        }
        seen.insert((a, b), w);
        match seen.get(&(b, a)) {
            Some(&mirror) if mirror != w => {
                return Err(parse_err(
                    lineno,
                    format!("asymmetric duplicate: ({b}, {a}) has weight {mirror}, ({a}, {b}) has {w}"),
                ));
            }
            Some(_) => {}
            None => {
                let (i, j) = if a < b { (a, b) } else { (b, a) };
                edges.push(Edge { i, j, w });
            }
        }
    }
    if count != m {
        return Err(invalid(format!("header declares {m} edge lines, found {count}")));
    }
    edges.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
    Ok(Graph::from_canonical(n, edges))
}

pub fn write_labels<W: Write>(labels: &LabelVector, mut out: W) -> Result<()> {
    for &l in labels.as_slice() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads one label per line; `k` is the number of classes they index.
pub fn read_labels<R: BufRead>(input: R, k: usize) -> Result<LabelVector> {
    let mut labels = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(t.parse().map_err(|e| parse_err(i + 1, format!("label: {e}")))?);
    }
    LabelVector::new(labels, k)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let s = field.ok_or_else(|| parse_err(line, format!("missing field `{name}`")))?;
    s.parse()
        .map_err(|e| parse_err(line, format!("field `{name}` = {s:?}: {e}")))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
