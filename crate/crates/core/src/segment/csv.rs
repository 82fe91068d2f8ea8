//! Path dumps: `t,x_1,...,x_d`, one row per grid time. Floats are written in
//! Rust's shortest round-trip form, so a dump re-reads bit-exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::PathBuffer;

pub fn write_path_csv<W: Write>(path: &PathBuffer, prefix: &str, mut out: W) -> Result<()> {
    write_path_rows(path, prefix, 0, path.len(), &mut out)
}

/// Writes rows `[from, to)` (absolute indices) with the given column prefix (`x` or `w`).
pub fn write_path_rows<W: Write>(
    path: &PathBuffer,
    prefix: &str,
    from: usize,
    to: usize,
    out: &mut W,
) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=path.dim()).map(|i| format!("{prefix}_{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in from..to {
        write!(out, "{}", path.time_of_row(i))?;
        for v in path.row(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Generic table writer used for traces and tail curves.
pub fn write_rows_csv<W: Write>(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>, mut out: W) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads a dump written by [`write_path_csv`]. The first row must sit at `t = -r < 0`.
pub fn read_path_csv<R: BufRead>(input: R) -> Result<PathBuffer> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty path file".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Parse(format!("bad header `{header}`")));
    }
    let d = cols.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse(format!("line {}: expected {} fields", lineno + 2, d + 1)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            values.push(parse(f)?);
        }
    }
    let t0 = *times.first().ok_or_else(|| Error::Parse("no data rows".into()))?;
    if !(t0 < 0.0) {
        return Err(Error::Parse("first row must be at a negative time -r".into()));
    }
    let lag = times
        .iter()
        .position(|&t| t >= -0.5 * (times[1] - t0).abs())
        .ok_or_else(|| Error::Parse("path never reaches t = 0".into()))?;
    if lag == 0 {
        return Err(Error::Parse("path has no memory rows".into()));
    }
    let r = -t0;
    PathBuffer::from_rows(r, r / lag as f64, d, values)
}
