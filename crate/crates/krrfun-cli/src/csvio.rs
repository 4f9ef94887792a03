//! Minimal CSV handling: comma-separated, mandatory header row, "." decimal
//! separator, shortest round-trip float formatting on output.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::CliError;

/// Read a dataset CSV: feature columns followed by one response column.
/// Errors carry 1-based line numbers (the header is line 1).
pub fn read_xy(path: &Path) -> Result<(Array2<f64>, Array1<f64>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?;
    let ncols = header.split(',').count();
    if ncols < 2 {
        return Err(CliError::Data(format!(
            "{}: header has {ncols} column(s); need at least one feature and a response",
            path.display()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(CliError::Data(format!(
                "{}: line {lineno}: expected {ncols} fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(ncols);
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {lineno}: non-numeric value {:?} in column {}",
                    path.display(),
                    field.trim(),
                    col + 1
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let n = rows.len();
    let d = ncols - 1;
    let xs = Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]);
    let ys = Array1::from_shape_fn(n, |i| rows[i][d]);
    Ok((xs, ys))
}

/// Read a two-column (x, h(x)) table for L2 weight functions.
pub fn read_h_table(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let (xs, hs) = read_xy(path)?;
    if xs.ncols() != 1 {
        return Err(CliError::Data(format!(
            "{}: weight table must have exactly two columns (x, h)",
            path.display()
        )));
    }
    let mut table: Vec<(f64, f64)> = (0..xs.nrows()).map(|i| (xs[[i, 0]], hs[i])).collect();
    table.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite table abscissae"));
    if table.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(CliError::Data(format!(
            "{}: duplicate abscissa in weight table",
            path.display()
        )));
    }
    if table.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: weight table needs at least two rows",
            path.display()
        )));
    }
    Ok(table)
}

/// Piecewise-linear interpolation through a sorted table, constant beyond
/// the ends.
pub fn interp(table: &[(f64, f64)], x: f64) -> f64 {
    match table.binary_search_by(|probe| probe.0.partial_cmp(&x).expect("finite abscissae")) {
        Ok(i) => table[i].1,
        Err(0) => table[0].1,
        Err(i) if i == table.len() => table[table.len() - 1].1,
        Err(i) => {
            let (x0, y0) = table[i - 1];
            let (x1, y1) = table[i];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

/// Write a CSV document; `comments` become leading `# `-prefixed lines.
pub fn write_csv(
    path: &Path,
    comments: &[String],
    header: &str,
    rows: &[String],
) -> Result<(), CliError> {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Shortest round-trip decimal form of a float, with a trailing `.0` on
/// integral values so the column stays visibly floating-point.
pub fn fmt_f64(v: f64) -> String {
    let mut s = v.to_string();
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}
