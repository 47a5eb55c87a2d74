//! ASCII file formats: one point per line (space-separated decimals), one
//! `u v` edge pair per line. Lines starting with `#` are comments.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use super::AppError;

pub fn write_points(w: impl Write, points: &[f64], dim: usize) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for row in points.chunks(dim) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}

/// Reads points; the dimension is taken from the first data line.
pub fn read_points(r: impl Read) -> Result<(Vec<f64>, usize), AppError> {
    let mut points = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    AppError::Parse(format!("line {}: bad coordinate `{t}`", lineno + 1))
                })
            })
            .collect::<Result<_, _>>()?;
        if dim == 0 {
            dim = row.len();
        } else if row.len() != dim {
            return Err(AppError::Parse(format!(
                "line {}: expected {dim} coordinates, got {}",
                lineno + 1,
                row.len()
            )));
        }
        points.extend(row);
    }
    Ok((points, dim))
}

pub fn write_edges(w: impl Write, edges: &[(u32, u32)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for &(u, v) in edges {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()
}

/// Reads 0-based `u v` pairs.
pub fn read_edges(r: impl Read) -> Result<Vec<(u32, u32)>, AppError> {
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |t: Option<&str>| -> Result<u32, AppError> {
            t.and_then(|t| t.parse().ok()).ok_or_else(|| {
                AppError::Parse(format!("line {}: expected `u v`", lineno + 1))
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        edges.push((u, v));
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_roundtrip_with_comments() {
        let mut buf = Vec::new();
        write_points(&mut buf, &[1.5, -2.0, 0.25, 3.0], 2).unwrap();
        let text = format!("# generated\n{}", String::from_utf8(buf).unwrap());
        let (points, dim) = read_points(text.as_bytes()).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(points, vec![1.5, -2.0, 0.25, 3.0]);
    }

    #[test]
    fn edges_roundtrip() {
        let mut buf = Vec::new();
        write_edges(&mut buf, &[(0, 1), (5, 2)]).unwrap();
        let edges = read_edges(&buf[..]).unwrap();
        assert_eq!(edges, vec![(0, 1), (5, 2)]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(read_points("1 2\n3\n".as_bytes()).is_err());
    }
}
