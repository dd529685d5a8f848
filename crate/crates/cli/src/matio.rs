//! Plain-text complex matrix interchange format.
//!
//! First line: `rows cols`. Then the entries in row-major order as
//! whitespace-separated `re im` pairs; writers emit one matrix row per line
//! with 17 significant digits, so `f64` values round-trip exactly. Vectors
//! are `n x 1` matrices.

use kmimo_core::Mat;
use num_complex::Complex64;

use crate::CliError;

pub fn parse_matrix(text: &str) -> Result<Mat, CliError> {
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| CliError::Config("empty matrix file".into()))?
        .parse()
        .map_err(|e| CliError::Config(format!("bad row count: {e}")))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| CliError::Config("matrix file missing column count".into()))?
        .parse()
        .map_err(|e| CliError::Config(format!("bad column count: {e}")))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = next_value(&mut tokens)?;
        let im: f64 = next_value(&mut tokens)?;
        if !re.is_finite() || !im.is_finite() {
            return Err(CliError::Config("matrix entries must be finite".into()));
        }
        entries.push(Complex64::new(re, im));
    }
    if tokens.next().is_some() {
        return Err(CliError::Config("trailing data after matrix entries".into()));
    }
    Ok(Mat::from_row_major(rows, cols, &entries))
}

fn next_value(tokens: &mut std::str::SplitWhitespace) -> Result<f64, CliError> {
    tokens
        .next()
        .ok_or_else(|| CliError::Config("matrix file ended early".into()))?
        .parse()
        .map_err(|e| CliError::Config(format!("bad matrix entry: {e}")))
}

pub fn parse_vector(text: &str) -> Result<Vec<Complex64>, CliError> {
    let m = parse_matrix(text)?;
    if m.cols() != 1 {
        return Err(CliError::Config(format!(
            "expected an n x 1 vector, got {} x {}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.col(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn format_matrix(m: &Mat) -> String {
        let mut out = format!("{} {}\n", m.rows(), m.cols());
        for i in 0..m.rows() {
            let mut line = String::new();
            for j in 0..m.cols() {
                let z = m[(i, j)];
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:.16e} {:.16e}", z.re, z.im));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    #[test]
    fn round_trip_is_exact() {
        let m = Mat::from_fn(3, 2, |i, j| {
            Complex64::new(
                (i as f64 + 0.1) / 3.0 + 1e-17,
                -((j as f64 + 7.3) / 11.0),
            )
        });
        let text = format_matrix(&m);
        let back = parse_matrix(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2 2\n1 0 0 1").is_err()); // too few entries
        assert!(parse_matrix("1 1\n1 0 3 4").is_err()); // trailing data
        assert!(parse_vector("1 2\n1 0 0 1").is_err()); // not a column
    }
}
