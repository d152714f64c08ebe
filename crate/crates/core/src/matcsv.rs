//! CSV serialization for matrices: one file per matrix, row-major values at
//! 17 significant digits (enough for exact f64 round trips), preceded by a
//! header line naming the matrix and its dimensions:
//!
//! ```text
//! matrix,<name>,<rows>,<cols>
//! <row 0 values, comma separated>
//! ...
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Format one value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a matrix to the CSV format.
pub fn to_csv(name: &str, m: &DMatrix<f64>) -> Result<String> {
    if name.contains(',') || name.contains('\n') {
        return Err(Error::Parse(format!("matrix name {name:?} contains separators")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("matrix {name} contains non-finite values")));
    }
    let mut out = String::new();
    out.push_str(&format!("matrix,{},{},{}\n", name, m.nrows(), m.ncols()));
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format_value(m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Parse the CSV format back into a named matrix.
pub fn from_csv(text: &str) -> Result<(String, DMatrix<f64>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 4 || fields[0] != "matrix" {
        return Err(Error::Parse(format!("bad matrix header {header:?}")));
    }
    let name = fields[1].to_string();
    let rows: usize = fields[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad row count {:?}", fields[2])))?;
    let cols: usize = fields[3]
        .parse()
        .map_err(|_| Error::Parse(format!("bad column count {:?}", fields[3])))?;
    let mut values = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i >= rows {
            return Err(Error::Parse(format!("matrix {name} has more than {rows} rows")));
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value {s:?} in matrix {name}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "matrix {name} row {i} has {} values, expected {cols}",
                row.len()
            )));
        }
        values.extend(row);
    }
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "matrix {name} has {} values, expected {}",
            values.len(),
            rows * cols
        )));
    }
    Ok((name, DMatrix::from_row_slice(rows, cols, &values)))
}

/// Write a matrix file.
pub fn write_matrix(path: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, to_csv(name, m)?)?;
    Ok(())
}

/// Read a matrix file.
pub fn read_matrix(path: &Path) -> Result<(String, DMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    from_csv(&text)
}

/// Read a matrix file and check the recorded name.
pub fn read_named_matrix(path: &Path, expected: &str) -> Result<DMatrix<f64>> {
    let (name, m) = read_matrix(path)?;
    if name != expected {
        return Err(Error::Parse(format!(
            "expected matrix {expected:?} in {}, found {name:?}",
            path.display()
        )));
    }
    Ok(m)
}

/// Write a scalar as a decimal text file.
pub fn write_scalar(path: &Path, v: f64) -> Result<()> {
    fs::write(path, format!("{}\n", format_value(v)))?;
    Ok(())
}

/// Read a scalar text file.
pub fn read_scalar(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path)?;
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad scalar in {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_shape() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let text = to_csv("X0", &m).unwrap();
        assert!(text.starts_with("matrix,X0,2,3\n"));
        let (name, back) = from_csv(&text).unwrap();
        assert_eq!(name, "X0");
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(from_csv("").is_err());
        assert!(from_csv("matrix,X,2\n1,2\n").is_err());
        assert!(from_csv("matrix,X,1,2\n1\n").is_err());
        assert!(from_csv("matrix,X,1,2\n1,bad\n").is_err());
        assert!(from_csv("matrix,X,2,1\n1\n").is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_element(1, 1, f64::NAN);
        assert!(to_csv("X", &m).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in any::<u64>(),
        ) {
            // values spanning many magnitudes survive the 17-digit format
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                let exp: i32 = rng.random_range(-12..=12);
                let mant: f64 = rng.random_range(-1.0..=1.0);
                mant * 10f64.powi(exp)
            });
            let text = to_csv("T", &m).unwrap();
            let (_, back) = from_csv(&text).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
