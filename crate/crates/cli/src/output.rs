//! Deterministic CSV and JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use vesselkit_core::pdecheck::{Grid, MatrixField, ScalarField};

/// Fixed 17-significant-digit formatting; non-finite values become `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

fn push_complex(line: &mut String, z: Complex64, valid: bool) {
    if valid && z.re.is_finite() && z.im.is_finite() {
        let _ = write!(line, ",{},{}", fmt_f64(z.re), fmt_f64(z.im));
    } else {
        line.push_str(",nan,nan");
    }
}

fn coords(line: &mut String, g: &Grid, k: usize) {
    let (x, t) = g.coords(k);
    let _ = write!(line, "{},{}", fmt_f64(x), fmt_f64(t));
}

pub fn scalar_csv(f: &ScalarField) -> String {
    let mut out = String::from("x,t,re,im\n");
    for k in 0..f.grid.len() {
        coords(&mut out, &f.grid, k);
        push_complex(&mut out, f.values[k], f.mask[k]);
        out.push('\n');
    }
    out
}

/// Matrix field with columns `re00,im00,re01,im01,...` in row-major entry order.
pub fn matrix_csv(f: &MatrixField) -> String {
    let mut out = String::from("x,t");
    for i in 0..f.rows {
        for j in 0..f.cols {
            let _ = write!(out, ",re{i}{j},im{i}{j}");
        }
    }
    out.push('\n');
    for k in 0..f.grid.len() {
        coords(&mut out, &f.grid, k);
        for i in 0..f.rows {
            for j in 0..f.cols {
                push_complex(&mut out, f.values[k][(i, j)], f.mask[k]);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

pub fn json_text<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use vesselkit_core::matcore::c64;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::INFINITY), "nan");
    }

    #[test]
    fn masked_nodes_are_nan() {
        let g = Grid::new(0.0, 0.0, 1.0, 1.0, 7, 7).unwrap();
        let mut f = ScalarField::constant(g, c64(1.0, 2.0));
        f.mask[1] = false;
        let csv = scalar_csv(&f);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,t,re,im");
        assert_eq!(lines.len(), 50);
        assert!(lines[1].ends_with(",1.0000000000000000e0,2.0000000000000000e0"));
        assert!(lines[2].ends_with(",nan,nan"));
        assert!(lines[2].starts_with("1.0000000000000000e0,0.0000000000000000e0"));
    }
}
