//! Output formats: CSV matrices, plain PGM heatmaps and all-or-nothing
//! directory writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Rows joined by `,` with LF endings; values in round-trip `{:.16e}` form.
pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV written by [`matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad CSV value '{v}'")))
                })
                .collect()
        })
        .collect()
}

/// Time series with a header row; the first column is `t`.
pub fn series_csv(header: &[String], times: &[f64], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("t");
    for h in header {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        let _ = write!(out, "{t:.16e}");
        for v in row {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Plain (P2) grayscale image, one pixel per entry, 255 at the maximum.
/// The `# min` and `# max` comments carry the exact extrema.
pub fn matrix_pgm(rows: &[Vec<f64>]) -> String {
    let (min, max) = extrema(rows);
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut out = format!("P2\n# min {min:.16e}\n# max {max:.16e}\n{width} {height}\n255\n");
    for row in rows {
        let px: Vec<String> = row
            .iter()
            .map(|&v| {
                let level = if max > min { (v - min) / (max - min) * 255.0 } else { 0.0 };
                format!("{}", level.round() as u8)
            })
            .collect();
        out.push_str(&px.join(" "));
        out.push('\n');
    }
    out
}

pub fn extrema(rows: &[Vec<f64>]) -> (f64, f64) {
    rows.iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Lowercase hex SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every file or none: each goes to a temporary name first and is
/// renamed only after all writes succeeded.
pub fn write_all_or_nothing(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, bytes) {
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push(tmp);
    }
    for (tmp, (name, _)) in staged.iter().zip(files) {
        fs::rename(tmp, dir.join(name))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_bit_exactly() {
        let rows = vec![vec![1.0, -0.1, 1e-300], vec![std::f64::consts::PI, 0.0, 2.5e10]];
        let text = matrix_csv(&rows);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert_eq!(parse_matrix_csv(&text).unwrap(), rows);
    }

    #[test]
    fn pgm_annotations_match_extrema() {
        let rows = vec![vec![0.5, 1.0], vec![1.25, 0.75]];
        let pgm = matrix_pgm(&rows);
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(lines[0], "P2");
        let min: f64 = lines[1].trim_start_matches("# min ").parse().unwrap();
        let max: f64 = lines[2].trim_start_matches("# max ").parse().unwrap();
        assert_eq!((min, max), extrema(&rows));
        assert_eq!(lines[3], "2 2");
        assert_eq!(lines[5], "0 170");
        assert_eq!(lines[6], "255 85");
        // A flat matrix maps to black rather than dividing by zero.
        assert!(matrix_pgm(&[vec![1.0, 1.0]]).ends_with("0 0\n"));
    }

    #[test]
    fn series_has_header_and_time_column() {
        let s = series_csv(&["a".into(), "b".into()], &[0.0, 0.5], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,a,b");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5.0000000000000000e-1,"));
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            content_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writes_land_together() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        write_all_or_nothing(&out, &[("a.txt".into(), b"1".to_vec()), ("b.txt".into(), b"2".to_vec())]).unwrap();
        assert_eq!(fs::read_to_string(out.join("b.txt")).unwrap(), "2");
        let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
