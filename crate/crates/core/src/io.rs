//! File formats: field CSV, raw little-endian binary with a JSON sidecar,
//! σ tables, ε-scan reports and optimizer traces.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{SurfaceTensionTable, TableEntry};
use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid, ScalarField};
use crate::gamma::ScanReport;
use crate::optimize::TraceRow;

/// Significant digits used for printed reals unless configured otherwise.
pub const DEFAULT_PRECISION: usize = 12;

/// Rounds `x` to `digits` significant digits and prints the shortest decimal
/// that reads back to the rounded value, in exponent form outside `[1e-5, 1e16)`.
pub fn format_real(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap();
    let mag = rounded.abs();
    if (1e-5..1e16).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn field_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["i", "value"]
    } else {
        vec!["i", "j", "value"]
    }
}

/// One row per cell: index coordinates then value.
pub fn write_field_csv(path: &Path, f: &ScalarField, digits: usize) -> Result<()> {
    let g = f.grid();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(field_header(g.dim()))?;
    for (c, v) in f.values().iter().enumerate() {
        let idx = g.unravel(c);
        let mut rec: Vec<String> = (0..g.dim()).map(|a| idx[a].to_string()).collect();
        rec.push(format_real(*v, digits));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field CSV onto `grid`; every cell must appear exactly once.
pub fn read_field_csv(path: &Path, grid: &Grid, kind: FieldKind) -> Result<ScalarField> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let want = field_header(grid.dim());
    if header != want {
        return Err(Error::InvalidField(format!("{}: expected columns {want:?}, found {header:?}", path.display())));
    }
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_idx = |k: usize| -> Result<usize> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidField(format!("{}: bad index on row {}", path.display(), line + 1)))
        };
        let mut idx = [0usize; 2];
        for (a, slot) in idx.iter_mut().enumerate().take(grid.dim()) {
            *slot = parse_idx(a)?;
            if *slot >= grid.cells()[a] {
                return Err(Error::InvalidField(format!("{}: index out of range on row {}", path.display(), line + 1)));
            }
        }
        let v: f64 = rec
            .get(grid.dim())
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidField(format!("{}: bad value on row {}", path.display(), line + 1)))?;
        let c = grid.ravel(idx);
        if seen[c] {
            return Err(Error::InvalidField(format!("{}: cell {idx:?} listed twice", path.display())));
        }
        seen[c] = true;
        values[c] = v;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidField(format!("{}: cell {:?} missing", path.display(), grid.unravel(c))));
    }
    ScalarField::new(grid.clone(), values, kind)
}

/// Sidecar describing a raw binary field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySidecar {
    pub grid: Grid,
    pub kind: FieldKind,
    pub dtype: String,
    pub order: String,
    pub len: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (little-endian f64, row-major, first axis slowest) and `path.json`.
pub fn write_field_binary(path: &Path, f: &ScalarField) -> Result<()> {
    let bytes: Vec<u8> = f.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let side = BinarySidecar {
        grid: f.grid().clone(),
        kind: f.kind(),
        dtype: "f64le".into(),
        order: "row_major".into(),
        len: f.values().len(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

pub fn read_field_binary(path: &Path) -> Result<ScalarField> {
    let side: BinarySidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if side.dtype != "f64le" || side.order != "row_major" {
        return Err(Error::InvalidField(format!("unsupported layout {} / {}", side.dtype, side.order)));
    }
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * side.len || side.len != side.grid.len() {
        return Err(Error::InvalidField(format!(
            "{}: {} bytes for {} cells",
            path.display(),
            bytes.len(),
            side.grid.len()
        )));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::new(side.grid, values, side.kind)
}

pub const TABLE_COLUMNS: [&str; 5] = ["angle", "gamma", "sigma", "valid", "spread"];

/// Rows ordered by direction, then `γ`.
pub fn write_sigma_table_csv(path: &Path, t: &SurfaceTensionTable, digits: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TABLE_COLUMNS)?;
    for (d, a) in t.angles.iter().enumerate() {
        for (g, gamma) in t.gammas.iter().enumerate() {
            let e = &t.entries[d][g];
            w.write_record([
                format_real(*a, digits),
                format_real(*gamma, digits),
                format_real(e.sigma, digits),
                e.valid.to_string(),
                format_real(e.spread, digits),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a table CSV written by [`write_sigma_table_csv`]. The rows must form a
/// full direction × `γ` grid.
pub fn read_sigma_table_csv(path: &Path, dim: usize) -> Result<SurfaceTensionTable> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    for col in TABLE_COLUMNS {
        if !header.iter().any(|h| h == col) {
            return Err(Error::Table(format!("{}: missing column `{col}`", path.display())));
        }
    }
    let pos = |c: &str| header.iter().position(|h| h == c).unwrap();
    let (ia, ig, is, iv, isp) = (pos("angle"), pos("gamma"), pos("sigma"), pos("valid"), pos("spread"));
    let mut rows: Vec<(f64, f64, f64, bool, f64)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Table(format!("{}: bad number on row {}", path.display(), line + 1)))
        };
        let valid = match rec.get(iv).map(|s| s.trim()) {
            Some("true") => true,
            Some("false") => false,
            _ => return Err(Error::Table(format!("{}: bad `valid` on row {}", path.display(), line + 1))),
        };
        rows.push((num(ia)?, num(ig)?, num(is)?, valid, num(isp)?));
    }
    let mut angles: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut gammas: Vec<f64> = rows.iter().map(|r| r.1).collect();
    for v in [&mut angles, &mut gammas] {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
    }
    if angles.len() * gammas.len() != rows.len() {
        return Err(Error::Table(format!("{}: rows do not form a direction × gamma grid", path.display())));
    }
    let mut entries: Vec<Vec<Option<TableEntry>>> = vec![vec![None; gammas.len()]; angles.len()];
    for (a, g, s, valid, spread) in rows {
        let d = angles.iter().position(|x| *x == a).unwrap();
        let k = gammas.iter().position(|x| *x == g).unwrap();
        if entries[d][k].is_some() {
            return Err(Error::Table(format!("{}: duplicate entry ({a}, {g})", path.display())));
        }
        entries[d][k] = Some(TableEntry { sigma: s, raw_sigma: s, valid, spread, converged: valid, error: None });
    }
    let entries = entries.into_iter().map(|r| r.into_iter().map(Option::unwrap).collect()).collect();
    SurfaceTensionTable::new(dim, angles, gammas, entries)
}

pub const SCAN_COLUMNS: [&str; 9] = [
    "epsilon",
    "E_total",
    "E_potential",
    "E_exchange",
    "E_surfactant",
    "sharp_target",
    "ratio",
    "rho_mass",
    "tv_u",
];

/// Scan CSV; minimize-each reports append the minimizer's columns.
pub fn write_scan_csv(path: &Path, report: &ScanReport, digits: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let extra = report.rows.iter().any(|r| r.minimized.is_some());
    let mut header: Vec<&str> = SCAN_COLUMNS.to_vec();
    if extra {
        header.extend(["Emin_total", "ratio_min", "rho_mass_min", "tv_u_min", "iterations_min", "converged_min"]);
    }
    w.write_record(&header)?;
    let f = |x: f64| format_real(x, digits);
    for r in &report.rows {
        let mut rec = vec![
            f(r.epsilon),
            f(r.energy.total),
            f(r.energy.potential),
            f(r.energy.exchange),
            f(r.energy.surfactant),
            f(r.sharp_target),
            f(r.ratio),
            f(r.rho_mass),
            f(r.tv_u),
        ];
        if let Some(m) = &r.minimized {
            rec.extend([
                f(m.energy.total),
                f(m.ratio),
                f(m.rho_mass),
                f(m.tv_u),
                m.iterations.to_string(),
                m.converged.to_string(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRow], digits: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "energy", "grad_norm", "step"])?;
    for t in trace {
        w.write_record([
            t.iter.to_string(),
            format_real(t.energy, digits),
            format_real(t.grad_norm, digits),
            format_real(t.step, digits),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_grid, BoundaryMode};

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.0, 12), "0");
        assert_eq!(format_real(1.0, 12), "1");
        assert_eq!(format_real(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_real(-1234567.891234567, 4), "-1235000");
        assert_eq!(format_real(1e-20 / 3.0, 3), "3.33e-21");
        assert_eq!(format_real(2.5e-5, 12), "0.000025");
        assert_eq!(format_real(-4e17, 12), "-4e17");
        assert_eq!(format_real(f64::NAN, 12), "NaN");
    }

    #[test]
    fn field_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(2, &[1.0, 2.0], &[3, 4], &[BoundaryMode::Periodic, BoundaryMode::clamped(1.0)]).unwrap();
        let f = ScalarField::from_fn(&g, FieldKind::OrderParameter, |x| (x[0] * 7.0 + x[1]).sin() / 3.0).unwrap();
        let bin = dir.path().join("u.bin");
        write_field_binary(&bin, &f).unwrap();
        assert_eq!(read_field_binary(&bin).unwrap(), f);

        let csv = dir.path().join("u.csv");
        write_field_csv(&csv, &f, 17).unwrap();
        assert_eq!(read_field_csv(&csv, &g, FieldKind::OrderParameter).unwrap(), f);
        let back = {
            write_field_csv(&csv, &f, 12).unwrap();
            read_field_csv(&csv, &g, FieldKind::OrderParameter).unwrap()
        };
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 5e-12 * b.abs());
        }
    }

    #[test]
    fn field_csv_rejects_gaps_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(1, &[1.0], &[3], &[BoundaryMode::Open]).unwrap();
        let p = dir.path().join("f.csv");
        fs::write(&p, "i,value\n0,1\n1,2\n").unwrap();
        assert!(read_field_csv(&p, &g, FieldKind::OrderParameter).is_err());
        fs::write(&p, "i,value\n0,1\n1,2\n1,3\n").unwrap();
        assert!(read_field_csv(&p, &g, FieldKind::OrderParameter).is_err());
        fs::write(&p, "i,value\n0,1\n1,2\n2,-1\n").unwrap();
        assert!(read_field_csv(&p, &g, FieldKind::Density).is_err());
        assert!(read_field_csv(&p, &g, FieldKind::OrderParameter).is_ok());
    }

    #[test]
    fn table_round_trip() {
        let e = |s: f64, v: bool| TableEntry { sigma: s, raw_sigma: s, valid: v, spread: 0.01, converged: v, error: None };
        let t = SurfaceTensionTable::new(
            1,
            vec![0.0, std::f64::consts::PI],
            vec![0.0, 0.5],
            vec![vec![e(2.5, true), e(2.25, true)], vec![e(2.5, true), e(2.0, false)]],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_sigma_table_csv(&p, &t, 17).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("angle,gamma,sigma,valid,spread\n"));
        let back = read_sigma_table_csv(&p, 1).unwrap();
        assert_eq!(back.angles, t.angles);
        assert_eq!(back.entries[1][1].sigma, 2.0);
        assert!(!back.entries[1][1].valid);
        fs::write(&p, "angle,gamma,sigma,valid,spread\n0,0,1,true,0\n0,1,1,true,0\n3.14,0,1,true,0\n").unwrap();
        assert!(read_sigma_table_csv(&p, 1).is_err());
    }
}
