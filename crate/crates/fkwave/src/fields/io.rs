//! CSV dumps of composite fields with a JSON sidecar for grid metadata.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompositeField, Parity};

/// Grid metadata and parity written next to a field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub half_length: usize,
    pub points_per_unit: usize,
    pub n_points: usize,
    pub spacing: f64,
    pub tail_tol: f64,
    pub parity: String,
}

impl Sidecar {
    pub fn of(f: &CompositeField) -> Self {
        Self {
            half_length: f.grid.half_length(),
            points_per_unit: f.grid.points_per_unit(),
            n_points: f.grid.n_points(),
            spacing: f.grid.spacing(),
            tail_tol: f.grid.tail_tol(),
            parity: match f.parity {
                Parity::Odd => "odd",
                Parity::Even => "even",
                Parity::None => "none",
            }
            .to_string(),
        }
    }
}

/// Writes columns x, analytic, grid, total with 17 significant digits.
pub fn write_csv(f: &CompositeField, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x,analytic,grid,total")?;
    let analytic = f.analytic_samples();
    for (i, (a, g)) in analytic.iter().zip(&f.grid_part).enumerate() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            f.grid.x(i),
            a,
            g,
            a + g
        )?;
    }
    w.flush()
}

pub fn write_sidecar(f: &CompositeField, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(&Sidecar::of(f)).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

/// Writes `stem.csv` and `stem.json` into `dir`.
pub fn write_field(f: &CompositeField, dir: &Path, stem: &str) -> io::Result<()> {
    write_csv(f, &dir.join(format!("{stem}.csv")))?;
    write_sidecar(f, &dir.join(format!("{stem}.json")))
}

/// Reads the columns back as (x, analytic, grid, total) rows.
pub fn read_csv(path: &Path) -> io::Result<Vec<[f64; 4]>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|line| {
            let mut row = [0.0; 4];
            let mut cols = line.split(',');
            for slot in row.iter_mut() {
                *slot = cols
                    .next()
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, line.to_string()))?;
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Analytic, Grid};

    #[test]
    fn csv_round_trip_keeps_full_precision() {
        let dir = std::env::temp_dir().join(format!("fkwave-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = Grid::new(8, 4).unwrap();
        let vals: Vec<f64> = g.xs().iter().map(|x| (-x * x).exp() / 3.0).collect();
        let f = CompositeField::new(g, Analytic::KernelSin, vals.clone(), Parity::Odd);
        write_field(&f, &dir, "f").unwrap();
        let rows = read_csv(&dir.join("f.csv")).unwrap();
        assert_eq!(rows.len(), g.n_points());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[0], g.x(i));
            assert_eq!(row[2], vals[i]);
        }
        let side: Sidecar =
            serde_json::from_str(&fs::read_to_string(dir.join("f.json")).unwrap()).unwrap();
        assert_eq!(side, Sidecar::of(&f));
        fs::remove_dir_all(&dir).unwrap();
    }
}
