//! Argument parsing helpers and file formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use carnot::kernel::DensityGrid;
use carnot::{GroupElement, RatPoly};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::{CliError, CliResult};

/// Comma-separated real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number")))
            .collect::<Result<Vec<_>, _>>()
            .map(Point)
    }
}

pub fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn variable_names(n: usize, m: usize) -> Vec<String> {
    (1..=n).map(|i| format!("h{i}")).chain((1..=m).map(|j| format!("v{j}"))).collect()
}

/// `{"text": "...", "terms": [[[exponents], "p/q"], ...]}`
pub fn poly_json(p: &RatPoly) -> Value {
    let terms: Vec<Value> = p.terms().map(|(e, c)| json!([e, c.to_string()])).collect();
    json!({"text": p.to_string(), "terms": terms})
}

pub fn write_grid(grid: &DensityGrid, out: &Path, gnuplot: bool) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(out)?);
    grid.write_csv(&mut w)?;
    w.flush()?;
    if gnuplot {
        let mut d = BufWriter::new(File::create(out.with_extension("dat"))?);
        grid.write_dat(&mut d)?;
        d.flush()?;
    }
    Ok(())
}

pub fn write_samples(points: &[GroupElement], n: usize, m: usize, out: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(out).map_err(csv_err)?;
    w.write_record(variable_names(n, m)).map_err(csv_err)?;
    for p in points {
        w.serialize(p.coords()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub struct SampleTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleTable {
    /// Columns v1..vm in order.
    pub fn vertical(&self, m: usize) -> Result<Vec<Vec<f64>>, String> {
        let cols: Vec<usize> = (1..=m)
            .map(|j| {
                let name = format!("v{j}");
                self.header.iter().position(|h| *h == name).ok_or(format!("samples file has no column '{name}'"))
            })
            .collect::<Result<_, _>>()?;
        Ok(self.rows.iter().map(|r| cols.iter().map(|c| r[*c]).collect()).collect())
    }
}

pub fn read_samples(path: &Path) -> CliResult<SampleTable> {
    let usage = |e: String| CliError::Usage(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| usage(e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| usage(e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.deserialize::<Vec<f64>>() {
        rows.push(rec.map_err(|e| usage(e.to_string()))?);
    }
    Ok(SampleTable { header, rows })
}
