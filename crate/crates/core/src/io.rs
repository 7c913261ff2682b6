//! Field files: one JSON header line, then little-endian doubles, components-major and
//! row-major over nodes within each component. Periodic grids only.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GyError, Result};
use crate::field::ScalarField;
use crate::grid::{make_periodic_grid, ChartGrid};
use crate::metric::MetricField;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    pub mode: String,
    pub counts: Vec<usize>,
    pub periods: Vec<f64>,
    pub components: usize,
    pub dtype: String,
    pub order: String,
    #[serde(default)]
    pub names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub grid: Arc<ChartGrid>,
    pub comps: Vec<Vec<f64>>,
}

pub fn write_field(
    path: &Path,
    grid: &ChartGrid,
    names: &[String],
    comps: &[Vec<f64>],
) -> Result<()> {
    grid.require_periodic("field files")?;
    if names.len() != comps.len() || comps.iter().any(|c| c.len() != grid.len()) {
        return Err(GyError::Shape(
            "component names and data do not match the grid".into(),
        ));
    }
    let header = FieldHeader {
        n: grid.n(),
        mode: "periodic".into(),
        counts: grid.counts().expect("periodic").to_vec(),
        periods: grid.periods().expect("periodic").to_vec(),
        components: comps.len(),
        dtype: "f64le".into(),
        order: "row-major".into(),
        names: names.to_vec(),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for c in comps {
        for v in c {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())?;
    if header.dtype != "f64le" || header.order != "row-major" || header.mode != "periodic" {
        return Err(GyError::Format(format!(
            "unsupported layout: mode {}, dtype {}, order {}",
            header.mode, header.dtype, header.order
        )));
    }
    let grid = make_periodic_grid(header.n, &header.counts, &header.periods)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let expected = header.components * grid.len() * 8;
    if bytes.len() != expected {
        return Err(GyError::Format(format!(
            "expected {expected} data bytes, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let comps = values
        .chunks(grid.len().max(1))
        .map(|c| c.to_vec())
        .take(header.components)
        .collect();
    Ok(FieldFile {
        header,
        grid,
        comps,
    })
}

/// A real field is stored as one component, a complex one as re and im.
pub fn write_scalar(path: &Path, f: &ScalarField, name: &str) -> Result<()> {
    if f.is_real() {
        write_field(path, f.grid(), &[name.to_string()], &[f.re()])
    } else {
        let im = f.values().iter().map(|v| v.im).collect();
        write_field(
            path,
            f.grid(),
            &[format!("{name}.re"), format!("{name}.im")],
            &[f.re(), im],
        )
    }
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let file = read_field(path)?;
    match file.comps.len() {
        1 => ScalarField::from_real(
            file.grid,
            file.comps.into_iter().next().expect("one component"),
        ),
        2 => {
            let v = file.comps[0]
                .iter()
                .zip(&file.comps[1])
                .map(|(&a, &b)| C64::new(a, b))
                .collect();
            ScalarField::from_complex(file.grid, v)
        }
        k => Err(GyError::Format(format!(
            "a scalar field has 1 or 2 components, found {k}"
        ))),
    }
}

/// Stores re and im of every g_{i jbar}, 2n² components.
pub fn write_metric(path: &Path, g: &MetricField) -> Result<()> {
    let n = g.n();
    let mut names = Vec::with_capacity(2 * n * n);
    let mut comps = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let c = g.component(i, j);
            names.push(format!("g{i}{j}.re"));
            comps.push(c.iter().map(|v| v.re).collect());
            names.push(format!("g{i}{j}.im"));
            comps.push(c.iter().map(|v| v.im).collect());
        }
    }
    write_field(path, g.grid(), &names, &comps)
}

pub fn read_metric(path: &Path) -> Result<MetricField> {
    let file = read_field(path)?;
    let n = file.header.n;
    if file.comps.len() != 2 * n * n {
        return Err(GyError::Format(format!(
            "a metric needs {} components, found {}",
            2 * n * n,
            file.comps.len()
        )));
    }
    let nodes = file.grid.len();
    let mut samples = vec![C64::new(0.0, 0.0); nodes * n * n];
    for node in 0..nodes {
        for e in 0..n * n {
            samples[node * n * n + e] =
                C64::new(file.comps[2 * e][node], file.comps[2 * e + 1][node]);
        }
    }
    MetricField::from_samples(file.grid, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn metric_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.field");
        let grid = models::torus_grid(2, &[8, 4, 4, 4]).unwrap();
        let g = models::pluriclosed_torus(&grid, 0.3).unwrap();
        write_metric(&path, &g).unwrap();
        let h = read_metric(&path).unwrap();
        assert_eq!(g.samples(), h.samples());
    }

    #[test]
    fn header_is_one_json_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        let grid = models::torus_grid(1, &[4, 4]).unwrap();
        write_scalar(&path, &ScalarField::constant(grid, 2.5), "f").unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["dtype"], "f64le");
        assert_eq!(header["counts"], serde_json::json!([4, 4]));
        assert_eq!(bytes.len() - nl - 1, 16 * 8);
        assert_eq!(read_scalar(&path).unwrap().re(), vec![2.5; 16]);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        let grid = models::torus_grid(1, &[4, 4]).unwrap();
        write_scalar(&path, &ScalarField::constant(grid, 1.0), "f").unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_scalar(&path), Err(GyError::Format(_))));
    }
}
