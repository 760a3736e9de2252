//! File formats: dB matrices as plain CSV with a JSON sidecar header,
//! observation masks as `(i, j, value)` triples, and experiment records as
//! one CSV row each.
//!
//! The sidecar lives next to the matrix with the extension replaced by
//! `.json` (`map.csv` -> `map.json`). Matrix values are written with 12
//! significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::channel::{GridSpec, RadioMap};
use crate::error::{Error, Result};
use crate::experiment::{EnergyRecord, MethodDiagnostics, MetricsRecord, SceneConfig};
use crate::sampling::{Observations, SamplingStrategy};
use crate::scalar::{cast, Scalar};

/// Sidecar header describing a persisted dB matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapHeader<T> {
    /// What the matrix is: `ground_truth`, `rbf_prior`, `lpr_prior`, or a
    /// reconstruction label.
    pub kind: String,
    pub grid: GridSpec<T>,
    pub n_elements: usize,
    pub carrier_freq: T,
    pub power: T,
    pub sigma: T,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<MethodDiagnostics>,
}

impl<T: Scalar> MapHeader<T> {
    pub fn for_scene(kind: &str, scene: &SceneConfig<T>, sigma: T, seed: u64) -> Self {
        Self {
            kind: kind.to_string(),
            grid: scene.grid.clone(),
            n_elements: scene.n_elements,
            carrier_freq: scene.carrier_freq,
            power: scene.power,
            sigma,
            seed,
            method: None,
            diagnostics: None,
        }
    }
}

/// Sidecar header describing a persisted observation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskHeader<T> {
    pub rho: f64,
    pub strategy: SamplingStrategy<T>,
    pub seed: u64,
    pub n_theta: usize,
    pub n_r: usize,
}

/// Path of the JSON sidecar belonging to a CSV file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Writes a dB matrix as CSV, one row per angular index, 12 significant
/// digits per value.
pub fn write_matrix_csv<T: Scalar>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{:.11e}", m[(i, j)].to_f64().unwrap_or(f64::NAN))?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a rectangular CSV of finite values.
pub fn read_matrix_csv<T: Scalar>(path: &Path) -> Result<DMatrix<T>> {
    let file = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    detail: format!("line {}: bad number '{}'", lineno + 1, tok.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        detail: format!("line {}: non-finite value", lineno + 1),
                    });
                }
                Ok(cast::<T>(v))
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    detail: format!("line {}: ragged row", lineno + 1),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            detail: "empty matrix".into(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

/// Writes a radio map (or any dB matrix) plus its sidecar header.
pub fn write_map<T: Scalar>(path: &Path, values: &DMatrix<T>, header: &MapHeader<T>) -> Result<()> {
    if (values.nrows(), values.ncols()) != (header.grid.n_theta, header.grid.n_r) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", header.grid.n_theta, header.grid.n_r),
            actual: format!("{}x{}", values.nrows(), values.ncols()),
        });
    }
    write_matrix_csv(path, values)?;
    write_json(&sidecar_path(path), header)
}

/// Reads a matrix and its sidecar back into a `RadioMap`.
pub fn read_map<T: Scalar>(path: &Path) -> Result<(RadioMap<T>, MapHeader<T>)> {
    let header: MapHeader<T> = read_json(&sidecar_path(path))?;
    header.grid.validate()?;
    let values = read_matrix_csv(path)?;
    if (values.nrows(), values.ncols()) != (header.grid.n_theta, header.grid.n_r) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} per sidecar", header.grid.n_theta, header.grid.n_r),
            actual: format!("{}x{}", values.nrows(), values.ncols()),
        });
    }
    Ok((
        RadioMap {
            grid: header.grid.clone(),
            values,
            seed: header.seed,
            sigma_shadow: header.sigma,
        },
        header,
    ))
}

/// Writes observations as `(i, j, value_db)` CSV triples plus a sidecar.
pub fn write_mask<T: Scalar>(path: &Path, obs: &Observations<T>, header: &MaskHeader<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "value_db"])?;
    for (i, j, v) in obs.triples() {
        w.write_record(&[
            i.to_string(),
            j.to_string(),
            format!("{:.11e}", v.to_f64().unwrap_or(f64::NAN)),
        ])?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), header)
}

/// Reads observation triples and their sidecar.
pub fn read_mask<T: Scalar>(path: &Path) -> Result<(Observations<T>, MaskHeader<T>)> {
    let header: MaskHeader<T> = read_json(&sidecar_path(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut triples: Vec<(usize, usize, T)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse_err = |detail: String| Error::Parse {
            path: path.display().to_string(),
            detail,
        };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", record.len())));
        }
        let i: usize = record[0].trim().parse().map_err(|_| parse_err(format!("bad index '{}'", &record[0])))?;
        let j: usize = record[1].trim().parse().map_err(|_| parse_err(format!("bad index '{}'", &record[1])))?;
        let v: f64 = record[2].trim().parse().map_err(|_| parse_err(format!("bad value '{}'", &record[2])))?;
        triples.push((i, j, cast::<T>(v)));
    }
    let obs = Observations::from_triples(&triples, header.n_theta, header.n_r, header.rho)?;
    Ok((obs, header))
}

/// Writes experiment records, one CSV row per record.
pub fn write_records_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Writes singular-energy records as tidy `(k, energy)` CSV.
pub fn write_energy_csv(path: &Path, records: &[EnergyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_map, ArrayGeometry, Beamformer};
    use crate::sampling::{build_mask, MuLawParams};

    fn scene() -> SceneConfig<f64> {
        SceneConfig {
            grid: GridSpec::new(-60.0, 60.0, 0.5, 8.0, 10, 16).unwrap(),
            n_elements: 16,
            carrier_freq: 100e9,
            power: 1.0,
            sigma: 2.0,
            seed: 7,
        }
    }

    #[test]
    fn map_round_trip_preserves_12_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.csv");
        let sc = scene();
        let geom = ArrayGeometry::new(sc.n_elements, sc.carrier_freq).unwrap();
        let bf = Beamformer::omnidirectional(sc.n_elements).unwrap();
        let map = generate_map(&sc.grid, &geom, &bf, 1.0, 2.0, 7).unwrap();
        let header = MapHeader::for_scene("ground_truth", &sc, 2.0, 7);
        write_map(&path, &map.values, &header).unwrap();
        assert!(sidecar_path(&path).exists());

        let (back, header2) = read_map::<f64>(&path).unwrap();
        assert_eq!(header, header2);
        assert_eq!(back.grid, map.grid);
        for (a, b) in back.values.iter().zip(map.values.iter()) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.csv");
        let sc = scene();
        let geom = ArrayGeometry::new(sc.n_elements, sc.carrier_freq).unwrap();
        let bf = Beamformer::omnidirectional(sc.n_elements).unwrap();
        let map = generate_map(&sc.grid, &geom, &bf, 1.0, 0.0, 3).unwrap();
        let strategy = SamplingStrategy::mu_law(MuLawParams::for_grid(&sc.grid, 15.0).unwrap());
        let mask = build_mask(&sc.grid, 0.25, &strategy, 3).unwrap();
        let obs = Observations::from_map(&map, &mask).unwrap();
        let header = MaskHeader {
            rho: 0.25,
            strategy,
            seed: 3,
            n_theta: sc.grid.n_theta,
            n_r: sc.grid.n_r,
        };
        write_mask(&path, &obs, &header).unwrap();
        let (back, header2) = read_mask::<f64>(&path).unwrap();
        assert_eq!(header, header2);
        assert_eq!(back.mask(), obs.mask());
        for ((_, _, a), (_, _, b)) in back.triples().zip(obs.triples()) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0));
        }
    }

    #[test]
    fn records_round_trip_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![
            MetricsRecord {
                method: "rbf_mc_huber".into(),
                rho: 0.1,
                sigma: 3.0,
                mu: Some(15.0),
                strategy: "mulaw".into(),
                seed: 43,
                trial: 1,
                nmse: 0.012345678901234567,
                wall_time_s: 1.25,
                delta: Some(2.3456789012345),
                solver_iterations: Some(137),
                solver_converged: Some(true),
                max_violation: Some(1.2e-9),
            },
            MetricsRecord {
                method: "rbf".into(),
                rho: 0.1,
                sigma: 3.0,
                mu: None,
                strategy: "uniform".into(),
                seed: 43,
                trial: 1,
                nmse: 0.9876543210987654,
                wall_time_s: 0.002,
                delta: None,
                solver_iterations: None,
                solver_converged: None,
                max_violation: None,
            },
        ];
        write_records_csv(&path, &records).unwrap();
        let back = read_records_csv(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn malformed_matrix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(read_matrix_csv::<f64>(&path).is_err());
        std::fs::write(&path, "1.0,abc\n").unwrap();
        assert!(read_matrix_csv::<f64>(&path).is_err());
        std::fs::write(&path, "").unwrap();
        assert!(read_matrix_csv::<f64>(&path).is_err());
    }
}
