//! Persistence for scenario outputs: curve CSVs (with cell-level resume),
//! training logs (JSON lines) and scenario metadata.

use super::{BerScanResult, DispersionReport, ScanPoint, StudyResult, TrainedDevice};
use crate::config::{Config, LinkMode};
use crate::error::{Error, Result};
use crate::trainer::TrainingRecord;
use serde::Serialize;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn scan_csv_filename(mode: LinkMode, length_km: f64) -> String {
    format!("ber_{}_{}km.csv", mode.tag(), format_length(length_km))
}

pub fn training_log_filename(length_km: f64) -> String {
    format!("training_{}km.jsonl", format_length(length_km))
}

pub fn trained_device_filename(length_km: f64) -> String {
    format!("trained_{}km.json", format_length(length_km))
}

fn format_length(length_km: f64) -> String {
    if (length_km - length_km.round()).abs() < 1e-9 {
        format!("{}", length_km.round() as i64)
    } else {
        format!("{length_km:.3}").replace('.', "p")
    }
}

fn format_point(p: &ScanPoint) -> String {
    format!(
        "{:.4},{:.6e},{:.6e},{}\n",
        p.prx_dbm, p.ber_mean, p.ber_std, p.n_acquisitions
    )
}

/// Create the CSV with its header, truncating any previous content.
pub fn start_scan_csv(path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(b"prx_dbm,ber_mean,ber_std,n_acquisitions\n")?;
    Ok(())
}

/// Appends one row per completed PRX cell, flushing eagerly so an
/// interrupted run leaves a resumable prefix.
pub struct ScanCsvAppender {
    file: File,
}

impl ScanCsvAppender {
    pub fn new(path: &Path) -> Result<Self> {
        Ok(Self { file: OpenOptions::new().append(true).open(path)? })
    }

    pub fn append(&mut self, point: &ScanPoint) -> Result<()> {
        self.file.write_all(format_point(point).as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Read back completed cells, verifying they form a prefix of the expected
/// PRX grid. Returns the empty vector when the file does not exist.
pub fn read_scan_csv(path: &Path, expected_grid: &[f64]) -> Result<Vec<ScanPoint>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("prx_dbm,ber_mean,ber_std,n_acquisitions") => {}
        _ => return Err(Error::Config(format!("{} is not a scan CSV", path.display()))),
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            // Torn final row from an interrupted write: drop it and resume there.
            break;
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Config(format!("bad CSV number {s}: {e}")))
        };
        let (Ok(prx), Ok(mean), Ok(std)) = (parse(fields[0]), parse(fields[1]), parse(fields[2]))
        else {
            break;
        };
        let Ok(n) = fields[3].parse::<usize>() else { break };
        let expected = expected_grid.get(i).ok_or_else(|| {
            Error::Config(format!("{} has more rows than the PRX grid", path.display()))
        })?;
        if (prx - expected).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "{} row {i} has PRX {prx}, expected {expected}: different scenario?",
                path.display()
            )));
        }
        let mean_is_floor = mean > 0.0 && std == 0.0;
        points.push(ScanPoint {
            prx_dbm: *expected,
            ber_mean: mean,
            ber_std: std,
            n_acquisitions: n,
            floored: mean_is_floor && mean < 1e-4,
        });
    }
    Ok(points)
}

/// Training trace as JSON lines: {"iteration":..,"best_loss":..,"best_currents":[..]}.
pub fn write_training_log(path: &Path, record: &TrainingRecord) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for it in &record.iterations {
        #[derive(Serialize)]
        struct Line<'a> {
            iteration: usize,
            best_loss: f64,
            best_currents: &'a [f64],
        }
        let line = Line {
            iteration: it.iteration,
            best_loss: it.best_loss,
            best_currents: &it.best_position,
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_trained_device(path: &Path, trained: &TrainedDevice) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, trained)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_trained_device(path: &Path) -> Result<TrainedDevice> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct ScenarioMetadata<'a> {
    scenario_hash: String,
    provenance: String,
    mode: &'a str,
    dispersion: &'a DispersionReport,
    curves: Vec<CurveMetadata>,
}

#[derive(Serialize)]
struct CurveMetadata {
    length_km: f64,
    csv: String,
    trained_currents_ma: Option<Vec<f64>>,
    trained_phases_rad: Option<Vec<f64>>,
    excess_loss_db: Option<f64>,
    train_prx_dbm: Option<f64>,
    non_improving: Option<bool>,
}

pub fn write_scenario_metadata(
    path: &Path,
    config: &Config,
    results: &[BerScanResult],
    trained: &[TrainedDevice],
    dispersion: &DispersionReport,
) -> Result<()> {
    let curves = results
        .iter()
        .map(|r| {
            let t = trained.iter().find(|t| t.length_km == r.length_km);
            CurveMetadata {
                length_km: r.length_km,
                csv: scan_csv_filename(r.mode, r.length_km),
                trained_currents_ma: r.metadata.trained_currents_ma.clone(),
                trained_phases_rad: r.metadata.trained_phases_rad.clone(),
                excess_loss_db: r.metadata.excess_loss_db,
                train_prx_dbm: t.map(|t| t.train_prx_dbm),
                non_improving: t.map(|t| !t.improved),
            }
        })
        .collect();
    let meta = ScenarioMetadata {
        scenario_hash: config.scenario_hash(),
        provenance: config.provenance(),
        mode: config.scenario.mode.tag(),
        dispersion,
        curves,
    };
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &meta)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Study outputs: one BER-vs-length CSV and one penalty CSV per variant,
/// plus a JSON summary. Penalty rows stop at the last length where the
/// pre-FEC threshold was interpolable.
pub fn write_study_outputs(dir: &Path, study: &StudyResult) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for variant in &study.variants {
        let ber_path = dir.join(format!("ber_vs_length_{}.csv", variant.variant));
        let mut f = BufWriter::new(File::create(&ber_path)?);
        f.write_all(b"length_km,ber_mean\n")?;
        for cell in &variant.cells {
            writeln!(f, "{:.4},{:.6e}", cell.length_km, cell.ber_at_fixed_snr)?;
        }
        drop(f);
        written.push(ber_path);

        let pen_path = dir.join(format!("snr_penalty_{}.csv", variant.variant));
        let mut f = BufWriter::new(File::create(&pen_path)?);
        f.write_all(b"length_km,penalty_db\n")?;
        for cell in &variant.cells {
            match cell.penalty_db {
                Some(p) => writeln!(f, "{:.4},{:.4}", cell.length_km, p)?,
                None => break,
            }
        }
        drop(f);
        written.push(pen_path);
    }
    let json_path = dir.join("study40g.json");
    let mut f = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut f, study)?;
    f.write_all(b"\n")?;
    written.push(json_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_csv_roundtrip_and_prefix_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        let grid = vec![-20.0, -18.0, -16.0];
        start_scan_csv(&path).unwrap();
        let mut app = ScanCsvAppender::new(&path).unwrap();
        let p0 = ScanPoint {
            prx_dbm: -20.0,
            ber_mean: 1.25e-3,
            ber_std: 2e-4,
            n_acquisitions: 100,
            floored: false,
        };
        let p1 = ScanPoint { prx_dbm: -18.0, ber_mean: 3.5e-4, ..p0 };
        app.append(&p0).unwrap();
        app.append(&p1).unwrap();
        drop(app);

        let read = read_scan_csv(&path, &grid).unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(read[0].prx_dbm, -20.0);
        assert!((read[1].ber_mean - 3.5e-4).abs() < 1e-12);

        // Grid mismatch is an error, not silent corruption.
        let wrong = vec![-10.0, -8.0];
        assert!(read_scan_csv(&path, &wrong).is_err());
    }

    #[test]
    fn torn_final_row_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        std::fs::write(
            &path,
            "prx_dbm,ber_mean,ber_std,n_acquisitions\n-20.0000,1.0e-3,1.0e-4,100\n-18.0000,2.0e-",
        )
        .unwrap();
        let read = read_scan_csv(&path, &[-20.0, -18.0]).unwrap();
        assert_eq!(read.len(), 1);
    }

    #[test]
    fn length_formatting() {
        assert_eq!(format_length(125.0), "125");
        assert_eq!(format_length(12.5), "12p500");
        assert_eq!(scan_csv_filename(LinkMode::FiberOnly, 75.0), "ber_fiber_only_75km.csv");
    }
}
