//! CSV persistence for labeled trajectory sets.
//!
//! Schema: header `traj_id,time,label,x_0[,x_1,...]`; rows grouped by
//! `traj_id`, time strictly increasing with a constant step, label constant
//! within a trajectory. Values use `.` as decimal separator.

use std::path::Path;

use super::{LabeledSet, Trajectory};
use crate::error::{Error, Result};

/// Relative tolerance when checking that the time column has a constant step.
const STEP_TOL: f64 = 1e-9;

pub fn save_csv(set: &LabeledSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;

    let dims = set.dims();
    let mut header = vec!["traj_id".to_string(), "time".to_string(), "label".to_string()];
    header.extend((0..dims).map(|i| format!("x_{i}")));
    writer
        .write_record(&header)
        .map_err(|e| csv_io_error(path, e))?;

    for (id, (tr, label)) in set.iter().enumerate() {
        for t in 0..tr.len() {
            let mut record = Vec::with_capacity(3 + dims);
            record.push(id.to_string());
            record.push(format!("{}", tr.t0() + t as f64 * tr.dt()));
            record.push(label.to_string());
            record.extend(tr.step(t).iter().map(|v| format!("{v}")));
            writer
                .write_record(&record)
                .map_err(|e| csv_io_error(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io_error(path, e))?;

    let headers = reader.headers().map_err(|e| csv_io_error(path, e))?.clone();
    let dims = validate_header(&headers)?;

    struct Group {
        id: String,
        label: u8,
        times: Vec<f64>,
        rows: Vec<Vec<f64>>,
        first_row: usize,
    }

    let mut groups: Vec<Group> = Vec::new();
    let mut seen_ids: std::collections::HashSet<String> = std::collections::HashSet::new();

    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|e| Error::CsvSchema {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 3 + dims {
            return Err(Error::CsvSchema {
                row,
                message: format!("expected {} columns, found {}", 3 + dims, record.len()),
            });
        }
        let id = record[0].to_string();
        let time: f64 = parse_cell(&record[1], row, "time")?;
        let label: u8 = match record[2].parse::<u8>() {
            Ok(l @ (0 | 1)) => l,
            _ => {
                return Err(Error::CsvSchema {
                    row,
                    message: format!("label must be 0 or 1, found '{}'", &record[2]),
                })
            }
        };
        let mut values = Vec::with_capacity(dims);
        for d in 0..dims {
            values.push(parse_cell(&record[3 + d], row, &format!("x_{d}"))?);
        }

        match groups.last_mut() {
            Some(g) if g.id == id => {
                if g.label != label {
                    return Err(Error::CsvSchema {
                        row,
                        message: format!(
                            "label changes within trajectory '{}' ({} vs {})",
                            id, g.label, label
                        ),
                    });
                }
                g.times.push(time);
                g.rows.push(values);
            }
            _ => {
                if !seen_ids.insert(id.clone()) {
                    return Err(Error::CsvSchema {
                        row,
                        message: format!("trajectory '{}' is not contiguous", id),
                    });
                }
                groups.push(Group {
                    id,
                    label,
                    times: vec![time],
                    rows: vec![values],
                    first_row: row,
                });
            }
        }
    }

    if groups.is_empty() {
        return Err(Error::EmptyInput("no trajectories".into()));
    }

    let mut trajectories = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for g in &groups {
        if g.times.len() < 2 {
            return Err(Error::CsvSchema {
                row: g.first_row,
                message: format!("trajectory '{}' has fewer than 2 samples", g.id),
            });
        }
        let dt = g.times[1] - g.times[0];
        if !(dt > 0.0) {
            return Err(Error::CsvSchema {
                row: g.first_row + 1,
                message: format!("time not strictly increasing in trajectory '{}'", g.id),
            });
        }
        for (k, w) in g.times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - dt).abs() > STEP_TOL * dt.abs().max(1.0) {
                return Err(Error::CsvSchema {
                    row: g.first_row + k + 1,
                    message: format!(
                        "non-constant time step in trajectory '{}': {} vs {}",
                        g.id, step, dt
                    ),
                });
            }
        }
        let tr = Trajectory::new(g.rows.clone(), dt, g.times[0]).map_err(|e| Error::CsvSchema {
            row: g.first_row,
            message: e.to_string(),
        })?;
        trajectories.push(tr);
        labels.push(g.label);
    }

    LabeledSet::new(trajectories, labels)
}

fn validate_header(headers: &csv::StringRecord) -> Result<usize> {
    let expect = ["traj_id", "time", "label"];
    for (i, name) in expect.iter().enumerate() {
        if headers.get(i) != Some(name) {
            return Err(Error::CsvSchema {
                row: 1,
                message: format!(
                    "column {} must be '{}', found '{}'",
                    i + 1,
                    name,
                    headers.get(i).unwrap_or("<missing>")
                ),
            });
        }
    }
    let dims = headers.len().saturating_sub(3);
    if dims == 0 {
        return Err(Error::CsvSchema {
            row: 1,
            message: "missing value columns (expected x_0, ...)".into(),
        });
    }
    for d in 0..dims {
        let want = format!("x_{d}");
        if headers.get(3 + d) != Some(want.as_str()) {
            return Err(Error::CsvSchema {
                row: 1,
                message: format!(
                    "column {} must be '{}', found '{}'",
                    4 + d,
                    want,
                    headers.get(3 + d).unwrap_or("<missing>")
                ),
            });
        }
    }
    Ok(dims)
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::CsvSchema {
        row,
        message: format!("non-numeric {column} cell '{cell}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::CsvSchema {
            row,
            message: format!("non-finite {column} cell '{cell}'"),
        });
    }
    Ok(v)
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{sample_mu0_batch, Mu0Params};

    fn two_traj_csv(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("data.csv");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn loads_two_trajectories() {
        let dir = tempfile::tempdir().unwrap();
        let path = two_traj_csv(
            &dir,
            "traj_id,time,label,x_0\n0,0,0,1.5\n0,1,0,2.5\n1,0,1,3.5\n1,1,1,4.5\n",
        );
        let set = load_csv(&path).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.labels(), &[0, 1]);
        assert_eq!(set.trajectories()[1].value(1, 0), 4.5);
    }

    #[test]
    fn empty_data_section_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = two_traj_csv(&dir, "traj_id,time,label,x_0\n");
        let err = load_csv(&path).unwrap_err();
        assert!(err.to_string().contains("no trajectories"), "{err}");
    }

    #[test]
    fn schema_violations_carry_row_numbers() {
        let dir = tempfile::tempdir().unwrap();
        // non-numeric cell on data row 3 (line 3 of the file)
        let path = two_traj_csv(
            &dir,
            "traj_id,time,label,x_0\n0,0,0,1.0\n0,1,0,oops\n",
        );
        match load_csv(&path).unwrap_err() {
            Error::CsvSchema { row, message } => {
                assert_eq!(row, 3);
                assert!(message.contains("non-numeric"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn label_change_within_trajectory_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = two_traj_csv(
            &dir,
            "traj_id,time,label,x_0\n0,0,0,1.0\n0,1,1,2.0\n",
        );
        assert!(matches!(
            load_csv(&path),
            Err(Error::CsvSchema { row: 3, .. })
        ));
    }

    #[test]
    fn ragged_lengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = two_traj_csv(
            &dir,
            "traj_id,time,label,x_0\n0,0,0,1.0\n0,1,0,2.0\n1,0,1,3.0\n1,1,1,4.0\n1,2,1,5.0\n",
        );
        let err = load_csv(&path).unwrap_err();
        assert!(err.to_string().contains("shape"), "{err}");
    }

    #[test]
    fn non_constant_step_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = two_traj_csv(
            &dir,
            "traj_id,time,label,x_0\n0,0,0,1.0\n0,1,0,2.0\n0,3,0,3.0\n",
        );
        assert!(matches!(
            load_csv(&path),
            Err(Error::CsvSchema { row: 4, .. })
        ));
    }

    #[test]
    fn roundtrip_of_sampled_batch() {
        let params = Mu0Params {
            b: 20.0,
            n_dims: 2,
            ..Mu0Params::default()
        };
        let trajectories = sample_mu0_batch(&params, 11, 6).unwrap();
        let labels = vec![0, 1, 0, 1, 0, 1];
        let set = LabeledSet::new(trajectories, labels).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.csv");
        save_csv(&set, &path).unwrap();
        let loaded = load_csv(&path).unwrap();

        assert_eq!(loaded.len(), set.len());
        assert_eq!(loaded.labels(), set.labels());
        for (a, b) in loaded.trajectories().iter().zip(set.trajectories()) {
            assert_eq!(a.dims(), b.dims());
            assert_eq!(a.len(), b.len());
            for t in 0..a.len() {
                for d in 0..a.dims() {
                    assert!((a.value(t, d) - b.value(t, d)).abs() <= 1e-9);
                }
            }
        }
    }
}
