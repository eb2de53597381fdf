use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizers::Algorithm;

/// One `(algorithm, b, p, seed)` cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub b: usize,
    pub n: usize,
    /// Growth exponent; empty for the non-accelerated methods.
    pub p: Option<f64>,
    /// `eta` or `gamma` actually used.
    pub step_size: f64,
    pub seed: u64,
    pub final_train_loss: f64,
    pub test_loss: f64,
    pub test_misclassification: f64,
    pub wall_seconds: f64,
    pub note: String,
}

/// Mean over seeds of rows sharing `(algorithm, b, p, note)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub b: usize,
    pub n: usize,
    pub p: Option<f64>,
    pub seeds: usize,
    pub mean_final_train_loss: f64,
    pub mean_test_loss: f64,
    pub mean_test_misclassification: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub algorithm: Algorithm,
    pub b: usize,
    pub p: Option<f64>,
    pub seed: u64,
    pub iteration: usize,
    pub train_batch_loss: f64,
    pub holdout_loss: Option<f64>,
    pub iterate_norm: f64,
}

#[derive(Debug, Serialize)]
struct TimingRow<'a> {
    algorithm: Algorithm,
    b: usize,
    p: Option<f64>,
    seed: u64,
    note: &'a str,
    wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    /// When set, the main CSV carries `wall_seconds = 0` so that it is
    /// byte-reproducible; real timings go to the timing file.
    pub deterministic: bool,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn write_all<T: Serialize, W: Write>(rows: impl IntoIterator<Item = T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl ResultTable {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<(SummaryRow, Vec<&ResultRow>)> = Vec::new();
        for r in &self.rows {
            let key = |s: &SummaryRow| {
                s.algorithm == r.algorithm
                    && s.b == r.b
                    && s.p.map(f64::to_bits) == r.p.map(f64::to_bits)
                    && s.note == r.note
            };
            match out.iter_mut().find(|(s, _)| key(s)) {
                Some((_, group)) => group.push(r),
                None => out.push((
                    SummaryRow {
                        algorithm: r.algorithm,
                        b: r.b,
                        n: r.n,
                        p: r.p,
                        seeds: 0,
                        mean_final_train_loss: 0.0,
                        mean_test_loss: 0.0,
                        mean_test_misclassification: 0.0,
                        note: r.note.clone(),
                    },
                    vec![r],
                )),
            }
        }
        out.into_iter()
            .map(|(mut s, group)| {
                let k = group.len() as f64;
                let mean = |f: fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / k;
                s.seeds = group.len();
                s.mean_final_train_loss = mean(|r| r.final_train_loss);
                s.mean_test_loss = mean(|r| r.test_loss);
                s.mean_test_misclassification = mean(|r| r.test_misclassification);
                s
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self.rows.iter().map(|r| {
            let mut r = r.clone();
            if self.deterministic {
                r.wall_seconds = 0.0;
            }
            r
        });
        write_all(rows, out)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        write_all(self.summary(), out)
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        write_all(&self.traces, out)
    }

    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        write_all(
            self.rows.iter().map(|r| TimingRow {
                algorithm: r.algorithm,
                b: r.b,
                p: r.p,
                seed: r.seed,
                note: &r.note,
                wall_seconds: r.wall_seconds,
            }),
            out,
        )
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
        let mut r = csv::Reader::from_reader(input);
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }

    pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
        let mut r = csv::Reader::from_reader(input);
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }

    /// Writes `path` plus `.summary.csv`, `.timing.csv` and, when traces
    /// were recorded, `.trace.csv` siblings. Returns every path written.
    pub fn write_files(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut written = vec![path.to_path_buf()];
        self.write_csv(std::fs::File::create(path)?)?;
        let summary = sibling(path, "summary.csv");
        self.write_summary_csv(std::fs::File::create(&summary)?)?;
        written.push(summary);
        let timing = sibling(path, "timing.csv");
        self.write_timing_csv(std::fs::File::create(&timing)?)?;
        written.push(timing);
        if !self.traces.is_empty() {
            let trace = sibling(path, "trace.csv");
            self.write_trace_csv(std::fs::File::create(&trace)?)?;
            written.push(trace);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: Algorithm, b: usize, seed: u64, loss: f64) -> ResultRow {
        ResultRow {
            algorithm: alg,
            b,
            n: 64 / b,
            p: alg.is_accelerated().then_some(0.25),
            step_size: 0.125,
            seed,
            final_train_loss: loss,
            test_loss: loss * 2.0,
            test_misclassification: 0.1,
            wall_seconds: 1.5,
            note: String::new(),
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let table = ResultTable {
            rows: vec![
                row(Algorithm::Sgd, 1, 1, 0.1),
                row(Algorithm::Ag, 4, 2, 1.0 / 3.0),
            ],
            traces: vec![],
            deterministic: false,
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "algorithm,b,n,p,step_size,seed,final_train_loss,test_loss,test_misclassification,wall_seconds,note\n"
        ));
        assert_eq!(ResultTable::read_csv(buf.as_slice()).unwrap(), table.rows);
    }

    #[test]
    fn deterministic_tables_zero_the_clock() {
        let table = ResultTable {
            rows: vec![row(Algorithm::Sgd, 1, 1, 0.1)],
            traces: vec![],
            deterministic: true,
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(
            ResultTable::read_csv(buf.as_slice()).unwrap()[0].wall_seconds,
            0.0
        );
    }

    #[test]
    fn summary_is_mean_over_seeds() {
        let table = ResultTable {
            rows: vec![
                row(Algorithm::Sgd, 2, 1, 0.1),
                row(Algorithm::Sgd, 2, 2, 0.2),
                row(Algorithm::Sgd, 2, 3, 0.6),
                row(Algorithm::Sgd, 4, 1, 1.0),
            ],
            traces: vec![],
            deterministic: true,
        };
        let s = table.summary();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].seeds, 3);
        assert_eq!(s[0].mean_final_train_loss, (0.1 + 0.2 + 0.6) / 3.0);
        assert_eq!(s[1].mean_test_loss, 2.0);
        let mut buf = Vec::new();
        table.write_summary_csv(&mut buf).unwrap();
        assert_eq!(ResultTable::read_summary_csv(buf.as_slice()).unwrap(), s);
    }
}
