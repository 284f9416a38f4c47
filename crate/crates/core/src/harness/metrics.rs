//! Aggregated Monte Carlo metrics and their CSV form.

use std::io::{Read, Write};

use serde::Serialize;

use super::config::EstimatorKind;
use crate::error::{Error, Result};
use crate::support::Support;

/// `(|N \ N̂|, |N̂ \ N|)`.
pub fn support_errors(true_support: &Support, est_support: &Support) -> (usize, usize) {
    (
        true_support.difference(est_support).len(),
        est_support.difference(true_support).len(),
    )
}

/// One trial's per-time record for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorTrace {
    pub err2: Vec<f64>,
    pub misses: Vec<usize>,
    pub extras: Vec<usize>,
    /// `‖x̂ − x̂_genie_kf‖²`, present when the genie KF ran.
    pub diff2: Option<Vec<f64>>,
    pub diverged: Vec<bool>,
}

impl EstimatorTrace {
    pub fn new(len: usize, with_diff: bool) -> Self {
        Self {
            err2: vec![0.0; len],
            misses: vec![0; len],
            extras: vec![0; len],
            diff2: with_diff.then(|| vec![0.0; len]),
            diverged: vec![false; len],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub energy: Vec<f64>,
    pub traces: Vec<(EstimatorKind, EstimatorTrace)>,
}

/// Running sums over trials. Combining partial sums in any grouping gives the same
/// metrics up to floating-point reassociation.
#[derive(Debug, Clone, PartialEq)]
pub struct Totals {
    pub trials: usize,
    pub energy: Vec<f64>,
    pub per_estimator: Vec<(EstimatorKind, Sums)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sums {
    pub err2: Vec<f64>,
    pub misses: Vec<u64>,
    pub extras: Vec<u64>,
    pub diff2: Option<Vec<f64>>,
    pub divergences: Vec<u64>,
}

impl Totals {
    pub fn new(len: usize, roster: &[EstimatorKind], with_diff: bool) -> Self {
        Self {
            trials: 0,
            energy: vec![0.0; len],
            per_estimator: roster
                .iter()
                .map(|&k| {
                    (
                        k,
                        Sums {
                            err2: vec![0.0; len],
                            misses: vec![0; len],
                            extras: vec![0; len],
                            diff2: with_diff.then(|| vec![0.0; len]),
                            divergences: vec![0; len],
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn add(&mut self, rec: &TrialRecord) {
        self.trials += 1;
        add_into(&mut self.energy, &rec.energy);
        for ((k, sums), (rk, tr)) in self.per_estimator.iter_mut().zip(&rec.traces) {
            debug_assert_eq!(k, rk);
            add_into(&mut sums.err2, &tr.err2);
            for t in 0..sums.misses.len() {
                sums.misses[t] += tr.misses[t] as u64;
                sums.extras[t] += tr.extras[t] as u64;
                sums.divergences[t] += tr.diverged[t] as u64;
            }
            if let (Some(s), Some(d)) = (sums.diff2.as_mut(), tr.diff2.as_ref()) {
                add_into(s, d);
            }
        }
    }

    pub fn merge(&mut self, other: &Totals) {
        self.trials += other.trials;
        add_into(&mut self.energy, &other.energy);
        for ((_, a), (_, b)) in self.per_estimator.iter_mut().zip(&other.per_estimator) {
            add_into(&mut a.err2, &b.err2);
            for t in 0..a.misses.len() {
                a.misses[t] += b.misses[t];
                a.extras[t] += b.extras[t];
                a.divergences[t] += b.divergences[t];
            }
            if let (Some(x), Some(y)) = (a.diff2.as_mut(), b.diff2.as_ref()) {
                add_into(x, y);
            }
        }
    }

    pub fn finish(&self) -> RunMetrics {
        let n = self.trials.max(1) as f64;
        let mut rows = Vec::new();
        for t in 0..self.energy.len() {
            for (k, s) in &self.per_estimator {
                let nmse = if self.energy[t] > 0.0 {
                    s.err2[t] / self.energy[t]
                } else if s.err2[t] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                rows.push(MetricRow {
                    t,
                    estimator: *k,
                    nmse,
                    misses: s.misses[t] as f64 / n,
                    extras: s.extras[t] as f64 / n,
                    diff2: s.diff2.as_ref().map(|d| d[t] / n),
                    divergences: s.divergences[t],
                });
            }
        }
        RunMetrics {
            trials: self.trials,
            rows,
        }
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub t: usize,
    pub estimator: EstimatorKind,
    pub nmse: f64,
    /// Mean |N_t \ N̂_t|.
    pub misses: f64,
    /// Mean |N̂_t \ N_t|.
    pub extras: f64,
    /// Mean `‖x̂ − x̂_genie_kf‖²`; absent when the genie KF did not run.
    pub diff2: Option<f64>,
    /// Trials in which this step diverged.
    pub divergences: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub trials: usize,
    pub rows: Vec<MetricRow>,
}

pub const CSV_HEADER: [&str; 7] = ["t", "estimator", "nmse", "misses", "extras", "diff2", "divergences"];

/// Ten significant digits in scientific notation.
pub fn fmt10(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Config(format!("bad number '{s}' in metrics CSV"))),
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl RunMetrics {
    /// Series for one estimator, indexed by t.
    pub fn series(&self, kind: EstimatorKind) -> Vec<&MetricRow> {
        self.rows.iter().filter(|r| r.estimator == kind).collect()
    }

    pub fn nmse(&self, kind: EstimatorKind) -> Vec<f64> {
        self.series(kind).iter().map(|r| r.nmse).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_io)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.estimator.name().to_string(),
                fmt10(r.nmse),
                fmt10(r.misses),
                fmt10(r.extras),
                r.diff2.map(fmt10).unwrap_or_default(),
                r.divergences.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_io)?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Config(format!("unexpected metrics header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_io)?;
            let bad = |what: &str| Error::Config(format!("bad {what} in metrics row {rec:?}"));
            rows.push(MetricRow {
                t: rec[0].parse().map_err(|_| bad("t"))?,
                estimator: EstimatorKind::parse(&rec[1]).ok_or_else(|| bad("estimator"))?,
                nmse: parse_f64(&rec[2])?,
                misses: parse_f64(&rec[3])?,
                extras: parse_f64(&rec[4])?,
                diff2: if rec[5].is_empty() { None } else { Some(parse_f64(&rec[5])?) },
                divergences: rec[6].parse().map_err(|_| bad("divergences"))?,
            });
        }
        Ok(Self { trials: 0, rows })
    }

    /// Copy with every real value rounded to the precision written to CSV.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| parse_f64(&fmt10(v)).expect("formatted number parses");
        Self {
            trials: self.trials,
            rows: self
                .rows
                .iter()
                .map(|row| MetricRow {
                    nmse: r(row.nmse),
                    misses: r(row.misses),
                    extras: r(row.extras),
                    diff2: row.diff2.map(r),
                    ..row.clone()
                })
                .collect(),
        }
    }
}
