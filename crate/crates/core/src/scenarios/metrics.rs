use std::fmt::Write as _;

use super::{ScenarioError, SimLog, TrackingTolerance};

/// Share of the final samples over which the tracking RMS is taken.
pub const TAIL_FRACTION: f64 = 0.2;

/// Summary of a run. Per-output vectors are indexed by output, per-channel by control.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub scenario: String,
    pub samples: usize,
    pub tail_samples: usize,
    /// RMS of `y − y*` over the final [`TAIL_FRACTION`] of samples.
    pub rms_tail: Vec<f64>,
    pub max_abs_dy: Vec<f64>,
    /// `max y* − min y*` over the run.
    pub reference_range: Vec<f64>,
    pub max_abs_du: Vec<f64>,
    /// Time from the start until the first valid estimate of `F`.
    pub warm_up: Vec<Option<f64>>,
    pub clamped_samples: Vec<usize>,
    /// Per output, when a tolerance was given.
    pub tracking_ok: Option<Vec<bool>>,
}

impl Metrics {
    /// `key = value` lines, one per metric and index.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "tail_samples = {}", self.tail_samples);
        let per = |s: &mut String, key: &str, v: &[f64]| {
            for (i, x) in v.iter().enumerate() {
                let _ = writeln!(s, "{key}{} = {x:.9e}", i + 1);
            }
        };
        per(&mut s, "rms_tail_dy", &self.rms_tail);
        per(&mut s, "max_abs_dy", &self.max_abs_dy);
        per(&mut s, "reference_range_y", &self.reference_range);
        per(&mut s, "max_abs_du", &self.max_abs_du);
        for (j, w) in self.warm_up.iter().enumerate() {
            match w {
                Some(w) => {
                    let _ = writeln!(s, "warm_up_s{} = {w:.6}", j + 1);
                }
                None => {
                    let _ = writeln!(s, "warm_up_s{} = never", j + 1);
                }
            }
        }
        for (j, c) in self.clamped_samples.iter().enumerate() {
            let _ = writeln!(s, "clamped_samples{} = {c}", j + 1);
        }
        if let Some(ok) = &self.tracking_ok {
            for (i, b) in ok.iter().enumerate() {
                let _ = writeln!(s, "tracking_ok_y{} = {b}", i + 1);
            }
        }
        s
    }

    pub fn all_tracking_ok(&self) -> Option<bool> {
        self.tracking_ok.as_ref().map(|v| v.iter().all(|b| *b))
    }
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (sum / n as f64).sqrt()
}

/// Tracking metrics of a log. The tail holds `round(0.2·n)` samples, at least one.
///
/// With a tolerance, output `i` passes when its tail RMS is at most
/// `rms_fraction_of_range` times its reference range, or times `max(|y*|, 1)`
/// for a constant reference.
pub fn compute_metrics(log: &SimLog, tolerance: Option<TrackingTolerance>) -> Result<Metrics, ScenarioError> {
    let n = log.records.len();
    if n == 0 {
        return Err(ScenarioError::EmptyLog);
    }
    let tail = ((TAIL_FRACTION * n as f64).round() as usize).clamp(1, n);
    let tail_recs = &log.records[n - tail..];
    let per_output = |f: &dyn Fn(usize) -> f64| (0..log.outputs).map(f).collect::<Vec<_>>();

    let rms_tail = per_output(&|i| rms(tail_recs.iter().map(|r| r.dy[i])));
    let max_abs_dy = per_output(&|i| log.records.iter().map(|r| r.dy[i].abs()).fold(0.0, f64::max));
    let reference_range = per_output(&|i| {
        let (lo, hi) = log
            .records
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.y_ref[i]), hi.max(r.y_ref[i]))
            });
        hi - lo
    });
    let max_abs_du = (0..log.channels)
        .map(|j| log.records.iter().map(|r| r.du[j].abs()).fold(0.0, f64::max))
        .collect();
    let t0 = log.records[0].t;
    let warm_up = (0..log.channels)
        .map(|j| log.records.iter().find(|r| r.f_valid[j]).map(|r| r.t - t0))
        .collect();
    let clamped_samples = (0..log.channels)
        .map(|j| log.records.iter().filter(|r| r.clamped[j]).count())
        .collect();
    let tracking_ok = tolerance.map(|tol| {
        (0..log.outputs)
            .map(|i| {
                let scale = if reference_range[i] > 0.0 {
                    reference_range[i]
                } else {
                    log.records[0].y_ref[i].abs().max(1.0)
                };
                rms_tail[i] <= tol.rms_fraction_of_range * scale
            })
            .collect()
    });
    Ok(Metrics {
        scenario: log.scenario.clone(),
        samples: n,
        tail_samples: tail,
        rms_tail,
        max_abs_dy,
        reference_range,
        max_abs_du,
        warm_up,
        clamped_samples,
        tracking_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SimRecord;

    fn log_of(dy: &[f64]) -> SimLog {
        SimLog {
            scenario: "t".into(),
            outputs: 1,
            channels: 1,
            records: dy
                .iter()
                .enumerate()
                .map(|(k, &d)| SimRecord {
                    t: k as f64,
                    y: vec![k as f64 + d],
                    y_ref: vec![k as f64],
                    dy: vec![d],
                    u: vec![0.0],
                    u_nominal: vec![0.0],
                    du: vec![-d],
                    alpha: vec![1.0],
                    f_est: vec![0.0],
                    f_valid: vec![k >= 3],
                    clamped: vec![false],
                })
                .collect(),
        }
    }

    #[test]
    fn tail_rms_and_extremes() {
        let mut dy = vec![5.0; 8];
        dy.extend([3.0, 4.0]);
        let m = compute_metrics(&log_of(&dy), None).unwrap();
        assert_eq!(m.tail_samples, 2);
        assert!((m.rms_tail[0] - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.max_abs_dy[0], 5.0);
        assert_eq!(m.max_abs_du[0], 5.0);
        assert_eq!(m.reference_range[0], 9.0);
        assert_eq!(m.warm_up[0], Some(3.0));
    }

    #[test]
    fn short_logs_keep_one_tail_sample() {
        let m = compute_metrics(&log_of(&[2.0, -1.0]), None).unwrap();
        assert_eq!(m.tail_samples, 1);
        assert_eq!(m.rms_tail[0], 1.0);
        assert!(matches!(
            compute_metrics(&log_of(&[]), None),
            Err(ScenarioError::EmptyLog)
        ));
    }

    #[test]
    fn tolerance_is_relative_to_range() {
        let log = log_of(&[0.0; 10]);
        let tol = TrackingTolerance {
            rms_fraction_of_range: 0.01,
        };
        let m = compute_metrics(&log, Some(tol)).unwrap();
        assert_eq!(m.all_tracking_ok(), Some(true));
        let m = compute_metrics(&log_of(&[1.0; 10]), Some(tol)).unwrap();
        assert_eq!(m.all_tracking_ok(), Some(false));
        assert!(m.to_text().contains("tracking_ok_y1 = false"));
    }
}
