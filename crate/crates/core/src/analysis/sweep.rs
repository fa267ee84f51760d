//! Refinement schedules, convergence reports, and concurrent sweep execution.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// h, Δt, and ε halve together.
    HRefinement,
    /// ε halves at fixed h and Δt.
    Epsilon,
    /// δ halves at fixed h, Δt, ε.
    Delta,
}

impl SweepKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "h" | "h_refinement" => Some(SweepKind::HRefinement),
            "epsilon" => Some(SweepKind::Epsilon),
            "delta" => Some(SweepKind::Delta),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::HRefinement => "h_refinement",
            SweepKind::Epsilon => "epsilon",
            SweepKind::Delta => "delta",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How δ evolves across the levels of an h- or ε-sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSchedule {
    Fixed,
    /// δ halves with every level.
    Halving,
    /// δ = ε^q.
    EpsilonPower(f64),
}

impl DeltaSchedule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(DeltaSchedule::Fixed),
            "halving" => Some(DeltaSchedule::Halving),
            _ => {
                let inner = s.strip_prefix("epsilon^")?;
                inner.parse().ok().map(DeltaSchedule::EpsilonPower)
            }
        }
    }
}

impl fmt::Display for DeltaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSchedule::Fixed => f.write_str("fixed"),
            DeltaSchedule::Halving => f.write_str("halving"),
            DeltaSchedule::EpsilonPower(q) => write!(f, "epsilon^{q}"),
        }
    }
}

/// Discretization parameters of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl SweepLevel {
    /// `levels` points starting from `base` (taken as level 0).
    pub fn schedule(kind: SweepKind, base: SweepLevel, levels: usize, delta: DeltaSchedule) -> Vec<Self> {
        (0..levels)
            .map(|k| {
                let f = 0.5f64.powi(k as i32);
                let mut l = SweepLevel { level: k, ..base };
                match kind {
                    SweepKind::HRefinement => {
                        l.h = base.h * f;
                        l.dt = base.dt * f;
                        l.epsilon = base.epsilon * f;
                    }
                    SweepKind::Epsilon => l.epsilon = base.epsilon * f,
                    SweepKind::Delta => {
                        l.delta = base.delta * f;
                        return l;
                    }
                }
                l.delta = match delta {
                    DeltaSchedule::Fixed => base.delta,
                    DeltaSchedule::Halving => base.delta * f,
                    DeltaSchedule::EpsilonPower(q) => l.epsilon.powf(q),
                };
                l
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub e_u: f64,
    pub rate_u: Option<f64>,
    pub e_p: f64,
    pub rate_p: Option<f64>,
    pub runtime_s: f64,
}

/// `log₂(e_{k−1}/e_k)` for consecutive entries; the first is empty.
pub fn convergence_rates(errors: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|k| (k > 0).then(|| (errors[k - 1] / errors[k]).log2()))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Scheme, element, and profile descriptions.
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: &str = "level,h,dt,epsilon,delta,e_u,rate_u,e_p,rate_p,runtime_s";

impl ConvergenceReport {
    /// Builds rows (sorted by level) and fills in the rates.
    pub fn new(metadata: Vec<(String, String)>, mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by_key(|r| r.level);
        let ru = convergence_rates(&rows.iter().map(|r| r.e_u).collect::<Vec<_>>());
        let rp = convergence_rates(&rows.iter().map(|r| r.e_p).collect::<Vec<_>>());
        for (r, (a, b)) in rows.iter_mut().zip(ru.into_iter().zip(rp)) {
            r.rate_u = a;
            r.rate_p = b;
        }
        Self { metadata, rows }
    }

    /// CSV with the documented header. With `timing = false` the runtime column is left
    /// empty so that reports of identical runs are byte-identical; errors without a
    /// reference (NaN) are empty as well.
    pub fn write_csv(&self, mut w: impl Write, timing: bool) -> Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        let opt = |v: Option<f64>| v.filter(|v| v.is_finite()).map(|v| format!("{v:.6}")).unwrap_or_default();
        let err = |v: f64| if v.is_finite() { format!("{v:.6e}") } else { String::new() };
        for r in &self.rows {
            let runtime = if timing {
                format!("{:.3}", r.runtime_s)
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.h,
                r.dt,
                r.epsilon,
                r.delta,
                err(r.e_u),
                opt(r.rate_u),
                err(r.e_p),
                opt(r.rate_p),
                runtime
            )?;
        }
        Ok(())
    }

    pub fn errors_u(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_u).collect()
    }

    pub fn errors_p(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_p).collect()
    }
}

/// A sweep that stopped at a failing level; rows of the levels that succeeded are kept.
#[derive(Debug, thiserror::Error)]
#[error("sweep level {level} failed: {source}")]
pub struct SweepFailure {
    pub level: usize,
    pub report: ConvergenceReport,
    #[source]
    pub source: Error,
}

/// Runs every level (concurrently when `parallel`), each returning `(e_u, e_p)`.
pub fn run_sweep<F>(
    levels: &[SweepLevel],
    metadata: Vec<(String, String)>,
    parallel: bool,
    run: F,
) -> std::result::Result<ConvergenceReport, SweepFailure>
where
    F: Fn(&SweepLevel) -> Result<(f64, f64)> + Sync,
{
    let timed = |l: &SweepLevel| {
        let start = Instant::now();
        let r = run(l);
        log::info!("level {} (h = {}, eps = {}, delta = {}) done: {:?}", l.level, l.h, l.epsilon, l.delta, r.as_ref().ok());
        (*l, r, start.elapsed().as_secs_f64())
    };
    let results: Vec<_> = if parallel {
        levels.par_iter().map(timed).collect()
    } else {
        let mut out = Vec::new();
        for l in levels {
            let r = timed(l);
            let failed = r.1.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let mut rows = Vec::new();
    let mut failure = None;
    for (l, r, secs) in results {
        match r {
            Ok((e_u, e_p)) if failure.is_none() => rows.push(ReportRow {
                level: l.level,
                h: l.h,
                dt: l.dt,
                epsilon: l.epsilon,
                delta: l.delta,
                e_u,
                rate_u: None,
                e_p,
                rate_p: None,
                runtime_s: secs,
            }),
            Ok(_) => {}
            Err(e) => {
                if failure.is_none() {
                    failure = Some((l.level, e));
                }
            }
        }
    }
    let report = ConvergenceReport::new(metadata, rows);
    match failure {
        None => Ok(report),
        Some((level, source)) => Err(SweepFailure {
            level,
            report,
            source,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SweepLevel {
        SweepLevel {
            level: 0,
            h: 0.2,
            dt: 0.2,
            epsilon: 0.2,
            delta: 1e-3,
        }
    }

    #[test]
    fn rates_from_fabricated_errors() {
        assert_eq!(convergence_rates(&[0.4, 0.1]), vec![None, Some(2.0)]);
        assert_eq!(convergence_rates(&[0.4]), vec![None]);
    }

    #[test]
    fn schedules() {
        let h = SweepLevel::schedule(SweepKind::HRefinement, base(), 3, DeltaSchedule::Halving);
        assert_eq!(h[2].h, 0.05);
        assert_eq!(h[2].epsilon, 0.05);
        assert_eq!(h[2].delta, 2.5e-4);
        let e = SweepLevel::schedule(SweepKind::Epsilon, base(), 2, DeltaSchedule::EpsilonPower(3.0));
        assert_eq!(e[1].h, 0.2);
        assert!((e[1].delta - 1e-3).abs() < 1e-18);
        assert_eq!(DeltaSchedule::parse("epsilon^3"), Some(DeltaSchedule::EpsilonPower(3.0)));
    }

    #[test]
    fn failing_level_keeps_partial_report() {
        let levels = SweepLevel::schedule(SweepKind::HRefinement, base(), 3, DeltaSchedule::Fixed);
        let err = run_sweep(&levels, vec![], false, |l| {
            if l.level == 2 {
                Err(Error::Solver("boom".into()))
            } else {
                Ok((1.0 / (l.level + 1) as f64, 1.0))
            }
        })
        .unwrap_err();
        assert_eq!(err.level, 2);
        assert_eq!(err.report.rows.len(), 2);
        assert_eq!(err.report.rows[1].rate_u, Some(1.0));
    }

    #[test]
    fn csv_without_timing_is_deterministic() {
        let levels = SweepLevel::schedule(SweepKind::HRefinement, base(), 2, DeltaSchedule::Fixed);
        let rep = run_sweep(&levels, vec![], true, |l| Ok((0.4 / 4f64.powi(l.level as i32), 0.1))).unwrap();
        let mut a = Vec::new();
        rep.write_csv(&mut a, false).unwrap();
        let text = String::from_utf8(a).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert!(lines[1].ends_with(",,1.000000e-1,,"));
        assert!(lines[2].contains(",2.000000,"));
    }
}
