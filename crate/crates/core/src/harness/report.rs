use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::artifacts::Manifest;
use super::{HarnessError, RoundRecord};
use crate::environments::metrics::{LIFT, REGRESSION};
use crate::environments::{metric_streams, EnvKind};
use crate::risk::{bootstrap_ci, realized_marginal_expectile, Orientation, RiskError, Statistic};

pub const REPORT_VERSION: u32 = 1;

/// Point estimate with a percentile-bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Realized reward expectile at one evaluation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub q_eval: f64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub kind: EnvKind,
    pub rounds: usize,
    pub coverage: f64,
    pub resamples: usize,
    pub bootstrap_seed: u64,
    pub metrics: BTreeMap<String, Estimate>,
    pub curve: Vec<CurvePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<Estimate> {
        self.metrics.get(name).copied()
    }

    /// Learning level of the run, when a manifest is attached.
    pub fn q(&self) -> Option<f64> {
        self.manifest.as_ref().map(|m| m.config.q)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Metrics with bootstrap CIs plus the realized expectile curve of the
/// reward stream. Each statistic resamples its own seed stream.
pub fn report(
    kind: EnvKind,
    records: &[RoundRecord],
    q_eval: &[f64],
    coverage: f64,
    resamples: usize,
    seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Risk(RiskError::Empty));
    }
    let streams = metric_streams(kind, records)?;
    let mut metrics = BTreeMap::new();
    for (i, (name, s)) in streams.iter().enumerate() {
        // regression depth is empty when nothing regressed
        if s.is_empty() {
            continue;
        }
        let ci = bootstrap_ci(s, Statistic::Mean, coverage, resamples, seed.wrapping_add(i as u64))?;
        metrics.insert(
            name.clone(),
            Estimate {
                point: mean(s),
                lo: ci.lo,
                hi: ci.hi,
            },
        );
    }
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    let offset = streams.len() as u64;
    let curve = q_eval
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let point = realized_marginal_expectile(&rewards, q, Orientation::Reward)?;
            let ci = bootstrap_ci(
                &rewards,
                Statistic::RewardExpectile(q),
                coverage,
                resamples,
                seed.wrapping_add(offset + i as u64),
            )?;
            Ok(CurvePoint {
                q_eval: q,
                point,
                lo: ci.lo,
                hi: ci.hi,
            })
        })
        .collect::<Result<Vec<_>, RiskError>>()?;
    Ok(ExperimentReport {
        version: REPORT_VERSION,
        kind,
        rounds: records.len(),
        coverage,
        resamples,
        bootstrap_seed: seed,
        metrics,
        curve,
        manifest: None,
    })
}

fn csv_string<F>(fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn fmt_q(q: Option<f64>) -> String {
    q.map(|q| q.to_string()).unwrap_or_default()
}

/// Long-format expectile curves: `run,q,q_eval,point,lo,hi`.
pub fn curve_csv(runs: &[(String, ExperimentReport)]) -> String {
    csv_string(|w| {
        w.write_record(["run", "q", "q_eval", "point", "lo", "hi"])?;
        for (label, r) in runs {
            for c in &r.curve {
                w.write_record([
                    label.clone(),
                    fmt_q(r.q()),
                    c.q_eval.to_string(),
                    c.point.to_string(),
                    c.lo.to_string(),
                    c.hi.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// One row per run with `metric`, `metric_lo`, `metric_hi` columns.
pub fn metrics_csv(runs: &[(String, ExperimentReport)]) -> String {
    let names: BTreeSet<&String> = runs.iter().flat_map(|(_, r)| r.metrics.keys()).collect();
    csv_string(|w| {
        let mut header = vec!["run".to_string(), "q".to_string(), "rounds".to_string()];
        for n in &names {
            header.extend([n.to_string(), format!("{n}_lo"), format!("{n}_hi")]);
        }
        w.write_record(&header)?;
        for (label, r) in runs {
            let mut row = vec![label.clone(), fmt_q(r.q()), r.rounds.to_string()];
            for n in &names {
                match r.metrics.get(*n) {
                    Some(e) => row.extend([e.point.to_string(), e.lo.to_string(), e.hi.to_string()]),
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// A run placed in the lift/regression plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub run: String,
    pub q: Option<f64>,
    pub lift: f64,
    pub regression: f64,
}

impl ParetoPoint {
    pub fn from_report(run: &str, r: &ExperimentReport) -> Option<Self> {
        Some(Self {
            run: run.to_string(),
            q: r.q(),
            lift: r.metric(LIFT)?.point,
            regression: r.metric(REGRESSION)?.point,
        })
    }

    /// Weakly better on both axes and strictly on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.lift >= other.lift
            && self.regression <= other.regression
            && (self.lift > other.lift || self.regression < other.regression)
    }
}

/// Non-dominated points (maximize lift, minimize regression), ordered by
/// regression.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut front: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|o| o.dominates(p)))
        .cloned()
        .collect();
    front.sort_by(|a, b| a.regression.total_cmp(&b.regression).then(a.lift.total_cmp(&b.lift)));
    front
}

/// Every point with an `on_front` flag: `run,q,lift,regression,on_front`.
pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let front = pareto_front(points);
    csv_string(|w| {
        w.write_record(["run", "q", "lift", "regression", "on_front"])?;
        for p in points {
            w.write_record([
                p.run.clone(),
                fmt_q(p.q),
                p.lift.to_string(),
                p.regression.to_string(),
                front.contains(p).to_string(),
            ])?;
        }
        Ok(())
    })
}
