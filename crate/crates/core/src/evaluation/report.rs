use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::formulations::FormulationKind;
use crate::system::PowerSystem;

use super::expand::{detect_violations, HourlyExpansion};
use super::EvalError;

/// Below this the benchmark value counts as zero and the error is absolute.
const ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub benchmark: f64,
    pub candidate: f64,
    /// `100 (b − c) / b`, or `b − c` when `absolute`.
    pub error: f64,
    pub absolute: bool,
}

impl Metric {
    pub fn new(name: impl Into<String>, benchmark: f64, candidate: f64) -> Self {
        let absolute = benchmark.abs() < ZERO;
        let error = if absolute {
            benchmark - candidate
        } else {
            100.0 * (benchmark - candidate) / benchmark
        };
        Self {
            name: name.into(),
            benchmark,
            candidate,
            error,
            absolute,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationSummary {
    /// (unit, hour) entries out of bounds.
    pub count: usize,
    pub max_magnitude: f64,
    pub total_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: FormulationKind,
    pub metrics: Vec<Metric>,
    pub violations: ViolationSummary,
    /// Candidate solve time over benchmark solve time.
    pub cpu_ratio: Option<f64>,
    pub price_degenerate: bool,
}

impl EvaluationReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["formulation", "metric", "benchmark", "candidate", "error", "absolute"])?;
        for m in &self.metrics {
            w.write_record([
                self.kind.label().to_string(),
                m.name.clone(),
                m.benchmark.to_string(),
                m.candidate.to_string(),
                m.error.to_string(),
                m.absolute.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn by_tech(techs: &[String], totals: impl Iterator<Item = f64>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (tech, v) in techs.iter().zip(totals) {
        *out.entry(tech.clone()).or_insert(0.0) += v;
    }
    out
}

fn production(e: &HourlyExpansion) -> BTreeMap<String, f64> {
    let mut out = by_tech(&e.thermal_tech, e.production.columns().into_iter().map(|c| c.sum()));
    for (tech, v) in by_tech(&e.storage_tech, e.discharge.columns().into_iter().map(|c| c.sum())) {
        *out.entry(tech).or_insert(0.0) += v;
    }
    *out.entry("renewable".into()).or_insert(0.0) += e.renewable.sum();
    out
}

fn price_stats(e: &HourlyExpansion) -> Option<[f64; 4]> {
    let p = e.system_price()?;
    if p.is_empty() {
        return None;
    }
    let avg = p.iter().sum::<f64>() / p.len() as f64;
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    let load: f64 = e.demand.iter().sum();
    let weighted = if load > 0.0 {
        p.iter().zip(&e.demand).map(|(p, d)| p * d).sum::<f64>() / load
    } else {
        avg
    };
    Some([avg, max, min, weighted])
}

/// Error metrics of a candidate against the hourly benchmark, both already
/// expanded to hours. Storage bounds are checked on the candidate.
pub fn compare(benchmark: &HourlyExpansion, candidate: &HourlyExpansion, system: &PowerSystem) -> EvaluationReport {
    let (b, c) = (benchmark, candidate);
    let mut metrics = vec![Metric::new("objective", b.objective, c.objective)];

    let (pb, pc) = (production(b), production(c));
    for (tech, v) in &pb {
        metrics.push(Metric::new(format!("production:{tech}"), *v, pc.get(tech).copied().unwrap_or(0.0)));
    }
    let (sb, sc) = (
        by_tech(&b.thermal_tech, b.startups.iter().copied()),
        by_tech(&c.thermal_tech, c.startups.iter().copied()),
    );
    for (tech, v) in &sb {
        metrics.push(Metric::new(format!("startups:{tech}"), *v, sc.get(tech).copied().unwrap_or(0.0)));
    }
    if let (Some(xb), Some(xc)) = (price_stats(b), price_stats(c)) {
        for (i, name) in ["price:avg", "price:max", "price:min", "price:load_weighted"].iter().enumerate() {
            metrics.push(Metric::new(*name, xb[i], xc[i]));
        }
    }
    metrics.push(Metric::new("curtailment", b.curtailment.sum(), c.curtailment.sum()));
    metrics.push(Metric::new("pns", b.pns.sum(), c.pns.sum()));
    for (i, unit) in b.storage.iter().enumerate() {
        if let (Some(&xb), Some(&xc)) = (b.investment.get(i), c.investment.get(i)) {
            metrics.push(Metric::new(format!("investment:{unit}"), xb, xc));
        }
    }

    let found = detect_violations(c, system);
    let violations = ViolationSummary {
        count: found.len(),
        max_magnitude: found.iter().map(|v| v.magnitude).fold(0.0, f64::max),
        total_magnitude: found.iter().map(|v| v.magnitude).sum(),
    };
    let cpu_ratio = (b.solve_seconds > 0.0).then(|| c.solve_seconds / b.solve_seconds);
    EvaluationReport {
        kind: c.kind,
        metrics,
        violations,
        cpu_ratio,
        price_degenerate: b.price_degenerate || c.price_degenerate,
    }
}
