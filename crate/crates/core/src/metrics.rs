//! Plan quality and consistency metrics.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Instance;
use crate::plan::LoadPlan;

/// Shift used when aggregating optimality gaps (as fractions).
pub const GAP_SHIFT: f64 = 0.01;
/// Shift used when aggregating wall times in seconds.
pub const TIME_SHIFT: f64 = 1.0;
/// Shift inside the normalized distance.
pub const DISTANCE_SHIFT: f64 = 0.01;

/// `exp(mean(log(x + shift))) − shift`.
pub fn shifted_geomean(xs: &[f64], shift: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut acc = 0.0;
    for &x in xs {
        let v = x + shift;
        if !(v > 0.0) {
            return Err(Error::NonpositiveShifted(v));
        }
        acc += v.ln();
    }
    // The mean lies between the extremes; clamping removes the rounding
    // noise of exp/ln so constant inputs come back exactly.
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(((acc / xs.len() as f64).exp() - shift).clamp(lo, hi))
}

/// Which `(s, v)` cells the normalized distance averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceDomain {
    /// Compatible cells only.
    #[default]
    Compatible,
    /// Every cell of the `|S|·|V|` grid.
    Full,
}

impl DistanceDomain {
    pub fn cells(self, inst: &Instance) -> Vec<usize> {
        match self {
            DistanceDomain::Full => (0..inst.grid_len()).collect(),
            DistanceDomain::Compatible => {
                inst.compatibility_mask().iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
            }
        }
    }
}

/// Relative deviation of `y` from `gamma` over `domain`, aggregated with a
/// shifted geometric mean. Cells with `gamma = 0` use the absolute deviation.
pub fn normalized_distance(y: &[f64], gamma: &[f64], domain: &[usize]) -> Result<f64> {
    if domain.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let per_cell: Vec<f64> = domain
        .iter()
        .map(|&i| {
            let d = (y[i] - gamma[i]).abs();
            if gamma[i] == 0.0 {
                d
            } else {
                d / gamma[i]
            }
        })
        .collect();
    shifted_geomean(&per_cell, DISTANCE_SHIFT)
}

/// [`normalized_distance`] of a plan to the instance's reference plan.
pub fn plan_distance(inst: &Instance, plan: &LoadPlan, domain: DistanceDomain) -> Result<f64> {
    let gamma = inst.reference_grid().ok_or(Error::MissingReference)?;
    let gamma: Vec<f64> = gamma.iter().map(|&g| g as f64).collect();
    normalized_distance(&plan.y_f64(), &gamma, &domain.cells(inst))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalVariation {
    pub value: f64,
    /// Set when fewer than two plans were given (value is 0).
    pub fewer_than_two: bool,
}

/// `Σ ‖y[i+1] − y[i]‖₂` over a sequence ordered by total volume.
pub fn total_variation(plans: &[Vec<f64>]) -> TotalVariation {
    let value = plans
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
        .sum();
    TotalVariation { value, fewer_than_two: plans.len() < 2 }
}

/// `(z_hat − z_ref) / |z_ref|`; the absolute difference when `z_ref = 0`.
pub fn optimality_gap(z_hat: f64, z_ref: f64) -> f64 {
    if z_ref.abs() < 1e-12 {
        (z_hat - z_ref).abs()
    } else {
        (z_hat - z_ref) / z_ref.abs()
    }
}

/// Share of the final trailer capacity that was already present in the
/// prediction.
pub fn predicted_capacity_share(inst: &Instance, predicted: &[u32], final_y: &[u32]) -> f64 {
    let (mut kept, mut total) = (0.0, 0.0);
    for (i, (&p, &f)) in predicted.iter().zip(final_y).enumerate() {
        let q = inst.trailer(inst.grid_pair(i).1).capacity;
        kept += q * p.min(f) as f64;
        total += q * f as f64;
    }
    if total == 0.0 {
        1.0
    } else {
        kept / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mip,
    Gdo,
    Greedy,
    Proxy,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mip => "mip",
            Method::Gdo => "gdo",
            Method::Greedy => "greedy",
            Method::Proxy => "proxy",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mip" => Ok(Method::Mip),
            "gdo" => Ok(Method::Gdo),
            "greedy" => Ok(Method::Greedy),
            "proxy" => Ok(Method::Proxy),
            _ => Err(format!("unknown method {s:?} (expected mip, gdo, greedy or proxy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub instance: String,
    pub method: Method,
    pub cost: f64,
    pub gap: f64,
    /// Normalized distance to the reference plan, if there is one.
    pub distance: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<MethodRow>,
}

/// One method's plan on one instance.
pub struct MethodRun<'a> {
    pub method: Method,
    pub plan: &'a LoadPlan,
    pub time: Duration,
}

/// Evaluates each run against `z_ref` (the best known cost or bound).
/// Infeasible plans are rejected with the violated constraint.
pub fn evaluate(
    inst: &Instance,
    instance_name: &str,
    runs: &[MethodRun<'_>],
    z_ref: f64,
    domain: DistanceDomain,
) -> Result<EvaluationReport> {
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        run.plan.check(inst)?;
        let cost = run.plan.cost(inst);
        let distance = match inst.reference_plan {
            Some(_) => Some(plan_distance(inst, run.plan, domain)?),
            None => None,
        };
        rows.push(MethodRow {
            instance: instance_name.to_string(),
            method: run.method,
            cost,
            gap: optimality_gap(cost, z_ref),
            distance,
            seconds: run.time.as_secs_f64(),
        });
    }
    Ok(EvaluationReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub instances: usize,
    /// Shifted geometric mean of the gap, as a fraction.
    pub gap: f64,
    pub distance: Option<f64>,
    pub seconds: f64,
}

impl EvaluationReport {
    pub fn extend(&mut self, other: EvaluationReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,method,cost,gap,distance,seconds\n");
        for r in &self.rows {
            let d = r.distance.map_or(String::new(), |d| d.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{}", r.instance, r.method.as_str(), r.cost, r.gap, d, r.seconds);
        }
        out
    }

    /// Per-method shifted geometric means, in method order.
    pub fn summary(&self) -> Result<Vec<MethodSummary>> {
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        methods
            .into_iter()
            .map(|m| {
                let rows: Vec<&MethodRow> = self.rows.iter().filter(|r| r.method == m).collect();
                let gaps: Vec<f64> = rows.iter().map(|r| r.gap.max(0.0)).collect();
                let secs: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
                let dists: Vec<f64> = rows.iter().filter_map(|r| r.distance).collect();
                Ok(MethodSummary {
                    method: m,
                    instances: rows.len(),
                    gap: shifted_geomean(&gaps, GAP_SHIFT)?,
                    distance: if dists.is_empty() { None } else { Some(shifted_geomean(&dists, DISTANCE_SHIFT)?) },
                    seconds: shifted_geomean(&secs, TIME_SHIFT)?,
                })
            })
            .collect()
    }
}
