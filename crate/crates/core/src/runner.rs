//! One entry point for every planning method, used by the CLI, the service
//! and the evaluation harness.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::formulations::{solve_gdo, solve_model1, StageLimits};
use crate::greedy::{greedy_solve, iteration_bound};
use crate::metrics::Method;
use crate::network::Instance;
use crate::plan::LoadPlan;
use crate::proxy::{proxy_solve, ProxyModel};
use crate::restoration::RestorationReport;

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub plan: LoadPlan,
    pub time: Duration,
    /// Whether the method proved its plan optimal for its own objective.
    pub proven: bool,
    /// Present for the proxy.
    pub restoration: Option<RestorationReport>,
    /// Present for the proxy: the rounded network output.
    pub predicted: Option<Vec<u32>>,
}

pub fn run_method(
    inst: &Instance,
    method: Method,
    limits: &StageLimits,
    model: Option<&ProxyModel>,
) -> Result<MethodOutcome> {
    let started = Instant::now();
    let out = match method {
        Method::Mip => {
            let r = solve_model1(inst, limits)?;
            MethodOutcome {
                method,
                proven: r.mip.status == dlpp_solver::MipStatus::Optimal,
                plan: r.plan,
                time: Duration::ZERO,
                restoration: None,
                predicted: None,
            }
        }
        Method::Gdo => {
            let r = solve_gdo(inst, limits)?;
            MethodOutcome {
                method,
                proven: r.z_star_proven && r.stage2.status == dlpp_solver::MipStatus::Optimal,
                plan: r.plan,
                time: Duration::ZERO,
                restoration: None,
                predicted: None,
            }
        }
        Method::Greedy => {
            let r = greedy_solve(inst, iteration_bound(inst))?;
            MethodOutcome { method, proven: false, plan: r.plan, time: Duration::ZERO, restoration: None, predicted: None }
        }
        Method::Proxy => {
            let model = model.ok_or_else(|| Error::PreconditionViolated("proxy mode needs a trained model".into()))?;
            let r = proxy_solve(model, inst)?;
            MethodOutcome {
                method,
                proven: false,
                plan: r.plan,
                time: Duration::ZERO,
                restoration: Some(r.report),
                predicted: Some(r.predicted),
            }
        }
    };
    Ok(MethodOutcome { time: started.elapsed(), ..out })
}
