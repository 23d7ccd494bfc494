//! Learned optimization proxy: a network maps commodity volumes to trailer
//! counts, counts are rounded, and restoration makes the plan feasible.

pub mod mlp;
pub mod training;

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::predicted_capacity_share;
use crate::network::Instance;
use crate::plan::LoadPlan;
use crate::restoration::{restore, PredictedPlan, RestorationReport};

pub use mlp::Mlp;
pub use training::{grid_search, train, GridOutcome, GridSpec, Sample, Trained, TrainingConfig};

/// Checkpoint format version written by this build.
pub const CHECKPOINT_VERSION: u32 = 1;

/// The instance shape a model was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub num_sort_pairs: usize,
    pub num_trailer_types: usize,
    pub num_commodities: usize,
    pub sort_pairs: Vec<String>,
    pub trailer_types: Vec<String>,
    pub commodities: Vec<String>,
}

impl Signature {
    pub fn of(inst: &Instance) -> Self {
        Self {
            num_sort_pairs: inst.num_sort_pairs(),
            num_trailer_types: inst.num_trailer_types(),
            num_commodities: inst.num_commodities(),
            sort_pairs: inst.sort_pairs.iter().map(|s| s.name.clone()).collect(),
            trailer_types: inst.trailer_types.iter().map(|t| t.name.clone()).collect(),
            commodities: inst.commodities.iter().map(|c| c.name.clone()).collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.num_sort_pairs * self.num_trailer_types
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    #[default]
    HalfUp,
    HalfEven,
}

impl RoundingMode {
    pub fn round(self, v: f64) -> u32 {
        let r = match self {
            RoundingMode::HalfUp => (v + 0.5).floor(),
            RoundingMode::HalfEven => v.round_ties_even(),
        };
        r.max(0.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyModel {
    pub version: u32,
    pub signature: Signature,
    pub config: TrainingConfig,
    pub mask: Vec<bool>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub mlp: Mlp,
    #[serde(default)]
    pub rounding: RoundingMode,
}

impl ProxyModel {
    pub fn new(
        signature: Signature,
        mask: Vec<bool>,
        mlp: Mlp,
        input_mean: Vec<f64>,
        input_std: Vec<f64>,
        config: TrainingConfig,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            signature,
            config,
            mask,
            input_mean,
            input_std,
            mlp,
            rounding: RoundingMode::HalfUp,
        }
    }

    pub fn normalize(&self, volumes: &[f64]) -> Vec<f64> {
        volumes.iter().zip(&self.input_mean).zip(&self.input_std).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Unrounded, masked, nonnegative trailer estimates for raw volumes.
    pub fn forward_raw(&self, volumes: &[f64]) -> Vec<f64> {
        self.mlp.forward(&self.normalize(volumes), &self.mask)
    }

    /// [`forward_raw`](Self::forward_raw) with dimension checks.
    pub fn forward(&self, volumes: &[f64]) -> Result<Vec<f64>> {
        if volumes.len() != self.signature.num_commodities {
            return Err(Error::DimensionMismatch { expected: self.signature.num_commodities, got: volumes.len() });
        }
        Ok(self.forward_raw(volumes))
    }

    pub fn check_signature(&self, inst: &Instance) -> Result<()> {
        let other = Signature::of(inst);
        if other != self.signature {
            return Err(Error::SignatureMismatch(format!(
                "model expects |S|={}, |V|={}, |K|={}; instance has |S|={}, |V|={}, |K|={}{}",
                self.signature.num_sort_pairs,
                self.signature.num_trailer_types,
                self.signature.num_commodities,
                other.num_sort_pairs,
                other.num_trailer_types,
                other.num_commodities,
                if other.num_commodities == self.signature.num_commodities
                    && other.output_dim() == self.signature.output_dim()
                {
                    " (ids differ)"
                } else {
                    ""
                }
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ProxyModel = serde_json::from_str(text)?;
        if model.version != CHECKPOINT_VERSION {
            return Err(Error::SignatureMismatch(format!(
                "checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                model.version
            )));
        }
        let out = model.signature.output_dim();
        if model.mlp.input_dim() != model.signature.num_commodities
            || model.mlp.output_dim() != out
            || model.mask.len() != out
        {
            return Err(Error::SignatureMismatch("checkpoint layer shapes disagree with its signature".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Rounded prediction for an instance of the model's shape.
pub fn predict_plan(model: &ProxyModel, inst: &Instance) -> Result<PredictedPlan> {
    model.check_signature(inst)?;
    let raw = model.forward(&inst.volumes())?;
    PredictedPlan::new(inst, raw.into_iter().map(|v| model.rounding.round(v)).collect())
}

#[derive(Debug, Clone)]
pub struct ProxySolution {
    pub plan: LoadPlan,
    pub predicted: Vec<u32>,
    pub report: RestorationReport,
    pub inference_time: Duration,
    pub restoration_time: Duration,
}

impl ProxySolution {
    pub fn total_time(&self) -> Duration {
        self.inference_time + self.restoration_time
    }

    pub fn predicted_capacity_share(&self, inst: &Instance) -> f64 {
        predicted_capacity_share(inst, &self.predicted, &self.plan.y)
    }
}

/// Predict, round, restore.
pub fn proxy_solve(model: &ProxyModel, inst: &Instance) -> Result<ProxySolution> {
    let started = Instant::now();
    let pred = predict_plan(model, inst)?;
    let inference_time = started.elapsed();
    let started = Instant::now();
    let restored = restore(inst, &pred)?;
    Ok(ProxySolution {
        plan: restored.plan,
        predicted: pred.y_hat,
        report: restored.report,
        inference_time,
        restoration_time: started.elapsed(),
    })
}
