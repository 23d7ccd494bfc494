//! Perturbed instances, GDO labels and on-disk datasets.
//!
//! Randomness comes from ChaCha8 seeded with the dataset seed; instance `i`
//! draws from stream `i`, so it is reproducible regardless of how many
//! instances are generated or how many threads label them.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use dlpp_solver::MipStatus;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::InstanceBuilder;
use crate::formulations::{solve_gdo, StageLimits};
use crate::network::{instance_to_json, parse_instance, Instance, ReferencePlan, ServiceClass};
use crate::oracles::min_knapsack;
use crate::proxy::Sample;

pub const GLOBAL_SCALE_RANGE: (f64, f64) = (0.8, 1.2);
pub const COMMODITY_NOISE_STD: f64 = 0.05;
pub const MANIFEST_VERSION: u32 = 1;

/// The stream used for the train/validation/test shuffle; instance streams
/// are `0..n`.
const SPLIT_STREAM: u64 = u64::MAX;

/// Multipliers applied to the reference volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub global: f64,
    pub per_commodity: Vec<f64>,
}

impl Factors {
    pub fn identity(num_commodities: usize) -> Self {
        Self { global: 1.0, per_commodity: vec![1.0; num_commodities] }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the global scale from U[0.8, 1.2] and per-commodity noise from
/// N(1, 0.05). Negative noise draws clamp to zero.
pub fn sample_factors(num_commodities: usize, seed: u64, index: u64) -> Factors {
    let mut rng = stream_rng(seed, index);
    let global = Uniform::new_inclusive(GLOBAL_SCALE_RANGE.0, GLOBAL_SCALE_RANGE.1)
        .expect("static range")
        .sample(&mut rng);
    let noise = Normal::new(1.0, COMMODITY_NOISE_STD).expect("static distribution");
    let per_commodity = (0..num_commodities).map(|_| noise.sample(&mut rng).max(0.0)).collect();
    Factors { global, per_commodity }
}

pub fn apply_factors(reference: &Instance, factors: &Factors) -> Result<Instance> {
    if factors.per_commodity.len() != reference.num_commodities() {
        return Err(Error::DimensionMismatch {
            expected: reference.num_commodities(),
            got: factors.per_commodity.len(),
        });
    }
    let volumes: Vec<f64> = reference
        .commodities
        .iter()
        .zip(&factors.per_commodity)
        .map(|(c, eta)| factors.global * eta * c.volume)
        .collect();
    reference.with_volumes(&volumes)
}

/// Instance `index` of the family around `reference`. Structure, paths and
/// the reference plan are unchanged.
pub fn perturb(reference: &Instance, seed: u64, index: u64) -> Result<Instance> {
    apply_factors(reference, &sample_factors(reference.num_commodities(), seed, index))
}

/// Reference plan that ships every commodity on its primary pair and covers
/// each pair with the cheapest trailer mix.
pub fn primary_only_reference(inst: &Instance) -> ReferencePlan {
    let mut load = vec![0.0; inst.num_sort_pairs()];
    for c in &inst.commodities {
        load[c.primary.index()] += c.volume;
    }
    let mut gamma = std::collections::BTreeMap::new();
    for s in inst.sort_pair_ids() {
        let allowed = &inst.sort_pair(s).allowed_trailers;
        let types: Vec<_> = allowed.iter().map(|&v| inst.trailer(v).clone()).collect();
        let cover = min_knapsack(load[s.index()], &types);
        for (&v, &n) in allowed.iter().zip(&cover.counts) {
            gamma.insert((s, v), n);
        }
    }
    ReferencePlan { gamma }
}

/// A desk-scale terminal: 10 outbound sort pairs, 50 commodities, a
/// 50-cube and a 25-cube trailer type, and a primary-only reference plan.
pub fn synthetic_terminal(seed: u64) -> Instance {
    const PAIRS: usize = 10;
    const COMMODITIES: usize = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = InstanceBuilder::new().trailer("t50", 50.0, 50.0).trailer("t25", 25.0, 30.0);
    let names: Vec<String> = (0..PAIRS).map(|i| format!("s{i:02}")).collect();
    for (i, name) in names.iter().enumerate() {
        // A couple of doors only take the large trailer.
        let allowed: &[&str] = if i % 5 == 4 { &["t50"] } else { &["t50", "t25"] };
        b = b.sort_pair(name, allowed);
    }
    let classes = [ServiceClass::OneDay, ServiceClass::TwoDay, ServiceClass::ThreeDay, ServiceClass::Other];
    for k in 0..COMMODITIES {
        let primary = k % PAIRS;
        let volume = (rng.random_range(4.0..36.0_f64) * 10.0).round() / 10.0;
        let class = classes[rng.random_range(0..classes.len())];
        let num_alts = rng.random_range(0..=2usize);
        let mut others: Vec<usize> = (0..PAIRS).filter(|&s| s != primary).collect();
        others.shuffle(&mut rng);
        let alts: Vec<(&str, f64)> = others[..num_alts]
            .iter()
            .map(|&s| (names[s].as_str(), rng.random_range(10.0..200.0_f64).round()))
            .collect();
        b = b.commodity(&format!("k{k:02}"), volume, class, &names[primary], &alts);
    }
    let mut inst = b.build().expect("synthetic terminal is valid by construction");
    inst.reference_plan = Some(primary_only_reference(&inst));
    inst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Deterministic 80/10/10 assignment of `n` indices.
pub fn split_assignment(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let n_train = (n as f64 * 0.8).round() as usize;
    let n_val = ((n as f64 * 0.1).round() as usize).min(n - n_train);
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelStatus {
    /// Both stages proved optimality.
    Optimal,
    /// A stage stopped at its limit; the label is feasible but unproven.
    LimitReached,
    Failed,
}

#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub index: usize,
    pub instance: Instance,
    pub split: Split,
    pub status: LabelStatus,
    /// GDO trailer counts over the `(s, v)` grid; empty when labeling failed.
    pub label: Vec<u32>,
    pub label_cost: f64,
    pub failure: Option<String>,
    pub gdo_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub reference: Instance,
    pub seed: u64,
    pub items: Vec<LabeledInstance>,
}

impl Dataset {
    pub fn num_failed(&self) -> usize {
        self.items.iter().filter(|i| i.status == LabelStatus::Failed).count()
    }

    pub fn num_unproven(&self) -> usize {
        self.items.iter().filter(|i| i.status == LabelStatus::LimitReached).count()
    }

    /// Usable items of one split. Failed labels are always excluded;
    /// unproven ones only when `proven_only` is set.
    pub fn split(&self, split: Split, proven_only: bool) -> Vec<&LabeledInstance> {
        self.items
            .iter()
            .filter(|i| i.split == split)
            .filter(|i| match i.status {
                LabelStatus::Optimal => true,
                LabelStatus::LimitReached => !proven_only,
                LabelStatus::Failed => false,
            })
            .collect()
    }

    pub fn samples(&self, split: Split, proven_only: bool) -> Vec<Sample> {
        self.split(split, proven_only)
            .into_iter()
            .map(|i| Sample {
                volumes: i.instance.volumes(),
                label: i.label.iter().map(|&n| n as f64).collect(),
            })
            .collect()
    }

    pub fn split_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for i in &self.items {
            out[i.split as usize] += 1;
        }
        out
    }
}

/// Labels one instance with GDO. Errors become a failed label.
pub fn label_instance(inst: &Instance, limits: &StageLimits) -> (LabelStatus, Vec<u32>, f64, Option<String>, Duration) {
    let started = Instant::now();
    let res = solve_gdo(inst, limits).and_then(|g| {
        g.plan.check(inst)?;
        Ok(g)
    });
    let elapsed = started.elapsed();
    match res {
        Ok(g) => {
            let proven = g.stage1.status == MipStatus::Optimal && g.stage2.status == MipStatus::Optimal;
            let status = if proven { LabelStatus::Optimal } else { LabelStatus::LimitReached };
            let cost = g.plan.cost(inst);
            (status, g.plan.y, cost, None, elapsed)
        }
        Err(e) => (LabelStatus::Failed, Vec::new(), f64::NAN, Some(e.to_string()), elapsed),
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::PreconditionViolated(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Generates and labels `n` perturbations of `reference`. `jobs == 0` uses
/// the global thread pool. Labeling failures are recorded per instance and
/// never abort the batch.
pub fn generate_dataset(
    reference: &Instance,
    n: usize,
    seed: u64,
    limits: &StageLimits,
    jobs: usize,
) -> Result<Dataset> {
    if reference.reference_plan.is_none() {
        return Err(Error::MissingReference);
    }
    let instances = (0..n).map(|i| perturb(reference, seed, i as u64)).collect::<Result<Vec<_>>>()?;
    let splits = split_assignment(n, seed);
    let labels = with_pool(jobs, || {
        instances.par_iter().map(|inst| label_instance(inst, limits)).collect::<Vec<_>>()
    })?;
    let items = instances
        .into_iter()
        .zip(labels)
        .zip(splits)
        .enumerate()
        .map(|(index, ((instance, (status, label, label_cost, failure, gdo_time)), split))| {
            if let Some(f) = &failure {
                log::warn!("instance {index}: labeling failed: {f}");
            }
            LabeledInstance { index, instance, split, status, label, label_cost, failure, gdo_time }
        })
        .collect();
    Ok(Dataset { reference: reference.clone(), seed, items })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub steps: usize,
    pub scale_from: f64,
    pub scale_to: f64,
    /// Adds per-commodity noise drawn from this seed when set.
    pub noise_seed: Option<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { steps: 50, scale_from: 0.8, scale_to: 1.2, noise_seed: None }
    }
}

/// Instances spanning a range of global scales, ordered by nondecreasing
/// total volume.
pub fn generate_sweep(reference: &Instance, spec: &SweepSpec) -> Result<Vec<Instance>> {
    if spec.steps == 0 || !(spec.scale_from >= 0.0) || !(spec.scale_to >= 0.0) {
        return Err(Error::PreconditionViolated("sweep needs steps ≥ 1 and nonnegative scales".into()));
    }
    let nk = reference.num_commodities();
    let mut out = (0..spec.steps)
        .map(|i| {
            let t = if spec.steps == 1 { 0.0 } else { i as f64 / (spec.steps - 1) as f64 };
            let global = spec.scale_from + t * (spec.scale_to - spec.scale_from);
            let per_commodity = match spec.noise_seed {
                Some(seed) => sample_factors(nk, seed, i as u64).per_commodity,
                None => vec![1.0; nk],
            };
            apply_factors(reference, &Factors { global, per_commodity })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.total_volume().total_cmp(&b.total_volume()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub file: String,
    pub split: Split,
    pub status: LabelStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub reference: String,
    pub labels: String,
    pub num_failed: usize,
    pub num_unproven: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelRecord {
    index: usize,
    cost: Option<f64>,
    y: Vec<u32>,
}

/// Writes `reference.json`, `instances/NNNNN.json`, `labels.json` and
/// `manifest.json` under `dir`. Contents depend only on the dataset, not
/// on timing.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("instances"))?;
    fs::write(dir.join("reference.json"), instance_to_json(&ds.reference))?;
    let mut entries = Vec::with_capacity(ds.items.len());
    let mut labels = Vec::with_capacity(ds.items.len());
    for it in &ds.items {
        let file = format!("instances/{:05}.json", it.index);
        fs::write(dir.join(&file), instance_to_json(&it.instance))?;
        entries.push(ManifestEntry { index: it.index, file, split: it.split, status: it.status, failure: it.failure.clone() });
        labels.push(LabelRecord {
            index: it.index,
            cost: it.label_cost.is_finite().then_some(it.label_cost),
            y: it.label.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: ds.seed,
        reference: "reference.json".into(),
        labels: "labels.json".into(),
        num_failed: ds.num_failed(),
        num_unproven: ds.num_unproven(),
        entries,
    };
    fs::write(dir.join("labels.json"), serde_json::to_string_pretty(&labels)?)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::validation("manifest.version", format!("unsupported version {}", manifest.version)));
    }
    let reference = parse_instance(&fs::read_to_string(dir.join(&manifest.reference))?)?;
    let labels: Vec<LabelRecord> = serde_json::from_str(&fs::read_to_string(dir.join(&manifest.labels))?)?;
    if labels.len() != manifest.entries.len() {
        return Err(Error::DimensionMismatch { expected: manifest.entries.len(), got: labels.len() });
    }
    let grid = reference.grid_len();
    let mut items = Vec::with_capacity(labels.len());
    for (e, l) in manifest.entries.into_iter().zip(labels) {
        if e.index != l.index {
            return Err(Error::validation("labels.json", format!("entry {} has label for index {}", e.index, l.index)));
        }
        if e.status != LabelStatus::Failed && l.y.len() != grid {
            return Err(Error::DimensionMismatch { expected: grid, got: l.y.len() });
        }
        let instance = parse_instance(&fs::read_to_string(dir.join(&e.file))?)?;
        items.push(LabeledInstance {
            index: e.index,
            instance,
            split: e.split,
            status: e.status,
            label: l.y,
            label_cost: l.cost.unwrap_or(f64::NAN),
            failure: e.failure,
            gdo_time: Duration::ZERO,
        });
    }
    Ok(Dataset { reference, seed: manifest.seed, items })
}
