//! Content-addressed instances and solutions, persisted as JSON files under
//! the store directory and cached in memory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use dlpp_core::network::instance_to_json;
use dlpp_core::plan::{PlanDocument, TrailerCountDoc};
use dlpp_core::{parse_instance, Instance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// First 128 bits of the SHA-256 of `bytes`, hex-encoded.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationView {
    /// Pairs whose predicted capacity fell short, with the shortfall.
    pub violated: Vec<ShortfallView>,
    pub added: Vec<TrailerCountDoc>,
    pub cost_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallView {
    pub sort_pair: String,
    pub shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub id: String,
    pub instance_id: String,
    pub mode: String,
    pub seed: u64,
    pub limits: SolveLimits,
    pub cost: f64,
    pub trailers: u64,
    /// Whether the solver proved optimality for its own objective.
    pub proven: bool,
    /// Normalized distance to the reference plan.
    pub distance: Option<f64>,
    /// L1 distance of trailer counts to the reference plan.
    pub hamming: Option<f64>,
    /// Cost of the reference plan's trailers.
    pub reference_cost: Option<f64>,
    pub plan: PlanDocument,
    pub restoration: Option<RestorationView>,
    /// Rounded network output before restoration, proxy only.
    pub predicted: Option<Vec<TrailerCountDoc>>,
    pub solve_seconds: f64,
}

pub struct Store {
    dir: PathBuf,
    instances: RwLock<HashMap<String, Arc<Instance>>>,
    solutions: RwLock<HashMap<String, Arc<SolutionRecord>>>,
}

impl Store {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir.join("instances"))?;
        fs::create_dir_all(dir.join("solutions"))?;
        Ok(Self { dir: dir.to_path_buf(), instances: RwLock::default(), solutions: RwLock::default() })
    }

    fn instance_path(&self, id: &str) -> PathBuf {
        self.dir.join("instances").join(format!("{id}.json"))
    }

    fn solution_path(&self, id: &str) -> PathBuf {
        self.dir.join("solutions").join(format!("{id}.json"))
    }

    fn valid_id(id: &str) -> bool {
        id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit())
    }

    /// Registers an instance and returns its id and whether it was new.
    pub fn put_instance(&self, inst: Instance) -> std::io::Result<(String, bool)> {
        let text = instance_to_json(&inst);
        let id = content_id(text.as_bytes());
        let mut map = self.instances.write().expect("store lock");
        if map.contains_key(&id) {
            return Ok((id, false));
        }
        let path = self.instance_path(&id);
        let existed = path.exists();
        if !existed {
            fs::write(&path, &text)?;
        }
        map.insert(id.clone(), Arc::new(inst));
        Ok((id, !existed))
    }

    pub fn instance(&self, id: &str) -> Option<Arc<Instance>> {
        if !Self::valid_id(id) {
            return None;
        }
        if let Some(i) = self.instances.read().expect("store lock").get(id) {
            return Some(i.clone());
        }
        let inst = Arc::new(parse_instance(&fs::read_to_string(self.instance_path(id)).ok()?).ok()?);
        self.instances.write().expect("store lock").insert(id.to_string(), inst.clone());
        Some(inst)
    }

    pub fn put_solution(&self, rec: SolutionRecord) -> std::io::Result<Arc<SolutionRecord>> {
        let mut map = self.solutions.write().expect("store lock");
        if let Some(existing) = map.get(&rec.id) {
            return Ok(existing.clone());
        }
        fs::write(self.solution_path(&rec.id), serde_json::to_string_pretty(&rec)?)?;
        let rec = Arc::new(rec);
        map.insert(rec.id.clone(), rec.clone());
        Ok(rec)
    }

    pub fn solution(&self, id: &str) -> Option<Arc<SolutionRecord>> {
        if !Self::valid_id(id) {
            return None;
        }
        if let Some(s) = self.solutions.read().expect("store lock").get(id) {
            return Some(s.clone());
        }
        let rec: SolutionRecord = serde_json::from_str(&fs::read_to_string(self.solution_path(id)).ok()?).ok()?;
        let rec = Arc::new(rec);
        self.solutions.write().expect("store lock").insert(id.to_string(), rec.clone());
        Some(rec)
    }
}
