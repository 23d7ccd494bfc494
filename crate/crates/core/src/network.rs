//! Terminal network snapshot: sort pairs, trailer types, commodities and the
//! planner's reference plan.
//!
//! Ids are strings in instance documents and dense indices in memory. The
//! document order defines the index order, so a load/save round trip is
//! stable.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! index_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_newtype!(SortPairId);
index_newtype!(TrailerTypeId);
index_newtype!(CommodityId);
index_newtype!(LoadPairId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sort {
    Day,
    Twilight,
    Night,
    Sunrise,
}

impl Sort {
    fn ordinal(self) -> u32 {
        match self {
            Sort::Day => 0,
            Sort::Twilight => 1,
            Sort::Night => 2,
            Sort::Sunrise => 3,
        }
    }
}

/// A timed terminal node `(terminal, sort, day)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub terminal: String,
    pub sort: Sort,
    pub day: u32,
}

impl NodeId {
    pub fn new(terminal: impl Into<String>, sort: Sort, day: u32) -> Self {
        Self { terminal: terminal.into(), sort, day }
    }

    /// Position on the global sort timeline.
    fn slot(&self) -> u64 {
        self.day as u64 * 4 + self.sort.ordinal() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceClass {
    OneDay,
    TwoDay,
    ThreeDay,
    Other,
}

impl ServiceClass {
    /// Diversion-cost multiplier of the service level.
    pub fn beta(self) -> f64 {
        match self {
            ServiceClass::OneDay => 1.0,
            ServiceClass::TwoDay => 2.0,
            ServiceClass::ThreeDay => 3.0,
            ServiceClass::Other => 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortPair {
    pub name: String,
    pub origin: NodeId,
    pub destination: NodeId,
    pub allowed_trailers: Vec<TrailerTypeId>,
    pub load_pair: Option<LoadPairId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadPair {
    pub name: String,
    pub members: Vec<SortPairId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrailerType {
    pub name: String,
    pub capacity: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternate {
    pub sort_pair: SortPairId,
    /// Distance from the alternate next terminal to the destination.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub name: String,
    pub volume: f64,
    pub service_class: ServiceClass,
    pub primary: SortPairId,
    pub alternates: Vec<Alternate>,
}

impl Commodity {
    /// Primary sort pair first, then alternates in document order.
    pub fn compatible(&self) -> impl Iterator<Item = SortPairId> + '_ {
        std::iter::once(self.primary).chain(self.alternates.iter().map(|a| a.sort_pair))
    }

    pub fn is_compatible(&self, s: SortPairId) -> bool {
        self.compatible().any(|c| c == s)
    }
}

/// Planned trailer counts `gamma[s, v]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferencePlan {
    pub gamma: BTreeMap<(SortPairId, TrailerTypeId), u32>,
}

impl ReferencePlan {
    pub fn get(&self, s: SortPairId, v: TrailerTypeId) -> u32 {
        self.gamma.get(&(s, v)).copied().unwrap_or(0)
    }

    /// Reference plan from counts over the instance's `(s, v)` grid; only
    /// allowed pairs are kept.
    pub fn from_grid(inst: &Instance, counts: &[u32]) -> Result<Self> {
        if counts.len() != inst.grid_len() {
            return Err(Error::DimensionMismatch { expected: inst.grid_len(), got: counts.len() });
        }
        let gamma = inst.slots().into_iter().map(|(s, v)| ((s, v), counts[inst.grid_index(s, v)])).collect();
        Ok(Self { gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    PrimaryOnly,
    OneAlt,
    AllAlt,
}

/// A validated, immutable terminal snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub sort_pairs: Vec<SortPair>,
    pub trailer_types: Vec<TrailerType>,
    pub commodities: Vec<Commodity>,
    pub load_pairs: Vec<LoadPair>,
    pub reference_plan: Option<ReferencePlan>,
}

impl Instance {
    pub fn num_sort_pairs(&self) -> usize {
        self.sort_pairs.len()
    }

    pub fn num_trailer_types(&self) -> usize {
        self.trailer_types.len()
    }

    pub fn num_commodities(&self) -> usize {
        self.commodities.len()
    }

    pub fn sort_pair(&self, s: SortPairId) -> &SortPair {
        &self.sort_pairs[s.0]
    }

    pub fn trailer(&self, v: TrailerTypeId) -> &TrailerType {
        &self.trailer_types[v.0]
    }

    pub fn commodity(&self, k: CommodityId) -> &Commodity {
        &self.commodities[k.0]
    }

    pub fn commodity_ids(&self) -> impl Iterator<Item = CommodityId> {
        (0..self.commodities.len()).map(CommodityId)
    }

    pub fn sort_pair_ids(&self) -> impl Iterator<Item = SortPairId> {
        (0..self.sort_pairs.len()).map(SortPairId)
    }

    /// Size of the dense `(s, v)` grid, `|S|·|V|`.
    pub fn grid_len(&self) -> usize {
        self.sort_pairs.len() * self.trailer_types.len()
    }

    pub fn grid_index(&self, s: SortPairId, v: TrailerTypeId) -> usize {
        s.0 * self.trailer_types.len() + v.0
    }

    pub fn grid_pair(&self, idx: usize) -> (SortPairId, TrailerTypeId) {
        let nv = self.trailer_types.len();
        (SortPairId(idx / nv), TrailerTypeId(idx % nv))
    }

    /// Compatible `(s, v)` pairs in grid order.
    pub fn slots(&self) -> Vec<(SortPairId, TrailerTypeId)> {
        let mut out = Vec::new();
        for s in self.sort_pair_ids() {
            let mut allowed = self.sort_pair(s).allowed_trailers.clone();
            allowed.sort();
            out.extend(allowed.into_iter().map(|v| (s, v)));
        }
        out
    }

    /// 1 where trailer type `v` may run on sort pair `s`, over the grid.
    pub fn compatibility_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.grid_len()];
        for (s, v) in self.slots() {
            mask[self.grid_index(s, v)] = true;
        }
        mask
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.commodities.iter().map(|c| c.volume).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.commodities.iter().map(|c| c.volume).sum()
    }

    /// Copy with commodity volumes replaced; structure is unchanged.
    pub fn with_volumes(&self, volumes: &[f64]) -> Result<Instance> {
        if volumes.len() != self.commodities.len() {
            return Err(Error::DimensionMismatch {
                expected: self.commodities.len(),
                got: volumes.len(),
            });
        }
        let mut out = self.clone();
        for (c, &q) in out.commodities.iter_mut().zip(volumes) {
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::validation(format!("commodities[{}].volume", c.name), "must be a nonnegative number"));
            }
            c.volume = q;
        }
        Ok(out)
    }

    /// Total volume that could reach each sort pair.
    pub fn reachable_volume(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sort_pairs.len()];
        for c in &self.commodities {
            for s in c.compatible() {
                out[s.0] += c.volume;
            }
        }
        out
    }

    /// Finite upper bound on useful trailer counts: `ceil(reachable / Q_v)`.
    pub fn trailer_upper_bound(&self, s: SortPairId, v: TrailerTypeId) -> u32 {
        let reach = self.reachable_volume()[s.0];
        (reach / self.trailer(v).capacity - 1e-9).ceil().max(0.0) as u32
    }

    /// Reference plan as a dense grid vector.
    pub fn reference_grid(&self) -> Option<Vec<u32>> {
        let plan = self.reference_plan.as_ref()?;
        let mut out = vec![0; self.grid_len()];
        for (&(s, v), &n) in &plan.gamma {
            out[self.grid_index(s, v)] = n;
        }
        Some(out)
    }

    pub fn find_sort_pair(&self, name: &str) -> Option<SortPairId> {
        self.sort_pairs.iter().position(|s| s.name == name).map(SortPairId)
    }

    pub fn find_trailer(&self, name: &str) -> Option<TrailerTypeId> {
        self.trailer_types.iter().position(|t| t.name == name).map(TrailerTypeId)
    }

    pub fn find_commodity(&self, name: &str) -> Option<CommodityId> {
        self.commodities.iter().position(|c| c.name == name).map(CommodityId)
    }

    /// Checks every structural invariant. Instances built through
    /// [`load_instance`] have already passed this.
    pub fn validate(&self) -> Result<()> {
        let nv = self.trailer_types.len();
        let ns = self.sort_pairs.len();
        for t in &self.trailer_types {
            let path = format!("trailer_types[{}]", t.name);
            if !(t.capacity.is_finite() && t.capacity > 0.0) {
                return Err(Error::validation(format!("{path}.capacity"), "must be positive"));
            }
            if !(t.cost.is_finite() && t.cost > 0.0) {
                return Err(Error::validation(format!("{path}.cost"), "must be positive"));
            }
        }
        for s in &self.sort_pairs {
            let path = format!("sort_pairs[{}]", s.name);
            if s.origin == s.destination {
                return Err(Error::validation(path, "origin equals destination"));
            }
            for n in [&s.origin, &s.destination] {
                if n.terminal.is_empty() {
                    return Err(Error::validation(&path, "empty terminal name"));
                }
                if n.day < 1 {
                    return Err(Error::validation(&path, "day must be at least 1"));
                }
            }
            if s.allowed_trailers.is_empty() {
                return Err(Error::validation(format!("{path}.allowed_trailers"), "empty"));
            }
            if s.allowed_trailers.iter().any(|v| v.0 >= nv) {
                return Err(Error::validation(format!("{path}.allowed_trailers"), "unknown trailer type"));
            }
        }
        for c in &self.commodities {
            let path = format!("commodities[{}]", c.name);
            if !(c.volume.is_finite() && c.volume >= 0.0) {
                return Err(Error::validation(format!("{path}.volume"), "must be nonnegative"));
            }
            if c.compatible().any(|s| s.0 >= ns) {
                return Err(Error::validation(path, "unknown sort pair"));
            }
            for (i, a) in c.alternates.iter().enumerate() {
                if a.sort_pair == c.primary {
                    return Err(Error::validation(format!("{path}.alternates[{i}]"), "repeats the primary sort pair"));
                }
                if c.alternates[..i].iter().any(|b| b.sort_pair == a.sort_pair) {
                    return Err(Error::validation(format!("{path}.alternates[{i}]"), "duplicate alternate"));
                }
                if !(a.distance.is_finite() && a.distance >= 0.0) {
                    return Err(Error::validation(format!("{path}.alternates[{i}].distance"), "must be nonnegative"));
                }
            }
        }
        for lp in &self.load_pairs {
            let path = format!("load_pair[{}]", lp.name);
            let Some(first) = lp.members.first() else {
                return Err(Error::validation(path, "no members"));
            };
            let dest = &self.sort_pairs[first.0].destination;
            let origin = &self.sort_pairs[first.0].origin.terminal;
            let mut slots = Vec::new();
            for m in &lp.members {
                let sp = &self.sort_pairs[m.0];
                if &sp.destination != dest {
                    return Err(Error::validation(&path, format!("member {} has a different destination", sp.name)));
                }
                if &sp.origin.terminal != origin {
                    return Err(Error::validation(&path, format!("member {} has a different origin terminal", sp.name)));
                }
                slots.push(sp.origin.slot());
            }
            slots.sort_unstable();
            if slots.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::validation(path, "member origin sorts are not consecutive"));
            }
        }
        if let Some(plan) = &self.reference_plan {
            for &(s, v) in plan.gamma.keys() {
                if s.0 >= ns || !self.sort_pairs[s.0].allowed_trailers.contains(&v) {
                    return Err(Error::validation(
                        "reference_plan",
                        format!("({s}, {v}) is not a compatible sort pair / trailer type"),
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub sort_pairs: Vec<SortPairDoc>,
    pub trailer_types: Vec<TrailerTypeDoc>,
    pub commodities: Vec<CommodityDoc>,
    #[serde(default)]
    pub reference_plan: Option<Vec<PlanCountDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortPairDoc {
    pub id: String,
    pub origin: NodeId,
    pub destination: NodeId,
    pub allowed_trailers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_pair: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrailerTypeDoc {
    pub id: String,
    pub capacity: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommodityDoc {
    pub id: String,
    pub volume: f64,
    pub service_class: ServiceClass,
    pub primary: String,
    #[serde(default)]
    pub alternates: Vec<AlternateDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternateDoc {
    pub sort_pair: String,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlanCountDoc {
    pub sort_pair: String,
    pub trailer_type: String,
    pub count: u32,
}

fn intern<'a>(
    names: impl Iterator<Item = &'a str>,
    what: &str,
) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::new();
    for (i, n) in names.enumerate() {
        if n.is_empty() {
            return Err(Error::validation(format!("{what}[{i}].id"), "empty id"));
        }
        if map.insert(n, i).is_some() {
            return Err(Error::validation(format!("{what}[{i}].id"), format!("duplicate id {n:?}")));
        }
    }
    Ok(map)
}

impl InstanceDocument {
    pub fn into_instance(self) -> Result<Instance> {
        let trailers = intern(self.trailer_types.iter().map(|t| t.id.as_str()), "trailer_types")?;
        let pairs = intern(self.sort_pairs.iter().map(|s| s.id.as_str()), "sort_pairs")?;
        intern(self.commodities.iter().map(|c| c.id.as_str()), "commodities")?;

        let mut load_pairs: Vec<LoadPair> = Vec::new();
        let mut sort_pairs = Vec::with_capacity(self.sort_pairs.len());
        for (i, s) in self.sort_pairs.iter().enumerate() {
            let mut allowed = Vec::with_capacity(s.allowed_trailers.len());
            for (j, t) in s.allowed_trailers.iter().enumerate() {
                let Some(&v) = trailers.get(t.as_str()) else {
                    return Err(Error::validation(
                        format!("sort_pairs[{}].allowed_trailers[{j}]", s.id),
                        format!("unknown trailer type {t:?}"),
                    ));
                };
                if allowed.contains(&TrailerTypeId(v)) {
                    return Err(Error::validation(
                        format!("sort_pairs[{}].allowed_trailers[{j}]", s.id),
                        "duplicate trailer type",
                    ));
                }
                allowed.push(TrailerTypeId(v));
            }
            let load_pair = s.load_pair.as_ref().map(|name| {
                let idx = match load_pairs.iter().position(|l| &l.name == name) {
                    Some(idx) => idx,
                    None => {
                        load_pairs.push(LoadPair { name: name.clone(), members: Vec::new() });
                        load_pairs.len() - 1
                    }
                };
                load_pairs[idx].members.push(SortPairId(i));
                LoadPairId(idx)
            });
            sort_pairs.push(SortPair {
                name: s.id.clone(),
                origin: s.origin.clone(),
                destination: s.destination.clone(),
                allowed_trailers: allowed,
                load_pair,
            });
        }

        let lookup_pair = |path: String, name: &str| -> Result<SortPairId> {
            pairs
                .get(name)
                .map(|&i| SortPairId(i))
                .ok_or_else(|| Error::validation(path, format!("unknown sort pair {name:?}")))
        };

        let mut commodities = Vec::with_capacity(self.commodities.len());
        for c in &self.commodities {
            let primary = lookup_pair(format!("commodities[{}].primary", c.id), &c.primary)?;
            let mut alternates = Vec::with_capacity(c.alternates.len());
            for (j, a) in c.alternates.iter().enumerate() {
                let s = lookup_pair(format!("commodities[{}].alternates[{j}].sort_pair", c.id), &a.sort_pair)?;
                alternates.push(Alternate { sort_pair: s, distance: a.distance });
            }
            commodities.push(Commodity {
                name: c.id.clone(),
                volume: c.volume,
                service_class: c.service_class,
                primary,
                alternates,
            });
        }

        let reference_plan = match &self.reference_plan {
            None => None,
            Some(entries) => {
                let mut gamma = BTreeMap::new();
                for (i, e) in entries.iter().enumerate() {
                    let s = lookup_pair(format!("reference_plan[{i}].sort_pair"), &e.sort_pair)?;
                    let Some(&v) = trailers.get(e.trailer_type.as_str()) else {
                        return Err(Error::validation(
                            format!("reference_plan[{i}].trailer_type"),
                            format!("unknown trailer type {:?}", e.trailer_type),
                        ));
                    };
                    if gamma.insert((s, TrailerTypeId(v)), e.count).is_some() {
                        return Err(Error::validation(format!("reference_plan[{i}]"), "duplicate entry"));
                    }
                }
                Some(ReferencePlan { gamma })
            }
        };

        let inst = Instance {
            sort_pairs,
            trailer_types: self
                .trailer_types
                .iter()
                .map(|t| TrailerType { name: t.id.clone(), capacity: t.capacity, cost: t.cost })
                .collect(),
            commodities,
            load_pairs,
            reference_plan,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let tname = |v: TrailerTypeId| inst.trailer(v).name.clone();
        let sname = |s: SortPairId| inst.sort_pair(s).name.clone();
        InstanceDocument {
            sort_pairs: inst
                .sort_pairs
                .iter()
                .map(|s| SortPairDoc {
                    id: s.name.clone(),
                    origin: s.origin.clone(),
                    destination: s.destination.clone(),
                    allowed_trailers: s.allowed_trailers.iter().map(|&v| tname(v)).collect(),
                    load_pair: s.load_pair.map(|l| inst.load_pairs[l.0].name.clone()),
                })
                .collect(),
            trailer_types: inst
                .trailer_types
                .iter()
                .map(|t| TrailerTypeDoc { id: t.name.clone(), capacity: t.capacity, cost: t.cost })
                .collect(),
            commodities: inst
                .commodities
                .iter()
                .map(|c| CommodityDoc {
                    id: c.name.clone(),
                    volume: c.volume,
                    service_class: c.service_class,
                    primary: sname(c.primary),
                    alternates: c
                        .alternates
                        .iter()
                        .map(|a| AlternateDoc { sort_pair: sname(a.sort_pair), distance: a.distance })
                        .collect(),
                })
                .collect(),
            reference_plan: inst.reference_plan.as_ref().map(|p| {
                p.gamma
                    .iter()
                    .map(|(&(s, v), &count)| PlanCountDoc {
                        sort_pair: sname(s),
                        trailer_type: tname(v),
                        count,
                    })
                    .collect()
            }),
        }
    }
}

/// Format of an instance byte stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFormat {
    Json,
}

pub fn load_instance(source: impl Read, format: InstanceFormat) -> Result<Instance> {
    match format {
        InstanceFormat::Json => {
            let doc: InstanceDocument = serde_json::from_reader(source)?;
            doc.into_instance()
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    load_instance(text.as_bytes(), InstanceFormat::Json)
}

/// Pretty JSON with a fixed key order.
pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceDocument::from_instance(inst))
        .expect("instance documents always serialize")
}

pub fn restrict_scenario(inst: &Instance, scenario: Scenario) -> Instance {
    let mut out = inst.clone();
    match scenario {
        Scenario::AllAlt => {}
        Scenario::PrimaryOnly => out.commodities.iter_mut().for_each(|c| c.alternates.clear()),
        Scenario::OneAlt => {
            for c in &mut out.commodities {
                let beta = c.service_class.beta();
                let cheapest = c
                    .alternates
                    .iter()
                    .min_by(|a, b| {
                        (a.distance + 10.0 * beta)
                            .total_cmp(&(b.distance + 10.0 * beta))
                            .then(a.sort_pair.cmp(&b.sort_pair))
                    })
                    .cloned();
                c.alternates = cheapest.into_iter().collect();
            }
        }
    }
    out
}

/// Per-unit cost of sending commodity `k` over sort pair `s`: zero on the
/// primary, `distance + 10·beta` on an alternate.
pub fn diversion_cost(inst: &Instance, k: CommodityId, s: SortPairId) -> Result<f64> {
    let c = inst.commodity(k);
    if c.primary == s {
        return Ok(0.0);
    }
    match c.alternates.iter().find(|a| a.sort_pair == s) {
        Some(a) => Ok(a.distance + 10.0 * c.service_class.beta()),
        None => Err(Error::IncompatiblePair {
            commodity: c.name.clone(),
            sort_pair: inst.sort_pairs.get(s.0).map_or_else(|| s.to_string(), |p| p.name.clone()),
        }),
    }
}

/// Weight used when the diversion term is undefined or the instance carries
/// no volume.
pub const EPSILON_FALLBACK: f64 = 1e-9;

/// `1 / (max diversion cost · total volume)`, or an error on degenerate
/// instances.
pub fn try_epsilon_weight(inst: &Instance) -> Result<f64> {
    let total = inst.total_volume();
    let max_cost = inst
        .commodities
        .iter()
        .flat_map(|c| c.alternates.iter().map(move |a| a.distance + 10.0 * c.service_class.beta()))
        .fold(0.0, f64::max);
    if total <= 0.0 {
        return Err(Error::DegenerateInstance("total commodity volume is zero".into()));
    }
    if max_cost <= 0.0 {
        return Err(Error::DegenerateInstance("no commodity has an alternate sort pair".into()));
    }
    Ok(1.0 / (max_cost * total))
}

/// [`try_epsilon_weight`] with [`EPSILON_FALLBACK`] on degenerate instances.
pub fn epsilon_weight(inst: &Instance) -> f64 {
    try_epsilon_weight(inst).unwrap_or(EPSILON_FALLBACK)
}
