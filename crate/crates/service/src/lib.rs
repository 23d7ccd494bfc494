//! HTTP API for uploading instances, solving them, and what-if analysis on
//! commodity volumes. All routes live under `/v1`; see `docs/openapi.yaml`.
//!
//! Solves run on blocking threads behind a fixed number of worker permits.
//! When every permit is taken a new solve is refused with 409 rather than
//! queued. Results are content-addressed, so repeating a request returns
//! the stored solution without solving again.

pub mod error;
pub mod store;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use dlpp_core::metrics::{normalized_distance, plan_distance, DistanceDomain};
use dlpp_core::network::InstanceDocument;
use dlpp_core::plan::TrailerCountDoc;
use dlpp_core::proxy::ProxyModel;
use dlpp_core::{run_method, Instance, LoadPlan, Method, StageLimits};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

pub use error::ApiError;
use store::{content_id, RestorationView, ShortfallView, SolutionRecord, SolveLimits, Store};

pub const OPENAPI: &str = include_str!("../docs/openapi.yaml");

/// Node limit per MIP stage when a request sets neither limit.
pub const DEFAULT_NODE_LIMIT: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    model: Option<Arc<ProxyModel>>,
    model_id: Option<String>,
    workers: Arc<Semaphore>,
}

impl AppState {
    /// `workers` bounds concurrent solves; zero refuses every uncached solve.
    pub fn new(store_dir: &Path, model: Option<ProxyModel>, workers: usize) -> std::io::Result<Self> {
        let model_id = model.as_ref().map(|m| content_id(m.to_json().as_bytes()));
        Ok(Self {
            store: Arc::new(Store::open(store_dir)?),
            model: model.map(Arc::new),
            model_id,
            workers: Arc::new(Semaphore::new(workers)),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/openapi.yaml", get(|| async { OPENAPI }))
        .route("/v1/instances", post(upload_instance))
        .route("/v1/instances/{id}", get(get_instance))
        .route("/v1/instances/{id}/solve", post(solve))
        .route("/v1/instances/{id}/whatif", post(whatif))
        .route("/v1/solutions/{id}", get(get_solution))
        .route("/v1/compare", get(compare))
        .with_state(state)
}

/// Deserializes a JSON body, reporting the failing field's path.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(e.into_inner().to_string(), (path != ".").then_some(path))
    })
}

fn store_error(e: std::io::Error) -> ApiError {
    ApiError::internal(format!("store: {e}"))
}

#[derive(Debug, Serialize)]
pub struct InstanceCreated {
    pub id: String,
    pub created: bool,
}

async fn upload_instance(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<InstanceCreated>), ApiError> {
    let doc: InstanceDocument = parse_body(&body)?;
    let inst = doc.into_instance()?;
    let (id, created) = st.store.put_instance(inst).map_err(store_error)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(InstanceCreated { id, created })))
}

#[derive(Debug, Serialize)]
pub struct InstanceSummary {
    pub sort_pairs: usize,
    pub trailer_types: usize,
    pub commodities: usize,
    pub total_volume: f64,
    pub has_reference: bool,
}

#[derive(Debug, Serialize)]
pub struct InstanceView {
    pub id: String,
    pub summary: InstanceSummary,
    pub instance: InstanceDocument,
}

async fn get_instance(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<InstanceView>, ApiError> {
    let inst = st.store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?;
    Ok(Json(InstanceView {
        summary: InstanceSummary {
            sort_pairs: inst.num_sort_pairs(),
            trailer_types: inst.num_trailer_types(),
            commodities: inst.num_commodities(),
            total_volume: inst.total_volume(),
            has_reference: inst.reference_plan.is_some(),
        },
        instance: InstanceDocument::from_instance(&inst),
        id,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Mip,
    Gdo,
    Greedy,
    #[default]
    Proxy,
}

impl Mode {
    fn method(self) -> Method {
        match self {
            Mode::Mip => Method::Mip,
            Mode::Gdo => Method::Gdo,
            Mode::Greedy => Method::Greedy,
            Mode::Proxy => Method::Proxy,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub mode: Mode,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    #[serde(default)]
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SolveResponse {
    pub solution_id: String,
    pub cached: bool,
    pub solution: SolutionRecord,
}

fn limits_of(req: &SolveRequest) -> Result<SolveLimits, ApiError> {
    if let Some(t) = req.time_limit_s {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ApiError::bad_request("must be a positive number of seconds", Some("time_limit_s".into())));
        }
    }
    Ok(match (req.time_limit_s, req.node_limit) {
        (None, None) => SolveLimits { time_limit_s: None, node_limit: Some(DEFAULT_NODE_LIMIT) },
        (t, n) => SolveLimits { time_limit_s: t, node_limit: n },
    })
}

fn counts_doc(inst: &Instance, y: &[u32]) -> Vec<TrailerCountDoc> {
    inst.slots()
        .into_iter()
        .map(|(s, v)| TrailerCountDoc {
            sort_pair: inst.sort_pair(s).name.clone(),
            trailer_type: inst.trailer(v).name.clone(),
            count: y[inst.grid_index(s, v)],
        })
        .collect()
}

/// Solves `inst` or returns the stored solution for the same request.
async fn solve_stored(st: &AppState, instance_id: &str, inst: Arc<Instance>, req: &SolveRequest) -> Result<SolveResponse, ApiError> {
    let limits = limits_of(req)?;
    let mode = req.mode.method();
    let model = match mode {
        Method::Proxy => Some(st.model.clone().ok_or_else(|| ApiError::unprocessable("no proxy model is loaded"))?),
        _ => None,
    };
    let key = serde_json::json!({
        "instance": instance_id,
        "mode": mode.as_str(),
        "seed": req.seed,
        "limits": &limits,
        "model": if mode == Method::Proxy { st.model_id.clone() } else { None },
    });
    let id = content_id(key.to_string().as_bytes());
    if let Some(rec) = st.store.solution(&id) {
        return Ok(SolveResponse { solution_id: id, cached: true, solution: (*rec).clone() });
    }

    let permit = st.workers.clone().try_acquire_owned().map_err(|_| ApiError::busy())?;
    let stage = StageLimits {
        time_limit: limits.time_limit_s.map(Duration::from_secs_f64),
        node_limit: limits.node_limit,
    };
    let inst2 = inst.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        run_method(&inst2, mode, &stage, model.as_deref())
    })
    .await
    .map_err(|e| ApiError::internal(format!("solver task: {e}")))??;

    let plan = &outcome.plan;
    let gamma = inst.reference_grid();
    let distance = match gamma {
        Some(_) => Some(plan_distance(&inst, plan, DistanceDomain::Compatible)?),
        None => None,
    };
    let restoration = outcome.restoration.as_ref().map(|r| RestorationView {
        violated: r
            .violated
            .iter()
            .map(|v| ShortfallView { sort_pair: inst.sort_pair(v.sort_pair).name.clone(), shortfall: v.z })
            .collect(),
        added: r
            .added
            .iter()
            .map(|a| TrailerCountDoc {
                sort_pair: inst.sort_pair(a.sort_pair).name.clone(),
                trailer_type: inst.trailer(a.trailer_type).name.clone(),
                count: a.count,
            })
            .collect(),
        cost_delta: r.cost_delta,
    });
    let rec = SolutionRecord {
        id: id.clone(),
        instance_id: instance_id.to_string(),
        mode: mode.as_str().to_string(),
        seed: req.seed,
        limits,
        cost: plan.cost(&inst),
        trailers: plan.trailer_count(),
        proven: outcome.proven,
        hamming: gamma.as_ref().map(|g| plan.hamming_distance(g)),
        reference_cost: gamma.as_ref().map(|g| {
            g.iter().enumerate().map(|(i, &n)| n as f64 * inst.trailer(inst.grid_pair(i).1).cost).sum()
        }),
        distance,
        plan: plan.to_document(&inst),
        restoration,
        predicted: outcome.predicted.as_ref().map(|p| counts_doc(&inst, p)),
        solve_seconds: outcome.time.as_secs_f64(),
    };
    let rec = st.store.put_solution(rec).map_err(store_error)?;
    Ok(SolveResponse { solution_id: id, cached: false, solution: (*rec).clone() })
}

async fn solve(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SolveResponse>, ApiError> {
    let inst = st.store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?;
    let req: SolveRequest = parse_body(&body)?;
    Ok(Json(solve_stored(&st, &id, inst, &req).await?))
}

async fn get_solution(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SolutionRecord>, ApiError> {
    let rec = st.store.solution(&id).ok_or_else(|| ApiError::not_found("solution", &id))?;
    Ok(Json((*rec).clone()))
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default = "one")]
    pub global_scale: f64,
    /// Absolute volumes by commodity id, applied after scaling.
    #[serde(default)]
    pub per_commodity_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
    #[serde(default)]
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct WhatIfResponse {
    pub base_instance_id: String,
    pub instance_id: String,
    pub solution_id: String,
    pub total_volume: f64,
    pub solution: SolutionRecord,
}

async fn whatif(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let base = st.store.instance(&id).ok_or_else(|| ApiError::not_found("instance", &id))?;
    let req: WhatIfRequest = parse_body(&body)?;
    if !(req.global_scale >= 0.0 && req.global_scale.is_finite()) {
        return Err(ApiError::bad_request("must be a nonnegative number", Some("global_scale".into())));
    }
    let mut volumes: Vec<f64> = base.volumes().iter().map(|q| q * req.global_scale).collect();
    for (name, &q) in &req.per_commodity_overrides {
        let path = Some(format!("per_commodity_overrides.{name}"));
        let k = base.find_commodity(name).ok_or_else(|| ApiError::bad_request("unknown commodity", path.clone()))?;
        if !(q >= 0.0 && q.is_finite()) {
            return Err(ApiError::bad_request("must be a nonnegative number", path));
        }
        volumes[k.index()] = q;
    }
    let derived = base.with_volumes(&volumes)?;
    let total_volume = derived.total_volume();
    let (derived_id, _) = st.store.put_instance(derived).map_err(store_error)?;
    let inst = st.store.instance(&derived_id).ok_or_else(|| ApiError::internal("derived instance vanished"))?;
    let solve_req = SolveRequest { mode: req.mode, time_limit_s: req.time_limit_s, node_limit: req.node_limit, seed: req.seed };
    let res = solve_stored(&st, &derived_id, inst, &solve_req).await?;
    Ok(Json(WhatIfResponse {
        base_instance_id: id,
        instance_id: derived_id,
        solution_id: res.solution_id,
        total_volume,
        solution: res.solution,
    }))
}

#[derive(Debug, Deserialize)]
pub struct CompareQuery {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Serialize)]
pub struct CellDiff {
    pub sort_pair: String,
    pub trailer_type: String,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Serialize)]
pub struct CompareResponse {
    pub a: String,
    pub b: String,
    /// Normalized distance of `b`'s trailer counts from `a`'s.
    pub delta: f64,
    /// L1 change in trailer counts from `a` to `b`.
    pub tv_step: f64,
    pub cost_delta: f64,
    /// Cells whose counts differ.
    pub changed: Vec<CellDiff>,
}

async fn compare(State(st): State<AppState>, Query(q): Query<CompareQuery>) -> Result<Json<CompareResponse>, ApiError> {
    let sa = st.store.solution(&q.a).ok_or_else(|| ApiError::not_found("solution", &q.a))?;
    let sb = st.store.solution(&q.b).ok_or_else(|| ApiError::not_found("solution", &q.b))?;
    let ia = st.store.instance(&sa.instance_id).ok_or_else(|| ApiError::not_found("instance", &sa.instance_id))?;
    let ib = st.store.instance(&sb.instance_id).ok_or_else(|| ApiError::not_found("instance", &sb.instance_id))?;
    let same_shape = ia.sort_pairs == ib.sort_pairs && ia.trailer_types.iter().map(|t| &t.name).eq(ib.trailer_types.iter().map(|t| &t.name));
    if !same_shape {
        return Err(ApiError::unprocessable("solutions belong to instances with different sort pairs or trailer types"));
    }
    let ya = LoadPlan::from_document(&ia, &sa.plan)?.y;
    let yb = LoadPlan::from_document(&ia, &sb.plan)?.y;
    let fa: Vec<f64> = ya.iter().map(|&n| n as f64).collect();
    let fb: Vec<f64> = yb.iter().map(|&n| n as f64).collect();
    let delta = normalized_distance(&fb, &fa, &DistanceDomain::Compatible.cells(&ia))?;
    let changed = ia
        .slots()
        .into_iter()
        .filter_map(|(s, v)| {
            let i = ia.grid_index(s, v);
            (ya[i] != yb[i]).then(|| CellDiff {
                sort_pair: ia.sort_pair(s).name.clone(),
                trailer_type: ia.trailer(v).name.clone(),
                a: ya[i],
                b: yb[i],
            })
        })
        .collect();
    Ok(Json(CompareResponse {
        tv_step: fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum(),
        cost_delta: sb.cost - sa.cost,
        delta,
        changed,
        a: q.a,
        b: q.b,
    }))
}
