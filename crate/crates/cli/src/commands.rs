use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context};
use dlpp_core::datagen::{self, Dataset, Split, SweepSpec};
use dlpp_core::metrics::{self, evaluate, plan_distance, DistanceDomain, EvaluationReport, MethodRun};
use dlpp_core::network::{instance_to_json, ReferencePlan};
use dlpp_core::proxy::{grid_search, train, GridSpec, ProxyModel, TrainingConfig};
use dlpp_core::proxy::training::loss_curve_csv;
use dlpp_core::plan::PlanDocument;
use dlpp_core::{parse_instance, restrict_scenario, run_method, Error, Instance, LoadPlan, Method, Scenario, StageLimits};
use rayon::prelude::*;

use super::{
    Command, DatagenArgs, EvalArgs, LimitArgs, Mode, RestrictArgs, ScenarioArg, SolveArgs, SourceArgs, SplitArg,
    SweepArgs, TrainArgs,
};

pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::Validation { .. }
            | Error::IncompatiblePair { .. }
            | Error::DegenerateInstance(_)
            | Error::MissingReference
            | Error::DimensionMismatch { .. }
            | Error::SignatureMismatch(_)
            | Error::EmptyDataset
            | Error::PreconditionViolated(_)
            | Error::Io(_) => Failure::User(e.into()),
            _ => Failure::Internal(e.into()),
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn user(e: impl Into<anyhow::Error>) -> Failure {
    Failure::User(e.into())
}

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Datagen(a) => datagen_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Restrict(a) => restrict(a),
    }
}

fn method(m: Mode) -> Method {
    match m {
        Mode::Mip => Method::Mip,
        Mode::Gdo => Method::Gdo,
        Mode::Greedy => Method::Greedy,
        Mode::Proxy => Method::Proxy,
    }
}

fn limits(a: &LimitArgs, default_nodes: Option<usize>) -> CmdResult<StageLimits> {
    if let Some(t) = a.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(user(anyhow!("--time-limit must be a positive number of seconds")));
        }
    }
    Ok(match (a.time_limit, a.node_limit) {
        (None, None) => match default_nodes {
            Some(n) => StageLimits::nodes(n),
            None => StageLimits::default(),
        },
        (t, n) => StageLimits { time_limit: t.map(Duration::from_secs_f64), node_limit: n },
    })
}

fn read_instance(path: &Path) -> CmdResult<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(user)?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display())).map_err(user)
}

fn read_model(path: Option<&Path>) -> CmdResult<Option<ProxyModel>> {
    path.map(|p| ProxyModel::load(p).with_context(|| format!("loading model {}", p.display())).map_err(user))
        .transpose()
}

fn source_instance(s: &SourceArgs) -> CmdResult<Instance> {
    match (&s.reference, s.synthetic) {
        (Some(p), _) => read_instance(p),
        (None, Some(seed)) => Ok(datagen::synthetic_terminal(seed)),
        (None, None) => Err(user(anyhow!("one of --ref or --synthetic is required"))),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(user),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(a: SolveArgs) -> CmdResult {
    let mut inst = read_instance(&a.instance)?;
    if let Some(p) = &a.reference {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(user)?;
        let doc: PlanDocument =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display())).map_err(user)?;
        let counts = LoadPlan::from_document(&inst, &doc)?.y;
        inst.reference_plan = Some(ReferencePlan::from_grid(&inst, &counts)?);
    }
    let model = read_model(a.model.as_deref())?;
    let lim = limits(&a.limits, None)?;
    let out = run_method(&inst, method(a.mode), &lim, model.as_ref())?;
    let json = out.plan.to_json(&inst);
    let summary = {
        let mut s = format!("cost={} trailers={}", out.plan.cost(&inst), out.plan.trailer_count());
        if let Some(gamma) = inst.reference_grid() {
            let d = plan_distance(&inst, &out.plan, DistanceDomain::Compatible)?;
            let _ = write!(s, " distance={d:.6} hamming={}", out.plan.hamming_distance(&gamma));
        }
        if let Some(r) = &out.restoration {
            let _ = write!(s, " restored_pairs={} added_cost={}", r.violated.len(), r.cost_delta);
        }
        let _ = write!(s, " proven={} time={:.3}s", out.proven, out.time.as_secs_f64());
        s
    };
    match &a.out {
        Some(p) => {
            fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display())).map_err(user)?;
            println!("{summary}");
        }
        None => {
            println!("{json}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn datagen_cmd(a: DatagenArgs) -> CmdResult {
    let reference = source_instance(&a.source)?;
    let lim = limits(&a.limits, Some(300))?;
    let ds = datagen::generate_dataset(&reference, a.n, a.seed, &lim, a.jobs)?;
    datagen::write_dataset(&ds, &a.out_dir)?;
    let [tr, va, te] = ds.split_counts();
    println!(
        "instances={} train={tr} validation={va} test={te} failed={} unproven={}",
        ds.items.len(),
        ds.num_failed(),
        ds.num_unproven()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let ds = datagen::read_dataset(&a.data)?;
    let train_set = ds.samples(Split::Train, a.proven_only);
    let val_set = ds.samples(Split::Validation, a.proven_only);
    let base = TrainingConfig {
        learning_rate: a.learning_rate,
        layers: a.layers,
        hidden: a.hidden,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainingConfig::default()
    };
    let trained = if a.grid {
        let outcome = grid_search(&ds.reference, &train_set, &val_set, &base, &GridSpec::default())?;
        for e in &outcome.entries {
            let loss = e.best_validation.map_or("diverged".to_string(), |v| format!("{v:.6}"));
            eprintln!("lr={} layers={} hidden={} validation={loss}", e.config.learning_rate, e.config.layers, e.config.hidden);
        }
        outcome.best
    } else {
        train(&ds.reference, &train_set, &val_set, &base)?
    };
    trained.model.save(&a.out_model)?;
    if let Some(p) = &a.loss_curve {
        fs::write(p, loss_curve_csv(&trained.curve)).with_context(|| format!("writing {}", p.display())).map_err(user)?;
    }
    let c = &trained.model.config;
    println!(
        "train={} validation={} learning_rate={} layers={} hidden={} best_validation_loss={:.6}",
        train_set.len(),
        val_set.len(),
        c.learning_rate,
        c.layers,
        c.hidden,
        trained.best_validation
    );
    Ok(())
}

fn selected(ds: &Dataset, split: SplitArg) -> Vec<&datagen::LabeledInstance> {
    match split {
        SplitArg::Train => ds.split(Split::Train, false),
        SplitArg::Validation => ds.split(Split::Validation, false),
        SplitArg::Test => ds.split(Split::Test, false),
        SplitArg::All => ds.items.iter().filter(|i| i.status != datagen::LabelStatus::Failed).collect(),
    }
}

fn eval(a: EvalArgs) -> CmdResult {
    let ds = datagen::read_dataset(&a.data)?;
    let model = read_model(a.model.as_deref())?;
    let methods: Vec<Method> = a.methods.iter().map(|&m| method(m)).collect();
    if methods.contains(&Method::Proxy) && model.is_none() {
        return Err(user(anyhow!("--methods proxy needs --model")));
    }
    let lim = limits(&a.limits, Some(300))?;
    let items = selected(&ds, a.split);
    if items.is_empty() {
        return Err(user(anyhow!("the selected split has no labeled instances")));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| Failure::Internal(e.into()))?;
    let per_instance: Vec<Result<(EvaluationReport, Option<f64>), Error>> = pool.install(|| {
        items
            .par_iter()
            .map(|it| {
                let inst = &it.instance;
                let outcomes =
                    methods.iter().map(|&m| run_method(inst, m, &lim, model.as_ref())).collect::<Result<Vec<_>, _>>()?;
                let z_ref = outcomes.iter().map(|o| o.plan.cost(inst)).fold(it.label_cost, f64::min);
                let runs: Vec<MethodRun<'_>> =
                    outcomes.iter().map(|o| MethodRun { method: o.method, plan: &o.plan, time: o.time }).collect();
                let report = evaluate(inst, &format!("{:05}", it.index), &runs, z_ref, DistanceDomain::Compatible)?;
                let share = outcomes
                    .iter()
                    .find_map(|o| o.predicted.as_ref().map(|p| metrics::predicted_capacity_share(inst, p, &o.plan.y)));
                Ok((report, share))
            })
            .collect()
    });
    let mut report = EvaluationReport::default();
    let mut shares = Vec::new();
    for r in per_instance {
        let (rep, share) = r?;
        report.extend(rep);
        shares.extend(share);
    }
    if let Some(p) = &a.report {
        fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display())).map_err(user)?;
    }
    println!("method,instances,gap_geomean,distance_geomean,seconds_geomean");
    for s in report.summary()? {
        let d = s.distance.map_or(String::new(), |d| format!("{d:.6}"));
        println!("{},{},{:.6},{d},{:.6}", s.method.as_str(), s.instances, s.gap, s.seconds);
    }
    if !shares.is_empty() {
        println!("proxy_predicted_capacity_share_geomean,{:.6}", metrics::shifted_geomean(&shares, metrics::GAP_SHIFT)?);
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let reference = source_instance(&a.source)?;
    let model = read_model(a.model.as_deref())?;
    let methods: Vec<Method> = a.methods.iter().map(|&m| method(m)).collect();
    if methods.contains(&Method::Proxy) && model.is_none() {
        return Err(user(anyhow!("--methods proxy needs --model")));
    }
    let lim = limits(&a.limits, Some(300))?;
    let spec = SweepSpec { steps: a.steps, scale_from: a.scale_from, scale_to: a.scale_to, noise_seed: a.noise_seed };
    let instances = datagen::generate_sweep(&reference, &spec)?;

    let mut csv = String::from("step,total_volume");
    for m in &methods {
        let _ = write!(csv, ",{0}_cost,{0}_trailers,{0}_distance", m.as_str());
    }
    csv.push('\n');
    let mut ys: Vec<Vec<Vec<f64>>> = vec![Vec::new(); methods.len()];
    for (step, inst) in instances.iter().enumerate() {
        let _ = write!(csv, "{step},{}", inst.total_volume());
        for (i, &m) in methods.iter().enumerate() {
            let o = run_method(inst, m, &lim, model.as_ref())?;
            let d = match inst.reference_plan {
                Some(_) => plan_distance(inst, &o.plan, DistanceDomain::Compatible)?.to_string(),
                None => String::new(),
            };
            let _ = write!(csv, ",{},{},{d}", o.plan.cost(inst), o.plan.trailer_count());
            ys[i].push(o.plan.y_f64());
        }
        csv.push('\n');
    }
    write_or_print(a.out.as_deref(), &csv)?;
    for (m, y) in methods.iter().zip(&ys) {
        eprintln!("{} total_variation={}", m.as_str(), metrics::total_variation(y).value);
    }
    Ok(())
}

fn restrict(a: RestrictArgs) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let scenario = match a.scenario {
        ScenarioArg::PrimaryOnly => Scenario::PrimaryOnly,
        ScenarioArg::OneAlt => Scenario::OneAlt,
        ScenarioArg::AllAlt => Scenario::AllAlt,
    };
    write_or_print(a.out.as_deref(), &(instance_to_json(&restrict_scenario(&inst, scenario)) + "\n"))
}
