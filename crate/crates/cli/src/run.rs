//! Mode dispatch, output files and the run manifest.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use hwisec::channel_sim::{mc_secrecy_rate, TGrid};
use hwisec::closed_form::{eve_capacity_ub, training_statistics, EveBound, UserModel};
use hwisec::core_model::{Config, Scenario};
use hwisec::design_opt::sweep;
use hwisec::Backend;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::registry;
use crate::spec::{ExperimentSpec, Mode, Scale};
use crate::table::{sha256_hex, write_atomic, ResultTable};

/// Failure classes that map to distinct exit codes.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 2,
            RunError::Validation(_) => 3,
            RunError::Other(_) => 1,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> RunError {
    RunError::Validation(e.to_string())
}

/// Everything a run produces, assembled before anything touches the disk.
struct Outcome {
    tables: Vec<ResultTable>,
    resolved: Value,
    seeds: Vec<u64>,
    summary: Value,
}

fn eve_bits(b: EveBound) -> f64 {
    b.bits().unwrap_or(f64::INFINITY)
}

fn build(s: &Scenario) -> Result<Config, RunError> {
    s.build().map_err(invalid)
}

fn evaluate(s: &Scenario) -> Result<Outcome, RunError> {
    let cfg = build(s)?;
    let k = cfg.reference_user();
    let stats = training_statistics(&cfg, cfg.t0());
    let m = UserModel::new(&cfg, &stats, k);
    let eve = eve_capacity_ub(&cfg);
    let dc = m.design_coefficients();
    let benefit = dc.distortion_benefit();
    let t1 = cfg.first_data_slot();
    let co = m.coefficients(t1);

    let mut summary = ResultTable::new(
        "evaluate",
        &[
            "phi",
            "secrecy_lb",
            "rate_lb",
            "eve_capacity_ub",
            "alpha_an",
            "alpha_sec",
            "lambda_bar",
            "a_k",
            "c_k",
            "mu_k",
            "benefit_lhs",
            "benefit_rhs",
        ],
    );
    summary.push(vec![
        cfg.power().phi_split,
        m.secrecy_rate(eve),
        m.mean_rate(),
        eve_bits(eve),
        dc.alpha_an(),
        dc.alpha_sec(),
        co.lambda_bar_k,
        co.a_k,
        co.c_k,
        co.mu_k,
        benefit.lhs,
        benefit.rhs,
    ]);
    let mut per_slot = ResultTable::new("rate_vs_t", &["t", "gamma_lb", "rate_lb", "secrecy_lb"]);
    for t in cfg.data_slots() {
        let r = m.rate(t);
        let sec = eve.bits().map_or(0.0, |c| (r - c).max(0.0));
        per_slot.push(vec![t as f64, m.gamma(t), r, sec]);
    }
    Ok(Outcome {
        tables: vec![summary, per_slot],
        resolved: json!({ "config": s, "reference_user": k }),
        seeds: vec![],
        summary: json!({ "eve_unbounded": eve.is_unbounded() }),
    })
}

fn simulate(s: &Scenario, spec: &ExperimentSpec, backend: Backend) -> Result<Outcome, RunError> {
    let cfg = build(s)?;
    let mc = spec.mc.as_ref().expect("checked at parse time");
    let grid = TGrid::from(&mc.t_grid);
    if grid.resolve(&cfg).is_empty() {
        return Err(invalid("t_grid selects no data slot"));
    }
    let est = mc_secrecy_rate(&cfg, mc.trials, &grid, mc.seed, backend);
    let k = est.ensemble.eve_user;
    let stats = training_statistics(&cfg, cfg.t0());
    let m = UserModel::new(&cfg, &stats, k);
    let eve_ub = eve_bits(eve_capacity_ub(&cfg));

    let mut table = ResultTable::new(
        "simulate",
        &[
            "t",
            "gamma_mc",
            "gamma_mc_se",
            "gamma_lb",
            "eve_mc",
            "eve_mc_se",
            "eve_ub",
            "secrecy_mc",
        ],
    );
    for (i, &t) in est.slots.iter().enumerate() {
        let u = &est.ensemble.users[i][k];
        let (e, se) = match est.ensemble.eve[i] {
            hwisec::channel_sim::EveEstimate::Finite { mean, se } => (mean, se),
            hwisec::channel_sim::EveEstimate::Unbounded => (f64::INFINITY, f64::NAN),
        };
        table.push(vec![
            t as f64,
            u.gamma,
            u.gamma_se,
            m.gamma(t),
            e,
            se,
            eve_ub,
            est.per_slot[i],
        ]);
    }
    let mut users = ResultTable::new(
        "simulate_users",
        &["t", "user", "gamma_mc", "gamma_mc_se", "gamma_lb"],
    );
    for (i, &t) in est.slots.iter().enumerate() {
        for (user, u) in est.ensemble.users[i].iter().enumerate() {
            let lb = UserModel::new(&cfg, &stats, user).gamma(t);
            users.push(vec![t as f64, user as f64, u.gamma, u.gamma_se, lb]);
        }
    }
    Ok(Outcome {
        tables: vec![table, users],
        resolved: json!({ "config": s, "mc": mc, "slots": est.slots, "reference_user": k }),
        seeds: vec![mc.seed],
        summary: json!({
            "secrecy_rate_mc": est.rate,
            "secrecy_rate_lb": m.secrecy_rate(eve_capacity_ub(&cfg)),
            "trials": est.ensemble.trial_count,
        }),
    })
}

fn run_sweep(s: &Scenario, spec: &ExperimentSpec, backend: Backend) -> Result<Outcome, RunError> {
    build(s)?;
    let sw = spec.sweep.as_ref().expect("checked at parse time");
    let res = sweep(s, sw, backend).map_err(invalid)?;
    let mut table = ResultTable::new(
        format!("sweep_{}", sw.param),
        &[
            &sw.param.to_string(),
            &sw.objective.to_string(),
            "lambda_bar",
            "a_k",
            "c_k",
            "mu_k",
        ],
    );
    for r in &res.rows {
        let obj = r.objective.finite().unwrap_or(f64::INFINITY);
        table.push(vec![r.value, obj, r.lambda_bar, r.a_k, r.c_k, r.mu_k]);
    }
    let skipped: Vec<Value> = res
        .skipped
        .iter()
        .map(|(v, e)| json!({ "value": v, "reason": e.to_string() }))
        .collect();
    Ok(Outcome {
        tables: vec![table],
        resolved: json!({ "config": s, "sweep": sw }),
        seeds: vec![],
        summary: json!({
            "argmax": res.best().value,
            "argmax_objective": res.best().objective.to_string(),
            "skipped": skipped,
        }),
    })
}

fn reproduce(spec: &ExperimentSpec, backend: Backend) -> Result<Outcome, RunError> {
    let id = spec.figure.as_deref().expect("checked at parse time");
    let fig = registry::find(id)
        .ok_or_else(|| invalid(format!("unknown figure {id}; see `hwisec list`")))?;
    let scale = spec.scale.unwrap_or(Scale::Desk);
    let seed = spec.mc.as_ref().map_or(1, |m| m.seed);
    let curves = registry::reproduce(fig, scale, seed, backend)?;
    let bases: Vec<Value> = curves
        .iter()
        .map(|c| json!({ "file": c.table.file_name(), "config": c.base }))
        .collect();
    let setup = fig.setup(scale);
    Ok(Outcome {
        tables: curves.into_iter().map(|c| c.table).collect(),
        resolved: json!({
            "figure": fig.id,
            "scale": scale,
            "x": fig.x,
            "setup": setup,
            "curves": bases,
        }),
        seeds: if setup.trials > 0 { vec![seed] } else { vec![] },
        summary: Value::Null,
    })
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    rows: usize,
    sha256: String,
}

/// Execute the experiment in `spec_path`, writing CSV tables and
/// `manifest.json` into `out_dir`. Nothing is written unless the whole
/// computation succeeds.
pub fn run(spec_path: &Path, out_dir: &Path, backend: Backend) -> Result<(), RunError> {
    let start = Instant::now();
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = ExperimentSpec::from_json(&text).map_err(|e| match e {
        crate::spec::SpecError::Invalid(m) => RunError::Validation(m),
        other => RunError::Parse(other.to_string()),
    })?;

    let outcome = match spec.mode {
        Mode::Evaluate => evaluate(spec.config.as_ref().expect("checked"))?,
        Mode::Simulate => simulate(spec.config.as_ref().expect("checked"), &spec, backend)?,
        Mode::Sweep => run_sweep(spec.config.as_ref().expect("checked"), &spec, backend)?,
        Mode::Reproduce => reproduce(&spec, backend)?,
    };

    let mut files = Vec::new();
    let mut blobs = Vec::new();
    for t in &outcome.tables {
        let bytes = t.to_csv()?;
        files.push(FileEntry {
            name: t.file_name(),
            rows: t.rows.len(),
            sha256: sha256_hex(&bytes),
        });
        blobs.push((t.file_name(), bytes));
    }
    let canonical = serde_json::to_vec(&outcome.resolved).context("serializing resolved config")?;
    let manifest = json!({
        "mode": spec.mode,
        "version": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
        "config_sha256": sha256_hex(&canonical),
        "resolved": outcome.resolved,
        "seeds": outcome.seeds,
        "backend": if backend.is_parallel() { "parallel" } else { "sequential" },
        "summary": outcome.summary,
        "files": files,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (name, bytes) in &blobs {
        write_atomic(out_dir, name, bytes)?;
    }
    let pretty = serde_json::to_vec_pretty(&manifest).context("serializing manifest")?;
    write_atomic(out_dir, "manifest.json", &pretty)?;
    Ok(())
}
