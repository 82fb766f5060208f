//! Experiment configuration, orchestration, and data emission.
//!
//! A run is described by a single JSON document; every field can be
//! overridden on the command line with `--set path=value`. Each run writes
//! one directory containing `meta.json`, `paths/*.csv`, `summary.csv`, and
//! `summary.jsonl`. All data artifacts are reproducible from (config, seed);
//! only the wall-time entry in `meta.json` varies between reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    collect_run_stats, delayed_wait_distribution, estimate_hitting_probability, ks_two_sample,
    sample_limit_marginal, sample_scaled_marginal,
};
use crate::error::{Error, Result};
use crate::reflection::Barrier;
use crate::scaling::{fmt_sig12, scale_diffusion, scale_fluid, GridSpec};
use crate::sim::{
    replication_rng, simulate_jsq_counts, simulate_jsq_per_queue_with_rng, simulate_jsq_truncated,
    CountState, InitialCondition, InitialPreset, ModelParams,
};
use crate::solver::{make_limit_drivers, solve_limit_system_with, DrivingInput, NoiseSpec, SolverOptions};

pub const OUTPUT_ROOT_ENV: &str = "JSQ_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    SimulateTruncated,
    Limit,
    Compare,
    Waits,
    Sweep,
    Figure1,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Simulate => "simulate",
            Mode::SimulateTruncated => "simulate-truncated",
            Mode::Limit => "limit",
            Mode::Compare => "compare",
            Mode::Waits => "waits",
            Mode::Sweep => "sweep",
            Mode::Figure1 => "figure1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridCfg {
    pub t0: f64,
    pub dt: f64,
    /// Grid points; derived from the horizon when absent.
    pub count: Option<usize>,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg { t0: 0.0, dt: 1e-3, count: None }
    }
}

impl GridCfg {
    fn resolve(&self, horizon: f64) -> Result<GridSpec> {
        let count = match self.count {
            Some(c) => c,
            None => (((horizon - self.t0) / self.dt).round() as usize + 1).max(2),
        };
        GridSpec::new(self.t0, self.dt, count)
            .map_err(|e| Error::config("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverCfg {
    pub tol: f64,
    pub window: f64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverCfg { tol: d.tol, window: d.window }
    }
}

/// The experiment document. Unset fields take mode-specific defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub grid: GridCfg,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sweep_ns: Option<Vec<u64>>,
    #[serde(default)]
    pub marginal_times: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverCfg,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            n: None,
            beta: None,
            k_max: None,
            horizon: None,
            seed: 0,
            initial: None,
            replications: None,
            grid: GridCfg::default(),
            output: None,
            sweep_ns: None,
            marginal_times: None,
            solver: SolverCfg::default(),
        }
    }
}

/// Config with every default resolved.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub mode: Mode,
    pub params: ModelParams,
    pub initial: InitialCondition,
    pub replications: usize,
    pub grid: GridSpec,
    pub output: PathBuf,
    pub sweep_ns: Vec<u64>,
    pub marginal_times: Vec<f64>,
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mode = self.mode;
        let (def_n, def_beta, def_k, def_horizon) = match mode {
            Mode::Figure1 => (100_000, 2.0, 5, 10.0),
            _ => (1_000, 1.0, 5, 5.0),
        };
        let n = self.n.unwrap_or(def_n);
        let beta = self.beta.unwrap_or(def_beta);
        let k_max = self.k_max.unwrap_or(def_k);
        let horizon = self.horizon.unwrap_or(def_horizon);
        let params = ModelParams { n, beta, k_max, horizon, seed: self.seed };
        params
            .validate()
            .map_err(|e| Error::config("params", e.to_string()))?;

        let initial = match &self.initial {
            Some(init) => init.clone(),
            None => match mode {
                // queues up to length 5 with most of the excess mass shallow,
                // so the deterministic tail drains well inside the plotted
                // window; the preset is an explicit, overridable choice
                Mode::Figure1 => {
                    let sqrt_n = (n as f64).sqrt();
                    let factors = [1.0, 0.5, 0.1, 0.02];
                    let mut q = vec![0u64; k_max];
                    q[0] = n;
                    for (i, f) in factors.iter().enumerate().take(k_max - 1) {
                        q[i + 1] = (f * sqrt_n).round() as u64;
                    }
                    InitialCondition::Explicit(q)
                }
                _ => InitialCondition::Preset(InitialPreset::AllBusy),
            },
        };
        initial
            .count_state(n, k_max)
            .map_err(|e| Error::config("initial", e.to_string()))?;

        let replications = self.replications.unwrap_or(match mode {
            Mode::Simulate | Mode::SimulateTruncated | Mode::Limit | Mode::Figure1 => 1,
            Mode::Compare => 2_000,
            Mode::Waits => 50,
            Mode::Sweep => 10_000,
        });
        if replications == 0 {
            return Err(Error::config("replications", "must be positive"));
        }

        // a zero horizon degenerates to the initial state alone; keep a
        // valid two-point grid internally and emit a single row
        let grid = self.grid.resolve(horizon.max(self.grid.dt))?;
        if horizon > 0.0 && grid.end() > horizon + 1e-12 {
            return Err(Error::config(
                "grid",
                format!("grid ends at {} beyond the horizon {horizon}", grid.end()),
            ));
        }

        let sweep_ns = match &self.sweep_ns {
            Some(ns) => ns.clone(),
            None => match mode {
                Mode::Compare => vec![100, 1_000, 10_000],
                Mode::Sweep => vec![25, 100, 400, 1_600],
                _ => vec![n],
            },
        };
        for &sn in &sweep_ns {
            if beta >= (sn as f64).sqrt() {
                return Err(Error::config(
                    "sweep_ns",
                    format!("beta = {beta} must be < sqrt(n) for n = {sn}"),
                ));
            }
        }

        let marginal_times = match &self.marginal_times {
            Some(ts) => ts.clone(),
            None => vec![1.0, 2.0, 5.0]
                .into_iter()
                .filter(|&t| t <= horizon)
                .collect(),
        };
        if marginal_times.iter().any(|&t| t <= 0.0 || t > horizon) {
            return Err(Error::config(
                "marginal_times",
                "every time must lie in (0, horizon]",
            ));
        }

        let output = self.output.clone().unwrap_or_else(|| {
            PathBuf::from(format!("run-{mode}-seed{}", self.seed))
        });
        let output = match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if output.is_relative() => PathBuf::from(root).join(output),
            _ => output,
        };

        Ok(ResolvedConfig {
            mode,
            params,
            initial,
            replications,
            grid,
            output,
            sweep_ns,
            marginal_times,
            solver: SolverOptions {
                tol: self.solver.tol,
                window: self.solver.window,
                ..SolverOptions::default()
            },
        })
    }
}

/// Load a config document, apply an optional mode override and `--set`
/// assignments, and deserialize.
pub fn load_config(
    file: Option<&Path>,
    mode: Option<Mode>,
    sets: &[String],
) -> Result<ExperimentConfig> {
    let mut doc: Value = match file {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::config("<root>", "config document must be a JSON object"));
    }
    if let Some(m) = mode {
        doc["mode"] = json!(m.to_string());
    }
    for assignment in sets {
        apply_set(&mut doc, assignment)?;
    }
    if doc.get("mode").is_none() {
        return Err(Error::config(
            "mode",
            "required; pass a subcommand or set \"mode\" in the config",
        ));
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| Error::config("<document>", e.to_string()))?;
    Ok(cfg)
}

fn apply_set(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::config("--set", format!("expected path=value, got `{assignment}`"))
    })?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| json!(raw));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::config("--set", format!("empty path segment in `{path}`")));
        }
        if i + 1 == parts.len() {
            cursor[part] = value;
            break;
        }
        if cursor.get(*part).map_or(true, |v| !v.is_object()) {
            cursor[part] = json!({});
        }
        cursor = &mut cursor[*part];
    }
    Ok(())
}

/// Files written by a run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Emitter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Emitter> {
        fs::create_dir_all(dir.join("paths"))?;
        Ok(Emitter { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write_file(&mut self, rel: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    /// Write `summary.csv` and the line-oriented `summary.jsonl` twin.
    fn write_summary<S: AsRef<str>>(&mut self, headers: &[S], rows: &[Vec<Value>]) -> Result<()> {
        let names: Vec<&str> = headers.iter().map(|h| h.as_ref()).collect();
        let mut csv = String::new();
        csv.push_str(&names.join(","));
        csv.push('\n');
        let mut jsonl = String::new();
        for row in rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            csv.push_str(&cells.join(","));
            csv.push('\n');
            let obj: serde_json::Map<String, Value> = names
                .iter()
                .map(|h| h.to_string())
                .zip(row.iter().cloned())
                .collect();
            jsonl.push_str(&serde_json::to_string(&Value::Object(obj))?);
            jsonl.push('\n');
        }
        self.write_file("summary.csv", csv.as_bytes())?;
        self.write_file("summary.jsonl", jsonl.as_bytes())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => fmt_sig12(n.as_f64().unwrap()),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

#[derive(Serialize)]
struct Meta {
    seed: u64,
    n: u64,
    beta: f64,
    lambda_n: f64,
    k_max: usize,
    horizon: f64,
    dt: f64,
    replications: usize,
    version: String,
    wall_time_secs: f64,
}

/// Execute the configured experiment and write its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let resolved = config.resolve()?;
    run_resolved(config, &resolved, Instant::now())
}

fn run_resolved(
    config: &ExperimentConfig,
    r: &ResolvedConfig,
    started: Instant,
) -> Result<RunArtifacts> {
    let mut em = Emitter::new(&r.output)?;
    // keep the exact input document alongside the artifacts
    em.write_file("config.json", (serde_json::to_string_pretty(config)? + "\n").as_bytes())?;

    match r.mode {
        Mode::Simulate | Mode::Figure1 => run_simulate(r, &mut em, false)?,
        Mode::SimulateTruncated => run_simulate(r, &mut em, true)?,
        Mode::Limit => run_limit(r, &mut em)?,
        Mode::Compare => run_compare(r, &mut em)?,
        Mode::Waits => run_waits(r, &mut em)?,
        Mode::Sweep => run_sweep(r, &mut em)?,
    }

    let meta = Meta {
        seed: r.params.seed,
        n: r.params.n,
        beta: r.params.beta,
        lambda_n: r.params.lambda(),
        k_max: r.params.k_max,
        horizon: r.params.horizon,
        dt: r.grid.dt,
        replications: r.replications,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    em.write_file("meta.json", (serde_json::to_string_pretty(&meta)? + "\n").as_bytes())?;
    Ok(RunArtifacts { dir: em.dir, files: em.files })
}

fn run_simulate(r: &ResolvedConfig, em: &mut Emitter, truncated: bool) -> Result<()> {
    let initial = r.initial.count_state(r.params.n, r.params.k_max)?;
    let (path, counters) = if truncated {
        let (p, c) = simulate_jsq_truncated(&r.params, &initial)?;
        (p, Some(c))
    } else {
        (simulate_jsq_counts(&r.params, &initial)?, None)
    };

    if r.params.horizon == 0.0 {
        // degenerate run: one row holding the scaled initial state
        let sqrt_n = (r.params.n as f64).sqrt();
        let state = path.state(0);
        let mut diff = String::from("t");
        let mut fluid = String::from("t");
        for i in 1..=state.len() {
            diff.push_str(&format!(",x{i}"));
            fluid.push_str(&format!(",psi{i}"));
        }
        diff.push_str("\n0");
        fluid.push_str("\n0");
        for (i, &q) in state.iter().enumerate() {
            let x = if i == 0 { (q - r.params.n as f64) / sqrt_n } else { q / sqrt_n };
            diff.push_str(&format!(",{}", fmt_sig12(x)));
            fluid.push_str(&format!(",{}", fmt_sig12(q / r.params.n as f64)));
        }
        diff.push('\n');
        fluid.push('\n');
        em.write_file("paths/diffusion.csv", diff.as_bytes())?;
        em.write_file("paths/fluid.csv", fluid.as_bytes())?;
        let stats = collect_run_stats(&path, &r.params, None)?;
        let mut headers: Vec<String> = vec!["hit_time".into(), "agg_wait".into()];
        let mut row = vec![
            stats.hit_time.map_or(Value::Null, |t| json!(t)),
            json!(stats.agg_wait),
        ];
        for (i, v) in stats.terminal_scaled_state.iter().enumerate() {
            headers.push(format!("terminal_x{}", i + 1));
            row.push(json!(v));
        }
        return em.write_summary(&headers, &[row]);
    }

    let x = scale_diffusion(&path, r.params.n, r.grid)?;
    let names: Vec<String> = (1..=x.dim()).map(|i| format!("x{i}")).collect();
    let mut buf = Vec::new();
    x.write_csv(&mut buf, &names)?;
    em.write_file("paths/diffusion.csv", &buf)?;

    let psi = scale_fluid(&path, r.params.n, r.grid)?;
    let names: Vec<String> = (1..=psi.dim()).map(|i| format!("psi{i}")).collect();
    let mut buf = Vec::new();
    psi.write_csv(&mut buf, &names)?;
    em.write_file("paths/fluid.csv", &buf)?;

    if let Some(counters) = &counters {
        let mut csv = String::from("kind,t\n");
        for &t in &counters.u1_events {
            csv.push_str(&format!("u1,{}\n", fmt_sig12(t)));
        }
        for &t in &counters.u2_events {
            csv.push_str(&format!("u2,{}\n", fmt_sig12(t)));
        }
        em.write_file("paths/barrier_events.csv", csv.as_bytes())?;

        let mp = crate::analysis::extract_martingales(&path, counters, &r.params, r.grid)?;
        let stacked = crate::scaling::GridPath::hstack(&[&mp.m, &mp.qv]);
        let mut names: Vec<String> = (0..mp.m.dim()).map(|i| format!("m{i}")).collect();
        names.extend((0..mp.qv.dim()).map(|i| format!("qv{i}")));
        let mut buf = Vec::new();
        stacked.write_csv(&mut buf, &names)?;
        em.write_file("paths/martingales.csv", &buf)?;
    }

    let stats = collect_run_stats(&path, &r.params, None)?;
    let mut headers: Vec<String> =
        ["hit_time", "agg_wait", "scaled_agg_wait", "delayed_fraction"]
            .map(String::from)
            .to_vec();
    let mut row = vec![
        stats.hit_time.map_or(Value::Null, |t| json!(t)),
        json!(stats.agg_wait),
        json!(stats.scaled_agg_wait),
        json!(stats.delayed_fraction),
    ];
    for (i, v) in stats.terminal_scaled_state.iter().enumerate() {
        headers.push(format!("terminal_x{}", i + 1));
        row.push(json!(v));
    }
    em.write_summary(&headers, &[row])
}

fn run_limit(r: &ResolvedConfig, em: &mut Emitter) -> Result<()> {
    let k = r.params.k_max.max(3);
    let x0 = initial_scaled_vector(r, k)?;
    let spec = NoiseSpec { beta: r.params.beta, seed: r.params.seed, grid: r.grid };
    let y = make_limit_drivers(&spec, k)?;
    let input = DrivingInput::new(Barrier::INFINITE, x0, y)?;
    let sol = solve_limit_system_with(&input, &r.solver)?;

    let mut buf = Vec::new();
    sol.write_csv(&mut buf)?;
    em.write_file("paths/limit.csv", &buf)?;

    let last = r.grid.count - 1;
    let mut headers: Vec<String> = vec!["seed".into(), "k".into()];
    let mut row: Vec<Value> = vec![json!(r.params.seed), json!(k)];
    for c in 0..k {
        headers.push(format!("terminal_x{}", c + 1));
        row.push(json!(sol.x.value(last, c)));
    }
    headers.push("terminal_u1".into());
    row.push(json!(sol.u.value(last, 0)));
    headers.push("terminal_u2".into());
    row.push(json!(sol.u.value(last, 1)));
    em.write_summary(&headers, &[row])
}

fn initial_scaled_vector(r: &ResolvedConfig, k: usize) -> Result<Vec<f64>> {
    let counts = r.initial.count_state(r.params.n, r.params.k_max)?;
    let sqrt_n = (r.params.n as f64).sqrt();
    let mut x0 = vec![0.0; k];
    for (i, slot) in x0.iter_mut().enumerate() {
        let q = counts.counts().get(i).copied().unwrap_or(0) as f64;
        *slot = if i == 0 { (q - r.params.n as f64) / sqrt_n } else { q / sqrt_n };
    }
    Ok(x0)
}

fn run_compare(r: &ResolvedConfig, em: &mut Emitter) -> Result<()> {
    if r.initial != InitialCondition::Preset(InitialPreset::AllBusy) {
        return Err(Error::config(
            "initial",
            "compare mode matches the limit started from zero; use the all-busy preset",
        ));
    }
    let k = r.params.k_max.max(3);
    let x0 = vec![0.0; k];
    let coords = [0usize, 1usize];
    let mut rows = Vec::new();
    for &t in &r.marginal_times {
        let limit_samples = sample_limit_marginal(
            r.params.beta,
            &x0,
            k,
            t,
            r.grid.dt,
            &coords,
            r.replications,
            r.params.seed ^ 0x9e37_79b9_7f4a_7c15,
        )?;
        for &n in &r.sweep_ns {
            let params = ModelParams { n, ..r.params };
            let sim_samples =
                sample_scaled_marginal(&params, &r.initial, t, &coords, r.replications)?;
            for (ci, label) in ["x1", "x2"].iter().enumerate() {
                let ks = ks_two_sample(&sim_samples[ci], &limit_samples[ci])?;
                rows.push(vec![
                    json!(n),
                    json!(t),
                    json!(label),
                    json!(ks),
                    json!(r.replications),
                ]);
            }
        }
    }
    em.write_summary(&["n", "t", "coord", "ks", "replications"], &rows)
}

fn run_waits(r: &ResolvedConfig, em: &mut Emitter) -> Result<()> {
    use rayon::prelude::*;
    let mut rows = Vec::new();
    for &n in &r.sweep_ns {
        let params = ModelParams { n, ..r.params };
        params.validate()?;
        let counts = r.initial.count_state(n, params.k_max)?;
        let lengths = lengths_from_counts(&counts, n);
        let all: Vec<(usize, usize, Vec<f64>)> = (0..r.replications)
            .into_par_iter()
            .map(|rep| -> Result<(usize, usize, Vec<f64>)> {
                let mut rng = replication_rng(params.seed, rep as u64);
                let (_, records) =
                    simulate_jsq_per_queue_with_rng(&params, &lengths, &mut rng)?;
                Ok((records.total_arrivals(), records.delayed().len(), records.delayed()))
            })
            .collect::<Result<_>>()?;
        let total_arrivals: usize = all.iter().map(|(a, _, _)| a).sum();
        let delayed_count: usize = all.iter().map(|(_, d, _)| d).sum();
        let pooled: Vec<f64> = all.into_iter().flat_map(|(_, _, w)| w).collect();
        let fraction = delayed_count as f64 / total_arrivals.max(1) as f64;
        let summary = delayed_wait_distribution(&crate::sim::WaitRecords { waits: pooled });
        let (mean, ks) = match &summary {
            Ok(s) => (json!(s.mean), json!(s.ks_exp1)),
            Err(Error::EmptySample) => (Value::Null, Value::Null),
            Err(e) => return Err(Error::InvalidParams(e.to_string())),
        };
        rows.push(vec![
            json!(n),
            json!(r.replications),
            json!(total_arrivals),
            json!(delayed_count),
            json!(fraction),
            mean,
            ks,
            json!(fraction * (n as f64).sqrt()),
        ]);
    }
    em.write_summary(
        &[
            "n",
            "replications",
            "total_arrivals",
            "delayed_count",
            "delayed_fraction",
            "mean_positive_wait",
            "ks_exp1",
            "fraction_times_sqrt_n",
        ],
        &rows,
    )
}

/// Deterministic queue-length vector realizing a counts state.
pub fn lengths_from_counts(counts: &CountState, n: u64) -> Vec<u64> {
    let q = counts.counts();
    let mut lengths = Vec::with_capacity(n as usize);
    // q[l-1] - q[l] queues have length exactly l; assign longest first
    for l in (1..=q.len()).rev() {
        let above = if l < q.len() { q[l] } else { 0 };
        for _ in 0..(q[l - 1] - above) {
            lengths.push(l as u64);
        }
    }
    while lengths.len() < n as usize {
        lengths.push(0);
    }
    lengths
}

fn run_sweep(r: &ResolvedConfig, em: &mut Emitter) -> Result<()> {
    let estimates = estimate_hitting_probability(
        &r.sweep_ns,
        r.params.beta,
        r.params.k_max,
        &r.initial,
        r.params.horizon,
        r.replications,
        r.params.seed,
    )?;
    let rows: Vec<Vec<Value>> = estimates
        .iter()
        .map(|e| {
            vec![
                json!(e.n),
                json!(e.replications),
                json!(e.hits),
                json!(e.probability),
                json!(e.ci_low),
                json!(e.ci_high),
            ]
        })
        .collect();
    em.write_summary(&["n", "replications", "hits", "probability", "ci_low", "ci_high"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_nested_fields() {
        let mut doc = json!({"mode": "simulate"});
        apply_set(&mut doc, "grid.dt=0.01").unwrap();
        apply_set(&mut doc, "n=500").unwrap();
        apply_set(&mut doc, "initial=all-busy").unwrap();
        assert_eq!(doc["grid"]["dt"], json!(0.01));
        assert_eq!(doc["n"], json!(500));
        assert_eq!(doc["initial"], json!("all-busy"));
    }

    #[test]
    fn config_round_trip() {
        let cfg = load_config(
            None,
            Some(Mode::Compare),
            &["n=400".into(), "grid.dt=0.01".into(), "sweep_ns=[100,400]".into()],
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let again: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn mode_is_required() {
        let err = load_config(None, None, &[]).unwrap_err();
        assert!(matches!(err, Error::Config { field, .. } if field == "mode"));
    }

    #[test]
    fn resolve_rejects_bad_sweep_beta() {
        let mut cfg = ExperimentConfig::new(Mode::Sweep);
        cfg.beta = Some(6.0);
        cfg.sweep_ns = Some(vec![25]);
        let err = cfg.resolve().unwrap_err();
        assert!(matches!(err, Error::Config { field, .. } if field == "sweep_ns"));
    }

    #[test]
    fn figure1_defaults() {
        let cfg = ExperimentConfig::new(Mode::Figure1);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.params.n, 100_000);
        assert_eq!(r.params.beta, 2.0);
        let init = r.initial.count_state(r.params.n, r.params.k_max).unwrap();
        let q = init.counts();
        assert_eq!(q[0], 100_000);
        let sqrt_n = 100_000f64.sqrt();
        assert_eq!(q[1], sqrt_n.round() as u64);
        assert_eq!(q[4], (0.02 * sqrt_n).round() as u64);
        // monotone chain with queues present up to length five
        assert!(q.windows(2).all(|w| w[0] >= w[1]) && q[4] > 0);
    }

    #[test]
    fn lengths_realize_counts() {
        let counts = CountState::new(vec![5, 3, 1], 8).unwrap();
        let lengths = lengths_from_counts(&counts, 8);
        assert_eq!(lengths.len(), 8);
        for lvl in 1..=3u64 {
            let have = lengths.iter().filter(|&&l| l >= lvl).count() as u64;
            assert_eq!(have, counts.counts()[(lvl - 1) as usize]);
        }
    }
}
