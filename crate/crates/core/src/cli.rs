//! Command-line front end: argument parsing, dispatch and artifacts.

use std::path::{Path, PathBuf};
use std::thread;

use clap::Parser;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{derive_seed, generate_truth, run_bench, sample_data, ModelSpec};
use crate::config::{parse_config, Command, Overrides, RunConfig, SimulateKind, SCHEMA_VERSION};
use crate::diagnostics::median;
use crate::error::{Error, Result};
use crate::io::{
    create_dir, lower_triangle_labels, matrix_rows, read_matrix_csv, write_json, write_matrix_csv,
    write_records_csv, write_rows_csv,
};
use crate::linalg::spd_inverse;
use crate::mcar::{
    default_column_precision, fit_mcar, lattice_adjacency, prior_elicitation_sim, simulate_replicates,
    AdjacencyModel, McarOutput, McarSpec,
};
use crate::precision::{run_chain, ChainOutput, ConstraintLedger, Graph, PrecisionModel};
use crate::regression::{run_regression_chain, scenario_dataset, RegressionData, RegressionModel, RegressionOutput};
use crate::truncated::Interval;

#[derive(Debug, Parser)]
#[command(
    name = "unishrink",
    version,
    about = "Shrinkage priors for precision matrices and regression, sampled by Gibbs"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    #[arg(long, value_name = "N")]
    pub burnin: Option<usize>,
    #[arg(long, value_name = "N")]
    pub thin: Option<usize>,
    #[arg(long, value_name = "N")]
    pub chains: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            chains: self.chains,
            out: self.out.clone(),
        }
    }
}

/// Machine-readable form of an error, printed to stderr on failure.
pub fn error_json(e: &Error) -> Value {
    let mut err = json!({
        "kind": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    if let Error::Config { pointer, .. } = e {
        err["pointer"] = json!(pointer);
    }
    json!({ "schema_version": SCHEMA_VERSION, "error": err })
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = parse_config(cli.config.as_deref(), cli.command, &cli.overrides()).and_then(|c| run(&c));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

/// Executes a validated configuration and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<()> {
    let out = config.out_dir();
    create_dir(&out)?;
    match config.command() {
        Command::Simulate => simulate(config, &out),
        Command::FitPrecision => fit_precision(config, &out),
        Command::FitRegression => fit_regression(config, &out),
        Command::FitMcar => fit_mcar_command(config, &out),
        Command::ElicitPrior => elicit(config, &out),
        Command::Bench => bench(config, &out),
    }
}

fn envelope(config: &RunConfig, body: Value) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": config.command().name(),
        "config": config,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("summaries serialize")
}

/// Runs `f` for chains `0..k` in parallel threads, keeping chain order.
fn run_chains<T: Send>(k: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    thread::scope(|s| {
        let handles: Vec<_> = (0..k).map(|c| {
            let f = &f;
            s.spawn(move || f(c))
        }).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

fn kept_iterations(config: &RunConfig, count: usize) -> impl Iterator<Item = f64> + '_ {
    (0..count).map(move |k| (config.sampler.burnin + k * config.sampler.thin + 1) as f64)
}

fn simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let s = &config.simulate;
    let seed = config.sampler.seed;
    let files: Value = match s.kind {
        SimulateKind::Precision => {
            let spec = ModelSpec::new(s.model, s.p, derive_seed(seed, &[u64::from(s.model)]))?;
            let (sigma, omega) = generate_truth(&spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xDA7A]));
            let y = sample_data(&sigma, s.n, &mut rng)?;
            write_matrix_csv(&out.join("data.csv"), &y.transpose(), "x")?;
            write_matrix_csv(&out.join("truth_omega.csv"), &omega, "c")?;
            write_matrix_csv(&out.join("truth_sigma.csv"), &sigma, "c")?;
            json!({"data": "data.csv", "truth_omega": "truth_omega.csv", "truth_sigma": "truth_sigma.csv"})
        }
        SimulateKind::Regression => {
            let (data, beta, cov) = scenario_dataset(s.beta_config, s.correlated, seed)?;
            write_matrix_csv(&out.join("design.csv"), &data.x, "x")?;
            write_matrix_csv(&out.join("response.csv"), &DMatrix::from_column_slice(data.n(), 1, data.y.as_slice()), "y")?;
            write_matrix_csv(&out.join("truth_beta.csv"), &DMatrix::from_column_slice(beta.len(), 1, beta.as_slice()), "beta")?;
            write_matrix_csv(&out.join("design_covariance.csv"), &cov, "c")?;
            json!({"design": "design.csv", "response": "response.csv", "truth_beta": "truth_beta.csv",
                   "design_covariance": "design_covariance.csv"})
        }
        SimulateKind::Mcar => {
            let w = lattice_adjacency(s.lattice[0], s.lattice[1]);
            let adj = AdjacencyModel::new(w.clone())?;
            let omega_r = adj.car_precision(s.rho)?;
            let omega_c = default_column_precision();
            let xs = simulate_replicates(&omega_r, &omega_c, s.replicates, seed)?;
            write_matrix_csv(&out.join("adjacency.csv"), &w, "r")?;
            write_matrix_csv(&out.join("truth_omega_r.csv"), &omega_r, "r")?;
            write_matrix_csv(&out.join("truth_omega_c.csv"), &omega_c, "c")?;
            let mut names = Vec::new();
            for (k, x) in xs.iter().enumerate() {
                let name = format!("replicate_{:03}.csv", k + 1);
                write_matrix_csv(&out.join(&name), x, "c")?;
                names.push(name);
            }
            json!({"adjacency": "adjacency.csv", "truth_omega_r": "truth_omega_r.csv",
                   "truth_omega_c": "truth_omega_c.csv", "replicates": names})
        }
    };
    write_json(&out.join("summary.json"), &envelope(config, json!({ "files": files })))
}

/// Ledger from the config: graph, then centers, multipliers and boxes.
pub fn build_ledger(config: &RunConfig, p: usize) -> Result<ConstraintLedger> {
    let l = &config.ledger;
    let graph = match &l.graph {
        Some(path) => {
            let w = read_matrix_csv(path)?;
            if w.shape() != (p, p) {
                return Err(Error::config("/ledger/graph", format!("graph must be {p}x{p}")));
            }
            Graph::from_adjacency(&w)?
        }
        None => Graph::complete(p),
    };
    let mut ledger = ConstraintLedger::with_graph(graph);
    let index = |ptr: String, i: usize, j: usize| {
        if i > p || j > p {
            Err(Error::config(ptr, format!("element ({i}, {j}) is outside a {p}x{p} matrix")))
        } else {
            Ok((i - 1, j - 1))
        }
    };
    for (k, e) in l.centers.iter().enumerate() {
        let (i, j) = index(format!("/ledger/centers/{k}"), e.i, e.j)?;
        ledger.set_center(i, j, e.value);
    }
    for (k, e) in l.multipliers.iter().enumerate() {
        let (i, j) = index(format!("/ledger/multipliers/{k}"), e.i, e.j)?;
        ledger.set_multiplier(i, j, e.value);
    }
    for (k, b) in l.boxes.iter().enumerate() {
        let (i, j) = index(format!("/ledger/boxes/{k}"), b.i, b.j)?;
        ledger.set_box(
            i,
            j,
            Interval {
                lo: b.lo.unwrap_or(f64::NEG_INFINITY),
                hi: b.hi.unwrap_or(f64::INFINITY),
            },
        );
    }
    ledger.validate().map_err(|e| Error::config("/ledger", e.to_string()))?;
    Ok(ledger)
}

fn sigma_estimators(mean_omega: &DMatrix<f64>, mean_sigma: &DMatrix<f64>) -> Result<Value> {
    Ok(json!({
        "mean_omega": matrix_rows(mean_omega),
        "sigma_hat_L1": matrix_rows(&spd_inverse(mean_omega)?),
        "sigma_hat_L2": matrix_rows(mean_sigma),
    }))
}

fn fit_precision(config: &RunConfig, out: &Path) -> Result<()> {
    let data_path = config.io.data.as_ref().expect("validated");
    let y = read_matrix_csv(data_path)?;
    let (n, p) = y.shape();
    let s = y.transpose() * &y;
    let ledger = build_ledger(config, p)?;
    let model = PrecisionModel::new(config.prior.family, config.prior.hyper(), ledger)?;
    let outputs: Vec<ChainOutput> = run_chains(config.sampler.chains, |k| {
        run_chain(&model, &s, n as f64, None, &config.sampler.chain(k))
    })?;

    let mut header = vec!["iter".to_string(), "tau".to_string()];
    header.extend(lower_triangle_labels("w", p));
    let mut chains = Vec::new();
    let mut diags = Vec::new();
    for (k, o) in outputs.iter().enumerate() {
        if config.sampler.store_draws {
            let rows = kept_iterations(config, o.draws.len())
                .zip(&o.tau_draws)
                .zip(&o.draws)
                .map(|((it, tau), d)| {
                    let mut r = vec![it, *tau];
                    r.extend(d);
                    r
                });
            write_rows_csv(&out.join(format!("draws_chain{k}.csv")), &header, rows)?;
        }
        let mut c = sigma_estimators(&o.mean_omega, &o.mean_sigma)?;
        c["chain"] = json!(k);
        c["mean_tau"] = json!(o.tau_draws.iter().sum::<f64>() / o.tau_draws.len() as f64);
        chains.push(c);
        diags.push(json!({"chain": k, "diagnostics": to_value(&o.diagnostics), "runtime_seconds": o.runtime_seconds}));
    }
    let k = outputs.len() as f64;
    let pooled_omega = outputs.iter().fold(DMatrix::zeros(p, p), |a, o| a + &o.mean_omega) / k;
    let pooled_sigma = outputs.iter().fold(DMatrix::zeros(p, p), |a, o| a + &o.mean_sigma) / k;
    let summary = json!({
        "p": p,
        "n": n,
        "chains": chains,
        "pooled": sigma_estimators(&pooled_omega, &pooled_sigma)?,
    });
    write_json(&out.join("summary.json"), &envelope(config, summary))?;
    write_diagnostics(config, out, diags, &outputs.iter().map(|o| o.runtime_seconds).collect::<Vec<_>>())
}

fn write_diagnostics(config: &RunConfig, out: &Path, chains: Vec<Value>, runtimes: &[f64]) -> Result<()> {
    let body = json!({
        "chains": chains,
        "runtime_seconds": runtimes.iter().sum::<f64>(),
    });
    write_json(&out.join("diagnostics.json"), &envelope(config, body))
}

fn fit_regression(config: &RunConfig, out: &Path) -> Result<()> {
    let x = read_matrix_csv(config.io.design.as_ref().expect("validated"))?;
    let yv = read_matrix_csv(config.io.response.as_ref().expect("validated"))?;
    if yv.ncols() != 1 || yv.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "response must be a single column of {} rows",
            x.nrows()
        )));
    }
    let data = RegressionData::new(x, DVector::from_column_slice(yv.as_slice()))?;
    let p = data.p();
    let model = RegressionModel::new(config.prior.family, config.prior.hyper())?;
    let outputs: Vec<RegressionOutput> = run_chains(config.sampler.chains, |k| {
        run_regression_chain(&data, &model, &config.sampler.chain(k))
    })?;
    let mut header = vec!["iter".to_string()];
    header.extend((1..=p).map(|j| format!("beta_{j}")));
    header.extend(["sigma2".to_string(), "tau".to_string()]);
    let mut chains = Vec::new();
    let mut diags = Vec::new();
    for (k, o) in outputs.iter().enumerate() {
        if config.sampler.store_draws {
            let rows = kept_iterations(config, o.beta_draws.len())
                .zip(o.beta_draws.iter().zip(o.sigma2_draws.iter().zip(&o.tau_draws)))
                .map(|(it, (b, (s2, tau)))| {
                    let mut r = vec![it];
                    r.extend(b);
                    r.extend([*s2, *tau]);
                    r
                });
            write_rows_csv(&out.join(format!("draws_chain{k}.csv")), &header, rows)?;
        }
        chains.push(json!({
            "chain": k,
            "mean_beta": o.mean_beta.as_slice(),
            "mean_sigma2": o.mean_sigma2,
            "mean_tau": o.mean_tau,
        }));
        diags.push(json!({"chain": k, "diagnostics": to_value(&o.diagnostics), "runtime_seconds": o.runtime_seconds}));
    }
    let k = outputs.len() as f64;
    let pooled_beta = outputs.iter().fold(DVector::zeros(p), |a, o| a + &o.mean_beta) / k;
    let summary = json!({
        "n": data.n(),
        "p": p,
        "chains": chains,
        "pooled": {
            "mean_beta": pooled_beta.as_slice(),
            "mean_sigma2": outputs.iter().map(|o| o.mean_sigma2).sum::<f64>() / k,
            "mean_tau": outputs.iter().map(|o| o.mean_tau).sum::<f64>() / k,
        },
    });
    write_json(&out.join("summary.json"), &envelope(config, summary))?;
    write_diagnostics(config, out, diags, &outputs.iter().map(|o| o.runtime_seconds).collect::<Vec<_>>())
}

fn read_adjacency(config: &RunConfig) -> Result<AdjacencyModel> {
    let w = read_matrix_csv(config.io.adjacency.as_ref().expect("validated"))?;
    AdjacencyModel::new(w)
}

fn mcar_summary(o: &McarOutput) -> Value {
    json!({
        "mean_omega_r": matrix_rows(&o.mean_omega_r),
        "mean_omega_c": matrix_rows(&o.mean_omega_c),
        "rho_posterior": o.rho_posterior,
        "rho_mode": o.rho_mode,
    })
}

fn fit_mcar_command(config: &RunConfig, out: &Path) -> Result<()> {
    let adj = read_adjacency(config)?;
    let xs = config
        .io
        .replicates
        .iter()
        .map(|p| read_matrix_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let spec: &McarSpec = &config.mcar;
    let outputs: Vec<McarOutput> =
        run_chains(config.sampler.chains, |k| fit_mcar(&xs, &adj, spec, &config.sampler.chain(k)))?;
    let (pr, pc) = (adj.dim(), xs[0].ncols());
    let with_rho = outputs[0].rho_posterior.is_some();
    let mut header = vec!["iter".to_string()];
    if with_rho {
        header.push("rho".into());
    }
    header.extend(lower_triangle_labels("omega_r", pr));
    header.extend(lower_triangle_labels("omega_c", pc));
    let mut chains = Vec::new();
    let mut diags = Vec::new();
    for (k, o) in outputs.iter().enumerate() {
        if config.sampler.store_draws {
            let rows = kept_iterations(config, o.draws_r.len()).enumerate().map(|(d, it)| {
                let mut r = vec![it];
                if with_rho {
                    r.push(o.rho_draws[d]);
                }
                r.extend(&o.draws_r[d]);
                r.extend(&o.draws_c[d]);
                r
            });
            write_rows_csv(&out.join(format!("draws_chain{k}.csv")), &header, rows)?;
        }
        let mut c = mcar_summary(o);
        c["chain"] = json!(k);
        chains.push(c);
        diags.push(json!({"chain": k, "diagnostics": to_value(&o.diagnostics), "runtime_seconds": o.runtime_seconds}));
    }
    let k = outputs.len() as f64;
    let pooled_r = outputs.iter().fold(DMatrix::zeros(pr, pr), |a, o| a + &o.mean_omega_r) / k;
    let pooled_c = outputs.iter().fold(DMatrix::zeros(pc, pc), |a, o| a + &o.mean_omega_c) / k;
    let pooled_rho: Option<Vec<f64>> = with_rho.then(|| {
        (0..outputs[0].rho_grid.len())
            .map(|g| outputs.iter().map(|o| o.rho_posterior.as_ref().expect("grid posterior")[g]).sum::<f64>() / k)
            .collect()
    });
    let pooled_mode = pooled_rho.as_ref().and_then(|post| {
        post.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(g, _)| outputs[0].rho_grid[g])
    });
    let summary = json!({
        "p_r": pr,
        "p_c": pc,
        "replicates": xs.len(),
        "variant": spec.variant,
        "rho_grid": outputs[0].rho_grid,
        "chains": chains,
        "pooled": {
            "mean_omega_r": matrix_rows(&pooled_r),
            "mean_omega_c": matrix_rows(&pooled_c),
            "rho_posterior": pooled_rho,
            "rho_mode": pooled_mode,
        },
    });
    write_json(&out.join("summary.json"), &envelope(config, summary))?;
    write_diagnostics(config, out, diags, &outputs.iter().map(|o| o.runtime_seconds).collect::<Vec<_>>())
}

#[derive(Serialize)]
struct ElicitRow {
    row_tau: f64,
    i: usize,
    j: usize,
    center: f64,
    q05: f64,
    q25: f64,
    q50: f64,
    q75: f64,
    q95: f64,
    iqr: f64,
    median_abs_deviation_from_center: f64,
}

fn elicit(config: &RunConfig, out: &Path) -> Result<()> {
    let adj = read_adjacency(config)?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for (k, &tau) in config.elicit.taus.iter().enumerate() {
        let spec = McarSpec {
            row_tau: tau,
            ..config.mcar.clone()
        };
        let seed = derive_seed(config.sampler.seed, &[k as u64]);
        let s = prior_elicitation_sim(&adj, &spec, config.elicit.draws, config.elicit.burnin, seed)?;
        for e in &s.elements {
            rows.push(ElicitRow {
                row_tau: tau,
                i: e.i + 1,
                j: e.j + 1,
                center: e.center,
                q05: e.q05,
                q25: e.q25,
                q50: e.q50,
                q75: e.q75,
                q95: e.q95,
                iqr: e.iqr,
                median_abs_deviation_from_center: e.median_abs_deviation_from_center,
            });
        }
        summaries.push(s);
    }
    // per element, whether the spread grows with τ_r in the listed order
    let increasing: Vec<bool> = (0..summaries[0].elements.len())
        .map(|e| summaries.windows(2).all(|w| w[0].elements[e].iqr < w[1].elements[e].iqr))
        .collect();
    write_records_csv(&out.join("elicitation.csv"), &rows)?;
    let summary = json!({
        "summaries": summaries,
        "iqr_increasing_in_tau": increasing.iter().all(|b| *b),
    });
    write_json(&out.join("summary.json"), &envelope(config, summary))
}

#[derive(Serialize)]
struct BenchLine<'a> {
    model: u8,
    p: usize,
    n: usize,
    prior: &'a str,
    replicate: usize,
    #[serde(rename = "L1")]
    l1: f64,
    #[serde(rename = "L2")]
    l2: f64,
}

fn bench(config: &RunConfig, out: &Path) -> Result<()> {
    let rows = run_bench(&config.bench, |r| {
        eprintln!(
            "model {} n {} {} replicate {}: L1 {:.4} L2 {:.4}",
            r.model, r.n, r.prior, r.replicate, r.l1, r.l2
        )
    })?;
    let lines: Vec<BenchLine> = rows
        .iter()
        .map(|r| BenchLine {
            model: r.model,
            p: r.p,
            n: r.n,
            prior: &r.prior,
            replicate: r.replicate,
            l1: r.l1,
            l2: r.l2,
        })
        .collect();
    write_records_csv(&out.join("bench.csv"), &lines)?;
    let mut cells = Vec::new();
    let mut seen: Vec<(u8, usize, String)> = Vec::new();
    for r in &rows {
        let key = (r.model, r.n, r.prior.clone());
        if seen.contains(&key) {
            continue;
        }
        let group: Vec<_> = rows.iter().filter(|x| (x.model, x.n, &x.prior) == (key.0, key.1, &key.2)).collect();
        cells.push(json!({
            "model": key.0,
            "n": key.1,
            "prior": key.2,
            "replicates": group.len(),
            "median_L1": median(&group.iter().map(|x| x.l1).collect::<Vec<_>>()),
            "median_L2": median(&group.iter().map(|x| x.l2).collect::<Vec<_>>()),
        }));
        seen.push(key);
    }
    write_json(&out.join("summary.json"), &envelope(config, json!({ "cells": cells })))?;
    let runtimes: Vec<f64> = rows.iter().map(|r| r.runtime_seconds).collect();
    let diags = rows
        .iter()
        .map(|r| json!({"model": r.model, "n": r.n, "prior": r.prior, "replicate": r.replicate,
                        "runtime_seconds": r.runtime_seconds}))
        .collect();
    write_diagnostics(config, out, diags, &runtimes)
}
