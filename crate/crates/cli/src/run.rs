//! Executes a [`RunConfig`] and writes its outputs.

use std::fs;
use std::path::Path;

use orderprop_core::classify::{classify_system, CheckConfig};
use orderprop_core::flow::{test_flow_property, FlowConfig};
use orderprop_core::lna::{compare_lna, is_unimolecular, LnaConfig, ReactionNetwork};
use orderprop_core::orders::{GaussianState, OrthantOrder};
use orderprop_core::stoch::{euler_maruyama, Diffusion, EmConfig};
use orderprop_core::SystemModel;
use serde::Serialize;
use serde_json::json;

use crate::config::{defaults, CommandConfig, RunConfig};
use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::write(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    write_bytes(dir, name, s.as_bytes())
}

fn csv<F>(dir: &Path, name: &str, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    write_bytes(dir, name, &buf)
}

/// Parses `text` (empty means the standard order) and returns it with its canonical spelling.
fn resolve_order(text: &str, n: usize, m: usize) -> Result<(OrthantOrder, String), CliError> {
    let order = if text.is_empty() {
        OrthantOrder::standard(n, m)
    } else {
        OrthantOrder::parse(text, m)?
    };
    order.check_dims(n, m)?;
    let canonical = order.to_string();
    Ok((order, canonical))
}

/// Runs the command, writes outputs plus the resolved configuration into
/// `cfg.out`, and returns the configuration and a short summary.
pub fn execute(mut cfg: RunConfig) -> Result<(RunConfig, String), CliError> {
    cfg.validate()?;
    let out = cfg.out.clone();
    // Inputs are checked before the output directory is touched.
    let summary = match &mut cfg.command {
        CommandConfig::Classify { system, order } => {
            let model = SystemModel::from_json(&read(system)?)?;
            let (ord, canonical) = resolve_order(order, model.n(), model.m())?;
            *order = canonical.clone();
            let check = CheckConfig {
                samples: cfg.samples,
                tol: cfg.tol,
                seed: cfg.seed,
                ..CheckConfig::default()
            };
            let report = classify_system(&model, &ord, &check)?;
            let text = format!("order: {canonical}\n{}", report.render_text());
            create(&out)?;
            write_json(&out, "report.json", &json!({ "order": canonical, "report": report }))?;
            write_bytes(&out, "report.txt", text.as_bytes())?;
            text
        }
        CommandConfig::FlowTest {
            system,
            order,
            property,
        } => {
            let model = SystemModel::from_json(&read(system)?)?;
            let (ord, canonical) = resolve_order(order, model.n(), model.m())?;
            *order = canonical.clone();
            let fc = FlowConfig {
                trials: cfg.pairs,
                horizon: cfg.horizon,
                dt: Some(cfg.dt),
                tol: cfg.tol,
                seed: cfg.seed,
            };
            let report = test_flow_property(*property, &model, &ord, &fc)?;
            create(&out)?;
            write_json(
                &out,
                "verdict.json",
                &json!({ "order": canonical, "verdict": report.verdict }),
            )?;
            for (k, tr) in report.worst_trajectories.iter().enumerate() {
                csv(&out, &format!("worst_trajectory_{}.csv", k + 1), |b| tr.write_csv(b))?;
            }
            let v = &report.verdict;
            format!(
                "{}: {} (worst margin {:e} at t = {} in x{}; {} of {} trials inconclusive)\n",
                json!(property).as_str().unwrap_or_default(),
                if v.passed { "pass" } else { "fail" },
                v.worst_margin,
                v.worst_time,
                v.worst_component + 1,
                v.inconclusive,
                v.trials
            )
        }
        CommandConfig::Lna {
            network,
            compare,
            class,
            order,
        } => {
            let net = ReactionNetwork::from_json(&read(network)?)?;
            let load = |p: &Path| -> Result<GaussianState, CliError> {
                serde_json::from_str(&read(p)?)
                    .map_err(|e| CliError::Input(format!("invalid Gaussian state {}: {e}", p.display())))
            };
            let (a, b) = (load(&compare[0])?, load(&compare[1])?);
            let (ord, canonical) = resolve_order(order, net.n(), 0)?;
            *order = canonical.clone();
            let lc = LnaConfig {
                horizon: cfg.horizon,
                dt: cfg.dt,
                tol: cfg.tol,
            };
            let cmp = compare_lna(&net, &a, &b, &ord, *class, &lc)?;
            create(&out)?;
            write_json(
                &out,
                "verdict.json",
                &json!({ "order": canonical, "unimolecular": is_unimolecular(&net), "verdict": cmp.verdict }),
            )?;
            csv(&out, "trajectory_a.csv", |w| cmp.a.write_csv(w))?;
            csv(&out, "trajectory_b.csv", |w| cmp.b.write_csv(w))?;
            let v = &cmp.verdict;
            let guarantee = json!(v.guarantee);
            match v.first_violation {
                None => format!(
                    "{}: pass over [0, {}] ({})\n",
                    v.class,
                    cfg.horizon,
                    guarantee.as_str().unwrap_or_default()
                ),
                Some(t) => format!(
                    "{}: fail, first violation at t = {t} ({})\n",
                    v.class,
                    guarantee.as_str().unwrap_or_default()
                ),
            }
        }
        CommandConfig::Simulate { diffusion, x0, record } => {
            let diff = Diffusion::from_json(&read(diffusion)?)?;
            let em = EmConfig {
                horizon: cfg.horizon,
                dt: cfg.dt,
                paths: cfg.paths,
                seed: cfg.seed,
                record: record.clone(),
            };
            let ens = euler_maruyama(&diff, x0, &em)?;
            let terminal = ens.terminal();
            let n = diff.n();
            let count = terminal.len().max(1) as f64;
            let mean: Vec<f64> = (0..n)
                .map(|i| terminal.iter().map(|x| x[i]).sum::<f64>() / count)
                .collect();
            create(&out)?;
            write_json(
                &out,
                "summary.json",
                &json!({
                    "paths": ens.paths(),
                    "aborted": ens.aborted(),
                    "times": ens.times,
                    "terminal_mean": mean,
                    "status": ens.status,
                }),
            )?;
            csv(&out, "ensemble.csv", |w| ens.write_csv(w))?;
            format!("simulated {} paths, {} aborted\n", ens.paths(), ens.aborted())
        }
    };
    write_bytes(&out, defaults::FILE, cfg.to_json().as_bytes())?;
    Ok((cfg, summary))
}

fn create(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}
