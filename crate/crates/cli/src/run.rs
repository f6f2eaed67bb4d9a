//! Pipelines behind each subcommand.

use std::path::Path;
use std::time::Instant;

use qsdlab_core::format::{load_model, model_digest};
use qsdlab_core::htransform::{hitting_prob, moment_bound};
use qsdlab_core::model::{make_family, truncate, ModelFamilySpec};
use qsdlab_core::qsd::{assemble_qsd, invariant_measure, solve_qsd_direct, verify_qsd};
use qsdlab_core::simulate::{
    estimate_lambda0, holding_time_ks, qsd_invariance_check, simulate_paths, write_trace, yaglom_estimate, SimConfig,
};
use qsdlab_core::spectral::{
    classify, decay_parameter, embedded_chain, ClassificationVerdict, ClassifyOptions, DecayOptions, DecayResult, Recurrence,
};
use qsdlab_core::taboo::{exit_kernel, ExitKernelOptions};
use qsdlab_core::GeneratorModel;

use crate::config::{Command, ModelSource, RunConfig};
use crate::document::{Estimates, Outputs, ResultDocument, Timing, WindowInfo, NO_QSD_NULL, SCHEMA};
use crate::error::CliError;

const HITTING_MAX_SWEEPS: usize = 1_000_000;

pub fn load(cfg: &RunConfig) -> Result<GeneratorModel, CliError> {
    match &cfg.source {
        ModelSource::Family { family } => {
            let level = cfg.trunc.ok_or_else(|| CliError::bad_parameters("--trunc is required with --family".into()))?;
            Ok(make_family(&ModelFamilySpec::new(*family, level))?)
        }
        ModelSource::File { path } => {
            let model = load_model(path)?;
            Ok(match cfg.trunc {
                Some(level) => truncate(&model, level)?,
                None => model,
            })
        }
    }
}

fn window(model: &GeneratorModel) -> WindowInfo {
    let t = model.truncation();
    WindowInfo {
        states: model.n(),
        labels: model.labels().to_vec(),
        level: t.map(|t| t.level),
        family: t.and_then(|t| t.family),
        boundary: model.exit_set().at_boundary.iter().map(|&i| model.label(i)).collect(),
    }
}

fn anchor(model: &GeneratorModel, cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.anchor {
        None => Ok(model.default_anchor()),
        Some(label) => model
            .position_of_label(label)
            .ok_or_else(|| CliError::new("bad_index", format!("state {label} is not in the model"))),
    }
}

fn decay(model: &GeneratorModel, cfg: &RunConfig) -> Result<DecayResult, CliError> {
    Ok(decay_parameter(model, &DecayOptions { method: cfg.method, tol: cfg.tol, ..DecayOptions::default() })?)
}

fn classification(model: &GeneratorModel, cfg: &RunConfig, d: &DecayResult, k: usize) -> Result<ClassificationVerdict, CliError> {
    Ok(classify(model, d.limit(), k, &ClassifyOptions { series_tol: cfg.series_tol, ..ClassifyOptions::default() })?)
}

/// Reads a distribution: a JSON array, a result document carrying
/// `outputs.qsd.u`, or numbers separated by whitespace or commas with `#`
/// comment lines.
pub fn read_distribution(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    let bad = |m: String| CliError::new("parse_error", format!("{}: {m}", path.display()));
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        let v: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()))?;
        let arr = if v.is_array() { Some(&v) } else { v.pointer("/outputs/qsd/u") };
        let arr = arr.and_then(|a| a.as_array()).ok_or_else(|| bad("no distribution array found".into()))?;
        return arr.iter().map(|x| x.as_f64().ok_or_else(|| bad(format!("not a number: {x}")))).collect();
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|_| CliError::new("parse_error", format!("line {}: not a number: {tok}", n + 1)))?);
        }
    }
    Ok(out)
}

fn compute(model: &GeneratorModel, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let k = anchor(model, cfg)?;
    let d = decay(model, cfg)?;
    let verdict = classification(model, cfg, &d, k)?;
    let lambda = d.lambda;
    let qsd = match verdict.recurrence {
        Recurrence::LambdaTransient => {
            out.verdict = Some("QSD: lambda-transient, direct solve on the window".into());
            Some(solve_qsd_direct(model, lambda, cfg.series_tol)?)
        }
        Recurrence::LambdaPositiveRecurrent if verdict.x_summable => {
            let t = embedded_chain(model, lambda)?;
            let mut opts = ExitKernelOptions::for_chain(&t);
            opts.series.tol = cfg.series_tol;
            let exit = exit_kernel(&t, &model.exit_set().members, opts)?;
            out.verdict = Some("QSD: lambda-positive recurrent, assembled from the exit kernel".into());
            Some(assemble_qsd(model, lambda, &exit)?)
        }
        _ => {
            out.verdict = Some(NO_QSD_NULL.into());
            None
        }
    };
    if let Some(q) = &qsd {
        out.residual_gate_passed = Some(q.residuals.relative_residual <= cfg.residual_gate);
    }
    out.lambda = Some(lambda);
    out.lambda_limit = Some(d.limit());
    out.decay = Some(d);
    out.classification = Some(verdict);
    out.qsd = qsd;
    Ok(())
}

fn bound(model: &GeneratorModel, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let k = anchor(model, cfg)?;
    let d = decay(model, cfg)?;
    let verdict = classification(model, cfg, &d, k)?;
    let lambda = d.lambda;
    // `λ Σ x_i` is only meaningful when the invariant measure is summable.
    let attained = if verdict.recurrence.is_recurrent() && verdict.x_summable {
        let x = invariant_measure(model, lambda, k, Some(cfg.series_tol), None)?;
        Some(lambda * x.total())
    } else {
        None
    };
    let h = hitting_prob(model, k, cfg.series_tol, HITTING_MAX_SWEEPS)?;
    out.bound = Some(moment_bound(model, k, lambda, &h, attained)?);
    out.lambda = Some(lambda);
    out.lambda_limit = Some(d.limit());
    out.decay = Some(d);
    out.classification = Some(verdict);
    out.hitting = Some(h);
    Ok(())
}

fn simulate(model: &GeneratorModel, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let s = cfg.simulation.as_ref().expect("simulate carries settings");
    let i0 = anchor(model, cfg)?;
    let mut sim = SimConfig::new(s.paths, s.horizon, s.seed).with_workers(cfg.workers);
    sim.validate()?;
    let lambda0 = estimate_lambda0(model, i0, &sim, s.fit)?;
    let yaglom = yaglom_estimate(model, i0, s.t, &sim)?;
    let ks = holding_time_ks(model, i0, &sim)?;
    let invariance = match &s.u {
        Some(path) => Some(qsd_invariance_check(model, &read_distribution(path)?, s.t, &sim)?),
        None => None,
    };
    if let Some((path, count)) = &cfg.trace {
        sim.paths = (*count).clamp(1, s.paths);
        let paths = simulate_paths(model, i0, &sim)?;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_trace(&paths, &mut file)?;
    }
    out.estimates =
        Some(Estimates { initial_label: model.label(i0), lambda0, yaglom, holding_time_ks: ks, invariance });
    Ok(())
}

fn verify(model: &GeneratorModel, cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let v = cfg.verify.as_ref().expect("verify carries settings");
    let u = read_distribution(&v.u)?;
    if u.len() != model.n() {
        return Err(CliError::bad_parameters(format!("distribution has {} entries, model has {} states", u.len(), model.n())));
    }
    let r = verify_qsd(model, &u, v.lambda);
    out.residual_gate_passed = Some(r.relative_residual <= cfg.residual_gate && r.sum_defect <= cfg.residual_gate && r.min_u >= 0.0);
    out.lambda = Some(v.lambda);
    out.residuals = Some(r);
    Ok(())
}

/// Runs one command. The returned document may still report a failed
/// residual gate; [`execute`] turns that into a nonzero exit.
pub fn run(cfg: &RunConfig) -> Result<ResultDocument, CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::new("io_error", e.to_string()))?;
    pool.install(|| {
        let model = load(cfg)?;
        let mut outputs = Outputs::default();
        match cfg.command {
            Command::Compute => compute(&model, cfg, &mut outputs)?,
            Command::Classify => {
                let k = anchor(&model, cfg)?;
                let d = decay(&model, cfg)?;
                let verdict = classification(&model, cfg, &d, k)?;
                outputs.lambda = Some(d.lambda);
                outputs.lambda_limit = Some(d.limit());
                outputs.decay = Some(d);
                outputs.classification = Some(verdict);
            }
            Command::Bound => bound(&model, cfg, &mut outputs)?,
            Command::Simulate => simulate(&model, cfg, &mut outputs)?,
            Command::Verify => verify(&model, cfg, &mut outputs)?,
        }
        Ok(ResultDocument {
            schema: SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION"),
            input_digest: model_digest(&model),
            config: cfg.clone(),
            window: window(&model),
            outputs,
            timing: cfg.timing.then(|| Timing { elapsed_seconds: start.elapsed().as_secs_f64() }),
        })
    })
}

/// Runs, writes the rendered document to `--out` or stdout, and reports a
/// failed residual gate as an error after the document is written.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let doc = run(cfg)?;
    let text = doc.render(cfg.format);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    if doc.outputs.residual_gate_passed == Some(false) {
        return Err(CliError::new(
            "residual_gate_failed",
            format!("residual exceeds the gate {:e}", cfg.residual_gate),
        ));
    }
    Ok(())
}
