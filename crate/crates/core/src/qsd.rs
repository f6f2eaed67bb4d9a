//! λ-invariant measures and vectors and the λ-QSD.
//!
//! For a λ-recurrent model with finite exit set `H` the QSD is assembled from
//! the exit kernel: with `μ T^H = μ`,
//!
//! ```text
//! x_i = Σ_{j∈H} μ_j Σ_{n≥1} {}_H T_ji^{(n)} / (q_i - λ),
//! M_H = Σ_{j∈H} μ_j q_j0 / (q_j - λ),      u = λ x / M_H.
//! ```
//!
//! λ-transient models are served by [`solve_qsd_direct`], a shifted inverse
//! iteration for the positive left eigenvector of `Q_E` at `-λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{MMatrixLu, SparseRows};
use crate::model::GeneratorModel;
use crate::spectral::embedded_chain;
use crate::taboo::{taboo_series, taboo_series_into, ExitStationary, SeriesOptions, TabooSet};

fn series_options(t: &crate::spectral::EmbeddedChain, tol: Option<f64>, nmax: Option<usize>) -> SeriesOptions {
    let mut o = SeriesOptions::for_chain(t);
    if let Some(tol) = tol {
        o.tol = tol;
    }
    if let Some(nmax) = nmax {
        o.nmax = nmax;
    }
    o
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureAnchor {
    /// Singleton taboo set `{k}`; scaled so that `x_k = F_kk / (q_k - λ)`.
    State { position: usize, label: i64 },
    /// The exit set, weighted by `μ`.
    ExitSet { members: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMeasure {
    pub values: Vec<f64>,
    pub anchor: MeasureAnchor,
    /// `F_kk(λ)` for a state anchor; the measure is λ-invariant only when
    /// this is 1.
    pub f_kk: Option<f64>,
    pub converged: bool,
    pub terms: usize,
}

impl InvariantMeasure {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `x_i = Σ_{n≥1} {}_k T_ki^{(n)} / (q_i - λ)`.
pub fn invariant_measure(
    model: &GeneratorModel,
    lambda: f64,
    k: usize,
    tol: Option<f64>,
    nmax: Option<usize>,
) -> Result<InvariantMeasure> {
    if k >= model.n() {
        return Err(Error::BadIndex { index: k + 1, reason: "anchor state is outside the model" });
    }
    let t = embedded_chain(model, lambda)?;
    let s = taboo_series(&t, &TabooSet::singleton(model.n(), k), k, series_options(&t, tol, nmax));
    Ok(InvariantMeasure {
        values: s.partial.iter().enumerate().map(|(i, v)| v / t.denominator(i)).collect(),
        anchor: MeasureAnchor::State { position: k, label: model.label(k) },
        f_kk: Some(s.partial[k]),
        converged: s.converged,
        terms: s.n_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantVector {
    pub values: Vec<f64>,
    pub members: Vec<usize>,
    pub converged: bool,
    pub terms: usize,
}

/// `y_i = v_i` on `H` and `y_i = Σ_{j∈H} Σ_{n≥1} {}_H T_ij^{(n)} v_j` off `H`.
pub fn invariant_vector(
    model: &GeneratorModel,
    lambda: f64,
    members: &[usize],
    v: &[f64],
    tol: Option<f64>,
    nmax: Option<usize>,
) -> Result<InvariantVector> {
    if members.is_empty() {
        return Err(Error::EmptyExitSet);
    }
    if members.len() != v.len() {
        return Err(Error::BadParameters(format!("{} exit states but {} weights", members.len(), v.len())));
    }
    let t = embedded_chain(model, lambda)?;
    let h = TabooSet::new(model.n(), members);
    let mut sorted: Vec<(usize, f64)> = members.iter().copied().zip(v.iter().copied()).collect();
    sorted.sort_by_key(|e| e.0);
    let weights: Vec<f64> = sorted.iter().map(|e| e.1).collect();
    let s = taboo_series_into(&t, &h, &weights, series_options(&t, tol, nmax));
    let mut values = s.partial;
    for &(m, vm) in &sorted {
        values[m] = vm;
    }
    Ok(InvariantVector { values, members: h.members().to_vec(), converged: s.converged, terms: s.n_used })
}

/// `M_H = Σ_{j∈H} μ_j q_j0 / (q_j - λ)`.
pub fn moment_mh(model: &GeneratorModel, lambda: f64, exit: &ExitStationary) -> f64 {
    exit.members.iter().zip(&exit.mu).map(|(&j, m)| m * model.kill(j) / (model.total(j) - lambda)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `‖u Q + λ u‖_∞` over the checked states.
    pub eigen_residual: f64,
    /// `eigen_residual / max_i q_i`.
    pub relative_residual: f64,
    /// `|Σ u - 1|`.
    pub sum_defect: f64,
    pub min_u: f64,
    /// States whose Q-row is untouched by truncation.
    pub states_checked: usize,
    /// Entries that are exactly zero, typically from underflow far out in a
    /// window.
    pub zero_entries: usize,
}

/// Residuals of `u Q = -λ u` on interior states, plus normalization and
/// positivity diagnostics.
pub fn verify_qsd(model: &GeneratorModel, u: &[f64], lambda: f64) -> ResidualReport {
    let uq = model.apply_left(u);
    let mut residual: f64 = 0.0;
    let mut checked = 0;
    for j in 0..model.n() {
        if model.is_interior(j) {
            residual = residual.max((uq[j] + lambda * u[j]).abs());
            checked += 1;
        }
    }
    ResidualReport {
        eigen_residual: residual,
        relative_residual: residual / model.max_total_rate(),
        sum_defect: (u.iter().sum::<f64>() - 1.0).abs(),
        min_u: u.iter().copied().fold(f64::INFINITY, f64::min),
        states_checked: checked,
        zero_entries: u.iter().filter(|&&v| v == 0.0).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QsdPath {
    ExitKernel,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdResult {
    pub lambda: f64,
    pub path: QsdPath,
    pub u: Vec<f64>,
    /// The λ-invariant measure behind `u` (exit-kernel path only).
    pub x: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub m_h: Option<f64>,
    /// `Σ u` before normalization; 1 up to truncation and series error on
    /// the exit-kernel path.
    pub raw_sum: f64,
    /// Eigenvalue implied by the final inverse-iteration step (direct path).
    pub eigen_estimate: Option<f64>,
    pub iterations: usize,
    pub residuals: ResidualReport,
}

/// Allowed distance of the exit-kernel Perron root from 1.
const RECURRENCE_GAP: f64 = 1e-6;

/// The λ-QSD of a λ-recurrent model from its exit kernel.
pub fn assemble_qsd(model: &GeneratorModel, lambda: f64, exit: &ExitStationary) -> Result<QsdResult> {
    if exit.members.is_empty() {
        return Err(Error::EmptyExitSet);
    }
    if exit.perron_gap > RECURRENCE_GAP {
        return Err(Error::NotRecurrent { f_kk: exit.perron_root });
    }
    let n = model.n();
    let mut x = vec![0.0; n];
    for (m, row) in exit.mu.iter().zip(&exit.rows) {
        for (xi, r) in x.iter_mut().zip(row) {
            *xi += m * r;
        }
    }
    for (m, &j) in exit.mu.iter().zip(&exit.members) {
        x[j] = *m;
    }
    for (i, xi) in x.iter_mut().enumerate() {
        *xi /= model.total(i) - lambda;
    }
    let m_h = moment_mh(model, lambda, exit);
    let mut u: Vec<f64> = x.iter().map(|v| lambda * v / m_h).collect();
    let raw_sum: f64 = u.iter().sum();
    if !(raw_sum > 0.0 && raw_sum.is_finite()) {
        return Err(Error::NonPositiveEigenvector(format!("assembled mass {raw_sum}")));
    }
    u.iter_mut().for_each(|v| *v /= raw_sum);
    let residuals = verify_qsd(model, &u, lambda);
    Ok(QsdResult {
        lambda,
        path: QsdPath::ExitKernel,
        u,
        x: Some(x),
        mu: Some(exit.mu.clone()),
        m_h: Some(m_h),
        raw_sum,
        eigen_estimate: None,
        iterations: exit.max_terms,
        residuals,
    })
}

/// Positive left eigenvector of `Q_E` at `-λ` by inverse iteration with a
/// shift just below `λ`, normalized to a probability vector.
pub fn solve_qsd_direct(model: &GeneratorModel, lambda: f64, tol: f64) -> Result<QsdResult> {
    let n = model.n();
    let maxq = model.max_total_rate();
    let off: SparseRows = (0..n).map(|i| model.row(i).iter().map(|&(j, r)| (j, -r)).collect()).collect();
    let mut delta = (1e-6 * lambda).max(1e-9 * maxq);
    let (lu, shift) = loop {
        let s = lambda - delta;
        let diag: Vec<f64> = model.total_rates().iter().map(|q| q - s).collect();
        match MMatrixLu::factor(&diag, &off) {
            Ok(lu) => break (lu, s),
            Err(Error::NotMMatrix { .. }) if delta < maxq => delta *= 10.0,
            Err(Error::NotMMatrix { .. }) => {
                return Err(Error::NonPositiveEigenvector(format!("no admissible shift below lambda = {lambda}")))
            }
            Err(e) => return Err(e),
        }
    };
    let mut u = vec![1.0 / n as f64; n];
    let mut estimate = lambda;
    let max_iter = 10_000;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < max_iter && change > tol {
        let next = lu.solve_transpose(&u);
        let total: f64 = next.iter().sum();
        estimate = shift + u.iter().sum::<f64>() / total;
        let next: Vec<f64> = next.iter().map(|v| v / total).collect();
        change = next.iter().zip(&u).fold(0.0, |a, (p, q)| a.max((p - q).abs()));
        u = next;
        iterations += 1;
    }
    if change > tol {
        return Err(Error::NoConvergence { iterations, last_change: change });
    }
    let top = u.iter().copied().fold(0.0f64, f64::max);
    if let Some((i, &v)) = u.iter().enumerate().find(|(_, &v)| v < -1e-12 * top) {
        return Err(Error::NonPositiveEigenvector(format!("u[{}] = {v:e}", i + 1)));
    }
    u.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|v| *v /= total);
    let residuals = verify_qsd(model, &u, lambda);
    Ok(QsdResult {
        lambda,
        path: QsdPath::Direct,
        u,
        x: None,
        mu: None,
        m_h: None,
        raw_sum: 1.0,
        eigen_estimate: Some(estimate),
        iterations,
        residuals,
    })
}
