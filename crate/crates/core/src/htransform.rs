//! Hitting probabilities `h_i = P_i[τ_k^+ < ∞]`, the transformed generator
//! `s_ij = q_ij h_j / h_i` whose only exit state is `k`, and the resulting
//! bound on `E_k e^{λ τ_0} 1[τ_k^+ = ∞]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GeneratorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingVector {
    pub target: usize,
    pub values: Vec<f64>,
    /// Infimum over the whole model (window).
    pub inf_h: f64,
    /// Infimum after dropping the outer tenth of a window (by `|label|`),
    /// where the truncation boundary depresses `h`. Equals `inf_h` on finite
    /// models.
    pub inf_h_interior: f64,
    /// `P_k[τ_k^+ < ∞] = Σ_j (q_kj / q_k) h_j`.
    pub return_probability: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn interior_states(model: &GeneratorModel) -> Vec<usize> {
    if !model.is_window() {
        return (0..model.n()).collect();
    }
    let mut by_distance: Vec<usize> = (0..model.n()).collect();
    by_distance.sort_by_key(|&i| (model.label(i).unsigned_abs(), i));
    let keep = model.n() - model.n() / 10;
    by_distance.truncate(keep.max(1));
    by_distance
}

/// Minimal nonnegative solution of `h_i = Σ_j (q_ij / q_i) h_j` for `i != k`
/// with `h_k = 1`, by symmetric Gauss–Seidel sweeps from zero until the
/// largest relative change falls below `tol`. On
/// non-convergence the last iterate, a lower bound, is returned with
/// `converged = false`.
pub fn hitting_prob(model: &GeneratorModel, k: usize, tol: f64, max_iter: usize) -> Result<HittingVector> {
    let n = model.n();
    if k >= n {
        return Err(Error::BadIndex { index: k + 1, reason: "target state is outside the model" });
    }
    let mut h = vec![0.0; n];
    h[k] = 1.0;
    let update = |h: &mut [f64], i: usize| -> f64 {
        if i == k {
            return 0.0;
        }
        let new = model.row(i).iter().map(|&(j, r)| r * h[j]).sum::<f64>() / model.total(i);
        let change = (new - h[i]).abs() / new.max(f64::MIN_POSITIVE);
        h[i] = new;
        change
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut change: f64 = 0.0;
        for i in 0..n {
            change = change.max(update(&mut h, i));
        }
        for i in (0..n).rev() {
            change = change.max(update(&mut h, i));
        }
        iterations += 1;
        if change < tol {
            converged = true;
            break;
        }
    }
    let inf_h = h.iter().copied().fold(f64::INFINITY, f64::min);
    let inf_h_interior = interior_states(model).into_iter().map(|i| h[i]).fold(f64::INFINITY, f64::min);
    let return_probability = model.row(k).iter().map(|&(j, r)| r * h[j]).sum::<f64>() / model.total(k);
    Ok(HittingVector { target: k, values: h, inf_h, inf_h_interior, return_probability, converged, iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedModel {
    pub model: GeneratorModel,
    pub target: usize,
    pub h: Vec<f64>,
    /// States other than the target left with killing above the snapping
    /// threshold, usually because `h` was not fully converged.
    pub boundary_kill: Vec<(usize, f64)>,
}

/// Relative threshold below which transformed killing rates are zero.
const SNAP: f64 = 1e-10;

pub fn h_transform(model: &GeneratorModel, k: usize, h: &HittingVector) -> Result<TransformedModel> {
    if h.values.len() != model.n() || h.target != k {
        return Err(Error::BadParameters("hitting vector does not match the model and target".into()));
    }
    if let Some((state, &value)) = h.values.iter().enumerate().find(|(_, &v)| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateH { state: state + 1, value });
    }
    let hv = &h.values;
    let mut rows = Vec::with_capacity(model.n());
    let mut kill = Vec::with_capacity(model.n());
    let mut boundary_kill = Vec::new();
    for i in 0..model.n() {
        let row: Vec<(usize, f64)> =
            model.row(i).iter().map(|&(j, r)| (j, if hv[j] == hv[i] { r } else { r * hv[j] / hv[i] })).collect();
        // q_i - Σ s_ij, arranged so that equal h leaves the killing rate
        // untouched.
        let moved: f64 = model.row(i).iter().zip(&row).map(|(a, b)| a.1 - b.1).sum();
        let q = model.total(i);
        let mut k_i = model.kill(i) + moved;
        if k_i.abs() <= SNAP * q {
            k_i = 0.0;
        }
        if i != k && k_i != 0.0 {
            boundary_kill.push((i, k_i));
        }
        kill.push(k_i.max(0.0));
        rows.push(row);
    }
    Ok(TransformedModel { model: model.with_rates(rows, kill)?, target: k, h: hv.clone(), boundary_kill })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QsdExistence {
    /// `inf h > 0`: the sufficient condition holds.
    Guaranteed,
    /// The sufficient condition fails on a finite model.
    NotGuaranteed,
    /// `h` decays toward the edge of a window; the infimum over the
    /// countable model cannot be decided.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    /// `q_k (1 - P_k[τ_k^+ < ∞]) / (inf h (q_k - λ))`; infinite when
    /// `inf h = 0`.
    pub bound_value: f64,
    pub q_k: f64,
    pub return_probability: f64,
    pub inf_h: f64,
    pub lambda: f64,
    /// `λ Σ x_i`, when an invariant measure is available.
    pub attained_estimate: Option<f64>,
    pub qsd_exists: QsdExistence,
}

/// Smallest interior `h` still treated as bounded away from zero.
const INF_H_FLOOR: f64 = 1e-6;

pub fn moment_bound(
    model: &GeneratorModel,
    k: usize,
    lambda: f64,
    h: &HittingVector,
    attained_estimate: Option<f64>,
) -> Result<MomentBound> {
    let q_k = model.total(k);
    if !(lambda < q_k) {
        return Err(Error::BoundaryShift { lambda, q_k });
    }
    let inf_h = if model.is_window() { h.inf_h_interior } else { h.inf_h };
    let qsd_exists = if inf_h >= INF_H_FLOOR {
        QsdExistence::Guaranteed
    } else if model.is_window() {
        QsdExistence::Undetermined
    } else {
        QsdExistence::NotGuaranteed
    };
    let numerator = q_k * (1.0 - h.return_probability);
    let bound_value = if inf_h > 0.0 { numerator / (inf_h * (q_k - lambda)) } else { f64::INFINITY };
    Ok(MomentBound { bound_value, q_k, return_probability: h.return_probability, inf_h, lambda, attained_estimate, qsd_exists })
}
