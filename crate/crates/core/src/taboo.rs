//! Taboo powers `{}_H T^{(n)}` of the embedded kernel, their sums, and the
//! exit kernel `T^H` on a finite taboo set.
//!
//! `{}_H T^{(1)}_{ij} = T_ij` and `{}_H T^{(n)}_{ij} = Σ_{l∉H} {}_H T^{(n-1)}_{il} T_lj`;
//! intermediate states avoid `H`, endpoints are free. By convention
//! `{}_H T^{(0)}_{ij} = δ_ij` for `i ∉ H` and `0` for `i ∈ H`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity_minus_restricted, MMatrixLu};
use crate::model::ExitSet;
use crate::spectral::EmbeddedChain;

/// Membership mask of a taboo set.
#[derive(Debug, Clone, PartialEq)]
pub struct TabooSet {
    mask: Vec<bool>,
    members: Vec<usize>,
}

impl TabooSet {
    pub fn new(n: usize, members: &[usize]) -> Self {
        let mut mask = vec![false; n];
        for &m in members {
            mask[m] = true;
        }
        let members = (0..n).filter(|&i| mask[i]).collect();
        TabooSet { mask, members }
    }

    pub fn singleton(n: usize, k: usize) -> Self {
        TabooSet::new(n, &[k])
    }

    pub fn from_exit(n: usize, exit: &ExitSet) -> Self {
        TabooSet::new(n, &exit.members)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Stop once the newest term has sup-norm below this.
    pub tol: f64,
    pub nmax: usize,
}

impl SeriesOptions {
    /// Defaults: `tol = 1e-12`; `nmax = 10^6` for sparse kernels (at most
    /// four entries per row on average), `10^4` otherwise.
    pub fn for_chain(t: &EmbeddedChain) -> Self {
        let avg = t.nnz() as f64 / t.n() as f64;
        SeriesOptions { tol: 1e-12, nmax: if avg <= 4.0 { 1_000_000 } else { 10_000 } }
    }
}

/// Partial sums `Σ_{n=1}^{n_used}` of taboo powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabooSeries {
    /// Origin `j` for row series; `None` for series summed into `H`.
    pub origin: Option<usize>,
    pub taboo: Vec<usize>,
    pub partial: Vec<f64>,
    pub n_used: usize,
    pub converged: bool,
    /// Geometric estimate of the remaining total mass, from the ratio of the
    /// last two term masses; infinite when the terms are not shrinking.
    pub tail_estimate: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn tail_from(mass: f64, prev_mass: f64) -> f64 {
    if prev_mass <= 0.0 || mass <= 0.0 {
        return 0.0;
    }
    let ratio = mass / prev_mass;
    if ratio < 1.0 {
        mass * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

/// One step of the row recursion: `next_i = Σ_{l∉H} cur_l T_li`.
fn step_row(t: &EmbeddedChain, h: &TabooSet, cur: &[f64], next: &mut [f64]) {
    next.iter_mut().for_each(|x| *x = 0.0);
    for (l, &c) in cur.iter().enumerate() {
        if c == 0.0 || h.contains(l) {
            continue;
        }
        for &(i, tv) in t.row(l) {
            next[i] += c * tv;
        }
    }
}

/// The row `({}_H T^{(n)}_{ji})_{i∈E}`.
pub fn taboo_power(t: &EmbeddedChain, h: &TabooSet, j: usize, n: usize) -> Vec<f64> {
    let size = t.n();
    let mut cur = vec![0.0; size];
    if n == 0 {
        if !h.contains(j) {
            cur[j] = 1.0;
        }
        return cur;
    }
    for &(i, tv) in t.row(j) {
        cur[i] = tv;
    }
    let mut next = vec![0.0; size];
    for _ in 1..n {
        step_row(t, h, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Row sums `Σ_{n≥1} {}_H T^{(n)}_{j·}` by iterated sparse products.
pub fn taboo_series(t: &EmbeddedChain, h: &TabooSet, j: usize, opts: SeriesOptions) -> TabooSeries {
    let size = t.n();
    let mut cur = vec![0.0; size];
    for &(i, tv) in t.row(j) {
        cur[i] = tv;
    }
    let mut sum = cur.clone();
    let mut next = vec![0.0; size];
    let mut n_used = 1;
    let mut mass: f64 = cur.iter().sum();
    let mut prev_mass = f64::INFINITY;
    let mut converged = sup(&cur) < opts.tol;
    while !converged && n_used < opts.nmax {
        step_row(t, h, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        n_used += 1;
        for (s, c) in sum.iter_mut().zip(&cur) {
            *s += c;
        }
        prev_mass = mass;
        mass = cur.iter().sum();
        converged = sup(&cur) < opts.tol;
    }
    TabooSeries {
        origin: Some(j),
        taboo: h.members().to_vec(),
        partial: sum,
        n_used,
        converged,
        tail_estimate: if converged && mass == 0.0 { 0.0 } else { tail_from(mass, prev_mass) },
    }
}

/// Column sums `Σ_{j∈H} Σ_{n≥1} {}_H T^{(n)}_{ij} v_j` for every `i`, with
/// `v` indexed like `h.members()`.
pub fn taboo_series_into(t: &EmbeddedChain, h: &TabooSet, v: &[f64], opts: SeriesOptions) -> TabooSeries {
    let size = t.n();
    let mut weight = vec![0.0; size];
    for (&m, &vm) in h.members().iter().zip(v) {
        weight[m] = vm;
    }
    let mut cur: Vec<f64> = (0..size).map(|i| t.row(i).iter().map(|&(j, tv)| tv * weight[j]).sum()).collect();
    let mut sum = cur.clone();
    let mut n_used = 1;
    let mut mass: f64 = cur.iter().sum();
    let mut prev_mass = f64::INFINITY;
    let mut converged = sup(&cur) < opts.tol;
    while !converged && n_used < opts.nmax {
        let next: Vec<f64> = (0..size)
            .map(|i| t.row(i).iter().filter(|&&(l, _)| !h.contains(l)).map(|&(l, tv)| tv * cur[l]).sum())
            .collect();
        cur = next;
        n_used += 1;
        for (s, c) in sum.iter_mut().zip(&cur) {
            *s += c;
        }
        prev_mass = mass;
        mass = cur.iter().sum();
        converged = sup(&cur) < opts.tol;
    }
    TabooSeries {
        origin: None,
        taboo: h.members().to_vec(),
        partial: sum,
        n_used,
        converged,
        tail_estimate: if converged && mass == 0.0 { 0.0 } else { tail_from(mass, prev_mass) },
    }
}

fn restricted_lu(t: &EmbeddedChain, h: &TabooSet) -> Result<(MMatrixLu, Vec<usize>)> {
    let keep: Vec<bool> = (0..t.n()).map(|i| !h.contains(i)).collect();
    let (diag, off, positions) = identity_minus_restricted(t.rows(), &keep);
    if positions.is_empty() {
        return Ok((MMatrixLu::factor(&[], &Vec::new())?, positions));
    }
    Ok((MMatrixLu::factor(&diag, &off)?, positions))
}

/// Limit of [`taboo_series`] by a direct solve of the minimal nonnegative
/// solution `s = T_{j·} + s_{∉H} T`. Fails when the restricted kernel has
/// spectral radius `>= 1`, where the series diverges.
pub fn taboo_direct(t: &EmbeddedChain, h: &TabooSet, j: usize) -> Result<Vec<f64>> {
    let (lu, positions) = restricted_lu(t, h)?;
    let rhs: Vec<f64> = {
        let mut dense = vec![0.0; t.n()];
        for &(i, tv) in t.row(j) {
            dense[i] = tv;
        }
        positions.iter().map(|&p| dense[p]).collect()
    };
    let z = lu.solve_transpose(&rhs);
    let mut out = vec![0.0; t.n()];
    for &(i, tv) in t.row(j) {
        out[i] = tv;
    }
    for (&p, &zp) in positions.iter().zip(&z) {
        for &(i, tv) in t.row(p) {
            if h.contains(i) {
                out[i] += zp * tv;
            }
        }
        out[p] = zp;
    }
    Ok(out)
}

/// Direct counterpart of [`taboo_series_into`].
pub fn taboo_direct_into(t: &EmbeddedChain, h: &TabooSet, v: &[f64]) -> Result<Vec<f64>> {
    let (lu, positions) = restricted_lu(t, h)?;
    let mut weight = vec![0.0; t.n()];
    for (&m, &vm) in h.members().iter().zip(v) {
        weight[m] = vm;
    }
    let into_h = |i: usize| -> f64 { t.row(i).iter().map(|&(j, tv)| tv * weight[j]).sum() };
    let rhs: Vec<f64> = positions.iter().map(|&p| into_h(p)).collect();
    let z = lu.solve(&rhs);
    let mut out = vec![0.0; t.n()];
    for (&p, &zp) in positions.iter().zip(&z) {
        out[p] = zp;
    }
    for &m in h.members() {
        out[m] = into_h(m) + t.row(m).iter().filter(|&&(l, _)| !h.contains(l)).map(|&(l, tv)| tv * out[l]).sum::<f64>();
    }
    Ok(out)
}

/// `F_jj` at the chain's shift: the `H = {j}` series evaluated at `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnTransform {
    pub value: f64,
    pub n_used: usize,
    pub converged: bool,
    pub tail_estimate: f64,
}

pub fn return_transform(t: &EmbeddedChain, j: usize, opts: SeriesOptions) -> ReturnTransform {
    let s = taboo_series(t, &TabooSet::singleton(t.n(), j), j, opts);
    ReturnTransform { value: s.partial[j], n_used: s.n_used, converged: s.converged, tail_estimate: s.tail_estimate }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitKernelOptions {
    pub series: SeriesOptions,
    /// Allowed distance of the Perron root of `T^H` from 1.
    pub mass_tol: f64,
    pub perron_tol: f64,
    pub perron_max_iter: usize,
}

impl ExitKernelOptions {
    pub fn for_chain(t: &EmbeddedChain) -> Self {
        ExitKernelOptions { series: SeriesOptions::for_chain(t), mass_tol: 1e-6, perron_tol: 1e-14, perron_max_iter: 1_000_000 }
    }
}

/// The exit kernel `T^H` with its left and right Perron vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStationary {
    pub members: Vec<usize>,
    pub kernel: Vec<Vec<f64>>,
    /// Left vector, `Σ μ = 1`.
    pub mu: Vec<f64>,
    /// Right vector, `v[0] = 1` at the smallest member.
    pub v: Vec<f64>,
    pub perron_root: f64,
    /// `|perron_root - 1|`.
    pub perron_gap: f64,
    pub series_converged: bool,
    pub max_terms: usize,
    /// Per-origin row sums over all of `E`, indexed like `members`.
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl ExitStationary {
    /// `Σ_{i,j∈H} μ_i T^H_ij`.
    pub fn weighted_mass(&self) -> f64 {
        self.mu.iter().zip(&self.kernel).map(|(m, row)| m * row.iter().sum::<f64>()).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.kernel.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Left Perron vector of a small nonnegative matrix by power iteration on
/// `(I + K)/2`, which is aperiodic. Returns `(μ, root)` with `Σ μ = 1`.
pub fn perron_left(kernel: &[Vec<f64>], start: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let m = kernel.len();
    let mut mu: Vec<f64> = start.to_vec();
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= total);
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = mu.clone();
        for a in 0..m {
            for b in 0..m {
                next[b] += mu[a] * kernel[a][b];
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        change = next.iter().zip(&mu).fold(0.0, |acc, (p, q)| acc.max((p - q).abs()));
        mu = next;
        if change < tol {
            let root = (0..m).map(|b| (0..m).map(|a| mu[a] * kernel[a][b]).sum::<f64>()).sum();
            return Ok((mu, root));
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last_change: change })
}

/// Right Perron vector, normalized to `v[0] = 1`.
pub fn perron_right(kernel: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let m = kernel.len();
    let transposed: Vec<Vec<f64>> = (0..m).map(|b| (0..m).map(|a| kernel[a][b]).collect()).collect();
    let (v, _) = perron_left(&transposed, &vec![1.0; m], tol, max_iter)?;
    let first = v[0];
    if !(first > 0.0) {
        return Err(Error::NonPositiveEigenvector("right exit vector vanishes at the first member".into()));
    }
    Ok(v.iter().map(|x| x / first).collect())
}

/// Assembles `T^H` from per-origin taboo series and computes `μ T^H = μ`
/// and `T^H v = v`.
pub fn exit_kernel(t: &EmbeddedChain, members: &[usize], opts: ExitKernelOptions) -> Result<ExitStationary> {
    if members.is_empty() {
        return Err(Error::EmptyExitSet);
    }
    let h = TabooSet::new(t.n(), members);
    let series: Vec<TabooSeries> = h.members().par_iter().map(|&j| taboo_series(t, &h, j, opts.series)).collect();
    let kernel: Vec<Vec<f64>> = series.iter().map(|s| h.members().iter().map(|&b| s.partial[b]).collect()).collect();
    let m = kernel.len();
    let (mu, root) = perron_left(&kernel, &vec![1.0; m], opts.perron_tol, opts.perron_max_iter)?;
    let gap = (root - 1.0).abs();
    if !(gap <= opts.mass_tol) {
        return Err(Error::KernelNotStochasticEnough {
            perron_root: root,
            row_sums: kernel.iter().map(|r| r.iter().sum()).collect(),
        });
    }
    let v = perron_right(&kernel, opts.perron_tol, opts.perron_max_iter)?;
    Ok(ExitStationary {
        members: h.members().to_vec(),
        kernel,
        mu,
        v,
        perron_root: root,
        perron_gap: gap,
        series_converged: series.iter().all(|s| s.converged),
        max_terms: series.iter().map(|s| s.n_used).max().unwrap_or(0),
        rows: series.into_iter().map(|s| s.partial).collect(),
    })
}
