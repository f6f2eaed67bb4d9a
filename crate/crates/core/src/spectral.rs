//! Decay parameter, the λ-shifted embedded chain and λ-classification.
//!
//! Two independent routes compute `λ`:
//!
//! * [`DecayMethod::FiniteEigen`]: shifted inverse iteration on `-Q_E`, with
//!   Collatz–Wielandt bounds bracketing the Perron eigenvalue;
//! * [`DecayMethod::BisectionOnR`]: bisection for the largest `x` with
//!   `ρ(T(x)) >= 1`. `ρ(T(x)) < 1` holds exactly when `I - T(x)` is a
//!   nonsingular M-matrix, which is decided by the signs of the no-pivot LU
//!   pivots.
//!
//! Countable families are handled on windows of increasing size; the window
//! values `λ_N` decrease toward `λ` and are extrapolated with Aitken's Δ².

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{MMatrixLu, SparseRows};
use crate::model::{truncate, GeneratorModel, ModelFamily};
use crate::taboo::{taboo_direct, taboo_direct_into, taboo_series, taboo_series_into, SeriesOptions, TabooSet};

/// The kernel `T(x)_ij = q_ij / (q_i - x)` for `i != j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedChain {
    shift: f64,
    rows: SparseRows,
    denominators: Vec<f64>,
}

impl EmbeddedChain {
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &SparseRows {
        &self.rows
    }

    /// `q_i - x`.
    pub fn denominator(&self, i: usize) -> f64 {
        self.denominators[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }
}

pub fn embedded_chain(model: &GeneratorModel, x: f64) -> Result<EmbeddedChain> {
    let min_rate = model.min_total_rate();
    if !(x >= 0.0 && x < min_rate) {
        return Err(Error::ShiftAtOrAboveMinRate { shift: x, min_rate });
    }
    let denominators: Vec<f64> = model.total_rates().iter().map(|q| q - x).collect();
    let rows = (0..model.n())
        .map(|i| model.row(i).iter().map(|&(j, r)| (j, r / denominators[i])).collect())
        .collect();
    Ok(EmbeddedChain { shift: x, rows, denominators })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRadius {
    pub rho: f64,
    pub iterations: usize,
    /// Collatz–Wielandt bounds from the final iterate.
    pub lower: f64,
    pub upper: f64,
}

/// Perron root of `T` by power iteration on the aperiodic kernel `(I + T)/2`,
/// started from the uniform vector and stopped when the Rayleigh quotient
/// changes by less than `tol`.
pub fn spectral_radius(t: &EmbeddedChain, tol: f64, max_iter: usize) -> Result<SpectralRadius> {
    let n = t.n();
    if t.nnz() == 0 {
        return Ok(SpectralRadius { rho: 0.0, iterations: 0, lower: 0.0, upper: 0.0 });
    }
    let mut z = vec![1.0 / n as f64; n];
    let mut estimate = f64::INFINITY;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let next: Vec<f64> = (0..n)
            .map(|i| 0.5 * (z[i] + t.row(i).iter().map(|&(j, v)| v * z[j]).sum::<f64>()))
            .collect();
        let lazy = next.iter().sum::<f64>() / z.iter().sum::<f64>();
        let rho = 2.0 * lazy - 1.0;
        change = (rho - estimate).abs();
        estimate = rho;
        let (lo, hi) = ratio_bounds(&next, &z);
        let total: f64 = next.iter().sum();
        z = next.iter().map(|v| v / total).collect();
        if change < tol {
            return Ok(SpectralRadius {
                rho,
                iterations: it,
                lower: (2.0 * lo - 1.0).max(0.0),
                upper: 2.0 * hi - 1.0,
            });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, last_change: change })
}

/// `min_i num_i/den_i` and `max_i num_i/den_i` over entries of `den` that are
/// not negligible relative to its maximum.
fn ratio_bounds(num: &[f64], den: &[f64]) -> (f64, f64) {
    let scale = den.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = scale * 1e-200;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&a, &b) in num.iter().zip(den) {
        if b > floor {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMethod {
    FiniteEigen,
    BisectionOnR,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub method: DecayMethod,
    pub tol: f64,
    /// Window levels for countable families; empty means `[N/4, N/2, N]`.
    /// Ignored for finite models.
    pub truncation_schedule: Vec<usize>,
    pub max_iter: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { method: DecayMethod::BisectionOnR, tol: 1e-10, truncation_schedule: Vec::new(), max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub level: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub lambda: f64,
    /// The method that produced `lambda`.
    pub method: DecayMethod,
    pub bracket: f64,
    pub iterations: usize,
    /// Set when the requested method could not finish and another was used.
    pub fallback_from: Option<DecayMethod>,
    pub truncation_curve: Vec<TruncationPoint>,
    /// Aitken extrapolation of the truncation curve.
    pub extrapolated: Option<f64>,
}

impl DecayResult {
    /// Best available value for the untruncated model.
    pub fn limit(&self) -> f64 {
        self.extrapolated.unwrap_or(self.lambda)
    }
}

/// `λ` of the infinite family, where a closed form is known.
pub fn closed_form_lambda(family: &ModelFamily) -> f64 {
    match *family {
        ModelFamily::FeedbackChain { p, w, .. } => {
            2.0 * (1.0 - p) * w / (1.0 + w + ((1.0 - w).powi(2) + 4.0 * p * w).sqrt())
        }
        ModelFamily::BdLine { p, c } | ModelFamily::BdHalfline { p, c } => (1.0 - 2.0 * (p * (1.0 - p)).sqrt()) * c,
    }
}

/// The default window schedule `[N/4, N/2, N]`, dropping levels below 2.
pub fn default_schedule(level: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [level / 4, level / 2, level].into_iter().filter(|&l| l >= 2).collect();
    s.dedup();
    s
}

/// Aitken Δ² on the last three terms; the last term when the differences are
/// not geometric and shrinking.
pub fn aitken(seq: &[f64]) -> Option<f64> {
    if seq.len() < 3 {
        return seq.last().copied();
    }
    let (a, b, c) = (seq[seq.len() - 3], seq[seq.len() - 2], seq[seq.len() - 1]);
    let (d1, d2) = (b - a, c - b);
    if d2.abs() <= 1e-15 * c.abs().max(1e-300) || d1 == 0.0 {
        return Some(c);
    }
    let r = d2 / d1;
    if !(r > 0.0 && r < 1.0) {
        return Some(c);
    }
    Some(c + d2 * r / (1.0 - r))
}

fn window_levels(model: &GeneratorModel, schedule: &[usize]) -> Vec<usize> {
    let top = model.level();
    let mut levels: Vec<usize> = if schedule.is_empty() { default_schedule(top) } else { schedule.to_vec() };
    levels.retain(|&l| l >= 2 && l <= top);
    levels.push(top);
    levels.sort_unstable();
    levels.dedup();
    levels
}

fn windows(model: &GeneratorModel, schedule: &[usize]) -> Result<Vec<GeneratorModel>> {
    window_levels(model, schedule)
        .into_iter()
        .map(|l| if l == model.level() { Ok(model.clone()) } else { truncate(model, l) })
        .collect()
}

pub fn decay_parameter(model: &GeneratorModel, opts: &DecayOptions) -> Result<DecayResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::BadParameters(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.method == DecayMethod::ClosedForm {
        let family = model
            .truncation()
            .and_then(|m| m.family)
            .ok_or(Error::ClosedFormUnavailable("closed forms exist only for the builtin families"))?;
        return Ok(DecayResult {
            lambda: closed_form_lambda(&family),
            method: DecayMethod::ClosedForm,
            bracket: 0.0,
            iterations: 0,
            fallback_from: None,
            truncation_curve: Vec::new(),
            extrapolated: None,
        });
    }
    if !model.is_window() {
        return decay_single(model, opts);
    }
    let wins = windows(model, &opts.truncation_schedule)?;
    let results: Vec<Result<DecayResult>> = wins.par_iter().map(|w| decay_single(w, opts)).collect();
    let results: Vec<DecayResult> = results.into_iter().collect::<Result<_>>()?;
    let curve: Vec<TruncationPoint> =
        wins.iter().zip(&results).map(|(w, r)| TruncationPoint { level: w.level(), lambda: r.lambda }).collect();
    let lambdas: Vec<f64> = curve.iter().map(|p| p.lambda).collect();
    let mut top = results.into_iter().last().expect("at least one window");
    top.extrapolated = aitken(&lambdas);
    top.truncation_curve = curve;
    Ok(top)
}

fn decay_single(model: &GeneratorModel, opts: &DecayOptions) -> Result<DecayResult> {
    let base = DecayResult {
        lambda: 0.0,
        method: opts.method,
        bracket: 0.0,
        iterations: 0,
        fallback_from: None,
        truncation_curve: Vec::new(),
        extrapolated: None,
    };
    match opts.method {
        DecayMethod::FiniteEigen => {
            let (lambda, bracket, iterations) = finite_eigen(model, opts.tol, opts.max_iter)?;
            Ok(DecayResult { lambda, bracket, iterations, ..base })
        }
        DecayMethod::BisectionOnR => match bisection_on_r(model, opts.tol) {
            Ok((lambda, bracket, iterations)) => Ok(DecayResult { lambda, bracket, iterations, ..base }),
            Err(Error::BoundaryDecay { .. }) => {
                let (lambda, bracket, iterations) = finite_eigen(model, opts.tol, opts.max_iter)?;
                Ok(DecayResult {
                    lambda,
                    bracket,
                    iterations,
                    method: DecayMethod::FiniteEigen,
                    fallback_from: Some(DecayMethod::BisectionOnR),
                    ..base
                })
            }
            Err(e) => Err(e),
        },
        DecayMethod::ClosedForm => unreachable!("handled by decay_parameter"),
    }
}

/// `-Q_E - s I` as diagonal plus off-diagonal parts.
fn shifted_generator(model: &GeneratorModel, s: f64) -> (Vec<f64>, SparseRows) {
    let diag = model.total_rates().iter().map(|q| q - s).collect();
    let off = (0..model.n()).map(|i| model.row(i).iter().map(|&(j, r)| (j, -r)).collect()).collect();
    (diag, off)
}

/// True when `I - T(x)` is a nonsingular M-matrix, i.e. `ρ(T(x)) < 1`.
pub fn below_unit_radius(model: &GeneratorModel, x: f64) -> bool {
    let t = match embedded_chain(model, x) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let diag = vec![1.0; t.n()];
    let off: SparseRows = t.rows().iter().map(|row| row.iter().map(|&(j, v)| (j, -v)).collect()).collect();
    MMatrixLu::factor(&diag, &off).is_ok()
}

/// Bisection for the largest `x` in `[0, (1-1e-9) min q_i]` with
/// `ρ(T(x)) >= 1`. Returns `(λ, bracket, iterations)`, `λ` the lower end.
pub fn bisection_on_r(model: &GeneratorModel, tol: f64) -> Result<(f64, f64, usize)> {
    let min_rate = model.min_total_rate();
    let top = (1.0 - 1e-9) * min_rate;
    if below_unit_radius(model, top) {
        return Err(Error::BoundaryDecay { min_rate });
    }
    if !below_unit_radius(model, 0.0) {
        return Ok((0.0, 0.0, 0));
    }
    let (mut lo, mut hi) = (0.0, top);
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below_unit_radius(model, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((lo, hi - lo, iterations))
}

/// Shifted inverse iteration on `-Q_E` with Collatz–Wielandt bracketing.
/// The shift follows the eigenvalue estimate from below; a failed
/// factorization proves the shift is at or above `λ`. Returns
/// `(λ, bracket, iterations)`.
pub fn finite_eigen(model: &GeneratorModel, tol: f64, max_iter: usize) -> Result<(f64, f64, usize)> {
    let n = model.n();
    let mut z = vec![1.0; n];
    // For z = 1 the Collatz–Wielandt ratios of -Q z are the killing rates.
    let (mut lo, mut hi) = ratio_bounds(model.kill_rates(), &z);
    lo = lo.max(0.0);
    hi = hi.min(model.min_total_rate());
    let mut s = lo;
    let mut last_change = hi - lo;
    for it in 0..max_iter {
        if hi - lo <= tol {
            return Ok((0.5 * (lo + hi), hi - lo, it));
        }
        let (diag, off) = shifted_generator(model, s);
        let lu = match MMatrixLu::factor(&diag, &off) {
            Ok(lu) => lu,
            Err(Error::NotMMatrix { .. }) => {
                hi = hi.min(s);
                s = lo + 0.5 * (s - lo);
                if s <= lo {
                    s = lo;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let next = lu.solve(&z);
        let (rlo, rhi) = ratio_bounds(&z, &next);
        lo = lo.max(s + rlo);
        hi = hi.min(s + rhi);
        let theta = s + z.iter().sum::<f64>() / next.iter().sum::<f64>();
        let scale = next.iter().fold(0.0f64, |a, &b| a.max(b));
        z = next.iter().map(|v| v / scale).collect();
        let proposal = (s + 0.9 * (theta - s)).clamp(lo, hi);
        last_change = (proposal - s).abs();
        s = proposal;
    }
    Err(Error::NoConvergence { iterations: max_iter, last_change })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recurrence {
    #[serde(rename = "lambda-transient")]
    LambdaTransient,
    #[serde(rename = "lambda-null-recurrent")]
    LambdaNullRecurrent,
    #[serde(rename = "lambda-positive-recurrent")]
    LambdaPositiveRecurrent,
}

impl Recurrence {
    pub fn as_str(self) -> &'static str {
        match self {
            Recurrence::LambdaTransient => "lambda-transient",
            Recurrence::LambdaNullRecurrent => "lambda-null-recurrent",
            Recurrence::LambdaPositiveRecurrent => "lambda-positive-recurrent",
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != Recurrence::LambdaTransient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    pub level: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationVerdict {
    pub recurrence: Recurrence,
    /// `F_kk(λ)`, extrapolated over windows for countable families.
    pub f_kk_at_lambda: f64,
    pub anchor: usize,
    pub anchor_label: i64,
    pub lambda: f64,
    pub f_kk_by_level: Vec<LevelValue>,
    /// Partial sums `Σ x_i y_i` over the windows.
    pub xy_partial_sums: Vec<LevelValue>,
    /// Partial sums `Σ x_i` over the windows.
    pub x_partial_sums: Vec<LevelValue>,
    /// Whether `Σ x_i` stabilizes; always true on finite models.
    pub x_summable: bool,
    pub series_terms: usize,
    /// Windows whose series hit the term budget and were resolved by a
    /// direct solve for their limit.
    pub direct_levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Recurrence threshold on `|F_kk(λ) - 1|`.
    pub tol: f64,
    /// Relative increment of the last window below which a partial-sum
    /// sequence counts as stabilized.
    pub tail_threshold: f64,
    pub series_tol: f64,
    /// Term budget per series before the direct solve takes over; `None`
    /// picks the sparse or dense default.
    pub nmax: Option<usize>,
    pub truncation_schedule: Vec<usize>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { tol: 1e-3, tail_threshold: 1e-3, series_tol: 1e-12, nmax: Some(100_000), truncation_schedule: Vec::new() }
    }
}

struct WindowSums {
    level: usize,
    f: f64,
    sum_x: f64,
    sum_xy: f64,
    terms: usize,
    direct: bool,
}

fn window_sums(model: &GeneratorModel, lambda: f64, k_label: i64, opts: &ClassifyOptions, need_y: bool) -> Result<WindowSums> {
    let k = model
        .position_of_label(k_label)
        .ok_or(Error::BadIndex { index: 0, reason: "anchor lies outside a window of the schedule" })?;
    let t = embedded_chain(model, lambda)?;
    let mut series = SeriesOptions::for_chain(&t);
    series.tol = opts.series_tol;
    if let Some(nmax) = opts.nmax {
        series.nmax = nmax;
    }
    let h = TabooSet::singleton(model.n(), k);
    let row = taboo_series(&t, &h, k, series);
    let mut terms = row.n_used;
    let mut direct = false;
    // An unconverged series is resolved by its limit, the minimal solution,
    // when the restricted kernel certifies convergence.
    let partial = if row.converged {
        row.partial
    } else {
        direct = true;
        taboo_direct(&t, &h, k).map_err(|_| Error::SeriesNotResolved { value: row.partial[k], terms: row.n_used })?
    };
    let x: Vec<f64> = partial.iter().enumerate().map(|(i, s)| s / t.denominator(i)).collect();
    let sum_x = x.iter().sum();
    let sum_xy = if need_y {
        let col = taboo_series_into(&t, &h, &[1.0], series);
        terms = terms.max(col.n_used);
        let y = if col.converged {
            col.partial
        } else {
            direct = true;
            taboo_direct_into(&t, &h, &[1.0])
                .map_err(|_| Error::SeriesNotResolved { value: col.partial[k], terms: col.n_used })?
        };
        x.iter().zip(&y).enumerate().map(|(i, (a, b))| a * if i == k { 1.0 } else { *b }).sum()
    } else {
        0.0
    };
    Ok(WindowSums { level: model.level(), f: partial[k], sum_x, sum_xy, terms, direct })
}

fn stabilized(seq: &[f64], threshold: f64) -> bool {
    match seq {
        [.., a, b] => ((b - a) / b).abs() < threshold,
        _ => true,
    }
}

/// λ-recurrence classification at `lambda`, anchored at position `k`.
pub fn classify(model: &GeneratorModel, lambda: f64, k: usize, opts: &ClassifyOptions) -> Result<ClassificationVerdict> {
    if k >= model.n() {
        return Err(Error::BadIndex { index: k + 1, reason: "anchor state is outside the model" });
    }
    let k_label = model.label(k);
    let wins = if model.is_window() { windows(model, &opts.truncation_schedule)? } else { vec![model.clone()] };
    let sums: Vec<Result<WindowSums>> =
        wins.par_iter().map(|w| window_sums(w, lambda, k_label, opts, model.is_window())).collect();
    let sums: Vec<WindowSums> = sums.into_iter().collect::<Result<_>>()?;
    let fs: Vec<f64> = sums.iter().map(|s| s.f).collect();
    let f = if model.is_window() { aitken(&fs).unwrap_or(0.0) } else { fs[0] };
    let series_terms = sums.iter().map(|s| s.terms).max().unwrap_or(0);

    let recurrence = if f < 1.0 - opts.tol {
        Recurrence::LambdaTransient
    } else if (f - 1.0).abs() <= opts.tol {
        if !model.is_window() {
            Recurrence::LambdaPositiveRecurrent
        } else {
            let xy: Vec<f64> = sums.iter().map(|s| s.sum_xy).collect();
            if stabilized(&xy, opts.tail_threshold) {
                Recurrence::LambdaPositiveRecurrent
            } else {
                Recurrence::LambdaNullRecurrent
            }
        }
    } else {
        return Err(Error::SeriesNotResolved { value: f, terms: series_terms });
    };

    let xs: Vec<f64> = sums.iter().map(|s| s.sum_x).collect();
    Ok(ClassificationVerdict {
        recurrence,
        f_kk_at_lambda: f,
        anchor: k,
        anchor_label: k_label,
        lambda,
        f_kk_by_level: sums.iter().map(|s| LevelValue { level: s.level, value: s.f }).collect(),
        xy_partial_sums: if model.is_window() {
            sums.iter().map(|s| LevelValue { level: s.level, value: s.sum_xy }).collect()
        } else {
            Vec::new()
        },
        x_partial_sums: sums.iter().map(|s| LevelValue { level: s.level, value: s.sum_x }).collect(),
        x_summable: !model.is_window() || stabilized(&xs, opts.tail_threshold),
        series_terms,
        direct_levels: sums.iter().filter(|s| s.direct).map(|s| s.level).collect(),
    })
}
