//! Exact path simulation of the killed jump process and the estimators used
//! to validate analytic results.
//!
//! Path `i` draws from its own ChaCha8 stream `(seed, i)`, so every
//! estimator is a pure function of the model, the seed and the path count,
//! whatever the number of worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GeneratorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub workers: usize,
    /// Observation times for survival curves; empty means 40 evenly spaced
    /// points in `(0, horizon]`.
    pub time_grid: Vec<f64>,
}

impl SimConfig {
    pub fn new(paths: usize, horizon: f64, seed: u64) -> Self {
        SimConfig { paths, horizon, seed, workers: 1, time_grid: Vec::new() }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::BadParameters("paths must be at least 1".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::BadParameters(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.workers == 0 {
            return Err(Error::BadParameters("workers must be at least 1".into()));
        }
        if self.time_grid.iter().any(|&t| !(t > 0.0 && t <= self.horizon)) {
            return Err(Error::BadParameters("time grid points must lie in (0, horizon]".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.time_grid.is_empty() {
            (1..=40).map(|i| self.horizon * i as f64 / 40.0).collect()
        } else {
            self.time_grid.clone()
        }
    }
}

/// The random stream of path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub initial: usize,
    /// Times of jumps between states of `E`.
    pub jump_times: Vec<f64>,
    /// `states[0]` is the initial state, `states[m]` the state after jump `m`.
    pub states: Vec<usize>,
    /// `τ_0`, or the horizon when censored.
    pub absorption_time: f64,
    pub censored: bool,
}

impl PathSample {
    /// State occupied at time `t`, `None` once absorbed.
    pub fn state_at(&self, t: f64) -> Option<usize> {
        if !self.censored && t >= self.absorption_time {
            return None;
        }
        let m = self.jump_times.partition_point(|&s| s <= t);
        Some(self.states[m])
    }

    /// `ξ_1`: the first jump time, into `E` or the cemetery.
    pub fn first_holding_time(&self) -> Option<f64> {
        match self.jump_times.first() {
            Some(&t) => Some(t),
            None if !self.censored => Some(self.absorption_time),
            None => None,
        }
    }

    /// `τ_k^+`: first time after `ξ_1` at which the path sits in `k`.
    pub fn return_time(&self, k: usize) -> Option<f64> {
        self.states.iter().skip(1).position(|&s| s == k).map(|m| self.jump_times[m])
    }
}

fn holding(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Next state from row `i`, `None` for the cemetery.
fn jump(model: &GeneratorModel, i: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    let mut target = rng.random::<f64>() * model.total(i);
    for &(j, r) in model.row(i) {
        if target < r {
            return Some(j);
        }
        target -= r;
    }
    if model.kill(i) > 0.0 {
        None
    } else {
        model.row(i).last().map(|e| e.0)
    }
}

/// Runs one path until absorption or `horizon`; records the trajectory when
/// `record` is set. Returns the sample and the state at the horizon.
fn run(model: &GeneratorModel, i0: usize, rng: &mut ChaCha8Rng, horizon: f64, record: bool) -> PathSample {
    let mut t = 0.0;
    let mut state = i0;
    let mut sample = PathSample { initial: i0, jump_times: Vec::new(), states: vec![i0], absorption_time: horizon, censored: true };
    loop {
        t += holding(rng, model.total(state));
        if t >= horizon {
            break;
        }
        match jump(model, state, rng) {
            Some(next) => {
                state = next;
                if record {
                    sample.jump_times.push(t);
                    sample.states.push(next);
                } else {
                    sample.states[0] = next;
                }
            }
            None => {
                sample.absorption_time = t;
                sample.censored = false;
                break;
            }
        }
    }
    if !record {
        sample.states[0] = state;
    }
    sample
}

/// Exact simulation by a single exponential holding time and a categorical
/// jump (killing included).
pub fn sample_path(model: &GeneratorModel, i0: usize, rng: &mut ChaCha8Rng, horizon: f64) -> PathSample {
    run(model, i0, rng, horizon, true)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::Io(e.to_string()))
}

fn check_state(model: &GeneratorModel, i0: usize) -> Result<()> {
    if i0 >= model.n() {
        return Err(Error::BadIndex { index: i0 + 1, reason: "initial state is outside the model" });
    }
    Ok(())
}

/// Full trajectories for paths `0..cfg.paths` started at `i0`.
pub fn simulate_paths(model: &GeneratorModel, i0: usize, cfg: &SimConfig) -> Result<Vec<PathSample>> {
    cfg.validate()?;
    check_state(model, i0)?;
    let pool = pool(cfg.workers)?;
    Ok(pool.install(|| {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| sample_path(model, i0, &mut path_rng(cfg.seed, p as u64), cfg.horizon))
            .collect()
    }))
}

/// `(absorption time, censored, state at horizon)` per path; the start of
/// path `p` is chosen by `start(p, rng)`.
fn endpoints<F>(model: &GeneratorModel, cfg: &SimConfig, horizon: f64, start: F) -> Result<Vec<(f64, bool, usize)>>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync,
{
    let pool = pool(cfg.workers)?;
    Ok(pool.install(|| {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = path_rng(cfg.seed, p as u64);
                let i0 = start(&mut rng);
                let s = run(model, i0, &mut rng, horizon, false);
                (s.absorption_time, s.censored, s.states[0])
            })
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalFit {
    /// `log S(t) = a - λ t`.
    Exponential,
    /// `log S(t) = a - λ t - β log t`, for survival with a polynomial
    /// prefactor such as λ-transient chains.
    ExponentialPowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub time: f64,
    pub survivors: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Estimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub fit: SurvivalFit,
    /// Power-law exponent `β` for [`SurvivalFit::ExponentialPowerLaw`].
    pub power: Option<f64>,
    pub batches: usize,
    pub fit_points: usize,
    pub censored_fraction: f64,
    pub survival: Vec<SurvivalPoint>,
}

/// Least squares of `y` on the given regressor columns (an intercept is
/// added). Returns the coefficients, intercept first.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = columns.len() + 1;
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(columns.iter().map(|c| c[i])).collect() };
    let mut a = vec![vec![0.0; m + 1]; m];
    for (i, &yi) in y.iter().enumerate() {
        let r = row(i);
        for p in 0..m {
            for q in 0..m {
                a[p][q] += r[p] * r[q];
            }
            a[p][m] += r[p] * yi;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &z| a[x][col].abs().total_cmp(&a[z][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (x, p) in row[col..=m].iter_mut().zip(&pivot[col..=m]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

fn fit_decay(times: &[f64], survival: &[f64], fit: SurvivalFit) -> Option<(f64, Option<f64>)> {
    let y: Vec<f64> = survival.iter().map(|s| s.ln()).collect();
    match fit {
        SurvivalFit::Exponential => least_squares(&[times.to_vec()], &y).map(|c| (-c[1], None)),
        SurvivalFit::ExponentialPowerLaw => {
            let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
            least_squares(&[times.to_vec(), logs], &y).map(|c| (-c[1], Some(-c[2])))
        }
    }
}

const BATCHES: usize = 20;
const MIN_SURVIVORS: usize = 10;

/// Slope of `log P_i0[τ_0 > t]` over the latter half of the time grid, with
/// a batch-means standard error.
pub fn estimate_lambda0(model: &GeneratorModel, i0: usize, cfg: &SimConfig, fit: SurvivalFit) -> Result<Lambda0Estimate> {
    cfg.validate()?;
    check_state(model, i0)?;
    if model.exit_set().is_empty() {
        return Err(Error::EmptyExitSet);
    }
    let grid = cfg.grid();
    let ends = endpoints(model, cfg, cfg.horizon, |_| i0)?;
    // Censored paths are alive at every grid time.
    let times: Vec<f64> = ends.iter().map(|e| if e.1 { f64::INFINITY } else { e.0 }).collect();
    let count = |slice: &[f64], t: f64| slice.iter().filter(|&&a| a > t).count();
    let survival: Vec<SurvivalPoint> = grid
        .iter()
        .map(|&t| {
            let s = count(&times, t);
            SurvivalPoint { time: t, survivors: s, fraction: s as f64 / cfg.paths as f64 }
        })
        .collect();
    let tail = &survival[grid.len() / 2..];
    let needed = if fit == SurvivalFit::Exponential { 2 } else { 3 };
    if tail.len() < needed {
        return Err(Error::BadParameters(format!("time grid needs at least {} points in its latter half", needed)));
    }
    let last = tail.last().expect("nonempty tail");
    if last.survivors < MIN_SURVIVORS {
        return Err(Error::TooFewSurvivors { time: last.time, survivors: last.survivors });
    }
    let tail_times: Vec<f64> = tail.iter().map(|p| p.time).collect();
    let fractions: Vec<f64> = tail.iter().map(|p| p.fraction).collect();
    let (estimate, power) =
        fit_decay(&tail_times, &fractions, fit).ok_or(Error::BadParameters("degenerate survival fit".into()))?;

    let batches = BATCHES.min(cfg.paths);
    let mut batch_estimates = Vec::with_capacity(batches);
    for b in 0..batches {
        let lo = b * cfg.paths / batches;
        let hi = (b + 1) * cfg.paths / batches;
        let slice = &times[lo..hi];
        let mut fr = Vec::with_capacity(tail_times.len());
        for &t in &tail_times {
            let s = count(slice, t);
            if s == 0 {
                return Err(Error::TooFewSurvivors { time: t, survivors: 0 });
            }
            fr.push(s as f64 / slice.len() as f64);
        }
        if let Some((e, _)) = fit_decay(&tail_times, &fr, fit) {
            batch_estimates.push(e);
        }
    }
    let nb = batch_estimates.len() as f64;
    let mean = batch_estimates.iter().sum::<f64>() / nb;
    let var = batch_estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (nb - 1.0).max(1.0);
    Ok(Lambda0Estimate {
        estimate,
        standard_error: (var / nb).sqrt(),
        fit,
        power,
        batches: batch_estimates.len(),
        fit_points: tail.len(),
        censored_fraction: ends.iter().filter(|e| e.1).count() as f64 / cfg.paths as f64,
        survival,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub time: f64,
    /// Frequencies over model positions among survivors.
    pub frequencies: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub survivors: usize,
    pub paths: usize,
}

impl EmpiricalDistribution {
    pub fn total_variation(&self, target: &[f64]) -> f64 {
        0.5 * self.frequencies.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

const MIN_LAW_SURVIVORS: usize = 30;

fn law_at(model: &GeneratorModel, ends: &[(f64, bool, usize)], t: f64) -> Result<EmpiricalDistribution> {
    let mut counts = vec![0usize; model.n()];
    let mut survivors = 0;
    for &(_, censored, state) in ends {
        if censored {
            counts[state] += 1;
            survivors += 1;
        }
    }
    if survivors < MIN_LAW_SURVIVORS {
        return Err(Error::TooFewSurvivors { time: t, survivors });
    }
    let n = survivors as f64;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let standard_errors = frequencies.iter().map(|f| (f * (1.0 - f) / n).sqrt()).collect();
    Ok(EmpiricalDistribution { time: t, frequencies, standard_errors, survivors, paths: ends.len() })
}

/// Empirical law of `X_t` given `τ_0 > t`, started from `i0`.
pub fn yaglom_estimate(model: &GeneratorModel, i0: usize, t: f64, cfg: &SimConfig) -> Result<EmpiricalDistribution> {
    cfg.validate()?;
    check_state(model, i0)?;
    if !(t > 0.0 && t <= cfg.horizon) {
        return Err(Error::BadParameters(format!("time {t} must lie in (0, horizon]")));
    }
    let ends = endpoints(model, cfg, t, |_| i0)?;
    law_at(model, &ends, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    pub time: f64,
    pub tv: f64,
    /// Simultaneous 95% interval from per-state binomial bounds.
    pub ci_low: f64,
    pub ci_high: f64,
    pub survivors: usize,
    /// Survivor fraction; `e^{-λt}` when `u` is the λ-QSD.
    pub survival_fraction: f64,
    pub law: EmpiricalDistribution,
}

/// Starts paths from `u` and compares the survivor law at `t` with `u`.
pub fn qsd_invariance_check(model: &GeneratorModel, u: &[f64], t: f64, cfg: &SimConfig) -> Result<InvarianceCheck> {
    cfg.validate()?;
    if u.len() != model.n() {
        return Err(Error::BadParameters(format!("distribution has {} entries, model has {} states", u.len(), model.n())));
    }
    let total: f64 = u.iter().sum();
    if u.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::BadParameters("initial distribution must be a probability vector".into()));
    }
    if !(t > 0.0 && t <= cfg.horizon) {
        return Err(Error::BadParameters(format!("time {t} must lie in (0, horizon]")));
    }
    let cumulative: Vec<f64> = u
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let last_positive = u.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    let start = |rng: &mut ChaCha8Rng| {
        let x = rng.random::<f64>() * total;
        cumulative.partition_point(|&c| c <= x).min(last_positive)
    };
    let ends = endpoints(model, cfg, t, start)?;
    let law = law_at(model, &ends, t)?;
    let tv = law.total_variation(u);
    // Bonferroni over states: each frequency within z SE with total error 5%.
    let occupied = u.iter().zip(&law.frequencies).filter(|(a, b)| **a > 0.0 || **b > 0.0).count().max(1);
    let z = normal_quantile(1.0 - 0.025 / occupied as f64);
    let n = law.survivors as f64;
    let half: f64 = 0.5 * u.iter().map(|&p| z * (p * (1.0 - p) / n).sqrt()).sum::<f64>();
    Ok(InvarianceCheck {
        time: t,
        tv,
        ci_low: (tv - half).max(0.0),
        ci_high: tv + half,
        survivors: law.survivors,
        survival_fraction: law.survivors as f64 / cfg.paths as f64,
        law,
    })
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.38357751867269e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
    pub rate: f64,
}

/// Asymptotic Kolmogorov tail `P[K > x]`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov–Smirnov test of the first holding time at `state` against the
/// exponential law with rate `q_state`.
pub fn holding_time_ks(model: &GeneratorModel, state: usize, cfg: &SimConfig) -> Result<KsResult> {
    cfg.validate()?;
    check_state(model, state)?;
    let rate = model.total(state);
    let pool = pool(cfg.workers)?;
    let mut samples: Vec<f64> = pool.install(|| {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let s = run(model, state, &mut path_rng(cfg.seed, p as u64), f64::INFINITY, true);
                s.first_holding_time().expect("infinite horizon never censors")
            })
            .collect()
    });
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_tail((en + 0.12 + 0.11 / en) * d), samples: samples.len(), rate })
}

/// Writes `path_id,time,state` rows: the start at time 0, every jump, and
/// the absorption as state 0. States are 1-based positions.
pub fn write_trace<W: Write>(paths: &[PathSample], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "path_id,time,state")?;
    for (id, p) in paths.iter().enumerate() {
        writeln!(out, "{id},0,{}", p.initial + 1)?;
        for (t, s) in p.jump_times.iter().zip(&p.states[1..]) {
            writeln!(out, "{id},{t},{}", s + 1)?;
        }
        if !p.censored {
            writeln!(out, "{id},{},0", p.absorption_time)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn g2() -> GeneratorModel {
        build_model(&[(1, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0)]).unwrap()
    }

    #[test]
    fn same_seed_same_path() {
        let a = sample_path(&g2(), 0, &mut path_rng(7, 3), 50.0);
        let b = sample_path(&g2(), 0, &mut path_rng(7, 3), 50.0);
        assert_eq!(a, b);
        let c = sample_path(&g2(), 0, &mut path_rng(7, 4), 50.0);
        assert_ne!(a, c);
    }

    #[test]
    fn path_accessors() {
        let p = PathSample { initial: 0, jump_times: vec![1.0, 2.5], states: vec![0, 1, 0], absorption_time: 3.0, censored: false };
        assert_eq!(p.state_at(0.5), Some(0));
        assert_eq!(p.state_at(1.0), Some(1));
        assert_eq!(p.state_at(2.7), Some(0));
        assert_eq!(p.state_at(3.0), None);
        assert_eq!(p.first_holding_time(), Some(1.0));
        assert_eq!(p.return_time(0), Some(2.5));
        assert_eq!(p.return_time(1), Some(1.0));
    }

    #[test]
    fn exponential_lifetime_mean() {
        let m = build_model(&[(1, 0, 2.0)]).unwrap();
        let cfg = SimConfig::new(100_000, f64::INFINITY, 11);
        let ends = endpoints(&m, &cfg, f64::INFINITY, |_| 0).unwrap();
        let mean = ends.iter().map(|e| e.0).sum::<f64>() / ends.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn single_state_decay_rate() {
        let m = build_model(&[(1, 0, 2.0)]).unwrap();
        let cfg = SimConfig::new(100_000, 2.0, 5);
        let e = estimate_lambda0(&m, 0, &cfg, SurvivalFit::Exponential).unwrap();
        assert!((e.estimate - 2.0).abs() < 0.05, "{e:?}");
        assert!(e.survival.windows(2).all(|w| w[1].survivors <= w[0].survivors));
    }

    #[test]
    fn workers_do_not_change_results() {
        let cfg = SimConfig::new(4_000, 5.0, 99);
        let one = estimate_lambda0(&g2(), 0, &cfg, SurvivalFit::Exponential).unwrap();
        let four = estimate_lambda0(&g2(), 0, &cfg.clone().with_workers(4), SurvivalFit::Exponential).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn quantiles_and_tails() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn least_squares_recovers_a_plane() {
        let t: Vec<f64> = (1..10).map(f64::from).collect();
        let l: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let y: Vec<f64> = t.iter().zip(&l).map(|(a, b)| 2.0 - 0.3 * a - 1.5 * b).collect();
        let c = least_squares(&[t, l], &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-9 && (c[1] + 0.3).abs() < 1e-9 && (c[2] + 1.5).abs() < 1e-9);
    }

    #[test]
    fn trace_format() {
        let p = PathSample { initial: 0, jump_times: vec![1.0], states: vec![0, 1], absorption_time: 2.0, censored: false };
        let mut buf = Vec::new();
        write_trace(&[p], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path_id,time,state\n0,0,1\n0,1,2\n0,2,0\n");
    }
}
