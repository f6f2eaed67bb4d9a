//! Killed-jump-process models: a conservative Q-matrix on `E` with an
//! implicit absorbing state `0`.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Builtin countable families. Parameters are rates or probabilities as
/// in the family's rate table; the window level lives in [`ModelFamilySpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    /// States `1, 2, ...`: `q_{10} = w`, `q_{12} = p`, `q_1 = 1 - r`; for
    /// `i > 1`: `q_{i,i+1} = p`, `q_{i1} = 1 - p`, `q_i = 1`.
    FeedbackChain { p: f64, r: f64, w: f64 },
    /// States `Z`: `q_{i,i+1} = pc`, `q_{i,i-1} = (1-p)c`, no killing.
    BdLine { p: f64, c: f64 },
    /// States `1, 2, ...`: `q_{i,i+1} = pc`, `q_{i,i-1} = (1-p)c`; the step
    /// down from state 1 is absorption.
    BdHalfline { p: f64, c: f64 },
}

impl ModelFamily {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::BadParameters(format!("{name} must lie in (0, 1), got {p}")))
            }
        };
        match *self {
            ModelFamily::FeedbackChain { p, r, w } => {
                prob("p", p)?;
                if !(w > 0.0) || !(r >= 0.0) {
                    return Err(Error::BadParameters(format!("need w > 0 and r >= 0, got w={w}, r={r}")));
                }
                if (p + r + w - 1.0).abs() > 1e-12 {
                    return Err(Error::BadParameters(format!("p + r + w must equal 1, got {}", p + r + w)));
                }
                Ok(())
            }
            ModelFamily::BdLine { p, c } | ModelFamily::BdHalfline { p, c } => {
                prob("p", p)?;
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::BadParameters(format!("c must be positive, got {c}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::FeedbackChain { .. } => "feedback-chain",
            ModelFamily::BdLine { .. } => "bd-line",
            ModelFamily::BdHalfline { .. } => "bd-halfline",
        }
    }

    /// Labels kept by a window of the given level, in index order.
    fn window_labels(&self, level: usize) -> Vec<i64> {
        let n = level as i64;
        match self {
            ModelFamily::BdLine { .. } => (-n..=n).collect(),
            _ => (1..=n).collect(),
        }
    }

    /// Outgoing rates of the countable model at `label`: jumps inside `E`
    /// and the intrinsic killing rate.
    fn row(&self, label: i64) -> (Vec<(i64, f64)>, f64) {
        match *self {
            ModelFamily::FeedbackChain { p, w, .. } => {
                if label == 1 {
                    (vec![(2, p)], w)
                } else {
                    (vec![(1, 1.0 - p), (label + 1, p)], 0.0)
                }
            }
            ModelFamily::BdLine { p, c } => (vec![(label - 1, (1.0 - p) * c), (label + 1, p * c)], 0.0),
            ModelFamily::BdHalfline { p, c } => {
                if label == 1 {
                    (vec![(2, p * c)], (1.0 - p) * c)
                } else {
                    (vec![(label - 1, (1.0 - p) * c), (label + 1, p * c)], 0.0)
                }
            }
        }
    }
}

/// A family together with a truncation level `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFamilySpec {
    #[serde(flatten)]
    pub family: ModelFamily,
    pub level: usize,
}

impl ModelFamilySpec {
    pub fn new(family: ModelFamily, level: usize) -> Self {
        ModelFamilySpec { family, level }
    }
}

/// How a window was cut out of a larger model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationMeta {
    pub family: Option<ModelFamily>,
    pub level: usize,
    pub redirect_policy: RedirectPolicy,
    /// Rate mass per state that was redirected into killing.
    pub redirected: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedirectPolicy {
    Kill,
}

/// States with a positive killing rate, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSet {
    pub members: Vec<usize>,
    /// Members whose killing rate contains mass redirected by truncation.
    pub at_boundary: Vec<usize>,
    /// Members with killing that is not an artefact of truncation.
    pub intrinsic: Vec<usize>,
}

impl ExitSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.binary_search(&state).is_ok()
    }

    /// True when some exit state exists only because of the truncation.
    pub fn touches_boundary(&self) -> bool {
        !self.at_boundary.is_empty()
    }
}

/// Sparse conservative Q-matrix over dense positions `0..n`.
///
/// Immutable after construction. `total[i]` is computed as the row sum of the
/// off-diagonal rates plus the killing rate, so conservativeness holds by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    labels: Vec<i64>,
    rows: Vec<Vec<(usize, f64)>>,
    kill: Vec<f64>,
    total: Vec<f64>,
    exit: ExitSet,
    truncation: Option<TruncationMeta>,
}

fn check_rate(from: usize, to: usize, rate: f64) -> Result<()> {
    if !rate.is_finite() {
        return Err(Error::NonFiniteRate { from, to });
    }
    if rate < 0.0 {
        return Err(Error::NegativeRate { from, to, rate });
    }
    Ok(())
}

/// Builds a model from `(i, j, rate)` triplets with 1-based `i`, and `j = 0`
/// meaning killing. The state count is the largest index seen.
pub fn build_model(entries: &[(usize, usize, f64)]) -> Result<GeneratorModel> {
    build_model_with_states(None, entries)
}

/// Like [`build_model`] with an explicit state count.
pub fn build_model_with_states(states: Option<usize>, entries: &[(usize, usize, f64)]) -> Result<GeneratorModel> {
    let max_seen = entries.iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0);
    let n = states.unwrap_or(max_seen);
    if n == 0 {
        return Err(Error::EmptyModel);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut kill = vec![0.0; n];
    let mut seen = std::collections::HashSet::with_capacity(entries.len());
    for &(i, j, rate) in entries {
        if i == 0 {
            return Err(Error::BadIndex { index: i, reason: "state 0 is absorbing and has no outgoing rates" });
        }
        if i > n || j > n {
            return Err(Error::BadIndex { index: i.max(j), reason: "index exceeds the declared state count" });
        }
        if i == j {
            return Err(Error::SelfLoop { state: i });
        }
        check_rate(i, j, rate)?;
        if !seen.insert((i, j)) {
            return Err(Error::DuplicateEntry { from: i, to: j });
        }
        if rate == 0.0 {
            continue;
        }
        if j == 0 {
            kill[i - 1] = rate;
        } else {
            rows[i - 1].push((j - 1, rate));
        }
    }
    let labels = (1..=n as i64).collect();
    GeneratorModel::from_parts(labels, rows, kill, None)
}

/// Builds the window of a builtin family at `spec.level`.
pub fn make_family(spec: &ModelFamilySpec) -> Result<GeneratorModel> {
    spec.family.validate()?;
    if spec.level < 2 {
        return Err(Error::BadParameters(format!("truncation level must be >= 2, got {}", spec.level)));
    }
    let labels = spec.family.window_labels(spec.level);
    let first = labels[0];
    let n = labels.len();
    let mut rows = Vec::with_capacity(n);
    let mut kill = Vec::with_capacity(n);
    let mut redirected = vec![0.0; n];
    for (pos, &label) in labels.iter().enumerate() {
        let (jumps, intrinsic) = spec.family.row(label);
        let mut row = Vec::with_capacity(jumps.len());
        let mut lost = 0.0;
        for (target, rate) in jumps {
            let t = target - first;
            if t >= 0 && (t as usize) < n {
                row.push((t as usize, rate));
            } else {
                lost += rate;
            }
        }
        row.sort_by_key(|e| e.0);
        redirected[pos] = lost;
        rows.push(row);
        kill.push(intrinsic + lost);
    }
    let meta = TruncationMeta {
        family: Some(spec.family),
        level: spec.level,
        redirect_policy: RedirectPolicy::Kill,
        redirected,
    };
    GeneratorModel::from_parts(labels, rows, kill, Some(meta))
}

/// Recomputes the exit set from the killing rates.
pub fn exit_states(model: &GeneratorModel) -> ExitSet {
    compute_exit_set(&model.kill, model.truncation.as_ref())
}

fn compute_exit_set(kill: &[f64], meta: Option<&TruncationMeta>) -> ExitSet {
    let members: Vec<usize> = (0..kill.len()).filter(|&i| kill[i] > 0.0).collect();
    let redirected = |i: usize| meta.map_or(0.0, |m| m.redirected[i]);
    let at_boundary = members.iter().copied().filter(|&i| redirected(i) > 0.0).collect();
    let intrinsic = members.iter().copied().filter(|&i| kill[i] - redirected(i) > 0.0).collect();
    ExitSet { members, at_boundary, intrinsic }
}

/// Keeps the states with `|label| <= level` and redirects all rate mass
/// leaving the window into killing.
pub fn truncate(model: &GeneratorModel, level: usize) -> Result<GeneratorModel> {
    if level < 2 {
        return Err(Error::BadParameters(format!("truncation level must be >= 2, got {level}")));
    }
    let keep: Vec<usize> = (0..model.n()).filter(|&i| model.labels[i].unsigned_abs() as usize <= level).collect();
    if keep.len() == model.n() {
        return Ok(model.clone());
    }
    let mut new_pos = vec![usize::MAX; model.n()];
    for (p, &i) in keep.iter().enumerate() {
        new_pos[i] = p;
    }
    let mut rows = Vec::with_capacity(keep.len());
    let mut kill = Vec::with_capacity(keep.len());
    let mut redirected = Vec::with_capacity(keep.len());
    for &i in &keep {
        let mut row = Vec::new();
        let mut lost = 0.0;
        for &(j, rate) in &model.rows[i] {
            if new_pos[j] == usize::MAX {
                lost += rate;
            } else {
                row.push((new_pos[j], rate));
            }
        }
        let old_redirect = model.redirected(i);
        redirected.push(old_redirect + lost);
        // Keep the intrinsic part first so windows of a family coincide with
        // the family generated directly at this level.
        kill.push((model.kill[i] - old_redirect) + (old_redirect + lost));
        rows.push(row);
    }
    let labels = keep.iter().map(|&i| model.labels[i]).collect();
    let meta = TruncationMeta {
        family: model.truncation.as_ref().and_then(|m| m.family),
        level,
        redirect_policy: RedirectPolicy::Kill,
        redirected,
    };
    GeneratorModel::from_parts(labels, rows, kill, Some(meta)).map_err(|e| match e {
        Error::NotIrreducible { components } => Error::TruncationBreaksIrreducibility { level, components },
        other => other,
    })
}

impl GeneratorModel {
    fn from_parts(
        labels: Vec<i64>,
        mut rows: Vec<Vec<(usize, f64)>>,
        kill: Vec<f64>,
        truncation: Option<TruncationMeta>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyModel);
        }
        for row in &mut rows {
            row.retain(|&(_, r)| r > 0.0);
            row.sort_by_key(|e| e.0);
        }
        let total = rows
            .iter()
            .zip(&kill)
            .map(|(row, &k)| row.iter().map(|e| e.1).sum::<f64>() + k)
            .collect();
        let components = count_components(&rows);
        if components != 1 {
            return Err(Error::NotIrreducible { components });
        }
        let exit = compute_exit_set(&kill, truncation.as_ref());
        Ok(GeneratorModel { labels, rows, kill, total, exit, truncation })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> i64 {
        self.labels[state]
    }

    pub fn position_of_label(&self, label: i64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Off-diagonal rates `q_ij > 0` of row `i`, sorted by target.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn kill(&self, i: usize) -> f64 {
        self.kill[i]
    }

    pub fn kill_rates(&self) -> &[f64] {
        &self.kill
    }

    /// `q_i = -q_ii`.
    pub fn total(&self, i: usize) -> f64 {
        self.total[i]
    }

    pub fn total_rates(&self) -> &[f64] {
        &self.total
    }

    pub fn min_total_rate(&self) -> f64 {
        self.total.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_total_rate(&self) -> f64 {
        self.total.iter().copied().fold(0.0, f64::max)
    }

    pub fn exit_set(&self) -> &ExitSet {
        &self.exit
    }

    pub fn truncation(&self) -> Option<&TruncationMeta> {
        self.truncation.as_ref()
    }

    pub fn is_window(&self) -> bool {
        self.truncation.is_some()
    }

    /// Truncation level of a window, or the state count of a finite model.
    pub fn level(&self) -> usize {
        self.truncation.as_ref().map_or(self.n(), |m| m.level)
    }

    pub fn redirected(&self, i: usize) -> f64 {
        self.truncation.as_ref().map_or(0.0, |m| m.redirected[i])
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Iterates `(i, j, rate)` with 1-based indices and `j = 0` for killing,
    /// rows in order, killing last within a row.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            let jumps = self.rows[i].iter().map(move |&(j, r)| (i + 1, j + 1, r));
            let kill = (self.kill[i] > 0.0).then_some((i + 1, 0, self.kill[i]));
            jumps.chain(kill)
        })
    }

    /// Deterministic anchor state: the smallest intrinsic exit state, else
    /// the state labelled 0, else the first state.
    pub fn default_anchor(&self) -> usize {
        self.exit
            .intrinsic
            .first()
            .copied()
            .or_else(|| self.position_of_label(0))
            .unwrap_or(0)
    }

    /// True when the state's Q-row is untouched by truncation.
    pub fn is_interior(&self, i: usize) -> bool {
        self.redirected(i) == 0.0
    }

    /// The same model with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::BadParameters(format!("scale factor must be positive, got {factor}")));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, r)| (j, r * factor)).collect())
            .collect();
        let kill = self.kill.iter().map(|k| k * factor).collect();
        let truncation = self.truncation.clone().map(|mut m| {
            m.family = None;
            m.redirected.iter_mut().for_each(|r| *r *= factor);
            m
        });
        GeneratorModel::from_parts(self.labels.clone(), rows, kill, truncation)
    }

    /// `(u Q)_j` restricted to `E`.
    pub fn apply_left(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = u.iter().zip(&self.total).map(|(a, q)| -a * q).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                out[j] += u[i] * r;
            }
        }
        out
    }

    /// `(Q z)_i` restricted to `E`.
    pub fn apply_right(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, r)| r * z[j]).sum::<f64>() - self.total[i] * z[i])
            .collect()
    }

    /// Builds a model with the same labels and truncation record from new
    /// rows and killing rates. Used by transforms that preserve the state
    /// space.
    pub(crate) fn with_rates(&self, rows: Vec<Vec<(usize, f64)>>, kill: Vec<f64>) -> Result<Self> {
        GeneratorModel::from_parts(self.labels.clone(), rows, kill, self.truncation.clone())
    }
}

fn count_components(rows: &[Vec<(usize, f64)>]) -> usize {
    let mut g = DiGraph::<(), ()>::with_capacity(rows.len(), 0);
    let nodes: Vec<_> = (0..rows.len()).map(|_| g.add_node(())).collect();
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    tarjan_scc(&g).len()
}
