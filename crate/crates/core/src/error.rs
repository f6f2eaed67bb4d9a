use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative rate {rate} on entry ({from}, {to})")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("rate on entry ({from}, {to}) is not finite")]
    NonFiniteRate { from: usize, to: usize },
    #[error("duplicate entry ({from}, {to})")]
    DuplicateEntry { from: usize, to: usize },
    #[error("self loop on state {state}")]
    SelfLoop { state: usize },
    #[error("invalid state index {index}: {reason}")]
    BadIndex { index: usize, reason: &'static str },
    #[error("model has no states")]
    EmptyModel,
    #[error("state space is not irreducible ({components} strongly connected components)")]
    NotIrreducible { components: usize },
    #[error("truncation at level {level} breaks irreducibility ({components} components)")]
    TruncationBreaksIrreducibility { level: usize, components: usize },
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("shift {shift} is at or above the minimal total rate {min_rate}")]
    ShiftAtOrAboveMinRate { shift: f64, min_rate: f64 },
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("decay parameter sits at the boundary min q_i = {min_rate}")]
    BoundaryDecay { min_rate: f64 },
    #[error("closed form unavailable: {0}")]
    ClosedFormUnavailable(&'static str),
    #[error("return series unresolved: F = {value} after {terms} terms")]
    SeriesNotResolved { value: f64, terms: usize },
    #[error("exit kernel Perron root {perron_root} differs from 1 (row sums {row_sums:?})")]
    KernelNotStochasticEnough { perron_root: f64, row_sums: Vec<f64> },
    #[error("model is not lambda-recurrent (F = {f_kk})")]
    NotRecurrent { f_kk: f64 },
    #[error("exit set is empty")]
    EmptyExitSet,
    #[error("left eigenvector is not positive: {0}")]
    NonPositiveEigenvector(String),
    #[error("matrix is not a nonsingular M-matrix (pivot {pivot:e} at row {row})")]
    NotMMatrix { row: usize, pivot: f64 },
    #[error("degenerate hitting vector: h[{state}] = {value}")]
    DegenerateH { state: usize, value: f64 },
    #[error("lambda {lambda} is at or above q_k = {q_k}")]
    BoundaryShift { lambda: f64, q_k: f64 },
    #[error("too few survivors: {survivors} at time {time}")]
    TooFewSurvivors { time: f64, survivors: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format {0:?}")]
    UnsupportedFormat(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used by the command line tool.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeRate { .. } => "negative_rate",
            Error::NonFiniteRate { .. } => "non_finite_rate",
            Error::DuplicateEntry { .. } => "duplicate_entry",
            Error::SelfLoop { .. } => "self_loop",
            Error::BadIndex { .. } => "bad_index",
            Error::EmptyModel => "empty_model",
            Error::NotIrreducible { .. } => "not_irreducible",
            Error::TruncationBreaksIrreducibility { .. } => "truncation_breaks_irreducibility",
            Error::BadParameters(_) => "bad_parameters",
            Error::ShiftAtOrAboveMinRate { .. } => "shift_at_or_above_min_rate",
            Error::NoConvergence { .. } => "no_convergence",
            Error::BoundaryDecay { .. } => "boundary_decay",
            Error::ClosedFormUnavailable(_) => "closed_form_unavailable",
            Error::SeriesNotResolved { .. } => "series_not_resolved",
            Error::KernelNotStochasticEnough { .. } => "kernel_not_stochastic_enough",
            Error::NotRecurrent { .. } => "not_recurrent",
            Error::EmptyExitSet => "empty_exit_set",
            Error::NonPositiveEigenvector(_) => "non_positive_eigenvector",
            Error::NotMMatrix { .. } => "not_m_matrix",
            Error::DegenerateH { .. } => "degenerate_h",
            Error::BoundaryShift { .. } => "boundary_shift",
            Error::TooFewSurvivors { .. } => "too_few_survivors",
            Error::Parse { .. } => "parse_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
