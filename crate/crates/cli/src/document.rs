//! The `qsdlab-result-v1` document and its JSON and CSV renderings.

use std::path::Path;

use qsdlab_core::htransform::{HittingVector, MomentBound};
use qsdlab_core::model::ModelFamily;
use qsdlab_core::qsd::{QsdResult, ResidualReport};
use qsdlab_core::simulate::{EmpiricalDistribution, InvarianceCheck, KsResult, Lambda0Estimate};
use qsdlab_core::spectral::{ClassificationVerdict, DecayResult};
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

pub const SCHEMA: &str = "qsdlab-result-v1";

pub const NO_QSD_NULL: &str = "no QSD: invariant measure non-summable (partial sums diverge)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultDocument {
    pub schema: &'static str,
    pub tool_version: &'static str,
    /// SHA-256 of the canonical triplet text of the (windowed) model.
    pub input_digest: String,
    pub config: RunConfig,
    pub window: WindowInfo,
    pub outputs: Outputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// The state space the vectors in `outputs` are indexed by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub states: usize,
    pub labels: Vec<i64>,
    /// Truncation level when the model is a window of a larger one.
    pub level: Option<usize>,
    pub family: Option<ModelFamily>,
    /// Labels of states whose killing includes mass redirected by truncation.
    pub boundary: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Extrapolation of `lambda` over the truncation schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qsd: Option<QsdResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_gate_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hitting: Option<HittingVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<MomentBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Estimates>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimates {
    pub initial_label: i64,
    pub lambda0: Lambda0Estimate,
    pub yaglom: EmpiricalDistribution,
    pub holding_time_ks: KsResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance: Option<InvarianceCheck>,
}

impl ResultDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }

    /// The main table of the document: `u` for compute, window sums for
    /// classify, `h` for bound, the survival curve for simulate and
    /// per-state residuals for verify.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let labels = &self.window.labels;
        let o = &self.outputs;
        let mut put = |row: Vec<String>| w.write_record(&row).expect("in-memory csv");
        if let Some(q) = &o.qsd {
            put(vec!["label".into(), "u".into()]);
            for (l, u) in labels.iter().zip(&q.u) {
                put(vec![l.to_string(), u.to_string()]);
            }
        } else if let Some(h) = &o.hitting {
            put(vec!["label".into(), "h".into()]);
            for (l, v) in labels.iter().zip(&h.values) {
                put(vec![l.to_string(), v.to_string()]);
            }
        } else if let Some(e) = &o.estimates {
            put(vec!["time".into(), "survivors".into(), "fraction".into()]);
            for p in &e.lambda0.survival {
                put(vec![p.time.to_string(), p.survivors.to_string(), p.fraction.to_string()]);
            }
        } else if let Some(c) = &o.classification {
            put(vec!["level".into(), "f_kk".into(), "sum_x".into(), "sum_xy".into()]);
            for f in &c.f_kk_by_level {
                let find = |v: &[qsdlab_core::spectral::LevelValue]| {
                    v.iter().find(|x| x.level == f.level).map(|x| x.value.to_string()).unwrap_or_default()
                };
                put(vec![f.level.to_string(), f.value.to_string(), find(&c.x_partial_sums), find(&c.xy_partial_sums)]);
            }
        } else if let Some(r) = &o.residuals {
            put(vec!["metric".into(), "value".into()]);
            put(vec!["eigen_residual".into(), r.eigen_residual.to_string()]);
            put(vec!["relative_residual".into(), r.relative_residual.to_string()]);
            put(vec!["sum_defect".into(), r.sum_defect.to_string()]);
            put(vec!["min_u".into(), r.min_u.to_string()]);
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

pub fn save_result(doc: &ResultDocument, format: OutputFormat, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, doc.render(format))?;
    Ok(())
}
