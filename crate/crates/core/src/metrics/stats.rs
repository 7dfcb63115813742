use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{EvalReport, MetricsError};
use crate::filtering::{mean, std_dev, VarianceConvention};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Result<Self, MetricsError> {
        if values.len() < 2 {
            return Err(MetricsError::TooFewRuns(values.len()));
        }
        Ok(MeanStd { mean: mean(values), std: std_dev(values, VarianceConvention::Sample) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub n_runs: usize,
    pub metrics: BTreeMap<String, MeanStd>,
}

impl FoldSummary {
    pub fn from_metrics(runs: &[BTreeMap<String, f64>]) -> Result<Self, MetricsError> {
        if runs.len() < 2 {
            return Err(MetricsError::TooFewRuns(runs.len()));
        }
        let mut metrics = BTreeMap::new();
        for name in runs[0].keys() {
            let values = runs
                .iter()
                .map(|r| r.get(name).copied().ok_or_else(|| MetricsError::MissingMetric(name.clone())))
                .collect::<Result<Vec<f64>, _>>()?;
            metrics.insert(name.clone(), MeanStd::of(&values)?);
        }
        Ok(FoldSummary { n_runs: runs.len(), metrics })
    }

    pub fn get(&self, metric: &str) -> Option<MeanStd> {
        self.metrics.get(metric).copied()
    }
}

pub fn aggregate_folds(reports: &[EvalReport]) -> Result<FoldSummary, MetricsError> {
    FoldSummary::from_metrics(&reports.iter().map(EvalReport::metrics).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// Survival function of the larger-over-smaller ratio only.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    pub f: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p: f64,
    pub tail: Tail,
}

/// Variance-ratio test with the larger sample variance in the numerator.
pub fn f_test_variance(a: &[f64], b: &[f64], tail: Tail) -> Result<FTest, MetricsError> {
    for (which, s) in [("a", a), ("b", b)] {
        if s.len() < 2 {
            return Err(MetricsError::SampleTooSmall { which, len: s.len() });
        }
    }
    let var = |s: &[f64]| std_dev(s, VarianceConvention::Sample).powi(2);
    let (va, vb) = (var(a), var(b));
    if va == 0.0 {
        return Err(MetricsError::DegenerateVariance("a"));
    }
    if vb == 0.0 {
        return Err(MetricsError::DegenerateVariance("b"));
    }
    let ((vn, nn), (vd, nd)) = if va >= vb { ((va, a.len()), (vb, b.len())) } else { ((vb, b.len()), (va, a.len())) };
    let f = vn / vd;
    let (df_num, df_den) = ((nn - 1) as f64, (nd - 1) as f64);
    let dist = FisherSnedecor::new(df_num, df_den).expect("degrees of freedom are positive");
    let p = match tail {
        Tail::Upper => dist.sf(f),
        Tail::TwoSided if f == 1.0 => 1.0,
        Tail::TwoSided => (2.0 * dist.sf(f).min(dist.cdf(f))).min(1.0),
    };
    Ok(FTest { f, df_num, df_den, p, tail })
}
