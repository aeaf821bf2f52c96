//! Aggregated run results, serialized as `summary.json`. The schema is
//! documented in the README.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::sweep::Outcome;

/// Success counts of one force cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub fx: f64,
    pub fy: f64,
    pub successes: usize,
    pub trials: usize,
    pub success_rate: f64,
}

impl CellStats {
    pub fn new(fx: f64, fy: f64, successes: usize, trials: usize) -> Self {
        Self { fx, fy, successes, trials, success_rate: rate(successes, trials) }
    }
}

/// Metric statistics over successful episodes in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub episodes: usize,
    pub successes: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; zero for a single value.
    pub std: Option<f64>,
}

impl BinStats {
    pub fn new(lo: f64, hi: f64, episodes: usize, values: &[f64]) -> Self {
        let mean = mean(values);
        let std = mean.map(|m| {
            if values.len() < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
            }
        });
        Self { lo, hi, episodes, successes: values.len(), mean, std }
    }
}

/// Results of one arm of a run (a period mode or a controller variant).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Failures by kind.
    pub failures: BTreeMap<String, usize>,
    /// Mean of the run's headline metric over successful episodes.
    pub mean_metric: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<BinStats>,
}

impl GroupSummary {
    pub fn from_outcomes<'a>(
        name: &str,
        outcomes: impl Iterator<Item = &'a Outcome>,
        cells: Vec<CellStats>,
        bins: Vec<BinStats>,
    ) -> Self {
        let mut episodes = 0;
        let mut successes = 0;
        let mut failures = BTreeMap::new();
        for o in outcomes {
            episodes += 1;
            if o.success {
                successes += 1;
            }
            if let Some(f) = o.failure {
                *failures.entry(f.to_string()).or_insert(0) += 1;
            }
        }
        Self {
            name: name.into(),
            episodes,
            successes,
            success_rate: rate(successes, episodes),
            failures,
            mean_metric: None,
            cells,
            bins,
        }
    }
}

/// Wall-clock statistics in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallStats {
    pub total_s: f64,
    pub count: usize,
    pub median_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
}

impl WallStats {
    pub fn from_samples(mut samples: Vec<f64>, total_s: f64) -> Self {
        samples.sort_by(f64::total_cmp);
        Self {
            total_s,
            count: samples.len(),
            median_s: percentile(&samples, 0.5),
            p95_s: percentile(&samples, 0.95),
            max_s: samples.last().copied().unwrap_or(0.0),
        }
    }
}

/// Per-call solver timing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTiming {
    pub solver: String,
    pub stats: WallStats,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunSummary {
    pub kind: String,
    /// Multiplier applied to every disturbance magnitude of the grid.
    pub scale: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub groups: Vec<GroupSummary>,
    /// `(adaptive - fixed) / fixed` total successes of a push sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_improvement: Option<f64>,
    /// Run-specific scalars (tracking errors, bin fractions).
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub solvers: Vec<SolverTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<WallStats>,
}

impl RunSummary {
    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn solver(&self, name: &str) -> Option<&WallStats> {
        self.solvers.iter().find(|s| s.solver == name).map(|s| &s.stats)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn rate(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    }
}

/// `None` when the baseline has no successes.
pub fn relative_improvement(baseline: usize, candidate: usize) -> Option<f64> {
    (baseline > 0).then(|| (candidate as f64 - baseline as f64) / baseline as f64)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Nearest-rank percentile of sorted samples; zero when empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
