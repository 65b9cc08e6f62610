//! Shared domain types: problem configuration, trust weights, forecasts,
//! scenario sets, and allocation results.

use thiserror::Error;

use crate::lp::Status;

/// Trust entries are clamped into this band by every update operation so no
/// source can be locked out (or in) permanently.
pub const TRUST_MIN: f64 = 0.01;
/// Upper clamp of the trust band; see [`TRUST_MIN`].
pub const TRUST_MAX: f64 = 0.99;

/// Tolerance on trust column sums.
pub const TRUST_SUM_TOL: f64 = 1e-9;

/// Static decision environment: regions, sources, penalty costs, budget,
/// demand support, ambiguity radius, and sample count.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub num_regions: usize,
    pub num_sources: usize,
    /// Unit cost of unmet demand per region.
    pub cost_unmet: Vec<f64>,
    /// Unit cost of over-served demand per region.
    pub cost_over: Vec<f64>,
    /// Total resource budget shared by all regions.
    pub budget: f64,
    /// Per-region demand upper bound; demand support is `[0, support_upper]`.
    pub support_upper: Vec<f64>,
    /// Radius of the ambiguity ball around the empirical distribution.
    pub wasserstein_radius: f64,
    /// Number of scenarios drawn from the fused forecast.
    pub num_samples: usize,
}

#[derive(Debug, Error)]
#[error("invalid {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

impl ProblemConfig {
    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_regions == 0 {
            return Err(bad("num_regions", "must be at least 1"));
        }
        if self.num_sources == 0 {
            return Err(bad("num_sources", "must be at least 1"));
        }
        if self.cost_unmet.len() != self.num_regions {
            return Err(bad(
                "cost_unmet",
                format!(
                    "expected {} entries, got {}",
                    self.num_regions,
                    self.cost_unmet.len()
                ),
            ));
        }
        if let Some(c) = self.cost_unmet.iter().find(|c| !c.is_finite() || **c <= 0.0) {
            return Err(bad("cost_unmet", format!("entries must be positive, got {c}")));
        }
        if self.cost_over.len() != self.num_regions {
            return Err(bad(
                "cost_over",
                format!(
                    "expected {} entries, got {}",
                    self.num_regions,
                    self.cost_over.len()
                ),
            ));
        }
        if let Some(c) = self.cost_over.iter().find(|c| !c.is_finite() || **c <= 0.0) {
            return Err(bad("cost_over", format!("entries must be positive, got {c}")));
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            return Err(bad("budget", format!("must be nonnegative, got {}", self.budget)));
        }
        if self.support_upper.len() != self.num_regions {
            return Err(bad(
                "support_upper",
                format!(
                    "expected {} entries, got {}",
                    self.num_regions,
                    self.support_upper.len()
                ),
            ));
        }
        if let Some(u) = self
            .support_upper
            .iter()
            .find(|u| !u.is_finite() || **u <= 0.0)
        {
            return Err(bad(
                "support_upper",
                format!("entries must be positive, got {u}"),
            ));
        }
        if !self.wasserstein_radius.is_finite() || self.wasserstein_radius < 0.0 {
            return Err(bad(
                "wasserstein_radius",
                format!("must be nonnegative, got {}", self.wasserstein_radius),
            ));
        }
        if self.num_samples == 0 {
            return Err(bad("num_samples", "must be at least 1"));
        }
        Ok(())
    }
}

/// Row-stochastic-by-column trust weights: entry `(h, k)` is the trust in
/// source `h` for region `k`, and every region column sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustMatrix {
    num_sources: usize,
    num_regions: usize,
    values: Vec<f64>, // row-major H x K
}

impl TrustMatrix {
    /// Builds a trust matrix from row-major `values`, checking that entries
    /// lie in `[0, 1]` and each column sums to one.
    pub fn new(
        num_sources: usize,
        num_regions: usize,
        values: Vec<f64>,
    ) -> Result<TrustMatrix, ConfigError> {
        if values.len() != num_sources * num_regions {
            return Err(bad(
                "trust",
                format!(
                    "expected {}x{} entries, got {}",
                    num_sources,
                    num_regions,
                    values.len()
                ),
            ));
        }
        let t = TrustMatrix {
            num_sources,
            num_regions,
            values,
        };
        for (i, &v) in t.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(bad("trust", format!("entry {i} out of [0,1]: {v}")));
            }
        }
        for k in 0..num_regions {
            let s = t.column_sum(k);
            if (s - 1.0).abs() > TRUST_SUM_TOL {
                return Err(bad(
                    "trust",
                    format!("column {k} sums to {s}, expected 1"),
                ));
            }
        }
        Ok(t)
    }

    /// Equal trust `1/H` in every source.
    pub fn uniform(num_sources: usize, num_regions: usize) -> TrustMatrix {
        TrustMatrix {
            num_sources,
            num_regions,
            values: vec![1.0 / num_sources as f64; num_sources * num_regions],
        }
    }

    /// Full trust in one source, zero in the rest.
    pub fn full_trust(source: usize, num_sources: usize, num_regions: usize) -> TrustMatrix {
        let mut values = vec![0.0; num_sources * num_regions];
        for k in 0..num_regions {
            values[source * num_regions + k] = 1.0;
        }
        TrustMatrix {
            num_sources,
            num_regions,
            values,
        }
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    pub fn get(&self, source: usize, region: usize) -> f64 {
        self.values[source * self.num_regions + region]
    }

    pub fn column_sum(&self, region: usize) -> f64 {
        (0..self.num_sources).map(|h| self.get(h, region)).sum()
    }

    pub(crate) fn set(&mut self, source: usize, region: usize, v: f64) {
        self.values[source * self.num_regions + region] = v;
    }

    pub(crate) fn column(&self, region: usize) -> Vec<f64> {
        (0..self.num_sources).map(|h| self.get(h, region)).collect()
    }

    pub(crate) fn set_column(&mut self, region: usize, col: &[f64]) {
        for (h, &v) in col.iter().enumerate() {
            self.set(h, region, v);
        }
    }
}

/// One source's per-region Normal forecast parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceForecast {
    pub source_id: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl SourceForecast {
    pub fn validate(&self, num_regions: usize) -> Result<(), ConfigError> {
        if self.means.len() != num_regions || self.stds.len() != num_regions {
            return Err(bad(
                "forecast",
                format!(
                    "source {} has {} means / {} stds, expected {}",
                    self.source_id,
                    self.means.len(),
                    self.stds.len(),
                    num_regions
                ),
            ));
        }
        if self.means.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(bad("forecast", "means must be nonnegative"));
        }
        if self.stds.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(bad("forecast", "stds must be nonnegative"));
        }
        Ok(())
    }
}

/// Trust-weighted combination of the source forecasts; diagonal covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedDistribution {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// An empirical sample of demand: `num_scenarios` rows of `num_regions`
/// demands each, all inside the support box.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    num_scenarios: usize,
    num_regions: usize,
    samples: Vec<f64>, // row-major N x K
}

impl ScenarioSet {
    pub fn new(num_scenarios: usize, num_regions: usize, samples: Vec<f64>) -> ScenarioSet {
        assert_eq!(samples.len(), num_scenarios * num_regions);
        ScenarioSet {
            num_scenarios,
            num_regions,
            samples,
        }
    }

    pub fn num_scenarios(&self) -> usize {
        self.num_scenarios
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    pub fn get(&self, scenario: usize, region: usize) -> f64 {
        self.samples[scenario * self.num_regions + region]
    }

    pub fn row(&self, scenario: usize) -> &[f64] {
        &self.samples[scenario * self.num_regions..(scenario + 1) * self.num_regions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }
}

/// Solved allocation: per-region amounts, the model objective, solver status,
/// and the wall-clock time spent inside the solver.
#[derive(Clone, Debug)]
pub struct AllocationSolution {
    pub allocation: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    pub solve_time: f64,
}
