use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Minimum coefficient of determination for an order fit to count.
pub const MIN_R_SQUARED: f64 = 0.9;

/// Relative residuals at or below this level are treated as exact.
pub const EXACT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    /// `Fail` dominates `Inconclusive`, which dominates `Pass`.
    pub fn combine(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Criterion {
    /// Fitted convergence order must reach this value.
    MinOrder(f64),
    /// Largest residual must not exceed this value.
    MaxResidual(f64),
    /// Smallest residual must exceed this value.
    MinResidual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub order: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log residual` against `log resolution`.
/// Needs at least two strictly positive, finite points.
pub fn fit_order(resolutions: &[f64], residuals: &[f64]) -> Option<OrderFit> {
    if resolutions.len() != residuals.len() || resolutions.len() < 2 {
        return None;
    }
    let ok = |v: &f64| v.is_finite() && *v > 0.0;
    if !resolutions.iter().all(ok) || !residuals.iter().all(ok) {
        return None;
    }
    let xs: Vec<f64> = resolutions.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let order = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(OrderFit { order, r_squared })
}

/// Outcome of one verification check, serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub params: serde_json::Value,
    /// Name of the refinement parameter (`dt`, `eps`, `h`, `sample`, ...).
    pub resolution_label: String,
    pub resolutions: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order: Option<f64>,
    pub r_squared: Option<f64>,
    pub criterion: Criterion,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ResidualReport>,
}

impl ResidualReport {
    /// Report judged by the fitted order. Residuals all below
    /// [`EXACT_FLOOR`] pass as exact; a fit with `R^2 <` [`MIN_R_SQUARED`]
    /// or fewer than two usable points is inconclusive.
    pub fn from_order(
        check: &str,
        params: serde_json::Value,
        label: &str,
        resolutions: Vec<f64>,
        residuals: Vec<f64>,
        min_order: f64,
    ) -> Self {
        let mut rep = Self::empty(check, params, label, Criterion::MinOrder(min_order));
        rep.resolutions = resolutions;
        rep.residuals = residuals;
        rep.judge_order(min_order);
        rep
    }

    /// Report judged by the largest (or smallest) residual.
    pub fn from_residuals(
        check: &str,
        params: serde_json::Value,
        label: &str,
        resolutions: Vec<f64>,
        residuals: Vec<f64>,
        criterion: Criterion,
    ) -> Self {
        let mut rep = Self::empty(check, params, label, criterion);
        rep.resolutions = resolutions;
        rep.residuals = residuals;
        rep.status = if rep.residuals.iter().any(|r| !r.is_finite()) {
            rep.notes.push("non-finite residual".into());
            Status::Fail
        } else {
            let max = rep.residuals.iter().copied().fold(0.0, f64::max);
            let min = rep.residuals.iter().copied().fold(f64::INFINITY, f64::min);
            let ok = match criterion {
                Criterion::MaxResidual(t) => max <= t,
                Criterion::MinResidual(t) => !rep.residuals.is_empty() && min > t,
                Criterion::MinOrder(_) => false,
            };
            if ok {
                Status::Pass
            } else {
                Status::Fail
            }
        };
        rep
    }

    fn empty(check: &str, params: serde_json::Value, label: &str, criterion: Criterion) -> Self {
        Self {
            check: check.into(),
            params,
            resolution_label: label.into(),
            resolutions: Vec::new(),
            residuals: Vec::new(),
            order: None,
            r_squared: None,
            criterion,
            status: Status::Inconclusive,
            notes: Vec::new(),
            series: BTreeMap::new(),
            components: Vec::new(),
        }
    }

    fn judge_order(&mut self, min_order: f64) {
        if self.residuals.iter().any(|r| !r.is_finite()) {
            self.notes.push("non-finite residual".into());
            self.status = Status::Fail;
            return;
        }
        if !self.residuals.is_empty() && self.residuals.iter().all(|r| *r <= EXACT_FLOOR) {
            self.notes.push("exact to round-off".into());
            self.status = Status::Pass;
            return;
        }
        // a residual that grows as the step shrinks while already tiny is a
        // round-off signature
        let mut pairs: Vec<(f64, f64)> = self
            .resolutions
            .iter()
            .copied()
            .zip(self.residuals.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in pairs.windows(2) {
            if w[1].1 > w[0].1 && w[1].1 < 1e3 * EXACT_FLOOR {
                self.notes.push(format!(
                    "round-off dominated at {} = {:e}",
                    self.resolution_label, w[1].0
                ));
            }
        }
        match fit_order(&self.resolutions, &self.residuals) {
            None => {
                self.notes.push("fewer than two usable resolutions".into());
                self.status = Status::Inconclusive;
            }
            Some(fit) => {
                self.order = Some(fit.order);
                self.r_squared = Some(fit.r_squared);
                self.status = if fit.r_squared < MIN_R_SQUARED {
                    self.notes.push(format!("R^2 = {:.3} below {MIN_R_SQUARED}", fit.r_squared));
                    Status::Inconclusive
                } else if fit.order >= min_order {
                    Status::Pass
                } else {
                    Status::Fail
                };
            }
        }
    }

    pub fn with_component(mut self, c: ResidualReport) -> Self {
        self.components.push(c);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Status including every component.
    pub fn overall(&self) -> Status {
        self.components
            .iter()
            .fold(self.status, |s, c| s.combine(c.overall()))
    }

    pub fn passed(&self) -> bool {
        self.overall() == Status::Pass
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
