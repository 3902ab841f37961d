//! Central finite-difference check of hand-written gradients.

use serde::Serialize;

/// Result of evaluating a loss at one point.
#[derive(Debug, Clone, Copy)]
pub struct Probe {
    pub loss: f64,
    /// Identifies the ReLU active set; see [`super::activation_signature`].
    pub signature: u64,
}

impl Probe {
    pub fn smooth(loss: f64) -> Self {
        Self { loss, signature: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the denominator of the relative error.
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub label: String,
    pub checked: usize,
    /// Coordinates whose ±step probes straddle a ReLU kink.
    pub excluded: Vec<usize>,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} {} coords, max rel err {:.3e} (tol {:.0e}), {} excluded at kinks",
            self.label,
            if self.passed { "PASS" } else { "FAIL" },
            self.checked,
            self.max_rel_error,
            self.tolerance,
            self.excluded.len()
        )
    }
}

/// Compares `analytic` against central differences of `f` around `point`.
///
/// Relative error per coordinate is `|a - n| / max(|a| + |n|, abs_floor)`.
/// Coordinates where either probe changes the ReLU active set are excluded
/// and listed in the report.
pub fn grad_check(
    label: &str,
    point: &[f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> Probe,
    opts: GradCheckOptions,
) -> GradCheckReport {
    assert_eq!(point.len(), analytic.len(), "gradient length does not match point");
    let base = f(point);
    let mut x = point.to_vec();
    let mut excluded = Vec::new();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + opts.step;
        let plus = f(&x);
        x[i] = orig - opts.step;
        let minus = f(&x);
        x[i] = orig;
        if plus.signature != base.signature || minus.signature != base.signature {
            excluded.push(i);
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * opts.step);
        let a = analytic[i];
        let denom = (a.abs() + numeric.abs()).max(opts.abs_floor);
        let rel = (a - numeric).abs() / denom;
        checked += 1;
        if rel > max_rel || rel.is_nan() {
            max_rel = if rel.is_nan() { f64::INFINITY } else { rel };
            worst = Some(i);
        }
    }
    GradCheckReport {
        label: label.to_string(),
        checked,
        excluded,
        max_rel_error: max_rel,
        worst_index: worst,
        tolerance: opts.tolerance,
        passed: max_rel < opts.tolerance,
    }
}
