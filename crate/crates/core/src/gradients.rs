//! Flat parameter vectors with named segment layouts, the objective contract
//! for scalar losses with analytic gradients, and an independent central
//! finite-difference verifier.
//!
//! Every loss used for training provides both its value and a hand-derived
//! gradient through [`Objective`]; [`finite_diff_check`] is the oracle that
//! keeps the two consistent. Losses must be deterministic in the parameter
//! vector — any Monte-Carlo noise has to be frozen into the objective before
//! differentiation.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names and index ranges of the parameter blocks inside a flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    segments: Vec<(String, Range<usize>)>,
    len: usize,
}

impl ParamLayout {
    pub fn builder() -> ParamLayoutBuilder {
        ParamLayoutBuilder { segments: Vec::new(), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn segments(&self) -> impl Iterator<Item = (&str, Range<usize>)> {
        self.segments.iter().map(|(n, r)| (n.as_str(), r.clone()))
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.segments
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.clone())
    }

    /// Segment name and offset within it for a flat index.
    pub fn locate(&self, index: usize) -> Option<(&str, usize)> {
        self.segments
            .iter()
            .find(|(_, r)| r.contains(&index))
            .map(|(n, r)| (n.as_str(), index - r.start))
    }
}

pub struct ParamLayoutBuilder {
    segments: Vec<(String, Range<usize>)>,
    len: usize,
}

impl ParamLayoutBuilder {
    /// Appends a segment and returns its index range.
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let range = self.len..self.len + len;
        self.segments.push((name.into(), range.clone()));
        self.len += len;
        range
    }

    pub fn build(self) -> Arc<ParamLayout> {
        Arc::new(ParamLayout { segments: self.segments, len: self.len })
    }
}

/// A flat vector of variational parameters tied to a [`ParamLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Arc<ParamLayout>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.len()];
        Self { values, layout }
    }

    pub fn from_values(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values but layout expects {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.layout.range(name).map(|r| &self.values[r])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.layout.range(name).map(move |r| &mut self.values[r])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A deterministic scalar loss of the variational parameters, together with
/// its analytic gradient.
pub trait Objective {
    fn value(&self, at: &ParamVector) -> f64;

    /// ∂value/∂φ for every component, exact up to floating point.
    fn gradient(&self, at: &ParamVector) -> ParamVector;
}

/// Evaluates the objective's analytic gradient, rejecting non-finite losses.
pub fn grad(obj: &dyn Objective, at: &ParamVector) -> Result<ParamVector> {
    let value = obj.value(at);
    if !value.is_finite() {
        return Err(Error::non_finite("loss", "gradient evaluation"));
    }
    let g = obj.gradient(at);
    if !g.is_finite() {
        return Err(Error::non_finite("gradient", "gradient evaluation"));
    }
    Ok(g)
}

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradReport {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub worst_index: usize,
    /// Segment name and offset of `worst_index`, for readable failures.
    pub worst_segment: Option<(String, usize)>,
    pub passed: bool,
}

/// Central-difference fallback below which a component counts as matched in
/// absolute terms regardless of its relative error.
const ABS_FALLBACK: f64 = 1e-8;

/// Compares `obj`'s analytic gradient against central finite differences with
/// step `h`, componentwise. Passes iff the worst relative difference (with an
/// absolute fallback of 1e-8 for near-zero components) stays below `tol_rel`.
pub fn finite_diff_check(
    obj: &dyn Objective,
    at: &ParamVector,
    h: f64,
    tol_rel: f64,
) -> GradReport {
    assert!(h > 0.0, "finite differences require h > 0");
    let analytic = obj.gradient(at);
    let mut probe = at.clone();

    let mut max_abs_diff = 0.0_f64;
    let mut max_rel_diff = 0.0_f64;
    let mut worst_index = 0usize;
    for i in 0..at.len() {
        let orig = probe.values[i];
        probe.values[i] = orig + h;
        let up = obj.value(&probe);
        probe.values[i] = orig - h;
        let down = obj.value(&probe);
        probe.values[i] = orig;

        let numeric = (up - down) / (2.0 * h);
        let abs_diff = (analytic.values[i] - numeric).abs();
        max_abs_diff = max_abs_diff.max(abs_diff);
        let rel_diff = if abs_diff < ABS_FALLBACK {
            0.0
        } else {
            abs_diff / analytic.values[i].abs().max(numeric.abs())
        };
        if rel_diff > max_rel_diff {
            max_rel_diff = rel_diff;
            worst_index = i;
        }
    }

    GradReport {
        max_abs_diff,
        max_rel_diff,
        worst_index,
        worst_segment: at
            .layout
            .locate(worst_index)
            .map(|(n, off)| (n.to_string(), off)),
        passed: max_rel_diff < tol_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_1d(n: usize) -> Arc<ParamLayout> {
        let mut b = ParamLayout::builder();
        b.push("x", n);
        b.build()
    }

    struct Quadratic;

    impl Objective for Quadratic {
        fn value(&self, at: &ParamVector) -> f64 {
            at.values.iter().map(|v| v * v).sum()
        }
        fn gradient(&self, at: &ParamVector) -> ParamVector {
            let mut g = ParamVector::zeros(at.layout.clone());
            for (gi, v) in g.values.iter_mut().zip(&at.values) {
                *gi = 2.0 * v;
            }
            g
        }
    }

    struct SumLoss;

    impl Objective for SumLoss {
        fn value(&self, at: &ParamVector) -> f64 {
            at.values.iter().sum()
        }
        fn gradient(&self, at: &ParamVector) -> ParamVector {
            let mut g = ParamVector::zeros(at.layout.clone());
            g.values.fill(1.0);
            g
        }
    }

    /// Deliberately doubles the analytic gradient; the negative control.
    struct WrongGradient(Quadratic);

    impl Objective for WrongGradient {
        fn value(&self, at: &ParamVector) -> f64 {
            self.0.value(at)
        }
        fn gradient(&self, at: &ParamVector) -> ParamVector {
            let mut g = self.0.gradient(at);
            for v in &mut g.values {
                *v *= 2.0;
            }
            g
        }
    }

    #[test]
    fn quadratic_gradient_value() {
        let at = ParamVector::from_values(layout_1d(1), vec![3.0]).unwrap();
        let g = grad(&Quadratic, &at).unwrap();
        assert_eq!(g.values, vec![6.0]);
    }

    #[test]
    fn sum_loss_gradient_all_ones() {
        let at = ParamVector::from_values(layout_1d(4), vec![0.3, -2.0, 5.0, 0.0]).unwrap();
        let g = grad(&SumLoss, &at).unwrap();
        assert_eq!(g.values, vec![1.0; 4]);
    }

    #[test]
    fn finite_diff_passes_on_quadratic() {
        let at = ParamVector::from_values(layout_1d(3), vec![1.0, -0.5, 2.0]).unwrap();
        let report = finite_diff_check(&Quadratic, &at, 1e-5, 1e-4);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn finite_diff_flags_wrong_gradient() {
        let at = ParamVector::from_values(layout_1d(3), vec![1.0, -0.5, 2.0]).unwrap();
        let report = finite_diff_check(&WrongGradient(Quadratic), &at, 1e-5, 1e-4);
        assert!(!report.passed);
        // Worst component sits inside the only segment.
        assert_eq!(report.worst_segment.as_ref().unwrap().0, "x");
        assert!(report.max_rel_diff > 0.4);
    }

    #[test]
    fn grad_rejects_non_finite_loss() {
        struct NanLoss;
        impl Objective for NanLoss {
            fn value(&self, _: &ParamVector) -> f64 {
                f64::NAN
            }
            fn gradient(&self, at: &ParamVector) -> ParamVector {
                ParamVector::zeros(at.layout.clone())
            }
        }
        let at = ParamVector::zeros(layout_1d(1));
        assert!(grad(&NanLoss, &at).is_err());
    }

    #[test]
    fn layout_locates_indices() {
        let mut b = ParamLayout::builder();
        b.push("a", 2);
        b.push("b", 3);
        let layout = b.build();
        assert_eq!(layout.locate(0), Some(("a", 0)));
        assert_eq!(layout.locate(4), Some(("b", 2)));
        assert_eq!(layout.locate(5), None);
        assert_eq!(layout.range("b"), Some(2..5));
    }
}
