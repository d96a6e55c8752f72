//! Non-negative step functions with finitely many pieces.
//!
//! These are the test functionals applied to point processes: each piece is a
//! constant value on a half-open interval `(edge[i], edge[i+1]]`, the last
//! piece extends to `+inf`, and the function is zero at and below the first
//! edge. Values may be `+inf` (useful for void functionals, where
//! `exp(-f)` becomes an indicator).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StepFnError {
    #[error("a step function needs at least one edge")]
    Empty,
    #[error("edges and values must have equal length ({edges} edges, {values} values)")]
    LengthMismatch { edges: usize, values: usize },
    #[error("edges must be finite and strictly increasing")]
    EdgesNotIncreasing,
    #[error("step values must be non-negative (may be +inf)")]
    NegativeValue,
}

/// Right-continuous-from-the-left step function: zero on `(-inf, edges[0]]`,
/// equal to `values[i]` on `(edges[i], edges[i+1]]`, and to `values.last()`
/// on `(edges.last(), +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    edges: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self, StepFnError> {
        if edges.is_empty() {
            return Err(StepFnError::Empty);
        }
        if edges.len() != values.len() {
            return Err(StepFnError::LengthMismatch {
                edges: edges.len(),
                values: values.len(),
            });
        }
        if edges.iter().any(|e| !e.is_finite())
            || edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(StepFnError::EdgesNotIncreasing);
        }
        if values.iter().any(|v| *v < 0.0 || v.is_nan()) {
            return Err(StepFnError::NegativeValue);
        }
        Ok(Self { edges, values })
    }

    /// Indicator of `(x, +inf)`.
    pub fn indicator_above(x: f64) -> Self {
        Self {
            edges: vec![x],
            values: vec![1.0],
        }
    }

    /// The function vanishes at and below this point.
    pub fn support_min(&self) -> f64 {
        self.edges[0]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.edges.partition_point(|e| *e < x);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Pieces as `(lo, hi, value)` with `hi = None` for the final unbounded
    /// piece; the function equals `value` on `(lo, hi]`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, Option<f64>, f64)> + '_ {
        self.edges.iter().enumerate().map(move |(i, lo)| {
            let hi = self.edges.get(i + 1).copied();
            (*lo, hi, self.values[i])
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_half_open_pieces() {
        let f = StepFunction::new(vec![0.0, 1.0], vec![1.5, 0.5]).unwrap();
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.0), 0.0); // zero at the left edge itself
        assert_eq!(f.eval(0.5), 1.5);
        assert_eq!(f.eval(1.0), 1.5); // pieces are (lo, hi]
        assert_eq!(f.eval(1.0 + 1e-12), 0.5);
        assert_eq!(f.eval(100.0), 0.5);
    }

    #[test]
    fn indicator_counts_points_above() {
        let f = StepFunction::indicator_above(2.0);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.eval(2.1), 1.0);
        assert_eq!(f.support_min(), 2.0);
    }

    #[test]
    fn rejects_malformed_input() {
        assert_eq!(
            StepFunction::new(vec![], vec![]).unwrap_err(),
            StepFnError::Empty
        );
        assert_eq!(
            StepFunction::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap_err(),
            StepFnError::EdgesNotIncreasing
        );
        assert_eq!(
            StepFunction::new(vec![1.0], vec![-0.5]).unwrap_err(),
            StepFnError::NegativeValue
        );
        assert_eq!(
            StepFunction::new(vec![1.0], vec![1.0, 2.0]).unwrap_err(),
            StepFnError::LengthMismatch { edges: 1, values: 2 }
        );
    }

    #[test]
    fn infinite_values_are_allowed() {
        let f = StepFunction::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        assert!(f.eval(1.0).is_infinite());
        assert!(!f.is_finite());
    }

    #[test]
    fn pieces_roundtrip() {
        let f = StepFunction::new(vec![-1.0, 0.5], vec![2.0, 3.0]).unwrap();
        let pieces: Vec<_> = f.pieces().collect();
        assert_eq!(pieces, vec![(-1.0, Some(0.5), 2.0), (0.5, None, 3.0)]);
    }
}
