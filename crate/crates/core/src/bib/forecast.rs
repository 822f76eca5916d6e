//! Minimal forecast models: a threshold detector and a least-squares trend.

use num_traits::Num;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::literal::CmpOp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    /// Fires when the latest value compares true against `bound`.
    Threshold {
        path: String,
        bound: Decimal,
        direction: CmpOp,
    },
    /// Fits a line to the last `window` points and projects one tick ahead.
    LinearExtrapolation {
        path: String,
        window: usize,
        bound: Decimal,
        direction: CmpOp,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub model_id: String,
    pub kind: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOutput {
    pub fired: bool,
    pub projected_value: Decimal,
}

impl ForecastModel {
    pub fn threshold(
        id: impl Into<String>,
        path: impl Into<String>,
        direction: CmpOp,
        bound: Decimal,
    ) -> Self {
        ForecastModel {
            model_id: id.into(),
            kind: ModelKind::Threshold {
                path: path.into(),
                bound,
                direction,
            },
        }
    }

    pub fn linear(
        id: impl Into<String>,
        path: impl Into<String>,
        window: usize,
        direction: CmpOp,
        bound: Decimal,
    ) -> Self {
        ForecastModel {
            model_id: id.into(),
            kind: ModelKind::LinearExtrapolation {
                path: path.into(),
                window,
                bound,
                direction,
            },
        }
    }

    pub fn path(&self) -> &str {
        match &self.kind {
            ModelKind::Threshold { path, .. } | ModelKind::LinearExtrapolation { path, .. } => path,
        }
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        let (path, direction) = match &self.kind {
            ModelKind::Threshold {
                path, direction, ..
            } => (path, direction),
            ModelKind::LinearExtrapolation {
                path,
                window,
                direction,
                ..
            } => {
                if *window < 2 {
                    return Err(format!(
                        "model {}: window must be at least 2, got {window}",
                        self.model_id
                    ));
                }
                (path, direction)
            }
        };
        if path.is_empty() {
            return Err(format!("model {}: empty path", self.model_id));
        }
        if !direction.is_ordering() {
            return Err(format!(
                "model {}: direction must be one of < <= > >=",
                self.model_id
            ));
        }
        Ok(())
    }

    /// Minimum series length accepted by [`ForecastModel::evaluate`].
    pub fn min_points(&self) -> usize {
        match self.kind {
            ModelKind::Threshold { .. } => 1,
            ModelKind::LinearExtrapolation { window, .. } => window,
        }
    }

    /// `series` must be strictly ordered by tick.
    pub fn evaluate(&self, series: &[(i64, Decimal)]) -> Result<ModelOutput, ForecastError> {
        if series.len() < self.min_points() {
            return Err(ForecastError::InsufficientSeries {
                needed: self.min_points(),
                got: series.len(),
            });
        }
        if series.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(ForecastError::Unordered);
        }
        let crosses = |v: Decimal, direction: CmpOp, bound: Decimal| match direction {
            CmpOp::Gt => v > bound,
            CmpOp::Ge => v >= bound,
            CmpOp::Lt => v < bound,
            CmpOp::Le => v <= bound,
            CmpOp::Eq | CmpOp::Ne => false,
        };
        match &self.kind {
            ModelKind::Threshold {
                bound, direction, ..
            } => {
                let latest = series[series.len() - 1].1;
                Ok(ModelOutput {
                    fired: crosses(latest, *direction, *bound),
                    projected_value: latest,
                })
            }
            ModelKind::LinearExtrapolation {
                window,
                bound,
                direction,
                ..
            } => {
                let tail: Vec<(Decimal, Decimal)> = series[series.len() - window..]
                    .iter()
                    .map(|&(t, v)| (Decimal::from(t), v))
                    .collect();
                let next = tail[tail.len() - 1].0 + Decimal::ONE;
                let projected = project_linear(&tail, next).ok_or(ForecastError::Degenerate)?;
                Ok(ModelOutput {
                    fired: crosses(projected, *direction, *bound),
                    projected_value: projected,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForecastError {
    #[error("series has {got} points, model needs {needed}")]
    InsufficientSeries { needed: usize, got: usize },
    #[error("series is not strictly ordered by tick")]
    Unordered,
    #[error("least-squares fit is degenerate")]
    Degenerate,
}

/// Ordinary least-squares line through `points`, evaluated at `at`.
///
/// `None` when all x coordinates coincide.
pub fn project_linear<T>(points: &[(T, T)], at: T) -> Option<T>
where
    T: Num + Copy,
{
    let zero = T::zero();
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (zero, zero, zero, zero, zero);
    for &(x, y) in points {
        n = n + T::one();
        sx = sx + x;
        sy = sy + y;
        sxx = sxx + x * x;
        sxy = sxy + x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom == zero {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Some(intercept + slope * at)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(i: i64) -> Decimal {
        Decimal::from(i)
    }

    #[test]
    fn threshold_fires_strictly_above() {
        let m = ForecastModel::threshold("hot", "temperature", CmpOp::Gt, d(80));
        assert!(m.evaluate(&[(1, d(78)), (2, d(85))]).unwrap().fired);
        let m10 = ForecastModel::threshold("x", "x", CmpOp::Gt, d(10));
        assert!(
            !m10.evaluate(&[(1, d(10)), (2, d(10)), (3, d(10))])
                .unwrap()
                .fired
        );
        let m10 = ForecastModel::threshold("x", "x", CmpOp::Ge, d(10));
        assert!(m10.evaluate(&[(1, d(10))]).unwrap().fired);
    }

    #[test]
    fn linear_projection_on_exact_line() {
        let m = ForecastModel::linear("trend", "x", 3, CmpOp::Gt, d(7));
        let out = m.evaluate(&[(1, d(2)), (2, d(4)), (3, d(6))]).unwrap();
        assert_eq!(out.projected_value, d(8));
        assert!(out.fired);
        // only the last window points count
        let out = m
            .evaluate(&[(0, d(100)), (1, d(2)), (2, d(4)), (3, d(6))])
            .unwrap();
        assert_eq!(out.projected_value, d(8));
    }

    #[test]
    fn generic_over_scalar() {
        let p = project_linear(&[(0.0_f64, 1.0), (1.0, 2.0), (2.0, 3.5)], 3.0).unwrap();
        // slope 1.25, intercept 0.9166..
        assert!((p - (0.75 + 3.0 * 1.25 + 1.0 / 6.0)).abs() < 1e-12);
        assert_eq!(project_linear(&[(1.0_f32, 1.0), (1.0, 2.0)], 2.0), None);
    }

    #[test]
    fn rejects_short_or_unordered_series() {
        let m = ForecastModel::linear("trend", "x", 3, CmpOp::Gt, d(7));
        assert_eq!(
            m.evaluate(&[(1, d(1)), (2, d(2))]),
            Err(ForecastError::InsufficientSeries { needed: 3, got: 2 })
        );
        assert_eq!(
            m.evaluate(&[(1, d(1)), (3, d(2)), (2, d(3))]),
            Err(ForecastError::Unordered)
        );
        assert!(ForecastModel::linear("bad", "x", 1, CmpOp::Gt, d(1))
            .check()
            .is_err());
    }
}
