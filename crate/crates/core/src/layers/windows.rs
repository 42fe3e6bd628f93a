//! Time windows and weighted (temporal) relationship strength.

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use super::{LayerError, LayerKey, RoleIndex};
use crate::flatten::Naming;
use crate::model::{PreSocialNetwork, TimeRange, Timestamp, UserId};

/// Upper bound on the number of windows a spec may produce.
pub const MAX_WINDOWS: usize = 100_000;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("window length and step must be positive")]
    NonPositiveDuration,
    #[error("step {step} is longer than window length {length}; the range cannot be covered")]
    UncoverableRange { length: Ratio<i64>, step: Ratio<i64> },
    #[error("the number of periods must be at least 1")]
    ZeroPeriods,
    #[error("spec would produce more than {MAX_WINDOWS} windows")]
    TooManyWindows,
    #[error("{got} weights given for {expected} windows")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be finite, non-negative and sum to 1 (sum = {0})")]
    InvalidWeights(f64),
    #[error(transparent)]
    Layer(#[from] LayerError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowMode {
    /// Windows of `length` whose start moves by `step`.
    Sliding { length: Ratio<i64>, step: Ratio<i64> },
    /// `k` disjoint windows of equal length.
    EqualPeriods { k: u32 },
}

impl WindowMode {
    pub fn sliding(length: i64, step: i64) -> Self {
        WindowMode::Sliding {
            length: Ratio::from_integer(length),
            step: Ratio::from_integer(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindowSpec {
    pub mode: WindowMode,
    /// Per-window weights, oldest first. `None` selects [`linear_weights`].
    pub weights: Option<Vec<f64>>,
}

impl TimeWindowSpec {
    pub fn new(mode: WindowMode) -> Self {
        TimeWindowSpec { mode, weights: None }
    }

    /// Weights for `count` windows, validated.
    pub fn weights_for(&self, count: usize) -> Result<Vec<f64>, WindowError> {
        let Some(w) = &self.weights else {
            return Ok(linear_weights(count));
        };
        if w.len() != count {
            return Err(WindowError::WeightCount { expected: count, got: w.len() });
        }
        let sum: f64 = w.iter().sum();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(WindowError::InvalidWeights(sum));
        }
        Ok(w.clone())
    }
}

/// `w_i = 2i / (m(m+1))` for window `i = 1..=m`, so the most recent window
/// weighs most and the weights sum to 1.
pub fn linear_weights(m: usize) -> Vec<f64> {
    let denom = (m * (m + 1)) as f64;
    (1..=m).map(|i| 2.0 * i as f64 / denom).collect()
}

/// Half-open `[start, end)` interval, closed on the right for the last window
/// so the end of the observation range is covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub start: Ratio<i64>,
    pub end: Ratio<i64>,
    pub closed: bool,
}

impl Window {
    pub fn contains(&self, t: Timestamp) -> bool {
        let t = Ratio::from_integer(t);
        self.start <= t && (t < self.end || (self.closed && t == self.end))
    }
}

/// Splits `range` into ordered windows.
///
/// Sliding windows start at the range start and move by `step` until one
/// reaches the range end; that last window is clipped to the end.
pub fn make_windows(mode: &WindowMode, range: TimeRange) -> Result<Vec<Window>, WindowError> {
    let start = Ratio::from_integer(range.start);
    let end = Ratio::from_integer(range.end);
    let zero = Ratio::from_integer(0);
    match mode {
        WindowMode::Sliding { length, step } => {
            if *length <= zero || *step <= zero {
                return Err(WindowError::NonPositiveDuration);
            }
            if step > length {
                return Err(WindowError::UncoverableRange { length: *length, step: *step });
            }
            if range.is_empty() {
                return Ok(vec![Window { start, end: start, closed: true }]);
            }
            let mut windows = Vec::new();
            let mut k: i64 = 0;
            loop {
                let s = start + *step * k;
                let e = s + *length;
                if e >= end {
                    windows.push(Window { start: s, end, closed: true });
                    return Ok(windows);
                }
                windows.push(Window { start: s, end: e, closed: false });
                if windows.len() >= MAX_WINDOWS {
                    return Err(WindowError::TooManyWindows);
                }
                k += 1;
            }
        }
        WindowMode::EqualPeriods { k } => {
            if *k == 0 {
                return Err(WindowError::ZeroPeriods);
            }
            if *k as usize > MAX_WINDOWS {
                return Err(WindowError::TooManyWindows);
            }
            if range.is_empty() {
                return Ok(vec![Window { start, end: start, closed: true }]);
            }
            let k = *k as i64;
            let len = end - start;
            Ok((0..k)
                .map(|i| Window {
                    start: start + len * i / k,
                    end: start + len * (i + 1) / k,
                    closed: i + 1 == k,
                })
                .collect())
        }
    }
}

fn strength_in(index: &RoleIndex, x: &UserId, y: &UserId, role_x: &str, role_y: &str) -> Option<f64> {
    let s = if role_x == role_y {
        index.strength_equal(x, y, role_x)
    } else {
        index.strength_diff(x, y, role_x, role_y)
    };
    s.map(|s| s.value())
}

/// Weighted sum of per-window strengths from `x` (doing `role_x`) to `y`
/// (doing `role_y`) over the network's observation range. `None` when no
/// window yields a relationship.
pub fn windowed_strength(
    net: &PreSocialNetwork,
    naming: &Naming,
    x: &UserId,
    y: &UserId,
    role_x: &str,
    role_y: &str,
    spec: &TimeWindowSpec,
) -> Result<Option<f64>, WindowError> {
    let windows = make_windows(&spec.mode, net.observation())?;
    let weights = spec.weights_for(windows.len())?;
    let mut total = None;
    for (w, weight) in windows.iter().zip(weights) {
        let index = RoleIndex::filtered(net, naming, |a| w.contains(a.timestamp))?;
        if let Some(s) = strength_in(&index, x, y, role_x, role_y) {
            *total.get_or_insert(0.0) += weight * s;
        }
    }
    Ok(total)
}

/// Windowed strength of one directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedEdge {
    pub from: UserId,
    pub to: UserId,
    pub from_role: String,
    pub to_role: String,
    pub layer: LayerKey,
    pub strength: f64,
}

/// Windowed strengths for every edge of the given layers, keeping only
/// positive values. Sorted by (layer, from_role, from, to).
pub fn windowed_edges(
    net: &PreSocialNetwork,
    naming: &Naming,
    layers: &[LayerKey],
    spec: &TimeWindowSpec,
) -> Result<Vec<WindowedEdge>, WindowError> {
    let windows = make_windows(&spec.mode, net.observation())?;
    let weights = spec.weights_for(windows.len())?;
    type Key = (LayerKey, String, UserId, UserId, String);
    let mut acc: BTreeMap<Key, f64> = BTreeMap::new();
    for (w, weight) in windows.iter().zip(weights) {
        let index = RoleIndex::filtered(net, naming, |a| w.contains(a.timestamp))?;
        for key in layers {
            for e in index.layer_edges(key) {
                let k = (key.clone(), e.from_role, e.from, e.to, e.to_role);
                *acc.entry(k).or_default() += weight * e.strength.value();
            }
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|((layer, from_role, from, to, to_role), strength)| WindowedEdge {
            from,
            to,
            from_role,
            to_role,
            layer,
            strength,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64) -> Ratio<i64> {
        Ratio::from_integer(n)
    }

    #[test]
    fn equal_periods_of_100() {
        let w = make_windows(&WindowMode::EqualPeriods { k: 4 }, TimeRange::new(0, 100)).unwrap();
        let bounds: Vec<_> = w.iter().map(|w| (w.start, w.end, w.closed)).collect();
        assert_eq!(
            bounds,
            [
                (r(0), r(25), false),
                (r(25), r(50), false),
                (r(50), r(75), false),
                (r(75), r(100), true)
            ]
        );
    }

    #[test]
    fn sliding_50_by_25() {
        let w = make_windows(&WindowMode::sliding(50, 25), TimeRange::new(0, 100)).unwrap();
        let bounds: Vec<_> = w.iter().map(|w| (w.start, w.end)).collect();
        assert_eq!(bounds, [(r(0), r(50)), (r(25), r(75)), (r(50), r(100))]);
        assert!(w[2].contains(100));
        assert!(!w[0].contains(50));
        assert!(w[1].contains(50) && w[2].contains(50));
    }

    #[test]
    fn sliding_clips_last_window() {
        let w = make_windows(&WindowMode::sliding(50, 25), TimeRange::new(0, 110)).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[3].end, r(110));
    }

    #[test]
    fn bad_specs() {
        let range = TimeRange::new(0, 10);
        assert!(matches!(
            make_windows(&WindowMode::sliding(2, 5), range),
            Err(WindowError::UncoverableRange { .. })
        ));
        assert!(matches!(
            make_windows(&WindowMode::sliding(0, 0), range),
            Err(WindowError::NonPositiveDuration)
        ));
        assert!(matches!(
            make_windows(&WindowMode::EqualPeriods { k: 0 }, range),
            Err(WindowError::ZeroPeriods)
        ));
        assert!(matches!(
            make_windows(&WindowMode::sliding(1, 1), TimeRange::new(0, 10_000_000)),
            Err(WindowError::TooManyWindows)
        ));
    }

    #[test]
    fn weights() {
        let w = linear_weights(3);
        assert_eq!(w, [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]);
        let spec = TimeWindowSpec { mode: WindowMode::EqualPeriods { k: 2 }, weights: Some(vec![0.5, 0.6]) };
        assert!(matches!(spec.weights_for(2), Err(WindowError::InvalidWeights(_))));
        assert!(matches!(spec.weights_for(3), Err(WindowError::WeightCount { .. })));
    }

    proptest! {
        #[test]
        fn equal_periods_match_sliding(start in -1_000_000i64..1_000_000, len in 1i64..10_000_000, k in 1u32..50) {
            let range = TimeRange::new(start, start + len);
            let eq = make_windows(&WindowMode::EqualPeriods { k }, range).unwrap();
            let d = Ratio::new(len, k as i64);
            let sl = make_windows(&WindowMode::Sliding { length: d, step: d }, range).unwrap();
            prop_assert_eq!(eq, sl);
        }

        #[test]
        fn every_timestamp_is_covered(start in -1000i64..1000, len in 1i64..5000, length in 1i64..400, step_frac in 1i64..=100) {
            let step = (length * step_frac / 100).max(1);
            let range = TimeRange::new(start, start + len);
            let ws = make_windows(&WindowMode::sliding(length, step), range).unwrap();
            for t in (range.start..=range.end).step_by(7).chain([range.end]) {
                prop_assert!(ws.iter().any(|w| w.contains(t)));
            }
        }
    }
}
