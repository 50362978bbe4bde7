//! Per-beacon distance-stream filters: moving average, exponential moving
//! average and a static-model Kalman filter.
//!
//! Filters apply to the beacon distance streams before solving, never to
//! solved positions. The Kalman gain uses K = P / (P + r); with q = 0 and a
//! constant input the covariance contracts monotonically and the estimate
//! converges on the input.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Filter selection and parameters as they appear in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterConfig {
    None,
    MovingAverage { window: usize },
    Ema { alpha: f64 },
    Kalman { r: f64, q: f64, p0: f64 },
}

impl FilterConfig {
    /// Default smoothing window: 10 samples averages out the occasional
    /// echo-delay outlier while staying responsive at tens of Hz.
    pub fn default_moving_average() -> Self {
        FilterConfig::MovingAverage { window: 10 }
    }

    /// Default smoothing factor for the exponential filter.
    pub fn default_ema() -> Self {
        FilterConfig::Ema { alpha: 0.15 }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            FilterConfig::None => Ok(()),
            FilterConfig::MovingAverage { window } => {
                if window >= 1 {
                    Ok(())
                } else {
                    Err("moving_average window must be >= 1".into())
                }
            }
            FilterConfig::Ema { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(format!("ema alpha {alpha} must be in (0, 1]"))
                }
            }
            FilterConfig::Kalman { r, q, p0 } => {
                if r <= 0.0 {
                    Err(format!("kalman r {r} must be > 0"))
                } else if q < 0.0 {
                    Err(format!("kalman q {q} must be >= 0"))
                } else if p0 < 0.0 {
                    Err(format!("kalman p0 {p0} must be >= 0"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Running filter state for one distance stream.
#[derive(Debug, Clone)]
pub enum FilterState {
    None,
    MovingAverage { window: usize, buf: VecDeque<f64> },
    Ema { alpha: f64, last: Option<f64> },
    Kalman { x: Option<f64>, p: f64, r: f64, q: f64, p0: f64 },
}

impl FilterState {
    pub fn new(cfg: FilterConfig) -> Self {
        match cfg {
            FilterConfig::None => FilterState::None,
            FilterConfig::MovingAverage { window } => FilterState::MovingAverage {
                window: window.max(1),
                buf: VecDeque::with_capacity(window.max(1)),
            },
            FilterConfig::Ema { alpha } => FilterState::Ema { alpha, last: None },
            FilterConfig::Kalman { r, q, p0 } => FilterState::Kalman { x: None, p: p0, r, q, p0 },
        }
    }

    /// Forget history; next sample passes through like the first one.
    /// Used when a beacon is reacquired after ghost rejection so stale
    /// confidence does not suppress the fresh measurements.
    pub fn reset(&mut self) {
        match self {
            FilterState::None => {}
            FilterState::MovingAverage { buf, .. } => buf.clear(),
            FilterState::Ema { last, .. } => *last = None,
            FilterState::Kalman { x, p, p0, .. } => {
                *x = None;
                *p = *p0;
            }
        }
    }

    pub fn step(&mut self, sample: f64) -> f64 {
        match self {
            FilterState::None => sample,
            FilterState::MovingAverage { window, buf } => {
                if buf.len() == *window {
                    buf.pop_front();
                }
                buf.push_back(sample);
                buf.iter().sum::<f64>() / buf.len() as f64
            }
            FilterState::Ema { alpha, last } => {
                let s = match *last {
                    None => sample,
                    Some(prev) => *alpha * sample + (1.0 - *alpha) * prev,
                };
                *last = Some(s);
                s
            }
            FilterState::Kalman { x, p, r, q, .. } => match x {
                None => {
                    // first sample initializes the state; covariance already
                    // holds p0 and then takes the predict step
                    *x = Some(sample);
                    *p += *q;
                    sample
                }
                Some(est) => {
                    let k = *p / (*p + *r);
                    let new = *est + k * (sample - *est);
                    *est = new;
                    *p = (1.0 - k) * *p;
                    *p += *q;
                    new
                }
            },
        }
    }

    /// Kalman gain the next update will use, if this is a Kalman filter.
    pub fn kalman_gain(&self) -> Option<f64> {
        match self {
            FilterState::Kalman { p, r, .. } => Some(p / (p + r)),
            _ => None,
        }
    }
}
