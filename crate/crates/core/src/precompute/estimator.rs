//! Typical end-to-end time of a hop sequence: earliest-feasible chaining
//! from randomly sampled start times, averaged with outliers removed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{HopId, Network, Schedule};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub sample_count: u32,
    /// Start times are drawn from `[horizon start, horizon start + this)`.
    pub sample_horizon_s: i64,
    /// A sample only considers departures within this span of its start.
    pub per_sample_span_s: i64,
    /// A sample is an outlier when it differs from the mean by more than
    /// `max(outlier_floor_s, outlier_fraction * mean)`.
    pub outlier_floor_s: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sample_count: 64,
            sample_horizon_s: 14 * DAY,
            per_sample_span_s: 3 * DAY,
            outlier_floor_s: 7200.0,
            outlier_fraction: 0.5,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 8 {
            return Err(Error::Validation("sample_count must be at least 8".into()));
        }
        if self.sample_horizon_s <= 0 || self.per_sample_span_s <= 0 {
            return Err(Error::Validation("estimator spans must be positive".into()));
        }
        Ok(())
    }

    /// The sampled start times. Every estimate made with this config uses
    /// the same set.
    pub fn sample_times(&self, net: &Network) -> Vec<i64> {
        let (h0, h1) = net.horizon();
        let end = (h0 + self.sample_horizon_s).min(h1).max(h0 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.sample_count).map(|_| rng.gen_range(h0..end)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimate {
    pub typical_s: u32,
    pub min_s: u32,
}

/// Contract check shared by the estimator and the search.
pub fn check_connected(net: &Network, legs: &[HopId]) -> Result<()> {
    if legs.is_empty() {
        return Err(Error::Contract("empty leg sequence".into()));
    }
    for w in legs.windows(2) {
        let (a, b) = (net.hop(w[0]), net.hop(w[1]));
        if net.node_of(a.to) != net.node_of(b.from) {
            return Err(Error::Contract(format!("hops {} and {} are not connected", a.id, b.id)));
        }
    }
    Ok(())
}

/// Boards the first scheduled leg at its earliest departure at or after
/// `t_dep` (less the time needed for any unscheduled legs before it) and
/// chains every later leg at its earliest departure after the previous
/// arrival plus the connection gap. Only departures before `t_dep + span`
/// are considered. Returns `(board, arrive)`; leading unscheduled legs are
/// started as late as possible.
pub fn min_trip_time(net: &Network, legs: &[HopId], t_dep: i64, span: i64) -> Result<Option<(i64, i64)>> {
    check_connected(net, legs)?;
    Ok(chain(net, legs, t_dep, span))
}

pub(crate) fn chain(net: &Network, legs: &[HopId], t_dep: i64, span: i64) -> Option<(i64, i64)> {
    let limit = t_dep.saturating_add(span);
    let mut ready = t_dep;
    let mut board = None;
    for (i, &h) in legs.iter().enumerate() {
        if i > 0 {
            ready += i64::from(net.connection_gap(legs[i - 1], h));
        }
        match &net.hop(h).schedule {
            Schedule::Fixed { duration_s } => ready += i64::from(*duration_s),
            Schedule::Timed(list) => {
                let d = list.next_at_or_after(ready).filter(|d| d.dep_utc < limit)?;
                if board.is_none() {
                    board = Some(d.dep_utc - (ready - t_dep));
                }
                ready = d.arr_utc();
            }
        }
    }
    Some((board.unwrap_or(t_dep), ready))
}

/// Precomputed sample set plus config.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub config: EstimatorConfig,
    samples: Vec<i64>,
}

impl Estimator {
    pub fn new(net: &Network, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let samples = config.sample_times(net);
        Ok(Self { config, samples })
    }

    pub fn samples(&self) -> &[i64] {
        &self.samples
    }

    /// `None` when no sample yields a feasible trip.
    pub fn estimate(&self, net: &Network, legs: &[HopId]) -> Result<Option<Estimate>> {
        check_connected(net, legs)?;
        Ok(self.estimate_unchecked(net, legs))
    }

    pub(crate) fn estimate_unchecked(&self, net: &Network, legs: &[HopId]) -> Option<Estimate> {
        let span = self.config.per_sample_span_s;
        let times: Vec<i64> = self
            .samples
            .iter()
            .filter_map(|&t| chain(net, legs, t, span).map(|(b, a)| a - b))
            .collect();
        let min = *times.iter().min()?;
        let mean = mean(&times);
        let threshold = self.config.outlier_floor_s.max(self.config.outlier_fraction * mean);
        let kept: Vec<i64> = times
            .iter()
            .copied()
            .filter(|&x| (x as f64 - mean).abs() <= threshold)
            .collect();
        let typical = if kept.is_empty() { mean } else { self::mean(&kept) };
        Some(Estimate {
            typical_s: typical.round() as u32,
            min_s: min as u32,
        })
    }
}

fn mean(xs: &[i64]) -> f64 {
    xs.iter().sum::<i64>() as f64 / xs.len() as f64
}

/// One-shot estimate with a fresh sample set.
pub fn estimate_typical_time(net: &Network, legs: &[HopId], config: &EstimatorConfig) -> Result<Option<Estimate>> {
    Estimator::new(net, config.clone())?.estimate(net, legs)
}
