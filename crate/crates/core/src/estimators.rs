//! Exponential moving averages and the rolling volatility / beta estimators.
//!
//! The EMA recursion is `y_t = y_{t-1} + α (x_t - y_{t-1})` with `α = 1/period`,
//! seeded with the first observation. Missing inputs leave the state unchanged.
//! Volatility and beta dated `t` only use returns dated strictly before `t`.

use crate::grid::Grid;
use crate::panel::{IndicatorId, IndicatorPanel, ReturnPanel, TRADING_DAYS};

/// Observations required before an estimator reports a value.
pub const MIN_OBSERVATIONS: usize = 5;
pub const DEFAULT_VOL_PERIOD: usize = 40;
pub const DEFAULT_BETA_PERIOD: usize = 200;
/// Index variance below this is treated as zero.
pub const MIN_INDEX_VARIANCE: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ema {
    alpha: f64,
    value: Option<f64>,
    count: usize,
}

impl Ema {
    /// # Panics
    /// If `period` is zero.
    pub fn new(period: usize) -> Self {
        assert!(period >= 1, "EMA period must be at least one day");
        Self {
            alpha: 1.0 / period as f64,
            value: None,
            count: 0,
        }
    }

    pub fn update(&mut self, x: f64) {
        if x.is_nan() {
            return;
        }
        self.count += 1;
        self.value = Some(match self.value {
            None => x,
            Some(y) => y + self.alpha * (x - y),
        });
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    /// Number of observations absorbed so far.
    pub fn count(&self) -> usize {
        self.count
    }
}

/// EMA of a whole series; `NaN` before the first observation.
pub fn ema(x: &[f64], period: usize) -> Vec<f64> {
    let mut state = Ema::new(period);
    x.iter()
        .map(|v| {
            state.update(*v);
            state.value().unwrap_or(f64::NAN)
        })
        .collect()
}

/// Annualized volatility per asset and date.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    pub values: Grid,
    pub period: usize,
}

impl VolSeries {
    /// Volatility usable as a weighting input: present and strictly positive.
    #[inline]
    pub fn usable(&self, t: usize, a: usize) -> Option<f64> {
        self.values.get(t, a).filter(|s| *s > 0.0)
    }

    pub fn truncate(&self, n: usize) -> VolSeries {
        VolSeries {
            values: self.values.head(n),
            period: self.period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSeries {
    pub values: Grid,
    pub window: usize,
}

impl BetaSeries {
    /// The low-volatility indicator ranks stocks by their market sensitivity.
    pub fn as_indicator(&self) -> IndicatorPanel {
        IndicatorPanel {
            indicator: IndicatorId::LowVolatility,
            values: self.values.clone(),
        }
    }

    pub fn truncate(&self, n: usize) -> BetaSeries {
        BetaSeries {
            values: self.values.head(n),
            window: self.window,
        }
    }
}

/// `σ_i(t) = sqrt(252 · EMA(r_i², period))` over returns before `t`.
///
/// Zero-return histories produce `σ = 0`, which [`VolSeries::usable`] rejects.
pub fn realized_volatility(panel: &ReturnPanel, period: usize) -> VolSeries {
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let mut values = Grid::missing(n, m);
    for a in 0..m {
        let mut state = Ema::new(period);
        for t in 0..n {
            if state.count() >= MIN_OBSERVATIONS {
                let var = state.value().expect("seeded after observations");
                values.set(t, a, (TRADING_DAYS * var).sqrt());
            }
            let r = panel.returns.raw(t, a);
            state.update(r * r);
        }
    }
    VolSeries { values, period }
}

/// `β_i(t) = EMA(r_i r_m) / EMA(r_m²)` over days before `t` where both
/// the asset and the index have a return.
pub fn estimate_beta(panel: &ReturnPanel, window: usize) -> BetaSeries {
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let mut values = Grid::missing(n, m);
    for a in 0..m {
        let mut cross = Ema::new(window);
        let mut index_var = Ema::new(window);
        for t in 0..n {
            if cross.count() >= MIN_OBSERVATIONS {
                let var = index_var.value().expect("seeded");
                if var >= MIN_INDEX_VARIANCE {
                    values.set(t, a, cross.value().expect("seeded") / var);
                }
            }
            let (r, rm) = (panel.returns.raw(t, a), panel.index_returns[t]);
            if r.is_finite() && rm.is_finite() {
                cross.update(r * rm);
                index_var.update(rm * rm);
            }
        }
    }
    BetaSeries { values, window }
}
