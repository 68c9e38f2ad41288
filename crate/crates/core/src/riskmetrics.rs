//! Factor correlation level (FCL), net investment and inter-factor correlations.
//!
//! The FCL of a factor compares the realized variance of the factor return to
//! the variance it would have if its constituents were uncorrelated:
//!
//! ```text
//! FCL(t) = sqrt( EMA{ r_π(t)² } / EMA{ Σ_i w_i(t)² σ_i(t)² } )
//! ```
//!
//! Both EMAs are in daily units; annualized volatilities are divided by 252.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::estimators::{Ema, VolSeries};
use crate::factor::{FactorReturnSeries, FactorWeightSeries, QuantileBand};
use crate::grid::{pearson, Grid};
use crate::panel::{IndicatorId, TRADING_DAYS};

pub const DEFAULT_FCL_PERIOD: usize = 200;
/// EMA updates required before the FCL is reported.
pub const FCL_BURN_IN: usize = 40;
/// EMA periods of accumulation after which the seed observation weighs
/// less than `(1 - 1/p)^(2p) ≈ e^-2` in the FCL.
pub const FCL_SETTLE_PERIODS: usize = 2;
pub const MIN_FCL_DENOMINATOR: f64 = 1e-18;
pub const NORMALIZATION_WINDOW: usize = 20;
pub const ROLLING_WINDOW: usize = 90;
/// Fewer common days than this make an inter-factor correlation meaningless.
pub const MIN_CORRELATION_OVERLAP: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FclSeries {
    pub indicator: IndicatorId,
    pub band: QuantileBand,
    pub dates: Vec<NaiveDate>,
    /// `NaN` while missing.
    pub fcl: Vec<f64>,
    pub num_ema: Vec<f64>,
    pub den_ema: Vec<f64>,
    /// EMA updates up to and including each day.
    pub updates: Vec<usize>,
    pub period: usize,
}

impl FclSeries {
    /// Time average over the days with a reported value.
    pub fn mean(&self) -> Option<f64> {
        let valid: Vec<f64> = self.fcl.iter().copied().filter(|v| v.is_finite()).collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }

    /// Time average over the days after [`FCL_SETTLE_PERIODS`] periods of
    /// accumulation, when the first squared return no longer dominates.
    pub fn settled_mean(&self) -> Option<f64> {
        let start = FCL_SETTLE_PERIODS * self.period;
        let valid: Vec<f64> = self
            .fcl
            .iter()
            .zip(&self.updates)
            .filter(|(v, k)| v.is_finite() && **k >= start)
            .map(|(v, _)| *v)
            .collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }

    /// Last reported value.
    pub fn last(&self) -> Option<f64> {
        self.fcl.iter().rev().copied().find(|v| v.is_finite())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_fcl_csv(std::slice::from_ref(self), out)
    }
}

/// Writes `date,indicator_id,band,fcl` rows for the days with a value.
pub fn write_fcl_csv<W: Write>(series: &[FclSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "indicator_id", "band", "fcl"])?;
    for s in series {
        for (d, v) in s.dates.iter().zip(&s.fcl) {
            if v.is_finite() {
                w.write_record([d.to_string(), s.indicator.to_string(), s.band.to_string(), format!("{v:.8}")])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Factor correlation level of one factor.
///
/// Days on which the factor holds no position do not update either EMA.
pub fn fcl(returns: &FactorReturnSeries, weights: &FactorWeightSeries, vols: &VolSeries, period: usize) -> Result<FclSeries> {
    let n = weights.n_dates();
    if returns.returns.len() != n || vols.values.rows() != n || vols.values.cols() != weights.weights.cols() {
        return Err(Error::InvalidInput("FCL inputs are not date-aligned".into()));
    }
    let mut num = Ema::new(period);
    let mut den = Ema::new(period);
    let (mut fcl, mut num_ema, mut den_ema) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
    let mut updates = vec![0; n];
    for t in 0..n {
        let w = weights.weights.row(t);
        let sigma = vols.values.row(t);
        let mut independent = 0.0;
        let mut active = false;
        for (wi, si) in w.iter().zip(sigma) {
            if *wi != 0.0 {
                active = true;
                if si.is_finite() {
                    independent += wi * wi * si * si / TRADING_DAYS;
                }
            }
        }
        let r = returns.returns[t];
        if active && r.is_finite() {
            num.update(r * r);
            den.update(independent);
        }
        updates[t] = num.count();
        if let (Some(a), Some(b)) = (num.value(), den.value()) {
            num_ema[t] = a;
            den_ema[t] = b;
            if num.count() >= FCL_BURN_IN && b >= MIN_FCL_DENOMINATOR {
                fcl[t] = (a / b).sqrt();
            }
        }
    }
    Ok(FclSeries {
        indicator: weights.indicator,
        band: weights.band,
        dates: weights.dates.clone(),
        fcl,
        num_ema,
        den_ema,
        updates,
        period,
    })
}

/// `Δ = Σ w_i / Σ |w_i|`; `None` for an empty portfolio.
pub fn net_investment(weights: &[f64]) -> Option<f64> {
    let gross: f64 = weights.iter().map(|w| w.abs()).sum();
    (gross > 0.0).then(|| (weights.iter().sum::<f64>() / gross).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSeries {
    pub dates: Vec<NaiveDate>,
    pub delta: Vec<f64>,
}

impl DeltaSeries {
    pub fn from_weights(weights: &FactorWeightSeries) -> Self {
        Self {
            dates: weights.dates.clone(),
            delta: (0..weights.n_dates())
                .map(|t| net_investment(weights.weights.row(t)).unwrap_or(f64::NAN))
                .collect(),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        let valid: Vec<f64> = self.delta.iter().copied().filter(|v| v.is_finite()).collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

/// Net investment of a beta-neutral portfolio implied by its leg betas:
/// `(⟨β_S⟩ − ⟨β_L⟩) / (⟨β_S⟩ + ⟨β_L⟩)`.
pub fn delta_from_betas(beta_long_avg: f64, beta_short_avg: f64) -> Option<f64> {
    let s = beta_short_avg + beta_long_avg;
    (s != 0.0).then(|| (beta_short_avg - beta_long_avg) / s)
}

/// Beta of a dollar-neutral portfolio with net investment `delta`: `−2 ⟨β⟩ Δ`.
pub fn ff_beta(delta: f64, avg_beta: f64) -> f64 {
    -2.0 * avg_beta * delta
}

/// Divides each return by `sqrt(EMA(r², window))` computed on earlier days.
///
/// The first day and days with a zero volatility estimate are `NaN`.
pub fn normalize_by_ema_vol(returns: &[f64], window: usize) -> Vec<f64> {
    let mut var = Ema::new(window);
    returns
        .iter()
        .map(|r| {
            let out = match var.value() {
                Some(v) if v > 0.0 => r / v.sqrt(),
                _ => f64::NAN,
            };
            var.update(r * r);
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorCorrelationMatrix {
    pub ids: Vec<String>,
    /// Symmetric with unit diagonal.
    pub matrix: Grid,
    /// Common days used.
    pub n_obs: usize,
    pub vol_window: usize,
}

impl FactorCorrelationMatrix {
    /// Standard deviation of a correlation estimate between independent Gaussian series, `1/√m`.
    pub fn standard_error(&self) -> f64 {
        1.0 / (self.n_obs as f64).sqrt()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.ids.iter().position(|x| x == a)?;
        let j = self.ids.iter().position(|x| x == b)?;
        Some(self.matrix.raw(i, j))
    }

    /// Square CSV with the factor ids as header row and first column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.matrix.row(i).iter().map(|v| format!("{v:.6}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pearson correlations of volatility-normalized factor returns over the
/// dates on which every normalized series is present.
pub fn interfactor_correlation(factors: &[FactorReturnSeries], vol_window: usize) -> Result<FactorCorrelationMatrix> {
    if factors.len() < 2 {
        return Err(Error::InvalidInput("need at least two factors".into()));
    }
    let k = factors.len();
    let mut by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (i, f) in factors.iter().enumerate() {
        for (d, v) in f.dates.iter().zip(normalize_by_ema_vol(&f.returns, vol_window)) {
            by_date.entry(*d).or_insert_with(|| vec![f64::NAN; k])[i] = v;
        }
    }
    let rows: Vec<Vec<f64>> = by_date.into_values().filter(|r| r.iter().all(|v| v.is_finite())).collect();
    let n_obs = rows.len();
    if n_obs < MIN_CORRELATION_OVERLAP {
        return Err(Error::InsufficientData(format!(
            "{n_obs} common days, at least {MIN_CORRELATION_OVERLAP} required"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    let mut matrix = Grid::filled(k, k, 1.0);
    for i in 0..k {
        for j in i + 1..k {
            let c = pearson(&columns[i], &columns[j]).unwrap_or(f64::NAN);
            matrix.set(i, j, c);
            matrix.set(j, i, c);
        }
    }
    Ok(FactorCorrelationMatrix {
        ids: factors.iter().map(FactorReturnSeries::id).collect(),
        matrix,
        n_obs,
        vol_window,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingCorrelation {
    /// `NaN` until a full window of normalized returns is available.
    pub values: Vec<f64>,
    pub window: usize,
    /// Standard deviation of the estimator for independent series, `1/√window`.
    pub band: f64,
}

/// Trailing-window Pearson correlation of two vol-normalized series.
pub fn rolling_correlation(a: &[f64], b: &[f64], window: usize, vol_window: usize) -> Result<RollingCorrelation> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("series are not aligned".into()));
    }
    if window < 2 {
        return Err(Error::InvalidInput("rolling window must cover at least two days".into()));
    }
    let (na, nb) = (normalize_by_ema_vol(a, vol_window), normalize_by_ema_vol(b, vol_window));
    let values = (0..a.len())
        .map(|t| {
            if t + 1 < window {
                return f64::NAN;
            }
            let (xa, xb) = (&na[t + 1 - window..=t], &nb[t + 1 - window..=t]);
            if xa.iter().chain(xb).any(|v| !v.is_finite()) {
                return f64::NAN;
            }
            pearson(xa, xb).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(RollingCorrelation {
        values,
        window,
        band: 1.0 / (window as f64).sqrt(),
    })
}
