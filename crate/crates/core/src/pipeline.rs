//! Glue between ingested (or synthetic) data and the factor builder.

use log::debug;

use crate::error::{Error, Result};
use crate::estimators::{estimate_beta, realized_volatility, BetaSeries, VolSeries, DEFAULT_BETA_PERIOD, DEFAULT_VOL_PERIOD};
use crate::factor::{
    build_factor, factor_return, normalize_by_country, FactorReturnSeries, FactorWeightSeries, QuantileBand, SupersectorMap,
};
use crate::panel::{
    derive_liquidity, derive_momentum, Classification, IndicatorId, IndicatorPanel, IndicatorSet, ReturnPanel, LIQUIDITY_PERIOD,
    MOMENTUM_PERIOD,
};
use crate::riskmetrics::{fcl, FclSeries, DEFAULT_FCL_PERIOD};
use crate::synth::SyntheticMarket;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Periods {
    pub vol: usize,
    pub beta: usize,
    pub fcl: usize,
    pub momentum: usize,
    pub liquidity: usize,
}

impl Default for Periods {
    fn default() -> Self {
        Self {
            vol: DEFAULT_VOL_PERIOD,
            beta: DEFAULT_BETA_PERIOD,
            fcl: DEFAULT_FCL_PERIOD,
            momentum: MOMENTUM_PERIOD,
            liquidity: LIQUIDITY_PERIOD,
        }
    }
}

/// Everything the factor builder reads, aligned on one return panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub panel: ReturnPanel,
    /// Published indicators as ingested.
    pub indicators: IndicatorSet,
    pub classification: Classification,
    pub supersectors: Vec<u8>,
}

impl MarketData {
    pub fn new(panel: ReturnPanel, indicators: IndicatorSet, classification: Classification, map: &SupersectorMap) -> Result<Self> {
        let supersectors = map.assign(&classification)?;
        Ok(Self {
            panel,
            indicators,
            classification,
            supersectors,
        })
    }

    pub fn from_synthetic(market: &SyntheticMarket) -> Self {
        Self {
            panel: market.panel.clone(),
            indicators: market.indicators.clone(),
            classification: market.classification.clone(),
            supersectors: market.truth.supersectors.clone(),
        }
    }

    /// Keeps the first `n` return days.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            panel: self.panel.truncate(n),
            indicators: self.indicators.iter().map(|(k, v)| (*k, v.truncate(n))).collect(),
            classification: self.classification.clone(),
            supersectors: self.supersectors.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub vols: VolSeries,
    pub betas: BetaSeries,
}

pub fn estimate(panel: &ReturnPanel, periods: &Periods) -> Estimates {
    Estimates {
        vols: realized_volatility(panel, periods.vol),
        betas: estimate_beta(panel, periods.beta),
    }
}

/// The raw indicator behind one factor. Momentum and liquidity are derived
/// from prices, low volatility is the estimated beta. `Noise` ranks assets
/// by a permutation drawn from `noise_seed` (alphabetically when `None`).
pub fn factor_indicator(
    data: &MarketData,
    estimates: &Estimates,
    id: IndicatorId,
    periods: &Periods,
    noise_seed: Option<u64>,
) -> Result<IndicatorPanel> {
    let published = |id: IndicatorId| {
        data.indicators
            .get(&id)
            .ok_or_else(|| Error::InsufficientData(format!("no {id} publications in the indicator file")))
    };
    Ok(match id {
        IndicatorId::Momentum => derive_momentum(&data.panel, &data.classification, periods.momentum),
        IndicatorId::Liquidity => derive_liquidity(&data.panel, published(IndicatorId::Capitalization)?, periods.liquidity)?,
        IndicatorId::LowVolatility => estimates.betas.as_indicator(),
        IndicatorId::Noise => crate::factor::noise_indicator(&data.panel, noise_seed),
        other => published(other)?.clone(),
    })
}

/// [`factor_indicator`] divided by its country median where it is a ratio.
pub fn ranking_indicator(
    data: &MarketData,
    estimates: &Estimates,
    id: IndicatorId,
    periods: &Periods,
    noise_seed: Option<u64>,
) -> Result<IndicatorPanel> {
    let raw = factor_indicator(data, estimates, id, periods, noise_seed)?;
    let (normalized, report) = normalize_by_country(&raw, &data.classification);
    if !report.unnormalized.is_empty() {
        debug!("{id}: {} country-days left raw", report.unnormalized.len());
    }
    Ok(normalized)
}

/// One factor built with the standard rules, with its returns and FCL.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltFactor {
    pub weights: FactorWeightSeries,
    pub returns: FactorReturnSeries,
    pub fcl: FclSeries,
}

pub fn build_standard_factor(
    data: &MarketData,
    estimates: &Estimates,
    id: IndicatorId,
    band: QuantileBand,
    periods: &Periods,
    noise_seed: Option<u64>,
) -> Result<BuiltFactor> {
    let indicator = ranking_indicator(data, estimates, id, periods, noise_seed)?;
    let weights = build_factor(&indicator, &data.panel, &estimates.vols, &estimates.betas, band, &data.supersectors)?;
    let returns = factor_return(&weights, &data.panel);
    let fcl = fcl(&returns, &weights, &estimates.vols, periods.fcl)?;
    Ok(BuiltFactor { weights, returns, fcl })
}
