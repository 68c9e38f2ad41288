//! Aligned return and indicator panels.
//!
//! A [`ReturnPanel`] is built from a close-price file over a trading calendar.
//! Return row `t` belongs to calendar day `t + 1`: the first calendar day only
//! provides the base price. Indicator panels share the return rows and hold
//! point-in-time values, so a value stored at date `t` was published strictly
//! before `t`.

mod derive;
mod ingest;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub use derive::{derive_liquidity, derive_momentum, MOMENTUM_PERIOD, LIQUIDITY_PERIOD};
pub use ingest::{
    ingest_classification, ingest_indicators, ingest_prices, price_file_calendar, INDEX_ASSET_ID,
};

/// Trading days per year, used for every annualization.
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndicatorId {
    Dividend,
    Capitalization,
    Liquidity,
    Momentum,
    LowVolatility,
    Leverage,
    SalesToMarket,
    BookToMarket,
    Remuneration,
    Cash,
    Noise,
}

impl IndicatorId {
    /// The ten indicator-based factors, in reporting order.
    pub const FACTORS: [IndicatorId; 10] = [
        IndicatorId::Dividend,
        IndicatorId::Capitalization,
        IndicatorId::Liquidity,
        IndicatorId::Momentum,
        IndicatorId::LowVolatility,
        IndicatorId::Leverage,
        IndicatorId::SalesToMarket,
        IndicatorId::BookToMarket,
        IndicatorId::Remuneration,
        IndicatorId::Cash,
    ];

    /// Indicators published by companies (as opposed to derived from prices).
    pub const PUBLISHED: [IndicatorId; 7] = [
        IndicatorId::Dividend,
        IndicatorId::Capitalization,
        IndicatorId::Leverage,
        IndicatorId::SalesToMarket,
        IndicatorId::BookToMarket,
        IndicatorId::Remuneration,
        IndicatorId::Cash,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorId::Dividend => "dividend",
            IndicatorId::Capitalization => "capitalization",
            IndicatorId::Liquidity => "liquidity",
            IndicatorId::Momentum => "momentum",
            IndicatorId::LowVolatility => "low_volatility",
            IndicatorId::Leverage => "leverage",
            IndicatorId::SalesToMarket => "sales_to_market",
            IndicatorId::BookToMarket => "book_to_market",
            IndicatorId::Remuneration => "remuneration",
            IndicatorId::Cash => "cash",
            IndicatorId::Noise => "noise",
        }
    }

    /// Ratio indicators are normalized multiplicatively by the country median.
    pub fn is_ratio(self) -> bool {
        matches!(
            self,
            IndicatorId::Remuneration
                | IndicatorId::Capitalization
                | IndicatorId::Liquidity
                | IndicatorId::Dividend
                | IndicatorId::Leverage
                | IndicatorId::SalesToMarket
                | IndicatorId::BookToMarket
                | IndicatorId::Cash
        )
    }
}

impl fmt::Display for IndicatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndicatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::FACTORS
            .iter()
            .chain(std::iter::once(&IndicatorId::Noise))
            .find(|id| id.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown indicator id {s:?}")))
    }
}

/// Daily simple returns of an aligned asset universe plus the market index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Price days. `calendar.len() == dates.len() + 1`.
    pub calendar: Vec<NaiveDate>,
    /// Return days.
    pub dates: Vec<NaiveDate>,
    /// Asset ids, sorted ascending.
    pub assets: Vec<String>,
    /// `dates × assets`.
    pub returns: Grid,
    pub index_returns: Vec<f64>,
    /// `calendar × assets` close prices.
    pub closes: Grid,
    /// `calendar × assets` traded volume, when the price file carried it.
    pub volumes: Option<Grid>,
}

impl ReturnPanel {
    /// Builds returns `p_t / p_{t-1} - 1` from aligned close prices.
    ///
    /// `assets` must be sorted and unique; `closes` is `calendar × assets`.
    pub fn from_prices(
        calendar: Vec<NaiveDate>,
        assets: Vec<String>,
        closes: Grid,
        index_levels: &[f64],
        volumes: Option<Grid>,
    ) -> Result<Self> {
        if calendar.len() < 2 {
            return Err(Error::InsufficientData(
                "calendar needs at least two days to form a return".into(),
            ));
        }
        if calendar.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("calendar dates must be strictly increasing".into()));
        }
        if assets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("asset ids must be sorted and unique".into()));
        }
        if closes.rows() != calendar.len() || closes.cols() != assets.len() {
            return Err(Error::InvalidInput("close matrix shape does not match calendar × assets".into()));
        }
        if index_levels.len() != calendar.len() {
            return Err(Error::InvalidInput("index level series does not match calendar".into()));
        }
        let n = calendar.len() - 1;
        let mut returns = Grid::missing(n, assets.len());
        for t in 0..n {
            for a in 0..assets.len() {
                if let (Some(p0), Some(p1)) = (closes.get(t, a), closes.get(t + 1, a)) {
                    returns.set(t, a, simple_return(p0, p1));
                }
            }
        }
        let index_returns = (0..n)
            .map(|t| {
                let (p0, p1) = (index_levels[t], index_levels[t + 1]);
                if p0.is_finite() && p1.is_finite() {
                    simple_return(p0, p1)
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(Self {
            dates: calendar[1..].to_vec(),
            calendar,
            assets,
            returns,
            index_returns,
            closes,
            volumes,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn asset_index(&self) -> HashMap<&str, usize> {
        self.assets.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect()
    }

    /// Keeps the first `n_dates` return days.
    pub fn truncate(&self, n_dates: usize) -> ReturnPanel {
        let n = n_dates.min(self.n_dates());
        ReturnPanel {
            calendar: self.calendar[..n + 1].to_vec(),
            dates: self.dates[..n].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns.head(n),
            index_returns: self.index_returns[..n].to_vec(),
            closes: self.closes.head(n + 1),
            volumes: self.volumes.as_ref().map(|v| v.head(n + 1)),
        }
    }
}

fn simple_return(p0: f64, p1: f64) -> f64 {
    p1 / p0 - 1.0
}

/// Point-in-time values of one indicator over the return dates of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPanel {
    pub indicator: IndicatorId,
    /// `dates × assets`, aligned with the originating [`ReturnPanel`].
    pub values: Grid,
}

impl IndicatorPanel {
    pub fn truncate(&self, n_dates: usize) -> IndicatorPanel {
        IndicatorPanel {
            indicator: self.indicator,
            values: self.values.head(n_dates),
        }
    }
}

pub type IndicatorSet = BTreeMap<IndicatorId, IndicatorPanel>;

/// Country and GICS industry group per asset, aligned with panel assets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub country: Vec<String>,
    pub industry_group: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniverseName {
    Europe,
    Uk,
    Us,
    Synthetic,
}

/// The set of assets analysed together in one run.
#[derive(Debug, Clone)]
pub struct AssetUniverse {
    pub name: UniverseName,
    pub assets: Vec<String>,
    pub min_capitalization: f64,
}

impl AssetUniverse {
    /// Keeps panel assets whose latest known capitalization clears the threshold.
    /// Assets without any capitalization observation are kept when the threshold is zero.
    pub fn select(
        name: UniverseName,
        panel: &ReturnPanel,
        capitalization: Option<&IndicatorPanel>,
        min_capitalization: f64,
    ) -> Self {
        let assets = panel
            .assets
            .iter()
            .enumerate()
            .filter(|(a, _)| {
                let last = capitalization.and_then(|cap| {
                    (0..cap.values.rows()).rev().find_map(|t| cap.values.get(t, *a))
                });
                match last {
                    Some(c) => c >= min_capitalization,
                    None => min_capitalization <= 0.0,
                }
            })
            .map(|(_, id)| id.clone())
            .collect();
        Self {
            name,
            assets,
            min_capitalization,
        }
    }

    pub fn contains(&self, asset: &str) -> bool {
        self.assets.binary_search_by(|a| a.as_str().cmp(asset)).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2005, 3, d).unwrap()
    }

    #[test]
    fn two_day_return() {
        let closes = Grid::from_rows(2, 1, vec![100.0, 102.0]);
        let p = ReturnPanel::from_prices(vec![day(1), day(2)], vec!["A".into()], closes, &[1.0, 1.0], None)
            .unwrap();
        assert!((p.returns.raw(0, 0) - 0.02).abs() < 1e-15);
        assert_eq!(p.index_returns, vec![0.0]);
    }

    #[test]
    fn constant_prices_give_exact_zero() {
        let closes = Grid::filled(5, 2, 37.3);
        let cal = (1..=5).map(day).collect();
        let p = ReturnPanel::from_prices(cal, vec!["A".into(), "B".into()], closes, &[5.0; 5], None).unwrap();
        assert!(p.returns.as_slice().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn gap_in_prices_gives_missing_returns() {
        let closes = Grid::from_rows(3, 1, vec![100.0, f64::NAN, 101.0]);
        let p = ReturnPanel::from_prices((1..=3).map(day).collect(), vec!["A".into()], closes, &[1.0; 3], None)
            .unwrap();
        assert_eq!(p.returns.get(0, 0), None);
        assert_eq!(p.returns.get(1, 0), None);
    }

    #[test]
    fn indicator_id_round_trip() {
        for id in IndicatorId::FACTORS {
            assert_eq!(id.as_str().parse::<IndicatorId>().unwrap(), id);
        }
        assert!("salary".parse::<IndicatorId>().is_err());
    }

    #[test]
    fn universe_threshold() {
        let closes = Grid::filled(3, 2, 1.0);
        let p = ReturnPanel::from_prices((1..=3).map(day).collect(), vec!["A".into(), "B".into()], closes, &[1.0; 3], None)
            .unwrap();
        let cap = IndicatorPanel {
            indicator: IndicatorId::Capitalization,
            values: Grid::from_rows(2, 2, vec![5.0, 1.0, 5.0, 1.0]),
        };
        let u = AssetUniverse::select(UniverseName::Synthetic, &p, Some(&cap), 2.0);
        assert!(u.contains("A"));
        assert!(!u.contains("B"));
    }
}
