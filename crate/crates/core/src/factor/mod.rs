//! Daily long-short factor construction.
//!
//! Each trading day and within each supersector, eligible stocks are sorted
//! by indicator, a positional quantile band selects the long and short legs,
//! leg members are weighted by capped inverse volatility and the two legs are
//! rescaled so the supersector portfolio has zero aggregate beta. Supersector
//! portfolios are then summed with weights proportional to their size, which
//! keeps the total gross exposure at or below one.

mod construct;
mod export;
mod normalize;
mod supersector;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::panel::IndicatorId;

pub use construct::{
    beta_neutralize, build_factor, build_noise_factor, construct_factor, factor_return, noise_indicator,
    rank_and_select, raw_weights, ConstructionRules, FactorInputs, Grouping, LegNeutrality, Neutrality,
    RawLegs, Selection, Weighting,
};
pub use export::{read_returns_csv, read_weights_csv, write_returns_csv, write_weights_csv, RETURNS_HEADER, WEIGHTS_HEADER};
pub use normalize::{normalize_by_country, NormalizationReport, MIN_COUNTRY_ASSETS};
pub use supersector::{SupersectorMap, DEFAULT_SUPERSECTORS, N_SUPERSECTORS};

/// Exact rational quantile boundary; rank cutoffs are `floor(n · num / den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    pub fn of(self, n: usize) -> usize {
        n * self.num as usize / self.den as usize
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BandKind {
    Q1,
    Q2,
    Q3,
    /// Top and bottom thirds, used by the standard Fama-French sort.
    Tercile,
}

/// Paired long/short rank slices `[lo, hi)` of a descending sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantileBand {
    pub kind: BandKind,
    pub long: (Fraction, Fraction),
    pub short: (Fraction, Fraction),
}

impl QuantileBand {
    pub const Q1: QuantileBand = QuantileBand {
        kind: BandKind::Q1,
        long: (Fraction::new(0, 100), Fraction::new(15, 100)),
        short: (Fraction::new(85, 100), Fraction::new(100, 100)),
    };
    pub const Q2: QuantileBand = QuantileBand {
        kind: BandKind::Q2,
        long: (Fraction::new(15, 100), Fraction::new(30, 100)),
        short: (Fraction::new(70, 100), Fraction::new(85, 100)),
    };
    pub const Q3: QuantileBand = QuantileBand {
        kind: BandKind::Q3,
        long: (Fraction::new(30, 100), Fraction::new(45, 100)),
        short: (Fraction::new(55, 100), Fraction::new(70, 100)),
    };
    pub const TERCILE: QuantileBand = QuantileBand {
        kind: BandKind::Tercile,
        long: (Fraction::new(0, 3), Fraction::new(1, 3)),
        short: (Fraction::new(2, 3), Fraction::new(3, 3)),
    };
    pub const ALL: [QuantileBand; 3] = [Self::Q1, Self::Q2, Self::Q3];

    /// Leg width `q` as a fraction of the group.
    pub fn q(&self) -> f64 {
        self.long.1.value() - self.long.0.value()
    }

    /// Smallest group for which each leg holds at least one stock.
    pub fn min_group_size(&self) -> usize {
        (1..)
            .find(|&n| {
                self.long.1.of(n) > self.long.0.of(n) && self.short.1.of(n) > self.short.0.of(n)
            })
            .expect("a band with positive width admits some group size")
    }

    pub fn as_str(&self) -> &'static str {
        match self.kind {
            BandKind::Q1 => "Q1",
            BandKind::Q2 => "Q2",
            BandKind::Q3 => "Q3",
            BandKind::Tercile => "T3",
        }
    }
}

impl fmt::Display for QuantileBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantileBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Q1" => Ok(Self::Q1),
            "Q2" => Ok(Self::Q2),
            "Q3" => Ok(Self::Q3),
            "T3" => Ok(Self::TERCILE),
            _ => Err(Error::InvalidInput(format!("unknown quantile band {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Membership {
    Short = -1,
    Excluded = 0,
    Long = 1,
}

impl Membership {
    pub fn as_str(self) -> &'static str {
        match self {
            Membership::Long => "long",
            Membership::Short => "short",
            Membership::Excluded => "excluded",
        }
    }
}

/// Leg multipliers of one group (supersector, cap bucket or whole universe) on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupLegs {
    /// Supersector 1..=6, cap bucket 1 (small) / 2 (large), or 0 for the whole universe.
    pub group: u8,
    /// Eligible assets in the group.
    pub n_s: usize,
    pub n_long: usize,
    pub n_short: usize,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Share of the aggregate portfolio given to this group.
    pub scale: f64,
    /// A leg had non-positive aggregate beta, so the group was left uninvested.
    pub fallback: bool,
}

/// Factor weights for a single day.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorWeights {
    pub date: NaiveDate,
    pub indicator: IndicatorId,
    pub band: QuantileBand,
    pub weights: Vec<f64>,
    pub membership: Vec<Membership>,
    pub groups: Vec<GroupLegs>,
    /// No group had enough eligible assets; all weights are zero.
    pub empty: bool,
}

/// Factor weights over all panel dates.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorWeightSeries {
    pub indicator: IndicatorId,
    pub band: QuantileBand,
    pub rules: ConstructionRules,
    pub dates: Vec<NaiveDate>,
    /// `dates × assets`; excluded assets carry exactly zero.
    pub weights: Grid,
    membership: Vec<Membership>,
    pub groups: Vec<Vec<GroupLegs>>,
    pub empty: Vec<bool>,
}

impl FactorWeightSeries {
    /// Wraps externally computed weights; membership follows the sign of each weight.
    pub fn from_parts(indicator: IndicatorId, rules: ConstructionRules, dates: Vec<NaiveDate>, weights: Grid) -> Self {
        let membership = weights
            .as_slice()
            .iter()
            .map(|w| {
                if *w > 0.0 {
                    Membership::Long
                } else if *w < 0.0 {
                    Membership::Short
                } else {
                    Membership::Excluded
                }
            })
            .collect();
        let n = weights.rows();
        let empty = (0..n).map(|t| weights.row(t).iter().all(|w| *w == 0.0)).collect();
        Self {
            indicator,
            band: rules.band,
            rules,
            dates,
            weights,
            membership,
            groups: vec![Vec::new(); n],
            empty,
        }
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn membership_row(&self, t: usize) -> &[Membership] {
        let m = self.weights.cols();
        &self.membership[t * m..(t + 1) * m]
    }

    pub fn day(&self, t: usize) -> FactorWeights {
        FactorWeights {
            date: self.dates[t],
            indicator: self.indicator,
            band: self.band,
            weights: self.weights.row(t).to_vec(),
            membership: self.membership_row(t).to_vec(),
            groups: self.groups[t].clone(),
            empty: self.empty[t],
        }
    }

    pub fn gross(&self, t: usize) -> f64 {
        self.weights.row(t).iter().map(|w| w.abs()).sum()
    }

    pub fn truncate(&self, n: usize) -> FactorWeightSeries {
        let n = n.min(self.n_dates());
        let m = self.weights.cols();
        FactorWeightSeries {
            indicator: self.indicator,
            band: self.band,
            rules: self.rules,
            dates: self.dates[..n].to_vec(),
            weights: self.weights.head(n),
            membership: self.membership[..n * m].to_vec(),
            groups: self.groups[..n].to_vec(),
            empty: self.empty[..n].to_vec(),
        }
    }
}

/// Daily factor returns `r_π(t) = Σ_i w_i(t) r_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorReturnSeries {
    pub indicator: IndicatorId,
    pub band: QuantileBand,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

impl FactorReturnSeries {
    /// `indicator:band`, the id used in reports.
    pub fn id(&self) -> String {
        format!("{}:{}", self.indicator, self.band)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_boundaries_for_twenty_assets() {
        let b = QuantileBand::Q1;
        assert_eq!((b.long.0.of(20), b.long.1.of(20)), (0, 3));
        assert_eq!((b.short.0.of(20), b.short.1.of(20)), (17, 20));
        assert_eq!(b.min_group_size(), 7);
        assert_eq!(QuantileBand::TERCILE.min_group_size(), 3);
        assert!((QuantileBand::Q3.q() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn bands_are_disjoint_for_every_size() {
        for n in 1..500 {
            let mut used = vec![0u8; n];
            for b in QuantileBand::ALL {
                for (lo, hi) in [b.long, b.short] {
                    for r in lo.of(n)..hi.of(n) {
                        used[r] += 1;
                    }
                }
            }
            assert!(used.iter().all(|u| *u <= 1), "n={n}");
        }
    }
}
