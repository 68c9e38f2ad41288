//! Step-by-step transition from the textbook Fama-French sort to the
//! supersector, volatility-weighted, beta-neutral construction.
//!
//! | variant | band    | grouping      | weights     | neutrality | vols |
//! |---------|---------|---------------|-------------|------------|------|
//! | A0      | tercile | cap split     | equal       | delta      | 40d  |
//! | A1      | 15%     | cap split     | equal       | delta      | 40d  |
//! | A2      | 15%     | universe      | equal       | delta      | 40d  |
//! | A3      | 15%     | supersectors  | equal       | delta      | 40d  |
//! | A4      | 15%     | supersectors  | inverse vol | delta      | 40d  |
//! | A5      | 15%     | supersectors  | inverse vol | beta       | 40d  |
//! | A6      | 15%     | supersectors  | inverse vol | beta       | 80d  |
//!
//! From A3 on, ratio indicators are divided by their country median. A6
//! stands in for a more reactive volatility model with a slower EMA preset.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{realized_volatility, VolSeries};
use crate::factor::{
    construct_factor, factor_return, ConstructionRules, FactorInputs, FactorReturnSeries, FactorWeightSeries, Grouping,
    Neutrality, QuantileBand, Weighting,
};
use crate::panel::IndicatorId;
use crate::perf::{monthly_aggregate, trim_inactive, MonthlyStats};
use crate::pipeline::{factor_indicator, ranking_indicator, Estimates, MarketData, Periods};

/// EMA period of the A6 volatility preset.
pub const ALTERNATIVE_VOL_PERIOD: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    A0,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
}

impl Variant {
    pub const ALL: [Variant; 7] = [Self::A0, Self::A1, Self::A2, Self::A3, Self::A4, Self::A5, Self::A6];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown ladder variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolModel {
    Standard,
    /// Placeholder for a reactive volatility model: an 80-day EMA.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariantConfig {
    pub variant: Variant,
    pub band: QuantileBand,
    pub cap_split: bool,
    pub sector_geo_constraints: bool,
    pub vol_weights: bool,
    pub beta_neutral: bool,
    pub vol_model: VolModel,
}

impl VariantConfig {
    pub fn preset(variant: Variant) -> Self {
        let a0 = Self {
            variant,
            band: QuantileBand::TERCILE,
            cap_split: true,
            sector_geo_constraints: false,
            vol_weights: false,
            beta_neutral: false,
            vol_model: VolModel::Standard,
        };
        let a1 = Self { band: QuantileBand::Q1, ..a0 };
        let a2 = Self { cap_split: false, ..a1 };
        let a3 = Self {
            sector_geo_constraints: true,
            ..a2
        };
        let a4 = Self { vol_weights: true, ..a3 };
        let a5 = Self { beta_neutral: true, ..a4 };
        match variant {
            Variant::A0 => a0,
            Variant::A1 => a1,
            Variant::A2 => a2,
            Variant::A3 => a3,
            Variant::A4 => a4,
            Variant::A5 => a5,
            Variant::A6 => Self {
                vol_model: VolModel::Alternative,
                ..a5
            },
        }
    }

    pub fn rules(&self) -> Result<ConstructionRules> {
        let grouping = match (self.cap_split, self.sector_geo_constraints) {
            (true, true) => {
                return Err(Error::InvalidInput(
                    "cap split and supersector grouping cannot be combined".into(),
                ))
            }
            (true, false) => Grouping::CapitalizationSplit,
            (false, true) => Grouping::Supersectors,
            (false, false) => Grouping::Universe,
        };
        Ok(ConstructionRules {
            band: self.band,
            grouping,
            weighting: if self.vol_weights {
                Weighting::InverseVolatility
            } else {
                Weighting::Equal
            },
            neutrality: if self.beta_neutral { Neutrality::Beta } else { Neutrality::Delta },
        })
    }

    /// The report label, flagging the volatility model substitution of A6.
    pub fn label(&self) -> String {
        match self.vol_model {
            VolModel::Standard => self.variant.to_string(),
            VolModel::Alternative => format!("{} (vol EMA {ALTERNATIVE_VOL_PERIOD}d)", self.variant),
        }
    }
}

/// Volatility series for both models, computed once per panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderEstimates {
    pub standard: Estimates,
    pub alternative_vols: VolSeries,
}

impl LadderEstimates {
    pub fn new(data: &MarketData, standard: Estimates) -> Self {
        Self {
            alternative_vols: realized_volatility(&data.panel, ALTERNATIVE_VOL_PERIOD),
            standard,
        }
    }

    pub fn vols(&self, model: VolModel) -> &VolSeries {
        match model {
            VolModel::Standard => &self.standard.vols,
            VolModel::Alternative => &self.alternative_vols,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantFactor {
    pub config: VariantConfig,
    pub weights: FactorWeightSeries,
    pub returns: FactorReturnSeries,
}

pub fn build_variant(
    cfg: VariantConfig,
    data: &MarketData,
    estimates: &LadderEstimates,
    id: IndicatorId,
    periods: &Periods,
    noise_seed: Option<u64>,
) -> Result<VariantFactor> {
    let rules = cfg.rules()?;
    let indicator = if cfg.sector_geo_constraints {
        ranking_indicator(data, &estimates.standard, id, periods, noise_seed)?
    } else {
        factor_indicator(data, &estimates.standard, id, periods, noise_seed)?
    };
    let inputs = FactorInputs {
        panel: &data.panel,
        indicator: &indicator,
        vols: estimates.vols(cfg.vol_model),
        betas: &estimates.standard.betas,
        supersectors: &data.supersectors,
        capitalization: data.indicators.get(&IndicatorId::Capitalization),
    };
    let weights = construct_factor(&inputs, rules)?;
    let returns = factor_return(&weights, &data.panel);
    Ok(VariantFactor {
        config: cfg,
        weights,
        returns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub variant: Variant,
    pub label: String,
    pub factor: IndicatorId,
    pub stats: MonthlyStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub rows: Vec<LadderRow>,
}

impl LadderReport {
    pub fn get(&self, variant: Variant, factor: IndicatorId) -> Option<&MonthlyStats> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.factor == factor)
            .map(|r| &r.stats)
    }

    /// Median monthly standard deviation across the factors of one variant.
    pub fn median_std(&self, variant: Variant) -> Option<f64> {
        let mut v: Vec<f64> = self.rows.iter().filter(|r| r.variant == variant).map(|r| r.stats.std).collect();
        crate::grid::median(&mut v)
    }

    /// `variant,label,factor,monthly_mean,monthly_std,monthly_t,n_months`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "label", "factor", "monthly_mean", "monthly_std", "monthly_t", "n_months"])?;
        for r in &self.rows {
            w.write_record([
                r.variant.to_string(),
                r.label.clone(),
                r.factor.to_string(),
                format!("{:.6}", r.stats.mean),
                format!("{:.6}", r.stats.std),
                r.stats.t_stat.map_or_else(String::new, |t| format!("{t:.4}")),
                r.stats.n_months.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monthly statistics of the active part of a factor return series.
pub fn monthly_stats(returns: &FactorReturnSeries) -> Result<MonthlyStats> {
    let active = trim_inactive(returns);
    let months: Vec<f64> = monthly_aggregate(&active.dates, &active.returns)?
        .into_iter()
        .map(|m| m.value)
        .collect();
    if months.len() < 2 {
        return Err(Error::InsufficientData(format!("{} has fewer than two active months", returns.id())));
    }
    Ok(MonthlyStats::from_returns(&months))
}

/// Builds every `(variant, factor)` pair and tabulates monthly statistics.
pub fn ladder_report(
    variants: &[Variant],
    factors: &[IndicatorId],
    data: &MarketData,
    estimates: &LadderEstimates,
    periods: &Periods,
    noise_seed: Option<u64>,
) -> Result<(LadderReport, Vec<VariantFactor>)> {
    let mut rows = Vec::new();
    let mut built = Vec::new();
    for &v in variants {
        let cfg = VariantConfig::preset(v);
        for &f in factors {
            let vf = build_variant(cfg, data, estimates, f, periods, noise_seed)?;
            rows.push(LadderRow {
                variant: v,
                label: cfg.label(),
                factor: f,
                stats: monthly_stats(&vf.returns)?,
            });
            built.push(vf);
        }
    }
    Ok((LadderReport { rows }, built))
}

/// OLS slope of the factor's unit-leg returns `2 r / gross` on the index
/// returns, over the days on which the factor holds a position.
pub fn unit_leg_market_beta(factor: &VariantFactor, data: &MarketData) -> Result<f64> {
    let n = data.panel.n_dates();
    if factor.weights.n_dates() != n {
        return Err(Error::InvalidInput("factor is not aligned with the panel".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in 0..n {
        let g = factor.weights.gross(t);
        let (m, r) = (data.panel.index_returns[t], factor.returns.returns[t]);
        if g > 0.0 && m.is_finite() && r.is_finite() {
            x.push(m);
            y.push(2.0 * r / g);
        }
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("{} is active on fewer than two days", factor.returns.id())));
    }
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("index returns have no variance".into()));
    }
    Ok(sxy / sxx)
}

/// Annualized sample volatility of the index returns.
pub fn index_volatility(data: &MarketData) -> Result<f64> {
    let m: Vec<f64> = data.panel.index_returns.iter().copied().filter(|r| r.is_finite()).collect();
    if m.len() < 2 {
        return Err(Error::InsufficientData("fewer than two index returns".into()));
    }
    let k = m.len() as f64;
    let mean = m.iter().sum::<f64>() / k;
    let var = m.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1.0);
    Ok((252.0 * var).sqrt())
}

/// Market exposures of a delta-neutral factor and of its beta-neutral
/// counterpart, both per unit of gross exposure per leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketExposure {
    pub delta_neutral_beta: f64,
    pub beta_neutral_beta: f64,
}

impl MarketExposure {
    pub fn measure(delta_neutral: &VariantFactor, beta_neutral: &VariantFactor, data: &MarketData) -> Result<Self> {
        Ok(Self {
            delta_neutral_beta: unit_leg_market_beta(delta_neutral, data)?,
            beta_neutral_beta: unit_leg_market_beta(beta_neutral, data)?,
        })
    }

    /// Reduction of squared market beta achieved by the beta-neutral rescaling.
    pub fn removed_beta_squared(&self) -> f64 {
        self.delta_neutral_beta.powi(2) - self.beta_neutral_beta.powi(2)
    }
}

/// Annualized volatility contributed by random market exposure, pooled over
/// many factors: `sqrt(mean(b_delta^2 - b_beta^2)) * sigma_m`.
pub fn random_exposure_vol(exposures: &[MarketExposure], index_vol: f64) -> Option<f64> {
    if exposures.is_empty() {
        return None;
    }
    let mean = exposures.iter().map(MarketExposure::removed_beta_squared).sum::<f64>() / exposures.len() as f64;
    Some(mean.max(0.0).sqrt() * index_vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_follow_the_ladder() {
        let p: Vec<VariantConfig> = Variant::ALL.iter().map(|v| VariantConfig::preset(*v)).collect();
        assert_eq!(p[0].band, QuantileBand::TERCILE);
        assert!(p[0].cap_split && !p[0].vol_weights && !p[0].beta_neutral);
        // each step changes exactly one field
        let diff = |a: &VariantConfig, b: &VariantConfig| {
            [
                a.band != b.band,
                a.cap_split != b.cap_split,
                a.sector_geo_constraints != b.sector_geo_constraints,
                a.vol_weights != b.vol_weights,
                a.beta_neutral != b.beta_neutral,
                a.vol_model != b.vol_model,
            ]
            .iter()
            .filter(|x| **x)
            .count()
        };
        for w in p.windows(2) {
            let d = diff(&w[0], &w[1]);
            // A2→A3 removes nothing and adds one flag; A1→A2 drops the cap split
            assert_eq!(d, 1, "{:?}→{:?}", w[0].variant, w[1].variant);
        }
        assert_eq!(p[5].rules().unwrap(), ConstructionRules::standard(QuantileBand::Q1));
        assert_eq!(p[6].rules().unwrap(), ConstructionRules::standard(QuantileBand::Q1));
        assert!(p[6].label().contains("80d"));
        assert_eq!("A4".parse::<Variant>().unwrap(), Variant::A4);
    }

    use crate::factor::build_factor;
    use crate::pipeline::estimate;
    use crate::synth::{generate_market, SynthConfig};

    fn small_market(seed: u64) -> (MarketData, LadderEstimates, Periods) {
        let cfg = SynthConfig {
            n_assets: 120,
            n_days: 500,
            seed,
            ..SynthConfig::default()
        };
        let market = generate_market(&cfg).unwrap();
        let data = MarketData::from_synthetic(&market);
        let periods = Periods::default();
        let est = LadderEstimates::new(&data, estimate(&data.panel, &periods));
        (data, est, periods)
    }

    #[test]
    fn beta_neutral_variants_match_the_factor_builder() {
        let (data, est, periods) = small_market(3);
        for (v, vols) in [(Variant::A5, &est.standard.vols), (Variant::A6, &est.alternative_vols)] {
            let vf = build_variant(VariantConfig::preset(v), &data, &est, IndicatorId::Remuneration, &periods, None).unwrap();
            let ind = ranking_indicator(&data, &est.standard, IndicatorId::Remuneration, &periods, None).unwrap();
            let w = build_factor(&ind, &data.panel, vols, &est.standard.betas, QuantileBand::Q1, &data.supersectors).unwrap();
            let r = factor_return(&w, &data.panel);
            for t in 0..data.panel.n_dates() {
                assert!((vf.returns.returns[t] - r.returns[t]).abs() <= 1e-14, "{v} day {t}");
                let b: f64 = vf
                    .weights
                    .weights
                    .row(t)
                    .iter()
                    .zip(est.standard.betas.values.row(t))
                    .filter(|(w, _)| **w != 0.0)
                    .map(|(w, b)| w * b)
                    .sum();
                assert!(b.abs() <= 1e-10, "{v} day {t}: beta {b}");
            }
        }
    }

    #[test]
    fn delta_neutral_variants_have_zero_net() {
        let (data, est, periods) = small_market(4);
        for v in [Variant::A0, Variant::A1, Variant::A2, Variant::A3, Variant::A4] {
            let vf = build_variant(VariantConfig::preset(v), &data, &est, IndicatorId::Dividend, &periods, None).unwrap();
            let mut active = 0;
            for t in 0..data.panel.n_dates() {
                let row = vf.weights.weights.row(t);
                let net: f64 = row.iter().sum();
                assert!(net.abs() <= 1e-12, "{v} day {t}: net {net}");
                if vf.weights.gross(t) > 0.0 {
                    active += 1;
                    assert!(vf.weights.gross(t) <= 1.0 + 1e-12);
                }
            }
            assert!(active > 0, "{v} never invested");
        }
    }

    #[test]
    fn cap_split_is_vacuous_with_equal_caps_and_one_sector() {
        let (mut data, est, periods) = small_market(5);
        data.supersectors = vec![1; data.panel.n_assets()];
        let caps = data.indicators.get_mut(&IndicatorId::Capitalization).unwrap();
        for t in 0..caps.values.rows() {
            for v in caps.values.row_mut(t) {
                if v.is_finite() {
                    *v = 1.0;
                }
            }
        }
        let a0 = VariantConfig {
            band: QuantileBand::Q1,
            ..VariantConfig::preset(Variant::A0)
        };
        let split = build_variant(a0, &data, &est, IndicatorId::Cash, &periods, None).unwrap();
        let flat = build_variant(VariantConfig::preset(Variant::A2), &data, &est, IndicatorId::Cash, &periods, None).unwrap();
        assert!((0..data.panel.n_dates()).any(|t| split.weights.gross(t) > 0.0));
        assert_eq!(split.weights.weights, flat.weights.weights);
        assert_eq!(split.returns.returns, flat.returns.returns);
    }

    #[test]
    fn ladder_report_is_deterministic() {
        let (data, est, periods) = small_market(6);
        let factors = [IndicatorId::Dividend, IndicatorId::Noise];
        let run = || {
            let (report, _) = ladder_report(&Variant::ALL, &factors, &data, &est, &periods, Some(9)).unwrap();
            let mut buf = Vec::new();
            report.write_csv(&mut buf).unwrap();
            buf
        };
        let first = run();
        assert_eq!(first, run());
        let text = String::from_utf8(first).unwrap();
        assert_eq!(text.lines().count(), 1 + 7 * 2);
        assert!(text.contains("A6 (vol EMA 80d)"));
    }

    #[test]
    fn unit_leg_beta_recovers_a_planted_slope() {
        let (data, est, periods) = small_market(7);
        let mut vf = build_variant(VariantConfig::preset(Variant::A4), &data, &est, IndicatorId::Dividend, &periods, None).unwrap();
        for t in 0..data.panel.n_dates() {
            let g = vf.weights.gross(t);
            vf.returns.returns[t] = 0.3 * data.panel.index_returns[t] * g / 2.0;
        }
        let b = unit_leg_market_beta(&vf, &data).unwrap();
        assert!((b - 0.3).abs() < 1e-12, "{b}");
        let e = MarketExposure {
            delta_neutral_beta: 0.05,
            beta_neutral_beta: 0.03,
        };
        let vol = random_exposure_vol(&[e, e], 0.2).unwrap();
        assert!((vol - 0.04 * 0.2).abs() < 1e-15);
    }
}
