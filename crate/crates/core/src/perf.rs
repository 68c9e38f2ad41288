//! Performance statistics of daily factor returns.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::factor::FactorReturnSeries;
use crate::panel::TRADING_DAYS;
use crate::riskmetrics::FactorCorrelationMatrix;

/// One trading year of observations.
pub const MIN_STATS_DAYS: usize = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compounding {
    /// Sum of daily returns; the natural convention for long-short overlays.
    #[default]
    Arithmetic,
    Geometric,
}

/// Annualized cumulative return, `Σ r · 252 / n` in the arithmetic convention.
pub fn annualized_bias(returns: &[f64], compounding: Compounding) -> Result<f64> {
    let n = returns.len();
    if n < MIN_STATS_DAYS {
        return Err(Error::InsufficientData(format!("{n} daily returns, at least {MIN_STATS_DAYS} required")));
    }
    let years = n as f64 / TRADING_DAYS;
    Ok(match compounding {
        Compounding::Arithmetic => returns.iter().sum::<f64>() / years,
        Compounding::Geometric => {
            let growth: f64 = returns.iter().map(|r| (1.0 + r).ln()).sum();
            (growth / years).exp() - 1.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyStats {
    pub mean: f64,
    pub std: f64,
    /// `mean / std · √n_months`.
    pub t_stat: Option<f64>,
    pub n_months: usize,
}

impl MonthlyStats {
    pub fn from_returns(monthly: &[f64]) -> Self {
        let n = monthly.len();
        let mean = monthly.iter().sum::<f64>() / n as f64;
        let std = sample_std(monthly, mean);
        Self {
            mean,
            std,
            t_stat: (std > 0.0).then(|| mean / std * (n as f64).sqrt()),
            n_months: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioStats {
    pub annualized_bias: f64,
    pub annualized_vol: f64,
    /// Missing when the volatility is zero.
    pub sharpe: Option<f64>,
    /// Sharpe ratio times `√span_years`.
    pub t_stat: Option<f64>,
    pub span_years: f64,
    pub monthly: MonthlyStats,
}

fn sample_std(x: &[f64], mean: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Span in years of `n_days` daily observations.
pub fn span_years(n_days: usize) -> f64 {
    n_days as f64 / TRADING_DAYS
}

pub fn stats(fr: &FactorReturnSeries) -> Result<PortfolioStats> {
    stats_with(fr, Compounding::Arithmetic)
}

pub fn stats_with(fr: &FactorReturnSeries, compounding: Compounding) -> Result<PortfolioStats> {
    let r = &fr.returns;
    let bias = annualized_bias(r, compounding)?;
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let vol = sample_std(r, mean) * TRADING_DAYS.sqrt();
    let years = span_years(r.len());
    let sharpe = (vol > 0.0).then(|| bias / vol);
    let monthly: Vec<f64> = monthly_aggregate(&fr.dates, r)?.into_iter().map(|m| m.value).collect();
    Ok(PortfolioStats {
        annualized_bias: bias,
        annualized_vol: vol,
        sharpe,
        t_stat: sharpe.map(|s| s * years.sqrt()),
        span_years: years,
        monthly: MonthlyStats::from_returns(&monthly),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyReturn {
    pub year: i32,
    pub month: u32,
    pub value: f64,
}

/// Calendar-month sums of daily returns; partial first and last months included.
pub fn monthly_aggregate(dates: &[NaiveDate], returns: &[f64]) -> Result<Vec<MonthlyReturn>> {
    if dates.len() != returns.len() {
        return Err(Error::InvalidInput("dates and returns differ in length".into()));
    }
    let mut months: BTreeMap<(i32, u32), f64> = BTreeMap::new();
    for (d, r) in dates.iter().zip(returns) {
        *months.entry((d.year(), d.month())).or_insert(0.0) += r;
    }
    Ok(months
        .into_iter()
        .map(|((year, month), value)| MonthlyReturn { year, month, value })
        .collect())
}

/// Drops the leading days on which the factor held no position.
pub fn trim_inactive(fr: &FactorReturnSeries) -> FactorReturnSeries {
    let start = fr.returns.iter().position(|r| *r != 0.0).unwrap_or(fr.returns.len());
    FactorReturnSeries {
        indicator: fr.indicator,
        band: fr.band,
        dates: fr.dates[start..].to_vec(),
        returns: fr.returns[start..].to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactDecomposition {
    pub target: String,
    pub bias: f64,
    /// `(factor, bias_j · corr(target, j))` for every other factor.
    pub impacts: Vec<(String, f64)>,
    /// Own bias minus the impacts of every other factor.
    pub intrinsic: f64,
}

impl ImpactDecomposition {
    /// t-statistic of the intrinsic bias at the volatility of the raw factor.
    pub fn implied_t_stat(&self, t_stat: f64) -> f64 {
        self.intrinsic * t_stat / self.bias
    }
}

/// Splits the target factor's bias into the part explained by the biases of
/// correlated factors and an intrinsic remainder.
pub fn impact_decomposition(
    target: &str,
    biases: &BTreeMap<String, f64>,
    corr: &FactorCorrelationMatrix,
) -> Result<ImpactDecomposition> {
    let bias = *biases
        .get(target)
        .ok_or_else(|| Error::InvalidInput(format!("no bias for {target}")))?;
    let mut impacts = Vec::new();
    for (id, b) in biases {
        if id == target {
            continue;
        }
        let c = corr
            .get(target, id)
            .ok_or_else(|| Error::InvalidInput(format!("no correlation between {target} and {id}")))?;
        impacts.push((id.clone(), b * c));
    }
    let explained: f64 = impacts.iter().map(|(_, v)| v).sum();
    Ok(ImpactDecomposition {
        target: target.to_owned(),
        bias,
        impacts,
        intrinsic: bias - explained,
    })
}

/// `factor,bias,vol,sharpe,t_stat,span_years,monthly_mean,monthly_std,monthly_t`.
pub fn write_stats_csv<W: Write>(rows: &[(String, PortfolioStats)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "factor",
        "bias",
        "vol",
        "sharpe",
        "t_stat",
        "span_years",
        "monthly_mean",
        "monthly_std",
        "monthly_t",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for (id, s) in rows {
        w.write_record([
            id.clone(),
            format!("{:.6}", s.annualized_bias),
            format!("{:.6}", s.annualized_vol),
            opt(s.sharpe),
            opt(s.t_stat),
            format!("{:.4}", s.span_years),
            format!("{:.6}", s.monthly.mean),
            format!("{:.6}", s.monthly.std),
            opt(s.monthly.t_stat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::QuantileBand;
    use crate::grid::Grid;
    use crate::panel::IndicatorId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn weekdays(n: usize) -> Vec<NaiveDate> {
        let mut d = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if d.weekday().number_from_monday() <= 5 {
                out.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        out
    }

    fn series(returns: Vec<f64>) -> FactorReturnSeries {
        FactorReturnSeries {
            indicator: IndicatorId::Remuneration,
            band: QuantileBand::Q1,
            dates: weekdays(returns.len()),
            returns,
        }
    }

    #[test]
    fn bias_conventions() {
        assert!((annualized_bias(&[0.0001; 252], Compounding::Arithmetic).unwrap() - 0.0252).abs() < 1e-15);
        assert_eq!(annualized_bias(&[0.0; 300], Compounding::Arithmetic).unwrap(), 0.0);
        assert!(annualized_bias(&[0.0; 100], Compounding::Arithmetic).is_err());
        let g = annualized_bias(&[0.0001; 252], Compounding::Geometric).unwrap();
        assert!((g - (1.0001f64.powi(252) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn alternating_returns_have_zero_t() {
        let r: Vec<f64> = (0..504).map(|t| if t % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let s = stats(&series(r)).unwrap();
        assert_eq!(s.annualized_bias, 0.0);
        assert_eq!(s.t_stat, Some(0.0));
        assert_eq!(stats(&series(vec![0.0; 300])).unwrap().sharpe, None);
    }

    #[test]
    fn span_multiplier() {
        let n = (14.5 * 252.0) as usize;
        assert!((span_years(n).sqrt() - 3.81).abs() < 0.005);
        // bias 1.21%, Sharpe 0.37, 14.5 years → t ≈ 1.40
        assert!((0.37 * span_years(n).sqrt() - 1.40).abs() < 0.01);
    }

    #[test]
    fn scaling_leaves_sharpe_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Normal::new(0.0003, 0.01).unwrap();
        let r: Vec<f64> = (0..1000).map(|_| d.sample(&mut rng)).collect();
        let a = stats(&series(r.clone())).unwrap();
        let b = stats(&series(r.iter().map(|v| v * 3.0).collect())).unwrap();
        assert!((b.annualized_bias - 3.0 * a.annualized_bias).abs() < 1e-12);
        assert!((b.annualized_vol - 3.0 * a.annualized_vol).abs() < 1e-12);
        assert!((b.sharpe.unwrap() - a.sharpe.unwrap()).abs() < 1e-12);
        assert!((b.t_stat.unwrap() - a.t_stat.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn monthly_sums_match_grouping_oracle() {
        let r: Vec<f64> = (0..21).map(|_| 0.001).collect();
        let dates: Vec<NaiveDate> = (1..=21).map(|d| NaiveDate::from_ymd_opt(2003, 3, d).unwrap()).collect();
        let m = monthly_aggregate(&dates, &r).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].value - 0.021).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Normal::new(0.0, 0.01).unwrap();
        let r: Vec<f64> = (0..800).map(|_| d.sample(&mut rng)).collect();
        let dates = weekdays(800);
        let m = monthly_aggregate(&dates, &r).unwrap();
        for mr in &m {
            let oracle: f64 = dates
                .iter()
                .zip(&r)
                .filter(|(d, _)| d.year() == mr.year && d.month() == mr.month)
                .map(|(_, v)| v)
                .sum();
            assert!((mr.value - oracle).abs() < 1e-15);
        }
        assert_eq!(m.iter().map(|x| (x.year, x.month)).collect::<std::collections::BTreeSet<_>>().len(), m.len());
    }

    #[test]
    fn monthly_t_convention() {
        let s = MonthlyStats {
            mean: 0.0035,
            std: 0.032,
            t_stat: None,
            n_months: 174,
        };
        let t = s.mean / s.std * (s.n_months as f64).sqrt();
        assert!((t - 1.46).abs() < 0.05);
    }

    #[test]
    fn daily_and_monthly_t_agree() {
        let d = Normal::new(0.0004, 0.008).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r: Vec<f64> = (0..3612).map(|_| d.sample(&mut rng)).collect();
            let s = stats(&series(r)).unwrap();
            ratios.push(s.monthly.t_stat.unwrap() / s.t_stat.unwrap());
        }
        ratios.sort_by(f64::total_cmp);
        let med = ratios[5];
        assert!((med - 1.0).abs() < 0.15, "{ratios:?}");
    }

    fn matrix(ids: &[&str], row: &[f64]) -> FactorCorrelationMatrix {
        let k = ids.len();
        let mut g = Grid::filled(k, k, 0.0);
        for i in 0..k {
            g.set(i, i, 1.0);
        }
        for j in 1..k {
            g.set(0, j, row[j - 1]);
            g.set(j, 0, row[j - 1]);
        }
        FactorCorrelationMatrix {
            ids: ids.iter().map(|s| (*s).to_owned()).collect(),
            matrix: g,
            n_obs: 1000,
            vol_window: 20,
        }
    }

    #[test]
    fn decoupled_factor_keeps_its_bias() {
        let corr = matrix(&["a", "b", "c"], &[0.0, 0.0]);
        let biases = BTreeMap::from([("a".into(), 1.5), ("b".into(), -3.0), ("c".into(), 2.0)]);
        let d = impact_decomposition("a", &biases, &corr).unwrap();
        assert_eq!(d.intrinsic, 1.5);
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 1.0).unwrap();
        for _ in 0..500 {
            let row: Vec<f64> = (0..4).map(|_| n.sample(&mut rng) * 0.3).collect();
            let corr = matrix(&["t", "a", "b", "c", "d"], &row);
            let biases: BTreeMap<String, f64> = ["t", "a", "b", "c", "d"].iter().map(|k| ((*k).to_owned(), n.sample(&mut rng))).collect();
            let d = impact_decomposition("t", &biases, &corr).unwrap();
            let total = d.intrinsic + d.impacts.iter().map(|(_, v)| v).sum::<f64>();
            assert!((total - biases["t"]).abs() <= 1e-15 * (1.0 + biases["t"].abs()) * 4.0);
        }
    }
}
