//! Synthetic equity market with planted market, sector and indicator-factor
//! structure.
//!
//! Daily returns follow
//!
//! ```text
//! r_i(t) = β_i m(t) + s_{S(i)}(t) + Σ_k g_ik f_k(t) + ε_i(t)
//! ```
//!
//! with independent Gaussian shocks. `f_k` carries the drift of planted factor
//! `k`, and `g_ik` depends only on the rank of the asset's static indicator
//! score within its supersector. Indicators are published once a year on
//! staggered dates, so the panels have the same step structure as real
//! fundamentals.
//!
//! All randomness comes from a `ChaCha8` stream seeded with the config seed
//! (the `rand_chacha` implementation, which is platform independent).

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::factor::{beta_neutralize, rank_and_select, raw_weights, Fraction, QuantileBand, DEFAULT_SUPERSECTORS, N_SUPERSECTORS};
use crate::grid::{median, Grid};
use crate::panel::{Classification, IndicatorId, IndicatorPanel, IndicatorSet, ReturnPanel, INDEX_ASSET_ID, TRADING_DAYS};

/// Rank boundaries of the five loading segments, matching the band cut points.
const SEGMENT_BOUNDS: [Fraction; 4] = [Fraction::new(15, 100), Fraction::new(30, 100), Fraction::new(70, 100), Fraction::new(85, 100)];

/// Loadings on a planted factor by rank segment of the supersector sort:
/// `[0,15%)`, `[15,30%)`, `[30,70%)`, `[70,85%)`, `[85,100%]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingProfile {
    pub segments: [f64; 5],
}

impl LoadingProfile {
    /// `±g` in the outer 15% tails only.
    pub fn extremes(g: f64) -> Self {
        Self {
            segments: [g, 0.0, 0.0, 0.0, -g],
        }
    }

    /// `±g` in the tails, `±g/2` in the next 15%, zero in the middle.
    pub fn decaying(g: f64) -> Self {
        Self {
            segments: [g, g / 2.0, 0.0, -g / 2.0, -g],
        }
    }

    pub fn zero() -> Self {
        Self { segments: [0.0; 5] }
    }

    /// Loading of the asset at descending `rank` in a group of `n`.
    pub fn loading(&self, rank: usize, n: usize) -> f64 {
        let segment = SEGMENT_BOUNDS.iter().filter(|b| rank >= b.of(n)).count();
        self.segments[segment]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFactor {
    pub indicator: IndicatorId,
    pub profile: LoadingProfile,
    /// Annualized volatility of the factor shock.
    pub factor_vol: f64,
    /// Annualized mean of the factor shock.
    pub drift: f64,
    /// Multiplies the published indicator of every asset in one supersector,
    /// so that a sort across sectors piles into that sector.
    pub sector_tilt: Option<(u8, f64)>,
}

impl PlantedFactor {
    pub fn new(indicator: IndicatorId, profile: LoadingProfile, factor_vol: f64) -> Self {
        Self {
            indicator,
            profile,
            factor_vol,
            drift: 0.0,
            sector_tilt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_assets: usize,
    /// Trading dates in the price file, one more than the return rows.
    pub n_days: usize,
    pub start: NaiveDate,
    pub countries: Vec<String>,
    /// Log-scale dispersion of country-wide indicator levels.
    pub country_dispersion: f64,
    /// Log-scale dispersion of supersector-wide indicator levels.
    pub sector_dispersion: f64,
    pub market_vol: f64,
    /// Volatility of each of the six supersector shocks.
    pub sector_vol: f64,
    /// Median idiosyncratic volatility.
    pub idio_vol: f64,
    /// Log-scale dispersion of idiosyncratic volatilities.
    pub idio_dispersion: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub planted: Vec<PlantedFactor>,
    /// Relative noise added to each annual publication.
    pub publication_jitter: f64,
    /// Mean daily traded fraction of the share count.
    pub turnover: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Shaped like a large European universe: 569 assets over 3612 days,
    /// `⟨β⟩ = 0.65`, `s_β = 0.37`, 21% market volatility.
    fn default() -> Self {
        use IndicatorId::*;
        let planted = |ind, g: f64, vol, drift| PlantedFactor {
            indicator: ind,
            profile: LoadingProfile::decaying(g),
            factor_vol: vol,
            drift,
            sector_tilt: None,
        };
        Self {
            n_assets: 569,
            n_days: 3612,
            start: NaiveDate::from_ymd_opt(2001, 1, 1).expect("valid date"),
            countries: ["DE", "FR", "GB", "IT", "ES", "NL", "CH", "SE"].iter().map(|c| (*c).to_owned()).collect(),
            country_dispersion: 0.3,
            sector_dispersion: 0.3,
            market_vol: 0.21,
            sector_vol: 0.08,
            idio_vol: 0.25,
            idio_dispersion: 0.35,
            beta_mean: 0.65,
            beta_std: 0.37,
            planted: vec![
                planted(Dividend, 1.0, 0.03, 0.02),
                planted(Capitalization, 1.0, 0.04, -0.04),
                planted(SalesToMarket, 1.0, 0.02, 0.01),
                planted(BookToMarket, 1.0, 0.025, 0.0),
                planted(Remuneration, 1.0, 0.02, 0.0121),
                planted(Cash, 1.0, 0.015, 0.02),
            ],
            publication_jitter: 0.02,
            turnover: 0.004,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Lists every violated constraint.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.n_assets < 2 {
            errs.push("n_assets must be at least 2".to_owned());
        }
        if self.n_days < 2 {
            errs.push("n_days must be at least 2".to_owned());
        }
        if self.countries.is_empty() {
            errs.push("at least one country is required".to_owned());
        }
        for (name, v) in [
            ("market_vol", self.market_vol),
            ("sector_vol", self.sector_vol),
            ("idio_vol", self.idio_vol),
            ("idio_dispersion", self.idio_dispersion),
            ("country_dispersion", self.country_dispersion),
            ("sector_dispersion", self.sector_dispersion),
            ("beta_std", self.beta_std),
            ("publication_jitter", self.publication_jitter),
            ("turnover", self.turnover),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be a non-negative number"));
            }
        }
        let mut seen = Vec::new();
        for p in &self.planted {
            if !IndicatorId::PUBLISHED.contains(&p.indicator) {
                errs.push(format!("{} is not a published indicator and cannot carry a planted factor", p.indicator));
            }
            if seen.contains(&p.indicator) {
                errs.push(format!("{} is planted twice", p.indicator));
            }
            seen.push(p.indicator);
            if !(p.factor_vol >= 0.0) {
                errs.push(format!("{}: factor_vol must be non-negative", p.indicator));
            }
            if let Some((s, m)) = p.sector_tilt {
                if !(1..=N_SUPERSECTORS).contains(&s) || !(m > 0.0) {
                    errs.push(format!("{}: sector tilt needs a supersector 1..=6 and a positive multiplier", p.indicator));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn planted(&self, indicator: IndicatorId) -> Option<&PlantedFactor> {
        self.planted.iter().find(|p| p.indicator == indicator)
    }
}

/// Generative parameters drawn for one market.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameters {
    pub betas: Vec<f64>,
    /// Annualized.
    pub idio_vols: Vec<f64>,
    /// Annualized total volatility implied by every shock.
    pub total_vols: Vec<f64>,
    pub supersectors: Vec<u8>,
    /// Static indicator score divided by its country median.
    pub normalized_scores: BTreeMap<IndicatorId, Vec<f64>>,
    pub loadings: BTreeMap<IndicatorId, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Publication {
    /// Row of the price calendar.
    pub day: usize,
    pub asset: usize,
    pub indicator: IndicatorId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub config: SynthConfig,
    pub panel: ReturnPanel,
    /// Point-in-time panels of the published indicators.
    pub indicators: IndicatorSet,
    pub classification: Classification,
    pub truth: TrueParameters,
    pub publications: Vec<Publication>,
    /// Daily market shocks, equal to the index returns up to price rounding.
    pub market: Vec<f64>,
}

/// Weekdays starting at `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Descending rank of each member by `score`, ties by asset index.
fn ranks_within(members: &[usize], score: &[f64]) -> Vec<(usize, usize)> {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    order.into_iter().enumerate().map(|(r, a)| (a, r)).collect()
}

pub fn generate_market(cfg: &SynthConfig) -> Result<SyntheticMarket> {
    cfg.validate().map_err(|e| Error::InvalidInput(e.join("; ")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.n_assets;
    // return days; the calendar carries one more date
    let n = cfg.n_days - 1;
    let width = (m as f64).log10().floor() as usize + 1;
    let assets: Vec<String> = (0..m).map(|i| format!("SYN{i:0width$}", width = width.max(4))).collect();

    // static cross-section
    let country_idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..cfg.countries.len())).collect();
    let group_idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..DEFAULT_SUPERSECTORS.len())).collect();
    let supersectors: Vec<u8> = group_idx.iter().map(|g| DEFAULT_SUPERSECTORS[*g].1).collect();
    let beta_dist = Normal::new(cfg.beta_mean, cfg.beta_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let betas: Vec<f64> = (0..m).map(|_| beta_dist.sample(&mut rng)).collect();
    let d = cfg.idio_dispersion;
    let idio_vols: Vec<f64> = (0..m).map(|_| cfg.idio_vol * (d * normal(&mut rng) - d * d / 2.0).exp()).collect();
    let shares: Vec<f64> = (0..m).map(|_| (18.4 + normal(&mut rng)).exp()).collect();
    let first_price: Vec<f64> = (0..m).map(|_| rng.random_range(5.0f64.ln()..200.0f64.ln()).exp()).collect();
    let offsets: Vec<usize> = (0..m).map(|_| rng.random_range(1..253)).collect();

    // Static scores carry the supersector level (and tilt); the country level
    // only enters the published values and cancels under country normalization.
    let mut scores: BTreeMap<IndicatorId, Vec<f64>> = BTreeMap::new();
    let mut levels: BTreeMap<IndicatorId, Vec<f64>> = BTreeMap::new();
    for id in IndicatorId::PUBLISHED {
        if id == IndicatorId::Capitalization {
            continue;
        }
        let raw: Vec<f64> = (0..m).map(|_| (0.5 * normal(&mut rng)).exp()).collect();
        levels.insert(
            id,
            (0..cfg.countries.len()).map(|_| (cfg.country_dispersion * normal(&mut rng)).exp()).collect(),
        );
        let sector_level: Vec<f64> = (0..N_SUPERSECTORS).map(|_| (cfg.sector_dispersion * normal(&mut rng)).exp()).collect();
        let tilt = cfg.planted(id).and_then(|p| p.sector_tilt);
        let score = (0..m)
            .map(|a| {
                let s = supersectors[a];
                let t = tilt.filter(|(ts, _)| *ts == s).map_or(1.0, |(_, mult)| mult);
                raw[a] * sector_level[s as usize - 1] * t
            })
            .collect();
        scores.insert(id, score);
    }
    // capitalization ranks on the static share count times the first price
    scores.insert(IndicatorId::Capitalization, (0..m).map(|a| shares[a] * first_price[a]).collect());

    let mut by_country: Vec<Vec<usize>> = vec![Vec::new(); cfg.countries.len()];
    for a in 0..m {
        by_country[country_idx[a]].push(a);
    }
    let mut normalized_scores = BTreeMap::new();
    for (id, s) in &scores {
        let mut norm = vec![0.0; m];
        for members in &by_country {
            let mut vals: Vec<f64> = members.iter().map(|a| s[*a]).collect();
            if let Some(med) = median(&mut vals) {
                for &a in members {
                    norm[a] = s[a] / med;
                }
            }
        }
        normalized_scores.insert(*id, norm);
    }

    let mut by_sector: Vec<Vec<usize>> = vec![Vec::new(); N_SUPERSECTORS as usize];
    for a in 0..m {
        by_sector[supersectors[a] as usize - 1].push(a);
    }
    let mut loadings = BTreeMap::new();
    for p in &cfg.planted {
        let norm = &normalized_scores[&p.indicator];
        let mut g = vec![0.0; m];
        for members in &by_sector {
            for (a, rank) in ranks_within(members, norm) {
                g[a] = p.profile.loading(rank, members.len());
            }
        }
        loadings.insert(p.indicator, g);
    }

    let daily = |v: f64| v / TRADING_DAYS.sqrt();
    let total_vols: Vec<f64> = (0..m)
        .map(|a| {
            let mut var = (betas[a] * cfg.market_vol).powi(2) + cfg.sector_vol.powi(2) + idio_vols[a].powi(2);
            for p in &cfg.planted {
                var += (loadings[&p.indicator][a] * p.factor_vol).powi(2);
            }
            var.sqrt()
        })
        .collect();

    // daily shocks
    let calendar = business_days(cfg.start, n + 1);
    let mut closes = Grid::missing(n + 1, m);
    let mut volumes = Grid::missing(n + 1, m);
    let mut index_levels = vec![1000.0; n + 1];
    let mut market = Vec::with_capacity(n);
    closes.row_mut(0).copy_from_slice(&first_price);
    let mut sector_shock = [0.0; N_SUPERSECTORS as usize];
    let mut factor_shock = vec![0.0; cfg.planted.len()];
    let planted_loadings: Vec<&Vec<f64>> = cfg.planted.iter().map(|p| &loadings[&p.indicator]).collect();
    for t in 0..n {
        let mt = daily(cfg.market_vol) * normal(&mut rng);
        for s in sector_shock.iter_mut() {
            *s = daily(cfg.sector_vol) * normal(&mut rng);
        }
        for (k, p) in cfg.planted.iter().enumerate() {
            factor_shock[k] = p.drift / TRADING_DAYS + daily(p.factor_vol) * normal(&mut rng);
        }
        market.push(mt);
        index_levels[t + 1] = index_levels[t] * (1.0 + mt).max(0.05);
        for a in 0..m {
            let mut r = betas[a] * mt + sector_shock[supersectors[a] as usize - 1] + daily(idio_vols[a]) * normal(&mut rng);
            for (k, g) in planted_loadings.iter().enumerate() {
                r += g[a] * factor_shock[k];
            }
            let p0 = closes.raw(t, a);
            closes.set(t + 1, a, p0 * (1.0 + r).max(0.05));
        }
    }
    for t in 0..=n {
        for a in 0..m {
            let noise = (0.5 * normal(&mut rng) - 0.125).exp();
            volumes.set(t, a, (shares[a] * cfg.turnover * noise).round());
        }
    }

    // annual publications: everyone on the first day, then on a staggered anniversary
    let mut publications = Vec::new();
    for a in 0..m {
        let mut days = vec![0];
        let mut d = offsets[a];
        while d <= n {
            days.push(d);
            d += 252;
        }
        for day in days {
            for id in IndicatorId::PUBLISHED {
                let value = if id == IndicatorId::Capitalization {
                    shares[a] * closes.raw(day, a)
                } else {
                    let jitter = 1.0 + cfg.publication_jitter * normal(&mut rng);
                    scores[&id][a] * levels[&id][country_idx[a]] * jitter.max(0.01)
                };
                publications.push(Publication {
                    day,
                    asset: a,
                    indicator: id,
                    value,
                });
            }
        }
    }
    publications.sort_by_key(|p| (p.day, p.asset, p.indicator));

    let panel = ReturnPanel::from_prices(calendar, assets, closes, &index_levels, Some(volumes))?;
    let indicators = point_in_time(&publications, &panel);
    let classification = Classification {
        country: country_idx.iter().map(|c| cfg.countries[*c].clone()).collect(),
        industry_group: group_idx.iter().map(|g| DEFAULT_SUPERSECTORS[*g].0.to_owned()).collect(),
    };
    Ok(SyntheticMarket {
        config: cfg.clone(),
        panel,
        indicators,
        classification,
        truth: TrueParameters {
            betas,
            idio_vols,
            total_vols,
            supersectors,
            normalized_scores,
            loadings,
        },
        publications,
        market,
    })
}

/// A publication on calendar row `c` is known from return row `c` onward,
/// the same rule the CSV ingestion applies.
fn point_in_time(publications: &[Publication], panel: &ReturnPanel) -> IndicatorSet {
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let mut set = IndicatorSet::new();
    // publications are sorted by day, so later rows overwrite earlier ones
    let mut latest: BTreeMap<IndicatorId, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
    for p in publications {
        latest.entry(p.indicator).or_insert_with(|| vec![Vec::new(); m])[p.asset].push((p.day, p.value));
    }
    for (id, per_asset) in latest {
        let mut values = Grid::missing(n, m);
        for (a, pubs) in per_asset.iter().enumerate() {
            let mut k = 0;
            let mut current = f64::NAN;
            for t in 0..n {
                while k < pubs.len() && pubs[k].0 <= t {
                    current = pubs[k].1;
                    k += 1;
                }
                values.set(t, a, current);
            }
        }
        set.insert(id, IndicatorPanel { indicator: id, values });
    }
    set
}

impl SyntheticMarket {
    pub fn supersectors(&self) -> &[u8] {
        &self.truth.supersectors
    }

    /// `date,asset_id,close,volume`; the index rows come first each day.
    pub fn write_prices<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "asset_id", "close", "volume"])?;
        let p = &self.panel;
        let mut level = 1000.0;
        for (c, date) in p.calendar.iter().enumerate() {
            if c > 0 {
                level *= (1.0 + self.market[c - 1]).max(0.05);
            }
            let ds = date.to_string();
            w.write_record([ds.as_str(), INDEX_ASSET_ID, &level.to_string(), ""])?;
            let vols = p.volumes.as_ref().expect("synthetic panels carry volume");
            for (a, id) in p.assets.iter().enumerate() {
                w.write_record([ds.as_str(), id, &p.closes.raw(c, a).to_string(), &vols.raw(c, a).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `publication_date,asset_id,indicator_id,value`.
    pub fn write_indicators<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["publication_date", "asset_id", "indicator_id", "value"])?;
        for p in &self.publications {
            w.write_record([
                self.panel.calendar[p.day].to_string(),
                self.panel.assets[p.asset].clone(),
                p.indicator.to_string(),
                p.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `asset_id,country,gics_industry_group`.
    pub fn write_classification<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["asset_id", "country", "gics_industry_group"])?;
        for (a, id) in self.panel.assets.iter().enumerate() {
            w.write_record([id, &self.classification.country[a], &self.classification.industry_group[a]])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pairwise return correlation implied by the generative parameters.
    pub fn planted_correlation(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        let cfg = &self.config;
        let t = &self.truth;
        let mut cov = t.betas[a] * t.betas[b] * cfg.market_vol.powi(2);
        if t.supersectors[a] == t.supersectors[b] {
            cov += cfg.sector_vol.powi(2);
        }
        for p in &cfg.planted {
            let g = &t.loadings[&p.indicator];
            cov += g[a] * g[b] * p.factor_vol.powi(2);
        }
        cov / (t.total_vols[a] * t.total_vols[b])
    }

    /// Ideal weights of the standard construction built from the true
    /// parameters: true normalized scores, total volatilities and betas.
    pub fn ideal_weights(&self, indicator: IndicatorId, band: QuantileBand) -> Result<Vec<f64>> {
        let t = &self.truth;
        let score = t
            .normalized_scores
            .get(&indicator)
            .ok_or_else(|| Error::InvalidInput(format!("{indicator} has no static score")))?;
        let m = self.panel.n_assets();
        let mut w = vec![0.0; m];
        let groups: Vec<Vec<usize>> = (1..=N_SUPERSECTORS)
            .map(|s| (0..m).filter(|a| t.supersectors[*a] == s).collect())
            .collect();
        let active: Vec<&Vec<usize>> = groups.iter().filter(|g| g.len() >= band.min_group_size()).collect();
        let n_active: usize = active.iter().map(|g| g.len()).sum();
        for members in active {
            let sel = rank_and_select(score, members, &self.panel.assets, band);
            let sigma_mean = members.iter().map(|a| t.total_vols[*a]).sum::<f64>() / members.len() as f64;
            let legs = raw_weights(&sel, &t.total_vols, sigma_mean);
            let mu = beta_neutralize(&legs, &t.betas, band.q(), members.len());
            let scale = members.len() as f64 / n_active as f64;
            for (i, mag) in legs.long {
                w[i] = scale * mu.mu_plus * mag;
            }
            for (i, mag) in legs.short {
                w[i] = -scale * mu.mu_minus * mag;
            }
        }
        Ok(w)
    }
}

/// Expected FCL of the ideal factor on `indicator`:
///
/// ```text
/// sqrt( Var[Σ w_i r_i] / Σ w_i² σ_i² )
/// ```
///
/// with every variance taken from the generative parameters. With true betas
/// the market term vanishes, and without sector shocks this is
/// `sqrt((Σ w_i g_i)² σ_f² + Σ w_i² σ_ε,i²) / sqrt(Σ w_i² σ_i²)`.
pub fn planted_fcl_oracle(market: &SyntheticMarket, indicator: IndicatorId, band: QuantileBand) -> Result<f64> {
    let cfg = &market.config;
    if cfg.planted(indicator).is_none() {
        return Err(Error::InvalidInput(format!("{indicator} carries no planted factor")));
    }
    let t = &market.truth;
    let w = market.ideal_weights(indicator, band)?;
    let beta_exposure: f64 = w.iter().zip(&t.betas).map(|(w, b)| w * b).sum();
    let mut var = (beta_exposure * cfg.market_vol).powi(2);
    for s in 1..=N_SUPERSECTORS {
        let net: f64 = w.iter().zip(&t.supersectors).filter(|(_, x)| **x == s).map(|(w, _)| w).sum();
        var += (net * cfg.sector_vol).powi(2);
    }
    for p in &cfg.planted {
        let exposure: f64 = w.iter().zip(&t.loadings[&p.indicator]).map(|(w, g)| w * g).sum();
        var += (exposure * p.factor_vol).powi(2);
    }
    var += w.iter().zip(&t.idio_vols).map(|(w, s)| (w * s).powi(2)).sum::<f64>();
    let independent: f64 = w.iter().zip(&t.total_vols).map(|(w, s)| (w * s).powi(2)).sum();
    if independent <= 0.0 {
        return Err(Error::InsufficientData("ideal factor holds no position".into()));
    }
    Ok((var / independent).sqrt())
}
