use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};

use factorlab::factor::{
    read_returns_csv, read_weights_csv, write_returns_csv, write_weights_csv, FactorReturnSeries, FactorWeightSeries,
    SupersectorMap,
};
use factorlab::ladder::{index_volatility, ladder_report, random_exposure_vol, LadderEstimates, MarketExposure, Variant};
use factorlab::panel::{ingest_classification, ingest_indicators, ingest_prices, price_file_calendar};
use factorlab::perf::{impact_decomposition, stats, write_stats_csv, PortfolioStats};
use factorlab::pipeline::{build_standard_factor, estimate, MarketData};
use factorlab::riskmetrics::{fcl, interfactor_correlation, rolling_correlation, write_fcl_csv, DeltaSeries};
use factorlab::spectrum::{classify_spectrum, correlation_matrix, eigen_decompose};
use factorlab::synth::generate_market;

use crate::config::{Resolved, RunConfig};
use crate::output::{write_csv, write_key_values, write_table, Meta};
use crate::{CliError, Command};

/// Where each artifact lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    pub fn path(&self, stage: &str, file: &str) -> PathBuf {
        self.out.join(stage).join(file)
    }

    pub fn weights(&self) -> PathBuf {
        self.path("build", "weights.csv")
    }

    pub fn factor_returns(&self) -> PathBuf {
        self.path("build", "returns.csv")
    }
}

struct Run<'a> {
    cfg: &'a RunConfig,
    res: Resolved,
    layout: Layout,
    meta: Meta,
}

pub fn execute(command: Command, cfg: &RunConfig) -> anyhow::Result<()> {
    let res = cfg.resolve().map_err(CliError::InvalidConfig)?;
    let run = Run {
        cfg,
        res,
        layout: Layout::new(&cfg.out),
        meta: Meta {
            command: command.name(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
    };
    info!("{} into {} (config {})", command.name(), cfg.out.display(), &run.meta.config_hash[..12]);
    match command {
        Command::Simulate => run.simulate(),
        Command::Ingest => run.ingest(),
        Command::Build => run.build(),
        Command::Fcl => run.fcl(),
        Command::Pca => run.pca(),
        Command::Stats => run.stats(),
        Command::Ladder => run.ladder(),
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path.to_path_buf()).into());
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

impl Run<'_> {
    fn input(&self, configured: &Option<PathBuf>, file: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.layout.path("data", file))
    }

    fn load_market(&self) -> anyhow::Result<MarketData> {
        let d = &self.cfg.data;
        let prices = self.input(&d.prices, "prices.csv");
        let indicators = self.input(&d.indicators, "indicators.csv");
        let classification = self.input(&d.classification, "classification.csv");
        let calendar = price_file_calendar(open(&prices)?).with_context(|| format!("reading {}", prices.display()))?;
        let panel = ingest_prices(open(&prices)?, &calendar).with_context(|| format!("reading {}", prices.display()))?;
        let ind = ingest_indicators(open(&indicators)?, &panel).with_context(|| format!("reading {}", indicators.display()))?;
        let cls = ingest_classification(open(&classification)?, &panel)
            .with_context(|| format!("reading {}", classification.display()))?;
        let map = match &d.supersectors {
            Some(path) => SupersectorMap::from_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?,
            None => SupersectorMap::default(),
        };
        Ok(MarketData::new(panel, ind, cls, &map)?)
    }

    fn load_factor_returns(&self) -> anyhow::Result<Vec<FactorReturnSeries>> {
        let path = self.layout.factor_returns();
        read_returns_csv(open(&path)?).with_context(|| format!("reading {}", path.display()))
    }

    fn simulate(&self) -> anyhow::Result<()> {
        let m = generate_market(&self.res.synth)?;
        let meta = &self.meta;
        write_csv(&self.layout.path("data", "prices.csv"), meta, |o| m.write_prices(o))?;
        write_csv(&self.layout.path("data", "indicators.csv"), meta, |o| m.write_indicators(o))?;
        write_csv(&self.layout.path("data", "classification.csv"), meta, |o| m.write_classification(o))?;
        let t = &m.truth;
        let rows: Vec<Vec<String>> = (0..m.panel.n_assets())
            .map(|a| {
                vec![
                    m.panel.assets[a].clone(),
                    t.supersectors[a].to_string(),
                    fmt(t.betas[a]),
                    fmt(t.idio_vols[a]),
                    fmt(t.total_vols[a]),
                ]
            })
            .collect();
        write_table(
            &self.layout.path("data", "truth.csv"),
            meta,
            &["asset_id", "supersector", "beta", "idio_vol", "total_vol"],
            &rows,
        )
    }

    fn ingest(&self) -> anyhow::Result<()> {
        let data = self.load_market()?;
        let p = &data.panel;
        let mut rows = vec![
            ("universe", self.cfg.universe.clone()),
            ("n_assets", p.n_assets().to_string()),
            ("n_price_days", p.calendar.len().to_string()),
            ("n_return_days", p.n_dates().to_string()),
            ("first_date", p.calendar.first().map_or_else(String::new, |d| d.to_string())),
            ("last_date", p.calendar.last().map_or_else(String::new, |d| d.to_string())),
            ("has_volume", p.volumes.is_some().to_string()),
        ];
        let missing = p.returns.as_slice().iter().filter(|r| !r.is_finite()).count();
        rows.push(("missing_returns", missing.to_string()));
        let coverage: Vec<(String, String)> = data
            .indicators
            .iter()
            .map(|(id, panel)| {
                let present = panel.values.as_slice().iter().filter(|v| v.is_finite()).count();
                (format!("coverage_{id}"), fmt(present as f64 / panel.values.as_slice().len().max(1) as f64))
            })
            .collect();
        let mut all: Vec<(&str, String)> = rows;
        all.extend(coverage.iter().map(|(k, v)| (k.as_str(), v.clone())));
        write_key_values(&self.layout.path("ingest", "summary.csv"), &self.meta, &all)?;

        let universe: Vec<Vec<String>> = (0..p.n_assets())
            .map(|a| {
                vec![
                    p.assets[a].clone(),
                    data.classification.country[a].clone(),
                    data.classification.industry_group[a].clone(),
                    data.supersectors[a].to_string(),
                ]
            })
            .collect();
        write_table(
            &self.layout.path("ingest", "universe.csv"),
            &self.meta,
            &["asset_id", "country", "gics_industry_group", "supersector"],
            &universe,
        )
    }

    fn build(&self) -> anyhow::Result<()> {
        let data = self.load_market()?;
        let est = estimate(&data.panel, &self.res.periods);
        let mut weights = Vec::new();
        let mut returns = Vec::new();
        let mut summary = Vec::new();
        for &id in &self.res.indicators {
            for &band in &self.res.bands {
                let f = build_standard_factor(&data, &est, id, band, &self.res.periods, Some(self.cfg.seed))
                    .with_context(|| format!("building {id}:{band}"))?;
                summary.push(build_summary(&f.weights, &est.betas.values));
                weights.push(f.weights);
                returns.push(f.returns);
            }
        }
        let p = &data.panel;
        write_csv(&self.layout.weights(), &self.meta, |o| write_weights_csv(&weights, &p.assets, &data.supersectors, o))?;
        write_csv(&self.layout.factor_returns(), &self.meta, |o| write_returns_csv(&returns, o))?;
        write_table(
            &self.layout.path("build", "summary.csv"),
            &self.meta,
            &[
                "indicator_id",
                "band",
                "active_days",
                "mean_gross",
                "max_gross",
                "max_abs_beta_exposure",
                "mean_net_investment",
            ],
            &summary,
        )
    }

    fn fcl(&self) -> anyhow::Result<()> {
        let weights_path = self.layout.weights();
        let weights_file = open(&weights_path)?;
        let returns = self.load_factor_returns()?;
        let data = self.load_market()?;
        let weights = read_weights_csv(weights_file, &data.panel)
            .with_context(|| format!("reading {}", weights_path.display()))?;
        let est = estimate(&data.panel, &self.res.periods);
        let mut series = Vec::new();
        let mut rows = Vec::new();
        for r in &returns {
            let w = match weights.iter().find(|w| w.indicator == r.indicator && w.band == r.band) {
                Some(w) => w.clone(),
                None => {
                    warn!("{} has no weights; treating it as never invested", r.id());
                    FactorWeightSeries::from_parts(
                        r.indicator,
                        factorlab::factor::ConstructionRules::standard(r.band),
                        data.panel.dates.clone(),
                        factorlab::grid::Grid::filled(data.panel.n_dates(), data.panel.n_assets(), 0.0),
                    )
                }
            };
            if r.dates != data.panel.dates {
                anyhow::bail!("{} in {} is not aligned with the price panel", r.id(), self.layout.factor_returns().display());
            }
            let s = fcl(r, &w, &est.vols, self.res.periods.fcl)?;
            rows.push(vec![
                r.indicator.to_string(),
                r.band.to_string(),
                fmt_opt(s.mean()),
                fmt_opt(s.settled_mean()),
                fmt_opt(s.last()),
                fmt_opt(DeltaSeries::from_weights(&w).mean()),
            ]);
            series.push(s);
        }
        write_csv(&self.layout.path("fcl", "fcl.csv"), &self.meta, |o| write_fcl_csv(&series, o))?;
        write_table(
            &self.layout.path("fcl", "summary.csv"),
            &self.meta,
            &["indicator_id", "band", "mean_fcl", "settled_fcl", "last_fcl", "mean_net_investment"],
            &rows,
        )
    }

    fn pca(&self) -> anyhow::Result<()> {
        let data = self.load_market()?;
        let est = estimate(&data.panel, &self.res.periods);
        let c = correlation_matrix(&data.panel, &est.vols)?;
        let spec = eigen_decompose(&c.matrix, c.n_obs)?;
        let cls = classify_spectrum(&spec);
        write_csv(&self.layout.path("pca", "spectrum.csv"), &self.meta, |o| spec.write_csv(o))?;
        write_csv(&self.layout.path("pca", "histogram.csv"), &self.meta, |o| cls.write_histogram_csv(o))?;
        write_key_values(
            &self.layout.path("pca", "mp.csv"),
            &self.meta,
            &[
                ("n_assets", spec.n.to_string()),
                ("n_obs", spec.t_obs.to_string()),
                ("q", fmt(spec.n as f64 / spec.t_obs as f64)),
                ("lambda_min", fmt(spec.mp_lambda_min)),
                ("lambda_max", fmt(spec.mp_lambda_max)),
                ("sqrt_lambda_max", format!("{:.2}", cls.sqrt_lambda_max)),
                ("market_eigenvalue", fmt(cls.market)),
                ("n_signal_factors", cls.n_signal_factors().to_string()),
                ("trace", fmt(spec.eigenvalues.iter().sum())),
            ],
        )
    }

    fn stats(&self) -> anyhow::Result<()> {
        let returns = self.load_factor_returns()?;
        let mut rows: Vec<(String, PortfolioStats)> = Vec::new();
        for r in &returns {
            rows.push((r.id(), stats(r).with_context(|| format!("statistics of {}", r.id()))?));
        }
        write_csv(&self.layout.path("stats", "stats.csv"), &self.meta, |o| write_stats_csv(&rows, o))?;

        if returns.len() < 2 {
            warn!("fewer than two factors; skipping correlations");
            return Ok(());
        }
        let corr = interfactor_correlation(&returns, self.res.corr_norm)?;
        write_csv(&self.layout.path("stats", "correlation.csv"), &self.meta, |o| corr.write_csv(o))?;

        let mut rolling = Vec::new();
        let mut impact = Vec::new();
        for &band in &self.res.bands {
            let group: Vec<&FactorReturnSeries> = returns.iter().filter(|r| r.band == band).collect();
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    let rc = rolling_correlation(&a.returns, &b.returns, self.res.rolling, self.res.corr_norm)?;
                    for (d, v) in a.dates.iter().zip(&rc.values) {
                        if v.is_finite() {
                            rolling.push(vec![d.to_string(), a.id(), b.id(), fmt(*v), fmt(rc.band)]);
                        }
                    }
                }
            }
            if group.len() < 2 {
                continue;
            }
            let biases: BTreeMap<String, f64> = group
                .iter()
                .map(|r| {
                    let s = &rows.iter().find(|(id, _)| *id == r.id()).expect("stats for every factor").1;
                    (r.id(), s.annualized_bias)
                })
                .collect();
            for r in &group {
                let d = impact_decomposition(&r.id(), &biases, &corr)?;
                let t = rows.iter().find(|(id, _)| *id == r.id()).and_then(|(_, s)| s.t_stat);
                impact.push(vec![
                    d.target.clone(),
                    fmt(d.bias),
                    fmt(d.bias - d.intrinsic),
                    fmt(d.intrinsic),
                    fmt_opt(t),
                    fmt_opt(t.filter(|_| d.bias != 0.0).map(|t| d.implied_t_stat(t))),
                ]);
            }
        }
        write_table(
            &self.layout.path("stats", "rolling.csv"),
            &self.meta,
            &["date", "factor_a", "factor_b", "correlation", "noise_band"],
            &rolling,
        )?;
        write_table(
            &self.layout.path("stats", "impact.csv"),
            &self.meta,
            &["factor", "bias", "explained", "intrinsic", "t_stat", "implied_t_stat"],
            &impact,
        )
    }

    fn ladder(&self) -> anyhow::Result<()> {
        let data = self.load_market()?;
        let est = LadderEstimates::new(&data, estimate(&data.panel, &self.res.periods));
        let (report, built) = ladder_report(
            &self.res.variants,
            &self.res.ladder_indicators,
            &data,
            &est,
            &self.res.periods,
            Some(self.cfg.seed),
        )?;
        write_csv(&self.layout.path("ladder", "ladder.csv"), &self.meta, |o| report.write_csv(o))?;

        let mut summary: Vec<Vec<String>> = self
            .res
            .variants
            .iter()
            .map(|&v| {
                let label = report.rows.iter().find(|r| r.variant == v).map_or_else(String::new, |r| r.label.clone());
                vec![v.to_string(), label, fmt_opt(report.median_std(v))]
            })
            .collect();
        summary.sort();
        write_table(
            &self.layout.path("ladder", "summary.csv"),
            &self.meta,
            &["variant", "label", "median_monthly_std"],
            &summary,
        )?;

        let find = |v: Variant, id| built.iter().find(|f| f.config.variant == v && f.returns.indicator == id);
        let mut exposures = Vec::new();
        let mut rows = Vec::new();
        for &id in &self.res.ladder_indicators {
            if let (Some(a4), Some(a5)) = (find(Variant::A4, id), find(Variant::A5, id)) {
                let e = MarketExposure::measure(a4, a5, &data)?;
                rows.push(vec![id.to_string(), fmt(e.delta_neutral_beta), fmt(e.beta_neutral_beta)]);
                exposures.push(e);
            }
        }
        if exposures.is_empty() {
            return Ok(());
        }
        let index_vol = index_volatility(&data)?;
        rows.push(vec![
            "random_exposure_vol".into(),
            String::new(),
            fmt_opt(random_exposure_vol(&exposures, index_vol)),
        ]);
        write_table(
            &self.layout.path("ladder", "exposure.csv"),
            &self.meta,
            &["factor", "delta_neutral_beta", "beta_neutral_beta"],
            &rows,
        )
    }
}

fn build_summary(w: &FactorWeightSeries, betas: &factorlab::grid::Grid) -> Vec<String> {
    let n = w.n_dates();
    let mut active = 0usize;
    let (mut sum_gross, mut max_gross, mut max_beta) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..n {
        let g = w.gross(t);
        if g == 0.0 {
            continue;
        }
        active += 1;
        sum_gross += g;
        max_gross = max_gross.max(g);
        let exposure: f64 = w
            .weights
            .row(t)
            .iter()
            .zip(betas.row(t))
            .filter(|(wt, _)| **wt != 0.0)
            .map(|(wt, b)| wt * b)
            .sum();
        max_beta = max_beta.max(exposure.abs());
    }
    vec![
        w.indicator.to_string(),
        w.band.to_string(),
        active.to_string(),
        fmt(if active > 0 { sum_gross / active as f64 } else { 0.0 }),
        fmt(max_gross),
        format!("{max_beta:.3e}"),
        fmt_opt(DeltaSeries::from_weights(w).mean()),
    ]
}
