//! Run configuration, read from a TOML file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use factorlab::factor::QuantileBand;
use factorlab::ladder::Variant;
use factorlab::panel::IndicatorId;
use factorlab::pipeline::Periods;
use factorlab::synth::{LoadingProfile, PlantedFactor, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub universe: String,
    /// Output directory; `--out` overrides it. Not part of the config hash.
    pub out: PathBuf,
    pub data: DataPaths,
    pub synth: SynthSection,
    pub factors: FactorSection,
    pub periods: PeriodSection,
    pub ladder: LadderSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            universe: "synthetic".into(),
            out: PathBuf::from("factorlab-out"),
            data: DataPaths::default(),
            synth: SynthSection::default(),
            factors: FactorSection::default(),
            periods: PeriodSection::default(),
            ladder: LadderSection::default(),
        }
    }
}

/// Input files. Unset paths point at the files `simulate` writes under the
/// output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub prices: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub classification: Option<PathBuf>,
    /// `gics_industry_group,supersector` map replacing the built-in one.
    pub supersectors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_assets: usize,
    pub n_days: usize,
    pub start: String,
    pub countries: Vec<String>,
    pub country_dispersion: f64,
    pub sector_dispersion: f64,
    pub market_vol: f64,
    pub sector_vol: f64,
    pub idio_vol: f64,
    pub idio_dispersion: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    pub publication_jitter: f64,
    pub turnover: f64,
    /// Replaces the default planted factors when present.
    pub planted: Option<Vec<PlantedSection>>,
}

impl Default for SynthSection {
    /// The library defaults, shrunk to a universe that runs in seconds.
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_assets: 120,
            n_days: 800,
            start: d.start.to_string(),
            countries: d.countries,
            country_dispersion: d.country_dispersion,
            sector_dispersion: d.sector_dispersion,
            market_vol: d.market_vol,
            sector_vol: d.sector_vol,
            idio_vol: d.idio_vol,
            idio_dispersion: d.idio_dispersion,
            beta_mean: d.beta_mean,
            beta_std: d.beta_std,
            publication_jitter: d.publication_jitter,
            turnover: d.turnover,
            planted: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSection {
    pub indicator: String,
    /// `decaying`, `extremes` or `zero`.
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_strength")]
    pub strength: f64,
    pub factor_vol: f64,
    #[serde(default)]
    pub drift: f64,
    /// `[supersector, multiplier]`.
    #[serde(default)]
    pub sector_tilt: Option<(u8, f64)>,
}

fn default_profile() -> String {
    "decaying".into()
}

fn default_strength() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorSection {
    pub indicators: Vec<String>,
    pub bands: Vec<String>,
}

impl Default for FactorSection {
    fn default() -> Self {
        Self {
            indicators: IndicatorId::FACTORS.iter().map(|i| i.to_string()).collect(),
            bands: QuantileBand::ALL.iter().map(|b| b.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodSection {
    pub vol: usize,
    pub beta: usize,
    pub fcl: usize,
    pub corr_norm: usize,
    pub rolling: usize,
    pub momentum: usize,
    pub liquidity: usize,
}

impl Default for PeriodSection {
    fn default() -> Self {
        let p = Periods::default();
        Self {
            vol: p.vol,
            beta: p.beta,
            fcl: p.fcl,
            corr_norm: factorlab::riskmetrics::NORMALIZATION_WINDOW,
            rolling: factorlab::riskmetrics::ROLLING_WINDOW,
            momentum: p.momentum,
            liquidity: p.liquidity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSection {
    pub variants: Vec<String>,
    /// Defaults to the published indicators.
    pub indicators: Vec<String>,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.iter().map(|v| v.to_string()).collect(),
            indicators: IndicatorId::PUBLISHED.iter().map(|i| i.to_string()).collect(),
        }
    }
}

/// The configuration after every name has been resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub synth: SynthConfig,
    pub indicators: Vec<IndicatorId>,
    pub bands: Vec<QuantileBand>,
    pub periods: Periods,
    pub corr_norm: usize,
    pub rolling: usize,
    pub variants: Vec<Variant>,
    pub ladder_indicators: Vec<IndicatorId>,
}

fn parse_list<T: std::str::FromStr>(names: &[String], what: &str, errs: &mut Vec<String>) -> Vec<T> {
    if names.is_empty() {
        errs.push(format!("{what}: list is empty"));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            errs.push(format!("{what}: {n:?} is listed twice"));
        }
        match n.parse::<T>() {
            Ok(v) => out.push(v),
            Err(_) => errs.push(format!("{what}: unknown name {n:?}")),
        }
    }
    out
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| crate::CliError::InvalidConfig(vec![e.message().to_owned()]).into())
    }

    /// Checks every constraint and lists all violations.
    pub fn resolve(&self) -> Result<Resolved, Vec<String>> {
        let mut errs = Vec::new();
        let s = &self.synth;

        let start = s.start.parse::<NaiveDate>().unwrap_or_else(|_| {
            errs.push(format!("synth.start: {:?} is not an ISO date", s.start));
            NaiveDate::MIN
        });
        let planted = match &s.planted {
            None => SynthConfig::default().planted,
            Some(list) => list
                .iter()
                .filter_map(|p| {
                    let id = p.indicator.parse::<IndicatorId>();
                    if id.is_err() {
                        errs.push(format!("synth.planted: unknown indicator {:?}", p.indicator));
                    }
                    let profile = match p.profile.as_str() {
                        "decaying" => Some(LoadingProfile::decaying(p.strength)),
                        "extremes" => Some(LoadingProfile::extremes(p.strength)),
                        "zero" => Some(LoadingProfile::zero()),
                        other => {
                            errs.push(format!("synth.planted: unknown profile {other:?}"));
                            None
                        }
                    };
                    Some(PlantedFactor {
                        indicator: id.ok()?,
                        profile: profile?,
                        factor_vol: p.factor_vol,
                        drift: p.drift,
                        sector_tilt: p.sector_tilt,
                    })
                })
                .collect(),
        };
        let synth = SynthConfig {
            n_assets: s.n_assets,
            n_days: s.n_days,
            start,
            countries: s.countries.clone(),
            country_dispersion: s.country_dispersion,
            sector_dispersion: s.sector_dispersion,
            market_vol: s.market_vol,
            sector_vol: s.sector_vol,
            idio_vol: s.idio_vol,
            idio_dispersion: s.idio_dispersion,
            beta_mean: s.beta_mean,
            beta_std: s.beta_std,
            planted,
            publication_jitter: s.publication_jitter,
            turnover: s.turnover,
            seed: self.seed,
        };
        if let Err(e) = synth.validate() {
            errs.extend(e.into_iter().map(|m| format!("synth: {m}")));
        }

        let indicators = parse_list::<IndicatorId>(&self.factors.indicators, "factors.indicators", &mut errs);
        let bands = parse_list::<QuantileBand>(&self.factors.bands, "factors.bands", &mut errs);
        let variants = parse_list::<Variant>(&self.ladder.variants, "ladder.variants", &mut errs);
        let ladder_indicators = parse_list::<IndicatorId>(&self.ladder.indicators, "ladder.indicators", &mut errs);

        let p = &self.periods;
        for (name, v) in [
            ("vol", p.vol),
            ("beta", p.beta),
            ("fcl", p.fcl),
            ("corr_norm", p.corr_norm),
            ("rolling", p.rolling),
            ("momentum", p.momentum),
            ("liquidity", p.liquidity),
        ] {
            if v == 0 {
                errs.push(format!("periods.{name} must be positive"));
            }
        }
        if p.rolling == 1 {
            errs.push("periods.rolling must cover at least two days".into());
        }

        for (name, path) in [
            ("data.prices", &self.data.prices),
            ("data.indicators", &self.data.indicators),
            ("data.classification", &self.data.classification),
            ("data.supersectors", &self.data.supersectors),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    errs.push(format!("{name}: {} does not exist", path.display()));
                }
            }
        }

        if !errs.is_empty() {
            return Err(errs);
        }
        Ok(Resolved {
            synth,
            indicators,
            bands,
            periods: Periods {
                vol: p.vol,
                beta: p.beta,
                fcl: p.fcl,
                momentum: p.momentum,
                liquidity: p.liquidity,
            },
            corr_norm: p.corr_norm,
            rolling: p.rolling,
            variants,
            ladder_indicators,
        })
    }

    /// SHA-256 of the canonical TOML form, output directory excluded.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            out: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("configuration serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
