use std::cmp::Ordering;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FactorReturnSeries, FactorWeightSeries, GroupLegs, Membership, QuantileBand};
use crate::error::{Error, Result};
use crate::estimators::{BetaSeries, VolSeries};
use crate::grid::Grid;
use crate::panel::{IndicatorId, IndicatorPanel, ReturnPanel};

/// How the eligible universe is split before ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grouping {
    Universe,
    /// Strictly below the same-day median capitalization against the rest,
    /// merged 50/50.
    CapitalizationSplit,
    Supersectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    Equal,
    /// `min(1, σ_mean / σ_i)`.
    InverseVolatility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Neutrality {
    /// Both legs carry the same gross weight, `Σ w = 0`.
    Delta,
    /// Legs rescaled by `μ±` so that `Σ β w = 0`.
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstructionRules {
    pub band: QuantileBand,
    pub grouping: Grouping,
    pub weighting: Weighting,
    pub neutrality: Neutrality,
}

impl ConstructionRules {
    /// Supersector ranking, capped inverse-volatility weights, beta neutral.
    pub fn standard(band: QuantileBand) -> Self {
        Self {
            band,
            grouping: Grouping::Supersectors,
            weighting: Weighting::InverseVolatility,
            neutrality: Neutrality::Beta,
        }
    }
}

/// Date-aligned inputs of the construction.
#[derive(Debug, Clone, Copy)]
pub struct FactorInputs<'a> {
    pub panel: &'a ReturnPanel,
    pub indicator: &'a IndicatorPanel,
    pub vols: &'a VolSeries,
    pub betas: &'a BetaSeries,
    /// Supersector 1..=6 per asset.
    pub supersectors: &'a [u8],
    /// Needed by [`Grouping::CapitalizationSplit`] only.
    pub capitalization: Option<&'a IndicatorPanel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    pub long: Vec<usize>,
    pub short: Vec<usize>,
}

/// Sorts `members` by indicator, descending, ties broken by ascending asset id,
/// and returns the positional long and short slices of `band`.
///
/// Groups smaller than [`QuantileBand::min_group_size`] yield empty legs.
pub fn rank_and_select(values: &[f64], members: &[usize], assets: &[String], band: QuantileBand) -> Selection {
    let n = members.len();
    if n < band.min_group_size() {
        debug!("{n} eligible assets is too few for band {band}; group skipped");
        return Selection::default();
    }
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| match values[b].total_cmp(&values[a]) {
        Ordering::Equal => assets[a].cmp(&assets[b]),
        other => other,
    });
    Selection {
        long: order[band.long.0.of(n)..band.long.1.of(n)].to_vec(),
        short: order[band.short.0.of(n)..band.short.1.of(n)].to_vec(),
    }
}

/// Leg members with their unsigned weight magnitudes before `μ±` scaling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawLegs {
    pub long: Vec<(usize, f64)>,
    pub short: Vec<(usize, f64)>,
    /// Selected members without a usable volatility; their slot stays empty.
    pub excluded: Vec<usize>,
}

/// Capped inverse-volatility magnitudes `min(1, σ_mean / σ_i)`.
pub fn raw_weights(selection: &Selection, sigma: &[f64], sigma_mean: f64) -> RawLegs {
    let mut legs = RawLegs::default();
    let weigh = |ids: &[usize], out: &mut Vec<(usize, f64)>, excluded: &mut Vec<usize>| {
        for &i in ids {
            let s = sigma[i];
            if s.is_finite() && s > 0.0 {
                out.push((i, (sigma_mean / s).min(1.0)));
            } else {
                excluded.push(i);
            }
        }
    };
    weigh(&selection.long, &mut legs.long, &mut legs.excluded);
    weigh(&selection.short, &mut legs.short, &mut legs.excluded);
    legs
}

fn equal_weights(selection: &Selection) -> RawLegs {
    RawLegs {
        long: selection.long.iter().map(|&i| (i, 1.0)).collect(),
        short: selection.short.iter().map(|&i| (i, 1.0)).collect(),
        excluded: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegNeutrality {
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub fallback: bool,
}

/// Solves `Σ β_i w_i = 0` by shrinking the leg with the larger aggregate beta.
///
/// The other leg keeps the multiplier `1/(2 q n_s)`. When either leg has a
/// non-positive aggregate beta, the only non-negative solution is
/// `μ₊ = μ₋ = 0`: the group holds nothing that day and the result is flagged.
pub fn beta_neutralize(legs: &RawLegs, betas: &[f64], q: f64, n_s: usize) -> LegNeutrality {
    let full = 1.0 / (2.0 * q * n_s as f64);
    let aggregate = |leg: &[(usize, f64)]| leg.iter().map(|&(i, m)| betas[i] * m).sum::<f64>();
    let (bl, bs) = (aggregate(&legs.long), aggregate(&legs.short));
    if !(bl > 0.0 && bs > 0.0) {
        debug!("leg aggregate betas ({bl}, {bs}) not both positive; group left empty");
        return LegNeutrality {
            mu_plus: 0.0,
            mu_minus: 0.0,
            fallback: true,
        };
    }
    let (mu_plus, mu_minus) = if bl > bs {
        (full * bs / bl, full)
    } else {
        (full, full * bl / bs)
    };
    LegNeutrality {
        mu_plus,
        mu_minus,
        fallback: false,
    }
}

struct ActiveGroup {
    key: u8,
    n_s: usize,
    legs: RawLegs,
}

fn check_shapes(inputs: &FactorInputs<'_>, rules: &ConstructionRules) -> Result<()> {
    let (n, m) = (inputs.panel.n_dates(), inputs.panel.n_assets());
    let grids = [
        ("indicator", &inputs.indicator.values),
        ("volatility", &inputs.vols.values),
        ("beta", &inputs.betas.values),
    ];
    for (name, g) in grids {
        if g.rows() != n || g.cols() != m {
            return Err(Error::InvalidInput(format!(
                "{name} panel is {}×{}, expected {n}×{m}",
                g.rows(),
                g.cols()
            )));
        }
    }
    if inputs.supersectors.len() != m {
        return Err(Error::InvalidInput("supersector assignment does not cover the panel".into()));
    }
    if rules.grouping == Grouping::CapitalizationSplit {
        let cap = inputs
            .capitalization
            .ok_or_else(|| Error::InvalidInput("capitalization split needs the capitalization panel".into()))?;
        if cap.values.rows() != n || cap.values.cols() != m {
            return Err(Error::InvalidInput("capitalization panel is not aligned".into()));
        }
    }
    Ok(())
}

/// Builds daily weights under `rules`. Weights at `t` use indicators,
/// volatilities and betas known before `t`; eligibility also requires a
/// return on `t`.
pub fn construct_factor(inputs: &FactorInputs<'_>, rules: ConstructionRules) -> Result<FactorWeightSeries> {
    check_shapes(inputs, &rules)?;
    let panel = inputs.panel;
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let band = rules.band;
    let q = band.q();

    let mut weights = Grid::filled(n, m, 0.0);
    let mut membership = vec![Membership::Excluded; n * m];
    let mut all_groups = Vec::with_capacity(n);
    let mut empty = Vec::with_capacity(n);

    for t in 0..n {
        let ind = inputs.indicator.values.row(t);
        let sigma = inputs.vols.values.row(t);
        let beta = inputs.betas.values.row(t);
        let ret = panel.returns.row(t);
        let cap = inputs.capitalization.map(|c| c.values.row(t));

        let eligible: Vec<usize> = (0..m)
            .filter(|&a| {
                ind[a].is_finite()
                    && ret[a].is_finite()
                    && sigma[a].is_finite()
                    && sigma[a] > 0.0
                    && beta[a].is_finite()
                    && (rules.grouping != Grouping::CapitalizationSplit || cap.is_some_and(|c| c[a].is_finite()))
            })
            .collect();

        let groups: Vec<(u8, Vec<usize>)> = match rules.grouping {
            Grouping::Universe => vec![(0, eligible)],
            Grouping::Supersectors => {
                let mut buckets: Vec<(u8, Vec<usize>)> = (1..=super::N_SUPERSECTORS).map(|s| (s, Vec::new())).collect();
                for a in eligible {
                    let s = inputs.supersectors[a];
                    if let Some(b) = buckets.iter_mut().find(|(k, _)| *k == s) {
                        b.1.push(a);
                    }
                }
                buckets
            }
            Grouping::CapitalizationSplit => {
                let cap = cap.expect("checked");
                let mut caps: Vec<f64> = eligible.iter().map(|&a| cap[a]).collect();
                let (small, large) = match crate::grid::median(&mut caps) {
                    Some(med) => eligible.into_iter().partition(|&a| cap[a] < med),
                    None => (Vec::new(), Vec::new()),
                };
                vec![(1, small), (2, large)]
            }
        };

        let mut active = Vec::new();
        for (key, members) in groups {
            let selection = rank_and_select(ind, &members, &panel.assets, band);
            if selection.long.is_empty() || selection.short.is_empty() {
                continue;
            }
            let legs = match rules.weighting {
                Weighting::Equal => equal_weights(&selection),
                Weighting::InverseVolatility => {
                    let sigma_mean = members.iter().map(|&a| sigma[a]).sum::<f64>() / members.len() as f64;
                    raw_weights(&selection, sigma, sigma_mean)
                }
            };
            if legs.long.is_empty() || legs.short.is_empty() {
                continue;
            }
            active.push(ActiveGroup {
                key,
                n_s: members.len(),
                legs,
            });
        }

        let n_active: usize = active.iter().map(|g| g.n_s).sum();
        let mut day_groups = Vec::with_capacity(active.len());
        let w_row = weights.row_mut(t);
        let mem_row = &mut membership[t * m..(t + 1) * m];
        let count = active.len();
        let mut invested = false;
        for g in active {
            let scale = match rules.grouping {
                Grouping::Supersectors => g.n_s as f64 / n_active as f64,
                Grouping::CapitalizationSplit => 1.0 / count as f64,
                Grouping::Universe => 1.0,
            };
            let neutral = match rules.neutrality {
                Neutrality::Beta => beta_neutralize(&g.legs, beta, q, g.n_s),
                Neutrality::Delta => {
                    let sum = |leg: &[(usize, f64)]| leg.iter().map(|(_, v)| v).sum::<f64>();
                    LegNeutrality {
                        mu_plus: 0.5 / sum(&g.legs.long),
                        mu_minus: 0.5 / sum(&g.legs.short),
                        fallback: false,
                    }
                }
            };
            if !neutral.fallback {
                invested = true;
                for &(i, mag) in &g.legs.long {
                    w_row[i] = scale * neutral.mu_plus * mag;
                    mem_row[i] = Membership::Long;
                }
                for &(i, mag) in &g.legs.short {
                    w_row[i] = -scale * neutral.mu_minus * mag;
                    mem_row[i] = Membership::Short;
                }
            }
            day_groups.push(GroupLegs {
                group: g.key,
                n_s: g.n_s,
                n_long: g.legs.long.len(),
                n_short: g.legs.short.len(),
                mu_plus: neutral.mu_plus,
                mu_minus: neutral.mu_minus,
                scale,
                fallback: neutral.fallback,
            });
        }
        if !invested {
            debug!("{} {band} {}: no group could be invested", inputs.indicator.indicator, panel.dates[t]);
        }
        empty.push(!invested);
        all_groups.push(day_groups);
    }

    Ok(FactorWeightSeries {
        indicator: inputs.indicator.indicator,
        band,
        rules,
        dates: panel.dates.clone(),
        weights,
        membership,
        groups: all_groups,
        empty,
    })
}

/// Supersector-neutral, beta-neutral, capped inverse-volatility factor.
pub fn build_factor(
    indicator: &IndicatorPanel,
    panel: &ReturnPanel,
    vols: &VolSeries,
    betas: &BetaSeries,
    band: QuantileBand,
    supersectors: &[u8],
) -> Result<FactorWeightSeries> {
    let inputs = FactorInputs {
        panel,
        indicator,
        vols,
        betas,
        supersectors,
        capitalization: None,
    };
    construct_factor(&inputs, ConstructionRules::standard(band))
}

/// Static ranking with no financial content: a seeded random permutation, or
/// alphabetical order of asset ids when `seed` is `None` (first ids rank highest).
pub fn noise_indicator(panel: &ReturnPanel, seed: Option<u64>) -> IndicatorPanel {
    let m = panel.n_assets();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| panel.assets[a].cmp(&panel.assets[b]));
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut score = vec![0.0; m];
    for (rank, &a) in order.iter().enumerate() {
        score[a] = (m - rank) as f64;
    }
    let mut values = Grid::missing(panel.n_dates(), m);
    for t in 0..panel.n_dates() {
        values.row_mut(t).copy_from_slice(&score);
    }
    IndicatorPanel {
        indicator: IndicatorId::Noise,
        values,
    }
}

pub fn build_noise_factor(
    panel: &ReturnPanel,
    vols: &VolSeries,
    betas: &BetaSeries,
    band: QuantileBand,
    supersectors: &[u8],
    seed: Option<u64>,
) -> Result<FactorWeightSeries> {
    build_factor(&noise_indicator(panel, seed), panel, vols, betas, band, supersectors)
}

/// `Σ_i w_i(t) r_i(t)`; a missing return contributes zero.
pub fn factor_return(weights: &FactorWeightSeries, panel: &ReturnPanel) -> FactorReturnSeries {
    let mut skipped = 0usize;
    let returns = (0..weights.n_dates())
        .map(|t| {
            let r = panel.returns.row(t);
            weights
                .weights
                .row(t)
                .iter()
                .zip(r)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, x)| {
                    if x.is_finite() {
                        w * x
                    } else {
                        skipped += 1;
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    if skipped > 0 {
        debug!("{}:{} {skipped} weighted positions had no return", weights.indicator, weights.band);
    }
    FactorReturnSeries {
        indicator: weights.indicator,
        band: weights.band,
        dates: weights.dates.clone(),
        returns,
    }
}
