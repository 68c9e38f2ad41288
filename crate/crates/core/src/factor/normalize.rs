use std::collections::BTreeMap;

use log::debug;

use crate::grid::{median, Grid};
use crate::panel::{Classification, IndicatorPanel};

/// Countries with fewer same-day observations are left unnormalized.
pub const MIN_COUNTRY_ASSETS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizationReport {
    /// `(date index, country)` pairs left unnormalized for lack of assets.
    pub unnormalized: Vec<(usize, String)>,
    /// `(date index, country)` pairs dropped because the country median was zero.
    pub zero_median: Vec<(usize, String)>,
}

/// Divides ratio indicators by their same-day country median.
///
/// Non-ratio indicators (momentum, low volatility, noise) are returned as is.
pub fn normalize_by_country(ind: &IndicatorPanel, classification: &Classification) -> (IndicatorPanel, NormalizationReport) {
    let mut report = NormalizationReport::default();
    if !ind.indicator.is_ratio() {
        return (ind.clone(), report);
    }
    let mut by_country: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (a, c) in classification.country.iter().enumerate() {
        by_country.entry(c.as_str()).or_default().push(a);
    }
    let (n, m) = (ind.values.rows(), ind.values.cols());
    let mut values = Grid::missing(n, m);
    let mut buf = Vec::new();
    for t in 0..n {
        for (country, members) in &by_country {
            buf.clear();
            buf.extend(members.iter().filter_map(|&a| ind.values.get(t, a)));
            if buf.is_empty() {
                continue;
            }
            if buf.len() < MIN_COUNTRY_ASSETS {
                report.unnormalized.push((t, (*country).to_owned()));
                for &a in members {
                    values.set(t, a, ind.values.raw(t, a));
                }
                continue;
            }
            let med = median(&mut buf).expect("non-empty");
            if med == 0.0 {
                report.zero_median.push((t, (*country).to_owned()));
                continue;
            }
            for &a in members {
                values.set(t, a, ind.values.raw(t, a) / med);
            }
        }
    }
    if !report.unnormalized.is_empty() || !report.zero_median.is_empty() {
        debug!(
            "{}: {} country-days unnormalized, {} dropped on zero median",
            ind.indicator,
            report.unnormalized.len(),
            report.zero_median.len()
        );
    }
    (
        IndicatorPanel {
            indicator: ind.indicator,
            values,
        },
        report,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::IndicatorId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn class(countries: &[&str]) -> Classification {
        Classification {
            country: countries.iter().map(|c| (*c).to_owned()).collect(),
            industry_group: vec!["Banks".into(); countries.len()],
        }
    }

    #[test]
    fn single_country_median_maps_to_one() {
        let ind = IndicatorPanel {
            indicator: IndicatorId::Remuneration,
            values: Grid::from_rows(1, 3, vec![10.0, 20.0, 40.0]),
        };
        let (out, rep) = normalize_by_country(&ind, &class(&["FR", "FR", "FR"]));
        assert_eq!(out.values.row(0), &[0.5, 1.0, 2.0]);
        assert!(rep.unnormalized.is_empty());
    }

    #[test]
    fn two_countries_map_to_same_relative_value() {
        let ind = IndicatorPanel {
            indicator: IndicatorId::Cash,
            values: Grid::from_rows(1, 6, vec![5.0, 10.0, 20.0, 50.0, 100.0, 200.0]),
        };
        let (out, _) = normalize_by_country(&ind, &class(&["A", "A", "A", "B", "B", "B"]));
        assert_eq!(out.values.raw(0, 2), 2.0);
        assert_eq!(out.values.raw(0, 5), 2.0);
    }

    #[test]
    fn small_countries_flagged_and_zero_median_dropped() {
        let ind = IndicatorPanel {
            indicator: IndicatorId::Dividend,
            values: Grid::from_rows(1, 5, vec![3.0, 4.0, 0.0, 0.0, 1.0]),
        };
        let (out, rep) = normalize_by_country(&ind, &class(&["S", "S", "Z", "Z", "Z"]));
        assert_eq!(out.values.row(0)[..2], [3.0, 4.0]);
        assert!(out.values.row(0)[2..].iter().all(|v| v.is_nan()));
        assert_eq!(rep.unnormalized, vec![(0, "S".to_owned())]);
        assert_eq!(rep.zero_median, vec![(0, "Z".to_owned())]);
    }

    #[test]
    fn momentum_is_untouched() {
        let ind = IndicatorPanel {
            indicator: IndicatorId::Momentum,
            values: Grid::from_rows(1, 3, vec![-1.0, 0.0, 1.0]),
        };
        let (out, _) = normalize_by_country(&ind, &class(&["A", "A", "A"]));
        assert_eq!(out, ind);
    }

    #[test]
    fn medians_match_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let countries = ["DE", "FR", "GB", "IT"];
        let m = 57;
        let n = 30;
        let cls: Vec<&str> = (0..m).map(|_| countries[rng.random_range(0..4)]).collect();
        let mut g = Grid::missing(n, m);
        for t in 0..n {
            for a in 0..m {
                if rng.random::<f64>() > 0.1 {
                    g.set(t, a, rng.random_range(0.5..3.0));
                }
            }
        }
        let ind = IndicatorPanel {
            indicator: IndicatorId::BookToMarket,
            values: g.clone(),
        };
        let (out, _) = normalize_by_country(&ind, &class(&cls));
        for t in 0..n {
            for c in countries {
                let mut vals: Vec<f64> = (0..m).filter(|a| cls[*a] == c).filter_map(|a| g.get(t, a)).collect();
                if vals.len() < MIN_COUNTRY_ASSETS {
                    continue;
                }
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let k = vals.len();
                let med = if k % 2 == 1 { vals[k / 2] } else { (vals[k / 2 - 1] + vals[k / 2]) / 2.0 };
                for a in (0..m).filter(|a| cls[*a] == c) {
                    if let Some(v) = g.get(t, a) {
                        assert_eq!(out.values.raw(t, a), v / med);
                    }
                }
            }
        }
    }
}
