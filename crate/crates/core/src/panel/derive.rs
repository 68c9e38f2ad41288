use std::collections::BTreeMap;

use super::{Classification, IndicatorId, IndicatorPanel, ReturnPanel};
use crate::error::{Error, Result};
use crate::estimators::Ema;
use crate::grid::{median, Grid};

/// Three years of trading days.
pub const MOMENTUM_PERIOD: usize = 756;
/// One trading week.
pub const LIQUIDITY_PERIOD: usize = 5;

/// EMA of past daily returns minus the same-day country median of that EMA.
///
/// The value at date `t` uses returns dated before `t` only.
pub fn derive_momentum(panel: &ReturnPanel, classification: &Classification, period: usize) -> IndicatorPanel {
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let mut raw = Grid::missing(n, m);
    for a in 0..m {
        let mut state = Ema::new(period);
        for t in 0..n {
            if let Some(v) = state.value() {
                raw.set(t, a, v);
            }
            state.update(panel.returns.raw(t, a));
        }
    }

    let mut by_country: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (a, c) in classification.country.iter().enumerate() {
        by_country.entry(c.as_str()).or_default().push(a);
    }
    let mut values = Grid::missing(n, m);
    let mut buf = Vec::new();
    for t in 0..n {
        for members in by_country.values() {
            buf.clear();
            buf.extend(members.iter().filter_map(|&a| raw.get(t, a)));
            let Some(med) = median(&mut buf) else { continue };
            for &a in members {
                if let Some(v) = raw.get(t, a) {
                    values.set(t, a, v - med);
                }
            }
        }
    }
    IndicatorPanel {
        indicator: IndicatorId::Momentum,
        values,
    }
}

/// Weekly EMA of traded volume divided by the share count `cap / close`.
///
/// Uses volume and close up to the previous trading day. Assets whose implied
/// share count is not positive are left missing that day.
pub fn derive_liquidity(panel: &ReturnPanel, capitalization: &IndicatorPanel, period: usize) -> Result<IndicatorPanel> {
    let volumes = panel
        .volumes
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("price file has no volume column".into()))?;
    if capitalization.indicator != IndicatorId::Capitalization {
        return Err(Error::InvalidInput(format!(
            "liquidity needs the capitalization panel, got {}",
            capitalization.indicator
        )));
    }
    let (n, m) = (panel.n_dates(), panel.n_assets());
    let mut values = Grid::missing(n, m);
    for a in 0..m {
        let mut state = Ema::new(period);
        for t in 0..n {
            // calendar row t is the trading day before return date t
            state.update(volumes.raw(t, a));
            let (Some(vol_ema), Some(cap), Some(close)) =
                (state.value(), capitalization.values.get(t, a), panel.closes.get(t, a))
            else {
                continue;
            };
            let shares = cap / close;
            if shares > 0.0 && shares.is_finite() {
                values.set(t, a, vol_ema / shares);
            }
        }
    }
    Ok(IndicatorPanel {
        indicator: IndicatorId::Liquidity,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel(returns: &[Vec<f64>], closes: Option<&[Vec<f64>]>, volumes: Option<&[Vec<f64>]>) -> ReturnPanel {
        let n = returns[0].len();
        let m = returns.len();
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let calendar: Vec<_> = (0..=n as u64).map(|i| start + chrono::Days::new(i)).collect();
        let mut r = Grid::missing(n, m);
        let mut c = Grid::filled(n + 1, m, 10.0);
        let mut v = Grid::missing(n + 1, m);
        for a in 0..m {
            r.set_column(a, &returns[a]);
            if let Some(cl) = closes {
                c.set_column(a, &cl[a]);
            }
            if let Some(vo) = volumes {
                v.set_column(a, &vo[a]);
            }
        }
        ReturnPanel {
            dates: calendar[1..].to_vec(),
            calendar,
            assets: (0..m).map(|i| format!("A{i:03}")).collect(),
            returns: r,
            index_returns: vec![0.0; n],
            closes: c,
            volumes: volumes.map(|_| v),
        }
    }

    fn one_country(m: usize) -> Classification {
        Classification {
            country: vec!["FR".into(); m],
            industry_group: vec!["Banks".into(); m],
        }
    }

    #[test]
    fn identical_returns_give_zero_momentum() {
        let r = vec![0.01, -0.02, 0.005, 0.03, 0.0];
        let p = panel(&[r.clone(), r.clone(), r], None, None);
        let mom = derive_momentum(&p, &one_country(3), MOMENTUM_PERIOD);
        assert_eq!(mom.values.get(0, 0), None);
        for t in 1..5 {
            for a in 0..3 {
                assert_eq!(mom.values.get(t, a), Some(0.0));
            }
        }
    }

    #[test]
    fn constant_return_momentum_tends_to_the_return() {
        let c = 0.001;
        let n = 800;
        let p = panel(&[vec![c; n], vec![0.0; n], vec![-0.0; n]], None, None);
        let class = Classification {
            country: vec!["FR".into(), "DE".into(), "DE".into()],
            industry_group: vec!["Banks".into(); 3],
        };
        let mom = derive_momentum(&p, &class, MOMENTUM_PERIOD);
        // a lone asset is its own country median, so the asset is measured
        // against a country peer group with median zero instead
        let class2 = Classification {
            country: vec!["FR".into(); 3],
            industry_group: vec!["Banks".into(); 3],
        };
        let mom2 = derive_momentum(&p, &class2, MOMENTUM_PERIOD);
        assert_eq!(mom.values.get(n - 1, 0), Some(0.0));
        assert!((mom2.values.raw(n - 1, 0) - c).abs() < 1e-15);
    }

    #[test]
    fn momentum_sign_follows_drift_after_burn_in() {
        let n = 1000;
        let mut assets = Vec::new();
        for k in 0..5 {
            // small deterministic oscillation around zero for the flat peers
            assets.push((0..n).map(|t| if (t + k) % 2 == 0 { 0.01 } else { -0.01 }).collect::<Vec<_>>());
        }
        assets.push((0..n).map(|t| 0.002 + if t % 2 == 0 { 0.01 } else { -0.01 }).collect());
        assets.push((0..n).map(|t| -0.002 + if t % 2 == 0 { 0.01 } else { -0.01 }).collect());
        let p = panel(&assets, None, None);
        let mom = derive_momentum(&p, &one_country(7), MOMENTUM_PERIOD);
        // brute force EMA recomputation against the stored value
        for t in 50..n {
            let mut emas = Vec::new();
            for a in 0..7 {
                let mut y = p.returns.raw(0, a);
                for s in 1..t {
                    y += (p.returns.raw(s, a) - y) / MOMENTUM_PERIOD as f64;
                }
                emas.push(y);
            }
            let mut sorted = emas.clone();
            sorted.sort_by(f64::total_cmp);
            let med = sorted[3];
            assert!((mom.values.raw(t, 5) - (emas[5] - med)).abs() < 1e-15);
            assert!(mom.values.raw(t, 5) > 0.0, "t={t}");
            assert!(mom.values.raw(t, 6) < 0.0, "t={t}");
        }
    }

    #[test]
    fn liquidity_constant_case_and_share_doubling() {
        let n = 10;
        let closes = vec![vec![50.0; n + 1]];
        let vols = vec![vec![400.0; n + 1]];
        let p = panel(&[vec![0.0; n]], Some(&closes), Some(&vols));
        let cap = IndicatorPanel {
            indicator: IndicatorId::Capitalization,
            values: Grid::filled(n, 1, 50_000.0),
        };
        let liq = derive_liquidity(&p, &cap, LIQUIDITY_PERIOD).unwrap();
        assert!(liq.values.as_slice().iter().all(|v| *v == 400.0 / 1000.0));

        let cap2 = IndicatorPanel {
            indicator: IndicatorId::Capitalization,
            values: Grid::filled(n, 1, 100_000.0),
        };
        let liq2 = derive_liquidity(&p, &cap2, LIQUIDITY_PERIOD).unwrap();
        assert!(liq2.values.as_slice().iter().all(|v| *v == 0.2));
    }

    #[test]
    fn liquidity_matches_one_pass_recomputation() {
        let n = 60;
        let closes: Vec<Vec<f64>> = (0..3)
            .map(|a| (0..=n).map(|t| 20.0 + a as f64 + (t as f64 * 0.37).sin()).collect())
            .collect();
        let vols: Vec<Vec<f64>> = (0..3)
            .map(|a| (0..=n).map(|t| 1000.0 * (1.0 + a as f64) + 300.0 * ((t * 7 + a) % 5) as f64).collect())
            .collect();
        let p = panel(&vec![vec![0.0; n]; 3], Some(&closes), Some(&vols));
        let mut capv = Grid::missing(n, 3);
        for t in 0..n {
            for a in 0..3 {
                if t >= 3 {
                    capv.set(t, a, 1e6 * (1.0 + a as f64) + t as f64);
                }
            }
        }
        capv.set(20, 1, 0.0);
        let cap = IndicatorPanel {
            indicator: IndicatorId::Capitalization,
            values: capv.clone(),
        };
        let liq = derive_liquidity(&p, &cap, LIQUIDITY_PERIOD).unwrap();
        for a in 0..3 {
            let mut y = vols[a][0];
            for t in 0..n {
                if t > 0 {
                    y = y + (vols[a][t] - y) / 5.0;
                }
                let expected = match capv.get(t, a) {
                    Some(c) if c > 0.0 => Some(y / (c / closes[a][t])),
                    _ => None,
                };
                match (expected, liq.values.get(t, a)) {
                    (Some(e), Some(g)) => assert!((e - g).abs() <= 1e-12 * e.abs()),
                    (None, None) => {}
                    other => panic!("t={t} a={a}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn liquidity_needs_volume() {
        let p = panel(&[vec![0.0; 3]], None, None);
        let cap = IndicatorPanel {
            indicator: IndicatorId::Capitalization,
            values: Grid::filled(3, 1, 1.0),
        };
        assert!(derive_liquidity(&p, &cap, 5).is_err());
    }
}
