//! CSV exchange of factor weights and factor returns between pipeline stages.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a factor reloaded from disk is bit-identical to the one
//! that was written.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{ConstructionRules, FactorReturnSeries, FactorWeightSeries, QuantileBand};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::panel::{IndicatorId, ReturnPanel};

pub const WEIGHTS_HEADER: [&str; 7] = ["date", "indicator_id", "band", "asset_id", "weight", "membership", "supersector"];
pub const RETURNS_HEADER: [&str; 4] = ["date", "indicator_id", "band", "return"];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header != expected {
        return Err(Error::Malformed {
            line: 1,
            message: format!("expected header {}, found {}", expected.join(","), header.join(",")),
        });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_key(rec: &csv::StringRecord) -> Result<(NaiveDate, IndicatorId, QuantileBand)> {
    let line = line_of(rec);
    let bad = |message: String| Error::Malformed { line, message };
    let date = rec[0].parse::<NaiveDate>().map_err(|e| bad(format!("date {:?}: {e}", &rec[0])))?;
    let id = rec[1].parse::<IndicatorId>().map_err(|_| Error::UnknownIndicator {
        line,
        id: rec[1].to_owned(),
    })?;
    let band = rec[2].parse::<QuantileBand>().map_err(|e| bad(e.to_string()))?;
    Ok((date, id, band))
}

fn parse_value(rec: &csv::StringRecord, col: usize) -> Result<f64> {
    rec[col].parse::<f64>().map_err(|e| Error::Malformed {
        line: line_of(rec),
        message: format!("value {:?}: {e}", &rec[col]),
    })
}

/// Writes one row per member asset and day. Excluded assets are omitted.
pub fn write_weights_csv<W: Write>(series: &[FactorWeightSeries], assets: &[String], supersectors: &[u8], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WEIGHTS_HEADER)?;
    for s in series {
        let (id, band) = (s.indicator.to_string(), s.band.to_string());
        for t in 0..s.n_dates() {
            let date = s.dates[t].to_string();
            for (a, (&wt, m)) in s.weights.row(t).iter().zip(s.membership_row(t)).enumerate() {
                if wt == 0.0 {
                    continue;
                }
                w.write_record([
                    date.as_str(),
                    id.as_str(),
                    band.as_str(),
                    assets[a].as_str(),
                    &wt.to_string(),
                    m.as_str(),
                    &supersectors.get(a).map_or_else(String::new, u8::to_string),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads weights back onto the panel's dates and assets, one series per
/// `(indicator, band)` in order of first appearance. The construction rules
/// are not part of the file and are reported as the standard rules.
pub fn read_weights_csv<R: Read>(input: R, panel: &ReturnPanel) -> Result<Vec<FactorWeightSeries>> {
    let mut rdr = reader(input);
    expect_header(&mut rdr, &WEIGHTS_HEADER)?;
    let dates: HashMap<NaiveDate, usize> = panel.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let assets = panel.asset_index();
    let mut order = Vec::new();
    let mut grids: HashMap<(IndicatorId, QuantileBand), Grid> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let (date, id, band) = parse_key(&rec)?;
        let t = *dates.get(&date).ok_or_else(|| Error::Malformed {
            line,
            message: format!("date {date} is not a return day of the panel"),
        })?;
        let a = *assets.get(&rec[3]).ok_or_else(|| Error::UnknownAsset {
            line,
            asset: rec[3].to_owned(),
        })?;
        let grid = grids.entry((id, band)).or_insert_with(|| {
            order.push((id, band));
            Grid::filled(panel.n_dates(), panel.n_assets(), 0.0)
        });
        grid.set(t, a, parse_value(&rec, 4)?);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let grid = grids.remove(&key).expect("every key has a grid");
            FactorWeightSeries::from_parts(key.0, ConstructionRules::standard(key.1), panel.dates.clone(), grid)
        })
        .collect())
}

pub fn write_returns_csv<W: Write>(series: &[FactorReturnSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RETURNS_HEADER)?;
    for s in series {
        let (id, band) = (s.indicator.to_string(), s.band.to_string());
        for (d, r) in s.dates.iter().zip(&s.returns) {
            w.write_record([d.to_string().as_str(), id.as_str(), band.as_str(), &r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads factor returns, one series per `(indicator, band)` in order of first appearance.
pub fn read_returns_csv<R: Read>(input: R) -> Result<Vec<FactorReturnSeries>> {
    let mut rdr = reader(input);
    expect_header(&mut rdr, &RETURNS_HEADER)?;
    let mut order = Vec::new();
    let mut series: HashMap<(IndicatorId, QuantileBand), FactorReturnSeries> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (date, id, band) = parse_key(&rec)?;
        let value = parse_value(&rec, 3)?;
        let s = series.entry((id, band)).or_insert_with(|| {
            order.push((id, band));
            FactorReturnSeries {
                indicator: id,
                band,
                dates: Vec::new(),
                returns: Vec::new(),
            }
        });
        if s.dates.last().is_some_and(|last| *last >= date) {
            return Err(Error::NonMonotonicDates {
                line: line_of(&rec),
                date: date.to_string(),
            });
        }
        s.dates.push(date);
        s.returns.push(value);
    }
    Ok(order.into_iter().map(|k| series.remove(&k).expect("every key has a series")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{build_standard_factor, estimate, MarketData, Periods};
    use crate::synth::{generate_market, SynthConfig};

    fn built() -> (MarketData, Vec<crate::pipeline::BuiltFactor>) {
        let m = generate_market(&SynthConfig {
            n_assets: 40,
            n_days: 300,
            seed: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        let data = MarketData::from_synthetic(&m);
        let periods = Periods::default();
        let est = estimate(&data.panel, &periods);
        let f = [IndicatorId::Remuneration, IndicatorId::Dividend]
            .into_iter()
            .flat_map(|id| [QuantileBand::Q1, QuantileBand::Q3].map(|b| (id, b)))
            .map(|(id, b)| build_standard_factor(&data, &est, id, b, &periods, None).unwrap())
            .collect();
        (data, f)
    }

    #[test]
    fn weights_round_trip_bit_for_bit() {
        let (data, built) = built();
        let series: Vec<_> = built.iter().map(|b| b.weights.clone()).collect();
        let mut buf = Vec::new();
        write_weights_csv(&series, &data.panel.assets, &data.supersectors, &mut buf).unwrap();
        let back = read_weights_csv(buf.as_slice(), &data.panel).unwrap();
        assert_eq!(back.len(), series.len());
        for (a, b) in series.iter().zip(&back) {
            assert_eq!((a.indicator, a.band), (b.indicator, b.band));
            let same = a.weights.as_slice().iter().zip(b.weights.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
            for t in 0..a.n_dates() {
                assert_eq!(a.membership_row(t), b.membership_row(t));
            }
        }
    }

    #[test]
    fn returns_round_trip_bit_for_bit() {
        let (_, built) = built();
        let series: Vec<_> = built.iter().map(|b| b.returns.clone()).collect();
        let mut buf = Vec::new();
        write_returns_csv(&series, &mut buf).unwrap();
        let back = read_returns_csv(buf.as_slice()).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn comment_lines_are_skipped_and_bad_headers_rejected() {
        let text = "# produced by a test\ndate,indicator_id,band,return\n2020-01-02,remuneration,Q1,0.5\n";
        assert_eq!(read_returns_csv(text.as_bytes()).unwrap()[0].returns, vec![0.5]);
        assert!(read_returns_csv("date,factor,return\n".as_bytes()).is_err());
        let backwards = "date,indicator_id,band,return\n2020-01-03,remuneration,Q1,1\n2020-01-02,remuneration,Q1,1\n";
        assert!(matches!(
            read_returns_csv(backwards.as_bytes()),
            Err(Error::NonMonotonicDates { .. })
        ));
    }
}
