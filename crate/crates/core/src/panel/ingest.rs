use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use chrono::NaiveDate;
use log::warn;

use super::{Classification, IndicatorId, IndicatorPanel, IndicatorSet, ReturnPanel};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Asset id of the market index rows in a price file.
pub const INDEX_ASSET_ID: &str = "__INDEX__";

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str], optional: &[&str]) -> Result<usize> {
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let ok_len = header.len() >= expected.len() && header.len() <= expected.len() + optional.len();
    let ok_names = header
        .iter()
        .zip(expected.iter().chain(optional))
        .all(|(h, e)| h == e);
    if !ok_len || !ok_names {
        return Err(Error::Malformed {
            line: 1,
            message: format!(
                "expected header {:?} (optional trailing {:?}), found {:?}",
                expected, optional, header
            ),
        });
    }
    Ok(header.len())
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Malformed {
        line,
        message: format!("bad date {s:?}: {e}"),
    })
}

fn parse_number(s: &str, field: &str, line: u64) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Malformed {
        line,
        message: format!("bad {field} {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Malformed {
            line,
            message: format!("non-finite {field} {s:?}"),
        });
    }
    Ok(v)
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: u64) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::Malformed {
        line,
        message: format!("missing column {}", i + 1),
    })
}

/// Distinct dates of the index rows, in file order. Useful when no external
/// calendar is available.
pub fn price_file_calendar<R: Read>(input: R) -> Result<Vec<NaiveDate>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["date", "asset_id", "close"], &["volume"])?;
    let mut dates = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if field(&rec, 1, line)? == INDEX_ASSET_ID {
            let d = parse_date(field(&rec, 0, line)?, line)?;
            if dates.last() != Some(&d) {
                dates.push(d);
            }
        }
    }
    Ok(dates)
}

/// Reads a `date,asset_id,close[,volume]` file onto `calendar`.
///
/// Rows must be in non-decreasing date order and every date must belong to
/// the calendar. Days without a price leave the neighbouring returns missing.
pub fn ingest_prices<R: Read>(input: R, calendar: &[NaiveDate]) -> Result<ReturnPanel> {
    if calendar.is_empty() {
        return Err(Error::InvalidInput("trading calendar is empty".into()));
    }
    let day_index: HashMap<NaiveDate, usize> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut rdr = reader(input);
    let width = check_header(&mut rdr, &["date", "asset_id", "close"], &["volume"])?;
    let has_volume = width == 4;

    // asset -> (calendar row, close, volume)
    let mut series: BTreeMap<String, Vec<(usize, f64, f64)>> = BTreeMap::new();
    let mut index_levels = vec![f64::NAN; calendar.len()];
    let mut prev_date: Option<NaiveDate> = None;
    let mut seen_today: HashSet<String> = HashSet::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date_str = field(&rec, 0, line)?;
        let date = parse_date(date_str, line)?;
        let asset = field(&rec, 1, line)?;
        if asset.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty asset_id".into(),
            });
        }
        let close = parse_number(field(&rec, 2, line)?, "close", line)?;
        if close <= 0.0 {
            return Err(Error::Malformed {
                line,
                message: format!("close must be positive, got {close}"),
            });
        }
        let volume = if has_volume {
            match field(&rec, 3, line)? {
                "" => f64::NAN,
                v => parse_number(v, "volume", line)?,
            }
        } else {
            f64::NAN
        };

        match prev_date {
            Some(p) if date < p => {
                return Err(Error::NonMonotonicDates {
                    line,
                    date: date_str.to_owned(),
                })
            }
            Some(p) if date == p => {}
            _ => seen_today.clear(),
        }
        prev_date = Some(date);
        if !seen_today.insert(asset.to_owned()) {
            return Err(Error::DuplicateRow {
                line,
                date: date_str.to_owned(),
                asset: asset.to_owned(),
            });
        }
        let row = *day_index.get(&date).ok_or_else(|| Error::Malformed {
            line,
            message: format!("date {date_str} is not a trading day of the calendar"),
        })?;
        if asset == INDEX_ASSET_ID {
            index_levels[row] = close;
        } else {
            series.entry(asset.to_owned()).or_default().push((row, close, volume));
        }
    }

    let assets: Vec<String> = series.keys().cloned().collect();
    let mut closes = Grid::missing(calendar.len(), assets.len());
    let mut volumes = has_volume.then(|| Grid::missing(calendar.len(), assets.len()));
    for (a, obs) in series.values().enumerate() {
        for &(row, close, volume) in obs {
            closes.set(row, a, close);
            if let Some(v) = volumes.as_mut() {
                v.set(row, a, volume);
            }
        }
    }
    ReturnPanel::from_prices(calendar.to_vec(), assets, closes, &index_levels, volumes)
}

/// Reads `publication_date,asset_id,indicator_id,value` rows into
/// point-in-time panels aligned with `panel`.
///
/// The value at return date `t` is the latest publication dated strictly
/// before `t`; values are missing before the first publication.
pub fn ingest_indicators<R: Read>(input: R, panel: &ReturnPanel) -> Result<IndicatorSet> {
    let index = panel.asset_index();
    let mut rdr = reader(input);
    check_header(&mut rdr, &["publication_date", "asset_id", "indicator_id", "value"], &[])?;
    let first = *panel.calendar.first().expect("panel calendar is non-empty");
    let last = *panel.calendar.last().expect("panel calendar is non-empty");

    // (indicator, asset) -> publications in file order
    let mut pubs: BTreeMap<(IndicatorId, usize), Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let date = parse_date(field(&rec, 0, line)?, line)?;
        let asset = field(&rec, 1, line)?;
        let id_str = field(&rec, 2, line)?;
        let id: IndicatorId = id_str.parse().map_err(|_| Error::UnknownIndicator {
            line,
            id: id_str.to_owned(),
        })?;
        let value = parse_number(field(&rec, 3, line)?, "value", line)?;
        let a = *index.get(asset).ok_or_else(|| Error::UnknownAsset {
            line,
            asset: asset.to_owned(),
        })?;
        if date < first || date > last {
            warn!("line {line}: publication date {date} outside panel range {first}..={last}; row kept");
        }
        pubs.entry((id, a)).or_default().push((date, value));
    }

    let mut out = IndicatorSet::new();
    for ((id, a), mut list) in pubs {
        // stable: a later row with the same publication date wins
        list.sort_by_key(|(d, _)| *d);
        let panel_entry = out.entry(id).or_insert_with(|| IndicatorPanel {
            indicator: id,
            values: Grid::missing(panel.n_dates(), panel.n_assets()),
        });
        let mut next = 0;
        let mut current = f64::NAN;
        for (t, date) in panel.dates.iter().enumerate() {
            while next < list.len() && list[next].0 < *date {
                current = list[next].1;
                next += 1;
            }
            panel_entry.values.set(t, a, current);
        }
    }
    Ok(out)
}

/// Reads `asset_id,country,gics_industry_group` and aligns it with the panel.
/// Every panel asset must be classified.
pub fn ingest_classification<R: Read>(input: R, panel: &ReturnPanel) -> Result<Classification> {
    let index = panel.asset_index();
    let mut rdr = reader(input);
    check_header(&mut rdr, &["asset_id", "country", "gics_industry_group"], &[])?;
    let mut country = vec![String::new(); panel.n_assets()];
    let mut group = vec![String::new(); panel.n_assets()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let asset = field(&rec, 0, line)?;
        let Some(&a) = index.get(asset) else {
            warn!("line {line}: classification for {asset:?} ignored, not in the price panel");
            continue;
        };
        country[a] = field(&rec, 1, line)?.to_owned();
        group[a] = field(&rec, 2, line)?.to_owned();
    }
    if let Some(a) = country.iter().position(String::is_empty) {
        return Err(Error::InvalidInput(format!(
            "asset {:?} has no classification row",
            panel.assets[a]
        )));
    }
    Ok(Classification {
        country,
        industry_group: group,
    })
}
