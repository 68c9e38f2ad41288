use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::panel::Classification;

/// GICS industry groups split into six supersectors of similar size.
pub const DEFAULT_SUPERSECTORS: [(&str, u8); 23] = [
    ("Food & Staples Retailing", 1),
    ("Food, Beverage & Tobacco", 1),
    ("Health Care Equipment & Services", 1),
    ("Household & Personal Products", 1),
    ("Pharmaceuticals, Biotechnology & Life Sciences", 1),
    ("Banks", 2),
    ("Diversified Financials", 2),
    ("Insurance", 2),
    ("Consumer Durables & Apparel", 3),
    ("Consumer Services", 3),
    ("Media", 3),
    ("Retailing", 3),
    ("Materials", 4),
    ("Real Estate", 4),
    ("Energy", 5),
    ("Transportation", 5),
    ("Utilities", 5),
    ("Automobiles & Components", 6),
    ("Capital Goods", 6),
    ("Commercial & Professional Services", 6),
    ("Software & Services", 6),
    ("Technology Hardware & Equipment", 6),
    ("Telecommunication Services", 6),
];

pub const N_SUPERSECTORS: u8 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupersectorMap {
    groups: BTreeMap<String, u8>,
}

impl Default for SupersectorMap {
    fn default() -> Self {
        Self {
            groups: DEFAULT_SUPERSECTORS
                .iter()
                .map(|(g, s)| ((*g).to_owned(), *s))
                .collect(),
        }
    }
}

impl SupersectorMap {
    pub fn new(groups: BTreeMap<String, u8>) -> Result<Self> {
        if let Some((g, s)) = groups.iter().find(|(_, s)| !(1..=N_SUPERSECTORS).contains(*s)) {
            return Err(Error::InvalidInput(format!(
                "industry group {g:?} maps to supersector {s}, expected 1..={N_SUPERSECTORS}"
            )));
        }
        Ok(Self { groups })
    }

    /// Reads `gics_industry_group,supersector`.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != ["gics_industry_group", "supersector"] {
            return Err(Error::Malformed {
                line: 1,
                message: format!("expected header gics_industry_group,supersector, found {header:?}"),
            });
        }
        let mut groups = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let (Some(g), Some(s)) = (rec.get(0), rec.get(1)) else {
                return Err(Error::Malformed {
                    line,
                    message: "expected two columns".into(),
                });
            };
            let s: u8 = s.parse().map_err(|_| Error::Malformed {
                line,
                message: format!("bad supersector {s:?}"),
            })?;
            if groups.insert(g.to_owned(), s).is_some() {
                return Err(Error::Malformed {
                    line,
                    message: format!("industry group {g:?} listed twice"),
                });
            }
        }
        Self::new(groups)
    }

    pub fn get(&self, industry_group: &str) -> Option<u8> {
        self.groups.get(industry_group).copied()
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, u8)> {
        self.groups.iter().map(|(g, s)| (g.as_str(), *s))
    }

    /// Supersector (1..=6) of every classified asset. Unmapped groups are an error.
    pub fn assign(&self, classification: &Classification) -> Result<Vec<u8>> {
        classification
            .industry_group
            .iter()
            .map(|g| self.get(g).ok_or_else(|| Error::UnmappedIndustryGroup(g.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_covers_six_groups() {
        let map = SupersectorMap::default();
        let mut sizes = [0; 6];
        for (_, s) in map.groups() {
            sizes[s as usize - 1] += 1;
        }
        assert_eq!(sizes, [5, 3, 4, 2, 3, 6]);
        assert_eq!(map.get("Energy"), Some(5));
    }

    #[test]
    fn unmapped_group_rejected() {
        let c = Classification {
            country: vec!["FR".into()],
            industry_group: vec!["Crypto".into()],
        };
        assert!(matches!(
            SupersectorMap::default().assign(&c),
            Err(Error::UnmappedIndustryGroup(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = "gics_industry_group,supersector\nBanks,2\nEnergy,5\n";
        let map = SupersectorMap::from_csv(text.as_bytes()).unwrap();
        assert_eq!(map.get("Banks"), Some(2));
        assert!(SupersectorMap::from_csv("gics_industry_group,supersector\nBanks,9\n".as_bytes()).is_err());
    }
}
