//! Appearance feature files: one line `frame_id,detection_id,v1,...,vD` per
//! detection, where `detection_id` is the annotation's position within its
//! frame. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reid::FeatureVector;
use crate::tracker::FrameObservations;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub frame: u64,
    pub detection: usize,
    pub feature: FeatureVector,
}

/// Feature records in file order with a `(frame, detection)` index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    records: Vec<FeatureRecord>,
    index: BTreeMap<(u64, usize), usize>,
}

impl FeatureTable {
    pub fn new(records: Vec<FeatureRecord>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let dim = records.first().map(|r| r.feature.dim());
        for (i, r) in records.iter().enumerate() {
            if Some(r.feature.dim()) != dim {
                return Err(Error::Dimension {
                    expected: dim.unwrap_or(0),
                    found: r.feature.dim(),
                });
            }
            if index.insert((r.frame, r.detection), i).is_some() {
                return Err(Error::Schema(format!(
                    "duplicate feature record ({}, {})",
                    r.frame, r.detection
                )));
            }
        }
        Ok(FeatureTable { records, index })
    }

    pub fn from_observations(obs: &[FrameObservations]) -> Result<Self> {
        let records = obs
            .iter()
            .flat_map(|o| {
                o.features.iter().enumerate().filter_map(move |(i, f)| {
                    f.as_ref().map(|f| FeatureRecord {
                        frame: o.frame,
                        detection: i,
                        feature: f.clone(),
                    })
                })
            })
            .collect();
        Self::new(records)
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.feature.dim())
    }

    pub fn get(&self, frame: u64, detection: usize) -> Option<&FeatureVector> {
        self.index.get(&(frame, detection)).map(|&i| &self.records[i].feature)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |m: String| Error::Schema(format!("line {}: {m}", n + 1));
            let mut fields = line.split(',').map(str::trim);
            let frame = fields
                .next()
                .and_then(|f| f.parse::<u64>().ok())
                .ok_or_else(|| at("bad frame id".into()))?;
            let detection = fields
                .next()
                .and_then(|f| f.parse::<usize>().ok())
                .ok_or_else(|| at("bad detection id".into()))?;
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|e| at(format!("bad value {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.is_empty() {
                return Err(at("no feature values".into()));
            }
            let feature = FeatureVector::new(values).map_err(|e| at(e.to_string()))?;
            records.push(FeatureRecord {
                frame,
                detection,
                feature,
            });
        }
        Self::new(records)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = write!(s, "{},{}", r.frame, r.detection);
            for v in r.feature.values() {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_lookup() {
        let t = FeatureTable::parse("# frame,det,values\n0,0,1,2.5\n\n0,1,-1,0\n3,0,1e-3,7\n").unwrap();
        assert_eq!(t.records().len(), 3);
        assert_eq!(t.dim(), Some(2));
        assert_eq!(t.get(0, 1).unwrap().values(), &[-1.0, 0.0]);
        assert_eq!(t.get(3, 0).unwrap().values(), &[0.001, 7.0]);
        assert!(t.get(1, 0).is_none());
    }

    #[test]
    fn errors_name_the_line() {
        let e = FeatureTable::parse("0,0,1\n0,x,1\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = FeatureTable::parse("0,0,1\n0,1,nan\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(matches!(
            FeatureTable::parse("0,0,1\n0,1,1,2\n"),
            Err(Error::Dimension { .. })
        ));
        assert!(FeatureTable::parse("0,0,1\n0,0,2\n").is_err());
        assert!(FeatureTable::parse("0,0\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in proptest::collection::vec((0u64..100, 0usize..5, proptest::collection::vec(-1e6..1e6f64, 3)), 0..20)) {
            let mut seen = std::collections::BTreeSet::new();
            let records: Vec<_> = rows.into_iter()
                .filter(|(f, d, _)| seen.insert((*f, *d)))
                .map(|(frame, detection, v)| FeatureRecord { frame, detection, feature: FeatureVector::new(v).unwrap() })
                .collect();
            let t = FeatureTable::new(records).unwrap();
            let text = t.to_text();
            let back = FeatureTable::parse(&text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
