//! Appearance gallery for lost tracks and nearest-neighbour identity retrieval.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        euclidean(&self.0, &other.0)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReidConfig {
    /// Matches need a distance strictly below this. Only meaningful for the
    /// scale of the feature source in use.
    pub distance_threshold: f64,
    /// Entries older than this many frames are pruned.
    pub max_age: u64,
}

impl Default for ReidConfig {
    fn default() -> Self {
        ReidConfig {
            distance_threshold: 100.0,
            max_age: 30,
        }
    }
}

impl ReidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0 && self.distance_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "distance_threshold = {} must be positive",
                self.distance_threshold
            )));
        }
        if self.max_age < 1 {
            return Err(Error::Config("max_age must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub track_id: u64,
    pub feature: FeatureVector,
    pub last_seen: u64,
}

/// Latest feature of every lost track, keyed by track id.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    dim: usize,
    entries: BTreeMap<u64, GalleryEntry>,
}

impl Gallery {
    pub fn new(dim: usize) -> Self {
        Gallery {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&GalleryEntry> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &GalleryEntry> {
        self.entries.values()
    }

    /// Adds or replaces the entry for `track_id`.
    pub fn insert(&mut self, track_id: u64, feature: FeatureVector, frame: u64) -> Result<()> {
        if feature.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: feature.dim(),
            });
        }
        self.entries.insert(
            track_id,
            GalleryEntry {
                track_id,
                feature,
                last_seen: frame,
            },
        );
        Ok(())
    }

    pub fn remove(&mut self, track_id: u64) -> Option<GalleryEntry> {
        self.entries.remove(&track_id)
    }

    /// Nearest entry strictly closer than the threshold; the match is removed.
    /// Ties go to the older entry, then the smaller id.
    pub fn retrieve(&mut self, query: &FeatureVector, cfg: &ReidConfig) -> Result<Option<u64>> {
        if query.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: query.dim(),
            });
        }
        let best = self
            .entries
            .values()
            .map(|e| (e.feature.distance(query), e.last_seen, e.track_id))
            .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        match best {
            Some((d, _, id)) if d < cfg.distance_threshold => {
                self.entries.remove(&id);
                Ok(Some(id))
            }
            _ => Ok(None),
        }
    }

    /// Drops entries with `current_frame - last_seen > max_age`; returns the dropped ids.
    pub fn prune(&mut self, current_frame: u64, cfg: &ReidConfig) -> Vec<u64> {
        let stale: Vec<u64> = self
            .entries
            .values()
            .filter(|e| current_frame.saturating_sub(e.last_seen) > cfg.max_age)
            .map(|e| e.track_id)
            .collect();
        for id in &stale {
            self.entries.remove(id);
        }
        stale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn insert_rules() {
        let mut g = Gallery::new(2);
        g.insert(1, fv(&[0.0, 0.0]), 0).unwrap();
        assert_eq!(g.len(), 1);
        g.insert(1, fv(&[1.0, 1.0]), 3).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(1).unwrap().feature, fv(&[1.0, 1.0]));
        assert_eq!(g.get(1).unwrap().last_seen, 3);
        g.insert(2, fv(&[5.0, 1.0]), 3).unwrap();
        assert_eq!(g.len(), 2);
        assert!(matches!(
            g.insert(3, fv(&[1.0]), 3),
            Err(Error::Dimension { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn retrieve_rules() {
        let cfg = ReidConfig::default();
        let mut g = Gallery::new(2);
        g.insert(4, fv(&[3.0, 4.0]), 0).unwrap();
        assert_eq!(g.retrieve(&fv(&[3.0, 4.0]), &cfg).unwrap(), Some(4));
        assert!(g.is_empty());

        // exactly at the threshold: no match
        g.insert(5, fv(&[100.0, 0.0]), 0).unwrap();
        assert_eq!(g.retrieve(&fv(&[0.0, 0.0]), &cfg).unwrap(), None);
        assert_eq!(g.len(), 1);

        let mut g = Gallery::new(2);
        g.insert(1, fv(&[50.0, 0.0]), 0).unwrap();
        g.insert(2, fv(&[0.0, 5.0]), 0).unwrap();
        assert_eq!(g.retrieve(&fv(&[0.0, 0.0]), &cfg).unwrap(), Some(2));
        assert_eq!(g.retrieve(&fv(&[0.0, 0.0]), &cfg).unwrap(), Some(1));
        assert_eq!(g.retrieve(&fv(&[0.0, 0.0]), &cfg).unwrap(), None);
    }

    #[test]
    fn retrieve_ties() {
        let cfg = ReidConfig::default();
        let mut g = Gallery::new(1);
        g.insert(9, fv(&[1.0]), 4).unwrap();
        g.insert(3, fv(&[-1.0]), 2).unwrap();
        g.insert(1, fv(&[1.0]), 4).unwrap();
        assert_eq!(g.retrieve(&fv(&[0.0]), &cfg).unwrap(), Some(3));
        assert_eq!(g.retrieve(&fv(&[0.0]), &cfg).unwrap(), Some(1));
    }

    #[test]
    fn prune_rules() {
        let cfg = ReidConfig {
            max_age: 5,
            ..Default::default()
        };
        let mut g = Gallery::new(1);
        for (id, seen) in [(1, 10), (2, 4), (3, 5), (4, 3)] {
            g.insert(id, fv(&[0.0]), seen).unwrap();
        }
        assert!(g.prune(8, &cfg).is_empty());
        // ages 0, 6, 5, 7: exactly max_age is kept
        assert_eq!(g.prune(10, &cfg), vec![2, 4]);
        assert!(g.prune(10, &cfg).is_empty());
        assert_eq!(g.prune(11, &cfg), vec![3]);
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn non_finite_feature_rejected() {
        assert!(FeatureVector::new(vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn euclidean_matches_naive(a in proptest::collection::vec(-100.0..100.0f64, 1..64), seed in proptest::collection::vec(-100.0..100.0f64, 64)) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, _)| seed[i]).collect();
            let mut naive = 0.0;
            for i in 0..a.len() {
                let d = a[i] - b[i];
                naive += d * d;
            }
            let naive = naive.sqrt();
            let got = euclidean(&a, &b);
            prop_assert!((got - naive).abs() <= 1e-9 * naive.max(1e-300));
        }

        #[test]
        fn retrieved_ids_come_from_gallery(entries in proptest::collection::vec((0u64..20, -50.0..50.0f64, 0u64..10), 0..10),
                                           q in -60.0..60.0f64) {
            let cfg = ReidConfig::default();
            let mut g = Gallery::new(1);
            for (id, v, seen) in &entries {
                g.insert(*id, fv(&[*v]), *seen).unwrap();
            }
            let before = g.clone();
            if let Some(id) = g.retrieve(&fv(&[q]), &cfg).unwrap() {
                prop_assert!(before.contains(id));
                prop_assert!(!g.contains(id));
                prop_assert_eq!(g.len() + 1, before.len());
            }
        }

        #[test]
        fn duplicate_always_matches(v in proptest::collection::vec(-1e3..1e3f64, 4)) {
            let mut g = Gallery::new(4);
            g.insert(7, fv(&v), 0).unwrap();
            prop_assert_eq!(g.retrieve(&fv(&v), &ReidConfig::default()).unwrap(), Some(7));
        }

        #[test]
        fn prune_idempotent(seen in proptest::collection::vec(0u64..50, 0..10), now in 0u64..60) {
            let cfg = ReidConfig { max_age: 7, ..Default::default() };
            let mut g = Gallery::new(1);
            for (i, s) in seen.iter().enumerate() {
                g.insert(i as u64, fv(&[0.0]), *s).unwrap();
            }
            g.prune(now, &cfg);
            let once = g.clone();
            g.prune(now, &cfg);
            prop_assert_eq!(g, once);
        }
    }
}
