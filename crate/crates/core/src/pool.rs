//! The weighted multiset of molecules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::Sequence;

/// A distinct molecule species. Truncated strands (synthesis terminated
/// early) lack the downstream primer and are kept apart from complete
/// strands with identical bases.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Molecule {
    pub seq: Sequence,
    pub truncated: bool,
}

impl Molecule {
    pub fn complete(seq: Sequence) -> Self {
        Self { seq, truncated: false }
    }

    pub fn truncated(seq: Sequence) -> Self {
        Self { seq, truncated: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abundance {
    pub weight: f64,
    /// Reference the molecule descends from; the lowest id wins when
    /// identical variants of different references coincide.
    pub origin: Option<u32>,
}

impl Abundance {
    pub fn new(weight: f64, origin: Option<u32>) -> Self {
        Self { weight, origin }
    }
}

/// Real-valued abundances keyed by molecule. Entries with zero weight are
/// never stored, and `total_weight` is the ordered sum of entry weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pool {
    entries: BTreeMap<Molecule, Abundance>,
    total_weight: f64,
}

impl Pool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builder() -> PoolBuilder {
        PoolBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Weight of complete (primer-bearing) strands.
    pub fn readable_weight(&self) -> f64 {
        self.entries.iter().filter(|(m, _)| !m.truncated).map(|(_, a)| a.weight).sum()
    }

    /// Average copies per designed sequence.
    pub fn physical_redundancy(&self, designed: usize) -> f64 {
        if designed == 0 {
            0.0
        } else {
            self.total_weight / designed as f64
        }
    }

    pub fn get(&self, molecule: &Molecule) -> Option<&Abundance> {
        self.entries.get(molecule)
    }

    pub fn weight_of(&self, seq: &Sequence) -> f64 {
        self.entries.get(&Molecule::complete(seq.clone())).map_or(0.0, |a| a.weight)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&Molecule, &Abundance)> {
        self.entries.iter()
    }

    /// Weight per origin id (entries without origin are skipped).
    pub fn weight_by_origin(&self, designed: usize) -> Vec<f64> {
        let mut w = vec![0.0; designed];
        for (_, a) in self.iter() {
            if let Some(o) = a.origin {
                if let Some(slot) = w.get_mut(o as usize) {
                    *slot += a.weight;
                }
            }
        }
        w
    }

    /// Same molecules, every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Pool {
        let mut b = PoolBuilder::default();
        for (m, a) in self.iter() {
            b.add(m.clone(), a.weight * factor, a.origin);
        }
        b.build()
    }
}

impl FromIterator<(Molecule, Abundance)> for Pool {
    fn from_iter<I: IntoIterator<Item = (Molecule, Abundance)>>(iter: I) -> Self {
        let mut b = PoolBuilder::default();
        for (m, a) in iter {
            b.add(m, a.weight, a.origin);
        }
        b.build()
    }
}

/// Accumulates molecules, merging duplicates by weight.
#[derive(Debug, Default)]
pub struct PoolBuilder {
    entries: BTreeMap<Molecule, Abundance>,
}

impl PoolBuilder {
    pub fn add(&mut self, molecule: Molecule, weight: f64, origin: Option<u32>) -> &mut Self {
        debug_assert!(weight >= 0.0 && weight.is_finite(), "weight {weight}");
        if weight <= 0.0 {
            return self;
        }
        self.entries
            .entry(molecule)
            .and_modify(|a| {
                a.weight += weight;
                a.origin = match (a.origin, origin) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
            })
            .or_insert(Abundance { weight, origin });
        self
    }

    pub fn add_sequence(&mut self, seq: Sequence, weight: f64, origin: Option<u32>) -> &mut Self {
        self.add(Molecule::complete(seq), weight, origin)
    }

    pub fn build(self) -> Pool {
        let entries: BTreeMap<_, _> = self.entries.into_iter().filter(|(_, a)| a.weight > 0.0).collect();
        let total_weight = entries.values().map(|a| a.weight).sum();
        Pool { entries, total_weight }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: &str) -> Sequence {
        t.parse().unwrap()
    }

    #[test]
    fn duplicates_merge_and_zero_weights_vanish() {
        let mut b = Pool::builder();
        b.add_sequence(s("ACGT"), 2.0, Some(3))
            .add_sequence(s("ACGT"), 1.5, Some(1))
            .add_sequence(s("TTTT"), 0.0, Some(0))
            .add(Molecule::truncated(s("ACGT")), 4.0, Some(3));
        let pool = b.build();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.weight_of(&s("ACGT")), 3.5);
        assert_eq!(pool.get(&Molecule::complete(s("ACGT"))).unwrap().origin, Some(1));
        assert_eq!(pool.total_weight(), 7.5);
        assert_eq!(pool.readable_weight(), 3.5);
    }

    #[test]
    fn total_matches_sum_after_scaling() {
        let pool: Pool = (0..100)
            .map(|i| {
                let seq = Sequence::new((0..8).map(|k| crate::Nucleotide::from_index((i >> (2 * k)) & 3)).collect());
                (Molecule::complete(seq), Abundance::new(0.1 * (i + 1) as f64, Some(i as u32)))
            })
            .collect();
        let scaled = pool.scaled(1.7);
        let sum: f64 = scaled.iter().map(|(_, a)| a.weight).sum();
        assert!((scaled.total_weight() - sum).abs() <= 1e-9 * sum);
        assert!((scaled.total_weight() - 1.7 * pool.total_weight()).abs() <= 1e-9 * sum);
        assert_eq!(pool.physical_redundancy(100), pool.total_weight() / 100.0);
    }
}
