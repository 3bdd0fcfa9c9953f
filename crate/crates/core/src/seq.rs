//! Alphabet, sequences and the designed reference set.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Nucleotide {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::T];

    #[inline]
    pub fn complement(self) -> Self {
        Self::from_index(3 - self as usize)
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i & 3]
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' | 'a' => Some(Nucleotide::A),
            'C' | 'c' => Some(Nucleotide::C),
            'G' | 'g' => Some(Nucleotide::G),
            'T' | 't' => Some(Nucleotide::T),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::C => 'C',
            Nucleotide::G => 'G',
            Nucleotide::T => 'T',
        }
    }
}

/// A strand over {A,C,G,T}. Ordering is lexicographic on the bases.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence(Vec<Nucleotide>);

impl Sequence {
    pub fn new(bases: Vec<Nucleotide>) -> Self {
        Self(bases)
    }

    /// Parses and validates text, upper-casing on the way.
    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .enumerate()
            .map(|(position, ch)| Nucleotide::from_char(ch).ok_or(Error::InvalidCharacter { position, ch }))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bases(&self) -> &[Nucleotide] {
        &self.0
    }

    pub fn into_bases(self) -> Vec<Nucleotide> {
        self.0
    }

    pub fn reverse_complement(&self) -> Self {
        Self(self.0.iter().rev().map(|b| b.complement()).collect())
    }

    /// First `n` bases (or the whole sequence when shorter).
    pub fn prefix(&self, n: usize) -> Self {
        Self(self.0[..n.min(self.len())].to_vec())
    }

    pub fn count(&self, base: Nucleotide) -> usize {
        self.0.iter().filter(|&&b| b == base).count()
    }

    /// Length of the longest run of a single base.
    pub fn longest_homopolymer(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        let mut prev = None;
        for &b in &self.0 {
            run = if Some(b) == prev { run + 1 } else { 1 };
            prev = Some(b);
            best = best.max(run);
        }
        best
    }
}

impl From<Vec<Nucleotide>> for Sequence {
    fn from(v: Vec<Nucleotide>) -> Self {
        Self(v)
    }
}

impl AsRef<[Nucleotide]> for Sequence {
    fn as_ref(&self) -> &[Nucleotide] {
        &self.0
    }
}

impl FromStr for Sequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|b| b.as_char()).collect();
        f.write_str(&s)
    }
}

impl Serialize for Sequence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Sequence::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for [`Sequence::parse`].
pub fn validate_sequence(text: &str) -> Result<Sequence> {
    Sequence::parse(text)
}

pub fn reverse_complement(s: &Sequence) -> Sequence {
    s.reverse_complement()
}

/// The designed molecules, ids dense in `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    seqs: Vec<Sequence>,
    target_length: usize,
}

impl ReferenceSet {
    /// Builds a reference set; sequences must be distinct and of equal length.
    pub fn new(seqs: Vec<Sequence>) -> Result<Self> {
        let target_length = seqs.first().map_or(0, Sequence::len);
        if let Some((i, s)) = seqs.iter().enumerate().find(|(_, s)| s.len() != target_length) {
            return Err(Error::InvalidParameter(format!(
                "reference {i} has length {} but target length is {target_length}",
                s.len()
            )));
        }
        let mut seen: HashMap<&Sequence, usize> = HashMap::with_capacity(seqs.len());
        for (i, s) in seqs.iter().enumerate() {
            if let Some(&first) = seen.get(s) {
                return Err(Error::DuplicateSequence { first, second: i });
            }
            seen.insert(s, i);
        }
        Ok(Self { seqs, target_length })
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn target_length(&self) -> usize {
        self.target_length
    }

    pub fn get(&self, id: usize) -> Option<&Sequence> {
        self.seqs.get(id)
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.seqs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Sequence)> {
        self.seqs.iter().enumerate()
    }
}

impl std::ops::Index<usize> for ReferenceSet {
    type Output = Sequence;

    fn index(&self, id: usize) -> &Sequence {
        &self.seqs[id]
    }
}
