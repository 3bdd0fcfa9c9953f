//! The 12-entry conditional substitution matrix p(X→Y | substitution).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Nucleotide, Result};

/// Entry labels in the conventional reporting order (paired by strand
/// complement: A2C with T2G, and so on).
pub const LABELS: [&str; 12] = ["A2C", "T2G", "A2G", "T2C", "A2T", "T2A", "C2A", "G2T", "C2G", "G2C", "C2T", "G2A"];

fn label_pair(i: usize) -> (Nucleotide, Nucleotide) {
    let b = LABELS[i].as_bytes();
    (Nucleotide::from_char(b[0] as char).unwrap(), Nucleotide::from_char(b[2] as char).unwrap())
}

/// Joint probabilities of the 12 substitution types, summing to one.
///
/// When used for injection, a base X is substituted with probability
/// `p_sub * 4 * row_sum(X)` and the replacement drawn from row X, so that on
/// uniform-composition sequences the observed joint spectrum equals this
/// matrix and the average per-base substitution rate equals `p_sub`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSubMatrix {
    p: [[f64; 4]; 4],
}

impl ConditionalSubMatrix {
    pub fn uniform() -> Self {
        Self::from_labeled([1.0 / 12.0; 12]).unwrap()
    }

    /// Builds from values in [`LABELS`] order, normalizing to sum one.
    pub fn from_labeled(values: [f64; 12]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("substitution matrix entries must be finite and >= 0".into()));
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("substitution matrix is all zero".into()));
        }
        // already-normalized input is kept bit for bit so that serialization
        // round-trips exactly
        let scale = if (total - 1.0).abs() <= 1e-12 { 1.0 } else { total };
        let mut p = [[0.0; 4]; 4];
        for (i, v) in values.iter().enumerate() {
            let (from, to) = label_pair(i);
            p[from.index()][to.index()] = v / scale;
        }
        Ok(Self { p })
    }

    /// Builds from raw substitution counts `counts[from][to]` (diagonal ignored).
    pub fn from_counts(counts: &[[u64; 4]; 4]) -> Result<Self> {
        let mut values = [0.0; 12];
        for (i, v) in values.iter_mut().enumerate() {
            let (from, to) = label_pair(i);
            *v = counts[from.index()][to.index()] as f64;
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::NoSubstitutions);
        }
        Self::from_labeled(values)
    }

    pub fn labeled(&self) -> [f64; 12] {
        std::array::from_fn(|i| {
            let (from, to) = label_pair(i);
            self.get(from, to)
        })
    }

    #[inline]
    pub fn get(&self, from: Nucleotide, to: Nucleotide) -> f64 {
        self.p[from.index()][to.index()]
    }

    #[inline]
    pub fn row_sum(&self, from: Nucleotide) -> f64 {
        self.p[from.index()].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// Multiplier applied to the mean substitution rate for base `from`.
    #[inline]
    pub fn rate_scale(&self, from: Nucleotide) -> f64 {
        4.0 * self.row_sum(from)
    }

    /// Draws a replacement for `from` from its row. Falls back to a uniform
    /// choice among the other three bases when the row is empty.
    pub fn sample_target<R: Rng + ?Sized>(&self, from: Nucleotide, rng: &mut R) -> Nucleotide {
        let row = &self.p[from.index()];
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            let k = rng.random_range(1..4);
            return Nucleotide::from_index(from.index() + k);
        }
        let mut u = rng.random::<f64>() * sum;
        let mut last = from;
        for (to, &w) in row.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            last = Nucleotide::from_index(to);
            if u < w {
                return last;
            }
            u -= w;
        }
        last
    }
}

impl Default for ConditionalSubMatrix {
    fn default() -> Self {
        Self::uniform()
    }
}

impl Serialize for ConditionalSubMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, f64> = LABELS.iter().copied().zip(self.labeled()).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConditionalSubMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let map = BTreeMap::<String, f64>::deserialize(deserializer)?;
        if let Some(k) = map.keys().find(|k| !LABELS.contains(&k.as_str())) {
            return Err(D::Error::custom(format!("unknown substitution label {k:?}")));
        }
        let mut values = [0.0; 12];
        for (i, label) in LABELS.iter().enumerate() {
            values[i] =
                *map.get(*label).ok_or_else(|| D::Error::custom(format!("missing substitution label {label}")))?;
        }
        Self::from_labeled(values).map_err(D::Error::custom)
    }
}

/// Published conditional substitution spectra, in [`LABELS`] order.
pub mod published {
    pub const HIGH_PR: [f64; 12] = [
        0.0606676, 0.0174165, 0.118723, 0.132656, 0.0240929, 0.0214804, 0.0473149, 0.0507983, 0.0223512, 0.030479,
        0.268215, 0.205806,
    ];
    pub const LOW_PR: [f64; 12] = [
        0.0457843, 0.025269, 0.118839, 0.148111, 0.0382787, 0.0287716, 0.052039, 0.0673005, 0.0182637, 0.0165124,
        0.25269, 0.188141,
    ];
    pub const ERLICH: [f64; 12] = [
        0.0557851, 0.104339, 0.0764463, 0.0692149, 0.0878099, 0.0635331, 0.0671488, 0.20093, 0.0563017, 0.0490702,
        0.0924587, 0.0573347,
    ];
    pub const GOLDMAN: [f64; 12] = [
        0.0188235, 0.0717647, 0.104706, 0.0635294, 0.0505882, 0.0294118, 0.0658824, 0.0270588, 0.105882, 0.0494118,
        0.276471, 0.103529,
    ];
    pub const HIGH_PR_4T: [f64; 12] = [
        0.0240829, 0.0106064, 0.0605191, 0.0732468, 0.0162216, 0.0117295, 0.0253307, 0.0269528, 0.0141003, 0.0132269,
        0.398053, 0.32593,
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn published_spectra_sum_to_one_after_normalization() {
        // the published Erlich and Goldman series sum to 0.980 and 0.967
        for (v, tol) in [
            (published::HIGH_PR, 1e-5),
            (published::LOW_PR, 1e-5),
            (published::HIGH_PR_4T, 1e-5),
            (published::ERLICH, 0.025),
            (published::GOLDMAN, 0.035),
        ] {
            let raw: f64 = v.iter().sum();
            assert!((raw - 1.0).abs() < tol, "raw sum {raw}");
            let m = ConditionalSubMatrix::from_labeled(v).unwrap();
            assert!((m.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_is_zero_and_labels_roundtrip() {
        let m = ConditionalSubMatrix::from_labeled(published::HIGH_PR).unwrap();
        for b in Nucleotide::ALL {
            assert_eq!(m.get(b, b), 0.0);
        }
        assert!(
            (m.get(Nucleotide::C, Nucleotide::T) - 0.268215 / published::HIGH_PR.iter().sum::<f64>()).abs() < 1e-12
        );
        let again = ConditionalSubMatrix::from_labeled(m.labeled()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(ConditionalSubMatrix::from_labeled([0.0; 12]).is_err());
        let mut v = [0.1; 12];
        v[3] = -0.1;
        assert!(ConditionalSubMatrix::from_labeled(v).is_err());
        assert_eq!(ConditionalSubMatrix::from_counts(&[[0; 4]; 4]), Err(Error::NoSubstitutions));
    }

    #[test]
    fn sampling_follows_the_row() {
        let m = ConditionalSubMatrix::from_labeled(published::HIGH_PR).unwrap();
        let mut rng = derive_stream(5, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[m.sample_target(Nucleotide::C, &mut rng).index()] += 1;
        }
        assert_eq!(counts[Nucleotide::C.index()], 0);
        let expect_t = m.get(Nucleotide::C, Nucleotide::T) / m.row_sum(Nucleotide::C);
        let got_t = counts[Nucleotide::T.index()] as f64 / n as f64;
        assert!((got_t - expect_t).abs() < 0.01, "{got_t} vs {expect_t}");
    }
}
