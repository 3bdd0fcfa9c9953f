//! Per-position insertion/deletion/substitution (and termination) channel.

use rand::Rng;

use crate::submatrix::ConditionalSubMatrix;
use crate::{Error, Nucleotide, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct IdsRates<'a> {
    pub p_sub: f64,
    pub p_ins: f64,
    pub p_del: f64,
    pub p_term: f64,
    pub matrix: &'a ConditionalSubMatrix,
}

impl IdsRates<'_> {
    pub fn is_noiseless(&self) -> bool {
        self.p_sub == 0.0 && self.p_ins == 0.0 && self.p_del == 0.0 && self.p_term == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_sub", self.p_sub), ("p_ins", self.p_ins), ("p_del", self.p_del), ("p_term", self.p_term)]
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
            }
        }
        let worst_sub = Nucleotide::ALL.iter().map(|&b| self.p_sub * self.matrix.rate_scale(b)).fold(0.0, f64::max);
        let total = worst_sub + self.p_ins + self.p_del + self.p_term;
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("per-position event probabilities sum to {total} > 1")));
        }
        Ok(())
    }

    /// Scans `src` left to right writing the noisy copy into `out`. Events at
    /// a position are mutually exclusive: deletion, substitution, insertion
    /// of a uniform base before the position, or termination (the strand
    /// stops before this position). Returns whether termination fired.
    pub fn apply<R: Rng + ?Sized>(&self, src: &[Nucleotide], rng: &mut R, out: &mut Vec<Nucleotide>) -> bool {
        out.clear();
        if self.is_noiseless() {
            out.extend_from_slice(src);
            return false;
        }
        out.reserve(src.len() + 4);
        for &b in src {
            let u: f64 = rng.random();
            let mut edge = self.p_del;
            if u < edge {
                continue;
            }
            edge += self.p_sub * self.matrix.rate_scale(b);
            if u < edge {
                out.push(self.matrix.sample_target(b, rng));
                continue;
            }
            edge += self.p_ins;
            if u < edge {
                out.push(Nucleotide::from_index(rng.random_range(0..4)));
                out.push(b);
                continue;
            }
            edge += self.p_term;
            if u < edge {
                return true;
            }
            out.push(b);
        }
        false
    }
}
