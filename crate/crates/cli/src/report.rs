//! The run report, written as JSON with CSV and plain-text companions.

use std::fmt::Write as _;
use std::path::Path;

use dna_channel::merge::MergeStats;
use dna_channel::stats::{CoverageHistogram, ErrorRates, NegBinFit, ReadingErrorEstimate, Stratum};
use dna_channel::submatrix::{ConditionalSubMatrix, LABELS};
use serde::{Deserialize, Serialize};

use crate::config::ChannelConfig;
use crate::error::{CliError, Result};

/// A report section that either holds a value or says why it is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Section<T> {
    Ok(T),
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn skipped(reason: impl Into<String>) -> Self {
        Section::Skipped { reason: reason.into() }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Section::Ok(v) => Some(v),
            Section::Skipped { .. } => None,
        }
    }

    pub fn from_result<E: std::fmt::Display>(r: std::result::Result<T, E>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::skipped(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadCounts {
    /// Read pairs produced or parsed.
    pub pairs: u64,
    /// Pairs dropped by the exact-length filter.
    pub filtered: u64,
    /// Reads handed to the matcher (merged reads, or forward reads).
    pub analyzed: u64,
    pub matched: u64,
    pub unmatched: u64,
    /// Matches tied between several designs.
    pub ambiguous: u64,
    /// Matches whose read has the design's length.
    pub correct_length: u64,
}

impl ReadCounts {
    pub fn unmatched_fraction(&self) -> f64 {
        ratio(self.unmatched, self.analyzed)
    }

    pub fn ambiguous_fraction(&self) -> f64 {
        ratio(self.ambiguous, self.matched)
    }

    pub fn filtered_fraction(&self) -> f64 {
        ratio(self.filtered, self.pairs)
    }

    pub fn correct_length_fraction(&self) -> f64 {
        ratio(self.correct_length, self.matched)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRates {
    pub stratum: Stratum,
    pub rates: Section<ErrorRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    pub substitutions: u64,
    pub matrix: ConditionalSubMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub histogram: CoverageHistogram,
    /// Designs never drawn as a read template, from the simulation's ground
    /// truth. Absent for analyzed FASTQ input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_unseen_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub threads: usize,
    pub elapsed_seconds: f64,
    /// Seconds since the Unix epoch at completion.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ChannelConfig,
    pub reads: ReadCounts,
    pub merge: Section<MergeStats>,
    pub error_rates: Vec<StratumRates>,
    pub substitution_matrix: Section<SubstitutionReport>,
    pub reading_error: Section<ReadingErrorEstimate>,
    pub coverage: Section<CoverageReport>,
    pub neg_binomial: Section<NegBinFit>,
    pub runtime: Runtime,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// JSON without the runtime section; identical across reruns with the
    /// same seed and configuration.
    pub fn stable_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(map) = value.as_object_mut() {
            map.remove("runtime");
        }
        serde_json::to_string_pretty(&value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn rates(&self, stratum: Stratum) -> Option<&ErrorRates> {
        self.error_rates.iter().find(|s| s.stratum == stratum).and_then(|s| s.rates.value())
    }

    pub fn unseen_fraction(&self) -> Option<f64> {
        self.coverage.value().map(|c| c.histogram.unseen_fraction)
    }

    /// Writes `report.json`, the CSV tables and `coverage_histogram.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::io(path, e))
        };
        put("report.json", self.to_json()? + "\n")?;
        put("summary.csv", self.summary_csv())?;
        put("error_rates.csv", self.error_rates_csv())?;
        if let Some(s) = self.substitution_matrix.value() {
            put("substitution_matrix.csv", substitution_csv(&s.matrix))?;
        }
        if let Some(c) = self.coverage.value() {
            put("coverage_histogram.csv", histogram_text(&c.histogram, ','))?;
            put("coverage_histogram.txt", histogram_text(&c.histogram, '\t'))?;
        }
        Ok(())
    }

    pub fn summary_csv(&self) -> String {
        let r = &self.reads;
        let mut rows: Vec<(&str, String)> = vec![
            ("pairs", r.pairs.to_string()),
            ("filtered", r.filtered.to_string()),
            ("analyzed", r.analyzed.to_string()),
            ("matched", r.matched.to_string()),
            ("unmatched", r.unmatched.to_string()),
            ("ambiguous", r.ambiguous.to_string()),
            ("correct_length", r.correct_length.to_string()),
            ("unmatched_fraction", r.unmatched_fraction().to_string()),
            ("ambiguous_fraction", r.ambiguous_fraction().to_string()),
            ("filtered_fraction", r.filtered_fraction().to_string()),
            ("correct_length_fraction", r.correct_length_fraction().to_string()),
        ];
        if let Some(m) = self.merge.value() {
            rows.push(("merged", m.merged.to_string()));
            rows.push(("no_overlap", m.no_overlap.to_string()));
            rows.push(("too_many_mismatches", m.too_many_mismatches.to_string()));
        }
        if let Some(e) = self.reading_error.value() {
            rows.push(("reading_sub_rate", e.sub_rate.to_string()));
            rows.push(("reading_indel_rate", e.indel_rate.to_string()));
            rows.push(("reading_pairs", e.pairs.to_string()));
        }
        if let Some(c) = self.coverage.value() {
            rows.push(("unseen_fraction", c.histogram.unseen_fraction.to_string()));
            rows.push(("coverage_mean", c.histogram.mean().to_string()));
            rows.push(("coverage_variance", c.histogram.variance().to_string()));
            if let Some(u) = c.ground_truth_unseen_fraction {
                rows.push(("ground_truth_unseen_fraction", u.to_string()));
            }
        }
        if let Some(f) = self.neg_binomial.value() {
            rows.push(("nb_r", f.r.to_string()));
            rows.push(("nb_p", f.p.to_string()));
        }
        let mut out = String::from("quantity,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn error_rates_csv(&self) -> String {
        let mut out = String::from("stratum,p_sub,p_ins,p_del,n_reads\n");
        for s in &self.error_rates {
            if let Some(r) = s.rates.value() {
                let _ = writeln!(out, "{},{},{},{},{}", s.stratum.name(), r.p_sub, r.p_ins, r.p_del, r.n_reads);
            }
        }
        out
    }
}

fn substitution_csv(m: &ConditionalSubMatrix) -> String {
    let mut out = String::from("substitution,probability\n");
    for (label, v) in LABELS.iter().zip(m.labeled()) {
        let _ = writeln!(out, "{label},{v}");
    }
    out
}

/// Two columns: reads per design, number of designs with that many reads.
pub fn histogram_text(h: &CoverageHistogram, sep: char) -> String {
    let mut out = format!("reads{sep}designs\n");
    for (k, v) in &h.counts {
        let _ = writeln!(out, "{k}{sep}{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_serialize_with_status() {
        let ok: Section<u32> = Section::Ok(3);
        assert_eq!(serde_json::to_string(&ok).unwrap(), r#"{"status":"ok","value":3}"#);
        let skipped: Section<u32> = Section::skipped("no reads");
        let text = serde_json::to_string(&skipped).unwrap();
        assert_eq!(text, r#"{"status":"skipped","value":{"reason":"no reads"}}"#);
        assert_eq!(serde_json::from_str::<Section<u32>>(&text).unwrap(), skipped);
    }

    #[test]
    fn histogram_text_has_two_columns() {
        let h = CoverageHistogram::from_read_counts(&[0, 2, 2, 5]).unwrap();
        assert_eq!(histogram_text(&h, '\t'), "reads\tdesigns\n0\t1\n2\t2\n5\t1\n");
    }

    #[test]
    fn fractions_handle_empty_denominators() {
        let r = ReadCounts::default();
        assert_eq!(r.unmatched_fraction(), 0.0);
        let r = ReadCounts {
            pairs: 10,
            filtered: 1,
            analyzed: 9,
            matched: 8,
            unmatched: 1,
            ambiguous: 2,
            correct_length: 6,
        };
        assert_eq!(r.ambiguous_fraction(), 0.25);
        assert_eq!(r.correct_length_fraction(), 0.75);
    }
}
