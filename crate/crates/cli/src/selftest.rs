//! Quick end-to-end checks of an installed binary.

use dna_channel::align::{align_global, edit_distance_within};
use dna_channel::stats::{expected_unseen_fraction, proportion_ratio, Stratum};
use dna_channel::Sequence;

use crate::config::ReferenceSource;
use crate::error::Result;
use crate::presets::preset;
use crate::run::{run, RunOptions};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn selftest() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let a = Sequence::parse("ACGTACGTTA")?;
    let b = Sequence::parse("ACTTACGTA")?;
    let d = align_global(a.bases(), b.bases()).ops.distance;
    checks.push(Check {
        name: "edit distance",
        passed: d == 2 && edit_distance_within(a.bases(), b.bases(), 2) == Some(2),
        detail: format!("distance {d}"),
    });

    let ratio = proportion_ratio(1.8, 1.9, 60);
    checks.push(Check {
        name: "proportion ratio",
        passed: (ratio - 0.0393).abs() < 0.001,
        detail: format!("{ratio:.5}"),
    });
    let unseen = expected_unseen_fraction(1.0);
    checks.push(Check {
        name: "poisson unseen",
        passed: (unseen - 0.36788).abs() < 5e-6,
        detail: format!("{unseen:.5}"),
    });

    let mut config = preset("fig7a").expect("preset exists");
    if let ReferenceSource::Generate { count, .. } = &mut config.references {
        *count = 500;
    }
    config.channel.coverage = 20.0;
    let report = run(&config, &RunOptions::default())?;
    let rates = report.rates(Stratum::All);
    let clean = rates.is_some_and(|r| r.p_sub == 0.0 && r.p_ins == 0.0 && r.p_del == 0.0);
    let merged = report.merge.value().map(|m| m.merged).unwrap_or(0);
    checks.push(Check {
        name: "noiseless pipeline",
        passed: clean && merged == report.reads.pairs && report.reads.unmatched == 0,
        detail: format!("{merged}/{} merged, {} unmatched", report.reads.pairs, report.reads.unmatched),
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        for c in super::selftest().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
