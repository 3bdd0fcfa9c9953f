//! FASTA/FASTQ reading and writing, and random reference generation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dna_channel::sequencing::ReadPair;
use dna_channel::{Error as ChannelError, Nucleotide, ReferenceSet, Sequence};
use rand::Rng;

use crate::error::{CliError, Result};

/// Quality character written for every base.
pub const PLACEHOLDER_QUALITY: u8 = b'I';

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn parse_record(path: &Path, name: &str, text: &str) -> Result<Sequence> {
    Sequence::parse(text).map_err(|e| match e {
        ChannelError::InvalidCharacter { position, ch } => {
            CliError::InvalidRecord { path: path.to_path_buf(), record: name.to_string(), position, ch }
        }
        other => CliError::Channel(other),
    })
}

/// All records of a FASTA file in file order; lines may be wrapped.
pub fn read_fasta_records(path: &Path) -> Result<Vec<(String, Sequence)>> {
    let reader = open(path)?;
    let mut records = Vec::new();
    let mut current: Option<(String, String)> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            if let Some((name, text)) = current.take() {
                let seq = parse_record(path, &name, &text)?;
                records.push((name, seq));
            }
            current = Some((header.trim().to_string(), String::new()));
        } else if !line.is_empty() {
            match current.as_mut() {
                Some((_, text)) => text.push_str(line.trim()),
                None => {
                    return Err(CliError::Malformed {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        reason: "sequence data before the first '>' header".into(),
                    })
                }
            }
        }
    }
    if let Some((name, text)) = current {
        let seq = parse_record(path, &name, &text)?;
        records.push((name, seq));
    }
    Ok(records)
}

/// Reads a design. Ids follow file order; repeated sequences are reported
/// and dropped, so ids count distinct sequences only.
pub fn parse_fasta(path: &Path) -> Result<ReferenceSet> {
    let records = read_fasta_records(path)?;
    let mut seen = HashSet::with_capacity(records.len());
    let mut seqs = Vec::with_capacity(records.len());
    for (name, seq) in records {
        if seen.insert(seq.clone()) {
            seqs.push(seq);
        } else {
            log::warn!("{}: record {name:?} repeats an earlier sequence; skipped", path.display());
        }
    }
    ReferenceSet::new(seqs).map_err(CliError::Channel)
}

pub fn write_fasta<'a, I>(path: &Path, records: I) -> Result<()>
where
    I: IntoIterator<Item = (String, &'a Sequence)>,
{
    let mut w = create(path)?;
    for (name, seq) in records {
        writeln!(w, ">{name}\n{seq}").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads FASTQ records as `(name, sequence text)`; quality lines are
/// checked for length only.
fn read_fastq_raw(path: &Path) -> Result<Vec<(String, String)>> {
    let mut lines = open(path)?.lines().enumerate();
    let mut out = Vec::new();
    let malformed =
        |line: usize, reason: &str| CliError::Malformed { path: path.to_path_buf(), line, reason: reason.to_string() };
    loop {
        let header = loop {
            match lines.next() {
                None => return Ok(out),
                Some((n, l)) => {
                    let l = l.map_err(|e| CliError::io(path, e))?;
                    if !l.trim().is_empty() {
                        break (n + 1, l);
                    }
                }
            }
        };
        let Some(name) = header.1.strip_prefix('@') else {
            return Err(malformed(header.0, "expected '@' header"));
        };
        let mut next = |what: &str| -> Result<String> {
            match lines.next() {
                Some((_, l)) => l.map_err(|e| CliError::io(path, e)),
                None => Err(malformed(header.0, &format!("truncated record, missing {what}"))),
            }
        };
        let seq = next("sequence")?;
        let plus = next("'+' line")?;
        let qual = next("quality")?;
        if !plus.starts_with('+') {
            return Err(malformed(header.0 + 2, "expected '+' separator"));
        }
        if qual.trim_end().len() != seq.trim_end().len() {
            return Err(malformed(header.0 + 3, "quality length differs from sequence length"));
        }
        out.push((name.trim().to_string(), seq.trim_end().to_string()));
    }
}

/// Read pairs parsed from two FASTQ files.
#[derive(Debug, Default)]
pub struct FastqPairs {
    pub pairs: Vec<ReadPair>,
    /// Pairs dropped because a read held a non-ACGT character.
    pub skipped: usize,
}

/// Pairs records of the two files by position.
pub fn parse_fastq_pairs(fwd: &Path, rev: &Path) -> Result<FastqPairs> {
    let f = read_fastq_raw(fwd)?;
    let r = read_fastq_raw(rev)?;
    if f.len() != r.len() {
        return Err(CliError::RecordCountMismatch { forward: f.len(), reverse: r.len() });
    }
    let mut out = FastqPairs::default();
    for ((_, fs), (_, rs)) in f.into_iter().zip(r) {
        match (Sequence::parse(&fs), Sequence::parse(&rs)) {
            (Ok(forward), Ok(reverse)) => out.pairs.push(ReadPair { forward, reverse, template_origin: None }),
            _ => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        log::warn!("skipped {} read pairs with invalid characters", out.skipped);
    }
    Ok(out)
}

/// Streams read pairs into a forward and a reverse FASTQ file.
pub struct FastqPairWriter {
    fwd: (PathBuf, BufWriter<File>),
    rev: (PathBuf, BufWriter<File>),
    written: u64,
}

impl FastqPairWriter {
    pub fn create(fwd: &Path, rev: &Path) -> Result<Self> {
        Ok(Self { fwd: (fwd.to_path_buf(), create(fwd)?), rev: (rev.to_path_buf(), create(rev)?), written: 0 })
    }

    fn record(w: &mut (PathBuf, BufWriter<File>), name: &str, seq: &Sequence) -> Result<()> {
        let qual = vec![PLACEHOLDER_QUALITY; seq.len()];
        let io = |e| CliError::io(&w.0, e);
        write!(w.1, "@{name}\n{seq}\n+\n").map_err(io)?;
        w.1.write_all(&qual).map_err(|e| CliError::io(&w.0, e))?;
        w.1.write_all(b"\n").map_err(|e| CliError::io(&w.0, e))
    }

    pub fn write(&mut self, pair: &ReadPair) -> Result<()> {
        let name = match pair.template_origin {
            Some(o) => format!("read{} origin={o}", self.written),
            None => format!("read{}", self.written),
        };
        Self::record(&mut self.fwd, &format!("{name} 1"), &pair.forward)?;
        Self::record(&mut self.rev, &format!("{name} 2"), &pair.reverse)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64> {
        self.fwd.1.flush().map_err(|e| CliError::io(&self.fwd.0, e))?;
        self.rev.1.flush().map_err(|e| CliError::io(&self.rev.0, e))?;
        Ok(self.written)
    }
}

pub fn write_fastq_pairs(fwd: &Path, rev: &Path, pairs: &[ReadPair]) -> Result<()> {
    let mut w = FastqPairWriter::create(fwd, rev)?;
    for p in pairs {
        w.write(p)?;
    }
    w.finish().map(|_| ())
}

/// `m` distinct random sequences of length `target_length` without
/// homopolymer runs longer than `homopolymer_limit`. Each base is uniform
/// among the bases that keep the run within the limit; duplicates are
/// redrawn.
pub fn generate_references<R: Rng + ?Sized>(
    m: usize,
    target_length: usize,
    homopolymer_limit: usize,
    rng: &mut R,
) -> Result<ReferenceSet> {
    if homopolymer_limit == 0 {
        return Err(CliError::Config("homopolymer_limit must be >= 1".into()));
    }
    if m == 0 || target_length == 0 {
        return Err(CliError::Config("need at least one reference of length >= 1".into()));
    }
    let mut seen: HashSet<Sequence> = HashSet::with_capacity(m);
    let mut seqs = Vec::with_capacity(m);
    let mut attempts = 0usize;
    let max_attempts = 100 * m + 1000;
    while seqs.len() < m {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CliError::Config(format!("could not draw {m} distinct sequences of length {target_length}")));
        }
        let mut bases: Vec<Nucleotide> = Vec::with_capacity(target_length);
        let mut run = 0usize;
        for _ in 0..target_length {
            let base = match bases.last() {
                Some(&last) if run >= homopolymer_limit => {
                    let skip = rng.random_range(0..3);
                    Nucleotide::from_index((last.index() + 1 + skip) % 4)
                }
                _ => Nucleotide::from_index(rng.random_range(0..4)),
            };
            run = if bases.last() == Some(&base) { run + 1 } else { 1 };
            bases.push(base);
        }
        let seq = Sequence::new(bases);
        if seen.insert(seq.clone()) {
            seqs.push(seq);
        }
    }
    ReferenceSet::new(seqs).map_err(CliError::Channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dna_channel::rng::derive_stream;
    use std::fs;

    #[test]
    fn fasta_two_records_wrapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.fa");
        fs::write(&p, ">a\nACGT\nAC\n\n>b desc\nTTTTGG\n").unwrap();
        let refs = parse_fasta(&p).unwrap();
        assert_eq!(refs.len(), 2);
        assert_eq!(refs[0].to_string(), "ACGTAC");
        assert_eq!(refs[1].to_string(), "TTTTGG");
    }

    #[test]
    fn fasta_invalid_character_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.fa");
        fs::write(&p, ">good\nACGT\n>bad\nACNT\n").unwrap();
        match parse_fasta(&p).unwrap_err() {
            CliError::InvalidRecord { record, position, ch, .. } => {
                assert_eq!((record.as_str(), position, ch), ("bad", 2, 'N'));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn fasta_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.fa");
        let refs = generate_references(20, 30, 3, &mut derive_stream(1, 0)).unwrap();
        write_fasta(&p, refs.iter().map(|(i, s)| (format!("ref{i}"), s))).unwrap();
        let back = read_fasta_records(&p).unwrap();
        assert_eq!(back.len(), 20);
        for ((name, s), (i, r)) in back.iter().zip(refs.iter()) {
            assert_eq!(name, &format!("ref{i}"));
            assert_eq!(s, r);
        }
        fs::write(&p, ">a\nACGT\n>b\nACGT\n>c\nTTTT\n").unwrap();
        assert_eq!(parse_fasta(&p).unwrap().len(), 2);
    }

    #[test]
    fn fastq_pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (f, r) = (dir.path().join("f.fq"), dir.path().join("r.fq"));
        let pairs: Vec<ReadPair> = (0..3)
            .map(|i| ReadPair {
                forward: format!("ACGT{}", "A".repeat(i)).parse().unwrap(),
                reverse: "GGCC".parse().unwrap(),
                template_origin: Some(i as u32),
            })
            .collect();
        write_fastq_pairs(&f, &r, &pairs).unwrap();
        let text = fs::read_to_string(&f).unwrap();
        assert_eq!(text.lines().count(), 12);
        let back = parse_fastq_pairs(&f, &r).unwrap();
        assert_eq!(back.pairs.len(), 3);
        assert_eq!(back.skipped, 0);
        for (a, b) in back.pairs.iter().zip(&pairs) {
            assert_eq!((&a.forward, &a.reverse), (&b.forward, &b.reverse));
        }
    }

    #[test]
    fn fastq_count_mismatch_and_invalid_reads() {
        let dir = tempfile::tempdir().unwrap();
        let (f, r) = (dir.path().join("f.fq"), dir.path().join("r.fq"));
        fs::write(&f, "@a\nACGT\n+\nIIII\n@b\nACNT\n+\nIIII\n").unwrap();
        fs::write(&r, "@a\nACGT\n+\nIIII\n").unwrap();
        assert!(matches!(
            parse_fastq_pairs(&f, &r).unwrap_err(),
            CliError::RecordCountMismatch { forward: 2, reverse: 1 }
        ));
        fs::write(&r, "@a\nACGT\n+\nIIII\n@b\nACGT\n+\nIIII\n").unwrap();
        let parsed = parse_fastq_pairs(&f, &r).unwrap();
        assert_eq!((parsed.pairs.len(), parsed.skipped), (1, 1));
        fs::write(&r, "@a\nACGT\n+\nIII\n").unwrap();
        assert!(matches!(parse_fastq_pairs(&f, &r).unwrap_err(), CliError::Malformed { .. }));
    }

    #[test]
    fn generated_references_respect_limit() {
        let refs = generate_references(500, 40, 1, &mut derive_stream(2, 0)).unwrap();
        assert!(refs.iter().all(|(_, s)| s.longest_homopolymer() <= 1));
        let refs = generate_references(4991, 117, 3, &mut derive_stream(3, 0)).unwrap();
        assert_eq!(refs.len(), 4991);
        assert_eq!(refs.target_length(), 117);
        assert!(refs.iter().all(|(_, s)| s.longest_homopolymer() <= 3));
        // the constructor rejects duplicates, so distinctness is guaranteed
        assert!(generate_references(5, 10, 0, &mut derive_stream(3, 0)).is_err());
        assert!(generate_references(100, 2, 1, &mut derive_stream(3, 0)).is_err());
    }
}
