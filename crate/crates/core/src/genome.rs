//! Reference genome storage.
//!
//! Contigs from a FASTA file are concatenated into a single base array and
//! addressed by a global 0-based position. Every base is one of `A`, `C`, `G`,
//! `T` or `N`; IUPAC ambiguity codes collapse to `N` and soft-masked
//! (lowercase) bases are uppercased.

use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A named contig occupying `[start, start + length)` of the global coordinate space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contig {
    pub name: String,
    pub start: u64,
    pub length: u64,
}

impl Contig {
    pub fn end(&self) -> u64 {
        self.start + self.length
    }
}

/// Position expressed relative to a contig.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContigCoordinate {
    pub contig_name: String,
    /// 0-based offset within the contig.
    pub offset: u64,
}

/// Immutable reference sequence with its contig table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedGenome {
    bases: Vec<u8>,
    contigs: Vec<Contig>,
}

/// Maps any FASTA sequence byte to a stored base, or `None` when the byte is
/// neither an IUPAC nucleotide code nor whitespace-free legal input.
fn normalize_fasta_base(b: u8) -> Option<u8> {
    match b.to_ascii_uppercase() {
        c @ (b'A' | b'C' | b'G' | b'T') => Some(c),
        b'N' | b'U' | b'R' | b'Y' | b'S' | b'W' | b'K' | b'M' | b'B' | b'D' | b'H' | b'V' => {
            Some(b'N')
        }
        _ => None,
    }
}

impl PackedGenome {
    /// Builds a genome from `(name, sequence)` pairs. Sequences are normalized
    /// the same way as FASTA input.
    pub fn from_contigs<I, N, S>(contigs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (N, S)>,
        N: Into<String>,
        S: AsRef<[u8]>,
    {
        let mut genome = PackedGenome { bases: Vec::new(), contigs: Vec::new() };
        for (name, seq) in contigs {
            let start = genome.bases.len() as u64;
            for &b in seq.as_ref() {
                let base = normalize_fasta_base(b).ok_or(Error::InvalidBase(b as char))?;
                genome.bases.push(base);
            }
            let length = genome.bases.len() as u64 - start;
            genome.contigs.push(Contig { name: name.into(), start, length });
        }
        if genome.contigs.is_empty() {
            return Err(Error::invalid("genome has no contigs"));
        }
        Ok(genome)
    }

    /// Reassembles a genome from already-normalized parts, as stored in an
    /// index file.
    pub(crate) fn from_raw_parts(bases: Vec<u8>, contigs: Vec<Contig>) -> Result<Self> {
        let mut expected = 0u64;
        for c in &contigs {
            if c.start != expected {
                return Err(Error::BadIndex("contig table does not tile the genome".into()));
            }
            expected = c.end();
        }
        if expected != bases.len() as u64 || contigs.is_empty() {
            return Err(Error::BadIndex("contig table does not match genome length".into()));
        }
        if let Some(&b) = bases.iter().find(|b| !matches!(b, b'A' | b'C' | b'G' | b'T' | b'N')) {
            return Err(Error::BadIndex(format!("genome contains byte {b:#04x}")));
        }
        Ok(PackedGenome { bases, contigs })
    }

    pub fn len(&self) -> u64 {
        self.bases.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn contigs(&self) -> &[Contig] {
        &self.contigs
    }

    pub fn contig(&self, name: &str) -> Option<&Contig> {
        self.contigs.iter().find(|c| c.name == name)
    }

    /// All bases in global order.
    pub fn bases(&self) -> &[u8] {
        &self.bases
    }

    /// Returns up to `len` bases starting at `pos`; the result is truncated at
    /// the end of the genome.
    pub fn substring(&self, pos: u64, len: u64) -> Result<&[u8]> {
        if pos >= self.len() {
            return Err(Error::OutOfRange { pos, len: self.len() });
        }
        let end = pos.saturating_add(len).min(self.len());
        Ok(&self.bases[pos as usize..end as usize])
    }

    /// Like [`substring`](Self::substring) but returns an empty slice past the end.
    pub(crate) fn window(&self, pos: u64, len: usize) -> &[u8] {
        let start = (pos as usize).min(self.bases.len());
        let end = start.saturating_add(len).min(self.bases.len());
        &self.bases[start..end]
    }

    /// Index of the contig containing `pos`.
    pub fn contig_index(&self, pos: u64) -> Result<usize> {
        if pos >= self.len() {
            return Err(Error::OutOfRange { pos, len: self.len() });
        }
        Ok(self.contigs.partition_point(|c| c.end() <= pos))
    }

    pub fn to_contig_coordinate(&self, pos: u64) -> Result<ContigCoordinate> {
        let contig = &self.contigs[self.contig_index(pos)?];
        Ok(ContigCoordinate { contig_name: contig.name.clone(), offset: pos - contig.start })
    }

    /// Inverse of [`to_contig_coordinate`](Self::to_contig_coordinate).
    pub fn to_global(&self, contig_name: &str, offset: u64) -> Result<u64> {
        let contig = self
            .contig(contig_name)
            .ok_or_else(|| Error::invalid(format!("unknown contig {contig_name:?}")))?;
        if offset >= contig.length {
            return Err(Error::OutOfRange { pos: offset, len: contig.length });
        }
        Ok(contig.start + offset)
    }

    /// SHA-256 over the contig table and bases.
    pub fn checksum(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.contigs.len() as u64).to_le_bytes());
        for c in &self.contigs {
            hasher.update((c.name.len() as u64).to_le_bytes());
            hasher.update(c.name.as_bytes());
            hasher.update(c.start.to_le_bytes());
            hasher.update(c.length.to_le_bytes());
        }
        hasher.update(&self.bases);
        let digest = hasher.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(digest.as_slice());
        out
    }
}

/// Parses FASTA text into a genome. Contigs are concatenated in file order;
/// the contig name is the header text up to the first whitespace.
pub fn load_fasta<R: BufRead>(mut source: R) -> Result<PackedGenome> {
    let mut bases = Vec::new();
    let mut contigs: Vec<Contig> = Vec::new();
    let mut line = Vec::new();
    let mut line_no = 0usize;

    loop {
        line.clear();
        if source.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        line_no += 1;
        if let Some(header) = line.strip_prefix(b">") {
            let header = String::from_utf8_lossy(header);
            let name = header.split_whitespace().next().unwrap_or("").to_string();
            if name.is_empty() {
                return Err(Error::Fasta { line: line_no, message: "empty contig name".into() });
            }
            if let Some(last) = contigs.last_mut() {
                last.length = bases.len() as u64 - last.start;
            }
            contigs.push(Contig { name, start: bases.len() as u64, length: 0 });
            continue;
        }
        for &b in &line {
            if b.is_ascii_whitespace() {
                continue;
            }
            if contigs.is_empty() {
                return Err(Error::Fasta {
                    line: line_no,
                    message: "sequence data before the first header".into(),
                });
            }
            match normalize_fasta_base(b) {
                Some(base) => bases.push(base),
                None => {
                    return Err(Error::Fasta {
                        line: line_no,
                        message: format!("illegal character {:?}", b as char),
                    })
                }
            }
        }
    }

    match contigs.last_mut() {
        Some(last) => last.length = bases.len() as u64 - last.start,
        None => return Err(Error::Fasta { line: line_no, message: "no FASTA records".into() }),
    }
    Ok(PackedGenome { bases, contigs })
}

pub(crate) fn complement(b: u8) -> u8 {
    match b {
        b'A' => b'T',
        b'C' => b'G',
        b'G' => b'C',
        b'T' => b'A',
        _ => b'N',
    }
}

/// Reverse complement of a base string over `{A,C,G,T,N}`.
pub fn reverse_complement(s: &[u8]) -> Result<Vec<u8>> {
    s.iter()
        .rev()
        .map(|&b| match b {
            b'A' | b'C' | b'G' | b'T' | b'N' => Ok(complement(b)),
            _ => Err(Error::InvalidBase(b as char)),
        })
        .collect()
}

/// Unchecked reverse complement into a reusable buffer; non-ACGT bytes become `N`.
pub(crate) fn reverse_complement_into(s: &[u8], out: &mut Vec<u8>) {
    out.clear();
    out.extend(s.iter().rev().map(|&b| complement(b)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fasta(text: &str) -> Result<PackedGenome> {
        load_fasta(text.as_bytes())
    }

    #[test]
    fn single_contig() {
        let g = fasta(">c1\nACGT\n").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.contigs(), &[Contig { name: "c1".into(), start: 0, length: 4 }]);
    }

    #[test]
    fn second_contig_offset() {
        let g = fasta(">c1\nAC\n>c2\nGGTT\n").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.contig("c2").unwrap().start, 2);
    }

    #[test]
    fn ambiguity_codes_become_n() {
        let g = fasta(">c1\nACRT\n").unwrap();
        assert_eq!(g.bases(), b"ACNT");
    }

    #[test]
    fn lowercase_and_wrapped_lines() {
        let g = fasta(">chr1 description here\nac\r\ngt \n\n>x\nnn\n").unwrap();
        assert_eq!(g.bases(), b"ACGTNN");
        assert_eq!(g.contigs()[0].name, "chr1");
    }

    #[test]
    fn fasta_errors() {
        assert!(matches!(fasta(""), Err(Error::Fasta { .. })));
        assert!(matches!(fasta("ACGT\n>c\nA\n"), Err(Error::Fasta { line: 1, .. })));
        match fasta(">c1\nACGT\nAC*T\n") {
            Err(Error::Fasta { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn substring_truncates_and_rejects() {
        let g = fasta(">c1\nACGTAC\n").unwrap();
        assert_eq!(g.substring(1, 3).unwrap(), b"CGT");
        assert_eq!(g.substring(4, 10).unwrap(), b"AC");
        assert!(matches!(g.substring(6, 1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn contig_coordinates() {
        let g = fasta(">c1\nAC\n>c2\nGGTT\n").unwrap();
        let at = |p| g.to_contig_coordinate(p).unwrap();
        assert_eq!(at(3), ContigCoordinate { contig_name: "c2".into(), offset: 1 });
        assert_eq!(at(0), ContigCoordinate { contig_name: "c1".into(), offset: 0 });
        assert_eq!(at(5), ContigCoordinate { contig_name: "c2".into(), offset: 3 });
        assert!(g.to_contig_coordinate(6).is_err());
    }

    #[test]
    fn empty_contig_is_skipped_by_lookup() {
        let g = fasta(">a\nAC\n>empty\n>b\nGG\n").unwrap();
        assert_eq!(g.to_contig_coordinate(2).unwrap().contig_name, "b");
    }

    #[test]
    fn reverse_complement_examples() {
        assert_eq!(reverse_complement(b"AACC").unwrap(), b"GGTT");
        assert_eq!(reverse_complement(b"ACGT").unwrap(), b"ACGT");
        assert_eq!(reverse_complement(b"AN").unwrap(), b"NT");
        assert!(reverse_complement(b"AX").is_err());
    }

    fn contigs_strategy() -> impl Strategy<Value = Vec<(String, String)>> {
        prop::collection::vec(("[a-z][a-z0-9_]{0,6}", "[ACGTN]{1,40}"), 1..6)
    }

    proptest! {
        #[test]
        fn reverse_complement_is_an_involution(s in "[ACGTN]{0,64}") {
            let rc = reverse_complement(s.as_bytes()).unwrap();
            prop_assert_eq!(reverse_complement(&rc).unwrap(), s.as_bytes());
        }

        #[test]
        fn contigs_reassemble_input(contigs in contigs_strategy()) {
            let mut text = String::new();
            for (name, seq) in &contigs {
                text.push_str(&format!(">{name}\n"));
                for chunk in seq.as_bytes().chunks(7) {
                    text.push_str(std::str::from_utf8(chunk).unwrap());
                    text.push('\n');
                }
            }
            let g = load_fasta(text.as_bytes()).unwrap();
            let mut joined = Vec::new();
            for c in g.contigs() {
                joined.extend_from_slice(g.substring(c.start, c.length).unwrap());
            }
            let expected: String = contigs.iter().map(|(_, s)| s.as_str()).collect();
            prop_assert_eq!(joined, expected.into_bytes());
        }

        #[test]
        fn contig_coordinate_roundtrip(contigs in contigs_strategy()) {
            let g = PackedGenome::from_contigs(
                contigs.iter().enumerate().map(|(i, (n, s))| (format!("{n}{i}"), s.clone())),
            ).unwrap();
            for pos in 0..g.len() {
                let cc = g.to_contig_coordinate(pos).unwrap();
                prop_assert!(cc.offset < g.contig(&cc.contig_name).unwrap().length);
                prop_assert_eq!(g.to_global(&cc.contig_name, cc.offset).unwrap(), pos);
            }
        }
    }
}
