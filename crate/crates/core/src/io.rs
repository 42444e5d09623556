//! FASTQ input and SAM output.

use std::fmt;
use std::io::{BufRead, Write};

use crate::aligner::{AlignmentResult, ResultKind};
use crate::error::{Error, Result};
use crate::genome::{reverse_complement_into, PackedGenome};
use crate::index::Direction;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Read {
    pub name: String,
    pub bases: Vec<u8>,
    pub qualities: Vec<u8>,
}

impl Read {
    pub fn new(name: impl Into<String>, bases: impl Into<Vec<u8>>, qualities: impl Into<Vec<u8>>) -> Result<Self> {
        let read = Read { name: name.into(), bases: bases.into(), qualities: qualities.into() };
        if read.name.is_empty() || read.name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("bad read name {:?}", read.name)));
        }
        if read.bases.len() != read.qualities.len() {
            return Err(Error::invalid("bases and qualities differ in length"));
        }
        if let Some(&b) = read.bases.iter().find(|b| !matches!(b, b'A' | b'C' | b'G' | b'T' | b'N')) {
            return Err(Error::InvalidBase(b as char));
        }
        Ok(read)
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn write_fastq<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"@")?;
        w.write_all(self.name.as_bytes())?;
        w.write_all(b"\n")?;
        w.write_all(&self.bases)?;
        w.write_all(b"\n+\n")?;
        w.write_all(&self.qualities)?;
        w.write_all(b"\n")
    }
}

fn normalize_read_base(b: u8) -> Option<u8> {
    match b.to_ascii_uppercase() {
        c @ (b'A' | b'C' | b'G' | b'T' | b'N') => Some(c),
        b'U' | b'R' | b'Y' | b'S' | b'W' | b'K' | b'M' | b'B' | b'D' | b'H' | b'V' | b'.' => Some(b'N'),
        _ => None,
    }
}

fn trim_newline(line: &mut Vec<u8>) {
    if line.last() == Some(&b'\n') {
        line.pop();
        if line.last() == Some(&b'\r') {
            line.pop();
        }
    }
}

/// Streaming 4-line FASTQ parser. The read name is the header up to the
/// first whitespace.
pub struct FastqReader<R> {
    source: R,
    offset: u64,
    line: Vec<u8>,
}

impl<R: BufRead> FastqReader<R> {
    pub fn new(source: R) -> Self {
        Self::with_offset(source, 0)
    }

    /// `offset` is added to byte positions in error messages.
    pub fn with_offset(source: R, offset: u64) -> Self {
        FastqReader { source, offset, line: Vec::new() }
    }

    fn next_line(&mut self) -> Result<bool> {
        self.line.clear();
        let n = self.source.read_until(b'\n', &mut self.line)?;
        self.offset += n as u64;
        let complete = self.line.last() == Some(&b'\n');
        trim_newline(&mut self.line);
        Ok(n > 0 && (complete || !self.line.is_empty()))
    }

    fn fail<T>(&self, at: u64, message: impl Into<String>) -> Result<T> {
        Err(Error::Fastq { offset: at, message: message.into() })
    }

    fn read_record(&mut self) -> Result<Option<Read>> {
        let start = loop {
            let at = self.offset;
            if !self.next_line()? {
                return Ok(None);
            }
            if !self.line.is_empty() {
                break at;
            }
        };
        if self.line[0] != b'@' {
            return self.fail(start, "record does not start with '@'");
        }
        let header = String::from_utf8_lossy(&self.line[1..]);
        let name = header.split_whitespace().next().unwrap_or("").to_string();
        if name.is_empty() {
            return self.fail(start, "empty read name");
        }

        let seq_at = self.offset;
        if !self.next_line()? {
            return self.fail(seq_at, "truncated record: missing sequence");
        }
        let mut bases = Vec::with_capacity(self.line.len());
        for &b in &self.line {
            match normalize_read_base(b) {
                Some(n) => bases.push(n),
                None => return self.fail(seq_at, format!("illegal base {:?}", b as char)),
            }
        }

        let plus_at = self.offset;
        if !self.next_line()? {
            return self.fail(plus_at, "truncated record: missing '+' line");
        }
        if self.line.first() != Some(&b'+') {
            return self.fail(plus_at, "expected '+' separator line");
        }

        let qual_at = self.offset;
        if !self.next_line()? && !bases.is_empty() {
            return self.fail(qual_at, "truncated record: missing qualities");
        }
        if self.line.len() != bases.len() {
            return self.fail(
                qual_at,
                format!("{} quality values for {} bases", self.line.len(), bases.len()),
            );
        }
        Ok(Some(Read { name, bases, qualities: self.line.clone() }))
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<Read>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

pub fn read_fastq<R: BufRead>(source: R) -> FastqReader<R> {
    FastqReader::new(source)
}

/// First FASTQ record start at or after `from` in `buf`.
///
/// A record start is a line beginning with `@` whose second following line
/// begins with `+`; quality lines may start with `@` but are never followed
/// two lines later by a `+`. Returns `None` when `buf` ends before the
/// question can be decided; with `at_eof` the end of `buf` is the end of the
/// file and `Some(buf.len())` means there is no further record.
pub fn next_record_start(buf: &[u8], from: usize, at_eof: bool) -> Option<usize> {
    let after_line = |at: usize| memchr(b'\n', &buf[at..]).map(|i| at + i + 1);
    let mut pos = from.min(buf.len());
    if pos > 0 && buf[pos - 1] != b'\n' {
        pos = after_line(pos).unwrap_or(buf.len());
    }
    while pos < buf.len() {
        if buf[pos] == b'@' {
            match after_line(pos).and_then(after_line) {
                Some(third) if third < buf.len() => {
                    if buf[third] == b'+' {
                        return Some(pos);
                    }
                }
                // A valid record always has its '+' line; at the end of the
                // file this candidate must be a quality line.
                _ if at_eof => {}
                _ => return None,
            }
        }
        pos = after_line(pos).unwrap_or(buf.len());
    }
    at_eof.then_some(buf.len())
}

fn memchr(needle: u8, hay: &[u8]) -> Option<usize> {
    hay.iter().position(|&b| b == needle)
}

pub const FLAG_REVERSE: u16 = 0x10;
pub const FLAG_UNMAPPED: u16 = 0x4;

/// One SAM alignment line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamRecord {
    pub qname: String,
    pub flag: u16,
    pub rname: String,
    /// 1-based; 0 when unmapped.
    pub pos: u64,
    pub mapq: u8,
    pub cigar: String,
    pub seq: Vec<u8>,
    pub qual: Vec<u8>,
    pub edit_distance: Option<u32>,
    pub kind: Option<ResultKind>,
}

impl SamRecord {
    pub fn is_mapped(&self) -> bool {
        self.flag & FLAG_UNMAPPED == 0
    }

    pub fn direction(&self) -> Direction {
        if self.flag & FLAG_REVERSE != 0 {
            Direction::ReverseComplement
        } else {
            Direction::Forward
        }
    }
}

impl fmt::Display for SamRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seq = if self.seq.is_empty() { "*".into() } else { String::from_utf8_lossy(&self.seq) };
        let qual = if self.qual.is_empty() { "*".into() } else { String::from_utf8_lossy(&self.qual) };
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t*\t0\t0\t{}\t{}",
            self.qname, self.flag, self.rname, self.pos, self.mapq, self.cigar, seq, qual
        )?;
        if let Some(nm) = self.edit_distance {
            write!(f, "\tNM:i:{nm}")?;
        }
        if let Some(kind) = self.kind {
            write!(f, "\tXR:Z:{}", kind.as_str())?;
        }
        Ok(())
    }
}

/// Mapping quality for a confident hit: `min(60, 10 * gap)`, 60 without a
/// second-best location.
pub fn mapping_quality(gap: Option<u32>) -> u8 {
    gap.map_or(60, |g| g.saturating_mul(10).min(60) as u8)
}

/// Converts an alignment result to a SAM record. Reverse-strand hits store
/// the reverse-complemented read and reversed qualities.
pub fn to_sam_record(result: &AlignmentResult, read: &Read, genome: &PackedGenome) -> SamRecord {
    let mut rec = SamRecord {
        qname: read.name.clone(),
        flag: FLAG_UNMAPPED,
        rname: "*".into(),
        pos: 0,
        mapq: 0,
        cigar: "*".into(),
        seq: read.bases.clone(),
        qual: read.qualities.clone(),
        edit_distance: None,
        kind: Some(result.kind()),
    };
    let mapq = match result {
        AlignmentResult::SingleHit { gap, .. } => mapping_quality(*gap),
        _ => 0,
    };
    let Some(hit) = result.best_hit() else {
        return rec;
    };
    let Ok(coord) = genome.to_contig_coordinate(hit.position) else {
        return rec;
    };
    rec.flag = 0;
    rec.rname = coord.contig_name;
    rec.pos = coord.offset + 1;
    rec.mapq = mapq;
    rec.cigar = format!("{}M", read.len());
    rec.edit_distance = Some(hit.distance);
    if hit.direction == Direction::ReverseComplement {
        rec.flag |= FLAG_REVERSE;
        reverse_complement_into(&read.bases, &mut rec.seq);
        rec.qual.reverse();
    }
    rec
}

pub fn write_sam_header<W: Write>(mut w: W, genome: &PackedGenome, command_line: &str) -> std::io::Result<()> {
    writeln!(w, "@HD\tVN:1.6\tSO:unsorted")?;
    for c in genome.contigs() {
        writeln!(w, "@SQ\tSN:{}\tLN:{}", c.name, c.length)?;
    }
    writeln!(
        w,
        "@PG\tID:snapalign\tPN:snapalign\tVN:{}\tCL:{}",
        env!("CARGO_PKG_VERSION"),
        command_line
    )
}

/// Parses one SAM alignment line (not a header line).
pub fn parse_sam_record(line: &str, line_no: usize) -> Result<SamRecord> {
    let fail = |m: String| Error::Sam { line: line_no, message: m };
    let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split('\t').collect();
    if fields.len() < 11 {
        return Err(fail(format!("expected at least 11 fields, found {}", fields.len())));
    }
    let num = |i: usize| -> Result<u64> {
        fields[i].parse().map_err(|_| fail(format!("field {} is not a number: {:?}", i + 1, fields[i])))
    };
    let mut rec = SamRecord {
        qname: fields[0].to_string(),
        flag: num(1)? as u16,
        rname: fields[2].to_string(),
        pos: num(3)?,
        mapq: num(4)?.min(255) as u8,
        cigar: fields[5].to_string(),
        seq: if fields[9] == "*" { vec![] } else { fields[9].as_bytes().to_vec() },
        qual: if fields[10] == "*" { vec![] } else { fields[10].as_bytes().to_vec() },
        edit_distance: None,
        kind: None,
    };
    for tag in &fields[11..] {
        if let Some(v) = tag.strip_prefix("NM:i:") {
            rec.edit_distance = v.parse().ok();
        } else if let Some(v) = tag.strip_prefix("XR:Z:") {
            rec.kind = ResultKind::parse(v);
        }
    }
    Ok(rec)
}
