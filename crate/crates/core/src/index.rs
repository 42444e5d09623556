//! Hash index from fixed-length seeds to genome positions.
//!
//! Every overlapping window of `s` bases that contains no `N` is indexed once,
//! under its forward key. A lookup for seed `q` returns the forward windows
//! equal to `q` tagged [`Direction::Forward`] and the forward windows equal to
//! `revcomp(q)` tagged [`Direction::ReverseComplement`], so both strands are
//! answered without storing position lists twice.
//!
//! Seeds are packed two bits per base (`A=0, C=1, G=2, T=3`, first base in the
//! most significant position), which caps the seed size at 32. The table is
//! open-addressed with linear probing at a load factor of at most 0.7 and is
//! filled in ascending key order, so the serialized layout is a pure function
//! of the genome and seed size.
//!
//! # File layout
//!
//! All integers are little-endian.
//!
//! | field      | encoding                                                     |
//! |------------|--------------------------------------------------------------|
//! | magic      | 8 bytes `SNAPIDX1`                                           |
//! | version    | `u32`, currently 1                                           |
//! | seed size  | `u32`                                                        |
//! | checksum   | 32 bytes, SHA-256 of the genome (see [`PackedGenome::checksum`]) |
//! | contigs    | `u32` count, then per contig `u32` name length, name bytes, `u64` start, `u64` length |
//! | genome     | `u64` base count, then one ASCII byte per base               |
//! | table      | `u32` log2 capacity, then per slot `u64` key, `u32` start, `u32` length (length 0 = empty) |
//! | positions  | `u64` count, then `u32` per position                         |

use std::io::{self, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::genome::{Contig, PackedGenome};

pub const MAGIC: &[u8; 8] = b"SNAPIDX1";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_SEED_SIZE: usize = 32;

const EMPTY: Slot = Slot { key: 0, start: 0, len: 0 };

/// Strand on which a seed or read matches the forward reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Direction {
    Forward,
    ReverseComplement,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::ReverseComplement,
            Direction::ReverseComplement => Direction::Forward,
        }
    }
}

/// A single index hit: the forward-strand start of the matching window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeedHit {
    pub position: u64,
    pub direction: Direction,
}

/// Result of a lookup, borrowing the index's position lists.
#[derive(Clone, Copy, Debug, Default)]
pub struct SeedHits<'a> {
    pub forward: &'a [u32],
    pub reverse: &'a [u32],
}

impl<'a> SeedHits<'a> {
    pub fn count(&self) -> usize {
        self.forward.len() + self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = SeedHit> + 'a {
        let fwd = self.forward.iter().map(|&p| SeedHit { position: p as u64, direction: Direction::Forward });
        let rev = self
            .reverse
            .iter()
            .map(|&p| SeedHit { position: p as u64, direction: Direction::ReverseComplement });
        fwd.chain(rev)
    }

    pub fn to_vec(&self) -> Vec<SeedHit> {
        self.iter().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot {
    key: u64,
    start: u32,
    len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedIndex {
    seed_size: usize,
    genome_checksum: [u8; 32],
    hash_bits: u32,
    slots: Vec<Slot>,
    positions: Vec<u32>,
}

#[inline]
fn base_code(b: u8) -> Option<u64> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Packs a seed into its 2-bit key; `None` if it contains anything but ACGT.
pub fn pack_seed(seed: &[u8]) -> Option<u64> {
    seed.iter().try_fold(0u64, |key, &b| Some((key << 2) | base_code(b)?))
}

/// Key of the reverse complement of a packed seed of `s` bases.
pub fn reverse_complement_key(key: u64, s: usize) -> u64 {
    let mut fwd = key;
    let mut rc = 0u64;
    for _ in 0..s {
        rc = (rc << 2) | (3 - (fwd & 3));
        fwd >>= 2;
    }
    rc
}

#[inline]
fn slot_of(key: u64, bits: u32) -> usize {
    (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (64 - bits)) as usize
}

impl SeedIndex {
    /// Indexes every N-free window of `seed_size` bases.
    pub fn build(genome: &PackedGenome, seed_size: usize) -> Result<Self> {
        if !(1..=MAX_SEED_SIZE).contains(&seed_size) {
            return Err(Error::invalid(format!("seed size must be in 1..=32, got {seed_size}")));
        }
        if (genome.len() as usize) < seed_size {
            return Err(Error::invalid(format!(
                "genome of {} bases is shorter than the seed size {seed_size}",
                genome.len()
            )));
        }
        if genome.len() > u32::MAX as u64 {
            return Err(Error::invalid("genome exceeds 2^32 bases"));
        }

        let mask = if seed_size == 32 { u64::MAX } else { (1u64 << (2 * seed_size)) - 1 };
        let mut entries: Vec<(u64, u32)> = Vec::with_capacity(genome.len() as usize);
        let mut key = 0u64;
        let mut valid = 0usize; // consecutive ACGT bases ending at i
        for (i, &b) in genome.bases().iter().enumerate() {
            match base_code(b) {
                Some(code) => {
                    key = ((key << 2) | code) & mask;
                    valid += 1;
                }
                None => valid = 0,
            }
            if valid >= seed_size {
                entries.push((key, (i + 1 - seed_size) as u32));
            }
        }
        entries.sort_unstable();

        let distinct = entries.windows(2).filter(|w| w[0].0 != w[1].0).count() + usize::from(!entries.is_empty());
        let capacity = ((distinct * 10).div_ceil(7)).max(16).next_power_of_two();
        let hash_bits = capacity.trailing_zeros();
        let mut slots = vec![EMPTY; capacity];
        let positions: Vec<u32> = entries.iter().map(|&(_, p)| p).collect();

        let mut run_start = 0usize;
        while run_start < entries.len() {
            let key = entries[run_start].0;
            let run_end = run_start + entries[run_start..].partition_point(|e| e.0 == key);
            let mut slot = slot_of(key, hash_bits);
            while slots[slot].len != 0 {
                slot = (slot + 1) & (capacity - 1);
            }
            slots[slot] = Slot { key, start: run_start as u32, len: (run_end - run_start) as u32 };
            run_start = run_end;
        }

        Ok(SeedIndex { seed_size, genome_checksum: genome.checksum(), hash_bits, slots, positions })
    }

    pub fn seed_size(&self) -> usize {
        self.seed_size
    }

    pub fn genome_checksum(&self) -> &[u8; 32] {
        &self.genome_checksum
    }

    /// Number of indexed (forward) windows.
    pub fn window_count(&self) -> usize {
        self.positions.len()
    }

    fn positions_for_key(&self, key: u64) -> &[u32] {
        let mask = self.slots.len() - 1;
        let mut slot = slot_of(key, self.hash_bits);
        loop {
            let s = &self.slots[slot];
            if s.len == 0 {
                return &[];
            }
            if s.key == key {
                return &self.positions[s.start as usize..(s.start + s.len) as usize];
            }
            slot = (slot + 1) & mask;
        }
    }

    /// Lookup by packed key; no length check.
    pub(crate) fn lookup_key(&self, key: u64) -> SeedHits<'_> {
        SeedHits {
            forward: self.positions_for_key(key),
            reverse: self.positions_for_key(reverse_complement_key(key, self.seed_size)),
        }
    }

    /// All positions for `seed` on both strands. Seeds containing `N` were
    /// never indexed and return no hits.
    pub fn lookup(&self, seed: &[u8]) -> Result<SeedHits<'_>> {
        if seed.len() != self.seed_size {
            return Err(Error::invalid(format!(
                "seed has {} bases, index uses {}",
                seed.len(),
                self.seed_size
            )));
        }
        Ok(match pack_seed(seed) {
            Some(key) => self.lookup_key(key),
            None => SeedHits::default(),
        })
    }

    /// Writes the index together with the genome it was built from.
    pub fn save<W: Write>(&self, genome: &PackedGenome, mut sink: W) -> Result<()> {
        if genome.checksum() != self.genome_checksum {
            return Err(Error::ChecksumMismatch);
        }
        sink.write_all(MAGIC)?;
        sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
        sink.write_all(&(self.seed_size as u32).to_le_bytes())?;
        sink.write_all(&self.genome_checksum)?;

        sink.write_all(&(genome.contigs().len() as u32).to_le_bytes())?;
        for c in genome.contigs() {
            sink.write_all(&(c.name.len() as u32).to_le_bytes())?;
            sink.write_all(c.name.as_bytes())?;
            sink.write_all(&c.start.to_le_bytes())?;
            sink.write_all(&c.length.to_le_bytes())?;
        }
        sink.write_all(&genome.len().to_le_bytes())?;
        sink.write_all(genome.bases())?;

        sink.write_all(&self.hash_bits.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.slots.len() * 16);
        for s in &self.slots {
            buf.extend_from_slice(&s.key.to_le_bytes());
            buf.extend_from_slice(&s.start.to_le_bytes());
            buf.extend_from_slice(&s.len.to_le_bytes());
        }
        sink.write_all(&buf)?;
        sink.write_all(&(self.positions.len() as u64).to_le_bytes())?;
        buf.clear();
        buf.extend(self.positions.iter().flat_map(|p| p.to_le_bytes()));
        sink.write_all(&buf)?;
        sink.flush()?;
        Ok(())
    }

    /// Reads an index file. When `expected` is given, its checksum must match
    /// the genome recorded in the file.
    pub fn load<R: Read>(source: R, expected: Option<&PackedGenome>) -> Result<(SeedIndex, PackedGenome)> {
        let mut r = Reader(source);
        let mut magic = [0u8; 8];
        r.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BadIndex("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        let seed_size = r.u32()? as usize;
        if !(1..=MAX_SEED_SIZE).contains(&seed_size) {
            return Err(Error::BadIndex(format!("seed size {seed_size}")));
        }
        let mut checksum = [0u8; 32];
        r.bytes(&mut checksum)?;
        if let Some(g) = expected {
            if g.checksum() != checksum {
                return Err(Error::ChecksumMismatch);
            }
        }

        let contig_count = r.u32()? as usize;
        let mut contigs = Vec::with_capacity(contig_count.min(1 << 16));
        for _ in 0..contig_count {
            let name_len = r.u32()? as usize;
            let name = r.vec(name_len)?;
            let name = String::from_utf8(name).map_err(|_| Error::BadIndex("contig name is not UTF-8".into()))?;
            let start = r.u64()?;
            let length = r.u64()?;
            contigs.push(Contig { name, start, length });
        }
        let genome_len = r.u64()?;
        let bases = r.vec(usize::try_from(genome_len).map_err(|_| Error::Truncated)?)?;
        let genome = PackedGenome::from_raw_parts(bases, contigs)?;
        if genome.checksum() != checksum {
            return Err(Error::ChecksumMismatch);
        }

        let hash_bits = r.u32()?;
        if !(4..=40).contains(&hash_bits) {
            return Err(Error::BadIndex(format!("table size 2^{hash_bits}")));
        }
        let raw = r.vec(16usize << hash_bits)?;
        let slots: Vec<Slot> = raw
            .chunks_exact(16)
            .map(|c| Slot {
                key: u64::from_le_bytes(c[0..8].try_into().unwrap()),
                start: u32::from_le_bytes(c[8..12].try_into().unwrap()),
                len: u32::from_le_bytes(c[12..16].try_into().unwrap()),
            })
            .collect();
        let count = r.u64()? as usize;
        let raw = r.vec(count.checked_mul(4).ok_or(Error::Truncated)?)?;
        let positions: Vec<u32> =
            raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();

        for s in slots.iter().filter(|s| s.len != 0) {
            if s.start as usize + s.len as usize > positions.len() {
                return Err(Error::BadIndex("slot points past the position list".into()));
            }
        }
        if positions.iter().any(|&p| p as u64 + seed_size as u64 > genome.len()) {
            return Err(Error::BadIndex("position past the genome end".into()));
        }

        Ok((SeedIndex { seed_size, genome_checksum: checksum, hash_bits, slots, positions }, genome))
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Truncated,
            _ => Error::Io(e),
        })
    }

    fn vec(&mut self, len: usize) -> Result<Vec<u8>> {
        // Grow as data arrives so a corrupt length cannot force a huge allocation.
        let mut out = Vec::new();
        let got = (&mut self.0).take(len as u64).read_to_end(&mut out)?;
        if got != len {
            return Err(Error::Truncated);
        }
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
}
