//! Read simulation with known origins.
//!
//! Each read is drawn from a uniform locus and strand. Bases are taken from
//! the reference in read orientation, passed through a germline mutation
//! stage (SNPs and short indels) and then a sequencing-error stage
//! (substitutions plus single-base indels), until the read has the requested
//! length. The origin is recorded in the read name so alignments can be scored
//! later.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genome::{complement, PackedGenome};
use crate::index::Direction;
use crate::io::Read;

const BASES: &[u8; 4] = b"ACGT";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimProfile {
    pub read_length: usize,
    pub snp_rate: f64,
    pub indel_mutation_rate: f64,
    /// Mutation indel lengths are uniform in `1..=max_mutation_indel`.
    pub max_mutation_indel: usize,
    pub seq_error_rate: f64,
    /// Fraction of sequencing errors that are single-base indels.
    pub indel_error_fraction: f64,
    pub rng_seed: u64,
}

impl SimProfile {
    /// Short-read profile: 0.09% SNPs, 0.01% indel mutations, substitution-only
    /// sequencing errors.
    pub fn short_reads(read_length: usize, seq_error_rate: f64, rng_seed: u64) -> Self {
        SimProfile {
            read_length,
            snp_rate: 0.0009,
            indel_mutation_rate: 0.0001,
            max_mutation_indel: 3,
            seq_error_rate,
            indel_error_fraction: 0.0,
            rng_seed,
        }
    }

    /// Long-read profile: as [`short_reads`](Self::short_reads) but 20% of
    /// sequencing errors are indels.
    pub fn long_reads(read_length: usize, seq_error_rate: f64, rng_seed: u64) -> Self {
        SimProfile { indel_error_fraction: 0.2, ..Self::short_reads(read_length, seq_error_rate, rng_seed) }
    }

    pub fn exact(read_length: usize, rng_seed: u64) -> Self {
        SimProfile {
            snp_rate: 0.0,
            indel_mutation_rate: 0.0,
            seq_error_rate: 0.0,
            ..Self::short_reads(read_length, 0.0, rng_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("snp rate", self.snp_rate),
            ("indel mutation rate", self.indel_mutation_rate),
            ("sequencing error rate", self.seq_error_rate),
            ("indel error fraction", self.indel_error_fraction),
        ];
        for (what, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("{what} {r} is outside [0, 1]")));
            }
        }
        if self.snp_rate + self.indel_mutation_rate > 1.0 {
            return Err(Error::invalid("snp and indel mutation rates sum above 1"));
        }
        if self.read_length == 0 {
            return Err(Error::invalid("read length must be positive"));
        }
        if self.max_mutation_indel == 0 {
            return Err(Error::invalid("maximum mutation indel length must be positive"));
        }
        Ok(())
    }
}

/// Where a simulated read came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Truth {
    pub contig: String,
    /// 0-based forward-strand start of the sampled span within the contig.
    pub position: u64,
    pub direction: Direction,
}

/// Edits applied to one read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub snps: u32,
    pub mutation_indels: u32,
    pub substitution_errors: u32,
    pub indel_errors: u32,
    /// Sequencing-stage decisions made (one per emitted or deleted base).
    pub error_trials: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedRead {
    pub read: Read,
    pub truth: Truth,
    pub edits: EditCounts,
}

/// Read name carrying the origin: `contig_pos_dir_serial` with a 1-based
/// position and `F`/`R` direction.
pub fn encode_truth(truth: &Truth, serial: u64) -> String {
    let dir = match truth.direction {
        Direction::Forward => 'F',
        Direction::ReverseComplement => 'R',
    };
    format!("{}_{}_{}_{}", truth.contig, truth.position + 1, dir, serial)
}

/// Parses a name produced by [`encode_truth`]. Fields are taken from the
/// right, so contig names may contain underscores.
pub fn decode_truth(name: &str) -> Option<(Truth, u64)> {
    let mut parts = name.rsplitn(4, '_');
    let serial = parts.next()?.parse().ok()?;
    let direction = match parts.next()? {
        "F" => Direction::Forward,
        "R" => Direction::ReverseComplement,
        _ => return None,
    };
    let position: u64 = parts.next()?.parse().ok()?;
    let contig = parts.next()?;
    if position == 0 || contig.is_empty() {
        return None;
    }
    Some((Truth { contig: contig.to_string(), position: position - 1, direction }, serial))
}

/// Iterator over simulated reads; see [`simulate`].
pub struct Simulator<'g> {
    genome: &'g PackedGenome,
    profile: SimProfile,
    rng: ChaCha8Rng,
    serial: u64,
    count: u64,
    quality: Vec<u8>,
    hap: VecDeque<(u8, usize)>,
}

/// Streams `count` reads drawn from `genome` under `profile`. The stream is a
/// pure function of the genome, profile and count.
pub fn simulate(genome: &PackedGenome, profile: SimProfile, count: u64) -> Result<Simulator<'_>> {
    profile.validate()?;
    if count == 0 {
        return Err(Error::invalid("read count must be positive"));
    }
    if !genome.contigs().iter().any(|c| c.length as usize >= profile.read_length) {
        return Err(Error::invalid(format!(
            "no contig is long enough for {}-base reads",
            profile.read_length
        )));
    }
    Ok(Simulator {
        genome,
        rng: ChaCha8Rng::seed_from_u64(profile.rng_seed),
        quality: vec![b'I'; profile.read_length],
        profile,
        serial: 0,
        count,
        hap: VecDeque::new(),
    })
}

fn other_base(rng: &mut impl Rng, b: u8) -> u8 {
    loop {
        let c = BASES[rng.gen_range(0..4)];
        if c != b {
            return c;
        }
    }
}

enum Attempt {
    Done(Vec<u8>, usize, EditCounts),
    Resample,
}

impl<'g> Simulator<'g> {
    /// Tries to produce one read from oriented contig position `start`.
    fn attempt(&mut self, contig_seq: &[u8], reverse: bool, start: usize) -> Attempt {
        let p = &self.profile;
        let len = contig_seq.len();
        let oriented = |i: usize| {
            if reverse {
                complement(contig_seq[len - 1 - i])
            } else {
                contig_seq[i]
            }
        };
        let mut edits = EditCounts::default();
        let mut cursor = start;
        let mut out = Vec::with_capacity(p.read_length);
        let mut span_end = start;
        self.hap.clear();

        while out.len() < p.read_length {
            // Refill the haplotype queue with at least one base.
            while self.hap.is_empty() {
                if cursor >= len {
                    return Attempt::Resample;
                }
                let b = oriented(cursor);
                if b == b'N' {
                    return Attempt::Resample;
                }
                let u: f64 = self.rng.gen();
                if u < p.snp_rate {
                    edits.snps += 1;
                    cursor += 1;
                    let snp = other_base(&mut self.rng, b);
                    self.hap.push_back((snp, cursor));
                } else if u < p.snp_rate + p.indel_mutation_rate {
                    edits.mutation_indels += 1;
                    let n = self.rng.gen_range(1..=p.max_mutation_indel);
                    if self.rng.gen_bool(0.5) {
                        for _ in 0..n {
                            let ins = BASES[self.rng.gen_range(0..4)];
                            self.hap.push_back((ins, cursor));
                        }
                    } else {
                        cursor += n;
                    }
                } else {
                    cursor += 1;
                    self.hap.push_back((b, cursor));
                }
            }

            edits.error_trials += 1;
            if self.rng.gen::<f64>() < p.seq_error_rate {
                if self.rng.gen::<f64>() < p.indel_error_fraction {
                    edits.indel_errors += 1;
                    if self.rng.gen_bool(0.5) {
                        out.push(BASES[self.rng.gen_range(0..4)]);
                    } else {
                        let (_, after) = self.hap.pop_front().unwrap();
                        span_end = after;
                    }
                } else {
                    edits.substitution_errors += 1;
                    let (b, after) = self.hap.pop_front().unwrap();
                    out.push(other_base(&mut self.rng, b));
                    span_end = after;
                }
            } else {
                let (b, after) = self.hap.pop_front().unwrap();
                out.push(b);
                span_end = after;
            }
        }
        Attempt::Done(out, span_end, edits)
    }
}

impl<'g> Iterator for Simulator<'g> {
    type Item = SimulatedRead;

    fn next(&mut self) -> Option<SimulatedRead> {
        if self.serial >= self.count {
            return None;
        }
        let genome = self.genome;
        loop {
            let global = self.rng.gen_range(0..genome.len());
            let reverse = self.rng.gen_bool(0.5);
            let ci = genome.contig_index(global).expect("sampled inside the genome");
            let contig = &genome.contigs()[ci];
            let offset = (global - contig.start) as usize;
            if offset + self.profile.read_length > contig.length as usize {
                continue;
            }
            let seq = genome.substring(contig.start, contig.length).expect("contig inside genome");
            // Oriented start so that forward and reverse loci are equally likely.
            let start = if reverse { contig.length as usize - offset - self.profile.read_length } else { offset };
            let (bases, span_end, edits) = match self.attempt(seq, reverse, start) {
                Attempt::Done(b, e, ed) => (b, e, ed),
                Attempt::Resample => continue,
            };
            let (position, direction) = if reverse {
                ((contig.length as usize - span_end) as u64, Direction::ReverseComplement)
            } else {
                (start as u64, Direction::Forward)
            };
            let truth = Truth { contig: contig.name.clone(), position, direction };
            let serial = self.serial;
            self.serial += 1;
            let read = Read { name: encode_truth(&truth, serial), bases, qualities: self.quality.clone() };
            return Some(SimulatedRead { read, truth, edits });
        }
    }
}

/// A family of interspersed repeats: `copies` diverged copies of one random unit.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatFamily {
    pub unit_length: usize,
    pub copies: usize,
    pub min_divergence: f64,
    pub max_divergence: f64,
}

/// Recipe for a synthetic reference.
#[derive(Clone, Debug, PartialEq)]
pub struct GenomeRecipe {
    pub contig_lengths: Vec<usize>,
    pub families: Vec<RepeatFamily>,
    /// Number of dinucleotide microsatellites and their length.
    pub microsatellites: usize,
    pub microsatellite_length: usize,
    pub seed: u64,
}

impl GenomeRecipe {
    pub fn random(length: usize, seed: u64) -> Self {
        GenomeRecipe {
            contig_lengths: vec![length],
            families: vec![],
            microsatellites: 0,
            microsatellite_length: 0,
            seed,
        }
    }

    /// Uniform random sequence with interspersed repeat families whose copy
    /// numbers span 10 to 1000, plus some microsatellites.
    pub fn with_repeats(length: usize, seed: u64) -> Self {
        let family = |copies| RepeatFamily { unit_length: 300, copies, min_divergence: 0.01, max_divergence: 0.06 };
        GenomeRecipe {
            contig_lengths: vec![length],
            families: [10, 30, 100, 300, 1000].into_iter().map(family).collect(),
            microsatellites: 40,
            microsatellite_length: 200,
            seed,
        }
    }

    pub fn build(&self) -> Result<PackedGenome> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut contigs: Vec<Vec<u8>> = self
            .contig_lengths
            .iter()
            .map(|&n| (0..n).map(|_| BASES[rng.gen_range(0..4)]).collect())
            .collect();
        let total: usize = self.contig_lengths.iter().sum();
        let place = |rng: &mut ChaCha8Rng, unit: &[u8], contigs: &mut Vec<Vec<u8>>| {
            let mut at = rng.gen_range(0..total);
            for c in contigs.iter_mut() {
                if at < c.len() {
                    let end = (at + unit.len()).min(c.len());
                    c[at..end].copy_from_slice(&unit[..end - at]);
                    return;
                }
                at -= c.len();
            }
        };
        for fam in &self.families {
            let unit: Vec<u8> = (0..fam.unit_length).map(|_| BASES[rng.gen_range(0..4)]).collect();
            for _ in 0..fam.copies {
                let div = rng.gen_range(fam.min_divergence..=fam.max_divergence);
                let copy: Vec<u8> = unit
                    .iter()
                    .map(|&b| if rng.gen_bool(div) { other_base(&mut rng, b) } else { b })
                    .collect();
                place(&mut rng, &copy, &mut contigs);
            }
        }
        for _ in 0..self.microsatellites {
            let a = BASES[rng.gen_range(0..4)];
            let b = other_base(&mut rng, a);
            let unit: Vec<u8> = [a, b].iter().copied().cycle().take(self.microsatellite_length).collect();
            place(&mut rng, &unit, &mut contigs);
        }
        PackedGenome::from_contigs(contigs.into_iter().enumerate().map(|(i, s)| (format!("chr{}", i + 1), s)))
    }
}
