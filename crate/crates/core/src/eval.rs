//! Scoring alignments against simulated truth, report arithmetic, and a
//! brute-force reference aligner.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aligner::{classify_confidence, AlignerStats, AlignmentResult, Hit, ResultKind, UNBOUNDED};
use crate::distance::{BoundedDistance, DistanceOutcome};
use crate::error::{Error, Result};
use crate::genome::{reverse_complement_into, PackedGenome};
use crate::index::Direction;
use crate::io::SamRecord;
use crate::simulate::Truth;

pub const DEFAULT_TOLERANCE: u64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Correct,
    Wrong,
    NotConfident,
}

/// Where a confident alignment was placed, in contig coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement<'a> {
    pub contig: &'a str,
    pub offset: u64,
    pub direction: Direction,
}

pub fn score_placement(kind: ResultKind, placement: Option<Placement<'_>>, truth: &Truth, tolerance: u64) -> Verdict {
    if kind != ResultKind::SingleHit {
        return Verdict::NotConfident;
    }
    match placement {
        Some(p)
            if p.contig == truth.contig
                && p.direction == truth.direction
                && p.offset.abs_diff(truth.position) <= tolerance =>
        {
            Verdict::Correct
        }
        _ => Verdict::Wrong,
    }
}

pub fn score_result(result: &AlignmentResult, truth: &Truth, genome: &PackedGenome, tolerance: u64) -> Verdict {
    let coord;
    let placement = match result {
        AlignmentResult::SingleHit { position, direction, .. } => match genome.to_contig_coordinate(*position) {
            Ok(c) => {
                coord = c;
                Some(Placement { contig: &coord.contig_name, offset: coord.offset, direction: *direction })
            }
            Err(_) => None,
        },
        _ => None,
    };
    score_placement(result.kind(), placement, truth, tolerance)
}

/// Scores a SAM record written by this crate (kind taken from the `XR` tag).
pub fn score_sam_record(rec: &SamRecord, truth: &Truth, tolerance: u64) -> Verdict {
    let kind = rec.kind.unwrap_or(if rec.is_mapped() { ResultKind::SingleHit } else { ResultKind::NotFound });
    let placement = rec.is_mapped().then(|| Placement {
        contig: &rec.rname,
        offset: rec.pos.saturating_sub(1),
        direction: rec.direction(),
    });
    score_placement(kind, placement, truth, tolerance)
}

/// Per-class read counts. Merging is associative, so workers can count
/// independently.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub total: u64,
    pub single_hits: u64,
    pub multiple_hits: u64,
    pub not_found: u64,
    /// Reads with a decodable truth.
    pub with_truth: u64,
    pub correct: u64,
    pub wrong: u64,
}

impl EvalCounts {
    pub fn add(&mut self, kind: ResultKind, verdict: Option<Verdict>) {
        self.total += 1;
        match kind {
            ResultKind::SingleHit => self.single_hits += 1,
            ResultKind::MultipleHits => self.multiple_hits += 1,
            ResultKind::NotFound => self.not_found += 1,
        }
        if let Some(v) = verdict {
            self.with_truth += 1;
            match v {
                Verdict::Correct => self.correct += 1,
                Verdict::Wrong => self.wrong += 1,
                Verdict::NotConfident => {}
            }
        }
    }

    pub fn merge(&mut self, o: &EvalCounts) {
        self.total += o.total;
        self.single_hits += o.single_hits;
        self.multiple_hits += o.multiple_hits;
        self.not_found += o.not_found;
        self.with_truth += o.with_truth;
        self.correct += o.correct;
        self.wrong += o.wrong;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub counts: EvalCounts,
    /// Percent of reads aligned with a SingleHit.
    pub aligned_fraction: f64,
    pub multiple_hits_fraction: f64,
    pub not_found_fraction: f64,
    /// Percent of scored confident alignments at the wrong place; `None`
    /// when nothing confident had a truth.
    pub error_fraction: Option<f64>,
    pub elapsed_seconds: f64,
    /// Reads per second; `None` without a positive elapsed time.
    pub throughput: Option<f64>,
    pub counters: Option<AlignerStats>,
    pub early_return_rate: Option<f64>,
    pub first_scored_best_rate: Option<f64>,
}

fn percent(part: u64, whole: u64) -> f64 {
    100.0 * part as f64 / whole as f64
}

pub fn compile_report(counts: EvalCounts, elapsed: Duration, counters: Option<AlignerStats>) -> Result<EvalReport> {
    if counts.total == 0 {
        return Err(Error::invalid("no reads to report on"));
    }
    let confident_scored = counts.correct + counts.wrong;
    let secs = elapsed.as_secs_f64();
    Ok(EvalReport {
        aligned_fraction: percent(counts.single_hits, counts.total),
        multiple_hits_fraction: percent(counts.multiple_hits, counts.total),
        not_found_fraction: percent(counts.not_found, counts.total),
        error_fraction: (confident_scored > 0).then(|| percent(counts.wrong, confident_scored)),
        elapsed_seconds: secs,
        throughput: (secs > 0.0).then(|| counts.total as f64 / secs),
        early_return_rate: counters.as_ref().and_then(AlignerStats::early_return_rate),
        first_scored_best_rate: counters.as_ref().and_then(AlignerStats::first_scored_best_rate),
        counters,
        counts,
    })
}

impl EvalReport {
    /// One `key=value` per line.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        let mut s = String::new();
        let c = &self.counts;
        let _ = writeln!(s, "total_reads={}", c.total);
        let _ = writeln!(s, "single_hits={}", c.single_hits);
        let _ = writeln!(s, "multiple_hits={}", c.multiple_hits);
        let _ = writeln!(s, "not_found={}", c.not_found);
        let _ = writeln!(s, "reads_with_truth={}", c.with_truth);
        let _ = writeln!(s, "correct={}", c.correct);
        let _ = writeln!(s, "wrong={}", c.wrong);
        let _ = writeln!(s, "aligned_pct={:.4}", self.aligned_fraction);
        let _ = writeln!(s, "multiple_hits_pct={:.4}", self.multiple_hits_fraction);
        let _ = writeln!(s, "not_found_pct={:.4}", self.not_found_fraction);
        let _ = writeln!(s, "error_pct={}", opt(self.error_fraction));
        let _ = writeln!(s, "elapsed_seconds={:.4}", self.elapsed_seconds);
        let _ = writeln!(s, "reads_per_second={}", opt(self.throughput));
        let _ = writeln!(s, "early_return_rate={}", opt(self.early_return_rate));
        let _ = writeln!(s, "first_scored_best_rate={}", opt(self.first_scored_best_rate));
        if let Some(k) = &self.counters {
            let _ = writeln!(s, "multiple_hit_exits={}", k.multiple_hit_exits);
            let _ = writeln!(s, "pruning_exits={}", k.pruning_exits);
            let _ = writeln!(s, "distance_calls={}", k.distance_calls);
            let _ = writeln!(s, "seeds_over_max_hits={}", k.seeds_over_max_hits);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A location found by the reference aligner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Site {
    position: u64,
    direction: Direction,
    distance: u32,
}

/// Turns the set of every location with distance at most `known` into a
/// classification. Locations are grouped per bucket and strand; a bucket
/// keeps its lowest distance (lowest position on ties). Buckets on the same
/// strand within `bucket_size` of the best one count as the same locus.
fn classify_sites(sites: &[Site], known: u32, d_max: u32, c: u32, bucket_size: u64) -> OracleOutcome {
    let mut buckets: Vec<Site> = Vec::new();
    let mut sorted = sites.to_vec();
    sorted.sort_by_key(|s| (s.direction, s.position / bucket_size, s.distance, s.position));
    for s in sorted {
        match buckets.last() {
            Some(b) if b.direction == s.direction && b.position / bucket_size == s.position / bucket_size => {}
            _ => buckets.push(s),
        }
    }
    let loci = buckets
        .iter()
        .map(|s| Hit { position: s.position, direction: s.direction, distance: s.distance })
        .collect();
    let Some(best) = buckets.iter().min_by_key(|s| (s.distance, s.position, s.direction)).copied() else {
        return OracleOutcome { result: AlignmentResult::NotFound, loci, known };
    };
    let d_second = buckets
        .iter()
        .filter(|s| !(s.direction == best.direction && s.position.abs_diff(best.position) <= bucket_size))
        .map(|s| s.distance)
        .min()
        .unwrap_or(UNBOUNDED);
    let hit = Hit { position: best.position, direction: best.direction, distance: best.distance };
    let result = match classify_confidence(best.distance, d_second, d_max, c) {
        ResultKind::SingleHit => AlignmentResult::SingleHit {
            position: best.position,
            direction: best.direction,
            distance: best.distance,
            gap: (d_second <= known).then(|| d_second - best.distance),
        },
        ResultKind::MultipleHits => AlignmentResult::MultipleHits { best: Some(hit) },
        ResultKind::NotFound => AlignmentResult::NotFound,
    };
    OracleOutcome { result, loci, known }
}

/// Reference classification plus the evidence behind it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleOutcome {
    pub result: AlignmentResult,
    /// Best location of every bucket and strand with distance at most
    /// `known`; buckets further away were not examined.
    pub loci: Vec<Hit>,
    pub known: u32,
}

fn code(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Reference aligner: finds every genome position and strand whose bounded
/// distance is small enough to matter and classifies them the way the
/// aligner does, with no seeds and no hit cap.
///
/// Positions are found by the pigeonhole rule: an alignment with at most `t`
/// edits leaves one of `t + 1` disjoint read pieces unedited, so every such
/// start lies within `t` of an exact piece occurrence. The search restarts
/// with a larger `t` until every location within `d_best + c - 1` is known.
/// Results equal a distance computation at every position
/// ([`exhaustive_oracle_align`]).
pub struct Oracle<'g> {
    genome: &'g PackedGenome,
    k: usize,
    /// `starts[code]..starts[code + 1]` indexes `positions`.
    starts: Vec<u32>,
    positions: Vec<u32>,
    bucket_size: u64,
}

impl<'g> Oracle<'g> {
    pub fn new(genome: &'g PackedGenome, bucket_size: u64) -> Result<Self> {
        const K: usize = 6;
        if bucket_size == 0 {
            return Err(Error::invalid("bucket size must be at least 1"));
        }
        if genome.len() > u32::MAX as u64 {
            return Err(Error::invalid("genome too large for the reference aligner"));
        }
        let bases = genome.bases();
        let kmer_at = |p: usize| -> Option<usize> {
            bases[p..p + K].iter().try_fold(0usize, |acc, &b| Some(acc * 4 + code(b)?))
        };
        let n_codes = 1usize << (2 * K);
        let mut counts = vec![0u32; n_codes + 1];
        let windows = bases.len().saturating_sub(K - 1);
        for p in 0..windows {
            if let Some(k) = kmer_at(p) {
                counts[k + 1] += 1;
            }
        }
        for i in 0..n_codes {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut positions = vec![0u32; counts[n_codes] as usize];
        for p in 0..windows {
            if let Some(k) = kmer_at(p) {
                positions[fill[k] as usize] = p as u32;
                fill[k] += 1;
            }
        }
        Ok(Oracle { genome, k: K, starts: counts, positions, bucket_size })
    }

    /// Exact occurrences of `piece` (at least `k` bases, no `N`).
    fn occurrences<'s>(&'s self, piece: &'s [u8]) -> impl Iterator<Item = u64> + 's {
        let key = piece[..self.k].iter().fold(0usize, |acc, &b| acc * 4 + code(b).unwrap());
        let bases = self.genome.bases();
        self.positions[self.starts[key] as usize..self.starts[key + 1] as usize]
            .iter()
            .map(|&p| p as u64)
            .filter(move |&p| bases.get(p as usize..p as usize + piece.len()) == Some(piece))
    }

    /// Every location with distance at most `t`, or `None` when the pieces
    /// would be shorter than the lookup key.
    fn sites_within(&self, read: &[u8], rc: &[u8], t: u32, kernel: &mut BoundedDistance) -> Option<Vec<Site>> {
        let r = read.len();
        let pieces = t as usize + 1;
        let len = r / pieces;
        if len < self.k {
            return None;
        }
        let g = self.genome.len();
        let mut sites = Vec::new();
        for (pattern, direction) in [(read, Direction::Forward), (rc, Direction::ReverseComplement)] {
            let mut ranges: Vec<(u64, u64)> = Vec::new();
            for i in 0..pieces {
                let o = i * len;
                let end = if i + 1 == pieces { r } else { o + len };
                let piece = &pattern[o..end];
                if piece.iter().any(|&b| code(b).is_none()) {
                    continue;
                }
                for hit in self.occurrences(piece) {
                    let center = hit as i64 - o as i64;
                    let lo = (center - t as i64).max(0) as u64;
                    let hi = ((center + t as i64).max(-1) + 1) as u64;
                    if lo < hi.min(g) {
                        ranges.push((lo, hi.min(g)));
                    }
                }
            }
            ranges.sort_unstable();
            let mut next = 0u64;
            for (lo, hi) in ranges {
                for p in lo.max(next)..hi {
                    let window = self.genome.window(p, r + t as usize);
                    if let DistanceOutcome::Distance(d) = kernel.compute_unchecked(pattern, window, t) {
                        sites.push(Site { position: p, direction, distance: d });
                    }
                }
                next = next.max(hi);
            }
        }
        Some(sites)
    }

    pub fn align(&self, read: &[u8], d_max: u32, c: u32) -> Result<AlignmentResult> {
        Ok(self.examine(read, d_max, c)?.result)
    }

    /// Like [`align`](Self::align) but also returns every location close
    /// enough to affect the classification.
    pub fn examine(&self, read: &[u8], d_max: u32, c: u32) -> Result<OracleOutcome> {
        if c == 0 {
            return Err(Error::invalid("confidence threshold must be at least 1"));
        }
        let widest = d_max + c - 1;
        let mut rc = Vec::new();
        reverse_complement_into(read, &mut rc);
        let mut kernel = BoundedDistance::new();
        let mut t = widest.min(3);
        loop {
            let Some(sites) = self.sites_within(read, &rc, t, &mut kernel) else {
                return Ok(scan_all(self.genome, read, &rc, widest, d_max, c, self.bucket_size));
            };
            let needed = match sites.iter().map(|s| s.distance).min() {
                Some(best) => (best + c - 1).min(widest),
                None => widest,
            };
            if t >= needed || t == widest {
                return Ok(classify_sites(&sites, t, d_max, c, self.bucket_size));
            }
            t = needed.max((2 * t + 1).min(widest));
        }
    }
}

fn scan_all(g: &PackedGenome, read: &[u8], rc: &[u8], t: u32, d_max: u32, c: u32, bucket_size: u64) -> OracleOutcome {
    let mut kernel = BoundedDistance::new();
    let mut sites = Vec::new();
    for (pattern, direction) in [(read, Direction::Forward), (rc, Direction::ReverseComplement)] {
        for p in 0..g.len() {
            let window = g.window(p, read.len() + t as usize);
            if let DistanceOutcome::Distance(d) = kernel.compute_unchecked(pattern, window, t) {
                sites.push(Site { position: p, direction, distance: d });
            }
        }
    }
    classify_sites(&sites, t, d_max, c, bucket_size)
}

/// Reference classification from a distance computation at every position
/// and strand. Quadratic in practice; meant for small genomes.
pub fn exhaustive_oracle_align(
    read: &[u8],
    genome: &PackedGenome,
    d_max: u32,
    c: u32,
    bucket_size: u64,
) -> Result<AlignmentResult> {
    if c == 0 || bucket_size == 0 {
        return Err(Error::invalid("confidence and bucket size must be at least 1"));
    }
    let mut rc = Vec::new();
    reverse_complement_into(read, &mut rc);
    Ok(scan_all(genome, read, &rc, d_max + c - 1, d_max, c, bucket_size).result)
}

/// One-shot [`Oracle`] call.
pub fn oracle_align(read: &[u8], genome: &PackedGenome, d_max: u32, c: u32, bucket_size: u64) -> Result<AlignmentResult> {
    Oracle::new(genome, bucket_size)?.align(read, d_max, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::reverse_complement;
    use crate::simulate::{simulate, GenomeRecipe, SimProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth(contig: &str, position: u64, direction: Direction) -> Truth {
        Truth { contig: contig.into(), position, direction }
    }

    fn genome() -> PackedGenome {
        PackedGenome::from_contigs([("c1", b"ACGT".repeat(100)), ("c2", b"TTGCA".repeat(100))]).unwrap()
    }

    #[test]
    fn score_examples() {
        let g = genome();
        let t = truth("c2", 100, Direction::Forward);
        let single = |pos| AlignmentResult::SingleHit { position: pos, direction: Direction::Forward, distance: 0, gap: None };
        assert_eq!(score_result(&single(400 + 103), &t, &g, 50), Verdict::Correct);
        assert_eq!(score_result(&single(400 + 151), &t, &g, 50), Verdict::Wrong);
        assert_eq!(score_result(&single(100), &t, &g, 50), Verdict::Wrong);
        let rev = AlignmentResult::SingleHit { position: 500, direction: Direction::ReverseComplement, distance: 0, gap: None };
        assert_eq!(score_result(&rev, &t, &g, 50), Verdict::Wrong);
        assert_eq!(score_result(&AlignmentResult::MultipleHits { best: None }, &t, &g, 50), Verdict::NotConfident);
        assert_eq!(score_result(&AlignmentResult::NotFound, &t, &g, 50), Verdict::NotConfident);
    }

    #[test]
    fn table_row_fixture() {
        let counts = EvalCounts {
            total: 1_000_000,
            single_hits: 920_000,
            multiple_hits: 50_000,
            not_found: 30_000,
            with_truth: 1_000_000,
            correct: 919_540,
            wrong: 460,
        };
        let rep = compile_report(counts, Duration::from_secs(10), None).unwrap();
        assert_eq!(rep.aligned_fraction, 92.0);
        assert!((rep.error_fraction.unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(rep.throughput, Some(100_000.0));
        let sum = rep.aligned_fraction + rep.multiple_hits_fraction + rep.not_found_fraction;
        assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn report_edge_cases() {
        assert!(compile_report(EvalCounts::default(), Duration::from_secs(1), None).is_err());
        let mut counts = EvalCounts::default();
        counts.add(ResultKind::NotFound, Some(Verdict::NotConfident));
        counts.add(ResultKind::MultipleHits, None);
        let rep = compile_report(counts, Duration::ZERO, None).unwrap();
        assert_eq!(rep.error_fraction, None);
        assert_eq!(rep.throughput, None);
        assert!(rep.to_key_value().contains("error_pct=NA\n"));
        assert!(rep.to_json().contains("\"aligned_fraction\": 0.0"));
    }

    #[test]
    fn counts_merge_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kinds = [ResultKind::SingleHit, ResultKind::MultipleHits, ResultKind::NotFound];
        let verdicts = [Some(Verdict::Correct), Some(Verdict::Wrong), Some(Verdict::NotConfident), None];
        let mut parts = [EvalCounts::default(); 3];
        let mut all = EvalCounts::default();
        for i in 0..300 {
            let k = kinds[rng.gen_range(0..3)];
            let v = verdicts[rng.gen_range(0..4)];
            parts[i % 3].add(k, v);
            all.add(k, v);
        }
        let mut left = parts[0];
        left.merge(&parts[1]);
        left.merge(&parts[2]);
        let mut right = parts[1];
        right.merge(&parts[2]);
        let mut right_total = parts[0];
        right_total.merge(&right);
        assert_eq!(left, all);
        assert_eq!(right_total, all);
    }

    fn random_genome(len: usize, seed: u64) -> PackedGenome {
        GenomeRecipe::random(len, seed).build().unwrap()
    }

    #[test]
    fn oracle_examples() {
        let mut g_seq = random_genome(20_000, 1).bases().to_vec();
        let unique = g_seq[5_000..5_100].to_vec();
        let g = PackedGenome::from_contigs([("c", g_seq.clone())]).unwrap();
        assert_eq!(
            oracle_align(&unique, &g, 12, 2, 32).unwrap(),
            AlignmentResult::SingleHit { position: 5_000, direction: Direction::Forward, distance: 0, gap: None }
        );
        let rc = reverse_complement(&unique).unwrap();
        assert_eq!(
            oracle_align(&rc, &g, 12, 2, 32).unwrap().best_hit().unwrap().direction,
            Direction::ReverseComplement
        );
        g_seq[12_000..12_100].copy_from_slice(&unique);
        let g = PackedGenome::from_contigs([("c", g_seq)]).unwrap();
        assert_eq!(oracle_align(&unique, &g, 12, 2, 32).unwrap().kind(), ResultKind::MultipleHits);
    }

    #[test]
    fn filtered_oracle_matches_exhaustive_scan() {
        let g = GenomeRecipe { contig_lengths: vec![6_000, 4_000], ..GenomeRecipe::with_repeats(0, 5) };
        let g = GenomeRecipe {
            families: g.families.iter().map(|f| crate::simulate::RepeatFamily { copies: f.copies.min(8), ..f.clone() }).collect(),
            microsatellites: 4,
            ..g
        }
        .build()
        .unwrap();
        let oracle = Oracle::new(&g, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut checked = 0;
        for err in [0.0, 0.02, 0.06, 0.15] {
            let profile = SimProfile { indel_mutation_rate: 0.01, ..SimProfile::long_reads(100, err, rng.gen()) };
            for sim in simulate(&g, profile, 40).unwrap() {
                for (d_max, c) in [(12, 2), (5, 1), (3, 3)] {
                    let fast = oracle.align(&sim.read.bases, d_max, c).unwrap();
                    let slow = exhaustive_oracle_align(&sim.read.bases, &g, d_max, c, 32).unwrap();
                    assert_eq!(fast.kind(), slow.kind(), "{}", sim.read.name);
                    assert_eq!(fast.best_hit(), slow.best_hit(), "{}", sim.read.name);
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 480);
    }

    #[test]
    fn oracle_handles_short_pieces_and_n() {
        let g = random_genome(3_000, 4);
        let mut read = g.bases()[1_000..1_030].to_vec();
        read[3] = b'N';
        read[20] = b'N';
        for (d_max, c) in [(12, 2), (2, 1)] {
            let fast = oracle_align(&read, &g, d_max, c, 32).unwrap();
            let slow = exhaustive_oracle_align(&read, &g, d_max, c, 32).unwrap();
            assert_eq!((fast.kind(), fast.best_hit()), (slow.kind(), slow.best_hit()));
        }
    }
}
