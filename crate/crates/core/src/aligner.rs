//! Seed-and-extend alignment of a single read.
//!
//! Seeds are drawn from the read in [`seed_offsets`] order and looked up in
//! the [`SeedIndex`]. Every hit votes for a candidate alignment start
//! (`anchor`), and anchors are merged into fixed-width buckets per strand.
//! After each seed the unscored bucket with the most votes is scored with the
//! bounded edit distance, using a limit that shrinks as the best and
//! second-best distances improve. The loop stops early when the read is
//! provably ambiguous, or when enough disjoint seeds have been tried that any
//! location not yet seen must be too distant to matter; in that case the
//! remaining candidates are scored and the read classified.
//!
//! Scores from candidates on the same strand whose anchors lie within one
//! bucket width of each other describe the same locus (indels shift anchors
//! across bucket borders), so only the best of them counts towards the
//! best/second-best comparison.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::distance::{BoundedDistance, DistanceOutcome};
use crate::error::{Error, Result};
use crate::genome::{reverse_complement_into, PackedGenome};
use crate::index::{pack_seed, Direction, SeedIndex};

/// Stand-in for an infinite distance.
pub const UNBOUNDED: u32 = u32::MAX;

/// Maximum edit distance allowed for a reported alignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MaxDistance {
    Fixed(u32),
    /// `ceil(percent * read_length / 100)`.
    PercentOfRead(u32),
}

impl MaxDistance {
    pub fn resolve(self, read_length: usize) -> u32 {
        match self {
            MaxDistance::Fixed(d) => d,
            MaxDistance::PercentOfRead(p) => ((read_length as u64 * p as u64).div_ceil(100)) as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlignerParams {
    pub seed_size: usize,
    pub seeds_to_try: usize,
    pub max_distance: MaxDistance,
    pub confidence: u32,
    pub max_hits: usize,
    pub bucket_size: u64,
    /// When false every distance call uses `d_max + c - 1`. Only useful for
    /// checking that limit shrinking never changes a classification.
    pub shrink_d_limit: bool,
}

impl Default for AlignerParams {
    fn default() -> Self {
        AlignerParams {
            seed_size: 20,
            seeds_to_try: 25,
            max_distance: MaxDistance::PercentOfRead(12),
            confidence: 2,
            max_hits: 300,
            bucket_size: 32,
            shrink_d_limit: true,
        }
    }
}

impl AlignerParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.seed_size == 0 || self.seed_size > crate::index::MAX_SEED_SIZE {
            return fail("seed size must be in 1..=32");
        }
        if self.seeds_to_try == 0 {
            return fail("seeds to try must be at least 1");
        }
        if self.confidence == 0 {
            return fail("confidence threshold must be at least 1");
        }
        if self.max_hits == 0 {
            return fail("max hits must be at least 1");
        }
        if self.bucket_size == 0 {
            return fail("bucket size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Hit {
    pub position: u64,
    pub direction: Direction,
    pub distance: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ResultKind {
    SingleHit,
    MultipleHits,
    NotFound,
}

impl ResultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultKind::SingleHit => "SingleHit",
            ResultKind::MultipleHits => "MultipleHits",
            ResultKind::NotFound => "NotFound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SingleHit" => Some(ResultKind::SingleHit),
            "MultipleHits" => Some(ResultKind::MultipleHits),
            "NotFound" => Some(ResultKind::NotFound),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AlignmentResult {
    /// `gap` is `d_second - d_best`, or `None` when no second location was
    /// found within the distance limit.
    SingleHit { position: u64, direction: Direction, distance: u32, gap: Option<u32> },
    /// `best` is the best-scoring location when one was scored.
    MultipleHits { best: Option<Hit> },
    NotFound,
}

impl AlignmentResult {
    pub fn kind(&self) -> ResultKind {
        match self {
            AlignmentResult::SingleHit { .. } => ResultKind::SingleHit,
            AlignmentResult::MultipleHits { .. } => ResultKind::MultipleHits,
            AlignmentResult::NotFound => ResultKind::NotFound,
        }
    }

    /// Best location, if any was scored.
    pub fn best_hit(&self) -> Option<Hit> {
        match *self {
            AlignmentResult::SingleHit { position, direction, distance, .. } => {
                Some(Hit { position, direction, distance })
            }
            AlignmentResult::MultipleHits { best } => best,
            AlignmentResult::NotFound => None,
        }
    }
}

/// Final classification from the best and second-best distances
/// ([`UNBOUNDED`] for none).
pub fn classify_confidence(d_best: u32, d_second: u32, d_max: u32, c: u32) -> ResultKind {
    if d_best <= d_max && d_second >= d_best.saturating_add(c) {
        ResultKind::SingleHit
    } else if d_best <= d_max {
        ResultKind::MultipleHits
    } else {
        ResultKind::NotFound
    }
}

/// Read offsets of the seeds to try, in order: all disjoint seeds from offset
/// 0, then the same grid shifted by `s/2`, then `s/4`, `3s/4`, `s/8`, ...
/// Offsets past `read_length - s` and repeated shifts are dropped; at most
/// `n` offsets are returned.
pub fn seed_offsets(read_length: usize, s: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if s == 0 || read_length < s || n == 0 {
        return out;
    }
    let last = read_length - s;
    let mut seen = vec![false; s];
    let mut remaining = s;
    let mut push_shift = |shift: usize, out: &mut Vec<usize>, remaining: &mut usize| {
        if seen[shift] {
            return;
        }
        seen[shift] = true;
        *remaining -= 1;
        for off in (shift..=last).step_by(s) {
            if out.len() == n {
                return;
            }
            out.push(off);
        }
    };
    push_shift(0, &mut out, &mut remaining);
    let mut denom = 2usize;
    while out.len() < n && remaining > 0 {
        for numer in (1..denom).step_by(2) {
            push_shift(numer * s / denom, &mut out, &mut remaining);
            if out.len() == n {
                break;
            }
        }
        denom *= 2;
    }
    out
}

/// Counters accumulated across reads.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignerStats {
    pub reads: u64,
    pub too_short: u64,
    pub single_hits: u64,
    pub multiple_hits: u64,
    pub not_found: u64,
    pub seeds_looked_up: u64,
    pub seeds_with_n: u64,
    pub seeds_over_max_hits: u64,
    pub distance_calls: u64,
    /// Calls after the first one for the same read.
    pub later_distance_calls: u64,
    /// Later calls that stopped at their limit.
    pub later_early_returns: u64,
    pub reads_scored: u64,
    /// Reads whose first scored location ended up the best.
    pub first_scored_best: u64,
    pub multiple_hit_exits: u64,
    pub pruning_exits: u64,
}

impl AlignerStats {
    pub fn merge(&mut self, o: &AlignerStats) {
        self.reads += o.reads;
        self.too_short += o.too_short;
        self.single_hits += o.single_hits;
        self.multiple_hits += o.multiple_hits;
        self.not_found += o.not_found;
        self.seeds_looked_up += o.seeds_looked_up;
        self.seeds_with_n += o.seeds_with_n;
        self.seeds_over_max_hits += o.seeds_over_max_hits;
        self.distance_calls += o.distance_calls;
        self.later_distance_calls += o.later_distance_calls;
        self.later_early_returns += o.later_early_returns;
        self.reads_scored += o.reads_scored;
        self.first_scored_best += o.first_scored_best;
        self.multiple_hit_exits += o.multiple_hit_exits;
        self.pruning_exits += o.pruning_exits;
    }

    /// Fraction of later distance calls that returned early.
    pub fn early_return_rate(&self) -> Option<f64> {
        (self.later_distance_calls > 0)
            .then(|| self.later_early_returns as f64 / self.later_distance_calls as f64)
    }

    pub fn first_scored_best_rate(&self) -> Option<f64> {
        (self.reads_scored > 0).then(|| self.first_scored_best as f64 / self.reads_scored as f64)
    }
}

/// A candidate location: one bucket on one strand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub bucket: u64,
    pub direction: Direction,
    /// First anchor seen in this bucket; scoring starts here.
    pub anchor: u64,
    pub seeds_hitting: u32,
    pub scored: bool,
    /// Distance, or [`UNBOUNDED`] when the call exceeded its limit.
    pub score: u32,
    last_seed: u32,
}

/// How the seed loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopExit {
    SeedsExhausted,
    MultipleHits,
    Pruned,
    TooShort,
}

/// Per-read working state; reused across reads by one [`Aligner`].
#[derive(Debug, Default)]
pub struct CandidateSet {
    by_key: FxHashMap<(u64, Direction), usize>,
    candidates: Vec<Candidate>,
    best: Option<usize>,
    d_second: u32,
    first_scored: Option<usize>,
    disjoint_seeds: Vec<usize>,
    seeds_looked_up: u32,
    seeds_over_max_hits: u32,
    exit: Option<LoopExit>,
}

impl CandidateSet {
    fn reset(&mut self) {
        self.by_key.clear();
        self.candidates.clear();
        self.best = None;
        self.d_second = UNBOUNDED;
        self.first_scored = None;
        self.disjoint_seeds.clear();
        self.seeds_looked_up = 0;
        self.seeds_over_max_hits = 0;
        self.exit = None;
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn d_best(&self) -> u32 {
        self.best.map_or(UNBOUNDED, |i| self.candidates[i].score)
    }

    pub fn d_second(&self) -> u32 {
        self.d_second
    }

    /// Number of mutually non-overlapping seeds that were looked up.
    pub fn disjoint_seeds_tested(&self) -> usize {
        self.disjoint_seeds.len()
    }

    pub fn seeds_looked_up(&self) -> u32 {
        self.seeds_looked_up
    }

    pub fn seeds_over_max_hits(&self) -> u32 {
        self.seeds_over_max_hits
    }

    pub fn exit(&self) -> Option<LoopExit> {
        self.exit
    }

    fn add_vote(&mut self, anchor: u64, direction: Direction, bucket_size: u64, seed: u32) {
        let bucket = anchor / bucket_size;
        let next = self.candidates.len();
        let idx = *self.by_key.entry((bucket, direction)).or_insert(next);
        if idx == next {
            self.candidates.push(Candidate {
                bucket,
                direction,
                anchor,
                seeds_hitting: 1,
                scored: false,
                score: UNBOUNDED,
                last_seed: seed,
            });
        } else {
            let c = &mut self.candidates[idx];
            if c.last_seed != seed {
                c.last_seed = seed;
                c.seeds_hitting += 1;
            }
        }
    }

    /// Unscored candidate with the most votes; ties go to the lowest anchor,
    /// then forward strand.
    fn best_unscored(&self) -> Option<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.scored)
            .min_by_key(|(_, c)| (std::cmp::Reverse(c.seeds_hitting), c.anchor, c.direction))
            .map(|(i, _)| i)
    }

    fn same_locus(&self, a: usize, b: usize, bucket_size: u64) -> bool {
        let (a, b) = (&self.candidates[a], &self.candidates[b]);
        a.direction == b.direction && a.anchor.abs_diff(b.anchor) <= bucket_size
    }

    fn record_score(&mut self, idx: usize, bucket_size: u64) {
        let d = self.candidates[idx].score;
        if d == UNBOUNDED {
            return;
        }
        let Some(best) = self.best else {
            self.best = Some(idx);
            return;
        };
        let d_best = self.candidates[best].score;
        if d < d_best {
            self.best = Some(idx);
            self.d_second = self
                .candidates
                .iter()
                .enumerate()
                .filter(|&(j, c)| c.scored && j != idx && !self.same_locus(j, idx, bucket_size))
                .map(|(_, c)| c.score)
                .min()
                .unwrap_or(UNBOUNDED);
        } else if !self.same_locus(idx, best, bucket_size) {
            self.d_second = self.d_second.min(d);
        }
    }
}

/// Aligns reads against one index; holds per-worker scratch.
pub struct Aligner<'a> {
    index: &'a SeedIndex,
    genome: &'a PackedGenome,
    params: AlignerParams,
    kernel: BoundedDistance,
    set: CandidateSet,
    rc_read: Vec<u8>,
    offsets: Vec<usize>,
    offsets_for: usize,
    stats: AlignerStats,
}

impl<'a> Aligner<'a> {
    pub fn new(index: &'a SeedIndex, genome: &'a PackedGenome, params: AlignerParams) -> Result<Self> {
        params.validate()?;
        if index.seed_size() != params.seed_size {
            return Err(Error::invalid(format!(
                "index was built with seed size {}, parameters ask for {}",
                index.seed_size(),
                params.seed_size
            )));
        }
        if index.genome_checksum() != &genome.checksum() {
            return Err(Error::ChecksumMismatch);
        }
        Ok(Aligner {
            index,
            genome,
            params,
            kernel: BoundedDistance::new(),
            set: CandidateSet::default(),
            rc_read: Vec::new(),
            offsets: Vec::new(),
            offsets_for: usize::MAX,
            stats: AlignerStats::default(),
        })
    }

    pub fn params(&self) -> &AlignerParams {
        &self.params
    }

    pub fn stats(&self) -> &AlignerStats {
        &self.stats
    }

    pub fn take_stats(&mut self) -> AlignerStats {
        std::mem::take(&mut self.stats)
    }

    /// State left behind by the last [`align`](Self::align) call.
    pub fn last_candidates(&self) -> &CandidateSet {
        &self.set
    }

    /// Cells touched by the distance kernel so far.
    pub fn distance_cells(&self) -> u64 {
        self.kernel.cells
    }

    pub fn align(&mut self, bases: &[u8]) -> AlignmentResult {
        let result = self.align_inner(bases);
        self.stats.reads += 1;
        match result.kind() {
            ResultKind::SingleHit => self.stats.single_hits += 1,
            ResultKind::MultipleHits => self.stats.multiple_hits += 1,
            ResultKind::NotFound => self.stats.not_found += 1,
        }
        if let Some(first) = self.set.first_scored {
            self.stats.reads_scored += 1;
            if self.set.best == Some(first) {
                self.stats.first_scored_best += 1;
            }
        }
        result
    }

    fn align_inner(&mut self, bases: &[u8]) -> AlignmentResult {
        self.set.reset();
        let p = &self.params;
        let (s, c, bucket_size) = (p.seed_size, p.confidence, p.bucket_size);
        let r = bases.len();
        if r < s {
            self.stats.too_short += 1;
            self.set.exit = Some(LoopExit::TooShort);
            return AlignmentResult::NotFound;
        }
        let d_max = p.max_distance.resolve(r);
        reverse_complement_into(bases, &mut self.rc_read);
        if self.offsets_for != r {
            self.offsets = seed_offsets(r, s, p.seeds_to_try);
            self.offsets_for = r;
        }

        let mut exit = LoopExit::SeedsExhausted;
        for seed_no in 0..self.offsets.len() {
            let offset = self.offsets[seed_no];
            let Some(key) = pack_seed(&bases[offset..offset + s]) else {
                self.stats.seeds_with_n += 1;
                continue;
            };
            let hits = self.index.lookup_key(key);
            if hits.count() > self.params.max_hits {
                self.set.seeds_over_max_hits += 1;
                self.stats.seeds_over_max_hits += 1;
                continue;
            }
            self.set.seeds_looked_up += 1;
            self.stats.seeds_looked_up += 1;
            if self.set.disjoint_seeds.iter().all(|&o| o + s <= offset || offset + s <= o) {
                self.set.disjoint_seeds.push(offset);
            }

            let rc_shift = (r - s - offset) as i64;
            for &pos in hits.forward {
                let anchor = (pos as i64 - offset as i64).max(0) as u64;
                self.set.add_vote(anchor, Direction::Forward, bucket_size, seed_no as u32);
            }
            for &pos in hits.reverse {
                let anchor = (pos as i64 - rc_shift).max(0) as u64;
                self.set.add_vote(anchor, Direction::ReverseComplement, bucket_size, seed_no as u32);
            }

            if let Some(idx) = self.set.best_unscored() {
                self.score(idx, bases, d_max);
            }

            let d_best = self.set.d_best();
            if d_best < c && self.set.d_second < d_best + c {
                self.stats.multiple_hit_exits += 1;
                self.set.exit = Some(LoopExit::MultipleHits);
                return AlignmentResult::MultipleHits { best: self.best_hit() };
            }
            if d_best != UNBOUNDED && self.set.disjoint_seeds.len() as u64 >= d_best as u64 + c as u64 {
                self.stats.pruning_exits += 1;
                let mut rest: Vec<usize> = (0..self.set.candidates.len())
                    .filter(|&i| !self.set.candidates[i].scored)
                    .collect();
                rest.sort_by_key(|&i| {
                    let c = &self.set.candidates[i];
                    (std::cmp::Reverse(c.seeds_hitting), c.anchor, c.direction)
                });
                for idx in rest {
                    self.score(idx, bases, d_max);
                }
                exit = LoopExit::Pruned;
                break;
            }
        }
        self.set.exit = Some(exit);

        let d_best = self.set.d_best();
        let d_second = self.set.d_second;
        match classify_confidence(d_best, d_second, d_max, c) {
            ResultKind::SingleHit => {
                let best = self.best_hit().expect("single hit has a best location");
                AlignmentResult::SingleHit {
                    position: best.position,
                    direction: best.direction,
                    distance: best.distance,
                    gap: (d_second != UNBOUNDED).then(|| d_second - d_best),
                }
            }
            ResultKind::MultipleHits => AlignmentResult::MultipleHits { best: self.best_hit() },
            ResultKind::NotFound if self.set.seeds_looked_up == 0 && self.set.seeds_over_max_hits > 0 => {
                AlignmentResult::MultipleHits { best: None }
            }
            ResultKind::NotFound => AlignmentResult::NotFound,
        }
    }

    fn best_hit(&self) -> Option<Hit> {
        self.set.best.map(|i| {
            let c = &self.set.candidates[i];
            Hit { position: c.anchor, direction: c.direction, distance: c.score }
        })
    }

    /// Distance limit for the next call given the current best and second best.
    fn d_limit(&self, d_max: u32) -> Option<u32> {
        let c = self.params.confidence;
        let widest = d_max + c - 1;
        if !self.params.shrink_d_limit {
            return Some(widest);
        }
        let d_best = self.set.d_best();
        if d_best > d_max {
            Some(widest)
        } else if self.set.d_second >= d_best + c {
            Some(d_best + c - 1)
        } else {
            d_best.checked_sub(1)
        }
    }

    fn score(&mut self, idx: usize, bases: &[u8], d_max: u32) {
        let Some(limit) = self.d_limit(d_max) else {
            return;
        };
        let cand = self.set.candidates[idx];
        let read = match cand.direction {
            Direction::Forward => bases,
            Direction::ReverseComplement => &self.rc_read[..],
        };
        let window_len = read.len() + limit as usize + self.params.bucket_size as usize;
        let window = self.genome.window(cand.anchor, window_len);
        let outcome = self.kernel.compute_unchecked(read, window, limit);

        self.stats.distance_calls += 1;
        if self.set.first_scored.is_some() {
            self.stats.later_distance_calls += 1;
            if outcome == DistanceOutcome::ExceedsLimit {
                self.stats.later_early_returns += 1;
            }
        } else {
            self.set.first_scored = Some(idx);
        }

        let c = &mut self.set.candidates[idx];
        c.scored = true;
        c.score = outcome.distance().unwrap_or(UNBOUNDED);
        self.set.record_score(idx, self.params.bucket_size);
    }
}

/// One-shot alignment with fresh scratch.
pub fn align_read(
    bases: &[u8],
    index: &SeedIndex,
    genome: &PackedGenome,
    params: &AlignerParams,
) -> Result<AlignmentResult> {
    Ok(Aligner::new(index, genome, params.clone())?.align(bases))
}
