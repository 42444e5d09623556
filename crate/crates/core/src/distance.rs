//! Threshold-bounded edit distance between a read and a reference window.
//!
//! The distance is semi-global: the whole read must be consumed, the window is
//! anchored at its first base and its end is free. Costs are unit Levenshtein
//! costs and `N` on either side never matches.
//!
//! [`BoundedDistance`] uses the diagonal furthest-reaching formulation: for
//! each error count `e` it keeps, per diagonal `k = ref_index - read_index`,
//! the furthest read row reachable with `e` errors, then slides along matches.
//! Only diagonals in `[-e, e]` exist at level `e`, so a call with limit `L`
//! does `O(n * (min(d, L) + 1))` work and `O(L)` space, and stops as soon as a
//! level reaches the last read row.
//!
//! A window shorter than the read plus the limit (the genome ended) is not an
//! error: the missing bases behave as mismatches, which in the semi-global
//! setting costs the same as inserting the remaining read bases.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceOutcome {
    Distance(u32),
    ExceedsLimit,
}

impl DistanceOutcome {
    pub fn distance(self) -> Option<u32> {
        match self {
            DistanceOutcome::Distance(d) => Some(d),
            DistanceOutcome::ExceedsLimit => None,
        }
    }
}

const UNREACHED: i32 = i32::MIN / 2;

#[inline(always)]
fn same(a: u8, b: u8) -> bool {
    a == b && a != b'N'
}

/// Reusable scratch for the banded kernel. Keep one per worker.
#[derive(Clone, Debug, Default)]
pub struct BoundedDistance {
    prev: Vec<i32>,
    cur: Vec<i32>,
    /// Diagonal cells updated plus base comparisons made, summed over calls.
    pub cells: u64,
}

impl BoundedDistance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Semi-global distance of `read` against `window` if it is at most
    /// `d_limit`, else [`DistanceOutcome::ExceedsLimit`].
    pub fn compute(&mut self, read: &[u8], window: &[u8], d_limit: i64) -> Result<DistanceOutcome> {
        if d_limit < 0 {
            return Err(Error::invalid(format!("negative distance limit {d_limit}")));
        }
        Ok(self.compute_unchecked(read, window, d_limit.min(u32::MAX as i64) as u32))
    }

    pub(crate) fn compute_unchecked(&mut self, read: &[u8], window: &[u8], d_limit: u32) -> DistanceOutcome {
        let n = read.len() as i32;
        let m = window.len() as i32;
        // Inserting every read base always works, so no distance exceeds n.
        let limit = (d_limit as i64).min(n as i64) as i32;

        let width = (2 * limit + 3) as usize;
        let off = limit + 1; // diagonal k lives at index k + off
        self.prev.clear();
        self.prev.resize(width, UNREACHED);
        self.cur.clear();
        self.cur.resize(width, UNREACHED);

        let mut cells = 0u64;
        let mut i = 0i32;
        while i < n && i < m && same(read[i as usize], window[i as usize]) {
            i += 1;
        }
        cells += i as u64 + 1;
        if i == n {
            self.cells += cells;
            return DistanceOutcome::Distance(0);
        }
        self.prev[off as usize] = i;

        for e in 1..=limit {
            let lo = (-e).max(-n);
            let hi = e.min(m);
            for k in lo..=hi {
                let idx = (k + off) as usize;
                let mut best = UNREACHED;

                // substitution along k
                let r = self.prev[idx];
                if r >= 0 && r < n && r + k < m {
                    best = best.max(r + 1);
                }
                // read base inserted: from diagonal k + 1, row advances
                let r = self.prev[idx + 1];
                if r >= 0 && r < n {
                    best = best.max(r + 1);
                }
                // reference base deleted: from diagonal k - 1, row stays
                let r = self.prev[idx - 1];
                if r >= 0 && r + k <= m {
                    best = best.max(r);
                }
                // Diagonal entry points at the matrix border.
                if best == UNREACHED {
                    if k == -e {
                        best = e;
                    } else if k == e && e <= m {
                        best = 0;
                    }
                }
                if best >= 0 {
                    let mut row = best;
                    while row < n && row + k < m && same(read[row as usize], window[(row + k) as usize]) {
                        row += 1;
                    }
                    cells += (row - best) as u64 + 1;
                    if row == n {
                        self.cells += cells;
                        return DistanceOutcome::Distance(e as u32);
                    }
                    best = row;
                } else {
                    cells += 1;
                }
                self.cur[idx] = best;
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
            for v in self.cur.iter_mut() {
                *v = UNREACHED;
            }
        }
        self.cells += cells;
        DistanceOutcome::ExceedsLimit
    }
}

/// One-shot convenience wrapper around [`BoundedDistance::compute`].
pub fn bounded_distance(read: &[u8], window: &[u8], d_limit: i64) -> Result<DistanceOutcome> {
    BoundedDistance::new().compute(read, window, d_limit)
}

/// Semi-global distance by the full quadratic table. Test oracle.
pub fn full_dp_distance(read: &[u8], window: &[u8]) -> u32 {
    let m = window.len();
    // row[j] = distance of the read prefix against window[..j]
    let mut row: Vec<u32> = (0..=m as u32).collect();
    for (i, &a) in read.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i as u32 + 1;
        for j in 1..=m {
            let cost = u32::from(!same(a, window[j - 1]));
            let next = (diag + cost).min(row[j] + 1).min(row[j - 1] + 1);
            diag = row[j];
            row[j] = next;
        }
    }
    *row.iter().min().unwrap()
}
