//! Strictly increasing integer points inside a per-coordinate box.

use rand::Rng;

use crate::error::{Error, Result};

/// Box `lo_i <= n_i <= hi_i` restricted to `n_1 < ... < n_L`.
#[derive(Clone, Debug)]
pub struct SearchBox {
    ranges: Vec<(u32, u32)>,
    /// `completions[i][v - lo_i]`: increasing completions of `n_{i+1..}` after `n_i = v`.
    completions: Vec<Vec<u128>>,
}

impl SearchBox {
    pub fn new(ranges: &[(u32, u32)], l: usize) -> Result<Self> {
        if ranges.len() != l {
            return Err(Error::InvalidProblem(format!(
                "search box has {} ranges for L = {l}",
                ranges.len()
            )));
        }
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidProblem(format!(
                    "range {} for n_{} is empty or contains zero",
                    format_range(lo, hi),
                    i + 1
                )));
            }
        }
        let mut completions: Vec<Vec<u128>> = vec![Vec::new(); l];
        completions[l - 1] = vec![1; (ranges[l - 1].1 - ranges[l - 1].0 + 1) as usize];
        for i in (0..l - 1).rev() {
            let (lo, hi) = ranges[i];
            let (nlo, nhi) = ranges[i + 1];
            let next = &completions[i + 1];
            // suffix sums of the next coordinate's counts
            let mut suffix = vec![0u128; next.len() + 1];
            for j in (0..next.len()).rev() {
                suffix[j] = suffix[j + 1].saturating_add(next[j]);
            }
            completions[i] = (lo..=hi)
                .map(|v| {
                    let start = (v + 1).max(nlo);
                    if start > nhi {
                        0
                    } else {
                        suffix[(start - nlo) as usize]
                    }
                })
                .collect();
        }
        let b = Self {
            ranges: ranges.to_vec(),
            completions,
        };
        if b.volume() == 0 {
            return Err(Error::InvalidProblem(
                "search box contains no strictly increasing schedule".into(),
            ));
        }
        Ok(b)
    }

    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    pub fn dims(&self) -> usize {
        self.ranges.len()
    }

    /// Number of strictly increasing points in the box (saturating).
    pub fn volume(&self) -> u128 {
        self.completions[0].iter().fold(0u128, |a, &c| a.saturating_add(c))
    }

    pub fn contains(&self, times: &[u32]) -> bool {
        times.len() == self.ranges.len()
            && times.windows(2).all(|w| w[0] < w[1])
            && times.iter().zip(&self.ranges).all(|(t, r)| (r.0..=r.1).contains(t))
    }

    /// Every point, in lexicographic order.
    pub fn enumerate(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(self.volume().min(1 << 24) as usize);
        let mut cur = Vec::with_capacity(self.dims());
        self.walk(0, &mut cur, &mut out);
        out
    }

    fn walk(&self, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == self.dims() {
            out.push(cur.clone());
            return;
        }
        let (lo, hi) = self.ranges[i];
        let start = cur.last().map_or(lo, |&p| lo.max(p + 1));
        for v in start..=hi {
            if self.completions[i][(v - lo) as usize] == 0 {
                break;
            }
            cur.push(v);
            self.walk(i + 1, cur, out);
            cur.pop();
        }
    }

    /// A point drawn uniformly from the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.dims());
        let mut prev: Option<u32> = None;
        for (i, &(lo, hi)) in self.ranges.iter().enumerate() {
            let start = prev.map_or(lo, |p| lo.max(p + 1));
            let weights = &self.completions[i][(start - lo) as usize..=(hi - lo) as usize];
            let total: u128 = weights.iter().fold(0u128, |a, &c| a.saturating_add(c));
            let mut r = rng.random_range(0..total);
            let mut pick = start;
            for (off, &w) in weights.iter().enumerate() {
                if r < w {
                    pick = start + off as u32;
                    break;
                }
                r -= w;
            }
            out.push(pick);
            prev = Some(pick);
        }
        out
    }

    /// Nearest box point to a real-valued guess: round, clip, then restore
    /// strict ordering while staying inside the box.
    pub fn project(&self, guess: &[f64]) -> Vec<u32> {
        let l = self.dims();
        let mut out: Vec<u32> = guess
            .iter()
            .zip(&self.ranges)
            .map(|(g, &(lo, hi))| g.round().clamp(f64::from(lo), f64::from(hi)) as u32)
            .collect();
        for i in 1..l {
            if out[i] <= out[i - 1] {
                out[i] = out[i - 1] + 1;
            }
        }
        // push down from the top if the forward pass overflowed a range
        for i in (0..l).rev() {
            if out[i] > self.ranges[i].1 {
                out[i] = self.ranges[i].1;
            }
            if i + 1 < l && out[i] >= out[i + 1] {
                out[i] = out[i + 1] - 1;
            }
        }
        for i in 0..l {
            if out[i] < self.ranges[i].0 || (i > 0 && out[i] <= out[i - 1]) {
                // Projection failed; fall back to the smallest point.
                return self.first();
            }
        }
        out
    }

    /// Lexicographically smallest point.
    pub fn first(&self) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::with_capacity(self.dims());
        for (i, &(lo, _)) in self.ranges.iter().enumerate() {
            let start = out.last().map_or(lo, |&p| lo.max(p + 1));
            let v = (start..).find(|&v| self.completions[i][(v - lo) as usize] > 0).unwrap();
            out.push(v);
        }
        out
    }
}

fn format_range(lo: u32, hi: u32) -> String {
    format!("[{lo}, {hi}]")
}
