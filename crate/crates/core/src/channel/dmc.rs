use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logprob::LogProb;
use crate::error::{domain, Error, Result};

/// Binary symmetric channel with crossover probability `p` in `(0, 0.5]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BscRaw")]
pub struct Bsc {
    p: f64,
}

#[derive(Deserialize)]
struct BscRaw {
    p: f64,
}

impl TryFrom<BscRaw> for Bsc {
    type Error = Error;
    fn try_from(raw: BscRaw) -> Result<Self> {
        Bsc::new(raw.p)
    }
}

impl Bsc {
    /// Accept and reject control symbols used on the BSC. Both orderings
    /// have the same divergence; `1` confirms and `0` rejects.
    pub const CONTROL_SYMBOLS: (usize, usize) = (1, 0);

    pub fn new(p: f64) -> Result<Self> {
        check_crossover(p)?;
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn to_dmc(&self) -> Dmc {
        let q = 1.0 - self.p;
        Dmc {
            rows: vec![vec![q, self.p], vec![self.p, q]],
        }
    }
}

/// Validates a BSC crossover probability.
pub fn check_crossover(p: f64) -> Result<()> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(domain("crossover probability", p, "(0, 0.5]"))
    }
}

/// A discrete memoryless channel given by its row-stochastic transition matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DmcFile", into = "DmcFile")]
pub struct Dmc {
    rows: Vec<Vec<f64>>,
}

/// On-disk layout: `{"inputs": n, "outputs": m, "rows": [[...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DmcFile {
    pub inputs: usize,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<DmcFile> for Dmc {
    type Error = Error;
    fn try_from(file: DmcFile) -> Result<Self> {
        if file.rows.len() != file.inputs {
            return Err(Error::InvalidChannel(format!(
                "declared {} inputs but found {} rows",
                file.inputs,
                file.rows.len()
            )));
        }
        if let Some((i, row)) = file
            .rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != file.outputs)
        {
            return Err(Error::InvalidChannel(format!(
                "row {i} has {} entries, expected {}",
                row.len(),
                file.outputs
            )));
        }
        Dmc::new(file.rows)
    }
}

impl From<Dmc> for DmcFile {
    fn from(d: Dmc) -> Self {
        DmcFile {
            inputs: d.inputs(),
            outputs: d.outputs(),
            rows: d.rows,
        }
    }
}

const ROW_SUM_TOLERANCE: f64 = 1e-12;

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || outputs == 0 {
            return Err(Error::InvalidChannel("empty transition matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::InvalidChannel(format!(
                    "row {i} has {} entries, expected {outputs}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidChannel(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidChannel(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidChannel(e.to_string()))
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    #[inline]
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    /// `D(P_{Y|X=a} || P_{Y|X=b})` in nats; `+inf` when `b`'s row misses support of `a`'s.
    pub fn divergence(&self, a: usize, b: usize) -> f64 {
        self.rows[a]
            .iter()
            .zip(&self.rows[b])
            .map(|(&pa, &pb)| match (pa > 0.0, pb > 0.0) {
                (false, _) => 0.0,
                (true, false) => f64::INFINITY,
                (true, true) => pa * (pa / pb).ln(),
            })
            .sum()
    }
}

/// The ordered pair `(x_A, x_R)` maximizing `D(P_{Y|X=x_A} || P_{Y|X=x_R})`.
/// Ties (within a relative `1e-12`) go to the lexicographically smallest pair.
pub fn select_control_symbols(dmc: &Dmc) -> Result<(usize, usize)> {
    let n = dmc.inputs();
    if n < 2 {
        return Err(Error::InvalidChannel(format!(
            "need at least two inputs to pick control symbols, got {n}"
        )));
    }
    let mut best = (0, 1);
    let mut best_div = dmc.divergence(0, 1);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let d = dmc.divergence(a, b);
            let better = if best_div.is_infinite() {
                false
            } else if d.is_infinite() {
                true
            } else {
                d > best_div + 1e-12 * best_div.abs().max(1e-300)
            };
            if better {
                best = (a, b);
                best_div = d;
            }
        }
    }
    Ok(best)
}

/// `ln P_{Y^n|X^n}(y|x)` of a memoryless channel.
pub fn sequence_log_likelihood(dmc: &Dmc, x_seq: &[usize], y_seq: &[usize]) -> Result<LogProb> {
    if x_seq.len() != y_seq.len() {
        return Err(Error::LengthMismatch {
            left: x_seq.len(),
            right: y_seq.len(),
        });
    }
    let mut total = 0.0;
    for (position, (&x, &y)) in x_seq.iter().zip(y_seq).enumerate() {
        if x >= dmc.inputs() {
            return Err(Error::SymbolOutOfRange {
                position,
                symbol: x,
                alphabet: dmc.inputs(),
            });
        }
        if y >= dmc.outputs() {
            return Err(Error::SymbolOutOfRange {
                position,
                symbol: y,
                alphabet: dmc.outputs(),
            });
        }
        total += dmc.transition(x, y).ln();
    }
    Ok(LogProb::saturating(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_input() -> Dmc {
        Dmc::new(vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap()
    }

    #[test]
    fn bsc_domain() {
        assert!(Bsc::new(0.11).is_ok());
        assert!(Bsc::new(0.5).is_ok());
        assert!(Bsc::new(0.0).is_err());
        assert!(Bsc::new(0.6).is_err());
        assert!(serde_json::from_str::<Bsc>(r#"{"p": 0.7}"#).is_err());
    }

    #[test]
    fn dmc_validation() {
        assert!(Dmc::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(Dmc::new(vec![vec![1.2, -0.2]]).is_err());
        assert!(Dmc::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(Dmc::new(vec![]).is_err());
        assert!(Dmc::new(vec![vec![1.0 - 1e-13, 1e-13]]).is_ok());
    }

    #[test]
    fn dmc_json_schema() {
        let d: Dmc =
            serde_json::from_str(r#"{"inputs": 2, "outputs": 2, "rows": [[0.89, 0.11], [0.11, 0.89]]}"#)
                .unwrap();
        assert_eq!(d, Bsc::new(0.11).unwrap().to_dmc());
        let back = serde_json::to_value(&d).unwrap();
        assert_eq!(back["inputs"], 2);
        assert_eq!(back["outputs"], 2);
        let bad = r#"{"inputs": 3, "outputs": 2, "rows": [[0.89, 0.11], [0.11, 0.89]]}"#;
        assert!(serde_json::from_str::<Dmc>(bad).is_err());
    }

    #[test]
    fn bsc_control_symbols() {
        let d = Bsc::new(0.11).unwrap().to_dmc();
        // Symmetric: both orderings tie and the tie-break picks (0, 1).
        assert_eq!(d.divergence(0, 1), d.divergence(1, 0));
        assert_eq!(select_control_symbols(&d).unwrap(), (0, 1));
        let (a, r) = Bsc::CONTROL_SYMBOLS;
        assert_eq!(d.divergence(a, r), d.divergence(0, 1));
    }

    #[test]
    fn three_input_brute_force() {
        let d = three_input();
        let mut pairs = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    let (p, q) = (&d.rows()[a], &d.rows()[b]);
                    let kl: f64 = (0..2).map(|y| p[y] * (p[y] / q[y]).ln()).sum();
                    pairs.push((kl, a, b));
                }
            }
        }
        let max = pairs.iter().map(|t| t.0).fold(f64::MIN, f64::max);
        let winners: Vec<_> = pairs.iter().filter(|t| (t.0 - max).abs() < 1e-12).collect();
        assert_eq!(winners.len(), 2);
        assert_eq!(select_control_symbols(&d).unwrap(), (winners[0].1, winners[0].2));
        assert_eq!(select_control_symbols(&d).unwrap(), (0, 2));
    }

    #[test]
    fn infinite_divergence_wins() {
        let d = Dmc::new(vec![vec![0.5, 0.5], vec![1.0, 0.0], vec![0.4, 0.6]]).unwrap();
        assert_eq!(select_control_symbols(&d).unwrap(), (0, 1));
    }

    #[test]
    fn single_input_rejected() {
        let d = Dmc::new(vec![vec![0.3, 0.7]]).unwrap();
        assert!(select_control_symbols(&d).is_err());
    }

    #[test]
    fn likelihood_anchors() {
        let d = Bsc::new(0.11).unwrap().to_dmc();
        assert_eq!(sequence_log_likelihood(&d, &[], &[]).unwrap().ln(), 0.0);
        let l = sequence_log_likelihood(&d, &[0, 0], &[0, 1]).unwrap();
        assert!((l.ln() - (0.89f64 * 0.11).ln()).abs() < 1e-15);
        let z = Dmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(sequence_log_likelihood(&z, &[0], &[1]).unwrap().is_zero());
        assert!(matches!(
            sequence_log_likelihood(&d, &[0], &[0, 1]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            sequence_log_likelihood(&d, &[2], &[0]),
            Err(Error::SymbolOutOfRange { position: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn likelihood_is_permutation_invariant(
            pairs in proptest::collection::vec((0usize..3, 0usize..2), 0..20),
            rot in 0usize..20,
        ) {
            let d = three_input();
            let (x, y): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let mut perm = pairs.clone();
            perm.reverse();
            if !perm.is_empty() {
                let r = rot % perm.len();
                perm.rotate_left(r);
            }
            let (px, py): (Vec<_>, Vec<_>) = perm.into_iter().unzip();
            let a = sequence_log_likelihood(&d, &x, &y).unwrap().ln();
            let b = sequence_log_likelihood(&d, &px, &py).unwrap().ln();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn bsc_control_pair_is_distinct(p in 0.001f64..0.499) {
            let (a, r) = select_control_symbols(&Bsc::new(p).unwrap().to_dmc()).unwrap();
            prop_assert_ne!(a, r);
        }
    }
}
