//! Cubic radial-basis interpolant with a linear tail.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Rbf {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Constant term followed by one slope per coordinate.
    tail: Vec<f64>,
}

impl Rbf {
    /// Interpolates `values` at `points`; `None` if the system is singular.
    pub fn fit(points: &[Vec<f64>], values: &[f64]) -> Option<Rbf> {
        let n = points.len();
        let d = points.first()?.len();
        if n < d + 1 {
            return None;
        }
        let size = n + d + 1;
        let mut a = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = phi(dist(&points[i], &points[j]));
            }
            a[(i, i)] += 1e-10;
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            for c in 0..d {
                a[(i, n + 1 + c)] = points[i][c];
                a[(n + 1 + c, i)] = points[i][c];
            }
        }
        let mut b = DVector::<f64>::zeros(size);
        for (i, v) in values.iter().enumerate() {
            b[i] = *v;
        }
        let sol = a.lu().solve(&b)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Rbf {
            centers: points.to_vec(),
            weights: sol.rows(0, n).iter().copied().collect(),
            tail: sol.rows(n, d + 1).iter().copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * phi(dist(c, x)))
            .sum();
        let linear: f64 = self.tail[1..].iter().zip(x).map(|(s, v)| s * v).sum();
        radial + self.tail[0] + linear
    }
}

fn phi(r: f64) -> f64 {
    r * r * r
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
