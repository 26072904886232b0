//! Finite integer lattices in `R^k × {0}`, their interaction matrices and
//! admissibility sums.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::Compensated;

/// How the points `P̃_j` are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Selection {
    /// All of `{-R, ..., R}^k`.
    FullBox { radius: u32 },
    /// An explicit list of integer points.
    Explicit { points: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    k: u32,
    dim: u32,
    scale: f64,
    points: Vec<Vec<i64>>,
    box_radius: Option<u32>,
}

impl Lattice {
    /// Builds the point set `P̃_j` and checks `1 <= k < (N-2m)/2`.
    pub fn generate(k: u32, selection: &Selection, n: u32, m: u32, scale: f64) -> Result<Self> {
        if k < 1 || 2 * k + 2 * m >= n {
            return Err(Error::InvalidConfig(format!(
                "lattice dimension condition 1 <= k < (N-2m)/2 violated: k = {k}, N = {n}, m = {m}"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lattice scale L must be positive, got {scale}"
            )));
        }
        let (mut points, box_radius) = match selection {
            Selection::FullBox { radius } => {
                if *radius < 1 {
                    return Err(Error::InvalidConfig("box radius must be at least 1".into()));
                }
                (full_box(k, *radius as i64), Some(*radius))
            }
            Selection::Explicit { points } => {
                if let Some(p) = points.iter().find(|p| p.len() != k as usize) {
                    return Err(Error::InvalidConfig(format!(
                        "point {p:?} does not have k = {k} coordinates"
                    )));
                }
                (points.clone(), None)
            }
        };
        points.sort();
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint(w[0].clone()));
        }
        if points.is_empty() {
            return Err(Error::InvalidConfig("lattice has no points".into()));
        }
        Ok(Self {
            k,
            dim: n,
            scale,
            points,
            box_radius,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn box_radius(&self) -> Option<u32> {
        self.box_radius
    }

    /// Same points at a different scale `L`.
    pub fn with_scale(&self, scale: f64) -> Self {
        Self {
            scale,
            ..self.clone()
        }
    }

    /// `P_j = L P̃_j` embedded in `R^N`.
    pub fn embedded(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for (o, &z) in out.iter_mut().zip(&self.points[j]) {
            *o = self.scale * z as f64;
        }
        out
    }

    /// Index of the point `-P̃_j`, if present.
    pub fn mirror_index(&self, j: usize) -> Option<usize> {
        let neg: Vec<i64> = self.points[j].iter().map(|z| -z).collect();
        self.points.binary_search(&neg).ok()
    }

    fn unscaled_distance(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `Σ_{i≠j} |P̃_i - P̃_j|^{-s}` for every `j`, compensated per row.
    pub fn power_sums(&self, s: f64) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|j| {
                let mut acc = Compensated::new();
                for i in 0..self.len() {
                    if i != j {
                        acc.add(self.unscaled_distance(i, j).powf(-s));
                    }
                }
                acc.value()
            })
            .collect()
    }
}

fn full_box(k: u32, r: i64) -> Vec<Vec<i64>> {
    let side = (2 * r + 1) as usize;
    let total = side.pow(k);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0i64; k as usize];
            for c in p.iter_mut().rev() {
                *c = (idx % side) as i64 - r;
                idx /= side;
            }
            p
        })
        .collect()
}

/// `max_j S_j / min_j S_j` with `S_j = Σ_{i≠j} |P̃_i - P̃_j|^{-τ}`.
pub fn admissibility_ratio(lat: &Lattice, tau: f64) -> Result<f64> {
    if lat.len() < 2 {
        return Err(Error::Precondition(
            "admissibility ratio needs at least two points".into(),
        ));
    }
    if !(tau > lat.k() as f64) {
        return Err(Error::Precondition(format!(
            "admissibility exponent must exceed k: tau = {tau}, k = {}",
            lat.k()
        )));
    }
    let sums = lat.power_sums(tau);
    let max = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max / min)
}

/// `d_ij = |P̃_i - P̃_j|^{-(N-2m)}` with its row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    d: DMatrix<f64>,
    row_sums: Vec<f64>,
}

impl InteractionMatrix {
    /// Wraps an explicit matrix after checking symmetry, zero diagonal and
    /// positive off-diagonal entries.
    pub fn from_matrix(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::Precondition("interaction matrix must be square".into()));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::Precondition(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if d[(i, j)] != d[(j, i)] {
                    return Err(Error::Precondition(format!("asymmetric entry ({i}, {j})")));
                }
                if !(d[(i, j)] > 0.0) || !d[(i, j)].is_finite() {
                    return Err(Error::Precondition(format!(
                        "off-diagonal entry ({i}, {j}) = {} must be positive",
                        d[(i, j)]
                    )));
                }
            }
        }
        let row_sums = (0..n)
            .map(|i| d.row(i).iter().copied().collect::<Compensated>().value())
            .collect();
        Ok(Self { d, row_sums })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.nrows() == 0
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// `(c_0, c_1)`: smallest and largest row sums.
    pub fn row_sum_bounds(&self) -> (f64, f64) {
        let min = self.row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.row_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            d: &self.d * t,
            row_sums: self.row_sums.iter().map(|r| r * t).collect(),
        }
    }
}

pub fn interaction_matrix(lat: &Lattice, n: u32, m: u32) -> Result<InteractionMatrix> {
    if n <= 2 * m {
        return Err(Error::Precondition(format!("need N > 2m, got N = {n}, m = {m}")));
    }
    let s = (n - 2 * m) as i32;
    let len = lat.len();
    let rows: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|i| {
            (0..len)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let r2: i64 = lat.points[i]
                            .iter()
                            .zip(&lat.points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        inv_pow_sqrt(r2, s)
                    }
                })
                .collect()
        })
        .collect();
    let d = DMatrix::from_fn(len, len, |i, j| rows[i][j]);
    let row_sums = rows
        .iter()
        .map(|r| r.iter().copied().collect::<Compensated>().value())
        .collect();
    Ok(InteractionMatrix { d, row_sums })
}

/// `(r2)^{-s/2}` computed without a square root when `s` is even.
fn inv_pow_sqrt(r2: i64, s: i32) -> f64 {
    let r2 = r2 as f64;
    if s % 2 == 0 {
        r2.powi(-s / 2)
    } else {
        r2.powi(-(s + 1) / 2) * r2.sqrt()
    }
}

/// Upper bound for `Σ_{z ∈ Z^k, |z|_∞ > R} |z|^{-s}` by shell counting:
/// the shell `|z|_∞ = r` has `(2r+1)^k - (2r-1)^k` points, each with
/// `|z| >= r`.
pub fn shell_tail_bound(k: u32, s: f64, radius: u32) -> Result<f64> {
    if !(s > k as f64) {
        return Err(Error::Divergent(format!(
            "lattice sum of |z|^-s over Z^k diverges unless s > k (s = {s}, k = {k})"
        )));
    }
    let cut = (radius as u64 + 1).max(1);
    let stop = cut + 100_000;
    let mut acc = Compensated::new();
    for r in cut..stop {
        let rf = r as f64;
        let shell = (2.0 * rf + 1.0).powi(k as i32) - (2.0 * rf - 1.0).powi(k as i32);
        acc.add(shell * rf.powf(-s));
    }
    // shell(r) <= 2k (2r+1)^{k-1} <= 2k 3^{k-1} r^{k-1} for r >= 1
    let kf = k as f64;
    let rest = 2.0 * kf * 3f64.powi(k as i32 - 1) * (stop as f64 - 1.0).powf(kf - s) / (s - kf);
    acc.add(rest);
    Ok(acc.value())
}

/// Per-point bound on the part of the row sum `Σ_i |P̃_i - P̃_j|^{-s}`
/// missing from a full box of radius `R`.
pub fn box_truncation_bounds(lat: &Lattice, s: f64) -> Result<Vec<f64>> {
    let radius = lat.box_radius().ok_or_else(|| {
        Error::Precondition("truncation bounds need a full-box lattice".into())
    })?;
    lat.points()
        .iter()
        .map(|p| {
            let inf = p.iter().map(|z| z.abs()).max().unwrap_or(0) as u32;
            shell_tail_bound(lat.k(), s, radius - inf)
        })
        .collect()
}
