//! The reduced height system `a_j^κ = B (d a)_j`, its energy, the height
//! law `μ ~ L^{(N-2m)/(β-N+2m)}` and the leading-order center correction.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::lattice::{InteractionMatrix, Lattice};
use crate::quadrature::ConstantsTable;

#[derive(Debug, Clone, PartialEq)]
pub struct HeightSystem {
    d: InteractionMatrix,
    kappa: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for the relative residual `max_j |a_j^κ - B(da)_j| / max_j a_j^κ`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Under-relaxation of the fixed-point map.
    pub relaxation: f64,
    /// Relative residual below which Newton takes over.
    pub newton_switch: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 20_000,
            relaxation: 0.7,
            newton_switch: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSolution {
    pub a: Vec<f64>,
    /// `max_j |a_j^κ - B (d a)_j|`.
    pub residual: f64,
    pub relative_residual: f64,
    pub fixed_point_iterations: usize,
    pub newton_steps: usize,
}

impl HeightSolution {
    pub fn min_a(&self) -> f64 {
        self.a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_a(&self) -> f64 {
        self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl HeightSystem {
    pub fn new(d: InteractionMatrix, kappa: f64, b: f64) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::Precondition(format!(
                "height system needs n >= 2 bubbles, got {}",
                d.len()
            )));
        }
        if !(kappa > 1.0) {
            return Err(Error::Precondition(format!("height exponent kappa = {kappa} must exceed 1")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Precondition(format!("coupling B = {b} must be positive")));
        }
        let (c0, _) = d.row_sum_bounds();
        if !(c0 > 0.0) {
            return Err(Error::Collapse);
        }
        Ok(Self { d, kappa, b })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn interaction(&self) -> &InteractionMatrix {
        &self.d
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(self.d.clone(), self.kappa, b)
    }

    fn coupling(&self, a: &[f64]) -> DVector<f64> {
        self.d.matrix() * DVector::from_column_slice(a) * self.b
    }

    /// `a_j <- (B (d a)_j)^{1/κ}`.
    pub fn map(&self, a: &[f64]) -> Vec<f64> {
        self.coupling(a).iter().map(|v| v.powf(1.0 / self.kappa)).collect()
    }

    /// `(max_j |a_j^κ - B(da)_j|, relative version)`.
    pub fn residual(&self, a: &[f64]) -> (f64, f64) {
        let c = self.coupling(a);
        let mut abs: f64 = 0.0;
        let mut top: f64 = 0.0;
        for (aj, cj) in a.iter().zip(c.iter()) {
            let p = aj.powf(self.kappa);
            abs = abs.max((p - cj).abs());
            top = top.max(p.abs()).max(cj.abs());
        }
        (abs, if top > 0.0 { abs / top } else { f64::INFINITY })
    }

    /// `A = diag(κ a^{κ-1}) - B d`, the Jacobian of `a^κ - B d a`.
    pub fn jacobian(&self, a: &[f64]) -> DMatrix<f64> {
        let mut j = self.d.matrix() * (-self.b);
        for (i, ai) in a.iter().enumerate() {
            j[(i, i)] += self.kappa * ai.powf(self.kappa - 1.0);
        }
        j
    }

    /// `F(x) = Σ |x_j|^{κ+1}/(κ+1) - (B/2) xᵀ d x` and its gradient.
    pub fn energy(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let dx = self.d.matrix() * DVector::from_column_slice(x);
        let k = self.kappa;
        let mut f = 0.0;
        let mut grad = Vec::with_capacity(x.len());
        for (xj, dj) in x.iter().zip(dx.iter()) {
            f += xj.abs().powf(k + 1.0) / (k + 1.0) - 0.5 * self.b * xj * dj;
            grad.push(xj.abs().powf(k - 1.0) * xj - self.b * dj);
        }
        (f, grad)
    }

    /// The a-priori bounds `(min a)^{κ-1} >= B c_0` and
    /// `(max a)^{κ-1} <= B c_1`, with a relative slack `eps`.
    pub fn bounds_hold(&self, a: &[f64], eps: f64) -> bool {
        let (c0, c1) = self.d.row_sum_bounds();
        let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        min.powf(self.kappa - 1.0) >= self.b * c0 * (1.0 - eps)
            && max.powf(self.kappa - 1.0) <= self.b * c1 * (1.0 + eps)
    }

    /// Start from the row-sum guess `a_j = (B rowsum_j)^{1/(κ-1)}`.
    pub fn default_start(&self) -> Vec<f64> {
        self.d
            .row_sums()
            .iter()
            .map(|r| (self.b * r).powf(1.0 / (self.kappa - 1.0)))
            .collect()
    }
}

pub fn solve_heights(sys: &HeightSystem, opts: &SolverOptions) -> Result<HeightSolution> {
    solve_heights_from(sys, &sys.default_start(), opts)
}

/// Damped fixed point followed by Newton with positivity-preserving
/// backtracking.
pub fn solve_heights_from(
    sys: &HeightSystem,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<HeightSolution> {
    if start.len() != sys.len() || start.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Precondition("initial heights must be positive".into()));
    }
    let w = opts.relaxation;
    let mut a = start.to_vec();
    let mut fp_iters = 0;
    let mut newton = 0;
    let (mut res, mut rel) = sys.residual(&a);
    while rel > opts.newton_switch.max(opts.tol) {
        if fp_iters >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations: fp_iters,
                residual: rel,
            });
        }
        let next = sys.map(&a);
        for (ai, ni) in a.iter_mut().zip(&next) {
            *ai = (1.0 - w) * *ai + w * ni;
        }
        fp_iters += 1;
        check_alive(&a)?;
        (res, rel) = sys.residual(&a);
    }
    while rel > opts.tol {
        if newton >= 100 {
            return Err(Error::NoConvergence {
                iterations: fp_iters + newton,
                residual: rel,
            });
        }
        let f: Vec<f64> = {
            let c = sys.coupling(&a);
            a.iter().zip(c.iter()).map(|(x, c)| x.powf(sys.kappa) - c).collect()
        };
        let j = sys.jacobian(&a);
        let step = j
            .lu()
            .solve(&DVector::from_vec(f.iter().map(|x| -x).collect()))
            .ok_or_else(|| Error::Algebra("singular Jacobian in Newton step".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = a.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            if trial.iter().all(|&x| x > 0.0) {
                let (r2, rel2) = sys.residual(&trial);
                if rel2 < rel || rel2 <= opts.tol {
                    a = trial;
                    res = r2;
                    rel = rel2;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        newton += 1;
        if !accepted {
            // Newton cannot improve further; rounding floor reached.
            break;
        }
    }
    if rel > opts.tol {
        return Err(Error::NoConvergence {
            iterations: fp_iters + newton,
            residual: rel,
        });
    }
    if !sys.bounds_hold(&a, 1e-9) {
        return Err(Error::Algebra(
            "solution violates the a-priori bounds B c_0 <= a^(kappa-1) <= B c_1".into(),
        ));
    }
    Ok(HeightSolution {
        a,
        residual: res,
        relative_residual: rel,
        fixed_point_iterations: fp_iters,
        newton_steps: newton,
    })
}

fn check_alive(a: &[f64]) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("height iterate".into()));
    }
    if a.iter().cloned().fold(0.0, f64::max) < 1e-300 {
        return Err(Error::Collapse);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub restarts: usize,
    /// `max_run max_j |a_j - a_j^ref| / max_j a_j^ref`.
    pub spread: f64,
    pub max_relative_residual: f64,
    pub reference: Vec<f64>,
}

/// Solves from `restarts` random starts in `[0.1, 10]^n` and measures
/// the spread between the solutions.
pub fn uniqueness_stress(
    sys: &HeightSystem,
    restarts: usize,
    opts: &SolverOptions,
    seed: u64,
) -> Result<UniquenessReport> {
    if restarts < 10 {
        return Err(Error::Precondition(format!("need at least 10 restarts, got {restarts}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = solve_heights(sys, opts)?;
    let scale = reference.max_a();
    let mut spread: f64 = 0.0;
    let mut max_rel = reference.relative_residual;
    for _ in 0..restarts {
        let start: Vec<f64> = (0..sys.len()).map(|_| rng.random_range(0.1..10.0)).collect();
        let sol = solve_heights_from(sys, &start, opts)?;
        max_rel = max_rel.max(sol.relative_residual);
        for (x, y) in sol.a.iter().zip(&reference.a) {
            spread = spread.max((x - y).abs() / scale);
        }
    }
    Ok(UniquenessReport {
        restarts,
        spread,
        max_relative_residual: max_rel,
        reference: reference.a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedBound {
    /// Smallest `‖AX‖_∞` over sampled `‖X‖_∞ = 1`.
    pub sampled: f64,
    /// `1/‖A^{-1}‖_∞`, the exact minimum of the sampled quantity.
    pub exact_inf: f64,
    /// Smallest singular value of `A`.
    pub min_singular: f64,
}

pub fn linearized_bound(
    sys: &HeightSystem,
    sol: &HeightSolution,
    samples: usize,
    seed: u64,
) -> Result<LinearizedBound> {
    let a = sys.jacobian(&sol.a);
    let n = sys.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = f64::INFINITY;
    for _ in 0..samples {
        let mut x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = x.amax();
        if norm == 0.0 {
            continue;
        }
        x /= norm;
        sampled = sampled.min((&a * x).amax());
    }
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Algebra("linearized operator is singular".into()))?;
    let inv_norm = (0..n)
        .map(|i| inv.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let svd = a.svd(false, false);
    let min_singular = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let out = LinearizedBound {
        sampled,
        exact_inf: 1.0 / inv_norm,
        min_singular,
    };
    if !(out.min_singular > 0.0 && out.exact_inf > 0.0) {
        return Err(Error::Sign {
            name: "linearized bound",
            value: out.min_singular,
        });
    }
    Ok(out)
}

/// Random symmetric interaction matrix with positive entries, balanced so
/// that every row sum lies in `[0.5, 2]`.
pub fn random_interaction(n: usize, rng: &mut impl Rng) -> Result<InteractionMatrix> {
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = rng.random_range(0.05..1.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    // Symmetric Sinkhorn balancing towards unit row sums.
    let mut s = vec![1.0; n];
    for _ in 0..200 {
        for i in 0..n {
            let r: f64 = (0..n).map(|j| s[i] * d[(i, j)] * s[j]).sum();
            s[i] /= r.sqrt();
        }
    }
    let target: f64 = rng.random_range(0.7..1.4);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            target * s[i] * d[(i, j)] * s[j]
        }
    });
    let sym = DMatrix::from_fn(n, n, |i, j| if i < j { d[(i, j)] } else { d[(j, i)] });
    InteractionMatrix::from_matrix(sym)
}

/// Exponent `s` in `μ_j^{-(N-2m)/2} = a_j / L^s`.
pub fn height_exponent(cfg: &ProblemConfig) -> f64 {
    let gap = cfg.n as f64 - 2.0 * cfg.m as f64;
    gap * gap / (2.0 * (cfg.beta - gap))
}

/// `μ_j = (L^s / a_j)^{2/(N-2m)}`.
pub fn recover_mu(a: &[f64], cfg: &ProblemConfig, l: f64) -> Vec<f64> {
    let s = height_exponent(cfg);
    let h = cfg.half_gap();
    a.iter().map(|aj| (l.powf(s) / aj).powf(1.0 / h)).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSolution {
    pub x: Vec<Vec<f64>>,
    pub offsets: Vec<Vec<f64>>,
    /// `max_j |x_j - P_j|`.
    pub max_offset: f64,
    /// `max_j |x_j - P_j| · μ̄^2` with `μ̄ = min_j μ_j`.
    pub envelope_constant: f64,
}

/// `E_i(x) = Σ_{l≠i} A0 C̃ μ_i^{-h} μ_l^{-h} |x_i - x_l|^{2m-N}`.
pub fn interaction_energy(
    i: usize,
    xi: &[f64],
    centers: &[Vec<f64>],
    mu: &[f64],
    cfg: &ProblemConfig,
    consts: &ConstantsTable,
) -> f64 {
    let h = cfg.half_gap();
    let gap = 2.0 * h;
    let mut acc = 0.0;
    for (l, xl) in centers.iter().enumerate() {
        if l == i {
            continue;
        }
        let r: f64 = xi.iter().zip(xl).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        acc += mu[l].powf(-h) * r.powf(-gap);
    }
    consts.a0 * consts.tilde_c * mu[i].powf(-h) * acc
}

/// Central difference with one Richardson extrapolation step.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// One Newton step on the center equations about `x = P`: the
/// local-model restoring force `a_j C_1 μ_i^{2-β} (x_ij - P_ij)` balances
/// the interaction force `-∂_{x_ij} E_i`.
pub fn refine_centers(
    cfg: &ProblemConfig,
    lat: &Lattice,
    mu: &[f64],
    consts: &ConstantsTable,
) -> Result<CenterSolution> {
    let n = lat.len();
    if mu.len() != n {
        return Err(Error::Precondition("one height per lattice point required".into()));
    }
    let centers: Vec<Vec<f64>> = (0..n).map(|j| lat.embedded(j)).collect();
    let mut x = centers.clone();
    let mut offsets = vec![vec![0.0; cfg.n as usize]; n];
    let mut max_offset: f64 = 0.0;
    for i in 0..n {
        for j in 0..cfg.n as usize {
            let step = 1e-3 * lat.scale();
            let grad = richardson_derivative(
                |t| {
                    let mut xi = centers[i].clone();
                    xi[j] = t;
                    interaction_energy(i, &xi, &centers, mu, cfg, consts)
                },
                centers[i][j],
                step,
            );
            let stiffness = cfg.a[j] * consts.c1 * mu[i].powf(2.0 - cfg.beta);
            let off = -grad / stiffness;
            offsets[i][j] = off;
            x[i][j] += off;
        }
        let norm = offsets[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        max_offset = max_offset.max(norm);
    }
    let mu_bar = mu.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CenterSolution {
        x,
        offsets,
        max_offset,
        envelope_constant: max_offset * mu_bar * mu_bar,
    })
}

/// Rebuilds `d_ij = L^{N-2m} |x_i - x_j|^{-(N-2m)}` from refined centers.
pub fn interaction_from_centers(x: &[Vec<f64>], l: f64, gap: f64) -> Result<InteractionMatrix> {
    let n = x.len();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let r: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (r / l).powf(-gap)
        }
    });
    let sym = DMatrix::from_fn(n, n, |i, j| if i < j { d[(i, j)] } else { d[(j, i)] });
    InteractionMatrix::from_matrix(sym)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub l: f64,
    pub n: usize,
    pub kappa: f64,
    pub b: f64,
    pub residual: f64,
    pub min_a: f64,
    pub max_a: f64,
    pub min_mu: f64,
    pub max_mu: f64,
    pub max_offset: f64,
    pub mirror_asymmetry: f64,
    pub heights: Vec<f64>,
    pub mu: Vec<f64>,
    /// Refined centers in `R^N`.
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<LadderRow>,
    pub fitted_slope: f64,
    pub expected_slope: f64,
    pub relative_deviation: f64,
}

/// Solves the height system at each `L`, refines centers, re-solves with
/// the interaction rebuilt from the refined centers, and fits
/// `log μ̄` against `log L` with `μ̄` the geometric mean height.
pub fn scaling_ladder(
    cfg: &ProblemConfig,
    lat: &Lattice,
    consts: &ConstantsTable,
    ls: &[f64],
    opts: &SolverOptions,
) -> Result<ScalingReport> {
    let kappa = cfg.kappa();
    let gap = 2.0 * cfg.half_gap();
    let base = crate::lattice::interaction_matrix(lat, cfg.n, cfg.m)?;
    let sys0 = HeightSystem::new(base, kappa, consts.b)?;
    let sol0 = solve_heights(&sys0, opts)?;
    let mut rows = Vec::with_capacity(ls.len());
    for &l in ls {
        let lat_l = lat.with_scale(l);
        let mu0 = recover_mu(&sol0.a, cfg, l);
        let centers = refine_centers(cfg, &lat_l, &mu0, consts)?;
        let d = interaction_from_centers(&centers.x, l, gap)?;
        let sys = HeightSystem::new(d, kappa, consts.b)?;
        let sol = solve_heights_from(&sys, &sol0.a, opts)?;
        let mu = recover_mu(&sol.a, cfg, l);
        let mirror_asymmetry = (0..lat.len())
            .filter_map(|j| lat.mirror_index(j).map(|k| (sol.a[j] - sol.a[k]).abs() / sol.a[j]))
            .fold(0.0, f64::max);
        rows.push(LadderRow {
            l,
            n: lat.len(),
            kappa,
            b: consts.b,
            residual: sol.residual,
            min_a: sol.min_a(),
            max_a: sol.max_a(),
            min_mu: mu.iter().cloned().fold(f64::INFINITY, f64::min),
            max_mu: mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            max_offset: centers.max_offset,
            mirror_asymmetry,
            heights: sol.a,
            mu,
            centers: centers.x,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.l.ln()).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.mu.iter().map(|m| m.ln()).sum::<f64>() / r.mu.len() as f64)
        .collect();
    let fitted_slope = fit_slope(&xs, &ys);
    let expected_slope = cfg.mu_exponent();
    Ok(ScalingReport {
        rows,
        fitted_slope,
        expected_slope,
        relative_deviation: (fitted_slope - expected_slope).abs() / expected_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{interaction_matrix, Selection};
    use crate::quadrature::constants_table;

    fn two_point(b: f64, kappa: f64) -> HeightSystem {
        let d = InteractionMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        HeightSystem::new(d, kappa, b).unwrap()
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let sol = solve_heights(&two_point(1.0, 1.4), &SolverOptions::default()).unwrap();
        assert!((sol.a[0] - 1.0).abs() < 1e-12 && (sol.a[1] - 1.0).abs() < 1e-12);
        for b in [0.3, 2.0, 7.5] {
            let sol = solve_heights(&two_point(b, 1.4), &SolverOptions::default()).unwrap();
            let exact = b.powf(1.0 / 0.4);
            assert!((sol.a[0] - exact).abs() < 1e-11 * exact, "B={b}");
        }
    }

    #[test]
    fn collinear_triple_matches_bisection() {
        let lat = Lattice::generate(1, &Selection::FullBox { radius: 1 }, 7, 1, 1.0).unwrap();
        let d = interaction_matrix(&lat, 7, 1).unwrap();
        let kappa = 1.4;
        let sys = HeightSystem::new(d, kappa, 1.0).unwrap();
        let sol = solve_heights(&sys, &SolverOptions::default()).unwrap();
        assert!((sol.a[0] - sol.a[2]).abs() < 1e-13 * sol.a[0]);
        // By symmetry a = (x, y, x) with x^κ = y + x/32, y^κ = 2x.
        // Eliminate y = (2x)^{1/κ} and bisect g(x) = x^κ - (2x)^{1/κ} - x/32.
        let g = |x: f64| x.powf(kappa) - (2.0 * x).powf(1.0 / kappa) - x / 32.0;
        let (mut lo, mut hi) = (1e-3, 100.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((sol.a[0] - lo).abs() < 1e-11 * lo);
        assert!((sol.a[1] - (2.0 * lo).powf(1.0 / kappa)).abs() < 1e-11);
    }

    #[test]
    fn rejects_degenerate_systems() {
        let d = InteractionMatrix::from_matrix(DMatrix::zeros(1, 1)).unwrap();
        assert!(HeightSystem::new(d, 1.4, 1.0).is_err());
        let d = InteractionMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(HeightSystem::new(d.clone(), 1.0, 1.0).is_err());
        assert!(HeightSystem::new(d, 1.4, 0.0).is_err());
    }

    #[test]
    fn uniqueness_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let opts = SolverOptions::default();
        let sym = uniqueness_stress(&two_point(1.0, 1.4), 20, &opts, 1).unwrap();
        assert!(sym.spread < 1e-10);
        let d = random_interaction(5, &mut rng).unwrap();
        let (c0, c1) = d.row_sum_bounds();
        assert!(c0 >= 0.5 && c1 <= 2.0);
        let sys = HeightSystem::new(d, 1.4, 1.0).unwrap();
        let rep = uniqueness_stress(&sys, 20, &opts, 2).unwrap();
        assert!(rep.spread < 1e-10, "{}", rep.spread);
        assert!(uniqueness_stress(&sys, 5, &opts, 2).is_err());
    }

    #[test]
    fn linearized_bound_examples() {
        let sys = two_point(1.0, 1.4);
        let sol = solve_heights(&sys, &SolverOptions::default()).unwrap();
        let lb = linearized_bound(&sys, &sol, 2000, 3).unwrap();
        assert!((lb.min_singular - 0.4).abs() < 1e-10);
        assert!(lb.sampled >= lb.exact_inf - 1e-12);
        assert!((lb.exact_inf - 0.4).abs() < 1e-10);
        let mut prev = 0.0;
        for t in [0.5, 1.0, 2.0] {
            let d = sys.interaction().scaled(t);
            let s = HeightSystem::new(d, 1.4, 1.0).unwrap();
            let sol = solve_heights(&s, &SolverOptions::default()).unwrap();
            let lb = linearized_bound(&s, &sol, 500, 3).unwrap();
            assert!(lb.min_singular > 0.0 && lb.min_singular > prev);
            prev = lb.min_singular;
        }
    }

    #[test]
    fn energy_gradient_vanishes_and_matches_finite_differences() {
        let sys = two_point(1.0, 1.4);
        let (f, g) = sys.energy(&[0.0, 0.0]);
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
        let sol = solve_heights(&sys, &SolverOptions::default()).unwrap();
        assert!(sys.energy(&sol.a).1.iter().all(|x| x.abs() < 1e-10));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sys = HeightSystem::new(random_interaction(4, &mut rng).unwrap(), 1.7, 0.8).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = sys.energy(&x);
            for j in 0..4 {
                let fd = richardson_derivative(
                    |t| {
                        let mut y = x.clone();
                        y[j] = t;
                        sys.energy(&y).0
                    },
                    x[j],
                    1e-3,
                );
                assert!((fd - grad[j]).abs() < 1e-6 * grad[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn fixed_point_map_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = HeightSystem::new(random_interaction(6, &mut rng).unwrap(), 1.4, 1.0).unwrap();
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..5.0)).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(0.0..1.0)).collect();
            let (ma, mb) = (sys.map(&a), sys.map(&b));
            assert!(ma.iter().zip(&mb).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn scale_covariance_in_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sys = HeightSystem::new(random_interaction(8, &mut rng).unwrap(), 1.4, 1.0).unwrap();
        let opts = SolverOptions::default();
        let base = solve_heights(&sys, &opts).unwrap();
        for t in [0.25, 3.0] {
            let sol = solve_heights(&sys.with_b(t).unwrap(), &opts).unwrap();
            let f = t.powf(1.0 / 0.4);
            for (x, y) in sol.a.iter().zip(&base.a) {
                assert!((x - f * y).abs() < 1e-10 * x);
            }
        }
    }

    #[test]
    fn height_exponent_gives_expected_slope() {
        let cfg = ProblemConfig::example();
        assert!((height_exponent(&cfg) / cfg.half_gap() - 5.0).abs() < 1e-14);
        let cfg = ProblemConfig {
            n: 9,
            m: 2,
            a: vec![-1.0; 9],
            ..ProblemConfig::example()
        };
        assert!((cfg.mu_exponent() - 5.0).abs() < 1e-14);
        let mu = recover_mu(&[1.0, 2.0], &ProblemConfig::example(), 2.0);
        assert!((mu[0] - 2f64.powf(5.0)).abs() < 1e-10);
    }

    #[test]
    fn two_point_offsets_match_scalar_balance() {
        let cfg = ProblemConfig::example();
        let consts = constants_table(&cfg).unwrap();
        let l = 16.0;
        let lat = Lattice::generate(1, &Selection::Explicit { points: vec![vec![0], vec![1]] }, 7, 1, l).unwrap();
        let mu = vec![40.0, 40.0];
        let c = refine_centers(&cfg, &lat, &mu, &consts).unwrap();
        // Bubble 1 at L + δ: δ solves
        // a_1 C1 μ^{2-β} δ + A0 C̃ μ^{-2h} (2m-N) (L + 2δ)^{2m-N-1} = 0
        // with the neighbour mirrored at -δ.
        let h = cfg.half_gap();
        let phi = |d: f64| {
            cfg.a[0] * consts.c1 * mu[0].powf(2.0 - cfg.beta) * d
                + consts.a0 * consts.tilde_c * mu[0].powf(-2.0 * h) * (-2.0 * h) * (l + 2.0 * d).powf(-2.0 * h - 1.0)
        };
        let scan: Vec<f64> = (0..=4000).map(|i| -1e-3 + 2e-3 * i as f64 / 4000.0).collect();
        let k = scan.windows(2).position(|w| phi(w[0]) * phi(w[1]) <= 0.0).unwrap();
        let (mut lo, mut hi) = (scan[k], scan[k + 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if phi(lo) * phi(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let delta = 0.5 * (lo + hi);
        assert!(delta < 0.0, "bubbles should be pulled together");
        assert!((c.offsets[1][0] - delta).abs() < 1e-3 * delta.abs(), "{} vs {delta}", c.offsets[1][0]);
        assert!((c.offsets[0][0] + delta).abs() < 1e-3 * delta.abs());
        assert!(c.offsets[0][1..].iter().all(|&v| v.abs() < 1e-12 * delta.abs()));
    }

    #[test]
    fn symmetric_box_has_zero_central_offset() {
        let cfg = ProblemConfig::example();
        let consts = constants_table(&cfg).unwrap();
        let lat = Lattice::generate(1, &Selection::FullBox { radius: 3 }, 7, 1, 16.0).unwrap();
        let mu = vec![100.0; lat.len()];
        let c = refine_centers(&cfg, &lat, &mu, &consts).unwrap();
        assert!(c.max_offset > 0.0);
        assert!(c.offsets[3].iter().all(|v| v.abs() < 1e-8 * c.max_offset));
        for j in 0..lat.len() {
            let k = lat.mirror_index(j).unwrap();
            assert!((c.offsets[j][0] + c.offsets[k][0]).abs() <= 1e-10 * c.max_offset);
        }
    }
}
