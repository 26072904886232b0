//! Multi-bubble fields `W = Σ U_{x_j, μ_j}`, the kernels `Z_{i,j}`, the
//! weight `σ`, the weighted sup norms and the residual `l_L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_half_line, sphere_area, SphereRule};
use crate::radial::bubble_constant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub center: Vec<f64>,
    pub mu: f64,
}

/// Transition profile of the cutoff `ξ` on `1 <= |y| <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    /// `C^1` smoothstep `3t^2 - 2t^3`.
    #[default]
    Cubic,
    /// `C^2` smoothstep `10t^3 - 15t^4 + 6t^5`.
    Quintic,
}

impl Cutoff {
    /// `ξ(r)`: 1 on `[0, 1]`, 0 on `[2, ∞)`.
    pub fn eval(self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        if r >= 2.0 {
            return 0.0;
        }
        let t = r - 1.0;
        let s = match self {
            Cutoff::Cubic => t * t * (3.0 - 2.0 * t),
            Cutoff::Quintic => t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        };
        1.0 - s
    }
}

/// `C̃_m μ^{(N-2m)/2} (1 + μ^2 |y-x|^2)^{-(N-2m)/2}` with `C̃_m` passed in.
pub fn bubble_value(tilde_c: f64, h: f64, b: &Bubble, y: &[f64]) -> f64 {
    let r2 = dist2(&b.center, y);
    tilde_c * b.mu.powf(h) * (1.0 + b.mu * b.mu * r2).powf(-h)
}

/// [`bubble_value`] with the constant computed from `(N, m)`.
pub fn eval_bubble(b: &Bubble, y: &[f64], n: u32, m: u32) -> Result<f64> {
    let tc = bubble_constant(m, n)?.value();
    Ok(bubble_value(tc, (n as f64 - 2.0 * m as f64) / 2.0, b, y))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct BubbleField {
    bubbles: Vec<Bubble>,
    cfg: ProblemConfig,
    tilde_c: f64,
    h: f64,
    tau: f64,
    cutoff: Cutoff,
}

impl BubbleField {
    pub fn new(bubbles: Vec<Bubble>, cfg: &ProblemConfig, cutoff: Cutoff) -> Result<Self> {
        if bubbles.is_empty() {
            return Err(Error::Precondition("bubble field needs at least one bubble".into()));
        }
        let n = cfg.n as usize;
        for b in &bubbles {
            if b.center.len() != n {
                return Err(Error::Precondition(format!("bubble center must have {n} coordinates")));
            }
            if !(b.mu > 0.0) || !b.mu.is_finite() {
                return Err(Error::Precondition(format!("bubble height mu = {} must be positive", b.mu)));
            }
        }
        for i in 0..bubbles.len() {
            for j in 0..i {
                if bubbles[i].center == bubbles[j].center {
                    return Err(Error::Precondition(format!("bubbles {j} and {i} share a center")));
                }
            }
        }
        Ok(Self {
            bubbles,
            cfg: cfg.clone(),
            tilde_c: bubble_constant(cfg.m, cfg.n)?.value(),
            h: cfg.half_gap(),
            tau: cfg.tau(),
            cutoff,
        })
    }

    pub fn bubbles(&self) -> &[Bubble] {
        &self.bubbles
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.n as usize
    }

    pub fn tilde_c(&self) -> f64 {
        self.tilde_c
    }

    pub fn bubble(&self, j: usize, y: &[f64]) -> f64 {
        bubble_value(self.tilde_c, self.h, &self.bubbles[j], y)
    }

    /// `W(y) = Σ_j U_j(y)`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        (0..self.bubbles.len()).map(|j| self.bubble(j, y)).sum()
    }

    /// `Z_{j,which}(y)`: for `which` in `1..=N` the cutoff times
    /// `∂U_j/∂x_{j,which}`, for `which = N+1` the cutoff times `∂U_j/∂μ_j`.
    pub fn eval_z(&self, j: usize, which: usize, y: &[f64]) -> Result<f64> {
        let n = self.dim();
        if which == 0 || which > n + 1 {
            return Err(Error::Precondition(format!("kernel index {which} outside 1..={}", n + 1)));
        }
        let b = &self.bubbles[j];
        let r2 = dist2(&b.center, y);
        let xi = self.cutoff.eval(r2.sqrt());
        if xi == 0.0 {
            return Ok(0.0);
        }
        let (mu, h, tc) = (b.mu, self.h, self.tilde_c);
        let s = 1.0 + mu * mu * r2;
        let d = if which <= n {
            2.0 * h * tc * mu.powf(h + 2.0) * (y[which - 1] - b.center[which - 1]) * s.powf(-h - 1.0)
        } else {
            tc * h * mu.powf(h - 1.0) * (1.0 - mu * mu * r2) * s.powf(-h - 1.0)
        };
        Ok(xi * d)
    }

    /// `σ(y) = min{1, min_i ((1 + μ_i|y-x_i|)/μ_i)^{τ-1}}`.
    pub fn sigma(&self, y: &[f64]) -> f64 {
        let mut s: f64 = 1.0;
        for b in &self.bubbles {
            let r = dist2(&b.center, y).sqrt();
            s = s.min(((1.0 + b.mu * r) / b.mu).powf(self.tau - 1.0));
        }
        s
    }

    /// `Σ_j μ_j^{e} / (1 + μ_j|y-x_j|)^{e+τ}`.
    pub fn comparison(&self, y: &[f64], e: f64) -> f64 {
        self.bubbles
            .iter()
            .map(|b| {
                let r = dist2(&b.center, y).sqrt();
                b.mu.powf(e) * (1.0 + b.mu * r).powf(-e - self.tau)
            })
            .sum()
    }

    pub fn star_exponent(&self) -> f64 {
        self.h
    }

    pub fn star_star_exponent(&self) -> f64 {
        (self.cfg.n as f64 + 2.0 * self.cfg.m as f64) / 2.0
    }

    /// Index of the bubble contributing most at `y`.
    fn dominant(&self, y: &[f64]) -> usize {
        (0..self.bubbles.len())
            .map(|j| (j, self.bubble(j, y)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .unwrap_or(0)
    }

    /// `l_L = K W^{m*-1} - Σ_j U_j^{m*-1}`, split as
    /// `K (W^p - Σ U_j^p) + (K - 1) Σ U_j^p` with the first bracket formed
    /// relative to the dominant bubble to avoid cancellation.
    pub fn residual(&self, k: &SyntheticK, y: &[f64]) -> f64 {
        let p = self.cfg.mstar() - 1.0;
        let i = self.dominant(y);
        let ui = self.bubble(i, y);
        let mut rest = 0.0;
        let mut rest_p = 0.0;
        for j in 0..self.bubbles.len() {
            if j != i {
                let u = self.bubble(j, y);
                rest += u;
                rest_p += u.powf(p);
            }
        }
        let uip = ui.powf(p);
        let excess = if ui > 0.0 {
            uip * (p * (rest / ui).ln_1p()).exp_m1() - rest_p
        } else {
            rest.powf(p) - rest_p
        };
        k.value(y) * excess + k.minus_one(y) * (uip + rest_p)
    }
}

/// The local model `K(y) = K(0) + Σ_i a_i |ỹ_i|^β` made global: the
/// first `k` coordinates are folded into one lattice cell of side
/// `period`, and every folded coordinate is clamped at the radius where
/// `K` would fall to `K(0)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticK {
    pub k0: f64,
    pub a: Vec<f64>,
    pub beta: f64,
    pub lattice_dim: usize,
    pub period: f64,
    pub clamp: f64,
}

impl SyntheticK {
    pub fn new(cfg: &ProblemConfig, period: f64) -> Self {
        let total: f64 = cfg.a.iter().map(|a| a.abs()).sum();
        let clamp = if total > 0.0 {
            (cfg.k0 / (2.0 * total)).powf(1.0 / cfg.beta)
        } else {
            f64::INFINITY
        };
        Self {
            k0: cfg.k0,
            a: cfg.a.clone(),
            beta: cfg.beta,
            lattice_dim: cfg.k as usize,
            period,
            clamp,
        }
    }

    /// Constant `K ≡ K(0)`.
    pub fn flat(cfg: &ProblemConfig) -> Self {
        Self {
            a: vec![0.0; cfg.n as usize],
            ..Self::new(cfg, 1.0)
        }
    }

    fn folded(&self, i: usize, yi: f64) -> f64 {
        let t = if i < self.lattice_dim {
            yi - self.period * (yi / self.period).round()
        } else {
            yi
        };
        t.abs().min(self.clamp)
    }

    /// `K(y) - 1`, formed without cancellation.
    pub fn minus_one(&self, y: &[f64]) -> f64 {
        let s: f64 = self
            .a
            .iter()
            .enumerate()
            .map(|(i, a)| if *a == 0.0 { 0.0 } else { a * self.folded(i, y[i]).powf(self.beta) })
            .sum();
        (self.k0 - 1.0) + s
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        1.0 + self.minus_one(y)
    }
}

/// Sample points for the weighted sup norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormGrid {
    pub points: Vec<Vec<f64>>,
    pub description: String,
}

impl NormGrid {
    /// Per-bubble log-polar grids from `1e-2/μ_j` to `outer` with
    /// `radial` radii along the directions of a degree-`angular` sphere
    /// rule plus the coordinate axes, unioned with a coarse far grid
    /// along the first axis.
    pub fn polar(field: &BubbleField, radial: usize, angular: usize, outer: f64) -> Self {
        let n = field.dim();
        let sphere = SphereRule::new(n, angular);
        let mut dirs: Vec<Vec<f64>> = (0..sphere.len()).map(|i| sphere.point(i).to_vec()).collect();
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                dirs.push(e);
            }
        }
        let mut points = Vec::new();
        for b in field.bubbles() {
            points.push(b.center.clone());
            let r0 = 1e-2 / b.mu;
            let ratio = (outer / r0).ln();
            for q in 0..radial {
                let r = r0 * (ratio * q as f64 / (radial - 1).max(1) as f64).exp();
                for d in &dirs {
                    points.push(b.center.iter().zip(d).map(|(c, e)| c + r * e).collect());
                }
            }
        }
        let lo = field.bubbles().iter().map(|b| b.center[0]).fold(f64::INFINITY, f64::min);
        let hi = field.bubbles().iter().map(|b| b.center[0]).fold(f64::NEG_INFINITY, f64::max);
        let far = 64;
        let span = (hi - lo).max(1.0);
        for q in 0..=far {
            let x0 = lo - 0.5 * span + 2.0 * span * q as f64 / far as f64;
            for off in [0.0, 0.5 * outer, 2.0 * outer] {
                let mut y = vec![0.0; n];
                y[0] = x0;
                if n > 1 {
                    y[1] = off;
                }
                points.push(y);
            }
        }
        let description = format!(
            "{} points: log-polar grids of {radial} radii from 1e-2/mu to {outer} along {} directions per bubble, plus {} far points",
            points.len(),
            dirs.len(),
            3 * (far + 1)
        );
        Self { points, description }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub star_norm: f64,
    pub star_star_norm: f64,
    pub sample_points: String,
    pub sigma_min: f64,
    /// Relative change of both norms from a half-resolution grid; set by
    /// [`star_norms_refined`].
    pub refinement_delta: Option<f64>,
}

/// Grid lower bounds of `‖φ‖_*` and `‖φ‖_**`.
pub fn star_norms<F>(field: &BubbleField, phi: F, grid: &NormGrid) -> Result<NormReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let e1 = field.star_exponent();
    let e2 = field.star_star_exponent();
    let per_point: Vec<(f64, f64, f64)> = grid
        .points
        .par_iter()
        .map(|y| {
            let v = phi(y).abs();
            let s = field.sigma(y);
            (v / (s * field.comparison(y, e1)), v / (s * field.comparison(y, e2)), s)
        })
        .collect();
    let mut star: f64 = 0.0;
    let mut star_star: f64 = 0.0;
    let mut sigma_min: f64 = 1.0;
    for (a, b, s) in per_point {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("norm ratio on the sample grid".into()));
        }
        star = star.max(a);
        star_star = star_star.max(b);
        sigma_min = sigma_min.min(s);
    }
    Ok(NormReport {
        star_norm: star,
        star_star_norm: star_star,
        sample_points: grid.description.clone(),
        sigma_min,
        refinement_delta: None,
    })
}

/// [`star_norms`] on a polar grid with `radial` radii, with the delta to
/// the grid of `radial/2` radii recorded.
pub fn star_norms_refined<F>(field: &BubbleField, phi: F, radial: usize, angular: usize, outer: f64) -> Result<NormReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let fine = star_norms(field, &phi, &NormGrid::polar(field, radial, angular, outer))?;
    let coarse = star_norms(field, &phi, &NormGrid::polar(field, radial / 2, angular, outer))?;
    let rel = |a: f64, b: f64| if a > 0.0 { (a - b).abs() / a } else { 0.0 };
    let delta = rel(fine.star_norm, coarse.star_norm).max(rel(fine.star_star_norm, coarse.star_star_norm));
    Ok(NormReport {
        refinement_delta: Some(delta),
        ..fine
    })
}

/// `‖l_L‖_**` at one ladder rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub l: f64,
    pub min_mu: f64,
    pub star_star_norm: f64,
    pub refinement_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub strictly_decreasing: bool,
    /// Least-squares slope of `log ‖l_L‖_**` against `log L`.
    pub fitted_rate: f64,
    /// `-min((N+2m)/2 - τ, β - τ + 1) · (slope of log μ against log L)`.
    pub predicted_rate: f64,
    pub relative_deviation: f64,
}

/// Predicted exponent of `‖l_L‖_**` in `L`.
pub fn predicted_residual_rate(cfg: &ProblemConfig) -> f64 {
    let tau = cfg.tau();
    let e = ((cfg.n as f64 + 2.0 * cfg.m as f64) / 2.0 - tau).min(cfg.beta - tau + 1.0);
    -e * cfg.mu_exponent()
}

/// `‖l_L‖_**` for each `(L, bubbles)` pair.
pub fn residual_ladder(
    cfg: &ProblemConfig,
    rungs: &[(f64, Vec<Bubble>)],
    radial: usize,
    angular: usize,
) -> Result<ResidualReport> {
    let mut rows = Vec::with_capacity(rungs.len());
    for (l, bubbles) in rungs {
        let field = BubbleField::new(bubbles.clone(), cfg, Cutoff::default())?;
        let k = SyntheticK::new(cfg, *l);
        let rep = star_norms_refined(&field, |y| field.residual(&k, y), radial, angular, 0.5 * l)?;
        rows.push(ResidualRow {
            l: *l,
            min_mu: bubbles.iter().map(|b| b.mu).fold(f64::INFINITY, f64::min),
            star_star_norm: rep.star_star_norm,
            refinement_delta: rep.refinement_delta.unwrap_or(0.0),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].star_star_norm < w[0].star_star_norm);
    let xs: Vec<f64> = rows.iter().map(|r| r.l.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.star_star_norm.ln()).collect();
    let fitted_rate = crate::reduced::fit_slope(&xs, &ys);
    let predicted_rate = predicted_residual_rate(cfg);
    Ok(ResidualReport {
        rows,
        strictly_decreasing,
        fitted_rate,
        predicted_rate,
        relative_deviation: ((fitted_rate - predicted_rate) / predicted_rate).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub name: String,
    /// Largest sampled LHS/RHS ratio (an estimate of the constant).
    pub max_ratio: f64,
    /// The same on the coarser sample set.
    pub coarse_max_ratio: f64,
    /// Ratio still growing by more than 5% under refinement.
    pub unbounded: bool,
}

impl RatioCheck {
    fn new(name: &str, max_ratio: f64, coarse_max_ratio: f64) -> Self {
        Self {
            name: name.into(),
            max_ratio,
            coarse_max_ratio,
            unbounded: max_ratio > 1.05 * coarse_max_ratio,
        }
    }
}

/// `∫_{R^N} |y-z|^{2m-N} (1+|z|)^{-2m-s} dz` for `|y| = ry`, reduced to a
/// double integral in polar coordinates about `y`.
pub fn potential_integral(n: u32, m: u32, s: f64, ry: f64, rel_tol: f64) -> Result<f64> {
    let nf = n as f64;
    let inner_area = sphere_area(n - 1);
    let angular = |rho: f64| -> f64 {
        // ∫_{S^{N-1}} (1+|y+ρω|)^{-2m-s} dω with t = cos angle(y, ω).
        let g = |t: f64| {
            let d = (ry * ry + rho * rho + 2.0 * ry * rho * t).max(0.0).sqrt();
            (1.0 - t * t).max(0.0).powf((nf - 3.0) / 2.0) * (1.0 + d).powf(-2.0 * m as f64 - s)
        };
        integrate(g, -1.0, 1.0, 0.0, rel_tol, 2000).map(|q| inner_area * q.value).unwrap_or(f64::NAN)
    };
    let q = integrate_half_line(|rho| rho.powi(2 * m as i32 - 1) * angular(rho), rel_tol)?;
    if !q.value.is_finite() {
        return Err(Error::NonFinite("potential integral".into()));
    }
    Ok(q.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub potential: RatioCheck,
    /// `(|y|, LHS (1+|y|)^s)` samples of the potential estimate.
    pub potential_samples: Vec<(f64, f64)>,
    pub local_domination: RatioCheck,
    pub power_sum: RatioCheck,
}

/// Samples the three basic estimates: the Riesz-potential bound, the
/// local domination of lattice sums on `B_1(x_i)` with exponent `theta`,
/// and the power-sum inequality.
pub fn pointwise_checks(field: &BubbleField, s: f64, theta: f64, samples: usize) -> Result<PointwiseReport> {
    let cfg = field.config();
    let (n, m) = (cfg.n, cfg.m);
    if !(s > 0.0 && s < n as f64 - 2.0 * m as f64) {
        return Err(Error::Precondition(format!("potential exponent {s} must lie in (0, N-2m)")));
    }
    if !(theta > cfg.k as f64) {
        return Err(Error::Precondition(format!("theta = {theta} must exceed the lattice dimension k")));
    }
    let radii = [0.0, 0.5, 2.0, 10.0, 50.0, 250.0];
    let mut potential_samples = Vec::new();
    for &r in &radii {
        potential_samples.push((r, potential_integral(n, m, s, r, 1e-9)? * (1.0 + r).powf(s)));
    }
    let fine = potential_samples.iter().map(|x| x.1).fold(0.0, f64::max);
    let coarse = potential_samples[..radii.len() - 1].iter().map(|x| x.1).fold(0.0, f64::max);
    let potential = RatioCheck::new("potential bound", fine, coarse);

    let nn = field.dim();
    let sphere = SphereRule::new(nn, 3);
    let sample_ball = |count: usize| -> Vec<(usize, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, b) in field.bubbles().iter().enumerate() {
            for q in 0..count {
                let r = (q as f64 + 0.5) / count as f64;
                for d in 0..sphere.len() {
                    out.push((i, b.center.iter().zip(sphere.point(d)).map(|(c, e)| c + r * e).collect()));
                }
            }
        }
        out
    };
    let local = |count: usize| -> f64 {
        sample_ball(count)
            .par_iter()
            .map(|(i, y)| {
                let lhs: f64 = field
                    .bubbles()
                    .iter()
                    .map(|b| (1.0 + b.mu * dist2(&b.center, y).sqrt()).powf(-theta))
                    .sum();
                let bi = &field.bubbles()[*i];
                lhs * (1.0 + bi.mu * dist2(&bi.center, y).sqrt()).powf(theta)
            })
            .reduce(|| 0.0, f64::max)
    };
    let local_domination = RatioCheck::new("local domination", local(samples), local(samples / 2));

    let p = cfg.mstar() - 1.0;
    let (e1, e2) = (field.star_exponent(), field.star_star_exponent());
    let power = |count: usize| -> f64 {
        NormGrid::polar(field, count, 3, 4.0)
            .points
            .par_iter()
            .map(|y| field.comparison(y, e1).powf(p) / field.comparison(y, e2))
            .reduce(|| 0.0, f64::max)
    };
    let power_sum = RatioCheck::new("power-sum inequality", power(samples), power(samples / 2));
    Ok(PointwiseReport {
        potential,
        potential_samples,
        local_domination,
        power_sum,
    })
}
