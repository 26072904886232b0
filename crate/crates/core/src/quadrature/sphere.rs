//! Product Gauss rules on `S^{N-1}` and on balls in `R^N`.
//!
//! The sphere rule peels off one coordinate at a time: on `S^{d-1}`,
//! `y_1 = t` carries the weight `(1-t^2)^{(d-3)/2}` (a Gauss–Gegenbauer
//! rule) and the remaining coordinates are `sqrt(1-t^2)` times a point of
//! `S^{d-2}`. The base case `S^1` uses equispaced angles. A rule of
//! degree `D` integrates every polynomial of total degree `<= D` exactly.

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::gauss::gauss_jacobi;
use crate::sum::Compensated;

const CHUNK: usize = 2048;

/// `|S^{N-1}| = 2 π^{N/2} / Γ(N/2)`.
pub fn sphere_area(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// `∫_{S^{N-1}} |ω_1|^s dω = 2 π^{(N-1)/2} Γ((s+1)/2) / Γ((s+N)/2)`.
pub fn axis_power_mean(n: u32, s: f64) -> f64 {
    let nf = n as f64;
    2.0 * ((nf - 1.0) / 2.0 * PI.ln() + ln_gamma((s + 1.0) / 2.0) - ln_gamma((s + nf) / 2.0)).exp()
}

/// Sums `weights[i] * f(i)` for a vector-valued `f` of the given width in
/// fixed chunks, in parallel, and combines the chunks in index order so
/// the result does not depend on scheduling.
pub fn weighted_sum<S, I, F>(weights: &[f64], width: usize, init: I, f: F) -> Vec<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<Compensated>> = weights
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, ws)| {
            let mut state = init();
            let mut buf = vec![0.0; width];
            let mut acc = vec![Compensated::new(); width];
            for (off, &w) in ws.iter().enumerate() {
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(&mut state, c * CHUNK + off, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    a.add(w * b);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Compensated::new(); width];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total.iter().map(Compensated::value).collect()
}

#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    degree: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// Rule on the unit sphere of `R^dim`, exact to total degree `degree`.
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim >= 2, "sphere rule needs dim >= 2");
        let m = degree + 1;
        let mut points = Vec::with_capacity(2 * m);
        let mut weights = Vec::with_capacity(m);
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            points.push(th.cos());
            points.push(th.sin());
            weights.push(2.0 * PI / m as f64);
        }
        let ngauss = (degree + 1).div_ceil(2).max(1);
        for d in 3..=dim {
            let a = (d as f64 - 3.0) / 2.0;
            let (ts, ws) = gauss_jacobi(ngauss, a, a);
            let prev = d - 1;
            let count = weights.len();
            let mut np = Vec::with_capacity(ts.len() * count * d);
            let mut nw = Vec::with_capacity(ts.len() * count);
            for (t, wt) in ts.iter().zip(&ws) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for i in 0..count {
                    np.push(*t);
                    np.extend(points[i * prev..(i + 1) * prev].iter().map(|x| s * x));
                    nw.push(wt * weights[i]);
                }
            }
            points = np;
            weights = nw;
        }
        Self {
            dim,
            degree,
            points,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_{S^{N-1}} f(ω) dω`.
    pub fn integrate<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> f64 {
        weighted_sum(&self.weights, 1, || (), |_, i, out| out[0] = f(self.point(i)))[0]
    }

    /// Vector-valued integral over the unit sphere; `f(state, ω, out)`.
    pub fn integrate_vec<S, I, F>(&self, width: usize, init: I, f: F) -> Vec<f64>
    where
        I: Fn() -> S + Sync,
        F: Fn(&mut S, &[f64], &mut [f64]) + Sync,
    {
        weighted_sum(&self.weights, width, init, |s, i, out| f(s, self.point(i), out))
    }

    /// Vector-valued integral over the sphere of radius `radius`; the
    /// callback still receives the unit direction `ω`.
    pub fn integrate_vec_radius<S, I, F>(&self, radius: f64, width: usize, init: I, f: F) -> Vec<f64>
    where
        I: Fn() -> S + Sync,
        F: Fn(&mut S, &[f64], &mut [f64]) + Sync,
    {
        let jac = radius.powi(self.dim as i32 - 1);
        let mut v = self.integrate_vec(width, init, f);
        v.iter_mut().for_each(|x| *x *= jac);
        v
    }
}

/// Radial Gauss–Jacobi rule times a [`SphereRule`] on a ball.
#[derive(Debug, Clone)]
pub struct BallRule {
    sphere: SphereRule,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl BallRule {
    /// `radial_nodes` Gauss points in `r` (exact for `r^{N-1}` times a
    /// polynomial of degree `2 radial_nodes - 1`) on the unit ball.
    pub fn new(dim: usize, degree: usize, radial_nodes: usize) -> Self {
        let sphere = SphereRule::new(dim, degree);
        let (x, w) = gauss_jacobi(radial_nodes, 0.0, dim as f64 - 1.0);
        let scale = 0.5f64.powi(dim as i32);
        let radii: Vec<f64> = x.iter().map(|x| 0.5 * (1.0 + x)).collect();
        let radial_weights: Vec<f64> = w.iter().map(|w| w * scale).collect();
        let mut weights = Vec::with_capacity(radii.len() * sphere.len());
        for wr in &radial_weights {
            weights.extend(sphere.weights().iter().map(|ws| wr * ws));
        }
        Self {
            sphere,
            radii,
            radial_weights,
            weights,
        }
    }

    pub fn sphere(&self) -> &SphereRule {
        &self.sphere
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn radial(&self) -> (&[f64], &[f64]) {
        (&self.radii, &self.radial_weights)
    }

    /// Vector-valued integral over the ball of radius `radius` about the
    /// origin of the callback's frame; `f(state, r, ω, out)`.
    pub fn integrate_vec<S, I, F>(&self, radius: f64, width: usize, init: I, f: F) -> Vec<f64>
    where
        I: Fn() -> S + Sync,
        F: Fn(&mut S, f64, &[f64], &mut [f64]) + Sync,
    {
        let ns = self.sphere.len();
        let jac = radius.powi(self.sphere.dim() as i32);
        let mut v = weighted_sum(&self.weights, width, init, |s, i, out| {
            f(s, radius * self.radii[i / ns], self.sphere.point(i % ns), out)
        });
        v.iter_mut().for_each(|x| *x *= jac);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    /// `∫_{S^{N-1}} ω^α dω` for a multi-index with all even entries.
    fn monomial_oracle(alpha: &[u32]) -> f64 {
        if alpha.iter().any(|a| a % 2 == 1) {
            return 0.0;
        }
        let b: Vec<f64> = alpha.iter().map(|&a| (a as f64 + 1.0) / 2.0).collect();
        2.0 * b.iter().map(|&x| gamma(x)).product::<f64>() / gamma(b.iter().sum())
    }

    #[test]
    fn area_matches_closed_form() {
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-14 * sphere_area(5));
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14 * 4.0 * PI);
        for n in 2..9 {
            let rule = SphereRule::new(n, 6);
            let q = rule.integrate(|_| 1.0);
            assert!((q - sphere_area(n as u32)).abs() < 1e-10 * q, "N={n}");
        }
    }

    #[test]
    fn first_and_second_moments() {
        let n = 5;
        let rule = SphereRule::new(n, 4);
        let area = sphere_area(n as u32);
        for i in 0..n {
            let q = rule.integrate(|w| w[i]);
            assert!(q.abs() < 1e-14);
            for j in 0..n {
                let q = rule.integrate(|w| w[i] * w[j]);
                let exact = if i == j { area / n as f64 } else { 0.0 };
                assert!((q - exact).abs() < 1e-13, "({i},{j}) {q}");
            }
        }
    }

    #[test]
    fn exact_on_monomials_up_to_degree() {
        let n = 4;
        let degree = 8;
        let rule = SphereRule::new(n, degree);
        let mut alpha = vec![0u32; n];
        loop {
            let total: u32 = alpha.iter().sum();
            if total <= degree as u32 {
                let q = rule.integrate(|w| w.iter().zip(&alpha).map(|(x, &a)| x.powi(a as i32)).product());
                let exact = monomial_oracle(&alpha);
                assert!((q - exact).abs() < 1e-13, "{alpha:?}: {q} vs {exact}");
            }
            let mut i = 0;
            while i < n {
                alpha[i] += 1;
                if alpha[i] <= degree as u32 {
                    break;
                }
                alpha[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }

    #[test]
    fn axis_power_mean_matches_quadrature() {
        let rule = SphereRule::new(5, 10);
        for s in [0u32, 2, 4, 6] {
            let q = rule.integrate(|w| w[0].powi(s as i32));
            assert!((q - axis_power_mean(5, s as f64)).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn ball_volume_and_moment() {
        let n = 5;
        let ball = BallRule::new(n, 4, 8);
        let vol = ball.integrate_vec(2.0, 1, || (), |_, _, _, out| out[0] = 1.0)[0];
        let exact = sphere_area(n as u32) / n as f64 * 32.0;
        assert!((vol - exact).abs() < 1e-12 * exact);
        let m2 = ball.integrate_vec(1.0, 1, || (), |_, r, _, out| out[0] = r * r)[0];
        let exact = sphere_area(n as u32) / (n as f64 + 2.0);
        assert!((m2 - exact).abs() < 1e-13);
    }

    #[test]
    fn weighted_sum_is_deterministic() {
        let rule = SphereRule::new(5, 20);
        let a = rule.integrate(|w| (3.0 * w[0]).sin() * w[1].exp());
        let b = rule.integrate(|w| (3.0 * w[0]).sin() * w[1].exp());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
