//! Test fields with analytic jets of `(-Δ)^j u` up to second order.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::radial::{int, RadialFn, RadialSum, RadialTerm};

/// Value, gradient and row-major Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn zeros(dim: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
        }
    }

    pub fn clear(&mut self) {
        self.value = 0.0;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.hess.iter_mut().for_each(|h| *h = 0.0);
    }
}

/// A smooth function on (part of) `R^N` whose iterated Laplacians are
/// known in closed form.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    /// Largest `j` for which `(-Δ)^j` of the field is available.
    fn max_level(&self) -> u32;

    /// Adds the jet of `(-Δ)^level u` at `y` to `acc`, up to derivative
    /// order `order` (0, 1 or 2).
    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet);

    fn value(&self, level: u32, y: &[f64]) -> f64 {
        let mut j = Jet::zeros(self.dim());
        self.accumulate(level, y, 0, &mut j);
        j.value
    }
}

impl<F: Field + ?Sized> Field for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn max_level(&self) -> u32 {
        (**self).max_level()
    }

    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet) {
        (**self).accumulate(level, y, order, acc)
    }
}

/// `f(|y - c|)` for a [`RadialSum`] `f`.
#[derive(Debug, Clone)]
pub struct RadialField {
    center: Vec<f64>,
    // (g, g', g'') for g = (-Δ)^j f, j = 0..=levels
    levels: Vec<[RadialFn; 3]>,
}

impl RadialField {
    pub fn new(f: &RadialSum, center: Vec<f64>, levels: u32) -> Self {
        assert_eq!(f.dim() as usize, center.len(), "center dimension mismatch");
        let mut out = Vec::with_capacity(levels as usize + 1);
        let mut g = f.clone();
        for j in 0..=levels {
            if j > 0 {
                g = g.laplacian().scale(&int(-1));
            }
            let d1 = g.derivative();
            let d2 = d1.derivative();
            out.push([g.numeric(), d1.numeric(), d2.numeric()]);
        }
        Self { center, levels: out }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Field for RadialField {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet) {
        let [g, d1, d2] = &self.levels[level as usize];
        let n = self.center.len();
        let mut r2 = 0.0;
        for k in 0..n {
            let t = y[k] - self.center[k];
            r2 += t * t;
        }
        let r = r2.sqrt();
        acc.value += g.eval(r);
        if order == 0 {
            return;
        }
        if r < 1e-13 {
            // Smooth at the center: zero gradient, isotropic Hessian g''(0).
            if order >= 2 {
                let h = d2.eval(0.0);
                for k in 0..n {
                    acc.hess[k * n + k] += h;
                }
            }
            return;
        }
        let gp = d1.eval(r);
        let inv = 1.0 / r;
        for k in 0..n {
            acc.grad[k] += gp * (y[k] - self.center[k]) * inv;
        }
        if order >= 2 {
            let gpp = d2.eval(r);
            let tangential = gp * inv;
            let radial = gpp - tangential;
            for a in 0..n {
                let ea = (y[a] - self.center[a]) * inv;
                for b in 0..n {
                    let eb = (y[b] - self.center[b]) * inv;
                    acc.hess[a * n + b] += radial * ea * eb;
                }
                acc.hess[a * n + a] += tangential;
            }
        }
    }
}

/// A polynomial `Σ c_α y^α` in `N` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim), "exponent length mismatch");
        let mut p = Self { dim, terms };
        p.normalize();
        p
    }

    /// `|y|^2`.
    pub fn norm_squared(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|k| {
                let mut e = vec![0; dim];
                e[k] = 2;
                (1.0, e)
            })
            .collect();
        Self::new(dim, terms)
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut merged: Vec<(f64, Vec<u32>)> = Vec::with_capacity(self.terms.len());
        for (c, e) in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.1 == e => last.0 += c,
                _ => merged.push((c, e)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        self.terms = merged;
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn partial(&self, k: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[k] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[k] -= 1;
                (c * e[k] as f64, e2)
            })
            .collect();
        Self::new(self.dim, terms)
    }

    pub fn laplacian(&self) -> Self {
        let mut terms = Vec::new();
        for k in 0..self.dim {
            terms.extend(self.partial(k).partial(k).terms);
        }
        Self::new(self.dim, terms)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(y).map(|(&p, x)| x.powi(p as i32)).product::<f64>())
            .sum()
    }
}

/// A polynomial field with every derivative of every `(-Δ)^j` level
/// stored as a dense coefficient row over one monomial basis; a jet is a
/// handful of dot products against the basis evaluated once per point.
#[derive(Debug, Clone)]
pub struct PolyField {
    dim: usize,
    // Monomial `i > 0` is monomial `basis[i].0` times `y_{basis[i].1}`.
    basis: Vec<(usize, usize)>,
    // Per level: value row, gradient rows and row-major Hessian rows;
    // `None` marks a row that vanishes identically.
    levels: Vec<Vec<Option<Vec<f64>>>>,
}

impl PolyField {
    pub fn new(p: &Polynomial, levels: u32) -> Self {
        let dim = p.dim;
        let mut exps: Vec<Vec<u32>> = vec![vec![0; dim]];
        let mut basis = vec![(0, 0)];
        let mut last_var = vec![0usize];
        let mut frontier = 0..1;
        for _ in 0..p.degree() {
            let start = exps.len();
            for parent in frontier.clone() {
                for k in last_var[parent]..dim {
                    let mut e = exps[parent].clone();
                    e[k] += 1;
                    exps.push(e);
                    basis.push((parent, k));
                    last_var.push(k);
                }
            }
            frontier = start..exps.len();
        }
        let index: HashMap<&[u32], usize> = exps.iter().enumerate().map(|(i, e)| (e.as_slice(), i)).collect();
        let dense = |q: &Polynomial| -> Option<Vec<f64>> {
            if q.terms.is_empty() {
                return None;
            }
            let mut row = vec![0.0; exps.len()];
            for (c, e) in &q.terms {
                row[index[e.as_slice()]] += c;
            }
            // The basis is ordered by degree, so trailing zeros can go.
            let len = row.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
            row.truncate(len);
            Some(row)
        };
        let mut out = Vec::with_capacity(levels as usize + 1);
        let mut g = p.clone();
        for j in 0..=levels {
            if j > 0 {
                let lap = g.laplacian();
                g = Polynomial::new(dim, lap.terms.iter().map(|(c, e)| (-c, e.clone())).collect());
            }
            let grad: Vec<Polynomial> = (0..dim).map(|k| g.partial(k)).collect();
            let mut rows = vec![dense(&g)];
            rows.extend(grad.iter().map(dense));
            rows.extend((0..dim * dim).map(|ab| dense(&grad[ab / dim].partial(ab % dim))));
            out.push(rows);
        }
        Self {
            dim,
            basis,
            levels: out,
        }
    }

    /// Random polynomial of total degree at most `degree` with
    /// coefficients in `[-1, 1]`.
    pub fn random(dim: usize, degree: u32, levels: u32, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        let mut exps = vec![0u32; dim];
        collect_monomials(0, degree, &mut exps, &mut |e| {
            terms.push((rng.random_range(-1.0..1.0), e.to_vec()));
        });
        Self::new(&Polynomial::new(dim, terms), levels)
    }
}

fn collect_monomials(k: usize, budget: u32, exps: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if k == exps.len() {
        f(exps);
        return;
    }
    for p in 0..=budget {
        exps[k] = p;
        collect_monomials(k + 1, budget - p, exps, f);
    }
    exps[k] = 0;
}

impl Field for PolyField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet) {
        let rows = &self.levels[level as usize];
        if rows[0].is_none() {
            return;
        }
        let n = self.dim;
        let mut stack = [0.0; 64];
        let mut heap = Vec::new();
        let mono: &mut [f64] = if self.basis.len() <= stack.len() {
            &mut stack[..self.basis.len()]
        } else {
            heap.resize(self.basis.len(), 0.0);
            &mut heap
        };
        mono[0] = 1.0;
        for (i, &(parent, k)) in self.basis.iter().enumerate().skip(1) {
            mono[i] = mono[parent] * y[k];
        }
        let mono = &*mono;
        let dot = |row: &Option<Vec<f64>>| -> f64 {
            let Some(r) = row else { return 0.0 };
            let m = &mono[..r.len()];
            // Four independent chains instead of one long dependent sum.
            let mut acc = [0.0; 4];
            let (rc, mc) = (r.chunks_exact(4), m.chunks_exact(4));
            let tail: f64 = rc.remainder().iter().zip(mc.remainder()).map(|(a, b)| a * b).sum();
            for (a, b) in rc.zip(mc) {
                acc[0] += a[0] * b[0];
                acc[1] += a[1] * b[1];
                acc[2] += a[2] * b[2];
                acc[3] += a[3] * b[3];
            }
            (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
        };
        acc.value += dot(&rows[0]);
        if order >= 1 {
            for (k, a) in acc.grad.iter_mut().enumerate() {
                *a += dot(&rows[1 + k]);
            }
        }
        if order >= 2 {
            for (ab, a) in acc.hess.iter_mut().enumerate() {
                *a += dot(&rows[1 + n + ab]);
            }
        }
    }
}

/// Pointwise sum of fields.
#[derive(Clone)]
pub struct SumField {
    parts: Vec<Arc<dyn Field>>,
}

impl SumField {
    pub fn new(parts: Vec<Arc<dyn Field>>) -> Self {
        assert!(!parts.is_empty(), "empty field sum");
        let d = parts[0].dim();
        assert!(parts.iter().all(|p| p.dim() == d), "dimension mismatch in field sum");
        Self { parts }
    }
}

impl Field for SumField {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn max_level(&self) -> u32 {
        self.parts.iter().map(|p| p.max_level()).min().unwrap_or(0)
    }

    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet) {
        for p in &self.parts {
            p.accumulate(level, y, order, acc);
        }
    }
}

/// `factor · inner`.
#[derive(Clone)]
pub struct ScaledField<F> {
    inner: F,
    factor: f64,
}

impl<F: Field> ScaledField<F> {
    pub fn new(inner: F, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl<F: Field> Field for ScaledField<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_level(&self) -> u32 {
        self.inner.max_level()
    }

    fn accumulate(&self, level: u32, y: &[f64], order: u8, acc: &mut Jet) {
        let mut j = Jet::zeros(self.dim());
        self.inner.accumulate(level, y, order, &mut j);
        acc.value += self.factor * j.value;
        for (a, b) in acc.grad.iter_mut().zip(&j.grad) {
            *a += self.factor * b;
        }
        for (a, b) in acc.hess.iter_mut().zip(&j.hess) {
            *a += self.factor * b;
        }
    }
}

/// Random radial sum `Σ c r^p (1+r^2)^{-q2/2}` with `p ∈ {0, 2}`, smooth
/// at its center.
pub fn random_smooth_radial(dim: u32, terms: usize, rng: &mut impl Rng) -> RadialSum {
    let list = (0..terms)
        .map(|_| {
            let num = rng.random_range(-8i64..=8);
            let num = if num == 0 { 1 } else { num };
            let p = if rng.random_bool(0.5) { 0 } else { 2 };
            let q2 = rng.random_range(2..=dim as i32 + 2);
            RadialTerm::new(crate::radial::rat(num, 4), p, q2)
        })
        .collect();
    RadialSum::new(dim, list)
}

/// Random smooth field: an off-center radial sum plus a cubic polynomial.
pub fn random_smooth_field(dim: usize, levels: u32, offset: f64, rng: &mut impl Rng) -> SumField {
    let f = random_smooth_radial(dim as u32, 3, rng);
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-offset..offset)).collect();
    let radial: Arc<dyn Field> = Arc::new(RadialField::new(&f, center, levels));
    let poly: Arc<dyn Field> = Arc::new(PolyField::random(dim, 3, levels, rng));
    SumField::new(vec![radial, poly])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_check(field: &dyn Field, level: u32, y: &[f64]) {
        let n = field.dim();
        let mut jet = Jet::zeros(n);
        field.accumulate(level, y, 2, &mut jet);
        let h = 1e-4;
        for k in 0..n {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[k] += h;
            ym[k] -= h;
            let fd = (field.value(level, &yp) - field.value(level, &ym)) / (2.0 * h);
            assert!((fd - jet.grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "grad {k}: {fd} vs {}", jet.grad[k]);
            let mut jp = Jet::zeros(n);
            let mut jm = Jet::zeros(n);
            field.accumulate(level, &yp, 1, &mut jp);
            field.accumulate(level, &ym, 1, &mut jm);
            for l in 0..n {
                let fd = (jp.grad[l] - jm.grad[l]) / (2.0 * h);
                let an = jet.hess[k * n + l];
                assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "hess {k}{l}: {fd} vs {an}");
            }
        }
        // Trace of the Hessian is minus the next level.
        if level < field.max_level() {
            let tr: f64 = (0..n).map(|k| jet.hess[k * n + k]).sum();
            let next = field.value(level + 1, y);
            assert!((tr + next).abs() < 1e-9 * (1.0 + next.abs()));
        }
    }

    #[test]
    fn radial_field_jets_match_finite_differences() {
        let f = RadialSum::new(
            5,
            vec![RadialTerm::new(rat(1, 1), 0, 3), RadialTerm::new(rat(-1, 2), 2, 6)],
        );
        let field = RadialField::new(&f, vec![0.1, -0.2, 0.0, 0.3, 0.05], 3);
        for level in 0..3 {
            fd_check(&field, level, &[0.4, 0.1, -0.3, 0.2, 0.0]);
        }
    }

    #[test]
    fn poly_field_levels_and_jets() {
        let field = PolyField::new(&Polynomial::norm_squared(4), 2);
        assert_eq!(field.value(1, &[0.3, 0.1, 0.0, 1.0]), -8.0);
        assert_eq!(field.value(2, &[0.3, 0.1, 0.0, 1.0]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PolyField::random(3, 4, 2, &mut rng);
        fd_check(&p, 0, &[0.2, -0.5, 0.7]);
        fd_check(&p, 1, &[0.2, -0.5, 0.7]);
    }

    #[test]
    fn sum_field_adds_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_smooth_field(5, 2, 0.2, &mut rng);
        fd_check(&s, 0, &[0.1, 0.2, 0.3, -0.1, 0.0]);
        fd_check(&s, 1, &[0.1, 0.2, 0.3, -0.1, 0.0]);
    }

    #[test]
    fn radial_field_at_its_center() {
        let f = RadialSum::term(3, rat(1, 1), 0, 2);
        let field = RadialField::new(&f, vec![0.0; 3], 1);
        let mut jet = Jet::zeros(3);
        field.accumulate(0, &[0.0; 3], 2, &mut jet);
        assert_eq!(jet.value, 1.0);
        assert!(jet.grad.iter().all(|&g| g == 0.0));
        // (1+r^2)^{-1} = 1 - r^2 + ..., so the Hessian is -2 I.
        assert!((jet.hess[0] + 2.0).abs() < 1e-14 && jet.hess[1] == 0.0);
    }
}
