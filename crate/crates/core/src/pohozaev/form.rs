//! Boundary forms `f_{m,i}(u, v)` and `g_m(u, v)` as lists of contraction
//! patterns, generated by the integration-by-parts recursion.
//!
//! Each term is `c(N) · F_u · F_v · W`, where `F_u` is a derivative pattern
//! applied to `(-Δ)^j u`, `F_v` likewise for `v`, and `W` is a geometric
//! weight. The two `Grad` patterns contract with each other.

use std::fmt;

use num::{BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::radial::{int, rat};

/// Derivative pattern applied to one argument; `ν` is the outward normal,
/// `p = y - x` the position relative to the form's center and `i` the
/// translation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deriv {
    /// `w`
    Value,
    /// `∂_ν w`
    Normal,
    /// `∂_i w`
    Partial,
    /// `⟨p, ∇w⟩`
    Radial,
    /// `∂_ν ∂_i w`
    NormalPartial,
    /// `⟨p, ∇ ∂_ν w⟩ = pᵀ (∇²w) ν`
    PositionNormal,
    /// `∇w`, contracted with the other argument's gradient
    Grad,
}

impl Deriv {
    pub fn order(self) -> u32 {
        match self {
            Deriv::Value => 0,
            Deriv::Normal | Deriv::Partial | Deriv::Radial | Deriv::Grad => 1,
            Deriv::NormalPartial | Deriv::PositionNormal => 2,
        }
    }

    /// Whether the pattern carries a factor of `y - x`.
    pub fn positional(self) -> bool {
        matches!(self, Deriv::Radial | Deriv::PositionNormal)
    }
}

/// `deriv` applied to `(-Δ)^lap` of the argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub lap: u32,
    pub deriv: Deriv,
}

impl Factor {
    pub const fn new(lap: u32, deriv: Deriv) -> Self {
        Self { lap, deriv }
    }

    /// Total derivative order on the raw argument.
    pub fn order(&self) -> u32 {
        2 * self.lap + self.deriv.order()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    One,
    /// `ν_i`
    NormalComponent,
    /// `⟨y - x, ν⟩`
    PositionNormal,
}

/// Term families of the decomposition: translation terms `l_{j,i}`,
/// dilation terms with a `y - x` factor `l̄_j`, and the remaining `l̃_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Translation,
    DilationBar,
    DilationTilde,
}

/// Coefficient `constant + slope · N`, exact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Affine {
    pub constant: BigRational,
    pub slope: BigRational,
}

impl Affine {
    pub fn constant(c: BigRational) -> Self {
        Self {
            constant: c,
            slope: BigRational::zero(),
        }
    }

    /// `s (N - shift)`.
    pub fn n_minus(shift: i64, s: BigRational) -> Self {
        Self {
            constant: -&s * int(shift),
            slope: s,
        }
    }

    pub fn eval(&self, n: u32) -> f64 {
        (&self.constant + &self.slope * int(n as i64)).to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero_at(&self, n: u32) -> bool {
        (&self.constant + &self.slope * int(n as i64)).is_zero()
    }

    fn neg(&self) -> Self {
        Self {
            constant: -&self.constant,
            slope: -&self.slope,
        }
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.constant.is_zero(), self.slope.is_zero()) {
            (_, true) => write!(f, "{}", self.constant),
            (true, false) => write!(f, "({})N", self.slope),
            (false, false) => write!(f, "({})N + {}", self.slope, self.constant),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PohozaevTerm {
    pub coeff: Affine,
    pub u: Factor,
    pub v: Factor,
    pub weight: Weight,
}

impl PohozaevTerm {
    pub fn new(coeff: Affine, u: Factor, v: Factor, weight: Weight) -> Self {
        Self { coeff, u, v, weight }
    }

    pub fn kind(&self) -> TermKind {
        let positional =
            self.u.deriv.positional() || self.v.deriv.positional() || self.weight == Weight::PositionNormal;
        if self.u.deriv == Deriv::Partial
            || self.v.deriv == Deriv::Partial
            || self.u.deriv == Deriv::NormalPartial
            || self.v.deriv == Deriv::NormalPartial
            || self.weight == Weight::NormalComponent
        {
            TermKind::Translation
        } else if positional {
            TermKind::DilationBar
        } else {
            TermKind::DilationTilde
        }
    }

    /// `(order on u, order on v)`.
    pub fn orders(&self) -> (u32, u32) {
        (self.u.order(), self.v.order())
    }

    fn swapped(&self) -> Self {
        Self::new(self.coeff.clone(), self.v, self.u, self.weight)
    }

    fn shifted(&self) -> Self {
        Self::new(
            self.coeff.clone(),
            Factor::new(self.u.lap + 1, self.u.deriv),
            Factor::new(self.v.lap + 1, self.v.deriv),
            self.weight,
        )
    }
}

impl fmt::Display for PohozaevTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} · {:?}[(-Δ)^{} u] · {:?}[(-Δ)^{} v] · {:?}",
            self.coeff, self.u.deriv, self.u.lap, self.v.deriv, self.v.lap, self.weight
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum Variant {
    /// Translation form; the index is 0-based.
    F { i: usize },
    /// Dilation form about a center supplied at evaluation.
    G,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevForm {
    pub m: u32,
    pub variant: Variant,
    pub terms: Vec<PohozaevTerm>,
}

impl PohozaevForm {
    /// Highest Laplacian level any term needs.
    pub fn max_level(&self) -> u32 {
        self.terms.iter().map(|t| t.u.lap.max(t.v.lap)).max().unwrap_or(0)
    }

    /// Terms sorted into a canonical order, for multiset comparison.
    pub fn sorted_terms(&self) -> Vec<PohozaevTerm> {
        let mut t = self.terms.clone();
        t.sort();
        t
    }
}

fn t(c: Affine, u: Factor, v: Factor, w: Weight) -> PohozaevTerm {
    PohozaevTerm::new(c, u, v, w)
}

fn one() -> Affine {
    Affine::constant(int(1))
}

fn minus_one() -> Affine {
    Affine::constant(int(-1))
}

/// Adds `term` and its `u ↔ v` mirror.
fn sym(out: &mut Vec<PohozaevTerm>, term: PohozaevTerm) {
    out.push(term.swapped());
    out.push(term);
}

/// Translation-form terms for `m >= 0`; `m = 0` is `u v ν_i`.
fn f_terms(m: u32) -> Vec<PohozaevTerm> {
    use Deriv::*;
    match m {
        0 => vec![t(one(), Factor::new(0, Value), Factor::new(0, Value), Weight::NormalComponent)],
        1 => {
            let mut out = Vec::new();
            sym(&mut out, t(minus_one(), Factor::new(0, Normal), Factor::new(0, Partial), Weight::One));
            out.push(t(one(), Factor::new(0, Grad), Factor::new(0, Grad), Weight::NormalComponent));
            out
        }
        _ => {
            let top = m - 1;
            let mut out = Vec::new();
            sym(&mut out, t(minus_one(), Factor::new(top, Normal), Factor::new(0, Partial), Weight::One));
            sym(&mut out, t(one(), Factor::new(top, Value), Factor::new(0, NormalPartial), Weight::One));
            out.extend(f_terms(m - 2).iter().map(PohozaevTerm::shifted));
            out
        }
    }
}

/// Dilation-form terms for `m >= 0`; `m = 0` is `⟨y-x, ν⟩ u v`.
fn g_terms(m: u32) -> Vec<PohozaevTerm> {
    use Deriv::*;
    match m {
        0 => vec![t(one(), Factor::new(0, Value), Factor::new(0, Value), Weight::PositionNormal)],
        1 => {
            let mut out = Vec::new();
            sym(&mut out, t(minus_one(), Factor::new(0, Normal), Factor::new(0, Radial), Weight::One));
            out.push(t(one(), Factor::new(0, Grad), Factor::new(0, Grad), Weight::PositionNormal));
            sym(
                &mut out,
                t(Affine::n_minus(2, rat(-1, 2)), Factor::new(0, Normal), Factor::new(0, Value), Weight::One),
            );
            out
        }
        _ => {
            let top = m - 1;
            let gap = 2 * m as i64;
            let half = Affine::n_minus(gap, rat(1, 2));
            let mut out = Vec::new();
            sym(&mut out, t(minus_one(), Factor::new(top, Normal), Factor::new(0, Radial), Weight::One));
            sym(&mut out, t(one(), Factor::new(top, Value), Factor::new(0, PositionNormal), Weight::One));
            sym(&mut out, t(one(), Factor::new(top, Value), Factor::new(0, Normal), Weight::One));
            sym(&mut out, t(half.clone(), Factor::new(top, Value), Factor::new(0, Normal), Weight::One));
            sym(&mut out, t(half.neg(), Factor::new(top, Normal), Factor::new(0, Value), Weight::One));
            out.extend(g_terms(m - 2).iter().map(PohozaevTerm::shifted));
            out
        }
    }
}

/// `f_{m,i}` with `L_{1,i}(u, v) = ∫_∂Ω f_{m,i}(u, v)`; `i` is 0-based.
pub fn build_f(m: u32, i: usize) -> PohozaevForm {
    assert!(m >= 1, "build_f needs m >= 1");
    PohozaevForm {
        m,
        variant: Variant::F { i },
        terms: f_terms(m),
    }
}

/// `g_m` with `L_2(u, v) = ∫_∂Ω g_m(u, v) - (N-2m)/2 ∫_Ω (v(-Δ)^m u + u(-Δ)^m v)`.
pub fn build_g(m: u32) -> PohozaevForm {
    assert!(m >= 1, "build_g needs m >= 1");
    PohozaevForm {
        m,
        variant: Variant::G,
        terms: g_terms(m),
    }
}

/// The term `-(N-2m)/2 ∂_ν((-Δ)^{m-1} u) v` that carries all the
/// singular mass of `r^{2m-N}` against a smooth partner.
pub fn tilde_top(m: u32) -> PohozaevTerm {
    t(
        Affine::n_minus(2 * m as i64, rat(-1, 2)),
        Factor::new(m - 1, Deriv::Normal),
        Factor::new(0, Deriv::Value),
        Weight::One,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use Deriv::*;

    fn f(l: u32, d: Deriv) -> Factor {
        Factor::new(l, d)
    }

    fn sorted(mut v: Vec<PohozaevTerm>) -> Vec<PohozaevTerm> {
        v.sort();
        v
    }

    #[test]
    fn f1_matches_three_term_form() {
        // -(∂_ν u ∂_i v + ∂_ν v ∂_i u) + ⟨∇u, ∇v⟩ ν_i
        let golden = vec![
            t(minus_one(), f(0, Normal), f(0, Partial), Weight::One),
            t(minus_one(), f(0, Partial), f(0, Normal), Weight::One),
            t(one(), f(0, Grad), f(0, Grad), Weight::NormalComponent),
        ];
        assert_eq!(build_f(1, 0).sorted_terms(), sorted(golden));
    }

    #[test]
    fn f2_matches_five_term_form() {
        // -(∂_ν(-Δu) ∂_i v + sym) + ((-Δu) ⟨ν, ∇∂_i v⟩ + sym) + Δu Δv ν_i
        let golden = vec![
            t(minus_one(), f(1, Normal), f(0, Partial), Weight::One),
            t(minus_one(), f(0, Partial), f(1, Normal), Weight::One),
            t(one(), f(1, Value), f(0, NormalPartial), Weight::One),
            t(one(), f(0, NormalPartial), f(1, Value), Weight::One),
            t(one(), f(1, Value), f(1, Value), Weight::NormalComponent),
        ];
        let form = build_f(2, 3);
        assert_eq!(form.terms.len(), 5);
        assert_eq!(form.sorted_terms(), sorted(golden));
    }

    #[test]
    fn g1_matches_closed_form() {
        let half = Affine::n_minus(2, rat(-1, 2));
        let golden = vec![
            t(minus_one(), f(0, Normal), f(0, Radial), Weight::One),
            t(minus_one(), f(0, Radial), f(0, Normal), Weight::One),
            t(one(), f(0, Grad), f(0, Grad), Weight::PositionNormal),
            t(half.clone(), f(0, Normal), f(0, Value), Weight::One),
            t(half, f(0, Value), f(0, Normal), Weight::One),
        ];
        assert_eq!(build_g(1).sorted_terms(), sorted(golden));
    }

    #[test]
    fn g2_matches_closed_form() {
        // Written out from the m = 2 identity: the (N-4)/2 block is
        // -(N-4)/2 (∂_ν u Δv - u ∂_ν Δv + ∂_ν v Δu - v ∂_ν Δu), i.e. in
        // terms of (-Δ): +(N-4)/2 ∂_ν u (-Δv) - (N-4)/2 u ∂_ν(-Δv) + sym.
        let p = Affine::n_minus(4, rat(1, 2));
        let golden = vec![
            t(minus_one(), f(1, Normal), f(0, Radial), Weight::One),
            t(minus_one(), f(0, Radial), f(1, Normal), Weight::One),
            t(one(), f(1, Value), f(0, PositionNormal), Weight::One),
            t(one(), f(0, PositionNormal), f(1, Value), Weight::One),
            t(one(), f(1, Value), f(0, Normal), Weight::One),
            t(one(), f(0, Normal), f(1, Value), Weight::One),
            t(one(), f(1, Value), f(1, Value), Weight::PositionNormal),
            t(p.clone(), f(0, Normal), f(1, Value), Weight::One),
            t(p.neg(), f(0, Value), f(1, Normal), Weight::One),
            t(p.clone(), f(1, Value), f(0, Normal), Weight::One),
            t(p.neg(), f(1, Normal), f(0, Value), Weight::One),
        ];
        assert_eq!(build_g(2).sorted_terms(), sorted(golden));
    }

    #[test]
    fn orders_follow_decomposition_shape() {
        for m in 1..=5 {
            for term in &build_f(m, 0).terms {
                let (a, b) = term.orders();
                assert_eq!(a + b, 2 * m, "{term}");
                assert!((1..=2 * m - 1).contains(&a), "{term}");
                assert_eq!(term.kind(), TermKind::Translation);
            }
            for term in &build_g(m).terms {
                let (a, b) = term.orders();
                match term.kind() {
                    TermKind::DilationBar => assert_eq!(a + b, 2 * m, "{term}"),
                    TermKind::DilationTilde => assert_eq!(a + b, 2 * m - 1, "{term}"),
                    TermKind::Translation => panic!("translation term in g: {term}"),
                }
            }
        }
    }

    #[test]
    fn top_tilde_term_is_present_for_every_m() {
        for m in 1..=6 {
            let top = tilde_top(m);
            let g = build_g(m);
            let hits: Vec<_> = g.terms.iter().filter(|x| x.u == top.u && x.v == top.v).collect();
            assert_eq!(hits.len(), 1, "m = {m}");
            assert_eq!(hits[0], &top);
            // It is the only term putting 2m-1 derivatives on u and none on v.
            let others = g
                .terms
                .iter()
                .filter(|x| x.orders() == (2 * m - 1, 0) && *x != &top)
                .count();
            assert_eq!(others, 0);
        }
    }

    #[test]
    fn forms_are_symmetric_in_u_and_v() {
        for m in 1..=5 {
            for form in [build_f(m, 0), build_g(m)] {
                let mirrored: Vec<_> = form.terms.iter().map(PohozaevTerm::swapped).collect();
                assert_eq!(sorted(mirrored), form.sorted_terms());
            }
        }
    }
}
