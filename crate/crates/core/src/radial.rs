//! Exact calculus on the span of `r^p (1+r^2)^{-q}` with integer `p` and
//! half-integer `q`.
//!
//! A [`RadialSum`] is kept in canonical form: terms are split into two
//! classes by the parity of `2q` (the classes are linearly independent since
//! `sqrt(1+r^2)` is not rational in `r`), every term of a class shares the
//! class's largest `q`, and the common factor `(1+r^2)` is divided out of
//! the numerator whenever it divides it exactly. Two sums represent the same
//! function iff their canonical forms are identical, so the zero test is a
//! finite polynomial identity check.

use std::collections::BTreeMap;
use std::fmt;

use num::rational::Ratio;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `coeff * r^p * (1+r^2)^{-q2/2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialTerm {
    pub coeff: BigRational,
    pub p: i32,
    /// Twice the power of `(1+r^2)` in the denominator.
    pub q2: i32,
}

impl RadialTerm {
    pub fn new(coeff: BigRational, p: i32, q2: i32) -> Self {
        Self { coeff, p, q2 }
    }

    pub fn q(&self) -> Ratio<i64> {
        Ratio::new(self.q2 as i64, 2)
    }
}

/// Exact linear combination of [`RadialTerm`]s in ambient dimension `dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialSum {
    dim: u32,
    terms: Vec<RadialTerm>,
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn binomial(n: i64, k: i64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

impl RadialSum {
    pub fn zero(dim: u32) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn new(dim: u32, terms: Vec<RadialTerm>) -> Self {
        let mut s = Self { dim, terms };
        s.canonicalize();
        s
    }

    /// Single term `coeff * r^p * (1+r^2)^{-q2/2}`.
    pub fn term(dim: u32, coeff: BigRational, p: i32, q2: i32) -> Self {
        Self::new(dim, vec![RadialTerm::new(coeff, p, q2)])
    }

    /// `r^p`.
    pub fn power(dim: u32, p: i32) -> Self {
        Self::term(dim, BigRational::one(), p, 0)
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn terms(&self) -> &[RadialTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True if every term has `p >= 0`, so the sum may be evaluated at `r = 0`.
    pub fn regular_at_origin(&self) -> bool {
        self.terms.iter().all(|t| t.p >= 0)
    }

    fn canonicalize(&mut self) {
        let mut classes: BTreeMap<i32, Vec<RadialTerm>> = BTreeMap::new();
        for t in self.terms.drain(..) {
            if !t.coeff.is_zero() {
                classes.entry(t.q2.rem_euclid(2)).or_default().push(t);
            }
        }
        let mut out = Vec::new();
        for (_, class) in classes {
            let top = class.iter().map(|t| t.q2).max().expect("nonempty class");
            let mut poly: BTreeMap<i32, BigRational> = BTreeMap::new();
            for t in class {
                let d = ((top - t.q2) / 2) as i64;
                for j in 0..=d {
                    let c = &t.coeff * BigRational::from_integer(binomial(d, j));
                    *poly.entry(t.p + 2 * j as i32).or_insert_with(BigRational::zero) += c;
                }
            }
            poly.retain(|_, c| !c.is_zero());
            if poly.is_empty() {
                continue;
            }
            let (poly, top) = reduce_by_one_plus_r2(poly, top);
            out.extend(
                poly.into_iter()
                    .map(|(p, coeff)| RadialTerm { coeff, p, q2: top }),
            );
        }
        self.terms = out;
    }

    pub fn add(&self, other: &RadialSum) -> RadialSum {
        debug_assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        RadialSum::new(self.dim, terms)
    }

    pub fn sub(&self, other: &RadialSum) -> RadialSum {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> RadialSum {
        let terms = self
            .terms
            .iter()
            .map(|t| RadialTerm::new(&t.coeff * c, t.p, t.q2))
            .collect();
        RadialSum::new(self.dim, terms)
    }

    /// Multiplies by `r^k`.
    pub fn mul_r_pow(&self, k: i32) -> RadialSum {
        let terms = self
            .terms
            .iter()
            .map(|t| RadialTerm::new(t.coeff.clone(), t.p + k, t.q2))
            .collect();
        RadialSum::new(self.dim, terms)
    }

    pub fn mul(&self, other: &RadialSum) -> RadialSum {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(RadialTerm::new(&a.coeff * &b.coeff, a.p + b.p, a.q2 + b.q2));
            }
        }
        RadialSum::new(self.dim, terms)
    }

    /// Exact `d/dr`.
    pub fn derivative(&self) -> RadialSum {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.p != 0 {
                terms.push(RadialTerm::new(&t.coeff * int(t.p as i64), t.p - 1, t.q2));
            }
            if t.q2 != 0 {
                terms.push(RadialTerm::new(
                    &t.coeff * int(-(t.q2 as i64)),
                    t.p + 1,
                    t.q2 + 2,
                ));
            }
        }
        RadialSum::new(self.dim, terms)
    }

    /// Exact radial Laplacian `f'' + (N-1)/r f'`, valid away from `r = 0`.
    pub fn laplacian(&self) -> RadialSum {
        let d1 = self.derivative();
        let d2 = d1.derivative();
        d2.add(&d1.mul_r_pow(-1).scale(&int(self.dim as i64 - 1)))
    }

    /// `(-Δ)^j f`.
    pub fn neg_laplacian_pow(&self, j: u32) -> RadialSum {
        let mut f = self.clone();
        for _ in 0..j {
            f = f.laplacian().scale(&int(-1));
        }
        f
    }

    /// Infinitesimal generator of `f -> λ^w f(λ r)` at `λ = 1`: `w f + r f'`.
    pub fn dilation_generator(&self, weight: &BigRational) -> RadialSum {
        self.scale(weight).add(&self.derivative().mul_r_pow(1))
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.numeric().eval(r)
    }

    pub fn numeric(&self) -> RadialFn {
        RadialFn::from_sum(self)
    }
}

/// Divides the numerator by `(1+r^2)` while the division is exact.
fn reduce_by_one_plus_r2(
    poly: BTreeMap<i32, BigRational>,
    mut top: i32,
) -> (BTreeMap<i32, BigRational>, i32) {
    let pmin = *poly.keys().next().unwrap();
    let pmax = *poly.keys().next_back().unwrap();
    let mut dense: Vec<BigRational> = (pmin..=pmax)
        .map(|p| poly.get(&p).cloned().unwrap_or_else(BigRational::zero))
        .collect();
    loop {
        if dense.len() < 3 {
            break;
        }
        let mut rem = dense.clone();
        let mut quot = vec![BigRational::zero(); dense.len() - 2];
        for i in (2..rem.len()).rev() {
            let c = rem[i].clone();
            if !c.is_zero() {
                rem[i - 2] -= &c;
                rem[i] = BigRational::zero();
                quot[i - 2] = c;
            }
        }
        if rem[0].is_zero() && rem[1].is_zero() {
            dense = quot;
            top -= 2;
        } else {
            break;
        }
    }
    let out = dense
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (pmin + i as i32, c))
        .collect();
    (out, top)
}

impl fmt::Display for RadialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", t.coeff)?;
            if t.p != 0 {
                write!(f, " r^{}", t.p)?;
            }
            if t.q2 != 0 {
                if t.q2 % 2 == 0 {
                    write!(f, " (1+r^2)^({})", -t.q2 / 2)?;
                } else {
                    write!(f, " (1+r^2)^({}/2)", -t.q2)?;
                }
            }
        }
        Ok(())
    }
}

/// Floating-point image of a [`RadialSum`] for fast evaluation.
#[derive(Debug, Clone, Default)]
pub struct RadialFn {
    classes: Vec<NumericClass>,
}

#[derive(Debug, Clone)]
struct NumericClass {
    q2: i32,
    pmin: i32,
    coeffs: Vec<f64>,
}

impl RadialFn {
    fn from_sum(s: &RadialSum) -> Self {
        let mut classes: Vec<NumericClass> = Vec::new();
        for t in &s.terms {
            let c = t.coeff.to_f64().unwrap_or(f64::NAN);
            match classes.iter_mut().find(|cl| cl.q2 == t.q2) {
                Some(cl) => {
                    let idx = (t.p - cl.pmin) as usize;
                    if idx >= cl.coeffs.len() {
                        cl.coeffs.resize(idx + 1, 0.0);
                    }
                    cl.coeffs[idx] = c;
                }
                None => classes.push(NumericClass {
                    q2: t.q2,
                    pmin: t.p,
                    coeffs: vec![c],
                }),
            }
        }
        Self { classes }
    }

    pub fn is_zero(&self) -> bool {
        self.classes.is_empty()
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let s = 1.0 + r * r;
        let mut total = 0.0;
        for cl in &self.classes {
            let mut acc = 0.0;
            for c in cl.coeffs.iter().rev() {
                acc = acc * r + c;
            }
            let denom = if cl.q2 % 2 == 0 {
                s.powi(-cl.q2 / 2)
            } else {
                s.powi(-(cl.q2 + 1) / 2) * s.sqrt()
            };
            total += acc * r.powi(cl.pmin) * denom;
        }
        total
    }
}

/// `C̃_m = (Π_{h=-m}^{m-1} (N + 2h))^{(N-2m)/(4m)}`, kept as base and exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BubbleConstant {
    pub base: BigInt,
    pub exponent: Ratio<i64>,
}

impl BubbleConstant {
    pub fn value(&self) -> f64 {
        let b = self.base.to_f64().unwrap_or(f64::NAN);
        b.powf(*self.exponent.numer() as f64 / *self.exponent.denom() as f64)
    }

    /// `C̃_m^t` as a float.
    pub fn powf(&self, t: f64) -> f64 {
        let b = self.base.to_f64().unwrap_or(f64::NAN);
        b.powf(t * *self.exponent.numer() as f64 / *self.exponent.denom() as f64)
    }
}

fn check_gap(m: u32, n: u32) -> Result<()> {
    if m == 0 || n <= 2 * m {
        return Err(Error::Precondition(format!(
            "bubble profile needs N > 2m, got N = {n}, m = {m}"
        )));
    }
    Ok(())
}

/// Product `Π_{h=-m}^{m-1} (N+2h)`, which equals `C̃_m^{m*-2}`.
pub fn bubble_product(m: u32, n: u32) -> BigInt {
    (-(m as i64)..m as i64)
        .map(|h| BigInt::from(n as i64 + 2 * h))
        .product()
}

pub fn bubble_constant(m: u32, n: u32) -> Result<BubbleConstant> {
    check_gap(m, n)?;
    Ok(BubbleConstant {
        base: bubble_product(m, n),
        exponent: Ratio::new(n as i64 - 2 * m as i64, 4 * m as i64),
    })
}

/// `U_{0,1} / C̃_m = (1+r^2)^{-(N-2m)/2}`.
pub fn bubble_profile(m: u32, n: u32) -> Result<RadialSum> {
    check_gap(m, n)?;
    Ok(RadialSum::term(n, BigRational::one(), 0, (n - 2 * m) as i32))
}

/// `((-Δ)^m U_{0,1} - U_{0,1}^{m*-1}) / C̃_m` as an exact sum.
///
/// Since `C̃_m^{m*-2}` is the integer [`bubble_product`], the residual is
/// rational and must vanish identically.
pub fn verify_bubble_pde(m: u32, n: u32) -> Result<RadialSum> {
    verify_bubble_pde_perturbed(m, n, &BigRational::zero())
}

/// Same as [`verify_bubble_pde`] with the nonlinearity coefficient shifted
/// by `delta`; a negative control for the exact zero test.
pub fn verify_bubble_pde_perturbed(m: u32, n: u32, delta: &BigRational) -> Result<RadialSum> {
    let u = bubble_profile(m, n)?;
    let lhs = u.neg_laplacian_pow(m);
    let coeff = BigRational::from_integer(bubble_product(m, n)) + delta;
    let rhs = RadialSum::term(n, coeff, 0, (n + 2 * m) as i32);
    Ok(lhs.sub(&rhs))
}

/// Coefficients `α_i = binom(-(N-2m)/2, i)`, `i < count`, of the large-`r`
/// expansion `U/C̃_m = Σ α_i r^{-(N-2m+2i)}`.
pub fn farfield_coefficients(m: u32, n: u32, count: u32) -> Result<Vec<BigRational>> {
    check_gap(m, n)?;
    if count > m {
        return Err(Error::Precondition(format!(
            "requested {count} far-field coefficients but only the first m = {m} terms are m-harmonic"
        )));
    }
    let h = rat(n as i64 - 2 * m as i64, 2);
    let mut out = Vec::with_capacity(count as usize);
    let mut acc = BigRational::one();
    for i in 0..count as i64 {
        if i > 0 {
            acc = acc * (-&h - int(i - 1)) / int(i);
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// `c'_m` with `(-Δ)^{m-1} r^{2m-N} = c'_m r^{2-N}`.
pub fn polyharmonic_constant(m: u32, n: u32) -> Result<BigRational> {
    check_gap(m, n)?;
    let f = RadialSum::power(n, 2 * m as i32 - n as i32).neg_laplacian_pow(m - 1);
    match f.terms() {
        [t] if t.p == 2 - n as i32 && t.q2 == 0 => Ok(t.coeff.clone()),
        _ => Err(Error::Algebra(format!(
            "(-Δ)^{} r^{} is not a multiple of r^{}: {f}",
            m - 1,
            2 * m as i32 - n as i32,
            2 - n as i32
        ))),
    }
}

pub fn is_positive(x: &BigRational) -> bool {
    x.is_positive()
}
