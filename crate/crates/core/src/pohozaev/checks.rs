//! Numerical verification of the boundary identities.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fields::{Field, Jet, RadialField, ScaledField, SumField};
use super::form::{build_f, build_g, Deriv, Factor, PohozaevForm, PohozaevTerm, Variant, Weight};
use crate::error::{Error, Result};
use crate::quadrature::{sphere_area, BallRule, SphereRule};
use crate::radial::{bubble_constant, farfield_coefficients, polyharmonic_constant, rat, RadialSum};
use num::ToPrimitive;

/// Sphere and ball rules of a common angular degree.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub sphere: SphereRule,
    pub ball: BallRule,
}

impl Quadrature {
    pub fn new(dim: usize, degree: usize, radial_nodes: usize) -> Self {
        let ball = BallRule::new(dim, degree, radial_nodes);
        Self {
            sphere: ball.sphere().clone(),
            ball,
        }
    }
}

/// Per-node data for one argument: jets of every needed level plus the
/// Hessian applied to `ν`.
struct Side {
    jets: Vec<Jet>,
    hnu: Vec<Vec<f64>>,
}

impl Side {
    fn new(dim: usize, levels: u32) -> Self {
        Self {
            jets: (0..=levels).map(|_| Jet::zeros(dim)).collect(),
            hnu: (0..=levels).map(|_| vec![0.0; dim]).collect(),
        }
    }

    fn fill(&mut self, field: &dyn Field, y: &[f64], nu: &[f64]) {
        let n = y.len();
        for (level, (jet, hnu)) in self.jets.iter_mut().zip(self.hnu.iter_mut()).enumerate() {
            jet.clear();
            field.accumulate(level as u32, y, 2, jet);
            for a in 0..n {
                hnu[a] = (0..n).map(|b| jet.hess[a * n + b] * nu[b]).sum();
            }
        }
    }
}

enum FactorValue<'a> {
    Scalar(f64),
    PerIndex(&'a [f64]),
    Grad(&'a [f64]),
}

fn factor_value<'a>(f: &Factor, side: &'a Side, nu: &[f64], p: &[f64]) -> FactorValue<'a> {
    let jet = &side.jets[f.lap as usize];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    match f.deriv {
        Deriv::Value => FactorValue::Scalar(jet.value),
        Deriv::Normal => FactorValue::Scalar(dot(&jet.grad, nu)),
        Deriv::Radial => FactorValue::Scalar(dot(&jet.grad, p)),
        Deriv::PositionNormal => FactorValue::Scalar(dot(&side.hnu[f.lap as usize], p)),
        Deriv::Partial => FactorValue::PerIndex(&jet.grad),
        Deriv::NormalPartial => FactorValue::PerIndex(&side.hnu[f.lap as usize]),
        Deriv::Grad => FactorValue::Grad(&jet.grad),
    }
}

/// Writes the term's value for every component into `out`
/// (`N` components for the translation form, one for the dilation form).
fn term_values(term: &PohozaevTerm, c: f64, u: &Side, v: &Side, nu: &[f64], p: &[f64], out: &mut [f64]) {
    let a = factor_value(&term.u, u, nu, p);
    let b = factor_value(&term.v, v, nu, p);
    let weight = |i: usize| match term.weight {
        Weight::One => 1.0,
        Weight::NormalComponent => nu[i],
        Weight::PositionNormal => p.iter().zip(nu).map(|(x, y)| x * y).sum(),
    };
    for (i, o) in out.iter_mut().enumerate() {
        let ab = match (&a, &b) {
            (FactorValue::Grad(x), FactorValue::Grad(y)) => x.iter().zip(y.iter()).map(|(s, t)| s * t).sum(),
            (FactorValue::Grad(_), _) | (_, FactorValue::Grad(_)) => {
                unreachable!("gradient patterns always come in contracted pairs")
            }
            _ => pick(&a, i) * pick(&b, i),
        };
        *o = c * ab * weight(i);
    }
}

fn pick(f: &FactorValue, i: usize) -> f64 {
    match f {
        FactorValue::Scalar(x) => *x,
        FactorValue::PerIndex(v) => v[i],
        FactorValue::Grad(_) => unreachable!(),
    }
}

/// Surface integral of a form, split per term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIntegral {
    /// One entry per component.
    pub values: Vec<f64>,
    /// `[component][term]` signed integrals.
    pub term_values: Vec<Vec<f64>>,
    /// `Σ_terms ∫ |term|` per component.
    pub scale: Vec<f64>,
}

fn components(form: &PohozaevForm, n: usize) -> usize {
    match form.variant {
        Variant::F { .. } => n,
        Variant::G => 1,
    }
}

/// `∫_{∂B_radius(center)} form(u, v)`. A translation form is evaluated for
/// every index `i` at once; `x` is the center of the dilation form.
pub fn surface_integral(
    form: &PohozaevForm,
    u: &dyn Field,
    v: &dyn Field,
    center: &[f64],
    radius: f64,
    x: &[f64],
    sphere: &SphereRule,
) -> Result<SurfaceIntegral> {
    let mut all = surface_integrals(&[form], u, v, center, radius, x, sphere)?;
    Ok(all.remove(0))
}

/// [`surface_integral`] for several forms sharing one pass over the nodes.
pub fn surface_integrals(
    forms: &[&PohozaevForm],
    u: &dyn Field,
    v: &dyn Field,
    center: &[f64],
    radius: f64,
    x: &[f64],
    sphere: &SphereRule,
) -> Result<Vec<SurfaceIntegral>> {
    let n = center.len();
    let levels = forms.iter().map(|f| f.max_level()).max().unwrap_or(0);
    check_fields(levels, n, u, v)?;
    // Per form: component count, term count and offset into the output.
    let mut layout = Vec::with_capacity(forms.len());
    let mut width = 0;
    for form in forms {
        let comps = components(form, n);
        let nt = form.terms.len();
        layout.push((comps, nt, width));
        width += comps * (1 + 2 * nt);
    }
    let coeffs: Vec<Vec<f64>> = forms
        .iter()
        .map(|f| f.terms.iter().map(|t| t.coeff.eval(n as u32)).collect())
        .collect();
    let raw = sphere.integrate_vec_radius(
        radius,
        width,
        || (Side::new(n, levels), Side::new(n, levels), vec![0.0; n], vec![0.0; n], vec![0.0; n]),
        |(su, sv, y, p, buf), w, out| {
            for k in 0..n {
                y[k] = center[k] + radius * w[k];
                p[k] = y[k] - x[k];
            }
            su.fill(u, y, w);
            sv.fill(v, y, w);
            for (f, form) in forms.iter().enumerate() {
                let (comps, nt, offset) = layout[f];
                for (t, term) in form.terms.iter().enumerate() {
                    term_values(term, coeffs[f][t], su, sv, w, p, &mut buf[..comps]);
                    for c in 0..comps {
                        let base = offset + c * (1 + 2 * nt);
                        out[base] += buf[c];
                        out[base + 1 + t] = buf[c];
                        out[base + 1 + nt + t] = buf[c].abs();
                    }
                }
            }
        },
    );
    let mut all = Vec::with_capacity(forms.len());
    for &(comps, nt, offset) in &layout {
        let mut out = SurfaceIntegral {
            values: Vec::with_capacity(comps),
            term_values: Vec::with_capacity(comps),
            scale: Vec::with_capacity(comps),
        };
        for c in 0..comps {
            let base = offset + c * (1 + 2 * nt);
            out.values.push(raw[base]);
            out.term_values.push(raw[base + 1..base + 1 + nt].to_vec());
            out.scale.push(raw[base + 1 + nt..base + 1 + 2 * nt].iter().sum());
        }
        if out.values.iter().chain(out.scale.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("surface integral".into()));
        }
        all.push(out);
    }
    Ok(all)
}

fn check_fields(levels: u32, n: usize, u: &dyn Field, v: &dyn Field) -> Result<()> {
    if u.dim() != n || v.dim() != n {
        return Err(Error::Precondition("field dimension does not match the sphere".into()));
    }
    if u.max_level() < levels || v.max_level() < levels {
        return Err(Error::Precondition(format!(
            "fields must supply (-Δ)^j up to j = {levels}"
        )));
    }
    Ok(())
}

/// Volume sides of both identities over one ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeIntegral {
    /// `L_{1,i} = ∫ ((-Δ)^m u ∂_i v + (-Δ)^m v ∂_i u)`.
    pub l1: Vec<f64>,
    pub l1_abs: Vec<f64>,
    /// `L_2 = ∫ ((-Δ)^m u ⟨y-x, ∇v⟩ + (-Δ)^m v ⟨y-x, ∇u⟩)`.
    pub l2: f64,
    /// `∫ (v (-Δ)^m u + u (-Δ)^m v)`.
    pub pairing: f64,
    /// `∫ |L_2 integrand| + (N-2m)/2 ∫ |pairing integrand|`.
    pub l2_abs: f64,
}

pub fn volume_integral(
    m: u32,
    u: &dyn Field,
    v: &dyn Field,
    center: &[f64],
    radius: f64,
    x: &[f64],
    ball: &BallRule,
) -> Result<VolumeIntegral> {
    let n = center.len();
    check_fields(m, n, u, v)?;
    let half = (n as f64 - 2.0 * m as f64) / 2.0;
    let width = 2 * n + 3;
    let raw = ball.integrate_vec(
        radius,
        width,
        || (Jet::zeros(n), Jet::zeros(n), Jet::zeros(n), Jet::zeros(n), vec![0.0; n]),
        |(au, av, gu, gv, y), r, w, out| {
            for k in 0..n {
                y[k] = center[k] + r * w[k];
            }
            au.clear();
            av.clear();
            gu.clear();
            gv.clear();
            u.accumulate(m, y, 0, au);
            v.accumulate(m, y, 0, av);
            u.accumulate(0, y, 1, gu);
            v.accumulate(0, y, 1, gv);
            let (lu, lv) = (au.value, av.value);
            let mut rad_u = 0.0;
            let mut rad_v = 0.0;
            for i in 0..n {
                let t = lu * gv.grad[i] + lv * gu.grad[i];
                out[i] = t;
                out[n + i] = t.abs();
                let p = y[i] - x[i];
                rad_u += p * gu.grad[i];
                rad_v += p * gv.grad[i];
            }
            let l2 = lu * rad_v + lv * rad_u;
            let pairing = gv.value * lu + gu.value * lv;
            out[2 * n] = l2;
            out[2 * n + 1] = pairing;
            out[2 * n + 2] = l2.abs() + half.abs() * pairing.abs();
        },
    );
    Ok(VolumeIntegral {
        l1: raw[..n].to_vec(),
        l1_abs: raw[n..2 * n].to_vec(),
        l2: raw[2 * n],
        pairing: raw[2 * n + 1],
        l2_abs: raw[2 * n + 2],
    })
}

/// One identity check: `volume` against `surface`, normalized by the
/// termwise absolute `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub identity: String,
    pub volume: f64,
    pub surface: f64,
    pub scale: f64,
    pub rel_error: f64,
    pub largest_term: String,
    pub largest_term_value: f64,
}

impl RoundTrip {
    fn new(identity: String, volume: f64, surface: f64, scale: f64, form: &PohozaevForm, terms: &[f64]) -> Self {
        let (idx, val) = terms
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, v)| (i, *v))
            .unwrap_or((0, 0.0));
        Self {
            identity,
            volume,
            surface,
            scale,
            rel_error: (volume - surface).abs() / scale,
            largest_term: form.terms.get(idx).map(|t| t.to_string()).unwrap_or_default(),
            largest_term_value: val,
        }
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        if self.rel_error < tol {
            Ok(())
        } else {
            Err(Error::Algebra(format!(
                "{} failed: relative error {:e} >= {tol:e} (volume {:e}, surface {:e}, largest term {} = {:e})",
                self.identity, self.rel_error, self.volume, self.surface, self.largest_term, self.largest_term_value
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub m: u32,
    pub translation: Vec<RoundTrip>,
    pub dilation: RoundTrip,
}

impl RoundTripReport {
    pub fn max_rel_error(&self) -> f64 {
        self.translation
            .iter()
            .chain(std::iter::once(&self.dilation))
            .map(|r| r.rel_error)
            .fold(0.0, f64::max)
    }
}

/// Both divergence identities on `B_radius(center)`, with the dilation
/// form centered at `x`.
pub fn roundtrip(
    m: u32,
    u: &dyn Field,
    v: &dyn Field,
    center: &[f64],
    radius: f64,
    x: &[f64],
    quad: &Quadrature,
) -> Result<RoundTripReport> {
    let n = center.len();
    let vol = volume_integral(m, u, v, center, radius, x, &quad.ball)?;
    let f = build_f(m, 0);
    let g = build_g(m);
    let mut both = surface_integrals(&[&f, &g], u, v, center, radius, x, &quad.sphere)?;
    let sg = both.pop().expect("two forms");
    let sf = both.pop().expect("two forms");
    let translation = (0..n)
        .map(|i| {
            RoundTrip::new(
                format!("translation identity m={m} i={}", i + 1),
                vol.l1[i],
                sf.values[i],
                vol.l1_abs[i] + sf.scale[i],
                &f,
                &sf.term_values[i],
            )
        })
        .collect();
    let half = (n as f64 - 2.0 * m as f64) / 2.0;
    let dilation = RoundTrip::new(
        format!("dilation identity m={m}"),
        vol.l2,
        sg.values[0] - half * vol.pairing,
        vol.l2_abs + sg.scale[0],
        &g,
        &sg.term_values[0],
    );
    Ok(RoundTripReport { m, translation, dilation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub m: u32,
    /// `max_i |∫ f_{m,i}| / scale_i`.
    pub max_relative: f64,
    pub values: Vec<f64>,
    pub scales: Vec<f64>,
}

/// `∫_{∂B_radius(center)} f_{m,i}(u, v)` for fields radial about `center`.
pub fn radial_vanishing(
    m: u32,
    fu: &RadialSum,
    fv: &RadialSum,
    center: &[f64],
    radius: f64,
    sphere: &SphereRule,
) -> Result<VanishingReport> {
    let u = RadialField::new(fu, center.to_vec(), m);
    let v = RadialField::new(fv, center.to_vec(), m);
    let s = surface_integral(&build_f(m, 0), &u, &v, center, radius, center, sphere)?;
    let max_relative = s
        .values
        .iter()
        .zip(&s.scale)
        .map(|(a, b)| if *b > 0.0 { a.abs() / b } else { a.abs() })
        .fold(0.0, f64::max);
    Ok(VanishingReport {
        m,
        max_relative,
        values: s.values,
        scales: s.scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub m: u32,
    pub variant: String,
    pub radii: [f64; 2],
    pub values: [f64; 2],
    pub scales: [f64; 2],
    /// `|I_1 - I_2| / max(|I_1|, |I_2|)`.
    pub rel_difference: f64,
}

/// Compares a form on two concentric spheres for fields that are
/// `m`-harmonic in the annulus between them.
#[allow(clippy::too_many_arguments)]
pub fn transport(
    form: &PohozaevForm,
    component: usize,
    u: &dyn Field,
    v: &dyn Field,
    center: &[f64],
    radii: [f64; 2],
    x: &[f64],
    sphere: &SphereRule,
) -> Result<TransportReport> {
    let a = surface_integral(form, u, v, center, radii[0], x, sphere)?;
    let b = surface_integral(form, u, v, center, radii[1], x, sphere)?;
    let (ia, ib) = (a.values[component], b.values[component]);
    let denom = ia.abs().max(ib.abs());
    Ok(TransportReport {
        m: form.m,
        variant: match form.variant {
            Variant::F { .. } => format!("f_i, i={}", component + 1),
            Variant::G => "g".into(),
        },
        radii,
        values: [ia, ib],
        scales: [a.scale[component], b.scale[component]],
        rel_difference: if denom > 0.0 { (ia - ib).abs() / denom } else { 0.0 },
    })
}

/// Pairwise check of `∫ g_m(r^{-(N-2m+2h)}, r^{-(N-2m+2k)})` on two radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub h: u32,
    pub k: u32,
    pub exponent: f64,
    pub values: [f64; 2],
    pub scales: [f64; 2],
    /// `max |I(θ)| / scale(θ)`; the normalized constant of `θ^{-exponent}`.
    pub fitted_constant: f64,
    /// Deviation of `scale(θ_1)/scale(θ_2)` from `(θ_2/θ_1)^{exponent}`.
    pub homogeneity_error: f64,
    /// Every term vanishes pointwise, e.g. when both arguments are
    /// harmonic and the form only sees their Laplacians.
    pub identically_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VIdentityReport {
    pub n: u32,
    pub m: u32,
    pub mu: f64,
    /// `|∫ g_m(V, V)| / termwise scale`.
    pub self_pairing: f64,
    pub self_pairing_value: f64,
    pub self_pairing_scale: f64,
    pub pairs: Vec<PairCheck>,
    /// `∫_{∂B_δ} g_m(r^{2m-N}, R)`.
    pub mixed_surface: f64,
    /// `(N-2)(N-2m)/2 · c'_m · |S^{N-1}| · R(x_j)`.
    pub mixed_predicted: f64,
    pub mixed_rel_error: f64,
    /// `∫ g_m(r^{2m-N}, R) / Σ_i μ_i^{-(N-2m)/2} |x_j - x_i|^{2m-N}`, which should equal `B_m`.
    pub bm_recovered: f64,
    /// For `m = 1`: `-(N-2)/2 ∫ ∂_ν(r^{2-N}) R` computed directly.
    pub direct_normal_oracle: Option<f64>,
}

/// Checks the identities behind the height equation around one bubble
/// at the origin with height `mu`, against the tail
/// `R = Σ_i C̃_m μ_i^{-(N-2m)/2} |y - x_i|^{2m-N}` of `neighbours`.
pub fn verify_v_identities(
    n: u32,
    m: u32,
    mu: f64,
    neighbours: &[(Vec<f64>, f64)],
    radii: [f64; 2],
    sphere: &SphereRule,
) -> Result<VIdentityReport> {
    if sphere.dim() != n as usize {
        return Err(Error::Precondition("sphere rule dimension differs from N".into()));
    }
    let nn = n as usize;
    let origin = vec![0.0; nn];
    let gap = n as i32 - 2 * m as i32;
    let tilde_c = bubble_constant(m, n)?.value();
    let alpha = farfield_coefficients(m, n, m)?;
    let h = gap as f64 / 2.0;
    let g = build_g(m);
    let basis: Vec<RadialField> = (0..m)
        .map(|i| RadialField::new(&RadialSum::power(n, -(gap + 2 * i as i32)), origin.clone(), m))
        .collect();
    let coef: Vec<f64> = (0..m as usize)
        .map(|i| tilde_c * mu.powf(-h) * alpha[i].to_f64().unwrap_or(f64::NAN) * mu.powi(-2 * i as i32))
        .collect();

    let mut pairs = Vec::new();
    let mut self_value = 0.0;
    let mut self_scale = 0.0;
    for hh in 0..m {
        for kk in 0..m {
            let exponent = (gap + 2 * (hh + kk) as i32) as f64;
            let a = surface_integral(&g, &basis[hh as usize], &basis[kk as usize], &origin, radii[0], &origin, sphere)?;
            let b = surface_integral(&g, &basis[hh as usize], &basis[kk as usize], &origin, radii[1], &origin, sphere)?;
            let identically_zero = a.scale[0] == 0.0 && b.scale[0] == 0.0;
            let (fitted_constant, homogeneity_error) = if identically_zero {
                (0.0, 0.0)
            } else {
                let expected_ratio = (radii[1] / radii[0]).powf(exponent);
                (
                    (a.values[0].abs() / a.scale[0]).max(b.values[0].abs() / b.scale[0]),
                    ((a.scale[0] / b.scale[0]) / expected_ratio - 1.0).abs(),
                )
            };
            let w = coef[hh as usize] * coef[kk as usize];
            self_value += w * a.values[0];
            self_scale += w.abs() * a.scale[0];
            pairs.push(PairCheck {
                h: hh,
                k: kk,
                exponent,
                values: [a.values[0], b.values[0]],
                scales: [a.scale[0], b.scale[0]],
                fitted_constant,
                homogeneity_error,
                identically_zero,
            });
        }
    }

    let tail: Vec<Arc<dyn Field>> = neighbours
        .iter()
        .map(|(x, mu_i)| {
            let f = RadialField::new(&RadialSum::power(n, -gap), x.clone(), m);
            Arc::new(ScaledField::new(f, tilde_c * mu_i.powf(-h))) as Arc<dyn Field>
        })
        .collect();
    if tail.is_empty() {
        return Err(Error::Precondition("need at least one neighbouring bubble".into()));
    }
    let r_field = SumField::new(tail);
    let source = &basis[0];
    let mixed = surface_integral(&g, source, &r_field, &origin, radii[0], &origin, sphere)?;
    let cprime = polyharmonic_constant(m, n)?.to_f64().unwrap_or(f64::NAN);
    let nf = n as f64;
    let r_at_center = r_field.value(0, &origin);
    let mixed_predicted = (nf - 2.0) * (nf - 2.0 * m as f64) / 2.0 * cprime * sphere_area(n) * r_at_center;
    let interaction: f64 = neighbours
        .iter()
        .map(|(x, mu_i)| mu_i.powf(-h) * x.iter().map(|c| c * c).sum::<f64>().sqrt().powf(-(gap as f64)))
        .sum();
    let direct_normal_oracle = (m == 1).then(|| {
        // ∂_ν r^{2-N} = (2-N) δ^{1-N} on ∂B_δ.
        let d = radii[0];
        let mean = sphere.integrate(|w| {
            let y: Vec<f64> = w.iter().map(|c| d * c).collect();
            r_field.value(0, &y)
        }) * d.powi(n as i32 - 1);
        -(nf - 2.0) / 2.0 * (2.0 - nf) * d.powi(1 - n as i32) * mean
    });
    Ok(VIdentityReport {
        n,
        m,
        mu,
        self_pairing: if self_scale > 0.0 { self_value.abs() / self_scale } else { 0.0 },
        self_pairing_value: self_value,
        self_pairing_scale: self_scale,
        pairs,
        mixed_surface: mixed.values[0],
        mixed_predicted,
        mixed_rel_error: (mixed.values[0] - mixed_predicted).abs() / mixed_predicted.abs(),
        bm_recovered: mixed.values[0] / interaction,
        direct_normal_oracle,
    })
}

/// A radial pair used for the vanishing check: two random smooth sums.
pub fn radial_pair(dim: u32, rng: &mut impl rand::Rng) -> (RadialSum, RadialSum) {
    (
        super::fields::random_smooth_radial(dim, 3, rng),
        super::fields::random_smooth_radial(dim, 3, rng),
    )
}

/// `r^{2m-N}` about `center`, with levels up to `m`.
pub fn fundamental_field(n: u32, m: u32, center: Vec<f64>) -> RadialField {
    RadialField::new(&RadialSum::term(n, rat(1, 1), 2 * m as i32 - n as i32, 0), center, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pohozaev::fields::{random_smooth_field, PolyField, Polynomial};
    use crate::quadrature::constants_table;
    use crate::radial::bubble_profile;
    use crate::ProblemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bubble_self_pairing_round_trip() {
        let quad = Quadrature::new(5, 20, 16);
        let u = RadialField::new(&bubble_profile(1, 5).unwrap(), vec![0.0; 5], 1);
        let rep = roundtrip(1, &u, &u, &[0.0; 5], 1.0, &[0.0; 5], &quad).unwrap();
        assert!(rep.max_rel_error() < 1e-8, "{rep:?}");
    }

    #[test]
    fn bubble_against_quadratic_round_trip() {
        let quad = Quadrature::new(5, 20, 16);
        let u = RadialField::new(&bubble_profile(1, 5).unwrap(), vec![0.0; 5], 2);
        let v = PolyField::new(&Polynomial::norm_squared(5), 2);
        let rep = roundtrip(2, &u, &v, &[0.0; 5], 1.0, &[0.0; 5], &quad).unwrap();
        assert!(rep.max_rel_error() < 1e-8, "{rep:?}");
    }

    #[test]
    fn random_round_trips_improve_with_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_smooth_field(5, 3, 0.2, &mut rng);
        let v = random_smooth_field(5, 3, 0.2, &mut rng);
        let c = [0.05, -0.02, 0.0, 0.01, 0.03];
        let coarse = roundtrip(3, &u, &v, &c, 0.5, &[0.1, 0.0, 0.0, 0.0, 0.0], &Quadrature::new(5, 10, 8)).unwrap();
        let fine = roundtrip(3, &u, &v, &c, 0.5, &[0.1, 0.0, 0.0, 0.0, 0.0], &Quadrature::new(5, 20, 12)).unwrap();
        assert!(fine.max_rel_error() < 1e-7, "{}", fine.max_rel_error());
        assert!(fine.max_rel_error() < coarse.max_rel_error());
    }

    #[test]
    fn failure_report_names_largest_term() {
        let rt = RoundTrip {
            identity: "x".into(),
            volume: 1.0,
            surface: 0.0,
            scale: 1.0,
            rel_error: 1.0,
            largest_term: "T".into(),
            largest_term_value: 2.0,
        };
        let err = rt.check(1e-7).unwrap_err().to_string();
        assert!(err.contains("largest term T"));
    }

    #[test]
    fn radial_translation_form_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sphere = SphereRule::new(5, 8);
        for m in 1..=3 {
            let (a, b) = radial_pair(5, &mut rng);
            let rep = radial_vanishing(m, &a, &b, &[0.3, 0.0, -0.1, 0.0, 0.2], 0.7, &sphere).unwrap();
            assert!(rep.max_relative < 1e-10, "m={m}: {rep:?}");
        }
    }

    #[test]
    fn transport_between_radii() {
        let sphere = SphereRule::new(5, 24);
        let origin = vec![0.0; 5];
        for m in 1..=2 {
            let u = fundamental_field(5, m, origin.clone());
            let v = fundamental_field(5, m, vec![3.0, 1.0, 0.0, 0.0, 0.0]);
            for (form, comp) in [(build_g(m), 0), (build_f(m, 0), 0)] {
                let rep = transport(&form, comp, &u, &v, &origin, [0.4, 0.8], &origin, &sphere).unwrap();
                assert!(rep.rel_difference < 1e-8, "{rep:?}");
                assert!(rep.values[0].abs() > 1e-3 * rep.scales[0]);
            }
        }
    }

    #[test]
    fn v_identities_for_m_two() {
        let sphere = SphereRule::new(7, 8);
        let neighbours = vec![(vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 30.0), (vec![-2.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0], 25.0)];
        let rep = verify_v_identities(7, 2, 30.0, &neighbours, [0.3, 0.6], &sphere).unwrap();
        assert!(rep.self_pairing < 1e-9, "{rep:?}");
        for p in &rep.pairs {
            assert!(p.fitted_constant < 1e-9, "{p:?}");
            assert!(p.homogeneity_error < 1e-10, "{p:?}");
        }
        assert!(rep.mixed_rel_error < 1e-6, "{}", rep.mixed_rel_error);
    }

    #[test]
    fn mixed_term_recovers_interaction_constant() {
        let cfg = ProblemConfig::example();
        let table = constants_table(&cfg).unwrap();
        let sphere = SphereRule::new(7, 12);
        let neighbours = vec![(vec![1.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 40.0)];
        let rep = verify_v_identities(7, 1, 40.0, &neighbours, [0.2, 0.4], &sphere).unwrap();
        assert!((rep.bm_recovered - table.bm).abs() < 1e-8 * table.bm, "{} vs {}", rep.bm_recovered, table.bm);
        let direct = rep.direct_normal_oracle.unwrap();
        assert!((direct - rep.mixed_surface).abs() < 1e-10 * direct.abs());
    }
}
