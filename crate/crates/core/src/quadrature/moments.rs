//! Radial moments of bubble powers with termwise Beta-function oracles.

use num::{BigRational, ToPrimitive};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use super::kronrod::{integrate_half_line_abs, QuadResult};
use super::sphere::{axis_power_mean, sphere_area};
use crate::error::{Error, Result};
use crate::radial::{bubble_constant, bubble_profile, rat, RadialSum};

/// Default relative tolerance for radial integrals.
pub const MOMENT_TOL: f64 = 1e-13;

/// Bubble-derived radial weights `w(|y|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentWeight {
    /// `U^{m*}`.
    BubblePower,
    /// `U^{m*-1}`.
    InteractionMass,
    /// `U^{m*-1} ψ_0` with `ψ_0 = ∂_λ U_{0,λ}` at `λ = 1`.
    DilationPairing,
}

/// Whether the moment uses `|y|^p` or the single-axis `|y_1|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    Radial,
    Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMoment {
    pub p: f64,
    pub weight: MomentWeight,
    pub kind: MomentKind,
    pub value: f64,
    pub error_estimate: f64,
    /// `∫ |y|^p |w|` bounded termwise; the natural scale for relative errors.
    pub scale: f64,
    /// Closed-form value when every term of the weight is a pure power
    /// family, `None` otherwise.
    pub oracle: Option<f64>,
}

/// `w = C̃_m^c · profile`, returned as `(profile, c)`.
pub fn weight_profile(n: u32, m: u32, weight: MomentWeight) -> Result<(RadialSum, f64)> {
    let u = bubble_profile(m, n)?;
    let mstar = 2.0 * n as f64 / (n as f64 - 2.0 * m as f64);
    let inter = RadialSum::term(n, rat(1, 1), 0, (n + 2 * m) as i32);
    Ok(match weight {
        MomentWeight::BubblePower => (RadialSum::term(n, rat(1, 1), 0, 2 * n as i32), mstar),
        MomentWeight::InteractionMass => (inter, mstar - 1.0),
        MomentWeight::DilationPairing => {
            let h = rat(n as i64 - 2 * m as i64, 2);
            (inter.mul(&u.dilation_generator(&h)), mstar)
        }
    })
}

fn check_convergence(f: &RadialSum, power: f64) -> Result<()> {
    for t in f.terms() {
        let at_zero = t.p as f64 + power;
        if !(at_zero > -1.0) {
            return Err(Error::Divergent(format!(
                "integrand r^{at_zero} near r = 0 needs exponent > -1"
            )));
        }
        let at_inf = t.p as f64 - t.q2 as f64 + power;
        if !(at_inf < -1.0) {
            return Err(Error::Divergent(format!(
                "integrand ~ r^{at_inf} at infinity needs exponent < -1"
            )));
        }
    }
    Ok(())
}

/// `∫_0^∞ r^power f(r) dr` by adaptive Gauss–Kronrod after `r = tan t`.
///
/// The tolerance is relative to the termwise absolute mass, so integrals
/// that cancel to zero still terminate.
pub fn radial_integral(f: &RadialSum, power: f64, rel_tol: f64) -> Result<QuadResult> {
    let scale = abs_mass(f, power)?;
    let g = f.numeric();
    integrate_half_line_abs(
        move |r| if r == 0.0 { 0.0 } else { r.powf(power) * g.eval(r) },
        rel_tol * scale,
        rel_tol,
    )
}

/// `Σ_t |c_t| ∫_0^∞ r^{power+p_t} (1+r^2)^{-q_t} dr`, an upper bound for
/// `∫_0^∞ r^power |f(r)| dr`.
pub fn abs_mass(f: &RadialSum, power: f64) -> Result<f64> {
    check_convergence(f, power)?;
    Ok(f.terms()
        .iter()
        .map(|t| coeff_f64(&t.coeff).abs() * term_beta(t.p, t.q2, power))
        .sum())
}

fn term_beta(p: i32, q2: i32, power: f64) -> f64 {
    let a = p as f64 + power + 1.0;
    let b = q2 as f64 / 2.0;
    0.5 * ln_beta(a / 2.0, b - a / 2.0).exp()
}

/// Termwise closed form `∫_0^∞ r^{a-1} (1+r^2)^{-b} dr = B(a/2, b - a/2)/2`.
pub fn beta_oracle(f: &RadialSum, power: f64) -> Result<f64> {
    check_convergence(f, power)?;
    Ok(f.terms()
        .iter()
        .map(|t| coeff_f64(&t.coeff) * term_beta(t.p, t.q2, power))
        .sum())
}

fn coeff_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// `∫_{R^N} |y|^p w(y) dy` or `∫_{R^N} |y_1|^p w(y) dy`.
pub fn moment(
    n: u32,
    m: u32,
    p: f64,
    weight: MomentWeight,
    kind: MomentKind,
    rel_tol: f64,
) -> Result<RadialMoment> {
    let (profile, cpow) = weight_profile(n, m, weight)?;
    let power = p + n as f64 - 1.0;
    let angular = match kind {
        MomentKind::Radial => sphere_area(n),
        MomentKind::Axis => axis_power_mean(n, p),
    };
    let factor = bubble_constant(m, n)?.powf(cpow) * angular;
    let q = radial_integral(&profile, power, rel_tol)?;
    let oracle = beta_oracle(&profile, power)?;
    Ok(RadialMoment {
        p,
        weight,
        kind,
        value: factor * q.value,
        error_estimate: factor * q.error,
        scale: factor * abs_mass(&profile, power)?,
        oracle: Some(factor * oracle),
    })
}

/// `∫_{R^N} |y|^p w(|y|) dy`.
pub fn radial_moment(n: u32, m: u32, p: f64, weight: MomentWeight) -> Result<RadialMoment> {
    moment(n, m, p, weight, MomentKind::Radial, MOMENT_TOL)
}

/// `∫_{R^N} |y_1|^p w(|y|) dy`.
pub fn axis_moment(n: u32, m: u32, p: f64, weight: MomentWeight) -> Result<RadialMoment> {
    moment(n, m, p, weight, MomentKind::Axis, MOMENT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere::SphereRule;
    use statrs::function::beta::beta;

    #[test]
    fn bubble_power_moment_example() {
        let mm = radial_moment(5, 1, 0.0, MomentWeight::BubblePower).unwrap();
        let c = bubble_constant(1, 5).unwrap().powf(10.0 / 3.0);
        let exact = c * sphere_area(5) * 0.5 * beta(2.5, 2.5);
        assert!((mm.value - exact).abs() < 1e-10 * exact);
        assert!((mm.oracle.unwrap() - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn divergent_moment_is_rejected() {
        let err = radial_moment(5, 1, 5.0, MomentWeight::BubblePower).unwrap_err();
        assert!(matches!(err, Error::Divergent(_)));
        assert!(err.to_string().contains("infinity"));
        assert!(radial_moment(5, 1, -5.0, MomentWeight::BubblePower).is_err());
    }

    #[test]
    fn moments_match_beta_oracle() {
        for (n, m) in [(5u32, 1u32), (7, 1), (7, 2), (9, 3), (10, 2)] {
            for weight in [
                MomentWeight::BubblePower,
                MomentWeight::InteractionMass,
                MomentWeight::DilationPairing,
            ] {
                for p in [0.0, 1.0, 2.5, n as f64 - 2.0 * m as f64 + 0.5] {
                    let Ok(mm) = radial_moment(n, m, p, weight) else { continue };
                    let o = mm.oracle.unwrap();
                    assert!(
                        (mm.value - o).abs() <= 1e-10 * mm.scale,
                        "N={n} m={m} {weight:?} p={p}: {} vs {o}",
                        mm.value
                    );
                }
            }
        }
    }

    #[test]
    fn dilation_pairing_vanishes_without_weight() {
        // ∫ U^{m*-1} ψ_0 = d/dλ (1/m*) ∫ U_{0,λ}^{m*} = 0
        for (n, m) in [(5u32, 1u32), (7, 2), (9, 3)] {
            let mm = radial_moment(n, m, 0.0, MomentWeight::DilationPairing).unwrap();
            let mass = radial_moment(n, m, 0.0, MomentWeight::BubblePower).unwrap();
            assert!(mm.value.abs() < 1e-12 * mass.value, "N={n}: {}", mm.value);
            assert!(mm.oracle.unwrap().abs() < 1e-12 * mm.scale);
        }
    }

    #[test]
    fn axis_moment_relates_to_radial_moment_at_two() {
        // Σ_i ∫ y_i^2 w = ∫ |y|^2 w
        let ax = axis_moment(7, 1, 2.0, MomentWeight::BubblePower).unwrap();
        let rad = radial_moment(7, 1, 2.0, MomentWeight::BubblePower).unwrap();
        assert!((7.0 * ax.value - rad.value).abs() < 1e-12 * rad.value);
    }

    #[test]
    fn angular_factor_against_sphere_rule() {
        let rule = SphereRule::new(7, 12);
        let q = rule.integrate(|w| w[0].powi(4));
        assert!((q - axis_power_mean(7, 4.0)).abs() < 1e-12);
    }
}
