//! Energy-expansion and interaction constants.

use num::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::moments::{moment, MomentKind, MomentWeight, MOMENT_TOL};
use super::sphere::sphere_area;
use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::radial::{bubble_constant, polyharmonic_constant};

/// All constants entering the reduced system, for `K(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub n: u32,
    pub m: u32,
    pub beta: f64,
    pub sum_a: f64,
    /// `C̃_m` as `base^(exponent)` and as a float.
    pub tilde_c_base: String,
    pub tilde_c_exponent: String,
    pub tilde_c: f64,
    /// `c'_m` exactly and as a float.
    pub cprime_m: String,
    pub cprime_m_value: f64,
    /// `c_m = c'_m (N-2) |S^{N-1}|`, the mass of `-Δ (c'_m r^{2-N})`.
    pub cm: f64,
    /// `β(β-1)/m* ∫ |y_1|^{β-2} U^{m*}`.
    pub c1: f64,
    /// `β/m* ∫ |y_1|^β U^{m*}`.
    pub c2: f64,
    /// `-∫ |y_1|^β U^{m*-1} ψ_0`, an independent route to `C_2`.
    pub c2_dilation: f64,
    /// `∫ U^{m*-1}`, the interaction mass of one bubble.
    pub a0: f64,
    /// `(N-2)(N-2m)/2 · c'_m · |S^{N-1}| · C̃_m`.
    pub bm: f64,
    /// `2 C̃_m B_m`.
    pub bprime_m: f64,
    /// `B'_m / (2 (-Σ a_i) C_2)`, the height-equation coupling.
    pub b: f64,
}

impl ConstantsTable {
    fn assert_signs(&self) -> Result<()> {
        let positive = [
            ("C2", self.c2),
            ("B", self.b),
            ("Bm", self.bm),
            ("Bprime_m", self.bprime_m),
            ("cprime_m", self.cprime_m_value),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::Sign { name, value });
            }
        }
        if self.c1 == 0.0 || !self.c1.is_finite() {
            return Err(Error::Sign {
                name: "C1",
                value: self.c1,
            });
        }
        Ok(())
    }
}

pub fn constants_table(cfg: &ProblemConfig) -> Result<ConstantsTable> {
    constants_table_with_tol(cfg, MOMENT_TOL)
}

pub fn constants_table_with_tol(cfg: &ProblemConfig, rel_tol: f64) -> Result<ConstantsTable> {
    cfg.validate()?;
    let (n, m, beta) = (cfg.n, cfg.m, cfg.beta);
    let mstar = cfg.mstar();
    let tc = bubble_constant(m, n)?;
    let tilde_c = tc.value();
    let cprime = polyharmonic_constant(m, n)?;
    let cprime_value = cprime.to_f64().unwrap_or(f64::NAN);
    let area = sphere_area(n);

    let axis = |p: f64, w: MomentWeight| moment(n, m, p, w, MomentKind::Axis, rel_tol);
    let c1 = beta * (beta - 1.0) / mstar * axis(beta - 2.0, MomentWeight::BubblePower)?.value;
    let c2 = beta / mstar * axis(beta, MomentWeight::BubblePower)?.value;
    let c2_dilation = -axis(beta, MomentWeight::DilationPairing)?.value;
    let a0 = moment(n, m, 0.0, MomentWeight::InteractionMass, MomentKind::Radial, rel_tol)?.value;

    let nf = n as f64;
    let bm = (nf - 2.0) * (nf - 2.0 * m as f64) / 2.0 * cprime_value * area * tilde_c;
    let bprime_m = 2.0 * tilde_c * bm;
    let sum_a = cfg.sum_a();
    let b = bprime_m / (2.0 * (-sum_a) * c2);

    let table = ConstantsTable {
        n,
        m,
        beta,
        sum_a,
        tilde_c_base: tc.base.to_string(),
        tilde_c_exponent: tc.exponent.to_string(),
        tilde_c,
        cprime_m: cprime.to_string(),
        cprime_m_value: cprime_value,
        cm: cprime_value * (nf - 2.0) * area,
        c1,
        c2,
        c2_dilation,
        a0,
        bm,
        bprime_m,
        b,
    };
    table.assert_signs()?;
    Ok(table)
}
