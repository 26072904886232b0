//! Problem parameters and their admissibility conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of `(-Δ)^m u = K(y) u^{(N+2m)/(N-2m)}` together with the
/// lattice dimension and the local model `K(y) = K0 + Σ a_i |y_i|^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub beta: f64,
    pub a: Vec<f64>,
    pub k0: f64,
    pub l: f64,
    pub vartheta: f64,
}

impl ProblemConfig {
    /// Builds and validates a configuration.
    pub fn new(
        n: u32,
        m: u32,
        k: u32,
        beta: f64,
        a: Vec<f64>,
        k0: f64,
        l: f64,
        vartheta: f64,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            k,
            beta,
            a,
            k0,
            l,
            vartheta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every standing assumption and reports the first violated one
    /// by name.
    pub fn validate(&self) -> Result<()> {
        let (n, m, k) = (self.n as f64, self.m as f64, self.k as f64);
        if self.m < 1 {
            return Err(Error::InvalidConfig(format!(
                "order condition violated: m = {} must be at least 1",
                self.m
            )));
        }
        if self.n <= 2 * self.m + 2 {
            return Err(Error::InvalidConfig(format!(
                "dimension condition N > 2m + 2 violated: N = {}, m = {}",
                self.n, self.m
            )));
        }
        if !(self.k >= 1 && k < (n - 2.0 * m) / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "lattice dimension condition 1 <= k < (N-2m)/2 = {} violated: k = {}",
                (n - 2.0 * m) / 2.0,
                self.k
            )));
        }
        if !(self.beta > n - 2.0 * m && self.beta < n) {
            return Err(Error::InvalidConfig(format!(
                "local-model exponent condition beta in (N-2m, N) = ({}, {}) violated: beta = {}",
                n - 2.0 * m,
                n,
                self.beta
            )));
        }
        if self.a.len() != self.n as usize {
            return Err(Error::InvalidConfig(format!(
                "local-model coefficients: expected N = {} values a_i, got {}",
                self.n,
                self.a.len()
            )));
        }
        if let Some(i) = self.a.iter().position(|&ai| ai == 0.0 || !ai.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "local-model coefficient condition a_i != 0 violated at i = {}",
                i + 1
            )));
        }
        let sum_a: f64 = self.a.iter().sum();
        if !(sum_a < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "local-model coefficient condition sum(a_i) < 0 violated: sum = {sum_a}"
            )));
        }
        if !(self.k0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "positivity condition K(0) > 0 violated: K0 = {}",
                self.k0
            )));
        }
        if !(self.l > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lattice scale L must be positive, got {}",
                self.l
            )));
        }
        if !(self.vartheta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight offset vartheta must be positive, got {}",
                self.vartheta
            )));
        }
        let tau = self.tau();
        if !(tau > k) {
            return Err(Error::InvalidConfig(format!(
                "weight exponent condition tau = (N-2m)/2 - vartheta > k violated: tau = {tau}, k = {}",
                self.k
            )));
        }
        if !(tau > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "weight exponent condition tau > 1 violated: tau = {tau}"
            )));
        }
        Ok(())
    }

    /// `(N - 2m) / 2`, the decay half-exponent of a bubble.
    pub fn half_gap(&self) -> f64 {
        (self.n as f64 - 2.0 * self.m as f64) / 2.0
    }

    pub fn tau(&self) -> f64 {
        self.half_gap() - self.vartheta
    }

    /// Critical exponent `m* = 2N/(N-2m)`.
    pub fn mstar(&self) -> f64 {
        2.0 * self.n as f64 / (self.n as f64 - 2.0 * self.m as f64)
    }

    /// Reduced height exponent `κ = (β - (N-2m)/2) / ((N-2m)/2)`.
    pub fn kappa(&self) -> f64 {
        (self.beta - self.half_gap()) / self.half_gap()
    }

    /// Exponent of the height law `μ ~ L^{(N-2m)/(β-N+2m)}`.
    pub fn mu_exponent(&self) -> f64 {
        let gap = self.n as f64 - 2.0 * self.m as f64;
        gap / (self.beta - gap)
    }

    pub fn sum_a(&self) -> f64 {
        self.a.iter().sum()
    }

    /// A configuration for `N = 7, m = 1, k = 1, β = 6` with a symmetric
    /// negative coefficient pattern; used throughout the examples.
    pub fn example() -> Self {
        Self {
            n: 7,
            m: 1,
            k: 1,
            beta: 6.0,
            a: vec![-1.0; 7],
            k0: 1.0,
            l: 16.0,
            vartheta: 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_is_valid_and_derived_quantities_match() {
        let cfg = ProblemConfig::example();
        cfg.validate().unwrap();
        assert!((cfg.tau() - 2.4).abs() < 1e-15);
        assert!((cfg.mstar() - 14.0 / 5.0).abs() < 1e-15);
        assert!((cfg.kappa() - 1.4).abs() < 1e-15);
        assert!((cfg.mu_exponent() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_each_assumption_by_name() {
        let base = ProblemConfig::example();
        let cases: Vec<(ProblemConfig, &str)> = vec![
            (ProblemConfig { n: 4, m: 2, ..base.clone() }, "dimension condition"),
            (ProblemConfig { k: 3, ..base.clone() }, "lattice dimension"),
            (ProblemConfig { beta: 5.0, ..base.clone() }, "exponent condition"),
            (ProblemConfig { beta: 7.0, ..base.clone() }, "exponent condition"),
            (
                ProblemConfig { a: vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0], ..base.clone() },
                "sum(a_i) < 0",
            ),
            (
                ProblemConfig { a: vec![0.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0], ..base.clone() },
                "a_i != 0",
            ),
            (ProblemConfig { k0: 0.0, ..base.clone() }, "K(0) > 0"),
            (ProblemConfig { vartheta: 1.6, ..base.clone() }, "tau"),
        ];
        for (cfg, needle) in cases {
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(needle), "{err} should mention {needle}");
        }
    }
}
