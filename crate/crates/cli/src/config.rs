//! The run configuration: one flat TOML table, every key optional, every
//! tolerance explicit.

use std::path::{Path, PathBuf};

use num::BigRational;
use polybubble::bubble::Cutoff;
use polybubble::lattice::Selection;
use polybubble::{ProblemConfig, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Problem.
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub beta: f64,
    pub a: Vec<f64>,
    pub k0: f64,
    pub l: f64,
    pub vartheta: f64,

    // Lattice: `box_radius` selects `{-R..R}^k`; a non-empty `points`
    // list overrides it.
    pub box_radius: u32,
    pub points: Vec<Vec<i64>>,
    pub l_scan: Vec<f64>,

    pub seed: u64,
    pub output_dir: PathBuf,

    // Solver.
    pub solver_tol: f64,
    pub max_iterations: usize,
    pub relaxation: f64,
    pub newton_switch: f64,
    pub uniqueness_restarts: usize,
    pub slope_tol: f64,
    pub mirror_tol: f64,

    // Kernel checks.
    pub kernel_cases: Vec<[u32; 2]>,
    /// Test mode only: added to the right-hand-side coefficient of the
    /// bubble equation, written as a rational such as `"1/1000"`.
    pub test_perturbation: Option<String>,

    // Boundary identities.
    pub roundtrip_dim: u32,
    pub roundtrip_orders: Vec<u32>,
    pub roundtrip_pairs: usize,
    pub roundtrip_degree: usize,
    pub roundtrip_radial_nodes: usize,
    pub roundtrip_tol: f64,
    pub vanishing_tol: f64,
    pub v_identity_tol: f64,
    pub transport_tol: f64,
    pub bm_tol: f64,

    // Norms and residual.
    pub cutoff: Cutoff,
    pub norm_radial: usize,
    pub norm_angular: usize,
    pub residual_rate_tol: f64,
    pub orthogonality_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ProblemConfig::example();
        let s = SolverOptions::default();
        Self {
            n: p.n,
            m: p.m,
            k: p.k,
            beta: p.beta,
            a: p.a,
            k0: p.k0,
            l: p.l,
            vartheta: p.vartheta,
            box_radius: 5,
            points: Vec::new(),
            l_scan: vec![8.0, 16.0, 32.0, 64.0],
            seed: 1,
            output_dir: PathBuf::from("out"),
            solver_tol: s.tol,
            max_iterations: s.max_iterations,
            relaxation: s.relaxation,
            newton_switch: s.newton_switch,
            uniqueness_restarts: 20,
            slope_tol: 0.01,
            mirror_tol: 1e-10,
            kernel_cases: vec![[1, 5], [2, 7], [3, 9], [2, 10]],
            test_perturbation: None,
            roundtrip_dim: 5,
            roundtrip_orders: vec![1, 2, 3],
            roundtrip_pairs: 10,
            roundtrip_degree: 30,
            roundtrip_radial_nodes: 8,
            roundtrip_tol: 1e-7,
            vanishing_tol: 1e-10,
            v_identity_tol: 1e-9,
            transport_tol: 1e-8,
            bm_tol: 1e-8,
            cutoff: Cutoff::Cubic,
            norm_radial: 160,
            norm_angular: 3,
            residual_rate_tol: 0.25,
            orthogonality_tol: 1e-10,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig {
            n: self.n,
            m: self.m,
            k: self.k,
            beta: self.beta,
            a: self.a.clone(),
            k0: self.k0,
            l: self.l,
            vartheta: self.vartheta,
        }
    }

    pub fn selection(&self) -> Selection {
        if self.points.is_empty() {
            Selection::FullBox { radius: self.box_radius }
        } else {
            Selection::Explicit { points: self.points.clone() }
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            max_iterations: self.max_iterations,
            relaxation: self.relaxation,
            newton_switch: self.newton_switch,
        }
    }

    pub fn perturbation(&self) -> Result<Option<BigRational>, ConfigError> {
        self.test_perturbation
            .as_deref()
            .map(|s| {
                s.trim()
                    .parse::<BigRational>()
                    .map_err(|e| ConfigError(format!("test_perturbation {s:?} is not a rational: {e}")))
            })
            .transpose()
    }

    /// Re-checks every problem assumption and the ranges of the run
    /// parameters.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem().validate().map_err(|e| ConfigError(e.to_string()))?;
        for &[m, n] in &self.kernel_cases {
            if m == 0 || n <= 2 * m {
                return Err(ConfigError(format!("kernel case (m, N) = ({m}, {n}) needs m >= 1 and N > 2m")));
            }
        }
        if self.l_scan.len() < 2 || self.l_scan.iter().any(|l| !(*l > 0.0)) {
            return Err(ConfigError("l_scan needs at least two positive values".into()));
        }
        if self.l_scan.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError("l_scan must be strictly increasing".into()));
        }
        if self.points.is_empty() && self.box_radius == 0 {
            return Err(ConfigError("box_radius must be positive when no explicit points are given".into()));
        }
        if self.roundtrip_dim < 2 || self.roundtrip_orders.iter().any(|&m| m == 0) {
            return Err(ConfigError("roundtrip_dim must be >= 2 and roundtrip_orders positive".into()));
        }
        if self.uniqueness_restarts < 10 {
            return Err(ConfigError("uniqueness_restarts must be at least 10".into()));
        }
        if self.norm_radial < 4 {
            return Err(ConfigError("norm_radial must be at least 4".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(ConfigError("relaxation must lie in (0, 1]".into()));
        }
        let tolerances = [
            ("solver_tol", self.solver_tol),
            ("slope_tol", self.slope_tol),
            ("mirror_tol", self.mirror_tol),
            ("roundtrip_tol", self.roundtrip_tol),
            ("vanishing_tol", self.vanishing_tol),
            ("v_identity_tol", self.v_identity_tol),
            ("transport_tol", self.transport_tol),
            ("bm_tol", self.bm_tol),
            ("residual_rate_tol", self.residual_rate_tol),
            ("orthogonality_tol", self.orthogonality_tol),
        ];
        for (name, v) in tolerances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("{name} must be positive, got {v}")));
            }
        }
        self.perturbation()?;
        Ok(())
    }
}
