//! The six subcommands. Each returns an [`Outcome`] whose JSON and CSV
//! depend only on the configuration and the seed.

use num::{BigRational, ToPrimitive};
use polybubble::bubble::{pointwise_checks, residual_ladder, star_norms_refined, PointwiseReport, NormReport, ResidualReport};
use polybubble::lattice::{admissibility_ratio, Lattice};
use polybubble::pohozaev::checks::{fundamental_field, radial_pair};
use polybubble::pohozaev::fields::random_smooth_field;
use polybubble::pohozaev::{
    build_f, build_g, radial_vanishing, roundtrip, transport, verify_v_identities, Quadrature, RoundTripReport,
    TransportReport, VIdentityReport, VanishingReport,
};
use polybubble::quadrature::{constants_table, BallRule, ConstantsTable, SphereRule};
use polybubble::radial::{farfield_coefficients, polyharmonic_constant, verify_bubble_pde, verify_bubble_pde_perturbed};
use polybubble::reduced::{linearized_bound, scaling_ladder, solve_heights, uniqueness_stress, LinearizedBound, ScalingReport, UniquenessReport};
use polybubble::{Bubble, BubbleField, Cutoff, HeightSystem, RadialSum, Result, SyntheticK};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Csv;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    VerifyKernel,
    PohozaevCheck,
    Solve,
    #[value(name = "scan-L", alias = "scan-l")]
    ScanL,
    Constants,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyKernel => "verify-kernel",
            Command::PohozaevCheck => "pohozaev-check",
            Command::Solve => "solve",
            Command::ScanL => "scan-L",
            Command::Constants => "constants",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub failures: Vec<String>,
    pub report: Value,
    pub csv: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// The versioned JSON document written to `<command>.json`.
    pub fn document(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "passed": self.passed(),
            "failures": self.failures,
            "report": self.report,
        })
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::VerifyKernel => verify_kernel(cfg),
        Command::PohozaevCheck => pohozaev_check(cfg),
        Command::Solve => solve(cfg),
        Command::ScanL => scan_l(cfg),
        Command::Constants => constants(cfg),
        Command::Report => report(cfg),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCase {
    pub m: u32,
    pub n: u32,
    /// `((-Δ)^m U - U^{m*-1}) / C̃_m` as an exact sum; `"0"` when it vanishes.
    pub pde_residual: String,
    pub cprime: String,
    pub farfield: Vec<String>,
    /// Every far-field power `r^{-(N-2m+2i)}`, `i < m`, is `m`-harmonic.
    pub farfield_harmonic: bool,
    /// Remainder of the far-field series at `r = 40` over the first
    /// omitted term; tends to 1.
    pub farfield_remainder_ratio: f64,
}

pub fn verify_kernel(cfg: &RunConfig) -> Result<Outcome> {
    let delta = cfg
        .perturbation()
        .map_err(|e| polybubble::Error::InvalidConfig(e.0))?;
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for &[m, n] in &cfg.kernel_cases {
        let res = match &delta {
            Some(d) => verify_bubble_pde_perturbed(m, n, d)?,
            None => verify_bubble_pde(m, n)?,
        };
        if !res.is_zero() {
            failures.push(format!("(m, N) = ({m}, {n}): bubble equation residual {res}"));
        }
        let cprime = polyharmonic_constant(m, n)?;
        if !polybubble::radial::is_positive(&cprime) {
            failures.push(format!("(m, N) = ({m}, {n}): c'_m = {cprime} is not positive"));
        }
        let alpha = farfield_coefficients(m, n, m)?;
        let gap = n as i32 - 2 * m as i32;
        let harmonic = (0..m).all(|i| RadialSum::power(n, -(gap + 2 * i as i32)).neg_laplacian_pow(m).is_zero());
        if !harmonic {
            failures.push(format!("(m, N) = ({m}, {n}): a far-field power is not m-harmonic"));
        }
        let ratio = farfield_remainder(m, n, &alpha);
        if !((ratio - 1.0).abs() < 0.05) {
            failures.push(format!("(m, N) = ({m}, {n}): far-field remainder ratio {ratio}"));
        }
        cases.push(KernelCase {
            m,
            n,
            pde_residual: res.to_string(),
            cprime: cprime.to_string(),
            farfield: alpha.iter().map(|a| a.to_string()).collect(),
            farfield_harmonic: harmonic,
            farfield_remainder_ratio: ratio,
        });
    }
    let mut csv = Csv::new(&["m", "N", "pde_zero", "cprime", "farfield_remainder_ratio"]);
    for c in &cases {
        csv.row(&[
            c.m.to_string(),
            c.n.to_string(),
            (c.pde_residual == "0").to_string(),
            c.cprime.clone(),
            c.farfield_remainder_ratio.to_string(),
        ]);
    }
    Ok(Outcome {
        command: Command::VerifyKernel.name(),
        failures,
        report: json!({ "perturbation": cfg.test_perturbation, "cases": to_value(&cases) }),
        csv: Some(csv.finish()),
    })
}

fn farfield_remainder(m: u32, n: u32, alpha: &[BigRational]) -> f64 {
    let r: f64 = 40.0;
    let h = (n as f64 - 2.0 * m as f64) / 2.0;
    let exact = (1.0 + r * r).powf(-h);
    let series: f64 = alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a.to_f64().unwrap_or(f64::NAN) * r.powf(-2.0 * h - 2.0 * i as f64))
        .sum();
    let last = alpha.last().and_then(|a| a.to_f64()).unwrap_or(1.0);
    let next = last * (-h - (m as f64 - 1.0)) / m as f64 * r.powf(-2.0 * h - 2.0 * m as f64);
    (exact - series) / next
}

#[derive(Debug, Clone, Serialize)]
pub struct PohozaevReport {
    pub roundtrip_degree: usize,
    pub roundtrip_dim: u32,
    pub roundtrips: Vec<RoundTripReport>,
    #[serde(flatten)]
    pub identities: IdentityReport,
}

/// Randomized translation and dilation round trips; returns the reports
/// and the failed checks.
pub fn roundtrip_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<RoundTripReport>, Vec<String>)> {
    let dim = cfg.roundtrip_dim as usize;
    let quad = Quadrature::new(dim, cfg.roundtrip_degree, cfg.roundtrip_radial_nodes);
    let origin = vec![0.0; dim];
    let mut x = origin.clone();
    x[0] = 0.1;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &m in &cfg.roundtrip_orders {
        for pair in 0..cfg.roundtrip_pairs {
            let u = random_smooth_field(dim, m, 0.2, rng);
            let v = random_smooth_field(dim, m, 0.2, rng);
            let rep = roundtrip(m, &u, &v, &origin, 0.5, &x, &quad)?;
            for rt in rep.translation.iter().chain(std::iter::once(&rep.dilation)) {
                if let Err(e) = rt.check(cfg.roundtrip_tol) {
                    failures.push(format!("m={m} pair {pair}: {e}"));
                }
            }
            reports.push(rep);
        }
    }
    Ok((reports, failures))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub vanishing: Vec<VanishingReport>,
    pub transport: Vec<TransportReport>,
    pub v_identities: Vec<VIdentityReport>,
    pub bm_expected: f64,
}

/// Radial vanishing, two-radius transport and the pairings of the far
/// fields `V_j`.
pub fn identity_suite(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(IdentityReport, Vec<String>)> {
    let dim = cfg.roundtrip_dim as usize;
    let origin = vec![0.0; dim];
    let mut failures = Vec::new();

    let sphere = SphereRule::new(dim, 12);
    let mut offset = origin.clone();
    offset[0] = 0.3;
    offset[dim - 1] = -0.1;
    let mut vanishing = Vec::new();
    for &m in &cfg.roundtrip_orders {
        let (a, b) = radial_pair(dim as u32, rng);
        let rep = radial_vanishing(m, &a, &b, &offset, 0.7, &sphere)?;
        if !(rep.max_relative < cfg.vanishing_tol) {
            failures.push(format!("radial f_m vanishing m={m}: {:e}", rep.max_relative));
        }
        vanishing.push(rep);
    }

    let fine = SphereRule::new(dim, 24);
    let mut far = origin.clone();
    far[0] = 3.0;
    far[1] = 1.0;
    let mut transports = Vec::new();
    for &m in cfg.roundtrip_orders.iter().filter(|&&m| dim as u32 > 2 * m) {
        let u = fundamental_field(dim as u32, m, origin.clone());
        let v = fundamental_field(dim as u32, m, far.clone());
        for (form, comp) in [(build_g(m), 0), (build_f(m, 0), 0)] {
            let rep = transport(&form, comp, &u, &v, &origin, [0.4, 0.8], &origin, &fine)?;
            if !(rep.rel_difference < cfg.transport_tol) {
                failures.push(format!("transport m={m} {}: {:e}", rep.variant, rep.rel_difference));
            }
            transports.push(rep);
        }
    }

    let problem = cfg.problem();
    let table = constants_table(&problem)?;
    let n = problem.n;
    let vsphere = SphereRule::new(n as usize, 12);
    let mut e1 = vec![0.0; n as usize];
    e1[0] = 1.5;
    let mut e2 = vec![0.0; n as usize];
    e2[0] = -2.0;
    e2[1] = 0.5;
    let neighbours = vec![(e1, 40.0), (e2, 30.0)];
    let mut v_identities = Vec::new();
    for m in (1..=3).filter(|&m| n > 2 * m) {
        let rep = verify_v_identities(n, m, 40.0, &neighbours, [0.2, 0.4], &vsphere)?;
        if !(rep.self_pairing < cfg.v_identity_tol) {
            failures.push(format!("g_m(V, V) m={m}: {:e}", rep.self_pairing));
        }
        for p in rep.pairs.iter().filter(|p| !p.identically_zero) {
            if !(p.fitted_constant < cfg.v_identity_tol) {
                failures.push(format!("g_m pair ({}, {}) m={m}: {:e}", p.h, p.k, p.fitted_constant));
            }
        }
        if m == problem.m && !((rep.bm_recovered - table.bm).abs() < cfg.bm_tol * table.bm) {
            failures.push(format!("B_m recovered {} against {}", rep.bm_recovered, table.bm));
        }
        v_identities.push(rep);
    }
    let report = IdentityReport { vanishing, transport: transports, v_identities, bm_expected: table.bm };
    Ok((report, failures))
}

pub fn pohozaev_check(cfg: &RunConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (roundtrips, mut failures) = roundtrip_suite(cfg, &mut rng)?;
    let (identities, more) = identity_suite(cfg, &mut rng)?;
    failures.extend(more);

    let report = PohozaevReport {
        roundtrip_degree: cfg.roundtrip_degree,
        roundtrip_dim: cfg.roundtrip_dim,
        roundtrips,
        identities,
    };
    let mut csv = Csv::new(&["m", "pair", "max_rel_error", "dilation_rel_error"]);
    let pairs = cfg.roundtrip_pairs.max(1);
    for (i, r) in report.roundtrips.iter().enumerate() {
        csv.row(&[
            r.m.to_string(),
            (i % pairs).to_string(),
            r.max_rel_error().to_string(),
            r.dilation.rel_error.to_string(),
        ]);
    }
    Ok(Outcome {
        command: Command::PohozaevCheck.name(),
        failures,
        report: to_value(&report),
        csv: Some(csv.finish()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub points: usize,
    /// `max_j S_j / min_j S_j` for the lattice sums at exponent `τ`.
    pub admissibility_ratio: f64,
    pub ladder: ScalingReport,
    /// Per rung: the dropped `μ_min^{-(β+1)}` and its size relative to the
    /// leading `μ_min^{-β}` balance.
    pub neglected: Vec<NeglectedTerm>,
    pub slope_flag: bool,
    pub near_degenerate: bool,
    pub uniqueness: UniquenessReport,
    pub linearized: LinearizedBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeglectedTerm {
    pub l: f64,
    pub magnitude: f64,
    pub relative: f64,
}

fn ladder(cfg: &RunConfig) -> Result<(Lattice, ScalingReport)> {
    let problem = cfg.problem();
    let consts = constants_table(&problem)?;
    let lat = Lattice::generate(problem.k, &cfg.selection(), problem.n, problem.m, 1.0)?;
    let rep = scaling_ladder(&problem, &lat, &consts, &cfg.l_scan, &cfg.solver())?;
    Ok((lat, rep))
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem();
    let consts = constants_table(&problem)?;
    let (lat, rep) = ladder(cfg)?;
    let sys = HeightSystem::new(
        polybubble::lattice::interaction_matrix(&lat, problem.n, problem.m)?,
        problem.kappa(),
        consts.b,
    )?;
    let opts = cfg.solver();
    let uniqueness = uniqueness_stress(&sys, cfg.uniqueness_restarts, &opts, cfg.seed)?;
    let linearized = linearized_bound(&sys, &solve_heights(&sys, &opts)?, 1000, cfg.seed)?;

    let mut failures = Vec::new();
    // Close to β = N - 2m the predicted slope blows up and finite ladders
    // cannot resolve it; the deviation is then informational only.
    let near_degenerate = problem.beta - (problem.n as f64 - 2.0 * problem.m as f64) < 0.25;
    let slope_flag = rep.relative_deviation > cfg.slope_tol;
    if slope_flag && !near_degenerate {
        failures.push(format!(
            "fitted slope {} deviates from {} by {:e}",
            rep.fitted_slope, rep.expected_slope, rep.relative_deviation
        ));
    }
    for row in &rep.rows {
        if row.mirror_asymmetry > cfg.mirror_tol {
            failures.push(format!("L = {}: mirror asymmetry {:e}", row.l, row.mirror_asymmetry));
        }
    }
    if uniqueness.spread > 1e-10 {
        failures.push(format!("restart spread {:e}", uniqueness.spread));
    }

    let mut csv = Csv::new(&[
        "L", "n", "kappa", "B", "residual", "min_a", "max_a", "min_mu", "max_mu", "max_offset", "mirror_asymmetry", "slope",
    ]);
    for r in &rep.rows {
        csv.row(&[
            r.l.to_string(),
            r.n.to_string(),
            r.kappa.to_string(),
            r.b.to_string(),
            r.residual.to_string(),
            r.min_a.to_string(),
            r.max_a.to_string(),
            r.min_mu.to_string(),
            r.max_mu.to_string(),
            r.max_offset.to_string(),
            r.mirror_asymmetry.to_string(),
            rep.fitted_slope.to_string(),
        ]);
    }
    let neglected = rep
        .rows
        .iter()
        .map(|r| NeglectedTerm {
            l: r.l,
            magnitude: r.min_mu.powf(-(problem.beta + 1.0)),
            relative: 1.0 / r.min_mu,
        })
        .collect();
    let report = SolveReport {
        points: lat.len(),
        admissibility_ratio: admissibility_ratio(&lat, problem.tau())?,
        ladder: rep,
        neglected,
        slope_flag,
        near_degenerate,
        uniqueness,
        linearized,
    };
    Ok(Outcome {
        command: Command::Solve.name(),
        failures,
        report: to_value(&report),
        csv: Some(csv.finish()),
    })
}

fn rungs(rep: &ScalingReport) -> Vec<(f64, Vec<Bubble>)> {
    rep.rows
        .iter()
        .map(|r| {
            let b = r
                .centers
                .iter()
                .zip(&r.mu)
                .map(|(c, &mu)| Bubble { center: c.clone(), mu })
                .collect();
            (r.l, b)
        })
        .collect()
}

pub fn scan_l(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem();
    let (_, rep) = ladder(cfg)?;
    let res: ResidualReport = residual_ladder(&problem, &rungs(&rep), cfg.norm_radial, cfg.norm_angular)?;
    let mut failures = Vec::new();
    if !res.strictly_decreasing {
        failures.push("residual norm is not strictly decreasing in L".into());
    }
    if !(res.relative_deviation < cfg.residual_rate_tol) {
        failures.push(format!(
            "residual rate {} deviates from {} by {:e}",
            res.fitted_rate, res.predicted_rate, res.relative_deviation
        ));
    }
    let mut csv = Csv::new(&["L", "min_mu", "residual_norm", "refinement_delta", "fitted_rate", "predicted_rate"]);
    for r in &res.rows {
        csv.row(&[
            r.l.to_string(),
            r.min_mu.to_string(),
            r.star_star_norm.to_string(),
            r.refinement_delta.to_string(),
            res.fitted_rate.to_string(),
            res.predicted_rate.to_string(),
        ]);
    }
    Ok(Outcome {
        command: Command::ScanL.name(),
        failures,
        report: json!({ "heights": to_value(&rep), "residual": to_value(&res) }),
        csv: Some(csv.finish()),
    })
}

pub fn constants(cfg: &RunConfig) -> Result<Outcome> {
    let table: ConstantsTable = constants_table(&cfg.problem())?;
    Ok(Outcome {
        command: Command::Constants.name(),
        failures: Vec::new(),
        report: to_value(&table),
        csv: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldReport {
    pub l: f64,
    pub bubbles: usize,
    pub cutoff: Cutoff,
    /// `‖W‖_*` and `‖W‖_**`.
    pub field_norms: NormReport,
    /// `‖l_L‖_*` and `‖l_L‖_**`.
    pub residual_norms: NormReport,
    pub pointwise: PointwiseReport,
    /// `max_j |∫ U^{m*-2} Z_{N+1} Z_j| / ∫ |...|` for each cutoff profile.
    pub orthogonality: Vec<(Cutoff, f64)>,
}

pub fn report(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem();
    let single = RunConfig { l_scan: vec![cfg.l, 2.0 * cfg.l], ..cfg.clone() };
    let (_, rep) = ladder(&single)?;
    let (l, bubbles) = rungs(&rep).swap_remove(0);
    let field = BubbleField::new(bubbles.clone(), &problem, cfg.cutoff)?;
    let k = SyntheticK::new(&problem, l);
    let outer = 0.5 * l;
    let field_norms = star_norms_refined(&field, |y| field.eval(y), cfg.norm_radial, cfg.norm_angular, outer)?;
    let residual_norms =
        star_norms_refined(&field, |y| field.residual(&k, y), cfg.norm_radial, cfg.norm_angular, outer)?;
    let pointwise = pointwise_checks(&field, 1.0, problem.k as f64 + 1.0, 40)?;

    let mut failures = Vec::new();
    for check in [&pointwise.potential, &pointwise.local_domination, &pointwise.power_sum] {
        if check.unbounded {
            failures.push(format!("{}: ratio grows under refinement ({} -> {})", check.name, check.coarse_max_ratio, check.max_ratio));
        }
    }

    // Kernel orthogonality about the central bubble, for both cutoffs.
    let centre = bubbles
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.center[0].abs().total_cmp(&b.1.center[0].abs()))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let n = problem.n as usize;
    let ball = BallRule::new(n, 6, 24);
    let p = problem.mstar() - 2.0;
    let mut orthogonality = Vec::new();
    for cutoff in [Cutoff::Cubic, Cutoff::Quintic] {
        let f = BubbleField::new(bubbles.clone(), &problem, cutoff)?;
        let b = &bubbles[centre];
        let c = b.center.clone();
        // Rescaled so the integrand lives on the unit scale of the bubble.
        let out = ball.integrate_vec(2.0, 2 * n, || (), |_, r, w, o| {
            let y: Vec<f64> = c.iter().zip(w).map(|(x, e)| x + r * e).collect();
            let u = f.bubble(centre, &y).powf(p);
            let z0 = f.eval_z(centre, n + 1, &y).unwrap_or(f64::NAN);
            for j in 1..=n {
                let t = u * z0 * f.eval_z(centre, j, &y).unwrap_or(f64::NAN);
                o[j - 1] = t;
                o[n + j - 1] = t.abs();
            }
        });
        let worst = (0..n)
            .map(|j| if out[n + j] > 0.0 { out[j].abs() / out[n + j] } else { 0.0 })
            .fold(0.0, f64::max);
        if !(worst < cfg.orthogonality_tol) {
            failures.push(format!("kernel orthogonality with {cutoff:?} cutoff: {worst:e}"));
        }
        orthogonality.push((cutoff, worst));
    }

    // Profile along the lattice axis from the central bubble.
    let mut csv = Csv::new(&["distance", "W", "residual", "sigma", "residual_weighted"]);
    let e2 = field.star_star_exponent();
    let b = &bubbles[centre];
    for q in 0..=60 {
        let d = (1e-2 / b.mu) * ((outer * b.mu / 1e-2).ln() * q as f64 / 60.0).exp();
        let mut y = b.center.clone();
        y[0] += d;
        let r = field.residual(&k, &y);
        let s = field.sigma(&y);
        csv.row(&[
            d.to_string(),
            field.eval(&y).to_string(),
            r.to_string(),
            s.to_string(),
            (r.abs() / (s * field.comparison(&y, e2))).to_string(),
        ]);
    }

    let report = FieldReport {
        l,
        bubbles: bubbles.len(),
        cutoff: cfg.cutoff,
        field_norms,
        residual_norms,
        pointwise,
        orthogonality,
    };
    Ok(Outcome {
        command: Command::Report.name(),
        failures,
        report: to_value(&report),
        csv: Some(csv.finish()),
    })
}
