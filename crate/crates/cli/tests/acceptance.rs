//! One pass/fail line per acceptance criterion. Runs with `harness = false`
//! so the lines print in order; exits nonzero when any criterion fails.

use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use num::{BigRational, One, Signed};
use polybubble::quadrature::moments::{axis_moment, radial_moment, MomentWeight};
use polybubble::quadrature::SphereRule;
use polybubble::radial::{polyharmonic_constant, verify_bubble_pde};
use polybubble::reduced::{linearized_bound, random_interaction, solve_heights, uniqueness_stress};
use polybubble::{HeightSystem, SolverOptions};
use polybubble_cli::commands::{identity_suite, roundtrip_suite, scan_l, solve};
use polybubble_cli::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn exact_kernel() -> Verdict {
    let mut worst = Duration::ZERO;
    for (m, n) in [(1, 5), (2, 7), (3, 9), (2, 10)] {
        let t = Instant::now();
        let res = match verify_bubble_pde(m, n) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("(m, N) = ({m}, {n}): {e}")),
        };
        let dt = t.elapsed();
        worst = worst.max(dt);
        if !res.is_zero() {
            return verdict(false, format!("(m, N) = ({m}, {n}) residual {res}"));
        }
        if dt >= Duration::from_secs(1) {
            return verdict(false, format!("(m, N) = ({m}, {n}) took {}", secs(dt)));
        }
    }
    verdict(true, format!("four residuals exactly zero, slowest {}", secs(worst)))
}

fn constants() -> Verdict {
    let int = |v: i64| BigRational::from_integer(v.into());
    for (m, n, want) in [(1, 5, BigRational::one()), (1, 9, BigRational::one()), (2, 7, int(6)), (2, 10, int(12))] {
        match polyharmonic_constant(m, n) {
            Ok(c) if c == want => {}
            Ok(c) => return verdict(false, format!("c'_{m}(N={n}) = {c}, expected {want}")),
            Err(e) => return verdict(false, e.to_string()),
        }
    }
    let mut count = 0;
    for m in 1..=4u32 {
        for n in (2 * m + 1)..=15 {
            match polyharmonic_constant(m, n) {
                Ok(c) if c.is_positive() => count += 1,
                Ok(c) => return verdict(false, format!("c'_{m}(N={n}) = {c} is not positive")),
                Err(e) => return verdict(false, e.to_string()),
            }
        }
    }
    verdict(true, format!("exact values match; {count} constants positive for m <= 4, N <= 15"))
}

fn roundtrips(cfg: &RunConfig) -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (reports, failures) = match roundtrip_suite(cfg, &mut rng) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let dt = t.elapsed();
    let worst = reports.iter().map(|r| r.max_rel_error()).fold(0.0, f64::max);
    let detail = format!(
        "{} pairs at degree {}, worst relative error {worst:.1e}, {}",
        reports.len(),
        cfg.roundtrip_degree,
        secs(dt)
    );
    if let Some(f) = failures.first() {
        return verdict(false, format!("{f}; {detail}"));
    }
    verdict(dt < Duration::from_secs(60), detail)
}

fn identities(cfg: &RunConfig) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (rep, failures) = match identity_suite(cfg, &mut rng) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let vanish = rep.vanishing.iter().map(|v| v.max_relative).fold(0.0, f64::max);
    let selfp = rep.v_identities.iter().map(|v| v.self_pairing).fold(0.0, f64::max);
    let trans = rep.transport.iter().map(|t| t.rel_difference).fold(0.0, f64::max);
    let detail = format!("vanishing {vanish:.1e}, self pairing {selfp:.1e}, transport {trans:.1e}");
    match failures.first() {
        Some(f) => verdict(false, format!("{f}; {detail}")),
        None => verdict(true, detail),
    }
}

fn solver() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions::default();
    let sizes = [2usize, 5, 10, 25, 50, 80, 110, 140, 170, 200];
    let (mut spread, mut residual, mut min_sv) = (0.0f64, 0.0f64, f64::INFINITY);
    for (i, &n) in sizes.iter().enumerate() {
        let kappa = rng.random_range(1.1..3.0);
        let b = rng.random_range(0.5..5.0);
        let d = random_interaction(n, &mut rng);
        let run = || -> polybubble::Result<_> {
            let sys = HeightSystem::new(d?, kappa, b)?;
            let sol = solve_heights(&sys, &opts)?;
            let u = uniqueness_stress(&sys, 20, &opts, i as u64)?;
            let lin = linearized_bound(&sys, &sol, 200, i as u64)?;
            Ok((sol, u, lin))
        };
        match run() {
            Ok((sol, u, lin)) => {
                spread = spread.max(u.spread);
                residual = residual.max(sol.relative_residual).max(u.max_relative_residual);
                min_sv = min_sv.min(lin.min_singular);
            }
            Err(e) => return verdict(false, format!("system of size {n}: {e}")),
        }
    }
    let dt = t.elapsed();
    let detail = format!(
        "10 systems up to n = 200: spread {spread:.1e}, residual {residual:.1e}, min singular value {min_sv:.3e}, {}",
        secs(dt)
    );
    let ok = spread < 1e-10 && residual < 1e-12 && min_sv > 0.0 && dt < Duration::from_secs(10);
    verdict(ok, detail)
}

fn scaling(cfg: &RunConfig) -> Verdict {
    let out = match solve(cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let ladder = &out.report["ladder"];
    let slope = ladder["fitted_slope"].as_f64().unwrap_or(f64::NAN);
    let dev = ladder["relative_deviation"].as_f64().unwrap_or(f64::NAN);
    let mirror = ladder["rows"]
        .as_array()
        .map(|rows| rows.iter().filter_map(|r| r["mirror_asymmetry"].as_f64()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    let detail = format!("slope {slope:.10} (deviation {dev:.1e}), mirror asymmetry {mirror:.1e}");
    if let Some(f) = out.failures.first() {
        return verdict(false, format!("{f}; {detail}"));
    }
    verdict(dev < 0.01 && mirror <= 1e-10, detail)
}

fn residual_decay(cfg: &RunConfig) -> Verdict {
    let out = match scan_l(cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let r = &out.report["residual"];
    let detail = format!(
        "fitted rate {:.4} against {:.4} (deviation {:.1e}), strictly decreasing: {}",
        r["fitted_rate"].as_f64().unwrap_or(f64::NAN),
        r["predicted_rate"].as_f64().unwrap_or(f64::NAN),
        r["relative_deviation"].as_f64().unwrap_or(f64::NAN),
        r["strictly_decreasing"]
    );
    match out.failures.first() {
        Some(f) => verdict(false, format!("{f}; {detail}")),
        None => verdict(true, detail),
    }
}

fn oracles() -> Verdict {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (n, m) in [(5u32, 1u32), (7, 1), (7, 2), (9, 3), (10, 2)] {
        for weight in [MomentWeight::BubblePower, MomentWeight::InteractionMass, MomentWeight::DilationPairing] {
            for p in [0.0, 1.0, 2.0, 2.5, n as f64 - 2.0 * m as f64 + 0.5] {
                for mm in [radial_moment(n, m, p, weight), axis_moment(n, m, p, weight)].into_iter().flatten() {
                    let Some(o) = mm.oracle else { continue };
                    // A vanishing oracle (the dilation pairing at p = 0) has
                    // no relative scale of its own; use the absolute mass.
                    let denom = if o.abs() > 1e-6 * mm.scale { o.abs() } else { mm.scale };
                    worst = worst.max((mm.value - o).abs() / denom);
                    checked += 1;
                }
            }
        }
    }
    let mut odd = 0.0f64;
    for (n, deg) in [(3usize, 9usize), (5, 11), (7, 13)] {
        let rule = SphereRule::new(n, deg);
        for e in [[1u32, 0, 0], [3, 2, 0], [2, 1, 4], [5, 4, 2], [1, 1, 1]] {
            let mono = |w: &[f64]| w[0].powi(e[0] as i32) * w[1].powi(e[1] as i32) * w[2].powi(e[2] as i32);
            let v = rule.integrate(mono);
            let mass = rule.integrate(|w| mono(w).abs());
            odd = odd.max(v.abs() / mass);
        }
    }
    let detail = format!("{checked} moments, worst relative error {worst:.1e}; odd sphere monomials {odd:.1e} of mass");
    verdict(checked > 0 && worst < 1e-10 && odd < 1e-12, detail)
}

const LIGHT: &str = r#"
box_radius = 2
l_scan = [8.0, 16.0]
l = 8.0
uniqueness_restarts = 10
roundtrip_orders = [1, 2]
roundtrip_pairs = 1
roundtrip_degree = 12
roundtrip_radial_nodes = 6
norm_radial = 24
"#;

fn read_dir_sorted(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

fn reproducibility() -> Verdict {
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => return verdict(false, e.to_string()),
    };
    let cfg_path = tmp.path().join("light.toml");
    if let Err(e) = std::fs::write(&cfg_path, LIGHT) {
        return verdict(false, e.to_string());
    }
    let commands = ["verify-kernel", "pohozaev-check", "solve", "scan-L", "constants", "report"];
    for cmd in commands {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{cmd}-{run}"));
            let status = Process::new(env!("CARGO_BIN_EXE_polybubble"))
                .arg(cmd)
                .arg("--config")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .arg("--seed")
                .arg("7")
                .output();
            match status {
                Ok(s) if s.status.code().is_some_and(|c| c <= 1) => {}
                Ok(s) => return verdict(false, format!("{cmd}: exit {:?}: {}", s.status.code(), String::from_utf8_lossy(&s.stderr))),
                Err(e) => return verdict(false, format!("{cmd}: {e}")),
            }
            match read_dir_sorted(&out) {
                Ok(f) if !f.is_empty() => outputs.push(f),
                Ok(_) => return verdict(false, format!("{cmd}: no output files")),
                Err(e) => return verdict(false, format!("{cmd}: {e}")),
            }
        }
        if outputs[0] != outputs[1] {
            return verdict(false, format!("{cmd}: outputs differ between runs"));
        }
    }
    verdict(true, format!("{} commands byte-identical across two runs", commands.len()))
}

fn main() {
    let cfg = RunConfig::default();
    let criteria: [(&str, Box<dyn Fn() -> Verdict>); 9] = [
        ("exact bubble equation", Box::new(exact_kernel)),
        ("polyharmonic constants", Box::new(constants)),
        ("boundary identity round trips", Box::new(|| roundtrips(&cfg))),
        ("vanishing identities", Box::new(|| identities(&cfg))),
        ("height solver", Box::new(solver)),
        ("scaling law", Box::new(|| scaling(&cfg))),
        ("residual decay", Box::new(|| residual_decay(&cfg))),
        ("quadrature oracles", Box::new(oracles)),
        ("reproducibility", Box::new(reproducibility)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        let status = if v.passed { "PASS" } else { "FAIL" };
        if !v.passed {
            failed += 1;
        }
        println!("criterion {}: {status} {name}: {} [{}]", i + 1, v.detail, secs(t.elapsed()));
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
