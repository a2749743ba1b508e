//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hinf_cli::commands::{cmd_compare, cmd_simulate, cmd_verify, CompareArgs, SimulateArgs, VerifyArgs, Verdict};
use hinf_cli::artifact::GainsArtifact;
use hinf_cli::config::Config;
use hinf_cli::{plot, trace_io};
use hinf_core::model::reference_system;
use hinf_core::synthesis::{change_of_variables, phi1, phi2};
use hinf_core::{
    certify, metrics, schur_check, simulate, synthesize, DelayProfile, FilterGains, RoadProfile, SimConfig,
    SimMode, SynthesisOptions, SynthesisResult,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SECTION5: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/section5.cfg");

// Pinned tolerances.
const AC1_MARGIN: f64 = -1e-8;
const AC1_BUDGET: Duration = Duration::from_secs(30);
const AC2_TOL: f64 = 1e-6;
const AC3_SCHUR_SAMPLES: usize = 200;
const AC3_BOUND_SAMPLES: usize = 200;
const AC3_BOUND_TOL: f64 = 1e-10;
const AC3_ORDERED_SAMPLES: usize = 100;
const AC3_ORDERED_TOL: f64 = 1e-9;
const AC4_SEEDS: u64 = 20;
const AC4_BUDGET: Duration = Duration::from_secs(60);
const AC5_SEEDS: usize = 10;
const AC6_TOL: f64 = 1e-10;
const AC7_RANGE: (f64, f64) = (12.0, 20.0);

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

fn operating_point(rep: &mut Report) -> SynthesisResult {
    let start = Instant::now();
    let r = synthesize(&reference_system(), 0.5, &SynthesisOptions::default()).expect("operating point");
    let took = start.elapsed();
    rep.line(
        "AC1 synthesis at gamma 0.5, tau_max 0.5",
        r.certification_margin < AC1_MARGIN && took < AC1_BUDGET,
        format!(
            "margin {:e} (< {AC1_MARGIN:e}), q1 {:e}, {:.1} s (< {} s)",
            r.certification_margin,
            r.q1_selected,
            took.as_secs_f64(),
            AC1_BUDGET.as_secs()
        ),
    );
    r
}

fn round_trip(rep: &mut Report, r: &SynthesisResult) {
    let sys = reference_system();
    let f1 = phi1(&r.x, &r.m);
    let f2 = phi2(&r.y, &r.n);
    let pf = inf_norm(&(&r.p * &f1 - &f2)) / inf_norm(&f2);
    let mut xy = DMatrix::zeros(10, 10);
    xy.view_mut((0, 0), (5, 5)).copy_from(&r.x);
    xy.view_mut((0, 5), (5, 5)).fill_with_identity();
    xy.view_mut((5, 0), (5, 5)).fill_with_identity();
    xy.view_mut((5, 5), (5, 5)).copy_from(&r.y);
    let congr = rel(&(f1.transpose() * &r.p * &f1), &xy);
    let (a_s, b_s, c_s) = change_of_variables(&r.gains, &r.x, &r.y, &r.m, &r.n, &sys);
    let rebuilt = rel(&a_s, &r.script_a).max(rel(&b_s, &r.script_b)).max(rel(&c_s, &r.script_c));
    rep.line(
        "AC2 certification round-trip",
        pf <= AC2_TOL && congr <= AC2_TOL && rebuilt <= AC2_TOL,
        format!("P*Phi1 vs Phi2 {pf:.2e}, Phi1'P Phi1 {congr:.2e}, rebuilt variables {rebuilt:.2e} (each <= {AC2_TOL:e})"),
    );
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn inequality_suites(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut mismatches = 0;
    let mut done = 0;
    while done < AC3_SCHUR_SAMPLES {
        let m = random(&mut rng, 6, 6);
        let s = (&m + m.transpose()) * 0.5 + DMatrix::identity(6, 6) * rng.random_range(-3.0..1.0);
        let s22 = s.view((3, 3), (3, 3)).into_owned();
        if s22.determinant().abs() < 1e-8 {
            continue;
        }
        let direct = s.symmetric_eigenvalues().max() < 0.0;
        let reduced = schur_check(
            &s.view((0, 0), (3, 3)).into_owned(),
            &s.view((0, 3), (3, 3)).into_owned(),
            &s22,
        )
        .unwrap();
        mismatches += usize::from(direct != reduced);
        done += 1;
    }

    let mut worst_bound = f64::INFINITY;
    for _ in 0..AC3_BOUND_SAMPLES {
        let (x, y) = (random(&mut rng, 4, 5), random(&mut rng, 4, 5));
        let eps = 10f64.powf(rng.random_range(-3.0..3.0));
        let m = x.transpose() * &x * eps + y.transpose() * &y / eps - x.transpose() * &y - y.transpose() * &x;
        worst_bound = worst_bound.min(((&m + m.transpose()) * 0.5).symmetric_eigenvalues().min());
    }

    let mut worst_gap = f64::INFINITY;
    for _ in 0..AC3_ORDERED_SAMPLES {
        let a = rng.random_range(-2.0..2.0);
        let len = rng.random_range(0.1..3.0);
        let (c0, c1) = (rng.random_range(0.1..2.0), rng.random_range(0.0..2.0));
        let f = |s: f64| c1 * s + c0 * s.powi(3);
        let k = 2000;
        let h = len / k as f64;
        let simpson = |g: &dyn Fn(f64) -> f64| {
            let mut acc = g(a) + g(a + len);
            for i in 1..k {
                acc += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let mean_ff = simpson(&|s| f(s) * f(s)) / len;
        let mean_f = simpson(&f) / len;
        worst_gap = worst_gap.min(mean_ff - mean_f * mean_f);
    }

    rep.line(
        "AC3 inequality suites",
        mismatches == 0 && worst_bound >= -AC3_BOUND_TOL && worst_gap >= -AC3_ORDERED_TOL,
        format!(
            "schur mismatches {mismatches}/{AC3_SCHUR_SAMPLES}, matrix bound min eig {worst_bound:.2e} (>= -{AC3_BOUND_TOL:e}) over {AC3_BOUND_SAMPLES}, ordered product gap {worst_gap:.2e} (>= -{AC3_ORDERED_TOL:e}) over {AC3_ORDERED_SAMPLES}"
        ),
    );
}

fn empirical_bound(rep: &mut Report, r: &SynthesisResult) {
    let sys = reference_system();
    let delay = DelayProfile::Sinusoid {
        mean: 0.25,
        amplitude: 0.25,
        period: 3.0,
    };
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all = true;
    for seed in 0..AC4_SEEDS {
        let cfg = SimConfig {
            seed,
            sigma_w: 1.0,
            mode: SimMode::ModelConsistent,
            ..SimConfig::default()
        };
        let tr = simulate(&sys, &r.gains, &RoadProfile::zero(), delay, &cfg).unwrap();
        let ratio = metrics(&tr).unwrap().energy_ratio;
        all &= ratio.is_some_and(|v| v < r.gamma * r.gamma);
        worst = worst.max(ratio.unwrap_or(f64::INFINITY));
    }
    let took = start.elapsed();
    rep.line(
        "AC4 empirical attenuation bound",
        all && took < AC4_BUDGET,
        format!(
            "worst energy ratio {worst:.3e} (< {}) over {AC4_SEEDS} seeds, {:.1} s (< {} s)",
            r.gamma * r.gamma,
            took.as_secs_f64(),
            AC4_BUDGET.as_secs()
        ),
    );
}

fn write_artifact(dir: &Path, r: &SynthesisResult) -> PathBuf {
    let bytes = std::fs::read(SECTION5).unwrap();
    let (cfg, _) = Config::load(Path::new(SECTION5)).unwrap();
    let art = GainsArtifact::new(r, &cfg.system().unwrap(), &bytes);
    let path = dir.join("gains.json");
    std::fs::write(&path, art.to_json()).unwrap();
    path
}

fn comparison(rep: &mut Report, dir: &Path, gains: &Path) -> PathBuf {
    let json = dir.join("compare.json");
    let args = CompareArgs {
        gains: gains.to_path_buf(),
        config: SECTION5.into(),
        delays: vec![0.2, 0.45],
        seeds: AC5_SEEDS,
        output: json.clone(),
    };
    let summary = cmd_compare(&args, &mut std::io::sink(), &mut std::io::sink()).unwrap();
    let at = |d: f64| summary.results.iter().find(|r| r.delay == d).unwrap();
    let (short, long) = (at(0.2), at(0.45));
    rep.line(
        "AC5 comparison against the Kalman baseline",
        short.verdict == Verdict::Hinf,
        format!(
            "delay 0.2 over {AC5_SEEDS} seeds: x3 {:.3e} vs {:.3e}, x4 {:.3e} vs {:.3e} (hinf vs kalman, both must be lower); delay 0.45 verdict {:?}",
            short.hinf_median_rmse_x3,
            short.kalman_median_rmse_x3,
            short.hinf_median_rmse_x4,
            short.kalman_median_rmse_x4,
            long.verdict
        ),
    );
    json
}

fn oracle_agreement(rep: &mut Report, r: &SynthesisResult, gains: &Path) {
    let sys = reference_system();
    let problem = r.analysis_problem(&sys).unwrap();
    let check = certify(&problem, &r.certificate).unwrap();
    let mut worst = (check - r.certification_margin).abs();
    let mut negative = check < 0.0;
    for tau_max in [None, Some(1.0)] {
        let args = VerifyArgs {
            gains: gains.to_path_buf(),
            gamma: None,
            tau_max,
        };
        if let Ok(v) = cmd_verify(&args, &mut std::io::sink()) {
            worst = worst.max((v.certify - v.margin).abs());
            negative &= v.certify < 0.0;
        } else if tau_max.is_none() {
            negative = false;
        }
    }
    rep.line(
        "AC6 solver and eigenvalue oracle agree",
        negative && worst <= AC6_TOL,
        format!("max |certify - margin| {worst:.2e} (<= {AC6_TOL:e}), certify {check:e}"),
    );
}

fn integrator_order(rep: &mut Report) {
    let sys = reference_system();
    let none = FilterGains {
        k_a: DMatrix::zeros(5, 5),
        k_b: DMatrix::zeros(5, 4),
        k_c: DMatrix::zeros(4, 5),
    };
    let x0 = [0.01, -0.02, 0.0, 0.1, 0.05];
    let exact = (&sys.a_a * 1.0).exp() * DVector::from_row_slice(&x0);
    let err = |dt: f64| {
        let cfg = SimConfig {
            dt,
            horizon: 1.0,
            sigma_w: 0.0,
            mode: SimMode::ModelConsistent,
            x0,
            ..SimConfig::default()
        };
        let tr = simulate(&sys, &none, &RoadProfile::zero(), DelayProfile::Constant { tau: 0.0 }, &cfg).unwrap();
        let last = tr.x_a.last().unwrap();
        (0..5).map(|i| (last[i] - exact[i]).abs()).fold(0.0, f64::max)
    };
    let ratio = err(0.01) / err(0.005);
    rep.line(
        "AC7 integrator order",
        (AC7_RANGE.0..=AC7_RANGE.1).contains(&ratio),
        format!("error ratio dt 0.01 / 0.005 = {ratio:.2} (in [{}, {}])", AC7_RANGE.0, AC7_RANGE.1),
    );
}

fn formats(rep: &mut Report, dir: &Path, gains: &Path, compare_json: &Path) {
    let run = |name: &str, plot: Option<PathBuf>| {
        let output = dir.join(name);
        let args = SimulateArgs {
            gains: gains.to_path_buf(),
            config: SECTION5.into(),
            delay: Some(0.2),
            seed: Some(42),
            output: output.clone(),
            plot,
        };
        cmd_simulate(&args, &mut std::io::sink(), &mut std::io::sink()).unwrap();
        std::fs::read(output).unwrap()
    };
    let svg = dir.join("trace.svg");
    let a = run("a.csv", Some(svg.clone()));
    let b = run("b.csv", None);
    let identical = a == b;

    let text = String::from_utf8(a).unwrap();
    let (cfg, _) = Config::load(Path::new(SECTION5)).unwrap();
    let art = GainsArtifact::load(gains).unwrap();
    let direct = simulate(
        &cfg.system().unwrap(),
        &art.gains().unwrap(),
        &cfg.road(),
        DelayProfile::Constant { tau: 0.2 },
        &cfg.sim_config(Some(42)),
    )
    .unwrap();
    let csv_ok = text.lines().next() == Some(trace_io::HEADER)
        && text.lines().all(|l| l.split(',').count() == trace_io::COLUMNS)
        && trace_io::from_csv(&text).is_ok_and(|t| t == direct);
    let gains_ok = GainsArtifact::from_json(&std::fs::read_to_string(gains).unwrap(), gains).is_ok_and(|g| g == art);
    let svg_ok = plot::parse_polylines(&std::fs::read_to_string(&svg).unwrap()).is_ok_and(|p| p.len() == 4);
    let cmp_text = std::fs::read_to_string(compare_json).unwrap();
    let cmp_ok = serde_json::from_str::<hinf_cli::commands::CompareSummary>(&cmp_text)
        .is_ok_and(|c| serde_json::to_string_pretty(&c).unwrap() + "\n" == cmp_text);
    rep.line(
        "AC8 determinism and formats",
        identical && csv_ok && gains_ok && svg_ok && cmp_ok,
        format!("identical csv {identical}, csv {csv_ok}, gains json {gains_ok}, svg {svg_ok}, compare json {cmp_ok}"),
    );
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes us means skip.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let mut rep = Report { failed: 0 };
    let dir = tempfile::TempDir::new().unwrap();
    let r = operating_point(&mut rep);
    round_trip(&mut rep, &r);
    inequality_suites(&mut rep);
    empirical_bound(&mut rep, &r);
    let gains = write_artifact(dir.path(), &r);
    let compare_json = comparison(&mut rep, dir.path(), &gains);
    oracle_agreement(&mut rep, &r, &gains);
    integrator_order(&mut rep);
    formats(&mut rep, dir.path(), &gains, &compare_json);

    println!("acceptance: {} of 8 criteria passed", 8 - rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
