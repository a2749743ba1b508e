//! The four workflows behind the subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use hinf_core::{
    certify, metrics, minimize_gamma, simulate, simulate_kalman, synthesize,
    synthesis::verify_gains, AugmentedDelaySystem, DelayProfile, Error, SimMode, SynthesisOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{sha256_hex, GainsArtifact, Provenance, TOOL_VERSION};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::plot::{self, Panel, Series};
use crate::trace_io;

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn widen_delay(sys: &AugmentedDelaySystem, tau_max: Option<f64>) -> CliResult<AugmentedDelaySystem> {
    match tau_max {
        Some(t) => Ok(sys.with_tau_bounds(sys.tau_min.min(t), t)?),
        None => Ok(sys.clone()),
    }
}

pub struct SynthArgs {
    pub config: PathBuf,
    pub gamma: Option<f64>,
    pub tau_max: Option<f64>,
    pub min_gamma: bool,
    pub output: PathBuf,
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<GainsArtifact> {
    let (cfg, bytes) = Config::load(&a.config)?;
    let sys = widen_delay(&cfg.system()?, a.tau_max)?;
    let opts = cfg.synthesis_options();
    let gamma = a.gamma.unwrap_or(cfg.synthesis.gamma);
    let outcome = if a.min_gamma {
        minimize_gamma(&sys, sys.tau_max, &opts)
    } else {
        synthesize(&sys, gamma, &opts)
    };
    let result = match outcome {
        Ok(r) => r,
        Err(e) => {
            if let Error::SynthesisInfeasible { gamma, margins } = &e {
                let _ = writeln!(err, "no feasible design at gamma = {gamma}");
                if !margins.is_empty() {
                    let _ = writeln!(err, "{:>14}  {:>14}", "q1", "best margin");
                    for (q1, m) in margins {
                        let _ = writeln!(err, "{q1:>14.6e}  {m:>14.6e}");
                    }
                }
            }
            return Err(e.into());
        }
    };
    if !(result.certification_margin < 0.0) {
        return Err(CliError::Uncertified {
            margin: result.certification_margin,
        });
    }
    let sys = sys.with_tau_bounds(sys.tau_min.min(result.tau_max), result.tau_max)?;
    let artifact = GainsArtifact::new(&result, &sys, &bytes);
    write_file(&a.output, &artifact.to_json())?;
    let _ = writeln!(out, "gamma                {}", result.gamma);
    let _ = writeln!(out, "tau_max              {}", result.tau_max);
    let _ = writeln!(out, "q1                   {:e}", result.q1_selected);
    let _ = writeln!(out, "synthesis margin     {:e}", result.synthesis_margin);
    let _ = writeln!(out, "certification margin {:e}", result.certification_margin);
    let _ = writeln!(out, "iterations           {}", result.iterations);
    let _ = writeln!(out, "wrote {}", a.output.display());
    Ok(artifact)
}

pub struct VerifyArgs {
    pub gains: PathBuf,
    pub gamma: Option<f64>,
    pub tau_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub gamma: f64,
    pub tau_max: f64,
    pub margin: f64,
    pub certify: f64,
    pub certified: bool,
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult<VerifyReport> {
    let art = GainsArtifact::load(&a.gains)?;
    let gains = art.gains().map_err(|e| CliError::parse(&a.gains, e))?;
    let base = art.system().map_err(|e| CliError::parse(&a.gains, e))?;
    let gamma = a.gamma.unwrap_or(art.gamma);
    let tau_max = a.tau_max.unwrap_or(art.tau_max);
    let sys = widen_delay(&base, Some(tau_max))?;
    let (problem, cert) = verify_gains(&sys, &gains, gamma, tau_max, &SynthesisOptions::default())?;
    let check = certify(&problem, &cert.values)?;
    let report = VerifyReport {
        gamma,
        tau_max,
        margin: cert.margin,
        certify: check,
        certified: cert.is_feasible() && check < 0.0,
    };
    let _ = writeln!(out, "gamma      {gamma}");
    let _ = writeln!(out, "tau_max    {tau_max}");
    let _ = writeln!(out, "margin     {:e}", report.margin);
    let _ = writeln!(out, "certify    {:e}", report.certify);
    let _ = writeln!(
        out,
        "verdict    {}",
        if report.certified { "certified" } else { "not certified" }
    );
    if report.certified {
        Ok(report)
    } else {
        Err(CliError::Uncertified { margin: check })
    }
}

pub struct SimulateArgs {
    pub gains: PathBuf,
    pub config: PathBuf,
    pub delay: Option<f64>,
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub plot: Option<PathBuf>,
}

fn load_pair(gains: &Path, config: &Path, err: &mut dyn Write) -> CliResult<(GainsArtifact, Config)> {
    let art = GainsArtifact::load(gains)?;
    let (cfg, _) = Config::load(config)?;
    if art.system().ok() != Some(cfg.system()?) {
        let _ = writeln!(
            err,
            "warning: {} was designed for a different system than {} describes",
            gains.display(),
            config.display()
        );
    }
    Ok((art, cfg))
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (art, cfg) = load_pair(&a.gains, &a.config, err)?;
    let gains = art.gains().map_err(|e| CliError::parse(&a.gains, e))?;
    let sys = cfg.system()?;
    let delay = a
        .delay
        .map(|tau| DelayProfile::Constant { tau })
        .unwrap_or(cfg.simulation.delay);
    let trace = simulate(&sys, &gains, &cfg.road(), delay, &cfg.sim_config(a.seed))?;
    write_file(&a.output, &trace_io::to_csv(&trace))?;

    if let Some(path) = &a.plot {
        let pick = |f: &dyn Fn(usize) -> f64| (0..trace.len()).map(f).collect::<Vec<f64>>();
        let x3 = pick(&|k| trace.x_a[k][2]);
        let x3_hat = pick(&|k| trace.x_a[k][2] - trace.e[k][2]);
        let x4 = pick(&|k| trace.x_a[k][3]);
        let x4_hat = pick(&|k| trace.x_a[k][3] - trace.e[k][3]);
        let svg = plot::render(
            &trace.t,
            &[
                Panel {
                    title: "suspension deflection x3",
                    y_label: "x3 [m]",
                    series: vec![
                        Series { label: "true", values: &x3 },
                        Series { label: "estimate", values: &x3_hat },
                    ],
                },
                Panel {
                    title: "sprung mass velocity x4",
                    y_label: "x4 [m/s]",
                    series: vec![
                        Series { label: "true", values: &x4 },
                        Series { label: "estimate", values: &x4_hat },
                    ],
                },
            ],
        );
        write_file(path, &svg)?;
    }

    let m = metrics(&trace)?;
    let _ = writeln!(out, "steps      {}", trace.len() - 1);
    let _ = writeln!(out, "rmse       {:?}", m.rmse);
    let _ = writeln!(out, "peak |e|   {:?}", m.peak);
    match m.energy_ratio {
        Some(r) => {
            let _ = writeln!(out, "energy     {r:e} (gamma^2 = {:e})", art.gamma * art.gamma);
        }
        None => {
            let _ = writeln!(out, "energy     undefined (no disturbance energy)");
        }
    }
    let _ = writeln!(out, "wrote {}", a.output.display());
    Ok(())
}

pub struct CompareArgs {
    pub gains: PathBuf,
    pub config: PathBuf,
    pub delays: Vec<f64>,
    pub seeds: usize,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Lower median RMSE on both x3 and x4.
    Hinf,
    /// Kalman no worse on both.
    Kalman,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySummary {
    pub delay: f64,
    pub hinf_median_rmse_x3: f64,
    pub hinf_median_rmse_x4: f64,
    pub kalman_median_rmse_x3: f64,
    pub kalman_median_rmse_x4: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSummary {
    pub schema_version: u32,
    pub seeds: usize,
    pub base_seed: u64,
    pub sigma_w: f64,
    pub mode: SimMode,
    pub gamma: f64,
    pub tau_max: f64,
    pub results: Vec<DelaySummary>,
    pub provenance: Provenance,
}

pub const COMPARE_SCHEMA_VERSION: u32 = 1;

/// (delay index, seed index, H-inf RMSE, Kalman RMSE).
type Run = (usize, usize, [f64; 4], [f64; 4]);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn cmd_compare(a: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<CompareSummary> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    if a.delays.is_empty() {
        return Err(CliError::Usage("--delays needs at least one value".into()));
    }
    let (art, cfg) = load_pair(&a.gains, &a.config, err)?;
    let gains = art.gains().map_err(|e| CliError::parse(&a.gains, e))?;
    let sys = cfg.system()?;
    let kalman = cfg.kalman()?;
    let road = cfg.road();
    let base_seed = cfg.simulation.seed;

    let jobs: Vec<(usize, usize)> = (0..a.delays.len())
        .flat_map(|d| (0..a.seeds).map(move |s| (d, s)))
        .collect();
    let mut runs = jobs
        .par_iter()
        .map(|&(d, s)| -> CliResult<Run> {
            let delay = DelayProfile::Constant { tau: a.delays[d] };
            let sim = cfg.sim_config(Some(base_seed.wrapping_add(s as u64)));
            let h = simulate(&sys, &gains, &road, delay, &sim)?;
            let k = simulate_kalman(&sys, &kalman, &road, delay, &sim)?;
            Ok((d, s, metrics(&h)?.rmse, metrics(&k)?.rmse))
        })
        .collect::<CliResult<Vec<_>>>()?;
    runs.sort_by_key(|r| (r.0, r.1));

    let results: Vec<DelaySummary> = a
        .delays
        .iter()
        .enumerate()
        .map(|(d, &delay)| {
            let col = |pick: &dyn Fn(&Run) -> f64| {
                median(runs.iter().filter(|r| r.0 == d).map(pick).collect())
            };
            let h3 = col(&|r| r.2[2]);
            let h4 = col(&|r| r.2[3]);
            let k3 = col(&|r| r.3[2]);
            let k4 = col(&|r| r.3[3]);
            let verdict = match (h3 < k3, h4 < k4) {
                (true, true) => Verdict::Hinf,
                (false, false) => Verdict::Kalman,
                _ => Verdict::Mixed,
            };
            DelaySummary {
                delay,
                hinf_median_rmse_x3: h3,
                hinf_median_rmse_x4: h4,
                kalman_median_rmse_x3: k3,
                kalman_median_rmse_x4: k4,
                verdict,
            }
        })
        .collect();

    let config_bytes = std::fs::read(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let summary = CompareSummary {
        schema_version: COMPARE_SCHEMA_VERSION,
        seeds: a.seeds,
        base_seed,
        sigma_w: cfg.simulation.sigma_w,
        mode: cfg.simulation.mode,
        gamma: art.gamma,
        tau_max: art.tau_max,
        results,
        provenance: Provenance {
            config_sha256: sha256_hex(&config_bytes),
            tool_version: TOOL_VERSION.to_string(),
        },
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&a.output, &json)?;

    let _ = writeln!(
        out,
        "{:>7}  {:>12} {:>12}  {:>12} {:>12}  verdict",
        "delay", "hinf x3", "kalman x3", "hinf x4", "kalman x4"
    );
    for r in &summary.results {
        let _ = writeln!(
            out,
            "{:>7.3}  {:>12.4e} {:>12.4e}  {:>12.4e} {:>12.4e}  {:?}",
            r.delay,
            r.hinf_median_rmse_x3,
            r.kalman_median_rmse_x3,
            r.hinf_median_rmse_x4,
            r.kalman_median_rmse_x4,
            r.verdict
        );
    }
    let _ = writeln!(out, "wrote {}", a.output.display());
    Ok(summary)
}
