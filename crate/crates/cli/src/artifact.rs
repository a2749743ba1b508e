//! JSON gains artifact written by `synth` and read by `verify`,
//! `simulate` and `compare`.

use std::path::Path;

use hinf_core::{AugmentedDelaySystem, FilterGains, SynthesisResult};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Row-major matrix.
pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &Rows, shape: (usize, usize), what: &str) -> Result<DMatrix<f64>, String> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(format!("{what} must be {}x{}", shape.0, shape.1));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(format!("{what} has non-finite entries"));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub ny: usize,
    pub nz: usize,
    pub nw: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
}

/// The augmented system the gains were designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRecord {
    pub a_a: Rows,
    pub b_a: Rows,
    pub c_a0: Rows,
    pub c_a1: Rows,
    pub d_a: Rows,
    pub e_a: Rows,
    pub d_r: f64,
    pub d_1: f64,
    pub road_decay: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsArtifact {
    pub schema_version: u32,
    pub dims: Dims,
    pub k_a: Rows,
    pub k_b: Rows,
    pub k_c: Rows,
    pub p: Rows,
    pub q1: Rows,
    pub q2: f64,
    pub gamma: f64,
    pub tau_max: f64,
    pub q1_selected: f64,
    pub certification_margin: f64,
    pub system: SystemRecord,
    pub provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl GainsArtifact {
    pub fn new(result: &SynthesisResult, sys: &AugmentedDelaySystem, config_bytes: &[u8]) -> Self {
        let cert = &result.certificate;
        Self {
            schema_version: SCHEMA_VERSION,
            dims: Dims {
                n: sys.n(),
                ny: sys.c_a0.nrows(),
                nz: sys.e_a.nrows(),
                nw: sys.b_a.ncols(),
            },
            k_a: to_rows(&result.gains.k_a),
            k_b: to_rows(&result.gains.k_b),
            k_c: to_rows(&result.gains.k_c),
            p: to_rows(&cert["P"]),
            q1: to_rows(&cert["Q1"]),
            q2: cert["Q2"][(0, 0)],
            gamma: result.gamma,
            tau_max: result.tau_max,
            q1_selected: result.q1_selected,
            certification_margin: result.certification_margin,
            system: SystemRecord {
                a_a: to_rows(&sys.a_a),
                b_a: to_rows(&sys.b_a),
                c_a0: to_rows(&sys.c_a0),
                c_a1: to_rows(&sys.c_a1),
                d_a: to_rows(&sys.d_a),
                e_a: to_rows(&sys.e_a),
                d_r: sys.d_r,
                d_1: sys.d_1,
                road_decay: sys.road_decay,
                tau_min: sys.tau_min,
                tau_max: sys.tau_max,
            },
            provenance: Provenance {
                config_sha256: sha256_hex(config_bytes),
                tool_version: TOOL_VERSION.to_string(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &Path) -> CliResult<Self> {
        let a: GainsArtifact = serde_json::from_str(text).map_err(|e| CliError::parse(origin, e))?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(CliError::parse(
                origin,
                format!("unsupported schema version {}", a.schema_version),
            ));
        }
        a.gains().map_err(|e| CliError::parse(origin, e))?;
        a.system().map_err(|e| CliError::parse(origin, e))?;
        Ok(a)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn gains(&self) -> Result<FilterGains, String> {
        let Dims { n, ny, nz, .. } = self.dims;
        Ok(FilterGains {
            k_a: from_rows(&self.k_a, (n, n), "k_a")?,
            k_b: from_rows(&self.k_b, (n, ny), "k_b")?,
            k_c: from_rows(&self.k_c, (nz, n), "k_c")?,
        })
    }

    pub fn system(&self) -> Result<AugmentedDelaySystem, String> {
        let Dims { n, ny, nz, nw } = self.dims;
        let s = &self.system;
        from_rows(&self.p, (2 * n, 2 * n), "p")?;
        from_rows(&self.q1, (n, n), "q1")?;
        let sys = AugmentedDelaySystem {
            a_a: from_rows(&s.a_a, (n, n), "a_a")?,
            b_a: from_rows(&s.b_a, (n, nw), "b_a")?,
            c_a0: from_rows(&s.c_a0, (ny, n), "c_a0")?,
            c_a1: from_rows(&s.c_a1, (ny, n), "c_a1")?,
            d_a: from_rows(&s.d_a, (ny, nw), "d_a")?,
            e_a: from_rows(&s.e_a, (nz, n), "e_a")?,
            d_r: s.d_r,
            d_1: s.d_1,
            road_decay: s.road_decay,
            tau_min: s.tau_min,
            tau_max: s.tau_max,
        };
        // Re-run the bound checks.
        sys.with_tau_bounds(s.tau_min, s.tau_max).map_err(|e| e.to_string())
    }
}
