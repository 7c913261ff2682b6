//! Convention sheet, report header and deterministic serialization helpers.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::curvature::CURVATURE_SIGN;
use crate::error::Result;
use crate::models::HopfAnsatz;
use crate::toric::DDC;

pub const TOOL: &str = "gylab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The sign and normalization choices every number in a report depends on.
pub fn convention_sheet() -> String {
    let hopf = HopfAnsatz::default();
    let mut s = String::new();
    s.push_str("coordinates: z_i = x_{2i} + sqrt(-1) x_{2i+1}; d/dz = (d/dx - sqrt(-1) d/dy)/2\n");
    s.push_str("metric: g_{i jbar}, omega = sqrt(-1) g_{i jbar} dz_i ^ dzbar_j\n");
    s.push_str("connection family: t = 1 Chern, t = -1 Bismut, C_t = 1 + (n-1) t\n");
    s.push_str(&format!(
        "curvature sign: {CURVATURE_SIGN:+} (Ric(Fubini-Study) = +(n+1) g)\n"
    ));
    s.push_str("two-form storage: alpha = sqrt(-1) h_{i jbar} dz_i ^ dzbar_j, (2,0) and (0,2) blocks raw\n");
    s.push_str("trace: tr_omega alpha = g^{i jbar} h_{i jbar}, so tr_omega omega = n\n");
    s.push_str("chern laplacian: Delta f = -2 g^{i jbar} d_i dbar_j f\n");
    s.push_str("volume density: dmu = det(g_{i jbar}) dlambda (chart Lebesgue measure)\n");
    s.push_str(&format!(
        "ddc: dd^c f = {} sqrt(-1) d dbar f\n",
        DDC.factor()
    ));
    s.push_str("conformal ricci (exponent e^f on the metric): (Ric^t)^{1,1} gains (t - n t - 1) sqrt(-1) d dbar f\n");
    s.push_str("  t = -1: (n-2) sqrt(-1) d dbar f = (n-2)/2 * (2 sqrt(-1) d dbar f)\n");
    s.push_str("  t = 0: -sqrt(-1) d dbar f; t = 1: -n sqrt(-1) d dbar f\n");
    s.push_str(
        "yamabe factor: metric e^{2f/C_t} omega; equation Delta f + S^t = lambda e^{2f/C_t}\n",
    );
    s.push_str(&format!(
        "hopf metric: alpha delta/|z|^2 + {} beta zbar_i z_j/|z|^4\n",
        hopf.beta_weight()
    ));
    s.push_str("positivity floor: per node lambda_min >= 0.1 lambda_max\n");
    s
}

pub fn convention_hash() -> String {
    let digest = Sha256::digest(convention_sheet().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub convention_sha256: String,
    pub seed: u64,
    pub tol: f64,
    pub config: serde_json::Value,
}

impl ReportHeader {
    pub fn new(seed: u64, tol: f64, config: serde_json::Value) -> Self {
        ReportHeader {
            tool: TOOL,
            version: VERSION,
            convention_sha256: convention_hash(),
            seed,
            tol,
            config,
        }
    }
}

/// Header and body under fixed keys, so identical runs give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub header: ReportHeader,
    pub body: T,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_hex() {
        let h = convention_hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, convention_hash());
    }

    #[test]
    fn report_serializes_header_first() {
        let r = Report {
            header: ReportHeader::new(7, 1e-8, serde_json::json!({"a": 1})),
            body: vec![1.0, 2.0],
        };
        let s = to_json(&r).unwrap();
        assert!(s.find("\"header\"").unwrap() < s.find("\"body\"").unwrap());
        assert!(s.contains("\"seed\": 7"));
    }
}
