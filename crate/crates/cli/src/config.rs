use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mirrorcp::{AtomParams, ThermalConfig, TimeGrid, TrapConfig};

/// Distance scan: explicit values or a logarithmic range.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ZScan {
    Values(Vec<f64>),
    LogRange { zmin: f64, zmax: f64, zsteps: usize },
}

impl ZScan {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ZScan::Values(v) => v.clone(),
            ZScan::LogRange { zmin, zmax, zsteps } => {
                if *zsteps <= 1 {
                    return vec![*zmin];
                }
                (0..*zsteps)
                    .map(|i| zmin * (zmax / zmin).powf(i as f64 / (*zsteps as f64 - 1.0)))
                    .collect()
            }
        }
    }
}

/// Full run configuration; mirrors the JSON config file field for field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub atom: AtomParams,
    pub thermal: ThermalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ZScan>,
    /// Absolute temperatures for the thermal scan (0 = vacuum row).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_temperatures: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub dimensionless: bool,
}

fn default_count() -> usize {
    1000
}

fn default_format() -> String {
    "csv".into()
}

impl RunConfig {
    pub fn from_file(path: &str) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {path}: {e}"))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("cannot parse config {path}: {e}"))?;
        Ok(cfg)
    }

    /// sha256 of the canonical serialized form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mirrorcp::InverseTemperature;

    #[test]
    fn round_trip_fixpoint() {
        let cfg = RunConfig {
            atom: AtomParams::unit(),
            thermal: ThermalConfig::with_temperatures(InverseTemperature(2.0), InverseTemperature::VACUUM),
            trap: Some(TrapConfig::isotropic(0.2, 20.0)),
            grid: Some(TimeGrid::new(0.0, 0.25, 2048).unwrap()),
            scan: Some(ZScan::LogRange { zmin: 0.01, zmax: 100.0, zsteps: 25 }),
            scan_temperatures: Some(vec![0.0, 0.5, 2.0]),
            seed: 7,
            count: 500,
            output: None,
            format: "csv".into(),
            dimensionless: false,
        };
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        let json2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(json, json2);
        // infinite inverse temperature survives as null
        assert!(!back.thermal.beta_bar.is_finite());
    }

    #[test]
    fn log_range_expansion() {
        let scan = ZScan::LogRange { zmin: 1.0, zmax: 100.0, zsteps: 3 };
        let v = scan.values();
        assert_eq!(v.len(), 3);
        assert!((v[1] - 10.0).abs() < 1e-12);
    }
}
