use std::path::{Path, PathBuf};

use anyhow::Context;
use hml_core::catalog::MetricSpec;
use hml_core::conformal::PsiSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub metric: MetricSpec,
    #[serde(default)]
    pub deform: Option<DeformSpec>,
    #[serde(default)]
    pub analysis: Analysis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformSpec {
    pub psi: PsiSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Curvature,
    CheckHarmonic,
    Expand,
    Deform,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Curvature => "curvature",
            CommandName::CheckHarmonic => "check-harmonic",
            CommandName::Expand => "expand",
            CommandName::Deform => "deform",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    /// When present it must agree with the subcommand.
    pub command: Option<CommandName>,
    /// Base point for harmonicity and expansions; the chart origin by default.
    pub center: Option<Vec<f64>>,
    /// Points for curvature reports.
    pub points: Option<Vec<Vec<f64>>>,
    pub radii: Option<Vec<f64>>,
    pub directions: Option<usize>,
    pub tolerance: Option<f64>,
    pub fit: Option<FitSpec>,
    /// Largest base radius covered by the reparametrization.
    pub r_max: Option<f64>,
    pub blowup: Option<BlowupSpec>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub order: Option<usize>,
    pub samples: Option<usize>,
    pub r_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSpec {
    #[serde(default = "default_u_min")]
    pub u_min: f64,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_u_samples")]
    pub samples: usize,
}

fn default_u_min() -> f64 {
    1e-4
}
fn default_u_max() -> f64 {
    1e-2
}
fn default_u_samples() -> usize {
    25
}

/// Command-line overrides of the analysis block.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub directions: Option<usize>,
    pub radii: Option<Vec<f64>>,
}

impl Manifest {
    /// Parses without validating; call [`Manifest::validate`] once overrides are applied.
    pub fn load(path: &Path) -> anyhow::Result<Manifest> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let a = &self.analysis;
        if let Some(r) = &a.radii {
            anyhow::ensure!(!r.is_empty(), "analysis.radii is empty");
            anyhow::ensure!(
                r[0] > 0.0 && r.windows(2).all(|w| w[1] > w[0]),
                "analysis.radii must be positive and strictly increasing"
            );
        }
        if let Some(d) = a.directions {
            anyhow::ensure!(d >= 1, "analysis.directions must be at least 1");
        }
        if let Some(t) = a.tolerance {
            anyhow::ensure!(t > 0.0, "analysis.tolerance must be positive");
        }
        if let Some(b) = &a.blowup {
            anyhow::ensure!(
                0.0 < b.u_min && b.u_min < b.u_max && b.u_max < 1.0 && b.samples >= 3,
                "analysis.blowup needs 0 < u_min < u_max < 1 and at least 3 samples"
            );
        }
        if let Some(f) = &a.fit {
            if let Some(r) = f.r_max {
                anyhow::ensure!(r > 0.0, "analysis.fit.r_max must be positive");
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        let a = &mut self.analysis;
        if o.out.is_some() {
            a.out = o.out.clone();
        }
        if o.tol.is_some() {
            a.tolerance = o.tol;
        }
        if o.directions.is_some() {
            a.directions = o.directions;
        }
        if o.radii.is_some() {
            a.radii = o.radii.clone();
        }
    }
}

/// Comma- or whitespace-separated list of floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = r#"{"metric":{"family":"euclidean","dim":3},"analysis":{"directions":4}}"#;
        assert!(serde_json::from_str::<Manifest>(ok).is_ok());
        for bad in [
            r#"{"metric":{"family":"euclidean","dim":3},"extra":1}"#,
            r#"{"metric":{"family":"euclidean","dim":3},"analysis":{"radius":[1.0]}}"#,
            r#"{"metric":{"family":"euclidean","dim":3,"a":1}}"#,
            r#"{"metric":{"family":"euclidean","dim":3},"deform":{"psi":{"kind":"poly","coeffs":[1]},"x":0}}"#,
        ] {
            assert!(serde_json::from_str::<Manifest>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn validation_and_overrides() {
        let mut m: Manifest =
            serde_json::from_str(r#"{"metric":{"family":"euclidean","dim":3},"analysis":{"radii":[0.5,0.2]}}"#).unwrap();
        assert!(m.validate().is_err());
        m.apply(&Overrides { radii: Some(vec![0.1, 0.2]), directions: Some(3), ..Default::default() });
        assert!(m.validate().is_ok());
        assert_eq!(m.analysis.directions, Some(3));
    }

    #[test]
    fn documented_manifests_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/manifests");
        let mut n = 0;
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            let m = Manifest::load(&path).unwrap();
            m.validate().unwrap();
            assert!(m.analysis.command.is_some(), "{}", path.display());
            n += 1;
        }
        assert!(n >= 7);
    }

    #[test]
    fn radii_lists() {
        assert_eq!(parse_list("0.1,0.2, 0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(parse_list("0.1,x").is_err());
    }
}
