use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use conga_core::{ComplexOperators, GridSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SourceConvergence,
    EigenStudy,
    Verify,
    DecomposeDemo,
}

impl Kind {
    /// Stem used for output file names.
    pub fn stem(self) -> &'static str {
        match self {
            Kind::SourceConvergence => "convergence",
            Kind::EigenStudy => "eigen",
            Kind::Verify => "verify",
            Kind::DecomposeDemo => "decompose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    Square,
    Annulus,
}

/// Penalization policy: `strong` is `10 (p + 1)² / h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AlphaPolicy {
    Strong,
    Constant(f64),
    Zero,
}

impl AlphaPolicy {
    pub fn resolve(self, ops: &ComplexOperators) -> f64 {
        match self {
            AlphaPolicy::Strong => ops.strong_penalty(),
            AlphaPolicy::Constant(c) => c,
            AlphaPolicy::Zero => 0.0,
        }
    }
}

impl fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaPolicy::Strong => f.write_str("strong"),
            AlphaPolicy::Constant(c) => write!(f, "const:{c}"),
            AlphaPolicy::Zero => f.write_str("zero"),
        }
    }
}

impl FromStr for AlphaPolicy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(AlphaPolicy::Strong),
            "zero" => Ok(AlphaPolicy::Zero),
            other => {
                let c = other
                    .strip_prefix("const:")
                    .and_then(|c| c.parse::<f64>().ok())
                    .ok_or_else(|| HarnessError::Config(format!("unknown alpha policy {other:?}")))?;
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(HarnessError::Config(format!("alpha must be a nonnegative number, got {c}")));
                }
                Ok(AlphaPolicy::Constant(c))
            }
        }
    }
}

impl TryFrom<String> for AlphaPolicy {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AlphaPolicy> for String {
    fn from(a: AlphaPolicy) -> String {
        a.to_string()
    }
}

fn default_cells() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_degrees() -> Vec<usize> {
    vec![2]
}

fn default_side() -> f64 {
    2.0 * std::f64::consts::PI
}

fn default_alphas() -> Vec<AlphaPolicy> {
    vec![AlphaPolicy::Strong]
}

fn default_true() -> bool {
    true
}

fn default_case() -> String {
    "helmholtz-w3.5".into()
}

fn default_count() -> usize {
    40
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

/// A resolved experiment configuration. Every output echoes it in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(rename = "K", default = "default_cells")]
    pub cells: Vec<usize>,
    #[serde(rename = "p", default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(rename = "a", default = "default_side")]
    pub side: f64,
    #[serde(default = "default_mask")]
    pub mask: Mask,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<AlphaPolicy>,
    /// Overrides the manufactured case frequency.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default = "default_true")]
    pub filtered: bool,
    #[serde(default = "default_case")]
    pub case: String,
    #[serde(default = "default_count")]
    pub eigen_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Negative control: assemble `D¹` with a flipped sign block.
    #[serde(default)]
    pub corrupt_d1: bool,
}

fn default_mask() -> Mask {
    Mask::Square
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            cells: default_cells(),
            degrees: default_degrees(),
            side: default_side(),
            mask: default_mask(),
            alphas: default_alphas(),
            omega: None,
            filtered: true,
            case: default_case(),
            eigen_count: default_count(),
            seed: 0,
            out: default_out(),
            corrupt_d1: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.cells.is_empty() || self.cells.contains(&0) {
            return bad(format!("K must be a nonempty list of positive integers, got {:?}", self.cells));
        }
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return bad(format!("p must be a nonempty list of positive integers, got {:?}", self.degrees));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return bad(format!("a must be positive, got {}", self.side));
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if self.mask == Mask::Annulus && self.cells.iter().any(|&k| k < 3) {
            return bad("annulus mask needs K ≥ 3".into());
        }
        if self.eigen_count == 0 {
            return bad("eigen_count must be positive".into());
        }
        if let Some(w) = self.omega {
            if !w.is_finite() {
                return bad(format!("omega must be finite, got {w}"));
            }
        }
        crate::cases::lookup(&self.case, self.omega.unwrap_or(3.5))?;
        Ok(())
    }

    pub fn grid_spec(&self, cells: usize, degree: usize) -> GridSpec {
        let spec = match self.mask {
            Mask::Square => GridSpec::square(cells, degree),
            Mask::Annulus => GridSpec::annulus(cells, degree),
        };
        spec.with_side(self.side)
    }

    /// `(p, K)` sweep points in output order.
    pub fn sweep(&self) -> Vec<(usize, usize)> {
        let mut points: Vec<(usize, usize)> =
            self.degrees.iter().flat_map(|&p| self.cells.iter().map(move |&k| (p, k))).collect();
        points.sort_unstable();
        points.dedup();
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_policy_round_trip() {
        for s in ["strong", "zero", "const:1", "const:0.5"] {
            let a: AlphaPolicy = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!("const:-1".parse::<AlphaPolicy>().is_err());
        assert!("weak".parse::<AlphaPolicy>().is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"kind": "eigen-study"}"#).unwrap();
        assert_eq!(c.cells, vec![4, 8, 16]);
        assert_eq!(c.alphas, vec![AlphaPolicy::Strong]);
        assert!(c.filtered);
        for bad in [
            r#"{"kind": "eigen-study", "K": []}"#,
            r#"{"kind": "eigen-study", "p": [0]}"#,
            r#"{"kind": "eigen-study", "alphas": ["weak"]}"#,
            r#"{"kind": "eigen-study", "typo": 1}"#,
            r#"{"kind": "nope"}"#,
            r#"{"kind": "source-convergence", "case": "unknown"}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(HarnessError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn sweep_is_sorted() {
        let mut c = ExperimentConfig::new(Kind::SourceConvergence);
        c.degrees = vec![3, 1];
        c.cells = vec![8, 4];
        assert_eq!(c.sweep(), vec![(1, 4), (1, 8), (3, 4), (3, 8)]);
    }
}
