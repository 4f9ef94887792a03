//! Command configs: one JSON document per subcommand, schema-checked on load
//! (unknown keys rejected, errors reported with a JSON-pointer path).

use std::fs;
use std::path::Path;

use serde::Deserialize;

use krrfun::simlab::{KernelChoice, LambdaRule, Scenario};
use krrfun::testbed::TestFunction;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: String,
    pub kernel: KernelChoice,
    #[serde(default)]
    pub lambda: Option<LambdaRule>,
    #[serde(default)]
    pub cache_out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Point,
    Deriv,
    L2,
}

fn default_level() -> f64 {
    0.95
}

fn default_quad_order() -> usize {
    128
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<Vec<u32>>,
    /// For `l2`: `table:<path>` pointing at a two-column CSV of (x, h(x)).
    #[serde(default)]
    pub h: Option<String>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    #[serde(default)]
    pub data: Option<String>,
    /// Alternative to `data`: a model cache written by `fit`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub kernel: Option<KernelChoice>,
    #[serde(default)]
    pub lambda: Option<LambdaRule>,
    pub functionals: Vec<FunctionalSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimumConfig {
    pub data: String,
    pub kernel: KernelChoice,
    #[serde(default)]
    pub lambda: Option<LambdaRule>,
    /// Per-axis `[lo, hi]`; defaults to the data bounding box shrunk by 1%.
    #[serde(default)]
    pub search_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub maximize: bool,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub grid_per_axis: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatesConfig {
    VarVsLambda {
        n: usize,
        nu: f64,
        phi: f64,
        x0: f64,
        lambdas: Vec<f64>,
        seed: u64,
    },
    WcbVsLambda {
        n: usize,
        nu: f64,
        phi: f64,
        x0: f64,
        lambdas: Vec<f64>,
        seed: u64,
    },
    UniformError {
        test_function: TestFunction,
        sigma: f64,
        nu: f64,
        phi: f64,
        ns: Vec<usize>,
        lambda: LambdaRule,
        reps: usize,
        grid_per_axis: usize,
        seed: u64,
    },
}

/// Load and validate a config document, reporting the offending field as a
/// JSON pointer on failure.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let mut pointer = String::new();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Seq { index } => {
                    pointer.push('/');
                    pointer.push_str(&index.to_string());
                }
                serde_path_to_error::Segment::Map { key } => {
                    pointer.push('/');
                    pointer.push_str(key);
                }
                serde_path_to_error::Segment::Enum { variant } => {
                    pointer.push('/');
                    pointer.push_str(variant);
                }
                serde_path_to_error::Segment::Unknown => pointer.push_str("/?"),
            }
        }
        if pointer.is_empty() {
            pointer.push('/');
        }
        CliError::Config(format!("config error at {pointer}: {}", e.inner()))
    })
}
