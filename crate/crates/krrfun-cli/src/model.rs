//! Self-describing model cache: everything needed to reproduce predictions
//! and functional inference without the original responses.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use krrfun::functional::NoiselessKrr;
use krrfun::krr::KrrFit;
use krrfun::MaternKernel;

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCache {
    pub format_version: u32,
    pub model: String,
    pub nu: f64,
    pub phi: f64,
    pub dim: usize,
    pub lambda: f64,
    pub sigma2_hat: f64,
    pub centers: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

impl ModelCache {
    pub fn from_fit(fit: &KrrFit<f64>) -> Self {
        ModelCache {
            format_version: FORMAT_VERSION,
            model: "krr".to_string(),
            nu: fit.kernel().nu(),
            phi: fit.kernel().phi(),
            dim: fit.dim(),
            lambda: fit.lambda(),
            sigma2_hat: fit.sigma2_hat(),
            centers: fit
                .design()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            coeffs: fit.coefficients().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("cannot serialize model cache: {e}")))?;
        fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let cache: ModelCache = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("invalid model cache {}: {e}", path.display())))?;
        if cache.format_version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "unsupported model cache format_version {} (expected {FORMAT_VERSION})",
                cache.format_version
            )));
        }
        if cache.model != "krr" {
            return Err(CliError::Data(format!(
                "unsupported model kind {:?}",
                cache.model
            )));
        }
        if cache.centers.len() != cache.coeffs.len() || cache.centers.is_empty() {
            return Err(CliError::Data(
                "model cache centers/coeffs mismatch".to_string(),
            ));
        }
        Ok(cache)
    }

    pub fn kernel(&self) -> Result<MaternKernel<f64>, CliError> {
        MaternKernel::new(self.nu, self.phi, self.dim)
            .map_err(|e| CliError::Data(format!("model cache kernel invalid: {e}")))
    }

    pub fn centers_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.centers.len(), self.dim), |(i, j)| self.centers[i][j])
    }

    pub fn coeffs_array(&self) -> Array1<f64> {
        Array1::from_vec(self.coeffs.clone())
    }

    /// Rebuild the regularized kernel system over the cached centers (the
    /// piece needed for variance computations).
    pub fn system(&self) -> Result<NoiselessKrr<f64>, CliError> {
        NoiselessKrr::new(self.kernel()?, self.centers_array(), self.lambda)
            .map_err(|e| CliError::Numerical(format!("model cache system: {e}")))
    }
}
