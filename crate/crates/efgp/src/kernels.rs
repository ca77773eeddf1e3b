//! Squared-exponential and Matérn covariance kernels, normalized to
//! `k(0) = 1`, together with their spectral densities under the
//! unitary-in-angular-frequency convention
//! `khat(xi) = int k(x) e^{-2 pi i <xi, x>} dx`.

use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{EfgpError, Result};

/// Kernel family plus parameters. Owns both `k(x)` and `khat(xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `G_l(x) = exp(-|x|^2 / 2 l^2)`.
    Se { lengthscale: f64 },
    /// `C_{nu,l}(x) = 2^{1-nu}/Gamma(nu) (sqrt(2 nu)|x|/l)^nu K_nu(sqrt(2 nu)|x|/l)`.
    Matern { lengthscale: f64, nu: f64 },
}

impl KernelSpec {
    pub fn se(lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec::Se { lengthscale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern(lengthscale: f64, nu: f64) -> Result<Self> {
        let spec = KernelSpec::Matern { lengthscale, nu };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the parameter invariants (`l > 0`; Matérn `nu >= 1/2`).
    /// Deserialized specs must be validated before use.
    pub fn validate(&self) -> Result<()> {
        let l = self.lengthscale();
        if !(l > 0.0) || !l.is_finite() {
            return Err(EfgpError::Domain(format!(
                "lengthscale must be positive and finite, got {l}"
            )));
        }
        if let KernelSpec::Matern { nu, .. } = self {
            if !(*nu >= 0.5) || !nu.is_finite() {
                return Err(EfgpError::Domain(format!(
                    "Matern smoothness must satisfy nu >= 1/2, got {nu}"
                )));
            }
        }
        Ok(())
    }

    pub fn lengthscale(&self) -> f64 {
        match self {
            KernelSpec::Se { lengthscale } => *lengthscale,
            KernelSpec::Matern { lengthscale, .. } => *lengthscale,
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match self {
            KernelSpec::Se { .. } => None,
            KernelSpec::Matern { nu, .. } => Some(*nu),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Se { .. } => "se",
            KernelSpec::Matern { .. } => "matern",
        }
    }

    /// `k(x)` for a displacement vector `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EfgpError::Domain("non-finite kernel argument".into()));
        }
        Ok(self.eval_radial(norm(x)))
    }

    /// `k` as a function of the Euclidean distance `r = |x|`.
    pub fn eval_radial(&self, r: f64) -> f64 {
        match self {
            KernelSpec::Se { lengthscale } => (-r * r / (2.0 * lengthscale * lengthscale)).exp(),
            KernelSpec::Matern { lengthscale, nu } => {
                if r == 0.0 {
                    return 1.0;
                }
                let z = (2.0 * nu).sqrt() * r / lengthscale;
                // 2^{1-nu}/Gamma(nu) * z^nu K_nu(z), in log space for large z
                let ln_pref = (1.0 - nu) * std::f64::consts::LN_2
                    - statrs::function::gamma::ln_gamma(*nu);
                let scaled = bessel::bessel_k_scaled(*nu, z).expect("z > 0");
                (ln_pref + nu * z.ln() - z).exp() * scaled
            }
        }
    }

    /// `khat(xi)` for a frequency vector `xi`; the dimension is `xi.len()`.
    pub fn spectral(&self, xi: &[f64]) -> Result<f64> {
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(EfgpError::Domain("non-finite frequency argument".into()));
        }
        Ok(self.spectral_radial(norm(xi), xi.len()))
    }

    /// `khat` as a function of `rho = |xi|` in dimension `d`.
    pub fn spectral_radial(&self, rho: f64, d: usize) -> f64 {
        let d_f = d as f64;
        match self {
            KernelSpec::Se { lengthscale } => {
                let l = *lengthscale;
                ((2.0 * std::f64::consts::PI).sqrt() * l).powi(d as i32)
                    * (-2.0 * (std::f64::consts::PI * l * rho).powi(2)).exp()
            }
            KernelSpec::Matern { lengthscale, nu } => {
                let l = *lengthscale;
                let two_nu = 2.0 * nu;
                // chat_{d,nu} = 2^d pi^{d/2} (2 nu)^nu Gamma(nu + d/2) / Gamma(nu)
                let ln_chat = d_f * std::f64::consts::LN_2
                    + 0.5 * d_f * std::f64::consts::PI.ln()
                    + nu * two_nu.ln()
                    + statrs::function::gamma::ln_gamma(nu + d_f / 2.0)
                    - statrs::function::gamma::ln_gamma(*nu);
                let base = two_nu + (2.0 * std::f64::consts::PI * l * rho).powi(2);
                (ln_chat + d_f * l.ln() - (nu + d_f / 2.0) * base.ln()).exp()
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
