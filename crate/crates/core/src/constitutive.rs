//! Power-law viscosity, gamma-law pressure and the potential `phi` with
//! `phi'(rho) = mu(rho) / rho^2`, plus admissibility checks for `(alpha, gamma, eps)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule for the velocity weight exponent `beta` in `rho^beta * u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// `beta = 1/2 + eps`
    #[default]
    Half,
    /// `beta = alpha/2 + eps`
    AlphaHalf,
}

/// Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one", rename = "mu")]
    pub mu0: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Viscosity floor index: `mu_n = max(1/n, mu)`.
    #[serde(default)]
    pub reg_n: Option<u32>,
    #[serde(default)]
    pub beta_rule: WeightRule,
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.125
}

impl Params {
    pub fn new(alpha: f64, gamma: f64) -> Self {
        Params { alpha, gamma, a: 1.0, mu0: 1.0, eps: default_eps(), reg_n: None, beta_rule: WeightRule::Half }
    }

    /// Viscous shallow water: `alpha = 1`, `gamma = 2`.
    pub fn shallow_water() -> Self {
        Params::new(1.0, 2.0)
    }

    pub fn with_reg(mut self, n: Option<u32>) -> Self {
        self.reg_n = n;
        self
    }

    pub fn beta(&self) -> f64 {
        match self.beta_rule {
            WeightRule::Half => 0.5 + self.eps,
            WeightRule::AlphaHalf => 0.5 * self.alpha + self.eps,
        }
    }

    fn floor(&self) -> Option<f64> {
        self.reg_n.map(|n| 1.0 / n as f64)
    }

    // Unchecked kernels for the solver hot loops; callers guarantee rho > 0.

    #[inline]
    pub(crate) fn mu(&self, rho: f64) -> f64 {
        let m = self.mu0 * rho.powf(self.alpha);
        match self.floor() {
            Some(f) => m.max(f),
            None => m,
        }
    }

    /// Unregularized `mu0 * rho^alpha`.
    #[inline]
    pub(crate) fn mu_raw(&self, rho: f64) -> f64 {
        self.mu0 * rho.powf(self.alpha)
    }

    #[inline]
    pub(crate) fn p(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    #[inline]
    pub(crate) fn sound_speed(&self, rho: f64) -> f64 {
        (self.a * self.gamma * rho.powf(self.gamma - 1.0)).sqrt()
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, rho: f64) -> f64 {
        match self.floor() {
            Some(f) => {
                // Below rho_star the floor is active and phi' = f / rho^2.
                let rho_star = (f / self.mu0).powf(1.0 / self.alpha);
                if rho >= rho_star {
                    self.phi_power(rho)
                } else {
                    self.phi_power(rho_star) + f * (1.0 / rho_star - 1.0 / rho)
                }
            }
            None => self.phi_power(rho),
        }
    }

    #[inline]
    fn phi_power(&self, rho: f64) -> f64 {
        if self.alpha == 1.0 {
            self.mu0 * rho.ln()
        } else {
            self.mu0 * rho.powf(self.alpha - 1.0) / (self.alpha - 1.0)
        }
    }
}

fn check_nonneg(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::domain(format!("negative density {rho}")));
    }
    Ok(())
}

fn check_pos(rho: f64) -> Result<()> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::domain(format!("phi is singular at rho = {rho}")));
    }
    Ok(())
}

/// `mu * rho^alpha`, floored at `1/n` when regularized.
pub fn viscosity(rho: f64, p: &Params) -> Result<f64> {
    check_nonneg(rho)?;
    Ok(p.mu(rho))
}

/// `a * rho^gamma`
pub fn pressure(rho: f64, p: &Params) -> Result<f64> {
    check_nonneg(rho)?;
    Ok(p.p(rho))
}

/// Antiderivative of `mu(rho)/rho^2` with zero integration constant
/// (`phi(1) = 0` for `alpha = 1`).
pub fn phi(rho: f64, p: &Params) -> Result<f64> {
    check_pos(rho)?;
    Ok(p.phi_unchecked(rho))
}

pub fn dphi(rho: f64, p: &Params) -> Result<f64> {
    check_pos(rho)?;
    Ok(p.mu(rho) / (rho * rho))
}

/// Convexity gap of `rho^gamma / (gamma - 1)` at `rho_bar`.
pub fn relative_pressure(rho: f64, rho_bar: f64, p: &Params) -> Result<f64> {
    check_nonneg(rho)?;
    if rho_bar.is_nan() || rho_bar <= 0.0 {
        return Err(Error::domain(format!("background density must be positive, got {rho_bar}")));
    }
    Ok(relative_pressure_unchecked(rho, rho_bar, p.gamma))
}

#[inline]
pub(crate) fn relative_pressure_unchecked(rho: f64, rho_bar: f64, gamma: f64) -> f64 {
    let g1 = gamma - 1.0;
    let v = rho.powf(gamma) / g1 - rho_bar.powf(gamma) / g1 - gamma / g1 * rho_bar.powf(g1) * (rho - rho_bar);
    // Cancellation can leave a tiny negative value near rho == rho_bar.
    v.max(0.0)
}

/// Per-condition outcome of the existence-theorem hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// `1/2 < alpha <= 1`
    pub alpha_range: bool,
    /// `0 < eps < 1/4`
    pub eps_range: bool,
    /// `gamma >= alpha + 1/2 + eps`
    pub gamma_threshold: bool,
    /// `gamma > 1`
    pub gamma_gt_one: bool,
    pub inside_theorem: bool,
}

impl ValidationReport {
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.alpha_range {
            out.push("1/2 < alpha <= 1");
        }
        if !self.eps_range {
            out.push("0 < eps < 1/4");
        }
        if !self.gamma_threshold {
            out.push("gamma >= alpha + 1/2 + eps");
        }
        if !self.gamma_gt_one {
            out.push("gamma > 1");
        }
        out
    }
}

/// Checks the theorem hypotheses. Out-of-theorem values are reported, not
/// rejected; only non-finite or non-positive coefficients are hard errors.
pub fn validate_params(p: &Params) -> Result<ValidationReport> {
    for (name, v) in [("gamma", p.gamma), ("a", p.a), ("mu", p.mu0), ("alpha", p.alpha)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::config(format!("{name} must be finite and positive, got {v}")));
        }
    }
    if !p.eps.is_finite() {
        return Err(Error::config(format!("eps must be finite, got {}", p.eps)));
    }
    if p.reg_n == Some(0) {
        return Err(Error::config("reg_n must be a positive integer"));
    }
    let alpha_range = p.alpha > 0.5 && p.alpha <= 1.0;
    let eps_range = p.eps > 0.0 && p.eps < 0.25;
    let gamma_threshold = p.gamma >= p.alpha + 0.5 + p.eps;
    let gamma_gt_one = p.gamma > 1.0;
    Ok(ValidationReport {
        alpha_range,
        eps_range,
        gamma_threshold,
        gamma_gt_one,
        inside_theorem: alpha_range && eps_range && gamma_threshold && gamma_gt_one,
    })
}
