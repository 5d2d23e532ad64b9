//! Entropy, dissipation, moment and density-bound functionals, and residuals
//! of the identities the effective-velocity reformulation relies on.
//!
//! Every functional accepts a state in either form; the missing velocity is
//! reconstructed with the same discrete gradient the solver uses.

use crate::constitutive::{relative_pressure_unchecked, Params};
use crate::error::{Error, Result};
use crate::mesh::{diffuse_unchecked, grad_c, integrate, norm, BackgroundProfile, Mesh, NormKind};
use crate::solver::{self, cfl_dt, phi_gradient, FarField, FlowState, Form, RunConfig, CLAMPED_CELLS};

fn require_positive(state: &FlowState) -> Result<()> {
    if let Some(i) = state.rho.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::domain(format!("density {} at cell {i} is not positive", state.rho[i])));
    }
    Ok(())
}

/// Returns `(u, v)` for a state of either form.
fn velocities(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<(Vec<f64>, Vec<f64>)> {
    require_positive(state)?;
    let g = phi_gradient(&state.rho, mesh, p);
    Ok(match state.form {
        Form::U => {
            let v = state.vel.iter().zip(&g).map(|(u, g)| u + g).collect();
            (state.vel.clone(), v)
        }
        Form::V => {
            let u = state.vel.iter().zip(&g).map(|(v, g)| v - g).collect();
            (u, state.vel.clone())
        }
    })
}

fn kinetic_plus_potential(rho: &[f64], vel: &[f64], mesh: &Mesh, p: &Params, profile: &BackgroundProfile) -> f64 {
    let dens: Vec<f64> = rho
        .iter()
        .zip(vel)
        .zip(&profile.values)
        .map(|((&r, &w), &rb)| 0.5 * r * w * w + p.a * relative_pressure_unchecked(r, rb, p.gamma))
        .collect();
    integrate(&dens, mesh)
}

/// `int [rho u^2 / 2 + a p(rho / rho_bar)] dx`.
pub fn energy_functional(state: &FlowState, mesh: &Mesh, p: &Params, profile: &BackgroundProfile) -> Result<f64> {
    let (u, _) = velocities(state, mesh, p)?;
    Ok(kinetic_plus_potential(&state.rho, &u, mesh, p, profile))
}

/// The energy functional with `v = u + d/dx phi(rho)` in place of `u`.
pub fn bd_functional(state: &FlowState, mesh: &Mesh, p: &Params, profile: &BackgroundProfile) -> Result<f64> {
    let (_, v) = velocities(state, mesh, p)?;
    Ok(kinetic_plus_potential(&state.rho, &v, mesh, p, profile))
}

/// `int mu(rho) (du/dx)^2 dx`
pub fn dissipation_u_rate(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<f64> {
    let (u, _) = velocities(state, mesh, p)?;
    let du = grad_c(&u, mesh);
    let dens: Vec<f64> = state.rho.iter().zip(&du).map(|(&r, d)| p.mu(r) * d * d).collect();
    Ok(integrate(&dens, mesh))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdDissipation {
    /// `raw` clamped at zero.
    pub value: f64,
    pub raw: f64,
    /// Smallest pointwise integrand.
    pub min_integrand: f64,
}

/// `int d/dx phi(rho) * d/dx P(rho) dx`, with `P = a rho^gamma`.
pub fn dissipation_bd_rate(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<BdDissipation> {
    require_positive(state)?;
    let dphi = phi_gradient(&state.rho, mesh, p);
    let pressure: Vec<f64> = state.rho.iter().map(|&r| p.p(r)).collect();
    let dp = grad_c(&pressure, mesh);
    let integrand: Vec<f64> = dphi.iter().zip(&dp).map(|(a, b)| a * b).collect();
    let raw = integrate(&integrand, mesh);
    let min_integrand = integrand.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BdDissipation { value: raw.max(0.0), raw, min_integrand })
}

/// `max |rho^beta u|`.
pub fn weighted_sup(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<f64> {
    let (u, _) = velocities(state, mesh, p)?;
    let beta = p.beta();
    Ok(state.rho.iter().zip(&u).map(|(r, u)| (r.powf(beta) * u).abs()).fold(0.0, f64::max))
}

/// `(int rho |v|^(p+2) dx)^(1/(p+2))`.
pub fn v_moment(state: &FlowState, mesh: &Mesh, p: &Params, order: u32) -> Result<f64> {
    let (_, v) = velocities(state, mesh, p)?;
    Ok(moment(&state.rho, &v, mesh, order))
}

fn moment(rho: &[f64], v: &[f64], mesh: &Mesh, order: u32) -> f64 {
    let q = order as f64 + 2.0;
    // factor out max |v| so high orders do not underflow
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return 0.0;
    }
    let dens: Vec<f64> = rho.iter().zip(v).map(|(r, x)| r * (x.abs() / vmax).powf(q)).collect();
    vmax * integrate(&dens, mesh).powf(1.0 / q)
}

pub(crate) fn moments_of(state: &FlowState, mesh: &Mesh, p: &Params, orders: &[u32]) -> Result<Vec<f64>> {
    let (_, v) = velocities(state, mesh, p)?;
    Ok(orders.iter().map(|&o| moment(&state.rho, &v, mesh, o)).collect())
}

/// Per-step quantities consumed by the moment bound and the dissipation
/// integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySample {
    pub t: f64,
    /// `max |rho^beta u|`
    pub wsup: f64,
    /// `|| sqrt(rho) u ||_2`
    pub sqrt_rho_u: f64,
    /// `|| rho ||_inf`
    pub rho_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GronwallBound {
    Available(f64),
    /// `gamma - alpha - beta < 0`: the estimate needs a lower density bound.
    Unavailable,
}

impl GronwallBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            GronwallBound::Available(v) => Some(*v),
            GronwallBound::Unavailable => None,
        }
    }
}

/// Upper bound on `|| rho^(1/(p+2)) v ||_{L^(p+2)}` at the last sample time:
///
/// `(m0^(p+2) + k (p+2) I)^(1/(p+2)) * exp(k I)`, `I = int A(s) ds`,
/// `A = wsup^(p/(p+2)) * ||sqrt(rho) u||^(2/(p+2)) * ||rho||_inf^(gamma - alpha - p beta/(p+2))`,
/// `k = a gamma / mu`. The integral uses the trapezoid rule over the samples.
pub fn gronwall_bound_v(history: &[HistorySample], initial_moment: f64, p: &Params, order: u32) -> GronwallBound {
    let beta = p.beta();
    if p.gamma - p.alpha - beta < 0.0 {
        return GronwallBound::Unavailable;
    }
    let q = order as f64 + 2.0;
    let e_rho = p.gamma - p.alpha - order as f64 * beta / q;
    let forcing =
        |s: &HistorySample| s.wsup.powf(order as f64 / q) * s.sqrt_rho_u.powf(2.0 / q) * s.rho_inf.powf(e_rho);
    let integral: f64 = history.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (forcing(&w[0]) + forcing(&w[1]))).sum();
    let k = p.a * p.gamma / p.mu0;
    let bound = (initial_moment.powf(q) + k * q * integral).powf(1.0 / q) * (k * integral).exp();
    GronwallBound::Available(bound)
}

/// Residual of
/// `d/dt(1/rho) - d/dx(nu d/dx(1/rho)) + 2 mu(rho) (d/dx(1/rho))^2 + 2 v d/dx(1/rho) - d/dx(v/rho)`
/// with `nu = mu(rho)/rho`, a forward difference in time and spatial terms at
/// the earlier state. L2 norm over the evolved cells.
pub fn reciprocal_residual(before: &FlowState, after: &FlowState, mesh: &Mesh, p: &Params) -> Result<f64> {
    require_positive(after)?;
    let (_, v) = velocities(before, mesh, p)?;
    let dt = after.t - before.t;
    if !(dt > 0.0) {
        return Err(Error::domain(format!("state pair must be ordered in time, got dt = {dt}")));
    }
    let w0: Vec<f64> = before.rho.iter().map(|r| 1.0 / r).collect();
    let w1: Vec<f64> = after.rho.iter().map(|r| 1.0 / r).collect();
    let nu: Vec<f64> = before.rho.iter().map(|&r| p.mu(r) / r).collect();
    let diff = diffuse_unchecked(&nu, &w0, mesh);
    let dw = grad_c(&w0, mesh);
    let vw: Vec<f64> = v.iter().zip(&w0).map(|(a, b)| a * b).collect();
    let dvw = grad_c(&vw, mesh);
    let n = mesh.len();
    let res: Vec<f64> = (CLAMPED_CELLS..n - CLAMPED_CELLS)
        .map(|i| {
            (w1[i] - w0[i]) / dt - diff[i] + 2.0 * p.mu(before.rho[i]) * dw[i] * dw[i] + 2.0 * v[i] * dw[i] - dvw[i]
        })
        .collect();
    Ok((res.iter().map(|r| r * r).sum::<f64>() * mesh.dx()).sqrt())
}

/// `|| d/dx P(rho) - a gamma rho^(gamma+1) / mu(rho) (v - u) ||_2`.
pub fn pressure_identity_residual(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<f64> {
    let (u, v) = velocities(state, mesh, p)?;
    let pressure: Vec<f64> = state.rho.iter().map(|&r| p.p(r)).collect();
    let dp = grad_c(&pressure, mesh);
    let res: Vec<f64> = (0..mesh.len())
        .map(|i| {
            let r = state.rho[i];
            dp[i] - p.a * p.gamma * r.powf(p.gamma + 1.0) / p.mu(r) * (v[i] - u[i])
        })
        .collect();
    norm(&res, mesh, NormKind::Lp(2.0))
}

/// `|| rho d/dx((mu/rho^2) d/dx(rho u)) - d/dx(mu du/dx) - rho u d2/dx2 phi ||_2`
/// over all cells but the two end cells.
pub fn change_of_variables_residual(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<f64> {
    let (u, _) = velocities(state, mesh, p)?;
    let rho = &state.rho;
    let coef: Vec<f64> = rho.iter().map(|&r| p.mu(r) / (r * r)).collect();
    let mom: Vec<f64> = rho.iter().zip(&u).map(|(r, u)| r * u).collect();
    let lhs = diffuse_unchecked(&coef, &mom, mesh);
    let mu: Vec<f64> = rho.iter().map(|&r| p.mu(r)).collect();
    let visc = diffuse_unchecked(&mu, &u, mesh);
    let phi: Vec<f64> = rho.iter().map(|&r| p.phi_unchecked(r)).collect();
    let phi_xx = diffuse_unchecked(&vec![1.0; rho.len()], &phi, mesh);
    let n = mesh.len();
    let sq: f64 = (1..n - 1)
        .map(|i| {
            let r = rho[i] * lhs[i] - visc[i] - rho[i] * u[i] * phi_xx[i];
            r * r
        })
        .sum();
    Ok((sq * mesh.dx()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    pub min_rho: f64,
    pub max_rho: f64,
    pub inv_rho_max: f64,
    /// `|| rho - rho_bar ||_{H^1}`
    pub rho_h1: f64,
}

pub fn density_report(
    state: &FlowState,
    mesh: &Mesh,
    profile: &BackgroundProfile,
    _p: &Params,
) -> Result<DensityReport> {
    let min_rho = state.min_rho();
    let max_rho = state.max_rho();
    let diff: Vec<f64> = state.rho.iter().zip(&profile.values).map(|(r, b)| r - b).collect();
    Ok(DensityReport { min_rho, max_rho, inv_rho_max: 1.0 / min_rho, rho_h1: norm(&diff, mesh, NormKind::H1)? })
}

/// Running time integrals, advanced once per accepted step with the
/// trapezoid rule.
#[derive(Debug, Clone)]
pub struct Accumulators {
    t: f64,
    rate_u: f64,
    rate_bd: f64,
    wsup: f64,
    sample: HistorySample,
    pub diss_u: f64,
    pub diss_bd: f64,
    /// `int max|rho^beta u|^2 dt`
    pub wvel_l2t_sq: f64,
}

impl Accumulators {
    pub fn start(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<Self> {
        let (rate_u, rate_bd, sample) = Self::rates(state, mesh, p)?;
        Ok(Accumulators {
            t: state.t,
            rate_u,
            rate_bd,
            wsup: sample.wsup,
            sample,
            diss_u: 0.0,
            diss_bd: 0.0,
            wvel_l2t_sq: 0.0,
        })
    }

    fn rates(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<(f64, f64, HistorySample)> {
        let (u, _) = velocities(state, mesh, p)?;
        let du = grad_c(&u, mesh);
        let beta = p.beta();
        let mut visc = 0.0;
        let mut kin = 0.0;
        let mut wsup = 0.0f64;
        for i in 0..u.len() {
            let r = state.rho[i];
            visc += p.mu(r) * du[i] * du[i];
            kin += r * u[i] * u[i];
            wsup = wsup.max((r.powf(beta) * u[i]).abs());
        }
        let dx = mesh.dx();
        let bd = dissipation_bd_rate(state, mesh, p)?.raw;
        let sample = HistorySample { t: state.t, wsup, sqrt_rho_u: (kin * dx).sqrt(), rho_inf: state.max_rho() };
        Ok((visc * dx, bd, sample))
    }

    pub fn advance(&mut self, state: &FlowState, mesh: &Mesh, p: &Params) -> Result<()> {
        let (rate_u, rate_bd, sample) = Self::rates(state, mesh, p)?;
        let dt = state.t - self.t;
        self.diss_u += 0.5 * dt * (self.rate_u + rate_u);
        self.diss_bd += 0.5 * dt * (self.rate_bd + rate_bd);
        self.wvel_l2t_sq += 0.5 * dt * (self.wsup * self.wsup + sample.wsup * sample.wsup);
        self.t = state.t;
        self.rate_u = rate_u;
        self.rate_bd = rate_bd;
        self.wsup = sample.wsup;
        self.sample = sample;
        Ok(())
    }

    pub fn sample(&self) -> HistorySample {
        self.sample
    }
}

/// All monitored functionals at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub bd_entropy: f64,
    pub diss_u: f64,
    pub diss_bd: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub inv_rho_max: f64,
    pub v_inf: f64,
    pub wvel_inf: f64,
    pub wvel_l2t_sq: f64,
    /// `(p, || rho^(1/(p+2)) v ||_{L^(p+2)})`
    pub v_moments: Vec<(u32, f64)>,
    /// Moment bounds aligned with `v_moments`; `None` outside the admissible region.
    pub v_bounds: Vec<Option<f64>>,
    /// NaN when the trial step used to form the pair fails.
    pub resid_recip: f64,
    pub resid_pident: f64,
    pub rho_h1: f64,
}

impl DiagnosticsRecord {
    /// `measured <= bound * (1 + slack)` for every available bound.
    pub fn moments_within_bounds(&self, slack: f64) -> bool {
        self.v_moments.iter().zip(&self.v_bounds).all(|((_, m), b)| b.is_none_or(|b| *m <= b * (1.0 + slack)))
    }

    pub fn header(moments: &[u32]) -> Vec<String> {
        let mut h: Vec<String> = [
            "t",
            "mass",
            "energy",
            "bd_entropy",
            "diss_u",
            "diss_bd",
            "min_rho",
            "max_rho",
            "inv_rho_max",
            "v_inf",
            "wvel_inf",
            "wvel_l2t_sq",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for p in moments {
            h.push(format!("v_moment_{p}"));
        }
        for p in moments {
            h.push(format!("v_bound_{p}"));
        }
        h.extend(["resid_recip", "resid_pident", "rho_h1"].iter().map(|s| s.to_string()));
        h
    }

    /// Values in [`DiagnosticsRecord::header`] order; `None` marks an
    /// unavailable or undefined entry.
    pub fn values(&self) -> Vec<Option<f64>> {
        let mut v = vec![
            self.t,
            self.mass,
            self.energy,
            self.bd_entropy,
            self.diss_u,
            self.diss_bd,
            self.min_rho,
            self.max_rho,
            self.inv_rho_max,
            self.v_inf,
            self.wvel_inf,
            self.wvel_l2t_sq,
        ]
        .into_iter()
        .map(Some)
        .collect::<Vec<_>>();
        v.extend(self.v_moments.iter().map(|(_, m)| Some(*m)));
        v.extend(self.v_bounds.iter().copied());
        v.extend([self.resid_recip, self.resid_pident, self.rho_h1].into_iter().map(Some));
        v.into_iter().map(|x| x.filter(|x| x.is_finite())).collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn record(
    state: &FlowState,
    mesh: &Mesh,
    p: &Params,
    profile: &BackgroundProfile,
    cfg: &RunConfig,
    acc: &Accumulators,
    history: &[HistorySample],
    initial_moments: &[f64],
) -> Result<DiagnosticsRecord> {
    let (u, v) = velocities(state, mesh, p)?;
    let dens = density_report(state, mesh, profile, p)?;
    let v_moments: Vec<(u32, f64)> = cfg.moments.iter().map(|&o| (o, moment(&state.rho, &v, mesh, o))).collect();
    let v_bounds =
        cfg.moments.iter().zip(initial_moments).map(|(&o, &m0)| gronwall_bound_v(history, m0, p, o).value()).collect();
    let resid_recip = trial_reciprocal_residual(state, mesh, p, profile, cfg.safety).unwrap_or(f64::NAN);
    Ok(DiagnosticsRecord {
        t: state.t,
        mass: integrate(&state.rho, mesh),
        energy: kinetic_plus_potential(&state.rho, &u, mesh, p, profile),
        bd_entropy: kinetic_plus_potential(&state.rho, &v, mesh, p, profile),
        diss_u: acc.diss_u,
        diss_bd: acc.diss_bd,
        min_rho: dens.min_rho,
        max_rho: dens.max_rho,
        inv_rho_max: dens.inv_rho_max,
        v_inf: v.iter().fold(0.0, |m, x| m.max(x.abs())),
        wvel_inf: acc.sample().wsup,
        wvel_l2t_sq: acc.wvel_l2t_sq,
        v_moments,
        v_bounds,
        resid_recip,
        resid_pident: pressure_identity_residual(state, mesh, p)?,
        rho_h1: dens.rho_h1,
    })
}

/// Reciprocal-equation residual over one trial step of the solver from `state`.
pub fn trial_reciprocal_residual(
    state: &FlowState,
    mesh: &Mesh,
    p: &Params,
    profile: &BackgroundProfile,
    safety: f64,
) -> Result<f64> {
    let dt = cfl_dt(state, mesh, p, safety)?;
    let (next, _) = solver::step(state, mesh, p, &FarField::from_profile(profile), dt)?;
    reciprocal_residual(state, &next, mesh, p)
}
