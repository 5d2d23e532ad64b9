//! Explicit time integration of the primitive `(rho, u)` system and of the
//! effective-velocity `(rho, v)` system on a collocated grid.
//!
//! Both steppers use the same two-stage midpoint scheme, first-order upwind
//! convection, centered pressure gradients and three-point diffusion. The two
//! outermost cells on each side are clamped to the far-field state after every
//! stage.

use serde::{Deserialize, Serialize};

use crate::constitutive::Params;
use crate::diagnostics::{self, Accumulators, DiagnosticsRecord, HistorySample};
use crate::error::{Error, Result};
use crate::mesh::{diffuse_unchecked, div_faces, div_flux, grad_c, BackgroundProfile, Mesh};

/// Number of clamped cells at each end of the domain.
pub const CLAMPED_CELLS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    /// `vel` holds the fluid velocity `u`.
    U,
    /// `vel` holds the effective velocity `v = u + d/dx phi(rho)`.
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub rho: Vec<f64>,
    pub vel: Vec<f64>,
    pub form: Form,
    pub t: f64,
}

impl FlowState {
    pub fn new(rho: Vec<f64>, vel: Vec<f64>, form: Form, t: f64) -> Result<Self> {
        if rho.len() != vel.len() {
            return Err(Error::config(format!("density has {} values but velocity has {}", rho.len(), vel.len())));
        }
        Ok(FlowState { rho, vel, form, t })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Converts to the requested form (a copy when already there).
    pub fn to_form(&self, form: Form, mesh: &Mesh, p: &Params) -> Result<FlowState> {
        match (self.form, form) {
            (Form::U, Form::V) => effective_velocity(self, mesh, p),
            (Form::V, Form::U) => recover_u(self, mesh, p),
            _ => Ok(self.clone()),
        }
    }
}

/// Far-field Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub velocity: f64,
}

impl FarField {
    pub fn from_profile(profile: &BackgroundProfile) -> Self {
        FarField { rho_minus: profile.rho_minus, rho_plus: profile.rho_plus, velocity: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub cfl_ratio: f64,
}

fn check_vacuum(state: &FlowState, mesh: &Mesh) -> Result<()> {
    if let Some((cell, &rho)) = state.rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::VacuumBreach { cell, x: mesh.x()[cell], t: state.t, rho });
    }
    Ok(())
}

fn check_finite(state: &FlowState) -> Result<()> {
    if let Some(i) = state.vel.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite velocity at cell {i}, t = {}", state.t)));
    }
    if let Some(i) = state.rho.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite density at cell {i}, t = {}", state.t)));
    }
    Ok(())
}

fn phi_field(rho: &[f64], p: &Params) -> Vec<f64> {
    rho.iter().map(|&r| p.phi_unchecked(r)).collect()
}

/// `d/dx phi(rho)` with the centered gradient.
pub(crate) fn phi_gradient(rho: &[f64], mesh: &Mesh, p: &Params) -> Vec<f64> {
    grad_c(&phi_field(rho, p), mesh)
}

/// `v = u + d/dx phi(rho)`.
pub fn effective_velocity(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<FlowState> {
    if state.form != Form::U {
        return Err(Error::domain("effective_velocity expects a U-form state"));
    }
    check_vacuum(state, mesh).map_err(|e| Error::domain(e.to_string()))?;
    let g = phi_gradient(&state.rho, mesh, p);
    let vel = state.vel.iter().zip(&g).map(|(u, g)| u + g).collect();
    Ok(FlowState { rho: state.rho.clone(), vel, form: Form::V, t: state.t })
}

/// `u = v - d/dx phi(rho)`, the discrete inverse of [`effective_velocity`].
pub fn recover_u(state: &FlowState, mesh: &Mesh, p: &Params) -> Result<FlowState> {
    if state.form != Form::V {
        return Err(Error::domain("recover_u expects a V-form state"));
    }
    check_vacuum(state, mesh).map_err(|e| Error::domain(e.to_string()))?;
    let g = phi_gradient(&state.rho, mesh, p);
    let vel = state.vel.iter().zip(&g).map(|(v, g)| v - g).collect();
    Ok(FlowState { rho: state.rho.clone(), vel, form: Form::U, t: state.t })
}

/// Largest stable increment scaled by `safety`: the smaller of the acoustic
/// limit `dx / max(|vel| + c)` and the diffusive limit `dx^2 / (2 max mu/rho)`.
pub fn cfl_dt(state: &FlowState, mesh: &Mesh, p: &Params, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::config(format!("CFL safety must lie in (0, 1], got {safety}")));
    }
    check_finite(state)?;
    check_vacuum(state, mesh).map_err(|e| Error::domain(e.to_string()))?;
    // In V-form the transport speed of v is u, so both are bounded.
    let transport: Vec<f64> = match state.form {
        Form::U => state.vel.iter().map(|v| v.abs()).collect(),
        Form::V => {
            let g = phi_gradient(&state.rho, mesh, p);
            state.vel.iter().zip(&g).map(|(v, g)| v.abs().max((v - g).abs())).collect()
        }
    };
    let mut wave = 0.0f64;
    let mut nu = 0.0f64;
    for (&rho, &s) in state.rho.iter().zip(&transport) {
        wave = wave.max(s + p.sound_speed(rho));
        nu = nu.max(p.mu(rho) / rho);
    }
    let dx = mesh.dx();
    let acoustic = if wave > 0.0 { dx / wave } else { f64::INFINITY };
    let diffusive = if nu > 0.0 { dx * dx / (2.0 * nu) } else { f64::INFINITY };
    let dt = safety * acoustic.min(diffusive);
    if !dt.is_finite() {
        return Err(Error::domain("no finite stable time step: fields carry no wave speed or diffusion"));
    }
    Ok(dt)
}

fn clamp_boundary(state: &mut FlowState, far: &FarField) {
    let n = state.len();
    // In V-form the far field is constant, so v equals u there.
    for i in 0..CLAMPED_CELLS {
        state.rho[i] = far.rho_minus;
        state.vel[i] = far.velocity;
        state.rho[n - 1 - i] = far.rho_plus;
        state.vel[n - 1 - i] = far.velocity;
    }
}

fn rhs_u(rho: &[f64], u: &[f64], mesh: &Mesh, p: &Params) -> (Vec<f64>, Vec<f64>) {
    let n = rho.len();
    let mut mass = vec![0.0; n + 1];
    let mut mom = vec![0.0; n + 1];
    mass[0] = rho[0] * u[0];
    mom[0] = rho[0] * u[0] * u[0];
    mass[n] = rho[n - 1] * u[n - 1];
    mom[n] = rho[n - 1] * u[n - 1] * u[n - 1];
    for k in 1..n {
        let uf = 0.5 * (u[k - 1] + u[k]);
        let up = if uf >= 0.0 { k - 1 } else { k };
        mass[k] = uf * rho[up];
        mom[k] = uf * rho[up] * u[up];
    }
    let pressure: Vec<f64> = rho.iter().map(|&r| p.p(r)).collect();
    let mu: Vec<f64> = rho.iter().map(|&r| p.mu(r)).collect();
    let dp = grad_c(&pressure, mesh);
    let visc = diffuse_unchecked(&mu, u, mesh);
    let drho: Vec<f64> = div_faces(&mass, mesh).into_iter().map(|d| -d).collect();
    let dm: Vec<f64> = div_faces(&mom, mesh).into_iter().zip(dp).zip(visc).map(|((c, dp), v)| -c - dp + v).collect();
    (drho, dm)
}

fn advance_u(base: &FlowState, eval: &FlowState, dt: f64, mesh: &Mesh, p: &Params, far: &FarField) -> FlowState {
    let (drho, dm) = rhs_u(&eval.rho, &eval.vel, mesh, p);
    let mut rho = Vec::with_capacity(base.len());
    let mut vel = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let r = base.rho[i] + dt * drho[i];
        let m = base.rho[i] * base.vel[i] + dt * dm[i];
        rho.push(r);
        vel.push(m / r);
    }
    let mut out = FlowState { rho, vel, form: Form::U, t: base.t + dt };
    clamp_boundary(&mut out, far);
    out
}

fn upwind_derivative(f: &[f64], speed: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| if (speed[i] > 0.0 && i > 0) || i == n - 1 { (f[i] - f[i - 1]) / dx } else { (f[i + 1] - f[i]) / dx })
        .collect()
}

fn rhs_v(rho: &[f64], v: &[f64], mesh: &Mesh, p: &Params) -> (Vec<f64>, Vec<f64>) {
    let g = phi_gradient(rho, mesh, p);
    let u: Vec<f64> = v.iter().zip(&g).map(|(v, g)| v - g).collect();
    let nu: Vec<f64> = rho.iter().map(|&r| p.mu(r) / r).collect();
    let flux: Vec<f64> = rho.iter().zip(v).map(|(r, v)| r * v).collect();
    let drho: Vec<f64> =
        diffuse_unchecked(&nu, rho, mesh).into_iter().zip(div_flux(&flux, mesh)).map(|(d, c)| d - c).collect();
    let pressure: Vec<f64> = rho.iter().map(|&r| p.p(r)).collect();
    let dp = grad_c(&pressure, mesh);
    let dv_up = upwind_derivative(v, &u, mesh.dx());
    let dv = (0..rho.len()).map(|i| -u[i] * dv_up[i] - dp[i] / rho[i]).collect();
    (drho, dv)
}

fn advance_v(base: &FlowState, eval: &FlowState, dt: f64, mesh: &Mesh, p: &Params, far: &FarField) -> FlowState {
    let (drho, dv) = rhs_v(&eval.rho, &eval.vel, mesh, p);
    let rho = base.rho.iter().zip(drho).map(|(r, d)| r + dt * d).collect();
    let vel = base.vel.iter().zip(dv).map(|(v, d)| v + dt * d).collect();
    let mut out = FlowState { rho, vel, form: Form::V, t: base.t + dt };
    clamp_boundary(&mut out, far);
    out
}

fn two_stage(
    state: &FlowState,
    mesh: &Mesh,
    p: &Params,
    far: &FarField,
    dt: f64,
    form: Form,
) -> Result<(FlowState, StepReport)> {
    if state.form != form {
        return Err(Error::domain(format!("stepper for {form:?}-form received a {:?}-form state", state.form)));
    }
    if state.len() != mesh.len() {
        return Err(Error::config(format!("state has {} cells, mesh has {}", state.len(), mesh.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    let dt_max = cfl_dt(state, mesh, p, 1.0)?;
    let advance = match form {
        Form::U => advance_u,
        Form::V => advance_v,
    };
    let half = advance(state, state, 0.5 * dt, mesh, p, far);
    check_vacuum(&half, mesh)?;
    check_finite(&half)?;
    let mut next = advance(state, &half, dt, mesh, p, far);
    // keep the clock exact when stepping onto output times
    next.t = state.t + dt;
    check_vacuum(&next, mesh)?;
    check_finite(&next)?;
    let report = StepReport { dt_used: dt, min_rho: next.min_rho(), max_rho: next.max_rho(), cfl_ratio: dt / dt_max };
    Ok((next, report))
}

/// One midpoint step of the primitive system: conservative mass and momentum
/// with upwind convective fluxes, centered pressure gradient and
/// `d/dx (mu(rho) du/dx)`.
pub fn step_u(state: &FlowState, mesh: &Mesh, p: &Params, far: &FarField, dt: f64) -> Result<(FlowState, StepReport)> {
    two_stage(state, mesh, p, far, dt, Form::U)
}

/// One midpoint step of the effective-velocity system: density diffuses with
/// `mu(rho)/rho` and is carried by `rho v`; `v` is transported by `u` and
/// driven by `-d/dx P / rho`.
pub fn step_v(state: &FlowState, mesh: &Mesh, p: &Params, far: &FarField, dt: f64) -> Result<(FlowState, StepReport)> {
    two_stage(state, mesh, p, far, dt, Form::V)
}

pub fn step(state: &FlowState, mesh: &Mesh, p: &Params, far: &FarField, dt: f64) -> Result<(FlowState, StepReport)> {
    two_stage(state, mesh, p, far, dt, state.form)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t_end: f64,
    pub output_dt: f64,
    pub safety: f64,
    pub form: Form,
    /// Exponents `p` of the monitored moments of `v`.
    pub moments: Vec<u32>,
    /// Largest number of steps before the run is abandoned.
    pub max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_end: 1.0,
            output_dt: 0.1,
            safety: 0.4,
            form: Form::U,
            moments: vec![0, 2, 8, 30],
            max_steps: 50_000_000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::config(format!("end time must be finite and >= 0, got {}", self.t_end)));
        }
        if !(self.output_dt > 0.0) || !self.output_dt.is_finite() {
            return Err(Error::config(format!("output_dt must be finite and > 0, got {}", self.output_dt)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::config(format!("CFL safety must lie in (0, 1], got {}", self.safety)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Vacuum {
        t: f64,
        cell: usize,
        x: f64,
        rho: f64,
    },
    /// Non-finite fields or step budget exhausted.
    Failed {
        t: f64,
        reason: String,
    },
}

impl Termination {
    pub fn is_vacuum(&self) -> bool {
        matches!(self, Termination::Vacuum { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub state: FlowState,
    pub diag: DiagnosticsRecord,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    /// One sample per accepted step (and the initial time).
    pub history: Vec<HistorySample>,
    pub termination: Termination,
    pub steps: usize,
    /// Smallest density seen at any step.
    pub min_rho_seen: f64,
    /// Smallest unregularized viscosity seen at any step.
    pub min_mu_seen: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Frame {
        self.frames.last().expect("a trajectory always holds the initial frame")
    }
}

/// Integrates `initial` to `cfg.t_end`, emitting diagnostics every
/// `cfg.output_dt`. A vacuum breach ends the run and is recorded in
/// [`Trajectory::termination`].
pub fn run(
    initial: &FlowState,
    mesh: &Mesh,
    p: &Params,
    profile: &BackgroundProfile,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if initial.len() != mesh.len() {
        return Err(Error::config(format!("initial data has {} cells, mesh has {}", initial.len(), mesh.len())));
    }
    check_vacuum(initial, mesh).map_err(|e| Error::config(format!("initial data: {e}")))?;
    check_finite(initial).map_err(|e| Error::config(format!("initial data: {e}")))?;
    let far = FarField::from_profile(profile);

    let mut state = initial.clone();
    let mut acc = Accumulators::start(&state, mesh, p)?;
    let initial_moments = diagnostics::moments_of(&state, mesh, p, &cfg.moments)?;
    let mut history = vec![acc.sample()];
    let record = |state: &FlowState, acc: &Accumulators, history: &[HistorySample]| {
        diagnostics::record(state, mesh, p, profile, cfg, acc, history, &initial_moments)
    };
    let mut frames = vec![Frame { state: state.clone(), diag: record(&state, &acc, &history)? }];
    let mut min_rho_seen = state.min_rho();
    let mut min_mu_seen = state.rho.iter().map(|&r| p.mu_raw(r)).fold(f64::INFINITY, f64::min);

    let mut termination = Termination::Completed;
    let mut steps = 0usize;
    let mut next_output = 1usize;
    let tol = 1e-12 * cfg.t_end.max(1.0);
    while state.t < cfg.t_end - tol {
        if steps >= cfg.max_steps {
            termination =
                Termination::Failed { t: state.t, reason: format!("step budget {} exhausted", cfg.max_steps) };
            break;
        }
        let target = (next_output as f64 * cfg.output_dt).min(cfg.t_end);
        let dt_cfl = match cfl_dt(&state, mesh, p, cfg.safety) {
            Ok(dt) => dt,
            Err(e) => {
                termination = Termination::Failed { t: state.t, reason: e.to_string() };
                break;
            }
        };
        let remaining = target - state.t;
        let (dt, lands) = if dt_cfl >= remaining - tol { (remaining, true) } else { (dt_cfl, false) };
        match step(&state, mesh, p, &far, dt) {
            Ok((mut next, _)) => {
                if lands {
                    next.t = target;
                }
                steps += 1;
                acc.advance(&next, mesh, p)?;
                history.push(acc.sample());
                min_rho_seen = min_rho_seen.min(next.min_rho());
                min_mu_seen = next.rho.iter().map(|&r| p.mu_raw(r)).fold(min_mu_seen, f64::min);
                state = next;
                if lands {
                    frames.push(Frame { state: state.clone(), diag: record(&state, &acc, &history)? });
                    next_output += 1;
                }
            }
            Err(Error::VacuumBreach { cell, x, t: _, rho }) => {
                termination = Termination::Vacuum { t: state.t + dt, cell, x, rho };
                min_rho_seen = min_rho_seen.min(rho);
                break;
            }
            Err(Error::Domain(reason)) => {
                termination = Termination::Failed { t: state.t + dt, reason };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    // the final partial state is worth a frame when the run stopped early
    if termination != Termination::Completed && frames.last().map(|f| f.state.t) != Some(state.t) {
        frames.push(Frame { state: state.clone(), diag: record(&state, &acc, &history)? });
    }
    Ok(Trajectory { frames, history, termination, steps, min_rho_seen, min_mu_seen })
}

/// Cell-average restriction of a field on `fine` cells onto `coarse` cells.
pub fn restrict(fine: &[f64], coarse_cells: usize) -> Result<Vec<f64>> {
    if coarse_cells == 0 || !fine.len().is_multiple_of(coarse_cells) {
        return Err(Error::config(format!(
            "cannot restrict {} cells onto {coarse_cells}: ratio must be an integer",
            fine.len()
        )));
    }
    let r = fine.len() / coarse_cells;
    Ok(fine.chunks(r).map(|c| c.iter().sum::<f64>() / r as f64).collect())
}
