//! Truncated domain `[-L, L]`, the far-field background profile, the data
//! mollifier and the discrete operators every solver and functional is built on.

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

/// Uniform cell-centered grid on `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    half_width: f64,
    dx: f64,
    x: Vec<f64>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

pub fn build_mesh(half_width: f64, cells: usize) -> Result<Mesh> {
    if !half_width.is_finite() || half_width <= 0.0 {
        return Err(Error::config(format!("domain half-width must be finite and positive, got {half_width}")));
    }
    if cells < MIN_CELLS {
        return Err(Error::config(format!("need at least {MIN_CELLS} cells, got {cells}")));
    }
    let dx = 2.0 * half_width / cells as f64;
    let x = (0..cells).map(|i| -half_width + (i as f64 + 0.5) * dx).collect();
    Ok(Mesh { half_width, dx, x })
}

/// Monotone background density, constant `rho_minus` for `x <= -1` and
/// `rho_plus` for `x >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundProfile {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub values: Vec<f64>,
}

impl BackgroundProfile {
    /// Evaluates the profile at an arbitrary point.
    pub fn at(&self, x: f64) -> f64 {
        profile_value(self.rho_minus, self.rho_plus, x)
    }

    pub fn is_constant(&self) -> bool {
        self.rho_minus == self.rho_plus
    }
}

/// Quintic smoothstep: C^2, with `s(0) = 0`, `s(1) = 1`, `s(1/2) = 1/2`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn profile_value(rho_minus: f64, rho_plus: f64, x: f64) -> f64 {
    if x <= -1.0 {
        rho_minus
    } else if x >= 1.0 {
        rho_plus
    } else {
        rho_minus + (rho_plus - rho_minus) * smoothstep(0.5 * (x + 1.0))
    }
}

pub fn background_profile(mesh: &Mesh, rho_minus: f64, rho_plus: f64) -> Result<BackgroundProfile> {
    for (name, v) in [("rho_minus", rho_minus), ("rho_plus", rho_plus)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::config(format!("{name} must be finite and positive, got {v}")));
        }
    }
    if mesh.half_width() < 2.0 {
        return Err(Error::config(format!(
            "domain half-width {} too small: the profile needs L >= 2",
            mesh.half_width()
        )));
    }
    let values = mesh.x().iter().map(|&x| profile_value(rho_minus, rho_plus, x)).collect();
    Ok(BackgroundProfile { rho_minus, rho_plus, values })
}

/// Unnormalized bump `exp(-1/(1-s^2))` on `(-1, 1)`.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Discrete convolution with `K_n(x) = n K(n x)`.
///
/// Weights are sampled on the grid and normalized to unit sum, so constants
/// are reproduced exactly. Values beyond the ends are extended by the end value.
pub fn mollify(f: &[f64], mesh: &Mesh, n: u32) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("mollifier index must be >= 1"));
    }
    check_len(f, mesh)?;
    let radius = 1.0 / n as f64;
    if radius > mesh.half_width() {
        return Err(Error::config(format!(
            "mollifier support {radius} exceeds the domain half-width {}",
            mesh.half_width()
        )));
    }
    let dx = mesh.dx();
    let reach = (radius / dx).floor() as usize;
    let mut weights: Vec<f64> = (0..=reach).map(|j| bump(j as f64 * dx / radius)).collect();
    if weights.iter().skip(1).all(|&w| w == 0.0) {
        // support narrower than the grid: identity
        return Ok(f.to_vec());
    }
    let total: f64 = weights[0] + 2.0 * weights[1..].iter().sum::<f64>();
    weights.iter_mut().for_each(|w| *w /= total);

    let last = f.len() as isize - 1;
    let at = |i: isize| f[i.clamp(0, last) as usize];
    let out = (0..f.len() as isize)
        .map(|i| {
            let mut s = weights[0] * f[i as usize];
            for (j, &w) in weights.iter().enumerate().skip(1) {
                let j = j as isize;
                s += w * (at(i - j) + at(i + j));
            }
            s
        })
        .collect();
    Ok(out)
}

fn check_len(f: &[f64], mesh: &Mesh) -> Result<()> {
    if f.len() != mesh.len() {
        return Err(Error::config(format!("field has {} values, mesh has {} cells", f.len(), mesh.len())));
    }
    Ok(())
}

/// Centered difference inside, second-order one-sided at the two ends.
pub fn grad_c(f: &[f64], mesh: &Mesh) -> Vec<f64> {
    let n = f.len();
    debug_assert_eq!(n, mesh.len());
    let h2 = 2.0 * mesh.dx();
    let mut g = vec![0.0; n];
    for i in 1..n - 1 {
        g[i] = (f[i + 1] - f[i - 1]) / h2;
    }
    // written in differences so constants give exactly zero
    g[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / h2;
    g[n - 1] = (4.0 * (f[n - 1] - f[n - 2]) - (f[n - 1] - f[n - 3])) / h2;
    g
}

/// Divergence of face fluxes: `faces[k]` is the flux through the face left
/// of cell `k`, `faces[N]` the right domain face.
pub fn div_faces(faces: &[f64], mesh: &Mesh) -> Vec<f64> {
    debug_assert_eq!(faces.len(), mesh.len() + 1);
    let dx = mesh.dx();
    faces.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

/// Arithmetic face average inside; the end cell value on the two domain faces.
pub fn central_faces(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut faces = Vec::with_capacity(n + 1);
    faces.push(f[0]);
    faces.extend(f.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    faces.push(f[n - 1]);
    faces
}

/// Conservative divergence of a cell-centered flux. `sum(div_flux(f)) * dx`
/// telescopes to `f[N-1] - f[0]`.
pub fn div_flux(flux: &[f64], mesh: &Mesh) -> Vec<f64> {
    div_faces(&central_faces(flux), mesh)
}

/// `d/dx (coef d/dx f)` in three-point flux form with arithmetic face
/// coefficients. The two domain faces carry zero flux.
pub fn diffuse(coef: &[f64], f: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    if let Some((i, c)) = coef.iter().enumerate().find(|(_, c)| !(**c >= 0.0)) {
        return Err(Error::domain(format!("negative diffusion coefficient {c} at cell {i}")));
    }
    Ok(diffuse_unchecked(coef, f, mesh))
}

pub(crate) fn diffuse_unchecked(coef: &[f64], f: &[f64], mesh: &Mesh) -> Vec<f64> {
    let n = f.len();
    let inv = 1.0 / (mesh.dx() * mesh.dx());
    let mut faces = vec![0.0; n + 1];
    for k in 1..n {
        faces[k] = 0.5 * (coef[k - 1] + coef[k]) * (f[k] - f[k - 1]);
    }
    (0..n).map(|i| (faces[i + 1] - faces[i]) * inv).collect()
}

/// Midpoint rule.
pub fn integrate(f: &[f64], mesh: &Mesh) -> f64 {
    f.iter().sum::<f64>() * mesh.dx()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lp(f64),
    Linf,
    H1,
    /// `L^2` below magnitude 1, `L^gamma` above it.
    OrliczGamma2(f64),
}

pub fn norm(f: &[f64], mesh: &Mesh, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::Lp(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::config(format!("Lp norm needs finite p >= 1, got {p}")));
            }
            let s: f64 = f.iter().map(|v| v.abs().powf(p)).sum::<f64>() * mesh.dx();
            s.powf(1.0 / p)
        }
        NormKind::Linf => f.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::H1 => {
            let g = grad_c(f, mesh);
            let s: f64 = f.iter().chain(g.iter()).map(|v| v * v).sum::<f64>() * mesh.dx();
            s.sqrt()
        }
        NormKind::OrliczGamma2(gamma) => {
            let s: f64 = f
                .iter()
                .map(|v| {
                    let a = v.abs();
                    if a <= 1.0 {
                        a * a
                    } else {
                        a.powf(gamma)
                    }
                })
                .sum::<f64>()
                * mesh.dx();
            s.sqrt()
        }
    })
}
