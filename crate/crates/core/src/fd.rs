//! Front-fixing finite-difference solver for the one-sided Stefan problem.
//!
//! In the coordinate `ξ = x - y(t)` attached to the front the problem becomes
//!
//! ```text
//! u_t = ½ u_ξξ + y'(t) u_ξ   on 0 < ξ < L,
//! u(t, 0) = 2,   u(t, L) = λ,   y'(t) = -u_ξ(t, 0+) / (2 u(t, 0+)) = -u_ξ(t, 0+) / 4.
//! ```
//!
//! The advection term is upwinded and the front gradient uses the three-point
//! one-sided difference. The jump initial data are singular at the front, so
//! the solve starts at a small `t₀` from a bootstrap profile: the heat-kernel
//! similarity form `A + B Φ(x/√t)` whose constants and front coefficient are
//! fitted to the boundary value, the far-field value and the flux balance by
//! a few shooting updates starting from a front at the origin.
//! Nothing here uses the closed-form front coefficient.

use alloc::vec::Vec;

use crate::error::{check_positive, Error, Result};
use crate::measure::DensityProfile;
use crate::special::{phi_cdf, phi_pdf, phi_sf};

/// Density pinned at the front.
pub const FRONT_DENSITY: f64 = 2.0;
/// Minimum domain length.
pub const MIN_LENGTH: f64 = 50.0;
/// Default grid spacing in the front-attached coordinate.
pub const DEFAULT_DXI: f64 = 0.0125;
/// Shooting updates of the bootstrap front coefficient.
pub const DEFAULT_BOOTSTRAP_UPDATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    /// Forward Euler in time.
    Explicit,
    /// Crank–Nicolson in time with the front speed frozen over the step.
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub dxi: f64,
    pub length: f64,
    pub t0: f64,
    /// Time step; defaults to `0.4 dxi²` (explicit) or `2 dxi²` (Crank–Nicolson).
    pub dt: Option<f64>,
    pub scheme: FdScheme,
    pub bootstrap_updates: usize,
}

impl FdConfig {
    pub fn new(dxi: f64) -> Self {
        Self {
            dxi,
            length: MIN_LENGTH,
            t0: 1e-3,
            dt: None,
            scheme: FdScheme::Explicit,
            bootstrap_updates: DEFAULT_BOOTSTRAP_UPDATES,
        }
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        Self::new(DEFAULT_DXI)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdStefanState {
    pub lambda: f64,
    pub dxi: f64,
    pub dt: f64,
    pub t: f64,
    /// Front position in lab coordinates.
    pub y: f64,
    /// Density at `ξ_j = j dxi`, `j = 0..=N`.
    pub u: Vec<f64>,
    pub scheme: FdScheme,
}

/// Bootstrap profile `A + B Φ((ξ + c√t₀)/√t₀)` with front coefficient `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

/// Fit the similarity form to the boundary conditions: given a front
/// coefficient, `A + B = λ` and `A + BΦ(c) = 2`; then update `c` from the
/// flux balance `2 c / (2√t) + ½ BΦ'(c)/√t = 0`.
pub fn bootstrap_profile(lambda: f64, updates: usize) -> Bootstrap {
    let fit = |c: f64| {
        let b = (lambda - FRONT_DENSITY) / phi_sf(c);
        (lambda - b, b)
    };
    let mut c = 0.0;
    let (mut a, mut b) = fit(c);
    for _ in 0..updates {
        c = -0.5 * b * phi_pdf(c);
        (a, b) = fit(c);
    }
    Bootstrap { c, a, b }
}

pub fn fd_init(lambda: f64, dxi: f64, length: f64) -> Result<FdStefanState> {
    let mut cfg = FdConfig::new(dxi);
    cfg.length = length;
    fd_init_with(lambda, &cfg)
}

pub fn fd_init_with(lambda: f64, cfg: &FdConfig) -> Result<FdStefanState> {
    check_positive("lambda", lambda)?;
    check_positive("dxi", cfg.dxi)?;
    check_positive("t0", cfg.t0)?;
    if !(cfg.length >= MIN_LENGTH) {
        return Err(Error::Parameter {
            name: "length",
            value: cfg.length,
        });
    }
    let nodes = libm::round(cfg.length / cfg.dxi) as usize;
    if nodes < 3 {
        return Err(Error::Parameter {
            name: "dxi",
            value: cfg.dxi,
        });
    }
    let dt = match (cfg.dt, cfg.scheme) {
        (Some(dt), _) => dt,
        (None, FdScheme::Explicit) => 0.4 * cfg.dxi * cfg.dxi,
        (None, FdScheme::CrankNicolson) => 2.0 * cfg.dxi * cfg.dxi,
    };
    check_positive("dt", dt)?;
    if cfg.scheme == FdScheme::Explicit && dt > 0.5 * cfg.dxi * cfg.dxi {
        return Err(Error::Stability {
            dt,
            limit: 0.5 * cfg.dxi * cfg.dxi,
        });
    }
    let boot = bootstrap_profile(lambda, cfg.bootstrap_updates);
    let st = libm::sqrt(cfg.t0);
    let y = boot.c * st;
    let mut u: Vec<f64> = (0..=nodes)
        .map(|j| boot.a + boot.b * phi_cdf((j as f64 * cfg.dxi + y) / st))
        .collect();
    u[0] = FRONT_DENSITY;
    u[nodes] = lambda;
    Ok(FdStefanState {
        lambda,
        dxi: cfg.dxi,
        dt,
        t: cfg.t0,
        y,
        u,
        scheme: cfg.scheme,
    })
}

impl FdStefanState {
    pub fn nodes(&self) -> usize {
        self.u.len()
    }

    pub fn xi(&self, j: usize) -> f64 {
        j as f64 * self.dxi
    }

    pub fn length(&self) -> f64 {
        self.xi(self.u.len() - 1)
    }

    /// Three-point one-sided `u_ξ(0+)`.
    pub fn front_gradient(&self) -> f64 {
        (-3.0 * self.u[0] + 4.0 * self.u[1] - self.u[2]) / (2.0 * self.dxi)
    }

    /// `y'(t) = -u_ξ(0+) / (2 u(0+))`.
    pub fn front_speed(&self) -> f64 {
        -self.front_gradient() / (2.0 * self.u[0])
    }

    /// Linear interpolation in the front-attached coordinate.
    pub fn value_at(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return self.u[0];
        }
        let s = xi / self.dxi;
        let j = libm::floor(s) as usize;
        if j + 1 >= self.u.len() {
            return self.u[self.u.len() - 1];
        }
        let w = s - j as f64;
        (1.0 - w) * self.u[j] + w * self.u[j + 1]
    }
}

/// Advance by one step of length `state.dt`.
pub fn fd_step(state: &mut FdStefanState) -> Result<()> {
    let dt = state.dt;
    step_by(state, dt)
}

fn step_by(state: &mut FdStefanState, dt: f64) -> Result<()> {
    let v = state.front_speed();
    let h = state.dxi;
    let diff = 0.5 / (h * h);
    // L u_j = lower u_{j-1} + diag u_j + upper u_{j+1}; central advection
    // while it keeps the off-diagonals nonnegative, upwind beyond that
    let (lower, diag, upper) = if v.abs() * h <= 1.0 {
        (diff - 0.5 * v / h, -2.0 * diff, diff + 0.5 * v / h)
    } else {
        (
            diff + (-v).max(0.0) / h,
            -2.0 * diff - v.abs() / h,
            diff + v.max(0.0) / h,
        )
    };
    let n = state.u.len();
    match state.scheme {
        FdScheme::Explicit => {
            let limit = -1.0 / diag;
            if dt > limit {
                return Err(Error::Stability { dt, limit });
            }
            let u = &state.u;
            let mut next = Vec::with_capacity(n);
            next.push(FRONT_DENSITY);
            for j in 1..n - 1 {
                next.push(u[j] + dt * (lower * u[j - 1] + diag * u[j] + upper * u[j + 1]));
            }
            next.push(state.lambda);
            state.u = next;
        }
        FdScheme::CrankNicolson => {
            let half = 0.5 * dt;
            let m = n - 2;
            let u = &state.u;
            // right-hand side (I + dt/2 L) u, Dirichlet values folded in
            let mut rhs: Vec<f64> = (1..n - 1)
                .map(|j| u[j] + half * (lower * u[j - 1] + diag * u[j] + upper * u[j + 1]))
                .collect();
            rhs[0] += half * lower * FRONT_DENSITY;
            rhs[m - 1] += half * upper * state.lambda;
            // Thomas algorithm for (I - dt/2 L)
            let a = -half * lower;
            let b = 1.0 - half * diag;
            let c = -half * upper;
            let mut cp = alloc::vec![0.0; m];
            let mut dp = alloc::vec![0.0; m];
            cp[0] = c / b;
            dp[0] = rhs[0] / b;
            for i in 1..m {
                let denom = b - a * cp[i - 1];
                cp[i] = c / denom;
                dp[i] = (rhs[i] - a * dp[i - 1]) / denom;
            }
            for i in (0..m - 1).rev() {
                dp[i] -= cp[i] * dp[i + 1];
            }
            let mut next = Vec::with_capacity(n);
            next.push(FRONT_DENSITY);
            next.extend_from_slice(&dp);
            next.push(state.lambda);
            state.u = next;
        }
    }
    if let Some((node, &value)) = state.u.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
        return Err(Error::NegativeDensity {
            node,
            value,
            t: state.t + dt,
        });
    }
    state.y += v * dt;
    state.t += dt;
    Ok(())
}

/// Step until `t_end`, shortening the final step to land on it.
pub fn fd_advance_to(state: &mut FdStefanState, t_end: f64) -> Result<()> {
    if t_end < state.t {
        return Err(Error::Domain("target time precedes the state"));
    }
    while t_end - state.t > 1e-12 * t_end.max(1.0) {
        let dt = state.dt.min(t_end - state.t);
        step_by(state, dt)?;
    }
    Ok(())
}

/// Export in lab coordinates: bins between consecutive nodes shifted by the
/// front, with the trapezoid average as the bin density.
pub fn fd_profile(state: &FdStefanState) -> DensityProfile {
    let bin_edges = (0..state.u.len()).map(|j| state.xi(j) + state.y).collect();
    let bin_density = state.u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    DensityProfile { bin_edges, bin_density }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_start_is_flat_and_stays_flat() {
        let mut s = fd_init(2.0, 0.05, 50.0).unwrap();
        assert!(s.u.iter().all(|&u| u == 2.0));
        assert_eq!(s.y, 0.0);
        for _ in 0..100 {
            fd_step(&mut s).unwrap();
        }
        assert!(s.u.iter().all(|&u| u == 2.0));
        assert_eq!(s.y, 0.0);
        assert_eq!(s.front_speed(), 0.0);
    }

    #[test]
    fn boundary_values_are_pinned() {
        for lambda in [0.5, 1.0, 4.0] {
            let s = fd_init(lambda, 0.05, 50.0).unwrap();
            assert_eq!(s.u[0], 2.0);
            assert!((s.u[s.u.len() - 1] - lambda).abs() < 1e-6);
            let excess: f64 = s.u.iter().map(|u| (u - lambda) * s.dxi).sum();
            assert!(excess.is_finite());
            assert!(excess.abs() < 1.0);
        }
    }

    #[test]
    fn bootstrap_is_flat_at_equilibrium() {
        let b = bootstrap_profile(2.0, 1);
        assert_eq!((b.c, b.a, b.b), (0.0, 2.0, 0.0));
        // front moves right below equilibrium density, left above
        assert!(bootstrap_profile(1.0, 1).c > 0.0);
        assert!(bootstrap_profile(4.0, 1).c < 0.0);
    }

    #[test]
    fn parameter_errors() {
        assert!(fd_init(0.0, 0.05, 50.0).is_err());
        assert!(fd_init(1.0, 0.0, 50.0).is_err());
        assert!(fd_init(1.0, 0.05, 10.0).is_err());
        let mut cfg = FdConfig::new(0.05);
        cfg.dt = Some(0.01);
        assert!(matches!(fd_init_with(1.0, &cfg), Err(Error::Stability { .. })));
    }

    #[test]
    fn profile_export_shifts_edges() {
        let mut s = fd_init(1.0, 0.1, 50.0).unwrap();
        fd_advance_to(&mut s, 0.05).unwrap();
        let p = fd_profile(&s);
        assert_eq!(p.bin_edges.len(), s.u.len());
        for (j, e) in p.bin_edges.iter().enumerate() {
            assert_eq!(*e, s.xi(j) + s.y);
        }
        let flat = fd_profile(&fd_init(2.0, 0.1, 50.0).unwrap());
        assert!(flat.bin_density.iter().all(|&d| d == 2.0));
        assert!((flat.total_mass() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn advance_lands_on_target_time() {
        let mut s = fd_init(1.0, 0.1, 50.0).unwrap();
        fd_advance_to(&mut s, 0.0123).unwrap();
        assert!((s.t - 0.0123).abs() < 1e-12);
        assert!(fd_advance_to(&mut s, 0.001).is_err());
    }
}
