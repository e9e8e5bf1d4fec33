//! Closed-form solution of the one-sided Stefan problem
//!
//! ```text
//! u_t = ½ u_xx  for x > y(t),   u = 0 for x < y(t),
//! u(0, x) = λ 1{x > 0},   u(t, y(t)+) = 2,   u(t, y+) y'(t) + ½ u_x(t, y+) = 0,
//! ```
//!
//! whose solution is `u(t, x) = (c₁ + c₂ Φ(x/√t)) 1{x > κ√t}` with the front
//! coefficient `κ` the root of `g(κ) = κ (1 - Φ(κ)) / Φ'(κ) = 1 - λ/2`.

use alloc::vec::Vec;

use crate::error::{check_positive, Error, Result};
use crate::special::{mills_ratio, phi_antiderivative, phi_cdf, phi_pdf, phi_sf};

/// `g(κ) = κ (1 - Φ(κ)) / Φ'(κ)`; strictly increasing from `-∞` to 1.
pub fn g(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    kappa * mills_ratio(kappa)
}

/// `g'(κ) = R(κ)(1 + κ²) - κ` with `R` the Mills ratio, using `R' = κR - 1`.
pub fn g_prime(kappa: f64) -> f64 {
    let r = mills_ratio(kappa);
    r * (1.0 + kappa * kappa) - kappa
}

/// Front coefficient and profile constants for one initial intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StefanSolution {
    pub lambda: f64,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
}

const INITIAL_BRACKET: (f64, f64) = (-6.0, 6.0);

/// Solve `g(κ) = 1 - λ/2` by bracketed Newton with bisection fallback and
/// build the profile constants.
pub fn solve_kappa(lambda: f64) -> Result<StefanSolution> {
    check_positive("lambda", lambda)?;
    let target = 1.0 - 0.5 * lambda;
    if target >= 1.0 {
        return Err(Error::NoConvergence("lambda too small to resolve the front"));
    }
    let kappa = solve_g(target)?;
    let sf = phi_sf(kappa);
    let c1 = (2.0 - lambda * phi_cdf(kappa)) / sf;
    let c2 = (lambda - 2.0) / sf;
    Ok(StefanSolution { lambda, kappa, c1, c2 })
}

fn solve_g(target: f64) -> Result<f64> {
    let (mut lo, mut hi) = INITIAL_BRACKET;
    while g(lo) > target {
        lo *= 2.0;
        if lo < -1e3 {
            return Err(Error::NoConvergence("lower bracket expansion"));
        }
    }
    while g(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::NoConvergence("upper bracket expansion"));
        }
    }
    let mut x = 0.0_f64.clamp(lo, hi);
    for _ in 0..300 {
        let f = g(x) - target;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / g_prime(x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs())
        {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("Newton iteration on g"))
}

impl StefanSolution {
    /// `y★(t) = κ √t`.
    pub fn y_star(&self, t: f64) -> f64 {
        self.kappa * libm::sqrt(t)
    }

    /// `c₁ + c₂ Φ(x/√t)` without the indicator; the right limit at the front.
    fn profile_raw(&self, t: f64, x: f64) -> f64 {
        self.c1 + self.c2 * phi_cdf(x / libm::sqrt(t))
    }

    /// Limiting density `u★(t, x)`.
    pub fn u_star(&self, t: f64, x: f64) -> Result<f64> {
        check_positive("t", t)?;
        Ok(if x > self.y_star(t) {
            self.profile_raw(t, x)
        } else {
            0.0
        })
    }

    /// `∫_{y★(t)}^{x} u★(t, r) dr` in closed form.
    pub fn integrated_profile(&self, t: f64, x: f64) -> Result<f64> {
        check_positive("t", t)?;
        let front = self.y_star(t);
        if x < front {
            return Err(Error::Domain("integration bound below the front"));
        }
        let st = libm::sqrt(t);
        let z = x / st;
        Ok(self.c1 * (x - front) + self.c2 * st * (phi_antiderivative(z) - phi_antiderivative(self.kappa)))
    }

    /// Position `x` with `∫_{y★(t)}^{x} u★(t, r) dr = mass`.
    pub fn profile_quantile(&self, t: f64, mass: f64) -> Result<f64> {
        check_positive("t", t)?;
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::Domain("mass must be finite and nonnegative"));
        }
        let front = self.y_star(t);
        if mass == 0.0 {
            return Ok(front);
        }
        // the density lies between min(λ, 2) and max(λ, 2)
        let mut lo = front;
        let mut hi = front + mass / self.lambda.min(2.0);
        let mut x = front + mass / (0.5 * (self.lambda + 2.0));
        for _ in 0..200 {
            let f = self.integrated_profile(t, x)? - mass;
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / self.profile_raw(t, x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::NoConvergence("profile quantile"))
    }

    /// Residuals of `c₁ + c₂ = λ`, `c₁ + c₂Φ(κ) = 2` and `κ + ½c₂Φ'(κ) = 0`.
    pub fn algebraic_residuals(&self) -> [f64; 3] {
        [
            self.c1 + self.c2 - self.lambda,
            self.c1 + self.c2 * phi_cdf(self.kappa) - 2.0,
            self.kappa + 0.5 * self.c2 * phi_pdf(self.kappa),
        ]
    }
}

/// Heat-equation solution `w(t, x; c) = a(c)(Φ(x/√t) - Φ(c))` vanishing on the
/// parabola `x = c√t`, with `a(c) = (1 - λ/2) / (1 - Φ(c))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityBoundary {
    pub lambda: f64,
    pub c: f64,
    pub a_of_c: f64,
}

impl SimilarityBoundary {
    pub fn new(lambda: f64, c: f64) -> Self {
        Self {
            lambda,
            c,
            a_of_c: (1.0 - 0.5 * lambda) / phi_sf(c),
        }
    }

    pub fn boundary(&self, t: f64) -> f64 {
        self.c * libm::sqrt(t)
    }

    pub fn w(&self, t: f64, x: f64) -> f64 {
        self.a_of_c * (phi_cdf(x / libm::sqrt(t)) - phi_cdf(self.c))
    }

    /// `w_x` on the boundary, `a(c) Φ'(c) / √t`.
    pub fn boundary_gradient(&self, t: f64) -> f64 {
        self.a_of_c * phi_pdf(self.c) / libm::sqrt(t)
    }
}

/// `I(c) = (1 - λ/2) Φ'(c) / (1 - Φ(c))`: the coefficient of the boundary
/// `½ ∫₀ᵗ w_x(s, c√s; c) ds = I(c) √t`. Its unique fixed point is `κ`.
pub fn fixed_point_map(c: f64, lambda: f64) -> Result<f64> {
    if !(lambda < 2.0) {
        return Err(Error::Regime(lambda));
    }
    check_positive("lambda", lambda)?;
    if !c.is_finite() {
        return Err(Error::Domain("boundary coefficient must be finite"));
    }
    Ok((1.0 - 0.5 * lambda) / mills_ratio(c))
}

/// Iterates `c₀, I(c₀), I(I(c₀)), ...` until successive values agree to
/// `1e-13` (relative) or `max_iter` maps have been applied.
pub fn boundary_iteration(c0: f64, lambda: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(max_iter + 1);
    out.push(c0);
    let mut c = c0;
    for _ in 0..max_iter {
        let next = fixed_point_map(c, lambda)?;
        out.push(next);
        if (next - c).abs() <= 1e-13 * next.abs().max(1.0) {
            break;
        }
        c = next;
    }
    Ok(out)
}

/// Default step for the second-difference residual, `ε^{1/4} max(1, |x|)`.
pub fn default_heat_step(x: f64) -> f64 {
    libm::pow(f64::EPSILON, 0.25) * x.abs().max(1.0)
}

/// Default step for the one-sided flux residual, `ε^{1/3} max(1, t)`.
pub fn default_flux_step(t: f64) -> f64 {
    libm::cbrt(f64::EPSILON) * t.abs().max(1.0)
}

/// Central-difference residual of `u_t - ½ u_xx` at `(t, x)`.
pub fn residual_heat(sol: &StefanSolution, t: f64, x: f64, h: f64) -> Result<f64> {
    check_positive("h", h)?;
    check_positive("t", t)?;
    if t - h <= 0.0 {
        return Err(Error::Domain("time stencil reaches t <= 0"));
    }
    let front = sol.y_star(t + h).max(sol.y_star(t - h));
    if x - h <= front {
        return Err(Error::Domain("stencil crosses the front"));
    }
    let u = |t: f64, x: f64| sol.profile_raw(t, x);
    let u_t = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
    let u_xx = (u(t, x + h) - 2.0 * u(t, x) + u(t, x - h)) / (h * h);
    Ok(u_t - 0.5 * u_xx)
}

/// Residual of `u y' + ½ u_x` at the front, with a one-sided second-order
/// gradient and a central difference for `y'`.
pub fn residual_flux(sol: &StefanSolution, t: f64, h: f64) -> Result<f64> {
    check_positive("h", h)?;
    check_positive("t", t)?;
    if t - h <= 0.0 {
        return Err(Error::Domain("time stencil reaches t <= 0"));
    }
    let y = sol.y_star(t);
    let u = |x: f64| sol.profile_raw(t, x);
    let u_front = sol.c1 + sol.c2 * phi_cdf(sol.kappa);
    let u_x = (-3.0 * u_front + 4.0 * u(y + h) - u(y + 2.0 * h)) / (2.0 * h);
    let y_dot = (sol.y_star(t + h) - sol.y_star(t - h)) / (2.0 * h);
    Ok(u_front * y_dot + 0.5 * u_x)
}
