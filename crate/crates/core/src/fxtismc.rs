//! Fixed-time integral sliding-mode tracker in Cartesian space.
//!
//! The control is `u_c = u_0 + u_s`: a backstepping nominal law that cancels
//! the modeled dynamics, plus a compensating term driven by an integral
//! sliding variable `σ` that rejects whatever the model misses (friction and
//! the human force, here).
//!
//! `[z]^a` denotes the signed power `sign(z)|z|^a`, applied elementwise.

use crate::admittance::DesiredPoint;
use crate::error::{ensure, Result};
use crate::model::{CartesianDynamicsTerms, CartesianState};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FxtismcGains {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub m_exp: f64,
    pub n_exp: f64,
    pub p_exp: f64,
    pub q_exp: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for FxtismcGains {
    fn default() -> Self {
        Self {
            lambda1: 3.0,
            lambda2: 20.0,
            lambda3: 50.0,
            alpha: 5.0 / 7.0,
            beta: 5.0 / 3.0,
            kappa1: 20.0,
            kappa2: 50.0,
            kappa3: 20.0,
            kappa4: 50.0,
            m_exp: 5.0 / 7.0,
            n_exp: 5.0 / 3.0,
            p_exp: 5.0 / 7.0,
            q_exp: 5.0 / 3.0,
            rho: 40.0,
            epsilon: 10.0,
        }
    }
}

impl FxtismcGains {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
            ("kappa4", self.kappa4),
            ("rho", self.rho),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive"))?;
        }
        let split = [
            ("alpha", self.alpha, "beta", self.beta),
            ("m_exp", self.m_exp, "n_exp", self.n_exp),
            ("p_exp", self.p_exp, "q_exp", self.q_exp),
        ];
        for (lo_name, lo, hi_name, hi) in split {
            ensure(lo > 0.0 && lo < 1.0, || format!("{lo_name} must lie in (0, 1)"))?;
            ensure(hi > 1.0 && hi.is_finite(), || format!("{hi_name} must exceed 1"))?;
        }
        Ok(())
    }
}

/// How `sign(σ)` is realized in discrete time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Switching {
    Sign,
    /// `sat(σ / width)`, linear inside the boundary layer.
    Saturation { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub gains: FxtismcGains,
    pub switching: Switching,
    /// Per-axis clamp on the commanded Cartesian force (N).
    pub force_limit: f64,
    /// When false only the nominal force is applied.
    pub compensator: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: FxtismcGains::default(),
            switching: Switching::Saturation { width: 1e-3 },
            force_limit: 1e5,
            compensator: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        if let Switching::Saturation { width } = self.switching {
            ensure(width.is_finite() && width > 0.0, || "boundary layer width must be positive".into())?;
        }
        ensure(self.force_limit > 0.0, || "force_limit must be positive".into())
    }
}

/// Running state of the integral sliding surface.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Trapezoidal integral of the nominal `ṡ`.
    pub sigma_integral: Vec2,
    /// `s(0)`, captured on the first call after a reset.
    pub s_initial: Vec2,
    pub last_integrand: Vec2,
    pub initialized: bool,
}

impl ControllerState {
    pub fn reset() -> Self {
        Self::default()
    }
}

pub fn signed_power_scalar(z: f64, a: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.signum() * z.abs().powf(a)
    }
}

pub fn signed_power(z: &Vec2, a: f64) -> Vec2 {
    z.map(|v| signed_power_scalar(v, a))
}

/// `d[z]^a/dz = a |z|^(a−1)`, taken as zero at `z = 0`.
fn signed_power_slope(z: f64, a: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        a * z.abs().powf(a - 1.0)
    }
}

/// `λ1 z + λ2 [z]^α + λ3 [z]^β`
fn nominal_feedback(g: &FxtismcGains, z: &Vec2) -> Vec2 {
    z * g.lambda1 + signed_power(z, g.alpha) * g.lambda2 + signed_power(z, g.beta) * g.lambda3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalControl {
    pub force: Vec2,
    pub s1: Vec2,
    pub s2: Vec2,
    /// Virtual velocity command.
    pub alpha_s: Vec2,
    pub alpha_s_dot: Vec2,
    /// `Xi u_0 + Γ`: the acceleration the model predicts under `u_0` alone.
    pub predicted_accel: Vec2,
}

pub fn nominal_control(
    gains: &FxtismcGains,
    terms: &CartesianDynamicsTerms,
    cart: &CartesianState,
    reference: &DesiredPoint,
) -> NominalControl {
    let s1 = cart.x - reference.x;
    let s1_dot = cart.xdot - reference.xdot;
    let alpha_s = reference.xdot - nominal_feedback(gains, &s1);
    let slope = s1.map(|v| {
        gains.lambda1 + gains.lambda2 * signed_power_slope(v, gains.alpha) + gains.lambda3 * signed_power_slope(v, gains.beta)
    });
    let alpha_s_dot = reference.xddot - slope.component_mul(&s1_dot);
    let s2 = cart.xdot - alpha_s;
    let predicted_accel = alpha_s_dot - nominal_feedback(gains, &s2);
    let force = terms.inertia * (predicted_accel - terms.drift());
    NominalControl { force, s1, s2, alpha_s, alpha_s_dot, predicted_accel }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatingControl {
    pub force: Vec2,
    pub s: Vec2,
    pub sigma: Vec2,
}

/// Sliding variable `s = e + κ1^(−m) [ė + κ2 [e]^n]^(1/m)` and its rate
/// along a given error acceleration.
fn sliding_variable(g: &FxtismcGains, e: &Vec2, edot: &Vec2, eddot: &Vec2) -> (Vec2, Vec2) {
    let inv_m = 1.0 / g.m_exp;
    let scale = g.kappa1.powf(-g.m_exp);
    let z = edot + signed_power(e, g.n_exp) * g.kappa2;
    let s = e + signed_power(&z, inv_m) * scale;
    let zdot = eddot + e.map(|v| signed_power_slope(v, g.n_exp)).component_mul(edot) * g.kappa2;
    let rate = edot + z.map(|v| signed_power_slope(v, inv_m)).component_mul(&zdot) * scale;
    (s, rate)
}

pub fn compensating_control(
    config: &ControllerConfig,
    state: &ControllerState,
    terms: &CartesianDynamicsTerms,
    e: &Vec2,
    edot: &Vec2,
    eddot: &Vec2,
    dt: f64,
) -> Result<(CompensatingControl, ControllerState)> {
    ensure(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    let g = &config.gains;
    let (s, integrand) = sliding_variable(g, e, edot, eddot);

    let mut next = *state;
    if state.initialized {
        next.sigma_integral += (state.last_integrand + integrand) * (0.5 * dt);
    } else {
        next = ControllerState { sigma_integral: Vec2::zeros(), s_initial: s, last_integrand: integrand, initialized: true };
    }
    next.last_integrand = integrand;
    let sigma = if state.initialized { s - next.s_initial - next.sigma_integral } else { Vec2::zeros() };

    let switch = match config.switching {
        Switching::Sign => sigma.map(|v| if v == 0.0 { 0.0 } else { v.signum() }),
        Switching::Saturation { width } => sigma.map(|v| (v / width).clamp(-1.0, 1.0)),
    };
    let accel = -(switch * (g.rho + g.epsilon)) - signed_power(&sigma, g.p_exp) * g.kappa3
        - signed_power(&sigma, g.q_exp) * g.kappa4;
    let force = terms.inertia * accel;
    Ok((CompensatingControl { force, s, sigma }, next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Commanded Cartesian force after clamping.
    pub force: Vec2,
    pub nominal: NominalControl,
    pub compensating: CompensatingControl,
    pub clamped: bool,
}

impl ControlOutput {
    pub fn unclamped(&self) -> Vec2 {
        self.nominal.force + self.compensating.force
    }
}

/// `u_c = u_0 + u_s` tracking `reference`, clamped to `±force_limit` per axis.
///
/// The error acceleration fed to the sliding surface integral is the one the
/// friction-free model predicts under `u_0`, so `σ` measures exactly the
/// unmodeled part of the motion.
pub fn control(
    config: &ControllerConfig,
    state: &ControllerState,
    terms: &CartesianDynamicsTerms,
    cart: &CartesianState,
    reference: &DesiredPoint,
    dt: f64,
) -> Result<(ControlOutput, ControllerState)> {
    let nominal = nominal_control(&config.gains, terms, cart, reference);
    let e = cart.x - reference.x;
    let edot = cart.xdot - reference.xdot;
    let eddot = nominal.predicted_accel - reference.xddot;
    let (mut compensating, next) = compensating_control(config, state, terms, &e, &edot, &eddot, dt)?;
    if !config.compensator {
        compensating.force = Vec2::zeros();
    }
    let raw = nominal.force + compensating.force;
    let limit = config.force_limit;
    let force = raw.map(|v| v.clamp(-limit, limit));
    Ok((ControlOutput { force, nominal, compensating, clamped: force != raw }, next))
}
