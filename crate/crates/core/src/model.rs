//! Two-link planar manipulator: kinematics, joint-space dynamics and the
//! Cartesian-space transform used by the tracker.
//!
//! Angles follow the usual convention: `q1` is measured from the x-axis and
//! `q2` is the elbow angle relative to the first link.

use crate::error::{ensure, Error, Result};
use crate::integrate::rk4_step;
use crate::{Mat2, Vec2};
use nalgebra::Vector4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorParams {
    /// Link masses (kg), lumped at the distal end of each link.
    pub m1: f64,
    pub m2: f64,
    /// Link lengths (m).
    pub l1: f64,
    pub l2: f64,
    pub gravity: f64,
    /// Smallest `|det J|` accepted by Cartesian-space operations.
    pub singularity_tolerance: f64,
    /// Whether the configuration-dependent joint friction acts.
    pub friction: bool,
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            m1: 1.5,
            m2: 1.0,
            l1: 0.3,
            l2: 0.3,
            gravity: 9.81,
            singularity_tolerance: 1e-4,
            friction: true,
        }
    }
}

impl ManipulatorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("l1", self.l1), ("l2", self.l2)] {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be positive"))?;
        }
        ensure(self.gravity.is_finite(), || "gravity must be finite".into())?;
        ensure(self.singularity_tolerance.is_finite() && self.singularity_tolerance > 0.0, || {
            "singularity_tolerance must be positive".into()
        })
    }

    /// Same arm with friction switched off; the controller's internal model.
    pub fn without_friction(&self) -> Self {
        Self { friction: false, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: Vec2,
    pub qdot: Vec2,
}

impl JointState {
    pub fn new(q: Vec2, qdot: Vec2) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: Vec2) -> Self {
        Self { q, qdot: Vec2::zeros() }
    }

    fn pack(&self) -> Vector4<f64> {
        Vector4::new(self.q[0], self.q[1], self.qdot[0], self.qdot[1])
    }

    fn unpack(v: &Vector4<f64>) -> Self {
        Self { q: Vec2::new(v[0], v[1]), qdot: Vec2::new(v[2], v[3]) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub x: Vec2,
    pub xdot: Vec2,
}

/// The four joint-space arrays of the manipulator equation
/// `M q̈ + c + G + F = τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDynamicsTerms {
    pub mass: Mat2,
    /// Coriolis and centrifugal torques (already multiplied by q̇).
    pub coriolis: Vec2,
    pub gravity: Vec2,
    pub friction: Vec2,
}

/// Task-space dynamics `M_x ẍ + bias = f`, i.e. `ẍ = Xi (f - bias)`.
///
/// `bias` folds the Coriolis, gravity and friction contributions together
/// with the `-M J⁻¹ J̇ q̇` term that comes from differentiating `ẋ = J q̇`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianDynamicsTerms {
    pub inertia: Mat2,
    pub bias: Vec2,
    /// Inverse of `inertia`.
    pub input_map: Mat2,
}

impl CartesianDynamicsTerms {
    /// Control-free acceleration `Γ = -Xi · bias`.
    pub fn drift(&self) -> Vec2 {
        -(self.input_map * self.bias)
    }

    pub fn acceleration(&self, force: &Vec2) -> Vec2 {
        self.input_map * (force - self.bias)
    }
}

/// Closed-form 2×2 inverse; `None` when the determinant is exactly zero.
pub fn invert2(m: &Mat2) -> Option<Mat2> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

pub fn forward_kinematics(params: &ManipulatorParams, q: &Vec2) -> Vec2 {
    let q12 = q[0] + q[1];
    Vec2::new(
        params.l1 * q[0].cos() + params.l2 * q12.cos(),
        params.l1 * q[0].sin() + params.l2 * q12.sin(),
    )
}

#[rustfmt::skip]
pub fn jacobian(params: &ManipulatorParams, q: &Vec2) -> Mat2 {
    let (l1, l2) = (params.l1, params.l2);
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    Mat2::new(
        -l1 * s1 - l2 * s12, -l2 * s12,
         l1 * c1 + l2 * c12,  l2 * c12,
    )
}

#[rustfmt::skip]
pub fn jacobian_dot(params: &ManipulatorParams, state: &JointState) -> Mat2 {
    let (l1, l2) = (params.l1, params.l2);
    let (s1, c1) = state.q[0].sin_cos();
    let (s12, c12) = (state.q[0] + state.q[1]).sin_cos();
    let w1 = state.qdot[0];
    let w12 = state.qdot[0] + state.qdot[1];
    Mat2::new(
        -l1 * c1 * w1 - l2 * c12 * w12, -l2 * c12 * w12,
        -l1 * s1 * w1 - l2 * s12 * w12, -l2 * s12 * w12,
    )
}

/// `det J = l1 l2 sin q2`.
pub fn jacobian_determinant(params: &ManipulatorParams, q: &Vec2) -> f64 {
    params.l1 * params.l2 * q[1].sin()
}

pub fn joint_dynamics_terms(params: &ManipulatorParams, state: &JointState) -> JointDynamicsTerms {
    let ManipulatorParams { m1, m2, l1, l2, gravity: g, .. } = *params;
    let (q, qd) = (state.q, state.qdot);
    let (s2, c2) = q[1].sin_cos();
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();

    let i2 = m2 * l2 * l2;
    let coupling = m2 * l1 * l2;
    let m12 = i2 + coupling * c2;
    let mass = Mat2::new(i2 + 2.0 * coupling * c2 + (m1 + m2) * l1 * l1, m12, m12, i2);

    let coriolis = Vec2::new(
        -coupling * s2 * qd[1] * qd[1] - 2.0 * coupling * s2 * qd[0] * qd[1],
        coupling * s2 * qd[0] * qd[0],
    );
    let gravity = Vec2::new(m2 * l2 * g * c12 + (m1 + m2) * l1 * g * c1, m2 * l2 * g * c12);
    let friction = if params.friction {
        let f = 2.0 * c1 * s2 + 5.0 * c1 * c1;
        Vec2::new(f, -f)
    } else {
        Vec2::zeros()
    };
    JointDynamicsTerms { mass, coriolis, gravity, friction }
}

fn check_singularity(params: &ManipulatorParams, q: &Vec2) -> Result<()> {
    let det = jacobian_determinant(params, q);
    if det.abs() < params.singularity_tolerance {
        Err(Error::SingularConfiguration { det, tolerance: params.singularity_tolerance })
    } else {
        Ok(())
    }
}

pub fn cartesian_state(params: &ManipulatorParams, state: &JointState) -> CartesianState {
    CartesianState {
        x: forward_kinematics(params, &state.q),
        xdot: jacobian(params, &state.q) * state.qdot,
    }
}

pub fn cartesian_dynamics_terms(
    params: &ManipulatorParams,
    state: &JointState,
) -> Result<CartesianDynamicsTerms> {
    check_singularity(params, &state.q)?;
    let j = jacobian(params, &state.q);
    let jdot = jacobian_dot(params, state);
    let j_inv = invert2(&j).expect("nonsingular after tolerance check");
    let j_inv_t = j_inv.transpose();
    let terms = joint_dynamics_terms(params, state);

    let inertia = j_inv_t * terms.mass * j_inv;
    let joint_bias = terms.coriolis + terms.gravity + terms.friction - terms.mass * j_inv * jdot * state.qdot;
    let bias = j_inv_t * joint_bias;
    // Xi = J M⁻¹ Jᵀ avoids inverting the (possibly ill-conditioned) M_x.
    let m_inv = invert2(&terms.mass).expect("manipulator inertia is positive definite");
    let input_map = j * m_inv * j.transpose();
    Ok(CartesianDynamicsTerms { inertia, bias, input_map })
}

/// `q̈ = M⁻¹(τ + Jᵀ f_e − c − G − F)`.
pub fn joint_acceleration(params: &ManipulatorParams, state: &JointState, tau: &Vec2, f_ext: &Vec2) -> Vec2 {
    let terms = joint_dynamics_terms(params, state);
    let j = jacobian(params, &state.q);
    let rhs = tau + j.transpose() * f_ext - terms.coriolis - terms.gravity - terms.friction;
    invert2(&terms.mass).expect("manipulator inertia is positive definite") * rhs
}

/// One RK4 step of the joint dynamics with `tau` and `f_ext` held constant.
pub fn plant_step(
    params: &ManipulatorParams,
    state: &JointState,
    tau: &Vec2,
    f_ext: &Vec2,
    dt: f64,
) -> Result<JointState> {
    ensure(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    check_singularity(params, &state.q)?;
    let y = rk4_step(0.0, &state.pack(), dt, |_, y| {
        let s = JointState::unpack(y);
        let qdd = joint_acceleration(params, &s, tau, f_ext);
        Vector4::new(s.qdot[0], s.qdot[1], qdd[0], qdd[1])
    });
    Ok(JointState::unpack(&y))
}

/// Which of the two inverse-kinematics branches to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elbow {
    /// `q2 > 0`
    Positive,
    /// `q2 < 0`
    Negative,
}

/// Joint angles placing the end effector at `x`, or `None` outside the
/// annular reachable set.
pub fn inverse_kinematics(params: &ManipulatorParams, x: &Vec2, elbow: Elbow) -> Option<Vec2> {
    let (l1, l2) = (params.l1, params.l2);
    let c2 = (x.norm_squared() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let mut q2 = c2.acos();
    if elbow == Elbow::Negative {
        q2 = -q2;
    }
    let q1 = x[1].atan2(x[0]) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Some(Vec2::new(q1, q2))
}

/// Joint state reproducing a Cartesian position and velocity.
pub fn joint_state_from_cartesian(
    params: &ManipulatorParams,
    cart: &CartesianState,
    elbow: Elbow,
) -> Result<JointState> {
    let q = inverse_kinematics(params, &cart.x, elbow)
        .ok_or_else(|| Error::Validation(format!("point {:?} is unreachable", cart.x.as_slice())))?;
    check_singularity(params, &q)?;
    let j_inv = invert2(&jacobian(params, &q)).expect("nonsingular after tolerance check");
    Ok(JointState::new(q, j_inv * cart.xdot))
}
