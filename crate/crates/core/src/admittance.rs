//! Virtual mass-spring-damper reference generator.
//!
//! Per axis, `k_m (ẍ_r − ẍ_d) + k_b (ẋ_r − ẋ_d) + k_k (x_r − x_d) = f`, written
//! as the control-affine system `ẋ1 = x2`, `ẋ2 = f(x) + g u` with the
//! interaction force as input `u`.

use crate::error::{ensure, Result};
use crate::integrate::rk4_step;
use crate::Vec2;
use nalgebra::Vector4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGains {
    /// Virtual mass (kg).
    pub k_m: f64,
    /// Virtual damping (N·s/m).
    pub k_b: f64,
    /// Virtual stiffness (N/m).
    pub k_k: f64,
}

impl Default for AxisGains {
    fn default() -> Self {
        Self { k_m: 20.0, k_b: 20.0, k_k: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdmittanceParams {
    pub axes: [AxisGains; 2],
}

impl AdmittanceParams {
    pub fn uniform(gains: AxisGains) -> Self {
        Self { axes: [gains; 2] }
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.axes {
            ensure(g.k_m.is_finite() && g.k_m > 0.0, || "k_m must be positive".into())?;
            ensure(g.k_b.is_finite() && g.k_b >= 0.0, || "k_b must be non-negative".into())?;
            ensure(g.k_k.is_finite() && g.k_k >= 0.0, || "k_k must be non-negative".into())?;
        }
        Ok(())
    }

    /// `g_i = 1 / k_m` per axis.
    pub fn input_gain(&self) -> Vec2 {
        Vec2::new(1.0 / self.axes[0].k_m, 1.0 / self.axes[1].k_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmittanceState {
    /// Reference position (m).
    pub x1: Vec2,
    /// Reference velocity (m/s).
    pub x2: Vec2,
}

impl AdmittanceState {
    pub fn new(x1: Vec2, x2: Vec2) -> Self {
        Self { x1, x2 }
    }

    /// Starts exactly on the desired trajectory.
    pub fn on(desired: &DesiredPoint) -> Self {
        Self { x1: desired.x, x2: desired.xdot }
    }

    fn pack(&self) -> Vector4<f64> {
        Vector4::new(self.x1[0], self.x1[1], self.x2[0], self.x2[1])
    }

    fn unpack(v: &Vector4<f64>) -> Self {
        Self { x1: Vec2::new(v[0], v[1]), x2: Vec2::new(v[2], v[3]) }
    }
}

/// A sample of a twice-differentiable reference: position, velocity, acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredPoint {
    pub x: Vec2,
    pub xdot: Vec2,
    pub xddot: Vec2,
}

impl DesiredPoint {
    pub fn stationary(x: Vec2) -> Self {
        Self { x, xdot: Vec2::zeros(), xddot: Vec2::zeros() }
    }
}

/// A time-parameterized desired trajectory.
pub trait Trajectory {
    fn sample(&self, t: f64) -> DesiredPoint;
}

impl<F: Fn(f64) -> DesiredPoint> Trajectory for F {
    fn sample(&self, t: f64) -> DesiredPoint {
        self(t)
    }
}

/// Drift `f_i = −(1/k_m)[k_b(x2 − ẋ_d) + k_k(x1 − x_d) − k_m ẍ_d]` per axis.
pub fn drift_term(params: &AdmittanceParams, state: &AdmittanceState, desired: &DesiredPoint) -> Vec2 {
    Vec2::from_fn(|i, _| {
        let g = &params.axes[i];
        -(g.k_b * (state.x2[i] - desired.xdot[i]) + g.k_k * (state.x1[i] - desired.x[i])
            - g.k_m * desired.xddot[i])
            / g.k_m
    })
}

/// Full acceleration `f + g ⊙ force`.
pub fn acceleration(
    params: &AdmittanceParams,
    state: &AdmittanceState,
    desired: &DesiredPoint,
    force: &Vec2,
) -> Vec2 {
    drift_term(params, state, desired) + params.input_gain().component_mul(force)
}

/// Advances the reference one RK4 step from `t` with `force` held constant
/// and the desired trajectory sampled at the substep times.
pub fn admittance_step(
    params: &AdmittanceParams,
    state: &AdmittanceState,
    desired: &impl Trajectory,
    t: f64,
    force: &Vec2,
    dt: f64,
) -> Result<AdmittanceState> {
    ensure(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    let y = rk4_step(t, &state.pack(), dt, |tau, y| {
        let s = AdmittanceState::unpack(y);
        let a = acceleration(params, &s, &desired.sample(tau), force);
        Vector4::new(s.x2[0], s.x2[1], a[0], a[1])
    });
    Ok(AdmittanceState::unpack(&y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(t: f64) -> DesiredPoint {
        let (r, w) = (0.14, 0.5);
        let (s, c) = (w * t).sin_cos();
        DesiredPoint {
            x: Vec2::new(r * c, r * s),
            xdot: Vec2::new(-r * w * s, r * w * c),
            xddot: Vec2::new(-r * w * w * c, -r * w * w * s),
        }
    }

    fn run(
        params: &AdmittanceParams,
        traj: &impl Trajectory,
        mut state: AdmittanceState,
        force: impl Fn(f64) -> Vec2,
        dt: f64,
        steps: usize,
    ) -> AdmittanceState {
        for k in 0..steps {
            let t = k as f64 * dt;
            state = admittance_step(params, &state, traj, t, &force(t), dt).unwrap();
        }
        state
    }

    #[test]
    fn drift_on_desired_is_feedforward() {
        let p = AdmittanceParams::default();
        let d = circle(1.3);
        let f = drift_term(&p, &AdmittanceState::on(&d), &d);
        assert!((f - d.xddot).amax() < 1e-15);
    }

    #[test]
    fn drift_hand_value() {
        let p = AdmittanceParams::default();
        let d = DesiredPoint::stationary(Vec2::zeros());
        let s = AdmittanceState::new(Vec2::new(0.1, 0.1), Vec2::zeros());
        let f = drift_term(&p, &s, &d);
        assert!((f[0] + 0.5).abs() < 1e-15 && (f[1] + 0.5).abs() < 1e-15);
        assert_eq!(p.input_gain(), Vec2::new(0.05, 0.05));
    }

    #[test]
    fn zero_force_stays_on_circle_for_a_period() {
        let p = AdmittanceParams::default();
        let dt = 1e-3;
        let steps = 12_560;
        let end = run(&p, &circle, AdmittanceState::on(&circle(0.0)), |_| Vec2::zeros(), dt, steps);
        let target = circle(steps as f64 * dt);
        assert!((end.x1 - target.x).amax() < 1e-6);
        assert!((end.x2 - target.xdot).amax() < 1e-6);
    }

    #[test]
    fn constant_force_settles_at_stiffness_offset() {
        let p = AdmittanceParams::default();
        let traj = |_t: f64| DesiredPoint::stationary(Vec2::new(0.02, -0.01));
        let s0 = AdmittanceState::on(&traj(0.0));
        let end = run(&p, &traj, s0, |_| Vec2::new(3.0, 0.0), 1e-3, 45_000);
        assert!((end.x1[0] - (0.02 + 3.0 / 100.0)).abs() < 1e-9);
        assert_eq!(end.x1[1], -0.01);
    }

    #[test]
    fn step_response_is_underdamped() {
        // k_b² − 4 k_m k_k < 0, so the step response overshoots.
        let p = AdmittanceParams::default();
        let traj = |_t: f64| DesiredPoint::stationary(Vec2::zeros());
        let mut s = AdmittanceState::on(&traj(0.0));
        let mut peak: f64 = 0.0;
        for k in 0..20_000 {
            s = admittance_step(&p, &s, &traj, k as f64 * 1e-3, &Vec2::new(1.0, 0.0), 1e-3).unwrap();
            peak = peak.max(s.x1[0]);
        }
        assert!(peak > 0.01 * 1.2, "peak {peak}");
        assert!((s.x1[0] - 0.01).abs() < 1e-4);
    }

    #[test]
    fn response_is_linear_in_the_force() {
        let p = AdmittanceParams::default();
        let f1 = |t: f64| Vec2::new(t.sin(), 0.5);
        let f2 = |t: f64| Vec2::new(-0.3, (2.0 * t).cos());
        let (a, b) = (1.7, -0.6);
        let s0 = AdmittanceState::on(&circle(0.0));
        let base = run(&p, &circle, s0, |_| Vec2::zeros(), 1e-3, 2000);
        let r1 = run(&p, &circle, s0, f1, 1e-3, 2000);
        let r2 = run(&p, &circle, s0, f2, 1e-3, 2000);
        let mix = run(&p, &circle, s0, |t| f1(t) * a + f2(t) * b, 1e-3, 2000);
        let predicted = (r1.x1 - base.x1) * a + (r2.x1 - base.x1) * b;
        assert!(((mix.x1 - base.x1) - predicted).amax() < 1e-9);
    }

    #[test]
    fn axes_are_decoupled() {
        let p = AdmittanceParams::default();
        let s0 = AdmittanceState::on(&circle(0.0));
        let free = run(&p, &circle, s0, |_| Vec2::zeros(), 1e-3, 1500);
        let pushed = run(&p, &circle, s0, |_| Vec2::new(5.0, 0.0), 1e-3, 1500);
        assert_eq!(free.x1[1], pushed.x1[1]);
        assert_eq!(free.x2[1], pushed.x2[1]);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = AdmittanceParams::default();
        let s0 = AdmittanceState::new(Vec2::new(0.05, -0.02), Vec2::new(0.0, 0.1));
        let force = |_t: f64| Vec2::zeros();
        let reference = run(&p, &circle, s0, force, 1e-6, 1_000_000).x1;
        let e1 = (run(&p, &circle, s0, force, 0.02, 50).x1 - reference).amax();
        let e2 = (run(&p, &circle, s0, force, 0.01, 100).x1 - reference).amax();
        let ratio = e1 / e2;
        assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio}");
    }
}
