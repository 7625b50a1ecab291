//! Classic fourth-order Runge-Kutta with a fixed step.

use nalgebra::SVector;

/// Advances `y` from `t` to `t + dt` with one RK4 step of `f(t, y)`.
pub fn rk4_step<const N: usize, F>(t: f64, y: &SVector<f64, N>, dt: f64, mut f: F) -> SVector<f64, N>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, &(y + k1 * half));
    let k3 = f(t + half, &(y + k2 * half));
    let k4 = f(t + dt, &(y + k3 * dt));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}
