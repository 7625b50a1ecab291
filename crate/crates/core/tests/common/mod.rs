#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safeguard::admittance::{self, AdmittanceParams, AdmittanceState, DesiredPoint, Trajectory};
use safeguard::ecbf::{
    eval_obstacle, eval_workspace_max, eval_workspace_min, ConstraintEvaluation, ObstacleConstraint, WorkspaceConstraint,
};
use safeguard::integrate::rk4_step;
use safeguard::model::{
    self, cartesian_dynamics_terms, forward_kinematics, jacobian, joint_dynamics_terms, joint_state_from_cartesian,
    CartesianState, Elbow, JointState, ManipulatorParams,
};
use safeguard::qp::QpProblem;
use safeguard::sim::{run, CircleTrajectory, ScenarioConfig, Trace};
use safeguard::{io, Vec2};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exhaustive reference solution: the projection onto the affine hull of
/// every row subset, keeping the feasible candidate closest to `u_nom`.
/// Returns `None` when no candidate is feasible.
pub fn brute_force_projection(problem: &QpProblem) -> Option<DVector<f64>> {
    let m = problem.num_rows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|r| mask & (1 << r) != 0).collect();
        let u = if rows.is_empty() {
            problem.u_nom.clone()
        } else {
            let a_s = DMatrix::from_fn(rows.len(), problem.num_vars(), |i, j| problem.a[(rows[i], j)]);
            let b_s = DVector::from_fn(rows.len(), |i, _| problem.b[rows[i]]);
            let pinv = a_s.clone().pseudo_inverse(1e-12).expect("svd converges");
            &problem.u_nom - pinv * (&a_s * &problem.u_nom - b_s)
        };
        let feasible = (0..m).all(|r| (problem.a.row(r) * &u)[0] <= problem.b[r] + 1e-9 * problem.b[r].abs().max(1.0));
        if feasible {
            let obj = (&u - &problem.u_nom).norm_squared();
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Random QP with `n` variables and `m` rows built around a feasible point.
pub fn random_feasible_qp(rng: &mut impl Rng, n: usize, m: usize) -> QpProblem {
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let inside = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let b = &a * &inside + DVector::from_fn(m, |_, _| rng.gen_range(0.0..1.0));
    let u_nom = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    QpProblem::new(u_nom, a, b)
}

/// Central difference of `f` along the admittance flow under a constant force,
/// integrating forward and backward with small RK4 steps.
pub fn flow_derivative(
    params: &AdmittanceParams,
    desired: &impl Trajectory,
    state: &AdmittanceState,
    t: f64,
    force: &Vec2,
    delta: f64,
    f: impl Fn(&AdmittanceState) -> f64,
) -> f64 {
    let ahead = flow(params, desired, state, t, force, delta);
    let behind = flow(params, desired, state, t, force, -delta);
    (f(&ahead) - f(&behind)) / (2.0 * delta)
}

fn flow(
    params: &AdmittanceParams,
    desired: &impl Trajectory,
    state: &AdmittanceState,
    t: f64,
    force: &Vec2,
    span: f64,
) -> AdmittanceState {
    let deriv = |t: f64, s: &AdmittanceState| {
        let d: DesiredPoint = desired.sample(t);
        (s.x2, admittance::acceleration(params, s, &d, force))
    };
    let steps = 8;
    let h = span / steps as f64;
    let mut s = *state;
    let mut tc = t;
    for _ in 0..steps {
        let (k1x, k1v) = deriv(tc, &s);
        let s2 = AdmittanceState::new(s.x1 + k1x * (h / 2.0), s.x2 + k1v * (h / 2.0));
        let (k2x, k2v) = deriv(tc + h / 2.0, &s2);
        let s3 = AdmittanceState::new(s.x1 + k2x * (h / 2.0), s.x2 + k2v * (h / 2.0));
        let (k3x, k3v) = deriv(tc + h / 2.0, &s3);
        let s4 = AdmittanceState::new(s.x1 + k3x * h, s.x2 + k3v * h);
        let (k4x, k4v) = deriv(tc + h, &s4);
        s = AdmittanceState::new(
            s.x1 + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0),
            s.x2 + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
        );
        tc += h;
    }
    s
}

type Evaluator = fn(&AdmittanceState, &Vec2, &Vec2) -> ConstraintEvaluation;

fn evaluators() -> [(&'static str, Evaluator); 5] {
    [
        ("ws_max_x", |a, d, g| eval_workspace_max(&WorkspaceConstraint::default(), a, d, g, 0)),
        ("ws_max_y", |a, d, g| eval_workspace_max(&WorkspaceConstraint::default(), a, d, g, 1)),
        ("ws_min_x", |a, d, g| eval_workspace_min(&WorkspaceConstraint::default(), a, d, g, 0)),
        ("ws_min_y", |a, d, g| eval_workspace_min(&WorkspaceConstraint::default(), a, d, g, 1)),
        ("obs", |a, d, g| eval_obstacle(&ObstacleConstraint::default(), a, d, g)),
    ]
}

/// Worst relative errors of `L_f h` and `p + q·u` against central differences
/// along the admittance flow, over `samples` random states per constraint.
pub fn lie_derivative_errors(seed: u64, samples: usize) -> Vec<(&'static str, f64, f64)> {
    let params = AdmittanceParams::default();
    let circle = CircleTrajectory::default();
    let gain_g = params.input_gain();
    let mut rng = rng(seed);
    evaluators()
        .into_iter()
        .map(|(name, eval)| {
            let (mut worst_first, mut worst_second): (f64, f64) = (0.0, 0.0);
            for _ in 0..samples {
                let state = AdmittanceState::new(
                    Vec2::new(rng.gen_range(-0.12..0.12), rng.gen_range(-0.12..0.12)),
                    Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                );
                let t = rng.gen_range(0.0..16.0);
                let u = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let drift = admittance::drift_term(&params, &state, &circle.sample(t));
                let e = eval(&state, &drift, &gain_g);
                let h_rate = flow_derivative(&params, &circle, &state, t, &u, 1e-6, |s| eval(s, &drift, &gain_g).h);
                let lf_rate = flow_derivative(&params, &circle, &state, t, &u, 1e-6, |s| eval(s, &drift, &gain_g).lf_h);
                worst_first = worst_first.max(relative_error(h_rate, e.lf_h));
                worst_second = worst_second.max(relative_error(lf_rate, e.second_derivative(&u)));
            }
            (name, worst_first, worst_second)
        })
        .collect()
}

/// Largest end-effector gap between a joint-space and a Cartesian-space
/// integration of the same torque history over one second.
pub fn max_gap_over_one_second(params: &ManipulatorParams, start: JointState) -> f64 {
    let dt = 1e-3;
    let terms = joint_dynamics_terms(params, &start);
    let hold = jacobian(params, &start.q).transpose().try_inverse().unwrap() * (terms.gravity + terms.friction);
    let force = |t: f64| hold + Vec2::new(0.5 * (2.0 * t).sin(), 0.5 * (3.0 * t).cos());
    let external = |t: f64| Vec2::new(0.2 * t, -0.1);
    let elbow = if start.q[1] > 0.0 { Elbow::Positive } else { Elbow::Negative };

    let mut joints = start;
    let c = model::cartesian_state(params, &start);
    let mut cart = SVector::<f64, 4>::new(c.x[0], c.x[1], c.xdot[0], c.xdot[1]);
    let mut worst: f64 = 0.0;
    let mut min_sin = f64::INFINITY;
    for k in 0..1000 {
        let t = k as f64 * dt;
        let fe = external(t);
        let tau = jacobian(params, &joints.q).transpose() * force(t);
        joints = model::plant_step(params, &joints, &tau, &fe, dt).unwrap();
        cart = rk4_step(t, &cart, dt, |_, y| {
            let state = CartesianState { x: Vec2::new(y[0], y[1]), xdot: Vec2::new(y[2], y[3]) };
            let js = joint_state_from_cartesian(params, &state, elbow).unwrap();
            let actuation = jacobian(params, &js.q).transpose().try_inverse().unwrap() * tau;
            let a = cartesian_dynamics_terms(params, &js).unwrap().acceleration(&(actuation + fe));
            SVector::<f64, 4>::new(y[2], y[3], a[0], a[1])
        });
        let x = forward_kinematics(params, &joints.q);
        worst = worst.max((x - Vec2::new(cart[0], cart[1])).norm());
        min_sin = min_sin.min(joints.q[1].sin().abs());
    }
    assert!(min_sin > 0.2, "run approached a singularity: |sin q2| = {min_sin}");
    worst
}

/// Joint and Cartesian cases used for the consistency check: two poses of the
/// full plant and one of a gravity- and friction-free arm.
pub fn dynamics_cases() -> Vec<(ManipulatorParams, JointState)> {
    let full = ManipulatorParams::default();
    let free = ManipulatorParams { gravity: 0.0, ..full.without_friction() };
    vec![
        (full, JointState::new(Vec2::new(-0.4, 1.2), Vec2::new(-0.3, 0.4))),
        (full, JointState::new(Vec2::new(1.1, 1.6), Vec2::zeros())),
        (free, JointState::new(ScenarioConfig::default().initial_q, Vec2::new(1.5, 0.4))),
    ]
}

pub fn relative_error(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1e-9)
}

pub fn run_preset(name: &str) -> Trace {
    run(&safeguard::sim::preset(name).expect("known preset")).expect("preset runs to completion")
}

pub fn csv_bytes(trace: &Trace) -> Vec<u8> {
    let mut buf = Vec::new();
    io::emit_csv(trace, &mut buf).expect("write to memory");
    buf
}

/// Minimal XML well-formedness check: balanced, properly nested tags and
/// quoted attributes. Enough for hand-emitted SVG without entities or CDATA.
pub fn check_well_formed(xml: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = xml;
    let mut roots = 0;
    while let Some(open) = rest.find('<') {
        if stack.is_empty() && !rest[..open].trim().is_empty() {
            return Err(format!("text outside root: {:?}", &rest[..open]));
        }
        let text = &rest[..open];
        if text.contains('<') || text.contains('>') {
            return Err(format!("stray angle bracket in {text:?}"));
        }
        let close = rest[open..].find('>').ok_or("unterminated tag")? + open;
        let tag = &rest[open + 1..close];
        rest = &rest[close + 1..];
        if !tag.matches('"').count().is_multiple_of(2) {
            return Err(format!("unbalanced quotes in <{tag}>"));
        }
        if let Some(name) = tag.strip_prefix('/') {
            let top = stack.pop().ok_or_else(|| format!("unexpected </{name}>"))?;
            if top != name.trim() {
                return Err(format!("</{name}> closes <{top}>"));
            }
            continue;
        }
        let name: String = tag.chars().take_while(|c| !c.is_whitespace() && *c != '/').collect();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == ':') {
            return Err(format!("bad tag name in <{tag}>"));
        }
        if stack.is_empty() {
            roots += 1;
        }
        if !tag.ends_with('/') {
            stack.push(name);
        }
    }
    if !rest.trim().is_empty() {
        return Err("trailing text after root".into());
    }
    match (stack.is_empty(), roots) {
        (true, 1) => Ok(()),
        (false, _) => Err(format!("unclosed elements {stack:?}")),
        (_, n) => Err(format!("expected one root element, found {n}")),
    }
}
