//! Closed-loop simulation: desired circle, scripted human force, safety
//! filter, admittance reference, sliding-mode tracker and plant, all advanced
//! on one fixed-step clock.

use crate::admittance::{self, AdmittanceParams, AdmittanceState, DesiredPoint, Trajectory};
use crate::ecbf::{self, ConstraintId, FilterConfig, FilterStatus, InfeasibilityPolicy, ObstacleConstraint, WorkspaceConstraint};
use crate::error::{ensure, Error, Result};
use crate::fxtismc::{self, ControllerConfig, ControllerState};
use crate::model::{self, JointState, ManipulatorParams};
use crate::Vec2;
use std::f64::consts::PI;
use std::fmt;

/// Circle about the origin, `x_d = r (cos ωt, sin ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleTrajectory {
    pub radius: f64,
    pub rate: f64,
}

impl Default for CircleTrajectory {
    fn default() -> Self {
        Self { radius: 0.14, rate: 0.5 }
    }
}

impl Trajectory for CircleTrajectory {
    fn sample(&self, t: f64) -> DesiredPoint {
        desired_trajectory(t, self.radius, self.rate)
    }
}

pub fn desired_trajectory(t: f64, radius: f64, rate: f64) -> DesiredPoint {
    let (s, c) = (rate * t).sin_cos();
    DesiredPoint {
        x: Vec2::new(radius * c, radius * s),
        xdot: Vec2::new(-radius * rate * s, radius * rate * c),
        xddot: Vec2::new(-radius * rate * rate * c, -radius * rate * rate * s),
    }
}

/// Scripted push: a one-second cosine ramp up from `onset`, a plateau of
/// `2a`, and a one-second ramp down from `release`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceProfile {
    pub amplitude: Vec2,
    pub onset: f64,
    pub release: f64,
}

impl Default for ForceProfile {
    fn default() -> Self {
        Self { amplitude: Vec2::new(1.0, 2.0), onset: 4.0, release: 10.0 }
    }
}

impl ForceProfile {
    pub fn sample(&self, t: f64) -> Vec2 {
        let shape = if t < self.onset || t >= self.release + 1.0 {
            0.0
        } else if t < self.onset + 1.0 {
            1.0 - (PI * (t - self.onset)).cos()
        } else if t < self.release {
            2.0
        } else {
            1.0 + (PI * (t - self.release)).cos()
        };
        self.amplitude * shape
    }
}

/// Human force with the default timing: ramps on over `[4, 5)`, holds `2a`
/// on `[5, 10)`, ramps off over `[10, 11)`.
pub fn human_force(t: f64, amplitude: &Vec2) -> Vec2 {
    ForceProfile { amplitude: *amplitude, ..ForceProfile::default() }.sample(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub trajectory: CircleTrajectory,
    pub force: ForceProfile,
    pub robot: ManipulatorParams,
    pub admittance: AdmittanceParams,
    pub controller: ControllerConfig,
    pub workspace: WorkspaceConstraint,
    pub obstacle: ObstacleConstraint,
    pub ecbf_gains: ecbf::EcbfGains,
    pub workspace_enabled: bool,
    pub obstacle_enabled: bool,
    /// When false the human force reaches the admittance model unfiltered.
    pub filter_enabled: bool,
    pub infeasibility: InfeasibilityPolicy,
    pub initial_q: Vec2,
    /// Explicit admittance start; `None` starts on the desired trajectory,
    /// clamped into the shrunk workspace box when the filter enforces it.
    pub admittance_start: Option<AdmittanceState>,
}

impl Default for ScenarioConfig {
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            name: "combined".into(),
            duration: 16.0,
            dt: 1e-3,
            trajectory: CircleTrajectory::default(),
            force: ForceProfile::default(),
            robot: ManipulatorParams::default(),
            admittance: AdmittanceParams::default(),
            controller: ControllerConfig::default(),
            workspace: WorkspaceConstraint::default(),
            obstacle: ObstacleConstraint::default(),
            ecbf_gains: ecbf::EcbfGains::default(),
            workspace_enabled: true,
            obstacle_enabled: true,
            filter_enabled: true,
            infeasibility: InfeasibilityPolicy::Error,
            initial_q: Vec2::new(0.5236, 2.0944),
            admittance_start: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.dt.is_finite() && self.dt > 0.0, || format!("dt must be positive, got {}", self.dt))?;
        ensure(self.duration.is_finite() && self.duration >= self.dt, || {
            format!("duration must be at least dt, got {}", self.duration)
        })?;
        ensure(self.force.amplitude.iter().all(|a| a.is_finite()), || "force amplitudes must be finite".into())?;
        ensure(self.force.onset.is_finite() && self.force.release >= self.force.onset + 1.0, || {
            "force release must come at least 1 s after onset".into()
        })?;
        ensure(self.trajectory.radius.is_finite() && self.trajectory.rate.is_finite(), || {
            "trajectory parameters must be finite".into()
        })?;
        ensure(self.initial_q.iter().all(|v| v.is_finite()), || "initial joint angles must be finite".into())?;
        self.robot.validate()?;
        self.admittance.validate()?;
        self.controller.validate()?;
        self.filter_config().validate()
    }

    /// The constraint set the filter enforces, independent of the bypass flag.
    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            workspace: self.workspace_enabled.then_some(self.workspace),
            obstacle: self.obstacle_enabled.then_some(self.obstacle),
            gains: self.ecbf_gains,
            infeasibility: self.infeasibility,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn initial_admittance(&self) -> AdmittanceState {
        if let Some(start) = self.admittance_start {
            return start;
        }
        let mut start = AdmittanceState::on(&self.trajectory.sample(0.0));
        if self.filter_enabled && self.workspace_enabled {
            start.x1 = self.workspace.clamp_interior(&start.x1);
        }
        start
    }
}

/// Preset names in library order.
pub const PRESET_NAMES: [&str; 4] = ["baseline-unsafe", "workspace", "obstacle-only", "combined"];

pub fn scenario_library() -> Vec<ScenarioConfig> {
    PRESET_NAMES.iter().map(|n| preset(n).expect("known preset")).collect()
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let base = ScenarioConfig { name: name.to_string(), ..ScenarioConfig::default() };
    let cfg = match name {
        "baseline-unsafe" => ScenarioConfig { obstacle_enabled: false, filter_enabled: false, ..base },
        "workspace" => ScenarioConfig { obstacle_enabled: false, ..base },
        "obstacle-only" => ScenarioConfig { workspace_enabled: false, ..base },
        "combined" => base,
        _ => return None,
    };
    Some(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Relaxed,
    Bypass,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "ok",
            QpStatus::Relaxed => "relaxed",
            QpStatus::Bypass => "bypass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(QpStatus::Optimal),
            "relaxed" => Some(QpStatus::Relaxed),
            "bypass" => Some(QpStatus::Bypass),
            _ => None,
        }
    }
}

impl fmt::Display for QpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sample of every loop signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x_d: Vec2,
    /// Filtered admittance reference tracked by the controller.
    pub x_f: Vec2,
    /// Admittance reference driven by the raw human force.
    pub x_r_shadow: Vec2,
    /// End-effector position of the plant.
    pub x: Vec2,
    pub f_e: Vec2,
    pub f_e_hat: Vec2,
    pub f_e_comp: Vec2,
    pub f_c: Vec2,
    pub f_c_clamped: bool,
    /// Barrier values of `x_f`, one per enabled constraint in [`Trace::constraints`] order.
    pub h: Vec<f64>,
    /// Distance from `x_f` to the obstacle center, when the obstacle is enabled.
    pub obstacle_distance: Option<f64>,
    /// Positions in [`Trace::constraints`] of rows tight at the QP optimum.
    pub qp_active: Vec<usize>,
    pub qp_status: QpStatus,
    /// Largest slack used when the hard rows were infeasible.
    pub qp_slack: f64,
}

impl TraceRecord {
    pub fn tracking_error(&self) -> f64 {
        (self.x - self.x_f).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub constraints: Vec<ConstraintId>,
    pub has_obstacle_distance: bool,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Minimum over time of each barrier column.
    pub fn min_h(&self) -> Vec<(ConstraintId, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, self.records.iter().map(|r| r.h[i]).fold(f64::INFINITY, f64::min)))
            .collect()
    }
}

/// A run that stopped early, with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub trace: Trace,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} recorded steps)", self.error, self.trace.len())
    }
}

impl std::error::Error for RunFailure {}

pub fn run(config: &ScenarioConfig) -> std::result::Result<Trace, RunFailure> {
    let fail = |error: Error, trace: Trace| RunFailure { error, trace };
    if let Err(e) = config.validate() {
        return Err(fail(e, Trace::default()));
    }

    let filter = config.filter_config();
    let ids = filter.constraint_ids();
    let mut trace = Trace { constraints: ids.clone(), has_obstacle_distance: config.obstacle_enabled, records: Vec::new() };

    let mut adm = config.initial_admittance();
    if config.filter_enabled {
        if let Err(e) = filter.check_start(&adm.x1) {
            return Err(fail(e, trace));
        }
    }
    let mut shadow = adm;
    let mut joints = JointState::at_rest(config.initial_q);
    let mut ctrl_state = ControllerState::reset();
    let controller_model = config.robot.without_friction();
    let gain_g = config.admittance.input_gain();
    let steps = config.steps();
    trace.records.reserve(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * config.dt;
        match loop_step(config, &filter, &ids, &controller_model, &gain_g, t, &adm, &shadow, &joints, &ctrl_state) {
            Ok((record, ctrl_next, f_e_hat, f_c)) => {
                let f_e = record.f_e;
                trace.records.push(record);
                if k == steps {
                    break;
                }
                let advanced = advance(config, t, &adm, &shadow, &joints, &f_e_hat, &f_e, &f_c);
                match advanced {
                    Ok((a, s, j)) => {
                        adm = a;
                        shadow = s;
                        joints = j;
                        ctrl_state = ctrl_next;
                    }
                    Err(e) => return Err(fail(e, trace)),
                }
            }
            Err(e) => return Err(fail(e, trace)),
        }
    }
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn loop_step(
    config: &ScenarioConfig,
    filter: &FilterConfig,
    ids: &[ConstraintId],
    controller_model: &ManipulatorParams,
    gain_g: &Vec2,
    t: f64,
    adm: &AdmittanceState,
    shadow: &AdmittanceState,
    joints: &JointState,
    ctrl_state: &ControllerState,
) -> Result<(TraceRecord, ControllerState, Vec2, Vec2)> {
    let desired = config.trajectory.sample(t);
    let f_e = config.force.sample(t);
    let drift = admittance::drift_term(&config.admittance, adm, &desired);

    let (f_e_hat, qp_active, qp_status, qp_slack, h) = if config.filter_enabled {
        let out = ecbf::filter_force(filter, adm, &drift, gain_g, &f_e)?;
        let (status, slack) = match out.status {
            FilterStatus::Optimal => (QpStatus::Optimal, 0.0),
            FilterStatus::Relaxed { max_slack } => (QpStatus::Relaxed, max_slack),
        };
        let h = out.constraints.iter().map(|c| c.h).collect();
        (out.force, out.active_set, status, slack, h)
    } else {
        let h = ids.iter().map(|&id| filter.evaluate(id, adm, &drift, gain_g).h).collect();
        (f_e, Vec::new(), QpStatus::Bypass, 0.0, h)
    };

    // Reference acceleration under the force that will actually drive it.
    let reference = DesiredPoint {
        x: adm.x1,
        xdot: adm.x2,
        xddot: drift + gain_g.component_mul(&f_e_hat),
    };
    let cart = model::cartesian_state(&config.robot, joints);
    let terms = model::cartesian_dynamics_terms(controller_model, joints)?;
    let (control, ctrl_next) = fxtismc::control(&config.controller, ctrl_state, &terms, &cart, &reference, config.dt)?;

    let record = TraceRecord {
        t,
        x_d: desired.x,
        x_f: adm.x1,
        x_r_shadow: shadow.x1,
        x: cart.x,
        f_e,
        f_e_hat,
        f_e_comp: f_e_hat - f_e,
        f_c: control.force,
        f_c_clamped: control.clamped,
        h,
        obstacle_distance: config.obstacle_enabled.then(|| (adm.x1 - config.obstacle.center).norm()),
        qp_active,
        qp_status,
        qp_slack,
    };
    Ok((record, ctrl_next, f_e_hat, control.force))
}

#[allow(clippy::too_many_arguments)]
fn advance(
    config: &ScenarioConfig,
    t: f64,
    adm: &AdmittanceState,
    shadow: &AdmittanceState,
    joints: &JointState,
    f_e_hat: &Vec2,
    f_e: &Vec2,
    f_c: &Vec2,
) -> Result<(AdmittanceState, AdmittanceState, JointState)> {
    let dt = config.dt;
    let next_adm = admittance::admittance_step(&config.admittance, adm, &config.trajectory, t, f_e_hat, dt)?;
    let next_shadow = admittance::admittance_step(&config.admittance, shadow, &config.trajectory, t, f_e, dt)?;
    let tau = model::jacobian(&config.robot, &joints.q).transpose() * f_c;
    let next_joints = model::plant_step(&config.robot, joints, &tau, f_e, dt)?;
    Ok((next_adm, next_shadow, next_joints))
}

/// One sample of a controller-only tracking run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingSample {
    pub t: f64,
    pub x: Vec2,
    pub reference: Vec2,
    pub force: Vec2,
}

impl TrackingSample {
    pub fn error(&self) -> f64 {
        (self.x - self.reference).norm()
    }
}

/// Closes the loop between the tracker and the plant alone, following
/// `reference` from `initial`, with an optional external force on the plant.
pub fn track_reference(
    robot: &ManipulatorParams,
    controller: &ControllerConfig,
    reference: &impl Trajectory,
    external: impl Fn(f64) -> Vec2,
    initial: JointState,
    duration: f64,
    dt: f64,
) -> Result<Vec<TrackingSample>> {
    ensure(dt > 0.0 && duration >= dt, || "tracking run needs dt > 0 and duration ≥ dt".into())?;
    let model_params = robot.without_friction();
    let steps = (duration / dt).round() as usize;
    let mut joints = initial;
    let mut state = ControllerState::reset();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let r = reference.sample(t);
        let cart = model::cartesian_state(robot, &joints);
        let terms = model::cartesian_dynamics_terms(&model_params, &joints)?;
        let (control, next) = fxtismc::control(controller, &state, &terms, &cart, &r, dt)?;
        out.push(TrackingSample { t, x: cart.x, reference: r.x, force: control.force });
        if k == steps {
            break;
        }
        let tau = model::jacobian(robot, &joints.q).transpose() * control.force;
        joints = model::plant_step(robot, &joints, &tau, &external(t), dt)?;
        state = next;
    }
    Ok(out)
}
