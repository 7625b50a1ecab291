//! Exponential control barrier function rows for the admittance reference and
//! the minimal-deviation force filter built on them.
//!
//! Every constraint here is a position constraint on `x1`, so it has relative
//! degree two in the interaction force. With `ẋ1 = x2`, `ẋ2 = f + g u` the
//! second Lie derivative is affine in `u`:
//!
//! ```text
//!     L_f² h(x, u) = p(x) + q(x) · u
//! ```
//!
//! and the ECBF condition `L_f² h + k1 h + k2 L_f h ≥ 0` becomes the QP row
//! `−q · u ≤ p + k1 h + k2 L_f h`.
//!
//! The velocity term of `p` is `2 x2²`, which is what the chain rule gives for
//! `d/dt [2 (x1 − c) x2]`.

use crate::admittance::AdmittanceState;
use crate::error::{ensure, Error, Result};
use crate::qp::{self, QpProblem, SizeLimits};
use crate::Vec2;
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// Tolerance on `h` when checking that the start lies inside the safe set.
pub const START_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceConstraint {
    pub x_min: Vec2,
    pub x_max: Vec2,
    /// Safe distance kept from each boundary (m).
    pub r: f64,
}

impl WorkspaceConstraint {
    pub fn symmetric(bound: f64, r: f64) -> Self {
        Self { x_min: Vec2::repeat(-bound), x_max: Vec2::repeat(bound), r }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.r.is_finite() && self.r > 0.0, || "workspace safe distance r must be positive".into())?;
        for i in 0..2 {
            ensure(self.x_min[i] + self.r < self.x_max[i] - self.r, || {
                format!("workspace interior is empty on axis {i}: need x_min + r < x_max - r")
            })?;
        }
        Ok(())
    }

    /// Clamps a point into the shrunk box `[x_min + r, x_max − r]`.
    pub fn clamp_interior(&self, x: &Vec2) -> Vec2 {
        Vec2::from_fn(|i, _| x[i].clamp(self.x_min[i] + self.r, self.x_max[i] - self.r))
    }
}

impl Default for WorkspaceConstraint {
    fn default() -> Self {
        Self::symmetric(0.13, 0.04)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleConstraint {
    pub center: Vec2,
    pub r: f64,
}

impl ObstacleConstraint {
    pub fn validate(&self) -> Result<()> {
        ensure(self.r.is_finite() && self.r > 0.0, || "obstacle safe distance r must be positive".into())?;
        ensure(self.center.iter().all(|v| v.is_finite()), || "obstacle position must be finite".into())
    }
}

impl Default for ObstacleConstraint {
    fn default() -> Self {
        Self { center: Vec2::new(-0.07, 0.07), r: 0.04 }
    }
}

/// `(k1, k2)` gain pairs weighting `h` and `L_f h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcbfGains {
    pub k_max: [Vec2; 2],
    pub k_min: [Vec2; 2],
    pub k_obs: Vec2,
}

impl Default for EcbfGains {
    fn default() -> Self {
        let ws = Vec2::new(500.0, 50.0);
        Self { k_max: [ws; 2], k_min: [ws; 2], k_obs: Vec2::new(700.0, 70.0) }
    }
}

impl EcbfGains {
    /// Both entries positive, so `s² + k2 s + k1` is Hurwitz.
    pub fn validate(&self) -> Result<()> {
        let all = self.k_max.iter().chain(self.k_min.iter()).chain(std::iter::once(&self.k_obs));
        for k in all {
            ensure(k.iter().all(|v| v.is_finite() && *v > 0.0), || "ECBF gains must be positive".into())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintEvaluation {
    pub h: f64,
    pub lf_h: f64,
    /// Force-independent part of `L_f² h`.
    pub p: f64,
    /// Coefficient of the force in `L_f² h`.
    pub q_row: Vec2,
}

impl ConstraintEvaluation {
    pub fn second_derivative(&self, u: &Vec2) -> f64 {
        self.p + self.q_row.dot(u)
    }

    /// `L_f² h(x, u) + k1 h + k2 L_f h`; non-negative when the ECBF condition holds.
    pub fn ecbf_residual(&self, gains: &Vec2, u: &Vec2) -> f64 {
        self.second_derivative(u) + gains[0] * self.h + gains[1] * self.lf_h
    }
}

fn eval_axis_distance(offset: f64, x2: f64, drift: f64, gain_g: f64, r: f64, axis: usize, sign: f64) -> ConstraintEvaluation {
    // offset = x1 − c along the axis; sign flips the d/dx1 direction for the
    // lower boundary, where h = (c − x1)² − r² has gradient −2(c − x1).
    let grad = 2.0 * offset * sign;
    let mut q_row = Vec2::zeros();
    q_row[axis] = grad * gain_g;
    ConstraintEvaluation {
        h: offset * offset - r * r,
        lf_h: grad * x2,
        p: grad * drift + 2.0 * x2 * x2,
        q_row,
    }
}

/// Upper boundary `h = (x1_i − x_max_i)² − r²`.
pub fn eval_workspace_max(
    ws: &WorkspaceConstraint,
    adm: &AdmittanceState,
    drift: &Vec2,
    gain_g: &Vec2,
    axis: usize,
) -> ConstraintEvaluation {
    let offset = adm.x1[axis] - ws.x_max[axis];
    eval_axis_distance(offset, adm.x2[axis], drift[axis], gain_g[axis], ws.r, axis, 1.0)
}

/// Lower boundary `h = (x_min_i − x1_i)² − r²`.
pub fn eval_workspace_min(
    ws: &WorkspaceConstraint,
    adm: &AdmittanceState,
    drift: &Vec2,
    gain_g: &Vec2,
    axis: usize,
) -> ConstraintEvaluation {
    let offset = ws.x_min[axis] - adm.x1[axis];
    eval_axis_distance(offset, adm.x2[axis], drift[axis], gain_g[axis], ws.r, axis, -1.0)
}

/// Obstacle clearance `h = ‖x1 − x_obs‖² − r²`.
pub fn eval_obstacle(obs: &ObstacleConstraint, adm: &AdmittanceState, drift: &Vec2, gain_g: &Vec2) -> ConstraintEvaluation {
    let d = adm.x1 - obs.center;
    ConstraintEvaluation {
        h: d.norm_squared() - obs.r * obs.r,
        lf_h: 2.0 * d.dot(&adm.x2),
        p: 2.0 * d.dot(drift) + 2.0 * adm.x2.norm_squared(),
        q_row: (d * 2.0).component_mul(gain_g),
    }
}

/// Builds `min ‖u − u_nom‖² s.t. −q_row · u ≤ p + K·[h, L_f h]` over the rows.
pub fn assemble_qp(evals: &[ConstraintEvaluation], gains: &[Vec2], u_nom: &Vec2) -> QpProblem {
    assert_eq!(evals.len(), gains.len(), "one gain pair per constraint row");
    let m = evals.len();
    let a = DMatrix::from_fn(m, 2, |r, c| -evals[r].q_row[c]);
    let b = DVector::from_fn(m, |r, _| evals[r].p + gains[r][0] * evals[r].h + gains[r][1] * evals[r].lf_h);
    QpProblem::new(DVector::from_column_slice(u_nom.as_slice()), a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    Obstacle,
    WorkspaceMax(usize),
    WorkspaceMin(usize),
}

impl ConstraintId {
    pub fn name(&self) -> String {
        let axis = |i: &usize| if *i == 0 { "x" } else { "y" };
        match self {
            ConstraintId::Obstacle => "obs".into(),
            ConstraintId::WorkspaceMax(i) => format!("ws_max_{}", axis(i)),
            ConstraintId::WorkspaceMin(i) => format!("ws_min_{}", axis(i)),
        }
    }

    pub fn is_workspace(&self) -> bool {
        !matches!(self, ConstraintId::Obstacle)
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// What to do when the ECBF rows admit no common force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfeasibilityPolicy {
    /// Abort with [`Error::InfeasibleQp`].
    Error,
    /// Relax every row by a non-negative slack penalized with `weight · s²`.
    Slack { weight: f64 },
}

impl InfeasibilityPolicy {
    pub const DEFAULT_SLACK_WEIGHT: f64 = 1e6;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub workspace: Option<WorkspaceConstraint>,
    pub obstacle: Option<ObstacleConstraint>,
    pub gains: EcbfGains,
    pub infeasibility: InfeasibilityPolicy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            workspace: Some(WorkspaceConstraint::default()),
            obstacle: Some(ObstacleConstraint::default()),
            gains: EcbfGains::default(),
            infeasibility: InfeasibilityPolicy::Error,
        }
    }
}

impl FilterConfig {
    pub fn unconstrained() -> Self {
        Self { workspace: None, obstacle: None, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(ws) = &self.workspace {
            ws.validate()?;
        }
        if let Some(obs) = &self.obstacle {
            obs.validate()?;
        }
        if let InfeasibilityPolicy::Slack { weight } = self.infeasibility {
            ensure(weight.is_finite() && weight > 0.0, || "slack weight must be positive".into())?;
        }
        self.gains.validate()
    }

    /// Enabled constraints in row order: obstacle, then max/min per axis.
    pub fn constraint_ids(&self) -> Vec<ConstraintId> {
        let mut ids = Vec::with_capacity(5);
        if self.obstacle.is_some() {
            ids.push(ConstraintId::Obstacle);
        }
        if self.workspace.is_some() {
            for i in 0..2 {
                ids.push(ConstraintId::WorkspaceMax(i));
                ids.push(ConstraintId::WorkspaceMin(i));
            }
        }
        ids
    }

    pub fn gain_for(&self, id: ConstraintId) -> Vec2 {
        match id {
            ConstraintId::Obstacle => self.gains.k_obs,
            ConstraintId::WorkspaceMax(i) => self.gains.k_max[i],
            ConstraintId::WorkspaceMin(i) => self.gains.k_min[i],
        }
    }

    pub fn evaluate(&self, id: ConstraintId, adm: &AdmittanceState, drift: &Vec2, gain_g: &Vec2) -> ConstraintEvaluation {
        match id {
            ConstraintId::Obstacle => eval_obstacle(self.obstacle.as_ref().expect("obstacle enabled"), adm, drift, gain_g),
            ConstraintId::WorkspaceMax(i) => {
                eval_workspace_max(self.workspace.as_ref().expect("workspace enabled"), adm, drift, gain_g, i)
            }
            ConstraintId::WorkspaceMin(i) => {
                eval_workspace_min(self.workspace.as_ref().expect("workspace enabled"), adm, drift, gain_g, i)
            }
        }
    }

    /// Barrier values only; no drift needed.
    pub fn barrier_values(&self, x1: &Vec2) -> Vec<(ConstraintId, f64)> {
        let adm = AdmittanceState::new(*x1, Vec2::zeros());
        self.constraint_ids()
            .into_iter()
            .map(|id| (id, self.evaluate(id, &adm, &Vec2::zeros(), &Vec2::zeros()).h))
            .collect()
    }

    /// Checks that `x1` lies in the intended component of every safe set:
    /// `h ≥ 0` and, for box faces, on the inner side of the face.
    pub fn check_start(&self, x1: &Vec2) -> Result<()> {
        for (id, h) in self.barrier_values(x1) {
            let inner = match (id, &self.workspace) {
                (ConstraintId::WorkspaceMax(i), Some(ws)) => x1[i] < ws.x_max[i],
                (ConstraintId::WorkspaceMin(i), Some(ws)) => x1[i] > ws.x_min[i],
                _ => true,
            };
            if h < -START_TOLERANCE || !inner {
                return Err(Error::StartOutsideSafeSet { constraint: id.name(), h });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub id: ConstraintId,
    pub h: f64,
    pub lf_h: f64,
    /// ECBF residual at the filtered force.
    pub residual: f64,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterStatus {
    /// Solved with the hard constraints.
    Optimal,
    /// Hard rows were infeasible; the largest slack used is attached.
    Relaxed { max_slack: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// The safe interaction force `f̂_e`.
    pub force: Vec2,
    /// `f̂_e − f_e`.
    pub compensation: Vec2,
    pub constraints: Vec<ConstraintReport>,
    /// Indices into `constraints` of the rows tight at the optimum.
    pub active_set: Vec<usize>,
    pub status: FilterStatus,
}

impl FilterOutput {
    pub fn any_active(&self) -> bool {
        !self.active_set.is_empty()
    }
}

/// Projects the human force `f_e` onto the set of forces satisfying every
/// enabled ECBF row at the current admittance state.
pub fn filter_force(
    config: &FilterConfig,
    adm: &AdmittanceState,
    drift: &Vec2,
    gain_g: &Vec2,
    f_e: &Vec2,
) -> Result<FilterOutput> {
    let ids = config.constraint_ids();
    let evals: Vec<_> = ids.iter().map(|&id| config.evaluate(id, adm, drift, gain_g)).collect();
    let gains: Vec<_> = ids.iter().map(|&id| config.gain_for(id)).collect();
    let problem = assemble_qp(&evals, &gains, f_e);

    let (force, active_set, status) = match qp::solve(&problem) {
        Ok(sol) => (Vec2::new(sol.u[0], sol.u[1]), sol.active_set, FilterStatus::Optimal),
        Err(Error::InfeasibleQp { rows }) => match config.infeasibility {
            InfeasibilityPolicy::Error => return Err(Error::InfeasibleQp { rows }),
            InfeasibilityPolicy::Slack { weight } => solve_relaxed(&problem, weight)?,
        },
        Err(e) => return Err(e),
    };

    let constraints = ids
        .iter()
        .zip(&evals)
        .zip(&gains)
        .enumerate()
        .map(|(row, ((&id, eval), k))| ConstraintReport {
            id,
            h: eval.h,
            lf_h: eval.lf_h,
            residual: eval.ecbf_residual(k, &force),
            active: active_set.contains(&row),
        })
        .collect();
    Ok(FilterOutput { force, compensation: force - f_e, constraints, active_set, status })
}

/// Slack reformulation in scaled variables `z = (u, √w · s)` so the Hessian
/// stays the identity: rows `A u − z_s/√w ≤ b` and `−z_s ≤ 0`.
fn solve_relaxed(problem: &QpProblem, weight: f64) -> Result<(Vec2, Vec<usize>, FilterStatus)> {
    let m = problem.num_rows();
    let scale = weight.sqrt();
    let n = 2 + m;
    let mut a = DMatrix::zeros(2 * m, n);
    let mut b = DVector::zeros(2 * m);
    for r in 0..m {
        a[(r, 0)] = problem.a[(r, 0)];
        a[(r, 1)] = problem.a[(r, 1)];
        a[(r, 2 + r)] = -1.0 / scale;
        b[r] = problem.b[r];
        a[(m + r, 2 + r)] = -1.0;
    }
    let mut u_nom = DVector::zeros(n);
    u_nom[0] = problem.u_nom[0];
    u_nom[1] = problem.u_nom[1];
    let relaxed = QpProblem::new(u_nom, a, b);
    let sol = qp::solve_with_limits(&relaxed, SizeLimits { max_vars: n, max_rows: 2 * m })?;
    let max_slack = (0..m).map(|r| sol.u[2 + r] / scale).fold(0.0, f64::max);
    let active = sol.active_set.iter().copied().filter(|&r| r < m).collect();
    Ok((Vec2::new(sol.u[0], sol.u[1]), active, FilterStatus::Relaxed { max_slack }))
}
