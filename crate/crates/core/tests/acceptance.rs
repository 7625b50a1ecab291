//! Scenario-level acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use common::{brute_force_projection, csv_bytes, random_feasible_qp, rng, run_preset};
use rand::Rng;
use safeguard::admittance::Trajectory;
use safeguard::ecbf::{FilterConfig, WorkspaceConstraint};
use safeguard::fxtismc::ControllerConfig;
use safeguard::io::read_csv_str;
use safeguard::model::{inverse_kinematics, Elbow, JointState, ManipulatorParams};
use safeguard::qp::solve;
use safeguard::sim::{track_reference, CircleTrajectory, Trace, PRESET_NAMES};
use safeguard::Vec2;
use std::collections::HashMap;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workspace_h_min(trace: &Trace) -> f64 {
    let ws = FilterConfig { workspace: Some(WorkspaceConstraint::default()), ..FilterConfig::unconstrained() };
    trace
        .records
        .iter()
        .flat_map(|r| ws.barrier_values(&r.x_f).into_iter().map(|(_, h)| h))
        .fold(f64::INFINITY, f64::min)
}

fn min_obstacle_distance(trace: &Trace) -> f64 {
    trace.records.iter().filter_map(|r| r.obstacle_distance).fold(f64::INFINITY, f64::min)
}

fn unsafe_baseline(traces: &HashMap<&str, Trace>) -> Outcome {
    let peak = traces["baseline-unsafe"].records.iter().map(|r| r.x_r_shadow.amax()).fold(0.0, f64::max);
    outcome(peak > 0.13, format!("max ||x_r_shadow||inf = {peak:.6} m (> 0.13)"))
}

fn workspace_invariance(traces: &HashMap<&str, Trace>) -> Outcome {
    let trace = &traces["workspace"];
    let min_h = trace.min_h().into_iter().map(|(_, h)| h).fold(f64::INFINITY, f64::min);
    let peak = trace.records.iter().map(|r| r.x_f.amax()).fold(0.0, f64::max);
    outcome(
        min_h >= -1e-3 && peak <= 0.09 + 1e-3,
        format!("min h = {min_h:.3e} (>= -1e-3), max |x_f| = {peak:.6} m (<= 0.091)"),
    )
}

fn obstacle_invariance(traces: &HashMap<&str, Trace>) -> Outcome {
    let only = min_obstacle_distance(&traces["obstacle-only"]);
    let both = min_obstacle_distance(&traces["combined"]);
    outcome(
        only >= 0.04 - 1e-3 && both >= 0.04 - 1e-3,
        format!("min distance obstacle-only {only:.6} m, combined {both:.6} m (>= 0.039)"),
    )
}

fn combined_improvement(traces: &HashMap<&str, Trace>) -> Outcome {
    let only = workspace_h_min(&traces["obstacle-only"]);
    let both = workspace_h_min(&traces["combined"]);
    outcome(both > only, format!("min workspace h combined {both:.3e} > obstacle-only {only:.3e}"))
}

fn filter_identity(traces: &HashMap<&str, Trace>) -> Outcome {
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for trace in traces.values() {
        for r in &trace.records {
            if r.qp_active.is_empty() && r.h.iter().all(|&h| h > 0.005) {
                checked += 1;
                worst = worst.max((r.f_e_hat - r.f_e).norm());
            }
        }
    }
    outcome(checked > 0 && worst <= 1e-9, format!("{checked} inactive steps, max ||f_hat - f_e|| = {worst:.3e} N"))
}

fn qp_oracle() -> Outcome {
    let mut rng = rng(0xacce);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(0..=6);
        let problem = random_feasible_qp(&mut rng, n, m);
        let expected = brute_force_projection(&problem).expect("feasible by construction");
        match solve(&problem) {
            Ok(sol) => worst = worst.max((&sol.u - expected).norm()),
            Err(e) => return outcome(false, format!("solver failed on a feasible instance: {e}")),
        }
    }
    outcome(worst <= 1e-8, format!("1000 instances, max ||du|| = {worst:.3e}"))
}

fn tracking(traces: &HashMap<&str, Trace>) -> Outcome {
    let mut worst = 0.0f64;
    for trace in traces.values() {
        for r in trace.records.iter().filter(|r| r.t >= 1.0) {
            worst = worst.max(r.tracking_error());
        }
    }
    let robot = ManipulatorParams::default();
    let circle = CircleTrajectory::default();
    let mut settle = Vec::new();
    for offset in [0.05, 0.5] {
        let x0 = circle.sample(0.0).x + Vec2::new(0.0, offset);
        let start = JointState::at_rest(inverse_kinematics(&robot, &x0, Elbow::Positive).expect("reachable"));
        let samples = track_reference(&robot, &ControllerConfig::default(), &circle, |_| Vec2::zeros(), start, 2.0, 1e-3)
            .expect("tracking run completes");
        let at_two = samples.last().unwrap().error();
        let last_above = samples.iter().rposition(|s| s.error() >= 1e-3);
        let time = last_above.map_or(0.0, |i| samples.get(i + 1).map_or(f64::INFINITY, |s| s.t));
        settle.push((offset, time, at_two));
    }
    let converged = settle.iter().all(|&(_, time, at_two)| time <= 2.0 && at_two < 1e-3);
    let summary: Vec<String> = settle.iter().map(|(o, t, _)| format!("e0={o} m below 1 mm at t={t:.3} s")).collect();
    outcome(
        worst <= 5e-3 && converged,
        format!("max ||x - x_f|| (t >= 1 s) = {worst:.3e} m; {}", summary.join(", ")),
    )
}

fn calculus() -> Outcome {
    let errors = common::lie_derivative_errors(0xca1c, 100);
    let pass = errors.iter().all(|&(_, first, second)| first <= 1e-4 && second <= 1e-3);
    let worst_first = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let worst_second = errors.iter().map(|e| e.2).fold(0.0, f64::max);
    outcome(
        pass,
        format!("{} constraints x 100 states, max rel err L_f h {worst_first:.2e}, L_f^2 h {worst_second:.2e}", errors.len()),
    )
}

fn dynamics() -> Outcome {
    let gaps: Vec<f64> =
        common::dynamics_cases().into_iter().map(|(p, start)| common::max_gap_over_one_second(&p, start)).collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("{} cases over 1 s, max gap {worst:.3e} m", gaps.len()))
}

fn determinism(traces: &HashMap<&str, Trace>) -> Outcome {
    for name in PRESET_NAMES {
        let first = csv_bytes(&traces[name]);
        if csv_bytes(&run_preset(name)) != first {
            return outcome(false, format!("{name}: repeated run differs"));
        }
        match read_csv_str(std::str::from_utf8(&first).expect("ascii")) {
            Ok(back) if back == traces[name] => {}
            Ok(_) => return outcome(false, format!("{name}: reread differs from the in-memory trace")),
            Err(e) => return outcome(false, format!("{name}: reread failed: {e}")),
        }
    }
    outcome(true, "all presets bit-identical across runs and CSV reread".into())
}

fn main() {
    let traces: HashMap<&str, Trace> = PRESET_NAMES.iter().map(|&n| (n, run_preset(n))).collect();
    let results = [
        ("unsafe baseline leaves the workspace", unsafe_baseline(&traces)),
        ("workspace forward invariance", workspace_invariance(&traces)),
        ("obstacle forward invariance", obstacle_invariance(&traces)),
        ("combined constraints improve workspace margin", combined_improvement(&traces)),
        ("filter is the identity away from constraints", filter_identity(&traces)),
        ("QP solver matches exhaustive oracle", qp_oracle()),
        ("tracking contract and fixed-time convergence", tracking(&traces)),
        ("Lie derivatives match finite differences", calculus()),
        ("joint and Cartesian dynamics agree", dynamics()),
        ("determinism and CSV round trip", determinism(&traces)),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("{} criterion {:>2}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
