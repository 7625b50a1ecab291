//! INI-style scenario configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! vector_key = 1.0, 2.0
//! ```
//!
//! Sections are `robot`, `admittance`, `ecbf`, `controller`, `scenario` and
//! `constraints`. Missing keys keep their defaults (the `combined` preset);
//! unknown sections or keys, and repeated keys, are errors.

use crate::admittance::{AdmittanceState, AxisGains, Trajectory};
use crate::ecbf::InfeasibilityPolicy;
use crate::error::{Error, Result};
use crate::fxtismc::Switching;
use crate::sim::ScenarioConfig;
use crate::Vec2;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut section: Option<String> = None;
    let mut seen = HashSet::new();
    let mut start_position = None;
    let mut start_velocity = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse { line: line_no, message };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            if !SECTIONS.contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.as_deref().ok_or_else(|| err(format!("key `{key}` outside any section")))?;
        if !seen.insert((sec.to_string(), key.to_string())) {
            return Err(err(format!("duplicate key `{key}` in [{sec}]")));
        }
        let v = Value { text: value, line: line_no };
        apply(&mut cfg, sec, key, &v, &mut start_position, &mut start_velocity)?;
    }

    if let Some(x1) = start_position {
        let x2 = start_velocity.unwrap_or_else(|| cfg.trajectory.sample(0.0).xdot);
        cfg.admittance_start = Some(AdmittanceState::new(x1, x2));
    } else if start_velocity.is_some() {
        return Err(Error::Validation("start_velocity requires start_position".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

const SECTIONS: [&str; 6] = ["robot", "admittance", "ecbf", "controller", "scenario", "constraints"];

struct Value<'a> {
    text: &'a str,
    line: usize,
}

impl Value<'_> {
    fn err(&self, message: String) -> Error {
        Error::Parse { line: self.line, message }
    }

    fn float(&self) -> Result<f64> {
        self.text.parse().map_err(|_| self.err(format!("expected a number, got `{}`", self.text)))
    }

    fn floats(&self) -> Result<Vec<f64>> {
        self.text
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| self.err(format!("expected numbers, got `{}`", self.text))))
            .collect()
    }

    fn vec2(&self) -> Result<Vec2> {
        match self.floats()?.as_slice() {
            [a, b] => Ok(Vec2::new(*a, *b)),
            _ => Err(self.err(format!("expected two comma-separated numbers, got `{}`", self.text))),
        }
    }

    /// One value for both axes, or one per axis.
    fn per_axis(&self) -> Result<Vec2> {
        match self.floats()?.as_slice() {
            [a] => Ok(Vec2::repeat(*a)),
            [a, b] => Ok(Vec2::new(*a, *b)),
            _ => Err(self.err(format!("expected one or two numbers, got `{}`", self.text))),
        }
    }

    fn boolean(&self) -> Result<bool> {
        match self.text {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.err(format!("expected true or false, got `{}`", self.text))),
        }
    }
}

fn apply(
    cfg: &mut ScenarioConfig,
    section: &str,
    key: &str,
    v: &Value,
    start_position: &mut Option<Vec2>,
    start_velocity: &mut Option<Vec2>,
) -> Result<()> {
    let unknown = || v.err(format!("unknown key `{key}` in [{section}]"));
    match section {
        "robot" => {
            let r = &mut cfg.robot;
            match key {
                "m1" => r.m1 = v.float()?,
                "m2" => r.m2 = v.float()?,
                "l1" => r.l1 = v.float()?,
                "l2" => r.l2 = v.float()?,
                "gravity" => r.gravity = v.float()?,
                "singularity_tolerance" => r.singularity_tolerance = v.float()?,
                "friction" => r.friction = v.boolean()?,
                "q0" => cfg.initial_q = v.vec2()?,
                _ => return Err(unknown()),
            }
        }
        "admittance" => {
            let set = |cfg: &mut ScenarioConfig, f: fn(&mut AxisGains) -> &mut f64| -> Result<()> {
                let vals = v.per_axis()?;
                for (i, axis) in cfg.admittance.axes.iter_mut().enumerate() {
                    *f(axis) = vals[i];
                }
                Ok(())
            };
            match key {
                "k_m" => set(cfg, |a| &mut a.k_m)?,
                "k_b" => set(cfg, |a| &mut a.k_b)?,
                "k_k" => set(cfg, |a| &mut a.k_k)?,
                "start_position" => *start_position = Some(v.vec2()?),
                "start_velocity" => *start_velocity = Some(v.vec2()?),
                _ => return Err(unknown()),
            }
        }
        "ecbf" => {
            let g = &mut cfg.ecbf_gains;
            match key {
                "k_max" => g.k_max = [v.vec2()?; 2],
                "k_max_x" => g.k_max[0] = v.vec2()?,
                "k_max_y" => g.k_max[1] = v.vec2()?,
                "k_min" => g.k_min = [v.vec2()?; 2],
                "k_min_x" => g.k_min[0] = v.vec2()?,
                "k_min_y" => g.k_min[1] = v.vec2()?,
                "k_obs" => g.k_obs = v.vec2()?,
                "slack" => {
                    cfg.infeasibility = if v.boolean()? {
                        let weight = match cfg.infeasibility {
                            InfeasibilityPolicy::Slack { weight } => weight,
                            InfeasibilityPolicy::Error => InfeasibilityPolicy::DEFAULT_SLACK_WEIGHT,
                        };
                        InfeasibilityPolicy::Slack { weight }
                    } else {
                        InfeasibilityPolicy::Error
                    }
                }
                "slack_weight" => {
                    let w = v.float()?;
                    if let InfeasibilityPolicy::Slack { weight } = &mut cfg.infeasibility {
                        *weight = w;
                    } else {
                        return Err(v.err("slack_weight requires `slack = true` earlier in [ecbf]".into()));
                    }
                }
                _ => return Err(unknown()),
            }
        }
        "controller" => {
            let c = &mut cfg.controller;
            let g = &mut c.gains;
            match key {
                "lambda1" => g.lambda1 = v.float()?,
                "lambda2" => g.lambda2 = v.float()?,
                "lambda3" => g.lambda3 = v.float()?,
                "alpha" => g.alpha = v.float()?,
                "beta" => g.beta = v.float()?,
                "kappa1" => g.kappa1 = v.float()?,
                "kappa2" => g.kappa2 = v.float()?,
                "kappa3" => g.kappa3 = v.float()?,
                "kappa4" => g.kappa4 = v.float()?,
                "m_exp" => g.m_exp = v.float()?,
                "n_exp" => g.n_exp = v.float()?,
                "p_exp" => g.p_exp = v.float()?,
                "q_exp" => g.q_exp = v.float()?,
                "rho" => g.rho = v.float()?,
                "epsilon" => g.epsilon = v.float()?,
                "force_limit" => c.force_limit = v.float()?,
                "compensator" => c.compensator = v.boolean()?,
                "switching" => {
                    c.switching = match v.text {
                        "sign" => Switching::Sign,
                        "saturation" => match c.switching {
                            s @ Switching::Saturation { .. } => s,
                            Switching::Sign => Switching::Saturation { width: 1e-3 },
                        },
                        other => return Err(v.err(format!("switching must be `sign` or `saturation`, got `{other}`"))),
                    }
                }
                "boundary_layer" => {
                    let w = v.float()?;
                    match &mut c.switching {
                        Switching::Saturation { width } => *width = w,
                        Switching::Sign => return Err(v.err("boundary_layer is meaningless with `switching = sign`".into())),
                    }
                }
                _ => return Err(unknown()),
            }
        }
        "scenario" => match key {
            "name" => {
                if v.text.is_empty() || v.text.contains(|c: char| c.is_whitespace() || c == ',') {
                    return Err(v.err("scenario name must be a non-empty bare identifier".into()));
                }
                cfg.name = v.text.to_string()
            }
            "duration" => cfg.duration = v.float()?,
            "dt" => cfg.dt = v.float()?,
            "radius" => cfg.trajectory.radius = v.float()?,
            "rate" => cfg.trajectory.rate = v.float()?,
            "force_amplitude" => cfg.force.amplitude = v.vec2()?,
            "force_onset" => cfg.force.onset = v.float()?,
            "force_release" => cfg.force.release = v.float()?,
            "filter" => cfg.filter_enabled = v.boolean()?,
            _ => return Err(unknown()),
        },
        "constraints" => match key {
            "workspace" => cfg.workspace_enabled = v.boolean()?,
            "obstacle" => cfg.obstacle_enabled = v.boolean()?,
            "workspace_min" => cfg.workspace.x_min = v.per_axis()?,
            "workspace_max" => cfg.workspace.x_max = v.per_axis()?,
            "workspace_r" => cfg.workspace.r = v.float()?,
            "obstacle_position" => cfg.obstacle.center = v.vec2()?,
            "obstacle_r" => cfg.obstacle.r = v.float()?,
            _ => return Err(unknown()),
        },
        _ => unreachable!("section names are checked on entry"),
    }
    Ok(())
}

fn pair(v: &Vec2) -> String {
    format!("{}, {}", v[0], v[1])
}

fn axis_pair(v: &Vec2) -> String {
    if v[0] == v[1] {
        format!("{}", v[0])
    } else {
        pair(v)
    }
}

/// Canonical text form: every key, fixed order, shortest round-trip floats.
pub fn serialize_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let r = &cfg.robot;
    let _ = writeln!(s, "[robot]");
    let _ = writeln!(s, "m1 = {}\nm2 = {}\nl1 = {}\nl2 = {}", r.m1, r.m2, r.l1, r.l2);
    let _ = writeln!(s, "gravity = {}\nsingularity_tolerance = {}\nfriction = {}", r.gravity, r.singularity_tolerance, r.friction);
    let _ = writeln!(s, "q0 = {}", pair(&cfg.initial_q));

    let a = &cfg.admittance.axes;
    let _ = writeln!(s, "\n[admittance]");
    let _ = writeln!(s, "k_m = {}", axis_pair(&Vec2::new(a[0].k_m, a[1].k_m)));
    let _ = writeln!(s, "k_b = {}", axis_pair(&Vec2::new(a[0].k_b, a[1].k_b)));
    let _ = writeln!(s, "k_k = {}", axis_pair(&Vec2::new(a[0].k_k, a[1].k_k)));
    if let Some(start) = &cfg.admittance_start {
        let _ = writeln!(s, "start_position = {}\nstart_velocity = {}", pair(&start.x1), pair(&start.x2));
    }

    let g = &cfg.ecbf_gains;
    let _ = writeln!(s, "\n[ecbf]");
    if g.k_max[0] == g.k_max[1] {
        let _ = writeln!(s, "k_max = {}", pair(&g.k_max[0]));
    } else {
        let _ = writeln!(s, "k_max_x = {}\nk_max_y = {}", pair(&g.k_max[0]), pair(&g.k_max[1]));
    }
    if g.k_min[0] == g.k_min[1] {
        let _ = writeln!(s, "k_min = {}", pair(&g.k_min[0]));
    } else {
        let _ = writeln!(s, "k_min_x = {}\nk_min_y = {}", pair(&g.k_min[0]), pair(&g.k_min[1]));
    }
    let _ = writeln!(s, "k_obs = {}", pair(&g.k_obs));
    match cfg.infeasibility {
        InfeasibilityPolicy::Error => {
            let _ = writeln!(s, "slack = false");
        }
        InfeasibilityPolicy::Slack { weight } => {
            let _ = writeln!(s, "slack = true\nslack_weight = {weight}");
        }
    }

    let c = &cfg.controller;
    let k = &c.gains;
    let _ = writeln!(s, "\n[controller]");
    let _ = writeln!(s, "lambda1 = {}\nlambda2 = {}\nlambda3 = {}", k.lambda1, k.lambda2, k.lambda3);
    let _ = writeln!(s, "alpha = {}\nbeta = {}", k.alpha, k.beta);
    let _ = writeln!(s, "kappa1 = {}\nkappa2 = {}\nkappa3 = {}\nkappa4 = {}", k.kappa1, k.kappa2, k.kappa3, k.kappa4);
    let _ = writeln!(s, "m_exp = {}\nn_exp = {}\np_exp = {}\nq_exp = {}", k.m_exp, k.n_exp, k.p_exp, k.q_exp);
    let _ = writeln!(s, "rho = {}\nepsilon = {}", k.rho, k.epsilon);
    match c.switching {
        Switching::Sign => {
            let _ = writeln!(s, "switching = sign");
        }
        Switching::Saturation { width } => {
            let _ = writeln!(s, "switching = saturation\nboundary_layer = {width}");
        }
    }
    let _ = writeln!(s, "force_limit = {}\ncompensator = {}", c.force_limit, c.compensator);

    let _ = writeln!(s, "\n[scenario]");
    let _ = writeln!(s, "name = {}\nduration = {}\ndt = {}", cfg.name, cfg.duration, cfg.dt);
    let _ = writeln!(s, "radius = {}\nrate = {}", cfg.trajectory.radius, cfg.trajectory.rate);
    let _ = writeln!(s, "force_amplitude = {}", pair(&cfg.force.amplitude));
    let _ = writeln!(s, "force_onset = {}\nforce_release = {}", cfg.force.onset, cfg.force.release);
    let _ = writeln!(s, "filter = {}", cfg.filter_enabled);

    let _ = writeln!(s, "\n[constraints]");
    let _ = writeln!(s, "workspace = {}\nobstacle = {}", cfg.workspace_enabled, cfg.obstacle_enabled);
    let _ = writeln!(s, "workspace_min = {}", axis_pair(&cfg.workspace.x_min));
    let _ = writeln!(s, "workspace_max = {}", axis_pair(&cfg.workspace.x_max));
    let _ = writeln!(s, "workspace_r = {}", cfg.workspace.r);
    let _ = writeln!(s, "obstacle_position = {}", pair(&cfg.obstacle.center));
    let _ = writeln!(s, "obstacle_r = {}", cfg.obstacle.r);
    s
}
