//! Summary statistics of a trace.

use crate::sim::{QpStatus, Trace};
use crate::Vec2;
use std::fmt;

/// Samples before this time are treated as the initial transient.
pub const TRANSIENT_END: f64 = 1.0;
/// Barrier values below this count as a safety violation.
pub const VIOLATION_THRESHOLD: f64 = -1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub samples: usize,
    pub min_h: Vec<(String, f64)>,
    /// Largest ‖x − x_f‖ after the transient.
    pub max_tracking_error: f64,
    pub max_abs_xf: Vec2,
    pub max_abs_shadow: Vec2,
    pub min_obstacle_distance: Option<f64>,
    pub max_active_rows: usize,
    pub relaxed_steps: usize,
    pub clamped_steps: usize,
    pub safety_violation: bool,
}

impl RunReport {
    pub fn from_trace(scenario: &str, trace: &Trace) -> Self {
        let min_h: Vec<(String, f64)> = trace.min_h().into_iter().map(|(id, h)| (id.name(), h)).collect();
        let abs_max = |f: fn(&crate::sim::TraceRecord) -> Vec2| {
            trace.records.iter().fold(Vec2::zeros(), |acc, r| acc.sup(&f(r).abs()))
        };
        Self {
            scenario: scenario.to_string(),
            samples: trace.len(),
            safety_violation: min_h.iter().any(|(_, h)| *h < VIOLATION_THRESHOLD),
            min_h,
            max_tracking_error: trace
                .records
                .iter()
                .filter(|r| r.t >= TRANSIENT_END)
                .map(|r| r.tracking_error())
                .fold(0.0, f64::max),
            max_abs_xf: abs_max(|r| r.x_f),
            max_abs_shadow: abs_max(|r| r.x_r_shadow),
            min_obstacle_distance: trace
                .has_obstacle_distance
                .then(|| trace.records.iter().filter_map(|r| r.obstacle_distance).fold(f64::INFINITY, f64::min)),
            max_active_rows: trace.records.iter().map(|r| r.qp_active.len()).max().unwrap_or(0),
            relaxed_steps: trace.records.iter().filter(|r| r.qp_status == QpStatus::Relaxed).count(),
            clamped_steps: trace.records.iter().filter(|r| r.f_c_clamped).count(),
        }
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario              {}", self.scenario)?;
        writeln!(f, "samples               {}", self.samples)?;
        for (name, h) in &self.min_h {
            writeln!(f, "min h_{name:<15} {h:.6e}")?;
        }
        writeln!(f, "max tracking error    {:.6e} m (t >= {TRANSIENT_END} s)", self.max_tracking_error)?;
        writeln!(f, "max |x_f|             {:.6e}, {:.6e} m", self.max_abs_xf[0], self.max_abs_xf[1])?;
        writeln!(f, "max |x_r shadow|      {:.6e}, {:.6e} m", self.max_abs_shadow[0], self.max_abs_shadow[1])?;
        if let Some(d) = self.min_obstacle_distance {
            writeln!(f, "min obstacle distance {d:.6e} m")?;
        }
        writeln!(f, "max active rows       {}", self.max_active_rows)?;
        writeln!(f, "relaxed steps         {}", self.relaxed_steps)?;
        writeln!(f, "clamped steps         {}", self.clamped_steps)?;
        write!(f, "safety violation      {}", if self.safety_violation { "YES" } else { "no" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{preset, run};

    #[test]
    fn workspace_report() {
        let mut cfg = preset("workspace").unwrap();
        cfg.duration = 2.0;
        let report = RunReport::from_trace(&cfg.name, &run(&cfg).unwrap());
        assert_eq!(report.samples, 2001);
        assert_eq!(report.min_h.len(), 4);
        assert!(!report.safety_violation);
        assert!(report.max_abs_xf.max() <= 0.09 + 1e-6);
        assert!(report.min_obstacle_distance.is_none());
        let text = report.to_string();
        assert!(text.contains("min h_ws_max_x"));
        assert!(text.ends_with("safety violation      no"));
    }
}
