//! Hand-written SVG of the planar trajectories.
//!
//! Geometry is emitted in metres inside a group that maps the data window to
//! the canvas, so coordinates in the file can be read back directly.

use crate::ecbf::{ObstacleConstraint, WorkspaceConstraint};
use crate::error::{Error, Result};
use crate::sim::{ScenarioConfig, Trace};
use crate::Vec2;
use std::fmt::Write as _;
use std::path::Path;

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// Constraint geometry drawn over the trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlotOverlay {
    pub workspace: Option<WorkspaceConstraint>,
    pub obstacle: Option<ObstacleConstraint>,
}

impl PlotOverlay {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            workspace: cfg.workspace_enabled.then_some(cfg.workspace),
            obstacle: cfg.obstacle_enabled.then_some(cfg.obstacle),
        }
    }
}

struct Window {
    lo: Vec2,
    hi: Vec2,
}

impl Window {
    fn include(&mut self, p: &Vec2) {
        if p.iter().all(|v| v.is_finite()) {
            self.lo = self.lo.inf(p);
            self.hi = self.hi.sup(p);
        }
    }
}

fn polyline(out: &mut String, class: &str, colour: &str, dash: Option<&str>, points: impl Iterator<Item = Vec2>) {
    let _ = write!(out, r#"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="1.5" vector-effect="non-scaling-stroke""#);
    if let Some(d) = dash {
        let _ = write!(out, r#" stroke-dasharray="{d}""#);
    }
    out.push_str(r#" points=""#);
    let mut first = true;
    for p in points.filter(|p| p.iter().all(|v| v.is_finite())) {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{},{}", p[0], p[1]);
    }
    out.push_str("\"/>\n");
}

fn rectangle(out: &mut String, class: &str, colour: &str, dash: Option<&str>, lo: Vec2, hi: Vec2) {
    let _ = write!(
        out,
        r#"<path class="{class}" fill="none" stroke="{colour}" stroke-width="1" vector-effect="non-scaling-stroke""#
    );
    if let Some(d) = dash {
        let _ = write!(out, r#" stroke-dasharray="{d}""#);
    }
    let _ = writeln!(out, r#" d="M {} {} L {} {} L {} {} L {} {} Z"/>"#, lo[0], lo[1], hi[0], lo[1], hi[0], hi[1], lo[0], hi[1]);
}

pub fn render_svg(trace: &Trace, overlay: &PlotOverlay, title: &str) -> String {
    let mut win = Window { lo: Vec2::repeat(f64::INFINITY), hi: Vec2::repeat(f64::NEG_INFINITY) };
    for r in &trace.records {
        for p in [r.x_d, r.x_f, r.x_r_shadow, r.x] {
            win.include(&p);
        }
    }
    if let Some(ws) = &overlay.workspace {
        win.include(&ws.x_min);
        win.include(&ws.x_max);
    }
    if let Some(obs) = &overlay.obstacle {
        win.include(&(obs.center - Vec2::repeat(obs.r)));
        win.include(&(obs.center + Vec2::repeat(obs.r)));
    }
    if !win.lo[0].is_finite() {
        win = Window { lo: Vec2::repeat(-1.0), hi: Vec2::repeat(1.0) };
    }
    let span = (win.hi - win.lo).max().max(1e-9) * 1.1;
    let centre = (win.hi + win.lo) / 2.0;
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let (tx, ty) = (CANVAS / 2.0 - scale * centre[0], CANVAS / 2.0 + scale * centre[1]);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<g transform="matrix({scale} 0 0 {} {tx} {ty})">"#, -scale);
    polyline(&mut s, "desired", "#999999", Some("4 3"), trace.records.iter().map(|r| r.x_d));
    polyline(&mut s, "shadow", "#d62728", Some("2 2"), trace.records.iter().map(|r| r.x_r_shadow));
    polyline(&mut s, "safe", "#1f77b4", None, trace.records.iter().map(|r| r.x_f));
    polyline(&mut s, "actual", "#2ca02c", None, trace.records.iter().map(|r| r.x));
    if let Some(ws) = &overlay.workspace {
        rectangle(&mut s, "workspace-bound", "#555555", Some("6 3"), ws.x_min, ws.x_max);
        let r = Vec2::repeat(ws.r);
        rectangle(&mut s, "workspace", "#000000", None, ws.x_min + r, ws.x_max - r);
    }
    if let Some(obs) = &overlay.obstacle {
        let _ = writeln!(
            s,
            r##"<circle class="obstacle" cx="{}" cy="{}" r="{}" fill="#ff7f0e" fill-opacity="0.3" stroke="#ff7f0e" vector-effect="non-scaling-stroke"/>"##,
            obs.center[0], obs.center[1], obs.r
        );
    }
    s.push_str("</g>\n");
    let legend = [("desired", "#999999"), ("safe", "#1f77b4"), ("shadow", "#d62728"), ("actual", "#2ca02c")];
    for (i, (label, colour)) in legend.iter().enumerate() {
        let y = 20.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="10" y="{y}" font-family="sans-serif" font-size="12" fill="{colour}">{label}</text>"#);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_plot(trace: &Trace, overlay: &PlotOverlay, title: &str, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), render_svg(trace, overlay, title))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}
