//! Trace CSV: one header line, one row per sample, comma separated, LF line
//! endings. Floats use 17 significant digits so a reread is bit-exact.

use crate::ecbf::ConstraintId;
use crate::error::{Error, Result};
use crate::sim::{QpStatus, Trace, TraceRecord};
use crate::Vec2;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

const VECTOR_COLUMNS: [&str; 8] = ["xd", "xf", "xr_shadow", "x", "fe", "fe_hat", "fe_comp", "fc"];

pub fn header(trace: &Trace) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for base in VECTOR_COLUMNS {
        cols.push(format!("{base}_x"));
        cols.push(format!("{base}_y"));
    }
    cols.push("fc_clamped".into());
    cols.extend(trace.constraints.iter().map(|id| format!("h_{}", id.name())));
    if trace.has_obstacle_distance {
        cols.push("d_obs".into());
    }
    cols.extend(["qp_active", "qp_status", "qp_slack"].map(String::from));
    cols
}

fn float(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e},");
}

fn active_names(trace: &Trace, record: &TraceRecord) -> String {
    if record.qp_active.is_empty() {
        return "none".into();
    }
    record.qp_active.iter().map(|&i| trace.constraints[i].name()).collect::<Vec<_>>().join("+")
}

pub fn emit_csv(trace: &Trace, mut out: impl Write) -> Result<()> {
    let mut line = header(trace).join(",");
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for r in &trace.records {
        line.clear();
        float(&mut line, r.t);
        for v in [r.x_d, r.x_f, r.x_r_shadow, r.x, r.f_e, r.f_e_hat, r.f_e_comp, r.f_c] {
            float(&mut line, v[0]);
            float(&mut line, v[1]);
        }
        let _ = write!(line, "{},", u8::from(r.f_c_clamped));
        for &h in &r.h {
            float(&mut line, h);
        }
        if let Some(d) = r.obstacle_distance {
            float(&mut line, d);
        }
        let _ = writeln!(line, "{},{},{:.16e}", active_names(trace, r), r.qp_status, r.qp_slack);
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut out = std::io::BufWriter::new(file);
    emit_csv(trace, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Trace> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv_str(&text)
}

fn constraint_from_name(name: &str) -> Option<ConstraintId> {
    match name {
        "obs" => Some(ConstraintId::Obstacle),
        "ws_max_x" => Some(ConstraintId::WorkspaceMax(0)),
        "ws_max_y" => Some(ConstraintId::WorkspaceMax(1)),
        "ws_min_x" => Some(ConstraintId::WorkspaceMin(0)),
        "ws_min_y" => Some(ConstraintId::WorkspaceMin(1)),
        _ => None,
    }
}

pub fn read_csv_str(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "empty trace file".into() })?;
    let cols: Vec<&str> = head.split(',').collect();
    let mut trace = Trace::default();
    let fixed = 1 + 2 * VECTOR_COLUMNS.len() + 1;
    for name in cols.iter().skip(fixed) {
        if let Some(c) = name.strip_prefix("h_") {
            let id = constraint_from_name(c)
                .ok_or_else(|| Error::Parse { line: 1, message: format!("unknown barrier column `{name}`") })?;
            trace.constraints.push(id);
        } else if *name == "d_obs" {
            trace.has_obstacle_distance = true;
        }
    }
    let expected = header(&trace);
    if cols != expected {
        return Err(Error::Parse { line: 1, message: format!("unexpected header, wanted `{}`", expected.join(",")) });
    }

    for (idx, row) in lines {
        let line = idx + 1;
        if row.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != cols.len() {
            return Err(err(format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| err(format!("bad number `{}` in column {}", fields[i], cols[i])))
        };
        let vec = |k: usize| -> Result<Vec2> { Ok(Vec2::new(num(1 + 2 * k)?, num(2 + 2 * k)?)) };
        let mut at = fixed - 1;
        let f_c_clamped = match fields[at] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("bad fc_clamped flag `{other}`"))),
        };
        at += 1;
        let h = (0..trace.constraints.len()).map(|k| num(at + k)).collect::<Result<Vec<_>>>()?;
        at += h.len();
        let obstacle_distance = if trace.has_obstacle_distance {
            at += 1;
            Some(num(at - 1)?)
        } else {
            None
        };
        let qp_active = if fields[at] == "none" {
            Vec::new()
        } else {
            fields[at]
                .split('+')
                .map(|n| {
                    constraint_from_name(n)
                        .and_then(|id| trace.constraints.iter().position(|&c| c == id))
                        .ok_or_else(|| err(format!("unknown active row `{n}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let qp_status = QpStatus::parse(fields[at + 1]).ok_or_else(|| err(format!("bad qp_status `{}`", fields[at + 1])))?;
        let qp_slack = num(at + 2)?;
        trace.records.push(TraceRecord {
            t: num(0)?,
            x_d: vec(0)?,
            x_f: vec(1)?,
            x_r_shadow: vec(2)?,
            x: vec(3)?,
            f_e: vec(4)?,
            f_e_hat: vec(5)?,
            f_e_comp: vec(6)?,
            f_c: vec(7)?,
            f_c_clamped,
            h,
            obstacle_distance,
            qp_active,
            qp_status,
            qp_slack,
        });
    }
    Ok(trace)
}
