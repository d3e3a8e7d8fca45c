//! Field dumps and CSV series.
//!
//! All numbers are written with 17 significant digits so that reading a file
//! back reproduces every value bitwise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::constitutive::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::galerkin::energy::EnergyRow;
use crate::galerkin::space::Grid;
use crate::galerkin::state::{EnergyAccount, SystemState};
use crate::galerkin::stepper::Checkpoint;
use crate::stratified::{AuditReport, ProfileKind, SeriesReport};

/// `{:.16e}`: 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn field_names(d: usize) -> Vec<String> {
    let mut names = Vec::new();
    for f in ["u", "v"] {
        for i in 1..=d {
            names.push(format!("{f}{i}"));
        }
    }
    for i in 1..=d {
        for j in 1..=d {
            names.push(format!("P{i}{j}"));
        }
    }
    names
}

/// Basis multi-indices in lexicographic order, last direction fastest.
fn multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut m = vec![0; shape.len()];
            for k in (0..shape.len()).rev() {
                m[k] = flat % shape[k];
                flat /= shape[k];
            }
            m
        })
        .collect()
}

fn basis_shape(grid: &Grid) -> Vec<usize> {
    grid.cells
        .iter()
        .zip(&grid.periodic)
        .map(|(&n, &p)| if p { n } else { n + 3 })
        .collect()
}

/// Renders a field dump.
///
/// Header lines: `dim`, `grid`, `fields`, `time`, then `step` (accepted steps,
/// nominal step size, consecutive easy steps) and `account` (initial energy,
/// cumulative dissipations and work), followed by one row per basis function.
pub fn render_dump(grid: &Grid, cp: &Checkpoint) -> String {
    let d = grid.dim();
    let s = &cp.state;
    let mut out = String::new();
    let _ = writeln!(out, "dim {d}");
    let _ = writeln!(
        out,
        "grid L {} n {} periodic {}",
        grid.lengths
            .iter()
            .map(|v| fmt_num(*v))
            .collect::<Vec<_>>()
            .join(" "),
        grid.cells
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        grid.periodic
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    let _ = writeln!(out, "fields {}", field_names(d).join(" "));
    let _ = writeln!(out, "time {}", fmt_num(s.t));
    let _ = writeln!(out, "step {} {} {}", cp.step, fmt_num(cp.dt), cp.easy_steps);
    let a = &cp.account;
    let _ = writeln!(
        out,
        "account {} {} {} {} {}",
        fmt_num(a.initial_total),
        fmt_num(a.dissipated_kv),
        fmt_num(a.dissipated_m),
        fmt_num(a.dissipated_h),
        fmt_num(a.external_work)
    );
    for (a, m) in multi_indices(&basis_shape(grid)).iter().enumerate() {
        let mut row: Vec<String> = m.iter().map(|i| i.to_string()).collect();
        row.extend(s.u_coef[a * d..(a + 1) * d].iter().map(|v| fmt_num(*v)));
        row.extend(s.v_coef[a * d..(a + 1) * d].iter().map(|v| fmt_num(*v)));
        row.extend(
            s.p_coef[a * d * d..(a + 1) * d * d]
                .iter()
                .map(|v| fmt_num(*v)),
        );
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_dump(path: &Path, grid: &Grid, cp: &Checkpoint) -> Result<()> {
    fs::write(path, render_dump(grid, cp))?;
    Ok(())
}

/// Reads a dump written by [`write_dump`].
pub fn read_dump(path: &Path) -> Result<(Grid, Checkpoint)> {
    let text = fs::read_to_string(path)?;
    parse_dump(&text).map_err(|message| Error::Dump {
        path: path.to_path_buf(),
        message,
    })
}

fn num(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad number '{s}'"))
}

fn header<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    key: &str,
) -> std::result::Result<Vec<&'a str>, String> {
    let line = lines
        .next()
        .ok_or_else(|| format!("missing '{key}' line"))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(format!("expected '{key}' line, got '{line}'"));
    }
    Ok(parts.collect())
}

pub fn parse_dump(text: &str) -> std::result::Result<(Grid, Checkpoint), String> {
    let mut lines = text.lines();
    let dim = header(&mut lines, "dim")?;
    let d: usize = dim
        .first()
        .and_then(|s| s.parse().ok())
        .filter(|d| *d == 2 || *d == 3)
        .ok_or("dim must be 2 or 3")?;

    let g = header(&mut lines, "grid")?;
    if g.len() != 3 + 3 * d || g[0] != "L" || g[1 + d] != "n" || g[2 + 2 * d] != "periodic" {
        return Err("malformed grid line".into());
    }
    let grid = Grid {
        lengths: g[1..1 + d]
            .iter()
            .map(|s| num(s))
            .collect::<std::result::Result<_, _>>()?,
        cells: g[2 + d..2 + 2 * d]
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| format!("bad cell count '{s}'"))
            })
            .collect::<std::result::Result<_, _>>()?,
        periodic: g[3 + 2 * d..]
            .iter()
            .map(|s| {
                s.parse::<bool>()
                    .map_err(|_| format!("bad periodic flag '{s}'"))
            })
            .collect::<std::result::Result<_, _>>()?,
    };

    let fields = header(&mut lines, "fields")?;
    if fields != field_names(d) {
        return Err(format!("unexpected field list '{}'", fields.join(" ")));
    }
    let t = num(header(&mut lines, "time")?.first().ok_or("missing time")?)?;
    let step = header(&mut lines, "step")?;
    if step.len() != 3 {
        return Err("malformed step line".into());
    }
    let acc = header(&mut lines, "account")?;
    if acc.len() != 5 {
        return Err("malformed account line".into());
    }
    let acc: Vec<f64> = acc
        .iter()
        .map(|s| num(s))
        .collect::<std::result::Result<_, _>>()?;

    let shape = basis_shape(&grid);
    let expected = multi_indices(&shape);
    let mut state = SystemState {
        t,
        u_coef: Vec::with_capacity(expected.len() * d),
        v_coef: Vec::with_capacity(expected.len() * d),
        p_coef: Vec::with_capacity(expected.len() * d * d),
    };
    let mut rows = 0;
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != d + 2 * d + d * d {
            return Err(format!("row {} has {} entries", k + 1, parts.len()));
        }
        let m = expected.get(k).ok_or("more rows than basis functions")?;
        for (i, want) in m.iter().enumerate() {
            if parts[i].parse::<usize>().ok() != Some(*want) {
                return Err(format!("row {} is out of order", k + 1));
            }
        }
        let vals: Vec<f64> = parts[d..]
            .iter()
            .map(|s| num(s))
            .collect::<std::result::Result<_, _>>()?;
        state.u_coef.extend_from_slice(&vals[..d]);
        state.v_coef.extend_from_slice(&vals[d..2 * d]);
        state.p_coef.extend_from_slice(&vals[2 * d..]);
        rows += 1;
    }
    if rows != expected.len() {
        return Err(format!("expected {} rows, found {rows}", expected.len()));
    }
    let cp = Checkpoint {
        state,
        account: EnergyAccount {
            initial_total: acc[0],
            dissipated_kv: acc[1],
            dissipated_m: acc[2],
            dissipated_h: acc[3],
            external_work: acc[4],
        },
        step: step[0].parse().map_err(|_| "bad step index")?,
        dt: num(step[1])?,
        easy_steps: step[2].parse().map_err(|_| "bad easy-step count")?,
    };
    Ok((grid, cp))
}

pub const ENERGY_HEADER: &str = "t,kinetic,elastic,constraint,gradient,diss_kv,diss_m,diss_h,work_ext,balance_residual,min_detP,min_det_grad_y,newton_iters";

pub fn energy_csv_row(r: &EnergyRow) -> String {
    let e = &r.energy;
    let vals = [
        r.t,
        e.kinetic,
        e.elastic,
        e.constraint,
        e.gradient,
        e.dissipated_kv,
        e.dissipated_m,
        e.dissipated_h,
        e.external_work,
        r.balance_residual,
        r.min_det_p,
        r.min_det_grad_y,
    ];
    let mut s = vals
        .iter()
        .map(|v| fmt_num(*v))
        .collect::<Vec<_>>()
        .join(",");
    let _ = write!(s, ",{}", r.newton_iters);
    s
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>> {
    let text = fs::read_to_string(path)?;
    parse_energy_csv(&text).map_err(|message| Error::Dump {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_energy_csv(text: &str) -> std::result::Result<Vec<EnergyRow>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(ENERGY_HEADER) {
        return Err("missing or unexpected header".into());
    }
    let mut rows = Vec::new();
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 13 {
            return Err(format!("row {} has {} columns", k + 1, parts.len()));
        }
        let v: Vec<f64> = parts[..12]
            .iter()
            .map(|s| num(s))
            .collect::<std::result::Result<_, _>>()?;
        rows.push(EnergyRow {
            t: v[0],
            energy: EnergyBreakdown {
                kinetic: v[1],
                elastic: v[2],
                constraint: v[3],
                gradient: v[4],
                dissipated_kv: v[5],
                dissipated_m: v[6],
                dissipated_h: v[7],
                external_work: v[8],
            },
            balance_residual: v[9],
            min_det_p: v[10],
            min_det_grad_y: v[11],
            newton_iters: parts[12]
                .parse()
                .map_err(|_| format!("bad iteration count '{}'", parts[12]))?,
        });
    }
    Ok(rows)
}

/// Column name of a series: the kind alone when the report covers one
/// profile, `<profile>_<kind>` otherwise.
fn series_column(report: &AuditReport, s: &SeriesReport) -> String {
    let first = report.series.first().map(|f| f.profile.kind);
    if report.series.iter().all(|x| Some(x.profile.kind) == first) {
        s.kind.name().to_string()
    } else {
        format!("{}_{}", s.profile.name(), s.kind.name())
    }
}

/// `t`, then one energy column per series.
pub fn render_audit_csv(report: &AuditReport) -> String {
    let mut out = String::from("t");
    for s in &report.series {
        out.push(',');
        out.push_str(&series_column(report, s));
    }
    out.push('\n');
    for (k, t) in report.times.iter().enumerate() {
        out.push_str(&fmt_num(*t));
        for s in &report.series {
            out.push(',');
            out.push_str(&fmt_num(s.energies[k]));
        }
        out.push('\n');
    }
    out
}

/// JSON summary with fitted exponents and classifications.
pub fn render_audit_summary(report: &AuditReport) -> String {
    let series: Vec<serde_json::Value> = report
        .series
        .iter()
        .map(|s| {
            let width = (s.profile.kind == ProfileKind::Tanh).then_some(s.profile.width);
            serde_json::json!({
                "profile": s.profile.name(),
                "ell": s.profile.ell,
                "width": width,
                "kind": s.kind.name(),
                "classification": s.classification.label(),
                "exponent": s.exponent,
                "trailing_drift": s.trailing_drift,
                "max_energy": s.energies.iter().fold(0.0f64, |m, e| m.max(*e)),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "kappa": report.kappa,
        "t_min": report.times.first(),
        "t_max": report.times.last(),
        "samples": report.times.len(),
        "series": series,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("plain JSON values");
    text.push('\n');
    text
}

pub fn write_audit(csv_path: &Path, summary_path: &Path, report: &AuditReport) -> Result<()> {
    fs::write(csv_path, render_audit_csv(report))?;
    fs::write(summary_path, render_audit_summary(report))?;
    Ok(())
}
