use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::domain::{Axis, GridSpec, Mode, TargetSpec};
use crate::error::{Error, Result};
use crate::sim::{McSummary, Trajectory};
use crate::solver::{Action, PolicyField, ValueField};

fn axis_text(a: &Axis) -> String {
    format!("{:?}:{:?}:{:?}", a.min, a.max, a.step)
}

fn header_line(kind: &str, grid: &GridSpec, modes: usize, target: &TargetSpec, extra: &[(&str, String)]) -> String {
    let mut s = format!(
        "# tackroute {kind} x1={} x2={} x3={} dt={:?} modes={modes} target={:?},{:?},{:?}",
        axis_text(&grid.axes[0]),
        axis_text(&grid.axes[1]),
        axis_text(&grid.axes[2]),
        grid.dt,
        target.center[0],
        target.center[1],
        target.radius,
    );
    for (k, v) in extra {
        let _ = write!(s, " {k}={v}");
    }
    s
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Rows `x1 x2 x3 q value`, mode-major with `x1` fastest.
pub fn export_value(field: &ValueField, target: &TargetSpec, path: impl AsRef<Path>) -> Result<()> {
    let g = *field.grid();
    let extra = [
        ("outside", format!("{:?}", field.stopping_cost())),
        ("iterations", field.iterations.to_string()),
        ("residual", format!("{:?}", field.residual)),
        ("converged", field.converged.to_string()),
    ];
    let header = header_line("value", &g, field.modes(), target, &extra);
    write_file(path.as_ref(), |w| {
        writeln!(w, "{header}")?;
        writeln!(w, "x1 x2 x3 q value")?;
        for_each_node(&g, field.modes(), |q, node, x| {
            writeln!(
                w,
                "{:.16e} {:.16e} {:.16e} {} {:.16e}",
                x[0],
                x[1],
                x[2],
                q,
                field.get(q, node)
            )
        })
    })
}

/// Rows `x1 x2 x3 q action` with actions `continue:<u>` or `switch:<q'>`.
pub fn export_policy(policy: &PolicyField, target: &TargetSpec, path: impl AsRef<Path>) -> Result<()> {
    let g = *policy.grid();
    let header = header_line("policy", &g, policy.modes(), target, &[]);
    write_file(path.as_ref(), |w| {
        writeln!(w, "{header}")?;
        writeln!(w, "x1 x2 x3 q action")?;
        for_each_node(&g, policy.modes(), |q, node, x| {
            writeln!(w, "{:.16e} {:.16e} {:.16e} {} {}", x[0], x[1], x[2], q, policy.get(q, node))
        })
    })
}

fn for_each_node(
    g: &GridSpec,
    modes: usize,
    mut f: impl FnMut(Mode, [usize; 3], [f64; 3]) -> std::io::Result<()>,
) -> std::io::Result<()> {
    let [n1, n2, n3] = g.shape();
    for q in 0..modes {
        for i3 in 0..n3 {
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    f(Mode::from_index(q), [i1, i2, i3], g.node(i1, i2, i3))?;
                }
            }
        }
    }
    Ok(())
}

/// Grid, mode count, target and the remaining `key=value` pairs of a header.
struct Header {
    kind: String,
    grid: GridSpec,
    modes: usize,
    target: TargetSpec,
    rest: BTreeMap<String, String>,
}

fn parse_header(line: &str, origin: &str) -> Result<Header> {
    let err = |m: &str| Error::parse(origin, m);
    let mut toks = line
        .strip_prefix("# tackroute ")
        .ok_or_else(|| err("missing `# tackroute` header"))?
        .split_whitespace();
    let kind = toks.next().ok_or_else(|| err("missing file kind"))?.to_string();
    let mut kv = BTreeMap::new();
    for t in toks {
        let (k, v) = t.split_once('=').ok_or_else(|| err("malformed header pair"))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| err("malformed number in header"));
    let list = |key: &str, sep: char| -> Result<Vec<f64>> {
        kv.get(key)
            .ok_or_else(|| err(&format!("header lacks {key}")))?
            .split(sep)
            .map(num)
            .collect()
    };
    let axis = |key: &str| -> Result<Axis> {
        match list(key, ':')?.as_slice() {
            [a, b, h] => Ok(Axis::new(*a, *b, *h)),
            _ => Err(err("axis needs min:max:step")),
        }
    };
    let grid = GridSpec::new(axis("x1")?, axis("x2")?, axis("x3")?, list("dt", ',')?[0]);
    let modes = kv
        .get("modes")
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| err("header lacks modes"))?;
    let target = match list("target", ',')?.as_slice() {
        [a, b, r] => TargetSpec {
            center: [*a, *b],
            radius: *r,
        },
        _ => return Err(err("target needs x1,x2,radius")),
    };
    for k in ["x1", "x2", "x3", "dt", "modes", "target"] {
        kv.remove(k);
    }
    Ok(Header {
        kind,
        grid,
        modes,
        target,
        rest: kv,
    })
}

/// Data rows after the two header lines, checked against the node order.
fn read_rows<T>(
    path: &Path,
    kind: &str,
    mut cell: impl FnMut(&str) -> Option<T>,
) -> Result<(Header, Vec<T>)> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let h = parse_header(lines.next().unwrap_or(""), &origin)?;
    if h.kind != kind {
        return Err(Error::parse(&origin, format!("expected a {kind} file, found {}", h.kind)));
    }
    lines.next();
    let n = h.grid.node_count() * h.modes;
    let mut out = Vec::with_capacity(n);
    let g = h.grid;
    let [n1, n2, n3] = g.shape();
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::parse(&origin, format!("malformed row {}", k + 3));
        if cols.len() != 5 || k >= n {
            return Err(bad());
        }
        let (i1, i2, i3, q) = (k % n1, (k / n1) % n2, (k / (n1 * n2)) % n3, k / (n1 * n2 * n3));
        let x = g.node(i1, i2, i3);
        for d in 0..3 {
            let v: f64 = cols[d].parse().map_err(|_| bad())?;
            if (v - x[d]).abs() > 1e-9 * g.axes[d].step {
                return Err(bad());
            }
        }
        if cols[3] != (q + 1).to_string() {
            return Err(bad());
        }
        out.push(cell(cols[4]).ok_or_else(bad)?);
    }
    if out.len() != n {
        return Err(Error::parse(&origin, format!("expected {n} rows, found {}", out.len())));
    }
    Ok((h, out))
}

pub fn import_value(path: impl AsRef<Path>) -> Result<ValueField> {
    let path = path.as_ref();
    let (h, values) = read_rows(path, "value", |s| s.parse::<f64>().ok())?;
    let origin = path.display().to_string();
    let outside: f64 = h
        .rest
        .get("outside")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(&origin, "header lacks outside"))?;
    let mut field = ValueField::from_fn(&h.grid, h.modes, &h.target, outside, |_, _| 0.0);
    field.values_mut().copy_from_slice(&values);
    field.iterations = h.rest.get("iterations").and_then(|s| s.parse().ok()).unwrap_or(0);
    field.residual = h.rest.get("residual").and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    field.converged = h.rest.get("converged").is_some_and(|s| s == "true");
    Ok(field)
}

fn parse_action(s: &str) -> Option<Action> {
    if let Some(u) = s.strip_prefix("continue:") {
        return u.parse().ok().map(Action::Continue);
    }
    let q: usize = s.strip_prefix("switch:")?.parse().ok()?;
    (q >= 1).then(|| Action::Switch(Mode::new(q)))
}

pub fn import_policy(path: impl AsRef<Path>) -> Result<PolicyField> {
    let (h, actions) = read_rows(path.as_ref(), "policy", parse_action)?;
    let probe = ValueField::from_fn(&h.grid, 1, &h.target, 0.0, |_, _| 0.0);
    Ok(PolicyField::new(&h.grid, h.modes, actions, probe.frozen_columns().to_vec()))
}

/// Rows `t x1 x2 x3 q u event`.
pub fn export_trajectory(tr: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| {
        writeln!(
            w,
            "# tackroute trajectory seed={} dt={:?} termination={} cost={:?} switches={}",
            tr.seed,
            tr.dt,
            tr.termination,
            tr.cost,
            tr.switch_count()
        )?;
        writeln!(w, "t x1 x2 x3 q u event")?;
        for s in &tr.samples {
            let st = s.state;
            writeln!(
                w,
                "{:.16e} {:.16e} {:.16e} {:.16e} {} {:.16e} {}",
                st.t,
                st.x[0],
                st.x[1],
                st.x[2],
                st.q,
                st.u,
                s.event.as_str()
            )?;
        }
        Ok(())
    })
}

/// Key-value rows, aggregate statistics first, then one row per run.
pub fn stats_text(summary: &McSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "runs {}", summary.runs.len());
    let _ = writeln!(s, "hit_fraction {:.16e}", summary.hit_fraction);
    let _ = writeln!(s, "arrival_mean {:.16e}", summary.arrival_mean);
    let _ = writeln!(s, "arrival_std {:.16e}", summary.arrival_std);
    let _ = writeln!(s, "switch_mean {:.16e}", summary.switch_mean);
    let _ = writeln!(s, "switch_std {:.16e}", summary.switch_std);
    let _ = writeln!(s, "mean_x1 {:.16e}", summary.mean_x1);
    for (i, r) in summary.runs.iter().enumerate() {
        let _ = writeln!(
            s,
            "run.{i} seed={} termination={} time={:.16e} switches={} cost={:.16e} mean_x1={:.16e}",
            r.seed, r.termination, r.final_time, r.switches, r.cost, r.mean_x1
        );
    }
    s
}

pub fn export_stats(summary: &McSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, stats_text(summary)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::frozen_scenario;

    #[test]
    fn header_round_trip() {
        let s = frozen_scenario();
        let line = header_line("value", &s.grid, 2, &s.target, &[("outside", "100.0".into())]);
        let h = parse_header(&line, "t").unwrap();
        assert_eq!(h.kind, "value");
        assert_eq!(h.grid, s.grid);
        assert_eq!(h.modes, 2);
        assert_eq!(h.target, s.target);
        assert_eq!(h.rest["outside"], "100.0");
        assert!(parse_header("x1 x2", "t").is_err());
    }

    #[test]
    fn action_tokens() {
        assert_eq!(parse_action("switch:2"), Some(Action::Switch(Mode::new(2))));
        assert_eq!(parse_action("continue:7.8539816339744828e-1"), Some(Action::Continue(std::f64::consts::FRAC_PI_4)));
        assert_eq!(parse_action("switch:0"), None);
        assert_eq!(parse_action("go"), None);
        let a = Action::Continue(0.1 + 0.2);
        assert_eq!(parse_action(&a.to_string()), Some(a));
    }
}
