//! Trajectory CSV export, run summaries, and static SVG quick-look plots.

use hs_ctrl_core::constraint::ConsolidatedConstraint;
use hs_ctrl_core::sim::{SimResult, SimStatus};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Fixed column order of the trajectory CSV.
pub fn csv_header(n: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=n {
        let _ = write!(h, ",x1_{i}");
    }
    h.push_str(",alpha_h,alpha_s,e_s,rho_n,rho_r,phi_h,phi_gamma");
    for i in 1..=n {
        let _ = write!(h, ",u_{i}");
    }
    h
}

fn fmt12(v: f64) -> String {
    // 12 significant digits, round-trippable at the printed precision
    format!("{v:.11e}")
}

/// Write the record stream with 12 significant digits and LF line endings.
pub fn export_csv(result: &SimResult, n: usize, path: &Path) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&csv_header(n));
    out.push('\n');
    for rec in &result.records {
        out.push_str(&fmt12(rec.t));
        for i in 0..n {
            out.push(',');
            out.push_str(&fmt12(rec.x[i]));
        }
        for v in [
            rec.diag.alpha_h,
            rec.diag.alpha_s,
            rec.diag.e_s,
            rec.diag.rho_n,
            rec.diag.rho_r,
            rec.diag.phi_h,
            rec.diag.phi_gamma,
        ] {
            out.push(',');
            out.push_str(&fmt12(v));
        }
        for i in 0..n {
            out.push(',');
            out.push_str(&fmt12(rec.u[i]));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

/// Human-readable run summary.
pub fn write_summary(result: &SimResult, path: &Path) -> std::io::Result<()> {
    let mut out = String::new();
    let status = match result.status {
        SimStatus::Completed => "completed".to_string(),
        SimStatus::BarrierBreach { t } => format!("barrier_breach at t = {t}"),
        SimStatus::SoftBarrierBreach { t } => format!("soft_barrier_breach at t = {t}"),
        SimStatus::FunnelBreach { t, layer } => {
            format!("funnel_breach at t = {t} (layer {layer})")
        }
        SimStatus::NumericalError { t } => format!("numerical_error at t = {t}"),
    };
    let s = &result.summary;
    let _ = writeln!(out, "status={status}");
    let _ = writeln!(out, "records={}", result.records.len());
    let _ = writeln!(
        out,
        "min_alpha_h={:.6e} (t={:.3})",
        s.min_alpha_h, s.min_alpha_h_t
    );
    let _ = writeln!(out, "max_rho_r={:.6e}", s.max_rho_r);
    match s.first_soft_satisfaction {
        Some(t) => {
            let _ = writeln!(out, "first_soft_satisfaction={t:.3}");
        }
        None => {
            let _ = writeln!(out, "first_soft_satisfaction=never");
        }
    }
    let _ = write!(out, "soft_violation_intervals=");
    if s.soft_violation_intervals.is_empty() {
        let _ = writeln!(out, "none");
    } else {
        let list: Vec<String> = s
            .soft_violation_intervals
            .iter()
            .map(|(a, b)| format!("[{a:.3}, {b:.3}]"))
            .collect();
        let _ = writeln!(out, "{}", list.join(" "));
    }
    let _ = writeln!(out, "deadlock_suspected={}", s.deadlock_suspected);
    let _ = writeln!(out, "monitor_failures={}", s.monitor_failures);
    std::fs::write(path, out)
}

// ─────────────────── contours and SVG ───────────────────

pub type Segment = ((f64, f64), (f64, f64));

/// Zero level set of `f` on a regular grid by marching squares with linear
/// interpolation along the crossing edges.
pub fn zero_contour(
    f: &dyn Fn(f64, f64) -> f64,
    bounds: (f64, f64, f64, f64),
    cells: usize,
) -> Vec<Segment> {
    let (x0, x1, y0, y1) = bounds;
    let dx = (x1 - x0) / cells as f64;
    let dy = (y1 - y0) / cells as f64;
    // sample the grid once
    let mut values = vec![0.0; (cells + 1) * (cells + 1)];
    for j in 0..=cells {
        for i in 0..=cells {
            values[j * (cells + 1) + i] = f(x0 + i as f64 * dx, y0 + j as f64 * dy);
        }
    }
    let at = |i: usize, j: usize| values[j * (cells + 1) + i];
    let mut segments = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let (gx, gy) = (x0 + i as f64 * dx, y0 + j as f64 * dy);
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pos: Vec<bool> = corners.iter().map(|v| *v > 0.0).collect();
            if pos.iter().all(|p| *p) || pos.iter().all(|p| !*p) {
                continue;
            }
            // crossing points on the four edges, in cell coordinates
            let lerp = |a: f64, b: f64| a / (a - b);
            let mut pts = Vec::new();
            if pos[0] != pos[1] {
                pts.push((gx + dx * lerp(corners[0], corners[1]), gy));
            }
            if pos[1] != pos[2] {
                pts.push((gx + dx, gy + dy * lerp(corners[1], corners[2])));
            }
            if pos[3] != pos[2] {
                pts.push((gx + dx * lerp(corners[3], corners[2]), gy + dy));
            }
            if pos[0] != pos[3] {
                pts.push((gx, gy + dy * lerp(corners[0], corners[3])));
            }
            match pts.len() {
                2 => segments.push((pts[0], pts[1])),
                4 => {
                    // saddle cell; pairing choice does not matter for a
                    // quick-look plot
                    segments.push((pts[0], pts[1]));
                    segments.push((pts[2], pts[3]));
                }
                _ => {}
            }
        }
    }
    segments
}

struct SvgCanvas {
    body: String,
    width: f64,
    height: f64,
    bounds: (f64, f64, f64, f64),
    margin: f64,
}

impl SvgCanvas {
    fn new(width: f64, height: f64, bounds: (f64, f64, f64, f64)) -> Self {
        Self {
            body: String::new(),
            width,
            height,
            bounds,
            margin: 40.0,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1, y0, y1) = self.bounds;
        let sx = (self.width - 2.0 * self.margin) / (x1 - x0);
        let sy = (self.height - 2.0 * self.margin) / (y1 - y0);
        (
            self.margin + (x - x0) * sx,
            self.height - self.margin - (y - y0) * sy,
        )
    }

    fn polyline(&mut self, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
        let mapped: Vec<String> = pts
            .map(|(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        if mapped.len() < 2 {
            return;
        }
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" {style} points=\"{}\"/>",
            mapped.join(" ")
        );
    }

    fn segments(&mut self, segs: &[Segment], style: &str) {
        for ((ax, ay), (bx, by)) in segs {
            let (x1, y1) = self.map(*ax, *ay);
            let (x2, y2) = self.map(*bx, *by);
            let _ = writeln!(
                self.body,
                "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" {style}/>"
            );
        }
    }

    fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"11\" font-family=\"monospace\">{s}</text>"
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Plane plot: trajectory of `x1` with hard (red) and soft (blue) zero-level
/// contours at a few snapshot times, plus a time-series panel of `alpha_h`,
/// `alpha_s` and `rho_s`.
pub fn export_svg(
    result: &SimResult,
    hard: &ConsolidatedConstraint,
    soft: &ConsolidatedConstraint,
    dir: &Path,
) -> std::io::Result<()> {
    if result.records.is_empty() {
        return Ok(());
    }
    let records = &result.records;

    // bounding box over the trajectory and origin-ish area
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for rec in records {
        x0 = x0.min(rec.x[0]);
        x1 = x1.max(rec.x[0]);
        y0 = y0.min(rec.x[1]);
        y1 = y1.max(rec.x[1]);
    }
    let pad = 0.25 * ((x1 - x0).max(y1 - y0).max(4.0));
    let bounds = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);

    let mut plane = SvgCanvas::new(640.0, 640.0, bounds);
    let t_end = records.last().unwrap().t;
    let snapshots = [0.0, t_end / 3.0, 2.0 * t_end / 3.0, t_end];
    for (k, &ts) in snapshots.iter().enumerate() {
        let opacity = 0.3 + 0.7 * k as f64 / (snapshots.len() - 1).max(1) as f64;
        let hard_segs = zero_contour(
            &|x, y| hard.alpha(ts, &[x, y]).unwrap_or(f64::NAN),
            bounds,
            200,
        );
        plane.segments(
            &hard_segs,
            &format!("stroke=\"#c62828\" stroke-width=\"1.2\" stroke-opacity=\"{opacity:.2}\""),
        );
        let soft_segs = zero_contour(
            &|x, y| soft.alpha(ts, &[x, y]).unwrap_or(f64::NAN),
            bounds,
            200,
        );
        plane.segments(
            &soft_segs,
            &format!("stroke=\"#1565c0\" stroke-width=\"1.2\" stroke-opacity=\"{opacity:.2}\""),
        );
    }
    plane.polyline(
        records.iter().map(|r| (r.x[0], r.x[1])),
        "stroke=\"black\" stroke-width=\"1.5\"",
    );
    plane.text(
        8.0,
        16.0,
        &format!(
            "x1 plane; hard contour red, soft contour blue; snapshots t = {:.1}/{:.1}/{:.1}/{:.1}",
            snapshots[0], snapshots[1], snapshots[2], snapshots[3]
        ),
    );
    std::fs::write(dir.join("trajectory.svg"), plane.finish())?;

    // time series
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for rec in records {
        for v in [
            rec.diag.alpha_h,
            rec.diag.alpha_s,
            rec.diag.rho_n - rec.diag.rho_r,
        ] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = (hi - lo).max(1e-6);
    let tb = (0.0, t_end.max(1e-9), lo - 0.05 * span, hi + 0.05 * span);
    let mut ts_plot = SvgCanvas::new(800.0, 420.0, tb);
    ts_plot.polyline(
        records.iter().map(|r| (r.t, 0.0)),
        "stroke=\"#999\" stroke-width=\"0.6\" stroke-dasharray=\"2,3\"",
    );
    ts_plot.polyline(
        records.iter().map(|r| (r.t, r.diag.alpha_h)),
        "stroke=\"#c62828\" stroke-width=\"1.3\"",
    );
    ts_plot.polyline(
        records.iter().map(|r| (r.t, r.diag.alpha_s)),
        "stroke=\"#1565c0\" stroke-width=\"1.3\"",
    );
    ts_plot.polyline(
        records.iter().map(|r| (r.t, r.diag.rho_n - r.diag.rho_r)),
        "stroke=\"#555\" stroke-width=\"1.1\" stroke-dasharray=\"5,3\"",
    );
    ts_plot.text(
        8.0,
        16.0,
        &format!(
            "alpha_h red, alpha_s blue, rho_s dashed; t in [0, {t_end:.1}], y in [{lo:.2}, {hi:.2}]"
        ),
    );
    std::fs::write(dir.join("timeseries.svg"), ts_plot.finish())?;
    Ok(())
}
