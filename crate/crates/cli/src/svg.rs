//! Top and side views of a plan as a standalone SVG.

use std::fmt::Write as _;

use footstep_core::{Environment, Plan, Vec3};

const WIDTH: f64 = 900.0;
const PANEL: f64 = 320.0;
const PAD: f64 = 40.0;
/// Arrow length per m/s² of contact acceleration, m.
const ARROW_SCALE: f64 = 0.02;

struct View {
    /// Indices of the horizontal and vertical world axes.
    axes: (usize, usize),
    min: (f64, f64),
    scale: f64,
    /// Screen y of the lowest world value.
    base: f64,
    panel_top: f64,
}

impl View {
    fn new(axes: (usize, usize), pts: &[Vec3], top: f64) -> View {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts {
            lo = (lo.0.min(p[axes.0]), lo.1.min(p[axes.1]));
            hi = (hi.0.max(p[axes.0]), hi.1.max(p[axes.1]));
        }
        let span = ((hi.0 - lo.0).max(1e-3), (hi.1 - lo.1).max(1e-3));
        let scale = ((WIDTH - 2.0 * PAD) / span.0).min((PANEL - 2.0 * PAD) / span.1);
        // center the drawing vertically in its panel
        let used = span.1 * scale;
        View {
            axes,
            min: (lo.0, lo.1),
            scale,
            base: top + PAD + 0.5 * (PANEL - 2.0 * PAD - used) + used,
            panel_top: top,
        }
    }

    fn map(&self, p: &Vec3) -> (f64, f64) {
        (
            PAD + (p[self.axes.0] - self.min.0) * self.scale,
            self.base - (p[self.axes.1] - self.min.1) * self.scale,
        )
    }
}

/// Blue at t = 0 through green to red at t = 1.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let hue = 240.0 * (1.0 - t);
    format!("hsl({hue:.0},80%,45%)")
}

fn polyline(out: &mut String, view: &View, pts: &[Vec3], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = view.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" {style}/>"#, coords.join(" "));
}

fn panel(out: &mut String, view: &View, plan: &Plan, env: &Environment, surfaces: &[usize], tol: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="{:.2}" font-family="sans-serif" font-size="14">{title}</text>"#,
        view.panel_top + 20.0
    );
    for &id in surfaces {
        let s = &env.surfaces()[id];
        let (x, y) = view.map(&s.position);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1.8" fill="#999"/>"##);
    }
    // per-axis tolerance box around each desired point
    for s in &plan.path.s_star {
        let lo = view.map(&(s - Vec3::repeat(tol)));
        let hi = view.map(&(s + Vec3::repeat(tol)));
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#6aa7e8" fill-opacity="0.12"/>"##,
            lo.0.min(hi.0),
            lo.1.min(hi.1),
            (hi.0 - lo.0).abs(),
            (hi.1 - lo.1).abs()
        );
    }
    let desired: Vec<Vec3> = std::iter::once(plan.path.s0).chain(plan.path.s_star.iter().copied()).collect();
    polyline(out, view, &desired, r##"stroke="#555" stroke-width="1" stroke-dasharray="4 3""##);

    let n = plan.n.max(1) as f64;
    let com: Vec<Vec3> = std::iter::once(plan.path.s0).chain(plan.com.iter().copied()).collect();
    for (i, w) in com.windows(2).enumerate() {
        let (a, b) = (view.map(&w[0]), view.map(&w[1]));
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2.5"/>"#,
            a.0,
            a.1,
            b.0,
            b.1,
            ramp((i + 1) as f64 / n)
        );
    }
    for (i, step) in plan.active_contacts.iter().enumerate() {
        let color = ramp((i + 1) as f64 / n);
        for c in step {
            let Some(s) = env.surface(c.surface_id) else { continue };
            let (a, b) = (view.map(&s.position), view.map(&(s.position + c.accel * ARROW_SCALE)));
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.2" marker-end="url(#head)"/>"#,
                a.0,
                a.1,
                b.0,
                b.1
            );
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, a.0, a.1);
        }
    }
}

pub fn render(plan: &Plan, env: &Environment, tol: f64, radius: f64) -> String {
    // only surfaces within reach of the desired path
    let mut surfaces: Vec<usize> = Vec::new();
    for s in std::iter::once(&plan.path.s0).chain(&plan.path.s_star) {
        surfaces.extend(env.within(s, radius).into_iter().map(|(id, _)| id));
    }
    surfaces.sort_unstable();
    surfaces.dedup();

    let mut pts: Vec<Vec3> = surfaces.iter().map(|&id| env.surfaces()[id].position).collect();
    pts.push(plan.path.s0);
    for s in plan.path.s_star.iter().chain(&plan.com) {
        pts.push(s + Vec3::repeat(tol));
        pts.push(s - Vec3::repeat(tol));
    }

    let height = 2.0 * PANEL + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    out.push_str(
        r#"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="context-stroke"/></marker></defs>
<rect width="100%" height="100%" fill="white"/>
"#,
    );
    let top = View::new((0, 1), &pts, 0.0);
    panel(&mut out, &top, plan, env, &surfaces, tol, "top view (x, y)");
    let side = View::new((0, 2), &pts, PANEL);
    panel(&mut out, &side, plan, env, &surfaces, tol, "side view (x, z)");
    let t_end = plan.n as f64 * plan.dt;
    let legend_y = 2.0 * PANEL + 15.0;
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{legend_y:.2}" width="20" height="8" fill="{}"/>"#,
            PAD + 20.0 * k as f64,
            ramp(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">time 0 to {t_end:.2} s; arrows are contact accelerations</text>"#,
        PAD + 230.0,
        legend_y + 8.0
    );
    out.push_str("</svg>\n");
    out
}
