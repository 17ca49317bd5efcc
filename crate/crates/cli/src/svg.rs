//! Static trajectory plots.

use rampcc::environment::OccupancyGrid;
use rampcc::path::ReferencePath;
use rampcc::sim::SimTrace;
use std::fmt::Write;

const EGO: &str = "#f28c28";
const OBSTACLE: &str = "#2e8b57";
const AGENT: &str = "#4169e1";

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, style: &str) -> String {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    format!("<polyline points=\"{}\" fill=\"none\" {style}/>\n", pts.join(" "))
}

/// Canal cells in black, reference paths dashed, the first agent in orange,
/// other planned agents in blue and replayed obstacles in green. World y
/// points up.
pub fn render(trace: &SimTrace, grid: &OccupancyGrid, paths: &[&ReferencePath]) -> String {
    let (lo, hi) = grid.bounds();
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let res = grid.resolution();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.3} {:.3} {w:.3} {h:.3}\" width=\"{:.0}\" height=\"{:.0}\">",
        lo.x,
        -hi.y,
        w * 20.0,
        h * 20.0
    );
    let _ = writeln!(s, "<title>{} ({})</title>", esc(&trace.scenario), trace.planner);
    s.push_str("<g transform=\"scale(1,-1)\">\n");
    s.push_str("<g id=\"canal\" fill=\"black\">\n");
    for iy in 0..grid.height() {
        let mut ix = 0;
        while ix < grid.width() {
            if !grid.is_occupied(ix, iy) {
                ix += 1;
                continue;
            }
            let start = ix;
            while ix < grid.width() && grid.is_occupied(ix, iy) {
                ix += 1;
            }
            let (c0, _) = grid.cell_bounds(start, iy);
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{res:.3}\"/>",
                c0.x,
                c0.y,
                (ix - start) as f64 * res
            );
        }
    }
    s.push_str("</g>\n<g id=\"reference\">\n");
    for path in paths {
        let len = path.total_length();
        let n = (len / 0.25).ceil().max(1.0) as usize;
        let pts = (0..=n).map(|i| {
            let p = path.sample(len * i as f64 / n as f64).point;
            (p.x, p.y)
        });
        s.push_str(&polyline(pts, "stroke=\"gray\" stroke-width=\"0.08\" stroke-dasharray=\"0.4,0.3\""));
    }
    s.push_str("</g>\n");
    for o in &trace.obstacles {
        let _ = writeln!(s, "<g id=\"obstacle-{}\">", esc(&o.info.id));
        let pts = o.states.iter().map(|st| (st.position.x, st.position.y));
        s.push_str(&polyline(pts, &format!("stroke=\"{OBSTACLE}\" stroke-width=\"0.1\"")));
        s.push_str("</g>\n");
    }
    for (k, a) in trace.agents.iter().enumerate() {
        let color = if k == 0 { EGO } else { AGENT };
        let _ = writeln!(s, "<g id=\"agent-{}\">", esc(&a.id));
        let pts = a.states.iter().map(|st| (st.x, st.y));
        s.push_str(&polyline(pts, &format!("stroke=\"{color}\" stroke-width=\"0.12\"")));
        if let Some(last) = a.states.last() {
            let _ = writeln!(
                s,
                "<ellipse cx=\"{:.3}\" cy=\"{:.3}\" rx=\"{:.3}\" ry=\"{:.3}\" transform=\"rotate({:.3} {:.3} {:.3})\" fill=\"{color}\"/>",
                last.x,
                last.y,
                a.footprint.a,
                a.footprint.b,
                last.psi.to_degrees(),
                last.x,
                last.y
            );
        }
        s.push_str("</g>\n");
    }
    for c in &trace.collisions {
        if let Some(i) = trace.times.iter().position(|&t| t >= c.t) {
            if let Some(a) = trace.agents.iter().find(|a| a.id == c.agent) {
                let st = &a.states[i];
                let _ = writeln!(
                    s,
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"0.5\" fill=\"none\" stroke=\"red\" stroke-width=\"0.1\"/>",
                    st.x, st.y
                );
            }
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}
