//! Static SVG figures: run trajectories and potential-field heatmaps.

use std::fmt::Write;

use warefollow::apf::FieldSample;
use warefollow::sim::{ScenarioConfig, TickRecord};
use warefollow::world::Rect;
use warefollow::Point;

const PX_PER_M: f64 = 40.0;
const MARGIN: f64 = 30.0;
const PALETTE: [&str; 6] = ["#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"];

/// World-to-canvas mapping with y pointing up.
struct Canvas {
    bounds: Rect<f64>,
}

impl Canvas {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.bounds.min_x) * PX_PER_M
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.bounds.max_y - y) * PX_PER_M
    }

    fn width(&self) -> f64 {
        2.0 * MARGIN + (self.bounds.max_x - self.bounds.min_x) * PX_PER_M
    }

    fn height(&self) -> f64 {
        2.0 * MARGIN + (self.bounds.max_y - self.bounds.min_y) * PX_PER_M
    }

    fn open(&self, svg: &mut String) {
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#,
            w = self.width(),
            h = self.height()
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    }

    fn rect(&self, svg: &mut String, r: &Rect<f64>, style: &str) {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            self.x(r.min_x),
            self.y(r.max_y),
            (r.max_x - r.min_x) * PX_PER_M,
            (r.max_y - r.min_y) * PX_PER_M
        );
    }

    fn polyline(&self, svg: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
        let pts: Vec<String> = points.map(|(x, y)| format!("{:.2},{:.2}", self.x(x), self.y(y))).collect();
        if pts.len() > 1 {
            let _ = writeln!(svg, r#"<polyline points="{}" fill="none" {style}/>"#, pts.join(" "));
        }
    }

    fn dot(&self, svg: &mut String, x: f64, y: f64, fill: &str) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{fill}"/>"#,
            self.x(x),
            self.y(y)
        );
    }
}

/// Shelves, dashed pedestrian walking paths and the robot trajectory.
pub fn trajectory_svg(cfg: &ScenarioConfig, ticks: &[TickRecord]) -> String {
    let canvas = Canvas { bounds: cfg.bounds };
    let mut svg = String::new();
    canvas.open(&mut svg);
    canvas.rect(&mut svg, &cfg.bounds, r##"fill="none" stroke="#444" stroke-width="1""##);
    for shelf in &cfg.shelves {
        canvas.rect(&mut svg, shelf, r##"fill="#b0b0b0" stroke="#555""##);
    }

    for (k, spec) in cfg.pedestrians.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let start = spec.waypoints.first().map(|w| (w.x, w.y));
        let walked = start.into_iter().chain(ticks.iter().filter_map(|t| {
            t.pedestrians
                .iter()
                .find(|(id, _)| *id == spec.id)
                .map(|(_, p)| (p.x, p.y))
        }));
        let width = if spec.target { 2.5 } else { 1.5 };
        canvas.polyline(
            &mut svg,
            walked,
            &format!(r#"stroke="{color}" stroke-width="{width}" stroke-dasharray="6,4""#),
        );
        if let Some((x, y)) = start {
            canvas.dot(&mut svg, x, y, color);
        }
    }

    let robot = std::iter::once((cfg.robot.pose.x, cfg.robot.pose.y))
        .chain(ticks.iter().map(|t| (t.robot.x, t.robot.y)));
    canvas.polyline(&mut svg, robot, r##"stroke="#1f77b4" stroke-width="2.5""##);
    canvas.dot(&mut svg, cfg.robot.pose.x, cfg.robot.pose.y, "#1f77b4");
    if let Some(last) = ticks.last() {
        canvas.dot(&mut svg, last.robot.x, last.robot.y, "#0b3c66");
    }

    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="13">{}: robot (solid), pedestrians (dashed)</text>"#,
        cfg.name
    );
    svg.push_str("</svg>\n");
    svg
}

fn heat_color(t: f64) -> String {
    // Dark blue through teal and yellow to red.
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [25.0, 25.0, 112.0]),
        (0.35, [32.0, 160.0, 160.0]),
        (0.7, [250.0, 220.0, 60.0]),
        (1.0, [200.0, 30.0, 30.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let i = STOPS.iter().rposition(|(s, _)| *s <= t).unwrap_or(0).min(STOPS.len() - 2);
    let (s0, c0) = STOPS[i];
    let (s1, c1) = STOPS[i + 1];
    let a = (t - s0) / (s1 - s0);
    let c: Vec<u8> = (0..3).map(|k| (c0[k] + a * (c1[k] - c0[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of `log(1 + U)` on the sampled grid, saturating
/// near the shelves, with force directions on
/// coarse grids and shelf outlines on top.
pub fn field_svg(cfg: &ScenarioConfig, samples: &[FieldSample<f64>], n: usize, goal: Option<(f64, f64)>) -> String {
    let canvas = Canvas { bounds: cfg.bounds };
    let b = cfg.bounds;
    let (dx, dy) = ((b.max_x - b.min_x) / n as f64, (b.max_y - b.min_y) / n as f64);
    let level = |s: &FieldSample<f64>| s.u_total.max(0.0).ln_1p();
    let inside = |s: &FieldSample<f64>| cfg.shelves.iter().any(|r| r.contains(&Point::new(s.x, s.y)));
    // Potentials blow up near shelves, so scale around the median of free
    // space and let the rest saturate.
    let mut levels: Vec<f64> = samples.iter().filter(|s| !inside(s)).map(level).collect();
    levels.sort_by(f64::total_cmp);
    let lo = levels.first().copied().unwrap_or(0.0);
    let median = levels.get(levels.len() / 2).copied().unwrap_or(lo);
    let span = (2.0 * (median - lo)).max(1e-12);

    let mut svg = String::new();
    canvas.open(&mut svg);
    for s in samples {
        let cell = Rect::new(s.x - dx / 2.0, s.y - dy / 2.0, s.x + dx / 2.0, s.y + dy / 2.0);
        let fill = if inside(s) {
            "#808080".to_string()
        } else {
            heat_color((level(s) - lo) / span)
        };
        canvas.rect(&mut svg, &cell, &format!(r#"fill="{fill}" stroke="{fill}" stroke-width="0.5""#));
    }
    if n <= 40 {
        let len = 0.4 * dx.min(dy);
        for s in samples.iter().filter(|s| !inside(s)) {
            let norm = s.fx.hypot(s.fy);
            if norm > 0.0 {
                let (ex, ey) = (s.x + len * s.fx / norm, s.y + len * s.fy / norm);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="white" stroke-width="1"/>"#,
                    canvas.x(s.x),
                    canvas.y(s.y),
                    canvas.x(ex),
                    canvas.y(ey)
                );
            }
        }
    }
    for shelf in &cfg.shelves {
        canvas.rect(&mut svg, shelf, r##"fill="none" stroke="black" stroke-width="1.5""##);
    }
    if let Some((x, y)) = goal {
        canvas.dot(&mut svg, x, y, "white");
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="13">{}: log(1 + potential), {n}x{n}</text>"#,
        cfg.name
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_color_endpoints() {
        assert_eq!(heat_color(0.0), "#191970");
        assert_eq!(heat_color(1.0), "#c81e1e");
        assert_eq!(heat_color(7.0), heat_color(1.0));
    }

    #[test]
    fn canvas_flips_y() {
        let c = Canvas {
            bounds: Rect::new(0.0, 0.0, 10.0, 5.0),
        };
        assert_eq!(c.y(5.0), MARGIN);
        assert_eq!(c.y(0.0), MARGIN + 5.0 * PX_PER_M);
        assert_eq!(c.x(0.0), MARGIN);
    }
}
