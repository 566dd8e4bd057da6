//! Plain-text SVG plots. These are for eyeballing runs only.

use std::fmt::Write as _;

use adagan::dirac::DiracTrajectory;
use adagan::Tensor2;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Frame {
    fn around(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let p = ((hi - lo) * 0.05).max(1e-3);
            (lo - p, hi + p)
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (SIZE - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (SIZE - 2.0 * MARGIN)
    }

    fn open(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            SIZE / 2.0,
            escape(title)
        );
        let (l, r, t, b) = (MARGIN, SIZE - MARGIN, MARGIN, SIZE - MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            r - l,
            b - t
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label} [{:.3}, {:.3}]</text>"#,
            SIZE / 2.0,
            SIZE - 12.0,
            self.x0,
            self.x1
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label} [{:.3}, {:.3}]</text>"#,
            SIZE / 2.0,
            SIZE / 2.0,
            self.y0,
            self.y1
        );
    }
}

/// Path of `(θ, ψ)` with the clipping band shaded and `(1, 0)` marked.
pub fn dirac_plot(traj: &DiracTrajectory, clip: f64, title: &str) -> String {
    let pts = || traj.points.iter().map(|p| (p.state.theta, p.state.psi));
    let frame = Frame::around(pts().chain([(1.0, 0.0), (1.0, clip), (1.0, -clip)]));
    let mut out = String::new();
    frame.open(&mut out, title, "theta", "psi");
    let (top, bottom) = (frame.py(clip), frame.py(-clip));
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#dde8f5"/>"##,
        SIZE - 2.0 * MARGIN,
        bottom - top
    );
    out.push_str(r##"<polyline fill="none" stroke="#c0392b" stroke-width="1" points=""##);
    // thin long trajectories to at most ~4000 vertices
    let stride = (traj.points.len() / 4000).max(1);
    for (i, (x, y)) in pts().enumerate() {
        if i % stride == 0 || i + 1 == traj.points.len() {
            let _ = write!(out, "{:.2},{:.2} ", frame.px(x), frame.py(y));
        }
    }
    out.push_str("\"/>\n");
    let s0 = traj.points[0].state;
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2c3e50"/>"##,
        frame.px(s0.theta),
        frame.py(s0.psi)
    );
    let _ = writeln!(
        out,
        r##"<path d="M {x} {y} m -6 -6 l 12 12 m 0 -12 l -12 12" stroke="#27ae60" stroke-width="2"/>"##,
        x = frame.px(1.0),
        y = frame.py(0.0)
    );
    out.push_str("</svg>\n");
    out
}

/// Real points in grey, generated points in red.
pub fn scatter_plot(real: &Tensor2, fake: &Tensor2, title: &str) -> String {
    let all = real.row_iter().chain(fake.row_iter()).map(|r| (r[0], r[1]));
    let frame = Frame::around(all);
    let mut out = String::new();
    frame.open(&mut out, title, "x", "y");
    for (rows, colour) in [(real, "#95a5a6"), (fake, "#c0392b")] {
        for r in rows.row_iter() {
            if r[0].is_finite() && r[1].is_finite() {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{colour}" fill-opacity="0.6"/>"#,
                    frame.px(r[0]),
                    frame.py(r[1])
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use adagan::dirac::{simulate, DiracConfig};
    use adagan::sched::Strategy;

    #[test]
    fn dirac_plot_is_closed_svg() {
        let traj = simulate(&DiracConfig::default(), Strategy::fixed(5, 1).unwrap(), 100).unwrap();
        let svg = dirac_plot(&traj, 0.5, "fixed");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn scatter_draws_every_point() {
        let real = Tensor2::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let fake = Tensor2::from_rows(&[vec![0.5, f64::NAN]]).unwrap();
        let svg = scatter_plot(&real, &fake, "s");
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn titles_are_escaped() {
        let t = Tensor2::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(scatter_plot(&t, &t, "a<b & c").contains("a&lt;b &amp; c"));
    }
}
