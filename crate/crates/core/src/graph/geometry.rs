//! Lane-level plane geometry used only to discover which movements cross and in what order.

use std::f64::consts::{FRAC_PI_2, TAU};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub fn new(x: f64, y: f64) -> Self {
        Pt { x, y }
    }

    /// Rotate counter-clockwise by `quarter` right angles about the origin.
    pub fn rotate(self, quarter: u8) -> Self {
        match quarter % 4 {
            0 => self,
            1 => Pt::new(-self.y, self.x),
            2 => Pt::new(-self.x, -self.y),
            _ => Pt::new(self.y, -self.x),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Path {
    Line { start: Pt, end: Pt },
    /// Circular arc from angle `theta0` sweeping `sweep` radians (signed).
    Arc { center: Pt, radius: f64, theta0: f64, sweep: f64 },
}

impl Path {
    pub fn rotate(self, quarter: u8) -> Self {
        match self {
            Path::Line { start, end } => Path::Line {
                start: start.rotate(quarter),
                end: end.rotate(quarter),
            },
            Path::Arc { center, radius, theta0, sweep } => Path::Arc {
                center: center.rotate(quarter),
                radius,
                theta0: theta0 + FRAC_PI_2 * (quarter % 4) as f64,
                sweep,
            },
        }
    }

    /// Fraction of the path travelled at a point known to lie on it.
    fn param_of(&self, p: Pt) -> Option<f64> {
        match *self {
            Path::Line { start, end } => {
                let (dx, dy) = (end.x - start.x, end.y - start.y);
                let len2 = dx * dx + dy * dy;
                let u = ((p.x - start.x) * dx + (p.y - start.y) * dy) / len2;
                (-EPS..=1.0 + EPS).contains(&u).then_some(u)
            }
            Path::Arc { center, theta0, sweep, .. } => {
                let theta = (p.y - center.y).atan2(p.x - center.x);
                let delta = if sweep >= 0.0 {
                    (theta - theta0).rem_euclid(TAU)
                } else {
                    (theta0 - theta).rem_euclid(TAU)
                };
                let delta = if delta > TAU - 1e-7 { 0.0 } else { delta };
                let u = delta / sweep.abs();
                (u <= 1.0 + EPS).then_some(u)
            }
        }
    }
}

fn circle_of(p: &Path) -> Option<(Pt, f64)> {
    match *p {
        Path::Arc { center, radius, .. } => Some((center, radius)),
        Path::Line { .. } => None,
    }
}

fn line_circle(start: Pt, end: Pt, c: Pt, r: f64) -> Vec<Pt> {
    let (dx, dy) = (end.x - start.x, end.y - start.y);
    let (fx, fy) = (start.x - c.x, start.y - c.y);
    let a = dx * dx + dy * dy;
    let b = 2.0 * (fx * dx + fy * dy);
    let cc = fx * fx + fy * fy - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let mut out = Vec::new();
    for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
        out.push(Pt::new(start.x + t * dx, start.y + t * dy));
    }
    if disc == 0.0 {
        out.pop();
    }
    out
}

fn circle_circle(c1: Pt, r1: f64, c2: Pt, r2: f64) -> Vec<Pt> {
    let (dx, dy) = (c2.x - c1.x, c2.y - c1.y);
    let d = (dx * dx + dy * dy).sqrt();
    if d > r1 + r2 || d < (r1 - r2).abs() || d == 0.0 {
        return Vec::new();
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let (mx, my) = (c1.x + a * dx / d, c1.y + a * dy / d);
    vec![
        Pt::new(mx + h * dy / d, my - h * dx / d),
        Pt::new(mx - h * dy / d, my + h * dx / d),
    ]
}

/// Crossing points of two paths, as (param on `a`, param on `b`).
pub(crate) fn crossings(a: &Path, b: &Path) -> Vec<(f64, f64)> {
    let candidates = match (a, b) {
        (Path::Line { start: s1, end: e1 }, Path::Line { start: s2, end: e2 }) => {
            let (d1x, d1y) = (e1.x - s1.x, e1.y - s1.y);
            let (d2x, d2y) = (e2.x - s2.x, e2.y - s2.y);
            let den = d1x * d2y - d1y * d2x;
            if den.abs() < EPS {
                Vec::new()
            } else {
                let t = ((s2.x - s1.x) * d2y - (s2.y - s1.y) * d2x) / den;
                vec![Pt::new(s1.x + t * d1x, s1.y + t * d1y)]
            }
        }
        (Path::Line { start, end }, arc) | (arc, Path::Line { start, end }) => {
            let (c, r) = circle_of(arc).expect("arc");
            line_circle(*start, *end, c, r)
        }
        _ => {
            let (c1, r1) = circle_of(a).expect("arc");
            let (c2, r2) = circle_of(b).expect("arc");
            circle_circle(c1, r1, c2, r2)
        }
    };
    candidates
        .into_iter()
        .filter_map(|p| Some((a.param_of(p)?, b.param_of(p)?)))
        .filter(|(u, v)| *u > 1e-6 && *u < 1.0 - 1e-6 && *v > 1e-6 && *v < 1.0 - 1e-6)
        .collect()
}

/// A straight lane of the northbound approach at lateral offset `x`, rotated to approach `quarter`.
pub(crate) fn through_lane(x: f64, half_width: f64, quarter: u8) -> Path {
    Path::Line {
        start: Pt::new(x, -half_width),
        end: Pt::new(x, half_width),
    }
    .rotate(quarter)
}

/// Left turn from the northbound lane at offset `x` into the innermost westbound exit lane.
pub(crate) fn left_turn(x: f64, half_width: f64, quarter: u8) -> Path {
    Path::Arc {
        center: Pt::new(-half_width, -half_width),
        radius: half_width + x,
        theta0: 0.0,
        sweep: FRAC_PI_2,
    }
    .rotate(quarter)
}
