//! Rotated-rectangle IoU in BEV via convex polygon clipping and shoelace areas.

use super::{BevBox, GeomError, Vec2};

const EPS: f64 = 1e-9;

fn shoelace(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    acc.abs() / 2.0
}

/// Clips `subject` against the half-plane on the left of directed edge a->b.
fn clip_edge(subject: &[Vec2], a: Vec2, b: Vec2) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(subject.len() + 2);
    let n = subject.len();
    let side = |p: Vec2| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    for i in 0..n {
        let cur = subject[i];
        let next = subject[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        if sc >= -EPS {
            out.push(cur);
        }
        if (sc > EPS && sn < -EPS) || (sc < -EPS && sn > EPS) {
            let t = sc / (sc - sn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    acc / 2.0
}

fn intersection_area(a: &BevBox, b: &BevBox) -> f64 {
    let mut poly: Vec<Vec2> = a.corners().to_vec();
    // The clipper keeps the left side of each edge, so the clip polygon must
    // wind counter-clockwise.
    let mut clip = b.corners().to_vec();
    if signed_area(&clip) < 0.0 {
        clip.reverse();
    }
    for i in 0..4 {
        if poly.len() < 3 {
            return 0.0;
        }
        poly = clip_edge(&poly, clip[i], clip[(i + 1) % 4]);
    }
    shoelace(&poly)
}

/// Intersection-over-union of two rotated BEV rectangles.
pub fn bev_iou(a: &BevBox, b: &BevBox) -> Result<f64, GeomError> {
    for bx in [a, b] {
        if bx.length <= 0.0 || bx.width <= 0.0 {
            return Err(GeomError::DegenerateBox {
                length: bx.length,
                width: bx.width,
            });
        }
    }
    // All three areas come from the shoelace of computed corner polygons so
    // that identical boxes cancel exactly and IoU is exactly 1.
    let area_a = shoelace(&a.corners());
    let area_b = shoelace(&b.corners());
    let inter = intersection_area(a, b).min(area_a).min(area_b);
    let union = area_a + area_b - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
