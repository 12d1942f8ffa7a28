//! Centripetal Catmull-Rom (alpha = 0.5) through a polyline of knots.
//!
//! Each span `P1 -> P2` is converted to a cubic Bezier using its neighbours
//! `P0` and `P3`; the ends of the polyline duplicate the first and last knot.
//! With a duplicated neighbour the tangent collapses onto the span itself,
//! which is the usual end condition for this parameterisation.

pub type Point = [f64; 2];

const EPS: f64 = 1e-12;
const ALPHA: f64 = 0.5;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Bezier control polygon `[P1, C1, C2, P2]` of the span between `p1` and `p2`.
pub fn span_bezier(p0: Point, p1: Point, p2: Point, p3: Point) -> [Point; 4] {
    let l01 = dist(p0, p1).powf(ALPHA);
    let l12 = dist(p1, p2).powf(ALPHA);
    let l23 = dist(p2, p3).powf(ALPHA);
    let (l01_2, l12_2, l23_2) = (l01 * l01, l12 * l12, l23 * l23);

    let mut c1 = p1;
    if l01 > EPS {
        let a = 2.0 * l01_2 + 3.0 * l01 * l12 + l12_2;
        let n = 3.0 * l01 * (l01 + l12);
        for k in 0..2 {
            c1[k] = (p1[k] * a - p0[k] * l12_2 + p2[k] * l01_2) / n;
        }
    }
    let mut c2 = p2;
    if l23 > EPS {
        let b = 2.0 * l23_2 + 3.0 * l23 * l12 + l12_2;
        let m = 3.0 * l23 * (l23 + l12);
        for k in 0..2 {
            c2[k] = (p2[k] * b + p1[k] * l23_2 - p3[k] * l12_2) / m;
        }
    }
    [p1, c1, c2, p2]
}

pub fn eval_bezier(ctrl: &[Point; 4], u: f64) -> Point {
    let v = 1.0 - u;
    let (b0, b1, b2, b3) = (v * v * v, 3.0 * v * v * u, 3.0 * v * u * u, u * u * u);
    [
        b0 * ctrl[0][0] + b1 * ctrl[1][0] + b2 * ctrl[2][0] + b3 * ctrl[3][0],
        b0 * ctrl[0][1] + b1 * ctrl[1][1] + b2 * ctrl[2][1] + b3 * ctrl[3][1],
    ]
}

/// Bezier spans for consecutive knots, ends duplicated.
pub fn spans(knots: &[Point]) -> Vec<[Point; 4]> {
    let n = knots.len();
    (0..n.saturating_sub(1))
        .map(|i| {
            let p0 = knots[i.saturating_sub(1)];
            let p3 = knots[(i + 2).min(n - 1)];
            span_bezier(p0, knots[i], knots[i + 1], p3)
        })
        .collect()
}

/// Samples `samples_per_span` points per span starting at each knot, plus the
/// final knot. Knot positions are emitted verbatim and flagged.
pub fn sample(knots: &[Point], samples_per_span: usize) -> (Vec<Point>, Vec<bool>) {
    let per = samples_per_span.max(1);
    match knots.len() {
        0 => return (Vec::new(), Vec::new()),
        1 => return (vec![knots[0]], vec![true]),
        _ => {}
    }
    let mut pts = Vec::with_capacity((knots.len() - 1) * per + 1);
    let mut flags = Vec::with_capacity(pts.capacity());
    for (i, ctrl) in spans(knots).iter().enumerate() {
        pts.push(knots[i]);
        flags.push(true);
        for k in 1..per {
            pts.push(eval_bezier(ctrl, k as f64 / per as f64));
            flags.push(false);
        }
    }
    pts.push(*knots.last().expect("non-empty"));
    flags.push(true);
    (pts, flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bezier_endpoints_are_knots() {
        let ctrl = span_bezier([0.0, 0.0], [1.0, 0.3], [2.0, -0.1], [3.5, 1.0]);
        assert_eq!(eval_bezier(&ctrl, 0.0), [1.0, 0.3]);
        assert_eq!(eval_bezier(&ctrl, 1.0), [2.0, -0.1]);
    }

    #[test]
    fn sample_counts_and_flags() {
        let knots = [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]];
        let (pts, flags) = sample(&knots, 4);
        assert_eq!(pts.len(), 9);
        assert_eq!(flags.iter().filter(|f| **f).count(), 3);
        assert_eq!(pts[4], [1.0, 1.0]);
        assert_eq!(sample(&knots[..1], 4), (vec![[0.0, 0.0]], vec![true]));
    }

    #[test]
    fn collinear_equally_spaced_knots_give_straight_line() {
        let knots = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let (pts, _) = sample(&knots, 8);
        for p in pts {
            assert!(p[1].abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_knots_do_not_produce_nan() {
        let knots = [[0.5, 0.5], [0.5, 0.5], [0.2, 0.1]];
        let (pts, _) = sample(&knots, 5);
        assert!(pts.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
    }
}
