//! Exact planar geometry on big rationals: half-plane clipping of boxes and
//! line/box intersections.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(r: &Rational64) -> Q {
    Q::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// The closed half-plane `{x : normal . x >= offset}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfPlane {
    pub normal: [Q; 2],
    pub offset: Q,
}

impl HalfPlane {
    pub fn eval(&self, p: &[Q; 2]) -> Q {
        &self.normal[0] * &p[0] + &self.normal[1] * &p[1] - &self.offset
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rect {
    pub lo: [Q; 2],
    pub hi: [Q; 2],
}

impl Rect {
    pub fn area(&self) -> Q {
        (&self.hi[0] - &self.lo[0]) * (&self.hi[1] - &self.lo[1])
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [[Q; 2]; 4] {
        [
            [self.lo[0].clone(), self.lo[1].clone()],
            [self.hi[0].clone(), self.lo[1].clone()],
            [self.hi[0].clone(), self.hi[1].clone()],
            [self.lo[0].clone(), self.hi[1].clone()],
        ]
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let lo = [
            self.lo[0].clone().max(other.lo[0].clone()),
            self.lo[1].clone().max(other.lo[1].clone()),
        ];
        let hi = [
            self.hi[0].clone().min(other.hi[0].clone()),
            self.hi[1].clone().min(other.hi[1].clone()),
        ];
        (lo[0] < hi[0] && lo[1] < hi[1]).then_some(Rect { lo, hi })
    }
}

fn shoelace(poly: &[[Q; 2]]) -> Q {
    let n = poly.len();
    let mut acc = Q::zero();
    for k in 0..n {
        let a = &poly[k];
        let b = &poly[(k + 1) % n];
        acc += &a[0] * &b[1] - &b[0] * &a[1];
    }
    (acc / qi(2)).abs()
}

/// Exact area of `rect` intersected with the half-plane.
pub fn clipped_area(rect: &Rect, hp: &HalfPlane) -> Q {
    let corners = rect.corners();
    let vals: Vec<Q> = corners.iter().map(|c| hp.eval(c)).collect();
    if vals.iter().all(|v| !v.is_negative()) {
        return rect.area();
    }
    if vals.iter().all(|v| !v.is_positive()) {
        return Q::zero();
    }
    // Sutherland-Hodgman against a single edge.
    let mut out: Vec<[Q; 2]> = Vec::with_capacity(5);
    for k in 0..4 {
        let (p, vp) = (&corners[k], &vals[k]);
        let (n, vn) = (&corners[(k + 1) % 4], &vals[(k + 1) % 4]);
        if !vp.is_negative() {
            out.push(p.clone());
        }
        if (vp.is_negative() && vn.is_positive()) || (vp.is_positive() && vn.is_negative()) {
            let t = vp / (vp - vn);
            out.push([
                &p[0] + &t * (&n[0] - &p[0]),
                &p[1] + &t * (&n[1] - &p[1]),
            ]);
        }
    }
    if out.len() < 3 {
        Q::zero()
    } else {
        shoelace(&out)
    }
}

/// Length of `{x : normal . x = offset}` inside the open rectangle.
pub fn line_length_in_rect(hp: &HalfPlane, rect: &Rect) -> f64 {
    let corners = rect.corners();
    let vals: Vec<Q> = corners.iter().map(|c| hp.eval(c)).collect();
    let mut pts: Vec<[Q; 2]> = Vec::new();
    for k in 0..4 {
        let (p, vp) = (&corners[k], &vals[k]);
        let (n, vn) = (&corners[(k + 1) % 4], &vals[(k + 1) % 4]);
        if vp.is_zero() {
            pts.push(p.clone());
        } else if (vp.is_negative() && vn.is_positive()) || (vp.is_positive() && vn.is_negative()) {
            let t = vp / (vp - vn);
            pts.push([
                &p[0] + &t * (&n[0] - &p[0]),
                &p[1] + &t * (&n[1] - &p[1]),
            ]);
        }
    }
    if pts.len() < 2 {
        return 0.0;
    }
    // A line lying on an edge meets the rectangle only on its boundary.
    let on_edge = (0..4).any(|k| vals[k].is_zero() && vals[(k + 1) % 4].is_zero());
    if on_edge {
        return 0.0;
    }
    let mut best = Q::zero();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let dx = &pts[a][0] - &pts[b][0];
            let dy = &pts[a][1] - &pts[b][1];
            let d2 = &dx * &dx + &dy * &dy;
            if d2 > best {
                best = d2;
            }
        }
    }
    q_to_f64(&best).sqrt()
}
