//! Globally adaptive Gauss-Kronrod (7/15) quadrature on the unit interval.
//!
//! Points carry their complement `1 - t` alongside `t`, both derived from the
//! caller's breakpoints, so integrands that blow up as `t -> 1` (such as
//! `t / (1 - t)`) keep full relative precision there.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// A point `t` in `[0, 1]` together with `1 - t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPoint {
    pub t: f64,
    pub complement: f64,
}

impl UnitPoint {
    pub fn new(t: f64) -> Self {
        Self { t, complement: 1.0 - t }
    }

    /// `t = 1 / (1 + e^-u)` and `1 - t = 1 / (1 + e^u)`.
    pub fn from_logit(u: f64) -> Self {
        Self {
            t: 1.0 / (1.0 + (-u).exp()),
            complement: 1.0 / (1.0 + u.exp()),
        }
    }

    fn midpoint(a: Self, b: Self) -> Self {
        Self {
            t: 0.5 * (a.t + b.t),
            complement: 0.5 * (a.complement + b.complement),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: UnitPoint,
    hi: UnitPoint,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod estimate with its embedded 7-point Gauss estimate.
/// `f(t, 1 - t)` is the integrand.
pub fn gauss_kronrod_15<F: Fn(f64, f64) -> f64>(f: &F, lo: UnitPoint, hi: UnitPoint) -> (f64, f64) {
    let c = UnitPoint::midpoint(lo, hi);
    let h = if c.t > 0.5 {
        0.5 * (lo.complement - hi.complement)
    } else {
        0.5 * (hi.t - lo.t)
    };
    let fc = f(c.t, c.complement);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = h * x;
        let f1 = f(c.t - dx, c.complement + dx);
        let f2 = f(c.t + dx, c.complement - dx);
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, gauss * h)
}

fn segment<F: Fn(f64, f64) -> f64>(f: &F, lo: UnitPoint, hi: UnitPoint) -> Segment {
    let (k, g) = gauss_kronrod_15(f, lo, hi);
    Segment {
        lo,
        hi,
        value: k,
        error: (k - g).abs(),
    }
}

/// Integrates over consecutive segments delimited by `points` (ascending in
/// `t`), bisecting the segment with the largest error estimate until the
/// total error is below `max(abs_tol, rel_tol * |value|)` or
/// `max_subdivisions` bisections have been made.
pub fn integrate<F: Fn(f64, f64) -> f64>(
    f: F,
    points: &[UnitPoint],
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> QuadratureResult {
    let mut heap: BinaryHeap<Segment> = points
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| segment(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * heap.len();
    let mut subdivisions = 0;
    loop {
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let error: f64 = heap.iter().map(|s| s.error).sum();
        let converged = error <= abs_tol.max(rel_tol * value.abs());
        if converged || subdivisions >= max_subdivisions || !error.is_finite() {
            return QuadratureResult {
                value,
                abs_error: error,
                evaluations,
                subdivisions,
                converged,
            };
        }
        let Some(worst) = heap.pop() else {
            return QuadratureResult {
                value: 0.0,
                abs_error: 0.0,
                evaluations,
                subdivisions,
                converged: true,
            };
        };
        let mid = UnitPoint::midpoint(worst.lo, worst.hi);
        heap.push(segment(&f, worst.lo, mid));
        heap.push(segment(&f, mid, worst.hi));
        evaluations += 30;
        subdivisions += 1;
    }
}
