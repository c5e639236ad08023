//! Monotone cubic (Fritsch–Carlson) interpolation on a sorted grid.
//!
//! Used to cache the expensive conditional-rate integral on a coarse grid of
//! displacement values: the curve is smooth and monotone, so a
//! shape-preserving interpolant adds no spurious oscillation between nodes.

use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Build the interpolant; `xs` must be strictly increasing with at least
    /// two points.
    pub(crate) fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() == ys.len() && xs.len() >= 2);
        let n = xs.len();
        let mut secants = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = xs[i + 1] - xs[i];
            assert!(h > 0.0, "grid must be strictly increasing");
            secants.push((ys[i + 1] - ys[i]) / h);
        }

        let mut slopes = Vec::with_capacity(n);
        slopes.push(endpoint_slope(
            xs[1] - xs[0],
            xs.get(2).map_or(xs[1] - xs[0], |x2| x2 - xs[1]),
            secants[0],
            *secants.get(1).unwrap_or(&secants[0]),
        ));
        for i in 1..n - 1 {
            let (d_prev, d_next) = (secants[i - 1], secants[i]);
            if d_prev * d_next <= 0.0 {
                slopes.push(0.0);
            } else {
                let h_prev = xs[i] - xs[i - 1];
                let h_next = xs[i + 1] - xs[i];
                let w1 = 2.0 * h_next + h_prev;
                let w2 = h_next + 2.0 * h_prev;
                slopes.push((w1 + w2) / (w1 / d_prev + w2 / d_next));
            }
        }
        slopes.push(endpoint_slope(
            xs[n - 1] - xs[n - 2],
            if n >= 3 {
                xs[n - 2] - xs[n - 3]
            } else {
                xs[n - 1] - xs[n - 2]
            },
            secants[n - 2],
            if n >= 3 { secants[n - 3] } else { secants[n - 2] },
        ));

        MonotoneCubic { xs, ys, slopes }
    }

    /// Evaluate at `x`, clamping to the grid range.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // binary search for the containing interval
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[lo + 1] - self.xs[lo];
        let t = (x - self.xs[lo]) / h;
        let (y0, y1) = (self.ys[lo], self.ys[lo + 1]);
        let (m0, m1) = (self.slopes[lo] * h, self.slopes[lo + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2)
    }
}

/// One-sided three-point endpoint slope, clamped so the interpolant stays
/// monotone on the first interval.
fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let slope = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if slope * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && slope.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        slope
    }
}
