//! Adaptive Gauss-Kronrod quadrature (15-point rule).
//!
//! Globally adaptive bisection: panels live in a max-heap keyed by their
//! error estimate and the worst one is split until the summed estimate meets
//! the tolerance. The caller can seed the initial panel edges, which matters
//! for damped oscillatory integrands where a single starting panel would
//! alias the oscillation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{QtsError, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) and weights; the
// embedded 7-point Gauss rule uses the odd-indexed abscissae.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Summed per-panel error estimate.
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Gauss-Kronrod 15 evaluation on [a, b]: (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);

    let fc = f(c);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        fv1[j] = f(c - h * XGK[j]);
        fv2[j] = f(c + h * XGK[j]);
    }

    let mut resk = WGK[7] * fc;
    let mut resabs = resk.abs();
    for j in 0..7 {
        resk += WGK[j] * (fv1[j] + fv2[j]);
        resabs += WGK[j] * (fv1[j].abs() + fv2[j].abs());
    }
    let mut resg = WG[3] * fc;
    for j in 0..3 {
        resg += WG[j] * (fv1[2 * j + 1] + fv2[2 * j + 1]);
    }

    // QUADPACK-style sharpened error estimate
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * h;
    resabs *= h.abs();
    resasc *= h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0f64.min((200.0 * err / resasc).powf(1.5));
    }
    let eps = f64::EPSILON * 50.0;
    if resabs > f64::MIN_POSITIVE / eps {
        err = err.max(eps * resabs);
    }
    (value, err)
}

/// Integrate over [edges[0], edges[last]] with the given starting panels.
///
/// Stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol * |integral|)`; errors out at `max_evals` integrand
/// evaluations with the achieved relative error.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    edges: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QtsError::InvalidModel(
            "quadrature edges must be strictly increasing".into(),
        ));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        evaluations += 15;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if total_err <= target {
            return Ok(QuadResult {
                value: total,
                abs_error: total_err,
                evaluations,
            });
        }
        if evaluations + 30 > max_evals {
            let achieved = if total.abs() > 0.0 {
                total_err / total.abs()
            } else {
                total_err
            };
            return Err(QtsError::QuadratureTolerance {
                requested: rel_tol,
                achieved,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; accept its estimate
            // by re-inserting with zero error so it stops being selected
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&f, a, b);
            evaluations += 15;
            heap.push(Panel { a, b, value, error });
        }
    }
}

/// Single-interval convenience wrapper around [`integrate_panels`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    integrate_panels(f, &[a, b], rel_tol, abs_tol, max_evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact() {
        let r = integrate(|x| x * x * x, 0.0, 1.0, 1e-12, 0.0, 1000).unwrap();
        assert!((r.value - 0.25).abs() < 1e-14);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn gaussian_area() {
        let sigma = 0.7;
        let r = integrate(
            |x| (-x * x / (2.0 * sigma * sigma)).exp(),
            -8.0 * sigma,
            8.0 * sigma,
            1e-10,
            0.0,
            100_000,
        )
        .unwrap();
        let want = (2.0 * std::f64::consts::PI).sqrt() * sigma;
        assert!((r.value - want).abs() / want < 1e-10, "got {}", r.value);
    }

    #[test]
    fn standard_normal_one_sigma() {
        // P(|Z| < 1) for a standard normal
        let r = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -1.0,
            1.0,
            1e-10,
            0.0,
            100_000,
        )
        .unwrap();
        assert!((r.value - 0.682689492137086).abs() < 1e-9);
    }

    #[test]
    fn damped_oscillation() {
        // int_0^1 cos(50 x) dx = sin(50)/50
        let r = integrate(|x| (50.0 * x).cos(), 0.0, 1.0, 1e-10, 0.0, 100_000).unwrap();
        let want = 50.0f64.sin() / 50.0;
        assert!((r.value - want).abs() < 1e-10);
    }

    #[test]
    fn seeded_panels_match_single_interval() {
        let f = |x: f64| (-x * x).exp() * (8.0 * x).cos();
        let a = integrate(f, 0.0, 4.0, 1e-10, 1e-14, 100_000).unwrap();
        let edges: Vec<f64> = (0..=16).map(|i| 0.25 * i as f64).collect();
        let b = integrate_panels(f, &edges, 1e-10, 1e-14, 100_000).unwrap();
        assert!((a.value - b.value).abs() < 1e-11);
    }

    #[test]
    fn reports_tolerance_failure() {
        let r = integrate(|x| (500.0 * x).cos(), 0.0, 1.0, 1e-12, 0.0, 60);
        assert!(matches!(r, Err(QtsError::QuadratureTolerance { .. })));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-8, 0.0, 1000).is_err());
        assert!(integrate_panels(|x| x, &[0.0], 1e-8, 0.0, 1000).is_err());
    }
}
