//! Small composite-Simpson integrator with panel doubling and divergence
//! detection, used for probability transforms and integrability checks.
//! Probability transforms are evaluated by quadrature, never FFT, because the
//! measure may be atomic and the density part must be exact pointwise in ξ.

use num_complex::Complex64;

pub const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub converged: bool,
}

/// Composite Simpson on [a, b], doubling the panel count until the estimate
/// stabilizes to `tol` (relative, with a small absolute floor) or the budget
/// runs out.
pub fn simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> QuadResult {
    if a >= b {
        return QuadResult {
            value: Complex64::new(0.0, 0.0),
            converged: true,
        };
    }
    let mut panels = 16usize;
    let mut prev = simpson_fixed(f, a, b, panels);
    for _ in 0..16 {
        panels *= 2;
        let cur = simpson_fixed(f, a, b, panels);
        let diff = (cur - prev).norm();
        if diff <= tol * cur.norm().max(1e-300) + 1e-14 {
            return QuadResult {
                value: cur,
                converged: true,
            };
        }
        prev = cur;
    }
    QuadResult {
        value: prev,
        converged: false,
    }
}

fn simpson_fixed(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, panels: usize) -> Complex64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * (h / 3.0)
}

/// Integral over (−∞, b]: integrates [b − L, b] and keeps doubling L until the
/// newly added chunk is negligible. Reports non-convergence when the chunks do
/// not decay or the running total exceeds the divergence cap.
pub fn tail_left(f: &dyn Fn(f64) -> Complex64, b: f64, tol: f64) -> QuadResult {
    let mut len = 8.0f64;
    let mut total = simpson(f, b - len, b, tol);
    let mut last_chunk = total.value.norm();
    let mut stale = 0u32;
    for _ in 0..24 {
        let chunk = simpson(f, b - 2.0 * len, b - len, tol);
        total.value += chunk.value;
        total.converged &= chunk.converged;
        let cn = chunk.value.norm();
        if total.value.norm() > DIVERGENCE_CAP {
            return QuadResult {
                value: total.value,
                converged: false,
            };
        }
        if cn <= tol * total.value.norm().max(1e-300) + 1e-14 {
            return total;
        }
        // chunks must decay for the tail to converge
        if cn >= 0.9 * last_chunk {
            stale += 1;
            if stale >= 3 {
                return QuadResult {
                    value: total.value,
                    converged: false,
                };
            }
        } else {
            stale = 0;
        }
        last_chunk = cn;
        len *= 2.0;
    }
    QuadResult {
        value: total.value,
        converged: false,
    }
}
