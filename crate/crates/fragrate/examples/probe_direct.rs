//! Scratch probe for solver diagnostics (not part of the test suite).

use fragrate::direct::{eigen_residual, evolve_to_eigenpair, models, ModelCoefficients};
use fragrate::kernels::{FragmentationProbability, KernelConfig};
use fragrate::transport::{build_grid, Diffeomorphism};

fn main() {
    let d = Diffeomorphism::exp();
    let cfg = KernelConfig::new(
        FragmentationProbability::equal_mitosis(&d).unwrap(),
        2.0,
        d.clone(),
        0.0,
    )
    .unwrap();
    let m = ModelCoefficients {
        g: models::pow_exp(1.0),
        b: models::pow_exp(2.0),
        cfg,
        n0: models::gaussian(8.0, 1.0),
    };
    for n in [256usize, 512, 1024, 2048, 4096] {
        let (grid, _) = build_grid(0.006f64.ln(), 3.0f64.ln(), n, &d).unwrap();
        let steps = if n <= 1024 { 10_000 } else { 4 * n };
        let t0 = std::time::Instant::now();
        let (eig, rep) = evolve_to_eigenpair(&m, grid, 200.0, steps).unwrap();
        let res = eigen_residual(&eig, &m).unwrap();
        println!(
            "n={n:5} steps={steps:6} lambda={:.8} converged={} change={:.3e} cfl={:.3} residual={:.3e} elapsed={:.2?}",
            eig.lambda, rep.converged, rep.profile_change, rep.cfl_rate, res.relative, t0.elapsed()
        );
        let vals = eig.n.real_values();
        let peak = vals.iter().cloned().fold(0.0f64, f64::max);
        let first = vals.iter().position(|&v| v > 1e-3 * peak).unwrap_or(0);
        let lastv = *vals.last().unwrap();
        println!(
            "        peak={:.4} first>1e-3peak at x={:.4} N(end)={:.3e} N(end)/peak={:.3e}",
            peak,
            (grid.z(first)).exp(),
            lastv,
            lastv / peak
        );
    }
}
