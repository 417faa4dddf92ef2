//! Scratch probe for reconstruction error levels across noise levels and grids.

use fragrate::direct::{evolve_to_eigenpair, models, ModelCoefficients};
use fragrate::inverse::{optimal_alpha, reconstruct, FilterKind, FilterSpec};
use fragrate::kernels::{FragmentationProbability, FrequencyBand, KernelConfig};
use fragrate::transport::{build_grid, Diffeomorphism, SampledFunction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn l2_error_x(f: &SampledFunction, g: &SampledFunction) -> f64 {
    let grid = f.grid;
    let d = &f.diffeo;
    let mut acc = 0.0;
    for i in 0..grid.n {
        let x0 = d.rho(grid.z(i));
        let x1 = d.rho(grid.z(i) + grid.dz);
        acc += (f.values[i] - g.values[i]).norm_sqr() * (x1 - x0);
    }
    acc.sqrt()
}

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
        cfg: cfg.clone(),
        n0: models::gaussian(8.0, 1.0),
    };

    for (n, t_max, steps) in [
        (512usize, 200.0f64, 10_000usize),
        (1024, 400.0, 20_000),
        (2048, 400.0, 20_000),
        (4096, 400.0, 40_000),
    ] {
        let (grid, x) = build_grid(0.006f64.ln(), 3.0f64.ln(), n, &d).unwrap();
        let t0 = std::time::Instant::now();
        let (eig, rep) = evolve_to_eigenpair(&m, grid, t_max, steps).unwrap();
        println!(
            "== n={n} t_max={t_max} steps={steps}: lambda={:.8} converged={} change={:.2e} ({:.2?})",
            eig.lambda, rep.converged, rep.profile_change, t0.elapsed()
        );

        // ground truth H = B·N with analytic B
        let mut h_true = SampledFunction::zeros(grid, d.clone());
        for i in 0..grid.n {
            h_true.values[i] = eig.n.values[i] * (m.b)(x[i]);
        }
        let h_norm = l2_error_x(&h_true, &SampledFunction::zeros(grid, d.clone()));
        let band = FrequencyBand::default_for(grid);

        // noiseless floor at tiny alpha
        let spec = FilterSpec::new(FilterKind::Tikhonov, 1e-4).unwrap();
        let rec = reconstruct(&eig.n, eig.lambda, &m.g, &spec, &cfg, band).unwrap();
        let floor = l2_error_x(&rec.h, &h_true);
        println!(
            "   noiseless tik(1e-4): err={:.4e} rel={:.4e} (‖H‖={:.4e})",
            floor,
            floor / h_norm,
            h_norm
        );

        // noisy errors per (eps, filter), median of 5 seeds
        for eps in [1e-4, 1e-3, 1e-2, 1e-1, 0.5] {
            for kind in [FilterKind::Tikhonov, FilterKind::Landweber] {
                let alpha = optimal_alpha(kind, eps, 10.0).unwrap();
                let mut errs = Vec::new();
                for seed in 0..5u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                    let mut noisy = eig.n.clone();
                    for i in 0..grid.n {
                        let u: f64 = rng.gen_range(-eps..=eps);
                        noisy.values[i] =
                            Complex64::new((noisy.values[i].re + u).max(0.0), 0.0);
                    }
                    let lam_eps = (eig.lambda + rng.gen_range(-eps..=eps)).max(0.0);
                    let spec = FilterSpec::new(kind, alpha).unwrap().with_m(10.0);
                    match reconstruct(&noisy, lam_eps, &m.g, &spec, &cfg, band) {
                        Ok(rec) => errs.push(l2_error_x(&rec.h, &h_true)),
                        Err(e) => println!("      failed: {e}"),
                    }
                }
                errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                println!(
                    "   eps={eps:8.0e} {:22} alpha={alpha:9.4} median_err={:.4e} rel={:.4e}",
                    kind.name(),
                    errs[errs.len() / 2],
                    errs[errs.len() / 2] / h_norm
                );
            }
        }
    }
}
