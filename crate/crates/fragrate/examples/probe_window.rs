//! Coupled-seed sweep study at the candidate default grid.
use fragrate::direct::{evolve_to_eigenpair, models, ModelCoefficients};
use fragrate::inverse::{optimal_alpha, reconstruct, FilterKind, FilterSpec};
use fragrate::kernels::{FragmentationProbability, FrequencyBand, KernelConfig};
use fragrate::transport::{build_grid, Diffeomorphism, SampledFunction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn l2_error_window(f: &SampledFunction, g: &SampledFunction, x_lo: f64, x_hi: f64) -> f64 {
    let grid = f.grid;
    let d = &f.diffeo;
    let mut acc = 0.0;
    for i in 0..grid.n {
        let x0 = d.rho(grid.z(i));
        if x0 < x_lo || x0 > x_hi { continue; }
        let x1 = d.rho(grid.z(i) + grid.dz);
        acc += (f.values[i] - g.values[i]).norm_sqr() * (x1 - x0);
    }
    acc.sqrt()
}

fn main() {
    let d = Diffeomorphism::exp();
    let cfg = KernelConfig::new(FragmentationProbability::equal_mitosis(&d).unwrap(), 2.0, d.clone(), 0.0).unwrap();
    let m = ModelCoefficients { g: models::pow_exp(1.0), b: models::pow_exp(2.0), cfg: cfg.clone(), n0: models::gaussian(8.0, 1.0) };

    let (xmax, n, t_max, steps) = (5.0f64, 8192usize, 400.0f64, 68_000usize);
    let (grid, x) = build_grid(0.006f64.ln(), xmax.ln(), n, &d).unwrap();
    let t0 = std::time::Instant::now();
    let (eig, rep) = evolve_to_eigenpair(&m, grid, t_max, steps).unwrap();
    println!("== xmax={xmax} n={n} steps={steps}: lambda={:.8} conv={} ({:.1?})", eig.lambda, rep.converged, t0.elapsed());

    let mut h_true = SampledFunction::zeros(grid, d.clone());
    for i in 0..grid.n { h_true.values[i] = eig.n.values[i] * (m.b)(x[i]); }
    let band = FrequencyBand::default_for(grid);

    for set in 0..4u64 {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for eps in [1e-4f64, 1e-3, 1e-2, 1e-1, 0.5] {
            let mut med = [0.0f64; 2];
            for (ki, kind) in [FilterKind::Tikhonov, FilterKind::Landweber].into_iter().enumerate() {
                let alpha = optimal_alpha(kind, eps, 10.0).unwrap();
                let mut errs = Vec::new();
                for seed in 0..5u64 {
                    // unit noise field scaled by eps: same seed => same field across eps
                    let mut rng = ChaCha8Rng::seed_from_u64(9999 * set + 100 + seed);
                    let mut noisy = eig.n.clone();
                    for i in 0..grid.n {
                        let u: f64 = rng.gen_range(-1.0..=1.0);
                        noisy.values[i] = Complex64::new((noisy.values[i].re + eps * u).max(0.0), 0.0);
                    }
                    let lam_eps = (eig.lambda + eps * rng.gen_range(-1.0..=1.0)).max(0.0);
                    let fspec = FilterSpec::new(kind, alpha).unwrap().with_m(10.0);
                    let rec = reconstruct(&noisy, lam_eps, &m.g, &fspec, &cfg, band).unwrap();
                    errs.push(l2_error_window(&rec.h, &h_true, 0.0, 3.0));
                }
                errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                med[ki] = errs[2];
            }
            rows.push((eps, med[0], med[1]));
        }
        let tik_slope = (rows[1].1 / rows[0].1).ln() / 10f64.ln();
        let lw_slope = (rows[1].2 / rows[0].2).ln() / 10f64.ln();
        let ordering = rows.iter().take(2).all(|r| r.2 < r.1);
        println!("   set {set}: slopes tik={tik_slope:.3} lw={lw_slope:.3} lw>tik={} ordering(eps<=1e-3)={}",
            lw_slope > tik_slope, ordering);
        for r in &rows { println!("      eps={:8.0e} tik={:.3e} lw={:.3e}", r.0, r.1, r.2); }
    }
}
