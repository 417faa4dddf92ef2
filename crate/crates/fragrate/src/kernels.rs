//! Transition probabilities P on (0, ρ(0)), the fragmentation kernel
//! 𝕂(x|y) = P(x ⊙ y⁻¹)·(ρ⁻¹)′(y) and its convolution operator, the
//! invertibility checkers, Paley–Wiener band projection, and spectral division
//! by the operator symbol k·F_{ρ,s}P − 1.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{self, IntegrabilityReport, Spectrum};
use crate::quad;
use crate::transport::{group_inverse, transport, Diffeomorphism, SampledFunction, ZGrid};

/// Pass threshold for the hypothesis scans; a hypothesis holds when the
/// sampled minimum of the symbol modulus exceeds this floor.
pub const HYPOTHESIS_THRESHOLD: f64 = 1e-8;

/// Density part of a transition probability, supported on [lo, hi] ⊂ (0, ρ(0)].
#[derive(Clone)]
pub struct DensityPart {
    pub lo: f64,
    pub hi: f64,
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl DensityPart {
    pub fn new(lo: f64, hi: f64, pdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DensityPart {
            lo,
            hi,
            pdf: Arc::new(pdf),
        }
    }

    /// Pointwise density; the support is treated as closed so that quadrature
    /// endpoint evaluations see the one-sided limit (a measure-zero choice).
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.lo || z > self.hi {
            0.0
        } else {
            (self.pdf)(z)
        }
    }
}

impl fmt::Debug for DensityPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityPart[{}, {}]", self.lo, self.hi)
    }
}

/// A transition probability: finitely many atoms and/or a density on (0, ρ(0)).
#[derive(Clone, Debug)]
pub struct FragmentationProbability {
    /// (location, weight) pairs; locations strictly inside (0, ρ(0)).
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<DensityPart>,
    pub name: String,
}

impl FragmentationProbability {
    pub fn dirac(loc: f64, name: &str) -> Self {
        FragmentationProbability {
            atoms: vec![(loc, 1.0)],
            density: None,
            name: name.to_string(),
        }
    }

    /// The equal-mitosis law δ_{1/2}; a fixed transport atom meaning "half the
    /// mother" only exists for ρ = exp, so the diffeomorphism is checked.
    pub fn equal_mitosis(d: &Diffeomorphism) -> Result<Self> {
        if d.name != "exp" {
            return Err(Error::config(
                "probability",
                format!(
                    "equal-mitosis requires the exp diffeomorphism (got `{}`); \
                     use dirac:<loc> for other transport groups",
                    d.name
                ),
            ));
        }
        Ok(Self::dirac(0.5, "equal-mitosis"))
    }

    /// Uniform density on (0, 1) — the classical self-similar law. Only usable
    /// where the integrability condition holds (s > 0 for ρ = exp).
    pub fn uniform_self_similar() -> Self {
        FragmentationProbability {
            atoms: Vec::new(),
            density: Some(DensityPart::new(0.0, 1.0, |_| 1.0)),
            name: "uniform-selfsimilar".to_string(),
        }
    }

    /// C^∞ bump density on (lo, hi), normalized to unit mass. All derivatives
    /// vanish at the support ends, so spectral discretizations of it converge
    /// faster than any power of the grid spacing.
    pub fn smooth_bump(lo: f64, hi: f64) -> Self {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let shape = move |z: f64| {
            let t = (z - mid) / half;
            if t.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - t * t)).exp()
            }
        };
        let mass = quad::simpson(&|z| Complex64::new(shape(z), 0.0), lo, hi, 1e-13)
            .value
            .re;
        let c = 1.0 / mass;
        FragmentationProbability {
            atoms: Vec::new(),
            density: Some(DensityPart::new(lo, hi, move |z| c * shape(z))),
            name: format!("bump:{lo}:{hi}"),
        }
    }

    pub fn by_name(name: &str, d: &Diffeomorphism) -> Result<Self> {
        if name == "equal-mitosis" {
            return Self::equal_mitosis(d);
        }
        if name == "uniform-selfsimilar" {
            return Ok(Self::uniform_self_similar());
        }
        if let Some(loc) = name.strip_prefix("dirac:") {
            let loc: f64 = loc.parse().map_err(|_| {
                Error::config("probability", format!("cannot parse dirac location `{loc}`"))
            })?;
            return Ok(Self::dirac(loc, name));
        }
        Err(Error::config(
            "probability",
            format!(
                "unknown probability `{name}` \
                 (built-ins: equal-mitosis, dirac:<loc>, uniform-selfsimilar)"
            ),
        ))
    }

    /// Total mass Σ weights + ∫ density, by quadrature for the density part.
    pub fn total_mass(&self) -> f64 {
        let atom_mass: f64 = self.atoms.iter().map(|&(_, w)| w).sum();
        let density_mass = self
            .density
            .as_ref()
            .map(|dens| {
                quad::simpson(
                    &|z| Complex64::new(dens.eval(z), 0.0),
                    dens.lo,
                    dens.hi,
                    1e-12,
                )
                .value
                .re
            })
            .unwrap_or(0.0);
        atom_mass + density_mass
    }
}

/// The fragmentation kernel configuration: probability, offspring count k ≥ 1,
/// diffeomorphism, and the weight parameter s of the working space.
#[derive(Clone, Debug)]
pub struct KernelConfig {
    pub p: FragmentationProbability,
    pub k: f64,
    pub d: Arc<Diffeomorphism>,
    pub s: f64,
}

impl KernelConfig {
    pub fn new(p: FragmentationProbability, k: f64, d: Arc<Diffeomorphism>, s: f64) -> Result<Self> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "offspring count k = {k} must be ≥ 1"
            )));
        }
        let upper = d.identity();
        for &(loc, w) in &p.atoms {
            if !(loc > 0.0 && loc < upper) {
                return Err(Error::InvalidArgument(format!(
                    "atom location {loc} outside (0, ρ(0)) = (0, {upper})"
                )));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("atom weight {w} must be > 0")));
            }
        }
        if let Some(dens) = &p.density {
            if !(dens.lo >= 0.0 && dens.lo < dens.hi && dens.hi <= upper) {
                return Err(Error::InvalidArgument(format!(
                    "density support [{}, {}] not inside (0, ρ(0)] = (0, {upper}]",
                    dens.lo, dens.hi
                )));
            }
        }
        let mass = p.total_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "probability mass {mass} differs from 1 by more than 1e-10"
            )));
        }
        Ok(KernelConfig { p, k, d, s })
    }
}

/// The frequency interval U on which the operator symbol is bounded away from
/// zero; realized as an interval because reconstructions live on compact bands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyBand {
    pub xi_lo: f64,
    pub xi_hi: f64,
}

impl FrequencyBand {
    pub fn new(xi_lo: f64, xi_hi: f64) -> Result<Self> {
        if !(xi_lo < xi_hi) {
            return Err(Error::InvalidArgument(format!(
                "band [{xi_lo}, {xi_hi}] is empty"
            )));
        }
        Ok(FrequencyBand { xi_lo, xi_hi })
    }

    /// Full FFT frequency range minus the top 10% as an anti-aliasing guard.
    pub fn default_for(grid: ZGrid) -> Self {
        let cut = 0.9 * grid.nyquist();
        FrequencyBand {
            xi_lo: -cut,
            xi_hi: cut,
        }
    }

    #[inline]
    pub fn contains(&self, xi: f64) -> bool {
        self.xi_lo <= xi && xi <= self.xi_hi
    }

    pub fn width(&self) -> f64 {
        self.xi_hi - self.xi_lo
    }
}

/// Pointwise kernel density 𝕂(x|y) = density_P(x ⊙ y⁻¹)·(ρ⁻¹)′(y). Only the
/// density part of P has pointwise values; purely atomic kernels act through
/// the convolution operator.
pub fn kernel_density(x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    let dens = cfg.p.density.as_ref().ok_or(Error::AtomicKernel)?;
    let ratio = transport(x, group_inverse(y, &cfg.d)?, &cfg.d)?;
    Ok(dens.eval(ratio) * cfg.d.d_rho_inv(y))
}

/// The operator K prepared on a grid: the transform of P is evaluated once at
/// the grid frequencies and K acts by spectral multiplication.
pub struct PreparedKernel {
    pub grid: ZGrid,
    pub cfg: KernelConfig,
    /// F_{ρ,s}P at the centered grid frequencies.
    pub p_hat: Vec<Complex64>,
}

impl PreparedKernel {
    pub fn new(cfg: &KernelConfig, grid: ZGrid) -> Result<Self> {
        let xi = grid.frequencies();
        let p_hat = fourier::probability_transform(&cfg.p, cfg.s, &xi, &cfg.d)?;
        Ok(PreparedKernel {
            grid,
            cfg: cfg.clone(),
            p_hat,
        })
    }

    /// Symbol of k·K − Id at grid frequency j.
    #[inline]
    pub fn symbol(&self, j: usize) -> Complex64 {
        self.cfg.k * self.p_hat[j] - 1.0
    }

    /// K(H) by the Fourier route: inverse(F_{ρ,s}P · forward(H)).
    pub fn apply(&self, h: &SampledFunction) -> Result<SampledFunction> {
        if h.grid != self.grid {
            return Err(Error::GridMismatch(
                "input grid differs from the prepared kernel grid".to_string(),
            ));
        }
        let spec = fourier::forward(h, self.cfg.s)?;
        let mut prod = spec.clone();
        for j in 0..self.grid.n {
            prod.values[j] = spec.values[j] * self.p_hat[j];
        }
        let mut out = fourier::inverse(&prod, &self.cfg.d)?;
        // the spectral product is a circular convolution; when boundary values
        // are significant the wrap-around stands in for zero extension
        let max = h.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        out.zero_extended = max > 0.0
            && (h.values[0].norm() > 1e-10 * max
                || h.values[self.grid.n - 1].norm() > 1e-10 * max);
        Ok(out)
    }
}

/// K(H) = ∫ 𝕂(x|y) H(y) dy via the Fourier route (the default).
pub fn apply_kernel(h: &SampledFunction, cfg: &KernelConfig) -> Result<SampledFunction> {
    PreparedKernel::new(cfg, h.grid)?.apply(h)
}

/// K(H) by direct change of variables in the Haar coordinate: atom shifts with
/// linear interpolation and a discrete convolution for the density part, with
/// zero extension outside the grid. Used to cross-check the Fourier route.
pub fn apply_kernel_direct(h: &SampledFunction, cfg: &KernelConfig) -> Result<SampledFunction> {
    let grid = h.grid;
    let d = &cfg.d;
    let n = grid.n;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut clipped = false;

    // H(ρ(z - u_a)) with weight w_a·(ρ⁻¹)'(loc_a); u_a = ρ⁻¹(loc_a) < 0
    for &(loc, w) in &cfg.p.atoms {
        let u = d.rho_inv(loc);
        let weight = w * d.d_rho_inv(loc);
        let shift = -u / grid.dz; // positive fractional index offset
        for i in 0..n {
            let t = i as f64 + shift;
            let t0 = t.floor();
            let frac = t - t0;
            let j0 = t0 as isize;
            let v0 = if (0..n as isize).contains(&j0) {
                h.values[j0 as usize]
            } else {
                clipped = true;
                Complex64::new(0.0, 0.0)
            };
            let v1 = if (0..n as isize).contains(&(j0 + 1)) {
                h.values[(j0 + 1) as usize]
            } else {
                clipped = true;
                Complex64::new(0.0, 0.0)
            };
            out[i] += weight * (v0 * (1.0 - frac) + v1 * frac);
        }
    }

    if let Some(dens) = &cfg.p.density {
        // q(w) = density(ρ(w)) sampled on grid differences; K(H)(ρ(z_i)) =
        // dz Σ_k q(k·dz) H_{i−k}
        let u_lo = if dens.lo > 0.0 {
            d.rho_inv(dens.lo)
        } else {
            grid.z_min - grid.z_max // everything reachable on the grid
        };
        let u_hi = d.rho_inv(dens.hi);
        let k_min = (u_lo / grid.dz).floor() as isize;
        let k_max = (u_hi / grid.dz).ceil() as isize;
        let q: Vec<f64> = (k_min..=k_max)
            .map(|k| dens.eval(d.rho(k as f64 * grid.dz)))
            .collect();
        for i in 0..n as isize {
            let mut acc = Complex64::new(0.0, 0.0);
            for (qi, k) in (k_min..=k_max).enumerate() {
                if q[qi] == 0.0 {
                    continue;
                }
                let j = i - k;
                if (0..n as isize).contains(&j) {
                    acc += q[qi] * h.values[j as usize];
                } else {
                    clipped = true;
                }
            }
            out[i as usize] += acc * grid.dz;
        }
    }

    Ok(SampledFunction {
        grid,
        values: out,
        diffeo: d.clone(),
        zero_extended: clipped,
    })
}

/// Integrability of P in the weighted space: pass/fail plus the integral value.
pub fn check_integrability(
    p: &FragmentationProbability,
    s: f64,
    d: &Arc<Diffeomorphism>,
) -> IntegrabilityReport {
    fourier::check_integrability_value(p, s, d)
}

/// Outcome of a symbol-modulus scan over a band.
#[derive(Clone, Copy, Debug)]
pub struct ScanResult {
    pub min: f64,
    pub argmin_xi: f64,
    pub argmin_alpha: f64,
}

fn shifted_symbol_modulus(p_hat: Complex64, k: f64, xi: f64, j: f64, alpha: f64) -> f64 {
    (k * p_hat - 1.0 + Complex64::new(j, 2.0 * PI * xi) * alpha).norm()
}

fn scan_symbol(
    cfg: &KernelConfig,
    band: FrequencyBand,
    n_samples: usize,
    alphas: &[f64],
    j: f64,
) -> Result<ScanResult> {
    let n = n_samples.max(3);
    let xi: Vec<f64> = (0..n)
        .map(|t| band.xi_lo + t as f64 * band.width() / (n - 1) as f64)
        .collect();
    let p_hat = fourier::probability_transform(&cfg.p, cfg.s, &xi, &cfg.d)?;

    let mut best = ScanResult {
        min: f64::INFINITY,
        argmin_xi: xi[0],
        argmin_alpha: alphas[0],
    };
    for (t, &fx) in xi.iter().enumerate() {
        for &a in alphas {
            let m = shifted_symbol_modulus(p_hat[t], cfg.k, fx, j, a);
            if m < best.min {
                best = ScanResult {
                    min: m,
                    argmin_xi: fx,
                    argmin_alpha: a,
                };
            }
        }
    }

    // golden-section refinement around the coarse argmin: a uniform scan alone
    // cannot resolve isolated zeros of the symbol to the pass threshold
    let spacing = band.width() / (n - 1) as f64;
    let mut lo = (best.argmin_xi - spacing).max(band.xi_lo);
    let mut hi = (best.argmin_xi + spacing).min(band.xi_hi);
    let a = best.argmin_alpha;
    let eval = |f: f64| -> Result<f64> {
        let ph = fourier::probability_transform(&cfg.p, cfg.s, &[f], &cfg.d)?;
        Ok(shifted_symbol_modulus(ph[0], cfg.k, f, j, a))
    };
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..70 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (fr, xr) = if f1 <= f2 { (f1, x1) } else { (f2, x2) };
    if fr < best.min {
        best.min = fr;
        best.argmin_xi = xr;
    }
    Ok(best)
}

/// min over the band of |k·F_{ρ,s}P(ξ) − 1| (the invertibility hypothesis for
/// the operator k·K − Id), from a uniform scan plus local refinement.
pub fn check_hypothesis_lower_bound(
    cfg: &KernelConfig,
    band: FrequencyBand,
    n_samples: usize,
) -> Result<ScanResult> {
    scan_symbol(cfg, band, n_samples, &[0.0], 0.0)
}

/// min over ξ in the band and α in [0, alpha_max] of
/// |k·F_{ρ,s}P(ξ) − 1 + (2πiξ + j)α| (the quasi-reversibility hypothesis).
pub fn check_hypothesis_qr(
    cfg: &KernelConfig,
    band: FrequencyBand,
    j: f64,
    alpha_max: f64,
    n_samples: usize,
) -> Result<ScanResult> {
    let alphas: Vec<f64> = if alpha_max <= 0.0 {
        vec![0.0]
    } else {
        let n = n_samples.max(2);
        (0..n)
            .map(|t| t as f64 * alpha_max / (n - 1) as f64)
            .collect()
    };
    scan_symbol(cfg, band, n_samples, &alphas, j)
}

/// Default scan density: 4 samples per FFT frequency bin, clamped to a
/// practical range.
pub fn default_scan_samples(grid: ZGrid, band: FrequencyBand) -> usize {
    let per_bin = 4.0 * band.width() / grid.dxi();
    (per_bin.ceil() as usize).clamp(64, 20_000)
}

/// Projection onto the Paley–Wiener space of the band: the spectrum is zeroed
/// outside [xi_lo, xi_hi] (membership of the bin center) and inverted back.
pub fn band_project(f: &SampledFunction, band: FrequencyBand, s: f64) -> Result<SampledFunction> {
    let mut spec = fourier::forward(f, s)?;
    for j in 0..spec.values.len() {
        if !band.contains(spec.xi[j]) {
            spec.values[j] = Complex64::new(0.0, 0.0);
        }
    }
    fourier::inverse(&spec, &f.diffeo)
}

/// Band-restricted spectrum of rhs divided by the symbol k·F_{ρ,s}P − 1.
/// Requires the invertibility hypothesis on the band; the inverse of k·K − Id
/// restricted to the Paley–Wiener space.
pub fn spectral_divide(
    rhs: &SampledFunction,
    cfg: &KernelConfig,
    band: FrequencyBand,
) -> Result<SampledFunction> {
    let scan = check_hypothesis_lower_bound(cfg, band, default_scan_samples(rhs.grid, band))?;
    if scan.min <= HYPOTHESIS_THRESHOLD {
        return Err(Error::HypothesisFailure {
            xi: scan.argmin_xi,
            min: scan.min,
            threshold: HYPOTHESIS_THRESHOLD,
        });
    }
    let prepared = PreparedKernel::new(cfg, rhs.grid)?;
    let spec = fourier::forward(rhs, cfg.s)?;
    let mut out = Spectrum::zeros(rhs.grid, cfg.s);
    for j in 0..rhs.grid.n {
        if band.contains(spec.xi[j]) {
            out.values[j] = spec.values[j] / prepared.symbol(j);
        }
    }
    fourier::inverse(&out, &rhs.diffeo)
}
