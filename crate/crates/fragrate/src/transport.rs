//! The transport group (ℝ⁺, ⊙) induced by an increasing diffeomorphism ρ: ℝ → ℝ⁺,
//! its Haar weight (ρ⁻¹)′, and the z ↔ x change of variables used everywhere else.
//!
//! All functions are sampled on the image under ρ of a uniform grid in the Haar
//! coordinate z = ρ⁻¹(x), so that the group Fourier transform becomes an ordinary
//! discrete Fourier transform.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An increasing diffeomorphism ρ: ℝ → ℝ⁺ together with its inverse and the
/// first two derivatives of the inverse. (ρ⁻¹)′ is the Haar density of the
/// group (ℝ⁺, ⊙) with respect to Lebesgue measure.
#[derive(Clone)]
pub struct Diffeomorphism {
    pub name: String,
    rho: ScalarMap,
    rho_inv: ScalarMap,
    d_rho_inv: ScalarMap,
    d2_rho_inv: ScalarMap,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeomorphism")
            .field("name", &self.name)
            .finish()
    }
}

impl Diffeomorphism {
    /// ρ = exp: the group is (ℝ⁺, ·) and the Haar measure is dx/x.
    pub fn exp() -> Arc<Self> {
        Arc::new(Diffeomorphism {
            name: "exp".to_string(),
            rho: Arc::new(f64::exp),
            rho_inv: Arc::new(f64::ln),
            d_rho_inv: Arc::new(|x| 1.0 / x),
            d2_rho_inv: Arc::new(|x| -1.0 / (x * x)),
        })
    }

    /// ρ(z) = ln(1 + eᶻ), ρ⁻¹(x) = ln(eˣ − 1).
    pub fn softplus() -> Arc<Self> {
        Arc::new(Diffeomorphism {
            name: "softplus".to_string(),
            rho: Arc::new(|z| {
                // stable for large z: ln(1+e^z) = z + ln(1+e^-z)
                if z > 30.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                }
            }),
            rho_inv: Arc::new(|x| x.exp_m1().ln()),
            d_rho_inv: Arc::new(|x| x.exp() / x.exp_m1()),
            d2_rho_inv: Arc::new(|x| {
                let em1 = x.exp_m1();
                -x.exp() / (em1 * em1)
            }),
        })
    }

    /// A user-supplied diffeomorphism. Callers must provide all four maps;
    /// `build_grid` validates them by finite differences on the sampled grid.
    pub fn custom(
        name: &str,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d_rho_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2_rho_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Diffeomorphism {
            name: name.to_string(),
            rho: Arc::new(rho),
            rho_inv: Arc::new(rho_inv),
            d_rho_inv: Arc::new(d_rho_inv),
            d2_rho_inv: Arc::new(d2_rho_inv),
        })
    }

    pub fn by_name(name: &str) -> Result<Arc<Self>> {
        match name {
            "exp" => Ok(Self::exp()),
            "softplus" => Ok(Self::softplus()),
            other => Err(Error::config(
                "diffeo",
                format!("unknown diffeomorphism `{other}` (built-ins: exp, softplus)"),
            )),
        }
    }

    #[inline]
    pub fn rho(&self, z: f64) -> f64 {
        (self.rho)(z)
    }

    #[inline]
    pub fn rho_inv(&self, x: f64) -> f64 {
        (self.rho_inv)(x)
    }

    /// Haar density (ρ⁻¹)′(x) > 0.
    #[inline]
    pub fn d_rho_inv(&self, x: f64) -> f64 {
        (self.d_rho_inv)(x)
    }

    #[inline]
    pub fn d2_rho_inv(&self, x: f64) -> f64 {
        (self.d2_rho_inv)(x)
    }

    /// Group identity ρ(0).
    #[inline]
    pub fn identity(&self) -> f64 {
        self.rho(0.0)
    }

    /// Validates the four maps against each other on the given z-samples:
    /// monotonicity, inverse round-trip to 1e−12 relative, positivity of the
    /// Haar density, and both derivatives against central finite differences.
    pub fn validate_on(&self, z_samples: &[f64]) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, &z) in z_samples.iter().enumerate() {
            let x = self.rho(z);
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::Domain(format!(
                    "ρ({z}) = {x} is not a positive finite number (diffeo `{}`)",
                    self.name
                )));
            }
            if x <= prev {
                return Err(Error::Domain(format!(
                    "ρ is not strictly increasing at sample {i} (diffeo `{}`)",
                    self.name
                )));
            }
            prev = x;

            let back = self.rho_inv(x);
            let scale = z.abs().max(1.0);
            if (back - z).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!(
                    "ρ⁻¹(ρ({z})) = {back}, round-trip exceeds 1e-12 (diffeo `{}`)",
                    self.name
                )));
            }

            let w = self.d_rho_inv(x);
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!(
                    "(ρ⁻¹)′({x}) = {w} is not positive (diffeo `{}`)",
                    self.name
                )));
            }

            // central finite difference of ρ⁻¹, relative tolerance 1e-6
            let h = 1e-5 * x.abs().max(1e-8);
            if x - h > 0.0 {
                let fd = (self.rho_inv(x + h) - self.rho_inv(x - h)) / (2.0 * h);
                if (fd - w).abs() > 1e-6 * w.abs().max(fd.abs()) {
                    return Err(Error::Domain(format!(
                        "(ρ⁻¹)′({x}) = {w} disagrees with finite difference {fd} (diffeo `{}`)",
                        self.name
                    )));
                }
                let fd2 = (self.d_rho_inv(x + h) - self.d_rho_inv(x - h)) / (2.0 * h);
                let w2 = self.d2_rho_inv(x);
                let scale2 = w2.abs().max(fd2.abs()).max(1e-12);
                if (fd2 - w2).abs() > 1e-4 * scale2 {
                    return Err(Error::Domain(format!(
                        "(ρ⁻¹)″({x}) = {w2} disagrees with finite difference {fd2} (diffeo `{}`)",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Uniform grid in the Haar coordinate z, with n a power of two.
/// The grid covers [z_min, z_max) with left endpoints z_i = z_min + i·dz,
/// matching the left-rectangle quadrature used throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub n: usize,
    pub dz: f64,
}

impl ZGrid {
    pub fn new(z_min: f64, z_max: f64, n: usize) -> Result<Self> {
        if !(z_min < z_max) {
            return Err(Error::InvalidArgument(format!(
                "grid.z_min ({z_min}) must be strictly below grid.z_max ({z_max})"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid.n = {n} must be a power of two, at least 8"
            )));
        }
        Ok(ZGrid {
            z_min,
            z_max,
            n,
            dz: (z_max - z_min) / n as f64,
        })
    }

    #[inline]
    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz
    }

    pub fn z_points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z(i)).collect()
    }

    /// Frequency spacing of the conjugate grid, 1/(n·dz).
    #[inline]
    pub fn dxi(&self) -> f64 {
        1.0 / (self.n as f64 * self.dz)
    }

    /// Centered frequency layout: ξ_j = (j − n/2)/(n·dz), increasing.
    pub fn frequencies(&self) -> Vec<f64> {
        let half = (self.n / 2) as i64;
        (0..self.n as i64)
            .map(|j| (j - half) as f64 * self.dxi())
            .collect()
    }

    /// Nyquist frequency 1/(2dz); the centered grid spans [−Nyq, Nyq).
    #[inline]
    pub fn nyquist(&self) -> f64 {
        0.5 / self.dz
    }
}

/// Samples of a (complex-valued) function of mass x on the image of a ZGrid.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    pub grid: ZGrid,
    pub values: Vec<Complex64>,
    pub diffeo: Arc<Diffeomorphism>,
    /// Set when an operation had to extend the function by zero outside the grid
    /// while boundary values were not negligible.
    pub zero_extended: bool,
}

impl SampledFunction {
    pub fn new(grid: ZGrid, values: Vec<Complex64>, diffeo: Arc<Diffeomorphism>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InvalidArgument(format!(
                "value count {} does not match grid.n = {}",
                values.len(),
                grid.n
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    context: "sampled function".to_string(),
                });
            }
        }
        Ok(SampledFunction {
            grid,
            values,
            diffeo,
            zero_extended: false,
        })
    }

    pub fn zeros(grid: ZGrid, diffeo: Arc<Diffeomorphism>) -> Self {
        SampledFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n],
            diffeo,
            zero_extended: false,
        }
    }

    /// Mass-coordinate points x_i = ρ(z_i).
    pub fn x_points(&self) -> Vec<f64> {
        (0..self.grid.n)
            .map(|i| self.diffeo.rho(self.grid.z(i)))
            .collect()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Pointwise product with a real-valued map of x, returning a new function.
    pub fn scaled_by_map(&self, f: impl Fn(f64) -> f64) -> SampledFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f(self.diffeo.rho(self.grid.z(i))))
            .collect();
        SampledFunction {
            grid: self.grid,
            values,
            diffeo: self.diffeo.clone(),
            zero_extended: self.zero_extended,
        }
    }

    /// Discrete L²_{ρ,s} norm: (Σ |f_i|² e^{2πs·z_i} dz)^{1/2}.
    pub fn weighted_l2_norm(&self, s: f64) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.norm_sqr() * (2.0 * std::f64::consts::PI * s * self.grid.z(i)).exp())
            .sum();
        (sum * self.grid.dz).sqrt()
    }
}

/// a ⊙ b = ρ(ρ⁻¹(a) + ρ⁻¹(b)). Commutative and associative up to rounding.
pub fn transport(a: f64, b: f64, d: &Diffeomorphism) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("transport: a = {a} must be > 0")));
    }
    if !(b > 0.0) {
        return Err(Error::Domain(format!("transport: b = {b} must be > 0")));
    }
    Ok(d.rho(d.rho_inv(a) + d.rho_inv(b)))
}

/// Group inverse a⁻¹ = ρ(−ρ⁻¹(a)); transport(a, a⁻¹) = ρ(0).
pub fn group_inverse(a: f64, d: &Diffeomorphism) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!(
            "group_inverse: a = {a} must be > 0"
        )));
    }
    Ok(d.rho(-d.rho_inv(a)))
}

/// Builds the uniform z-grid and its strictly increasing image x_i = ρ(z_i),
/// validating the diffeomorphism on the grid.
pub fn build_grid(
    z_min: f64,
    z_max: f64,
    n: usize,
    d: &Arc<Diffeomorphism>,
) -> Result<(ZGrid, Vec<f64>)> {
    let grid = ZGrid::new(z_min, z_max, n)?;
    let z_points = grid.z_points();
    d.validate_on(&z_points)?;
    let x: Vec<f64> = z_points.iter().map(|&z| d.rho(z)).collect();
    Ok((grid, x))
}

/// Samples a scalar map of mass on the grid: values_i = f(ρ(z_i)).
pub fn sample(
    f: impl Fn(f64) -> f64,
    grid: ZGrid,
    d: &Arc<Diffeomorphism>,
) -> Result<SampledFunction> {
    let mut values = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let x = d.rho(grid.z(i));
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: format!("sampling map at x = {x}"),
            });
        }
        values.push(Complex64::new(v, 0.0));
    }
    Ok(SampledFunction {
        grid,
        values,
        diffeo: d.clone(),
        zero_extended: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exp_transport_is_multiplication() {
        let d = Diffeomorphism::exp();
        assert_relative_eq!(transport(2.0, 3.0, &d).unwrap(), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn identity_is_neutral() {
        for d in [Diffeomorphism::exp(), Diffeomorphism::softplus()] {
            let e = d.identity();
            for a in [0.3, 1.0, 2.7] {
                assert_relative_eq!(transport(a, e, &d).unwrap(), a, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn softplus_transport_matches_two_step_evaluation() {
        let d = Diffeomorphism::softplus();
        // oracle: direct evaluation ρ(ρ⁻¹(1)+ρ⁻¹(1)) with ρ⁻¹(y) = ln(e^y − 1)
        let u = (1.0f64.exp() - 1.0).ln();
        let expected = (1.0 + (2.0 * u).exp()).ln();
        assert_relative_eq!(
            transport(1.0, 1.0, &d).unwrap(),
            expected,
            max_relative = 1e-14
        );
    }

    #[test]
    fn transport_rejects_nonpositive() {
        let d = Diffeomorphism::exp();
        assert!(transport(-1.0, 2.0, &d).is_err());
        assert!(transport(2.0, 0.0, &d).is_err());
        assert!(group_inverse(0.0, &d).is_err());
    }

    #[test]
    fn exp_inverse_is_reciprocal() {
        let d = Diffeomorphism::exp();
        assert_relative_eq!(group_inverse(2.0, &d).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn identity_is_self_inverse() {
        for d in [Diffeomorphism::exp(), Diffeomorphism::softplus()] {
            let e = d.identity();
            assert_relative_eq!(group_inverse(e, &d).unwrap(), e, max_relative = 1e-12);
        }
    }

    #[test]
    fn inverse_is_involution_and_cancels() {
        let d = Diffeomorphism::softplus();
        let a = 1.3;
        let inv = group_inverse(a, &d).unwrap();
        assert_relative_eq!(group_inverse(inv, &d).unwrap(), a, epsilon = 1e-10);
        let e = d.identity();
        assert!((transport(a, inv, &d).unwrap() - e).abs() < 1e-10);
    }

    #[test]
    fn grid_of_eight_points_is_exponential() {
        let d = Diffeomorphism::exp();
        let (grid, x) = build_grid(0.0, 1.0, 8, &d).unwrap();
        assert_eq!(grid.n, 8);
        for (i, &xi) in x.iter().enumerate() {
            assert_relative_eq!(xi, (i as f64 / 8.0).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn grid_covers_reconstruction_window() {
        let d = Diffeomorphism::exp();
        let (_, x) = build_grid(0.006f64.ln(), 3.0f64.ln(), 512, &d).unwrap();
        assert_relative_eq!(x[0], 0.006, max_relative = 1e-12);
        assert!(*x.last().unwrap() < 3.0);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_domain_is_rejected() {
        let d = Diffeomorphism::exp();
        assert!(build_grid(1.0, 1.0, 8, &d).is_err());
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        let d = Diffeomorphism::exp();
        assert!(build_grid(0.0, 1.0, 500, &d).is_err());
        assert!(build_grid(0.0, 1.0, 4, &d).is_err());
    }

    #[test]
    fn sample_constant_and_identity_maps() {
        let d = Diffeomorphism::exp();
        let (grid, x) = build_grid(-1.0, 1.0, 16, &d).unwrap();
        let ones = sample(|_| 1.0, grid, &d).unwrap();
        assert!(ones.values.iter().all(|v| v.re == 1.0 && v.im == 0.0));
        let idm = sample(|x| x, grid, &d).unwrap();
        for i in 0..grid.n {
            assert_relative_eq!(idm.values[i].re, x[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn sample_rejects_non_finite_with_index() {
        let d = Diffeomorphism::exp();
        let (grid, _) = build_grid(0.0, 1.0, 8, &d).unwrap();
        let err = sample(|x| if x > 1.2 { f64::NAN } else { 1.0 }, grid, &d).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert!(index > 0),
            other => panic!("expected NonFinite, got {other}"),
        }
    }

    #[test]
    fn growth_rate_samples_vanish_at_ends() {
        // g(x) = x e^{-(x+1/x)} on the reconstruction window
        let d = Diffeomorphism::exp();
        let (grid, _) = build_grid(0.006f64.ln(), 3.0f64.ln(), 512, &d).unwrap();
        let g = sample(|x| x * (-(x + 1.0 / x)).exp(), grid, &d).unwrap();
        let vals = g.real_values();
        let max = vals.iter().cloned().fold(0.0f64, f64::max);
        assert!(max > 0.0);
        assert!(vals.iter().all(|&v| v >= 0.0));
        assert!(vals[0] < 1e-12 * max);
        assert!(*vals.last().unwrap() < max);
    }

    #[test]
    fn haar_invariance_under_translation() {
        // midpoint Riemann sum of f(x ⊙ b) d_rho_inv(x) dx equals that of f
        // to 1e-4 relative on a sufficiently wide grid
        for d in [Diffeomorphism::exp(), Diffeomorphism::softplus()] {
            let (grid, _) = build_grid(-14.0, 14.0, 2048, &d).unwrap();
            let f = |x: f64| {
                let z = d.rho_inv(x);
                (-z * z).exp()
            };
            let b = d.rho(0.7);
            let mut plain = 0.0;
            let mut shifted = 0.0;
            for i in 0..grid.n {
                let x_mid = d.rho(grid.z(i) + 0.5 * grid.dz);
                let w = d.d_rho_inv(x_mid);
                let dx = d.rho(grid.z(i) + grid.dz) - d.rho(grid.z(i));
                plain += f(x_mid) * w * dx;
                shifted += f(transport(x_mid, b, &d).unwrap()) * w * dx;
            }
            assert_relative_eq!(shifted, plain, max_relative = 1e-4);
        }
    }

    #[test]
    fn builtin_diffeomorphisms_validate() {
        for d in [Diffeomorphism::exp(), Diffeomorphism::softplus()] {
            let (grid, _) = build_grid(-6.0, 4.0, 256, &d).unwrap();
            d.validate_on(&grid.z_points()).unwrap();
        }
    }

    #[test]
    fn bad_custom_derivative_is_caught() {
        let d = Diffeomorphism::custom(
            "broken",
            f64::exp,
            f64::ln,
            |x| 1.1 / x, // wrong first derivative
            |x| -1.0 / (x * x),
        );
        assert!(build_grid(0.0, 1.0, 16, &d).is_err());
    }

    proptest! {
        #[test]
        fn group_axioms_hold_numerically(
            za in -4.0f64..4.0,
            zb in -4.0f64..4.0,
            zc in -4.0f64..4.0,
            softplus in proptest::bool::ANY,
        ) {
            let d = if softplus { Diffeomorphism::softplus() } else { Diffeomorphism::exp() };
            let (a, b, c) = (d.rho(za), d.rho(zb), d.rho(zc));
            let ab_c = transport(transport(a, b, &d).unwrap(), c, &d).unwrap();
            let a_bc = transport(a, transport(b, c, &d).unwrap(), &d).unwrap();
            let scale = ab_c.abs().max(1.0);
            prop_assert!((ab_c - a_bc).abs() / scale <= 1e-9);
            let ab = transport(a, b, &d).unwrap();
            let ba = transport(b, a, &d).unwrap();
            prop_assert!((ab - ba).abs() / scale <= 1e-9);
        }
    }
}
