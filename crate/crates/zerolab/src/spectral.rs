//! Symmetric spectral measures and everything derived from them: covariance
//! functions and their analytic continuation into the strip, exponential
//! moments, Kac-Rice intensities, and the summability diagnostics used to
//! decide whether a lattice of sampling points decorrelates fast enough.

use crate::error::{Error, Result};
use crate::quad::{adaptive_segmented, Quad};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

const TAIL_LOG_CUT: f64 = -42.0; // e^-42 ~ 5.7e-19, below f64 noise for O(1) integrands

/// sinh(u)/u, even and entire; series near the origin.
pub(crate) fn phi(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 + u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sinh() / u
    }
}

fn sinc_complex(u: Complex64) -> Complex64 {
    if u.norm() < 1e-3 {
        let u2 = u * u;
        Complex64::new(1.0, 0.0) - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

fn sinc_d1(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        -u / 3.0 + u * u2 / 30.0
    } else {
        (u * u.cos() - u.sin()) / (u * u)
    }
}

fn sinc_d2(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        -1.0 / 3.0 + u2 / 10.0 - u2 * u2 / 168.0
    } else {
        -u.sin() / u - 2.0 * u.cos() / (u * u) + 2.0 * u.sin() / (u * u * u)
    }
}

/// The symmetric spectral measures the laboratory knows how to handle.
///
/// All are probability measures on the line (total mass 1), so the covariance
/// at lag zero is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectralFamily {
    /// Uniform density 1/(2K) on [-K, K].
    Band { half_width: f64 },
    /// Standard normal density.
    Gaussian,
    /// Density exp(-|lambda|)/2.
    BilateralExponential,
    /// Piecewise-linear density on a symmetric grid, normalized to mass 1.
    Tabulated {
        lambda: Vec<f64>,
        density: Vec<f64>,
    },
}

/// Tolerances for the numeric spectral integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub family: SpectralFamily,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl fmt::Display for SpectralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            SpectralFamily::Band { half_width } => write!(f, "band({half_width})"),
            SpectralFamily::Gaussian => write!(f, "gaussian"),
            SpectralFamily::BilateralExponential => write!(f, "bilateral_exponential"),
            SpectralFamily::Tabulated { lambda, .. } => write!(f, "tabulated({})", lambda.len()),
        }
    }
}

impl SpectralModel {
    pub fn band(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidModel(format!(
                "band half-width must be positive and finite, got {half_width}"
            )));
        }
        Ok(SpectralModel {
            family: SpectralFamily::Band { half_width },
            quadrature: QuadratureSpec::default(),
        })
    }

    pub fn gaussian() -> Self {
        SpectralModel {
            family: SpectralFamily::Gaussian,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn bilateral_exponential() -> Self {
        SpectralModel {
            family: SpectralFamily::BilateralExponential,
            quadrature: QuadratureSpec::default(),
        }
    }

    /// Build a tabulated model from (lambda, density) samples.
    ///
    /// A grid given only on the nonnegative half-line is mirrored; a full grid
    /// must already be symmetric. The density is renormalized to total mass 1.
    pub fn tabulated(lambda: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if lambda.len() != density.len() || lambda.len() < 2 {
            return Err(Error::InvalidModel(
                "tabulated model needs at least two (lambda, density) rows".into(),
            ));
        }
        for w in lambda.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidModel(
                    "tabulated grid must be strictly increasing".into(),
                ));
            }
        }
        if density.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel(
                "tabulated density must be finite and nonnegative".into(),
            ));
        }
        let (mut grid, mut dens) = if lambda[0] >= 0.0 {
            // mirror onto the negative half-line
            let mut g = Vec::with_capacity(2 * lambda.len());
            let mut d = Vec::with_capacity(2 * lambda.len());
            for (l, p) in lambda.iter().zip(&density).rev() {
                if *l > 0.0 {
                    g.push(-l);
                    d.push(*p);
                }
            }
            if lambda[0] > 0.0 {
                // close the gap across the origin
                g.push(0.0);
                d.push(density[0]);
            }
            g.extend(lambda.iter().copied());
            d.extend(density.iter().copied());
            (g, d)
        } else {
            // must be symmetric already
            let n = lambda.len();
            for i in 0..n {
                let j = n - 1 - i;
                if (lambda[i] + lambda[j]).abs() > 1e-9 * (1.0 + lambda[i].abs()) {
                    return Err(Error::InvalidModel(
                        "two-sided tabulated grid must be symmetric about 0".into(),
                    ));
                }
            }
            let d = (0..n)
                .map(|i| 0.5 * (density[i] + density[n - 1 - i]))
                .collect();
            (lambda, d)
        };
        // trapezoid mass for normalization
        let mut mass = 0.0;
        for i in 0..grid.len() - 1 {
            mass += 0.5 * (dens[i] + dens[i + 1]) * (grid[i + 1] - grid[i]);
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidModel("tabulated density has zero mass".into()));
        }
        for p in dens.iter_mut() {
            *p /= mass;
        }
        grid.shrink_to_fit();
        Ok(SpectralModel {
            family: SpectralFamily::Tabulated {
                lambda: grid,
                density: dens,
            },
            quadrature: QuadratureSpec::default(),
        })
    }

    /// Read a two-column CSV (lambda, density). A non-numeric first row is
    /// treated as a header and skipped.
    pub fn tabulated_from_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut lambda = Vec::new();
        let mut density = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "row {} has fewer than two columns",
                    i + 1
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(l), Ok(p)) => {
                    lambda.push(l);
                    density.push(p);
                }
                _ if i == 0 => continue, // header
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "row {} is not numeric: {:?}",
                        i + 1,
                        rec
                    )))
                }
            }
        }
        SpectralModel::tabulated(lambda, density)
    }

    /// Supremum of kappa with a finite exponential moment; the analyticity
    /// strip of the covariance has half-width `kappa_sup() / 2`.
    pub fn kappa_sup(&self) -> f64 {
        match self.family {
            SpectralFamily::BilateralExponential => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn strip_half_width(&self) -> f64 {
        self.kappa_sup() * 0.5
    }

    /// Density of the measure at lambda.
    pub fn density(&self, l: f64) -> f64 {
        match &self.family {
            SpectralFamily::Band { half_width } => {
                if l.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            SpectralFamily::Gaussian => (-0.5 * l * l).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            SpectralFamily::BilateralExponential => 0.5 * (-l.abs()).exp(),
            SpectralFamily::Tabulated { lambda, density } => {
                if l < lambda[0] || l > *lambda.last().unwrap() {
                    return 0.0;
                }
                let i = lambda.partition_point(|&x| x <= l).min(lambda.len() - 1);
                let i = i.max(1);
                let (a, b) = (lambda[i - 1], lambda[i]);
                let t = (l - a) / (b - a);
                density[i - 1] * (1.0 - t) + density[i] * t
            }
        }
    }

    /// Effective support radius when the integrand grows like exp(tilt |l|).
    pub fn half_support(&self, tilt: f64) -> Result<f64> {
        let kappa = self.kappa_sup();
        if tilt >= kappa {
            return Err(Error::DivergentIntegral { tilt, kappa });
        }
        match &self.family {
            SpectralFamily::Band { half_width } => Ok(*half_width),
            SpectralFamily::Tabulated { lambda, .. } => Ok(lambda.last().unwrap().abs()),
            SpectralFamily::Gaussian => {
                let mut r = 6.0_f64;
                while -0.5 * r * r + tilt * r + 2.0 * (1.0 + r).ln() > TAIL_LOG_CUT {
                    r += 0.5;
                }
                Ok(r)
            }
            SpectralFamily::BilateralExponential => {
                let rate = 1.0 - tilt;
                let mut r = 30.0_f64;
                while -rate * r + 2.0 * (1.0 + r).ln() > TAIL_LOG_CUT {
                    r *= 1.25;
                    if r > 1e7 {
                        return Err(Error::DivergentIntegral { tilt, kappa });
                    }
                }
                Ok(r)
            }
        }
    }

    /// Integration breakpoints (density kinks) clipped to [-r, r].
    fn breaks(&self, r: f64) -> Vec<f64> {
        match &self.family {
            SpectralFamily::Band { .. } | SpectralFamily::Gaussian => vec![-r, 0.0, r],
            SpectralFamily::BilateralExponential => vec![-r, 0.0, r],
            SpectralFamily::Tabulated { lambda, .. } => lambda.clone(),
        }
    }

    /// Adaptive evaluation of the spectral integral of `f` against the
    /// measure. `tilt` bounds the exponential growth rate of `f`; `osc` its
    /// top angular frequency.
    pub fn integrate(&self, tilt: f64, osc: f64, f: &dyn Fn(f64) -> f64) -> Result<Quad> {
        let r = self.half_support(tilt)?;
        let breaks = self.breaks(r);
        let mut g = |l: f64| f(l) * self.density(l);
        adaptive_segmented(
            &mut g,
            &breaks,
            osc,
            self.quadrature.abs_tol,
            self.quadrature.rel_tol,
        )
    }

    /// Covariance r(t); closed form for the named families, quadrature for
    /// tabulated densities.
    pub fn covariance(&self, t: f64) -> Result<f64> {
        match &self.family {
            SpectralFamily::Band { half_width } => Ok(sinc(half_width * t)),
            SpectralFamily::Gaussian => Ok((-0.5 * t * t).exp()),
            SpectralFamily::BilateralExponential => Ok(1.0 / (1.0 + t * t)),
            SpectralFamily::Tabulated { .. } => Ok(self.covariance_quad(t)?.value),
        }
    }

    /// Quadrature route for r(t), usable as a cross-check for every family.
    pub fn covariance_quad(&self, t: f64) -> Result<Quad> {
        self.integrate(0.0, t.abs(), &|l| (l * t).cos())
    }

    /// First derivative r'(t).
    pub fn covariance_d1(&self, t: f64) -> Result<f64> {
        match &self.family {
            SpectralFamily::Band { half_width } => Ok(half_width * sinc_d1(half_width * t)),
            SpectralFamily::Gaussian => Ok(-t * (-0.5 * t * t).exp()),
            SpectralFamily::BilateralExponential => {
                let d = 1.0 + t * t;
                Ok(-2.0 * t / (d * d))
            }
            SpectralFamily::Tabulated { .. } => {
                Ok(-self.integrate(0.0, t.abs(), &|l| l * (l * t).sin())?.value)
            }
        }
    }

    /// Second derivative r''(t).
    pub fn covariance_d2(&self, t: f64) -> Result<f64> {
        match &self.family {
            SpectralFamily::Band { half_width } => {
                Ok(half_width * half_width * sinc_d2(half_width * t))
            }
            SpectralFamily::Gaussian => Ok((t * t - 1.0) * (-0.5 * t * t).exp()),
            SpectralFamily::BilateralExponential => {
                let d = 1.0 + t * t;
                Ok((6.0 * t * t - 2.0) / (d * d * d))
            }
            SpectralFamily::Tabulated { .. } => {
                Ok(-self.integrate(0.0, t.abs(), &|l| l * l * (l * t).cos())?.value)
            }
        }
    }

    /// Analytic continuation r(z) of the covariance into the strip
    /// |Im z| < kappa_sup.
    pub fn covariance_complex(&self, z: Complex64) -> Result<Complex64> {
        let v = z.im.abs();
        if v >= self.kappa_sup() {
            return Err(Error::DivergentIntegral {
                tilt: v,
                kappa: self.kappa_sup(),
            });
        }
        match &self.family {
            SpectralFamily::Band { half_width } => Ok(sinc_complex(z * *half_width)),
            SpectralFamily::Gaussian => Ok((-z * z * 0.5).exp()),
            SpectralFamily::BilateralExponential => Ok(Complex64::new(1.0, 0.0) / (1.0 + z * z)),
            SpectralFamily::Tabulated { .. } => {
                // r(x + iv) = int cos(lx) cosh(lv) - i sin(lx) sinh(lv) dp
                let (x, v) = (z.re, z.im);
                let re = self
                    .integrate(v.abs(), x.abs(), &|l| (l * x).cos() * (l * v).cosh())?
                    .value;
                let im = -self
                    .integrate(v.abs(), x.abs(), &|l| (l * x).sin() * (l * v).sinh())?
                    .value;
                Ok(Complex64::new(re, im))
            }
        }
    }

    /// Second spectral moment and the mean zero-count intensity
    /// alpha = sqrt(int l^2 dp) / pi.
    pub fn kac_rice_alpha(&self) -> Result<KacRice> {
        let second_moment = match &self.family {
            SpectralFamily::Band { half_width } => half_width * half_width / 3.0,
            SpectralFamily::Gaussian => 1.0,
            SpectralFamily::BilateralExponential => 2.0,
            SpectralFamily::Tabulated { .. } => self.integrate(0.0, 0.0, &|l| l * l)?.value,
        };
        Ok(KacRice {
            alpha: second_moment.sqrt() / std::f64::consts::PI,
            second_moment,
        })
    }

    /// Exponential moment int exp(kappa |l|) dp; +infinity when the tail
    /// cannot absorb the growth.
    pub fn exp_moment(&self, kappa: f64) -> Result<f64> {
        if kappa < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "exponential moment needs kappa >= 0, got {kappa}"
            )));
        }
        if kappa >= self.kappa_sup() {
            return Ok(f64::INFINITY);
        }
        match &self.family {
            SpectralFamily::Band { half_width } => {
                let u = half_width * kappa;
                Ok(if u < 1e-8 {
                    1.0 + 0.5 * u
                } else {
                    (u.exp() - 1.0) / u
                })
            }
            SpectralFamily::BilateralExponential => Ok(1.0 / (1.0 - kappa)),
            _ => Ok(self.exp_moment_quad(kappa)?.value),
        }
    }

    pub fn exp_moment_quad(&self, kappa: f64) -> Result<Quad> {
        if kappa >= self.kappa_sup() {
            return Err(Error::DivergentIntegral {
                tilt: kappa,
                kappa: self.kappa_sup(),
            });
        }
        self.integrate(kappa, 0.0, &|l| (kappa * l.abs()).exp())
    }

    /// Tilted covariance r(t; kappa_o) = int cos(t l) cosh(2 kappa_o l) dp.
    pub fn covariance_kappa(&self, t: f64, kappa_o: f64) -> Result<f64> {
        if kappa_o < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "covariance_kappa needs kappa_o >= 0, got {kappa_o}"
            )));
        }
        Ok(self
            .covariance_complex(Complex64::new(t, 2.0 * kappa_o))?
            .re)
    }

    pub fn covariance_kappa_quad(&self, t: f64, kappa_o: f64) -> Result<Quad> {
        self.integrate(2.0 * kappa_o, t.abs(), &|l| {
            (l * t).cos() * (2.0 * kappa_o * l).cosh()
        })
    }

    /// r_ell(x; y) = int e^{-i l x} phi^ell(l y) dp with phi(u) = sinh(u)/u.
    /// Even symmetry makes the result real; the imaginary part is returned as
    /// a numeric diagnostic.
    pub fn r_ell(&self, ell: u8, x: f64, y: f64) -> Result<Complex64> {
        if ell != 1 && ell != 2 {
            return Err(Error::InvalidArgument(format!("ell must be 1 or 2, got {ell}")));
        }
        let tilt = ell as f64 * y.abs();
        let re = self.integrate(tilt, x.abs(), &|l| {
            (l * x).cos() * phi(l * y).powi(ell as i32)
        })?;
        let im = self.integrate(tilt, x.abs(), &|l| {
            -(l * x).sin() * phi(l * y).powi(ell as i32)
        })?;
        Ok(Complex64::new(re.value, im.value))
    }

    /// d/dx r_1(x; y) = -int l sin(l x) phi(l y) dp.
    ///
    /// For the named families this is evaluated through the identity
    /// r_1'(x; y) = Im r(x + i y) / y.
    pub fn r1_prime(&self, x: f64, y: f64) -> Result<f64> {
        match &self.family {
            SpectralFamily::Tabulated { .. } => Ok(self.r1_prime_quad(x, y)?.value),
            _ => {
                if y == 0.0 {
                    self.covariance_d1(x)
                } else {
                    Ok(self.covariance_complex(Complex64::new(x, y))?.im / y)
                }
            }
        }
    }

    pub fn r1_prime_quad(&self, x: f64, y: f64) -> Result<Quad> {
        self.integrate(y.abs(), x.abs(), &|l| -l * (l * x).sin() * phi(l * y))
    }

    /// d^2/dx^2 r_2(x; y) = -int l^2 cos(l x) phi^2(l y) dp.
    ///
    /// Closed route: r_2''(x; y) = -(Re r(x + 2iy) - r(x)) / (2 y^2).
    pub fn r2_second(&self, x: f64, y: f64) -> Result<f64> {
        match &self.family {
            SpectralFamily::Tabulated { .. } => Ok(self.r2_second_quad(x, y)?.value),
            _ => {
                if y == 0.0 {
                    self.covariance_d2(x)
                } else {
                    let re = self.covariance_complex(Complex64::new(x, 2.0 * y))?.re;
                    Ok(-(re - self.covariance(x)?) / (2.0 * y * y))
                }
            }
        }
    }

    pub fn r2_second_quad(&self, x: f64, y: f64) -> Result<Quad> {
        self.integrate(2.0 * y.abs(), x.abs(), &|l| {
            let ph = phi(l * y);
            -l * l * (l * x).cos() * ph * ph
        })
    }

    /// Tail-summability diagnostic over the lattice {j x_star}: partial tail
    /// sums of |r|, |r_1'(.; 2y)| and |r_2''(.; y)| with the supremum taken
    /// over a grid of y in (-kappa_prime, kappa_prime).
    pub fn omega_star(
        &self,
        x_star: f64,
        kappa_prime: f64,
        horizon: usize,
    ) -> Result<AssumptionAReport> {
        self.omega_star_with(x_star, kappa_prime, horizon, &OmegaStarParams::default())
    }

    pub fn omega_star_with(
        &self,
        x_star: f64,
        kappa_prime: f64,
        horizon: usize,
        params: &OmegaStarParams,
    ) -> Result<AssumptionAReport> {
        if !(x_star > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "x_star must be positive, got {x_star}"
            )));
        }
        if !(kappa_prime > 0.0) || kappa_prime >= 0.5 * self.kappa_sup() {
            return Err(Error::InvalidArgument(format!(
                "kappa_prime must lie in (0, {}), got {kappa_prime}",
                0.5 * self.kappa_sup()
            )));
        }
        if horizon < 2 {
            return Err(Error::InvalidArgument("horizon must be at least 2".into()));
        }
        let j_max = horizon * params.j_max_multiplier;
        let ys: Vec<f64> = (0..params.y_points)
            .map(|i| {
                let t = i as f64 / (params.y_points - 1) as f64;
                -kappa_prime + 2.0 * kappa_prime * t
            })
            .collect();

        // per-j magnitudes
        let mut term_r = vec![0.0; j_max + 1];
        for j in 1..=j_max {
            term_r[j] = self.covariance(j as f64 * x_star)?.abs();
        }
        let ny = ys.len();
        let mut term_r1 = vec![vec![0.0; j_max + 1]; ny];
        let mut term_r2 = vec![vec![0.0; j_max + 1]; ny];
        for (iy, &y) in ys.iter().enumerate() {
            for j in 1..=j_max {
                let x = j as f64 * x_star;
                term_r1[iy][j] = self.r1_prime(x, 2.0 * y)?.abs();
                term_r2[iy][j] = self.r2_second(x, y)?.abs();
            }
        }

        // suffix sums
        let suffix = |v: &[f64]| -> Vec<f64> {
            let mut s = vec![0.0; v.len() + 1];
            for j in (1..v.len()).rev() {
                s[j] = s[j + 1] + v[j];
            }
            s
        };
        let tail_r_all = suffix(&term_r);
        let tails_r1: Vec<Vec<f64>> = term_r1.iter().map(|v| suffix(v)).collect();
        let tails_r2: Vec<Vec<f64>> = term_r2.iter().map(|v| suffix(v)).collect();

        let k_grid: Vec<usize> = (1..=horizon).collect();
        let mut omega_star = Vec::with_capacity(horizon);
        let mut tail_r = Vec::with_capacity(horizon);
        let mut tail_r1 = Vec::with_capacity(horizon);
        let mut tail_r2 = Vec::with_capacity(horizon);
        for &k in &k_grid {
            let sup_combined = (0..ny)
                .map(|iy| tails_r1[iy][k] + tails_r2[iy][k])
                .fold(0.0_f64, f64::max);
            omega_star.push(tail_r_all[k] + sup_combined);
            tail_r.push(tail_r_all[k]);
            tail_r1.push((0..ny).map(|iy| tails_r1[iy][k]).fold(0.0_f64, f64::max));
            tail_r2.push((0..ny).map(|iy| tails_r2[iy][k]).fold(0.0_f64, f64::max));
        }

        // truncation increments, relative to the full partial sum of each term
        let rel_inc = |last: f64, total: f64| if total > 0.0 { last / total } else { 0.0 };
        let inc_r = rel_inc(term_r[j_max], tail_r_all[1]);
        let inc_r1 = (0..ny)
            .map(|iy| rel_inc(term_r1[iy][j_max], tails_r1[iy][1]))
            .fold(0.0_f64, f64::max);
        let inc_r2 = (0..ny)
            .map(|iy| rel_inc(term_r2[iy][j_max], tails_r2[iy][1]))
            .fold(0.0_f64, f64::max);

        let first_below = |tails: &[f64]| tails.iter().position(|&t| t < params.threshold);
        let conv = [
            first_below(&tail_r),
            first_below(&tail_r1),
            first_below(&tail_r2),
        ];
        let trunc_ok = [inc_r <= 0.01, inc_r1 <= 0.01, inc_r2 <= 0.01];
        let terms = [Term::R, Term::R1Prime, Term::R2Second];
        let verdict = if conv.iter().all(Option::is_some) && trunc_ok.iter().all(|&b| b) {
            let k_at = conv.iter().map(|c| c.unwrap() + 1).max().unwrap();
            Verdict::Satisfied { k_at }
        } else if let Some(i) = (0..3).find(|&i| conv[i].is_none() && trunc_ok[i]) {
            Verdict::Fails { term: terms[i] }
        } else {
            Verdict::Inconclusive
        };

        Ok(AssumptionAReport {
            model: self.to_string(),
            x_star,
            kappa_prime,
            horizon,
            j_max,
            threshold: params.threshold,
            k_grid,
            omega_star,
            tail_r,
            tail_r1,
            tail_r2,
            increment_r: inc_r,
            increment_r1: inc_r1,
            increment_r2: inc_r2,
            verdict,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KacRice {
    pub alpha: f64,
    pub second_moment: f64,
}

#[derive(Debug, Clone)]
pub struct OmegaStarParams {
    /// A term counts as summable once its tail drops below this.
    pub threshold: f64,
    /// The infinite sums are truncated at horizon * this.
    pub j_max_multiplier: usize,
    /// Grid resolution for the supremum over y.
    pub y_points: usize,
}

impl Default for OmegaStarParams {
    fn default() -> Self {
        OmegaStarParams {
            threshold: 0.01,
            j_max_multiplier: 10,
            y_points: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Term {
    R,
    R1Prime,
    R2Second,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::R => write!(f, "r"),
            Term::R1Prime => write!(f, "r1prime"),
            Term::R2Second => write!(f, "r2second"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied { k_at: usize },
    Fails { term: Term },
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Satisfied { .. } => write!(f, "satisfied"),
            Verdict::Fails { term } => write!(f, "fails({term})"),
            Verdict::Inconclusive => write!(f, "inconclusive(truncation)"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Tail-summability report: omega_star(k) per k, per-term tails, and the
/// truncation increments backing the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionAReport {
    pub model: String,
    pub x_star: f64,
    pub kappa_prime: f64,
    pub horizon: usize,
    pub j_max: usize,
    pub threshold: f64,
    pub k_grid: Vec<usize>,
    pub omega_star: Vec<f64>,
    pub tail_r: Vec<f64>,
    pub tail_r1: Vec<f64>,
    pub tail_r2: Vec<f64>,
    pub increment_r: f64,
    pub increment_r1: f64,
    pub increment_r2: f64,
    pub verdict: Verdict,
}
