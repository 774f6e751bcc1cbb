//! Exact Gaussian linear algebra on the strip: the complex covariance kernel,
//! Re/Im cross-covariances, the standardized correlation vector and its tail
//! functional omega(k), joint covariance assembly with diagonal-dominance
//! certificates, Schur conditioning, permanent-based second moments, and
//! Monte Carlo fractional moments of lattice products.

use crate::error::{Error, Result};
use crate::quad::adaptive_segmented;
use crate::spectral::{phi, SpectralModel};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::io::Write as _;
use std::path::Path;

/// Hermitian and relation ("pseudo") covariances of the analytic field at a
/// pair of strip points.
#[derive(Debug, Clone, Copy)]
pub struct ComplexCov {
    /// E f(z) conj f(w) = r(z - conj w).
    pub hermitian: Complex64,
    /// E f(z) f(w) = r(z - w).
    pub pseudo: Complex64,
}

fn require_in_strip(model: &SpectralModel, z: Complex64) -> Result<()> {
    let half = model.strip_half_width();
    if z.im.abs() >= half {
        return Err(Error::OutsideStrip {
            re: z.re,
            im: z.im,
            half_width: half,
        });
    }
    Ok(())
}

/// Both second-order kernels of the field at (z, w). The pseudo-covariance
/// r(z - w) is generally nonzero: the strip field is a conjugation-equivariant
/// complex Gaussian, not a circular one.
pub fn complex_cov(model: &SpectralModel, z: Complex64, w: Complex64) -> Result<ComplexCov> {
    require_in_strip(model, z)?;
    require_in_strip(model, w)?;
    Ok(ComplexCov {
        hermitian: model.covariance_complex(z - w.conj())?,
        pseudo: model.covariance_complex(z - w)?,
    })
}

/// Covariances between (Re f(iy), Im f(iy)) and (Re f(x+iy), Im f(x+iy)).
///
/// `rr`, `ri`, `ir`, `ii` name the left/right components in that order, so
/// `ri` is Cov[Re f(iy), Im f(x+iy)]. `route_dev` is the largest disagreement
/// between the closed r-based forms and direct spectral quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReImCov {
    pub rr: f64,
    pub ri: f64,
    pub ir: f64,
    pub ii: f64,
    pub route_dev: f64,
}

const ROUTE_TOL: f64 = 1e-8;

/// The 2x2 cross-covariance block at lag x on the line Im z = y, computed two
/// ways: rr = (Re r(x+2iy) + r(x))/2, ii = (Re r(x+2iy) - r(x))/2,
/// ri = Im r(x+2iy)/2 = -ir, cross-checked against the spectral integrals
/// with cosh^2 / sinh^2 / sinh cosh weights.
pub fn reim_cov(model: &SpectralModel, x: f64, y: f64) -> Result<ReImCov> {
    require_in_strip(model, Complex64::new(0.0, y))?;
    let rz = model.covariance_complex(Complex64::new(x, 2.0 * y))?;
    let rx = model.covariance(x)?;
    let rr = 0.5 * (rz.re + rx);
    let ii = 0.5 * (rz.re - rx);
    let ri = 0.5 * rz.im;

    let tilt = 2.0 * y.abs();
    let rr_q = model
        .integrate(tilt, x.abs(), &|l| {
            let c = (l * y).cosh();
            (l * x).cos() * c * c
        })?
        .value;
    let ii_q = model
        .integrate(tilt, x.abs(), &|l| {
            let s = (l * y).sinh();
            (l * x).cos() * s * s
        })?
        .value;
    let ri_q = model
        .integrate(tilt, x.abs(), &|l| {
            -(l * x).sin() * (l * y).sinh() * (l * y).cosh()
        })?
        .value;

    let route_dev = (rr - rr_q)
        .abs()
        .max((ii - ii_q).abs())
        .max((ri - ri_q).abs());
    if !(route_dev <= ROUTE_TOL) {
        return Err(Error::QuadratureNonConvergence {
            estimate: route_dev,
            tolerance: ROUTE_TOL,
        });
    }
    Ok(ReImCov {
        rr,
        ri,
        ir: -ri,
        ii,
        route_dev,
    })
}

/// Variance scales of the standardized decomposition
/// f(x+iy) = sqrt(v_r) X + i |y| sqrt(v_i) Y.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VMoments {
    /// int cosh^2(lambda y) drho = (r(2iy) + 1)/2.
    pub v_r: f64,
    /// int lambda^2 phi^2(lambda y) drho, with y^2 v_i = (r(2iy) - 1)/2.
    pub v_i: f64,
}

pub fn v_moments(model: &SpectralModel, y: f64) -> Result<VMoments> {
    require_in_strip(model, Complex64::new(0.0, y))?;
    if y == 0.0 {
        return Ok(VMoments {
            v_r: 1.0,
            v_i: model.kac_rice_alpha()?.second_moment,
        });
    }
    let r2iy = model.covariance_complex(Complex64::new(0.0, 2.0 * y))?.re;
    Ok(VMoments {
        v_r: 0.5 * (r2iy + 1.0),
        v_i: 0.5 * (r2iy - 1.0) / (y * y),
    })
}

/// Direct spectral-integral route for the same two moments.
pub fn v_moments_quad(model: &SpectralModel, y: f64) -> Result<VMoments> {
    require_in_strip(model, Complex64::new(0.0, y))?;
    let tilt = 2.0 * y.abs();
    let v_r = model
        .integrate(tilt, 0.0, &|l| {
            let c = (l * y).cosh();
            c * c
        })?
        .value;
    let v_i = model
        .integrate(tilt, 0.0, &|l| {
            let p = phi(l * y);
            l * l * p * p
        })?
        .value;
    Ok(VMoments { v_r, v_i })
}

/// beta_y = 2 r(0) / (r(2iy) + r(0)) = 1 / v_r, in (0, 1] since r(2iy) >= 1.
pub fn beta_y(model: &SpectralModel, y: f64) -> Result<f64> {
    Ok(1.0 / v_moments(model, y)?.v_r)
}

/// Correlations between the standardized components at lag x on Im z = y:
/// (X_0, Y_0) vs (X_x, Y_x) with the Re component first in each subscript.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrVector {
    pub rr: f64,
    pub ii: f64,
    pub ri: f64,
    pub ir: f64,
}

impl CorrVector {
    pub fn norm(&self) -> f64 {
        (self.rr * self.rr + self.ii * self.ii + self.ri * self.ri + self.ir * self.ir).sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.rr.abs() + self.ii.abs() + self.ri.abs() + self.ir.abs()
    }
}

/// r_hat at lag x: ii = -r2''(x;y)/v_i, ir = r1'(x;2y)/sqrt(v_r v_i),
/// rr = (1-beta) ii + beta r(x), ri = -ir. The rr combination is identical
/// to (Re r(x+2iy) + r(x))/(2 v_r) because v_r - 1 = y^2 v_i.
pub fn corr_vector(model: &SpectralModel, x: f64, y: f64) -> Result<CorrVector> {
    let v = v_moments(model, y)?;
    let beta = 1.0 / v.v_r;
    let ii = -model.r2_second(x, y)? / v.v_i;
    let ir = model.r1_prime(x, 2.0 * y)? / (v.v_r * v.v_i).sqrt();
    let rr = (1.0 - beta) * ii + beta * model.covariance(x)?;
    Ok(CorrVector {
        rr,
        ii,
        ri: -ir,
        ir,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrNorm {
    Euclidean,
    L1,
}

impl CorrNorm {
    fn apply(self, cv: &CorrVector) -> f64 {
        match self {
            CorrNorm::Euclidean => cv.norm(),
            CorrNorm::L1 => cv.l1(),
        }
    }
}

/// Tail functional omega(k) = 4 sup_{|y| <= kappa'} sum_{j=k}^{horizon}
/// ||r_hat(j x_star + iy)||, with the size of the last included term reported
/// so callers can judge the truncation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaK {
    pub k: usize,
    pub value: f64,
    /// 4 * sup_y of the j = horizon term.
    pub increment: f64,
}

pub fn omega(
    model: &SpectralModel,
    k: usize,
    x_star: f64,
    kappa_prime: f64,
    horizon: usize,
    y_points: usize,
    norm: CorrNorm,
) -> Result<OmegaK> {
    if !(x_star > 0.0) || !x_star.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lattice spacing must be positive and finite, got {x_star}"
        )));
    }
    if k == 0 || horizon < k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= horizon, got k = {k}, horizon = {horizon}"
        )));
    }
    if !(kappa_prime >= 0.0) || kappa_prime >= model.strip_half_width() {
        return Err(Error::InvalidArgument(format!(
            "kappa_prime = {kappa_prime} outside [0, {})",
            model.strip_half_width()
        )));
    }
    if y_points == 0 {
        return Err(Error::InvalidArgument("y_points must be >= 1".into()));
    }

    let grid: Vec<f64> = if y_points == 1 || kappa_prime == 0.0 {
        vec![0.0]
    } else {
        (0..y_points)
            .map(|i| -kappa_prime + 2.0 * kappa_prime * i as f64 / (y_points - 1) as f64)
            .collect()
    };

    let mut value: f64 = 0.0;
    let mut increment: f64 = 0.0;
    for &y in &grid {
        let mut sum = 0.0;
        let mut last = 0.0;
        for j in k..=horizon {
            last = norm.apply(&corr_vector(model, j as f64 * x_star, y)?);
            sum += last;
        }
        value = value.max(4.0 * sum);
        increment = increment.max(4.0 * last);
    }
    Ok(OmegaK {
        k,
        value,
        increment,
    })
}

/// Joint covariance of the standardized components at the origin and at the
/// lattice points {j x_star}, ordered (X_0, Y_0, X_{j_1}, Y_{j_1}, ...) for
/// y != 0 and (X_0, X_{j_1}, ...) for y = 0, where the Im part degenerates.
#[derive(Debug, Clone)]
pub struct CovBlocks {
    pub sigma: DMatrix<f64>,
    /// Size of the leading block for conditioning (one index's coordinates).
    pub n1: usize,
    /// 2 off the axis, 1 on it.
    pub dim_per_index: usize,
    /// Lattice indices in matrix order, origin included when requested.
    pub indices: Vec<usize>,
    /// max abs row sum of S = I - Sigma.
    pub s_norm: f64,
    pub min_eig: f64,
    /// true when eigenvalues in (-1e-10, 0) were treated as 0.
    pub clipped: bool,
}

const PSD_TOL: f64 = 1e-10;

pub fn assemble_joint_cov(
    model: &SpectralModel,
    y: f64,
    x_star: f64,
    j_set: &[usize],
    include_origin: bool,
) -> Result<CovBlocks> {
    if !(x_star > 0.0) || !x_star.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lattice spacing must be positive and finite, got {x_star}"
        )));
    }
    for win in j_set.windows(2) {
        if win[1] <= win[0] {
            return Err(Error::InvalidArgument(
                "index set must be strictly increasing".into(),
            ));
        }
    }
    let mut indices = Vec::with_capacity(j_set.len() + 1);
    if include_origin {
        indices.push(0);
        if j_set.first() == Some(&0) {
            return Err(Error::InvalidArgument(
                "index 0 collides with the origin".into(),
            ));
        }
    }
    indices.extend_from_slice(j_set);
    if indices.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }

    let dpi = if y == 0.0 { 1 } else { 2 };
    let m = indices.len();
    let n = m * dpi;
    let sgn_y = if y >= 0.0 { 1.0 } else { -1.0 };

    // Distinct gaps only; stationarity fills the rest.
    let mut sigma = DMatrix::<f64>::identity(n, n);
    for a in 0..m {
        for b in (a + 1)..m {
            let gap = (indices[b] - indices[a]) as f64 * x_star;
            let cv = corr_vector(model, gap, y)?;
            if dpi == 1 {
                sigma[(a, b)] = cv.rr;
                sigma[(b, a)] = cv.rr;
            } else {
                let (ra, rb) = (2 * a, 2 * b);
                // Left point first: Cov[X_a X_b], Cov[X_a Y_b], ...
                sigma[(ra, rb)] = cv.rr;
                sigma[(ra, rb + 1)] = sgn_y * cv.ir;
                sigma[(ra + 1, rb)] = sgn_y * cv.ri;
                sigma[(ra + 1, rb + 1)] = cv.ii;
                sigma[(rb, ra)] = cv.rr;
                sigma[(rb, ra + 1)] = sgn_y * cv.ri;
                sigma[(rb + 1, ra)] = sgn_y * cv.ir;
                sigma[(rb + 1, ra + 1)] = cv.ii;
            }
        }
    }

    let mut s_norm: f64 = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let s = if i == j { 1.0 - sigma[(i, j)] } else { -sigma[(i, j)] };
            row += s.abs();
        }
        s_norm = s_norm.max(row);
    }

    let eig = SymmetricEigen::new(sigma.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(Error::NotPsd { min_eig });
    }
    Ok(CovBlocks {
        sigma,
        n1: dpi,
        dim_per_index: dpi,
        indices,
        s_norm,
        min_eig,
        clipped: min_eig < 0.0,
    })
}

impl CovBlocks {
    /// Lower-triangular sampling factor; eigenvalues inside the PSD tolerance
    /// band are clipped to zero and a minimal jitter restores factorability.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        if let Some(ch) = Cholesky::new(self.sigma.clone()) {
            return Ok(ch.l());
        }
        let eig = SymmetricEigen::new(self.sigma.clone());
        let vals = eig.eigenvalues.map(|e| e.max(0.0));
        let rebuilt = &eig.eigenvectors
            * DMatrix::from_diagonal(&vals)
            * eig.eigenvectors.transpose();
        let mut jitter = 1e-15;
        while jitter <= 1e-9 {
            let jittered = &rebuilt + DMatrix::identity(rebuilt.nrows(), rebuilt.ncols()) * jitter;
            if let Some(ch) = Cholesky::new(jittered) {
                return Ok(ch.l());
            }
            jitter *= 10.0;
        }
        Err(Error::NotPsd {
            min_eig: self.min_eig,
        })
    }

    /// Rows of Sigma as CSV for external inspection.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_matrix_csv(&self.sigma, path)
    }
}

pub fn write_matrix_csv<P: AsRef<Path>>(m: &DMatrix<f64>, path: P) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Conditional law of the leading block given the rest.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    /// M with E[Z_1 | Z_2 = z] = M z, i.e. Sigma_12 Sigma_22^{-1}.
    pub mean_map: DMatrix<f64>,
    /// Sigma_11 - Sigma_12 Sigma_22^{-1} Sigma_21.
    pub cond_cov: DMatrix<f64>,
    /// Eigenvalue condition number of Sigma_22.
    pub cond_number: f64,
}

pub fn schur_condition(sigma: &DMatrix<f64>, n1: usize) -> Result<ConditionalGaussian> {
    let n = sigma.nrows();
    if sigma.ncols() != n || n1 == 0 || n1 >= n {
        return Err(Error::InvalidArgument(format!(
            "conditioning split {n1} invalid for a {}x{} matrix",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let n2 = n - n1;
    let s11 = sigma.view((0, 0), (n1, n1)).into_owned();
    let s12 = sigma.view((0, n1), (n1, n2)).into_owned();
    let s22 = sigma.view((n1, n1), (n2, n2)).into_owned();

    let eig = SymmetricEigen::new(s22.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= hi * 1e-14 || lo <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "conditioning block is numerically singular (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let ch = Cholesky::new(s22).ok_or(Error::NotPsd { min_eig: lo })?;
    // M = S12 S22^{-1}  <=>  S22 M^T = S21.
    let mean_map = ch.solve(&s12.transpose()).transpose();
    let cond_cov = &s11 - &mean_map * s12.transpose();
    Ok(ConditionalGaussian {
        mean_map,
        cond_cov,
        cond_number: hi / lo,
    })
}

/// Certificate that a near-identity covariance controls conditioning:
/// with omega = ||S||_{inf->inf} < 1 and hat_i = omega^i/(1-omega),
/// (a) reduction entries, (b) the conditional mean, and (c) the marginal
/// density ratio against an iid standard normal are all bounded.
#[derive(Debug, Clone, Serialize)]
pub struct DomReport {
    pub omega: f64,
    pub omega_hat: [f64; 3],
    pub entry_max: f64,
    pub entry_bound: f64,
    pub mean_sup: f64,
    pub mean_bound: f64,
    pub log_density_ratio: f64,
    pub log_density_bound: f64,
    pub all_hold: bool,
}

const DOM_SLACK: f64 = 1e-10;

pub fn check_diag_dominant(cov: &CovBlocks, z2: &DVector<f64>) -> Result<DomReport> {
    let w = cov.s_norm;
    if w >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "defect norm {w} >= 1: covariance is not diagonally dominant"
        )));
    }
    let n = cov.sigma.nrows();
    let n1 = cov.n1;
    let n2 = n - n1;
    if z2.len() != n2 {
        return Err(Error::InvalidArgument(format!(
            "conditioning vector has length {}, expected {n2}",
            z2.len()
        )));
    }
    let omega_hat = [1.0 / (1.0 - w), w / (1.0 - w), w * w / (1.0 - w)];

    let cond = schur_condition(&cov.sigma, n1)?;
    let s11 = cov.sigma.view((0, 0), (n1, n1)).into_owned();
    let reduction = &s11 - &cond.cond_cov;
    let entry_max = reduction.iter().fold(0.0f64, |m, &e| m.max(e.abs()));

    let mean_sup = (&cond.mean_map * z2)
        .iter()
        .fold(0.0f64, |m, &e| m.max(e.abs()));
    let z2_sup = z2.iter().fold(0.0f64, |m, &e| m.max(e.abs()));

    let s22 = cov.sigma.view((n1, n1), (n2, n2)).into_owned();
    let ch = Cholesky::new(s22).ok_or(Error::NotPsd {
        min_eig: cov.min_eig,
    })?;
    let log_det: f64 = ch.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let quad = z2.dot(&ch.solve(z2));
    let log_density_ratio = -0.5 * log_det - 0.5 * quad + 0.5 * z2.norm_squared();
    let log_density_bound =
        0.5 * n2 as f64 * omega_hat[0].ln() + 0.5 * omega_hat[1] * z2.norm_squared();

    let entry_bound = omega_hat[2];
    let mean_bound = omega_hat[1] * z2_sup;
    let all_hold = entry_max <= entry_bound + DOM_SLACK
        && mean_sup <= mean_bound + DOM_SLACK
        && log_density_ratio <= log_density_bound + DOM_SLACK;
    Ok(DomReport {
        omega: w,
        omega_hat,
        entry_max,
        entry_bound,
        mean_sup,
        mean_bound,
        log_density_ratio,
        log_density_bound,
        all_hold,
    })
}

/// E prod |Z_l|^2 for a circular complex Gaussian vector with Hermitian
/// covariance K: the permanent of K, with the product-of-row-sums bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WickMoment {
    pub permanent: f64,
    pub row_bound: f64,
    /// |Im| of the permanent accumulation: a pure roundoff diagnostic.
    pub perm_im: f64,
}

const PERMANENT_CAP: usize = 12;

pub fn wick_second_moment(cov: &DMatrix<Complex64>) -> Result<WickMoment> {
    let n = cov.nrows();
    if cov.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    if n > PERMANENT_CAP {
        return Err(Error::InvalidArgument(format!(
            "permanent of order {n} > {PERMANENT_CAP} refused (2^n n cost)"
        )));
    }
    let perm = ryser_permanent(cov);
    let row_bound = (0..n)
        .map(|i| (0..n).map(|j| cov[(i, j)].norm()).sum::<f64>())
        .product::<f64>();
    if perm.re > row_bound + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "permanent {} exceeds its row-sum bound {row_bound}: numerical breakdown",
            perm.re
        )));
    }
    Ok(WickMoment {
        permanent: perm.re,
        row_bound,
        perm_im: perm.im.abs(),
    })
}

/// Ryser's formula with Gray-code updates:
/// perm A = (-1)^n sum_{S != 0} (-1)^{|S|} prod_l sum_{j in S} a_{lj}.
fn ryser_permanent(a: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut row_acc = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for s in 1u64..(1 << n) {
        let next = s ^ (s >> 1);
        let flipped = (next ^ gray).trailing_zeros() as usize;
        if next & (1 << flipped) != 0 {
            for (l, acc) in row_acc.iter_mut().enumerate() {
                *acc += a[(l, flipped)];
            }
        } else {
            for (l, acc) in row_acc.iter_mut().enumerate() {
                *acc -= a[(l, flipped)];
            }
        }
        gray = next;
        let prod: Complex64 = row_acc.iter().product();
        if (n as u32 - next.count_ones()) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Monte Carlo oracle for the same moment: draws Z = L u with u circular
/// standard normal and averages prod |Z_l|^2. Returns (estimate, std error).
pub fn wick_mc<R: Rng + ?Sized>(
    cov: &DMatrix<Complex64>,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let n = cov.nrows();
    if cov.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let l = complex_cholesky(cov)?;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..reps {
        for entry in u.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *entry = Complex64::new(re * inv_sqrt2, im * inv_sqrt2);
        }
        let mut prod = 1.0;
        for i in 0..n {
            let mut z = Complex64::new(0.0, 0.0);
            for (j, &uj) in u.iter().enumerate().take(i + 1) {
                z += l[(i, j)] * uj;
            }
            prod *= z.norm_sqr();
        }
        sum += prod;
        sum_sq += prod * prod;
    }
    let mean = sum / reps as f64;
    let var = (sum_sq / reps as f64 - mean * mean).max(0.0) / (reps as f64 - 1.0);
    Ok((mean, var.sqrt()))
}

fn lattice_hermitian_cov(
    model: &SpectralModel,
    x_star: f64,
    y: f64,
    n: usize,
) -> Result<DMatrix<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    if !(x_star > 0.0) || !x_star.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lattice spacing must be positive, got {x_star}"
        )));
    }
    let pts: Vec<Complex64> = (1..=n)
        .map(|j| Complex64::new(j as f64 * x_star, y))
        .collect();
    let mut k = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for a in 0..n {
        for b in 0..n {
            k[(a, b)] = complex_cov(model, pts[a], pts[b])?.hermitian;
        }
    }
    Ok(k)
}

/// Permanent-based second moment of prod |f(j x_star + iy)|^2 over
/// j = 1..n, under the circular approximation of the lattice vector.
pub fn wick_lattice(model: &SpectralModel, x_star: f64, y: f64, n: usize) -> Result<WickMoment> {
    wick_second_moment(&lattice_hermitian_cov(model, x_star, y, n)?)
}

/// Monte Carlo counterpart of `wick_lattice`: (estimate, std error).
pub fn wick_lattice_mc(
    model: &SpectralModel,
    x_star: f64,
    y: f64,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let k = lattice_hermitian_cov(model, x_star, y, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    wick_mc(&k, reps, &mut rng)
}

fn complex_cholesky(cov: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let mut jitter = 0.0;
    loop {
        let m = if jitter == 0.0 {
            cov.clone()
        } else {
            cov + DMatrix::identity(cov.nrows(), cov.ncols()) * Complex64::new(jitter, 0.0)
        };
        if let Some(ch) = Cholesky::new(m) {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-14 } else { jitter * 10.0 };
        if jitter > 1e-9 {
            return Err(Error::NotPsd { min_eig: f64::NAN });
        }
    }
}

/// E|G_0(y)|^p for G_0 = sqrt(v_r) X + i |y| sqrt(v_i) Y with X, Y iid N(0,1):
/// radial factor 2^{p/2} Gamma(p/2 + 1) times the angular average of
/// (v_r cos^2 t + y^2 v_i sin^2 t)^{p/2}. Finite for p > -2, or p > -1 on the
/// axis where |G_0| = sqrt(v_r) |X|.
pub fn g0_abs_moment(model: &SpectralModel, y: f64, p: f64) -> Result<f64> {
    let v = v_moments(model, y)?;
    if y == 0.0 {
        if p <= -1.0 {
            return Err(Error::InvalidArgument(format!(
                "moment order {p} <= -1 diverges for a real Gaussian"
            )));
        }
        let half = 0.5 * (p + 1.0);
        return Ok(v.v_r.powf(0.5 * p) * (0.5 * p).exp2() * crate::special::gamma(half)
            / std::f64::consts::PI.sqrt());
    }
    if p <= -2.0 {
        return Err(Error::InvalidArgument(format!(
            "moment order {p} <= -2 diverges for a complex Gaussian"
        )));
    }
    let s1 = v.v_r;
    let s2 = y * y * v.v_i;
    let pi = std::f64::consts::PI;
    let breaks = [0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi];
    let angular = adaptive_segmented(
        &mut |t| {
            let c = t.cos();
            let s = t.sin();
            (s1 * c * c + s2 * s * s).powf(0.5 * p)
        },
        &breaks,
        1.0,
        1e-13,
        1e-11,
    )?;
    let radial = (0.5 * p).exp2() * crate::special::gamma(0.5 * p + 1.0);
    Ok(radial * angular.value / (2.0 * pi))
}

/// Monte Carlo fractional moments of the lattice product prod_j |G_{j k}|^{+-eps},
/// with the Cauchy-Schwarz reference E[|G_0|^{+-2 eps}]^{m/2} from quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FracMoment {
    pub m_pos: f64,
    pub se_pos: f64,
    pub m_neg: f64,
    pub se_neg: f64,
    pub ref_pos: f64,
    pub ref_neg: f64,
}

impl FracMoment {
    pub fn ratio_pos(&self) -> f64 {
        self.m_pos / self.ref_pos
    }

    pub fn ratio_neg(&self) -> f64 {
        self.m_neg / self.ref_neg
    }
}

#[allow(clippy::too_many_arguments)]
pub fn frac_moment_mc(
    model: &SpectralModel,
    x_star: f64,
    y: f64,
    gap: usize,
    m: usize,
    eps: f64,
    reps: usize,
    seed: u64,
) -> Result<FracMoment> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} outside [0, 0.5): the negative-moment estimator has \
             infinite variance at eps >= 1/2"
        )));
    }
    if gap == 0 || m == 0 {
        return Err(Error::InvalidArgument("need gap >= 1 and m >= 1".into()));
    }
    if eps == 0.0 {
        return Ok(FracMoment {
            m_pos: 1.0,
            se_pos: 0.0,
            m_neg: 1.0,
            se_neg: 0.0,
            ref_pos: 1.0,
            ref_neg: 1.0,
        });
    }
    if reps < 100 {
        return Err(Error::InvalidArgument("need at least 100 replicates".into()));
    }

    let j_set: Vec<usize> = (1..=m).map(|j| j * gap).collect();
    let blocks = assemble_joint_cov(model, y, x_star, &j_set, false)?;
    let l = blocks.cholesky_factor()?;
    let v = v_moments(model, y)?;
    let dpi = blocks.dim_per_index;
    let n = blocks.sigma.nrows();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DVector::<f64>::zeros(n);
    let (mut sum_p, mut sq_p, mut sum_n, mut sq_n) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..reps {
        for entry in u.iter_mut() {
            *entry = rng.sample(StandardNormal);
        }
        let z = &l * &u;
        let mut log_prod = 0.0;
        for j in 0..m {
            let g2 = if dpi == 2 {
                let x = z[2 * j];
                let yy = z[2 * j + 1];
                v.v_r * x * x + y * y * v.v_i * yy * yy
            } else {
                v.v_r * z[j] * z[j]
            };
            log_prod += g2.max(f64::MIN_POSITIVE).ln();
        }
        let wp = (0.5 * eps * log_prod).exp();
        let wn = (-0.5 * eps * log_prod).exp();
        sum_p += wp;
        sq_p += wp * wp;
        sum_n += wn;
        sq_n += wn * wn;
    }
    let rf = reps as f64;
    let m_pos = sum_p / rf;
    let m_neg = sum_n / rf;
    let se_pos = ((sq_p / rf - m_pos * m_pos).max(0.0) / (rf - 1.0)).sqrt();
    let se_neg = ((sq_n / rf - m_neg * m_neg).max(0.0) / (rf - 1.0)).sqrt();
    Ok(FracMoment {
        m_pos,
        se_pos,
        m_neg,
        se_neg,
        ref_pos: g0_abs_moment(model, y, 2.0 * eps)?.powf(0.5 * m as f64),
        ref_neg: g0_abs_moment(model, y, -2.0 * eps)?.powf(0.5 * m as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn gaussian() -> SpectralModel {
        SpectralModel::gaussian()
    }

    #[test]
    fn complex_cov_real_points_are_unit() {
        let m = gaussian();
        let cc = complex_cov(&m, Complex64::new(0.7, 0.0), Complex64::new(0.7, 0.0)).unwrap();
        assert_abs_diff_eq!(cc.hermitian.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cc.pseudo.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cc.hermitian.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn complex_cov_on_axis_matches_quadrature() {
        let m = gaussian();
        let y = 0.3;
        let z = Complex64::new(0.0, y);
        let cc = complex_cov(&m, z, z).unwrap();
        assert_abs_diff_eq!(cc.hermitian.re, (2.0 * y * y).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(cc.hermitian.im, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cc.pseudo.re, 1.0, epsilon = 1e-15);
        // E|G_0|^2 = r(2iy) as a tilted spectral integral.
        let quad = m.covariance_kappa_quad(0.0, y).unwrap().value;
        assert_abs_diff_eq!(cc.hermitian.re, quad, epsilon = 1e-10);
    }

    #[test]
    fn complex_cov_rejects_points_off_the_strip() {
        let m = SpectralModel::bilateral_exponential();
        let bad = Complex64::new(0.3, 0.5);
        let good = Complex64::new(0.0, 0.1);
        assert!(complex_cov(&m, bad, good).is_err());
        assert!(complex_cov(&m, good, bad).is_err());
        assert!(complex_cov(&m, good, good).is_ok());
    }

    #[test]
    fn reim_cov_on_axis_degenerates() {
        let m = gaussian();
        let c = reim_cov(&m, 1.3, 0.0).unwrap();
        assert_abs_diff_eq!(c.rr, m.covariance(1.3).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.ii, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.ri, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reim_cov_cross_terms_vanish_at_zero_lag() {
        let m = gaussian();
        let c = reim_cov(&m, 0.0, 0.2).unwrap();
        assert_abs_diff_eq!(c.ri, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.ir, 0.0, epsilon = 1e-12);
        let v = v_moments(&m, 0.2).unwrap();
        assert_abs_diff_eq!(c.rr, v.v_r, epsilon = 1e-10);
        assert_abs_diff_eq!(c.ii, 0.04 * v.v_i, epsilon = 1e-10);
    }

    #[test]
    fn reim_cov_routes_agree_across_models() {
        let cases: Vec<(SpectralModel, f64, f64)> = vec![
            (gaussian(), 1.0, 0.2),
            (SpectralModel::band(1.0).unwrap(), 2.0, 0.5),
            (SpectralModel::bilateral_exponential(), 0.7, 0.3),
            (
                SpectralModel::tabulated(vec![0.0, 0.5, 1.0, 1.5], vec![0.4, 0.3, 0.2, 0.1])
                    .unwrap(),
                1.1,
                0.4,
            ),
        ];
        for (m, x, y) in cases {
            let c = reim_cov(&m, x, y).unwrap();
            assert!(c.route_dev <= 1e-8, "route_dev = {}", c.route_dev);
            assert_abs_diff_eq!(c.ir, -c.ri, epsilon = 0.0);
        }
    }

    #[test]
    fn v_moments_on_axis_reduce_to_second_moment() {
        for (m, m2) in [
            (gaussian(), 1.0),
            (SpectralModel::band(1.0).unwrap(), 1.0 / 3.0),
            (SpectralModel::bilateral_exponential(), 2.0),
        ] {
            let v = v_moments(&m, 0.0).unwrap();
            assert_abs_diff_eq!(v.v_r, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(v.v_i, m2, epsilon = 1e-12);
        }
    }

    #[test]
    fn v_moments_match_quadrature_and_identities() {
        let y = 0.2;
        for m in [
            gaussian(),
            SpectralModel::band(1.0).unwrap(),
            SpectralModel::bilateral_exponential(),
        ] {
            let v = v_moments(&m, y).unwrap();
            let q = v_moments_quad(&m, y).unwrap();
            assert_abs_diff_eq!(v.v_r, q.v_r, epsilon = 1e-8);
            assert_abs_diff_eq!(v.v_i, q.v_i, epsilon = 1e-8);
            let r2iy = m.covariance_complex(Complex64::new(0.0, 2.0 * y)).unwrap().re;
            assert_abs_diff_eq!(v.v_r, 0.5 * (r2iy + 1.0), epsilon = 1e-12);
            assert_abs_diff_eq!(y * y * v.v_i, 0.5 * (r2iy - 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_stays_in_unit_interval() {
        let m = gaussian();
        assert_abs_diff_eq!(beta_y(&m, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        for i in 1..20 {
            let b = beta_y(&m, 0.05 * i as f64).unwrap();
            assert!(b > 0.0 && b < 1.0, "beta = {b}");
        }
    }

    #[test]
    fn corr_vector_at_zero_lag_is_self_correlation() {
        let cv = corr_vector(&gaussian(), 0.0, 0.25).unwrap();
        assert_abs_diff_eq!(cv.rr, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cv.ii, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cv.ri, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cv.ir, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn corr_vector_rr_tends_to_covariance_on_axis() {
        let m = gaussian();
        let x = 1.7;
        let rx = m.covariance(x).unwrap();
        assert_abs_diff_eq!(corr_vector(&m, x, 0.0).unwrap().rr, rx, epsilon = 1e-14);
        assert_abs_diff_eq!(corr_vector(&m, x, 1e-5).unwrap().rr, rx, epsilon = 1e-8);
    }

    #[test]
    fn corr_vector_matches_normalized_reim_cov() {
        let m = gaussian();
        let (x, y) = (3.0, 0.2);
        let cv = corr_vector(&m, x, y).unwrap();
        let c = reim_cov(&m, x, y).unwrap();
        let v = v_moments(&m, y).unwrap();
        let im_scale = y * (v.v_r * v.v_i).sqrt();
        assert_abs_diff_eq!(cv.rr, c.rr / v.v_r, epsilon = 1e-8);
        assert_abs_diff_eq!(cv.ii, c.ii / (y * y * v.v_i), epsilon = 1e-8);
        assert_abs_diff_eq!(cv.ir, c.ri / im_scale, epsilon = 1e-8);
        assert_abs_diff_eq!(cv.ri, c.ir / im_scale, epsilon = 1e-8);
    }

    #[test]
    fn corr_vector_magnitudes_bounded_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let models = [
            gaussian(),
            SpectralModel::band(1.0).unwrap(),
            SpectralModel::bilateral_exponential(),
        ];
        for _ in 0..200 {
            let m = &models[rng.random_range(0..3)];
            let x: f64 = rng.random_range(-6.0..6.0);
            let y: f64 = rng.random_range(-0.45..0.45);
            let cv = corr_vector(m, x, y).unwrap();
            for e in [cv.rr, cv.ii, cv.ri, cv.ir] {
                assert!(e.abs() <= 1.0 + 1e-10, "|{e}| > 1 at x={x}, y={y}");
            }
            assert_eq!(cv.ri, -cv.ir);
        }
    }

    #[test]
    fn omega_nonincreasing_in_gap() {
        let m = gaussian();
        let vals: Vec<f64> = (1..=6)
            .map(|k| {
                omega(&m, k, 1.0, 0.2, 64, 21, CorrNorm::Euclidean)
                    .unwrap()
                    .value
            })
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{vals:?}");
        }
        assert!(vals[5] >= 0.0);
    }

    #[test]
    fn omega_gaussian_pinned_value() {
        let w = omega(&gaussian(), 4, 1.0, 0.25, 64, 21, CorrNorm::Euclidean).unwrap();
        assert!(
            w.value > 0.020 && w.value < 0.024,
            "omega(4) = {}",
            w.value
        );
        assert!(w.value <= 1.0 / 3.0);
        assert!(w.increment < 1e-6 * w.value, "increment {}", w.increment);
        // l1 dominates the euclidean norm termwise.
        let w1 = omega(&gaussian(), 4, 1.0, 0.25, 64, 21, CorrNorm::L1).unwrap();
        assert!(w1.value >= w.value);
    }

    #[test]
    fn omega_band_at_conjectured_spacing_is_ir_dominated() {
        let m = SpectralModel::band(1.0).unwrap();
        let x_star = 2.0 * std::f64::consts::PI;
        let w = omega(&m, 8, x_star, 0.2, 512, 5, CorrNorm::Euclidean).unwrap();
        assert!(w.value > 0.5, "omega(8) = {}", w.value);
        // The slow tail is carried by the cross (ir) component alone.
        let y = 0.2;
        let mut total = 0.0;
        let mut ir_part = 0.0;
        for j in 8..=512 {
            let cv = corr_vector(&m, j as f64 * x_star, y).unwrap();
            total += cv.norm();
            ir_part += (cv.ir * cv.ir + cv.ri * cv.ri).sqrt();
        }
        assert!(ir_part / total > 0.9, "ir share = {}", ir_part / total);
    }

    #[test]
    fn assemble_origin_only_is_identity() {
        let b = assemble_joint_cov(&gaussian(), 0.2, 1.0, &[], true).unwrap();
        assert_eq!(b.sigma.nrows(), 2);
        assert_abs_diff_eq!((b.sigma - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 0.0);
        assert_eq!(b.s_norm, 0.0);
    }

    #[test]
    fn assemble_distant_index_decouples() {
        let b = assemble_joint_cov(&gaussian(), 0.2, 1.0, &[40], true).unwrap();
        assert_eq!(b.sigma.nrows(), 4);
        let off = b.sigma.view((0, 2), (2, 2)).iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        assert!(off < 1e-8, "off-diagonal block {off}");
        assert!(b.s_norm < 1e-8);
        assert!(b.min_eig > 0.9);
    }

    #[test]
    fn assemble_defect_norm_bounded_by_omega() {
        let m = gaussian();
        let w4 = omega(&m, 4, 1.0, 0.2, 64, 21, CorrNorm::Euclidean)
            .unwrap()
            .value;
        let b = assemble_joint_cov(&m, 0.2, 1.0, &[4, 8, 12], true).unwrap();
        assert_eq!(b.sigma.nrows(), 8);
        assert!(
            b.s_norm <= w4 + 1e-6,
            "s_norm {} vs omega(4) {w4}",
            b.s_norm
        );
        assert!(b.min_eig > 0.0);
    }

    #[test]
    fn assemble_on_axis_uses_scalar_blocks() {
        let m = gaussian();
        let b = assemble_joint_cov(&m, 0.0, 1.0, &[2, 4], true).unwrap();
        assert_eq!(b.sigma.nrows(), 3);
        assert_eq!(b.dim_per_index, 1);
        assert_abs_diff_eq!(b.sigma[(0, 1)], m.covariance(2.0).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.sigma[(0, 2)], m.covariance(4.0).unwrap(), epsilon = 1e-12);
        assert!(b.min_eig > 0.0);
    }

    #[test]
    fn assemble_rejects_unsorted_indices() {
        assert!(assemble_joint_cov(&gaussian(), 0.2, 1.0, &[4, 4], true).is_err());
        assert!(assemble_joint_cov(&gaussian(), 0.2, 1.0, &[0], true).is_err());
        assert!(assemble_joint_cov(&gaussian(), 0.2, 1.0, &[], false).is_err());
    }

    /// The assembled covariance must agree with the law of the synthesized
    /// field itself: empirical second moments of (X_0, Y_0, X_1, Y_1) from
    /// the trigonometric sampler.
    #[test]
    fn assemble_matches_empirical_field_covariance() {
        use crate::sampler::{build_synthesis, Realization};
        let m = gaussian();
        let y = 0.2;
        let b = assemble_joint_cov(&m, y, 1.0, &[1], true).unwrap();
        let v = v_moments(&m, y).unwrap();
        let scheme = build_synthesis(&m, 4.0, crate::sampler::recommended_nodes(&m, 4.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(207);
        let reps = 40_000;
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        let sx = v.v_r.sqrt();
        let sy = y * v.v_i.sqrt();
        for _ in 0..reps {
            let f = Realization::sample(&scheme, &mut rng);
            let g0 = f.eval_complex(Complex64::new(0.0, y));
            let g1 = f.eval_complex(Complex64::new(1.0, y));
            let zv = [g0.re / sx, g0.im / sy, g1.re / sx, g1.im / sy];
            for i in 0..4 {
                for j in 0..4 {
                    acc[(i, j)] += zv[i] * zv[j];
                }
            }
        }
        acc /= reps as f64;
        // Second-moment SE is about sqrt(2/reps) ~ 0.007.
        let worst = (&acc - &b.sigma).iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        assert!(worst < 0.035, "empirical vs assembled deviation {worst}\n{acc}");
    }

    #[test]
    fn schur_two_by_two_complement() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let c = schur_condition(&sigma, 1).unwrap();
        assert_abs_diff_eq!(c.mean_map[(0, 0)], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(c.cond_cov[(0, 0)], 0.64, epsilon = 1e-14);
    }

    #[test]
    fn schur_block_diagonal_decouples() {
        let mut sigma = DMatrix::identity(5, 5);
        sigma[(0, 1)] = 0.3;
        sigma[(1, 0)] = 0.3;
        sigma[(3, 4)] = -0.2;
        sigma[(4, 3)] = -0.2;
        let c = schur_condition(&sigma, 2).unwrap();
        assert!(c.mean_map.norm() < 1e-14);
        assert_abs_diff_eq!(c.cond_cov[(0, 1)], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn schur_agrees_with_precision_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            let sigma = &a * a.transpose() + DMatrix::identity(6, 6) * 0.5;
            let c = schur_condition(&sigma, 2).unwrap();
            let prec = sigma.clone().try_inverse().unwrap();
            let p11 = prec.view((0, 0), (2, 2)).into_owned();
            let p12 = prec.view((0, 2), (2, 4)).into_owned();
            let cond_oracle = p11.clone().try_inverse().unwrap();
            let mean_oracle = -&cond_oracle * p12;
            assert!((&c.cond_cov - cond_oracle).norm() < 1e-10);
            assert!((c.mean_map - mean_oracle).norm() < 1e-10);
            // The reduction Sigma_11 - Sigma_{1|2} is itself PSD.
            let red = sigma.view((0, 0), (2, 2)).into_owned() - c.cond_cov;
            let eig = SymmetricEigen::new(red);
            assert!(eig.eigenvalues.min() > -1e-12);
        }
    }

    fn manual_blocks(sigma: DMatrix<f64>, n1: usize) -> CovBlocks {
        let n = sigma.nrows();
        let mut s_norm = 0.0f64;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let s = if i == j { 1.0 - sigma[(i, j)] } else { -sigma[(i, j)] };
                row += s.abs();
            }
            s_norm = s_norm.max(row);
        }
        let min_eig = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        CovBlocks {
            sigma,
            n1,
            dim_per_index: n1,
            indices: vec![],
            s_norm,
            min_eig,
            clipped: false,
        }
    }

    #[test]
    fn dominance_certificate_identity_case() {
        let b = manual_blocks(DMatrix::identity(4, 4), 2);
        let z2 = DVector::from_vec(vec![1.5, -0.5]);
        let rep = check_diag_dominant(&b, &z2).unwrap();
        assert_eq!(rep.omega, 0.0);
        assert!(rep.all_hold);
        assert_abs_diff_eq!(rep.entry_max, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.log_density_ratio, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rep.log_density_bound, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dominance_certificate_for_model_lattice() {
        let m = gaussian();
        let b = assemble_joint_cov(&m, 0.2, 1.0, &[4, 8, 12], true).unwrap();
        assert!(b.s_norm < 1.0 / 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let z2 = DVector::from_fn(b.sigma.nrows() - b.n1, |_, _| rng.random_range(-2.0..2.0));
            let rep = check_diag_dominant(&b, &z2).unwrap();
            assert!(
                rep.all_hold,
                "entry {} vs {}, mean {} vs {}, density {} vs {}",
                rep.entry_max,
                rep.entry_bound,
                rep.mean_sup,
                rep.mean_bound,
                rep.log_density_ratio,
                rep.log_density_bound
            );
        }
    }

    #[test]
    fn dominance_certificate_synthetic_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 6;
            let mut s = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = rng.random_range(-1.0..1.0);
                    s[(i, j)] = e;
                    s[(j, i)] = e;
                }
            }
            // Scale to a max abs row sum of exactly 0.3.
            let max_row: f64 = (0..n)
                .map(|i| (0..n).map(|j| s[(i, j)].abs()).sum::<f64>())
                .fold(0.0, f64::max);
            s *= 0.3 / max_row;
            let sigma = DMatrix::identity(n, n) - s;
            let b = manual_blocks(sigma, 2);
            assert!(b.s_norm <= 0.3 + 1e-12);
            let z2 = DVector::from_fn(n - 2, |_, _| rng.random_range(-2.0..2.0));
            let rep = check_diag_dominant(&b, &z2).unwrap();
            assert!(rep.all_hold, "{rep:?}");
        }
    }

    #[test]
    fn dominance_needs_defect_below_one() {
        let mut sigma = DMatrix::identity(4, 4);
        sigma[(0, 1)] = 0.7;
        sigma[(1, 0)] = 0.7;
        sigma[(0, 2)] = 0.5;
        sigma[(2, 0)] = 0.5;
        let b = manual_blocks(sigma, 2);
        assert!(b.s_norm >= 1.0);
        let z2 = DVector::from_vec(vec![0.1, 0.1]);
        assert!(check_diag_dominant(&b, &z2).is_err());
    }

    #[test]
    fn permanent_small_cases() {
        let one = DMatrix::from_row_slice(1, 1, &[Complex64::new(1.0, 0.0)]);
        let w = wick_second_moment(&one).unwrap();
        assert_abs_diff_eq!(w.permanent, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.row_bound, 1.0, epsilon = 1e-15);

        let c = Complex64::new(0.6, 0.2);
        let two = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                c,
                c.conj(),
                Complex64::new(1.0, 0.0),
            ],
        );
        let w = wick_second_moment(&two).unwrap();
        assert_abs_diff_eq!(w.permanent, 1.0 + c.norm_sqr(), epsilon = 1e-14);
        assert!(w.permanent <= w.row_bound + 1e-9);
    }

    #[test]
    fn permanent_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let fast = ryser_permanent(&a);
        // Sum over all 4! permutations.
        let mut slow = Complex64::new(0.0, 0.0);
        let mut perm = [0usize, 1, 2, 3];
        fn heap(perm: &mut [usize; 4], k: usize, a: &DMatrix<Complex64>, acc: &mut Complex64) {
            if k == 1 {
                let mut p = Complex64::new(1.0, 0.0);
                for (i, &j) in perm.iter().enumerate() {
                    p *= a[(i, j)];
                }
                *acc += p;
                return;
            }
            for i in 0..k {
                heap(perm, k - 1, a, acc);
                if k % 2 == 0 {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        heap(&mut perm, 4, &a, &mut slow);
        assert!((fast - slow).norm() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn permanent_rejects_large_orders() {
        let big = DMatrix::from_element(13, 13, Complex64::new(1.0, 0.0));
        assert!(wick_second_moment(&big).is_err());
    }

    #[test]
    fn permanent_agrees_with_circular_mc() {
        let m = gaussian();
        let y = 0.1;
        // Hermitian covariance of (G_1, G_2, G_3) at unit spacing.
        let pts: Vec<Complex64> = (1..=3).map(|j| Complex64::new(j as f64, y)).collect();
        let k = DMatrix::from_fn(3, 3, |a, b| {
            m.covariance_complex(pts[a] - pts[b].conj()).unwrap()
        });
        let w = wick_second_moment(&k).unwrap();
        assert!(w.perm_im < 1e-12);
        assert!(w.permanent <= w.row_bound + 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (est, se) = wick_mc(&k, 200_000, &mut rng).unwrap();
        assert!(
            (est - w.permanent).abs() < 4.0 * se,
            "permanent {} vs mc {est} +- {se}",
            w.permanent
        );
    }

    #[test]
    fn g0_moment_on_axis_matches_frozen_normal_values() {
        let m = gaussian();
        // E|N(0,1)|^p at p = -1/4 and p = 0.3.
        assert_abs_diff_eq!(
            g0_abs_moment(&m, 0.0, -0.25).unwrap(),
            1.226378652486874,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            g0_abs_moment(&m, 0.0, 0.3).unwrap(),
            0.866892172957117,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(g0_abs_moment(&m, 0.0, 2.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn g0_moment_off_axis_matches_direct_sampling() {
        let m = gaussian();
        let y = 0.3;
        let v = v_moments(&m, y).unwrap();
        // Second moment has the closed value r(2iy).
        assert_abs_diff_eq!(
            g0_abs_moment(&m, y, 2.0).unwrap(),
            (2.0 * y * y).exp(),
            epsilon = 1e-10
        );
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for p in [0.5, -0.3] {
            let quad_val = g0_abs_moment(&m, y, p).unwrap();
            let reps = 300_000;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..reps {
                let x: f64 = rng.sample(StandardNormal);
                let yy: f64 = rng.sample(StandardNormal);
                let g2 = v.v_r * x * x + y * y * v.v_i * yy * yy;
                let w = g2.powf(0.5 * p);
                sum += w;
                sq += w * w;
            }
            let mean = sum / reps as f64;
            let se = ((sq / reps as f64 - mean * mean) / (reps as f64 - 1.0)).sqrt();
            assert!(
                (mean - quad_val).abs() < 5.0 * se,
                "p = {p}: quad {quad_val} vs mc {mean} +- {se}"
            );
        }
    }

    #[test]
    fn g0_moment_rejects_divergent_orders() {
        let m = gaussian();
        assert!(g0_abs_moment(&m, 0.0, -1.0).is_err());
        assert!(g0_abs_moment(&m, 0.3, -2.0).is_err());
        assert!(g0_abs_moment(&m, 0.3, -1.5).is_ok());
    }

    #[test]
    fn g0_log_moment_convex_in_order() {
        // log E|G_0|^p is convex in p; check at 0.05, 0.1, 0.2 where
        // 0.1 = (2/3) 0.05 + (1/3) 0.2.
        let m = gaussian();
        let y = 0.2;
        let l = |p: f64| g0_abs_moment(&m, y, p).unwrap().ln();
        assert!(l(0.1) <= (2.0 / 3.0) * l(0.05) + (1.0 / 3.0) * l(0.2) + 1e-12);
    }

    #[test]
    fn frac_moment_zero_eps_is_exactly_one() {
        let f = frac_moment_mc(&gaussian(), 1.0, 0.2, 4, 3, 0.0, 1000, 1).unwrap();
        assert_eq!(f.m_pos, 1.0);
        assert_eq!(f.m_neg, 1.0);
        assert_eq!(f.ref_pos, 1.0);
    }

    #[test]
    fn frac_moment_single_factor_matches_quadrature() {
        let m = gaussian();
        let (y, eps) = (0.2, 0.2);
        let f = frac_moment_mc(&m, 1.0, y, 4, 1, eps, 40_000, 2).unwrap();
        let pos = g0_abs_moment(&m, y, eps).unwrap();
        let neg = g0_abs_moment(&m, y, -eps).unwrap();
        assert!(
            (f.m_pos - pos).abs() < 4.0 * f.se_pos,
            "{} vs {pos} +- {}",
            f.m_pos,
            f.se_pos
        );
        assert!(
            (f.m_neg - neg).abs() < 4.0 * f.se_neg,
            "{} vs {neg} +- {}",
            f.m_neg,
            f.se_neg
        );
    }

    #[test]
    fn frac_moment_factorizes_at_large_gaps() {
        let m = gaussian();
        let (y, eps, mm) = (0.2, 0.2, 3);
        let f = frac_moment_mc(&m, 1.0, y, 60, mm, eps, 60_000, 3).unwrap();
        let pos = g0_abs_moment(&m, y, eps).unwrap().powi(mm as i32);
        let neg = g0_abs_moment(&m, y, -eps).unwrap().powi(mm as i32);
        assert!((f.m_pos - pos).abs() < 5.0 * f.se_pos);
        assert!((f.m_neg - neg).abs() < 5.0 * f.se_neg);
        // Cauchy-Schwarz reference dominates the positive product moment.
        assert!(f.m_pos <= f.ref_pos * (1.0 + 4.0 * f.se_pos));
    }

    #[test]
    fn frac_moment_rejects_heavy_negative_orders() {
        assert!(frac_moment_mc(&gaussian(), 1.0, 0.2, 4, 2, 0.5, 1000, 1).is_err());
        assert!(frac_moment_mc(&gaussian(), 1.0, 0.2, 4, 2, 1.1, 1000, 1).is_err());
        assert!(frac_moment_mc(&gaussian(), 1.0, 0.2, 0, 2, 0.1, 1000, 1).is_err());
    }

    /// Conditional negative moments stay uniformly bounded under lattice
    /// conditioning with a small defect norm: the constant-free analogue of
    /// the worst-case conditional bound, spot-checked by simulation.
    #[test]
    fn conditional_negative_moment_uniformly_bounded() {
        let m = gaussian();
        let (y, eps) = (0.2, 0.1);
        let p = -4.0 * eps;
        let b = assemble_joint_cov(&m, y, 1.0, &[6, 12], true).unwrap();
        let v = v_moments(&m, y).unwrap();
        let cond = schur_condition(&b.sigma, b.n1).unwrap();
        let chol = Cholesky::new(cond.cond_cov.clone()).unwrap().l();
        let unconditional = g0_abs_moment(&m, y, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let z2 = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let mu = &cond.mean_map * &z2;
            let reps = 20_000;
            let mut sum = 0.0;
            for _ in 0..reps {
                let u1: f64 = rng.sample(StandardNormal);
                let u2: f64 = rng.sample(StandardNormal);
                let x = mu[0] + chol[(0, 0)] * u1;
                let yv = mu[1] + chol[(1, 0)] * u1 + chol[(1, 1)] * u2;
                let g2 = v.v_r * x * x + y * y * v.v_i * yv * yv;
                sum += g2.powf(0.5 * p);
            }
            worst = worst.max(sum / reps as f64);
        }
        assert!(
            worst < 3.0 * unconditional,
            "worst conditional moment {worst} vs unconditional {unconditional}"
        );
    }

    #[test]
    fn covariance_csv_roundtrip() {
        let b = assemble_joint_cov(&gaussian(), 0.2, 1.0, &[2], true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sigma.csv");
        b.write_csv(&path).unwrap();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .unwrap();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), 4);
            for (j, field) in rec.iter().enumerate() {
                let val: f64 = field.parse().unwrap();
                assert_abs_diff_eq!(val, b.sigma[(i, j)], epsilon = 0.0);
            }
            rows += 1;
        }
        assert_eq!(rows, 4);
    }
}
