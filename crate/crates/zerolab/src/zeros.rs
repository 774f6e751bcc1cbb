//! Zero counting on the real line and in disks: sign-change scans with
//! bisection refinement, winding-number counts over circles, Jensen-type
//! log-modulus integrals with their sandwich bound, and disk covers of an
//! interval.

use crate::error::{Error, Result};
use crate::sampler::{PathGrid, Realization};
use num_complex::Complex64;
use serde::Serialize;

/// Anything we can evaluate at a complex point.
pub trait AnalyticField {
    fn eval(&self, z: Complex64) -> Complex64;
}

impl AnalyticField for Realization<'_> {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_complex(z)
    }
}

impl<F: Fn(Complex64) -> Complex64> AnalyticField for F {
    fn eval(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

/// Strict sign flips between adjacent grid values. Grid points that are
/// exactly zero never contribute a flip; they are flagged instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignScan {
    pub count: usize,
    pub grid_zeros: usize,
}

pub fn count_sign_changes(values: &[f64]) -> SignScan {
    let mut count = 0;
    let mut grid_zeros = 0;
    for v in values {
        if *v == 0.0 {
            grid_zeros += 1;
        }
    }
    for w in values.windows(2) {
        if w[0] * w[1] < 0.0 {
            count += 1;
        }
    }
    SignScan { count, grid_zeros }
}

/// Sign changes of a sampled path, with each bracketing interval refined by
/// bisection when an evaluator is supplied (midpoints otherwise).
#[derive(Debug, Clone, Serialize)]
pub struct ZeroReport {
    pub count: usize,
    pub grid_zeros: usize,
    pub locations: Vec<f64>,
}

pub fn count_zeros_real(
    path: &PathGrid,
    refine: Option<&dyn Fn(f64) -> f64>,
    refine_iters: usize,
) -> ZeroReport {
    let scan = count_sign_changes(&path.values);
    let mut locations = Vec::with_capacity(scan.count);
    for i in 0..path.values.len().saturating_sub(1) {
        let (va, vb) = (path.values[i], path.values[i + 1]);
        if va * vb >= 0.0 {
            continue;
        }
        let (mut a, mut b) = (path.time(i), path.time(i + 1));
        if let Some(f) = refine {
            let mut fa = va;
            for _ in 0..refine_iters {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
        }
        locations.push(0.5 * (a + b));
    }
    ZeroReport {
        count: scan.count,
        grid_zeros: scan.grid_zeros,
        locations,
    }
}

/// Controls for the winding-number count.
#[derive(Debug, Clone)]
pub struct WindingParams {
    pub base_points: usize,
    pub max_points: usize,
    /// Accept a winding this far from the nearest integer.
    pub integer_tol: f64,
    /// Inflate the radius by this factor when a guard trips.
    pub retry_factor: f64,
    pub max_retries: usize,
    /// Contour is "too close to a zero" when min|f| < this times max|f|.
    pub min_abs_ratio: f64,
}

impl Default for WindingParams {
    fn default() -> Self {
        WindingParams {
            base_points: 256,
            max_points: 1 << 16,
            integer_tol: 0.1,
            retry_factor: 1.001,
            max_retries: 5,
            min_abs_ratio: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiskCount {
    pub count: i64,
    pub winding_raw: f64,
    pub radius_used: f64,
    /// Radius inflations performed before the count was accepted.
    pub attempts: usize,
    pub points: usize,
}

/// Zeros of an analytic field inside a disk, counted with multiplicity by
/// the total change of arg f around the circle.
pub fn count_zeros_disk<G: AnalyticField + ?Sized>(
    f: &G,
    center: Complex64,
    radius: f64,
    params: &WindingParams,
) -> Result<DiskCount> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "disk radius must be positive, got {radius}"
        )));
    }
    let mut r = radius;
    let mut last_err = None;
    for attempt in 0..=params.max_retries {
        match winding_once(f, center, r, params) {
            Ok((w, points)) => {
                let nearest = w.round();
                if (w - nearest).abs() <= params.integer_tol && nearest >= 0.0 {
                    return Ok(DiskCount {
                        count: nearest as i64,
                        winding_raw: w,
                        radius_used: r,
                        attempts: attempt,
                        points,
                    });
                }
                last_err = Some(Error::NonIntegerWinding {
                    value: w,
                    tol: params.integer_tol,
                    attempts: attempt as u32 + 1,
                });
            }
            Err(e) => last_err = Some(e),
        }
        r *= params.retry_factor;
    }
    Err(last_err.unwrap())
}

/// One pass of the phase-tracking winding integral with node doubling.
fn winding_once<G: AnalyticField + ?Sized>(
    f: &G,
    center: Complex64,
    radius: f64,
    params: &WindingParams,
) -> Result<(f64, usize)> {
    let eval_circle = |m: usize| -> Vec<Complex64> {
        (0..m)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                f.eval(center + radius * Complex64::new(th.cos(), th.sin()))
            })
            .collect()
    };
    let mut m = params.base_points;
    let mut prev: Option<f64> = None;
    loop {
        let vals = eval_circle(m);
        let max_abs = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let min_abs = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min_abs > params.min_abs_ratio * max_abs) {
            return Err(Error::ContourNearZero {
                min_abs,
                attempts: 1,
            });
        }
        let mut total = 0.0;
        let mut max_step = 0.0_f64;
        for k in 0..m {
            let a = vals[k];
            let b = vals[(k + 1) % m];
            let d = (b * a.conj()).arg();
            max_step = max_step.max(d.abs());
            total += d;
        }
        let w = total / (2.0 * std::f64::consts::PI);
        if max_step < std::f64::consts::FRAC_PI_2 {
            if let Some(p) = prev {
                if (p - w).abs() < 1e-3 {
                    return Ok((w, m));
                }
            }
            prev = Some(w);
        }
        m *= 2;
        if m > params.max_points {
            return Ok((prev.unwrap_or(f64::NAN), m / 2));
        }
    }
}

/// Mean of log|f| over the circle of given radius, by doubled midpoint rules.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JensenGamma {
    pub value: f64,
    pub converged: bool,
    pub points: usize,
}

pub const JENSEN_TOL: f64 = 1e-6;
const JENSEN_BASE: usize = 256;
const JENSEN_MAX: usize = 1 << 14;

pub fn jensen_gamma<G: AnalyticField + ?Sized>(
    f: &G,
    center: Complex64,
    radius: f64,
) -> Result<JensenGamma> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "circle radius must be positive, got {radius}"
        )));
    }
    // mean over m points at offsets k/m, refined by interleaving midpoints
    let log_abs = |th: f64| -> Result<f64> {
        let z = center + radius * Complex64::new(th.cos(), th.sin());
        let a = f.eval(z).norm();
        if a == 0.0 {
            return Err(Error::ContourNearZero {
                min_abs: 0.0,
                attempts: 1,
            });
        }
        Ok(a.ln())
    };
    let tau = 2.0 * std::f64::consts::PI;
    let mut m = JENSEN_BASE;
    let mut sum = 0.0;
    for k in 0..m {
        sum += log_abs(tau * k as f64 / m as f64)?;
    }
    let mut mean = sum / m as f64;
    loop {
        let mut mid_sum = 0.0;
        for k in 0..m {
            mid_sum += log_abs(tau * (k as f64 + 0.5) / m as f64)?;
        }
        let next = 0.5 * (mean + mid_sum / m as f64);
        let delta = (next - mean).abs();
        mean = next;
        m *= 2;
        if delta <= JENSEN_TOL {
            return Ok(JensenGamma {
                value: mean,
                converged: true,
                points: m,
            });
        }
        if m >= JENSEN_MAX {
            return Ok(JensenGamma {
                value: mean,
                converged: false,
                points: m,
            });
        }
    }
}

/// Jensen sandwich around a disk: with G(b) the circle mean of log|f| at
/// radius delta e^b, the ratio (G(beta) - G(0))/beta is squeezed between the
/// zero counts at radius delta and delta e^beta.
#[derive(Debug, Clone, Serialize)]
pub struct JensenSandwich {
    pub gamma_inner: f64,
    pub gamma_outer: f64,
    pub ratio: f64,
    pub n_inner: i64,
    pub n_outer: i64,
    pub holds: bool,
    pub converged: bool,
    pub attempts: usize,
    pub radius_inner: f64,
    pub radius_outer: f64,
}

pub fn jensen_sandwich<G: AnalyticField + ?Sized>(
    f: &G,
    center: Complex64,
    delta: f64,
    beta: f64,
) -> Result<JensenSandwich> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    // both radii inflate together so the sandwich stays aligned
    let single = WindingParams {
        max_retries: 0,
        ..WindingParams::default()
    };
    let mut last_err: Option<Error> = None;
    for attempt in 0..=5 {
        let bump = 1.001_f64.powi(attempt as i32);
        let r_in = delta * bump;
        let r_out = delta * beta.exp() * bump;
        let trial = (|| -> Result<JensenSandwich> {
            let n_inner = count_zeros_disk(f, center, r_in, &single)?;
            let n_outer = count_zeros_disk(f, center, r_out, &single)?;
            let g_in = jensen_gamma(f, center, r_in)?;
            let g_out = jensen_gamma(f, center, r_out)?;
            let ratio = (g_out.value - g_in.value) / beta;
            let slack = 2.0 * JENSEN_TOL / beta + 1e-9;
            Ok(JensenSandwich {
                gamma_inner: g_in.value,
                gamma_outer: g_out.value,
                ratio,
                n_inner: n_inner.count,
                n_outer: n_outer.count,
                holds: n_inner.count as f64 <= ratio + slack
                    && ratio <= n_outer.count as f64 + slack,
                converged: g_in.converged && g_out.converged,
                attempts: attempt,
                radius_inner: r_in,
                radius_outer: r_out,
            })
        })();
        match trial {
            Ok(s) => return Ok(s),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// Zero counts over a cover of [0, T] by disks of radius delta centered at
/// (2j-1) delta: every real zero of [0, T] lies in at least one disk, and
/// radius inflation by retries only widens the cover.
#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub delta: f64,
    pub n_disks: usize,
    pub per_disk: Vec<i64>,
    pub total: i64,
    pub retried_disks: usize,
}

pub fn cover_count<G: AnalyticField + ?Sized>(
    f: &G,
    t_len: f64,
    delta: f64,
    params: &WindingParams,
) -> Result<CoverReport> {
    if !(t_len > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cover needs positive length and radius, got {t_len}, {delta}"
        )));
    }
    let n_disks = (t_len / (2.0 * delta)).ceil() as usize;
    let mut per_disk = Vec::with_capacity(n_disks);
    let mut total = 0;
    let mut retried = 0;
    for j in 1..=n_disks {
        let center = Complex64::new((2 * j - 1) as f64 * delta, 0.0);
        let dc = count_zeros_disk(f, center, delta, params)?;
        if dc.attempts > 0 {
            retried += 1;
        }
        total += dc.count;
        per_disk.push(dc.count);
    }
    Ok(CoverReport {
        delta,
        n_disks,
        per_disk,
        total,
        retried_disks: retried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{build_synthesis, recommended_nodes, sample_real_path, Realization};
    use crate::spectral::SpectralModel;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_scan_counts_strict_flips_and_flags_grid_zeros() {
        let scan = count_sign_changes(&[1.0, -1.0, -1.0, 2.0, 0.0, 3.0, -4.0]);
        assert_eq!(scan, SignScan { count: 3, grid_zeros: 1 });
        assert_eq!(count_sign_changes(&[]).count, 0);
        assert_eq!(count_sign_changes(&[0.0, 0.0]).grid_zeros, 2);
    }

    #[test]
    fn real_zero_refinement_finds_sine_roots() {
        let f = |t: f64| t.sin();
        let values: Vec<f64> = (0..200).map(|i| f(0.1 + 0.05 * i as f64)).collect();
        let path = PathGrid { t0: 0.1, dt: 0.05, values };
        let rep = count_zeros_real(&path, Some(&f), 60);
        assert_eq!(rep.count, 3);
        let expect = [std::f64::consts::PI, 2.0 * std::f64::consts::PI, 3.0 * std::f64::consts::PI];
        for (loc, e) in rep.locations.iter().zip(expect) {
            assert_abs_diff_eq!(*loc, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn winding_counts_polynomial_roots_with_multiplicity() {
        let f = |z: Complex64| {
            (z - Complex64::new(1.0, 0.0))
                * (z - Complex64::new(-0.5, 0.3))
                * (z - Complex64::new(-0.5, 0.3))
                * (z - Complex64::new(4.0, 0.0))
        };
        let p = WindingParams::default();
        let d = count_zeros_disk(&f, Complex64::new(0.0, 0.0), 2.0, &p).unwrap();
        assert_eq!(d.count, 3); // simple root + double root, far root excluded
        assert!((d.winding_raw - 3.0).abs() < 1e-6);
        let d = count_zeros_disk(&f, Complex64::new(4.0, 0.0), 0.5, &p).unwrap();
        assert_eq!(d.count, 1);
        let d = count_zeros_disk(&f, Complex64::new(0.0, 10.0), 1.0, &p).unwrap();
        assert_eq!(d.count, 0);
    }

    #[test]
    fn winding_is_monotone_in_radius() {
        let f = |z: Complex64| (z - 0.3) * (z + 0.7) * (z - Complex64::new(0.0, 1.2));
        let p = WindingParams::default();
        let mut prev = 0;
        for r in [0.1, 0.5, 1.0, 1.5, 3.0] {
            let d = count_zeros_disk(&f, Complex64::new(0.0, 0.0), r, &p).unwrap();
            assert!(d.count >= prev);
            prev = d.count;
        }
        assert_eq!(prev, 3);
    }

    #[test]
    fn contour_through_zero_recovers_by_inflation() {
        // zero exactly on the unit circle
        let f = |z: Complex64| z - Complex64::new(1.0, 0.0);
        let p = WindingParams::default();
        let d = count_zeros_disk(&f, Complex64::new(0.0, 0.0), 1.0, &p).unwrap();
        assert_eq!(d.count, 1);
        assert!(d.attempts > 0);
        assert!(d.radius_used > 1.0);
    }

    #[test]
    fn branch_cut_field_reports_non_integer_winding() {
        // a genuine half-winding: f = exp(i arg(z) / 2)
        let f = |z: Complex64| Complex64::from_polar(1.0, 0.5 * z.arg());
        let p = WindingParams::default();
        let err = count_zeros_disk(&f, Complex64::new(0.0, 0.0), 1.0, &p).unwrap_err();
        assert!(matches!(err, Error::NonIntegerWinding { .. }), "{err:?}");
    }

    #[test]
    fn jensen_gamma_mean_value_property() {
        // mean of log|z - a| over circle radius r centered 0 is
        // log max(|a|, r)
        let a = Complex64::new(2.0, 0.0);
        let f = move |z: Complex64| z - a;
        let g = jensen_gamma(&f, Complex64::new(0.0, 0.0), 1.0).unwrap();
        assert!(g.converged);
        assert_abs_diff_eq!(g.value, 2.0_f64.ln(), epsilon = 1e-6);
        let g = jensen_gamma(&f, Complex64::new(0.0, 0.0), 5.0).unwrap();
        assert_abs_diff_eq!(g.value, 5.0_f64.ln(), epsilon = 1e-5);
        let id = |z: Complex64| z;
        let g = jensen_gamma(&id, Complex64::new(0.0, 0.0), 3.0).unwrap();
        assert_abs_diff_eq!(g.value, 3.0_f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn jensen_sandwich_squeezes_sine_zero_counts() {
        let f = |z: Complex64| z.sin();
        let s = jensen_sandwich(&f, Complex64::new(1.5, 0.0), 2.0, 0.25).unwrap();
        // zeros 0 and pi lie within distance 2 of 1.5
        assert_eq!(s.n_inner, 2);
        assert!(s.holds, "{s:?}");
        assert!(s.converged);
        assert!(s.n_inner as f64 <= s.ratio + 1e-3);
        assert!(s.ratio <= s.n_outer as f64 + 1e-3);
    }

    #[test]
    fn cover_counts_all_sine_zeros() {
        let f = |z: Complex64| z.sin();
        let p = WindingParams::default();
        let rep = cover_count(&f, 10.0, 0.5, &p).unwrap();
        assert_eq!(rep.n_disks, 10);
        // real zeros in [0, 10]: 0, pi, 2pi, 3pi
        assert!(rep.total >= 4, "total {}", rep.total);
        assert!(rep.total <= 8, "total {}", rep.total);
        // 0 sits on the first contour, so at least one disk retried
        assert!(rep.retried_disks >= 1);
    }

    #[test]
    fn winding_agrees_with_sign_scan_on_synthesized_path() {
        let model = SpectralModel::band(1.0).unwrap();
        let scheme = build_synthesis(&model, 40.0, recommended_nodes(&model, 40.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let f = Realization::sample(&scheme, &mut rng);
        let dt = scheme.max_step().min(0.05);
        let steps = (30.0 / dt) as usize + 1;
        let path = sample_real_path(&f, 0.0, dt, steps).unwrap();
        let eval = |t: f64| f.eval_real(t);
        let rep = count_zeros_real(&path, Some(&eval), 50);
        for &loc in &rep.locations {
            assert!(f.eval_real(loc).abs() < 1e-9, "residual at {loc}");
        }
        let cover = cover_count(&f, 30.0, 0.5, &WindingParams::default()).unwrap();
        assert!(
            cover.total >= rep.count as i64,
            "cover {} < scan {}",
            cover.total,
            rep.count
        );
    }
}
