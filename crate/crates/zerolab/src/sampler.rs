//! Finite trigonometric synthesis of the Gaussian process, path and strip
//! evaluation, lattice averaging of continuous paths, and the m-dependent
//! split of a discrete-time spectral density.

use crate::error::{Error, Result};
use crate::quad::adaptive_segmented;
use crate::spectral::{SpectralFamily, SpectralModel};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const SUP_ERROR_GRID: usize = 4097;

/// Discrete spectral nodes (lambda_j, w_j) on the positive axis approximating
/// a symmetric measure: sum 2 w_j = 1 after normalization, and the synthesized
/// field sum_j sqrt(2 w_j)(xi_j cos lambda_j t + eta_j sin lambda_j t) has
/// covariance r_tilde(t) = sum_j 2 w_j cos(lambda_j t) exactly.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisScheme {
    pub model: String,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// sqrt(2 w_j), the per-node amplitude.
    pub amp: Vec<f64>,
    /// Node mass before normalization; its defect from 1 measures tail loss.
    pub raw_mass: f64,
    /// max |r_tilde - r| over a dense grid on [0, design_horizon].
    pub sup_error: f64,
    pub design_horizon: f64,
    /// Half-width of the strip on which the approximated model is analytic.
    pub kappa_half: f64,
    pub alpha_tilde: f64,
}

impl SynthesisScheme {
    /// Degenerate one-node scheme: the pure cosine wave
    /// xi cos(lambda t) + eta sin(lambda t).
    pub fn single(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "single-node frequency must be positive, got {lambda}"
            )));
        }
        Ok(SynthesisScheme {
            model: format!("cosine({lambda})"),
            nodes: vec![lambda],
            weights: vec![0.5],
            amp: vec![1.0],
            raw_mass: 1.0,
            sup_error: 0.0,
            design_horizon: f64::INFINITY,
            kappa_half: f64::INFINITY,
            alpha_tilde: lambda / std::f64::consts::PI,
        })
    }

    pub fn lambda_max(&self) -> f64 {
        self.nodes.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest step obeying the sampling guard dt <= pi / (4 lambda_max).
    pub fn max_step(&self) -> f64 {
        std::f64::consts::PI / (4.0 * self.lambda_max())
    }

    /// Exact covariance of the synthesized process.
    pub fn r_tilde(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| 2.0 * w * (l * t).cos())
            .sum()
    }

    /// Entire continuation of r_tilde; E f(z) conj(f(w)) = r_tilde(z - conj w).
    pub fn r_tilde_complex(&self, z: Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| (z * l).cos() * (2.0 * w))
            .sum()
    }

    fn measure_sup_error(&mut self, model: &SpectralModel, horizon: f64) -> Result<()> {
        let mut worst = 0.0_f64;
        for i in 0..SUP_ERROR_GRID {
            let t = horizon * i as f64 / (SUP_ERROR_GRID - 1) as f64;
            let err = (self.r_tilde(t) - model.covariance(t)?).abs();
            worst = worst.max(err);
        }
        self.sup_error = worst;
        Ok(())
    }
}

const PANEL_ORDER: usize = 16;

/// Node count giving sup_error well below 1e-8 out to `horizon`: enough
/// Gauss-Legendre panels that no panel sees more than about one oscillation
/// of cos(lambda t) at t = horizon.
pub fn recommended_nodes(model: &SpectralModel, horizon: f64) -> usize {
    let panels_for = |radius: f64, extra: usize| {
        PANEL_ORDER
            * ((radius * (horizon + 16.0) / (4.0 * std::f64::consts::PI)).ceil() as usize + extra)
    };
    match &model.family {
        SpectralFamily::Band { half_width } => {
            ((half_width * horizon / 2.0).ceil() as usize + 64).max(192)
        }
        SpectralFamily::Gaussian => panels_for(8.0, 16).max(384),
        SpectralFamily::BilateralExponential => panels_for(22.0, 16).max(1024),
        SpectralFamily::Tabulated { lambda, .. } => {
            panels_for(lambda.last().unwrap().abs(), 8).max(512)
        }
    }
}

/// Build a synthesis scheme for `model` accurate on [0, horizon].
///
/// Band densities get a Gauss-Legendre rule on [0, K]; unbounded densities a
/// midpoint rule on (0, R] with R chosen so the discarded tail mass is below
/// 1e-9. Weights are renormalized to unit mass; the raw mass is kept.
pub fn build_synthesis(
    model: &SpectralModel,
    horizon: f64,
    n_nodes: usize,
) -> Result<SynthesisScheme> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if n_nodes < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 8 nodes, got {n_nodes}"
        )));
    }
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match &model.family {
        SpectralFamily::Band { half_width } => {
            let gl = crate::quad::GaussLegendre::new(n_nodes);
            let k = *half_width;
            // map [-1,1] -> [0,K]; density 1/(2K) and evenness give w = glw/4
            let nodes = gl.nodes.iter().map(|&x| 0.5 * k * (x + 1.0)).collect();
            let weights = gl.weights.iter().map(|&w| 0.25 * w).collect();
            (nodes, weights)
        }
        SpectralFamily::Gaussian => panel_nodes(model, &[0.0, 8.0], n_nodes),
        SpectralFamily::BilateralExponential => panel_nodes(model, &[0.0, 22.0], n_nodes),
        SpectralFamily::Tabulated { lambda, .. } => {
            // align panel boundaries with the density kinks
            let mut cuts: Vec<f64> = lambda.iter().copied().filter(|&l| l >= 0.0).collect();
            if cuts.first() != Some(&0.0) {
                cuts.insert(0, 0.0);
            }
            panel_nodes(model, &cuts, n_nodes)
        }
    };
    let raw_mass: f64 = weights.iter().map(|w| 2.0 * w).sum();
    let scale = 1.0 / raw_mass;
    let weights: Vec<f64> = weights.iter().map(|w| w * scale).collect();
    let amp = weights.iter().map(|&w| (2.0 * w).sqrt()).collect();
    let second: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&l, &w)| 2.0 * w * l * l)
        .sum();
    let mut scheme = SynthesisScheme {
        model: model.to_string(),
        nodes,
        weights,
        amp,
        raw_mass,
        sup_error: f64::NAN,
        design_horizon: horizon,
        kappa_half: model.strip_half_width(),
        alpha_tilde: second.sqrt() / std::f64::consts::PI,
    };
    scheme.measure_sup_error(model, horizon)?;
    Ok(scheme)
}

/// Composite Gauss-Legendre nodes over [cuts[0], cuts[last]], subdividing
/// each cut interval into uniform panels so the total is about `n_target`.
fn panel_nodes(model: &SpectralModel, cuts: &[f64], n_target: usize) -> (Vec<f64>, Vec<f64>) {
    let gl = crate::quad::gl16();
    let total: f64 = cuts.last().unwrap() - cuts[0];
    let panels_total = (n_target / PANEL_ORDER).max(cuts.len() - 1);
    let mut nodes = Vec::with_capacity(panels_total * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels_total * PANEL_ORDER);
    for seg in cuts.windows(2) {
        let width = seg[1] - seg[0];
        let sub = ((panels_total as f64 * width / total).round() as usize).max(1);
        for p in 0..sub {
            let a = seg[0] + width * p as f64 / sub as f64;
            let b = seg[0] + width * (p + 1) as f64 / sub as f64;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let l = mid + half * x;
                nodes.push(l);
                weights.push(w * half * model.density(l));
            }
        }
    }
    (nodes, weights)
}

/// One draw of the synthesized Gaussian field: coefficient pairs
/// (xi_j, eta_j) scaled by the node amplitudes.
#[derive(Debug, Clone)]
pub struct Realization<'a> {
    pub scheme: &'a SynthesisScheme,
    pub amp_cos: Vec<f64>,
    pub amp_sin: Vec<f64>,
}

impl<'a> Realization<'a> {
    /// Draw xi_j, eta_j ~ N(0,1) interleaved per node, so the consumed
    /// random stream is independent of how the realization is later used.
    pub fn sample<R: Rng + ?Sized>(scheme: &'a SynthesisScheme, rng: &mut R) -> Self {
        let n = scheme.nodes.len();
        let mut amp_cos = Vec::with_capacity(n);
        let mut amp_sin = Vec::with_capacity(n);
        for j in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            let eta: f64 = rng.sample(StandardNormal);
            amp_cos.push(scheme.amp[j] * xi);
            amp_sin.push(scheme.amp[j] * eta);
        }
        Realization {
            scheme,
            amp_cos,
            amp_sin,
        }
    }

    pub fn eval_real(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for ((&l, a), b) in self.scheme.nodes.iter().zip(&self.amp_cos).zip(&self.amp_sin) {
            let (s, c) = (l * t).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// f(x + iv) through cos/sin of a complex angle:
    /// Re = sum cosh(lv) (a cos lx + b sin lx),
    /// Im = sum sinh(lv) (b cos lx - a sin lx).
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let (x, v) = (z.re, z.im);
        let mut re = 0.0;
        let mut im = 0.0;
        for ((&l, a), b) in self.scheme.nodes.iter().zip(&self.amp_cos).zip(&self.amp_sin) {
            let (s, c) = (l * x).sin_cos();
            let e = (l * v).exp();
            let ch = 0.5 * (e + 1.0 / e);
            let sh = 0.5 * (e - 1.0 / e);
            re += ch * (a * c + b * s);
            im += sh * (b * c - a * s);
        }
        Complex64::new(re, im)
    }

    /// Evaluate on a uniform grid with per-node rotation recurrences; one
    /// sin_cos per node total instead of one per node per step.
    pub fn path(&self, t0: f64, dt: f64, steps: usize) -> PathGrid {
        let n = self.scheme.nodes.len();
        let mut cj = Vec::with_capacity(n);
        let mut sj = Vec::with_capacity(n);
        let mut rot_c = Vec::with_capacity(n);
        let mut rot_s = Vec::with_capacity(n);
        for &l in &self.scheme.nodes {
            let (s0, c0) = (l * t0).sin_cos();
            cj.push(c0);
            sj.push(s0);
            let (sd, cd) = (l * dt).sin_cos();
            rot_c.push(cd);
            rot_s.push(sd);
        }
        let mut values = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.amp_cos[j] * cj[j] + self.amp_sin[j] * sj[j];
            }
            values.push(acc);
            for j in 0..n {
                let (c, s) = (cj[j], sj[j]);
                cj[j] = c * rot_c[j] - s * rot_s[j];
                sj[j] = s * rot_c[j] + c * rot_s[j];
            }
        }
        PathGrid { t0, dt, values }
    }
}

/// Real path samples on t0 + i dt.
#[derive(Debug, Clone, Serialize)]
pub struct PathGrid {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl PathGrid {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Complex samples along the horizontal line Im z = y.
#[derive(Debug, Clone)]
pub struct StripField {
    pub x0: f64,
    pub dx: f64,
    pub y: f64,
    pub values: Vec<Complex64>,
}

/// Sample the real path on a uniform grid, refusing steps that undersample
/// the top synthesis frequency.
pub fn sample_real_path(
    realization: &Realization<'_>,
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<PathGrid> {
    let required = realization.scheme.max_step();
    if !(dt > 0.0) || dt > required {
        return Err(Error::GridTooCoarse {
            dt,
            lambda_max: realization.scheme.lambda_max(),
            required,
        });
    }
    Ok(realization.path(t0, dt, steps))
}

/// Sample f along Im z = y; y must stay inside the strip where the scheme
/// approximates the model.
pub fn sample_strip_field(
    realization: &Realization<'_>,
    x0: f64,
    dx: f64,
    steps: usize,
    y: f64,
) -> Result<StripField> {
    let half = realization.scheme.kappa_half;
    if y.abs() >= half {
        return Err(Error::OutsideStrip {
            re: x0,
            im: y,
            half_width: half,
        });
    }
    let required = realization.scheme.max_step();
    if !(dx > 0.0) || dx > required {
        return Err(Error::GridTooCoarse {
            dt: dx,
            lambda_max: realization.scheme.lambda_max(),
            required,
        });
    }
    let scheme = realization.scheme;
    let n = scheme.nodes.len();
    let mut cj = Vec::with_capacity(n);
    let mut sj = Vec::with_capacity(n);
    let mut rot_c = Vec::with_capacity(n);
    let mut rot_s = Vec::with_capacity(n);
    let mut ch = Vec::with_capacity(n);
    let mut sh = Vec::with_capacity(n);
    for &l in &scheme.nodes {
        let (s0, c0) = (l * x0).sin_cos();
        cj.push(c0);
        sj.push(s0);
        let (sd, cd) = (l * dx).sin_cos();
        rot_c.push(cd);
        rot_s.push(sd);
        let e = (l * y).exp();
        ch.push(0.5 * (e + 1.0 / e));
        sh.push(0.5 * (e - 1.0 / e));
    }
    let mut values = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..n {
            let (a, b) = (realization.amp_cos[j], realization.amp_sin[j]);
            re += ch[j] * (a * cj[j] + b * sj[j]);
            im += sh[j] * (b * cj[j] - a * sj[j]);
        }
        values.push(Complex64::new(re, im));
        for j in 0..n {
            let (c, s) = (cj[j], sj[j]);
            cj[j] = c * rot_c[j] - s * rot_s[j];
            sj[j] = s * rot_c[j] + c * rot_s[j];
        }
    }
    Ok(StripField { x0, dx, y, values })
}

/// Block averages of the path over windows of width delta: variances,
/// neighbor correlation, sign-change probability, and the zero-count
/// intensity estimate (1/delta - 2) P recovered from them.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeAverage {
    pub delta: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub corr: f64,
    pub p_sign_change: f64,
    pub alpha_estimate: f64,
}

/// gamma_k = delta^-2 int_{-delta}^{delta} (delta - |u|) r(delta k + u) du,
/// the covariance of consecutive window averages of the path.
pub fn average_discretize(model: &SpectralModel, delta: f64) -> Result<LatticeAverage> {
    if !(delta > 0.0) || delta > 0.5 {
        return Err(Error::InvalidArgument(format!(
            "window width must lie in (0, 0.5], got {delta}"
        )));
    }
    let osc = model.kac_rice_alpha()?.second_moment.sqrt();
    let gamma = |k: f64| -> Result<f64> {
        let mut f = |u: f64| {
            let r = model.covariance(delta * k + u).unwrap_or(f64::NAN);
            (delta - u.abs()) * r / (delta * delta)
        };
        Ok(adaptive_segmented(&mut f, &[-delta, 0.0, delta], osc, 1e-13, 1e-12)?.value)
    };
    let gamma0 = gamma(0.0)?;
    let gamma1 = gamma(1.0)?;
    let corr = (gamma1 / gamma0).clamp(-1.0, 1.0);
    let p = corr.acos() / std::f64::consts::PI;
    Ok(LatticeAverage {
        delta,
        gamma0,
        gamma1,
        corr,
        p_sign_change: p,
        alpha_estimate: (1.0 / delta - 2.0) * p,
    })
}

/// A spectral density on [-pi, pi] for a discrete-time stationary sequence.
pub struct DiscreteSpectrum {
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub name: String,
}

const COEFF_GRID: usize = 1 << 16;

impl DiscreteSpectrum {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: &str, density: F) -> Self {
        DiscreteSpectrum {
            density: Box::new(density),
            name: name.to_string(),
        }
    }

    /// Constant density 1/(2 pi): the white sequence.
    pub fn flat() -> Self {
        Self::new("flat", |_| 0.5 / std::f64::consts::PI)
    }

    /// (1 + cos lambda) / (2 pi).
    pub fn raised_cosine() -> Self {
        Self::new("raised_cosine", |l| {
            (1.0 + l.cos()) / (2.0 * std::f64::consts::PI)
        })
    }

    pub fn density(&self, l: f64) -> f64 {
        (self.density)(l)
    }

    /// Periodic trapezoid integral of f over [-pi, pi], compensated so the
    /// summation rounding stays near one ulp.
    fn periodic_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
        let n = COEFF_GRID;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut sum = 0.0_f64;
        let mut c = 0.0_f64;
        for i in 0..n {
            let term = f(-std::f64::consts::PI + i as f64 * h) - c;
            let t = sum + term;
            c = (t - sum) - term;
            sum = t;
        }
        sum * h
    }

    /// Variance of the sequence, int p.
    pub fn variance(&self) -> f64 {
        Self::periodic_integral(|l| self.density(l))
    }

    /// Autocovariance int e^{-i n lambda} p = int cos(n lambda) p.
    pub fn autocov(&self, n_lag: i64) -> f64 {
        Self::periodic_integral(|l| (n_lag as f64 * l).cos() * self.density(l))
    }

    /// Fourier coefficients of sqrt(p) in the orthonormal convention:
    /// a_k = (2 pi)^{-1/2} int sqrt(p) cos(k lambda) d lambda, so that
    /// sum_k a_k^2 over all integer k equals the variance.
    pub fn sqrt_coeffs(&self, k_max: usize) -> Vec<f64> {
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        (0..=k_max)
            .map(|k| {
                norm * Self::periodic_integral(|l| self.density(l).max(0.0).sqrt() * (k as f64 * l).cos())
            })
            .collect()
    }

    /// Split the sequence Y into an (m-dependent-by-construction) part W and
    /// a small remainder Z by tapering the Fourier coefficients of sqrt(p_Y).
    pub fn m_dependent_split(&self, m: usize) -> Result<MDependentSplit> {
        self.m_dependent_split_with(m, 512)
    }

    pub fn m_dependent_split_with(&self, m: usize, k_cut: usize) -> Result<MDependentSplit> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "split order must be at least 2, got {m}"
            )));
        }
        let k_cut = k_cut.max(2 * m);
        let a = self.sqrt_coeffs(k_cut);
        // taper (1 - |k|/(m-1))_+ supports |k| <= m-2
        let a_m: Vec<f64> = (0..m - 1)
            .map(|k| a[k] * (1.0 - k as f64 / (m - 1) as f64))
            .collect();

        // W autocovariance c_W(n) = sum_k a^m_k a^m_{k+n} over two-sided k
        let two_sided: Vec<f64> = (-(m as i64 - 2)..=(m as i64 - 2))
            .map(|k| a_m[k.unsigned_abs() as usize])
            .collect();
        let width = two_sided.len();
        let mut cov_w = vec![0.0; 2 * width];
        for n in 0..2 * width {
            let mut c = 0.0;
            for i in 0..width {
                if i + n < width {
                    c += two_sided[i] * two_sided[i + n];
                }
            }
            cov_w[n] = c;
        }
        let dependence_range = cov_w
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &c)| c.abs() > 1e-14)
            .map(|(n, _)| n)
            .unwrap_or(0);

        // sup of p_Z on a dense symmetric grid
        let grid: Vec<f64> = (0..SUP_GRID)
            .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / (SUP_GRID - 1) as f64)
            .collect();
        let mut eps_m = 0.0_f64;
        let mut s_min = f64::INFINITY;
        for &l in &grid {
            let s = s_eval(&a_m, l);
            s_min = s_min.min(s);
            let root = self.density(l).max(0.0).sqrt();
            let z = (root - s) * (root - s);
            eps_m = eps_m.max(z);
        }
        let var_y = self.variance();
        let var_w: f64 = cov_w[0];
        let tail_var = var_y - a.iter().map(|x| x * x).sum::<f64>() * 2.0 + a[0] * a[0];

        Ok(MDependentSplit {
            m,
            a,
            a_m,
            cov_w,
            eps_m,
            s_min,
            dependence_range,
            var_y,
            var_w,
            coeff_tail_defect: tail_var,
        })
    }
}

const SUP_GRID: usize = (1 << 14) + 1;

fn s_eval(a_m: &[f64], l: f64) -> f64 {
    let mut s = a_m[0];
    for (k, &c) in a_m.iter().enumerate().skip(1) {
        s += 2.0 * c * (k as f64 * l).cos();
    }
    s / (2.0 * std::f64::consts::PI).sqrt()
}

/// Outcome of the taper split: Y = W + Z in spectral form, where
/// sqrt(p_W) = s is the tapered cosine polynomial and p_Z = (sqrt(p_Y) - s)^2.
#[derive(Debug, Clone, Serialize)]
pub struct MDependentSplit {
    pub m: usize,
    /// Untapered coefficients a_0..a_kcut of sqrt(p_Y).
    pub a: Vec<f64>,
    /// Tapered coefficients, support k <= m-2.
    pub a_m: Vec<f64>,
    /// Autocovariance of W at lags 0, 1, 2, ...
    pub cov_w: Vec<f64>,
    /// sup p_Z over a dense grid.
    pub eps_m: f64,
    /// min of s over the grid (nonnegative by the Fejér taper).
    pub s_min: f64,
    /// Largest lag with nonzero W-autocovariance.
    pub dependence_range: usize,
    pub var_y: f64,
    pub var_w: f64,
    /// Variance unaccounted for by the kept coefficients of sqrt(p_Y).
    pub coeff_tail_defect: f64,
}

impl MDependentSplit {
    pub fn s(&self, l: f64) -> f64 {
        s_eval(&self.a_m, l)
    }

    pub fn p_w(&self, l: f64) -> f64 {
        let s = self.s(l);
        s * s
    }

    pub fn p_z(&self, root_p_y: f64, l: f64) -> f64 {
        let d = root_p_y - self.s(l);
        d * d
    }

    pub fn cov_w_at(&self, n_lag: usize) -> f64 {
        self.cov_w.get(n_lag).copied().unwrap_or(0.0)
    }

    /// W_t = sum_{|k| <= m-2} a^m_k xi_{t+k}: a finite moving average, so
    /// exactly (2m-3)-dependent.
    pub fn sample_w<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        sample_ma(&self.a_m, n, rng)
    }

    /// Y_t from the truncated two-sided MA with the untapered coefficients;
    /// `coeff_tail_defect` bounds the variance it misses.
    pub fn sample_y<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        sample_ma(&self.a, n, rng)
    }
}

/// Two-sided symmetric moving average sum_{|k| <= K} c_{|k|} xi_{t+k}.
pub fn sample_ma<R: Rng + ?Sized>(coeffs: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    let k = coeffs.len() - 1;
    let m = n + 2 * k;
    let xi: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        // xi index t+k corresponds to lag 0
        let mut acc = coeffs[0] * xi[t + k];
        for j in 1..=k {
            acc += coeffs[j] * (xi[t + k - j] + xi[t + k + j]);
        }
        out.push(acc);
    }
    out
}
