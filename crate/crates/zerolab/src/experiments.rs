//! Monte Carlo studies over the synthesized process: zero-count means,
//! concentration tails of |N_X([0,T]) - alpha T| with exponential-rate fits,
//! the discrete sign-change analogue, and reproducible persistence (CSV plus
//! a JSON manifest that replays to byte-identical output).

use crate::error::{Error, Result};
use crate::sampler::{
    build_synthesis, recommended_nodes, sample_real_path, DiscreteSpectrum, Realization,
    SynthesisScheme,
};
use crate::special::clopper_pearson;
use crate::spectral::SpectralModel;
use crate::zeros::count_zeros_real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};

/// Resolution floor of the step policy dt = min(pi/(4 lambda_max), DT_CAP).
pub const DT_CAP: f64 = 0.05;
/// Largest tolerated sup|r_tilde - r| on the study horizon.
pub const SUP_ERROR_LIMIT: f64 = 1e-6;
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TailConfig {
    pub model: SpectralModel,
    pub t_values: Vec<f64>,
    pub etas: Vec<f64>,
    /// Replicates per T; every eta is evaluated on the same replicate set.
    pub replicates: usize,
    pub master_seed: u64,
    /// Rayon thread count; 0 delegates to the global default. The results
    /// are aggregated in replicate order, so this must never change them.
    pub workers: usize,
    pub dt_cap: f64,
}

impl TailConfig {
    pub fn new(model: SpectralModel, t_values: Vec<f64>, etas: Vec<f64>, replicates: usize) -> Self {
        TailConfig {
            model,
            t_values,
            etas,
            replicates,
            master_seed: 0,
            workers: 1,
            dt_cap: DT_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(Error::InvalidArgument(format!(
                "need >= 100 replicates per cell, got {}",
                self.replicates
            )));
        }
        if self.t_values.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument("every T must be positive".into()));
        }
        if self.etas.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument("every eta must be positive".into()));
        }
        if !(self.dt_cap > 0.0) {
            return Err(Error::InvalidArgument("dt_cap must be positive".into()));
        }
        Ok(())
    }
}

/// One (T, eta) cell. `hits` counts |N - alpha T| >= eta T; the split counts
/// use the one-sided events N - alpha T <= -eta T and >= eta T, plus the
/// >= 3 eta T excess that the asymmetric upper-tail statement tracks.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TailResult {
    pub t: f64,
    pub eta: f64,
    pub replicates: usize,
    pub hits: u64,
    pub lower_hits: u64,
    pub upper_hits: u64,
    pub upper3_hits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Least-squares slope of -log p_hat against T for one eta; zero-hit cells
/// are censored rather than continuity-corrected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateFit {
    pub eta: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridInfo {
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
    pub mean_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TailStudy {
    pub config: TailConfig,
    /// Zero intensity of the exact model; the centering constant.
    pub alpha: f64,
    /// Zero intensity of the synthesized covariance, reported so the
    /// discretization gap is attributable.
    pub alpha_tilde: f64,
    pub sup_error: f64,
    pub grids: Vec<GridInfo>,
    pub results: Vec<TailResult>,
    pub fits: Vec<RateFit>,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Replicate-indexed generator: a fixed master seed with the replicate id as
/// the stream, so any subset of replicates can be regenerated independently
/// of scheduling.
fn replicate_rng(master_seed: u64, block: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((block << 32) | replicate as u64);
    rng
}

/// Uniform grid covering [0, t] at step <= min(scheme.max_step(), dt_cap):
/// returns (dt, steps) with dt dividing t exactly and steps grid points.
pub fn grid_policy(scheme: &SynthesisScheme, t: f64, dt_cap: f64) -> Result<(f64, usize)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {t}"
        )));
    }
    if !(dt_cap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step cap must be positive, got {dt_cap}"
        )));
    }
    let dt_policy = scheme.max_step().min(dt_cap);
    let intervals = (t / dt_policy).ceil() as usize;
    Ok((t / intervals as f64, intervals + 1))
}

fn zero_counts(
    scheme: &SynthesisScheme,
    t: f64,
    dt_cap: f64,
    replicates: usize,
    master_seed: u64,
    block: u64,
    pool: &rayon::ThreadPool,
) -> Result<(f64, usize, Vec<usize>)> {
    let (dt, steps) = grid_policy(scheme, t, dt_cap)?;
    let counts: Result<Vec<usize>> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replicate_rng(master_seed, block, rep);
                let f = Realization::sample(scheme, &mut rng);
                let path = sample_real_path(&f, 0.0, dt, steps)?;
                Ok(count_zeros_real(&path, None, 0).count)
            })
            .collect()
    });
    Ok((dt, steps, counts?))
}

pub fn run_tail_study(config: &TailConfig) -> Result<TailStudy> {
    config.validate()?;
    let model = &config.model;
    let alpha = model.kac_rice_alpha()?.alpha;
    let t_max = config.t_values.iter().cloned().fold(0.0, f64::max);
    if config.t_values.is_empty() {
        return Err(Error::InvalidArgument("no T values given".into()));
    }
    let scheme = build_synthesis(model, t_max, recommended_nodes(model, t_max))?;
    if scheme.sup_error > SUP_ERROR_LIMIT {
        return Err(Error::QuadratureNonConvergence {
            estimate: scheme.sup_error,
            tolerance: SUP_ERROR_LIMIT,
        });
    }
    let pool = thread_pool(config.workers)?;

    let mut grids = Vec::with_capacity(config.t_values.len());
    let mut results = Vec::with_capacity(config.t_values.len() * config.etas.len());
    for (ti, &t) in config.t_values.iter().enumerate() {
        let (dt, steps, counts) = zero_counts(
            &scheme,
            t,
            config.dt_cap,
            config.replicates,
            config.master_seed,
            ti as u64,
            &pool,
        )?;
        let mean_rate =
            counts.iter().map(|&c| c as f64).sum::<f64>() / (config.replicates as f64 * t);
        grids.push(GridInfo {
            t,
            dt,
            steps,
            mean_rate,
        });
        for &eta in &config.etas {
            let mut hits = 0u64;
            let mut lower = 0u64;
            let mut upper = 0u64;
            let mut upper3 = 0u64;
            for &c in &counts {
                let dev = c as f64 - alpha * t;
                if dev <= -eta * t {
                    lower += 1;
                }
                if dev >= eta * t {
                    upper += 1;
                }
                if dev.abs() >= eta * t {
                    hits += 1;
                }
                if dev >= 3.0 * eta * t {
                    upper3 += 1;
                }
            }
            let n = config.replicates as u64;
            let (ci_lo, ci_hi) = clopper_pearson(hits, n, CONFIDENCE);
            results.push(TailResult {
                t,
                eta,
                replicates: config.replicates,
                hits,
                lower_hits: lower,
                upper_hits: upper,
                upper3_hits: upper3,
                p_hat: hits as f64 / n as f64,
                ci_lo,
                ci_hi,
            });
        }
    }

    let fits = config
        .etas
        .iter()
        .filter_map(|&eta| fit_rate(&results, eta))
        .collect();
    Ok(TailStudy {
        config: config.clone(),
        alpha,
        alpha_tilde: scheme.alpha_tilde,
        sup_error: scheme.sup_error,
        grids,
        results,
        fits,
    })
}

/// Slope of -log p_hat vs T over the cells with nonzero hits; None when
/// fewer than 3 such cells exist (censored).
pub fn fit_rate(results: &[TailResult], eta: f64) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.eta == eta && r.hits > 0)
        .map(|r| (r.t, -r.p_hat.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(RateFit {
        eta,
        slope,
        intercept,
        r_squared,
        points: pts.len(),
        t_min: pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        t_max: pts.iter().map(|p| p.0).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanStudy {
    pub t: f64,
    pub replicates: usize,
    /// Monte Carlo mean of N_X([0,T]) / T.
    pub mean_rate: f64,
    pub se: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
}

pub fn run_mean_study(model: &SpectralModel, t: f64, replicates: usize, seed: u64) -> Result<MeanStudy> {
    let scheme = build_synthesis(model, t, recommended_nodes(model, t))?;
    if scheme.sup_error > SUP_ERROR_LIMIT {
        return Err(Error::QuadratureNonConvergence {
            estimate: scheme.sup_error,
            tolerance: SUP_ERROR_LIMIT,
        });
    }
    let alpha = model.kac_rice_alpha()?.alpha;
    run_mean_study_scheme(&scheme, alpha, t, replicates, seed)
}

/// Mean-rate study against an explicit synthesis scheme, so degenerate
/// single-frequency processes can be measured too.
pub fn run_mean_study_scheme(
    scheme: &SynthesisScheme,
    alpha: f64,
    t: f64,
    replicates: usize,
    seed: u64,
) -> Result<MeanStudy> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need >= 2 replicates".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("bad horizon T = {t}")));
    }
    let pool = thread_pool(1)?;
    let (_, _, counts) = zero_counts(scheme, t, DT_CAP, replicates, seed, 0, &pool)?;
    let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
    let n = replicates as f64;
    let mean_rate = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean_rate) * (r - mean_rate)).sum::<f64>() / (n - 1.0);
    Ok(MeanStudy {
        t,
        replicates,
        mean_rate,
        se: (var / n).sqrt(),
        alpha,
        alpha_tilde: scheme.alpha_tilde,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SignChangeResult {
    pub eta: f64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Two-sided Hoeffding bound 2 exp(-2 eta^2 T), exact for iid signs.
    pub iid_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SignChangeStudy {
    pub spectrum: String,
    pub t: usize,
    pub replicates: usize,
    /// arccos of the lag-1 autocorrelation over pi: the exact per-pair
    /// sign-change probability of the stationary Gaussian sequence.
    pub change_rate: f64,
    pub mean_changes: f64,
    pub results: Vec<SignChangeResult>,
}

/// Concentration of the sign-change count N* over T adjacent pairs of the
/// discrete process, centered at its exact mean (change_rate * T).
pub fn run_sign_change_study(
    spectrum: &DiscreteSpectrum,
    t: usize,
    etas: &[f64],
    replicates: usize,
    seed: u64,
    coeff_cut: usize,
) -> Result<SignChangeStudy> {
    if t == 0 || replicates < 100 {
        return Err(Error::InvalidArgument(
            "need T >= 1 and >= 100 replicates".into(),
        ));
    }
    if etas.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("every eta must be positive".into()));
    }
    let gamma0 = spectrum.variance();
    let rho1 = spectrum.autocov(1) / gamma0;
    let change_rate = rho1.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    let coeffs = spectrum.sqrt_coeffs(coeff_cut);

    let mut changes = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = replicate_rng(seed, 0, rep);
        let y = crate::sampler::sample_ma(&coeffs, t + 1, &mut rng);
        let mut n_star = 0usize;
        for w in y.windows(2) {
            if w[0] * w[1] < 0.0 {
                n_star += 1;
            }
        }
        changes.push(n_star);
    }
    let mean_changes =
        changes.iter().map(|&c| c as f64).sum::<f64>() / replicates as f64;

    let expected = change_rate * t as f64;
    let mut results = Vec::with_capacity(etas.len());
    for &eta in etas {
        let hits = changes
            .iter()
            .filter(|&&c| (c as f64 - expected).abs() >= eta * t as f64)
            .count() as u64;
        let (ci_lo, ci_hi) = clopper_pearson(hits, replicates as u64, CONFIDENCE);
        results.push(SignChangeResult {
            eta,
            hits,
            p_hat: hits as f64 / replicates as f64,
            ci_lo,
            ci_hi,
            iid_bound: 2.0 * (-2.0 * eta * eta * t as f64).exp(),
        });
    }
    Ok(SignChangeStudy {
        spectrum: spectrum.name.clone(),
        t,
        replicates,
        change_rate,
        mean_changes,
        results,
    })
}

/// Study artifacts on disk: `tail_results.csv`, `rate_fits.csv`, and
/// `manifest.json` carrying the config, seeds, software version, and the
/// synthesis sup-error. Reruns from the same manifest byte-match the CSVs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub config: TailConfig,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub sup_error: f64,
    pub grids: Vec<GridInfo>,
    pub files: Vec<String>,
}

pub const TAIL_CSV: &str = "tail_results.csv";
pub const FITS_CSV: &str = "rate_fits.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Shortest round-trip decimal: bytes are reproducible and parse back to the
/// identical f64.
fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn persist_tail(study: &TailStudy, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let tail_path = dir.join(TAIL_CSV);
    {
        let mut out = std::io::BufWriter::new(fs::File::create(&tail_path)?);
        writeln!(out, "t,eta,side,hits,replicates,p_hat,ci_lo,ci_hi")?;
        for r in &study.results {
            let n = r.replicates as u64;
            for (side, hits) in [
                ("two_sided", r.hits),
                ("lower", r.lower_hits),
                ("upper", r.upper_hits),
                ("upper3x", r.upper3_hits),
            ] {
                let (lo, hi) = clopper_pearson(hits, n, CONFIDENCE);
                writeln!(
                    out,
                    "{},{},{side},{hits},{n},{},{},{}",
                    fmt(r.t),
                    fmt(r.eta),
                    fmt(hits as f64 / n as f64),
                    fmt(lo),
                    fmt(hi)
                )?;
            }
        }
    }
    let fits_path = dir.join(FITS_CSV);
    {
        let mut out = std::io::BufWriter::new(fs::File::create(&fits_path)?);
        writeln!(out, "eta,slope,intercept,r_squared,points,t_min,t_max")?;
        for f in &study.fits {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt(f.eta),
                fmt(f.slope),
                fmt(f.intercept),
                fmt(f.r_squared),
                f.points,
                fmt(f.t_min),
                fmt(f.t_max)
            )?;
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: study.config.clone(),
        alpha: study.alpha,
        alpha_tilde: study.alpha_tilde,
        sup_error: study.sup_error,
        grids: study.grids.clone(),
        files: vec![TAIL_CSV.to_string(), FITS_CSV.to_string()],
    };
    let mut out = fs::File::create(dir.join(MANIFEST_JSON))?;
    out.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(manifest)
}

/// Rebuild the full study from the artifacts; exact because the CSV floats
/// are shortest round-trip decimals.
pub fn load_tail(dir: &Path) -> Result<TailStudy> {
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.join(MANIFEST_JSON))?)?;
    let file = fs::File::open(dir.join(TAIL_CSV))?;
    let mut results: Vec<TailResult> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::InvalidArgument(format!(
                "malformed tail row: {line}"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::InvalidArgument(format!("bad float {s}: {e}")))
        };
        let t = parse(cols[0])?;
        let eta = parse(cols[1])?;
        let hits: u64 = cols[3]
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad count: {e}")))?;
        let n: u64 = cols[4]
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad count: {e}")))?;
        match cols[2] {
            "two_sided" => results.push(TailResult {
                t,
                eta,
                replicates: n as usize,
                hits,
                lower_hits: 0,
                upper_hits: 0,
                upper3_hits: 0,
                p_hat: parse(cols[5])?,
                ci_lo: parse(cols[6])?,
                ci_hi: parse(cols[7])?,
            }),
            side @ ("lower" | "upper" | "upper3x") => {
                let last = results.last_mut().ok_or_else(|| {
                    Error::InvalidArgument(format!("{side} row before its two_sided row"))
                })?;
                match side {
                    "lower" => last.lower_hits = hits,
                    "upper" => last.upper_hits = hits,
                    _ => last.upper3_hits = hits,
                }
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown side {other}")));
            }
        }
    }
    let fits = manifest
        .config
        .etas
        .iter()
        .filter_map(|&eta| fit_rate(&results, eta))
        .collect();
    Ok(TailStudy {
        config: manifest.config.clone(),
        alpha: manifest.alpha,
        alpha_tilde: manifest.alpha_tilde,
        sup_error: manifest.sup_error,
        grids: manifest.grids.clone(),
        results,
        fits,
    })
}

/// Write any study serializable as JSON next to the tail artifacts.
pub fn persist_json<T: Serialize>(value: &T, path: &Path) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = fs::File::create(path)?;
    out.write_all(serde_json::to_string_pretty(value)?.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(path.to_path_buf())
}
