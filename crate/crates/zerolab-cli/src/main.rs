//! Command-line driver: every study and diagnostic in the library sits behind
//! a subcommand that validates its inputs, delegates to library calls, writes
//! CSV/JSON artifacts, and prints a final single-line JSON manifest on stdout.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use zerolab::experiments::{
    grid_policy, persist_json, persist_tail, run_mean_study, run_sign_change_study,
    run_tail_study, TailConfig, DT_CAP, MANIFEST_JSON,
};
use zerolab::gaussalg::{self, CorrNorm};
use zerolab::sampler::{
    build_synthesis, recommended_nodes, sample_real_path, sample_strip_field, DiscreteSpectrum,
    Realization,
};
use zerolab::spectral::SpectralModel;
use zerolab::zeros::{count_zeros_real, jensen_sandwich};
use zerolab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "zerolab",
    version,
    about = "Zero-count statistics of stationary Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct ModelOpt {
    /// gaussian | band | bilateral-exponential | path to a lambda,density CSV
    #[arg(long, default_value = "gaussian")]
    model: String,
    /// Spectral half-width of the band model (ignored by the others)
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
}

impl ModelOpt {
    fn build(&self) -> Result<SpectralModel> {
        match self.model.as_str() {
            "gaussian" => Ok(SpectralModel::gaussian()),
            "band" => SpectralModel::band(self.half_width),
            "bilateral-exponential" | "bilateral_exponential" | "bilateral" => {
                Ok(SpectralModel::bilateral_exponential())
            }
            other if other.ends_with(".csv") => SpectralModel::tabulated_from_csv(other),
            other => Err(Error::InvalidModel(format!(
                "unknown model '{other}' (expected gaussian, band, \
                 bilateral-exponential, or a *.csv spectrum table)"
            ))),
        }
    }
}

#[derive(Args, Debug)]
struct OutOpt {
    /// Directory for CSV/JSON artifacts
    #[arg(long, env = "ZEROLAB_OUT", default_value = ".")]
    out: PathBuf,
}

impl OutOpt {
    fn ensure(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.clone())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpectrumKind {
    Flat,
    RaisedCosine,
}

impl SpectrumKind {
    fn build(self) -> DiscreteSpectrum {
        match self {
            SpectrumKind::Flat => DiscreteSpectrum::flat(),
            SpectrumKind::RaisedCosine => DiscreteSpectrum::raised_cosine(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormOpt {
    Euclidean,
    L1,
}

impl From<NormOpt> for CorrNorm {
    fn from(n: NormOpt) -> Self {
        match n {
            NormOpt::Euclidean => CorrNorm::Euclidean,
            NormOpt::L1 => CorrNorm::L1,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Zero-crossing intensity alpha and the spectral second moment
    KacRice {
        #[command(flatten)]
        model: ModelOpt,
    },
    /// Tabulate r, the tilted kernel, and the strip derivative ratios
    Covariance {
        #[command(flatten)]
        model: ModelOpt,
        /// Largest lag in the table
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        /// Number of grid points on [0, t_max]
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Tilt offset of the shifted kernel column
        #[arg(long, default_value_t = 0.2)]
        kappa_o: f64,
        /// Imaginary offset of the derivative-ratio columns
        #[arg(long, default_value_t = 0.2)]
        y: f64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Correlation-tail summability check along a lattice
    AssumptionA {
        #[command(flatten)]
        model: ModelOpt,
        /// Lattice spacing
        #[arg(long)]
        xstar: f64,
        /// Half-height of the sup over imaginary offsets
        #[arg(long)]
        kappa_prime: f64,
        /// Number of lattice points in each tail sum
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Correlation tail omega(k) table plus the summability report
    Omega {
        #[command(flatten)]
        model: ModelOpt,
        #[arg(long, default_value_t = 1.0)]
        xstar: f64,
        #[arg(long, default_value_t = 0.25)]
        kappa_prime: f64,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        /// Imaginary offsets sampled when taking the sup
        #[arg(long, default_value_t = 21)]
        y_points: usize,
        /// Largest gap k tabulated
        #[arg(long, default_value_t = 12)]
        k_max: usize,
        #[arg(long, value_enum, default_value_t = NormOpt::Euclidean)]
        norm: NormOpt,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Draw one realization and write its real path or strip field
    Simulate {
        #[command(flatten)]
        model: ModelOpt,
        /// Time horizon of the sampled grid
        #[arg(long = "T", default_value_t = 50.0)]
        t: f64,
        /// Imaginary offset; zero writes a real path, nonzero a complex field
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        /// Grid step (defaults to the resolution policy)
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Count real zeros of one sampled path, refining each location
    Zeros {
        #[command(flatten)]
        model: ModelOpt,
        #[arg(long = "T", default_value_t = 100.0)]
        t: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Bisection iterations per bracketed zero
        #[arg(long, default_value_t = 30)]
        refine_iters: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Contour sandwich of the zero count over a batch of seeds
    Jensen {
        #[command(flatten)]
        model: ModelOpt,
        /// Horizon of each realization; disks sit at T/2 on the real axis
        #[arg(long = "T", default_value_t = 20.0)]
        t: f64,
        /// Inner disk radius
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        /// Log ratio of outer to inner radius
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        /// Number of independent realizations
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// First seed of the batch
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Short-memory split table: residual mass per dependence range m
    Split {
        #[arg(long, value_enum, default_value_t = SpectrumKind::RaisedCosine)]
        spectrum: SpectrumKind,
        /// Dependence ranges to tabulate
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        m: Vec<usize>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Permanent-based second moment and fractional moments on the lattice
    Moments {
        #[command(flatten)]
        model: ModelOpt,
        /// Lattice spacing
        #[arg(long, default_value_t = 1.0)]
        xstar: f64,
        /// Imaginary offset of the lattice
        #[arg(long, default_value_t = 0.25)]
        y: f64,
        /// Number of lattice factors in each product
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Index gap between consecutive sample points
        #[arg(long, default_value_t = 4)]
        gap: usize,
        /// Fractional moment order (in [0, 0.5))
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 20000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Zero-count concentration study with exponential-rate fits
    Tail {
        #[command(flatten)]
        model: ModelOpt,
        /// Horizons, comma separated
        #[arg(long = "T", value_delimiter = ',', default_value = "10,20,30")]
        t: Vec<f64>,
        /// Deviation levels, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
        eta: Vec<f64>,
        /// Replicates per horizon
        #[arg(long, default_value_t = 400)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (results are identical for any count)
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// JSON study config (or a previous manifest.json); overrides the flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Mean zero-count rate against the crossing intensity
    Mean {
        #[command(flatten)]
        model: ModelOpt,
        #[arg(long = "T", default_value_t = 100.0)]
        t: f64,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON config {model, t, replicates, seed}; overrides the flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Sign-change concentration of the discretized sequence
    SignChanges {
        #[arg(long, value_enum, default_value_t = SpectrumKind::Flat)]
        spectrum: SpectrumKind,
        /// Number of consecutive pairs per replicate
        #[arg(long = "T", default_value_t = 400)]
        t: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
        eta: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Moving-average truncation of the square-root coefficients
        #[arg(long, default_value_t = 4096)]
        coeff_cut: usize,
        #[command(flatten)]
        out: OutOpt,
    },
}

fn main() -> ExitCode {
    // die quietly when the consumer closes the pipe (e.g. under `head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

/// Shortest round-trip decimal form, so reruns are byte-identical.
fn fj(x: f64) -> String {
    format!("{x}")
}

fn ps(path: &Path) -> String {
    path.display().to_string()
}

fn emit(v: serde_json::Value) {
    println!("{v}");
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut buf = String::with_capacity(header.len() + 1 + rows.len() * 32);
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::KacRice { model } => kac_rice(&model),
        Cmd::Covariance {
            model,
            t_max,
            points,
            kappa_o,
            y,
            out,
        } => covariance(&model, t_max, points, kappa_o, y, &out),
        Cmd::AssumptionA {
            model,
            xstar,
            kappa_prime,
            horizon,
            out,
        } => assumption_a(&model, xstar, kappa_prime, horizon, &out),
        Cmd::Omega {
            model,
            xstar,
            kappa_prime,
            horizon,
            y_points,
            k_max,
            norm,
            out,
        } => omega(&model, xstar, kappa_prime, horizon, y_points, k_max, norm, &out),
        Cmd::Simulate {
            model,
            t,
            y,
            dt,
            seed,
            out,
        } => simulate(&model, t, y, dt, seed, &out),
        Cmd::Zeros {
            model,
            t,
            seed,
            refine_iters,
            out,
        } => zeros(&model, t, seed, refine_iters, &out),
        Cmd::Jensen {
            model,
            t,
            delta,
            beta,
            seeds,
            seed0,
            out,
        } => jensen(&model, t, delta, beta, seeds, seed0, &out),
        Cmd::Split { spectrum, m, out } => split(spectrum, &m, &out),
        Cmd::Moments {
            model,
            xstar,
            y,
            n,
            gap,
            eps,
            reps,
            seed,
            out,
        } => moments(&model, xstar, y, n, gap, eps, reps, seed, &out),
        Cmd::Tail {
            model,
            t,
            eta,
            reps,
            seed,
            workers,
            config,
            out,
        } => tail(&model, t, eta, reps, seed, workers, config.as_deref(), &out),
        Cmd::Mean {
            model,
            t,
            reps,
            seed,
            config,
            out,
        } => mean(&model, t, reps, seed, config.as_deref(), &out),
        Cmd::SignChanges {
            spectrum,
            t,
            eta,
            reps,
            seed,
            coeff_cut,
            out,
        } => sign_changes(spectrum, t, &eta, reps, seed, coeff_cut, &out),
    }
}

fn kac_rice(model: &ModelOpt) -> Result<()> {
    let m = model.build()?;
    let kr = m.kac_rice_alpha()?;
    println!("alpha = {:.7}", kr.alpha);
    println!("second spectral moment = {}", fj(kr.second_moment));
    emit(json!({
        "command": "kac-rice",
        "model": m.to_string(),
        "alpha": kr.alpha,
        "second_moment": kr.second_moment,
        "outputs": [],
    }));
    Ok(())
}

fn covariance(
    model: &ModelOpt,
    t_max: f64,
    points: usize,
    kappa_o: f64,
    y: f64,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 grid points, got {points}"
        )));
    }
    let dir = out.ensure()?;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let t = t_max * i as f64 / (points - 1) as f64;
        rows.push(vec![
            fj(t),
            fj(m.covariance(t)?),
            fj(m.covariance_kappa(t, kappa_o)?),
            fj(m.r1_prime(t, y)?),
            fj(m.r2_second(t, y)?),
        ]);
    }
    let path = dir.join("covariance.csv");
    write_csv(&path, "t,r,r_tilt,r1,r2", &rows)?;
    println!("{points} rows over [0, {t_max}] (tilt {kappa_o}, offset {y})");
    emit(json!({
        "command": "covariance",
        "model": m.to_string(),
        "kappa_o": kappa_o,
        "y": y,
        "schema": "t,r,r_tilt,r1,r2",
        "outputs": [ps(&path)],
    }));
    Ok(())
}

fn assumption_a(
    model: &ModelOpt,
    xstar: f64,
    kappa_prime: f64,
    horizon: usize,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    let report = m.omega_star(xstar, kappa_prime, horizon)?;
    let dir = out.ensure()?;
    let path = persist_json(&report, &dir.join("assumption_a.json"))?;
    println!("verdict = {}", report.verdict);
    emit(json!({
        "command": "assumption-a",
        "model": m.to_string(),
        "xstar": xstar,
        "kappa_prime": kappa_prime,
        "horizon": horizon,
        "verdict": report.verdict.to_string(),
        "outputs": [ps(&path)],
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn omega(
    model: &ModelOpt,
    xstar: f64,
    kappa_prime: f64,
    horizon: usize,
    y_points: usize,
    k_max: usize,
    norm: NormOpt,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    if k_max == 0 || k_max > horizon {
        return Err(Error::InvalidArgument(format!(
            "k_max must lie in 1..=horizon, got {k_max}"
        )));
    }
    let mut rows = Vec::with_capacity(k_max);
    let mut last = f64::NAN;
    for k in 1..=k_max {
        let ok = gaussalg::omega(&m, k, xstar, kappa_prime, horizon, y_points, norm.into())?;
        last = ok.value;
        rows.push(vec![k.to_string(), fj(ok.value), fj(ok.increment)]);
    }
    let dir = out.ensure()?;
    let table = dir.join("omega.csv");
    write_csv(&table, "k,omega,increment", &rows)?;
    let report = m.omega_star(xstar, kappa_prime, horizon)?;
    let report_path = persist_json(&report, &dir.join("omega_star.json"))?;
    println!("omega({k_max}) = {} at spacing {xstar}", fj(last));
    println!("verdict = {}", report.verdict);
    emit(json!({
        "command": "omega",
        "model": m.to_string(),
        "xstar": xstar,
        "kappa_prime": kappa_prime,
        "k_max": k_max,
        "omega_last": last,
        "verdict": report.verdict.to_string(),
        "schema": "k,omega,increment",
        "outputs": [ps(&table), ps(&report_path)],
    }));
    Ok(())
}

fn simulate(
    model: &ModelOpt,
    t: f64,
    y: f64,
    dt: Option<f64>,
    seed: u64,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    let scheme = build_synthesis(&m, t, recommended_nodes(&m, t))?;
    let (dt, steps) = match dt {
        Some(step) => {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "step must be positive, got {step}"
                )));
            }
            (step, (t / step).ceil() as usize + 1)
        }
        None => grid_policy(&scheme, t, DT_CAP)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Realization::sample(&scheme, &mut rng);
    let dir = out.ensure()?;
    let (path, schema, rows) = if y == 0.0 {
        let grid = sample_real_path(&f, 0.0, dt, steps)?;
        let rows: Vec<Vec<String>> = grid
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![fj(grid.t0 + i as f64 * grid.dt), fj(*v)])
            .collect();
        (dir.join("path.csv"), "t,x", rows)
    } else {
        let field = sample_strip_field(&f, 0.0, dt, steps, y)?;
        let rows: Vec<Vec<String>> = field
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                vec![fj(field.x0 + i as f64 * field.dx), fj(v.re), fj(v.im)]
            })
            .collect();
        (dir.join("field.csv"), "x,re,im", rows)
    };
    write_csv(&path, schema, &rows)?;
    println!(
        "{steps} samples at step {} (synthesis sup error {})",
        fj(dt),
        fj(scheme.sup_error)
    );
    emit(json!({
        "command": "simulate",
        "model": m.to_string(),
        "t": t,
        "y": y,
        "dt": dt,
        "steps": steps,
        "seed": seed,
        "sup_error": scheme.sup_error,
        "alpha_tilde": scheme.alpha_tilde,
        "schema": schema,
        "outputs": [ps(&path)],
    }));
    Ok(())
}

fn zeros(model: &ModelOpt, t: f64, seed: u64, refine_iters: usize, out: &OutOpt) -> Result<()> {
    let m = model.build()?;
    let scheme = build_synthesis(&m, t, recommended_nodes(&m, t))?;
    let (dt, steps) = grid_policy(&scheme, t, DT_CAP)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Realization::sample(&scheme, &mut rng);
    let grid = sample_real_path(&f, 0.0, dt, steps)?;
    let eval = |tt: f64| f.eval_real(tt);
    let report = count_zeros_real(&grid, Some(&eval), refine_iters);
    let dir = out.ensure()?;
    let rows: Vec<Vec<String>> = report
        .locations
        .iter()
        .enumerate()
        .map(|(i, &loc)| vec![i.to_string(), fj(loc)])
        .collect();
    let table = dir.join("zeros.csv");
    write_csv(&table, "index,t", &rows)?;
    let summary = persist_json(
        &json!({
            "model": m.to_string(),
            "t": t,
            "dt": dt,
            "steps": steps,
            "seed": seed,
            "count": report.count,
            "grid_zeros": report.grid_zeros,
        }),
        &dir.join("zeros.json"),
    )?;
    println!("{} zeros on [0, {t}] ({} on grid points)", report.count, report.grid_zeros);
    emit(json!({
        "command": "zeros",
        "model": m.to_string(),
        "t": t,
        "seed": seed,
        "count": report.count,
        "schema": "index,t",
        "outputs": [ps(&table), ps(&summary)],
    }));
    Ok(())
}

fn jensen(
    model: &ModelOpt,
    t: f64,
    delta: f64,
    beta: f64,
    seeds: u64,
    seed0: u64,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    if seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {t}"
        )));
    }
    let scheme = build_synthesis(&m, t, recommended_nodes(&m, t))?;
    let center = Complex64::new(0.5 * t, 0.0);
    let mut rows = Vec::with_capacity(seeds as usize);
    let mut held = 0usize;
    let mut failed = 0usize;
    for i in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed0);
        rng.set_stream(i);
        let f = Realization::sample(&scheme, &mut rng);
        match jensen_sandwich(&f, center, delta, beta) {
            Ok(s) => {
                if s.holds {
                    held += 1;
                }
                rows.push(vec![
                    (seed0 + i).to_string(),
                    s.n_inner.to_string(),
                    fj(s.ratio),
                    s.n_outer.to_string(),
                    fj(s.gamma_inner),
                    fj(s.gamma_outer),
                    s.holds.to_string(),
                    s.attempts.to_string(),
                ]);
            }
            Err(e) if !e.is_validation() => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let dir = out.ensure()?;
    let table = dir.join("jensen.csv");
    write_csv(
        &table,
        "seed,n_inner,ratio,n_outer,gamma_inner,gamma_outer,holds,attempts",
        &rows,
    )?;
    println!(
        "sandwich held in {held} of {} contours ({failed} contour failures)",
        rows.len()
    );
    emit(json!({
        "command": "jensen",
        "model": m.to_string(),
        "t": t,
        "delta": delta,
        "beta": beta,
        "seeds": seeds,
        "held": held,
        "evaluated": rows.len(),
        "failed": failed,
        "schema": "seed,n_inner,ratio,n_outer,gamma_inner,gamma_outer,holds,attempts",
        "outputs": [ps(&table)],
    }));
    Ok(())
}

fn split(spectrum: SpectrumKind, ms: &[usize], out: &OutOpt) -> Result<()> {
    if ms.is_empty() {
        return Err(Error::InvalidArgument("need at least one range m".into()));
    }
    let spec = spectrum.build();
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let s = spec.m_dependent_split(m)?;
        println!("m = {m}: residual mass {}", fj(s.eps_m));
        rows.push(vec![
            m.to_string(),
            fj(s.eps_m),
            fj(s.var_w),
            fj(s.s_min),
            s.dependence_range.to_string(),
        ]);
    }
    let dir = out.ensure()?;
    let table = dir.join("split.csv");
    write_csv(&table, "m,eps_m,var_w,s_min,dependence_range", &rows)?;
    emit(json!({
        "command": "split",
        "spectrum": spec.name,
        "m": ms,
        "schema": "m,eps_m,var_w,s_min,dependence_range",
        "outputs": [ps(&table)],
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn moments(
    model: &ModelOpt,
    xstar: f64,
    y: f64,
    n: usize,
    gap: usize,
    eps: f64,
    reps: usize,
    seed: u64,
    out: &OutOpt,
) -> Result<()> {
    let m = model.build()?;
    let wick = gaussalg::wick_lattice(&m, xstar, y, n)?;
    let (mc, mc_se) = gaussalg::wick_lattice_mc(&m, xstar, y, n, reps.max(1000), seed)?;
    let frac = gaussalg::frac_moment_mc(&m, xstar, y, gap, n, eps, reps, seed)?;
    println!(
        "second moment: permanent {} (row bound {}, mc {} +- {})",
        fj(wick.permanent),
        fj(wick.row_bound),
        fj(mc),
        fj(mc_se)
    );
    println!(
        "fractional +{eps}: {} vs reference {}",
        fj(frac.m_pos),
        fj(frac.ref_pos)
    );
    println!(
        "fractional -{eps}: {} vs reference {}",
        fj(frac.m_neg),
        fj(frac.ref_neg)
    );
    let dir = out.ensure()?;
    let path = persist_json(
        &json!({
            "model": m.to_string(),
            "xstar": xstar,
            "y": y,
            "n": n,
            "gap": gap,
            "eps": eps,
            "reps": reps,
            "seed": seed,
            "wick": wick,
            "wick_mc": {"estimate": mc, "se": mc_se},
            "fractional": frac,
        }),
        &dir.join("moments.json"),
    )?;
    emit(json!({
        "command": "moments",
        "model": m.to_string(),
        "permanent": wick.permanent,
        "ratio_pos": frac.ratio_pos(),
        "ratio_neg": frac.ratio_neg(),
        "outputs": [ps(&path)],
    }));
    Ok(())
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: TailConfig,
}

#[allow(clippy::too_many_arguments)]
fn tail(
    model: &ModelOpt,
    t: Vec<f64>,
    eta: Vec<f64>,
    reps: usize,
    seed: u64,
    workers: usize,
    config: Option<&Path>,
    out: &OutOpt,
) -> Result<()> {
    let cfg = match config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            match serde_json::from_str::<TailConfig>(&text) {
                Ok(c) => c,
                Err(_) => serde_json::from_str::<ManifestConfig>(&text)?.config,
            }
        }
        None => {
            let mut c = TailConfig::new(model.build()?, t, eta, reps);
            c.master_seed = seed;
            c.workers = workers;
            c
        }
    };
    let study = run_tail_study(&cfg)?;
    let dir = out.ensure()?;
    let manifest = persist_tail(&study, &dir)?;
    println!(
        "alpha = {} (synthesis rate {})",
        fj(study.alpha),
        fj(study.alpha_tilde)
    );
    for fit in &study.fits {
        println!(
            "eta {}: slope {} over {} horizons (R^2 {})",
            fj(fit.eta),
            fj(fit.slope),
            fit.points,
            fj(fit.r_squared)
        );
    }
    let mut outputs: Vec<String> = manifest
        .files
        .iter()
        .map(|f| ps(&dir.join(f)))
        .collect();
    outputs.push(ps(&dir.join(MANIFEST_JSON)));
    emit(json!({
        "command": "tail",
        "model": study.config.model.to_string(),
        "alpha": study.alpha,
        "cells": study.results.len(),
        "fits": study.fits.len(),
        "outputs": outputs,
    }));
    Ok(())
}

#[derive(Deserialize)]
struct MeanConfig {
    model: SpectralModel,
    t: f64,
    replicates: usize,
    #[serde(default)]
    seed: u64,
}

fn mean(
    model: &ModelOpt,
    t: f64,
    reps: usize,
    seed: u64,
    config: Option<&Path>,
    out: &OutOpt,
) -> Result<()> {
    let (m, t, reps, seed) = match config {
        Some(path) => {
            let c: MeanConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
            (c.model, c.t, c.replicates, c.seed)
        }
        None => (model.build()?, t, reps, seed),
    };
    let study = run_mean_study(&m, t, reps, seed)?;
    let dir = out.ensure()?;
    let path = persist_json(&study, &dir.join("mean.json"))?;
    println!(
        "mean rate = {} +- {} against alpha = {}",
        fj(study.mean_rate),
        fj(study.se),
        fj(study.alpha)
    );
    emit(json!({
        "command": "mean",
        "model": m.to_string(),
        "t": t,
        "replicates": reps,
        "mean_rate": study.mean_rate,
        "se": study.se,
        "alpha": study.alpha,
        "outputs": [ps(&path)],
    }));
    Ok(())
}

fn sign_changes(
    spectrum: SpectrumKind,
    t: usize,
    eta: &[f64],
    reps: usize,
    seed: u64,
    coeff_cut: usize,
    out: &OutOpt,
) -> Result<()> {
    let spec = spectrum.build();
    let study = run_sign_change_study(&spec, t, eta, reps, seed, coeff_cut)?;
    let dir = out.ensure()?;
    let rows: Vec<Vec<String>> = study
        .results
        .iter()
        .map(|r| {
            vec![
                fj(r.eta),
                fj(r.p_hat),
                fj(r.ci_lo),
                fj(r.ci_hi),
                r.hits.to_string(),
                fj(r.iid_bound),
            ]
        })
        .collect();
    let table = dir.join("sign_changes.csv");
    write_csv(&table, "eta,p_hat,ci_lo,ci_hi,hits,iid_bound", &rows)?;
    let summary = persist_json(&study, &dir.join("sign_changes.json"))?;
    println!(
        "change rate = {} (mean observed {})",
        fj(study.change_rate),
        fj(study.mean_changes / t as f64)
    );
    emit(json!({
        "command": "sign-changes",
        "spectrum": study.spectrum,
        "t": t,
        "replicates": reps,
        "change_rate": study.change_rate,
        "schema": "eta,p_hat,ci_lo,ci_hi,hits,iid_bound",
        "outputs": [ps(&table), ps(&summary)],
    }));
    Ok(())
}
