use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The requested integral carries an exponential factor that the spectral
    /// tail cannot absorb.
    #[error("divergent spectral integral: exponential tilt {tilt} reaches the integrability limit {kappa}")]
    DivergentIntegral { tilt: f64, kappa: f64 },

    #[error("quadrature did not converge: estimated error {estimate:.3e} above tolerance {tolerance:.3e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid step {dt} too coarse for top frequency {lambda_max}: need dt <= {required}")]
    GridTooCoarse {
        dt: f64,
        lambda_max: f64,
        required: f64,
    },

    #[error("point {re}{im:+}i lies outside the analyticity strip |Im z| < {half_width}")]
    OutsideStrip { re: f64, im: f64, half_width: f64 },

    #[error("accumulated winding {value} is not within {tol} of an integer after {attempts} attempts")]
    NonIntegerWinding { value: f64, tol: f64, attempts: u32 },

    #[error("contour passes too close to a zero (min |f| = {min_abs:.3e}) after {attempts} attempts")]
    ContourNearZero { min_abs: f64, attempts: u32 },

    #[error("covariance matrix not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::InvalidArgument(_)
                | Error::GridTooCoarse { .. }
                | Error::OutsideStrip { .. }
                | Error::DivergentIntegral { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
