use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {index} out of range for a layout with {modes} modes")]
    ModeIndex { index: usize, modes: usize },

    #[error("occupation {occupation} of mode {mode} exceeds truncation of {levels} levels")]
    Occupation { mode: usize, occupation: usize, levels: usize },

    #[error("basis index {index} out of range for dimension {dim}")]
    BasisIndex { index: usize, dim: usize },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("invalid device: {0}")]
    InvalidDevice(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("label collision: bare states {first:?} and {second:?} both claim eigenvector {eigen}")]
    LabelCollision { first: Vec<usize>, second: Vec<usize>, eigen: usize },

    #[error("ambiguous label {label:?}: best overlap {overlap:.3} is not above 0.5")]
    AmbiguousLabel { label: Vec<usize>, overlap: f64 },

    #[error("resonant denominator in perturbative formula ({which} = {value_mhz:.4} MHz)")]
    ResonantDenominator { which: &'static str, value_mhz: f64 },

    #[error("dressed-state continuation failed at {amplitude_mhz:.4} MHz (overlap {overlap:.3})")]
    Continuation { amplitude_mhz: f64, overlap: f64 },

    #[error("no sign change of chi_zz in bracket [{lo_mhz}, {hi_mhz}] MHz ({f_lo_khz:.3} kHz, {f_hi_khz:.3} kHz)")]
    NoSignChange { lo_mhz: f64, hi_mhz: f64, f_lo_khz: f64, f_hi_khz: f64 },

    #[error("step size underflow at t = {time_us:.6} us (step {step_us:.3e} us)")]
    StepUnderflow { time_us: f64, step_us: f64 },

    #[error("unsupported frame: {0}")]
    Frame(String),

    #[error("fit did not converge: {0}")]
    Fit(String),

    #[error("maximum-likelihood reconstruction did not converge after {iterations} iterations")]
    MleNonConvergence { iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
