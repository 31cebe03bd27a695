use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // graph construction
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    IndexOutOfRange { u: usize, v: usize, n: usize },
    #[error("edge ({u}, {v}) has negative weight {w}")]
    NegativeWeight { u: usize, v: usize, w: f64 },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },
    #[error("gaussian kernel width must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("a graph needs at least 2 nodes, got {0}")]
    InvalidNodeCount(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("weight matrix violates {0}")]
    InvalidWeights(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // spectral
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("invalid retained dimension d={d} for n={n} (need 1 <= d <= n, power of two)")]
    InvalidD { d: usize, n: usize },

    // classical emulation
    #[error("column {0} has zero norm")]
    ZeroNormColumn(usize),
    #[error("filtered coefficients are all zero; the next layer is undefined")]
    ZeroEta,

    // simulator
    #[error("layout needs {needed} qubits, maximum is {max}")]
    LayoutTooWide { needed: u32, max: u32 },
    #[error("layout has no registers")]
    EmptyLayout,
    #[error("register name {0:?} already in use")]
    DuplicateRegister(String),
    #[error("unknown register {0}")]
    UnknownRegister(String),
    #[error("register {0} has the wrong kind or width for this operation")]
    InvalidRegisterKind(String),
    #[error("target register {0} is not |0> on a contributing branch")]
    TargetNotZero(String),
    #[error("cannot amplitude-encode a zero vector (index {0})")]
    ZeroNormVector(usize),
    #[error("control and target registers overlap ({0})")]
    OverlappingRegisters(String),
    #[error("destination register {0} is not |0> on a contributing branch")]
    DestNotZero(String),
    #[error("measurement outcome {outcome} on {register} has zero probability")]
    ZeroProbabilityOutcome { register: String, outcome: u64 },
    #[error("reflection descriptor does not act on the requested registers")]
    UnknownDescriptor,
    #[error("fixed-point formats of {0} disagree")]
    FormatMismatch(String),
    #[error("register {0} is not in a single basis state on every branch")]
    NonClassicalBranch(String),
    #[error("register {0} is not exactly zero after uncomputation")]
    UncomputeResidual(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    // estimation / pipeline
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no samples landed in cell ({j}, {k})")]
    InsufficientShots { j: usize, k: usize },
    #[error("theta {0} is outside the fixed-point range")]
    ThetaOutOfRange(f64),
    #[error("|s/C| = {0} exceeds one; normalization constant too small")]
    EtaExceedsOne(f64),
    #[error("post-selection has zero probability")]
    ZeroPostselectProbability,

    // training
    #[error("length mismatch: {got} values, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("loss diverged to {0}")]
    DivergenceDetected(f64),
}
