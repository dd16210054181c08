use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NonSquareWeights { rows: usize, cols: usize },
    #[error("weights are not symmetric at ({i}, {j})")]
    AsymmetricWeights { i: usize, j: usize },
    #[error("negative weight {value} at ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("agent index {index} out of range for {n_agents} agents")]
    AgentIndex { index: usize, n_agents: usize },
    #[error("graph is not connected (the connectivity assumption on the information-sharing graph is violated)")]
    Disconnected,

    #[error("unknown cost kind `{0}`")]
    UnknownCost(String),
    #[error("cost `{kind}` expects {expected} parameter(s), got {got}")]
    CostParams {
        kind: String,
        expected: usize,
        got: usize,
    },
    #[error("bracket [{lo}, {hi}] does not straddle the optimum: global gradient is {grad_lo} and {grad_hi} at the ends; widen the bracket")]
    Bracket {
        lo: f64,
        hi: f64,
        grad_lo: f64,
        grad_hi: f64,
    },

    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite and nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("unknown basis component `{0}`")]
    UnknownBasis(String),
    #[error("only the unit-frequency rotation generator [[0, 1], [-1, 0]] has closed-form sinusoid amplitudes")]
    UnsupportedExosystem,

    #[error("desired roots are not closed under complex conjugation")]
    RootsNotConjugate,
    #[error("desired root {re}{im:+}i is not in the open left half-plane")]
    UnstableRoot { re: f64, im: f64 },
    #[error("expected {expected} desired roots, got {got}")]
    RootCount { expected: usize, got: usize },
    #[error("matrix is not Hurwitz (max real eigenvalue part {max_real})")]
    NotHurwitz { max_real: f64 },
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric (deviation {0})")]
    Asymmetric(f64),
    #[error("linear system is singular")]
    Singular,
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("state diverged at t = {time}")]
    Diverged { time: f64, components: Vec<usize> },
    #[error("run diverged at t = {time}; agents {} blew up", one_based(agents))]
    AgentsDiverged { time: f64, agents: Vec<usize> },
    #[error(
        "trajectory spans [{start}, {end}] but the PE window needs [{needed_start}, {needed_end}]"
    )]
    WindowTooLong {
        start: f64,
        end: f64,
        needed_start: f64,
        needed_end: f64,
    },

    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a bad scenario rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Diverged { .. } | Error::AgentsDiverged { .. } | Error::Io(_) | Error::Csv(_)
        )
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::NonPositive { name, value })
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

fn one_based(agents: &[usize]) -> String {
    agents
        .iter()
        .map(|a| (a + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
