use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    /// `E[1/||h||^2]` is infinite for the requested distribution.
    #[error("E[1/||h||^2] diverges for M = {antennas}; need at least two antennas")]
    Divergent { antennas: usize },

    #[error("subset enumeration over {users} users exceeds the limit of {limit}")]
    Capacity { users: usize, limit: usize },

    /// No finite power meets the rate target of `user` at fading state `state`.
    #[error("user {user} cannot meet its rate target at fading state {state}")]
    Infeasible { user: usize, state: usize },

    /// Every state has zero gain for `user`, so no power meets a positive target.
    #[error("user {user} has zero channel gain in every fading state")]
    ZeroCapacity { user: usize },

    #[error("zero-forcing needs K <= M (K = {users}, M = {antennas})")]
    Unsupported { users: usize, antennas: usize },

    #[error("bisection failed to bracket the solution: {0}")]
    Bracket(&'static str),
}
