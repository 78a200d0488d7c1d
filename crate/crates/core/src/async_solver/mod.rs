//! Asynchronous relaxed nonstationary multisplitting: a deterministic
//! bounded-staleness simulator and a threaded executor.

mod schedule;
mod sim;
mod threaded;

pub use schedule::{AsyncSchedule, ReadRule, UpdatePolicy, DEFAULT_RANDOM_PERIOD};
pub use sim::{solve_async_sim, solve_async_sim_observed, AsyncState, AsyncStep};
pub use threaded::solve_async_threaded;
