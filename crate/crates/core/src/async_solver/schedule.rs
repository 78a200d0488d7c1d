use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LcpError, Result};

/// Rule generating the update sets `J(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpdatePolicy {
    /// `J(k) = {0, .., m-1}`.
    AllEveryStep,
    /// Processors are grouped by `l mod g`, `g = min(period, m)`; step `k`
    /// updates group `k mod g`.
    RoundRobin { period: usize },
    /// Each processor joins `J(k)` with probability 1/2 (at least one does),
    /// and every `period`-th step updates everyone.
    RandomFair { seed: u64, period: usize },
}

pub const DEFAULT_RANDOM_PERIOD: usize = 4;

impl UpdatePolicy {
    /// Number of consecutive steps in which every processor is guaranteed to
    /// update at least once.
    pub fn fairness_window(&self, m: usize) -> usize {
        match *self {
            UpdatePolicy::AllEveryStep => 1,
            UpdatePolicy::RoundRobin { period } => period.min(m).max(1),
            UpdatePolicy::RandomFair { period, .. } => period.max(1),
        }
    }
}

impl fmt::Display for UpdatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdatePolicy::AllEveryStep => f.write_str("all"),
            UpdatePolicy::RoundRobin { period } => write!(f, "roundrobin:{period}"),
            UpdatePolicy::RandomFair { seed, period } => write!(f, "random:{seed}:{period}"),
        }
    }
}

impl FromStr for UpdatePolicy {
    type Err = LcpError;

    /// `all`, `roundrobin:<period>` or `random:<seed>[:<period>]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LcpError::InvalidParameter(format!("cannot parse update policy '{s}'"));
        let mut parts = s.split(':');
        let policy = match parts.next() {
            Some("all") => UpdatePolicy::AllEveryStep,
            Some("roundrobin") => UpdatePolicy::RoundRobin {
                period: parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
            },
            Some("random") => {
                let seed = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let period = match parts.next() {
                    Some(p) => p.parse().map_err(|_| bad())?,
                    None => DEFAULT_RANDOM_PERIOD,
                };
                UpdatePolicy::RandomFair { seed, period }
            }
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        match policy {
            UpdatePolicy::RoundRobin { period: 0 } | UpdatePolicy::RandomFair { period: 0, .. } => {
                Err(bad())
            }
            p => Ok(p),
        }
    }
}

/// Rule generating the read steps `s_i(k)` inside `[max(0, k-d), k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReadRule {
    /// `s_i(k) = k`.
    Latest,
    /// `s_i(k) = max(0, k - d)`.
    MaxDelay,
    /// `s_i(k) = k - ((k + i) mod (d + 1))`, clipped at 0.
    Cyclic,
    /// Uniform over the admissible window.
    Random { seed: u64 },
}

impl FromStr for ReadRule {
    type Err = LcpError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LcpError::InvalidParameter(format!("cannot parse read rule '{s}'"));
        match s.split_once(':') {
            None => match s {
                "latest" => Ok(ReadRule::Latest),
                "max" | "max-delay" => Ok(ReadRule::MaxDelay),
                "cyclic" => Ok(ReadRule::Cyclic),
                _ => Err(bad()),
            },
            Some(("random", seed)) => Ok(ReadRule::Random {
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ReadRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadRule::Latest => f.write_str("latest"),
            ReadRule::MaxDelay => f.write_str("max-delay"),
            ReadRule::Cyclic => f.write_str("cyclic"),
            ReadRule::Random { seed } => write!(f, "random:{seed}"),
        }
    }
}

/// Delay and update-set generation for the asynchronous simulator.
///
/// With a finite `staleness_bound` every generated sequence satisfies
/// `k - d <= s_i(k) <= k`, so the read steps grow without bound, and each
/// policy puts every processor in some `J(k)` within its fairness window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AsyncSchedule {
    pub staleness_bound: usize,
    pub update_policy: UpdatePolicy,
    pub reads: ReadRule,
}

impl AsyncSchedule {
    /// Zero staleness with every processor updating every step.
    pub fn synchronous() -> Self {
        Self {
            staleness_bound: 0,
            update_policy: UpdatePolicy::AllEveryStep,
            reads: ReadRule::Latest,
        }
    }

    pub fn new(staleness_bound: usize, update_policy: UpdatePolicy) -> Self {
        Self {
            staleness_bound,
            update_policy,
            reads: ReadRule::Cyclic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.update_policy {
            UpdatePolicy::RoundRobin { period: 0 } | UpdatePolicy::RandomFair { period: 0, .. } => {
                Err(LcpError::InvalidParameter(
                    "update policy period must be at least 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn generator(&self, m: usize) -> ScheduleGenerator {
        let update_rng = match self.update_policy {
            UpdatePolicy::RandomFair { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        let read_rng = match self.reads {
            ReadRule::Random { seed } => {
                Some(ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15))
            }
            _ => None,
        };
        ScheduleGenerator {
            schedule: *self,
            m,
            update_rng,
            read_rng,
        }
    }
}

pub(crate) struct ScheduleGenerator {
    schedule: AsyncSchedule,
    m: usize,
    update_rng: Option<ChaCha8Rng>,
    read_rng: Option<ChaCha8Rng>,
}

impl ScheduleGenerator {
    /// `s_i(k)` for all `i`.
    pub(crate) fn reads(&mut self, k: usize) -> Vec<usize> {
        let d = self.schedule.staleness_bound;
        let floor = k.saturating_sub(d);
        (0..self.m)
            .map(|i| match self.schedule.reads {
                ReadRule::Latest => k,
                ReadRule::MaxDelay => floor,
                ReadRule::Cyclic => k.saturating_sub((k + i) % (d + 1)),
                ReadRule::Random { .. } => {
                    let rng = self.read_rng.as_mut().expect("seeded for random reads");
                    rng.random_range(floor..=k)
                }
            })
            .collect()
    }

    /// `J(k)`, ascending and nonempty.
    pub(crate) fn updates(&mut self, k: usize) -> Vec<usize> {
        let m = self.m;
        match self.schedule.update_policy {
            UpdatePolicy::AllEveryStep => (0..m).collect(),
            UpdatePolicy::RoundRobin { period } => {
                let groups = period.min(m).max(1);
                (0..m).filter(|l| l % groups == k % groups).collect()
            }
            UpdatePolicy::RandomFair { period, .. } => {
                let rng = self.update_rng.as_mut().expect("seeded for random updates");
                if k % period == period - 1 {
                    return (0..m).collect();
                }
                let mut set: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
                if set.is_empty() {
                    set.push(rng.random_range(0..m));
                }
                set
            }
        }
    }
}
