//! Name-based solver registry shared by the CLI and the simulator.

use std::str::FromStr;

use crate::baselines::{
    solve_flexres_nsem, solve_highcomp, solve_highres, solve_minres_sem, solve_sl_edge,
    BaselineConfig,
};
use crate::candidates::SolveError;
use crate::exact::{solve_exact, OracleLimits};
use crate::greedy::solve_greedy;
use crate::model::{ProblemInstance, SlicingSolution};

/// Every selectable algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Semoran,
    MinresSem,
    SlEdge,
    FlexresNsem,
    Highcomp,
    Highres,
    Exact,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::Semoran,
        Algo::MinresSem,
        Algo::SlEdge,
        Algo::FlexresNsem,
        Algo::Highcomp,
        Algo::Highres,
        Algo::Exact,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Semoran => "semoran",
            Algo::MinresSem => "minres-sem",
            Algo::SlEdge => "sl-edge",
            Algo::FlexresNsem => "flexres-nsem",
            Algo::Highcomp => "highcomp",
            Algo::Highres => "highres",
            Algo::Exact => "exact",
        }
    }
}

impl FromStr for Algo {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algo::ALL
            .iter()
            .find(|a| a.name() == s)
            .copied()
            .ok_or_else(|| SolveError::UnknownAlgorithm(s.to_string()))
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs the named algorithm on an instance.
pub fn solve_with(
    algo: Algo,
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
    limits: &OracleLimits,
) -> Result<SlicingSolution, SolveError> {
    match algo {
        Algo::Semoran => solve_greedy(inst),
        Algo::MinresSem => solve_minres_sem(inst),
        Algo::SlEdge => solve_sl_edge(inst, cfg),
        Algo::FlexresNsem => solve_flexres_nsem(inst, cfg),
        Algo::Highcomp => solve_highcomp(inst, cfg),
        Algo::Highres => solve_highres(inst, cfg),
        Algo::Exact => solve_exact(inst, limits),
    }
}

/// As [`solve_with`], resolving the algorithm name first.
pub fn solve_by_name(
    name: &str,
    inst: &ProblemInstance,
    cfg: &BaselineConfig,
    limits: &OracleLimits,
) -> Result<SlicingSolution, SolveError> {
    solve_with(name.parse()?, inst, cfg, limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for algo in Algo::ALL {
            assert_eq!(algo.name().parse::<Algo>().unwrap(), algo);
        }
        assert!(matches!("nope".parse::<Algo>(), Err(SolveError::UnknownAlgorithm(_))));
    }
}
