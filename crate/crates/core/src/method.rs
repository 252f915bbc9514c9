//! Common result type of the five solution methods and the brute-force
//! oracle.

use serde::{Deserialize, Serialize};

use crate::bigm::{BnbResult, BruteForceResult};
use crate::lmi::{BoundDirection, BoundValue, Point};
use crate::sdpr::RelaxationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Sdpr,
    Sdprn,
    Sca1,
    Sca2,
    Bigm,
    Brute,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Sdpr,
        MethodKind::Sdprn,
        MethodKind::Sca1,
        MethodKind::Sca2,
        MethodKind::Bigm,
        MethodKind::Brute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sdpr => "sdpr",
            MethodKind::Sdprn => "sdprn",
            MethodKind::Sca1 => "sca1",
            MethodKind::Sca2 => "sca2",
            MethodKind::Bigm => "bigm",
            MethodKind::Brute => "brute",
        }
    }

    /// Methods whose real-valued selection goes through slicing.
    pub fn needs_slicing(self) -> bool {
        matches!(
            self,
            MethodKind::Sdpr | MethodKind::Sdprn | MethodKind::Sca1 | MethodKind::Sca2
        )
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// A method's (relaxed or approximate) solution and the bound it certifies.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: MethodKind,
    pub bound: BoundValue,
    pub point: Point,
    /// Interior-point iterations summed over every SDP solved (nodes for
    /// branch and bound, feasible patterns for brute force).
    pub iterations: usize,
    pub seconds: f64,
    /// Objective per outer iteration (SCA iterates, B&B incumbents; a single
    /// entry for one-shot methods).
    pub trace: Vec<f64>,
}

impl From<RelaxationResult> for MethodResult {
    fn from(r: RelaxationResult) -> Self {
        MethodResult {
            method: if r.nuclear { MethodKind::Sdprn } else { MethodKind::Sdpr },
            trace: vec![r.bound.value],
            bound: r.bound,
            point: r.point,
            iterations: r.iterations,
            seconds: r.seconds,
        }
    }
}

impl From<&BnbResult> for MethodResult {
    fn from(r: &BnbResult) -> Self {
        MethodResult {
            method: MethodKind::Bigm,
            bound: BoundValue {
                value: r.objective,
                direction: if r.converged {
                    BoundDirection::Exact
                } else {
                    BoundDirection::Upper
                },
            },
            point: r.point.clone(),
            iterations: r.nodes,
            seconds: r.seconds,
            trace: r
                .progress
                .iter()
                .map(|p| p.incumbent)
                .filter(|v| v.is_finite())
                .collect(),
        }
    }
}

impl From<&BruteForceResult> for MethodResult {
    fn from(r: &BruteForceResult) -> Self {
        MethodResult {
            method: MethodKind::Brute,
            bound: BoundValue {
                value: r.objective,
                direction: BoundDirection::Exact,
            },
            point: r.point.clone(),
            iterations: r.feasible,
            seconds: r.seconds,
            trace: vec![r.objective],
        }
    }
}
