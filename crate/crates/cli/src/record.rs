//! The per-run JSON artifact.

use serde::{Deserialize, Serialize};

use saa_core::method::{MethodKind, MethodResult};
use saa_core::slicing::SelectionOutcome;
use saa_core::BoundValue;

pub const RECORD_VERSION: u32 = 1;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    /// Stacked binary selection.
    pub pi: Vec<bool>,
    /// `K = ZS⁻¹` per period, row-major.
    pub gains: Vec<Rows>,
    /// Largest closed-loop spectral abscissa.
    pub abscissa: f64,
    /// `ζ` per period.
    pub zeta: Vec<f64>,
    /// `√((η+1)ζ)` per period.
    pub performance_index: Vec<Option<f64>>,
    pub activated: usize,
    pub f_final: f64,
}

impl From<&SelectionOutcome> for OutcomeRecord {
    fn from(o: &SelectionOutcome) -> Self {
        OutcomeRecord {
            pi: o.pi.clone(),
            gains: o
                .gains
                .iter()
                .map(|k| (0..k.nrows()).map(|i| k.row(i).iter().copied().collect()).collect())
                .collect(),
            abscissa: o.abscissa,
            zeta: o.perf.clone(),
            performance_index: o.performance_index.clone(),
            activated: o.activated(),
            f_final: o.f_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: u32,
    pub method: MethodKind,
    /// Content hash of the system file; records with equal ids describe
    /// the same instance.
    pub instance: String,
    pub seed: Option<u64>,
    pub nodes: usize,
    pub periods: usize,
    /// Bound certified by the method itself (a lower bound for the
    /// relaxations, an upper bound for SCA, exact for brute force and a
    /// converged branch-and-bound).
    pub bound: BoundValue,
    /// The method's real-valued selection before recovery.
    pub relaxed_pi: Vec<f64>,
    pub outcome: OutcomeRecord,
    /// Wall-clock seconds for the method and the recovery together.
    pub wall_seconds: f64,
    /// Interior-point iterations (branch-and-bound: nodes explored).
    pub iterations: usize,
    /// Optimality gap in percent (branch-and-bound only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_percent: Option<f64>,
    /// Objective per outer iteration.
    pub trace: Vec<f64>,
}

impl RunRecord {
    pub fn new(
        instance: String,
        seed: Option<u64>,
        nodes: usize,
        periods: usize,
        result: &MethodResult,
        outcome: &SelectionOutcome,
        wall_seconds: f64,
    ) -> Self {
        RunRecord {
            version: RECORD_VERSION,
            method: result.method,
            instance,
            seed,
            nodes,
            periods,
            bound: result.bound,
            relaxed_pi: result.point.pi.clone(),
            outcome: outcome.into(),
            wall_seconds,
            iterations: result.iterations,
            gap_percent: None,
            trace: result.trace.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let r: RunRecord = serde_json::from_str(s).map_err(|e| e.to_string())?;
        if r.version != RECORD_VERSION {
            return Err(format!("unsupported record version {}", r.version));
        }
        Ok(r)
    }

    /// Largest `√((η+1)ζ)` over the periods.
    pub fn performance_index(&self) -> Option<f64> {
        self.outcome
            .performance_index
            .iter()
            .flatten()
            .copied()
            .reduce(f64::max)
    }
}

/// 64-bit FNV-1a of `bytes`, as 16 hex digits.
pub fn content_id(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
