//! System data, weights, the multi-period container, the random-network
//! benchmark and the JSON file format.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::logistics::{min_count_constraint, LogisticConstraints};

/// State-space data of one period:
/// `ẋ = A x + B_u Π u + B_w w`, `z = C_z x + D_wz w`, optional `y = Γ C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpsSystem {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
    pub d_wz: DMatrix<f64>,
    /// Inputs per node, summing to the column count of `b_u`.
    pub partition: Vec<usize>,
    /// Measurement matrix for the observer variant.
    pub c: Option<DMatrix<f64>>,
    /// Outputs per node; defaults to one per node when `c` has `N` rows.
    pub sensor_partition: Option<Vec<usize>>,
    /// Lipschitz constant of the nonlinearity (observer variant).
    pub beta: Option<f64>,
    /// Node coordinates when generated by [`random_network`].
    pub positions: Option<Vec<[f64; 2]>>,
}

fn finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

impl CpsSystem {
    pub fn new(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        b_w: DMatrix<f64>,
        c_z: DMatrix<f64>,
        d_wz: DMatrix<f64>,
        partition: Vec<usize>,
    ) -> Result<Self, CoreError> {
        let s = Self {
            a,
            b_u,
            b_w,
            c_z,
            d_wz,
            partition,
            c: None,
            sensor_partition: None,
            beta: None,
            positions: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_observer(
        mut self,
        c: DMatrix<f64>,
        beta: f64,
        sensor_partition: Option<Vec<usize>>,
    ) -> Result<Self, CoreError> {
        self.c = Some(c);
        self.beta = Some(beta);
        self.sensor_partition = sensor_partition;
        self.validate()?;
        Ok(self)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn n_w(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.c_z.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.partition.len()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let n = self.a.nrows();
        let dim = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(CoreError::Dimension(what.to_string()))
            }
        };
        dim("A must be square and nonempty", n > 0 && self.a.ncols() == n)?;
        dim("B_u must have n_x rows", self.b_u.nrows() == n)?;
        dim("B_w must have n_x rows", self.b_w.nrows() == n)?;
        dim("C_z must have n_x columns", self.c_z.ncols() == n)?;
        dim(
            "D_wz must be n_z x n_w",
            self.d_wz.nrows() == self.c_z.nrows() && self.d_wz.ncols() == self.b_w.ncols(),
        )?;
        dim(
            "partition must be nonempty, positive and sum to n_u",
            !self.partition.is_empty()
                && self.partition.iter().all(|&p| p > 0)
                && self.partition.iter().sum::<usize>() == self.b_u.ncols(),
        )?;
        if !(finite(&self.a) && finite(&self.b_u) && finite(&self.b_w) && finite(&self.c_z) && finite(&self.d_wz)) {
            return Err(CoreError::Dimension("non-finite system entry".into()));
        }
        if let Some(c) = &self.c {
            dim("C must have n_x columns", c.ncols() == n)?;
            dim("C entries must be finite", finite(c))?;
            let sp = self.sensor_partition_or_default()?;
            dim(
                "sensor partition must be positive and sum to n_y",
                sp.iter().all(|&p| p > 0) && sp.iter().sum::<usize>() == c.nrows(),
            )?;
            match self.beta {
                Some(b) if b > 0.0 && b.is_finite() => {}
                _ => return Err(CoreError::InvalidArgument("observer data needs beta > 0".into())),
            }
        }
        Ok(())
    }

    /// Sensor partition, defaulting to one output per node.
    pub fn sensor_partition_or_default(&self) -> Result<Vec<usize>, CoreError> {
        let c = self
            .c
            .as_ref()
            .ok_or_else(|| CoreError::InvalidArgument("system has no measurement matrix C".into()))?;
        match &self.sensor_partition {
            Some(p) => Ok(p.clone()),
            None => Ok(vec![1; c.nrows()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionWeights {
    /// One weight per stacked selection entry.
    pub alpha_pi: Vec<f64>,
    pub alpha: f64,
    pub eta: f64,
}

impl SelectionWeights {
    pub fn uniform(len: usize) -> Self {
        Self {
            alpha_pi: vec![1.0; len],
            alpha: 1.0,
            eta: 1.0,
        }
    }

    pub fn validate(&self, len: usize) -> Result<(), CoreError> {
        if self.alpha_pi.len() != len {
            return Err(CoreError::Dimension(format!(
                "alpha_pi has length {}, expected {len}",
                self.alpha_pi.len()
            )));
        }
        if self.alpha_pi.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "alpha_pi must be finite and nonnegative".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.eta > 0.0 && self.alpha.is_finite() && self.eta.is_finite()) {
            return Err(CoreError::InvalidArgument("alpha and eta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPeriodSpec {
    pub systems: Vec<CpsSystem>,
    pub logistics: LogisticConstraints,
    pub weights: SelectionWeights,
}

impl MultiPeriodSpec {
    pub fn single(
        system: CpsSystem,
        logistics: LogisticConstraints,
        weights: SelectionWeights,
    ) -> Result<Self, CoreError> {
        let s = Self {
            systems: vec![system],
            logistics,
            weights,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn periods(&self) -> usize {
        self.systems.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.systems[0].n_nodes()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let first = self
            .systems
            .first()
            .ok_or_else(|| CoreError::InvalidArgument("at least one period is required".into()))?;
        for s in &self.systems {
            s.validate()?;
            if s.n_x() != first.n_x()
                || s.partition != first.partition
                || s.n_w() != first.n_w()
                || s.n_z() != first.n_z()
            {
                return Err(CoreError::Dimension("periods have incompatible dimensions".into()));
            }
        }
        let len = first.n_nodes() * self.systems.len();
        if self.logistics.n_nodes() != first.n_nodes() || self.logistics.periods() != self.systems.len() {
            return Err(CoreError::Dimension(format!(
                "logistic rows cover {} nodes x {} periods",
                self.logistics.n_nodes(),
                self.logistics.periods()
            )));
        }
        self.weights.validate(len)
    }
}

/// The random dynamic network benchmark: per node
/// `ẋ_i = −[[1,1],[1,2]] x_i + Σ_{j≠i} e^{−d(i,j)} x_j + [0;1](u_i + w_i)`,
/// nodes uniform in `[0, N/5]²`, `C_z = I`, `D_wz = 0`.
pub fn random_network(n: usize, seed: u64) -> Result<CpsSystem, CoreError> {
    if n < 2 {
        return Err(CoreError::InvalidArgument(format!("need at least 2 nodes, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = n as f64 / 5.0;
    let positions: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let nx = 2 * n;
    let mut a = DMatrix::zeros(nx, nx);
    for i in 0..n {
        a[(2 * i, 2 * i)] = -1.0;
        a[(2 * i, 2 * i + 1)] = -1.0;
        a[(2 * i + 1, 2 * i)] = -1.0;
        a[(2 * i + 1, 2 * i + 1)] = -2.0;
        for j in 0..n {
            if i != j {
                let w = (-distance(positions[i], positions[j])).exp();
                a[(2 * i, 2 * j)] = w;
                a[(2 * i + 1, 2 * j + 1)] = w;
            }
        }
    }
    let mut b = DMatrix::zeros(nx, n);
    for i in 0..n {
        b[(2 * i + 1, i)] = 1.0;
    }
    let mut sys = CpsSystem::new(
        a,
        b.clone(),
        b,
        DMatrix::identity(nx, nx),
        DMatrix::zeros(nx, n),
        vec![1; n],
    )?;
    sys.positions = Some(positions);
    Ok(sys)
}

pub fn distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// The benchmark instance: network, `Σπ ≥ ⌊N/4⌋`, unit weights, `α = η = 1`.
pub fn benchmark_spec(n: usize, seed: u64) -> Result<MultiPeriodSpec, CoreError> {
    let sys = random_network(n, seed)?;
    let logistics = min_count_constraint(n, 1, n / 4)?;
    MultiPeriodSpec::single(sys, logistics, SelectionWeights::uniform(n))
}

type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &Rows, what: &str, ncols_if_empty: usize) -> Result<DMatrix<f64>, CoreError> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, ncols_if_empty));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(CoreError::Dimension(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodData {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B_u")]
    pub b_u: Rows,
    #[serde(rename = "B_w")]
    pub b_w: Rows,
    #[serde(rename = "C_z")]
    pub c_z: Rows,
    #[serde(rename = "D_wz")]
    pub d_wz: Rows,
}

/// On-disk system description (schema version 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub version: u32,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B_u")]
    pub b_u: Rows,
    #[serde(rename = "B_w")]
    pub b_w: Rows,
    #[serde(rename = "C_z")]
    pub c_z: Rows,
    #[serde(rename = "D_wz")]
    pub d_wz: Rows,
    pub partition: Vec<usize>,
    pub alpha: f64,
    pub eta: f64,
    #[serde(rename = "H")]
    pub h_mat: Rows,
    pub h: Vec<f64>,
    pub alpha_pi: Vec<f64>,
    #[serde(rename = "T_f")]
    pub t_f: usize,
    /// Later periods when the data changes over time (period 1 is the
    /// top-level matrices).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<PeriodData>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_partition: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const SCHEMA_VERSION: u32 = 1;

impl SystemFile {
    pub fn from_spec(spec: &MultiPeriodSpec, seed: Option<u64>) -> Self {
        let s0 = &spec.systems[0];
        let later: Vec<PeriodData> = spec.systems[1..]
            .iter()
            .map(|s| PeriodData {
                a: to_rows(&s.a),
                b_u: to_rows(&s.b_u),
                b_w: to_rows(&s.b_w),
                c_z: to_rows(&s.c_z),
                d_wz: to_rows(&s.d_wz),
            })
            .collect();
        Self {
            version: SCHEMA_VERSION,
            a: to_rows(&s0.a),
            b_u: to_rows(&s0.b_u),
            b_w: to_rows(&s0.b_w),
            c_z: to_rows(&s0.c_z),
            d_wz: to_rows(&s0.d_wz),
            partition: s0.partition.clone(),
            alpha: spec.weights.alpha,
            eta: spec.weights.eta,
            h_mat: to_rows(&spec.logistics.matrix()),
            h: spec.logistics.rhs().to_vec(),
            alpha_pi: spec.weights.alpha_pi.clone(),
            t_f: spec.periods(),
            periods: if later.is_empty() { None } else { Some(later) },
            c: s0.c.as_ref().map(to_rows),
            beta: s0.beta,
            sensor_partition: s0.sensor_partition.clone(),
            positions: s0.positions.clone(),
            seed,
        }
    }

    pub fn to_spec(&self) -> Result<MultiPeriodSpec, CoreError> {
        if self.version != SCHEMA_VERSION {
            return Err(CoreError::InvalidArgument(format!(
                "unsupported schema version {}",
                self.version
            )));
        }
        if self.t_f == 0 {
            return Err(CoreError::InvalidArgument("T_f must be at least 1".into()));
        }
        let nx = self.a.len();
        let build = |a: &Rows, bu: &Rows, bw: &Rows, cz: &Rows, dwz: &Rows| -> Result<CpsSystem, CoreError> {
            let bw_m = from_rows(bw, "B_w", 0)?;
            let mut s = CpsSystem {
                a: from_rows(a, "A", nx)?,
                b_u: from_rows(bu, "B_u", 0)?,
                b_w: bw_m.clone(),
                c_z: from_rows(cz, "C_z", nx)?,
                d_wz: from_rows(dwz, "D_wz", bw_m.ncols())?,
                partition: self.partition.clone(),
                c: None,
                sensor_partition: self.sensor_partition.clone(),
                beta: self.beta,
                positions: self.positions.clone(),
            };
            if let Some(c) = &self.c {
                s.c = Some(from_rows(c, "C", nx)?);
            }
            s.validate()?;
            Ok(s)
        };
        let mut systems = vec![build(&self.a, &self.b_u, &self.b_w, &self.c_z, &self.d_wz)?];
        match &self.periods {
            Some(later) => {
                if later.len() + 1 != self.t_f {
                    return Err(CoreError::Dimension(format!(
                        "{} extra periods listed for T_f = {}",
                        later.len(),
                        self.t_f
                    )));
                }
                for p in later {
                    systems.push(build(&p.a, &p.b_u, &p.b_w, &p.c_z, &p.d_wz)?);
                }
            }
            None => {
                for _ in 1..self.t_f {
                    systems.push(systems[0].clone());
                }
            }
        }
        let n = self.partition.len();
        let h_mat = from_rows(&self.h_mat, "H", n * self.t_f)?;
        let logistics = LogisticConstraints::from_matrix(n, self.t_f, &h_mat, &self.h)?;
        let spec = MultiPeriodSpec {
            systems,
            logistics,
            weights: SelectionWeights {
                alpha_pi: self.alpha_pi.clone(),
                alpha: self.alpha,
                eta: self.eta,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String, CoreError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_blocks() {
        let s = random_network(2, 3).unwrap();
        let blk = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -2.0]);
        assert_eq!(s.a.view((0, 0), (2, 2)), blk);
        assert_eq!(s.a.view((2, 2), (2, 2)), blk);
        assert_eq!((s.n_x(), s.n_u(), s.n_w()), (4, 2, 2));
        assert!(random_network(1, 0).is_err());
    }

    #[test]
    fn coupling_matches_positions() {
        let s = random_network(5, 11).unwrap();
        let pos = s.positions.clone().unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let d = ((pos[i][0] - pos[j][0]).powi(2) + (pos[i][1] - pos[j][1]).powi(2)).sqrt();
                let w = (-d).exp();
                assert!((s.a[(2 * i, 2 * j)] - w).abs() < 1e-15);
                assert!((s.a[(2 * i + 1, 2 * j + 1)] - w).abs() < 1e-15);
                assert_eq!(s.a[(2 * i, 2 * j + 1)], 0.0);
            }
        }
        assert!(pos.iter().all(|p| p.iter().all(|&c| (0.0..1.0).contains(&c))));
    }

    #[test]
    fn colocated_nodes_have_unit_coupling() {
        assert_eq!((-distance([0.3, 0.4], [0.3, 0.4])).exp(), 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(random_network(6, 9).unwrap(), random_network(6, 9).unwrap());
        assert_ne!(random_network(6, 9).unwrap().a, random_network(6, 10).unwrap().a);
    }

    #[test]
    fn json_roundtrip() {
        let spec = benchmark_spec(4, 2).unwrap();
        let f = SystemFile::from_spec(&spec, Some(2));
        let txt = f.to_json().unwrap();
        let back = SystemFile::from_json(&txt).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_spec().unwrap(), spec);
    }
}
