use super::StatePoint;
use crate::error::{Error, Result};
use crate::rng::Sampler;

/// Finite Markov chain with deterministic log growth per transition.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    transition: Vec<Vec<f64>>,
    growth: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    stationary_cumulative: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

impl FiniteChain {
    /// Builds the chain and solves for its stationary vector.
    pub fn new(transition: Vec<Vec<f64>>, growth: Vec<Vec<f64>>) -> Result<Self> {
        check_shapes(&transition, &growth)?;
        let stationary = solve_stationary(&transition)?;
        Self::with_stationary(transition, growth, stationary)
    }

    /// Builds the chain with a caller-supplied stationary vector.
    pub fn with_stationary(transition: Vec<Vec<f64>>, growth: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self> {
        check_shapes(&transition, &growth)?;
        let cumulative = transition.iter().map(|row| cumulative_sum(row)).collect();
        let stationary_cumulative = cumulative_sum(&stationary);
        let chain = Self {
            transition,
            growth,
            stationary,
            cumulative,
            stationary_cumulative,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// One-state chain whose valuation kernel equals `kernel` under the
    /// exponent `one_minus_gamma`.
    pub fn singleton(kernel: f64, one_minus_gamma: f64) -> Result<Self> {
        if !(kernel > 0.0 && kernel.is_finite()) {
            return Err(Error::domain(format!("scalar kernel must be positive, got {kernel}")));
        }
        Self::new(vec![vec![1.0]], vec![vec![kernel.ln() / one_minus_gamma]])
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn growth_table(&self) -> &[Vec<f64>] {
        &self.growth
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.transition[i][j]
    }

    pub fn growth(&self, i: usize, j: usize) -> f64 {
        self.growth[i][j]
    }

    /// Same chain with every growth entry shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.growth {
            for k in row.iter_mut() {
                *k += c;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check_shapes(&self.transition, &self.growth)?;
        let n = self.n_states();
        for (i, row) in self.transition.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::domain(format!("transition row {i} sums to {sum}, not 1")));
            }
        }
        if self.stationary.len() != n {
            return Err(Error::domain("stationary vector length differs from state count"));
        }
        if self.stationary.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain("stationary vector must be nonnegative"));
        }
        for j in 0..n {
            let flowed: f64 = (0..n).map(|i| self.stationary[i] * self.transition[i][j]).sum();
            if (flowed - self.stationary[j]).abs() > STATIONARY_TOL {
                return Err(Error::domain(format!(
                    "stationary vector is not invariant at state {j}: {flowed} vs {}",
                    self.stationary[j]
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn step(&self, i: usize, rng: &mut Sampler) -> (f64, StatePoint) {
        let j = pick(&self.cumulative[i], rng.uniform());
        (self.growth[i][j], StatePoint::index(j))
    }

    pub(crate) fn sample_stationary(&self, rng: &mut Sampler) -> StatePoint {
        StatePoint::index(pick(&self.stationary_cumulative, rng.uniform()))
    }
}

fn check_shapes(transition: &[Vec<f64>], growth: &[Vec<f64>]) -> Result<()> {
    let n = transition.len();
    if n == 0 {
        return Err(Error::domain("finite chain needs at least one state"));
    }
    if growth.len() != n {
        return Err(Error::domain("growth table must have one row per state"));
    }
    for (i, (row, grow)) in transition.iter().zip(growth).enumerate() {
        if row.len() != n || grow.len() != n {
            return Err(Error::domain(format!("row {i} is not of length {n}")));
        }
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain(format!(
                "transition row {i} has a negative or non-finite entry"
            )));
        }
        if grow.iter().any(|k| !k.is_finite()) {
            return Err(Error::domain(format!("growth row {i} has a non-finite entry")));
        }
    }
    Ok(())
}

fn cumulative_sum(row: &[f64]) -> Vec<f64> {
    row.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    let target = u * total;
    cumulative
        .iter()
        .position(|c| target < *c)
        .unwrap_or(cumulative.len() - 1)
}

/// Solves `pi^T P = pi^T`, `sum(pi) = 1` by Gaussian elimination with the
/// last balance equation replaced by the normalization.
fn solve_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().take(n).enumerate() {
            *entry = transition[c][r] - if r == c { 1.0 } else { 0.0 };
        }
    }
    for entry in a[n - 1].iter_mut() {
        *entry = 1.0;
    }

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::domain("transition matrix has no unique stationary distribution"));
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                if f != 0.0 {
                    for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}
