use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioError;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite first-order Markov chain over real-valued labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub labels: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(labels: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self, ScenarioError> {
        let chain = Self { labels, transition };
        chain.validate("chain")?;
        Ok(chain)
    }

    /// Chain that stays in its current state forever.
    pub fn identity(labels: Vec<f64>) -> Self {
        let n = labels.len();
        let transition = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { labels, transition }
    }

    /// Two-state chain with the given self-transition probabilities.
    pub fn two_state(labels: [f64; 2], stay: [f64; 2]) -> Result<Self, ScenarioError> {
        Self::new(
            labels.to_vec(),
            vec![vec![stay[0], 1.0 - stay[0]], vec![1.0 - stay[1], stay[1]]],
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, idx: usize) -> f64 {
        self.labels[idx]
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    /// Index of the state whose label equals `label` exactly.
    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Draws the successor of `from` by inverse-CDF sampling on one uniform.
    pub fn sample_next<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let row = &self.transition[from];
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap above the row sum; take the last
        // state with positive mass.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(from)
    }

    pub(crate) fn validate(&self, role: &str) -> Result<(), ScenarioError> {
        let n = self.labels.len();
        if n == 0 {
            return Err(ScenarioError::invalid("non-empty-chain", format!("{role} has no states")));
        }
        if !self.labels.iter().all(|l| l.is_finite()) {
            return Err(ScenarioError::invalid("finite-labels", format!("{role} has a non-finite label")));
        }
        for i in 0..n {
            for j in 0..i {
                if self.labels[i] == self.labels[j] {
                    return Err(ScenarioError::invalid(
                        "distinct-labels",
                        format!("{role} repeats label {}", self.labels[i]),
                    ));
                }
            }
        }
        if self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            return Err(ScenarioError::invalid(
                "square-transition",
                format!("{role} transition matrix must be {n}x{n}"),
            ));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(ScenarioError::invalid(
                    "probability-range",
                    format!("{role} row {i} has entry {p} outside [0, 1]"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ScenarioError::invalid(
                    "row-stochastic",
                    format!("{role} row {i} sums to {sum}"),
                ));
            }
        }
        Ok(())
    }
}
