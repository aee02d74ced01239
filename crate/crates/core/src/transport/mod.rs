//! Exact transportation distances between discrete measures.
//!
//! [`transport`] solves the transportation linear program for an arbitrary
//! [`GroundCost`] and returns an optimal vertex coupling. [`wasserstein`] is
//! the `r`-th root of the optimum under `ρ^r`, and [`composite_distance`]
//! uses a component-level divergence between likelihoods as the cost.

mod oracle;
mod simplex;

pub use oracle::wasserstein_1d_oracle;

use crate::error::{Error, Result};
use crate::measures::{euclidean, support_distance_matrix, DiscreteMeasure, Matrix};
use crate::mixtures::{component_divergence, Divergence, LikelihoodFamily};
use crate::numeric::compensated_sum;

/// Cost `c(θ, θ')` between a pair of atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundCost {
    /// `ρ(θ, θ') = ‖θ − θ'‖`.
    Euclidean,
    /// `ρ^r` for `r ≥ 1`.
    EuclideanPow(f64),
    /// Divergence between the component densities `f(·|θ)` and `f(·|θ')`.
    /// May be asymmetric (KL); the coupling problem is then directed.
    Component {
        divergence: Divergence,
        family: LikelihoodFamily,
    },
}

impl GroundCost {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            GroundCost::Euclidean => Ok(euclidean(a, b)),
            GroundCost::EuclideanPow(r) => Ok(euclidean(a, b).powf(*r)),
            GroundCost::Component { divergence, family } => {
                component_divergence(family, *divergence, a, b)
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            GroundCost::Component { divergence, .. } => *divergence != Divergence::KullbackLeibler,
            _ => true,
        }
    }
}

/// Joint distribution over atom index pairs with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub matrix: Matrix,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
}

impl Coupling {
    /// Largest absolute deviation of the row and column sums from the
    /// prescribed marginals.
    pub fn marginal_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.rows {
            let s = compensated_sum(m.row(i).iter().copied());
            worst = worst.max((s - self.row_marginal[i]).abs());
        }
        for j in 0..m.cols {
            let s = compensated_sum((0..m.rows).map(|i| m.get(i, j)));
            worst = worst.max((s - self.col_marginal[j]).abs());
        }
        worst
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.matrix.data.iter().filter(|q| **q > 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub value: f64,
    pub coupling: Coupling,
    pub iterations: usize,
}

/// `inf_q Σ q_ij cost(θ_i, θ'_j)` with an optimal coupling.
pub fn transport(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    cost: &GroundCost,
) -> Result<TransportResult> {
    if g.is_empty() || gp.is_empty() {
        return Err(Error::DegenerateInput("empty measure".into()));
    }
    let costs = support_distance_matrix(g, gp, cost)?;
    transport_with_costs(g.weights(), gp.weights(), &costs)
}

/// Transportation problem on an explicit cost matrix.
pub fn transport_with_costs(
    supply: &[f64],
    demand: &[f64],
    costs: &Matrix,
) -> Result<TransportResult> {
    if supply.is_empty() || demand.is_empty() {
        return Err(Error::DegenerateInput("empty marginal".into()));
    }
    if costs.rows != supply.len() || costs.cols != demand.len() {
        return Err(Error::DegenerateInput(format!(
            "cost matrix is {}x{}, marginals are {} and {}",
            costs.rows,
            costs.cols,
            supply.len(),
            demand.len()
        )));
    }
    if let Some(pos) = costs.data.iter().position(|c| !c.is_finite()) {
        return Err(Error::CostOverflow(pos / costs.cols, pos % costs.cols));
    }
    let sol = simplex::solve(supply, demand, costs)?;
    let mut flow = sol.flow;
    for q in flow.data.iter_mut() {
        if *q < 1e-15 {
            *q = 0.0;
        }
    }
    let value = compensated_sum(flow.data.iter().zip(&costs.data).map(|(q, c)| q * c)).max(0.0);
    Ok(TransportResult {
        value,
        coupling: Coupling {
            matrix: flow,
            row_marginal: supply.to_vec(),
            col_marginal: demand.to_vec(),
        },
        iterations: sol.iterations,
    })
}

/// `W_r(G, G') = (inf_q Σ q_ij ‖θ_i − θ'_j‖^r)^{1/r}`.
pub fn wasserstein(g: &DiscreteMeasure, gp: &DiscreteMeasure, r: f64) -> Result<f64> {
    check_order(r)?;
    let res = transport(g, gp, &GroundCost::EuclideanPow(r))?;
    Ok(res.value.powf(1.0 / r))
}

pub(crate) fn check_order(r: f64) -> Result<()> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Wasserstein order must be a finite r >= 1, got {r}"
        )));
    }
    Ok(())
}

/// Composite transportation distance whose ground cost is a divergence
/// between component densities. Directed `G → G'` when the divergence is KL.
pub fn composite_distance(
    g: &DiscreteMeasure,
    gp: &DiscreteMeasure,
    divergence: Divergence,
    family: &LikelihoodFamily,
) -> Result<f64> {
    let cost = GroundCost::Component {
        divergence,
        family: family.clone(),
    };
    Ok(transport(g, gp, &cost)?.value)
}
