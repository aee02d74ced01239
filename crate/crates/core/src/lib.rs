//! Transportation distances between discrete mixing measures, divergence
//! bounds for location mixtures, identifiability functionals and Bayesian
//! posterior contraction experiments for finite and Dirichlet-process
//! mixtures.

pub mod bayes;
pub mod error;
pub mod experiment;
pub mod identifiability;
pub mod measures;
pub mod mixtures;
pub mod numeric;
pub mod quadrature;
pub mod seeds;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{make_measure, DiscreteMeasure, ParamSpace};
pub use mixtures::{Divergence, LikelihoodFamily, MixtureDensity};
pub use transport::{transport, wasserstein, GroundCost};
