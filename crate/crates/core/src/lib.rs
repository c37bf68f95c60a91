//! Learnable differential k-forms over embedded simplicial complexes.
//!
//! A neural k-form is an MLP `psi: R^n -> R^{C(n,k) * l}` whose outputs are the
//! coefficient functions of `l` differential k-forms in the monomial basis
//! `dx_I`. Integrating those forms against the k-chains of an embedded
//! simplicial complex yields an integration matrix, a representation of the
//! complex that is consistent across complexes and can be trained end to end.
//!
//! Modules, bottom up:
//!
//! - [`simplicial`]: complexes, embeddings and chains.
//! - [`nn`]: the MLP with hand-written reverse-mode gradients and optimizers.
//! - [`forms`]: multi-indices, Jacobian minors and neural k-forms.
//! - [`quadrature`]: simplex subdivision and integration matrices.
//! - [`model`]: readouts, classifier, training loop and cross validation.
//! - [`data`]: synthetic generators and the TU graph text format.
//! - [`gradcheck`]: finite-difference verification of every gradient path.
//! - [`approximation`]: fitting neural forms to a fixed target form.

pub mod approximation;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod forms;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod quadrature;
pub mod simplicial;

pub use error::{Error, Result};
pub use forms::{MultiIndexTable, NeuralKForm};
pub use model::{Dataset, Item, KFormClassifier, ReadoutKind, Split, TrainConfig, TrainOutcome};
pub use nn::{Activation, GradientBuffer, Mlp};
pub use quadrature::{IntegrationMatrix, QuadraturePlan, SimplexSubdivision};
pub use simplicial::{Chain, ChainTuple, Embedding, SimplicialComplex};
