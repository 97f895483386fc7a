//! Evolutionary multi-objective search over cognitive diagnosis models.
//!
//! A candidate model is an expression tree over the student, exercise and
//! concept embeddings. Trees are trained with Adam, scored by validation AUC
//! and a structural interpretability measure, and evolved with
//! non-dominated sorting.

pub mod data;
pub mod evolve;
pub mod genome;
pub mod numcore;
pub mod training;
