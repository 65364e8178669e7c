//! Core algorithms for polyhedral approximation of metric surfaces:
//! finite metric spaces and their comparison invariants, metric gluing,
//! metric simplicial complexes with quasiconformal certificates, graph
//! approximations of spaces, explicit complex constructions (including the
//! snowsphere family), the approximation pipeline, and discrete conformal
//! modulus.

pub mod approximation;
pub mod constructions;
pub mod error;
pub mod finite_metric;
pub mod glue;
pub mod graph;
pub mod grids;
pub mod modulus;
pub mod pipeline;
pub mod report;
pub mod sampling;
pub mod simplicial;

pub use approximation::{Approximation, AxiomReport, Host};
pub use error::{Error, Result};
pub use finite_metric::{DistortionProfile, EpsIsometryCert, FiniteMetric};
pub use glue::GluedMetric;
pub use pipeline::{run_pipeline, select_alpha, PipelineInput, PipelineOutput};
pub use report::Report;
pub use simplicial::{MeshGraph, MetricComplex, QCCertificate};
