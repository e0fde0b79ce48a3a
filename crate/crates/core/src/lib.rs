//! Finite-dimensional Hilbert `*`-bimodules over C*-algebras.
//!
//! The crate models a C*-algebra as a direct sum of full matrix blocks with a
//! faithful trace, and a `*`-bimodule over it by structure tensors (actions,
//! a bilinear algebra-valued pairing, and an antilinear involution). On top
//! of that it provides the standard example families, the linking-algebra
//! representation, the center/locality structure theory, and the tangent
//! bimodule of a trace-symmetric Markov generator with its exterior
//! derivative.

pub mod algebra;
pub mod bimodule;
pub mod constructions;
pub mod error;
pub mod io;
pub mod linalg;
pub mod linking;
pub mod report;
pub mod runner;
pub mod sauvageot;
pub mod structure;

pub use algebra::{AlgElement, BlockPartition, CStarAlgebra, ConditionalExpectation, StateFunctional, DEFAULT_TOL};
pub use bimodule::{
    check_isomorphism, AxiomReport, BimoduleTensors, IsomorphismCheck, ModuleElement, ModuleOperator, QuotientMap, Side,
    StarBimodule,
};
pub use error::{Axiom, Result, StarError};
pub use constructions::{
    complexified_real_hilbert, direct_sum_module, expectation_bimodule, fell_bundle_module, fell_decompose,
    gns_bimodule, hyperbolic_pair, multiplication_module, tensor_bimodule, FellBundleFinite, FellDecomposition,
};
pub use linking::{verify_theorem12, LinkingOperator, LinkingSpace, ReportItem, Theorem12Report};
pub use structure::{
    bimodule_center, central_projection, complement, decompose_local, is_centered, is_local, orthogonalize_center,
    verify_decomposition, CenterData, Complement, DecompositionReport, LocalDecomposition,
};
pub use sauvageot::{
    build_tangent, conjugation_generator, graph_laplacian_generator, validate_generator, verify_derivation,
    DerivationReport, GeneratorReport, MarkovGenerator, TangentBimodule,
};
