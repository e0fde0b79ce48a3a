use thiserror::Error;

/// Identifies which structural check of a `*`-bimodule failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axiom {
    /// `S * conj(S) = I` for the involution matrix.
    Involutive,
    /// `<x, y>* = <y*, x*>`.
    PairingAdjoint,
    /// `(a x)* = x* a*`.
    ActionInvolution,
    /// `<x, x*> >= 0` (block Gram over the left and right products).
    Positivity,
    /// `<ax, y> = a<x, y>`, `<xa, y> = <x, ay>`, `<x, ya> = <x, y>a`.
    Bilinearity,
    /// Unital (anti-)homomorphic actions that commute with each other.
    Actions,
}

impl Axiom {
    pub fn label(self) -> &'static str {
        match self {
            Axiom::Involutive => "involutive",
            Axiom::PairingAdjoint => "a",
            Axiom::ActionInvolution => "b",
            Axiom::Positivity => "c",
            Axiom::Bilinearity => "bilinearity",
            Axiom::Actions => "actions",
        }
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error)]
pub enum StarError {
    #[error("block dimension must be positive (block {0})")]
    NonPositiveDimension(usize),
    #[error("trace weight must be positive and finite (block {block}: {weight})")]
    NonPositiveWeight { block: usize, weight: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("element is not positive")]
    NotPositive,
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("algebra is commutative; no norm-asymmetry witness exists")]
    CommutativeAlgebra,
    #[error("axiom ({axiom}) violated with residual {residual:e}")]
    AxiomViolation { axiom: Axiom, residual: f64 },
    #[error("module elements belong to different bimodules")]
    OwnerMismatch,
    #[error("operator is not adjointable (residual {0:e})")]
    NotAdjointable(f64),
    #[error("functional is not a state: {0}")]
    NotAState(String),
    #[error("gram matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("ideal has no blocks")]
    EmptyIdeal,
    #[error("base algebra is not commutative")]
    NotCommutativeBase,
    #[error("reality condition fails: inner product of self-adjoint elements has imaginary part {0:e}")]
    RealityConditionFails(f64),
    #[error("left and right actions differ (residual {0:e})")]
    ActionsDiffer(f64),
    #[error("not a central projection: {0}")]
    NotCentralProjection(String),
    #[error("bimodule is not local")]
    NotLocal,
    #[error("sub-bimodule is not centered")]
    NotCentered,
    #[error("subspace is not a self-adjoint sub-bimodule")]
    NotSubmodule,
    #[error("bimodule has a nonzero null space (dimension {0})")]
    NullSpacePresent(usize),
    #[error("graph weights are not symmetric")]
    AsymmetricWeights,
    #[error("graph weights must be nonnegative with zero diagonal")]
    NegativeWeight,
    #[error("element is not unitary (residual {0:e})")]
    NotUnitary(f64),
    #[error("generator failed validation: {0}")]
    GeneratorInvalid(String),
    #[error("positivity fails on E0 (minimum eigenvalue {0:e})")]
    PositivityFails(f64),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StarError>;
