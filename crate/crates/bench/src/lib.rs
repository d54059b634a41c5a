//! Shared fixtures for the kernel benchmarks.

use ptgeom::models::{InitialState, Model, ModelSpec, TwoLevelPTParams, YangLeeParams};
use ptgeom::Operator;

/// Yang-Lee chain at `lam = kappa = 1` with `n_sites` spins.
pub fn yang_lee(n_sites: usize) -> Model {
    Model::YangLee(YangLeeParams::new(1.0, 1.0, n_sites).expect("valid chain length"))
}

/// Yang-Lee Hamiltonian used as a generic dense non-Hermitian matrix.
pub fn yang_lee_hamiltonian(n_sites: usize) -> Operator {
    yang_lee(n_sites).hamiltonian()
}

/// Dissipative two-level model used by the control problem.
pub fn two_level_control() -> ModelSpec {
    ModelSpec::new(Model::TwoLevel(TwoLevelPTParams { s: 0.2, r: 1.0 })).with_initial_state(InitialState::Zero)
}
