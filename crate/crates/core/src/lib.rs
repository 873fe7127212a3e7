//! Vibrational Bloch-Siegert shifts of trapped-ion sideband resonances.
//!
//! Two independent routes are provided:
//!
//! * [`resolvent`]: closed-form leading-order level-shift theory, summed to
//!   all orders in the Lamb-Dicke parameter, plus its Lamb-Dicke expansion;
//! * [`spectrum`]: exact diagonalization of the truncated laser-ion
//!   Hamiltonian with the resonance located on the dressed levels.
//!
//! Library code works in units of the trap frequency (`omega_T = 1`,
//! `hbar = 1`); conversion to physical units is left to callers.

pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod numerics;
pub mod resolvent;
pub mod spectrum;

pub use error::{Error, Result};
pub use fock::{chi, coupling_table, displacement_oracle, laguerre, rabi_coupling, CouplingTable, LdParam};
pub use hamiltonian::{
    bare_energy, build_hamiltonian, crossing_point, default_n_max, BareState, CrossingPoint, HamiltonianFamily,
    HamiltonianMatrix, Internal, SidebandId, SidebandKind, TrapParams,
};
pub use resolvent::{
    bs_shift, bs_shift_ld, bs_shift_literature, eta_zero_shift, level_shift_diag, perturbative_shift,
    LevelShiftElements, LdShift, PerturbativeShift, SeriesShift,
};
pub use spectrum::{
    convergence, eigenlevels, find_resonance, locate_resonance, measure_splitting, sweep, track_branch, Branch,
    Convergence, DressedSpectrum, Eigenlevels, LocatorMethod, ShiftReport, Splitting,
};
