//! Bare levels, crossing points and the time-independent laser-ion
//! Hamiltonian in the frame rotating with the laser.
//!
//! Basis ordering is fixed: `|g, 0..=n_max>` occupy indices `0..=n_max`,
//! `|e, 0..=n_max>` occupy `n_max + 1..=2 n_max + 1`. Energies use `hbar = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{coupling_table, CouplingTable, LdParam};

/// Rabi frequency above which (in units of the trap frequency) the
/// weak-field expansion should not be trusted.
pub const WEAK_FIELD_LIMIT: f64 = 0.1;

/// Physical problem definition. All frequencies share one unit system; the
/// library itself always runs with `omega_t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub omega_t: f64,
    pub rabi: f64,
    pub eta: LdParam,
    /// Laser detuning `omega_L - omega_0`.
    pub delta: f64,
}

impl TrapParams {
    pub fn new(omega_t: f64, rabi: f64, eta: LdParam, delta: f64) -> Result<Self> {
        if !(omega_t.is_finite() && omega_t > 0.0) {
            return Err(Error::InvalidArgument(format!("trap frequency must be > 0, got {omega_t}")));
        }
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(Error::InvalidArgument(format!("Rabi frequency must be >= 0, got {rabi}")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("detuning must be finite, got {delta}")));
        }
        Ok(TrapParams { omega_t, rabi, eta, delta })
    }

    /// Parameters in units of the trap frequency.
    pub fn dimensionless(rabi_ratio: f64, eta: LdParam, delta: f64) -> Result<Self> {
        Self::new(1.0, rabi_ratio, eta, delta)
    }

    pub fn with_delta(self, delta: f64) -> Self {
        TrapParams { delta, ..self }
    }

    pub fn with_rabi(self, rabi: f64) -> Self {
        TrapParams { rabi, ..self }
    }

    pub fn with_eta(self, eta: LdParam) -> Self {
        TrapParams { eta, ..self }
    }

    /// `Omega_R / omega_T`.
    pub fn rabi_ratio(&self) -> f64 {
        self.rabi / self.omega_t
    }

    /// True when the Rabi frequency is too large for the perturbative
    /// expressions to be quantitatively reliable.
    pub fn strong_field_warning(&self) -> bool {
        self.rabi_ratio() > WEAK_FIELD_LIMIT
    }
}

/// Internal electronic state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Internal {
    Ground,
    Excited,
}

/// A bare state `|alpha, n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BareState {
    pub internal: Internal,
    pub n: usize,
}

impl BareState {
    pub fn ground(n: usize) -> Self {
        BareState { internal: Internal::Ground, n }
    }

    pub fn excited(n: usize) -> Self {
        BareState { internal: Internal::Excited, n }
    }

    /// Index in a basis truncated at `n_max`.
    pub fn index(&self, n_max: usize) -> usize {
        match self.internal {
            Internal::Ground => self.n,
            Internal::Excited => n_max + 1 + self.n,
        }
    }

    pub fn from_index(index: usize, n_max: usize) -> Self {
        if index <= n_max {
            BareState::ground(index)
        } else {
            BareState::excited(index - n_max - 1)
        }
    }
}

impl std::fmt::Display for BareState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self.internal {
            Internal::Ground => 'g',
            Internal::Excited => 'e',
        };
        write!(f, "{label}{}", self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidebandKind {
    Carrier,
    Blue,
    Red,
}

/// The `|g, n_g> <-> |e, n_e>` resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SidebandId {
    pub n_g: usize,
    pub n_e: usize,
}

impl SidebandId {
    pub fn new(n_g: usize, n_e: usize) -> Self {
        SidebandId { n_g, n_e }
    }

    /// `n_e - n_g`.
    pub fn order(&self) -> i64 {
        self.n_e as i64 - self.n_g as i64
    }

    pub fn kind(&self) -> SidebandKind {
        match self.order() {
            0 => SidebandKind::Carrier,
            k if k > 0 => SidebandKind::Blue,
            _ => SidebandKind::Red,
        }
    }

    pub fn is_carrier(&self) -> bool {
        self.n_g == self.n_e
    }

    /// The mirror resonance `|g, n_e> <-> |e, n_g>`.
    pub fn swapped(&self) -> Self {
        SidebandId { n_g: self.n_e, n_e: self.n_g }
    }

    pub fn ground(&self) -> BareState {
        BareState::ground(self.n_g)
    }

    pub fn excited(&self) -> BareState {
        BareState::excited(self.n_e)
    }

    pub fn max_level(&self) -> usize {
        self.n_g.max(self.n_e)
    }
}

impl std::fmt::Display for SidebandId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(g,{})<->(e,{})", self.n_g, self.n_e)
    }
}

/// Bare energy `n omega_T +/- Delta / 2` (upper sign for the ground state).
pub fn bare_energy(state: BareState, params: &TrapParams) -> f64 {
    let vib = state.n as f64 * params.omega_t;
    match state.internal {
        Internal::Ground => vib + 0.5 * params.delta,
        Internal::Excited => vib - 0.5 * params.delta,
    }
}

/// Where the bare levels of a sideband pair cross in the (E, Delta) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub energy: f64,
    pub detuning: f64,
}

pub fn crossing_point(sideband: SidebandId, params: &TrapParams) -> CrossingPoint {
    CrossingPoint {
        energy: 0.5 * params.omega_t * (sideband.n_g + sideband.n_e) as f64,
        detuning: sideband.order() as f64 * params.omega_t,
    }
}

/// Default truncation `max(n_g, n_e) + 15 + ceil(25 eta^2)`.
pub fn default_n_max(sideband: SidebandId, eta: LdParam) -> usize {
    let e = eta.value();
    sideband.max_level() + 15 + (25.0 * e * e).ceil() as usize
}

/// Complex Hermitian Hamiltonian over the truncated `{g, e} x Fock` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    n_max: usize,
    matrix: DMatrix<Complex64>,
}

impl HamiltonianMatrix {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, row: BareState, col: BareState) -> Complex64 {
        self.matrix[(row.index(self.n_max), col.index(self.n_max))]
    }

    /// `max |H - H^dag|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.matrix;
        let mut worst = 0.0_f64;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry modulus, used as the scale for residual checks.
    pub fn scale(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// The same operator after the diagonal gauge `|alpha, n> -> i^{-n} |alpha, n>`
    /// (applied in both internal sectors), in which it is real symmetric.
    /// Eigenvalues and bare-state populations are unchanged.
    pub fn to_real_gauge(&self) -> DMatrix<f64> {
        let n_max = self.n_max;
        let phase = |idx: usize| {
            let n = BareState::from_index(idx, n_max).n;
            match n % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            }
        };
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            (phase(i).conj() * self.matrix[(i, j)] * phase(j)).re
        })
    }
}

/// A fixed trap, field and truncation whose Hamiltonian can be evaluated at
/// any detuning without recomputing the coupling table.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    omega_t: f64,
    rabi: f64,
    table: CouplingTable,
    /// Real-gauge coupling block, `(Omega_R / 2) Re[i^{n} chi(n, n') i^{-n'}]`.
    real_block: DMatrix<f64>,
}

impl HamiltonianFamily {
    pub fn new(params: &TrapParams, n_max: usize) -> Result<Self> {
        let dim = n_max
            .checked_add(1)
            .and_then(|d| d.checked_mul(2))
            .ok_or_else(|| Error::Resource(format!("Hamiltonian for n_max = {n_max} is too large")))?;
        dim.checked_mul(dim)
            .ok_or_else(|| Error::Resource(format!("Hamiltonian of dimension {dim} is too large")))?;
        let table = coupling_table(params.eta, n_max)?;
        let half = 0.5 * params.rabi;
        let real_block = DMatrix::from_fn(n_max + 1, n_max + 1, |n, np| {
            // i^{n} i^{|n-n'|} i^{-n'} is +1 for n < n' and (-1)^{n-n'} otherwise
            let c = table.get(n, np);
            let d = n.abs_diff(np);
            let r = match d % 4 {
                0 => c.re,
                1 => c.im,
                2 => -c.re,
                _ => -c.im,
            };
            let sign = if n >= np && d % 2 == 1 { -1.0 } else { 1.0 };
            half * sign * r
        });
        Ok(HamiltonianFamily { omega_t: params.omega_t, rabi: params.rabi, table, real_block })
    }

    pub fn n_max(&self) -> usize {
        self.table.n_max()
    }

    pub fn dim(&self) -> usize {
        2 * self.table.dim()
    }

    pub fn table(&self) -> &CouplingTable {
        &self.table
    }

    fn diagonal(&self, delta: f64, idx: usize) -> f64 {
        let state = BareState::from_index(idx, self.n_max());
        let vib = state.n as f64 * self.omega_t;
        match state.internal {
            Internal::Ground => vib + 0.5 * delta,
            Internal::Excited => vib - 0.5 * delta,
        }
    }

    /// Complex Hamiltonian at detuning `delta`. The `(g n | e n')` block holds
    /// `(Omega_R / 2) chi(n, n')`, the `(e | g)` block its conjugate.
    pub fn at(&self, delta: f64) -> HamiltonianMatrix {
        let size = self.table.dim();
        let half = 0.5 * self.rabi;
        let mut m = DMatrix::<Complex64>::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            m[(i, i)] = Complex64::new(self.diagonal(delta, i), 0.0);
        }
        for n in 0..size {
            for np in 0..size {
                let c = self.table.get(n, np) * half;
                m[(n, size + np)] = c;
                m[(size + np, n)] = c.conj();
            }
        }
        HamiltonianMatrix { n_max: self.n_max(), matrix: m }
    }

    /// Real symmetric form of [`Self::at`] in the `i^{-n}` gauge.
    pub fn real_at(&self, delta: f64) -> DMatrix<f64> {
        let size = self.table.dim();
        let mut m = DMatrix::<f64>::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            m[(i, i)] = self.diagonal(delta, i);
        }
        for n in 0..size {
            for np in 0..size {
                let v = self.real_block[(n, np)];
                m[(n, size + np)] = v;
                m[(size + np, n)] = v;
            }
        }
        m
    }
}

/// Assemble the Hamiltonian at `params.delta` over `{g, e} x {0..=n_max}`.
pub fn build_hamiltonian(params: &TrapParams, n_max: usize) -> Result<HamiltonianMatrix> {
    Ok(HamiltonianFamily::new(params, n_max)?.at(params.delta))
}
