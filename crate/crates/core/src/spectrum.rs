//! Exact numerical route: diagonalize the truncated Hamiltonian, follow
//! dressed branches across a detuning sweep and locate sideband resonances
//! as the extremum of the dressed level (or, for a true crossing, the
//! intersection of the two tagged levels).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::rabi_coupling;
use crate::hamiltonian::{
    crossing_point, default_n_max, BareState, HamiltonianFamily, HamiltonianMatrix, Internal,
    SidebandId, TrapParams,
};
use crate::numerics::{brent_root, linspace, parabola_vertex};

/// Gaps below this (in units of the trap frequency) are treated as true
/// crossings and located by intersection instead of extremum.
pub const GAP_FLOOR: f64 = 1e-10;
/// Coarse samples across the search window.
pub const COARSE_POINTS: usize = 101;
/// Parabolic refinement stops once a step is below this (units of omega_T).
pub const REFINE_TOL: f64 = 1e-9;
pub const REFINE_MAX_ITER: usize = 60;
/// Maximum number of interval bisections when overlap tracking is ambiguous.
pub const MAX_REFINE_LEVELS: usize = 12;
/// Two continuations whose overlaps differ by less than this are ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.05;
/// Relative agreement required between a basis and its doubled margin.
pub const CONVERGENCE_RTOL: f64 = 1e-4;
pub const CONVERGENCE_ATOL: f64 = 1e-12;
/// The convergence loop never grows the basis more than this beyond its start.
pub const CONVERGENCE_CAP: usize = 240;

const ROOT_XTOL: f64 = 1e-15;
const ROOT_MAX_ITER: usize = 200;
/// Half-width limit of the search window: stays clear of the neighbouring
/// crossings of the same bare levels one trap quantum away.
const MAX_WINDOW: f64 = 0.45;
const MIN_WINDOW: f64 = 0.1;

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigenlevels {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Diagonalize a Hermitian Hamiltonian and verify every eigenpair residual.
pub fn eigenlevels(h: &HamiltonianMatrix) -> Result<Eigenlevels> {
    let dim = h.dim();
    let m = h.matrix().clone();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 100 * dim.max(1)).ok_or_else(|| {
        Error::Numeric(format!(
            "Hermitian eigensolver did not converge (dim = {dim}, max |H_ij| = {:e})",
            h.scale()
        ))
    })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);

    let norm = h.matrix().norm().max(f64::MIN_POSITIVE);
    for (c, &lambda) in values.iter().enumerate() {
        let v = vectors.column(c);
        let residual = (h.matrix() * v - v * Complex64::new(lambda, 0.0)).norm();
        if residual > 1e-10 * norm {
            return Err(Error::Numeric(format!(
                "eigenpair {c} residual {residual:e} exceeds tolerance (||H|| = {norm:e})"
            )));
        }
    }
    Ok(Eigenlevels { values, vectors })
}

/// Real-gauge eigen-decomposition used by every sweep.
#[derive(Debug, Clone)]
pub(crate) struct RealLevels {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    n_max: usize,
}

impl RealLevels {
    fn solve(family: &HamiltonianFamily, delta: f64) -> Result<Self> {
        let m = family.real_at(delta);
        let dim = m.nrows();
        let eig = SymmetricEigen::try_new(m, f64::EPSILON, 100 * dim.max(1)).ok_or_else(|| {
            Error::Numeric(format!("symmetric eigensolver did not converge at detuning {delta}"))
        })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(RealLevels { values, vectors, n_max: family.n_max() })
    }

    /// `|<state|level>|^2`.
    fn population(&self, level: usize, state: BareState) -> f64 {
        self.vectors[(state.index(self.n_max), level)].powi(2)
    }

    /// `dE/dDelta = (P_g - P_e) / 2` by Hellmann-Feynman.
    fn slope(&self, level: usize) -> f64 {
        let col = self.vectors.column(level);
        let size = self.n_max + 1;
        let pg: f64 = col.rows(0, size).iter().map(|x| x * x).sum();
        let pe: f64 = col.rows(size, size).iter().map(|x| x * x).sum();
        0.5 * (pg - pe)
    }

    /// Level with the largest population in `state`.
    fn dominant_level(&self, state: BareState) -> usize {
        let row = state.index(self.n_max);
        (0..self.values.len())
            .max_by(|&a, &b| self.vectors[(row, a)].abs().total_cmp(&self.vectors[(row, b)].abs()))
            .unwrap_or(0)
    }

    /// Bare state with the largest population in `level`.
    fn dominant_state(&self, level: usize) -> BareState {
        let col = self.vectors.column(level);
        let (idx, _) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap_or((0, &0.0));
        BareState::from_index(idx, self.n_max)
    }
}

/// One dressed level followed across the detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Bare state the branch starts from at the first grid point.
    pub tag: BareState,
    pub energies: Vec<f64>,
    /// `|<tag|branch>|^2` at each grid point.
    pub overlaps: Vec<f64>,
}

impl Branch {
    /// Grid points where the branch is still mostly its tagged bare state.
    pub fn valid(&self, i: usize) -> bool {
        self.overlaps[i] > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedSpectrum {
    pub grid: Vec<f64>,
    pub branches: Vec<Branch>,
    pub n_max: usize,
}

/// Map each level at `prev` onto a level at `next` by maximal eigenvector
/// overlap. Ambiguity is only checked for the `watched` levels; it is
/// resolved by bisecting the interval, up to [`MAX_REFINE_LEVELS`] times.
fn match_levels(
    family: &HamiltonianFamily,
    prev: &RealLevels,
    next: &RealLevels,
    lo: f64,
    hi: f64,
    watched: &[usize],
    depth: usize,
) -> Result<Vec<usize>> {
    let overlap = (prev.vectors.transpose() * &next.vectors).abs();
    let dim = overlap.nrows();
    let ambiguous = watched.iter().any(|&p| {
        let mut row: Vec<f64> = overlap.row(p).iter().copied().collect();
        row.sort_by(|a, b| b.total_cmp(a));
        row.len() > 1 && row[0] - row[1] < AMBIGUITY_MARGIN
    });
    if ambiguous {
        if depth >= MAX_REFINE_LEVELS {
            return Err(Error::AmbiguousBranch { lo, hi });
        }
        let mid = 0.5 * (lo + hi);
        let middle = RealLevels::solve(family, mid)?;
        let first = match_levels(family, prev, &middle, lo, mid, watched, depth + 1)?;
        let watched_mid: Vec<usize> = watched.iter().map(|&p| first[p]).collect();
        let second = match_levels(family, &middle, next, mid, hi, &watched_mid, depth + 1)?;
        return Ok(first.iter().map(|&m| second[m]).collect());
    }

    let mut pairs: Vec<(usize, usize)> = (0..dim).flat_map(|p| (0..dim).map(move |q| (p, q))).collect();
    pairs.sort_by(|a, b| {
        overlap[(b.0, b.1)]
            .total_cmp(&overlap[(a.0, a.1)])
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut map = vec![usize::MAX; dim];
    let mut taken = vec![false; dim];
    let mut left = dim;
    for (p, q) in pairs {
        if map[p] == usize::MAX && !taken[q] {
            map[p] = q;
            taken[q] = true;
            left -= 1;
            if left == 0 {
                break;
            }
        }
    }
    Ok(map)
}

fn solve_grid(family: &HamiltonianFamily, grid: &[f64]) -> Result<Vec<RealLevels>> {
    grid.par_iter().map(|&d| RealLevels::solve(family, d)).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("detuning grid is empty".into()));
    }
    if grid.iter().any(|d| !d.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("detuning grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Follow the levels starting at indices `starts` (at `grid[0]`) across the
/// grid. Returns, per grid point, the eigen-index of every followed level.
fn follow(
    family: &HamiltonianFamily,
    grid: &[f64],
    levels: &[RealLevels],
    starts: &[usize],
) -> Result<Vec<Vec<usize>>> {
    let mut current = starts.to_vec();
    let mut path = vec![current.clone()];
    for i in 1..grid.len() {
        let map = match_levels(family, &levels[i - 1], &levels[i], grid[i - 1], grid[i], &current, 0)?;
        current = current.iter().map(|&p| map[p]).collect();
        path.push(current.clone());
    }
    Ok(path)
}

fn build_branch(tag: BareState, levels: &[RealLevels], path: &[Vec<usize>], which: usize) -> Branch {
    let energies = levels.iter().zip(path).map(|(l, idx)| l.values[idx[which]]).collect();
    let overlaps = levels.iter().zip(path).map(|(l, idx)| l.population(idx[which], tag)).collect();
    Branch { tag, energies, overlaps }
}

/// Follow the dressed level that starts (at `grid[0]`) on the bare state
/// `tag`, choosing the continuation of maximal eigenvector overlap.
pub fn track_branch(params: &TrapParams, grid: &[f64], tag: BareState, n_max: usize) -> Result<Branch> {
    check_grid(grid)?;
    if tag.n > n_max {
        return Err(Error::InvalidArgument(format!("tag {tag} lies outside the basis n_max = {n_max}")));
    }
    let family = HamiltonianFamily::new(params, n_max)?;
    let levels = solve_grid(&family, grid)?;
    let start = levels[0].dominant_level(tag);
    let path = follow(&family, grid, &levels, &[start])?;
    Ok(build_branch(tag, &levels, &path, 0))
}

/// Track every dressed level whose starting bare state has vibrational
/// number `<= max_level`. Branches are ordered by their energy at `grid[0]`.
pub fn sweep(params: &TrapParams, grid: &[f64], n_max: usize, max_level: usize) -> Result<DressedSpectrum> {
    check_grid(grid)?;
    let family = HamiltonianFamily::new(params, n_max)?;
    let levels = solve_grid(&family, grid)?;
    let starts: Vec<usize> = (0..family.dim())
        .filter(|&l| levels[0].dominant_state(l).n <= max_level)
        .collect();
    let path = follow(&family, grid, &levels, &starts)?;
    let branches = starts
        .iter()
        .enumerate()
        .map(|(k, &l)| build_branch(levels[0].dominant_state(l), &levels, &path, k))
        .collect();
    Ok(DressedSpectrum { grid: grid.to_vec(), branches, n_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocatorMethod {
    /// Extremum of the dressed branch.
    Extremum,
    /// Crossing of the two tagged levels (gap below [`GAP_FLOOR`]).
    Intersection,
    /// Carrier resonance; located by extremum like any other.
    Carrier,
}

/// Numerically exact resonance position for one sideband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub sideband: SidebandId,
    pub delta0: f64,
    pub delta_star: f64,
    pub delta_omega_numeric: f64,
    pub gap: f64,
    pub method: LocatorMethod,
    pub n_max_used: usize,
    pub converged: bool,
}

/// Closest approach of the two dressed levels of a sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    /// `E_upper - E_lower` at closest approach.
    pub gap: f64,
    pub at_delta: f64,
    /// `|Omega_{n_g n_e}|`, the two-level prediction for the full gap.
    pub coupling_abs: f64,
    /// `|R_ge| = |Omega_{n_g n_e}| / 2`.
    pub delta_epsilon: f64,
}

/// Result of the resonance search at a single basis size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Located {
    pub delta_star: f64,
    pub gap: f64,
    pub gap_delta: f64,
    pub method: LocatorMethod,
}

struct PairSearch {
    family: HamiltonianFamily,
    sideband: SidebandId,
    delta0: f64,
    omega_t: f64,
    lower: usize,
    half_width: f64,
}

impl PairSearch {
    fn new(sideband: SidebandId, params: &TrapParams, n_max: usize) -> Result<Self> {
        if sideband.max_level() > n_max {
            return Err(Error::InvalidArgument(format!(
                "sideband {sideband} needs n_max >= {}, got {n_max}",
                sideband.max_level()
            )));
        }
        let family = HamiltonianFamily::new(params, n_max)?;
        let delta0 = crossing_point(sideband, params).detuning;
        let at0 = RealLevels::solve(&family, delta0)?;
        let (g, e) = (sideband.ground(), sideband.excited());
        let mut by_weight: Vec<usize> = (0..family.dim()).collect();
        by_weight.sort_by(|&a, &b| {
            let wa = at0.population(a, g) + at0.population(a, e);
            let wb = at0.population(b, g) + at0.population(b, e);
            wb.total_cmp(&wa).then(a.cmp(&b))
        });
        let (a, b) = (by_weight[0], by_weight[1]);
        if a.abs_diff(b) != 1 {
            return Err(Error::Numeric(format!(
                "dressed levels of {sideband} are not adjacent at the crossing (indices {a}, {b}); field too strong?"
            )));
        }
        let gap_estimate = rabi_coupling(sideband.n_g, sideband.n_e, params).norm();
        let half_width = (5.0 * gap_estimate).max(MIN_WINDOW * params.omega_t).min(MAX_WINDOW * params.omega_t);
        Ok(PairSearch {
            family,
            sideband,
            delta0,
            omega_t: params.omega_t,
            lower: a.min(b),
            half_width,
        })
    }

    fn levels(&self, delta: f64) -> Result<RealLevels> {
        RealLevels::solve(&self.family, delta)
    }

    fn window(&self) -> (f64, f64) {
        (self.delta0 - self.half_width, self.delta0 + self.half_width)
    }

    fn widen(&mut self) -> bool {
        let max = MAX_WINDOW * self.omega_t;
        if self.half_width >= max {
            return false;
        }
        self.half_width = (2.0 * self.half_width).min(max);
        true
    }

    /// Closest approach: root of `dE_upper/dDelta - dE_lower/dDelta`.
    fn closest_approach(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.window();
        let lower = self.lower;
        let at = brent_root(
            |d| {
                let l = self.levels(d)?;
                Ok(l.slope(lower + 1) - l.slope(lower))
            },
            lo,
            hi,
            ROOT_XTOL * self.omega_t,
            ROOT_MAX_ITER,
        )?;
        let l = self.levels(at)?;
        Ok((l.values[lower + 1] - l.values[lower], at))
    }

    /// Root of `E(tagged g) - E(tagged e)` for decoupled (crossing) levels.
    fn intersection(&self) -> Result<f64> {
        let (lo, hi) = self.window();
        let (g, e) = (self.sideband.ground(), self.sideband.excited());
        brent_root(
            |d| {
                let l = self.levels(d)?;
                Ok(l.values[l.dominant_level(g)] - l.values[l.dominant_level(e)])
            },
            lo,
            hi,
            ROOT_XTOL * self.omega_t,
            ROOT_MAX_ITER,
        )
    }

    /// Maximum of the lower dressed level: coarse scan, successive parabolic
    /// refinement, then a Hellmann-Feynman slope root inside the final
    /// stencil. `Ok(None)` when the maximum sits on the window edge.
    fn extremum(&self) -> Result<Option<f64>> {
        let (lo, hi) = self.window();
        let grid = linspace(lo, hi, COARSE_POINTS);
        let lower = self.lower;
        let energies: Vec<f64> = grid
            .par_iter()
            .map(|&d| self.levels(d).map(|l| l.values[lower]))
            .collect::<Result<_>>()?;
        let j = (0..energies.len())
            .max_by(|&a, &b| energies[a].total_cmp(&energies[b]))
            .unwrap_or(0);
        if j == 0 || j + 1 == energies.len() {
            return Ok(None);
        }

        let energy = |d: f64| self.levels(d).map(|l| l.values[lower]);
        let mut xs = [grid[j - 1], grid[j], grid[j + 1]];
        let mut ys = [energies[j - 1], energies[j], energies[j + 1]];
        for _ in 0..REFINE_MAX_ITER {
            let Some(v) = parabola_vertex(xs, ys) else { break };
            if !(v > xs[0] && v < xs[2]) || v == xs[1] {
                break;
            }
            let step = (v - xs[1]).abs();
            let yv = energy(v)?;
            if v < xs[1] {
                if yv >= ys[1] {
                    xs = [xs[0], v, xs[1]];
                    ys = [ys[0], yv, ys[1]];
                } else {
                    xs = [v, xs[1], xs[2]];
                    ys = [yv, ys[1], ys[2]];
                }
            } else if yv >= ys[1] {
                xs = [xs[1], v, xs[2]];
                ys = [ys[1], yv, ys[2]];
            } else {
                xs = [xs[0], xs[1], v];
                ys = [ys[0], ys[1], yv];
            }
            if step <= REFINE_TOL * self.omega_t {
                break;
            }
        }

        let slope = |d: f64| self.levels(d).map(|l| l.slope(lower));
        let (mut a, mut b) = (xs[0], xs[2]);
        if slope(a)? < 0.0 || slope(b)? > 0.0 {
            // fall back to the coarse stencil, which brackets the maximum
            a = grid[j - 1];
            b = grid[j + 1];
        }
        brent_root(slope, a, b, ROOT_XTOL * self.omega_t, ROOT_MAX_ITER).map(Some)
    }

    fn locate(&mut self) -> Result<Located> {
        loop {
            let (gap, gap_delta) = match self.closest_approach() {
                Ok(found) => found,
                Err(Error::Numeric(_)) if self.widen() => continue,
                Err(err) => return Err(err),
            };
            if gap < GAP_FLOOR * self.omega_t {
                let delta_star = self.intersection()?;
                return Ok(Located { delta_star, gap, gap_delta, method: LocatorMethod::Intersection });
            }
            match self.extremum()? {
                Some(delta_star) => {
                    let method = if self.sideband.is_carrier() {
                        LocatorMethod::Carrier
                    } else {
                        LocatorMethod::Extremum
                    };
                    return Ok(Located { delta_star, gap, gap_delta, method });
                }
                None if self.widen() => continue,
                None => {
                    let (lo, hi) = self.window();
                    return Err(Error::Numeric(format!(
                        "no extremum of the dressed level of {} inside [{lo}, {hi}]",
                        self.sideband
                    )));
                }
            }
        }
    }
}

/// Locate the resonance at a single truncation `n_max`.
pub fn locate_resonance(sideband: SidebandId, params: &TrapParams, n_max: usize) -> Result<Located> {
    PairSearch::new(sideband, params, n_max)?.locate()
}

/// Closest-approach gap of the sideband's dressed pair at truncation `n_max`.
pub fn measure_splitting(sideband: SidebandId, params: &TrapParams, n_max: usize) -> Result<Splitting> {
    let search = PairSearch::new(sideband, params, n_max)?;
    let (gap, at_delta) = search.closest_approach()?;
    let coupling_abs = rabi_coupling(sideband.n_g, sideband.n_e, params).norm();
    Ok(Splitting { gap, at_delta, coupling_abs, delta_epsilon: 0.5 * coupling_abs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Smallest basis whose shift agreed with its doubled-margin partner.
    pub n_max_final: usize,
    /// Basis the reported shift was computed with.
    pub n_max_reference: usize,
    pub delta_omega: f64,
    pub converged: bool,
    /// `(n_max, delta_omega)` for every basis tried.
    pub history: Vec<(usize, f64)>,
}

/// Double the basis margin above `max(n_g, n_e)` until the located shift is
/// stable to `max(1e-4 |dw|, 1e-12 omega_T)`.
pub fn convergence(sideband: SidebandId, params: &TrapParams, n_max_start: usize) -> Result<Convergence> {
    let (conv, _) = converge(sideband, params, n_max_start)?;
    Ok(conv)
}

fn converge(sideband: SidebandId, params: &TrapParams, n_max_start: usize) -> Result<(Convergence, Located)> {
    let base = sideband.max_level();
    let mut margin = n_max_start.saturating_sub(base).max(1);
    let cap = n_max_start.max(base + 1) + CONVERGENCE_CAP;
    let delta0 = crossing_point(sideband, params).detuning;

    let mut current = locate_resonance(sideband, params, base + margin)?;
    let mut history = vec![(base + margin, current.delta_star - delta0)];
    loop {
        let next_n = base + 2 * margin;
        if next_n > cap {
            let (n, dw) = *history.last().unwrap();
            let conv = Convergence {
                n_max_final: n,
                n_max_reference: n,
                delta_omega: dw,
                converged: false,
                history,
            };
            return Ok((conv, current));
        }
        let next = locate_resonance(sideband, params, next_n)?;
        let (a, b) = (current.delta_star - delta0, next.delta_star - delta0);
        history.push((next_n, b));
        if (a - b).abs() <= (CONVERGENCE_RTOL * b.abs()).max(CONVERGENCE_ATOL * params.omega_t) {
            let conv = Convergence {
                n_max_final: base + margin,
                n_max_reference: next_n,
                delta_omega: b,
                converged: true,
                history,
            };
            return Ok((conv, next));
        }
        margin *= 2;
        current = next;
    }
}

/// Numerically exact resonance position with basis-convergence control.
/// `n_max_start` defaults to [`default_n_max`].
pub fn find_resonance(sideband: SidebandId, params: &TrapParams, n_max_start: Option<usize>) -> Result<ShiftReport> {
    if params.rabi <= 0.0 {
        return Err(Error::InvalidArgument("resonance search needs a non-zero Rabi frequency".into()));
    }
    let start = n_max_start.unwrap_or_else(|| default_n_max(sideband, params.eta));
    let (conv, located) = converge(sideband, params, start)?;
    let delta0 = crossing_point(sideband, params).detuning;
    Ok(ShiftReport {
        sideband,
        delta0,
        delta_star: located.delta_star,
        delta_omega_numeric: conv.delta_omega,
        gap: located.gap,
        method: located.method,
        n_max_used: conv.n_max_reference,
        converged: conv.converged,
    })
}

/// Bare-state population helpers for callers holding complex eigenvectors.
pub fn population(levels: &Eigenlevels, level: usize, state: BareState, n_max: usize) -> f64 {
    levels.vectors[(state.index(n_max), level)].norm_sqr()
}

/// Fraction of a level in the ground manifold.
pub fn ground_fraction(levels: &Eigenlevels, level: usize, n_max: usize) -> f64 {
    (0..=n_max)
        .map(|n| population(levels, level, BareState { internal: Internal::Ground, n }, n_max))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::LdParam;
    use crate::hamiltonian::{bare_energy, build_hamiltonian};
    use approx::assert_abs_diff_eq;

    fn params(rabi: f64, eta: f64) -> TrapParams {
        TrapParams::dimensionless(rabi, LdParam::new(eta).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn zero_field_eigenvalues_are_bare() {
        let p = params(0.0, 0.3).with_delta(0.37);
        let h = build_hamiltonian(&p, 6).unwrap();
        let lv = eigenlevels(&h).unwrap();
        let mut bare: Vec<f64> = (0..h.dim()).map(|i| bare_energy(BareState::from_index(i, 6), &p)).collect();
        bare.sort_by(f64::total_cmp);
        for (a, b) in lv.values.iter().zip(&bare) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_level_restriction_splitting() {
        // {|g,0>, |e,1>} at the crossing: E0 +/- |Omega_01| / 2
        let p = params(0.01, 0.1).with_delta(1.0);
        let h = build_hamiltonian(&p, 1).unwrap();
        let (g, e) = (BareState::ground(0).index(1), BareState::excited(1).index(1));
        let sub = DMatrix::from_fn(2, 2, |r, c| {
            let idx = [g, e];
            h.matrix()[(idx[r], idx[c])]
        });
        let eig = SymmetricEigen::new(sub);
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(v[1] - v[0], 9.9501e-4, epsilon = 5e-9);
        assert_abs_diff_eq!(0.5 * (v[0] + v[1]), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let p = params(0.4, 0.7).with_delta(-0.3);
        let h = build_hamiltonian(&p, 4).unwrap();
        let lv = eigenlevels(&h).unwrap();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            lv.values.len(),
            lv.values.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let rebuilt = &lv.vectors * lambda * lv.vectors.adjoint();
        assert!((rebuilt - h.matrix()).norm() <= 1e-10 * h.matrix().norm());
        assert!(lv.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn real_gauge_preserves_eigenvalues() {
        let p = params(0.3, 0.4).with_delta(0.9);
        let fam = HamiltonianFamily::new(&p, 10).unwrap();
        let complex = eigenlevels(&fam.at(0.9)).unwrap();
        let real = RealLevels::solve(&fam, 0.9).unwrap();
        for (a, b) in complex.values.iter().zip(&real.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for level in 0..complex.values.len() {
            for idx in 0..fam.dim() {
                let s = BareState::from_index(idx, 10);
                assert_abs_diff_eq!(population(&complex, level, s, 10), real.population(level, s), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_field_branch_is_bare_line() {
        let p = params(0.0, 0.1);
        let grid = linspace(0.8, 1.2, 21);
        let b = track_branch(&p, &grid, BareState::ground(0), 5).unwrap();
        for (d, e) in grid.iter().zip(&b.energies) {
            assert_abs_diff_eq!(*e, 0.5 * d, epsilon = 1e-15);
        }
        assert!(b.overlaps.iter().all(|&o| o > 0.999_999));
    }

    #[test]
    fn fig2_branch_has_single_extremum() {
        let p = params(0.3, 0.1);
        let grid = linspace(0.8, 1.2, 81);
        let b = track_branch(&p, &grid, BareState::ground(0), 20).unwrap();
        let turns = b
            .energies
            .windows(3)
            .filter(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum())
            .count();
        assert_eq!(turns, 1);
        let (imax, _) = b.energies.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((grid[imax] - 1.0).abs() < 0.1);
    }

    #[test]
    fn zero_eta_branches_cross() {
        let p = params(0.3, 0.0);
        let grid = linspace(0.8, 1.2, 41);
        let g = track_branch(&p, &grid, BareState::ground(0), 5).unwrap();
        let e = track_branch(&p, &grid, BareState::excited(1), 5).unwrap();
        let diffs: Vec<f64> = g.energies.iter().zip(&e.energies).map(|(a, b)| a - b).collect();
        assert!(diffs[0] < 0.0 && *diffs.last().unwrap() > 0.0);
        assert!(g.overlaps.iter().all(|&o| o > 0.9));
        let min_gap = diffs.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        assert!(min_gap < 0.006);
    }

    #[test]
    fn sweep_is_a_permutation_of_the_spectrum() {
        let p = params(0.3, 0.4);
        let grid = linspace(-1.5, 1.5, 61);
        let n_max = 12;
        let dressed = sweep(&p, &grid, n_max, n_max).unwrap();
        assert_eq!(dressed.branches.len(), 2 * (n_max + 1));
        let fam = HamiltonianFamily::new(&p, n_max).unwrap();
        for (i, &d) in grid.iter().enumerate() {
            let mut raw = RealLevels::solve(&fam, d).unwrap().values;
            let mut tracked: Vec<f64> = dressed.branches.iter().map(|b| b.energies[i]).collect();
            raw.sort_by(f64::total_cmp);
            tracked.sort_by(f64::total_cmp);
            assert_eq!(raw, tracked);
        }
    }

    #[test]
    fn grid_validation() {
        let p = params(0.1, 0.1);
        assert!(track_branch(&p, &[], BareState::ground(0), 3).is_err());
        assert!(track_branch(&p, &[1.0, 0.5], BareState::ground(0), 3).is_err());
        assert!(track_branch(&p, &[0.5, 1.0], BareState::ground(7), 3).is_err());
    }

    #[test]
    fn first_blue_resonance() {
        let r = find_resonance(SidebandId::new(0, 1), &params(0.01, 0.1), None).unwrap();
        assert_eq!(r.method, LocatorMethod::Extremum);
        assert!(r.converged);
        assert_abs_diff_eq!(r.delta_omega_numeric, -4.93e-5, epsilon = 5e-8);
        assert_eq!(r.delta_star - r.delta0, r.delta_omega_numeric);
    }

    #[test]
    fn zero_eta_uses_intersection() {
        let r = find_resonance(SidebandId::new(0, 1), &params(0.01, 0.0), None).unwrap();
        assert_eq!(r.method, LocatorMethod::Intersection);
        assert!(r.gap < GAP_FLOOR);
        // exact crossing of n + (1/2)sqrt(Delta^2 + Omega^2) branches
        assert_abs_diff_eq!(r.delta_star, (1.0f64 - 1e-4).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(r.delta_omega_numeric, -5.0e-5, epsilon = 2e-9);
    }

    #[test]
    fn carrier_is_unshifted() {
        for n in 0..3 {
            let r = find_resonance(SidebandId::new(n, n), &params(0.01, 0.3), None).unwrap();
            assert_eq!(r.method, LocatorMethod::Carrier);
            assert!(r.delta_omega_numeric.abs() <= 1e-10, "n = {n}: {}", r.delta_omega_numeric);
        }
    }

    #[test]
    fn extremum_has_vanishing_slope() {
        let p = params(0.01, 0.1);
        let r = find_resonance(SidebandId::new(0, 1), &p, None).unwrap();
        let search = PairSearch::new(SidebandId::new(0, 1), &p, r.n_max_used).unwrap();
        let h = 1e-5;
        let e = |d: f64| search.levels(d).unwrap().values[search.lower];
        let fd = (e(r.delta_star + h) - e(r.delta_star - h)) / (2.0 * h);
        assert!(fd.abs() <= 1e-7, "dE/dDelta = {fd}");
    }

    #[test]
    fn splitting_matches_two_level_gap() {
        let s = measure_splitting(SidebandId::new(0, 1), &params(0.01, 0.1), 20).unwrap();
        assert_abs_diff_eq!(s.gap, 9.95e-4, epsilon = 1e-5);
        assert!((s.gap / s.coupling_abs - 1.0).abs() < 0.01);
        assert_eq!(s.delta_epsilon, 0.5 * s.coupling_abs);

        let s = measure_splitting(SidebandId::new(0, 2), &params(0.01, 0.0), 10).unwrap();
        assert!(s.gap < GAP_FLOOR);
        let s = measure_splitting(SidebandId::new(0, 1), &params(0.0, 0.1), 10).unwrap();
        assert!(s.gap < 1e-14);
        assert_abs_diff_eq!(s.at_delta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn convergence_behaviour() {
        let c = convergence(SidebandId::new(0, 1), &params(0.01, 0.1), 17).unwrap();
        assert!(c.converged);
        assert!(c.n_max_final <= 20, "{c:?}");

        let c = convergence(SidebandId::new(0, 2), &params(0.01, 0.0), 3).unwrap();
        assert!(c.converged);
        assert_eq!(c.n_max_final, 3);
        assert_eq!(c.history.len(), 2);
    }

    #[test]
    fn rejects_zero_field_search() {
        assert!(find_resonance(SidebandId::new(0, 1), &params(0.0, 0.1), None).is_err());
    }
}
