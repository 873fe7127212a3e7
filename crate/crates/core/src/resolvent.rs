//! Closed-form leading-order resolvent theory of the sideband shift.
//!
//! The two diagonal level-shift elements of the resonant pair are sums over
//! all off-resonant couplings of each bare state; their difference is the
//! displacement `dw` of the resonance, `Delta* = Delta0 + dw`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{chi, rabi_coupling, LdParam};
use crate::hamiltonian::{bare_energy, crossing_point, BareState, SidebandId, TrapParams};
use crate::numerics::KahanSum;

/// Series terms are dropped once the majorant of everything left is below
/// this fraction of the running sum.
pub const SERIES_RTOL: f64 = 1e-16;
/// Extra vibrational levels above `max(n_g, n_e)` summed by default.
pub const DEFAULT_K_MARGIN: usize = 60;
/// `delta_epsilon / omega_T` above which the resonance is not isolated.
pub const ISOLATION_LIMIT: f64 = 0.1;

pub fn default_k_max(sideband: SidebandId) -> usize {
    sideband.max_level() + DEFAULT_K_MARGIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelShiftElements {
    pub r_gg: f64,
    pub r_ee: f64,
    pub r_ge_abs: f64,
    pub e0: f64,
    pub k_max_used: usize,
    pub tail_bound: f64,
}

impl LevelShiftElements {
    /// Truncated tail is negligible against the elements themselves.
    pub fn converged(&self) -> bool {
        self.tail_bound <= 1e-3 * self.r_gg.abs().max(self.r_ee.abs())
    }
}

/// Full-series shift with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesShift {
    pub value: f64,
    pub k_max_used: usize,
    pub tail_bound: f64,
}

/// Lamb-Dicke expansion of the shift, split into its off-resonant carrier
/// part and the adjacent-sideband part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdShift {
    pub carrier_term: f64,
    pub sideband_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeShift {
    pub delta_omega_full: f64,
    pub delta_omega_ld: Option<f64>,
    pub delta_omega_lit: Option<f64>,
    pub carrier_term: Option<f64>,
    pub sideband_term: Option<f64>,
    pub k_max_used: usize,
    pub tail_bound: f64,
    /// The splitting is not small against the trap frequency.
    pub isolation_warning: bool,
}

struct RowSum {
    value: f64,
    k_max_used: usize,
    /// Bound on `sum |chi(row, k)|^2 / min_denominator` over omitted k.
    tail: f64,
}

/// `sum_{k != excl, k <= k_max} |chi(row, k)|^2 / denom(k)`, accumulated in
/// ascending `|row - k|` with compensated summation.
///
/// Uses `|L_n^a(x)| <= C(n+a, n) e^{x/2}`, which gives
/// `|chi(row, row+d)|^2 <= eta^{2d} C(row+d, row) / d!`; that majorant
/// decreases geometrically once `d >= row` and bounds the omitted tail.
fn coupling_series(
    row: usize,
    excl: usize,
    eta: LdParam,
    k_max: usize,
    min_denominator: f64,
    denom: impl Fn(usize) -> f64,
) -> RowSum {
    let eta2 = eta.value() * eta.value();
    let ln_eta2 = eta2.ln();
    let term = |k: usize| chi(row, k, eta).norm_sqr() / denom(k);

    let mut acc = KahanSum::new();
    let mut k_max_used = row.min(k_max);
    if row != excl && row <= k_max {
        acc.add(term(row));
    }
    // ln of the majorant at distance d on the upper side
    let mut ln_major = 0.0;
    let mut d = 0usize;
    let tail = loop {
        let next = d + 1;
        let r = eta2 * (row + next + 1) as f64 / ((next + 1) as f64).powi(2);
        let ln_next = ln_major + ln_eta2 + ((row + next) as f64 / next as f64).ln() - (next as f64).ln();
        let tail_from_next = if r < 1.0 { ln_next.exp() / (1.0 - r) / min_denominator } else { f64::INFINITY };

        let lower_done = d >= row;
        let upper_done = row + d >= k_max;
        if lower_done && upper_done {
            break tail_from_next;
        }
        if lower_done && row + d >= excl && tail_from_next <= SERIES_RTOL * acc.value().abs() {
            break tail_from_next;
        }

        d = next;
        ln_major = ln_next;
        if let Some(k) = row.checked_sub(d) {
            if k != excl {
                acc.add(term(k));
            }
        }
        let k = row + d;
        if k <= k_max {
            if k != excl {
                acc.add(term(k));
            }
            k_max_used = k;
        }
    };
    RowSum { value: acc.value(), k_max_used, tail }
}

fn check_k_max(sideband: SidebandId, k_max: usize) -> Result<()> {
    if k_max < sideband.max_level() + 1 {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} must be at least max(n_g, n_e) + 1 = {}",
            sideband.max_level() + 1
        )));
    }
    Ok(())
}

/// Diagonal level-shift elements `R_gg`, `R_ee` and the coupling `|R_ge|`,
/// evaluated at the bare crossing point with denominators taken from the
/// bare energies.
pub fn level_shift_diag(sideband: SidebandId, params: &TrapParams, k_max: usize) -> Result<LevelShiftElements> {
    check_k_max(sideband, k_max)?;
    let cross = crossing_point(sideband, params);
    let at = params.with_delta(cross.detuning);
    let e0 = cross.energy;
    let quarter_rabi2 = 0.25 * params.rabi * params.rabi;
    let (ng, ne) = (sideband.n_g, sideband.n_e);

    let gg = coupling_series(ng, ne, params.eta, k_max, params.omega_t, |k| {
        e0 - bare_energy(BareState::excited(k), &at)
    });
    let ee = coupling_series(ne, ng, params.eta, k_max, params.omega_t, |k| {
        e0 - bare_energy(BareState::ground(k), &at)
    });
    Ok(LevelShiftElements {
        r_gg: quarter_rabi2 * gg.value,
        r_ee: quarter_rabi2 * ee.value,
        r_ge_abs: 0.5 * rabi_coupling(ng, ne, params).norm(),
        e0,
        k_max_used: gg.k_max_used.max(ee.k_max_used),
        tail_bound: quarter_rabi2 * (gg.tail + ee.tail),
    })
}

/// Shift to all orders in `eta`:
/// `dw = (1/4 omega_T) [ sum_{k != n_g} |Omega_{n_e k}|^2 / (n_g - k)
///                      - sum_{k != n_e} |Omega_{n_g k}|^2 / (n_e - k) ]`.
pub fn bs_shift(sideband: SidebandId, params: &TrapParams, k_max: usize) -> Result<SeriesShift> {
    check_k_max(sideband, k_max)?;
    let (ng, ne) = (sideband.n_g, sideband.n_e);
    let excited_row = coupling_series(ne, ng, params.eta, k_max, 1.0, |k| ng as f64 - k as f64);
    let ground_row = coupling_series(ng, ne, params.eta, k_max, 1.0, |k| ne as f64 - k as f64);
    let prefactor = params.rabi * params.rabi / (4.0 * params.omega_t);
    Ok(SeriesShift {
        value: prefactor * (excited_row.value - ground_row.value),
        k_max_used: excited_row.k_max_used.max(ground_row.k_max_used),
        tail_bound: prefactor * (excited_row.tail + ground_row.tail),
    })
}

/// Lamb-Dicke expansion through `eta^2`; undefined for the carrier.
pub fn bs_shift_ld(sideband: SidebandId, params: &TrapParams) -> Result<LdShift> {
    if sideband.is_carrier() {
        return Err(Error::Domain(format!(
            "the Lamb-Dicke expansion holds only for n_g != n_e; {sideband} is a carrier"
        )));
    }
    let (ng, ne) = (sideband.n_g as f64, sideband.n_e as f64);
    let rabi2 = params.rabi * params.rabi;
    let eta2 = params.eta.value() * params.eta.value();
    let diff = ng - ne;
    let carrier_term = rabi2 * (1.0 - eta2 * (ng + ne + 1.0)) / (2.0 * diff * params.omega_t);
    let neighbours: f64 = [-1.0, 1.0]
        .iter()
        .map(|k| diff + k)
        .filter(|&den| den != 0.0)
        .map(|den| (ng + ne + 1.0) / den)
        .sum();
    let sideband_term = eta2 * rabi2 / (4.0 * params.omega_t) * neighbours;
    Ok(LdShift { carrier_term, sideband_term, total: carrier_term + sideband_term })
}

/// Earlier first-red-sideband result `Omega_R^2 / 2 omega_T + eta^2 Omega_R^2 / 4 omega_T`,
/// which misses the `eta^2` correction of the off-resonant carrier coupling.
pub fn bs_shift_literature(sideband: SidebandId, params: &TrapParams) -> Result<f64> {
    if sideband != SidebandId::new(1, 0) {
        return Err(Error::Domain(format!(
            "the literature formula applies to the first red sideband (g,1)<->(e,0) only, not {sideband}"
        )));
    }
    let rabi2 = params.rabi * params.rabi;
    let eta2 = params.eta.value() * params.eta.value();
    Ok(rabi2 / (2.0 * params.omega_t) + eta2 * rabi2 / (4.0 * params.omega_t))
}

/// `eta = 0` limit `-Omega_R^2 / (2 Delta0)`: only the carrier couplings survive.
pub fn eta_zero_shift(sideband: SidebandId, params: &TrapParams) -> Result<f64> {
    if sideband.is_carrier() {
        return Err(Error::Domain(format!("{sideband} sits at Delta0 = 0; the eta = 0 formula is singular")));
    }
    let delta0 = crossing_point(sideband, params).detuning;
    Ok(-params.rabi * params.rabi / (2.0 * delta0))
}

/// True when `delta_epsilon = |Omega_{n_g n_e}| / 2` exceeds
/// [`ISOLATION_LIMIT`] trap quanta.
pub fn isolation_warning(sideband: SidebandId, params: &TrapParams) -> bool {
    0.5 * rabi_coupling(sideband.n_g, sideband.n_e, params).norm() > ISOLATION_LIMIT * params.omega_t
}

/// All perturbative estimates that apply to `sideband`.
pub fn perturbative_shift(sideband: SidebandId, params: &TrapParams, k_max: usize) -> Result<PerturbativeShift> {
    let full = bs_shift(sideband, params, k_max)?;
    let ld = bs_shift_ld(sideband, params).ok();
    Ok(PerturbativeShift {
        delta_omega_full: full.value,
        delta_omega_ld: ld.map(|l| l.total),
        delta_omega_lit: bs_shift_literature(sideband, params).ok(),
        carrier_term: ld.map(|l| l.carrier_term),
        sideband_term: ld.map(|l| l.sideband_term),
        k_max_used: full.k_max_used,
        tail_bound: full.tail_bound,
        isolation_warning: isolation_warning(sideband, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(rabi: f64, eta: f64) -> TrapParams {
        TrapParams::dimensionless(rabi, LdParam::new(eta).unwrap(), 0.0).unwrap()
    }

    /// Plain double loop over k, no early stop, no compensation.
    fn brute_shift(sb: SidebandId, p: &TrapParams, k_max: usize) -> f64 {
        let (ng, ne) = (sb.n_g as f64, sb.n_e as f64);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for k in 0..=k_max {
            if k != sb.n_g {
                s1 += rabi_coupling(sb.n_e, k, p).norm_sqr() / (ng - k as f64);
            }
            if k != sb.n_e {
                s2 += rabi_coupling(sb.n_g, k, p).norm_sqr() / (ne - k as f64);
            }
        }
        (s1 - s2) / (4.0 * p.omega_t)
    }

    #[test]
    fn zero_eta_level_shifts() {
        let p = params(0.01, 0.0);
        let r = level_shift_diag(SidebandId::new(0, 1), &p, 10).unwrap();
        assert_abs_diff_eq!(r.r_gg, 1e-4 / 4.0, epsilon = 1e-20);
        assert_abs_diff_eq!(r.r_ee, -1e-4 / 4.0, epsilon = 1e-20);
        assert_eq!(r.r_ge_abs, 0.0);
        assert_eq!(r.tail_bound, 0.0);
        assert!(r.converged());
    }

    #[test]
    fn zero_field_elements_vanish() {
        let r = level_shift_diag(SidebandId::new(1, 3), &params(0.0, 0.3), 20).unwrap();
        assert_eq!((r.r_gg, r.r_ee, r.r_ge_abs), (0.0, 0.0, 0.0));
    }

    #[test]
    fn first_blue_shift_value() {
        let p = params(0.01, 0.1);
        let r = level_shift_diag(SidebandId::new(0, 1), &p, 30).unwrap();
        let dw = r.r_ee - r.r_gg;
        assert_abs_diff_eq!(dw, -4.93e-5, epsilon = 1e-7);
        assert_abs_diff_eq!(dw, brute_shift(SidebandId::new(0, 1), &p, 30), epsilon = 1e-19);
        assert!(r.converged());
        assert_abs_diff_eq!(r.r_ge_abs, 0.5 * 9.9501e-4, epsilon = 5e-9);
    }

    #[test]
    fn full_shift_matches_brute_force() {
        for &(ng, ne) in &[(0, 1), (1, 0), (0, 2), (1, 2), (3, 1), (2, 5)] {
            for &e in &[0.05, 0.3, 0.8] {
                let sb = SidebandId::new(ng, ne);
                let p = params(0.01, e);
                let got = bs_shift(sb, &p, default_k_max(sb)).unwrap();
                let want = brute_shift(sb, &p, 120);
                assert!((got.value - want).abs() <= 1e-13 * want.abs(), "{sb} eta={e}: {} vs {want}", got.value);
                assert!(got.tail_bound <= 1e-12 * want.abs());
            }
        }
    }

    #[test]
    fn equals_level_shift_difference() {
        for &(ng, ne) in &[(0, 1), (1, 0), (0, 2), (4, 1)] {
            let sb = SidebandId::new(ng, ne);
            let p = params(0.02, 0.4);
            let r = level_shift_diag(sb, &p, default_k_max(sb)).unwrap();
            let s = bs_shift(sb, &p, default_k_max(sb)).unwrap().value;
            assert!(((r.r_ee - r.r_gg) - s).abs() <= 1e-14 * s.abs());
        }
    }

    #[test]
    fn carrier_has_no_shift() {
        for n in 0..4 {
            for &e in &[0.0, 0.1, 0.3, 0.5] {
                let sb = SidebandId::new(n, n);
                assert_eq!(bs_shift(sb, &params(0.01, e), default_k_max(sb)).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn riebe_first_blue_is_about_one_khz() {
        let omega_t = 2.0 * std::f64::consts::PI * 1.36e6;
        let p = TrapParams::new(omega_t, 2.0 * std::f64::consts::PI * 53e3, LdParam::new(0.083).unwrap(), 0.0).unwrap();
        let sb = SidebandId::new(0, 1);
        let dw = bs_shift(sb, &p, default_k_max(sb)).unwrap().value;
        let hz = dw.abs() / (2.0 * std::f64::consts::PI);
        assert!((900.0..=1100.0).contains(&hz), "{hz} Hz");
        assert!(dw < 0.0);
    }

    #[test]
    fn ld_expansion_values() {
        let p = params(0.01, 0.1);
        let l = bs_shift_ld(SidebandId::new(0, 1), &p).unwrap();
        assert_abs_diff_eq!(l.total, -4.925e-5, epsilon = 1e-17);
        assert_eq!(l.total, l.carrier_term + l.sideband_term);

        let l = bs_shift_ld(SidebandId::new(1, 0), &p).unwrap();
        let (r2, e2) = (1e-4, 0.01);
        assert_abs_diff_eq!(l.total, r2 / 2.0 * (1.0 - 2.0 * e2) + e2 * r2 / 4.0, epsilon = 1e-19);

        let p0 = params(0.01, 0.0);
        for &(ng, ne) in &[(0, 1), (3, 1), (0, 3)] {
            let l = bs_shift_ld(SidebandId::new(ng, ne), &p0).unwrap();
            assert_abs_diff_eq!(l.total, 1e-4 / (2.0 * (ng as f64 - ne as f64)), epsilon = 1e-19);
        }
        assert!(matches!(bs_shift_ld(SidebandId::new(2, 2), &p), Err(Error::Domain(_))));
    }

    #[test]
    fn literature_formula() {
        let p = params(0.01, 0.1);
        let sb = SidebandId::new(1, 0);
        assert_abs_diff_eq!(bs_shift_literature(sb, &p).unwrap(), 5.025e-5, epsilon = 1e-18);
        let p0 = params(0.01, 0.0);
        assert_eq!(bs_shift_literature(sb, &p0).unwrap(), bs_shift_ld(sb, &p0).unwrap().total);
        let gap = bs_shift_ld(sb, &p).unwrap().total - bs_shift_literature(sb, &p).unwrap();
        assert_abs_diff_eq!(gap, -0.01 * 1e-4, epsilon = 1e-18);
        assert!(bs_shift_literature(SidebandId::new(0, 1), &p).is_err());
    }

    #[test]
    fn eta_zero_limit() {
        let p = params(0.01, 0.0);
        assert_abs_diff_eq!(eta_zero_shift(SidebandId::new(0, 1), &p).unwrap(), -5e-5, epsilon = 1e-20);
        assert_abs_diff_eq!(eta_zero_shift(SidebandId::new(1, 0), &p).unwrap(), 5e-5, epsilon = 1e-20);
        for &(ng, ne) in &[(0, 1), (1, 0), (2, 5)] {
            let sb = SidebandId::new(ng, ne);
            let full = bs_shift(sb, &p, default_k_max(sb)).unwrap().value;
            assert!((full - eta_zero_shift(sb, &p).unwrap()).abs() <= 1e-15);
        }
        assert!(eta_zero_shift(SidebandId::new(1, 1), &p).is_err());
    }

    #[test]
    fn k_max_precondition() {
        assert!(bs_shift(SidebandId::new(0, 3), &params(0.01, 0.1), 3).is_err());
        assert!(bs_shift(SidebandId::new(0, 3), &params(0.01, 0.1), 4).is_ok());
    }

    #[test]
    fn isolation_flag() {
        assert!(!isolation_warning(SidebandId::new(0, 1), &params(0.01, 0.1)));
        assert!(isolation_warning(SidebandId::new(0, 0), &params(0.3, 0.1)));
    }

    #[test]
    fn perturbative_bundle() {
        let p = params(0.01, 0.1);
        let s = perturbative_shift(SidebandId::new(1, 0), &p, 61).unwrap();
        assert!(s.delta_omega_ld.is_some() && s.delta_omega_lit.is_some());
        let s = perturbative_shift(SidebandId::new(0, 0), &p, 61).unwrap();
        assert_eq!(s.delta_omega_full, 0.0);
        assert!(s.delta_omega_ld.is_none() && s.carrier_term.is_none());
    }

    proptest! {
        #[test]
        fn swap_antisymmetry(a in 0usize..5, b in 0usize..5, e in 0.0f64..0.5) {
            let p = params(0.01, e);
            let k = 70;
            let x = bs_shift(SidebandId::new(a, b), &p, k).unwrap().value;
            let y = bs_shift(SidebandId::new(b, a), &p, k).unwrap().value;
            prop_assert_eq!(x + y, 0.0);
        }

        #[test]
        fn quadratic_in_field(ng in 0usize..4, ne in 0usize..4, e in 0.0f64..0.5) {
            let sb = SidebandId::new(ng, ne);
            let k = default_k_max(sb);
            let a = bs_shift(sb, &params(1e-3, e), k).unwrap().value;
            let b = bs_shift(sb, &params(2e-3, e), k).unwrap().value;
            if a != 0.0 {
                prop_assert!((b / a - 4.0).abs() <= 4e-12);
            }
        }
    }
}
