//! Fock-space algebra for the trap mode.
//!
//! Everything the laser coupling needs from the harmonic oscillator enters
//! through the displacement-operator matrix elements
//! `chi(n, n') = <n| exp(i eta (a + a^dag)) |n'>`, evaluated in closed form
//! with generalized Laguerre polynomials. [`displacement_oracle`] computes
//! the same matrix by brute-force exponentiation and exists to check the
//! closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::TrapParams;

/// Lamb-Dicke parameter `eta = k_L x_0`. Always finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LdParam(f64);

impl LdParam {
    pub const ZERO: LdParam = LdParam(0.0);

    pub fn new(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Lamb-Dicke parameter must be finite and >= 0, got {eta}"
            )));
        }
        Ok(LdParam(eta))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for LdParam {
    type Error = Error;

    fn try_from(eta: f64) -> Result<Self> {
        LdParam::new(eta)
    }
}

impl From<LdParam> for f64 {
    fn from(eta: LdParam) -> f64 {
        eta.0
    }
}

/// Generalized Laguerre polynomial `L_n^alpha(x)`.
///
/// Evaluated with the three-term recurrence in `n`, which stays accurate for
/// the degrees (~10^2) reached by the level-shift sums; the alternating
/// binomial sum does not.
pub fn laguerre(n: usize, alpha: usize, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Laguerre argument must be finite, got {x}"
        )));
    }
    Ok(laguerre_unchecked(n, alpha, x))
}

pub(crate) fn laguerre_unchecked(n: usize, alpha: usize, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `i^k` scaled by a real magnitude.
#[inline]
fn times_i_pow(mag: f64, k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Displacement-operator matrix element
/// `e^{-eta^2/2} (i eta)^{|n-n'|} sqrt(n_<! / n_>!) L_{n_<}^{|n-n'|}(eta^2)`.
///
/// The magnitude is assembled in log space so the factorial ratio and the
/// power of `eta` never overflow or underflow prematurely.
pub fn chi(n: usize, nprime: usize, eta: LdParam) -> Complex64 {
    let (lo, hi) = (n.min(nprime), n.max(nprime));
    let d = hi - lo;
    let e = eta.value();
    if e == 0.0 {
        return if d == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let x = e * e;
    let lag = laguerre_unchecked(lo, d, x);
    if lag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let log_factorial_ratio: f64 = ((lo + 1)..=hi).map(|k| (k as f64).ln()).sum::<f64>();
    let log_mag = -0.5 * x + d as f64 * e.ln() - 0.5 * log_factorial_ratio + lag.abs().ln();
    times_i_pow(lag.signum() * log_mag.exp(), d)
}

/// Sideband coupling strength `Omega_{n n'} = Omega_R chi(n, n')`.
pub fn rabi_coupling(n: usize, nprime: usize, params: &TrapParams) -> Complex64 {
    chi(n, nprime, params.eta) * params.rabi
}

/// Dense table of [`chi`] values over the truncated basis `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    eta: LdParam,
    entries: DMatrix<Complex64>,
}

impl CouplingTable {
    pub fn eta(&self) -> LdParam {
        self.eta
    }

    /// Basis size `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    #[inline]
    pub fn get(&self, n: usize, nprime: usize) -> Complex64 {
        self.entries[(n, nprime)]
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `sum_k |chi(n, k)|^2` over the stored columns.
    pub fn row_norm_sq(&self, n: usize) -> f64 {
        self.entries.row(n).iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest entrywise modulus of the difference with `other`, over the
    /// common leading block.
    pub fn max_abs_diff(&self, other: &CouplingTable) -> f64 {
        let dim = self.dim().min(other.dim());
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        worst
    }
}

fn checked_square_dim(n_max: usize) -> Result<usize> {
    let dim = n_max
        .checked_add(1)
        .ok_or_else(|| Error::Resource(format!("basis size n_max = {n_max} overflows")))?;
    dim.checked_mul(dim)
        .filter(|cells| cells.checked_mul(std::mem::size_of::<Complex64>()).is_some())
        .ok_or_else(|| Error::Resource(format!("coupling table of dimension {dim} is too large")))?;
    Ok(dim)
}

/// Batch evaluation of [`chi`] for `0 <= n, n' <= n_max`.
pub fn coupling_table(eta: LdParam, n_max: usize) -> Result<CouplingTable> {
    let dim = checked_square_dim(n_max)?;
    let mut entries = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 0..dim {
        for np in n..dim {
            let c = chi(n, np, eta);
            entries[(n, np)] = c;
            entries[(np, n)] = c;
        }
    }
    Ok(CouplingTable { eta, entries })
}

/// Extra basis states used by [`displacement_oracle`] so that truncation
/// artefacts of the exponentiated operator stay out of the cropped block.
pub fn oracle_pad(eta: LdParam, n_max: usize) -> usize {
    let reach = (eta.value() * (n_max as f64).sqrt()).ceil() as usize;
    20.max(4 * reach)
}

const ORACLE_TAYLOR_BUDGET: usize = 80;

/// `exp(i eta (a + a^dag))` by scaling-and-squaring of a Taylor series on the
/// padded truncated basis, cropped back to `(n_max + 1)^2`.
pub fn displacement_oracle(eta: LdParam, n_max: usize) -> Result<CouplingTable> {
    let keep = checked_square_dim(n_max)?;
    let pad = oracle_pad(eta, n_max);
    let dim = checked_square_dim(n_max + pad)?;

    // generator i eta (a + a^dag), tridiagonal with <k|a|k+1> = sqrt(k+1)
    let mut gen = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim - 1 {
        let v = Complex64::new(0.0, eta.value() * ((k + 1) as f64).sqrt());
        gen[(k, k + 1)] = v;
        gen[(k + 1, k)] = v;
    }

    let norm1 = (0..dim)
        .map(|j| gen.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = gen.unscale(2f64.powi(squarings as i32));

    let mut sum = DMatrix::<Complex64>::identity(dim, dim);
    let mut term = sum.clone();
    let mut converged = false;
    for j in 1..=ORACLE_TAYLOR_BUDGET {
        term = (&term * &scaled).unscale(j as f64);
        sum += &term;
        if term.norm() <= 1e-18 * sum.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Taylor series for the displacement operator did not converge in {ORACLE_TAYLOR_BUDGET} terms"
        )));
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }

    let entries = sum.view((0, 0), (keep, keep)).into_owned();
    Ok(CouplingTable { eta, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Explicit finite sum, used only as a reference.
    fn laguerre_binomial(n: usize, alpha: usize, x: f64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut scale = 0.0;
        let mut fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
            }
            let t = binom(n + alpha, n - k) * x.powi(k as i32) / fact;
            sum += if k % 2 == 0 { t } else { -t };
            scale += t;
        }
        (sum, scale)
    }

    fn eta(v: f64) -> LdParam {
        LdParam::new(v).unwrap()
    }

    #[test]
    fn ld_param_rejects_negative_and_nan() {
        assert!(LdParam::new(-0.1).is_err());
        assert!(LdParam::new(f64::NAN).is_err());
        assert!(LdParam::new(0.0).is_ok());
    }

    #[test]
    fn laguerre_low_orders() {
        for &x in &[0.0, 0.3, 2.5] {
            for alpha in 0..4 {
                assert_eq!(laguerre(0, alpha, x).unwrap(), 1.0);
            }
            assert_abs_diff_eq!(laguerre(1, 0, x).unwrap(), 1.0 - x, epsilon = 1e-15);
        }
        // 3 - 3x + x^2/2 at x = 0.04
        assert_abs_diff_eq!(laguerre(2, 1, 0.04).unwrap(), 2.8808, epsilon = 1e-14);
    }

    #[test]
    fn laguerre_rejects_non_finite() {
        assert!(matches!(laguerre(3, 1, f64::INFINITY), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn laguerre_matches_binomial_sum() {
        for n in 0..=10 {
            for alpha in 0..=10 {
                for i in 0..=20 {
                    let x = i as f64 / 20.0;
                    let (oracle, scale) = laguerre_binomial(n, alpha, x);
                    let got = laguerre(n, alpha, x).unwrap();
                    assert!(
                        (got - oracle).abs() <= 1e-12 * scale.max(oracle.abs()),
                        "n={n} alpha={alpha} x={x}: {got} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn chi_closed_form_values() {
        assert_abs_diff_eq!(chi(0, 0, eta(0.4)).re, (-0.08f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(chi(0, 0, eta(0.4)).re, 0.92312, epsilon = 5e-6);
        let c01 = chi(0, 1, eta(0.1));
        assert_eq!(c01.re, 0.0);
        assert_abs_diff_eq!(c01.im, 0.1 * (-0.005f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(c01.im, 0.099501, epsilon = 1e-6);
        for n in 0..6 {
            for m in 0..6 {
                let c = chi(n, m, LdParam::ZERO);
                assert_eq!(c, Complex64::new(if n == m { 1.0 } else { 0.0 }, 0.0));
            }
        }
    }

    #[test]
    fn chi_large_indices_stay_finite() {
        let c = chi(150, 230, eta(0.3));
        assert!(c.norm().is_finite());
        assert!(c.norm() < 1e-20);
        let d = chi(200, 200, eta(0.1));
        assert!(d.re.abs() <= 1.0 && d.re.is_finite());
    }

    #[test]
    fn rabi_coupling_scales_chi() {
        let p = TrapParams::dimensionless(0.01, eta(0.1), 0.0).unwrap();
        let c = rabi_coupling(0, 1, &p);
        assert_abs_diff_eq!(c.im, 9.9501e-4, epsilon = 5e-9);
        let p0 = TrapParams::dimensionless(0.01, LdParam::ZERO, 0.0).unwrap();
        assert_eq!(rabi_coupling(0, 0, &p0), Complex64::new(0.01, 0.0));
        let off = TrapParams::dimensionless(0.0, eta(0.3), 0.0).unwrap();
        assert_eq!(rabi_coupling(2, 5, &off).norm(), 0.0);
    }

    #[test]
    fn coupling_table_small_entries() {
        let t = coupling_table(LdParam::ZERO, 5).unwrap();
        assert_eq!(t.entries(), &DMatrix::<Complex64>::identity(6, 6));

        let t = coupling_table(eta(0.1), 1).unwrap();
        assert_abs_diff_eq!(t.get(0, 0).re, 0.99501, epsilon = 5e-6);
        assert_abs_diff_eq!(t.get(0, 1).im, 0.099501, epsilon = 5e-7);
        assert_abs_diff_eq!(t.get(1, 0).im, 0.099501, epsilon = 5e-7);
        assert_abs_diff_eq!(t.get(1, 1).re, (-0.005f64).exp() * 0.99, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(1, 1).re, 0.98506, epsilon = 5e-6);
    }

    #[test]
    fn coupling_table_row_norm_unitarity() {
        let t = coupling_table(eta(0.3), 40).unwrap();
        assert_abs_diff_eq!(t.row_norm_sq(0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn row_norms_converge_monotonically() {
        for &e in &[0.1, 0.5, 1.0] {
            for n in [0usize, 3, 10] {
                let mut prev = 0.0;
                for k in 0..=(n + 50) {
                    let next = prev + chi(n, k, eta(e)).norm_sqr();
                    assert!(next >= prev);
                    prev = next;
                }
                assert_abs_diff_eq!(prev, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn oracle_identity_at_zero_eta() {
        let t = displacement_oracle(LdParam::ZERO, 5).unwrap();
        assert_eq!(t.dim(), 6);
        assert!(t.max_abs_diff(&coupling_table(LdParam::ZERO, 5).unwrap()) < 1e-15);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let o = displacement_oracle(eta(0.1), 5).unwrap();
        assert!((o.get(0, 1) - chi(0, 1, eta(0.1))).norm() < 1e-10);
        let o = displacement_oracle(eta(0.4), 10).unwrap();
        assert!(o.max_abs_diff(&coupling_table(eta(0.4), 10).unwrap()) < 1e-8);
        for &e in &[0.05, 0.1, 0.3, 0.8] {
            let o = displacement_oracle(eta(e), 20).unwrap();
            let t = coupling_table(eta(e), 20).unwrap();
            assert!(o.max_abs_diff(&t) < 1e-8, "eta = {e}");
        }
    }

    #[test]
    fn pad_rule() {
        assert_eq!(oracle_pad(eta(0.1), 20), 20);
        assert_eq!(oracle_pad(eta(2.0), 100), 80);
    }

    proptest! {
        #[test]
        fn chi_symmetric_magnitude_and_phase(n in 0usize..60, m in 0usize..60, e in 0.0f64..1.5) {
            let a = chi(n, m, eta(e));
            let b = chi(m, n, eta(e));
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-15);
            let d = n.abs_diff(m);
            // chi / i^d is real
            let unphased = a * times_i_pow(1.0, (4 - d % 4) % 4);
            prop_assert_eq!(unphased.im, 0.0);
            if n == m {
                prop_assert_eq!(a.im, 0.0);
            }
        }
    }
}
