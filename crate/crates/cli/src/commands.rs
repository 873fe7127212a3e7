//! The subcommands. Each returns a table and, separately, any failure that
//! should only be raised after the table has been written.

use std::collections::HashMap;

use rayon::prelude::*;
use vbshift::numerics::linspace;
use vbshift::resolvent::default_k_max;
use vbshift::{
    bare_energy, bs_shift, bs_shift_ld, bs_shift_literature, coupling_table, displacement_oracle, eta_zero_shift,
    find_resonance, measure_splitting, perturbative_shift, rabi_coupling, sweep, BareState, LdParam, ShiftReport,
    SidebandId, SidebandKind, TrapParams,
};

use crate::config::{Command, Resolved};
use crate::error::CliError;
use crate::output::{Cell, Table};

pub struct Report {
    pub table: Table,
    /// Raised after output has been written.
    pub deferred: Option<CliError>,
}

impl Report {
    fn ok(table: Table) -> Self {
        Report { table, deferred: None }
    }
}

pub fn run(cfg: &Resolved) -> Result<Report, CliError> {
    match cfg.command {
        Command::Shift => cmd_shift(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::ScanEta => cmd_scan_eta(cfg),
        Command::Sidebands => cmd_sidebands(cfg),
        Command::Check => cmd_check(cfg),
    }
}

fn params(cfg: &Resolved, eta: LdParam) -> Result<TrapParams, CliError> {
    Ok(TrapParams::dimensionless(cfg.rabi_ratio, eta, 0.0)?)
}

fn kind_label(kind: SidebandKind) -> &'static str {
    match kind {
        SidebandKind::Carrier => "carrier",
        SidebandKind::Blue => "blue",
        SidebandKind::Red => "red",
    }
}

fn k_max(cfg: &Resolved, sb: SidebandId) -> usize {
    cfg.kmax.unwrap_or_else(|| default_k_max(sb))
}

fn not_converged(what: impl std::fmt::Display) -> CliError {
    CliError::Numeric(format!("basis truncation did not converge for {what}"))
}

pub fn cmd_shift(cfg: &Resolved) -> Result<Report, CliError> {
    let sb = cfg.sideband();
    if cfg.require_ld && sb.is_carrier() {
        return Err(CliError::Config(format!("--ld requested for the carrier {sb}; the expansion needs n_g != n_e")));
    }
    let p = params(cfg, cfg.ld)?;
    let pert = perturbative_shift(sb, &p, k_max(cfg, sb))?;
    let eta0 = eta_zero_shift(sb, &p).ok();
    let numeric = find_resonance(sb, &p, cfg.nmax)?;
    let split = measure_splitting(sb, &p, numeric.n_max_used)?;

    let mut columns: Vec<&str> = vec![
        "n_g", "n_e", "kind", "delta0", "shift_full", "shift_ld", "shift_lit", "shift_eta0", "shift_exact",
        "delta_star", "gap", "coupling_abs", "delta_epsilon", "method", "n_max_used", "converged", "k_max_used",
        "tail_bound", "isolation_warning", "strong_field_warning",
    ];
    let mut row: Vec<Cell> = vec![
        sb.n_g.into(),
        sb.n_e.into(),
        kind_label(sb.kind()).into(),
        numeric.delta0.into(),
        pert.delta_omega_full.into(),
        Cell::num(pert.delta_omega_ld),
        Cell::num(pert.delta_omega_lit),
        Cell::num(eta0),
        numeric.delta_omega_numeric.into(),
        numeric.delta_star.into(),
        split.gap.into(),
        split.coupling_abs.into(),
        split.delta_epsilon.into(),
        method_label(&numeric).into(),
        numeric.n_max_used.into(),
        numeric.converged.into(),
        pert.k_max_used.into(),
        pert.tail_bound.into(),
        pert.isolation_warning.into(),
        p.strong_field_warning().into(),
    ];
    if cfg.physical() {
        let hz = |x: Option<f64>| Cell::num(x.and_then(|v| cfg.to_hz(v)));
        columns.extend([
            "shift_full_hz", "shift_ld_hz", "shift_lit_hz", "shift_eta0_hz", "shift_exact_hz", "gap_hz",
            "coupling_abs_hz", "delta_epsilon_hz",
        ]);
        row.extend([
            hz(Some(pert.delta_omega_full)),
            hz(pert.delta_omega_ld),
            hz(pert.delta_omega_lit),
            hz(eta0),
            hz(Some(numeric.delta_omega_numeric)),
            hz(Some(split.gap)),
            hz(Some(split.coupling_abs)),
            hz(Some(split.delta_epsilon)),
        ]);
    }
    let mut table = Table::new(columns);
    table.push(row);
    let deferred = (!numeric.converged).then(|| not_converged(sb));
    Ok(Report { table, deferred })
}

fn method_label(r: &ShiftReport) -> &'static str {
    match r.method {
        vbshift::LocatorMethod::Extremum => "extremum",
        vbshift::LocatorMethod::Intersection => "intersection",
        vbshift::LocatorMethod::Carrier => "carrier",
    }
}

/// Basis size for a sweep that shows levels up to `levels`.
pub fn sweep_n_max(levels: usize, eta: f64) -> usize {
    levels + 15 + (25.0 * eta * eta).ceil() as usize
}

pub fn cmd_sweep(cfg: &Resolved) -> Result<Report, CliError> {
    let p = params(cfg, cfg.ld)?;
    let grid = linspace(cfg.delta_min, cfg.delta_max, cfg.points);
    let n_max = cfg.nmax.unwrap_or_else(|| sweep_n_max(cfg.levels, cfg.eta));
    if n_max < cfg.levels {
        return Err(CliError::Config(format!("--nmax {n_max} is below --levels {}", cfg.levels)));
    }
    let spectrum = sweep(&p, &grid, n_max, cfg.levels)?;

    let mut seen: HashMap<String, usize> = HashMap::new();
    let ids: Vec<String> = spectrum
        .branches
        .iter()
        .map(|b| {
            let base = b.tag.to_string();
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}#{count}")
            }
        })
        .collect();
    let bare: Vec<BareState> = if cfg.bare {
        (0..=cfg.levels).flat_map(|n| [BareState::ground(n), BareState::excited(n)]).collect()
    } else {
        Vec::new()
    };

    let mut columns = vec!["delta", "branch_id", "energy", "overlap_tag"];
    if cfg.physical() {
        columns.extend(["delta_hz", "energy_hz"]);
    }
    let mut table = Table::new(columns);
    for (i, &delta) in spectrum.grid.iter().enumerate() {
        let mut emit = |id: String, energy: f64, overlap: f64| {
            let mut row = vec![delta.into(), id.into(), energy.into(), overlap.into()];
            if cfg.physical() {
                row.extend([Cell::num(cfg.to_hz(delta)), Cell::num(cfg.to_hz(energy))]);
            }
            table.push(row);
        };
        for (b, id) in spectrum.branches.iter().zip(&ids) {
            emit(id.clone(), b.energies[i], b.overlaps[i]);
        }
        for &s in &bare {
            emit(format!("bare:{s}"), bare_energy(s, &p.with_delta(delta)), 1.0);
        }
    }
    Ok(Report::ok(table))
}

/// `(eta, exact, full, ld, lit)`.
type EtaRow = (f64, ShiftReport, f64, Option<f64>, Option<f64>);

pub fn cmd_scan_eta(cfg: &Resolved) -> Result<Report, CliError> {
    let sb = cfg.sideband();
    if cfg.require_ld && sb.is_carrier() {
        return Err(CliError::Config(format!("--ld requested for the carrier {sb}")));
    }
    let etas = linspace(cfg.eta_min, cfg.eta_max, cfg.points);
    let rows: Vec<EtaRow> = etas
        .par_iter()
        .map(|&eta| {
            let p = params(cfg, LdParam::new(eta)?)?;
            let full = bs_shift(sb, &p, k_max(cfg, sb))?.value;
            let ld = bs_shift_ld(sb, &p).ok().map(|l| l.total);
            let lit = bs_shift_literature(sb, &p).ok();
            let exact = find_resonance(sb, &p, cfg.nmax)?;
            Ok((eta, exact, full, ld, lit))
        })
        .collect::<Result<_, CliError>>()?;

    let physical = cfg.physical();
    let mut columns = vec!["eta", "shift_exact", "shift_full", "shift_ld", "shift_lit", "converged"];
    if physical {
        columns.extend(["shift_exact_hz", "shift_full_hz", "shift_ld_hz", "shift_lit_hz"]);
    }
    let mut table = Table::new(columns);
    let mut failed = Vec::new();
    for (eta, exact, full, ld, lit) in rows {
        if !exact.converged {
            failed.push(eta);
        }
        let mut row = vec![
            eta.into(),
            exact.delta_omega_numeric.into(),
            full.into(),
            Cell::num(ld),
            Cell::num(lit),
            exact.converged.into(),
        ];
        if physical {
            let hz = |x: Option<f64>| Cell::num(x.and_then(|v| cfg.to_hz(v)));
            row.extend([hz(Some(exact.delta_omega_numeric)), hz(Some(full)), hz(ld), hz(lit)]);
        }
        table.push(row);
    }
    let deferred = (!failed.is_empty()).then(|| not_converged(format!("{sb} at eta = {failed:?}")));
    Ok(Report { table, deferred })
}

/// Sidebands in display order: red of decreasing order, carrier, blue of
/// increasing order; `n` is `n_e` for red and `n_g` otherwise.
pub fn sideband_rows(orders: usize, levels: usize) -> Vec<(i64, usize, SidebandId)> {
    let mut out = Vec::new();
    for m in (1..=orders).rev() {
        for n in 0..=levels {
            out.push((-(m as i64), n, SidebandId::new(n + m, n)));
        }
    }
    for n in 0..=levels {
        out.push((0, n, SidebandId::new(n, n)));
    }
    for m in 1..=orders {
        for n in 0..=levels {
            out.push((m as i64, n, SidebandId::new(n, n + m)));
        }
    }
    out
}

pub fn cmd_sidebands(cfg: &Resolved) -> Result<Report, CliError> {
    let p = params(cfg, cfg.ld)?;
    let layout = sideband_rows(cfg.orders, 3);
    let results: Vec<(f64, ShiftReport)> = layout
        .par_iter()
        .map(|&(_, _, sb)| {
            let full = bs_shift(sb, &p, k_max(cfg, sb))?.value;
            let exact = find_resonance(sb, &p, cfg.nmax)?;
            Ok((full, exact))
        })
        .collect::<Result<_, CliError>>()?;

    let physical = cfg.physical();
    let mut columns = vec!["kind", "order", "n", "n_g", "n_e", "shift_full", "shift_exact", "converged"];
    if physical {
        columns.extend(["shift_full_hz", "shift_exact_hz"]);
    }
    let mut table = Table::new(columns);
    let mut failed = Vec::new();
    for (&(order, n, sb), (full, exact)) in layout.iter().zip(results) {
        if !exact.converged {
            failed.push(sb.to_string());
        }
        let mut row = vec![
            kind_label(sb.kind()).into(),
            order.into(),
            n.into(),
            sb.n_g.into(),
            sb.n_e.into(),
            full.into(),
            exact.delta_omega_numeric.into(),
            exact.converged.into(),
        ];
        if physical {
            row.extend([Cell::num(cfg.to_hz(full)), Cell::num(cfg.to_hz(exact.delta_omega_numeric))]);
        }
        table.push(row);
    }
    let deferred = (!failed.is_empty()).then(|| not_converged(failed.join(", ")));
    Ok(Report { table, deferred })
}

/// One self-test: `measured <= tolerance * scale` passes.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

fn dimensionless(rabi: f64, eta: f64) -> Result<TrapParams, CliError> {
    Ok(TrapParams::dimensionless(rabi, LdParam::new(eta)?, 0.0)?)
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn check_oracle() -> Result<f64, CliError> {
    let mut err = 0.0f64;
    for eta in [0.1, 0.4, 0.8] {
        let eta = LdParam::new(eta)?;
        err = err.max(coupling_table(eta, 20)?.max_abs_diff(&displacement_oracle(eta, 20)?));
    }
    Ok(err)
}

fn check_row_norms() -> Result<f64, CliError> {
    let mut err = 0.0f64;
    for eta in [0.1, 0.4, 0.8] {
        let table = coupling_table(LdParam::new(eta)?, 100)?;
        err = err.max(worst((0..=20).map(|n| (table.row_norm_sq(n) - 1.0).abs())));
    }
    Ok(err)
}

fn check_carrier_series() -> Result<f64, CliError> {
    let mut err = 0.0f64;
    for eta in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let p = dimensionless(0.01, eta)?;
        for n in 0..=3 {
            let sb = SidebandId::new(n, n);
            err = err.max(bs_shift(sb, &p, default_k_max(sb))?.value.abs());
        }
    }
    Ok(err)
}

fn check_carrier_numeric() -> Result<f64, CliError> {
    let cases: Vec<(f64, usize)> = [0.1, 0.3, 0.5].into_iter().flat_map(|e| (0..=3).map(move |n| (e, n))).collect();
    let errs = cases
        .par_iter()
        .map(|&(eta, n)| {
            let r = find_resonance(SidebandId::new(n, n), &dimensionless(0.01, eta)?, None)?;
            Ok(r.delta_omega_numeric.abs())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(worst(errs))
}

fn check_swap() -> Result<f64, CliError> {
    let mut err = 0.0f64;
    for eta in [0.0, 0.1, 0.3, 0.5] {
        let p = dimensionless(0.01, eta)?;
        for a in 0..=4 {
            for b in 0..=4 {
                let sb = SidebandId::new(a, b);
                let k = default_k_max(sb);
                let x = bs_shift(sb, &p, k)?.value;
                let y = bs_shift(sb.swapped(), &p, k)?.value;
                if x != 0.0 {
                    err = err.max((x + y).abs() / x.abs());
                }
            }
        }
    }
    Ok(err)
}

const ETA_ZERO_PAIRS: [SidebandId; 2] = [SidebandId { n_g: 0, n_e: 1 }, SidebandId { n_g: 1, n_e: 0 }];

fn check_eta_zero_series() -> Result<f64, CliError> {
    let p = dimensionless(0.01, 0.0)?;
    let mut err = 0.0f64;
    for sb in ETA_ZERO_PAIRS {
        err = err.max((bs_shift(sb, &p, default_k_max(sb))?.value - eta_zero_shift(sb, &p)?).abs());
    }
    Ok(err)
}

/// At `eta = 0` the tagged levels are `n +- sqrt(Delta^2 + Omega^2) / 2` and
/// cross at `Delta = sign(k) sqrt(k^2 - Omega^2)`, `k = n_e - n_g`.
fn eta_zero_exact(sb: SidebandId, rabi: f64) -> f64 {
    let k = sb.order() as f64;
    k.signum() * ((k * k - rabi * rabi).sqrt() - k.abs())
}

fn check_eta_zero_numeric() -> Result<(f64, f64), CliError> {
    let rabi = 0.01;
    let p = dimensionless(rabi, 0.0)?;
    let mut err = 0.0f64;
    let mut gap = 0.0f64;
    for sb in ETA_ZERO_PAIRS {
        let r = find_resonance(sb, &p, None)?;
        err = err.max((r.delta_omega_numeric - eta_zero_exact(sb, rabi)).abs());
        gap = gap.max(r.gap);
    }
    Ok((err, gap))
}

fn check_oracle_equivalence() -> Result<f64, CliError> {
    let cases: Vec<(f64, SidebandId)> = [0.05, 0.1, 0.2, 0.3]
        .into_iter()
        .flat_map(|eta| [(0, 1), (1, 0), (0, 2), (1, 2)].map(|(g, e)| (eta, SidebandId::new(g, e))))
        .collect();
    let errs = cases
        .par_iter()
        .map(|&(eta, sb)| {
            let p = dimensionless(0.01, eta)?;
            let series = bs_shift(sb, &p, default_k_max(sb))?.value;
            let exact = find_resonance(sb, &p, None)?.delta_omega_numeric;
            Ok((series - exact).abs() / series.abs().max(1e-7))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(worst(errs))
}

fn check_ld_scaling() -> Result<f64, CliError> {
    let remainder = |sb: SidebandId, eta: f64| -> Result<f64, CliError> {
        let p = dimensionless(0.01, eta)?;
        Ok((bs_shift(sb, &p, default_k_max(sb))?.value - bs_shift_ld(sb, &p)?.total).abs())
    };
    let mut err = 0.0f64;
    for sb in ETA_ZERO_PAIRS {
        let ratio = remainder(sb, 0.1)? / remainder(sb, 0.05)?;
        err = err.max((ratio / 16.0 - 1.0).abs());
    }
    Ok(err)
}

fn check_literature() -> Result<f64, CliError> {
    let sb = SidebandId::new(1, 0);
    let rabi = 0.01;
    let mut err = 0.0f64;
    for eta in linspace(0.0, 0.3, 31) {
        let p = dimensionless(rabi, eta)?;
        let diff = bs_shift_ld(sb, &p)?.total - bs_shift_literature(sb, &p)?;
        let expected = -eta * eta * rabi * rabi;
        err = err.max(if expected == 0.0 { diff.abs() } else { (diff / expected - 1.0).abs() });
    }
    Ok(err)
}

fn check_splitting() -> Result<f64, CliError> {
    let p = dimensionless(0.01, 0.1)?;
    let mut err = 0.0f64;
    for sb in [SidebandId::new(0, 1), SidebandId::new(1, 2)] {
        let n_max = vbshift::default_n_max(sb, p.eta);
        let s = measure_splitting(sb, &p, n_max)?;
        let coupling = rabi_coupling(sb.n_g, sb.n_e, &p).norm();
        err = err.max((s.gap / coupling - 1.0).abs());
    }
    Ok(err)
}

/// Run the self-test battery.
pub fn check_battery() -> Result<Vec<CheckOutcome>, CliError> {
    let (eta0_numeric, eta0_gap) = check_eta_zero_numeric()?;
    Ok(vec![
        CheckOutcome { name: "displacement_oracle", measured: check_oracle()?, tolerance: 1e-8 },
        CheckOutcome { name: "row_norms", measured: check_row_norms()?, tolerance: 1e-10 },
        CheckOutcome { name: "carrier_null_series", measured: check_carrier_series()?, tolerance: 1e-15 },
        CheckOutcome { name: "carrier_null_numeric", measured: check_carrier_numeric()?, tolerance: 1e-10 },
        CheckOutcome { name: "swap_antisymmetry", measured: check_swap()?, tolerance: 1e-15 },
        CheckOutcome { name: "eta_zero_series", measured: check_eta_zero_series()?, tolerance: 1e-12 },
        CheckOutcome { name: "eta_zero_numeric", measured: eta0_numeric, tolerance: 1e-12 },
        CheckOutcome { name: "eta_zero_crossing_gap", measured: eta0_gap, tolerance: 1e-10 },
        CheckOutcome { name: "series_vs_diagonalization", measured: check_oracle_equivalence()?, tolerance: 1e-2 },
        CheckOutcome { name: "ld_remainder_scaling", measured: check_ld_scaling()?, tolerance: 0.2 },
        CheckOutcome { name: "literature_discrepancy", measured: check_literature()?, tolerance: 1e-12 },
        CheckOutcome { name: "splitting", measured: check_splitting()?, tolerance: 1e-2 },
    ])
}

pub fn cmd_check(cfg: &Resolved) -> Result<Report, CliError> {
    let mut table = Table::new(["check", "passed", "measured", "tolerance", "margin"]);
    let mut failures = 0;
    for c in check_battery()? {
        let tol = c.tolerance * cfg.tolerance_scale;
        let passed = c.measured <= tol;
        if !passed {
            failures += 1;
        }
        table.push(vec![c.name.into(), passed.into(), c.measured.into(), tol.into(), (tol - c.measured).into()]);
    }
    let deferred = (failures > 0).then_some(CliError::CheckFailed(failures));
    Ok(Report { table, deferred })
}
