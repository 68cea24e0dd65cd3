use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{parse_json, AlgebraModel};
use crate::arbitrage::{na_certificate, GainsCone, DEFAULT_FEAS_TOL};
use crate::cond_exp::{axiom_residuals, tower_residual, AxiomResiduals, ConditionalExpectation};
use crate::demo;
use crate::error::{Error, Result};
use crate::fisher::semicircular_sweep;
use crate::jump::lattice::{expm_price, series_price, sweep_monotone, sweep_order, LatticeGrid, DEFAULT_TAIL_TOL};
use crate::jump::{bs_limit_sweep, wkb_discount, wkb_value_gap, JumpModel, Payoff, RateBounds};
use crate::linalg::ComplexMatrix;
use crate::pricing::{PricingReport, PricingSystem};
use crate::qms::{backward_ode_residual, invariant_state_check, semigroup_report, semigroup_value, system_from_json_str, InvariantReport, SemigroupReport};
use crate::states::DensityState;
use crate::suite::{full_suite, model_suite, SuiteConfig, SuiteReport, AXIOM_SAMPLES, CHOI_TOL};

use super::output::{format_float, json_bytes, write_atomic, Table};
use super::{
    read_file, ArbArgs, BslimitArgs, CheckArgs, Command, CondexpArgs, FisherArgs, Format, JumpArgs, JumpMethod, PriceArgs,
    QmsArgs, RunConfig, WkbArgs,
};

pub(super) fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Condexp(a) => condexp(a, cfg),
        Command::Price(a) => price(a, cfg),
        Command::Arb(a) => arb(a, cfg),
        Command::Jump(a) => jump(a, cfg),
        Command::Bslimit(a) => bslimit(a, cfg),
        Command::Wkb(a) => wkb(a, cfg),
        Command::Qms(a) => qms(a, cfg),
        Command::Fisher(a) => fisher(a, cfg),
        Command::Check(a) => check(a, cfg),
    }
}

fn emit(cfg: &RunConfig, bytes: Vec<u8>) -> Result<()> {
    write_atomic(cfg.out.as_deref(), &bytes)
}

/// Emits JSON or the CSV table built on demand.
fn emit_either<T: Serialize>(cfg: &RunConfig, json: &T, table: impl FnOnce() -> Table) -> Result<()> {
    match cfg.format {
        Format::Json => emit(cfg, json_bytes(json)?),
        Format::Csv => emit(cfg, table().to_bytes()?),
    }
}

fn fail_if(failures: Vec<String>) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
    let more = if failures.len() > shown.len() { format!(" (+{} more)", failures.len() - shown.len()) } else { String::new() };
    Err(Error::ChecksFailed(format!("{} check(s) failed: {}{more}", failures.len(), shown.join(", "))))
}

fn load_algebra_model(path: &Path) -> Result<AlgebraModel> {
    AlgebraModel::from_json_str(&read_file(path)?)
}

fn load_state(path: Option<&Path>, dim: usize) -> Result<DensityState> {
    let state = match path {
        Some(p) => DensityState::from_json_str(&read_file(p)?)?,
        None => DensityState::maximally_mixed(dim),
    };
    state.rho().ensure_dim(dim)?;
    Ok(state)
}

fn load_matrix(path: &Path, dim: usize) -> Result<ComplexMatrix> {
    let m: ComplexMatrix = parse_json(&read_file(path)?)?;
    m.ensure_dim(dim)?;
    Ok(m)
}

/// Inline JSON when the argument starts with '{', otherwise a file.
fn load_payoff(arg: &str) -> Result<Payoff> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read_file(Path::new(arg))? };
    let p: Payoff = parse_json(&text)?;
    p.validate()?;
    Ok(p)
}

fn time_indices(model: &AlgebraModel, time: Option<f64>) -> Result<Vec<usize>> {
    match time {
        Some(t) => Ok(vec![model.filtration().time_index(t)?]),
        None => Ok((0..model.filtration().len()).collect()),
    }
}

fn matrix_rows(table: &mut Table, time: f64, m: &ComplexMatrix) {
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            let z = m[(i, j)];
            table.push(vec![format_float(time), i.to_string(), j.to_string(), format_float(z.re), format_float(z.im)]);
        }
    }
}

const MATRIX_HEADER: [&str; 5] = ["time", "row", "col", "re", "im"];

#[derive(Serialize)]
struct CondexpEntry {
    time: f64,
    value: ComplexMatrix,
    axioms: AxiomResiduals,
}

#[derive(Serialize)]
struct CondexpReport {
    tol: f64,
    tower_residual: f64,
    results: Vec<CondexpEntry>,
}

fn condexp(a: &CondexpArgs, cfg: &RunConfig) -> Result<()> {
    let model = load_algebra_model(cfg.single_model()?)?;
    let state = load_state(a.state.as_deref(), model.dim())?;
    let x = load_matrix(&a.observable, model.dim())?;
    let ces = ConditionalExpectation::family(model.filtration(), &state)?;
    let tol = cfg.tol_or_default();
    let mut results = Vec::new();
    for t in time_indices(&model, a.time)? {
        results.push(CondexpEntry {
            time: model.times()[t],
            value: ces[t].apply(&x)?,
            axioms: axiom_residuals(&ces[t], AXIOM_SAMPLES, cfg.seed)?,
        });
    }
    let report = CondexpReport { tol, tower_residual: tower_residual(&ces, AXIOM_SAMPLES, cfg.seed)?, results };
    emit_either(cfg, &report, || {
        let mut t = Table::new(&MATRIX_HEADER);
        for r in &report.results {
            matrix_rows(&mut t, r.time, &r.value);
        }
        t
    })?;
    let mut failures = Vec::new();
    for r in &report.results {
        if !(r.axioms.max() <= tol) {
            failures.push(format!("axioms[t={}]={:.3e}", r.time, r.axioms.max()));
        }
    }
    if !(report.tower_residual <= tol) {
        failures.push(format!("tower={:.3e}", report.tower_residual));
    }
    fail_if(failures)
}

#[derive(Serialize)]
struct PriceEntry {
    time: f64,
    price: ComplexMatrix,
    properties: PricingReport,
}

#[derive(Serialize)]
struct PriceReport {
    tol: f64,
    /// φ(X̄)
    price0: f64,
    time_consistency_residual: f64,
    results: Vec<PriceEntry>,
}

fn price(a: &PriceArgs, cfg: &RunConfig) -> Result<()> {
    let model = load_algebra_model(cfg.single_model()?)?;
    let state = load_state(a.state.as_deref(), model.dim())?;
    let x = load_matrix(&a.claim, model.dim())?;
    let indices = time_indices(&model, a.time)?;
    let ps = PricingSystem::new(model, state)?;
    let tol = cfg.tol_or_default();
    let mut results = Vec::new();
    for t in indices {
        results.push(PriceEntry {
            time: ps.model().times()[t],
            price: ps.price(&x, t)?,
            properties: ps.verify_pricing_properties(t, 20, cfg.seed)?,
        });
    }
    let mut consistency: f64 = 0.0;
    for s in 0..ps.horizon() {
        for t in s..=ps.horizon() {
            consistency = consistency.max(ps.time_consistency_check(&x, s, t)?.residual);
        }
    }
    let report = PriceReport { tol, price0: ps.price0(&x)?, time_consistency_residual: consistency, results };
    emit_either(cfg, &report, || {
        let mut t = Table::new(&MATRIX_HEADER);
        for r in &report.results {
            matrix_rows(&mut t, r.time, &r.price);
        }
        t
    })?;
    let mut failures = Vec::new();
    for r in &report.results {
        let p = &r.properties;
        if !(p.choi_min_eig >= -CHOI_TOL) {
            failures.push(format!("choi[t={}]={:.3e}", r.time, p.choi_min_eig));
        }
        if !(p.normalization_residual <= tol) {
            failures.push(format!("normalization[t={}]={:.3e}", r.time, p.normalization_residual));
        }
        if !(p.bimodularity_residual <= tol) {
            failures.push(format!("bimodularity[t={}]={:.3e}", r.time, p.bimodularity_residual));
        }
    }
    if !(consistency <= tol) {
        failures.push(format!("time_consistency={consistency:.3e}"));
    }
    fail_if(failures)
}

fn arb(a: &ArbArgs, cfg: &RunConfig) -> Result<()> {
    if cfg.format == Format::Csv {
        return Err(Error::InvalidParameter("`arb` reports only in JSON".into()));
    }
    let dim = match cfg.model.as_slice() {
        [] => None,
        _ => Some(load_algebra_model(cfg.single_model()?)?.dim()),
    };
    let cone = GainsCone::from_json_str(&read_file(&a.gains)?, dim)?;
    if let Some(d) = dim {
        if cone.dim() != d {
            return Err(Error::DimMismatch { expected: d, found: cone.dim() });
        }
    }
    let cert = na_certificate(&cone, a.delta, cfg.tol.unwrap_or(DEFAULT_FEAS_TOL))?;
    emit(cfg, json_bytes(&cert)?)?;
    if cert.has_pricing_state {
        Ok(())
    } else {
        Err(Error::Infeasible { max_violation: cert.violation, iterations: cert.iterations })
    }
}

#[derive(Serialize)]
struct JumpRow {
    tau: f64,
    s: f64,
    value: f64,
    tail_bound: f64,
}

fn jump(a: &JumpArgs, cfg: &RunConfig) -> Result<()> {
    let model = JumpModel::from_json_str(&read_file(cfg.single_model()?)?)?;
    let payoff = load_payoff(&a.payoff)?;
    let pairs: Vec<(f64, f64)> = a.tau.iter().flat_map(|&t| a.s.iter().map(move |&s| (t, s))).collect();
    let rows: Vec<JumpRow> = pairs
        .par_iter()
        .map(|&(tau, s)| match a.method {
            JumpMethod::Series => {
                let p = series_price(&model, &payoff, tau, s, DEFAULT_TAIL_TOL)?;
                Ok(JumpRow { tau, s, value: p.value, tail_bound: p.tail_bound })
            }
            JumpMethod::Expm => {
                let grid = LatticeGrid::sized_for(&model, tau, s)?;
                let v = expm_price(&model, &payoff, tau, &grid)?;
                let tail_bound = (-model.r() * tau).exp() * payoff.sup_norm() * grid.leak_bound(&model, tau);
                Ok(JumpRow { tau, s, value: v[grid.center_index()], tail_bound })
            }
        })
        .collect::<Result<_>>()?;
    emit_either(cfg, &rows, || {
        let mut t = Table::new(&["tau", "s", "value", "tail_bound"]);
        for r in &rows {
            t.push_floats(&[r.tau, r.s, r.value, r.tail_bound]);
        }
        t
    })
}

#[derive(Serialize)]
struct BslimitReport {
    rows: Vec<crate::jump::SweepRow>,
    monotone: bool,
    observed_order: f64,
}

fn bslimit(a: &BslimitArgs, cfg: &RunConfig) -> Result<()> {
    let payoff = load_payoff(&a.payoff)?;
    let rows = bs_limit_sweep(a.sigma, a.rate, a.maturity, &payoff, &a.deltas, a.s)?;
    let report = BslimitReport { monotone: sweep_monotone(&rows), observed_order: sweep_order(&rows), rows };
    emit_either(cfg, &report, || {
        let mut t = Table::new(&["delta", "lattice", "bs", "abs_error"]);
        for r in &report.rows {
            t.push_floats(&[r.delta, r.lattice, r.bs, r.abs_error]);
        }
        t
    })
}

#[derive(Serialize)]
struct WkbRow {
    eps: f64,
    t: f64,
    t_end: f64,
    delta: f64,
    delta_bound: f64,
    gap: f64,
    gap_bound: f64,
    holds: bool,
}

fn wkb(a: &WkbArgs, cfg: &RunConfig) -> Result<()> {
    let model = match cfg.model.as_slice() {
        [] => demo::pm1_jump(),
        _ => JumpModel::from_json_str(&read_file(cfg.single_model()?)?)?,
    };
    let payoff = load_payoff(&a.payoff)?;
    if a.knots < 2 || !(a.maturity > 0.0 && a.maturity.is_finite()) {
        return Err(Error::InvalidParameter("wkb needs at least two knots and a positive maturity".into()));
    }
    let (r0, slope) = (a.r0, a.slope);
    let rate = move |u: f64| r0 + slope * u;
    // εu stays in [0, maturity] for ε ≤ 1
    let bounds = RateBounds { r_sup: r0.abs().max((r0 + slope * a.maturity).abs()), rprime_sup: slope.abs() };
    let knots: Vec<f64> = (0..a.knots).map(|j| a.maturity * j as f64 / (a.knots - 1) as f64).collect();
    let mut rows = Vec::new();
    for &eps in &a.eps {
        for (i, &t) in knots.iter().enumerate() {
            for &t_end in &knots[i + 1..] {
                let d = wkb_discount(&rate, bounds, t, t_end, eps)?;
                let g = wkb_value_gap(&model, &payoff, &rate, bounds, t, t_end, eps, a.s)?;
                rows.push(WkbRow { eps, t, t_end, delta: d.delta, delta_bound: d.bound, gap: g.gap, gap_bound: g.bound, holds: d.holds && g.holds });
            }
        }
    }
    emit_either(cfg, &rows, || {
        let mut t = Table::new(&["eps", "t", "t_end", "delta", "delta_bound", "gap", "gap_bound", "holds"]);
        for r in &rows {
            let mut cells: Vec<String> =
                [r.eps, r.t, r.t_end, r.delta, r.delta_bound, r.gap, r.gap_bound].iter().map(|&x| format_float(x)).collect();
            cells.push(r.holds.to_string());
            t.push(cells);
        }
        t
    })?;
    fail_if(rows.iter().filter(|r| !r.holds).map(|r| format!("wkb[eps={},t={},T={}]", r.eps, r.t, r.t_end)).collect())
}

#[derive(Serialize)]
struct QmsReport {
    tol: f64,
    rate: f64,
    semigroup: SemigroupReport,
    time: f64,
    maturity: f64,
    value: ComplexMatrix,
    /// Central-difference residuals with 20 and 40 steps, and the implied order.
    backward_residuals: [f64; 2],
    backward_order: f64,
    invariant: Option<InvariantReport>,
}

fn qms(a: &QmsArgs, cfg: &RunConfig) -> Result<()> {
    let (sys, rate) = system_from_json_str(&read_file(cfg.single_model()?)?)?;
    let n = sys.dim();
    let x = match &a.observable {
        Some(p) => load_matrix(p, n)?,
        None => ComplexMatrix::identity(n),
    };
    let tol = cfg.tol_or_default();
    let semigroup = semigroup_report(&sys, a.samples, cfg.seed)?;
    let value = semigroup_value(&sys, &x, a.time, a.maturity, rate)?;
    let grid = |k: usize| (0..=k).map(|j| a.maturity * j as f64 / k as f64).collect::<Vec<_>>();
    let (coarse, fine) = if a.maturity > 0.0 {
        (backward_ode_residual(&sys, &x, a.maturity, rate, &grid(20))?, backward_ode_residual(&sys, &x, a.maturity, rate, &grid(40))?)
    } else {
        (0.0, 0.0)
    };
    let invariant = match &a.state {
        Some(p) => Some(invariant_state_check(&sys, &load_state(Some(p), n)?)?),
        None => None,
    };
    let report = QmsReport {
        tol,
        rate,
        semigroup,
        time: a.time,
        maturity: a.maturity,
        value,
        backward_residuals: [coarse, fine],
        backward_order: (coarse / fine).log2(),
        invariant,
    };
    emit_either(cfg, &report, || {
        let mut t = Table::new(&MATRIX_HEADER);
        matrix_rows(&mut t, report.time, &report.value);
        t
    })?;
    let s = &report.semigroup;
    let mut failures = Vec::new();
    for (name, v) in [
        ("generator_unit", s.generator_unit_residual),
        ("unitality", s.unitality),
        ("trace_preservation", s.trace_preservation),
        ("semigroup_law", s.semigroup_law),
    ] {
        if !(v <= tol) {
            failures.push(format!("{name}={v:.3e}"));
        }
    }
    if !(s.choi_min_eigenvalue >= -CHOI_TOL) {
        failures.push(format!("choi={:.3e}", s.choi_min_eigenvalue));
    }
    if let Some(inv) = &report.invariant {
        if !(inv.max_residual <= tol) {
            failures.push(format!("invariant_state={:.3e}", inv.max_residual));
        }
    }
    fail_if(failures)
}

fn fisher(a: &FisherArgs, cfg: &RunConfig) -> Result<()> {
    if a.count == 0 {
        return Err(Error::InvalidParameter("--count must be positive".into()));
    }
    let demos = semicircular_sweep(a.n, a.sigma, cfg.seed, a.count)?;
    emit_either(cfg, &demos, || {
        let mut t = Table::new(&["product", "deviation", "min_mse"]);
        for d in &demos {
            t.push_floats(&[d.product, d.deviation, d.min_mse]);
        }
        t
    })
}

fn check(a: &CheckArgs, cfg: &RunConfig) -> Result<()> {
    let suite_cfg = SuiteConfig { seed: cfg.seed, tol: cfg.tol };
    let report: SuiteReport = if cfg.model.is_empty() {
        full_suite(suite_cfg)?
    } else {
        let systems = cfg
            .model
            .iter()
            .map(|p| {
                let model = load_algebra_model(p).map_err(|e| at_file(p, e))?;
                let state = load_state(a.state.as_deref(), model.dim())?;
                Ok((p.display().to_string(), PricingSystem::new(model, state)?))
            })
            .collect::<Result<Vec<_>>>()?;
        model_suite(&systems, suite_cfg)?
    };
    emit_either(cfg, &report, || {
        let mut t = Table::new(&["name", "value", "bound", "relation", "pass"]);
        for i in &report.invariants {
            let rel = match i.relation {
                crate::suite::Relation::Le => "le",
                crate::suite::Relation::Ge => "ge",
            };
            t.push(vec![i.name.clone(), format_float(i.value), format_float(i.bound), rel.into(), i.pass.to_string()]);
        }
        t
    })?;
    fail_if(report.failures().map(|i| i.name.clone()).collect())
}

/// Prefixes a parse error's JSON path with the file it came from.
fn at_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { path: p, message } => Error::Parse { path: format!("{}: {p}", path.display()), message },
        other => other,
    }
}
