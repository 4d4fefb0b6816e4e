use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;
use wineland_core::bounds::{
    best_tangent, bernstein_prime_pvalue, ln_bernstein_prime_pvalue, ln_mcdiarmid_pvalue,
    mcdiarmid_pvalue, bernstein_pvalue_gamma_c, mu_perp_sweep, optimize_tangent,
    required_m_at_tangent, required_m_bernstein_prime, required_m_mcdiarmid, TangentSearch,
};
use wineland_core::catalog::{builtin_catalog, deficit_report, figure_rows, load_catalog};
use wineland_core::estimators::{
    gamma_linear, gamma_prime_blocks, gamma_tilde, BatchMoments, GammaCSource, SummaryForm,
    SummaryGamma,
};
use wineland_core::lowerbound::{min_m_lower, r_max_floor, LowerBoundModel};
use wineland_core::model::{read_batch_csv, write_batch_csv};
use wineland_core::simulator::{
    css_state, empirical_tails, rho_mixture, sample_batch, twisted_squeezed_state, ExactMoments,
    MeasurementAxes, StateMixture, TailConfig, TailQuery, TailStatistic,
};
use wineland_core::{
    BoundMethod, BoundReport, Error, MeasurementBatch, Result, SummaryStats, TangentPoint,
};

use crate::output::emit;
use crate::{Common, StateArgs, StateKind, Verdict};

fn search(common: &Common) -> TangentSearch {
    TangentSearch::with_grid(common.grid)
}

#[derive(Debug, Serialize)]
struct BoundRow {
    method: &'static str,
    p_bound: f64,
    ln_p_bound: f64,
    gamma_value: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    m_used: u64,
}

impl From<&BoundReport> for BoundRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            method: r.method.as_str(),
            p_bound: r.p_bound,
            ln_p_bound: r.ln_p_bound,
            gamma_value: r.gamma_value,
            alpha: r.tangent.map(|c| c.alpha),
            beta: r.tangent.map(|c| c.beta),
            m_used: r.m_used,
        }
    }
}

const BOUND_HEADER: [&str; 7] = [
    "method",
    "p_bound",
    "ln_p_bound",
    "gamma_value",
    "alpha",
    "beta",
    "m_used",
];

/// A baseline estimate that is not negative gives no evidence: `p <= 1`.
fn baseline(method: BoundMethod, gamma: f64, m: u64, ln_p: impl FnOnce() -> Result<f64>) -> Result<BoundReport> {
    let ln_p = if gamma < 0.0 { ln_p()? } else { 0.0 };
    BoundReport::new(method, ln_p, gamma, None, m)
}

fn read_summary(path: &Path) -> Result<SummaryStats> {
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let stats: SummaryStats = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Parse(format!("field `{}`: {}", e.path(), e.inner())))?;
    stats.validate()
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn analyze(common: &Common, input: &Path, n_spins: Option<u32>, lattice_strict: bool) -> Result<Verdict> {
    let search = search(common);
    let (n, m, source, baselines): (u32, u64, Box<dyn GammaCSource>, Vec<BoundReport>) = if is_json(input) {
        let stats = read_summary(input)?;
        if stats.m_par != stats.m_perp {
            return Err(Error::Validation(format!(
                "unequal axis counts ({} parallel, {} perpendicular) are not supported",
                stats.m_par, stats.m_perp
            )));
        }
        let (n, m) = (stats.n_spins, stats.total_count());
        let gamma = gamma_linear(&stats);
        let mut baselines = vec![baseline(BoundMethod::Mcdiarmid, gamma, m, || {
            ln_mcdiarmid_pvalue(gamma, n, stats.m_par, stats.m_perp)
        })?];
        let m4 = m - m % 4;
        if m4 > 0 {
            baselines.push(baseline(BoundMethod::BernsteinGammaPrime, gamma, m4, || {
                ln_bernstein_prime_pvalue(gamma, m4, n)
            })?);
        }
        (n, m, Box::new(SummaryGamma::new(stats, SummaryForm::Full)), baselines)
    } else {
        let n = n_spins.ok_or_else(|| Error::Validation("--n-spins is required for CSV input".into()))?;
        let batch = read_batch_csv(BufReader::new(File::open(input)?), n)?.validate(lattice_strict)?;
        let m = batch.total_count();
        let pairs = batch.pairs() as u64;
        let mut baselines = Vec::new();
        if pairs >= 2 {
            let g = gamma_tilde(&batch)?;
            baselines.push(baseline(BoundMethod::Mcdiarmid, g, m, || ln_mcdiarmid_pvalue(g, n, pairs, pairs))?);
            // an odd last round cannot join a block of four
            let even = MeasurementBatch::new(n, batch.rounds[..batch.pairs() - batch.pairs() % 2].to_vec());
            let m4 = even.total_count();
            let g = gamma_prime_blocks(&even)?;
            baselines.push(baseline(BoundMethod::BernsteinGammaPrime, g, m4, || {
                ln_bernstein_prime_pvalue(g, m4, n)
            })?);
        }
        (n, m, Box::new(BatchMoments::new(&batch)?), baselines)
    };

    let optimized = match optimize_tangent(source.as_ref(), m, n, &search) {
        Ok(opt) => Some(opt),
        Err(Error::Infeasible) => None,
        Err(e) => return Err(e),
    };
    let mut reports = Vec::new();
    if let Some(opt) = &optimized {
        reports.push(BoundReport::new(
            BoundMethod::BernsteinGammaC,
            opt.ln_p_bound,
            opt.gamma_c_at_best,
            Some(opt.best_c),
            m,
        )?);
    }
    reports.extend(baselines);
    let rows: Vec<BoundRow> = reports.iter().map(BoundRow::from).collect();
    emit(common, &rows, &BOUND_HEADER)?;

    Ok(match optimized {
        None => {
            eprintln!("no tangent point gives a negative gamma_c: squeezing is not indicated");
            Verdict::Infeasible
        }
        Some(opt) if opt.p_bound <= common.p_target => {
            eprintln!("p <= {:e} <= {}: reject the non-squeezed hypothesis", opt.p_bound, common.p_target);
            Verdict::Ok
        }
        Some(opt) => {
            eprintln!("p <= {:e} exceeds {}: cannot reject", opt.p_bound, common.p_target);
            Verdict::NotRejected
        }
    })
}

#[derive(Debug, Serialize)]
struct RequiredRow {
    method: String,
    mu_perp: Option<f64>,
    gamma_value: Option<f64>,
    m_required: Option<u64>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

const SWEEP_STEPS: usize = 21;
const SWEEP_HALF_RANGE: f64 = 0.1;

pub fn required_m(common: &Common, summary: &Path, gamma: Option<f64>, sweep: bool) -> Result<Verdict> {
    let stats = read_summary(summary)?;
    let search = search(common);
    let p = common.p_target;
    let n = stats.n_spins;
    let gamma = gamma.unwrap_or_else(|| gamma_linear(&stats));
    let source = SummaryGamma::new(stats, SummaryForm::Full);

    let mut rows = Vec::new();
    let mut verdict = Verdict::Ok;
    match best_tangent(&source, n, &search) {
        Ok(best) => rows.push(RequiredRow {
            method: BoundMethod::BernsteinGammaC.as_str().into(),
            mu_perp: Some(stats.mu_perp),
            gamma_value: Some(best.gamma_c),
            m_required: Some(required_m_at_tangent(p, best.gamma_c, n, best.c)?),
            alpha: Some(best.c.alpha),
            beta: Some(best.c.beta),
        }),
        Err(Error::Infeasible) => {
            eprintln!("no tangent point gives a negative gamma_c");
            verdict = Verdict::Infeasible;
            rows.push(RequiredRow {
                method: BoundMethod::BernsteinGammaC.as_str().into(),
                mu_perp: Some(stats.mu_perp),
                gamma_value: None,
                m_required: None,
                alpha: None,
                beta: None,
            });
        }
        Err(e) => return Err(e),
    }
    let feasible = gamma < 0.0;
    if !feasible {
        eprintln!("gamma = {gamma} is not negative: the baseline bounds never reach the target");
    }
    for (method, m) in [
        (BoundMethod::Mcdiarmid, feasible.then(|| required_m_mcdiarmid(p, gamma, n)).transpose()?),
        (
            BoundMethod::BernsteinGammaPrime,
            feasible.then(|| required_m_bernstein_prime(p, gamma, n)).transpose()?,
        ),
    ] {
        rows.push(RequiredRow {
            method: method.as_str().into(),
            mu_perp: None,
            gamma_value: Some(gamma),
            m_required: m,
            alpha: None,
            beta: None,
        });
    }
    if sweep {
        for point in mu_perp_sweep(&stats, (-SWEEP_HALF_RANGE, SWEEP_HALF_RANGE), SWEEP_STEPS, p, &search)? {
            rows.push(RequiredRow {
                method: "bernstein_gamma_c_sweep".into(),
                mu_perp: Some(point.mu_perp),
                gamma_value: None,
                m_required: point.m_required,
                alpha: None,
                beta: None,
            });
        }
    }
    emit(
        common,
        &rows,
        &["method", "mu_perp", "gamma_value", "m_required", "alpha", "beta"],
    )?;
    Ok(verdict)
}

#[derive(Debug, Serialize)]
struct LowerRow {
    n_spins: u32,
    xi2_chi: f64,
    q_par_sq_chi: f64,
    p_target: f64,
    kappa: f64,
    r_max: f64,
    m_min: Option<u64>,
    r_floor: f64,
    m_min_floor: u64,
    /// `N ln(1/p)`, the large-N limit of `m_min_floor`.
    m_floor_asymptote: f64,
}

pub fn lower_bound(common: &Common, xi2: f64, q_par_sq: f64, n_spins: u32) -> Result<Verdict> {
    let p = common.p_target;
    let model = LowerBoundModel::new(xi2, q_par_sq, n_spins)?;
    let m_min = if model.r_max < 1.0 { Some(model.min_m(p)?) } else { None };
    let r_floor = r_max_floor(n_spins);
    let row = LowerRow {
        n_spins,
        xi2_chi: xi2,
        q_par_sq_chi: q_par_sq,
        p_target: p,
        kappa: model.kappa,
        r_max: model.r_max,
        m_min,
        r_floor,
        m_min_floor: min_m_lower(p, r_floor)?,
        m_floor_asymptote: -(n_spins as f64) * p.ln(),
    };
    emit(
        common,
        &[row],
        &[
            "n_spins",
            "xi2_chi",
            "q_par_sq_chi",
            "p_target",
            "kappa",
            "r_max",
            "m_min",
            "r_floor",
            "m_min_floor",
            "m_floor_asymptote",
        ],
    )?;
    Ok(Verdict::Ok)
}

/// A null state and the axes it is measured along.
fn build_state(args: &StateArgs) -> Result<(StateMixture, MeasurementAxes)> {
    match args.state {
        StateKind::Css => {
            let axes = MeasurementAxes::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])?;
            Ok((css_state(args.n_spins, axes.n)?.into(), axes))
        }
        StateKind::Mixture => {
            let prep = twisted_squeezed_state(args.n_spins, args.twist)?;
            let axes = MeasurementAxes::new(prep.mean_axis, prep.squeeze_axis)?;
            let r = match args.r {
                Some(r) => r,
                None => {
                    let chi = ExactMoments::of(&prep.state.clone().into(), &axes)?;
                    LowerBoundModel::new(chi.xi2(), chi.mean_par.powi(2), args.n_spins)?.r_max
                }
            };
            Ok((rho_mixture(&prep.state, r, axes.n_perp)?, axes))
        }
    }
}

#[derive(Debug, Serialize)]
struct ValidateRow {
    statistic: &'static str,
    n_spins: u32,
    m: u64,
    alpha: Option<f64>,
    beta: Option<f64>,
    threshold: f64,
    hits: u64,
    trials: u64,
    frequency: f64,
    half_width: f64,
    bound: f64,
    pass: bool,
}

/// Allowed excess of the empirical frequency over the bound, in 99% half-widths.
pub const ORACLE_SLACK_HALF_WIDTHS: f64 = 3.0;

pub fn validate(
    common: &Common,
    state: &StateArgs,
    m_values: &[u64],
    gammas: &[f64],
    tangent: Option<(f64, f64)>,
) -> Result<Verdict> {
    if let Some(&g) = gammas.iter().find(|g| g.is_nan() || **g >= 0.0) {
        return Err(Error::Validation(format!("thresholds must be negative, got {g}")));
    }
    let (source, axes) = build_state(state)?;
    let exact = ExactMoments::of(&source, &axes)?;
    let c = match tangent {
        Some((a, b)) => TangentPoint::new(a, b)?,
        None => {
            let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
            TangentPoint::clamped(snap(exact.mean_perp), snap(exact.mean_par))
        }
    };
    let n = state.n_spins;
    let cfg = TailConfig::new(common.trials, common.seed);

    let mut rows = Vec::new();
    for &m in m_values {
        let mut queries = vec![TailQuery {
            statistic: TailStatistic::GammaC(c),
            thresholds: gammas.to_vec(),
        }];
        if m >= 4 {
            queries.push(TailQuery {
                statistic: TailStatistic::GammaTilde,
                thresholds: gammas.to_vec(),
            });
        }
        if m % 4 == 0 {
            queries.push(TailQuery {
                statistic: TailStatistic::GammaPrime,
                thresholds: gammas.to_vec(),
            });
        }
        let tails = empirical_tails(&source, &axes, m, &queries, &cfg)?;
        for (q, estimates) in queries.iter().zip(tails) {
            for (&th, est) in gammas.iter().zip(estimates) {
                let (name, bound, tc) = match q.statistic {
                    TailStatistic::GammaC(c) => ("gamma_c", bernstein_pvalue_gamma_c(th, m, n, c)?, Some(c)),
                    TailStatistic::GammaTilde => ("gamma_tilde", mcdiarmid_pvalue(th, n, m / 2, m / 2)?, None),
                    TailStatistic::GammaPrime => ("gamma_prime", bernstein_prime_pvalue(th, m, n)?, None),
                };
                rows.push(ValidateRow {
                    statistic: name,
                    n_spins: n,
                    m,
                    alpha: tc.map(|c| c.alpha),
                    beta: tc.map(|c| c.beta),
                    threshold: th,
                    hits: est.hits,
                    trials: est.trials,
                    frequency: est.frequency,
                    half_width: est.half_width,
                    bound,
                    pass: est.frequency <= bound + ORACLE_SLACK_HALF_WIDTHS * est.half_width,
                });
            }
        }
    }
    emit(
        common,
        &rows,
        &[
            "statistic",
            "n_spins",
            "m",
            "alpha",
            "beta",
            "threshold",
            "hits",
            "trials",
            "frequency",
            "half_width",
            "bound",
            "pass",
        ],
    )?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    if failures > 0 {
        eprintln!("{failures} of {} rows exceed the analytic bound", rows.len());
        return Ok(Verdict::OracleViolation);
    }
    Ok(Verdict::Ok)
}

pub fn report(common: &Common, catalog: Option<&Path>, deficit: bool) -> Result<Verdict> {
    let entries = match catalog {
        Some(path) => load_catalog(path)?,
        None => builtin_catalog(),
    };
    let search = search(common);
    if deficit {
        let rows = deficit_report(&entries, common.p_target, &search)?;
        emit(
            common,
            &rows,
            &["name", "n_spins", "m_reported", "m_required", "ratio", "source"],
        )?;
    } else {
        let rows = figure_rows(&entries, common.p_target, &search)?;
        emit(
            common,
            &rows,
            &[
                "name",
                "n_spins",
                "m_reported",
                "m_upper_sufficient",
                "m_lower_necessary",
                "xi2_observed",
                "source",
            ],
        )?;
    }
    Ok(Verdict::Ok)
}

pub fn simulate(common: &Common, state: &StateArgs, rounds: usize) -> Result<Verdict> {
    let (source, axes) = build_state(state)?;
    let batch = sample_batch(&source, &axes, rounds, common.seed)?;
    match common.format {
        crate::Format::Csv => {
            let mut bytes = Vec::new();
            write_batch_csv(&mut bytes, &batch)?;
            std::io::Write::write_all(&mut std::io::stdout().lock(), &bytes)?;
            if let Some(path) = &common.output {
                fs::write(path, &bytes)?;
            }
        }
        crate::Format::Json => emit(common, &batch.rounds, &[])?,
    }
    Ok(Verdict::Ok)
}
