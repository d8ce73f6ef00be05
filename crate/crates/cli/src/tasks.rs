//! Scenario task execution and the report layout.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use smeared_core::fock::{
    build_mode_basis, characteristic_function, commutator, gibbs_cutoff, gibbs_weight, ladder_operator, observable,
    state_prepare, variance_multiplier, CharacteristicMethod, CharacteristicQuery, DiagonalExponentials, FockSpace,
    GibbsSpec, LadderKind, ModeBasis, ObservableSpec, OperatorMatrix, PreparedState, Sector, StateKind, StateVector,
};
use smeared_core::kinematics::{causal_separation, FourVector, Separation};
use smeared_core::pairing::{commutator_functional, gram_matrix, pair, Sheet, HERMITICITY_DEFECT_BOUND, PSD_SLACK};
use smeared_core::randomfield::{convolution_check, covariance, sample_batch, CovarianceSource, GENERATOR_VERSION};
use smeared_core::testfns::TestFunction;
use smeared_core::verification::{
    fit_gaussian_variance, lambda_grid, normalize, stated_coth_multiplier, timelike_offset, tolerance,
};
use smeared_core::Error;

use crate::scenario::{CothLaw, Loaded, ObservableChoice, SourceConfig, StateConfig, TaskConfig};

/// How a failed task maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    Assertion,
    NonConvergence,
    Input,
}

impl FailureClass {
    pub fn of(e: &Error) -> Self {
        match e {
            Error::NonConvergence { .. } => FailureClass::NonConvergence,
            Error::InvalidParameter(_)
            | Error::BandwidthExceeded { .. }
            | Error::CutoffTooSmall { .. }
            | Error::DimensionMismatch(_)
            | Error::RealityDefect { .. }
            | Error::NonRealBank { .. }
            | Error::Normalization { .. }
            | Error::FrequencySupport { .. }
            | Error::NonGaussianState
            | Error::SpanResidual { .. }
            | Error::DegenerateBank => FailureClass::Input,
            _ => FailureClass::Assertion,
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            FailureClass::Assertion => 1,
            FailureClass::Input => 2,
            FailureClass::NonConvergence => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &str, measured: f64, tolerance: f64) -> Check {
    Check { name: name.to_string(), measured, tolerance, passed: measured.is_finite() && measured <= tolerance }
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    pub data: serde_json::Value,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub metric_signature: &'static str,
    pub fourier_sign: &'static str,
    pub hbar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub smeared: &'static str,
    pub schema: u32,
    pub generator: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub conventions: Conventions,
    pub versions: Versions,
    pub passed: bool,
    pub tasks: Vec<TaskReport>,
}

impl Report {
    pub fn new(scenario: &str, hbar: f64, tasks: Vec<TaskReport>) -> Self {
        Report {
            scenario: scenario.to_string(),
            conventions: Conventions {
                metric_signature: smeared_core::METRIC_CONVENTION,
                fourier_sign: smeared_core::FOURIER_CONVENTION,
                hbar,
            },
            versions: Versions { smeared: env!("CARGO_PKG_VERSION"), schema: crate::scenario::SCHEMA_VERSION, generator: GENERATOR_VERSION },
            passed: tasks.iter().all(|t| t.passed),
            tasks,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.tasks
            .iter()
            .filter(|t| !t.passed)
            .map(|t| t.failure.unwrap_or(FailureClass::Assertion))
            .max()
            .map_or(0, FailureClass::exit_code)
    }
}

/// Output of one task before it is written out.
pub struct TaskOutput {
    pub report: TaskReport,
    pub csv: Option<String>,
}

struct Body {
    checks: Vec<Check>,
    data: serde_json::Value,
    csv: Option<String>,
}

pub fn run_task(l: &Loaded, task: &TaskConfig, index: usize, seed: u64) -> TaskOutput {
    let start = Instant::now();
    let name = task.label(index);
    let body = match task {
        TaskConfig::Gram { members, sheet, .. } => gram(l, members, &sheet.sheets()),
        TaskConfig::CausalityScan { f, g, max_separation, steps, .. } => causality_scan(l, f, g.as_deref().unwrap_or(f), *max_separation, *steps),
        TaskConfig::Commutators { members, alphas, betas, cutoff, .. } => {
            commutators(l, members, alphas, betas, cutoff.unwrap_or(l.scenario.fock.cutoff))
        }
        TaskConfig::Charfn { function, observable, alpha, beta, state, lambda_max, points, cutoff, normalize, .. } => charfn(
            l,
            function,
            *normalize,
            *observable,
            (*alpha, *beta),
            state,
            &lambda_grid(*points, *lambda_max),
            cutoff.unwrap_or(l.scenario.fock.cutoff),
        ),
        TaskConfig::GibbsSweep { function, mus, nus, alpha, beta, law, lambda_max, points, .. } => {
            gibbs_sweep(l, function, mus, nus, (*alpha, *beta), *law, &lambda_grid(*points, *lambda_max))
        }
        TaskConfig::FluctuationRegimes { f, g, alphas, betas, .. } => fluctuation_regimes(l, f, g, alphas, betas),
        TaskConfig::Sample { members, source, count, seed: s, .. } => sample(l, members, source, *count, s.unwrap_or(seed)),
        TaskConfig::Convolution { function, excitation, lambda_max, points, cutoff, .. } => convolution(
            l,
            function,
            excitation.as_deref(),
            &lambda_grid(*points, *lambda_max),
            cutoff.unwrap_or(l.scenario.fock.cutoff),
        ),
    };
    let seconds = start.elapsed().as_secs_f64();
    let csv_name = format!("{name}.csv");
    match body {
        Ok(b) => TaskOutput {
            report: TaskReport {
                passed: b.checks.iter().all(|c| c.passed),
                failure: if b.checks.iter().all(|c| c.passed) { None } else { Some(FailureClass::Assertion) },
                name,
                kind: task.kind().to_string(),
                checks: b.checks,
                error: None,
                csv: b.csv.as_ref().map(|_| csv_name),
                data: b.data,
                seconds,
            },
            csv: b.csv,
        },
        Err(e) => TaskOutput {
            report: TaskReport {
                name,
                kind: task.kind().to_string(),
                passed: false,
                checks: Vec::new(),
                error: Some(e.to_string()),
                failure: Some(FailureClass::of(&e)),
                csv: None,
                data: serde_json::Value::Null,
                seconds,
            },
            csv: None,
        },
    }
}

type TaskResult = smeared_core::Result<Body>;

fn gram(l: &Loaded, members: &[String], sheets: &[Sheet]) -> TaskResult {
    let funcs = l.functions(members);
    let quad = l.quadrature(&funcs)?;
    let mut checks = Vec::new();
    let mut data = serde_json::Map::new();
    let mut csv = String::from("sheet,row,col,re,im,error\n");
    for &sheet in sheets {
        let g = gram_matrix(&funcs, members, &quad.with_sheet(sheet))?;
        let ev = g.eigenvalues();
        let lmax = ev.iter().cloned().fold(0.0, f64::max);
        let label = if sheet.is_positive() { "positive" } else { "negative" };
        let worst = if lmax > 0.0 { (-ev[0] / lmax).max(0.0) } else { 0.0 };
        checks.push(check(&format!("psd-{label}"), worst, PSD_SLACK));
        checks.push(check(&format!("hermiticity-{label}"), g.hermiticity_defect, HERMITICITY_DEFECT_BOUND));
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                let z = g.entries[(i, j)];
                let _ = writeln!(csv, "{label},{},{},{:e},{:e},{:e}", members[i], members[j], z.re, z.im, g.errors[(i, j)]);
            }
        }
        data.insert(label.to_string(), json!({ "gram": g.to_json(), "eigenvalues": ev }));
    }
    Ok(Body { checks, data: serde_json::Value::Object(data), csv: Some(csv) })
}

fn separation_label(f: &TestFunction, g: &TestFunction) -> &'static str {
    match (f.probe_region(), g.probe_region()) {
        (Some(a), Some(b)) => match causal_separation(&a, &b) {
            Separation::Spacelike => "spacelike",
            Separation::NonSpacelike => "non-spacelike",
        },
        _ => "unknown",
    }
}

fn causality_scan(l: &Loaded, f: &str, g: &str, max: f64, steps: usize) -> TaskResult {
    let (f, g) = (l.function(f), l.function(g));
    let quad = l.quadrature(&[f.clone(), g.clone()])?;
    let mut csv = String::from("direction,separation,abs_c,error,supports\n");
    let mut last = (0.0, 0.0, "unknown");
    for i in 0..=steps {
        let s = max * i as f64 / steps as f64;
        for (dir, delta) in [("spatial", FourVector::new(0.0, 0.0, 0.0, s)), ("timelike", timelike_offset(s))] {
            let moved = g.translate(delta);
            let c = commutator_functional(f, &moved, &quad)?;
            let sep = separation_label(f, &moved);
            let _ = writeln!(csv, "{dir},{s},{:e},{:e},{sep}", c.value.norm(), c.error_estimate);
            if i == steps {
                if dir == "spatial" {
                    last.0 = c.value.norm();
                    last.2 = sep;
                } else {
                    last.1 = c.value.norm();
                }
            }
        }
    }
    let mut checks = Vec::new();
    let ratio = last.0 / last.1.max(f64::MIN_POSITIVE);
    if last.2 == "spacelike" {
        checks.push(check("spacelike-ratio", ratio, tolerance::MICROCAUSALITY));
    }
    Ok(Body {
        checks,
        data: json!({ "max_separation": max, "spatial_abs_c": last.0, "timelike_abs_c": last.1, "ratio": ratio, "supports_at_max": last.2 }),
        csv: Some(csv),
    })
}

fn two_sector_bases(l: &Loaded, a_bank: &[TestFunction], b_bank: &[TestFunction]) -> smeared_core::Result<(ModeBasis, ModeBasis)> {
    let mut all = a_bank.to_vec();
    all.extend_from_slice(b_bank);
    let quad = l.quadrature(&all)?;
    let names = |n: usize| (0..n).map(|i| format!("m{i}")).collect::<Vec<_>>();
    Ok((
        build_mode_basis(a_bank, &names(a_bank.len()), Sector::A, &quad)?,
        build_mode_basis(b_bank, &names(b_bank.len()), Sector::B, &quad)?,
    ))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn commutators(l: &Loaded, members: &[String], alphas: &[f64], betas: &[f64], n: usize) -> TaskResult {
    let funcs = l.functions(members);
    let (ba, bb) = two_sector_bases(l, &funcs, &funcs)?;
    let space = FockSpace::new(ba.modes(), bb.modes(), n)?;
    let quad = ba.quadrature().clone();
    let mut csv = String::from("identity,f,g,alpha,beta,relative_residual\n");
    let (mut ccr, mut eq4, mut eq5): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let phis: Vec<OperatorMatrix> =
        funcs.iter().map(|f| Ok(observable(&ObservableSpec::phi(f.clone())?, &ba, None, &space)?.operator)).collect::<smeared_core::Result<_>>()?;
    for i in 0..funcs.len() {
        for j in 0..funcs.len() {
            let (f, g) = (&funcs[i], &funcs[j]);
            for (basis, sheet) in [(&ba, Sheet::Positive), (&bb, Sheet::Negative)] {
                let a = ladder_operator(basis, f, LadderKind::Annihilate, &space)?;
                let ad = ladder_operator(basis, g, LadderKind::Create, &space)?;
                let expected = pair(g, f, &quad.with_sheet(sheet))?.value;
                let r = commutator(&a, &ad)?.sub(&OperatorMatrix::identity(&space).scale(expected))?.restricted_norm() / expected.norm().max(f64::MIN_POSITIVE);
                ccr = ccr.max(r);
                let label = if sheet.is_positive() { "ccr-a" } else { "ccr-b" };
                let _ = writeln!(csv, "{label},{},{},,,{r:e}", members[i], members[j]);
            }
            if j <= i {
                continue;
            }
            let phi_comm = commutator(&phis[i], &phis[j])?;
            let scale0 = phis[i].norm_bound() * phis[j].norm_bound();
            for &alpha in alphas {
                for &beta in betas {
                    let xf = observable(&ObservableSpec::xi(f.clone(), alpha, beta)?, &ba, Some(&bb), &space)?;
                    let xg = observable(&ObservableSpec::xi(g.clone(), alpha, beta)?, &ba, Some(&bb), &space)?;
                    let comm = commutator(&xf.operator, &xg.operator)?;
                    if alpha == 1.0 && beta == 1.0 {
                        let r = comm.restricted_norm() / (xf.operator.norm_bound() * xg.operator.norm_bound());
                        eq4 = eq4.max(r);
                        let _ = writeln!(csv, "chi,{},{},1,1,{r:e}", members[i], members[j]);
                    }
                    let target = phi_comm.scale(c(alpha * alpha - beta * beta));
                    let scale = (alpha * alpha + beta * beta).max(1.0) * scale0;
                    let r = comm.sub(&target)?.restricted_norm() / scale;
                    eq5 = eq5.max(r);
                    let _ = writeln!(csv, "xi,{},{},{alpha},{beta},{r:e}", members[i], members[j]);
                }
            }
        }
    }
    let mut checks = vec![check("ccr", ccr, tolerance::CCR), check("xi-scaling", eq5, tolerance::EQ5)];
    if alphas.contains(&1.0) && betas.contains(&1.0) && funcs.len() > 1 {
        checks.push(check("chi-commute", eq4, tolerance::EQ4));
    }
    Ok(Body { checks, data: json!({ "cutoff": n, "dimension": space.dim(), "modes": [ba.modes(), bb.modes()] }), csv: Some(csv) })
}

#[allow(clippy::too_many_arguments)]
fn charfn(
    l: &Loaded,
    function: &str,
    unit: bool,
    choice: ObservableChoice,
    (alpha, beta): (f64, f64),
    state: &StateConfig,
    lambdas: &[f64],
    cutoff: usize,
) -> TaskResult {
    let mut f = l.function(function).clone();
    if unit {
        f = normalize(&f, &l.quadrature(std::slice::from_ref(&f))?)?;
    }
    let spec = match choice {
        ObservableChoice::Phi => ObservableSpec::phi(f.clone())?,
        ObservableChoice::Chi => ObservableSpec::chi(f.clone())?,
        ObservableChoice::Xi => ObservableSpec::xi(f.clone(), alpha, beta)?,
    };
    let mut a_bank = vec![f.clone()];
    let excitation = match state {
        StateConfig::OneQuantum { function } => {
            let h = l.function(function);
            let q = l.quadrature(&[f.clone(), h.clone()])?;
            let h = normalize(h, &q)?;
            a_bank.push(h.clone());
            Some(h)
        }
        _ => None,
    };
    let needs_b = spec.beta != 0.0 || matches!(state, StateConfig::Gibbs { .. });
    let (ba, bb) = two_sector_bases(l, &a_bank, &[f.clone()])?;
    let mb = if needs_b { bb.modes() } else { 0 };
    let gibbs = match state {
        StateConfig::Gibbs { mu, nu } => Some(GibbsSpec::new(*mu, *nu)?),
        _ => None,
    };
    let n = match &gibbs {
        Some(g) => cutoff.max(gibbs_cutoff(g, ba.modes() + mb)),
        None => cutoff,
    };
    let space = FockSpace::new(ba.modes(), mb, n)?;
    let obs = observable(&spec, &ba, needs_b.then_some(&bb), &space)?;
    let prepared = match state {
        StateConfig::Vacuum => PreparedState::Vector(StateVector::vacuum(&space)),
        StateConfig::OneQuantum { .. } => state_prepare(StateKind::SingleQuantum, excitation.as_ref(), &ba, &space)?,
        StateConfig::Gibbs { .. } => PreparedState::Gibbs(gibbs_weight(gibbs.as_ref().expect("gibbs state"), &space)?),
    };
    let numeric = characteristic_function(
        &prepared,
        &obs,
        &CharacteristicQuery::new(lambdas.to_vec(), CharacteristicMethod::MatrixExponential)?,
        &space,
    )?;
    let analytic = characteristic_function(&prepared, &obs, &CharacteristicQuery::new(lambdas.to_vec(), CharacteristicMethod::AnalyticGaussian)?, &space).ok();
    let mut csv = String::from("lambda,numeric_re,numeric_im,analytic\n");
    let mut worst: f64 = 0.0;
    for (i, l) in lambdas.iter().enumerate() {
        let a = analytic.as_ref().map(|a| a[i].re);
        if let Some(a) = a {
            worst = worst.max((numeric[i] - c(a)).norm());
        }
        let _ = writeln!(csv, "{l},{:e},{:e},{}", numeric[i].re, numeric[i].im, a.map_or(String::new(), |a| format!("{a:e}")));
    }
    let mut checks = Vec::new();
    if let Some(i) = lambdas.iter().position(|&x| x == 0.0) {
        checks.push(check("unit-at-zero", (numeric[i] - c(1.0)).norm(), 1e-12));
    }
    if analytic.is_some() {
        checks.push(check("gaussian", worst, tolerance::VACUUM_CHARFN));
    }
    Ok(Body { checks, data: json!({ "cutoff": n, "dimension": space.dim(), "vacuum_variance": obs.vacuum_variance() }), csv: Some(csv) })
}

fn gibbs_sweep(l: &Loaded, function: &str, mus: &[f64], nus: &[f64], (alpha, beta): (f64, f64), law: CothLaw, lambdas: &[f64]) -> TaskResult {
    let raw = l.function(function);
    let q = l.quadrature(std::slice::from_ref(raw))?;
    let f = normalize(raw, &q)?;
    let (ba, bb) = two_sector_bases(l, std::slice::from_ref(&f), std::slice::from_ref(&f))?;
    let specs: Vec<GibbsSpec> = mus.iter().flat_map(|&m| nus.iter().map(move |&n| GibbsSpec::new(m, n))).collect::<smeared_core::Result<_>>()?;
    let n = specs.iter().map(|s| gibbs_cutoff(s, 2)).max().expect("validated nonempty");
    let space = FockSpace::new(1, 1, n)?;
    let xi = observable(&ObservableSpec::xi(f.clone(), alpha, beta)?, &ba, Some(&bb), &space)?;
    let vac = xi.vacuum_variance();
    let diag = DiagonalExponentials::compute(&xi.operator, lambdas, |_| true)?;
    let mut csv = String::from("mu,nu,fitted_multiplier,half_argument_law,stated_law\n");
    let (mut dev_half, mut dev_stated): (f64, f64) = (0.0, 0.0);
    let mut fitted = Vec::new();
    for s in &specs {
        let state = gibbs_weight(s, &space)?;
        let m = fit_gaussian_variance(lambdas, &diag.trace_with(&state.weights, lambdas.len())) / vac;
        let half = alpha * alpha * variance_multiplier(s.mu) + beta * beta * variance_multiplier(s.nu);
        let stated = stated_coth_multiplier(alpha, beta, s.mu, s.nu);
        dev_half = dev_half.max((m - half).abs() / half);
        dev_stated = dev_stated.max((m - stated).abs() / stated);
        fitted.push((s.mu, s.nu, m));
        let _ = writeln!(csv, "{},{},{m:.12},{half:.12},{stated:.12}", s.mu, s.nu);
    }
    let mut violations = 0usize;
    for &nu in nus {
        let mut row: Vec<(f64, f64)> = fitted.iter().filter(|t| t.1 == nu).map(|t| (t.0, t.2)).collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        violations += row.windows(2).filter(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1).count();
    }
    let deviation = match law {
        CothLaw::HalfArgument => dev_half,
        CothLaw::Stated => dev_stated,
    };
    Ok(Body {
        checks: vec![check("coth-law", deviation, tolerance::COTH_LAW), check("monotone-in-mu", violations as f64, 0.0)],
        data: json!({ "cutoff": n, "law": law, "half_argument_deviation": dev_half, "stated_law_deviation": dev_stated }),
        csv: Some(csv),
    })
}

fn fluctuation_regimes(l: &Loaded, f: &str, g: &str, alphas: &[f64], betas: &[f64]) -> TaskResult {
    let (f, g) = (l.function(f).clone(), l.function(g).clone());
    let bank = vec![f.clone(), g.clone()];
    let (ba, bb) = two_sector_bases(l, &bank, &bank)?;
    let space = FockSpace::new(ba.modes(), bb.modes(), l.scenario.fock.cutoff)?;
    let phi_f = observable(&ObservableSpec::phi(f.clone())?, &ba, None, &space)?.operator;
    let phi_g = observable(&ObservableSpec::phi(g.clone())?, &ba, None, &space)?.operator;
    let scale0 = phi_f.norm_bound() * phi_g.norm_bound();
    let vacuum = StateVector::vacuum(&space);
    let mut csv = String::from("alpha,beta,regime,commutator_norm,vacuum_variance,model_variance\n");
    let (mut compensated, mut variance_err): (f64, f64) = (0.0, 0.0);
    for &alpha in alphas {
        for &beta in betas {
            let xf = observable(&ObservableSpec::xi(f.clone(), alpha, beta)?, &ba, Some(&bb), &space)?;
            let xg = observable(&ObservableSpec::xi(g.clone(), alpha, beta)?, &ba, Some(&bb), &space)?;
            let comm = commutator(&xf.operator, &xg.operator)?.restricted_norm() / ((alpha * alpha + beta * beta).max(1.0) * scale0);
            let var = vacuum.expectation(&xf.operator.product(&xf.operator)?).re;
            let model = xf.vacuum_variance();
            let regime = if alpha.abs() == beta.abs() {
                "compensated"
            } else if alpha.abs() > beta.abs() {
                "positive-dominated"
            } else {
                "negative-dominated"
            };
            if regime == "compensated" {
                compensated = compensated.max(comm);
            }
            if model > 0.0 {
                variance_err = variance_err.max((var - model).abs() / model);
            }
            let _ = writeln!(csv, "{alpha},{beta},{regime},{comm:e},{var:e},{model:e}");
        }
    }
    Ok(Body {
        checks: vec![check("compensated-commutator", compensated, tolerance::EQ5_COMPENSATED), check("vacuum-variance", variance_err, tolerance::EQ5_VARIANCE)],
        data: json!({ "cutoff": l.scenario.fock.cutoff }),
        csv: Some(csv),
    })
}

fn sample(l: &Loaded, members: &[String], source: &SourceConfig, count: usize, seed: u64) -> TaskResult {
    let funcs = l.functions(members);
    let quad = l.quadrature(&funcs)?;
    let src = match source {
        SourceConfig::Vacuum => CovarianceSource::Vacuum,
        SourceConfig::Gibbs { mu, nu } => CovarianceSource::Gibbs { mu: *mu, nu: *nu },
    };
    let model = covariance(&funcs, members, src, &quad)?;
    let batch = sample_batch(&model, count, seed)?;
    let mut worst: f64 = 0.0;
    for i in 0..model.dim() {
        for j in 0..model.dim() {
            worst = worst.max((batch.empirical_covariance[(i, j)] - model.matrix[(i, j)]).abs() / batch.standard_errors[(i, j)]);
        }
    }
    let mut buf = Vec::new();
    batch.write_csv(&mut buf, members).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(Body {
        checks: vec![check("covariance-within-jackknife", worst, tolerance::SAMPLER_SIGMAS)],
        data: json!({ "model": model.to_json(), "batch": batch }),
        csv: Some(String::from_utf8(buf).expect("CSV is UTF-8")),
    })
}

fn convolution(l: &Loaded, function: &str, excitation: Option<&str>, lambdas: &[f64], n: usize) -> TaskResult {
    let f = l.function(function).clone();
    let mut a_bank = vec![f.clone()];
    let h = match excitation {
        Some(name) => {
            let q = l.quadrature(&[f.clone(), l.function(name).clone()])?;
            let h = normalize(l.function(name), &q)?;
            a_bank.push(h.clone());
            Some(h)
        }
        None => None,
    };
    let (ba, bb) = two_sector_bases(l, &a_bank, std::slice::from_ref(&f))?;
    let space = FockSpace::new(ba.modes(), bb.modes(), n)?;
    let chi = observable(&ObservableSpec::chi(f.clone())?, &ba, Some(&bb), &space)?;
    let phi = observable(&ObservableSpec::phi(f.clone())?, &ba, Some(&bb), &space)?;
    let mut states = vec![("vacuum", StateVector::vacuum(&space))];
    if let Some(h) = &h {
        if let PreparedState::Vector(v) = state_prepare(StateKind::SingleQuantum, Some(h), &ba, &space)? {
            states.push(("one-quantum", v));
        }
    }
    let mut csv = String::from("state,lambda,chi_re,chi_im,phi_re,phi_im\n");
    let mut worst: f64 = 0.0;
    let mut smoothing = 0.0;
    for (label, st) in &states {
        let r = convolution_check(st, &chi, &phi, &space, lambdas)?;
        worst = worst.max(r.max_difference);
        smoothing = r.smoothing_variance;
        for (i, x) in lambdas.iter().enumerate() {
            let _ = writeln!(csv, "{label},{x},{:e},{:e},{:e},{:e}", r.chi[i].re, r.chi[i].im, r.phi[i].re, r.phi[i].im);
        }
    }
    Ok(Body {
        checks: vec![check("convolution", worst, tolerance::CONVOLUTION)],
        data: json!({ "cutoff": n, "smoothing_variance": smoothing }),
        csv: Some(csv),
    })
}
