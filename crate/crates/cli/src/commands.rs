//! One function per subcommand. Each reads the effective config, runs the
//! library, and writes its artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dunkl_core::dunklsim::{
    phase_sweep, reconstruct, simulate_dunkl, spread_start, unit_spaced_start,
};
use dunkl_core::freezing::spinchain::{
    verify_exchange_identity, verify_ladder_commutators, verify_ladder_shift,
    verify_ladder_subspace, MAX_CHAIN_N, MAX_TWO_SITE_N,
};
use dunkl_core::freezing::{
    fixed_point_defect, frozen_rate_table, frozen_rates, hermite_zeros, peak_vector, pf_spectrum,
    MAX_PF_N,
};
use dunkl_core::jumprates::{
    estimate_rates_from, estimate_rates_origin, RateCache, RateSampler, RateTable,
};
use dunkl_core::mastereq::{
    self, build_master, delta, fit_relaxation_exponent, log_grid, simulate_chain, solve_power_law,
    SpectrumResult,
};
use dunkl_core::perturb::{
    ctilde_table, extrapolate_r1, perturbation_report, predict_vs_measured, Method,
    PerturbationReport, Variant,
};
use dunkl_core::radialsde::{calibration_target, default_dt, sample_static, second_moment};
use dunkl_core::rng::derive_seed;
use dunkl_core::weylgroup::{checked_order, enumerate, DEFAULT_ORDER_CAP};
use dunkl_core::{build_root_system, Family, Multiplicities, RootSystem};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::SimConfig;
use crate::error::CliError;
use crate::output::{num, write_csv, write_json, Header};

pub const DEFAULT_CACHE_DIR: &str = ".dunkl-cache";
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_PAIRS: usize = 1 << 17;

type Res<T> = Result<T, CliError>;

pub struct Context {
    pub config: SimConfig,
    cache: Option<RateCache>,
}

impl Context {
    pub fn new(config: SimConfig, no_cache: bool) -> Self {
        let cache = (!no_cache).then(|| {
            let fallback = config
                .cache_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
            RateCache::from_env(fallback)
        });
        Context { config, cache }
    }

    fn header(&self) -> Header {
        Header::new(
            self.config.experiment.kind.as_deref().unwrap_or("unknown"),
            &self.config,
        )
    }

    fn out(&self, default: &str) -> PathBuf {
        self.config
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(default))
    }

    fn cached<F>(&self, request: Value, compute: F) -> Res<RateTable>
    where
        F: FnOnce() -> dunkl_core::Result<RateTable>,
    {
        match &self.cache {
            Some(c) => Ok(c.get_or_compute(&request, compute)?),
            None => Ok(compute()?),
        }
    }

    fn samples(&self) -> usize {
        self.config.sampling.nsamples.unwrap_or(DEFAULT_SAMPLES)
    }

    /// Origin rates from the static law, shared by `rates`, `spectrum` and `relax`.
    fn origin_rates(&self, r: &RootSystem<f64>) -> Res<RateTable> {
        let (n, seed) = (self.samples(), self.config.seed()?);
        let request =
            json!({"kind": "rates-origin", "system": r.spec(), "nsamples": n, "seed": seed});
        self.cached(request, || estimate_rates_origin(r, n, seed))
    }
}

fn unit_system(family: Family, n: usize, beta: f64) -> Res<RootSystem<f64>> {
    Ok(build_root_system(family, n, beta, &Multiplicities::unit())?)
}

fn labels(r: &RootSystem<f64>, values: &[f64]) -> BTreeMap<String, f64> {
    r.positive_roots
        .iter()
        .zip(values)
        .map(|(a, &v)| (a.label(), v))
        .collect()
}

fn read_rates(path: &Path) -> Res<RateTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let t: RateTable = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    t.validate()?;
    Ok(t)
}

/// Rates for `spectrum` and `relax`: a file, the frozen limit, or Monte Carlo.
fn rate_source(ctx: &Context) -> Res<(RateTable, RootSystem<f64>)> {
    let c = &ctx.config;
    if let Some(path) = c.param::<PathBuf>("rates")? {
        let t = read_rates(&path)?;
        let r = t.spec().build::<f64>()?;
        return Ok((t, r));
    }
    if c.param::<bool>("frozen")?.unwrap_or(false) {
        let r = unit_system(c.family()?, c.n()?, c.system.beta.unwrap_or(2.0))?;
        let peak = peak_vector(&r)?;
        return Ok((frozen_rate_table(&r, &peak), r));
    }
    let r = c.system_spec()?.build::<f64>()?;
    Ok((ctx.origin_rates(&r)?, r))
}

fn master_spectrum(table: &RateTable, r: &RootSystem<f64>) -> Res<SpectrumResult> {
    let g = enumerate(r)?;
    let m = build_master(table, &g)?;
    Ok(mastereq::spectrum(&m))
}

pub fn simulate(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let spec = c.system_spec()?;
    let r = spec.build::<f64>()?;
    let t_end = c.sampling.t_end.unwrap_or(1.0);
    let dt = c.sampling.dt.unwrap_or_else(|| default_dt(spec.beta));
    let stride = c.param::<usize>("stride")?.unwrap_or(1);
    let x0 = match (c.param::<Vec<f64>>("x0")?, c.param::<f64>("radius")?) {
        (Some(x), _) => x,
        (None, Some(radius)) => spread_start(spec.family, spec.n, radius),
        (None, None) => unit_spaced_start(spec.family, spec.n),
    };
    let (path, traj) = simulate_dunkl(&r, &x0, t_end, dt, c.seed()?, stride)?;
    let full = reconstruct(&path, &traj, spec.family);
    let dir = ctx.out(".");
    let mut header = ctx.header();
    header.note("events", traj.count());

    let mut cols = vec!["t".to_string()];
    cols.extend((1..=spec.n).map(|i| format!("x_{i}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = path
        .times
        .iter()
        .zip(&full)
        .map(|(&t, x)| {
            std::iter::once(num(t))
                .chain(x.iter().map(|&v| num(v)))
                .collect()
        })
        .collect();
    write_csv(&dir.join("paths.csv"), &header, &cols, &rows)?;

    let rows: Vec<Vec<String>> = traj
        .events
        .iter()
        .map(|e| {
            let code = &r.positive_roots[e.root].code;
            let (i, j) = match code.as_slice() {
                &[i] => (0, i),
                &[j, i] if spec.family == Family::A => (-i, j),
                &[j, i] => (i, j),
                _ => unreachable!(),
            };
            vec![
                num(e.t),
                i.to_string(),
                j.to_string(),
                e.group_index.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("trajectory.csv"),
        &header,
        &["t", "event_root_i", "event_root_j", "group_index"],
        &rows,
    )?;
    println!("{} jumps on [0, {t_end}]", traj.count());
    Ok(())
}

pub fn rates(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let spec = c.system_spec()?;
    let r = spec.build::<f64>()?;
    let origin = c
        .param::<Vec<f64>>("origin")?
        .filter(|y| y.iter().any(|&v| v != 0.0));
    let table = match origin {
        None => ctx.origin_rates(&r)?,
        Some(y) => {
            let t_ref = c.param::<f64>("t_ref")?.unwrap_or(1.0);
            let replicas = c.sampling.replicas.unwrap_or(10_000);
            let dt = c.sampling.dt.unwrap_or_else(|| default_dt(spec.beta));
            let seed = c.seed()?;
            let request = json!({
                "kind": "rates-from", "system": spec, "origin": y, "t_ref": t_ref,
                "replicas": replicas, "dt": dt, "seed": seed,
            });
            ctx.cached(request, || {
                estimate_rates_from(&r, &y, t_ref, replicas, dt, seed)
            })?
        }
    };
    table.validate()?;
    write_json(&ctx.out("rates.json"), &ctx.header(), &table)?;
    match table.total_closed_form {
        Some(cf) => println!(
            "total {} ± {} (closed form {cf})",
            table.total, table.total_stderr
        ),
        None => println!("total {} ± {}", table.total, table.total_stderr),
    }
    Ok(())
}

/// Exact relaxation from `P0 = δ_start` on a log grid.
fn power_law_series(
    s: &SpectrumResult,
    start: usize,
    times: &[f64],
    t0: f64,
) -> Res<Vec<Vec<f64>>> {
    let p0 = delta(s.dim(), start);
    times
        .iter()
        .map(|&t| Ok(solve_power_law(s, &p0, t0, t)?))
        .collect()
}

fn relax_rows(times: &[f64], emp: Option<&[Vec<f64>]>, theory: &[Vec<f64>]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for (tau, &p) in theory[i].iter().enumerate() {
            let e = emp.map_or(f64::NAN, |e| e[i][tau]);
            rows.push(vec![num(t), tau.to_string(), num(e), num(p)]);
        }
    }
    rows
}

const RELAX_COLUMNS: [&str; 4] = ["t", "tau_index", "p_emp", "p_theory"];

pub fn spectrum(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let (table, r) = rate_source(ctx)?;
    let s = master_spectrum(&table, &r)?;
    let mut header = ctx.header();
    header.note("lambda", num(s.lambda));
    header.note("r1", s.r1().map_or("none".into(), num));
    header.note("kernel_dimension", s.kernel_dimension());
    header.note("symmetry_deviation", num(s.symmetry_deviation()));
    let rows: Vec<Vec<String>> = s
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), num(v), s.group_of[i].to_string()])
        .collect();
    write_csv(
        &ctx.out("spectrum.csv"),
        &header,
        &["index", "eigenvalue", "multiplicity_group"],
        &rows,
    )?;
    if let Some(path) = c.param::<PathBuf>("relax_out")? {
        let t0 = c.sampling.t0.unwrap_or(1.0);
        let times = log_grid(
            t0,
            t0 * c.param::<f64>("t_max_ratio")?.unwrap_or(1e2),
            c.param("points")?.unwrap_or(25),
        );
        let theory = power_law_series(&s, 0, &times, t0)?;
        write_csv(
            &path,
            &ctx.header(),
            &RELAX_COLUMNS,
            &relax_rows(&times, None, &theory),
        )?;
    }
    for g in &s.groups {
        println!("{} x{}", num(g.value), g.multiplicity);
    }
    Ok(())
}

pub fn relax(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let (table, r) = rate_source(ctx)?;
    let g = enumerate(&r)?;
    let m = build_master(&table, &g)?;
    let s = mastereq::spectrum(&m);
    let start = c.param::<usize>("start")?.unwrap_or(0);
    if start >= m.dim() {
        return Err(CliError::Config(format!(
            "start {start} outside the group of order {}",
            m.dim()
        )));
    }
    let t0 = c.sampling.t0.unwrap_or(1.0);
    let ratio = c.param::<f64>("t_max_ratio")?.unwrap_or(1e2);
    let times = log_grid(t0, t0 * ratio, c.param("points")?.unwrap_or(25));
    let tail = c.param::<f64>("tail")?.unwrap_or(0.5);
    let replicas = c.sampling.replicas.unwrap_or(100_000);
    let chain = simulate_chain(
        &m,
        &delta(m.dim(), start),
        t0,
        &times,
        replicas,
        derive_seed(c.seed()?, "chain"),
    )?;
    let theory = power_law_series(&s, start, &times, t0)?;
    let fit_theory = fit_relaxation_exponent(&times, &theory, tail)?;
    let mut header = ctx.header();
    header.note("r1", s.r1().map_or("none".into(), num));
    header.note("fit_exponent_theory", num(fit_theory.exponent));
    header.note("fit_stderr_theory", num(fit_theory.stderr));
    header.note("fit_constant_theory", num(fit_theory.constant));
    match fit_relaxation_exponent(&times, &chain.empirical, tail) {
        Ok(f) => {
            header.note("fit_exponent_empirical", num(f.exponent));
            header.note("fit_stderr_empirical", num(f.stderr));
            println!("empirical exponent {} ± {}", f.exponent, f.ci95);
        }
        Err(e) => header.note("fit_exponent_empirical", format!("unavailable ({e})")),
    }
    write_csv(
        &ctx.out("relax.csv"),
        &header,
        &RELAX_COLUMNS,
        &relax_rows(&times, Some(&chain.empirical), &theory),
    )?;
    println!(
        "theory exponent {} (r1 = {:?})",
        fit_theory.exponent,
        s.r1()
    );
    Ok(())
}

pub fn phase(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let family = c.family()?;
    let beta = c.beta()?;
    let n_min = c.param::<usize>("n_min")?.unwrap_or(match family {
        Family::A => 2,
        Family::B => 1,
    });
    let n_max = c.param::<usize>("n_max")?.unwrap_or(20);
    if n_max < n_min {
        return Err(CliError::Config(format!(
            "n_max = {n_max} < n_min = {n_min}"
        )));
    }
    let ns: Vec<usize> = (n_min..=n_max).collect();
    let mode = c
        .param::<String>("mode")?
        .unwrap_or_else(|| "closed_form".into());
    let rows = match mode.as_str() {
        "closed_form" => phase_sweep(family, &ns, beta, None)?,
        "simulate" => {
            let radius = c.param::<f64>("radius")?.unwrap_or(1.0);
            let x0_for = move |n: usize| spread_start(family, n, radius);
            let replicas = c.sampling.replicas.unwrap_or(1000);
            let dt = c.sampling.dt.unwrap_or_else(|| default_dt(beta));
            phase_sweep(family, &ns, beta, Some((&x0_for, replicas, dt, c.seed()?)))?
        }
        other => return Err(CliError::Config(format!("unknown phase mode {other:?}"))),
    };
    let out: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                row.n.to_string(),
                num(row.beta),
                num(row.rate_per_particle),
                num(row.theory),
                row.mode.clone(),
            ]
        })
        .collect();
    write_csv(
        &ctx.out("phase.csv"),
        &ctx.header(),
        &["N", "beta", "rate_per_particle", "theory", "mode"],
        &out,
    )?;
    if let Some(last) = rows.last() {
        println!(
            "N = {}: {} per particle (limit {})",
            last.n, last.rate_per_particle, last.theory
        );
    }
    Ok(())
}

pub fn freeze(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let (family, n) = (c.family()?, c.n()?);
    let r = build_root_system(
        family,
        n,
        c.system.beta.unwrap_or(2.0),
        &c.system.k.clone().unwrap_or_default(),
    )?;
    let peak = peak_vector(&r)?;
    let rates = frozen_rates(&r, &peak.z);
    let fixed_point = fixed_point_defect(&r, &peak.z)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut body = json!({
        "family": family,
        "N": n,
        "z": peak.z,
        "residual": peak.residual,
        "iterations": peak.iterations,
        "fixed_point_defect": fixed_point,
        "frozen_rates": labels(&r, &rates),
        "frozen_total_rate": rates.iter().sum::<f64>(),
        "pf_spectrum": Value::Null,
        "verifications": Value::Null,
    });
    let pf = match family {
        Family::A if n <= MAX_PF_N && r.has_unit_multiplicities() => {
            Some(serde_json::to_value(pf_spectrum(n)?).unwrap())
        }
        _ if checked_order(family, n).is_some_and(|o| o <= DEFAULT_ORDER_CAP) => {
            let s = master_spectrum(&frozen_rate_table(&r, &peak), &r)?;
            let half = s
                .groups
                .iter()
                .find(|g| (g.value + 0.5).abs() < 1e-9)
                .map_or(0, |g| g.multiplicity);
            Some(
                json!({"N": n, "z": peak.z, "eigenvalues": s.values, "groups": s.groups, "half_multiplicity": half}),
            )
        }
        _ => None,
    };
    if let Some(pf) = pf {
        body["pf_spectrum"] = pf;
    }
    if family == Family::A && r.has_unit_multiplicities() {
        let h = hermite_zeros(n)?;
        let hermite_dev = peak
            .z
            .iter()
            .zip(&h)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let mut v = json!({"hermite_deviation": hermite_dev});
        if n <= MAX_TWO_SITE_N {
            v["exchange_dev"] = json!(verify_exchange_identity(n)?);
        }
        if n <= MAX_CHAIN_N {
            let cases = verify_ladder_commutators(n)?;
            let worst = cases
                .iter()
                .fold(0.0f64, |m, d| m.max(d.dev_k).max(d.dev_l));
            v["commutator_dev"] = json!(worst);
            v["commutator_cases"] = json!(cases);
            let (shift, count) = verify_ladder_shift(n)?;
            v["ladder_shift"] = json!({"residual": shift, "vectors": count});
            v["subspace_report"] = json!(verify_ladder_subspace(n)?);
        }
        body["verifications"] = v;
    }
    write_json(&ctx.out("freeze.json"), &ctx.header(), &body)?;
    println!(
        "peak residual {:e}, frozen total rate {}",
        peak.residual,
        rates.iter().sum::<f64>()
    );
    if let Some(h) = body["pf_spectrum"].get("half_multiplicity") {
        println!("multiplicity of -1/2: {h}");
    }
    Ok(())
}

#[derive(Serialize)]
struct Extrapolation {
    value: f64,
    stderr: f64,
}

pub fn perturb(ctx: &Context) -> Res<()> {
    let c = &ctx.config;
    let (family, n) = (c.family()?, c.n()?);
    let r = unit_system(family, n, 2.0)?;
    let pairs = c.param::<usize>("pairs")?.unwrap_or(DEFAULT_PAIRS);
    let method = Method::auto(r.rank, pairs, c.seed.unwrap_or(0));
    if matches!(method, Method::Mc { .. }) {
        c.seed()?;
    }
    let report = perturbation_report(family, n, method)?;
    let measure = c.param::<bool>("measure")?.unwrap_or(true);
    let betas = c
        .param::<Vec<f64>>("betas")?
        .unwrap_or_else(|| vec![8.0, 16.0, 32.0, 64.0, 128.0]);
    let predictions = if measure && checked_order(family, n).is_some_and(|o| o <= DEFAULT_ORDER_CAP)
    {
        predict_vs_measured(&report, &betas, ctx.samples(), c.seed()?)?
    } else {
        Vec::new()
    };
    let extrapolated =
        extrapolate_r1(&predictions).map(|(value, stderr)| Extrapolation { value, stderr });
    let body = perturb_body(&r, &report, &predictions, extrapolated);
    write_json(&ctx.out("perturb.json"), &ctx.header(), &body)?;
    if let Some((r0, r1)) = report.r1_pair() {
        println!("r1(beta) = {r0} + {r1}/beta");
    }
    Ok(())
}

fn perturb_body(
    r: &RootSystem<f64>,
    report: &PerturbationReport,
    predictions: &[dunkl_core::perturb::PredictionRow],
    extrapolated: Option<Extrapolation>,
) -> Value {
    let (paper, corrected) = (&report.ctilde_paper, &report.ctilde_corrected);
    let pair = report.r1_pair();
    json!({
        "family": report.family,
        "N": report.n,
        "z": report.z,
        "H": report.hessian,
        "ctilde": {"paper": labels(r, &paper.values), "corrected": labels(r, &corrected.values)},
        "ctilde_stderr": {"paper": labels(r, &paper.stderrs), "corrected": labels(r, &corrected.stderrs)},
        "sum_rule_residuals": {"paper": paper.sum_rule_residual, "corrected": corrected.sum_rule_residual},
        "sum_rule_stderr": {"paper": paper.sum_rule_stderr, "corrected": corrected.sum_rule_stderr},
        "frozen_rates": labels(r, &report.frozen_rates),
        "r0": pair.map(|p| p.0),
        "r1": pair.map(|p| p.1),
        "exponents": report.exponents,
        "gamma": report.gamma,
        "r_star": report.r_star,
        "predictions": predictions,
        "extrapolated_r1": extrapolated,
    })
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(out: &mut Vec<Check>, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
    let c = Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    };
    println!(
        "{} {}: {}",
        if c.pass { "PASS" } else { "FAIL" },
        c.name,
        c.detail
    );
    out.push(c);
}

/// Fast versions of the library invariants with fixed seeds.
pub fn verify(ctx: &Context) -> Res<()> {
    let seed = ctx.config.seed.unwrap_or(1);
    let mut out = Vec::new();

    let r = unit_system(Family::A, 3, 8.0)?;
    let table = estimate_rates_origin(&r, 200_000, derive_seed(seed, "verify-rates"))?;
    let cf = 6.0 / 7.0;
    check(
        &mut out,
        "total rate A3 beta=8",
        (table.total - cf).abs() <= 4.0 * table.total_stderr,
        format!("{} ± {} vs {cf}", table.total, table.total_stderr),
    );

    for (f, n, beta) in [(Family::A, 3, 4.0), (Family::B, 2, 4.0)] {
        let rs = unit_system(f, n, beta)?;
        let s = sample_static(&rs, 100_000, derive_seed(seed, "verify-static"))?;
        let (m, se) = second_moment(&s);
        let target = calibration_target(&rs);
        check(
            &mut out,
            format!("static second moment {f}{n} beta={beta}"),
            (m - target).abs() <= 4.0 * se,
            format!("{m} ± {se} vs {target}"),
        );
    }

    let g = enumerate(&r)?;
    let m = build_master(&table, &g)?;
    let s = mastereq::spectrum(&m);
    let top = s.values[0];
    let ok = m.max_column_sum() <= 1e-12
        && m.max_asymmetry() <= 1e-12
        && s.kernel_dimension() == 1
        && top.abs() <= 1e-12
        && s.symmetry_deviation() <= 1e-10
        && s.max_residual(&m) <= 1e-10;
    check(
        &mut out,
        "master operator A3 beta=8",
        ok,
        format!(
            "column sum {:e}, asymmetry {:e}, kernel {}, symmetry {:e}, residual {:e}",
            m.max_column_sum(),
            m.max_asymmetry(),
            s.kernel_dimension(),
            s.symmetry_deviation(),
            s.max_residual(&m)
        ),
    );

    let two = unit_system(Family::A, 2, 4.0)?;
    let exact = RateTable::from_exact(&two, &[1.0 / 3.0], RateSampler::Exact);
    let s2 = master_spectrum(&exact, &two)?;
    let times = log_grid(1.0, 1e3, 25);
    let fit = fit_relaxation_exponent(&times, &power_law_series(&s2, 0, &times, 1.0)?, 0.5)?;
    check(
        &mut out,
        "two-state relaxation exponent",
        (fit.exponent + 2.0 / 3.0).abs() < 1e-9,
        format!("fit {} vs -2/3", fit.exponent),
    );

    for n in 2..=5 {
        let pf = pf_spectrum(n)?;
        check(
            &mut out,
            format!("frozen spectrum N={n}"),
            pf.half_multiplicity == n - 1,
            format!("-1/2 multiplicity {}", pf.half_multiplicity),
        );
    }

    let mut worst: f64 = 0.0;
    for n in 2..=12 {
        let peak = peak_vector(&unit_system(Family::A, n, 2.0)?)?;
        let h = hermite_zeros(n)?;
        worst = peak
            .z
            .iter()
            .zip(&h)
            .fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    check(
        &mut out,
        "peak vectors are Hermite zeros N<=12",
        worst <= 1e-10,
        format!("max deviation {worst:e}"),
    );

    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        worst = worst.max(verify_exchange_identity(n)?);
    }
    check(
        &mut out,
        "exchange identity N<=6",
        worst <= 1e-12,
        format!("max deviation {worst:e}"),
    );

    for n in 2..=3 {
        let dev = verify_ladder_commutators(n)?
            .iter()
            .fold(0.0f64, |m, d| m.max(d.dev_k).max(d.dev_l));
        check(
            &mut out,
            format!("ladder commutators N={n}"),
            dev <= 1e-10,
            format!("max deviation {dev:e}"),
        );
        let rep = verify_ladder_subspace(n)?;
        check(
            &mut out,
            format!("ladder subspace N={n}"),
            rep.valid_lowering == n - 1 && rep.rank == n - 1,
            format!("valid lowering {}, rank {}", rep.valid_lowering, rep.rank),
        );
    }

    for (f, n) in [(Family::A, 2), (Family::A, 3), (Family::B, 2)] {
        let rs = unit_system(f, n, 2.0)?;
        let z = peak_vector(&rs)?.z;
        let t = ctilde_table(&rs, &z, Variant::Corrected, Method::GaussQuadrature)?;
        let res = t.sum_rule_residual.unwrap_or(f64::NAN);
        check(
            &mut out,
            format!("sum rule {f}{n}"),
            res.abs() <= 1e-10,
            format!("residual {res:e}"),
        );
        let rep = perturbation_report(f, n, Method::GaussQuadrature)?;
        let max_r1 = rep
            .exponents
            .iter()
            .flat_map(|g| g.r1.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        check(
            &mut out,
            format!("first-order shifts {f}{n} nonpositive"),
            max_r1 <= 1e-12,
            format!("largest {max_r1:e}"),
        );
    }
    let rs = unit_system(Family::A, 2, 2.0)?;
    let z = peak_vector(&rs)?.z;
    let paper = ctilde_table(&rs, &z, Variant::Paper, Method::GaussQuadrature)?;
    let res = paper.sum_rule_residual.unwrap_or(f64::NAN);
    check(
        &mut out,
        "paper-variant residual N=2",
        (res - 5.0 / 192.0).abs() <= 1e-12,
        format!("{res} vs 5/192"),
    );

    let failed: Vec<&str> = out
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if let Some(path) = &ctx.config.output {
        write_json(
            path,
            &ctx.header(),
            &json!({"checks": out, "failed": failed}),
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}
