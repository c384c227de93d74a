//! Executes scenario suites and writes CSV tables and a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::amalgam::{check_embedding, k0_amalgam_check, partition, young_check};
use crate::commutator::{
    duhamel_check, unitary_growth_sweep, verify_binomial_expansion, verify_resolvent_recursion, DuhamelQuadrature, PositionMultiplier,
    UnitaryGroup,
};
use crate::error::{io_err, Error, Result};
use crate::exponent::Exponent;
use crate::grid::{build_domain, GridDomain, GridFunction, Potential};
use crate::kato::{kato_norm_of, validate_assumption, Threshold};
use crate::multiplier::{
    fourier_check, key_estimate_trials, multiplier_scaling, scaling_identity_check, triple_norm_growth, uniform_bound_sweep,
    verify_psi_factorization, FourierQuadrature,
};
use crate::operator::{assemble_hv, decompose, form_bound_check, form_identity_check, DiscreteOperator, SpectralDecomposition};
use crate::report::{BoundReport, Status};
use crate::resolvent::{
    laplace_check, resolvent, resolvent_bounds, resolvent_identity, resolvent_scaling, LaplaceQuadrature, ResolventSpec,
};
use crate::scalar::C64;
use crate::scenario::{Scenario, Suite};
use crate::semigroup::{
    check_domination, check_gaussian_bound, check_positivity, extract_kernel, heat_operator, kernel_slice, semigroup_law_check,
    smoothing_norms,
};
use crate::sweep::{ResolvedWindow, SweepPoint};

/// A CSV table produced by a suite.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<BoundReport>,
    pub tables: Vec<Table>,
    /// Checks that could not be computed.
    pub errors: Vec<String>,
    pub elapsed_ms: u128,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport {
            suite,
            checks: Vec::new(),
            tables: Vec::new(),
            errors: Vec::new(),
            elapsed_ms: 0,
        }
    }

    fn push(&mut self, what: &str, r: Result<BoundReport>) {
        match r {
            Ok(b) => self.checks.push(b),
            Err(e) => self.errors.push(format!("{what}: {e}")),
        }
    }

    pub fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub seed: u64,
    pub nodes: usize,
    pub dimension: usize,
    pub h: f64,
    pub matrix_bytes: usize,
    pub window: ResolvedWindow,
    pub scenario: Scenario,
    pub suites: Vec<SuiteReport>,
    pub setup_ms: u128,
    pub total_ms: u128,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.suites.iter().map(|s| s.count(Status::Fail) + s.errors.len()).sum()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn checks(&self) -> impl Iterator<Item = &BoundReport> {
        self.suites.iter().flat_map(|s| s.checks.iter())
    }
}

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub suites: Option<Vec<Suite>>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

struct Context<'a> {
    sc: &'a Scenario,
    dom: Arc<GridDomain>,
    v: Potential,
    h: DiscreteOperator,
    dec: SpectralDecomposition,
    window: ResolvedWindow,
    thetas: Vec<f64>,
    seed: u64,
}

impl Context<'_> {
    fn pq_pairs(&self) -> Vec<(Exponent, Exponent)> {
        let g = &self.sc.grids;
        g.p.iter()
            .flat_map(|&p| g.q.iter().filter(move |&&q| p <= q).map(move |&q| (p, q)))
            .collect()
    }

    fn mid_theta(&self) -> f64 {
        (self.window.theta_min * self.window.theta_max).sqrt()
    }
}

pub fn run_scenario(path: &Path) -> Result<RunReport> {
    let sc = Scenario::load(path)?;
    run(&sc, &RunOptions::default())
}

/// Runs the selected suites in dependency order; failures inside a suite are
/// recorded and the run continues.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    // sequential dense kernels keep results independent of the worker count
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(sc, opts))
}

fn run_inner(sc: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let suites = opts.suites.clone().unwrap_or_else(|| sc.suite.resolve());
    let seed = opts.seed.unwrap_or(sc.seed);
    let dom = sc.build_domain()?;
    let v = sc.potential.build(&dom)?;
    let window = ResolvedWindow::of(&dom);
    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        nodes: dom.len(),
        dimension: dom.dim(),
        h: dom.h(),
        matrix_bytes: dom.len() * dom.len() * 8,
        window,
        scenario: sc.clone(),
        suites: Vec::new(),
        setup_ms: 0,
        total_ms: 0,
    };
    if suites.is_empty() {
        report.total_ms = start.elapsed().as_millis();
        return Ok(report);
    }
    let h = assemble_hv(&dom, &v)?;
    let dec = decompose(&h)?;
    let thetas = sc.grids.theta.values(&window);
    let ctx = Context {
        sc,
        dom,
        v,
        h,
        dec,
        window,
        thetas,
        seed,
    };
    report.setup_ms = start.elapsed().as_millis();
    for s in suites {
        let t0 = Instant::now();
        let mut r = match s {
            Suite::Kato => kato_suite(&ctx),
            Suite::Semigroup => semigroup_suite(&ctx),
            Suite::Amalgam => amalgam_suite(&ctx),
            Suite::Resolvent => resolvent_suite(&ctx),
            Suite::Commutator => commutator_suite(&ctx),
            Suite::Multiplier => multiplier_suite(&ctx),
            Suite::All => unreachable!("resolved before execution"),
        };
        r.elapsed_ms = t0.elapsed().as_millis();
        report.suites.push(r);
    }
    report.total_ms = start.elapsed().as_millis();
    Ok(report)
}

fn kato_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Kato);
    match validate_assumption(&ctx.v, Threshold::Gamma) {
        Ok(k) => {
            let mut t = Table::new("profile", &["part", "radius", "value", "below_resolution"]);
            for (part, prof) in [("minus", &k.r_profile), ("plus", &k.r_profile_plus)] {
                for p in prof {
                    t.rows
                        .push(vec![part.into(), num(p.radius), num(p.value), p.below_resolution.to_string()]);
                }
            }
            out.tables.push(t);
            out.checks.push(k.bound_report());
        }
        Err(Error::KatoUndefined(d)) => {
            out.checks.push(
                BoundReport::new("kato smallness gamma_d", crate::report::anchors::KATO_SMALLNESS)
                    .with_status(Status::Excluded)
                    .note(format!("gamma_d undefined for d = {d}")),
            );
        }
        Err(e) => out.errors.push(format!("kato assumption: {e}")),
    }
    out.push("form identity", form_identity_check(&ctx.v, ctx.sc.params.trials.max(1), ctx.seed));
    if ctx.dom.dim() >= 3 {
        out.push(
            "form bound",
            form_bound_check(&ctx.v, 0.5, ctx.sc.params.trials, ctx.seed, 1e-9).map(|f| f.bound_report()),
        );
    }
    out
}

fn semigroup_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Semigroup);
    let tol = &ctx.sc.tolerances;
    let pairs = ctx.pq_pairs();
    let per_t: Vec<Vec<(String, Result<BoundReport>)>> = ctx
        .sc
        .grids
        .heat_t
        .par_iter()
        .map(|&t| {
            let mut v: Vec<(String, Result<BoundReport>)> = Vec::new();
            v.push((
                format!("semigroup law t={t}"),
                semigroup_law_check(&ctx.dec, t, t).map(|r| r.with_tol(tol.identity)),
            ));
            match heat_operator(&ctx.dec, t) {
                Ok(op) => {
                    let k = extract_kernel(&op, t);
                    v.push((format!("positivity t={t}"), Ok(check_positivity(&k, &ctx.v).param("t", t))));
                    v.push((
                        format!("gaussian t={t}"),
                        Ok(check_gaussian_bound(&k, &ctx.v, tol.gaussian_rel).param("t", t)),
                    ));
                }
                Err(e) => v.push((format!("heat operator t={t}"), Err(e))),
            }
            let pad = ctx.sc.params.padding.unwrap_or(4.0 * t.sqrt());
            v.push((format!("domination t={t}"), check_domination(&ctx.dec, &ctx.v, t, pad)));
            for &(p, q) in &pairs {
                v.push((
                    format!("smoothing t={t} {p}->{q}"),
                    smoothing_norms(&ctx.dec, &ctx.v, t, p, q, tol.smoothing_rel),
                ));
            }
            v
        })
        .collect();
    for group in per_t {
        for (what, r) in group {
            out.push(&what, r);
        }
    }
    // kernel column at the node nearest the centroid, first time
    if let Some(&t) = ctx.sc.grids.heat_t.first() {
        if let Ok(op) = heat_operator(&ctx.dec, t) {
            let k = extract_kernel(&op, t);
            let y = nearest_to_centroid(&ctx.dom);
            let mut tab = Table::new("kernel_slice", &["t", "x", "y", "kernel", "bound", "ratio"]);
            for row in kernel_slice(&k, &ctx.v, y) {
                tab.rows.push(vec![
                    num(t),
                    coords(&row.x),
                    coords(&row.y),
                    num(row.k),
                    num(row.bound),
                    num(row.ratio),
                ]);
            }
            out.tables.push(tab);
        }
    }
    out
}

fn coords(x: &[f64]) -> String {
    x.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>().join(" ")
}

fn nearest_to_centroid(dom: &GridDomain) -> usize {
    let d = dom.dim();
    let n = dom.len() as f64;
    let c: Vec<f64> = (0..d).map(|a| dom.all_coords().map(|x| x[a]).sum::<f64>() / n).collect();
    (0..dom.len())
        .min_by(|&i, &j| {
            let di: f64 = dom.coords(i).iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            let dj: f64 = dom.coords(j).iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            di.total_cmp(&dj)
        })
        .unwrap_or(0)
}

fn random_function(dom: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> GridFunction<f64> {
    GridFunction::new(dom.clone(), (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("length")
}

fn amalgam_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Amalgam);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0xa3a1);
    let pairs = ctx.pq_pairs();
    let full_box = ctx.dom.mask().iter().all(|&m| m);
    let exps = [Exponent::ONE, Exponent::TWO, Exponent::INF];
    let mut tab = Table::new("partition", &["theta", "node", "cube"]);
    for &theta in &ctx.thetas {
        let part = match partition(&ctx.dom, theta) {
            Ok(p) => p,
            Err(e) => {
                out.errors.push(format!("partition theta={theta}: {e}"));
                continue;
            }
        };
        for node in 0..ctx.dom.len() {
            let cube = part.cube(part.cube_of(node));
            tab.rows.push(vec![
                num(theta),
                node.to_string(),
                cube.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
            ]);
        }
        let f = random_function(&ctx.dom, &mut rng);
        for &(p, q) in &pairs {
            out.push(
                &format!("embedding theta={theta}"),
                check_embedding(&f, p, q, &part).map(|r| r.param("theta", theta)),
            );
        }
        if full_box {
            let mut worst: Option<BoundReport> = None;
            let mut errors = 0usize;
            for _ in 0..ctx.sc.params.trials {
                let pick = |rng: &mut ChaCha8Rng| exps[rng.random_range(0..exps.len())];
                let (p1, q1) = (pick(&mut rng), pick(&mut rng));
                let (p2, q2) = (pick(&mut rng), pick(&mut rng));
                if p1.recip() + p2.recip() < 1.0 || q1.recip() + q2.recip() < 1.0 {
                    continue;
                }
                let f = random_function(&ctx.dom, &mut rng);
                let g = random_function(&ctx.dom, &mut rng);
                match young_check(&f, &g, p1, q1, p2, q2, &part) {
                    Ok(r) => {
                        let replace = match &worst {
                            None => true,
                            Some(w) => r.failed() || (!w.failed() && r.ratio > w.ratio),
                        };
                        if replace {
                            worst = Some(r);
                        }
                    }
                    Err(_) => errors += 1,
                }
            }
            if let Some(w) = worst {
                out.checks
                    .push(w.param("theta", theta).param("trials", ctx.sc.params.trials).note("worst trial"));
            }
            if errors > 0 {
                out.errors.push(format!("young theta={theta}: {errors} trials not computed"));
            }
        }
        let v_kato = if ctx.dom.dim() >= 3 {
            kato_norm_of(&ctx.dom, ctx.v.negative_part()).unwrap_or(f64::NAN)
        } else {
            0.0
        };
        for &t in &ctx.sc.grids.heat_t {
            for &q in &ctx.sc.grids.q {
                out.push(
                    &format!("k0 theta={theta} t={t}"),
                    k0_amalgam_check(theta, t, q, ctx.dom.dim(), v_kato),
                );
            }
        }
    }
    out.tables.push(tab);
    out
}

fn sweep_rows(tab: &mut Table, label: &str, points: &[SweepPoint]) {
    for p in points {
        tab.rows.push(vec![
            label.to_string(),
            num(p.theta),
            p.p.clone(),
            p.q.clone(),
            num(p.norm_low),
            num(p.norm_high),
            num(p.bound),
            num(p.normalized),
            p.in_window.to_string(),
        ]);
    }
}

const SWEEP_HEADER: [&str; 9] = [
    "sweep",
    "theta",
    "p",
    "q",
    "norm_low",
    "norm_high",
    "bound_shape",
    "normalized",
    "window_flag",
];

fn resolvent_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Resolvent);
    let m = ctx.sc.params.m_shift;
    type ThetaChecks = (f64, Result<BoundReport>, Result<(BoundReport, BoundReport)>);
    let per_theta: Vec<ThetaChecks> = ctx
        .thetas
        .par_iter()
        .map(|&theta| {
            let id = resolvent_identity(&ctx.dec, &ctx.h, theta, m).map(|r| r.with_tol(ctx.sc.tolerances.identity));
            let bounds = resolvent_bounds(&ctx.dec, &ctx.v, theta, m).map(|r| (r.resolvent, r.gradient));
            (theta, id, bounds)
        })
        .collect();
    for (theta, id, bounds) in per_theta {
        out.push(&format!("resolvent identity theta={theta}"), id);
        match bounds {
            Ok((a, b)) => {
                out.checks.push(a);
                out.checks.push(b);
            }
            Err(e) => out.errors.push(format!("resolvent bounds theta={theta}: {e}")),
        }
    }
    let z = C64::new(ctx.sc.params.z.0, ctx.sc.params.z.1);
    let theta = ctx.mid_theta();
    for &beta in &ctx.sc.grids.beta {
        let r = ResolventSpec::new(theta, z, beta)
            .and_then(|s| laplace_check(&ctx.dec, &s, &LaplaceQuadrature::default(), ctx.sc.tolerances.oracle));
        out.push(&format!("laplace beta={beta}"), r);
    }
    let mut tab = Table::new("sweep", &SWEEP_HEADER);
    let d = ctx.dom.dim() as f64;
    for (p, q) in ctx.pq_pairs() {
        let alpha = (d / 2.0) * (p.recip() - q.recip());
        let Some(&beta) = ctx.sc.grids.beta.iter().find(|&&b| b > alpha) else {
            out.errors.push(format!("scaling {p}->{q}: no beta above {alpha}"));
            continue;
        };
        match resolvent_scaling(&ctx.dec, &ctx.v, p, q, beta, &ctx.thetas, z) {
            Ok((a, b)) => {
                sweep_rows(&mut tab, &format!("lq {p}->{q}"), &a.points);
                sweep_rows(&mut tab, &format!("amalgam {p}->{q}"), &b.points);
                out.checks.push(a.report);
                out.checks.push(b.report);
            }
            Err(e) => out.errors.push(format!("scaling {p}->{q}: {e}")),
        }
    }
    out.tables.push(tab);
    out
}

/// Same shape at a coarser spacing with at most `cap` nodes.
fn coarse_domain(ctx: &Context, cap: usize) -> Result<Arc<GridDomain>> {
    let mut h = ctx.dom.h();
    let mut dom = ctx.dom.clone();
    while dom.len() > cap {
        h *= 1.5;
        dom = build_domain(&ctx.sc.domain.shape, h)?;
    }
    Ok(dom)
}

fn commutator_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Commutator);
    let p = &ctx.sc.params;
    let axis = p.axis.min(ctx.dom.dim() - 1);
    let mult = PositionMultiplier::new(axis, p.offset);
    out.push("binomial expansion", verify_binomial_expansion(&ctx.h, mult, 4));
    let theta = ctx.mid_theta();
    out.push(
        "resolvent recursion",
        verify_resolvent_recursion(&ctx.dec, &ctx.h, theta, p.m_shift, mult, 3).map(|r| r.report),
    );
    let duhamel = coarse_domain(ctx, p.duhamel_nodes).and_then(|dom| {
        let v = ctx.sc.potential.build(&dom)?;
        let dec = decompose(&assemble_hv(&dom, &v)?)?;
        let g = UnitaryGroup::of_function(&dec, |l| 1.0 / (theta * l + p.m_shift));
        let quad = DuhamelQuadrature::default();
        let coarse = DuhamelQuadrature { panels: 16, order: 8 };
        Ok(vec![
            duhamel_check(&g, mult, 1.0, 1, &quad, ctx.sc.tolerances.identity)?.param("h", dom.h()),
            duhamel_check(&g, mult, 1.0, 2, &coarse, ctx.sc.tolerances.identity)?.param("h", dom.h()),
        ])
    });
    match duhamel {
        Ok(v) => out.checks.extend(v),
        Err(e) => out.errors.push(format!("duhamel: {e}")),
    }
    let mut tab = Table::new("surface", &["theta", "t", "k", "raw_norm", "normalized"]);
    for &k in &ctx.sc.grids.k {
        match unitary_growth_sweep(&ctx.dec, &ctx.v, mult, p.commutator_m, k, &ctx.thetas, &ctx.sc.grids.unitary_t) {
            Ok(r) => {
                for pt in &r.points {
                    tab.rows.push(vec![
                        num(pt.theta),
                        num(pt.t),
                        pt.k.to_string(),
                        num(pt.raw_norm),
                        num(pt.normalized),
                    ]);
                }
                out.checks.push(r.report);
            }
            Err(e) => out.errors.push(format!("unitary growth k={k}: {e}")),
        }
    }
    out.tables.push(tab);
    out
}

fn multiplier_suite(ctx: &Context) -> SuiteReport {
    let mut out = SuiteReport::new(Suite::Multiplier);
    let sc = ctx.sc;
    let m = sc.params.m_shift;
    let theta = ctx.mid_theta();
    let phi = &sc.profiles.phi;
    let psi = &sc.profiles.psi;
    out.push(
        "fourier calculus",
        resolvent(&ctx.dec, theta, m).and_then(|r| fourier_check(&r, psi, &FourierQuadrature::default(), sc.tolerances.oracle)),
    );
    for &beta in &sc.grids.beta {
        out.push(
            &format!("psi factorization beta={beta}"),
            verify_psi_factorization(&ctx.dec, &ctx.v, phi, theta, m, beta).map(|r| r.with_tol(sc.tolerances.identity)),
        );
    }
    let d = ctx.dom.dim();
    let mut tab = Table::new("sweep", &SWEEP_HEADER);
    for &n in &sc.grids.n {
        if 2 * n as usize > d {
            let trials = (sc.params.trials / ctx.thetas.len().max(1)).max(2);
            out.push(
                &format!("key estimate N={n}"),
                key_estimate_trials(&ctx.dec, psi, n, &ctx.thetas, m, trials, ctx.seed).map(|r| r.report),
            );
        }
        match triple_norm_growth(psi, n, &ctx.thetas, &ctx.dec, &ctx.v, m) {
            Ok(r) => {
                for p in &r.points {
                    tab.rows.push(vec![
                        format!("triple N={n}"),
                        num(p.theta),
                        "2".into(),
                        "2".into(),
                        num(p.triple),
                        num(p.triple),
                        num(p.shape),
                        num(p.normalized),
                        p.in_window.to_string(),
                    ]);
                }
                out.checks.push(r.report);
            }
            Err(e) => out.errors.push(format!("triple norm N={n}: {e}")),
        }
    }
    let uniform = sc.grids.theta_uniform.values(&ctx.window);
    for &p in &sc.grids.uniform_p {
        match uniform_bound_sweep(&ctx.dec, &ctx.v, phi, p, &uniform) {
            Ok(s) => {
                sweep_rows(&mut tab, &format!("uniform {p}"), &s.points);
                out.checks.push(s.report);
            }
            Err(e) => out.errors.push(format!("uniform {p}: {e}")),
        }
    }
    for (p, q) in ctx.pq_pairs() {
        match multiplier_scaling(&ctx.dec, &ctx.v, phi, p, q, &ctx.thetas) {
            Ok(s) => {
                sweep_rows(&mut tab, &format!("scaling {p}->{q}"), &s.points);
                out.checks.push(s.report);
            }
            Err(e) => out.errors.push(format!("scaling {p}->{q}: {e}")),
        }
    }
    out.push(
        "scaling identity",
        scaling_identity_check(phi, 4.0, &[0.0], &[1.0], 1.0 / 32.0, None),
    );
    out.tables.push(tab);
    out
}

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HVLAB_OUT";

/// Output directory: explicit flag, then the scenario, then `HVLAB_OUT`, then `hvlab-out`.
pub fn output_dir(flag: Option<&Path>, sc: &Scenario) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| sc.output.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hvlab-out"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
    Both,
}

#[derive(Serialize)]
struct SuiteSummary<'a> {
    suite: Suite,
    checks: usize,
    pass: usize,
    fail: usize,
    excluded: usize,
    hypothesis_unmet: usize,
    errors: &'a [String],
    /// Largest `measured / bound` among inequality checks.
    worst_margin: Option<(&'a str, f64)>,
    anchors: Vec<&'a str>,
    elapsed_ms: u128,
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    seed: u64,
    nodes: usize,
    dimension: usize,
    h: f64,
    matrix_bytes: usize,
    window: ResolvedWindow,
    passed: bool,
    failures: usize,
    suites: Vec<SuiteSummary<'a>>,
    setup_ms: u128,
    total_ms: u128,
    scenario: &'a Scenario,
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(path)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Scenario(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Scenario(format!("csv: {e}")))
}

/// CSV columns of the per-suite check table.
pub const CHECK_HEADER: [&str; 9] = [
    "name",
    "anchor",
    "status",
    "measured",
    "bound",
    "ratio",
    "tolerance",
    "parameters",
    "notes",
];

/// Writes `<suite>.csv`, `<suite>_<table>.csv` and `summary.json` into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path, format: EmitFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if format != EmitFormat::Json {
        let header: Vec<String> = CHECK_HEADER.iter().map(|s| s.to_string()).collect();
        for s in &report.suites {
            let rows: Vec<Vec<String>> = s
                .checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        c.anchor.clone(),
                        c.status.to_string(),
                        num(c.measured),
                        num(c.bound),
                        num(c.ratio),
                        num(c.tolerance),
                        c.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";"),
                        c.notes.join("; "),
                    ]
                })
                .collect();
            written.push(write(dir.join(format!("{}.csv", s.suite)), &csv_bytes(&header, &rows)?)?);
            for t in &s.tables {
                written.push(write(
                    dir.join(format!("{}_{}.csv", s.suite, t.name)),
                    &csv_bytes(&t.header, &t.rows)?,
                )?);
            }
        }
    }
    if format != EmitFormat::Csv {
        let suites = report
            .suites
            .iter()
            .map(|s| {
                let mut anchors: Vec<&str> = s.checks.iter().map(|c| c.anchor.as_str()).collect();
                anchors.sort_unstable();
                anchors.dedup();
                let worst_margin = s
                    .checks
                    .iter()
                    .filter(|c| c.bound.is_finite() && c.bound > 0.0 && c.measured.is_finite())
                    .map(|c| (c.name.as_str(), c.measured / c.bound))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                SuiteSummary {
                    suite: s.suite,
                    checks: s.checks.len(),
                    pass: s.count(Status::Pass),
                    fail: s.count(Status::Fail),
                    excluded: s.count(Status::Excluded),
                    hypothesis_unmet: s.count(Status::HypothesisUnmet),
                    errors: &s.errors,
                    worst_margin,
                    anchors,
                    elapsed_ms: s.elapsed_ms,
                }
            })
            .collect();
        let summary = Summary {
            version: report.version,
            seed: report.seed,
            nodes: report.nodes,
            dimension: report.dimension,
            h: report.h,
            matrix_bytes: report.matrix_bytes,
            window: report.window,
            passed: report.passed(),
            failures: report.failures(),
            suites,
            setup_ms: report.setup_ms,
            total_ms: report.total_ms,
            scenario: &report.scenario,
        };
        let json = serde_json::to_vec_pretty(&summary).map_err(|e| Error::Scenario(format!("json: {e}")))?;
        written.push(write(dir.join("summary.json"), &json)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(suite: &str) -> Scenario {
        Scenario::from_json(&format!(
            r#"{{"domain": {{"shape": {{"kind": "box", "lower": [0,0], "upper": [1,1]}}, "h": 0.125}},
                "grids": {{"theta": {{"window": 4}}, "theta_uniform": [0.01, 0.1, 1.0], "heat_t": [0.2], "unitary_t": [4, 16]}},
                "params": {{"trials": 4}}, "seed": 5, "suite": {suite}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn empty_selection_runs_nothing() {
        let r = run(&small("[]"), &RunOptions::default()).unwrap();
        assert!(r.suites.is_empty());
        assert!(r.passed());
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&r, dir.path(), EmitFormat::Both).unwrap();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn semigroup_suite_emits_tables() {
        let r = run(&small("\"semigroup\""), &RunOptions::default()).unwrap();
        let s = &r.suites[0];
        assert!(s.errors.is_empty(), "{:?}", s.errors);
        assert!(
            s.checks.iter().all(|c| !c.failed()),
            "{:?}",
            s.checks.iter().map(|c| c.summary()).collect::<Vec<_>>()
        );
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&r, dir.path(), EmitFormat::Csv).unwrap();
        assert!(files.iter().any(|f| f.ends_with("semigroup_kernel_slice.csv")));
        let text = fs::read_to_string(dir.path().join("semigroup.csv")).unwrap();
        assert!(text.starts_with("name,anchor,status"));
    }
}
