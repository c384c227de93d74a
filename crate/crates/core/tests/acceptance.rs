//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use hvlab_core::amalgam::{partition, young_check};
use hvlab_core::commutator::{duhamel_check, verify_binomial_expansion, DuhamelQuadrature, PositionMultiplier, UnitaryGroup};
use hvlab_core::kato::{gamma_d, kato_norm};
use hvlab_core::multiplier::{fourier_check, scaling_identity_check, verify_psi_factorization, FourierQuadrature, SchwartzProfile};
use hvlab_core::operator::{assemble_hv, decompose, form_identity_check, SpectralDecomposition};
use hvlab_core::report::{anchors, BoundReport, Status};
use hvlab_core::resolvent::{laplace_check, resolvent, resolvent_bounds, resolvent_identity, LaplaceQuadrature, ResolventSpec};
use hvlab_core::runner::{emit_report, run, EmitFormat, RunOptions, RunReport};
use hvlab_core::scenario::{PotentialSpec, Scenario, Suite};
use hvlab_core::semigroup::semigroup_law_check;
use hvlab_core::sweep::{fit_loglog, log_grid};
use hvlab_core::{build_domain, Exponent, GridDomain, GridFunction, Potential, ShapeSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn well() -> PotentialSpec {
    PotentialSpec::GaussianWell {
        center: vec![0.5; 3],
        width: 0.15,
        depth: 2.0,
    }
}

struct Instance {
    v: Potential,
    h: hvlab_core::operator::DiscreteOperator,
    dec: SpectralDecomposition,
}

fn instance(shape: &ShapeSpec, h: f64, pot: &PotentialSpec) -> Instance {
    let dom = build_domain(shape, h).unwrap();
    let v = pot.build(&dom).unwrap();
    let h = assemble_hv(&dom, &v).unwrap();
    let dec = decompose(&h).unwrap();
    Instance { v, h, dec }
}

fn ball3() -> ShapeSpec {
    ShapeSpec::Ball {
        center: vec![0.5; 3],
        radius: 0.5,
    }
}

/// Collects reports and fails on the first non-passing one.
#[derive(Default)]
struct Gate {
    n: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Gate {
    fn add(&mut self, r: BoundReport) {
        self.n += 1;
        if r.status != Status::Pass {
            self.failures.push(r.summary());
        } else if r.ratio.is_finite() {
            self.worst = self.worst.max(r.ratio);
        }
    }

    fn finish(self, what: &str) -> Outcome {
        if self.failures.is_empty() {
            Ok(format!("{what}: {} checks, worst ratio {:.3e}", self.n, self.worst))
        } else {
            Err(format!(
                "{what}: {} of {} not passing; first: {}",
                self.failures.len(),
                self.n,
                self.failures[0]
            ))
        }
    }
}

fn c1_kato_thresholds() -> Outcome {
    let e3 = (gamma_d(3).map_err(|e| e.to_string())? - std::f64::consts::PI).abs();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let e4 = (gamma_d(4).map_err(|e| e.to_string())? - pi2).abs() / pi2;
    let msg = format!("|gamma_3 - pi| = {e3:.2e}, rel |gamma_4 - pi^2| = {e4:.2e}");
    if e3 <= 1e-12 && e4 <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2_kato_ball() -> Outcome {
    // sup_x ∫_B |x−y|^{−1} dy over the unit ball is attained at the centre: 4π∫₀¹ r dr
    let exact = 2.0 * std::f64::consts::PI;
    let shape = ShapeSpec::Ball {
        center: vec![0.0; 3],
        radius: 1.0,
    };
    let mut errs = Vec::new();
    let hs: Vec<f64> = [8.0, 16.0, 24.0].iter().map(|n| 1.0 / n).collect();
    for &h in &hs {
        let dom = build_domain(&shape, h).map_err(|e| e.to_string())?;
        let v = Potential::from_fn(dom, |_| 1.0).map_err(|e| e.to_string())?;
        let k = kato_norm(&v).map_err(|e| e.to_string())?;
        errs.push((k - exact).abs() / exact);
    }
    let order = fit_loglog(&hs, &errs).unwrap_or(f64::NAN);
    let msg = format!(
        "relative errors h=1/8,1/16,1/24: {:.3e}, {:.3e}, {:.3e}; observed order {order:.2}",
        errs[0], errs[1], errs[2]
    );
    if errs[2] <= 0.01 && order >= 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_identities() -> Outcome {
    let tol = 1e-8;
    let mut g = Gate::default();
    let boxw = instance(&ShapeSpec::unit_box(3), 1.0 / 12.0, &well());
    let ball = instance(&ball3(), 0.1, &PotentialSpec::Zero);
    let e = |e: hvlab_core::Error| e.to_string();
    for inst in [&boxw, &ball] {
        g.add(form_identity_check(&inst.v, 8, 11).map_err(e)?.with_tol(tol));
        for (s, t) in [(0.01, 0.02), (0.1, 0.3)] {
            g.add(semigroup_law_check(&inst.dec, s, t).map_err(e)?.with_tol(tol));
        }
        for theta in [0.01, 0.1, 1.0] {
            g.add(resolvent_identity(&inst.dec, &inst.h, theta, 1.0).map_err(e)?.with_tol(tol));
        }
    }
    let phi = SchwartzProfile::gaussian(1.0);
    for beta in [0.8, 1.0, 2.0] {
        for theta in [0.03, 0.3] {
            g.add(
                verify_psi_factorization(&boxw.dec, &boxw.v, &phi, theta, 1.0, beta)
                    .map_err(e)?
                    .with_tol(tol),
            );
        }
    }
    for axis in 0..3 {
        g.add(verify_binomial_expansion(&boxw.h, PositionMultiplier::new(axis, 0.5), 4).map_err(e)?);
    }
    let small = instance(&ShapeSpec::unit_box(3), 1.0 / 6.0, &well());
    let grp = UnitaryGroup::of_function(&small.dec, |l| 1.0 / (0.05 * l + 1.0));
    let mult = PositionMultiplier::new(0, 0.5);
    g.add(duhamel_check(&grp, mult, 1.0, 1, &DuhamelQuadrature::default(), tol).map_err(e)?);
    g.add(duhamel_check(&grp, mult, 1.0, 2, &DuhamelQuadrature { panels: 16, order: 8 }, tol).map_err(e)?);
    g.finish("form, semigroup law, resolvent identity, psi factorization, binomial n<=4, duhamel k<=2")
}

fn c4_oracles() -> Outcome {
    let tol = 1e-7;
    let mut g = Gate::default();
    let e = |e: hvlab_core::Error| e.to_string();
    for pot in [PotentialSpec::Zero, well()] {
        let inst = instance(&ShapeSpec::unit_box(3), 1.0 / 12.0, &pot);
        for beta in [0.8, 1.0, 2.0] {
            for theta in [0.03, 0.3] {
                let spec = ResolventSpec::new(theta, C64::new(-1.0, 0.0), beta).map_err(e)?;
                g.add(laplace_check(&inst.dec, &spec, &LaplaceQuadrature::default(), tol).map_err(e)?);
            }
        }
        for theta in [0.03, 0.3] {
            let r = resolvent(&inst.dec, theta, 1.0).map_err(e)?;
            g.add(fourier_check(&r, &SchwartzProfile::gaussian(1.0), &FourierQuadrature::default(), tol).map_err(e)?);
        }
    }
    g.finish("laplace beta in {0.8,1,2}, fourier psi(R)")
}

fn suite_run(path: &Path, suites: Vec<Suite>) -> Result<RunReport, String> {
    let sc = Scenario::load(path).map_err(|e| e.to_string())?;
    run(
        &sc,
        &RunOptions {
            suites: Some(suites),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())
}

fn c5_heat() -> Outcome {
    let mut g = Gate::default();
    for file in ["box_d3.json", "box_d3_well.json"] {
        let r = suite_run(&scenarios_dir().join(file), vec![Suite::Semigroup])?;
        let floor = 10.0 * r.h * r.h;
        for s in &r.suites {
            if let Some(e) = s.errors.first() {
                return Err(format!("{file}: {e}"));
            }
            for c in &s.checks {
                let t: f64 = c.parameters.get("t").and_then(|t| t.parse().ok()).unwrap_or(f64::NAN);
                if !(t >= floor && t <= 1.0) {
                    return Err(format!("{file}: time {t} outside [10h^2, 1]"));
                }
                g.add(c.clone());
            }
        }
    }
    g.finish("positivity, domination, gaussian bound, smoothing on the box with V=0 and a well")
}

fn c6_resolvent_bounds() -> Outcome {
    let mut g = Gate::default();
    let e = |e: hvlab_core::Error| e.to_string();
    for pot in [PotentialSpec::Zero, well()] {
        let inst = instance(&ShapeSpec::unit_box(3), 1.0 / 12.0, &pot);
        for theta in log_grid(1e-2, 1e2, 9) {
            for m in [0.5, 1.0, 4.0] {
                let r = resolvent_bounds(&inst.dec, &inst.v, theta, m).map_err(e)?;
                g.add(r.resolvent);
                g.add(r.gradient);
            }
        }
    }
    g.finish("resolvent <= 1/M and gradient bound, theta in 1e-2..1e2")
}

fn find<'a>(r: &'a RunReport, anchor: &str, params: &[(&str, &str)]) -> Result<&'a BoundReport, String> {
    r.checks()
        .find(|c| c.anchor == anchor && params.iter().all(|(k, v)| c.parameters.get(*k).map(String::as_str) == Some(*v)))
        .ok_or_else(|| format!("no `{anchor}` report for {params:?}"))
}

fn describe(c: &BoundReport) -> String {
    format!(
        "{} {}: {:.3} (target {:.3})",
        c.name,
        params_short(&c.parameters),
        c.measured,
        c.bound
    )
}

fn params_short(p: &BTreeMap<String, String>) -> String {
    ["p", "q", "N"]
        .iter()
        .filter_map(|k| p.get(*k).map(|v| format!("{k}={v}")))
        .collect::<Vec<_>>()
        .join(",")
}

fn c7_scaling(r: &RunReport) -> Outcome {
    let mut g = Gate::default();
    let picks = [
        find(r, anchors::RESOLVENT_SCALING, &[("p", "1"), ("q", "inf")])?,
        find(r, anchors::LP_LQ_SCALING, &[("p", "1"), ("q", "inf")])?,
        find(r, anchors::LP_LQ_SCALING, &[("p", "1"), ("q", "2")])?,
        find(r, anchors::TRIPLE_NORM, &[("N", "2")])?,
    ];
    let mut lines: Vec<String> = picks.iter().map(|c| describe(c)).collect();
    for c in picks {
        g.add(c.clone());
    }
    for k in [1, 2] {
        let c = r
            .checks()
            .find(|c| c.anchor == anchors::AD_UNITARY && c.name.ends_with(&format!("k={k}")))
            .ok_or(format!("no unitary growth report for k={k}"))?;
        lines.push(describe(c));
        g.add(c.clone());
    }
    let verdict = g.finish("scaling regressions");
    let detail = lines.join("; ");
    match verdict {
        Ok(m) => Ok(format!("{m}; {detail}")),
        Err(m) => Err(format!("{m}; {detail}")),
    }
}

fn c8_uniform(r: &RunReport) -> Outcome {
    let mut g = Gate::default();
    let mut lines = Vec::new();
    for p in ["1", "inf"] {
        let c = find(r, anchors::UNIFORM_LP, &[("p", p)])?;
        lines.push(format!(
            "p={p}: sup_window {} vs theta=1 value {}, end slopes {} / {}",
            c.parameters.get("sup_window").map_or("?", String::as_str),
            c.parameters.get("reference_theta_1").map_or("?", String::as_str),
            c.parameters.get("slope_low_end").map_or("?", String::as_str),
            c.parameters.get("slope_high_end").map_or("?", String::as_str),
        ));
        g.add(c.clone());
    }
    let detail = lines.join("; ");
    match g.finish("uniform bound") {
        Ok(m) => Ok(format!("{m}; {detail}")),
        Err(m) => Err(format!("{m}; {detail}")),
    }
}

fn random_function(dom: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> GridFunction<f64> {
    let sparse = rng.random_bool(0.3);
    let vals = (0..dom.len())
        .map(|_| {
            if sparse && rng.random_bool(0.8) {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    GridFunction::new(dom.clone(), vals).unwrap()
}

fn random_box(d: usize, h: f64, rng: &mut ChaCha8Rng) -> Arc<GridDomain> {
    let upper: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    build_domain(
        &ShapeSpec::Box {
            lower: vec![0.0; d],
            upper,
        },
        h,
    )
    .unwrap()
}

fn c9_young() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut g = Gate::default();
    let e = |e: hvlab_core::Error| e.to_string();
    for trial in 0..200 {
        let d = 1 + trial % 2;
        let h = if d == 1 { 1.0 / 32.0 } else { 1.0 / 10.0 };
        let (df, dg) = (random_box(d, h, &mut rng), random_box(d, h, &mut rng));
        let sigma = rng.random_range(h..0.8);
        let part = partition(&df, sigma * sigma).map_err(e)?;
        let r1 = rng.random_range(0.0..=1.0);
        let r2 = rng.random_range(1.0 - r1..=1.0);
        let s1 = rng.random_range(0.0..=1.0);
        let s2 = rng.random_range(1.0 - s1..=1.0);
        let ex = |r: f64| Exponent::from_recip(r).unwrap();
        let (f, gg) = (random_function(&df, &mut rng), random_function(&dg, &mut rng));
        g.add(young_check(&f, &gg, ex(r1), ex(s1), ex(r2), ex(s2), &part).map_err(e)?);
    }
    // single-cube indicator in d = 1
    let dom = build_domain(
        &ShapeSpec::Box {
            lower: vec![0.0],
            upper: vec![2.0],
        },
        1.0 / 32.0,
    )
    .map_err(e)?;
    let part = partition(&dom, 1.0 / 16.0).map_err(e)?;
    let cube = (0..part.len()).max_by_key(|&c| part.members(c).len()).unwrap();
    let mut ind = vec![0.0; dom.len()];
    for &i in part.members(cube) {
        ind[i] = 1.0;
    }
    let f = GridFunction::new(dom.clone(), ind).map_err(e)?;
    let exps = [Exponent::ONE, Exponent::TWO, Exponent::INF];
    let mut worst: f64 = 0.0;
    for &p1 in &exps {
        for &q1 in &exps {
            for &p2 in &exps {
                for &q2 in &exps {
                    if p1.recip() + p2.recip() < 1.0 || q1.recip() + q2.recip() < 1.0 {
                        continue;
                    }
                    let r = young_check(&f, &f, p1, q1, p2, q2, &part).map_err(e)?;
                    worst = worst.max(r.parameters["ratio_to_norms"].parse::<f64>().unwrap());
                    g.add(r);
                }
            }
        }
    }
    if worst > 3.0 * (1.0 + 1e-9) {
        return Err(format!("indicator ratio {worst} exceeds 3"));
    }
    g.finish(&format!(
        "200 random trials in d=1,2 plus indicator exponent sweep (indicator ratio {worst:.4})"
    ))
}

fn c10_scaling_identity() -> Outcome {
    let r = scaling_identity_check(&SchwartzProfile::gaussian(1.0), 4.0, &[0.0], &[1.0], 1.0 / 32.0, None).map_err(|e| e.to_string())?;
    let mut g = Gate::default();
    g.add(r.with_tol(1e-9));
    g.finish("matched lattices d=1, theta=4")
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn full_runs(tmp: &Path) -> Result<(RunReport, Outcome), String> {
    let sc = Scenario::load(&scenarios_dir().join("box_d3.json")).map_err(|e| e.to_string())?;
    let a = run(&sc, &RunOptions::default()).map_err(|e| e.to_string())?;
    emit_report(&a, &tmp.join("a"), EmitFormat::Both).map_err(|e| e.to_string())?;
    let b = run(
        &sc,
        &RunOptions {
            jobs: Some(1),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    emit_report(&b, &tmp.join("b"), EmitFormat::Both).map_err(|e| e.to_string())?;
    let (fa, fb) = (csv_bytes(&tmp.join("a")), csv_bytes(&tmp.join("b")));
    let same = fa == fb && !fa.is_empty();
    let bytes: usize = fa.iter().map(|(_, b)| b.len()).sum();
    let msg = format!("{} CSV files, {bytes} bytes, default workers vs one worker", fa.len());
    let verdict = if same {
        Ok(msg)
    } else {
        let diff: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
        Err(format!("{msg}; differing: {diff:?}"))
    };
    Ok((a, verdict))
}

fn report(n: usize, title: &str, start: Instant, outcome: std::thread::Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (ok, msg) = match outcome {
        Ok(Ok(m)) => (true, m),
        Ok(Err(m)) => (false, m),
        Err(_) => (false, "panicked".to_string()),
    };
    println!("criterion {n:>2} {} {title} ({secs:.1} s): {msg}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    type Criterion = (usize, &'static str, fn() -> Outcome);
    let simple: [Criterion; 8] = [
        (1, "kato thresholds", c1_kato_thresholds),
        (2, "kato norm of V=1 on the unit ball", c2_kato_ball),
        (3, "exact discrete identities", c3_identities),
        (4, "oracle equivalences", c4_oracles),
        (5, "heat-kernel suite", c5_heat),
        (6, "resolvent and gradient constants", c6_resolvent_bounds),
        (9, "amalgam young inequality", c9_young),
        (10, "free scaling identity", c10_scaling_identity),
    ];
    for (n, title, f) in simple {
        let t = Instant::now();
        results.push((n, report(n, title, t, catch_unwind(f))));
    }
    let tmp = tempfile::tempdir().expect("tempdir");
    let t = Instant::now();
    match catch_unwind(AssertUnwindSafe(|| full_runs(tmp.path()))) {
        Ok(Ok((full, determinism))) => {
            let t7 = Instant::now();
            results.push((7, report(7, "scaling regressions", t7, Ok(c7_scaling(&full)))));
            results.push((8, report(8, "uniform multiplier bound", t7, Ok(c8_uniform(&full)))));
            results.push((11, report(11, "determinism", t, Ok(determinism))));
        }
        other => {
            let out = match other {
                Ok(Err(m)) => Ok(Err(m)),
                Err(p) => Err(p),
                Ok(Ok(_)) => unreachable!(),
            };
            let msg = |o: &std::thread::Result<Outcome>| match o {
                Ok(Err(m)) => m.clone(),
                _ => "panicked".into(),
            };
            for (n, title) in [(7, "scaling regressions"), (8, "uniform multiplier bound"), (11, "determinism")] {
                results.push((n, report(n, title, t, Ok(Err(msg(&out))))));
            }
        }
    }
    results.sort();
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
