//! Scaled amalgam spaces `ℓ^p(L^q)_θ`: local `L^q` norms on cubes of side
//! `θ^{1/2}` summed in `ℓ^p`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::fftconv::full_convolve;
use crate::grid::{lp_norm_slice, GridDomain, GridFunction};
use crate::kato::gamma_d;
use crate::report::{anchors, BoundReport, Status};
use crate::scalar::Scalar;

/// Node → cube assignment for one `θ`.
#[derive(Clone, Debug)]
pub struct AmalgamPartition {
    theta: f64,
    side: f64,
    cube_of: Vec<usize>,
    cubes: Vec<Vec<i64>>,
    members: Vec<Vec<usize>>,
    domain: Arc<GridDomain>,
}

/// `round(x/s)` with half-points sent toward `−∞`.
fn cube_coord(x: f64, s: f64) -> i64 {
    (x / s - 0.5 - 1e-9).ceil() as i64
}

pub fn partition(domain: &Arc<GridDomain>, theta: f64) -> Result<AmalgamPartition> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta {theta} must be positive")));
    }
    let side = theta.sqrt();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut cubes = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut cube_of = Vec::with_capacity(domain.len());
    for i in 0..domain.len() {
        let n: Vec<i64> = domain.coords(i).iter().map(|&x| cube_coord(x, side)).collect();
        let c = *index.entry(n.clone()).or_insert_with(|| {
            cubes.push(n);
            members.push(Vec::new());
            cubes.len() - 1
        });
        members[c].push(i);
        cube_of.push(c);
    }
    Ok(AmalgamPartition {
        theta,
        side,
        cube_of,
        cubes,
        members,
        domain: domain.clone(),
    })
}

impl AmalgamPartition {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Cube index `n ∈ Z^d` of cube `c`.
    pub fn cube(&self, c: usize) -> &[i64] {
        &self.cubes[c]
    }

    pub fn cubes(&self) -> &[Vec<i64>] {
        &self.cubes
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn cube_of(&self, node: usize) -> usize {
        self.cube_of[node]
    }

    /// Center `θ^{1/2} n` of cube `c`.
    pub fn center(&self, c: usize) -> Vec<f64> {
        self.cubes[c].iter().map(|&n| n as f64 * self.side).collect()
    }

    pub fn find(&self, n: &[i64]) -> Option<usize> {
        self.cubes.iter().position(|c| c == n)
    }

    /// Per-cube `L^q` norms of a nodal vector.
    pub fn local_norms<S: Scalar>(&self, values: &[S], q: Exponent) -> Vec<f64> {
        let w = self.domain.cell_volume();
        self.members
            .iter()
            .map(|mem| {
                let local: Vec<S> = mem.iter().map(|&i| values[i]).collect();
                lp_norm_slice(&local, q, w)
            })
            .collect()
    }

    /// `ℓ^p(L^q)_θ` norm of a nodal vector on this partition's domain.
    pub fn norm_of<S: Scalar>(&self, values: &[S], p: Exponent, q: Exponent) -> f64 {
        lp_norm_slice(&self.local_norms(values, q), p, 1.0)
    }

    /// CSV rows `(node, n_1, …, n_d)`.
    pub fn dump_csv(&self) -> String {
        let d = self.domain.dim();
        let mut s = String::from("node");
        for j in 0..d {
            s.push_str(&format!(",n{}", j + 1));
        }
        s.push('\n');
        for (i, &c) in self.cube_of.iter().enumerate() {
            s.push_str(&i.to_string());
            for n in &self.cubes[c] {
                s.push_str(&format!(",{n}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn amalgam_norm<S: Scalar>(f: &GridFunction<S>, p: Exponent, q: Exponent, part: &AmalgamPartition) -> Result<f64> {
    if !Arc::ptr_eq(f.domain(), &part.domain) && **f.domain() != *part.domain {
        return Err(Error::DomainMismatch);
    }
    Ok(part.norm_of(f.values(), p, q))
}

/// `max(‖f‖_p, ‖f‖_q) ≤ ‖f‖_{ℓ^p(L^q)_θ}`.
pub fn check_embedding<S: Scalar>(f: &GridFunction<S>, p: Exponent, q: Exponent, part: &AmalgamPartition) -> Result<BoundReport> {
    if p > q {
        return Err(Error::InvalidParameter("embedding requires p <= q".into()));
    }
    let lhs = f.lp_norm(p).max(f.lp_norm(q));
    let rhs = amalgam_norm(f, p, q, part)?;
    Ok(BoundReport::new("amalgam embedding", anchors::EMBEDDING)
        .inequality(lhs, rhs, 1e-12)
        .param("p", p)
        .param("q", q)
        .param("theta", part.theta))
}

/// Young exponent `r` from `1/r = 1/r₁ + 1/r₂ − 1`.
fn young_exponent(a: Exponent, b: Exponent) -> Result<Exponent> {
    let r = a.recip() + b.recip() - 1.0;
    if r < -1e-12 {
        return Err(Error::YoungExponents);
    }
    Exponent::from_recip(r.max(0.0)).map_err(|_| Error::YoungExponents)
}

/// Zero-padded convolution `Σ_y f(x−y) g(y) h^d` on the lattice of node sums,
/// returned with the domain it lives on.
pub fn convolve(f: &GridFunction<f64>, g: &GridFunction<f64>) -> Result<GridFunction<f64>> {
    let a = f.domain();
    let b = g.domain();
    if a.dim() != b.dim() || (a.h() - b.h()).abs() > 1e-12 * a.h() {
        return Err(Error::DomainMismatch);
    }
    let dense = |gf: &GridFunction<f64>| {
        let dom = gf.domain();
        let mut v = vec![0.0; dom.mask().len()];
        for (i, &c) in dom.node_cells().iter().enumerate() {
            v[c] = gf.values()[i];
        }
        v
    };
    let (shape, mut out) = full_convolve(a.shape(), &dense(f), b.shape(), &dense(g));
    let w = a.cell_volume();
    out.iter_mut().for_each(|x| *x *= w);
    let d = a.dim();
    let origin: Vec<f64> = (0..d).map(|j| a.origin()[j] + b.origin()[j]).collect();
    let lo: Vec<i64> = (0..d).map(|j| a.lattice_lo()[j] + b.lattice_lo()[j]).collect();
    let total = out.len();
    let dom = Arc::new(GridDomain::from_lattice(
        d,
        a.h(),
        origin,
        lo.clone(),
        shape.clone(),
        vec![true; total],
        None,
    )?);
    // from_lattice keeps the full block when every node is active
    debug_assert_eq!(dom.len(), total);
    GridFunction::new(dom, out)
}

/// `‖f ∗ g‖_{ℓ^p(L^q)_θ} ≤ 3^d ‖f‖_{ℓ^{p₁}(L^{q₁})_θ} ‖g‖_{ℓ^{p₂}(L^{q₂})_θ}`.
#[allow(clippy::too_many_arguments)]
pub fn young_check(
    f: &GridFunction<f64>,
    g: &GridFunction<f64>,
    p1: Exponent,
    q1: Exponent,
    p2: Exponent,
    q2: Exponent,
    part: &AmalgamPartition,
) -> Result<BoundReport> {
    let p = young_exponent(p1, p2)?;
    let q = young_exponent(q1, q2)?;
    for dom in [f.domain(), g.domain()] {
        if dom.mask().iter().any(|&m| !m) {
            return Err(Error::InvalidParameter("Young check requires a full box".into()));
        }
    }
    let conv = convolve(f, g)?;
    let cpart = partition(conv.domain(), part.theta)?;
    let lhs = amalgam_norm(&conv, p, q, &cpart)?;
    let nf = amalgam_norm(f, p1, q1, part)?;
    let gpart = if Arc::ptr_eq(g.domain(), &part.domain) {
        part.clone()
    } else {
        partition(g.domain(), part.theta)?
    };
    let ng = amalgam_norm(g, p2, q2, &gpart)?;
    let d = f.domain().dim() as i32;
    let c = 3f64.powi(d);
    let rhs = c * nf * ng;
    let mut r = BoundReport::new("amalgam young inequality", anchors::YOUNG)
        .inequality(lhs, rhs, 1e-9)
        .param("p", p)
        .param("q", q)
        .param("theta", part.theta)
        .param("ratio_to_norms", if nf * ng > 0.0 { lhs / (nf * ng) } else { 0.0 });
    if nf * ng == 0.0 && lhs == 0.0 {
        r.status = Status::Pass;
    }
    Ok(r)
}

/// `(∫_a^b e^{−c x²} dx)` without cancellation in the tails.
fn gauss_interval(a: f64, b: f64, c: f64) -> f64 {
    let s = c.sqrt();
    let k = 0.5 * (PI / c).sqrt();
    if a >= 0.0 {
        k * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        k * (erfc(-b * s) - erfc(-a * s))
    } else {
        k * (erf(b * s) + erf(-a * s))
    }
}

/// `‖e^{−x²/8s}‖_{L^q(I_n)}` on `I_n = [σ(n−½), σ(n+½)]`.
fn interval_norm(n: i64, sigma: f64, s: f64, q: Exponent) -> f64 {
    let a = sigma * (n as f64 - 0.5);
    let b = sigma * (n as f64 + 0.5);
    if q.is_inf() {
        let m = if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
        (-m * m / (8.0 * s)).exp()
    } else {
        let qq = q.get();
        gauss_interval(a, b, qq / (8.0 * s)).powf(1.0 / qq)
    }
}

/// `(n = 0 term, Σ_n terms)` of the separable 1-D factor.
fn axis_sums(sigma: f64, s: f64, q: Exponent) -> (f64, f64) {
    let zero = interval_norm(0, sigma, s, q);
    let mut total = zero;
    let mut n = 1i64;
    loop {
        let t = interval_norm(n, sigma, s, q);
        total += 2.0 * t;
        if t <= 1e-17 * total && (n as f64 - 0.5) * sigma > 4.0 * s.sqrt() {
            break;
        }
        n += 1;
    }
    (zero, total)
}

/// `ℓ¹(L^q)_θ` norm of `K₀(θt,·)` on `R^d`, split as (`n = 0`, `n ≠ 0`).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct K0Norms {
    pub c1: f64,
    pub center: f64,
    pub off_center: f64,
}

impl K0Norms {
    pub fn total(&self) -> f64 {
        self.center + self.off_center
    }
}

/// Closed cubes, continuum integrals; separability turns the cube sum into a
/// product of 1-D sums.
pub fn k0_amalgam_norms(theta: f64, t: f64, q: Exponent, d: usize, v_kato: f64) -> Result<K0Norms> {
    let frac = if v_kato == 0.0 {
        0.0
    } else {
        let g = gamma_d(d)?;
        if !(v_kato < g) {
            return Err(Error::HypothesisViolated(format!("|V-|_K = {v_kato} not below gamma_d = {g}")));
        }
        v_kato / g
    };
    if !(theta > 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter("theta and t must be positive".into()));
    }
    let c1 = (2.0 * PI).powf(-(d as f64) / 2.0) / (1.0 - frac);
    let s = theta * t;
    let (z, tot) = axis_sums(theta.sqrt(), s, q);
    let pref = c1 * s.powf(-(d as f64) / 2.0);
    let center = pref * z.powi(d as i32);
    let all = pref * tot.powi(d as i32);
    Ok(K0Norms {
        c1,
        center,
        off_center: (all - center).max(0.0),
    })
}

/// `‖K₀(θt,·)‖_{ℓ¹(L^q)_θ} ≤ C θ^{−α}(t^{−α} + 1)`, `α = (d/2)(1 − 1/q)`, with
/// `C = C₁(8π/q)^{d/2q} + (8√2)^d π^{d/2} C₁`; the two cube groups are also
/// checked against their separate bounds.
pub fn k0_amalgam_check(theta: f64, t: f64, q: Exponent, d: usize, v_kato: f64) -> Result<BoundReport> {
    let k = k0_amalgam_norms(theta, t, q, d, v_kato)?;
    let df = d as f64;
    let alpha = (df / 2.0) * (1.0 - q.recip());
    let c_center = if q.is_inf() {
        k.c1
    } else {
        k.c1 * (8.0 * PI / q.get()).powf(df / (2.0 * q.get()))
    };
    let c_off = (8.0 * 2f64.sqrt()).powi(d as i32) * PI.powf(df / 2.0) * k.c1;
    let bound = (c_center + c_off) * theta.powf(-alpha) * (t.powf(-alpha) + 1.0);
    let center_bound = c_center * (theta * t).powf(-alpha);
    let off_bound = c_off * theta.powf(-alpha);
    let mut r = BoundReport::new("gaussian profile amalgam norm", anchors::K0_AMALGAM)
        .inequality(k.total(), bound, 1e-9)
        .param("theta", theta)
        .param("t", t)
        .param("q", q)
        .param("d", d)
        .param("center", k.center)
        .param("center_bound", center_bound)
        .param("off_center", k.off_center)
        .param("off_center_bound", off_bound)
        .param("calibrated_center_constant", k.center * (theta * t).powf(alpha));
    if k.center > center_bound * (1.0 + 1e-9) || k.off_center > off_bound * (1.0 + 1e-9) {
        r.status = Status::Fail;
        r.notes.push("split bound violated".into());
    }
    Ok(r)
}
