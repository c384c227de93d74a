//! `L^p → L^q` operator norms with respect to the `h^d` measure.
//!
//! The corners `p = 1`, `q = ∞` and `(2,2)` are computed exactly. Other pairs
//! get an interval: a lower bound from Boyd's nonlinear power iteration and an
//! upper bound from Riesz–Thorin interpolation between exact points.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exponent::Exponent;
use crate::operator::{ComplexOperator, DiscreteOperator};
use crate::scalar::{Scalar, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certainty {
    Exact,
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub certainty: Certainty,
}

impl NormEstimate {
    pub fn exact(v: f64) -> Self {
        NormEstimate {
            lower: v,
            upper: v,
            certainty: Certainty::Exact,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.certainty == Certainty::Exact
    }

    /// Geometric midpoint of the interval (the value itself when exact).
    pub fn mid(&self) -> f64 {
        if self.is_exact() || self.lower <= 0.0 {
            0.5 * (self.lower + self.upper)
        } else {
            (self.lower * self.upper).sqrt()
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        NormEstimate {
            lower: self.lower * c,
            upper: self.upper * c,
            certainty: self.certainty,
        }
    }
}

/// Options for the non-exact pairs.
#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            starts: 64,
            iterations: 40,
            seed: 0x5eed,
        }
    }
}

fn pnorm_acc(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

fn pnorm_fin(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        s
    } else if p == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / p)
    }
}

/// Unweighted `max_j ‖A e_j‖_q`.
fn max_col_norm<S: Scalar>(a: &Mat<S>, q: Exponent) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let v = if q.is_inf() {
            (0..a.nrows()).map(|i| a[(i, j)].abs()).fold(0.0, f64::max)
        } else {
            let scale = (0..a.nrows()).map(|i| a[(i, j)].abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                0.0
            } else {
                let qq = q.get();
                scale * pnorm_fin((0..a.nrows()).map(|i| pnorm_acc(a[(i, j)].abs() / scale, qq)).sum(), qq)
            }
        };
        best = best.max(v);
    }
    best
}

/// Unweighted `max_i ‖row_i‖_{p'}`.
fn max_row_dual_norm<S: Scalar>(a: &Mat<S>, p: Exponent) -> f64 {
    let r = p.conjugate();
    let n = a.nrows();
    if r.is_inf() {
        let mut acc = vec![0.0f64; n];
        for j in 0..a.ncols() {
            for (i, s) in acc.iter_mut().enumerate() {
                *s = s.max(a[(i, j)].abs());
            }
        }
        return acc.into_iter().fold(0.0, f64::max);
    }
    let mut scale = vec![0.0f64; n];
    for j in 0..a.ncols() {
        for (i, s) in scale.iter_mut().enumerate() {
            *s = s.max(a[(i, j)].abs());
        }
    }
    let rr = r.get();
    let mut acc = vec![0.0f64; n];
    for j in 0..a.ncols() {
        for i in 0..n {
            if scale[i] > 0.0 {
                acc[i] += pnorm_acc(a[(i, j)].abs() / scale[i], rr);
            }
        }
    }
    acc.iter().zip(&scale).map(|(&s, &c)| c * pnorm_fin(s, rr)).fold(0.0, f64::max)
}

fn top_singular_value_real(a: &Mat<f64>) -> f64 {
    let g = a.transpose() * a;
    let ev = g.self_adjoint_eigenvalues(Side::Lower).expect("Gram eigenvalues converge");
    ev.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

fn top_singular_value_complex(a: &Mat<C64>) -> f64 {
    let g = a.adjoint() * a;
    let ev = g.self_adjoint_eigenvalues(Side::Lower).expect("Gram eigenvalues converge");
    ev.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// Unweighted exact norm where available.
trait ExactNorms {
    fn exact_unweighted(&self, a: f64, b: f64) -> Option<f64>;
}

struct Corners<'a, S: Scalar> {
    a: &'a Mat<S>,
    sigma: f64,
}

impl<S: Scalar> ExactNorms for Corners<'_, S> {
    /// `a = 1/p`, `b = 1/q`.
    fn exact_unweighted(&self, a: f64, b: f64) -> Option<f64> {
        if (a - 1.0).abs() < 1e-15 {
            Some(max_col_norm(self.a, Exponent::from_recip(b).ok()?))
        } else if b.abs() < 1e-15 {
            Some(max_row_dual_norm(self.a, Exponent::from_recip(a).ok()?))
        } else if (a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15 {
            Some(self.sigma)
        } else {
            None
        }
    }
}

/// Riesz–Thorin upper bound at `(a, b)` from exact points, in unweighted norms.
fn riesz_thorin_upper<E: ExactNorms>(ex: &E, a: f64, b: f64) -> f64 {
    let mut best = f64::INFINITY;
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    let mut anchors: Vec<(f64, f64)> = vec![(0.5, 0.5)];
    anchors.extend(grid.iter().map(|&t| (1.0, t)));
    anchors.extend(grid.iter().map(|&t| (t, 0.0)));
    for (a0, b0) in anchors {
        let (da, db) = (a - a0, b - b0);
        if da.abs() < 1e-15 && db.abs() < 1e-15 {
            continue;
        }
        // extend the ray P0 → P beyond P until it reaches a = 1 or b = 0
        let mut s_hit = f64::INFINITY;
        if da > 1e-15 {
            s_hit = s_hit.min((1.0 - a0) / da);
        }
        if db < -1e-15 {
            s_hit = s_hit.min(-b0 / db);
        }
        if !s_hit.is_finite() || s_hit <= 1.0 + 1e-12 {
            continue;
        }
        let (a1, b1) = (a0 + s_hit * da, b0 + s_hit * db);
        if !(0.0..=1.0 + 1e-12).contains(&a1) || !(-1e-12..=1.0).contains(&b1) {
            continue;
        }
        let (a1, b1) = (a1.clamp(0.0, 1.0), b1.clamp(0.0, 1.0));
        let t = 1.0 / s_hit;
        let (Some(n0), Some(n1)) = (ex.exact_unweighted(a0, b0), ex.exact_unweighted(a1, b1)) else {
            continue;
        };
        let bound = if n0 == 0.0 || n1 == 0.0 {
            0.0
        } else {
            (((1.0 - t) * n0.ln()) + t * n1.ln()).exp()
        };
        best = best.min(bound);
    }
    best
}

fn sign_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if e == 0.0 {
        x.signum()
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn vec_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    } else {
        let m = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Boyd's power iteration for `max ‖Ax‖_q / ‖x‖_p` (unweighted), all starts
/// advanced together through matrix products.
fn boyd_lower(a: &Mat<f64>, p: Exponent, q: Exponent, opts: &NormOptions) -> f64 {
    let n = a.ncols();
    let k = opts.starts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pp = p.get();
    let qq = q.get();
    let pc = p.conjugate().get();
    let mut x = Mat::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
    let mut best = 0.0f64;
    for it in 0..=opts.iterations {
        for j in 0..k {
            let col = x.col_as_slice_mut(j);
            let s = vec_norm(col, pp);
            if s > 0.0 {
                col.iter_mut().for_each(|v| *v /= s);
            }
        }
        let y = a * &x;
        for j in 0..k {
            best = best.max(vec_norm(y.col_as_slice(j), qq));
        }
        if it == opts.iterations {
            break;
        }
        let mut dy = y;
        for j in 0..k {
            let col = dy.col_as_slice_mut(j);
            let s = vec_norm(col, qq);
            let e = qq - 1.0;
            for v in col.iter_mut() {
                *v = if s > 0.0 { sign_pow(*v / s, e) } else { 0.0 };
            }
        }
        let mut g = a.transpose() * &dy;
        for j in 0..k {
            let col = g.col_as_slice_mut(j);
            let s = vec_norm(col, pc);
            let e = if pc.is_infinite() { 0.0 } else { pc - 1.0 };
            for v in col.iter_mut() {
                *v = if s > 0.0 { sign_pow(*v / s, e) } else { 0.0 };
            }
        }
        x = g;
    }
    best
}

fn weight_factor(h_d: f64, p: Exponent, q: Exponent) -> f64 {
    h_d.powf(q.recip() - p.recip())
}

fn estimate<S: Scalar>(
    m: &Mat<S>,
    h_d: f64,
    measure: f64,
    p: Exponent,
    q: Exponent,
    sigma: impl Fn() -> f64,
    lower: impl Fn() -> f64,
) -> NormEstimate {
    let (a, b) = (p.recip(), q.recip());
    let w = weight_factor(h_d, p, q);
    let exact_corner = a == 1.0 || b == 0.0;
    if exact_corner {
        let c = Corners { a: m, sigma: 0.0 };
        return NormEstimate::exact(c.exact_unweighted(a, b).expect("corner") * w);
    }
    let s = sigma();
    if a == 0.5 && b == 0.5 {
        return NormEstimate::exact(s);
    }
    let c = Corners { a: m, sigma: s };
    let mut upper = riesz_thorin_upper(&c, a, b) * w;
    // |Ω|-based bounds through the exact edges
    let hd_w = |pp: Exponent, qq: Exponent| weight_factor(h_d, pp, qq);
    let to_inf = c.exact_unweighted(a, 0.0).expect("edge") * hd_w(p, Exponent::INF);
    upper = upper.min(to_inf * measure.powf(b));
    let from_one = c.exact_unweighted(1.0, b).expect("edge") * hd_w(Exponent::ONE, q);
    upper = upper.min(from_one * measure.powf(1.0 - a));
    let lo = (lower() * w).min(upper);
    NormEstimate {
        lower: lo,
        upper,
        certainty: Certainty::Interval,
    }
}

/// `‖A‖_{L^p → L^q}` with the `h^d` measure.
pub fn operator_norm(op: &DiscreteOperator, p: Exponent, q: Exponent) -> NormEstimate {
    operator_norm_with(op, p, q, &NormOptions::default())
}

pub fn operator_norm_with(op: &DiscreteOperator, p: Exponent, q: Exponent, opts: &NormOptions) -> NormEstimate {
    let m = op.matrix();
    let dom = op.domain();
    estimate(
        m,
        dom.cell_volume(),
        dom.measure(),
        p,
        q,
        || top_singular_value_real(m),
        || {
            let delta = max_col_norm(m, q);
            delta.max(boyd_lower(m, p, q, opts))
        },
    )
}

/// Complex analogue; interior pairs use deltas for the lower bound.
pub fn operator_norm_complex(op: &ComplexOperator, p: Exponent, q: Exponent) -> NormEstimate {
    let m = op.matrix();
    let dom = op.domain();
    estimate(
        m,
        dom.cell_volume(),
        dom.measure(),
        p,
        q,
        || top_singular_value_complex(m),
        || max_col_norm(m, q),
    )
}

/// Exact `2 → 2` norm of a real matrix (largest singular value).
pub fn spectral_norm(m: &Mat<f64>) -> f64 {
    top_singular_value_real(m)
}

pub fn spectral_norm_complex(m: &Mat<C64>) -> f64 {
    top_singular_value_complex(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, ShapeSpec};
    use crate::operator::DiscreteOperator;
    use std::sync::Arc;

    fn unit_line(n: usize) -> Arc<crate::GridDomain> {
        build_domain(&ShapeSpec::cube(1, 0.0, (n + 1) as f64), 1.0).unwrap()
    }

    #[test]
    fn diag_example() {
        let dom = unit_line(2);
        let mut m = Mat::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = -2.0;
        let op = DiscreteOperator::new(dom, m).unwrap();
        let r = operator_norm(&op, Exponent::ONE, Exponent::ONE);
        assert!(r.is_exact());
        assert_eq!(r.upper, 2.0);
    }

    #[test]
    fn identity_all_p() {
        let dom = build_domain(&ShapeSpec::unit_box(2), 0.25).unwrap();
        let op = DiscreteOperator::identity(dom);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let p = Exponent::new(p).unwrap();
            let r = operator_norm(&op, p, p);
            assert!(r.lower <= 1.0 + 1e-12 && r.upper >= 1.0 - 1e-12);
            assert!((r.lower - 1.0).abs() < 1e-9, "{p}: {r:?}");
            assert!((r.upper - 1.0).abs() < 1e-9, "{p}: {r:?}");
        }
    }

    #[test]
    fn weighted_one_to_inf_is_kernel_max() {
        let dom = build_domain(&ShapeSpec::unit_box(1), 0.25).unwrap();
        let m = Mat::from_fn(3, 3, |i, j| (i as f64 - j as f64).abs() + 1.0);
        let op = DiscreteOperator::new(dom, m).unwrap();
        let r = operator_norm(&op, Exponent::ONE, Exponent::INF);
        assert!((r.upper - 3.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn interval_brackets_random_test_vectors() {
        let dom = build_domain(&ShapeSpec::unit_box(1), 1.0 / 9.0).unwrap();
        let n = dom.len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let op = DiscreteOperator::new(dom.clone(), m).unwrap();
        let p = Exponent::new(1.5).unwrap();
        let q = Exponent::new(3.0).unwrap();
        let r = operator_norm(&op, p, q);
        assert_eq!(r.certainty, Certainty::Interval);
        assert!(r.lower <= r.upper);
        let w = dom.cell_volume();
        for _ in 0..200 {
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let af = op.apply(&f);
            let ratio = crate::grid::lp_norm_slice(&af, q, w) / crate::grid::lp_norm_slice(&f, p, w);
            assert!(ratio <= r.upper * (1.0 + 1e-12));
        }
    }
}
