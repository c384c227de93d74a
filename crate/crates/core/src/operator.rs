//! Dense discrete operators, the Dirichlet Laplacian, `H_V`, and the
//! spectral functional calculus.

use std::sync::Arc;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridDomain, GridFunction, Potential};
use crate::kato::{gamma_d, kato_norm_of};
use crate::report::{anchors, BoundReport, Status};
use crate::scalar::{Scalar, C64};

fn same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// Largest absolute entry.
pub fn max_abs<S: Scalar>(m: &Mat<S>) -> f64 {
    let mut r = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            r = r.max(m[(i, j)].abs());
        }
    }
    r
}

/// Frobenius norm.
pub fn frobenius<S: Scalar>(m: &Mat<S>) -> f64 {
    let mut r = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            r += m[(i, j)].abs2();
        }
    }
    r.sqrt()
}

/// `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn frobenius_rel_diff<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> f64 {
    let mut num = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            num += (a[(i, j)] - b[(i, j)]).abs2();
        }
    }
    num.sqrt() / frobenius(b).max(f64::MIN_POSITIVE)
}

fn is_symmetric(m: &Mat<f64>) -> bool {
    let scale = max_abs(m);
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Real dense operator acting on node values of a domain.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    domain: Arc<GridDomain>,
    matrix: Mat<f64>,
    symmetric: bool,
}

impl DiscreteOperator {
    /// Wraps a matrix; the symmetry flag is detected (relative tolerance 1e−12).
    pub fn new(domain: Arc<GridDomain>, matrix: Mat<f64>) -> Result<Self> {
        let n = domain.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let symmetric = is_symmetric(&matrix);
        Ok(DiscreteOperator { domain, matrix, symmetric })
    }

    pub(crate) fn from_parts(domain: Arc<GridDomain>, matrix: Mat<f64>, symmetric: bool) -> Self {
        DiscreteOperator { domain, matrix, symmetric }
    }

    pub fn identity(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        Self::from_parts(domain, Mat::identity(n, n), true)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, &fj) in f.iter().enumerate() {
            if fj == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.matrix.col_as_slice(j)) {
                *o += a * fj;
            }
        }
        out
    }

    pub fn apply_fn(&self, f: &GridFunction<f64>) -> Result<GridFunction<f64>> {
        same_domain(&self.domain, f.domain())?;
        GridFunction::new(self.domain.clone(), self.apply(f.values()))
    }

    /// `self · other`.
    pub fn compose(&self, other: &DiscreteOperator) -> Result<DiscreteOperator> {
        same_domain(&self.domain, &other.domain)?;
        Ok(Self::from_parts(self.domain.clone(), &self.matrix * &other.matrix, false))
    }

    pub fn transpose(&self) -> DiscreteOperator {
        Self::from_parts(self.domain.clone(), self.matrix.transpose().to_owned(), self.symmetric)
    }

    /// Integral kernel with respect to the `h^d` measure, `A / h^d`.
    pub fn kernel(&self) -> Mat<f64> {
        let s = 1.0 / self.domain.cell_volume();
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * s)
    }

    /// Complexified copy.
    pub fn to_complex(&self) -> ComplexOperator {
        ComplexOperator {
            domain: self.domain.clone(),
            matrix: Mat::from_fn(self.dim(), self.dim(), |i, j| C64::new(self.matrix[(i, j)], 0.0)),
        }
    }
}

/// Complex dense operator.
#[derive(Clone, Debug)]
pub struct ComplexOperator {
    domain: Arc<GridDomain>,
    matrix: Mat<C64>,
}

impl ComplexOperator {
    pub fn new(domain: Arc<GridDomain>, matrix: Mat<C64>) -> Result<Self> {
        let n = domain.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        Ok(ComplexOperator { domain, matrix })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn compose(&self, other: &ComplexOperator) -> Result<ComplexOperator> {
        same_domain(&self.domain, &other.domain)?;
        Ok(ComplexOperator {
            domain: self.domain.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn adjoint(&self) -> ComplexOperator {
        ComplexOperator {
            domain: self.domain.clone(),
            matrix: self.matrix.adjoint().to_owned(),
        }
    }

    /// Real part, if the imaginary part is below `tol` relative to the largest entry.
    pub fn real_part_if(&self, tol: f64) -> Option<DiscreteOperator> {
        let scale = max_abs(&self.matrix);
        let n = self.dim();
        let mut worst = 0.0f64;
        let m = Mat::from_fn(n, n, |i, j| {
            let z = self.matrix[(i, j)];
            worst = worst.max(z.im.abs());
            z.re
        });
        (worst <= tol * scale).then(|| DiscreteOperator::new(self.domain.clone(), m).ok())?
    }
}

/// `−Δ_h` with Dirichlet exterior: `2d/h²` on the diagonal, `−1/h²` between
/// lattice neighbours.
pub fn assemble_laplacian(domain: &Arc<GridDomain>) -> DiscreteOperator {
    let n = domain.len();
    let d = domain.dim();
    let ih2 = 1.0 / (domain.h() * domain.h());
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * d as f64 * ih2;
        for ax in 0..d {
            if let Some(j) = domain.neighbor(i, ax, true) {
                m[(i, j)] = -ih2;
                m[(j, i)] = -ih2;
            }
        }
    }
    DiscreteOperator::from_parts(domain.clone(), m, true)
}

/// `H_V = −Δ_h + diag(V)`.
pub fn assemble_hv(domain: &Arc<GridDomain>, v: &Potential) -> Result<DiscreteOperator> {
    same_domain(domain, v.domain())?;
    let mut h = assemble_laplacian(domain);
    for (i, &vi) in v.values().iter().enumerate() {
        h.matrix[(i, i)] += vi;
    }
    Ok(h)
}

/// Stacked forward-difference gradient `D` (rows = edges of every axis), so that
/// `‖Du‖² h^d` is the discrete Dirichlet energy and `DᵀD = −Δ_h`.
pub fn gradient_matrix(domain: &GridDomain) -> Mat<f64> {
    let inv_h = 1.0 / domain.h();
    let rows: usize = (0..domain.dim()).map(|ax| domain.edges(ax).len()).sum();
    let mut m = Mat::zeros(rows, domain.len());
    let mut r = 0;
    for ax in 0..domain.dim() {
        for &(a, b) in domain.edges(ax) {
            if let Some(a) = a {
                m[(r, a)] = -inv_h;
            }
            if let Some(b) = b {
                m[(r, b)] = inv_h;
            }
            r += 1;
        }
    }
    m
}

/// Centered difference `(f(x+he_j) − f(x−he_j)) / 2h` with zero exterior (antisymmetric).
pub fn centered_difference(domain: &Arc<GridDomain>, axis: usize) -> DiscreteOperator {
    let n = domain.len();
    let c = 0.5 / domain.h();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        if let Some(j) = domain.neighbor(i, axis, true) {
            m[(i, j)] = c;
            m[(j, i)] = -c;
        }
    }
    DiscreteOperator::from_parts(domain.clone(), m, false)
}

/// `Σ_j ⟨∂_j u, ∂_j v⟩ h^d + Σ V u v̄ h^d`.
pub fn quadratic_form<S: Scalar>(u: &GridFunction<S>, v: &GridFunction<S>, pot: &Potential) -> Result<S> {
    same_domain(u.domain(), v.domain())?;
    same_domain(u.domain(), pot.domain())?;
    let w = u.domain().cell_volume();
    let mut acc = S::default();
    for (gu, gv) in u.gradient().iter().zip(v.gradient().iter()) {
        for (&a, &b) in gu.iter().zip(gv) {
            acc += a * b.conj();
        }
    }
    for ((&a, &b), &p) in u.values().iter().zip(v.values()).zip(pot.values()) {
        acc += (a * b.conj()).scale(p);
    }
    Ok(acc.scale(w))
}

/// Eigenpairs of a symmetric operator; eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    domain: Arc<GridDomain>,
    eigenvalues: Vec<f64>,
    /// Euclidean-orthonormal eigenvectors `U` (columns).
    vectors: Mat<f64>,
}

impl SpectralDecomposition {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvectors orthonormal in the Euclidean inner product.
    pub fn unit_vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    /// `q_k = u_k / h^{d/2}`, orthonormal in the `h^d`-weighted inner product.
    pub fn eigenvector(&self, k: usize) -> GridFunction<f64> {
        let s = self.domain.cell_volume().sqrt().recip();
        let vals = self.vectors.col_as_slice(k).iter().map(|v| v * s).collect();
        GridFunction::new(self.domain.clone(), vals).expect("length matches")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty")
    }

    fn values_of(&self, g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let v = g(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NotEvaluable(l))
                }
            })
            .collect()
    }

    /// `U diag(c) Uᵀ`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Mat<f64> {
        let n = self.dim();
        let w = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * coeffs[j]);
        &w * self.vectors.transpose()
    }

    /// `U diag(c) Uᵀ` for complex coefficients, as two real products.
    pub fn synthesize_complex(&self, coeffs: &[C64]) -> Mat<C64> {
        let n = self.dim();
        let re = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * coeffs[j].re);
        let re = &re * self.vectors.transpose();
        if coeffs.iter().all(|c| c.im == 0.0) {
            return Mat::from_fn(n, n, |i, j| C64::new(re[(i, j)], 0.0));
        }
        let im = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * coeffs[j].im);
        let im = &im * self.vectors.transpose();
        Mat::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]))
    }

    /// `g(A) = Q g(Λ) Qᵀ h^d = U g(Λ) Uᵀ`.
    pub fn apply_function(&self, g: impl Fn(f64) -> f64) -> Result<DiscreteOperator> {
        let c = self.values_of(g)?;
        Ok(DiscreteOperator::from_parts(self.domain.clone(), self.synthesize(&c), true))
    }

    pub fn apply_function_complex(&self, g: impl Fn(f64) -> C64) -> Result<ComplexOperator> {
        let c: Vec<C64> = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let v = g(l);
                if v.re.is_finite() && v.im.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NotEvaluable(l))
                }
            })
            .collect::<Result<_>>()?;
        Ok(ComplexOperator {
            domain: self.domain.clone(),
            matrix: self.synthesize_complex(&c),
        })
    }

    /// Decomposition of `g(A)`: same eigenvectors, eigenvalues `g(λ)` re-sorted ascending.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<SpectralDecomposition> {
        let vals = self.values_of(g)?;
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let n = self.dim();
        Ok(SpectralDecomposition {
            domain: self.domain.clone(),
            eigenvalues: order.iter().map(|&k| vals[k]).collect(),
            vectors: Mat::from_fn(n, n, |i, j| self.vectors[(i, order[j])]),
        })
    }

    /// Reconstruction error `‖A − UΛUᵀ‖_max`.
    pub fn reconstruction_error(&self, a: &DiscreteOperator) -> f64 {
        let r = self.synthesize(&self.eigenvalues);
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((r[(i, j)] - a.matrix[(i, j)]).abs());
            }
        }
        worst
    }
}

/// Full symmetric eigendecomposition.
pub fn decompose(a: &DiscreteOperator) -> Result<SpectralDecomposition> {
    if !a.symmetric {
        return Err(Error::NotSymmetric);
    }
    let evd = a
        .matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let eigenvalues: Vec<f64> = (0..a.dim()).map(|k| s[k]).collect();
    Ok(SpectralDecomposition {
        domain: a.domain.clone(),
        eigenvalues,
        vectors: evd.U().to_owned(),
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn lambda_max_sym(m: &Mat<f64>) -> Result<f64> {
    let ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct FormBoundReport {
    pub epsilon: f64,
    /// Smallest `b ≥ 0` with `Σ V₊|u|² ≤ ε‖∇u‖² + b‖u‖²` on the grid.
    pub b_epsilon: f64,
    /// `‖V₋‖_K / (4γ_d)`.
    pub minus_constant: f64,
    /// Worst `Σ V₋|u|² / (c ‖∇u‖²)` over random samples and eigenvectors of `H`.
    pub minus_worst_sampled: f64,
    /// Exact worst ratio on the discrete space (generalized eigenvalue).
    pub minus_worst_exact: f64,
    /// Worst `(Σ V₊|u|²) / (ε‖∇u‖² + b_ε‖u‖²)` over the same samples.
    pub plus_worst_sampled: f64,
    /// `(lhs, rhs)` of the `V₋` inequality for the first few samples.
    pub samples: Vec<(f64, f64)>,
    pub tol_rel: f64,
    pub passes: bool,
}

/// Form bounds for `V₊` (with the computed `b_ε`) and `V₋` (with the Kato constant).
pub fn form_bound_check(v: &Potential, eps: f64, samples: usize, seed: u64, tol_rel: f64) -> Result<FormBoundReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} must be positive")));
    }
    let dom = v.domain().clone();
    let d = dom.dim();
    let n = dom.len();
    let lap = assemble_laplacian(&dom);
    let vp = v.positive_part();
    let vm = v.negative_part();
    let b_mat = Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { vp[i] } else { 0.0 };
        diag - eps * lap.matrix[(i, j)]
    });
    let b_eps = lambda_max_sym(&b_mat)?.max(0.0);

    let c = kato_norm_of(&dom, vm)? / (4.0 * gamma_d(d)?);
    let hdec = decompose(&lap)?;

    // exact worst ratio: λ_max(H^{-1/2} diag(V₋) H^{-1/2})
    let inv_sqrt: Vec<f64> = hdec.eigenvalues.iter().map(|l| l.sqrt().recip()).collect();
    let hm = hdec.synthesize(&inv_sqrt);
    let g = Mat::from_fn(n, n, |i, j| hm[(i, j)] * vm[j]);
    let g = &g * &hm;
    let g = Mat::from_fn(n, n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]));
    let worst_exact = if c > 0.0 {
        lambda_max_sym(&g)? / c
    } else if vm.iter().all(|&x| x == 0.0) {
        0.0
    } else {
        f64::INFINITY
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_m = 0.0f64;
    let mut worst_p = 0.0f64;
    let mut recorded = Vec::new();
    let w = dom.cell_volume();
    let mut test = |u: Vec<f64>, record: bool| {
        let f = GridFunction::new(dom.clone(), u).expect("length");
        let energy = f.dirichlet_energy();
        let l2 = f.lp_norm(crate::Exponent::TWO).powi(2);
        let lhs_m: f64 = f.values().iter().zip(vm).map(|(x, p)| p * x * x).sum::<f64>() * w;
        let lhs_p: f64 = f.values().iter().zip(vp).map(|(x, p)| p * x * x).sum::<f64>() * w;
        let rhs_m = c * energy;
        if lhs_m > 0.0 {
            worst_m = worst_m.max(if rhs_m > 0.0 { lhs_m / rhs_m } else { f64::INFINITY });
        }
        let rhs_p = eps * energy + b_eps * l2;
        if lhs_p > 0.0 {
            worst_p = worst_p.max(lhs_p / rhs_p);
        }
        if record {
            recorded.push((lhs_m, rhs_m));
        }
    };
    for s in 0..samples {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        test(u, s < 8);
    }
    for k in 0..n {
        test(hdec.vectors.col_as_slice(k).to_vec(), false);
    }
    let passes = worst_m <= 1.0 + tol_rel && worst_p <= 1.0 + 1e-9;
    Ok(FormBoundReport {
        epsilon: eps,
        b_epsilon: b_eps,
        minus_constant: c,
        minus_worst_sampled: worst_m,
        minus_worst_exact: worst_exact,
        plus_worst_sampled: worst_p,
        samples: recorded,
        tol_rel,
        passes,
    })
}

impl FormBoundReport {
    pub fn bound_report(&self) -> BoundReport {
        let worst = self.minus_worst_sampled.max(self.plus_worst_sampled);
        BoundReport::new("form bound", anchors::FORM_BOUND)
            .inequality(worst, 1.0, self.tol_rel)
            .with_status(if self.passes { Status::Pass } else { Status::Fail })
            .param("epsilon", self.epsilon)
            .param("b_epsilon", self.b_epsilon)
            .param("minus_constant", self.minus_constant)
            .param("minus_worst_exact", self.minus_worst_exact)
    }
}

/// `⟨∇u, ∇u⟩ + ⟨Vu, u⟩ = ⟨H_V u, u⟩` on random `u`.
pub fn form_identity_check(v: &Potential, samples: usize, seed: u64) -> Result<BoundReport> {
    let dom = v.domain().clone();
    let h = assemble_hv(&dom, v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = dom.cell_volume();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hu = h.apply(&u);
        let matrix_form: f64 = hu.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * w;
        let f = GridFunction::new(dom.clone(), u)?;
        let form = quadratic_form(&f, &f, v)?;
        worst = worst.max((form - matrix_form).abs() / matrix_form.abs().max(f64::MIN_POSITIVE));
    }
    Ok(BoundReport::new("summation by parts", anchors::FORM_IDENTITY)
        .identity(worst, 1e-10)
        .param("samples", samples))
}

/// Writes `HVOPMAT1`, `n` (u64), `h` (f64), `d` (u64), then `n²` row-major f64,
/// all little-endian.
pub fn write_matrix_dump(op: &DiscreteOperator, w: &mut impl std::io::Write) -> std::io::Result<()> {
    let n = op.dim();
    w.write_all(b"HVOPMAT1")?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&op.domain.h().to_le_bytes())?;
    w.write_all(&(op.domain.dim() as u64).to_le_bytes())?;
    for i in 0..n {
        for j in 0..n {
            w.write_all(&op.matrix[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, ShapeSpec};

    fn line(n: usize) -> Arc<GridDomain> {
        build_domain(&ShapeSpec::cube(1, 0.0, (n + 1) as f64), 1.0).unwrap()
    }

    #[test]
    fn laplacian_small_cases() {
        let l = assemble_laplacian(&line(1));
        assert_eq!(l.matrix()[(0, 0)], 2.0);
        let dom = build_domain(&ShapeSpec::cube(2, 0.0, 1.0), 0.5).unwrap();
        assert_eq!(dom.len(), 1);
        assert_eq!(assemble_laplacian(&dom).matrix()[(0, 0)], 16.0);
    }

    #[test]
    fn tridiagonal_spectrum() {
        let l = assemble_laplacian(&line(3));
        let dec = decompose(&l).unwrap();
        let s2 = 2f64.sqrt();
        for (got, want) in dec.eigenvalues().iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonsymmetric() {
        let dom = line(3);
        let mut m = assemble_laplacian(&dom).into_matrix();
        m[(0, 1)] += 0.1;
        let op = DiscreteOperator::new(dom, m).unwrap();
        assert!(matches!(decompose(&op), Err(Error::NotSymmetric)));
    }

    #[test]
    fn hv_diagonal() {
        let dom = line(3);
        let v = Potential::new(dom.clone(), vec![1.0, 0.0, -0.5]).unwrap();
        let h = assemble_hv(&dom, &v).unwrap();
        assert_eq!(h.matrix()[(0, 0)], 3.0);
        assert_eq!(h.matrix()[(2, 2)], 1.5);
        assert_eq!(h.matrix()[(0, 1)], -1.0);
        let other = line(4);
        assert!(matches!(assemble_hv(&other, &v), Err(Error::DomainMismatch)));
    }

    #[test]
    fn gradient_matrix_gives_laplacian() {
        let dom = build_domain(
            &ShapeSpec::LShape {
                lower: vec![0.0; 2],
                upper: vec![1.0; 2],
            },
            0.125,
        )
        .unwrap();
        let d = gradient_matrix(&dom);
        let dtd = d.transpose() * &d;
        let l = assemble_laplacian(&dom);
        assert!(frobenius_rel_diff(&dtd, l.matrix()) < 1e-14);
    }

    #[test]
    fn function_calculus_examples() {
        let dom = build_domain(&ShapeSpec::unit_box(2), 0.2).unwrap();
        let l = assemble_laplacian(&dom);
        let dec = decompose(&l).unwrap();
        let id = dec.apply_function(|_| 1.0).unwrap();
        assert!(frobenius_rel_diff(id.matrix(), DiscreteOperator::identity(dom.clone()).matrix()) < 1e-12);
        let a = dec.apply_function(|x| x).unwrap();
        assert!(max_abs(&(a.matrix() - l.matrix())) < 1e-8 * dec.lambda_max());
        let sq = dec.apply_function(|x| x * x).unwrap();
        let prod = l.matrix() * l.matrix();
        assert!(frobenius_rel_diff(sq.matrix(), &prod) < 1e-8);
        assert!(matches!(dec.apply_function(|x| 1.0 / (x - x)), Err(Error::NotEvaluable(_))));
        // weighted orthonormality
        let q0 = dec.eigenvector(0);
        let q1 = dec.eigenvector(1);
        assert!((q0.inner(&q0).unwrap() - 1.0).abs() < 1e-10);
        assert!(q0.inner(&q1).unwrap().abs() < 1e-10);
    }

    #[test]
    fn form_bound_trivial_cases() {
        let dom = build_domain(&ShapeSpec::unit_box(3), 0.25).unwrap();
        let zero = Potential::zero(dom.clone());
        let r = form_bound_check(&zero, 0.1, 20, 1, 0.05).unwrap();
        assert_eq!(r.b_epsilon, 0.0);
        assert!(r.passes);
        let c = Potential::new(dom.clone(), vec![3.0; dom.len()]).unwrap();
        let r = form_bound_check(&c, 0.01, 20, 1, 0.05).unwrap();
        assert!(r.b_epsilon <= 3.0 + 1e-12);
        assert!(form_bound_check(&c, 0.0, 1, 1, 0.05).is_err());
    }

    #[test]
    fn matrix_dump_layout() {
        let l = assemble_laplacian(&line(2));
        let mut buf = Vec::new();
        write_matrix_dump(&l, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"HVOPMAT1");
        assert_eq!(buf.len(), 8 + 8 + 8 + 8 + 4 * 8);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 2.0);
        assert_eq!(f64::from_le_bytes(buf[40..48].try_into().unwrap()), -1.0);
    }
}
