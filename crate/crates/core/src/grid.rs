//! Masked uniform grids, grid functions and potentials.
//!
//! A domain lives on the lattice `origin + h·Z^d`. A node belongs to the open
//! set when its point (the center of its cell) lies strictly inside it.

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::exponent::Exponent;
use crate::quadrature::GaussLegendre;
use crate::scalar::Scalar;

/// Declarative description of an open set in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    BoxMinusBall {
        lower: Vec<f64>,
        upper: Vec<f64>,
        center: Vec<f64>,
        radius: f64,
    },
    UnionOfBoxes {
        boxes: Vec<(Vec<f64>, Vec<f64>)>,
    },
    /// The box with its closed upper corner quadrant `{x_0 ≥ m_0, x_1 ≥ m_1}` removed
    /// (`m` is the box midpoint).
    LShape {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    MaskFile {
        path: PathBuf,
    },
}

impl ShapeSpec {
    /// Unit box `(0,1)^d`.
    pub fn unit_box(d: usize) -> Self {
        ShapeSpec::Box {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        ShapeSpec::Box {
            lower: vec![lo; d],
            upper: vec![hi; d],
        }
    }

    fn dim(&self) -> Result<usize> {
        let d = match self {
            ShapeSpec::Box { lower, upper } | ShapeSpec::LShape { lower, upper } => same_len(&[lower, upper])?,
            ShapeSpec::Ball { center, .. } => center.len(),
            ShapeSpec::BoxMinusBall { lower, upper, center, .. } => same_len(&[lower, upper, center])?,
            ShapeSpec::UnionOfBoxes { boxes } => {
                let first = boxes.first().ok_or_else(|| Error::InvalidShape("union of zero boxes".into()))?;
                let d = first.0.len();
                for (lo, hi) in boxes {
                    if same_len(&[lo, hi])? != d {
                        return Err(Error::InvalidShape("boxes of different dimension".into()));
                    }
                }
                d
            }
            ShapeSpec::MaskFile { .. } => unreachable!("mask files carry their own dimension"),
        };
        if d == 0 {
            return Err(Error::InvalidShape("dimension must be at least 1".into()));
        }
        if let ShapeSpec::LShape { .. } = self {
            if d < 2 {
                return Err(Error::InvalidShape("L-shape needs d >= 2".into()));
            }
        }
        Ok(d)
    }

    fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            ShapeSpec::Box { lower, upper } | ShapeSpec::LShape { lower, upper } | ShapeSpec::BoxMinusBall { lower, upper, .. } => {
                lower.iter().zip(upper).map(|(&a, &b)| (a, b)).collect()
            }
            ShapeSpec::Ball { center, radius } => center.iter().map(|&c| (c - radius, c + radius)).collect(),
            ShapeSpec::UnionOfBoxes { boxes } => {
                let d = boxes[0].0.len();
                (0..d)
                    .map(|j| {
                        let lo = boxes.iter().map(|b| b.0[j]).fold(f64::INFINITY, f64::min);
                        let hi = boxes.iter().map(|b| b.1[j]).fold(f64::NEG_INFINITY, f64::max);
                        (lo, hi)
                    })
                    .collect()
            }
            ShapeSpec::MaskFile { .. } => unreachable!(),
        }
    }

    /// Strict membership of `x` in the open set, with boundary points (up to `eps`) excluded.
    fn contains(&self, x: &[f64], eps: f64) -> bool {
        let in_box = |lo: &[f64], hi: &[f64]| x.iter().zip(lo.iter().zip(hi)).all(|(&xi, (&a, &b))| xi > a + eps && xi < b - eps);
        let dist2 = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        match self {
            ShapeSpec::Box { lower, upper } => in_box(lower, upper),
            ShapeSpec::Ball { center, radius } => dist2(center).sqrt() < radius - eps,
            ShapeSpec::BoxMinusBall {
                lower,
                upper,
                center,
                radius,
            } => in_box(lower, upper) && dist2(center).sqrt() > radius + eps,
            ShapeSpec::UnionOfBoxes { boxes } => boxes.iter().any(|(lo, hi)| in_box(lo, hi)),
            ShapeSpec::LShape { lower, upper } => {
                let m0 = 0.5 * (lower[0] + upper[0]);
                let m1 = 0.5 * (lower[1] + upper[1]);
                in_box(lower, upper) && !(x[0] >= m0 - eps && x[1] >= m1 - eps)
            }
            ShapeSpec::MaskFile { .. } => unreachable!(),
        }
    }
}

fn same_len(vs: &[&Vec<f64>]) -> Result<usize> {
    let d = vs[0].len();
    if vs.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidShape("coordinate vectors differ in length".into()));
    }
    Ok(d)
}

/// Edge of the half-shifted lattice along one axis: `(lower node, upper node)`,
/// `None` standing for an exterior node (value 0).
pub type Edge = (Option<usize>, Option<usize>);

/// A masked uniform grid encoding an open set with Dirichlet exterior.
#[derive(Debug)]
pub struct GridDomain {
    d: usize,
    h: f64,
    origin: Vec<f64>,
    lo: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    bbox: Vec<(f64, f64)>,
    mask: Vec<bool>,
    cell_to_node: Vec<usize>,
    node_to_cell: Vec<usize>,
    coords: Vec<f64>,
    edges: OnceLock<Vec<Vec<Edge>>>,
}

const INACTIVE: usize = usize::MAX;

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
            && self.h == other.h
            && self.origin == other.origin
            && self.lo == other.lo
            && self.shape == other.shape
            && self.mask == other.mask
    }
}

/// Builds a domain from a shape description at spacing `h`.
pub fn build_domain(shape: &ShapeSpec, h: f64) -> Result<Arc<GridDomain>> {
    GridDomain::build(shape, h).map(Arc::new)
}

impl GridDomain {
    pub fn build(shape: &ShapeSpec, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidSpacing(h));
        }
        if let ShapeSpec::MaskFile { path } = shape {
            return Self::from_mask_file(path, Some(h));
        }
        let d = shape.dim()?;
        let bbox = shape.bounding_box();
        if bbox.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(Error::InvalidShape("non-finite bounds".into()));
        }
        let lo: Vec<i64> = bbox.iter().map(|&(a, _)| (a / h).floor() as i64).collect();
        let hi: Vec<i64> = bbox.iter().map(|&(_, b)| (b / h).ceil() as i64).collect();
        let shape_n: Vec<usize> = lo.iter().zip(&hi).map(|(&l, &u)| (u - l + 1).max(0) as usize).collect();
        let total: usize = shape_n.iter().product();
        if total > 50_000_000 {
            return Err(Error::InvalidShape(format!("bounding lattice too large ({total} nodes)")));
        }
        let eps = 1e-10 * h;
        let origin = vec![0.0; d];
        let mut mask = vec![false; total];
        let mut x = vec![0.0; d];
        for (flat, m) in mask.iter_mut().enumerate() {
            let mut rem = flat;
            for j in (0..d).rev() {
                let k = rem % shape_n[j];
                rem /= shape_n[j];
                x[j] = (lo[j] + k as i64) as f64 * h;
            }
            *m = shape.contains(&x, eps);
        }
        Self::from_lattice(d, h, origin, lo, shape_n, mask, Some(bbox))
    }

    /// General constructor from an explicit mask on the lattice block
    /// `lo[j] ≤ k_j < lo[j] + shape[j]`, node points `origin + k·h`.
    /// The block is trimmed to the active nodes.
    pub fn from_lattice(
        d: usize,
        h: f64,
        origin: Vec<f64>,
        lo: Vec<i64>,
        shape: Vec<usize>,
        mask: Vec<bool>,
        bbox: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidSpacing(h));
        }
        if d == 0 || origin.len() != d || lo.len() != d || shape.len() != d {
            return Err(Error::InvalidShape("inconsistent lattice dimensions".into()));
        }
        if mask.len() != shape.iter().product::<usize>() {
            return Err(Error::InvalidShape("mask length does not match lattice shape".into()));
        }
        // trim to the active extent
        let mut amin = vec![usize::MAX; d];
        let mut amax = vec![0usize; d];
        let mut any = false;
        for (flat, &m) in mask.iter().enumerate() {
            if !m {
                continue;
            }
            any = true;
            let mut rem = flat;
            for j in (0..d).rev() {
                let k = rem % shape[j];
                rem /= shape[j];
                amin[j] = amin[j].min(k);
                amax[j] = amax[j].max(k);
            }
        }
        if !any {
            return Err(Error::DegenerateDomain);
        }
        let new_shape: Vec<usize> = (0..d).map(|j| amax[j] - amin[j] + 1).collect();
        let new_lo: Vec<i64> = (0..d).map(|j| lo[j] + amin[j] as i64).collect();
        let strides = strides_of(&new_shape);
        let total: usize = new_shape.iter().product();
        let old_strides = strides_of(&shape);
        let mut new_mask = vec![false; total];
        let mut cell_to_node = vec![INACTIVE; total];
        let mut node_to_cell = Vec::new();
        let mut coords = Vec::new();
        let mut k = vec![0usize; d];
        for (flat, slot) in new_mask.iter_mut().enumerate() {
            let mut rem = flat;
            for j in (0..d).rev() {
                k[j] = rem % new_shape[j];
                rem /= new_shape[j];
            }
            let old: usize = (0..d).map(|j| (k[j] + amin[j]) * old_strides[j]).sum();
            if mask[old] {
                *slot = true;
                cell_to_node[flat] = node_to_cell.len();
                node_to_cell.push(flat);
                for j in 0..d {
                    coords.push(origin[j] + (new_lo[j] + k[j] as i64) as f64 * h);
                }
            }
        }
        let bbox = bbox.unwrap_or_else(|| {
            (0..d)
                .map(|j| {
                    let a = origin[j] + new_lo[j] as f64 * h;
                    (a - 0.5 * h, a + (new_shape[j] as f64 - 0.5) * h)
                })
                .collect()
        });
        Ok(GridDomain {
            d,
            h,
            origin,
            lo: new_lo,
            shape: new_shape,
            strides,
            bbox,
            mask: new_mask,
            cell_to_node,
            node_to_cell,
            coords,
            edges: OnceLock::new(),
        })
    }

    /// Reads a mask file: a header line `d h nx_0 .. nx_{d-1}` followed by the
    /// row-major mask (ASCII `0`/`1` or raw bytes 0/1, whitespace ignored).
    /// Node `i` along each axis sits at `(i+1)·h`. When `h` is given it must
    /// agree with the header.
    pub fn from_mask_file(path: &Path, h: Option<f64>) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::parse_mask(&bytes, h).map_err(|msg| Error::MaskFile {
            path: path.to_path_buf(),
            msg,
        })?
    }

    fn parse_mask(bytes: &[u8], h_expected: Option<f64>) -> std::result::Result<Result<Self>, String> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not UTF-8")?;
        let mut fields = header.split_whitespace();
        let d: usize = fields.next().ok_or("empty header")?.parse().map_err(|_| "bad dimension")?;
        let h: f64 = fields.next().ok_or("missing spacing")?.parse().map_err(|_| "bad spacing")?;
        let shape: Vec<usize> = fields
            .map(|s| s.parse::<usize>().map_err(|_| format!("bad extent {s:?}")))
            .collect::<std::result::Result<_, _>>()?;
        if d == 0 || shape.len() != d {
            return Err(format!("header declares d={d} but {} extents", shape.len()));
        }
        if let Some(he) = h_expected {
            if (he - h).abs() > 1e-12 * h.abs().max(he.abs()) {
                return Err(format!("spacing {he} disagrees with header {h}"));
            }
        }
        let mut mask = Vec::with_capacity(shape.iter().product());
        for &b in &bytes[nl + 1..] {
            match b {
                b'0' | 0 => mask.push(false),
                b'1' | 1 => mask.push(true),
                b' ' | b'\n' | b'\r' | b'\t' => {}
                other => return Err(format!("unexpected byte 0x{other:02x} in mask body")),
            }
        }
        let expected: usize = shape.iter().product();
        if mask.len() != expected {
            return Err(format!("mask has {} entries, expected {expected}", mask.len()));
        }
        Ok(Self::from_lattice(
            d,
            h,
            vec![0.0; d],
            vec![1; d],
            shape.clone(),
            mask,
            Some(shape.iter().map(|&n| (0.0, (n as f64 + 1.0) * h)).collect()),
        ))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of active nodes.
    pub fn len(&self) -> usize {
        self.node_to_cell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_to_cell.is_empty()
    }

    /// Measure of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Discrete measure of the domain, `n·h^d`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    pub fn bounding_box(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        self.bbox.iter().map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Lattice extents of the (trimmed) mask block.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn lattice_lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Flat (row-major) position of each active node inside the mask block.
    pub fn node_cells(&self) -> &[usize] {
        &self.node_to_cell
    }

    pub fn coords(&self, node: usize) -> &[f64] {
        &self.coords[node * self.d..(node + 1) * self.d]
    }

    pub fn all_coords(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    /// Global lattice index `k` of a node, with point `origin + k·h`.
    pub fn lattice_index(&self, node: usize) -> Vec<i64> {
        let mut rem = self.node_to_cell[node];
        let mut k = vec![0i64; self.d];
        for j in (0..self.d).rev() {
            k[j] = self.lo[j] + (rem % self.shape[j]) as i64;
            rem /= self.shape[j];
        }
        k
    }

    /// Node at global lattice index `k`, if active.
    pub fn node_at(&self, k: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for (j, &kj) in k.iter().enumerate().take(self.d) {
            let off = kj - self.lo[j];
            if off < 0 || off as usize >= self.shape[j] {
                return None;
            }
            flat += off as usize * self.strides[j];
        }
        let n = self.cell_to_node[flat];
        (n != INACTIVE).then_some(n)
    }

    /// Active neighbour of `node` one step along `axis` in direction `up`.
    pub fn neighbor(&self, node: usize, axis: usize, up: bool) -> Option<usize> {
        let flat = self.node_to_cell[node];
        let k = (flat / self.strides[axis]) % self.shape[axis];
        let target = if up {
            if k + 1 >= self.shape[axis] {
                return None;
            }
            flat + self.strides[axis]
        } else {
            if k == 0 {
                return None;
            }
            flat - self.strides[axis]
        };
        let n = self.cell_to_node[target];
        (n != INACTIVE).then_some(n)
    }

    /// Edges of the half-shifted lattice along `axis` touching at least one
    /// active node. For each active node in index order: the entering edge if
    /// the lower neighbour is exterior, then the edge to the upper neighbour.
    pub fn edges(&self, axis: usize) -> &[Edge] {
        &self.edges.get_or_init(|| {
            (0..self.d)
                .map(|ax| {
                    let mut es = Vec::new();
                    for i in 0..self.len() {
                        if self.neighbor(i, ax, false).is_none() {
                            es.push((None, Some(i)));
                        }
                        es.push((Some(i), self.neighbor(i, ax, true)));
                    }
                    es
                })
                .collect()
        })[axis]
    }

    /// Lattice offset mapping this domain's indices into `other`'s, if both
    /// share `d`, `h` and lattice alignment.
    pub fn lattice_offset(&self, other: &GridDomain) -> Result<Vec<i64>> {
        if self.d != other.d {
            return Err(Error::IncompatibleEmbedding(format!("dimension {} vs {}", self.d, other.d)));
        }
        if (self.h - other.h).abs() > 1e-12 * self.h {
            return Err(Error::IncompatibleEmbedding(format!("spacing {} vs {}", self.h, other.h)));
        }
        (0..self.d)
            .map(|j| {
                let s = (self.origin[j] - other.origin[j]) / self.h;
                let r = s.round();
                if (s - r).abs() > 1e-9 {
                    Err(Error::IncompatibleEmbedding(format!("lattices misaligned along axis {j}")))
                } else {
                    Ok(r as i64)
                }
            })
            .collect()
    }

    /// Map from this domain's nodes to `other`'s nodes, requiring containment.
    pub fn embedding_into(&self, other: &GridDomain) -> Result<Vec<usize>> {
        let off = self.lattice_offset(other)?;
        (0..self.len())
            .map(|i| {
                let k: Vec<i64> = self.lattice_index(i).iter().zip(&off).map(|(a, b)| a + b).collect();
                other
                    .node_at(&k)
                    .ok_or_else(|| Error::IncompatibleEmbedding(format!("node at {:?} is not in the superdomain", self.coords(i))))
            })
            .collect()
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for j in (0..shape.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * shape[j + 1];
    }
    s
}

fn lp_sum<S: Scalar>(values: impl Iterator<Item = S>, p: Exponent, w: f64) -> f64 {
    if p.is_inf() {
        values.map(|v| v.abs()).fold(0.0, f64::max)
    } else if p.get() == 1.0 {
        values.map(|v| v.abs()).sum::<f64>() * w
    } else if p.get() == 2.0 {
        (values.map(|v| v.abs2()).sum::<f64>() * w).sqrt()
    } else {
        let pp = p.get();
        // scale by the max entry to avoid overflow for large p
        let vals: Vec<f64> = values.map(|v| v.abs()).collect();
        let m = vals.iter().cloned().fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * (vals.iter().map(|v| (v / m).powf(pp)).sum::<f64>() * w).powf(1.0 / pp)
    }
}

/// Weighted `L^p` norm of node values with cell volume `w`.
pub fn lp_norm_slice<S: Scalar>(values: &[S], p: Exponent, w: f64) -> f64 {
    lp_sum(values.iter().copied(), p, w)
}

/// Values on the active nodes of a domain.
#[derive(Clone, Debug)]
pub struct GridFunction<S = f64> {
    domain: Arc<GridDomain>,
    values: Vec<S>,
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(domain: Arc<GridDomain>, values: Vec<S>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        GridFunction {
            domain,
            values: vec![S::default(); n],
        }
    }

    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(&[f64]) -> S) -> Self {
        let values = domain.all_coords().map(f).collect();
        GridFunction { domain, values }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// `(Σ |f|^p h^d)^{1/p}`, or `max |f|` for `p = ∞`.
    pub fn lp_norm(&self, p: Exponent) -> f64 {
        lp_norm_slice(&self.values, p, self.domain.cell_volume())
    }

    /// Weighted inner product `Σ f ḡ h^d`.
    pub fn inner(&self, other: &GridFunction<S>) -> Result<S> {
        if !Arc::ptr_eq(&self.domain, &other.domain) && *self.domain != *other.domain {
            return Err(Error::DomainMismatch);
        }
        let mut acc = S::default();
        for (&a, &b) in self.values.iter().zip(&other.values) {
            acc += a * b.conj();
        }
        Ok(acc.scale(self.domain.cell_volume()))
    }

    /// Copies the values into a containing domain on the same lattice, zero elsewhere.
    pub fn zero_extend(&self, superdomain: &Arc<GridDomain>) -> Result<GridFunction<S>> {
        let map = self.domain.embedding_into(superdomain)?;
        let mut values = vec![S::default(); superdomain.len()];
        for (i, &j) in map.iter().enumerate() {
            values[j] = self.values[i];
        }
        Ok(GridFunction {
            domain: superdomain.clone(),
            values,
        })
    }

    /// Forward differences `(f(x+he_j) − f(x))/h` on the edges of each axis,
    /// with exterior nodes read as zero.
    pub fn gradient(&self) -> Vec<Vec<S>> {
        let inv_h = 1.0 / self.domain.h();
        let val = |i: Option<usize>| i.map_or(S::default(), |i| self.values[i]);
        (0..self.domain.dim())
            .map(|ax| self.domain.edges(ax).iter().map(|&(a, b)| (val(b) - val(a)).scale(inv_h)).collect())
            .collect()
    }

    /// Discrete Dirichlet energy `Σ_j Σ_edges |∂_j f|² h^d`.
    pub fn dirichlet_energy(&self) -> f64 {
        let w = self.domain.cell_volume();
        self.gradient().iter().flat_map(|c| c.iter()).map(|v| v.abs2()).sum::<f64>() * w
    }
}

/// Real potential with its canonical split `V = V₊ − V₋`.
#[derive(Clone, Debug)]
pub struct Potential {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl Potential {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite potential value {v}")));
        }
        let plus = values.iter().map(|&v| v.max(0.0)).collect();
        let minus = values.iter().map(|&v| (-v).max(0.0)).collect();
        Ok(Potential {
            domain,
            values,
            plus,
            minus,
        })
    }

    pub fn zero(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        Potential {
            domain,
            values: vec![0.0; n],
            plus: vec![0.0; n],
            minus: vec![0.0; n],
        }
    }

    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = domain.all_coords().map(f).collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positive_part(&self) -> &[f64] {
        &self.plus
    }

    pub fn negative_part(&self) -> &[f64] {
        &self.minus
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.domain.clone(), self.values.iter().map(|v| c * v).collect())
    }

    /// Potential made of `V₊` only.
    pub fn positive(&self) -> Self {
        Self::new(self.domain.clone(), self.plus.clone()).expect("same length")
    }

    /// Potential `V₋` (nonnegative).
    pub fn negative_magnitude(&self) -> Self {
        Self::new(self.domain.clone(), self.minus.clone()).expect("same length")
    }

    pub fn zero_extend(&self, superdomain: &Arc<GridDomain>) -> Result<Potential> {
        let f = GridFunction::new(self.domain.clone(), self.values.clone())?;
        let ext = f.zero_extend(superdomain)?;
        Potential::new(superdomain.clone(), ext.into_values())
    }
}

/// Normalisation constant `C_d` of the bump `C_d e^{−1/(1−|x|²)}` on the unit ball.
pub fn mollifier_constant(d: usize) -> f64 {
    static CACHE: OnceLock<[f64; 4]> = OnceLock::new();
    if (1..=4).contains(&d) {
        return CACHE.get_or_init(|| [1, 2, 3, 4].map(mollifier_constant_uncached))[d - 1];
    }
    mollifier_constant_uncached(d)
}

fn mollifier_constant_uncached(d: usize) -> f64 {
    let gl = GaussLegendre::new(24);
    let radial = gl.composite(0.0, 1.0, 32, |r| {
        if r >= 1.0 {
            0.0
        } else {
            r.powi(d as i32 - 1) * (-1.0 / (1.0 - r * r)).exp()
        }
    });
    1.0 / (sphere_area(d) * radial)
}

/// Surface area of the unit sphere `S^{d−1}`, `2π^{d/2}/Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    let hd = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(hd) / statrs::function::gamma::gamma(hd)
}

/// Samples `j_ε(x − center)` at the active nodes. No renormalisation is applied
/// on coarse grids; the discrete `L¹` norm tends to 1 under refinement.
pub fn make_mollifier(center: &[f64], eps: f64, target: &Arc<GridDomain>) -> Result<GridFunction<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("mollifier radius {eps} must be positive")));
    }
    if center.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: center.len(),
        });
    }
    let d = target.dim();
    let c = mollifier_constant(d) * eps.powi(-(d as i32));
    let f = GridFunction::from_fn(target.clone(), |x| {
        let r2 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (eps * eps);
        if r2 < 1.0 {
            c * (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    });
    if f.values().iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyMollifier);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(h: f64) -> Arc<GridDomain> {
        build_domain(&ShapeSpec::unit_box(1), h).unwrap()
    }

    #[test]
    fn unit_interval_nodes() {
        let dom = unit_interval(0.25);
        assert_eq!(dom.len(), 3);
        let xs: Vec<f64> = dom.all_coords().map(|c| c[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn ball_count_matches_predicate() {
        let dom = build_domain(
            &ShapeSpec::Ball {
                center: vec![0.0; 3],
                radius: 1.0,
            },
            0.5,
        )
        .unwrap();
        let mut count = 0;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                for k in -2i32..=2 {
                    let r2 = 0.25 * (i * i + j * j + k * k) as f64;
                    if r2 < 1.0 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(dom.len(), count);
        assert_eq!(count, 27);
    }

    #[test]
    fn degenerate_and_spacing_errors() {
        let s = ShapeSpec::BoxMinusBall {
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            center: vec![0.5; 2],
            radius: 2.0,
        };
        assert!(matches!(build_domain(&s, 0.1), Err(Error::DegenerateDomain)));
        assert!(matches!(build_domain(&ShapeSpec::unit_box(1), 0.0), Err(Error::InvalidSpacing(_))));
        assert!(matches!(build_domain(&ShapeSpec::unit_box(1), -1.0), Err(Error::InvalidSpacing(_))));
    }

    #[test]
    fn l_shape_removes_quadrant() {
        let s = ShapeSpec::LShape {
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
        };
        let dom = build_domain(&s, 0.25).unwrap();
        // 9 nodes of the box minus {0.5, 0.75}^2
        assert_eq!(dom.len(), 5);
    }

    #[test]
    fn norm_examples() {
        let dom = unit_interval(0.25);
        let f = GridFunction::new(dom, vec![1.0; 3]).unwrap();
        assert!((f.lp_norm(Exponent::ONE) - 0.75).abs() < 1e-15);
        assert_eq!(f.lp_norm(Exponent::INF), 1.0);
        let two = build_domain(&ShapeSpec::cube(1, 0.0, 3.0), 1.0).unwrap();
        let g = GridFunction::new(two, vec![3.0, 4.0]).unwrap();
        assert!((g.lp_norm(Exponent::TWO) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn zero_extend_cases() {
        let small = unit_interval(0.25);
        let big = build_domain(&ShapeSpec::cube(1, -1.0, 1.75), 0.25).unwrap();
        assert_eq!(big.len(), 10);
        let f = GridFunction::new(small.clone(), vec![1.0; 3]).unwrap();
        let e = f.zero_extend(&big).unwrap();
        assert_eq!(e.values().iter().filter(|&&v| v == 1.0).count(), 3);
        assert_eq!(e.values().iter().filter(|&&v| v == 0.0).count(), 7);
        assert!((e.lp_norm(Exponent::ONE) - 0.75).abs() < 1e-15);
        let same = f.zero_extend(&small).unwrap();
        assert_eq!(same.values(), f.values());

        let shifted = GridDomain::from_lattice(1, 0.25, vec![0.125], vec![-4], vec![12], vec![true; 12], None).unwrap();
        assert!(matches!(f.zero_extend(&Arc::new(shifted)), Err(Error::IncompatibleEmbedding(_))));
    }

    #[test]
    fn gradient_example_d1() {
        let dom = build_domain(&ShapeSpec::cube(1, 0.0, 4.0), 1.0).unwrap();
        let f = GridFunction::new(dom, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.gradient(), vec![vec![0.0, 1.0, -1.0, 0.0]]);
    }

    #[test]
    fn gradient_of_constant() {
        let dom = build_domain(&ShapeSpec::unit_box(2), 0.25).unwrap();
        let f = GridFunction::new(dom.clone(), vec![2.0; dom.len()]).unwrap();
        for (ax, comp) in f.gradient().iter().enumerate() {
            for (&(a, b), &g) in dom.edges(ax).iter().zip(comp) {
                let expect = match (a, b) {
                    (None, Some(_)) => 2.0 / 0.25,
                    (Some(_), None) => -2.0 / 0.25,
                    _ => 0.0,
                };
                assert_eq!(g, expect);
            }
        }
    }

    #[test]
    fn mask_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        std::fs::write(&p, "2 0.5 3 2\n1 1\n0 1\n1 0\n").unwrap();
        let dom = build_domain(&ShapeSpec::MaskFile { path: p.clone() }, 0.5).unwrap();
        assert_eq!(dom.len(), 4);
        assert_eq!(dom.coords(0), &[0.5, 0.5]);
        assert_eq!(dom.coords(3), &[1.5, 0.5]);
        std::fs::write(&p, "2 0.5 3 2\n1 1 0\n").unwrap();
        assert!(matches!(
            build_domain(&ShapeSpec::MaskFile { path: p }, 0.5),
            Err(Error::MaskFile { .. })
        ));
    }

    #[test]
    fn mollifier_mass_d1() {
        let dom = build_domain(&ShapeSpec::cube(1, -2.0, 2.0), 0.01).unwrap();
        let j = make_mollifier(&[0.0], 1.0, &dom).unwrap();
        assert!((j.lp_norm(Exponent::ONE) - 1.0).abs() < 0.02);
        assert!(matches!(make_mollifier(&[10.0], 1.0, &dom), Err(Error::EmptyMollifier)));
    }

    #[test]
    fn mollifier_constant_d1_oracle() {
        // independent trapezoid on a fine grid
        let n = 200_000;
        let dx = 2.0 / n as f64;
        let s: f64 = (1..n)
            .map(|i| {
                let x = -1.0 + i as f64 * dx;
                (-1.0 / (1.0 - x * x)).exp()
            })
            .sum::<f64>()
            * dx;
        assert!((mollifier_constant(1) - 1.0 / s).abs() < 1e-9 / s);
    }

    #[test]
    fn potential_split() {
        let dom = unit_interval(0.25);
        let v = Potential::new(dom, vec![1.0, 0.0, -0.5]).unwrap();
        assert_eq!(v.positive_part(), &[1.0, 0.0, 0.0]);
        assert_eq!(v.negative_part(), &[0.0, 0.0, 0.5]);
    }
}
