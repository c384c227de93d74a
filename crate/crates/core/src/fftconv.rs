//! Multi-dimensional lattice convolutions through the FFT.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for j in (0..shape.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * shape[j + 1];
    }
    s
}

fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool, planner: &mut FftPlanner<f64>) {
    let st = strides(shape);
    let total = data.len();
    for (ax, &n) in shape.iter().enumerate() {
        if n <= 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride = st[ax];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // starting offsets of every line along `ax`
        let outer = total / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Circular convolution of two real arrays of the same `shape`.
pub fn circular_convolve(shape: &[usize], a: &[f64], b: &[f64]) -> Vec<f64> {
    let total: usize = shape.iter().product();
    assert_eq!(a.len(), total);
    assert_eq!(b.len(), total);
    let mut planner = FftPlanner::new();
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(&mut fa, shape, false, &mut planner);
    fft_nd(&mut fb, shape, false, &mut planner);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    fft_nd(&mut fa, shape, true, &mut planner);
    let scale = 1.0 / total as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// Full linear convolution of arrays with shapes `sa` and `sb`; the result has
/// shape `sa + sb − 1` and index `i + j` collects `a[i]·b[j]`.
pub fn full_convolve(sa: &[usize], a: &[f64], sb: &[usize], b: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let d = sa.len();
    let shape: Vec<usize> = (0..d).map(|j| sa[j] + sb[j] - 1).collect();
    let total: usize = shape.iter().product();
    let place = |src_shape: &[usize], src: &[f64]| {
        let mut out = vec![0.0; total];
        let ss = strides(src_shape);
        let ds = strides(&shape);
        for (flat, &v) in src.iter().enumerate() {
            let idx: usize = (0..d).map(|j| ((flat / ss[j]) % src_shape[j]) * ds[j]).sum();
            out[idx] = v;
        }
        out
    };
    let pa = place(sa, a);
    let pb = place(sb, b);
    (shape.clone(), circular_convolve(&shape, &pa, &pb))
}

/// `out(x) = Σ_y a(y) K(x − y)` for `x, y` in a block of shape `n`,
/// with `kernel(offset)` evaluated on offsets in `(−n, n)`.
pub fn block_correlate(n: &[usize], a: &[f64], kernel: impl Fn(&[i64]) -> f64) -> Vec<f64> {
    let d = n.len();
    let m: Vec<usize> = n.iter().map(|&k| 2 * k - 1).collect();
    let total: usize = m.iter().product();
    let ms = strides(&m);
    let ns = strides(n);
    let mut pa = vec![0.0; total];
    for (flat, &v) in a.iter().enumerate() {
        let idx: usize = (0..d).map(|j| ((flat / ns[j]) % n[j]) * ms[j]).sum();
        pa[idx] = v;
    }
    let mut pk = vec![0.0; total];
    let mut off = vec![0i64; d];
    for (flat, slot) in pk.iter_mut().enumerate() {
        for j in 0..d {
            let k = (flat / ms[j]) % m[j];
            off[j] = if k < n[j] { k as i64 } else { k as i64 - m[j] as i64 };
        }
        *slot = kernel(&off);
    }
    let c = circular_convolve(&m, &pa, &pk);
    (0..a.len())
        .map(|flat| {
            let idx: usize = (0..d).map(|j| ((flat / ns[j]) % n[j]) * ms[j]).sum();
            c[idx]
        })
        .collect()
}
