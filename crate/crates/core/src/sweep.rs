//! θ-sweeps: the resolved window, log-log regression and per-point records.

use serde::Serialize;

use crate::grid::GridDomain;

/// `θ` with `θ^{1/2} ∈ [2h, diam/2]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResolvedWindow {
    pub theta_min: f64,
    pub theta_max: f64,
}

impl ResolvedWindow {
    pub fn of(domain: &GridDomain) -> Self {
        let lo = 2.0 * domain.h();
        let hi = 0.5 * domain.diameter();
        ResolvedWindow {
            theta_min: lo * lo,
            theta_max: hi * hi,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min * (1.0 - 1e-12) && theta <= self.theta_max * (1.0 + 1e-12)
    }

    /// `count` log-spaced points spanning the window.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        log_grid(self.theta_min, self.theta_max, count)
    }
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` below two usable points.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `max / min` of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// One sweep point.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub p: String,
    pub q: String,
    pub norm_low: f64,
    pub norm_high: f64,
    /// Shape of the bound, e.g. `θ^{−α}`.
    pub bound: f64,
    /// `norm / bound`.
    pub normalized: f64,
    pub in_window: bool,
}

/// Points inside the window.
pub fn windowed(points: &[SweepPoint]) -> Vec<&SweepPoint> {
    points.iter().filter(|p| p.in_window).collect()
}

/// Slope of the geometric midpoint of `[norm_low, norm_high]` over in-window points.
pub fn window_slope(points: &[SweepPoint]) -> Option<f64> {
    let w = windowed(points);
    let xs: Vec<f64> = w.iter().map(|p| p.theta).collect();
    let ys: Vec<f64> = w.iter().map(|p| mid(p.norm_low, p.norm_high)).collect();
    fit_loglog(&xs, &ys)
}

pub(crate) fn mid(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 0.0 {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}
