//! NIR threshold detection and the spectral mass function.
//!
//! The threshold is the minimum of a quintic fitted to the NIR histogram
//! between its first two peaks. Pixels darker than the threshold lean towards
//! water, and the further a pixel sits from the threshold the more mass it
//! commits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::belief::MassFunction;
use crate::error::{Error, Result};
use crate::labels::{Label, MassTriple};
use crate::raster::Grid;

pub const DEFAULT_NBINS: usize = 256;
pub const MIN_NBINS: usize = 8;

/// Smoothing window used before peak detection, in bins.
pub const SMOOTHING_WINDOW: usize = 5;

/// Peaks less prominent than this fraction of the profile maximum are noise.
pub const PEAK_PROMINENCE: f64 = 0.05;

/// Minimum number of histogram bins the quintic is fitted to.
pub const MIN_FIT_POINTS: usize = 7;

const GRID_POINTS: usize = 1024;

/// `N = 1 − e^{−1}`, the normalizer that maps the mass curves onto `[0, 1]`.
pub fn big_n() -> f64 {
    1.0 - (-1.0f64).exp()
}

/// Equal-width histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn nbins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges[self.nbins()] - self.edges[0]) / self.nbins() as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nbins()).map(|b| self.center(b)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin holding `v`, with values at or beyond the upper edge in the last bin.
    pub fn bin_of(&self, v: f64) -> usize {
        let lo = self.edges[0];
        let idx = ((v - lo) / self.bin_width()).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.nbins() - 1)
        }
    }
}

/// Bins `values` into `nbins` equal-width bins spanning their range.
pub fn build_histogram(values: &[f64], nbins: usize) -> Result<Histogram> {
    if nbins < MIN_NBINS {
        return Err(Error::InvalidArgument(format!(
            "nbins must be at least {MIN_NBINS}, got {nbins}"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot build a histogram of nothing".into()));
    }
    let (lo, hi) = extrema(values);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("band contains non-finite values".into()));
    }
    if lo == hi {
        return Err(Error::DegenerateBand(lo));
    }
    let width = (hi - lo) / nbins as f64;
    let mut edges: Vec<f64> = (0..=nbins).map(|i| lo + i as f64 * width).collect();
    edges[nbins] = hi;
    let mut h = Histogram {
        edges,
        counts: vec![0; nbins],
    };
    for &v in values {
        let b = h.bin_of(v);
        h.counts[b] += 1;
    }
    Ok(h)
}

pub fn extrema(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Centered moving average with the window truncated at the ends.
pub fn smooth(profile: &[f64]) -> Vec<f64> {
    let half = SMOOTHING_WINDOW / 2;
    (0..profile.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(profile.len());
            profile[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of `profile`, plateaus reported at their leftmost bin.
pub fn local_maxima(profile: &[f64]) -> Vec<usize> {
    let n = profile.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && profile[j + 1] == profile[i] {
            j += 1;
        }
        let left = if i > 0 { profile[i - 1] } else { f64::NEG_INFINITY };
        let right = if j + 1 < n { profile[j + 1] } else { f64::NEG_INFINITY };
        let v = profile[i];
        if v >= left && v >= right && (v > left || v > right) {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Height of a peak above the higher of the two lowest points reachable on
/// either side before climbing above it.
pub fn prominence(profile: &[f64], peak: usize) -> f64 {
    let v = profile[peak];
    let left = profile[..peak]
        .iter()
        .rev()
        .take_while(|&&h| h <= v)
        .fold(v, |m, &h| m.min(h));
    let right = profile[peak + 1..]
        .iter()
        .take_while(|&&h| h <= v)
        .fold(v, |m, &h| m.min(h));
    v - left.max(right)
}

/// The two lowest-index significant local maxima of `profile`.
pub fn find_first_two_peaks(profile: &[f64]) -> Result<(usize, usize)> {
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peaks: Vec<usize> = local_maxima(profile)
        .into_iter()
        .filter(|&p| {
            let prom = prominence(profile, p);
            prom > 0.0 && prom >= PEAK_PROMINENCE * max
        })
        .collect();
    match peaks[..] {
        [p1, p2, ..] => Ok((p1, p2)),
        _ => Err(Error::UnimodalHistogram { found: peaks.len() }),
    }
}

/// A quintic in a variable normalized from `[lo, hi]` onto `[−1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly5 {
    /// Coefficients of `u^0 … u^5`.
    pub coeffs: [f64; 6],
    pub lo: f64,
    pub hi: f64,
}

impl Poly5 {
    pub fn normalize(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = self.normalize(x);
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// Coefficients of `x^0 … x^5` in the original variable.
    pub fn raw_coefficients(&self) -> [f64; 6] {
        // u = a·x + b
        let a = 2.0 / (self.hi - self.lo);
        let b = -(self.lo + self.hi) / (self.hi - self.lo);
        let mut out = [0.0; 6];
        let mut power = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                let mut next = [0.0; 6];
                for j in 0..k {
                    next[j + 1] += power[j] * a;
                    next[j] += power[j] * b;
                }
                power = next;
            }
            for j in 0..=k {
                out[j] += c * power[j];
            }
        }
        out
    }
}

/// Least-squares quintic through `(xs, ys)`.
pub fn fit_poly5(xs: &[f64], ys: &[f64]) -> Result<Poly5> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSeparation { points: xs.len() });
    }
    let (lo, hi) = extrema(xs);
    if !(lo < hi) {
        return Err(Error::InvalidArgument("abscissae must not all coincide".into()));
    }
    let mut poly = Poly5 {
        coeffs: [0.0; 6],
        lo,
        hi,
    };
    let design = DMatrix::from_fn(xs.len(), 6, |i, j| poly.normalize(xs[i]).powi(j as i32));
    let qr = design.qr();
    let rhs = qr.q().transpose() * DVector::from_column_slice(ys);
    let c = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::InvalidArgument("abscissae too clustered for a quintic".into()))?;
    poly.coeffs.copy_from_slice(c.as_slice());
    Ok(poly)
}

/// Parameters of the spectral mass function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModelParams {
    pub t: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub alpha_water: f64,
    pub alpha_nonwater: f64,
}

impl SpectralModelParams {
    pub fn new(t: f64, n_min: f64, n_max: f64) -> Result<Self> {
        if !(n_min < t && t < n_max) {
            return Err(Error::InvalidArgument(format!(
                "threshold {t} must lie strictly inside the band range [{n_min}, {n_max}]"
            )));
        }
        Ok(SpectralModelParams {
            t,
            n_min,
            n_max,
            alpha_water: 1.0,
            alpha_nonwater: 1.0,
        })
    }

    pub fn with_alphas(mut self, alpha_water: f64, alpha_nonwater: f64) -> Result<Self> {
        for a in [alpha_water, alpha_nonwater] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidArgument(format!(
                    "discount coefficients must lie in [0, 1], got {a}"
                )));
            }
        }
        self.alpha_water = alpha_water;
        self.alpha_nonwater = alpha_nonwater;
        Ok(self)
    }

    pub fn d_water(&self) -> f64 {
        self.t - self.n_min
    }

    pub fn d_nonwater(&self) -> f64 {
        self.n_max - self.t
    }
}

/// Everything the threshold search produced, for reporting and plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub params: SpectralModelParams,
    pub histogram: Histogram,
    pub smoothed: Vec<f64>,
    pub peaks: (usize, usize),
    pub fit_bins: (usize, usize),
    pub poly: Poly5,
}

/// Bins `[lo, hi]` grown symmetrically until they hold `MIN_FIT_POINTS` bins.
fn fit_range(p1: usize, p2: usize, nbins: usize) -> Result<(usize, usize)> {
    let (mut lo, mut hi) = (p1, p2);
    let mut grow_left = true;
    while hi - lo + 1 < MIN_FIT_POINTS {
        let can_left = lo > 0;
        let can_right = hi + 1 < nbins;
        match (can_left, can_right) {
            (false, false) => {
                return Err(Error::InsufficientSeparation {
                    points: hi - lo + 1,
                })
            }
            (true, true) if grow_left => lo -= 1,
            (true, true) => hi += 1,
            (true, false) => lo -= 1,
            (false, true) => hi += 1,
        }
        grow_left = !grow_left;
    }
    Ok((lo, hi))
}

/// Minimizes `f` over `[a, b]`: dense grid, then golden-section refinement.
pub fn minimize_on_interval(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let step = (b - a) / (GRID_POINTS - 1) as f64;
    let at = |i: usize| if i == GRID_POINTS - 1 { b } else { a + i as f64 * step };
    let best = (0..GRID_POINTS)
        .min_by(|&i, &j| f(at(i)).total_cmp(&f(at(j))))
        .expect("grid is non-empty");
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(GRID_POINTS - 1)));
    let tol = 1e-6 * (b - a);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    // The refinement bracket came from the grid, so never do worse than it.
    if f(x) <= f(at(best)) {
        x
    } else {
        at(best)
    }
}

/// Finds the NIR threshold of a band.
pub fn find_threshold(band: &[f64], nbins: usize) -> Result<ThresholdFit> {
    let histogram = build_histogram(band, nbins)?;
    let counts: Vec<f64> = histogram.counts.iter().map(|&c| c as f64).collect();
    let smoothed = smooth(&smooth(&counts));
    let (p1, p2) = find_first_two_peaks(&smoothed)?;
    let (lo, hi) = fit_range(p1, p2, nbins)?;
    let xs: Vec<f64> = (lo..=hi).map(|b| histogram.center(b)).collect();
    let poly = fit_poly5(&xs, &counts[lo..=hi])?;
    let t = minimize_on_interval(|x| poly.eval(x), histogram.center(p1), histogram.center(p2));
    let (n_min, n_max) = (histogram.edges[0], histogram.edges[nbins]);
    let params = SpectralModelParams::new(t, n_min, n_max)?;
    Ok(ThresholdFit {
        params,
        histogram,
        smoothed,
        peaks: (p1, p2),
        fit_bins: (lo, hi),
        poly,
    })
}

/// Water iff at or below the threshold.
pub fn spectral_label(n_x: f64, params: &SpectralModelParams) -> Label {
    if n_x <= params.t {
        Label::Water
    } else {
        Label::NonWater
    }
}

/// Neighborhood used for the spatial coefficient γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaConfig {
    window: usize,
}

impl GammaConfig {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 || window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "gamma window must be a positive odd integer, got {window}"
            )));
        }
        Ok(GammaConfig { window })
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig { window: 3 }
    }
}

fn window_bounds(c: usize, half: usize, len: usize) -> (usize, usize) {
    (c.saturating_sub(half), (c + half + 1).min(len))
}

/// Share of the pixels in the clipped window around `(x, y)` with its label.
pub fn gamma_coefficient(labels: &Grid<Label>, x: usize, y: usize, cfg: GammaConfig) -> f64 {
    let half = cfg.window / 2;
    let (x0, x1) = window_bounds(x, half, labels.width());
    let (y0, y1) = window_bounds(y, half, labels.height());
    let own = *labels.get(x, y);
    let mut same = 0usize;
    for yy in y0..y1 {
        for xx in x0..x1 {
            same += usize::from(*labels.get(xx, yy) == own);
        }
    }
    same as f64 / ((x1 - x0) * (y1 - y0)) as f64
}

/// γ at every pixel, via a summed-area table of the water indicator.
pub fn gamma_grid(labels: &Grid<Label>, cfg: GammaConfig) -> Grid<f64> {
    let (w, h) = labels.dims();
    let mut sat = vec![0usize; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0;
        for x in 0..w {
            row += usize::from(*labels.get(x, y) == Label::Water);
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let half = cfg.window / 2;
    Grid::from_fn(w, h, |x, y| {
        let (x0, x1) = window_bounds(x, half, w);
        let (y0, y1) = window_bounds(y, half, h);
        let water = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0]
            - sat[y0 * (w + 1) + x1]
            - sat[y1 * (w + 1) + x0];
        let total = (x1 - x0) * (y1 - y0);
        let same = match labels.get(x, y) {
            Label::Water => water,
            Label::NonWater => total - water,
        };
        same as f64 / total as f64
    })
}

/// Spectral masses of a pixel with NIR value `n_x` and spatial coefficient `gamma`.
pub fn spectral_triple(n_x: f64, params: &SpectralModelParams, gamma: f64) -> Result<MassTriple> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    if !n_x.is_finite() {
        return Err(Error::InvalidArgument(format!("NIR value must be finite, got {n_x}")));
    }
    let n = n_x.clamp(params.n_min, params.n_max);
    let curve = |alpha: f64, dist: f64, d: f64| {
        (alpha / big_n() * (1.0 - (-gamma * dist / d).exp())).clamp(0.0, 1.0)
    };
    let triple = match spectral_label(n, params) {
        Label::Water => {
            let w = curve(params.alpha_water, params.t - n, params.d_water());
            MassTriple::new(w, 0.0, 1.0 - w)
        }
        Label::NonWater => {
            let nw = curve(params.alpha_nonwater, n - params.t, params.d_nonwater());
            MassTriple::new(0.0, nw, 1.0 - nw)
        }
    };
    Ok(triple)
}

pub fn spectral_mass(n_x: f64, params: &SpectralModelParams, gamma: f64) -> Result<MassFunction> {
    spectral_triple(n_x, params, gamma)?.to_mass_function()
}
