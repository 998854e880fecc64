//! Adaptive multi-scale vector median filtering.
//!
//! The filter replaces each pixel by a fusion of weighted geometric medians
//! computed over several window scales:
//!
//! 1. **Adaptive weighting.** Each neighbor `j` of center `i` gets
//!    `w_ij ∝ exp(-‖x_i-x_j‖²/σ_c²) · exp(-‖p_i-p_j‖²/σ_p²) · (1 + λ·a_j)`,
//!    combining content similarity, spatial proximity and an optional
//!    attention-derived saliency score `a_j`. Weights are normalized to sum
//!    to one per window. Each factor can be toggled off independently, which
//!    degrades the filter towards a plain geometric median.
//! 2. **Weighted geometric median.** For every scale the window's median is
//!    found by Weiszfeld iteration `z ← Σ(w/d)x / Σ(w/d)` with the distance
//!    floor `d_j = max(‖z-x_j‖, ε)`, run for exactly `max_iters` updates from
//!    the center pixel. A residual energy `e_s = Σ w‖ẑ-x_j‖` scores how well
//!    the median explains its neighborhood.
//! 3. **Reliability fusion.** Per-scale candidates are averaged with weights
//!    `π_s = softmax(-e_s/τ)`, so the scale most consistent with local image
//!    structure dominates. Mean and uniform fusion variants keep `π = 1/|S|`.
//!
//! [`classic_vmf`] provides the non-adaptive baseline that selects the window
//! member minimizing aggregate distance to all members.
//!
//! Every operation is pure. The per-pixel loop of [`smart_vmf`] is
//! data-parallel over pixels; results are bitwise identical regardless of
//! partitioning because each pixel's sums run in a fixed order over its own
//! window. With the `parallel` feature (default) the driver uses rayon;
//! [`smart_vmf_sequential`] is the always-available fallback path.

use crate::error::{Error, Result};
use crate::image::{clipped_range, AttentionMap, Image, PixelCoord};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How per-scale median candidates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Residual-driven softmax gating.
    Reliability,
    /// Arithmetic mean of candidates, residuals ignored.
    Mean,
    /// Fixed `π = 1/|S|` before any residual computation. Numerically
    /// identical to `Mean`; kept as a distinct label so ablation sweeps can
    /// report both variants.
    Uniform,
}

impl FusionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FusionMode::Reliability => "reliability",
            FusionMode::Mean => "mean",
            FusionMode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reliability" => Ok(FusionMode::Reliability),
            "mean" => Ok(FusionMode::Mean),
            "uniform" => Ok(FusionMode::Uniform),
            other => Err(Error::invalid(format!(
                "fusion mode must be reliability|mean|uniform, got `{other}`"
            ))),
        }
    }
}

/// All filter hyperparameters plus the component toggles used by the
/// ablation variants.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Odd window sides, e.g. `{3, 5, 7}`.
    pub scales: Vec<usize>,
    /// Content falloff; color distances are in per-channel `[0, 1]` units.
    pub sigma_c: f64,
    /// Spatial falloff in pixel units. `None` ties it to the window:
    /// half the current side.
    pub sigma_p: Option<f64>,
    /// Attention boost strength.
    pub lambda: f64,
    /// Fusion temperature.
    pub tau: f64,
    /// Weiszfeld update count; no early exit.
    pub max_iters: usize,
    /// Distance floor in the Weiszfeld update.
    pub epsilon: f64,
    pub use_content: bool,
    pub use_spatial: bool,
    pub use_attention: bool,
    pub fusion_mode: FusionMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            scales: vec![3, 5, 7],
            sigma_c: 0.3,
            sigma_p: None,
            lambda: 1.0,
            tau: 0.1,
            max_iters: 20,
            epsilon: 1e-6,
            use_content: true,
            use_spatial: true,
            use_attention: true,
            fusion_mode: FusionMode::Reliability,
        }
    }
}

/// The component-ablation variants of the filter, expressed as configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVariant {
    Full,
    /// No attention guidance.
    NoAttention,
    /// No content similarity (uniform feature weights).
    NoContent,
    /// No spatial proximity (no distance falloff).
    NoSpatial,
    /// Single scale only (`s = 5`).
    SingleScale,
    /// Mean fusion (no reliability).
    MeanFusion,
    /// Uniform fusion (no gating).
    UniformFusion,
}

impl FilterVariant {
    pub const ALL: [FilterVariant; 7] = [
        FilterVariant::Full,
        FilterVariant::NoAttention,
        FilterVariant::NoContent,
        FilterVariant::NoSpatial,
        FilterVariant::SingleScale,
        FilterVariant::MeanFusion,
        FilterVariant::UniformFusion,
    ];
}

impl FilterConfig {
    /// Builds one of the component-ablation variants on top of the defaults.
    pub fn variant(v: FilterVariant) -> Self {
        let mut cfg = FilterConfig::default();
        match v {
            FilterVariant::Full => {}
            FilterVariant::NoAttention => cfg.use_attention = false,
            FilterVariant::NoContent => cfg.use_content = false,
            FilterVariant::NoSpatial => cfg.use_spatial = false,
            FilterVariant::SingleScale => cfg.scales = vec![5],
            FilterVariant::MeanFusion => cfg.fusion_mode = FusionMode::Mean,
            FilterVariant::UniformFusion => cfg.fusion_mode = FusionMode::Uniform,
        }
        cfg
    }

    /// Single-scale config with the given window side.
    pub fn single_scale(side: usize) -> Self {
        FilterConfig {
            scales: vec![side],
            ..FilterConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::invalid("scales must be non-empty"));
        }
        for &s in &self.scales {
            if s == 0 || s % 2 == 0 {
                return Err(Error::invalid(format!("scales must be odd and >= 1, got {s}")));
            }
        }
        for (name, v) in [("sigma_c", self.sigma_c), ("tau", self.tau), ("epsilon", self.epsilon)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if let Some(sp) = self.sigma_p {
            if !sp.is_finite() || sp <= 0.0 {
                return Err(Error::invalid(format!(
                    "sigma_p must be strictly positive, got {sp}"
                )));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        Ok(())
    }

    /// Effective spatial falloff for a window side.
    pub fn spatial_sigma(&self, side: usize) -> f64 {
        self.sigma_p.unwrap_or(side as f64 / 2.0)
    }
}

/// A window with normalized per-neighbor weights.
///
/// Entries are stored column-wise (coords / flattened pixel vectors /
/// weights) to keep the per-pixel hot path allocation-light; [`entries`]
/// iterates them as `(coord, pixel, weight)` tuples.
///
/// [`entries`]: WeightedNeighborhood::entries
#[derive(Debug, Clone)]
pub struct WeightedNeighborhood {
    center: PixelCoord,
    center_pixel: Vec<f64>,
    channels: usize,
    coords: Vec<PixelCoord>,
    pixels: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedNeighborhood {
    /// Builds a neighborhood from explicit entries, normalizing the weights
    /// to sum to one. Weights must be non-negative with a positive sum.
    pub fn from_entries(
        center: PixelCoord,
        center_pixel: Vec<f64>,
        entries: &[(PixelCoord, Vec<f64>, f64)],
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("neighborhood must be non-empty"));
        }
        let channels = center_pixel.len();
        let mut nbhd = WeightedNeighborhood {
            center,
            center_pixel,
            channels,
            coords: Vec::with_capacity(entries.len()),
            pixels: Vec::with_capacity(entries.len() * channels),
            weights: Vec::with_capacity(entries.len()),
        };
        for (coord, pixel, weight) in entries {
            if pixel.len() != channels {
                return Err(Error::DimensionMismatch(format!(
                    "entry has {} channels, center has {channels}",
                    pixel.len()
                )));
            }
            if !weight.is_finite() || *weight < 0.0 {
                return Err(Error::invalid(format!("weight {weight} must be >= 0")));
            }
            nbhd.coords.push(*coord);
            nbhd.pixels.extend_from_slice(pixel);
            nbhd.weights.push(*weight);
        }
        nbhd.normalize()?;
        Ok(nbhd)
    }

    fn normalize(&mut self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::invalid("weights must have a positive sum"));
        }
        for w in &mut self.weights {
            *w /= sum;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn center(&self) -> PixelCoord {
        self.center
    }

    pub fn center_pixel(&self) -> &[f64] {
        &self.center_pixel
    }

    pub fn coord(&self, i: usize) -> PixelCoord {
        self.coords[i]
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.pixels[i * self.channels..(i + 1) * self.channels]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn entries(&self) -> impl Iterator<Item = (PixelCoord, &[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.coord(i), self.pixel(i), self.weight(i)))
    }

    /// Clears and refills this neighborhood from the clipped `side x side`
    /// window of `img` centered at `center`, computing adaptive weights.
    /// Buffer-reusing twin of [`adaptive_weights`]; both paths share the
    /// same arithmetic.
    fn fill_from_window(
        &mut self,
        img: &Image,
        attention: Option<&AttentionMap>,
        cfg: &FilterConfig,
        center: PixelCoord,
        side: usize,
    ) {
        let channels = img.channels();
        self.center = center;
        self.center_pixel.clear();
        self.center_pixel.extend_from_slice(img.pixel(center));
        self.channels = channels;
        self.coords.clear();
        self.pixels.clear();
        self.weights.clear();

        let radius = side / 2;
        let (r0, r1) = clipped_range(center.row, radius, img.height());
        let (c0, c1) = clipped_range(center.col, radius, img.width());
        let sigma_p = cfg.spatial_sigma(side);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let coord = PixelCoord::new(row, col);
                let pixel = img.pixel(coord);
                let a_j = attention.map_or(0.0, |a| a.value(coord));
                let w = raw_weight(&self.center_pixel, center, pixel, coord, a_j, cfg, sigma_p);
                self.coords.push(coord);
                self.pixels.extend_from_slice(pixel);
                self.weights.push(w);
            }
        }
        self.normalize()
            .expect("window weights always include the unit center factor");
    }

    fn empty() -> Self {
        WeightedNeighborhood {
            center: PixelCoord::new(0, 0),
            center_pixel: Vec::new(),
            channels: 0,
            coords: Vec::new(),
            pixels: Vec::new(),
            weights: Vec::new(),
        }
    }
}

fn color_dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

fn color_dist(a: &[f64], b: &[f64]) -> f64 {
    color_dist2(a, b).sqrt()
}

/// Unnormalized adaptive weight of one neighbor. Factors are replaced by 1
/// when their toggle is off; absent attention enters as `a_j = 0`.
fn raw_weight(
    center_pixel: &[f64],
    center: PixelCoord,
    pixel: &[f64],
    coord: PixelCoord,
    a_j: f64,
    cfg: &FilterConfig,
    sigma_p: f64,
) -> f64 {
    let content = if cfg.use_content {
        (-color_dist2(center_pixel, pixel) / (cfg.sigma_c * cfg.sigma_c)).exp()
    } else {
        1.0
    };
    let spatial = if cfg.use_spatial {
        (-center.dist2(&coord) / (sigma_p * sigma_p)).exp()
    } else {
        1.0
    };
    let attention = if cfg.use_attention { 1.0 + cfg.lambda * a_j } else { 1.0 };
    content * spatial * attention
}

/// Computes normalized adaptive weights for an explicit neighborhood.
///
/// `side` is the window side the neighborhood was drawn from; it only
/// matters when `cfg.sigma_p` is `None` (window-relative spatial falloff).
pub fn adaptive_weights(
    neighbors: &[(PixelCoord, Vec<f64>)],
    center_pixel: &[f64],
    center: PixelCoord,
    attention: Option<&AttentionMap>,
    cfg: &FilterConfig,
    side: usize,
) -> Result<WeightedNeighborhood> {
    if neighbors.is_empty() {
        return Err(Error::invalid("neighborhood must be non-empty"));
    }
    cfg.validate()?;
    let sigma_p = cfg.spatial_sigma(side);
    let entries: Vec<(PixelCoord, Vec<f64>, f64)> = neighbors
        .iter()
        .map(|(coord, pixel)| {
            let a_j = attention.map_or(0.0, |a| a.value(*coord));
            let w = raw_weight(center_pixel, center, pixel, *coord, a_j, cfg, sigma_p);
            (*coord, pixel.clone(), w)
        })
        .collect();
    WeightedNeighborhood::from_entries(center, center_pixel.to_vec(), &entries)
}

/// One Weiszfeld sweep: `z ← Σ(w/d)x / Σ(w/d)` with `d = max(‖z-x‖, ε)`.
fn weiszfeld_step(nbhd: &WeightedNeighborhood, z: &[f64], eps: f64, out: &mut [f64]) {
    let c = nbhd.channels();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut denom = 0.0;
    for i in 0..nbhd.len() {
        let x = nbhd.pixel(i);
        let d = color_dist(z, x).max(eps);
        let q = nbhd.weight(i) / d;
        denom += q;
        for k in 0..c {
            out[k] += q * x[k];
        }
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
}

/// The floored weighted-distance objective `Σ w·max(‖z-x‖, ε)`.
pub fn weiszfeld_objective(nbhd: &WeightedNeighborhood, z: &[f64], eps: f64) -> f64 {
    (0..nbhd.len())
        .map(|i| nbhd.weight(i) * color_dist(z, nbhd.pixel(i)).max(eps))
        .sum()
}

/// Weighted geometric median by Weiszfeld iteration.
///
/// Starts from the neighborhood's center pixel and performs exactly
/// `cfg.max_iters` updates; the result lies in the convex hull of the
/// neighborhood pixels.
pub fn weiszfeld_median(nbhd: &WeightedNeighborhood, cfg: &FilterConfig) -> Vec<f64> {
    let mut z = nbhd.center_pixel().to_vec();
    let mut next = vec![0.0; nbhd.channels()];
    for _ in 0..cfg.max_iters {
        weiszfeld_step(nbhd, &z, cfg.epsilon, &mut next);
        std::mem::swap(&mut z, &mut next);
    }
    z
}

/// Like [`weiszfeld_median`] but also reports the objective at every iterate
/// (`max_iters + 1` values including the start), for convergence checks.
pub fn weiszfeld_median_traced(nbhd: &WeightedNeighborhood, cfg: &FilterConfig) -> (Vec<f64>, Vec<f64>) {
    let iterates = weiszfeld_iterates(nbhd, cfg);
    let trace = iterates
        .iter()
        .map(|z| weiszfeld_objective(nbhd, z, cfg.epsilon))
        .collect();
    (iterates.last().expect("at least the start").clone(), trace)
}

/// Every iterate of the Weiszfeld run, `z_0` (the center pixel) through
/// `z_max_iters`.
pub fn weiszfeld_iterates(nbhd: &WeightedNeighborhood, cfg: &FilterConfig) -> Vec<Vec<f64>> {
    let mut z = nbhd.center_pixel().to_vec();
    let mut next = vec![0.0; nbhd.channels()];
    let mut iterates = Vec::with_capacity(cfg.max_iters + 1);
    iterates.push(z.clone());
    for _ in 0..cfg.max_iters {
        weiszfeld_step(nbhd, &z, cfg.epsilon, &mut next);
        std::mem::swap(&mut z, &mut next);
        iterates.push(z.clone());
    }
    iterates
}

/// The smoothed objective the update decreases monotonically:
/// `Σ w·h(‖z-x‖)` with `h(t) = t` for `t ≥ ε` and `(t² + ε²)/(2ε)` below.
/// Each sweep is one round of alternating minimization on its quadratic
/// majorizer, so this value never increases; the floored objective reported
/// by [`weiszfeld_objective`] agrees with it outside the ε-balls of the
/// neighborhood points and can exceed it by at most `ε/2` per point inside.
pub fn weiszfeld_objective_smoothed(nbhd: &WeightedNeighborhood, z: &[f64], eps: f64) -> f64 {
    (0..nbhd.len())
        .map(|i| {
            let t = color_dist(z, nbhd.pixel(i));
            let h = if t >= eps { t } else { (t * t + eps * eps) / (2.0 * eps) };
            nbhd.weight(i) * h
        })
        .sum()
}

/// Residual energy `Σ w·‖median - x_j‖` of a median candidate.
pub fn residual_energy(nbhd: &WeightedNeighborhood, median: &[f64]) -> f64 {
    (0..nbhd.len())
        .map(|i| nbhd.weight(i) * color_dist(median, nbhd.pixel(i)))
        .sum()
}

/// A per-scale median candidate with its residual energy.
#[derive(Debug, Clone)]
pub struct ScaleCandidate {
    pub value: Vec<f64>,
    pub residual: f64,
}

/// Fusion coefficients `π` for a residual vector; always sums to 1.
pub fn fusion_weights(residuals: &[f64], cfg: &FilterConfig) -> Vec<f64> {
    let n = residuals.len();
    match cfg.fusion_mode {
        FusionMode::Reliability => {
            let hi = residuals
                .iter()
                .map(|e| -e / cfg.tau)
                .fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = residuals.iter().map(|e| (-e / cfg.tau - hi).exp()).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        }
        FusionMode::Mean | FusionMode::Uniform => vec![1.0 / n as f64; n],
    }
}

/// Combines per-scale candidates into the final pixel value.
pub fn fuse_scales(candidates: &[ScaleCandidate], cfg: &FilterConfig) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::invalid("fuse_scales needs at least one candidate"));
    }
    let channels = candidates[0].value.len();
    for cand in candidates {
        if cand.value.len() != channels {
            return Err(Error::DimensionMismatch(
                "scale candidates disagree on channel count".into(),
            ));
        }
        if !cand.residual.is_finite() || cand.residual < 0.0 {
            return Err(Error::invalid(format!(
                "residual {} must be finite and >= 0",
                cand.residual
            )));
        }
    }
    let residuals: Vec<f64> = candidates.iter().map(|c| c.residual).collect();
    let pi = fusion_weights(&residuals, cfg);
    let mut out = vec![0.0; channels];
    for (cand, p) in candidates.iter().zip(&pi) {
        for (o, v) in out.iter_mut().zip(&cand.value) {
            *o += p * v;
        }
    }
    Ok(out)
}

/// Filters one output row; `out_row` is the `width * channels` slice for
/// `row`. Shared by the parallel and sequential drivers.
fn filter_row(
    img: &Image,
    attention: Option<&AttentionMap>,
    cfg: &FilterConfig,
    row: usize,
    out_row: &mut [f64],
) {
    let channels = img.channels();
    let mut nbhd = WeightedNeighborhood::empty();
    let mut candidates: Vec<ScaleCandidate> = Vec::with_capacity(cfg.scales.len());
    for col in 0..img.width() {
        let center = PixelCoord::new(row, col);
        candidates.clear();
        for &side in &cfg.scales {
            nbhd.fill_from_window(img, attention, cfg, center, side);
            let value = weiszfeld_median(&nbhd, cfg);
            let residual = residual_energy(&nbhd, &value);
            candidates.push(ScaleCandidate { value, residual });
        }
        let fused = fuse_scales(&candidates, cfg)
            .expect("scales validated non-empty before the pixel loop");
        let base = col * channels;
        for k in 0..channels {
            out_row[base + k] = fused[k].clamp(0.0, 1.0);
        }
    }
}

fn check_filter_inputs(img: &Image, attention: Option<&AttentionMap>, cfg: &FilterConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(a) = attention {
        a.matches(img)?;
    }
    Ok(())
}

/// Adaptive multi-scale vector median filter.
///
/// Per pixel: window → adaptive weights → Weiszfeld median and residual per
/// scale → reliability fusion; the fused value is clamped to `[0, 1]`.
/// Deterministic for fixed inputs and config. With the `parallel` feature
/// rows are processed by rayon, bitwise identical to the sequential path.
pub fn smart_vmf(img: &Image, attention: Option<&AttentionMap>, cfg: &FilterConfig) -> Result<Image> {
    check_filter_inputs(img, attention, cfg)?;
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![0.0; h * w * c];

    #[cfg(feature = "parallel")]
    data.par_chunks_mut(w * c)
        .enumerate()
        .for_each(|(row, out_row)| filter_row(img, attention, cfg, row, out_row));

    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(w * c)
        .enumerate()
        .for_each(|(row, out_row)| filter_row(img, attention, cfg, row, out_row));

    Ok(Image::from_clamped(h, w, c, data))
}

/// Sequential reference path of [`smart_vmf`]; always compiled so the
/// parallel driver can be checked and benchmarked against it.
pub fn smart_vmf_sequential(
    img: &Image,
    attention: Option<&AttentionMap>,
    cfg: &FilterConfig,
) -> Result<Image> {
    check_filter_inputs(img, attention, cfg)?;
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![0.0; h * w * c];
    data.chunks_mut(w * c)
        .enumerate()
        .for_each(|(row, out_row)| filter_row(img, attention, cfg, row, out_row));
    Ok(Image::from_clamped(h, w, c, data))
}

fn classic_row(img: &Image, side: usize, row: usize, out_row: &mut [f64]) {
    let channels = img.channels();
    let radius = side / 2;
    let mut window_px: Vec<f64> = Vec::with_capacity(side * side * channels);
    for col in 0..img.width() {
        let (r0, r1) = clipped_range(row, radius, img.height());
        let (c0, c1) = clipped_range(col, radius, img.width());
        window_px.clear();
        for r in r0..=r1 {
            for c in c0..=c1 {
                window_px.extend_from_slice(img.pixel(PixelCoord::new(r, c)));
            }
        }
        let n = (r1 - r0 + 1) * (c1 - c0 + 1);
        let mut best_idx = 0;
        let mut best_sum = f64::INFINITY;
        for i in 0..n {
            let xi = &window_px[i * channels..(i + 1) * channels];
            let mut sum = 0.0;
            for j in 0..n {
                sum += color_dist(xi, &window_px[j * channels..(j + 1) * channels]);
            }
            if sum < best_sum {
                best_sum = sum;
                best_idx = i;
            }
        }
        let base = col * channels;
        out_row[base..base + channels]
            .copy_from_slice(&window_px[best_idx * channels..(best_idx + 1) * channels]);
    }
}

/// Classic vector median filter: each pixel is replaced by the window
/// *member* minimizing the aggregate Euclidean distance to all members.
/// Ties break to the first candidate in row-major window order.
pub fn classic_vmf(img: &Image, side: usize) -> Result<Image> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::invalid(format!("window side must be odd, got {side}")));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![0.0; h * w * c];

    #[cfg(feature = "parallel")]
    data.par_chunks_mut(w * c)
        .enumerate()
        .for_each(|(row, out_row)| classic_row(img, side, row, out_row));

    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(w * c)
        .enumerate()
        .for_each(|(row, out_row)| classic_row(img, side, row, out_row));

    Ok(Image::from_clamped(h, w, c, data))
}
