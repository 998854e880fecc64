//! Localized visible adversarial patch training.
//!
//! Patches are small image regions, defined by a binary mask, whose content
//! is optimized to force a targeted misclassification: element-wise
//! replacement `x' = (1-q)·x + q·δ` followed by gradient steps on the
//! masked pixels that raise the target logit while suppressing the current
//! strongest competitor. Patch placement is deterministic: squares at the
//! image corners, which are the least salient positions.
//!
//! The update direction deserves a note. The classic printed form of the
//! training loop *subtracts* `ε·(∇_t − ∇_max)`, which descends the very
//! objective the attack is supposed to maximize. The default here is the
//! ascent step `δ ← δ + ε·(∇_t − ∇_max)`; the literal descending form stays
//! available behind [`AttackConfig::literal_sign`] for auditability.

use crate::classifier::{argmax, softmax, Classifier};
use crate::error::{Error, Result};
use crate::image::{Image, PixelCoord};

/// Binary patch-region mask `q ∈ {0,1}^(h×w)`, broadcast over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be exactly 0 or 1"));
        }
        Ok(Mask { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    /// Number of masked (patch) pixels.
    pub fn popcount(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }
}

/// Attack hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Class the patch should force.
    pub target_class: usize,
    /// Stop once softmax probability of the target reaches this.
    pub target_prob: f64,
    /// Gradient step size.
    pub step: f64,
    /// Iteration budget.
    pub max_iters: usize,
    /// Patch area as a fraction of the image; the side is
    /// `round(sqrt(fraction·h·w))`.
    pub area_fraction: f64,
    /// Use the literal descending update instead of ascent.
    pub literal_sign: bool,
    /// Pin the competitor to the source class instead of re-evaluating the
    /// strongest non-target class each iteration.
    pub pin_source: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            target_class: 0,
            target_prob: 0.5,
            step: 1e-2,
            max_iters: 500,
            area_fraction: 0.01,
            literal_sign: false,
            pin_source: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_prob > 0.0 && self.target_prob <= 1.0) {
            return Err(Error::invalid(format!(
                "target_prob {} must lie in (0, 1]",
                self.target_prob
            )));
        }
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::invalid(format!("step {} must be > 0", self.step)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.area_fraction > 0.0 && self.area_fraction <= 0.25) {
            return Err(Error::invalid(format!(
                "area_fraction {} must lie in (0, 0.25]",
                self.area_fraction
            )));
        }
        Ok(())
    }
}

/// Patch side for an area fraction: `round(sqrt(fraction·h·w))`, at least 1.
pub fn patch_side_for_area(fraction: f64, height: usize, width: usize) -> usize {
    ((fraction * (height * width) as f64).sqrt().round() as usize).max(1)
}

/// The first `n` of the four corner anchors
/// `(0,0), (0,w-s), (h-s,0), (h-s,w-s)`, in exactly that order.
/// Requires `s ≤ min(h,w)/2` so the squares can never overlap.
pub fn corner_placements(height: usize, width: usize, side: usize, n: usize) -> Result<Vec<PixelCoord>> {
    if n == 0 || n > 4 {
        return Err(Error::invalid(format!("corner count {n} must lie in 1..=4")));
    }
    if side == 0 {
        return Err(Error::invalid("patch side must be >= 1"));
    }
    if 2 * side > height.min(width) {
        return Err(Error::invalid(format!(
            "patch side {side} exceeds min(h, w)/2 = {}; corners would overlap",
            height.min(width) / 2
        )));
    }
    let all = [
        PixelCoord::new(0, 0),
        PixelCoord::new(0, width - side),
        PixelCoord::new(height - side, 0),
        PixelCoord::new(height - side, width - side),
    ];
    Ok(all[..n].to_vec())
}

/// Builds the union mask of `side x side` squares at the given top-left
/// corners.
pub fn build_mask(height: usize, width: usize, side: usize, placements: &[PixelCoord]) -> Result<Mask> {
    let mut data = vec![0u8; height * width];
    for p in placements {
        if p.row + side > height || p.col + side > width {
            return Err(Error::invalid(format!(
                "placement ({}, {}) with side {side} leaves the {height}x{width} image",
                p.row, p.col
            )));
        }
        for r in p.row..p.row + side {
            for c in p.col..p.col + side {
                data[r * width + c] = 1;
            }
        }
    }
    Mask::new(height, width, data)
}

/// Element-wise replacement `(1-q)·x + q·δ`, with `q` broadcast over
/// channels and the result clamped to `[0, 1]`.
pub fn apply_patch(img: &Image, delta: &Image, mask: &Mask) -> Result<Image> {
    if delta.height() != img.height()
        || delta.width() != img.width()
        || delta.channels() != img.channels()
    {
        return Err(Error::DimensionMismatch("patch field shape differs from image".into()));
    }
    if mask.height() != img.height() || mask.width() != img.width() {
        return Err(Error::DimensionMismatch("mask shape differs from image".into()));
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(img.data().len());
    for (i, (&x, &d)) in img.data().iter().zip(delta.data()).enumerate() {
        let q = mask.data()[i / c] as f64;
        data.push(((1.0 - q) * x + q * d).clamp(0.0, 1.0));
    }
    Ok(Image::from_clamped(img.height(), img.width(), img.channels(), data))
}

/// One optimization step as seen from outside: state of the adversarial
/// image at loop entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    /// Softmax probability of the target class.
    pub target_prob: f64,
    /// Current predicted class.
    pub predicted: usize,
    /// `logit[target] - logit[competitor]`, the quantity the ascent step
    /// maximizes.
    pub objective: f64,
}

/// Trained patch content: one `side x side x channels` block per placement,
/// extracted from the jointly optimized field.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    pub side: usize,
    pub placements: Vec<PixelCoord>,
    /// `placements.len()` blocks, each `side·side·channels` values in
    /// row-major channel-interleaved order.
    pub contents: Vec<Vec<f64>>,
}

impl PatchSpec {
    /// Cuts the per-placement blocks out of a full-image patch field.
    pub fn extract(delta: &Image, side: usize, placements: &[PixelCoord]) -> Result<Self> {
        let c = delta.channels();
        let mut contents = Vec::with_capacity(placements.len());
        for p in placements {
            if p.row + side > delta.height() || p.col + side > delta.width() {
                return Err(Error::invalid(format!(
                    "placement ({}, {}) with side {side} out of bounds",
                    p.row, p.col
                )));
            }
            let mut block = Vec::with_capacity(side * side * c);
            for r in p.row..p.row + side {
                for col in p.col..p.col + side {
                    block.extend_from_slice(delta.pixel(PixelCoord::new(r, col)));
                }
            }
            contents.push(block);
        }
        Ok(PatchSpec {
            side,
            placements: placements.to_vec(),
            contents,
        })
    }

    /// One placement's content as a standalone image, e.g. for PPM export.
    pub fn content_image(&self, index: usize, channels: usize) -> Result<Image> {
        let block = self
            .contents
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no placement {index}")))?;
        Image::new(self.side, self.side, channels, block.clone())
    }
}

/// Everything a finished attack produced.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    /// The optimized full-image patch field (zero off the mask support).
    pub delta: Image,
    /// `(1-q)·x + q·δ` for the final δ.
    pub attacked: Image,
    pub trace: Vec<TraceStep>,
    /// Whether the target probability threshold was reached in budget.
    pub success: bool,
    /// The model's prediction on the clean image.
    pub source_class: usize,
    /// Recorded for provenance; the optimization itself is deterministic.
    pub seed: u64,
}

/// Trains a patch against `model`.
///
/// Starting from `δ = 0`, loops while the target's softmax probability is
/// below `cfg.target_prob` and the iteration budget remains: evaluates the
/// target logit and the strongest non-target logit, takes their input
/// gradients, updates δ on the mask support only, clamps δ to `[0, 1]` and
/// re-applies the replacement. Failure to reach the threshold is a reported
/// outcome, not an error.
pub fn train_lavan(
    img: &Image,
    model: &dyn Classifier,
    cfg: &AttackConfig,
    mask: &Mask,
    seed: u64,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    if mask.height() != img.height() || mask.width() != img.width() {
        return Err(Error::DimensionMismatch("mask shape differs from image".into()));
    }
    if mask.popcount() == 0 {
        return Err(Error::invalid("mask has no support"));
    }
    if cfg.target_class >= model.num_classes() {
        return Err(Error::invalid(format!(
            "target class {} out of range 0..{}",
            cfg.target_class,
            model.num_classes()
        )));
    }
    let source_class = argmax(&model.predict_logits(img)?);
    if source_class == cfg.target_class {
        return Err(Error::invalid(
            "model already predicts the target class; nothing to attack",
        ));
    }

    let c = img.channels();
    let masked: Vec<usize> = (0..img.height() * img.width())
        .filter(|&i| mask.data()[i] == 1)
        .collect();
    let mut delta = Image::constant(img.height(), img.width(), c, 0.0)?;
    let mut attacked = apply_patch(img, &delta, mask)?;
    let mut trace = Vec::new();
    let mut success = false;
    let sign = if cfg.literal_sign { -1.0 } else { 1.0 };

    for iteration in 0..=cfg.max_iters {
        let logits = model.predict_logits(&attacked)?;
        let probs = softmax(&logits);
        let competitor = if cfg.pin_source {
            source_class
        } else {
            strongest_excluding(&logits, cfg.target_class)
        };
        trace.push(TraceStep {
            iteration,
            target_prob: probs[cfg.target_class],
            predicted: argmax(&logits),
            objective: logits[cfg.target_class] - logits[competitor],
        });
        if probs[cfg.target_class] >= cfg.target_prob {
            success = true;
            break;
        }
        if iteration == cfg.max_iters {
            break;
        }
        let grad_t = model.input_gradient(&attacked, cfg.target_class)?;
        let grad_max = model.input_gradient(&attacked, competitor)?;
        let mut delta_data = delta.into_data();
        for &pix in &masked {
            for ch in 0..c {
                let i = pix * c + ch;
                let dir = grad_t.data[i] - grad_max.data[i];
                delta_data[i] = (delta_data[i] + sign * cfg.step * dir).clamp(0.0, 1.0);
            }
        }
        delta = Image::from_clamped(img.height(), img.width(), c, delta_data);
        attacked = apply_patch(img, &delta, mask)?;
    }

    Ok(AttackOutcome {
        delta,
        attacked,
        trace,
        success,
        source_class,
        seed,
    })
}

fn strongest_excluding(logits: &[f64], excluded: usize) -> usize {
    let mut best = if excluded == 0 { 1 } else { 0 };
    for (i, &v) in logits.iter().enumerate() {
        if i != excluded && v > logits[best] {
            best = i;
        }
    }
    best
}
