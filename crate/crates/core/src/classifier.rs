//! Pluggable classifier contract plus a desk-scale reference implementation.
//!
//! The attack and evaluation stages only need two things from a model:
//! logits for an image and the gradient of one logit with respect to the
//! input pixels. [`Classifier`] captures exactly that. [`ReferenceModel`] is
//! a multinomial logistic regression over average-pooled pixels — small
//! enough to train in milliseconds, affine so its analytic gradients can be
//! checked against finite differences at tight tolerance, and still easy to
//! fool with localized patches. [`generate_synthetic`] builds the matching
//! class-separable dataset of oriented gratings.

use crate::error::{Error, Result};
use crate::image::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Image-shaped field of partial derivatives; same layout as [`Image`] data
/// but values are unbounded.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// A differentiable classifier over [`Image`]s.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;

    /// Pre-softmax class scores; finite for any valid image.
    fn predict_logits(&self, img: &Image) -> Result<Vec<f64>>;

    /// Analytic gradient of `logit[class]` with respect to every input pixel.
    fn input_gradient(&self, img: &Image, class: usize) -> Result<Gradient>;
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let hi = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - hi).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Multinomial logistic regression over `pool_factor`-average-pooled pixels.
///
/// Features are the pooled cell means (channel-interleaved, row-major cells)
/// with an appended constant 1; logits are `W·φ(x)`. The model is affine in
/// the input, so `input_gradient` spreads each cell weight uniformly over
/// the cell's pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    num_classes: usize,
    height: usize,
    width: usize,
    channels: usize,
    pool_factor: usize,
    /// `num_classes x feat_len`, row-major; `feat_len = D + 1` with the bias
    /// column last.
    weights: Vec<f64>,
}

impl ReferenceModel {
    pub fn zeroed(
        num_classes: usize,
        height: usize,
        width: usize,
        channels: usize,
        pool_factor: usize,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("model needs at least one class"));
        }
        if pool_factor == 0 || !height.is_multiple_of(pool_factor) || !width.is_multiple_of(pool_factor) {
            return Err(Error::invalid(format!(
                "pool factor {pool_factor} must divide {height}x{width}"
            )));
        }
        let feat_len = (height / pool_factor) * (width / pool_factor) * channels + 1;
        Ok(ReferenceModel {
            num_classes,
            height,
            width,
            channels,
            pool_factor,
            weights: vec![0.0; num_classes * feat_len],
        })
    }

    /// Builds a model with explicit weights; mainly for tests that need
    /// hand-crafted predictions.
    pub fn from_weights(
        num_classes: usize,
        height: usize,
        width: usize,
        channels: usize,
        pool_factor: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut model = ReferenceModel::zeroed(num_classes, height, width, channels, pool_factor)?;
        if weights.len() != model.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight length {} != {}",
                weights.len(),
                model.weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        model.weights = weights;
        Ok(model)
    }

    pub fn pool_factor(&self) -> usize {
        self.pool_factor
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn feat_len(&self) -> usize {
        (self.height / self.pool_factor) * (self.width / self.pool_factor) * self.channels + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_dims(&self, img: &Image) -> Result<()> {
        if img.height() != self.height || img.width() != self.width || img.channels() != self.channels
        {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{}x{} vs model input {}x{}x{}",
                img.height(),
                img.width(),
                img.channels(),
                self.height,
                self.width,
                self.channels
            )));
        }
        Ok(())
    }

    /// Average-pooled features with the trailing bias 1.
    pub fn features(&self, img: &Image) -> Result<Vec<f64>> {
        self.check_dims(img)?;
        let pf = self.pool_factor;
        let (ph, pw) = (self.height / pf, self.width / pf);
        let c = self.channels;
        let area = (pf * pf) as f64;
        let mut feats = vec![0.0; ph * pw * c + 1];
        for (i, feat) in feats[..ph * pw * c].iter_mut().enumerate() {
            let ch = i % c;
            let cell = i / c;
            let (ci, cj) = (cell / pw, cell % pw);
            let mut sum = 0.0;
            for r in ci * pf..(ci + 1) * pf {
                for col in cj * pf..(cj + 1) * pf {
                    sum += img.data()[(r * self.width + col) * c + ch];
                }
            }
            *feat = sum / area;
        }
        feats[ph * pw * c] = 1.0;
        Ok(feats)
    }

    /// Deterministic flat binary: magic, six u32 dimension fields, then the
    /// weight matrix as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 6 * 4 + self.weights.len() * 8);
        out.extend_from_slice(b"RFM1");
        for v in [
            self.num_classes,
            self.height,
            self.width,
            self.channels,
            self.pool_factor,
            self.feat_len(),
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::UnsupportedFormat(format!("model file: {msg}"));
        if bytes.len() < 28 || &bytes[..4] != b"RFM1" {
            return Err(bad("missing RFM1 header"));
        }
        let mut fields = [0usize; 6];
        for (i, f) in fields.iter_mut().enumerate() {
            let off = 4 + i * 4;
            *f = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        }
        let [num_classes, height, width, channels, pool_factor, feat_len] = fields;
        let mut model = ReferenceModel::zeroed(num_classes, height, width, channels, pool_factor)
            .map_err(|e| bad(&e.to_string()))?;
        if feat_len != model.feat_len() {
            return Err(bad("feature length disagrees with dimensions"));
        }
        let body = &bytes[28..];
        if body.len() != num_classes * feat_len * 8 {
            return Err(bad("truncated weight payload"));
        }
        model.weights = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(bad("non-finite weight"));
        }
        Ok(model)
    }

    /// Sidecar text manifest describing how the model was produced.
    pub fn manifest(&self, seed: u64, epochs: usize, lr: f64) -> String {
        let mut s = String::new();
        s.push_str(&format!("seed={seed}\n"));
        s.push_str(&format!("epochs={epochs}\n"));
        s.push_str(&format!("lr={lr}\n"));
        s.push_str(&format!("num_classes={}\n", self.num_classes));
        s.push_str(&format!(
            "input={}x{}x{}\n",
            self.height, self.width, self.channels
        ));
        s.push_str(&format!("pool_factor={}\n", self.pool_factor));
        s
    }
}

impl Classifier for ReferenceModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_logits(&self, img: &Image) -> Result<Vec<f64>> {
        let feats = self.features(img)?;
        let fl = feats.len();
        let mut logits = vec![0.0; self.num_classes];
        for (k, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights[k * fl..(k + 1) * fl];
            *logit = row.iter().zip(&feats).map(|(w, f)| w * f).sum();
        }
        Ok(logits)
    }

    fn input_gradient(&self, img: &Image, class: usize) -> Result<Gradient> {
        self.check_dims(img)?;
        if class >= self.num_classes {
            return Err(Error::invalid(format!(
                "class {class} out of range 0..{}",
                self.num_classes
            )));
        }
        let pf = self.pool_factor;
        let pw = self.width / pf;
        let c = self.channels;
        let fl = self.feat_len();
        let row = &self.weights[class * fl..(class + 1) * fl];
        let area = (pf * pf) as f64;
        let mut data = vec![0.0; self.height * self.width * c];
        for r in 0..self.height {
            for col in 0..self.width {
                let cell = (r / pf) * pw + col / pf;
                for ch in 0..c {
                    data[(r * self.width + col) * c + ch] = row[cell * c + ch] / area;
                }
            }
        }
        Ok(Gradient {
            height: self.height,
            width: self.width,
            channels: c,
            data,
        })
    }
}

/// Labeled synthetic images, class-balanced and reproducible bit-exact from
/// the seed.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub images: Vec<(Image, usize)>,
    pub num_classes: usize,
    pub seed: u64,
}

/// Generates the oriented-grating dataset: class `k` is a sinusoidal grating
/// with wave direction `π·k/K`, per-image phase jitter and pixel noise.
pub fn generate_synthetic(
    seed: u64,
    num_classes: usize,
    per_class: usize,
    height: usize,
    width: usize,
) -> Result<SyntheticDataset> {
    if num_classes < 2 {
        return Err(Error::invalid("synthetic dataset needs at least two classes"));
    }
    if num_classes > 16 {
        return Err(Error::invalid(
            "more than 16 classes would no longer be separable by construction",
        ));
    }
    if per_class == 0 {
        return Err(Error::invalid("per_class must be >= 1"));
    }
    if height < 4 || width < 4 {
        return Err(Error::invalid("synthetic images must be at least 4x4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    let wavelength = (height.min(width) as f64 / 2.0).max(4.0);
    let mut images = Vec::with_capacity(num_classes * per_class);
    for k in 0..num_classes {
        let theta = std::f64::consts::PI * k as f64 / num_classes as f64;
        let (kx, ky) = (theta.cos(), theta.sin());
        for _ in 0..per_class {
            let phase: f64 = rng.random_range(-0.3..0.3);
            let mut data = Vec::with_capacity(height * width);
            for r in 0..height {
                for c in 0..width {
                    let arg = 2.0 * std::f64::consts::PI * (kx * c as f64 + ky * r as f64)
                        / wavelength
                        + phase;
                    let v = 0.5 + 0.015 * arg.sin() + noise.sample(&mut rng);
                    data.push(v.clamp(0.0, 1.0));
                }
            }
            images.push((Image::new(height, width, 1, data)?, k));
        }
    }
    Ok(SyntheticDataset {
        images,
        num_classes,
        seed,
    })
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Trains the reference model by full-batch gradient descent on the softmax
/// cross-entropy. Deterministic given the dataset and hyperparameters.
pub fn train_reference(
    data: &SyntheticDataset,
    epochs: usize,
    lr: f64,
    pool_factor: usize,
) -> Result<(ReferenceModel, TrainReport)> {
    let Some((first, _)) = data.images.first() else {
        return Err(Error::invalid("training dataset is empty"));
    };
    let k = data.num_classes;
    let mut model = ReferenceModel::zeroed(
        k,
        first.height(),
        first.width(),
        first.channels(),
        pool_factor,
    )?;
    let feats: Vec<Vec<f64>> = data
        .images
        .iter()
        .map(|(img, _)| model.features(img))
        .collect::<Result<_>>()?;
    for (_, label) in &data.images {
        if *label >= k {
            return Err(Error::invalid(format!("label {label} out of range 0..{k}")));
        }
    }
    let fl = model.feat_len();
    let n = feats.len() as f64;
    let mut losses = Vec::with_capacity(epochs);
    let mut grad = vec![0.0; k * fl];
    for _ in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (phi, (_, label)) in feats.iter().zip(&data.images) {
            let mut logits = vec![0.0; k];
            for (cls, logit) in logits.iter_mut().enumerate() {
                let row = &model.weights[cls * fl..(cls + 1) * fl];
                *logit = row.iter().zip(phi).map(|(w, f)| w * f).sum();
            }
            let probs = softmax(&logits);
            loss -= probs[*label].max(1e-300).ln();
            for cls in 0..k {
                let coef = probs[cls] - if cls == *label { 1.0 } else { 0.0 };
                let grow = &mut grad[cls * fl..(cls + 1) * fl];
                for (g, f) in grow.iter_mut().zip(phi) {
                    *g += coef * f;
                }
            }
        }
        losses.push(loss / n);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= lr * g / n;
        }
    }
    let mut correct = 0usize;
    for (phi, (_, label)) in feats.iter().zip(&data.images) {
        let mut logits = vec![0.0; k];
        for (cls, logit) in logits.iter_mut().enumerate() {
            let row = &model.weights[cls * fl..(cls + 1) * fl];
            *logit = row.iter().zip(phi).map(|(w, f)| w * f).sum();
        }
        if argmax(&logits) == *label {
            correct += 1;
        }
    }
    let report = TrainReport {
        losses,
        train_accuracy: correct as f64 / n,
    };
    Ok((model, report))
}
