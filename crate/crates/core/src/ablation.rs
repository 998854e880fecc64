//! Deterministic image ablation families and their patch-overlap bounds.
//!
//! An ablation keeps a small retained region of the image (a square block or
//! a vertical column band) and replaces everything else with a neutral fill
//! value. Enumerating all cyclic positions of the retained region gives a
//! deterministic set of views; a classifier voting over that set can only be
//! swayed by a patch in the views whose retained region intersects it, and
//! the fraction of such views is bounded in closed form by [`delta_block`]
//! and [`delta_band`].
//!
//! Block and band positions wrap around the image edges. Cyclic enumeration
//! keeps every view's retained pixel count constant, which is what makes the
//! band bound exact rather than an inequality.

use crate::error::{Error, Result};
use crate::image::Image;

/// Which retained-region family to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationKind {
    /// Retain an `s x s` square.
    Block,
    /// Retain a width-`s` column band spanning all rows.
    Band,
}

impl AblationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AblationKind::Block => "block",
            AblationKind::Band => "band",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(AblationKind::Block),
            "band" => Ok(AblationKind::Band),
            other => Err(Error::invalid(format!(
                "ablation kind must be block|band, got `{other}`"
            ))),
        }
    }
}

/// Parameters of an ablation family.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub kind: AblationKind,
    /// Block side or band width, in pixels.
    pub size: usize,
    /// Step between enumerated start positions.
    pub stride: usize,
    /// Value written outside the retained region, mid-gray by default.
    pub fill: f64,
}

impl AblationSpec {
    /// The default family: column bands of width `ceil(w/8)`, stride 1.
    pub fn default_for_width(width: usize) -> Self {
        AblationSpec {
            kind: AblationKind::Band,
            size: width.div_ceil(8),
            stride: 1,
            fill: 0.5,
        }
    }

    pub fn validate_for(&self, img: &Image) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("ablation size must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("ablation stride must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(Error::invalid(format!(
                "ablation fill {} must lie in [0, 1]",
                self.fill
            )));
        }
        let (h, w) = (img.height(), img.width());
        match self.kind {
            AblationKind::Block if self.size > h.min(w) => Err(Error::invalid(format!(
                "block size {} exceeds min(h, w) = {}",
                self.size,
                h.min(w)
            ))),
            AblationKind::Band if self.size > w => Err(Error::invalid(format!(
                "band width {} exceeds image width {w}",
                self.size
            ))),
            _ => Ok(()),
        }
    }
}

/// Ablation parameters before the size is pinned to an image width;
/// `size: None` resolves to the default `ceil(w/8)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationParams {
    pub kind: AblationKind,
    pub size: Option<usize>,
    pub stride: usize,
    pub fill: f64,
}

impl Default for AblationParams {
    fn default() -> Self {
        AblationParams {
            kind: AblationKind::Band,
            size: None,
            stride: 1,
            fill: 0.5,
        }
    }
}

impl AblationParams {
    pub fn resolve(&self, width: usize) -> AblationSpec {
        AblationSpec {
            kind: self.kind,
            size: self.size.unwrap_or_else(|| width.div_ceil(8)),
            stride: self.stride,
            fill: self.fill,
        }
    }
}

/// The retained region of one ablation member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetainedRegion {
    Band { start_col: usize },
    Block { start_row: usize, start_col: usize },
}

/// One ablated view: the base image inside `region`, fill elsewhere.
#[derive(Debug, Clone)]
pub struct AblationMember {
    pub region: RetainedRegion,
    pub image: Image,
}

/// The full deterministic family of ablated views of one image.
#[derive(Debug, Clone)]
pub struct AblationSet {
    pub base: Image,
    pub members: Vec<AblationMember>,
    /// Member count.
    pub n: usize,
    /// Worst-case fraction of members a single `patch_side x patch_side`
    /// patch can intersect, from the matching closed-form bound; 0 when
    /// generated with `patch_side = 0`.
    pub delta: f64,
}

fn check_delta_args(h: usize, w: usize, m: usize, s: usize, s_limit: usize, what: &str) -> Result<()> {
    if h == 0 || w == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("patch side must be >= 1"));
    }
    if s == 0 {
        return Err(Error::invalid("retained size must be >= 1"));
    }
    if m > h.min(w) {
        return Err(Error::invalid(format!(
            "patch side {m} exceeds min(h, w) = {}",
            h.min(w)
        )));
    }
    if s > s_limit {
        return Err(Error::invalid(format!("{what} size {s} exceeds limit {s_limit}")));
    }
    Ok(())
}

/// Fraction of `s x s` block positions an `m x m` patch can intersect:
/// `(m+s-1)² / (h·w)`, capped at 1.
pub fn delta_block(h: usize, w: usize, m: usize, s: usize) -> Result<f64> {
    check_delta_args(h, w, m, s, h.min(w), "block")?;
    let a = (m + s - 1) as f64;
    Ok((a * a / (h as f64 * w as f64)).min(1.0))
}

/// Fraction of width-`s` band positions an `m x m` patch can intersect:
/// `(m+s-1) / w`, capped at 1.
pub fn delta_band(h: usize, w: usize, m: usize, s: usize) -> Result<f64> {
    check_delta_args(h, w, m, s, w, "band")?;
    Ok(((m + s - 1) as f64 / w as f64).min(1.0))
}

/// Delta for a spec against image dimensions; `patch_side = 0` means no
/// threat patch and yields 0.
pub fn delta_for_spec(spec: &AblationSpec, h: usize, w: usize, patch_side: usize) -> Result<f64> {
    if patch_side == 0 {
        return Ok(0.0);
    }
    match spec.kind {
        AblationKind::Block => delta_block(h, w, patch_side, spec.size),
        AblationKind::Band => delta_band(h, w, patch_side, spec.size),
    }
}

fn band_member(img: &Image, fill: f64, start_col: usize, size: usize) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![fill; h * w * c];
    for row in 0..h {
        for k in 0..size {
            let col = (start_col + k) % w;
            let idx = (row * w + col) * c;
            data[idx..idx + c].copy_from_slice(&img.data()[idx..idx + c]);
        }
    }
    Image::from_clamped(h, w, c, data)
}

fn block_member(img: &Image, fill: f64, start_row: usize, start_col: usize, size: usize) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![fill; h * w * c];
    for i in 0..size {
        let row = (start_row + i) % h;
        for j in 0..size {
            let col = (start_col + j) % w;
            let idx = (row * w + col) * c;
            data[idx..idx + c].copy_from_slice(&img.data()[idx..idx + c]);
        }
    }
    Image::from_clamped(h, w, c, data)
}

/// Enumerates every cyclic position of the retained region (stepping by
/// `spec.stride`) and materializes the ablated views in deterministic
/// position order. `patch_side` sets the threat-model patch for the stored
/// overlap bound; pass 0 when there is none.
pub fn generate_ablations(img: &Image, spec: &AblationSpec, patch_side: usize) -> Result<AblationSet> {
    spec.validate_for(img)?;
    let (h, w) = (img.height(), img.width());
    let delta = delta_for_spec(spec, h, w, patch_side)?;
    let mut members = Vec::new();
    match spec.kind {
        AblationKind::Band => {
            for start_col in (0..w).step_by(spec.stride) {
                members.push(AblationMember {
                    region: RetainedRegion::Band { start_col },
                    image: band_member(img, spec.fill, start_col, spec.size),
                });
            }
        }
        AblationKind::Block => {
            for start_row in (0..h).step_by(spec.stride) {
                for start_col in (0..w).step_by(spec.stride) {
                    members.push(AblationMember {
                        region: RetainedRegion::Block { start_row, start_col },
                        image: block_member(img, spec.fill, start_row, start_col, spec.size),
                    });
                }
            }
        }
    }
    let n = members.len();
    Ok(AblationSet {
        base: img.clone(),
        members,
        n,
        delta,
    })
}
