//! Clean and certified-robust accuracy over ablation votes, plus the
//! attack-grid sweep and its CSV report.
//!
//! Clean accuracy is the fraction of ablated views a classifier labels with
//! the true class. Certification asks more: the true class's vote count must
//! beat the runner-up by more than `2·Δ·n`, where Δ bounds the fraction of
//! views a patch can touch — then no patch of the bounded size could have
//! flipped the majority. For multi-patch attacks Δ composes by the union
//! bound (each patch independently can intersect views) and stays capped
//! at 1, where certification is unattainable by construction.
//!
//! The sweep crosses every dataset image with the attack grid (patch count,
//! patch area) and the defense pipelines:
//!
//! - `none`: no filter, degenerate full-width band views (plain prediction)
//! - `vmf-baseline`: classic vector median filter, then ablation voting
//! - `smoothed-only`: ablation voting on the raw image
//! - `filtered`: adaptive multi-scale filter, then ablation voting
//!
//! Filtering always runs before ablation; the vote is over views of the
//! filtered image. Sweep cells are independent and run in parallel with the
//! `parallel` feature; records are sorted before reporting so the CSV bytes
//! are a pure function of inputs and seed.

use crate::ablation::{generate_ablations, AblationKind, AblationParams, AblationSet, AblationSpec};
use crate::adversary::{build_mask, corner_placements, patch_side_for_area, train_lavan, AttackConfig};
use crate::classifier::{argmax, Classifier, SyntheticDataset};
use crate::error::{Error, Result};
use crate::filter::{classic_vmf, smart_vmf, FilterConfig};
use crate::image::Image;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Per-class prediction counts over one ablation set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationVote {
    pub counts: Vec<usize>,
    pub n: usize,
}

impl AblationVote {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("vote needs at least one class"));
        }
        let n = counts.iter().sum();
        Ok(AblationVote { counts, n })
    }

    /// The majority class, if it is a strict majority.
    pub fn strict_majority(&self) -> Option<usize> {
        let top = argmax_count(&self.counts);
        let ties = self.counts.iter().filter(|&&c| c == self.counts[top]).count();
        (ties == 1).then_some(top)
    }
}

fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Predicts every member of an ablation set and tallies the votes.
pub fn vote_over(model: &dyn Classifier, ablations: &AblationSet) -> Result<AblationVote> {
    let mut counts = vec![0usize; model.num_classes()];
    for member in &ablations.members {
        let logits = model.predict_logits(&member.image)?;
        counts[argmax(&logits)] += 1;
    }
    AblationVote::new(counts)
}

/// Fraction of ablated views predicted as the true class, with the full
/// vote histogram.
pub fn clean_accuracy(
    model: &dyn Classifier,
    ablations: &AblationSet,
    true_class: usize,
) -> Result<(f64, AblationVote)> {
    if ablations.members.is_empty() {
        return Err(Error::invalid("ablation set is empty"));
    }
    if true_class >= model.num_classes() {
        return Err(Error::invalid(format!(
            "class {true_class} out of range 0..{}",
            model.num_classes()
        )));
    }
    let vote = vote_over(model, ablations)?;
    Ok((vote.counts[true_class] as f64 / vote.n as f64, vote))
}

/// The certification margin rule in vote-count units: the true class is
/// certified iff `count_c > max_{c'≠c} count_{c'} + 2·delta·n`. Ties always
/// fail.
pub fn robust_certified(vote: &AblationVote, true_class: usize, delta: f64) -> bool {
    let runner_up = vote
        .counts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != true_class)
        .map(|(_, &c)| c)
        .max()
        .unwrap_or(0);
    (vote.counts[true_class] as f64) > runner_up as f64 + 2.0 * delta * vote.n as f64
}

/// Defense pipelines mirrored by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Defense {
    None,
    VmfBaseline,
    SmoothedOnly,
    Filtered,
}

impl Defense {
    pub const ALL: [Defense; 4] = [
        Defense::None,
        Defense::VmfBaseline,
        Defense::SmoothedOnly,
        Defense::Filtered,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Defense::None => "none",
            Defense::VmfBaseline => "vmf-baseline",
            Defense::SmoothedOnly => "smoothed-only",
            Defense::Filtered => "filtered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Defense::None),
            "vmf-baseline" => Ok(Defense::VmfBaseline),
            "smoothed-only" => Ok(Defense::SmoothedOnly),
            "filtered" => Ok(Defense::Filtered),
            other => Err(Error::invalid(format!(
                "defense must be none|vmf-baseline|smoothed-only|filtered, got `{other}`"
            ))),
        }
    }
}

/// One sweep cell result for one image and defense.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub image_id: usize,
    pub true_class: usize,
    pub defense: Defense,
    /// Patch count; 0 means no attack.
    pub attack_n: usize,
    /// Patch area in percent of the image; 0 means no attack.
    pub attack_pct: usize,
    /// Strict ablation-vote majority on the *clean* image equals the label.
    pub clean_correct: bool,
    /// Margin rule holds on the defended *attacked* image.
    pub robust_certified: bool,
    /// Vote histogram behind `robust_certified`.
    pub vote: AblationVote,
    /// Union-bound overlap fraction fed to the margin rule.
    pub delta: f64,
}

/// Sweep parameters: the attack grid, the defenses, and every knob the
/// pipelines need.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub defenses: Vec<Defense>,
    /// `(patch count, patch percent)` cells; `(0, 0)` is the no-attack row.
    pub attack_grid: Vec<(usize, usize)>,
    pub filter: FilterConfig,
    pub ablation: AblationParams,
    /// Window side of the classic-VMF baseline.
    pub classic_side: usize,
    pub attack_target_prob: f64,
    pub attack_step: f64,
    pub attack_iters: usize,
    pub attack_literal_sign: bool,
    pub attack_pin_source: bool,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            defenses: Defense::ALL.to_vec(),
            attack_grid: default_attack_grid(),
            filter: FilterConfig::default(),
            ablation: AblationParams::default(),
            classic_side: 3,
            attack_target_prob: 0.5,
            attack_step: 1e-2,
            attack_iters: 500,
            attack_literal_sign: false,
            attack_pin_source: false,
            seed: 7,
        }
    }
}

/// The no-attack row plus the seven patch count/size combinations of the
/// benchmark grid.
pub fn default_attack_grid() -> Vec<(usize, usize)> {
    vec![
        (0, 0),
        (1, 1),
        (2, 1),
        (1, 2),
        (3, 1),
        (1, 3),
        (4, 1),
        (1, 4),
    ]
}

/// Runs one defense pipeline on an image: optional filter, then ablation,
/// then the vote. Returns the vote and the union-bound delta for
/// `n_patches` patches of side `patch_side` (0 for no attack).
pub fn pipeline_votes(
    img: &Image,
    defense: Defense,
    model: &dyn Classifier,
    cfg: &SweepConfig,
    patch_side: usize,
    n_patches: usize,
) -> Result<(AblationVote, f64)> {
    let w = img.width();
    let spec = match defense {
        // No smoothing defense: full-width bands retain the whole image, so
        // every view is the plain prediction.
        Defense::None => AblationSpec {
            kind: AblationKind::Band,
            size: w,
            stride: 1,
            fill: cfg.ablation.fill,
        },
        _ => cfg.ablation.resolve(w),
    };
    let processed = match defense {
        Defense::None | Defense::SmoothedOnly => img.clone(),
        Defense::VmfBaseline => classic_vmf(img, cfg.classic_side)?,
        Defense::Filtered => smart_vmf(img, None, &cfg.filter)?,
    };
    let set = generate_ablations(&processed, &spec, patch_side)?;
    let vote = vote_over(model, &set)?;
    let delta = (set.delta * n_patches as f64).min(1.0);
    Ok((vote, delta))
}

fn eval_one_image(
    image_id: usize,
    img: &Image,
    label: usize,
    model: &dyn Classifier,
    cfg: &SweepConfig,
) -> Result<Vec<EvalRecord>> {
    let (h, w) = (img.height(), img.width());
    let num_classes = model.num_classes();
    // The clean-side vote per defense does not depend on the attack cell.
    let mut clean: Vec<(AblationVote, bool)> = Vec::with_capacity(cfg.defenses.len());
    for &defense in &cfg.defenses {
        let (vote, _) = pipeline_votes(img, defense, model, cfg, 0, 0)?;
        let correct = vote.strict_majority() == Some(label);
        clean.push((vote, correct));
    }

    let mut records = Vec::new();
    for &(n_patches, pct) in &cfg.attack_grid {
        let (attacked, patch_side) = if n_patches == 0 {
            (None, 0)
        } else {
            let side = patch_side_for_area(pct as f64 / 100.0, h, w);
            let placements = corner_placements(h, w, side, n_patches)?;
            let mask = build_mask(h, w, side, &placements)?;
            let source = argmax(&model.predict_logits(img)?);
            let attack_cfg = AttackConfig {
                target_class: (source + 1) % num_classes,
                target_prob: cfg.attack_target_prob,
                step: cfg.attack_step,
                max_iters: cfg.attack_iters,
                area_fraction: pct as f64 / 100.0,
                literal_sign: cfg.attack_literal_sign,
                pin_source: cfg.attack_pin_source,
            };
            let outcome = train_lavan(img, model, &attack_cfg, &mask, cfg.seed)?;
            (Some(outcome.attacked), side)
        };
        for (d_idx, &defense) in cfg.defenses.iter().enumerate() {
            let (vote, delta) = match &attacked {
                Some(adv) => pipeline_votes(adv, defense, model, cfg, patch_side, n_patches)?,
                None => (clean[d_idx].0.clone(), 0.0),
            };
            let robust = robust_certified(&vote, label, delta);
            if robust && vote.strict_majority() != Some(label) {
                return Err(Error::invalid(
                    "invariant violation: certified vote without a true-class majority",
                ));
            }
            records.push(EvalRecord {
                image_id,
                true_class: label,
                defense,
                attack_n: n_patches,
                attack_pct: pct,
                clean_correct: clean[d_idx].1,
                robust_certified: robust,
                vote,
                delta,
            });
        }
    }
    Ok(records)
}

/// Evaluates the whole dataset over the attack grid and the defense
/// pipelines. Cells run in parallel with the `parallel` feature; the record
/// order is stabilized by sorting, so output is deterministic per seed.
pub fn run_sweep(
    data: &SyntheticDataset,
    model: &dyn Classifier,
    cfg: &SweepConfig,
) -> Result<Vec<EvalRecord>> {
    if data.images.is_empty() {
        return Err(Error::invalid("sweep needs a non-empty dataset"));
    }
    let indexed: Vec<(usize, &(Image, usize))> = data.images.iter().enumerate().collect();

    #[cfg(feature = "parallel")]
    let per_image: Result<Vec<Vec<EvalRecord>>> = indexed
        .par_iter()
        .map(|(i, (img, label))| eval_one_image(*i, img, *label, model, cfg))
        .collect();

    #[cfg(not(feature = "parallel"))]
    let per_image: Result<Vec<Vec<EvalRecord>>> = indexed
        .iter()
        .map(|(i, (img, label))| eval_one_image(*i, img, *label, model, cfg))
        .collect();

    let mut records: Vec<EvalRecord> = per_image?.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.image_id, r.attack_n, r.attack_pct, r.defense));
    Ok(records)
}

/// Serializes records as CSV with a stable column order, LF line endings,
/// and deterministic number formatting.
pub fn write_report(records: &[EvalRecord]) -> Vec<u8> {
    let mut out = String::from("image_id,attack_n,attack_pct,defense,clean,robust,n_ablations,delta\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.image_id,
            r.attack_n,
            r.attack_pct,
            r.defense.as_str(),
            r.clean_correct as u8,
            r.robust_certified as u8,
            r.vote.n,
            r.delta
        ));
    }
    out.into_bytes()
}

/// Mean of a per-record flag over the records selected by `pred`.
pub fn mean_where(records: &[EvalRecord], pred: impl Fn(&EvalRecord) -> bool, flag: impl Fn(&EvalRecord) -> bool) -> f64 {
    let selected: Vec<&EvalRecord> = records.iter().filter(|r| pred(r)).collect();
    if selected.is_empty() {
        return 0.0;
    }
    selected.iter().filter(|r| flag(r)).count() as f64 / selected.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablation::AblationSpec;
    use crate::classifier::ReferenceModel;

    /// Model whose logits prefer a fixed class everywhere.
    fn constant_model(k: usize, classes: usize) -> ReferenceModel {
        let mut weights = vec![0.0; classes * (2 * 2 + 1)];
        let fl = 2 * 2 + 1;
        weights[k * fl + fl - 1] = 1.0; // bias only
        ReferenceModel::from_weights(classes, 8, 8, 1, 4, weights).unwrap()
    }

    fn tiny_set() -> AblationSet {
        let img = Image::constant(8, 8, 1, 0.3).unwrap();
        let spec = AblationSpec {
            kind: AblationKind::Band,
            size: 2,
            stride: 2,
            fill: 0.5,
        };
        generate_ablations(&img, &spec, 0).unwrap()
    }

    #[test]
    fn clean_accuracy_trivial_models() {
        let set = tiny_set();
        let always = constant_model(1, 3);
        let (acc, vote) = clean_accuracy(&always, &set, 1).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(vote.counts[1], set.n);
        let (acc, _) = clean_accuracy(&always, &set, 0).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn clean_accuracy_hand_built_three_of_four() {
        // Brightness model: logit_1 grows with pooled mean - 0.5, logit_0 is 0.
        let fl = 2 * 2 + 1;
        let mut weights = vec![0.0; 2 * fl];
        for f in 0..4 {
            weights[fl + f] = 1.0;
        }
        weights[fl + fl - 1] = -2.0; // logit_1 = sum(pooled) - 2.0
        let model = ReferenceModel::from_weights(2, 8, 8, 1, 4, weights).unwrap();
        let bright = Image::constant(8, 8, 1, 0.9).unwrap();
        let dark = Image::constant(8, 8, 1, 0.1).unwrap();
        let base = Image::constant(8, 8, 1, 0.5).unwrap();
        let members = vec![
            crate::ablation::AblationMember {
                region: crate::ablation::RetainedRegion::Band { start_col: 0 },
                image: bright.clone(),
            },
            crate::ablation::AblationMember {
                region: crate::ablation::RetainedRegion::Band { start_col: 1 },
                image: bright.clone(),
            },
            crate::ablation::AblationMember {
                region: crate::ablation::RetainedRegion::Band { start_col: 2 },
                image: bright,
            },
            crate::ablation::AblationMember {
                region: crate::ablation::RetainedRegion::Band { start_col: 3 },
                image: dark,
            },
        ];
        let set = AblationSet {
            base,
            n: members.len(),
            members,
            delta: 0.0,
        };
        let (acc, vote) = clean_accuracy(&model, &set, 1).unwrap();
        assert_eq!(acc, 0.75);
        assert_eq!(vote.counts, vec![1, 3]);
    }

    #[test]
    fn certification_margin_examples() {
        let v = AblationVote::new(vec![10, 0]).unwrap();
        assert!(robust_certified(&v, 0, 0.0));

        let v = AblationVote::new(vec![6, 5]).unwrap();
        assert!(!robust_certified(&v, 0, 0.1), "margin needed 2.2 counts, have 1");

        let v = AblationVote::new(vec![4, 4]).unwrap();
        assert!(!robust_certified(&v, 0, 0.0), "ties never certify");
        assert!(!robust_certified(&v, 1, 0.0));
    }

    #[test]
    fn certification_is_monotone_in_delta() {
        let v = AblationVote::new(vec![20, 5, 3]).unwrap();
        assert!(robust_certified(&v, 0, 0.1));
        assert!(robust_certified(&v, 0, 0.05), "smaller delta keeps the certificate");
        assert!(!robust_certified(&v, 0, 0.5));
    }

    #[test]
    fn report_is_header_only_for_no_records() {
        let bytes = write_report(&[]);
        assert_eq!(
            bytes,
            b"image_id,attack_n,attack_pct,defense,clean,robust,n_ablations,delta\n"
        );
    }

    #[test]
    fn report_roundtrips_one_record() {
        let record = EvalRecord {
            image_id: 3,
            true_class: 1,
            defense: Defense::Filtered,
            attack_n: 4,
            attack_pct: 1,
            clean_correct: true,
            robust_certified: false,
            vote: AblationVote::new(vec![2, 30]).unwrap(),
            delta: 0.1875,
        };
        let bytes = write_report(&[record]);
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "3,4,1,filtered,1,0,32,0.1875");
        // Parse-back oracle.
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0].parse::<usize>().unwrap(), 3);
        assert_eq!(fields[3], "filtered");
        assert_eq!(fields[7].parse::<f64>().unwrap(), 0.1875);
    }
}
