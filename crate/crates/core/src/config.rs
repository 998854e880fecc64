//! Flat key=value configuration: one key per line, `#` comments.
//!
//! [`ToolConfig`] carries every tunable of the toolkit with layered
//! resolution (defaults, then file, then explicit overrides). Unknown keys
//! are errors, never warnings, and the canonical echo emitted by
//! [`ToolConfig::echo`] parses back to the identical config.

use crate::ablation::{AblationKind, AblationParams};
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, FusionMode};

/// Attack knobs as configured, before a concrete image pins the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    /// `None` picks `(source + 1) mod K` at attack time.
    pub target_class: Option<usize>,
    pub target_prob: f64,
    pub step: f64,
    pub max_iters: usize,
    pub area_fraction: f64,
    /// Corner patch count, 1..=4.
    pub patches: usize,
    pub literal_sign: bool,
    pub pin_source: bool,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            target_class: None,
            target_prob: 0.5,
            step: 1e-2,
            max_iters: 500,
            area_fraction: 0.01,
            patches: 1,
            literal_sign: false,
            pin_source: false,
        }
    }
}

/// Reference-model training knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub pool_factor: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 8000,
            lr: 0.1,
            pool_factor: 4,
        }
    }
}

/// Synthetic dataset knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSettings {
    pub classes: usize,
    pub per_class: usize,
    /// Square image side.
    pub size: usize,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings {
            classes: 4,
            per_class: 25,
            size: 32,
        }
    }
}

/// Every tunable of the toolkit, resolvable from key=value sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub seed: u64,
    pub filter: FilterConfig,
    pub ablation: AblationParams,
    pub attack: AttackSettings,
    pub train: TrainSettings,
    pub dataset: DatasetSettings,
    /// Window side of the classic-VMF baseline defense.
    pub classic_side: usize,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            seed: 7,
            filter: FilterConfig::default(),
            ablation: AblationParams::default(),
            attack: AttackSettings::default(),
            train: TrainSettings::default(),
            dataset: DatasetSettings::default(),
            classic_side: 3,
        }
    }
}

/// Splits key=value text into pairs; `#` starts a comment, blank lines are
/// skipped, keys and values are trimmed.
pub fn parse_kv_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config {
                key: line.to_string(),
                reason: format!("line {} is not key=value", lineno + 1),
            });
        };
        pairs.push((line[..eq].trim().to_string(), line[eq + 1..].trim().to_string()));
    }
    Ok(pairs)
}

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| bad(key, format!("`{value}` is not {what}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(bad(key, format!("`{value}` is not a boolean (true/false)"))),
    }
}

fn parse_opt_usize(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num::<usize>(key, value, "a non-negative integer or `auto`").map(Some)
    }
}

impl ToolConfig {
    /// Applies one key=value pair; unknown keys are errors naming the key.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, value, "a 64-bit unsigned integer")?,
            "scales" => {
                let mut scales = Vec::new();
                for part in value.split(',') {
                    scales.push(parse_num::<usize>(key, part.trim(), "a comma list of odd integers")?);
                }
                self.filter.scales = scales;
            }
            "sigma_c" => self.filter.sigma_c = parse_num(key, value, "a number")?,
            "sigma_p" => {
                self.filter.sigma_p = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value, "a number or `auto`")?)
                }
            }
            "lambda" => self.filter.lambda = parse_num(key, value, "a number")?,
            "tau" => self.filter.tau = parse_num(key, value, "a number")?,
            "max_iters" => self.filter.max_iters = parse_num(key, value, "an integer")?,
            "epsilon" => self.filter.epsilon = parse_num(key, value, "a number")?,
            "use_content" => self.filter.use_content = parse_bool(key, value)?,
            "use_spatial" => self.filter.use_spatial = parse_bool(key, value)?,
            "use_attention" => self.filter.use_attention = parse_bool(key, value)?,
            "fusion_mode" => {
                self.filter.fusion_mode =
                    FusionMode::parse(value).map_err(|e| bad(key, e.to_string()))?
            }
            "ablation_kind" => {
                self.ablation.kind = AblationKind::parse(value).map_err(|e| bad(key, e.to_string()))?
            }
            "ablation_size" => self.ablation.size = parse_opt_usize(key, value)?,
            "ablation_stride" => self.ablation.stride = parse_num(key, value, "an integer")?,
            "ablation_fill" => self.ablation.fill = parse_num(key, value, "a number")?,
            "target_class" => self.attack.target_class = parse_opt_usize(key, value)?,
            "target_prob" => self.attack.target_prob = parse_num(key, value, "a number")?,
            "attack_step" => self.attack.step = parse_num(key, value, "a number")?,
            "attack_iters" => self.attack.max_iters = parse_num(key, value, "an integer")?,
            "area_fraction" => self.attack.area_fraction = parse_num(key, value, "a number")?,
            "patches" => self.attack.patches = parse_num(key, value, "an integer")?,
            "alg1_literal_sign" => self.attack.literal_sign = parse_bool(key, value)?,
            "pin_source_class" => self.attack.pin_source = parse_bool(key, value)?,
            "train_epochs" => self.train.epochs = parse_num(key, value, "an integer")?,
            "train_lr" => self.train.lr = parse_num(key, value, "a number")?,
            "pool_factor" => self.train.pool_factor = parse_num(key, value, "an integer")?,
            "classes" => self.dataset.classes = parse_num(key, value, "an integer")?,
            "per_class" => self.dataset.per_class = parse_num(key, value, "an integer")?,
            "image_size" => self.dataset.size = parse_num(key, value, "an integer")?,
            "classic_side" => self.classic_side = parse_num(key, value, "an integer")?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies a whole config file on top of the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_kv_text(text)? {
            self.apply_kv(&key, &value)?;
        }
        Ok(())
    }

    /// Range-checks every resolved value. Run after layered resolution,
    /// before any work.
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        if self.ablation.stride == 0 {
            return Err(Error::invalid("ablation_stride must be >= 1"));
        }
        if let Some(size) = self.ablation.size {
            if size == 0 {
                return Err(Error::invalid("ablation_size must be >= 1 or auto"));
            }
        }
        if !(0.0..=1.0).contains(&self.ablation.fill) {
            return Err(Error::invalid(format!(
                "ablation_fill {} must lie in [0, 1]",
                self.ablation.fill
            )));
        }
        if !(self.attack.target_prob > 0.0 && self.attack.target_prob <= 1.0) {
            return Err(Error::invalid(format!(
                "target_prob {} must lie in (0, 1]",
                self.attack.target_prob
            )));
        }
        if !self.attack.step.is_finite() || self.attack.step <= 0.0 {
            return Err(Error::invalid(format!("attack_step {} must be > 0", self.attack.step)));
        }
        if self.attack.max_iters == 0 {
            return Err(Error::invalid("attack_iters must be >= 1"));
        }
        if !(self.attack.area_fraction > 0.0 && self.attack.area_fraction <= 0.25) {
            return Err(Error::invalid(format!(
                "area_fraction {} must lie in (0, 0.25]",
                self.attack.area_fraction
            )));
        }
        if self.attack.patches == 0 || self.attack.patches > 4 {
            return Err(Error::invalid(format!(
                "patches {} must lie in 1..=4",
                self.attack.patches
            )));
        }
        if self.train.epochs == 0 {
            return Err(Error::invalid("train_epochs must be >= 1"));
        }
        if !self.train.lr.is_finite() || self.train.lr <= 0.0 {
            return Err(Error::invalid(format!("train_lr {} must be > 0", self.train.lr)));
        }
        if self.train.pool_factor == 0 {
            return Err(Error::invalid("pool_factor must be >= 1"));
        }
        if self.dataset.classes < 2 || self.dataset.classes > 16 {
            return Err(Error::invalid(format!(
                "classes {} must lie in 2..=16",
                self.dataset.classes
            )));
        }
        if self.dataset.per_class == 0 {
            return Err(Error::invalid("per_class must be >= 1"));
        }
        if self.dataset.size < 4 {
            return Err(Error::invalid("image_size must be at least 4"));
        }
        if self.classic_side == 0 || self.classic_side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "classic_side {} must be odd and >= 1",
                self.classic_side
            )));
        }
        Ok(())
    }

    /// Canonical key=value listing of every resolved key, sorted, one per
    /// line. Parsing the echo reproduces this config exactly.
    pub fn echo(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
        let scales: Vec<String> = self.filter.scales.iter().map(|s| s.to_string()).collect();
        let sigma_p = self
            .filter
            .sigma_p
            .map_or("auto".to_string(), |v| format!("{v}"));
        let mut lines = vec![
            format!("ablation_fill={}", self.ablation.fill),
            format!("ablation_kind={}", self.ablation.kind.as_str()),
            format!("ablation_size={}", opt(self.ablation.size)),
            format!("ablation_stride={}", self.ablation.stride),
            format!("alg1_literal_sign={}", self.attack.literal_sign),
            format!("area_fraction={}", self.attack.area_fraction),
            format!("attack_iters={}", self.attack.max_iters),
            format!("attack_step={}", self.attack.step),
            format!("classes={}", self.dataset.classes),
            format!("classic_side={}", self.classic_side),
            format!("epsilon={}", self.filter.epsilon),
            format!("fusion_mode={}", self.filter.fusion_mode.as_str()),
            format!("image_size={}", self.dataset.size),
            format!("lambda={}", self.filter.lambda),
            format!("max_iters={}", self.filter.max_iters),
            format!("patches={}", self.attack.patches),
            format!("per_class={}", self.dataset.per_class),
            format!("pin_source_class={}", self.attack.pin_source),
            format!("pool_factor={}", self.train.pool_factor),
            format!("scales={}", scales.join(",")),
            format!("seed={}", self.seed),
            format!("sigma_c={}", self.filter.sigma_c),
            format!("sigma_p={sigma_p}"),
            format!("target_class={}", opt(self.attack.target_class)),
            format!("target_prob={}", self.attack.target_prob),
            format!("tau={}", self.filter.tau),
            format!("train_epochs={}", self.train.epochs),
            format!("train_lr={}", self.train.lr),
        ];
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_roundtrips() {
        let cfg = ToolConfig::default();
        let mut back = ToolConfig::default();
        back.apply_file(&cfg.echo()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn modified_config_echo_roundtrips() {
        let mut cfg = ToolConfig::default();
        cfg.apply_file(
            "tau=0.5\nscales=5\nsigma_p=1.25\nfusion_mode=mean\nablation_kind=block\nablation_size=6\ntarget_class=2\n",
        )
        .unwrap();
        let mut back = ToolConfig::default();
        back.apply_file(&cfg.echo()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.filter.tau, 0.5);
        assert_eq!(cfg.filter.scales, vec![5]);
        assert_eq!(cfg.attack.target_class, Some(2));
    }

    #[test]
    fn unknown_key_names_the_offender() {
        let mut cfg = ToolConfig::default();
        let err = cfg.apply_file("sigma_q=1\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "sigma_q"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let mut cfg = ToolConfig::default();
        let err = cfg.apply_file("tau=fast\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "tau"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut cfg = ToolConfig::default();
        cfg.apply_file("# a comment\n\n  tau=0.3 # trailing\n").unwrap();
        assert_eq!(cfg.filter.tau, 0.3);
    }

    #[test]
    fn later_sources_win() {
        let mut cfg = ToolConfig::default();
        cfg.apply_file("tau=0.5\n").unwrap();
        cfg.apply_kv("tau", "0.2").unwrap();
        assert_eq!(cfg.filter.tau, 0.2);
    }
}
