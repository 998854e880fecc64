//! Command-line front end for the filtering/attack/ablation/evaluation
//! pipeline.
//!
//! Configuration resolves in layers: built-in defaults, then `--config`
//! key=value file, then individual flags. The resolved config is echoed to
//! stderr as canonical key=value lines before any work starts; every other
//! stderr line is prefixed with `#`, so the whole stream parses back as a
//! config file reproducing the run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
//! invariant failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smartvmf::adversary::{
    build_mask, corner_placements, patch_side_for_area, train_lavan, AttackConfig, PatchSpec,
};
use smartvmf::classifier::{argmax, generate_synthetic, train_reference, Classifier, ReferenceModel};
use smartvmf::codec::{decode_attention_pgm, decode_auto, encode_ppm};
use smartvmf::config::ToolConfig;
use smartvmf::evaluation::{
    pipeline_votes, robust_certified, run_sweep, write_report, Defense, EvalRecord, SweepConfig,
};
use smartvmf::filter::smart_vmf;
use smartvmf::{AttentionMap, Error, Image};

#[derive(Parser)]
#[command(
    name = "smartvmf",
    version,
    about = "Adaptive vector median filtering, patch attacks, image ablation and certified evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter an image with the adaptive multi-scale vector median filter.
    Filter(FilterCmd),
    /// Train a corner patch attack against the reference model and emit the
    /// attacked image plus patch artifacts.
    Attack(AttackCmd),
    /// Enumerate the ablation family of an image.
    Ablate(AblateCmd),
    /// Evaluate clean and certified accuracy of one image under the chosen
    /// defense pipelines.
    Evaluate(EvaluateCmd),
    /// Run the full attack-grid sweep over the synthetic benchmark and emit
    /// the CSV report.
    Sweep(SweepCmd),
}

/// Flags shared by every subcommand. Value-bearing flags mirror config keys
/// one-to-one and resolve through the same parser as config files.
#[derive(Args, Default)]
struct CommonOpts {
    /// Key=value config file applied over the defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for auxiliary artifacts.
    #[arg(long, value_name = "DIR")]
    dump: Option<PathBuf>,

    #[arg(long, value_name = "N")]
    seed: Option<String>,
    #[arg(long, value_name = "LIST")]
    scales: Option<String>,
    #[arg(long, value_name = "X")]
    sigma_c: Option<String>,
    #[arg(long, value_name = "X|auto")]
    sigma_p: Option<String>,
    #[arg(long, value_name = "X")]
    lambda: Option<String>,
    #[arg(long, value_name = "X")]
    tau: Option<String>,
    #[arg(long, value_name = "N")]
    max_iters: Option<String>,
    #[arg(long, value_name = "X")]
    epsilon: Option<String>,
    #[arg(long, value_name = "BOOL")]
    use_content: Option<String>,
    #[arg(long, value_name = "BOOL")]
    use_spatial: Option<String>,
    #[arg(long, value_name = "BOOL")]
    use_attention: Option<String>,
    #[arg(long, value_name = "MODE")]
    fusion_mode: Option<String>,
    #[arg(long, value_name = "KIND")]
    ablation_kind: Option<String>,
    #[arg(long, value_name = "N|auto")]
    ablation_size: Option<String>,
    #[arg(long, value_name = "N")]
    ablation_stride: Option<String>,
    #[arg(long, value_name = "X")]
    ablation_fill: Option<String>,
    #[arg(long, alias = "target", value_name = "K|auto")]
    target_class: Option<String>,
    #[arg(long, value_name = "P")]
    target_prob: Option<String>,
    #[arg(long, value_name = "X")]
    attack_step: Option<String>,
    #[arg(long, value_name = "N")]
    attack_iters: Option<String>,
    #[arg(long, value_name = "F")]
    area_fraction: Option<String>,
    #[arg(long, value_name = "N")]
    patches: Option<String>,
    #[arg(long, value_name = "BOOL")]
    alg1_literal_sign: Option<String>,
    #[arg(long, value_name = "BOOL")]
    pin_source_class: Option<String>,
    #[arg(long, value_name = "N")]
    train_epochs: Option<String>,
    #[arg(long, value_name = "X")]
    train_lr: Option<String>,
    #[arg(long, value_name = "N")]
    pool_factor: Option<String>,
    #[arg(long, value_name = "K")]
    classes: Option<String>,
    #[arg(long, value_name = "N")]
    per_class: Option<String>,
    #[arg(long, value_name = "N")]
    image_size: Option<String>,
    #[arg(long, value_name = "N")]
    classic_side: Option<String>,
}

#[derive(Args)]
struct FilterCmd {
    /// Input image (binary PPM/PGM or 8-bit PNG).
    input: PathBuf,
    /// Output PPM/PGM.
    output: PathBuf,
    /// Optional attention map as PGM (values map to [0, 1]).
    #[arg(long, value_name = "PGM")]
    attention: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct AttackCmd {
    /// Image to attack; dimensions must match the reference model input.
    input: PathBuf,
    /// Where to write the attacked image.
    #[arg(long, default_value = "attacked.ppm", value_name = "PPM")]
    out: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct AblateCmd {
    /// Image to ablate.
    input: PathBuf,
    /// Directory for the numbered member PPMs (alias of --dump).
    #[arg(long, value_name = "DIR")]
    dump_ablations: Option<PathBuf>,
    /// Threat-model patch side for the recorded overlap bound.
    #[arg(long, default_value_t = 0, value_name = "M")]
    patch_side: usize,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct EvaluateCmd {
    /// Image to evaluate; dimensions must match the reference model input.
    input: PathBuf,
    /// True class label of the image.
    #[arg(long, value_name = "C")]
    class: usize,
    /// Defense pipeline, or `all`.
    #[arg(long, default_value = "all", value_name = "D")]
    defense: String,
    /// Train and apply the configured patch attack before evaluating.
    #[arg(long)]
    attack: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepCmd {
    /// Write the CSV report here instead of stdout.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Filter(cmd) => run_filter(cmd),
        Command::Attack(cmd) => run_attack(cmd),
        Command::Ablate(cmd) => run_ablate(cmd),
        Command::Evaluate(cmd) => run_evaluate(cmd),
        Command::Sweep(cmd) => run_sweep_cmd(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("# error (usage): {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("# error: {msg}");
            ExitCode::from(2)
        }
    }
}

impl CommonOpts {
    /// Layered resolution: defaults, config file, then flags. Echoes the
    /// resolved config to stderr.
    fn resolve(&self) -> CliResult<ToolConfig> {
        let mut cfg = ToolConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("config file {}: {e}", path.display()))
            })?;
            cfg.apply_file(&text)?;
        }
        let overrides: [(&str, &Option<String>); 29] = [
            ("seed", &self.seed),
            ("scales", &self.scales),
            ("sigma_c", &self.sigma_c),
            ("sigma_p", &self.sigma_p),
            ("lambda", &self.lambda),
            ("tau", &self.tau),
            ("max_iters", &self.max_iters),
            ("epsilon", &self.epsilon),
            ("use_content", &self.use_content),
            ("use_spatial", &self.use_spatial),
            ("use_attention", &self.use_attention),
            ("fusion_mode", &self.fusion_mode),
            ("ablation_kind", &self.ablation_kind),
            ("ablation_size", &self.ablation_size),
            ("ablation_stride", &self.ablation_stride),
            ("ablation_fill", &self.ablation_fill),
            ("target_class", &self.target_class),
            ("target_prob", &self.target_prob),
            ("attack_step", &self.attack_step),
            ("attack_iters", &self.attack_iters),
            ("area_fraction", &self.area_fraction),
            ("patches", &self.patches),
            ("alg1_literal_sign", &self.alg1_literal_sign),
            ("pin_source_class", &self.pin_source_class),
            ("train_epochs", &self.train_epochs),
            ("train_lr", &self.train_lr),
            ("pool_factor", &self.pool_factor),
            ("classes", &self.classes),
            ("per_class", &self.per_class),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.apply_kv(key, v)?;
            }
        }
        if let Some(v) = &self.image_size {
            cfg.apply_kv("image_size", v)?;
        }
        if let Some(v) = &self.classic_side {
            cfg.apply_kv("classic_side", v)?;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        eprint!("{}", cfg.echo());
        Ok(cfg)
    }

    fn dump_dir(&self) -> CliResult<Option<&Path>> {
        if let Some(dir) = &self.dump {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir))
        } else {
            Ok(None)
        }
    }
}

fn read_image(path: &Path) -> CliResult<Image> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("input {}: {e}", path.display())))?;
    Ok(decode_auto(&bytes)?)
}

fn read_attention(path: &Path) -> CliResult<AttentionMap> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("attention {}: {e}", path.display())))?;
    Ok(decode_attention_pgm(&bytes)?)
}

/// Trains the reference model on the configured synthetic dataset.
fn trained_model(cfg: &ToolConfig) -> CliResult<(ReferenceModel, smartvmf::classifier::SyntheticDataset)> {
    let data = generate_synthetic(
        cfg.seed,
        cfg.dataset.classes,
        cfg.dataset.per_class,
        cfg.dataset.size,
        cfg.dataset.size,
    )?;
    let (model, report) = train_reference(&data, cfg.train.epochs, cfg.train.lr, cfg.train.pool_factor)?;
    eprintln!("# reference model train accuracy {:.3}", report.train_accuracy);
    Ok((model, data))
}

fn sweep_config(cfg: &ToolConfig) -> SweepConfig {
    SweepConfig {
        filter: cfg.filter.clone(),
        ablation: cfg.ablation.clone(),
        classic_side: cfg.classic_side,
        attack_target_prob: cfg.attack.target_prob,
        attack_step: cfg.attack.step,
        attack_iters: cfg.attack.max_iters,
        attack_literal_sign: cfg.attack.literal_sign,
        attack_pin_source: cfg.attack.pin_source,
        seed: cfg.seed,
        ..SweepConfig::default()
    }
}

fn run_filter(cmd: FilterCmd) -> CliResult<()> {
    let cfg = cmd.common.resolve()?;
    let img = read_image(&cmd.input)?;
    let attention = cmd.attention.as_deref().map(read_attention).transpose()?;
    let out = smart_vmf(&img, attention.as_ref(), &cfg.filter)?;
    std::fs::write(&cmd.output, encode_ppm(&out)?)?;
    eprintln!("# filtered {} -> {}", cmd.input.display(), cmd.output.display());
    Ok(())
}

fn run_attack(cmd: AttackCmd) -> CliResult<()> {
    let cfg = cmd.common.resolve()?;
    let (model, _) = trained_model(&cfg)?;
    let img = read_image(&cmd.input)?;
    let (h, w) = (img.height(), img.width());
    let source = argmax(&model.predict_logits(&img)?);
    let target = cfg
        .attack
        .target_class
        .unwrap_or((source + 1) % model.num_classes());
    let side = patch_side_for_area(cfg.attack.area_fraction, h, w);
    let placements = corner_placements(h, w, side, cfg.attack.patches)?;
    let mask = build_mask(h, w, side, &placements)?;
    let attack_cfg = AttackConfig {
        target_class: target,
        target_prob: cfg.attack.target_prob,
        step: cfg.attack.step,
        max_iters: cfg.attack.max_iters,
        area_fraction: cfg.attack.area_fraction,
        literal_sign: cfg.attack.literal_sign,
        pin_source: cfg.attack.pin_source,
    };
    let outcome = train_lavan(&img, &model, &attack_cfg, &mask, cfg.seed)?;
    std::fs::write(&cmd.out, encode_ppm(&outcome.attacked)?)?;
    eprintln!(
        "# attack source={source} target={target} side={side} success={} iterations={}",
        outcome.success,
        outcome.trace.len() - 1
    );

    if let Some(dir) = cmd.common.dump_dir()? {
        let patch = PatchSpec::extract(&outcome.delta, side, &placements)?;
        for (i, _) in placements.iter().enumerate() {
            let content = patch.content_image(i, img.channels())?;
            std::fs::write(dir.join(format!("patch_{i}.ppm")), encode_ppm(&content)?)?;
        }
        let mut manifest = String::new();
        manifest.push_str(&format!("seed={}\n", cfg.seed));
        manifest.push_str(&format!("source_class={source}\n"));
        manifest.push_str(&format!("target_class={target}\n"));
        manifest.push_str(&format!("patch_side={side}\n"));
        manifest.push_str(&format!("patches={}\n", placements.len()));
        for (i, p) in placements.iter().enumerate() {
            manifest.push_str(&format!("placement_{i}={},{}\n", p.row, p.col));
        }
        manifest.push_str(&format!("success={}\n", outcome.success));
        manifest.push_str(&format!("iterations={}\n", outcome.trace.len() - 1));
        manifest.push_str(&format!(
            "final_target_prob={}\n",
            outcome.trace.last().map_or(0.0, |t| t.target_prob)
        ));
        std::fs::write(dir.join("manifest.txt"), manifest)?;

        let mut trace = String::from("iteration,target_prob,predicted,objective\n");
        for step in &outcome.trace {
            trace.push_str(&format!(
                "{},{},{},{}\n",
                step.iteration, step.target_prob, step.predicted, step.objective
            ));
        }
        std::fs::write(dir.join("trace.csv"), trace)?;

        std::fs::write(dir.join("model.bin"), model.to_bytes())?;
        std::fs::write(
            dir.join("model.manifest"),
            model.manifest(cfg.seed, cfg.train.epochs, cfg.train.lr),
        )?;
        eprintln!("# artifacts written to {}", dir.display());
    }
    Ok(())
}

fn run_ablate(cmd: AblateCmd) -> CliResult<()> {
    let cfg = cmd.common.resolve()?;
    let img = read_image(&cmd.input)?;
    let spec = cfg.ablation.resolve(img.width());
    let set = smartvmf::ablation::generate_ablations(&img, &spec, cmd.patch_side)?;
    eprintln!(
        "# ablation kind={} size={} stride={} members={} delta={}",
        spec.kind.as_str(),
        spec.size,
        spec.stride,
        set.n,
        set.delta
    );
    let dir = match (&cmd.dump_ablations, cmd.common.dump_dir()?) {
        (Some(d), _) => {
            std::fs::create_dir_all(d)?;
            Some(d.clone())
        }
        (None, Some(d)) => Some(d.to_path_buf()),
        (None, None) => None,
    };
    if let Some(dir) = dir {
        for (i, member) in set.members.iter().enumerate() {
            std::fs::write(dir.join(format!("ablation_{i:04}.ppm")), encode_ppm(&member.image)?)?;
        }
        eprintln!("# {} members written to {}", set.n, dir.display());
    }
    Ok(())
}

fn run_evaluate(cmd: EvaluateCmd) -> CliResult<()> {
    let cfg = cmd.common.resolve()?;
    let defenses: Vec<Defense> = if cmd.defense == "all" {
        Defense::ALL.to_vec()
    } else {
        vec![Defense::parse(&cmd.defense).map_err(|e| CliError::Usage(e.to_string()))?]
    };
    let (model, _) = trained_model(&cfg)?;
    let img = read_image(&cmd.input)?;
    if cmd.class >= model.num_classes() {
        return Err(CliError::Usage(format!(
            "--class {} out of range 0..{}",
            cmd.class,
            model.num_classes()
        )));
    }
    let scfg = sweep_config(&cfg);

    let (attacked, patch_side, n_patches) = if cmd.attack {
        let (h, w) = (img.height(), img.width());
        let source = argmax(&model.predict_logits(&img)?);
        let target = cfg
            .attack
            .target_class
            .unwrap_or((source + 1) % model.num_classes());
        let side = patch_side_for_area(cfg.attack.area_fraction, h, w);
        let placements = corner_placements(h, w, side, cfg.attack.patches)?;
        let mask = build_mask(h, w, side, &placements)?;
        let attack_cfg = AttackConfig {
            target_class: target,
            target_prob: cfg.attack.target_prob,
            step: cfg.attack.step,
            max_iters: cfg.attack.max_iters,
            area_fraction: cfg.attack.area_fraction,
            literal_sign: cfg.attack.literal_sign,
            pin_source: cfg.attack.pin_source,
        };
        let outcome = train_lavan(&img, &model, &attack_cfg, &mask, cfg.seed)?;
        eprintln!("# attack success={}", outcome.success);
        (outcome.attacked, side, cfg.attack.patches)
    } else {
        (img.clone(), 0, 0)
    };

    let mut records = Vec::new();
    for defense in defenses {
        let (clean_vote, _) = pipeline_votes(&img, defense, &model, &scfg, 0, 0)?;
        let clean_correct = clean_vote.strict_majority() == Some(cmd.class);
        let (vote, delta) = pipeline_votes(&attacked, defense, &model, &scfg, patch_side, n_patches)?;
        let robust = robust_certified(&vote, cmd.class, delta);
        eprintln!(
            "# defense={} clean={} robust={} delta={} votes={:?}",
            defense.as_str(),
            clean_correct as u8,
            robust as u8,
            delta,
            vote.counts
        );
        records.push(EvalRecord {
            image_id: 0,
            true_class: cmd.class,
            defense,
            attack_n: n_patches,
            attack_pct: ((cfg.attack.area_fraction * 100.0).round() as usize) * n_patches.min(1),
            clean_correct,
            robust_certified: robust,
            vote,
            delta,
        });
    }
    let report = write_report(&records);
    match &cmd.out {
        Some(path) => std::fs::write(path, report)?,
        None => print!("{}", String::from_utf8_lossy(&report)),
    }
    Ok(())
}

fn run_sweep_cmd(cmd: SweepCmd) -> CliResult<()> {
    let cfg = cmd.common.resolve()?;
    let (model, data) = trained_model(&cfg)?;
    let scfg = sweep_config(&cfg);
    let records = run_sweep(&data, &model, &scfg)?;
    let report = write_report(&records);
    match &cmd.out {
        Some(path) => std::fs::write(path, report)?,
        None => print!("{}", String::from_utf8_lossy(&report)),
    }

    if let Some(dir) = cmd.common.dump_dir()? {
        // Inspection sample: one image per class through each attack cell,
        // attacked and filtered.
        let per_class = cfg.dataset.per_class;
        for class in 0..cfg.dataset.classes {
            let idx = class * per_class;
            let (img, _) = &data.images[idx];
            for &(n, pct) in &scfg.attack_grid {
                if n == 0 {
                    continue;
                }
                let side = patch_side_for_area(pct as f64 / 100.0, img.height(), img.width());
                let placements = corner_placements(img.height(), img.width(), side, n)?;
                let mask = build_mask(img.height(), img.width(), side, &placements)?;
                let source = argmax(&model.predict_logits(img)?);
                let attack_cfg = AttackConfig {
                    target_class: (source + 1) % model.num_classes(),
                    target_prob: scfg.attack_target_prob,
                    step: scfg.attack_step,
                    max_iters: scfg.attack_iters,
                    area_fraction: pct as f64 / 100.0,
                    literal_sign: scfg.attack_literal_sign,
                    pin_source: scfg.attack_pin_source,
                };
                let outcome = train_lavan(img, &model, &attack_cfg, &mask, scfg.seed)?;
                let stem = format!("img{idx}_n{n}_pct{pct}");
                std::fs::write(dir.join(format!("{stem}_attacked.ppm")), encode_ppm(&outcome.attacked)?)?;
                let filtered = smart_vmf(&outcome.attacked, None, &scfg.filter)?;
                std::fs::write(dir.join(format!("{stem}_filtered.ppm")), encode_ppm(&filtered)?)?;
            }
        }
        eprintln!("# sample images written to {}", dir.display());
    }
    Ok(())
}
