use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ccs_core::circulant::Backend;
use ccs_core::model::{MixerConfig, ModelParams, NormKind, TokenMixerKind, PRESETS};
use ccs_core::training::{make_shift_task, shift_task_model, train, ShiftPolicy, ShiftTaskSpec, TrainOptions};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, BenchBackend, BenchOptions};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};
use crate::params::render_table;
use crate::verify::{run_suite, Fault};
use crate::weights::{load_weights, save_weights, Width};

pub const METRICS_VERSION_LINE: &str = "# ccsmix metrics v1";
pub const METRICS_HEADER: &str = "epoch,train_loss,test_acc";

#[derive(Debug, Parser)]
#[command(name = "ccsmix", version, about = "Circulant channel-specific token mixing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the invariant suite and report every property.
    Verify(VerifyArgs),
    /// Print parameter counts for a preset or an explicit configuration.
    Params(ConfigArgs),
    /// Time direct and FFT circulant mixing over a list of token counts.
    Bench(BenchArgs),
    /// Train on the synthetic circular-shift task.
    Train(TrainArgs),
    /// Write freshly initialized weights, or convert a weight file to another width.
    Export(ExportArgs),
}

fn parse_mixer(s: &str) -> Result<TokenMixerKind, String> {
    s.parse().map_err(|e: ccs_core::Error| e.to_string())
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    s.parse().map_err(|e: ccs_core::Error| e.to_string())
}

fn parse_width(s: &str) -> Result<Width, String> {
    match s {
        "4" => Ok(Width::F32),
        "8" => Ok(Width::F64),
        other => Err(format!("element width must be 4 or 8, got {other}")),
    }
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "direct" => Ok(Backend::Direct),
        "fft" => Ok(Backend::Fft),
        other => Err(format!("unknown backend '{other}' (direct, fft)")),
    }
}

fn parse_policy(s: &str) -> Result<ShiftPolicy, String> {
    match s {
        "none" => Ok(ShiftPolicy::None),
        "uniform" => Ok(ShiftPolicy::Uniform),
        other => Err(format!("unknown shift policy '{other}' (none, uniform)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FaultArg {
    FftSign,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// One of mixer-b16, mixer-b16-ccs, resmlp-36, resmlp-36-ccs; other flags override its fields.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub tokens: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub ratio: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// original, simplified or ccs.
    #[arg(long, value_parser = parse_mixer)]
    pub mixer: Option<TokenMixerKind>,
    /// layernorm or affine.
    #[arg(long, value_parser = parse_norm)]
    pub norm: Option<NormKind>,
    /// Hidden width of the original token MLP (default 2N).
    #[arg(long)]
    pub token_mlp_dim: Option<usize>,
    #[arg(long)]
    pub image_height: Option<usize>,
    #[arg(long)]
    pub image_width: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<(String, MixerConfig)> {
        let base = match &self.preset {
            Some(name) => Some(MixerConfig::preset(name).ok_or_else(|| {
                CliError::Usage(format!("unknown preset '{name}' (known: {})", PRESETS.join(", ")))
            })?),
            None => None,
        };
        let mut missing = Vec::new();
        let mut pick = |flag: &'static str, given: Option<usize>, from: Option<usize>| {
            given.or(from).unwrap_or_else(|| {
                missing.push(flag);
                0
            })
        };
        let b = base.as_ref();
        let tokens = pick("--tokens", self.tokens, b.map(|c| c.tokens));
        let depth = pick("--depth", self.depth, b.map(|c| c.depth));
        let hidden = pick("--hidden", self.hidden, b.map(|c| c.hidden));
        let ratio = pick("--ratio", self.ratio, b.map(|c| c.ratio));
        let patch = pick("--patch", self.patch, b.map(|c| c.patch));
        let groups = pick("--groups", self.groups, b.map(|c| c.groups));
        let num_classes = pick("--classes", self.classes, b.map(|c| c.num_classes));
        let token_mixer = self.mixer.or(b.map(|c| c.token_mixer));
        let norm = self.norm.or(b.map(|c| c.norm));
        if token_mixer.is_none() {
            missing.push("--mixer");
        }
        if norm.is_none() {
            missing.push("--norm");
        }
        if !missing.is_empty() {
            return Err(CliError::Usage(format!(
                "give --preset or the full flag set; missing {}",
                missing.join(" ")
            )));
        }
        let geometry_changed = self.tokens.is_some() || self.patch.is_some();
        let (image_height, image_width) = match (self.image_height, self.image_width, b) {
            (Some(h), Some(w), _) => (h, w),
            (None, None, Some(c)) if !geometry_changed => (c.image_height, c.image_width),
            (None, None, _) => {
                let side = (1..=tokens).find(|s| s * s >= tokens).unwrap_or(0);
                if side * side != tokens {
                    return Err(CliError::Usage(format!(
                        "{tokens} tokens is not a square grid; give --image-height and --image-width"
                    )));
                }
                (side * patch, side * patch)
            }
            _ => return Err(CliError::Usage("give both --image-height and --image-width".into())),
        };
        let token_mlp_dim = self
            .token_mlp_dim
            .or(b.filter(|_| self.tokens.is_none()).map(|c| c.token_mlp_dim))
            .unwrap_or(2 * tokens);
        let config = MixerConfig {
            tokens,
            depth,
            hidden,
            ratio,
            patch,
            groups,
            image_height,
            image_width,
            token_mixer: token_mixer.expect("checked"),
            token_mlp_dim,
            norm: norm.expect("checked"),
            num_classes,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let label = self.preset.clone().unwrap_or_else(|| "custom".into());
        Ok((label, config))
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated token counts.
    #[arg(long, value_delimiter = ',', default_value = "196,392,784,1568")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub channels: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 8)]
    pub groups: usize,
    /// Comma-separated subset of direct, fft, dense-simplified.
    #[arg(long, value_delimiter = ',', default_value = "direct,fft")]
    pub backends: Vec<BenchBackend>,
    /// Timed repetitions per record (at least 5).
    #[arg(long, default_value_t = 7)]
    pub reps: usize,
    /// Discarded warmup runs per record (at least 2).
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    /// Build the FFT tables outside the timed region.
    #[arg(long)]
    pub exclude_plan: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path; the table goes to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight file to write after training.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch metrics CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_parser = parse_width, default_value = "8")]
    pub width: Width,

    #[arg(long, default_value_t = 16)]
    pub tokens: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub motif_len: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 512)]
    pub train_count: usize,
    #[arg(long, default_value_t = 256)]
    pub test_count: usize,
    /// Offset policy of the training split: none or uniform.
    #[arg(long, value_parser = parse_policy, default_value = "none")]
    pub train_shift: ShiftPolicy,

    #[arg(long, value_parser = parse_mixer, default_value = "ccs")]
    pub mixer: TokenMixerKind,
    #[arg(long, value_parser = parse_norm, default_value = "layernorm")]
    pub norm: NormKind,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub ratio: usize,
    #[arg(long, default_value_t = 4)]
    pub groups: usize,
    #[arg(long, default_value_t = 16)]
    pub token_mlp_dim: usize,

    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub min_lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub warmup_frac: f64,
    #[arg(long, default_value_t = 0.05)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_parser = parse_backend, default_value = "direct")]
    pub backend: Backend,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_width, default_value = "8")]
    pub width: Width,
    /// Existing weight file to re-encode instead of initializing.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Params(a) => cmd_params(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Export(a) => cmd_export(&a),
    }
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let fault = match args.inject_fault {
        Some(FaultArg::FftSign) => Fault::FftSign,
        None => Fault::None,
    };
    let reports = run_suite(args.seed, fault)?;
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    println!("{} of {} properties passed", reports.len() - failed.len(), reports.len());
    if failed.is_empty() {
        Ok(())
    } else {
        println!("FAILED: {}", failed.join(","));
        Err(CliError::Failed(format!("{} properties failed", failed.len())))
    }
}

fn cmd_params(args: &ConfigArgs) -> CliResult<()> {
    let (label, config) = args.resolve()?;
    print!("{}", render_table(&label, &config));
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let opts = BenchOptions {
        n_list: args.n_list.clone(),
        channels: args.channels,
        batch: args.batch,
        groups: args.groups,
        backends: args.backends.clone(),
        reps: args.reps,
        warmup: args.warmup,
        include_plan: !args.exclude_plan,
        seed: args.seed,
    };
    bench::validate(&opts).map_err(CliError::Usage)?;
    // Open the output before measuring so an unwritable path fails fast.
    let mut sink = args.out.as_deref().map(create).transpose()?;
    let records = bench::run_bench(&opts).map_err(CliError::Failed)?;
    match (&mut sink, &args.out) {
        (Some(w), Some(path)) => {
            bench::write_csv(&mut *w, &records)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(path, e))?;
            for r in &records {
                println!("{}", r.csv_row());
            }
        }
        _ => bench::write_csv(std::io::stdout().lock(), &records).map_err(|e| CliError::io("<stdout>", e))?,
    }
    println!("{}", bench::summarize(&records));
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let spec = ShiftTaskSpec {
        seed: args.seed,
        tokens: args.tokens,
        classes: args.classes,
        motif_len: args.motif_len,
        noise: args.noise,
        train_count: args.train_count,
        test_count: args.test_count,
        shift_policy: args.train_shift,
        ..ShiftTaskSpec::default()
    };
    let config = MixerConfig {
        depth: args.depth,
        hidden: args.hidden,
        ratio: args.ratio,
        groups: args.groups,
        token_mlp_dim: args.token_mlp_dim,
        norm: args.norm,
        ..shift_task_model(&spec, args.mixer).map_err(|e| CliError::Usage(e.to_string()))?
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = TrainOptions {
        epochs: args.epochs,
        lr: args.lr,
        min_lr: args.min_lr,
        warmup_frac: args.warmup_frac,
        weight_decay: args.weight_decay,
        batch_size: args.batch_size,
        seed: args.seed,
        backend: args.backend,
    };
    let (train_set, test_set) = make_shift_task::<f64>(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut metrics = args.metrics.as_deref().map(create).transpose()?;
    let report = train(&config, &train_set, &test_set, &opts)?;

    for m in &report.history {
        println!("epoch {:>3}  train_loss {:.6}  test_acc {:.4}", m.epoch, m.train_loss, m.test_acc);
    }
    if let (Some(w), Some(path)) = (&mut metrics, &args.metrics) {
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "{METRICS_VERSION_LINE}")?;
            writeln!(w, "{METRICS_HEADER}")?;
            for m in &report.history {
                writeln!(w, "{},{},{}", m.epoch, m.train_loss, m.test_acc)?;
            }
            w.flush()
        };
        write(w).map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &args.out {
        save_weights(path, &config, &report.params, args.width)?;
    }
    println!(
        "final test_acc {:.4} ({} mixer, shifted test split)",
        report.final_test_accuracy(),
        config.token_mixer
    );
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> CliResult<()> {
    let (config, params) = match &args.input {
        Some(input) => {
            let file = load_weights(input)?;
            (file.config, file.params)
        }
        None => {
            let (_, config) = args.config.resolve()?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let params = ModelParams::<f64>::init(&config, &mut rng)?;
            (config, params)
        }
    };
    save_weights(&args.out, &config, &params, args.width)?;
    println!(
        "wrote {} ({} parameters, {}-byte elements)",
        args.out.display(),
        params.param_count(),
        args.width.bytes()
    );
    Ok(())
}
