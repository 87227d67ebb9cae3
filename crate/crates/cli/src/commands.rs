use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use emgcode::dataset::{load_overrides, read_record, scan_dataset_with, DatasetManifest, RecordKey, ScanOptions};
use emgcode::dsp::extract_series;
use emgcode::eval::{self, code_gestures, Fold, Weighting};
use emgcode::fusion::{certainty_from_value, fuse, normalize_weights};
use emgcode::matcher::{enroll_series, score_attempt_with};
use emgcode::synth::{generate, SynthConfig};
use emgcode::{
    ChannelSelection, CodeSequence, EvalReport, FeatureBank, ProtocolKind, RunConfig, Scenario,
    TemplateStore,
};

use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.eval.seed = seed;
    }
    let ctx = Ctx {
        cfg,
        seed_flag: cli.global.seed,
        allow_partial: cli.global.allow_partial,
    };
    match cli.command {
        Command::Scan(a) => scan(&ctx, a),
        Command::Features(a) => features(&ctx, a),
        Command::Enroll(a) => enroll(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

struct Ctx {
    cfg: RunConfig,
    seed_flag: Option<u64>,
    allow_partial: bool,
}

impl Ctx {
    fn dataset(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.cfg.paths.dataset.clone())
            .ok_or_else(|| anyhow!("no dataset root: pass --dataset or set paths.dataset"))
    }

    fn output(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.cfg.paths.output.clone())
            .ok_or_else(|| anyhow!("no output directory: pass --output or set paths.output"))
    }

    fn store(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.cfg.paths.store.clone())
            .ok_or_else(|| anyhow!("no template store: pass --store or set paths.store"))
    }

    fn scan(&self, root: &Path) -> Result<DatasetManifest> {
        let name_overrides = match &self.cfg.paths.name_overrides {
            Some(p) => load_overrides(p)?,
            None => BTreeMap::new(),
        };
        let options = ScanOptions {
            grid: self.cfg.grid,
            name_overrides,
        };
        Ok(scan_dataset_with(root, &options)?)
    }

    /// Scan and refuse empty trees, and incomplete ones unless allowed.
    fn usable_manifest(&self, root: &Path) -> Result<DatasetManifest> {
        let m = self.scan(root)?;
        for w in &m.warnings {
            log::warn!("{w}");
        }
        if m.entries.is_empty() {
            bail!("no records found under {}", root.display());
        }
        if !m.is_complete() {
            if !self.allow_partial {
                bail!(
                    "{} expected records are missing under {} (pass --allow-partial to continue)",
                    m.missing.len(),
                    root.display()
                );
            }
            log::warn!("{} expected records are missing", m.missing.len());
        }
        Ok(m)
    }

    fn bank(&self, manifest: &DatasetManifest, keys: &[RecordKey], selection: &ChannelSelection) -> Result<FeatureBank> {
        log::info!("extracting {} feature series for {}", keys.len(), selection.name);
        Ok(FeatureBank::extract(keys, selection, &self.cfg.window, &self.cfg.fdt, |k| {
            let path = manifest
                .path_of(k)
                .ok_or_else(|| emgcode::Error::Missing(format!("record {k}")))?;
            read_record(&path)
        })?)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "wd" | "within_day" => Ok(ProtocolKind::WithinDay),
        "scd" | "single_cross_day" => Ok(ProtocolKind::SingleCrossDay),
        "ccd" | "cumulative_cross_day" => Ok(ProtocolKind::CumulativeCrossDay),
        _ => Err(format!("unknown protocol {s:?} (expected wd, scd or ccd)")),
    }
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    match s.to_ascii_lowercase().as_str() {
        "normal" => Ok(Scenario::Normal),
        "leaked" => Ok(Scenario::Leaked),
        _ => Err(format!("unknown scenario {s:?} (expected normal or leaked)")),
    }
}

// ---------------------------------------------------------------- scan

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Dataset root; defaults to `paths.dataset`.
    pub root: Option<PathBuf>,
    /// Write the full manifest, including the missing list, as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Serialize)]
struct ManifestOutput<'a> {
    config_hash: String,
    seed: u64,
    manifest: &'a DatasetManifest,
}

fn scan(ctx: &Ctx, args: ScanArgs) -> Result<ExitCode> {
    let root = ctx.dataset(args.root)?;
    let m = ctx.scan(&root)?;
    println!("root: {}", root.display());
    println!("records: {}", m.entries.len());
    println!("missing: {}", m.missing.len());
    let incomplete = m.completeness.iter().filter(|c| !c.complete).count();
    println!("incomplete subject-days: {incomplete}");
    println!("warnings: {}", m.warnings.len());
    for w in &m.warnings {
        log::warn!("{w}");
    }
    if let Some(path) = &args.json {
        write_json(
            path,
            &ManifestOutput {
                config_hash: ctx.cfg.hash(),
                seed: ctx.cfg.eval.seed,
                manifest: &m,
            },
        )?;
    }
    if m.entries.is_empty() {
        eprintln!("error: no records found under {}", root.display());
        return Ok(ExitCode::from(1));
    }
    if !m.is_complete() && !ctx.allow_partial {
        eprintln!("error: dataset is incomplete (pass --allow-partial to accept)");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- features

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Output directory; defaults to `<paths.output>/features`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Channel selections to extract (default: all configured).
    #[arg(long, value_delimiter = ',')]
    pub selection: Vec<String>,
}

#[derive(Serialize)]
struct FeatureIndex {
    config_hash: String,
    seed: u64,
    selections: BTreeMap<String, String>,
    records: Vec<String>,
}

fn features(ctx: &Ctx, args: FeaturesArgs) -> Result<ExitCode> {
    let root = ctx.dataset(args.dataset)?;
    let out = match args.out {
        Some(o) => o,
        None => ctx.output(None)?.join("features"),
    };
    let selections = pick_selections(&ctx.cfg, &args.selection)?;
    let m = ctx.usable_manifest(&root)?;
    let keys: Vec<RecordKey> = m.keys().collect();
    let mut index = FeatureIndex {
        config_hash: ctx.cfg.hash(),
        seed: ctx.cfg.eval.seed,
        selections: BTreeMap::new(),
        records: keys.iter().map(RecordKey::record_name).collect(),
    };
    for sel in &selections {
        let dir = out.join(&sel.name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        keys.par_iter().try_for_each(|k| -> Result<()> {
            let path = m.path_of(k).ok_or_else(|| anyhow!("record {k} vanished"))?;
            let series = extract_series(&read_record(&path)?, sel, &ctx.cfg.window, &ctx.cfg.fdt)?;
            let file = dir.join(format!("{}.csv", k.record_name()));
            let mut w = BufWriter::new(
                fs::File::create(&file).with_context(|| format!("creating {}", file.display()))?,
            );
            series.write_to(&mut w)?;
            w.flush()?;
            Ok(())
        })?;
        index
            .selections
            .insert(sel.name.clone(), ctx.cfg.feature_hash(sel));
    }
    write_json(&out.join("index.json"), &index)?;
    println!(
        "wrote {} feature series for {} selection(s) to {}",
        keys.len(),
        selections.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn pick_selections(cfg: &RunConfig, names: &[String]) -> Result<Vec<ChannelSelection>> {
    if names.is_empty() {
        return Ok(cfg.selections.clone());
    }
    names
        .iter()
        .map(|n| cfg.selection(n).cloned().map_err(Into::into))
        .collect()
}

// ---------------------------------------------------------------- enroll

#[derive(Debug, Args)]
pub struct EnrollArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Template store to write; defaults to `paths.store`.
    #[arg(long, value_name = "FILE")]
    pub store: Option<PathBuf>,
    /// Channel selection (default: the first configured).
    #[arg(long)]
    pub selection: Option<String>,
    /// Enrollment sessions.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sessions: Vec<u16>,
    /// Enrollment trials (default: every trial but the last).
    #[arg(long, value_delimiter = ',')]
    pub trials: Vec<u16>,
    /// Users to enroll (default: every user with complete enrollment data).
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<u16>,
}

fn enroll(ctx: &Ctx, args: EnrollArgs) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let root = ctx.dataset(args.dataset)?;
    let store_path = ctx.store(args.store)?;
    let sel = match &args.selection {
        Some(n) => cfg.selection(n)?.clone(),
        None => cfg.selections[0].clone(),
    };
    let m = ctx.scan(&root)?;
    if m.entries.is_empty() {
        bail!("no records found under {}", root.display());
    }
    let grid = m.grid;
    let trials: Vec<u16> = if args.trials.is_empty() {
        (1..grid.trials).collect()
    } else {
        args.trials.clone()
    };
    let refs: Vec<(u16, u16)> = args
        .sessions
        .iter()
        .flat_map(|&s| trials.iter().map(move |&t| (s, t)))
        .collect();
    if refs.len() < 2 {
        bail!("enrollment needs at least two trials to set thresholds");
    }
    for &(s, t) in &refs {
        if s == 0 || s > grid.sessions || t == 0 || t > grid.trials {
            bail!("session {s} trial {t} lies outside the dataset grid");
        }
    }
    let gestures = code_gestures(&m);
    let wanted: Vec<u16> = if args.subjects.is_empty() {
        m.subjects().into_iter().collect()
    } else {
        args.subjects.clone()
    };
    let mut subjects = Vec::new();
    for &j in &wanted {
        let complete = gestures
            .iter()
            .all(|&g| refs.iter().all(|&(s, t)| m.contains(&RecordKey::new(s, j, g, t))));
        if complete {
            subjects.push(j);
        } else if args.subjects.is_empty() {
            log::warn!("subject {j} skipped: enrollment records incomplete");
        } else {
            bail!("subject {j} lacks enrollment records");
        }
    }
    if subjects.is_empty() {
        bail!("no subject has complete enrollment records");
    }

    let mut keys = Vec::new();
    for &j in &subjects {
        for &g in &gestures {
            keys.extend(refs.iter().map(|&(s, t)| RecordKey::new(s, j, g, t)));
        }
    }
    let bank = ctx.bank(&m, &keys, &sel)?;
    let margin = cfg.threshold_margin;
    let shrinkage = cfg.eval.shrinkage;
    let pairs: Vec<(u16, u16)> = subjects
        .iter()
        .flat_map(|&j| gestures.iter().map(move |&g| (j, g)))
        .collect();
    let entries = pairs
        .par_iter()
        .map(|&(j, g)| -> Result<_> {
            let series = refs
                .iter()
                .map(|&(s, t)| bank.get(&RecordKey::new(s, j, g, t)))
                .collect::<emgcode::Result<Vec<_>>>()?;
            let template = enroll_series(&series, j, g, shrinkage)?;
            // leave-one-trial-out genuine scores bound the threshold
            let mut worst = 0.0f64;
            for held in 0..series.len() {
                let rest: Vec<_> = series
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != held)
                    .map(|(_, s)| *s)
                    .collect();
                let t = enroll_series(&rest, j, g, shrinkage)?;
                worst = worst.max(score_attempt_with(series[held], &t, cfg.eval.aggregate)?.value);
            }
            Ok((template, worst * (1.0 + margin)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut store = TemplateStore::new(cfg.feature_hash(&sel), sel.name.clone());
    store.gesture_accuracy = if cfg.eval.weighting == Weighting::Uniform || subjects.len() < 2 {
        if cfg.eval.weighting == Weighting::Accuracy {
            log::warn!("a single enrolled subject gives no impostors; using uniform fusion weights");
        }
        gestures.iter().map(|&g| (g, 1.0)).collect()
    } else {
        let fold = Fold {
            protocol: ProtocolKind::WithinDay,
            day: refs[0].0,
            trial: 0,
            enrollment: refs.clone(),
            claimant: Vec::new(),
            subjects: subjects.clone(),
        };
        eval::gesture_accuracy(&[fold], &bank, &gestures, &cfg.eval)?
    };
    for (template, threshold) in entries {
        store.insert(template, threshold)?;
    }
    if let Some(dir) = store_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    store.save(&store_path)?;
    println!(
        "enrolled {} templates ({} users x {} gestures, selection {}) into {}",
        store.len(),
        subjects.len(),
        gestures.len(),
        sel.name,
        store_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_name = "FILE")]
    pub store: Option<PathBuf>,
    /// Claimed identity.
    #[arg(long)]
    pub user: u16,
    /// Code sequence, e.g. `3,7,12`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sequence: Vec<u16>,
    /// Header path of the recording for each code, in sequence order.
    #[arg(long = "record", value_name = "HEA", required = true)]
    pub records: Vec<PathBuf>,
    /// Print the outcome as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct CodeOutcome {
    gesture: u16,
    record: String,
    score: f64,
    threshold: f64,
    certainty: u8,
    weight: f64,
}

#[derive(Serialize)]
struct VerifyOutput {
    config_hash: String,
    seed: u64,
    user: u16,
    codes: Vec<CodeOutcome>,
    discriminant: f64,
    accepted: bool,
}

fn verify(ctx: &Ctx, args: VerifyArgs) -> Result<ExitCode> {
    let cfg = &ctx.cfg;
    let store_path = ctx.store(args.store)?;
    let store = TemplateStore::load(&store_path, None)?;
    let sel = cfg.selection(&store.selection)?;
    let expected = cfg.feature_hash(sel);
    if store.config_hash != expected {
        return Err(emgcode::Error::ConfigHashMismatch {
            expected,
            found: store.config_hash.clone(),
        }
        .into());
    }
    let sequence = CodeSequence::new(args.sequence.clone())?;
    if args.records.len() != sequence.len() {
        bail!(
            "{} records given for a sequence of {} codes",
            args.records.len(),
            sequence.len()
        );
    }
    let entries = sequence
        .codes()
        .iter()
        .map(|&g| {
            store
                .get(args.user, g)
                .ok_or_else(|| anyhow!("no template for user {} gesture {g}", args.user))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = normalize_weights(&store.gesture_accuracy, &sequence)?;
    let mut codes = Vec::new();
    for ((entry, path), &w) in entries.iter().zip(&args.records).zip(&weights.normalized) {
        let rec = read_record(path)?;
        let series = extract_series(&rec, sel, &cfg.window, &cfg.fdt)?;
        let score = score_attempt_with(&series, &entry.template, cfg.eval.aggregate)?.value;
        codes.push(CodeOutcome {
            gesture: entry.template.gesture,
            record: rec.key.record_name(),
            score,
            threshold: entry.threshold,
            certainty: certainty_from_value(score, entry.threshold),
            weight: w,
        });
    }
    let certainties: Vec<u8> = codes.iter().map(|c| c.certainty).collect();
    let decision = fuse(&certainties, &weights)?;
    let out = VerifyOutput {
        config_hash: cfg.hash(),
        seed: cfg.eval.seed,
        user: args.user,
        codes,
        discriminant: decision.discriminant,
        accepted: decision.accepted,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("claimed user {}", out.user);
        for c in &out.codes {
            println!(
                "  gesture {:>2}  {}  score {:.4}  threshold {:.4}  certainty {}  weight {:.4}",
                c.gesture, c.record, c.score, c.threshold, c.certainty, c.weight
            );
        }
        println!("g = {:.4}", out.discriminant);
        println!("decision: {}", if out.accepted { "accept" } else { "reject" });
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Report directory; defaults to `paths.output`.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Protocols to run: wd, scd, ccd.
    #[arg(long, value_delimiter = ',', value_parser = parse_protocol)]
    pub protocols: Vec<ProtocolKind>,
    /// Scenarios to run: normal, leaked.
    #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
    pub scenarios: Vec<Scenario>,
    /// Codelengths to report.
    #[arg(long, value_delimiter = ',')]
    pub codelengths: Vec<usize>,
    /// Random code sequences per subject.
    #[arg(long)]
    pub sequences: Option<usize>,
    /// Channel selections to evaluate.
    #[arg(long, value_delimiter = ',')]
    pub selections: Vec<String>,
}

fn evaluate(mut ctx: Ctx, args: EvaluateArgs) -> Result<ExitCode> {
    let root = ctx.dataset(args.dataset.clone())?;
    let out = ctx.output(args.output.clone())?;
    let cfg = &mut ctx.cfg;
    if !args.protocols.is_empty() {
        cfg.eval.protocols = args.protocols.clone();
    }
    if !args.scenarios.is_empty() {
        cfg.eval.scenarios = args.scenarios.clone();
    }
    if !args.codelengths.is_empty() {
        cfg.eval.codelengths = args.codelengths.clone();
    }
    if let Some(n) = args.sequences {
        cfg.eval.sequence_count = n;
    }
    cfg.selections = pick_selections(cfg, &args.selections)?;
    cfg.validate()?;
    let hash = cfg.hash();

    let m = ctx.usable_manifest(&root)?;
    let keys = FeatureBank::needed_keys(&m);
    let banks = ctx
        .cfg
        .selections
        .iter()
        .map(|sel| ctx.bank(&m, &keys, sel))
        .collect::<Result<Vec<_>>>()?;
    let report = eval::evaluate(&m, &banks, &ctx.cfg.eval, &hash)?;
    report.write_to(&out)?;
    print_summary(&report);
    println!("wrote report.json, eer_table.csv and det_curves.csv to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &EvalReport) {
    println!("config_hash {}  seed {}", report.config_hash, report.seed);
    println!(
        "{:<22} {:<7} {:<10} {:>2} {:>8} {:>8} {:>8} {:>4}",
        "protocol", "scenario", "selection", "M", "Q1", "median", "Q3", "n"
    );
    for r in &report.results {
        println!(
            "{:<22} {:<7} {:<10} {:>2} {:>8.4} {:>8.4} {:>8.4} {:>4}",
            r.protocol.to_string(),
            r.scenario.to_string(),
            r.selection,
            r.codelength,
            r.quartiles.q1,
            r.quartiles.median,
            r.quartiles.q3,
            r.subjects.len()
        );
    }
    if !report.skipped.is_empty() {
        println!("skipped subjects: {}", report.skipped.len());
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; the tree goes to `<out>/data`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Generator settings (TOML); flags below override it.
    #[arg(long, value_name = "FILE")]
    pub synth_config: Option<PathBuf>,
    #[arg(long)]
    pub subjects: Option<u16>,
    #[arg(long)]
    pub sessions: Option<u16>,
    #[arg(long)]
    pub gestures: Option<u16>,
    #[arg(long)]
    pub trials: Option<u16>,
    /// Samples per record.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

fn synth(ctx: &Ctx, args: SynthArgs) -> Result<ExitCode> {
    let mut sc = match &args.synth_config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => {$(
            if let Some(v) = args.$flag {
                sc.$field = v;
            }
        )*};
    }
    set!(subject_count <- subjects, session_count <- sessions, gesture_count <- gestures,
         trial_count <- trials, sample_count <- samples, separation <- separation,
         session_drift <- drift, noise_level <- noise);
    if let Some(seed) = ctx.seed_flag {
        sc.rng_seed = seed;
    }
    sc.validate()?;
    let root = generate(&sc, &args.out)?;

    // a run configuration that points at the new tree
    let mut run = ctx.cfg.clone();
    run.paths.dataset = Some(root.clone());
    run.grid = sc.grid();
    let run_path = args.out.join("emgcode.toml");
    fs::write(&run_path, run.to_toml()?).with_context(|| format!("writing {}", run_path.display()))?;
    println!("wrote {} records to {}", sc.grid().len(), root.display());
    println!("run configuration: {}", run_path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` or the directory holding it; defaults to `paths.output`.
    pub input: Option<PathBuf>,
    /// Print the per-subject EER table as CSV instead of the summary.
    #[arg(long)]
    pub csv: bool,
}

fn report(ctx: &Ctx, args: ReportArgs) -> Result<ExitCode> {
    let mut path = ctx.output(args.input)?;
    if path.is_dir() {
        path = path.join("report.json");
    }
    let report = EvalReport::load(&path)?;
    if args.csv {
        print!("{}", report.eer_table_csv());
    } else {
        print_summary(&report);
        for a in &report.assumptions {
            println!("assumption: {a}");
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
