use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::Parser;
use esn_lrofr::benchmarks::{
    evaluate_mg, generate_mg, surrogate_vector_field, transform_sequence, BenchmarkReport, EsnForecaster, MgParams,
    NrmseProtocol, TestSequences,
};
use esn_lrofr::esn::{EsnConfig, Inputs, Reservoir};
use esn_lrofr::persistence::{
    archive_kind, from_archive_str, load_archive, load_config, save_archive, write_atomic, HarvestArchive,
    ModelArchive, Provenance, SelectionSummary, FORMAT_VERSION,
};
use esn_lrofr::rbf::{fit_rbf_readout, CenterSource, RbfKernel, RbfSpec};
use esn_lrofr::readout::{fit_linear, fit_lrofr_linear, training_mse, ReadoutModel};
use esn_lrofr::selection::{lrofr_fit, ofr_select, LrofrOptions, RegressionProblem, LAMBDA_CEILING};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{self, Sequence};
use crate::failure::{Category, Context, Failure, Outcome};
use crate::manifest::{self, Manifest};
use crate::{
    AnalyzeArgs, Cli, Command, EsnFlags, EvaluateArgs, FitArgs, GenerateArgs, HarvestArgs, InspectArgs, KernelKind,
    LrofrFlags, Method, MgFlags, ModeKind, Preset, ProtocolFlags, RbfFlags, ReadoutKind, Subject,
};

/// λ at or above this marks a regressor as switched off.
const ATTENUATED: f64 = 1e-3 * LAMBDA_CEILING;

#[derive(Debug)]
pub enum RunError {
    Usage(clap::Error),
    Failed(Failure),
}

struct Ctx {
    argv: Vec<String>,
    created: String,
    out_dir: PathBuf,
    verbose: u8,
    seed: Option<u64>,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn note(&self, msg: impl std::fmt::Display) {
        if self.verbose > 0 {
            eprintln!("{msg}");
        }
    }

    fn manifest<S: Serialize>(&self, command: &str, primary: &Path, outputs: &[PathBuf], resolved: S) -> Outcome<()> {
        let m = Manifest {
            command: command.to_string(),
            argv: self.argv.clone(),
            created: self.created.clone(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
            resolved,
        };
        let path = manifest::write(primary, &m)?;
        self.note(format!("manifest: {}", path.display()));
        Ok(())
    }
}

pub fn run(mut argv: Vec<String>) -> Result<(), RunError> {
    let cli = Cli::try_parse_from(&argv).map_err(RunError::Usage)?;
    if let Command::Replay(r) = &cli.command {
        let mut recorded = manifest::read_argv(&r.manifest)?;
        if recorded.iter().skip(1).any(|a| a == "replay") {
            return Err(Failure::msg(Category::Config, "a manifest cannot record another replay").into());
        }
        if let Some(dir) = &cli.global.out_dir {
            recorded.push("--out_dir".into());
            recorded.push(dir.display().to_string());
        }
        return run(recorded);
    }
    let created = match &cli.global.created {
        Some(c) => c.clone(),
        None => {
            let now = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
            argv.push("--created".into());
            argv.push(now.clone());
            now
        }
    };
    let ctx = Ctx {
        argv,
        created,
        out_dir: cli.global.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        verbose: cli.global.verbose,
        seed: cli.global.seed,
    };
    let result = match cli.command {
        Command::Generate(a) => prepare(&ctx).and_then(|_| generate(&ctx, a)),
        Command::Harvest(a) => prepare(&ctx).and_then(|_| harvest(&ctx, a)),
        Command::Analyze(a) => prepare(&ctx).and_then(|_| analyze(&ctx, a)),
        Command::Fit(a) => prepare(&ctx).and_then(|_| fit(&ctx, a)),
        Command::Evaluate(a) => prepare(&ctx).and_then(|_| evaluate(&ctx, a)),
        Command::Inspect(a) => inspect(a),
        Command::Replay(_) => unreachable!("handled above"),
    };
    result.map_err(RunError::Failed)
}

fn prepare(ctx: &Ctx) -> Outcome<()> {
    fs::create_dir_all(&ctx.out_dir).ctx(format!("creating {}", ctx.out_dir.display()))
}

fn load_settings<S: DeserializeOwned + Default>(path: Option<&Path>) -> Outcome<S> {
    match path {
        None => Ok(S::default()),
        Some(p) => {
            let text = fs::read_to_string(p).ctx(format!("reading {}", p.display()))?;
            toml::from_str(&text).ctx(format!("parsing {}", p.display()))
        }
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn save_bytes(path: &Path, bytes: &[u8]) -> Outcome<()> {
    write_atomic(path, bytes).ctx(format!("writing {}", path.display()))
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

impl MgFlags {
    fn apply(&self, p: &mut MgParams) {
        set(&mut p.alpha, self.alpha);
        set(&mut p.beta_exp, self.beta_exp);
        set(&mut p.gamma, self.gamma);
        set(&mut p.tau, self.tau);
        set(&mut p.step, self.step);
        set(&mut p.subsample, self.subsample);
        set(&mut p.burn_in, self.burn_in);
        set(&mut p.length, self.length);
        set(&mut p.history_init, self.history_init);
        set(&mut p.history_jitter, self.history_jitter);
    }
}

impl EsnFlags {
    fn apply(&self, c: &mut EsnConfig<f64>) {
        set(&mut c.reservoir_size, self.reservoir_size);
        set(&mut c.washout, self.washout);
        set(&mut c.state_noise_amplitude, self.state_noise_amplitude);
        set(&mut c.include_input_in_readout, self.include_input_in_readout);
        if self.target_spectral_radius.is_some() {
            c.target_spectral_radius = self.target_spectral_radius;
        }
    }
}

impl LrofrFlags {
    fn apply(&self, o: &mut LrofrOptions<f64>) {
        set(&mut o.initial_lambda, self.initial_lambda);
        set(&mut o.max_outer_iters, self.max_outer_iters);
        set(&mut o.lambda_rel_tol, self.lambda_rel_tol);
        if self.tolerance.is_some() {
            o.tolerance = self.tolerance;
        }
    }
}

impl RbfFlags {
    fn apply(&self, spec: &mut RbfSpec<f64>) -> Outcome<()> {
        match self.kernel {
            Some(KernelKind::ThinPlateSpline) => spec.kernel = RbfKernel::ThinPlateSpline,
            Some(KernelKind::Gaussian) if !matches!(spec.kernel, RbfKernel::Gaussian { .. }) => {
                spec.kernel = RbfKernel::Gaussian { variance: 1.0 }
            }
            _ => {}
        }
        if let Some(v) = self.variance {
            match &mut spec.kernel {
                RbfKernel::Gaussian { variance } => *variance = v,
                RbfKernel::ThinPlateSpline => {
                    return Err(Failure::msg(Category::Config, "--variance only applies to the gaussian kernel"))
                }
            }
        }
        set(&mut spec.dopt_beta, self.dopt_beta);
        if let Some(stride) = self.stride {
            spec.center_source = CenterSource::Subsample { stride };
        }
        Ok(())
    }
}

impl ProtocolFlags {
    fn apply(&self, p: &mut NrmseProtocol) {
        set(&mut p.n_trials, self.n_trials);
        set(&mut p.warm_steps, self.warm_steps);
        set(&mut p.horizons, self.horizons.clone());
        if let Some(mode) = self.mode {
            p.mode = match mode {
                ModeKind::Segmented => TestSequences::Segmented,
                ModeKind::Independent => TestSequences::Independent,
            };
        }
    }
}

// ---- generate -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct GenerateSettings {
    subject: Subject,
    seed: u64,
    transform: bool,
    n_points: usize,
    noise: f64,
    mg: MgParams,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self {
            subject: Subject::Mg,
            seed: 1,
            transform: true,
            n_points: 2704,
            noise: 0.01,
            mg: MgParams::default(),
        }
    }
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> Outcome<()> {
    let mut s: GenerateSettings = load_settings(a.config.as_deref())?;
    set(&mut s.subject, a.subject);
    set(&mut s.seed, ctx.seed);
    set(&mut s.transform, a.transform);
    set(&mut s.n_points, a.n_points);
    set(&mut s.noise, a.noise);
    a.mg.apply(&mut s.mg);

    let seq = match s.subject {
        Subject::Mg => {
            let y = generate_mg(&s.mg, s.seed)?;
            let y = if s.transform { transform_sequence(&y) } else { y };
            Sequence {
                inputs: None,
                outputs: DMatrix::from_column_slice(y.len(), 1, &y),
            }
        }
        Subject::Surrogate => {
            if s.n_points < 2 || !(s.noise >= 0.0) {
                return Err(Failure::msg(Category::Config, "surrogate needs n_points >= 2 and noise >= 0"));
            }
            let d = surrogate_vector_field(s.n_points, s.noise, s.seed);
            Sequence {
                inputs: Some(d.inputs),
                outputs: d.responses,
            }
        }
    };
    let path = ctx.out(&a.output);
    data::write(&path, &seq)?;
    ctx.manifest("generate", &path, &[path.clone()], &s)?;
    println!(
        "{}: {} rows, {} input and {} output columns",
        path.display(),
        seq.len(),
        seq.inputs.as_ref().map_or(0, DMatrix::ncols),
        seq.outputs.ncols()
    );
    Ok(())
}

// ---- harvest --------------------------------------------------------------

fn harvest(ctx: &Ctx, a: HarvestArgs) -> Outcome<()> {
    let mut config = match (&a.config, a.preset) {
        (Some(_), Some(_)) => return Err(Failure::msg(Category::Config, "give either --config or --preset, not both")),
        (Some(p), None) => load_config::<f64>(p).ctx(format!("loading {}", p.display()))?,
        (None, preset) => match preset.unwrap_or_default() {
            Preset::Mg => EsnConfig::mackey_glass(1),
            Preset::VectorField => EsnConfig::vector_field(1),
        },
    };
    set(&mut config.seed, ctx.seed);
    a.esn.apply(&mut config);
    config.validate()?;

    let seq = data::read(&a.data)?;
    let reservoir = Reservoir::generate(config.clone())?;
    ctx.note(format!("spectral radius {}", reservoir.weights().realized_spectral_radius));
    let inputs = match &seq.inputs {
        Some(u) => Inputs::series(u),
        None => reservoir.default_inputs(),
    };
    let states = reservoir.harvest_states(&inputs, &seq.outputs).ctx(format!("harvesting {}", a.data.display()))?;
    let (rows, cols) = states.states.shape();
    let archive = HarvestArchive {
        esn_config: config.clone(),
        esn_weights: reservoir.weights().clone(),
        harvest: states,
        provenance: Provenance::new(config.seed, ctx.created.clone()),
    };
    let path = ctx.out(&a.output);
    save_archive(&archive, &path).ctx(format!("saving {}", path.display()))?;
    ctx.manifest("harvest", &path, &[path.clone()], &config)?;
    println!(
        "{}: {rows} x {cols} states, spectral radius {:.6}",
        path.display(),
        reservoir.weights().realized_spectral_radius
    );
    Ok(())
}

fn load_harvest(path: &Path) -> Outcome<HarvestArchive<f64>> {
    load_archive(path).ctx(format!("loading {}", path.display()))
}

// ---- analyze --------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct AnalyzeSettings {
    method: Method,
    component: usize,
    lrofr: LrofrOptions<f64>,
}

fn analyze(ctx: &Ctx, a: AnalyzeArgs) -> Outcome<()> {
    let mut s: AnalyzeSettings = load_settings(a.config.as_deref())?;
    set(&mut s.method, a.method);
    set(&mut s.component, a.component);
    a.lrofr.apply(&mut s.lrofr);

    let archive = load_harvest(&a.harvest)?;
    let h = &archive.harvest;
    if s.component >= h.targets.ncols() {
        return Err(Failure::msg(
            Category::Config,
            format!("component {} out of range (harvest has {} outputs)", s.component, h.targets.ncols()),
        ));
    }
    let problem = RegressionProblem::new(h.states.clone(), h.targets.column(s.component).into_owned())?;
    let stem = a.output.unwrap_or_else(|| match s.method {
        Method::Ofr => "ofr".into(),
        Method::Lrofr => "lrofr".into(),
    });
    let trace_path = ctx.out(&format!("{stem}-trace.csv"));
    let mut outputs = vec![trace_path.clone()];
    match s.method {
        Method::Ofr => {
            let (trace, _) = ofr_select(&problem, s.lrofr.tolerance)?;
            save_bytes(&trace_path, &csv_bytes(|w| trace.write_csv(w))?)?;
            println!(
                "OFR: {} regressors selected; unexplained ratio after 1 selection {:.6e}",
                trace.steps.len(),
                trace.steps.first().map_or(1.0, |st| st.unexplained)
            );
        }
        Method::Lrofr => {
            let fit = lrofr_fit(&problem, &s.lrofr)?;
            let trace = fit.traces.last().expect("at least one pass");
            save_bytes(&trace_path, &csv_bytes(|w| trace.write_csv(w))?)?;
            let lambda_path = ctx.out(&format!("{stem}-lambda.csv"));
            save_bytes(&lambda_path, &csv_bytes(|w| fit.write_lambda_csv(w))?)?;
            outputs.push(lambda_path);
            let attenuated = fit.regularization.lambdas.iter().filter(|l| **l >= ATTENUATED).count();
            println!(
                "LROFR: {} outer iterations (converged: {}), {} regressors selected, {} with λ ≥ {:e}",
                fit.regularization.iteration_count,
                fit.regularization.converged,
                fit.selected().len(),
                attenuated,
                ATTENUATED
            );
        }
    }
    ctx.manifest("analyze", &trace_path, &outputs, &s)
}

// ---- fit ------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct FitSettings {
    readout: ReadoutKind,
    lrofr: LrofrOptions<f64>,
    rbf: RbfSpec<f64>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            readout: ReadoutKind::Linear,
            lrofr: LrofrOptions::default(),
            rbf: RbfSpec::gaussian(1.0, 1e-4),
        }
    }
}

fn fit(ctx: &Ctx, a: FitArgs) -> Outcome<()> {
    let mut s: FitSettings = load_settings(a.config.as_deref())?;
    set(&mut s.readout, a.readout);
    a.lrofr.apply(&mut s.lrofr);
    a.rbf.apply(&mut s.rbf)?;

    let archive = load_harvest(&a.harvest)?;
    let h = &archive.harvest;
    let (readout, selection) = match s.readout {
        ReadoutKind::Linear => (ReadoutModel::Linear(fit_linear(h)), Vec::new()),
        ReadoutKind::LrofrLinear => {
            let (r, fits) = fit_lrofr_linear(h, &s.lrofr)?;
            (
                ReadoutModel::RegularizedLinear(r),
                fits.iter().map(SelectionSummary::from_fit).collect(),
            )
        }
        ReadoutKind::RbfDopt => {
            let mut outputs = Vec::new();
            let mut summaries = Vec::new();
            for p in 0..h.targets.ncols() {
                let (r, f) = fit_rbf_readout(&h.states, &h.targets.column(p).into_owned(), &s.rbf, &s.lrofr)
                    .ctx(format!("output component {p}"))?;
                ctx.note(format!("component {p}: {} centres", r.centers.len()));
                outputs.push(r);
                summaries.push(SelectionSummary::from_fit(&f));
            }
            (ReadoutModel::Rbf { outputs }, summaries)
        }
    };
    let mse = training_mse(&readout, h);
    let model = ModelArchive {
        esn_config: archive.esn_config.clone(),
        esn_weights: archive.esn_weights.clone(),
        training_mse: mse,
        readout,
        selection,
        provenance: Provenance::new(archive.esn_config.seed, ctx.created.clone()),
    };
    let name = a.output.unwrap_or_else(|| format!("model-{}.json", model.readout.kind()));
    let path = ctx.out(&name);
    save_archive(&model, &path).ctx(format!("saving {}", path.display()))?;
    ctx.manifest("fit", &path, &[path.clone()], &s)?;
    println!(
        "{}: {} readout, {} terms, training MSE {:.6e}",
        path.display(),
        model.readout.kind(),
        model.readout.term_count(),
        mse
    );
    Ok(())
}

// ---- evaluate -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EvaluateSettings {
    seed: u64,
    runs: usize,
    mg: MgParams,
    protocol: NrmseProtocol,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self {
            // away from the low seeds `generate` uses, so test attractors
            // never start from the training sequence's history
            seed: 1000,
            runs: 1,
            mg: MgParams::default(),
            protocol: NrmseProtocol::default(),
        }
    }
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Outcome<()> {
    let mut s: EvaluateSettings = load_settings(a.config.as_deref())?;
    set(&mut s.seed, ctx.seed);
    set(&mut s.runs, a.runs);
    a.mg.apply(&mut s.mg);
    a.protocol.apply(&mut s.protocol);
    if s.runs == 0 {
        return Err(Failure::msg(Category::Config, "--runs must be at least 1"));
    }

    let model: ModelArchive<f64> = load_archive(&a.model).ctx(format!("loading {}", a.model.display()))?;
    if model.esn_config.output_dim != 1 {
        return Err(Failure::msg(
            Category::Config,
            format!("evaluation needs a single-output model, this one has {}", model.esn_config.output_dim),
        ));
    }
    let reservoir = Reservoir::new(model.esn_config.clone(), model.esn_weights.clone())?;
    let forecaster = EsnForecaster {
        reservoir: &reservoir,
        readout: &model.readout,
    };
    let primary = ctx.out(&a.output);
    let mut outputs = vec![primary.clone()];
    let mut reports: Vec<(u64, BenchmarkReport<f64>)> = Vec::new();
    for run in 0..s.runs {
        let seed = s.seed + run as u64;
        let mut report = evaluate_mg(&forecaster, &s.mg, &s.protocol, seed).ctx(format!("run {run} (seed {seed})"))?;
        report.training_mse = Some(model.training_mse);
        let line: Vec<String> = report
            .horizons
            .iter()
            .zip(&report.nrmse)
            .map(|(h, v)| format!("NRMSE_{h} = {v:.4}"))
            .collect();
        println!("run {run} (seed {seed}): {}", line.join(", "));
        if s.runs > 1 {
            let path = ctx.out(&run_file_name(&a.output, run));
            save_bytes(&path, &csv_bytes(|w| report.write_csv(w))?)?;
            outputs.push(path);
        }
        reports.push((seed, report));
    }
    if s.runs == 1 {
        save_bytes(&primary, &csv_bytes(|w| reports[0].1.write_csv(w))?)?;
    } else {
        save_bytes(&primary, &csv_bytes(|w| write_summary(w, &reports))?)?;
    }
    ctx.manifest("evaluate", &primary, &outputs, &s)
}

fn run_file_name(output: &str, run: usize) -> String {
    let p = Path::new(output);
    let stem = p.file_stem().unwrap_or_default().to_string_lossy();
    match p.extension() {
        Some(ext) => format!("{stem}-run{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}-run{run}"),
    }
}

/// One row per run: `run,seed,nrmse_<h>...`.
fn write_summary(w: &mut Vec<u8>, reports: &[(u64, BenchmarkReport<f64>)]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["run".to_string(), "seed".to_string()];
    header.extend(reports[0].1.horizons.iter().map(|h| format!("nrmse_{h}")));
    out.write_record(&header)?;
    for (run, (seed, r)) in reports.iter().enumerate() {
        let mut row = vec![run.to_string(), seed.to_string()];
        row.extend(r.nrmse.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

// ---- inspect --------------------------------------------------------------

fn inspect(a: InspectArgs) -> Outcome<()> {
    let text = fs::read_to_string(&a.archive).ctx(format!("reading {}", a.archive.display()))?;
    let kind = archive_kind(&text)?;
    println!("{}: {kind} archive, format version {FORMAT_VERSION}", a.archive.display());
    match kind.as_str() {
        "harvest" => {
            let h: HarvestArchive<f64> = from_archive_str(&text)?;
            describe_reservoir(&h.esn_config, h.esn_weights.realized_spectral_radius, &h.provenance);
            println!(
                "states: {} x {}, targets: {} x {}, kept rows {}..{}",
                h.harvest.states.nrows(),
                h.harvest.states.ncols(),
                h.harvest.targets.nrows(),
                h.harvest.targets.ncols(),
                h.harvest.kept_range.0,
                h.harvest.kept_range.1
            );
        }
        "model" => {
            let m: ModelArchive<f64> = from_archive_str(&text)?;
            describe_reservoir(&m.esn_config, m.esn_weights.realized_spectral_radius, &m.provenance);
            println!(
                "readout: {}, {} nonzero terms, training MSE {:.6e}",
                m.readout.kind(),
                m.readout.term_count(),
                m.training_mse
            );
            for (p, sel) in m.selection.iter().enumerate() {
                let attenuated = sel.lambdas.iter().filter(|l| **l >= ATTENUATED).count();
                println!(
                    "output {p}: {} selected, {} iterations (converged: {}), {attenuated} with λ ≥ {ATTENUATED:e}{}",
                    sel.selected.len(),
                    sel.iterations,
                    sel.converged,
                    sel.final_unexplained
                        .map(|u| format!(", unexplained ratio {u:.3e}"))
                        .unwrap_or_default()
                );
            }
        }
        other => return Err(Failure::msg(Category::Archive, format!("unknown archive kind `{other}`"))),
    }
    Ok(())
}

fn describe_reservoir(c: &EsnConfig<f64>, radius: f64, prov: &Provenance) {
    println!(
        "reservoir: {} units, {} inputs, {} outputs, washout {}, seed {}, spectral radius {radius:.6}",
        c.reservoir_size, c.input_dim, c.output_dim, c.washout, c.seed
    );
    println!("created {} with library {}", prov.created, prov.library_version);
}
