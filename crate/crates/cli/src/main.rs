mod report;
mod reproduce;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use witnesskit::catalog::{
    bisect_gamma, cloning_margins, cloning_test_operator, gamma_threshold, measure_prepare_basis,
    noisy_mub_measurements, perturbed_cloning_margins, xi_cc, xi_cc_clone, xi_mc, xi_mm, MubPair,
};
use witnesskit::channel::{broadcast_abelian, depolarizing, from_measurement, identity_channel, CHANNEL_TOL};
use witnesskit::compat::{check_compatibility_with, p_post, p_post_optimum, p_prior, p_prior_given, Decision, DECISION_TOL};
use witnesskit::io::{matrix_to_doc, JsonFormat};
use witnesskit::sampling::{random_channel, random_compatible_pair, DEFAULT_SEED};
use witnesskit::witness::{
    lift_witness, task_from_witness, tighten, witness_from_incompatible_pair_with, witness_from_task, SeparationOptions,
};
use witnesskit::{algebra::ic_povm, compat::max_over_compatible};
use witnesskit::{Algebra, Channel, DiscriminationTask, Error, Factor, Measurement, WitnessForm};

use report::{fmt_num, RunReport};

/// Compatibility checks, incompatibility witnesses and discrimination tasks
/// for channels between finite-dimensional block algebras.
#[derive(Parser)]
#[command(name = "witnesskit", version)]
struct Cli {
    /// Seed for every sampled verification.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for independent SDP solves.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Compatibility decision tolerance on e* (check).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the result JSON here instead of after the report.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether two channel files are compatible.
    Check {
        first: PathBuf,
        second: PathBuf,
        /// Write a detecting witness when the pair is incompatible.
        #[arg(long)]
        emit_witness: Option<PathBuf>,
        /// Write the joint channel when the pair is compatible.
        #[arg(long)]
        emit_joint: Option<PathBuf>,
    },
    /// Bisect the noise level at which the noisy MUB measurements become incompatible.
    ScanGamma {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=3))]
        d: u64,
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 12)]
        steps: usize,
    },
    /// Witness evaluation and conversions.
    Witness {
        #[command(subcommand)]
        op: WitnessOp,
    },
    /// Run the numeric checks for the MUB (6) or cloning (7) witnesses.
    Reproduce {
        #[arg(long, value_parser = ["6", "7"])]
        section: String,
    },
    /// Write a catalog object as JSON.
    Export {
        object: CatalogObject,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Noise level for MUB objects (defaults to the threshold) or depolarizing strength.
        #[arg(long)]
        gamma: Option<f64>,
        /// Super-cloning perturbation.
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
    },
}

#[derive(Subcommand)]
enum WitnessOp {
    /// Evaluate a witness on a channel pair.
    Eval { witness: PathBuf, first: PathBuf, second: PathBuf },
    /// Shift the constant so the minimum over compatible pairs is zero.
    Tighten { witness: PathBuf },
    /// Discrimination task whose guessing probability reproduces the witness.
    ToTask {
        witness: PathBuf,
        /// Informationally complete measurement on the first output (default: built in).
        #[arg(long)]
        m1: Option<PathBuf>,
        #[arg(long)]
        m2: Option<PathBuf>,
    },
    /// Tight witness from a discrimination task.
    FromTask { task: PathBuf },
    /// Witness detecting an incompatible pair.
    FromPair { first: PathBuf, second: PathBuf },
    /// Compose one abelian output slot with a projective measurement.
    Lift {
        witness: PathBuf,
        measurement: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), default_value_t = 1)]
        slot: u8,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogObject {
    /// MUB measurement witness.
    XiMm,
    /// MUB witness with the second slot lifted by the computational basis.
    XiMc,
    /// Both slots lifted (computational and Fourier bases).
    XiCc,
    /// Cloning witness d(d+1) - Tr[Theta + Lambda].
    XiCcClone,
    /// Noisy computational-basis measurement.
    MubM,
    /// Noisy Fourier-basis measurement.
    MubN,
    MubMChannel,
    MubNChannel,
    /// Fourier measurement followed by computational-basis preparation.
    MeasurePrepareN,
    CloningMargin,
    PerturbedCloningMargin,
    Identity,
    Depolarizing,
    Broadcast,
    /// Cloning test operator with its spectrum.
    CloningOperator,
}

/// Exit status for a library error: parse 2, solver 3, verification 4.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver { .. }
        | Error::NonConvergence(_)
        | Error::NotPositiveDefinite
        | Error::DualExtraction(_)
        | Error::Inconclusive { .. } => 3,
        Error::Verification(_)
        | Error::DecompositionResidual(_)
        | Error::DegenerateTask { .. }
        | Error::PairCompatible { .. } => 4,
        _ => 2,
    }
}

struct Run {
    report: RunReport,
    seed: u64,
    output: Option<PathBuf>,
    result: Option<String>,
}

impl Run {
    fn load<T: JsonFormat>(&mut self, path: &Path) -> witnesskit::Result<T> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        self.report.input(&path.display().to_string(), text.as_bytes());
        T::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Parse(format!("{}: {j}", path.display())),
            other => Error::Parse(format!("{}: {other}", path.display())),
        })
    }

    fn load_channel(&mut self, path: &Path) -> witnesskit::Result<Channel> {
        let c: Channel = self.load(path)?;
        let rep = c.is_channel(CHANNEL_TOL)?;
        if !rep.valid {
            return Err(Error::Parse(format!(
                "{}: not a channel (PSD violation {:.2e}, unitality residual {:.2e})",
                path.display(),
                rep.psd_violation,
                rep.unitality_residual
            )));
        }
        Ok(c)
    }

    fn emit(&mut self, json: String) -> witnesskit::Result<()> {
        match &self.output {
            Some(p) => {
                write_file(p, &json)?;
                self.report.value("output", p.display().to_string());
            }
            None => self.result = Some(json),
        }
        Ok(())
    }
}

fn write_file(path: &Path, json: &str) -> witnesskit::Result<()> {
    std::fs::write(path, format!("{json}\n")).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Compatible => "COMPATIBLE",
        Decision::Incompatible => "INCOMPATIBLE",
        Decision::Inconclusive => "INCONCLUSIVE",
    }
}

fn check(run: &mut Run, first: &Path, second: &Path, tol: f64, emit_witness: Option<&Path>, emit_joint: Option<&Path>) -> witnesskit::Result<()> {
    let c1 = run.load_channel(first)?;
    let c2 = run.load_channel(second)?;
    let v = check_compatibility_with(&c1, &c2, tol)?;
    run.report.solver("compatibility", v.solver);
    run.report.value("verdict", format!("{}, e*={}", decision_name(v.decision), fmt_num(v.slack)));
    run.report.num("tolerance", tol);
    if let (Some(p), Some(joint)) = (emit_joint, &v.joint) {
        write_file(p, &joint.to_json())?;
        run.report.value("joint channel", p.display().to_string());
    }
    if let Some(p) = emit_witness {
        if v.decision == Decision::Incompatible {
            let opts = SeparationOptions { seed: run.seed, ..SeparationOptions::default() };
            let w = witness_from_incompatible_pair_with(&c1, &c2, &opts)?;
            run.report.num("witness at pair", w.evaluate(&c1, &c2)?);
            write_file(p, &w.to_json())?;
            run.report.value("witness", p.display().to_string());
        } else {
            run.report.value("witness", "not written: pair not incompatible");
        }
    }
    Ok(())
}

fn scan_gamma(run: &mut Run, d: usize, lo: f64, hi: f64, steps: usize) -> witnesskit::Result<()> {
    let (probes, estimate) = bisect_gamma(d, lo, hi, steps)?;
    for (k, p) in probes.iter().enumerate() {
        run.report.value(
            format!("probe {k:>2}"),
            format!("gamma={:.9} e*={} {}", p.gamma, fmt_num(p.slack), decision_name(p.decision)),
        );
    }
    let threshold = gamma_threshold(d);
    run.report.value("boundary estimate", format!("{estimate:.9}"));
    run.report.value("gamma(d)", format!("{threshold:.9}"));
    run.report.num("|estimate - gamma(d)|", (estimate - threshold).abs());
    Ok(())
}

fn witness_op(run: &mut Run, op: &WitnessOp) -> witnesskit::Result<()> {
    match op {
        WitnessOp::Eval { witness, first, second } => {
            let w: WitnessForm = run.load(witness)?;
            let c1 = run.load_channel(first)?;
            let c2 = run.load_channel(second)?;
            run.report.num("value", w.evaluate(&c1, &c2)?);
            run.report.value("detects", w.detects(&c1, &c2)?.to_string());
        }
        WitnessOp::Tighten { witness } => {
            let w: WitnessForm = run.load(witness)?;
            let t = tighten(&w)?;
            run.report.num("delta0 before", w.delta0());
            run.report.num("delta0 after", t.delta0());
            let check = max_over_compatible(&t)?;
            run.report.solver("compatible minimum", check.solver);
            run.report.check("tight", check.min.abs() <= 1e-6, format!("minimum over compatible pairs {}", fmt_num(check.min)));
            run.emit(t.to_json())?;
        }
        WitnessOp::ToTask { witness, m1, m2 } => {
            let w: WitnessForm = run.load(witness)?;
            let m1: Measurement = match m1 {
                Some(p) => run.load(p)?,
                None => ic_povm(w.out1())?,
            };
            let m2: Measurement = match m2 {
                Some(p) => run.load(p)?,
                None => ic_povm(w.out2())?,
            };
            let t = task_from_witness(&w, &m1, &m2)?;
            run.report.num("alpha", t.alpha);
            run.report.num("delta", t.delta);
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let c1 = random_channel(&mut rng, w.input(), w.out1())?;
                let c2 = random_channel(&mut rng, w.input(), w.out2())?;
                let rhs = t.alpha * (t.delta - p_prior_given(&c1, &c2, &t.task)?);
                worst = worst.max((w.evaluate(&c1, &c2)? - rhs).abs());
            }
            run.report.check("identity", worst <= 1e-8, format!("max |W - alpha(delta - P)| on 20 sampled pairs = {worst:.2e}"));
            let (post, prior) = (p_post(&t.task)?, p_prior(&t.task)?);
            run.report.num("p_post", post);
            run.report.num("p_prior", prior);
            run.report.check("bounds", post <= t.delta + 1e-7 && t.delta < prior, "p_post <= delta < p_prior");
            run.emit(t.task.to_json())?;
        }
        WitnessOp::FromTask { task } => {
            let t: DiscriminationTask = run.load(task)?;
            let w = witness_from_task(&t)?;
            let opt = p_post_optimum(&t)?;
            run.report.solver("p_post", opt.solver);
            run.report.num("p_post", opt.value);
            run.report.num("p_prior", p_prior(&t)?);
            let v = w.evaluate(&opt.margins.0, &opt.margins.1)?;
            run.report.check("tight", v.abs() <= 1e-6, format!("witness at the p_post optimum = {}", fmt_num(v)));
            run.emit(w.to_json())?;
        }
        WitnessOp::FromPair { first, second } => {
            let c1 = run.load_channel(first)?;
            let c2 = run.load_channel(second)?;
            let opts = SeparationOptions { seed: run.seed, ..SeparationOptions::default() };
            let w = witness_from_incompatible_pair_with(&c1, &c2, &opts)?;
            run.report.num("value at pair", w.evaluate(&c1, &c2)?);
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            let mut worst = f64::INFINITY;
            for _ in 0..50 {
                let (a, b) = random_compatible_pair(&mut rng, w.input(), w.out1(), w.out2())?;
                worst = worst.min(w.evaluate(&a, &b)?);
            }
            run.report.check("nonnegative", worst >= -1e-6, format!("minimum on 50 sampled compatible pairs = {}", fmt_num(worst)));
            run.emit(w.to_json())?;
        }
        WitnessOp::Lift { witness, measurement, slot } => {
            let w: WitnessForm = run.load(witness)?;
            let p: Measurement = run.load(measurement)?;
            let slot = if *slot == 1 { Factor::First } else { Factor::Second };
            let lifted = lift_witness(&w, &p, slot)?;
            run.report.num("delta0", lifted.delta0());
            run.emit(lifted.to_json())?;
        }
    }
    Ok(())
}

fn export(run: &mut Run, object: CatalogObject, d: usize, gamma: Option<f64>, eps: f64) -> witnesskit::Result<()> {
    let g = gamma.unwrap_or_else(|| gamma_threshold(d));
    let mub = MubPair::new(d)?;
    let json = match object {
        CatalogObject::XiMm => xi_mm(d)?.to_json(),
        CatalogObject::XiMc => xi_mc(d, &mub.e)?.to_json(),
        CatalogObject::XiCc => xi_cc(d, &mub.e, &mub.f)?.to_json(),
        CatalogObject::XiCcClone => xi_cc_clone(d, None)?.to_json(),
        CatalogObject::MubM => noisy_mub_measurements(d, g)?.0.to_json(),
        CatalogObject::MubN => noisy_mub_measurements(d, g)?.1.to_json(),
        CatalogObject::MubMChannel => from_measurement(&noisy_mub_measurements(d, g)?.0).to_json(),
        CatalogObject::MubNChannel => from_measurement(&noisy_mub_measurements(d, g)?.1).to_json(),
        CatalogObject::MeasurePrepareN => measure_prepare_basis(&noisy_mub_measurements(d, g)?.1, &mub.e)?.to_json(),
        CatalogObject::CloningMargin => cloning_margins(d)?.0.to_json(),
        CatalogObject::PerturbedCloningMargin => perturbed_cloning_margins(d, eps)?.0.to_json(),
        CatalogObject::Identity => identity_channel(&Algebra::full(d)).to_json(),
        CatalogObject::Depolarizing => depolarizing(d, gamma.unwrap_or(0.5)).to_json(),
        CatalogObject::Broadcast => broadcast_abelian(d).to_json(),
        CatalogObject::CloningOperator => {
            let (e, spectrum) = cloning_test_operator(d)?;
            let doc = serde_json::json!({ "matrix": matrix_to_doc(&e), "spectrum": spectrum });
            serde_json::to_string_pretty(&doc)?
        }
    };
    run.report.value("d", d.to_string());
    run.emit(json)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WITNESSKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    let started = Instant::now();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build_global() {
        log::warn!("thread pool: {e}");
    }
    let echo = std::iter::once("witnesskit".to_string()).chain(std::env::args().skip(1)).collect::<Vec<_>>().join(" ");
    let mut run = Run { report: RunReport::new(echo, cli.seed), seed: cli.seed, output: cli.output.clone(), result: None };
    let outcome = match &cli.command {
        Command::Check { first, second, emit_witness, emit_joint } => check(
            &mut run,
            first,
            second,
            cli.tol.unwrap_or(DECISION_TOL),
            emit_witness.as_deref(),
            emit_joint.as_deref(),
        ),
        Command::ScanGamma { d, lo, hi, steps } => scan_gamma(&mut run, *d as usize, *lo, *hi, *steps),
        Command::Witness { op } => witness_op(&mut run, op),
        Command::Reproduce { section } => {
            if section == "6" {
                reproduce::mub_section(&mut run.report, cli.seed)
            } else {
                reproduce::cloning_section(&mut run.report, cli.seed)
            }
        }
        Command::Export { object, d, gamma, eps } => export(&mut run, *object, *d, *gamma, *eps),
    };
    let code = match outcome {
        Ok(()) => {
            print!("{}", run.report.render());
            if let Some(json) = &run.result {
                println!("\n{json}");
            }
            if run.report.passed() {
                0
            } else {
                4
            }
        }
        Err(e) => {
            print!("{}", run.report.render());
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    eprintln!("wall time {:.3}s", started.elapsed().as_secs_f64());
    ExitCode::from(code)
}
