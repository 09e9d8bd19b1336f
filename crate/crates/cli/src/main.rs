//! `carnot`: group descriptions, kernel tables, spectra, path simulation and verification checks.

mod io;
mod manifest;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use carnot::kernel::{heat_hat, invariant_hat, invert_to_grid, parse_axes, perturbed_hat, KernelSlice};
use carnot::mc::{estimate_charfn, simulate_levy_on_g, simulate_levy_ou, PathConfig};
use carnot::semigroup::{eigen_decomposition, polynomial_spectrum, CoeigenTest, Pair};
use carnot::spectral::{spectrum_of_generator, SpectrumDescription};
use carnot::{frame_at, CarnotError, CarnotGroup, GroupElement, LevyExponent};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde_json::{json, Value};

use crate::io::{complex_json, Point};
use crate::manifest::RunManifest;
use crate::verify::{CheckResult, Ctx, Profile};

const BUNDLED_H1: &str = include_str!("../assets/h1.json");

#[derive(Parser, Debug)]
#[command(name = "carnot", version, about = "Heat and Lévy–OU analysis on step-two Carnot groups")]
struct Cli {
    /// Group specification (JSON); the Heisenberg group H¹ when absent.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Lévy exponent specification (JSON); ψ = 0 when absent.
    #[arg(long, global = true)]
    psi: Option<PathBuf>,
    /// JSON-lines file that verification runs append their manifest to.
    #[arg(long, global = true, default_value = "carnot-manifest.jsonl")]
    manifest: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group invariants.
    #[command(subcommand)]
    Group(GroupCmd),
    /// Evaluate the Lévy exponent and its OU deformations.
    #[command(subcommand)]
    Psi(PsiCmd),
    /// Spectrum of the perturbed sub-Laplacian and of the OU generator on polynomials.
    #[command(subcommand)]
    Spectrum(SpectrumCmd),
    /// Kernel Fourier slices and real-space density grids.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Terminal samples of Lévy and Lévy–OU paths.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Monte Carlo estimates from sample files.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Numerical checks; appends a run manifest and exits 1 on failure.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Subcommand, Debug)]
enum GroupCmd {
    /// n, m, d, k, generic rank and sample symplectic spectra as JSON.
    Describe {
        /// Extra λ at which to report η(λ); repeatable.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Vec<Point>,
    },
}

#[derive(Args, Debug)]
struct LambdaArgs {
    /// λ ∈ ℝ^m as comma-separated coordinates; repeatable.
    #[arg(long, required = true, allow_hyphen_values = true)]
    lambda: Vec<Point>,
}

#[derive(Subcommand, Debug)]
enum PsiCmd {
    /// ψ(λ)
    Eval(LambdaArgs),
    /// ψ_t(λ) = ∫_0^t ψ(e^{2s}λ) ds
    Psit {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// ψ_{−∞}(λ) = ∫_0^∞ ψ(e^{−2s}λ) ds
    Limit(LambdaArgs),
}

#[derive(Subcommand, Debug)]
enum SpectrumCmd {
    /// Spectrum of Δ_H + A^ψ together with sampled points ψ(λ) − 𝔫(β,λ,ν).
    Delta {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
        #[arg(long, default_value_t = 4)]
        max_beta: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Polynomial spectrum of the Lévy–OU generator up to a graded degree.
    Ou {
        #[arg(long, default_value_t = 3)]
        degree: u32,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelKind {
    /// q_t, or q^ψ_t when ψ is given
    Heat,
    /// invariant density p_ψ
    Invariant,
    /// Lévy–OU transition density from the identity
    Ou,
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// Kernel value in frame coordinates (z, λ, ν).
    Hat {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: Point,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Point,
        #[arg(long, allow_hyphen_values = true)]
        nu: Option<Point>,
        #[arg(long)]
        invariant: bool,
    },
    /// Real-space density on a tensor grid, written as CSV.
    Invert {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Axes as name:min:max:count, e.g. "h:-3:3:61,v:-4:4:81".
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write a gnuplot-ready .dat next to the CSV.
        #[arg(long)]
        gnuplot: bool,
        #[arg(long, conflicts_with = "ou")]
        invariant: bool,
        #[arg(long)]
        ou: bool,
        /// Vertical derivative order β of the density.
        #[arg(long)]
        derivative: Option<u32>,
    },
}

#[derive(Args, Debug)]
struct PathArgs {
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Time steps per unit time (power of two).
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    #[arg(long)]
    antithetic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Lévy process on G started at the identity.
    Levy(PathArgs),
    /// Lévy–OU process on G.
    Ou {
        #[command(flatten)]
        path: PathArgs,
        /// Starting point (h…, v…); the identity when absent.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<Point>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Reference {
    /// perturbed heat kernel at --t
    Levy,
    /// invariant law
    Invariant,
}

#[derive(Subcommand, Debug)]
enum EstimateCmd {
    /// Empirical E e^{i⟨λ, v⟩} with standard errors from a samples CSV.
    Charfn {
        #[arg(long)]
        samples: PathBuf,
        #[command(flatten)]
        lambda: LambdaArgs,
        /// Treat consecutive rows as antithetic pairs.
        #[arg(long)]
        paired: bool,
        /// Compare against an exact characteristic function.
        #[arg(long, value_enum)]
        against: Option<Reference>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Weyl isometry at fixed λ and global Plancherel on a separable test function.
    Plancherel {
        #[arg(long, default_value = "gaussian")]
        test: String,
        #[arg(long = "N", default_value_t = 32)]
        n: usize,
    },
    /// Intertwining residuals for one pair over its test classes.
    Intertwine {
        /// pi | lambda | gamma | tbk | mbeta | lp
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
    },
    /// Weak-form co-eigenfunction relation.
    Coeigen {
        #[arg(long, default_value_t = 1)]
        beta: u32,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// linear | bump | sine
        #[arg(long, default_value = "linear")]
        test: String,
    },
    /// Eigenvalue ladder and isospectrality on polynomials.
    Eigen {
        #[arg(long, default_value_t = 4)]
        degree: u32,
    },
    /// ∫ q^ψ_t dv against the Euclidean heat kernel.
    Marginal {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Semigroup laws on polynomials and on kernels.
    Semigroup {
        #[arg(long, value_enum, default_value_t = Profile::Quick)]
        profile: Profile,
    },
    /// Every check in one run.
    All {
        #[arg(long, value_enum, default_value_t = Profile::Quick)]
        profile: Profile,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for CSV artifacts.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    /// Bad arguments or specifications.
    Usage(String),
    /// Checks ran and some failed.
    Failed(Vec<String>),
    Runtime(String),
}

impl From<CarnotError> for CliError {
    fn from(e: CarnotError) -> Self {
        match e {
            CarnotError::Argument(_) | CarnotError::Unsupported(_) | CarnotError::Degenerate { .. } => {
                CliError::Usage(e.to_string())
            }
            CarnotError::Accuracy(_) | CarnotError::Internal(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(names)) => {
            eprintln!("failed checks: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("CARNOT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("CARNOT_THREADS must be a positive integer, got '{raw}'"))?;
    if n == 0 {
        return Err("CARNOT_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load_group(path: Option<&PathBuf>) -> CliResult<CarnotGroup> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?,
        None => BUNDLED_H1.to_string(),
    };
    let g = CarnotGroup::from_json(&text).map_err(|e| CliError::Usage(format!("invalid group specification: {e}")))?;
    Ok(g)
}

fn load_psi(path: Option<&PathBuf>, m: usize) -> CliResult<Option<LevyExponent>> {
    let Some(p) = path else { return Ok(None) };
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
    let psi = LevyExponent::from_json(&text, m).map_err(|e| CliError::Usage(format!("invalid ψ specification: {e}")))?;
    Ok(Some(psi))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn check_len(what: &str, p: &[f64], want: usize) -> CliResult<()> {
    if p.len() != want {
        return Err(CliError::Usage(format!("{what} has {} coordinates, expected {want}", p.len())));
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    let g = load_group(cli.spec.as_ref())?;
    let psi = load_psi(cli.psi.as_ref(), g.m())?;
    match &cli.command {
        Command::Group(GroupCmd::Describe { lambda }) => group_describe(&g, lambda),
        Command::Psi(cmd) => psi_command(&g, psi.as_ref(), cmd),
        Command::Spectrum(SpectrumCmd::Delta { samples, radius, max_beta, seed }) => {
            let desc = match spectrum_of_generator(&g, psi.as_ref()) {
                SpectrumDescription::Interval { sup } => json!({"kind": "interval", "sup": sup}),
                SpectrumDescription::Parametric { .. } => json!({"kind": "parametric"}),
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let pts = SpectrumDescription::sample(&g, psi.as_ref(), *samples, *radius, *max_beta, &mut rng)?;
            print_json(&json!({
                "spectrum": desc,
                "radius": radius,
                "samples": pts.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
            }));
            Ok(())
        }
        Command::Spectrum(SpectrumCmd::Ou { degree }) => spectrum_ou(&g, psi.as_ref(), *degree),
        Command::Kernel(cmd) => kernel_command(&g, psi.as_ref(), cmd),
        Command::Simulate(cmd) => simulate(&g, psi.as_ref(), cmd),
        Command::Estimate(EstimateCmd::Charfn { samples, lambda, paired, against, t }) => {
            let table = io::read_samples(samples)?;
            let v = table.vertical(g.m()).map_err(CliError::Usage)?;
            for l in &lambda.lambda {
                check_len("λ", &l.0, g.m())?;
            }
            let panel: Vec<Vec<f64>> = lambda.lambda.iter().map(|p| p.0.clone()).collect();
            let est = estimate_charfn(&v, &panel, *paired)?;
            let mut out = json!({
                "paths": est.paths,
                "lambda": est.lambda,
                "estimate": est.estimate.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
                "stderr": est.stderr,
            });
            if let Some(r) = against {
                let zero = LevyExponent::zero(g.m());
                let slice = match r {
                    Reference::Levy => match &psi {
                        Some(p) => KernelSlice::perturbed(&g, p, *t)?,
                        None => KernelSlice::heat(&g, *t)?,
                    },
                    Reference::Invariant => KernelSlice::invariant(&g, psi.as_ref().unwrap_or(&zero))?,
                };
                let exact = panel.iter().map(|l| slice.vertical_charfn(l)).collect::<carnot::Result<Vec<_>>>()?;
                out["exact"] = json!(exact.iter().map(|z| complex_json(*z)).collect::<Vec<_>>());
                out["max_z"] = json!(est.max_z(&exact));
            }
            print_json(&out);
            Ok(())
        }
        Command::Verify(cmd) => verify_command(cli, g, psi, cmd),
    }
}

fn group_describe(g: &CarnotGroup, extra: &[Point]) -> CliResult<()> {
    let m = g.m();
    let mut lambdas: Vec<Vec<f64>> = (0..m).map(|l| (0..m).map(|i| if i == l { 1.0 } else { 0.0 }).collect()).collect();
    if m > 1 {
        lambdas.push(vec![1.0; m]);
    }
    for p in extra {
        check_len("λ", &p.0, m)?;
        lambdas.push(p.0.clone());
    }
    let mut examples = Vec::new();
    for l in &lambdas {
        let fr = frame_at(g, l)?;
        examples.push(json!({
            "lambda": l,
            "eta": fr.eta,
            "pfaffian": fr.pf,
            "generic": fr.is_generic(),
        }));
    }
    print_json(&json!({
        "label": g.label(),
        "n": g.n(),
        "m": m,
        "d": g.d(),
        "k": g.k(),
        "generic_rank": g.generic_rank(),
        "homogeneous_dimension": g.homogeneous_dim(),
        "eta_examples": examples,
    }));
    Ok(())
}

fn psi_command(g: &CarnotGroup, psi: Option<&LevyExponent>, cmd: &PsiCmd) -> CliResult<()> {
    let zero = LevyExponent::zero(g.m());
    let psi = psi.unwrap_or(&zero);
    let (name, points, t) = match cmd {
        PsiCmd::Eval(l) => ("psi", &l.lambda, None),
        PsiCmd::Psit { lambda, t } => ("psi_t", &lambda.lambda, Some(*t)),
        PsiCmd::Limit(l) => ("psi_minus_infinity", &l.lambda, None),
    };
    let mut values = Vec::new();
    for p in points {
        check_len("λ", &p.0, g.m())?;
        let z = match cmd {
            PsiCmd::Eval(_) => psi.eval(&p.0),
            PsiCmd::Psit { t, .. } => psi.psi_t(*t, &p.0)?,
            PsiCmd::Limit(_) => psi.psi_minus_infinity(&p.0)?,
        };
        values.push(json!({"lambda": p.0, "value": complex_json(z)}));
    }
    let mut out = json!({"function": name, "values": values});
    if let Some(t) = t {
        out["t"] = json!(t);
    }
    print_json(&out);
    Ok(())
}

fn spectrum_ou(g: &CarnotGroup, psi: Option<&LevyExponent>, degree: u32) -> CliResult<()> {
    let spec = polynomial_spectrum(g, psi, degree)?;
    let spaces = eigen_decomposition(g, psi, degree, 1.0)?;
    let eigen: Vec<Value> = spec
        .iter()
        .zip(&spaces)
        .map(|((k, alg, geo), space)| {
            json!({
                "k": k,
                "generator_eigenvalue": -(*k as i64),
                "semigroup_eigenvalue_t1": space.eigenvalue,
                "algebraic_multiplicity": alg,
                "geometric_multiplicity": geo,
                "eigenfunctions": space.basis.iter().map(io::poly_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    print_json(&json!({
        "degree": degree,
        "variables": io::variable_names(g.n(), g.m()),
        "eigenvalues": eigen,
    }));
    Ok(())
}

fn kernel_command(g: &CarnotGroup, psi: Option<&LevyExponent>, cmd: &KernelCmd) -> CliResult<()> {
    let zero = LevyExponent::zero(g.m());
    match cmd {
        KernelCmd::Hat { t, z, lambda, nu, invariant } => {
            let nu = nu.as_ref().map(|p| p.0.clone()).unwrap_or_else(|| vec![0.0; g.k()]);
            let value = if *invariant {
                invariant_hat(g, psi.unwrap_or(&zero), &z.0, &lambda.0, &nu)?
            } else if let Some(p) = psi {
                perturbed_hat(g, p, *t, &z.0, &lambda.0, &nu)?
            } else {
                heat_hat(g, *t, &z.0, &lambda.0, &nu)?
            };
            let mut out = json!({
                "kernel": if *invariant { "invariant" } else if psi.is_some() { "perturbed" } else { "heat" },
                "z": z.0,
                "lambda": lambda.0,
                "nu": nu,
                "value": complex_json(value),
            });
            if !*invariant {
                out["t"] = json!(t);
            }
            print_json(&out);
            Ok(())
        }
        KernelCmd::Invert { t, grid, out, gnuplot, invariant, ou, derivative } => {
            let axes = parse_axes(grid, g.n(), g.m())?;
            let kind = if *invariant {
                KernelKind::Invariant
            } else if *ou {
                KernelKind::Ou
            } else {
                KernelKind::Heat
            };
            let mut slice = match (kind, psi) {
                (KernelKind::Invariant, p) => KernelSlice::invariant(g, p.unwrap_or(&zero))?,
                (KernelKind::Ou, p) => KernelSlice::ou_transition(g, p, *t)?,
                (KernelKind::Heat, Some(p)) => KernelSlice::perturbed(g, p, *t)?,
                (KernelKind::Heat, None) => KernelSlice::heat(g, *t)?,
            };
            if let Some(b) = derivative {
                slice = slice.with_derivative(&vec![*b; g.m()])?;
            }
            let dens = invert_to_grid(&slice, &axes)?;
            io::write_grid(&dens, out, *gnuplot)?;
            let mut info = json!({"out": out, "points": dens.len(), "shape": dens.shape()});
            if derivative.is_none() {
                info["mass_on_grid"] = json!(dens.mass());
            }
            print_json(&info);
            Ok(())
        }
    }
}

fn simulate(g: &CarnotGroup, psi: Option<&LevyExponent>, cmd: &SimulateCmd) -> CliResult<()> {
    let args = match cmd {
        SimulateCmd::Levy(a) => a,
        SimulateCmd::Ou { path, .. } => path,
    };
    let cfg = PathConfig { t: args.t, steps_per_unit: args.steps, paths: args.paths, seed: args.seed, antithetic: args.antithetic };
    let samples = match cmd {
        SimulateCmd::Levy(_) => simulate_levy_on_g(g, psi, &cfg)?,
        SimulateCmd::Ou { x0, .. } => {
            let start = match x0 {
                Some(p) => {
                    check_len("x0", &p.0, g.n() + g.m())?;
                    GroupElement::new(p.0[..g.n()].to_vec(), p.0[g.n()..].to_vec())
                }
                None => GroupElement::identity(g.n(), g.m()),
            };
            simulate_levy_ou(g, psi, &cfg, &start)?
        }
    };
    io::write_samples(&samples.points, g.n(), g.m(), &args.out)?;
    print_json(&json!({"out": args.out, "paths": samples.points.len(), "config": cfg}));
    Ok(())
}

fn verify_command(cli: &Cli, g: CarnotGroup, psi: Option<LevyExponent>, cmd: &VerifyCmd) -> CliResult<()> {
    let start = Instant::now();
    let seed = match cmd {
        VerifyCmd::All { seed, .. } => *seed,
        _ => 7,
    };
    let ctx = Ctx { g, psi, seed };
    let checks: Vec<CheckResult> = match cmd {
        VerifyCmd::Plancherel { test, n } => {
            if test != "gaussian" {
                return Err(CliError::Usage(format!("unknown Plancherel test '{test}' (available: gaussian)")));
            }
            vec![verify::plancherel(&ctx, *n)]
        }
        VerifyCmd::Intertwine { pair, t } => vec![verify::intertwine(&ctx, Pair::parse(pair)?, *t, Profile::Full)],
        VerifyCmd::Coeigen { beta, t, test } => {
            let test = match test.as_str() {
                "linear" => CoeigenTest::Linear,
                "bump" => CoeigenTest::Bump { center: 0.5, radius: 1.0 },
                "sine" => CoeigenTest::Sine { freq: 0.7 },
                other => return Err(CliError::Usage(format!("unknown co-eigen test '{other}' (linear, bump, sine)"))),
            };
            vec![verify::coeigen(&ctx, *beta, &[*t], &[test])]
        }
        VerifyCmd::Eigen { degree } => vec![verify::eigen(&ctx, *degree)],
        VerifyCmd::Marginal { t } => vec![verify::marginal(&ctx, *t, None)],
        VerifyCmd::Semigroup { profile } => verify::semigroup(&ctx, *profile),
        VerifyCmd::All { profile, artifacts, .. } => {
            if let Some(dir) = artifacts {
                std::fs::create_dir_all(dir)?;
            }
            verify::all(&ctx, *profile, artifacts.as_deref())
        }
    };
    let failed: Vec<String> = checks.iter().filter(|c| c.failed()).map(|c| c.name.clone()).collect();
    let pass = failed.is_empty();
    print_json(&json!({"pass": pass, "checks": checks}));
    let exit_code = if pass { 0 } else { 1 };
    let manifest = RunManifest::new(&ctx, checks, start.elapsed(), exit_code);
    manifest.append(&cli.manifest)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}
