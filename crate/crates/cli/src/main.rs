use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use degapprox::blocks::{BlockGenerator, BlockSequence};
use degapprox::degenerate::ScalarFn;
use degapprox::diag::{self, ErrorMode, SeriesKernel};
use degapprox::error::{Error, Result};
use degapprox::experiments::{self, ExperimentConfig};
use degapprox::franklin::{self, SeqMode, SequenceSampler};
use degapprox::grid::{Grid, GridFn};
use degapprox::kernel::{sample_grid, sample_native, GridKernel, KernelSpec};
use degapprox::lacunar::LacunarSpec;
use degapprox::mercer::{nystrom_decompose, operator_svd, svd_truncation, DEFAULT_DROP_TOL};
use degapprox::paths::{self, kl_simulate};
use degapprox::trig::{self, ApproxTarget, BestErrorMode, Spectrum2d};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "DEGAPPROX_OUT";

#[derive(Parser)]
#[command(name = "degapprox", version, about = "Degenerate kernel approximation and path-continuity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Directory for CSV/JSON artifacts and the manifest (default: $DEGAPPROX_OUT; none prints only).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Nyström eigenvalues of a kernel.
    Mercer {
        #[arg(long, default_value = "brownian_bridge")]
        kernel: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        /// Write eigenfunction values as well.
        #[arg(long)]
        eigenfunctions: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rank-(n1, n2) SVD approximation against the best trigonometric error.
    Degapprox {
        #[arg(long, default_value = "periodized_bridge")]
        kernel: String,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 4)]
        n1: usize,
        #[arg(long)]
        n2: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// de la Vallee-Poussin sum of a closed-form function.
    Vpsum {
        /// Function expression, e.g. `abs_sin:1` or `1 + 0.5*cos:3`.
        #[arg(long)]
        function: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// τ profile of the lacunar θ process over dyadic blocks.
    Tau {
        #[arg(long)]
        lacunar_theta: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        n_blocks: usize,
        #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Continuity verdicts for a lacunar θ process or a tabulated kernel.
    Diagnose {
        #[arg(long, conflicts_with = "kernel", required_unless_present = "kernel")]
        lacunar_theta: Option<f64>,
        #[arg(long)]
        kernel: Option<String>,
        /// dyadic, super_dyadic or squared.
        #[arg(long, default_value = "super_dyadic")]
        blocks: String,
        /// Number of series terms.
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// Frequency ratio of the lacunar family.
        #[arg(long, default_value_t = 5)]
        ratio: u64,
        /// Explicit terms of the lacunar family.
        #[arg(long, default_value_t = 256)]
        terms: usize,
        /// Grid for the Fernique integral (and for `--kernel`).
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Spectrum, tails and criteria of a lacunar series.
    Lacunar {
        #[arg(long, conflicts_with_all = ["coeffs", "freqs"])]
        theta: Option<f64>,
        #[arg(long, default_value_t = 5)]
        ratio: u64,
        #[arg(long, default_value_t = 20)]
        terms: usize,
        #[arg(long, value_delimiter = ',', requires = "freqs")]
        coeffs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', requires = "coeffs")]
        freqs: Option<Vec<u64>>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Franklin basis and β profile of the Brownian bridge on [0, 2π].
    Franklin {
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
        seed: u64,
        /// Write the basis functions as well.
        #[arg(long)]
        basis: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// κ, γ and monotone-sup functionals of random sequences.
    Sequences {
        /// Sampler name, or `all`.
        #[arg(long, default_value = "all")]
        sampler: String,
        #[arg(long, default_value_t = 6)]
        levels: u32,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        n_max: usize,
        #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Level-set measure of random trigonometric polynomials.
    Lemma61 {
        #[arg(long, default_value_t = 1000)]
        sweep: usize,
        #[arg(long, default_value_t = 32)]
        max_degree: usize,
        #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Normalized Brownian motion near zero.
    Lil {
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Decreasing window starts in (0, e^-4].
        #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-5,1e-7")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Lacunar kernel attaining the approximation bound.
    Sharpness {
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Named experiments.
    List,
    /// Runs an experiment from a TOML config file or by name.
    Run {
        /// Config file path or experiment name.
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        n_blocks: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        max_degree: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// What a subcommand produced: text for stdout plus files for the output directory.
struct Report {
    label: &'static str,
    params: Value,
    stdout: String,
    files: Vec<(String, String)>,
}

fn out_dir(flag: &Option<PathBuf>, fallback: Option<&PathBuf>) -> Option<PathBuf> {
    flag.clone()
        .or_else(|| fallback.cloned())
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn tabulate(kernel: &str, n: usize) -> Result<GridKernel> {
    sample_native(&kernel.parse::<KernelSpec>()?, n)
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn mercer(kernel: &str, grid: usize, with_functions: bool) -> Result<Report> {
    let md = nystrom_decompose(&tabulate(kernel, grid)?, DEFAULT_DROP_TOL)?;
    let mut csv = String::from("k,lambda\n");
    for (k, l) in md.eigenvalues.iter().enumerate() {
        csv.push_str(&format!("{},{l:e}\n", k + 1));
    }
    let summary = json!({
        "kernel": kernel,
        "grid": grid,
        "n_kept": md.n_kept,
        "trace_residual": md.trace_residual,
        "negative_mass": md.negative_mass,
        "ties": md.ties,
    });
    let mut files = vec![("eigenvalues.csv".to_string(), csv.clone()), ("mercer.json".into(), pretty(&summary))];
    if with_functions {
        files.push(("eigenfunctions.csv".into(), md.to_csv()));
    }
    Ok(Report { label: "mercer", params: json!({ "kernel": kernel, "grid": grid }), stdout: csv, files })
}

fn degapprox_cmd(kernel: &str, grid: usize, n1: usize, n2: usize) -> Result<Report> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Config("ranks must be at least 1".into()));
    }
    let gk = tabulate(kernel, grid)?;
    let svd = operator_svd(&gk)?;
    let (_, err) = svd_truncation(&gk, &svd, n1, n2);
    let trig_err = if gk.grid.is_trigonometric() {
        let spec = Spectrum2d::new(&gk)?;
        // Largest trigonometric degrees whose spaces fit in ranks (n1, n2).
        let half = ((n1 - 1) / 2, (n2 - 1) / 2);
        Some(json!({
            "degree": half,
            "l2": if half.0.max(half.1) <= spec.max_degree() { Some(spec.l2_tail(half.0, half.1)) } else { None },
        }))
    } else {
        None
    };
    let report = json!({ "kernel": kernel, "grid": grid, "svd": err, "best_trigonometric": trig_err });
    let mut csv = String::from("k,sigma\n");
    for (k, s) in svd.singular_values.iter().enumerate() {
        csv.push_str(&format!("{},{s:e}\n", k + 1));
    }
    Ok(Report {
        label: "degapprox",
        params: json!({ "kernel": kernel, "grid": grid, "n1": n1, "n2": n2 }),
        stdout: pretty(&report),
        files: vec![("degapprox.json".into(), pretty(&report)), ("singular_values.csv".into(), csv)],
    })
}

fn vpsum(function: &str, n: usize, grid: usize) -> Result<Report> {
    let f: ScalarFn = function.parse()?;
    let g = Grid::periodic(grid)?;
    let fg: GridFn = f.sample(&g);
    let v = trig::vp_sum(&fg, n)?.sample(&g)?;
    let mut csv = String::from("t,f,vp\n");
    let mut sup: f64 = 0.0;
    for ((t, a), b) in g.points().iter().zip(&fg.values).zip(&v.values) {
        sup = sup.max((a - b).abs());
        csv.push_str(&format!("{t:e},{a:e},{b:e}\n"));
    }
    let p = trig::vp_p(n);
    let report = json!({
        "function": function,
        "n": n,
        "p": p,
        "sup_error": sup,
        "best_l2_error_degree_n": trig::best_error(ApproxTarget::Function(&fg), (n, n), BestErrorMode::L2_1d)?,
    });
    Ok(Report {
        label: "vpsum",
        params: json!({ "function": function, "n": n, "grid": grid }),
        stdout: pretty(&report),
        files: vec![("vpsum.json".into(), pretty(&report)), ("vpsum.csv".into(), csv)],
    })
}

fn tau(theta: f64, samples: usize, n_blocks: usize, seed: u64) -> Result<Report> {
    if !(2..=8).contains(&n_blocks) {
        return Err(Error::Config(format!("--n-blocks must lie in [2, 8], got {n_blocks}")));
    }
    let p = experiments::theta_tau_profile(theta, samples, n_blocks, seed)?;
    let csv = paths::tau_profile_csv(&p);
    Ok(Report {
        label: "tau",
        params: json!({ "theta": theta, "samples": samples, "n_blocks": n_blocks, "seed": seed }),
        stdout: format!("{csv}# verdict {:?}\n", p.verdict),
        files: vec![("tau.csv".into(), csv), ("tau.json".into(), pretty(&p))],
    })
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    theta: Option<f64>,
    kernel: Option<&str>,
    blocks: &str,
    count: usize,
    ratio: u64,
    terms: usize,
    grid: Option<usize>,
) -> Result<Report> {
    let generator: BlockGenerator = blocks.parse()?;
    if generator == BlockGenerator::Explicit {
        return Err(Error::Config("--blocks must be dyadic, super_dyadic or squared".into()));
    }
    let seq = BlockSequence::generate(generator, count + 1)?;
    let params = json!({
        "lacunar_theta": theta, "kernel": kernel, "blocks": blocks, "count": count,
        "ratio": ratio, "terms": terms, "grid": grid,
    });
    let mut summary = serde_json::Map::new();
    let mut details = serde_json::Map::new();
    let fernique_of = |gk: &GridKernel| diag::fernique_integral(gk, None, diag::FERNIQUE_NODES);
    if let Some(theta) = theta {
        let process = LacunarSpec::theta_family(theta, ratio, terms)?;
        let cov = process.covariance();
        let sigma = diag::sigma_e_series(SeriesKernel::Lacunar(&cov), &seq, ErrorMode::SupLacunar, count)?;
        let crit = diag::lacunar_criteria(&process);
        let wat = diag::watanabe_check(&process);
        summary.insert("sigma_e".into(), json!(sigma.verdict));
        summary.insert("absolute_sum".into(), json!(crit.absolute_sum.verdict));
        summary.insert("tail_root".into(), json!(crit.tail_root.verdict));
        summary.insert("watanabe".into(), json!(wat.verdict));
        details.insert("sigma_e".into(), json!(sigma));
        details.insert("lacunar".into(), json!(crit));
        details.insert("watanabe".into(), json!(wat));
        if let Some(n) = grid {
            let fern = fernique_of(&sample_grid(&KernelSpec::Lacunar(cov), &Grid::periodic(n)?)?)?;
            summary.insert("fernique".into(), json!(fern.verdict));
            details.insert("fernique".into(), json!(fern));
        }
    } else {
        let name = kernel.expect("clap requires one of the two");
        let gk = tabulate(name, grid.unwrap_or(512))?;
        let sigma = diag::sigma_e_series(SeriesKernel::Grid(&gk), &seq, ErrorMode::L2_2d, count)?;
        let fern = fernique_of(&gk)?;
        summary.insert("sigma_e".into(), json!(sigma.verdict));
        summary.insert("fernique".into(), json!(fern.verdict));
        details.insert("sigma_e".into(), json!(sigma));
        details.insert("fernique".into(), json!(fern));
    }
    let summary = Value::Object(summary);
    let full = json!({ "verdicts": summary, "reports": Value::Object(details) });
    Ok(Report {
        label: "diagnose",
        params,
        stdout: pretty(&summary),
        files: vec![("verdicts.json".into(), pretty(&summary)), ("diagnose.json".into(), pretty(&full))],
    })
}

fn lacunar(theta: Option<f64>, ratio: u64, terms: usize, coeffs: Option<Vec<f64>>, freqs: Option<Vec<u64>>) -> Result<Report> {
    let spec = match (theta, coeffs, freqs) {
        (Some(t), _, _) => LacunarSpec::theta_family(t, ratio, terms)?,
        (None, Some(c), Some(f)) => LacunarSpec::from_u64(c, f)?,
        _ => LacunarSpec::geometric(4.0, ratio, terms)?,
    };
    let cov = spec.covariance();
    let mut csv = String::from("k,frequency,coefficient,variance,eigenvalue,tail_sum\n");
    for k in 1..=spec.n_terms() {
        let b = spec.coefficient(k);
        csv.push_str(&format!(
            "{k},{},{b:e},{:e},{:e},{:e}\n",
            spec.frequencies()[k - 1],
            b * b,
            PI * b * b,
            cov.tail_sum(k)
        ));
    }
    let crit = diag::lacunar_criteria(&spec);
    let report = json!({
        "n_terms": spec.n_terms(),
        "theta": spec.theta(),
        "constant_ratio": spec.constant_ratio(),
        "kernel_sup": cov.total(),
        "absolute_sum": crit.absolute_sum,
        "tail_root": crit.tail_root,
        "watanabe": diag::watanabe_check(&spec),
    });
    let params = json!({
        "theta": spec.theta(),
        "coefficients": spec.coefficients(),
        "frequencies": spec.frequencies().iter().map(|f| f.to_string()).collect::<Vec<_>>(),
    });
    Ok(Report {
        label: "lacunar",
        params,
        stdout: csv.clone(),
        files: vec![("lacunar.csv".into(), csv), ("lacunar.json".into(), pretty(&report))],
    })
}

fn franklin_cmd(grid: usize, m: usize, levels: u32, samples: usize, seed: u64, with_basis: bool) -> Result<Report> {
    if levels == 0 || (2usize << levels) > m + 1 {
        return Err(Error::Config(format!("--levels {levels} needs --m of at least {}", (2usize << levels) - 1)));
    }
    let g = Grid::periodic(grid)?;
    let basis = franklin::franklin_basis(m, &g)?;
    let gk = GridKernel::from_fn(&g, |t, s| {
        let (u, v) = (t / (2.0 * PI), s / (2.0 * PI));
        u.min(v) - u * v
    })?;
    let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL)?;
    let ens = kl_simulate(&md, md.n_kept, samples, seed)?;
    let blocks: Vec<(usize, usize)> = (1..=levels).map(|j| (1 << j, 2 << j)).collect();
    let betas = franklin::beta_profile(&ens, &basis, &blocks)?;
    let mut csv = String::from("j,n,m,beta,std_error\n");
    for (j, ((lo, hi), b)) in blocks.iter().zip(&betas).enumerate() {
        csv.push_str(&format!("{},{lo},{hi},{:e},{:e}\n", j + 1, b.mean, b.std_error));
    }
    let report = json!({ "gram_deviation": basis.gram_deviation(), "beta": betas });
    let mut files = vec![("beta.csv".to_string(), csv.clone()), ("franklin.json".into(), pretty(&report))];
    if with_basis {
        files.push(("basis.csv".into(), basis.to_csv()));
    }
    Ok(Report {
        label: "franklin",
        params: json!({ "grid": grid, "m": m, "levels": levels, "samples": samples, "seed": seed }),
        stdout: csv,
        files,
    })
}

fn sequences(sampler: &str, levels: u32, samples: usize, n_max: usize, seed: u64) -> Result<Report> {
    let samplers: Vec<SequenceSampler> = if sampler == "all" {
        SequenceSampler::ALL.to_vec()
    } else {
        vec![sampler.parse()?]
    };
    let mut rows = vec![];
    let mut csv = String::from("sampler,kappa_first,kappa_last,kappa_verdict,gamma_last,monotone_sup_verdict\n");
    for s in samplers {
        let kappa = franklin::kappa_profile(s, levels, samples, seed)?;
        let &(lo, hi) = kappa.blocks.last().expect("at least two blocks");
        let gamma = franklin::kappa_gamma(s, lo, hi, samples, SeqMode::Gamma, seed)?;
        let mono = franklin::monotone_sup_criterion(s, n_max, samples, seed, None)?;
        csv.push_str(&format!(
            "{},{:e},{:e},{:?},{:e},{:?}\n",
            s.name(),
            kappa.estimates[0].mean,
            kappa.estimates.last().unwrap().mean,
            kappa.verdict,
            gamma.mean,
            mono.verdict
        ));
        rows.push(json!({ "sampler": s.name(), "description": s.description(), "kappa": kappa, "gamma_last_block": gamma, "monotone_sup": mono }));
    }
    Ok(Report {
        label: "sequences",
        params: json!({ "sampler": sampler, "levels": levels, "samples": samples, "n_max": n_max, "seed": seed }),
        stdout: csv.clone(),
        files: vec![("sequences.csv".into(), csv), ("sequences.json".into(), pretty(&rows))],
    })
}

fn lemma61(count: usize, max_degree: usize, seed: u64) -> Result<Report> {
    let sweep = diag::lemma61_sweep(count, max_degree, seed)?;
    Ok(Report {
        label: "lemma61",
        params: json!({ "sweep": count, "max_degree": max_degree, "seed": seed }),
        stdout: pretty(&sweep),
        files: vec![("lemma61.json".into(), pretty(&sweep))],
    })
}

fn lil(samples: usize, eps: Vec<f64>, seed: u64) -> Result<Report> {
    let r = paths::lil_example(samples, &eps, seed)?;
    let mut csv = String::from("eps,median_sup,frac_sup_le_2_5,median_range,n_points\n");
    for row in &r.rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{}\n",
            row.eps, row.median_sup, row.frac_sup_le_2_5, row.median_range, row.n_points
        ));
    }
    Ok(Report {
        label: "lil",
        params: json!({ "samples": samples, "eps": eps, "seed": seed }),
        stdout: csv.clone(),
        files: vec![("lil.csv".into(), csv), ("lil.json".into(), pretty(&r))],
    })
}

fn emit(report: Report, dir: Option<PathBuf>) -> Result<()> {
    print!("{}", report.stdout);
    if let Some(dir) = dir {
        let hash = experiments::sha256_hex(&serde_json::to_vec(&report.params).expect("json"));
        experiments::write_artifacts(&dir, report.label, &report.params, &hash, None, &report.files)?;
        eprintln!("wrote {} files to {}", report.files.len() + 1, dir.display());
    }
    Ok(())
}

fn run_config(mut cfg: ExperimentConfig, out: &OutArgs) -> Result<()> {
    cfg.validate()?;
    let dir = out_dir(&out.out, cfg.output_dir.as_ref());
    let outcome = experiments::run_experiment(&cfg)?;
    println!("{}", outcome.line());
    if let Some(dir) = dir {
        cfg.output_dir = None;
        experiments::write_outcome(&outcome, &cfg, &dir)?;
        eprintln!("wrote {} files to {}", outcome.files.len() + 1, dir.display());
    }
    Ok(())
}

fn load_config(target: &str) -> Result<ExperimentConfig> {
    let path = Path::new(target);
    if path.is_file() {
        ExperimentConfig::from_file(path).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    } else if experiments::experiment_info(target).is_some() {
        Ok(ExperimentConfig::named(target))
    } else {
        Err(Error::Config(format!("'{target}' is neither a config file nor an experiment name")))
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let env_only = |o: &OutArgs| out_dir(&o.out, None);
    match cmd {
        Command::Mercer { kernel, grid, eigenfunctions, out } => emit(mercer(&kernel, grid, eigenfunctions)?, env_only(&out)),
        Command::Degapprox { kernel, grid, n1, n2, out } => {
            emit(degapprox_cmd(&kernel, grid, n1, n2.unwrap_or(n1))?, env_only(&out))
        }
        Command::Vpsum { function, n, grid, out } => emit(vpsum(&function, n, grid)?, env_only(&out)),
        Command::Tau { lacunar_theta, samples, n_blocks, seed, out } => {
            emit(tau(lacunar_theta, samples, n_blocks, seed)?, env_only(&out))
        }
        Command::Diagnose { lacunar_theta, kernel, blocks, count, ratio, terms, grid, out } => emit(
            diagnose(lacunar_theta, kernel.as_deref(), &blocks, count, ratio, terms, grid)?,
            env_only(&out),
        ),
        Command::Lacunar { theta, ratio, terms, coeffs, freqs, out } => {
            emit(lacunar(theta, ratio, terms, coeffs, freqs)?, env_only(&out))
        }
        Command::Franklin { grid, m, levels, samples, seed, basis, out } => {
            emit(franklin_cmd(grid, m, levels, samples, seed, basis)?, env_only(&out))
        }
        Command::Sequences { sampler, levels, samples, n_max, seed, out } => {
            emit(sequences(&sampler, levels, samples, n_max, seed)?, env_only(&out))
        }
        Command::Lemma61 { sweep, max_degree, seed, out } => emit(lemma61(sweep, max_degree, seed)?, env_only(&out)),
        Command::Lil { samples, eps, seed, out } => emit(lil(samples, eps, seed)?, env_only(&out)),
        Command::Sharpness { grid, out } => {
            let mut cfg = ExperimentConfig::named("sharpness");
            cfg.grid = Some(grid);
            run_config(cfg, &out)
        }
        Command::List => {
            print!("{}", experiments::list_experiments());
            Ok(())
        }
        Command::Run { target, seed, samples, grid, n_blocks, thetas, count, max_degree, out } => {
            let mut cfg = load_config(&target)?;
            cfg.seed = seed.or(cfg.seed);
            cfg.samples = samples.or(cfg.samples);
            cfg.grid = grid.or(cfg.grid);
            cfg.n_blocks = n_blocks.or(cfg.n_blocks);
            cfg.thetas = thetas.or(cfg.thetas);
            cfg.count = count.or(cfg.count);
            cfg.max_degree = max_degree.or(cfg.max_degree);
            run_config(cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() || matches!(e, Error::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
