use clap::{Parser, Subcommand, ValueEnum};
use mixcontract::bayes::DPPrior;
use mixcontract::bayes::dp_small_ball_check;
use mixcontract::experiment::{
    emit_report, fit_rate, run_contraction, ContractionRow, ContractionTable, ExperimentConfig, Transform, CSV_HEADER,
};
use mixcontract::identifiability::{deconvolution_bound_probe, deconvolution_csv, entropy_lemma_check, PairSchedule};
use mixcontract::measures::{random_measure, DiscreteMeasure, ParamSpace};
use mixcontract::mixtures::{check_domination, Divergence, LikelihoodFamily};
use mixcontract::seeds::{derive_seed, rng};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

#[derive(Parser)]
#[command(name = "contract", about = "Posterior contraction experiments for mixing measures")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a contraction experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a rate to an existing contraction CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "log-n")]
        transform: TransformArg,
    },
    /// Run one of the numerical check suites.
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    #[value(name = "log_n", alias = "log-n")]
    LogN,
    #[value(name = "log_log_n", alias = "log-log-n")]
    LogLogN,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::LogN => Transform::LogN,
            TransformArg::LogLogN => Transform::LogLogN,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Domination,
    Entropy,
    Deconv,
    Smallball,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Fit { csv, transform } => fit(csv, (*transform).into()),
        Command::Check { suite } => check(&cli, *suite),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli, config: &Path) -> AnyResult<bool> {
    let mut cfg = ExperimentConfig::parse(&std::fs::read_to_string(config)?)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let csv_path = cli.out_dir.join(&cfg.output);
    let partial_path = csv_path.with_extension("csv.partial");

    // rows are appended to the partial file as cells finish
    let partial = Mutex::new(std::fs::File::create(&partial_path)?);
    writeln!(partial.lock().unwrap(), "{}", CSV_HEADER.join(","))?;
    let on_row = |row: &ContractionRow| {
        let line = ContractionTable { rows: vec![row.clone()] }.to_csv();
        if let Some(body) = line.lines().nth(1) {
            let mut f = partial.lock().unwrap();
            let _ = writeln!(f, "{body}");
            let _ = f.flush();
        }
    };
    let table = run_contraction(&cfg, Some(&on_row))?;
    std::fs::write(&csv_path, table.to_csv())?;
    std::fs::remove_file(&partial_path)?;

    let label = cfg.model.name().to_string();
    let mut fits = Vec::new();
    for t in [Transform::LogN, Transform::LogLogN] {
        match fit_rate(&table, t) {
            Ok(f) => {
                println!("{label} {}: slope {:.6} intercept {:.6} rms {:.6}", t.name(), f.slope, f.intercept, f.residual_rms);
                fits.push((label.clone(), f));
            }
            Err(e) => eprintln!("warning: no {} fit: {e}", t.name()),
        }
    }
    println!("wrote {}", csv_path.display());
    if !fits.is_empty() {
        let report_dir = cli.out_dir.join("report");
        let path = emit_report(&fits, &[(label, table)], Some(&cfg), &report_dir)?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn fit(csv: &Path, transform: Transform) -> AnyResult<bool> {
    let table = ContractionTable::from_csv(&std::fs::read_to_string(csv)?)?;
    let f = fit_rate(&table, transform)?;
    println!("transform,points,slope,intercept,residual_rms");
    println!("{},{},{},{},{}", transform.name(), f.points, f.slope, f.intercept, f.residual_rms);
    Ok(true)
}

fn check(cli: &Cli, suite: Suite) -> AnyResult<bool> {
    let seed = cli.seed.unwrap_or(1);
    let mut ok = true;
    match suite {
        Suite::Domination => {
            let space = ParamSpace::interval(-3.0, 3.0)?;
            for (fam, count) in [(LikelihoodFamily::gaussian(1), 200u64), (LikelihoodFamily::laplace(), 100)] {
                let pairs: Vec<(DiscreteMeasure, DiscreteMeasure)> = (0..count)
                    .map(|i| {
                        let s = derive_seed(seed, &[i]);
                        let mut r = rng(s);
                        let k = 1 + (s % 4) as usize;
                        let kp = 1 + ((s >> 8) % 4) as usize;
                        (random_measure(&mut r, &space, k), random_measure(&mut r, &space, kp))
                    })
                    .collect();
                for div in Divergence::ALL {
                    let rep = check_domination(&pairs, div, &fam)?;
                    ok &= rep.passed();
                    println!(
                        "{} {}: {} violations in {} pairs, max excess {:.3e}",
                        fam.name(),
                        div.name(),
                        rep.violations,
                        rep.trials,
                        rep.max_excess
                    );
                }
            }
        }
        Suite::Entropy => {
            let unit = ParamSpace::interval(0.0, 1.0)?;
            for k in 1..=3 {
                for eps in [0.05, 0.1, 0.2] {
                    for r in [1.0, 2.0] {
                        let rep = entropy_lemma_check(k, &unit, eps, r)?;
                        ok &= rep.passed();
                        for p in &rep.parts {
                            println!(
                                "k={k} eps={eps} r={r} part {}: log packing {:.4} <= {:.4} {}",
                                p.part,
                                p.lhs_lower,
                                p.rhs,
                                if p.passed() { "ok" } else { "FAIL" }
                            );
                        }
                    }
                }
            }
        }
        Suite::Deconv => {
            let mut probes = Vec::new();
            for fam in [LikelihoodFamily::laplace(), LikelihoodFamily::gaussian(1)] {
                let probe = deconvolution_bound_probe(&fam, &PairSchedule::ALL, 8, seed)?;
                let v = probe.violations(&fam);
                ok &= v == 0;
                println!(
                    "{}: c_hat {:.4}, slope {:.4}, tail ratio {:.4}, {} pairs, {v} violations",
                    fam.name(),
                    probe.c_hat,
                    probe.fitted_slope,
                    probe.tail_ratio,
                    probe.rows.len()
                );
                probes.push(probe);
            }
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join("deconv.csv");
            std::fs::write(&path, deconvolution_csv(&probes))?;
            println!("wrote {}", path.display());
        }
        Suite::Smallball => {
            let unit = ParamSpace::interval(0.0, 1.0)?;
            let g0 = DiscreteMeasure::dirac(&[0.5], &unit)?;
            for (i, nu) in [0.5, 1.0, 2.0].into_iter().enumerate() {
                let prior = DPPrior::new(nu, unit.clone())?;
                for (j, eps) in [0.1, 0.15, 0.2].into_iter().enumerate() {
                    let rep = dp_small_ball_check(&prior, &g0, eps, 1.0, 20_000, derive_seed(seed, &[i as u64, j as u64]))?;
                    ok &= rep.passed();
                    println!(
                        "nu={nu} eps={eps}: estimate {:.5} (se {:.1e}) vs bound {:.3e} {}",
                        rep.mc_estimate,
                        rep.mc_se,
                        rep.bound,
                        if rep.passed() { "ok" } else { "FAIL" }
                    );
                }
            }
        }
    }
    println!("{}", if ok { "all checks passed" } else { "some checks failed" });
    Ok(ok)
}
