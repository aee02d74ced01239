//! Posterior contraction experiments: configuration, runs over a grid of
//! sample sizes, rate fits and plain-text reports.

use crate::bayes::{gibbs_dp, gibbs_finite, simulate_data, DPPrior, FiniteMixturePrior, Model, PosteriorChain};
use crate::error::{Error, Result};
use crate::measures::{parse_atom_record, DiscreteMeasure, ParamSpace};
use crate::mixtures::{FamilyKind, LikelihoodFamily};
use crate::numeric::{fmt_sig17, ols, quantile};
use crate::seeds::derive_seed;
use crate::transport::wasserstein;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Recognised configuration keys.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "family",
    "g0",
    "space_lower",
    "space_upper",
    "n_grid",
    "replicates",
    "iterations",
    "burn_in",
    "thin",
    "seed",
    "k",
    "concentration",
    "gamma",
    "weight_floor",
    "separation_floor",
    "output",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub family: LikelihoodFamily,
    pub g0: DiscreteMeasure,
    pub space: ParamSpace,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Number of components for `finite_k`; defaults to the size of `G₀`.
    pub k: usize,
    pub concentration: f64,
    pub gamma: f64,
    pub weight_floor: f64,
    /// Defaults to `0.1·Diam(Θ)`.
    pub separation_floor: f64,
    /// CSV file name, relative to the output directory.
    pub output: String,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s)).collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys are errors. `g0` is a `;`-separated list of `weight θ1 … θd`
    /// records; list values are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key `{k}` on line {}", i + 1)));
            }
            if kv.iter().any(|(kk, _)| *kk == k) {
                return Err(Error::Config(format!("key `{k}` given twice")));
            }
            kv.push((k, v));
        }
        let get = |k: &str| kv.iter().find(|(kk, _)| kk == k).map(|(_, v)| v.as_str());
        let need = |k: &str| get(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")));

        let model = Model::parse(need("model")?)?;
        let lower: Vec<f64> = parse_list("space_lower", need("space_lower")?)?;
        let upper: Vec<f64> = parse_list("space_upper", need("space_upper")?)?;
        let space = ParamSpace::new(lower, upper)?;
        let family = match get("family").unwrap_or("gaussian") {
            "gaussian" => LikelihoodFamily::gaussian(space.dim()),
            "laplace" if space.dim() == 1 => LikelihoodFamily::laplace(),
            other => return Err(Error::Config(format!("unsupported family `{other}`"))),
        };
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for rec in need("g0")?.split(';') {
            let (w, a) = parse_atom_record(rec.trim(), space.dim(), 0).map_err(|e| Error::Config(format!("`g0`: {e}")))?;
            weights.push(w);
            atoms.extend(a);
        }
        let g0 = DiscreteMeasure::from_flat(atoms, weights, &space)?;
        let n_grid: Vec<usize> = parse_list("n_grid", need("n_grid")?)?;
        let cfg = Self {
            model,
            family,
            k: get("k").map(|v| parse_num("k", v)).transpose()?.unwrap_or(g0.len()),
            g0,
            n_grid,
            replicates: get("replicates").map(|v| parse_num("replicates", v)).transpose()?.unwrap_or(10),
            iterations: get("iterations").map(|v| parse_num("iterations", v)).transpose()?.unwrap_or(300),
            burn_in: get("burn_in").map(|v| parse_num("burn_in", v)).transpose()?.unwrap_or(100),
            thin: get("thin").map(|v| parse_num("thin", v)).transpose()?.unwrap_or(2),
            seed: get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(1),
            concentration: get("concentration").map(|v| parse_num("concentration", v)).transpose()?.unwrap_or(1.0),
            gamma: get("gamma").map(|v| parse_num("gamma", v)).transpose()?.unwrap_or(1.0),
            weight_floor: get("weight_floor").map(|v| parse_num("weight_floor", v)).transpose()?.unwrap_or(0.05),
            separation_floor: get("separation_floor")
                .map(|v| parse_num("separation_floor", v))
                .transpose()?
                .unwrap_or(0.1 * space.diameter()),
            output: get("output").unwrap_or("contraction.csv").to_string(),
            space,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.thin == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config("need thin ≥ 1 and burn_in < iterations".into()));
        }
        if self.family.kind() != FamilyKind::GaussianLocation {
            return Err(Error::Config("the samplers support the gaussian family only".into()));
        }
        if self.output.is_empty() || self.output.contains('/') {
            return Err(Error::Config("output must be a plain file name".into()));
        }
        self.finite_prior()?;
        self.dp_prior()?;
        Ok(())
    }

    pub fn finite_prior(&self) -> Result<FiniteMixturePrior> {
        FiniteMixturePrior::with_floors(self.k, self.space.clone(), self.gamma, self.weight_floor, self.separation_floor)
    }

    pub fn dp_prior(&self) -> Result<DPPrior> {
        DPPrior::new(self.concentration, self.space.clone())
    }

    /// Canonical `key = value` echo; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| fmt_sig17(*x)).collect::<Vec<_>>().join(", ");
        let g0: Vec<String> = self
            .g0
            .atoms()
            .zip(self.g0.weights())
            .map(|(a, w)| {
                std::iter::once(fmt_sig17(*w))
                    .chain(a.iter().map(|x| fmt_sig17(*x)))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.name());
        let _ = writeln!(s, "family = {}", self.family.name());
        let _ = writeln!(s, "g0 = {}", g0.join(" ; "));
        let _ = writeln!(s, "space_lower = {}", list(self.space.lower()));
        let _ = writeln!(s, "space_upper = {}", list(self.space.upper()));
        let _ = writeln!(
            s,
            "n_grid = {}",
            self.n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(s, "replicates = {}", self.replicates);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "thin = {}", self.thin);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "concentration = {}", fmt_sig17(self.concentration));
        let _ = writeln!(s, "gamma = {}", fmt_sig17(self.gamma));
        let _ = writeln!(s, "weight_floor = {}", fmt_sig17(self.weight_floor));
        let _ = writeln!(s, "separation_floor = {}", fmt_sig17(self.separation_floor));
        let _ = writeln!(s, "output = {}", self.output);
        s
    }

    /// Data and chain seeds of one cell. The data seed does not depend on
    /// the model, so `finite_k` and `dp` runs with one base seed share data.
    pub fn cell_seeds(&self, n: usize, replicate: usize) -> (u64, u64) {
        (
            derive_seed(self.seed, &[n as u64, replicate as u64, 0]),
            derive_seed(self.seed, &[n as u64, replicate as u64, 1]),
        )
    }

    /// `(n, replicate, data_seed, chain_seed)` for every cell.
    pub fn seed_manifest(&self) -> Vec<(usize, usize, u64, u64)> {
        self.n_grid
            .iter()
            .flat_map(|&n| {
                (0..self.replicates).map(move |r| {
                    let (a, b) = self.cell_seeds(n, r);
                    (n, r, a, b)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    pub replicate: usize,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContractionTable {
    pub rows: Vec<ContractionRow>,
}

pub const CSV_HEADER: [&str; 4] = ["n", "replicate", "posterior_W2_median", "posterior_W2_q90"];

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::IoFailure(e.to_string()),
        _ => Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        },
    }
}

impl ContractionTable {
    /// Comma separated, header row, LF endings, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([r.n.to_string(), r.replicate.to_string(), fmt_sig17(r.median), fmt_sig17(r.q90)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |j: usize| rec.get(j).unwrap_or("");
            let bad = |j: usize| Error::Parse {
                line: i + 2,
                msg: format!("bad value `{}` in column {}", field(j), CSV_HEADER[j]),
            };
            rows.push(ContractionRow {
                n: field(0).parse().map_err(|_| bad(0))?,
                replicate: field(1).parse().map_err(|_| bad(1))?,
                median: field(2).parse().map_err(|_| bad(2))?,
                q90: field(3).parse().map_err(|_| bad(3))?,
            });
        }
        Ok(Self { rows })
    }

    /// Mean of the replicate medians for each `n`, sorted by `n`.
    pub fn mean_medians(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let v: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.median).collect();
                (n, v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }
}

/// Runs the sampler of one cell and summarises `W₂(G₀, G)` over its draws.
pub fn run_cell(config: &ExperimentConfig, n: usize, replicate: usize) -> Result<(ContractionRow, PosteriorChain)> {
    let (data_seed, chain_seed) = config.cell_seeds(n, replicate);
    let data = simulate_data(&config.g0, &config.family, n, data_seed)?;
    let chain = match config.model {
        Model::FiniteK => gibbs_finite(
            &data,
            &config.finite_prior()?,
            &config.family,
            config.iterations,
            config.burn_in,
            config.thin,
            chain_seed,
        )?,
        Model::Dp => gibbs_dp(
            &data,
            &config.dp_prior()?,
            &config.family,
            config.iterations,
            config.burn_in,
            config.thin,
            chain_seed,
        )?,
    };
    let mut w: Vec<f64> = chain
        .draws
        .iter()
        .map(|g| wasserstein(&config.g0, g, 2.0))
        .collect::<Result<_>>()?;
    if w.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, have: 0 });
    }
    w.sort_by(f64::total_cmp);
    Ok((
        ContractionRow {
            n,
            replicate,
            median: quantile(&w, 0.5),
            q90: quantile(&w, 0.9),
        },
        chain,
    ))
}

/// All `(n, replicate)` cells in parallel, sorted by `(n, replicate)`.
/// `on_row` sees each row as soon as its cell finishes (in completion order).
pub fn run_contraction(config: &ExperimentConfig, on_row: Option<&(dyn Fn(&ContractionRow) + Sync)>) -> Result<ContractionTable> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let mut rows: Vec<ContractionRow> = cells
        .par_iter()
        .map(|&(n, r)| {
            let (row, _) = run_cell(config, n, r)?;
            if let Some(f) = on_row {
                f(&row);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| (r.n, r.replicate));
    Ok(ContractionTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    LogN,
    LogLogN,
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::LogN => "log_n",
            Transform::LogLogN => "log_log_n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "log_n" => Ok(Transform::LogN),
            "log_log_n" => Ok(Transform::LogLogN),
            other => Err(Error::InvalidArgument(format!("unknown transform `{other}`"))),
        }
    }

    fn apply(&self, n: f64) -> f64 {
        match self {
            Transform::LogN => n.ln(),
            Transform::LogLogN => n.ln().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub transform: Transform,
    pub points: usize,
}

/// OLS of `log(mean median W₂)` on the transformed sample size.
pub fn fit_rate(table: &ContractionTable, transform: Transform) -> Result<RateFit> {
    let pts = table.mean_medians();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            have: pts.len(),
        });
    }
    if pts.iter().any(|(n, m)| *n < 3 || !(*m > 0.0)) {
        return Err(Error::InvalidArgument(
            "rate fits need n ≥ 3 and positive medians".into(),
        ));
    }
    let xs: Vec<f64> = pts.iter().map(|(n, _)| transform.apply(*n as f64)).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, m)| m.ln()).collect();
    let (slope, intercept, residual_rms) = ols(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        residual_rms,
        transform,
        points: pts.len(),
    })
}

/// Writes `report.txt` into `dir` together with one CSV per table
/// (`<label>.csv`). The report echoes `config` and its seed manifest.
pub fn emit_report(
    fits: &[(String, RateFit)],
    tables: &[(String, ContractionTable)],
    config: Option<&ExperimentConfig>,
    dir: &Path,
) -> Result<PathBuf> {
    if fits.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, have: 0 });
    }
    std::fs::create_dir_all(dir)?;
    let mut s = String::from("# contraction report\n");
    if let Some(cfg) = config {
        s.push_str("\n[config]\n");
        s.push_str(&cfg.to_text());
        s.push_str("\n[seeds]\nn,replicate,data_seed,chain_seed\n");
        for (n, r, a, b) in cfg.seed_manifest() {
            let _ = writeln!(s, "{n},{r},{a},{b}");
        }
    }
    s.push_str("\n[fits]\nlabel,transform,points,slope,intercept,residual_rms\n");
    for (label, f) in fits {
        let _ = writeln!(
            s,
            "{label},{},{},{},{},{}",
            f.transform.name(),
            f.points,
            fmt_sig17(f.slope),
            fmt_sig17(f.intercept),
            fmt_sig17(f.residual_rms)
        );
    }
    if !tables.is_empty() {
        s.push_str("\n[tables]\n");
    }
    for (label, t) in tables {
        let name = format!("{label}.csv");
        std::fs::write(dir.join(&name), t.to_csv())?;
        let _ = writeln!(s, "{name},{} rows", t.rows.len());
    }
    let path = dir.join("report.txt");
    std::fs::write(&path, s)?;
    Ok(path)
}
