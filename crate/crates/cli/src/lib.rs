//! Command implementations behind the `ncc` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use ncc_core::bipoint::{LbkmOptions, SpecialSelection};
use ncc_core::meta::{solve_auto_with, solve_chig_with, solve_ord_l1_with, solve_sym_l1_with};
use ncc_core::norms::{attenuation, NormJson};
use ncc_core::primal_dual::write_trace_csv;
use ncc_core::{
    exact_ncc, solve_chif, solve_k_apx, Algorithm, MetricInstance, NormSpec, OracleBudget, SolverReport,
    SubroutineRegistry,
};
use rayon::prelude::*;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Bound(String),
    #[error("{0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Bound(_) => 4,
            CliError::Internal(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ncc_core::Error> for CliError {
    fn from(e: ncc_core::Error) -> Self {
        match e {
            ncc_core::Error::Sizing { .. } => CliError::Budget(e.to_string()),
            ncc_core::Error::Invariant(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Formats with 9 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_sig(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// Parses `l1`, `linf`, `lp:P`, `top:L`, `ord:w1,w2,...` or a JSON norm object.
pub fn parse_norm(s: &str, arity: usize) -> CliResult<NormSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        let v: Value = serde_json::from_str(s).map_err(|e| CliError::Input(format!("bad norm JSON: {e}")))?;
        return Ok(NormSpec::from_json_value(&v, arity)?);
    }
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = |a: &str| a.parse::<f64>().map_err(|_| CliError::Input(format!("bad norm parameter '{a}'")));
    let spec = match name {
        "l1" => NormJson::L1,
        "linf" => NormJson::Linf,
        "lp" => NormJson::Lp { p: num(arg)? },
        "top" => NormJson::Top { ell: arg.parse().map_err(|_| CliError::Input(format!("bad top parameter '{arg}'")))? },
        "ord" => NormJson::Ordered { weights: arg.split(',').map(num).collect::<CliResult<_>>()? },
        _ => return Err(CliError::Input(format!("unknown norm '{s}'"))),
    };
    Ok(NormSpec::from_json(&spec, arity)?)
}

pub fn load_instance(path: &Path) -> CliResult<MetricInstance> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(MetricInstance::from_json_str(&text)?)
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Writes a uniform random Euclidean instance as JSON.
pub fn cmd_gen(n: usize, num_facilities: usize, k: usize, dim: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    if n == 0 || num_facilities == 0 || k == 0 || dim == 0 {
        return Err(CliError::Input("n, facilities, k and dim must be positive".into()));
    }
    let inst = MetricInstance::random_uniform(n, num_facilities, k, dim, seed)?;
    let mut text = serde_json::to_string_pretty(&inst.to_json_value()).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_output(out, &text)
}

/// Everything `solve` needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub instance: PathBuf,
    pub inner: String,
    pub outer: String,
    pub algorithm: Algorithm,
    pub k: Option<usize>,
    /// Switches the special-group choice of the rounding to seeded random.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub oracle: bool,
    pub cap: Option<u64>,
    pub trace: Option<PathBuf>,
    pub timing: bool,
}

impl RunConfig {
    pub fn new(instance: impl Into<PathBuf>, algorithm: Algorithm) -> Self {
        RunConfig {
            instance: instance.into(),
            inner: "l1".into(),
            outer: "l1".into(),
            algorithm,
            k: None,
            seed: None,
            out: None,
            oracle: false,
            cap: None,
            trace: None,
            timing: false,
        }
    }

    fn lbkm_options(&self) -> LbkmOptions {
        let mut o = LbkmOptions::default();
        if let Some(c) = self.cap {
            o.radius_cap = c;
        }
        o.trace = self.trace.is_some();
        if let Some(s) = self.seed {
            o.selection = SpecialSelection::Random(s);
        }
        o
    }
}

fn chi(norm: &NormSpec) -> Option<f64> {
    attenuation(norm).ok()
}

fn run_algorithm(
    inst: &MetricInstance,
    f: &NormSpec,
    g: &NormSpec,
    alg: Algorithm,
    opts: &LbkmOptions,
    registry: &SubroutineRegistry,
) -> CliResult<SolverReport> {
    let l1_outer = || -> CliResult<()> {
        if g.ordered_weights().is_some_and(|w| w.iter().all(|&v| v == 1.0)) {
            Ok(())
        } else {
            Err(CliError::Input(format!("{alg} needs the l1 outer norm")))
        }
    };
    let report = match alg {
        Algorithm::OrdL1 => {
            l1_outer()?;
            let w = f
                .ordered_weights()
                .ok_or_else(|| CliError::Input(format!("{alg} needs an ordered inner norm, got {}", f.label())))?;
            solve_ord_l1_with(inst, &w, opts)?
        }
        Algorithm::SymL1 => {
            l1_outer()?;
            solve_sym_l1_with(inst, f, opts)?
        }
        Algorithm::Chig => solve_chig_with(inst, f, g, opts)?,
        Algorithm::Chif => solve_chif(inst, f, g, registry)?,
        Algorithm::KApx => solve_k_apx(inst, f, g, registry)?,
        Algorithm::Auto => solve_auto_with(inst, f, g, registry, opts)?,
        Algorithm::Oracle => {
            let (cost, solution) = exact_ncc(inst, f, g, &OracleBudget::default())?;
            SolverReport { solution, cost, algorithm: Algorithm::Oracle, proven_factor: Some(1.0), notes: Vec::new(), trace: Vec::new() }
        }
    };
    Ok(report)
}

pub const SOLVE_HEADER: &str = "algorithm,cost,chi_f,chi_g,factor,time_ms";

/// Solves one instance; prints a table to stdout and writes a CSV row when asked.
pub fn cmd_solve(cfg: &RunConfig) -> CliResult<String> {
    let mut inst = load_instance(&cfg.instance)?;
    if let Some(k) = cfg.k {
        inst = inst.with_k(k)?;
    }
    let f = parse_norm(&cfg.inner, inst.n())?;
    let g = parse_norm(&cfg.outer, inst.k())?;
    let start = Instant::now();
    let report = run_algorithm(&inst, &f, &g, cfg.algorithm, &cfg.lbkm_options(), &SubroutineRegistry::default())?;
    let ms = start.elapsed().as_secs_f64() * 1e3;

    let mut header = SOLVE_HEADER.to_string();
    let mut row = format!(
        "{},{},{},{},{},{}",
        report.algorithm,
        fmt_sig(report.cost),
        opt_sig(chi(&f)),
        opt_sig(chi(&g)),
        opt_sig(report.proven_factor),
        if cfg.timing { fmt_sig(ms) } else { String::new() }
    );
    if cfg.oracle {
        let (opt, _) = exact_ncc(&inst, &f, &g, &OracleBudget::default())?;
        header.push_str(",oracle,ratio");
        write!(row, ",{},{}", fmt_sig(opt), fmt_sig(ratio(report.cost, opt))).expect("string write");
    }

    let mut table = String::new();
    for (h, v) in header.split(',').zip(row.split(',')) {
        let v = if h == "time_ms" { fmt_sig(ms) } else { v.to_string() };
        writeln!(table, "{h:<10} {v}").expect("string write");
    }
    writeln!(table, "{:<10} {:?}", "centers", report.solution.centers().iter().map(|&x| &inst.facility_ids()[x]).collect::<Vec<_>>())
        .expect("string write");
    for note in &report.notes {
        info!("{note}");
    }
    if let Some(p) = &cfg.out {
        fs::write(p, format!("{header}\n{row}\n"))?;
    }
    if let Some(p) = &cfg.trace {
        write_trace_csv(&report.trace, fs::File::create(p)?)?;
    }
    Ok(table)
}

fn ratio(cost: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        cost / opt
    } else if cost <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// One (instance, inner, outer) case of a benchmark.
#[derive(Clone, Debug)]
pub struct BenchEntry {
    pub name: String,
    pub instance: MetricInstance,
    pub inner: NormSpec,
    pub outer: NormSpec,
}

pub type BenchSolver = Arc<dyn Fn(&MetricInstance, &NormSpec, &NormSpec) -> ncc_core::Result<SolverReport> + Send + Sync>;

/// Named solvers run on every entry.
pub fn default_solvers() -> Vec<(String, BenchSolver)> {
    let registry = SubroutineRegistry::default();
    let mut out: Vec<(String, BenchSolver)> = Vec::new();
    out.push(("chig".into(), Arc::new(ncc_core::solve_chig)));
    let r = registry.clone();
    out.push(("chif".into(), Arc::new(move |i, f, g| solve_chif(i, f, g, &r))));
    let r = registry.clone();
    out.push(("k-apx".into(), Arc::new(move |i, f, g| solve_k_apx(i, f, g, &r))));
    out.push(("auto".into(), Arc::new(move |i, f, g| ncc_core::solve_auto(i, f, g, &registry))));
    out
}

/// Inner/outer pairs used when a corpus file names none.
pub fn default_regimes() -> Vec<(&'static str, &'static str)> {
    vec![("l1", "l1"), ("l1", "linf"), ("linf", "l1"), ("linf", "linf")]
}

fn regime_entries(name: &str, inst: &MetricInstance, regimes: &[(String, String)]) -> CliResult<Vec<BenchEntry>> {
    regimes
        .iter()
        .map(|(f, g)| {
            Ok(BenchEntry {
                name: format!("{name}:{f}/{g}"),
                instance: inst.clone(),
                inner: parse_norm(f, inst.n())?,
                outer: parse_norm(g, inst.k())?,
            })
        })
        .collect()
}

fn norm_field(v: &Value, key: &str) -> Option<String> {
    v.get(key).map(|n| if let Value::String(s) = n { s.clone() } else { n.to_string() })
}

/// Reads every `*.json` instance in `dir`, sorted by file name. A file may carry
/// `inner` and `outer` norms; otherwise the default regimes apply.
pub fn load_corpus(dir: &Path) -> CliResult<Vec<BenchEntry>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("cannot read corpus {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let text = fs::read_to_string(&path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let inst = MetricInstance::from_json_value(&v)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let regimes: Vec<(String, String)> = match (norm_field(&v, "inner"), norm_field(&v, "outer")) {
            (Some(f), Some(g)) => vec![(f, g)],
            (None, None) => default_regimes().into_iter().map(|(f, g)| (f.to_string(), g.to_string())).collect(),
            _ => return Err(CliError::Input(format!("{}: give both inner and outer or neither", path.display()))),
        };
        out.extend(regime_entries(&name, &inst, &regimes)?);
    }
    Ok(out)
}

/// Random oracle-sized instances (n <= 6, |F| <= 5, k <= 3) under the default regimes.
pub fn seeded_corpus(seeds: u64, base_seed: u64) -> CliResult<Vec<BenchEntry>> {
    let mut out = Vec::new();
    for s in 0..seeds {
        let seed = base_seed.wrapping_add(s);
        let n = 3 + (seed % 4) as usize;
        let nf = 2 + (seed / 4 % 4) as usize;
        let k = 1 + (seed / 16 % nf.min(3) as u64) as usize;
        let inst = MetricInstance::random_uniform(n, nf, k, 2, seed)?;
        let regimes: Vec<(String, String)> =
            default_regimes().into_iter().map(|(f, g)| (f.to_string(), g.to_string())).collect();
        out.extend(regime_entries(&format!("seed{seed}"), &inst, &regimes)?);
    }
    Ok(out)
}

pub const BENCH_HEADER: &str = "instance,algorithm,cost,oracle,ratio,bound,time_ms";

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub csv: String,
    pub violations: Vec<String>,
}

/// Runs every solver on every entry against the exact optimum.
pub fn run_bench(entries: &[BenchEntry], solvers: &[(String, BenchSolver)], timing: bool) -> CliResult<BenchOutcome> {
    let budget = OracleBudget::default();
    let rows: Vec<Vec<(f64, Option<f64>, String)>> = entries
        .par_iter()
        .map(|e| -> CliResult<_> {
            let (opt, _) = exact_ncc(&e.instance, &e.inner, &e.outer, &budget)?;
            solvers
                .iter()
                .map(|(name, solve)| {
                    let start = Instant::now();
                    let rep = solve(&e.instance, &e.inner, &e.outer)?;
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    let r = ratio(rep.cost, opt);
                    let line = format!(
                        "{},{},{},{},{},{},{}",
                        e.name,
                        name,
                        fmt_sig(rep.cost),
                        fmt_sig(opt),
                        fmt_sig(r),
                        opt_sig(rep.proven_factor),
                        if timing { fmt_sig(ms) } else { String::new() }
                    );
                    Ok((r, rep.proven_factor, line))
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;

    let mut csv = format!("{BENCH_HEADER}\n");
    let mut violations = Vec::new();
    let mut worst = vec![0.0f64; solvers.len()];
    for (entry, per_solver) in entries.iter().zip(&rows) {
        for (j, (r, bound, line)) in per_solver.iter().enumerate() {
            csv.push_str(line);
            csv.push('\n');
            worst[j] = worst[j].max(*r);
            if let Some(b) = bound {
                if *r > b * (1.0 + 1e-9) {
                    violations.push(format!("{} / {}: ratio {} exceeds bound {}", entry.name, solvers[j].0, fmt_sig(*r), fmt_sig(*b)));
                }
            }
        }
    }
    if !entries.is_empty() {
        for (j, (name, _)) in solvers.iter().enumerate() {
            writeln!(csv, "summary,{name},,,{},,", fmt_sig(worst[j])).expect("string write");
        }
    }
    Ok(BenchOutcome { csv, violations })
}

/// Benchmarks the default solvers; a ratio above its bound fails with exit code 4.
pub fn cmd_bench(entries: &[BenchEntry], out: Option<&Path>, timing: bool) -> CliResult<BenchOutcome> {
    bench_with(entries, &default_solvers(), out, timing)
}

pub fn bench_with(
    entries: &[BenchEntry],
    solvers: &[(String, BenchSolver)],
    out: Option<&Path>,
    timing: bool,
) -> CliResult<BenchOutcome> {
    let outcome = run_bench(entries, solvers, timing)?;
    write_output(out, &outcome.csv)?;
    if !outcome.violations.is_empty() {
        return Err(CliError::Bound(outcome.violations.join("\n")));
    }
    Ok(outcome)
}

/// Attenuation of a norm at arity `d`, six decimals.
pub fn cmd_attenuation(norm: &str, d: usize) -> CliResult<String> {
    if d < 2 {
        return Err(CliError::Input("attenuation needs d >= 2".into()));
    }
    let spec = parse_norm(norm, d)?;
    Ok(format!("{:.6}", attenuation(&spec)?))
}
