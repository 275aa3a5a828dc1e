//! Batch front-end: parses a key=value config plus flag overrides,
//! dispatches to the library, and emits CSV artifacts with a manifest
//! echoing the fully resolved configuration.  All orchestration logic
//! lives in the library; this binary is plumbing only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use asep2d::hierarchy::{
    k_integral, k_integral_isotropic_oracle, resolvent_truncated, KIntegralSpec, NestedMode,
    NestedResolventSpec, UVParams,
};
use asep2d::lattice::DynamicsMode;
use asep2d::momentum::{Grid1d, Grid2d};
use asep2d::observables::{
    diffusivity_from_moments, diffusivity_green_kubo, measure_current_integral,
    measure_structure_function, SimParams,
};
use asep2d::oracle::build_generator;
use asep2d::scaling::{fit_log_power, iterate_kappa, kappa_schedule, rational_to_f64};
use asep2d::{Error, Result};

#[derive(Parser)]
#[command(name = "asep2d", version, about = "Batch driver for the 2-D exclusion process laboratory")]
struct Cli {
    /// key=value configuration file; flags override file entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV here (and the manifest next to it); stdout if absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trajectories and emit a D(t) CSV
    Simulate(SimulateArgs),
    /// Exact small-torus resolvent of the generator
    Oracle(OracleArgs),
    /// Truncated-hierarchy resolvent over a lambda grid
    Resolvent(ResolventArgs),
    /// The scalar model integral over the shrinking disc
    Kintegral(KintegralArgs),
    /// Exact rational kappa schedules
    Kappa(KappaArgs),
    /// Fit a power of |log lambda| to CSV data
    Fit(FitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Square-lattice shorthand ("64" or "64x32")
    #[arg(long, value_name = "WxH")]
    lattice: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_points: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// D(t) route: "green-kubo" (space-summed current variance) or
    /// "moments" (second moments of the structure function)
    #[arg(long)]
    route: Option<String>,
    /// "full" or "symmetric" dynamics
    #[arg(long)]
    mode: Option<String>,
    /// Moments-route axis (1 or 2)
    #[arg(long)]
    axis: Option<usize>,
    /// Start from the fixed-count ensemble with this many particles
    #[arg(long)]
    canonical_k: Option<usize>,
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_name = "WxH")]
    lattice: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct ResolventArgs {
    /// Truncation degree (3-5)
    #[arg(long)]
    n: Option<usize>,
    /// "start:end:log[:points-per-decade]" or a single value
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Momentum-axis resolution: log-spaced points per side
    #[arg(long)]
    points_per_side: Option<usize>,
    /// "exact", "diag-u" or "diag-v"
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Relative solver tolerance (outer level)
    #[arg(long)]
    tol: Option<f64>,
    /// Also solve at points_per_side + 2 and report the relative change
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct KintegralArgs {
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    radial_cells: Option<usize>,
    #[arg(long)]
    angular_cells: Option<usize>,
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct KappaArgs {
    /// Depth parameter N
    #[arg(long)]
    n: Option<usize>,
    /// Use the alternate schedule
    #[arg(long)]
    alternate: bool,
    #[arg(long)]
    selftest: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header and (lambda, value) as the first two columns
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    selftest: bool,
}

/// key=value file contents; later lines win.
fn load_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if let Some(p) = path {
        for line in fs::read_to_string(p)?.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parameter(format!("config line without '=': {line}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::parameter(format!("config {key}={s} failed to parse"))),
    }
}

fn resolve<T: std::str::FromStr + Clone>(
    flag: &Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    Ok(cfg_parse(cfg, key)?.unwrap_or(default))
}

fn parse_lattice(spec: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parameter(format!("bad lattice size {s}")))
    };
    match spec.split_once('x') {
        Some((w, h)) => Ok((parse(w)?, parse(h)?)),
        None => {
            let n = parse(spec)?;
            Ok((n, n))
        }
    }
}

/// "start:end:log[:per_decade]" or a single number.
fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::parameter(format!("bad lambda {s}")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [start, end, "log"] | [start, end, "log", _] => {
            let per_decade: f64 = if parts.len() == 4 {
                parts[3]
                    .parse()
                    .map_err(|_| Error::parameter("bad points-per-decade"))?
            } else {
                2.0
            };
            let (a, b) = (parse(start)?, parse(end)?);
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::parameter("lambda grid endpoints must be positive"));
            }
            let (hi, lo) = (a.max(b), a.min(b));
            let decades = (hi / lo).log10();
            let steps = (decades * per_decade).round().max(1.0) as usize;
            Ok((0..=steps)
                .map(|i| hi * (lo / hi).powf(i as f64 / steps as f64))
                .collect())
        }
        _ => Err(Error::parameter(format!("bad lambda grid {spec}; use start:end:log[:n]"))),
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Output {
    path: Option<PathBuf>,
    manifest: Vec<(String, String)>,
}

impl Output {
    fn new(path: Option<PathBuf>, subcommand: &str) -> Self {
        let manifest = vec![
            ("tool".into(), "asep2d".into()),
            ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ("subcommand".into(), subcommand.into()),
            (
                "threads".into(),
                std::env::var("ASEP2D_THREADS").unwrap_or_else(|_| "default".into()),
            ),
        ];
        Output { path, manifest }
    }

    fn record(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.into(), value.to_string()));
    }

    fn emit(&self, csv: &str) -> Result<()> {
        let mut manifest = String::new();
        for (k, v) in &self.manifest {
            writeln!(manifest, "{k}={v}").expect("string write");
        }
        match &self.path {
            Some(p) => {
                fs::write(p, csv)?;
                fs::write(p.with_extension("manifest"), manifest)?;
            }
            None => {
                use std::io::Write;
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                let mut write_all = || -> std::io::Result<()> {
                    for line in manifest.lines() {
                        writeln!(lock, "# {line}")?;
                    }
                    write!(lock, "{csv}")
                };
                if let Err(e) = write_all() {
                    // a closed pager/pipe is not an error
                    if e.kind() != std::io::ErrorKind::BrokenPipe {
                        return Err(e.into());
                    }
                }
            }
        }
        Ok(())
    }
}

fn t_grid(t_max: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|i| t_max * i as f64 / points as f64).collect()
}

fn run_simulate(args: &SimulateArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_simulate();
    }
    let (mut width, mut height) = (resolve(&args.width, cfg, "width", 64)?, resolve(&args.height, cfg, "height", 64)?);
    let lattice = match &args.lattice {
        Some(s) => Some(s.clone()),
        None => cfg.get("lattice").cloned(),
    };
    if let Some(spec) = lattice {
        let (w, h) = parse_lattice(&spec)?;
        width = w;
        height = h;
    }
    let rho = resolve(&args.rho, cfg, "rho", 0.5)?;
    let t_max = resolve(&args.t_max, cfg, "t_max", 20.0)?;
    let t_points = resolve(&args.t_points, cfg, "t_points", 10)?;
    let replicas = resolve(&args.replicas, cfg, "replicas", 200)?;
    let seed = resolve(&args.seed, cfg, "seed", 1)?;
    let route = resolve(&args.route, cfg, "route", "green-kubo".to_string())?;
    let mode_name = resolve(&args.mode, cfg, "mode", "full".to_string())?;
    let axis = resolve(&args.axis, cfg, "axis", 1)?;
    let mode = match mode_name.as_str() {
        "full" => DynamicsMode::Full,
        "symmetric" => DynamicsMode::SymmetricOnly,
        other => return Err(Error::parameter(format!("unknown mode {other}"))),
    };
    let canonical_k = match args.canonical_k {
        Some(k) => Some(k),
        None => cfg_parse(cfg, "canonical_k")?,
    };
    let params = SimParams { width, height, rho, replicas, seed, mode, canonical_k };
    let grid = t_grid(t_max, t_points);

    let mut output = Output::new(out, "simulate");
    for (k, v) in [
        ("width", width.to_string()),
        ("height", height.to_string()),
        ("rho", rho.to_string()),
        ("t_max", t_max.to_string()),
        ("t_points", t_points.to_string()),
        ("replicas", replicas.to_string()),
        ("seed", seed.to_string()),
        ("route", route.clone()),
        ("mode", mode_name.clone()),
        ("axis", axis.to_string()),
    ] {
        output.record(k, v);
    }
    let curve = match route.as_str() {
        "green-kubo" => {
            let ci = measure_current_integral(&params, &grid)?;
            diffusivity_green_kubo(&ci)
        }
        "moments" => {
            let corr = measure_structure_function(&params, &grid)?;
            diffusivity_from_moments(&corr, axis)?
        }
        other => return Err(Error::parameter(format!("unknown route {other}"))),
    };
    let mut csv = String::from("t,d,se\n");
    for i in 0..curve.t_grid.len() {
        writeln!(
            csv,
            "{},{},{}",
            fmt17(curve.t_grid[i]),
            fmt17(curve.values[i]),
            fmt17(curve.errors[i])
        )
        .expect("string write");
    }
    output.emit(&csv)
}

fn run_oracle(args: &OracleArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_oracle();
    }
    let lattice = match &args.lattice {
        Some(s) => s.clone(),
        None => cfg.get("lattice").cloned().unwrap_or_else(|| "4x4".into()),
    };
    let (width, height) = parse_lattice(&lattice)?;
    let k = resolve(&args.k, cfg, "k", width * height / 2)?;
    let lambda = resolve(&args.lambda, cfg, "lambda", 0.1)?;
    let gen = build_generator(width, height, k)?;
    let rv = gen.exact_resolvent(lambda)?;
    let mut output = Output::new(out, "oracle");
    output.record("lattice", format!("{width}x{height}"));
    output.record("k", k);
    output.record("lambda", lambda);
    let mut csv = String::from("width,height,k,lambda,value,residual,iterations,current_mean\n");
    writeln!(
        csv,
        "{width},{height},{k},{},{},{},{},{}",
        fmt17(lambda),
        fmt17(rv.value),
        fmt17(rv.residual),
        rv.iterations,
        fmt17(rv.current_mean)
    )
    .expect("string write");
    output.emit(&csv)
}

fn graded_grid(lambda: f64, points_per_side: usize) -> Result<Arc<Grid2d>> {
    let p_min = lambda.sqrt().min(std::f64::consts::PI / 4.0);
    Ok(Arc::new(Grid2d::new(Grid1d::geometric(p_min, points_per_side)?)))
}

fn run_resolvent(args: &ResolventArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_resolvent();
    }
    let n = resolve(&args.n, cfg, "n", 3)?;
    let grid_spec = match &args.lambda_grid {
        Some(s) => s.clone(),
        None => cfg.get("lambda_grid").cloned().unwrap_or_else(|| "1e-3".into()),
    };
    let lambdas = parse_lambda_grid(&grid_spec)?;
    let pps = resolve(&args.points_per_side, cfg, "points_per_side", 6)?;
    let mode_name = resolve(&args.mode, cfg, "mode", "exact".to_string())?;
    let kappa = resolve(&args.kappa, cfg, "kappa", 2.0 / 3.0)?;
    let tau = resolve(&args.tau, cfg, "tau", 1.5)?;
    let tol = resolve(&args.tol, cfg, "tol", 1e-9)?;
    let mode = match mode_name.as_str() {
        "exact" => NestedMode::ExactNested,
        "diag-u" => NestedMode::DiagonalU,
        "diag-v" => NestedMode::DiagonalV,
        other => return Err(Error::parameter(format!("unknown mode {other}"))),
    };
    let mut output = Output::new(out, "resolvent");
    output.record("n", n);
    output.record("lambda_grid", &grid_spec);
    output.record("points_per_side", pps);
    output.record("mode", &mode_name);
    output.record("kappa", kappa);
    output.record("tau", tau);
    output.record("tol", tol);
    output.record("refine", args.refine);
    let mut csv = String::from("n,lambda,points_per_side,mode,value,residual,refinement_delta\n");
    for &lambda in &lambdas {
        let value_at = |points: usize| -> Result<asep2d::hierarchy::NestedValue> {
            let mut spec = NestedResolventSpec::exact(n, lambda, graded_grid(lambda, points)?);
            spec.mode = mode;
            spec.tol = tol;
            if mode != NestedMode::ExactNested {
                spec.uv = Some(UVParams::new(kappa, tau, lambda)?);
            }
            resolvent_truncated(&spec)
        };
        let v = value_at(pps)?;
        let delta = if args.refine {
            let v2 = value_at(pps + 2)?;
            fmt17((v2.value - v.value).abs() / v.value.abs().max(f64::MIN_POSITIVE))
        } else {
            String::new()
        };
        writeln!(
            csv,
            "{n},{},{pps},{mode_name},{},{},{delta}",
            fmt17(lambda),
            fmt17(v.value),
            fmt17(v.residual)
        )
        .expect("string write");
    }
    output.emit(&csv)
}

fn run_kintegral(args: &KintegralArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_kintegral();
    }
    let kappa = resolve(&args.kappa, cfg, "kappa", 0.0)?;
    let tau = resolve(&args.tau, cfg, "tau", 1.5)?;
    let a2 = resolve(&args.a2, cfg, "a2", 0.0)?;
    let b2 = resolve(&args.b2, cfg, "b2", 0.0)?;
    let grid_spec = match &args.lambda_grid {
        Some(s) => s.clone(),
        None => cfg.get("lambda_grid").cloned().unwrap_or_else(|| "1e-6".into()),
    };
    let lambdas = parse_lambda_grid(&grid_spec)?;
    let radial = resolve(&args.radial_cells, cfg, "radial_cells", 256)?;
    let angular = resolve(&args.angular_cells, cfg, "angular_cells", 64)?;
    let mut output = Output::new(out, "kintegral");
    output.record("kappa", kappa);
    output.record("tau", tau);
    output.record("a2", a2);
    output.record("b2", b2);
    output.record("lambda_grid", &grid_spec);
    output.record("radial_cells", radial);
    output.record("angular_cells", angular);
    let mut csv = String::from("kappa,tau,a2,b2,lambda,k_value\n");
    for &lambda in &lambdas {
        let mut spec = KIntegralSpec::new(kappa, tau, a2, b2, lambda);
        spec.radial_cells = radial;
        spec.angular_cells = angular;
        let k = k_integral(&spec)?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt17(kappa),
            fmt17(tau),
            fmt17(a2),
            fmt17(b2),
            fmt17(lambda),
            fmt17(k)
        )
        .expect("string write");
    }
    output.emit(&csv)
}

fn run_kappa(args: &KappaArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_kappa();
    }
    let n = resolve(&args.n, cfg, "n", 5)?;
    let alternate = args.alternate || cfg_parse::<bool>(cfg, "alternate")?.unwrap_or(false);
    let schedule = kappa_schedule(n, alternate)?;
    if let Some(bad) = schedule.check_recursion() {
        return Err(Error::numerical(format!("recursion fails at index {bad}"), f64::NAN));
    }
    let mut output = Output::new(out, "kappa");
    output.record("n", n);
    output.record("alternate", alternate);
    let mut csv = String::from("index,kappa_exact,kappa_float\n");
    for (i, v) in schedule.values.iter().enumerate() {
        writeln!(csv, "{},{v},{}", i + 1, fmt17(rational_to_f64(v))).expect("string write");
    }
    output.emit(&csv)
}

fn run_fit(args: &FitArgs, cfg: &BTreeMap<String, String>, out: Option<PathBuf>) -> Result<()> {
    if args.selftest {
        return selftest_fit();
    }
    let input = match &args.input {
        Some(p) => p.clone(),
        None => PathBuf::from(
            cfg.get("input")
                .ok_or_else(|| Error::parameter("fit needs --input CSV"))?,
        ),
    };
    let text = fs::read_to_string(&input)?;
    let mut lambdas = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue; // header
        }
        let mut cols = line.split(',');
        let l: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parameter(format!("bad lambda on line {}", i + 1)))?;
        let v: f64 = cols
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parameter(format!("bad value on line {}", i + 1)))?;
        lambdas.push(l);
        values.push(v);
    }
    let fit = fit_log_power(&lambdas, &values)?;
    let mut output = Output::new(out, "fit");
    output.record("input", input.display());
    output.record("points", lambdas.len());
    let mut csv = String::from(
        "exponent,log_prefactor,rms_residual,exponent_low_half,exponent_high_half,window_sensitive\n",
    );
    writeln!(
        csv,
        "{},{},{},{},{},{}",
        fmt17(fit.exponent),
        fmt17(fit.log_prefactor),
        fmt17(fit.rms_residual),
        fmt17(fit.exponent_low_half),
        fmt17(fit.exponent_high_half),
        fit.window_sensitive
    )
    .expect("string write");
    output.emit(&csv)
}

fn check(name: &str, ok: bool) -> Result<()> {
    println!("{}: {name}", if ok { "PASS" } else { "FAIL" });
    if ok {
        Ok(())
    } else {
        Err(Error::numerical(format!("selftest {name} failed"), f64::NAN))
    }
}

fn selftest_simulate() -> Result<()> {
    let params = SimParams {
        width: 16,
        height: 16,
        rho: 0.5,
        replicas: 40,
        seed: 9,
        mode: DynamicsMode::Full,
        canonical_k: Some(128),
    };
    let corr = measure_structure_function(&params, &[0.0, 0.5])?;
    // fixed particle count: S(0,0) = chi and sum_x S = 0 exactly
    check("equal-time S(0) equals chi", (corr.mean[0][0] - 0.25).abs() < 1e-10)?;
    let sum: f64 = corr.mean[1].iter().sum();
    check("fixed-count structure function sums to zero", sum.abs() < 1e-10)?;
    let ci = measure_current_integral(&params, &[0.5])?;
    let d = diffusivity_green_kubo(&ci);
    check("short-time D near 1/2", d.values[0] > 0.4 && d.values[0] < 1.0)
}

fn selftest_oracle() -> Result<()> {
    let gen = build_generator(3, 3, 4)?;
    let rows = gen.l.row_sums().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cols = gen.l.col_sums().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check("generator row sums vanish", rows < 1e-12)?;
    check("generator column sums vanish", cols < 1e-12)?;
    check("conservation law", gen.conservation_law_violation() < 1e-12)?;
    check("lambda <= 0 rejected", gen.exact_resolvent(0.0).is_err())
}

fn selftest_resolvent() -> Result<()> {
    let grid = Arc::new(Grid2d::uniform(4)?);
    let hi = resolvent_truncated(&NestedResolventSpec::exact(3, 1e-2, grid.clone()))?;
    let lo = resolvent_truncated(&NestedResolventSpec::exact(3, 1e-4, grid.clone()))?;
    check("value grows as lambda shrinks", lo.value > hi.value)?;
    check(
        "degree cap enforced",
        resolvent_truncated(&NestedResolventSpec::exact(6, 1e-2, grid)).is_err(),
    )
}

fn selftest_kintegral() -> Result<()> {
    let mut spec = KIntegralSpec::new(0.0, 1.5, 0.0, 0.0, 1e-4);
    spec.radial_cells = 16;
    check("coarse radial grid rejected", k_integral(&spec).is_err())?;
    spec.radial_cells = 512;
    spec.angular_cells = 256;
    let k = k_integral(&spec)?;
    let oracle = k_integral_isotropic_oracle(1.5, 1e-4, 4096);
    check("isotropic case matches closed form", (k - oracle).abs() < 0.01 * oracle)
}

fn selftest_kappa() -> Result<()> {
    let s = kappa_schedule(5, false)?;
    check("recursion exact", s.check_recursion().is_none())?;
    check("tail pinned at 0 and 1", {
        s.kappa(11) == &num_rational::BigRational::from_integer(0.into())
            && s.kappa(10) == &num_rational::BigRational::from_integer(1.into())
    })?;
    let path = iterate_kappa(0.0, 20);
    check("fixed point within 2^-20", (path[20] - 2.0 / 3.0).abs() < 2f64.powi(-20))
}

fn selftest_fit() -> Result<()> {
    let ls: Vec<f64> = (0..20).map(|i| 10f64.powf(-2.0 - 0.4 * i as f64)).collect();
    let vs: Vec<f64> = ls.iter().map(|l| l.ln().abs().powf(2.0 / 3.0)).collect();
    let fit = fit_log_power(&ls, &vs)?;
    check("synthetic 2/3 recovered", (fit.exponent - 2.0 / 3.0).abs() < 0.01)?;
    check("narrow window rejected", fit_log_power(&ls[..4], &vs[..4]).is_err())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parameter { .. } => 3,
        Error::Capacity { .. } => 4,
        Error::Numerical { .. } => 5,
        Error::Resolution { .. } => 6,
        Error::Io(_) => 7,
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("ASEP2D_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => run_simulate(a, &cfg, cli.out.clone()),
        Command::Oracle(a) => run_oracle(a, &cfg, cli.out.clone()),
        Command::Resolvent(a) => run_resolvent(a, &cfg, cli.out.clone()),
        Command::Kintegral(a) => run_kintegral(a, &cfg, cli.out.clone()),
        Command::Kappa(a) => run_kappa(a, &cfg, cli.out.clone()),
        Command::Fit(a) => run_fit(a, &cfg, cli.out.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
