//! Command-line driver: verification suites plus CSV-emitting scans over
//! the damped star-graph wave operator. Every run is reproducible from the
//! resolved config and seed, and every CSV gets a sidecar JSON echoing that
//! config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use starwave::approx::{
    convergence_study, converge_csv_row, exact_resolvent_negz, fem_solve, DampingKind,
    DampingProfile, MeshProblem, CONVERGE_CSV_HEADER,
};
use starwave::evolve::{
    energy, evolve_csv_row, solution_at, vertex_report, EvolutionProblem, EVOLVE_CSV_HEADER,
};
use starwave::graphfun::{energy_norm, vertex_trace};
use starwave::numfmt::{loglog_slope, sig17};
use starwave::resolvent::{apply_generator, resolvent_apply};
use starwave::spectra::{
    c0_constant, chain_residuals, eig_chain, pseudospectrum_scan, quasimode_axis, seed_dictionary,
    C0Grid, ZGrid, PSEUDOSPEC_CSV_HEADER,
};
use starwave::{Complex64, EdgeFunction, StarGraph, StatePair};

const EIGCHAIN_CSV_HEADER: &str = "k,norm,residual,re_u0,im_u0";

#[derive(Parser)]
#[command(name = "starwave", version, about = "Damped wave operator on a star graph: verification suites and CSV scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-module verification suites and write a JSON report.
    Verify(CommonArgs),
    /// Scan a z-grid for certified resolvent-norm lower bounds (CSV).
    Pseudospec(CommonArgs),
    /// Evolve seeded in-domain initial data and tabulate energy (CSV).
    Evolve(CommonArgs),
    /// Build the critical-coupling generalized eigenchain (CSV).
    Eigchain(CommonArgs),
    /// Norm-resolvent convergence study of smeared dampings (CSV).
    Converge(CommonArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Flat key=value config file mirroring the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of star edges.
    #[arg(long)]
    edges: Option<usize>,
    /// Damping coupling as RE,IM.
    #[arg(long)]
    alpha: Option<String>,
    /// Spectral point as RE,IM.
    #[arg(long)]
    z: Option<String>,
    /// Scan grid as RMIN,RMAX,RN,IMIN,IMAX,IN.
    #[arg(long)]
    zgrid: Option<String>,
    /// Output path (CSV, or JSON report for verify).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for dictionaries and initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override NAME=VAL (resolvent, chain, fem, energy, domain).
    #[arg(long = "tol", value_name = "NAME=VAL")]
    tol: Vec<String>,
    /// Final time for evolve.
    #[arg(long)]
    tmax: Option<f64>,
    /// Output time step for evolve.
    #[arg(long)]
    tstep: Option<f64>,
    /// Chain length for eigchain.
    #[arg(long = "chain-len")]
    chain_len: Option<usize>,
    /// Comma-separated smearing scales for converge.
    #[arg(long)]
    nlist: Option<String>,
    /// Finite elements per edge for FEM solves.
    #[arg(long)]
    elements: Option<usize>,
}

#[derive(Serialize, Clone)]
struct GridParams {
    re_min: f64,
    re_max: f64,
    re_count: usize,
    im_min: f64,
    im_max: f64,
    im_count: usize,
}

/// Fully resolved run configuration; serialized verbatim as the sidecar.
#[derive(Serialize, Clone)]
struct ResolvedConfig {
    command: String,
    edges: usize,
    alpha: [f64; 2],
    z: [f64; 2],
    zgrid: GridParams,
    out: String,
    seed: u64,
    tol: BTreeMap<String, f64>,
    tmax: f64,
    tstep: f64,
    chain_len: usize,
    nlist: Vec<u32>,
    elements: usize,
}

enum Failure {
    /// Bad flags, bad config file, or parameters outside a command's domain.
    Config(String),
    /// A verification suite ran and did not meet its tolerance.
    Suite(String),
}

type RunResult<T> = Result<T, Failure>;

fn config_err<T>(msg: impl Into<String>) -> RunResult<T> {
    Err(Failure::Config(msg.into()))
}

impl From<starwave::Error> for Failure {
    fn from(e: starwave::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("io error: {e}"))
    }
}

fn parse_complex(name: &str, s: &str) -> RunResult<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return config_err(format!("{name}: expected RE,IM, got `{s}`"));
    }
    let re = parts[0].trim().parse::<f64>();
    let im = parts[1].trim().parse::<f64>();
    match (re, im) {
        (Ok(re), Ok(im)) => Ok([re, im]),
        _ => config_err(format!("{name}: expected two floats, got `{s}`")),
    }
}

fn parse_grid(s: &str) -> RunResult<GridParams> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return config_err(format!("zgrid: expected RMIN,RMAX,RN,IMIN,IMAX,IN, got `{s}`"));
    }
    let f = |i: usize| -> RunResult<f64> {
        parts[i]
            .parse::<f64>()
            .map_err(|_| Failure::Config(format!("zgrid: bad float `{}`", parts[i])))
    };
    let n = |i: usize| -> RunResult<usize> {
        parts[i]
            .parse::<usize>()
            .map_err(|_| Failure::Config(format!("zgrid: bad count `{}`", parts[i])))
    };
    Ok(GridParams {
        re_min: f(0)?,
        re_max: f(1)?,
        re_count: n(2)?,
        im_min: f(3)?,
        im_max: f(4)?,
        im_count: n(5)?,
    })
}

fn parse_nlist(s: &str) -> RunResult<Vec<u32>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| Failure::Config(format!("nlist: bad integer `{p}`")))
        })
        .collect()
}

// Defaults sit above two measured numerical floors: closed-form residuals
// evaluated through analytic Gram matrices cancel large terms and bottom
// out near 1e-7 relative, and the same-mesh Dirac solve at the default
// element count has a discretization floor near 6e-3.
fn default_tols() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("resolvent".into(), 1e-6),
        ("chain".into(), 1e-10),
        ("fem".into(), 1e-2),
        ("energy".into(), 1e-8),
        ("domain".into(), 1e-7),
    ])
}

/// Merge precedence: built-in defaults, then the config file, then flags.
fn resolve(command: &str, args: &CommonArgs) -> RunResult<ResolvedConfig> {
    let mut cfg = ResolvedConfig {
        command: command.into(),
        edges: 2,
        alpha: [1.0, 0.0],
        z: if command == "converge" { [-1.0, 0.0] } else { [1.0, 0.0] },
        zgrid: GridParams {
            re_min: 0.1,
            re_max: 2.0,
            re_count: 41,
            im_min: -2.0,
            im_max: 2.0,
            im_count: 41,
        },
        out: format!("{command}.{}", if command == "verify" { "json" } else { "csv" }),
        seed: 7,
        tol: default_tols(),
        tmax: 5.0,
        tstep: 0.1,
        chain_len: 5,
        nlist: vec![4, 8, 16, 32, 64, 128, 256, 512],
        elements: 600,
    };

    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("config file {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config_err(format!("config line {}: expected key=value", lineno + 1));
            };
            apply_kv(&mut cfg, key.trim(), value.trim())?;
        }
    }

    if let Some(v) = args.edges {
        cfg.edges = v;
    }
    if let Some(s) = &args.alpha {
        cfg.alpha = parse_complex("alpha", s)?;
    }
    if let Some(s) = &args.z {
        cfg.z = parse_complex("z", s)?;
    }
    if let Some(s) = &args.zgrid {
        cfg.zgrid = parse_grid(s)?;
    }
    if let Some(p) = &args.out {
        cfg.out = p.display().to_string();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    for entry in &args.tol {
        let Some((name, value)) = entry.split_once('=') else {
            return config_err(format!("tol: expected NAME=VAL, got `{entry}`"));
        };
        set_tol(&mut cfg.tol, name.trim(), value.trim())?;
    }
    if let Some(v) = args.tmax {
        cfg.tmax = v;
    }
    if let Some(v) = args.tstep {
        cfg.tstep = v;
    }
    if let Some(v) = args.chain_len {
        cfg.chain_len = v;
    }
    if let Some(s) = &args.nlist {
        cfg.nlist = parse_nlist(s)?;
    }
    if let Some(v) = args.elements {
        cfg.elements = v;
    }

    if cfg.edges == 0 {
        return config_err("edges must be positive");
    }
    if cfg.chain_len == 0 {
        return config_err("chain-len must be positive");
    }
    if !(cfg.tstep > 0.0) || !(cfg.tmax >= 0.0) {
        return config_err("evolve needs tmax >= 0 and tstep > 0");
    }
    Ok(cfg)
}

fn set_tol(tols: &mut BTreeMap<String, f64>, name: &str, value: &str) -> RunResult<()> {
    if !tols.contains_key(name) {
        let known: Vec<&str> = tols.keys().map(String::as_str).collect();
        return config_err(format!("unknown tolerance `{name}`; known: {}", known.join(", ")));
    }
    let v: f64 = value
        .parse()
        .map_err(|_| Failure::Config(format!("tolerance {name}: bad float `{value}`")))?;
    if !(v > 0.0) {
        return config_err(format!("tolerance {name} must be positive"));
    }
    tols.insert(name.into(), v);
    Ok(())
}

fn apply_kv(cfg: &mut ResolvedConfig, key: &str, value: &str) -> RunResult<()> {
    match key {
        "edges" => {
            cfg.edges = value
                .parse()
                .map_err(|_| Failure::Config(format!("edges: bad integer `{value}`")))?
        }
        "alpha" => cfg.alpha = parse_complex("alpha", value)?,
        "z" => cfg.z = parse_complex("z", value)?,
        "zgrid" => cfg.zgrid = parse_grid(value)?,
        "out" => cfg.out = value.into(),
        "seed" => {
            cfg.seed = value
                .parse()
                .map_err(|_| Failure::Config(format!("seed: bad integer `{value}`")))?
        }
        "tmax" => {
            cfg.tmax = value
                .parse()
                .map_err(|_| Failure::Config(format!("tmax: bad float `{value}`")))?
        }
        "tstep" => {
            cfg.tstep = value
                .parse()
                .map_err(|_| Failure::Config(format!("tstep: bad float `{value}`")))?
        }
        "chain-len" => {
            cfg.chain_len = value
                .parse()
                .map_err(|_| Failure::Config(format!("chain-len: bad integer `{value}`")))?
        }
        "nlist" => cfg.nlist = parse_nlist(value)?,
        "elements" => {
            cfg.elements = value
                .parse()
                .map_err(|_| Failure::Config(format!("elements: bad integer `{value}`")))?
        }
        _ => {
            if let Some(name) = key.strip_prefix("tol.") {
                set_tol(&mut cfg.tol, name, value)?;
            } else {
                return config_err(format!("unknown config key `{key}`"));
            }
        }
    }
    Ok(())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn alpha_of(cfg: &ResolvedConfig) -> Complex64 {
    c(cfg.alpha[0], cfg.alpha[1])
}

fn z_of(cfg: &ResolvedConfig) -> Complex64 {
    c(cfg.z[0], cfg.z[1])
}

fn zgrid_of(cfg: &ResolvedConfig) -> ZGrid {
    let g = &cfg.zgrid;
    ZGrid {
        re_min: g.re_min,
        re_max: g.re_max,
        re_count: g.re_count,
        im_min: g.im_min,
        im_max: g.im_max,
        im_count: g.im_count,
    }
}

/// Write `body` to `cfg.out` and the resolved config to `cfg.out + ".json"`.
fn write_with_sidecar(cfg: &ResolvedConfig, body: &str) -> RunResult<()> {
    std::fs::write(&cfg.out, body)?;
    let sidecar = format!("{}.json", cfg.out);
    let mut echo = serde_json::to_string_pretty(cfg)
        .map_err(|e| Failure::Config(format!("config echo: {e}")))?;
    echo.push('\n');
    std::fs::write(sidecar, echo)?;
    Ok(())
}

/// Seeded spline state in the domain of the coupling: the raw flux defect
/// is cancelled by a cubic bump on the first edge, leaving traces intact.
fn domain_spline_data(alpha: Complex64, graph: StarGraph, seed: u64) -> RunResult<StatePair> {
    let dict = seed_dictionary(graph, 12, seed);
    let f = dict[8].u.clone();
    let g = dict[9].v.clone();
    let flux: Complex64 = f.edges().iter().map(|e| e.eval_deriv(0.0)).sum();
    let (g0, _) = vertex_trace(&g);
    let defect = flux + alpha * g0;
    let bump = EdgeFunction::poly(&[c(0.0, 0.0), -defect, 2.0 * defect, -defect], 0.0, 1.0)?;
    let mut f = f;
    *f.edge_mut(0) = f.edge(0).add(&bump);
    let state = StatePair::new(f, g)?;
    let scale = energy_norm(&state)?;
    Ok(state.scale(c(1.0 / scale, 0.0)))
}

fn cmd_pseudospec(cfg: &ResolvedConfig) -> RunResult<()> {
    let alpha = alpha_of(cfg);
    if alpha == c(cfg.edges as f64, 0.0) {
        return config_err(format!(
            "alpha = {} is the critical coupling for {} edges; the vertex-family bound degenerates there",
            alpha, cfg.edges
        ));
    }
    let records = pseudospectrum_scan(alpha, &zgrid_of(cfg), cfg.edges, cfg.seed)?;
    let mut body = String::from(PSEUDOSPEC_CSV_HEADER);
    body.push('\n');
    for r in &records {
        body.push_str(&r.csv_row());
        body.push('\n');
    }
    write_with_sidecar(cfg, &body)?;
    println!("wrote {} ({} rows)", cfg.out, records.len());
    Ok(())
}

fn cmd_evolve(cfg: &ResolvedConfig) -> RunResult<()> {
    let alpha = alpha_of(cfg);
    let graph = StarGraph::new(cfg.edges)?;
    let data = domain_spline_data(alpha, graph, cfg.seed)?;
    let problem = EvolutionProblem::new(alpha, data.u.clone(), data.v.clone(), cfg.tol["domain"])?;
    let steps = (cfg.tmax / cfg.tstep).round() as usize;
    let mut body = String::from(EVOLVE_CSV_HEADER);
    body.push('\n');
    for k in 0..=steps {
        let t = k as f64 * cfg.tstep;
        let state = solution_at(&problem, t)?;
        let e = energy(&problem, t)?;
        let (u0, robin_abs, continuity) = vertex_report(&state, alpha);
        body.push_str(&evolve_csv_row(t, e, u0, robin_abs, continuity));
        body.push('\n');
    }
    write_with_sidecar(cfg, &body)?;
    println!("wrote {} ({} rows)", cfg.out, steps + 1);
    Ok(())
}

fn cmd_eigchain(cfg: &ResolvedConfig) -> RunResult<()> {
    let z = z_of(cfg);
    let chain = eig_chain(cfg.edges, z, cfg.chain_len)?;
    let residuals = chain_residuals(&chain, cfg.edges, z, cfg.tol["domain"])?;
    let mut body = String::from(EIGCHAIN_CSV_HEADER);
    body.push('\n');
    for (k, (state, res)) in chain.iter().zip(&residuals).enumerate() {
        let norm = energy_norm(state)?;
        let (u0, _) = vertex_trace(&state.u);
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            k,
            sig17(norm),
            sig17(*res),
            sig17(u0.re),
            sig17(u0.im)
        );
    }
    write_with_sidecar(cfg, &body)?;
    println!("wrote {} ({} rows)", cfg.out, chain.len());
    Ok(())
}

fn cmd_converge(cfg: &ResolvedConfig) -> RunResult<()> {
    let alpha = alpha_of(cfg);
    let z = z_of(cfg);
    let graph = StarGraph::new(cfg.edges)?;
    let dict = seed_dictionary(graph, 3, cfg.seed);
    let mesh = MeshProblem::for_params(z, cfg.elements)?;
    let profile = DampingProfile::standard(graph, 1)?;
    let rows = convergence_study(alpha, z, &dict, &cfg.nlist, &mesh, &profile)?;
    let mut body = String::from(CONVERGE_CSV_HEADER);
    body.push('\n');
    for row in &rows {
        body.push_str(&converge_csv_row(row));
        body.push('\n');
    }
    write_with_sidecar(cfg, &body)?;
    println!("wrote {} ({} rows)", cfg.out, rows.len());
    Ok(())
}

#[derive(Serialize)]
struct SuiteResult {
    name: String,
    pass: bool,
    measured: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct VerifyReport {
    config: ResolvedConfig,
    suites: Vec<SuiteResult>,
    constants: BTreeMap<String, f64>,
    pass: bool,
}

/// Closed-form resolvent roundtrip `(W - z) R F = F` over a seeded
/// dictionary, measured in the energy norm.
fn suite_resolvent(cfg: &ResolvedConfig) -> RunResult<SuiteResult> {
    let tol = cfg.tol["resolvent"];
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        let graph = StarGraph::new(n)?;
        let dict = seed_dictionary(graph, 8, cfg.seed);
        for (alpha, z) in [(c(1.0, 0.5), c(0.8, 1.1)), (c(n as f64 + 0.3, -0.4), c(2.0, -0.7))] {
            for data in &dict {
                let out = resolvent_apply(alpha, z, data, cfg.tol["domain"])?;
                let img = apply_generator(&out.state, alpha, 1e-5)?;
                let residual = img.sub(&out.state.scale(z)).sub(data);
                worst = worst.max(energy_norm(&residual)? / energy_norm(data)?);
            }
        }
    }
    Ok(SuiteResult {
        name: "resolvent".into(),
        pass: worst <= tol,
        measured: BTreeMap::from([("worst_residual".into(), worst), ("tolerance".into(), tol)]),
    })
}

/// Generalized eigenchain recurrence at the critical coupling.
fn suite_chains(cfg: &ResolvedConfig) -> RunResult<SuiteResult> {
    let tol = cfg.tol["chain"];
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        let chain = eig_chain(n, c(0.9, 0.7), 5)?;
        for r in chain_residuals(&chain, n, c(0.9, 0.7), cfg.tol["domain"])? {
            worst = worst.max(r);
        }
    }
    Ok(SuiteResult {
        name: "chains".into(),
        pass: worst <= tol,
        measured: BTreeMap::from([("worst_residual".into(), worst), ("tolerance".into(), tol)]),
    })
}

/// Quasimode families: axis decay rate, transition constants, and the
/// certified lower bound against the vertex-family bound on a small grid.
fn suite_spectra(cfg: &ResolvedConfig, constants: &mut BTreeMap<String, f64>) -> RunResult<SuiteResult> {
    let ns = [8u32, 16, 32, 64, 128];
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = ns
        .iter()
        .map(|&n| quasimode_axis(1.0, n, cfg.edges).map(|q| q.residual_ratio))
        .collect::<Result<_, _>>()?;
    let axis_slope = loglog_slope(&xs, &ys);
    constants.insert("axis_slope".into(), axis_slope);

    let mut c0_min = f64::INFINITY;
    for n in 1..=4usize {
        let v = c0_constant(n, &C0Grid::default());
        constants.insert(format!("c0_{n}"), v);
        c0_min = c0_min.min(v);
    }

    let alpha = c(cfg.edges as f64 + 0.5, 0.0);
    let grid = ZGrid { re_min: 0.2, re_max: 1.8, re_count: 5, im_min: -1.5, im_max: 1.5, im_count: 5 };
    let records = pseudospectrum_scan(alpha, &grid, cfg.edges, cfg.seed)?;
    let mut min_ratio = f64::INFINITY;
    for r in &records {
        min_ratio = min_ratio.min(r.norm_lower_estimate / r.eta_bound);
    }

    let pass = (axis_slope + 1.0).abs() <= 0.1 && c0_min > 0.0 && min_ratio >= 0.95;
    Ok(SuiteResult {
        name: "spectra".into(),
        pass,
        measured: BTreeMap::from([
            ("axis_slope".into(), axis_slope),
            ("c0_min".into(), c0_min),
            ("grid_bound_ratio".into(), min_ratio),
        ]),
    })
}

/// Closed-form evolution: conservative, dissipative, and bounded-growth
/// energy behavior on seeded in-domain data.
fn suite_evolve(cfg: &ResolvedConfig, constants: &mut BTreeMap<String, f64>) -> RunResult<SuiteResult> {
    let graph = StarGraph::new(cfg.edges)?;
    let nf = cfg.edges as f64;
    let tol_energy = cfg.tol["energy"];
    let mut measured = BTreeMap::new();
    let mut pass = true;

    let trajectory = |alpha: Complex64| -> RunResult<Vec<f64>> {
        let data = domain_spline_data(alpha, graph, cfg.seed)?;
        let p = EvolutionProblem::new(alpha, data.u.clone(), data.v.clone(), cfg.tol["domain"])?;
        Ok((0..=10)
            .map(|k| energy(&p, 0.5 * k as f64))
            .collect::<Result<Vec<f64>, _>>()?)
    };

    let es = trajectory(c(0.0, 2.0))?;
    let drift = es.iter().map(|e| (e - es[0]).abs()).fold(0.0, f64::max) / es[0];
    measured.insert("conservative_drift".into(), drift);
    pass &= drift <= tol_energy;

    let es = trajectory(c(-1.0, 0.0))?;
    let rise = es.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    measured.insert("dissipative_max_rise".into(), rise);
    pass &= rise <= 1e-12 * es[0];

    let mut fitted = 0.0f64;
    for alpha in [c(nf + 1.0, 0.0), c(nf - 1.5, 0.0)] {
        let es = trajectory(alpha)?;
        let shift = (alpha - c(nf, 0.0)).norm();
        let bound = (1.0 + 1.0 / (shift * shift)) * es[0];
        fitted = fitted.max(es.iter().fold(0.0f64, |a, &e| a.max(e)) / bound);
    }
    measured.insert("fitted_c".into(), fitted);
    constants.insert("fitted_c".into(), fitted);
    pass &= fitted.is_finite() && fitted <= 100.0;

    Ok(SuiteResult { name: "evolve".into(), pass, measured })
}

/// FEM against the closed form: same-mesh Dirac gap under the fem
/// tolerance, plus the smeared convergence slope on a short scale list.
fn suite_fem(cfg: &ResolvedConfig, constants: &mut BTreeMap<String, f64>) -> RunResult<SuiteResult> {
    let alpha = c(1.0, 0.0);
    let z = c(-1.0, 0.0);
    let tol = cfg.tol["fem"];
    let graph = StarGraph::new(cfg.edges)?;
    let dict = seed_dictionary(graph, 3, cfg.seed);
    let mesh = MeshProblem::for_params(z, cfg.elements)?;

    let mut gap = 0.0f64;
    for data in &dict {
        let exact = exact_resolvent_negz(alpha, z, data)?;
        let fem = fem_solve(alpha, DampingKind::Dirac, z, data, &mesh)?;
        gap = gap.max(fem.nodal.h1_gap_exact(&exact.u, z.norm_sqr()) / energy_norm(data)?);
    }

    let profile = DampingProfile::standard(graph, 1)?;
    let rows = convergence_study(alpha, z, &dict, &[4, 16, 64], &mesh, &profile)?;
    let slope = rows.last().map(|r| r.slope_running).unwrap_or(f64::NAN);
    constants.insert("converge_slope".into(), slope);

    let pass = gap <= tol && (-1.0..=-0.1).contains(&slope);
    Ok(SuiteResult {
        name: "fem".into(),
        pass,
        measured: BTreeMap::from([
            ("dirac_gap".into(), gap),
            ("tolerance".into(), tol),
            ("converge_slope".into(), slope),
        ]),
    })
}

fn cmd_verify(cfg: &ResolvedConfig) -> RunResult<()> {
    let mut constants = BTreeMap::new();
    let suites = vec![
        suite_resolvent(cfg)?,
        suite_chains(cfg)?,
        suite_spectra(cfg, &mut constants)?,
        suite_evolve(cfg, &mut constants)?,
        suite_fem(cfg, &mut constants)?,
    ];
    let pass = suites.iter().all(|s| s.pass);

    for s in &suites {
        let vals: Vec<String> =
            s.measured.iter().map(|(k, v)| format!("{k} = {:.3e}", v)).collect();
        println!("{} {:<10} {}", if s.pass { "ok  " } else { "FAIL" }, s.name, vals.join(", "));
    }
    println!(
        "verify: {} of {} suites passed",
        suites.iter().filter(|s| s.pass).count(),
        suites.len()
    );

    let report = VerifyReport { config: cfg.clone(), suites, constants, pass };
    let mut body = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Config(format!("report: {e}")))?;
    body.push('\n');
    std::fs::write(&cfg.out, body)?;
    println!("wrote {}", cfg.out);

    if pass {
        Ok(())
    } else {
        Err(Failure::Suite("one or more verification suites failed".into()))
    }
}

fn main() {
    let cli = Cli::parse();
    let (name, args, runner): (&str, &CommonArgs, fn(&ResolvedConfig) -> RunResult<()>) =
        match &cli.command {
            Command::Verify(a) => ("verify", a, cmd_verify),
            Command::Pseudospec(a) => ("pseudospec", a, cmd_pseudospec),
            Command::Evolve(a) => ("evolve", a, cmd_evolve),
            Command::Eigchain(a) => ("eigchain", a, cmd_eigchain),
            Command::Converge(a) => ("converge", a, cmd_converge),
        };
    let outcome = resolve(name, args).and_then(|cfg| runner(&cfg));
    match outcome {
        Ok(()) => {}
        Err(Failure::Config(msg)) => {
            eprintln!("starwave {name}: {msg}");
            std::process::exit(2);
        }
        Err(Failure::Suite(msg)) => {
            eprintln!("starwave {name}: {msg}");
            std::process::exit(1);
        }
    }
}
