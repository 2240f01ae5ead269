//! Command-line entry point. Exit status: 0 on success, 1 on invalid input or a
//! failed verification, 2 on a numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::approx::{self, ApproxError, Norm, TestFunction};
use crate::bernstein::{build_basis, BasisError};
use crate::gspace::{GSpaceError, GSplineSpace};
use crate::oracle::{self, OracleConfig, OracleError};
use crate::sectionspace::{make_section_space_with_tol, GeneratorPair, SectionError, SectionSpec, DEFAULT_REL_TOL};
use crate::tmesh::{describe, load_mesh_json, uniform_grid, MeshError, TMesh};

pub const TOL_ENV: &str = "GENTESS_TOL";

#[derive(Parser, Debug)]
#[command(name = "gentess", version, about = "Generalized spline spaces over T-meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Write output to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Sup,
    L2,
}

/// `n` or `n1,n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair(pub [usize; 2]);

fn parse_pair(text: &str) -> Result<Pair, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| format!("'{s}' is not a non-negative integer"));
    match parts.as_slice() {
        [a] => num(a).map(|v| Pair([v, v])),
        [a, b] => Ok(Pair([num(a)?, num(b)?])),
        _ => Err(format!("expected N or N1,N2, got '{text}'")),
    }
}

/// `GxG`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid(pub usize, pub usize);

fn parse_grid(text: &str) -> Result<Grid, String> {
    let (a, b) = text.split_once(['x', 'X']).ok_or(format!("expected GxG, got '{text}'"))?;
    let g = |s: &str| match s.trim().parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("grid size '{s}' must be an integer >= 2")),
    };
    Ok(Grid(g(a)?, g(b)?))
}

#[derive(Args, Debug, Clone, Default)]
pub struct SpaceArgs {
    /// Generator pair for both directions: hyperbolic, trigonometric, polynomial, or a JSON object.
    #[arg(long)]
    pub generators: Option<String>,
    /// Orders: N or N1,N2.
    #[arg(long, value_parser = parse_pair)]
    pub n: Option<Pair>,
    /// Smoothness: R or R1,R2.
    #[arg(long, value_parser = parse_pair)]
    pub r: Option<Pair>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshCommand,
    },
    /// Sample the Bernstein-like basis (or a derivative) on an interval.
    Basis {
        #[arg(long, default_value = "hyperbolic")]
        generators: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        b: f64,
        /// Derivative order.
        #[arg(long, default_value_t = 0)]
        order: usize,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Dimension formula terms and total.
    Dim {
        mesh: PathBuf,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Sample the dual basis function attached to a determining point.
    BasisFn {
        mesh: PathBuf,
        /// Index into the minimal determining set.
        #[arg(long)]
        xi: usize,
        #[arg(long, value_parser = parse_grid, default_value = "50x50")]
        grid: Grid,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Compare the dimension formula, the determining set and the brute-force nullity.
    Verify {
        mesh: PathBuf,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Quasi-interpolate a registered test function.
    Interp {
        mesh: PathBuf,
        /// Test function name.
        #[arg(long)]
        f: String,
        #[command(flatten)]
        space: SpaceArgs,
    },
    /// Errors and observed orders of the quasi-interpolant under dyadic refinement.
    Convergence {
        /// Coarsest mesh (default: 2x2 grid on the unit square).
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long)]
        f: String,
        #[arg(long, value_enum, default_value_t = NormArg::Sup)]
        norm: NormArg,
        #[command(flatten)]
        space: SpaceArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum MeshCommand {
    /// Validate a mesh and print its classification and statistics.
    Check { mesh: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SectionError> for CliError {
    fn from(e: SectionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BasisError> for CliError {
    fn from(e: BasisError) -> Self {
        match e {
            BasisError::InvalidSpace { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GSpaceError> for CliError {
    fn from(e: GSpaceError) -> Self {
        match &e {
            GSpaceError::Basis { source: BasisError::InvalidSpace { .. }, .. } => CliError::Validation(e.to_string()),
            GSpaceError::Basis { .. }
            | GSpaceError::SingularDiagonal { .. }
            | GSpaceError::Undetermined { .. }
            | GSpaceError::Stalled { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Space(s) => s.into(),
            OracleError::RankAmbiguous { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::Space(s) => s.into(),
            ApproxError::Mesh(m) => m.into(),
            ApproxError::Basis(b) => b.into(),
            ApproxError::DependentSpan { .. } | ApproxError::Precondition(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Relative tolerance from `GENTESS_TOL`, default 1e-9.
pub fn tolerance() -> Result<f64, CliError> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(DEFAULT_REL_TOL),
        Ok(text) => match text.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
            _ => Err(CliError::Validation(format!("{TOL_ENV}='{text}' must be a number in (0, 1)"))),
        },
    }
}

pub fn parse_generators(text: &str) -> Result<GeneratorPair, CliError> {
    let pair = match text.trim() {
        "hyperbolic" => GeneratorPair::HYPERBOLIC,
        "trigonometric" => GeneratorPair::TRIGONOMETRIC,
        "polynomial" => GeneratorPair::PolynomialDegenerate,
        other => serde_json::from_str(other).map_err(|e| {
            CliError::Validation(format!(
                "generators must be hyperbolic, trigonometric, polynomial or a JSON object like \
                 {{\"kind\": \"ExpTrig\", \"params\": {{\"alpha\": 0, \"beta\": 1}}}} ({e})"
            ))
        })?,
    };
    pair.validate()?;
    Ok(pair)
}

fn read_mesh(path: &Path) -> Result<(TMesh, crate::tmesh::MeshDocument), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(load_mesh_json(&text)?)
}

/// Section specs and smoothness from the document, then the overrides.
fn resolve_space(
    doc: Option<&crate::tmesh::MeshDocument>,
    args: &SpaceArgs,
) -> Result<([SectionSpec; 2], [usize; 2]), CliError> {
    let default = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
    let mut specs = doc.and_then(|d| d.sections.as_ref()).map_or([default; 2], |p| [p.s, p.t]);
    if let Some(g) = &args.generators {
        let pair = parse_generators(g)?;
        for s in &mut specs {
            s.generators = pair;
        }
    }
    if let Some(Pair(n)) = args.n {
        specs[0].n = n[0];
        specs[1].n = n[1];
    }
    let r = match (args.r, doc.and_then(|d| d.smoothness)) {
        (Some(Pair(r)), _) => r,
        (None, Some(r)) if args.n.is_none() => r,
        _ => [specs[0].n.saturating_sub(2) / 2, specs[1].n.saturating_sub(2) / 2],
    };
    for d in 0..2 {
        if specs[d].n < 3 {
            return Err(CliError::Validation(format!("n{} = {} must be at least 3", d + 1, specs[d].n)));
        }
        if specs[d].n < 2 * r[d] + 2 {
            return Err(CliError::Validation(format!(
                "n{k} - 1 >= 2 r{k} + 1 fails for n{k} = {}, r{k} = {}",
                specs[d].n,
                r[d],
                k = d + 1
            )));
        }
    }
    Ok((specs, r))
}

fn load_space(path: &Path, args: &SpaceArgs) -> Result<GSplineSpace, CliError> {
    let (mesh, doc) = read_mesh(path)?;
    let (specs, r) = resolve_space(Some(&doc), args)?;
    Ok(GSplineSpace::new(mesh, specs, r)?)
}

fn test_function(name: &str) -> Result<TestFunction, CliError> {
    TestFunction::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = TestFunction::ALL.iter().map(|f| f.name()).collect();
        CliError::Validation(format!("unknown test function '{name}'; known: {}", known.join(", ")))
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs one command and returns its output text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let format = cli.format;
    let mut out = String::new();
    match &cli.command {
        Command::Mesh { action: MeshCommand::Check { mesh } } => {
            let (mesh, _) = read_mesh(mesh)?;
            match format {
                Format::Csv => out.push_str(&describe(&mesh)),
                Format::Json => {
                    let stats = mesh.stats().ok();
                    let cycle: Option<Vec<(String, String)>> = mesh.cycle.as_ref().map(|c| {
                        c.iter()
                            .map(|&v| {
                                let w = &mesh.vertices[v];
                                (crate::tmesh::format_coord(w.x), crate::tmesh::format_coord(w.y))
                            })
                            .collect()
                    });
                    out = to_json(&json!({
                        "cells": mesh.cells.len(),
                        "vertices": mesh.vertices.len(),
                        "t_junctions": mesh.t_junction_count(),
                        "composite_edges": mesh.composites.len(),
                        "regular": mesh.is_regular(),
                        "cycle": cycle,
                        "stats": stats,
                    }));
                }
            }
        }
        Command::Basis { generators, n, a, b, order, samples } => {
            let pair = parse_generators(generators)?;
            let space = make_section_space_with_tol(pair, *n, *a, *b, tolerance()?)?;
            let basis = build_basis(&space)?;
            if *order >= *n {
                return Err(CliError::Validation(format!("derivative order {order} must be below n = {n}")));
            }
            let m = (*samples).max(2);
            let xs: Vec<f64> = (0..m).map(|k| a + (b - a) * k as f64 / (m - 1) as f64).collect();
            let rows: Vec<Vec<f64>> = xs.iter().map(|&x| basis.eval_all(*order, x)).collect();
            match format {
                Format::Csv => {
                    out.push('s');
                    for i in 0..*n {
                        let _ = write!(out, ",B_{i}");
                    }
                    out.push('\n');
                    for (x, row) in xs.iter().zip(&rows) {
                        let _ = write!(out, "{x}");
                        for v in row {
                            let _ = write!(out, ",{v}");
                        }
                        out.push('\n');
                    }
                }
                Format::Json => {
                    out = to_json(&json!({ "space": space, "order": order, "s": xs, "values": rows }));
                }
            }
        }
        Command::Dim { mesh, space } => {
            let space = load_space(mesh, space)?;
            let terms = space.dimension_terms()?;
            let total = terms.total();
            match format {
                Format::Csv => {
                    out.push_str("term,value\n");
                    let _ = writeln!(out, "vertices,{}", terms.vertices);
                    let _ = writeln!(out, "horizontal_edges,{}", terms.horizontal_edges);
                    let _ = writeln!(out, "vertical_edges,{}", terms.vertical_edges);
                    let _ = writeln!(out, "cells,{}", terms.cells);
                    let _ = writeln!(out, "dim,{total}");
                }
                Format::Json => {
                    out = to_json(&json!({ "n": space.n, "r": space.r, "terms": terms, "dim": total }));
                }
            }
        }
        Command::BasisFn { mesh, xi, grid, space } => {
            let space = load_space(mesh, space)?;
            let m = space.minimal_determining_set().len();
            if *xi >= m {
                return Err(CliError::Validation(format!(
                    "--xi {xi} is out of range; the determining set has {m} points"
                )));
            }
            let psi = space.basis_function(*xi)?;
            let [x0, x1, y0, y1] = space.mesh.bounding_box();
            let Grid(gs, gt) = *grid;
            let mut samples = Vec::new();
            for a in 0..gs {
                let s = x0 + (x1 - x0) * a as f64 / (gs - 1) as f64;
                for b in 0..gt {
                    let t = y0 + (y1 - y0) * b as f64 / (gt - 1) as f64;
                    if let Ok(v) = space.eval_spline(&psi, s, t, 0, 0) {
                        samples.push((s, t, v));
                    }
                }
            }
            match format {
                Format::Csv => {
                    out.push_str("s,t,value\n");
                    for (s, t, v) in samples {
                        let _ = writeln!(out, "{s},{t},{v}");
                    }
                }
                Format::Json => {
                    let point = space.minimal_determining_set()[*xi];
                    out = to_json(&json!({
                        "xi": xi,
                        "point": point,
                        "support": space.support(&psi, approx::SUPPORT_TOL),
                        "samples": samples,
                    }));
                }
            }
        }
        Command::Verify { mesh, space } => {
            let space = load_space(mesh, space)?;
            let tol = tolerance()?;
            let formula = space.dimension()?;
            let mds = space.minimal_determining_set().len();
            let report = oracle::analyze(&space.mesh, space.sections, space.r, OracleConfig::default())?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let assignment: Vec<f64> = (0..mds).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let spline = space.complete_coefficients(&assignment)?;
            let jumps = space.smoothness_jumps(&spline.coeffs, 200);
            let smooth = jumps.max_relative < 100.0 * tol;
            let pass = !report.ambiguous && formula == mds && mds == report.nullity && smooth;
            let status = if report.ambiguous {
                "AMBIGUOUS"
            } else if pass {
                "PASS"
            } else {
                "FAIL"
            };
            match format {
                Format::Csv => {
                    out.push_str("formula,mds,oracle,max_jump,status\n");
                    let _ = writeln!(out, "{formula},{mds},{},{:e},{status}", report.nullity, jumps.max_relative);
                }
                Format::Json => {
                    out = to_json(&json!({
                        "formula": formula,
                        "mds": mds,
                        "oracle": report,
                        "smoothness": jumps,
                        "status": status,
                    }));
                }
            }
            if report.ambiguous {
                emit(cli, &out)?;
                return Err(CliError::Numerical("oracle rank is ambiguous".into()));
            }
            if !pass {
                emit(cli, &out)?;
                return Err(CliError::Validation(format!(
                    "verification failed: formula {formula}, determining set {mds}, oracle {}",
                    report.nullity
                )));
            }
        }
        Command::Interp { mesh, f, space } => {
            let func = test_function(f)?;
            let space = load_space(mesh, space)?;
            let q = approx::quasi_interpolant(&space, &func)?;
            let sup = approx::error_norm(&space, &q.coeffs, &func, Norm::Sup);
            let l2 = approx::error_norm(&space, &q.coeffs, &func, Norm::L2);
            let [n1, n2] = space.n;
            match format {
                Format::Csv => {
                    let _ = writeln!(out, "# f = {}", func.formula());
                    let _ = writeln!(out, "# sup_error = {sup:e}");
                    let _ = writeln!(out, "# l2_error = {l2:e}");
                    let _ = writeln!(out, "# completion_residual = {:e}", q.residual);
                    out.push_str("cell,i,j,coefficient\n");
                    for cell in 0..space.num_cells() {
                        for i in 0..n1 {
                            for j in 0..n2 {
                                let _ = writeln!(out, "{cell},{i},{j},{}", q.coeffs.get(cell, i, j));
                            }
                        }
                    }
                }
                Format::Json => {
                    let cells: Vec<&[f64]> = (0..space.num_cells()).map(|c| q.coeffs.cell(c)).collect();
                    out = to_json(&json!({
                        "f": func.name(),
                        "n": space.n,
                        "r": space.r,
                        "sup_error": sup,
                        "l2_error": l2,
                        "completion_residual": q.residual,
                        "coefficients": cells,
                    }));
                }
            }
        }
        Command::Convergence { mesh, levels, f, norm, space } => {
            let func = test_function(f)?;
            if *levels < 2 {
                return Err(CliError::Validation("--levels must be at least 2".into()));
            }
            let (base, doc) = match mesh {
                Some(p) => {
                    let (m, d) = read_mesh(p)?;
                    (m, Some(d))
                }
                None => (TMesh::new(uniform_grid(2, 2, 0.into(), 1.into(), 0.into(), 1.into()))?, None),
            };
            let (specs, r) = resolve_space(doc.as_ref(), space)?;
            let family = approx::dyadic_family(&base, *levels)?;
            let norm = match norm {
                NormArg::Sup => Norm::Sup,
                NormArg::L2 => Norm::L2,
            };
            let report = approx::convergence_study(&family, specs, r, &func, norm)?;
            match format {
                Format::Csv => {
                    out.push_str("H,error,order\n");
                    for l in &report.levels {
                        let order = l.order.map(|o| o.to_string()).unwrap_or_default();
                        let _ = writeln!(out, "{},{:e},{order}", l.h, l.error);
                    }
                }
                Format::Json => out = to_json(&report),
            }
        }
    }
    Ok(out)
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        // a second initialization (e.g. in tests) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let out = execute(cli)?;
    emit(cli, &out)
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("gentess").chain(args.iter().copied())).unwrap()
    }

    fn mesh_path(name: &str) -> String {
        format!("{}/meshes/{name}.json", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn pairs_and_grids_parse() {
        assert_eq!(parse_pair("4").unwrap(), Pair([4, 4]));
        assert_eq!(parse_pair("4,5").unwrap(), Pair([4, 5]));
        assert!(parse_pair("4,x").is_err());
        assert_eq!(parse_grid("20x30").unwrap(), Grid(20, 30));
        assert!(parse_grid("1x5").is_err());
    }

    #[test]
    fn generator_names_and_json() {
        assert_eq!(parse_generators("hyperbolic").unwrap(), GeneratorPair::HYPERBOLIC);
        let g = parse_generators(r#"{"kind": "ExpTrig", "params": {"alpha": 0.5, "beta": 2}}"#).unwrap();
        assert_eq!(g, GeneratorPair::ExpTrig { alpha: 0.5, beta: 2.0 });
        assert!(matches!(parse_generators("cubic"), Err(CliError::Validation(_))));
    }

    #[test]
    fn dim_of_single_cell() {
        let path = mesh_path("single_cell");
        let out = execute(&parse(&["dim", &path])).unwrap();
        assert!(out.ends_with("dim,16\n"), "{out}");
        let out = execute(&parse(&["dim", &path, "--n", "5", "--r", "1"])).unwrap();
        assert!(out.ends_with("dim,25\n"));
    }

    #[test]
    fn verify_passes_on_tjunction_mesh() {
        let out = execute(&parse(&["verify", &mesh_path("tjunction_2")])).unwrap();
        let row = out.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], fields[1]);
        assert_eq!(fields[1], fields[2]);
        assert_eq!(fields[4], "PASS");
    }

    #[test]
    fn invalid_overrides_are_validation_errors() {
        let path = mesh_path("single_cell");
        let err = execute(&parse(&["dim", &path, "--n", "4", "--r", "2"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert_eq!(main_with_args(["gentess", "dim", "/nonexistent.json"]), 1);
        assert_eq!(main_with_args(["gentess", "frobnicate"]), 1);
        let err = execute(&parse(&["interp", &path, "--f", "nope"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn basis_csv_has_partition_of_unity() {
        let out = execute(&parse(&["basis", "--n", "4", "--samples", "11"])).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), "s,B_0,B_1,B_2,B_3");
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[1..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_json_round_trips() {
        let cli = parse(&["convergence", "--levels", "3", "--f", "gauss", "--format", "json"]);
        let out = execute(&cli).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["levels"].as_array().unwrap().len(), 3);
        assert_eq!(v["k"], 3);
    }
}
