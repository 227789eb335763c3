//! Command-line front end: JSON run configurations, experiment runners,
//! deterministic reports and CSV dumps.
//!
//! Exit status: 0 when every tested value is within tolerance, 1 when one
//! is not, 2 for invalid input, 3 when a numerical guard trips.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::besov::{exponent_from_curve, k_curve, regularity_curve, KCurve, KOptions};
use crate::error::CornerError;
use crate::modal::{neumann_log_coefficient, solve_poisson_with, SolverOptions};
use crate::sector::{
    build_spectrum, laplacian_residual_annulus, rel_l2, Bc, Cutoff, Grid, ScalarField, SectorGeometry,
};
use crate::sif::{decompose_with, term_position, DecomposeOptions};
use crate::verify::{self, bump, corpus_source, manufactured_singular, sif_compare, sif_row, Comparison, Suite};

pub const TOOL: &str = "cornerlab";

#[derive(Error, Debug)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Numerical(#[from] CornerError),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(e) if e.guard_name().is_some() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

// ---- configuration ----

/// Opening angle: radians, or a string such as `"3/2 pi"`, `"pi/4"`, `"2pi/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Radians(f64),
    Text(String),
}

/// Parse `p/q pi` style strings into a reduced `(p, q)`.
pub fn parse_pi_fraction(text: &str) -> Option<(i64, i64)> {
    let s: String = text.chars().filter(|c| !c.is_whitespace() && *c != '*').collect::<String>().to_lowercase();
    let at = s.find("pi")?;
    let (before, after) = (&s[..at], &s[at + 2..]);
    let (p, q1): (i64, i64) = match before.split_once('/') {
        Some((a, b)) => (a.parse().ok()?, b.parse().ok()?),
        None if before.is_empty() => (1, 1),
        None => (before.parse().ok()?, 1),
    };
    let q2: i64 = match after.strip_prefix('/') {
        Some(b) => b.parse().ok()?,
        None if after.is_empty() => 1,
        None => return None,
    };
    let q = q1.checked_mul(q2)?;
    (p > 0 && q > 0).then_some((p, q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub omega: OmegaSpec,
    #[serde(default = "one")]
    pub radius: f64,
    pub bc: Bc,
}

impl GeometryConfig {
    pub fn build(&self) -> CliResult<SectorGeometry> {
        let g = match &self.omega {
            OmegaSpec::Radians(w) => SectorGeometry::new(*w, self.radius, self.bc),
            OmegaSpec::Text(t) => {
                let (p, q) = parse_pi_fraction(t)
                    .ok_or_else(|| CliError::Validation(format!("cannot read omega '{t}' (expected e.g. \"3/2 pi\")")))?;
                SectorGeometry::pi_frac(p, q, self.radius, self.bc)
            }
        };
        g.map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// Right-hand side catalog. Radii are fractions of the sector radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// `x^i y^j chi(r)` with a smooth cutoff equal to 1 below `cutoff[0]`.
    Monomial {
        i: u32,
        j: u32,
        #[serde(default = "default_monomial_cutoff")]
        cutoff: [f64; 2],
    },
    /// `amplitude * bump(r) * e_term(phi)`, `term` counting positive exponents from 1.
    ModalBump {
        #[serde(default = "one_usize")]
        term: usize,
        #[serde(default = "default_bump_inner")]
        inner: f64,
        #[serde(default = "default_bump_outer")]
        outer: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    GaussianBump { x0: f64, y0: f64, width: f64, #[serde(default = "one")] amplitude: f64 },
    /// `f = -Delta (chi s_1)`, exact solution `chi s_1` and `S_1 = 1`.
    Manufactured {
        #[serde(default = "default_manufactured_cutoff")]
        cutoff: [f64; 2],
    },
    /// Annular bump with a non-eigen angular profile (the coefficient corpus source).
    Corpus,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Corpus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_phi: usize,
    pub r_min_ratio: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_r: 800, n_phi: 128, r_min_ratio: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative L2 error against an exact solution.
    pub solve_rel_l2: f64,
    /// Truncated angular energy of the data.
    pub tail: f64,
    /// Relative L2 gap between a decomposition and its solution.
    pub reconstruction: f64,
    /// Relative agreement of coefficient formulas.
    pub sif_agreement: f64,
    /// Absolute error of a measured regularity exponent.
    pub exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { solve_rel_l2: 1e-5, tail: 0.05, reconstruction: 1e-10, sif_agreement: 1e-4, exponent: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub k: usize,
    pub eps: f64,
    pub cutoff: [f64; 2],
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { k: 0, eps: 0.05, cutoff: [0.05, 0.1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BesovTarget {
    /// The first singular function `r^lambda_1 e_1`.
    #[default]
    Singular,
    /// The solution for the configured source.
    Solution,
    /// The source itself.
    Source,
}

/// The scan uses its own grid: the K-curve needs many octaves near the apex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesovConfig {
    pub target: BesovTarget,
    pub p: f64,
    /// Fixed `(s0, s2)`; escalates from `(0, 2)` when absent.
    pub levels: Option<[u32; 2]>,
    pub expect: Option<f64>,
    pub grid: GridConfig,
}

impl Default for BesovConfig {
    fn default() -> Self {
        BesovConfig {
            target: BesovTarget::Singular,
            p: 2.0,
            levels: None,
            expect: None,
            grid: GridConfig { n_r: 1200, n_phi: 64, r_min_ratio: 1e-10 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    Decompose,
    Sif,
    BesovScan,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Decompose => "decompose",
            Experiment::Sif => "sif",
            Experiment::BesovScan => "besov-scan",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub besov: BesovConfig,
    /// `sif` also runs the twelve-case corpus.
    #[serde(default)]
    pub corpus: bool,
    #[serde(default = "default_suite")]
    pub suite: Suite,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_modes() -> usize {
    32
}
fn default_suite() -> Suite {
    Suite::Fast
}
fn default_monomial_cutoff() -> [f64; 2] {
    [0.3, 0.6]
}
fn default_bump_inner() -> f64 {
    0.2
}
fn default_bump_outer() -> f64 {
    0.7
}
fn default_manufactured_cutoff() -> [f64; 2] {
    [0.2, 0.8]
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} = {v} must be positive")))
    }
}

fn check_window(name: &str, w: [f64; 2]) -> CliResult<()> {
    if w[0] > 0.0 && w[0] < w[1] && w[1] <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} = {w:?} must satisfy 0 < a < b <= 1")))
    }
}

fn check_grid(name: &str, g: &GridConfig) -> CliResult<()> {
    if g.n_r < 32 || g.n_phi < 8 {
        return Err(CliError::Validation(format!("{name}: need n_r >= 32 and n_phi >= 8")));
    }
    if !(g.r_min_ratio > 0.0 && g.r_min_ratio < 1.0) {
        return Err(CliError::Validation(format!("{name}: r_min_ratio must lie in (0, 1)")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<SectorGeometry> {
        if self.experiments.is_empty() {
            return Err(CliError::Validation("experiment list is empty".into()));
        }
        let geom = self.geometry.build()?;
        check_grid("grid", &self.grid)?;
        check_grid("besov.grid", &self.besov.grid)?;
        if self.modes == 0 {
            return Err(CliError::Validation("modes must be positive".into()));
        }
        let t = &self.tolerances;
        for (n, v) in [
            ("solve_rel_l2", t.solve_rel_l2),
            ("tail", t.tail),
            ("reconstruction", t.reconstruction),
            ("sif_agreement", t.sif_agreement),
            ("exponent", t.exponent),
        ] {
            positive(&format!("tolerances.{n}"), v)?;
        }
        positive("decompose.eps", self.decompose.eps)?;
        check_window("decompose.cutoff", self.decompose.cutoff)?;
        if !(self.besov.p > 1.0 && self.besov.p.is_finite()) {
            return Err(CliError::Validation("besov.p must lie in (1, inf)".into()));
        }
        if let Some([a, b]) = self.besov.levels {
            if a >= b || b > 4 {
                return Err(CliError::Validation("besov.levels must satisfy s0 < s2 <= 4".into()));
            }
        }
        match &self.source {
            SourceSpec::Monomial { cutoff, .. } | SourceSpec::Manufactured { cutoff } => check_window("source.cutoff", *cutoff)?,
            SourceSpec::ModalBump { term, inner, outer, .. } => {
                if *term == 0 {
                    return Err(CliError::Validation("source.term counts from 1".into()));
                }
                check_window("source.inner/outer", [*inner, *outer])?;
            }
            SourceSpec::GaussianBump { width, .. } => positive("source.width", *width)?,
            SourceSpec::Corpus => {}
        }
        Ok(geom)
    }
}

// ---- sources ----

fn source_field(spec: &SourceSpec, geom: &SectorGeometry, grid: &Grid) -> CliResult<ScalarField> {
    let rr = geom.radius;
    Ok(match *spec {
        SourceSpec::Monomial { i, j, cutoff } => {
            let chi = Cutoff::smooth(cutoff[0] * rr, cutoff[1] * rr)?;
            ScalarField::from_fn(grid, |r, p| {
                let (x, y) = (r * p.cos(), r * p.sin());
                x.powi(i as i32) * y.powi(j as i32) * chi.value(r)
            })
        }
        SourceSpec::ModalBump { term, inner, outer, amplitude } => {
            let spec = build_spectrum(geom, term + 2);
            let pos = term_position(&spec, term)?;
            ScalarField::from_fn(grid, |r, p| amplitude * bump(r, inner * rr, outer * rr) * spec.eval(pos, p))
        }
        SourceSpec::GaussianBump { x0, y0, width, amplitude } => ScalarField::from_fn(grid, |r, p| {
            let (dx, dy) = (r * p.cos() - x0, r * p.sin() - y0);
            amplitude * (-(dx * dx + dy * dy) / (width * width)).exp()
        }),
        SourceSpec::Manufactured { cutoff } => {
            let chi = Cutoff::smooth(cutoff[0] * rr, cutoff[1] * rr)?;
            ScalarField::from_fn(grid, manufactured_singular(geom, &chi).1)
        }
        SourceSpec::Corpus => corpus_source(geom, grid),
    })
}

fn exact_solution(spec: &SourceSpec, geom: &SectorGeometry, grid: &Grid) -> CliResult<Option<ScalarField>> {
    Ok(match *spec {
        SourceSpec::Manufactured { cutoff } => {
            let chi = Cutoff::smooth(cutoff[0] * geom.radius, cutoff[1] * geom.radius)?;
            Some(ScalarField::from_fn(grid, manufactured_singular(geom, &chi).0))
        }
        _ => None,
    })
}

// ---- report ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
}

/// A reported number. Tested values carry their tolerance and verdict;
/// informational ones have both unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub comparison: Option<Comparison>,
    pub pass: Option<bool>,
}

impl Scalar {
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Scalar { name: name.into(), value, tolerance: None, comparison: None, pass: None }
    }

    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Scalar::from(verify::Check::below(name, value, tol))
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Scalar::from(verify::Check::equal(name, ok))
    }
}

impl From<verify::Check> for Scalar {
    fn from(c: verify::Check) -> Self {
        Scalar { name: c.name, value: c.value, tolerance: Some(c.tolerance), comparison: Some(c.comparison), pass: Some(c.pass) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub scalars: Vec<Scalar>,
    pub tables: Vec<Table>,
    /// File names written under the output directory.
    pub artifacts: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub inputs: RunConfig,
    pub experiments: Vec<ExperimentReport>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![];
        for e in &self.experiments {
            out.push(format!("{} [{}]", e.experiment.name(), if e.pass { "PASS" } else { "FAIL" }));
            for s in &e.scalars {
                let tag = match s.pass {
                    Some(true) => format!(" (tol {:.1e}) ok", s.tolerance.unwrap_or(f64::NAN)),
                    Some(false) => format!(" (tol {:.1e}) FAILED", s.tolerance.unwrap_or(f64::NAN)),
                    None => String::new(),
                };
                out.push(format!("  {} = {:.6e}{tag}", s.name, s.value));
            }
        }
        out
    }
}

struct Sink<'a> {
    out: Option<&'a Path>,
    written: Vec<String>,
}

impl Sink<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
        let Some(dir) = self.out else { return Ok(()) };
        let mut w = csv::Writer::from_path(dir.join(name)).map_err(io_err)?;
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn field(&mut self, name: &str, value_col: &str, u: &ScalarField) -> CliResult<()> {
        let g = &u.grid;
        let rows = (0..g.r.len()).flat_map(|i| {
            (0..g.phi.len()).map(move |j| vec![fmt(g.r[i]), fmt(g.phi[j]), fmt(u.values[[i, j]])])
        });
        self.csv(name, &["r", "phi_rad", value_col], rows)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn curve_rows(c: &KCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    c.t_samples
        .iter()
        .zip(&c.k_values)
        .map(|(t, k)| vec![fmt(*t), fmt(*k), c.levels.0.to_string(), c.levels.1.to_string()])
}

// ---- experiments ----

struct Ctx<'a> {
    cfg: &'a RunConfig,
    geom: SectorGeometry,
    grid: Grid,
}

impl Ctx<'_> {
    fn solver(&self) -> SolverOptions {
        SolverOptions { n_modes: self.cfg.modes, tail_tol: self.cfg.tolerances.tail, ..Default::default() }
    }
}

fn run_solve(cx: &Ctx, sink: &mut Sink) -> CliResult<(Vec<Scalar>, Vec<Table>)> {
    let tol = &cx.cfg.tolerances;
    let f = source_field(&cx.cfg.source, &cx.geom, &cx.grid)?;
    let sol = solve_poisson_with(&f, &cx.geom, &cx.solver())?;
    let rr = cx.geom.radius;
    let mut scalars = vec![
        Scalar::below("tail energy ratio", sol.tail_ratio, tol.tail),
        Scalar::info("max |u|", sol.u.max_abs()),
        Scalar::info("L2 norm of u", sol.u.l2_norm()),
        Scalar::info(
            "max abs second-order grid residual on 0.1R < r < 0.9R",
            laplacian_residual_annulus(&sol.u, &f, 0.1 * rr, 0.9 * rr)?,
        ),
    ];
    if cx.geom.bc == Bc::Neumann {
        scalars.push(Scalar::info("Neumann log coefficient", neumann_log_coefficient(&f, &cx.geom)?));
    }
    let mut tables = vec![];
    if let Some(exact) = exact_solution(&cx.cfg.source, &cx.geom, &cx.grid)? {
        scalars.push(Scalar::below("relative L2 error against exact solution", rel_l2(&sol.u, &exact)?, tol.solve_rel_l2));
        let g = &cx.cfg.grid;
        let mut rows = vec![];
        for div in [4, 2, 1] {
            let grid = Grid::new(cx.geom.radius, cx.geom.omega, g.n_r / div, g.n_phi, g.r_min_ratio)?;
            let f = source_field(&cx.cfg.source, &cx.geom, &grid)?;
            let e = exact_solution(&cx.cfg.source, &cx.geom, &grid)?.expect("manufactured");
            let u = solve_poisson_with(&f, &cx.geom, &cx.solver())?.u;
            rows.push(vec![json!(g.n_r / div), json!(g.n_phi), json!(rel_l2(&u, &e)?)]);
        }
        tables.push(Table { name: "radial refinement".into(), columns: vec!["n_r".into(), "n_phi".into(), "rel_l2".into()], rows });
    }
    sink.field("solve_u.csv", "u", &sol.u)?;
    Ok((scalars, tables))
}

fn run_decompose(cx: &Ctx, sink: &mut Sink) -> CliResult<(Vec<Scalar>, Vec<Table>)> {
    let tol = &cx.cfg.tolerances;
    let dc = &cx.cfg.decompose;
    let f = source_field(&cx.cfg.source, &cx.geom, &cx.grid)?;
    let chi = Cutoff::smooth(dc.cutoff[0] * cx.geom.radius, dc.cutoff[1] * cx.geom.radius)?;
    let opts = DecomposeOptions { eps: dc.eps, solver: cx.solver(), ..Default::default() };
    let d = decompose_with(&f, &cx.geom, dc.k, &chi, &opts)?;
    let mut scalars = vec![];
    for (j, t) in d.singular.iter().enumerate() {
        scalars.push(Scalar::info(format!("S_{} (lambda = {:.6})", j + 1, t.lambda), t.coefficient));
    }
    scalars.push(Scalar::below("reconstruction relative L2", rel_l2(&d.reconstruct(), &d.solution)?, tol.reconstruction));
    if let Some(c) = d.meta.taylor_condition {
        scalars.push(Scalar::info("Taylor fit condition number", c));
    }
    if let Some(c) = d.meta.neumann_log {
        scalars.push(Scalar::info("Neumann log coefficient", c));
    }
    if matches!(cx.cfg.source, SourceSpec::Manufactured { .. }) {
        let s1 = d.singular.first().map_or(f64::NAN, |t| t.coefficient);
        scalars.push(Scalar::below("|S_1 - 1| for the manufactured source", (s1 - 1.0).abs(), tol.sif_agreement));
    }
    let columns = ["j", "lambda", "log_power", "phi_factor", "coefficient"].map(String::from).to_vec();
    let rows = d
        .singular
        .iter()
        .enumerate()
        .map(|(j, t)| vec![json!(j + 1), json!(t.lambda), json!(t.log_power), json!(t.phi_factor), json!(t.coefficient)])
        .collect();
    sink.field("decompose_regular.csv", "u_regular", &d.regular)?;
    Ok((scalars, vec![Table { name: "singular terms".into(), columns, rows }]))
}

fn run_sif(cx: &Ctx, sink: &mut Sink) -> CliResult<(Vec<Scalar>, Vec<Table>)> {
    let tol = cx.cfg.tolerances.sif_agreement;
    let f = source_field(&cx.cfg.source, &cx.geom, &cx.grid)?;
    let row = sif_compare(&cx.geom, &f)?;
    let mut scalars = vec![
        Scalar::info("S_1 direct (cone kernel)", row.direct),
        Scalar::info("S_1 dual", row.dual),
        Scalar::info("S_1 Mellin residue", row.mellin),
        Scalar::below("direct/dual/Mellin worst pairwise relative gap", row.worst_pairwise(), tol),
        Scalar::info("S_1 direct (truncated kernel)", row.direct_truncated),
        Scalar::below(
            "truncated direct/dual relative gap",
            (row.dual_truncated - row.direct_truncated).abs() / row.direct_truncated.abs(),
            tol,
        ),
    ];
    if matches!(cx.cfg.source, SourceSpec::Manufactured { .. }) {
        scalars.push(Scalar::below("|S_1 - 1| for the manufactured source", (row.direct - 1.0).abs(), tol));
    }
    let mut tables = vec![];
    if cx.cfg.corpus {
        let g = cx.cfg.grid;
        let rows: std::result::Result<Vec<_>, CornerError> =
            verify::sif_corpus().par_iter().map(|geom| sif_row(geom, g.n_r, g.n_phi)).collect();
        let rows = rows?;
        let worst = rows.iter().map(|r| r.worst_pairwise()).fold(0.0f64, f64::max);
        scalars.push(Scalar::below("corpus worst pairwise relative gap", worst, tol));
        let columns = ["case", "omega_rad", "direct", "dual", "mellin", "worst_pairwise_rel", "pass"];
        tables.push(Table {
            name: "coefficient corpus".into(),
            columns: columns.map(String::from).to_vec(),
            rows: rows
                .iter()
                .map(|r| {
                    let w = r.worst_pairwise();
                    vec![json!(r.label), json!(r.omega), json!(r.direct), json!(r.dual), json!(r.mellin), json!(w), json!(w < tol)]
                })
                .collect(),
        });
        sink.csv(
            "sif_corpus.csv",
            &columns,
            rows.iter().map(|r| {
                let w = r.worst_pairwise();
                vec![r.label.clone(), fmt(r.omega), fmt(r.direct), fmt(r.dual), fmt(r.mellin), fmt(w), (w < tol).to_string()]
            }),
        )?;
    }
    Ok((scalars, tables))
}

fn run_besov(cx: &Ctx, sink: &mut Sink) -> CliResult<(Vec<Scalar>, Vec<Table>)> {
    let b = &cx.cfg.besov;
    let geom = cx.geom;
    let grid = Grid::new(geom.radius, geom.omega, b.grid.n_r, b.grid.n_phi, b.grid.r_min_ratio)?;
    let spec = build_spectrum(&geom, 4);
    let pos = spec.first_positive();
    let lam = spec.lambda(pos);
    let u = match b.target {
        BesovTarget::Singular => ScalarField::from_fn(&grid, |r, p| r.powf(lam) * spec.eval(pos, p)),
        BesovTarget::Solution => {
            let f = source_field(&cx.cfg.source, &geom, &grid)?;
            solve_poisson_with(&f, &geom, &cx.solver())?.u
        }
        BesovTarget::Source => source_field(&cx.cfg.source, &geom, &grid)?,
    };
    let opts = KOptions::default();
    let curve = match b.levels {
        Some([s0, s2]) => k_curve(&u, (s0, s2), b.p, &opts)?,
        None => regularity_curve(&u, b.p, &opts)?,
    };
    let est = exponent_from_curve(&curve);
    // r^lambda e_1 sits in B^{lambda + 2/p}_{p,infty}; the solution inherits it when S_1 != 0
    let natural = lam + 2.0 / b.p;
    let expect = b.expect.or(match b.target {
        BesovTarget::Singular => Some(natural),
        BesovTarget::Solution if natural < 3.9 => Some(natural),
        _ => None,
    });
    let mut scalars = vec![
        Scalar::info("exponent", est.exponent),
        Scalar::info("fitted slope", est.slope),
        Scalar::info("fit residual", est.fit_residual),
        Scalar::info("level s0", est.levels.0 as f64),
        Scalar::info("level s2", est.levels.1 as f64),
        Scalar::info("at bracket ceiling", if est.at_ceiling { 1.0 } else { 0.0 }),
        Scalar::flag("K and K/t monotone", curve.invariants_hold()),
    ];
    if let Some(e) = expect {
        scalars.push(Scalar::info("expected exponent", e));
        scalars.push(Scalar::below("|exponent - expected|", (est.exponent - e).abs(), cx.cfg.tolerances.exponent));
    }
    sink.csv("k_curve.csv", &["t", "K", "level_lo", "level_hi"], curve_rows(&curve))?;
    Ok((scalars, vec![]))
}

fn run_verify(cx: &Ctx) -> CliResult<(Vec<Scalar>, Vec<Table>)> {
    let results = verify::run_suite(cx.cfg.suite);
    // timings stay out of the report so it is reproducible
    let scalars = results.iter().map(|r| Scalar::flag(format!("criterion {}: {}", r.id, r.title), r.pass())).collect();
    Ok((scalars, vec![]))
}

/// Run every configured experiment. Artifacts go to `out` when given.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> CliResult<Report> {
    let geom = cfg.validate()?;
    let grid = Grid::new(geom.radius, geom.omega, cfg.grid.n_r, cfg.grid.n_phi, cfg.grid.r_min_ratio)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let cx = Ctx { cfg, geom, grid };
    let mut reports = vec![];
    for &exp in &cfg.experiments {
        let mut sink = Sink { out, written: vec![] };
        let (scalars, tables) = match exp {
            Experiment::Solve => run_solve(&cx, &mut sink)?,
            Experiment::Decompose => run_decompose(&cx, &mut sink)?,
            Experiment::Sif => run_sif(&cx, &mut sink)?,
            Experiment::BesovScan => run_besov(&cx, &mut sink)?,
            Experiment::Verify => run_verify(&cx)?,
        };
        let pass = scalars.iter().all(|s| s.pass != Some(false));
        reports.push(ExperimentReport { experiment: exp, scalars, tables, artifacts: sink.written, pass });
    }
    let report = Report {
        metadata: Metadata { tool: TOOL.into(), version: env!("CARGO_PKG_VERSION").into() },
        inputs: cfg.clone(),
        pass: reports.iter().all(|r| r.pass),
        experiments: reports,
    };
    if let Some(dir) = out {
        fs::write(dir.join("report.json"), report.to_json()).map_err(io_err)?;
    }
    Ok(report)
}

// ---- command line ----

#[derive(Parser, Debug)]
#[command(name = "cornerlab", version, about = "Poisson problems on plane sectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report.json and CSV dumps.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "CORNERLAB_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Run the experiments listed in the configuration.
    Run,
    Solve,
    Decompose,
    Sif,
    BesovScan,
    /// Run the acceptance suite (`fast` or `full`).
    Verify { suite: String },
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let path = path.ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

fn report_error(e: &CliError) -> i32 {
    match e {
        CliError::Numerical(inner) if inner.guard_name().is_some() => {
            eprintln!("guard tripped: {}: {inner}", inner.guard_name().unwrap_or_default())
        }
        _ => eprintln!("error: {e}"),
    }
    e.exit_code()
}

fn verify_command(suite: &str, out: Option<&Path>) -> i32 {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let results = verify::run_suite(suite);
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(dir) = out {
        let written = fs::create_dir_all(dir)
            .and_then(|_| fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&results).expect("serializes")));
        if let Err(e) = written {
            return report_error(&io_err(e));
        }
    }
    if results.iter().all(|r| r.pass()) {
        0
    } else {
        1
    }
}

/// Parse arguments, run, and return the exit status.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let only = match &cli.command {
        Command::Verify { suite } => return verify_command(suite, cli.out.as_deref()),
        Command::Run => None,
        Command::Solve => Some(Experiment::Solve),
        Command::Decompose => Some(Experiment::Decompose),
        Command::Sif => Some(Experiment::Sif),
        Command::BesovScan => Some(Experiment::BesovScan),
    };
    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    if let Some(exp) = only {
        cfg.experiments = vec![exp];
    }
    match run(&cfg, cli.out.as_deref()) {
        Ok(report) => {
            if cli.out.is_some() {
                for line in report.summary_lines() {
                    println!("{line}");
                }
            } else {
                println!("{}", report.to_json());
            }
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => report_error(&e),
    }
}
