//! Report builders behind the `orbiton` binary.
//!
//! Every command produces a [`Report`]: a list of named pass/fail checks
//! plus command-specific data, serialised as JSON with a `"schema"` version,
//! as CSV (one row per check) or as text (one line per check). Exit codes:
//! `0` all checks pass, `2` some check failed, `3` bad input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::atlas::{self, OrbitKind};
use crate::classify::{self, MdBarTag};
use crate::coadjoint::{self, Functional};
use crate::error::{Error, Result};
use crate::family::{Md4Family, Md4Label, GENUINE};
use crate::fixtures;
use crate::fredholm::{self, ThresholdPolicy};
use crate::kindex::{self, LoopDomain};
use crate::lie::LieAlgebra;

pub const SCHEMA: u32 = 1;
pub const SEED_ENV: &str = "ORBITON_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 3;

#[derive(Parser, Debug, Clone)]
#[command(name = "orbiton", version, about = "Coadjoint orbits, MD4 classification and index bookkeeping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice; `ORBITON_SEED` takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report file; stdout when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Tolerance override `KEY=VALUE` (keys: atlas, tangency, cosine, parity, gap).
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    pub tolerances: Vec<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Classify a builtin or user-supplied algebra.
    Classify(ClassifyArgs),
    /// Sample coadjoint orbits and compare them with the closed-form models.
    Atlas(AtlasArgs),
    /// Rank and tangency checks of the generic-orbit foliations.
    Foliation(FoliationArgs),
    /// Winding numbers, connecting maps and six-term exactness fixtures.
    Kindex(KindexArgs),
    /// Numerical Fredholm indices of the two operators of Aff R.
    Fredholm(FredholmArgs),
    /// Every suite with modest sizes.
    All,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ClassifyArgs {
    /// Builtin algebra name (see `--list`); all builtins when neither this
    /// nor `--input` is given.
    #[arg(long)]
    pub builtin: Option<String>,
    /// JSON algebra file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Print the builtin names and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug, Clone)]
pub struct AtlasArgs {
    /// MD4 family, e.g. `g442`.
    #[arg(long)]
    pub family: String,
    /// Family parameters, comma separated; defaults when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    /// Base functional `a,b,c,d`; without it every stratum is sampled.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Vec<f64>,
    /// Orbit points per base.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Random bases per stratum when no base is given.
    #[arg(long, default_value_t = 20)]
    pub bases: usize,
    /// Directory for CSV point clouds and JSON model descriptors.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FoliationArgs {
    /// A single family; all twelve when absent.
    #[arg(long)]
    pub family: Option<String>,
    /// Random points for the rank check.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Orbits sampled for the tangency check.
    #[arg(long, default_value_t = 5)]
    pub orbits: usize,
    /// Points per sampled orbit.
    #[arg(long, default_value_t = 40)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone)]
pub struct KindexArgs {
    /// Quadrature cells per winding integral.
    #[arg(long, default_value_t = kindex::DEFAULT_GRID)]
    pub grid: usize,
    /// Extra case to echo; `affR` runs the Fredholm suite.
    #[arg(long)]
    pub case: Option<String>,
    /// Write the fixture tables as JSON files into this directory.
    #[arg(long)]
    pub export_fixtures: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FredholmArgs {
    /// Only this operator (1 or 2).
    #[arg(long)]
    pub which: Option<u8>,
    /// Truncation: the grid covers `e^-L ≤ |x| ≤ e^L`.
    #[arg(long = "L", default_value_t = 8.0)]
    pub l: f64,
    /// Grid points per half-line.
    #[arg(long = "N", default_value_t = 2048)]
    pub n: usize,
    /// Skip the (6,1024)/(8,2048)/(10,4096) convergence table.
    #[arg(long)]
    pub no_ladder: bool,
    /// Also report singular values of the non-identity part.
    #[arg(long)]
    pub compact_spectrum: bool,
}

impl Default for FredholmArgs {
    fn default() -> Self {
        FredholmArgs { which: None, l: 8.0, n: 2048, no_ladder: true, compact_spectrum: false }
    }
}

/// Check thresholds used by the suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub atlas: f64,
    pub tangency: f64,
    pub cosine: f64,
    pub parity: f64,
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atlas: 1e-8, tangency: 1e-6, cosine: 0.999, parity: 1e-6, gap: 100.0 }
    }
}

impl Tolerances {
    pub fn with_overrides(mut self, items: &[String]) -> Result<Self> {
        for item in items {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Parse(format!("tolerance `{item}` is not KEY=VALUE")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("tolerance value `{v}` is not a number")))?;
            match k.trim() {
                "atlas" => self.atlas = v,
                "tangency" => self.tangency = v,
                "cosine" => self.cosine = v,
                "parity" => self.parity = v,
                "gap" => self.gap = v,
                other => return Err(Error::Parse(format!("unknown tolerance key `{other}`"))),
            }
        }
        Ok(self)
    }
}

/// Everything a suite needs besides its own arguments.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl RunConfig {
    /// Seed from `common`, overridden by `ORBITON_SEED` when set.
    pub fn from_common(common: &Common) -> Result<Self> {
        let seed = match std::env::var(SEED_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| Error::Parse(format!("{SEED_ENV}={s} is not an unsigned integer")))?,
            Err(_) => common.seed,
        };
        Ok(RunConfig { seed, tolerances: Tolerances::default().with_overrides(&common.tolerances)? })
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0, tolerances: Tolerances::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(flatten)]
    pub data: serde_json::Map<String, Value>,
    /// Files written by the run.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

impl Report {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            schema: SCHEMA,
            command: command.into(),
            seed: cfg.seed,
            pass: true,
            checks: Vec::new(),
            data: serde_json::Map::new(),
            files: Vec::new(),
        }
    }

    fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    fn set(&mut self, key: &str, v: impl Serialize) {
        self.data.insert(key.into(), serde_json::to_value(v).expect("report data serialises"));
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serialises") + "\n",
            Format::Text => {
                let mut s = String::new();
                for c in &self.checks {
                    let status = if c.pass { "PASS" } else { "FAIL" };
                    if c.detail.is_empty() {
                        let _ = writeln!(s, "{}: {status}", c.name);
                    } else {
                        let _ = writeln!(s, "{}: {status} ({})", c.name, c.detail);
                    }
                }
                let n_pass = self.checks.iter().filter(|c| c.pass).count();
                let _ = writeln!(s, "{}: {n_pass}/{} checks passed", self.command, self.checks.len());
                s
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["check", "status", "detail"]).expect("in-memory write");
                for c in &self.checks {
                    w.write_record([c.name.as_str(), if c.pass { "PASS" } else { "FAIL" }, c.detail.as_str()])
                        .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
            }
        }
    }
}

/// Exit code for an error that aborted a run.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::Parse(_)
        | Error::UnknownFamily(_)
        | Error::UnknownSpace(_)
        | Error::BadParams(_)
        | Error::DimensionMismatch { .. }
        | Error::NotCubic
        | Error::AntisymmetryViolation { .. }
        | Error::JacobiViolation { .. } => EXIT_INPUT_ERROR,
        _ => EXIT_CHECK_FAILED,
    }
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<Report> {
    match cmd {
        Command::Classify(a) => run_classify(a, cfg),
        Command::Atlas(a) => run_atlas(a, cfg),
        Command::Foliation(a) => run_foliation(a, cfg),
        Command::Kindex(a) => run_kindex_report(a, cfg),
        Command::Fredholm(a) => run_fredholm(a, cfg),
        Command::All => run_all(cfg),
    }
}

#[derive(Clone, Debug, Serialize)]
struct AlgebraReport {
    name: String,
    dim: usize,
    /// MD4 family for 4-dimensional input, otherwise the MD̄ tag.
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Md4Label>,
    md_bar: MdBarTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    md4: Option<classify::Md4Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    md4_error: Option<String>,
    exponential: classify::ExponentialCheck,
    derived_dims: Vec<usize>,
}

fn md_bar_name(t: MdBarTag) -> &'static str {
    match t {
        MdBarTag::Abelian => "abelian",
        MdBarTag::AffR => "aff-r",
        MdBarTag::AffC => "aff-c",
        MdBarTag::NotMdBar => "not-md-bar",
    }
}

fn classify_one(name: &str, g: &LieAlgebra) -> (AlgebraReport, Check) {
    let md_bar = classify::classify_md_bar(g).tag;
    let exponential = classify::is_exponential(g);
    let (mut family, mut label, mut md4, mut md4_error) = (md_bar_name(md_bar).to_string(), None, None, None);
    let mut ok = true;
    if g.dim() == 4 {
        match classify::classify_md4(g) {
            Ok(c) => {
                family = c.label.family.name().to_string();
                ok = c.label.family != Md4Family::Unclassified;
                label = Some(c.label.clone());
                md4 = Some(c);
            }
            Err(Error::NotMd4 { reason }) => {
                family = Md4Family::NotMd4.name().to_string();
                md4_error = Some(reason);
            }
            Err(e) => {
                family = Md4Family::Unclassified.name().to_string();
                md4_error = Some(e.to_string());
                ok = false;
            }
        }
    }
    let detail = match &label {
        Some(l) => l.to_string(),
        None => family.clone(),
    };
    let report = AlgebraReport {
        name: name.into(),
        dim: g.dim(),
        family,
        label,
        md_bar,
        md4,
        md4_error,
        exponential,
        derived_dims: g.derived_series_dims(),
    };
    (report, Check::new(format!("classify_{name}"), ok, detail))
}

pub fn run_classify(a: &ClassifyArgs, cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new("classify", cfg);
    if a.list {
        r.set("builtins", fixtures::BUILTIN_NAMES);
        return Ok(r);
    }
    let inputs: Vec<(String, LieAlgebra)> = match (&a.builtin, &a.input) {
        (Some(_), Some(_)) => return Err(Error::BadParams("give either --builtin or --input, not both".into())),
        (Some(name), None) => vec![(name.clone(), fixtures::builtin(name)?)],
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            vec![(path.display().to_string(), LieAlgebra::from_json_str(&text)?)]
        }
        (None, None) => fixtures::BUILTIN_NAMES.iter().map(|n| Ok((n.to_string(), fixtures::builtin(n)?))).collect::<Result<_>>()?,
    };
    let single = inputs.len() == 1;
    let mut results = Vec::new();
    for (name, g) in &inputs {
        let (rep, check) = classify_one(name, g);
        r.check(check);
        results.push(rep);
    }
    if single {
        let v = serde_json::to_value(&results[0]).expect("serialises");
        if let Value::Object(m) = v {
            r.data.extend(m);
        }
    } else {
        r.set("results", results);
    }
    Ok(r)
}

fn family_label(name: &str, params: &[f64]) -> Result<Md4Label> {
    let f = Md4Family::parse(name)?;
    if !f.is_genuine() {
        return Err(Error::UnknownFamily(name.into()));
    }
    if params.is_empty() {
        Ok(fixtures::default_label(f))
    } else {
        Md4Label::new(f, params)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

pub fn run_atlas(a: &AtlasArgs, cfg: &RunConfig) -> Result<Report> {
    let label = family_label(&a.family, &a.params)?;
    let g = fixtures::md4_table(&label)?;
    let tol = cfg.tolerances.atlas;
    let mut r = Report::new("atlas", cfg);
    r.set("label", &label);
    if a.base.is_empty() {
        let reports = atlas::atlas_check(&label, a.bases, a.samples, cfg.seed)?;
        for s in &reports {
            r.check(Check::new(
                format!("atlas_{}_{}", s.family, s.stratum),
                s.passes(tol),
                format!("{} {}, max residual {:.3e}", s.kind, s.condition, s.max_residual),
            ));
        }
        r.set("max_residual", reports.iter().map(|s| s.max_residual).fold(0.0, f64::max));
        r.set("strata", &reports);
        if let Some(dir) = &a.out_dir {
            let fa = atlas::family_atlas(&label, cfg.seed)?;
            let body = serde_json::to_vec_pretty(&json!({"schema": SCHEMA, "atlas": fa}))?;
            r.files.push(write_file(&dir.join(format!("{}_atlas.json", label.family.name())), &body)?);
        }
        return Ok(r);
    }
    let f = Functional::from_vec(a.base.clone());
    if f.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: f.len() });
    }
    let model = atlas::orbit_model(&label, &f)?;
    let rank = coadjoint::orbit_dimension(&g, &f)?;
    let sample = coadjoint::sample_orbit(&g, &f, a.samples.max(1), 1.0, cfg.seed)?;
    let worst = (0..sample.points.len()).map(|i| atlas::orbit_membership(&model, &sample.point(i))).fold(0.0, f64::max);
    r.check(Check::new("membership", worst < tol, format!("max residual {worst:.3e} over {} points", sample.points.len())));
    r.check(Check::new("model_dim_matches_rank", model.dim() == rank, format!("{} (dim {}), rank B_F = {rank}", model.kind, model.dim())));
    r.set("model", &model);
    r.set("rank", rank);
    r.set("max_residual", worst);
    if let Some(dir) = &a.out_dir {
        let stem = format!("{}_{}", label.family.name(), model.stratum.replace([' ', '/'], "-"));
        let mut buf = Vec::new();
        if model.kind == OrbitKind::Point {
            // The orbit is the base itself.
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(g.labels().iter().map(|l| format!("{l}*"))).map_err(|e| Error::Io(e.to_string()))?;
            w.write_record(a.base.iter().map(|v| format!("{v:.17e}"))).map_err(|e| Error::Io(e.to_string()))?;
            w.flush()?;
        } else {
            sample.write_csv(&mut buf, g.labels())?;
        }
        r.files.push(write_file(&dir.join(format!("{stem}.csv")), &buf)?);
        let desc = serde_json::to_vec_pretty(&json!({
            "schema": SCHEMA,
            "model": model,
            "predicates": model.predicates(),
            "rank": rank,
            "max_residual": worst,
        }))?;
        r.files.push(write_file(&dir.join(format!("{stem}.json")), &desc)?);
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
struct FoliationFamily {
    family: String,
    expected_rank: usize,
    points: usize,
    rank_matches: usize,
    max_tangency_residual: f64,
    orbits: usize,
}

pub fn run_foliation(a: &FoliationArgs, cfg: &RunConfig) -> Result<Report> {
    let families: Vec<Md4Family> = match &a.family {
        Some(name) => vec![family_label(name, &[])?.family],
        None => GENUINE.to_vec(),
    };
    let mut r = Report::new("foliation", cfg);
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for fam in families {
        let label = fixtures::default_label(fam);
        let g = fixtures::md4_table(&label)?;
        let spec = atlas::distribution_spec(&label)?;
        let expected = spec.expected_rank();
        let mut matches = 0;
        for _ in 0..a.points {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if atlas::distribution_rank_at(&spec, &p) == expected {
                matches += 1;
            }
        }
        let mut worst: f64 = 0.0;
        for _ in 0..a.orbits {
            let f = Functional::from_fn(4, |_, _| rng.gen_range(-2.0..2.0));
            let sample = coadjoint::sample_orbit(&g, &f, a.samples, 1.0, rng.gen())?;
            worst = worst.max(atlas::check_tangency(&g, &spec, &sample, 1e-5)?);
        }
        let name = fam.name();
        r.check(Check::new(format!("rank_{name}"), matches == a.points, format!("rank {expected} at {matches}/{} points", a.points)));
        r.check(Check::new(
            format!("tangency_{name}"),
            worst < cfg.tolerances.tangency,
            format!("max residual {worst:.3e} over {} orbits", a.orbits),
        ));
        rows.push(FoliationFamily {
            family: name.into(),
            expected_rank: expected,
            points: a.points,
            rank_matches: matches,
            max_tangency_residual: worst,
            orbits: a.orbits,
        });
    }
    r.set("families", rows);
    Ok(r)
}

fn winding_check(name: &str, l: &kindex::MatrixLoop, grid: usize, expected: i64) -> Check {
    match kindex::winding_number(l, grid) {
        Ok(w) => Check::new(name, w.value == expected, format!("winding {} (raw {:.12}), expected {expected}", w.value, w.raw)),
        Err(e @ Error::NonIntegerResult { .. }) => Check::new(name, false, format!("{e}; hint: increase --grid")),
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

/// JSON fixture tables of the K-theory suite.
pub fn kindex_fixtures() -> Vec<(&'static str, Value)> {
    let table: Vec<Value> = kindex::K_TABLE_SPACES
        .iter()
        .map(|(name, desc)| json!({"space": name, "algebra": desc, "k": kindex::k_table(name).expect("tabulated")}))
        .collect();
    let grid = kindex::p_grid(8);
    let p_samples: Vec<Value> = grid
        .iter()
        .map(|&(phi, r)| {
            let m = kindex::p_idempotent(phi, r);
            let entries: Vec<[f64; 2]> = m.iter().map(|z| [z.re, z.im]).collect();
            json!({"phi": phi, "r": r, "column_major_re_im": entries})
        })
        .collect();
    let ell: Vec<Value> = (1..=4)
        .map(|j| {
            let nodes: Vec<f64> = (0..=4).map(|k| kindex::ell(j, k as f64 * std::f64::consts::FRAC_PI_2)).collect();
            json!({"j": j, "values_at_k_pi_over_2": nodes, "interpolation": "piecewise linear"})
        })
        .collect();
    vec![
        ("k_table.json", json!({"schema": SCHEMA, "entries": table})),
        ("hexagons.json", json!({"schema": SCHEMA, "diagrams": kindex::fixture_hexagons(), "mutations": kindex::mutation_set()})),
        ("p_idempotent.json", json!({"schema": SCHEMA, "samples": p_samples})),
        ("ell_lifts.json", json!({"schema": SCHEMA, "lifts": ell, "arcs": kindex::arcs()})),
    ]
}

pub fn run_kindex_report(a: &KindexArgs, cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new("kindex", cfg);
    let grid = a.grid;
    r.check(winding_check("winding_u_plus", &kindex::u_half_line(true), grid, 1));
    r.check(winding_check("winding_u_minus", &kindex::u_half_line(false), grid, 1));
    let c = kindex::constant_loop(kindex::CMatrix::identity(2, 2), LoopDomain::Interval { a: 0.0, b: 1.0 });
    r.check(winding_check("winding_constant", &c, grid.min(1024), 0));
    let v1 = kindex::ell_lift(1);
    r.check(winding_check("winding_l1_first_arc", &v1.terms[0].1[0], grid, -1));
    r.check(winding_check("winding_l1_last_arc", &v1.terms[0].1[3], grid, 1));

    match kindex::delta0_via_winding(&[kindex::p_lift(0.7, 0.35, 1.3)], grid) {
        Ok(d) => r.check(Check::new("delta0_p_lift", d.matrix == vec![vec![1], vec![1]], format!("delta0 = {:?}", d.matrix))),
        Err(e) => r.check(Check::new("delta0_p_lift", false, format!("{e}; hint: increase --grid"))),
    }
    let gens: Vec<_> = (1..=4).map(kindex::ell_lift).collect();
    match kindex::delta0_via_winding(&gens, grid) {
        Ok(d) => {
            let ok = d.matrix == kindex::gamma4_delta0();
            r.check(Check::new("delta0_gamma4", ok, if ok { "matrix matches".to_string() } else { format!("got {:?}", d.matrix) }));
            r.set("delta0_gamma4", &d);
        }
        Err(e) => r.check(Check::new("delta0_gamma4", false, format!("{e}; hint: increase --grid"))),
    }
    let res = kindex::idempotent_residual(|&(phi, rr)| kindex::p_idempotent(phi, rr), &kindex::p_grid(64));
    r.check(Check::new("idempotent_p", res < 1e-12, format!("max |p^2 - p| = {res:.3e}")));

    for d in kindex::fixture_hexagons() {
        let rep = kindex::six_term_check(&d)?;
        let bad: Vec<String> = rep.nodes.iter().filter(|n| !n.exact).map(|n| d.labels[n.node].clone()).collect();
        let detail = if bad.is_empty() { "exact at all six nodes".to_string() } else { format!("not exact at {}", bad.join(", ")) };
        r.check(Check::new(format!("six_term_{}", d.name), rep.exact(), detail));
    }
    let hex = kindex::fixture_hexagons();
    let muts = kindex::mutation_set();
    let mut rejected = 0;
    for m in &muts {
        let d = hex.iter().find(|d| d.name == m.diagram).expect("mutation refers to a fixture");
        if !kindex::six_term_check(&m.apply(d))?.exact() {
            rejected += 1;
        }
    }
    r.check(Check::new("mutations_rejected", rejected == muts.len(), format!("{rejected}/{} rejected", muts.len())));

    let ct = kindex::connes_thom_shift(&kindex::k_table("R")?, 1) == kindex::k_table("R2")?
        && kindex::connes_thom_shift(&kindex::k_table("point")?, 1) == kindex::k_table("R")?;
    r.check(Check::new("connes_thom", ct, "K(C0(R) x R) = K(C0(R^2)), K(C x R) = K(C0(R))"));
    let table: Vec<Value> = kindex::K_TABLE_SPACES
        .iter()
        .map(|(n, _)| json!({"space": n, "k": kindex::k_table(n).expect("tabulated").to_string()}))
        .collect();
    r.set("k_table", table);

    if let Some(case) = &a.case {
        match case.to_ascii_lowercase().as_str() {
            "affr" | "aff-r" => {
                let f = run_fredholm(&FredholmArgs::default(), cfg)?;
                let idx: Vec<i64> = f.data.get("indices").and_then(|v| serde_json::from_value(v.clone()).ok()).unwrap_or_default();
                let text = format!("index ({})", idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
                r.check(Check::new("index_aff_r", f.pass && idx == vec![1, 1], text));
                r.set("fredholm", &f);
            }
            other => return Err(Error::BadParams(format!("unknown case `{other}`"))),
        }
    }
    if let Some(dir) = &a.export_fixtures {
        for (name, v) in kindex_fixtures() {
            r.files.push(write_file(&dir.join(name), &serde_json::to_vec_pretty(&v)?)?);
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
struct OperatorReport {
    which: u8,
    result: fredholm::IndexResult,
    parity: Vec<fredholm::ParityCheck>,
    oracle_similarity: Option<f64>,
    oracle_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compact_singular_values: Option<Vec<f64>>,
}

fn refine_hint(e: &Error, n: usize) -> String {
    match e {
        Error::GapTooSmall { .. } | Error::GridTooCoarse { .. } => format!("{e}; hint: refine, e.g. --N {}", 2 * n.max(1024)),
        _ => e.to_string(),
    }
}

pub fn run_fredholm(a: &FredholmArgs, cfg: &RunConfig) -> Result<Report> {
    let which: Vec<u8> = match a.which {
        Some(w @ (1 | 2)) => vec![w],
        Some(w) => return Err(Error::BadParams(format!("--which must be 1 or 2, got {w}"))),
        None => vec![1, 2],
    };
    let tol = cfg.tolerances;
    let policy = ThresholdPolicy { min_gap: tol.gap, ..Default::default() };
    let grid = fredholm::build_grid(a.l, a.n)?;
    let mut r = Report::new("fredholm", cfg);
    r.set("grid", json!({"L": a.l, "N": a.n}));
    let oracle = fredholm::ode_kernel_oracle(&grid);
    let mut ops = Vec::new();
    let mut indices = Vec::new();
    for &i in &which {
        let res = fredholm::assemble_operator(i, &grid).and_then(|op| fredholm::numerical_index(&op, &policy).map(|x| (op, x)));
        let (op, res) = match res {
            Ok(x) => x,
            Err(e) => {
                r.check(Check::new(format!("index_s{i}"), false, refine_hint(&e, a.n)));
                continue;
            }
        };
        r.check(Check::new(
            format!("index_s{i}"),
            (res.dim_ker, res.dim_coker) == (1, 0),
            format!("dim ker {}, dim coker {}, index {}, gap {:.3e}", res.dim_ker, res.dim_coker, res.index, res.gap_ratio.unwrap_or(f64::NAN)),
        ));
        let parity = fredholm::parity_check(&res.kernel_vectors, i);
        let worst = parity.iter().map(|p| p.residual).fold(0.0, f64::max);
        let parity_ok = !parity.is_empty() && parity.iter().all(|p| !p.degenerate && p.residual < tol.parity);
        r.check(Check::new(format!("parity_s{i}"), parity_ok, format!("{} vector(s), max residual {worst:.3e}", parity.len())));
        let (mut sim, mut resid, mut oerr) = (None, None, None);
        match &oracle {
            Ok(o) => {
                if let Some(v) = res.kernel_vectors.first() {
                    let c = fredholm::oracle_similarity(&grid, v, o);
                    r.check(Check::new(format!("oracle_s{i}"), c > tol.cosine, format!("cosine similarity {c:.12}")));
                    sim = Some(c);
                }
                resid = fredholm::oracle_residual(&op, o).ok();
            }
            Err(e) => {
                r.check(Check::new(format!("oracle_s{i}"), false, e.to_string()));
                oerr = Some(e.to_string());
            }
        }
        let compact = a.compact_spectrum.then(|| {
            let s = fredholm::compact_part_singular_values(&op);
            s.into_iter().take(60).collect()
        });
        indices.push(res.index);
        ops.push(OperatorReport { which: i, result: res, parity, oracle_similarity: sim, oracle_residual: resid, oracle_error: oerr, compact_singular_values: compact });
    }
    if let Ok(o) = &oracle {
        r.set("oracle", json!({
            "slope_near_zero": o.slope_near_zero,
            "slope_near_infinity": o.slope_near_infinity,
            "small_x_spread": o.small_x_spread,
            "large_x_spread": o.large_x_spread,
        }));
    }
    if !a.no_ladder {
        let mut table = Vec::new();
        for &i in &which {
            let rungs = fredholm::index_ladder(i, &fredholm::LADDER, &policy);
            let got: Vec<Option<(usize, usize)>> = rungs.iter().map(|x| x.result.as_ref().ok().map(|y| (y.dim_ker, y.dim_coker))).collect();
            let stable = got.iter().all(|g| *g == Some((1, 0)));
            r.check(Check::new(format!("ladder_s{i}"), stable, format!("(ker, coker) per rung: {got:?}")));
            for rung in rungs {
                table.push(match rung.result {
                    Ok(x) => json!({"which": i, "L": rung.l, "N": rung.n, "dim_ker": x.dim_ker, "dim_coker": x.dim_coker, "index": x.index, "gap_ratio": x.gap_ratio, "smallest": x.smallest}),
                    Err(e) => json!({"which": i, "L": rung.l, "N": rung.n, "error": e}),
                });
            }
        }
        r.set("ladder", table);
    }
    r.set("indices", &indices);
    r.set("operators", ops);
    Ok(r)
}

pub fn run_all(cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new("all", cfg);
    let mut subs = Vec::new();
    let classify = run_classify(&ClassifyArgs::default(), cfg)?;
    subs.push(classify);
    let mut atlas_checks = Report::new("atlas", cfg);
    for &f in &GENUINE {
        let a = AtlasArgs { family: f.name().into(), params: vec![], base: vec![], samples: 50, bases: 4, out_dir: None };
        let rep = run_atlas(&a, cfg)?;
        for c in rep.checks {
            atlas_checks.check(c);
        }
    }
    subs.push(atlas_checks);
    subs.push(run_foliation(&FoliationArgs { family: None, points: 200, orbits: 3, samples: 20 }, cfg)?);
    subs.push(run_kindex_report(&KindexArgs { grid: kindex::DEFAULT_GRID, case: None, export_fixtures: None }, cfg)?);
    subs.push(run_fredholm(&FredholmArgs::default(), cfg)?);
    let mut summary = Vec::new();
    for s in subs {
        summary.push(json!({"command": s.command, "pass": s.pass, "checks": s.checks.len()}));
        for c in s.checks {
            r.check(Check::new(format!("{}/{}", s.command, c.name), c.pass, c.detail));
        }
    }
    r.set("suites", summary);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn classify_builtin_real_diamond() {
        let r = run_classify(&ClassifyArgs { builtin: Some("real-diamond".into()), ..Default::default() }, &cfg()).unwrap();
        assert!(r.pass);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["family"], "g442");
        assert_eq!(v["schema"], 1);
    }

    #[test]
    fn classify_abelian_is_decomposable() {
        let r = run_classify(&ClassifyArgs { builtin: Some("abelian4".into()), ..Default::default() }, &cfg()).unwrap();
        assert_eq!(r.data["family"], "decomposable");
    }

    #[test]
    fn corrupted_input_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        fs::write(&p, "{\"dim\": 2, \"brackets\": [").unwrap();
        let e = run_classify(&ClassifyArgs { input: Some(p), ..Default::default() }, &cfg()).unwrap_err();
        assert!(matches!(e, Error::Parse(_)));
        assert_eq!(exit_code_for(&e), EXIT_INPUT_ERROR);
        let e = run_classify(&ClassifyArgs { builtin: Some("g999".into()), ..Default::default() }, &cfg()).unwrap_err();
        assert_eq!(exit_code_for(&e), EXIT_INPUT_ERROR);
    }

    #[test]
    fn atlas_single_base_and_point_stratum() {
        let dir = tempfile::tempdir().unwrap();
        let a = AtlasArgs {
            family: "g442".into(),
            params: vec![],
            base: vec![1.0, 1.0, 1.0, 0.0],
            samples: 500,
            bases: 1,
            out_dir: Some(dir.path().into()),
        };
        let r = run_atlas(&a, &cfg()).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert!(r.data["max_residual"].as_f64().unwrap() < 1e-8);
        let pt = AtlasArgs { base: vec![0.0, 0.0, 0.0, 1.5], samples: 50, ..a.clone() };
        let r = run_atlas(&pt, &cfg()).unwrap();
        let csv = fs::read_to_string(&r.files[0]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        let g424 = AtlasArgs { family: "g424".into(), base: vec![1.0, 0.5, -0.3, 0.2], samples: 20, out_dir: None, ..a };
        let r = run_atlas(&g424, &cfg()).unwrap();
        assert_eq!(r.data["model"]["kind"], "OpenDense4D");
    }

    #[test]
    fn kindex_report_and_coarse_grid() {
        let r = run_kindex_report(&KindexArgs { grid: kindex::DEFAULT_GRID, case: None, export_fixtures: None }, &cfg()).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert!(r.render(Format::Text).contains("delta0_gamma4: PASS (matrix matches)"));
        let r = run_kindex_report(&KindexArgs { grid: 16, case: None, export_fixtures: None }, &cfg()).unwrap();
        assert!(!r.pass);
        let c = r.checks.iter().find(|c| c.name == "winding_u_plus").unwrap();
        assert!(!c.pass && c.detail.contains("hint"));
    }

    #[test]
    fn kindex_fixture_export() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_kindex_report(&KindexArgs { grid: 4096, case: None, export_fixtures: Some(dir.path().into()) }, &cfg()).unwrap();
        assert_eq!(r.files.len(), 4);
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("hexagons.json")).unwrap()).unwrap();
        assert_eq!(v["diagrams"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn fredholm_coarse_grid_is_reported() {
        let a = FredholmArgs { which: Some(2), l: 8.0, n: 64, no_ladder: true, compact_spectrum: false };
        let r = run_fredholm(&a, &cfg()).unwrap();
        assert!(!r.pass);
        assert!(r.checks[0].detail.contains("hint"));
        assert!(run_fredholm(&FredholmArgs { which: Some(3), ..a }, &cfg()).is_err());
    }

    #[test]
    fn fredholm_single_operator() {
        let a = FredholmArgs { which: Some(2), l: 6.0, n: 1024, no_ladder: true, compact_spectrum: false };
        let r = run_fredholm(&a, &cfg()).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert_eq!(r.data["indices"], json!([1]));
        assert_eq!(r.data["operators"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn json_is_deterministic() {
        let a = FoliationArgs { family: Some("g411".into()), points: 20, orbits: 1, samples: 5 };
        let x = run_foliation(&a, &RunConfig { seed: 7, ..cfg() }).unwrap().render(Format::Json);
        let y = run_foliation(&a, &RunConfig { seed: 7, ..cfg() }).unwrap().render(Format::Json);
        assert_eq!(x, y);
    }

    #[test]
    fn tolerance_overrides() {
        let t = Tolerances::default().with_overrides(&["atlas=1e-6".into(), "gap = 50".into()]).unwrap();
        assert_eq!((t.atlas, t.gap), (1e-6, 50.0));
        assert!(Tolerances::default().with_overrides(&["nope=1".into()]).is_err());
        assert!(Tolerances::default().with_overrides(&["atlas".into()]).is_err());
    }

    #[test]
    fn csv_and_text_rendering() {
        let mut r = Report::new("x", &cfg());
        r.check(Check::new("a", true, "fine, really"));
        r.check(Check::new("b", false, ""));
        assert_eq!(r.render(Format::Csv), "check,status,detail\na,PASS,\"fine, really\"\nb,FAIL,\n");
        assert!(r.render(Format::Text).starts_with("a: PASS (fine, really)\nb: FAIL\n"));
        assert_eq!(r.exit_code(), EXIT_CHECK_FAILED);
    }
}
