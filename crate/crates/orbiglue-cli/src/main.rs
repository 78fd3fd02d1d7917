//! `orbiglue`: one subcommand per library module.
//!
//! Every output starts with a provenance block (tool version, subcommand,
//! resolved parameters). Exit codes: 0 success, 2 invalid input, 3
//! numerical failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use orbiglue::gluing::{self, GluingConfig, GluingError, Profile};
use orbiglue::green::{self, GreenError, GreenParams};
use orbiglue::radial::{self, InnerData, RadialError, SolveOptions};
use orbiglue::restree::{self, IntersectionData, LambdaError, TreeError};
use orbiglue::weights::{self, WeightError};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "orbiglue", version, about = "Weighted blow-up resolutions and gluing diagnostics")]
struct Cli {
    /// Output format; each subcommand supports a subset.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Smoothness, isolatedness and singular points of a weight vector.
    Classify(ClassifyArgs),
    /// Resolution tree of a weighted blow-up.
    Tree(TreeArgs),
    /// Exact coefficient λ/π of ε^{2k-2} in the blow-up's scalar curvature.
    Lambda(LambdaArgs),
    /// Integrate a scalar-flat radial potential and fit its ALE coefficient.
    FlatSolve(FlatArgs),
    /// Positivity and region-wise scalar curvature of the glued model metric.
    Glue(GlueArgs),
    /// Beta-integral identity and small-distance asymptotics of Λ(d).
    Green(GreenArgs),
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    /// Weight vector, e.g. "(-5,3,2,1)" or "[-5,3,2,1]".
    weights: String,
}

#[derive(Args, Debug, Serialize)]
struct TreeArgs {
    weights: String,
    #[arg(long, default_value_t = restree::DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    /// Same as `--format dot`.
    #[arg(long, conflicts_with = "json")]
    #[serde(skip)]
    dot: bool,
    /// Same as `--format json`.
    #[arg(long)]
    #[serde(skip)]
    json: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
struct LambdaArgs {
    weights: String,
    /// Complex dimension of X.
    #[arg(long)]
    n: usize,
    /// ∫_X h^n, as an integer or fraction.
    #[arg(long, allow_hyphen_values = true)]
    vol: String,
    /// ∫_E h^(n-k) e^(k-1).
    #[arg(long = "I", allow_hyphen_values = true)]
    i_top: String,
    /// ∫_E h^(n-1-j) e^j as `j=value`; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    higher: Vec<String>,
    /// ∫_X c1(X) h^(n-1).
    #[arg(long, allow_hyphen_values = true)]
    c1_top: Option<String>,
    /// Also run the term-by-term expansion and compare.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
struct FlatArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    /// H(s0).
    #[arg(long, default_value_t = 0.5)]
    h0: f64,
    /// H'(s0).
    #[arg(long, default_value_t = 0.5)]
    dh0: f64,
    /// H''(s0).
    #[arg(long, default_value_t = 0.0)]
    ddh0: f64,
    /// Conserved flux `s^k H'^(k-1) F'(s)`; zero for the flat metric.
    #[arg(long, default_value_t = 0.0)]
    flux: f64,
    #[arg(long, default_value_t = 1e4)]
    smax: f64,
    #[arg(long, default_value_t = 200)]
    points_per_decade: usize,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GlueArgs {
    /// TOML or JSON file with GluingConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "A")]
    a: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    points_per_decade: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long)]
    cap_order: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Truncated,
    Smooth,
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
struct GreenArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    /// Comma-separated distances in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01,0.001")]
    d_sweep: Vec<f64>,
    #[arg(long, default_value_t = 1e-12)]
    quad_tol: f64,
    /// Largest n in the identity table.
    #[arg(long, default_value_t = 10)]
    n_max: u32,
    /// Monte-Carlo samples of Λ(d) at the first sweep distance; 0 skips it.
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<WeightError> for CliError {
    fn from(e: WeightError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LambdaError> for CliError {
    fn from(e: LambdaError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::InvalidK { .. } | RadialError::FormDimension { .. } | RadialError::Grid(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GluingError> for CliError {
    fn from(e: GluingError) -> Self {
        match e {
            GluingError::Config(_) | GluingError::OutsideModel { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GreenError> for CliError {
    fn from(e: GreenError) -> Self {
        match e {
            GreenError::Quadrature(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

/// A finished artifact before provenance is attached.
enum Body {
    Json(Value),
    Csv(String),
    Dot(String),
}

struct Provenance {
    command: &'static str,
    config: Value,
}

impl Provenance {
    fn lines(&self) -> Vec<String> {
        vec![
            format!("tool: orbiglue {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("config: {}", self.config),
        ]
    }

    fn render(&self, body: Body) -> String {
        match body {
            Body::Json(v) => {
                let doc = json!({
                    "provenance": {
                        "tool": "orbiglue",
                        "version": env!("CARGO_PKG_VERSION"),
                        "command": self.command,
                        "config": self.config,
                    },
                    "result": v,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
                s.push('\n');
                s
            }
            Body::Csv(t) => self.lines().iter().map(|l| format!("# {l}\n")).collect::<String>() + &t,
            Body::Dot(t) => self.lines().iter().map(|l| format!("// {l}\n")).collect::<String>() + &t,
        }
    }
}

fn unsupported(cmd: &str, f: Format) -> CliError {
    CliError::Input(format!("{cmd} does not support --format {}", format_name(f)))
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Dot => "dot",
    }
}

fn rational(name: &str, s: &str) -> Result<BigRational, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("--{name}: expected an integer or fraction like 3/2, got {s:?}")))
}

fn rational_json(r: &BigRational) -> Value {
    json!({ "numerator": r.numer().to_string(), "denominator": r.denom().to_string() })
}

fn classify(a: &ClassifyArgs, fmt: Format) -> Result<Body, CliError> {
    let (v, _) = weights::parse(&a.weights)?;
    let pair = weights::first_common_factor(&v);
    let points = match weights::singular_points(&v) {
        Ok(p) => Some(p),
        Err(WeightError::NotIsolated { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    match fmt {
        Format::Json => Ok(Body::Json(json!({
            "weights": v.to_string(),
            "kind": v.kind(),
            "smooth": weights::is_smooth(&v),
            "isolated": weights::has_isolated_singularities(&v),
            "origin_isolated": weights::origin_isolated(&v),
            "offending_pair": pair.map(|(i, j, g)| json!({ "i": i, "j": j, "gcd": g })),
            "singular_points": points,
        }))),
        Format::Csv => {
            let mut out = String::from("locus,group_order,action_exponents\n");
            for p in points.unwrap_or_default() {
                let locus = match p.locus {
                    weights::Locus::Coordinate(i) => i.to_string(),
                    weights::Locus::Support(s) => s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
                };
                let ex = p.action_exponents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ");
                out.push_str(&format!("{locus},{},{ex}\n", p.group_order));
            }
            Ok(Body::Csv(out))
        }
        Format::Dot => Err(unsupported("classify", fmt)),
    }
}

fn tree(a: &TreeArgs, fmt: Format) -> Result<Body, CliError> {
    let (v, _) = weights::parse(&a.weights)?;
    let t = restree::build_tree(&v, a.max_depth)?;
    match fmt {
        Format::Json => Ok(Body::Json(json!({
            "is_type_i": t.is_type_i,
            "depth": t.depth,
            "node_count": t.node_count,
            "root": t.to_json(),
        }))),
        Format::Dot => Ok(Body::Dot(t.to_dot())),
        Format::Csv => {
            fn walk(
                n: &restree::ResolutionNode,
                depth: usize,
                parent: Option<usize>,
                id: &mut usize,
                out: &mut String,
            ) {
                let me = *id;
                *id += 1;
                let status = serde_json::to_value(n.status).expect("status serializes");
                let parent = parent.map(|p| p.to_string()).unwrap_or_default();
                out.push_str(&format!("{me},{parent},{depth},\"{}\",{}\n", n.weights, status.as_str().unwrap_or("")));
                for c in &n.children {
                    walk(c, depth + 1, Some(me), id, out);
                }
            }
            let mut out = String::from("id,parent,depth,weights,status\n");
            walk(&t.root, 0, None, &mut 0, &mut out);
            Ok(Body::Csv(out))
        }
    }
}

fn lambda(a: &LambdaArgs, fmt: Format) -> Result<Body, CliError> {
    if fmt != Format::Json {
        return Err(unsupported("lambda", fmt));
    }
    let (v, _) = weights::parse(&a.weights)?;
    let mut data = IntersectionData::new(a.n, v.n(), rational("vol", &a.vol)?, rational("I", &a.i_top)?);
    for h in &a.higher {
        let (j, val) =
            h.split_once('=').ok_or_else(|| CliError::Input(format!("--higher expects j=value, got {h:?}")))?;
        let j: usize = j.trim().parse().map_err(|_| CliError::Input(format!("--higher: bad index {j:?}")))?;
        data.higher.insert(j, rational("higher", val)?);
    }
    if let Some(c) = &a.c1_top {
        data.c1_top = Some(rational("c1-top", c)?);
    }
    let lam = restree::lambda_constant(&v, &data)?;
    let printed = restree::lambda_constant_printed(&v, &data)?;
    let mut out = json!({
        "weights": v.to_string(),
        "k": data.k,
        "chern_coefficient": rational_json(&restree::chern_coefficient(&v)),
        "lambda": lam.to_json(),
        "lambda_over_pi": lam.value.to_string(),
        "lambda_f64": lam.to_f64(),
        "lambda_printed_sign": printed.to_json(),
    });
    if a.oracle {
        let ex = restree::expansion_oracle(&v, &data)?;
        let j = data.k - 1;
        let c = ex.coefficient(j);
        out["oracle"] = json!({
            "coefficients": ex.coeffs.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "index": j,
            "coefficient": c.to_string(),
            "agrees": c.as_constant().as_ref() == Some(&lam.value),
            "volume_correction_from": ex.volume_correction_from,
        });
    }
    Ok(Body::Json(out))
}

fn flat_solve(a: &FlatArgs, fmt: Format) -> Result<Body, CliError> {
    let inner = InnerData { s0: a.s0, h: a.h0, dh: a.dh0, ddh: a.ddh0, flux: a.flux };
    let opts = SolveOptions { points_per_decade: a.points_per_decade, ..SolveOptions::default() };
    let sol = radial::solve_scalar_flat(a.k, inner, a.smax, opts)?;
    let grid = sol.potential_grid().to_vec();
    let mut sup_s = 0.0f64;
    for &s in &grid {
        sup_s = sup_s.max(radial::scalar_curvature(&sol.potential, s)?.value.abs());
    }
    let radial::Form::Sampled(samples) = sol.potential.form() else { unreachable!("solver output is sampled") };
    match fmt {
        Format::Json => Ok(Body::Json(json!({
            "A": sol.fit.a,
            "fit": sol.fit,
            "slope": sol.slope,
            "flux": sol.flux,
            "invariant": sol.invariant,
            "invariant_drift": sol.invariant_drift,
            "sup_abs_scalar_curvature": sup_s,
            "points": grid.len(),
        }))),
        Format::Csv => {
            let head = format!(
                "# A: {}\n# fit_residual_sup: {}\n# sup_abs_scalar_curvature: {sup_s}\n",
                sol.fit.a, sol.fit.residual_sup
            );
            Ok(Body::Csv(head + &samples.to_csv()))
        }
        Format::Dot => Err(unsupported("flat-solve", fmt)),
    }
}

fn load_gluing(a: &GlueArgs) -> Result<GluingConfig, CliError> {
    let mut table: BTreeMap<String, Value> = match &a.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            table.insert(key.to_string(), v);
        }
    };
    set("k", a.k.map(Value::from));
    set("eps", a.eps.map(Value::from));
    set("A", a.a.map(Value::from));
    set("delta", a.delta.map(Value::from));
    set("cutoff", a.cutoff.map(Value::from));
    set("points_per_decade", a.points_per_decade.map(Value::from));
    set("cap_order", a.cap_order.map(Value::from));
    set(
        "profile",
        a.profile.map(|p| {
            Value::from(match p {
                ProfileArg::Truncated => "truncated",
                ProfileArg::Smooth => "smooth",
            })
        }),
    );
    let cfg: GluingConfig = serde_json::from_value(Value::Object(table.into_iter().collect()))
        .map_err(|e| CliError::Input(format!("gluing config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn read_config(p: &Path) -> Result<BTreeMap<String, Value>, CliError> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))?;
    let bad = |e: String| CliError::Input(format!("{}: {e}", p.display()));
    if p.extension().is_some_and(|x| x == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(t).and_then(serde_json::from_value).map_err(|e| bad(e.to_string()))
    }
}

fn glue(cfg: &GluingConfig, fmt: Format) -> Result<Body, CliError> {
    let pos = gluing::positivity_scan(cfg)?;
    if !(pos.min_margin > 0.0) {
        return Err(CliError::Numerical(format!(
            "glued metric is not positive: smallest eigenvalue {} at d = {}",
            pos.min_margin, pos.argmin_d
        )));
    }
    let rep = gluing::scalar_error_report(cfg)?;
    match fmt {
        Format::Json => Ok(Body::Json(json!({ "positivity": pos, "report": rep }))),
        Format::Csv => Ok(Body::Csv(rep.to_csv())),
        Format::Dot => Err(unsupported("glue", fmt)),
    }
}

fn green_cmd(a: &GreenArgs, fmt: Format) -> Result<Body, CliError> {
    let p = GreenParams { n: a.n, k: a.k, quad_tol: a.quad_tol };
    p.validate()?;
    let rows = green::lambda_sweep(&p, &a.d_sweep)?;
    match fmt {
        Format::Csv => Ok(Body::Csv(green::sweep_to_csv(&rows))),
        Format::Json => {
            let exact = green::beta_integral_rational(&p)?;
            let table = green::identity_table(a.n_max, a.quad_tol)?;
            let worst = table.iter().map(|r| r.abs_err).fold(0.0, f64::max);
            let mut out = json!({
                "beta_exact": rational_json(&exact),
                "beta_exact_f64": green::beta_integral_exact(&p)?,
                "beta_quad": green::beta_integral_quad(&p)?,
                "leading_coefficient": green::leading_coefficient(&p)?,
                "identity": { "n_max": a.n_max, "max_abs_err": worst, "rows": table },
                "sweep": rows,
            });
            if a.mc_samples > 0 {
                let d = *a.d_sweep.first().ok_or_else(|| CliError::Input("--d-sweep is empty".into()))?;
                out["monte_carlo"] =
                    json!({ "d": d, "result": green::lambda_flat_monte_carlo(d, &p, a.mc_samples, a.seed)? });
            }
            Ok(Body::Json(out))
        }
        Format::Dot => Err(unsupported("green", fmt)),
    }
}

fn config_json<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("arguments serialize")
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let fmt = cli.format.unwrap_or(Format::Json);
    let (prov, body) = match &cli.cmd {
        Cmd::Classify(a) => (Provenance { command: "classify", config: config_json(a) }, classify(a, fmt)?),
        Cmd::Tree(a) => {
            let fmt = match (a.dot, a.json) {
                (true, _) => Format::Dot,
                (_, true) => Format::Json,
                _ => fmt,
            };
            if cli.format.is_some_and(|f| f != fmt) {
                return Err(CliError::Input("--dot/--json conflicts with --format".into()));
            }
            let mut config = config_json(a);
            config["format"] = json!(fmt);
            (Provenance { command: "tree", config }, tree(a, fmt)?)
        }
        Cmd::Lambda(a) => (Provenance { command: "lambda", config: config_json(a) }, lambda(a, fmt)?),
        Cmd::FlatSolve(a) => (Provenance { command: "flat-solve", config: config_json(a) }, flat_solve(a, fmt)?),
        Cmd::Glue(a) => {
            let cfg = load_gluing(a)?;
            let mut config = config_json(&cfg);
            config["delta"] = json!(cfg.delta());
            config["cap_order"] = json!(cfg.cap_order());
            config["profile"] = json!(if cfg.profile == Profile::Smooth { "smooth" } else { "truncated" });
            (Provenance { command: "glue", config }, glue(&cfg, fmt)?)
        }
        Cmd::Green(a) => (Provenance { command: "green", config: config_json(a) }, green_cmd(a, fmt)?),
    };
    Ok(prov.render(body))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = run(&cli).and_then(|text| match &cli.output {
        Some(p) => std::fs::write(p, text).map_err(|err| CliError::Io { path: p.display().to_string(), err }),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|err| CliError::Io { path: "stdout".into(), err })
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
