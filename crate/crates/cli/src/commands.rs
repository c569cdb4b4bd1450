use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use cvcluster::canonical::check_canonical_conditions;
use cvcluster::circuit::SynthesisJson;
use cvcluster::decomp::{paper_minimal_chain4, NetworkJson};
use cvcluster::gram::{check_cluster_conditions, factor_gram, MatrixJson};
use cvcluster::graph::{cluster_condition_residual, excess_noise, NullifierReportJson};
use cvcluster::json::to_string_pretty;
use cvcluster::linalg::{imag_part, max_abs, real_part, unitarity_residual};
use cvcluster::teleport::{monte_carlo_mean, MeanTransfer, DEFAULT_R_HIGH};
use cvcluster::{
    derive_gram, evaluate_network, measure_nullifiers, reck_decompose, run_teleport, squeezing_budget,
    synthesize_canonical, synthesize_gram, ClusterKind, Element, ElementaryNetwork, FactorStrategy, Graph,
    PaperFixture, Provenance, ProtocolSpec, SynthesisResult, TeleportReport,
};

use crate::input::{fixture_for, load_graph, read_json, write_text, SqueezeArgs};
use crate::table::{num, sci, Format, Table};

/// Whether the computed residuals stayed within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    OutOfTolerance,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::OutOfTolerance
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Canonical,
    Gram,
}

/// `recursive`, `paper` (stored vectors for this graph) or `order:v1,v2,..`
/// (1-based visiting order of the triangular construction).
fn parse_strategy(text: &str, g: &Graph) -> Result<FactorStrategy> {
    match text {
        "recursive" => Ok(FactorStrategy::Recursive),
        "paper" => match fixture_for(g) {
            Some(fx) => Ok(FactorStrategy::Paper(fx)),
            None => bail!("no stored vector solution for this graph"),
        },
        _ => {
            let Some(list) = text.strip_prefix("order:") else {
                bail!("unknown --alpha `{text}` (recursive, paper, order:v1,v2,..)");
            };
            let order = list
                .split(',')
                .map(|v| v.trim().parse::<usize>().ok().and_then(|v| v.checked_sub(1)))
                .collect::<Option<Vec<_>>>()
                .context("order must list 1-based vertices")?;
            Ok(FactorStrategy::RecursiveOrdered(order))
        }
    }
}

fn emit<T: Serialize>(format: Format, table: &Table, summary: &[(String, String)], json: &T) -> Result<()> {
    match format {
        Format::Json => print!("{}", to_string_pretty(json)?),
        Format::Csv => print!("{}", table.render(Format::Csv)),
        Format::Table => {
            print!("{}", table.render(Format::Table));
            if !summary.is_empty() {
                println!();
                let w = summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in summary {
                    println!("{k:<w$}  {v}");
                }
            }
        }
    }
    Ok(())
}

fn kv(k: &str, v: impl Into<String>) -> (String, String) {
    (k.to_string(), v.into())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// chain:n, diamond, multirail:m, paper:<twomode|chain4|diamond|sixmode>, or a graph JSON file.
    #[arg(long)]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = Method::Gram)]
    pub method: Method,
    /// Canonical input squeezing in nats.
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[command(flatten)]
    pub squeeze: SqueezeArgs,
    /// Vector solution for the gram method: recursive, paper, or order:v1,v2,..
    #[arg(long, default_value = "recursive")]
    pub alpha: String,
    /// Circuit JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// Default per-column squeezing of the gram method when no flag is given.
const DEFAULT_GRAM_SQUEEZE: f64 = 1.0;

pub fn synth(args: &SynthArgs) -> Result<Status> {
    let g = load_graph(&args.graph)?;
    let n = g.n();
    let res: SynthesisResult = match args.method {
        Method::Canonical => {
            if args.squeeze.given() {
                bail!("canonical squeezing follows from --r; squeeze flags apply to --method gram");
            }
            let r = args.r.context("--method canonical needs --r")?;
            synthesize_canonical(&g, r)?
        }
        Method::Gram => {
            if args.r.is_some() {
                bail!("--r applies to --method canonical; use --squeeze* for gram");
            }
            let squeezing = args.squeeze.resolve(n, DEFAULT_GRAM_SQUEEZE)?;
            synthesize_gram(&g, &parse_strategy(&args.alpha, &g)?, &squeezing)?
        }
    };

    let sim = measure_nullifiers(&g, &res.prepare_state()?)?;
    let (closed, condition_label, condition) = match &res.provenance {
        Provenance::Canonical { r } => {
            let diag = check_canonical_conditions(&res, &g, *r)?;
            (vec![(-2.0 * r).exp(); n], "canonical condition residual", diag.max())
        }
        _ => (excess_noise(&g, &res.u, &res.squeezing)?, "cluster condition residual", check_cluster_conditions(&res.u, &g)?),
    };
    let diff = sim.variances.iter().zip(&closed).map(|(s, c)| (s - c).abs()).fold(0.0, f64::max);
    let unitarity = unitarity_residual(&res.u);
    let budget = squeezing_budget(&res);

    let mut t = Table::new(&["mode", "R_nats", "R_dB", "lambdaA", "lambdaB", "excess_sim", "excess_closed"]);
    for (l, c) in closed.iter().enumerate() {
        t.row(vec![
            (l + 1).to_string(),
            num(res.squeezing[l]),
            num(budget.db[l]),
            num(res.lambda_a[l]),
            num(res.lambda_b[l]),
            num(sim.variances[l]),
            num(*c),
        ]);
    }
    let ok = unitarity <= args.tol && condition <= args.tol && diff <= args.tol;
    let summary = [
        kv("total squeezing", format!("{:.4} dB (max {:.4} dB)", budget.total_db, budget.max_db)),
        kv("unitarity residual", sci(unitarity)),
        kv(condition_label, sci(condition)),
        kv("max |sim - closed|", sci(diff)),
        kv("status", if ok { "ok" } else { "OUT OF TOLERANCE" }),
    ];
    let json = res.to_json();
    if let Some(path) = &args.out {
        write_text(path, &to_string_pretty(&json)?)?;
    }
    emit(args.format, &t, &summary, &json)?;
    Ok(Status::from_ok(ok))
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Circuit JSON written by `synth`.
    #[arg(long)]
    pub circuit: String,
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Serialize)]
struct VerifyJson {
    simulated: NullifierReportJson,
    closed_form: Option<Vec<f64>>,
    /// Per-vertex `max_l |Im U_al - sum_{b in N_a} Re U_bl|`.
    cluster_residuals: Vec<f64>,
    max_abs_diff: Option<f64>,
    tol: f64,
    ok: bool,
}

pub fn verify(args: &VerifyArgs) -> Result<Status> {
    let g = load_graph(&args.graph)?;
    let json: SynthesisJson = read_json(&args.circuit)?;
    let res = SynthesisResult::from_json(&json)?;
    if res.n() != g.n() {
        bail!("circuit has {} modes but the graph has {} vertices", res.n(), g.n());
    }
    let n = g.n();
    let sim = measure_nullifiers(&g, &res.prepare_state()?)?;
    let per_vertex = imag_part(&res.u) - g.adjacency() * real_part(&res.u);
    let cluster_residuals: Vec<f64> = (0..n).map(|a| per_vertex.row(a).amax()).collect();
    let closed = match &res.provenance {
        Provenance::Canonical { r } => Some(vec![(-2.0 * r).exp(); n]),
        _ => excess_noise(&g, &res.u, &res.squeezing).ok(),
    };
    let diffs: Option<Vec<f64>> =
        closed.as_ref().map(|c| sim.variances.iter().zip(c).map(|(s, c)| (s - c).abs()).collect());
    let max_diff = diffs.as_ref().map(|d| d.iter().cloned().fold(0.0, f64::max));
    let ok = max_diff.is_some_and(|d| d <= args.tol);

    let mut t = Table::new(&["vertex", "simulated", "closed_form", "abs_diff", "cluster_residual"]);
    for a in 0..n {
        t.row(vec![
            (a + 1).to_string(),
            num(sim.variances[a]),
            closed.as_ref().map_or("-".into(), |c| num(c[a])),
            diffs.as_ref().map_or("-".into(), |d| sci(d[a])),
            sci(cluster_residuals[a]),
        ]);
    }
    let mut summary = vec![match max_diff {
        Some(d) => kv("max |sim - closed|", format!("{} (tol {})", sci(d), sci(args.tol))),
        None => kv("closed form", "unavailable: circuit violates the cluster condition"),
    }];
    summary.push(kv("status", if ok { "ok" } else { "OUT OF TOLERANCE" }));
    let report = VerifyJson {
        simulated: sim.to_json(),
        closed_form: closed,
        cluster_residuals,
        max_abs_diff: max_diff,
        tol: args.tol,
        ok,
    };
    emit(args.format, &t, &summary, &report)?;
    Ok(Status::from_ok(ok))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetworkFixture {
    /// Three-beam-splitter circuit for the linear four-mode cluster.
    PaperMinimalChain4,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DecomposeSource {
    /// Circuit JSON whose U is decomposed.
    #[arg(long)]
    pub circuit: Option<String>,
    #[arg(long, value_enum)]
    pub fixture: Option<NetworkFixture>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub source: DecomposeSource,
    /// Network JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

fn element_row(i: usize, e: &Element) -> Vec<String> {
    let (kind, modes, param) = match *e {
        Element::Fourier { mode, dagger } => (if dagger { "F+" } else { "F" }, format!("{}", mode + 1), String::new()),
        Element::BeamSplitter { modes: (k, l), t, sign } => {
            let s = if sign.value() > 0.0 { "+" } else { "-" };
            (if s == "+" { "BS+" } else { "BS-" }, format!("{},{}", k + 1, l + 1), format!("t={t:.6}"))
        }
        Element::Swap { modes: (k, l) } => ("SWAP", format!("{},{}", k + 1, l + 1), String::new()),
        Element::Phase { mode, phi } => ("P", format!("{}", mode + 1), format!("phi={phi:.6}")),
    };
    vec![(i + 1).to_string(), kind.to_string(), modes, param]
}

pub fn decompose(args: &DecomposeArgs) -> Result<Status> {
    let mut summary = Vec::new();
    let (net, residual): (ElementaryNetwork, f64) = match (&args.source.circuit, args.source.fixture) {
        (Some(path), _) => {
            let json: SynthesisJson = read_json(path)?;
            let res = SynthesisResult::from_json(&json)?;
            let net = reck_decompose(&res.u)?;
            let residual = max_abs(&(evaluate_network(&net)? - &res.u));
            summary.push(kv("reconstruction residual", sci(residual)));
            (net, residual)
        }
        (None, Some(NetworkFixture::PaperMinimalChain4)) => {
            let net = paper_minimal_chain4();
            let u = evaluate_network(&net)?;
            let unitarity = unitarity_residual(&u);
            let condition = cluster_condition_residual(&PaperFixture::Chain4.graph(), &u)?;
            summary.push(kv("unitarity residual", sci(unitarity)));
            summary.push(kv("cluster condition residual (chain:4)", sci(condition)));
            (net, unitarity.max(condition))
        }
        (None, None) => bail!("give --circuit or --fixture"),
    };
    let n = net.n_modes;
    summary.insert(0, kv("beam splitters", format!("{} (bound {})", net.beam_splitter_count(), n * (n - 1) / 2)));
    let ok = residual <= args.tol;
    summary.push(kv("status", if ok { "ok" } else { "OUT OF TOLERANCE" }));

    let mut t = Table::new(&["step", "element", "modes", "parameter"]);
    for (i, e) in net.elements.iter().enumerate() {
        t.row(element_row(i, e));
    }
    let json: NetworkJson = net.to_json();
    if let Some(path) = &args.out {
        write_text(path, &to_string_pretty(&json)?)?;
    }
    emit(args.format, &t, &summary, &json)?;
    Ok(Status::from_ok(ok))
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    /// chain3, diamond or multirail:m.
    #[arg(long)]
    pub cluster: String,
    /// Rail squeezing (uniform flags) or every column (list flags).
    #[command(flatten)]
    pub squeeze: SqueezeArgs,
    /// Squeezing in nats of the two columns holding the input and output vertices.
    #[arg(long, default_value_t = DEFAULT_R_HIGH)]
    pub r_high: f64,
    /// Vector solution: paper (diamond only) or recursive.
    #[arg(long)]
    pub factor: Option<String>,
    /// Coherent input mean x,p.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true, default_value = "0,0")]
    pub input_mean: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo shots for the mean-transfer check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    /// Report JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Serialize)]
struct TeleportJson {
    report: TeleportReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MeanTransfer>,
}

/// Mean-transfer acceptance: within this many standard errors.
const MAX_Z: f64 = 5.0;

pub fn teleport(args: &TeleportArgs) -> Result<Status> {
    let cluster: ClusterKind = args.cluster.parse()?;
    if !args.r_high.is_finite() {
        bail!("--r-high must be finite");
    }
    let &[x, p] = args.input_mean.as_slice() else {
        bail!("--input-mean takes two values x,p");
    };
    let mut spec = ProtocolSpec::new(cluster, 0.0, args.r_high);
    let n = spec.n();
    spec.squeezing = match args.squeeze.uniform() {
        Ok(r) => ProtocolSpec::new(cluster, r.unwrap_or(1.0), args.r_high).squeezing,
        Err(_) => args.squeeze.resolve(n, 1.0)?,
    };
    spec.input = [x, p];
    spec.seed = args.seed;
    if let Some(f) = &args.factor {
        let mut json = spec.to_json();
        json.factor = Some(f.clone());
        spec = ProtocolSpec::from_json(&json)?;
    }
    let report = run_teleport(&spec)?;
    let mc = (args.shots > 0).then(|| monte_carlo_mean(&spec, args.shots)).transpose()?;

    let dash = || "-".to_string();
    let mut t = Table::new(&["quantity", "simulated", "heisenberg", "closed_form", "uncorrelated"]);
    t.row(vec!["x_out excess".into(), num(report.excess_x), num(report.exact_excess_x), num(0.0), dash()]);
    t.row(vec![
        "p_out excess".into(),
        num(report.excess_p),
        num(report.exact_excess_p),
        report.closed_form_excess_p.map_or_else(dash, num),
        num(report.uncorrelated_excess_p),
    ]);
    let residual = report.oracle_residual();
    let mut ok = residual <= args.tol;
    let mut summary = vec![
        kv("cluster", format!("{} (R = {:?})", report.cluster, report.squeezing)),
        kv("outcomes", format!("{:?}", report.outcomes.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>())),
        kv("output mean", format!("({:.6}, {:.6})", report.output_mean[0], report.output_mean[1])),
        kv("|simulated - heisenberg|", format!("{} (tol {})", sci(residual), sci(args.tol))),
    ];
    if let Some(mc) = &mc {
        let z = mc.z_score(spec.input);
        ok &= z <= MAX_Z;
        summary.push(kv(
            "monte carlo mean",
            format!(
                "({:.6}, {:.6}) +- ({:.6}, {:.6}), {} shots, max z {:.2}",
                mc.mean[0], mc.mean[1], mc.std_err[0], mc.std_err[1], mc.shots, z
            ),
        ));
    }
    summary.push(kv("status", if ok { "ok" } else { "OUT OF TOLERANCE" }));
    let json = TeleportJson { report, monte_carlo: mc };
    if let Some(path) = &args.out {
        write_text(path, &to_string_pretty(&json)?)?;
    }
    emit(args.format, &t, &summary, &json)?;
    Ok(Status::from_ok(ok))
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[arg(long)]
    pub graph: String,
    /// Also factor G: recursive, paper, or order:v1,v2,..
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Serialize)]
struct GramJson {
    n: usize,
    #[serde(rename = "G")]
    gram: MatrixJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<MatrixJson>,
    commutation_residual: f64,
    complement_residual: f64,
}

pub fn gram(args: &GramArgs) -> Result<Status> {
    let g = load_graph(&args.graph)?;
    let n = g.n();
    let gram = derive_gram(&g);
    let (commute, complement) = gram.identity_residuals(&g);
    let alpha = args
        .alpha
        .as_deref()
        .map(|a| factor_gram(&gram, &parse_strategy(a, &g)?).map_err(anyhow::Error::from))
        .transpose()?;

    let mut headers = vec!["matrix".to_string(), "row".to_string()];
    headers.extend((1..=n).map(|c| c.to_string()));
    let mut t = Table::new(&headers.iter().map(String::as_str).collect::<Vec<_>>());
    let mut push = |name: &str, m: &cvcluster::RMat| {
        for i in 0..n {
            let mut row = vec![name.to_string(), (i + 1).to_string()];
            row.extend(m.row(i).iter().map(|&v| num(v)));
            t.row(row);
        }
    };
    push("G", &gram.0);
    if let Some(a) = &alpha {
        push("alpha", &a.0);
    }
    let mut summary = vec![
        kv("|G Adj - Adj G|", sci(commute)),
        kv("|G + Adj G Adj - I|", sci(complement)),
    ];
    let mut ok = commute <= args.tol && complement <= args.tol;
    if let Some(a) = &alpha {
        let r = a.gram_residual(&gram);
        ok &= r <= args.tol;
        summary.push(kv("|alpha alpha^T - G|", sci(r)));
    }
    summary.push(kv("status", if ok { "ok" } else { "OUT OF TOLERANCE" }));
    let json = GramJson {
        n,
        gram: MatrixJson::from(&gram.0),
        alpha: alpha.as_ref().map(|a| MatrixJson::from(&a.0)),
        commutation_residual: commute,
        complement_residual: complement,
    };
    emit(args.format, &t, &summary, &json)?;
    Ok(Status::from_ok(ok))
}
