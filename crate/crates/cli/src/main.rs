//! `mpa`: assumption checks, estimation and simulation from the shell.
//!
//! Exit codes: 0 success (or admissible), 2 inadmissible, 1 any error.

mod manifest;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::{sha256_hex, RunManifest};
use mpa_core::assumptions::{parse_mods, run_framework, AssumptionSpec};
use mpa_core::dsep::list_paths;
use mpa_core::estimators::{estimate_ate, render_table, AteResult, Dataset, Method, ModelSpec};
use mpa_core::graph::{parse_graph, CausalGraph, Provenance};
use mpa_core::simulator::{scenario, ScenarioSpec};
use mpa_core::transforms::to_swit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "mpa", version, about = "Missingness pattern approach: assumption checks and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct GraphArgs {
    /// Diagram file.
    #[arg(long)]
    graph: PathBuf,
    /// Roles block: a file, or inline statements separated by `;`
    /// (e.g. "treatment Z; outcome Y; confounder X partial; missing R of X").
    #[arg(long)]
    roles: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the assumption framework on a diagram.
    Check {
        #[command(flatten)]
        graph: GraphArgs,
        /// Per-pattern edge removals (TOML).
        #[arg(long)]
        mods: Option<PathBuf>,
        /// Extra nodes to condition on, comma separated.
        #[arg(long, value_delimiter = ',')]
        condition_on: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Estimate the risk difference from a data file.
    Estimate {
        /// Delimited data with a header row; `NA` or empty marks missing.
        #[arg(long)]
        data: PathBuf,
        /// Model configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// crude, cra, mpa, mind, a comma-separated list, or `all`.
        #[arg(long)]
        method: Option<String>,
        /// Bootstrap replicates (0 for none).
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Generate data from a named scenario or a scenario file.
    Simulate {
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// List every path between two nodes and whether it is open.
    Paths {
        #[command(flatten)]
        graph: GraphArgs,
        from: String,
        to: String,
        /// Conditioning set, comma separated.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

type Outcome = Result<u8, String>;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    payload: &'a T,
    manifest: &'a RunManifest,
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_text(path: &Path, manifest: &mut RunManifest) -> Result<String, String> {
    let bytes = read(path)?;
    manifest.input(path, &bytes);
    String::from_utf8(bytes).map_err(|_| format!("{}: not UTF-8 text", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Prints, or writes to `out`, the payload with its manifest.
fn emit<T: Serialize>(
    format: Format,
    out: Option<&Path>,
    payload: &T,
    text: &str,
    manifest: &RunManifest,
) -> Result<(), String> {
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&Envelope { payload, manifest })
                .map_err(|e| e.to_string())?;
            s.push('\n');
            s
        }
        Format::Text => format!("{text}\n{}", manifest.render()),
    };
    match out {
        Some(p) => write(p, body.as_bytes()),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn load_graph(args: &GraphArgs, manifest: &mut RunManifest) -> Result<CausalGraph, String> {
    let mut src = read_text(&args.graph, manifest)?;
    if let Some(roles) = &args.roles {
        let path = Path::new(roles);
        let block = if path.is_file() {
            read_text(path, manifest)?
        } else if roles.trim_start().starts_with("roles") {
            roles.clone()
        } else {
            format!("roles {{\n{}\n}}", roles.split(';').map(str::trim).collect::<Vec<_>>().join("\n"))
        };
        src.push('\n');
        src.push_str(&block);
    }
    parse_graph(&src).map_err(|e| format!("{}: {e}", args.graph.display()))
}

fn check(
    graph: &GraphArgs,
    mods: Option<&Path>,
    condition_on: &[String],
    out: Option<&Path>,
    format: Format,
) -> Outcome {
    let mut manifest = RunManifest::new("check");
    let g = load_graph(graph, &mut manifest)?;
    let mods = match mods {
        Some(p) => {
            let text = read_text(p, &mut manifest)?;
            parse_mods(&text, &g).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => Vec::new(),
    };
    let spec = AssumptionSpec::new(g).with_mods(mods).condition_on(condition_on.iter().cloned());
    let report = run_framework(&spec).map_err(|e| e.to_string())?;
    emit(format, out, &report, &report.narrative, &manifest)?;
    Ok(if report.admissible { 0 } else { 2 })
}

fn parse_methods(arg: &str) -> Result<Vec<Method>, String> {
    if arg == "all" {
        return Ok(Method::ALL.to_vec());
    }
    arg.split(',')
        .map(|m| {
            Method::parse(m.trim())
                .ok_or_else(|| format!("unknown method `{m}` (expected crude, cra, mpa, mind or all)"))
        })
        .collect()
}

fn estimate_text(results: &[AteResult]) -> String {
    let mut out = render_table(results);
    for r in results {
        out.push_str(&format!("\n== {} ({} of {} rows)\n", r.method.title(), r.n_used, r.n_total));
        for m in &r.models {
            out.push_str(&format!(
                "model {} [{}]: {} rows, {} treated, columns {}\n",
                m.pattern,
                m.label,
                m.rows,
                m.treated,
                m.columns.join(" + ")
            ));
        }
        out.push_str(&r.balance_before.render());
        if let Some(b) = &r.balance_after {
            out.push_str(&b.render());
        }
        for n in &r.notes {
            out.push_str(&format!("note: {n}\n"));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    data: &Path,
    config: &Path,
    method: Option<&str>,
    bootstrap: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Outcome {
    let mut manifest = RunManifest::new("estimate");
    let config_text = read_text(config, &mut manifest)?;
    manifest.config_digest = Some(sha256_hex(config_text.as_bytes()));
    let mut spec = ModelSpec::from_toml(&config_text).map_err(|e| format!("{}: {e}", config.display()))?;
    if let Some(b) = bootstrap {
        spec.bootstrap.replicates = b;
    }
    if let Some(s) = seed {
        spec.bootstrap.seed = s;
    }
    let methods = match method {
        Some(m) => parse_methods(m)?,
        None => vec![spec.method.name],
    };
    manifest.seeds.push(spec.bootstrap.seed);
    let bytes = read(data)?;
    manifest.input(data, &bytes);
    let dataset = Dataset::from_csv(
        bytes.as_slice(),
        &spec.data.treatment,
        &spec.data.outcome,
        &spec.data.covariates,
    )
    .map_err(|e| format!("{}: {e}", data.display()))?;
    let results = methods
        .into_iter()
        .map(|m| estimate_ate(&dataset, &spec.clone().with_method(m)).map_err(|e| format!("{m}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    emit(format, out, &results, &estimate_text(&results), &manifest)?;
    Ok(0)
}

#[derive(Serialize)]
struct SimSummary {
    scenario: String,
    n: usize,
    seed: u64,
    true_ate: f64,
    population_ate: f64,
    /// Rows per missingness pattern label.
    patterns: Vec<(String, usize)>,
    warnings: Vec<String>,
    files: Vec<manifest::FileDigest>,
}

fn simulate(name: &str, n: usize, seed: u64, out: &Path, format: Format) -> Outcome {
    let mut manifest = RunManifest::new("simulate");
    let path = Path::new(name);
    let spec = if path.is_file() {
        let text = read_text(path, &mut manifest)?;
        ScenarioSpec::from_toml(&text).map_err(|e| format!("{name}: {e}"))?
    } else {
        scenario(name).map_err(|e| e.to_string())?
    };
    let spec_toml = spec.to_toml();
    manifest.config_digest = Some(sha256_hex(spec_toml.as_bytes()));
    manifest.seeds.push(seed);
    let sim = spec
        .compile()
        .and_then(|m| m.generate(n, seed))
        .map_err(|e| e.to_string())?;

    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let d = &sim.dataset;
    let mut csv = Vec::new();
    d.write_csv(&mut csv).map_err(|e| e.to_string())?;
    let covariates = d.covariates.iter().map(|c| c.spec.clone()).collect();
    let model = ModelSpec::new(&d.treatment, &d.outcome, covariates).to_toml();
    let oracle = serde_json::to_string_pretty(&Envelope {
        payload: &sim.oracle(),
        manifest: &manifest,
    })
    .map_err(|e| e.to_string())?;
    let files = [
        ("data.csv", csv),
        ("oracle.json", oracle.into_bytes()),
        ("scenario.toml", spec_toml.into_bytes()),
        ("model.toml", model.into_bytes()),
    ];
    let mut digests = Vec::new();
    for (file, bytes) in &files {
        write(&out.join(file), bytes)?;
        digests.push(manifest::FileDigest {
            path: file.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    let mut counts: Vec<(String, usize)> = Vec::new();
    for (mask, rows) in d.group_by_pattern(&(0..d.n_rows()).collect::<Vec<_>>()) {
        counts.push((d.pattern_label(mask), rows.len()));
    }
    let summary = SimSummary {
        scenario: sim.scenario.clone(),
        n,
        seed,
        true_ate: sim.true_ate,
        population_ate: sim.population_ate,
        patterns: counts,
        warnings: sim.warnings.clone(),
        files: digests,
    };
    let manifest_json = serde_json::to_string_pretty(&Envelope {
        payload: &summary,
        manifest: &manifest,
    })
    .map_err(|e| e.to_string())?;
    write(&out.join("manifest.json"), format!("{manifest_json}\n").as_bytes())?;

    let mut text = format!(
        "scenario {} n={} seed={}\ntrue_ate {:.6}\npopulation_ate {:.6}\n",
        summary.scenario, n, seed, summary.true_ate, summary.population_ate
    );
    for (label, k) in &summary.patterns {
        text.push_str(&format!("pattern {label}: {k} rows\n"));
    }
    for w in &summary.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    text.push_str(&format!("wrote {}\n", out.display()));
    emit(format, None, &summary, &text, &manifest)?;
    Ok(0)
}

/// Names missing from a raw diagram are looked up in its template, so the
/// `Y_z`-style names work without a separate file.
fn graph_for(g: CausalGraph, names: &[&str]) -> Result<CausalGraph, String> {
    if names.iter().all(|n| g.contains(n)) || *g.provenance() != Provenance::Raw || g.treatment().is_none() {
        return Ok(g);
    }
    let swit = to_swit(&g).map_err(|e| e.to_string())?;
    Ok(if names.iter().all(|n| swit.contains(n)) { swit } else { g })
}

fn paths(
    graph: &GraphArgs,
    from: &str,
    to: &str,
    given: &[String],
    out: Option<&Path>,
    format: Format,
) -> Outcome {
    let mut manifest = RunManifest::new("paths");
    let g = load_graph(graph, &mut manifest)?;
    let mut names = vec![from, to];
    names.extend(given.iter().map(String::as_str));
    let g = graph_for(g, &names)?;
    let cond: BTreeSet<String> = given.iter().cloned().collect();
    let reports = list_paths(&g, from, to, &cond).map_err(|e| e.to_string())?;
    let mut text = String::new();
    if reports.is_empty() {
        text.push_str("no paths\n");
    }
    for r in &reports {
        text.push_str(&format!("{r}\n"));
    }
    let open = reports.iter().filter(|r| r.is_open()).count();
    if !reports.is_empty() {
        text.push_str(&format!("{} paths, {open} open\n", reports.len()));
    }
    emit(format, out, &reports, &text, &manifest)?;
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check {
            graph,
            mods,
            condition_on,
            out,
            format,
        } => check(&graph, mods.as_deref(), &condition_on, out.as_deref(), format),
        Command::Estimate {
            data,
            config,
            method,
            bootstrap,
            seed,
            out,
            format,
        } => estimate(&data, &config, method.as_deref(), bootstrap, seed, out.as_deref(), format),
        Command::Simulate {
            scenario,
            n,
            seed,
            out,
            format,
        } => simulate(&scenario, n, seed, &out, format),
        Command::Paths {
            graph,
            from,
            to,
            given,
            out,
            format,
        } => paths(&graph, &from, &to, &given, out.as_deref(), format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // usage errors exit 1; 2 is reserved for "inadmissible"
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
