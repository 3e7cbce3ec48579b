//! The `ppt` command-line front end.
//!
//! Every subcommand flag can also be given in a `key=value` file passed
//! with `--config`; flags on the command line take precedence.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::chart::RankDiagram;
use crate::constructions::{build, ConstructionRecipe, RecipeKind};
use crate::error::Error;
use crate::hilbert::{BipartiteDims, StateFile};
use crate::search::{search, Coupling, RankTarget, SearchConfig};
use crate::separability::{classify_state, ClassifyConfig};
use crate::survey::{read_journal, run_scan, ScanConfig, SurveyReport, SurveyTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_NOT_PPT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ppt", version, about = "Rank-targeted search and classification of PPT states")]
pub struct Cli {
    /// key=value file with defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Search for a PPT state with prescribed ranks of ρ and ρ^P.
    Search(SearchArgs),
    /// Classify a state file and print the result as JSON.
    Classify(ClassifyArgs),
    /// Survey every rank pair N ≥ m ≥ n ≥ 1.
    Scan(ScanArgs),
    /// Draw a rank diagram from a survey table.
    Chart(ChartArgs),
    /// Build a state from a known construction.
    Construct(ConstructArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CouplingArg {
    Auto,
    Always,
    Never,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Auto => Coupling::Auto,
            CouplingArg::Always => Coupling::Always,
            CouplingArg::Never => Coupling::Never,
        }
    }
}

fn parse_ranks(s: &str) -> Result<[usize; 2], String> {
    let t = s.trim().trim_start_matches('(').trim_end_matches(')');
    let (a, b) = t
        .split_once(',')
        .ok_or_else(|| format!("expected m,n, got {s:?}"))?;
    let p = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad rank {x:?}: {e}"))
    };
    Ok([p(a)?, p(b)?])
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SearchArgs {
    #[arg(long)]
    pub dims: BipartiteDims,
    /// Target ranks as m,n.
    #[arg(long, value_parser = parse_ranks)]
    pub ranks: [usize; 2],
    #[arg(long, env = "PPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Convergence threshold on the largest targeted eigenvalue.
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Auto)]
    pub coupling: CouplingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ClassifyArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub pv_budget: Option<usize>,
    #[arg(long)]
    pub pair_budget: Option<usize>,
    #[arg(long, env = "PPT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ScanArgs {
    #[arg(long)]
    pub dims: BipartiteDims,
    /// Searches per rank pair.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, env = "PPT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: writes PREFIX.csv, PREFIX.json and PREFIX.journal.jsonl.
    #[arg(long, value_name = "PREFIX")]
    pub out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// States classified per (ranks, local ranks) group.
    #[arg(long, default_value_t = 2)]
    pub per_group: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Auto)]
    pub coupling: CouplingArg,
    #[arg(long)]
    pub pv_budget: Option<usize>,
    #[arg(long)]
    pub pair_budget: Option<usize>,
    /// Ignore and overwrite an existing journal.
    #[arg(long)]
    pub fresh: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ChartArgs {
    /// Survey JSON (a full scan report or a bare table).
    pub table: PathBuf,
    /// Output file; `.svg` or `.txt`.
    #[arg(long)]
    pub out: PathBuf,
    /// Expected dimensions; refused if the table disagrees.
    #[arg(long)]
    pub dims: Option<BipartiteDims>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstructKind {
    /// Random mixture of k product states.
    Separable,
    /// Saturating chain starting from a 3x3 rank-(4,4) state.
    Hlvc,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ConstructArgs {
    #[arg(value_enum, required_unless_present = "recipe")]
    pub kind: Option<ConstructKind>,
    /// Replay a recipe (JSON) instead of using the flags below.
    #[arg(long, conflicts_with = "kind")]
    pub recipe: Option<PathBuf>,
    #[arg(long)]
    pub dims: Option<BipartiteDims>,
    /// Number of product states in a separable mixture.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Use real local vectors on B.
    #[arg(long)]
    pub real_chi: bool,
    /// Number of saturating steps.
    #[arg(long, default_value_t = 1)]
    pub levels: usize,
    /// Mixing weight per level, comma separated.
    #[arg(long)]
    pub mixing: Option<String>,
    #[arg(long)]
    pub orthogonal: bool,
    /// Start the chain from this state instead of searching for one.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long, env = "PPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotPpt { .. } => EXIT_NOT_PPT,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses a `key=value` file. Blank lines and `#` comments are skipped;
/// `_` in keys is read as `-`.
pub fn parse_config(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn config_tokens(
    sub: &str,
    cfg: &BTreeMap<String, String>,
) -> std::result::Result<Vec<OsString>, String> {
    let cmd = Cli::command();
    let sc = cmd
        .find_subcommand(sub)
        .ok_or_else(|| format!("unknown subcommand {sub}"))?;
    let mut out = Vec::new();
    for (k, v) in cfg {
        let arg = sc
            .get_arguments()
            .find(|a| a.get_long() == Some(k.as_str()) && k != "config")
            .ok_or_else(|| format!("config key {k:?} is not a flag of `{sub}`"))?;
        match arg.get_action() {
            ArgAction::SetTrue => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => out.push(format!("--{k}").into()),
                "false" | "no" | "0" | "off" => {}
                _ => return Err(format!("config key {k:?}: expected a boolean, got {v:?}")),
            },
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Finds the subcommand token, skipping `--config FILE`.
const SUBCOMMANDS: [&str; 5] = ["search", "classify", "scan", "chart", "construct"];

/// Finds `--config` and the subcommand without involving clap, since the
/// file may supply required arguments.
fn locate_config(args: &[OsString]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if sub.is_none() && SUBCOMMANDS.contains(&a.as_ref()) {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

fn parse_with_config(args: Vec<OsString>) -> std::result::Result<Cli, Failure> {
    let (Some(path), Some(pos)) = locate_config(&args) else {
        return Cli::try_parse_from(&args).map_err(clap_failure);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::invalid(format!("config {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| Failure::invalid(format!("config {}: {e}", path.display())))?;
    let sub = args[pos].to_string_lossy().into_owned();
    let tokens = config_tokens(&sub, &cfg).map_err(Failure::invalid)?;
    let mut merged = args[..=pos].to_vec();
    merged.extend(tokens);
    merged.extend_from_slice(&args[pos + 1..]);
    Cli::try_parse_from(merged).map_err(clap_failure)
}

fn clap_failure(e: clap::Error) -> Failure {
    use clap::error::ErrorKind;
    let code = match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
        _ => EXIT_INVALID,
    };
    Failure {
        code,
        message: e.render().to_string(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = parse_with_config(args).and_then(|cli| match cli.command {
        Command::Search(a) => cmd_search(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Scan(a) => cmd_scan(&a),
        Command::Chart(a) => cmd_chart(&a),
        Command::Construct(a) => cmd_construct(&a),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            if f.code == EXIT_OK {
                print!("{}", f.message);
            } else {
                eprintln!("{}", f.message.trim_end());
            }
            f.code
        }
    }
}

fn search_config(max_iter: usize, tol: f64, coupling: CouplingArg, seed: u64, restarts: usize) -> SearchConfig {
    SearchConfig {
        max_iterations: max_iter,
        residual_tol: tol,
        coupling: coupling.into(),
        seed,
        restarts,
        ..SearchConfig::default()
    }
}

pub fn cmd_search(a: &SearchArgs) -> CmdResult {
    let target = RankTarget::new(a.dims, a.ranks[0], a.ranks[1])?;
    let cfg = search_config(a.max_iter, a.tol, a.coupling, a.seed, a.restarts);
    if a.restarts == 0 {
        return Err(Failure::invalid("--restarts must be positive"));
    }
    cfg.validate()?;
    let out = search(a.dims, target, &cfg);
    let iters = out.history.len().saturating_sub(1);
    match &out.state {
        Some(st) => {
            println!(
                "ranks=({},{}) residual={:.3e} iters={}",
                st.ranks.0, st.ranks.1, st.residual, iters
            );
            if let Some(path) = &a.out {
                st.save(path)?;
            }
        }
        None => {
            println!("ranks=none residual={:.3e} iters={}", out.final_residual(), iters);
        }
    }
    if out.achieved() == Some((target.m, target.n)) {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "no state with ranks ({},{}) after {} restarts",
            target.m, target.n, a.restarts
        );
        Ok(EXIT_NOT_FOUND)
    }
}

pub fn cmd_classify(a: &ClassifyArgs) -> CmdResult {
    let file = StateFile::load(&a.file)
        .map_err(|e| Failure::invalid(format!("{}: {e}", a.file.display())))?;
    let state = file.to_state().map_err(|e| match e {
        Error::NotPpt { min_rho, min_pt } => Failure {
            code: EXIT_NOT_PPT,
            message: format!(
                "not PPT: smallest eigenvalue of rho {min_rho:.3e}, of rho^P {min_pt:.3e}"
            ),
        },
        e => Failure::invalid(format!("{}: {e}", a.file.display())),
    })?;
    let cfg = ClassifyConfig {
        seed: a.seed,
        pv_budget: a.pv_budget,
        pair_budget: a.pair_budget,
        ..ClassifyConfig::default()
    };
    let c = classify_state(&state, &cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&c).map_err(|e| Failure::from(Error::from(e)))?
    );
    Ok(EXIT_OK)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn cmd_scan(a: &ScanArgs) -> CmdResult {
    if a.restarts == 0 {
        return Err(Failure::invalid("--restarts must be positive"));
    }
    let mut cfg = ScanConfig::new(a.dims);
    cfg.restarts = a.restarts;
    cfg.seed = a.seed;
    cfg.per_group = a.per_group;
    cfg.search = search_config(a.max_iter, a.tol, a.coupling, a.seed, 1);
    cfg.search.validate()?;
    cfg.classify.pv_budget = a.pv_budget;
    cfg.classify.pair_budget = a.pair_budget;

    let journal_path = with_ext(&a.out, "journal.jsonl");
    let journal = if a.fresh {
        Vec::new()
    } else {
        read_journal(&journal_path)?
    };
    let mut jf = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&journal_path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", journal_path.display())))?;
    for e in &journal {
        writeln!(jf, "{}", serde_json::to_string(e).map_err(|e| Failure::from(Error::from(e)))?)
            .map_err(|e| Failure::from(Error::from(e)))?;
    }
    if !journal.is_empty() {
        eprintln!("resuming: {} targets already in the journal", journal.len());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::invalid(format!("thread pool: {e}")))?;
    let report = pool.install(|| {
        run_scan(&cfg, &journal, Some(&mut jf as &mut dyn Write), |s| {
            eprintln!(
                "({},{}): {}/{} converged, found {}, classified {}",
                s.target[0],
                s.target[1],
                s.converged,
                s.attempts,
                if s.found_target() { "yes" } else { "no" },
                s.classified
            );
        })
    })?;
    let csv_path = with_ext(&a.out, "csv");
    let f = std::fs::File::create(&csv_path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", csv_path.display())))?;
    report.table.write_csv(f)?;
    report.save_json(with_ext(&a.out, "json"))?;
    println!(
        "{} rows, {} targets not found; wrote {}",
        report.table.rows.len(),
        report.not_found.len(),
        csv_path.display()
    );
    Ok(EXIT_OK)
}

/// Reads either a full scan report or a bare table.
pub fn load_table(path: &Path) -> std::result::Result<SurveyTable, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    if let Ok(r) = serde_json::from_str::<SurveyReport>(&text) {
        return Ok(r.table);
    }
    serde_json::from_str::<SurveyTable>(&text)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn check_table(t: &SurveyTable) -> std::result::Result<(), String> {
    let d = t.dims;
    for r in &t.rows {
        let [m, n] = r.ranks;
        let [ra, rb] = r.local_ranks;
        if m == 0 || n == 0 || m > d.n() || n > d.n() || ra > d.n_a() || rb > d.n_b() {
            return Err(format!(
                "row ({m},{n}) with local ranks ({ra},{rb}) does not fit {d}"
            ));
        }
    }
    Ok(())
}

pub fn cmd_chart(a: &ChartArgs) -> CmdResult {
    let table = load_table(&a.table)?;
    if let Some(d) = a.dims {
        if d != table.dims {
            return Err(Failure::invalid(format!(
                "table is for {}, not {}",
                table.dims, d
            )));
        }
    }
    check_table(&table).map_err(Failure::invalid)?;
    let dia = RankDiagram::from_table(&table);
    let body = match a.out.extension().and_then(|e| e.to_str()) {
        Some("svg") => dia.render_svg(),
        Some("txt") => dia.render_text(),
        _ => return Err(Failure::invalid("--out must end in .svg or .txt")),
    };
    std::fs::write(&a.out, body)
        .map_err(|e| Failure::invalid(format!("{}: {e}", a.out.display())))?;
    Ok(EXIT_OK)
}

pub fn cmd_construct(a: &ConstructArgs) -> CmdResult {
    let recipe = if let Some(p) = &a.recipe {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?;
        serde_json::from_str::<ConstructionRecipe>(&text)
            .map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?
    } else {
        match a.kind {
            Some(ConstructKind::Separable) => ConstructionRecipe {
                kind: RecipeKind::SeparableMixture {
                    k: a.k,
                    real_chi: a.real_chi,
                },
                dims: a
                    .dims
                    .ok_or_else(|| Failure::invalid("separable mixtures need --dims"))?,
                seed: a.seed,
                mixing: Vec::new(),
            },
            Some(ConstructKind::Hlvc) => {
                let base_dims = match &a.base {
                    Some(p) => StateFile::load(p)?.dims,
                    None => BipartiteDims::new(3, 3)?,
                };
                let dims = BipartiteDims::new(base_dims.n_a() + a.levels, base_dims.n_b() + a.levels)?;
                if let Some(d) = a.dims {
                    if d != dims {
                        return Err(Failure::invalid(format!(
                            "{} levels from {} give {}, not {}",
                            a.levels, base_dims, dims, d
                        )));
                    }
                }
                ConstructionRecipe {
                    kind: RecipeKind::HlvcSaturating {
                        levels: a.levels,
                        orthogonal: a.orthogonal,
                    },
                    dims,
                    seed: a.seed,
                    mixing: match &a.mixing {
                        Some(m) => parse_list(m).map_err(Failure::invalid)?,
                        None => Vec::new(),
                    },
                }
            }
            None => return Err(Failure::invalid("give a construction kind or --recipe")),
        }
    };
    if recipe.mixing.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Failure::invalid("mixing weights must lie in (0, 1)"));
    }
    let base = match &a.base {
        Some(p) => Some(StateFile::load(p)?.to_state()?),
        None => None,
    };
    let built = build(&recipe, base)?;
    built.to_file().save(&a.out)?;
    let st = &built.state;
    println!(
        "ranks=({},{}) local_ranks=({},{}) dims={}",
        st.ranks.0, st.ranks.1, st.local_ranks.0, st.local_ranks.1, st.dims()
    );
    Ok(EXIT_OK)
}
