//! Grid surveys over all rank targets and the tables they produce.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{derive_seed, BipartiteDims, PptState};
use crate::product::PvCell;
use crate::search::{search_once, RankTarget, SearchConfig, SearchStatus};
use crate::separability::{classify_state, Classification, ClassifyConfig, VerdictStatus};

/// All targets `N ≥ m ≥ n ≥ 1`, descending by `(m + n, m)`.
pub fn scan_targets(dims: BipartiteDims) -> Vec<RankTarget> {
    let n = dims.n();
    let mut t: Vec<RankTarget> = (1..=n)
        .flat_map(|m| (1..=m).map(move |k| RankTarget { m, n: k }))
        .collect();
    t.sort_by(|a, b| (b.m + b.n, b.m).cmp(&(a.m + a.n, a.m)));
    t
}

/// Distinct verdicts observed for one table row, written `a|b`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct VerdictSet(pub BTreeSet<VerdictStatus>);

impl VerdictSet {
    pub fn contains(&self, v: VerdictStatus) -> bool {
        self.0.contains(&v)
    }

    pub fn any_separable(&self) -> bool {
        self.0.iter().any(|v| v.is_separable())
    }

    pub fn any_entangled(&self) -> bool {
        self.0.iter().any(|v| v.is_entangled())
    }
}

impl fmt::Display for VerdictSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|v| v.as_str()).collect();
        f.write_str(&names.join("|"))
    }
}

impl FromStr for VerdictSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Self::default());
        }
        s.split('|').map(str::parse).collect::<Result<_>>().map(Self)
    }
}

impl Serialize for VerdictSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VerdictSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rank pair written `(m,n)` in CSV cells.
fn pair_text(p: [usize; 2]) -> String {
    format!("({},{})", p[0], p[1])
}

fn parse_pair(s: &str) -> Result<[usize; 2]> {
    let bad = || Error::InvalidInput(format!("bad rank pair {s:?}"));
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(bad)?;
    let (a, b) = inner.split_once(',').ok_or_else(bad)?;
    Ok([
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ])
}

/// One distinct classification signature at one pair of ranks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurveyRow {
    pub ranks: [usize; 2],
    pub bound: i64,
    #[serde(rename = "dimF")]
    pub dim_f: usize,
    pub local_ranks: [usize; 2],
    pub pv_im: PvCell,
    pub pv_ker: PvCell,
    pub verdict: VerdictSet,
}

type Signature = ([usize; 2], i64, usize, [usize; 2], PvCell, PvCell);

impl SurveyRow {
    fn signature(&self) -> Signature {
        (
            self.ranks,
            self.bound,
            self.dim_f,
            self.local_ranks,
            self.pv_im,
            self.pv_ker,
        )
    }

    pub fn is_extremal_full(&self, dims: BipartiteDims) -> bool {
        self.dim_f == 1 && self.local_ranks == [dims.n_a(), dims.n_b()]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    ranks: String,
    bound: i64,
    #[serde(rename = "dimF")]
    dim_f: usize,
    local_ranks: String,
    pv_im: String,
    pv_ker: String,
    verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyTable {
    pub dims: BipartiteDims,
    pub rows: Vec<SurveyRow>,
}

impl SurveyTable {
    /// Aggregates classifications into one row per signature, merging
    /// verdicts, sorted descending by `(m + n, m)`.
    pub fn from_classifications<'a>(
        dims: BipartiteDims,
        items: impl IntoIterator<Item = &'a Classification>,
    ) -> Self {
        let mut by_sig: BTreeMap<Signature, SurveyRow> = BTreeMap::new();
        for c in items {
            let row = SurveyRow {
                ranks: c.ranks,
                bound: c.bound,
                dim_f: c.dim_f,
                local_ranks: c.local_ranks,
                pv_im: c.pv_im,
                pv_ker: c.pv_ker,
                verdict: VerdictSet::default(),
            };
            by_sig
                .entry(row.signature())
                .or_insert(row)
                .verdict
                .0
                .insert(c.verdict);
        }
        let mut t = Self {
            dims,
            rows: by_sig.into_values().collect(),
        };
        t.sort();
        t
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            let ka = (a.ranks[0] + a.ranks[1], a.ranks[0]);
            let kb = (b.ranks[0] + b.ranks[1], b.ranks[0]);
            kb.cmp(&ka).then_with(|| a.signature().cmp(&b.signature()))
        });
    }

    /// All rows at the given ranks: the distinct state types found there.
    pub fn variants(&self, m: usize, n: usize) -> Vec<&SurveyRow> {
        self.rows.iter().filter(|r| r.ranks == [m, n]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(CsvRow {
                ranks: pair_text(r.ranks),
                bound: r.bound,
                dim_f: r.dim_f,
                local_ranks: pair_text(r.local_ranks),
                pv_im: r.pv_im.to_string(),
                pv_ker: r.pv_ker.to_string(),
                verdict: r.verdict.to_string(),
            })
            .map_err(csv_error)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(dims: BipartiteDims, r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rd.deserialize::<CsvRow>() {
            let c = rec.map_err(csv_error)?;
            rows.push(SurveyRow {
                ranks: parse_pair(&c.ranks)?,
                bound: c.bound,
                dim_f: c.dim_f,
                local_ranks: parse_pair(&c.local_ranks)?,
                pv_im: c.pv_im.parse()?,
                pv_ker: c.pv_ker.parse()?,
                verdict: c.verdict.parse()?,
            });
        }
        Ok(Self { dims, rows })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Per-target attempt statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub target: [usize; 2],
    pub attempts: usize,
    pub converged: usize,
    pub stalled: usize,
    pub max_iter: usize,
    /// Achieved ranks (after orienting `m ≥ n`) and how often.
    pub achieved: BTreeMap<String, usize>,
    pub classified: usize,
    pub errors: usize,
}

impl TargetStats {
    pub fn found_target(&self) -> bool {
        self.achieved.contains_key(&pair_text(self.target))
    }
}

/// A classified state with where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub target: [usize; 2],
    pub seed: u64,
    /// The state was replaced by its partial transpose to get `m ≥ n`.
    pub transposed: bool,
    pub classification: Classification,
}

/// One line of the progress journal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub dims: BipartiteDims,
    pub seed: u64,
    pub restarts: usize,
    pub stats: TargetStats,
    pub states: Vec<StateRecord>,
}

#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub dims: BipartiteDims,
    /// Searches per target.
    pub restarts: usize,
    pub seed: u64,
    pub search: SearchConfig,
    pub classify: ClassifyConfig,
    /// Classified states per `(ranks, local ranks)` group over the scan.
    pub per_group: usize,
    /// Defaults to [`scan_targets`].
    pub targets: Option<Vec<RankTarget>>,
}

impl ScanConfig {
    pub fn new(dims: BipartiteDims) -> Self {
        Self {
            dims,
            restarts: 10,
            seed: 0,
            search: SearchConfig::default(),
            classify: ClassifyConfig::default(),
            per_group: 2,
            targets: None,
        }
    }
}

/// Full scan output: the table, per-target statistics and every
/// classified state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyReport {
    pub dims: BipartiteDims,
    pub seed: u64,
    pub restarts: usize,
    pub table: SurveyTable,
    pub targets: Vec<TargetStats>,
    /// Targets where no converged state had the targeted ranks.
    pub not_found: Vec<[usize; 2]>,
    pub states: Vec<StateRecord>,
}

impl SurveyReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Orients a state so that `m ≥ n`.
fn oriented(st: PptState) -> Result<(PptState, bool)> {
    if st.ranks.0 >= st.ranks.1 {
        return Ok((st, false));
    }
    let mut t = PptState::certify(&st.rho.partial_transpose())?;
    t.seed = st.seed;
    t.target = st.target;
    t.residual = st.residual;
    t.iterations_used = st.iterations_used;
    Ok((t, true))
}

type GroupKey = ((usize, usize), (usize, usize));

/// Runs every target, skipping those already in `journal`, appending one
/// line per completed target to `journal_out`.
pub fn run_scan(
    cfg: &ScanConfig,
    journal: &[JournalEntry],
    mut journal_out: Option<&mut dyn Write>,
    mut progress: impl FnMut(&TargetStats),
) -> Result<SurveyReport> {
    let targets = cfg
        .targets
        .clone()
        .unwrap_or_else(|| scan_targets(cfg.dims));
    let mut done: HashMap<[usize; 2], &JournalEntry> = HashMap::new();
    for e in journal {
        if e.dims != cfg.dims || e.seed != cfg.seed || e.restarts != cfg.restarts {
            return Err(Error::InvalidInput(format!(
                "journal entry for {} seed {} restarts {} does not match this scan",
                e.dims, e.seed, e.restarts
            )));
        }
        done.insert(e.stats.target, e);
    }
    let mut groups: HashMap<GroupKey, usize> = HashMap::new();
    let mut all_stats = Vec::new();
    let mut all_states: Vec<StateRecord> = Vec::new();

    for (ti, target) in targets.iter().enumerate() {
        let key = [target.m, target.n];
        if let Some(e) = done.get(&key) {
            for s in &e.states {
                let c = &s.classification;
                *groups
                    .entry(((c.ranks[0], c.ranks[1]), (c.local_ranks[0], c.local_ranks[1])))
                    .or_default() += 1;
            }
            all_stats.push(e.stats.clone());
            all_states.extend(e.states.iter().cloned());
            progress(&e.stats);
            continue;
        }
        let target_seed = derive_seed(cfg.seed, ti);
        let outcomes: Vec<_> = (0..cfg.restarts)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(target_seed, i);
                (seed, search_once(cfg.dims, *target, &cfg.search, seed))
            })
            .collect();
        let mut stats = TargetStats {
            target: key,
            attempts: cfg.restarts,
            ..TargetStats::default()
        };
        let mut chosen = Vec::new();
        for (seed, out) in outcomes {
            match out.status {
                SearchStatus::Converged => stats.converged += 1,
                SearchStatus::AbortedStall => stats.stalled += 1,
                SearchStatus::AbortedMaxIter => stats.max_iter += 1,
            }
            let Some(st) = out.state else { continue };
            let (st, transposed) = match oriented(st) {
                Ok(v) => v,
                Err(_) => {
                    stats.errors += 1;
                    continue;
                }
            };
            *stats
                .achieved
                .entry(pair_text([st.ranks.0, st.ranks.1]))
                .or_default() += 1;
            let count = groups.entry((st.ranks, st.local_ranks)).or_default();
            if *count < cfg.per_group {
                *count += 1;
                chosen.push((seed, transposed, st));
            }
        }
        let classified: Vec<_> = chosen
            .into_par_iter()
            .map(|(seed, transposed, st)| {
                let ccfg = ClassifyConfig {
                    seed,
                    ..cfg.classify
                };
                (seed, transposed, classify_state(&st, &ccfg))
            })
            .collect();
        let mut states = Vec::new();
        for (seed, transposed, c) in classified {
            match c {
                Ok(classification) => states.push(StateRecord {
                    target: key,
                    seed,
                    transposed,
                    classification,
                }),
                Err(_) => stats.errors += 1,
            }
        }
        stats.classified = states.len();
        if let Some(w) = journal_out.as_deref_mut() {
            let entry = JournalEntry {
                dims: cfg.dims,
                seed: cfg.seed,
                restarts: cfg.restarts,
                stats: stats.clone(),
                states: states.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&entry)?)?;
            w.flush()?;
        }
        progress(&stats);
        all_stats.push(stats);
        all_states.extend(states);
    }

    let table =
        SurveyTable::from_classifications(cfg.dims, all_states.iter().map(|s| &s.classification));
    let not_found = all_stats
        .iter()
        .filter(|s| !s.found_target())
        .map(|s| s.target)
        .collect();
    Ok(SurveyReport {
        dims: cfg.dims,
        seed: cfg.seed,
        restarts: cfg.restarts,
        table,
        targets: all_stats,
        not_found,
        states: all_states,
    })
}

/// Reads a journal file; a missing file is an empty journal and a torn
/// final line is ignored.
pub fn read_journal(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>> {
    let f = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = std::io::BufReader::new(f).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => out.push(e),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}
