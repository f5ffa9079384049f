//! Append-only JSON Lines cache of pairwise comparisons, and the batch runner that fills
//! it.
//!
//! A batch runs in two phases. Registrations are appended to `comparisons.pending.jsonl`
//! as workers finish, so an interrupted run resumes without repeating work. Once every
//! pair is available ρ is calibrated over the full batch and the scored records are
//! appended to `comparisons.jsonl` in key order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::ComparisonTable;
use crate::config::{RhoMode, RunConfig, ENGINE_VERSION};
use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::register::{match_curves, MatchOutcome, Reference};
use crate::similarity::{calibrate_rho, normalized_terms};

pub const STORE_FILE: &str = "comparisons.jsonl";
pub const PENDING_FILE: &str = "comparisons.pending.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub doc_a: String,
    pub sym: String,
    pub idx_a: usize,
    pub doc_b: String,
    pub idx_b: usize,
}

impl RecordKey {
    pub fn new(doc_a: &str, idx_a: usize, doc_b: &str, idx_b: usize, sym: &str) -> Self {
        Self { doc_a: doc_a.into(), sym: sym.into(), idx_a, doc_b: doc_b.into(), idx_b }
    }

    pub fn is_canonical(&self) -> bool {
        (&self.doc_a, self.idx_a) <= (&self.doc_b, self.idx_b)
    }

    pub fn canonical(mut self) -> Self {
        if !self.is_canonical() {
            std::mem::swap(&mut self.doc_a, &mut self.doc_b);
            std::mem::swap(&mut self.idx_a, &mut self.idx_b);
        }
        self
    }
}

/// Registration result of one pair before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub gx: f64,
    pub gy: f64,
    pub zeta_min: f64,
    pub eps1: f64,
    pub euclid_min: f64,
    pub len1: f64,
    pub len2: f64,
    pub zeta_s: f64,
    pub theta_m: f64,
    pub converged: bool,
}

impl PairOutcome {
    pub fn from_match(m: &MatchOutcome) -> Result<Self> {
        let (zeta_s, theta_m) = normalized_terms(m)?;
        Ok(Self {
            a: m.pose.a,
            b: m.pose.b,
            t: m.pose.t,
            gx: m.pose.gx,
            gy: m.pose.gy,
            zeta_min: m.zeta_min,
            eps1: m.eps1,
            euclid_min: m.euclid_min,
            len1: m.len1,
            len2: m.len2,
            zeta_s,
            theta_m,
            converged: m.converged,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PendingRecord {
    #[serde(flatten)]
    key: RecordKey,
    #[serde(flatten)]
    outcome: PairOutcome,
}

/// One stored comparison; serialized flat with a fixed field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub doc_a: String,
    pub sym: String,
    pub idx_a: usize,
    pub doc_b: String,
    pub idx_b: usize,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub gx: f64,
    pub gy: f64,
    pub zeta_min: f64,
    pub eps1: f64,
    pub euclid_min: f64,
    pub len1: f64,
    pub len2: f64,
    pub zeta_s: f64,
    pub theta_m: f64,
    pub xi: f64,
    pub converged: bool,
    pub engine_version: String,
    pub ts: u64,
}

impl ComparisonRecord {
    pub fn new(key: RecordKey, o: &PairOutcome, rho: f64, ts: u64) -> Self {
        Self {
            doc_a: key.doc_a,
            sym: key.sym,
            idx_a: key.idx_a,
            doc_b: key.doc_b,
            idx_b: key.idx_b,
            a: o.a,
            b: o.b,
            t: o.t,
            gx: o.gx,
            gy: o.gy,
            zeta_min: o.zeta_min,
            eps1: o.eps1,
            euclid_min: o.euclid_min,
            len1: o.len1,
            len2: o.len2,
            zeta_s: o.zeta_s,
            theta_m: o.theta_m,
            xi: o.zeta_s + rho * o.theta_m,
            converged: o.converged,
            engine_version: ENGINE_VERSION.to_string(),
            ts,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(&self.doc_a, self.idx_a, &self.doc_b, self.idx_b, &self.sym)
    }

    /// Everything except the timestamp.
    fn same_payload(&self, other: &Self) -> bool {
        Self { ts: 0, ..self.clone() } == Self { ts: 0, ..other.clone() }
    }
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let last = lines.len().saturating_sub(1);
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            // a torn final line is what an interrupted append leaves behind
            Err(e) if i == last => log::warn!("{}: ignoring truncated last line: {e}", path.display()),
            Err(e) => return Err(Error::Parse { path: path.to_path_buf(), msg: format!("line {}: {e}", i + 1) }),
        }
    }
    Ok(out)
}

fn append_line<T: Serialize>(file: &mut File, value: &T) -> Result<()> {
    let mut line = serde_json::to_string(value)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    Ok(())
}

/// The store directory: final records indexed by key, plus the pending journal.
#[derive(Debug)]
pub struct Store {
    dir: Option<PathBuf>,
    index: BTreeMap<RecordKey, ComparisonRecord>,
    pending: BTreeMap<RecordKey, PairOutcome>,
}

impl Store {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self { dir: None, index: BTreeMap::new(), pending: BTreeMap::new() }
    }

    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut index = BTreeMap::new();
        for r in read_lines::<ComparisonRecord>(&dir.join(STORE_FILE))? {
            index.insert(r.key(), r);
        }
        let mut pending = BTreeMap::new();
        for r in read_lines::<PendingRecord>(&dir.join(PENDING_FILE))? {
            pending.insert(r.key, r.outcome);
        }
        Ok(Self { dir: Some(dir.to_path_buf()), index, pending })
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(STORE_FILE))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ComparisonRecord> {
        self.index.values()
    }

    pub fn get(&self, key: &RecordKey) -> Option<&ComparisonRecord> {
        self.index.get(&key.clone().canonical())
    }

    /// Appends a record; a duplicate with the same payload is a no-op.
    pub fn put(&mut self, record: ComparisonRecord) -> Result<()> {
        let key = record.key();
        if !key.is_canonical() {
            return Err(Error::NonCanonicalKey(format!("{key:?}")));
        }
        if let Some(old) = self.index.get(&key) {
            if old.same_payload(&record) {
                return Ok(());
            }
            return Err(Error::ConflictingRecord(format!("{key:?}")));
        }
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(STORE_FILE))?;
            append_line(&mut f, &record)?;
        }
        self.index.insert(key, record);
        Ok(())
    }

    fn pending_file(&self) -> Result<Option<File>> {
        match &self.dir {
            Some(d) => Ok(Some(OpenOptions::new().create(true).append(true).open(d.join(PENDING_FILE))?)),
            None => Ok(None),
        }
    }

    fn clear_pending(&mut self) -> Result<()> {
        self.pending.clear();
        if let Some(d) = &self.dir {
            let p = d.join(PENDING_FILE);
            if p.exists() {
                std::fs::remove_file(p)?;
            }
        }
        Ok(())
    }
}

/// One instance slot of a batch document; a load failure is kept so only its pairs fail.
pub type Instance = std::result::Result<Contour, String>;

#[derive(Debug, Clone)]
pub struct BatchDocument {
    pub id: String,
    pub instances: BTreeMap<String, Vec<Instance>>,
}

impl From<&crate::contour::Document> for BatchDocument {
    fn from(d: &crate::contour::Document) -> Self {
        Self {
            id: d.id.clone(),
            instances: d.instances.iter().map(|(k, v)| (k.clone(), v.iter().cloned().map(Ok).collect())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedPair {
    pub key: RecordKey,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub table: ComparisonTable,
    pub rho: f64,
    pub computed: usize,
    pub reused: usize,
    pub failed: Vec<FailedPair>,
}

/// Every pair a classification needs, in canonical key order.
pub fn required_pairs(docs: &[BatchDocument]) -> Vec<RecordKey> {
    let mut docs: Vec<&BatchDocument> = docs.iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut keys = BTreeSet::new();
    for (i, da) in docs.iter().enumerate() {
        for (sym, inst) in &da.instances {
            for x in 0..inst.len() {
                for y in x + 1..inst.len() {
                    keys.insert(RecordKey::new(&da.id, x, &da.id, y, sym));
                }
            }
            for db in &docs[i + 1..] {
                let Some(other) = db.instances.get(sym) else { continue };
                for x in 0..inst.len() {
                    for y in 0..other.len() {
                        keys.insert(RecordKey::new(&da.id, x, &db.id, y, sym));
                    }
                }
            }
        }
    }
    keys.into_iter().collect()
}

fn prepare(c: &Instance, n: usize) -> std::result::Result<Contour, String> {
    let c = c.as_ref().map_err(Clone::clone)?;
    c.resample(n).map_err(|e| e.to_string())
}

/// Registers every required pair missing from the store with `parallelism` workers, then
/// scores and stores them. The result does not depend on `parallelism`.
pub fn run_batch(docs: &[BatchDocument], config: &RunConfig, store: &mut Store, parallelism: usize) -> Result<BatchOutcome> {
    let by_id: BTreeMap<&str, &BatchDocument> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let required = required_pairs(docs);
    let todo: Vec<&RecordKey> = required.iter().filter(|k| !store.index.contains_key(k) && !store.pending.contains_key(k)).collect();
    let reused = required.len() - todo.len();

    // group by reference instance so each field is built once
    let mut groups: BTreeMap<(&str, &str, usize), Vec<&RecordKey>> = BTreeMap::new();
    for k in &todo {
        groups.entry((k.doc_a.as_str(), k.sym.as_str(), k.idx_a)).or_default().push(k);
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build().map_err(|e| Error::Manifest(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<(RecordKey, std::result::Result<PairOutcome, String>)>();
    let n = config.resample_n;
    let opts = &config.register;
    let mut failed = Vec::new();
    let mut computed = 0;
    let mut journal = store.pending_file()?;
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(|| {
            pool.install(|| {
                groups.par_iter().for_each_with(tx, |tx, ((doc_a, sym, idx_a), keys)| {
                    let reference = by_id[doc_a].instances[*sym]
                        .get(*idx_a)
                        .ok_or_else(|| "missing instance".to_string())
                        .and_then(|c| prepare(c, n))
                        .and_then(|c| Reference::new(c, opts).map_err(|e| e.to_string()));
                    for k in keys {
                        let r = reference.as_ref().map_err(Clone::clone).and_then(|reference| {
                            let moving = by_id[k.doc_b.as_str()].instances[&k.sym]
                                .get(k.idx_b)
                                .ok_or_else(|| "missing instance".to_string())
                                .and_then(|c| prepare(c, n))?;
                            let m = match_curves(reference, &moving, opts).map_err(|e| e.to_string())?;
                            PairOutcome::from_match(&m).map_err(|e| e.to_string())
                        });
                        let _ = tx.send(((*k).clone(), r));
                    }
                });
            });
        });
        // the single writer
        for (key, r) in rx {
            match r {
                Ok(o) => {
                    if let Some(f) = journal.as_mut() {
                        append_line(f, &PendingRecord { key: key.clone(), outcome: o.clone() })?;
                    }
                    store.pending.insert(key, o);
                    computed += 1;
                }
                Err(error) => {
                    log::warn!("pair {key:?} failed: {error}");
                    failed.push(FailedPair { key, error });
                }
            }
        }
        Ok(())
    })?;
    failed.sort_by(|a, b| a.key.cmp(&b.key));

    let outcomes: Vec<(&RecordKey, (f64, f64))> = required
        .iter()
        .filter_map(|k| {
            let terms = match store.index.get(k) {
                Some(r) => (r.zeta_s, r.theta_m),
                None => store.pending.get(k).map(|o| (o.zeta_s, o.theta_m))?,
            };
            Some((k, terms))
        })
        .collect();
    let rho = match config.rho {
        RhoMode::Fixed(r) => r,
        RhoMode::Auto => {
            let sample: Vec<(f64, f64)> = outcomes.iter().map(|(_, t)| *t).collect();
            calibrate_rho(&sample).unwrap_or_else(|e| {
                log::warn!("rho calibration failed ({e}); using 1");
                1.0
            })
        }
    };
    let ts = config.timestamp();
    let mut finals: Vec<ComparisonRecord> = store
        .pending
        .iter()
        .filter(|(k, _)| !store.index.contains_key(k))
        .map(|(k, o)| ComparisonRecord::new(k.clone(), o, rho, ts))
        .collect();
    finals.sort_by_key(|r| r.key());
    for r in finals {
        store.put(r)?;
    }
    store.clear_pending()?;

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for d in docs {
        counts.insert(d.id.clone(), d.instances.iter().map(|(s, v)| (s.clone(), v.len())).collect());
    }
    let mut table = ComparisonTable::new(counts);
    for (k, (z, t)) in outcomes {
        table.add(&k.doc_a, &k.doc_b, &k.sym, z + rho * t);
    }
    Ok(BatchOutcome { table, rho, computed, reused, failed })
}
