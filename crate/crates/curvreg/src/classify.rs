//! Grouping documents into hands from per-symbol ξ statistics: representative discovery
//! by Welch tests, then maximum-likelihood attribution of the rest.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{bonferroni_with_base, ks_normality, pair_test, student_ln_pdf, PairTest, SampleSummary};

/// Summary of the ξ values over all unordered instance pairs of one symbol in one document.
pub fn intra_stats(doc: &str, symbol: &str, n_instances: usize, scores: &[f64]) -> Result<SampleSummary> {
    if n_instances < 3 {
        return Err(Error::TooFewInstances { doc: doc.to_string(), symbol: symbol.to_string(), got: n_instances });
    }
    SampleSummary::from_values(scores)
}

/// Summary of the ξ values over all cross pairs of one symbol between two documents.
pub fn inter_stats(n1: usize, n2: usize, scores: &[f64]) -> Result<SampleSummary> {
    if n1 == 0 || n2 == 0 || n1 * n2 < 3 {
        return Err(Error::TooFewPairs { got: n1 * n2 });
    }
    SampleSummary::from_values(scores)
}

/// All ξ values of a batch grouped per document and symbol.
#[derive(Debug, Clone, Default)]
pub struct ComparisonTable {
    /// Instance counts per document and symbol.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub intra: BTreeMap<(String, String), Vec<f64>>,
    /// Keyed by (doc_a, doc_b, symbol) with doc_a < doc_b.
    pub inter: BTreeMap<(String, String, String), Vec<f64>>,
    pub ks_gate: bool,
}

impl ComparisonTable {
    pub fn new(counts: BTreeMap<String, BTreeMap<String, usize>>) -> Self {
        Self { counts, ..Default::default() }
    }

    pub fn docs(&self) -> Vec<String> {
        self.counts.keys().cloned().collect()
    }

    /// Adds one ξ value for an instance pair of `sym` between `doc_a` and `doc_b`.
    pub fn add(&mut self, doc_a: &str, doc_b: &str, sym: &str, xi: f64) {
        if doc_a == doc_b {
            self.intra.entry((doc_a.to_string(), sym.to_string())).or_default().push(xi);
        } else {
            let (a, b) = if doc_a < doc_b { (doc_a, doc_b) } else { (doc_b, doc_a) };
            self.inter.entry((a.to_string(), b.to_string(), sym.to_string())).or_default().push(xi);
        }
    }

    fn count(&self, doc: &str, sym: &str) -> usize {
        self.counts.get(doc).and_then(|m| m.get(sym)).copied().unwrap_or(0)
    }

    /// Number of expected pair values that are missing.
    pub fn missing(&self) -> usize {
        let docs = self.docs();
        let mut missing = 0;
        for (i, a) in docs.iter().enumerate() {
            for (sym, &n) in &self.counts[a] {
                let have = self.intra.get(&(a.clone(), sym.clone())).map_or(0, Vec::len);
                missing += (n * n.saturating_sub(1) / 2).saturating_sub(have);
                for b in &docs[i + 1..] {
                    let m = self.count(b, sym);
                    let have = self.inter.get(&(a.clone(), b.clone(), sym.clone())).map_or(0, Vec::len);
                    missing += (n * m).saturating_sub(have);
                }
            }
        }
        missing
    }

    /// True when every summary a test needs has at least 3 values.
    pub fn is_complete(&self) -> bool {
        let docs = self.docs();
        for (i, a) in docs.iter().enumerate() {
            for (sym, &n) in &self.counts[a] {
                if n >= 3 && self.intra.get(&(a.clone(), sym.clone())).map_or(0, Vec::len) < 3 {
                    return false;
                }
                for b in &docs[i + 1..] {
                    let m = self.count(b, sym);
                    if n >= 3 && m >= 3 && self.inter.get(&(a.clone(), b.clone(), sym.clone())).map_or(0, Vec::len) < 3 {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn intra_summary(&self, doc: &str, sym: &str) -> Result<SampleSummary> {
        let values = self.intra.get(&(doc.to_string(), sym.to_string())).map(Vec::as_slice).unwrap_or(&[]);
        intra_stats(doc, sym, self.count(doc, sym), values)
    }

    pub fn inter_summary(&self, a: &str, b: &str, sym: &str) -> Result<SampleSummary> {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        let values = self.inter.get(&(x.to_string(), y.to_string(), sym.to_string())).map(Vec::as_slice).unwrap_or(&[]);
        inter_stats(self.count(a, sym), self.count(b, sym), values)
    }

    fn gate_ok(&self, doc: &str, sym: &str) -> bool {
        if !self.ks_gate {
            return true;
        }
        let values = self.intra.get(&(doc.to_string(), sym.to_string())).map(Vec::as_slice).unwrap_or(&[]);
        match ks_normality(values) {
            Ok((_, pass)) => pass,
            Err(_) => false,
        }
    }

    /// The test between two documents on one symbol: the intra samples of both
    /// documents, pooled, against the inter sample. With the gate on, a document whose
    /// intra sample fails the normality check contributes nothing.
    pub fn test(&self, x: &str, y: &str, sym: &str) -> Option<PairTest> {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        if self.count(a, sym) < 3 || self.count(b, sym) < 3 {
            return None;
        }
        let side = |d: &str| if self.gate_ok(d, sym) { self.intra_summary(d, sym).ok() } else { None };
        let intra = match (side(a), side(b)) {
            (Some(p), Some(q)) => p.pooled(&q),
            (p, q) => p.or(q)?,
        };
        let inter = self.inter_summary(a, b, sym).ok()?;
        match pair_test(&intra, &inter) {
            Ok(t) => Some(t),
            Err(e) => {
                log::warn!("test {a}/{b} on {sym} skipped: {e}");
                None
            }
        }
    }

    pub fn common_symbols(&self, x: &str, y: &str) -> Vec<String> {
        let (Some(a), Some(b)) = (self.counts.get(x), self.counts.get(y)) else {
            return Vec::new();
        };
        a.keys().filter(|s| b.contains_key(*s)).cloned().collect()
    }
}

/// One discovery round: every candidate's α with the round's threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub round: usize,
    pub doc: String,
    /// Second document of the seed pair in round 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<String>,
    pub symbol: String,
    pub alpha: f64,
    pub threshold: f64,
    pub n_symbols: usize,
    pub promoted: bool,
    pub candidates: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub representatives: Vec<String>,
    pub alpha_trace: Vec<TraceStep>,
}

/// Representative discovery with α_T = `alpha_base` / n, n the number of distinct
/// symbols tested in the round.
pub fn discover_hands(table: &ComparisonTable, alpha_base: f64) -> Result<Discovery> {
    if !table.is_complete() {
        return Err(Error::IncompleteTable);
    }
    let docs = table.docs();
    if docs.is_empty() {
        return Err(Error::IncompleteTable);
    }
    // seed: the pair and symbol with the smallest tail probability
    let mut seed: Option<(f64, String, String, String)> = None;
    let mut seed_symbols = BTreeSet::new();
    for (i, a) in docs.iter().enumerate() {
        for b in &docs[i + 1..] {
            for sym in table.common_symbols(a, b) {
                if let Some(t) = table.test(a, b, &sym) {
                    seed_symbols.insert(sym.clone());
                    if seed.as_ref().is_none_or(|s| t.p_two_tail < s.0) {
                        seed = Some((t.p_two_tail, a.clone(), b.clone(), sym));
                    }
                }
            }
        }
    }
    let mut trace = Vec::new();
    let Some((p, a, b, sym)) = seed else {
        return Ok(Discovery { representatives: vec![docs[0].clone()], alpha_trace: trace });
    };
    let threshold = bonferroni_with_base(alpha_base, seed_symbols.len())?;
    let promoted = p < threshold;
    trace.push(TraceStep {
        round: 0,
        doc: a.clone(),
        partner: Some(b.clone()),
        symbol: sym,
        alpha: p,
        threshold,
        n_symbols: seed_symbols.len(),
        promoted,
        candidates: Vec::new(),
    });
    if !promoted {
        return Ok(Discovery { representatives: vec![docs[0].clone()], alpha_trace: trace });
    }
    let mut reps = vec![a, b];
    loop {
        let mut round_symbols = BTreeSet::new();
        let mut candidates: Vec<(String, f64, String)> = Vec::new();
        for d in docs.iter().filter(|d| !reps.contains(d)) {
            let mut best: Option<(f64, String)> = None;
            for sym in table.counts[d].keys() {
                // a symbol counts only when it is tested against every representative
                let ps: Option<Vec<f64>> = reps.iter().map(|r| table.test(d, r, sym).map(|t| t.p_two_tail)).collect();
                let Some(ps) = ps else { continue };
                round_symbols.insert(sym.clone());
                let worst = ps.into_iter().fold(0.0, f64::max);
                if best.as_ref().is_none_or(|b| worst < b.0) {
                    best = Some((worst, sym.clone()));
                }
            }
            if let Some((alpha, sym)) = best {
                candidates.push((d.clone(), alpha, sym));
            }
        }
        let Some((doc, alpha, sym)) = candidates.iter().min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0))).cloned() else {
            break;
        };
        let threshold = bonferroni_with_base(alpha_base, round_symbols.len())?;
        let promoted = alpha < threshold;
        trace.push(TraceStep {
            round: trace.len(),
            doc: doc.clone(),
            partner: None,
            symbol: sym,
            alpha,
            threshold,
            n_symbols: round_symbols.len(),
            promoted,
            candidates: candidates.into_iter().map(|c| (c.0, c.1)).collect(),
        });
        if !promoted {
            break;
        }
        reps.push(doc);
    }
    Ok(Discovery { representatives: reps, alpha_trace: trace })
}

/// Geometric mean of Student densities at the tests' t statistics.
pub fn likelihood_from_tests(tests: &[PairTest]) -> Result<f64> {
    if tests.is_empty() {
        return Err(Error::NoCommonSymbols(String::new()));
    }
    let s: f64 = tests.iter().map(|t| student_ln_pdf(t.t, t.dof.max(1))).sum();
    Ok((s / tests.len() as f64).exp())
}

/// Likelihood that `doc` shares the hand of `rep`, over their common tested symbols.
pub fn likelihood(table: &ComparisonTable, doc: &str, rep: &str) -> Result<f64> {
    let tests: Vec<PairTest> = table.common_symbols(doc, rep).iter().filter_map(|s| table.test(doc, rep, s)).collect();
    likelihood_from_tests(&tests).map_err(|_| Error::NoCommonSymbols(doc.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandPartition {
    pub representatives: Vec<String>,
    pub assignment: BTreeMap<String, usize>,
    /// Per-hand likelihoods; `None` where no symbol could be tested.
    pub likelihoods: BTreeMap<String, Vec<Option<f64>>>,
    pub alpha_trace: Vec<TraceStep>,
    pub unassigned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandReport {
    pub representative: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub hands: Vec<HandReport>,
    pub unassigned: Vec<String>,
    pub alpha_trace: Vec<TraceStep>,
}

impl HandPartition {
    pub fn hands(&self) -> usize {
        self.representatives.len()
    }

    pub fn report(&self) -> PartitionReport {
        let hands = self
            .representatives
            .iter()
            .enumerate()
            .map(|(k, r)| HandReport {
                representative: r.clone(),
                members: self.assignment.iter().filter(|(_, &h)| h == k).map(|(d, _)| d.clone()).collect(),
            })
            .collect();
        PartitionReport { hands, unassigned: self.unassigned.clone(), alpha_trace: self.alpha_trace.clone() }
    }

    /// Documents against hands with per-hand likelihoods, representatives marked `*`.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<16}", "document"));
        for k in 0..self.hands() {
            out.push_str(&format!(" {:>12}", format!("W{}", k + 1)));
        }
        out.push_str("   hand\n");
        for (doc, ls) in &self.likelihoods {
            out.push_str(&format!("{doc:<16}"));
            for l in ls {
                match l {
                    Some(v) => out.push_str(&format!(" {v:>12.4e}")),
                    None => out.push_str(&format!(" {:>12}", "-")),
                }
            }
            let hand = match self.assignment.get(doc) {
                Some(&h) if self.representatives[h] == *doc => format!("W{}*", h + 1),
                Some(&h) => format!("W{}", h + 1),
                None => "unassigned".to_string(),
            };
            out.push_str(&format!("   {hand}\n"));
        }
        out
    }
}

/// Assigns every document to the representative of highest likelihood.
pub fn attribute(table: &ComparisonTable, representatives: &[String], alpha_trace: Vec<TraceStep>) -> Result<HandPartition> {
    if representatives.is_empty() {
        return Err(Error::BadN);
    }
    let mut assignment = BTreeMap::new();
    let mut likelihoods = BTreeMap::new();
    let mut unassigned = Vec::new();
    for doc in table.docs() {
        let ls: Vec<Option<f64>> = representatives.iter().map(|r| likelihood(table, &doc, r).ok()).collect();
        if let Some(k) = representatives.iter().position(|r| *r == doc) {
            assignment.insert(doc.clone(), k);
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (k, l) in ls.iter().enumerate() {
                if let Some(v) = *l {
                    match best {
                        Some((_, b)) if v == b => log::warn!("{doc}: likelihood tie between hands, keeping the lower index"),
                        Some((_, b)) if v <= b => {}
                        _ => best = Some((k, v)),
                    }
                }
            }
            match best {
                Some((k, _)) => {
                    assignment.insert(doc.clone(), k);
                }
                None => {
                    log::warn!("{doc}: no symbol in common with any representative");
                    unassigned.push(doc.clone());
                }
            }
        }
        likelihoods.insert(doc, ls);
    }
    Ok(HandPartition { representatives: representatives.to_vec(), assignment, likelihoods, alpha_trace, unassigned })
}

/// Discovery followed by attribution.
pub fn classify(table: &ComparisonTable, alpha_base: f64) -> Result<HandPartition> {
    let d = discover_hands(table, alpha_base)?;
    attribute(table, &d.representatives, d.alpha_trace)
}

/// The same pipeline for arbitrary shape groups, optionally dropping symbols whose intra
/// scores fail the KS normality check.
pub fn classify_generic(table: &ComparisonTable, alpha_base: f64, distribution_gate: bool) -> Result<HandPartition> {
    let mut t = table.clone();
    t.ks_gate = distribution_gate;
    classify(&t, alpha_base)
}

/// The group with the least mean fitting error; ties go to the first label.
pub fn nearest_mean_group<'a>(errors: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for (label, e) in errors {
        if e.is_empty() {
            continue;
        }
        let m = e.iter().sum::<f64>() / e.len() as f64;
        if best.is_none_or(|b| m < b.1) {
            best = Some((label, m));
        }
    }
    best.map(|b| b.0)
}
