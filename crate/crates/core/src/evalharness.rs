//! Per-section metric tables and aggregation of human 1–5 ratings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::io::{BufRead, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::Metric;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Bible,
    Tales,
    Constitution,
    Games,
    Fiction,
    Wiki,
    Other,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Bible,
        Section::Tales,
        Section::Constitution,
        Section::Games,
        Section::Fiction,
        Section::Wiki,
        Section::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Bible => "bible",
            Section::Tales => "tales",
            Section::Constitution => "constitution",
            Section::Games => "games",
            Section::Fiction => "fiction",
            Section::Wiki => "wiki",
            Section::Other => "other",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Section::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown section `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalItem {
    pub hyp: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub section: Section,
}

pub fn read_items<R: BufRead>(reader: R, origin: &str) -> Result<Vec<EvalItem>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionScores {
    pub by_section: BTreeMap<Section, f64>,
    pub overall: f64,
}

pub fn score_by_section(items: &[EvalItem], metric: Metric) -> Result<SectionScores> {
    if items.is_empty() {
        return Err(Error::invalid("no evaluation items"));
    }
    let mut groups: BTreeMap<Section, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for it in items {
        let g = groups.entry(it.section).or_default();
        g.0.push(&it.hyp);
        g.1.push(&it.reference);
    }
    let mut by_section = BTreeMap::new();
    for (section, (h, r)) in &groups {
        by_section.insert(*section, metric.score(h, r)?);
    }
    let hyps: Vec<&str> = items.iter().map(|i| i.hyp.as_str()).collect();
    let refs: Vec<&str> = items.iter().map(|i| i.reference.as_str()).collect();
    Ok(SectionScores {
        by_section,
        overall: metric.score(&hyps, &refs)?,
    })
}

/// Rows are sections (plus `overall`), columns are metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionReport {
    pub metrics: Vec<Metric>,
    pub scores: Vec<SectionScores>,
    pub counts: BTreeMap<Section, usize>,
}

impl SectionReport {
    pub fn build(items: &[EvalItem], metrics: &[Metric]) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::invalid("no metrics requested"));
        }
        let scores = metrics
            .iter()
            .map(|&m| score_by_section(items, m))
            .collect::<Result<Vec<_>>>()?;
        let mut counts = BTreeMap::new();
        for it in items {
            *counts.entry(it.section).or_insert(0) += 1;
        }
        Ok(SectionReport {
            metrics: metrics.to_vec(),
            scores,
            counts,
        })
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["section".to_string(), "n".to_string()];
        header.extend(self.metrics.iter().map(|m| m.name().to_string()));
        rows.push(header);
        for (section, n) in &self.counts {
            let mut row = vec![section.to_string(), n.to_string()];
            row.extend(self.scores.iter().map(|s| format!("{:.2}", s.by_section[section])));
            rows.push(row);
        }
        let mut total = vec!["overall".to_string(), self.counts.values().sum::<usize>().to_string()];
        total.extend(self.scores.iter().map(|s| format!("{:.2}", s.overall)));
        rows.push(total);

        let ncol = rows[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    let _ = write!(line, "{cell}{}", " ".repeat(pad));
                } else {
                    let _ = write!(line, "  {}{cell}", " ".repeat(pad));
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut sections = serde_json::Map::new();
        for (section, n) in &self.counts {
            let mut row = serde_json::Map::new();
            row.insert("n".into(), (*n).into());
            for (m, s) in self.metrics.iter().zip(&self.scores) {
                row.insert(m.name().into(), s.by_section[section].into());
            }
            sections.insert(section.to_string(), row.into());
        }
        let mut overall = serde_json::Map::new();
        for (m, s) in self.metrics.iter().zip(&self.scores) {
            overall.insert(m.name().into(), s.overall.into());
        }
        serde_json::json!({ "sections": sections, "overall": overall })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationSummary {
    pub per_pair_min: BTreeMap<String, u8>,
    pub mean_pessimistic: f64,
    pub acceptance_rate: f64,
    pub n_pairs: usize,
    pub n_records: usize,
}

pub const DEFAULT_ACCEPTANCE: u8 = 3;

fn check_score(r: &AnnotationRecord) -> Result<()> {
    if !(1..=5).contains(&r.score) {
        return Err(Error::invalid(format!(
            "score {} for pair `{}` by `{}` outside 1..5",
            r.score, r.pair_id, r.annotator_id
        )));
    }
    Ok(())
}

/// Collapses repeated (pair, annotator) ratings to the last one, takes the
/// minimum rating per pair and averages those minima over pairs.
pub fn aggregate_annotations(records: &[AnnotationRecord], threshold: u8) -> Result<AnnotationSummary> {
    if records.is_empty() {
        return Err(Error::invalid("no annotation records"));
    }
    let mut last: HashMap<(&str, &str), u8> = HashMap::new();
    for r in records {
        check_score(r)?;
        last.insert((&r.pair_id, &r.annotator_id), r.score);
    }
    let mut per_pair_min: BTreeMap<String, u8> = BTreeMap::new();
    for ((pair, _), score) in last {
        per_pair_min
            .entry(pair.to_owned())
            .and_modify(|m| *m = (*m).min(score))
            .or_insert(score);
    }
    let n_pairs = per_pair_min.len();
    let sum: u64 = per_pair_min.values().map(|&s| s as u64).sum();
    let accepted = per_pair_min.values().filter(|&&s| s >= threshold).count();
    Ok(AnnotationSummary {
        mean_pessimistic: sum as f64 / n_pairs as f64,
        acceptance_rate: accepted as f64 / n_pairs as f64,
        per_pair_min,
        n_pairs,
        n_records: records.len(),
    })
}

/// Mean rating per annotator over every record they produced.
pub fn annotator_calibration(records: &[AnnotationRecord]) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in records {
        check_score(r)?;
        let e = acc.entry(r.annotator_id.clone()).or_default();
        e.0 += r.score as u64;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s as f64 / n as f64)).collect())
}

/// CSV with header `pair_id,annotator_id,score`.
pub fn read_annotations_csv<R: Read>(reader: R, origin: &str) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        // line numbers count the header
        let rec: AnnotationRecord = rec.map_err(|e| Error::parse(origin, i + 2, e.to_string()))?;
        check_score(&rec).map_err(|e| Error::parse(origin, i + 2, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
