//! Ordinal comparison vectors and candidate-pair filtering.
//!
//! Each compared field maps a similarity value into one of `L_f + 1`
//! disagreement levels using left-open, right-closed intervals: with
//! breakpoints `b_0 < b_1 < … < b_{L-1}`, level 0 is `[min, b_0]`, level `l`
//! is `(b_{l-1}, b_l]` and level `L` is everything above `b_{L-1}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{FieldKind, FieldSchema, FieldValue, RecordEntry};
use crate::kvconf::{parse_list, KvFile};
use crate::unionfind::UnionFind;

/// A disagreement level, `None` when either record lacks the field.
pub type Level = Option<u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Normalized Levenshtein distance on name tokens.
    EditDistance { permute: bool },
    AbsoluteDifference,
    Binary,
}

impl Measure {
    fn range(self) -> (f64, f64) {
        match self {
            Measure::EditDistance { .. } | Measure::Binary => (0.0, 1.0),
            Measure::AbsoluteDifference => (0.0, f64::INFINITY),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::EditDistance { .. } => f.write_str("edit"),
            Measure::AbsoluteDifference => f.write_str("absdiff"),
            Measure::Binary => f.write_str("binary"),
        }
    }
}

/// How one schema field is compared and discretized.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldComparison {
    pub name: String,
    /// Column in the record schema.
    pub field: usize,
    pub measure: Measure,
    pub breakpoints: Vec<f64>,
}

impl FieldComparison {
    pub fn new(name: &str, field: usize, measure: Measure, breakpoints: Vec<f64>) -> Result<Self> {
        let (lo, _) = measure.range();
        if breakpoints.is_empty() {
            return Err(Error::Invalid(format!("`{name}`: need at least one breakpoint")));
        }
        if breakpoints[0] != lo {
            return Err(Error::Invalid(format!(
                "`{name}`: first breakpoint must be the measure minimum {lo}"
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
            return Err(Error::Invalid(format!("`{name}`: breakpoints must increase")));
        }
        if measure == Measure::Binary && breakpoints.len() != 1 {
            return Err(Error::Invalid(format!("`{name}`: binary fields have one breakpoint")));
        }
        Ok(FieldComparison {
            name: name.to_string(),
            field,
            measure,
            breakpoints,
        })
    }

    /// Number of non-zero levels, `L_f`.
    pub fn num_levels(&self) -> u8 {
        self.breakpoints.len() as u8
    }
}

/// Default breakpoints per field kind: names 0 / (0,.25] / (.25,.5] / (.5,1];
/// year and month 0 / 1 / 2–3 / 4+; day 0 / 1–2 / 3–7 / 8+; binary agree/disagree.
pub fn default_comparison(kind: FieldKind) -> (Measure, Vec<f64>) {
    match kind {
        FieldKind::Name => (Measure::EditDistance { permute: true }, vec![0.0, 0.25, 0.5]),
        FieldKind::Year | FieldKind::Month => (Measure::AbsoluteDifference, vec![0.0, 1.0, 3.0]),
        FieldKind::Day => (Measure::AbsoluteDifference, vec![0.0, 2.0, 7.0]),
        FieldKind::Categorical => (Measure::Binary, vec![0.0]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl CmpOp {
    fn holds(self, level: u8, bound: u8) -> bool {
        match self {
            CmpOp::Eq => level == bound,
            CmpOp::Ge => level >= bound,
            CmpOp::Gt => level > bound,
            CmpOp::Le => level <= bound,
            CmpOp::Lt => level < bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleAtom {
    /// Index into the comparison fields.
    pub field: usize,
    pub op: CmpOp,
    pub level: u8,
}

/// Conjunction of atoms. A pair matching any rule is fixed as non-coreferent.
/// A missing level makes its atom false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixRule {
    pub atoms: Vec<RuleAtom>,
}

impl FixRule {
    pub fn matches(&self, levels: &[Level]) -> bool {
        !self.atoms.is_empty()
            && self.atoms.iter().all(|a| match levels[a.field] {
                Some(l) => a.op.holds(l, a.level),
                None => false,
            })
    }

    fn parse(text: &str, fields: &[FieldComparison]) -> Result<Self> {
        let mut atoms = Vec::new();
        for part in text.split('&') {
            let part = part.trim();
            let (name, op, rest) = ["==", ">=", "<=", "=", ">", "<"]
                .iter()
                .find_map(|tok| part.split_once(tok).map(|(a, b)| (a.trim(), *tok, b.trim())))
                .ok_or_else(|| Error::Parse(format!("bad rule atom `{part}`")))?;
            let field = fields
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::Parse(format!("rule names unknown field `{name}`")))?;
            let op = match op {
                "=" | "==" => CmpOp::Eq,
                ">=" => CmpOp::Ge,
                ">" => CmpOp::Gt,
                "<=" => CmpOp::Le,
                _ => CmpOp::Lt,
            };
            let level = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad level in rule atom `{part}`")))?;
            atoms.push(RuleAtom { field, op, level });
        }
        Ok(FixRule { atoms })
    }
}

/// Per-field measures and breakpoints, optional single-field blocking and
/// the fix-rules that shrink `P` down to `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityConfig {
    pub fields: Vec<FieldComparison>,
    /// Schema column used for exact blocking.
    pub blocking: Option<usize>,
    pub rules: Vec<FixRule>,
}

impl SimilarityConfig {
    /// Every schema field compared with its kind's default measure.
    pub fn defaults(schema: &FieldSchema) -> Self {
        let fields = schema
            .fields()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let (measure, breaks) = default_comparison(f.kind);
                FieldComparison::new(&f.name, i, measure, breaks).expect("defaults are valid")
            })
            .collect();
        SimilarityConfig {
            fields,
            blocking: None,
            rules: Vec::new(),
        }
    }

    /// Parses the comparison config file.
    ///
    /// ```text
    /// [field given]
    /// measure = edit          # edit | absdiff | binary
    /// breakpoints = 0, 0.25, 0.5
    /// permute = true
    /// [blocking]
    /// field = year
    /// [rules]
    /// fix = given >= 3
    /// fix = family >= 3
    /// ```
    pub fn parse(text: &str, schema: &FieldSchema) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let mut fields = Vec::new();
        for (name, section) in kv.sections_with_prefix("field ") {
            let idx = schema
                .position(name)
                .ok_or_else(|| Error::Parse(format!("comparison names unknown field `{name}`")))?;
            let kind = schema.fields()[idx].kind;
            let (default_measure, default_breaks) = default_comparison(kind);
            let measure = match section.get("measure") {
                None => default_measure,
                Some("edit") => Measure::EditDistance {
                    permute: section.parse_or("permute", true)?,
                },
                Some("absdiff") => Measure::AbsoluteDifference,
                Some("binary") => Measure::Binary,
                Some(m) => return Err(Error::Parse(format!("unknown measure `{m}`"))),
            };
            match (measure, kind) {
                (Measure::EditDistance { .. }, k) if k != FieldKind::Name => {
                    return Err(Error::Invalid(format!("`{name}`: edit distance needs a name field")))
                }
                (Measure::AbsoluteDifference, k) if !k.is_date() => {
                    return Err(Error::Invalid(format!("`{name}`: absdiff needs a date field")))
                }
                _ => {}
            }
            let breaks = match section.get("breakpoints") {
                Some(b) => parse_list(b)?,
                None if measure == Measure::Binary => vec![0.0],
                None if std::mem::discriminant(&measure) == std::mem::discriminant(&default_measure) => {
                    default_breaks
                }
                None => return Err(Error::Missing(format!("breakpoints for `{name}`"))),
            };
            fields.push(FieldComparison::new(name, idx, measure, breaks)?);
        }
        if fields.is_empty() {
            return Err(Error::Invalid("comparison config lists no fields".into()));
        }
        let blocking = match kv.section("blocking").and_then(|s| s.get("field")) {
            None => None,
            Some(name) => Some(
                schema
                    .position(name)
                    .ok_or_else(|| Error::Parse(format!("blocking on unknown field `{name}`")))?,
            ),
        };
        let rules = match kv.section("rules") {
            None => Vec::new(),
            Some(s) => s
                .get_all("fix")
                .map(|r| FixRule::parse(r, &fields))
                .collect::<Result<_>>()?,
        };
        Ok(SimilarityConfig {
            fields,
            blocking,
            rules,
        })
    }

    pub fn read(path: &Path, schema: &FieldSchema) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, schema)
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn levels_per_field(&self) -> Vec<u8> {
        self.fields.iter().map(FieldComparison::num_levels).collect()
    }
}

/// Maps a similarity value to its disagreement level.
pub fn discretize(value: f64, field: &FieldComparison) -> Result<u8> {
    let (lo, hi) = field.measure.range();
    let out = || Error::OutOfRange {
        field: field.name.clone(),
        value,
    };
    if value.is_nan() || value < lo || value > hi || value < field.breakpoints[0] {
        return Err(out());
    }
    if field.measure == Measure::Binary && value != 0.0 && value != 1.0 {
        return Err(out());
    }
    Ok(field.breakpoints.iter().filter(|&&b| value > b).count() as u8)
}

/// Two-row Levenshtein distance over chars.
pub fn levenshtein(a: &[char], b: &[char], row: &mut Vec<usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    row.clear();
    row.extend(0..=b.len());
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let sub = diag + usize::from(ca != cb);
            row[j + 1] = sub.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

/// Concatenations of the token orders considered for alignment: every
/// permutation for up to three tokens, otherwise the identity plus each
/// adjacent swap. The identity order comes first.
fn token_orders(tokens: &[String], permute: bool) -> Vec<Vec<char>> {
    let concat = |order: &[usize]| -> Vec<char> {
        order.iter().flat_map(|&i| tokens[i].chars()).collect()
    };
    let n = tokens.len();
    let identity: Vec<usize> = (0..n).collect();
    let mut orders = vec![identity.clone()];
    if permute && n > 1 {
        if n <= 3 {
            let mut all = Vec::new();
            permutations(&mut identity.clone(), 0, &mut all);
            orders.extend(all.into_iter().filter(|o| *o != identity));
        } else {
            for k in 0..n - 1 {
                let mut o = identity.clone();
                o.swap(k, k + 1);
                orders.push(o);
            }
        }
    }
    let mut out: Vec<Vec<char>> = Vec::with_capacity(orders.len());
    for o in &orders {
        let c = concat(o);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Normalized edit distance between two token lists, minimized over token
/// orders of either side. Tokens are concatenated without separators.
pub fn normalized_edit_distance(a: &[String], b: &[String], permute: bool) -> Result<f64> {
    let pa = token_orders(a, permute);
    let pb = token_orders(b, permute);
    let mut row = Vec::new();
    name_distance(&pa, &pb, &mut row)
}

fn name_distance(pa: &[Vec<char>], pb: &[Vec<char>], row: &mut Vec<usize>) -> Result<f64> {
    let denom = pa[0].len().max(pb[0].len());
    if denom == 0 {
        return Err(Error::EmptyComparison);
    }
    let mut best = levenshtein(&pa[0], &pb[0], row);
    for x in pa.iter().skip(1) {
        if best == 0 {
            break;
        }
        best = best.min(levenshtein(x, &pb[0], row));
    }
    for y in pb.iter().skip(1) {
        if best == 0 {
            break;
        }
        best = best.min(levenshtein(&pa[0], y, row));
    }
    Ok(best as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonVector {
    /// Record indices with `i < j`.
    pub i: usize,
    pub j: usize,
    pub levels: Vec<Level>,
}

/// Per-field precomputation so each pair comparison allocates nothing.
enum Prepared {
    Missing,
    Name(Vec<Vec<char>>),
    Int(i64),
    Text(String),
}

fn prepare(records: &[RecordEntry], config: &SimilarityConfig) -> Vec<Vec<Prepared>> {
    records
        .iter()
        .map(|rec| {
            config
                .fields
                .iter()
                .map(|fc| match (&rec.values[fc.field], fc.measure) {
                    (None, _) => Prepared::Missing,
                    (Some(FieldValue::Tokens(t)), Measure::EditDistance { permute }) => {
                        Prepared::Name(token_orders(t, permute))
                    }
                    (Some(FieldValue::Tokens(t)), _) => Prepared::Text(t.join(" ")),
                    (Some(FieldValue::Int(v)), _) => Prepared::Int(*v),
                    (Some(FieldValue::Text(s)), _) => Prepared::Text(s.clone()),
                })
                .collect()
        })
        .collect()
}

fn compare_prepared(
    a: &[Prepared],
    b: &[Prepared],
    config: &SimilarityConfig,
    row: &mut Vec<usize>,
    out: &mut Vec<Level>,
) -> Result<()> {
    out.clear();
    for ((x, y), fc) in a.iter().zip(b).zip(&config.fields) {
        let value = match (x, y) {
            (Prepared::Missing, _) | (_, Prepared::Missing) => {
                out.push(None);
                continue;
            }
            (Prepared::Name(p), Prepared::Name(q)) => name_distance(p, q, row)?,
            (Prepared::Int(p), Prepared::Int(q)) => match fc.measure {
                Measure::Binary => f64::from(u8::from(p != q)),
                _ => (p - q).unsigned_abs() as f64,
            },
            (Prepared::Text(p), Prepared::Text(q)) => f64::from(u8::from(p != q)),
            _ => {
                return Err(Error::Invalid(format!(
                    "`{}`: mismatched value types",
                    fc.name
                )))
            }
        };
        out.push(Some(discretize(value, fc)?));
    }
    Ok(())
}

/// Compares one pair of records. Missing in either record gives a missing
/// level.
pub fn compare_pair(
    a: &RecordEntry,
    b: &RecordEntry,
    config: &SimilarityConfig,
) -> Result<Vec<Level>> {
    let prepared = prepare(&[a.clone(), b.clone()], config);
    let mut out = Vec::with_capacity(config.num_fields());
    compare_prepared(&prepared[0], &prepared[1], config, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// The pairs `P` to compare, in `(i, j)` order: all `r(r-1)/2` pairs, or
/// those that agree exactly on the blocking field. Records missing the
/// blocking field are paired with everyone.
fn partner_lists(records: &[RecordEntry], blocking: Option<usize>) -> Vec<Vec<usize>> {
    let r = records.len();
    let Some(field) = blocking else {
        return (0..r).map(|i| ((i + 1)..r).collect()).collect();
    };
    let mut groups: HashMap<&FieldValue, Vec<usize>> = HashMap::new();
    let mut missing = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        match &rec.values[field] {
            Some(v) => groups.entry(v).or_default().push(i),
            None => missing.push(i),
        }
    }
    (0..r)
        .map(|i| match &records[i].values[field] {
            None => ((i + 1)..r).collect(),
            Some(v) => {
                let mut js: Vec<usize> = groups[v].iter().copied().filter(|&j| j > i).collect();
                js.extend(missing.iter().copied().filter(|&j| j > i));
                js.sort_unstable();
                js
            }
        })
        .collect()
}

/// Number of pairs `|P|` that [`build_comparisons`] would produce.
pub fn count_pairs(records: &[RecordEntry], blocking: Option<usize>) -> u64 {
    partner_lists(records, blocking)
        .iter()
        .map(|v| v.len() as u64)
        .sum()
}

/// Streams every compared pair in `(i, j)` order to `sink`. Rows are
/// compared in parallel chunks and handed over in order.
pub fn for_each_comparison<F>(
    records: &[RecordEntry],
    config: &SimilarityConfig,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(ComparisonVector),
{
    if records.len() < 2 {
        return Err(Error::Invalid("need at least two records to compare".into()));
    }
    let prepared = prepare(records, config);
    let partners = partner_lists(records, config.blocking);
    const CHUNK: usize = 64;
    let rows: Vec<usize> = (0..records.len()).collect();
    for chunk in rows.chunks(CHUNK) {
        let results: Vec<Result<Vec<ComparisonVector>>> = chunk
            .par_iter()
            .map(|&i| {
                let mut row = Vec::new();
                let mut levels = Vec::with_capacity(config.num_fields());
                partners[i]
                    .iter()
                    .map(|&j| {
                        compare_prepared(&prepared[i], &prepared[j], config, &mut row, &mut levels)?;
                        Ok(ComparisonVector {
                            i,
                            j,
                            levels: levels.clone(),
                        })
                    })
                    .collect()
            })
            .collect();
        for res in results {
            for v in res? {
                sink(v);
            }
        }
    }
    Ok(())
}

/// Comparison vectors for every pair in `P`.
pub fn build_comparisons(
    records: &[RecordEntry],
    config: &SimilarityConfig,
) -> Result<Vec<ComparisonVector>> {
    let mut out = Vec::new();
    for_each_comparison(records, config, |v| out.push(v))?;
    Ok(out)
}

/// Counts of observed levels per field, `counts[f][l]` for `l` in `0..=L_f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelTallies {
    pub counts: Vec<Vec<u64>>,
}

impl LevelTallies {
    pub fn zeros(levels_per_field: &[u8]) -> Self {
        LevelTallies {
            counts: levels_per_field
                .iter()
                .map(|&l| vec![0; l as usize + 1])
                .collect(),
        }
    }

    pub fn add(&mut self, levels: &[Level]) {
        for (f, l) in levels.iter().enumerate() {
            if let Some(l) = l {
                self.counts[f][*l as usize] += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &LevelTallies) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Compared pairs `P`, free pairs `C ⊆ P` with their vectors, tallies for
/// the fixed pairs `P \ C`, and the connected components of the graph on `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    pub num_records: usize,
    pub field_names: Vec<String>,
    pub levels_per_field: Vec<u8>,
    /// `|P|`.
    pub num_compared: u64,
    /// `C`, sorted by `(i, j)`.
    pub candidates: Vec<ComparisonVector>,
    pub fixed_pairs: u64,
    pub fixed: LevelTallies,
    /// Components over records touched by `C`; each sorted, ordered by
    /// smallest member.
    pub components: Vec<Vec<usize>>,
}

/// Incrementally splits a stream of comparison vectors into `C` and
/// tallies for `P \ C`.
pub struct CandidateBuilder<'a> {
    rules: &'a [FixRule],
    sets: CandidateSets,
}

impl<'a> CandidateBuilder<'a> {
    pub fn new(
        num_records: usize,
        field_names: Vec<String>,
        levels_per_field: Vec<u8>,
        rules: &'a [FixRule],
    ) -> Self {
        let fixed = LevelTallies::zeros(&levels_per_field);
        CandidateBuilder {
            rules,
            sets: CandidateSets {
                num_records,
                field_names,
                levels_per_field,
                num_compared: 0,
                candidates: Vec::new(),
                fixed_pairs: 0,
                fixed,
                components: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, v: ComparisonVector) {
        self.sets.num_compared += 1;
        if self.rules.iter().any(|r| r.matches(&v.levels)) {
            self.sets.fixed_pairs += 1;
            self.sets.fixed.add(&v.levels);
        } else {
            self.sets.candidates.push(v);
        }
    }

    pub fn finish(mut self) -> CandidateSets {
        self.sets
            .candidates
            .sort_by_key(|v| (v.i, v.j));
        self.sets.components = components_of(self.sets.num_records, &self.sets.candidates);
        self.sets
    }
}

fn components_of(r: usize, candidates: &[ComparisonVector]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(r);
    let mut touched = vec![false; r];
    for v in candidates {
        uf.union(v.i, v.j);
        touched[v.i] = true;
        touched[v.j] = true;
    }
    let labels = uf.min_labels();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in (0..r).filter(|&i| touched[i]) {
        groups.entry(labels[i]).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Applies fix-rules to already-built comparison vectors.
pub fn filter_candidates(
    num_records: usize,
    vectors: impl IntoIterator<Item = ComparisonVector>,
    config: &SimilarityConfig,
) -> CandidateSets {
    let mut b = CandidateBuilder::new(
        num_records,
        config.fields.iter().map(|f| f.name.clone()).collect(),
        config.levels_per_field(),
        &config.rules,
    );
    for v in vectors {
        b.push(v);
    }
    b.finish()
}

/// Compares and filters in one streaming pass; only `C` vectors are kept.
pub fn build_candidates(records: &[RecordEntry], config: &SimilarityConfig) -> Result<CandidateSets> {
    let mut b = CandidateBuilder::new(
        records.len(),
        config.fields.iter().map(|f| f.name.clone()).collect(),
        config.levels_per_field(),
        &config.rules,
    );
    for_each_comparison(records, config, |v| b.push(v))?;
    Ok(b.finish())
}

fn render_level(l: Level) -> String {
    l.map(|v| v.to_string()).unwrap_or_else(|| "NA".to_string())
}

impl CandidateSets {
    pub fn num_fields(&self) -> usize {
        self.levels_per_field.len()
    }

    /// Total observed level counts over `C`.
    pub fn candidate_tallies(&self) -> LevelTallies {
        let mut t = LevelTallies::zeros(&self.levels_per_field);
        for v in &self.candidates {
            t.add(&v.levels);
        }
        t
    }

    /// Writes `candidates.csv`, `fixed_tallies.csv`, `components.csv` and
    /// `meta.txt` into `dir`. `membership` is the 0-based list of each
    /// record and is stored so later stages can rebuild capture histories.
    pub fn write_dir(&self, dir: &Path, membership: &[usize]) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join("candidates.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend(self.field_names.iter().cloned());
        w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
        for v in &self.candidates {
            let mut row = vec![v.i.to_string(), v.j.to_string()];
            row.extend(v.levels.iter().map(|&l| render_level(l)));
            w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("fixed_tallies.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["field", "level", "count"])
            .map_err(|e| Error::csv(&path, e))?;
        for (name, counts) in self.field_names.iter().zip(&self.fixed.counts) {
            for (l, c) in counts.iter().enumerate() {
                w.write_record([name.clone(), l.to_string(), c.to_string()])
                    .map_err(|e| Error::csv(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("components.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(["component", "record"])
            .map_err(|e| Error::csv(&path, e))?;
        for (c, members) in self.components.iter().enumerate() {
            for m in members {
                w.write_record([c.to_string(), m.to_string()])
                    .map_err(|e| Error::csv(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let num_lists = membership.iter().max().map(|m| m + 1).unwrap_or(0);
        let meta = format!(
            "records = {}\nlists = {}\nfields = {}\nlevels = {}\ncompared_pairs = {}\nfixed_pairs = {}\nmembership = {}\n",
            self.num_records,
            num_lists,
            self.field_names.join(" "),
            self.levels_per_field
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            self.num_compared,
            self.fixed_pairs,
            membership
                .iter()
                .map(|m| (m + 1).to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        let path = dir.join("meta.txt");
        std::fs::write(&path, meta).map_err(|e| Error::io(&path, e))
    }

    /// Reads a directory written by [`CandidateSets::write_dir`]; returns the
    /// sets and the 0-based list membership.
    pub fn read_dir(dir: &Path) -> Result<(Self, Vec<usize>)> {
        let meta = KvFile::read(&dir.join("meta.txt"))?;
        let m = meta.require_section("")?;
        let num_records: usize = m
            .require("records")?
            .parse()
            .map_err(|_| Error::Parse("meta: records".into()))?;
        let field_names: Vec<String> = m
            .require("fields")?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let levels_per_field: Vec<u8> = parse_list(m.require("levels")?)?;
        let num_compared: u64 = parse_list(m.require("compared_pairs")?)?
            .first()
            .copied()
            .unwrap_or(0);
        let fixed_pairs: u64 = parse_list(m.require("fixed_pairs")?)?
            .first()
            .copied()
            .unwrap_or(0);
        let membership: Vec<usize> = parse_list::<usize>(m.require("membership")?)?
            .into_iter()
            .map(|k| k.saturating_sub(1))
            .collect();
        if membership.len() != num_records || field_names.len() != levels_per_field.len() {
            return Err(Error::Invalid("meta.txt is inconsistent".into()));
        }

        let path = dir.join("candidates.csv");
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let mut candidates = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let parse_idx = |s: &str| -> Result<usize> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("{}: bad index `{s}`", path.display())))
            };
            let (i, j) = (parse_idx(&rec[0])?, parse_idx(&rec[1])?);
            if i >= j || j >= num_records {
                return Err(Error::Invalid(format!("{}: bad pair ({i},{j})", path.display())));
            }
            let mut levels = Vec::with_capacity(field_names.len());
            for (f, cell) in rec.iter().skip(2).enumerate() {
                let cell = cell.trim();
                if cell == "NA" {
                    levels.push(None);
                } else {
                    let l: u8 = cell
                        .parse()
                        .map_err(|_| Error::Parse(format!("{}: bad level `{cell}`", path.display())))?;
                    if f >= levels_per_field.len() || l > levels_per_field[f] {
                        return Err(Error::Invalid(format!("{}: level out of range", path.display())));
                    }
                    levels.push(Some(l));
                }
            }
            if levels.len() != field_names.len() {
                return Err(Error::Invalid(format!("{}: wrong column count", path.display())));
            }
            candidates.push(ComparisonVector { i, j, levels });
        }
        candidates.sort_by_key(|v| (v.i, v.j));

        let path = dir.join("fixed_tallies.csv");
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let mut fixed = LevelTallies::zeros(&levels_per_field);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let f = field_names
                .iter()
                .position(|n| n == rec[0].trim())
                .ok_or_else(|| Error::Parse(format!("{}: unknown field", path.display())))?;
            let l: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad level", path.display())))?;
            let c: u64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad count", path.display())))?;
            *fixed
                .counts[f]
                .get_mut(l)
                .ok_or_else(|| Error::Invalid(format!("{}: level out of range", path.display())))? = c;
        }
        let components = components_of(num_records, &candidates);
        Ok((
            CandidateSets {
                num_records,
                field_names,
                levels_per_field,
                num_compared,
                candidates,
                fixed_pairs,
                fixed,
                components,
            },
            membership,
        ))
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edit" => Ok(Measure::EditDistance { permute: true }),
            "edit-nopermute" => Ok(Measure::EditDistance { permute: false }),
            "absdiff" => Ok(Measure::AbsoluteDifference),
            "binary" => Ok(Measure::Binary),
            other => Err(Error::Parse(format!("unknown measure `{other}`"))),
        }
    }
}
