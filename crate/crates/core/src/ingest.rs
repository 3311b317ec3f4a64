//! Loading and standardizing the record lists.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kvconf::KvFile;

/// Column carried through for reporting only.
pub const LABEL_COLUMN: &str = "record_label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    Name,
    Year,
    Month,
    Day,
    Categorical,
}

impl FieldKind {
    pub fn is_date(self) -> bool {
        matches!(self, FieldKind::Year | FieldKind::Month | FieldKind::Day)
    }

    fn bounds(self) -> Option<(i64, i64)> {
        match self {
            FieldKind::Month => Some((1, 12)),
            FieldKind::Day => Some((1, 31)),
            _ => None,
        }
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "name" | "name-string" => Ok(FieldKind::Name),
            "year" | "date-year" => Ok(FieldKind::Year),
            "month" | "date-month" => Ok(FieldKind::Month),
            "day" | "date-day" => Ok(FieldKind::Day),
            "categorical" => Ok(FieldKind::Categorical),
            other => Err(Error::Parse(format!("unknown field kind `{other}`"))),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Name => "name-string",
            FieldKind::Year => "date-year",
            FieldKind::Month => "date-month",
            FieldKind::Day => "date-day",
            FieldKind::Categorical => "categorical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    fields: Vec<FieldSpec>,
}

impl FieldSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Invalid("schema needs at least one field".into()));
        }
        let mut seen = HashSet::new();
        for f in &fields {
            if f.name.starts_with("__") || f.name == LABEL_COLUMN {
                return Err(Error::Invalid(format!("reserved field name `{}`", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate field name `{}`", f.name)));
            }
        }
        Ok(FieldSchema { fields })
    }

    /// Schema file: one `name = kind [required]` line per field, in order.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let mut fields = Vec::new();
        for section in &kv.sections {
            for (name, spec) in &section.entries {
                let mut words = spec.split_whitespace();
                let kind = words
                    .next()
                    .ok_or_else(|| Error::Parse(format!("field `{name}` has no kind")))?
                    .parse()?;
                let required = match words.next() {
                    None => false,
                    Some("required") => true,
                    Some(w) => return Err(Error::Parse(format!("unexpected `{w}` for `{name}`"))),
                };
                fields.push(FieldSpec {
                    name: name.clone(),
                    kind,
                    required,
                });
            }
        }
        Self::new(fields)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.fields {
            out.push_str(&format!(
                "{} = {}{}\n",
                f.name,
                f.kind,
                if f.required { " required" } else { "" }
            ));
        }
        out
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldValue {
    Tokens(Vec<String>),
    Int(i64),
    Text(String),
}

impl FieldValue {
    fn render(&self) -> String {
        match self {
            FieldValue::Tokens(t) => t.join(" "),
            FieldValue::Int(v) => v.to_string(),
            FieldValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// Global index in concatenation order, 0-based.
    pub record_index: usize,
    /// 1-based list number.
    pub list_index: usize,
    pub label: Option<String>,
    pub values: Vec<Option<FieldValue>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceList {
    pub list_index: usize,
    pub label: String,
    pub size: usize,
}

/// Every record of every list, with the schema they were parsed under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordStore {
    pub schema: FieldSchema,
    pub lists: Vec<SourceList>,
    pub records: Vec<RecordEntry>,
}

impl RecordStore {
    pub fn num_records(&self) -> usize {
        self.records.len()
    }

    pub fn num_lists(&self) -> usize {
        self.lists.len()
    }

    /// 0-based list of each record, indexed by record.
    pub fn membership(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.list_index - 1).collect()
    }

    /// Writes the normalized store: `__list`, `__idx`, `record_label`, then
    /// one column per schema field. Name tokens are space-joined; missing
    /// values are empty cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec!["__list".to_string(), "__idx".to_string(), LABEL_COLUMN.to_string()];
        header.extend(self.schema.fields.iter().map(|f| f.name.clone()));
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for rec in &self.records {
            let mut row = vec![
                rec.list_index.to_string(),
                rec.record_index.to_string(),
                rec.label.clone().unwrap_or_default(),
            ];
            row.extend(
                rec.values
                    .iter()
                    .map(|v| v.as_ref().map(FieldValue::render).unwrap_or_default()),
            );
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a store written by [`RecordStore::write_csv`].
    pub fn read_csv(path: &Path, schema: &FieldSchema) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
        let cols = ColumnMap::new(path, &header, schema)?;
        let list_col = find_col(path, &header, "__list")?;
        let idx_col = find_col(path, &header, "__idx")?;
        let mut records = Vec::new();
        let mut sizes: Vec<usize> = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let list_index: usize = rec[list_col]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad __list on row {}", path.display(), row + 1)))?;
            let record_index: usize = rec[idx_col]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad __idx on row {}", path.display(), row + 1)))?;
            if record_index != records.len() || list_index == 0 {
                return Err(Error::Invalid(format!(
                    "{}: row {} breaks record index order",
                    path.display(),
                    row + 1
                )));
            }
            if sizes.len() < list_index {
                sizes.resize(list_index, 0);
            }
            sizes[list_index - 1] += 1;
            let (label, values) = cols.parse_row(path, row + 1, &rec, schema, false)?;
            records.push(RecordEntry {
                record_index,
                list_index,
                label,
                values,
            });
        }
        let lists = sizes
            .into_iter()
            .enumerate()
            .map(|(k, size)| SourceList {
                list_index: k + 1,
                label: format!("list{}", k + 1),
                size,
            })
            .collect();
        Ok(RecordStore {
            schema: schema.clone(),
            lists,
            records,
        })
    }
}

fn find_col(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            name: name.to_string(),
        })
}

struct ColumnMap {
    field_cols: Vec<usize>,
    label_col: Option<usize>,
}

impl ColumnMap {
    fn new(path: &Path, header: &csv::StringRecord, schema: &FieldSchema) -> Result<Self> {
        let mut seen = HashSet::new();
        for h in header.iter() {
            if !seen.insert(h.trim()) {
                return Err(Error::DuplicateHeader {
                    path: path.to_path_buf(),
                    name: h.trim().to_string(),
                });
            }
        }
        let field_cols = schema
            .fields
            .iter()
            .map(|f| find_col(path, header, &f.name))
            .collect::<Result<Vec<_>>>()?;
        let label_col = header.iter().position(|h| h.trim() == LABEL_COLUMN);
        Ok(ColumnMap {
            field_cols,
            label_col,
        })
    }

    fn parse_row(
        &self,
        path: &Path,
        row: usize,
        rec: &csv::StringRecord,
        schema: &FieldSchema,
        enforce_required: bool,
    ) -> Result<(Option<String>, Vec<Option<FieldValue>>)> {
        let label = self
            .label_col
            .and_then(|c| rec.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let mut values = Vec::with_capacity(schema.fields.len());
        for (spec, &col) in schema.fields.iter().zip(&self.field_cols) {
            let raw = rec.get(col).unwrap_or("");
            let value = parse_value(path, row, spec, raw)?;
            if enforce_required && spec.required && value.is_none() {
                return Err(Error::RequiredMissing {
                    path: path.to_path_buf(),
                    row,
                    field: spec.name.clone(),
                });
            }
            values.push(value);
        }
        Ok((label, values))
    }
}

fn parse_value(path: &Path, row: usize, spec: &FieldSpec, raw: &str) -> Result<Option<FieldValue>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    Ok(match spec.kind {
        FieldKind::Name => standardize_names(raw).map(FieldValue::Tokens),
        FieldKind::Categorical => Some(FieldValue::Text(raw.to_string())),
        kind => {
            let bad = || Error::BadDate {
                path: path.to_path_buf(),
                row,
                field: spec.name.clone(),
                value: raw.to_string(),
            };
            let v: i64 = raw.parse().map_err(|_| bad())?;
            if let Some((lo, hi)) = kind.bounds() {
                if v < lo || v > hi {
                    return Err(bad());
                }
            }
            Some(FieldValue::Int(v))
        }
    })
}

/// Loads K ≥ 2 CSV lists. Records are numbered in concatenation order.
pub fn load_lists<P: AsRef<Path>>(paths: &[P], schema: &FieldSchema) -> Result<RecordStore> {
    if paths.len() < 2 {
        return Err(Error::TooFewLists(paths.len()));
    }
    let mut lists = Vec::with_capacity(paths.len());
    let mut records = Vec::new();
    for (k, p) in paths.iter().enumerate() {
        let path: PathBuf = p.as_ref().to_path_buf();
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        let header = rdr.headers().map_err(|e| Error::csv(&path, e))?.clone();
        let cols = ColumnMap::new(&path, &header, schema)?;
        let start = records.len();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let (label, values) = cols.parse_row(&path, row + 1, &rec, schema, true)?;
            records.push(RecordEntry {
                record_index: records.len(),
                list_index: k + 1,
                label,
                values,
            });
        }
        lists.push(SourceList {
            list_index: k + 1,
            label: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("list{}", k + 1)),
            size: records.len() - start,
        });
    }
    Ok(RecordStore {
        schema: schema.clone(),
        lists,
        records,
    })
}

/// Folds one Latin-1 letter to its unaccented uppercase ASCII spelling.
fn fold_char(c: char) -> Option<&'static str> {
    Some(match c {
        'À' | 'Á' | 'Â' | 'Ã' | 'Ä' | 'Å' | 'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' => "A",
        'Æ' | 'æ' => "AE",
        'Ç' | 'ç' => "C",
        'È' | 'É' | 'Ê' | 'Ë' | 'è' | 'é' | 'ê' | 'ë' => "E",
        'Ì' | 'Í' | 'Î' | 'Ï' | 'ì' | 'í' | 'î' | 'ï' => "I",
        'Ð' | 'ð' => "D",
        'Ñ' | 'ñ' => "N",
        'Ò' | 'Ó' | 'Ô' | 'Õ' | 'Ö' | 'Ø' | 'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' => "O",
        'Ù' | 'Ú' | 'Û' | 'Ü' | 'ù' | 'ú' | 'û' | 'ü' => "U",
        'Ý' | 'ý' | 'ÿ' => "Y",
        'Þ' | 'þ' => "TH",
        'ß' => "SS",
        _ => return None,
    })
}

/// Uppercases, folds Latin-1 accents, drops punctuation and splits on
/// whitespace. Hyphens and underscores separate tokens; other punctuation is
/// removed in place (`O'NEIL` → `ONEIL`). Returns `None` when nothing is left.
pub fn standardize_names(raw: &str) -> Option<Vec<String>> {
    let mut cleaned = String::with_capacity(raw.len());
    for c in raw.chars() {
        if let Some(f) = fold_char(c) {
            cleaned.push_str(f);
        } else if c.is_ascii_alphanumeric() {
            cleaned.push(c.to_ascii_uppercase());
        } else if c.is_whitespace() || c == '-' || c == '_' {
            cleaned.push(' ');
        }
    }
    let tokens: Vec<String> = cleaned.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        None
    } else {
        Some(tokens)
    }
}
