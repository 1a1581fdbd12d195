//! Tabular datasets with mixed discrete/continuous attributes and missing cells.
//!
//! Data comes from a delimiter-separated text file; the column roles are
//! declared in a sidecar schema file with one line per column:
//!
//! ```text
//! # comment
//! hair: discrete; values: F,T; exclude: F
//! legs: discrete
//! length: continuous
//! count: continuous_integer
//! type: class
//! name: ignore
//! ```
//!
//! Discrete value sets not declared with `values:` are inferred from the
//! column in order of first occurrence.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_MISSING_TOKEN: &str = "?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Discrete { values: Vec<String> },
    Continuous { integer: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
    /// Values never offered as label conjuncts in positive-only mode.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excluded_values: BTreeSet<String>,
}

impl Attribute {
    pub fn discrete(name: impl Into<String>, values: &[&str]) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Discrete {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
            excluded_values: BTreeSet::new(),
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Continuous { integer: false },
            excluded_values: BTreeSet::new(),
        }
    }

    pub fn with_excluded(mut self, values: &[&str]) -> Self {
        self.excluded_values = values.iter().map(|v| v.to_string()).collect();
        self
    }

    pub fn values(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Discrete { values } => Some(values),
            AttributeKind::Continuous { .. } => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, AttributeKind::Continuous { .. })
    }

    pub fn is_integer(&self) -> bool {
        matches!(self.kind, AttributeKind::Continuous { integer: true })
    }

    pub fn value_index(&self, token: &str) -> Option<u32> {
        self.values()?
            .iter()
            .position(|v| v == token)
            .map(|i| i as u32)
    }

    /// Value indices excluded from positive-only searches.
    ///
    /// Explicit `exclude:` declarations win; a two-valued attribute without
    /// one has its false-like value (`F`, `False`, `0`, `no`, ...) excluded.
    pub fn positive_only_exclusions(&self) -> BTreeSet<u32> {
        let Some(values) = self.values() else {
            return BTreeSet::new();
        };
        if !self.excluded_values.is_empty() {
            return values
                .iter()
                .enumerate()
                .filter(|(_, v)| self.excluded_values.contains(*v))
                .map(|(i, _)| i as u32)
                .collect();
        }
        if values.len() == 2 {
            const FALSY: [&str; 8] = ["F", "f", "False", "false", "FALSE", "0", "no", "N"];
            return values
                .iter()
                .enumerate()
                .filter(|(_, v)| FALSY.contains(&v.as_str()))
                .map(|(i, _)| i as u32)
                .collect();
        }
        BTreeSet::new()
    }
}

/// Ordered attribute declarations for the modeled columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let schema = Schema { attributes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name '{}'", attr.name)));
            }
            if let AttributeKind::Discrete { values } = &attr.kind {
                if values.is_empty() {
                    return Err(Error::Schema(format!(
                        "attribute '{}' has an empty value set",
                        attr.name
                    )));
                }
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v.as_str()) {
                        return Err(Error::Schema(format!(
                            "attribute '{}' declares value '{}' twice",
                            attr.name, v
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Stable hex digest of names, kinds and value sets.
    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        for a in &self.attributes {
            match &a.kind {
                AttributeKind::Discrete { values } => {
                    let _ = writeln!(text, "{}\td\t{}", a.name, values.join("\u{1f}"));
                }
                AttributeKind::Continuous { integer } => {
                    let _ = writeln!(text, "{}\tc\t{}", a.name, integer);
                }
            }
        }
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Discrete(u32),
    Continuous(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub cells: Vec<Cell>,
}

impl Instance {
    pub fn new(cells: Vec<Cell>) -> Self {
        Instance { cells }
    }

    pub fn missing(m: usize) -> Self {
        Instance {
            cells: vec![Cell::Missing; m],
        }
    }

    /// Checks cell count and per-cell kinds against `schema`.
    pub fn conforms_to(&self, schema: &Schema) -> Result<()> {
        if self.cells.len() != schema.len() {
            return Err(Error::Structure(format!(
                "instance has {} cells, schema has {} attributes",
                self.cells.len(),
                schema.len()
            )));
        }
        for (cell, attr) in self.cells.iter().zip(&schema.attributes) {
            match (cell, &attr.kind) {
                (Cell::Missing, _) => {}
                (Cell::Discrete(v), AttributeKind::Discrete { values }) => {
                    if *v as usize >= values.len() {
                        return Err(Error::Schema(format!(
                            "value index {} out of range for '{}'",
                            v, attr.name
                        )));
                    }
                }
                (Cell::Continuous(x), AttributeKind::Continuous { .. }) => {
                    if !x.is_finite() {
                        return Err(Error::Schema(format!(
                            "non-finite value for '{}'",
                            attr.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "cell kind does not match attribute '{}'",
                        attr.name
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth classes, kept apart from the modeled attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassColumn {
    pub name: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub instances: Vec<Instance>,
    pub class_column: Option<ClassColumn>,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        instances: Vec<Instance>,
        class_column: Option<ClassColumn>,
    ) -> Result<Self> {
        schema.validate()?;
        if instances.is_empty() {
            return Err(Error::Structure("dataset has no instances".into()));
        }
        for inst in &instances {
            inst.conforms_to(&schema)?;
        }
        if let Some(cls) = &class_column {
            if cls.labels.len() != instances.len() {
                return Err(Error::Structure(format!(
                    "class column has {} entries for {} instances",
                    cls.labels.len(),
                    instances.len()
                )));
            }
        }
        Ok(Dataset {
            schema,
            instances,
            class_column,
        })
    }

    pub fn n(&self) -> usize {
        self.instances.len()
    }

    pub fn m(&self) -> usize {
        self.schema.len()
    }

    pub fn summarize(&self) -> DatasetSummary {
        summarize(self)
    }
}

/// Role a file column plays, as declared in the schema sidecar.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnRole {
    Discrete { values: Option<Vec<String>> },
    Continuous { integer: bool },
    Class,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    pub exclude: BTreeSet<String>,
}

/// Parsed schema sidecar: column declarations in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemaSpec {
    pub columns: Vec<ColumnSpec>,
}

impl SchemaSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<ColumnSpec> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(';').map(str::trim);
            let head = parts.next().unwrap_or("");
            let (name, kind) = head.rsplit_once(':').ok_or_else(|| {
                Error::Schema(format!("line {}: expected 'column: kind'", lineno + 1))
            })?;
            let name = name.trim().to_string();
            let kind = kind.trim();
            let mut values = None;
            let mut exclude = BTreeSet::new();
            for opt in parts {
                if opt.is_empty() {
                    continue;
                }
                let (key, list) = opt.split_once(':').ok_or_else(|| {
                    Error::Schema(format!("line {}: malformed option '{}'", lineno + 1, opt))
                })?;
                let items: Vec<String> = list
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                match key.trim() {
                    "values" => values = Some(items),
                    "exclude" => exclude = items.into_iter().collect(),
                    other => {
                        return Err(Error::Schema(format!(
                            "line {}: unknown option '{}'",
                            lineno + 1,
                            other
                        )))
                    }
                }
            }
            if values.is_some() && kind != "discrete" {
                return Err(Error::Schema(format!(
                    "line {}: 'values' only applies to discrete columns",
                    lineno + 1
                )));
            }
            let role = match kind {
                "discrete" => ColumnRole::Discrete { values },
                "continuous" => ColumnRole::Continuous { integer: false },
                "continuous_integer" => ColumnRole::Continuous { integer: true },
                "class" => ColumnRole::Class,
                "ignore" => ColumnRole::Ignore,
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown column kind '{}'",
                        lineno + 1,
                        other
                    )))
                }
            };
            if columns.iter().any(|c| c.name == name) {
                return Err(Error::Schema(format!("column '{}' declared twice", name)));
            }
            columns.push(ColumnSpec {
                name,
                role,
                exclude,
            });
        }
        if columns.iter().filter(|c| c.role == ColumnRole::Class).count() > 1 {
            return Err(Error::Schema("more than one class column".into()));
        }
        Ok(SchemaSpec { columns })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub missing_token: String,
    pub has_header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            missing_token: DEFAULT_MISSING_TOKEN.to_string(),
            has_header: true,
        }
    }
}

/// Reads and validates a dataset from a delimited file.
pub fn load_dataset(
    path: impl AsRef<Path>,
    spec: &SchemaSpec,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, spec, opts)
}

/// Parses dataset text; see [`load_dataset`].
pub fn parse_dataset(text: &str, spec: &SchemaSpec, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Structure(e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Structure("file is empty".into()));
    }

    // Map file columns to schema declarations.
    let column_specs: Vec<&ColumnSpec> = if opts.has_header {
        let header = records.remove(0);
        let mut mapped = Vec::with_capacity(header.len());
        for name in header.iter() {
            let c = spec.columns.iter().find(|c| c.name == name).ok_or_else(|| {
                Error::Schema(format!("column '{}' is not declared in the schema", name))
            })?;
            mapped.push(c);
        }
        for c in &spec.columns {
            if !header.iter().any(|h| h == c.name) {
                return Err(Error::Schema(format!(
                    "schema column '{}' is missing from the file header",
                    c.name
                )));
            }
        }
        mapped
    } else {
        spec.columns.iter().collect()
    };
    if records.is_empty() {
        return Err(Error::Structure("file has a header but no data rows".into()));
    }
    let width = column_specs.len();
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Structure(format!(
                "row {} has {} fields, expected {}",
                i + 1,
                rec.len(),
                width
            )));
        }
    }

    let mut attributes = Vec::new();
    let mut attr_columns = Vec::new();
    let mut class_col = None;
    for (ci, c) in column_specs.iter().enumerate() {
        match &c.role {
            ColumnRole::Ignore => {}
            ColumnRole::Class => class_col = Some((ci, c.name.clone())),
            ColumnRole::Continuous { integer } => {
                attributes.push(Attribute {
                    name: c.name.clone(),
                    kind: AttributeKind::Continuous { integer: *integer },
                    excluded_values: c.exclude.clone(),
                });
                attr_columns.push(ci);
            }
            ColumnRole::Discrete { values } => {
                let values = match values {
                    Some(v) => v.clone(),
                    None => {
                        let mut seen = HashSet::new();
                        let mut inferred = Vec::new();
                        for rec in &records {
                            let tok = &rec[ci];
                            if tok != opts.missing_token && seen.insert(tok.to_string()) {
                                inferred.push(tok.to_string());
                            }
                        }
                        inferred
                    }
                };
                if values.is_empty() {
                    return Err(Error::DegenerateAttribute(c.name.clone()));
                }
                attributes.push(Attribute {
                    name: c.name.clone(),
                    kind: AttributeKind::Discrete { values },
                    excluded_values: c.exclude.clone(),
                });
                attr_columns.push(ci);
            }
        }
    }
    let schema = Schema::new(attributes)?;
    if schema.is_empty() {
        return Err(Error::Schema("no modeled attributes declared".into()));
    }

    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .attributes
        .iter()
        .map(|a| {
            a.values().map(|vs| {
                vs.iter()
                    .enumerate()
                    .map(|(i, v)| (v.as_str(), i as u32))
                    .collect()
            })
        })
        .collect();

    let mut instances = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let mut cells = Vec::with_capacity(schema.len());
        for (j, &ci) in attr_columns.iter().enumerate() {
            let tok = &rec[ci];
            let attr = &schema.attributes[j];
            if tok == opts.missing_token {
                cells.push(Cell::Missing);
                continue;
            }
            match &lookups[j] {
                Some(map) => {
                    let v = map.get(tok).ok_or_else(|| {
                        Error::Schema(format!(
                            "row {}: value '{}' not in the value set of '{}'",
                            row + 1,
                            tok,
                            attr.name
                        ))
                    })?;
                    cells.push(Cell::Discrete(*v));
                }
                None => {
                    let x: f64 = tok.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(
                        || Error::Parse {
                            row: row + 1,
                            column: attr.name.clone(),
                            token: tok.to_string(),
                        },
                    )?;
                    cells.push(Cell::Continuous(x));
                }
            }
        }
        instances.push(Instance { cells });
    }

    let class_column = match class_col {
        Some((ci, name)) => {
            let mut labels = Vec::with_capacity(records.len());
            for (row, rec) in records.iter().enumerate() {
                let tok = &rec[ci];
                if tok == opts.missing_token {
                    return Err(Error::Structure(format!(
                        "row {}: class column '{}' is missing",
                        row + 1,
                        name
                    )));
                }
                labels.push(tok.to_string());
            }
            Some(ClassColumn { name, labels })
        }
        None => None,
    };

    Dataset::new(schema, instances, class_column)
}

/// Canonical text form of a dataset: `(data, schema_sidecar)`.
///
/// Value sets are always written out, so reloading reproduces the same
/// value indexing regardless of the row order.
pub fn to_canonical_text(ds: &Dataset, missing_token: &str) -> Result<(String, String)> {
    let mut schema_text = String::new();
    for a in &ds.schema.attributes {
        match &a.kind {
            AttributeKind::Discrete { values } => {
                let _ = write!(schema_text, "{}: discrete; values: {}", a.name, values.join(","));
            }
            AttributeKind::Continuous { integer: false } => {
                let _ = write!(schema_text, "{}: continuous", a.name);
            }
            AttributeKind::Continuous { integer: true } => {
                let _ = write!(schema_text, "{}: continuous_integer", a.name);
            }
        }
        if !a.excluded_values.is_empty() {
            let ex: Vec<&str> = a.excluded_values.iter().map(String::as_str).collect();
            let _ = write!(schema_text, "; exclude: {}", ex.join(","));
        }
        schema_text.push('\n');
    }
    if let Some(cls) = &ds.class_column {
        let _ = writeln!(schema_text, "{}: class", cls.name);
    }

    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<&str> = ds.schema.attributes.iter().map(|a| a.name.as_str()).collect();
    if let Some(cls) = &ds.class_column {
        header.push(&cls.name);
    }
    let io_err = |e: csv::Error| Error::Structure(e.to_string());
    writer.write_record(&header).map_err(io_err)?;
    for (i, inst) in ds.instances.iter().enumerate() {
        let mut row: Vec<String> = inst
            .cells
            .iter()
            .zip(&ds.schema.attributes)
            .map(|(c, a)| match c {
                Cell::Missing => missing_token.to_string(),
                Cell::Continuous(x) => format!("{x}"),
                Cell::Discrete(v) => a.values().map(|vs| vs[*v as usize].clone()).unwrap_or_default(),
            })
            .collect();
        if let Some(cls) = &ds.class_column {
            row.push(cls.labels[i].clone());
        }
        writer.write_record(&row).map_err(io_err)?;
    }
    let data = writer
        .into_inner()
        .map_err(|e| Error::Structure(e.to_string()))?;
    Ok((String::from_utf8(data).expect("csv output is utf-8"), schema_text))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeSummary {
    pub name: String,
    pub kind: &'static str,
    /// Number of distinct values for discrete attributes.
    pub cardinality: Option<usize>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub m: usize,
    pub missing: usize,
    pub has_class: bool,
    pub attributes: Vec<AttributeSummary>,
}

pub fn summarize(ds: &Dataset) -> DatasetSummary {
    let attributes: Vec<AttributeSummary> = ds
        .schema
        .attributes
        .iter()
        .enumerate()
        .map(|(j, a)| AttributeSummary {
            name: a.name.clone(),
            kind: match a.kind {
                AttributeKind::Discrete { .. } => "discrete",
                AttributeKind::Continuous { integer: false } => "continuous",
                AttributeKind::Continuous { integer: true } => "continuous_integer",
            },
            cardinality: a.values().map(<[String]>::len),
            missing: ds.instances.iter().filter(|i| i.cells[j].is_missing()).count(),
        })
        .collect();
    DatasetSummary {
        n: ds.n(),
        m: ds.m(),
        missing: attributes.iter().map(|a| a.missing).sum(),
        has_class: ds.class_column.is_some(),
        attributes,
    }
}
