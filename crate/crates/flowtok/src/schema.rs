//! Dataset schema: column order, structural tokens, categorical value sets,
//! and BPE group assignment.
//!
//! The schema drives every other stage. Serialization, vocabulary layout and
//! decoding all follow the column order fixed here. Schemas are loaded from a
//! small declarative text file (see `docs/file-formats.md` for the grammar);
//! the CIDDS-001 mapping ships bundled as [`CIDDS001_SCHEMA`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// The bundled CIDDS-001 schema file.
pub const CIDDS001_SCHEMA: &str = include_str!("../schemas/cidds001.schema");

/// Current schema file format version.
const SCHEMA_FILE_VERSION: u32 = 1;

/// The three trained subword groups. Training always runs in this order:
/// IP addresses, then ports, then the remaining numeric columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BpeGroup {
    IpAddress,
    Port,
    Numeric,
}

impl BpeGroup {
    pub const ALL: [BpeGroup; 3] = [BpeGroup::IpAddress, BpeGroup::Port, BpeGroup::Numeric];
    pub const COUNT: usize = 3;

    pub fn name(self) -> &'static str {
        match self {
            BpeGroup::IpAddress => "ip",
            BpeGroup::Port => "port",
            BpeGroup::Numeric => "numeric",
        }
    }

    pub fn parse(name: &str) -> Option<BpeGroup> {
        match name {
            "ip" => Some(BpeGroup::IpAddress),
            "port" => Some(BpeGroup::Port),
            "numeric" => Some(BpeGroup::Numeric),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BpeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Renders a categorical value as its fixed token, e.g. `normal` -> `<NORMAL>`.
pub fn categorical_token(value: &str) -> String {
    format!("<{}>", value.to_ascii_uppercase())
}

/// A declared, ordered set of categorical values with their derived tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalSet {
    values: Vec<String>,
    tokens: Vec<String>,
    by_value: HashMap<String, usize>,
    by_token: HashMap<String, usize>,
}

impl CategoricalSet {
    pub fn new(values: Vec<String>) -> Result<CategoricalSet> {
        if values.is_empty() {
            return Err(Error::schema("categorical value set is empty"));
        }
        let mut by_value = HashMap::new();
        let mut by_token = HashMap::new();
        let mut tokens = Vec::with_capacity(values.len());
        for (i, value) in values.iter().enumerate() {
            validate_value_charset(value)?;
            if by_value.insert(value.clone(), i).is_some() {
                return Err(Error::schema(format!("duplicate categorical value {value:?}")));
            }
            let token = categorical_token(value);
            if by_token.insert(token.clone(), i).is_some() {
                return Err(Error::schema(format!(
                    "categorical values {value:?} and {:?} map to the same token {token:?}",
                    values[by_token[&token]]
                )));
            }
            tokens.push(token);
        }
        Ok(CategoricalSet {
            values,
            tokens,
            by_value,
            by_token,
        })
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_for(&self, value: &str) -> Option<&str> {
        self.by_value.get(value).map(|&i| self.tokens[i].as_str())
    }

    pub fn value_for(&self, token: &str) -> Option<&str> {
        self.by_token.get(token).map(|&i| self.values[i].as_str())
    }
}

fn validate_value_charset(value: &str) -> Result<()> {
    for ch in value.chars() {
        if matches!(ch, '<' | '>' | '|') || ch.is_control() {
            return Err(Error::schema(format!(
                "categorical value {value:?} contains reserved character {ch:?}"
            )));
        }
    }
    Ok(())
}

/// How a column's values are tokenized: a fixed categorical token per value,
/// or subword encoding with one of the trained BPE groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenClass {
    Categorical(CategoricalSet),
    Subword(BpeGroup),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub structural_token: String,
    pub class: TokenClass,
    /// Validate cells as integers during ingest (`"443.0"` is normalized to `"443"`).
    pub integer: bool,
}

impl ColumnSpec {
    pub fn group(&self) -> Option<BpeGroup> {
        match self.class {
            TokenClass::Subword(g) => Some(g),
            TokenClass::Categorical(_) => None,
        }
    }
}

/// A validated schema: ordered columns (the engineered delta column last),
/// row terminator, and the raw timestamp column consumed by preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaConfig {
    columns: Vec<ColumnSpec>,
    row_terminator: String,
    timestamp_column: String,
    timestamp_format: String,
}

impl SchemaConfig {
    /// Builds and validates a schema. `delta` is the engineered inter-arrival
    /// column; it is appended after `data_columns` and serialized last.
    pub fn new(
        data_columns: Vec<ColumnSpec>,
        delta: ColumnSpec,
        row_terminator: String,
        timestamp_column: String,
        timestamp_format: String,
    ) -> Result<SchemaConfig> {
        if data_columns.is_empty() {
            return Err(Error::schema("schema declares no columns"));
        }
        if delta.group().is_none() {
            return Err(Error::schema("delta column must belong to a BPE group"));
        }
        if delta.integer {
            return Err(Error::schema("delta column cannot be integer-validated"));
        }
        let mut columns = data_columns;
        columns.push(delta);

        validate_structural_token(&row_terminator)?;
        let mut tokens = HashSet::new();
        tokens.insert(row_terminator.as_str());
        let mut names = HashSet::new();
        for col in &columns {
            validate_structural_token(&col.structural_token)?;
            if !tokens.insert(col.structural_token.as_str()) {
                return Err(Error::schema(format!(
                    "structural token {:?} declared more than once",
                    col.structural_token
                )));
            }
            if col.name.is_empty() {
                return Err(Error::schema("column name is empty"));
            }
            if !names.insert(col.name.as_str()) {
                return Err(Error::schema(format!("column {:?} declared more than once", col.name)));
            }
            if col.integer && col.group().is_none() {
                return Err(Error::schema(format!(
                    "column {:?}: integer validation applies only to BPE-group columns",
                    col.name
                )));
            }
        }
        if timestamp_column.is_empty() {
            return Err(Error::schema("timestamp column name is empty"));
        }
        if names.contains(timestamp_column.as_str()) {
            return Err(Error::schema(format!(
                "timestamp column {timestamp_column:?} must not appear among schema columns"
            )));
        }
        if timestamp_format.is_empty() {
            return Err(Error::schema("timestamp format is empty"));
        }
        Ok(SchemaConfig {
            columns,
            row_terminator,
            timestamp_column,
            timestamp_format,
        })
    }

    /// The bundled CIDDS-001 schema.
    pub fn cidds001() -> SchemaConfig {
        parse_schema_str(CIDDS001_SCHEMA, Path::new("cidds001.schema"))
            .expect("bundled schema must be valid")
    }

    /// Loads and validates a schema file.
    pub fn load(path: impl AsRef<Path>) -> Result<SchemaConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_schema_str(&text, path)
    }

    /// All columns in serialization order; the delta column is last.
    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    /// The engineered inter-arrival column (always the last column).
    pub fn delta_column(&self) -> &ColumnSpec {
        self.columns.last().expect("schema has columns")
    }

    /// Columns read from the raw CSV (everything except the delta column).
    pub fn data_columns(&self) -> &[ColumnSpec] {
        &self.columns[..self.columns.len() - 1]
    }

    pub fn row_terminator(&self) -> &str {
        &self.row_terminator
    }

    pub fn timestamp_column(&self) -> &str {
        &self.timestamp_column
    }

    pub fn timestamp_format(&self) -> &str {
        &self.timestamp_format
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// BPE groups referenced by at least one column.
    pub fn groups_in_use(&self) -> Vec<BpeGroup> {
        BpeGroup::ALL
            .into_iter()
            .filter(|g| self.columns.iter().any(|c| c.group() == Some(*g)))
            .collect()
    }

    /// Renders the schema back to its file format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("version {SCHEMA_FILE_VERSION}\n"));
        out.push_str(&format!("terminator {}\n", self.row_terminator));
        out.push_str(&format!(
            "timestamp {} format {}\n",
            quote_field(&self.timestamp_column),
            quote_field(&self.timestamp_format)
        ));
        for (i, col) in self.columns.iter().enumerate() {
            let keyword = if i == self.columns.len() - 1 { "delta" } else { "column" };
            out.push_str(&format!(
                "{keyword} {} token {}",
                quote_field(&col.name),
                col.structural_token
            ));
            match &col.class {
                TokenClass::Subword(g) => out.push_str(&format!(" group {}", g.name())),
                TokenClass::Categorical(set) => {
                    out.push_str(" values");
                    for v in set.values() {
                        out.push(' ');
                        out.push_str(&quote_field(v));
                    }
                }
            }
            if col.integer {
                out.push_str(" integer");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

fn validate_structural_token(token: &str) -> Result<()> {
    let ok = token.starts_with("<|")
        && token.ends_with("|>")
        && token.len() > 4
        && token[2..token.len() - 2]
            .chars()
            .all(|c| !matches!(c, '<' | '>' | '|') && !c.is_whitespace());
    if ok {
        Ok(())
    } else {
        Err(Error::schema(format!(
            "structural token {token:?} must look like \"<|NAME|>\""
        )))
    }
}

fn quote_field(s: &str) -> String {
    let needs_quotes = s.is_empty()
        || s.chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '\\' || c == '#');
    if !needs_quotes {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Splits a schema line into fields, honoring double quotes and escapes.
fn split_fields(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None => break,
            Some('#') => break,
            Some('"') => {
                chars.next();
                let mut field = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated quoted field".to_string()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('"') => field.push('"'),
                            Some('\\') => field.push('\\'),
                            Some('n') => field.push('\n'),
                            Some('t') => field.push('\t'),
                            other => {
                                return Err(format!("invalid escape \\{}", other.unwrap_or(' ')))
                            }
                        },
                        Some(c) => field.push(c),
                    }
                }
                fields.push(field);
            }
            Some(_) => {
                let mut field = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() {
                        break;
                    }
                    field.push(c);
                    chars.next();
                }
                fields.push(field);
            }
        }
    }
    Ok(fields)
}

struct LineParser<'a> {
    path: &'a Path,
    line_no: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::SchemaParse {
            path: self.path.to_path_buf(),
            line: self.line_no,
            message: message.into(),
        }
    }
}

fn parse_schema_str(text: &str, path: &Path) -> Result<SchemaConfig> {
    let mut version: Option<u32> = None;
    let mut terminator: Option<String> = None;
    let mut timestamp: Option<(String, String)> = None;
    let mut columns: Vec<ColumnSpec> = Vec::new();
    let mut delta: Option<ColumnSpec> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let p = LineParser {
            path,
            line_no: idx + 1,
        };
        let fields = split_fields(raw_line).map_err(|m| p.err(m))?;
        if fields.is_empty() {
            continue;
        }
        let directive = fields[0].as_str();
        let args = &fields[1..];
        match directive {
            "version" => {
                if version.is_some() {
                    return Err(p.err("duplicate version directive"));
                }
                let v: u32 = args
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| p.err("expected: version <number>"))?;
                if v != SCHEMA_FILE_VERSION {
                    return Err(p.err(format!(
                        "unsupported schema file version {v} (this build reads version {SCHEMA_FILE_VERSION})"
                    )));
                }
                version = Some(v);
            }
            "terminator" => {
                if terminator.is_some() {
                    return Err(p.err("duplicate terminator directive"));
                }
                let [tok] = args else {
                    return Err(p.err("expected: terminator <|TOKEN|>"));
                };
                terminator = Some(tok.clone());
            }
            "timestamp" => {
                if timestamp.is_some() {
                    return Err(p.err("duplicate timestamp directive"));
                }
                let [name, kw, fmt] = args else {
                    return Err(p.err("expected: timestamp <column> format <strftime>"));
                };
                if kw != "format" {
                    return Err(p.err("expected keyword `format`"));
                }
                timestamp = Some((name.clone(), fmt.clone()));
            }
            "column" | "delta" => {
                let col = parse_column_line(&p, args)?;
                if directive == "delta" {
                    if delta.is_some() {
                        return Err(p.err("duplicate delta directive"));
                    }
                    delta = Some(col);
                } else {
                    if delta.is_some() {
                        return Err(p.err("delta must be the last declared column"));
                    }
                    columns.push(col);
                }
            }
            other => return Err(p.err(format!("unknown directive {other:?}"))),
        }
    }

    let p = LineParser {
        path,
        line_no: text.lines().count(),
    };
    if version.is_none() {
        return Err(p.err("missing `version` directive"));
    }
    let (ts_col, ts_fmt) = timestamp.ok_or_else(|| p.err("missing `timestamp` directive"))?;
    let delta = delta.ok_or_else(|| p.err("missing `delta` directive"))?;
    SchemaConfig::new(
        columns,
        delta,
        terminator.unwrap_or_else(|| "<|ROW|>".to_string()),
        ts_col,
        ts_fmt,
    )
}

fn parse_column_line(p: &LineParser<'_>, args: &[String]) -> Result<ColumnSpec> {
    if args.len() < 4 || args[1] != "token" {
        return Err(p.err("expected: column <name> token <|TOKEN|> (group <g> | values <v>...) [integer]"));
    }
    let name = args[0].clone();
    let structural_token = args[2].clone();
    let mut rest = &args[3..];
    let mut integer = false;
    if rest.last().map(String::as_str) == Some("integer") {
        integer = true;
        rest = &rest[..rest.len() - 1];
    }
    let class = match rest.first().map(String::as_str) {
        Some("group") => {
            let [_, g] = rest else {
                return Err(p.err("expected: group <ip|port|numeric>"));
            };
            let group = BpeGroup::parse(g)
                .ok_or_else(|| Error::schema(format!("unknown group name {g:?}")))?;
            TokenClass::Subword(group)
        }
        Some("values") => {
            if rest.len() < 2 {
                return Err(Error::schema(format!("column {name:?}: empty value list")));
            }
            TokenClass::Categorical(CategoricalSet::new(rest[1..].to_vec())?)
        }
        _ => return Err(p.err("expected `group` or `values`")),
    };
    Ok(ColumnSpec {
        name,
        structural_token,
        class,
        integer,
    })
}
