//! Run records: UTF-8 `key: value` lines, two-space indentation for nested
//! sections, `schema_version` on the first line.

use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

/// A scalar or an ordered section of named children.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Scalar(String),
    Section(Vec<(String, Node)>),
}

impl Node {
    pub fn section() -> Self {
        Node::Section(Vec::new())
    }

    pub fn push(&mut self, key: impl Into<String>, value: Node) -> &mut Self {
        if let Node::Section(children) = self {
            children.push((key.into(), value));
        }
        self
    }

    pub fn scalar(v: impl ToString) -> Self {
        Node::Scalar(v.to_string())
    }

    /// Numeric result with provenance `closed_form`.
    pub fn closed_form(v: f64) -> Self {
        Self::with_provenance(v, "closed_form", None)
    }

    /// Numeric result with provenance `optimizer`.
    pub fn optimizer(v: f64) -> Self {
        Self::with_provenance(v, "optimizer", None)
    }

    /// Numeric result with provenance `mc` and its trial count.
    pub fn mc(v: f64, trials: usize) -> Self {
        Self::with_provenance(v, "mc", Some(trials))
    }

    fn with_provenance(v: f64, provenance: &str, trials: Option<usize>) -> Self {
        let mut n = Node::section();
        n.push("value", Node::scalar(fmt_f64(v)));
        n.push("provenance", Node::scalar(provenance));
        if let Some(t) = trials {
            n.push("trials", Node::scalar(t));
        }
        n
    }

    pub fn get(&self, key: &str) -> Option<&Node> {
        match self {
            Node::Section(c) => c.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            Node::Scalar(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Node::Scalar(s) => Some(s),
            Node::Section(_) => None,
        }
    }

    /// `value` of a provenance-tagged node, or the scalar itself.
    pub fn number(&self) -> Option<f64> {
        match self {
            Node::Scalar(s) => s.parse().ok(),
            Node::Section(_) => self.get("value")?.number(),
        }
    }
}

/// Shortest round-trip decimal form; `NaN`, `inf` and `-inf` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub schema_version: u32,
    pub command: String,
    pub artifact_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub params: Vec<(String, String)>,
    pub results: Node,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RecordError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing field {0}")]
    Missing(&'static str),
    #[error("unsupported schema version {0}")]
    Schema(String),
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.starts_with('"')
        || s.starts_with(char::is_whitespace)
        || s.ends_with(char::is_whitespace)
        || s.ends_with(':')
        || s.contains(['\n', '\r'])
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn unquote(s: &str, line: usize) -> Result<String, RecordError> {
    let err = |msg: &str| RecordError::Syntax { line, msg: msg.into() };
    let inner = s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).ok_or_else(|| err("unterminated string"))?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                _ => return Err(err("bad escape")),
            }
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

fn write_scalar(out: &mut String, indent: usize, key: &str, value: &str) {
    let v = if needs_quotes(value) { quote(value) } else { value.to_string() };
    let _ = writeln!(out, "{:indent$}{key}: {v}", "", indent = indent);
}

fn write_node(out: &mut String, indent: usize, key: &str, node: &Node) {
    match node {
        Node::Scalar(v) => write_scalar(out, indent, key, v),
        Node::Section(children) => {
            let _ = writeln!(out, "{:indent$}{key}:", "", indent = indent);
            for (k, v) in children {
                write_node(out, indent + 2, k, v);
            }
        }
    }
}

/// Text form of the `results` section alone (the deterministic payload).
pub fn payload(results: &Node) -> String {
    let mut out = String::new();
    write_node(&mut out, 0, "results", results);
    out
}

impl RunRecord {
    pub fn write(&self) -> String {
        let mut out = String::new();
        write_scalar(&mut out, 0, "schema_version", &self.schema_version.to_string());
        write_scalar(&mut out, 0, "command", &self.command);
        write_scalar(&mut out, 0, "artifact_version", &self.artifact_version);
        write_scalar(&mut out, 0, "started_at", &self.started_at);
        write_scalar(&mut out, 0, "finished_at", &self.finished_at);
        let _ = writeln!(out, "params:");
        for (k, v) in &self.params {
            write_scalar(&mut out, 2, k, v);
        }
        out.push_str(&payload(&self.results));
        out
    }

    pub fn load(text: &str) -> Result<RunRecord, RecordError> {
        let lines = parse_lines(text)?;
        let root = build(&lines, &mut 0, 0)?;
        let field = |k: &'static str| -> Result<String, RecordError> {
            root.get(k).and_then(Node::as_str).map(str::to_string).ok_or(RecordError::Missing(k))
        };
        if lines.first().map(|l| l.key.as_str()) != Some("schema_version") {
            return Err(RecordError::Missing("schema_version"));
        }
        let sv = field("schema_version")?;
        let schema_version: u32 = sv.parse().map_err(|_| RecordError::Schema(sv.clone()))?;
        if schema_version != SCHEMA_VERSION {
            return Err(RecordError::Schema(sv));
        }
        let params = match root.get("params") {
            Some(Node::Section(c)) => c
                .iter()
                .map(|(k, v)| {
                    v.as_str().map(|s| (k.clone(), s.to_string())).ok_or(RecordError::Missing("params"))
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(RecordError::Missing("params")),
        };
        let results = match root.get("results") {
            Some(n @ Node::Section(_)) => n.clone(),
            _ => return Err(RecordError::Missing("results")),
        };
        Ok(RunRecord {
            schema_version,
            command: field("command")?,
            artifact_version: field("artifact_version")?,
            started_at: field("started_at")?,
            finished_at: field("finished_at")?,
            params,
            results,
        })
    }
}

struct Line {
    number: usize,
    indent: usize,
    key: String,
    value: Option<String>,
}

fn parse_lines(text: &str) -> Result<Vec<Line>, RecordError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if indent % 2 != 0 {
            return Err(RecordError::Syntax { line: number, msg: "odd indentation".into() });
        }
        let body = &raw[indent..];
        let (key, value) = if let Some(k) = body.strip_suffix(':') {
            (k, None)
        } else {
            let (k, v) = body
                .split_once(": ")
                .ok_or_else(|| RecordError::Syntax { line: number, msg: "expected `key: value`".into() })?;
            let v = if v.starts_with('"') { unquote(v, number)? } else { v.to_string() };
            (k, Some(v))
        };
        out.push(Line { number, indent: indent / 2, key: key.to_string(), value });
    }
    Ok(out)
}

fn build(lines: &[Line], pos: &mut usize, depth: usize) -> Result<Node, RecordError> {
    let mut children = Vec::new();
    while *pos < lines.len() {
        let line = &lines[*pos];
        if line.indent < depth {
            break;
        }
        if line.indent > depth {
            return Err(RecordError::Syntax { line: line.number, msg: "unexpected indentation".into() });
        }
        *pos += 1;
        let node = match &line.value {
            Some(v) => Node::Scalar(v.clone()),
            None => build(lines, pos, depth + 1)?,
        };
        children.push((line.key.clone(), node));
    }
    Ok(Node::Section(children))
}
