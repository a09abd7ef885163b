//! Query AST and the text query parser.
//!
//! Grammar (keywords are case-sensitive, field names are not):
//!
//! ```text
//! query   := or_expr
//! or_expr := and_expr ("OR" and_expr)*
//! and_expr:= unary (["AND"] unary)*          adjacency means AND
//! unary   := "NOT" unary | primary
//! primary := "(" query ")" | "*" | [field ":"] (word | "quoted phrase")
//! ```
//!
//! A word or phrase is run through the analyzer: one token gives a `Term`,
//! several give a `Phrase`. An empty query is `MatchAll`.

use std::fmt;

use chrono::{DateTime, Utc};
use thiserror::Error;

use super::tokenize::tokenize;
use crate::record::GeoBoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexedField {
    /// Title, abstract, keywords and authors together.
    All,
    Title,
    Abstract,
    Keywords,
    Author,
    Source,
    Schema,
}

impl IndexedField {
    pub const ALL_FIELDS: [IndexedField; 7] = [
        IndexedField::All,
        IndexedField::Title,
        IndexedField::Abstract,
        IndexedField::Keywords,
        IndexedField::Author,
        IndexedField::Source,
        IndexedField::Schema,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexedField::All => "all",
            IndexedField::Title => "title",
            IndexedField::Abstract => "abstract",
            IndexedField::Keywords => "keywords",
            IndexedField::Author => "author",
            IndexedField::Source => "source",
            IndexedField::Schema => "schema",
        }
    }

    pub fn from_name(name: &str) -> Option<IndexedField> {
        Self::ALL_FIELDS.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }

    /// Keywords and authors are atomic labels: phrases match whole values.
    pub fn is_whole_value(self) -> bool {
        matches!(self, IndexedField::Keywords | IndexedField::Author)
    }
}

impl fmt::Display for IndexedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryNode {
    Term(IndexedField, String),
    Phrase(IndexedField, Vec<String>),
    And(Vec<QueryNode>),
    Or(Vec<QueryNode>),
    Not(Box<QueryNode>),
    MatchAll,
}

impl QueryNode {
    pub fn term(field: IndexedField, token: &str) -> QueryNode {
        QueryNode::Term(field, token.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialRelation {
    #[default]
    Intersects,
    /// The record's box covers the query box.
    Contains,
    /// The record's box lies inside the query box.
    Within,
}

impl SpatialRelation {
    pub fn parse(s: &str) -> Option<SpatialRelation> {
        match s.to_ascii_lowercase().as_str() {
            "intersects" => Some(SpatialRelation::Intersects),
            "contains" => Some(SpatialRelation::Contains),
            "within" => Some(SpatialRelation::Within),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFilter {
    pub bbox: GeoBoundingBox,
    pub relation: SpatialRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalFilter {
    pub start: Option<DateTime<Utc>>,
    pub end: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub root: QueryNode,
    pub spatial: Option<SpatialFilter>,
    pub temporal: Option<TemporalFilter>,
}

impl Query {
    pub fn new(root: QueryNode) -> Self {
        Query { root, spatial: None, temporal: None }
    }

    pub fn match_all() -> Self {
        Query::new(QueryNode::MatchAll)
    }

    pub fn with_spatial(mut self, bbox: GeoBoundingBox, relation: SpatialRelation) -> Self {
        self.spatial = Some(SpatialFilter { bbox, relation });
        self
    }

    /// A filter with neither bound is dropped.
    pub fn with_temporal(mut self, start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>) -> Self {
        self.temporal = (start.is_some() || end.is_some()).then_some(TemporalFilter { start, end });
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown field {name:?} at position {position}")]
    UnknownField { position: usize, name: String },
    #[error("query has no positive clause")]
    PureNegativeQuery,
}

impl QueryError {
    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::Syntax { .. } => "SyntaxError",
            QueryError::UnknownField { .. } => "UnknownField",
            QueryError::PureNegativeQuery => "PureNegativeQuery",
        }
    }

    pub fn position(&self) -> Option<usize> {
        match self {
            QueryError::Syntax { position, .. } | QueryError::UnknownField { position, .. } => Some(*position),
            QueryError::PureNegativeQuery => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Or,
    And,
    Not,
    Star,
    Word(Option<IndexedField>, String),
    Quoted(Option<IndexedField>, String),
}

/// Character-offset positions, zero based.
fn lex(input: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |position, message: &str| QueryError::Syntax { position, message: message.to_string() };

    let read_quoted = |start: usize| -> Result<(String, usize), QueryError> {
        let mut j = start + 1;
        let mut s = String::new();
        while j < chars.len() && chars[j] != '"' {
            s.push(chars[j]);
            j += 1;
        }
        if j >= chars.len() {
            return Err(syntax(start, "unterminated quoted phrase"));
        }
        Ok((s, j + 1))
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '"' => {
                let (s, next) = read_quoted(i)?;
                out.push((i, Tok::Quoted(None, s)));
                i = next;
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | ')' | '"') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.as_str() {
                    "OR" => out.push((start, Tok::Or)),
                    "AND" => out.push((start, Tok::And)),
                    "NOT" => out.push((start, Tok::Not)),
                    "*" => out.push((start, Tok::Star)),
                    _ => {
                        let field_split = word.find(':').filter(|&k| {
                            k > 0
                                && word[..k].starts_with(|ch: char| ch.is_ascii_alphabetic())
                                && word[..k].chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
                        });
                        let Some(k) = field_split else {
                            out.push((start, Tok::Word(None, word)));
                            continue;
                        };
                        let name = &word[..k];
                        let field = IndexedField::from_name(name)
                            .ok_or_else(|| QueryError::UnknownField { position: start, name: name.to_string() })?;
                        let rest = &word[k + 1..];
                        if !rest.is_empty() {
                            out.push((start, Tok::Word(Some(field), rest.to_string())));
                        } else if i < chars.len() && chars[i] == '"' {
                            let (s, next) = read_quoted(i)?;
                            out.push((start, Tok::Quoted(Some(field), s)));
                            i = next;
                        } else {
                            return Err(syntax(i, "expected a word or quoted phrase after field name"));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err(&self, message: &str) -> QueryError {
        QueryError::Syntax { position: self.here(), message: message.to_string() }
    }

    fn or_expr(&mut self) -> Result<QueryNode, QueryError> {
        let mut branches = vec![self.and_expr()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            branches.push(self.and_expr()?);
        }
        Ok(flatten(branches, false))
    }

    fn and_expr(&mut self) -> Result<QueryNode, QueryError> {
        let mut parts = Vec::new();
        loop {
            match self.peek() {
                None | Some(Tok::Or) | Some(Tok::RParen) => break,
                Some(Tok::And) => {
                    if parts.is_empty() {
                        return Err(self.err("AND needs a left operand"));
                    }
                    self.pos += 1;
                    if matches!(self.peek(), None | Some(Tok::Or) | Some(Tok::RParen) | Some(Tok::And)) {
                        return Err(self.err("AND needs a right operand"));
                    }
                }
                _ => parts.push(self.unary()?),
            }
        }
        if parts.is_empty() {
            return Err(self.err("expected a term, phrase or group"));
        }
        Ok(flatten(parts, true))
    }

    fn unary(&mut self) -> Result<QueryNode, QueryError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            if matches!(self.peek(), None | Some(Tok::Or) | Some(Tok::RParen) | Some(Tok::And)) {
                return Err(self.err("NOT needs an operand"));
            }
            return Ok(match self.unary()? {
                QueryNode::Not(inner) => *inner,
                other => QueryNode::Not(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<QueryNode, QueryError> {
        let position = self.here();
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err("unexpected end of query"));
        };
        self.pos += 1;
        match tok {
            Tok::LParen => {
                let inner = self.or_expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Star => Ok(QueryNode::MatchAll),
            Tok::Word(field, text) | Tok::Quoted(field, text) => {
                let field = field.unwrap_or(IndexedField::All);
                let mut tokens = tokenize(&text);
                match tokens.len() {
                    0 => Err(QueryError::Syntax { position, message: format!("{text:?} has no searchable characters") }),
                    1 => Ok(QueryNode::Term(field, tokens.remove(0))),
                    _ => Ok(QueryNode::Phrase(field, tokens)),
                }
            }
            Tok::RParen => Err(QueryError::Syntax { position, message: "unexpected ')'".into() }),
            Tok::Or | Tok::And | Tok::Not => Err(QueryError::Syntax { position, message: "unexpected operator".into() }),
        }
    }
}

fn flatten(mut parts: Vec<QueryNode>, and: bool) -> QueryNode {
    if parts.len() == 1 {
        return parts.remove(0);
    }
    let mut out = Vec::with_capacity(parts.len());
    for p in parts {
        match (and, p) {
            (true, QueryNode::And(inner)) | (false, QueryNode::Or(inner)) => out.extend(inner),
            (_, other) => out.push(other),
        }
    }
    if and { QueryNode::And(out) } else { QueryNode::Or(out) }
}

/// `Not` may only appear as a child of an `And` that also has a positive child.
fn check_negation(node: &QueryNode) -> Result<(), QueryError> {
    match node {
        QueryNode::Not(_) => Err(QueryError::PureNegativeQuery),
        QueryNode::And(children) => {
            if children.iter().all(|c| matches!(c, QueryNode::Not(_))) {
                return Err(QueryError::PureNegativeQuery);
            }
            for c in children {
                match c {
                    QueryNode::Not(inner) => check_negation_inner(inner)?,
                    other => check_negation(other)?,
                }
            }
            Ok(())
        }
        QueryNode::Or(children) => children.iter().try_for_each(check_negation),
        _ => Ok(()),
    }
}

/// Inside a negation, nested groups obey the same rule.
fn check_negation_inner(node: &QueryNode) -> Result<(), QueryError> {
    match node {
        QueryNode::Not(_) => Err(QueryError::PureNegativeQuery),
        other => check_negation(other),
    }
}

pub fn parse_query(input: &str) -> Result<Query, QueryError> {
    let toks = lex(input)?;
    if toks.is_empty() {
        return Ok(Query::match_all());
    }
    let mut parser = Parser { toks, pos: 0, end: input.chars().count() };
    let root = parser.or_expr()?;
    if parser.pos < parser.toks.len() {
        return Err(parser.err("unexpected ')'"));
    }
    check_negation(&root)?;
    Ok(Query::new(root))
}
