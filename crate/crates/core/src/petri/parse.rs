//! Line-oriented net description format.
//!
//! ```text
//! net <name>
//! place <id> [capacity <int>] [init <int>] [label "<text>"]
//! trans <id> [label "<text>"]
//! arc <src> -> <dst> [weight <int>] [rewritable <int>]
//! ```
//!
//! `#` starts a comment outside of quoted labels. Options may appear in any
//! order but at most once per line.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::net::{ArcDef, Capacity, NetDefinition, NetError, PlaceDef, TransitionDef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: NetError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(line_no: usize, line: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '"' {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(line_no, column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => text.push(e),
                            _ => return Err(syntax(line_no, i + 1, "invalid escape")),
                        }
                        i += 2;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Quoted(text),
                column,
            });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token {
                tok: Tok::Arrow,
                column,
            });
            i += 2;
        } else {
            let start = i;
            while i < chars.len()
                && !chars[i].is_whitespace()
                && chars[i] != '#'
                && chars[i] != '"'
                && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>'))
            {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                column,
            });
        }
    }
    Ok(out)
}

struct Line {
    no: usize,
    tokens: Vec<Token>,
    pos: usize,
    end_column: usize,
}

impl Line {
    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.column).unwrap_or(self.end_column)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::Word(w), .. }) if is_ident(w) => {
                self.pos += 1;
                Ok(w.clone())
            }
            _ => Err(syntax(self.no, self.column(), format!("expected {what}"))),
        }
    }

    fn int(&mut self, what: &str) -> Result<u32, ParseError> {
        let column = self.column();
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::Word(w), .. }) => {
                let v = w
                    .parse::<u32>()
                    .map_err(|_| syntax(self.no, column, format!("expected integer {what}")))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(syntax(self.no, column, format!("expected integer {what}"))),
        }
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        match self.tokens.get(self.pos) {
            Some(Token {
                tok: Tok::Quoted(s), ..
            }) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(syntax(self.no, self.column(), "expected quoted label")),
        }
    }

    fn arrow(&mut self) -> Result<(), ParseError> {
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::Arrow, .. }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(syntax(self.no, self.column(), "expected `->`")),
        }
    }

    /// Next option keyword, or `None` at end of line.
    fn option(&mut self, allowed: &[&str], used: &mut Vec<String>) -> Result<Option<String>, ParseError> {
        let column = self.column();
        match self.tokens.get(self.pos) {
            None => Ok(None),
            Some(Token { tok: Tok::Word(w), .. }) if allowed.contains(&w.as_str()) => {
                if used.contains(w) {
                    return Err(syntax(self.no, column, format!("option `{w}` repeated")));
                }
                used.push(w.clone());
                self.pos += 1;
                Ok(Some(w.clone()))
            }
            Some(_) => Err(syntax(
                self.no,
                column,
                format!("expected one of: {}", allowed.join(", ")),
            )),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            return Err(syntax(self.no, self.column(), "unexpected trailing input"));
        }
        Ok(())
    }
}

fn is_ident(w: &str) -> bool {
    let mut chars = w.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.' || c == '*' || c == '\'')
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Place,
    Transition,
}

/// Parse a net description into a validated [`NetDefinition`].
pub fn parse_net(text: &str) -> Result<NetDefinition, ParseError> {
    let mut name: Option<String> = None;
    let mut places = Vec::new();
    let mut transitions = Vec::new();
    let mut arcs: Vec<(usize, ArcDef)> = Vec::new();
    let mut kinds: HashMap<String, Kind> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let tokens = tokenize(no, raw)?;
        if tokens.is_empty() {
            continue;
        }
        let mut line = Line {
            no,
            tokens,
            pos: 0,
            end_column: raw.chars().count() + 1,
        };
        let keyword = match &line.tokens[0].tok {
            Tok::Word(w) => w.clone(),
            _ => return Err(syntax(no, line.tokens[0].column, "expected a declaration keyword")),
        };
        line.pos = 1;
        match keyword.as_str() {
            "net" => {
                if name.is_some() {
                    return Err(syntax(no, 1, "net name declared twice"));
                }
                name = Some(line.ident("net name")?);
                line.finish()?;
            }
            "place" => {
                let id = line.ident("place id")?;
                if kinds.insert(id.clone(), Kind::Place).is_some() {
                    return Err(ParseError::Invalid {
                        line: no,
                        source: NetError::DuplicateId(id),
                    });
                }
                let mut place = PlaceDef::new(id);
                let mut used = Vec::new();
                while let Some(opt) = line.option(&["capacity", "init", "label"], &mut used)? {
                    match opt.as_str() {
                        "capacity" => {
                            let k = line.int("capacity")?;
                            if k == 0 {
                                return Err(ParseError::Invalid {
                                    line: no,
                                    source: NetError::ZeroCapacity(place.id.clone()),
                                });
                            }
                            place.capacity = Capacity::Finite(k);
                        }
                        "init" => place.initial_tokens = line.int("token count")?,
                        _ => place.label = line.quoted()?,
                    }
                }
                if let Capacity::Finite(k) = place.capacity {
                    if place.initial_tokens > k {
                        return Err(ParseError::Invalid {
                            line: no,
                            source: NetError::InitialExceedsCapacity {
                                place: place.id,
                                tokens: place.initial_tokens,
                                capacity: k,
                            },
                        });
                    }
                }
                places.push(place);
            }
            "trans" => {
                let id = line.ident("transition id")?;
                if kinds.insert(id.clone(), Kind::Transition).is_some() {
                    return Err(ParseError::Invalid {
                        line: no,
                        source: NetError::DuplicateId(id),
                    });
                }
                let mut t = TransitionDef::new(id);
                let mut used = Vec::new();
                while line.option(&["label"], &mut used)?.is_some() {
                    t.label = line.quoted()?;
                }
                transitions.push(t);
            }
            "arc" => {
                let source = line.ident("arc source")?;
                line.arrow()?;
                let target = line.ident("arc target")?;
                let mut arc = ArcDef::new(source, target);
                let mut used = Vec::new();
                while let Some(opt) = line.option(&["weight", "rewritable"], &mut used)? {
                    let column = line.column();
                    let v = line.int(&opt)?;
                    if v == 0 {
                        return Err(syntax(no, column, format!("{opt} must be at least 1")));
                    }
                    if opt == "weight" {
                        arc.weight = v;
                    } else {
                        arc.rewrite_limit = Some(v);
                    }
                }
                arcs.push((no, arc));
            }
            other => {
                return Err(syntax(
                    no,
                    line.tokens[0].column,
                    format!("unknown declaration `{other}`"),
                ))
            }
        }
    }

    // Arcs may reference nodes declared later, so endpoint checks run last.
    let mut seen = HashMap::new();
    for (no, arc) in &arcs {
        let invalid = |source| ParseError::Invalid { line: *no, source };
        let src = kinds.get(&arc.source).copied();
        let dst = kinds.get(&arc.target).copied();
        match (src, dst) {
            (None, _) => {
                return Err(invalid(NetError::DanglingArc {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                    missing: arc.source.clone(),
                }))
            }
            (_, None) => {
                return Err(invalid(NetError::DanglingArc {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                    missing: arc.target.clone(),
                }))
            }
            (Some(Kind::Place), Some(Kind::Place)) => {
                return Err(invalid(NetError::PlaceToPlace {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                }))
            }
            (Some(Kind::Transition), Some(Kind::Transition)) => {
                return Err(invalid(NetError::TransitionToTransition {
                    from: arc.source.clone(),
                    to: arc.target.clone(),
                }))
            }
            _ => {}
        }
        if seen.insert((arc.source.clone(), arc.target.clone()), *no).is_some() {
            return Err(invalid(NetError::DuplicateArc {
                from: arc.source.clone(),
                to: arc.target.clone(),
            }));
        }
    }

    let name = name.unwrap_or_else(|| "net".to_string());
    NetDefinition::new(name, places, transitions, arcs.into_iter().map(|(_, a)| a).collect())
        .map_err(|source| ParseError::Invalid { line: 0, source })
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

impl NetDefinition {
    /// Render in the net description format; `parse_net` reads it back.
    pub fn to_net_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "net {}", self.name());
        for p in self.places() {
            let _ = write!(out, "place {}", p.id);
            if let Capacity::Finite(k) = p.capacity {
                let _ = write!(out, " capacity {k}");
            }
            if p.initial_tokens > 0 {
                let _ = write!(out, " init {}", p.initial_tokens);
            }
            if !p.label.is_empty() {
                let _ = write!(out, " label {}", quote(&p.label));
            }
            out.push('\n');
        }
        for t in self.transitions() {
            let _ = write!(out, "trans {}", t.id);
            if !t.label.is_empty() {
                let _ = write!(out, " label {}", quote(&t.label));
            }
            out.push('\n');
        }
        for a in self.arcs() {
            let _ = write!(out, "arc {} -> {}", a.source, a.target);
            if a.weight != 1 {
                let _ = write!(out, " weight {}", a.weight);
            }
            if let Some(l) = a.rewrite_limit {
                let _ = write!(out, " rewritable {l}");
            }
            out.push('\n');
        }
        out
    }
}
