use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub variable: String,
    pub power: u32,
}

/// Right-hand side of one model part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermList {
    pub intercept: bool,
    pub terms: Vec<Term>,
}

/// `response ~ count terms [| zero terms]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaAst {
    pub response: String,
    pub count: TermList,
    /// Regressors of the binary hurdle part when given after `|`.
    pub zero: Option<TermList>,
}

impl FormulaAst {
    /// Zero-part terms, which default to the count terms.
    pub fn zero_terms(&self) -> &TermList {
        self.zero.as_ref().unwrap_or(&self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Tilde,
    Plus,
    Bar,
    Caret,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'~' => {
                out.push((i, Tok::Tilde));
                i += 1;
            }
            b'+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            b'|' => {
                out.push((i, Tok::Bar));
                i += 1;
            }
            b'^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v = text[start..i].parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: "integer too large".into(),
                })?;
                out.push((start, Tok::Int(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{ch}'"),
                });
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

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn term_list(&mut self, response: &str) -> Result<TermList> {
        let mut list = TermList {
            intercept: true,
            terms: Vec::new(),
        };
        loop {
            let at = self.offset();
            match self.peek().cloned() {
                Some(Tok::Int(v @ (0 | 1))) => {
                    self.pos += 1;
                    list.intercept = v == 1;
                }
                Some(Tok::Int(v)) => return self.err(format!("only 0 or 1 may stand alone, got {v}")),
                Some(Tok::Ident(name)) => {
                    self.pos += 1;
                    let mut power = 1;
                    if self.peek() == Some(&Tok::Caret) {
                        self.pos += 1;
                        match self.peek() {
                            Some(Tok::Int(v)) if *v >= 1 && *v <= u32::MAX as u64 => {
                                power = *v as u32;
                                self.pos += 1;
                            }
                            _ => return self.err("expected a positive integer power after '^'"),
                        }
                    }
                    if name == response {
                        return Err(Error::Parse {
                            offset: at,
                            message: format!("response '{name}' cannot be a regressor"),
                        });
                    }
                    let term = Term { variable: name, power };
                    if list.terms.contains(&term) {
                        return Err(Error::Parse {
                            offset: at,
                            message: format!("duplicate term '{}'", display_term(&term)),
                        });
                    }
                    list.terms.push(term);
                }
                Some(_) => return self.err("expected a term"),
                None => return self.err("empty term list"),
            }
            if self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
            } else {
                break;
            }
        }
        if !list.intercept && list.terms.is_empty() {
            return self.err("model has no regressors and no intercept");
        }
        Ok(list)
    }
}

/// Parse `response ~ term (+ term)* (| term (+ term)*)?`.
///
/// A term is a column name with an optional `^k` power, or the literal `1`
/// (keep intercept) / `0` (drop intercept).
pub fn parse_formula(text: &str) -> Result<FormulaAst> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let response = match p.peek().cloned() {
        Some(Tok::Ident(name)) => {
            p.pos += 1;
            name
        }
        None => return p.err("empty formula"),
        _ => return p.err("expected response variable"),
    };
    if p.peek() != Some(&Tok::Tilde) {
        return p.err("expected '~'");
    }
    p.pos += 1;
    let count = p.term_list(&response)?;
    let zero = if p.peek() == Some(&Tok::Bar) {
        p.pos += 1;
        Some(p.term_list(&response)?)
    } else {
        None
    };
    if p.peek().is_some() {
        return p.err("unexpected token");
    }
    Ok(FormulaAst { response, count, zero })
}

fn display_term(t: &Term) -> String {
    if t.power == 1 {
        t.variable.clone()
    } else {
        format!("{}^{}", t.variable, t.power)
    }
}

impl fmt::Display for TermList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.intercept {
            parts.push("0".into());
        } else if self.terms.is_empty() {
            parts.push("1".into());
        }
        parts.extend(self.terms.iter().map(display_term));
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Display for FormulaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {}", self.response, self.count)?;
        if let Some(z) = &self.zero {
            write!(f, " | {z}")?;
        }
        Ok(())
    }
}
