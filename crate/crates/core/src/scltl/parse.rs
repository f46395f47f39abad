use thiserror::Error;

use super::formula::{Alphabet, Formula};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown observation `{name}` at byte {pos}")]
    UnknownObservation { name: String, pos: usize },
    #[error("negation applies only to observations (byte {pos})")]
    NegationOfNonObservation { pos: usize },
    #[error("the next operator is not part of the co-safe fragment (byte {pos})")]
    NextOperator { pos: usize },
    #[error("the globally operator is not part of the co-safe fragment (byte {pos})")]
    GloballyOperator { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    True,
    Ident(String),
    Not,
    And,
    Or,
    Until,
    Eventually,
    Next,
    Globally,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '!' => {
                toks.push((Tok::Not, i));
                i += 1;
            }
            '&' => {
                toks.push((Tok::And, i));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Or, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Eventually, i));
                    i += 2;
                } else {
                    return Err(ParseError::Syntax {
                        pos: i,
                        msg: "expected `<>`".into(),
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    // `false` arises only through progression, never in tasks.
                    "false" => {
                        return Err(ParseError::Syntax {
                            pos: start,
                            msg: "`false` is not valid surface syntax".into(),
                        })
                    }
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    "X" => Tok::Next,
                    "G" => Tok::Globally,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((tok, start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

const MAX_NESTING: usize = 512;

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    alphabet: &'a Alphabet,
    end: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |(_, p)| *p)
    }

    fn descend(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(ParseError::Syntax {
                pos: self.here(),
                msg: format!("nesting deeper than {MAX_NESTING}"),
            });
        }
        Ok(())
    }

    // or := and ('|' and)*
    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.and()?];
        while matches!(self.peek(), Some((Tok::Or, _))) {
            self.bump();
            parts.push(self.and()?);
        }
        Ok(Formula::or(parts))
    }

    // and := until ('&' until)*
    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.until()?];
        while matches!(self.peek(), Some((Tok::And, _))) {
            self.bump();
            parts.push(self.until()?);
        }
        Ok(Formula::and(parts))
    }

    // until := unary ('U' until)?   (right-associative)
    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if matches!(self.peek(), Some((Tok::Until, _))) {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    // Every recursion cycle passes through here, so this is where nesting is
    // bounded.
    fn unary(&mut self) -> Result<Formula, ParseError> {
        self.descend()?;
        let result = self.unary_inner();
        self.depth -= 1;
        result
    }

    fn unary_inner(&mut self) -> Result<Formula, ParseError> {
        match self.bump() {
            Some((Tok::Eventually, _)) => Ok(Formula::eventually(self.unary()?)),
            Some((Tok::Next, pos)) => Err(ParseError::NextOperator { pos }),
            Some((Tok::Globally, pos)) => Err(ParseError::GloballyOperator { pos }),
            Some((Tok::Not, pos)) => match self.bump() {
                Some((Tok::Ident(name), ipos)) => {
                    let o = self
                        .alphabet
                        .id(&name)
                        .ok_or(ParseError::UnknownObservation { name, pos: ipos })?;
                    Ok(Formula::neg_obs(o))
                }
                _ => Err(ParseError::NegationOfNonObservation { pos }),
            },
            Some((Tok::True, _)) => Ok(Formula::True),
            Some((Tok::Ident(name), pos)) => {
                let o = self
                    .alphabet
                    .id(&name)
                    .ok_or(ParseError::UnknownObservation { name, pos })?;
                Ok(Formula::obs(o))
            }
            Some((Tok::LParen, pos)) => {
                let inner = self.or()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(ParseError::Syntax {
                        pos,
                        msg: "unclosed `(`".into(),
                    }),
                }
            }
            Some((tok, pos)) => Err(ParseError::Syntax {
                pos,
                msg: format!("unexpected token {tok:?}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.here(),
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parses a formula in the surface syntax `true`, `!o`, `&`, `|`, `U`, `F`/`<>`
/// with parentheses. Unary operators bind tighter than `U`, which binds
/// tighter than `&`, which binds tighter than `|`; `U` is right-associative.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        alphabet,
        end: text.len(),
        depth: 0,
    };
    let f = p.or()?;
    if let Some((tok, pos)) = p.peek() {
        return Err(ParseError::Syntax {
            pos: *pos,
            msg: format!("trailing input {tok:?}"),
        });
    }
    Ok(f)
}
