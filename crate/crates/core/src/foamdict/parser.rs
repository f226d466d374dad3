//! Recursive-descent parser for the dictionary dialect.
//!
//! Tokens are produced on demand so that directive lines (`#include ...`) can
//! be captured verbatim up to the end of the line.

use super::value::{looks_numeric, FoamDict, FoamEntry, FoamFile, FoamList, FoamValue, ListDelim};
use super::ParseError;

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Verbatim(String),
    Comment(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Eof,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: Vec<char>,
    idx: usize,
    line: usize,
    column: usize,
    peeked: Option<(Tok, Pos)>,
    _src: &'a str,
}

fn is_delim(c: char) -> bool {
    matches!(c, '{' | '}' | '(' | ')' | '[' | ']' | ';' | '"') || c.is_whitespace()
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().collect(),
            idx: 0,
            line: 1,
            column: 1,
            peeked: None,
            _src: src,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn cur(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn at(&self, off: usize) -> Option<char> {
        self.chars.get(self.idx + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.cur()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.cur(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err(pos: Pos, expected: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.line,
            column: pos.column,
            expected: expected.into(),
        }
    }

    fn peek(&mut self) -> Result<&(Tok, Pos), ParseError> {
        if self.peeked.is_none() {
            let t = self.lex()?;
            self.peeked = Some(t);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    /// Raw remainder of the current line, trimmed. Only valid directly after
    /// consuming a token without peeking past it.
    fn rest_of_line(&mut self) -> String {
        debug_assert!(self.peeked.is_none());
        let mut s = String::new();
        while let Some(c) = self.cur() {
            if c == '\n' {
                break;
            }
            s.push(c);
            self.bump();
        }
        s.trim().to_string()
    }

    fn lex(&mut self) -> Result<(Tok, Pos), ParseError> {
        self.skip_ws();
        let pos = self.pos();
        let Some(c) = self.cur() else {
            return Ok((Tok::Eof, pos));
        };
        let tok = match c {
            '{' => {
                self.bump();
                Tok::LBrace
            }
            '}' => {
                self.bump();
                Tok::RBrace
            }
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            '[' => {
                self.bump();
                Tok::LBracket
            }
            ']' => {
                self.bump();
                Tok::RBracket
            }
            ';' => {
                self.bump();
                Tok::Semi
            }
            '"' => self.lex_string(pos)?,
            '/' if self.at(1) == Some('/') => {
                let mut s = String::new();
                while let Some(c) = self.cur() {
                    if c == '\n' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Tok::Comment(s.trim_end().to_string())
            }
            '/' if self.at(1) == Some('*') => {
                let mut s = String::from("/*");
                self.bump();
                self.bump();
                loop {
                    match self.cur() {
                        None => return Err(Self::err(pos, "end of block comment '*/'")),
                        Some('*') if self.at(1) == Some('/') => {
                            self.bump();
                            self.bump();
                            s.push_str("*/");
                            break;
                        }
                        Some(c) => {
                            s.push(c);
                            self.bump();
                        }
                    }
                }
                Tok::Comment(s)
            }
            '#' if self.at(1) == Some('{') => {
                let mut s = String::from("#{");
                self.bump();
                self.bump();
                loop {
                    match self.cur() {
                        None => return Err(Self::err(pos, "end of verbatim block '#}'")),
                        Some('#') if self.at(1) == Some('}') => {
                            self.bump();
                            self.bump();
                            s.push_str("#}");
                            break;
                        }
                        Some(c) => {
                            s.push(c);
                            self.bump();
                        }
                    }
                }
                Tok::Verbatim(s)
            }
            _ => self.lex_word(),
        };
        Ok((tok, pos))
    }

    fn lex_string(&mut self, pos: Pos) -> Result<Tok, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(Self::err(pos, "closing '\"'")),
                Some('\\') => {
                    s.push('\\');
                    match self.bump() {
                        Some(c) => s.push(c),
                        None => return Err(Self::err(pos, "closing '\"'")),
                    }
                }
                Some('"') => break,
                Some(c) => s.push(c),
            }
        }
        Ok(Tok::Str(s))
    }

    /// Words may embed balanced parentheses (`div(phi,U)`), unless the word
    /// so far is all digits, in which case `(` starts a length-prefixed list.
    fn lex_word(&mut self) -> Tok {
        let mut s = String::new();
        let mut depth = 0usize;
        while let Some(c) = self.cur() {
            if depth > 0 {
                if c == '\n' || c == ';' || c == '{' || c == '}' || c == '"' {
                    break;
                }
                if c == '(' {
                    depth += 1;
                } else if c == ')' {
                    depth -= 1;
                }
                s.push(c);
                self.bump();
                continue;
            }
            if c == '(' && !s.is_empty() && !s.chars().all(|d| d.is_ascii_digit()) {
                depth = 1;
                s.push(c);
                self.bump();
                continue;
            }
            if is_delim(c) {
                break;
            }
            if c == '/' && matches!(self.at(1), Some('/') | Some('*')) {
                break;
            }
            s.push(c);
            self.bump();
        }
        if s.is_empty() {
            if let Some(c) = self.bump() {
                s.push(c);
            }
        }
        Tok::Word(s)
    }
}

struct Parser<'a> {
    lx: Lexer<'a>,
    depth: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("word '{w}'"),
        Tok::Str(_) => "string".into(),
        Tok::Verbatim(_) => "verbatim block".into(),
        Tok::Comment(_) => "comment".into(),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Semi => "';'".into(),
        Tok::Eof => "end of input".into(),
    }
}

impl<'a> Parser<'a> {
    fn enter(&mut self, pos: Pos) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Lexer::err(pos, format!("nesting depth at most {MAX_DEPTH}")));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Entries up to the matching `}` (when `nested`) or end of input.
    fn dict_body(&mut self, nested: bool) -> Result<FoamDict, ParseError> {
        let mut dict = FoamDict::new();
        let mut pending: Vec<String> = Vec::new();
        loop {
            let (tok, pos) = self.lx.next()?;
            match tok {
                Tok::Comment(c) => pending.push(c),
                Tok::Semi => {}
                Tok::RBrace if nested => {
                    dict.trailer = pending;
                    return Ok(dict);
                }
                Tok::Eof if !nested => {
                    dict.trailer = pending;
                    return Ok(dict);
                }
                Tok::Eof => return Err(Lexer::err(pos, "'}'")),
                Tok::Word(w) if w.starts_with('#') => {
                    let rest = self.lx.rest_of_line();
                    let mut entry = FoamEntry::new(w, FoamValue::Token(rest));
                    entry.trivia = std::mem::take(&mut pending);
                    dict.entries.push(entry);
                }
                Tok::Word(w) => {
                    let mut entry = self.entry(w, pos)?;
                    entry.trivia = std::mem::take(&mut pending);
                    dict.entries.push(entry);
                }
                Tok::Str(s) => {
                    let mut entry = self.entry(format!("\"{s}\""), pos)?;
                    entry.trivia = std::mem::take(&mut pending);
                    dict.entries.push(entry);
                }
                other => {
                    return Err(Lexer::err(
                        pos,
                        format!("keyword or '}}', found {}", describe(&other)),
                    ))
                }
            }
        }
    }

    fn entry(&mut self, keyword: String, kpos: Pos) -> Result<FoamEntry, ParseError> {
        // Skip comments between keyword and value; they are not retained.
        while let Tok::Comment(_) = &self.lx.peek()?.0 {
            self.lx.next()?;
        }
        if matches!(self.lx.peek()?.0, Tok::LBrace) {
            let (_, pos) = self.lx.next()?;
            self.enter(pos)?;
            let d = self.dict_body(true)?;
            self.leave();
            return Ok(FoamEntry::new(keyword, FoamValue::Dict(d)));
        }
        let mut items = Vec::new();
        loop {
            let (tok, pos) = self.lx.next()?;
            match tok {
                Tok::Semi => break,
                Tok::Comment(_) => {}
                Tok::Eof => {
                    return Err(Lexer::err(
                        pos,
                        format!("';' to end entry '{keyword}' started at line {}", kpos.line),
                    ))
                }
                Tok::RBrace | Tok::RParen | Tok::RBracket => {
                    return Err(Lexer::err(
                        pos,
                        format!("';' to end entry '{keyword}', found {}", describe(&tok)),
                    ))
                }
                t => items.push(self.item(t, pos)?),
            }
        }
        let value = if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            FoamValue::Seq(items)
        };
        Ok(FoamEntry::new(keyword, value))
    }

    /// One value starting with an already-consumed token.
    fn item(&mut self, tok: Tok, pos: Pos) -> Result<FoamValue, ParseError> {
        match tok {
            Tok::Word(w) => {
                if looks_numeric(&w) {
                    if w.bytes().all(|b| b.is_ascii_digit()) && matches!(self.lx.peek()?.0, Tok::LParen) {
                        let (_, lpos) = self.lx.next()?;
                        let mut list = self.list(ListDelim::Paren, lpos)?;
                        list.declared_len = w.parse::<usize>().ok();
                        if list.declared_len.is_none() {
                            return Err(Lexer::err(pos, "list length prefix"));
                        }
                        return Ok(FoamValue::List(list));
                    }
                    match w.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(FoamValue::Number(v)),
                        _ => Ok(FoamValue::Token(w)),
                    }
                } else {
                    Ok(FoamValue::Token(w))
                }
            }
            Tok::Str(s) => Ok(FoamValue::Str(s)),
            Tok::Verbatim(s) => Ok(FoamValue::Token(s)),
            Tok::LParen => Ok(FoamValue::List(self.list(ListDelim::Paren, pos)?)),
            Tok::LBracket => Ok(FoamValue::List(self.list(ListDelim::Bracket, pos)?)),
            Tok::LBrace => {
                self.enter(pos)?;
                let d = self.dict_body(true)?;
                self.leave();
                Ok(FoamValue::Dict(d))
            }
            other => Err(Lexer::err(pos, format!("value, found {}", describe(&other)))),
        }
    }

    fn list(&mut self, delim: ListDelim, open: Pos) -> Result<FoamList, ParseError> {
        self.enter(open)?;
        let close = match delim {
            ListDelim::Paren => Tok::RParen,
            ListDelim::Bracket => Tok::RBracket,
        };
        let mut items = Vec::new();
        loop {
            let (tok, pos) = self.lx.next()?;
            if tok == close {
                break;
            }
            match tok {
                Tok::Comment(_) => {}
                Tok::Eof => {
                    let want = if delim == ListDelim::Paren { "')'" } else { "']'" };
                    return Err(Lexer::err(
                        pos,
                        format!("{want} to close list opened at line {}", open.line),
                    ));
                }
                Tok::Semi | Tok::RBrace | Tok::RParen | Tok::RBracket => {
                    return Err(Lexer::err(pos, format!("list item, found {}", describe(&tok))))
                }
                t => items.push(self.item(t, pos)?),
            }
        }
        self.leave();
        Ok(FoamList {
            items,
            declared_len: None,
            delim,
        })
    }
}

pub fn parse_dict(text: &str) -> Result<FoamFile, ParseError> {
    let mut p = Parser {
        lx: Lexer::new(text),
        depth: 0,
    };
    let mut body = p.dict_body(false)?;
    let header = match body.entries.first() {
        Some(e) if e.keyword == "FoamFile" && matches!(e.value, FoamValue::Dict(_)) => {
            Some(body.entries.remove(0))
        }
        _ => None,
    };
    Ok(FoamFile {
        header,
        body,
        source_path: None,
    })
}

/// Parses raw bytes; invalid UTF-8 is reported as a parse error at the
/// offending position.
pub fn parse_dict_bytes(bytes: &[u8]) -> Result<FoamFile, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_dict(s),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = 1 + valid.iter().filter(|&&b| b == b'\n').count();
            let last_nl = valid.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            let column = 1 + String::from_utf8_lossy(&valid[last_nl..]).chars().count();
            Err(ParseError {
                line,
                column,
                expected: "UTF-8 text".into(),
            })
        }
    }
}
