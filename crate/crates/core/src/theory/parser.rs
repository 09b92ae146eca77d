use std::collections::BTreeSet;
use std::sync::Arc;

use crate::logic::{BoolExpr, FiniteStructure, FunctionSymbol, RelationSymbol, Signature, Term};

use super::{ExtensionAxiom, TheoryError, TheorySpec, UniversalAxiom};

const KEYWORDS: &[&str] =
    &["theory", "rel", "fun", "const", "forall", "exists", "forbid", "size", "true", "false"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Slash,
    At,
    Not,
    And,
    Or,
    Arrow,
    Iff,
    Eq,
    Neq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, TheoryError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| TheoryError::Parse { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let three: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        let (tok, len) = if three == "<->" {
            (Tok::Iff, 3)
        } else if two == "->" {
            (Tok::Arrow, 2)
        } else if two == "!=" {
            (Tok::Neq, 2)
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            if j < chars.len() && chars[j] == '*' {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            let n = s.parse().map_err(|_| err(l0, c0, format!("integer `{s}` too large")))?;
            (Tok::Int(n), j - i)
        } else {
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                ':' | '.' => Tok::Colon,
                '/' => Tok::Slash,
                '@' => Tok::At,
                '!' | '~' => Tok::Not,
                '&' => Tok::And,
                '|' => Tok::Or,
                '=' => Tok::Eq,
                _ => return Err(err(l0, c0, format!("unexpected character `{c}`"))),
            };
            (tok, 1)
        };
        out.push(Spanned { tok, line: l0, col: c0 });
        advance(len, &mut i, &mut col);
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    sig: Signature,
    scope: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, idx: usize, msg: String) -> TheoryError {
        let s = &self.toks[idx.min(self.toks.len() - 1)];
        TheoryError::Parse { line: s.line, col: s.col, msg }
    }

    fn error(&self, msg: String) -> TheoryError {
        self.error_at(self.pos, msg)
    }

    fn expect(&mut self, want: Tok) -> Result<(), TheoryError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {}, found {}", want.describe(), self.peek().describe())))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), TheoryError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            t => Err(self.error(format!("expected `{kw}`, found {}", t.describe()))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn name(&mut self) -> Result<String, TheoryError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.next();
                Ok(s)
            }
            t => Err(self.error(format!("expected a name, found {}", t.describe()))),
        }
    }

    fn int(&mut self) -> Result<usize, TheoryError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(n)
            }
            t => Err(self.error(format!("expected an integer, found {}", t.describe()))),
        }
    }

    fn declared(&self, name: &str) -> bool {
        self.sig.relation_index(name).is_some() || self.sig.function(name).is_some()
    }

    fn theory(&mut self) -> Result<TheorySpec, TheoryError> {
        self.keyword("theory")?;
        let name = self.name()?;
        let mut spec = TheorySpec {
            name,
            signature: Signature::default(),
            universal: Vec::new(),
            extension: Vec::new(),
            forbidden: Vec::new(),
        };
        loop {
            let at = self.pos;
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "rel" || kw == "fun" => {
                    self.next();
                    let n = self.name()?;
                    self.expect(Tok::Slash)?;
                    let arity = self.int()?;
                    if self.declared(&n) {
                        return Err(self.error_at(at, format!("symbol `{n}` declared twice")));
                    }
                    if kw == "rel" {
                        if arity == 0 {
                            return Err(self.error_at(at, format!("relation `{n}` needs arity at least 1")));
                        }
                        self.sig.relations.push(RelationSymbol { name: n, arity });
                    } else {
                        self.sig.functions.push(FunctionSymbol { name: n, arity });
                    }
                }
                Tok::Ident(kw) if kw == "const" => {
                    self.next();
                    let n = self.name()?;
                    if self.declared(&n) {
                        return Err(self.error_at(at, format!("symbol `{n}` declared twice")));
                    }
                    self.sig.functions.push(FunctionSymbol { name: n, arity: 0 });
                }
                _ => self.axiom(&mut spec)?,
            }
        }
        spec.signature = self.sig.clone();
        Ok(spec)
    }

    fn axiom(&mut self, spec: &mut TheorySpec) -> Result<(), TheoryError> {
        let label = if *self.peek() == Tok::At {
            self.next();
            Some(self.name()?)
        } else {
            None
        };
        if self.is_keyword("forbid") {
            self.next();
            let pattern = self.structure_literal()?;
            let label = label.unwrap_or_else(|| format!("forbid{}", spec.forbidden.len()));
            spec.universal.push(TheorySpec::forbid_axiom(label, &pattern));
            spec.forbidden.push(pattern);
            return Ok(());
        }
        let mut forall = Vec::new();
        if self.is_keyword("forall") {
            self.next();
            forall = self.var_list()?;
        } else if !self.is_keyword("exists") {
            return Err(self.error(format!(
                "expected a declaration or an axiom, found {}",
                self.peek().describe()
            )));
        }
        let mut exists = Vec::new();
        if self.is_keyword("exists") {
            self.next();
            exists = self.var_list()?;
            if exists.is_empty() {
                return Err(self.error("`exists` needs at least one variable".into()));
            }
        }
        for v in &exists {
            if forall.contains(v) {
                return Err(self.error(format!("variable `{v}` bound twice")));
            }
        }
        self.expect(Tok::Colon)?;
        self.scope = forall.iter().chain(&exists).cloned().collect();
        let body = self.expr()?;
        self.scope.clear();
        if exists.is_empty() {
            let label = label.unwrap_or_else(|| format!("u{}", spec.universal.len()));
            spec.universal.push(UniversalAxiom { label, vars: forall, body });
        } else {
            let label = label.unwrap_or_else(|| format!("e{}", spec.extension.len()));
            spec.extension.push(ExtensionAxiom { label, forall, exists, body });
        }
        Ok(())
    }

    fn var_list(&mut self) -> Result<Vec<String>, TheoryError> {
        let mut vars: Vec<String> = Vec::new();
        while let Tok::Ident(s) = self.peek().clone() {
            if KEYWORDS.contains(&s.as_str()) {
                break;
            }
            if vars.contains(&s) {
                return Err(self.error(format!("variable `{s}` bound twice")));
            }
            if self.declared(&s) {
                return Err(self.error(format!("variable `{s}` shadows a symbol")));
            }
            self.next();
            vars.push(s);
            if *self.peek() == Tok::Comma {
                self.next();
            }
        }
        Ok(vars)
    }

    fn structure_literal(&mut self) -> Result<FiniteStructure, TheoryError> {
        if let Tok::Ident(s) = self.peek() {
            if s != "size" {
                self.next();
            }
        }
        self.keyword("size")?;
        let size = self.int()?;
        self.expect(Tok::LBrace)?;
        let sig = Arc::new(Signature { relations: self.sig.relations.clone(), functions: Vec::new() });
        let mut s = FiniteStructure::empty(sig.clone(), size);
        while *self.peek() != Tok::RBrace {
            let at = self.pos;
            let name = self.name()?;
            let rel = sig
                .relation_index(&name)
                .ok_or_else(|| self.error_at(at, format!("malformed atom: unknown relation `{name}`")))?;
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            while *self.peek() != Tok::RParen {
                args.push(self.int()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                }
            }
            self.next();
            if args.len() != sig.arity(rel) || args.iter().any(|&a| a >= size) {
                return Err(self.error_at(at, format!("malformed atom: {name}{args:?}")));
            }
            s.insert(rel, args).expect("checked atom");
            if *self.peek() == Tok::Comma {
                self.next();
            }
        }
        self.next();
        Ok(s)
    }

    fn expr(&mut self) -> Result<BoolExpr, TheoryError> {
        let mut lhs = self.implication()?;
        while *self.peek() == Tok::Iff {
            self.next();
            let rhs = self.implication()?;
            lhs = BoolExpr::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<BoolExpr, TheoryError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.next();
            let rhs = self.implication()?;
            return Ok(BoolExpr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<BoolExpr, TheoryError> {
        let mut parts = vec![self.conjunction()?];
        while *self.peek() == Tok::Or {
            self.next();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { BoolExpr::Or(parts) })
    }

    fn conjunction(&mut self) -> Result<BoolExpr, TheoryError> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::And {
            self.next();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { BoolExpr::And(parts) })
    }

    fn unary(&mut self) -> Result<BoolExpr, TheoryError> {
        if *self.peek() == Tok::Not {
            self.next();
            return Ok(BoolExpr::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<BoolExpr, TheoryError> {
        let at = self.pos;
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(BoolExpr::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(BoolExpr::False)
            }
            Tok::Ident(s) if self.sig.relation_index(&s).is_some() => {
                self.next();
                let args = self.arguments()?;
                let rel = self.sig.relation_index(&s).unwrap();
                if args.len() != self.sig.arity(rel) {
                    return Err(self.error_at(
                        at,
                        format!(
                            "malformed atom: `{s}` expects {} arguments, got {}",
                            self.sig.arity(rel),
                            args.len()
                        ),
                    ));
                }
                Ok(BoolExpr::Atom(s, args))
            }
            _ => {
                let lhs = self.term()?;
                let op = self.next();
                let rhs = self.term()?;
                match op.tok {
                    Tok::Eq => Ok(BoolExpr::Eq(lhs, rhs)),
                    Tok::Neq => Ok(BoolExpr::not(BoolExpr::Eq(lhs, rhs))),
                    t => Err(self.error_at(at, format!("malformed atom: expected `=` or `!=` after term, found {}", t.describe()))),
                }
            }
        }
    }

    fn arguments(&mut self) -> Result<Vec<Term>, TheoryError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.term()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, TheoryError> {
        let at = self.pos;
        let s = match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => s,
            t => return Err(self.error(format!("malformed atom: expected a term, found {}", t.describe()))),
        };
        self.next();
        if self.scope.contains(&s) {
            return Ok(Term::Var(s));
        }
        if let Some(f) = self.sig.function(&s).cloned() {
            if f.arity == 0 {
                return Ok(Term::App(s, Vec::new()));
            }
            let args = self.arguments()?;
            if args.len() != f.arity {
                return Err(self.error_at(
                    at,
                    format!("malformed atom: `{s}` expects {} arguments, got {}", f.arity, args.len()),
                ));
            }
            return Ok(Term::App(s, args));
        }
        if self.sig.relation_index(&s).is_some() {
            return Err(self.error_at(at, format!("malformed atom: relation `{s}` used as a term")));
        }
        if self.peek_at(0) == &Tok::LParen {
            return Err(self.error_at(at, format!("malformed atom: unknown symbol `{s}`")));
        }
        Err(self.error_at(at, format!("unbound variable `{s}`")))
    }
}

/// Parses a theory written in the forge DSL.
pub fn parse_dsl(src: &str) -> Result<TheorySpec, TheoryError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, sig: Signature::default(), scope: Vec::new() };
    let spec = p.theory()?;
    let names: BTreeSet<&str> = spec
        .universal
        .iter()
        .map(|a| a.label.as_str())
        .chain(spec.extension.iter().map(|a| a.label.as_str()))
        .collect();
    if names.len() != spec.universal.len() + spec.extension.len() {
        return Err(TheoryError::Parse { line: 1, col: 1, msg: "duplicate axiom label".into() });
    }
    Ok(spec)
}
