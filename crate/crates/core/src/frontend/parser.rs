//! Lexer and recursive-descent parser for `.arr` sources.

use num_rational::Rational64;

use super::ast::*;
use super::FrontendError;
use crate::horn::{Sort, Value};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(Rational64),
    Sym(&'static str),
    Eof,
}

const SYMBOLS: [&str; 26] = [
    "==", "!=", "<=", ">=", "&&", "||", "=>", "(", ")", "[", "]", "{", "}", ";", ",", ":", "=",
    "<", ">", "+", "-", "*", "%", "!", "#", ".",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn bump(&mut self) {
        if self.src[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn skip_trivia(&mut self) -> Result<(), FrontendError> {
        loop {
            let rest = &self.src[self.pos..];
            if rest.first().is_some_and(|c| c.is_ascii_whitespace()) {
                self.bump();
            } else if rest.starts_with(b"//") {
                while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                    self.bump();
                }
            } else if rest.starts_with(b"/*") {
                let start = self.loc();
                self.bump();
                self.bump();
                loop {
                    if self.pos >= self.src.len() {
                        return Err(FrontendError::syntax(start, "unterminated comment"));
                    }
                    if self.src[self.pos..].starts_with(b"*/") {
                        self.bump();
                        self.bump();
                        break;
                    }
                    self.bump();
                }
            } else {
                return Ok(());
            }
        }
    }

    fn loc(&self) -> Loc {
        Loc { line: self.line, col: self.col }
    }

    fn next(&mut self) -> Result<(Tok, Loc), FrontendError> {
        self.skip_trivia()?;
        let loc = self.loc();
        let Some(&c) = self.src.get(self.pos) else { return Ok((Tok::Eof, loc)) };
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
                self.bump();
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok((Tok::Ident(s), loc));
        }
        if c.is_ascii_digit() {
            let start = self.pos;
            while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let int: i64 = int_part
                .parse()
                .map_err(|_| FrontendError::syntax(loc, "integer literal out of range"))?;
            if self.src.get(self.pos) == Some(&b'.')
                && self.src.get(self.pos + 1).is_some_and(|c| c.is_ascii_digit())
            {
                self.bump();
                let fstart = self.pos;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
                let frac = std::str::from_utf8(&self.src[fstart..self.pos]).unwrap();
                let overflow = || FrontendError::syntax(loc, "real literal out of range");
                let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(overflow)?;
                let num: i64 = frac.parse().map_err(|_| overflow())?;
                let total = int.checked_mul(den).and_then(|v| v.checked_add(num)).ok_or_else(overflow)?;
                return Ok((Tok::Real(Rational64::new(total, den)), loc));
            }
            return Ok((Tok::Int(int), loc));
        }
        for s in SYMBOLS {
            if self.src[self.pos..].starts_with(s.as_bytes()) {
                for _ in 0..s.len() {
                    self.bump();
                }
                return Ok((Tok::Sym(s), loc));
            }
        }
        Err(FrontendError::syntax(loc, format!("unexpected character `{}`", c as char)))
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, Loc)>, FrontendError> {
    let mut lx = Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let t = lx.next()?;
        let eof = t.0 == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}

const KEYWORDS: [&str; 14] = [
    "int", "real", "bool", "while", "if", "else", "assume", "assert", "forall", "at", "true",
    "false", "union", "intersection",
];

struct Parser {
    toks: Vec<(Tok, Loc)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> FrontendError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Real(r) => format!("`{r}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        FrontendError::syntax(self.loc(), format!("expected {wanted}, found {found}"))
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn sort_keyword(&self) -> Option<Sort> {
        match self.peek() {
            Tok::Ident(s) if s == "int" => Some(Sort::Int),
            Tok::Ident(s) if s == "real" => Some(Sort::Real),
            Tok::Ident(s) if s == "bool" => Some(Sort::Bool),
            _ => None,
        }
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        let mut prog = Program::default();
        while let Some(sort) = self.sort_keyword() {
            self.advance();
            self.decl(sort, &mut prog.decls)?;
        }
        prog.body = self.stmts(true)?;
        while self.is_kw("assert") {
            prog.props.push(self.property()?);
        }
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("statement or `assert`"));
        }
        Ok(prog)
    }

    fn decl(&mut self, sort: Sort, out: &mut Vec<Decl>) -> Result<(), FrontendError> {
        loop {
            let loc = self.loc();
            let name = self.ident()?;
            let mut dims = Vec::new();
            while self.eat_sym("[") {
                if self.eat_sym("]") {
                    dims.push(IndexDomain::Total(Sort::Int));
                    continue;
                }
                if self.eat_kw("real") {
                    dims.push(IndexDomain::Total(Sort::Real));
                } else if self.eat_kw("int") {
                    dims.push(IndexDomain::Total(Sort::Int));
                } else {
                    dims.push(IndexDomain::Range(self.expr()?));
                }
                self.expect_sym("]")?;
            }
            let kind = if dims.is_empty() {
                DeclKind::Scalar
            } else {
                let init = if self.eat_sym("=") { Some(self.literal(sort)?) } else { None };
                DeclKind::Array { dims, init }
            };
            out.push(Decl { name, sort, kind, loc });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")
    }

    fn literal(&mut self, sort: Sort) -> Result<Value, FrontendError> {
        let loc = self.loc();
        let neg = self.eat_sym("-");
        let v = match self.advance() {
            Tok::Int(i) => Value::Int(if neg { -i } else { i }),
            Tok::Real(r) => Value::Real(if neg { -r } else { r }),
            Tok::Ident(s) if s == "true" && !neg => Value::Bool(true),
            Tok::Ident(s) if s == "false" && !neg => Value::Bool(false),
            _ => return Err(FrontendError::syntax(loc, "expected a literal")),
        };
        v.coerce(sort).ok_or_else(|| {
            FrontendError::sort(loc, format!("literal `{v}` does not have sort {sort}"))
        })
    }

    fn at_block_end(&self, top: bool) -> bool {
        if top {
            matches!(self.peek(), Tok::Eof) || self.is_kw("assert")
        } else {
            self.is_sym("}")
        }
    }

    fn stmts(&mut self, top: bool) -> Result<Vec<Stmt>, FrontendError> {
        let mut out = Vec::new();
        while !self.at_block_end(top) {
            out.push(self.stmt(top)?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect_sym("{")?;
        let body = self.stmts(false)?;
        self.expect_sym("}")?;
        Ok(body)
    }

    fn stmt(&mut self, top: bool) -> Result<Stmt, FrontendError> {
        let loc = self.loc();
        let mut label = None;
        if matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
            && matches!(self.peek_at(1), Tok::Sym(":"))
        {
            label = Some(self.ident()?);
            self.advance();
            if self.at_block_end(top) {
                return Ok(Stmt { label, kind: StmtKind::Skip, loc });
            }
        }
        let kind = self.stmt_kind()?;
        Ok(Stmt { label, kind, loc })
    }

    fn stmt_kind(&mut self) -> Result<StmtKind, FrontendError> {
        if self.eat_sym(";") {
            return Ok(StmtKind::Skip);
        }
        if self.eat_kw("while") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            return Ok(StmtKind::While { cond, body });
        }
        if self.eat_kw("if") {
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then = self.block()?;
            let els = if self.eat_kw("else") {
                if self.is_kw("if") {
                    let loc = self.loc();
                    let kind = self.stmt_kind()?;
                    vec![Stmt { label: None, kind, loc }]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(StmtKind::If { cond, then, els });
        }
        if self.eat_kw("assume") {
            if self.is_kw("forall") {
                let q = self.quantified()?;
                self.expect_sym(";")?;
                return Ok(StmtKind::AssumeForall(q));
            }
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(StmtKind::Assume(cond));
        }
        let target = self.ident()?;
        if self.is_sym("[") {
            let mut index = Vec::new();
            while self.eat_sym("[") {
                index.push(self.expr()?);
                self.expect_sym("]")?;
            }
            self.expect_sym("=")?;
            let value = self.expr()?;
            self.expect_sym(";")?;
            return Ok(StmtKind::Store { array: target, index, value });
        }
        self.expect_sym("=")?;
        for (kw, kind) in [("union", SetOpKind::Union), ("intersection", SetOpKind::Intersection)] {
            if self.is_kw(kw) && matches!(self.peek_at(1), Tok::Sym("(")) {
                self.advance();
                self.advance();
                let lhs = self.ident()?;
                self.expect_sym(",")?;
                let rhs = self.ident()?;
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                return Ok(StmtKind::SetOp { kind, target, lhs, rhs });
            }
        }
        let value = self.expr()?;
        self.expect_sym(";")?;
        Ok(StmtKind::Assign { target, value })
    }

    fn quantified(&mut self) -> Result<Quantified, FrontendError> {
        let mut binders = Vec::new();
        if self.eat_kw("forall") {
            loop {
                binders.push((self.ident()?, Sort::Int));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(":")?;
        }
        let e = self.expr()?;
        let (guard, conclusion) = match e {
            Expr::Bin(BinOp::Implies, g, c) => (*g, *c),
            other => (Expr::Bool(true), other),
        };
        Ok(Quantified { binders, guard, conclusion })
    }

    fn property(&mut self) -> Result<PropertySpec, FrontendError> {
        let loc = self.loc();
        if !self.eat_kw("assert") {
            return Err(self.unexpected("`assert`"));
        }
        let at = if self.eat_kw("at") { Some(self.ident()?) } else { None };
        let body = self.quantified()?;
        self.expect_sym(";")?;
        Ok(PropertySpec { at, body, loc })
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        let lhs = self.or_expr()?;
        if self.eat_sym("=>") {
            let rhs = self.expr()?;
            return Ok(Expr::bin(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.and_expr()?;
        while self.eat_sym("||") {
            e = Expr::bin(BinOp::Or, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.cmp_expr()?;
        while self.eat_sym("&&") {
            e = Expr::bin(BinOp::And, e, self.cmp_expr()?);
        }
        Ok(e)
    }

    fn cmp_expr(&mut self) -> Result<Expr, FrontendError> {
        let e = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(e),
        };
        self.advance();
        Ok(Expr::bin(op, e, self.add_expr()?))
    }

    fn add_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("%") {
                BinOp::Mod
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat_sym("-") {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Int(i) => Expr::Int(-i),
                Expr::Real(r) => Expr::Real(-r),
                other => Expr::Neg(Box::new(other)),
            });
        }
        if self.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Int(i))
            }
            Tok::Real(r) => {
                self.advance();
                Ok(Expr::Real(r))
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("#") => {
                self.advance();
                let array = self.ident()?;
                let mut orig = false;
                if self.eat_sym(".") {
                    let loc = self.loc();
                    let field = self.ident()?;
                    if field != "orig" {
                        return Err(FrontendError::syntax(loc, "expected `orig` after `.`"));
                    }
                    orig = true;
                }
                self.expect_sym("(")?;
                let value = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::Count { array, orig, value: Box::new(value) })
            }
            Tok::Ident(s) if s == "true" => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                let mut index = Vec::new();
                while self.eat_sym("[") {
                    index.push(self.expr()?);
                    self.expect_sym("]")?;
                }
                if index.is_empty() {
                    Ok(Expr::Var(name))
                } else {
                    Ok(Expr::Select { array: name, index })
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Parses a program without semantic checks.
pub fn parse_program(src: &str) -> Result<Program, FrontendError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    p.program()
}

/// Parses a list of `assert [at LABEL] ...;` lines, as used by hint files.
pub fn parse_properties(src: &str) -> Result<Vec<PropertySpec>, FrontendError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.property()?);
    }
    Ok(out)
}
