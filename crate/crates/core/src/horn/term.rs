//! Quantifier-free terms over Int, Real and Bool.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, Signed, Zero};

/// Value sorts that may appear in predicate slots and clause universals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Real,
    Bool,
}

impl Sort {
    pub fn smt_name(self) -> &'static str {
        match self {
            Sort::Int => "Int",
            Sort::Real => "Real",
            Sort::Bool => "Bool",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Sort::Int | Sort::Real)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.smt_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// Arithmetic and boolean terms. Multiplication is only ever built with a
/// literal on one side and `Mod` only has a literal divisor, so every term
/// stays inside linear arithmetic with constant divisibility.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Int(i64),
    Real(Rational64),
    Bool(bool),
    Add(Vec<Term>),
    Sub(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Mod(Box<Term>, i64),
    Cmp(CmpOp, Box<Term>, Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Not(Box<Term>),
    Implies(Box<Term>, Box<Term>),
}

/// A concrete value, as produced by evaluation or read back from a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Real(Rational64),
    Bool(bool),
}

impl Value {
    pub fn as_rational(self) -> Option<Rational64> {
        match self {
            Value::Int(i) => Some(Rational64::from_integer(i)),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            Value::Real(r) if r.is_integer() => Some(r.to_integer()),
            Value::Bool(b) => Some(b as i64),
            _ => None,
        }
    }

    pub fn to_term(self) -> Term {
        match self {
            Value::Int(i) => Term::Int(i),
            Value::Real(r) => Term::Real(r),
            Value::Bool(b) => Term::Bool(b),
        }
    }

    /// Converts to the given sort where this is lossless.
    pub fn coerce(self, sort: Sort) -> Option<Value> {
        match (self, sort) {
            (Value::Int(i), Sort::Int) => Some(Value::Int(i)),
            (Value::Int(i), Sort::Real) => Some(Value::Real(Rational64::from_integer(i))),
            (Value::Real(r), Sort::Real) => Some(Value::Real(r)),
            (Value::Real(r), Sort::Int) if r.is_integer() => Some(Value::Int(r.to_integer())),
            (Value::Bool(b), Sort::Bool) => Some(Value::Bool(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-sorted operation in `{0}`")]
    IllSorted(String),
    #[error("arithmetic overflow")]
    Overflow,
    #[error("modulus by zero")]
    ModZero,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Term {
        Term::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Eq, a, b)
    }

    pub fn ne(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Ne, a, b)
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Lt, a, b)
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Le, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(vec![a, b])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Term) -> Term {
        match a {
            Term::Bool(b) => Term::Bool(!b),
            Term::Not(inner) => *inner,
            Term::Cmp(op, x, y) => Term::Cmp(op.negate(), x, y),
            other => Term::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::Implies(Box::new(a), Box::new(b))
    }

    /// Conjunction that flattens nested conjunctions and drops `true`.
    pub fn and(parts: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(true) => {}
                Term::Bool(false) => return Term::Bool(false),
                Term::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Term::Bool(true),
            1 => out.pop().unwrap(),
            _ => Term::And(out),
        }
    }

    /// Disjunction that flattens nested disjunctions and drops `false`.
    pub fn or(parts: Vec<Term>) -> Term {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Term::Bool(false) => {}
                Term::Bool(true) => return Term::Bool(true),
                Term::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Term::Bool(false),
            1 => out.pop().unwrap(),
            _ => Term::Or(out),
        }
    }

    /// Top-level conjuncts of this term.
    pub fn conjuncts(&self) -> Vec<Term> {
        match self {
            Term::And(parts) => parts.iter().flat_map(|p| p.conjuncts()).collect(),
            Term::Bool(true) => Vec::new(),
            other => vec![other.clone()],
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Bool(true))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Int(_) | Term::Real(_) | Term::Bool(_))
    }

    fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Int(_) | Term::Real(_) | Term::Bool(_) => Vec::new(),
            Term::Add(v) | Term::And(v) | Term::Or(v) => v.iter().collect(),
            Term::Sub(a, b) | Term::Mul(a, b) | Term::Cmp(_, a, b) | Term::Implies(a, b) => {
                vec![a, b]
            }
            Term::Neg(a) | Term::Mod(a, _) | Term::Not(a) => vec![a],
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if let Term::Var(v) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            _ => self.children().into_iter().any(|c| c.mentions(name)),
        }
    }

    /// Simultaneous substitution of variables.
    pub fn subst(&self, map: &BTreeMap<String, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        self.map_vars(&|v| map.get(v).cloned())
    }

    pub fn map_vars(&self, f: &dyn Fn(&str) -> Option<Term>) -> Term {
        let r = |t: &Term| Box::new(t.map_vars(f));
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Int(_) | Term::Real(_) | Term::Bool(_) => self.clone(),
            Term::Add(v) => Term::Add(v.iter().map(|t| t.map_vars(f)).collect()),
            Term::And(v) => Term::And(v.iter().map(|t| t.map_vars(f)).collect()),
            Term::Or(v) => Term::Or(v.iter().map(|t| t.map_vars(f)).collect()),
            Term::Sub(a, b) => Term::Sub(r(a), r(b)),
            Term::Mul(a, b) => Term::Mul(r(a), r(b)),
            Term::Cmp(op, a, b) => Term::Cmp(*op, r(a), r(b)),
            Term::Implies(a, b) => Term::Implies(r(a), r(b)),
            Term::Neg(a) => Term::Neg(r(a)),
            Term::Mod(a, m) => Term::Mod(r(a), *m),
            Term::Not(a) => Term::Not(r(a)),
        }
    }

    /// Evaluates under an environment mapping variable names to values.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        let ill = || EvalError::IllSorted(self.to_string());
        let num = |t: &Term| -> Result<Num, EvalError> {
            match t.eval(env)? {
                Value::Int(i) => Ok(Num::Int(i)),
                Value::Real(r) => Ok(Num::Real(r)),
                Value::Bool(_) => Err(EvalError::IllSorted(t.to_string())),
            }
        };
        let boolean = |t: &Term| -> Result<bool, EvalError> {
            t.eval(env)?
                .as_bool()
                .ok_or_else(|| EvalError::IllSorted(t.to_string()))
        };
        Ok(match self {
            Term::Var(v) => env(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
            Term::Int(i) => Value::Int(*i),
            Term::Real(r) => Value::Real(*r),
            Term::Bool(b) => Value::Bool(*b),
            Term::Add(parts) => {
                let mut acc = Num::Int(0);
                for p in parts {
                    acc = acc.add(num(p)?)?;
                }
                acc.into_value()
            }
            Term::Sub(a, b) => num(a)?.add(num(b)?.neg()?)?.into_value(),
            Term::Neg(a) => num(a)?.neg()?.into_value(),
            Term::Mul(a, b) => num(a)?.mul(num(b)?)?.into_value(),
            Term::Mod(a, m) => match num(a)? {
                Num::Int(i) => {
                    if *m == 0 {
                        return Err(EvalError::ModZero);
                    }
                    Value::Int(i.rem_euclid(*m))
                }
                Num::Real(_) => return Err(ill()),
            },
            Term::Cmp(op, a, b) => {
                let va = a.eval(env)?;
                let vb = b.eval(env)?;
                match (va, vb) {
                    (Value::Bool(x), Value::Bool(y)) => match op {
                        CmpOp::Eq => Value::Bool(x == y),
                        CmpOp::Ne => Value::Bool(x != y),
                        _ => return Err(ill()),
                    },
                    (x, y) => {
                        let x = x.as_rational().ok_or_else(ill)?;
                        let y = y.as_rational().ok_or_else(ill)?;
                        Value::Bool(op.holds(&x, &y))
                    }
                }
            }
            Term::And(parts) => {
                for p in parts {
                    if !boolean(p)? {
                        return Ok(Value::Bool(false));
                    }
                }
                Value::Bool(true)
            }
            Term::Or(parts) => {
                for p in parts {
                    if boolean(p)? {
                        return Ok(Value::Bool(true));
                    }
                }
                Value::Bool(false)
            }
            Term::Not(a) => Value::Bool(!boolean(a)?),
            Term::Implies(a, b) => Value::Bool(!boolean(a)? || boolean(b)?),
        })
    }

    /// Constant folding and trivial simplifications. Never changes meaning.
    pub fn simplify(&self) -> Term {
        let t = match self {
            Term::Add(parts) => {
                let mut lit = Num::Int(0);
                let mut rest = Vec::new();
                let mut ok = true;
                for p in parts.iter().map(|p| p.simplify()) {
                    match Num::of_term(&p) {
                        Some(n) => match lit.add(n) {
                            Ok(s) => lit = s,
                            Err(_) => {
                                ok = false;
                                rest.push(p)
                            }
                        },
                        None => match p {
                            Term::Add(inner) => rest.extend(inner),
                            other => rest.push(other),
                        },
                    }
                }
                if ok && !lit.is_zero() {
                    rest.push(lit.into_term());
                }
                match rest.len() {
                    0 => lit.into_term(),
                    1 => rest.pop().unwrap(),
                    _ => Term::Add(rest),
                }
            }
            Term::Sub(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (Num::of_term(&a), Num::of_term(&b)) {
                    (Some(x), Some(y)) => match y.neg().and_then(|ny| x.add(ny)) {
                        Ok(v) => v.into_term(),
                        Err(_) => Term::Sub(Box::new(a), Box::new(b)),
                    },
                    (_, Some(y)) if y.is_zero() => a,
                    _ => Term::Sub(Box::new(a), Box::new(b)),
                }
            }
            Term::Neg(a) => {
                let a = a.simplify();
                match Num::of_term(&a).map(|n| n.neg()) {
                    Some(Ok(n)) => n.into_term(),
                    _ => Term::Neg(Box::new(a)),
                }
            }
            Term::Mul(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (Num::of_term(&a), Num::of_term(&b)) {
                    (Some(x), Some(y)) => match x.mul(y) {
                        Ok(v) => v.into_term(),
                        Err(_) => Term::Mul(Box::new(a), Box::new(b)),
                    },
                    (Some(x), None) if x.is_one() => b,
                    (None, Some(y)) if y.is_one() => a,
                    _ => Term::Mul(Box::new(a), Box::new(b)),
                }
            }
            Term::Mod(a, m) => {
                let a = a.simplify();
                match (&a, *m) {
                    (Term::Int(i), m) if m != 0 => Term::Int(i.rem_euclid(m)),
                    _ => Term::Mod(Box::new(a), *m),
                }
            }
            Term::Cmp(op, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if a.is_literal() && b.is_literal() {
                    if let Ok(v) = Term::Cmp(*op, Box::new(a.clone()), Box::new(b.clone()))
                        .eval(&|_| None)
                    {
                        return v.to_term();
                    }
                }
                if a == b {
                    match op {
                        CmpOp::Eq | CmpOp::Le | CmpOp::Ge => return Term::Bool(true),
                        CmpOp::Ne | CmpOp::Lt | CmpOp::Gt => return Term::Bool(false),
                    }
                }
                Term::Cmp(*op, Box::new(a), Box::new(b))
            }
            Term::And(parts) => Term::and(parts.iter().map(|p| p.simplify()).collect()),
            Term::Or(parts) => Term::or(parts.iter().map(|p| p.simplify()).collect()),
            Term::Not(a) => Term::not(a.simplify()),
            Term::Implies(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (&a, &b) {
                    (Term::Bool(false), _) | (_, Term::Bool(true)) => Term::Bool(true),
                    (Term::Bool(true), _) => b,
                    (_, Term::Bool(false)) => Term::not(a),
                    _ => Term::Implies(Box::new(a), Box::new(b)),
                }
            }
            other => other.clone(),
        };
        t
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        let (my, body): (u8, String) = match self {
            Term::Var(v) => return f.write_str(v),
            Term::Int(i) => return write!(f, "{i}"),
            Term::Real(r) => return write!(f, "{}", fmt_real(*r)),
            Term::Bool(b) => return write!(f, "{b}"),
            Term::Add(parts) => (
                4,
                parts
                    .iter()
                    .map(|p| format!("{}", Prec(p, 5)))
                    .collect::<Vec<_>>()
                    .join(" + "),
            ),
            Term::Sub(a, b) => (4, format!("{} - {}", Prec(a, 4), Prec(b, 5))),
            Term::Neg(a) => (6, format!("-{}", Prec(a, 6))),
            Term::Mul(a, b) => (5, format!("{}*{}", Prec(a, 5), Prec(b, 6))),
            Term::Mod(a, m) => (5, format!("{} % {m}", Prec(a, 6))),
            Term::Cmp(op, a, b) => (3, format!("{} {} {}", Prec(a, 4), op.symbol(), Prec(b, 4))),
            Term::Not(a) => (6, format!("!{}", Prec(a, 6))),
            Term::And(parts) => (
                2,
                parts
                    .iter()
                    .map(|p| format!("{}", Prec(p, 3)))
                    .collect::<Vec<_>>()
                    .join(" && "),
            ),
            Term::Or(parts) => (
                1,
                parts
                    .iter()
                    .map(|p| format!("{}", Prec(p, 2)))
                    .collect::<Vec<_>>()
                    .join(" || "),
            ),
            Term::Implies(a, b) => (0, format!("{} => {}", Prec(a, 1), Prec(b, 0))),
        };
        if my < prec {
            write!(f, "({body})")
        } else {
            f.write_str(&body)
        }
    }
}

struct Prec<'a>(&'a Term, u8);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_prec(f, self.1)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

pub(crate) fn fmt_real(r: Rational64) -> String {
    if r.is_integer() {
        format!("{}.0", r.to_integer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Numeric helper that keeps integers exact and promotes to rationals.
#[derive(Debug, Clone, Copy)]
enum Num {
    Int(i64),
    Real(Rational64),
}

impl Num {
    fn of_term(t: &Term) -> Option<Num> {
        match t {
            Term::Int(i) => Some(Num::Int(*i)),
            Term::Real(r) => Some(Num::Real(*r)),
            _ => None,
        }
    }

    fn rat(self) -> Rational64 {
        match self {
            Num::Int(i) => Rational64::from_integer(i),
            Num::Real(r) => r,
        }
    }

    fn is_zero(self) -> bool {
        self.rat().is_zero()
    }

    fn is_one(self) -> bool {
        self.rat() == Rational64::from_integer(1)
    }

    fn add(self, o: Num) -> Result<Num, EvalError> {
        match (self, o) {
            (Num::Int(a), Num::Int(b)) => a.checked_add(b).map(Num::Int).ok_or(EvalError::Overflow),
            _ => checked_rat(self.rat(), o.rat(), |a, b| a.checked_add(b)),
        }
    }

    fn mul(self, o: Num) -> Result<Num, EvalError> {
        match (self, o) {
            (Num::Int(a), Num::Int(b)) => a.checked_mul(b).map(Num::Int).ok_or(EvalError::Overflow),
            _ => checked_rat(self.rat(), o.rat(), |a, b| a.checked_mul(b)),
        }
    }

    fn neg(self) -> Result<Num, EvalError> {
        match self {
            Num::Int(a) => a.checked_neg().map(Num::Int).ok_or(EvalError::Overflow),
            Num::Real(r) => Ok(Num::Real(-r)),
        }
    }

    fn into_value(self) -> Value {
        match self {
            Num::Int(i) => Value::Int(i),
            Num::Real(r) => Value::Real(r),
        }
    }

    fn into_term(self) -> Term {
        self.into_value().to_term()
    }
}

fn checked_rat(
    a: Rational64,
    b: Rational64,
    op: impl Fn(&Rational64, &Rational64) -> Option<Rational64>,
) -> Result<Num, EvalError> {
    op(&a, &b).map(Num::Real).ok_or(EvalError::Overflow)
}

/// Absolute value helper for literal formatting.
pub(crate) fn is_negative(r: Rational64) -> bool {
    r.is_negative()
}
