//! Surface syntax tree.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Rational64;

use crate::horn::{fmt_real, Sort, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "=>",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Implies => 0,
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Mod => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i64),
    Real(Rational64),
    Bool(bool),
    Var(String),
    Select { array: String, index: Vec<Expr> },
    /// Number of cells of `array` (or of its original contents) equal to `value`.
    Count { array: String, orig: bool, value: Box<Expr> },
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        match e {
            Expr::Not(inner) => *inner,
            Expr::Bool(b) => Expr::Bool(!b),
            other => Expr::Not(Box::new(other)),
        }
    }

    pub fn literal(v: Value) -> Expr {
        match v {
            Value::Int(i) => Expr::Int(i),
            Value::Real(r) => Expr::Real(r),
            Value::Bool(b) => Expr::Bool(b),
        }
    }

    pub fn as_literal(&self) -> Option<Value> {
        match self {
            Expr::Int(i) => Some(Value::Int(*i)),
            Expr::Real(r) => Some(Value::Real(*r)),
            Expr::Bool(b) => Some(Value::Bool(*b)),
            Expr::Neg(inner) => match inner.as_literal()? {
                Value::Int(i) => i.checked_neg().map(Value::Int),
                Value::Real(r) => Some(Value::Real(-r)),
                Value::Bool(_) => None,
            },
            _ => None,
        }
    }

    /// Variables and literals are operands; everything else is compound.
    pub fn is_operand(&self) -> bool {
        matches!(self, Expr::Var(_)) || self.as_literal().is_some()
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::Var(_) => Vec::new(),
            Expr::Select { index, .. } => index.iter().collect(),
            Expr::Count { value, .. } => vec![value],
            Expr::Neg(a) | Expr::Not(a) => vec![a],
            Expr::Bin(_, a, b) => vec![a, b],
        }
    }

    /// Scalar variables read by the expression, including those inside indices.
    pub fn scalar_vars(&self, out: &mut BTreeSet<String>) {
        if let Expr::Var(v) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.scalar_vars(out);
        }
    }

    pub fn has_select(&self) -> bool {
        matches!(self, Expr::Select { .. }) || self.children().iter().any(|c| c.has_select())
    }

    pub fn has_count(&self) -> bool {
        matches!(self, Expr::Count { .. }) || self.children().iter().any(|c| c.has_count())
    }

    /// Arrays read by the expression.
    pub fn arrays(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Select { array, .. } | Expr::Count { array, .. } => {
                out.insert(array.clone());
            }
            _ => {}
        }
        for c in self.children() {
            c.arrays(out);
        }
    }

    pub fn map_vars(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        let r = |e: &Expr| Box::new(e.map_vars(f));
        match self {
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) => self.clone(),
            Expr::Select { array, index } => Expr::Select {
                array: array.clone(),
                index: index.iter().map(|i| i.map_vars(f)).collect(),
            },
            Expr::Count { array, orig, value } => {
                Expr::Count { array: array.clone(), orig: *orig, value: r(value) }
            }
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Not(a) => Expr::Not(r(a)),
            Expr::Bin(op, a, b) => Expr::Bin(*op, r(a), r(b)),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Real(r) => write!(f, "{}", fmt_real(*r)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Select { array, index } => {
                f.write_str(array)?;
                for i in index {
                    write!(f, "[{i}]")?;
                }
                Ok(())
            }
            Expr::Count { array, orig, value } => {
                write!(f, "#{array}{}({value})", if *orig { ".orig" } else { "" })
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.fmt_prec(f, 6)
            }
            Expr::Not(a) => {
                f.write_str("!")?;
                a.fmt_prec(f, 6)
            }
            Expr::Bin(op, a, b) => {
                let p = op.prec();
                if p < prec {
                    f.write_str("(")?;
                }
                let right_assoc = *op == BinOp::Implies;
                a.fmt_prec(f, if right_assoc { p + 1 } else { p })?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, if right_assoc { p } else { p + 1 })?;
                if p < prec {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Index domain of one array dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexDomain {
    /// `0 <= k < bound`.
    Range(Expr),
    /// All values of the sort.
    Total(Sort),
}

impl IndexDomain {
    pub fn sort(&self) -> Sort {
        match self {
            IndexDomain::Range(_) => Sort::Int,
            IndexDomain::Total(s) => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Scalar,
    Array { dims: Vec<IndexDomain>, init: Option<Value> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub sort: Sort,
    pub kind: DeclKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOpKind {
    Union,
    Intersection,
}

/// `forall binders: guard => conclusion`, used by quantified assumes and
/// by properties.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Quantified {
    pub binders: Vec<(String, Sort)>,
    pub guard: Expr,
    pub conclusion: Expr,
}

impl fmt::Display for Quantified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.binders.is_empty() {
            let b: Vec<&str> = self.binders.iter().map(|(n, _)| n.as_str()).collect();
            write!(f, "forall {}: ", b.join(", "))?;
        }
        if self.guard != Expr::Bool(true) {
            write!(f, "{} => ", self.guard)?;
        }
        write!(f, "{}", self.conclusion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Skip,
    Assign { target: String, value: Expr },
    Store { array: String, index: Vec<Expr>, value: Expr },
    SetOp { kind: SetOpKind, target: String, lhs: String, rhs: String },
    Assume(Expr),
    AssumeForall(Quantified),
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub label: Option<String>,
    pub kind: StmtKind,
    pub loc: Loc,
}

/// A universally quantified assertion attached to a control point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropertySpec {
    /// Label of the control point; `None` means the exit point.
    pub at: Option<String>,
    pub body: Quantified,
    pub loc: Loc,
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(at) = &self.at {
            write!(f, "at {at} ")?;
        }
        write!(f, "{}", self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
    pub props: Vec<PropertySpec>,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn arrays(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| matches!(d.kind, DeclKind::Array { .. }))
    }

    pub fn scalars(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| matches!(d.kind, DeclKind::Scalar))
    }
}
