//! SMT-LIB 2 output in the HORN logic.

use std::fmt::Write;

use super::{fmt_real, is_negative, ClauseKind, Head, HornClause, HornSystem, Term};

/// Renders a term as an SMT-LIB expression.
pub fn smt_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t);
    s
}

/// Quotes a symbol when it is not a simple SMT-LIB symbol.
pub fn smt_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn write_term(out: &mut String, t: &Term) {
    match t {
        Term::Var(v) => out.push_str(&smt_symbol(v)),
        Term::Int(i) if *i < 0 => {
            let _ = write!(out, "(- {})", i.unsigned_abs());
        }
        Term::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Term::Real(r) => {
            let neg = is_negative(*r);
            let a = if neg { -*r } else { *r };
            let body = if a.is_integer() {
                fmt_real(a)
            } else {
                format!("(/ {}.0 {}.0)", a.numer(), a.denom())
            };
            if neg {
                let _ = write!(out, "(- {body})");
            } else {
                out.push_str(&body);
            }
        }
        Term::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Term::Add(parts) => nary(out, "+", parts),
        Term::And(parts) => nary(out, "and", parts),
        Term::Or(parts) => nary(out, "or", parts),
        Term::Sub(a, b) => nary(out, "-", &[(**a).clone(), (**b).clone()]),
        Term::Mul(a, b) => nary(out, "*", &[(**a).clone(), (**b).clone()]),
        Term::Implies(a, b) => nary(out, "=>", &[(**a).clone(), (**b).clone()]),
        Term::Neg(a) => nary(out, "-", std::slice::from_ref(a)),
        Term::Not(a) => nary(out, "not", std::slice::from_ref(a)),
        Term::Mod(a, m) => {
            out.push_str("(mod ");
            write_term(out, a);
            let _ = write!(out, " {m})");
        }
        Term::Cmp(op, a, b) => {
            use super::CmpOp::*;
            let sym = match op {
                Eq | Ne => "=",
                Lt => "<",
                Le => "<=",
                Gt => ">",
                Ge => ">=",
            };
            if *op == Ne {
                out.push_str("(not ");
            }
            let _ = write!(out, "({sym} ");
            write_term(out, a);
            out.push(' ');
            write_term(out, b);
            out.push(')');
            if *op == Ne {
                out.push(')');
            }
        }
    }
}

fn nary(out: &mut String, op: &str, parts: &[Term]) {
    let _ = write!(out, "({op}");
    for p in parts {
        out.push(' ');
        write_term(out, p);
    }
    out.push(')');
}

/// The implication `body => head` of one clause, with queries in goal form.
pub fn clause_body_and_head(c: &HornClause) -> (Vec<String>, String) {
    let mut conj: Vec<String> = c
        .body
        .iter()
        .map(|a| {
            if a.args.is_empty() {
                smt_symbol(&a.pred)
            } else {
                let args: Vec<String> = a.args.iter().map(smt_term).collect();
                format!("({} {})", smt_symbol(&a.pred), args.join(" "))
            }
        })
        .collect();
    for part in c.constraint.conjuncts() {
        conj.push(smt_term(&part));
    }
    let head = match &c.head {
        Head::Atom(a) if a.args.is_empty() => smt_symbol(&a.pred),
        Head::Atom(a) => {
            let args: Vec<String> = a.args.iter().map(smt_term).collect();
            format!("({} {})", smt_symbol(&a.pred), args.join(" "))
        }
        Head::Goal(g) => {
            let neg = Term::not(g.clone());
            if !matches!(neg, Term::Bool(true)) {
                conj.extend(neg.conjuncts().iter().map(smt_term));
            }
            "false".to_string()
        }
    };
    (conj, head)
}

fn write_clause(out: &mut String, c: &HornClause) {
    let (conj, head) = clause_body_and_head(c);
    let body = match conj.len() {
        0 => "true".to_string(),
        1 => conj[0].clone(),
        _ => format!("(and {})", conj.join(" ")),
    };
    let imp = format!("(=> {body} {head})");
    if c.vars.is_empty() {
        let _ = writeln!(out, "(assert {imp})");
    } else {
        let vars: Vec<String> =
            c.vars.iter().map(|(v, s)| format!("({} {})", smt_symbol(v), s)).collect();
        let _ = writeln!(out, "(assert (forall ({}) {imp}))", vars.join(" "));
    }
}

/// Emits a complete SMT-LIB script. Output depends only on the system.
pub fn emit_smtlib(s: &HornSystem) -> String {
    let mut out = String::new();
    out.push_str("(set-logic HORN)\n");
    for p in &s.preds {
        let sorts: Vec<&str> = p.slots.iter().map(|sl| sl.sort.smt_name()).collect();
        let names: Vec<&str> = p.slots.iter().map(|sl| sl.name.as_str()).collect();
        let _ = writeln!(out, "; {}({})", p.name, names.join(", "));
        let _ = writeln!(out, "(declare-fun {} ({}) Bool)", smt_symbol(&p.name), sorts.join(" "));
    }
    for (i, c) in s.clauses.iter().enumerate() {
        let tag = match c.kind {
            ClauseKind::Rule => "clause",
            ClauseKind::Query => "query",
            ClauseKind::Hint => "hint",
        };
        let _ = writeln!(out, "; {tag} {i}: {}", c.origin);
        write_clause(&mut out, c);
    }
    out.push_str("(check-sat)\n");
    out
}
