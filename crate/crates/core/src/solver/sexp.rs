//! Minimal s-expression reader for solver output.

use std::fmt;

use num_rational::Rational64;

use crate::horn::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed s-expression: {0}")]
pub struct SexpError(pub String);

/// Parses every top-level expression of `src`.
pub fn parse_all(src: &str) -> Result<Vec<Sexp>, SexpError> {
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

/// Parses exactly one expression.
pub fn parse(src: &str) -> Result<Sexp, SexpError> {
    let mut all = parse_all(src)?;
    match all.len() {
        1 => Ok(all.remove(0)),
        n => Err(SexpError(format!("expected one expression, found {n}"))),
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() {
        if c[*pos].is_whitespace() {
            *pos += 1;
        } else if c[*pos] == ';' {
            while *pos < c.len() && c[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], pos: &mut usize) -> Result<Sexp, SexpError> {
    skip_ws(c, pos);
    match c.get(*pos) {
        None => Err(SexpError("unexpected end of input".into())),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    None => return Err(SexpError("unclosed parenthesis".into())),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_one(c, pos)?),
                }
            }
        }
        Some(')') => Err(SexpError("unexpected `)`".into())),
        Some('|') => {
            let start = *pos;
            *pos += 1;
            while *pos < c.len() && c[*pos] != '|' {
                *pos += 1;
            }
            if *pos >= c.len() {
                return Err(SexpError("unclosed `|`".into()));
            }
            *pos += 1;
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
        Some('"') => {
            let start = *pos;
            *pos += 1;
            while *pos < c.len() {
                if c[*pos] == '"' {
                    if c.get(*pos + 1) == Some(&'"') {
                        *pos += 2;
                        continue;
                    }
                    break;
                }
                *pos += 1;
            }
            if *pos >= c.len() {
                return Err(SexpError("unclosed string".into()));
            }
            *pos += 1;
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
        Some(_) => {
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && !matches!(c[*pos], '(' | ')' | ';') {
                *pos += 1;
            }
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
    }
}

/// Length of the first complete expression in `src`, if there is one.
pub fn complete_prefix(src: &str) -> Option<usize> {
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0;
    skip_ws(&chars, &mut pos);
    if pos >= chars.len() {
        return None;
    }
    parse_one(&chars, &mut pos).ok().map(|_| chars[..pos].iter().map(|c| c.len_utf8()).sum())
}

fn rational(s: &Sexp) -> Option<Rational64> {
    match s {
        Sexp::Atom(a) => {
            if let Some((i, f)) = a.split_once('.') {
                let den = 10i64.checked_pow(f.len() as u32)?;
                let num: i64 = format!("{i}{f}").parse().ok()?;
                Some(Rational64::new(num, den))
            } else {
                a.parse::<i64>().ok().map(Rational64::from_integer)
            }
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => rational(x).map(|r| -r),
            [Sexp::Atom(op), x, y] if op == "/" => {
                let (x, y) = (rational(x)?, rational(y)?);
                if *y.numer() == 0 {
                    None
                } else {
                    Some(x / y)
                }
            }
            [Sexp::Atom(op), x] if op == "to_real" => rational(x),
            _ => None,
        },
    }
}

/// Reads a literal value; `real` selects the sort for numerals.
pub fn to_value(s: &Sexp, real: bool) -> Option<Value> {
    match s {
        Sexp::Atom(a) if a == "true" => Some(Value::Bool(true)),
        Sexp::Atom(a) if a == "false" => Some(Value::Bool(false)),
        _ => {
            let r = rational(s)?;
            if real {
                Some(Value::Real(r))
            } else if r.is_integer() {
                Some(Value::Int(r.to_integer()))
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_lists_and_symbols() {
        let s = parse("((x 1) (|a b| (- 3)))").unwrap();
        assert_eq!(s.to_string(), "((x 1) (|a b| (- 3)))");
    }

    #[test]
    fn reads_numerals() {
        assert_eq!(to_value(&parse("(- 3)").unwrap(), false), Some(Value::Int(-3)));
        assert_eq!(to_value(&parse("(/ 1.0 2.0)").unwrap(), true), Some(Value::Real(Rational64::new(1, 2))));
        assert_eq!(to_value(&parse("2.5").unwrap(), true), Some(Value::Real(Rational64::new(5, 2))));
        assert_eq!(to_value(&parse("true").unwrap(), false), Some(Value::Bool(true)));
    }

    #[test]
    fn detects_complete_prefix() {
        assert_eq!(complete_prefix("  (a (b)"), None);
        assert_eq!(complete_prefix("(a (b)) rest"), Some(7));
        assert_eq!(complete_prefix("sat\n"), Some(3));
    }
}
