//! Runtime values, well-formedness, and size equivalence.

use num_bigint::BigInt;
use std::fmt;

use crate::syntax::BaseType;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(BigInt),
    List(Vec<Value>),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn list(vs: Vec<Value>) -> Value {
        Value::List(vs)
    }

    /// Structural size signature: list lengths, recursively. Two values are
    /// size-equivalent exactly when their signatures agree.
    pub fn size_sig(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.push_sig(&mut out);
        out
    }

    fn push_sig(&self, out: &mut Vec<usize>) {
        match self {
            Value::Unit | Value::Bool(_) | Value::Int(_) => {}
            Value::List(vs) => {
                out.push(vs.len());
                for v in vs {
                    v.push_sig(out);
                }
            }
            Value::Pair(a, b) => {
                a.push_sig(out);
                b.push_sig(out);
            }
        }
    }
}

/// `|= v : T` — value well-formedness (lists homogeneous at the element type).
pub fn value_wellformed(v: &Value, t: &BaseType) -> bool {
    match (v, t) {
        (Value::Unit, BaseType::Unit) => true,
        (Value::Bool(_), BaseType::Bool) => true,
        (Value::Int(_), BaseType::Int) => true,
        (Value::List(vs), BaseType::List(elem)) => vs.iter().all(|v| value_wellformed(v, elem)),
        (Value::Pair(a, b), BaseType::Pair(ta, tb)) => {
            value_wellformed(a, ta) && value_wellformed(b, tb)
        }
        _ => false,
    }
}

/// The size-equivalence relation: atoms always related, pairs componentwise,
/// lists require equal length and pointwise relation. Values of mismatched
/// shape are not related.
pub fn size_equivalent(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Unit, Value::Unit) | (Value::Bool(_), Value::Bool(_)) | (Value::Int(_), Value::Int(_)) => true,
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => size_equivalent(a1, b1) && size_equivalent(a2, b2),
        (Value::List(xs), Value::List(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| size_equivalent(x, y))
        }
        _ => false,
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::List(vs) => {
                write!(f, "[")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

/// Parse a value literal: `()`, `true`, `-3`, `[1; 2; 3]`, `(1, [true])`.
pub fn parse_value(s: &str) -> Result<Value, String> {
    let mut p = VParser { s: s.as_bytes(), i: 0 };
    let v = p.value()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(format!("trailing input at byte {}", p.i));
    }
    Ok(v)
}

struct VParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> VParser<'a> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] as char).is_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<(), String> {
        self.skip_ws();
        if self.i < self.s.len() && self.s[self.i] == c {
            self.i += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at byte {}", c as char, self.i))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn value(&mut self) -> Result<Value, String> {
        match self.peek() {
            Some(b'(') => {
                self.eat(b'(')?;
                if self.peek() == Some(b')') {
                    self.eat(b')')?;
                    return Ok(Value::Unit);
                }
                let a = self.value()?;
                match self.peek() {
                    Some(b',') => {
                        self.eat(b',')?;
                        let b = self.value()?;
                        self.eat(b')')?;
                        Ok(Value::Pair(Box::new(a), Box::new(b)))
                    }
                    Some(b')') => {
                        self.eat(b')')?;
                        Ok(a)
                    }
                    _ => Err("expected ',' or ')'".to_string()),
                }
            }
            Some(b'[') => {
                self.eat(b'[')?;
                let mut vs = Vec::new();
                if self.peek() != Some(b']') {
                    loop {
                        vs.push(self.value()?);
                        match self.peek() {
                            Some(b';') | Some(b',') => {
                                self.i += 1;
                            }
                            _ => break,
                        }
                    }
                }
                self.eat(b']')?;
                Ok(Value::List(vs))
            }
            Some(b't') | Some(b'f') => {
                let rest = &self.s[self.i..];
                if rest.starts_with(b"true") {
                    self.i += 4;
                    Ok(Value::Bool(true))
                } else if rest.starts_with(b"false") {
                    self.i += 5;
                    Ok(Value::Bool(false))
                } else {
                    Err(format!("bad literal at byte {}", self.i))
                }
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let start = self.i;
                self.i += 1;
                while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                    self.i += 1;
                }
                let txt = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                txt.parse::<BigInt>().map(Value::Int).map_err(|e| e.to_string())
            }
            _ => Err(format!("unexpected input at byte {}", self.i)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(ns: &[i64]) -> Value {
        Value::List(ns.iter().map(|n| Value::int(*n)).collect())
    }

    #[test]
    fn wellformedness() {
        let t = BaseType::List(Box::new(BaseType::Int));
        assert!(value_wellformed(&ints(&[1, 2, 3]), &t));
        let hetero = Value::List(vec![Value::int(1), Value::Bool(true)]);
        assert!(!value_wellformed(&hetero, &t));
        let p = Value::Pair(Box::new(Value::int(1)), Box::new(Value::List(vec![])));
        let pt = BaseType::Pair(Box::new(BaseType::Int), Box::new(BaseType::List(Box::new(BaseType::Bool))));
        assert!(value_wellformed(&p, &pt));
    }

    #[test]
    fn size_equivalence_cases() {
        assert!(size_equivalent(&Value::int(5), &Value::int(9)));
        assert!(size_equivalent(&ints(&[1, 2]), &ints(&[7, 7])));
        assert!(!size_equivalent(&ints(&[1, 2]), &ints(&[7])));
        // Nested lists: same outer length and pointwise inner lengths.
        let a = Value::List(vec![ints(&[1]), ints(&[2, 3])]);
        let b = Value::List(vec![ints(&[9]), ints(&[0, 0])]);
        assert!(size_equivalent(&a, &b));
        let c = Value::List(vec![ints(&[1, 2]), ints(&[3])]);
        assert!(!size_equivalent(&a, &c));
    }

    #[test]
    fn value_parsing_roundtrip() {
        for s in ["()", "true", "-3", "[1; 2; 3]", "(1, [true; false])", "[]"] {
            let v = parse_value(s).unwrap();
            assert_eq!(parse_value(&v.to_string()).unwrap(), v);
        }
    }
}
