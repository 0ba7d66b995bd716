//! Tokenizer for `.rml` sources. Tracks line/column for diagnostics and
//! supports nested `(* ... *)` comments.

use num_bigint::BigInt;
use thiserror::Error;

use crate::syntax::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    // keywords
    Let,
    Rec,
    In,
    If,
    Then,
    Else,
    Match,
    With,
    True,
    False,
    And,
    Or,
    Div,
    Mod,
    Share,
    Tick,
    Consume,
    // punctuation / operators
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Bar,
    Arrow,     // ->
    ColonCons, // ::
    Underscore,
    Caret, // ^ (annotated consume types)
    Slash, // / (fraction literals in annotations)
    Plus,
    Minus,
    Star,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    // literals / identifiers
    Int(BigInt),
    Decimal(String),
    Ident(String),
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("{span}: unexpected character '{ch}'")]
    Unexpected { ch: char, span: Span },
    #[error("{span}: unterminated comment")]
    UnterminatedComment { span: Span },
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! span {
        () => {
            Span { line, col }
        };
    }

    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };

    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        // comments (* ... *), nested
        if c == '(' && i + 1 < bytes.len() && bytes[i + 1] == '*' {
            let start = span!();
            let mut depth = 1;
            advance(&mut i, &mut line, &mut col, '(');
            advance(&mut i, &mut line, &mut col, '*');
            while i < bytes.len() && depth > 0 {
                if bytes[i] == '(' && i + 1 < bytes.len() && bytes[i + 1] == '*' {
                    depth += 1;
                    advance(&mut i, &mut line, &mut col, '(');
                    advance(&mut i, &mut line, &mut col, '*');
                } else if bytes[i] == '*' && i + 1 < bytes.len() && bytes[i + 1] == ')' {
                    depth -= 1;
                    advance(&mut i, &mut line, &mut col, '*');
                    advance(&mut i, &mut line, &mut col, ')');
                } else {
                    let ch = bytes[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            if depth > 0 {
                return Err(LexError::UnterminatedComment { span: start });
            }
            continue;
        }
        let sp = span!();
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let mut is_decimal = false;
            let mut k = j;
            if j < bytes.len() && bytes[j] == '.' && j + 1 < bytes.len() && bytes[j + 1].is_ascii_digit() {
                is_decimal = true;
                k = j + 1;
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
            }
            let text: String = bytes[i..k].iter().collect();
            while i < k {
                let ch = bytes[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            if is_decimal {
                toks.push(Token { tok: Tok::Decimal(text), span: sp });
            } else {
                toks.push(Token { tok: Tok::Int(text.parse().expect("digits")), span: sp });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_' || bytes[j] == '\'' || bytes[j] == '#') {
                j += 1;
            }
            let word: String = bytes[i..j].iter().collect();
            while i < j {
                let ch = bytes[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            let tok = match word.as_str() {
                "let" => Tok::Let,
                "rec" => Tok::Rec,
                "in" => Tok::In,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "match" => Tok::Match,
                "with" => Tok::With,
                "true" => Tok::True,
                "false" => Tok::False,
                "and" => Tok::And,
                "or" => Tok::Or,
                "div" => Tok::Div,
                "mod" => Tok::Mod,
                "share" => Tok::Share,
                "tick" => Tok::Tick,
                "consume" => Tok::Consume,
                "_" => Tok::Underscore,
                _ => Tok::Ident(word),
            };
            toks.push(Token { tok, span: sp });
            continue;
        }
        let two: Option<Tok> = if i + 1 < bytes.len() {
            match (c, bytes[i + 1]) {
                ('-', '>') => Some(Tok::Arrow),
                (':', ':') => Some(Tok::ColonCons),
                ('<', '>') => Some(Tok::Ne),
                ('<', '=') => Some(Tok::Le),
                ('>', '=') => Some(Tok::Ge),
                _ => None,
            }
        } else {
            None
        };
        if let Some(t) = two {
            advance(&mut i, &mut line, &mut col, c);
            let ch = bytes[i];
            advance(&mut i, &mut line, &mut col, ch);
            toks.push(Token { tok: t, span: sp });
            continue;
        }
        let one = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '|' => Tok::Bar,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '^' => Tok::Caret,
            '/' => Tok::Slash,
            other => return Err(LexError::Unexpected { ch: other, span: sp }),
        };
        advance(&mut i, &mut line, &mut col, c);
        toks.push(Token { tok: one, span: sp });
    }
    toks.push(Token { tok: Tok::Eof, span: span!() });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_basic_program() {
        let toks = lex("let rec f(x) = x + 1 (* id-ish *)").unwrap();
        let kinds: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        assert!(matches!(kinds[0], Tok::Let));
        assert!(matches!(kinds[1], Tok::Rec));
        assert!(matches!(kinds[2], Tok::Ident(s) if s == "f"));
        assert!(matches!(kinds.last().unwrap(), Tok::Eof));
    }

    #[test]
    fn tracks_positions() {
        let toks = lex("let\n  x").unwrap();
        assert_eq!(toks[1].span, Span { line: 2, col: 3 });
    }

    #[test]
    fn decimal_vs_int() {
        let toks = lex("tick(5.0) 7").unwrap();
        assert!(toks.iter().any(|t| matches!(&t.tok, Tok::Decimal(d) if d == "5.0")));
        assert!(toks.iter().any(|t| matches!(&t.tok, Tok::Int(n) if *n == 7.into())));
    }
}
