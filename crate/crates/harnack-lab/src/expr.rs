//! Closed-form coefficient expressions for experiment configs.
//!
//! Grammar: numbers, variables `x1`, `x2`, `r` (= |x|), operators
//! `+ - * / ^`, unary minus, parentheses, and the functions `abs`,
//! `ln`, `exp`, `min`, `max`. `^` is right-associative.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Point;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::config(format!("bad number literal '{text}'")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::config(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

/// Parsed expression tree over (x1, x2, r).
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    R,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X1 => write!(f, "x1"),
            Var::X2 => write!(f, "x2"),
            Var::R => write!(f, "r"),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Token) -> Result<()> {
        match self.next() {
            Some(ref got) if got == t => Ok(()),
            other => Err(Error::config(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.product()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.product()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.power()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    acc = Expr::Div(Box::new(acc), Box::new(self.power()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    // right-associative
    fn power(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            let exp = self.power()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if matches!(self.peek(), Some(Token::Plus)) {
            self.pos += 1;
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let e = self.sum()?;
                self.expect(&Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x1" => Ok(Expr::Var(Var::X1)),
                "x2" => Ok(Expr::Var(Var::X2)),
                "r" => Ok(Expr::Var(Var::R)),
                "abs" | "ln" | "exp" => {
                    self.expect(&Token::LParen)?;
                    let arg = self.sum()?;
                    self.expect(&Token::RParen)?;
                    Ok(match name.as_str() {
                        "abs" => Expr::Abs(Box::new(arg)),
                        "ln" => Expr::Ln(Box::new(arg)),
                        _ => Expr::Exp(Box::new(arg)),
                    })
                }
                "min" | "max" => {
                    self.expect(&Token::LParen)?;
                    let a = self.sum()?;
                    self.expect(&Token::Comma)?;
                    let b = self.sum()?;
                    self.expect(&Token::RParen)?;
                    Ok(if name == "min" {
                        Expr::Min(Box::new(a), Box::new(b))
                    } else {
                        Expr::Max(Box::new(a), Box::new(b))
                    })
                }
                other => Err(Error::config(format!(
                    "unknown identifier '{other}' (variables: x1, x2, r; functions: abs, ln, exp, min, max)"
                ))),
            },
            other => Err(Error::config(format!("unexpected token {other:?}"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::config("empty expression"));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.sum()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::config(format!(
                "trailing tokens after expression: {:?}",
                &parser.tokens[parser.pos..]
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, p: Point) -> f64 {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        self.eval_inner(p[0], p[1], r)
    }

    fn eval_inner(&self, x1: f64, x2: f64, r: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => x1,
            Expr::Var(Var::X2) => x2,
            Expr::Var(Var::R) => r,
            Expr::Neg(e) => -e.eval_inner(x1, x2, r),
            Expr::Add(a, b) => a.eval_inner(x1, x2, r) + b.eval_inner(x1, x2, r),
            Expr::Sub(a, b) => a.eval_inner(x1, x2, r) - b.eval_inner(x1, x2, r),
            Expr::Mul(a, b) => a.eval_inner(x1, x2, r) * b.eval_inner(x1, x2, r),
            Expr::Div(a, b) => a.eval_inner(x1, x2, r) / b.eval_inner(x1, x2, r),
            Expr::Pow(a, b) => a.eval_inner(x1, x2, r).powf(b.eval_inner(x1, x2, r)),
            Expr::Abs(e) => e.eval_inner(x1, x2, r).abs(),
            Expr::Ln(e) => e.eval_inner(x1, x2, r).ln(),
            Expr::Exp(e) => e.eval_inner(x1, x2, r).exp(),
            Expr::Min(a, b) => a.eval_inner(x1, x2, r).min(b.eval_inner(x1, x2, r)),
            Expr::Max(a, b) => a.eval_inner(x1, x2, r).max(b.eval_inner(x1, x2, r)),
        }
    }

    /// Wrap into a shared scalar-field callable.
    pub fn into_field(self) -> Arc<dyn Fn(Point) -> f64 + Send + Sync> {
        Arc::new(move |p: Point| self.eval(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2 * 3 ^ 2 - 4 / 2").unwrap();
        assert_abs_diff_eq!(e.eval([0.0, 0.0]), 17.0);
    }

    #[test]
    fn right_associative_power() {
        let e = Expr::parse("2 ^ 3 ^ 2").unwrap();
        assert_abs_diff_eq!(e.eval([0.0, 0.0]), 512.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("abs(x1) ^ (-0.5)").unwrap();
        assert_abs_diff_eq!(e.eval([4.0, 0.0]), 0.5);
        let e = Expr::parse("min(x1, x2) + max(ln(exp(1)), r)").unwrap();
        assert_abs_diff_eq!(e.eval([3.0, 4.0]), 3.0 + 5.0);
    }

    #[test]
    fn scientific_notation() {
        let e = Expr::parse("1.5e-3 * x1").unwrap();
        assert_abs_diff_eq!(e.eval([2.0, 0.0]), 3e-3);
    }

    #[test]
    fn radial_variable() {
        let e = Expr::parse("-1 / r").unwrap();
        assert_abs_diff_eq!(e.eval([3.0, 4.0]), -0.2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("x3 + 1").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("sin(x1)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
    }
}
