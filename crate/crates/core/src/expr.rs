//! Arithmetic expressions over named variables.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom ('^' unary)?          right associative, binds tighter than unary minus
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp`, `log` (natural), `sqrt`, `abs`. Constants: `pi`, `e`.
//! So `-x1^2` is `-(x1^2)` and `2^-1` is `0.5`.

use std::fmt;

use thiserror::Error;

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {position}: unexpected {found}, expected {expected}")]
    Syntax {
        position: usize,
        found: String,
        expected: &'static str,
    },
    #[error("unknown identifier '{name}' at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("variable '{name}' at byte {position} exceeds dimension {dim}")]
    DimensionMismatch {
        name: String,
        position: usize,
        dim: usize,
    },
}

/// How identifiers map to variable slots.
#[derive(Debug, Clone)]
pub enum Vars<'a> {
    /// `x1 .. xd`
    Indexed(usize),
    Named(&'a [&'a str]),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                position: start,
                found: format!("'{text}'"),
                expected: "a number",
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or(c);
                    return Err(ExprError::Syntax {
                        position: start,
                        found: format!("'{ch}'"),
                        expected: "an operator, number or identifier",
                    });
                }
            };
            i += 1;
            out.push((tok, start));
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: Vars<'a>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &'static str) -> ExprError {
        ExprError::Syntax {
            position: self.at(),
            found: self.peek().to_string(),
            expected,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let position = self.at();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.err("')'"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.err("'(' after function name"));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.err("')'"));
                    }
                    self.bump();
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Num(std::f64::consts::E)),
                    _ => {}
                }
                self.variable(name, position)
            }
            _ => Err(self.err("a number, identifier or '('")),
        }
    }

    fn variable(&self, name: String, position: usize) -> Result<Expr, ExprError> {
        match &self.vars {
            Vars::Indexed(dim) => {
                let idx = name
                    .strip_prefix('x')
                    .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&k| k >= 1);
                match idx {
                    Some(k) if k <= *dim => Ok(Expr::Var(k - 1)),
                    Some(_) => Err(ExprError::DimensionMismatch {
                        name,
                        position,
                        dim: *dim,
                    }),
                    None => Err(ExprError::UnknownIdentifier { name, position }),
                }
            }
            Vars::Named(names) => names
                .iter()
                .position(|n| *n == name)
                .map(Expr::Var)
                .ok_or(ExprError::UnknownIdentifier { name, position }),
        }
    }
}

impl Expr {
    pub fn parse(src: &str, vars: Vars<'_>) -> Result<Expr, ExprError> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, vars };
        let e = p.expr()?;
        if *p.peek() != Tok::End {
            return Err(p.err("an operator or end of input"));
        }
        Ok(e)
    }

    /// Parses over `x1..x{dim}`.
    pub fn parse_indexed(src: &str, dim: usize) -> Result<Expr, ExprError> {
        Self::parse(src, Vars::Indexed(dim))
    }

    pub fn eval<T: Real>(&self, vars: &[T]) -> T {
        match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => pow(x, y),
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(vars);
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Abs => x.abs(),
                }
            }
        }
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }

    /// Fully parenthesised text that parses back to the same tree.
    pub fn display<'a>(&'a self, names: &'a dyn Fn(usize) -> String) -> impl fmt::Display + 'a {
        Printer { e: self, names }
    }

    pub fn to_text_indexed(&self) -> String {
        let names = |i: usize| format!("x{}", i + 1);
        let text = self.display(&names).to_string();
        text
    }
}

fn pow<T: Real>(x: T, y: T) -> T {
    if y == T::lit(2.0) {
        x * x
    } else if y.fract() == T::zero() && y.abs() <= T::lit(64.0) {
        x.powi(y.to_i32().unwrap_or(0))
    } else {
        x.powf(y)
    }
}

struct Printer<'a> {
    e: &'a Expr,
    names: &'a dyn Fn(usize) -> String,
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'_ Expr| Printer { e, names: self.names }.to_string();
        match self.e {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "{}", (self.names)(*i)),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Bin(op, a, b) => {
                let c = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({}{}{})", sub(a), c, sub(b))
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}
