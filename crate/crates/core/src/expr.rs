//! Scalar expressions in the single variable `sigma`.
//!
//! Expressions are parsed from plain text, evaluated in IEEE double
//! precision with explicit domain checks, and differentiated symbolically.
//! The only simplification ever applied is constant folding together with
//! elimination of additive zeros and multiplicative ones.

use std::fmt;

use crate::error::{Error, Result};

/// Name of the single free variable.
pub const VARIABLE: &str = "sigma";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sinh,
    Cosh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sinh" => Some(UnaryOp::Sinh),
            "cosh" => Some(UnaryOp::Cosh),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
        }
    }
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

// ---------------------------------------------------------------------------
// Smart constructors. These are the only place simplification happens.

fn fold(value: f64, fallback: Expr) -> Expr {
    if value.is_finite() {
        Expr::Const(value)
    } else {
        fallback
    }
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    fn raw_unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    fn raw_binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Unary(UnaryOp::Neg, inner) => *inner,
            other => Expr::raw_unary(UnaryOp::Neg, other),
        }
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(a);
        }
        if let Expr::Const(c) = a {
            let v = match op {
                UnaryOp::Exp => c.exp(),
                UnaryOp::Log if c > 0.0 => c.ln(),
                UnaryOp::Log => f64::NAN,
                UnaryOp::Sinh => c.sinh(),
                UnaryOp::Cosh => c.cosh(),
                UnaryOp::Neg => unreachable!(),
            };
            return fold(v, Expr::raw_unary(op, Expr::Const(c)));
        }
        Expr::raw_unary(op, a)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => fold(x + y, Expr::raw_binary(BinaryOp::Add, Expr::Const(x), Expr::Const(y))),
            (Expr::Const(x), b) if x == 0.0 => b,
            (a, Expr::Const(y)) if y == 0.0 => a,
            (a, b) => Expr::raw_binary(BinaryOp::Add, a, b),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => fold(x - y, Expr::raw_binary(BinaryOp::Sub, Expr::Const(x), Expr::Const(y))),
            (a, Expr::Const(y)) if y == 0.0 => a,
            (Expr::Const(x), b) if x == 0.0 => Expr::neg(b),
            (a, b) => Expr::raw_binary(BinaryOp::Sub, a, b),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => fold(x * y, Expr::raw_binary(BinaryOp::Mul, Expr::Const(x), Expr::Const(y))),
            (Expr::Const(x), _) | (_, Expr::Const(x)) if x == 0.0 => Expr::Const(0.0),
            (Expr::Const(x), b) if x == 1.0 => b,
            (a, Expr::Const(y)) if y == 1.0 => a,
            (a, b) => Expr::raw_binary(BinaryOp::Mul, a, b),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if y != 0.0 => fold(x / y, Expr::raw_binary(BinaryOp::Div, Expr::Const(x), Expr::Const(y))),
            (a, Expr::Const(y)) if y == 1.0 => a,
            (Expr::Const(x), b) if x == 0.0 && !matches!(b, Expr::Const(_)) => Expr::Const(0.0),
            (a, b) => Expr::raw_binary(BinaryOp::Div, a, b),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => fold(x.powf(y), Expr::raw_binary(BinaryOp::Pow, Expr::Const(x), Expr::Const(y))),
            (a, Expr::Const(y)) if y == 1.0 => a,
            (_, Expr::Const(y)) if y == 0.0 => Expr::Const(1.0),
            (a, b) => Expr::raw_binary(BinaryOp::Pow, a, b),
        }
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinaryOp::Add => Expr::add(a, b),
            BinaryOp::Sub => Expr::sub(a, b),
            BinaryOp::Mul => Expr::mul(a, b),
            BinaryOp::Div => Expr::div(a, b),
            BinaryOp::Pow => Expr::pow(a, b),
        }
    }

    /// `factor * self`, folded.
    pub fn scaled(&self, factor: f64) -> Expr {
        Expr::mul(Expr::Const(factor), self.clone())
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Unary(_, a) => a.contains_var(),
            Expr::Binary(_, a, b) => a.contains_var() || b.contains_var(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Unary(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Rebuild the tree through the smart constructors.
    pub fn simplified(&self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var => Expr::Var,
            Expr::Unary(op, a) => Expr::unary(*op, a.simplified()),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.simplified(), b.simplified()),
        }
    }

    // -----------------------------------------------------------------------

    pub fn eval(&self, sigma: f64) -> Result<f64> {
        if !sigma.is_finite() {
            return Err(Error::Domain(format!("non-finite argument {sigma}")));
        }
        self.eval_inner(sigma)
    }

    fn eval_inner(&self, s: f64) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => return Ok(*c),
            Expr::Var => return Ok(s),
            Expr::Unary(op, a) => {
                let x = a.eval_inner(s)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => {
                        if x <= 0.0 {
                            return Err(Error::Domain(format!("log of non-positive value {x}")));
                        }
                        x.ln()
                    }
                    UnaryOp::Sinh => x.sinh(),
                    UnaryOp::Cosh => x.cosh(),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval_inner(s)?;
                let y = b.eval_inner(s)?;
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(Error::Domain(format!("division by zero ({x} / 0)")));
                        }
                        x / y
                    }
                    BinaryOp::Pow => {
                        let p = x.powf(y);
                        if p.is_nan() {
                            return Err(Error::Domain(format!("{x} ^ {y} is undefined")));
                        }
                        p
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("overflow evaluating `{self}` at sigma = {s}")))
        }
    }

    /// Exact symbolic derivative with respect to `sigma`.
    pub fn diff(&self) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var => Expr::Const(1.0),
            Expr::Unary(op, a) => {
                let da = a.diff();
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => Expr::neg(da),
                    UnaryOp::Exp => Expr::mul(Expr::unary(UnaryOp::Exp, a), da),
                    UnaryOp::Log => Expr::div(da, a),
                    UnaryOp::Sinh => Expr::mul(Expr::unary(UnaryOp::Cosh, a), da),
                    UnaryOp::Cosh => Expr::mul(Expr::unary(UnaryOp::Sinh, a), da),
                }
            }
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.diff(), b.diff());
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                    BinaryOp::Div => Expr::div(
                        Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)),
                        Expr::pow(b, Expr::Const(2.0)),
                    ),
                    BinaryOp::Pow => {
                        if !b.contains_var() {
                            // b * a^(b-1) * a'
                            let exponent = Expr::sub(b.clone(), Expr::Const(1.0));
                            Expr::mul(Expr::mul(b, Expr::pow(a, exponent)), da)
                        } else if !a.contains_var() {
                            let p = Expr::pow(a.clone(), b);
                            Expr::mul(Expr::mul(p, Expr::unary(UnaryOp::Log, a)), db)
                        } else {
                            // a^b * (b' log a + b a'/a)
                            let p = Expr::pow(a.clone(), b.clone());
                            let inner = Expr::add(
                                Expr::mul(db, Expr::unary(UnaryOp::Log, a.clone())),
                                Expr::div(Expr::mul(b, da), a),
                            );
                            Expr::mul(p, inner)
                        }
                    }
                }
            }
        }
    }
}

/// Derivative of `ast` with respect to sigma.
pub fn diff_expr(ast: &Expr) -> Expr {
    ast.diff()
}

pub fn eval_expr(ast: &Expr, sigma: f64) -> Result<f64> {
    ast.eval(sigma)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var => f.write_str(VARIABLE),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer and recursive-descent parser.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (t, at) = lx.next()?;
            let end = t == Tok::End;
            out.push((t, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek_byte(&self, i: usize) -> Option<u8> {
        self.src.as_bytes().get(i).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while let Some(b) = self.peek_byte(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(b) = self.peek_byte(start) else {
            return Ok((Tok::End, start));
        };
        let tok = match b {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(b as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut end = start;
                while let Some(c) = self.peek_byte(end) {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        end += 1;
                    } else {
                        break;
                    }
                }
                self.pos = end;
                Tok::Ident(self.src[start..end].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        let mut end = start;
        let digits = |lx: &Self, mut i: usize| {
            while matches!(lx.peek_byte(i), Some(b'0'..=b'9')) {
                i += 1;
            }
            i
        };
        end = digits(self, end);
        if self.peek_byte(end) == Some(b'.') {
            end = digits(self, end + 1);
        }
        if matches!(self.peek_byte(end), Some(b'e' | b'E')) {
            let mut j = end + 1;
            if matches!(self.peek_byte(j), Some(b'+' | b'-')) {
                j += 1;
            }
            let k = digits(self, j);
            if k > j {
                end = k;
            } else {
                return Err(Error::Syntax {
                    offset: end,
                    message: "malformed exponent in numeric literal".into(),
                });
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed numeric literal `{text}`"),
        })?;
        self.pos = end;
        Ok(Tok::Num(value))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::raw_binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                let operand = self.unary()?;
                // Negative literals are stored as constants.
                Ok(match operand {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::raw_unary(UnaryOp::Neg, other),
                })
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::raw_binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == VARIABLE => {
                if *self.peek() == Tok::LParen {
                    return Err(Error::Syntax {
                        offset: self.offset(),
                        message: format!("`{VARIABLE}` is a variable, not a function"),
                    });
                }
                Ok(Expr::Var)
            }
            Tok::Ident(name) => {
                let Some(op) = UnaryOp::from_name(&name) else {
                    return Err(Error::UnknownIdentifier { offset: at, name });
                };
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    args.push(self.expr()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                }
                self.expect(Tok::RParen, "`)` closing the argument list")?;
                if args.len() != 1 {
                    return Err(Error::Arity {
                        offset: at,
                        name,
                        got: args.len(),
                    });
                }
                Ok(Expr::raw_unary(op, args.pop().unwrap()))
            }
            Tok::End => Err(Error::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            t => Err(Error::Syntax {
                offset: at,
                message: format!("unexpected token {t:?}"),
            }),
        }
    }
}

/// Parse an arithmetic expression in `sigma`.
///
/// Precedence, loosest first: `+ -`, `* /`, unary minus, `^`
/// (right-associative). Function calls take exactly one argument.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = Lexer::tokenize(src)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            offset: p.offset(),
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}
