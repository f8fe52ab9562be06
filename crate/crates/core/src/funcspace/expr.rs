//! Closed-form functions of one real variable.
//!
//! A small expression language doubles as the registry of named functions:
//! `hat(c,w,h)`, `gauss(sigma)`, `lp_singular(p)`, `plateau(n)`, `abs`,
//! `clip(e, r)` and ordinary arithmetic in `x`. Every registry function takes
//! an optional trailing argument expression, so `hat(0,1,1,x+0.5)` is the hat
//! composed with a shift. Expressions print back to the same syntax, which is
//! what keeps translated and Koopman-composed closed forms serializable.

use std::fmt;

use crate::error::{Error, Result};

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
    Abs,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Atan,
    Min,
    Max,
    /// `clamp(v, lo, hi)`
    Clamp,
    /// `hat(center, halfwidth, height, arg)`
    Hat,
    /// `gauss(sigma, arg)`, peak value 1
    Gauss,
    /// `lp_singular(p, arg)` = |arg - 1/2|^(-1/(2p))
    LpSingular,
    /// `plateau(n, arg)`: 1 on [-n, n], unit-width linear ramps to 0
    Plateau,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Min => "min",
            Func::Max => "max",
            Func::Clamp => "clamp",
            Func::Hat => "hat",
            Func::Gauss => "gauss",
            Func::LpSingular => "lp_singular",
            Func::Plateau => "plateau",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "min" => Func::Min,
            "max" => Func::Max,
            "clamp" => Func::Clamp,
            "hat" => Func::Hat,
            "gauss" => Func::Gauss,
            "lp_singular" => Func::LpSingular,
            "plateau" => Func::Plateau,
            _ => return None,
        })
    }

    /// Number of parameters before the argument expression for registry
    /// kernels; `None` for plain functions with a fixed arity.
    fn kernel_params(self) -> Option<usize> {
        match self {
            Func::Hat => Some(3),
            Func::Gauss | Func::LpSingular | Func::Plateau => Some(1),
            _ => None,
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Clamp => 3,
            f => f.kernel_params().map_or(1, |p| p + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn hat(center: f64, halfwidth: f64, height: f64) -> Expr {
        Expr::Call(Func::Hat, vec![Expr::Num(center), Expr::Num(halfwidth), Expr::Num(height), Expr::X])
    }

    pub fn gauss(sigma: f64) -> Expr {
        Expr::Call(Func::Gauss, vec![Expr::Num(sigma), Expr::X])
    }

    pub fn lp_singular(p: f64) -> Expr {
        Expr::Call(Func::LpSingular, vec![Expr::Num(p), Expr::X])
    }

    pub fn plateau(n: f64) -> Expr {
        Expr::Call(Func::Plateau, vec![Expr::Num(n), Expr::X])
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, args) => {
                let v = |i: usize| args[i].eval(x);
                match f {
                    Func::Abs => v(0).abs(),
                    Func::Sin => v(0).sin(),
                    Func::Cos => v(0).cos(),
                    Func::Exp => v(0).exp(),
                    Func::Ln => v(0).ln(),
                    Func::Sqrt => v(0).sqrt(),
                    Func::Atan => v(0).atan(),
                    Func::Min => v(0).min(v(1)),
                    Func::Max => v(0).max(v(1)),
                    Func::Clamp => v(0).max(v(1)).min(v(2)),
                    Func::Hat => {
                        let (c, w, h, a) = (v(0), v(1), v(2), v(3));
                        h * (1.0 - (a - c).abs() / w).max(0.0)
                    }
                    Func::Gauss => {
                        let (s, a) = (v(0), v(1));
                        (-a * a / (2.0 * s * s)).exp()
                    }
                    Func::LpSingular => {
                        let (p, a) = (v(0), v(1));
                        (a - 0.5).abs().powf(-1.0 / (2.0 * p))
                    }
                    Func::Plateau => {
                        let (n, a) = (v(0), v(1));
                        (1.0 - (a.abs() - n).max(0.0)).max(0.0)
                    }
                }
            }
        }
    }

    /// Replaces every occurrence of `x` by `inner`, i.e. returns `self ∘ inner`.
    pub fn compose(&self, inner: &Expr) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::X => inner.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.compose(inner))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.compose(inner), b.compose(inner)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.compose(inner)).collect()),
        }
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("trailing input in '{src}'")));
        }
        Ok(e)
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b == 2.0 {
        a * a
    } else if b.fract() == 0.0 && b.abs() < 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
            if e.prec() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Expr::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                match op {
                    BinOp::Pow => {
                        wrap(f, a, 5)?;
                        write!(f, "^")?;
                        wrap(f, b, 4)
                    }
                    _ => {
                        wrap(f, a, p)?;
                        write!(f, "{sym}")?;
                        wrap(f, b, p + 1)
                    }
                }
            }
            Expr::Call(func, args) => {
                let shown = match func.kernel_params() {
                    Some(k) if args[k] == Expr::X => &args[..k],
                    _ => &args[..],
                };
                write!(f, "{}(", func.name())?;
                for (i, a) in shown.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),|".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected '{c}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::bin(BinOp::Add, lhs, self.term()?);
            } else if self.eat('-') {
                lhs = Expr::bin(BinOp::Sub, lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::bin(BinOp::Mul, lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = Expr::bin(BinOp::Div, lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Num(v) => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(')') {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(')') {
                return Ok(args);
            }
            self.expect(',')?;
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Op('|')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect('|')?;
                Ok(Expr::Call(Func::Abs, vec![e]))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let args = self.args()?;
                    call(&name, args)
                } else {
                    bare(&name)
                }
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

fn bare(name: &str) -> Result<Expr> {
    Ok(match name {
        "x" | "id" => Expr::X,
        "pi" => Expr::Num(std::f64::consts::PI),
        "e" => Expr::Num(std::f64::consts::E),
        "one" => Expr::Num(1.0),
        "zero" => Expr::Num(0.0),
        "square" => Expr::bin(BinOp::Pow, Expr::X, Expr::Num(2.0)),
        _ => match Func::from_name(name) {
            Some(f) if f.arity() == 1 => Expr::Call(f, vec![Expr::X]),
            _ => return Err(Error::Parse(format!("unknown name '{name}'"))),
        },
    })
}

fn call(name: &str, mut args: Vec<Expr>) -> Result<Expr> {
    if name == "clip" {
        // clip(e) / clip(e, r): evaluate e with its argument clamped to [-r, r].
        let r = match args.len() {
            1 => Expr::Num(crate::tolerances::DEFAULT_WINDOW.1),
            2 => args.pop().unwrap(),
            n => return Err(Error::Parse(format!("clip takes 1 or 2 arguments, got {n}"))),
        };
        let clamp = Expr::Call(Func::Clamp, vec![Expr::X, Expr::Neg(Box::new(r.clone())), r]);
        return Ok(args[0].compose(&clamp));
    }
    let f = Func::from_name(name).ok_or_else(|| Error::Parse(format!("unknown function '{name}'")))?;
    if let Some(k) = f.kernel_params() {
        if args.len() == k {
            args.push(Expr::X);
        }
    }
    if args.len() != f.arity() {
        return Err(Error::Parse(format!("{name} takes {} arguments, got {}", f.arity(), args.len())));
    }
    Ok(Expr::Call(f, args))
}
