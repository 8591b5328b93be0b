//! Scalar field expressions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | var | const | func '(' expr (',' expr)* ')'
//!          | '(' expr ')' | '|' expr '|'
//! var     := x1 .. xN | t
//! const   := pi | e
//! func    := exp log ln sqrt sin cos tan sinh cosh tanh atan abs pow min max
//! ```
//!
//! Expressions evaluate over any [`Real`], so the same parsed field can be
//! differentiated exactly with dual numbers.

use crate::dual::Real;
use crate::error::{FinslerError, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Coord(usize),
    Time,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    fn from_name(s: &str) -> Option<(Func, usize)> {
        Some(match s {
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "sinh" => (Func::Sinh, 1),
            "cosh" => (Func::Cosh, 1),
            "tanh" => (Func::Tanh, 1),
            "atan" => (Func::Atan, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug)]
pub struct Expr {
    src: String,
    root: Node,
    max_coord: usize,
    uses_time: bool,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let mut max_coord = 0;
        let mut uses_time = false;
        scan(&root, &mut max_coord, &mut uses_time);
        Ok(Expr { src: src.to_string(), root, max_coord, uses_time })
    }

    pub fn constant(v: f64) -> Expr {
        Expr { src: format!("{v}"), root: Node::Num(v), max_coord: 0, uses_time: false }
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Highest coordinate index referenced (1-based; 0 if none).
    pub fn max_coord(&self) -> usize {
        self.max_coord
    }

    pub fn uses_time(&self) -> bool {
        self.uses_time
    }

    /// True when the expression has no coordinate or time dependence.
    pub fn as_constant(&self) -> Option<f64> {
        if self.max_coord == 0 && !self.uses_time {
            Some(self.eval::<f64>(&[], 0.0))
        } else {
            None
        }
    }

    pub fn eval<T: Real>(&self, x: &[T], t: T) -> T {
        eval_node(&self.root, x, t)
    }

    pub fn eval_f64(&self, x: &[f64], t: f64) -> f64 {
        self.eval(x, t)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.src)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Expr::constant(v)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

fn scan(n: &Node, max_coord: &mut usize, uses_time: &mut bool) {
    match n {
        Node::Num(_) => {}
        Node::Coord(i) => *max_coord = (*max_coord).max(i + 1),
        Node::Time => *uses_time = true,
        Node::Neg(a) => scan(a, max_coord, uses_time),
        Node::Bin(_, a, b) => {
            scan(a, max_coord, uses_time);
            scan(b, max_coord, uses_time);
        }
        Node::Call(_, args) => args.iter().for_each(|a| scan(a, max_coord, uses_time)),
    }
}

fn eval_node<T: Real>(n: &Node, x: &[T], t: T) -> T {
    match n {
        Node::Num(v) => T::cst(*v),
        // coordinates beyond the chart dimension read as zero
        Node::Coord(i) => x.get(*i).copied().unwrap_or_else(T::zero),
        Node::Time => t,
        Node::Neg(a) => -eval_node(a, x, t),
        Node::Bin(op, a, b) => {
            let l = eval_node(a, x, t);
            match op {
                Op::Pow => pow(l, b, x, t),
                _ => {
                    let r = eval_node(b, x, t);
                    match op {
                        Op::Add => l + r,
                        Op::Sub => l - r,
                        Op::Mul => l * r,
                        Op::Div => l / r,
                        Op::Pow => unreachable!(),
                    }
                }
            }
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], x, t);
            match f {
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
                Func::Tanh => a.tanh(),
                Func::Atan => a.atan(),
                Func::Abs => a.abs(),
                Func::Pow => pow(a, &args[1], x, t),
                Func::Min | Func::Max => {
                    let b = eval_node(&args[1], x, t);
                    let pick_a = if *f == Func::Min { a.re() <= b.re() } else { a.re() >= b.re() };
                    if pick_a {
                        a
                    } else {
                        b
                    }
                }
            }
        }
    }
}

// Integer exponents go through powi so negative bases stay valid.
fn pow<T: Real>(base: T, exp: &Node, x: &[T], t: T) -> T {
    if let Node::Num(k) = exp {
        if k.fract() == 0.0 && k.abs() < 64.0 {
            return base.powi(*k as i32);
        }
    }
    if let Node::Neg(inner) = exp {
        if let Node::Num(k) = inner.as_ref() {
            if k.fract() == 0.0 && k.abs() < 64.0 {
                return base.powi(-(*k as i32));
            }
        }
    }
    base.powf(eval_node(exp, x, t))
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> FinslerError {
        FinslerError::Expr { msg: msg.to_string(), column: self.pos + 1 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(b'|') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b'|') {
                    return Err(self.err("expected closing '|'"));
                }
                Ok(Node::Call(Func::Abs, vec![e]))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        txt.parse::<f64>().map(Node::Num).map_err(|_| FinslerError::Expr { msg: format!("bad number '{txt}'"), column: start + 1 })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        match name {
            "t" => return Ok(Node::Time),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(k) = idx.parse::<usize>() {
                if k == 0 {
                    return Err(FinslerError::Expr { msg: "coordinates start at x1".into(), column: start + 1 });
                }
                return Ok(Node::Coord(k - 1));
            }
        }
        let Some((func, arity)) = Func::from_name(name) else {
            return Err(FinslerError::Expr { msg: format!("unknown identifier '{name}'"), column: start + 1 });
        };
        if !self.eat(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        if args.len() != arity {
            return Err(FinslerError::Expr { msg: format!("{name} takes {arity} argument(s), got {}", args.len()), column: start + 1 });
        }
        Ok(Node::Call(func, args))
    }
}
