//! Analytic level sets describing the interface, positive in the fluid region.
//!
//! Besides the two closed-form families, a small expression language is accepted:
//! `+ - * / ^`, parentheses, the functions `sin cos tan tanh exp log sqrt abs`, the
//! variables `x y`, and the constants `pi e`. Gradients of expressions are exact
//! (forward-mode dual numbers).

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Debug, PartialEq)]
pub enum LevelSet {
    /// `y − y0`: fluid above the horizontal line `y = y0`.
    Flat { y0: f64 },
    /// `−y + y0 + a sin(kπx)`: fluid below the sine curve.
    Sine { a: f64, k: f64, y0: f64 },
    Expression(Expression),
}

impl LevelSet {
    /// Parses `flat(y0)`, `sine(a, k, y0)`, or `expr(<expression>)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        let (name, inner) = s
            .find('(')
            .filter(|_| s.ends_with(')'))
            .map(|i| (s[..i].trim(), &s[i + 1..s.len() - 1]))
            .ok_or_else(|| Error::Expression(format!("level set `{s}` is not of the form name(...)")))?;
        let numbers = || -> Result<Vec<f64>> {
            inner
                .split(',')
                .map(|a| {
                    Expression::parse(a).and_then(|e| {
                        if e.uses_variables() {
                            Err(Error::Expression(format!("argument `{a}` must be a constant")))
                        } else {
                            Ok(e.eval([0.0, 0.0]))
                        }
                    })
                })
                .collect()
        };
        match name {
            "flat" => match numbers()?.as_slice() {
                [y0] => Ok(LevelSet::Flat { y0: *y0 }),
                _ => Err(Error::Expression("flat(y0) takes one argument".into())),
            },
            "sine" => match numbers()?.as_slice() {
                [a, k, y0] => Ok(LevelSet::Sine { a: *a, k: *k, y0: *y0 }),
                _ => Err(Error::Expression("sine(a, k, y0) takes three arguments".into())),
            },
            "expr" | "expression" => Ok(LevelSet::Expression(Expression::parse(inner)?)),
            other => Err(Error::Expression(format!("unknown level set family `{other}`"))),
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.eval_with_gradient(p).0
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        self.eval_with_gradient(p).1
    }

    pub fn eval_with_gradient(&self, p: Point) -> (f64, [f64; 2]) {
        match *self {
            LevelSet::Flat { y0 } => (p[1] - y0, [0.0, 1.0]),
            LevelSet::Sine { a, k, y0 } => {
                let arg = k * PI * p[0];
                (-p[1] + y0 + a * arg.sin(), [a * k * PI * arg.cos(), -1.0])
            }
            LevelSet::Expression(ref e) => {
                let d = e.eval_dual(p);
                (d.v, [d.dx, d.dy])
            }
        }
    }

    /// For graph-type interfaces, the interface height `y(x)`.
    pub fn interface_height(&self, x: f64) -> Option<f64> {
        match *self {
            LevelSet::Flat { y0 } => Some(y0),
            LevelSet::Sine { a, k, y0 } => Some(y0 + a * (k * PI * x).sin()),
            LevelSet::Expression(_) => None,
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSet::Flat { y0 } => write!(f, "flat({y0})"),
            LevelSet::Sine { a, k, y0 } => write!(f, "sine({a}, {k}, {y0})"),
            LevelSet::Expression(e) => write!(f, "expr({})", e.source),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    dx: f64,
    dy: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, dx: 0.0, dy: 0.0 }
    }

    // chain rule for a scalar function with value f and derivative df at self.v
    fn chain(self, f: f64, df: f64) -> Self {
        Self {
            v: f,
            dx: df * self.dx,
            dy: df * self.dy,
        }
    }

    fn is_constant(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }

    fn pow(self, e: Dual) -> Dual {
        if e.is_constant() {
            let n = e.v;
            let df = if n == 0.0 { 0.0 } else { n * self.v.powf(n - 1.0) };
            self.chain(self.v.powf(n), df)
        } else {
            let f = self.v.powf(e.v);
            let ln = self.v.ln();
            Dual {
                v: f,
                dx: f * (e.dx * ln + e.v * self.dx / self.v),
                dy: f * (e.dy * ln + e.v * self.dy / self.v),
            }
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, dx: self.dx + o.dx, dy: self.dy + o.dy }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, dx: self.dx - o.dx, dy: self.dy - o.dy }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        Dual {
            v: self.v * inv,
            dx: (self.dx - self.v * inv * o.dx) * inv,
            dy: (self.dy - self.v * inv * o.dy) * inv,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, dx: -self.dx, dy: -self.dy }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, a: Dual) -> Dual {
        let x = a.v;
        match self {
            Func::Sin => a.chain(x.sin(), x.cos()),
            Func::Cos => a.chain(x.cos(), -x.sin()),
            Func::Tan => a.chain(x.tan(), 1.0 / (x.cos() * x.cos())),
            Func::Tanh => {
                let t = x.tanh();
                a.chain(t, 1.0 - t * t)
            }
            Func::Exp => a.chain(x.exp(), x.exp()),
            Func::Log => a.chain(x.ln(), 1.0 / x),
            Func::Sqrt => a.chain(x.sqrt(), 0.5 / x.sqrt()),
            Func::Abs => a.chain(x.abs(), if x < 0.0 { -1.0 } else { 1.0 }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: Dual, y: Dual) -> Dual {
        match self {
            Node::Num(v) => Dual::constant(*v),
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.pow(b),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(x, y)),
        }
    }

    fn uses_variables(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::X | Node::Y => true,
            Node::Neg(a) | Node::Call(_, a) => a.uses_variables(),
            Node::Bin(_, a, b) => a.uses_variables() || b.uses_variables(),
        }
    }
}

/// Parsed arithmetic expression in `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            chars: src.chars().collect(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: src.trim().to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.root.eval(Dual::constant(p[0]), Dual::constant(p[1])).v
    }

    fn eval_dual(&self, p: Point) -> Dual {
        let x = Dual { v: p[0], dx: 1.0, dy: 0.0 };
        let y = Dual { v: p[1], dx: 0.0, dy: 1.0 };
        self.root.eval(x, y)
    }

    pub fn uses_variables(&self) -> bool {
        self.root.uses_variables()
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, msg: &str) -> Error {
        let src: String = self.chars.iter().collect();
        Error::Expression(format!("{msg} at column {} of `{}`", self.pos + 1, src.trim()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.pos < self.chars.len() {
                    let c = self.chars[self.pos];
                    let exp_sign = (c == '+' || c == '-')
                        && matches!(self.chars.get(self.pos.wrapping_sub(1)), Some('e' | 'E'));
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                text.parse()
                    .map(Node::Num)
                    .map_err(|_| self.error(&format!("malformed number `{text}`")))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                match name.as_str() {
                    "x" => Ok(Node::X),
                    "y" => Ok(Node::Y),
                    "pi" => Ok(Node::Num(PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => {
                        let f = Func::lookup(&name)
                            .ok_or_else(|| self.error(&format!("unknown identifier `{name}`")))?;
                        if self.peek() != Some('(') {
                            return Err(self.error(&format!("expected `(` after `{name}`")));
                        }
                        Ok(Node::Call(f, Box::new(self.atom()?)))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let flat = LevelSet::parse("flat(1)").unwrap();
        assert_eq!(flat, LevelSet::Flat { y0: 1.0 });
        assert_eq!(flat.eval([0.3, 1.25]), 0.25);
        let sine = LevelSet::parse("sine(0.1, 4, 0)").unwrap();
        let (v, g) = sine.eval_with_gradient([0.125, 0.0]);
        assert!((v - 0.1).abs() < 1e-15);
        assert!(g[0].abs() < 1e-14 && g[1] == -1.0);
    }

    #[test]
    fn expression_precedence() {
        let e = Expression::parse("1 + 2 * 3 ^ 2 - -4 / 2").unwrap();
        assert_eq!(e.eval([0.0, 0.0]), 1.0 + 18.0 + 2.0);
        let e = Expression::parse("2^3^2").unwrap();
        assert_eq!(e.eval([0.0, 0.0]), 512.0);
        let e = Expression::parse("-x^2").unwrap();
        assert_eq!(e.eval([3.0, 0.0]), -9.0);
        let e = Expression::parse("1.5e-1 * 2E+1").unwrap();
        assert!((e.eval([0.0, 0.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn expression_matches_sine_family() {
        let a = LevelSet::parse("expr(-y + 0.1*sin(4*pi*x))").unwrap();
        let b = LevelSet::parse("sine(0.1, 4, 0)").unwrap();
        for p in [[0.1, 0.3], [0.77, -0.2], [0.5, 0.9]] {
            let (va, ga) = a.eval_with_gradient(p);
            let (vb, gb) = b.eval_with_gradient(p);
            assert!((va - vb).abs() < 1e-15);
            assert!((ga[0] - gb[0]).abs() < 1e-13 && (ga[1] - gb[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_gradients_match_finite_differences() {
        let e = Expression::parse("tanh(x*y) + exp(-x) * cos(y) / (1 + x^2) + sqrt(2 + y)").unwrap();
        let ls = LevelSet::Expression(e.clone());
        let h = 1e-6;
        for p in [[0.2, 0.4], [-0.7, 1.3]] {
            let g = ls.gradient(p);
            let fx = (e.eval([p[0] + h, p[1]]) - e.eval([p[0] - h, p[1]])) / (2.0 * h);
            let fy = (e.eval([p[0], p[1] + h]) - e.eval([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - fx).abs() < 1e-8 && (g[1] - fy).abs() < 1e-8);
        }
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["1 +", "sin x", "foo(1)", "(1", "1 2", "flat(x)"] {
            assert!(
                Expression::parse(bad).is_err() || LevelSet::parse(bad).is_err(),
                "`{bad}` parsed"
            );
        }
        assert!(LevelSet::parse("flat(x)").is_err());
        assert!(LevelSet::parse("circle(1)").is_err());
        assert!(LevelSet::parse("sine(1, 2)").is_err());
    }
}
