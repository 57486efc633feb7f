//! Arithmetic expressions in `x` and `y` for initial data.
//!
//! Grammar: numeric literals, `x`, `y`, `pi` (or `π`), binary `+ - * /`,
//! right-associative `^`, unary minus, `sin(..)`, `cos(..)` and parentheses.

use std::fmt;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Pi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

/// Value with its partial derivatives in `x` and `y`.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    dx: f64,
    dy: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, dx: 0.0, dy: 0.0 }
    }

    fn chain(self, v: f64, d: f64) -> Self {
        Dual { v, dx: d * self.dx, dy: d * self.dy }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ConfigError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(ConfigError::Expression(format!("unexpected '{}' in '{src}'", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.dual(x, y).v
    }

    /// `(∂/∂x, ∂/∂y)` at a point.
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let d = self.dual(x, y);
        [d.dx, d.dy]
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => true,
            Expr::X | Expr::Y => false,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    fn dual(&self, x: f64, y: f64) -> Dual {
        match self {
            Expr::Num(v) => Dual::constant(*v),
            Expr::Pi => Dual::constant(std::f64::consts::PI),
            Expr::X => Dual { v: x, dx: 1.0, dy: 0.0 },
            Expr::Y => Dual { v: y, dx: 0.0, dy: 1.0 },
            Expr::Neg(a) => {
                let a = a.dual(x, y);
                Dual { v: -a.v, dx: -a.dx, dy: -a.dy }
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.dual(x, y), b.dual(x, y));
                Dual { v: a.v + b.v, dx: a.dx + b.dx, dy: a.dy + b.dy }
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.dual(x, y), b.dual(x, y));
                Dual { v: a.v - b.v, dx: a.dx - b.dx, dy: a.dy - b.dy }
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.dual(x, y), b.dual(x, y));
                Dual { v: a.v * b.v, dx: a.dx * b.v + a.v * b.dx, dy: a.dy * b.v + a.v * b.dy }
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.dual(x, y), b.dual(x, y));
                let q = a.v / b.v;
                Dual { v: q, dx: (a.dx - q * b.dx) / b.v, dy: (a.dy - q * b.dy) / b.v }
            }
            Expr::Pow(a, b) => {
                let constant_exponent = b.is_constant();
                let (a, b) = (a.dual(x, y), b.dual(x, y));
                let v = a.v.powf(b.v);
                if constant_exponent {
                    let d = if b.v == 0.0 { 0.0 } else { b.v * a.v.powf(b.v - 1.0) };
                    a.chain(v, d)
                } else {
                    let ln = a.v.ln();
                    Dual {
                        v,
                        dx: v * (b.dx * ln + b.v * a.dx / a.v),
                        dy: v * (b.dy * ln + b.v * a.dy / a.v),
                    }
                }
            }
            Expr::Sin(a) => {
                let a = a.dual(x, y);
                a.chain(a.v.sin(), a.v.cos())
            }
            Expr::Cos(a) => {
                let a = a.dual(x, y);
                a.chain(a.v.cos(), -a.v.sin())
            }
        }
    }
}

/// Fully parenthesised; parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>, ConfigError> {
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| ConfigError::Expression(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '−' {
            out.push(Token::Op('-'));
            i += 1;
        } else if c == '×' {
            out.push(Token::Op('*'));
            i += 1;
        } else {
            return Err(ConfigError::Expression(format!("unexpected character '{c}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<(), ConfigError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ConfigError::Expression(format!("expected '{op}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ConfigError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::Add(lhs.into(), rhs.into()) } else { Expr::Sub(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ConfigError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(lhs.into(), rhs.into()) } else { Expr::Div(lhs.into(), rhs.into()) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ConfigError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(match self.unary()? {
                    Expr::Num(v) => Expr::Num(-v),
                    e => Expr::Neg(e.into()),
                })
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ConfigError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ConfigError> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| ConfigError::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" | "π" => Ok(Expr::Pi),
                "sin" | "cos" => {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(if name == "sin" { Expr::Sin(arg.into()) } else { Expr::Cos(arg.into()) })
                }
                other => Err(ConfigError::Expression(format!("unknown identifier '{other}'"))),
            },
            Token::Op(c) => Err(ConfigError::Expression(format!("unexpected '{c}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2 * 3 ^ 2 ^ 0.5 - 4 / 2").unwrap();
        let expect = 1.0 + 2.0 * 3f64.powf(2f64.powf(0.5)) - 2.0;
        assert!((e.eval(0.0, 0.0) - expect).abs() < 1e-14);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(3.0, 0.0), -9.0);
        assert_eq!(Expr::parse("2*-y").unwrap().eval(0.0, 4.0), -8.0);
    }

    #[test]
    fn preset_initial_data() {
        let e = Expr::parse("2*cos(2*pi*x)*sin(2*π*y)").unwrap();
        let (x, y) = (0.3, 0.7);
        let v = 2.0 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin();
        assert!((e.eval(x, y) - v).abs() < 1e-14);
        let g = e.gradient(x, y);
        let gx = -4.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
        let gy = 4.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos();
        assert!((g[0] - gx).abs() < 1e-12 && (g[1] - gy).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for src in ["4*x^2*sin(2*pi*y)", "x/(1+y*y)", "(1+x)^(y+1)", "-2*y*cos(2*pi*x)", "1e-3*x - 2.5E+1"] {
            let e = Expr::parse(src).unwrap();
            let (x, y, h) = (0.37, 0.61, 1e-6);
            let g = e.gradient(x, y);
            let fx = (e.eval(x + h, y) - e.eval(x - h, y)) / (2.0 * h);
            let fy = (e.eval(x, y + h) - e.eval(x, y - h)) / (2.0 * h);
            assert!((g[0] - fx).abs() < 1e-7 * (1.0 + fx.abs()), "{src}");
            assert!((g[1] - fy).abs() < 1e-7 * (1.0 + fy.abs()), "{src}");
        }
    }

    #[test]
    fn display_round_trips() {
        for src in ["-2*y*cos(2*pi*x)", "4*x^2*sin(2*pi*y)", "-(x - -3)", "0.1 + 1e-20", "x^-2"] {
            let e = Expr::parse(src).unwrap();
            assert_eq!(Expr::parse(&e.to_string()).unwrap(), e, "{src} -> {e}");
        }
    }

    #[test]
    fn errors() {
        for src in ["", "x +", "sin x", "tan(x)", "(x", "x y", "3 $ 4", "1.2.3"] {
            assert!(matches!(Expr::parse(src), Err(ConfigError::Expression(_))), "{src}");
        }
    }
}
