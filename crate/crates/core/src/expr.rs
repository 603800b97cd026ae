//! Polynomial expressions in the level index `n`.
//!
//! Grammar: `expr := term (('+'|'-') term)*`, `term := factor ('*' factor)*`,
//! `factor := int | "n" | factor '^' int | '(' expr ')'`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::poly::Poly;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Int(BigInt),
    N,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
    poly: Poly,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Parser<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn err(&self, what: &str) -> Error {
        Error::Schema(format!(
            "expression {:?}: {what} at offset {}",
            String::from_utf8_lossy(self.s),
            self.i
        ))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.i += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                b'-' => {
                    self.i += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(b'*') {
            self.i += 1;
            lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node> {
        let mut base = self.primary()?;
        while self.peek() == Some(b'^') {
            self.i += 1;
            let e = self.int()?;
            let e = e.to_u32().ok_or_else(|| self.err("exponent too large"))?;
            base = Node::Pow(Box::new(base), e);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'n') => {
                self.i += 1;
                Ok(Node::N)
            }
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.i += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => Ok(Node::Int(self.int()?)),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end")),
        }
    }

    fn int(&mut self) -> Result<BigInt> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected integer"));
        }
        Ok(std::str::from_utf8(&self.s[start..self.i]).unwrap().parse().unwrap())
    }
}

fn to_poly(node: &Node) -> Poly {
    match node {
        Node::Int(v) => Poly::constant_int(v.clone()),
        Node::N => Poly::x(),
        Node::Add(a, b) => &to_poly(a) + &to_poly(b),
        Node::Sub(a, b) => &to_poly(a) - &to_poly(b),
        Node::Mul(a, b) => &to_poly(a) * &to_poly(b),
        Node::Pow(a, e) => to_poly(a).pow(*e),
    }
}

fn eval_f64(node: &Node, n: f64) -> f64 {
    match node {
        Node::Int(v) => v.to_f64().unwrap_or(f64::INFINITY),
        Node::N => n,
        Node::Add(a, b) => eval_f64(a, n) + eval_f64(b, n),
        Node::Sub(a, b) => eval_f64(a, n) - eval_f64(b, n),
        Node::Mul(a, b) => eval_f64(a, n) * eval_f64(b, n),
        Node::Pow(a, e) => eval_f64(a, n).powi(*e as i32),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), i: 0 };
        let root = p.expr()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        let poly = to_poly(&root);
        Ok(Expr { src: src.trim().to_string(), root, poly })
    }

    pub fn constant(v: i64) -> Expr {
        Expr::parse(&v.max(0).to_string()).unwrap_or_else(|_| unreachable!())
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn eval(&self, n: i64) -> BigInt {
        self.poly.eval_int(&BigInt::from(n))
    }

    pub fn eval_f64(&self, n: f64) -> f64 {
        eval_f64(&self.root, n)
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn is_constant(&self) -> bool {
        self.poly.degree() <= 0
    }

    pub fn is_one(&self) -> bool {
        self.poly == Poly::constant_int(BigInt::one())
    }
}
