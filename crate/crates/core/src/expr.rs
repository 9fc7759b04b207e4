//! Coordinate-expression language.
//!
//! Grammar (EBNF), lowest precedence first:
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right associative *)
//! primary = number | ident | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "tan" | "exp" | "ln" | "sqrt" | "abs" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ] ;
//! ident   = ( letter | "_" ) { letter | digit | "_" } ;
//! ```
//!
//! `-x^2` is `-(x^2)`, `2^3^2` is `2^(3^2)`. Juxtaposition is not
//! multiplication: `2x` is rejected.

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("{op} outside its domain in `{expr}`")]
    Domain { op: &'static str, expr: String },
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        len: text.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(ParseError {
            offset: t.offset,
            expected: "operator or end of input".into(),
            found: t.kind.describe(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Op(c) => format!("`{c}`"),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
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
            let v: f64 = text[start..i].parse().map_err(|_| ParseError {
                offset: start,
                expected: "number".into(),
                found: format!("`{}`", &text[start..i]),
            })?;
            out.push(Token {
                kind: TokKind::Num(v),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or('?');
                    return Err(ParseError {
                        offset: start,
                        expected: "number, identifier, operator or parenthesis".into(),
                        found: format!("`{ch}`"),
                    });
                }
            };
            i += 1;
            out.push(Token {
                kind,
                offset: start,
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => ParseError {
                offset: t.offset,
                expected: expected.into(),
                found: t.kind.describe(),
            },
            None => ParseError {
                offset: self.len,
                expected: expected.into(),
                found: "end of input".into(),
            },
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("number, identifier or `(`"));
        };
        match tok.kind {
            TokKind::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            TokKind::Ident(name) => {
                self.pos += 1;
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokKind::LParen,
                        ..
                    })
                ) {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError {
                            offset: tok.offset,
                            expected: "one of sin, cos, tan, exp, ln, sqrt, abs".into(),
                            found: format!("function `{name}`"),
                        });
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            TokKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            _ => Err(self.error("number, identifier or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokKind::RParen,
                ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("`)`")),
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    /// Sum of terms; the empty sum is `0`.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        terms
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::Add, a, b))
            .unwrap_or(Expr::Const(0.0))
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        factors
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::Mul, a, b))
            .unwrap_or(Expr::Const(1.0))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    /// Variables in order of first appearance.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn eval_env<S: Scalar>(
        &self,
        env: &std::collections::HashMap<String, S>,
    ) -> Result<S, EvalError> {
        self.eval_with(&|name: &str| env.get(name).cloned())
    }

    /// Evaluates over any [`Scalar`], resolving variables through `lookup`.
    pub fn eval_with<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, EvalError> {
        match self {
            Expr::Const(v) => Ok(S::constant(*v)),
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(e) => Ok(-e.eval_with(lookup)?),
            Expr::Call(f, arg) => {
                let a = arg.eval_with(lookup)?;
                let domain = |op| EvalError::Domain {
                    op,
                    expr: self.to_string(),
                };
                Ok(match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => {
                        if a.value().cos() == 0.0 {
                            return Err(domain("tan"));
                        }
                        a.tan()
                    }
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a.value() <= 0.0 {
                            return Err(domain("ln"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a.value() < 0.0 {
                            return Err(domain("sqrt"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                })
            }
            Expr::Binary(op, lhs, rhs) => {
                let a = lhs.eval_with(lookup)?;
                if *op == BinOp::Pow {
                    if let Some(n) = rhs.integer_literal() {
                        if n < 0 && a.value() == 0.0 {
                            return Err(EvalError::Domain {
                                op: "pow",
                                expr: self.to_string(),
                            });
                        }
                        return Ok(a.powi(n));
                    }
                    let b = rhs.eval_with(lookup)?;
                    if a.value() <= 0.0 {
                        return Err(EvalError::Domain {
                            op: "pow",
                            expr: self.to_string(),
                        });
                    }
                    return Ok((b * a.ln()).exp());
                }
                let b = rhs.eval_with(lookup)?;
                Ok(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.value() == 0.0 {
                            return Err(EvalError::Domain {
                                op: "div",
                                expr: self.to_string(),
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => unreachable!(),
                })
            }
        }
    }

    /// `Some(n)` for an integer literal exponent, possibly negated.
    /// The exponent as an `i32` when it is a closed integer-valued
    /// expression such as `2`, `-1` or `3^2`.
    fn integer_literal(&self) -> Option<i32> {
        if !self.free_vars().is_empty() {
            return None;
        }
        let v: f64 = self.eval_with(&|_| None).ok()?;
        (v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Const(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{:?}", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (lp, rp) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < 3)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_child(f, a, lp)?;
                if *op == BinOp::Pow {
                    f.write_str(op.symbol())?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                write_child(f, b, rp)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_zero() {
        assert_eq!(parse("0").unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn parses_call() {
        assert_eq!(
            parse("sin(th)").unwrap(),
            Expr::call(Func::Sin, Expr::var("th"))
        );
    }

    #[test]
    fn christoffel_style_expression() {
        let e = parse("-G*u1*u2/(1+x^2)").unwrap();
        let v: f64 = e
            .eval_env(&env(&[("u1", 1.0), ("u2", 2.0), ("x", 0.0), ("G", 3.0)]))
            .unwrap();
        assert_eq!(v, -6.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("-x^2").unwrap(), Expr::var("x").pipe_pow(2.0).neg());
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval_env::<f64>(&HashMap::new()).unwrap(), 512.0);
        let e = parse("8/2/2").unwrap();
        assert_eq!(e.eval_env::<f64>(&HashMap::new()).unwrap(), 2.0);
        let e = parse("1-2-3").unwrap();
        assert_eq!(e.eval_env::<f64>(&HashMap::new()).unwrap(), -4.0);
    }

    impl Expr {
        fn pipe_pow(self, n: f64) -> Expr {
            Expr::binary(BinOp::Pow, self, Expr::Const(n))
        }
    }

    #[test]
    fn evaluates_simple_forms() {
        assert_eq!(
            parse("x+y")
                .unwrap()
                .eval_env(&env(&[("x", 1.0), ("y", 2.0)]))
                .unwrap(),
            3.0
        );
        assert_eq!(
            parse("cos(th)")
                .unwrap()
                .eval_env(&env(&[("th", 0.0)]))
                .unwrap(),
            1.0
        );
        let v = parse("u^2*sin(x)")
            .unwrap()
            .eval_env(&env(&[("u", 2.0), ("x", std::f64::consts::FRAC_PI_2)]))
            .unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn free_vars_in_first_appearance_order() {
        assert!(parse("3.5").unwrap().free_vars().is_empty());
        assert_eq!(parse("x*y+x").unwrap().free_vars(), ["x", "y"]);
        assert_eq!(parse("sin(a)*b - a").unwrap().free_vars(), ["a", "b"]);
    }

    #[test]
    fn implicit_multiplication_rejected() {
        let err = parse("2x").unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("1 + * 2").unwrap_err();
        assert_eq!(err.offset, 4);
        let err = parse("sin(x").unwrap_err();
        assert_eq!(err.offset, 5);
        assert_eq!(err.found, "end of input");
        let err = parse("foo(x)").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(parse("x $ y").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn scientific_notation_accepted() {
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Const(1.5e-3));
    }

    #[test]
    fn unbound_variable_named() {
        let err = parse("x + q")
            .unwrap()
            .eval_env(&env(&[("x", 1.0)]))
            .unwrap_err();
        assert_eq!(err, EvalError::Unbound("q".into()));
    }

    #[test]
    fn domain_errors() {
        let e = env(&[("x", -1.0), ("z", 0.0)]);
        assert!(matches!(
            parse("ln(x)").unwrap().eval_env(&e),
            Err(EvalError::Domain { op: "ln", .. })
        ));
        assert!(matches!(
            parse("1/z").unwrap().eval_env(&e),
            Err(EvalError::Domain { op: "div", .. })
        ));
        assert!(matches!(
            parse("x^0.5").unwrap().eval_env(&e),
            Err(EvalError::Domain { op: "pow", .. })
        ));
        assert_eq!(parse("x^-2").unwrap().eval_env(&e).unwrap(), 1.0);
        let ok = parse("2^0.5")
            .unwrap()
            .eval_env::<f64>(&HashMap::new())
            .unwrap();
        assert!((ok - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn display_round_trips_tricky_shapes() {
        for s in [
            "-x^2",
            "(-x)^2",
            "2^3^2",
            "(2^3)^2",
            "a-(b-c)",
            "a/(b*c)",
            "-(a+b)*c",
            "x^-y",
            "--x",
            "sin(-x)^2",
        ] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s} printed as {e}");
        }
    }
}
