//! Arithmetic expressions in `x1`, `x2` and `alpha`.
//!
//! ```text
//! expr    = term { ("+" | "-") term }
//! term    = unary { ("*" | "/") unary }
//! unary   = "-" unary | power
//! power   = primary [ "^" unary ]
//! primary = number | "x1" | "x2" | "alpha" | "pi" | func "(" expr ")" | "(" expr ")"
//! func    = "sin" | "cos" | "sqrt" | "exp" | "abs"
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-x1^2` is `-(x1^2)` and `2^3^2` is `2^9`.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Alpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the expression.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at column {})", self.message, self.position + 1)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((at, t)) => Err(ParseError {
                position: at,
                message: format!("unexpected `{t}`"),
            }),
        }
    }

    pub fn eval(&self, x: [f64; 2], alpha: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => x[0],
            Expr::Var(Var::X2) => x[1],
            Expr::Var(Var::Alpha) => alpha,
            Expr::Neg(e) => -e.eval(x, alpha),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, alpha), b.eval(x, alpha));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if b.fract() == 0.0 && b.abs() <= 64.0 {
                            a.powi(b as i32)
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x, alpha);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    /// The value if the expression depends on no variable.
    pub fn constant(&self) -> Option<f64> {
        (!self.uses(Var::X1) && !self.uses(Var::X2) && !self.uses(Var::Alpha)).then(|| self.eval([0.0; 2], 0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => f.write_str(s),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(ParseError {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Token)> {
        self.tokens.get(self.pos).map(|(p, t)| (*p, t))
    }

    fn eat_op(&mut self, op: char) -> bool {
        if let Some((_, Token::Op(c))) = self.peek() {
            if *c == op {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.peek().map(|p| p.0).unwrap_or(self.len),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_op('+') {
                BinOp::Add
            } else if self.eat_op('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_op('*') {
                BinOp::Mul
            } else if self.eat_op('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op('^') {
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((_, tok)) = self.peek() else {
            return self.error("unexpected end of expression");
        };
        match tok.clone() {
            Token::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Token::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return self.error("expected `)`");
                }
                Ok(e)
            }
            Token::Ident(name) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "x1" => return Ok(Expr::Var(Var::X1)),
                    "x2" => return Ok(Expr::Var(Var::X2)),
                    "alpha" => return Ok(Expr::Var(Var::Alpha)),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "sqrt" => Func::Sqrt,
                    "exp" => Func::Exp,
                    "abs" => Func::Abs,
                    _ => {
                        self.pos -= 1;
                        return self.error(format!("unknown name `{name}`"));
                    }
                };
                if !self.eat_op('(') {
                    return self.error(format!("expected `(` after `{name}`"));
                }
                let arg = self.expr()?;
                if !self.eat_op(')') {
                    return self.error("expected `)`");
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            t => self.error(format!("unexpected `{t}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval([0.5, -2.0], 0.25)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("2 ^ -1"), 0.5);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("--3"), 3.0);
    }

    #[test]
    fn variables_functions_and_constants() {
        assert_eq!(ev("x1 * x2 + alpha"), -0.75);
        assert!((ev("sin(pi / 2) + cos(0) + sqrt(16) + exp(0) + abs(x2)") - 9.0).abs() < 1e-15);
        assert_eq!(ev("1.5e-1 * 2E1"), 3.0);
        assert_eq!(ev("x1^2"), 0.25);
    }

    #[test]
    fn constants_are_detected() {
        assert_eq!(Expr::parse("2 * pi").unwrap().constant(), Some(2.0 * std::f64::consts::PI));
        assert_eq!(Expr::parse("2 * x1").unwrap().constant(), None);
        assert!(Expr::parse("cos(alpha)").unwrap().uses(Var::Alpha));
    }

    #[test]
    fn errors_point_at_the_problem() {
        for (src, pos) in [("1 +", 3), ("foo(1)", 0), ("2 $ 3", 2), ("(1 + 2", 6), ("sin 1", 4), ("1 2", 2), ("1.2.3", 0)] {
            let e = Expr::parse(src).unwrap_err();
            assert_eq!(e.position, pos, "{src}: {e}");
        }
    }
}
