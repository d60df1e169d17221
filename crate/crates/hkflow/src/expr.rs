//! Arithmetic expressions over `x1..xn` for boundary data.
//!
//! Grammar: `+ - * / ^` with parentheses, unary minus, the functions
//! `sin cos exp log sqrt abs min max`, and the constants `pi`, `e`.
//! Expressions are parsed once to an AST and evaluated per point;
//! evaluation is derivative-free (callers finite-difference when they
//! need boundary-data derivatives).

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based coordinate index (`x1` is 0).
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
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

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'+'
                            || bytes[i + 1] == b'-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let lit = &src[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| Error::Eval(format!("bad numeric literal '{lit}'")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            _ => return Err(Error::Eval(format!("unexpected character '{c}' at byte {i}"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Eval(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            // Right-associative; exponent may carry a unary minus.
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "log" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "min" => Func::Min,
                        "max" => Func::Max,
                        _ => return Err(Error::Eval(format!("unknown function '{name}'"))),
                    };
                    self.next();
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.next();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != f.arity() {
                        return Err(Error::Eval(format!(
                            "function '{name}' takes {} argument(s), got {}",
                            f.arity(),
                            args.len()
                        )));
                    }
                    Ok(Expr::Call(f, args))
                } else {
                    match name.as_str() {
                        "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                        "e" => Ok(Expr::Const(std::f64::consts::E)),
                        _ => {
                            if let Some(idx) = name.strip_prefix('x') {
                                let k: usize = idx.parse().map_err(|_| {
                                    Error::Eval(format!("unknown identifier '{name}'"))
                                })?;
                                if k == 0 || k > self.dim {
                                    return Err(Error::Eval(format!(
                                        "variable '{name}' out of range for dimension {}",
                                        self.dim
                                    )));
                                }
                                Ok(Expr::Var(k - 1))
                            } else {
                                Err(Error::Eval(format!("unknown identifier '{name}'")))
                            }
                        }
                    }
                }
            }
            t => Err(Error::Eval(format!("unexpected token {t:?}"))),
        }
    }
}

/// Parse an expression over `x1..x{dim}`.
pub fn parse(src: &str, dim: usize) -> Result<Expr> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(Error::Eval("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Eval(format!(
            "trailing input after expression (token {:?})",
            p.toks[p.pos]
        )));
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => {
                *x.get(*i)
                    .ok_or_else(|| Error::Eval(format!("x{} beyond point dimension", i + 1)))?
            }
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::Eval("division by zero".into()));
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x)?;
                let exp = b.eval(x)?;
                let v = base.powf(exp);
                if !v.is_finite() && base.is_finite() && exp.is_finite() {
                    return Err(Error::Eval(format!("invalid power {base}^{exp}")));
                }
                v
            }
            Expr::Call(f, args) => {
                let a0 = args[0].eval(x)?;
                match f {
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Exp => a0.exp(),
                    Func::Log => {
                        if a0 <= 0.0 {
                            return Err(Error::Eval(format!("log of non-positive value {a0}")));
                        }
                        a0.ln()
                    }
                    Func::Sqrt => {
                        if a0 < 0.0 {
                            return Err(Error::Eval(format!("sqrt of negative value {a0}")));
                        }
                        a0.sqrt()
                    }
                    Func::Abs => a0.abs(),
                    Func::Min => a0.min(args[1].eval(x)?),
                    Func::Max => a0.max(args[1].eval(x)?),
                }
            }
        };
        if v.is_nan() {
            return Err(Error::Eval("expression evaluated to NaN".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_arithmetic() {
        let e = parse("x1^2 - x2^2", 2).unwrap();
        assert_eq!(e.eval(&[2.0, 1.0]).unwrap(), 3.0);
        let e = parse("0", 2).unwrap();
        assert_eq!(e.eval(&[5.0, -1.0]).unwrap(), 0.0);
        let e = parse("2*pi + e", 2).unwrap();
        assert!((e.eval(&[0.0, 0.0]).unwrap()
            - (2.0 * std::f64::consts::PI + std::f64::consts::E))
            .abs()
            < 1e-15);
    }

    #[test]
    fn precedence_and_unary() {
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse("2 + 3 * 4 ^ 2", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 50.0);
        let e = parse("(2 + 3) * 4", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 20.0);
    }

    #[test]
    fn functions() {
        let e = parse("min(x1, max(x2, 0.5)) + abs(-2)", 2).unwrap();
        assert_eq!(e.eval(&[3.0, 0.1]).unwrap(), 2.5);
        let e = parse("sqrt(x1^2 + x2^2)", 2).unwrap();
        assert!((e.eval(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn evaluation_errors() {
        let e = parse("log(x1 - 1)", 2).unwrap();
        assert!(e.eval(&[1.0, 0.0]).is_err());
        let e = parse("1 / x1", 1).unwrap();
        assert!(e.eval(&[0.0]).is_err());
        let e = parse("sqrt(x1)", 1).unwrap();
        assert!(e.eval(&[-1.0]).is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(parse("x1 +", 2).is_err());
        assert!(parse("foo(x1)", 2).is_err());
        assert!(parse("x3", 2).is_err());
        assert!(parse("min(x1)", 2).is_err());
        assert!(parse("", 2).is_err());
    }
}
