//! Expression sublanguage for config fields: `+ - * /`, `sin`, `cos`,
//! numeric constants, `pi` and the coordinate variables.

use std::fmt;

#[derive(Debug, Clone)]
pub struct ExprError {
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.pos, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => point[*i],
            Expr::Neg(e) => -e.eval(point),
            Expr::Add(a, b) => a.eval(point) + b.eval(point),
            Expr::Sub(a, b) => a.eval(point) - b.eval(point),
            Expr::Mul(a, b) => a.eval(point) * b.eval(point),
            Expr::Div(a, b) => a.eval(point) / b.eval(point),
            Expr::Sin(e) => e.eval(point).sin(),
            Expr::Cos(e) => e.eval(point).cos(),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

/// Parse an expression over the given coordinate variable names.
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, vars };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError { pos: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.error("expected a number, name or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError { pos: start, message: format!("bad number '{text}'") })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "sin" | "cos" => {
                if self.peek() != Some(b'(') {
                    return Err(self.error("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(if name == "sin" {
                    Expr::Sin(Box::new(arg))
                } else {
                    Expr::Cos(Box::new(arg))
                })
            }
            _ => {
                if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    Ok(Expr::Var(idx))
                } else {
                    Err(ExprError {
                        pos: start,
                        message: format!("unknown name '{name}'"),
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const VARS: &[&str] = &["x", "y", "z"];

    #[test]
    fn arithmetic_and_functions() {
        let e = parse("0.5 + 0.05*sin(2*pi*x)", VARS).unwrap();
        assert_abs_diff_eq!(e.eval(&[0.25, 0.0, 0.0]), 0.55, epsilon = 1e-15);
        let e2 = parse("1 - 2*(3 - 4)/2", VARS).unwrap();
        assert_abs_diff_eq!(e2.eval(&[0.0; 3]), 2.0, epsilon = 1e-15);
        let e3 = parse("-cos(pi*y)", VARS).unwrap();
        assert_abs_diff_eq!(e3.eval(&[0.0, 1.0, 0.0]), 1.0, epsilon = 1e-15);
        let e4 = parse("4*pi*pi", VARS).unwrap();
        assert_abs_diff_eq!(e4.eval(&[0.0; 3]), 4.0 * PI * PI, epsilon = 1e-12);
        let e5 = parse("1e-2 + 2.5E3", VARS).unwrap();
        assert_abs_diff_eq!(e5.eval(&[0.0; 3]), 2500.01, epsilon = 1e-12);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("1 + bogus", VARS).unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(parse("sin 2", VARS).is_err());
        assert!(parse("(1 + 2", VARS).is_err());
        assert!(parse("1 2", VARS).is_err());
        // z is not a variable on a 2-torus
        assert!(parse("z", &["x", "y"]).is_err());
    }
}
