//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= ['-'] INT | '(' ['-'] INT ')'
//! atom    := NUMBER | 'i' | 'pi' | VAR | FUNC '(' expr ')' | 'atan2' '(' expr ',' expr ')' | '(' expr ')'
//! ```

use num_complex::Complex64;

use super::ast::{Expr, Func, Var};
use super::ExprError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Int(k) => format!("integer {k}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Spanned>, ExprError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            k += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            k += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: tl, column: tc });
            column += 1;
            k += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = k;
            let mut is_int = true;
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                if chars[k] == '.' {
                    is_int = false;
                }
                k += 1;
            }
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                let mut j = k + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    is_int = false;
                    k = j;
                }
            }
            let text: String = chars[start..k].iter().collect();
            let tok = if is_int {
                text.parse::<i64>().map(Tok::Int).or_else(|_| text.parse::<f64>().map(Tok::Num))
            } else {
                text.parse::<f64>().map(Tok::Num)
            }
            .map_err(|_| ExprError::Syntax {
                line: tl,
                column: tc,
                expected: "a valid number".into(),
                found: format!("'{text}'"),
            })?;
            out.push(Spanned { tok, line: tl, column: tc });
            column += k - start;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            let text: String = chars[start..k].iter().collect();
            out.push(Spanned { tok: Tok::Ident(text), line: tl, column: tc });
            column += k - start;
            continue;
        }
        return Err(ExprError::Syntax {
            line: tl,
            column: tc,
            expected: "an expression token".into(),
            found: format!("'{c}'"),
        });
    }
    out.push(Spanned { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ExprError {
        let t = self.peek();
        ExprError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.into(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ExprError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let k = self.exponent()?;
        if self.peek().tok == Tok::Caret {
            return Err(self.error("an operator (parenthesize chained powers)"));
        }
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let paren = self.peek().tok == Tok::LParen;
        if paren {
            self.bump();
        }
        let negative = self.peek().tok == Tok::Minus;
        if negative {
            self.bump();
        }
        let k = match self.peek().tok {
            Tok::Int(k) if k <= i32::MAX as i64 => k as i32,
            _ => return Err(self.error("an integer exponent")),
        };
        self.bump();
        if paren {
            self.expect(Tok::RParen, "')'")?;
        }
        Ok(if negative { -k } else { k })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::real(x))
            }
            Tok::Int(k) => {
                self.bump();
                Ok(Expr::real(k as f64))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(&name, t.line, t.column)
            }
            _ => Err(self.error("an operand")),
        }
    }

    fn identifier(&mut self, name: &str, line: usize, column: usize) -> Result<Expr, ExprError> {
        match name {
            "i" => return Ok(Expr::ImagUnit),
            "pi" => return Ok(Expr::Const(Complex64::new(std::f64::consts::PI, 0.0))),
            "atan2" => {
                self.expect(Tok::LParen, "'(' after atan2")?;
                let y = self.expr()?;
                self.expect(Tok::Comma, "',' between atan2 arguments")?;
                let x = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                return Ok(Expr::Atan2(Box::new(y), Box::new(x)));
            }
            _ => {}
        }
        if let Some(func) = Func::from_name(name) {
            self.expect(Tok::LParen, &format!("'(' after {name}"))?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if let Some(v) = parse_var(name) {
            return Ok(Expr::Var(v));
        }
        Err(ExprError::UnknownIdentifier { name: name.to_string(), line, column })
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let (kind, digits) = if let Some(rest) = name.strip_prefix('x') {
        (true, rest)
    } else if let Some(rest) = name.strip_prefix('p') {
        (false, rest)
    } else {
        return None;
    };
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let index: usize = digits.parse().ok()?;
    Some(if kind { Var::x(index - 1) } else { Var::p(index - 1) })
}

/// Parse expression source text. Line and column numbers in errors are one-based.
pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}
