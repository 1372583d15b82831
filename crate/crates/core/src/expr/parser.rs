use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp};
use super::token::{tokenize, unescape, LexError, Token, TokenKind};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("parse error at offset {position}: expected {expected}, found {found}")]
    Unexpected {
        position: usize,
        expected: String,
        found: String,
    },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Lex(e) => e.position,
            ParseError::Unexpected { position, .. } => *position,
        }
    }
}

pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: source.len(),
    };
    let expr = parser.or()?;
    if let Some(tok) = parser.peek() {
        return Err(parser.unexpected_at(tok, "end of expression"));
    }
    Ok(expr)
}

struct Parser<'src> {
    tokens: Vec<Token<'src>>,
    pos: usize,
    end: usize,
}

impl<'src> Parser<'src> {
    fn peek(&self) -> Option<Token<'src>> {
        self.tokens.get(self.pos).copied()
    }

    fn peek_is(&self, text: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.text == text && t.kind != TokenKind::String)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek_is(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> Result<(), ParseError> {
        if self.eat(text) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{text}'")))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(tok) => self.unexpected_at(tok, expected),
            None => ParseError::Unexpected {
                position: self.end,
                expected: expected.into(),
                found: "end of input".into(),
            },
        }
    }

    fn unexpected_at(&self, tok: Token<'_>, expected: &str) -> ParseError {
        ParseError::Unexpected {
            position: tok.position,
            expected: expected.into(),
            found: format!("'{}'", tok.text),
        }
    }

    fn binary_chain(
        &mut self,
        ops: &[&str],
        next: fn(&mut Self) -> Result<Expr, ParseError>,
    ) -> Result<Expr, ParseError> {
        let mut lhs = next(self)?;
        while let Some(op) = ops.iter().find(|op| self.peek_is(op)) {
            self.pos += 1;
            let rhs = next(self)?;
            let op = BinaryOp::from_symbol(op).expect("operator table");
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        self.binary_chain(&["or"], Self::and)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        self.binary_chain(&["and"], Self::cmp)
    }

    fn cmp(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add()?;
        for op in ["==", "!=", "<=", ">=", "<", ">"] {
            if self.eat(op) {
                let rhs = self.add()?;
                let op = BinaryOp::from_symbol(op).expect("operator table");
                return Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, ParseError> {
        self.binary_chain(&["+", "-"], Self::mul)
    }

    fn mul(&mut self) -> Result<Expr, ParseError> {
        self.binary_chain(&["*", "/", "%"], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("not") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        if self.eat("-") {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.pow()
    }

    fn pow(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat("^") {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.unexpected("an operand"));
        };
        match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Expr::Literal(number_literal(tok)?))
            }
            TokenKind::String => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Text(unescape(tok.text))))
            }
            TokenKind::Keyword if tok.text == "true" || tok.text == "false" => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Bool(tok.text == "true")))
            }
            // `and(a, b)` / `or(a, b)` reach the registry builtins of the same name
            TokenKind::Keyword
                if matches!(tok.text, "and" | "or")
                    && self.tokens.get(self.pos + 1).is_some_and(|t| t.text == "(") =>
            {
                self.pos += 1;
                self.call(tok)
            }
            TokenKind::Identifier => {
                self.pos += 1;
                if self.peek_is("(") {
                    self.call(tok)
                } else {
                    Ok(Expr::Param(tok.text.to_owned()))
                }
            }
            TokenKind::Punctuation if tok.text == "(" => {
                self.pos += 1;
                let inner = self.or()?;
                self.expect(")")?;
                Ok(inner)
            }
            _ => Err(self.unexpected_at(tok, "an operand")),
        }
    }

    fn call(&mut self, name: Token<'src>) -> Result<Expr, ParseError> {
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.or()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        if name.text == "if" {
            let [test, then, otherwise]: [Expr; 3] =
                args.try_into()
                    .map_err(|args: Vec<Expr>| ParseError::Unexpected {
                        position: name.position,
                        expected: "3 arguments to if".into(),
                        found: format!("{} arguments", args.len()),
                    })?;
            return Ok(Expr::Conditional(
                Box::new(test),
                Box::new(then),
                Box::new(otherwise),
            ));
        }
        Ok(Expr::Call(name.text.to_owned(), args))
    }
}

fn number_literal(tok: Token<'_>) -> Result<Value, ParseError> {
    let is_integer = tok.text.bytes().all(|b| b.is_ascii_digit());
    if is_integer {
        if let Ok(i) = tok.text.parse::<i64>() {
            return Ok(Value::Int(i));
        }
    }
    tok.text
        .parse::<f64>()
        .ok()
        .filter(|r| r.is_finite())
        .map(Value::Real)
        .ok_or_else(|| ParseError::Unexpected {
            position: tok.position,
            expected: "a finite number".into(),
            found: format!("'{}'", tok.text),
        })
}
