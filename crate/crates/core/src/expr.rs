//! Arithmetic expressions over leader variables `x1..xd` and follower
//! variables `y1..yp`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := power (('*' | '/') power)*
//! power   := unary ('^' power)?          right-associative
//! unary   := '-' unary | atom
//! atom    := number | variable | func '(' sum (',' sum)* ')' | '(' sum ')'
//! func    := abs | exp | log | sqrt | min | max
//! ```
//!
//! Unary minus binds tighter than `^`, so `-2^2` is `4`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Leader coordinate, zero-based.
    X(usize),
    /// Follower coordinate, zero-based.
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

fn eval_error(msg: impl Into<String>) -> Error {
    Error::ExpressionEval(msg.into())
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_at(src, 1, 1)
    }

    /// Parses with error positions offset to `line` and starting `column`.
    pub fn parse_at(src: &str, line: usize, column: usize) -> Result<Self> {
        let tokens = lex(src, line, column)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            line,
            end_column: column + src.chars().count(),
        };
        let e = p.sum()?;
        match p.peek() {
            None => Ok(e),
            Some(t) => Err(Error::syntax(line, t.column, format!("unexpected {}", t.kind))),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let v = match self {
            Expression::Num(v) => *v,
            Expression::Var(Var::X(i)) => *x
                .get(*i)
                .ok_or_else(|| eval_error(format!("x{} is out of range", i + 1)))?,
            Expression::Var(Var::Y(i)) => *y
                .get(*i)
                .ok_or_else(|| eval_error(format!("y{} is out of range", i + 1)))?,
            Expression::Neg(e) => -e.eval(x, y)?,
            Expression::Binary(op, l, r) => {
                let a = l.eval(x, y)?;
                let b = r.eval(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(eval_error("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expression::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(x, y))
                    .collect::<Result<Vec<f64>>>()?;
                match f {
                    Func::Abs => vals[0].abs(),
                    Func::Exp => vals[0].exp(),
                    Func::Log => {
                        if vals[0] <= 0.0 {
                            return Err(eval_error(format!("log of non-positive {}", vals[0])));
                        }
                        vals[0].ln()
                    }
                    Func::Sqrt => {
                        if vals[0] < 0.0 {
                            return Err(eval_error(format!("sqrt of negative {}", vals[0])));
                        }
                        vals[0].sqrt()
                    }
                    Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                    Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(eval_error(format!("non-finite value in `{self}`")))
        }
    }

    /// Visits every variable reference.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expression::Num(_) => {}
            Expression::Var(v) => f(*v),
            Expression::Neg(e) => e.for_each_var(f),
            Expression::Binary(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
            Expression::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    /// Fails with `UnknownVariable` if a variable exceeds the given dimensions.
    pub fn check_vars(&self, d: usize, p: usize) -> Result<()> {
        let mut bad = None;
        self.for_each_var(&mut |v| {
            if bad.is_none() {
                match v {
                    Var::X(i) if i >= d => bad = Some(format!("x{}", i + 1)),
                    Var::Y(i) if i >= p => bad = Some(format!("y{}", i + 1)),
                    _ => {}
                }
            }
        });
        bad.map_or(Ok(()), |v| Err(Error::UnknownVariable(v)))
    }

    /// Removes positive constant factors at the top of a product/quotient
    /// chain. A positive constant alone becomes `1`.
    pub fn without_constant_factor(&self) -> Expression {
        match self {
            Expression::Num(c) if *c > 0.0 => Expression::Num(1.0),
            Expression::Binary(BinOp::Mul, l, r) => match (l.as_ref(), r.as_ref()) {
                (Expression::Num(c), e) | (e, Expression::Num(c)) if *c > 0.0 => {
                    e.without_constant_factor()
                }
                _ => self.clone(),
            },
            Expression::Binary(BinOp::Div, l, r) => match r.as_ref() {
                Expression::Num(c) if *c > 0.0 => l.without_constant_factor(),
                _ => self.clone(),
            },
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
            Expression::Num(v) => write!(f, "{v:?}"),
            Expression::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expression::Var(Var::Y(i)) => write!(f, "y{}", i + 1),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expression::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Op(c) => write!(f, "`{c}`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::Comma => write!(f, "`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn lex(src: &str, line: usize, column: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = column + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            _ if c.is_ascii_digit() || c == '.' => {
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
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::syntax(line, col, format!("malformed number `{text}`")))?;
                out.push(Token {
                    kind: TokenKind::Num(v),
                    column: col,
                });
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(chars[start..i].iter().collect()),
                    column: col,
                });
                continue;
            }
            _ => return Err(Error::syntax(line, col, format!("unexpected character `{c}`"))),
        };
        out.push(Token { kind, column: col });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn error_here(&self, msg: &str) -> Error {
        match self.peek() {
            Some(t) => Error::syntax(self.line, t.column, format!("{msg}, found {}", t.kind)),
            None => Error::syntax(self.line, self.end_column, format!("{msg}, found end of input")),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<()> {
        if self.peek().map(|t| &t.kind) == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {what}")))
        }
    }

    fn sum(&mut self) -> Result<Expression> {
        let mut lhs = self.product()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            let rhs = self.product()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expression> {
        let mut lhs = self.power()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            let rhs = self.power()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expression> {
        let base = self.unary()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.power()?;
            return Ok(Expression::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expression> {
        let Some(tok) = self.next() else {
            self.pos -= 1;
            return Err(self.error_here("expected an operand"));
        };
        match tok.kind {
            TokenKind::Num(v) => Ok(Expression::Num(v)),
            TokenKind::LParen => {
                let e = self.sum()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(TokenKind::LParen, "`(` after function name")?;
                    let mut args = vec![self.sum()?];
                    while self.peek().map(|t| &t.kind) == Some(&TokenKind::Comma) {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    self.expect(TokenKind::RParen, "`)`")?;
                    let ok = if func.variadic() {
                        args.len() >= 2
                    } else {
                        args.len() == 1
                    };
                    if !ok {
                        return Err(Error::syntax(
                            self.line,
                            tok.column,
                            format!("wrong number of arguments to {}", func.name()),
                        ));
                    }
                    return Ok(Expression::Call(func, args));
                }
                parse_var(&name)
                    .map(Expression::Var)
                    .ok_or_else(|| Error::syntax(self.line, tok.column, format!("unknown name `{name}`")))
            }
            other => {
                self.pos -= 1;
                Err(Error::syntax(
                    self.line,
                    tok.column,
                    format!("expected an operand, found {other}"),
                ))
            }
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    match head {
        "x" => Some(Var::X(idx - 1)),
        "y" => Some(Var::Y(idx - 1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, x: &[f64], y: &[f64]) -> Result<f64> {
        Expression::parse(src)?.eval(x, y)
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("x1 + y1*y2", &[2.0], &[3.0, 4.0]).unwrap(), 14.0);
        assert_eq!(ev("y1^2 - 7*y2", &[], &[3.0, 1.0]).unwrap(), 2.0);
        assert!(matches!(ev("1/(x1-1)", &[1.0], &[]), Err(Error::ExpressionEval(_))));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", &[], &[]).unwrap(), 512.0);
        assert_eq!(ev("-2^2", &[], &[]).unwrap(), 4.0);
        assert_eq!(ev("1 - 2 - 3", &[], &[]).unwrap(), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[], &[]).unwrap(), 1.0);
        assert_eq!(ev("1 + 2 * 3 ^ 2", &[], &[]).unwrap(), 19.0);
        assert_eq!(ev("2 ^ -1", &[], &[]).unwrap(), 0.5);
        assert_eq!(ev("1.5e1 + .5", &[], &[]).unwrap(), 15.5);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("max(1, x1, 3) + min(y1, 0)", &[5.0], &[-2.0]).unwrap(), 3.0);
        assert_eq!(ev("abs(-3) + sqrt(4) + exp(0) + log(1)", &[], &[]).unwrap(), 6.0);
        assert!(ev("log(0)", &[], &[]).is_err());
        assert!(ev("sqrt(-1)", &[], &[]).is_err());
        assert!(ev("(-8)^(1/3)", &[], &[]).is_err());
        assert!(matches!(Expression::parse("min(1)"), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse("abs(1, 2)"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Expression::parse("x1 + * 2") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 6)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expression::parse("x0"), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse("z1"), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse("(x1"), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse(""), Err(Error::Syntax { .. })));
        assert!(matches!(Expression::parse("1 2"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn variable_ranges() {
        let e = Expression::parse("y3 + x1").unwrap();
        assert_eq!(e.check_vars(1, 2), Err(Error::UnknownVariable("y3".into())));
        assert!(e.check_vars(1, 3).is_ok());
    }

    #[test]
    fn constant_factor_is_stripped() {
        let base = Expression::parse("exp(y1) + x1").unwrap();
        for src in ["3*(exp(y1) + x1)", "(exp(y1) + x1)*0.5", "(exp(y1) + x1)/7", "2*((exp(y1) + x1)*3)"] {
            assert_eq!(Expression::parse(src).unwrap().without_constant_factor(), base, "{src}");
        }
        let neg = Expression::parse("-3*y1").unwrap();
        assert_eq!(neg.without_constant_factor(), neg);
    }

    fn arb_expr() -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expression::Num),
            (0usize..3).prop_map(|i| Expression::Var(Var::X(i))),
            (0usize..3).prop_map(|i| Expression::Var(Var::Y(i))),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expression::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expression::Binary(op, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expression::Call(Func::Exp, vec![e])),
                (inner.clone(), inner).prop_map(|(a, b)| Expression::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(Expression::parse(&printed).unwrap(), e);
        }

        #[test]
        fn arbitrary_input_never_panics(s in "\\PC{0,40}") {
            let _ = Expression::parse(&s);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..40)) {
            let s = String::from_utf8_lossy(&bytes);
            let _ = Expression::parse(&s);
        }
    }
}
