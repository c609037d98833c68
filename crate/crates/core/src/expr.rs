//! Expression language for the nonlinearities `f(t, u1, u2)`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?            right associative
//! atom   := number | 't' | 'u1' | 'u2' | func '(' expr ')' | '(' expr ')'
//! func   := exp | sin | cos | atan | abs | sqrt | log
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`. There is no `e`
//! constant; write `exp(1)`.

use std::fmt;

use thiserror::Error;

/// Nesting limit for parenthesized or prefixed subexpressions.
pub const MAX_DEPTH: usize = 256;

/// Default lattice size per `u` axis for [`estimate_lipschitz`].
pub const DEFAULT_DENSITY: usize = 256;

/// Byte range `[start, end)` in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    U1,
    U2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Atan,
    Abs,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Atan => "atan",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parsed expression. Equality compares structure only, not source spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected one of {}", .expected.join(", "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("invalid number literal `{text}` at byte {offset}")]
    InvalidNumber { text: String, offset: usize },
    #[error("expression nested deeper than {MAX_DEPTH} at byte {offset}")]
    TooDeep { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::InvalidNumber { offset, .. }
            | ParseError::TooDeep { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{} in subexpression at bytes {span}", match .kind {
    EvalErrorKind::DivisionByZero => "division by zero",
    EvalErrorKind::LogOfNonPositive => "log of a non-positive number",
    EvalErrorKind::SqrtOfNegative => "sqrt of a negative number",
    EvalErrorKind::NonFinite => "non-finite result",
})]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v:?}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

const EXPECT_OPERAND: &[&str] = &["number", "identifier", "`(`", "`-`"];
const EXPECT_OPERATOR: &[&str] = &["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"];

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, Span { start, end: i + 1 }));
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
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
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::InvalidNumber {
                text: text.to_string(),
                offset: start,
            })?;
            if !value.is_finite() {
                return Err(ParseError::InvalidNumber {
                    text: text.to_string(),
                    offset: start,
                });
            }
            out.push((Tok::Num(value), Span { start, end: i }));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((
                Tok::Ident(src[start..i].to_string()),
                Span { start, end: i },
            ));
        } else {
            let ch = src[start..].chars().next().unwrap_or('\u{fffd}');
            return Err(ParseError::Syntax {
                offset: start,
                found: format!("character {ch:?}"),
                expected: EXPECT_OPERAND.to_vec(),
            });
        }
    }
    out.push((
        Tok::Eof,
        Span {
            start: src.len(),
            end: src.len(),
        },
    ));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    depth: usize,
}

// Binding powers: (left, right). Higher binds tighter.
fn infix_power(tok: &Tok) -> Option<(BinOp, u8, u8)> {
    Some(match tok {
        Tok::Plus => (BinOp::Add, 1, 2),
        Tok::Minus => (BinOp::Sub, 1, 2),
        Tok::Star => (BinOp::Mul, 3, 4),
        Tok::Slash => (BinOp::Div, 3, 4),
        Tok::Caret => (BinOp::Pow, 7, 6),
        _ => return None,
    })
}

const PREFIX_MINUS_POWER: u8 = 5;

impl Parser {
    fn peek(&self) -> &(Tok, Span) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        let (tok, span) = self.peek();
        ParseError::Syntax {
            offset: span.start,
            found: tok.describe(),
            expected: expected.to_vec(),
        }
    }

    fn expect(&mut self, want: Tok, label: &'static str) -> Result<Span, ParseError> {
        if self.peek().0 == want {
            Ok(self.bump().1)
        } else {
            Err(self.syntax(&[label]))
        }
    }

    fn expr(&mut self, min_power: u8) -> Result<Expr, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::TooDeep {
                offset: self.peek().1.start,
            });
        }
        let mut lhs = self.prefix()?;
        while let Some((op, left, right)) = infix_power(&self.peek().0) {
            if left < min_power {
                break;
            }
            self.bump();
            // The exponent of `^` may carry its own sign: 2^-1.
            let rhs = self.expr(right)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let (tok, span) = self.peek().clone();
        match tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Num(v),
                    span,
                })
            }
            Tok::Minus => {
                self.bump();
                let inner = self.expr(PREFIX_MINUS_POWER)?;
                let span = span.join(inner.span);
                Ok(Expr {
                    kind: ExprKind::Neg(Box::new(inner)),
                    span,
                })
            }
            Tok::LParen => {
                self.bump();
                let mut inner = self.expr(0)?;
                let close = self
                    .expect(Tok::RParen, "`)`")
                    .map_err(|_| self.syntax(&["`)`", "`+`", "`-`", "`*`", "`/`", "`^`"]))?;
                inner.span = span.join(close);
                Ok(inner)
            }
            Tok::Ident(name) => {
                let var = match name.as_str() {
                    "t" => Some(Var::T),
                    "u1" => Some(Var::U1),
                    "u2" => Some(Var::U2),
                    _ => None,
                };
                if let Some(v) = var {
                    self.bump();
                    return Ok(Expr {
                        kind: ExprKind::Var(v),
                        span,
                    });
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier {
                        name,
                        offset: span.start,
                    });
                };
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.expr(0)?;
                let close = self
                    .expect(Tok::RParen, "`)`")
                    .map_err(|_| self.syntax(&["`)`", "`+`", "`-`", "`*`", "`/`", "`^`"]))?;
                Ok(Expr {
                    kind: ExprKind::Call(func, Box::new(arg)),
                    span: span.join(close),
                })
            }
            _ => Err(self.syntax(EXPECT_OPERAND)),
        }
    }
}

/// Parses `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr(0)?;
    if p.peek().0 != Tok::Eof {
        let expected = if p.peek().0 == Tok::RParen {
            vec!["end of input"]
        } else {
            EXPECT_OPERATOR.to_vec()
        };
        return Err(p.syntax(&expected));
    }
    Ok(e)
}

fn check(v: f64, span: Span) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError {
            kind: EvalErrorKind::NonFinite,
            span,
        })
    }
}

impl Expr {
    /// Evaluates at `(t, u1, u2)`. Division by zero, logs of non-positive
    /// numbers, square roots of negatives and any non-finite intermediate
    /// are errors.
    pub fn evaluate(&self, t: f64, u1: f64, u2: f64) -> Result<f64, EvalError> {
        let err = |kind| EvalError {
            kind,
            span: self.span,
        };
        let v = match &self.kind {
            ExprKind::Num(v) => *v,
            ExprKind::Var(Var::T) => t,
            ExprKind::Var(Var::U1) => u1,
            ExprKind::Var(Var::U2) => u2,
            ExprKind::Neg(e) => -e.evaluate(t, u1, u2)?,
            ExprKind::Binary(op, l, r) => {
                let x = l.evaluate(t, u1, u2)?;
                let y = r.evaluate(t, u1, u2)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(err(EvalErrorKind::DivisionByZero));
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            ExprKind::Call(f, arg) => {
                let x = arg.evaluate(t, u1, u2)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Atan => x.atan(),
                    Func::Abs => x.abs(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(err(EvalErrorKind::SqrtOfNegative));
                        }
                        x.sqrt()
                    }
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(err(EvalErrorKind::LogOfNonPositive));
                        }
                        x.ln()
                    }
                }
            }
        };
        check(v, self.span)
    }

    /// Whether the variable occurs anywhere in the tree.
    pub fn mentions(&self, var: Var) -> bool {
        match &self.kind {
            ExprKind::Num(_) => false,
            ExprKind::Var(v) => *v == var,
            ExprKind::Neg(e) | ExprKind::Call(_, e) => e.mentions(var),
            ExprKind::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            ExprKind::Neg(_) => 3,
            ExprKind::Binary(BinOp::Pow, ..) => 4,
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

/// Prints with the minimal parentheses that reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v:?}"),
            ExprKind::Var(Var::T) => f.write_str("t"),
            ExprKind::Var(Var::U1) => f.write_str("u1"),
            ExprKind::Var(Var::U2) => f.write_str("u2"),
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < 3)
            }
            ExprKind::Call(func, e) => write!(f, "{}({e})", func.name()),
            ExprKind::Binary(op, l, r) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    write_child(f, l, l.precedence() <= p)?;
                    f.write_str(sym)?;
                    write_child(f, r, r.precedence() < p)
                } else {
                    write_child(f, l, l.precedence() < p)?;
                    f.write_str(sym)?;
                    write_child(f, r, r.precedence() <= p)
                }
            }
        }
    }
}

/// Rectangle `[lo, hi]` in `(u1, u2)` over which slopes are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBox {
    pub u1: (f64, f64),
    pub u2: (f64, f64),
}

impl LipschitzBox {
    pub fn symmetric(radius: f64) -> Self {
        Self {
            u1: (-radius, radius),
            u2: (-radius, radius),
        }
    }
}

/// Sampled partial Lipschitz constants. These are lower bounds: the true
/// constant over the box is at least this large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub l_u1: f64,
    pub l_u2: f64,
    /// Lattice points per `u` axis.
    pub density: usize,
    pub evaluations: usize,
}

/// Max secant slope in `u1` and `u2` between neighbouring points of a
/// `density × density` lattice on `bx`, at every `t` in `t_grid`.
pub fn estimate_lipschitz_with<E>(
    mut f: impl FnMut(f64, f64, f64) -> Result<f64, E>,
    bx: &LipschitzBox,
    t_grid: &[f64],
    density: usize,
) -> Result<LipschitzEstimate, E> {
    let density = density.max(2);
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..density)
            .map(|i| lo + (hi - lo) * i as f64 / (density - 1) as f64)
            .collect()
    };
    let xs = axis(bx.u1);
    let ys = axis(bx.u2);
    let mut l1 = 0.0f64;
    let mut l2 = 0.0f64;
    let mut evaluations = 0;
    let mut prev_row = vec![0.0; density];
    let mut row = vec![0.0; density];
    for &t in t_grid {
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                row[i] = f(t, x, y)?;
            }
            evaluations += density;
            for i in 1..density {
                let dx = xs[i] - xs[i - 1];
                if dx > 0.0 {
                    l1 = l1.max((row[i] - row[i - 1]).abs() / dx);
                }
            }
            if j > 0 {
                let dy = ys[j] - ys[j - 1];
                if dy > 0.0 {
                    for i in 0..density {
                        l2 = l2.max((row[i] - prev_row[i]).abs() / dy);
                    }
                }
            }
            std::mem::swap(&mut row, &mut prev_row);
        }
    }
    Ok(LipschitzEstimate {
        l_u1: l1,
        l_u2: l2,
        density,
        evaluations,
    })
}

/// [`estimate_lipschitz_with`] for a parsed expression.
pub fn estimate_lipschitz(
    e: &Expr,
    bx: &LipschitzBox,
    t_grid: &[f64],
    density: usize,
) -> Result<LipschitzEstimate, EvalError> {
    estimate_lipschitz_with(|t, u1, u2| e.evaluate(t, u1, u2), bx, t_grid, density)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str) -> f64 {
        parse(src).unwrap().evaluate(0.0, 0.0, 0.0).unwrap()
    }

    const F1: &str = "0.01*exp(-t)*(1 + atan(u1) + atan(u2))";
    const F2: &str = "0.02*(exp(-t) + sin(u1) + sin(u2))";

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1+2*3"), 7.0);
        assert_eq!(eval("2^3^2"), 512.0);
        assert_eq!(eval("(2^3)^2"), 64.0);
        assert_eq!(eval("-2^2"), -4.0);
        assert_eq!(eval("(-2)^2"), 4.0);
        assert_eq!(eval("10-4-3"), 3.0);
        assert_eq!(eval("64/4/2"), 8.0);
        assert_eq!(eval("2^-1"), 0.5);
        assert_eq!(eval("2*-3"), -6.0);
        assert_eq!(eval("--3"), 3.0);
        assert_eq!(eval("1.5e1 + .5"), 15.5);
    }

    #[test]
    fn worked_example_nonlinearities() {
        let f1 = parse(F1).unwrap();
        assert!((f1.evaluate(0.0, 0.0, 0.0).unwrap() - 0.01).abs() < 1e-17);
        let f2 = parse(F2).unwrap();
        let got = f2.evaluate(1.0, 0.0, 0.0).unwrap();
        assert!((got - 0.02 / std::f64::consts::E).abs() < 1e-17);
        let z = parse("u1 - u1").unwrap();
        for v in [-3.0, 0.0, 1e10] {
            assert_eq!(z.evaluate(1.0, v, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn unknown_identifiers_are_rejected() {
        assert_eq!(
            parse("1 + e").unwrap_err(),
            ParseError::UnknownIdentifier {
                name: "e".into(),
                offset: 4
            }
        );
        assert!(matches!(
            parse("tan(u1)"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_offset_and_expectations() {
        match parse("1 + * 2").unwrap_err() {
            ParseError::Syntax {
                offset, expected, ..
            } => {
                assert_eq!(offset, 4);
                assert!(expected.contains(&"number"));
            }
            e => panic!("{e:?}"),
        }
        match parse("(1 + 2").unwrap_err() {
            ParseError::Syntax {
                offset, expected, ..
            } => {
                assert_eq!(offset, 6);
                assert!(expected.contains(&"`)`"));
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(
            parse("exp 1"),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            parse("1 2"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse(""),
            Err(ParseError::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse("1 $ 2"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse("1.2.3"),
            Err(ParseError::InvalidNumber { .. })
        ));
        assert!(matches!(
            parse("1e999"),
            Err(ParseError::InvalidNumber { .. })
        ));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = "(".repeat(100_000) + "1" + &")".repeat(100_000);
        assert!(matches!(parse(&src), Err(ParseError::TooDeep { .. })));
        let src = "-".repeat(100_000) + "1";
        assert!(matches!(parse(&src), Err(ParseError::TooDeep { .. })));
    }

    #[test]
    fn evaluation_errors() {
        let e = parse("1 + 1/(u1 - 2)").unwrap();
        let err = e.evaluate(0.0, 2.0, 0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.span, Span { start: 4, end: 14 });
        let err = parse("log(u2)")
            .unwrap()
            .evaluate(0.0, 0.0, 0.0)
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogOfNonPositive);
        let err = parse("sqrt(-1)")
            .unwrap()
            .evaluate(0.0, 0.0, 0.0)
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::SqrtOfNegative);
        let err = parse("exp(1000)")
            .unwrap()
            .evaluate(0.0, 0.0, 0.0)
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::NonFinite);
        let err = parse("(-8)^(1/3)")
            .unwrap()
            .evaluate(0.0, 0.0, 0.0)
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::NonFinite);
    }

    #[test]
    fn display_round_trips() {
        for src in [
            F1,
            F2,
            "-2^2",
            "(-2)^2",
            "2^3^2",
            "(2^3)^2",
            "1 - (2 - 3)",
            "-(u1*u2)",
            "2^-t",
            "1e-300*t",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn lipschitz_of_atan_approaches_one() {
        let e = parse("atan(u1)").unwrap();
        let est = estimate_lipschitz(&e, &LipschitzBox::symmetric(10.0), &[0.0], DEFAULT_DENSITY)
            .unwrap();
        assert!(est.l_u1 <= 1.0 && est.l_u1 >= 0.99, "{est:?}");
        assert_eq!(est.l_u2, 0.0);
    }

    #[test]
    fn lipschitz_of_linear_is_exact() {
        let e = parse("0.5*u2").unwrap();
        let est = estimate_lipschitz(&e, &LipschitzBox::symmetric(3.0), &[0.0, 1.0], 64).unwrap();
        assert!((est.l_u2 - 0.5).abs() < 1e-12);
        assert_eq!(est.l_u1, 0.0);
        assert_eq!(est.evaluations, 2 * 64 * 64);
    }

    #[test]
    fn lipschitz_of_worked_example_within_claimed_constants() {
        let ts: Vec<f64> = (1..=9).map(f64::from).collect();
        let est = estimate_lipschitz(
            &parse(F1).unwrap(),
            &LipschitzBox::symmetric(1.0),
            &ts,
            DEFAULT_DENSITY,
        )
        .unwrap();
        assert!(est.l_u1 <= 0.01 && est.l_u2 <= 0.01, "{est:?}");
        let est = estimate_lipschitz(
            &parse(F2).unwrap(),
            &LipschitzBox::symmetric(1.0),
            &ts,
            DEFAULT_DENSITY,
        )
        .unwrap();
        assert!(est.l_u1 <= 0.02 && est.l_u2 <= 0.02, "{est:?}");
        assert!(est.l_u1 > 0.0199);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = String> {
            let leaf = prop_oneof![
                (0.0f64..1e3).prop_map(|v| format!("{v}")),
                Just("t".to_string()),
                Just("u1".to_string()),
                Just("u2".to_string()),
            ];
            leaf.prop_recursive(6, 64, 2, |inner| {
                prop_oneof![
                    (
                        inner.clone(),
                        inner.clone(),
                        prop::sample::select(vec!["+", "-", "*", "/", "^"])
                    )
                        .prop_map(|(a, b, op)| format!("({a}){op}({b})")),
                    inner.clone().prop_map(|a| format!("-{a}")),
                    (
                        inner,
                        prop::sample::select(vec![
                            "exp", "sin", "cos", "atan", "abs", "sqrt", "log"
                        ])
                    )
                        .prop_map(|(a, f)| format!("{f}({a})")),
                ]
            })
        }

        proptest! {
            #[test]
            fn pretty_print_reparses_identically(src in arb_expr()) {
                let e = parse(&src).unwrap();
                let again = parse(&e.to_string()).unwrap();
                prop_assert_eq!(again, e);
            }

            #[test]
            fn evaluation_is_pure(src in arb_expr(), t in -5.0f64..5.0, u1 in -5.0f64..5.0, u2 in -5.0f64..5.0) {
                let e = parse(&src).unwrap();
                let a = e.evaluate(t, u1, u2).map(f64::to_bits);
                let b = e.evaluate(t, u1, u2).map(f64::to_bits);
                prop_assert_eq!(a, b);
            }

            #[test]
            fn parse_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
                let _ = parse(&String::from_utf8_lossy(&bytes));
            }

            #[test]
            fn parse_never_panics_on_grammar_soup(
                parts in prop::collection::vec(
                    prop::sample::select(vec!["(", ")", "-", "+", "*", "/", "^", "1", "2.5", "t", "u1", "exp", "sin", " ", "e", "."]),
                    0..40,
                )
            ) {
                let _ = parse(&parts.concat());
            }
        }
    }
}
