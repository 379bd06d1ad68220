//! A small arithmetic expression language for metric and embedding entries.
//!
//! The grammar supports numeric literals, named variables, the binary
//! operators `+ - * / ^`, unary minus, a fixed set of math functions and
//! parentheses.  `^` binds tighter than unary minus and associates to the
//! right, so `-x^2` means `-(x^2)` and `2^3^2` means `2^(3^2)`.
//!
//! Parsing produces an [`Expr`] tree that can be evaluated, differentiated
//! symbolically and printed back.  Printing inserts parentheses only where
//! the tree shape requires them, and `parse(&ast.to_string())` returns the
//! original tree.

use std::fmt;

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure with the byte offset of the offending token and the set of
/// token kinds that would have been accepted there.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub position: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at byte {}: expected {}, found {}",
            self.position,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number `{v}`"),
            Token::Ident(s) => format!("`{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
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
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    position: start,
                    expected: vec!["number"],
                    found: format!("`{text}`"),
                })?;
                tokens.push((Token::Number(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(input[start..i].to_string()), start));
            }
            _ => {
                let ch = input[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    position: i,
                    expected: vec!["number", "identifier", "operator", "`(`", "`)`"],
                    found: format!("`{ch}`"),
                });
            }
        }
    }
    tokens.push((Token::End, bytes.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: Vec<&'static str>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            expected,
            found: self.peek().describe(),
        })
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Token::Minus) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Token::Caret) {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Token::Number(v) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Token::Ident(name) => {
                let at = self.offset();
                self.bump();
                if matches!(self.peek(), Token::LParen) {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError {
                        position: at,
                        expected: vec![
                            "sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh",
                        ],
                        found: format!("`{name}`"),
                    })?;
                    self.bump();
                    let arg = self.sum()?;
                    if !matches!(self.peek(), Token::RParen) {
                        return self.fail(vec!["`)`"]);
                    }
                    self.bump();
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Token::LParen => {
                self.bump();
                let inner = self.sum()?;
                if !matches!(self.peek(), Token::RParen) {
                    return self.fail(vec!["`)`"]);
                }
                self.bump();
                Ok(inner)
            }
            _ => self.fail(vec!["number", "identifier", "`(`", "`-`"]),
        }
    }
}

/// Parses one expression; the whole input must be consumed.
pub fn parse(input: &str) -> Result<Expr, ParseError> {
    let tokens = lex(input)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.sum()?;
    if !matches!(parser.peek(), Token::End) {
        return parser.fail(vec!["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"]);
    }
    Ok(expr)
}

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Number(v) if *v < 0.0 => 3,
        Expr::Number(..) | Expr::Var(..) | Expr::Call(..) => 5,
    }
}

fn write_prec(expr: &Expr, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
    let wrap = precedence(expr) < min;
    if wrap {
        write!(f, "(")?;
    }
    match expr {
        Expr::Number(v) => write!(f, "{v}")?,
        Expr::Var(name) => write!(f, "{name}")?,
        Expr::Neg(inner) => {
            write!(f, "-")?;
            write_prec(inner, f, 3)?;
        }
        Expr::Add(l, r) => {
            write_prec(l, f, 1)?;
            write!(f, " + ")?;
            write_prec(r, f, 2)?;
        }
        Expr::Sub(l, r) => {
            write_prec(l, f, 1)?;
            write!(f, " - ")?;
            write_prec(r, f, 2)?;
        }
        Expr::Mul(l, r) => {
            write_prec(l, f, 2)?;
            write!(f, "*")?;
            write_prec(r, f, 3)?;
        }
        Expr::Div(l, r) => {
            write_prec(l, f, 2)?;
            write!(f, "/")?;
            write_prec(r, f, 3)?;
        }
        Expr::Pow(l, r) => {
            write_prec(l, f, 5)?;
            write!(f, "^")?;
            write_prec(r, f, 3)?;
        }
        Expr::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_prec(arg, f, 0)?;
            write!(f, ")")?;
        }
    }
    if wrap {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, f, 0)
    }
}

fn num(v: f64) -> Expr {
    Expr::Number(v)
}

fn add(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Number(a), Expr::Number(b)) => num(a + b),
        (Expr::Number(a), _) if *a == 0.0 => r,
        (_, Expr::Number(b)) if *b == 0.0 => l,
        _ => Expr::Add(Box::new(l), Box::new(r)),
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Number(a), Expr::Number(b)) => num(a - b),
        (_, Expr::Number(b)) if *b == 0.0 => l,
        (Expr::Number(a), _) if *a == 0.0 => Expr::Neg(Box::new(r)),
        _ => Expr::Sub(Box::new(l), Box::new(r)),
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Number(a), Expr::Number(b)) => num(a * b),
        (Expr::Number(a), _) if *a == 0.0 => num(0.0),
        (_, Expr::Number(b)) if *b == 0.0 => num(0.0),
        (Expr::Number(a), _) if *a == 1.0 => r,
        (_, Expr::Number(b)) if *b == 1.0 => l,
        _ => Expr::Mul(Box::new(l), Box::new(r)),
    }
}

fn div(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Number(a), _) if *a == 0.0 => num(0.0),
        (_, Expr::Number(b)) if *b == 1.0 => l,
        _ => Expr::Div(Box::new(l), Box::new(r)),
    }
}

fn pow(l: Expr, r: Expr) -> Expr {
    match &r {
        Expr::Number(b) if *b == 1.0 => l,
        Expr::Number(b) if *b == 0.0 => num(1.0),
        _ => Expr::Pow(Box::new(l), Box::new(r)),
    }
}

fn call(func: Func, arg: Expr) -> Expr {
    Expr::Call(func, Box::new(arg))
}

impl Expr {
    /// Evaluates the tree; `var` must be defined for every variable name
    /// that occurs in it.
    pub fn eval<F: Fn(&str) -> f64>(&self, var: &F) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Var(name) => var(name),
            Expr::Neg(inner) => -inner.eval(var),
            Expr::Add(l, r) => l.eval(var) + r.eval(var),
            Expr::Sub(l, r) => l.eval(var) - r.eval(var),
            Expr::Mul(l, r) => l.eval(var) * r.eval(var),
            Expr::Div(l, r) => l.eval(var) / r.eval(var),
            Expr::Pow(l, r) => l.eval(var).powf(r.eval(var)),
            Expr::Call(func, arg) => func.apply(arg.eval(var)),
        }
    }

    /// Collects the variable names that occur in the tree.
    pub fn variables(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Number(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) => inner.variables(out),
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r)
            | Expr::Pow(l, r) => {
                l.variables(out);
                r.variables(out);
            }
            Expr::Call(_, arg) => arg.variables(out),
        }
    }

    /// Symbolic partial derivative with respect to `var`.
    ///
    /// The result is lightly simplified (constant folding, dropped zero and
    /// unit factors) so that repeated differentiation stays compact.
    pub fn derivative(&self, var: &str) -> Expr {
        match self {
            Expr::Number(_) => num(0.0),
            Expr::Var(name) => num(if name == var { 1.0 } else { 0.0 }),
            Expr::Neg(inner) => match inner.derivative(var) {
                Expr::Number(v) => num(-v),
                d => Expr::Neg(Box::new(d)),
            },
            Expr::Add(l, r) => add(l.derivative(var), r.derivative(var)),
            Expr::Sub(l, r) => sub(l.derivative(var), r.derivative(var)),
            Expr::Mul(l, r) => add(
                mul(l.derivative(var), (**r).clone()),
                mul((**l).clone(), r.derivative(var)),
            ),
            Expr::Div(l, r) => div(
                sub(
                    mul(l.derivative(var), (**r).clone()),
                    mul((**l).clone(), r.derivative(var)),
                ),
                pow((**r).clone(), num(2.0)),
            ),
            Expr::Pow(l, r) => {
                let dl = l.derivative(var);
                let dr = r.derivative(var);
                if dr == num(0.0) {
                    // d/dx f^c = c * f^(c-1) * f'
                    let exponent = sub((**r).clone(), num(1.0));
                    mul(mul((**r).clone(), pow((**l).clone(), exponent)), dl)
                } else {
                    // d/dx f^g = f^g * (g' log f + g f'/f)
                    mul(
                        (*self).clone(),
                        add(
                            mul(dr, call(Func::Log, (**l).clone())),
                            div(mul((**r).clone(), dl), (**l).clone()),
                        ),
                    )
                }
            }
            Expr::Call(func, arg) => {
                let da = arg.derivative(var);
                let a = (**arg).clone();
                match func {
                    Func::Sin => mul(call(Func::Cos, a), da),
                    Func::Cos => mul(Expr::Neg(Box::new(call(Func::Sin, a))), da),
                    Func::Tan => div(da, pow(call(Func::Cos, a), num(2.0))),
                    Func::Exp => mul(call(Func::Exp, a), da),
                    Func::Log => div(da, a),
                    Func::Sqrt => div(da, mul(num(2.0), call(Func::Sqrt, a))),
                    Func::Sinh => mul(call(Func::Cosh, a), da),
                    Func::Cosh => mul(call(Func::Sinh, a), da),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_closed(expr: &Expr) -> f64 {
        expr.eval(&|_| f64::NAN)
    }

    #[test]
    fn literals_and_precedence() {
        assert_eq!(eval_closed(&parse("2 + 3*4").unwrap()), 14.0);
        assert_eq!(eval_closed(&parse("(2 + 3)*4").unwrap()), 20.0);
        assert_eq!(eval_closed(&parse("2^3^2").unwrap()), 512.0);
        assert_eq!(eval_closed(&parse("-2^2").unwrap()), -4.0);
        assert_eq!(eval_closed(&parse("2^-1").unwrap()), 0.5);
        assert_eq!(eval_closed(&parse("10 - 4 - 3").unwrap()), 3.0);
        assert_eq!(eval_closed(&parse("12/3/2").unwrap()), 2.0);
        assert_eq!(eval_closed(&parse("1.5e2").unwrap()), 150.0);
    }

    #[test]
    fn function_evaluation() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let e = parse("sin(x0)^2").unwrap();
        assert!((e.eval(&|_| half_pi) - 1.0).abs() < 1e-15);

        let e = parse("1/(1 - 2/x0)").unwrap();
        assert!((e.eval(&|_| 4.0) - 2.0).abs() < 1e-15);

        let e = parse("sqrt(cosh(x)^2 - sinh(x)^2)").unwrap();
        assert!((e.eval(&|_| 0.7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variable_collection() {
        let e = parse("x0*sin(x1) + x0^2").unwrap();
        let mut names = std::collections::BTreeSet::new();
        e.variables(&mut names);
        let names: Vec<_> = names.into_iter().collect();
        assert_eq!(names, vec!["x0".to_string(), "x1".to_string()]);
    }

    #[test]
    fn error_positions_and_expectations() {
        let err = parse("1 +* 2").unwrap_err();
        assert_eq!(err.position, 3);
        assert!(err.expected.contains(&"number"));

        let err = parse("sin(x").unwrap_err();
        assert_eq!(err.position, 5);
        assert_eq!(err.expected, vec!["`)`"]);

        let err = parse("2 $ 3").unwrap_err();
        assert_eq!(err.position, 2);

        let err = parse("frob(x)").unwrap_err();
        assert_eq!(err.position, 0);
        assert!(err.expected.contains(&"sqrt"));

        let err = parse("1 2").unwrap_err();
        assert_eq!(err.position, 2);
        assert!(err.expected.contains(&"end of input"));
    }

    #[test]
    fn printing_inserts_minimal_parentheses() {
        let cases = [
            "x + y*z",
            "(x + y)*z",
            "x - (y - z)",
            "x/(y*z)",
            "-(x + y)",
            "(-x)^2",
            "-x^2",
            "x^-y",
            "(x^y)^z",
            "x^y^z",
            "sin(x + y)",
        ];
        for text in cases {
            let ast = parse(text).unwrap();
            assert_eq!(ast.to_string(), text, "canonical form of `{text}`");
        }
    }

    #[test]
    fn derivative_rules() {
        let x = |v: f64| move |_: &str| v;

        let d = parse("x^3").unwrap().derivative("x");
        assert!((d.eval(&x(2.0)) - 12.0).abs() < 1e-12);

        let d = parse("sin(x)*cos(x)").unwrap().derivative("x");
        let t = 0.3_f64;
        assert!((d.eval(&x(t)) - (2.0 * t).cos()).abs() < 1e-12);

        let d = parse("1/x^2").unwrap().derivative("x");
        assert!((d.eval(&x(2.0)) + 0.25).abs() < 1e-12);

        let d = parse("x^x").unwrap().derivative("x");
        let t = 1.7_f64;
        assert!((d.eval(&x(t)) - t.powf(t) * (t.ln() + 1.0)).abs() < 1e-10);

        let d = parse("log(sqrt(x))").unwrap().derivative("x");
        assert!((d.eval(&x(3.0)) - 1.0 / 6.0).abs() < 1e-12);

        let d = parse("y^2").unwrap().derivative("x");
        assert_eq!(d, Expr::Number(0.0));
    }

    #[test]
    fn second_derivatives_stay_finite() {
        let g = parse("1/x1^2").unwrap();
        let d1 = g.derivative("x1");
        let d2 = d1.derivative("x1");
        let at = |_: &str| 2.0;
        assert!((d1.eval(&at) + 2.0 / 8.0).abs() < 1e-12);
        assert!((d2.eval(&at) - 6.0 / 16.0).abs() < 1e-12);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| Expr::Number(n as f64 / 8.0)),
            prop_oneof![Just("x0"), Just("x1"), Just("u0")]
                .prop_map(|s| Expr::Var(s.to_string())),
        ];
        leaf.prop_recursive(5, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Add(Box::new(l), Box::new(r))),
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Sub(Box::new(l), Box::new(r))),
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Mul(Box::new(l), Box::new(r))),
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Div(Box::new(l), Box::new(r))),
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Expr::Pow(Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (0usize..8, inner).prop_map(|(k, e)| Expr::Call(
                    Func::ALL[k],
                    Box::new(e)
                )),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn print_then_parse_is_identity(ast in arb_expr()) {
            let printed = ast.to_string();
            let reparsed = parse(&printed)
                .unwrap_or_else(|e| panic!("`{printed}` failed to parse: {e}"));
            prop_assert_eq!(reparsed, ast);
        }
    }
}
