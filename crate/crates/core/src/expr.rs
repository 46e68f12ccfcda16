//! Coordinate expression parser and forward-mode jet evaluation.
//!
//! Expressions are scalar functions of chart coordinates (`x1..xn`, plus
//! `y1..yn` on holomorphic charts). Derivatives up to order 3 are obtained by
//! truncated Taylor (jet) arithmetic during evaluation; nothing in this crate
//! differentiates symbolically or by finite differences internally.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' integer)?
//! atom   := number | ident | '(' expr ')' | func '(' expr ')' | '-' atom
//! func   := sin | cos | exp | log | sqrt
//! ident  := [a-z][a-z0-9]*
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Maximum supported jet order.
pub const MAX_ORDER: usize = 3;

/// Named chart variables; determines both parsing and the evaluation point
/// layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSet {
    names: Vec<String>,
}

impl VarSet {
    /// Real chart variables `x1..xn`.
    pub fn base(n: usize) -> Arc<VarSet> {
        Arc::new(VarSet {
            names: (1..=n).map(|i| format!("x{i}")).collect(),
        })
    }

    /// Holomorphic chart variables `x1..xn, y1..yn` with `z_j = x_j + i y_j`.
    /// The real chart is ordered all-x-then-all-y.
    pub fn holomorphic(n: usize) -> Arc<VarSet> {
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.extend((1..=n).map(|i| format!("y{i}")));
        Arc::new(VarSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Ast {
    Num(f64),
    Var(usize),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i32),
    Neg(Box<Ast>),
    Call(Func, Box<Ast>),
}

/// A parsed, immutable scalar expression over a fixed [`VarSet`].
#[derive(Clone, Debug)]
pub struct Expression {
    ast: Ast,
    vars: Arc<VarSet>,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast && self.vars == other.vars
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("arity mismatch at byte {offset}: {func} takes exactly one argument")]
    ArityMismatch { offset: usize, func: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("domain error: {reason} in `{subexpr}`")]
    Domain { reason: String, subexpr: String },
    #[error("point dimension {got} does not match chart dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jet order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a VarSet,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Ast::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.integer()?;
            return Ok(Ast::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return self.syntax("expected integer exponent after `^`");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<i32>().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("exponent `{text}` out of range"),
        })
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            None => self.syntax("unexpected end of input, expected a value"),
            Some(b'-') => {
                self.pos += 1;
                let inner = self.atom()?;
                Ok(Ast::Neg(Box::new(inner)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.syntax("expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_lowercase() => self.ident(),
            Some(c) => self.syntax(format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Ast, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return self.syntax("expected digits after decimal point");
            }
        }
        if matches!(self.src.get(self.pos), Some(&b'e') | Some(&b'E')) {
            // Only treat as exponent when followed by digits or a signed digit
            // run; otherwise leave it for the identifier-looking error path.
            let mut probe = self.pos + 1;
            if matches!(self.src.get(probe), Some(&b'+') | Some(&b'-')) {
                probe += 1;
            }
            if self.src.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Ast::Num(v)),
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Ast, ParseError> {
        let start = self.pos;
        self.pos += 1;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if let Some(func) = Func::from_name(&name) {
            if self.peek() != Some(b'(') {
                return self.syntax(format!("expected `(` after function `{name}`"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    Ok(Ast::Call(func, Box::new(arg)))
                }
                Some(b',') => Err(ParseError::ArityMismatch {
                    offset: self.pos,
                    func: name,
                }),
                _ => self.syntax("expected `)`"),
            }
        } else if let Some(idx) = self.vars.index_of(&name) {
            Ok(Ast::Var(idx))
        } else {
            Err(ParseError::UnknownIdentifier {
                offset: start,
                name,
            })
        }
    }
}

impl Expression {
    /// Parse `text` against the chart variables `vars`.
    pub fn parse(text: &str, vars: &Arc<VarSet>) -> Result<Expression, ParseError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            vars,
        };
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return p.syntax("unexpected trailing input");
        }
        Ok(Expression {
            ast,
            vars: Arc::clone(vars),
        })
    }

    /// The constant expression `c` (negatives are wrapped in unary minus so
    /// the pretty-printed form re-parses to a structurally equal tree).
    pub fn number(c: f64, vars: &Arc<VarSet>) -> Expression {
        assert!(c.is_finite(), "expression constants must be finite");
        let ast = if c < 0.0 {
            Ast::Neg(Box::new(Ast::Num(-c)))
        } else {
            Ast::Num(c)
        };
        Expression {
            ast,
            vars: Arc::clone(vars),
        }
    }

    pub fn zero(vars: &Arc<VarSet>) -> Expression {
        Expression::number(0.0, vars)
    }

    /// The coordinate function with index `i`.
    pub fn variable(i: usize, vars: &Arc<VarSet>) -> Expression {
        assert!(i < vars.len(), "variable index out of range");
        Expression {
            ast: Ast::Var(i),
            vars: Arc::clone(vars),
        }
    }

    pub fn product(a: &Expression, b: &Expression) -> Expression {
        assert_eq!(a.vars, b.vars, "mismatched charts");
        Expression {
            ast: Ast::Mul(Box::new(a.ast.clone()), Box::new(b.ast.clone())),
            vars: Arc::clone(&a.vars),
        }
    }

    /// The expression `c * self`.
    pub fn scaled(&self, c: f64) -> Expression {
        let coeff = Expression::number(c, &self.vars);
        Expression {
            ast: Ast::Mul(Box::new(coeff.ast), Box::new(self.ast.clone())),
            vars: Arc::clone(&self.vars),
        }
    }

    pub fn negated(&self) -> Expression {
        Expression {
            ast: Ast::Neg(Box::new(self.ast.clone())),
            vars: Arc::clone(&self.vars),
        }
    }

    pub fn sum(a: &Expression, b: &Expression) -> Expression {
        assert_eq!(a.vars, b.vars, "mismatched charts");
        Expression {
            ast: Ast::Add(Box::new(a.ast.clone()), Box::new(b.ast.clone())),
            vars: Arc::clone(&a.vars),
        }
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    /// Evaluate with all partial derivatives up to `order` (at most 3).
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet, EvalError> {
        if order > MAX_ORDER {
            return Err(EvalError::OrderTooHigh(order));
        }
        if point.len() != self.vars.len() {
            return Err(EvalError::DimensionMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        eval_ast(&self.ast, point, order, &self.vars)
    }

    /// Plain value at a point.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Ok(self.eval_jet(point, 0)?.value)
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self.ast, Ast::Num(v) if v == 0.0)
    }
}

fn fmt_ast(ast: &Ast, vars: &VarSet, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match ast {
        Ast::Num(v) => write!(f, "{v}"),
        Ast::Var(i) => write!(f, "{}", vars.name(*i)),
        Ast::Add(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, vars, f)?;
            write!(f, " + ")?;
            fmt_ast(b, vars, f)?;
            write!(f, ")")
        }
        Ast::Sub(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, vars, f)?;
            write!(f, " - ")?;
            fmt_ast(b, vars, f)?;
            write!(f, ")")
        }
        Ast::Mul(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, vars, f)?;
            write!(f, " * ")?;
            fmt_ast(b, vars, f)?;
            write!(f, ")")
        }
        Ast::Div(a, b) => {
            write!(f, "(")?;
            fmt_ast(a, vars, f)?;
            write!(f, " / ")?;
            fmt_ast(b, vars, f)?;
            write!(f, ")")
        }
        Ast::Pow(a, k) => {
            write!(f, "(")?;
            fmt_ast(a, vars, f)?;
            write!(f, "^{k})")
        }
        Ast::Neg(a) => {
            write!(f, "(-")?;
            fmt_ast(a, vars, f)?;
            write!(f, ")")
        }
        Ast::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            fmt_ast(a, vars, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_ast(&self.ast, &self.vars, f)
    }
}

// ---------------------------------------------------------------------------
// jets
// ---------------------------------------------------------------------------

/// Value and dense partial derivatives up to a requested order at one point.
///
/// Mixed partials are exactly symmetric under index permutation; the full
/// symmetric arrays are stored for straightforward indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub order: usize,
    pub nvars: usize,
    pub value: f64,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, nvars: usize, order: usize) -> Jet {
        Jet {
            order,
            nvars,
            value,
            d1: if order >= 1 {
                vec![0.0; nvars]
            } else {
                Vec::new()
            },
            d2: if order >= 2 {
                vec![0.0; nvars * nvars]
            } else {
                Vec::new()
            },
            d3: if order >= 3 {
                vec![0.0; nvars * nvars * nvars]
            } else {
                Vec::new()
            },
        }
    }

    pub fn variable(value: f64, index: usize, nvars: usize, order: usize) -> Jet {
        let mut j = Jet::constant(value, nvars, order);
        if order >= 1 {
            j.d1[index] = 1.0;
        }
        j
    }

    #[inline]
    pub fn d1(&self, i: usize) -> f64 {
        self.d1[i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.nvars + j]
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[(i * self.nvars + j) * self.nvars + k]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.d1
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.order, other.order);
        debug_assert_eq!(self.nvars, other.nvars);
        Jet {
            order: self.order,
            nvars: self.nvars,
            value: f(self.value, other.value),
            d1: self
                .d1
                .iter()
                .zip(&other.d1)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            d2: self
                .d2
                .iter()
                .zip(&other.d2)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            d3: self
                .d3
                .iter()
                .zip(&other.d3)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet {
        Jet {
            order: self.order,
            nvars: self.nvars,
            value: -self.value,
            d1: self.d1.iter().map(|a| -a).collect(),
            d2: self.d2.iter().map(|a| -a).collect(),
            d3: self.d3.iter().map(|a| -a).collect(),
        }
    }

    /// Truncated Leibniz product.
    pub fn mul(&self, other: &Jet) -> Jet {
        let n = self.nvars;
        let mut out = Jet::constant(self.value * other.value, n, self.order);
        if self.order >= 1 {
            for i in 0..n {
                out.d1[i] = self.d1[i] * other.value + self.value * other.d1[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.d2[i * n + j] = self.d2(i, j) * other.value
                        + self.d1[i] * other.d1[j]
                        + self.d1[j] * other.d1[i]
                        + self.value * other.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = self.d3(i, j, k) * other.value
                            + self.d2(i, j) * other.d1[k]
                            + self.d2(i, k) * other.d1[j]
                            + self.d2(j, k) * other.d1[i]
                            + self.d1[i] * other.d2(j, k)
                            + self.d1[j] * other.d2(i, k)
                            + self.d1[k] * other.d2(i, j)
                            + self.value * other.d3(i, j, k);
                        out.d3[(i * n + j) * n + k] = v;
                    }
                }
            }
        }
        out
    }

    /// Compose with a scalar function given its derivatives
    /// `[phi(u), phi'(u), phi''(u), phi'''(u)]` at `u = self.value`
    /// (Faa di Bruno truncated at order 3).
    fn compose(&self, d: [f64; 4]) -> Jet {
        let n = self.nvars;
        let mut out = Jet::constant(d[0], n, self.order);
        if self.order >= 1 {
            for i in 0..n {
                out.d1[i] = d[1] * self.d1[i];
            }
        }
        if self.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    out.d2[i * n + j] = d[2] * self.d1[i] * self.d1[j] + d[1] * self.d2(i, j);
                }
            }
        }
        if self.order >= 3 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = d[3] * self.d1[i] * self.d1[j] * self.d1[k]
                            + d[2]
                                * (self.d2(i, j) * self.d1[k]
                                    + self.d2(i, k) * self.d1[j]
                                    + self.d2(j, k) * self.d1[i])
                            + d[1] * self.d3(i, j, k);
                        out.d3[(i * n + j) * n + k] = v;
                    }
                }
            }
        }
        out
    }

    fn recip(&self) -> Jet {
        let u = self.value;
        self.compose([
            1.0 / u,
            -1.0 / (u * u),
            2.0 / (u * u * u),
            -6.0 / (u * u * u * u),
        ])
    }

    fn powi(&self, k: i32) -> Jet {
        if k == 0 {
            return Jet::constant(1.0, self.nvars, self.order);
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        let u = self.value;
        let kf = k as f64;
        let p = |e: i32| -> f64 { pow_int(u, e) };
        self.compose([
            p(k),
            kf * p(k - 1),
            kf * (kf - 1.0) * p(k - 2),
            kf * (kf - 1.0) * (kf - 2.0) * p(k - 3),
        ])
    }
}

fn pow_int(base: f64, exp: i32) -> f64 {
    if exp < 0 {
        // Only reached through derivative tables of positive powers at
        // base = 0; those entries are multiplied by a zero coefficient.
        if base == 0.0 {
            return 0.0;
        }
        return 1.0 / pow_int(base, -exp);
    }
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

fn eval_ast(ast: &Ast, point: &[f64], order: usize, vars: &VarSet) -> Result<Jet, EvalError> {
    let n = point.len();
    let domain = |reason: String, sub: &Ast| EvalError::Domain {
        reason,
        subexpr: {
            struct D<'a>(&'a Ast, &'a VarSet);
            impl fmt::Display for D<'_> {
                fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                    fmt_ast(self.0, self.1, f)
                }
            }
            D(sub, vars).to_string()
        },
    };
    match ast {
        Ast::Num(v) => Ok(Jet::constant(*v, n, order)),
        Ast::Var(i) => Ok(Jet::variable(point[*i], *i, n, order)),
        Ast::Add(a, b) => {
            Ok(eval_ast(a, point, order, vars)?.add(&eval_ast(b, point, order, vars)?))
        }
        Ast::Sub(a, b) => {
            Ok(eval_ast(a, point, order, vars)?.sub(&eval_ast(b, point, order, vars)?))
        }
        Ast::Mul(a, b) => {
            Ok(eval_ast(a, point, order, vars)?.mul(&eval_ast(b, point, order, vars)?))
        }
        Ast::Div(a, b) => {
            let num = eval_ast(a, point, order, vars)?;
            let den = eval_ast(b, point, order, vars)?;
            if den.value == 0.0 {
                return Err(domain("division by zero".to_string(), b));
            }
            Ok(num.mul(&den.recip()))
        }
        Ast::Pow(a, k) => {
            let base = eval_ast(a, point, order, vars)?;
            if *k < 0 && base.value == 0.0 {
                return Err(domain("zero raised to a negative power".to_string(), a));
            }
            Ok(base.powi(*k))
        }
        Ast::Neg(a) => Ok(eval_ast(a, point, order, vars)?.neg()),
        Ast::Call(func, a) => {
            let u = eval_ast(a, point, order, vars)?;
            let v = u.value;
            let table = match func {
                Func::Sin => [v.sin(), v.cos(), -v.sin(), -v.cos()],
                Func::Cos => [v.cos(), -v.sin(), -v.cos(), v.sin()],
                Func::Exp => {
                    let e = v.exp();
                    [e, e, e, e]
                }
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain(format!("log of non-positive value {v}"), a));
                    }
                    [v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)]
                }
                Func::Sqrt => {
                    if v < 0.0 || (v == 0.0 && order >= 1) {
                        return Err(domain(format!("sqrt outside domain at {v}"), a));
                    }
                    let s = v.sqrt();
                    if v == 0.0 {
                        [0.0, 0.0, 0.0, 0.0]
                    } else {
                        [s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)]
                    }
                }
            };
            Ok(u.compose(table))
        }
    }
}
