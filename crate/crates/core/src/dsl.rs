//! Coordinate programs: three arithmetic assignments computing a new part's
//! center from the chosen base part's box and the new part's size.
//!
//! ```text
//! program := assign assign assign
//! assign  := axis "=" expr            (separated by newline or ';')
//! axis    := "x" | "y" | "z"
//! expr    := term (("+" | "-") term)*
//! term    := factor (("*" | "/") factor)*
//! factor  := NUMBER | IDENT | "-" factor | "(" expr ")" | FUNC "(" expr ("," expr)? ")"
//! FUNC    := "min" | "max" | "abs"
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown identifier '{name}' at {line}:{col}")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("missing assignment for axis {0}")]
    MissingAxis(char),
    #[error("axis {axis} assigned twice (line {line})")]
    DuplicateAxis { axis: char, line: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("identifier '{0}' has no binding")]
    UnboundIdentifier(String),
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
    #[error("no samples to vote on")]
    EmptyInput,
}

/// Identifiers a program may reference.
pub const NAMESPACE: [&str; 15] = [
    "base.min.x",
    "base.min.y",
    "base.min.z",
    "base.max.x",
    "base.max.y",
    "base.max.z",
    "base.center.x",
    "base.center.y",
    "base.center.z",
    "base.size.x",
    "base.size.y",
    "base.size.z",
    "part.size.x",
    "part.size.y",
    "part.size.z",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Abs => 1,
            Func::Min | Func::Max => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordProgram {
    pub x: Expr,
    pub y: Expr,
    pub z: Expr,
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Sep,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let adv = |i: &mut usize, col: &mut usize, n: usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                out.push(Spanned { tok: Tok::Sep, line, col });
                i += 1;
                line += 1;
                col = 1;
            }
            ';' => {
                out.push(Spanned { tok: Tok::Sep, line, col });
                adv(&mut i, &mut col, 1);
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    adv(&mut i, &mut col, 1);
                }
            }
            c if c.is_whitespace() => adv(&mut i, &mut col, 1),
            '+' | '-' | '*' | '/' | '(' | ')' | ',' | '=' => {
                out.push(Spanned { tok: Tok::Op(c), line, col });
                adv(&mut i, &mut col, 1);
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    adv(&mut i, &mut col, 1);
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
                        let n = j - i;
                        adv(&mut i, &mut col, n);
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DslError::Syntax { line: l0, col: c0, message: format!("bad number '{text}'") })?;
                out.push(Spanned { tok: Tok::Num(v), line: l0, col: c0 });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    adv(&mut i, &mut col, 1);
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(text), line: l0, col: c0 });
            }
            other => {
                return Err(DslError::Syntax { line, col, message: format!("unexpected character '{other}'") });
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------- parsing

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

    fn error(&self, message: impl Into<String>) -> DslError {
        let t = self.peek();
        DslError::Syntax { line: t.line, col: t.col, message: message.into() }
    }

    fn expect_op(&mut self, op: char) -> Result<(), DslError> {
        if self.peek().tok == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected '{op}', found {}", describe(&self.peek().tok))))
        }
    }

    fn skip_seps(&mut self) {
        while self.peek().tok == Tok::Sep {
            self.bump();
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, DslError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('-') => Ok(Expr::Neg(Box::new(self.factor()?))),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "min" => Some(Func::Min),
                    "max" => Some(Func::Max),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(func) = func {
                    self.expect_op('(')?;
                    let mut args = vec![self.expr()?];
                    if self.peek().tok == Tok::Op(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect_op(')')?;
                    if args.len() != func.arity() {
                        return Err(DslError::Syntax {
                            line: t.line,
                            col: t.col,
                            message: format!("{} takes {} argument(s), got {}", func.name(), func.arity(), args.len()),
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else if NAMESPACE.contains(&name.as_str()) {
                    Ok(Expr::Var(name))
                } else {
                    Err(DslError::UnknownIdentifier { name, line: t.line, col: t.col })
                }
            }
            other => Err(DslError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected a value, found {}", describe(&other)),
            }),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::Sep => "end of statement".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(source: &str) -> Result<CoordProgram, DslError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let mut axes: [Option<Expr>; 3] = [None, None, None];
    p.skip_seps();
    while p.peek().tok != Tok::Eof {
        let head = p.bump();
        let axis = match &head.tok {
            Tok::Ident(s) if s == "x" => 0,
            Tok::Ident(s) if s == "y" => 1,
            Tok::Ident(s) if s == "z" => 2,
            other => {
                return Err(DslError::Syntax {
                    line: head.line,
                    col: head.col,
                    message: format!("expected x, y or z, found {}", describe(other)),
                })
            }
        };
        p.expect_op('=')?;
        let e = p.expr()?;
        match p.peek().tok {
            Tok::Sep | Tok::Eof => {}
            ref other => return Err(p.error(format!("unexpected {} after expression", describe(other)))),
        }
        if axes[axis].replace(e).is_some() {
            return Err(DslError::DuplicateAxis { axis: AXES[axis], line: head.line });
        }
        p.skip_seps();
    }
    let [x, y, z] = axes;
    Ok(CoordProgram {
        x: x.ok_or(DslError::MissingAxis('x'))?,
        y: y.ok_or(DslError::MissingAxis('y'))?,
        z: z.ok_or(DslError::MissingAxis('z'))?,
    })
}

const AXES: [char; 3] = ['x', 'y', 'z'];

// ---------------------------------------------------------------- printing

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 4,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let wrap = self.precedence() < min_prec;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(name) => f.write_str(name)?,
            Expr::Neg(inner) => {
                f.write_str("-")?;
                inner.write(f, 3)?;
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                l.write(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.write(f, p + 1)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

impl fmt::Display for CoordProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "x = {}", self.x)?;
        writeln!(f, "y = {}", self.y)?;
        writeln!(f, "z = {}", self.z)
    }
}

// ---------------------------------------------------------------- evaluation

/// Values for the program namespace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    /// Binds the base part's box and the new part's size.
    pub fn for_placement(base: &Aabb, part_size: Vec3) -> Self {
        let mut b = Bindings::new();
        let groups = [
            ("base.min", base.min),
            ("base.max", base.max),
            ("base.center", base.center()),
            ("base.size", base.size()),
            ("part.size", part_size),
        ];
        for (prefix, v) in groups {
            for (i, axis) in AXES.iter().enumerate() {
                b.set(format!("{prefix}.{axis}"), v.axis(i));
            }
        }
        b
    }

    /// One line per binding, for prompts.
    pub fn describe(&self) -> String {
        NAMESPACE
            .iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k} = {}", crate::blenv::fmt_fixed(v, 4))))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn eval_expr(e: &Expr, b: &Bindings) -> Result<f64, DslError> {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Var(name) => b.get(name).ok_or_else(|| DslError::UnboundIdentifier(name.clone()))?,
        Expr::Neg(inner) => -eval_expr(inner, b)?,
        Expr::Binary(op, l, r) => {
            let (l, r) = (eval_expr(l, b)?, eval_expr(r, b)?);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(DslError::DivisionByZero);
                    }
                    l / r
                }
            }
        }
        Expr::Call(func, args) => {
            let a = eval_expr(&args[0], b)?;
            match func {
                Func::Abs => a.abs(),
                Func::Min => a.min(eval_expr(&args[1], b)?),
                Func::Max => a.max(eval_expr(&args[1], b)?),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DslError::NonFinite)
    }
}

pub fn eval_program(p: &CoordProgram, b: &Bindings) -> Result<Vec3, DslError> {
    Ok(Vec3::new(eval_expr(&p.x, b)?, eval_expr(&p.y, b)?, eval_expr(&p.z, b)?))
}

// ---------------------------------------------------------------- voting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteConfig {
    pub samples: usize,
    /// Decimal places used to decide whether two coordinates agree.
    pub decimals: u32,
}

impl Default for VoteConfig {
    fn default() -> Self {
        VoteConfig { samples: 3, decimals: 3 }
    }
}

/// Rounding bucket used as the equality key for votes.
pub fn vote_bucket(v: f64, decimals: u32) -> i64 {
    (v * 10f64.powi(decimals as i32)).round() as i64
}

fn vote_axis(values: &[f64], decimals: u32) -> f64 {
    let mut counts: HashMap<i64, (usize, usize)> = HashMap::new();
    for (i, &v) in values.iter().enumerate() {
        counts.entry(vote_bucket(v, decimals)).or_insert((0, i)).0 += 1;
    }
    let best = counts.values().map(|&(c, _)| c).max().unwrap_or(0);
    let mut leaders = counts.values().filter(|&&(c, _)| c == best);
    match (leaders.next(), leaders.next()) {
        (Some(&(_, first)), None) => values[first],
        _ => values[0],
    }
}

/// Per-axis plurality over rounded buckets; ties fall back to the first sample.
pub fn majority_vote(samples: &[Vec3], cfg: &VoteConfig) -> Result<Vec3, DslError> {
    if samples.is_empty() {
        return Err(DslError::EmptyInput);
    }
    let axis = |i: usize| vote_axis(&samples.iter().map(|s| s.axis(i)).collect::<Vec<_>>(), cfg.decimals);
    Ok(Vec3::new(axis(0), axis(1), axis(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bindings() -> Bindings {
        let base = Aabb::new(Vec3::new(-0.5, -0.25, 0.0), Vec3::new(0.5, 0.25, 1.0));
        Bindings::for_placement(&base, Vec3::new(0.1, 0.2, 0.4))
    }

    #[test]
    fn attach_on_top_program() {
        let src = "x = base.center.x\ny = base.min.y - part.size.y / 2\nz = base.max.z + part.size.z / 2";
        let p = parse_program(src).unwrap();
        let v = eval_program(&p, &bindings()).unwrap();
        assert_eq!(v.x, 0.0);
        assert!((v.y - -0.35).abs() < 1e-12);
        assert!((v.z - 1.2).abs() < 1e-12);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_program("x = 1\ny = 2").unwrap_err(), DslError::MissingAxis('z'));
        assert!(matches!(
            parse_program("x = foo.bar; y = 0; z = 0"),
            Err(DslError::UnknownIdentifier { ref name, line: 1, col: 5 }) if name == "foo.bar"
        ));
        assert_eq!(
            parse_program("x = 1; y = 2; x = 3; z = 0").unwrap_err(),
            DslError::DuplicateAxis { axis: 'x', line: 1 }
        );
        assert!(matches!(parse_program("x = (1 + 2; y = 0; z = 0"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_program("x = min(1); y = 0; z = 0"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_program("w = 1"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse_program("x = 1 2; y = 0; z = 0"), Err(DslError::Syntax { .. })));
    }

    #[test]
    fn arithmetic_rules() {
        let b = bindings();
        let ev = |s: &str| eval_expr(&parse_program(&format!("x = {s}; y = 0; z = 0")).unwrap().x, &b);
        assert_eq!(ev("8 - 3 - 2").unwrap(), 3.0);
        assert_eq!(ev("8 / 4 / 2").unwrap(), 1.0);
        assert_eq!(ev("1 + 2 * 3").unwrap(), 7.0);
        assert_eq!(ev("-2 * -3").unwrap(), 6.0);
        assert_eq!(ev("min(base.min.x, 0)").unwrap(), -0.5);
        assert_eq!(ev("max(1, abs(-4))").unwrap(), 4.0);
        assert_eq!(ev("base.size.y / (base.size.y - base.size.y)").unwrap_err(), DslError::DivisionByZero);
        assert_eq!(ev("1e308 * 10").unwrap_err(), DslError::NonFinite);
    }

    #[test]
    fn unbound_identifier() {
        let p = parse_program("x = part.size.x; y = 0; z = 0").unwrap();
        assert_eq!(eval_program(&p, &Bindings::new()).unwrap_err(), DslError::UnboundIdentifier("part.size.x".into()));
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_program("\n# centered\nx = 0\n\ny = 0 # same\n;z = 1\n").unwrap();
        assert_eq!(p.z, Expr::Num(1.0));
    }

    #[test]
    fn printer_parenthesizes_minimally() {
        let p = parse_program("x = (1 - 2) - (3 - 4); y = -(1 + 2) * 3; z = 1 / (2 * 3)").unwrap();
        assert_eq!(p.to_string(), "x = 1 - 2 - (3 - 4)\ny = -(1 + 2) * 3\nz = 1 / (2 * 3)\n");
    }

    #[test]
    fn vote_examples() {
        let cfg = VoteConfig::default();
        let v = |xs: [f64; 3]| xs.map(|x| Vec3::new(x, 0.0, 0.0)).to_vec();
        assert_eq!(majority_vote(&v([1.0, 1.0, 2.0]), &cfg).unwrap().x, 1.0);
        assert_eq!(majority_vote(&v([1.0, 2.0, 3.0]), &cfg).unwrap().x, 1.0);
        assert_eq!(majority_vote(&v([1.0004, 1.0002, 5.0]), &cfg).unwrap().x, 1.0004);
        assert_eq!(majority_vote(&v([5.0, 1.0002, 1.0004]), &cfg).unwrap().x, 1.0002);
        assert_eq!(majority_vote(&[], &cfg).unwrap_err(), DslError::EmptyInput);
    }
}
