//! Potentials on the grid and a small text grammar for specifying them.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr  := term ('+' term)*
//! term  := [number '*'] atom
//! atom  := 'zero' | '(' expr ')'
//!        | 'quadratic(' a ',' b ',' c ')'        a|x|^2 + b x_1 + c
//!        | 'abs-norm(' a ')'                      a|x|
//!        | 'indicator-ball(' r ')'                0 on |x| <= r, +inf outside
//!        | 'piecewise-linear(' x:y (',' x:y)* ')' interpolant in x_1 (|x| in 2D)
//!        | 'neglog-mixture(' w:m:v (',' w:m:v)* ')'
//! ```
//!
//! `neglog-mixture` is the potential `W` with `exp(-W) gamma` proportional to the
//! Gaussian mixture `sum w N(m e_1, v I)`.

use std::fmt;
use std::sync::Arc;

use crate::convexity::{self, ConvexityOptions};
use crate::error::{Error, Result};
use crate::measures::grid::GammaGrid;
use crate::numeric::logsumexp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    Quadratic { a: f64, b: f64, c: f64 },
    AbsNorm(f64),
    IndicatorBall(f64),
    PiecewiseLinear(Vec<(f64, f64)>),
    NegLogMixture(Vec<MixtureComponent>),
    Scaled(f64, Box<PotentialSpec>),
    Sum(Vec<PotentialSpec>),
}

impl PotentialSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let spec = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse { column: 1, message: m });
        match self {
            PotentialSpec::IndicatorBall(r) if !(*r > 0.0) => {
                bad(format!("indicator-ball radius must be positive, got {r}"))
            }
            PotentialSpec::PiecewiseLinear(pts) => {
                if pts.is_empty() {
                    return bad("piecewise-linear needs at least one knot".into());
                }
                if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("piecewise-linear knots must be strictly increasing in x".into());
                }
                Ok(())
            }
            PotentialSpec::NegLogMixture(cs) => {
                if cs.is_empty() {
                    return bad("neglog-mixture needs at least one component".into());
                }
                if cs.iter().any(|c| !(c.weight > 0.0) || !(c.variance > 0.0)) {
                    return bad("neglog-mixture weights and variances must be positive".into());
                }
                Ok(())
            }
            PotentialSpec::Scaled(_, inner) => inner.check(),
            PotentialSpec::Sum(ts) => ts.iter().try_for_each(|t| t.check()),
            _ => Ok(()),
        }
    }

    /// Value at a point of dimension 1 or 2.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Quadratic { a, b, c } => a * norm2 + b * x[0] + c,
            PotentialSpec::AbsNorm(a) => a * norm2.sqrt(),
            PotentialSpec::IndicatorBall(r) => {
                // tolerance keeps nodes that sit on the sphere up to rounding
                if norm2.sqrt() <= r * (1.0 + 1e-12) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PotentialSpec::PiecewiseLinear(pts) => {
                let t = if x.len() == 1 { x[0] } else { norm2.sqrt() };
                interpolate(pts, t)
            }
            PotentialSpec::NegLogMixture(cs) => {
                let d = x.len() as f64;
                let terms: Vec<f64> = cs
                    .iter()
                    .map(|c| {
                        let mut q = (x[0] - c.mean).powi(2);
                        for v in &x[1..] {
                            q += v * v;
                        }
                        c.weight.ln() - q / (2.0 * c.variance) - 0.5 * d * c.variance.ln()
                    })
                    .collect();
                -logsumexp(&terms) - 0.5 * norm2
            }
            PotentialSpec::Scaled(k, inner) => {
                let v = inner.eval(x);
                if *k == 0.0 {
                    0.0
                } else {
                    k * v
                }
            }
            PotentialSpec::Sum(ts) => ts.iter().map(|t| t.eval(x)).sum(),
        }
    }

    /// Conservative syntactic convexity: true only when every term is convex.
    pub fn convex_by_construction(&self) -> bool {
        match self {
            PotentialSpec::Zero | PotentialSpec::IndicatorBall(_) => true,
            PotentialSpec::Quadratic { a, .. } => *a >= 0.0,
            PotentialSpec::AbsNorm(a) => *a >= 0.0,
            PotentialSpec::PiecewiseLinear(pts) => {
                let slopes: Vec<f64> = pts
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .collect();
                slopes.windows(2).all(|s| s[1] >= s[0])
            }
            PotentialSpec::NegLogMixture(cs) => {
                cs.len() == 1 && cs[0].variance <= 1.0
            }
            PotentialSpec::Scaled(k, inner) => *k >= 0.0 && inner.convex_by_construction(),
            PotentialSpec::Sum(ts) => ts.iter().all(|t| t.convex_by_construction()),
        }
    }

    /// One-dimensional effective domain `{x : W(x) < inf}` as an interval.
    pub fn domain_1d(&self) -> (f64, f64) {
        match self {
            PotentialSpec::IndicatorBall(r) => (-r, *r),
            PotentialSpec::Scaled(k, inner) if *k != 0.0 => inner.domain_1d(),
            PotentialSpec::Sum(ts) => ts.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |acc, t| {
                let d = t.domain_1d();
                (acc.0.max(d.0), acc.1.min(d.1))
            }),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// One-dimensional points where the potential may fail to be smooth.
    pub fn kinks_1d(&self) -> Vec<f64> {
        let mut out = match self {
            PotentialSpec::AbsNorm(_) => vec![0.0],
            PotentialSpec::IndicatorBall(r) => vec![-r, *r],
            PotentialSpec::PiecewiseLinear(pts) => pts.iter().map(|p| p.0).collect(),
            PotentialSpec::Scaled(_, inner) => inner.kinks_1d(),
            PotentialSpec::Sum(ts) => ts.iter().flat_map(|t| t.kinks_1d()).collect(),
            _ => Vec::new(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

fn interpolate(pts: &[(f64, f64)], t: f64) -> f64 {
    if pts.len() == 1 {
        return pts[0].1;
    }
    let k = match pts.iter().position(|p| p.0 > t) {
        Some(0) => 0,
        Some(k) => k - 1,
        None => pts.len() - 2,
    };
    let (x0, y0) = pts[k];
    let (x1, y1) = pts[k + 1];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Zero => write!(f, "zero"),
            PotentialSpec::Quadratic { a, b, c } => write!(f, "quadratic({a}, {b}, {c})"),
            PotentialSpec::AbsNorm(a) => write!(f, "abs-norm({a})"),
            PotentialSpec::IndicatorBall(r) => write!(f, "indicator-ball({r})"),
            PotentialSpec::PiecewiseLinear(pts) => {
                let items: Vec<String> = pts.iter().map(|(x, y)| format!("{x}:{y}")).collect();
                write!(f, "piecewise-linear({})", items.join(", "))
            }
            PotentialSpec::NegLogMixture(cs) => {
                let items: Vec<String> = cs
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.weight, c.mean, c.variance))
                    .collect();
                write!(f, "neglog-mixture({})", items.join(", "))
            }
            PotentialSpec::Scaled(k, inner) => match inner.as_ref() {
                PotentialSpec::Sum(_) | PotentialSpec::Scaled(..) => write!(f, "{k}*({inner})"),
                _ => write!(f, "{k}*{inner}"),
            },
            PotentialSpec::Sum(ts) => {
                let items: Vec<String> = ts
                    .iter()
                    .map(|t| match t {
                        PotentialSpec::Sum(_) => format!("({t})"),
                        _ => t.to_string(),
                    })
                    .collect();
                write!(f, "{}", items.join(" + "))
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            column: self.pos + 1,
            message: message.to_string(),
        }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<PotentialSpec> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some(b'+') {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            PotentialSpec::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<PotentialSpec> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'.' => {
                let k = self.number()?;
                self.expect(b'*')?;
                Ok(PotentialSpec::Scaled(k, Box::new(self.atom()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<PotentialSpec> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphabetic() || self.src[self.pos] == b'-')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let column_of_name = start;
        let spec = match name {
            "zero" => PotentialSpec::Zero,
            "quadratic" => {
                let v = self.number_list(3)?;
                PotentialSpec::Quadratic {
                    a: v[0],
                    b: v[1],
                    c: v[2],
                }
            }
            "abs-norm" => PotentialSpec::AbsNorm(self.number_list(1)?[0]),
            "indicator-ball" => PotentialSpec::IndicatorBall(self.number_list(1)?[0]),
            "piecewise-linear" => {
                let tuples = self.tuple_list(2)?;
                PotentialSpec::PiecewiseLinear(tuples.into_iter().map(|t| (t[0], t[1])).collect())
            }
            "neglog-mixture" => {
                let tuples = self.tuple_list(3)?;
                PotentialSpec::NegLogMixture(
                    tuples
                        .into_iter()
                        .map(|t| MixtureComponent {
                            weight: t[0],
                            mean: t[1],
                            variance: t[2],
                        })
                        .collect(),
                )
            }
            _ => {
                self.pos = column_of_name;
                return Err(self.error(&format!("unknown potential '{name}'")));
            }
        };
        Ok(spec)
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        if i < s.len() && (s[i] == b'-' || s[i] == b'+') {
            i += 1;
        }
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'-' || s[j] == b'+') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = i;
                Ok(v)
            }
            _ => Err(self.error("expected a finite number")),
        }
    }

    fn number_list(&mut self, n: usize) -> Result<Vec<f64>> {
        self.expect(b'(')?;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                self.expect(b',')?;
            }
            out.push(self.number()?);
        }
        self.expect(b')')?;
        Ok(out)
    }

    fn tuple_list(&mut self, arity: usize) -> Result<Vec<Vec<f64>>> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        loop {
            let mut t = Vec::with_capacity(arity);
            for k in 0..arity {
                if k > 0 {
                    self.expect(b':')?;
                }
                t.push(self.number()?);
            }
            out.push(t);
            match self.peek() {
                Some(b',') => self.pos += 1,
                _ => break,
            }
        }
        self.expect(b')')?;
        Ok(out)
    }
}

/// Shape asserted for a potential at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
    Unspecified,
}

/// Values of a potential at every grid node. `+inf` is allowed (zero
/// density for `exp(-W)`), NaN is not.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<GammaGrid>,
    values: Vec<f64>,
    curvature: Curvature,
}

impl PotentialField {
    pub fn new(grid: Arc<GammaGrid>, values: Vec<f64>, curvature: Curvature) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "potential has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::NotANumber(i));
        }
        let field = Self {
            grid,
            values,
            curvature,
        };
        let opts = ConvexityOptions {
            band: convexity::Band::Nodes(0),
            ..ConvexityOptions::default()
        };
        match curvature {
            Curvature::Convex => {
                let r = convexity::second_difference_test(&field.grid, &field.values, &opts)?;
                if !r.convex {
                    return Err(Error::ShapeViolation {
                        expected: "convex",
                        node: r.worst_convex_node.unwrap_or(0),
                        value: r.min_second_difference,
                    });
                }
            }
            Curvature::Concave => {
                let r = convexity::second_difference_test(&field.grid, &field.values, &opts)?;
                if !r.concave {
                    return Err(Error::ShapeViolation {
                        expected: "concave",
                        node: r.worst_concave_node.unwrap_or(0),
                        value: r.max_second_difference,
                    });
                }
            }
            Curvature::Unspecified => {}
        }
        Ok(field)
    }

    pub fn from_spec(grid: Arc<GammaGrid>, spec: &PotentialSpec, curvature: Curvature) -> Result<Self> {
        let values = (0..grid.len()).map(|i| spec.eval(&grid.coords(i))).collect();
        Self::new(grid, values, curvature)
    }

    pub fn from_fn(grid: Arc<GammaGrid>, f: impl Fn(&[f64]) -> f64, curvature: Curvature) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, values, curvature)
    }

    pub fn grid(&self) -> &Arc<GammaGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }
}
