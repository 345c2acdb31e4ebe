//! Phase coupling functions `f`, their derivatives and potentials.
//!
//! Every evaluation wraps its argument to `(-pi, pi]` first; that is the only
//! place circle topology enters the coupling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::error::{Error, Result};
use crate::report::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Tanlock { cos_b: f64 },
    Poly { p: u32, breakpoint: f64, value_at_breakpoint: f64, outer_slope: f64, potential_at_breakpoint: f64 },
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Tanlock,
    Poly,
    Sine,
}

/// An odd, C1 phase coupling function normalised to `f'(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingSpec", into = "CouplingSpec")]
pub struct CouplingFn {
    b: f64,
    shape: Shape,
}

/// Wire form: `{"kind": "tanlock" | "poly" | "sine", "b": 0.5, "p": 3}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
}

impl TryFrom<CouplingSpec> for CouplingFn {
    type Error = Error;

    fn try_from(s: CouplingSpec) -> Result<Self> {
        let need_b = || s.b.ok_or_else(|| Error::InvalidParameter("coupling needs \"b\"".into()));
        match s.kind {
            CouplingKind::Sine => Ok(CouplingFn::sine()),
            CouplingKind::Tanlock => CouplingFn::tanlock(need_b()?),
            CouplingKind::Poly => {
                let p = s.p.ok_or_else(|| Error::InvalidParameter("poly coupling needs \"p\"".into()))?;
                CouplingFn::piecewise_poly(p, need_b()?)
            }
        }
    }
}

impl From<CouplingFn> for CouplingSpec {
    fn from(c: CouplingFn) -> Self {
        match c.shape {
            Shape::Sine => CouplingSpec { kind: CouplingKind::Sine, b: None, p: None },
            Shape::Tanlock { .. } => CouplingSpec { kind: CouplingKind::Tanlock, b: Some(c.b), p: None },
            Shape::Poly { p, .. } => CouplingSpec { kind: CouplingKind::Poly, b: Some(c.b), p: Some(p) },
        }
    }
}

impl CouplingFn {
    /// `f(t) = (1 - cos b) sin t / (1 - cos b cos t)`.
    pub fn tanlock(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < PI) {
            return Err(Error::BOutOfRange(b));
        }
        Ok(CouplingFn { b, shape: Shape::Tanlock { cos_b: b.cos() } })
    }

    /// Piecewise polynomial with `f'(t) = 1 - (|t|/b)^(p-1)` on `[-t*, t*]`
    /// and constant slope outside, where `t*` in `(b, pi)` makes `f(pi) = 0`.
    pub fn piecewise_poly(p: u32, b: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree(p));
        }
        if !(b > 0.0 && b < PI) {
            return Err(Error::BOutOfRange(b));
        }
        let inner_f = |x: f64| x * (1.0 - x.powi(p as i32 - 1) / (p as f64 * b.powi(p as i32 - 1)));
        let inner_df = |x: f64| 1.0 - (x / b).powi(p as i32 - 1);
        // strictly decreasing on (b, pi) because f'' < 0 there
        let h = |x: f64| inner_f(x) + inner_df(x) * (PI - x);
        if !(h(PI) < 0.0) {
            return Err(Error::NoBreakpointRoot { p, b });
        }
        let (mut lo, mut hi) = (b, PI);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let value_at_breakpoint = inner_f(t);
        let potential_at_breakpoint =
            0.5 * t * t - t.powi(p as i32 + 1) / ((p * (p + 1)) as f64 * b.powi(p as i32 - 1));
        Ok(CouplingFn {
            b,
            shape: Shape::Poly { p, breakpoint: t, value_at_breakpoint, outer_slope: inner_df(t), potential_at_breakpoint },
        })
    }

    /// `f = sin`, the classical comparator. Kept as a non-compliant baseline
    /// for networks with four or more vertices.
    pub fn sine() -> Self {
        CouplingFn { b: PI / 2.0, shape: Shape::Sine }
    }

    pub fn kind(&self) -> CouplingKind {
        match self.shape {
            Shape::Tanlock { .. } => CouplingKind::Tanlock,
            Shape::Poly { .. } => CouplingKind::Poly,
            Shape::Sine => CouplingKind::Sine,
        }
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Outer breakpoint `t*` of the piecewise polynomial family.
    pub fn breakpoint(&self) -> Option<f64> {
        match self.shape {
            Shape::Poly { breakpoint, .. } => Some(breakpoint),
            _ => None,
        }
    }

    pub fn outer_slope(&self) -> Option<f64> {
        match self.shape {
            Shape::Poly { outer_slope, .. } => Some(outer_slope),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        let t = wrap(theta);
        match self.shape {
            Shape::Tanlock { cos_b } => {
                let (s, c) = t.sin_cos();
                (1.0 - cos_b) * s / (1.0 - cos_b * c)
            }
            Shape::Sine => t.sin(),
            Shape::Poly { p, breakpoint, value_at_breakpoint, outer_slope, .. } => {
                let x = t.abs();
                let g = if x <= breakpoint {
                    x * (1.0 - x.powi(p as i32 - 1) / (p as f64 * self.b.powi(p as i32 - 1)))
                } else {
                    value_at_breakpoint + outer_slope * (x - breakpoint)
                };
                g.copysign(t)
            }
        }
    }

    #[inline]
    pub fn derivative(&self, theta: f64) -> f64 {
        let t = wrap(theta);
        match self.shape {
            Shape::Tanlock { cos_b } => {
                let c = t.cos();
                let d = 1.0 - cos_b * c;
                (1.0 - cos_b) * (c - cos_b) / (d * d)
            }
            Shape::Sine => t.cos(),
            Shape::Poly { p, breakpoint, outer_slope, .. } => {
                let x = t.abs();
                if x <= breakpoint {
                    1.0 - (x / self.b).powi(p as i32 - 1)
                } else {
                    outer_slope
                }
            }
        }
    }

    /// Potential `Psi` with `Psi' = f` and minimum value zero.
    pub fn potential(&self, theta: f64) -> f64 {
        let t = wrap(theta);
        match self.shape {
            Shape::Sine => 2.0 * (0.5 * t).sin().powi(2),
            Shape::Tanlock { cos_b } => {
                // (1 - cos b)/cos b * ln((1 - cos b cos t)/(1 - cos b)), written to
                // stay finite as cos b -> 0.
                let one_minus_cos = 2.0 * (0.5 * t).sin().powi(2);
                let x = cos_b * one_minus_cos / (1.0 - cos_b);
                if x == 0.0 {
                    one_minus_cos
                } else {
                    one_minus_cos * x.ln_1p() / x
                }
            }
            Shape::Poly { p, breakpoint, value_at_breakpoint, outer_slope, potential_at_breakpoint } => {
                let x = t.abs();
                if x <= breakpoint {
                    0.5 * x * x - x.powi(p as i32 + 1) / ((p * (p + 1)) as f64 * self.b.powi(p as i32 - 1))
                } else {
                    let d = x - breakpoint;
                    potential_at_breakpoint + value_at_breakpoint * d + 0.5 * outer_slope * d * d
                }
            }
        }
    }

    /// Points where `f'` may fail to be smooth.
    fn kinks(&self) -> Vec<f64> {
        match self.shape {
            Shape::Poly { breakpoint, .. } => vec![breakpoint, -breakpoint, PI],
            _ => vec![PI],
        }
    }
}

/// Largest `b` the sign-pattern assumption allows on graphs with up to
/// `n_max` vertices.
pub fn max_admissible_b(n_max: usize) -> f64 {
    PI / (n_max.max(2) - 1) as f64
}

pub fn validate_coupling(c: &CouplingFn, n_max: usize) -> ValidationReport {
    const SAMPLES: usize = 1024;
    let mut report = ValidationReport::new(format!("coupling {:?} (b = {})", c.kind(), c.b));
    let grid: Vec<f64> = (0..SAMPLES).map(|k| -PI + (k as f64 + 0.5) * 2.0 * PI / SAMPLES as f64).collect();

    let odd = grid.iter().map(|&t| (c.eval(t) + c.eval(-t)).abs()).fold(0.0, f64::max);
    report.push("oddness", odd < 1e-12, format!("max |f(t) + f(-t)| = {odd:e}"));

    let slope0 = (c.derivative(0.0) - 1.0).abs();
    report.push("unit_slope", slope0 < 1e-12, format!("|f'(0) - 1| = {slope0:e}"));

    let mut jump: f64 = 0.0;
    for k in c.kinks() {
        let eps = 1e-12 * k.abs().max(1.0);
        jump = jump.max((c.derivative(k - eps) - c.derivative(k + eps)).abs());
        jump = jump.max((c.eval(k - eps) - c.eval(k + eps)).abs());
    }
    report.push("c1_continuity", jump < 1e-10, format!("max value/slope jump at breakpoints = {jump:e}"));

    let cos_b = c.b.cos();
    let mut bad = 0usize;
    for &t in &grid {
        let gap = t.cos() - cos_b;
        if gap.abs() > 1e-6 && !(c.derivative(t) * gap > 0.0) {
            bad += 1;
        }
    }
    report.push("sign_pattern", bad == 0, format!("{bad} of {SAMPLES} samples violate sign(f') = sign(cos t - cos b)"));

    let bound = max_admissible_b(n_max);
    let ok = c.b <= bound * (1.0 + 1e-12);
    let mut detail = format!("b = {} vs pi/(n_max - 1) = {bound}", c.b);
    if !ok && c.b > 2.0 * PI / n_max as f64 {
        detail.push_str("; b > 2 pi/n_max, so out-of-phase locking can be stable on some graphs");
    }
    report.push("b_bound", ok, detail);
    report
}
