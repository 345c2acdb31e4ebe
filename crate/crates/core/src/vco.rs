//! Oscillator frequency functions `chi_i`, the loop-filter scaling `zeta`, the
//! composites `sigma_i = chi_i o zeta` and the curves `beta`, `alpha` that fix
//! the synchronized frequency on each invariant leaf.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, gauss_legendre};
use crate::report::ValidationReport;
use crate::topo::conserved_direction;

const MAX_ITERATIONS: usize = 200;

/// Open interval, either end possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) }
    }

    /// Containment of open intervals.
    pub fn is_within(&self, outer: &Interval) -> bool {
        self.lo >= outer.lo && self.hi <= outer.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

// `[lo, hi]` with `null` standing for an infinite end.
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let end = |x: f64| if x.is_finite() { Some(x) } else { None };
        [end(self.lo), end(self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[Option<f64>; 2]>::deserialize(d)?;
        Ok(Interval { lo: lo.unwrap_or(f64::NEG_INFINITY), hi: hi.unwrap_or(f64::INFINITY) })
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `logistic(x) * (1 - logistic(x))` without cancellation.
#[inline]
fn logistic_slope(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Base oscillator tuning curve `chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FreqFn {
    /// `omega + k u`
    Affine { omega: f64, k: f64 },
    /// `lo + (hi - lo) / (1 + exp(-s (u - u0)))`
    Saturating { lo: f64, hi: f64, u0: f64, s: f64 },
}

impl FreqFn {
    fn check(&self) -> Result<()> {
        let ok = match *self {
            FreqFn::Affine { omega, k } => omega.is_finite() && k > 0.0 && k.is_finite(),
            FreqFn::Saturating { lo, hi, u0, s } => lo.is_finite() && hi.is_finite() && lo < hi && u0.is_finite() && s > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("malformed frequency function {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            FreqFn::Affine { omega, k } => omega + k * u,
            FreqFn::Saturating { lo, hi, u0, s } => lo + (hi - lo) * logistic(s * (u - u0)),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            FreqFn::Affine { k, .. } => k,
            FreqFn::Saturating { lo, hi, u0, s } => (hi - lo) * s * logistic_slope(s * (u - u0)),
        }
    }

    /// Closed-form inverse on the image.
    pub fn inverse(&self, v: f64) -> f64 {
        match *self {
            FreqFn::Affine { omega, k } => (v - omega) / k,
            FreqFn::Saturating { lo, hi, u0, s } => u0 + logit((v - lo) / (hi - lo)) / s,
        }
    }

    /// Image of an open domain interval.
    pub fn image(&self, domain: Interval) -> Interval {
        let end = |u: f64| match *self {
            FreqFn::Affine { .. } => self.eval(u),
            FreqFn::Saturating { lo, .. } if u == f64::NEG_INFINITY => lo,
            FreqFn::Saturating { hi, .. } if u == f64::INFINITY => hi,
            FreqFn::Saturating { .. } => self.eval(u),
        };
        Interval::new(end(domain.lo), end(domain.hi))
    }
}

/// Loop-filter scaling `zeta: R -> U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalingFn {
    Identity,
    /// `lo + (hi - lo) / (1 + exp(-slope (x - center)))`, squeezing onto `(lo, hi)`.
    Logistic { lo: f64, hi: f64, center: f64, slope: f64 },
}

impl ScalingFn {
    fn check(&self) -> Result<()> {
        match *self {
            ScalingFn::Identity => Ok(()),
            ScalingFn::Logistic { lo, hi, center, slope } => {
                if lo.is_finite() && hi.is_finite() && lo < hi && center.is_finite() && slope > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("malformed scaling function {self:?}")))
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalingFn::Identity => x,
            ScalingFn::Logistic { lo, hi, center, slope } => lo + (hi - lo) * logistic(slope * (x - center)),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ScalingFn::Identity => 1.0,
            ScalingFn::Logistic { lo, hi, center, slope } => (hi - lo) * slope * logistic_slope(slope * (x - center)),
        }
    }

    /// The admissible input interval `U` this scaling maps onto.
    pub fn image(&self) -> Interval {
        match *self {
            ScalingFn::Identity => Interval::REAL_LINE,
            ScalingFn::Logistic { lo, hi, .. } => Interval::new(lo, hi),
        }
    }
}

/// Per-vertex oscillators, shared scaling, constraint interval and integrator
/// gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankSpec", into = "BankSpec")]
pub struct OscBank {
    oscillators: Vec<FreqFn>,
    zeta: ScalingFn,
    constraint: Interval,
    gains: Vec<f64>,
    q: Vec<f64>,
    j: Interval,
    varpi: Option<f64>,
    anchors: Option<Vec<f64>>,
}

/// Wire form of [`OscBank`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankSpec {
    pub oscillators: Vec<FreqFn>,
    pub zeta: ScalingFn,
    #[serde(rename = "I")]
    pub constraint: Interval,
    pub c: Vec<f64>,
}

impl TryFrom<BankSpec> for OscBank {
    type Error = Error;

    fn try_from(s: BankSpec) -> Result<Self> {
        OscBank::new(s.oscillators, s.zeta, s.constraint, s.c)
    }
}

impl From<OscBank> for BankSpec {
    fn from(b: OscBank) -> Self {
        BankSpec { oscillators: b.oscillators, zeta: b.zeta, constraint: b.constraint, c: b.gains }
    }
}

impl OscBank {
    /// Builds a bank and precomputes `J`, the reference frequency `varpi` and
    /// the potential anchors `sigma_i^{-1}(varpi)`. An empty `J` is not an
    /// error here; [`validate_bank`] reports it.
    pub fn new(oscillators: Vec<FreqFn>, zeta: ScalingFn, constraint: Interval, gains: Vec<f64>) -> Result<Self> {
        if oscillators.len() != gains.len() {
            return Err(Error::DimensionMismatch { expected: oscillators.len(), got: gains.len() });
        }
        if oscillators.len() < 2 {
            return Err(Error::TooFewVertices(oscillators.len()));
        }
        for o in &oscillators {
            o.check()?;
        }
        zeta.check()?;
        let q = conserved_direction(&gains)?.iter().copied().collect();
        let mut bank = OscBank { oscillators, zeta, constraint, gains, q, j: Interval::REAL_LINE, varpi: None, anchors: None };
        bank.j = (0..bank.n()).fold(Interval::REAL_LINE, |acc, i| acc.intersect(&bank.sigma_image(i)));
        if !bank.j.is_empty() {
            let varpi = if bank.j.is_bounded() { 0.5 * (bank.j.lo + bank.j.hi) } else { bank.beta_inverse(0.0)? };
            let anchors = (0..bank.n()).map(|i| bank.invert_sigma(i, varpi)).collect::<Result<Vec<_>>>()?;
            bank.varpi = Some(varpi);
            bank.anchors = Some(anchors);
        }
        Ok(bank)
    }

    /// `n` copies of the same oscillator.
    pub fn uniform(n: usize, osc: FreqFn, zeta: ScalingFn, constraint: Interval, gain: f64) -> Result<Self> {
        OscBank::new(vec![osc; n], zeta, constraint, vec![gain; n])
    }

    pub fn n(&self) -> usize {
        self.oscillators.len()
    }

    pub fn oscillators(&self) -> &[FreqFn] {
        &self.oscillators
    }

    pub fn zeta(&self) -> &ScalingFn {
        &self.zeta
    }

    pub fn constraint(&self) -> Interval {
        self.constraint
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Unit vector along `C^{-1} 1`; `q^T gamma` is conserved by both controllers.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `J`, the intersection of all images `sigma_i(R)` (possibly empty).
    pub fn j_interval(&self) -> Interval {
        self.j
    }

    /// The reference frequency inside `J` used to anchor `W`.
    pub fn varpi(&self) -> Result<f64> {
        self.varpi.ok_or(Error::EmptyJ)
    }

    /// Input interval `U`, the image of the scaling function.
    pub fn domain(&self) -> Interval {
        self.zeta.image()
    }

    #[inline]
    pub fn sigma(&self, i: usize, gamma: f64) -> f64 {
        self.oscillators[i].eval(self.zeta.eval(gamma))
    }

    #[inline]
    pub fn sigma_prime(&self, i: usize, gamma: f64) -> f64 {
        self.oscillators[i].derivative(self.zeta.eval(gamma)) * self.zeta.derivative(gamma)
    }

    pub fn sigma_image(&self, i: usize) -> Interval {
        self.oscillators[i].image(self.domain())
    }

    /// `sigma_i^{-1}(s)` for `s` strictly inside the image.
    pub fn invert_sigma(&self, i: usize, s: f64) -> Result<f64> {
        let image = self.sigma_image(i);
        if !image.contains(s) {
            return Err(Error::OutOfImage { vertex: i + 1, value: s, lo: image.lo, hi: image.hi });
        }
        if let (FreqFn::Affine { .. }, ScalingFn::Identity) = (&self.oscillators[i], &self.zeta) {
            return Ok(self.oscillators[i].inverse(s));
        }
        monotone_solve(|g| Some(self.sigma(i, g)), s, Interval::REAL_LINE).ok_or(Error::InversionFailed { vertex: i + 1 })
    }

    /// `beta(s) = sum_i q_i sigma_i^{-1}(s)` on `J`.
    pub fn beta(&self, s: f64) -> Result<f64> {
        if !self.j.contains(s) {
            return Err(Error::OutOfJ { value: s, lo: self.j.lo, hi: self.j.hi });
        }
        let mut acc = 0.0;
        for i in 0..self.n() {
            acc += self.q[i] * self.invert_sigma(i, s)?;
        }
        Ok(acc)
    }

    /// Inverse of `beta`: the synchronized frequency on the leaf `q^T gamma = r`.
    pub fn beta_inverse(&self, r: f64) -> Result<f64> {
        if self.j.is_empty() {
            return Err(Error::EmptyJ);
        }
        monotone_solve(|s| self.beta(s).ok(), r, self.j).ok_or(Error::InversionFailed { vertex: 0 })
    }

    /// `alpha(r) = Sigma^{-1}(beta^{-1}(r) 1)`, the unique frequency-locked
    /// filter state on the leaf `q^T gamma = r`.
    pub fn alpha(&self, r: f64) -> Result<Vec<f64>> {
        let s = self.beta_inverse(r)?;
        (0..self.n()).map(|i| self.invert_sigma(i, s)).collect()
    }

    /// Predicted locked frequency for a run starting from filter state `gamma0`.
    pub fn predicted_frequency(&self, gamma0: &[f64]) -> Result<f64> {
        self.beta_inverse(self.foliation_coordinate(gamma0))
    }

    pub fn foliation_coordinate(&self, gamma: &[f64]) -> f64 {
        self.q.iter().zip(gamma).map(|(q, g)| q * g).sum()
    }

    /// Closed-form antiderivative of `sigma_i`, when one is known.
    pub fn sigma_antiderivative(&self, i: usize, x: f64) -> Option<f64> {
        match (self.oscillators[i], self.zeta) {
            (FreqFn::Affine { omega, k }, ScalingFn::Identity) => Some(omega * x + 0.5 * k * x * x),
            (FreqFn::Saturating { lo, hi, u0, s }, ScalingFn::Identity) => Some(lo * x + (hi - lo) * softplus(s * (x - u0)) / s),
            (FreqFn::Affine { omega, k }, ScalingFn::Logistic { lo, hi, center, slope }) => {
                Some((omega + k * lo) * x + k * (hi - lo) * softplus(slope * (x - center)) / slope)
            }
            (FreqFn::Saturating { .. }, ScalingFn::Logistic { .. }) => None,
        }
    }

    /// Vertex term of `W`: `(1/c_i) int_{sigma_i^{-1}(varpi)}^{gamma_i} (sigma_i - varpi)`.
    pub fn w_component(&self, i: usize, gamma: f64) -> Result<f64> {
        let anchors = self.anchors.as_ref().ok_or(Error::EmptyJ)?;
        let varpi = self.varpi()?;
        let a = anchors[i];
        let integral = match (self.sigma_antiderivative(i, gamma), self.sigma_antiderivative(i, a)) {
            (Some(gx), Some(ga)) => gx - ga - varpi * (gamma - a),
            _ => gauss_legendre(&|s| self.sigma(i, s) - varpi, a, gamma, 0.5),
        };
        Ok((integral / self.gains[i]).max(0.0))
    }

    /// `W(gamma) >= 0`, zero exactly at `Sigma(gamma) = varpi 1`.
    pub fn w_potential(&self, gamma: &[f64]) -> Result<f64> {
        (0..self.n()).map(|i| self.w_component(i, gamma[i])).sum()
    }

    /// `W` by quadrature regardless of closed forms; an independent route.
    pub fn w_potential_quadrature(&self, gamma: &[f64], tol: f64) -> Result<f64> {
        let anchors = self.anchors.as_ref().ok_or(Error::EmptyJ)?;
        let varpi = self.varpi()?;
        Ok((0..self.n())
            .map(|i| adaptive_simpson(&|s| self.sigma(i, s) - varpi, anchors[i], gamma[i], tol) / self.gains[i])
            .sum())
    }

    /// Positive input domain and positive images, needed to form the
    /// frequency ratios of the dual controller.
    pub fn dual_positivity_holds(&self) -> bool {
        self.domain().lo >= 0.0 && (0..self.n()).all(|i| self.sigma_image(i).lo >= 0.0)
    }
}

/// Solves `f(x) = target` for increasing `f` on an open interval. `f` may
/// return `None` where it cannot be evaluated (treated as out of range).
fn monotone_solve<F: Fn(f64) -> Option<f64>>(f: F, target: f64, domain: Interval) -> Option<f64> {
    let mut iterations = 0;
    // Bracket [lo, hi]; a finite domain end is never evaluated.
    let (mut lo, mut hi);
    match (domain.lo.is_finite(), domain.hi.is_finite()) {
        (true, true) => {
            lo = domain.lo;
            hi = domain.hi;
        }
        (true, false) => {
            lo = domain.lo;
            let mut step = 1.0;
            hi = domain.lo + step;
            while f(hi)? < target {
                step *= 2.0;
                hi = domain.lo + step;
                iterations += 1;
                if iterations > MAX_ITERATIONS {
                    return None;
                }
            }
        }
        (false, true) => {
            hi = domain.hi;
            let mut step = 1.0;
            lo = domain.hi - step;
            while f(lo)? > target {
                step *= 2.0;
                lo = domain.hi - step;
                iterations += 1;
                if iterations > MAX_ITERATIONS {
                    return None;
                }
            }
        }
        (false, false) => {
            let mut step = 1.0;
            loop {
                if f(-step)? <= target && f(step)? >= target {
                    lo = -step;
                    hi = step;
                    break;
                }
                step *= 2.0;
                iterations += 1;
                if iterations > MAX_ITERATIONS {
                    return None;
                }
            }
        }
    }
    let mut best = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Some(best);
        }
        best = mid;
        match f(mid) {
            Some(v) if v == target => return Some(mid),
            Some(v) if v < target => lo = mid,
            Some(_) => hi = mid,
            None => return None,
        }
    }
    Some(best)
}

/// Checks `J` nonempty, image containment in the constraint interval,
/// monotonicity of `zeta` and each `chi` on sampled grids and, when the dual
/// controller is requested, positivity of the domain and images.
pub fn validate_bank(bank: &OscBank, require_positive: bool) -> ValidationReport {
    let mut report = ValidationReport::new(format!("oscillator bank (n = {})", bank.n()));
    let j = bank.j_interval();
    report.push("j_nonempty", !j.is_empty(), format!("J = ({}, {})", j.lo, j.hi));

    let mut worst = String::new();
    let mut inside = true;
    for i in 0..bank.n() {
        let img = bank.sigma_image(i);
        if !img.is_within(&bank.constraint) {
            inside = false;
            worst = format!("sigma_{}(R) = ({}, {}) not inside I", i + 1, img.lo, img.hi);
        }
    }
    let ci = bank.constraint;
    report.push(
        "images_in_constraint",
        inside,
        if inside { format!("all images inside I = ({}, {})", ci.lo, ci.hi) } else { worst },
    );

    let grid: Vec<f64> = (0..=400).map(|k| -20.0 + 0.1 * k as f64).collect();
    let zeta_ok = grid.iter().all(|&g| bank.zeta.derivative(g) > 0.0);
    report.push("zeta_increasing", zeta_ok, "zeta' > 0 on [-20, 20]");
    let chi_bad = (0..bank.n())
        .filter(|&i| !grid.iter().all(|&g| bank.oscillators[i].derivative(bank.zeta.eval(g)) > 0.0))
        .count();
    report.push("chi_increasing", chi_bad == 0, format!("{chi_bad} oscillators with chi' <= 0 on sampled U"));

    if require_positive {
        let ok = bank.dual_positivity_holds();
        let u = bank.domain();
        report.push("positive_domain_and_images", ok, format!("U = ({}, {}); images must lie in (0, inf)", u.lo, u.hi));
    }
    report
}
