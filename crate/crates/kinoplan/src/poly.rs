//! Dense univariate polynomials with guaranteed real-root isolation on a
//! bounded interval.
//!
//! Collision soundness depends on not missing roots, so isolation counts
//! roots with a Sturm sequence and narrows each bracket by bisecting on the
//! sign-variation count. That converges for even-multiplicity roots too,
//! where plain sign-change bisection would fail.

use serde::{Deserialize, Serialize};

/// Coefficients below this magnitude are trimmed when canonicalizing degree.
pub const COEFF_TRIM_EPS: f64 = 1e-12;

/// Root-finding failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RootError {
    /// The polynomial is identically zero on the interval; every point is a
    /// root. Callers treat this as permanent boundary contact.
    #[error("polynomial is identically zero on the interval")]
    IdenticallyZero,
}

/// A real polynomial in the monomial basis, lowest degree first.
///
/// Canonical form: trailing coefficients with magnitude below
/// [`COEFF_TRIM_EPS`] are trimmed, so the leading coefficient is nonzero
/// unless the polynomial is identically zero (stored as the single
/// coefficient `[0.0]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.abs() < COEFF_TRIM_EPS) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Horner evaluation.
    pub fn evaluate(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Coefficient-rule derivative; the zero polynomial maps to itself.
    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Polynomial::new(coeffs)
    }

    /// Anti-derivative with constant term `c0`.
    pub fn integrate(&self, c0: f64) -> Polynomial {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(c0);
        for (i, &c) in self.coeffs.iter().enumerate() {
            coeffs.push(c / (i as f64 + 1.0));
        }
        Polynomial::new(coeffs)
    }

    /// The `n`-th derivative.
    pub fn nth_derivative(&self, n: usize) -> Polynomial {
        let mut p = self.clone();
        for _ in 0..n {
            p = p.derivative();
        }
        p
    }

    /// Taylor shift: returns `q` with `q(t) = p(t + c)`.
    pub fn shift(&self, c: f64) -> Polynomial {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // binomial expansion; degrees stay small enough for this to be exact
        // within working precision
        let mut binom = vec![0.0_f64; n];
        for (i, &ci) in self.coeffs.iter().enumerate() {
            binom[0] = 1.0;
            for k in 1..=i {
                binom[k] = binom[k - 1] * ((i - k + 1) as f64) / (k as f64);
            }
            let mut cpow = 1.0;
            for k in (0..=i).rev() {
                out[k] += ci * binom[k] * cpow;
                cpow *= c;
            }
        }
        Polynomial::new(out)
    }

    pub fn scaled(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scaled(-1.0))
    }

    fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Magnitude scale of evaluating `self` at `t`, used for numeric-zero
    /// thresholds.
    fn eval_magnitude(&self, t: f64) -> f64 {
        let at = t.abs();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * at + c.abs();
        }
        acc
    }

    fn is_numeric_root(&self, t: f64) -> bool {
        self.evaluate(t).abs() <= 1e-12 * (1.0 + self.eval_magnitude(t))
    }

    /// Synthetic division by `(t - r)`, discarding the remainder.
    fn deflate(&self, r: f64) -> Polynomial {
        let n = self.coeffs.len();
        if n == 1 {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; n - 1];
        let mut carry = 0.0;
        for i in (1..n).rev() {
            carry = self.coeffs[i] + carry * r;
            out[i - 1] = carry;
        }
        Polynomial::new(out)
    }

    /// All real roots of `self` in the closed interval `[lo, hi]`, sorted
    /// ascending, with roots closer than `tol` merged and multiplicities
    /// collapsed. Each returned root is accurate to within `tol`.
    ///
    /// Returns [`RootError::IdenticallyZero`] when the polynomial vanishes
    /// identically; callers must treat the whole interval as boundary contact.
    pub fn real_roots_in_interval(
        &self,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<Vec<f64>, RootError> {
        assert!(lo <= hi, "interval re-ordered: [{lo}, {hi}]");
        assert!(tol > 0.0, "tolerance must be positive");
        if self.is_zero() {
            return Err(RootError::IdenticallyZero);
        }
        if lo == hi {
            return Ok(if self.is_numeric_root(lo) {
                vec![lo]
            } else {
                vec![]
            });
        }

        let mut roots = Vec::new();
        let mut work = self.clone();

        // Peel numerically-exact endpoint roots so the Sturm count applies to
        // an interval whose ends are not roots. Deflation at the endpoints is
        // exact for the common case of a root at t = 0.
        let mut lo_root = false;
        while work.degree() >= 1 && work.is_numeric_root(lo) {
            lo_root = true;
            work = work.deflate(lo);
        }
        if lo_root {
            roots.push(lo);
        }
        let mut hi_root = false;
        while work.degree() >= 1 && work.is_numeric_root(hi) {
            hi_root = true;
            work = work.deflate(hi);
        }
        if hi_root {
            roots.push(hi);
        }

        if work.degree() >= 1 && !work.is_zero() {
            // closed forms are exact and stable up to degree 2; the Sturm
            // machinery guards the higher degrees where formulas are fragile
            match work.degree() {
                1 => {
                    let r = -work.coeffs[0] / work.coeffs[1];
                    if (lo..=hi).contains(&r) {
                        roots.push(r);
                    }
                }
                2 => {
                    for r in quadratic_roots(work.coeffs[2], work.coeffs[1], work.coeffs[0]) {
                        if (lo..=hi).contains(&r) {
                            roots.push(r);
                        }
                    }
                }
                _ => {
                    let chain = SturmChain::new(&work);
                    let va = chain.variations(lo);
                    let vb = chain.variations(hi);
                    chain.isolate(lo, hi, va, vb, tol, &mut roots);
                }
            }
        }

        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|b, a| (*b - *a).abs() < tol);
        Ok(roots)
    }
}

/// Sturm chain of a polynomial, members normalized to unit max-coefficient.
///
/// Positive rescaling preserves sign variations, and dividing by a rescaled
/// polynomial leaves remainders unchanged, so the normalized chain counts the
/// same distinct roots as the canonical one while staying well-conditioned.
struct SturmChain {
    chain: Vec<Polynomial>,
}

impl SturmChain {
    fn new(p: &Polynomial) -> Self {
        let normalize = |q: &Polynomial| {
            let m = q.max_abs_coeff();
            if m > 0.0 {
                q.scaled(1.0 / m)
            } else {
                q.clone()
            }
        };
        let mut chain = vec![normalize(p)];
        let d = p.derivative();
        if !d.is_zero() {
            chain.push(normalize(&d));
            loop {
                let n = chain.len();
                let rem = poly_rem(&chain[n - 2], &chain[n - 1]);
                // near-zero remainder: gcd reached (multiple roots)
                if rem.max_abs_coeff() < 1e-13 {
                    break;
                }
                chain.push(normalize(&rem.scaled(-1.0)));
                if chain.last().unwrap().degree() == 0 {
                    break;
                }
            }
        }
        SturmChain { chain }
    }

    /// Sign variations of the chain at `t`, skipping numerically-zero entries.
    fn variations(&self, t: f64) -> usize {
        let mut count = 0;
        let mut last_sign = 0i8;
        for q in &self.chain {
            let v = q.evaluate(t);
            let sign = if v.abs() <= 1e-14 * (1.0 + q.eval_magnitude(t)) {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            };
            if sign != 0 {
                if last_sign != 0 && sign != last_sign {
                    count += 1;
                }
                last_sign = sign;
            }
        }
        count
    }

    /// Distinct roots in `(a, b]` assuming neither endpoint is a root of the
    /// chain head; recursively subdivides until each bracket holds one root.
    fn isolate(&self, a: f64, b: f64, va: usize, vb: usize, tol: f64, out: &mut Vec<f64>) {
        let count = va.saturating_sub(vb);
        if count == 0 {
            return;
        }
        if count == 1 {
            out.push(self.refine(a, b, va, tol));
            return;
        }
        if b - a < tol {
            // clustered roots within tolerance collapse to one representative
            out.push(0.5 * (a + b));
            return;
        }
        let mid = 0.5 * (a + b);
        let vm = self.variations(mid);
        self.isolate(a, mid, va, vm, tol, out);
        self.isolate(mid, b, vm, vb, tol, out);
    }

    /// Narrow a bracket known to contain exactly one distinct root by
    /// bisecting on the variation count, then polish with Newton steps.
    fn refine(&self, mut a: f64, mut b: f64, mut va: usize, tol: f64) -> f64 {
        while b - a > 0.25 * tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let vm = self.variations(mid);
            if va > vm {
                b = mid;
            } else {
                a = mid;
                va = vm;
            }
        }
        let bracket_mid = 0.5 * (a + b);
        let p = &self.chain[0];
        let dp = p.derivative();
        let mut x = bracket_mid;
        for _ in 0..4 {
            let f = p.evaluate(x);
            let g = dp.evaluate(x);
            if g.abs() < 1e-300 {
                break;
            }
            let step = f / g;
            let next = x - step;
            if !(a - tol..=b + tol).contains(&next) {
                break;
            }
            x = next;
            if step.abs() < 0.01 * tol {
                break;
            }
        }
        if p.evaluate(x).abs() <= p.evaluate(bracket_mid).abs() {
            x
        } else {
            bracket_mid
        }
    }
}

/// Real roots of `a t^2 + b t + c` via the cancellation-stable formula.
/// A discriminant within rounding noise of zero counts as a tangency.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    let noise = 1e-12 * (b * b + (4.0 * a * c).abs());
    if disc < -noise {
        return Vec::new();
    }
    if disc <= noise {
        return vec![-b / (2.0 * a)];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        // b == 0 and c == 0: roots at 0 (double)
        return vec![0.0];
    }
    let mut out = vec![q / a, c / q];
    out.sort_by(f64::total_cmp);
    out
}

/// Remainder of polynomial long division `a mod b`.
fn poly_rem(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let db = b.degree();
    let lead = *b.coeffs().last().unwrap();
    let mut rem: Vec<f64> = a.coeffs().to_vec();
    while rem.len() > db && rem.len() > 1 {
        let da = rem.len() - 1;
        let factor = rem[da] / lead;
        let shift = da - db;
        for i in 0..=db {
            rem[shift + i] -= factor * b.coeffs()[i];
        }
        rem.pop();
    }
    Polynomial::new(rem)
}
