//! Exact univariate polynomials over Q and real-root isolation by Sturm chains.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Coefficients in ascending order, trailing zeros trimmed.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<BigRational>);

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Poly {
    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly(coeffs.iter().map(|&c| q(c)).collect()).trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lead(&self) -> &BigRational {
        self.0.last().expect("zero polynomial has no leading coefficient")
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn sign_at(&self, x: &BigRational) -> i32 {
        let v = self.eval(x);
        if v.is_zero() {
            0
        } else if v.is_positive() {
            1
        } else {
            -1
        }
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * q(i as i64))
                .collect(),
        )
        .trimmed()
    }

    fn scale(&self, s: &BigRational) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect()).trimmed()
    }

    fn monic(&self) -> Poly {
        let l = self.lead().clone();
        self.scale(&(BigRational::one() / l))
    }

    fn sub(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let z = BigRational::zero();
        Poly(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&z) - other.0.get(i).unwrap_or(&z))
                .collect(),
        )
        .trimmed()
    }

    /// Euclidean division: (quotient, remainder).
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut r = self.clone();
        let mut quot = vec![BigRational::zero(); self.0.len().max(1)];
        while !r.is_zero() && r.degree() >= d.degree() {
            let shift = r.degree() - d.degree();
            let c = r.lead() / d.lead();
            quot[shift] = c.clone();
            let mut t = vec![BigRational::zero(); shift];
            t.extend(d.0.iter().map(|x| x * &c));
            r = r.sub(&Poly(t));
        }
        (Poly(quot).trimmed(), r)
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// Yun's square-free factorisation: returns (factor, multiplicity) pairs,
    /// each factor monic and square-free, constants dropped.
    pub fn square_free(&self) -> Vec<(Poly, usize)> {
        let f = self.monic();
        let df = f.derivative();
        let a = f.gcd(&df);
        let mut b = f.div_rem(&a).0;
        let mut c = df.div_rem(&a).0;
        let mut d = c.sub(&b.derivative());
        let mut out = Vec::new();
        let mut i = 1;
        loop {
            let g = b.gcd(&d);
            if g.degree() > 0 {
                out.push((g.clone(), i));
            }
            b = b.div_rem(&g).0;
            if b.degree() == 0 {
                break;
            }
            c = d.div_rem(&g).0;
            d = c.sub(&b.derivative());
            i += 1;
        }
        out
    }

    /// Sturm chain p, p', -rem(p, p'), ...
    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        while !chain.last().unwrap().is_zero() {
            let n = chain.len();
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(r.scale(&q(-1)));
        }
        chain
    }

    /// Cauchy bound: every root has |x| < bound.
    pub fn root_bound(&self) -> BigRational {
        let l = self.lead().abs();
        let m = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| c.abs() / &l)
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        m + BigRational::one()
    }
}

fn sign_variations(chain: &[Poly], x: &BigRational) -> usize {
    let mut count = 0;
    let mut last = 0;
    for p in chain {
        let s = p.sign_at(x);
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// An interval `[lo, hi]` with exact rational endpoints known to contain
/// exactly one root of the polynomial it was isolated from.
#[derive(Clone, Debug)]
pub struct ExactRoot {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl ExactRoot {
    pub fn width(&self) -> f64 {
        (&self.hi - &self.lo).to_f64().unwrap_or(f64::INFINITY)
    }
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

/// Isolate and refine all real roots of a square-free polynomial with no
/// rational roots. Each returned interval has width at most `width`.
pub fn isolate_real_roots(p: &Poly, width: f64) -> Vec<ExactRoot> {
    let chain = p.sturm_chain();
    let b = p.root_bound();
    let mut pending = vec![(-b.clone(), b)];
    let mut isolated = Vec::new();
    while let Some((lo, hi)) = pending.pop() {
        let n = sign_variations(&chain, &lo) - sign_variations(&chain, &hi);
        match n {
            0 => {}
            1 => isolated.push(ExactRoot { lo, hi }),
            _ => {
                let mid = (&lo + &hi) * half();
                pending.push((mid.clone(), hi));
                pending.push((lo, mid));
            }
        }
    }
    let target = BigRational::from_float(width).expect("finite width");
    for r in &mut isolated {
        let mut s_lo = p.sign_at(&r.lo);
        while &r.hi - &r.lo > target {
            let mid = (&r.lo + &r.hi) * half();
            let s = p.sign_at(&mid);
            if s == 0 {
                r.lo = mid.clone();
                r.hi = mid;
                break;
            }
            // the endpoints of an isolating Sturm interval are not roots
            // except possibly through the lower endpoint of (lo, hi]
            if s_lo == 0 || s == s_lo {
                r.lo = mid;
                s_lo = s;
            } else {
                r.hi = mid;
            }
        }
    }
    isolated.sort_by(|a, b| a.lo.cmp(&b.lo));
    isolated
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_free_detects_repeated_factor() {
        // (x-1)^3 = x^3 - 3x^2 + 3x - 1
        let p = Poly::from_ints(&[-1, 3, -3, 1]);
        let sf = p.square_free();
        assert_eq!(sf.len(), 1);
        assert_eq!(sf[0].1, 3);
        assert_eq!(sf[0].0, Poly::from_ints(&[-1, 1]));
    }

    #[test]
    fn sturm_isolates_cubic() {
        // x^3 - 5x^2 + 6x - 1
        let p = Poly::from_ints(&[-1, 6, -5, 1]);
        let roots = isolate_real_roots(&p, 1e-12);
        assert_eq!(roots.len(), 3);
        let mids: Vec<f64> = roots
            .iter()
            .map(|r| ((&r.lo + &r.hi) * half()).to_f64().unwrap())
            .collect();
        for (m, want) in mids.iter().zip([0.198_062_264, 1.554_958_132, 3.246_979_603]) {
            assert!((m - want).abs() < 1e-8, "{m} vs {want}");
        }
        for r in &roots {
            assert!(r.width() <= 1e-12);
        }
    }

    #[test]
    fn division_roundtrip() {
        let a = Poly::from_ints(&[5, -3, 0, 2, 1]);
        let d = Poly::from_ints(&[1, 1]);
        let (qt, r) = a.div_rem(&d);
        assert!(r.degree() == 0);
        // a(-1) equals the remainder
        assert_eq!(a.eval(&q(-1)), r.eval(&q(0)));
        assert_eq!(qt.degree(), 3);
    }
}
