//! Teichmuller-monomial model `(Z/p^n)[x^(1/p^N)] / (deg >= D)`.
//!
//! For a free perfect ring this is `W(R)` modulo `p^n` and the closed ideal of
//! Teichmuller monomials of degree `>= D`, restricted to exponents of depth
//! `N`. It is a free `Z/p^n`-module on monomials, which makes it the natural
//! linearization. The map `x^m -> [x^m]` into `WittVec` is a ring
//! homomorphism, used as an independent check of Witt arithmetic.

use super::WittVec;
use crate::arith::Zq;
use crate::error::{Error, Result};
use crate::fpring::{PerfMonomial, PerfPoly, RingPresentation};
use crate::norm::NormExponent;
use num_rational::Rational64;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeichRing {
    zq: Zq,
    names: Vec<String>,
    depth: u32,
    scale: i64,
    d: Rational64,
    dcap: i64,
}

impl TeichRing {
    pub fn new(p: u32, n: u32, names: &[&str], d: Rational64, depth: u32) -> Arc<Self> {
        let scale = (p as i64).pow(depth);
        Arc::new(TeichRing {
            zq: Zq::new(p, n),
            names: names.iter().map(|s| s.to_string()).collect(),
            depth,
            scale,
            d,
            dcap: (d * scale).ceil().to_integer(),
        })
    }

    pub fn zq(&self) -> Zq {
        self.zq
    }
    pub fn p(&self) -> u32 {
        self.zq.p
    }
    pub fn n(&self) -> u32 {
        self.zq.n
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn nvars(&self) -> usize {
        self.names.len()
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn scale(&self) -> i64 {
        self.scale
    }
    pub fn d(&self) -> Rational64 {
        self.d
    }
    pub fn dcap(&self) -> i64 {
        self.dcap
    }

    /// All monomials of total degree `< D`, in a fixed order (lexicographic on
    /// numerators). `None` beyond `limit`.
    pub fn monomials(&self, limit: usize) -> Option<Vec<PerfMonomial>> {
        let mut out = Vec::new();
        let mut cur = vec![0i64; self.nvars()];
        fn rec(i: usize, rem: i64, cur: &mut Vec<i64>, out: &mut Vec<PerfMonomial>, limit: usize) -> bool {
            if i == cur.len() {
                if out.len() >= limit {
                    return false;
                }
                out.push(PerfMonomial(cur.clone().into_boxed_slice()));
                return true;
            }
            for e in 0..rem {
                cur[i] = e;
                if !rec(i + 1, rem - e, cur, out, limit) {
                    return false;
                }
            }
            cur[i] = 0;
            true
        }
        if rec(0, self.dcap, &mut cur, &mut out, limit) {
            Some(out)
        } else {
            None
        }
    }

    pub fn monomial_degree(&self, m: &PerfMonomial) -> Rational64 {
        Rational64::new(m.total(), self.scale)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct TeichPoly {
    ring: Arc<TeichRing>,
    terms: BTreeMap<PerfMonomial, u32>,
}

impl fmt::Debug for TeichPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TeichPoly({self})")
    }
}

impl fmt::Display for TeichPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let fs: Vec<String> = m
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e != 0)
                    .map(|(i, &e)| {
                        let r = Rational64::new(e, self.ring.scale);
                        if r == Rational64::from_integer(1) {
                            format!("[{}]", self.ring.names[i])
                        } else if r.is_integer() {
                            format!("[{}]^{}", self.ring.names[i], r)
                        } else {
                            format!("[{}]^({})", self.ring.names[i], r)
                        }
                    })
                    .collect();
                if fs.is_empty() {
                    format!("{c}")
                } else if *c == 1 {
                    fs.join("*")
                } else {
                    format!("{c}*{}", fs.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl TeichPoly {
    pub fn zero(ring: &Arc<TeichRing>) -> Self {
        TeichPoly { ring: ring.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(ring: &Arc<TeichRing>, c: i64) -> Self {
        TeichPoly::monomial(ring, PerfMonomial::one(ring.nvars()), ring.zq.reduce(c))
    }

    pub fn one(ring: &Arc<TeichRing>) -> Self {
        TeichPoly::constant(ring, 1)
    }

    /// `c [x^m]`; zero if `m` is truncated.
    pub fn monomial(ring: &Arc<TeichRing>, m: PerfMonomial, c: u32) -> Self {
        let mut t = BTreeMap::new();
        let c = c % ring.zq.q;
        if c != 0 && m.total() < ring.dcap {
            t.insert(m, c);
        }
        TeichPoly { ring: ring.clone(), terms: t }
    }

    /// `[x_i]^e`.
    pub fn var_pow(ring: &Arc<TeichRing>, i: usize, e: Rational64) -> Result<Self> {
        let v = e * ring.scale;
        if !v.is_integer() || v < Rational64::from_integer(0) {
            return Err(Error::PrecisionExhausted(format!("exponent {e} not at depth {}", ring.depth)));
        }
        let mut m = vec![0i64; ring.nvars()];
        m[i] = v.to_integer();
        Ok(TeichPoly::monomial(ring, PerfMonomial(m.into_boxed_slice()), 1))
    }

    /// Reads `2*x^(1/2)*y + 1` as `2 [x^(1/2) y] + 1`: every monomial is a
    /// Teichmuller lift, coefficients are integers.
    pub fn parse(ring: &Arc<TeichRing>, s: &str) -> Result<Self> {
        let mut acc = TeichPoly::zero(ring);
        for (c, factors) in crate::fpring::parse::parse_poly(s)? {
            let mut t = TeichPoly::constant(ring, c);
            for (name, e) in factors {
                let i = ring
                    .names
                    .iter()
                    .position(|v| *v == name)
                    .ok_or_else(|| Error::Parse(format!("unknown variable {name}")))?;
                t = t.mul(&TeichPoly::var_pow(ring, i, e)?)?;
            }
            acc = acc.add(&t)?;
        }
        Ok(acc)
    }

    pub fn ring(&self) -> &Arc<TeichRing> {
        &self.ring
    }

    pub fn terms(&self) -> &BTreeMap<PerfMonomial, u32> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &PerfMonomial) -> u32 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    fn check(&self, o: &TeichPoly) -> Result<()> {
        if Arc::ptr_eq(&self.ring, &o.ring) || *self.ring == *o.ring {
            Ok(())
        } else {
            Err(Error::RingMismatch)
        }
    }

    pub fn add(&self, o: &TeichPoly) -> Result<TeichPoly> {
        self.check(o)?;
        let zq = self.ring.zq;
        let mut t = self.terms.clone();
        for (m, &c) in &o.terms {
            let e = t.entry(m.clone()).or_insert(0);
            *e = zq.add(*e, c);
            if *e == 0 {
                t.remove(m);
            }
        }
        Ok(TeichPoly { ring: self.ring.clone(), terms: t })
    }

    pub fn neg(&self) -> TeichPoly {
        let zq = self.ring.zq;
        TeichPoly { ring: self.ring.clone(), terms: self.terms.iter().map(|(m, &c)| (m.clone(), zq.neg(c))).collect() }
    }

    pub fn sub(&self, o: &TeichPoly) -> Result<TeichPoly> {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: i64) -> TeichPoly {
        let zq = self.ring.zq;
        let k = zq.reduce(k);
        TeichPoly {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter_map(|(m, &c)| {
                    let v = zq.mul(c, k);
                    (v != 0).then(|| (m.clone(), v))
                })
                .collect(),
        }
    }

    pub fn mul(&self, o: &TeichPoly) -> Result<TeichPoly> {
        self.check(o)?;
        let zq = self.ring.zq;
        let mut acc: HashMap<PerfMonomial, u64> = HashMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &o.terms {
                let m = PerfMonomial(ma.0.iter().zip(mb.0.iter()).map(|(a, b)| a + b).collect());
                if m.total() >= self.ring.dcap {
                    continue;
                }
                let e = acc.entry(m).or_insert(0);
                *e = (*e + ca as u64 * cb as u64) % zq.q as u64;
            }
        }
        Ok(TeichPoly {
            ring: self.ring.clone(),
            terms: acc.into_iter().filter(|(_, c)| *c != 0).map(|(m, c)| (m, c as u32)).collect(),
        })
    }

    pub fn pow(&self, mut e: u64) -> Result<TeichPoly> {
        let mut base = self.clone();
        let mut acc = TeichPoly::one(&self.ring);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Weighted norm exponent: `min (v_p(c_m) + deg m)`.
    pub fn weighted_norm(&self) -> NormExponent {
        self.terms
            .iter()
            .map(|(m, &c)| {
                NormExponent::finite(Rational64::from_integer(self.ring.zq.val(c) as i64) + self.ring.monomial_degree(m))
            })
            .fold(NormExponent::INFINITY, NormExponent::min)
    }

    /// The mod-p reduction as a digit-ring element.
    pub fn reduce_mod_p(&self, target: &Arc<RingPresentation>) -> Result<PerfPoly> {
        let mut acc = PerfPoly::zero(target);
        for (m, &c) in &self.terms {
            if c % self.ring.p() != 0 {
                acc = acc.add(&self.monomial_in(target, m)?.scalar_mul(c as i64))?;
            }
        }
        Ok(acc)
    }

    fn monomial_in(&self, target: &Arc<RingPresentation>, m: &PerfMonomial) -> Result<PerfPoly> {
        if target.names() != self.ring.names.as_slice() {
            return Err(Error::RingMismatch);
        }
        let exps: Vec<Rational64> = m.0.iter().map(|&e| Rational64::new(e, self.ring.scale)).collect();
        PerfPoly::monomial(target, &exps)
    }

    /// Image `sum c_m [x^m]` in the Witt ring over `target`.
    pub fn to_witt(&self, target: &Arc<RingPresentation>) -> Result<WittVec> {
        let len = self.ring.n() as usize;
        let mut acc = WittVec::zero(target, len);
        for (m, &c) in &self.terms {
            let t = WittVec::teichmuller(&self.monomial_in(target, m)?, len);
            acc = acc.add(&t.mul(&WittVec::from_int(target, len, c as i64))?)?;
        }
        Ok(acc)
    }

    /// Teichmuller lift of a digit polynomial:
    /// `[f] = (lift f^(1/p^(n-1)))^(p^(n-1)) mod p^n`. Needs depth for the root.
    pub fn teichmuller_of(ring: &Arc<TeichRing>, f: &PerfPoly) -> Result<TeichPoly> {
        if f.ring().names() != ring.names.as_slice() || f.ring().p() != ring.p() {
            return Err(Error::RingMismatch);
        }
        let n = ring.n();
        let pn1 = (ring.p() as i64).pow(n - 1);
        let num = ring.scale;
        let den = f.ring().scale() * pn1;
        let mut g = TeichPoly::zero(ring);
        for (m, &c) in f.terms() {
            let mut v = Vec::with_capacity(m.0.len());
            for &e in m.0.iter() {
                if e < 0 {
                    return Err(Error::Invalid("Teichmuller model has no inverted variables".into()));
                }
                let x = Rational64::new(e * num, den);
                if !x.is_integer() {
                    return Err(Error::PrecisionExhausted(format!(
                        "p^{}-th root needs depth beyond {}",
                        n - 1,
                        ring.depth
                    )));
                }
                v.push(x.to_integer());
            }
            let mono = PerfMonomial(v.into_boxed_slice());
            g.terms.insert(mono, c);
        }
        g.pow(pn1 as u64)
    }

    /// Coordinates in a monomial basis.
    pub fn to_vector(&self, index: &HashMap<PerfMonomial, usize>, dim: usize) -> Result<Vec<u32>> {
        let mut v = vec![0u32; dim];
        for (m, &c) in &self.terms {
            let i = index.get(m).ok_or_else(|| Error::ResourceBound("monomial outside basis".into()))?;
            v[*i] = c;
        }
        Ok(v)
    }

    pub fn from_vector(ring: &Arc<TeichRing>, basis: &[PerfMonomial], v: &[u32]) -> TeichPoly {
        let mut t = BTreeMap::new();
        for (m, &c) in basis.iter().zip(v) {
            let c = c % ring.zq.q;
            if c != 0 {
                t.insert(m.clone(), c);
            }
        }
        TeichPoly { ring: ring.clone(), terms: t }
    }
}

impl TeichPoly {
    pub fn constant_coeff(&self) -> u32 {
        self.coeff(&PerfMonomial::one(self.ring.nvars()))
    }

    /// Units are exactly the elements whose constant coefficient is prime to
    /// p: every non-constant monomial is nilpotent under the degree cap.
    pub fn is_unit(&self) -> bool {
        !self.constant_coeff().is_multiple_of(self.ring.p())
    }

    /// Inverse by a finite Neumann series around the constant coefficient.
    pub fn inverse(&self) -> Result<TeichPoly> {
        let zq = self.ring.zq;
        let c0 = zq.inv(self.constant_coeff()).ok_or(Error::NotAUnit)?;
        // 1 - c0 u has no constant term, hence is nilpotent
        let e = TeichPoly::one(&self.ring).sub(&self.scale(c0 as i64))?;
        let mut acc = TeichPoly::one(&self.ring);
        let mut pw = TeichPoly::one(&self.ring);
        for _ in 0..(self.ring.dcap as u64 + 1) * self.ring.n() as u64 + 1 {
            pw = pw.mul(&e)?;
            if pw.is_zero() {
                return Ok(acc.scale(c0 as i64));
            }
            acc = acc.add(&pw)?;
        }
        Err(Error::NonConvergent("Neumann series did not terminate".into()))
    }

    /// Witt Frobenius `[m] -> [m^p]`, landing in a ring of one less depth
    /// whose degree cap is `p` times larger. Exponent numerators are kept.
    pub fn frobenius_into(&self, target: &Arc<TeichRing>) -> Result<TeichPoly> {
        if target.names != self.ring.names || target.zq != self.ring.zq || target.scale * self.ring.p() as i64 != self.ring.scale {
            return Err(Error::RingMismatch);
        }
        let mut out = TeichPoly::zero(target);
        for (m, &c) in &self.terms {
            if m.total() < target.dcap {
                out.terms.insert(m.clone(), c);
            }
        }
        Ok(out)
    }

    /// The same element in a ring with the same variables and modulus but
    /// possibly larger depth or different cap. Monomials beyond the cap drop.
    pub fn change_ring(&self, target: &Arc<TeichRing>) -> Result<TeichPoly> {
        if target.names != self.ring.names || target.zq != self.ring.zq || target.scale % self.ring.scale != 0 {
            return Err(Error::RingMismatch);
        }
        let k = target.scale / self.ring.scale;
        let mut out = TeichPoly::zero(target);
        for (m, &c) in &self.terms {
            let mm = PerfMonomial(m.0.iter().map(|&e| e * k).collect());
            if mm.total() < target.dcap {
                out.terms.insert(mm, c);
            }
        }
        Ok(out)
    }

    /// `sum_k p^k [abar_k]` from the Teichmuller digits of a Witt vector whose
    /// ring has the same variable names.
    pub fn from_witt(ring: &Arc<TeichRing>, w: &WittVec) -> Result<TeichPoly> {
        let digits = w.teichmuller_digits()?;
        let mut acc = TeichPoly::zero(ring);
        for (k, b) in digits.iter().enumerate().take(ring.n() as usize) {
            if b.is_zero() {
                continue;
            }
            let t = TeichPoly::teichmuller_of(ring, b)?;
            acc = acc.add(&t.scale((ring.p() as i64).pow(k as u32)))?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpring::PrecisionBudget;
    use proptest::prelude::*;

    fn rings(n: u32, d: i64, depth: u32) -> (Arc<TeichRing>, Arc<RingPresentation>) {
        (
            TeichRing::new(2, n, &["x"], Rational64::from_integer(d), depth),
            RingPresentation::free(2, &["x"], PrecisionBudget::simple(n, d, depth)),
        )
    }

    #[test]
    fn linearization_dimensions() {
        let t1 = TeichRing::new(2, 1, &["x"], Rational64::from_integer(2), 1);
        assert_eq!(t1.monomials(100).unwrap().len(), 4);
        let t2 = TeichRing::new(2, 2, &["x"], Rational64::from_integer(2), 1);
        assert_eq!(t2.monomials(100).unwrap().len() as u32 * t2.n(), 8);
        let t3 = TeichRing::new(2, 3, &["x"], Rational64::new(1, 4), 1);
        assert_eq!(t3.monomials(100).unwrap().len(), 1);
    }

    #[test]
    fn teichmuller_of_binomial_matches_witt() {
        let (t, r) = rings(3, 4, 3);
        let f = PerfPoly::parse(&r, "x + x^(1/2)").unwrap_or_else(|_| unreachable!());
        // the root needs two extra levels of depth
        let t_deep = TeichRing::new(2, 3, &["x"], Rational64::from_integer(4), 5);
        let r_deep = RingPresentation::free(2, &["x"], PrecisionBudget::simple(3, 4, 5));
        let f_deep = f.change_ring(&r_deep).unwrap();
        let tf = TeichPoly::teichmuller_of(&t_deep, &f_deep).unwrap();
        assert_eq!(tf.to_witt(&r_deep).unwrap(), WittVec::teichmuller(&f_deep, 3));
        let g = PerfPoly::parse(&r, "x^(1/8)").unwrap();
        assert!(matches!(TeichPoly::teichmuller_of(&t, &g), Err(Error::PrecisionExhausted(_))));
    }

    fn arb(ring: Arc<TeichRing>) -> impl Strategy<Value = TeichPoly> {
        let cap = ring.dcap().min(8);
        let q = ring.zq().q;
        prop::collection::vec((0..cap, 0..q), 0..5).prop_map(move |ts| {
            let mut acc = TeichPoly::zero(&ring);
            for (e, c) in ts {
                acc = acc.add(&TeichPoly::monomial(&ring, PerfMonomial(vec![e].into_boxed_slice()), c)).unwrap();
            }
            acc
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn witt_image_is_ring_hom(a in arb(rings(3, 4, 2).0), b in arb(rings(3, 4, 2).0)) {
            let r = rings(3, 4, 2).1;
            let (wa, wb) = (a.to_witt(&r)?, b.to_witt(&r)?);
            prop_assert_eq!(a.add(&b)?.to_witt(&r)?, wa.add(&wb)?);
            prop_assert_eq!(a.mul(&b)?.to_witt(&r)?, wa.mul(&wb)?);
            prop_assert_eq!(a.neg().to_witt(&r)?, wa.neg()?);
        }

        #[test]
        fn weighted_norm_multiplicative(a in arb(TeichRing::new(2, 6, &["x"], Rational64::from_integer(64), 2)),
                                        b in arb(TeichRing::new(2, 6, &["x"], Rational64::from_integer(64), 2))) {
            // far from both truncations the norm is multiplicative
            let (na, nb) = (a.weighted_norm(), b.weighted_norm());
            prop_assume!(na.value().is_some_and(|v| v < Rational64::from_integer(3)));
            prop_assume!(nb.value().is_some_and(|v| v < Rational64::from_integer(3)));
            prop_assert_eq!(a.mul(&b)?.weighted_norm(), na.add(nb));
        }
    }
}
