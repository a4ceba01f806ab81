//! Truncated Witt vectors over truncated perfect F_p-algebras.
//!
//! A `WittVec` stores classical Witt coordinates `a_k`; the Teichmuller digit
//! `k` is `a_k^(1/p^k)`, so `(a_0, a_1, ..) = sum p^k [a_k^(1/p^k)]`. Truncating
//! every coordinate at degree `D` is a ring quotient, so all arithmetic is exact
//! in `W_n(R / (deg >= D))`; no Frobenius roots are needed except by `delta` and
//! by the digit accessors.

pub mod algorithms;
pub mod structure;
pub mod teich;

pub use algorithms::*;
pub use structure::{StructurePolyCache, IntPoly, ModPPoly, CarryPoly};
pub use teich::{TeichPoly, TeichRing};

use crate::arith::Zq;
use crate::error::{Error, Result};
use crate::fpring::{same_ring, PerfPoly, RingPresentation};
use crate::norm::NormExponent;
use num_rational::Rational64;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// `x^e` for a digit polynomial, assembled from Frobenius twists by the base-p
/// digits of `e`.
struct PowCache<'a> {
    base: &'a PerfPoly,
    p: u32,
    memo: HashMap<u32, PerfPoly>,
}

impl<'a> PowCache<'a> {
    fn new(base: &'a PerfPoly) -> Self {
        PowCache { base, p: base.ring().p(), memo: HashMap::new() }
    }

    fn pow(&mut self, e: u32) -> Result<PerfPoly> {
        if let Some(v) = self.memo.get(&e) {
            return Ok(v.clone());
        }
        let mut acc = PerfPoly::one(self.base.ring());
        let mut rest = e;
        let mut j = 0;
        while rest > 0 && !acc.is_zero() {
            let d = rest % self.p;
            if d > 0 {
                let f = self.base.frobenius_pow(j)?;
                acc = acc.mul_raw(&f.pow(d as u64)?)?;
            }
            rest /= self.p;
            j += 1;
        }
        self.memo.insert(e, acc.clone());
        Ok(acc)
    }
}

fn eval_modp(poly: &ModPPoly, caches: &mut [PowCache], ring: &Arc<RingPresentation>) -> Result<PerfPoly> {
    let mut sum = PerfPoly::zero(ring);
    'terms: for (m, c) in &poly.terms {
        let mut t = PerfPoly::constant(ring, *c as i64);
        for (i, &e) in m.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if caches[i].base.is_zero() {
                continue 'terms;
            }
            let f = caches[i].pow(e as u32)?;
            t = t.mul_raw(&f)?;
            if t.is_zero() {
                continue 'terms;
            }
        }
        sum = sum.add_raw(&t);
    }
    Ok(sum)
}

/// Truncated Witt vector in classical coordinates.
#[derive(Clone)]
pub struct WittVec {
    ring: Arc<RingPresentation>,
    coords: Vec<PerfPoly>,
}

impl PartialEq for WittVec {
    fn eq(&self, o: &Self) -> bool {
        same_ring(&self.ring, &o.ring) && self.coords == o.coords
    }
}
impl Eq for WittVec {}

impl fmt::Debug for WittVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WittVec{self}")
    }
}

impl fmt::Display for WittVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl WittVec {
    pub fn from_coords(ring: &Arc<RingPresentation>, coords: Vec<PerfPoly>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Invalid("Witt vector needs length >= 1".into()));
        }
        for c in &coords {
            if !same_ring(c.ring(), ring) {
                return Err(Error::RingMismatch);
            }
        }
        Ok(WittVec { ring: ring.clone(), coords })
    }

    pub fn zero(ring: &Arc<RingPresentation>, len: usize) -> Self {
        WittVec { ring: ring.clone(), coords: vec![PerfPoly::zero(ring); len] }
    }

    pub fn one(ring: &Arc<RingPresentation>, len: usize) -> Self {
        WittVec::teichmuller(&PerfPoly::one(ring), len)
    }

    /// The image of an integer. Classical coordinates of an integer are its
    /// Teichmuller digits, since those lie in F_p.
    pub fn from_int(ring: &Arc<RingPresentation>, len: usize, k: i64) -> Self {
        let zq = Zq::new(ring.p(), len as u32);
        let digits = zq.teichmuller_digits(zq.reduce(k));
        WittVec { ring: ring.clone(), coords: digits.iter().map(|&d| PerfPoly::constant(ring, d as i64)).collect() }
    }

    /// `[a] = (a, 0, ..., 0)`.
    pub fn teichmuller(a: &PerfPoly, len: usize) -> Self {
        let ring = a.ring();
        let mut coords = vec![PerfPoly::zero(ring); len];
        coords[0] = a.clone();
        WittVec { ring: ring.clone(), coords }
    }

    /// `sum p^k [d_k]` from Teichmuller digits `d_k`.
    pub fn from_teichmuller_digits(ring: &Arc<RingPresentation>, digits: &[PerfPoly]) -> Result<Self> {
        let len = digits.len();
        let mut acc = WittVec::zero(ring, len);
        for (k, d) in digits.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            let mut coords = vec![PerfPoly::zero(ring); len];
            coords[k] = d.frobenius_pow(k as u32)?;
            acc = acc.add(&WittVec { ring: ring.clone(), coords })?;
        }
        Ok(acc)
    }

    pub fn ring(&self) -> &Arc<RingPresentation> {
        &self.ring
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn p(&self) -> u32 {
        self.ring.p()
    }

    pub fn coords(&self) -> &[PerfPoly] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    fn cache(&self, len: usize) -> Result<Arc<StructurePolyCache>> {
        StructurePolyCache::get(self.p(), len)
    }

    fn check(&self, o: &WittVec) -> Result<usize> {
        if !same_ring(&self.ring, &o.ring) {
            return Err(Error::RingMismatch);
        }
        Ok(self.len().min(o.len()))
    }

    fn binary(&self, o: &WittVec, which: fn(&StructurePolyCache) -> &Vec<ModPPoly>) -> Result<WittVec> {
        let len = self.check(o)?;
        let cache = self.cache(len)?;
        let args: Vec<&PerfPoly> = self.coords[..len].iter().chain(&o.coords[..len]).collect();
        let mut caches: Vec<PowCache> = args.iter().map(|a| PowCache::new(a)).collect();
        let polys = which(&cache);
        let coords = (0..len).map(|k| eval_modp(&polys[k], &mut caches, &self.ring)).collect::<Result<_>>()?;
        Ok(WittVec { ring: self.ring.clone(), coords })
    }

    pub fn add(&self, o: &WittVec) -> Result<WittVec> {
        self.binary(o, |c| &c.add_p)
    }

    pub fn mul(&self, o: &WittVec) -> Result<WittVec> {
        // Teichmuller factors multiply coordinatewise: [t] * a = (t a_0, t^p a_1, ..)
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            return o.teich_scale(&self.coords[0], self.len());
        }
        if o.coords[1..].iter().all(|c| c.is_zero()) {
            return self.teich_scale(&o.coords[0], o.len());
        }
        self.binary(o, |c| &c.mul_p)
    }

    /// `[t] * self`, truncated to length `len`.
    fn teich_scale(&self, t: &PerfPoly, len: usize) -> Result<WittVec> {
        let len = len.min(self.len());
        if !same_ring(t.ring(), &self.ring) {
            return Err(Error::RingMismatch);
        }
        let coords = (0..len)
            .map(|k| self.coords[k].mul_raw(&t.frobenius_pow(k as u32)?))
            .collect::<Result<_>>()?;
        Ok(WittVec { ring: self.ring.clone(), coords })
    }

    pub fn neg(&self) -> Result<WittVec> {
        if self.p() != 2 {
            return Ok(WittVec { ring: self.ring.clone(), coords: self.coords.iter().map(|c| c.neg()).collect() });
        }
        let cache = self.cache(self.len())?;
        let mut caches: Vec<PowCache> = self.coords.iter().map(PowCache::new).collect();
        let coords = (0..self.len()).map(|k| eval_modp(&cache.neg_p[k], &mut caches, &self.ring)).collect::<Result<_>>()?;
        Ok(WittVec { ring: self.ring.clone(), coords })
    }

    pub fn sub(&self, o: &WittVec) -> Result<WittVec> {
        self.add(&o.neg()?)
    }

    pub fn pow(&self, mut e: u64) -> Result<WittVec> {
        let mut base = self.clone();
        let mut acc = WittVec::one(&self.ring, self.len());
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

    pub fn scale_int(&self, k: i64) -> Result<WittVec> {
        self.mul(&WittVec::from_int(&self.ring, self.len(), k))
    }

    /// `V(a_0, a_1, ..) = (0, a_0, a_1, ..)`, dropping the last coordinate.
    pub fn verschiebung(&self) -> WittVec {
        let mut coords = vec![PerfPoly::zero(&self.ring)];
        coords.extend(self.coords[..self.len() - 1].iter().cloned());
        WittVec { ring: self.ring.clone(), coords }
    }

    /// Coordinatewise p-th power.
    pub fn frobenius(&self) -> Result<WittVec> {
        let coords = self.coords.iter().map(|c| c.frobenius()).collect::<Result<_>>()?;
        Ok(WittVec { ring: self.ring.clone(), coords })
    }

    /// Coordinatewise p-th root, if the depth allows.
    pub fn frobenius_inverse(&self) -> Result<WittVec> {
        let coords = self.coords.iter().map(|c| c.frobenius_inverse()).collect::<Result<_>>()?;
        Ok(WittVec { ring: self.ring.clone(), coords })
    }

    /// Keeps the first `len` coordinates.
    pub fn truncate(&self, len: usize) -> WittVec {
        WittVec { ring: self.ring.clone(), coords: self.coords[..len.min(self.len())].to_vec() }
    }

    /// Moves every coordinate into another ring with the same variables.
    pub fn change_ring(&self, ring: &Arc<RingPresentation>, len: usize) -> Result<WittVec> {
        let coords = self.coords[..len.min(self.len())].iter().map(|c| c.change_ring(ring)).collect::<Result<_>>()?;
        Ok(WittVec { ring: ring.clone(), coords })
    }

    /// Teichmuller digits `a_k^(1/p^k)`.
    pub fn teichmuller_digits(&self) -> Result<Vec<PerfPoly>> {
        self.coords.iter().enumerate().map(|(k, c)| c.frobenius_inverse_pow(k as u32)).collect()
    }

    /// `sup |digit_k|`: alpha = min_k alpha(a_k)/p^k.
    pub fn gauss_norm(&self) -> NormExponent {
        let p = self.p() as i64;
        self.coords
            .iter()
            .enumerate()
            .map(|(k, c)| c.gauss_norm().scale(Rational64::new(1, p.pow(k as u32))))
            .fold(NormExponent::INFINITY, NormExponent::min)
    }

    /// `sup rho^k |digit_k|` with `rho = theta`: alpha = min_k (k + alpha(a_k)/p^k).
    pub fn weighted_gauss_norm(&self) -> NormExponent {
        let p = self.p() as i64;
        self.coords
            .iter()
            .enumerate()
            .map(|(k, c)| {
                c.gauss_norm().scale(Rational64::new(1, p.pow(k as u32))).shift(Rational64::from_integer(k as i64))
            })
            .fold(NormExponent::INFINITY, NormExponent::min)
    }

    /// Values of the weighted norm exponent strictly below this bound are never
    /// hidden by truncation: `min(n, min_k (k + D/p^k))`.
    pub fn visibility_bound(ring: &RingPresentation, len: usize) -> Rational64 {
        let p = ring.p() as i64;
        let d = ring.budget().d;
        (0..len)
            .map(|k| Rational64::from_integer(k as i64) + d / p.pow(k as u32))
            .fold(Rational64::from_integer(len as i64), |a, b| a.min(b))
    }

    /// `delta(x) = (F(x) - x^p) / p`, of length `n - 1` over the ring truncated
    /// at `D/p`: the division by p is a shift followed by a p-th root.
    pub fn delta(&self) -> Result<WittVec> {
        if self.len() < 2 {
            return Err(Error::PrecisionExhausted("delta needs length >= 2".into()));
        }
        let z = self.frobenius()?.sub(&self.pow(self.p() as u64)?)?;
        if !z.coords[0].is_zero() {
            return Err(Error::BadWitness("F(x) - x^p has nonzero constant coordinate".into()));
        }
        let target = delta_ring(&self.ring)?;
        let coords = z.coords[1..]
            .iter()
            .map(|c| c.frobenius_inverse()?.change_ring(&target))
            .collect::<Result<_>>()?;
        Ok(WittVec { ring: target, coords })
    }

    /// `x^{p^k}` norm estimate: weighted alpha of `x^{p^k}` divided by `p^k`.
    pub fn spectral_seminorm_estimate(&self, k: u32) -> Result<NormExponent> {
        let pk = (self.p() as u64).pow(k);
        let y = self.pow(pk)?;
        let a = y.weighted_gauss_norm();
        let bound = WittVec::visibility_bound(&self.ring, self.len());
        if !self.is_zero() && a.value().is_none_or(|v| v >= bound) {
            return Err(Error::PrecisionExhausted(format!(
                "x^(p^{k}) leaves the visible range (weighted alpha >= {})",
                crate::norm::rat_string(bound)
            )));
        }
        Ok(a.scale(Rational64::new(1, pk as i64)))
    }
}

/// Ring for `delta` outputs: same presentation with `D` divided by `p`.
pub fn delta_ring(ring: &Arc<RingPresentation>) -> Result<Arc<RingPresentation>> {
    let b = ring.budget();
    ring.with_budget(b.with_d(b.d / ring.p() as i64))
}

pub fn w_add(x: &WittVec, y: &WittVec) -> Result<WittVec> {
    x.add(y)
}
pub fn w_mul(x: &WittVec, y: &WittVec) -> Result<WittVec> {
    x.mul(y)
}
pub fn w_neg(x: &WittVec) -> Result<WittVec> {
    x.neg()
}
pub fn gauss_norm_witt(x: &WittVec) -> NormExponent {
    x.gauss_norm()
}
pub fn weighted_gauss_norm(x: &WittVec) -> NormExponent {
    x.weighted_gauss_norm()
}
