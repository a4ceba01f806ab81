//! Integer structure polynomials of truncated Witt vectors, derived from ghost
//! components and certified by exact re-expansion.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

/// Default cap on the total number of stored terms across all polynomials.
pub const DEFAULT_TERM_CAP: usize = 400_000;

/// Integer polynomial in a fixed number of variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPoly {
    nv: usize,
    terms: BTreeMap<Box<[u16]>, BigInt>,
}

impl IntPoly {
    pub fn zero(nv: usize) -> Self {
        IntPoly { nv, terms: BTreeMap::new() }
    }

    pub fn constant(nv: usize, c: BigInt) -> Self {
        let mut p = IntPoly::zero(nv);
        if !c.is_zero() {
            p.terms.insert(vec![0u16; nv].into_boxed_slice(), c);
        }
        p
    }

    pub fn var(nv: usize, i: usize) -> Self {
        let mut e = vec![0u16; nv];
        e[i] = 1;
        let mut p = IntPoly::zero(nv);
        p.terms.insert(e.into_boxed_slice(), BigInt::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nv
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u16], &BigInt)> {
        self.terms.iter().map(|(k, v)| (&**k, v))
    }

    pub fn add(&self, o: &IntPoly) -> IntPoly {
        let mut t = self.terms.clone();
        for (m, c) in &o.terms {
            let e = t.entry(m.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                t.remove(m);
            }
        }
        IntPoly { nv: self.nv, terms: t }
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly { nv: self.nv, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn sub(&self, o: &IntPoly) -> IntPoly {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: &BigInt) -> IntPoly {
        if k.is_zero() {
            return IntPoly::zero(self.nv);
        }
        IntPoly { nv: self.nv, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    /// Exact division of every coefficient; `None` if some coefficient is not divisible.
    pub fn div_exact(&self, k: &BigInt) -> Option<IntPoly> {
        let mut t = BTreeMap::new();
        for (m, c) in &self.terms {
            let (q, r) = c.div_rem(k);
            if !r.is_zero() {
                return None;
            }
            t.insert(m.clone(), q);
        }
        Some(IntPoly { nv: self.nv, terms: t })
    }

    pub fn mul(&self, o: &IntPoly) -> IntPoly {
        let mut acc: HashMap<Box<[u16]>, BigInt> = HashMap::with_capacity(self.len() * o.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m: Box<[u16]> = ma.iter().zip(mb.iter()).map(|(a, b)| a + b).collect();
                *acc.entry(m).or_insert_with(BigInt::zero) += ca * cb;
            }
        }
        IntPoly { nv: self.nv, terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }

    pub fn pow(&self, mut e: u64) -> IntPoly {
        let mut base = self.clone();
        let mut acc = IntPoly::constant(self.nv, BigInt::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Evaluation at integer points.
    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        let mut s = BigInt::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t *= num_traits::pow(x[i].clone(), e as usize);
                }
            }
            s += t;
        }
        s
    }

    /// Coefficients reduced into `0..p`, zero terms dropped.
    pub fn mod_p(&self, p: u32) -> ModPPoly {
        let pb = BigInt::from(p);
        let terms = self
            .terms
            .iter()
            .filter_map(|(m, c)| {
                let r = c.mod_floor(&pb);
                let r: u32 = r.try_into().unwrap();
                (r != 0).then(|| (m.clone(), r))
            })
            .collect();
        ModPPoly { terms }
    }

    /// Substitutes zero for the listed variables.
    pub fn specialize_zero(&self, zero_vars: &[usize]) -> IntPoly {
        IntPoly {
            nv: self.nv,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| zero_vars.iter().all(|&i| m[i] == 0))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }
}

/// Structure polynomial reduced mod p, ready for evaluation on digit rings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModPPoly {
    pub terms: Vec<(Box<[u16]>, u32)>,
}

/// Teichmuller carry polynomial: `[X] + [Y]` has Teichmuller digit `k` equal to
/// this homogeneous degree-one polynomial in fractional powers of `X`, `Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarryPoly {
    pub terms: Vec<(Rational64, Rational64, u32)>,
}

/// Which identity of a structure polynomial failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostViolation {
    pub op: &'static str,
    pub k: usize,
    pub identity: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheCertificate {
    /// All ghost divisions were exact.
    pub integral: bool,
    pub violations: Vec<GhostViolation>,
    pub term_counts: Vec<(usize, usize, usize)>,
}

impl CacheCertificate {
    pub fn ok(&self) -> bool {
        self.integral && self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct StructurePolyCache {
    pub p: u32,
    pub n: usize,
    pub add: Vec<IntPoly>,
    pub mul: Vec<IntPoly>,
    pub neg: Vec<IntPoly>,
    pub carry: Vec<CarryPoly>,
    pub add_p: Vec<ModPPoly>,
    pub mul_p: Vec<ModPPoly>,
    pub neg_p: Vec<ModPPoly>,
    pub certificate: CacheCertificate,
}

/// `w_k(Z) = sum_{i<=k} p^i Z_i^{p^{k-i}}` on variables `offset..offset+k`.
pub fn ghost_component(p: u32, k: usize, nv: usize, offset: usize) -> IntPoly {
    let mut s = IntPoly::zero(nv);
    for i in 0..=k {
        let t = IntPoly::var(nv, offset + i).pow((p as u64).pow((k - i) as u32));
        s = s.add(&t.scale(&BigInt::from(p).pow(i as u32)));
    }
    s
}

/// Ghost component applied to a list of polynomials.
fn ghost_of(p: u32, polys: &[IntPoly], k: usize) -> IntPoly {
    let mut s = IntPoly::zero(polys[0].nvars());
    for (i, q) in polys.iter().enumerate().take(k + 1) {
        let t = q.pow((p as u64).pow((k - i) as u32));
        s = s.add(&t.scale(&BigInt::from(p).pow(i as u32)));
    }
    s
}

/// Solves `ghost_k(out) = target_k` for each k by the recursion
/// `out_k = (target_k - sum_{i<k} p^i out_i^{p^{k-i}}) / p^k`.
fn recurse(p: u32, n: usize, targets: &[IntPoly], cap: usize, used: &mut usize) -> Result<(Vec<IntPoly>, bool)> {
    let mut out: Vec<IntPoly> = Vec::with_capacity(n);
    let mut integral = true;
    for (k, target) in targets.iter().enumerate().take(n) {
        let mut rem = target.clone();
        for (i, q) in out.iter().enumerate() {
            let t = q.pow((p as u64).pow((k - i) as u32));
            *used += t.len();
            if *used > cap {
                return Err(Error::ResourceBound(format!("structure polynomials exceed {cap} terms")));
            }
            rem = rem.sub(&t.scale(&BigInt::from(p).pow(i as u32)));
        }
        let pk = BigInt::from(p).pow(k as u32);
        let q = match rem.div_exact(&pk) {
            Some(q) => q,
            None => {
                integral = false;
                IntPoly::zero(rem.nvars())
            }
        };
        *used += q.len();
        out.push(q);
    }
    Ok((out, integral))
}

impl StructurePolyCache {
    pub fn build(p: u32, n: usize) -> Result<Self> {
        Self::build_with_cap(p, n, DEFAULT_TERM_CAP)
    }

    pub fn build_with_cap(p: u32, n: usize, cap: usize) -> Result<Self> {
        if !crate::arith::is_prime(p) || n == 0 {
            return Err(Error::Invalid(format!("need prime p and n >= 1 (p={p}, n={n})")));
        }
        let nv = 2 * n;
        let mut used = 0usize;
        let wx: Vec<IntPoly> = (0..n).map(|k| ghost_component(p, k, nv, 0)).collect();
        let wy: Vec<IntPoly> = (0..n).map(|k| ghost_component(p, k, nv, n)).collect();
        let add_t: Vec<IntPoly> = wx.iter().zip(&wy).map(|(a, b)| a.add(b)).collect();
        let mul_t: Vec<IntPoly> = wx.iter().zip(&wy).map(|(a, b)| a.mul(b)).collect();
        let wxn: Vec<IntPoly> = (0..n).map(|k| ghost_component(p, k, n, 0)).collect();
        let neg_t: Vec<IntPoly> = wxn.iter().map(|a| a.neg()).collect();
        let (add, i1) = recurse(p, n, &add_t, cap, &mut used)?;
        let (mul, i2) = recurse(p, n, &mul_t, cap, &mut used)?;
        let (neg, i3) = recurse(p, n, &neg_t, cap, &mut used)?;
        let carry = (0..n).map(|k| carry_from(p, n, k, &add[k])).collect();
        let mut cache = StructurePolyCache {
            p,
            n,
            add_p: add.iter().map(|q| q.mod_p(p)).collect(),
            mul_p: mul.iter().map(|q| q.mod_p(p)).collect(),
            neg_p: neg.iter().map(|q| q.mod_p(p)).collect(),
            add,
            mul,
            neg,
            carry,
            certificate: CacheCertificate { integral: i1 && i2 && i3, violations: vec![], term_counts: vec![] },
        };
        cache.certificate.violations = cache.check_ghost_identities();
        cache.certificate.term_counts =
            (0..n).map(|k| (cache.add[k].len(), cache.mul[k].len(), cache.neg[k].len())).collect();
        Ok(cache)
    }

    /// Shared certified cache per `(p, n)`.
    pub fn get(p: u32, n: usize) -> Result<Arc<StructurePolyCache>> {
        type Registry = HashMap<(u32, usize), Arc<StructurePolyCache>>;
        static REG: OnceLock<Mutex<Registry>> = OnceLock::new();
        let reg = REG.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(c) = reg.lock().unwrap().get(&(p, n)) {
            return Ok(c.clone());
        }
        let c = Arc::new(StructurePolyCache::build(p, n)?);
        if !c.certificate.ok() {
            return Err(Error::BadWitness(format!("structure polynomials for p={p}, n={n} failed certification")));
        }
        reg.lock().unwrap().entry((p, n)).or_insert(c.clone());
        Ok(c)
    }

    /// Re-expands every ghost identity over the integers and lists failures.
    pub fn check_ghost_identities(&self) -> Vec<GhostViolation> {
        let (p, n) = (self.p, self.n);
        let nv = 2 * n;
        let mut bad = Vec::new();
        for k in 0..n {
            let wx = ghost_component(p, k, nv, 0);
            let wy = ghost_component(p, k, nv, n);
            if ghost_of(p, &self.add, k) != wx.add(&wy) {
                bad.push(GhostViolation { op: "add", k, identity: format!("w_{k}(S) = w_{k}(X) + w_{k}(Y)") });
            }
            if ghost_of(p, &self.mul, k) != wx.mul(&wy) {
                bad.push(GhostViolation { op: "mul", k, identity: format!("w_{k}(P) = w_{k}(X) * w_{k}(Y)") });
            }
            if ghost_of(p, &self.neg, k) != ghost_component(p, k, n, 0).neg() {
                bad.push(GhostViolation { op: "neg", k, identity: format!("w_{k}(N) = -w_{k}(X)") });
            }
        }
        bad
    }

    /// Test fixture: adds 1 to the addition polynomial `S_k`.
    pub fn corrupt_addition(&mut self, k: usize) {
        let one = IntPoly::constant(2 * self.n, BigInt::one());
        self.add[k] = self.add[k].add(&one);
        self.add_p[k] = self.add[k].mod_p(self.p);
    }

    pub fn total_terms(&self) -> usize {
        self.add.iter().chain(&self.mul).chain(&self.neg).map(|q| q.len()).sum()
    }
}

/// Specializes `S_k` to Teichmuller inputs `(X,0,..)`, `(Y,0,..)`, reduces mod p
/// and takes the `p^k`-th root.
fn carry_from(p: u32, n: usize, k: usize, s: &IntPoly) -> CarryPoly {
    let zero_vars: Vec<usize> = (1..n).chain(n + 1..2 * n).collect();
    let sp = s.specialize_zero(&zero_vars).mod_p(p);
    let pk = (p as i64).pow(k as u32);
    let mut terms: Vec<_> = sp
        .terms
        .iter()
        .map(|(m, c)| (Rational64::new(m[0] as i64, pk), Rational64::new(m[n] as i64, pk), *c))
        .collect();
    terms.sort();
    CarryPoly { terms }
}
