//! Quotients of truncated Witt rings by a primitive element.
//!
//! For `z = [t] - p` the quotient of `W(R+[t^(1/p^inf)])` is written in digit
//! form `sum c p^e [m]` with `e` on the `1/p^N` grid, `m` a monomial of `R+`
//! and `c` in `1..p`. Truncation keeps `e < n` and `e + deg m < D`, which is
//! exactly the image of the truncation of the source ring. Other primitive
//! elements are handled by normal forms on the finite linearization.

use crate::cech::{linearize_quotient, localization_ring, LaurentPoly, LinearizedRing, Side, DIM_LIMIT};
use crate::error::{Error, Result};
use crate::fpring::{PerfMonomial, PerfPoly, PrecisionBudget, RingPresentation};
use crate::linalg::{self, map_lengths, Echelon, MapLengths, QuotientSpace};
use crate::norm::NormExponent;
use crate::witt::{is_primitive, Primitivity, TeichPoly, TeichRing, WittVec};
use crate::Zq;
use num_rational::Rational64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

type Slot = (i64, PerfMonomial);
type Digits = BTreeMap<Slot, u32>;

#[derive(Debug, Clone)]
enum Kind {
    /// `t` is the source variable sent to `p`.
    Roots { t: usize },
    /// `W(R+)` itself, integer p-exponents only.
    Plain,
    General { z: TeichPoly, lin: Arc<LinearizedRing> },
}

#[derive(Debug)]
pub struct LensRing {
    base: Arc<TeichRing>,
    source: Arc<TeichRing>,
    kind: Kind,
    z: Option<WittVec>,
    certificate: Option<Primitivity>,
    base_monomials: Vec<PerfMonomial>,
}

impl PartialEq for LensRing {
    fn eq(&self, o: &Self) -> bool {
        self.base == o.base
            && self.source == o.source
            && match (&self.kind, &o.kind) {
                (Kind::Roots { t: a }, Kind::Roots { t: b }) => a == b,
                (Kind::Plain, Kind::Plain) => true,
                (Kind::General { z: a, .. }, Kind::General { z: b, .. }) => a == b,
                _ => false,
            }
    }
}

fn base_monomials(base: &TeichRing) -> Result<Vec<PerfMonomial>> {
    let monos = base.monomials(DIM_LIMIT).ok_or_else(|| Error::ResourceBound("too many base monomials".into()))?;
    Ok(monos.into_iter().filter(|m| m.total() < base.dcap()).collect())
}

impl LensRing {
    /// `W(R+)<p^(1/p^inf)>` as the quotient of `W(R+[t^(1/p^inf)])` by
    /// `[t] - p`, with `t` appended after the base variables.
    pub fn adjoined_roots(p: u32, n: u32, base: &[&str], d: Rational64, depth: u32) -> Result<Arc<Self>> {
        let mut names = base.to_vec();
        names.push("t");
        Self::roots_with(TeichRing::new(p, n, &names, d, depth), base.len(), None, None)
    }

    /// `W(R+)` with no fractional powers of `p`.
    pub fn witt_only(p: u32, n: u32, base: &[&str], d: Rational64, depth: u32) -> Result<Arc<Self>> {
        let b = TeichRing::new(p, n, base, d, depth);
        Ok(Arc::new(LensRing {
            base_monomials: base_monomials(&b)?,
            source: b.clone(),
            base: b,
            kind: Kind::Plain,
            z: None,
            certificate: None,
        }))
    }

    fn roots_with(source: Arc<TeichRing>, t: usize, z: Option<WittVec>, cert: Option<Primitivity>) -> Result<Arc<Self>> {
        let names: Vec<&str> = source.names().iter().enumerate().filter(|(i, _)| *i != t).map(|(_, s)| s.as_str()).collect();
        let base = TeichRing::new(source.p(), source.n(), &names, source.d(), source.depth());
        Ok(Arc::new(LensRing {
            base_monomials: base_monomials(&base)?,
            base,
            source,
            kind: Kind::Roots { t },
            z,
            certificate: cert,
        }))
    }

    pub fn p(&self) -> u32 {
        self.source.p()
    }
    pub fn n(&self) -> u32 {
        self.source.n()
    }
    pub fn d(&self) -> Rational64 {
        self.source.d()
    }
    pub fn depth(&self) -> u32 {
        self.source.depth()
    }
    pub fn scale(&self) -> i64 {
        self.source.scale()
    }
    pub fn zq(&self) -> Zq {
        self.source.zq()
    }
    /// Digit ring variables.
    pub fn base(&self) -> &Arc<TeichRing> {
        &self.base
    }
    /// Ring whose Witt vectors are divided by `z`.
    pub fn source(&self) -> &Arc<TeichRing> {
        &self.source
    }
    pub fn base_monomials(&self) -> &[PerfMonomial] {
        &self.base_monomials
    }
    /// Whether `z` has the shape `[t] - p`.
    pub fn is_special(&self) -> bool {
        matches!(self.kind, Kind::Roots { .. })
    }
    pub fn t_index(&self) -> Option<usize> {
        match self.kind {
            Kind::Roots { t } => Some(t),
            _ => None,
        }
    }
    pub fn z(&self) -> Option<&WittVec> {
        self.z.as_ref()
    }
    pub fn certificate(&self) -> Option<&Primitivity> {
        self.certificate.as_ref()
    }

    /// Spacing of p-exponent numerators.
    pub fn e_step(&self) -> i64 {
        match self.kind {
            Kind::Plain => self.scale(),
            _ => 1,
        }
    }

    /// `z` as a Teichmuller-model element of the source.
    pub fn z_teich(&self) -> Option<TeichPoly> {
        match &self.kind {
            Kind::Roots { t } => {
                let tt = TeichPoly::var_pow(&self.source, *t, Rational64::from_integer(1)).ok()?;
                tt.sub(&TeichPoly::constant(&self.source, self.p() as i64)).ok()
            }
            Kind::Plain => None,
            Kind::General { z, .. } => Some(z.clone()),
        }
    }

    /// Linearization of `source / (z)`.
    pub fn source_linearization(&self) -> Result<Arc<LinearizedRing>> {
        match &self.kind {
            Kind::General { lin, .. } => Ok(lin.clone()),
            _ => {
                let rels: Vec<TeichPoly> = self.z_teich().into_iter().collect();
                linearize_quotient(&self.source, &rels, DIM_LIMIT)
            }
        }
    }

    /// Digit slots `(e, m)` that survive truncation.
    pub fn slots(&self) -> Vec<Slot> {
        let (ecap, dcap) = (self.n() as i64 * self.scale(), self.base.dcap());
        let mut out = Vec::new();
        let mut e = 0;
        while e < ecap {
            for m in &self.base_monomials {
                if e + m.total() < dcap {
                    out.push((e, m.clone()));
                }
            }
            e += self.e_step();
        }
        out
    }

    /// True when every element is zero at this truncation.
    pub fn is_zero_ring(&self) -> bool {
        match &self.kind {
            Kind::General { lin, .. } => lin.dim() == 0,
            _ => self.slots().is_empty(),
        }
    }

    fn normalize(&self, mut acc: BTreeMap<Slot, i128>) -> Digits {
        let p = self.p() as i128;
        let (ecap, dcap, scale) = (self.n() as i64 * self.scale(), self.base.dcap(), self.scale());
        let mut out = Digits::new();
        while let Some(((e, m), v)) = acc.pop_first() {
            if v == 0 || e >= ecap || e + m.total() >= dcap {
                continue;
            }
            let c = v.rem_euclid(p);
            let carry = (v - c) / p;
            if c != 0 {
                out.insert((e, m.clone()), c as u32);
            }
            if carry != 0 {
                *acc.entry((e + scale, m)).or_insert(0) += carry;
            }
        }
        out
    }

    fn digits_elem(self: &Arc<Self>, acc: BTreeMap<Slot, i128>) -> LensElement {
        LensElement { ring: self.clone(), repr: Repr::Digits(self.normalize(acc)) }
    }

    fn linear_elem(self: &Arc<Self>, v: Vec<u32>) -> LensElement {
        match &self.kind {
            Kind::General { lin, .. } => {
                LensElement { ring: self.clone(), repr: Repr::Linear(lin.relation_echelon().reduce(&v)) }
            }
            _ => unreachable!("linear form only for general quotients"),
        }
    }

    pub fn zero(self: &Arc<Self>) -> LensElement {
        match &self.kind {
            Kind::General { lin, .. } => self.linear_elem(vec![0; lin.rank()]),
            _ => self.digits_elem(BTreeMap::new()),
        }
    }

    pub fn from_int(self: &Arc<Self>, k: i64) -> LensElement {
        self.theta(&TeichPoly::constant(&self.source, k)).expect("constant lies in the source")
    }

    pub fn one(self: &Arc<Self>) -> LensElement {
        self.from_int(1)
    }

    /// `c p^e [m]` with `e` and the exponents of `m` as numerators over `p^N`.
    pub fn digit(self: &Arc<Self>, e_num: i64, m: PerfMonomial, c: i64) -> Result<LensElement> {
        if matches!(self.kind, Kind::General { .. }) {
            return Err(Error::Invalid("digit form needs the special shape".into()));
        }
        if e_num < 0 || e_num % self.e_step() != 0 || m.0.len() != self.base.nvars() || m.0.iter().any(|&x| x < 0) {
            return Err(Error::Invalid("digit slot off the exponent grid".into()));
        }
        Ok(self.digits_elem(BTreeMap::from([((e_num, m), c as i128)])))
    }

    /// `p^e` for rational `e` on the grid.
    pub fn p_power(self: &Arc<Self>, e: Rational64) -> Result<LensElement> {
        let x = e * self.scale();
        if !x.is_integer() {
            return Err(Error::PrecisionExhausted(format!("p^{e} needs more depth")));
        }
        self.digit(x.to_integer(), PerfMonomial::one(self.base.nvars()), 1)
    }

    /// The map `W(source) -> lens` on the Teichmuller model.
    pub fn theta(self: &Arc<Self>, x: &TeichPoly) -> Result<LensElement> {
        if **x.ring() != *self.source {
            return Err(Error::RingMismatch);
        }
        match &self.kind {
            Kind::Roots { t } => {
                let mut acc = BTreeMap::new();
                for (m, &c) in x.terms() {
                    let a = m.0[*t];
                    let rest: Vec<i64> = m.0.iter().enumerate().filter(|(i, _)| i != t).map(|(_, &e)| e).collect();
                    *acc.entry((a, PerfMonomial(rest.into_boxed_slice()))).or_insert(0) += c as i128;
                }
                Ok(self.digits_elem(acc))
            }
            Kind::Plain => Ok(self.digits_elem(x.terms().iter().map(|(m, &c)| ((0, m.clone()), c as i128)).collect())),
            Kind::General { lin, .. } => Ok(self.linear_elem(lin.vector(x)?)),
        }
    }

    /// `theta` on a Witt vector over a digit ring with the source variables.
    pub fn theta_witt(self: &Arc<Self>, x: &WittVec) -> Result<LensElement> {
        if x.ring().names() != self.source.names() || x.p() != self.p() {
            return Err(Error::RingMismatch);
        }
        self.theta(&TeichPoly::from_witt(&self.source, x)?)
    }

    /// Random element with at most `terms` digits of level `< max_level`.
    pub fn random_element<R: Rng>(self: &Arc<Self>, rng: &mut R, max_level: Rational64, terms: usize) -> LensElement {
        if let Kind::General { lin, .. } = &self.kind {
            let v = lin.vector(&lin.random_element(rng)).expect("basis element");
            return self.linear_elem(v);
        }
        let cap = max_level * self.scale();
        let slots: Vec<Slot> = self.slots().into_iter().filter(|(e, m)| Rational64::from_integer(e + m.total()) < cap).collect();
        if slots.is_empty() {
            return self.zero();
        }
        let q = self.zq().q as i128;
        let mut acc = BTreeMap::new();
        for _ in 0..rng.gen_range(1..=terms.max(1)) {
            let s = slots[rng.gen_range(0..slots.len())].clone();
            *acc.entry(s).or_insert(0) += rng.gen_range(1..q);
        }
        self.digits_elem(acc)
    }

    /// Module of the digit form: one generator per `(e mod 1, m)`, killed by
    /// the number of integer shifts still visible.
    fn digit_module(&self) -> (QuotientSpace, HashMap<Slot, usize>) {
        let scale = self.scale();
        let (ecap, dcap) = (self.n() as i64 * scale, self.base.dcap());
        let mut index = HashMap::new();
        let mut ann = Vec::new();
        let mut frac = 0;
        while frac < scale {
            for m in &self.base_monomials {
                let k = (0..self.n() as i64).filter(|i| frac + i * scale < ecap && frac + i * scale + m.total() < dcap).count();
                if k > 0 {
                    index.insert((frac, m.clone()), ann.len());
                    ann.push(k as u32);
                }
            }
            frac += self.e_step();
        }
        let zq = self.zq();
        let rows = ann.iter().enumerate().filter(|(_, &k)| k < zq.n).map(|(i, &k)| {
            let mut v = vec![0u32; ann.len()];
            v[i] = zq.p_pow(k);
            v
        });
        let dim = ann.len();
        (QuotientSpace::new(dim, Echelon::from_rows(zq, dim, rows)), index)
    }
}

/// `quotient_by_primitive`: builds the lens `W(R)/(z)` at the precision of
/// `z`. Only `z = [t] - p` for a variable `t` gets the digit form.
pub fn quotient_by_primitive(z: &WittVec) -> Result<Arc<LensRing>> {
    let cert = is_primitive(z)?;
    if !cert.certified {
        return Err(Error::NotPrimitive);
    }
    let ring = z.ring();
    if ring.is_laurent() || ring.has_relations() {
        return Err(Error::Invalid("lens construction needs a free polynomial digit ring".into()));
    }
    let b = ring.budget();
    let names: Vec<&str> = ring.names().iter().map(|s| s.as_str()).collect();
    let source = TeichRing::new(ring.p(), z.len() as u32, &names, b.d, b.depth);
    let p_vec = WittVec::from_int(ring, z.len(), ring.p() as i64);
    for (i, name) in names.iter().enumerate() {
        let t = WittVec::teichmuller(&PerfPoly::var(ring, name)?, z.len());
        if t.sub(&p_vec)? == *z {
            return LensRing::roots_with(source, i, Some(z.clone()), Some(cert));
        }
    }
    let zt = TeichPoly::from_witt(&source, z)?;
    let lin = linearize_quotient(&source, std::slice::from_ref(&zt), DIM_LIMIT)?;
    Ok(Arc::new(LensRing {
        base_monomials: base_monomials(&source)?,
        base: source.clone(),
        source,
        kind: Kind::General { z: zt, lin },
        z: Some(z.clone()),
        certificate: Some(cert),
    }))
}

#[derive(Clone, PartialEq, Eq)]
enum Repr {
    Digits(Digits),
    /// Normal form on the source linearization.
    Linear(Vec<u32>),
}

#[derive(Clone)]
pub struct LensElement {
    ring: Arc<LensRing>,
    repr: Repr,
}

impl PartialEq for LensElement {
    fn eq(&self, o: &Self) -> bool {
        (Arc::ptr_eq(&self.ring, &o.ring) || *self.ring == *o.ring) && self.repr == o.repr
    }
}
impl Eq for LensElement {}

impl fmt::Debug for LensElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LensElement({self})")
    }
}

impl fmt::Display for LensElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Digits(d) if d.is_empty() => write!(f, "0"),
            Repr::Digits(d) => {
                let base = &self.ring.base;
                let parts: Vec<String> = d
                    .iter()
                    .map(|((e, m), c)| {
                        let mono = TeichPoly::monomial(base, m.clone(), 1);
                        let e = crate::norm::rat_string(Rational64::new(*e, self.ring.scale()));
                        format!("{c}*p^({e})*[{mono}]")
                    })
                    .collect();
                write!(f, "{}", parts.join(" + "))
            }
            Repr::Linear(v) => match &self.ring.kind {
                Kind::General { lin, .. } => write!(f, "{} mod z", lin.element(v)),
                _ => unreachable!(),
            },
        }
    }
}

impl LensElement {
    pub fn ring(&self) -> &Arc<LensRing> {
        &self.ring
    }

    /// `(e numerator, monomial) -> digit`, `None` for general quotients.
    pub fn digits(&self) -> Option<&BTreeMap<(i64, PerfMonomial), u32>> {
        match &self.repr {
            Repr::Digits(d) => Some(d),
            Repr::Linear(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Digits(d) => d.is_empty(),
            Repr::Linear(v) => v.iter().all(|&x| x == 0),
        }
    }

    fn check(&self, o: &LensElement) -> Result<()> {
        if Arc::ptr_eq(&self.ring, &o.ring) || *self.ring == *o.ring {
            Ok(())
        } else {
            Err(Error::RingMismatch)
        }
    }

    fn widen(d: &Digits, k: i128) -> BTreeMap<Slot, i128> {
        d.iter().map(|(s, &c)| (s.clone(), c as i128 * k)).collect()
    }

    pub fn add(&self, o: &LensElement) -> Result<LensElement> {
        self.check(o)?;
        match (&self.repr, &o.repr) {
            (Repr::Digits(a), Repr::Digits(b)) => {
                let mut acc = Self::widen(a, 1);
                for (s, &c) in b {
                    *acc.entry(s.clone()).or_insert(0) += c as i128;
                }
                Ok(self.ring.digits_elem(acc))
            }
            (Repr::Linear(a), Repr::Linear(b)) => {
                let zq = self.ring.zq();
                Ok(self.ring.linear_elem(a.iter().zip(b).map(|(x, y)| zq.add(*x, *y)).collect()))
            }
            _ => Err(Error::RingMismatch),
        }
    }

    pub fn scale_int(&self, k: i64) -> LensElement {
        match &self.repr {
            Repr::Digits(a) => self.ring.digits_elem(Self::widen(a, k as i128)),
            Repr::Linear(a) => {
                let zq = self.ring.zq();
                let k = zq.reduce(k);
                self.ring.linear_elem(a.iter().map(|&x| zq.mul(x, k)).collect())
            }
        }
    }

    pub fn neg(&self) -> LensElement {
        self.scale_int(-1)
    }

    pub fn sub(&self, o: &LensElement) -> Result<LensElement> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &LensElement) -> Result<LensElement> {
        self.check(o)?;
        match (&self.repr, &o.repr) {
            (Repr::Digits(a), Repr::Digits(b)) => {
                let mut acc = BTreeMap::new();
                for ((e1, m1), &c1) in a {
                    for ((e2, m2), &c2) in b {
                        let m = PerfMonomial(m1.0.iter().zip(m2.0.iter()).map(|(x, y)| x + y).collect());
                        *acc.entry((e1 + e2, m)).or_insert(0) += c1 as i128 * c2 as i128;
                    }
                }
                Ok(self.ring.digits_elem(acc))
            }
            (Repr::Linear(a), Repr::Linear(b)) => match &self.ring.kind {
                Kind::General { lin, .. } => {
                    let prod = lin.element(a).mul(&lin.element(b))?;
                    Ok(self.ring.linear_elem(lin.vector(&prod)?))
                }
                _ => unreachable!(),
            },
            _ => Err(Error::RingMismatch),
        }
    }

    pub fn pow(&self, mut e: u64) -> Result<LensElement> {
        let mut base = self.clone();
        let mut acc = self.ring.one();
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

    /// Largest `s` with the element in `p^s S`, i.e. the least p-exponent.
    pub fn p_valuation(&self) -> NormExponent {
        match &self.repr {
            Repr::Digits(d) => d
                .keys()
                .map(|(e, _)| NormExponent::finite(Rational64::new(*e, self.ring.scale())))
                .fold(NormExponent::INFINITY, NormExponent::min),
            Repr::Linear(_) => NormExponent::INFINITY,
        }
    }
}

/// Quotient norm exponent: `min (e + deg m)` over digits. For general
/// quotients it is computed by `brute_force_quotient_norm`.
pub fn lens_norm(x: &LensElement) -> NormExponent {
    match (&x.repr, &x.ring.kind) {
        (Repr::Digits(d), _) => d
            .keys()
            .map(|(e, m)| NormExponent::finite(Rational64::new(e + m.total(), x.ring.scale())))
            .fold(NormExponent::INFINITY, NormExponent::min),
        (Repr::Linear(v), Kind::General { lin, .. }) => {
            let w: Vec<Rational64> = lin.basis().iter().map(|m| lin.ring().monomial_degree(m)).collect();
            brute_force_quotient_norm(lin.relation_echelon(), &w, v)
        }
        _ => unreachable!(),
    }
}

/// Largest `beta` with `r0` in `ideal + span{p^k e_i : k + w_i >= beta}`;
/// infinite when `r0` lies in the ideal.
pub fn brute_force_quotient_norm(ideal: &Echelon, weights: &[Rational64], r0: &[u32]) -> NormExponent {
    if ideal.contains(r0) {
        return NormExponent::INFINITY;
    }
    let zq = ideal.zq();
    let mut cands: Vec<(Rational64, usize, u32)> = weights
        .iter()
        .enumerate()
        .flat_map(|(i, &w)| (0..zq.n).map(move |k| (w + k as i64, i, k)))
        .collect();
    cands.sort_by_key(|c| std::cmp::Reverse(c.0));
    let mut ech = ideal.clone();
    let mut idx = 0;
    while idx < cands.len() {
        let beta = cands[idx].0;
        while idx < cands.len() && cands[idx].0 == beta {
            let mut v = vec![0u32; weights.len()];
            v[cands[idx].1] = zq.p_pow(cands[idx].2);
            ech.insert(v);
            idx += 1;
        }
        if ech.contains(r0) {
            return NormExponent::finite(beta);
        }
    }
    unreachable!("the full module contains every vector")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CriterionResult {
    pub status: Status,
    pub detail: String,
}

impl CriterionResult {
    fn new(status: Status, detail: impl Into<String>) -> Self {
        CriterionResult { status, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LensCriteriaReport {
    pub semiperfect: CriterionResult,
    pub p_normal: CriterionResult,
    pub uniformizer: CriterionResult,
    pub uniformizer_element: Option<String>,
    /// Zero ring: every criterion holds vacuously.
    pub degenerate: bool,
    pub ranks: BTreeMap<String, u64>,
}

impl LensCriteriaReport {
    pub fn all_pass(&self) -> bool {
        [&self.semiperfect, &self.p_normal, &self.uniformizer].iter().all(|c| c.status == Status::Pass)
    }
}

/// Checks, at truncation: Frobenius `S/p -> S/p` is onto by rank (from depth
/// `N` to `N - 1`), p-normality on `samples` random elements, and existence
/// of an element whose p-th power is `p` times a unit.
pub fn check_lens_criteria(s: &Arc<LensRing>, samples: usize, seed: u64) -> Result<LensCriteriaReport> {
    let mut ranks = BTreeMap::new();
    if s.is_zero_ring() {
        let vacuous = || CriterionResult::new(Status::Pass, "vacuous: zero ring");
        return Ok(LensCriteriaReport {
            semiperfect: vacuous(),
            p_normal: vacuous(),
            uniformizer: vacuous(),
            uniformizer_element: None,
            degenerate: true,
            ranks,
        });
    }
    if !matches!(s.kind, Kind::Roots { .. } | Kind::Plain) {
        let un = || CriterionResult::new(Status::Uncertified, "digit form unavailable for this z");
        return Ok(LensCriteriaReport {
            semiperfect: un(),
            p_normal: un(),
            uniformizer: un(),
            uniformizer_element: None,
            degenerate: false,
            ranks,
        });
    }
    let semiperfect = semiperfect_check(s, &mut ranks)?;
    let p_normal = p_normality_check(s, samples, seed)?;
    let (uniformizer, uniformizer_element) = uniformizer_check(s)?;
    Ok(LensCriteriaReport { semiperfect, p_normal, uniformizer, uniformizer_element, degenerate: false, ranks })
}

fn shallower(s: &LensRing) -> Result<Arc<LensRing>> {
    let src = TeichRing::new(s.p(), s.n(), &s.source.names().iter().map(|x| x.as_str()).collect::<Vec<_>>(), s.d(), s.depth() - 1);
    match s.kind {
        Kind::Roots { t } => LensRing::roots_with(src, t, None, None),
        Kind::Plain => {
            let names: Vec<&str> = s.base.names().iter().map(|x| x.as_str()).collect();
            LensRing::witt_only(s.p(), s.n(), &names, s.d(), s.depth() - 1)
        }
        Kind::General { .. } => unreachable!(),
    }
}

fn semiperfect_check(s: &Arc<LensRing>, ranks: &mut BTreeMap<String, u64>) -> Result<CriterionResult> {
    if s.depth() == 0 {
        return Ok(CriterionResult::new(Status::Uncertified, "needs perfection depth >= 1"));
    }
    let t = shallower(s)?;
    let mod_p = |r: &LensRing| -> Vec<Slot> { r.slots().into_iter().filter(|(e, _)| *e < r.scale()).collect() };
    let src = mod_p(s);
    let tgt = mod_p(&t);
    let index: HashMap<&Slot, usize> = tgt.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let fp = Zq::field(s.p());
    let mut ech = Echelon::new(fp, tgt.len());
    for slot in &src {
        // the p-th power keeps numerators and lowers the depth by one
        if let Some(&i) = index.get(slot) {
            let mut v = vec![0u32; tgt.len()];
            v[i] = 1;
            ech.insert(v);
        }
    }
    let rank = ech.length();
    ranks.insert("frobenius_source_dim".into(), src.len() as u64);
    ranks.insert("frobenius_target_dim".into(), tgt.len() as u64);
    ranks.insert("frobenius_rank".into(), rank);
    let ok = rank == tgt.len() as u64;
    Ok(CriterionResult::new(
        if ok { Status::Pass } else { Status::Fail },
        format!("Frobenius S/p (depth {}) -> S/p (depth {}): rank {rank} of {}", s.depth(), t.depth(), tgt.len()),
    ))
}

fn p_normality_check(s: &Arc<LensRing>, samples: usize, seed: u64) -> Result<CriterionResult> {
    let visible = Rational64::from_integer(s.n() as i64).min(s.d());
    let max_level = visible / s.p() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = s.e_step();
    let mut checked = 0;
    let mut tries = 0;
    while checked < samples && tries < samples * 20 {
        tries += 1;
        let y = s.random_element(&mut rng, max_level, 3);
        if y.is_zero() {
            continue;
        }
        let vp = y.pow(s.p() as u64)?.p_valuation();
        let Some(v) = vp.value() else { continue };
        let num = (v * s.scale() / s.p() as i64).floor().to_integer();
        let sgrid = Rational64::new(num.div_euclid(step) * step, s.scale());
        checked += 1;
        if y.p_valuation() < NormExponent::finite(sgrid) {
            return Ok(CriterionResult::new(
                Status::Fail,
                format!("y = {y}: y^p in p^{} S but y not in p^{} S", crate::norm::rat_string(v), crate::norm::rat_string(sgrid)),
            ));
        }
    }
    if checked == 0 {
        return Ok(CriterionResult::new(Status::Uncertified, "no visible samples at this truncation"));
    }
    Ok(CriterionResult::new(Status::Pass, format!("no counterexample found in {checked} samples (sampled, not proved)")))
}

fn uniformizer_check(s: &Arc<LensRing>) -> Result<(CriterionResult, Option<String>)> {
    let p_el = s.from_int(s.p() as i64);
    if p_el.is_zero() {
        return Ok((CriterionResult::new(Status::Uncertified, "p vanishes at this truncation"), None));
    }
    let one = PerfMonomial::one(s.base.nvars());
    let unit_slot = (s.scale(), one.clone());
    let is_p_unit = |x: &LensElement| -> bool {
        x.digits().is_some_and(|d| d.contains_key(&unit_slot) && d.keys().all(|(e, _)| *e >= s.scale()))
    };
    if s.e_step() == 1 && s.depth() >= 1 {
        let w = s.digit(s.scale() / s.p() as i64, one, 1)?;
        if w.pow(s.p() as u64)? == p_el {
            return Ok((CriterionResult::new(Status::Pass, "p^(1/p) satisfies x^p = p"), Some(w.to_string())));
        }
    }
    for (e, m) in s.slots() {
        let y = s.digit(e, m, 1)?;
        if is_p_unit(&y.pow(s.p() as u64)?) {
            return Ok((CriterionResult::new(Status::Pass, "digit basis element with x^p = p * unit"), Some(y.to_string())));
        }
    }
    Ok((CriterionResult::new(Status::Fail, "not a lens at this precision: no digit basis element has x^p = p * unit"), None))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrobeniusIsoReport {
    pub primitive: bool,
    pub localized: bool,
    pub lengths: MapLengths,
    pub bijective: bool,
}

/// `phi: A/(z, [t^(1/p)]) -> A/(z, p)` from depth `N` to depth `N - 1` (cap
/// `D` to `pD`), optionally after adjoining `T` with `gT = f` on both sides
/// (coefficients twisted by Frobenius). Bijectivity by rank.
pub fn check_frobenius_iso(z: &TeichPoly, t: usize, loc: Option<(&TeichPoly, &TeichPoly)>, dt: u32) -> Result<FrobeniusIsoReport> {
    let src = z.ring().clone();
    if src.depth() == 0 {
        return Err(Error::ResourceBound("Frobenius comparison needs depth >= 1".into()));
    }
    let names: Vec<&str> = src.names().iter().map(|s| s.as_str()).collect();
    let tgt = TeichRing::new(src.p(), src.n(), &names, src.d() * src.p() as i64, src.depth() - 1);
    let p = src.p() as i64;
    let root_t = TeichPoly::var_pow(&src, t, Rational64::new(1, p))?;
    let src_lin = linearize_quotient(&src, &[z.clone(), root_t], DIM_LIMIT)?;
    let z_t = shrink(z, &tgt)?;
    let tgt_lin = linearize_quotient(&tgt, &[z_t, TeichPoly::constant(&tgt, p)], DIM_LIMIT)?;
    let presentation = RingPresentation::free(src.p(), &names, PrecisionBudget::simple(src.n(), 1, src.depth()).with_d(src.d()));
    let primitive = is_primitive(&z.to_witt(&presentation)?)?.certified;
    let phi = |m: &PerfMonomial| TeichPoly::monomial(&src, m.clone(), 1).frobenius_into(&tgt);
    let lengths = match loc {
        None => {
            let cols = src_lin.basis().iter().map(|m| tgt_lin.vector(&phi(m)?)).collect::<Result<Vec<_>>>()?;
            map_lengths(&src_lin.space(), &tgt_lin.space(), &cols)
        }
        Some((f, g)) => {
            let a = localization_ring(&src_lin, f, g, Side::T, dt)?;
            let b = localization_ring(&tgt_lin, &f.frobenius_into(&tgt)?, &g.frobenius_into(&tgt)?, Side::T, dt)?;
            let cols = a
                .window_labels()
                .into_iter()
                .map(|(j, i)| b.window_vector(&LaurentPoly::monomial(&phi(&src_lin.basis()[i])?, j)))
                .collect::<Result<Vec<_>>>()?;
            map_lengths(a.window_space(), b.window_space(), &cols)
        }
    };
    Ok(FrobeniusIsoReport { primitive, localized: loc.is_some(), bijective: lengths.bijective(), lengths })
}

/// The same element in the ring of one less depth.
fn shrink(a: &TeichPoly, target: &Arc<TeichRing>) -> Result<TeichPoly> {
    let p = a.ring().p() as i64;
    let mut out = TeichPoly::zero(target);
    for (m, &c) in a.terms() {
        if m.0.iter().any(|e| e % p != 0) {
            return Err(Error::PrecisionExhausted(format!("{a} needs depth {}", a.ring().depth())));
        }
        let mm = PerfMonomial(m.0.iter().map(|e| e / p).collect());
        out = out.add(&TeichPoly::monomial(target, mm, c))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalIsoReport {
    pub localized: bool,
    /// Violated hypothesis of the datum, if any.
    pub flagged: Option<String>,
    pub lengths: MapLengths,
    pub bijective: bool,
    pub norm_samples: usize,
    pub norm_mismatches: usize,
    /// Weight used for `|T|`; the radius of the right-hand side is fixed to theta.
    pub t_weight: String,
    pub certified: bool,
}

/// The canonical map `W(R+[t^(1/p^inf)])/([t] - p) -> W(R+)<p^(1/p^inf)>`,
/// optionally after adjoining `T` with `gT = f`. Checks bijectivity by rank
/// and compares the brute-force quotient norm with `lens_norm` on samples,
/// weighting `T` by `alpha(f) - alpha(g)`.
pub fn lens_canonical_iso_check(
    lens: &Arc<LensRing>,
    loc: Option<(&TeichPoly, &TeichPoly)>,
    dt: u32,
    samples: usize,
    seed: u64,
) -> Result<CanonicalIsoReport> {
    let Kind::Roots { t } = lens.kind else {
        return Err(Error::Invalid("canonical form needs z = [t] - p".into()));
    };
    let lin = lens.source_linearization()?;
    let (module, index) = lens.digit_module();
    let zq = lens.zq();
    let scale = lens.scale();
    let to_module = |x: &LensElement| -> Vec<u32> {
        let mut v = vec![0u32; module.dim];
        for ((e, m), &c) in x.digits().expect("digit form") {
            let i = index[&(e % scale, m.clone())];
            v[i] = zq.add(v[i], zq.mul(c, zq.p_pow((e / scale) as u32)));
        }
        v
    };
    let degree: Vec<Rational64> = lin.basis().iter().map(|m| lin.ring().monomial_degree(m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut flagged = None;
    let (lengths, t_weight) = match loc {
        None => {
            let imgs = lin.basis().iter().map(|m| lens.theta(&TeichPoly::monomial(lin.ring(), m.clone(), 1))).collect::<Result<Vec<_>>>()?;
            let cols: Vec<Vec<u32>> = imgs.iter().map(to_module).collect();
            for _ in 0..samples {
                let r = lin.random_element(&mut rng);
                let q = brute_force_quotient_norm(lin.relation_echelon(), &degree, &lin.vector(&r)?);
                if q != lens_norm(&lens.theta(&r)?) {
                    mismatches += 1;
                }
            }
            (map_lengths(&lin.space(), &module, &cols), Rational64::zero())
        }
        Some((f, g)) => {
            if f.terms().keys().all(|m| m.0[t] > 0) {
                flagged = Some("f is divisible by [t]".to_string());
            } else if g.terms().values().all(|c| c % lens.p() == 0) {
                flagged = Some("g is divisible by p".to_string());
            }
            let a = localization_ring(&lin, f, g, Side::T, dt)?;
            let u = lens.theta(f)?.mul(&lens.theta(&g.inverse()?)?)?;
            let labels = a.window_labels();
            let imgs = labels
                .iter()
                .map(|&(j, i)| lens.theta(&TeichPoly::monomial(lin.ring(), lin.basis()[i].clone(), 1))?.mul(&u.pow(j as u64)?))
                .collect::<Result<Vec<_>>>()?;
            let cols: Vec<Vec<u32>> = imgs.iter().map(to_module).collect();
            let w = match (f.weighted_norm().value(), g.weighted_norm().value()) {
                (Some(x), Some(y)) => x - y,
                _ => return Err(Error::Invalid("f and g must be nonzero".into())),
            };
            let ext_w: Vec<Rational64> = a.ext_labels().iter().map(|&(j, i)| degree[i] + w * j).collect();
            let start = a.window_start();
            for _ in 0..samples {
                let v: Vec<u32> = (0..a.window_space().dim).map(|_| rng.gen_range(0..zq.q)).collect();
                let mut ext = vec![0u32; start];
                ext.extend_from_slice(&v);
                let q = brute_force_quotient_norm(a.relation_echelon(), &ext_w, &ext);
                let mut img = lens.zero();
                for (k, &c) in v.iter().enumerate() {
                    if c != 0 {
                        img = img.add(&imgs[k].scale_int(c as i64))?;
                    }
                }
                if q != lens_norm(&img) {
                    mismatches += 1;
                }
            }
            (map_lengths(a.window_space(), &module, &cols), w)
        }
    };
    let bijective = lengths.bijective();
    Ok(CanonicalIsoReport {
        localized: loc.is_some(),
        certified: bijective && mismatches == 0 && flagged.is_none(),
        flagged,
        lengths,
        bijective,
        norm_samples: samples,
        norm_mismatches: mismatches,
        t_weight: crate::norm::rat_string(t_weight),
    })
}

/// F_p-linearization of a presented perfect ring at its budget, over the
/// free ring on the same variables.
struct FpLinear {
    free: Arc<RingPresentation>,
    basis: Vec<PerfMonomial>,
    index: HashMap<PerfMonomial, usize>,
}

impl FpLinear {
    fn new(s: &RingPresentation) -> Result<Self> {
        if s.is_laurent() {
            return Err(Error::Invalid("tilting needs a polynomial digit ring".into()));
        }
        let names: Vec<&str> = s.names().iter().map(|x| x.as_str()).collect();
        let free = RingPresentation::free(s.p(), &names, s.budget().clone());
        let basis = free
            .ambient_monomials(s.budget().depth, DIM_LIMIT)
            .ok_or_else(|| Error::ResourceBound("too many monomials".into()))?;
        let index = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Ok(FpLinear { free, basis, index })
    }

    fn vector(&self, a: &PerfPoly) -> Result<Vec<u32>> {
        let mut v = vec![0u32; self.basis.len()];
        for (m, &c) in a.terms() {
            let i = self.index.get(m).ok_or_else(|| Error::ResourceBound("monomial outside basis".into()))?;
            v[*i] = c;
        }
        Ok(v)
    }

    fn mono(&self, i: usize) -> PerfPoly {
        PerfPoly::from_monomial(&self.free, self.basis[i].clone(), 1)
    }

    /// Span of `r * m` over the basis, for each `r`.
    fn ideal(&self, gens: &[PerfPoly]) -> Result<Echelon> {
        let mut e = Echelon::new(Zq::field(self.free.p()), self.basis.len());
        for r in gens {
            for i in 0..self.basis.len() {
                e.insert(self.vector(&r.mul(&self.mono(i))?)?);
            }
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltReport {
    #[serde(skip)]
    pub ring: Arc<RingPresentation>,
    /// `f^(p^N)` vanishes at truncation, so the completion is the ring itself.
    pub same_ring: bool,
    /// Multiplication by `f` kills nothing below the truncation shadow.
    pub nonzerodivisor: bool,
    pub lengths: MapLengths,
    pub bijective: bool,
    pub samples: usize,
    pub digit_mismatches: usize,
}

/// Tilt of `S/f` as the inverse limit along Frobenius to depth `N`, compared
/// with the `f`-adic completion at stage `p^N`.
pub fn tilt(s: &Arc<RingPresentation>, f: &PerfPoly) -> Result<Arc<RingPresentation>> {
    let rep = tilt_report(s, f, 20, 0)?;
    if !rep.bijective || rep.digit_mismatches > 0 {
        return Err(Error::PrecisionExhausted("Frobenius comparison fails at this stage".into()));
    }
    Ok(rep.ring)
}

pub fn tilt_report(s: &Arc<RingPresentation>, f: &PerfPoly, samples: usize, seed: u64) -> Result<TiltReport> {
    if f.is_zero() {
        return Err(Error::ZeroDivisor("f = 0".into()));
    }
    let lin = FpLinear::new(s)?;
    let f_free = f.change_ring(&lin.free)?;
    let rels: Vec<PerfPoly> = s.relations().iter().map(|r| r.change_ring(&lin.free)).collect::<Result<_>>()?;
    let fp = Zq::field(s.p());
    let dim = lin.basis.len();
    let base_rel = lin.ideal(&rels)?;

    // kernel of multiplication by f must sit in degrees the truncation hides
    let mut gens: Vec<Vec<u32>> = (0..dim).map(|i| lin.vector(&f_free.mul(&lin.mono(i))?)).collect::<Result<_>>()?;
    gens.extend(base_rel.rows().map(|r| r.to_vec()));
    let ker = linalg::kernel(fp, dim, &gens);
    let alpha_f = f.gauss_norm().value().unwrap_or_default();
    let shadow = Rational64::from_integer(0).max(s.budget().d - alpha_f) * s.scale();
    let mut hidden = base_rel.clone();
    for (i, m) in lin.basis.iter().enumerate() {
        if Rational64::from_integer(m.total()) >= shadow {
            let mut v = vec![0u32; dim];
            v[i] = 1;
            hidden.insert(v);
        }
    }
    let nonzerodivisor = ker.rows().all(|r| hidden.contains(&r[..dim]));
    if !nonzerodivisor {
        return Err(Error::ZeroDivisor(format!("{f} kills a visible element")));
    }

    // Frob^N: S/f at depth N -> S/f^(p^N) at depth 0, same numerators
    let depth = s.budget().depth;
    let pn = (s.p() as i64).pow(depth);
    let names: Vec<&str> = s.names().iter().map(|x| x.as_str()).collect();
    let tgt = RingPresentation::free(s.p(), &names, s.budget().with_depth(0).with_d(s.budget().d * pn));
    let tlin = FpLinear::new(&tgt)?;
    let frob = |a: &PerfPoly| -> Result<PerfPoly> {
        let mut acc = PerfPoly::zero(&tgt);
        for (m, &c) in a.terms() {
            acc = acc.add(&PerfPoly::from_monomial(&tgt, m.clone(), c))?;
        }
        Ok(acc)
    };
    let trels: Vec<PerfPoly> = rels.iter().map(&frob).collect::<Result<_>>()?;
    let f_pn = frob(&f_free)?;
    let mut src_rel = base_rel.clone();
    for r in lin.ideal(std::slice::from_ref(&f_free))?.rows() {
        src_rel.insert(r.to_vec());
    }
    let mut tgens = trels.clone();
    tgens.push(f_pn.clone());
    let tgt_rel = tlin.ideal(&tgens)?;
    let src_space = QuotientSpace::new(dim, src_rel);
    let tgt_space = QuotientSpace::new(tlin.basis.len(), tgt_rel);
    let cols: Vec<Vec<u32>> = (0..dim).map(|i| tlin.vector(&frob(&lin.mono(i))?)).collect::<Result<_>>()?;
    let lengths = map_lengths(&src_space, &tgt_space, &cols);

    // digit comparison on sampled compatible sequences
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..samples {
        let b: Vec<u32> = (0..tlin.basis.len()).map(|_| rng.gen_range(0..s.p())).collect();
        // the p^N-th root of b has the same numerators at depth N
        let mut root = vec![0u32; dim];
        for (k, &c) in b.iter().enumerate() {
            if c != 0 {
                match lin.index.get(&tlin.basis[k]) {
                    Some(&i) => root[i] = c,
                    None => unreachable!("target monomials have roots in the source"),
                }
            }
        }
        let a_n = src_space.normal_form(&root);
        let back = linalg::apply(fp, tgt_space.dim, &cols, &a_n);
        let diff: Vec<u32> = back.iter().zip(&b).map(|(x, y)| fp.sub(*x, *y)).collect();
        if !tgt_space.is_zero(&diff) {
            mismatches += 1;
            continue;
        }
        // the sequence a_k = a_N^(p^(N-k)) is compatible mod f
        let a_poly = PerfPoly::from_terms(
            &lin.free,
            a_n.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (lin.basis[i].clone(), c)).collect(),
        );
        let mut prev = a_poly.clone();
        for _ in 0..depth {
            let next = prev.frobenius()?;
            let step = lin.vector(&prev.pow(s.p() as u64)?.sub(&next)?)?;
            if !src_space.is_zero(&step) {
                mismatches += 1;
                break;
            }
            prev = next;
        }
    }

    let f_power = f.pow(pn as u64)?;
    let same_ring = f_power.is_zero();
    let ring = if same_ring {
        s.clone()
    } else {
        let vars: Vec<(&str, bool)> = names.iter().map(|n| (*n, false)).collect();
        let mut rel_strings: Vec<String> = s.relations().iter().map(|r| r.to_string()).collect();
        rel_strings.push(f_power.to_string());
        let rs: Vec<&str> = rel_strings.iter().map(|x| x.as_str()).collect();
        RingPresentation::new(s.p(), &vars, &rs, s.budget().clone())?
    };
    Ok(TiltReport {
        ring,
        same_ring,
        nonzerodivisor,
        bijective: lengths.bijective(),
        lengths,
        samples,
        digit_mismatches: mismatches,
    })
}
