//! Truncated perfect F_p-algebras.
//!
//! Exponents are stored as integer numerators over `p^N`. A monomial whose
//! total nonnegative exponent reaches `D` is zero. Inverted variables may go
//! down to `-L` and no further.

pub(crate) mod parse;

pub use parse::{parse_poly, ParsedTerm};

use crate::arith::Zq;
use crate::error::{Error, Result};
use crate::linalg::{self, Echelon};
use crate::norm::NormExponent;
use num_rational::Rational64;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

/// Ambient monomial spaces above this size get no normal-form reducer.
pub const REDUCER_LIMIT: usize = 2048;
/// Window size cap for linear-algebra based unit and membership tests.
pub const WINDOW_LIMIT: usize = 6000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrecisionBudget {
    /// p-adic digit count.
    pub n: u32,
    /// Geometric truncation degree.
    pub d: Rational64,
    /// Perfection depth.
    pub depth: u32,
    /// Degree cap for localization variables.
    pub dt: u32,
    /// Laurent floor.
    pub l: Rational64,
}

impl PrecisionBudget {
    pub fn new(n: u32, d: Rational64, depth: u32, dt: u32, l: Rational64) -> Result<Self> {
        if n < 1 || d <= Rational64::from_integer(0) || dt < 1 || l < Rational64::from_integer(0) {
            return Err(Error::Invalid(format!(
                "budget needs n >= 1, D > 0, DT >= 1, L >= 0 (got n={n}, D={d}, DT={dt}, L={l})"
            )));
        }
        Ok(PrecisionBudget { n, d, depth, dt, l })
    }

    pub fn simple(n: u32, d: i64, depth: u32) -> Self {
        PrecisionBudget::new(n, Rational64::from_integer(d), depth, 1, Rational64::from_integer(0)).unwrap()
    }

    pub fn with_d(&self, d: Rational64) -> Self {
        PrecisionBudget { d, ..self.clone() }
    }

    pub fn with_depth(&self, depth: u32) -> Self {
        PrecisionBudget { depth, ..self.clone() }
    }

    pub fn with_l(&self, l: i64) -> Self {
        PrecisionBudget { l: Rational64::from_integer(l), ..self.clone() }
    }

    pub fn with_dt(&self, dt: u32) -> Self {
        PrecisionBudget { dt, ..self.clone() }
    }
}

/// Exponent numerators over `p^N`, one per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PerfMonomial(pub Box<[i64]>);

impl PerfMonomial {
    pub fn one(nvars: usize) -> Self {
        PerfMonomial(vec![0; nvars].into_boxed_slice())
    }

    pub fn total_pos(&self) -> i64 {
        self.0.iter().filter(|&&e| e > 0).sum()
    }

    pub fn total(&self) -> i64 {
        self.0.iter().sum()
    }

    fn mul(&self, o: &PerfMonomial) -> PerfMonomial {
        PerfMonomial(self.0.iter().zip(o.0.iter()).map(|(a, b)| a + b).collect())
    }

    fn scaled(&self, k: i64) -> PerfMonomial {
        PerfMonomial(self.0.iter().map(|a| a * k).collect())
    }
}

pub type Terms = BTreeMap<PerfMonomial, u32>;

struct Reducer {
    index: HashMap<PerfMonomial, usize>,
    monos: Vec<PerfMonomial>,
    ech: Echelon,
}

/// A perfect polynomial/Laurent ring over F_p, optionally modulo relations,
/// at a fixed precision budget.
pub struct RingPresentation {
    p: u32,
    names: Vec<String>,
    inverted: Vec<bool>,
    budget: PrecisionBudget,
    scale: i64,
    dcap: i64,
    floor: i64,
    relations: Vec<Terms>,
    reducer: Option<Reducer>,
}

impl fmt::Debug for RingPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingPresentation")
            .field("p", &self.p)
            .field("vars", &self.names)
            .field("inverted", &self.inverted)
            .field("budget", &self.budget)
            .field("relations", &self.relations.len())
            .finish()
    }
}

impl PartialEq for RingPresentation {
    fn eq(&self, o: &Self) -> bool {
        self.p == o.p
            && self.names == o.names
            && self.inverted == o.inverted
            && self.budget == o.budget
            && self.relations == o.relations
    }
}

fn ceil_rat(r: Rational64) -> i64 {
    r.ceil().to_integer()
}

impl RingPresentation {
    /// Builds a presentation. `relations` are polynomial strings in the grammar.
    pub fn new(
        p: u32,
        vars: &[(&str, bool)],
        relations: &[&str],
        budget: PrecisionBudget,
    ) -> Result<Arc<Self>> {
        if !crate::arith::is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        let scale = (p as i64)
            .checked_pow(budget.depth)
            .ok_or_else(|| Error::ResourceBound("perfection depth too large".into()))?;
        let mut ring = RingPresentation {
            p,
            names: vars.iter().map(|v| v.0.to_string()).collect(),
            inverted: vars.iter().map(|v| v.1).collect(),
            dcap: ceil_rat(budget.d * scale),
            floor: ceil_rat(-budget.l * scale),
            scale,
            budget,
            relations: Vec::new(),
            reducer: None,
        };
        let mut rels = Vec::new();
        for r in relations {
            rels.push(ring.terms_from_parsed(&parse_poly(r)?, false)?);
        }
        ring.relations = rels.into_iter().filter(|t| !t.is_empty()).collect();
        ring.reducer = ring.build_reducer();
        Ok(Arc::new(ring))
    }

    pub fn free(p: u32, names: &[&str], budget: PrecisionBudget) -> Arc<Self> {
        let vars: Vec<(&str, bool)> = names.iter().map(|n| (*n, false)).collect();
        RingPresentation::new(p, &vars, &[], budget).expect("free ring")
    }

    /// Same variables and relations at another budget.
    pub fn with_budget(&self, budget: PrecisionBudget) -> Result<Arc<Self>> {
        let vars: Vec<(&str, bool)> = self.names.iter().map(|s| s.as_str()).zip(self.inverted.iter().copied()).collect();
        let rels: Vec<String> = self
            .relations
            .iter()
            .map(|t| PerfPoly { ring: Arc::new(self.shallow_clone()), terms: t.clone() }.to_string())
            .collect();
        let rels: Vec<&str> = rels.iter().map(|s| s.as_str()).collect();
        RingPresentation::new(self.p, &vars, &rels, budget)
    }

    fn shallow_clone(&self) -> Self {
        RingPresentation {
            p: self.p,
            names: self.names.clone(),
            inverted: self.inverted.clone(),
            budget: self.budget.clone(),
            scale: self.scale,
            dcap: self.dcap,
            floor: self.floor,
            relations: self.relations.clone(),
            reducer: None,
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn nvars(&self) -> usize {
        self.names.len()
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn inverted(&self) -> &[bool] {
        &self.inverted
    }
    pub fn budget(&self) -> &PrecisionBudget {
        &self.budget
    }
    /// `p^N`: the common exponent denominator.
    pub fn scale(&self) -> i64 {
        self.scale
    }
    /// Smallest truncated total numerator.
    pub fn dcap(&self) -> i64 {
        self.dcap
    }
    /// Laurent floor numerator.
    pub fn floor(&self) -> i64 {
        self.floor
    }
    pub fn field(&self) -> Zq {
        Zq::field(self.p)
    }
    pub fn has_relations(&self) -> bool {
        !self.relations.is_empty()
    }
    pub fn is_laurent(&self) -> bool {
        self.inverted.iter().any(|&b| b)
    }
    pub fn has_reducer(&self) -> bool {
        self.reducer.is_some()
    }
    pub fn relations(&self) -> Vec<PerfPoly> {
        // relations are stored untruncated; rebuild without normalizing
        self.relations
            .iter()
            .map(|t| PerfPoly { ring: Arc::new(self.shallow_clone()), terms: t.clone() })
            .collect()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Parse(format!("unknown variable {name}")))
    }

    fn exp_numerator(&self, e: Rational64) -> Result<i64> {
        let v = e * self.scale;
        if !v.is_integer() {
            return Err(Error::PrecisionExhausted(format!(
                "exponent {e} needs denominator beyond p^{}",
                self.budget.depth
            )));
        }
        Ok(v.to_integer())
    }

    fn terms_from_parsed(&self, parsed: &[ParsedTerm], truncate: bool) -> Result<Terms> {
        let zp = self.field();
        let mut out = Terms::new();
        for (c, factors) in parsed {
            let mut m = vec![0i64; self.nvars()];
            for (name, e) in factors {
                let i = self.var_index(name)?;
                m[i] += self.exp_numerator(*e)?;
            }
            for (i, &e) in m.iter().enumerate() {
                if e < 0 && !self.inverted[i] {
                    return Err(Error::Parse(format!("negative exponent on non-inverted variable {}", self.names[i])));
                }
                if e < self.floor {
                    return Err(Error::TruncationOverflow { floor: self.budget.l.to_string() });
                }
            }
            let m = PerfMonomial(m.into_boxed_slice());
            if truncate && m.total_pos() >= self.dcap {
                continue;
            }
            let c = zp.reduce(*c);
            add_term(&mut out, m, c, self.p);
        }
        Ok(out)
    }

    /// Level of an exponent numerator: the power of p in its reduced denominator.
    pub fn exp_level(&self, e: i64) -> u32 {
        if e == 0 {
            return 0;
        }
        let mut v = 0;
        let mut x = e.abs();
        while v < self.budget.depth && x % self.p as i64 == 0 {
            x /= self.p as i64;
            v += 1;
        }
        self.budget.depth - v
    }

    /// All monomials at exponent granularity `p^{-level}` below the cap and above
    /// the floor, or `None` when there are more than `limit`.
    pub fn ambient_monomials(&self, level: u32, limit: usize) -> Option<Vec<PerfMonomial>> {
        let level = level.min(self.budget.depth);
        let step = self.scale / (self.p as i64).pow(level);
        let mut out = Vec::new();
        let mut cur = vec![0i64; self.nvars()];
        if self.enumerate(0, self.dcap, step, &mut cur, &mut out, limit) {
            Some(out)
        } else {
            None
        }
    }

    fn enumerate(&self, i: usize, rem: i64, step: i64, cur: &mut Vec<i64>, out: &mut Vec<PerfMonomial>, limit: usize) -> bool {
        if i == self.nvars() {
            if out.len() >= limit {
                return false;
            }
            out.push(PerfMonomial(cur.clone().into_boxed_slice()));
            return true;
        }
        let lo = if self.inverted[i] { -((-self.floor) / step) * step } else { 0 };
        let mut e = lo;
        while e <= 0 || e < rem {
            cur[i] = e;
            let next = if e > 0 { rem - e } else { rem };
            if !self.enumerate(i + 1, next, step, cur, out, limit) {
                return false;
            }
            e += step;
        }
        cur[i] = 0;
        true
    }

    /// Root of a term map by `p^j`, if every exponent is divisible.
    fn root_terms(&self, t: &Terms, j: u32) -> Option<Terms> {
        let pj = (self.p as i64).pow(j);
        let mut out = Terms::new();
        for (m, &c) in t {
            if m.0.iter().any(|e| e % pj != 0) {
                return None;
            }
            out.insert(PerfMonomial(m.0.iter().map(|e| e / pj).collect()), c);
        }
        Some(out)
    }

    /// Monomial multiple of `t`, kept only if every product term is admissible
    /// without truncation.
    fn exact_multiple(&self, m: &PerfMonomial, t: &Terms) -> Option<Terms> {
        let mut out = Terms::new();
        for (tm, &c) in t {
            let pm = m.mul(tm);
            if pm.0.iter().any(|&e| e < self.floor) || pm.total_pos() >= self.dcap {
                return None;
            }
            out.insert(pm, c);
        }
        Some(out)
    }

    /// Relation spanning set: exact monomial multiples of every Frobenius root
    /// of every relation, up to depth N.
    fn relation_rows(&self, monos: &[PerfMonomial]) -> Vec<Terms> {
        let mut rows = Vec::new();
        for r in &self.relations {
            for j in 0..=self.budget.depth {
                let Some(root) = self.root_terms(r, j) else { continue };
                for m in monos {
                    if let Some(t) = self.exact_multiple(m, &root) {
                        rows.push(t);
                    }
                }
            }
        }
        rows
    }

    fn build_reducer(&self) -> Option<Reducer> {
        if self.relations.is_empty() {
            return None;
        }
        let mut monos = self.ambient_monomials(self.budget.depth, REDUCER_LIMIT)?;
        // high-degree monomials first so they become pivots and get eliminated
        monos.sort_by(|a, b| b.total_pos().cmp(&a.total_pos()).then_with(|| b.cmp(a)));
        let index: HashMap<PerfMonomial, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut ech = Echelon::new(self.field(), monos.len());
        for row in self.relation_rows(&monos) {
            let mut v = vec![0u32; monos.len()];
            for (m, c) in row {
                v[index[&m]] = c;
            }
            ech.insert(v);
        }
        Some(Reducer { index, monos, ech })
    }

    fn normalize(&self, mut t: Terms) -> Terms {
        t.retain(|m, c| *c != 0 && m.total_pos() < self.dcap);
        if let Some(r) = &self.reducer {
            let mut v = vec![0u32; r.monos.len()];
            for (m, c) in &t {
                match r.index.get(m) {
                    Some(&i) => v[i] = *c,
                    None => return t,
                }
            }
            r.ech.reduce_in_place(&mut v);
            let mut out = Terms::new();
            for (i, c) in v.into_iter().enumerate() {
                if c != 0 {
                    out.insert(r.monos[i].clone(), c);
                }
            }
            out
        } else {
            t
        }
    }
}

fn add_term(t: &mut Terms, m: PerfMonomial, c: u32, p: u32) {
    use std::collections::btree_map::Entry;
    let c = c % p;
    if c == 0 {
        return;
    }
    match t.entry(m) {
        Entry::Occupied(mut o) => {
            let v = (*o.get() + c) % p;
            if v == 0 {
                o.remove();
            } else {
                *o.get_mut() = v;
            }
        }
        Entry::Vacant(v) => {
            v.insert(c);
        }
    }
}

/// An element of a truncated perfect F_p-algebra.
#[derive(Clone)]
pub struct PerfPoly {
    ring: Arc<RingPresentation>,
    terms: Terms,
}

impl PartialEq for PerfPoly {
    fn eq(&self, o: &Self) -> bool {
        same_ring(&self.ring, &o.ring) && self.terms == o.terms
    }
}
impl Eq for PerfPoly {}

pub fn same_ring(a: &Arc<RingPresentation>, b: &Arc<RingPresentation>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl fmt::Debug for PerfPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PerfPoly({self})")
    }
}

fn fmt_exp(e: i64, scale: i64) -> String {
    let r = Rational64::new(e, scale);
    if r.is_integer() && r.to_integer() > 0 {
        if r.to_integer() == 1 {
            String::new()
        } else {
            format!("^{}", r.to_integer())
        }
    } else if r.is_integer() {
        format!("^({})", r.to_integer())
    } else {
        format!("^({}/{})", r.numer(), r.denom())
    }
}

impl fmt::Display for PerfPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e != 0)
                .map(|(i, &e)| format!("{}{}", self.ring.names[i], fmt_exp(e, self.ring.scale)))
                .collect();
            if factors.is_empty() {
                write!(f, "{c}")?;
            } else if *c == 1 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{c}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

impl PerfPoly {
    pub fn zero(ring: &Arc<RingPresentation>) -> Self {
        PerfPoly { ring: ring.clone(), terms: Terms::new() }
    }

    pub fn constant(ring: &Arc<RingPresentation>, c: i64) -> Self {
        let mut t = Terms::new();
        let c = ring.field().reduce(c);
        if c != 0 {
            t.insert(PerfMonomial::one(ring.nvars()), c);
        }
        PerfPoly::from_terms(ring, t)
    }

    pub fn one(ring: &Arc<RingPresentation>) -> Self {
        PerfPoly::constant(ring, 1)
    }

    /// Builds from raw terms, truncating and normal-forming.
    pub fn from_terms(ring: &Arc<RingPresentation>, t: Terms) -> Self {
        PerfPoly { ring: ring.clone(), terms: ring.normalize(t) }
    }

    /// Monomial with rational exponents.
    pub fn monomial(ring: &Arc<RingPresentation>, exps: &[Rational64]) -> Result<Self> {
        if exps.len() != ring.nvars() {
            return Err(Error::Invalid("exponent vector length".into()));
        }
        let mut m = Vec::with_capacity(exps.len());
        for (i, &e) in exps.iter().enumerate() {
            let v = ring.exp_numerator(e)?;
            if v < 0 && !ring.inverted[i] {
                return Err(Error::Invalid(format!("negative exponent on {}", ring.names[i])));
            }
            if v < ring.floor {
                return Err(Error::TruncationOverflow { floor: ring.budget.l.to_string() });
            }
            m.push(v);
        }
        Ok(PerfPoly::from_monomial(ring, PerfMonomial(m.into_boxed_slice()), 1))
    }

    /// `c * m` for a numerator-encoded monomial.
    pub fn from_monomial(ring: &Arc<RingPresentation>, m: PerfMonomial, c: u32) -> Self {
        let mut t = Terms::new();
        if !c.is_multiple_of(ring.p) {
            t.insert(m, c % ring.p);
        }
        PerfPoly::from_terms(ring, t)
    }

    /// `x^e` for a named variable.
    pub fn var_pow(ring: &Arc<RingPresentation>, name: &str, e: Rational64) -> Result<Self> {
        let i = ring.var_index(name)?;
        let mut exps = vec![Rational64::from_integer(0); ring.nvars()];
        exps[i] = e;
        PerfPoly::monomial(ring, &exps)
    }

    pub fn var(ring: &Arc<RingPresentation>, name: &str) -> Result<Self> {
        PerfPoly::var_pow(ring, name, Rational64::from_integer(1))
    }

    pub fn parse(ring: &Arc<RingPresentation>, s: &str) -> Result<Self> {
        let t = ring.terms_from_parsed(&parse_poly(s)?, true)?;
        Ok(PerfPoly::from_terms(ring, t))
    }

    pub fn ring(&self) -> &Arc<RingPresentation> {
        &self.ring
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_coeff(&self) -> u32 {
        self.terms.get(&PerfMonomial::one(self.ring.nvars())).copied().unwrap_or(0)
    }

    fn check(&self, o: &PerfPoly) -> Result<()> {
        if same_ring(&self.ring, &o.ring) {
            Ok(())
        } else {
            Err(Error::RingMismatch)
        }
    }

    pub fn add(&self, o: &PerfPoly) -> Result<PerfPoly> {
        self.check(o)?;
        Ok(self.add_raw(o))
    }

    pub(crate) fn add_raw(&self, o: &PerfPoly) -> PerfPoly {
        let p = self.ring.p;
        let (big, small) = if self.terms.len() >= o.terms.len() { (self, o) } else { (o, self) };
        let mut t = big.terms.clone();
        for (m, &c) in &small.terms {
            match t.get_mut(m) {
                Some(v) => {
                    *v = (*v + c) % p;
                    if *v == 0 {
                        t.remove(m);
                    }
                }
                None => {
                    t.insert(m.clone(), c);
                }
            }
        }
        // sums of normal forms are normal forms
        PerfPoly { ring: self.ring.clone(), terms: t }
    }

    pub fn neg(&self) -> PerfPoly {
        let p = self.ring.p;
        PerfPoly { ring: self.ring.clone(), terms: self.terms.iter().map(|(m, &c)| (m.clone(), (p - c) % p)).collect() }
    }

    pub fn sub(&self, o: &PerfPoly) -> Result<PerfPoly> {
        self.add(&o.neg())
    }

    pub fn scalar_mul(&self, c: i64) -> PerfPoly {
        let zp = self.ring.field();
        let c = zp.reduce(c);
        if c == 0 {
            return PerfPoly::zero(&self.ring);
        }
        PerfPoly { ring: self.ring.clone(), terms: self.terms.iter().map(|(m, &v)| (m.clone(), zp.mul(v, c))).collect() }
    }

    pub fn mul(&self, o: &PerfPoly) -> Result<PerfPoly> {
        self.check(o)?;
        self.mul_raw(o)
    }

    pub(crate) fn mul_raw(&self, o: &PerfPoly) -> Result<PerfPoly> {
        if self.is_zero() || o.is_zero() {
            return Ok(PerfPoly::zero(&self.ring));
        }
        let r = &self.ring;
        let p = r.p as u64;
        let mut acc: HashMap<PerfMonomial, u64> = HashMap::with_capacity(self.terms.len() * o.terms.len());
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &o.terms {
                let m = ma.mul(mb);
                if m.0.iter().any(|&e| e < r.floor) {
                    return Err(Error::TruncationOverflow { floor: r.budget.l.to_string() });
                }
                if m.total_pos() >= r.dcap {
                    continue;
                }
                *acc.entry(m).or_insert(0) += ca as u64 * cb as u64;
            }
        }
        let t: Terms = acc
            .into_iter()
            .filter_map(|(m, c)| {
                let c = (c % p) as u32;
                (c != 0).then_some((m, c))
            })
            .collect();
        Ok(PerfPoly { ring: r.clone(), terms: if r.reducer.is_some() { r.normalize(t) } else { t } })
    }

    pub fn pow(&self, mut e: u64) -> Result<PerfPoly> {
        let mut base = self.clone();
        let mut acc = PerfPoly::one(&self.ring);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_raw(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_raw(&base)?;
            }
        }
        Ok(acc)
    }

    /// `a^(p^k)`: exponents scaled by `p^k`, coefficients fixed.
    pub fn frobenius_pow(&self, k: u32) -> Result<PerfPoly> {
        if k == 0 {
            return Ok(self.clone());
        }
        let r = &self.ring;
        let pk = (r.p as i64).pow(k);
        let mut t = Terms::new();
        for (m, &c) in &self.terms {
            let m2 = m.scaled(pk);
            if m2.0.iter().any(|&e| e < r.floor) {
                return Err(Error::TruncationOverflow { floor: r.budget.l.to_string() });
            }
            if m2.total_pos() < r.dcap {
                t.insert(m2, c);
            }
        }
        Ok(PerfPoly::from_terms(r, t))
    }

    pub fn frobenius(&self) -> Result<PerfPoly> {
        self.frobenius_pow(1)
    }

    /// `a^(1/p^k)`, failing when the exponent lattice of depth N is exceeded.
    pub fn frobenius_inverse_pow(&self, k: u32) -> Result<PerfPoly> {
        let r = &self.ring;
        let root = r.root_terms(&self.terms, k).ok_or_else(|| {
            Error::PrecisionExhausted(format!("p^{k}-th root exceeds perfection depth {}", r.budget.depth))
        })?;
        Ok(PerfPoly::from_terms(r, root))
    }

    pub fn frobenius_inverse(&self) -> Result<PerfPoly> {
        self.frobenius_inverse_pow(1)
    }

    /// Minimum over terms of the exponent sum.
    pub fn gauss_norm(&self) -> NormExponent {
        match self.terms.keys().map(|m| m.total()).min() {
            None => NormExponent::INFINITY,
            Some(t) => NormExponent::finite(Rational64::new(t, self.ring.scale)),
        }
    }

    /// Largest exponent-denominator level among the terms.
    pub fn level(&self) -> u32 {
        self.terms.keys().flat_map(|m| m.0.iter()).map(|&e| self.ring.exp_level(e)).max().unwrap_or(0)
    }

    /// Largest total nonnegative exponent, as a numerator over `p^N`.
    pub fn max_degree_numerator(&self) -> i64 {
        self.terms.keys().map(|m| m.total_pos()).max().unwrap_or(0)
    }

    /// Moves to another ring with the same variables (same depth), truncating.
    pub fn change_ring(&self, target: &Arc<RingPresentation>) -> Result<PerfPoly> {
        if target.names != self.ring.names || target.p != self.ring.p {
            return Err(Error::RingMismatch);
        }
        let ratio = Rational64::new(target.scale, self.ring.scale);
        let mut t = Terms::new();
        for (m, &c) in &self.terms {
            let mut v = Vec::with_capacity(m.0.len());
            for &e in m.0.iter() {
                let x = ratio * e;
                if !x.is_integer() {
                    return Err(Error::PrecisionExhausted("target depth too small".into()));
                }
                let x = x.to_integer();
                if x < target.floor {
                    return Err(Error::TruncationOverflow { floor: target.budget.l.to_string() });
                }
                v.push(x);
            }
            t.insert(PerfMonomial(v.into_boxed_slice()), c);
        }
        Ok(PerfPoly::from_terms(target, t))
    }

    pub fn is_unit(&self) -> Result<bool> {
        match self.invert() {
            Ok(_) => Ok(true),
            Err(Error::NotAUnit) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Solves `a * y = 1` at the working truncation.
    pub fn invert(&self) -> Result<PerfPoly> {
        let r = &self.ring;
        if !r.has_relations() && !r.is_laurent() {
            let c = self.constant_coeff();
            if c == 0 {
                return Err(Error::NotAUnit);
            }
            let zp = r.field();
            let ci = zp.inv(c).unwrap();
            // a = c (1 - n), n nilpotent at truncation
            let n = PerfPoly::one(r).sub(&self.scalar_mul(ci as i64))?;
            let mut inv = PerfPoly::one(r);
            let mut pw = PerfPoly::one(r);
            loop {
                pw = pw.mul_raw(&n)?;
                if pw.is_zero() {
                    break;
                }
                inv = inv.add_raw(&pw);
            }
            return Ok(inv.scalar_mul(ci as i64));
        }
        let monos = match &r.reducer {
            Some(red) => red.monos.clone(),
            None => r
                .ambient_monomials(r.budget.depth, WINDOW_LIMIT)
                .ok_or_else(|| Error::ResourceBound("unit test window too large".into()))?,
        };
        let mut index: HashMap<PerfMonomial, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut cols = Vec::with_capacity(monos.len());
        let mut imgs = Vec::with_capacity(monos.len());
        for m in &monos {
            let y = PerfPoly::from_monomial(r, m.clone(), 1);
            match self.mul_raw(&y) {
                Ok(v) => imgs.push(Some(v)),
                Err(Error::TruncationOverflow { .. }) => imgs.push(None),
                Err(e) => return Err(e),
            }
        }
        for v in imgs.iter().flatten() {
            for m in v.terms.keys() {
                let k = index.len();
                index.entry(m.clone()).or_insert(k);
            }
        }
        let one = PerfMonomial::one(r.nvars());
        let k = index.len();
        index.entry(one.clone()).or_insert(k);
        let dim = index.len();
        for v in &imgs {
            let mut col = vec![0u32; dim];
            if let Some(v) = v {
                for (m, &c) in &v.terms {
                    col[index[m]] = c;
                }
            }
            cols.push(col);
        }
        let mut target = vec![0u32; dim];
        let one_poly = PerfPoly::one(r);
        for (m, &c) in &one_poly.terms {
            target[index[m]] = c;
        }
        let _ = one;
        let sol = linalg::solve(r.field(), dim, &cols, &target).ok_or(Error::NotAUnit)?;
        let mut t = Terms::new();
        for (i, c) in sol.into_iter().enumerate() {
            if c != 0 && imgs[i].is_some() {
                t.insert(monos[i].clone(), c);
            }
        }
        let y = PerfPoly::from_terms(r, t);
        debug_assert_eq!(self.mul_raw(&y)?, one_poly);
        Ok(y)
    }
}

/// One summand `multiplier * gen^(1/p^root)` of a membership certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertTerm {
    pub generator: usize,
    pub root: u32,
    pub multiplier: PerfPoly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipCertificate {
    pub terms: Vec<CertTerm>,
}

impl MembershipCertificate {
    /// Recomputes `sum multiplier * gen^(1/p^root)` and compares with `a`.
    pub fn verify(&self, a: &PerfPoly, gens: &[PerfPoly]) -> Result<bool> {
        let mut acc = PerfPoly::zero(a.ring());
        for t in &self.terms {
            let g = gens[t.generator].frobenius_inverse_pow(t.root)?;
            acc = acc.add(&t.multiplier.mul(&g)?)?;
        }
        Ok(acc == *a)
    }
}

/// Decides whether `a` lies in the ideal generated by `gens` and their
/// Frobenius roots, using truncated multiples in the working window.
pub fn ideal_membership(a: &PerfPoly, gens: &[PerfPoly]) -> Result<Option<MembershipCertificate>> {
    membership_impl(a, gens, None)
}

/// Membership using only exact multiples whose terms all have total exponent
/// at most `bound`. Sound for any bound; complete once the bound is large enough.
pub fn ideal_membership_bounded(a: &PerfPoly, gens: &[PerfPoly], bound: Rational64) -> Result<Option<MembershipCertificate>> {
    membership_impl(a, gens, Some(bound))
}

fn membership_impl(a: &PerfPoly, gens: &[PerfPoly], bound: Option<Rational64>) -> Result<Option<MembershipCertificate>> {
    let r = a.ring().clone();
    for g in gens {
        a.check(g)?;
    }
    if a.is_zero() {
        return Ok(Some(MembershipCertificate { terms: vec![] }));
    }
    let level = gens.iter().map(|g| g.level()).chain(std::iter::once(a.level())).max().unwrap_or(0);
    let bound_num = bound.map(|b| (b * r.scale).floor().to_integer());
    let monos: Vec<PerfMonomial> = r
        .ambient_monomials(level, WINDOW_LIMIT)
        .ok_or_else(|| Error::ResourceBound("membership window too large".into()))?
        .into_iter()
        .filter(|m| bound_num.is_none_or(|b| m.total_pos() <= b))
        .collect();
    let step_ok = |t: &Terms| -> bool {
        t.keys().flat_map(|m| m.0.iter()).all(|&e| r.exp_level(e) <= level)
    };
    let mut labels: Vec<(usize, u32, PerfMonomial)> = Vec::new();
    let mut vecs: Vec<Terms> = Vec::new();
    for (gi, g) in gens.iter().enumerate() {
        for j in 0..=r.budget.depth {
            let Some(root) = r.root_terms(&g.terms, j) else { continue };
            if !step_ok(&root) {
                continue;
            }
            for m in &monos {
                let prod = match bound_num {
                    Some(b) => match r.exact_multiple(m, &root) {
                        Some(t) if t.keys().all(|k| k.total_pos() <= b) => r.normalize(t),
                        _ => continue,
                    },
                    None => {
                        let y = PerfPoly::from_monomial(&r, m.clone(), 1);
                        let rp = PerfPoly { ring: r.clone(), terms: root.clone() };
                        match rp.mul_raw(&y) {
                            Ok(v) => v.terms,
                            Err(Error::TruncationOverflow { .. }) => continue,
                            Err(e) => return Err(e),
                        }
                    }
                };
                if prod.is_empty() {
                    continue;
                }
                labels.push((gi, j, m.clone()));
                vecs.push(prod);
            }
        }
    }
    let mut index: HashMap<PerfMonomial, usize> = HashMap::new();
    for t in vecs.iter().chain(std::iter::once(&a.terms)) {
        for m in t.keys() {
            let k = index.len();
            index.entry(m.clone()).or_insert(k);
        }
    }
    let dim = index.len();
    let to_vec = |t: &Terms| {
        let mut v = vec![0u32; dim];
        for (m, &c) in t {
            v[index[m]] = c;
        }
        v
    };
    let cols: Vec<Vec<u32>> = vecs.iter().map(to_vec).collect();
    let Some(sol) = linalg::solve(r.field(), dim, &cols, &to_vec(&a.terms)) else {
        return Ok(None);
    };
    let mut grouped: BTreeMap<(usize, u32), Terms> = BTreeMap::new();
    for (i, c) in sol.into_iter().enumerate() {
        if c != 0 {
            let (gi, j, m) = &labels[i];
            add_term(grouped.entry((*gi, *j)).or_default(), m.clone(), c, r.p);
        }
    }
    let terms = grouped
        .into_iter()
        .map(|((gi, j), t)| CertTerm { generator: gi, root: j, multiplier: PerfPoly { ring: r.clone(), terms: t } })
        .collect();
    Ok(Some(MembershipCertificate { terms }))
}

pub fn pp_add(a: &PerfPoly, b: &PerfPoly) -> Result<PerfPoly> {
    a.add(b)
}

pub fn pp_mul(a: &PerfPoly, b: &PerfPoly) -> Result<PerfPoly> {
    a.mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    fn free(vars: &[&str], d: i64, depth: u32) -> Arc<RingPresentation> {
        RingPresentation::free(2, vars, PrecisionBudget::simple(1, d, depth))
    }

    #[test]
    fn addition_examples() {
        let ring = free(&["x", "y"], 4, 2);
        let x = PerfPoly::var(&ring, "x").unwrap();
        assert!(pp_add(&x, &x).unwrap().is_zero());
        let s = pp_add(&PerfPoly::parse(&ring, "x^(1/2)").unwrap(), &PerfPoly::var(&ring, "y").unwrap()).unwrap();
        assert_eq!(s, PerfPoly::parse(&ring, "y + x^(1/2)").unwrap());
        let ring3 = free(&["x"], 3, 0);
        let x3 = PerfPoly::parse(&ring3, "x^3").unwrap();
        assert!(x3.is_zero());
        assert!(pp_add(&x3, &PerfPoly::zero(&ring3)).unwrap().is_zero());
    }

    #[test]
    fn multiplication_examples() {
        let ring = free(&["x"], 4, 1);
        let h = PerfPoly::parse(&ring, "x^(1/2)").unwrap();
        assert_eq!(pp_mul(&h, &h).unwrap(), PerfPoly::var(&ring, "x").unwrap());
        let lr = RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(1, 4, 0).with_l(2)).unwrap();
        let x = PerfPoly::var(&lr, "x").unwrap();
        let xi = PerfPoly::parse(&lr, "x^-1").unwrap();
        assert_eq!(pp_mul(&x, &xi).unwrap(), PerfPoly::one(&lr));
        let xi2 = pp_mul(&xi, &xi).unwrap();
        assert!(matches!(pp_mul(&xi2, &xi), Err(Error::TruncationOverflow { .. })));
    }

    #[test]
    fn presented_ring_normal_form() {
        let vars = [("x", false), ("y", false), ("u", false), ("v", false)];
        let ring = RingPresentation::new(2, &vars, &["u*x + v*y - 1"], PrecisionBudget::simple(1, 3, 0)).unwrap();
        assert!(ring.has_reducer());
        let ux = PerfPoly::parse(&ring, "u*x").unwrap();
        let vy = PerfPoly::parse(&ring, "v*y").unwrap();
        assert_eq!(pp_add(&ux, &vy).unwrap(), PerfPoly::one(&ring));
        let e = PerfPoly::parse(&ring, "u*x + v*y").unwrap();
        assert!(e.is_unit().unwrap());
        assert_eq!(e.invert().unwrap(), PerfPoly::one(&ring));
    }

    #[test]
    fn mismatched_rings() {
        let a = PerfPoly::one(&free(&["x"], 4, 0));
        let b = PerfPoly::one(&free(&["y"], 4, 0));
        assert_eq!(a.add(&b), Err(Error::RingMismatch));
        assert_eq!(a.mul(&b), Err(Error::RingMismatch));
    }

    #[test]
    fn frobenius_examples() {
        let ring = free(&["x", "y"], 8, 2);
        let h = PerfPoly::parse(&ring, "x^(1/2)").unwrap();
        assert_eq!(h.frobenius().unwrap(), PerfPoly::parse(&ring, "x").unwrap());
        let s = PerfPoly::parse(&ring, "x + y").unwrap();
        assert_eq!(s.frobenius().unwrap(), PerfPoly::parse(&ring, "x^2 + y^2").unwrap());
        assert_eq!(PerfPoly::one(&ring).frobenius().unwrap(), PerfPoly::one(&ring));
        assert_eq!(PerfPoly::parse(&ring, "x").unwrap().frobenius_inverse().unwrap(), h);
        assert_eq!(PerfPoly::parse(&ring, "x^2 + y^2").unwrap().frobenius_inverse().unwrap(), s);
        let deepest = PerfPoly::parse(&ring, "x^(1/4)").unwrap();
        assert!(matches!(deepest.frobenius_inverse(), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn gauss_norm_examples() {
        let ring = free(&["x"], 4, 1);
        let a = PerfPoly::parse(&ring, "x + x^(1/2)").unwrap();
        assert_eq!(a.gauss_norm(), NormExponent::finite(r(1, 2)));
        assert_eq!(PerfPoly::one(&ring).gauss_norm(), NormExponent::int(0));
        assert_eq!(PerfPoly::zero(&ring).gauss_norm(), NormExponent::INFINITY);
    }

    #[test]
    fn geometric_series_inverse() {
        let ring = free(&["x"], 5, 0);
        let a = PerfPoly::parse(&ring, "1 + x").unwrap();
        let inv = a.invert().unwrap();
        assert_eq!(inv, PerfPoly::parse(&ring, "1 + x + x^2 + x^3 + x^4").unwrap());
        assert_eq!(a.mul(&inv).unwrap(), PerfPoly::one(&ring));
        assert_eq!(PerfPoly::var(&ring, "x").unwrap().invert(), Err(Error::NotAUnit));
        assert!(!PerfPoly::var(&ring, "x").unwrap().is_unit().unwrap());
    }

    #[test]
    fn laurent_inverse_by_linear_algebra() {
        let lr = RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(1, 3, 1).with_l(2)).unwrap();
        let x = PerfPoly::var(&lr, "x").unwrap();
        assert_eq!(x.invert().unwrap(), PerfPoly::parse(&lr, "x^-1").unwrap());
    }

    #[test]
    fn membership_examples() {
        let ring = free(&["x", "y"], 4, 1);
        let x = PerfPoly::var(&ring, "x").unwrap();
        let y = PerfPoly::var(&ring, "y").unwrap();
        let c = ideal_membership(&x, std::slice::from_ref(&x)).unwrap().unwrap();
        assert!(c.verify(&x, std::slice::from_ref(&x)).unwrap());
        assert_eq!(c.terms.len(), 1);
        assert_eq!(c.terms[0].multiplier, PerfPoly::one(&ring));
        assert!(ideal_membership(&PerfPoly::one(&ring), &[x.clone(), y]).unwrap().is_none());
        let h = PerfPoly::parse(&ring, "x^(1/2)").unwrap();
        let c = ideal_membership(&h, std::slice::from_ref(&x)).unwrap().unwrap();
        assert!(c.verify(&h, std::slice::from_ref(&x)).unwrap());
        let r0 = free(&["x"], 4, 0);
        let x0 = PerfPoly::var(&r0, "x").unwrap();
        let h0 = PerfPoly::parse(&free(&["x"], 4, 1), "x^(1/2)").unwrap();
        assert!(h0.change_ring(&r0).is_err());
        assert!(ideal_membership(&PerfPoly::parse(&r0, "x^2 + x").unwrap(), &[x0]).unwrap().is_some());
    }

    #[test]
    fn bounded_membership_is_exact() {
        let vars = ["x", "y", "u", "v"];
        let ring = free(&vars, 12, 0);
        let g = PerfPoly::parse(&ring, "u*x + v*y + 1").unwrap();
        let a = PerfPoly::parse(&ring, "x^3*u + x^2*v*y*u + x^2*u").unwrap();
        // a = x^2 u (x + v y + 1) is not a multiple of g; a' = x u g is
        let a2 = g.mul(&PerfPoly::parse(&ring, "x*u").unwrap()).unwrap();
        let c = ideal_membership_bounded(&a2, std::slice::from_ref(&g), r(4, 1)).unwrap().unwrap();
        assert!(c.verify(&a2, std::slice::from_ref(&g)).unwrap());
        assert!(ideal_membership_bounded(&a, std::slice::from_ref(&g), r(6, 1)).unwrap().is_none());
    }

    #[test]
    fn display_round_trip() {
        let ring = free(&["x", "y"], 4, 2);
        for s in ["x^(3/4)*y + 1", "x^(1/2) + y^3 + x*y", "0"] {
            let a = PerfPoly::parse(&ring, s).unwrap();
            assert_eq!(PerfPoly::parse(&ring, &a.to_string()).unwrap(), a);
        }
    }

    fn arb_poly(ring: Arc<RingPresentation>) -> impl Strategy<Value = PerfPoly> {
        let scale = ring.scale();
        let cap = ring.dcap().min(8 * scale);
        prop::collection::vec((0..cap, 0..cap), 0..6).prop_map(move |ts| {
            let mut t = Terms::new();
            for (a, b) in ts {
                add_term(&mut t, PerfMonomial(vec![a, b].into_boxed_slice()), 1, 2);
            }
            let _ = scale;
            PerfPoly::from_terms(&ring, t)
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_poly(free(&["x","y"], 3, 2)), b in arb_poly(free(&["x","y"], 3, 2)), c in arb_poly(free(&["x","y"], 3, 2))) {
            prop_assert_eq!(a.mul(&b)?.mul(&c)?, a.mul(&b.mul(&c)?)?);
            prop_assert_eq!(a.mul(&b)?, b.mul(&a)?);
            prop_assert_eq!(a.mul(&b.add(&c)?)?, a.mul(&b)?.add(&a.mul(&c)?)?);
            prop_assert_eq!(a.add(&b)?.add(&c)?, a.add(&b.add(&c)?)?);
            prop_assert_eq!(a.mul(&PerfPoly::one(a.ring()))?, a.clone());
        }

        #[test]
        fn frobenius_is_hom(a in arb_poly(free(&["x","y"], 3, 2)), b in arb_poly(free(&["x","y"], 3, 2))) {
            prop_assert_eq!(a.add(&b)?.frobenius()?, a.frobenius()?.add(&b.frobenius()?)?);
            prop_assert_eq!(a.mul(&b)?.frobenius()?, a.frobenius()?.mul(&b.frobenius()?)?);
            prop_assert_eq!(a.frobenius()?, a.pow(2)?);
            let f = a.frobenius()?;
            prop_assert_eq!(f.frobenius_inverse()?.frobenius()?, f);
        }

        #[test]
        fn gauss_norm_laws(a in arb_poly(free(&["x","y"], 64, 2)), b in arb_poly(free(&["x","y"], 64, 2))) {
            // untruncated regime: D is far above any product degree
            prop_assert_eq!(a.mul(&b)?.gauss_norm(), a.gauss_norm().add(b.gauss_norm()));
            prop_assert!(a.add(&b)?.gauss_norm() >= a.gauss_norm().min(b.gauss_norm()));
        }

        #[test]
        fn normal_form_idempotent(cs in prop::collection::vec(0u32..2, 15)) {
            let vars = [("x", false), ("y", false), ("u", false), ("v", false)];
            let ring = RingPresentation::new(2, &vars, &["u*x + v*y - 1"], PrecisionBudget::simple(1, 3, 0)).unwrap();
            let monos = ring.ambient_monomials(0, 100).unwrap();
            let mut t = Terms::new();
            for (m, c) in monos.iter().zip(cs) { if c != 0 { t.insert(m.clone(), c); } }
            let a = PerfPoly::from_terms(&ring, t);
            prop_assert_eq!(PerfPoly::from_terms(&ring, a.terms().clone()), a);
        }
    }
}
