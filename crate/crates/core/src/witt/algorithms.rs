//! Predicates and constructive algorithms on Witt vectors: distinguished and
//! primitive elements, unit combinations in Teichmuller powers, small-norm
//! decompositions and parameter perturbation.

use super::WittVec;
use crate::arith::Zq;
use crate::error::{Error, Result};
use crate::fpring::{ideal_membership, ideal_membership_bounded, MembershipCertificate, PerfPoly, RingPresentation};
use crate::norm::NormExponent;
use num_rational::Rational64;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Outcome of `is_distinguished`. A negative answer means "not certified at
/// this precision", never a proof of the negation.
#[derive(Debug, Clone)]
pub struct Distinguished {
    pub certified: bool,
    /// Constant coordinate of `d`, in the ring where `delta` lives.
    pub d0: PerfPoly,
    /// Constant coordinate of `delta(d)`.
    pub delta0: PerfPoly,
    /// `1 = c_0 d0 + c_1 delta0` when certified.
    pub certificate: Option<MembershipCertificate>,
}

/// `(p, d, delta(d))` is the unit ideal iff `1 in (d_0, delta(d)_0)` mod p.
pub fn is_distinguished(d: &WittVec) -> Result<Distinguished> {
    let dl = d.delta()?;
    let r = dl.ring().clone();
    let d0 = d.coords()[0].change_ring(&r)?;
    let delta0 = dl.coords()[0].clone();
    let gens = [d0.clone(), delta0.clone()];
    let certificate = ideal_membership(&PerfPoly::one(&r), &gens)?;
    if let Some(c) = &certificate {
        debug_assert!(c.verify(&PerfPoly::one(&r), &gens)?);
    }
    Ok(Distinguished { certified: certificate.is_some(), d0, delta0, certificate })
}

#[derive(Debug, Clone)]
pub struct Primitivity {
    pub certified: bool,
    /// alpha of the constant coordinate; must be positive.
    pub z0_alpha: NormExponent,
    /// Inverse of the classical coordinate `a_1 = zbar_1^p`.
    pub inverse_coord1: Option<PerfPoly>,
    /// Inverse of the Teichmuller digit `zbar_1`, when the root is available.
    pub inverse_digit1: Option<PerfPoly>,
}

impl Primitivity {
    /// Re-checks `a_1 * inverse = 1`.
    pub fn verify(&self, z: &WittVec) -> Result<bool> {
        match &self.inverse_coord1 {
            Some(inv) => Ok(self.certified && z.coords()[1].mul(inv)? == PerfPoly::one(z.ring())),
            None => Ok(false),
        }
    }
}

/// `zbar_0` topologically nilpotent and `zbar_1` a unit.
pub fn is_primitive(z: &WittVec) -> Result<Primitivity> {
    if z.len() < 2 {
        return Err(Error::PrecisionExhausted("primitivity needs length >= 2".into()));
    }
    let z0_alpha = z.coords()[0].gauss_norm();
    let nilpotent = z0_alpha > NormExponent::int(0);
    let inverse_coord1 = match z.coords()[1].invert() {
        Ok(v) => Some(v),
        Err(Error::NotAUnit) => None,
        Err(e) => return Err(e),
    };
    let inverse_digit1 = inverse_coord1.as_ref().and_then(|v| v.frobenius_inverse().ok());
    Ok(Primitivity { certified: nilpotent && inverse_coord1.is_some(), z0_alpha, inverse_coord1, inverse_digit1 })
}

/// One regrouped term `coeff * [prod abar_k^{e_k} xbar_k^{e_k - j_k}]` of `c_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationTerm {
    pub coeff: u32,
    /// Exponents `e_k`, with denominator `p^(n-1)`.
    pub exps: Vec<Rational64>,
}

#[derive(Debug, Clone)]
pub struct UnitCombination {
    pub n: usize,
    /// Floor vector `j` to the terms making up `c_j`.
    pub groups: BTreeMap<Vec<u32>, Vec<CombinationTerm>>,
    pub abar: Vec<PerfPoly>,
    pub xbar: Vec<PerfPoly>,
}

/// Exponent bookkeeping of the formal expansion, numerators over `p^(n-1)`.
type Formal = BTreeMap<Vec<u64>, u32>;

fn formal_mul(a: &Formal, b: &Formal, zq: Zq) -> Formal {
    let mut out = Formal::new();
    for (ea, &ca) in a {
        for (eb, &cb) in b {
            let e: Vec<u64> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let v = out.entry(e).or_insert(0);
            *v = zq.add(*v, zq.mul(ca, cb));
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

fn formal_pow(a: &Formal, e: u64, zq: Zq, m: usize) -> Formal {
    let mut acc: Formal = BTreeMap::from([(vec![0u64; m], 1u32)]);
    for _ in 0..e {
        acc = formal_mul(&acc, a, zq);
    }
    acc
}

/// Writes 1 as a combination of Teichmuller monomials `[xbar]^j`, `j != 0`,
/// given `sum abar_i xbar_i = 1` in the digit ring.
///
/// With `P = p^(n-1)`: `1 = [sum abar_i xbar_i] = (sum [abar_i xbar_i]^(1/P))^P`
/// mod `p^n`; raising to the power `m+1` makes every monomial carry total
/// exponent `m+1`, so at least one floor `j_k` is positive. Terms are grouped by
/// the floor vector.
pub fn unit_witt_combination(abar: &[PerfPoly], xbar: &[PerfPoly], n: usize) -> Result<UnitCombination> {
    if abar.is_empty() || abar.len() != xbar.len() {
        return Err(Error::Invalid("abar and xbar must be nonempty and of equal length".into()));
    }
    let ring = abar[0].ring().clone();
    let mut s = PerfPoly::zero(&ring);
    for (a, x) in abar.iter().zip(xbar) {
        s = s.add(&a.mul(x)?)?;
    }
    if s != PerfPoly::one(&ring) {
        return Err(Error::BadWitness(format!("sum abar_i xbar_i = {s}, not 1")));
    }
    let p = ring.p();
    let m1 = abar.len();
    let zq = Zq::new(p, n as u32);
    let big_p = (p as u64).pow(n as u32 - 1);
    let mut lin = Formal::new();
    for k in 0..m1 {
        let mut e = vec![0u64; m1];
        e[k] = 1;
        lin.insert(e, 1);
    }
    let e1 = formal_pow(&lin, big_p, zq, m1);
    let full = formal_pow(&e1, m1 as u64, zq, m1);
    let mut groups: BTreeMap<Vec<u32>, Vec<CombinationTerm>> = BTreeMap::new();
    for (e, c) in full {
        let j: Vec<u32> = e.iter().map(|&x| (x / big_p) as u32).collect();
        debug_assert!(j.iter().any(|&x| x > 0));
        groups.entry(j).or_default().push(CombinationTerm {
            coeff: c,
            exps: e.iter().map(|&x| Rational64::new(x as i64, big_p as i64)).collect(),
        });
    }
    Ok(UnitCombination { n, groups, abar: abar.to_vec(), xbar: xbar.to_vec() })
}

/// `a^(e)` for `e` with denominator `p^k`: integer part by powering, fractional
/// part through a root.
fn rational_power(a: &PerfPoly, e: Rational64) -> Result<PerfPoly> {
    let den = *e.denom();
    let num = *e.numer();
    let p = a.ring().p() as i64;
    let mut k = 0;
    let mut d = den;
    while d > 1 {
        if d % p != 0 {
            return Err(Error::Invalid(format!("exponent {e} is not p-adic")));
        }
        d /= p;
        k += 1;
    }
    let whole = num.div_euclid(den);
    let frac = num.rem_euclid(den);
    let mut out = a.pow(whole as u64)?;
    if frac > 0 {
        out = out.mul(&a.frobenius_inverse_pow(k)?.pow(frac as u64)?)?;
    }
    Ok(out)
}

impl UnitCombination {
    /// Materializes `c_j` in the Witt ring over `ring` (which must carry the
    /// same variables as the inputs and enough depth for the roots).
    pub fn coefficients(&self, ring: &Arc<RingPresentation>) -> Result<Vec<(Vec<u32>, WittVec)>> {
        let abar: Vec<PerfPoly> = self.abar.iter().map(|a| a.change_ring(ring)).collect::<Result<_>>()?;
        let xbar: Vec<PerfPoly> = self.xbar.iter().map(|a| a.change_ring(ring)).collect::<Result<_>>()?;
        let mut out = Vec::new();
        for (j, terms) in &self.groups {
            let mut c = WittVec::zero(ring, self.n);
            for t in terms {
                let mut w = PerfPoly::one(ring);
                for k in 0..abar.len() {
                    w = w.mul(&rational_power(&abar[k], t.exps[k])?)?;
                    w = w.mul(&rational_power(&xbar[k], t.exps[k] - j[k] as i64)?)?;
                }
                let term = WittVec::teichmuller(&w, self.n).mul(&WittVec::from_int(ring, self.n, t.coeff as i64))?;
                c = c.add(&term)?;
            }
            out.push((j.clone(), c));
        }
        Ok(out)
    }

    /// `sum_j c_j prod_k [xbar_k]^{j_k}` computed in `W_n(ring)`.
    pub fn evaluate(&self, ring: &Arc<RingPresentation>) -> Result<WittVec> {
        let xbar: Vec<PerfPoly> = self.xbar.iter().map(|a| a.change_ring(ring)).collect::<Result<_>>()?;
        let mut acc = WittVec::zero(ring, self.n);
        for (j, c) in self.coefficients(ring)? {
            let mut mono = PerfPoly::one(ring);
            for (k, &jk) in j.iter().enumerate() {
                mono = mono.mul(&xbar[k].pow(jk as u64)?)?;
            }
            acc = acc.add(&c.mul(&WittVec::teichmuller(&mono, self.n))?)?;
        }
        Ok(acc)
    }

    /// Exact identity in `W_n(ring)`: the sum equals 1.
    pub fn verify_in(&self, ring: &Arc<RingPresentation>) -> Result<bool> {
        Ok(self.evaluate(ring)? == WittVec::one(ring, self.n))
    }

    /// Verifies the identity in `W_n(R/I)` where `free` is a relation-free ring
    /// with `D` large enough that nothing truncates and `I` is generated by
    /// `relations`: every classical coordinate of `sum - 1` must lie in `I`,
    /// certified by exact membership. Returns the certificates and the largest
    /// degree reached.
    pub fn verify_modulo(&self, free: &Arc<RingPresentation>, relations: &[PerfPoly]) -> Result<ModuloCheck> {
        let lhs = self.evaluate(free)?;
        let diff = lhs.sub(&WittVec::one(free, self.n))?;
        let mut max_deg = Rational64::from_integer(0);
        for c in lhs.coords().iter().chain(diff.coords()) {
            max_deg = max_deg.max(Rational64::new(c.max_degree_numerator(), free.scale()));
        }
        if max_deg >= free.budget().d {
            return Err(Error::PrecisionExhausted(format!(
                "degree {} reaches the truncation; raise D",
                crate::norm::rat_string(max_deg)
            )));
        }
        let mut certs = Vec::new();
        for c in diff.coords() {
            let bound = Rational64::new(c.max_degree_numerator(), free.scale());
            match ideal_membership_bounded(c, relations, bound)? {
                Some(cert) if cert.verify(c, relations)? => certs.push(cert),
                _ => return Ok(ModuloCheck { holds: false, max_degree: max_deg, certificates: certs }),
            }
        }
        Ok(ModuloCheck { holds: true, max_degree: max_deg, certificates: certs })
    }
}

#[derive(Debug, Clone)]
pub struct ModuloCheck {
    pub holds: bool,
    pub max_degree: Rational64,
    pub certificates: Vec<MembershipCertificate>,
}

/// Splits `f = sum (f b_i) [xbar_i]` given `sum b_i [xbar_i] = 1`. Fails with
/// `NormTooLarge` if some `f b_i` has a negative exponent in any coordinate.
pub fn small_norm_decompose(f: &WittVec, b: &[WittVec], xbar: &[PerfPoly]) -> Result<Vec<WittVec>> {
    if b.len() != xbar.len() || b.is_empty() {
        return Err(Error::Invalid("b and xbar must be nonempty and of equal length".into()));
    }
    let ring = f.ring();
    let n = f.len();
    let mut s = WittVec::zero(ring, n);
    for (bi, xi) in b.iter().zip(xbar) {
        s = s.add(&bi.mul(&WittVec::teichmuller(xi, n))?)?;
    }
    if s != WittVec::one(ring, n) {
        return Err(Error::BadWitness("sum b_i [xbar_i] is not 1".into()));
    }
    let mut parts = Vec::with_capacity(b.len());
    for (i, bi) in b.iter().enumerate() {
        let a = f.mul(bi)?;
        for (k, c) in a.coords().iter().enumerate() {
            if c.terms().keys().any(|m| m.0.iter().any(|&e| e < 0)) {
                return Err(Error::NormTooLarge(format!("coordinate {k} of f*b_{i} = {c} is not integral")));
            }
        }
        parts.push(a);
    }
    let mut back = WittVec::zero(ring, n);
    for (a, xi) in parts.iter().zip(xbar) {
        back = back.add(&a.mul(&WittVec::teichmuller(xi, n))?)?;
    }
    if back != *f {
        return Err(Error::BadWitness("reconstruction differs from f".into()));
    }
    Ok(parts)
}

/// Gauss-norm threshold above which `small_norm_decompose` succeeds for
/// Teichmuller inputs `b_i = [beta_i]`: `-min_i alpha(beta_i)`.
pub fn decomposition_threshold(b: &[WittVec]) -> NormExponent {
    let m = b.iter().map(|x| x.gauss_norm()).fold(NormExponent::INFINITY, NormExponent::min);
    NormExponent(m.value().map(|v| -v))
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub numerators: Vec<WittVec>,
    pub denominator: WittVec,
    /// `[xbar_0]^k` vanished at truncation.
    pub degenerate: bool,
    /// `[xbar_0]^k = sum a_i f_i + a_{n+1} g` re-checked.
    pub witness_identity: bool,
    /// `f_1 = (f_1 + [xbar_0]^k) - [xbar_0]^k` re-checked.
    pub recovery_identity: bool,
    /// Constant coordinates of the new generators and of `g`.
    pub mod_p_generators: Vec<PerfPoly>,
}

/// Replaces `(f_1, .., f_n; g)` by `(f_1 + [xbar_0]^k, f_2, .., f_n, [xbar_0]^k; g)`
/// after checking the witness `[xbar_0]^k = sum a_i f_i + a_{n+1} g`.
pub fn perturb_parameters(
    f: &[WittVec],
    g: &WittVec,
    xbar0: &PerfPoly,
    k: u32,
    witness: &[WittVec],
) -> Result<Perturbation> {
    if f.is_empty() || witness.len() != f.len() + 1 {
        return Err(Error::BadWitness("witness must have one entry per f_i plus one for g".into()));
    }
    let n = g.len();
    let t = WittVec::teichmuller(&xbar0.pow(k as u64)?, n);
    let mut s = witness[f.len()].mul(g)?;
    for (a, fi) in witness.iter().zip(f) {
        s = s.add(&a.mul(fi)?)?;
    }
    if s != t {
        return Err(Error::BadWitness("[xbar_0]^k differs from the witness combination".into()));
    }
    let f1 = f[0].add(&t)?;
    let recovery_identity = f1.sub(&t)? == f[0];
    let mut numerators = vec![f1];
    numerators.extend(f[1..].iter().cloned());
    numerators.push(t.clone());
    let mod_p_generators = numerators.iter().chain(std::iter::once(g)).map(|w| w.coords()[0].clone()).collect();
    Ok(Perturbation {
        numerators,
        denominator: g.clone(),
        degenerate: t.is_zero(),
        witness_identity: true,
        recovery_identity,
        mod_p_generators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpring::PrecisionBudget;

    fn ring(d: i64, depth: u32, n: u32) -> Arc<RingPresentation> {
        RingPresentation::free(2, &["x"], PrecisionBudget::simple(n, d, depth))
    }

    fn laurent(d: i64, depth: u32, n: u32, l: i64) -> Arc<RingPresentation> {
        RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(n, d, depth).with_l(l)).unwrap()
    }

    fn px(r: &Arc<RingPresentation>, s: &str) -> PerfPoly {
        PerfPoly::parse(r, s).unwrap()
    }

    #[test]
    fn distinguished_examples() {
        let r = ring(4, 2, 2);
        let x = WittVec::teichmuller(&px(&r, "x"), 2);
        let two = WittVec::from_int(&r, 2, 2);
        let z = x.sub(&two).unwrap();
        let dz = is_distinguished(&z).unwrap();
        assert!(dz.certified);
        assert!(dz.certificate.as_ref().unwrap().verify(&PerfPoly::one(dz.d0.ring()), &[dz.d0.clone(), dz.delta0.clone()]).unwrap());
        assert!(is_distinguished(&two).unwrap().certified);
        assert!(!is_distinguished(&x).unwrap().certified);
    }

    #[test]
    fn primitive_examples() {
        let r = ring(4, 2, 2);
        let x = WittVec::teichmuller(&px(&r, "x"), 2);
        let two = WittVec::from_int(&r, 2, 2);
        let z = x.sub(&two).unwrap();
        assert_eq!(z.coords(), &[px(&r, "x"), PerfPoly::one(&r)]);
        let pz = is_primitive(&z).unwrap();
        assert!(pz.certified && pz.verify(&z).unwrap());
        assert!(!is_primitive(&x.scale_int(2).unwrap()).unwrap().certified);
        let one_minus_p = WittVec::one(&r, 2).sub(&two).unwrap();
        assert!(!is_primitive(&one_minus_p).unwrap().certified);
    }

    #[test]
    fn laurent_unit_combination() {
        let r = laurent(4, 1, 2, 4);
        let comb = unit_witt_combination(&[px(&r, "x^-1")], &[px(&r, "x")], 2).unwrap();
        let cs = comb.coefficients(&r).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].0, vec![1]);
        assert_eq!(cs[0].1, WittVec::teichmuller(&px(&r, "x^-1"), 2));
        assert!(comb.verify_in(&r).unwrap());
    }

    #[test]
    fn presented_unit_combination() {
        let vars = [("x", false), ("y", false), ("u", false), ("v", false)];
        let pres = RingPresentation::new(2, &vars, &["u*x + v*y - 1"], PrecisionBudget::simple(2, 4, 1)).unwrap();
        let ab: Vec<PerfPoly> = ["u", "v"].iter().map(|s| px(&pres, s)).collect();
        let xb: Vec<PerfPoly> = ["x", "y"].iter().map(|s| px(&pres, s)).collect();
        let comb = unit_witt_combination(&ab, &xb, 2).unwrap();
        let keys: Vec<Vec<u32>> = comb.groups.keys().cloned().collect();
        assert_eq!(keys, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        let free = RingPresentation::free(2, &["x", "y", "u", "v"], PrecisionBudget::simple(2, 12, 1));
        let rel = px(&free, "u*x + v*y - 1");
        let chk = comb.verify_modulo(&free, &[rel]).unwrap();
        assert!(chk.holds);
        assert_eq!(chk.max_degree, Rational64::from_integer(4));
        assert!(matches!(unit_witt_combination(&[px(&pres, "u"), px(&pres, "u")], &xb, 2), Err(Error::BadWitness(_))));
    }

    #[test]
    fn decomposition_examples() {
        let r = laurent(6, 1, 2, 4);
        let b = [WittVec::teichmuller(&px(&r, "x^-1"), 2)];
        let xb = [px(&r, "x")];
        let f = WittVec::teichmuller(&px(&r, "x^2"), 2);
        let a = small_norm_decompose(&f, &b, &xb).unwrap();
        assert_eq!(a[0], WittVec::teichmuller(&px(&r, "x"), 2));
        let f2 = WittVec::teichmuller(&px(&r, "x"), 2).scale_int(2).unwrap();
        assert_eq!(small_norm_decompose(&f2, &b, &xb).unwrap()[0], WittVec::from_int(&r, 2, 2));
        let f3 = WittVec::teichmuller(&px(&r, "x^(1/2)"), 2);
        assert!(matches!(small_norm_decompose(&f3, &b, &xb), Err(Error::NormTooLarge(_))));
        assert_eq!(decomposition_threshold(&b), NormExponent::int(1));
    }

    #[test]
    fn perturbation_examples() {
        let r = ring(4, 1, 2);
        let x = px(&r, "x");
        let tx = WittVec::teichmuller(&x, 2);
        let one = WittVec::one(&r, 2);
        let zero = WittVec::zero(&r, 2);
        let out = perturb_parameters(std::slice::from_ref(&tx), &one, &x, 1, &[zero.clone(), tx.clone()]).unwrap();
        assert_eq!(out.numerators[0].coords(), &[PerfPoly::zero(&r), px(&r, "x^2")]);
        assert_eq!(out.numerators[1], tx);
        assert!(out.recovery_identity && !out.degenerate);
        assert!(matches!(
            perturb_parameters(std::slice::from_ref(&tx), &one, &x, 1, &[zero.clone(), zero.clone()]),
            Err(Error::BadWitness(_))
        ));
        let deg = perturb_parameters(std::slice::from_ref(&tx), &one, &x, 9, &[zero.clone(), zero]).unwrap();
        assert!(deg.degenerate);
    }
}
