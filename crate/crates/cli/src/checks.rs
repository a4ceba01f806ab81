//! The check catalog. Each check runs one instance-level verification and
//! reports exact data; nothing here claims more than the caps allow.

use crate::config::{Caps, Params, RingSpec};
use ainf_core::cech::{cech_complex, check_exactness, check_strict_multiplication, linearize, LaurentPoly};
use ainf_core::glue::{factor_near_identity, glue_modules, verify_base_change, LaurentMatrix, PatchingDatum};
use ainf_core::lens::{
    brute_force_quotient_norm, check_frobenius_iso, check_lens_criteria, lens_canonical_iso_check, lens_norm,
    quotient_by_primitive, tilt_report, LensRing,
};
use ainf_core::witt::{
    decomposition_threshold, delta_ring, is_distinguished, is_primitive, perturb_parameters, small_norm_decompose,
    unit_witt_combination,
};
use ainf_core::{Error, NormExponent, PerfMonomial, PerfPoly, PrecisionBudget, RingPresentation, StructurePolyCache, TeichPoly, TeichRing, WittVec};
use anyhow::{bail, Result};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Uncertified,
    Error,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub details: Value,
    /// Violated identities, one line each.
    pub failures: Vec<String>,
}

impl Outcome {
    fn from_failures(details: Value, failures: Vec<String>) -> Self {
        let status = if failures.is_empty() { Status::Pass } else { Status::Fail };
        Outcome { status, details, failures }
    }
}

pub struct Ctx<'a> {
    pub params: &'a Params,
    pub seed: u64,
    pub caps: &'a Caps,
}

impl Ctx<'_> {
    fn samples(&self, default: u64) -> Result<usize> {
        let s = self.params.u64_or("samples", default)? as usize;
        Ok(self.caps.max_samples.map_or(s, |m| s.min(m)))
    }
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
    fn ring_or(&self, default: RingSpec) -> RingSpec {
        self.params.ring.clone().unwrap_or(default)
    }
}

pub struct CheckSpec {
    pub name: &'static str,
    pub anchor: &'static str,
    pub params: &'static str,
    pub summary: &'static str,
    pub run: fn(&Ctx) -> Result<Outcome>,
}

/// Sorted by name.
pub static CATALOG: &[CheckSpec] = &[
    CheckSpec {
        name: "cech-exactness",
        anchor: "(††) is exact",
        params: "ring (free, one variable), f, g in {1, 1-f}, dt, control",
        summary: "Rank-checks 0 -> C -> A1 + A2 -> A12 -> 0 on window linearizations, builds an explicit inverse on H^0 and runs a corrupted-map control",
        run: cech_exactness,
    },
    CheckSpec {
        name: "delta-axioms",
        anchor: "δ(1) = 0",
        params: "ring, samples",
        summary: "delta(1) = 0, the product rule and the sum rule with the minus sign, at length n-1",
        run: delta_axioms,
    },
    CheckSpec {
        name: "factorization",
        anchor: "U = U_1 U_2",
        params: "ring, samples, alpha_min",
        summary: "Splits random 2x2 matrices 1 + E over the overlap into pieces over each side; alpha(E) = 0 must be rejected",
        run: factorization,
    },
    CheckSpec {
        name: "frobenius-iso",
        anchor: "φ: A/J ≅ A/φ(J)",
        params: "ring (n, d, depth), localize, dt",
        summary: "Frobenius between the quotients by z = [t] - p at depths N and N-1, bijective by rank",
        run: frobenius_iso,
    },
    CheckSpec {
        name: "frobenius-lift",
        anchor: "φ(x) = x^p + pδ(x)",
        params: "ring, samples",
        summary: "The Witt Frobenius agrees with x^p + p delta(x) at length n-1",
        run: frobenius_lift,
    },
    CheckSpec {
        name: "frobenius-verschiebung",
        anchor: "p·x = V(F(x))",
        params: "ring, samples",
        summary: "p x = V F x = F V x on random samples",
        run: frobenius_verschiebung,
    },
    CheckSpec {
        name: "ghost-identity",
        anchor: "w_k(S(X, Y)) = w_k(X) + w_k(Y)",
        params: "p, n, corrupt (optional index for the negative fixture)",
        summary: "Structure polynomials of addition, multiplication and negation satisfy the ghost identities exactly over Z",
        run: ghost_identity,
    },
    CheckSpec {
        name: "gluing",
        anchor: "M ⊗_C A_i ≅ M_i",
        params: "ring, rank in {1, 2}, dt",
        summary: "Glues free patching data along 1 + E, checks both base changes by rank and the round trip; a dropped generator must be caught",
        run: gluing,
    },
    CheckSpec {
        name: "lens-canonical-iso",
        anchor: "W(S♭)/ker θ ≅ S",
        params: "ring (n, d, depth), f, g, dt, samples",
        summary: "The canonical map between the two sides is a linear bijection and respects the norm on samples",
        run: lens_canonical_iso,
    },
    CheckSpec {
        name: "lens-criteria",
        anchor: "S/p semiperfect, p = uπ^p",
        params: "ring (n, d, depth), instance in {adjoined, witt-only}, expect in {lens, not-lens}, samples",
        summary: "Semiperfectness, p-normality (sampled) and the uniformizer criterion",
        run: lens_criteria,
    },
    CheckSpec {
        name: "lens-power-multiplicativity",
        anchor: "|x^p| = |x|^p",
        params: "ring, samples",
        summary: "alpha(x^p) = p alpha(x) on lens samples inside the visible range",
        run: lens_power_mult,
    },
    CheckSpec {
        name: "lens-quotient-norm",
        anchor: "|x| = inf_j |x + j|",
        params: "ring, instance in {adjoined, general}, samples",
        summary: "Digit norm against a brute-force search over representatives, up to dimension 512",
        run: lens_quotient_norm,
    },
    CheckSpec {
        name: "parameter-perturbation",
        anchor: "(f_1 + [x̄_0]^k, ..., [x̄_0]^k; g)",
        params: "none",
        summary: "Perturbed rational-localization parameters with the witness and recovery identities",
        run: parameter_perturbation,
    },
    CheckSpec {
        name: "power-multiplicativity",
        anchor: "|x^p| = |x|^p",
        params: "ring, samples",
        summary: "Weighted alpha(x^p) = p alpha(x) on Witt samples below the visibility bound",
        run: power_mult,
    },
    CheckSpec {
        name: "primitive-distinguished",
        anchor: "(p, d, δ(d)) = (1)",
        params: "ring",
        summary: "[x] - p primitive and distinguished, p distinguished, [x] and 1 - p rejected, certificates re-verified",
        run: primitive_distinguished,
    },
    CheckSpec {
        name: "small-norm-decomposition",
        anchor: "f = Σ (f b_i)[x̄_i]",
        params: "ring (with x inverted), samples",
        summary: "Decomposes samples above the threshold and reconstructs them exactly",
        run: small_norm,
    },
    CheckSpec {
        name: "spectral-estimate",
        anchor: "|x|_sp = lim |x^{p^k}|^{1/p^k}",
        params: "ring, element, k",
        summary: "Estimates alpha(x^{p^k}) / p^k; the sequence must not decrease",
        run: spectral_estimate,
    },
    CheckSpec {
        name: "strict-multiplication",
        anchor: "|xy| ≥ c|y|",
        params: "ring, coeffs, dt",
        summary: "Sweeps the finite basis of A<T> and reports the worst norm drop of multiplication",
        run: strict_multiplication,
    },
    CheckSpec {
        name: "teichmuller-multiplicative",
        anchor: "[a][b] = [ab]",
        params: "ring, samples",
        summary: "Teichmuller lifts multiply",
        run: teichmuller_mult,
    },
    CheckSpec {
        name: "tilt",
        anchor: "(A/f)♭ ≅ A^∧_f",
        params: "ring (n = 1), f, samples",
        summary: "Tilt of S/f for S of characteristic p: f a nonzerodivisor, Frobenius comparison bijective",
        run: tilt,
    },
    CheckSpec {
        name: "unit-combination",
        anchor: "Σ c_j [x̄]^j = 1",
        params: "instance in {laurent, presented}",
        summary: "Writes 1 as a combination of Teichmuller monomials with a nonzero index and re-checks it",
        run: unit_combination,
    },
    CheckSpec {
        name: "witt-ring-axioms",
        anchor: "(xy)z = x(yz), x(y + z) = xy + xz",
        params: "ring, samples",
        summary: "Associativity, commutativity, distributivity and units on random triples",
        run: witt_ring_axioms,
    },
];

pub fn find(name: &str) -> Option<&'static CheckSpec> {
    CATALOG.iter().find(|c| c.name == name)
}

fn free_ring(p: u32, n: u32, d: i64, depth: u32) -> RingSpec {
    RingSpec {
        p,
        vars: vec!["x".into()],
        inverted: vec![],
        relations: vec![],
        n,
        d: json!(d),
        depth,
        l: None,
    }
}

fn random_poly(ring: &Arc<RingPresentation>, rng: &mut ChaCha8Rng, terms: usize, cap: Rational64) -> PerfPoly {
    let monos = ring.ambient_monomials(ring.budget().depth, 4096).unwrap_or_default();
    let scale = ring.scale();
    let cands: Vec<&PerfMonomial> = monos.iter().filter(|m| Rational64::new(m.total(), scale) < cap).collect();
    let mut acc = PerfPoly::zero(ring);
    if cands.is_empty() {
        return acc;
    }
    for _ in 0..rng.gen_range(0..=terms) {
        let m = cands[rng.gen_range(0..cands.len())].clone();
        let c = rng.gen_range(1..ring.p());
        acc = acc.add(&PerfPoly::from_monomial(ring, m, c)).expect("same ring");
    }
    acc
}

fn random_witt(ring: &Arc<RingPresentation>, rng: &mut ChaCha8Rng, cap: Rational64) -> Result<WittVec> {
    let n = ring.budget().n as usize;
    let digits: Vec<PerfPoly> = (0..n).map(|_| random_poly(ring, rng, 3, cap)).collect();
    Ok(WittVec::from_teichmuller_digits(ring, &digits)?)
}

fn witt_ring(ctx: &Ctx) -> Result<Arc<RingPresentation>> {
    ctx.ring_or(free_ring(2, 3, 4, 3)).presentation()
}

fn first_failure(failures: &mut Vec<String>, label: &str, i: usize, ok: bool) {
    if !ok && failures.iter().filter(|f| f.starts_with(label)).count() < 3 {
        failures.push(format!("{label} fails on sample {i}"));
    }
}

fn ghost_identity(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params.u32_or("p", 2)?;
    let n = ctx.params.u32_or("n", 3)? as usize;
    let mut cache = StructurePolyCache::build(p, n)?;
    if let Some(k) = ctx.params.map.get("corrupt").and_then(Value::as_u64) {
        cache.corrupt_addition(k as usize);
    }
    let violations = cache.check_ghost_identities();
    let failures: Vec<String> = violations.iter().map(|v| format!("{} k={}: {}", v.op, v.k, v.identity)).collect();
    Ok(Outcome::from_failures(json!({"p": p, "n": n, "terms": cache.total_terms()}), failures))
}

fn witt_ring_axioms(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let n = r.budget().n as usize;
    let d = r.budget().d;
    let mut rng = ctx.rng();
    let samples = ctx.samples(200)?;
    let mut failures = Vec::new();
    let zero = WittVec::zero(&r, n);
    let one = WittVec::one(&r, n);
    for i in 0..samples {
        let a = random_witt(&r, &mut rng, d)?;
        let b = random_witt(&r, &mut rng, d)?;
        let c = random_witt(&r, &mut rng, d)?;
        first_failure(&mut failures, "(a+b)+c = a+(b+c)", i, a.add(&b)?.add(&c)? == a.add(&b.add(&c)?)?);
        first_failure(&mut failures, "(ab)c = a(bc)", i, a.mul(&b)?.mul(&c)? == a.mul(&b.mul(&c)?)?);
        first_failure(&mut failures, "a(b+c) = ab+ac", i, a.mul(&b.add(&c)?)? == a.mul(&b)?.add(&a.mul(&c)?)?);
        first_failure(&mut failures, "ab = ba", i, a.mul(&b)? == b.mul(&a)?);
        first_failure(&mut failures, "a+b = b+a", i, a.add(&b)? == b.add(&a)?);
        first_failure(&mut failures, "a+0 = a, a*1 = a", i, a.add(&zero)? == a && a.mul(&one)? == a);
        first_failure(&mut failures, "a+(-a) = 0", i, a.add(&a.neg()?)?.is_zero());
    }
    Ok(Outcome::from_failures(json!({"samples": samples, "length": n, "d": rat(d)}), failures))
}

fn teichmuller_mult(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let n = r.budget().n as usize;
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    for i in 0..samples {
        let a = random_poly(&r, &mut rng, 3, r.budget().d);
        let b = random_poly(&r, &mut rng, 3, r.budget().d);
        let lhs = WittVec::teichmuller(&a, n).mul(&WittVec::teichmuller(&b, n))?;
        first_failure(&mut failures, "[a][b] = [ab]", i, lhs == WittVec::teichmuller(&a.mul(&b)?, n));
    }
    Ok(Outcome::from_failures(json!({"samples": samples}), failures))
}

fn frobenius_verschiebung(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let p = r.p() as i64;
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    for i in 0..samples {
        let x = random_witt(&r, &mut rng, r.budget().d)?;
        let px = x.scale_int(p)?;
        first_failure(&mut failures, "p x = V(F(x))", i, px == x.frobenius()?.verschiebung());
        first_failure(&mut failures, "p x = F(V(x))", i, px == x.verschiebung().frobenius()?);
    }
    Ok(Outcome::from_failures(json!({"samples": samples}), failures))
}

/// `sum_{0<i<p} binom(p, i)/p x^i y^(p-i)`.
fn binomial_term(x: &WittVec, y: &WittVec) -> Result<WittVec> {
    let p = x.p() as u64;
    let mut acc = WittVec::zero(x.ring(), x.len());
    let mut binom: u64 = 1;
    for i in 1..p {
        binom = binom * (p - i + 1) / i;
        acc = acc.add(&x.pow(i)?.mul(&y.pow(p - i)?)?.scale_int((binom / p) as i64)?)?;
    }
    Ok(acc)
}

fn delta_axioms(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let n = r.budget().n as usize;
    let p = r.p() as u64;
    let dr = delta_ring(&r)?;
    let down = |w: &WittVec| w.change_ring(&dr, n - 1);
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    if !WittVec::one(&r, n).delta()?.is_zero() {
        failures.push("δ(1) = 0 fails".into());
    }
    for i in 0..samples {
        let x = random_witt(&r, &mut rng, r.budget().d)?;
        let y = random_witt(&r, &mut rng, r.budget().d)?;
        let (dx, dy) = (x.delta()?, y.delta()?);
        let (xs, ys) = (down(&x)?, down(&y)?);
        let prod = xs.pow(p)?.mul(&dy)?.add(&ys.pow(p)?.mul(&dx)?)?.add(&dx.mul(&dy)?.scale_int(p as i64)?)?;
        first_failure(&mut failures, "δ(xy) = x^p δ(y) + y^p δ(x) + p δ(x) δ(y)", i, x.mul(&y)?.delta()? == prod);
        let sum = dx.add(&dy)?.sub(&binomial_term(&xs, &ys)?)?;
        first_failure(&mut failures, "δ(x+y) = δ(x) + δ(y) - Σ binom(p,i)/p x^i y^(p-i)", i, x.add(&y)?.delta()? == sum);
    }
    Ok(Outcome::from_failures(json!({"samples": samples, "effective_length": n - 1, "delta_d": rat(dr.budget().d)}), failures))
}

fn frobenius_lift(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let n = r.budget().n as usize;
    let p = r.p() as i64;
    let dr = delta_ring(&r)?;
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    for i in 0..samples {
        let x = random_witt(&r, &mut rng, r.budget().d)?;
        let lhs = x.frobenius()?.change_ring(&dr, n - 1)?;
        let rhs = x.pow(p as u64)?.change_ring(&dr, n - 1)?.add(&x.delta()?.scale_int(p)?)?;
        first_failure(&mut failures, "φ(x) = x^p + p δ(x)", i, lhs == rhs);
    }
    Ok(Outcome::from_failures(json!({"samples": samples, "effective_length": n - 1}), failures))
}

fn rat(a: Rational64) -> String {
    ainf_core::norm::rat_string(a)
}

fn power_mult(ctx: &Ctx) -> Result<Outcome> {
    let r = witt_ring(ctx)?;
    let n = r.budget().n as usize;
    let p = r.p() as i64;
    let vis = WittVec::visibility_bound(&r, n);
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    let (mut tested, mut skipped) = (0usize, 0usize);
    while tested < samples && skipped < 50 * samples.max(1) {
        let x = random_witt(&r, &mut rng, vis / p)?;
        let a = x.weighted_gauss_norm();
        if !a.value().is_some_and(|v| v * p < vis) {
            skipped += 1;
            continue;
        }
        let ok = x.pow(p as u64)?.weighted_gauss_norm() == a.scale(Rational64::from_integer(p));
        first_failure(&mut failures, "alpha(x^p) = p alpha(x)", tested, ok);
        tested += 1;
    }
    let mut out = Outcome::from_failures(json!({"tested": tested, "skipped": skipped, "visibility": rat(vis)}), failures);
    if out.status == Status::Pass && tested < samples {
        out.status = Status::Uncertified;
    }
    Ok(out)
}

fn lens_from(ctx: &Ctx, default: RingSpec) -> Result<Arc<LensRing>> {
    let s = ctx.ring_or(default);
    let names: Vec<&str> = s.vars.iter().map(String::as_str).collect();
    Ok(LensRing::adjoined_roots(s.p, s.n, &names, s.d()?, s.depth)?)
}

fn lens_power_mult(ctx: &Ctx) -> Result<Outcome> {
    let mut default = free_ring(2, 3, 3, 2);
    default.vars = vec!["x".into(), "y".into()];
    let s = lens_from(ctx, default)?;
    let p = s.p() as i64;
    let vis = Rational64::from_integer(s.n() as i64).min(s.d());
    let mut rng = ctx.rng();
    let samples = ctx.samples(100)?;
    let mut failures = Vec::new();
    let (mut tested, mut skipped) = (0usize, 0usize);
    while tested < samples && skipped < 50 * samples.max(1) {
        let x = s.random_element(&mut rng, vis / p, 4);
        let a = lens_norm(&x);
        if !a.value().is_some_and(|v| v * p < vis) {
            skipped += 1;
            continue;
        }
        let ok = lens_norm(&x.pow(p as u64)?) == a.scale(Rational64::from_integer(p));
        first_failure(&mut failures, "alpha(x^p) = p alpha(x)", tested, ok);
        tested += 1;
    }
    let mut out = Outcome::from_failures(json!({"tested": tested, "skipped": skipped, "visibility": rat(vis)}), failures);
    if out.status == Status::Pass && tested < samples {
        out.status = Status::Uncertified;
    }
    Ok(out)
}

fn lens_quotient_norm(ctx: &Ctx) -> Result<Outcome> {
    let instance = ctx.params.str_or("instance", "adjoined")?;
    let s = match instance {
        "adjoined" => lens_from(ctx, free_ring(2, 2, 2, 1))?,
        "general" => {
            let r = ctx.ring_or(free_ring(2, 2, 2, 2)).presentation()?;
            let n = r.budget().n as usize;
            let x = WittVec::teichmuller(&PerfPoly::var(&r, "x")?, n);
            let x2 = WittVec::teichmuller(&PerfPoly::parse(&r, "x^2")?, n);
            quotient_by_primitive(&x.sub(&WittVec::from_int(&r, n, r.p() as i64))?.add(&x2)?)?
        }
        other => bail!("unknown instance {other:?}"),
    };
    let lin = s.source_linearization()?;
    let dim = lin.rank() * s.n() as usize;
    if dim > 512 {
        return Ok(Outcome { status: Status::Uncertified, details: json!({"dimension": dim}), failures: vec![] });
    }
    let deg: Vec<Rational64> = lin.basis().iter().map(|m| lin.ring().monomial_degree(m)).collect();
    let mut rng = ctx.rng();
    let samples = ctx.samples(40)?;
    let mut failures = Vec::new();
    for i in 0..samples {
        let a = lin.random_element(&mut rng);
        let q = brute_force_quotient_norm(lin.relation_echelon(), &deg, &lin.vector(&a)?);
        first_failure(&mut failures, "digit norm = brute-force quotient norm", i, q == lens_norm(&s.theta(&a)?));
    }
    Ok(Outcome::from_failures(json!({"instance": instance, "dimension": dim, "samples": samples}), failures))
}

fn lens_criteria(ctx: &Ctx) -> Result<Outcome> {
    let s = ctx.ring_or(free_ring(2, 2, 2, 2));
    let names: Vec<&str> = s.vars.iter().map(String::as_str).collect();
    let instance = ctx.params.str_or("instance", "adjoined")?;
    let lens = match instance {
        "adjoined" => LensRing::adjoined_roots(s.p, s.n, &names, s.d()?, s.depth)?,
        "witt-only" => LensRing::witt_only(s.p, s.n, &names, s.d()?, s.depth)?,
        other => bail!("unknown instance {other:?}"),
    };
    let expect = ctx.params.str_or("expect", "lens")?;
    let rep = check_lens_criteria(&lens, ctx.samples(100)?, ctx.seed)?;
    let got = if rep.all_pass() { "lens" } else { "not-lens" };
    let failures = if got == expect { vec![] } else { vec![format!("expected {expect}, criteria give {got}")] };
    Ok(Outcome::from_failures(serde_json::to_value(&rep)?, failures))
}

fn localization(ctx: &Ctx, src: &Arc<TeichRing>) -> Result<Option<(TeichPoly, TeichPoly)>> {
    match ctx.params.opt_str("f")? {
        None => Ok(None),
        Some(f) => {
            let g = ctx.params.str_or("g", "1")?;
            Ok(Some((TeichPoly::parse(src, f)?, TeichPoly::parse(src, g)?)))
        }
    }
}

fn lens_canonical_iso(ctx: &Ctx) -> Result<Outcome> {
    let s = lens_from(ctx, free_ring(2, 2, 2, 1))?;
    let loc = localization(ctx, s.source())?;
    let dt = ctx.params.u32_or("dt", 1)?;
    let rep = lens_canonical_iso_check(&s, loc.as_ref().map(|(f, g)| (f, g)), dt, ctx.samples(50)?, ctx.seed)?;
    let mut failures = Vec::new();
    if !rep.bijective {
        failures.push("canonical map is not bijective".into());
    }
    if rep.norm_mismatches > 0 {
        failures.push(format!("{} norm mismatches", rep.norm_mismatches));
    }
    let mut out = Outcome::from_failures(serde_json::to_value(&rep)?, failures);
    if out.status == Status::Pass && !rep.certified {
        out.status = Status::Uncertified;
    }
    Ok(out)
}

fn frobenius_iso(ctx: &Ctx) -> Result<Outcome> {
    let s = ctx.ring_or(free_ring(2, 2, 2, 2));
    let src = TeichRing::new(s.p, s.n, &["x", "t"], s.d()?, s.depth);
    let z = TeichPoly::parse(&src, &format!("t - {}", s.p))?;
    let loc = localization(ctx, &src)?;
    let rep = check_frobenius_iso(&z, 1, loc.as_ref().map(|(f, g)| (f, g)), ctx.params.u32_or("dt", 1)?)?;
    let failures = if rep.bijective { vec![] } else { vec![format!("lengths {:?} do not match", rep.lengths)] };
    Ok(Outcome::from_failures(serde_json::to_value(&rep)?, failures))
}

fn primitive_distinguished(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 2, 4, 2)).presentation()?;
    let n = r.budget().n as usize;
    let x = WittVec::teichmuller(&PerfPoly::var(&r, "x")?, n);
    let p = WittVec::from_int(&r, n, r.p() as i64);
    let z = x.sub(&p)?;
    let one_minus_p = WittVec::one(&r, n).sub(&p)?;
    let mut failures = Vec::new();
    let zp = is_primitive(&z)?;
    if !(zp.certified && zp.verify(&z)?) {
        failures.push("[x] - p not certified primitive".into());
    }
    let mut certs = Vec::new();
    for (label, w, want) in [("[x] - p", &z, true), ("p", &p, true), ("[x]", &x, false)] {
        let d = is_distinguished(w)?;
        let reverified = match &d.certificate {
            Some(c) => c.verify(&PerfPoly::one(d.d0.ring()), &[d.d0.clone(), d.delta0.clone()])?,
            None => false,
        };
        if d.certified != want || (want && !reverified) {
            failures.push(format!("{label}: distinguished = {}, expected {want}", d.certified));
        }
        certs.push(json!({"element": label, "distinguished": d.certified, "certificate_reverified": reverified}));
    }
    if is_primitive(&x)?.certified {
        failures.push("[x] accepted as primitive".into());
    }
    if is_primitive(&one_minus_p)?.certified {
        failures.push("1 - p accepted as primitive".into());
    }
    Ok(Outcome::from_failures(json!({"primitive_z": zp.certified, "distinguished": certs}), failures))
}

fn unit_combination(ctx: &Ctx) -> Result<Outcome> {
    let instance = ctx.params.str_or("instance", "laurent")?;
    match instance {
        "laurent" => {
            let b = PrecisionBudget::simple(2, 4, 1).with_l(4);
            let r = RingPresentation::new(2, &[("x", true)], &[], b)?;
            let comb = unit_witt_combination(&[PerfPoly::parse(&r, "x^-1")?], &[PerfPoly::var(&r, "x")?], 2)?;
            let ok = comb.verify_in(&r)?;
            let failures = if ok { vec![] } else { vec!["Σ c_j [x̄]^j differs from 1".into()] };
            Ok(Outcome::from_failures(json!({"instance": instance, "groups": comb.groups.len(), "d": "4"}), failures))
        }
        "presented" => {
            let vars = [("x", false), ("y", false), ("u", false), ("v", false)];
            let pres = RingPresentation::new(2, &vars, &["u*x + v*y - 1"], PrecisionBudget::simple(2, 4, 1))?;
            let ab = [PerfPoly::var(&pres, "u")?, PerfPoly::var(&pres, "v")?];
            let xb = [PerfPoly::var(&pres, "x")?, PerfPoly::var(&pres, "y")?];
            let comb = unit_witt_combination(&ab, &xb, 2)?;
            // the identity is checked over the free ring modulo the relation,
            // with room above the degree the combination needs
            let free = RingPresentation::free(2, &["x", "y", "u", "v"], PrecisionBudget::simple(2, 12, 1));
            let chk = comb.verify_modulo(&free, &[PerfPoly::parse(&free, "u*x + v*y - 1")?])?;
            let failures = if chk.holds { vec![] } else { vec!["Σ c_j [x̄]^j - 1 not in the relation ideal".into()] };
            Ok(Outcome::from_failures(
                json!({"instance": instance, "groups": comb.groups.len(), "max_degree": rat(chk.max_degree), "verified_at_d": "12"}),
                failures,
            ))
        }
        other => bail!("unknown instance {other:?}"),
    }
}

fn small_norm(ctx: &Ctx) -> Result<Outcome> {
    let mut default = free_ring(2, 2, 6, 1);
    default.inverted = vec!["x".into()];
    default.l = Some(json!(4));
    let r = ctx.ring_or(default).presentation()?;
    let n = r.budget().n as usize;
    let b = [WittVec::teichmuller(&PerfPoly::parse(&r, "x^-1")?, n)];
    let xb = [PerfPoly::var(&r, "x")?];
    let thr = decomposition_threshold(&b).value().unwrap_or_default();
    let mut rng = ctx.rng();
    let samples = ctx.samples(50)?;
    let step = r.scale();
    let top = (r.budget().d * step).to_integer();
    let lo = (thr * step).ceil().to_integer();
    let mut failures = Vec::new();
    for i in 0..samples {
        let mut digits = Vec::new();
        for _ in 0..n {
            let mut d = PerfPoly::zero(&r);
            for _ in 0..rng.gen_range(0..3) {
                let e = rng.gen_range(lo..top.max(lo + 1));
                d = d.add(&PerfPoly::from_monomial(&r, PerfMonomial(vec![e].into_boxed_slice()), 1))?;
            }
            digits.push(d);
        }
        let f = WittVec::from_teichmuller_digits(&r, &digits)?;
        match small_norm_decompose(&f, &b, &xb) {
            Ok(_) => {}
            Err(e) => {
                if failures.len() < 3 {
                    failures.push(format!("sample {i}: {e}"));
                }
            }
        }
    }
    Ok(Outcome::from_failures(json!({"samples": samples, "threshold": rat(thr)}), failures))
}

fn parameter_perturbation(_ctx: &Ctx) -> Result<Outcome> {
    let r = RingPresentation::free(2, &["x"], PrecisionBudget::simple(2, 4, 1));
    let x = PerfPoly::var(&r, "x")?;
    let tx = WittVec::teichmuller(&x, 2);
    let zero = WittVec::zero(&r, 2);
    let out = perturb_parameters(std::slice::from_ref(&tx), &WittVec::one(&r, 2), &x, 1, &[zero, tx.clone()])?;
    let mut failures = Vec::new();
    if !out.witness_identity || !out.recovery_identity {
        failures.push("witness or recovery identity fails".into());
    }
    if out.degenerate {
        failures.push("[x̄_0]^k vanished at truncation".into());
    }
    Ok(Outcome::from_failures(json!({"generators": out.numerators.len(), "degenerate": out.degenerate}), failures))
}

fn tilt(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 1, 2, 2)).presentation()?;
    let f = PerfPoly::parse(&r, ctx.params.str_or("f", "x")?)?;
    let rep = tilt_report(&r, &f, ctx.samples(20)?, ctx.seed)?;
    let mut failures = Vec::new();
    if !rep.nonzerodivisor {
        failures.push("f is a zero divisor".into());
    }
    if !rep.bijective {
        failures.push("Frobenius comparison is not bijective".into());
    }
    if rep.digit_mismatches > 0 {
        failures.push(format!("{} digit mismatches", rep.digit_mismatches));
    }
    Ok(Outcome::from_failures(serde_json::to_value(&rep)?, failures))
}

fn cech_exactness(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 2, 4, 2)).teich()?;
    let f = TeichPoly::parse(&r, ctx.params.str_or("f", "x")?)?;
    let g = TeichPoly::parse(&r, ctx.params.str_or("g", "1")?)?;
    let c = linearize(&r, ctx.caps.dim_limit)?;
    let cx = cech_complex(&c, &f, &g, ctx.params.u32_or("dt", 1)?)?;
    let rep = check_exactness(&cx);
    let mut failures: Vec<String> =
        rep.nodes.iter().filter(|n| n.verdict != "pass").map(|n| format!("node {} fails", n.node)).collect();
    if !rep.h0_inverse {
        failures.push("no inverse H^0 -> C".into());
    }
    let mut details = serde_json::to_value(&rep)?;
    if ctx.params.bool_or("control", true)? {
        let m1 = !check_exactness(&cx.corrupt_map1()).exact;
        let m2 = !check_exactness(&cx.corrupt_map2()).exact;
        if !m1 {
            failures.push("corrupted first map not detected".into());
        }
        details["control"] = json!({"corrupt_map1_detected": m1, "corrupt_map2_detected": m2});
    }
    Ok(Outcome::from_failures(details, failures))
}

fn strict_multiplication(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 2, 2, 1)).presentation()?;
    let n = r.budget().n as usize;
    let coeffs: Vec<String> = match ctx.params.map.get("coeffs") {
        Some(Value::Array(a)) => a.iter().map(|v| v.as_str().map(String::from)).collect::<Option<_>>().unwrap_or_default(),
        _ => vec!["1".into()],
    };
    let ws = coeffs
        .iter()
        .map(|s| Ok(WittVec::teichmuller(&PerfPoly::parse(&r, s)?, n)))
        .collect::<Result<Vec<_>>>()?;
    let rep = check_strict_multiplication(&ws, ctx.params.u32_or("dt", 1)?, 4096)?;
    let failures = if rep.swept == 0 { vec!["nothing swept".into()] } else { vec![] };
    Ok(Outcome::from_failures(serde_json::to_value(&rep)?, failures))
}

fn spectral_estimate(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 3, 16, 2)).presentation()?;
    let n = r.budget().n as usize;
    let x = WittVec::teichmuller(&PerfPoly::parse(&r, ctx.params.str_or("element", "x^(1/2) + x")?)?, n);
    let k = ctx.params.u32_or("k", 2)?;
    let mut est = Vec::new();
    for j in 0..=k {
        match x.spectral_seminorm_estimate(j) {
            Ok(a) => est.push(a),
            Err(Error::PrecisionExhausted(_)) => break,
            Err(e) => return Err(e.into()),
        }
    }
    let failures = if est.windows(2).all(|w| w[0] <= w[1]) { vec![] } else { vec!["estimates decrease".into()] };
    Ok(Outcome::from_failures(json!({"estimates": est}), failures))
}

fn random_overlap_matrix(r: &Arc<TeichRing>, rng: &mut ChaCha8Rng, alpha_min: i64) -> Result<LaurentMatrix> {
    let mut entries = Vec::new();
    let q_exp = r.n();
    for _ in 0..4 {
        let mut e = LaurentPoly::zero(r);
        for _ in 0..3 {
            let j = rng.gen_range(-2i64..=2);
            let k = rng.gen_range(0..q_exp);
            let deg = rng.gen_range(0..=4i64);
            let c = TeichPoly::var_pow(r, 0, Rational64::new(deg, 2))?.scale((r.p() as i64).pow(k));
            if c.weighted_norm() >= NormExponent::int(alpha_min) {
                e = e.add(&LaurentPoly::monomial(&c, j))?;
            }
        }
        entries.push(e);
    }
    let e = LaurentMatrix::from_entries(r, 2, 2, entries)?;
    Ok(LaurentMatrix::identity(r, 2).add(&e)?)
}

fn factorization(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 3, 3, 1)).teich()?;
    let alpha_min = ctx.params.u64_or("alpha_min", 2)? as i64;
    let mut rng = ctx.rng();
    let samples = ctx.samples(20)?;
    let mut failures = Vec::new();
    let mut steps = Vec::new();
    for i in 0..samples {
        let u = random_overlap_matrix(&r, &mut rng, alpha_min)?;
        match factor_near_identity(&u) {
            Ok(f) => {
                first_failure(&mut failures, "U = U_1 U_2", i, f.u1.mul(&f.u2)? == u);
                first_failure(
                    &mut failures,
                    "U_1 over T^>=0 and U_2 over T^<=0",
                    i,
                    f.u1.supported_in(0, i64::MAX) && f.u2.supported_in(i64::MIN, 0),
                );
                steps.push(f.residuals.len());
            }
            Err(e) => failures.push(format!("sample {i}: {e}")),
        }
    }
    let t = LaurentPoly::monomial(&TeichPoly::one(&r), 1);
    let bad = LaurentMatrix::from_entries(&r, 1, 1, vec![LaurentPoly::one(&r).add(&t)?])?;
    let rejected = matches!(factor_near_identity(&bad), Err(Error::NonConvergent(_)));
    if !rejected {
        failures.push("alpha(E) = 0 not rejected".into());
    }
    Ok(Outcome::from_failures(json!({"samples": samples, "steps": steps, "alpha_zero_rejected": rejected}), failures))
}

fn gluing(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.ring_or(free_ring(2, 2, 2, 1)).teich()?;
    let rank = ctx.params.u32_or("rank", 2)?;
    let x = TeichPoly::var_pow(&r, 0, Rational64::from_integer(1))?;
    let one = TeichPoly::one(&r);
    let v = match rank {
        1 => LaurentMatrix::identity(&r, 1),
        2 => {
            let xp = LaurentPoly::monomial(&x.scale(r.p() as i64), 1);
            let xm = LaurentPoly::monomial(&x.mul(&x)?, -1);
            let z = LaurentPoly::zero(&r);
            LaurentMatrix::identity(&r, 2).add(&LaurentMatrix::from_entries(&r, 2, 2, vec![xp, xm, z.clone(), z])?)?
        }
        _ => bail!("rank must be 1 or 2"),
    };
    let w = v.inverse_near_identity()?;
    let datum = PatchingDatum { c: r.clone(), f: one.add(&x)?, g: one, v, w, dt: ctx.params.u32_or("dt", 1)?, m_max: 4 };
    let glued = glue_modules(&datum)?;
    let rep = verify_base_change(&glued, &datum)?;
    let dropped = verify_base_change(&glued.drop_generator()?, &datum)?;
    let mut failures = rep.failures.clone();
    if rank > 1 && dropped.ok {
        failures.push("dropped generator not detected".into());
    }
    let mut details = serde_json::to_value(&rep)?;
    details["m"] = json!(glued.m);
    details["dropped_generator_failures"] = json!(dropped.failures);
    Ok(Outcome::from_failures(details, failures))
}
