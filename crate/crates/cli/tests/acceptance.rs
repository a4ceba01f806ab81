//! End-to-end acceptance: thirteen criteria, one line each. Tolerances are
//! exact equality throughout; runtime limits are wall-clock bounds.

use ainf_core::cech::{cech_complex, check_exactness, linearize, LaurentPoly};
use ainf_core::glue::{factor_near_identity, glue_modules, verify_base_change, LaurentMatrix, PatchingDatum};
use ainf_core::lens::{
    brute_force_quotient_norm, check_frobenius_iso, lens_canonical_iso_check, lens_norm, quotient_by_primitive, LensRing,
};
use ainf_core::witt::{
    decomposition_threshold, delta_ring, is_distinguished, is_primitive, small_norm_decompose, unit_witt_combination,
};
use ainf_core::{Error, NormExponent, PerfMonomial, PerfPoly, PrecisionBudget, RingPresentation, StructurePolyCache, TeichPoly, TeichRing, WittVec};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rat(a: i64, b: i64) -> Rational64 {
    Rational64::new(a, b)
}

fn random_poly(ring: &Arc<RingPresentation>, rng: &mut ChaCha8Rng, terms: usize, cap: Rational64) -> PerfPoly {
    let monos = ring.ambient_monomials(ring.budget().depth, 4096).unwrap();
    let scale = ring.scale();
    let cands: Vec<&PerfMonomial> = monos.iter().filter(|m| Rational64::new(m.total(), scale) < cap).collect();
    let mut acc = PerfPoly::zero(ring);
    for _ in 0..rng.gen_range(0..=terms) {
        let m = cands[rng.gen_range(0..cands.len())].clone();
        acc = acc.add(&PerfPoly::from_monomial(ring, m, rng.gen_range(1..ring.p()))).unwrap();
    }
    acc
}

fn random_witt(ring: &Arc<RingPresentation>, rng: &mut ChaCha8Rng, cap: Rational64) -> WittVec {
    let n = ring.budget().n as usize;
    let digits: Vec<PerfPoly> = (0..n).map(|_| random_poly(ring, rng, 3, cap)).collect();
    WittVec::from_teichmuller_digits(ring, &digits).unwrap()
}

fn w3() -> Arc<RingPresentation> {
    RingPresentation::free(2, &["x"], PrecisionBudget::simple(3, 4, 3))
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut terms = 0;
    for p in [2, 3] {
        for n in 1..=4 {
            let cache = StructurePolyCache::build(p, n).map_err(e2s)?;
            let v = cache.check_ghost_identities();
            ensure(v.is_empty(), format!("p={p} n={n}: {} violations", v.len()))?;
            terms += cache.total_terms();
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("p in {{2,3}}, n <= 4, {terms} terms, {t:.2?}"))
}

fn criterion_2() -> Verdict {
    let r = w3();
    let d = r.budget().d;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let (a, b, c) = (random_witt(&r, &mut rng, d), random_witt(&r, &mut rng, d), random_witt(&r, &mut rng, d));
        let ab = a.mul(&b).map_err(e2s)?;
        ensure(ab.mul(&c).unwrap() == a.mul(&b.mul(&c).unwrap()).unwrap(), format!("(ab)c on triple {i}"))?;
        ensure(a.add(&b).unwrap().add(&c).unwrap() == a.add(&b.add(&c).unwrap()).unwrap(), format!("(a+b)+c on triple {i}"))?;
        ensure(
            a.mul(&b.add(&c).unwrap()).unwrap() == ab.add(&a.mul(&c).unwrap()).unwrap(),
            format!("a(b+c) on triple {i}"),
        )?;
    }
    for i in 0..100 {
        let (a, b) = (random_poly(&r, &mut rng, 3, d), random_poly(&r, &mut rng, 3, d));
        let lhs = WittVec::teichmuller(&a, 3).mul(&WittVec::teichmuller(&b, 3)).unwrap();
        ensure(lhs == WittVec::teichmuller(&a.mul(&b).unwrap(), 3), format!("[a][b] on pair {i}"))?;
    }
    for i in 0..100 {
        let x = random_witt(&r, &mut rng, d);
        ensure(x.scale_int(2).unwrap() == x.frobenius().unwrap().verschiebung(), format!("p x = V F x on sample {i}"))?;
    }
    Ok("200 triples, 100 Teichmuller pairs, 100 p x = V(F(x)) in W_3, D = 4, N = 3".into())
}

/// `sum_{0<i<p} binom(p, i)/p x^i y^(p-i)` with the given sign.
fn cross_term(x: &WittVec, y: &WittVec, sign: i64) -> WittVec {
    let p = x.p() as u64;
    let mut acc = WittVec::zero(x.ring(), x.len());
    let mut binom = 1u64;
    for i in 1..p {
        binom = binom * (p - i + 1) / i;
        let t = x.pow(i).unwrap().mul(&y.pow(p - i).unwrap()).unwrap();
        acc = acc.add(&t.scale_int(sign * (binom / p) as i64).unwrap()).unwrap();
    }
    acc
}

fn sum_rule_holds(x: &WittVec, y: &WittVec, sign: i64) -> bool {
    let r = x.ring();
    let n = x.len();
    let dr = delta_ring(r).unwrap();
    let (xs, ys) = (x.change_ring(&dr, n - 1).unwrap(), y.change_ring(&dr, n - 1).unwrap());
    let rhs = x.delta().unwrap().add(&y.delta().unwrap()).unwrap().add(&cross_term(&xs, &ys, sign)).unwrap();
    x.add(y).unwrap().delta().unwrap() == rhs
}

fn criterion_3() -> Verdict {
    let r = w3();
    let d = r.budget().d;
    let dr = delta_ring(&r).map_err(e2s)?;
    let down = |w: &WittVec| w.change_ring(&dr, 2).unwrap();
    ensure(WittVec::one(&r, 3).delta().map_err(e2s)?.is_zero(), "delta(1) != 0")?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let (x, y) = (random_witt(&r, &mut rng, d), random_witt(&r, &mut rng, d));
        let (dx, dy) = (x.delta().unwrap(), y.delta().unwrap());
        let (xs, ys) = (down(&x), down(&y));
        let prod = xs.pow(2).unwrap().mul(&dy).unwrap().add(&ys.pow(2).unwrap().mul(&dx).unwrap()).unwrap();
        let prod = prod.add(&dx.mul(&dy).unwrap().scale_int(2).unwrap()).unwrap();
        ensure(x.mul(&y).unwrap().delta().unwrap() == prod, format!("product rule on sample {i}"))?;
        ensure(sum_rule_holds(&x, &y, -1), format!("sum rule on sample {i}"))?;
        let phi = x.frobenius().unwrap().change_ring(&dr, 2).unwrap();
        ensure(phi == xs.pow(2).unwrap().add(&dx.scale_int(2).unwrap()).unwrap(), format!("Frobenius lift on sample {i}"))?;
    }
    Ok("delta(1) = 0, product and sum rules, phi = x^p + p delta on 100 samples at length 2".into())
}

fn criterion_4() -> Verdict {
    let r = w3();
    let vis = WittVec::visibility_bound(&r, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut witt, mut skipped) = (0, 0);
    while witt < 100 {
        let x = random_witt(&r, &mut rng, vis / 2);
        let a = x.weighted_gauss_norm();
        if !a.value().is_some_and(|v| v * 2 < vis) {
            skipped += 1;
            ensure(skipped < 10_000, "too few visible Witt samples")?;
            continue;
        }
        ensure(x.pow(2).unwrap().weighted_gauss_norm() == a.scale(rat(2, 1)), format!("Witt sample {witt}: {x:?}"))?;
        witt += 1;
    }
    let s = LensRing::adjoined_roots(2, 3, &["x", "y"], rat(3, 1), 2).map_err(e2s)?;
    let lvis = rat(3, 1);
    let mut lens = 0;
    while lens < 100 {
        let x = s.random_element(&mut rng, lvis / 2, 4);
        let a = lens_norm(&x);
        if !a.value().is_some_and(|v| v * 2 < lvis) {
            skipped += 1;
            continue;
        }
        ensure(lens_norm(&x.pow(2).unwrap()) == a.scale(rat(2, 1)), format!("lens sample {lens}"))?;
        lens += 1;
    }
    // every brute-force instance small enough to enumerate
    let mut instances = vec![LensRing::adjoined_roots(2, 2, &["x"], rat(2, 1), 1).map_err(e2s)?];
    let pr = RingPresentation::free(2, &["x"], PrecisionBudget::simple(2, 2, 2));
    let x = WittVec::teichmuller(&PerfPoly::var(&pr, "x").unwrap(), 2);
    let x2 = WittVec::teichmuller(&PerfPoly::parse(&pr, "x^2").unwrap(), 2);
    let z = x.sub(&WittVec::from_int(&pr, 2, 2)).unwrap().add(&x2).unwrap();
    instances.push(quotient_by_primitive(&z).map_err(e2s)?);
    let mut dims = Vec::new();
    for s in &instances {
        let lin = s.source_linearization().map_err(e2s)?;
        let dim = lin.rank() * s.n() as usize;
        ensure(dim <= 512, format!("dimension {dim}"))?;
        dims.push(dim);
        let deg: Vec<Rational64> = lin.basis().iter().map(|m| lin.ring().monomial_degree(m)).collect();
        for _ in 0..40 {
            let a = lin.random_element(&mut rng);
            let q = brute_force_quotient_norm(lin.relation_echelon(), &deg, &lin.vector(&a).unwrap());
            ensure(q == lens_norm(&s.theta(&a).unwrap()), format!("quotient norm of {a}"))?;
        }
    }
    Ok(format!("100 Witt + 100 lens samples ({skipped} outside visibility skipped); brute force at dims {dims:?}"))
}

fn criterion_5() -> Verdict {
    let r = RingPresentation::free(2, &["x"], PrecisionBudget::simple(2, 4, 2));
    let x = WittVec::teichmuller(&PerfPoly::var(&r, "x").unwrap(), 2);
    let p = WittVec::from_int(&r, 2, 2);
    let z = x.sub(&p).unwrap();
    let zp = is_primitive(&z).map_err(e2s)?;
    ensure(zp.certified && zp.verify(&z).map_err(e2s)?, "[x] - p not primitive")?;
    for (label, w, want) in [("[x] - p", &z, true), ("p", &p, true), ("[x]", &x, false)] {
        let d = is_distinguished(w).map_err(e2s)?;
        ensure(d.certified == want, format!("{label} distinguished = {}", d.certified))?;
        if want {
            let c = d.certificate.as_ref().ok_or("missing certificate")?;
            ensure(c.verify(&PerfPoly::one(d.d0.ring()), &[d.d0.clone(), d.delta0.clone()]).map_err(e2s)?, "certificate")?;
        }
    }
    ensure(!is_primitive(&x).map_err(e2s)?.certified, "[x] accepted")?;
    ensure(!is_primitive(&WittVec::one(&r, 2).sub(&p).unwrap()).map_err(e2s)?.certified, "1 - p accepted")?;
    Ok("[x]-p primitive and distinguished, p distinguished, [x] and 1-p rejected".into())
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let lr = RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(2, 4, 1).with_l(4)).map_err(e2s)?;
    let comb = unit_witt_combination(&[PerfPoly::parse(&lr, "x^-1").unwrap()], &[PerfPoly::var(&lr, "x").unwrap()], 2)
        .map_err(e2s)?;
    ensure(comb.verify_in(&lr).map_err(e2s)?, "Laurent instance")?;
    let vars = [("x", false), ("y", false), ("u", false), ("v", false)];
    let pres = RingPresentation::new(2, &vars, &["u*x + v*y - 1"], PrecisionBudget::simple(2, 4, 1)).map_err(e2s)?;
    let ab: Vec<PerfPoly> = ["u", "v"].iter().map(|s| PerfPoly::var(&pres, s).unwrap()).collect();
    let xb: Vec<PerfPoly> = ["x", "y"].iter().map(|s| PerfPoly::var(&pres, s).unwrap()).collect();
    let comb = unit_witt_combination(&ab, &xb, 2).map_err(e2s)?;
    // modulo the relation over the free ring; the truncated quotient at D = 4
    // collapses, so the identity is checked where the combination fits
    let free = RingPresentation::free(2, &["x", "y", "u", "v"], PrecisionBudget::simple(2, 12, 1));
    let chk = comb.verify_modulo(&free, &[PerfPoly::parse(&free, "u*x + v*y - 1").unwrap()]).map_err(e2s)?;
    ensure(chk.holds, "presented instance")?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!("Laurent m=0 at D=4; presented m=1 modulo ux+vy-1 (max degree {}); {t:.2?}", chk.max_degree))
}

fn criterion_7() -> Verdict {
    let r = RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(2, 6, 1).with_l(4)).map_err(e2s)?;
    let b = [WittVec::teichmuller(&PerfPoly::parse(&r, "x^-1").unwrap(), 2)];
    let xb = [PerfPoly::var(&r, "x").unwrap()];
    let thr = decomposition_threshold(&b);
    ensure(thr == NormExponent::int(1), format!("threshold {thr}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut n = 0;
    while n < 50 {
        let digits: Vec<PerfPoly> = (0..2)
            .map(|_| {
                let mut d = PerfPoly::zero(&r);
                for _ in 0..rng.gen_range(0..3) {
                    let e = rng.gen_range(2..12i64);
                    d = d.add(&PerfPoly::from_monomial(&r, PerfMonomial(vec![e].into_boxed_slice()), 1)).unwrap();
                }
                d
            })
            .collect();
        let f = WittVec::from_teichmuller_digits(&r, &digits).unwrap();
        if f.gauss_norm() < thr {
            continue;
        }
        let parts = small_norm_decompose(&f, &b, &xb).map_err(|e| format!("sample {n}: {e}"))?;
        let mut back = WittVec::zero(&r, 2);
        for (a, x) in parts.iter().zip(&xb) {
            ensure(a.coords().iter().all(|c| c.terms().keys().all(|m| m.0.iter().all(|&e| e >= 0))), "non-integral digit")?;
            back = back.add(&a.mul(&WittVec::teichmuller(x, 2)).unwrap()).unwrap();
        }
        ensure(back == f, format!("reconstruction of sample {n}"))?;
        n += 1;
    }
    Ok("50 samples above threshold 1 decompose with integral digits and reconstruct".into())
}

fn criterion_8() -> Verdict {
    let r = TeichRing::new(2, 2, &["x"], rat(4, 1), 2);
    let c = linearize(&r, 8192).map_err(e2s)?;
    let x = TeichPoly::parse(&r, "x").unwrap();
    let one = TeichPoly::one(&r);
    let mut lines = Vec::new();
    for (label, g) in [("([x],1)", one.clone()), ("([x],1-[x])", one.sub(&x).unwrap())] {
        let start = Instant::now();
        let cx = cech_complex(&c, &x, &g, 1).map_err(e2s)?;
        let rep = check_exactness(&cx);
        ensure(rep.exact && rep.h0_inverse, format!("{label}: {rep:?}"))?;
        let window = cx.a1.window_space().dim + cx.a2.window_space().dim + cx.a12.window_space().dim;
        ensure(window <= 2000, format!("{label}: window dimension {window}"))?;
        ensure(!check_exactness(&cx.corrupt_map1()).exact, format!("{label}: corrupted map not detected"))?;
        let t = start.elapsed();
        ensure(t < Duration::from_secs(120), format!("{label}: took {t:?}"))?;
        lines.push(format!("{label} lengths {:?} in {t:.2?}", rep.dims));
    }
    Ok(lines.join("; "))
}

fn criterion_9() -> Verdict {
    let src = TeichRing::new(2, 2, &["x", "t"], rat(2, 1), 2);
    let z = TeichPoly::parse(&src, "t - 2").unwrap();
    let rep = check_frobenius_iso(&z, 1, None, 0).map_err(e2s)?;
    ensure(rep.bijective && rep.primitive, format!("trivial: {rep:?}"))?;
    let x = TeichPoly::parse(&src, "x").unwrap();
    let one = TeichPoly::one(&src);
    let loc = check_frobenius_iso(&z, 1, Some((&x, &one)), 1).map_err(e2s)?;
    ensure(loc.bijective && loc.localized, format!("Laurent: {loc:?}"))?;
    Ok(format!("bijective at (2,2,2): trivial {:?}, Laurent {:?}", rep.lengths.source, loc.lengths.source))
}

fn criterion_10() -> Verdict {
    let s = LensRing::adjoined_roots(2, 2, &["x"], rat(2, 1), 1).map_err(e2s)?;
    let rep = lens_canonical_iso_check(&s, None, 0, 50, 10).map_err(e2s)?;
    ensure(rep.bijective && rep.norm_samples == 50 && rep.norm_mismatches == 0 && rep.certified, format!("{rep:?}"))?;
    Ok("bijective at (2,2,1), 50 norm samples agree".into())
}

fn overlap_matrix(r: &Arc<TeichRing>, rng: &mut ChaCha8Rng, alpha_min: i64) -> LaurentMatrix {
    let mut entries = Vec::new();
    for _ in 0..4 {
        let mut e = LaurentPoly::zero(r);
        for _ in 0..3 {
            let c = TeichPoly::var_pow(r, 0, rat(rng.gen_range(0..=4), 2)).unwrap().scale(2i64.pow(rng.gen_range(0..3)));
            if c.weighted_norm() >= NormExponent::int(alpha_min) {
                e = e.add(&LaurentPoly::monomial(&c, rng.gen_range(-2..=2))).unwrap();
            }
        }
        entries.push(e);
    }
    LaurentMatrix::identity(r, 2).add(&LaurentMatrix::from_entries(r, 2, 2, entries).unwrap()).unwrap()
}

fn criterion_11() -> Verdict {
    let r = TeichRing::new(2, 3, &["x"], rat(3, 1), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nontrivial = 0;
    for i in 0..20 {
        let u = overlap_matrix(&r, &mut rng, 2);
        let f = factor_near_identity(&u).map_err(|e| format!("sample {i}: {e}"))?;
        ensure(f.u1.mul(&f.u2).unwrap() == u, format!("U != U1 U2 on sample {i}"))?;
        ensure(f.u1.supported_in(0, i64::MAX) && f.u2.supported_in(i64::MIN, 0), format!("pieces on sample {i}"))?;
        nontrivial += usize::from(!u.is_identity());
    }
    let t = LaurentPoly::monomial(&TeichPoly::one(&r), 1);
    let bad = LaurentMatrix::from_entries(&r, 1, 1, vec![LaurentPoly::one(&r).add(&t).unwrap()]).unwrap();
    ensure(matches!(factor_near_identity(&bad), Err(Error::NonConvergent(_))), "alpha 0 accepted")?;
    Ok(format!("20 matrices ({nontrivial} nontrivial) factor exactly; alpha(E) = 0 rejected"))
}

fn criterion_12() -> Verdict {
    let r = TeichRing::new(2, 2, &["x"], rat(2, 1), 1);
    let x = TeichPoly::parse(&r, "x").unwrap();
    let one = TeichPoly::one(&r);
    let xp = LaurentPoly::monomial(&x.scale(2), 1);
    let xm = LaurentPoly::monomial(&x.mul(&x).unwrap(), -1);
    let z = LaurentPoly::zero(&r);
    let e = LaurentMatrix::from_entries(&r, 2, 2, vec![xp, xm, z.clone(), z]).unwrap();
    let v = LaurentMatrix::identity(&r, 2).add(&e).unwrap();
    let w = v.inverse_near_identity().map_err(e2s)?;
    let datum = PatchingDatum { c: r.clone(), f: one.add(&x).unwrap(), g: one, v, w, dt: 1, m_max: 4 };
    let glued = glue_modules(&datum).map_err(e2s)?;
    let rep = verify_base_change(&glued, &datum).map_err(e2s)?;
    ensure(rep.ok, format!("{:?}", rep.failures))?;
    ensure(rep.piece1.bijective() && rep.piece2.bijective() && rep.round_trip, "base change")?;
    let dropped = verify_base_change(&glued.drop_generator().map_err(e2s)?, &datum).map_err(e2s)?;
    ensure(!dropped.ok, "dropped generator not detected")?;
    Ok(format!("rank 2, len M = {} = 2 len C, base changes bijective, round trip holds", rep.kernel_length))
}

fn criterion_13() -> Verdict {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/all-checks.json");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = Command::new(env!("CARGO_BIN_EXE_ainf-check")).arg("run").arg(&cfg).output().map_err(e2s)?;
        ensure(out.status.code() == Some(0), format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
        let text = String::from_utf8(out.stdout).map_err(e2s)?;
        // timestamps are the only field allowed to vary
        let stable: String = text.lines().filter(|l| !l.trim_start().starts_with("\"wall_time_ms\"")).collect::<Vec<_>>().join("\n");
        let v: Value = serde_json::from_str(&text).map_err(e2s)?;
        ensure(v["summary"]["fail"] == 0 && v["summary"]["error"] == 0, "failing checks")?;
        reports.push(stable);
    }
    ensure(reports[0] == reports[1], "reports differ")?;
    Ok(format!("byte-stable across two runs ({} bytes), exit 0", reports[0].len()))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        ("structure polynomials certified by ghost identities", criterion_1),
        ("Witt ring axioms, Teichmuller, p = VF", criterion_2),
        ("delta structure and Frobenius lift", criterion_3),
        ("power-multiplicativity and quotient norm", criterion_4),
        ("primitive and distinguished certificates", criterion_5),
        ("unit combination in Teichmuller powers", criterion_6),
        ("small-norm decomposition", criterion_7),
        ("Cech exactness with inverse and control", criterion_8),
        ("Frobenius isomorphism by rank", criterion_9),
        ("canonical isomorphism and norm", criterion_10),
        ("near-identity factorization", criterion_11),
        ("rank-2 gluing and base change", criterion_12),
        ("CLI determinism", criterion_13),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// The sum rule only holds with the minus sign; the plus sign breaks already
/// at `x = y = 1`, where `delta(2) = -1`.
#[test]
fn sum_rule_requires_minus_sign() {
    let r = w3();
    let one = WittVec::one(&r, 3);
    assert!(sum_rule_holds(&one, &one, -1));
    assert!(!sum_rule_holds(&one, &one, 1));
}
