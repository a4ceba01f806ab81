use ainf_core::cech::{cech_complex, check_exactness, linearize};
use ainf_core::glue::{factor_near_identity, LaurentMatrix};
use ainf_core::cech::LaurentPoly;
use ainf_core::{PerfPoly, PrecisionBudget, RingPresentation, StructurePolyCache, TeichPoly, TeichRing, WittVec};
use criterion::{criterion_group, criterion_main, Criterion};
use num_rational::Rational64;
use std::hint::black_box;

fn structure_polynomials(c: &mut Criterion) {
    c.bench_function("structure polynomials p=2 n=4", |b| b.iter(|| StructurePolyCache::build(black_box(2), 4).unwrap()));
}

fn witt_arithmetic(c: &mut Criterion) {
    let r = RingPresentation::free(2, &["x"], PrecisionBudget::simple(3, 4, 3));
    let a = WittVec::from_teichmuller_digits(&r, &[PerfPoly::parse(&r, "x^(1/8) + x").unwrap(), PerfPoly::parse(&r, "x^(3/4)").unwrap(), PerfPoly::one(&r)]).unwrap();
    let b = WittVec::from_teichmuller_digits(&r, &[PerfPoly::parse(&r, "1 + x^(5/8)").unwrap(), PerfPoly::zero(&r), PerfPoly::parse(&r, "x^2").unwrap()]).unwrap();
    c.bench_function("W3 multiply", |bn| bn.iter(|| black_box(&a).mul(black_box(&b)).unwrap()));
    c.bench_function("W3 delta", |bn| bn.iter(|| black_box(&a).delta().unwrap()));
}

fn cech(c: &mut Criterion) {
    let r = TeichRing::new(2, 2, &["x"], Rational64::from_integer(4), 2);
    let lin = linearize(&r, 8192).unwrap();
    let x = TeichPoly::parse(&r, "x").unwrap();
    let one = TeichPoly::one(&r);
    c.bench_function("cech exactness ([x], 1)", |b| {
        b.iter(|| check_exactness(&cech_complex(&lin, &x, &one, 1).unwrap()))
    });
}

fn factorization(c: &mut Criterion) {
    let r = TeichRing::new(2, 3, &["x"], Rational64::from_integer(3), 1);
    let e = |s: &str, j: i64| LaurentPoly::monomial(&TeichPoly::parse(&r, s).unwrap(), j);
    let entries = vec![e("1 + 4*x", 0), e("2*x", -1), e("x^2", 2), e("1 + 2*x^(1/2)", 0)];
    let u = LaurentMatrix::from_entries(&r, 2, 2, entries).unwrap();
    c.bench_function("factor 2x2 near identity", |b| b.iter(|| factor_near_identity(black_box(&u)).unwrap()));
}

criterion_group!(benches, structure_polynomials, witt_arithmetic, cech, factorization);
criterion_main!(benches);
