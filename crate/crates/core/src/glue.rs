//! Gluing free modules along the covering `C<T>`, `C<T^-1>`, `C<T, T^-1>`.
//!
//! Matrices live over Laurent polynomials in `T` with Teichmuller-model
//! coefficients; identities are checked exactly on these representatives and
//! then pushed to the window linearizations for rank checks.

use crate::cech::{linearize, localization_ring, LaurentPoly, LinearizedRing, LocalizationRing, Side, DIM_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{apply, map_lengths, Echelon, MapLengths, QuotientSpace};
use crate::norm::NormExponent;
use crate::witt::{TeichPoly, TeichRing};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Iteration cap for Neumann series and the factorization loop.
const MAX_ITER: usize = 10_000;

#[derive(Clone, PartialEq, Eq)]
pub struct LaurentMatrix {
    ring: Arc<TeichRing>,
    rows: usize,
    cols: usize,
    entries: Vec<LaurentPoly>,
}

impl fmt::Debug for LaurentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LaurentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl LaurentMatrix {
    pub fn zero(ring: &Arc<TeichRing>, rows: usize, cols: usize) -> Self {
        LaurentMatrix { ring: ring.clone(), rows, cols, entries: vec![LaurentPoly::zero(ring); rows * cols] }
    }

    pub fn identity(ring: &Arc<TeichRing>, r: usize) -> Self {
        let mut m = Self::zero(ring, r, r);
        for i in 0..r {
            m.set(i, i, LaurentPoly::one(ring));
        }
        m
    }

    /// Row-major entries.
    pub fn from_entries(ring: &Arc<TeichRing>, rows: usize, cols: usize, entries: Vec<LaurentPoly>) -> Result<Self> {
        if entries.len() != rows * cols || entries.iter().any(|e| e.ring() != ring) {
            return Err(Error::Invalid("matrix shape or ring mismatch".into()));
        }
        Ok(LaurentMatrix { ring: ring.clone(), rows, cols, entries })
    }

    pub fn ring(&self) -> &Arc<TeichRing> {
        &self.ring
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.cols + j]
    }
    pub fn set(&mut self, i: usize, j: usize, v: LaurentPoly) {
        self.entries[i * self.cols + j] = v;
    }
    pub fn entries(&self) -> &[LaurentPoly] {
        &self.entries
    }

    fn check(&self, o: &LaurentMatrix) -> Result<()> {
        if self.ring != o.ring {
            return Err(Error::RingMismatch);
        }
        Ok(())
    }

    pub fn add(&self, o: &LaurentMatrix) -> Result<LaurentMatrix> {
        self.check(o)?;
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(Error::Invalid("shape mismatch".into()));
        }
        let entries = self.entries.iter().zip(&o.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(LaurentMatrix { entries, ..self.clone() })
    }

    pub fn neg(&self) -> LaurentMatrix {
        LaurentMatrix { entries: self.entries.iter().map(|a| a.neg()).collect(), ..self.clone() }
    }

    pub fn sub(&self, o: &LaurentMatrix) -> Result<LaurentMatrix> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &LaurentMatrix) -> Result<LaurentMatrix> {
        self.check(o)?;
        if self.cols != o.rows {
            return Err(Error::Invalid("shape mismatch".into()));
        }
        let mut out = Self::zero(&self.ring, self.rows, o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = LaurentPoly::zero(&self.ring);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(o.get(k, j))?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Entrywise product with a scalar.
    pub fn scale(&self, s: &LaurentPoly) -> Result<LaurentMatrix> {
        let entries = self.entries.iter().map(|a| s.mul(a)).collect::<Result<_>>()?;
        Ok(LaurentMatrix { entries, ..self.clone() })
    }

    /// Keeps T-powers `<= k` in every entry.
    pub fn truncate_above(&self, k: i64) -> LaurentMatrix {
        let entries = self
            .entries
            .iter()
            .map(|a| {
                let mut out = LaurentPoly::zero(&self.ring);
                for (&j, c) in a.coeffs() {
                    if j <= k {
                        out = out.add(&LaurentPoly::monomial(c, j)).expect("same ring");
                    }
                }
                out
            })
            .collect();
        LaurentMatrix { entries, ..self.clone() }
    }

    /// Minimum entry alpha.
    pub fn alpha(&self) -> NormExponent {
        self.entries.iter().map(LaurentPoly::alpha).fold(NormExponent::INFINITY, NormExponent::min)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let e = self.get(i, j);
                    if i == j {
                        *e == LaurentPoly::one(&self.ring)
                    } else {
                        e.is_zero()
                    }
                })
            })
    }

    /// Pieces of entries with T-powers `>= 0` and `< 0`.
    pub fn split(&self) -> (LaurentMatrix, LaurentMatrix) {
        let (a, b): (Vec<_>, Vec<_>) = self.entries.iter().map(|e| e.split()).unzip();
        (LaurentMatrix { entries: a, ..self.clone() }, LaurentMatrix { entries: b, ..self.clone() })
    }

    /// Every entry has T-powers in `[lo, hi]`.
    pub fn supported_in(&self, lo: i64, hi: i64) -> bool {
        self.entries.iter().all(|e| e.coeffs().keys().all(|&j| lo <= j && j <= hi))
    }

    /// `(1 + E)^-1` by the Neumann series, for `alpha(E) > 0`.
    pub fn inverse_near_identity(&self) -> Result<LaurentMatrix> {
        let id = Self::identity(&self.ring, self.rows);
        let e = self.sub(&id)?;
        if e.alpha() <= NormExponent::int(0) {
            return Err(Error::NotAUnit);
        }
        let minus_e = e.neg();
        let mut acc = id.clone();
        let mut pw = id;
        for _ in 0..MAX_ITER {
            pw = pw.mul(&minus_e)?;
            if pw.alpha().is_infinite() {
                return Ok(acc);
            }
            acc = acc.add(&pw)?;
        }
        Err(Error::NonConvergent("Neumann series did not terminate".into()))
    }
}

/// `e = e1 + e2` with `e1` on `T^(>= 0)` and `e2` on `T^(< 0)`.
pub fn split_overlap(e: &LaurentPoly) -> (LaurentPoly, LaurentPoly) {
    e.split()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    /// Over the first piece (T-powers `>= 0`).
    pub u1: LaurentMatrix,
    /// Over the second piece (T-powers `<= 0`).
    pub u2: LaurentMatrix,
    /// `alpha(U_k - 1)` before each step.
    pub residuals: Vec<NormExponent>,
}

/// Writes `U = U1 U2` by `U <- (1 + E1)^-1 U (1 + E2)^-1`. Converges for
/// `alpha(U - 1) > 0`, which is the threshold used here.
pub fn factor_near_identity(u: &LaurentMatrix) -> Result<Factorization> {
    if u.rows != u.cols {
        return Err(Error::Invalid("square matrix expected".into()));
    }
    let id = LaurentMatrix::identity(&u.ring, u.rows);
    let mut cur = u.clone();
    let mut u1 = id.clone();
    let mut u2 = id.clone();
    let mut residuals = Vec::new();
    for _ in 0..MAX_ITER {
        let e = cur.sub(&id)?;
        let a = e.alpha();
        if a.is_infinite() {
            residuals.push(a);
            return Ok(Factorization { u1, u2, residuals });
        }
        if a <= NormExponent::int(0) || residuals.last().is_some_and(|&prev| a <= prev) {
            residuals.push(a);
            return Err(Error::NonConvergent(format!("residual alpha {a} does not improve")));
        }
        residuals.push(a);
        let (e1, e2) = e.split();
        let p1 = id.add(&e1)?;
        let p2 = id.add(&e2)?;
        cur = p1.inverse_near_identity()?.mul(&cur)?.mul(&p2.inverse_near_identity()?)?;
        u1 = u1.mul(&p1)?;
        u2 = p2.mul(&u2)?;
    }
    Err(Error::NonConvergent("iteration cap".into()))
}

/// Free modules of rank `r` on the pieces, identified on the overlap by
/// `psi2(w_j) = sum_i V_ij psi1(v_i)`.
#[derive(Debug, Clone)]
pub struct PatchingDatum {
    pub c: Arc<TeichRing>,
    pub f: TeichPoly,
    pub g: TeichPoly,
    pub v: LaurentMatrix,
    pub w: LaurentMatrix,
    pub dt: u32,
    pub m_max: u32,
}

impl PatchingDatum {
    pub fn rank(&self) -> usize {
        self.v.rows
    }
}

/// The three rings at the datum's window size.
#[derive(Debug, Clone)]
pub struct Covering {
    pub c: Arc<LinearizedRing>,
    pub a1: Arc<LocalizationRing>,
    pub a2: Arc<LocalizationRing>,
    pub a12: Arc<LocalizationRing>,
}

impl Covering {
    pub fn new(datum: &PatchingDatum) -> Result<Self> {
        let c = linearize(&datum.c, DIM_LIMIT)?;
        let a1 = localization_ring(&c, &datum.f, &datum.g, Side::T, datum.dt)?;
        let a2 = localization_ring(&c, &datum.f, &datum.g, Side::TInv, datum.dt)?;
        let a12 = crate::cech::localization_ring_from(&c, &datum.f, &datum.g, Side::Both, datum.dt, a1.ext().max(a2.ext()) as u32)?;
        Ok(Covering { c, a1, a2, a12 })
    }
}

fn direct_sum(spaces: &[&QuotientSpace]) -> QuotientSpace {
    let dim: usize = spaces.iter().map(|s| s.dim).sum();
    let zq = spaces[0].zq();
    let mut rel = Echelon::new(zq, dim);
    let mut off = 0;
    for s in spaces {
        for r in s.rel.rows() {
            let mut v = vec![0u32; dim];
            v[off..off + s.dim].copy_from_slice(r);
            rel.insert(v);
        }
        off += s.dim;
    }
    QuotientSpace::new(dim, rel)
}

/// Coordinates of a column of Laurent entries in `ring^r`.
fn column_vector(ring: &LocalizationRing, m: &LaurentMatrix, j: usize) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for i in 0..m.rows {
        out.extend(ring.window_vector(m.get(i, j))?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GluedModule {
    /// Exponent of `f` in the approximant.
    pub m: u32,
    pub factorization: Factorization,
    /// `f^m X1`: first components of the generators, over piece 1.
    pub y1: LaurentMatrix,
    /// `W' X2`: second components, over piece 2.
    pub y2: LaurentMatrix,
    /// Generators in the coordinates of `A1^r (+) A2^r`.
    pub generators: Vec<Vec<u32>>,
    /// Length of `ker psi`.
    pub kernel_length: u64,
    /// Length of the C-span of the generators.
    pub span_length: u64,
    pub generators_in_kernel: bool,
    pub covering: Covering,
}

fn f_inverse_power(datum: &PatchingDatum, m: u32) -> Result<LaurentPoly> {
    // on the overlap f^-1 = g^-1 T^-1
    let gi = datum.g.inverse()?;
    let mut out = LaurentPoly::one(&datum.c);
    for _ in 0..m {
        out = out.mul(&LaurentPoly::monomial(&gi, -1))?;
    }
    Ok(out)
}

/// Glues the datum: finds `m` and `W'`, factors `1 + Delta`, forms the
/// generators and measures `M = ker psi` on the linearizations.
pub fn glue_modules(datum: &PatchingDatum) -> Result<GluedModule> {
    let r = datum.rank();
    if datum.v.cols != r || (datum.w.rows, datum.w.cols) != (r, r) {
        return Err(Error::Invalid("transition matrices must be square of the same size".into()));
    }
    let c = &datum.c;
    let id = LaurentMatrix::identity(c, r);
    let fl = LaurentPoly::constant(&datum.f);
    let mut found = None;
    for m in 0..=datum.m_max {
        let fm = (0..m).try_fold(LaurentPoly::one(c), |acc, _| acc.mul(&fl))?;
        let w_prime = datum.w.scale(&fm)?.truncate_above(0);
        let u = datum.v.mul(&w_prime.scale(&f_inverse_power(datum, m)?)?)?;
        if u.sub(&id)?.alpha() > NormExponent::int(0) {
            found = Some((m, fm, w_prime, u));
            break;
        }
    }
    let Some((m, fm, w_prime, u)) = found else {
        return Err(Error::ApproximantNotFound(datum.m_max));
    };
    let factorization = factor_near_identity(&u)?;
    let x2 = factorization.u2.inverse_near_identity()?;
    let y1 = factorization.u1.scale(&fm)?;
    let y2 = w_prime.mul(&x2)?;

    let cov = Covering::new(datum)?;
    let (a1, a2, a12) = (&cov.a1, &cov.a2, &cov.a12);
    let s1 = a1.window_space();
    let s2 = a2.window_space();
    let s12 = a12.window_space();
    let mut blocks: Vec<&QuotientSpace> = vec![s1; r];
    blocks.extend(std::iter::repeat_n(s2, r));
    let middle = direct_sum(&blocks);
    let target = direct_sum(&vec![s12; r]);
    let psi = psi_columns(&cov, &datum.v)?;
    let lengths = map_lengths(&middle, &target, &psi);
    if !lengths.well_defined {
        return Err(Error::Invalid("psi is not well defined on the windows".into()));
    }
    let generators = (0..r)
        .map(|j| {
            let mut v = column_vector(a1, &y1, j)?;
            v.extend(column_vector(a2, &y2, j)?);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let zq = cov.c.zq();
    let generators_in_kernel = generators.iter().all(|x| target.is_zero(&apply(zq, target.dim, &psi, x)));
    let span_length = c_span_length(&cov, &middle, &generators, r)?;
    Ok(GluedModule {
        m,
        factorization,
        y1,
        y2,
        generators,
        kernel_length: lengths.kernel,
        span_length,
        generators_in_kernel,
        covering: cov,
    })
}

/// Columns of `psi(a, b) = a - V b` on `A1^r (+) A2^r -> A12^r`.
fn psi_columns(cov: &Covering, v: &LaurentMatrix) -> Result<Vec<Vec<u32>>> {
    let r = v.rows;
    let (a1, a2, a12) = (&cov.a1, &cov.a2, &cov.a12);
    let w12 = a12.window_space().dim;
    let mut cols = Vec::new();
    for i in 0..r {
        for k in 0..a1.window_space().dim {
            let e = a1.window_element(&unit(a1.window_space().dim, k));
            let mut col = vec![0u32; r * w12];
            col[i * w12..(i + 1) * w12].copy_from_slice(&a12.window_vector(&e)?);
            cols.push(col);
        }
    }
    for j in 0..r {
        for k in 0..a2.window_space().dim {
            let e = a2.window_element(&unit(a2.window_space().dim, k));
            let mut col = Vec::with_capacity(r * w12);
            for i in 0..r {
                col.extend(a12.window_vector(&v.get(i, j).mul(&e)?.neg())?);
            }
            cols.push(col);
        }
    }
    Ok(cols)
}

fn unit(dim: usize, k: usize) -> Vec<u32> {
    let mut v = vec![0u32; dim];
    v[k] = 1;
    v
}

/// Length of the span of `[m] x_j` over the monomials of C.
fn c_span_length(cov: &Covering, middle: &QuotientSpace, gens: &[Vec<u32>], r: usize) -> Result<u64> {
    let (a1, a2) = (&cov.a1, &cov.a2);
    let w1 = a1.window_space().dim;
    let w2 = a2.window_space().dim;
    let mut span = middle.rel.clone();
    for x in gens {
        for mono in cov.c.basis() {
            let cm = LaurentPoly::constant(&TeichPoly::monomial(cov.c.ring(), mono.clone(), 1));
            let mut v = Vec::with_capacity(middle.dim);
            for i in 0..r {
                let e = a1.window_element(&x[i * w1..(i + 1) * w1]);
                v.extend(a1.window_vector(&cm.mul(&e)?)?);
            }
            for i in 0..r {
                let off = r * w1 + i * w2;
                let e = a2.window_element(&x[off..off + w2]);
                v.extend(a2.window_vector(&cm.mul(&e)?)?);
            }
            span.insert(v);
        }
    }
    Ok(span.length() - middle.rel.length())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BaseChangeReport {
    pub rank: usize,
    /// `len(M)` versus `rank * len(C)`.
    pub kernel_length: u64,
    pub expected_length: u64,
    pub span_length: u64,
    pub generators_in_kernel: bool,
    /// `M (x) A1 -> M1`.
    pub piece1: MapLengths,
    /// `M (x) A2 -> M2`.
    pub piece2: MapLengths,
    /// `V * Y2 = Y1` on the overlap: restricting the glued module recovers `V`
    /// up to the recorded change of basis.
    pub round_trip: bool,
    pub failures: Vec<String>,
    pub ok: bool,
}

/// `A^r -> A^r`, `e_j -> column j of Y`, as a linear map of windows.
fn base_change(ring: &LocalizationRing, y: &LaurentMatrix) -> Result<MapLengths> {
    let r = y.rows;
    let s = ring.window_space();
    let sum = direct_sum(&vec![s; r]);
    let mut cols = Vec::new();
    for j in 0..r {
        for k in 0..s.dim {
            let e = ring.window_element(&unit(s.dim, k));
            let mut col = Vec::with_capacity(r * s.dim);
            for i in 0..r {
                col.extend(ring.window_vector(&y.get(i, j).mul(&e)?)?);
            }
            cols.push(col);
        }
    }
    Ok(map_lengths(&sum, &sum, &cols))
}

pub fn verify_base_change(m: &GluedModule, datum: &PatchingDatum) -> Result<BaseChangeReport> {
    let r = datum.rank();
    let cov = &m.covering;
    let piece1 = base_change(&cov.a1, &m.y1)?;
    let piece2 = base_change(&cov.a2, &m.y2)?;
    let a12 = &cov.a12;
    let diff = datum.v.mul(&m.y2)?.sub(&m.y1)?;
    let mut round_trip = true;
    for e in diff.entries() {
        round_trip &= a12.is_zero(e)?;
    }
    let expected_length = r as u64 * cov.c.dim();
    let mut failures = Vec::new();
    if !m.generators_in_kernel {
        failures.push("generators do not satisfy psi = 0".to_string());
    }
    if m.kernel_length != expected_length {
        failures.push(format!("len ker psi = {} but rank * len C = {expected_length}", m.kernel_length));
    }
    if m.span_length != m.kernel_length {
        failures.push(format!("generators span length {} of {}", m.span_length, m.kernel_length));
    }
    if !piece1.bijective() {
        failures.push("base change to the first piece is not bijective".to_string());
    }
    if !piece2.bijective() {
        failures.push("base change to the second piece is not bijective".to_string());
    }
    if !round_trip {
        failures.push("V * Y2 differs from Y1 on the overlap".to_string());
    }
    Ok(BaseChangeReport {
        rank: r,
        kernel_length: m.kernel_length,
        expected_length,
        span_length: m.span_length,
        generators_in_kernel: m.generators_in_kernel,
        piece1,
        piece2,
        round_trip,
        ok: failures.is_empty(),
        failures,
    })
}

impl GluedModule {
    /// Negative control: forgets the last generator.
    pub fn drop_generator(&self) -> Result<GluedModule> {
        let mut out = self.clone();
        out.generators.pop();
        let r = self.y1.rows;
        let middle_dim = self.generators[0].len();
        let (s1, s2) = (self.covering.a1.window_space(), self.covering.a2.window_space());
        let mut blocks: Vec<&QuotientSpace> = vec![s1; r];
        blocks.extend(std::iter::repeat_n(s2, r));
        let middle = direct_sum(&blocks);
        debug_assert_eq!(middle.dim, middle_dim);
        out.span_length = c_span_length(&self.covering, &middle, &out.generators, r)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring() -> Arc<TeichRing> {
        TeichRing::new(2, 2, &["x"], Rational64::from_integer(2), 1)
    }

    fn x(r: &Arc<TeichRing>) -> TeichPoly {
        TeichPoly::var_pow(r, 0, Rational64::from_integer(1)).unwrap()
    }

    #[test]
    fn split_examples() {
        let r = ring();
        let one = TeichPoly::one(&r);
        let e = LaurentPoly::monomial(&one, 1).add(&LaurentPoly::monomial(&one, -1)).unwrap();
        let (a, b) = split_overlap(&e);
        assert_eq!(a, LaurentPoly::monomial(&one, 1));
        assert_eq!(b, LaurentPoly::monomial(&one, -1));
        let (a, b) = split_overlap(&LaurentPoly::constant(&x(&r)));
        assert_eq!(a, LaurentPoly::constant(&x(&r)));
        assert!(b.is_zero());
    }

    #[test]
    fn factorization_examples() {
        let r = ring();
        let id = LaurentMatrix::identity(&r, 1);
        let f = factor_near_identity(&id).unwrap();
        assert!(f.u1.is_identity() && f.u2.is_identity());
        let pt = LaurentPoly::monomial(&TeichPoly::constant(&r, 2), 1);
        let u = LaurentMatrix::from_entries(&r, 1, 1, vec![LaurentPoly::one(&r).add(&pt).unwrap()]).unwrap();
        let f = factor_near_identity(&u).unwrap();
        assert_eq!(f.u1.mul(&f.u2).unwrap(), u);
        let t = LaurentPoly::monomial(&TeichPoly::one(&r), 1);
        let bad = LaurentMatrix::from_entries(&r, 1, 1, vec![LaurentPoly::one(&r).add(&t).unwrap()]).unwrap();
        assert!(matches!(factor_near_identity(&bad), Err(Error::NonConvergent(_))));
    }

    fn datum(v: LaurentMatrix, w: LaurentMatrix, r: &Arc<TeichRing>, m_max: u32) -> PatchingDatum {
        let one = TeichPoly::one(r);
        PatchingDatum { c: r.clone(), f: one.add(&x(r)).unwrap(), g: one, v, w, dt: 1, m_max }
    }

    #[test]
    fn trivial_gluing() {
        let r = ring();
        let id = LaurentMatrix::identity(&r, 1);
        let d = datum(id.clone(), id, &r, 2);
        let g = glue_modules(&d).unwrap();
        assert_eq!(g.m, 0);
        let rep = verify_base_change(&g, &d).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert_eq!(rep.kernel_length, g.covering.c.dim());
    }

    #[test]
    fn rank_two_gluing_and_controls() {
        let r = ring();
        let xp = LaurentPoly::monomial(&x(&r).scale(2), 1);
        let xm = LaurentPoly::monomial(&x(&r), -1).mul(&LaurentPoly::constant(&x(&r))).unwrap();
        let z = LaurentPoly::zero(&r);
        let e = LaurentMatrix::from_entries(&r, 2, 2, vec![xp, xm, z.clone(), z]).unwrap();
        let v = LaurentMatrix::identity(&r, 2).add(&e).unwrap();
        let w = v.inverse_near_identity().unwrap();
        assert!(v.mul(&w).unwrap().is_identity());
        let d = datum(v, w, &r, 2);
        let g = glue_modules(&d).unwrap();
        let rep = verify_base_change(&g, &d).unwrap();
        assert!(rep.ok, "{rep:?}");
        let dropped = verify_base_change(&g.drop_generator().unwrap(), &d).unwrap();
        assert!(!dropped.ok);
        assert!(dropped.failures.iter().any(|f| f.contains("span")));
        let p = LaurentMatrix::from_entries(&r, 1, 1, vec![LaurentPoly::constant(&TeichPoly::constant(&r, 2))]).unwrap();
        let bad = datum(p, LaurentMatrix::identity(&r, 1), &r, 3);
        assert!(matches!(glue_modules(&bad), Err(Error::ApproximantNotFound(3))));
    }

    #[test]
    fn kernel_matches_enumeration() {
        // tiny caps: C = F_2, rank 1
        let r = TeichRing::new(2, 1, &["x"], Rational64::from_integer(1), 0);
        let id = LaurentMatrix::identity(&r, 1);
        let d = datum(id.clone(), id.clone(), &r, 0);
        let cov = Covering::new(&d).unwrap();
        let s = [cov.a1.window_space(), cov.a2.window_space()];
        let middle = direct_sum(&s);
        let target = direct_sum(&[cov.a12.window_space()]);
        let psi = psi_columns(&cov, &id).unwrap();
        let zq = cov.c.zq();
        assert!(middle.dim <= 16);
        let mut count = 0u64;
        for bits in 0..(1u64 << middle.dim) {
            let v: Vec<u32> = (0..middle.dim).map(|i| ((bits >> i) & 1) as u32).collect();
            if target.is_zero(&apply(zq, target.dim, &psi, &v)) {
                count += 1;
            }
        }
        let ker_classes = count.trailing_zeros() as u64 - middle.rel.length();
        assert_eq!(ker_classes, map_lengths(&middle, &target, &psi).kernel);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn random_near_identity_factors(seed in 0u64..10_000) {
            let r = TeichRing::new(2, 3, &["x"], Rational64::from_integer(3), 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut entries = Vec::new();
            for _ in 0..4 {
                let mut e = LaurentPoly::zero(&r);
                for _ in 0..3 {
                    let j = rng.gen_range(-2i64..=2);
                    let k = rng.gen_range(0..3u32);
                    let deg = rng.gen_range(0..=4i64);
                    let c = TeichPoly::var_pow(&r, 0, Rational64::new(deg, 2)).unwrap().scale(2i64.pow(k));
                    if c.weighted_norm() >= NormExponent::int(2) {
                        e = e.add(&LaurentPoly::monomial(&c, j)).unwrap();
                    }
                }
                entries.push(e);
            }
            let e = LaurentMatrix::from_entries(&r, 2, 2, entries).unwrap();
            let u = LaurentMatrix::identity(&r, 2).add(&e).unwrap();
            let f = factor_near_identity(&u).unwrap();
            proptest::prop_assert_eq!(f.u1.mul(&f.u2).unwrap(), u);
            proptest::prop_assert!(f.u1.supported_in(0, i64::MAX) && f.u2.supported_in(i64::MIN, 0));
            proptest::prop_assert!(f.residuals.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn split_recombines_without_norm_loss(seed in 0u64..10_000) {
            let r = ring();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut e = LaurentPoly::zero(&r);
            for _ in 0..4 {
                let c = TeichPoly::var_pow(&r, 0, Rational64::new(rng.gen_range(0..4), 2)).unwrap().scale(rng.gen_range(1..4));
                e = e.add(&LaurentPoly::monomial(&c, rng.gen_range(-3..=3))).unwrap();
            }
            let (a, b) = split_overlap(&e);
            proptest::prop_assert_eq!(a.add(&b).unwrap(), e.clone());
            proptest::prop_assert!(a.alpha() >= e.alpha() && b.alpha() >= e.alpha());
        }
    }
}
