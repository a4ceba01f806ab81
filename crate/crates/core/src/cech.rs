//! Finite-stage linearizations of Teichmuller models and of the covering rings
//! `C<T>/(gT - f)`, `C<T^-1>/(g - T^-1 f)` and `C<T, T^-1>/(gT - f)`, with
//! rank checks of the two-term Cech complex.
//!
//! A covering ring is modelled on a window of T-powers. Relations are taken in
//! a larger window and only those lying entirely inside it are used; the ring
//! is the image of the small window in that quotient. Growing the outer window
//! until the image length stops changing computes the colimit exactly for the
//! Artinian bases used here.

use crate::error::{Error, Result};
use crate::fpring::{ideal_membership, PerfMonomial, PerfPoly};
use crate::linalg::{self, apply, map_lengths, sparse_triplets, Echelon, MapLengths, QuotientSpace};
use crate::norm::NormExponent;
use crate::witt::{TeichPoly, TeichRing, WittVec};
use crate::Zq;
use num_rational::Rational64;
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

/// Upper bound on the number of coordinates of any linearized space.
pub const DIM_LIMIT: usize = 8192;

/// Laurent polynomial in `T` over a Teichmuller model. Exact: T-powers are
/// never truncated.
#[derive(Clone, PartialEq, Eq)]
pub struct LaurentPoly {
    ring: Arc<TeichRing>,
    coeffs: BTreeMap<i64, TeichPoly>,
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(j, c)| match j {
                0 => format!("({c})"),
                _ => format!("({c})*T^{j}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl LaurentPoly {
    pub fn zero(ring: &Arc<TeichRing>) -> Self {
        LaurentPoly { ring: ring.clone(), coeffs: BTreeMap::new() }
    }

    pub fn one(ring: &Arc<TeichRing>) -> Self {
        Self::constant(&TeichPoly::one(ring))
    }

    pub fn constant(c: &TeichPoly) -> Self {
        Self::monomial(c, 0)
    }

    /// `c T^j`.
    pub fn monomial(c: &TeichPoly, j: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(j, c.clone());
        }
        LaurentPoly { ring: c.ring().clone(), coeffs }
    }

    pub fn ring(&self) -> &Arc<TeichRing> {
        &self.ring
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, TeichPoly> {
        &self.coeffs
    }

    pub fn coeff(&self, j: i64) -> TeichPoly {
        self.coeffs.get(&j).cloned().unwrap_or_else(|| TeichPoly::zero(&self.ring))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Smallest and largest T-power present.
    pub fn degree_range(&self) -> Option<(i64, i64)> {
        Some((*self.coeffs.keys().next()?, *self.coeffs.keys().next_back()?))
    }

    fn insert_add(map: &mut BTreeMap<i64, TeichPoly>, j: i64, c: TeichPoly) -> Result<()> {
        let v = match map.remove(&j) {
            Some(old) => old.add(&c)?,
            None => c,
        };
        if !v.is_zero() {
            map.insert(j, v);
        }
        Ok(())
    }

    pub fn add(&self, o: &LaurentPoly) -> Result<LaurentPoly> {
        let mut coeffs = self.coeffs.clone();
        for (&j, c) in &o.coeffs {
            Self::insert_add(&mut coeffs, j, c.clone())?;
        }
        Ok(LaurentPoly { ring: self.ring.clone(), coeffs })
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly { ring: self.ring.clone(), coeffs: self.coeffs.iter().map(|(&j, c)| (j, c.neg())).collect() }
    }

    pub fn sub(&self, o: &LaurentPoly) -> Result<LaurentPoly> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &LaurentPoly) -> Result<LaurentPoly> {
        let mut coeffs = BTreeMap::new();
        for (&i, a) in &self.coeffs {
            for (&j, b) in &o.coeffs {
                let c = a.mul(b)?;
                if !c.is_zero() {
                    Self::insert_add(&mut coeffs, i + j, c)?;
                }
            }
        }
        Ok(LaurentPoly { ring: self.ring.clone(), coeffs })
    }

    pub fn mul_coeff(&self, c: &TeichPoly) -> Result<LaurentPoly> {
        self.mul(&LaurentPoly::constant(c))
    }

    pub fn scale(&self, k: i64) -> LaurentPoly {
        LaurentPoly {
            ring: self.ring.clone(),
            coeffs: self.coeffs.iter().map(|(&j, c)| (j, c.scale(k))).filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn shift(&self, k: i64) -> LaurentPoly {
        LaurentPoly { ring: self.ring.clone(), coeffs: self.coeffs.iter().map(|(&j, c)| (j + k, c.clone())).collect() }
    }

    /// Gauss norm exponent with `|T| = 1`: min over coefficients.
    pub fn alpha(&self) -> NormExponent {
        self.coeffs.values().map(|c| c.weighted_norm()).fold(NormExponent::INFINITY, NormExponent::min)
    }

    /// Nonnegative T-powers go to the first piece, negative ones to the second.
    pub fn split(&self) -> (LaurentPoly, LaurentPoly) {
        let (a, b): (BTreeMap<_, _>, BTreeMap<_, _>) = self.coeffs.clone().into_iter().partition(|(j, _)| *j >= 0);
        (LaurentPoly { ring: self.ring.clone(), coeffs: a }, LaurentPoly { ring: self.ring.clone(), coeffs: b })
    }
}

/// A Teichmuller model with an ordered monomial basis and optional extra
/// relations, seen as a finite `Z/p^n`-module.
#[derive(Debug)]
pub struct LinearizedRing {
    ring: Arc<TeichRing>,
    basis: Vec<PerfMonomial>,
    index: HashMap<PerfMonomial, usize>,
    relations: Vec<TeichPoly>,
    rel: Echelon,
}

/// Free linearization with respect to the Teichmuller monomial basis.
pub fn linearize(ring: &Arc<TeichRing>, limit: usize) -> Result<Arc<LinearizedRing>> {
    linearize_quotient(ring, &[], limit)
}

/// Linearization of the quotient by the ideal generated by `relations`.
pub fn linearize_quotient(ring: &Arc<TeichRing>, relations: &[TeichPoly], limit: usize) -> Result<Arc<LinearizedRing>> {
    let cap = limit / ring.n().max(1) as usize;
    let basis = ring
        .monomials(cap)
        .ok_or_else(|| Error::ResourceBound(format!("linearization exceeds {limit} coordinates")))?;
    let index: HashMap<PerfMonomial, usize> = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut rel = Echelon::new(ring.zq(), basis.len());
    for r in relations {
        if r.ring() != ring {
            return Err(Error::RingMismatch);
        }
        for m in &basis {
            let row = r.mul(&TeichPoly::monomial(ring, m.clone(), 1))?.to_vector(&index, basis.len())?;
            rel.insert(row);
        }
    }
    Ok(Arc::new(LinearizedRing { ring: ring.clone(), basis, index, relations: relations.to_vec(), rel }))
}

impl LinearizedRing {
    pub fn ring(&self) -> &Arc<TeichRing> {
        &self.ring
    }
    pub fn zq(&self) -> Zq {
        self.ring.zq()
    }
    pub fn basis(&self) -> &[PerfMonomial] {
        &self.basis
    }
    pub fn relations(&self) -> &[TeichPoly] {
        &self.relations
    }
    pub fn relation_echelon(&self) -> &Echelon {
        &self.rel
    }
    /// Number of basis monomials (rank of the ambient free module).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
    /// Length as a `Z/p^n`-module, i.e. dimension counted in p-digits.
    pub fn dim(&self) -> u64 {
        self.space().length()
    }
    pub fn space(&self) -> QuotientSpace {
        QuotientSpace::new(self.basis.len(), self.rel.clone())
    }

    /// Labels `monomial * p^k` of the p-digit basis.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in &self.basis {
            let t = TeichPoly::monomial(&self.ring, m.clone(), 1);
            for k in 0..self.ring.n() {
                out.push(format!("{t}*p^{k}"));
            }
        }
        out
    }

    pub fn vector(&self, a: &TeichPoly) -> Result<Vec<u32>> {
        a.to_vector(&self.index, self.basis.len())
    }

    pub fn element(&self, v: &[u32]) -> TeichPoly {
        TeichPoly::from_vector(&self.ring, &self.basis, v)
    }

    pub fn index_of(&self, m: &PerfMonomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Columns of multiplication by `a` on the monomial basis.
    pub fn mul_matrix(&self, a: &TeichPoly) -> Result<Vec<Vec<u32>>> {
        self.basis
            .iter()
            .map(|m| self.vector(&a.mul(&TeichPoly::monomial(&self.ring, m.clone(), 1))?))
            .collect()
    }

    /// Multiplication matrices of the generators `[x_i^(1/p^N)]`.
    pub fn generator_matrices(&self) -> Result<Vec<Vec<Vec<u32>>>> {
        (0..self.ring.nvars())
            .map(|i| {
                let g = TeichPoly::var_pow(&self.ring, i, Rational64::new(1, self.ring.scale()))?;
                self.mul_matrix(&g)
            })
            .collect()
    }

    /// Uniformly random element of the ambient module.
    pub fn random_element<R: Rng>(&self, rng: &mut R) -> TeichPoly {
        let q = self.zq().q;
        let v: Vec<u32> = (0..self.basis.len()).map(|_| rng.gen_range(0..q)).collect();
        self.element(&v)
    }

    /// Matrix products against structured products on random pairs. Returns
    /// the number of pairs checked.
    pub fn cross_check<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<usize> {
        let gens = self.generator_matrices()?;
        let zq = self.zq();
        let m = self.basis.len();
        for _ in 0..samples {
            let a = self.random_element(rng);
            let b = self.random_element(rng);
            let lhs = self.vector(&a.mul(&b)?)?;
            let rhs = apply(zq, m, &self.mul_matrix(&a)?, &self.vector(&b)?);
            if lhs != rhs {
                return Err(Error::Invalid(format!("matrix product differs for a = {a}, b = {b}")));
            }
            for (i, gm) in gens.iter().enumerate() {
                let g = TeichPoly::var_pow(&self.ring, i, Rational64::new(1, self.ring.scale()))?;
                if apply(zq, m, gm, &self.vector(&b)?) != self.vector(&g.mul(&b)?)? {
                    return Err(Error::Invalid(format!("generator matrix {i} disagrees")));
                }
            }
        }
        Ok(samples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `C<T>/(gT - f)`.
    T,
    /// `C<T^-1>/(g - T^-1 f)`.
    TInv,
    /// `C<T, T^-1>/(gT - f)`.
    Both,
}

/// One ring of the covering, as the image of a T-window in a saturated
/// quotient of a larger window.
#[derive(Debug)]
pub struct LocalizationRing {
    base: Arc<LinearizedRing>,
    f: TeichPoly,
    g: TeichPoly,
    side: Side,
    dt: i64,
    ext: i64,
    blocks: Vec<i64>,
    block_pos: HashMap<i64, usize>,
    order: Vec<usize>,
    pos_in_block: Vec<usize>,
    window_start: usize,
    rel: Echelon,
    window: QuotientSpace,
}

fn check_covering(f: &TeichPoly, g: &TeichPoly) -> Result<()> {
    let one = TeichPoly::one(f.ring());
    if *g == one || *g == one.sub(f)? {
        Ok(())
    } else {
        Err(Error::UnsupportedCovering)
    }
}

/// Builds a covering ring, growing the saturation window until the image of
/// the T-window stabilizes.
pub fn localization_ring(
    base: &Arc<LinearizedRing>,
    f: &TeichPoly,
    g: &TeichPoly,
    side: Side,
    dt: u32,
) -> Result<Arc<LocalizationRing>> {
    localization_ring_from(base, f, g, side, dt, dt.max(1))
}

/// As `localization_ring`, starting the saturation search at `min_ext`.
pub fn localization_ring_from(
    base: &Arc<LinearizedRing>,
    f: &TeichPoly,
    g: &TeichPoly,
    side: Side,
    dt: u32,
    min_ext: u32,
) -> Result<Arc<LocalizationRing>> {
    check_covering(f, g)?;
    let step = dt.max(1);
    let mut ext = min_ext.max(dt);
    let mut prev = LocalizationRing::build(base, f, g, side, dt as i64, ext as i64)?;
    loop {
        ext += step;
        let next = LocalizationRing::build(base, f, g, side, dt as i64, ext as i64)?;
        if next.window.length() == prev.window.length() {
            return Ok(Arc::new(prev));
        }
        prev = next;
    }
}

impl LocalizationRing {
    /// Fixed saturation `ext`.
    pub fn build(base: &Arc<LinearizedRing>, f: &TeichPoly, g: &TeichPoly, side: Side, dt: i64, ext: i64) -> Result<Self> {
        if f.ring() != base.ring() || g.ring() != base.ring() {
            return Err(Error::ResourceBound("caps of f, g differ from those of C".into()));
        }
        check_covering(f, g)?;
        let (wlo, whi, elo, ehi) = match side {
            Side::T => (0, dt, 0, dt + ext),
            Side::TInv => (-dt, 0, -dt - ext, 0),
            Side::Both => (-dt, dt, -dt - ext, dt + ext),
        };
        let rank = base.rank();
        let nblocks = (ehi - elo + 1) as usize;
        if nblocks * rank > DIM_LIMIT {
            return Err(Error::ResourceBound(format!("{} coordinates exceed {DIM_LIMIT}", nblocks * rank)));
        }
        let outer = |j: &i64| !(wlo..=whi).contains(j);
        let key = |j: &i64| (std::cmp::Reverse(j.abs()), std::cmp::Reverse(*j));
        let mut out_blocks: Vec<i64> = (elo..=ehi).filter(outer).collect();
        let mut in_blocks: Vec<i64> = (wlo..=whi).collect();
        out_blocks.sort_by_key(key);
        in_blocks.sort_by_key(key);
        let window_start = out_blocks.len() * rank;
        let blocks: Vec<i64> = out_blocks.into_iter().chain(in_blocks).collect();
        let block_pos = blocks.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        let ring = base.ring();
        let mut order: Vec<usize> = (0..rank).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(base.basis[i].total()), std::cmp::Reverse(i)));
        let mut pos_in_block = vec![0; rank];
        for (pos, &i) in order.iter().enumerate() {
            pos_in_block[i] = pos;
        }
        let mut me = LocalizationRing {
            base: base.clone(),
            f: f.clone(),
            g: g.clone(),
            side,
            dt,
            ext,
            blocks,
            block_pos,
            order,
            pos_in_block,
            window_start,
            rel: Echelon::new(ring.zq(), nblocks * rank),
            window: QuotientSpace::free(ring.zq(), 0),
        };
        let rpoly = me.relation_poly()?;
        let (rlo, rhi) = rpoly.degree_range().unwrap_or((0, 0));
        let mut rel = Echelon::new(ring.zq(), nblocks * rank);
        for j in elo..=ehi {
            for row in base.rel.rows() {
                let mut v = vec![0u32; nblocks * rank];
                for (i, &c) in row.iter().enumerate() {
                    v[me.col(j, i)] = c;
                }
                rel.insert(v);
            }
        }
        for shift in (elo - rlo)..=(ehi - rhi) {
            for m in base.basis() {
                let r = rpoly.mul_coeff(&TeichPoly::monomial(ring, m.clone(), 1))?.shift(shift);
                rel.insert(me.to_ext(&r)?);
            }
        }
        let window_rel = Echelon::from_rows(ring.zq(), nblocks * rank - window_start, rel.tail_rows(window_start));
        me.window = QuotientSpace::new(nblocks * rank - window_start, window_rel);
        me.rel = rel;
        Ok(me)
    }

    fn col(&self, j: i64, i: usize) -> usize {
        self.block_pos[&j] * self.base.rank() + self.pos_in_block[i]
    }

    pub fn base(&self) -> &Arc<LinearizedRing> {
        &self.base
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn f(&self) -> &TeichPoly {
        &self.f
    }
    pub fn g(&self) -> &TeichPoly {
        &self.g
    }
    pub fn dt(&self) -> i64 {
        self.dt
    }
    /// Saturation margin beyond the window.
    pub fn ext(&self) -> i64 {
        self.ext
    }

    /// `gT - f`, or `g - T^-1 f` on the `T^-1` side.
    pub fn relation_poly(&self) -> Result<LaurentPoly> {
        let ring = self.base.ring();
        match self.side {
            Side::T | Side::Both => LaurentPoly::monomial(&self.g, 1).sub(&LaurentPoly::constant(&self.f)),
            Side::TInv => LaurentPoly::constant(&self.g).sub(&LaurentPoly::monomial(&self.f, -1)),
        }
        .map(|r| if r.ring() == ring { r } else { unreachable!() })
    }

    /// T-powers of the window, in coordinate order.
    pub fn window_blocks(&self) -> &[i64] {
        &self.blocks[self.window_start / self.base.rank()..]
    }

    pub fn window_range(&self) -> (i64, i64) {
        match self.side {
            Side::T => (0, self.dt),
            Side::TInv => (-self.dt, 0),
            Side::Both => (-self.dt, self.dt),
        }
    }

    /// The window as a quotient space (coordinates = window block columns).
    pub fn window_space(&self) -> &QuotientSpace {
        &self.window
    }

    /// Length of the ring at this stage.
    pub fn length(&self) -> u64 {
        self.window.length()
    }

    /// `(T-power, basis index)` of every saturation coordinate.
    pub fn ext_labels(&self) -> Vec<(i64, usize)> {
        self.blocks.iter().flat_map(|&j| self.order.iter().map(move |&i| (j, i))).collect()
    }

    /// Relations on the saturation coordinates.
    pub fn relation_echelon(&self) -> &Echelon {
        &self.rel
    }

    /// First saturation coordinate belonging to the window.
    pub fn window_start(&self) -> usize {
        self.window_start
    }

    pub fn ext_dim(&self) -> usize {
        self.blocks.len() * self.base.rank()
    }

    pub fn to_ext(&self, a: &LaurentPoly) -> Result<Vec<u32>> {
        let mut v = vec![0u32; self.ext_dim()];
        for (&j, c) in a.coeffs() {
            if !self.block_pos.contains_key(&j) {
                return Err(Error::ResourceBound(format!("T^{j} outside the saturation window")));
            }
            for (i, x) in self.base.vector(c)?.into_iter().enumerate() {
                if x != 0 {
                    v[self.col(j, i)] = x;
                }
            }
        }
        Ok(v)
    }

    pub fn from_ext(&self, v: &[u32]) -> LaurentPoly {
        let ring = self.base.ring();
        let rank = self.base.rank();
        let mut out = LaurentPoly::zero(ring);
        for (b, &j) in self.blocks.iter().enumerate() {
            let mut cv = vec![0u32; rank];
            let mut any = false;
            for pos in 0..rank {
                let x = v[b * rank + pos];
                if x != 0 {
                    cv[self.order[pos]] = x;
                    any = true;
                }
            }
            if any {
                out.coeffs.insert(j, self.base.element(&cv));
            }
        }
        out
    }

    /// Canonical representative: outer T-powers and high-degree monomials are
    /// eliminated first.
    pub fn normal_form(&self, a: &LaurentPoly) -> Result<LaurentPoly> {
        Ok(self.from_ext(&self.rel.reduce(&self.to_ext(a)?)))
    }

    pub fn is_zero(&self, a: &LaurentPoly) -> Result<bool> {
        Ok(self.rel.contains(&self.to_ext(a)?))
    }

    pub fn equal(&self, a: &LaurentPoly, b: &LaurentPoly) -> Result<bool> {
        self.is_zero(&a.sub(b)?)
    }

    pub fn mul(&self, a: &LaurentPoly, b: &LaurentPoly) -> Result<LaurentPoly> {
        self.normal_form(&a.mul(b)?)
    }

    /// Coordinates of an element supported in the window (after reduction).
    pub fn window_vector(&self, a: &LaurentPoly) -> Result<Vec<u32>> {
        let mut v = self.to_ext(a)?;
        if v[..self.window_start].iter().any(|&x| x != 0) {
            v = self.rel.reduce(&v);
            if v[..self.window_start].iter().any(|&x| x != 0) {
                return Err(Error::ResourceBound("element does not reduce into the T-window".into()));
            }
        }
        Ok(v[self.window_start..].to_vec())
    }

    pub fn window_element(&self, w: &[u32]) -> LaurentPoly {
        let mut v = vec![0u32; self.window_start];
        v.extend_from_slice(w);
        self.from_ext(&v)
    }

    /// `(T-power, basis index)` of each window coordinate.
    pub fn window_labels(&self) -> Vec<(i64, usize)> {
        self.window_blocks().iter().flat_map(|&j| self.order.iter().map(move |&i| (j, i))).collect()
    }

    /// Window coordinate of `c T^j` for a base basis index.
    pub fn window_col(&self, j: i64, i: usize) -> Option<usize> {
        let (lo, hi) = self.window_range();
        (lo..=hi).contains(&j).then(|| self.col(j, i) - self.window_start)
    }
}

/// Matrices of `0 -> C -> A1 (+) A2 -> A12 -> 0`.
#[derive(Debug, Clone)]
pub struct CechComplex {
    pub c: Arc<LinearizedRing>,
    pub a1: Arc<LocalizationRing>,
    pub a2: Arc<LocalizationRing>,
    pub a12: Arc<LocalizationRing>,
    /// Columns indexed by basis of C, rows by window coordinates of A1 then A2.
    pub map1: Vec<Vec<u32>>,
    /// Columns indexed by window coordinates of A1 then A2, rows by those of A12.
    pub map2: Vec<Vec<u32>>,
}

pub fn cech_complex(c: &Arc<LinearizedRing>, f: &TeichPoly, g: &TeichPoly, dt: u32) -> Result<CechComplex> {
    let a1 = localization_ring(c, f, g, Side::T, dt)?;
    let a2 = localization_ring(c, f, g, Side::TInv, dt)?;
    let start = a1.ext().max(a2.ext()) as u32;
    let a12 = localization_ring_from(c, f, g, Side::Both, dt, start)?;
    let w1 = a1.window_space().dim;
    let w2 = a2.window_space().dim;
    let w12 = a12.window_space().dim;
    let mut map1 = Vec::with_capacity(c.rank());
    for i in 0..c.rank() {
        let mut col = vec![0u32; w1 + w2];
        col[a1.window_col(0, i).expect("T^0 in window")] = 1;
        col[w1 + a2.window_col(0, i).expect("T^0 in window")] = 1;
        map1.push(col);
    }
    let minus_one = c.zq().neg(1);
    let mut map2 = Vec::with_capacity(w1 + w2);
    for (ring, sign) in [(&a1, 1u32), (&a2, minus_one)] {
        for (j, i) in ring.window_labels() {
            let mut col = vec![0u32; w12];
            col[a12.window_col(j, i).expect("pieces embed in the overlap window")] = sign;
            map2.push(col);
        }
    }
    Ok(CechComplex { c: c.clone(), a1, a2, a12, map1, map2 })
}

impl CechComplex {
    /// `A1 (+) A2` as a quotient space.
    pub fn middle(&self) -> QuotientSpace {
        let w1 = self.a1.window_space().dim;
        let w2 = self.a2.window_space().dim;
        let zq = self.c.zq();
        let mut rel = Echelon::new(zq, w1 + w2);
        for r in self.a1.window_space().rel.rows() {
            let mut v = r.to_vec();
            v.resize(w1 + w2, 0);
            rel.insert(v);
        }
        for r in self.a2.window_space().rel.rows() {
            let mut v = vec![0u32; w1];
            v.extend_from_slice(r);
            rel.insert(v);
        }
        QuotientSpace::new(w1 + w2, rel)
    }

    /// Negative control: drops the `T^0` constant column of the second piece
    /// from the difference map.
    pub fn corrupt_map2(&self) -> CechComplex {
        let mut out = self.clone();
        let w1 = self.a1.window_space().dim;
        let one = self.c.index_of(&PerfMonomial::one(self.c.ring().nvars())).expect("constant monomial");
        let col = w1 + self.a2.window_col(0, one).expect("T^0 in window");
        out.map2[col] = vec![0; out.map2[col].len()];
        out
    }

    /// Negative control: drops the first-piece component of the image of 1.
    /// Detectable even when the overlap ring vanishes.
    pub fn corrupt_map1(&self) -> CechComplex {
        let mut out = self.clone();
        let one = self.c.index_of(&PerfMonomial::one(self.c.ring().nvars())).expect("constant monomial");
        out.map1[one][self.a1.window_col(0, one).expect("T^0 in window")] = 0;
        out
    }

    pub fn map1_triplets(&self) -> String {
        sparse_triplets(self.c.zq(), self.a1.window_space().dim + self.a2.window_space().dim, &self.map1)
    }

    pub fn map2_triplets(&self) -> String {
        sparse_triplets(self.c.zq(), self.a12.window_space().dim, &self.map2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    pub node: String,
    /// For the last node this is the cokernel length.
    pub kernel_dim: u64,
    pub image_dim: u64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub p: u32,
    pub n: u32,
    pub d: String,
    pub depth: u32,
    pub dt: i64,
    pub ext: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactnessReport {
    pub qualifier: String,
    pub caps: Caps,
    pub dims: [u64; 3],
    pub nodes: Vec<RankReport>,
    pub composite_zero: bool,
    /// `H^0 -> C` built by solving and checked in both directions.
    pub h0_inverse: bool,
    pub exact: bool,
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

pub fn check_exactness(cx: &CechComplex) -> ExactnessReport {
    let zq = cx.c.zq();
    let cs = cx.c.space();
    let mid = cx.middle();
    let over = cx.a12.window_space();
    let l1: MapLengths = map_lengths(&cs, &mid, &cx.map1);
    let l2: MapLengths = map_lengths(&mid, over, &cx.map2);
    let composite_zero = cx.map1.iter().all(|col| over.is_zero(&apply(zq, over.dim, &cx.map2, col)));
    let n1 = l1.injective();
    let n2 = l2.well_defined && composite_zero && l2.kernel == l1.image;
    let n3 = l2.surjective();
    let nodes = vec![
        RankReport { node: "C".into(), kernel_dim: l1.kernel, image_dim: l1.image, verdict: verdict(n1) },
        RankReport { node: "A1+A2".into(), kernel_dim: l2.kernel, image_dim: l1.image, verdict: verdict(n2) },
        RankReport { node: "A12".into(), kernel_dim: l2.target - l2.image, image_dim: l2.image, verdict: verdict(n3) },
    ];
    let h0_inverse = n1 && n2 && h0_inverse(cx, &cs, &mid);
    ExactnessReport {
        qualifier: "finite-stage".into(),
        caps: Caps {
            p: zq.p,
            n: zq.n,
            d: crate::norm::rat_string(cx.c.ring().d()),
            depth: cx.c.ring().depth(),
            dt: cx.a12.dt(),
            ext: cx.a12.ext(),
        },
        dims: [cs.length(), mid.length(), over.length()],
        nodes,
        composite_zero,
        h0_inverse,
        exact: n1 && n2 && n3,
    }
}

/// Solves `map1(c) = k` for generators `k` of `ker map2`, then checks
/// `map1(inv(k)) = k` and `inv(map1(e_i)) = e_i`.
fn h0_inverse(cx: &CechComplex, cs: &QuotientSpace, mid: &QuotientSpace) -> bool {
    let zq = cx.c.zq();
    let over = cx.a12.window_space();
    let wm = mid.dim;
    let mut gens2 = cx.map2.clone();
    gens2.extend(over.rel.rows().map(|r| r.to_vec()));
    let ker = linalg::kernel(zq, over.dim, &gens2);
    let mut gens1 = cx.map1.clone();
    gens1.extend(mid.rel.rows().map(|r| r.to_vec()));
    let rank = cs.dim;
    let inv = |k: &[u32]| -> Option<Vec<u32>> { linalg::solve(zq, wm, &gens1, k).map(|c| c[..rank].to_vec()) };
    for row in ker.rows() {
        let k = &row[..wm];
        let Some(c) = inv(k) else { return false };
        let back = apply(zq, wm, &cx.map1, &c);
        let diff: Vec<u32> = back.iter().zip(k).map(|(a, b)| zq.sub(*a, *b)).collect();
        if !mid.is_zero(&diff) {
            return false;
        }
    }
    for i in 0..rank {
        let Some(c) = inv(&cx.map1[i]) else { return false };
        let mut diff = c;
        diff[i] = zq.sub(diff[i], 1);
        if !cs.is_zero(&diff) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrictnessReport {
    /// Largest `alpha(x y) - alpha(y)` over the swept basis.
    pub constant: NormExponent,
    pub swept: usize,
    /// Basis elements whose product vanished at truncation (not counted).
    pub truncated: usize,
}

/// Sweeps `y = p^k [m] T^j` over the finite basis of `A<T>` (T-degree at most
/// `dt`) and reports the worst norm drop of multiplication by
/// `x = sum_i coeffs[i] T^i`. The coefficients must generate the unit ideal.
pub fn check_strict_multiplication(coeffs: &[WittVec], dt: u32, monomial_limit: usize) -> Result<StrictnessReport> {
    let first = coeffs.first().ok_or_else(|| Error::Invalid("no coefficients".into()))?;
    let ring = first.ring().clone();
    let n = first.len();
    let gens: Vec<PerfPoly> = coeffs.iter().map(|c| c.coords()[0].clone()).collect();
    if ideal_membership(&PerfPoly::one(&ring), &gens)?.is_none() {
        return Err(Error::BadWitness("coefficients do not generate the unit ideal".into()));
    }
    let monos = ring
        .ambient_monomials(0, monomial_limit)
        .ok_or_else(|| Error::ResourceBound("too many basis monomials".into()))?;
    let mut constant = NormExponent::finite(Rational64::from_integer(i64::MIN / 4));
    let mut any = false;
    let mut swept = 0;
    let mut truncated = 0;
    for m in &monos {
        let t = WittVec::teichmuller(&PerfPoly::from_monomial(&ring, m.clone(), 1), n);
        for k in 0..n {
            let y = match t.scale_int((ring.p() as i64).pow(k as u32)) {
                Ok(y) => y,
                Err(Error::TruncationOverflow { .. }) => {
                    truncated += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if y.is_zero() {
                continue;
            }
            let ay = y.weighted_gauss_norm();
            for j in 0..=dt as usize {
                let mut axy = NormExponent::INFINITY;
                let mut overflow = false;
                for (i, c) in coeffs.iter().enumerate() {
                    if i + j <= dt as usize {
                        match c.mul(&y) {
                            Ok(cy) => axy = axy.min(cy.weighted_gauss_norm()),
                            Err(Error::TruncationOverflow { .. }) => overflow = true,
                            Err(e) => return Err(e),
                        }
                    }
                }
                if overflow {
                    truncated += 1;
                    continue;
                }
                swept += 1;
                match (axy.value(), ay.value()) {
                    (Some(a), Some(b)) => {
                        let drop = NormExponent::finite(a - b);
                        if !any || drop > constant {
                            constant = drop;
                        }
                        any = true;
                    }
                    _ => truncated += 1,
                }
            }
        }
    }
    Ok(StrictnessReport { constant: if any { constant } else { NormExponent::INFINITY }, swept, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpring::{PrecisionBudget, RingPresentation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tring(n: u32, d: i64, depth: u32) -> Arc<TeichRing> {
        TeichRing::new(2, n, &["x"], Rational64::from_integer(d), depth)
    }

    fn tx(r: &Arc<TeichRing>) -> TeichPoly {
        TeichPoly::var_pow(r, 0, Rational64::from_integer(1)).unwrap()
    }

    #[test]
    fn linearization_examples() {
        let c1 = linearize(&tring(1, 2, 1), 100).unwrap();
        assert_eq!(c1.dim(), 4);
        assert_eq!(c1.labels().len(), 4);
        assert_eq!(linearize(&tring(2, 2, 1), 100).unwrap().dim(), 8);
        let deg = TeichRing::new(2, 2, &["x"], Rational64::new(1, 2), 1);
        assert_eq!(linearize(&deg, 100).unwrap().dim(), 2);
        assert!(matches!(linearize(&tring(2, 4, 3), 16), Err(Error::ResourceBound(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(linearize(&tring(2, 2, 2), 1000).unwrap().cross_check(50, &mut rng).unwrap(), 50);
    }

    #[test]
    fn localization_examples() {
        let r = tring(2, 4, 2);
        let c = linearize(&r, 2000).unwrap();
        let one = TeichPoly::one(&r);
        let x = tx(&r);
        let a1 = localization_ring(&c, &x, &one, Side::T, 2).unwrap();
        assert_eq!(a1.length(), c.dim());
        let t = LaurentPoly::monomial(&one, 1);
        assert!(a1.equal(&t, &LaurentPoly::constant(&x)).unwrap());
        let a2 = localization_ring(&c, &x, &one, Side::TInv, 2).unwrap();
        let tinv = LaurentPoly::monomial(&one, -1);
        let prod = a2.mul(&tinv, &LaurentPoly::constant(&x)).unwrap();
        assert!(a2.equal(&prod, &LaurentPoly::one(&r)).unwrap());
        assert!(matches!(localization_ring(&c, &x, &x, Side::T, 2), Err(Error::UnsupportedCovering)));
        let other = tring(2, 3, 2);
        assert!(matches!(cech_complex(&c, &tx(&other), &TeichPoly::one(&other), 2), Err(Error::ResourceBound(_))));
    }

    #[test]
    fn unit_parameter_gives_isomorphic_pieces() {
        let r = tring(2, 2, 1);
        let c = linearize(&r, 2000).unwrap();
        let one = TeichPoly::one(&r);
        let f = one.add(&tx(&r)).unwrap();
        for side in [Side::T, Side::TInv, Side::Both] {
            assert_eq!(localization_ring(&c, &f, &one, side, 1).unwrap().length(), c.dim(), "{side:?}");
        }
    }

    #[test]
    fn exactness_small() {
        let r = tring(2, 2, 1);
        let c = linearize(&r, 2000).unwrap();
        let one = TeichPoly::one(&r);
        let x = tx(&r);
        for (f, g) in [(x.clone(), one.clone()), (x.clone(), one.sub(&x).unwrap()), (one.add(&x).unwrap(), one.clone())] {
            let cx = cech_complex(&c, &f, &g, 1).unwrap();
            let rep = check_exactness(&cx);
            assert!(rep.exact && rep.h0_inverse && rep.composite_zero, "{rep:?}");
            assert_eq!(rep.dims[0] + rep.dims[2], rep.dims[1]);
        }
        let cx = cech_complex(&c, &one.add(&x).unwrap(), &one, 1).unwrap();
        let bad = check_exactness(&cx.corrupt_map2());
        assert!(!bad.exact);
        let bad = check_exactness(&cech_complex(&c, &x, &one, 1).unwrap().corrupt_map1());
        assert_eq!(bad.nodes[0].verdict, "fail");
        assert!(bad.nodes.iter().any(|n| n.verdict == "fail"));
        assert!(cx.map2_triplets().starts_with(&format!("{} ", cx.a12.window_space().dim)));
    }

    #[test]
    fn strict_multiplication_examples() {
        let free = RingPresentation::free(2, &["x"], PrecisionBudget::simple(2, 3, 0));
        let one = WittVec::one(&free, 2);
        let rep = check_strict_multiplication(std::slice::from_ref(&one), 2, 100).unwrap();
        assert_eq!(rep.constant, NormExponent::int(0));
        let lr = RingPresentation::new(2, &[("x", true)], &[], PrecisionBudget::simple(2, 3, 0).with_l(2)).unwrap();
        let xl = WittVec::teichmuller(&PerfPoly::parse(&lr, "x").unwrap(), 2);
        let rep = check_strict_multiplication(&[xl, WittVec::one(&lr, 2)], 2, 100).unwrap();
        assert_eq!(rep.constant, NormExponent::int(1));
        let xf = WittVec::teichmuller(&PerfPoly::parse(&free, "x").unwrap(), 2);
        assert!(matches!(check_strict_multiplication(&[xf.clone(), xf], 2, 100), Err(Error::BadWitness(_))));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn linearized_products_agree(seed in 0u64..1000, n in 1u32..=2, d in 1i64..=3, depth in 0u32..=2) {
            let lin = linearize(&tring(n, d, depth), 4000).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            proptest::prop_assert_eq!(lin.cross_check(5, &mut rng).unwrap(), 5);
        }

        #[test]
        fn laurent_split_recombines(seed in 0u64..1000) {
            let r = tring(2, 3, 1);
            let lin = linearize(&r, 4000).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = LaurentPoly::zero(&r);
            for j in -2..=2 {
                a = a.add(&LaurentPoly::monomial(&lin.random_element(&mut rng), j)).unwrap();
            }
            let (u, v) = a.split();
            proptest::prop_assert_eq!(u.add(&v).unwrap(), a);
            proptest::prop_assert!(u.coeffs().keys().all(|&j| j >= 0) && v.coeffs().keys().all(|&j| j < 0));
        }
    }
}
