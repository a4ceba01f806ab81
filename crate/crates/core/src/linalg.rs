//! Exact linear algebra over Z/p^n: Howell-form echelons, solving, kernels,
//! and quotient-space maps measured by module length.

use crate::arith::Zq;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
struct Row {
    val: u32,
    data: Vec<u32>,
}

/// Howell-form echelon of a submodule of (Z/q)^m.
///
/// Every stored row has leading entry exactly `p^v` at its pivot column, and
/// every module element whose first nonzero column is `c` has entry at `c`
/// divisible by the pivot power at `c`. Reduction against the rows is therefore
/// a complete membership test and yields canonical coset representatives.
#[derive(Debug, Clone)]
pub struct Echelon {
    zq: Zq,
    m: usize,
    mask: Option<u32>,
    rows: Vec<Option<Row>>,
}

impl Echelon {
    pub fn new(zq: Zq, m: usize) -> Self {
        let mask = if zq.p == 2 { Some(zq.q - 1) } else { None };
        Echelon { zq, m, mask, rows: vec![None; m] }
    }

    pub fn from_rows<I: IntoIterator<Item = Vec<u32>>>(zq: Zq, m: usize, rows: I) -> Self {
        let mut e = Echelon::new(zq, m);
        for r in rows {
            e.insert(r);
        }
        e
    }

    pub fn zq(&self) -> Zq {
        self.zq
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    /// `a[from..] -= s * b[from..]`
    #[inline]
    fn axpy(&self, a: &mut [u32], s: u32, b: &[u32], from: usize) {
        if s == 0 {
            return;
        }
        if let Some(mask) = self.mask {
            let ns = s.wrapping_neg();
            for (x, y) in a[from..].iter_mut().zip(&b[from..]) {
                *x = x.wrapping_add(ns.wrapping_mul(*y)) & mask;
            }
        } else {
            let q = self.zq.q as u64;
            let ns = (q - s as u64) % q;
            for (x, y) in a[from..].iter_mut().zip(&b[from..]) {
                if *y != 0 {
                    *x = ((*x as u64 + ns * *y as u64) % q) as u32;
                }
            }
        }
    }

    fn scale(&self, a: &mut [u32], s: u32, from: usize) {
        for x in a[from..].iter_mut() {
            *x = self.zq.mul(*x, s);
        }
    }

    /// Adds a vector to the spanning set. Returns true if the module grew.
    pub fn insert(&mut self, w: Vec<u32>) -> bool {
        assert_eq!(w.len(), self.m, "vector length mismatch");
        let mut grew = false;
        let mut work = vec![w];
        let n = self.zq.n;
        while let Some(mut w) = work.pop() {
            let mut c = 0usize;
            loop {
                while c < self.m && w[c] == 0 {
                    c += 1;
                }
                if c == self.m {
                    break;
                }
                let (u, vw) = self.zq.split(w[c]);
                match &self.rows[c] {
                    Some(r) if vw >= r.val => {
                        let s = w[c] / self.zq.p.pow(r.val);
                        let data = &self.rows[c].as_ref().unwrap().data;
                        let mut tmp = std::mem::take(&mut w);
                        self.axpy(&mut tmp, s, data, c);
                        w = tmp;
                        debug_assert_eq!(w[c], 0);
                    }
                    _ => {
                        let inv = self.zq.inv(u).unwrap();
                        self.scale(&mut w, inv, c);
                        if vw > 0 {
                            let mut cl = w.clone();
                            self.scale(&mut cl, self.zq.p_pow(n - vw), c);
                            work.push(cl);
                        }
                        let old = self.rows[c].replace(Row { val: vw, data: w });
                        grew = true;
                        if let Some(old) = old {
                            work.push(old.data);
                        }
                        break;
                    }
                }
            }
        }
        grew
    }

    /// Canonical representative of `w` modulo the module.
    pub fn reduce(&self, w: &[u32]) -> Vec<u32> {
        let mut w = w.to_vec();
        self.reduce_in_place(&mut w);
        w
    }

    pub fn reduce_in_place(&self, w: &mut [u32]) {
        for c in 0..self.m {
            if w[c] == 0 {
                continue;
            }
            if let Some(r) = &self.rows[c] {
                let s = w[c] / self.zq.p.pow(r.val);
                self.axpy(w, s, &r.data, c);
            }
        }
    }

    /// Reduces and also returns the multipliers used per pivot column.
    fn reduce_tracking(&self, w: &mut [u32], upto: usize) {
        for c in 0..upto.min(self.m) {
            if w[c] == 0 {
                continue;
            }
            if let Some(r) = &self.rows[c] {
                let s = w[c] / self.zq.p.pow(r.val);
                self.axpy(w, s, &r.data, c);
            }
        }
    }

    pub fn contains(&self, w: &[u32]) -> bool {
        self.reduce(w).iter().all(|&x| x == 0)
    }

    /// Module length: log_p of the cardinality.
    pub fn length(&self) -> u64 {
        self.rows.iter().flatten().map(|r| (self.zq.n - r.val) as u64).sum()
    }

    pub fn pivots(&self) -> Vec<(usize, u32)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.as_ref().map(|r| (c, r.val)))
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.rows.iter().flatten().map(|r| r.data.as_slice())
    }

    /// Length of the module restricted to columns `< k` being zero, i.e. the
    /// submodule of elements supported on columns `>= k`.
    pub fn tail_length(&self, k: usize) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(c, _)| *c >= k)
            .filter_map(|(_, r)| r.as_ref())
            .map(|r| (self.zq.n - r.val) as u64)
            .sum()
    }

    /// Generators of the submodule of elements vanishing on columns `< k`,
    /// restricted to columns `>= k`.
    pub fn tail_rows(&self, k: usize) -> Vec<Vec<u32>> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(c, _)| *c >= k)
            .filter_map(|(_, r)| r.as_ref())
            .map(|r| r.data[k..].to_vec())
            .collect()
    }
}

/// Solves `sum c_i gens[i] = target`. Returns coefficients if solvable.
pub fn solve(zq: Zq, m: usize, gens: &[Vec<u32>], target: &[u32]) -> Option<Vec<u32>> {
    let k = gens.len();
    let e = augmented(zq, m, gens);
    let mut w = vec![0u32; m + k];
    w[..m].copy_from_slice(target);
    e.reduce_tracking(&mut w, m);
    if w[..m].iter().any(|&x| x != 0) {
        return None;
    }
    Some(w[m..].iter().map(|&y| zq.neg(y)).collect())
}

/// Generators (Howell rows) of the kernel of `c -> sum c_i gens[i]`.
pub fn kernel(zq: Zq, m: usize, gens: &[Vec<u32>]) -> Echelon {
    let k = gens.len();
    let e = augmented(zq, m, gens);
    Echelon::from_rows(zq, k, e.tail_rows(m))
}

fn augmented(zq: Zq, m: usize, gens: &[Vec<u32>]) -> Echelon {
    let k = gens.len();
    let mut e = Echelon::new(zq, m + k);
    for (i, g) in gens.iter().enumerate() {
        let mut row = vec![0u32; m + k];
        row[..m].copy_from_slice(g);
        row[m + i] = 1;
        e.insert(row);
    }
    e
}

/// A finitely generated Z/q-module presented as (Z/q)^dim modulo relations.
#[derive(Debug, Clone)]
pub struct QuotientSpace {
    pub dim: usize,
    pub rel: Echelon,
}

impl QuotientSpace {
    pub fn free(zq: Zq, dim: usize) -> Self {
        QuotientSpace { dim, rel: Echelon::new(zq, dim) }
    }

    pub fn new(dim: usize, rel: Echelon) -> Self {
        QuotientSpace { dim, rel }
    }

    pub fn zq(&self) -> Zq {
        self.rel.zq()
    }

    pub fn length(&self) -> u64 {
        self.dim as u64 * self.zq().n as u64 - self.rel.length()
    }

    pub fn normal_form(&self, w: &[u32]) -> Vec<u32> {
        self.rel.reduce(w)
    }

    pub fn is_zero(&self, w: &[u32]) -> bool {
        self.rel.contains(w)
    }
}

/// Rank data of a linear map between quotient spaces, given by images of the
/// ambient basis vectors of the source.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct MapLengths {
    pub source: u64,
    pub target: u64,
    pub image: u64,
    pub kernel: u64,
    pub well_defined: bool,
}

impl MapLengths {
    pub fn injective(&self) -> bool {
        self.well_defined && self.kernel == 0
    }
    pub fn surjective(&self) -> bool {
        self.well_defined && self.image == self.target
    }
    pub fn bijective(&self) -> bool {
        self.injective() && self.surjective()
    }
}

/// Measures a map `src -> tgt` whose value on ambient basis vector `j` is `cols[j]`.
pub fn map_lengths(src: &QuotientSpace, tgt: &QuotientSpace, cols: &[Vec<u32>]) -> MapLengths {
    assert_eq!(cols.len(), src.dim);
    let zq = src.zq();
    let well_defined = src.rel.rows().all(|r| {
        let img = apply(zq, tgt.dim, cols, r);
        tgt.is_zero(&img)
    });
    let mut im = tgt.rel.clone();
    for c in cols {
        im.insert(c.clone());
    }
    let image = im.length() - tgt.rel.length();
    let source = src.length();
    MapLengths {
        source,
        target: tgt.length(),
        image,
        kernel: source.saturating_sub(image),
        well_defined,
    }
}

/// `sum_j v[j] * cols[j]`.
pub fn apply(zq: Zq, m: usize, cols: &[Vec<u32>], v: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32; m];
    for (j, &s) in v.iter().enumerate() {
        if s == 0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(&cols[j]) {
            if x != 0 {
                *o = zq.add(*o, zq.mul(s, x));
            }
        }
    }
    out
}

/// Sparse triplet dump: header `rows cols modulus`, then one `i j v` line per
/// nonzero entry, row-major. `cols[j]` is column `j`.
pub fn sparse_triplets(zq: Zq, nrows: usize, cols: &[Vec<u32>]) -> String {
    let mut entries = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            if v != 0 {
                entries.push((i, j, v));
            }
        }
    }
    entries.sort_unstable();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", nrows, cols.len(), zq.q);
    for (i, j, v) in entries {
        let _ = writeln!(s, "{i} {j} {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_span(zq: Zq, m: usize, gens: &[Vec<u32>]) -> std::collections::HashSet<Vec<u32>> {
        let mut set = std::collections::HashSet::new();
        set.insert(vec![0u32; m]);
        for g in gens {
            let cur: Vec<_> = set.iter().cloned().collect();
            for v in cur {
                let mut acc = v.clone();
                for _ in 1..zq.q {
                    for (a, b) in acc.iter_mut().zip(g) {
                        *a = zq.add(*a, *b);
                    }
                    set.insert(acc.clone());
                }
            }
        }
        set
    }

    #[test]
    fn torsion_closure() {
        let zq = Zq::new(2, 2);
        // (2, 1): the element 2*(2,1) = (0,2) must be found.
        let e = Echelon::from_rows(zq, 2, vec![vec![2, 1]]);
        assert!(e.contains(&[0, 2]));
        assert!(!e.contains(&[0, 1]));
        assert_eq!(e.length(), 2);
    }

    #[test]
    fn solve_and_kernel() {
        let zq = Zq::new(3, 2);
        let gens = vec![vec![1, 3, 0], vec![0, 3, 3], vec![1, 6, 3]];
        let t = vec![2, 0, 3];
        let c = solve(zq, 3, &gens, &t).unwrap();
        assert_eq!(apply(zq, 3, &gens, &c), t);
        let k = kernel(zq, 3, &gens);
        for r in k.rows() {
            assert!(apply(zq, 3, &gens, r).iter().all(|&x| x == 0));
        }
        assert!(k.contains(&[1, 1, 8]));
        assert!(solve(zq, 3, &gens, &[0, 1, 0]).is_none());
    }

    #[test]
    fn triplet_format() {
        let zq = Zq::field(2);
        let s = sparse_triplets(zq, 2, &[vec![1, 0], vec![1, 1]]);
        assert_eq!(s, "2 2 2\n0 0 1\n0 1 1\n1 1 1\n");
    }

    fn small_vecs(q: u32, m: usize, k: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0..q, m), 0..=k)
    }

    proptest! {
        #[test]
        fn echelon_matches_brute_force(gens in small_vecs(4, 3, 3), probe in prop::collection::vec(0u32..4, 3)) {
            let zq = Zq::new(2, 2);
            let e = Echelon::from_rows(zq, 3, gens.clone());
            let span = brute_span(zq, 3, &gens);
            prop_assert_eq!(e.contains(&probe), span.contains(&probe));
            prop_assert_eq!(zq.q.pow(0) as u64 * (span.len() as f64).log2().round() as u64, e.length());
        }

        #[test]
        fn echelon_matches_brute_force_p3(gens in small_vecs(9, 2, 3), probe in prop::collection::vec(0u32..9, 2)) {
            let zq = Zq::new(3, 2);
            let e = Echelon::from_rows(zq, 2, gens.clone());
            let span = brute_span(zq, 2, &gens);
            prop_assert_eq!(e.contains(&probe), span.contains(&probe));
            let mut expect = 0u64;
            let mut s = span.len();
            while s > 1 { s /= 3; expect += 1; }
            prop_assert_eq!(expect, e.length());
        }

        #[test]
        fn reduction_is_canonical(gens in small_vecs(8, 3, 3), a in prop::collection::vec(0u32..8, 3), b in prop::collection::vec(0u32..8, 3)) {
            let zq = Zq::new(2, 3);
            let e = Echelon::from_rows(zq, 3, gens.clone());
            let diff: Vec<u32> = a.iter().zip(&b).map(|(x, y)| zq.sub(*x, *y)).collect();
            let same = e.contains(&diff);
            prop_assert_eq!(e.reduce(&a) == e.reduce(&b), same);
            prop_assert_eq!(e.reduce(&e.reduce(&a)), e.reduce(&a));
        }
    }
}
