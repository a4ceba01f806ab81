//! Scalar arithmetic in Z/p^n.

use serde::{Deserialize, Serialize};

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// The coefficient ring Z/p^n. `n = 1` is the prime field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zq {
    pub p: u32,
    pub n: u32,
    pub q: u32,
}

impl Zq {
    pub fn new(p: u32, n: u32) -> Self {
        assert!(n >= 1, "Z/p^n needs n >= 1");
        let q = (p as u64).pow(n);
        assert!(q < (1u64 << 31), "modulus p^n too large");
        Zq { p, n, q: q as u32 }
    }

    pub fn field(p: u32) -> Self {
        Zq::new(p, 1)
    }

    #[inline]
    pub fn reduce(&self, a: i64) -> u32 {
        a.rem_euclid(self.q as i64) as u32
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a % self.q;
        let mut acc = 1 % self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// p-adic valuation; `n` for zero.
    pub fn val(&self, a: u32) -> u32 {
        if a == 0 {
            return self.n;
        }
        let mut v = 0;
        let mut x = a;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn p_pow(&self, k: u32) -> u32 {
        if k >= self.n {
            0
        } else {
            self.p.pow(k)
        }
    }

    /// Inverse of a unit (valuation zero).
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a.is_multiple_of(self.p) {
            return None;
        }
        let (mut t, mut newt) = (0i64, 1i64);
        let (mut r, mut newr) = (self.q as i64, a as i64);
        while newr != 0 {
            let quo = r / newr;
            (t, newt) = (newt, t - quo * newt);
            (r, newr) = (newr, r - quo * newr);
        }
        Some(self.reduce(t))
    }

    /// Splits `a = u * p^v` with `u` a unit; returns `(u, v)`. Zero maps to `(0, n)`.
    pub fn split(&self, a: u32) -> (u32, u32) {
        if a == 0 {
            return (0, self.n);
        }
        let v = self.val(a);
        let u = a / self.p.pow(v);
        (u % self.q, v)
    }

    /// Teichmuller representative of a residue class mod p.
    pub fn teichmuller(&self, d: u32) -> u32 {
        self.pow(d % self.p, (self.p as u64).pow(self.n - 1))
    }

    /// Digits of `a` in the Teichmuller expansion `a = sum p^k [d_k]`, `d_k` in `0..p`.
    pub fn teichmuller_digits(&self, a: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.n as usize);
        let mut cur = a as i64;
        let mut modulus = self.q as i64;
        for k in 0..self.n {
            let d = (cur.rem_euclid(self.p as i64)) as u32;
            out.push(d);
            let sub = Zq::new(self.p, self.n - k).teichmuller(d) as i64;
            cur = (cur - sub).rem_euclid(modulus) / self.p as i64;
            modulus /= self.p as i64;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert!(is_prime(2) && is_prime(3) && is_prime(5) && !is_prime(9) && !is_prime(1));
    }

    #[test]
    fn inverse_and_valuation() {
        let z = Zq::new(3, 3);
        for a in 0..z.q {
            if a % 3 != 0 {
                assert_eq!(z.mul(a, z.inv(a).unwrap()), 1);
            } else {
                assert!(z.inv(a).is_none());
            }
        }
        assert_eq!(z.val(9), 2);
        assert_eq!(z.val(0), 3);
        assert_eq!(z.split(18), (2, 2));
    }

    #[test]
    fn teichmuller_digits_reconstruct() {
        for (p, n) in [(2, 4), (3, 3), (5, 2)] {
            let z = Zq::new(p, n);
            for a in 0..z.q {
                let ds = z.teichmuller_digits(a);
                let mut acc = 0;
                for (k, d) in ds.iter().enumerate() {
                    acc = z.add(acc, z.mul(z.p_pow(k as u32), z.teichmuller(*d)));
                }
                assert_eq!(acc, a);
            }
        }
    }

    #[test]
    fn teichmuller_is_multiplicative() {
        let z = Zq::new(5, 3);
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(z.mul(z.teichmuller(a), z.teichmuller(b)), z.teichmuller(a * b % 5));
            }
        }
    }
}
