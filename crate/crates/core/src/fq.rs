//! Dense matrices over a prime field F_q, reduced row echelon forms, and an
//! indexing of GL_n(F_q).

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{domain, parse, range, Result};

/// Trial division. Moduli are capped at 2^32 so products fit in a `u64`.
pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn check_modulus(q: u64) -> Result<()> {
    if q >= 1 << 32 {
        return Err(domain(format!("modulus {q} too large")));
    }
    if !is_prime(q) {
        return Err(domain(format!("modulus {q} is not prime")));
    }
    Ok(())
}

fn inv_mod(a: u64, q: u64) -> u64 {
    // Fermat; q is prime
    let mut base = a % q;
    let mut e = q - 2;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % q;
        }
        base = base * base % q;
        e >>= 1;
    }
    acc
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatrixFq {
    q: u64,
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl MatrixFq {
    /// Entries are given row-major and reduced mod `q`.
    pub fn new(q: u64, rows: usize, cols: usize, entries: Vec<u64>) -> Result<Self> {
        check_modulus(q)?;
        if entries.len() != rows * cols {
            return Err(domain(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        let entries = entries.into_iter().map(|e| e % q).collect();
        Ok(Self {
            q,
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(q: u64, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(domain("ragged rows"));
        }
        Self::new(q, rows.len(), cols, rows.concat())
    }

    pub fn zero(q: u64, rows: usize, cols: usize) -> Result<Self> {
        Self::new(q, rows, cols, vec![0; rows * cols])
    }

    pub fn identity(q: u64, n: usize) -> Result<Self> {
        let mut m = Self::zero(q, n, n)?;
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        Ok(m)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.entries[r * self.cols + c] = v % self.q;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &MatrixFq) -> Result<MatrixFq> {
        if self.q != other.q || self.cols != other.rows {
            return Err(domain(format!(
                "cannot multiply {}x{} over F_{} by {}x{} over F_{}",
                self.rows, self.cols, self.q, other.rows, other.cols, other.q
            )));
        }
        let q = self.q;
        let mut out = vec![0u64; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let cell = &mut out[i * other.cols + j];
                    *cell = (*cell + a * other.get(k, j)) % q;
                }
            }
        }
        Ok(MatrixFq {
            q,
            rows: self.rows,
            cols: other.cols,
            entries: out,
        })
    }

    pub fn transpose(&self) -> MatrixFq {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        MatrixFq {
            q: self.q,
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Row reduction in place; returns pivot columns.
    fn reduce(&mut self) -> Vec<usize> {
        let q = self.q;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            if p != r {
                for j in 0..self.cols {
                    self.entries.swap(p * self.cols + j, r * self.cols + j);
                }
            }
            let inv = inv_mod(self.get(r, c), q);
            for j in 0..self.cols {
                let v = self.get(r, j) * inv % q;
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                let f = self.get(i, c);
                if i == r || f == 0 {
                    continue;
                }
                for j in 0..self.cols {
                    let v = (self.get(i, j) + (q - f) * self.get(r, j)) % q;
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Reduced row echelon form, zero rows kept at the bottom so the shape
    /// is unchanged.
    pub fn rref(&self) -> MatrixFq {
        let mut m = self.clone();
        m.reduce();
        m
    }

    /// RREF with zero rows dropped, together with its pivot columns.
    pub fn row_basis(&self) -> (MatrixFq, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.reduce();
        m.entries.truncate(pivots.len() * m.cols);
        m.rows = pivots.len();
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce().len()
    }

    pub fn determinant(&self) -> Result<u64> {
        if !self.is_square() {
            return Err(domain("determinant of a non-square matrix"));
        }
        let q = self.q;
        let n = self.rows;
        let mut m = self.clone();
        let mut det = 1u64;
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| m.get(i, c) != 0) else {
                return Ok(0);
            };
            if p != c {
                for j in 0..n {
                    m.entries.swap(p * n + j, c * n + j);
                }
                det = (q - det) % q;
            }
            let pv = m.get(c, c);
            det = det * pv % q;
            let inv = inv_mod(pv, q);
            for i in c + 1..n {
                let f = m.get(i, c) * inv % q;
                if f == 0 {
                    continue;
                }
                for j in c..n {
                    let v = (m.get(i, j) + (q - f) * m.get(c, j)) % q;
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<MatrixFq> {
        if !self.is_square() {
            return Err(domain("inverse of a non-square matrix"));
        }
        let n = self.rows;
        let mut aug = MatrixFq::zero(self.q, n, 2 * n)?;
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, 1);
        }
        let pivots = aug.reduce();
        if pivots.len() < n || pivots[n - 1] >= n {
            return Err(domain("matrix is singular"));
        }
        let mut out = MatrixFq::zero(self.q, n, n)?;
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, aug.get(i, n + j));
            }
        }
        Ok(out)
    }

    /// Text form: header "rows cols q", then one line of residues per row.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| parse(1, "empty matrix text"))?;
        let head: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse(hl, format!("bad header field {t:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols, q] = head[..] else {
            return Err(parse(hl, "header must be \"rows cols q\""));
        };
        let (rows, cols) = (rows as usize, cols as usize);
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines.next().ok_or_else(|| parse(hl, "missing matrix rows"))?;
            let row: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse(ln, format!("bad entry {t:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(parse(ln, format!("expected {cols} entries, found {}", row.len())));
            }
            if let Some(bad) = row.iter().find(|&&e| e >= q) {
                return Err(parse(ln, format!("entry {bad} not reduced mod {q}")));
            }
            entries.extend(row);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse(ln, "trailing input after matrix"));
        }
        Self::new(q, rows, cols, entries).map_err(|e| parse(hl, e.to_string()))
    }
}

impl fmt::Display for MatrixFq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.rows, self.cols, self.q)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(u64::to_string).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for MatrixFq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixFq(q={}, {:?})", self.q, (0..self.rows).map(|r| self.row(r)).collect::<Vec<_>>())
    }
}

/// `|GL_n(F_q)| = ∏_{i=1}^{n} (q^n − q^{i−1})`.
pub fn gl_order(n: usize, q: u64) -> Result<BigUint> {
    check_modulus(q)?;
    if n == 0 {
        return Err(domain("GL_0 is not supported"));
    }
    let qn = BigUint::from(q).pow(n as u32);
    let mut out = BigUint::one();
    let mut qi = BigUint::one();
    for _ in 0..n {
        out *= &qn - &qi;
        qi *= q;
    }
    Ok(out)
}

/// Standard basis vectors completing the rows picked so far to a basis:
/// the non-pivot columns of their echelon form.
fn completion(q: u64, n: usize, prior: &[Vec<u64>]) -> Vec<usize> {
    if prior.is_empty() {
        return (0..n).collect();
    }
    let (_, pivots) = MatrixFq::from_rows(q, prior).expect("consistent rows").row_basis();
    (0..n).filter(|c| !pivots.contains(c)).collect()
}

fn digits(mut v: BigUint, q: u64, len: usize) -> Vec<u64> {
    let qb = BigUint::from(q);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let (d, r) = v.div_rem(&qb);
        out.push(r.to_u64().unwrap());
        v = d;
    }
    out
}

fn undigits(ds: &[u64], q: u64) -> BigUint {
    ds.iter().rev().fold(BigUint::zero(), |acc, &d| acc * q + d)
}

/// Row digits, most significant first: row `i` (0-based) contributes a
/// digit below `q^n − q^i`.
fn row_radices(n: usize, q: u64) -> Vec<BigUint> {
    let qn = BigUint::from(q).pow(n as u32);
    (0..n).map(|i| &qn - BigUint::from(q).pow(i as u32)).collect()
}

/// Decodes index `k` (0-based) to an element of GL_n(F_q).
///
/// Row `i` is chosen by a digit `d < q^n − q^i`, split as `d = k0 + k1·q^i`:
/// the row is the combination of the earlier rows with base-q coefficients
/// `k0`, plus the combination of the completing basis vectors with base-q
/// coefficients `k1 + 1` (nonzero, so the row stays independent).
pub fn gl_unrank(k: &BigUint, n: usize, q: u64) -> Result<MatrixFq> {
    let order = gl_order(n, q)?;
    if k >= &order {
        return Err(range(format!("index {k} not below |GL_{n}(F_{q})| = {order}")));
    }
    let radices = row_radices(n, q);
    let mut row_digits = vec![BigUint::zero(); n];
    let mut rest = k.clone();
    for i in (0..n).rev() {
        let (d, r) = rest.div_rem(&radices[i]);
        row_digits[i] = r;
        rest = d;
    }
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n);
    for (i, d) in row_digits.into_iter().enumerate() {
        let qi = BigUint::from(q).pow(i as u32);
        let (k1, k0) = d.div_rem(&qi);
        let a = digits(k0, q, i);
        let ext = completion(q, n, &rows);
        let b = digits(k1 + 1u8, q, ext.len());
        let mut row = vec![0u64; n];
        for (coef, prior) in a.iter().zip(&rows) {
            for (x, y) in row.iter_mut().zip(prior) {
                *x = (*x + coef * y) % q;
            }
        }
        for (coef, &c) in b.iter().zip(&ext) {
            row[c] = (row[c] + coef) % q;
        }
        rows.push(row);
    }
    MatrixFq::from_rows(q, &rows)
}

/// Inverse of [`gl_unrank`].
pub fn gl_rank(m: &MatrixFq) -> Result<BigUint> {
    if !m.is_square() || m.rows == 0 {
        return Err(domain("GL elements are non-empty square matrices"));
    }
    if !m.is_invertible() {
        return Err(domain("matrix is singular"));
    }
    let (n, q) = (m.rows, m.q);
    let radices = row_radices(n, q);
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n);
    let mut k = BigUint::zero();
    for i in 0..n {
        let ext = completion(q, n, &rows);
        // basis = earlier rows followed by completing unit vectors
        let mut basis = rows.clone();
        for &c in &ext {
            let mut e = vec![0u64; n];
            e[c] = 1;
            basis.push(e);
        }
        let inv = MatrixFq::from_rows(q, &basis)?.inverse()?;
        let target = MatrixFq::from_rows(q, &[m.row(i).to_vec()])?;
        let coeffs = target.mul(&inv)?;
        let coeffs = coeffs.row(0);
        let k0 = undigits(&coeffs[..i], q);
        let b = undigits(&coeffs[i..], q);
        if b.is_zero() {
            return Err(domain("matrix is singular"));
        }
        let digit = k0 + (b - 1u8) * BigUint::from(q).pow(i as u32);
        k = k * &radices[i] + digit;
        rows.push(m.row(i).to_vec());
    }
    Ok(k)
}

/// Uniform element of GL_n(F_q) by rejection from uniform n×n matrices.
pub fn random_gl<R: Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Result<MatrixFq> {
    check_modulus(q)?;
    if n == 0 {
        return Err(domain("GL_0 is not supported"));
    }
    loop {
        let entries = (0..n * n).map(|_| rng.gen_range(0..q)).collect();
        let m = MatrixFq::new(q, n, n, entries)?;
        if m.is_invertible() {
            return Ok(m);
        }
    }
}
