//! Extended-precision real matrix kernel backing the similarity chain.
//!
//! The forward-recurrence similarity operator has condition number growing
//! roughly like 10^(0.8 D) in the truncation dimension, so binary64 cannot
//! invert it or form the verification products beyond D of about 16. All
//! inversion-touching arithmetic therefore runs on these arbitrary-precision
//! real matrices; public APIs expose binary64 projections of the results.
//!
//! Inputs must enter this layer exactly: recurrence denominators and flow
//! coefficients are assembled here from integer indices and the exact f64
//! parameter values. Pre-rounding any coefficient in f64 perturbs the
//! solved operator at relative 1e-16, which the conditioning amplifies into
//! garbage residuals.

use astro_float::{BigFloat, RoundingMode};

const RM: RoundingMode = RoundingMode::ToEven;

/// Working precision in bits for chains at truncation dimension `d`,
/// sized from the measured conditioning growth plus headroom.
pub fn bits_for_dim(d: usize) -> usize {
    (128 + 4 * d).clamp(192, 768)
}

pub fn mp(x: f64, p: usize) -> BigFloat {
    BigFloat::from_f64(x, p)
}

pub fn mp_usize(x: usize, p: usize) -> BigFloat {
    BigFloat::from_f64(x as f64, p)
}

/// `a > b` for finite values; `cmp` returns the sign as an arbitrary
/// signed word, so test the sign rather than a literal.
pub fn gt(a: &BigFloat, b: &BigFloat) -> bool {
    matches!(a.cmp(b), Some(x) if x > 0)
}

/// Round to the nearest f64 through the decimal printer; astro-float has no
/// direct conversion. Infinities and NaN map through.
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    format!("{x}").parse().unwrap_or(f64::NAN)
}

/// Dense square real matrix at a fixed working precision.
#[derive(Clone)]
pub struct MpMat {
    d: usize,
    p: usize,
    data: Vec<BigFloat>,
}

impl MpMat {
    pub fn zeros(d: usize, p: usize) -> Self {
        Self {
            d,
            p,
            data: vec![mp(0.0, p); d * d],
        }
    }

    pub fn identity(d: usize, p: usize) -> Self {
        let mut m = Self::zeros(d, p);
        for i in 0..d {
            m.data[i * d + i] = mp(1.0, p);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn precision(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> &BigFloat {
        &self.data[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigFloat) {
        self.data[i * self.d + j] = v;
    }

    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        to_f64(self.get(i, j))
    }

    /// Real f64 matrix lifted to working precision (entries are exact).
    pub fn from_f64_rows(rows: &[Vec<f64>], p: usize) -> Self {
        let d = rows.len();
        let mut m = Self::zeros(d, p);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, mp(*v, p));
            }
        }
        m
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.entry_f64(i, j)).collect())
            .collect()
    }

    pub fn mul(&self, other: &MpMat) -> MpMat {
        assert_eq!(self.d, other.d);
        let (d, p) = (self.d, self.p);
        let mut r = MpMat::zeros(d, p);
        for i in 0..d {
            for j in 0..d {
                let mut acc = mp(0.0, p);
                for k in 0..d {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j), p, RM), p, RM);
                }
                r.data[i * d + j] = acc;
            }
        }
        r
    }

    pub fn add(&self, other: &MpMat) -> MpMat {
        assert_eq!(self.d, other.d);
        let mut r = self.clone();
        for i in 0..self.d * self.d {
            r.data[i] = r.data[i].add(&other.data[i], self.p, RM);
        }
        r
    }

    pub fn sub(&self, other: &MpMat) -> MpMat {
        assert_eq!(self.d, other.d);
        let mut r = self.clone();
        for i in 0..self.d * self.d {
            r.data[i] = r.data[i].sub(&other.data[i], self.p, RM);
        }
        r
    }

    pub fn scale(&self, s: &BigFloat) -> MpMat {
        let mut r = self.clone();
        for i in 0..self.d * self.d {
            r.data[i] = r.data[i].mul(s, self.p, RM);
        }
        r
    }

    pub fn transpose(&self) -> MpMat {
        let mut r = MpMat::zeros(self.d, self.p);
        for i in 0..self.d {
            for j in 0..self.d {
                r.set(j, i, self.get(i, j).clone());
            }
        }
        r
    }

    /// Gauss-Jordan with partial pivoting. `None` on an exactly zero pivot.
    pub fn inverse(&self) -> Option<MpMat> {
        let (d, p) = (self.d, self.p);
        let mut left = self.data.clone();
        let mut right = MpMat::identity(d, p).data;
        let idx = |i: usize, j: usize| i * d + j;
        for col in 0..d {
            let mut piv = col;
            let mut best = left[idx(col, col)].abs();
            for r in col + 1..d {
                let v = left[idx(r, col)].abs();
                if gt(&v, &best) {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return None;
            }
            if piv != col {
                for j in 0..d {
                    left.swap(idx(col, j), idx(piv, j));
                    right.swap(idx(col, j), idx(piv, j));
                }
            }
            let pivot = left[idx(col, col)].clone();
            for r in 0..d {
                if r == col {
                    continue;
                }
                let factor = left[idx(r, col)].div(&pivot, p, RM);
                if factor.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let t = factor.mul(&left[idx(col, j)], p, RM);
                    left[idx(r, j)] = left[idx(r, j)].sub(&t, p, RM);
                    let t = factor.mul(&right[idx(col, j)], p, RM);
                    right[idx(r, j)] = right[idx(r, j)].sub(&t, p, RM);
                }
            }
        }
        let mut inv = MpMat::zeros(d, p);
        for i in 0..d {
            let pivot = left[idx(i, i)].clone();
            for j in 0..d {
                inv.data[idx(i, j)] = right[idx(i, j)].div(&pivot, p, RM);
            }
        }
        Some(inv)
    }

    /// Largest entry magnitude over the leading `k x k` block, as f64.
    pub fn block_max_abs(&self, k: usize) -> f64 {
        let mut worst = mp(0.0, self.p);
        for i in 0..k.min(self.d) {
            for j in 0..k.min(self.d) {
                let v = self.get(i, j).abs();
                if gt(&v, &worst) {
                    worst = v;
                }
            }
        }
        to_f64(&worst)
    }

    pub fn max_abs(&self) -> f64 {
        self.block_max_abs(self.d)
    }

    /// Largest entry magnitude over rows `0..row_end`, all columns.
    pub fn rows_max_abs(&self, row_end: usize) -> f64 {
        let mut worst = mp(0.0, self.p);
        for i in 0..row_end.min(self.d) {
            for j in 0..self.d {
                let v = self.get(i, j).abs();
                if gt(&v, &worst) {
                    worst = v;
                }
            }
        }
        to_f64(&worst)
    }

    pub fn one_norm_f64(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.d {
            let mut sum = 0.0;
            for i in 0..self.d {
                sum += to_f64(&self.get(i, j).abs());
            }
            best = best.max(sum);
        }
        best
    }
}

/// Ladder operators and the number operator at working precision.
pub fn mp_ladder(d: usize, p: usize) -> (MpMat, MpMat, MpMat) {
    let mut a = MpMat::zeros(d, p);
    for m in 0..d - 1 {
        a.set(m, m + 1, mp_usize(m + 1, p).sqrt(p, RM));
    }
    let adag = a.transpose();
    let mut n = MpMat::zeros(d, p);
    for i in 0..d {
        n.set(i, i, mp_usize(i, p));
    }
    (a, adag, n)
}

/// Diagonal `I + (q-1) N` used as the deformed-commutator target.
pub fn mp_deformed_target(q: f64, d: usize, p: usize) -> MpMat {
    let qm1 = mp(q, p).sub(&mp(1.0, p), p, RM);
    let mut m = MpMat::zeros(d, p);
    for i in 0..d {
        let v = mp(1.0, p).add(&qm1.mul(&mp_usize(i, p), p, RM), p, RM);
        m.set(i, i, v);
    }
    m
}

/// `M = q N + u Q + (u^2/2) I` assembled exactly at working precision.
pub fn mp_target_operator(q: f64, u: f64, d: usize, p: usize) -> MpMat {
    let qp = mp(q, p);
    let up = mp(u, p);
    let inv_sqrt2 = mp(1.0, p).div(&mp(2.0, p).sqrt(p, RM), p, RM);
    let shift = up.mul(&up, p, RM).div(&mp(2.0, p), p, RM);
    let mut m = MpMat::zeros(d, p);
    for i in 0..d {
        m.set(i, i, qp.mul(&mp_usize(i, p), p, RM).add(&shift, p, RM));
    }
    for i in 0..d - 1 {
        let q_entry = mp_usize(i + 1, p)
            .sqrt(p, RM)
            .mul(&inv_sqrt2, p, RM)
            .mul(&up, p, RM);
        m.set(i, i + 1, q_entry.clone());
        m.set(i + 1, i, q_entry);
    }
    m
}

/// `exp(W)` by scaling and adaptive Taylor summation. Intended for the
/// moderate norms that arise here (`|W| <~ 20`); terms are added until they
/// fall below the working precision.
pub fn mp_expm(w: &MpMat) -> MpMat {
    let (d, p) = (w.dim(), w.precision());
    let norm = w.one_norm_f64();
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = w.scale(&mp(0.5f64.powi(squarings as i32), p));
    let mut term = MpMat::identity(d, p);
    let mut sum = MpMat::identity(d, p);
    let cutoff = (2.0f64).powi(-(p as i32) - 16);
    for k in 1..(p + 64) {
        term = term.mul(&scaled).scale(&mp(1.0, p).div(&mp_usize(k, p), p, RM));
        sum = sum.add(&term);
        if term.max_abs() < cutoff {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    sum
}

/// Displacement flow `T(u) = exp(iuP)` of the truncated generator, which is
/// the exponential of the real skew matrix `u (a - a^T)/sqrt(2)` and hence
/// exactly orthogonal (to working precision).
pub fn mp_flow(u: f64, d: usize, p: usize) -> MpMat {
    let (a, adag, _) = mp_ladder(d, p);
    let coeff = mp(u, p).div(&mp(2.0, p).sqrt(p, RM), p, RM);
    let w = a.sub(&adag).scale(&coeff);
    mp_expm(&w)
}

/// Forward recurrence column of the similarity operator at working
/// precision, pre-gauge. Inputs are formed exactly from `(n, q, u)`.
pub fn mp_recurrence_column(n: usize, q: f64, u: f64, d: usize, p: usize) -> Vec<BigFloat> {
    let qp = mp(q, p);
    let up = mp(u, p);
    let u_sq = up.mul(&up, p, RM);
    let su = up.mul(&mp(2.0, p).sqrt(p, RM), p, RM);
    let two = mp(2.0, p);
    let mut col = vec![mp(0.0, p); d];
    col[0] = mp(1.0, p);
    for m in 0..d - 1 {
        let den = mp_usize(n, p)
            .sub(&mp_usize(m, p).mul(&qp, p, RM), p, RM)
            .mul(&two, p, RM)
            .sub(&u_sq, p, RM);
        let prev = if m == 0 { mp(0.0, p) } else { col[m - 1].clone() };
        let lower = su
            .mul(&mp_usize(m, p).sqrt(p, RM), p, RM)
            .mul(&prev, p, RM);
        let num = den.mul(&col[m], p, RM).sub(&lower, p, RM);
        col[m + 1] = num.div(&su.mul(&mp_usize(m + 1, p).sqrt(p, RM), p, RM), p, RM);
    }
    col
}
