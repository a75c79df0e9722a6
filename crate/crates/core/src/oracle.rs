//! Exact finite-n answers used as ground truth by the Monte Carlo checks:
//! the law of the count at the boundary hitting time (absorbing-chain
//! solve), the mean fixed-energy stabilization time (birth–death first
//! passage), and binomial tails.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest `n` accepted by [`exact_final_pmf`].
pub const MAX_EXACT_N: usize = 12;

/// Largest `n` accepted by [`exact_fixed_energy_mean`].
pub const MAX_FIXED_ENERGY_N: usize = 2000;

/// Probability mass function on `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    mass: Vec<f64>,
}

impl ExactPmf {
    /// Builds a pmf, clamping round-off negatives; fails if the total mass is
    /// not within 1e-10 of one.
    pub fn new(mut mass: Vec<f64>) -> Result<Self> {
        for m in mass.iter_mut() {
            if *m < 0.0 {
                if *m < -1e-15 {
                    return Err(Error::Logic(format!("negative mass {m}")));
                }
                *m = 0.0;
            }
        }
        let total = kahan_sum(mass.iter().copied());
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Logic(format!("pmf total mass {total}")));
        }
        Ok(ExactPmf { mass })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.mass.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        kahan_sum(self.mass.iter().enumerate().map(|(k, m)| k as f64 * m))
    }

    /// Total-variation distance to the empirical law of `counts`
    /// (`counts[k]` = number of samples equal to `k`).
    pub fn tv_distance(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let len = self.mass.len().max(counts.len());
        let sum: f64 = (0..len)
            .map(|k| {
                let emp = counts.get(k).copied().unwrap_or(0) as f64 / total as f64;
                (emp - self.prob(k)).abs()
            })
            .sum();
        0.5 * sum
    }
}

/// Law of `Y` at the first time it meets the boundary `n − Z`, for the
/// binomial update process with `Y(0) ~ Binomial(n, p)`, `Z(0) = 0`.
///
/// Transient states `(y, z)` with `y < n − z` are eliminated level by level
/// from `z = n − 1` down to `z = 0`. Within a level the first-step equations
/// are tridiagonal in `y` (one vector right-hand side per final value), and a
/// lazy step only feeds the already-solved level `z + 1`.
pub fn exact_final_pmf(n: usize, p: f64, q: f64) -> Result<ExactPmf> {
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::Size(format!(
            "exact solve supports 1 ≤ n ≤ {MAX_EXACT_N}, got {n}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!(
            "q must lie in (0, 1] for the chain to be absorbing, got {q}"
        )));
    }

    let nf = n as f64;
    let down = |y: usize| (1.0 - q) * (y as f64 / nf) * (1.0 - p);
    let up = |y: usize| (1.0 - q) * ((n - y) as f64 / nf) * p;
    let width = n + 1;

    // above[y] = absorption law from (y, z + 1); empty at the top level.
    let mut above: Vec<Vec<f64>> = Vec::new();
    for z in (0..n).rev() {
        let boundary = n - z;
        let mut rhs = vec![vec![0.0; width]; boundary];
        for (y, r) in rhs.iter_mut().enumerate() {
            if y + 1 == boundary {
                // lazy step lands on the lowered boundary; up step hits this one
                r[y] += q;
                r[boundary] += up(y);
            } else {
                for (dst, src) in r.iter_mut().zip(&above[y]) {
                    *dst += q * src;
                }
            }
        }
        let sub: Vec<f64> = (0..boundary).map(|y| -down(y)).collect();
        let diag: Vec<f64> = (0..boundary).map(|y| q + down(y) + up(y)).collect();
        let sup: Vec<f64> = (0..boundary)
            .map(|y| if y + 1 < boundary { -up(y) } else { 0.0 })
            .collect();
        above = solve_tridiagonal(&sub, &diag, &sup, rhs);
    }

    let start = binomial_pmf_vec(n, p);
    let mut mass = vec![0.0; width];
    for (s, m) in mass.iter_mut().enumerate() {
        let absorbed_now = if s == n { start[n] } else { 0.0 };
        *m = kahan_sum(
            (0..n)
                .map(|y| start[y] * above[y][s])
                .chain(std::iter::once(absorbed_now)),
        );
    }
    ExactPmf::new(mass)
}

/// Largest `n` accepted by [`exact_stopping_law`].
pub const MAX_FORWARD_N: usize = 50_000;

/// Same law as [`exact_final_pmf`], computed forwards in `O(n²)`: the
/// sub-probability vector of `Y` on the live part of each level `z` is pushed
/// through one tridiagonal solve (expected visits before leaving the level),
/// which splits it into absorbed mass and the entry law of level `z + 1`.
///
/// Rounding accumulates across levels, so the total is only checked to
/// 1e-7 and then renormalized.
pub fn exact_stopping_law(n: usize, p: f64, q: f64) -> Result<ExactPmf> {
    if n == 0 || n > MAX_FORWARD_N {
        return Err(Error::Size(format!(
            "forward solve supports 1 ≤ n ≤ {MAX_FORWARD_N}, got {n}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!(
            "q must lie in (0, 1] for the chain to be absorbing, got {q}"
        )));
    }
    let nf = n as f64;
    let down = |y: usize| (1.0 - q) * (y as f64 / nf) * (1.0 - p);
    let up = |y: usize| (1.0 - q) * ((n - y) as f64 / nf) * p;

    let mut mass = vec![0.0; n + 1];
    let mut v = binomial_pmf_vec(n, p);
    mass[n] = v[n];
    v.truncate(n);
    let mut c = Vec::with_capacity(n);
    for z in 0..n {
        let m = n - z;
        // visits g solve g (I − M) = v, i.e. the transposed tridiagonal system
        // with diagonal q + down + up, super −down(y+1) and sub −up(y−1)
        c.clear();
        let mut prev_c = 0.0;
        for y in 0..m {
            let sub = if y > 0 { -up(y - 1) } else { 0.0 };
            let sup = if y + 1 < m { -down(y + 1) } else { 0.0 };
            let pivot = q + down(y) + up(y) - sub * prev_c;
            prev_c = sup / pivot;
            c.push(prev_c);
            let carry = if y > 0 { v[y - 1] } else { 0.0 };
            v[y] = (v[y] - sub * carry) / pivot;
        }
        for y in (0..m - 1).rev() {
            v[y] -= c[y] * v[y + 1];
        }
        mass[m] += v[m - 1] * up(m - 1);
        mass[m - 1] += q * v[m - 1];
        v.truncate(m - 1);
        v.iter_mut().for_each(|g| *g *= q);
    }
    let total = kahan_sum(mass.iter().copied());
    if (total - 1.0).abs() > 1e-7 || mass.iter().any(|m| *m < -1e-12) {
        return Err(Error::Logic(format!("forward solve lost mass: total {total}")));
    }
    for m in mass.iter_mut() {
        *m = m.max(0.0) / total;
    }
    ExactPmf::new(mass)
}

/// Thomas algorithm with one right-hand-side vector per row.
fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    mut rhs: Vec<Vec<f64>>,
) -> Vec<Vec<f64>> {
    let len = diag.len();
    let mut c = vec![0.0; len];
    for i in 0..len {
        let pivot = if i == 0 {
            diag[0]
        } else {
            diag[i] - sub[i] * c[i - 1]
        };
        c[i] = sup[i] / pivot;
        if i > 0 {
            let (done, rest) = rhs.split_at_mut(i);
            for (x, prev) in rest[0].iter_mut().zip(&done[i - 1]) {
                *x -= sub[i] * prev;
            }
        }
        for x in rhs[i].iter_mut() {
            *x /= pivot;
        }
    }
    for i in (0..len.saturating_sub(1)).rev() {
        let (head, tail) = rhs.split_at_mut(i + 1);
        for (x, next) in head[i].iter_mut().zip(&tail[0]) {
            *x -= c[i] * next;
        }
    }
    rhs
}

/// Expected fixed-energy stabilization time `E[𝔍]` for `m` particles on `n`
/// sites: the initial count `Y(0) ~ Binomial(O, p)` with `O` the number of
/// occupied sites after throwing `m` particles uniformly, followed by the
/// `q = 0` count chain until it first reaches `m`.
pub fn exact_fixed_energy_mean(n: usize, p: f64, m: usize) -> Result<f64> {
    if n == 0 || n > MAX_FIXED_ENERGY_N {
        return Err(Error::Size(format!(
            "fixed-energy solve supports 1 ≤ n ≤ {MAX_FIXED_ENERGY_N}, got {n}"
        )));
    }
    if m == 0 || m > n {
        return Err(Error::domain(format!("need 1 ≤ m ≤ n, got m={m}, n={n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }

    let occupied = occupancy_pmf(n, m);
    let mut start = vec![0.0; m + 1];
    for (o, &w) in occupied.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (y, b) in binomial_pmf_vec(o, p).into_iter().enumerate() {
            start[y] += w * b;
        }
    }

    // step[y] = expected time to move from y to y + 1 (birth–death chain,
    // reflecting at 0): forward elimination of the first-passage system.
    let nf = n as f64;
    let mut step = vec![0.0; m];
    for y in 0..m {
        let up = (n - y) as f64 / nf * p;
        let down = y as f64 / nf * (1.0 - p);
        let prev = if y == 0 { 0.0 } else { step[y - 1] };
        step[y] = (1.0 + down * prev) / up;
    }
    // hit[y] = Σ_{k ≥ y} step[k]
    let mut hit = vec![0.0; m + 1];
    for y in (0..m).rev() {
        hit[y] = hit[y + 1] + step[y];
    }
    Ok(kahan_sum(start.iter().zip(&hit).map(|(w, h)| w * h)))
}

/// Law of the number of occupied boxes after `m` uniform throws into `n`.
fn occupancy_pmf(n: usize, m: usize) -> Vec<f64> {
    let top = m.min(n);
    let mut dist = vec![0.0; top + 1];
    dist[0] = 1.0;
    let nf = n as f64;
    for ball in 0..m {
        for k in (0..=top.min(ball + 1)).rev() {
            let stay = dist[k] * k as f64 / nf;
            let fresh = if k > 0 {
                dist[k - 1] * (n - (k - 1)) as f64 / nf
            } else {
                0.0
            };
            dist[k] = stay + fresh;
        }
    }
    dist
}

/// `P(Binomial(n, p) ≥ k)`.
///
/// Terms are evaluated individually with Loader's saddle-point form of the
/// binomial pmf (no catastrophic cancellation in the log-factorials), and
/// the smaller of the two tails is summed outward from `k` until the terms
/// become negligible.
pub fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mean = n as f64 * p;
    if k as f64 > mean {
        let mut acc = Kahan::default();
        for j in k..=n {
            let t = binomial_pmf(n, p, j);
            acc.add(t);
            if t < acc.sum * 1e-20 {
                break;
            }
        }
        acc.sum
    } else {
        let mut acc = Kahan::default();
        for j in (0..k).rev() {
            let t = binomial_pmf(n, p, j);
            acc.add(t);
            if t < acc.sum * 1e-20 {
                break;
            }
        }
        1.0 - acc.sum
    }
}

/// `P(Binomial(n, p) = x)`.
pub fn binomial_pmf(n: u64, p: f64, x: u64) -> f64 {
    if x > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x == 0 {
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let xf = x as f64;
    let yf = (n - x) as f64;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(yf) - bd0(xf, nf * p) - bd0(yf, nf * q);
    let lf = (2.0 * PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

fn binomial_pmf_vec(n: usize, p: f64) -> Vec<f64> {
    (0..=n as u64).map(|x| binomial_pmf(n as u64, p, x)).collect()
}

/// `ln(n!) − [(n + ½) ln n − n + ln √(2π)]` for integer-valued `n ≥ 1`.
fn stirlerr(n: f64) -> f64 {
    // exact values for small n (40-digit reference)
    const TABLE: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_258_219_67,
        0.041_340_695_955_409_294_093_82,
        0.027_677_925_684_998_339_148_79,
        0.020_790_672_103_765_093_111_52,
        0.016_644_691_189_821_192_163_19,
        0.013_876_128_823_070_747_998_75,
        0.011_896_709_945_891_770_095_06,
        0.010_411_265_261_972_096_497_48,
        0.009_255_462_182_712_732_917_729,
        0.008_330_563_433_362_871_256_469,
        0.007_573_675_487_951_840_794_972,
        0.006_942_840_107_209_529_865_664,
        0.006_408_994_188_004_207_068_44,
        0.005_951_370_112_758_847_735_624,
        0.005_554_733_551_962_801_371_039,
    ];
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return TABLE[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np − x`, evaluated by series near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Kahan::default();
    values.for_each(|v| acc.add(v));
    acc.sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn forward_law_matches_elimination() {
        for n in 1..=MAX_EXACT_N {
            for (p, q) in [(0.5, 1.0 / (n as f64 + 1.0)), (0.3, 0.2), (0.8, 0.05), (0.5, 1.0)] {
                let a = exact_final_pmf(n, p, q).unwrap();
                let b = exact_stopping_law(n, p, q).unwrap();
                for k in 0..=n {
                    assert!((a.prob(k) - b.prob(k)).abs() < 1e-12, "n={n} p={p} q={q} k={k}");
                }
            }
        }
    }

    #[test]
    fn forward_law_frozen_values() {
        // independent numpy banded solve
        let n = 2000;
        let q = (n as f64).powf(-1.25);
        let law = exact_stopping_law(n, 0.5, q).unwrap();
        assert!((law.mean() - 1066.5444887572562).abs() < 1e-6);
        let law = exact_stopping_law(3, 0.5, 1.0 / 3.0).unwrap();
        assert!((law.mean() - 1.8565830721003145).abs() < 1e-12);
    }

    #[test]
    fn final_pmf_hand_solve() {
        let pmf = exact_final_pmf(1, 0.5, 0.5).unwrap();
        assert_relative_eq!(pmf.prob(1), 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(pmf.prob(0), 1.0 / 3.0, max_relative = 1e-14);

        // P(S=1) = p + (1−p)(1−q)p / (1 − (1−q)(1−p)) for n = 1
        for (p, q) in [(0.3, 0.2), (0.7, 0.9), (0.5, 0.1)] {
            let pmf = exact_final_pmf(1, p, q).unwrap();
            let hand = p + (1.0 - p) * (1.0 - q) * p / (1.0 - (1.0 - q) * (1.0 - p));
            assert_relative_eq!(pmf.prob(1), hand, max_relative = 1e-13);
        }
    }

    #[test]
    fn final_pmf_degenerate_cases() {
        for n in 1..=MAX_EXACT_N {
            let pmf = exact_final_pmf(n, 1.0, 0.3).unwrap();
            assert_eq!(pmf.prob(n), 1.0);
        }
        let pmf = exact_final_pmf(1, 0.5, 1.0).unwrap();
        assert_relative_eq!(pmf.prob(1), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn final_pmf_q_one_is_binomial() {
        // every jump leaves, so each site keeps its particle iff it sleeps first
        let pmf = exact_final_pmf(7, 0.3, 1.0).unwrap();
        for k in 0..=7 {
            assert_relative_eq!(pmf.prob(k), binomial_pmf(7, 0.3, k as u64), max_relative = 1e-12);
        }
    }

    #[test]
    fn final_pmf_mass_sums_to_one() {
        for n in 1..=8 {
            for p in [0.3, 0.5, 0.7] {
                for q in [0.2, 0.5, 0.9] {
                    let pmf = exact_final_pmf(n, p, q).unwrap();
                    let total: f64 = pmf.mass().iter().sum();
                    assert!((total - 1.0).abs() < 1e-10, "n={n} p={p} q={q}: {total}");
                }
            }
        }
    }

    #[test]
    fn final_pmf_errors() {
        assert!(matches!(exact_final_pmf(13, 0.5, 0.5), Err(Error::Size(_))));
        assert!(matches!(exact_final_pmf(3, 0.5, 0.0), Err(Error::Domain(_))));
        assert!(exact_final_pmf(0, 0.5, 0.5).is_err());
    }

    #[test]
    fn fixed_energy_mean_examples() {
        assert_relative_eq!(exact_fixed_energy_mean(1, 0.5, 1).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(exact_fixed_energy_mean(2, 0.5, 1).unwrap(), 1.0, max_relative = 1e-14);
        for n in [1, 5, 40] {
            assert_eq!(exact_fixed_energy_mean(n, 1.0, 1).unwrap(), 0.0);
        }
        assert!(exact_fixed_energy_mean(3, 0.5, 4).is_err());
        assert!(exact_fixed_energy_mean(3, 0.5, 0).is_err());
    }

    #[test]
    fn fixed_energy_mean_n2_m2_by_hand() {
        // n = 2, m = 2, p = 1/2. O = 1 w.p. 1/2, else 2. Y0 | O ~ Bin(O, 1/2):
        // P(Y0=0) = 3/8, P(Y0=1) = 1/2, P(Y0=2) = 1/8.
        // From 0 only up, w.p. 1/2, so step0 = 2. From 1: up 1/4, down 1/4,
        // step1 = (1 + step0/4)/(1/4).
        let step0 = 2.0;
        let step1 = (1.0 + 0.25 * step0) / 0.25;
        let expect = 3.0 / 8.0 * (step0 + step1) + 0.5 * step1;
        assert_relative_eq!(exact_fixed_energy_mean(2, 0.5, 2).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn occupancy_matches_formula() {
        for (n, m) in [(10, 3), (100, 50), (7, 7)] {
            let d = occupancy_pmf(n, m);
            let total: f64 = d.iter().sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
            let mean: f64 = d.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
            let nf = n as f64;
            let expect = nf * (1.0 - (1.0 - 1.0 / nf).powi(m as i32));
            assert_relative_eq!(mean, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn binomial_tail_trivial() {
        assert_eq!(binomial_tail(10, 0.3, 0), 1.0);
        assert_eq!(binomial_tail(10, 0.3, 11), 0.0);
        assert_relative_eq!(binomial_tail(2, 0.5, 2), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn binomial_tail_high_precision_references() {
        // 40-digit references (mpmath direct summation)
        let cases: [(u64, f64, u64, f64); 9] = [
            (10_000, 0.5, 5100, 0.023_292_763_852_473_694_39),
            (10_000, 0.5, 5200, 3.296_757_799_336_221_029_4e-5),
            (10_000, 0.5, 5000, 0.503_989_323_069_691_076_88),
            (1_000_000, 0.5, 501_000, 0.022_804_149_932_691_043_21),
            (1_000_000, 0.3, 299_000, 0.985_512_230_190_748_508_02),
            (1000, 0.1, 150, 4.489_442_859_450_022_844_2e-7),
            (50, 0.7, 20, 0.999_997_153_300_246_032_91),
            (1_000_000, 0.5, 503_000, 9.925_748_819_615_103_784_2e-10),
            (200, 0.5, 100, 0.528_174_239_504_628_211_12),
        ];
        for (n, p, k, want) in cases {
            let got = binomial_tail(n, p, k);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "tail({n},{p},{k}) = {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for (n, p) in [(1u64, 0.5), (17, 0.05), (300, 0.93), (5000, 0.5)] {
            let total = kahan_sum((0..=n).map(|x| binomial_pmf(n, p, x)));
            assert_relative_eq!(total, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn tv_distance_of_exact_counts_is_zero() {
        let pmf = ExactPmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert!(pmf.tv_distance(&[1, 2, 1]) < 1e-15);
        assert_relative_eq!(pmf.tv_distance(&[4, 0, 0]), 0.75);
    }
}
