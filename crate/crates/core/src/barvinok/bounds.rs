//! The bound polynomials, evaluated both directly and in log-space.

use serde::Serialize;

use crate::crofton;

/// `c(k) = ⌊(1 + √(17 + 24k)) / 2⌋`, the corank bound, in exact integer
/// arithmetic. Satisfies `c(c+1)/2 > 3k + 2`.
pub fn c_of_k(k: usize) -> usize {
    let m = 17 + 24 * k;
    let s = m.isqrt();
    // For non-square m, ⌊(1+√m)/2⌋ = ⌊(1+⌊√m⌋)/2⌋ = ⌈⌊√m⌋/2⌉.
    let c = s.div_ceil(2);
    assert!(c * (c + 1) / 2 > 3 * k + 2, "c({k}) = {c} violates c(c+1)/2 > 3k+2");
    c
}

/// A bound value with its natural logarithm. `value` is the direct
/// floating-point product (infinite on overflow); `ln` is always finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub ln: f64,
}

impl Bound {
    fn from_parts(value: f64, ln: f64) -> Bound {
        Bound { value, ln }
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    /// True when `x ≤ bound`, compared in log-space for large bounds.
    pub fn admits(&self, x: f64) -> bool {
        x <= 0.0 || x.ln() <= self.ln
    }

    fn scale(self, factor: f64) -> Bound {
        Bound::from_parts(self.value * factor, self.ln + factor.ln())
    }
}

fn powi(base: f64, e: usize) -> f64 {
    base.powi(e as i32)
}

/// Number of pivot patterns: `(c+1) n^{2c}`.
pub fn bound_pattern_count(k: usize, n: usize) -> Bound {
    let c = c_of_k(k);
    let nf = n as f64;
    Bound::from_parts((c + 1) as f64 * powi(nf, 2 * c), ((c + 1) as f64).ln() + (2 * c) as f64 * nf.ln())
}

/// Components per pattern: `(4n+3)(8n+5)^{2k+1+c}`.
pub fn bound_component(k: usize, n: usize) -> Bound {
    let c = c_of_k(k);
    let nf = n as f64;
    let e = 2 * k + 1 + c;
    Bound::from_parts((4.0 * nf + 3.0) * powi(8.0 * nf + 5.0, e), (4.0 * nf + 3.0).ln() + e as f64 * (8.0 * nf + 5.0).ln())
}

/// `p_k(n) = (c+1) n^{2c} (4n+3)(8n+5)^{2k+1+c}`.
pub fn bound_p(k: usize, n: usize) -> Bound {
    let a = bound_pattern_count(k, n);
    let b = bound_component(k, n);
    Bound::from_parts(a.value * b.value, a.ln + b.ln)
}

/// `q_k(n) = 2√π n p_k(n)`.
pub fn bound_q(k: usize, n: usize) -> Bound {
    bound_p(k, n).scale(2.0 * std::f64::consts::PI.sqrt() * n as f64)
}

/// `r_k(n) = 2 q_{k+1}(n+k+1)`.
pub fn bound_r(k: usize, n: usize) -> Bound {
    bound_q(k + 1, n + k + 1).scale(2.0)
}

/// `s_k(n) = r_{2k}(n)`.
pub fn bound_s(k: usize, n: usize) -> Bound {
    bound_r(2 * k, n)
}

/// `t_k(n) = s_{k+1}(n+k+1)`: the strict-inequality bound, with the
/// conservative convention that all `k` constraints and the ball are lifted.
pub fn bound_t(k: usize, n: usize) -> Bound {
    bound_s(k + 1, n + k + 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub name: &'static str,
    /// `None` when the bound needs `k ≥ 1`.
    pub log10: Option<f64>,
    pub value: Option<f64>,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub n: usize,
    pub c: usize,
    pub nu: f64,
    pub rows: Vec<BoundRow>,
}

/// All bounds for `(k, n)`, plus `c(k)` and `ν(n)`.
pub fn bound_report(k: usize, n: usize) -> BoundReport {
    assert!(n >= 1, "n must be ≥ 1");
    type BoundFn = fn(usize, usize) -> Bound;
    let table: [(&'static str, BoundFn, bool, &'static str); 7] = [
        ("pattern_count", bound_pattern_count, false, "(c+1) n^(2c)"),
        ("component", bound_component, false, "(4n+3)(8n+5)^(2k+1+c)"),
        ("p", bound_p, false, "components of h ∩ thalweg"),
        ("q", bound_q, false, "2√π n p_k(n)"),
        ("r", bound_r, true, "2 q_(k+1)(n+k+1)"),
        ("s", bound_s, true, "r_(2k)(n)"),
        ("t", bound_t, true, "s_(k+1)(n+k+1), artifact convention"),
    ];
    let rows = table
        .iter()
        .map(|&(name, f, needs_k, note)| {
            if needs_k && k == 0 {
                return BoundRow { name, log10: None, value: None, note: "n/a (needs k ≥ 1)" };
            }
            let b = f(k, n);
            let b_next = f(k, n + 1);
            assert!(b_next.ln > b.ln, "bound {name} not increasing in n at ({k}, {n})");
            BoundRow {
                name,
                log10: Some(b.log10()),
                value: b.value.is_finite().then_some(b.value),
                note,
            }
        })
        .collect();
    BoundReport {
        k,
        n,
        c: c_of_k(k),
        nu: crofton::nu(n),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_table() {
        assert_eq!((0..4).map(c_of_k).collect::<Vec<_>>(), vec![2, 3, 4, 5]);
        for k in 0..2000 {
            let c = c_of_k(k) as f64;
            let direct = ((1.0 + (17.0 + 24.0 * k as f64).sqrt()) / 2.0).floor();
            assert_eq!(c, direct);
        }
    }

    #[test]
    fn p_matches_its_factors() {
        for k in 0..5 {
            for n in [1, 2, 7, 100] {
                let p = bound_p(k, n);
                let lhs = bound_pattern_count(k, n).ln + bound_component(k, n).ln;
                assert!((p.ln - lhs).abs() <= 1e-12 * p.ln.abs().max(1.0));
                assert!((p.value.ln() - p.ln).abs() < 1e-9 || !p.value.is_finite());
            }
        }
        assert_eq!(bound_p(1, 2).value, 241_517_396_736.0);
    }

    #[test]
    fn k_zero_rows_marked() {
        let r = bound_report(0, 3);
        assert_eq!(r.c, 2);
        assert!(r.rows.iter().filter(|row| row.log10.is_none()).count() == 3);
        let far = bound_report(10, 1_000_000);
        assert!(far.rows.iter().all(|row| row.log10.unwrap().is_finite()));
    }
}
