//! One-dimensional search helpers shared by the solvers and the oracle.

/// 1 / golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Result of a bracketed scalar maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineMax {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search until the
/// bracket is narrower than `tol`. Both endpoints are also evaluated so that
/// monotone objectives return the boundary exactly.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> LineMax
where
    F: FnMut(f64) -> f64,
{
    let mut best = LineMax {
        x: lo,
        value: f(lo),
        evaluations: 1,
    };
    if !(hi > lo) {
        return best;
    }
    let consider = |x: f64, v: f64, best: &mut LineMax| {
        if v > best.value || (best.value.is_nan() && !v.is_nan()) {
            best.x = x;
            best.value = v;
        }
    };

    let fh = f(hi);
    best.evaluations += 1;
    consider(hi, fh, &mut best);

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    best.evaluations += 2;
    let mut iter = 0;
    while b - a > tol && iter < max_iter {
        // ties move right so a flat -inf prefix does not trap the search
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        best.evaluations += 1;
        iter += 1;
    }
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    best
}

/// `n` points spread uniformly over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// True when `a` and `b` are equal up to `rel_tol` relative difference.
/// Two negative infinities compare equal.
fn same_level(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Counts strict local maxima of a sampled curve after merging runs of
/// samples that agree within `rel_tol` into single plateaus. The end runs
/// count as maxima when they exceed their only neighbour. Returns the count
/// together with the index of the first global maximum.
pub fn count_local_maxima(values: &[f64], rel_tol: f64) -> (usize, usize) {
    let argmax = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0;
    if values.is_empty() {
        return (0, 0);
    }

    let mut levels: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        match levels.last() {
            Some(&last) if same_level(last, v, rel_tol) => {}
            _ => levels.push(v),
        }
    }
    if levels.len() == 1 {
        return (1, argmax);
    }
    let m = levels.len();
    let count = (0..m)
        .filter(|&k| {
            let left = k == 0 || levels[k] > levels[k - 1];
            let right = k == m - 1 || levels[k] > levels[k + 1];
            left && right
        })
        .count();
    (count, argmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_finds_interior_peak() {
        let r = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10, 500);
        assert_abs_diff_eq!(r.x, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn golden_returns_boundaries_for_monotone() {
        let r = golden_section_max(|x| x, 0.0, 2.0, 1e-8, 500);
        assert_eq!(r.x, 2.0);
        let r = golden_section_max(|x| -x, 0.0, 2.0, 1e-8, 500);
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn golden_skips_infeasible_prefix() {
        let f = |x: f64| if x < 0.5 { f64::NEG_INFINITY } else { -(x - 0.7).powi(2) };
        let r = golden_section_max(f, 0.0, 1.0, 1e-10, 500);
        assert_abs_diff_eq!(r.x, 0.7, epsilon = 1e-8);
    }

    #[test]
    fn golden_collapsed_box() {
        let r = golden_section_max(|x| x, 0.0, 0.0, 1e-8, 500);
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn maxima_counting() {
        assert_eq!(count_local_maxima(&[1.0, 2.0, 3.0, 2.0, 1.0], 1e-12), (1, 2));
        assert_eq!(count_local_maxima(&[1.0, 2.0, 1.0, 2.0, 1.0], 1e-12).0, 2);
        assert_eq!(count_local_maxima(&[1.0, 1.0, 1.0], 1e-12).0, 1);
        assert_eq!(count_local_maxima(&[3.0, 2.0, 1.0], 1e-12), (1, 0));
        assert_eq!(count_local_maxima(&[1.0, 2.0, 3.0], 1e-12), (1, 2));
        // a flat top sampled with rounding noise is one plateau
        assert_eq!(
            count_local_maxima(&[1.0, 2.0, 2.0 + 1e-15, 2.0, 2.0 + 1e-15, 1.0], 1e-12).0,
            1
        );
        let ninf = f64::NEG_INFINITY;
        assert_eq!(count_local_maxima(&[ninf, ninf, 1.0, 2.0, 1.0, ninf], 1e-12).0, 1);
        assert_eq!(count_local_maxima(&[ninf, ninf], 1e-12).0, 1);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 1.0, 5);
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }
}
