//! Recursive adaptive Simpson integration with an error accumulator.

/// Outcome of an adaptive pass: estimate, accumulated error estimate, and
/// whether every subinterval met its tolerance before the depth cap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive Simpson on `[a, b]` targeting absolute accuracy `eps`.
pub(crate) fn adaptive_simpson(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    eps: f64,
    max_depth: u32,
) -> AdaptiveResult {
    let fa = f(a);
    let fm = f((a + b) / 2.0);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    let mut out = AdaptiveResult {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    recurse(f, a, b, fa, fm, fb, whole, eps, max_depth, &mut out);
    out
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    out: &mut AdaptiveResult,
) {
    let m = (a + b) / 2.0;
    let lm = (a + m) / 2.0;
    let rm = (m + b) / 2.0;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // the relative floor stops recursion from chasing accuracy below
    // rounding noise when the requested eps is unattainable
    let settled = delta.abs() <= 15.0 * eps || delta.abs() <= 1e-13 * (left + right).abs();
    if settled || m <= a || m >= b {
        out.value += left + right + delta / 15.0;
        out.error += delta.abs() / 15.0;
        return;
    }
    if depth == 0 {
        out.value += left + right + delta / 15.0;
        out.error += delta.abs() / 15.0;
        out.converged = false;
        return;
    }
    recurse(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1, out);
    recurse(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_function() {
        let mut f = |x: f64| (2.0 * x).cos();
        let r = adaptive_simpson(&mut f, 0.0, 1.0, 1e-12, 40);
        assert!(r.converged);
        assert!((r.value - 2.0_f64.sin() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn handles_kinked_integrand() {
        let mut f = |x: f64| (x - 0.3).abs();
        let r = adaptive_simpson(&mut f, 0.0, 1.0, 1e-10, 40);
        assert!(r.converged);
        let expected = 0.3_f64.powi(2) / 2.0 + 0.7_f64.powi(2) / 2.0;
        assert!((r.value - expected).abs() < 1e-8);
    }

    #[test]
    fn reports_non_convergence_at_depth_cap() {
        let mut f = |x: f64| if x < 0.331 { 0.0 } else { 1.0 };
        let r = adaptive_simpson(&mut f, 0.0, 1.0, 1e-14, 3);
        assert!(!r.converged);
    }
}
