//! Composite 8-point Gauss-Legendre quadrature on an interval.

/// Positive abscissae of the 8-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

/// Weights paired with `GL8_NODES`.
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Integrate `f` over `[a, b]` with `panels` equal subintervals, an 8-point
/// Gauss-Legendre rule on each. Nodes are strictly interior, so `f` is never
/// evaluated at panel boundaries.
pub(crate) fn integrate_panels(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
) -> f64 {
    debug_assert!(panels >= 1);
    let step = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + step * p as f64;
        let mid = lo + step / 2.0;
        let half = step / 2.0;
        let mut acc = 0.0;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            acc += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += acc * half;
    }
    total
}
