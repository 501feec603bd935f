//! Gauss–Legendre quadrature over axis-aligned boxes.

use num_traits::Float;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre<F: Float>(n: usize) -> Vec<(F, F)> {
    let one = F::one();
    let two = one + one;
    let nf = F::from(n).unwrap();
    let pi = F::from(std::f64::consts::PI).unwrap();
    let quarter = F::from(0.25).unwrap();
    let half = F::from(0.5).unwrap();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (pi * (F::from(i).unwrap() + one - quarter) / (nf + half)).cos();
        let mut dp = F::zero();
        for _ in 0..100 {
            let (mut p0, mut p1) = (one, x);
            for k in 2..=n {
                let kf = F::from(k).unwrap();
                let p2 = ((two * kf - one) * x * p1 - (kf - one) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - one);
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= F::epsilon() * F::from(4).unwrap() {
                break;
            }
        }
        let w = two / ((one - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

/// Tensor-product rule on `[a_1, b_1] × … × [a_d, b_d]`.
pub fn integrate_box<F: Float>(
    f: &mut dyn FnMut(&[F]) -> F,
    bounds: &[(F, F)],
    points: usize,
) -> F {
    let rule = gauss_legendre::<F>(points);
    let d = bounds.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![F::zero(); d];
    let half = F::from(0.5).unwrap();
    let mut total = F::zero();
    loop {
        let mut w = F::one();
        for k in 0..d {
            let (a, b) = bounds[k];
            let (node, weight) = rule[idx[k]];
            x[k] = (b - a) * half * node + (a + b) * half;
            w = w * weight * (b - a) * half;
        }
        total = total + w * f(&x);
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
