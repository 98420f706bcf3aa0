//! Small quadrature and interpolation helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive Simpson on `[a, b]`. Also enforces `|∫| ≤ max_piece` on every
/// accepted subinterval. Errors from `f` are propagated.
pub fn adaptive_simpson<E>(
    f: &mut dyn FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
    max_piece: f64,
) -> Result<f64, E> {
    let fa = f(a)?;
    let fm = f(0.5 * (a + b))?;
    let fb = f(b)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_piece, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<E>(
    f: &mut dyn FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    max_piece: f64,
    depth: u32,
) -> Result<f64, E> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || (delta.abs() <= 15.0 * tol && whole.abs() <= max_piece) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, max_piece, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, max_piece, depth - 1)?)
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and derivatives.
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `t`.
pub fn hermite_derivative(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return d0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let g00 = 6.0 * s2 - 6.0 * s;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = -6.0 * s2 + 6.0 * s;
    let g11 = 3.0 * s2 - 2.0 * s;
    (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let mut f = |t: f64| -> Result<f64, ()> { Ok(t.sin() * t.exp()) };
        let v = adaptive_simpson(&mut f, 0.0, 2.0, 1e-13, 0.1).unwrap();
        let exact = 0.5 * (2f64.exp() * (2f64.sin() - 2f64.cos()) + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let d = |t: f64| 3.0 * t * t - 2.0;
        for t in [0.3, 0.5, 1.1] {
            assert!((hermite(0.2, 1.3, f(0.2), f(1.3), d(0.2), d(1.3), t) - f(t)).abs() < 1e-14);
            assert!((hermite_derivative(0.2, 1.3, f(0.2), f(1.3), d(0.2), d(1.3), t) - d(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
