//! Bracketed scalar root finding (Brent's method, zeroin variant).

/// Root of `f` in `[a, b]` given `fa = f(a)` and `fb = f(b)` of opposite sign
/// (or zero). Stops when the bracket is narrower than `xtol` (plus a few ulps
/// of `x`), when `|f| <= ftol`, or after `max_evals` new evaluations.
pub(crate) fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    xtol: f64,
    ftol: f64,
    max_evals: usize,
) -> f64 {
    debug_assert!(fa * fb <= 0.0, "root not bracketed");
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let mut evaluations = 0;
    loop {
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= ftol || evaluations >= max_evals {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        evaluations += 1;
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let mut calls = 0;
        let f = |x: f64| {
            calls += 1;
            x * x - 2.0
        };
        let r = brent(f, 0.0, -2.0, 2.0, 2.0, 1e-15, 0.0, 100);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(calls < 15);

        let g = |x: f64| (-x).exp() - x;
        let r = brent(g, 0.0, g(0.0), 1.0, g(1.0), 1e-15, 0.0, 100);
        assert!(g(r).abs() < 1e-14);
    }

    #[test]
    fn handles_kinks_and_endpoint_roots() {
        let f = |x: f64| if x < 0.3 { -1.0 } else { x - 0.3 + 1e-3 };
        let r = brent(f, 0.0, f(0.0), 1.0, f(1.0), 1e-13, 0.0, 200);
        assert!((r - 0.3).abs() < 1e-12);

        let g = |x: f64| x;
        let r = brent(g, 0.0, 0.0, 1.0, 1.0, 1e-13, 0.0, 10);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn respects_function_tolerance() {
        let r = brent(|_| panic!("no evaluation expected"), 0.0, -0.5, 1.0, 0.5, 0.0, 0.6, 10);
        assert_eq!(r, 1.0);
    }
}
