//! Adaptive Simpson quadrature.
//!
//! The densities integrated here are piecewise smooth with a single jump
//! at the volatility threshold, so the caller splits the domain there and
//! integrates each smooth piece on its own. Within a piece the classic
//! adaptive Simpson refinement with the |S_fine − S_coarse|/15 error
//! gauge is plenty.

/// Integral value together with the accumulated error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
}

const MAX_DEPTH: u32 = 60;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err_acc: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        *err_acc += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, err_acc)
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, err_acc)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error_estimate: 0.0,
        };
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // Seed with a handful of panels so a symmetric integrand cannot fool
    // the first refinement step.
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let xm = 0.5 * (x0 + x1);
        let f0 = f(x0);
        let fm = f(xm);
        let f1 = f(x1);
        let whole = simpson(f0, fm, f1, h);
        total += adapt(
            &f,
            x0,
            x1,
            f0,
            fm,
            f1,
            whole,
            tol / panels as f64,
            0,
            &mut err,
        );
    }
    QuadResult {
        value: sign * total,
        error_estimate: err,
    }
}

/// Integrate over `[a, b]` splitting the domain at each interior point of
/// `splits` (points outside `(a, b)` are ignored).
pub fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, splits: &[f64], tol: f64) -> QuadResult {
    let mut cuts: Vec<f64> = splits.iter().copied().filter(|s| *s > a && *s < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut points = Vec::with_capacity(cuts.len() + 2);
    points.push(a);
    points.extend(cuts);
    points.push(b);
    let per = tol / (points.len() - 1) as f64;
    let mut value = 0.0;
    let mut err = 0.0;
    for w in points.windows(2) {
        let r = integrate(&f, w[0], w[1], per);
        value += r.value;
        err += r.error_estimate;
    }
    QuadResult {
        value,
        error_estimate: err,
    }
}
