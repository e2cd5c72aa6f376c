//! One-dimensional quadrature used by the control phase and frame diagnostics.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Recursion depth is capped at 50; at that depth the local estimate is
/// accepted as is.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson rule on uniformly spaced samples. An even number of
/// intervals is required; a trailing odd interval falls back to the
/// three-eighths rule over the last three intervals.
pub fn simpson_uniform(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        3 => h / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let intervals = n - 1;
            if intervals.is_multiple_of(2) {
                simpson_even(samples, h)
            } else {
                let head = &samples[..n - 3];
                let tail = &samples[n - 4..];
                simpson_even(head, h) + 3.0 * h / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3])
            }
        }
    }
}

fn simpson_even(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = samples[0] + samples[n - 1];
    for (i, v) in samples.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

pub fn trapezoid_uniform(samples: &[f64], h: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let inner: f64 = samples[1..samples.len() - 1].iter().sum();
    h * (0.5 * (samples[0] + samples[samples.len() - 1]) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_simpson_integrates_smooth_and_peaked_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        // Lorentzian of width 1e-3: integral = atan(1/w) + atan(1/w) over [-1, 1].
        let w: f64 = 1e-3;
        let g = |x: f64| w / (x * x + w * w);
        let exact = 2.0 * (1.0 / w).atan();
        let v = adaptive_simpson(&g, -1.0, 1.0, 1e-11);
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn composite_rules_on_polynomials() {
        let h = 0.1;
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * h).collect();
        let cubic: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        assert!((simpson_uniform(&cubic, h) - 0.25).abs() < 1e-14);
        let xs: Vec<f64> = (0..=9).map(|i| i as f64 * h).collect();
        let cubic: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        let exact = 0.9f64.powi(4) / 4.0;
        assert!((simpson_uniform(&cubic, h) - exact).abs() < 1e-14);
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid_uniform(&lin, h) - (0.81 + 0.9)).abs() < 1e-14);
    }
}
