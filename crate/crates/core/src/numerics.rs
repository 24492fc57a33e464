//! Root finding and quadrature used by the two-vortex reduction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

fn gk15<F>(f: &mut F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[lo, hi]`.
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn integrate_adaptive<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if lo == hi {
        return Ok(0.0);
    }
    let (value, error) = gk15(&mut f, lo, hi)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { lo, hi, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo.min(worst.hi) || mid >= worst.lo.max(worst.hi) {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.hi)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Segment { lo: mid, hi: worst.hi, value: v2, error: e2 });
    }
    // Re-sum to shed the running-update round-off.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Bisection on a sign change of `f` in `[lo, hi]`. Returns the final bracket
/// `(a, b)` with `f(a)` carrying the sign of `f(lo)`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoRoot(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Root of an increasing function inside a valid bracket, by Newton steps that
/// fall back to bisection whenever they leave the bracket or stall.
/// `f` returns `(value, derivative)`.
pub fn newton_bracketed<F>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (f_lo, _) = f(lo)?;
    let (f_hi, _) = f(hi)?;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NoRoot(format!(
            "bracket [{lo}, {hi}] does not straddle the root ({f_lo}, {f_hi})"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    let mut best = (f64::INFINITY, x);
    // Bisect whenever Newton fails to halve the step, so exponential tails
    // cannot stall progress.
    let mut last_step = hi - lo;
    for _ in 0..400 {
        let (fx, dfx) = f(x)?;
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0
            && dfx.is_finite()
            && newton > lo
            && newton < hi
            && 2.0 * (newton - x).abs() <= last_step
        {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            // Bracket collapsed to adjacent floats: return the best residual seen.
            return Ok(best.1);
        }
        last_step = (next - x).abs();
        x = next;
    }
    Err(Error::NoRoot(format!("no convergence in [{lo}, {hi}]")))
}

/// Running integral of sampled values `ys(ts)`, starting from zero. Each panel
/// integrates the cubic through the four nearest samples, so the rule is fourth
/// order on smooth data and handles non-uniform spacing.
pub fn cumulative_integral(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(ts.len(), ys.len());
    let n = ts.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(0.0);
    let g = 0.5 / 3f64.sqrt();
    for k in 0..n.saturating_sub(1) {
        let start = k.saturating_sub(1).min(n.saturating_sub(4.min(n)));
        let end = (start + 4).min(n);
        let (xs, vs) = (&ts[start..end], &ys[start..end]);
        let (a, b) = (ts[k], ts[k + 1]);
        let mid = 0.5 * (a + b);
        let h = b - a;
        let panel = 0.5 * h * (lagrange(xs, vs, mid - g * h) + lagrange(xs, vs, mid + g * h));
        out.push(out[k] + panel);
    }
    out
}

fn lagrange(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let mut w = 1.0;
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * vs[i];
    }
    acc
}

/// Ordinary least-squares line `y = slope·x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Some((slope, intercept, (rss / nf).sqrt()))
}
