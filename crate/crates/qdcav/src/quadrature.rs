//! Quadrature and special-function utilities.
//!
//! Adaptive Gauss–Kronrod (7/15) for smooth or mildly oscillatory integrands,
//! Gauss–Legendre nodes, Legendre polynomials, spherical Bessel functions of the
//! first kind and the Dawson integral. The Legendre/Bessel pair backs the
//! panel-wise Fourier integration in `phonon_kernel`.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e} after {subdivisions} subdivisions")]
    NoConvergence { a: f64, b: f64, error: f64, subdivisions: usize },
    #[error("integrand produced a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-10, rel_tol: 1e-12, max_subdivisions: 2000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn qk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Result<(C64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !(fc.re.is_finite() && fc.im.is_finite()) {
        return Err(QuadError::NonFinite { x: c });
    }
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        for (v, x) in [(f1, c - dx), (f2, c + dx)] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(QuadError::NonFinite { x });
            }
        }
        kron += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).norm();
    Ok((value, err))
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature of a complex integrand.
pub fn gauss_kronrod<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evaluations: 0 });
    }
    let (v, e) = qk15(&mut f, a, b)?;
    let mut intervals = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: C64 = intervals.iter().map(|t| t.2).sum();
        let err: f64 = intervals.iter().map(|t| t.3).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, evaluations });
        }
        if intervals.len() >= opts.max_subdivisions {
            return Err(QuadError::NoConvergence { a, b, error: err, subdivisions: intervals.len() });
        }
        let (k, _) = intervals.iter().enumerate().fold((0, -1.0), |(bk, be), (k, t)| if t.3 > be { (k, t.3) } else { (bk, be) });
        let (lo, hi, _, _) = intervals.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(QuadError::NoConvergence { a, b, error: err, subdivisions: intervals.len() });
        }
        let (v1, e1) = qk15(&mut f, lo, mid)?;
        let (v2, e2) = qk15(&mut f, mid, hi)?;
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// P_0(x) .. P_n(x) into `out` (length n + 1).
pub fn legendre_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = ((2 * k - 1) as f64 * x * out[k - 1] - (k - 1) as f64 * out[k - 2]) / k as f64;
    }
}

/// Spherical Bessel functions j_0(x) .. j_n(x) into `out` (length n + 1).
///
/// Power series for small |x|, upward recurrence when |x| exceeds the highest
/// order, Miller's backward recurrence otherwise.
pub fn spherical_bessel_j(x: f64, out: &mut [f64]) {
    let n = match out.len() {
        0 => return,
        l => l - 1,
    };
    let ax = x.abs();
    if ax == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if ax < 0.5 {
        let y = -0.5 * ax * ax;
        let mut lead = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= ax / (2 * k + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..30 {
                term *= y / (m as f64 * (2 * k + 2 * m + 1) as f64);
                sum += term;
                if term.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            *o = lead * sum;
        }
    } else if ax > n as f64 {
        let (s, c) = ax.sin_cos();
        out[0] = s / ax;
        if n >= 1 {
            out[1] = s / (ax * ax) - c / ax;
        }
        for k in 1..n {
            out[k + 1] = (2 * k + 1) as f64 / ax * out[k] - out[k - 1];
        }
    } else {
        let start = n + 20 + ax.ceil() as usize;
        let mut jp1 = 0.0f64;
        let mut j = 1e-300f64;
        for k in (1..=start).rev() {
            let jm1 = (2 * k + 1) as f64 / ax * j - jp1;
            jp1 = j;
            j = jm1;
            if k - 1 <= n {
                out[k - 1] = j;
            }
            if j.abs() > 1e250 {
                j *= 1e-250;
                jp1 *= 1e-250;
                for o in out.iter_mut().skip(k - 1) {
                    *o *= 1e-250;
                }
            }
        }
        let (s, c) = ax.sin_cos();
        let j0 = s / ax;
        let j1 = s / (ax * ax) - c / ax;
        let scale = if j0.abs() >= j1.abs() || n == 0 { j0 / out[0] } else { j1 / out[1] };
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
    if x < 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *o = -*o;
            }
        }
    }
}

/// Dawson integral F(x) = exp(-x²) ∫₀ˣ exp(t²) dt.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < 6.0 {
        // All-positive series: exp(-x²) Σ x^(2n+1) / (n! (2n+1)).
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut n = 0usize;
        loop {
            n += 1;
            term *= x2 / n as f64;
            let t = term / (2 * n + 1) as f64;
            sum += t;
            if t <= 1e-17 * sum {
                break;
            }
        }
        sum * (-x2).exp()
    } else {
        // Asymptotic series 1/(2x) Σ (2k-1)!! / (2x²)^k, truncated at its smallest term.
        let y = 1.0 / (2.0 * ax * ax);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let next = term * (2 * k - 1) as f64 * y;
            if next > term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * ax)
    };
    v.copysign(x)
}
