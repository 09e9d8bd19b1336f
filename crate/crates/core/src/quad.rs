//! Quadrature rules: Gauss–Legendre, Gauss–Hermite, and globally adaptive Gauss–Kronrod (7/15).

use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{CarnotError, Result};
use crate::hermite::hermite_phi_pair;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct GkOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for GkOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct GkResult {
    pub values: Vec<Complex64>,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

struct Interval {
    a: f64,
    b: f64,
    k: Vec<Complex64>,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [Complex64]) -> (Vec<Complex64>, f64)
where
    F: FnMut(f64, &mut [Complex64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![Complex64::new(0.0, 0.0); dim];
    let mut g = vec![Complex64::new(0.0, 0.0); dim];
    f(c, buf);
    for i in 0..dim {
        k[i] += buf[i] * WGK[7];
        g[i] += buf[i] * WG[3];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for i in 0..dim {
                k[i] += buf[i] * WGK[j];
                if j % 2 == 1 {
                    g[i] += buf[i] * WG[j / 2];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..dim {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).norm());
    }
    (k, err)
}

/// Globally adaptive G7/K15 for a vector of complex outputs on [a, b].
/// The error criterion is the maximum component error against
/// `max(abs_tol, rel_tol * max_i |I_i|)`.
pub fn gk_adaptive_vec<F>(mut f: F, a: f64, b: f64, dim: usize, opts: GkOptions) -> Result<GkResult>
where
    F: FnMut(f64, &mut [Complex64]),
{
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let (k, err) = gk15(&mut f, a, b, dim, &mut buf);
    let mut heap = BinaryHeap::new();
    let mut total = k.clone();
    let mut total_err = err;
    heap.push(Interval { a, b, k, err });
    let mut evals = 15;
    loop {
        let scale = total.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if total_err <= target {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(CarnotError::Accuracy(format!(
                "adaptive quadrature on [{a}, {b}] stopped at {} intervals with error {total_err:e} > {target:e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (k1, e1) = gk15(&mut f, worst.a, mid, dim, &mut buf);
        let (k2, e2) = gk15(&mut f, mid, worst.b, dim, &mut buf);
        evals += 30;
        for i in 0..dim {
            total[i] += k1[i] + k2[i] - worst.k[i];
        }
        total_err += e1 + e2 - worst.err;
        heap.push(Interval { a: worst.a, b: mid, k: k1, err: e1 });
        heap.push(Interval { a: mid, b: worst.b, k: k2, err: e2 });
        if heap.len() % 64 == 0 {
            // resum to stop drift in the running totals
            total = vec![Complex64::new(0.0, 0.0); dim];
            total_err = 0.0;
            for iv in heap.iter() {
                for i in 0..dim {
                    total[i] += iv.k[i];
                }
                total_err += iv.err;
            }
        }
    }
    let mut values = vec![Complex64::new(0.0, 0.0); dim];
    let mut sorted: Vec<&Interval> = heap.iter().collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    for iv in sorted {
        for i in 0..dim {
            values[i] += iv.k[i];
        }
    }
    Ok(GkResult { values, error: total_err, intervals: heap.len(), evaluations: evals })
}

pub fn gk_complex<F>(mut f: F, a: f64, b: f64, opts: GkOptions) -> Result<(Complex64, f64)>
where
    F: FnMut(f64) -> Complex64,
{
    let r = gk_adaptive_vec(|x, out: &mut [Complex64]| out[0] = f(x), a, b, 1, opts)?;
    Ok((r.values[0], r.error))
}

pub fn gk_real<F>(mut f: F, a: f64, b: f64, opts: GkOptions) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let (v, e) = gk_complex(|x| Complex64::new(f(x), 0.0), a, b, opts)?;
    Ok((v.re, e))
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Hermite rule for weight e^{-x²}. Returns nodes, weights, and the
/// modified weights w_i e^{x_i²} used for integrals of functions that already decay.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Hermite needs at least one node");
        let mut nodes = vec![0.0; n];
        let nf = n as f64;
        // initial guesses from the asymptotic formulas, then Newton on Φ_n
        let mut z: f64 = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[n - 1],
                3 => 1.91 * z - 0.91 * nodes[n - 2],
                _ => 2.0 * z - nodes[n - i + 1],
            };
            for _ in 0..200 {
                let (pn, pm) = hermite_phi_pair(n, z);
                let dp = (2.0 * nf).sqrt() * pm - z * pn;
                let dz = pn / dp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[n - 1 - i] = z;
            nodes[i] = -z;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let mut weights = vec![0.0; n];
        let mut scaled = vec![0.0; n];
        for (i, &x) in nodes.iter().enumerate() {
            let (_, pm) = hermite_phi_pair(n, x);
            scaled[i] = 1.0 / (nf * pm * pm);
            weights[i] = scaled[i] * (-x * x).exp();
        }
        Self { nodes, weights, scaled_weights: scaled }
    }

    /// ∫ g(x) dx for g decaying like a Gaussian of unit width, using modified weights.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.scaled_weights).map(|(x, w)| w * g(*x)).sum()
    }
}

/// Composite trapezoid weights for a uniform grid.
pub fn trapezoid_weights(count: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; count];
    if count >= 2 {
        w[0] *= 0.5;
        w[count - 1] *= 0.5;
    }
    w
}
