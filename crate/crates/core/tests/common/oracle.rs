//! Independent reference implementations used to check the library.

use rand::Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<f64>>;

/// Eigenvalues of a symmetric matrix, descending: closed forms up to 3x3,
/// shifted QR iteration above that.
pub fn eigenvalues(a: &Dense) -> Vec<f64> {
    let mut e = match a.len() {
        0 => Vec::new(),
        1 => vec![a[0][0]],
        2 => eig2(a[0][0], a[0][1], a[1][1]).to_vec(),
        3 => eig3(a).to_vec(),
        _ => qr_eigenvalues(a),
    };
    e.sort_by(|x, y| y.total_cmp(x));
    e
}

pub fn eig2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mid = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    let hi = mid + r;
    // the product form avoids cancellation in the small root
    let lo = if hi != 0.0 { (a * c - b * b) / hi } else { mid - r };
    [hi, lo]
}

/// Trigonometric solution of the characteristic cubic.
pub fn eig3(a: &Dense) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    if p1 == 0.0 {
        return [a[0][0], a[1][1], a[2][2]];
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (a[i][j] - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// One shifted QR step `A - mu I = QR, A <- RQ + mu I` on the leading
/// `n x n` block, with Householder reflections.
fn qr_step(m: &mut Dense, n: usize, mu: f64) {
    for i in 0..n {
        m[i][i] -= mu;
    }
    let mut reflectors = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let norm = (k..n).map(|i| m[i][k] * m[i][k]).sum::<f64>().sqrt();
        let mut v: Vec<f64> = (k..n).map(|i| m[i][k]).collect();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v[0] += norm.copysign(v[0]);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for j in 0..n {
            let s: f64 = (k..n).map(|i| v[i - k] * m[i][j]).sum::<f64>() * 2.0 / vv;
            for i in k..n {
                m[i][j] -= s * v[i - k];
            }
        }
        reflectors.push(Some((v, vv)));
    }
    for (k, r) in reflectors.iter().enumerate() {
        if let Some((v, vv)) = r {
            for row in m.iter_mut().take(n) {
                let s: f64 = (k..n).map(|j| row[j] * v[j - k]).sum::<f64>() * 2.0 / vv;
                for j in k..n {
                    row[j] -= s * v[j - k];
                }
            }
        }
    }
    for i in 0..n {
        m[i][i] += mu;
    }
}

/// Wilkinson-shifted QR iteration with deflation from the bottom.
pub fn qr_eigenvalues(a: &Dense) -> Vec<f64> {
    let mut m = a.clone();
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(a.len());
    let mut n = a.len();
    let mut iterations = 0;
    while n > 0 {
        if n == 1 {
            out.push(m[0][0]);
            break;
        }
        let tail: f64 = (0..n - 1).map(|j| m[n - 1][j].abs()).sum();
        if tail <= 1e-16 * scale {
            out.push(m[n - 1][n - 1]);
            n -= 1;
            continue;
        }
        let (x, y, z) = (m[n - 2][n - 2], m[n - 1][n - 2], m[n - 1][n - 1]);
        let d = 0.5 * (x - z);
        let sign = if d >= 0.0 { 1.0 } else { -1.0 };
        let mu = z - sign * y * y / (d.abs() + d.hypot(y));
        qr_step(&mut m, n, mu);
        iterations += 1;
        assert!(iterations < 10_000, "QR iteration did not converge");
    }
    out
}

pub fn random_psd(rng: &mut impl Rng, n: usize) -> Dense {
    let b: Dense = (0..n)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum();
        }
        a[i][i] += 0.1;
    }
    a
}

/// Haar-distributed orthogonal matrix from Gram-Schmidt on a Gaussian one.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> Dense {
    let mut q: Dense = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &q {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

pub fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum()).collect())
        .collect()
}

pub fn gram(rows: &Dense) -> Dense {
    rows.iter()
        .map(|a| rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn wilson(x: usize, n: usize, z: f64) -> (f64, f64) {
    let (x, n) = (x as f64, n as f64);
    let p = x / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    (center - half, center + half)
}

pub fn spd(a: &[u8], b: &[u8]) -> f64 {
    let rate = |v: &[u8]| v.iter().map(|&x| f64::from(x)).sum::<f64>() / v.len() as f64;
    (rate(a) - rate(b)).abs()
}

pub fn cv(rates: &[f64]) -> f64 {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub fn bce(p: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for (pr, yr) in p.iter().zip(y) {
        for (&pk, &yk) in pr.iter().zip(yr) {
            let c = pk.clamp(1e-7, 1.0 - 1e-7);
            total += -(yk * c.ln() + (1.0 - yk) * (1.0 - c).ln());
            count += 1.0;
        }
    }
    total / count
}

/// Same penalty over ordered pairs, which double-counts numerator and
/// denominator alike.
pub fn penalty(p: &[Vec<f64>], h: &[[f64; 2]], eps: f64) -> f64 {
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let close = (h[i][0] - h[j][0]).abs() < eps && (h[i][1] - h[j][1]).abs() < eps;
            if close {
                total += p[i].iter().zip(&p[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
        }
    }
    total / (n * (n - 1)) as f64
}

pub fn max_pairwise_distance(v: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..v.len() {
        for j in 0..v.len() {
            let mut s = 0.0;
            for k in 0..v[i].len() {
                s += (v[i][k] - v[j][k]) * (v[i][k] - v[j][k]);
            }
            best = best.max(s.sqrt());
        }
    }
    best
}
