//! Small numerical kernels shared by the state models: Hermite functions,
//! Laguerre polynomials, binomials, Gauss-Legendre rules and a golden-section
//! search.

/// Binomial coefficient as a float. Exact for the sizes used here (n < 100).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Harmonic-oscillator eigenfunctions psi_0..psi_{n_max} at `x`, normalized
/// so that |psi_0|^2 has variance 1/2.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    hermite_functions_into(x, n_max, &mut out);
    out
}

pub fn hermite_functions_into(x: f64, n_max: usize, out: &mut Vec<f64>) {
    out.clear();
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if n_max == 0 {
        return;
    }
    out.push(std::f64::consts::SQRT_2 * x * psi0);
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
}

/// Generalized Laguerre polynomial L_n^(a)(y) by the three-term recurrence.
pub fn laguerre(n: usize, a: usize, y: f64) -> f64 {
    let a = a as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - y;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - y) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Maximizes a unimodal `f` on [a, b]. Returns (argmax, max).
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(20, 10), 184756.0);
        assert_eq!(binomial(3, 4), 0.0);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let (x, w) = gauss_legendre(200);
        let n_max = 12;
        let mut gram = vec![vec![0.0; n_max + 1]; n_max + 1];
        for (xi, wi) in x.iter().zip(&w) {
            let xs = 12.0 * xi;
            let psi = hermite_functions(xs, n_max);
            for m in 0..=n_max {
                for n in 0..=n_max {
                    gram[m][n] += 12.0 * wi * psi[m] * psi[n];
                }
            }
        }
        for m in 0..=n_max {
            for n in 0..=n_max {
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((gram[m][n] - expect).abs() < 1e-12, "{m} {n} {}", gram[m][n]);
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        let y = 0.7;
        assert!((laguerre(1, 0, y) - (1.0 - y)).abs() < 1e-15);
        assert!((laguerre(2, 0, y) - (1.0 - 2.0 * y + y * y / 2.0)).abs() < 1e-15);
        assert!((laguerre(1, 3, y) - (4.0 - y)).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
    }
}
