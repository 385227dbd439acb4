//! Special functions backing the p-values: log-gamma, regularized
//! incomplete gamma and beta via the standard series/continued-fraction
//! routines, and the normal, chi-squared and Student t tail functions
//! built on them. Validated against tabulated values to 1e-8 in the tests.

const MAX_ITER: usize = 300;
const EPS: f64 = 1e-15;
const FPMIN: f64 = 1e-300;

/// Lanczos approximation, g = 7, n = 9.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn reg_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut term = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cont_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0 && (0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_fraction(a, b, x) / a
    } else {
        1.0 - reg_inc_beta(b, a, 1.0 - x)
    }
}

fn beta_cont_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        reg_gamma_q(0.5, x * x)
    } else {
        1.0 + reg_gamma_p(0.5, x * x)
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    reg_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: usize) -> f64 {
    assert!(df >= 1);
    let nu = df as f64;
    let p = 0.5 * reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    if t >= 0.0 {
        p
    } else {
        1.0 - p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from standard tables / high-precision evaluation
    #[test]
    fn ln_gamma_known_points() {
        assert!((ln_gamma(1.0) - 0.0).abs() < 1e-12);
        assert!((ln_gamma(0.5) - 0.5723649429247001).abs() < 1e-10);
        assert!((ln_gamma(10.0) - 12.801827480081469).abs() < 1e-9);
    }

    #[test]
    fn normal_cdf_tabulated() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-8);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-8);
        assert!((normal_cdf(-2.5758293035489004) - 0.005).abs() < 1e-8);
        assert!((normal_cdf(3.0) - 0.9986501019683699).abs() < 1e-8);
    }

    #[test]
    fn chi2_sf_tabulated() {
        // chi2(2) upper tail at 8 is exp(-4)
        assert!((chi2_sf(8.0, 2) - (-4.0f64).exp()).abs() < 1e-12);
        assert!((chi2_sf(3.841458820694124, 1) - 0.05).abs() < 1e-8);
        assert!((chi2_sf(11.070497693516351, 5) - 0.05).abs() < 1e-8);
        assert!((chi2_sf(0.0, 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn student_t_sf_tabulated() {
        // two-sided 5% critical values: t(4) = 2.7764, t(10) = 2.2281
        assert!((2.0 * student_t_sf(2.7764451051977987, 4) - 0.05).abs() < 1e-8);
        assert!((2.0 * student_t_sf(2.228138851986273, 10) - 0.05).abs() < 1e-8);
        assert!((student_t_sf(0.0, 7) - 0.5).abs() < 1e-12);
        // symmetry
        let p = student_t_sf(1.3, 9);
        assert!((student_t_sf(-1.3, 9) - (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_against_closed_forms() {
        // I_x(1, b) = 1 - (1-x)^b
        for &(b, x) in &[(2.0, 0.3), (5.0, 0.7), (1.5, 0.2)] {
            let expected = 1.0 - (1.0f64 - x).powf(b);
            assert!((reg_inc_beta(1.0, b, x) - expected).abs() < 1e-12);
        }
        // symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
        let v = reg_inc_beta(2.5, 3.5, 0.4);
        assert!((v - (1.0 - reg_inc_beta(3.5, 2.5, 0.6))).abs() < 1e-12);
    }

    #[test]
    fn incomplete_gamma_complementarity() {
        for &(a, x) in &[(0.5, 0.25), (2.0, 1.0), (5.0, 9.0), (10.0, 3.0)] {
            let s = reg_gamma_p(a, x) + reg_gamma_q(a, x);
            assert!((s - 1.0).abs() < 1e-12);
        }
        // P(1, x) = 1 - exp(-x)
        assert!((reg_gamma_p(1.0, 2.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
    }
}
