//! Modified Bessel functions of the second kind and the extension profile built on them.

use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const EULER: f64 = 0.577_215_664_901_532_9;

/// Branch points: Temme series below, Steed continued fraction in between, Hankel expansion above.
pub const SERIES_LIMIT: f64 = 2.0;
pub const ASYMPTOTIC_LIMIT: f64 = 25.0;

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
fn temme_gammas(mu: f64) -> (f64, f64) {
    if mu.abs() < 1e-3 {
        // Taylor coefficients of 1/Gamma(1+x)
        const A2: f64 = -0.655_878_071_520_253_8;
        const A3: f64 = -0.042_002_635_034_095_2;
        const A4: f64 = 0.166_538_611_382_291_5;
        const A5: f64 = -0.042_197_734_555_544_3;
        let m2 = mu * mu;
        (-(EULER + A3 * m2 + A5 * m2 * m2), 1.0 + A2 * m2 + A4 * m2 * m2)
    } else {
        let (a, b) = (1.0 / gamma(1.0 - mu), 1.0 / gamma(1.0 + mu));
        ((a - b) / (2.0 * mu), 0.5 * (a + b))
    }
}

/// e^x K_mu(x), e^x K_{mu+1}(x) for |mu| <= 1/2, x < 2.
fn scaled_temme(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (g1, g2) = temme_gammas(mu);
    let gampl = g2 - mu * g1;
    let gammi = g2 + mu * g1;
    let mut ff = fact * (g1 * e.cosh() + g2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    for i in 1..500 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    let ex = x.exp();
    (sum * ex, sum1 * (2.0 / x) * ex)
}

/// e^x K_mu(x), e^x K_{mu+1}(x) by Steed's method, x >= 2.
fn scaled_steed(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    (k0, k0 * (mu + x + 0.5 - h) / x)
}

/// e^x K_nu(x) from the large-argument expansion.
fn scaled_hankel(nu: f64, x: f64) -> f64 {
    let m = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let fk = k as f64;
        let next = term * (m - (2.0 * fk - 1.0).powi(2)) / (fk * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * sum
}

/// e^x K_nu(x) for real order nu and x > 0.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled requires x > 0");
    let nu = nu.abs();
    if x >= ASYMPTOTIC_LIMIT {
        return scaled_hankel(nu, x);
    }
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k_mu, mut k_mu1) = if x < SERIES_LIMIT { scaled_temme(mu, x) } else { scaled_steed(mu, x) };
    for k in 0..nl as usize {
        let next = 2.0 * (mu + k as f64 + 1.0) / x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    k_mu
}

pub fn bessel_k(nu: f64, x: f64) -> f64 {
    if x > 700.0 {
        return 0.0;
    }
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Profile m(s) = 2^{1-a}/Gamma(a) s^a K_a(s) of the extension multiplier, m(0) = 1.
#[derive(Debug, Clone, Copy)]
pub struct ExtensionProfile {
    alpha: f64,
    norm: f64,
}

impl ExtensionProfile {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "extension profile needs alpha in (0,1)");
        Self { alpha, norm: 2f64.powf(1.0 - alpha) / gamma(alpha) }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        if s > 740.0 {
            return 0.0;
        }
        if (self.alpha - 0.5).abs() < 1e-15 {
            return (-s).exp();
        }
        self.norm * (self.alpha * s.ln() - s).exp() * bessel_k_scaled(self.alpha, s)
    }

    /// m'(s) = -2^{1-a}/Gamma(a) s^a K_{1-a}(s).
    pub fn derivative(&self, s: f64) -> f64 {
        if s > 740.0 {
            return 0.0;
        }
        if s <= 0.0 {
            return if self.alpha > 0.5 { 0.0 } else { f64::NEG_INFINITY };
        }
        -self.norm * (self.alpha * s.ln() - s).exp() * bessel_k_scaled(1.0 - self.alpha, s)
    }

    /// Closed form of the integral of s^{1-2a} (m^2 + m'^2) over (0, inf).
    pub fn energy_constant(&self) -> f64 {
        let a = self.alpha;
        2f64.powf(1.0 - 2.0 * a) * gamma(1.0 - a) / gamma(a)
    }
}
