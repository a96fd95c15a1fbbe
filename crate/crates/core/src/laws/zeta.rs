//! Riemann and Hurwitz zeta functions for real `s > 1`.
//!
//! Direct summation up to a shift point followed by an Euler-Maclaurin
//! tail with Bernoulli terms through `B_16`.

/// `B_{2j} / (2j)!` for `j = 1..=8`.
const EM_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

const SHIFT: f64 = 16.0;

/// Hurwitz zeta `sum_{k >= 0} (k + a)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let mut head = 0.0;
    let mut m = a;
    while m < SHIFT {
        head += m.powf(-s);
        m += 1.0;
    }
    head + euler_maclaurin_tail(s, m)
}

fn euler_maclaurin_tail(s: f64, m: f64) -> f64 {
    let m_pow = m.powf(-s);
    let mut total = m * m_pow / (s - 1.0) + 0.5 * m_pow;
    // rising factorial s (s+1) ... (s+2j-2) times m^{-s-2j+1}
    let mut factor = s * m_pow / m;
    let inv_m2 = 1.0 / (m * m);
    for (j, coeff) in EM_COEFFS.iter().enumerate() {
        total += coeff * factor;
        let base = s + 2.0 * j as f64;
        factor *= (base + 1.0) * (base + 2.0) * inv_m2;
    }
    total
}

/// Riemann zeta for `s > 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    1.0 + zeta_minus_one(s)
}

/// `zeta(s) - 1`, accurate for large `s` where the difference underflows
/// relative to one.
pub fn zeta_minus_one(s: f64) -> f64 {
    if s > 40.0 {
        (2..64).map(|k| (k as f64).powf(-s)).sum()
    } else {
        hurwitz_zeta(s, 2.0)
    }
}
