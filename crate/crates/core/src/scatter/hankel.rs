//! Hankel functions of the first kind, orders 0 and 1, for real positive arguments.
//!
//! Three regimes:
//! - `x < 2`: ascending power series (terms decrease monotonically, no cancellation);
//! - `2 <= x <= 25`: `J_n` by Miller's backward recurrence normalized with
//!   `J_0 + 2 sum J_2k = 1`, and `Y_0`, `Y_1` from the Neumann series in those `J_n`;
//! - `x > 25`: Hankel's asymptotic expansion, truncated at its smallest term (below 1e-20 here).

use std::f64::consts::PI;

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `(H0(x), H1(x))` with `H_n = J_n + i Y_n`.
pub fn hankel1_01(x: f64) -> (Complex64, Complex64) {
    assert!(x > 0.0 && x.is_finite(), "Hankel argument must be positive and finite, got {x}");
    if x < 2.0 {
        series(x)
    } else if x <= 25.0 {
        miller(x)
    } else {
        (asymptotic(0.0, x), asymptotic(1.0, x))
    }
}

pub fn hankel1_0(x: f64) -> Complex64 {
    hankel1_01(x).0
}

pub fn hankel1_1(x: f64) -> Complex64 {
    hankel1_01(x).1
}

fn series(x: f64) -> (Complex64, Complex64) {
    let t = 0.25 * x * x;
    let log_term = (0.5 * x).ln();
    let (mut j0, mut j1) = (0.0, 0.0);
    let (mut y0_sum, mut y1_sum) = (0.0, 0.0);
    // term0 = (-t)^k / (k!)^2, term1 = (-t)^k / (k! (k+1)!)
    let (mut term0, mut term1) = (1.0, 1.0);
    let mut harmonic = 0.0;
    // psi(k+1) + psi(k+2) with psi(1) = -gamma
    let mut psi_k1 = -EULER_GAMMA;
    for k in 0..60 {
        if k > 0 {
            let kf = k as f64;
            term0 *= -t / (kf * kf);
            term1 *= -t / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
            psi_k1 += 1.0 / kf;
        }
        j0 += term0;
        j1 += term1;
        if k > 0 {
            y0_sum -= harmonic * term0;
        }
        let psi_k2 = psi_k1 + 1.0 / (k as f64 + 1.0);
        y1_sum += (psi_k1 + psi_k2) * term1;
        if term0.abs() < 1e-18 && k > 2 {
            break;
        }
    }
    let j1 = 0.5 * x * j1;
    let y0 = (2.0 / PI) * ((log_term + EULER_GAMMA) * j0 + y0_sum);
    let y1 = -2.0 / (PI * x) + (2.0 / PI) * log_term * j1 - (1.0 / PI) * 0.5 * x * y1_sum;
    (Complex64::new(j0, y0), Complex64::new(j1, y1))
}

fn miller(x: f64) -> (Complex64, Complex64) {
    let top = 2 * ((x + 30.0 + 5.0 * x.sqrt()) / 2.0).ceil() as usize;
    let mut j = vec![0.0; top + 2];
    j[top] = 1e-30;
    for n in (1..=top).rev() {
        j[n - 1] = (2.0 * n as f64 / x) * j[n] - j[n + 1];
        if j[n - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(n - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * (1..=top / 2).map(|k| j[2 * k]).sum::<f64>();
    j.iter_mut().for_each(|v| *v /= norm);
    let l = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 1..=top / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
    }
    let y0 = (2.0 / PI) * (l * j[0] - 2.0 * s0);
    let y1 = (2.0 / PI) * (-j[0] / x + l * j[1] + s1);
    (Complex64::new(j[0], y0), Complex64::new(j[1], y1))
}

fn asymptotic(nu: f64, x: f64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * Complex64::new(0.0, 1.0) * ((mu - odd * odd) / (8.0 * k as f64 * x));
        let size = next.norm();
        if size > prev {
            break;
        }
        sum += next;
        term = next;
        prev = size;
        if size < 1e-20 {
            break;
        }
    }
    let phase = x - 0.5 * nu * PI - 0.25 * PI;
    (2.0 / (PI * x)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `(x, Re H0, Im H0, Re H1, Im H1)` from 40-digit arbitrary-precision evaluation.
    const REFERENCE: &[(f64, f64, f64, f64, f64)] = &[
        (0.001, 0.999999750000015625, -4.471416611375923269, 0.00049999993750000260417, -636.62216723113942807),
        (0.01, 0.99997500015624956597, -3.0054556370836459578, 0.0049999375002604161241, -63.678596282060656374),
        (0.5, 0.93846980724081290423, -0.44451873350670655715, 0.24226845767487388638, -1.4714723926702430692),
        (1.0, 0.76519768655796655145, 0.088256964215676957983, 0.44005058574493351596, -0.78121282130028871655),
        (1.9, 0.28181855937438547071, 0.4968199712838202059, 0.58115707271343407269, -0.16440577233159526262),
        (2.0, 0.22389077914123566805, 0.5103756726497451196, 0.5767248077568733872, -0.10703243154093754689),
        (2.404825557695773, -1.2011950073676861231e-16, 0.50992438344847905349, 0.51914749728946673819, 0.10274668243825964843),
        (3.7, -0.39923020337119110577, 0.10607431532035418428, 0.053833987745461864015, 0.41667437268380749445),
        (5.0, -0.17759677131433830435, -0.30851762524903378007, -0.32757913759146522204, 0.1478631433912268448),
        (8.0, 0.17165080713755390609, 0.22352148938756622053, 0.23463634685391462438, -0.15806046173124749426),
        (11.5, -0.067653948111665228432, -0.22523211169118786539, -0.22837862066532347461, 0.057942547143000821671),
        (12.5, 0.14688405470042110231, -0.17121430684466928735, -0.16548380461475971846, -0.15383825653750118008),
        (15.0, -0.014224472826780773234, 0.20546429603891826479, 0.20510403861352276115, 0.02107362803687351194),
        (19.7, 0.17942725365878742097, 0.010546147078362863717, 0.015100612097754929548, -0.17921731818210293653),
        (24.9, 0.083245968353015681694, -0.13649918399676511316, -0.13485569953140874334, -0.086002557595554441547),
        (25.1, 0.10827567149994928907, -0.11676770763803710441, -0.11463478413442272782, -0.11062223322783082844),
        (30.0, -0.086367983581040211336, -0.11729573168666402525, -0.11875106261662293652, 0.084425570661747234891),
        (100.0, 0.019985850304223122424, -0.077244313365083152254, -0.077145352014112158033, -0.020372312002759793305),
        (400.0, -0.038825181530783955714, -0.0091735198607593585949, -0.0092220584285863512542, 0.038813744980751541801),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(x, r0, i0, r1, i1) in REFERENCE {
            let (h0, h1) = hankel1_01(x);
            let e0 = Complex64::new(r0, i0);
            let e1 = Complex64::new(r1, i1);
            assert!((h0 - e0).norm() <= 1e-10 * e0.norm(), "H0({x}) = {h0} vs {e0}");
            assert!((h1 - e1).norm() <= 1e-10 * e1.norm(), "H1({x}) = {h1} vs {e1}");
        }
    }

    #[test]
    fn continuous_across_regime_boundaries() {
        for b in [2.0f64, 25.0] {
            let (a0, a1) = hankel1_01(b * (1.0 - 1e-12));
            let (c0, c1) = hankel1_01(b * (1.0 + 1e-12));
            assert!((a0 - c0).norm() < 1e-10 * a0.norm());
            assert!((a1 - c1).norm() < 1e-10 * a1.norm());
        }
    }

    #[test]
    fn wronskian_identity() {
        // J1 Y0 - J0 Y1 = 2 / (pi x)
        for i in 1..400 {
            let x = 0.1 * i as f64;
            let (h0, h1) = hankel1_01(x);
            let w = h1.re * h0.im - h0.re * h1.im;
            assert!((w - 2.0 / (PI * x)).abs() < 1e-11 * (2.0 / (PI * x)).max(1.0), "x = {x}");
        }
    }
}
