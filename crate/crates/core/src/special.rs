//! Modified Bessel functions of the first kind, in the forms the von Mises
//! smoothing integrals need: `ln I0(x)` and the ratios `I1/I0`, `I2/I0`.

/// Switch from the power series to the large-argument expansion.
const ASYMPTOTIC_FROM: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselRatios {
    pub log_i0: f64,
    /// `I1(x) / I0(x)`
    pub a1: f64,
    /// `I2(x) / I0(x)`
    pub a2: f64,
}

/// Bessel quantities at `x >= 0`.
pub fn bessel_ratios(x: f64) -> BesselRatios {
    debug_assert!(x >= 0.0, "bessel_ratios needs x >= 0, got {x}");
    if x <= ASYMPTOTIC_FROM {
        let s0 = series(0, x);
        let s1 = series(1, x);
        let s2 = series(2, x);
        BesselRatios {
            log_i0: s0.ln(),
            a1: s1 / s0,
            a2: s2 / s0,
        }
    } else {
        let s0 = asymptotic(0, x);
        let s1 = asymptotic(1, x);
        let s2 = asymptotic(2, x);
        BesselRatios {
            log_i0: x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + s0.ln(),
            a1: s1 / s0,
            a2: s2 / s0,
        }
    }
}

pub fn log_i0(x: f64) -> f64 {
    bessel_ratios(x).log_i0
}

fn series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powi(nu as i32) / factorial(nu);
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + f64::from(nu)));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `I_nu(x) * sqrt(2 pi x) * exp(-x)` from the Hankel expansion.
fn asymptotic(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // I0(1), I1(1), I2(1)
        let r = bessel_ratios(1.0);
        assert!((r.log_i0 - 1.266_065_877_752_008_4_f64.ln()).abs() < 1e-15);
        assert!((r.a1 - 0.565_159_103_992_485_f64 / 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((r.a2 - 0.135_747_669_767_038_3_f64 / 1.266_065_877_752_008_4).abs() < 1e-14);
        // I0(50) = 2.932553783849336e20
        let big = bessel_ratios(50.0);
        assert!((big.log_i0 - 2.932_553_783_849_336_3e20_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_argument() {
        let r = bessel_ratios(0.0);
        assert_eq!(r.log_i0, 0.0);
        assert_eq!(r.a1, 0.0);
        assert_eq!(r.a2, 0.0);
    }

    #[test]
    fn branches_agree_near_switch() {
        for &x in &[30.0, 32.0, 36.0] {
            let s = (series(0, x).ln(), series(1, x) / series(0, x), series(2, x) / series(0, x));
            let a = bessel_ratios(x.max(ASYMPTOTIC_FROM + 1e-9));
            let a0 = x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + asymptotic(0, x).ln();
            assert!((s.0 - a0).abs() < 1e-13, "x={x}");
            if x > ASYMPTOTIC_FROM {
                assert!((s.1 - a.a1).abs() < 1e-14);
                assert!((s.2 - a.a2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_of_log_i0_is_a1() {
        for &x in &[0.3f64, 2.0, 10.0, 29.0, 31.0, 120.0, 5000.0] {
            let h = 1e-5 * x.max(1.0);
            let fd = (log_i0(x + h) - log_i0(x - h)) / (2.0 * h);
            assert!((fd - bessel_ratios(x).a1).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn recurrence_between_orders() {
        // I0 - I2 = (2/x) I1
        for &x in &[0.5, 4.0, 25.0, 40.0, 900.0] {
            let r = bessel_ratios(x);
            assert!((1.0 - r.a2 - 2.0 * r.a1 / x).abs() < 1e-13, "x={x}");
        }
    }
}
