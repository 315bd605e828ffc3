//! Probe-bath physics: unit conversions, the fluctuation-dissipation
//! constraint, the Gaussian (Marcus) transition rate, and the full line-shape
//! quadrature with an Ohmic high-frequency factor.
//!
//! Everything is expressed in GHz (energy) and ns (time); 1 GHz = 1 ns⁻¹.
//! Rates carry no Δ_p² prefactor — the probe tunneling amplitude is a pure
//! scale factor and callers report Γ/Δ_p².

use std::f64::consts::PI;

use crate::error::{QtsError, Result};
use crate::quad;

/// k_B/h in GHz per kelvin (exact SI definitions of k_B and h).
pub const KB_OVER_H_GHZ_PER_K: f64 = 20.836619123;

/// Convert a temperature-like quantity quoted in millikelvin to GHz.
pub fn temperature_to_ghz(t_mk: f64) -> Result<f64> {
    if !(t_mk >= 0.0) {
        return Err(QtsError::InvalidBath(format!(
            "temperature {t_mk} mK is negative"
        )));
    }
    Ok(t_mk * 1e-3 * KB_OVER_H_GHZ_PER_K)
}

/// Reorganization energy fixed by the fluctuation-dissipation theorem:
/// ε_p = W²/(2T).
pub fn fdt_reorganization(w_ghz: f64, t_ghz: f64) -> Result<f64> {
    if !(w_ghz >= 0.0) {
        return Err(QtsError::InvalidBath(format!("width {w_ghz} GHz is negative")));
    }
    if !(t_ghz > 0.0) {
        return Err(QtsError::InvalidBath(format!(
            "temperature {t_ghz} GHz must be positive"
        )));
    }
    Ok(w_ghz * w_ghz / (2.0 * t_ghz))
}

/// Gaussian rate kernel: delta_sq · √(2π/W²) · exp(−arg²/(2W²)), taking W²
/// directly so FDT-mode identities stay exact.
pub fn marcus_kernel(delta_sq: f64, arg: f64, w_sq: f64) -> f64 {
    delta_sq * (2.0 * PI / w_sq).sqrt() * (-arg * arg / (2.0 * w_sq)).exp()
}

/// Low-frequency Gaussian bath parameters, optionally with an Ohmic
/// high-frequency tail.
///
/// W² is the canonical stored quantity: in FDT mode it is *defined* as
/// 2·T·ε_p, so `fdt_residual` is exactly zero by construction and the
/// detailed-balance identity holds to round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    w_sq: f64,
    epsilon_p: f64,
    temperature: f64,
    eta: f64,
    omega_c: f64,
    fdt: bool,
}

impl BathParams {
    /// FDT mode from GHz inputs: ε_p = W²/(2T), then W² canonicalized to
    /// 2·T·ε_p.
    pub fn fdt(w_ghz: f64, t_ghz: f64) -> Result<Self> {
        if !(w_ghz > 0.0) {
            return Err(QtsError::InvalidBath(format!(
                "width {w_ghz} GHz must be positive"
            )));
        }
        let epsilon_p = fdt_reorganization(w_ghz, t_ghz)?;
        let w_sq = 2.0 * t_ghz * epsilon_p;
        Ok(Self {
            w_sq,
            epsilon_p,
            temperature: t_ghz,
            eta: 0.0,
            omega_c: 8.0 * PI * t_ghz,
            fdt: true,
        })
    }

    /// FDT mode with both quantities quoted in millikelvin.
    pub fn fdt_from_mk(w_mk: f64, t_mk: f64) -> Result<Self> {
        Self::fdt(temperature_to_ghz(w_mk)?, temperature_to_ghz(t_mk)?)
    }

    /// Explicit mode: all three energies given independently; detailed
    /// balance is then only as good as the inputs.
    pub fn explicit(w_ghz: f64, epsilon_p: f64, t_ghz: f64) -> Result<Self> {
        if !(w_ghz > 0.0) {
            return Err(QtsError::InvalidBath(format!(
                "width {w_ghz} GHz must be positive"
            )));
        }
        if !(epsilon_p >= 0.0) {
            return Err(QtsError::InvalidBath(format!(
                "reorganization energy {epsilon_p} GHz is negative"
            )));
        }
        if !(t_ghz > 0.0) {
            return Err(QtsError::InvalidBath(format!(
                "temperature {t_ghz} GHz must be positive"
            )));
        }
        Ok(Self {
            w_sq: w_ghz * w_ghz,
            epsilon_p,
            temperature: t_ghz,
            eta: 0.0,
            omega_c: 8.0 * PI * t_ghz,
            fdt: false,
        })
    }

    /// Attach an Ohmic high-frequency factor (η dimensionless, ω_c in GHz).
    pub fn with_ohmic(mut self, eta: f64, omega_c: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(QtsError::InvalidBath(format!("eta {eta} is negative")));
        }
        if !(omega_c > 0.0) {
            return Err(QtsError::InvalidBath(format!(
                "cutoff {omega_c} GHz must be positive"
            )));
        }
        self.eta = eta;
        self.omega_c = omega_c;
        Ok(self)
    }

    pub fn w(&self) -> f64 {
        self.w_sq.sqrt()
    }

    pub fn w_sq(&self) -> f64 {
        self.w_sq
    }

    pub fn epsilon_p(&self) -> f64 {
        self.epsilon_p
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn is_fdt_mode(&self) -> bool {
        self.fdt
    }

    /// W² − 2·T·ε_p; exactly 0.0 when constructed in FDT mode.
    pub fn fdt_residual(&self) -> f64 {
        self.w_sq - 2.0 * self.temperature * self.epsilon_p
    }

    /// Forward Gaussian rate (bath absorbs ε_p): kernel at ω + ε_p, where
    /// ω is the final-minus-initial system energy.
    pub fn marcus_rate(&self, delta_sq: f64, omega: f64) -> f64 {
        marcus_kernel(delta_sq, omega + self.epsilon_p, self.w_sq)
    }

    /// Backward Gaussian rate: the same kernel at ω − ε_p, equal to the
    /// forward rate at −ω.
    pub fn marcus_rate_backward(&self, delta_sq: f64, omega: f64) -> f64 {
        marcus_kernel(delta_sq, omega - self.epsilon_p, self.w_sq)
    }

    /// Full line-shape rate
    ///   2·delta_sq·Re ∫₀^∞ dτ e^{−i(ω+ε_p)τ} e^{−W²τ²/2}
    ///                  [ (1/(1+iω_c τ)) · (πTτ/sinh(πTτ)) ]^{4η/π},
    /// evaluated by adaptive quadrature on [0, τ*] with the Gaussian envelope
    /// below 1e-14 beyond τ*. Reduces to `marcus_rate` at η = 0.
    pub fn lineshape_rate(&self, delta_sq: f64, omega: f64) -> Result<f64> {
        let a = omega + self.epsilon_p;
        let w = self.w();
        let tau_star = (2.0 * 1e14f64.ln()).sqrt() / w;
        // seed roughly one panel per oscillation period so the adaptive rule
        // never aliases
        let n0 = ((tau_star * (a.abs() + w) / PI).ceil() as usize).clamp(8, 4096);
        let edges: Vec<f64> = (0..=n0)
            .map(|i| tau_star * i as f64 / n0 as f64)
            .collect();
        let integrand = lineshape_integrand(self.w_sq, a, self.temperature, self.eta, self.omega_c);
        let scale = (2.0 * PI / self.w_sq).sqrt();
        let r = quad::integrate_panels(integrand, &edges, 1e-8, 1e-14 * scale, 4_000_000)?;
        // round-off can leave a tiny negative far off resonance
        Ok((2.0 * delta_sq * r.value).max(0.0))
    }
}

/// ln(sinh x) without overflow: x + ln1p(−e^(−2x)) − ln 2.
fn lnsinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
}

/// Real part of the line-shape integrand (unit prefactor).
fn lineshape_integrand(
    w_sq: f64,
    a: f64,
    temperature: f64,
    eta: f64,
    omega_c: f64,
) -> impl Fn(f64) -> f64 {
    let nu = 4.0 * eta / PI;
    move |tau: f64| {
        let gauss = (-0.5 * w_sq * tau * tau).exp();
        if nu == 0.0 {
            return gauss * (a * tau).cos();
        }
        let x = PI * temperature * tau;
        // ln(x / sinh x), stable at both ends
        let ln_ratio = if x < 1e-8 {
            -x * x / 6.0
        } else {
            x.ln() - lnsinh(x)
        };
        let mag = (nu * (ln_ratio - 0.5 * (1.0 + omega_c * omega_c * tau * tau).ln())).exp();
        let phase = nu * (omega_c * tau).atan();
        gauss * mag * (a * tau + phase).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn millikelvin_conversion() {
        assert!((temperature_to_ghz(12.0).unwrap() - 0.250039429476).abs() < 1e-9);
        assert!((temperature_to_ghz(10.0).unwrap() - 0.20836619123).abs() < 1e-12);
        assert_eq!(temperature_to_ghz(0.0).unwrap(), 0.0);
        assert!(temperature_to_ghz(-1.0).is_err());
    }

    #[test]
    fn reorganization_from_fdt() {
        // the preset W = 10 mK, T = 12 mK pair
        let w = temperature_to_ghz(10.0).unwrap();
        let t = temperature_to_ghz(12.0).unwrap();
        let ep = fdt_reorganization(w, t).unwrap();
        assert!((ep - 0.086818413).abs() < 1e-6, "got {ep}");
        assert_eq!(fdt_reorganization(0.0, t).unwrap(), 0.0);
        assert!(fdt_reorganization(w, 0.0).is_err());
    }

    #[test]
    fn fdt_mode_identity_is_exact() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..100 {
            let w = 0.05 + rng.next_f64();
            let t = 0.05 + rng.next_f64();
            let bath = BathParams::fdt(w, t).unwrap();
            assert_eq!(bath.fdt_residual(), 0.0);
            assert!(bath.is_fdt_mode());
            // canonicalized W² stays within round-off of the input
            assert!((bath.w() - w).abs() / w < 1e-14);
        }
        let explicit = BathParams::explicit(0.2, 0.05, 0.25).unwrap();
        assert!(!explicit.is_fdt_mode());
        assert!(explicit.fdt_residual().abs() > 1e-3);
    }

    #[test]
    fn marcus_peak_and_one_sigma() {
        let bath = BathParams::explicit(1.0, 0.3, 0.5).unwrap();
        // exponent vanishes at omega = -eps_p
        let peak = bath.marcus_rate(1.0, -bath.epsilon_p());
        assert!((peak - (2.0 * PI).sqrt()).abs() < 1e-12);
        // one sigma off peak
        let one_sigma = bath.marcus_rate(1.0, bath.w() - bath.epsilon_p());
        assert!((one_sigma - (2.0 * PI).sqrt() * (-0.5f64).exp()).abs() < 1e-12);
        // delta_sq scales linearly
        assert!((bath.marcus_rate(2.5, 0.1) - 2.5 * bath.marcus_rate(1.0, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn detailed_balance_in_log_space() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..1000 {
            let w = 0.05 + 0.5 * rng.next_f64();
            let t = 0.05 + 0.5 * rng.next_f64();
            let bath = BathParams::fdt(w, t).unwrap();
            let x = 15.0 * w * rng.next_symmetric();
            let log_a = bath.marcus_rate(1.0, x).ln();
            let log_b = bath.marcus_rate_backward(1.0, x).ln();
            let diff = (log_b - log_a) - x / t;
            assert!(diff.abs() < 1e-10, "detailed balance off by {diff:e}");
        }
    }

    #[test]
    fn backward_equals_forward_at_negated_frequency() {
        let bath = BathParams::fdt(0.21, 0.25).unwrap();
        for &omega in &[-0.7, -0.1, 0.0, 0.33, 1.9] {
            let b = bath.marcus_rate_backward(1.3, omega);
            let f = bath.marcus_rate(1.3, -omega);
            assert_eq!(b, f);
        }
    }

    #[test]
    fn marcus_normalization_is_gaussian_area() {
        let bath = BathParams::fdt(0.20836619123, 0.25003942948).unwrap();
        let ep = bath.epsilon_p();
        let w = bath.w();
        let r = quad::integrate(
            |omega| bath.marcus_rate(1.0, omega),
            -ep - 14.0 * w,
            -ep + 14.0 * w,
            1e-9,
            0.0,
            1_000_000,
        )
        .unwrap();
        assert!(
            (r.value - 2.0 * PI).abs() < 1e-6,
            "normalization {} vs {}",
            r.value,
            2.0 * PI
        );
    }

    #[test]
    fn lineshape_integrand_regular_at_zero() {
        let f = lineshape_integrand(0.04, 1.7, 0.25, 0.01, 2.0 * PI);
        assert!((f(0.0) - 1.0).abs() < 1e-12);
        assert!((f(1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lineshape_matches_marcus_at_zero_eta() {
        let bath = BathParams::fdt_from_mk(10.0, 12.0).unwrap();
        let w = bath.w();
        for i in 0..=20 {
            let omega = -5.0 * w + 10.0 * w * (i as f64) / 20.0;
            let m = bath.marcus_rate(1.0, omega);
            let l = bath.lineshape_rate(1.0, omega).unwrap();
            assert!(
                (l - m).abs() / m < 1e-6,
                "omega {omega}: lineshape {l} vs marcus {m}"
            );
        }
    }

    #[test]
    fn lineshape_matches_simpson_oracle_with_ohmic_tail() {
        let bath = BathParams::fdt_from_mk(10.0, 12.0)
            .unwrap()
            .with_ohmic(0.01, 8.0 * PI * 0.25003942948)
            .unwrap();
        let omega = 0.4;
        let got = bath.lineshape_rate(1.0, omega).unwrap();

        // fixed-step Simpson oracle on the same truncated domain
        let a = omega + bath.epsilon_p();
        let f = lineshape_integrand(bath.w_sq(), a, bath.temperature(), bath.eta(), bath.omega_c());
        let tau_star = (2.0 * 1e14f64.ln()).sqrt() / bath.w();
        let n = 400_000;
        let h = tau_star / n as f64;
        let mut sum = f(0.0) + f(tau_star);
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * f(i as f64 * h);
        }
        let oracle = 2.0 * (h / 3.0) * sum;
        assert!(
            (got - oracle).abs() / oracle.abs() < 1e-6,
            "lineshape {got} vs oracle {oracle}"
        );
    }

    #[test]
    fn lineshape_approaches_marcus_as_eta_shrinks() {
        let base = BathParams::fdt_from_mk(10.0, 12.0).unwrap();
        let omega = 0.0;
        let m = base.marcus_rate(1.0, omega);
        let wc = 8.0 * PI * base.temperature();
        let mut last = f64::INFINITY;
        for &eta in &[0.04, 0.02, 0.01, 0.005] {
            let bath = base.with_ohmic(eta, wc).unwrap();
            let l = bath.lineshape_rate(1.0, omega).unwrap();
            assert!(l.is_finite() && l > 0.0);
            let dev = (l - m).abs();
            assert!(dev < last, "deviation not shrinking: {dev} vs {last}");
            last = dev;
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(BathParams::fdt(0.0, 0.25).is_err());
        assert!(BathParams::fdt(0.2, 0.0).is_err());
        assert!(BathParams::explicit(0.2, -0.1, 0.25).is_err());
        assert!(BathParams::fdt(0.2, 0.25)
            .unwrap()
            .with_ohmic(-0.1, 1.0)
            .is_err());
        assert!(BathParams::fdt(0.2, 0.25)
            .unwrap()
            .with_ohmic(0.1, 0.0)
            .is_err());
    }
}
