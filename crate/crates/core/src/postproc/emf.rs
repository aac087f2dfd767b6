use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::SolutionField;
use crate::assembly::QuadratureRule;
use crate::error::{Error, Result};
use crate::models::machine::{winding_layout, PmsmPole, SLOTS_PER_POLE};

/// Flux linkage of phases a, b, c for the full machine, from the stator field of one pole.
pub fn flux_linkage(pole: &PmsmPole, stator: &SolutionField) -> Result<[f64; 3]> {
    let m = &pole.model;
    let coils = pole.coil_patches();
    let layout = winding_layout();
    let mut psi = [0.0; 3];
    for layer in 0..2 {
        let scale = m.axial_length * m.turns_per_half_slot / m.half_slot_area(layer);
        for slot in 0..SLOTS_PER_POLE {
            let (phase, sign) = layout[layer][slot];
            let a = stator.integral(&coils[layer][slot], QuadratureRule::Default)?;
            psi[phase.index()] += sign * scale * a;
        }
    }
    let poles = m.poles as f64;
    Ok(psi.map(|v| poles * v))
}

/// One-sided EMF spectrum over the electrical period.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    /// `E_p` for `p = 0, 1, ...`; index 0 is the mean and always zero.
    #[serde(skip)]
    pub coefficients: Vec<Complex64>,
    /// Frequency of the fundamental in Hz.
    pub base_frequency: f64,
}

impl Spectrum {
    pub fn magnitude(&self, p: usize) -> f64 {
        self.coefficients.get(p).map_or(0.0, |c| c.norm())
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm()).collect()
    }

    /// Largest even-order magnitude relative to the fundamental.
    pub fn even_ratio(&self) -> f64 {
        let e1 = self.magnitude(1);
        let worst = (2..self.coefficients.len())
            .step_by(2)
            .map(|p| self.magnitude(p))
            .fold(0.0, f64::max);
        if e1 > 0.0 {
            worst / e1
        } else {
            worst
        }
    }
}

/// EMF spectrum from flux-linkage samples on the uniform grid `alpha_i = alpha_0 + i pitch / N`.
///
/// The electrical period is completed with `psi(alpha + pitch) = -psi(alpha)`; `e = -d psi / dt`
/// with `alpha = omega t` is taken spectrally.
pub fn emf_spectrum(alphas: &[f64], psi: &[f64], pitch: f64, omega: f64) -> Result<Spectrum> {
    let n = psi.len();
    if alphas.len() != n {
        return Err(Error::DimensionMismatch {
            what: "flux linkage samples",
            expected: alphas.len(),
            found: n,
        });
    }
    if n < 4 {
        return Err(Error::Sampling(format!("{n} samples are too few")));
    }
    if !(omega > 0.0) {
        return Err(Error::Sampling(format!("speed must be positive, got {omega}")));
    }
    let step = pitch / n as f64;
    for (i, &a) in alphas.iter().enumerate() {
        if (a - alphas[0] - i as f64 * step).abs() > 1e-9 * pitch {
            return Err(Error::Sampling(format!(
                "sample {i} at {a} is off the uniform grid of step {step}"
            )));
        }
    }
    let mut buf: Vec<Complex64> = psi
        .iter()
        .chain(psi)
        .enumerate()
        .map(|(k, &v)| Complex64::new(if k < n { v } else { -v }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    let w = PI / pitch;
    let scale = 1.0 / (2 * n) as f64;
    let mut coefficients = vec![Complex64::new(0.0, 0.0); n];
    for (k, c) in coefficients.iter_mut().enumerate().skip(1) {
        // shift the grid origin to alpha = 0
        let phase = Complex64::from_polar(1.0, -(k as f64) * w * alphas[0]);
        let ck = buf[k] * scale * phase;
        *c = Complex64::new(0.0, -2.0 * k as f64 * w * omega) * ck;
    }
    Ok(Spectrum {
        coefficients,
        base_frequency: omega * w / (2.0 * PI),
    })
}

/// `sqrt(sum_{p >= 2} |E_p|^2) / |E_1|`.
pub fn thd(spectrum: &Spectrum) -> Result<f64> {
    let e1 = spectrum.magnitude(1);
    if e1 == 0.0 || !e1.is_finite() {
        return Err(Error::ZeroFundamental);
    }
    let rest: f64 = (2..spectrum.coefficients.len())
        .map(|p| spectrum.magnitude(p).powi(2))
        .sum();
    Ok(rest.sqrt() / e1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * FRAC_PI_3 / n as f64).collect()
    }

    #[test]
    fn cosine_gives_single_fundamental() {
        let a = grid(60);
        let psi: Vec<f64> = a.iter().map(|x| (3.0 * x).cos()).collect();
        let s = emf_spectrum(&a, &psi, FRAC_PI_3, 1.0).unwrap();
        assert!((s.magnitude(1) - 3.0).abs() < 1e-12);
        for p in 2..s.coefficients.len() {
            assert!(s.magnitude(p) < 1e-12);
        }
        let s2 = emf_spectrum(&a, &psi, FRAC_PI_3, 2.0).unwrap();
        assert!((s2.magnitude(1) - 6.0).abs() < 1e-12);
        assert!((s.base_frequency - 3.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn even_harmonics_vanish_by_construction() {
        let a = grid(40);
        let psi: Vec<f64> = a.iter().map(|x| (x * 7.0).sin() + x * x).collect();
        let s = emf_spectrum(&a, &psi, FRAC_PI_3, 1.0).unwrap();
        assert!(s.even_ratio() < 1e-12);
    }

    #[test]
    fn shifted_grid_keeps_phase() {
        let n = 48;
        let a: Vec<f64> = grid(n).iter().map(|x| x + 0.1).collect();
        let psi: Vec<f64> = a.iter().map(|x| (3.0 * x).cos() + 0.2 * (9.0 * x).sin()).collect();
        let s = emf_spectrum(&a, &psi, FRAC_PI_3, 1.0).unwrap();
        // e = 3 sin(3a) - 1.8 cos(9a): E_1 = 2 * (-i 3) * 1/2 = -3i, E_3 = -1.8
        assert!((s.coefficients[1] - Complex64::new(0.0, -3.0)).norm() < 1e-12);
        assert!((s.coefficients[3] - Complex64::new(-1.8, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut a = grid(32);
        a[5] += 1e-3;
        assert!(matches!(emf_spectrum(&a, &[0.0; 32], FRAC_PI_3, 1.0), Err(Error::Sampling(_))));
        assert!(emf_spectrum(&grid(32), &[0.0; 32], FRAC_PI_3, 0.0).is_err());
    }

    #[test]
    fn thd_values() {
        let mk = |v: &[(usize, f64)]| {
            let mut c = vec![Complex64::new(0.0, 0.0); 10];
            for &(p, m) in v {
                c[p] = Complex64::new(m, 0.0);
            }
            Spectrum {
                coefficients: c,
                base_frequency: 1.0,
            }
        };
        assert_eq!(thd(&mk(&[(1, 1.0)])).unwrap(), 0.0);
        let t = thd(&mk(&[(1, 3.0), (5, 0.3), (7, 0.4)])).unwrap();
        assert!((t - 0.5 / 3.0).abs() < 1e-15);
        assert!(matches!(thd(&mk(&[(3, 1.0)])), Err(Error::ZeroFundamental)));
    }
}
