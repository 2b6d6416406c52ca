//! Multi-mode pure states in a truncated Fock basis.
//!
//! Quadratures use the `hbar = 2` convention, so `x = a + a^dagger` and the
//! vacuum has unit position variance.

mod gates;

pub use gates::{
    beamsplitter_matrix, beamsplitter_theta_derivative, displacement_matrix,
    displacement_with_grad, kerr_matrix, kerr_with_grad, ladder_matrices, rotation_matrix,
    rotation_with_grad, squeezing_matrix, squeezing_with_grad, Arity, GateMatrix, GateWithGrad,
};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `hbar` used by every quadrature in the crate.
pub const HBAR: f64 = 2.0;

/// Amplitudes over `num_modes` modes, each truncated to `cutoff` levels,
/// stored row-major in the photon-number multi-index (mode 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    num_modes: usize,
    cutoff: usize,
    amplitudes: Vec<C64>,
}

impl FockState {
    pub fn vacuum(num_modes: usize, cutoff: usize) -> Result<Self> {
        Self::basis(num_modes, cutoff, &vec![0; num_modes])
    }

    /// The product number state `|n_0, n_1, ...>`.
    pub fn basis(num_modes: usize, cutoff: usize, occupation: &[usize]) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        if num_modes == 0 || occupation.len() != num_modes {
            return Err(Error::shape(format!(
                "occupation has {} entries for {num_modes} modes",
                occupation.len()
            )));
        }
        if let Some(&n) = occupation.iter().find(|&&n| n >= cutoff) {
            return Err(Error::shape(format!(
                "photon number {n} exceeds cutoff {cutoff}"
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); cutoff.pow(num_modes as u32)];
        let index = occupation.iter().fold(0, |acc, &n| acc * cutoff + n);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self {
            num_modes,
            cutoff,
            amplitudes,
        })
    }

    pub fn from_amplitudes(num_modes: usize, cutoff: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        let len = cutoff.pow(num_modes as u32);
        if num_modes == 0 || amplitudes.len() != len {
            return Err(Error::shape(format!(
                "{num_modes} modes at cutoff {cutoff} need {len} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        Ok(Self {
            num_modes,
            cutoff,
            amplitudes,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        let index = occupation.iter().fold(0, |acc, &n| acc * self.cutoff + n);
        self.amplitudes[index]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.num_modes - 1 - mode) as u32)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            Err(Error::shape(format!(
                "mode {mode} out of range for a {}-mode state",
                self.num_modes
            )))
        } else {
            Ok(())
        }
    }

    /// Contract a one-mode gate into `mode`.
    pub fn apply_one_mode(&self, gate: &GateMatrix, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if gate.arity() != Arity::OneMode || gate.cutoff() != self.cutoff {
            return Err(Error::shape(format!(
                "{:?} gate at cutoff {} cannot act on one mode at cutoff {}",
                gate.arity(),
                gate.cutoff(),
                self.cutoff
            )));
        }
        let d = self.cutoff;
        let stride = self.stride(mode);
        let block = d * stride;
        let m = gate.matrix();
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        let mut column = vec![C64::new(0.0, 0.0); d];
        for outer in (0..self.amplitudes.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (n, slot) in column.iter_mut().enumerate() {
                    *slot = self.amplitudes[base + n * stride];
                }
                for row in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for (n, v) in column.iter().enumerate() {
                        acc += m[(row, n)] * v;
                    }
                    out[base + row * stride] = acc;
                }
            }
        }
        Ok(Self {
            num_modes: self.num_modes,
            cutoff: self.cutoff,
            amplitudes: out,
        })
    }

    /// Contract a two-mode gate into the ordered pair `(mode_a, mode_b)`.
    pub fn apply_two_mode(&self, gate: &GateMatrix, mode_a: usize, mode_b: usize) -> Result<Self> {
        self.check_mode(mode_a)?;
        self.check_mode(mode_b)?;
        if mode_a == mode_b {
            return Err(Error::InvalidModes(mode_a, mode_b));
        }
        if gate.arity() != Arity::TwoMode || gate.cutoff() != self.cutoff {
            return Err(Error::shape(format!(
                "{:?} gate at cutoff {} cannot act on a mode pair at cutoff {}",
                gate.arity(),
                gate.cutoff(),
                self.cutoff
            )));
        }
        let d = self.cutoff;
        let (sa, sb) = (self.stride(mode_a), self.stride(mode_b));
        let m = gate.matrix();
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        let mut local = vec![C64::new(0.0, 0.0); d * d];
        for base in self.pair_bases(mode_a, mode_b) {
            for na in 0..d {
                for nb in 0..d {
                    local[na * d + nb] = self.amplitudes[base + na * sa + nb * sb];
                }
            }
            for na in 0..d {
                for nb in 0..d {
                    let row = na * d + nb;
                    let mut acc = C64::new(0.0, 0.0);
                    for (col, v) in local.iter().enumerate() {
                        acc += m[(row, col)] * v;
                    }
                    out[base + na * sa + nb * sb] = acc;
                }
            }
        }
        Ok(Self {
            num_modes: self.num_modes,
            cutoff: self.cutoff,
            amplitudes: out,
        })
    }

    /// Flat indices whose digits at `mode_a` and `mode_b` are both zero.
    fn pair_bases(&self, mode_a: usize, mode_b: usize) -> Vec<usize> {
        let d = self.cutoff;
        let rest = self.amplitudes.len() / (d * d);
        let mut bases = Vec::with_capacity(rest);
        for index in 0..self.amplitudes.len() {
            let da = (index / self.stride(mode_a)) % d;
            let db = (index / self.stride(mode_b)) % d;
            if da == 0 && db == 0 {
                bases.push(index);
            }
        }
        bases
    }

    /// `(a + a^dagger)` applied along `mode`, unnormalized.
    pub(crate) fn position_applied(&self, mode: usize) -> Vec<C64> {
        let d = self.cutoff;
        let stride = self.stride(mode);
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (index, slot) in out.iter_mut().enumerate() {
            let n = (index / stride) % d;
            let mut acc = C64::new(0.0, 0.0);
            if n + 1 < d {
                acc += self.amplitudes[index + stride] * ((n + 1) as f64).sqrt();
            }
            if n > 0 {
                acc += self.amplitudes[index - stride] * (n as f64).sqrt();
            }
            *slot = acc;
        }
        out
    }

    /// Normalized homodyne expectation `<x>/<psi|psi>` on `mode`.
    pub fn homodyne_x_expectation(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        let norm = self.norm_sq();
        if norm <= 0.0 {
            return Err(Error::DegenerateState);
        }
        let x_psi = self.position_applied(mode);
        Ok(inner(&self.amplitudes, &x_psi).re / norm)
    }

    /// Marginal photon-number distribution of one mode (unnormalized).
    pub fn photon_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        let d = self.cutoff;
        let stride = self.stride(mode);
        let mut probs = vec![0.0; d];
        for (index, z) in self.amplitudes.iter().enumerate() {
            probs[(index / stride) % d] += z.norm_sqr();
        }
        Ok(probs)
    }

    /// Distribution of the total photon number across all modes (unnormalized).
    pub fn total_photon_distribution(&self) -> Vec<f64> {
        let d = self.cutoff;
        let mut probs = vec![0.0; self.num_modes * (d - 1) + 1];
        for (index, z) in self.amplitudes.iter().enumerate() {
            let mut rem = index;
            let mut total = 0;
            for _ in 0..self.num_modes {
                total += rem % d;
                rem /= d;
            }
            probs[total] += z.norm_sqr();
        }
        probs
    }
}

/// `<u|v>` (conjugate-linear in `u`).
pub(crate) fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}
