//! Gate matrices in the truncated Fock basis.
//!
//! Every gate is the top-left `D x D` (or `D^2 x D^2`) block of the exact,
//! infinite-dimensional operator. Exponentiating a *truncated* generator would
//! give an exactly unitary matrix and hide the probability that a displaced or
//! squeezed state leaks above the cutoff; taking the block of the true operator
//! keeps that loss visible, which is what the a_max calibration relies on.
//!
//! Displacement and squeezing use the standard Fock-basis recurrences. The
//! beamsplitter conserves total photon number, so it is exponentiated exactly
//! inside each photon-number block and then truncated.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    OneMode,
    TwoMode,
}

/// A single- or two-mode operator restricted to the truncated basis.
///
/// Two-mode matrices index the pair `(n_a, n_b)` as `n_a * cutoff + n_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    arity: Arity,
    cutoff: usize,
    matrix: DMatrix<C64>,
}

impl GateMatrix {
    pub fn new(arity: Arity, cutoff: usize, matrix: DMatrix<C64>) -> Result<Self> {
        check_cutoff(cutoff)?;
        let dim = match arity {
            Arity::OneMode => cutoff,
            Arity::TwoMode => cutoff * cutoff,
        };
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::shape(format!(
                "{arity:?} gate at cutoff {cutoff} needs a {dim}x{dim} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            arity,
            cutoff,
            matrix,
        })
    }

    pub fn identity(arity: Arity, cutoff: usize) -> Result<Self> {
        let dim = match arity {
            Arity::OneMode => cutoff,
            Arity::TwoMode => cutoff * cutoff,
        };
        Self::new(arity, cutoff, DMatrix::identity(dim, dim))
    }

    fn diagonal(cutoff: usize, entry: impl Fn(usize) -> C64) -> Self {
        let diag = nalgebra::DVector::from_iterator(cutoff, (0..cutoff).map(entry));
        Self {
            arity: Arity::OneMode,
            cutoff,
            matrix: DMatrix::from_diagonal(&diag),
        }
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            arity: self.arity,
            cutoff: self.cutoff,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `i * scale * (N G - G N)` for a one-mode gate, with `N` the number
    /// operator. This is the derivative of `R(scale*t) G R(scale*t)^dagger` at
    /// `t = 0`, i.e. of a gate whose phase enters through a rotation conjugation.
    pub(crate) fn number_commutator(&self, scale: f64) -> Self {
        debug_assert_eq!(self.arity, Arity::OneMode);
        let matrix = DMatrix::from_fn(self.cutoff, self.cutoff, |r, c| {
            self.matrix[(r, c)] * I * (scale * (r as f64 - c as f64))
        });
        Self {
            arity: Arity::OneMode,
            cutoff: self.cutoff,
            matrix,
        }
    }

    /// Largest absolute entry of `G^dagger G - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = self.dim();
        let gram = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - target).norm());
            }
        }
        worst
    }
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        Err(Error::InvalidCutoff(cutoff))
    } else {
        Ok(())
    }
}

/// Truncated annihilation and creation operators.
pub fn ladder_matrices(cutoff: usize) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    check_cutoff(cutoff)?;
    let mut a = DMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    let a_dag = a.adjoint();
    Ok((a, a_dag))
}

/// `<m|D(alpha)|n>` for `m, n < size`.
fn displacement_elements(alpha: C64, size: usize) -> DMatrix<C64> {
    let mut d = DMatrix::zeros(size, size);
    d[(0, 0)] = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for m in 1..size {
        d[(m, 0)] = d[(m - 1, 0)] * alpha / (m as f64).sqrt();
    }
    let alpha_conj = alpha.conj();
    for n in 1..size {
        let sn = (n as f64).sqrt();
        for m in 0..size {
            let mut v = -alpha_conj * d[(m, n - 1)];
            if m > 0 {
                v += (m as f64).sqrt() * d[(m - 1, n - 1)];
            }
            d[(m, n)] = v / sn;
        }
    }
    d
}

/// `<m|S(r e^{i phi})|n>` for `m, n < size`.
fn squeezing_elements(r: f64, phi: f64, size: usize) -> DMatrix<C64> {
    // Column n depends on rows up to m+1 of column n-1, so the first column is
    // carried 2*size-1 rows deep and shrinks by one row per column.
    let rows = 2 * size - 1;
    let mut s = DMatrix::<C64>::zeros(rows, size);
    let (ch, sh, th) = (r.cosh(), r.sinh(), r.tanh());
    let phase = C64::from_polar(1.0, phi);
    let ratio = -phase * th;
    let mut amp = C64::from(1.0 / ch.sqrt());
    s[(0, 0)] = amp;
    let mut k = 1;
    while 2 * k < rows {
        let kk = 2.0 * k as f64;
        amp *= ratio * ((kk * (kk - 1.0)).sqrt() / kk);
        s[(2 * k, 0)] = amp;
        k += 1;
    }
    let back = phase.conj() * sh;
    for n in 1..size {
        let sn = (n as f64).sqrt();
        for m in 0..(rows - n) {
            let mut v = back * ((m + 1) as f64).sqrt() * s[(m + 1, n - 1)];
            if m > 0 {
                v += ch * (m as f64).sqrt() * s[(m - 1, n - 1)];
            }
            s[(m, n)] = v / sn;
        }
    }
    s.rows(0, size).into_owned()
}

/// Displacement `D(alpha) = exp(alpha a^dagger - alpha^* a)` with
/// `alpha = amplitude * e^{i phase}`.
pub fn displacement_matrix(amplitude: f64, phase: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    check_finite("displacement amplitude", amplitude)?;
    let alpha = C64::from_polar(amplitude, phase);
    GateMatrix::new(Arity::OneMode, cutoff, displacement_elements(alpha, cutoff))
}

/// Squeezing `S(z) = exp((z^* a^2 - z a^dagger^2) / 2)` with
/// `z = amplitude * e^{i phase}`.
pub fn squeezing_matrix(amplitude: f64, phase: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    check_finite("squeezing amplitude", amplitude)?;
    GateMatrix::new(
        Arity::OneMode,
        cutoff,
        squeezing_elements(amplitude, phase, cutoff),
    )
}

/// Phase rotation `R(phi) = exp(i phi n)`.
pub fn rotation_matrix(phi: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    Ok(GateMatrix::diagonal(cutoff, |n| {
        C64::from_polar(1.0, phi * n as f64)
    }))
}

/// Kerr interaction `exp(i kappa n^2)`.
pub fn kerr_matrix(kappa: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    Ok(GateMatrix::diagonal(cutoff, |n| {
        C64::from_polar(1.0, kappa * (n * n) as f64)
    }))
}

/// Generator of `BS(theta, phi)` restricted to total photon number `total`,
/// in the basis `|j, total - j>`, j = 0..=total.
fn beamsplitter_block_generator(phi: f64, total: usize) -> DMatrix<C64> {
    let size = total + 1;
    let up = C64::from_polar(1.0, phi);
    let mut k = DMatrix::zeros(size, size);
    for j in 0..size {
        let nb = total - j;
        if j + 1 < size {
            // a^dagger b: |j, nb> -> sqrt((j+1) nb) |j+1, nb-1>
            k[(j + 1, j)] += up * (((j + 1) * nb) as f64).sqrt();
        }
        if j > 0 {
            // a b^dagger: |j, nb> -> sqrt(j (nb+1)) |j-1, nb+1>
            k[(j - 1, j)] -= up.conj() * ((j * (nb + 1)) as f64).sqrt();
        }
    }
    k
}

fn beamsplitter_blocks(theta: f64, phi: f64, cutoff: usize, derivative: bool) -> DMatrix<C64> {
    let dim = cutoff * cutoff;
    let mut out = DMatrix::zeros(dim, dim);
    for total in 0..=(2 * (cutoff - 1)) {
        let generator = beamsplitter_block_generator(phi, total);
        let mut block = (&generator * C64::from(theta)).exp();
        if derivative {
            block = &generator * block;
        }
        let lo = total.saturating_sub(cutoff - 1);
        let hi = total.min(cutoff - 1);
        for j_out in lo..=hi {
            for j_in in lo..=hi {
                let row = j_out * cutoff + (total - j_out);
                let col = j_in * cutoff + (total - j_in);
                out[(row, col)] = block[(j_out, j_in)];
            }
        }
    }
    out
}

/// Beamsplitter `BS(theta, phi) = exp(theta (e^{i phi} a^dagger b - e^{-i phi} a b^dagger))`.
pub fn beamsplitter_matrix(theta: f64, phi: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    check_finite("beamsplitter angle", theta)?;
    GateMatrix::new(
        Arity::TwoMode,
        cutoff,
        beamsplitter_blocks(theta, phi, cutoff, false),
    )
}

/// `d/d theta` of [`beamsplitter_matrix`].
pub fn beamsplitter_theta_derivative(theta: f64, phi: f64, cutoff: usize) -> Result<GateMatrix> {
    check_cutoff(cutoff)?;
    GateMatrix::new(
        Arity::TwoMode,
        cutoff,
        beamsplitter_blocks(theta, phi, cutoff, true),
    )
}

/// A one-mode gate together with its derivatives in amplitude and phase.
#[derive(Debug, Clone)]
pub struct GateWithGrad {
    pub gate: GateMatrix,
    pub d_amplitude: GateMatrix,
    pub d_phase: GateMatrix,
}

/// `(K G)` restricted to the leading `cutoff` block, where `G` is the gate
/// computed on `big` levels and `K = generator / amplitude` couples level
/// `m` only to `m +- reach`. Exact as long as `big >= cutoff + reach`.
fn amplitude_derivative(
    generator_entry: impl Fn(usize, usize) -> C64,
    big: &DMatrix<C64>,
    cutoff: usize,
    reach: usize,
) -> DMatrix<C64> {
    DMatrix::from_fn(cutoff, cutoff, |m, n| {
        let lo = m.saturating_sub(reach);
        let hi = (m + reach).min(big.nrows() - 1);
        (lo..=hi).map(|k| generator_entry(m, k) * big[(k, n)]).sum()
    })
}

pub fn displacement_with_grad(amplitude: f64, phase: f64, cutoff: usize) -> Result<GateWithGrad> {
    check_cutoff(cutoff)?;
    check_finite("displacement amplitude", amplitude)?;
    let alpha = C64::from_polar(amplitude, phase);
    let big = displacement_elements(alpha, cutoff + 1);
    let unit = C64::from_polar(1.0, phase);
    // K = e^{i phi} a^dagger - e^{-i phi} a
    let generator = |m: usize, k: usize| -> C64 {
        if k + 1 == m {
            unit * (m as f64).sqrt()
        } else if k == m + 1 {
            -unit.conj() * (k as f64).sqrt()
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let d_amp = amplitude_derivative(generator, &big, cutoff, 1);
    let gate = GateMatrix::new(
        Arity::OneMode,
        cutoff,
        big.view((0, 0), (cutoff, cutoff)).into_owned(),
    )?;
    let d_phase = gate.number_commutator(1.0);
    Ok(GateWithGrad {
        d_amplitude: GateMatrix::new(Arity::OneMode, cutoff, d_amp)?,
        d_phase,
        gate,
    })
}

pub fn squeezing_with_grad(amplitude: f64, phase: f64, cutoff: usize) -> Result<GateWithGrad> {
    check_cutoff(cutoff)?;
    check_finite("squeezing amplitude", amplitude)?;
    let big = squeezing_elements(amplitude, phase, cutoff + 2);
    let unit = C64::from_polar(1.0, phase);
    // K = (e^{-i phi} a^2 - e^{i phi} a^dagger^2) / 2
    let generator = |m: usize, k: usize| -> C64 {
        if k == m + 2 {
            unit.conj() * (0.5 * ((k * (k - 1)) as f64).sqrt())
        } else if m == k + 2 {
            -unit * (0.5 * ((m * (m - 1)) as f64).sqrt())
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let d_amp = amplitude_derivative(generator, &big, cutoff, 2);
    let gate = GateMatrix::new(
        Arity::OneMode,
        cutoff,
        big.view((0, 0), (cutoff, cutoff)).into_owned(),
    )?;
    let d_phase = gate.number_commutator(0.5);
    Ok(GateWithGrad {
        d_amplitude: GateMatrix::new(Arity::OneMode, cutoff, d_amp)?,
        d_phase,
        gate,
    })
}

/// `(R(phi), dR/dphi)`.
pub fn rotation_with_grad(phi: f64, cutoff: usize) -> Result<(GateMatrix, GateMatrix)> {
    let gate = rotation_matrix(phi, cutoff)?;
    let grad = GateMatrix::diagonal(cutoff, |n| gate.matrix[(n, n)] * I * n as f64);
    Ok((gate, grad))
}

/// `(K(kappa), dK/dkappa)`.
pub fn kerr_with_grad(kappa: f64, cutoff: usize) -> Result<(GateMatrix, GateMatrix)> {
    let gate = kerr_matrix(kappa, cutoff)?;
    let grad = GateMatrix::diagonal(cutoff, |n| gate.matrix[(n, n)] * I * (n * n) as f64);
    Ok((gate, grad))
}

fn check_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical {
            context: format!("{what} = {value}"),
            parameter: None,
        })
    }
}
