//! Minimal dense statevector with the handful of gates the HHL circuit needs.
//!
//! Qubit `k` is bit `k` of the basis-state index (little endian).

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zeros(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn hadamard(&mut self, q: usize) {
        let mask = 1usize << q;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let (a, b) = (self.amps[i], self.amps[i | mask]);
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i | mask] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    /// Multiplies by `e^{iφ}` every basis state where both qubits are 1.
    pub fn controlled_phase(&mut self, control: usize, target: usize, phi: f64) {
        let mask = (1usize << control) | (1usize << target);
        let phase = Complex64::from_polar(1.0, phi);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a *= phase;
            }
        }
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, (i & !ma) | mb);
            }
        }
    }

    /// Applies the dense unitary `u` (row-major, `dim × dim`) to the register
    /// made of the lowest `log2(dim)` qubits, on basis states whose `control`
    /// qubit is 1.
    pub fn controlled_low_register(&mut self, control: usize, u: &[Complex64], dim: usize) {
        debug_assert_eq!(u.len(), dim * dim);
        debug_assert!(dim.is_power_of_two() && (1usize << control) >= dim);
        let cmask = 1usize << control;
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        for base in (0..self.amps.len()).step_by(dim) {
            if base & cmask == 0 {
                continue;
            }
            let slice = &mut self.amps[base..base + dim];
            for (r, out) in buf.iter_mut().enumerate() {
                let row = &u[r * dim..(r + 1) * dim];
                *out = row.iter().zip(slice.iter()).map(|(x, y)| x * y).sum();
            }
            slice.copy_from_slice(&buf);
        }
    }

    /// Quantum Fourier transform `|x⟩ → 2^{-m/2} Σ_y e^{2πixy/2^m} |y⟩` on the
    /// `m` consecutive qubits starting at `first`.
    pub fn qft(&mut self, first: usize, m: usize) {
        for j in (0..m).rev() {
            self.hadamard(first + j);
            for k in (0..j).rev() {
                let angle = std::f64::consts::PI / (1u64 << (j - k)) as f64;
                self.controlled_phase(first + k, first + j, angle);
            }
        }
        for j in 0..m / 2 {
            self.swap(first + j, first + m - 1 - j);
        }
    }

    /// Inverse of [`StateVector::qft`]: the same gates reversed, angles negated.
    pub fn inverse_qft(&mut self, first: usize, m: usize) {
        for j in 0..m / 2 {
            self.swap(first + j, first + m - 1 - j);
        }
        for j in 0..m {
            for k in 0..j {
                let angle = std::f64::consts::PI / (1u64 << (j - k)) as f64;
                self.controlled_phase(first + k, first + j, -angle);
            }
            self.hadamard(first + j);
        }
    }
}
