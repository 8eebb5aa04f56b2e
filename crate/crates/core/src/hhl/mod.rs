//! Statevector simulation of the HHL linear-system algorithm.
//!
//! Registers, from least to most significant qubit:
//!
//! * `b`: `n_b = log2(N_pad)` qubits holding the right-hand side and,
//!   after the run, the solution;
//! * `q`: `n_q` phase-estimation qubits;
//! * one ancilla flagging a successful inversion.
//!
//! `U = exp(iAt)` and its powers are built from an eigendecomposition of `A`
//! instead of a gate decomposition. The evolution time `t` places the largest
//! eigenvalue just below the largest representable phase, and the rotation
//! constant `C_rot` equals the smallest non-zero eigenvalue estimate, so every
//! rotation angle `2 arcsin(C_rot / λ̃)` is defined.

pub mod statevector;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::apply_threshold;
use crate::error::{Error, Result};
use crate::ising::IsingSystem;
use crate::linalg::{dot, norm2, MAX_DENSE_DIM, PINV_RCOND};

use self::statevector::StateVector;

/// Largest register the full circuit simulation accepts.
pub const MAX_CIRCUIT_QUBITS: usize = 22;

/// Relative margin keeping the largest phase strictly below `1 - 2^-n_q`.
const PHASE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterPlan {
    pub n: usize,
    pub n_pad: usize,
    pub n_b: usize,
    pub n_q: usize,
    pub total_qubits: usize,
    pub kappa: f64,
    pub lambda_max: f64,
    pub evolution_time: f64,
    pub c_rot: f64,
}

impl RegisterPlan {
    /// Same system with a different phase register width.
    pub fn with_phase_qubits(&self, n_q: usize) -> Self {
        let evolution_time =
            2.0 * PI * (1.0 - (-(n_q as f64)).exp2()) / (self.lambda_max * (1.0 + PHASE_MARGIN));
        RegisterPlan {
            n_q,
            total_qubits: self.n_b + n_q + 1,
            evolution_time,
            c_rot: 2.0 * PI / (evolution_time * (1u64 << n_q) as f64),
            ..self.clone()
        }
    }

    /// Eigenvalue represented by phase-register value `k`.
    pub fn eigenvalue_of(&self, k: usize) -> f64 {
        k as f64 * self.c_rot
    }

    /// Phase-register value closest to eigenvalue `lambda`.
    pub fn round_phase(&self, lambda: f64) -> usize {
        let m = (1u64 << self.n_q) as f64;
        (lambda * self.evolution_time / (2.0 * PI) * m).round() as usize
    }
}

fn check_padded(system: &IsingSystem) -> Result<()> {
    let n = system.n();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Dimension {
            expected: n.next_power_of_two().max(1),
            got: n,
        });
    }
    Ok(())
}

pub fn plan_registers(system: &IsingSystem) -> Result<RegisterPlan> {
    check_padded(system)?;
    let ev = system.matrix.eigenvalues()?;
    let lambda_min = ev[0];
    let lambda_max = *ev.last().expect("non-empty spectrum");
    let sigma_max = lambda_max.abs().max(lambda_min.abs());
    let sigma_min = ev.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if !(sigma_min > PINV_RCOND * sigma_max) {
        return Err(Error::Singular {
            sigma_min,
            sigma_max,
        });
    }
    if lambda_min < 0.0 {
        return Err(Error::NegativeSpectrum(lambda_min));
    }
    let kappa = sigma_max / sigma_min;
    let n_pad = system.n();
    let n_b = n_pad.trailing_zeros() as usize;
    let n_q = (1 + n_b).max((kappa + 1.0).log2().ceil() as usize);

    let base = RegisterPlan {
        n: system.n_orig,
        n_pad,
        n_b,
        n_q,
        total_qubits: 0,
        kappa,
        lambda_max,
        evolution_time: 0.0,
        c_rot: 0.0,
    };
    Ok(base.with_phase_qubits(n_q))
}

/// Normalized uniform state prepared by a Hadamard wall, with `C = ‖b‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedState {
    pub amplitudes: Vec<f64>,
    pub norm: f64,
}

pub fn prepare_b_state(system: &IsingSystem) -> Result<PreparedState> {
    let b = &system.b;
    let Some(&b0) = b.first() else {
        return Err(Error::Dimension {
            expected: 1,
            got: 0,
        });
    };
    if b.iter().any(|&v| v != b0) {
        return Err(Error::NonUniformRhs);
    }
    let norm = norm2(b);
    if norm == 0.0 {
        return Err(Error::NonUniformRhs);
    }
    let n = b.len() as f64;
    Ok(PreparedState {
        amplitudes: vec![b0.signum() / n.sqrt(); b.len()],
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HhlMode {
    SpectralOracle,
    FullCircuit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HhlResult {
    /// Rescaled solution on the unpadded coordinates.
    pub s_quantum: Vec<f64>,
    pub success_probability: f64,
    /// `|⟨ŝ_quantum, ŝ_classical⟩|` on the unpadded coordinates.
    pub fidelity: f64,
    pub mode: HhlMode,
    /// Weight left outside `q = 0` after uncomputation, relative to the
    /// post-selected branch. Zero for the oracle.
    pub phase_residual: f64,
    /// Largest deviation of the state norm from 1 across circuit steps.
    pub norm_drift: f64,
}

impl HhlResult {
    pub fn classify(&self, threshold: f64) -> Vec<bool> {
        apply_threshold(&self.s_quantum, threshold)
    }
}

struct Eigensystem {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn eigensystem(system: &IsingSystem) -> Result<Eigensystem> {
    if system.n() > MAX_DENSE_DIM {
        return Err(Error::Size(format!(
            "padded dimension {} exceeds the dense limit {MAX_DENSE_DIM}",
            system.n()
        )));
    }
    let eig = SymmetricEigen::new(system.matrix.to_dense());
    Ok(Eigensystem {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: eig.eigenvectors,
    })
}

fn classical_reference(system: &IsingSystem) -> Result<Vec<f64>> {
    let mut s = system.matrix.pinv_solve(&system.b)?;
    s.truncate(system.n_orig);
    Ok(s)
}

fn fidelity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).abs().min(1.0)
}

/// Analytic limit of the circuit: every eigenvalue is replaced by its nearest
/// `n_q`-bit estimate and inverted exactly.
pub fn solve_spectral_oracle(system: &IsingSystem, plan: &RegisterPlan) -> Result<HhlResult> {
    check_padded(system)?;
    let prepared = prepare_b_state(system)?;
    let eig = eigensystem(system)?;
    let n = system.n();

    let mut x = vec![0.0; n];
    let mut success = 0.0;
    for (j, &lambda) in eig.values.iter().enumerate() {
        let u = eig.vectors.column(j);
        let overlap: f64 = u.iter().zip(&prepared.amplitudes).map(|(a, b)| a * b).sum();
        if overlap.abs() < 1e-12 {
            continue;
        }
        let k = plan.round_phase(lambda);
        if k == 0 {
            return Err(Error::ZeroPhase { eigenvalue: lambda });
        }
        let estimate = plan.eigenvalue_of(k);
        success += (plan.c_rot / estimate).powi(2) * overlap * overlap;
        for (xi, ui) in x.iter_mut().zip(u.iter()) {
            *xi += prepared.norm * overlap / estimate * ui;
        }
    }
    x.truncate(system.n_orig);
    let reference = classical_reference(system)?;
    Ok(HhlResult {
        fidelity: fidelity(&x, &reference),
        s_quantum: x,
        success_probability: success,
        mode: HhlMode::SpectralOracle,
        phase_residual: 0.0,
        norm_drift: 0.0,
    })
}

/// Dense `exp(i A t p)` in row-major order.
fn evolution(eig: &Eigensystem, t: f64, power: f64) -> Vec<Complex64> {
    let n = eig.values.len();
    let phases: Vec<Complex64> = eig
        .values
        .iter()
        .map(|&l| Complex64::from_polar(1.0, l * t * power))
        .collect();
    let v = &eig.vectors;
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            u[r * n + c] = (0..n).map(|j| phases[j] * (v[(r, j)] * v[(c, j)])).sum();
        }
    }
    u
}

struct NormTracker(f64);

impl NormTracker {
    fn check(&mut self, state: &StateVector) {
        self.0 = self.0.max((state.norm_sqr().sqrt() - 1.0).abs());
    }
}

/// Gate-by-gate simulation of state preparation, phase estimation,
/// controlled inversion, uncomputation and post-selection.
pub fn solve_full_circuit(system: &IsingSystem, plan: &RegisterPlan) -> Result<HhlResult> {
    check_padded(system)?;
    if plan.total_qubits > MAX_CIRCUIT_QUBITS {
        return Err(Error::Size(format!(
            "{} qubits exceed the statevector limit of {MAX_CIRCUIT_QUBITS}",
            plan.total_qubits
        )));
    }
    let prepared = prepare_b_state(system)?;
    let eig = eigensystem(system)?;
    let (n_b, n_q) = (plan.n_b, plan.n_q);
    let dim = plan.n_pad;
    let ancilla = n_b + n_q;
    let powers: Vec<Vec<Complex64>> = (0..n_q)
        .map(|k| evolution(&eig, plan.evolution_time, (1u64 << k) as f64))
        .collect();
    let inverse_powers: Vec<Vec<Complex64>> = (0..n_q)
        .map(|k| evolution(&eig, plan.evolution_time, -((1u64 << k) as f64)))
        .collect();

    // 1. all qubits in |0⟩
    let mut state = StateVector::zeros(plan.total_qubits);
    let mut drift = NormTracker(0.0);

    // 2. Hadamard wall on b; the sign of a negative uniform b is restored at readout
    for q in 0..n_b {
        state.hadamard(q);
    }
    drift.check(&state);

    // 3. phase estimation
    for k in 0..n_q {
        state.hadamard(n_b + k);
    }
    for (k, u) in powers.iter().enumerate() {
        state.controlled_low_register(n_b + k, u, dim);
    }
    state.inverse_qft(n_b, n_q);
    drift.check(&state);

    // 4. ancilla rotation by 2 arcsin(C_rot / λ̃) for every register value λ̃ ≠ 0
    let phase_values = 1usize << n_q;
    let anc_offset = 1usize << ancilla;
    {
        let amps = state.amplitudes_mut();
        for k in 1..phase_values {
            let sin = (plan.c_rot / plan.eigenvalue_of(k)).min(1.0);
            let cos = (1.0 - sin * sin).sqrt();
            let base = k << n_b;
            for i in base..base + dim {
                let (a0, a1) = (amps[i], amps[i + anc_offset]);
                amps[i] = a0 * cos - a1 * sin;
                amps[i + anc_offset] = a0 * sin + a1 * cos;
            }
        }
    }
    drift.check(&state);

    // 5. uncompute phase estimation
    state.qft(n_b, n_q);
    for (k, u) in inverse_powers.iter().enumerate().rev() {
        state.controlled_low_register(n_b + k, u, dim);
    }
    for k in 0..n_q {
        state.hadamard(n_b + k);
    }
    drift.check(&state);

    // 6. post-select the ancilla on |1⟩ and read the b register at q = 0
    let amps = state.amplitudes();
    let success: f64 = amps[anc_offset..].iter().map(|a| a.norm_sqr()).sum();
    if !(success >= 1e-12) {
        return Err(Error::AncillaNeverOne(success));
    }
    let solution = &amps[anc_offset..anc_offset + dim];
    let kept: f64 = solution.iter().map(|a| a.norm_sqr()).sum();
    let phase_residual = ((success - kept) / success).max(0.0);

    // unnormalized amplitudes are C_rot A⁻¹ b̂; undo both constants
    let scale = prepared.norm * prepared.amplitudes[0].signum() / plan.c_rot;
    let mut x: Vec<f64> = solution.iter().map(|a| a.re * scale).collect();
    x.truncate(system.n_orig);
    let reference = classical_reference(system)?;
    Ok(HhlResult {
        fidelity: fidelity(&x, &reference),
        s_quantum: x,
        success_probability: success,
        mode: HhlMode::FullCircuit,
        phase_residual,
        norm_drift: drift.0,
    })
}

pub fn solve(system: &IsingSystem, plan: &RegisterPlan, mode: HhlMode) -> Result<HhlResult> {
    match mode {
        HhlMode::SpectralOracle => solve_spectral_oracle(system, plan),
        HhlMode::FullCircuit => solve_full_circuit(system, plan),
    }
}

/// Register sizing for one system. Circuit depth and two-qubit gate counts
/// are not estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub n: usize,
    pub n_pad: usize,
    pub n_b: usize,
    pub n_q: usize,
    pub total_qubits: usize,
    pub kappa: f64,
    pub evolution_time: f64,
    pub c_rot: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub success_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
}

impl ResourceReport {
    pub const CSV_HEADER: &'static str =
        "n,n_pad,n_b,n_q,total_qubits,kappa,success_probability,fidelity";

    pub fn with_result(mut self, result: &HhlResult) -> Self {
        self.success_probability = Some(result.success_probability);
        self.fidelity = Some(result.fidelity);
        self
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.n_pad,
            self.n_b,
            self.n_q,
            self.total_qubits,
            self.kappa,
            opt(self.success_probability),
            opt(self.fidelity)
        )
    }
}

pub fn resource_report(plan: &RegisterPlan) -> ResourceReport {
    ResourceReport {
        n: plan.n,
        n_pad: plan.n_pad,
        n_b: plan.n_b,
        n_q: plan.n_q,
        total_qubits: plan.total_qubits,
        kappa: plan.kappa,
        evolution_time: plan.evolution_time,
        c_rot: plan.c_rot,
        success_probability: None,
        fidelity: None,
    }
}
