//! Supersymmetric tensors, the factored ODECO closed loop, and Z-eigenpair checks.
//!
//! [`DenseSymTensor`] stores every one of the `n^k` entries and exists as a
//! brute-force oracle. [`OdecoSystem`] is the working representation: an
//! orthonormal basis with one eigenvalue and one feedback gain per column.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certify;
use crate::error::{check_dim, Error, Result};
use crate::modal::ModeParams;

/// Default bound on `max |VᵀV − I|` for a basis to count as orthonormal.
pub const DEFAULT_ORTHO_TOL: f64 = 1e-10;

/// Columns whose norm is within this distance of 1 are rescaled on ingestion.
pub const NORMALIZE_TOL: f64 = 1e-6;

/// Largest dense tensor [`materialize`](OdecoSystem::materialize) will allocate.
pub const MAX_DENSE_ENTRIES: usize = 1_000_000;

/// Unit-norm tolerance for Z-eigenvector candidates.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Dense order-`k` tensor over `R^n`, flat row-major (mixed radix `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymTensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DenseSymTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        if order < 1 || dim < 1 {
            return Err(Error::InvalidArgument(format!(
                "tensor order and dimension must be positive (got k = {order}, n = {dim})"
            )));
        }
        let entries = checked_entries(dim, order)?;
        Ok(Self {
            order,
            dim,
            data: vec![0.0; entries],
        })
    }

    /// Wrap a flat entry array of length `n^k`.
    pub fn from_vec(order: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        check_dim(t.data.len(), data.len())?;
        t.data = data;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        index.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Largest deviation between an entry and the entry at its sorted index.
    ///
    /// Zero exactly when the tensor is invariant under every index permutation.
    pub fn symmetry_defect(&self) -> f64 {
        let mut index = vec![0usize; self.order];
        let mut sorted = vec![0usize; self.order];
        let mut worst = 0.0f64;
        for (flat, &value) in self.data.iter().enumerate() {
            self.unflatten(flat, &mut index);
            sorted.copy_from_slice(&index);
            sorted.sort_unstable();
            worst = worst.max((value - self.get(&sorted)).abs());
        }
        worst
    }

    fn unflatten(&self, mut flat: usize, index: &mut [usize]) {
        for slot in index.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
    }

    /// `(A x^{k-1})_i = Σ a_{i i2…ik} x_{i2}⋯x_{ik}`, summed over every stored entry.
    pub fn contract(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        let mut index = vec![0usize; self.order];
        for (flat, &a) in self.data.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            self.unflatten(flat, &mut index);
            let tail: f64 = index[1..].iter().map(|&j| x[j]).product();
            out[index[0]] += a * tail;
        }
        Ok(out)
    }

    /// `A x^k = Σ a_{i1…ik} x_{i1}⋯x_{ik}`.
    pub fn scalar_form(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut index = vec![0usize; self.order];
        let mut total = 0.0;
        for (flat, &a) in self.data.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            self.unflatten(flat, &mut index);
            total += a * index.iter().map(|&j| x[j]).product::<f64>();
        }
        Ok(total)
    }

    /// `‖A v^{k-1} − λ v‖₂` for a unit vector `v`.
    pub fn z_eigen_residual(&self, v: &[f64], lambda: f64) -> Result<f64> {
        check_dim(self.dim, v.len())?;
        let norm = norm2(v);
        if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(Error::NonUnitVector { norm });
        }
        let av = self.contract(v)?;
        Ok(norm2(
            &av.iter()
                .zip(v)
                .map(|(a, vi)| a - lambda * vi)
                .collect::<Vec<_>>(),
        ))
    }
}

fn checked_entries(dim: usize, order: usize) -> Result<usize> {
    let entries = (dim as u128).checked_pow(order as u32).unwrap_or(u128::MAX);
    if entries > MAX_DENSE_ENTRIES as u128 {
        return Err(Error::SizeGuard {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    Ok(entries as usize)
}

/// Free-function form of [`DenseSymTensor::contract`].
pub fn dense_contract(a: &DenseSymTensor, x: &[f64]) -> Result<Vec<f64>> {
    a.contract(x)
}

/// Free-function form of [`DenseSymTensor::scalar_form`].
pub fn scalar_form(a: &DenseSymTensor, x: &[f64]) -> Result<f64> {
    a.scalar_form(x)
}

/// Free-function form of [`DenseSymTensor::z_eigen_residual`].
pub fn z_eigen_residual(a: &DenseSymTensor, v: &[f64], lambda: f64) -> Result<f64> {
    a.z_eigen_residual(v, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(p: u32) -> Self {
        if p.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Closed loop `ẋ = Kx + 𝒜x^{k−1}` with `𝒜 = Σ λ_r v_r^{⊗k}` and `K = Σ κ_r v_r v_rᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdecoSystem {
    degree: usize,
    basis: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    kappa: Vec<f64>,
}

impl OdecoSystem {
    /// Build a system and require `max |VᵀV − I| ≤ 1e-10`.
    pub fn new(
        degree: usize,
        basis: Vec<Vec<f64>>,
        lambda: Vec<f64>,
        kappa: Vec<f64>,
    ) -> Result<Self> {
        let sys = Self::from_parts(degree, basis, lambda, kappa)?;
        let defect = sys.orthonormality_defect();
        if !(defect <= DEFAULT_ORTHO_TOL) {
            return Err(Error::InvalidSystem(format!(
                "basis is not orthonormal (max |VᵀV − I| = {defect:e})"
            )));
        }
        Ok(sys)
    }

    /// Shape checks and column normalization only; orthonormality is left to
    /// [`validate_system`].
    pub fn from_parts(
        degree: usize,
        mut basis: Vec<Vec<f64>>,
        lambda: Vec<f64>,
        kappa: Vec<f64>,
    ) -> Result<Self> {
        let n = basis.len();
        if n == 0 {
            return Err(Error::InvalidSystem("empty basis".into()));
        }
        if degree < 3 {
            return Err(Error::InvalidSystem(format!(
                "degree k must be at least 3 (got {degree})"
            )));
        }
        if lambda.len() != n || kappa.len() != n {
            return Err(Error::InvalidSystem(format!(
                "expected {n} eigenvalues and gains, got {} and {}",
                lambda.len(),
                kappa.len()
            )));
        }
        for (j, col) in basis.iter_mut().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "basis column {} has length {}, expected {n}",
                    j + 1,
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSystem(format!(
                    "basis column {} has non-finite entries",
                    j + 1
                )));
            }
            let norm = norm2(col);
            if (norm - 1.0).abs() > NORMALIZE_TOL {
                return Err(Error::InvalidSystem(format!(
                    "basis column {} has norm {norm}, too far from 1 to normalize",
                    j + 1
                )));
            }
            col.iter_mut().for_each(|v| *v /= norm);
        }
        if lambda.iter().chain(&kappa).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(
                "eigenvalues and gains must be finite".into(),
            ));
        }
        Ok(Self {
            degree,
            basis,
            lambda,
            kappa,
        })
    }

    /// Random system with a Gram–Schmidt orthonormalized basis.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n: usize,
        degree: usize,
        lambda_range: (f64, f64),
        kappa_range: (f64, f64),
    ) -> Result<Self> {
        let basis = random_orthonormal_basis(rng, n);
        let lambda = (0..n)
            .map(|_| rng.gen_range(lambda_range.0..=lambda_range.1))
            .collect();
        let kappa = (0..n)
            .map(|_| rng.gen_range(kappa_range.0..=kappa_range.1))
            .collect();
        Self::new(degree, basis, lambda, kappa)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `p = k − 2`, the exponent of the modal nonlinearity.
    pub fn p(&self) -> u32 {
        (self.degree - 2) as u32
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.p())
    }

    /// Column `r` of the basis.
    pub fn basis_vector(&self, r: usize) -> &[f64] {
        &self.basis[r]
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn mode(&self, r: usize) -> ModeParams {
        ModeParams::new(self.kappa[r], self.lambda[r], self.p())
            .expect("degree >= 3 guarantees p >= 1")
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeParams> + '_ {
        (0..self.dim()).map(move |r| self.mode(r))
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&self.basis[i], &self.basis[j]) - target).abs());
            }
        }
        worst
    }

    /// `Σ_r λ_r (v_rᵀx)^{k−1} v_r` in `O(n²)`.
    pub fn contract(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.contract_into(x, &mut out);
        Ok(out)
    }

    /// Allocation-free [`contract`](Self::contract); slices must have length `n`.
    pub fn contract_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let power = (self.degree - 1) as i32;
        for (v, &lambda) in self.basis.iter().zip(&self.lambda) {
            let coef = lambda * dot(v, x).powi(power);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += coef * vi;
            }
        }
    }

    /// Closed-loop right-hand side `Kx + 𝒜x^{k−1}`, allocation-free.
    pub fn vector_field_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let power = (self.degree - 1) as i32;
        for r in 0..self.basis.len() {
            let v = &self.basis[r];
            let y = dot(v, x);
            let coef = self.kappa[r] * y + self.lambda[r] * y.powi(power);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += coef * vi;
            }
        }
    }

    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.vector_field_into(x, &mut out);
        Ok(out)
    }

    /// Feedback gain `K = Σ κ_r v_r v_rᵀ`, row-major.
    pub fn gain_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut k = vec![vec![0.0; n]; n];
        for (v, &kappa) in self.basis.iter().zip(&self.kappa) {
            for i in 0..n {
                for j in 0..n {
                    k[i][j] += kappa * v[i] * v[j];
                }
            }
        }
        k
    }

    /// Dense `Σ_r λ_r v_r^{⊗k}`, guarded at [`MAX_DENSE_ENTRIES`] entries.
    pub fn materialize(&self) -> Result<DenseSymTensor> {
        let n = self.dim();
        let mut tensor = DenseSymTensor::zeros(self.degree, n)?;
        let mut index = vec![0usize; self.degree];
        for flat in 0..tensor.data.len() {
            tensor.unflatten(flat, &mut index);
            tensor.data[flat] = self
                .basis
                .iter()
                .zip(&self.lambda)
                .map(|(v, &lambda)| lambda * index.iter().map(|&i| v[i]).product::<f64>())
                .sum();
        }
        Ok(tensor)
    }

    /// Index sets `(I₊, I₋)`: modes with `λ_r > 0` and `λ_r < 0`.
    pub fn sign_sets(&self) -> (Vec<usize>, Vec<usize>) {
        let plus = (0..self.dim()).filter(|&r| self.lambda[r] > 0.0).collect();
        let minus = (0..self.dim()).filter(|&r| self.lambda[r] < 0.0).collect();
        (plus, minus)
    }

    /// First mode whose gain is not strictly negative.
    pub fn first_nonnegative_gain(&self) -> Option<usize> {
        self.kappa.iter().position(|&k| !(k < 0.0))
    }
}

/// Free-function form of [`OdecoSystem::contract`].
pub fn odeco_contract(sys: &OdecoSystem, x: &[f64]) -> Result<Vec<f64>> {
    sys.contract(x)
}

/// Free-function form of [`OdecoSystem::materialize`].
pub fn materialize(sys: &OdecoSystem) -> Result<DenseSymTensor> {
    sys.materialize()
}

/// Columns of the planar rotation by `theta`: `v₁ = (cos, sin)`, `v₂ = (−sin, cos)`.
pub fn rotation_basis(theta: f64) -> Vec<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    vec![vec![c, s], vec![-s, c]]
}

pub fn random_orthonormal_basis<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for u in &cols {
                let proj = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= proj * ui);
            }
        }
        let norm = norm2(&v);
        if norm > 1e-3 {
            v.iter_mut().for_each(|vi| *vi /= norm);
            cols.push(v);
        }
    }
    cols
}

/// Summary produced by [`validate_system`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub dim: usize,
    pub degree: usize,
    pub p: u32,
    pub parity: Parity,
    pub orthonormality_defect: f64,
    pub tolerance: f64,
    /// One-based indices of modes with `λ_r > 0`.
    pub i_plus: Vec<usize>,
    /// One-based indices of modes with `λ_r < 0`.
    pub i_minus: Vec<usize>,
    /// One-based indices of modes with `κ_r ≥ 0` (outside the certified regime).
    pub nonnegative_gain_modes: Vec<usize>,
    /// Per-mode ROA thresholds; `None` when the mode is unconstrained or `κ_r ≥ 0`.
    pub thresholds: Vec<Option<f64>>,
    pub issues: Vec<String>,
}

/// Check orthonormality and summarize parity and per-mode signs.
///
/// Never fails: problems are listed in [`ValidationReport::issues`].
pub fn validate_system(sys: &OdecoSystem, tol: f64) -> ValidationReport {
    let defect = sys.orthonormality_defect();
    let mut issues = Vec::new();
    let orthonormal = defect <= tol;
    if !orthonormal {
        issues.push(format!(
            "basis is not orthonormal: max |VᵀV − I| = {defect:e} exceeds {tol:e}"
        ));
    }
    let (plus, minus) = sys.sign_sets();
    let nonneg: Vec<usize> = (0..sys.dim())
        .filter(|&r| !(sys.kappa()[r] < 0.0))
        .map(|r| r + 1)
        .collect();
    if !nonneg.is_empty() {
        issues.push(format!(
            "modes {nonneg:?} have κ ≥ 0; region-of-attraction, settling and escape certificates require κ < 0"
        ));
    }
    let thresholds = sys
        .modes()
        .map(|m| certify::threshold(&m).ok().flatten())
        .collect();
    ValidationReport {
        valid: orthonormal,
        dim: sys.dim(),
        degree: sys.degree(),
        p: sys.p(),
        parity: sys.parity(),
        orthonormality_defect: defect,
        tolerance: tol,
        i_plus: plus.into_iter().map(|r| r + 1).collect(),
        i_minus: minus.into_iter().map(|r| r + 1).collect(),
        nonnegative_gain_modes: nonneg,
        thresholds,
        issues,
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
