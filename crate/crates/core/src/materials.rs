//! Isotropic material parameters of the relaxed micromorphic model.

use serde::{Deserialize, Serialize};

use crate::error::{FemError, Result};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub lambda_e: f64,
    pub mu_e: f64,
    pub lambda_micro: f64,
    pub mu_micro: f64,
    pub mu_c: f64,
    pub mu_macro: f64,
    pub lambda_macro: f64,
    pub lc: f64,
}

impl MaterialParams {
    /// Builds a parameter set from meso and micro moduli, deriving the macro
    /// moduli from the harmonic relations.
    pub fn from_meso_micro(
        lambda_e: f64,
        mu_e: f64,
        lambda_micro: f64,
        mu_micro: f64,
        mu_c: f64,
        lc: f64,
    ) -> Result<Self> {
        let (mu_macro, lambda_macro) = macro_from(lambda_e, mu_e, lambda_micro, mu_micro)?;
        let p = Self { lambda_e, mu_e, lambda_micro, mu_micro, mu_c, mu_macro, lambda_macro, lc };
        p.validate()?;
        Ok(p)
    }

    /// Builds a parameter set from macro and micro moduli.
    pub fn from_macro_micro(
        lambda_macro: f64,
        mu_macro: f64,
        lambda_micro: f64,
        mu_micro: f64,
        mu_c: f64,
        lc: f64,
    ) -> Result<Self> {
        let (mu_e, lambda_e) = meso_from(mu_macro, lambda_macro, mu_micro, lambda_micro)?;
        let p = Self { lambda_e, mu_e, lambda_micro, mu_micro, mu_c, mu_macro, lambda_macro, lc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_e > 0.0 && self.mu_micro > 0.0) {
            return Err(FemError::InvalidParam("mu_e and mu_micro must be positive".into()));
        }
        if self.mu_c < 0.0 || self.lc < 0.0 || self.mu_macro < 0.0 {
            return Err(FemError::InvalidParam("mu_c, mu_macro and L_c must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_lc(mut self, lc: f64) -> Self {
        self.lc = lc;
        self
    }
}

/// `μ_macro = μ_e μ_micro / (μ_e + μ_micro)` and the same harmonic relation
/// for `2μ + 3λ`. Returns `(μ_macro, λ_macro)`.
pub fn macro_from(lambda_e: f64, mu_e: f64, lambda_micro: f64, mu_micro: f64) -> Result<(f64, f64)> {
    let ms = mu_e + mu_micro;
    let ke = 2.0 * mu_e + 3.0 * lambda_e;
    let km = 2.0 * mu_micro + 3.0 * lambda_micro;
    if ms == 0.0 || ke + km == 0.0 {
        return Err(FemError::SingularLimit("vanishing modulus sum".into()));
    }
    let mu_macro = mu_e * mu_micro / ms;
    let k_macro = ke * km / (ke + km);
    Ok((mu_macro, (k_macro - 2.0 * mu_macro) / 3.0))
}

/// Inverse of [`macro_from`]. Returns `(μ_e, λ_e)`.
pub fn meso_from(mu_macro: f64, lambda_macro: f64, mu_micro: f64, lambda_micro: f64) -> Result<(f64, f64)> {
    let kma = 2.0 * mu_macro + 3.0 * lambda_macro;
    let kmi = 2.0 * mu_micro + 3.0 * lambda_micro;
    if mu_micro == mu_macro {
        return Err(FemError::SingularLimit("mu_micro equals mu_macro".into()));
    }
    if kmi == kma {
        return Err(FemError::SingularLimit("bulk-type moduli of micro and macro coincide".into()));
    }
    let mu_e = mu_macro * mu_micro / (mu_micro - mu_macro);
    let ke = kma * kmi / (kmi - kma);
    Ok((mu_e, (ke - 2.0 * mu_e) / 3.0))
}

pub fn trace(s: &Mat3) -> f64 {
    s[0][0] + s[1][1] + s[2][2]
}

pub fn sym(a: &Mat3) -> Mat3 {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

pub fn skw(a: &Mat3) -> Mat3 {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] - a[j][i]);
        }
    }
    s
}

pub fn contract(a: &Mat3, b: &Mat3) -> f64 {
    (0..3).map(|i| (0..3).map(|j| a[i][j] * b[i][j]).sum::<f64>()).sum()
}

/// `λ tr(S) 1 + 2μ S`.
pub fn isotropic(lambda: f64, mu: f64, s: &Mat3) -> Mat3 {
    let t = trace(s);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = 2.0 * mu * s[i][j] + if i == j { lambda * t } else { 0.0 };
        }
    }
    out
}

/// Stress-like tensors of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorActions {
    /// `C_e S`
    pub elastic: Mat3,
    /// `C_micro S`
    pub micro: Mat3,
    /// `C_c A = 2 μ_c A`
    pub couple: Mat3,
}

/// Applies the meso, micro and couple tensors to a symmetric part `s` and
/// a skew part `a`.
pub fn apply_tensors(params: &MaterialParams, s: &Mat3, a: &Mat3) -> TensorActions {
    let mut couple = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            couple[i][j] = 2.0 * params.mu_c * a[i][j];
        }
    }
    TensorActions {
        elastic: isotropic(params.lambda_e, params.mu_e, s),
        micro: isotropic(params.lambda_micro, params.mu_micro, s),
        couple,
    }
}

/// Energy density of the relaxed micromorphic model without the curvature
/// term: `½⟨sym E, C_e sym E⟩ + ½⟨skw E, C_c skw E⟩ + ½⟨sym P, C_micro sym P⟩`
/// with `E = Du - P`.
pub fn local_energy_density(params: &MaterialParams, du: &Mat3, p: &Mat3) -> f64 {
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = du[i][j] - p[i][j];
        }
    }
    let se = sym(&e);
    let ae = skw(&e);
    let sp = sym(p);
    let t = apply_tensors(params, &se, &ae);
    let tm = isotropic(params.lambda_micro, params.mu_micro, &sp);
    0.5 * (contract(&se, &t.elastic) + contract(&ae, &t.couple) + contract(&sp, &tm))
}
