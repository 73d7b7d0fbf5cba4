//! Versioned JSON model files.
//!
//! A document stores the correlation matrix and the normalized standard deviations rather than
//! the raw training rows. The rows are kept as an optional field so that a saved model reloads
//! with bitwise-identical predictions; without them they are rebuilt by Cholesky factorization.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{Activation, Invariant, TermSpec, LIBRARY, N_TERMS};
use crate::error::{Error, Result};
use crate::stress::{
    identity_matrix, prob_negative_weight, CovarianceMode, CovarianceParam, GaussianModel, Matrix,
};

pub const SCHEMA_VERSION: &str = "gcann-model/1";

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub name: String,
    pub w_mu: f64,
    pub w_star: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub mode: CovarianceMode,
    pub d: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chol_rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_nll: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_nll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: String,
    pub terms: Vec<TermEntry>,
    pub covariance: CovarianceEntry,
    #[serde(default)]
    pub provenance: Provenance,
}

/// SHA-256 of a data file's bytes, hex encoded.
pub fn data_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn matrix_to_vec(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn vec_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    if rows.len() != N_TERMS || rows.iter().any(|r| r.len() != N_TERMS) {
        return Err(Error::Document(format!("{what} must be {N_TERMS}×{N_TERMS}")));
    }
    let mut m = [[0.0; N_TERMS]; N_TERMS];
    for (dst, src) in m.iter_mut().zip(rows) {
        dst.copy_from_slice(src);
    }
    Ok(m)
}

/// Lower Cholesky factor of a correlation matrix. Matrices that are not numerically positive
/// definite get an escalating diagonal jitter; rows are renormalized afterwards so the implied
/// correlation keeps a unit diagonal.
pub fn correlation_cholesky(r: &Matrix) -> Result<Matrix> {
    let base = DMatrix::from_fn(N_TERMS, N_TERMS, |i, j| r[i][j]);
    let mut jitter = 0.0;
    loop {
        let m = &base + DMatrix::identity(N_TERMS, N_TERMS) * jitter;
        if let Some(ch) = m.cholesky() {
            let l = ch.l();
            let mut out = [[0.0; N_TERMS]; N_TERMS];
            for i in 0..N_TERMS {
                let norm = (0..=i).map(|j| l[(i, j)] * l[(i, j)]).sum::<f64>().sqrt();
                for j in 0..=i {
                    out[i][j] = l[(i, j)] / norm;
                }
            }
            if jitter > 0.0 {
                log::warn!("correlation matrix needed diagonal jitter {jitter:e} to factor");
            }
            return Ok(out);
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX {
            return Err(Error::Document(
                "correlation matrix is not positive semidefinite".into(),
            ));
        }
    }
}

impl ModelDocument {
    pub fn from_model(model: &GaussianModel, provenance: Provenance) -> Self {
        let cov = &model.covariance;
        let terms = LIBRARY
            .iter()
            .enumerate()
            .map(|(i, spec)| TermEntry {
                name: spec.name().to_string(),
                w_mu: model.w_mu[i],
                w_star: model.w_star[i],
                active: model.w_mu[i] > 0.0,
            })
            .collect();
        let chol_rows =
            (cov.mode == CovarianceMode::CorrelatedFull).then(|| matrix_to_vec(&cov.chol_rows));
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            terms,
            covariance: CovarianceEntry {
                mode: cov.mode,
                d: cov.d.to_vec(),
                correlation: matrix_to_vec(&cov.correlation()),
                chol_rows,
            },
            provenance,
        }
    }

    pub fn to_model(&self) -> Result<GaussianModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Document(format!(
                "unsupported schema version `{}` (expected `{SCHEMA_VERSION}`)",
                self.schema_version
            )));
        }
        if self.terms.len() != N_TERMS {
            return Err(Error::Document(format!(
                "expected {N_TERMS} terms, found {}",
                self.terms.len()
            )));
        }
        let mut w_mu = [0.0; N_TERMS];
        let mut w_star = [0.0; N_TERMS];
        for (i, t) in self.terms.iter().enumerate() {
            if t.name != LIBRARY[i].name() {
                return Err(Error::Document(format!(
                    "term {} is `{}`, expected `{}`",
                    i + 1,
                    t.name,
                    LIBRARY[i].name()
                )));
            }
            w_mu[i] = t.w_mu;
            w_star[i] = t.w_star;
        }
        let c = &self.covariance;
        let d: [f64; N_TERMS] = c
            .d
            .as_slice()
            .try_into()
            .map_err(|_| Error::Document(format!("d must have {N_TERMS} entries")))?;
        let r = vec_to_matrix(&c.correlation, "correlation")?;
        check_correlation(&r)?;
        let covariance = match c.mode {
            CovarianceMode::Deterministic => CovarianceParam::deterministic(),
            CovarianceMode::IndependentDiag => CovarianceParam::independent(d),
            CovarianceMode::CorrelatedFull => {
                let rows = match &c.chol_rows {
                    Some(rows) => vec_to_matrix(rows, "chol_rows")?,
                    None => correlation_cholesky(&r)?,
                };
                CovarianceParam::correlated(d, rows)
            }
        };
        let model = GaussianModel {
            w_mu,
            w_star,
            covariance,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Document(format!("cannot read model file {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }
}

fn check_correlation(r: &Matrix) -> Result<()> {
    for i in 0..N_TERMS {
        if (r[i][i] - 1.0).abs() > 1e-9 {
            return Err(Error::Document(format!("correlation diagonal entry {i} is not 1")));
        }
        for j in 0..N_TERMS {
            let v = r[i][j];
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Document(format!("correlation entry ({i},{j}) = {v}")));
            }
            if (v - r[j][i]).abs() > 1e-12 {
                return Err(Error::Document(format!("correlation not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Conventional name and amplitude factor for a term: identity terms are written `½μ(·)` and
/// exponential ones `½a(·)/b`; the symmetrized `I4s` terms already carry the ½ per fiber family.
fn amplitude(spec: &TermSpec) -> (&'static str, f64) {
    let symbol = if spec.activation == Activation::Identity {
        "mu"
    } else {
        "a"
    };
    let factor = if spec.invariant == Invariant::I4s {
        1.0
    } else {
        2.0
    };
    (symbol, factor)
}

/// Plain-text summary listing every active term with its canonical name and its conventional
/// parameters, followed by the correlation block of the active terms.
pub fn summary(model: &GaussianModel) -> String {
    let mut out = String::new();
    let active: Vec<usize> = (0..N_TERMS).filter(|&i| model.w_mu[i] > 0.0).collect();
    let _ = writeln!(
        out,
        "covariance: {}, {} active term(s)",
        model.mode().tag(),
        active.len()
    );
    let mut labels = Vec::new();
    let mut counter = [0usize; 2];
    for &i in &active {
        let spec = &LIBRARY[i];
        let (symbol, factor) = amplitude(spec);
        let n = &mut counter[usize::from(symbol == "a")];
        *n += 1;
        let label = format!("{symbol}{n}");
        let mean = factor * model.w_mu[i];
        let sd = mean * if model.mode() == CovarianceMode::Deterministic {
            0.0
        } else {
            model.covariance.d[i]
        };
        let _ = write!(
            out,
            "  {:<11} {label} ~ N({mean:.4} kPa, ({sd:.4} kPa)^2)",
            spec.name()
        );
        if spec.has_internal_weight() {
            let _ = write!(out, ", b{} = {:.4}", &label[1..], model.w_star[i]);
        }
        if model.mode() != CovarianceMode::Deterministic {
            let _ = write!(out, ", p(w<0) = {:.2e}", prob_negative_weight(model, i));
        }
        out.push('\n');
        labels.push(label);
    }
    if model.mode() == CovarianceMode::CorrelatedFull && active.len() > 1 {
        let r = model.covariance.correlation();
        let _ = writeln!(out, "correlation [{}]:", labels.join(", "));
        for &i in &active {
            let row: Vec<String> = active.iter().map(|&j| format!("{:+.2}", r[i][j])).collect();
            let _ = writeln!(out, "  {}", row.join(" "));
        }
    }
    out
}

/// A model with the published correlated parameters: `μ1` on `I2_sq`, `(a1, b1)` on
/// `I4w_sq_exp`, `(a2, b2)` on `I4s_sq_exp` and `(a3, b3)` on `I4s_linexp`. A unit relative
/// standard deviation sits outside the trainable range and is stored as `0.999`.
pub fn published_correlated_model() -> Result<GaussianModel> {
    let idx = |name| {
        LIBRARY
            .iter()
            .position(|s| s.name() == name)
            .expect("library term")
    };
    let (i_mu, i_a1, i_a2, i_a3) = (
        idx("I2_sq"),
        idx("I4w_sq_exp"),
        idx("I4s_sq_exp"),
        idx("I4s_linexp"),
    );
    let mut w_mu = [0.0; N_TERMS];
    let mut w_star = [1.0; N_TERMS];
    let mut d = [0.0; N_TERMS];
    w_mu[i_mu] = 777.0 / 2.0;
    d[i_mu] = 0.999;
    w_mu[i_a1] = 38.0 / 2.0;
    w_star[i_a1] = 49.0;
    d[i_a1] = 0.999;
    w_mu[i_a2] = 19.0;
    w_star[i_a2] = 33.0;
    d[i_a2] = 0.999;
    w_mu[i_a3] = 26278.0;
    w_star[i_a3] = 0.0083;
    d[i_a3] = 12783.0 / 26278.0;

    let order = [i_mu, i_a1, i_a2, i_a3];
    let published = [
        [1.00, -0.23, -0.10, -0.50],
        [-0.23, 1.00, 0.05, 0.32],
        [-0.10, 0.05, 1.00, -0.78],
        [-0.50, 0.32, -0.78, 1.00],
    ];
    let mut r = identity_matrix();
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            r[i][j] = published[a][b];
        }
    }
    let rows = correlation_cholesky(&r)?;
    Ok(GaussianModel {
        w_mu,
        w_star,
        covariance: CovarianceParam::correlated(d, rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{DeformationState, Orientation};
    use crate::stress::predict;

    fn sample_model() -> GaussianModel {
        let mut rows = identity_matrix();
        rows[3][1] = 0.37;
        rows[3][3] = 0.2;
        rows[9][3] = -1.1;
        let mut w_mu = [0.0; N_TERMS];
        w_mu[1] = 3.25;
        w_mu[3] = 0.1 + 0.2;
        w_mu[9] = 17.0 / 3.0;
        GaussianModel {
            w_mu,
            w_star: [0.7; N_TERMS],
            covariance: CovarianceParam::correlated([0.3; N_TERMS], rows),
        }
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let m = sample_model();
        let doc = ModelDocument::from_model(&m, Provenance::default());
        let back = ModelDocument::from_json(&doc.to_json().unwrap())
            .unwrap()
            .to_model()
            .unwrap();
        assert_eq!(back, m);
        let s = DeformationState::new(1.13, 1.07, Orientation::Offset45).unwrap();
        assert_eq!(predict(&back, &s).unwrap(), predict(&m, &s).unwrap());
    }

    #[test]
    fn rows_rebuilt_from_correlation() {
        let m = sample_model();
        let mut doc = ModelDocument::from_model(&m, Provenance::default());
        doc.covariance.chol_rows = None;
        let back = doc.to_model().unwrap();
        let (a, b) = (m.covariance.correlation(), back.covariance.correlation());
        for i in 0..N_TERMS {
            for j in 0..N_TERMS {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_documents_rejected() {
        let doc = ModelDocument::from_model(&sample_model(), Provenance::default());
        let mut bad = doc.clone();
        bad.schema_version = "other".into();
        assert!(bad.to_model().is_err());
        let mut bad = doc.clone();
        bad.terms.swap(0, 1);
        assert!(bad.to_model().is_err());
        let mut bad = doc.clone();
        bad.covariance.correlation[0][1] = 0.5;
        assert!(bad.to_model().is_err());
        let mut bad = doc;
        bad.covariance.d[2] = 1.0;
        assert!(bad.to_model().is_err());
    }

    #[test]
    fn published_model_factors_and_summarizes() {
        let m = published_correlated_model().unwrap();
        let r = m.covariance.correlation();
        assert!((r[13][11] + 0.78).abs() < 1e-2);
        assert!((r[6][10] + 0.23).abs() < 1e-2);
        let text = summary(&m);
        assert!(text.contains("4 active term(s)"), "{text}");
        assert!(text.contains("mu1 ~ N(777.0000 kPa"), "{text}");
        assert!(text.contains("b1 = 49.0000"), "{text}");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            data_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
