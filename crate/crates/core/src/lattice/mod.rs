//! Integer toral automorphisms: exact characteristic polynomials, certified
//! real spectra, eigenvector frames and the normalized shear chart.

mod automorphism;
mod frames;
mod normalize;
pub mod poly;

pub use automorphism::{certify_spectrum, RootInterval, Spectrum, ToralAutomorphism};
pub use frames::{eigenvector, frame, invariant_frames, line_angle, residual, Role, SubspaceFrame};
pub use normalize::{normalize_basis, NormalizedBasis, ENTRY_BOUND, MAX_STATES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("matrix must be 3x3 or 4x4 (got dim {dim} with {len} entries)")]
    BadShape { dim: usize, len: usize },
    #[error("determinant is {0}, not ±1")]
    NotUnimodular(i128),
    #[error("an eigenvalue lies on the unit circle; the map is not hyperbolic")]
    EigenvalueOnUnitCircle,
    #[error("complex eigenvalues are not supported")]
    ComplexSpectrumUnsupported,
    #[error("repeated eigenvalues are not supported")]
    NonSimpleSpectrum,
    #[error("eigenvector residual {residual:e} too large for eigenvalue {lambda}")]
    EigenvectorResidual { lambda: f64, residual: f64 },
    #[error("no 2-dimensional stable plane to normalize")]
    NoStablePlane,
    #[error("basis normalization failed after {visited} candidates; closest miss: {condition}")]
    NormalizationFailed {
        condition: &'static str,
        visited: usize,
    },
}

/// Everything derived once from a matrix: spectrum, frames and, when the
/// matrix has a 2-dimensional shear plane, its normalized chart.
#[derive(Clone, Debug)]
pub struct LinearData {
    pub matrix: ToralAutomorphism,
    pub spectrum: Spectrum,
    pub frames: Vec<SubspaceFrame>,
    pub chart: Option<NormalizedBasis>,
}

impl LinearData {
    pub fn new(matrix: ToralAutomorphism) -> Result<Self, LatticeError> {
        let spectrum = certify_spectrum(&matrix)?;
        let frames = invariant_frames(&matrix, &spectrum)?;
        let chart = if frame(&frames, Role::StablePlane).is_some() {
            Some(normalize_basis(&matrix, &frames)?)
        } else {
            None
        };
        Ok(LinearData {
            matrix,
            spectrum,
            frames,
            chart,
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.values()
    }

    /// Eigenvectors in spectrum order.
    pub fn eigenvectors(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .take(self.matrix.dim())
            .map(|f| f.basis[0].clone())
            .collect()
    }

    pub fn role(&self, r: Role) -> Option<&SubspaceFrame> {
        frame(&self.frames, r)
    }

    pub fn chart(&self) -> &NormalizedBasis {
        self.chart.as_ref().expect("matrix has no shear plane")
    }
}
