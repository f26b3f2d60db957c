//! Linear degradation operators and their singular systems.

mod degradation;
mod svd;

pub use degradation::{
    block_average_matrix, convolution_matrix, gaussian_taps, kernel_taps, reflect_index, BlurKernel, DegradationKind,
    DegradationSpec, DEFAULT_SV_THRESHOLD,
};
pub use svd::{
    build_operator, dense_operator, whiten_operator, BackendKind, SpectralMeasurement, SvdOperator, DENSE_DIM_CAP,
};
