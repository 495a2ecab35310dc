//! Missing-data simulation, observational masks, time deltas and imputation.

mod impute;
mod mask;
mod missing;

pub use impute::{impute, CustomImpute, FillValues, ImputeMethod};
pub use mask::{observational_mask, time_delta};
pub use missing::{simulate_missing, MissingSpec};
