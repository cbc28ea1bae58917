pub mod aggregation;
pub mod evaluation;
pub mod formulations;
pub mod milp;
pub mod pipeline;
pub mod scalar;
pub mod system;
pub mod timeseries;

pub use scalar::Scalar;

pub type HorizonData = timeseries::TimeHorizonData<f64>;
pub type Features = timeseries::NormalizedFeatures<f64>;
pub type StateClustering = aggregation::StateClustering<f64>;
