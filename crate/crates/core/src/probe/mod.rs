//! Linear readouts on frozen features and alpha/accuracy correlation.

mod correlation;
mod noise;
mod readout;

pub use correlation::{
    correlate_alpha_accuracy, AlphaAccuracy, CorrelationReport, CorrelationStats, SubsetCorrelation,
};
pub use noise::{inject_label_noise, NoisyLabels};
pub use readout::{train_linear_probe, LabeledFeatures, ProbeConfig, ProbeResult};
