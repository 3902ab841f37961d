//! Dataset generation, pretraining and end-to-end training, image metrics,
//! the angular-subsampling sweep and scaling reports.

mod config;
mod dataset;
mod eval;
mod gradsuite;
mod metrics;
mod train;

pub use config::{DatasetConfig, ExperimentConfig, ScalingConfig, SweepConfig, TrainingConfig};
pub use dataset::{generate_dataset, generate_split, make_sample, sample_seed, Dataset, Sample, Split};
pub use eval::{
    evaluate, generalization_sweep, scaling_report, sweep_drop, time_training_step, timing_of, to_csv, SampleMetrics,
    ScalingReport, ScalingRow, SweepRow, TimingRow,
};
pub use gradsuite::grad_check_suite;
pub use metrics::{grayscale_histogram, mean_std, psnr, ssim, ssim_u8, Histogram, SSIM_WINDOW};
pub use train::{
    autoencode_loss_grad, evaluate_loss, pipeline_loss_grad, pretrain_autoencode, reconstruct, train_pipeline,
    EpochRecord, Operators, Pipeline,
};
