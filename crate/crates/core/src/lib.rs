pub mod compose;
pub mod craftworld;
pub mod datagen;
pub mod eval;
pub mod expert;
pub mod fingerprint;
pub mod nn;
pub mod num;
pub mod train;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Model32 = compose::CaseModel<f32>;
pub type Model64 = compose::CaseModel<f64>;
pub type Checkpoint32 = nn::Checkpoint<f32>;
pub type Checkpoint64 = nn::Checkpoint<f64>;
pub type Dataset32 = train::Dataset<f32>;
pub type Dataset64 = train::Dataset<f64>;
