//! Face-embedding identification, symmetric int8 quantization, image
//! normalization and the keyword-model parameter counter.

mod embedding;
mod image;
mod params;
mod quant;

use thiserror::Error;

pub use embedding::{
    identifier_predicate, identify, identify_sequential, l2_squared, l2_squared_slices, FaceEmbedding, Gallery,
    GalleryEntry, Identification, PredicateMode, EMBEDDING_DIM,
};
pub use image::{normalize_image, standardize};
pub use params::{
    conv_derivable, format_k, layer_param_count, model_param_table, reference_architecture, LayerKind, LayerSpec,
    ParamRow, ParamTable,
};
pub use quant::{
    dequantize, dequantize_tensor, dequantize_tensor_sequential, quantize, quantize_tensor,
    quantize_tensor_sequential, QuantParams,
};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("gallery: {0}")]
    Gallery(String),
    #[error("quantization scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("image has no pixels")]
    EmptyImage,
    #[error("layer {layer}: field {field} {problem}")]
    LayerField {
        layer: String,
        field: &'static str,
        problem: &'static str,
    },
}
