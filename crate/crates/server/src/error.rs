use chartforge::attention::AttentionError;
use chartforge::chart::ChartError;
use chartforge::evaluation::EvalError;
use chartforge::genclient::GenError;
use chartforge::modification::ModificationError;
use chartforge::raster::RasterError;
use chartforge::semantics::SemanticsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unsupported export format `{0}`")]
    UnsupportedFormat(String),
    #[error("canvas has no visible raster layers")]
    NoLayers,
    #[error("invalid layer stack: {0}")]
    InvalidLayers(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Modification(#[from] ModificationError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("storage: {0}")]
    Storage(String),
}

/// Coarse classes for mapping errors onto HTTP statuses and CLI exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    NotFound,
    Invalid,
    Unprocessable,
    Upstream,
    UpstreamTimeout,
    Internal,
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::UnsupportedFormat(_) => "unsupported_format",
            ServiceError::NoLayers => "no_layers",
            ServiceError::InvalidLayers(_) => "invalid_layers",
            ServiceError::Chart(e) => match e {
                ChartError::MalformedInput { .. } => "malformed_input",
                ChartError::NoNumericColumn => "no_numeric_column",
                ChartError::EmptyTable => "empty_table",
                ChartError::ColumnMissing(_) => "column_missing",
                ChartError::ColumnNotNumeric(_) => "column_not_numeric",
                ChartError::NegativePieValue { .. } => "negative_pie_value",
                ChartError::NegativeSizeValue { .. } => "negative_size_value",
                ChartError::DegenerateData(_) => "degenerate_data",
                ChartError::InvalidSpec(_) => "invalid_spec",
                ChartError::IncompatibleVariant { .. } => "incompatible_variant",
                ChartError::InvalidParams(_) => "invalid_params",
                ChartError::IntegrityViolated { .. } => "integrity_violated",
            },
            ServiceError::Attention(e) => match e {
                AttentionError::EmptyMask => "empty_mask",
                AttentionError::ProviderUnavailable(_) => "provider_unavailable",
                _ => "attention_error",
            },
            ServiceError::Generation(e) | ServiceError::Modification(ModificationError::Backend(e)) => match e {
                GenError::BackendUnreachable { .. } => "backend_unreachable",
                GenError::BackendTimeout { .. } => "backend_timeout",
                GenError::MissingAttention { .. } => "missing_attention",
                GenError::InvalidRequest(_) => "invalid_request",
                GenError::Protocol(_) => "backend_protocol",
            },
            ServiceError::Modification(e) => match e {
                ModificationError::UnsupportedChartType(_) => "unsupported_chart_type",
                ModificationError::InvalidPlan(_) => "invalid_plan",
                ModificationError::InvalidStrength(_) => "invalid_strength",
                ModificationError::TooShort { .. } => "element_too_short",
                _ => "modification_error",
            },
            ServiceError::Evaluation(e) => match e {
                EvalError::EmptyForeground => "empty_foreground",
                EvalError::MarkNotFound { .. } => "mark_not_found",
                EvalError::NoEdgesFound => "no_edges_found",
                _ => "evaluation_error",
            },
            ServiceError::Semantics(_) => "semantics_error",
            ServiceError::Raster(_) => "raster_error",
            ServiceError::Storage(_) => "storage_error",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            ServiceError::NotFound { .. } => ErrorClass::NotFound,
            ServiceError::BadRequest(_)
            | ServiceError::UnsupportedFormat(_)
            | ServiceError::InvalidLayers(_)
            | ServiceError::Chart(ChartError::MalformedInput { .. }) => ErrorClass::Invalid,
            ServiceError::Generation(e) | ServiceError::Modification(ModificationError::Backend(e)) => match e {
                GenError::BackendTimeout { .. } => ErrorClass::UpstreamTimeout,
                GenError::InvalidRequest(_) => ErrorClass::Invalid,
                _ => ErrorClass::Upstream,
            },
            ServiceError::Attention(AttentionError::ProviderUnavailable(_))
            | ServiceError::Semantics(SemanticsError::ProviderUnavailable(_)) => ErrorClass::Upstream,
            ServiceError::Storage(_) | ServiceError::Raster(_) => ErrorClass::Internal,
            _ => ErrorClass::Unprocessable,
        }
    }
}
