use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    /// Location of the offending field in the request body, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code, message: message.into(), path: None } }
    }

    pub fn bad_request(message: impl Into<String>, path: Option<String>) -> Self {
        let mut e = Self::new(StatusCode::BAD_REQUEST, "invalid_request", message);
        e.body.path = path;
        e
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id:?}"))
    }

    pub fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "solver_busy", "all solver workers are busy; retry later")
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "infeasible_configuration", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<dlpp_core::Error> for ApiError {
    fn from(e: dlpp_core::Error) -> Self {
        use dlpp_core::Error as E;
        match e {
            E::Validation { path, message } => Self::bad_request(message, Some(path)),
            E::Parse(_) | E::IncompatiblePair { .. } | E::DegenerateInstance(_) => Self::bad_request(e.to_string(), None),
            E::MissingReference
            | E::NoIncumbent { .. }
            | E::Infeasible { .. }
            | E::RestorationInfeasible(_)
            | E::SignatureMismatch(_)
            | E::DimensionMismatch { .. }
            | E::PreconditionViolated(_)
            | E::InfeasiblePlan(_) => Self::unprocessable(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}
