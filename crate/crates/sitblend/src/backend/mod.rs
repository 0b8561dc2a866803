//! Diffusion backend: wire types, HTTP client, deterministic mock and a
//! mock HTTP server.

mod client;
mod mock;
mod queue;
mod request;
mod server;

pub use client::{submit_generation, BackendClient, ClientConfig, ClientError};
pub use mock::{mix_strength, mock_generate, mock_image, seed_tints, MOCK_BACKEND_INFO};
pub use queue::{global_queue, GenerationQueue, QueuePermit};
pub use request::{
    build_generation_request, ControlUnit, GenerationParams, GenerationRequest, GenerationResult,
    JobStatus, RequestError, SubmitResponse, UnitKind, ADDITIVE_DENOISING, BLENDING_DENOISING,
};
pub use server::{MockServer, MockServerOptions};

/// Anything that can turn a request into a terminal result.
pub trait Generator: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, ClientError>;
    fn describe(&self) -> String;
}

/// Calls [`mock_generate`] in-process, without HTTP.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockGenerator;

impl Generator for MockGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, ClientError> {
        request.validate()?;
        Ok(mock_generate(request))
    }

    fn describe(&self) -> String {
        MOCK_BACKEND_INFO.to_string()
    }
}

impl Generator for BackendClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, ClientError> {
        BackendClient::generate(self, request)
    }

    fn describe(&self) -> String {
        format!("http {}", self.config().endpoint)
    }
}
