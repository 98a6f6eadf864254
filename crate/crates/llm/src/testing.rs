//! Scripted backends for deterministic tests and offline dry runs.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use async_trait::async_trait;

use crate::backend::{BackendError, Capabilities, ChatBackend, ChatRequest, ChatResponse};

type Handler = Box<dyn Fn(&ChatRequest) -> Result<ChatResponse, BackendError> + Send + Sync>;

/// A [`ChatBackend`] that answers from a script instead of a server.
pub struct ScriptedBackend {
    capabilities: Capabilities,
    handler: Handler,
    calls: AtomicU64,
    fail_first: AtomicU32,
}

impl ScriptedBackend {
    pub fn new(
        handler: impl Fn(&ChatRequest) -> Result<ChatResponse, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            capabilities: Capabilities {
                vision: true,
                reasoning: false,
            },
            handler: Box::new(handler),
            calls: AtomicU64::new(0),
            fail_first: AtomicU32::new(0),
        }
    }

    /// Always answers with the same content.
    pub fn canned(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        Self::new(move |_| Ok(ChatResponse::text(reply.clone())))
    }

    /// Answers with the reply of the first `(marker, reply)` pair whose
    /// marker occurs in the request text; `fallback` otherwise.
    pub fn keyed(script: Vec<(String, String)>, fallback: impl Into<String>) -> Self {
        let fallback = fallback.into();
        Self::new(move |request| {
            let text = request.text();
            for (marker, reply) in &script {
                if text.contains(marker.as_str()) {
                    return Ok(ChatResponse::text(reply.clone()));
                }
            }
            Ok(ChatResponse::text(fallback.clone()))
        })
    }

    /// Makes the next `failures` calls return a transient error.
    pub fn failing_first(self, failures: u32) -> Self {
        self.fail_first.store(failures, Ordering::SeqCst);
        self
    }

    pub fn with_capabilities(mut self, capabilities: Capabilities) -> Self {
        self.capabilities = capabilities;
        self
    }

    /// Number of `complete` calls seen so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let remaining = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if remaining {
            return Err(BackendError::Transient("scripted transient failure".into()));
        }
        (self.handler)(request)
    }
}
