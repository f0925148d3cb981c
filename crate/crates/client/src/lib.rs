//! Typed client for the sct HTTP service. One method per endpoint.

use std::time::Duration;

use reqwest::{Method, StatusCode};
use sct_core::api::{
    AblationRequest, AblationResponse, BankFile, BankSummary, CampaignRequest, CampaignResponse, ErrorBody, ErrorKind,
    Health, PerturbRequest, RecordRequest, ScoreRequest, SweepRequest, SweepResponse, TerminateRequest,
};
use sct_core::perturb::Correction;
use sct_core::quality::QualityReport;
use sct_core::termination::TermDecision;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{message}")]
    Api {
        status: StatusCode,
        kind: ErrorKind,
        message: String,
    },
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
}

impl ClientError {
    pub fn kind(&self) -> Option<ErrorKind> {
        match self {
            ClientError::Api { kind, .. } => Some(*kind),
            ClientError::Transport { .. } => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, for example `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(24 * 3600))
            .build()
            .expect("static client configuration");
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            http,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&B>) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let transport = |source| ClientError::Transport { url: url.clone(), source };
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        if status.is_success() {
            return resp.json().await.map_err(transport);
        }
        let text = resp.text().await.map_err(transport)?;
        let err = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => ClientError::Api {
                status,
                kind: b.kind,
                message: b.message,
            },
            Err(_) => ClientError::Api {
                status,
                kind: ErrorKind::Internal,
                message: format!("{status}: {text}"),
            },
        };
        Err(err)
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::GET, path, None).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn score(&self, req: &ScoreRequest) -> Result<QualityReport> {
        self.post("/v1/score", req).await
    }

    pub async fn perturb(&self, req: &PerturbRequest) -> Result<Correction> {
        self.post("/v1/perturb", req).await
    }

    pub async fn terminate(&self, req: &TerminateRequest) -> Result<TermDecision> {
        self.post("/v1/terminate", req).await
    }

    pub async fn record(&self, req: &RecordRequest) -> Result<BankSummary> {
        self.post("/v1/bank/record", req).await
    }

    pub async fn bank_summary(&self) -> Result<BankSummary> {
        self.get("/v1/bank").await
    }

    pub async fn bank_clear(&self) -> Result<BankSummary> {
        self.call::<(), _>(Method::DELETE, "/v1/bank", None).await
    }

    pub async fn bank_export(&self) -> Result<String> {
        Ok(self.get::<BankFile>("/v1/bank/export").await?.contents)
    }

    pub async fn bank_import(&self, contents: String) -> Result<BankSummary> {
        self.post("/v1/bank/import", &BankFile { contents }).await
    }

    /// Summarizes a store file without loading it into the service.
    pub async fn bank_inspect(&self, contents: String) -> Result<BankSummary> {
        self.post("/v1/bank/inspect", &BankFile { contents }).await
    }

    pub async fn campaign(&self, req: &CampaignRequest) -> Result<CampaignResponse> {
        self.post("/v1/campaigns", req).await
    }

    pub async fn ablation(&self, req: &AblationRequest) -> Result<AblationResponse> {
        self.post("/v1/ablations", req).await
    }

    pub async fn sweep(&self, req: &SweepRequest) -> Result<SweepResponse> {
        self.post("/v1/sweeps", req).await
    }
}
