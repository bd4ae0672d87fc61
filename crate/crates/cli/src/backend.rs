use std::sync::Arc;

use anyhow::{bail, Context};

use zsie_core::entailment::load_oracle;
use zsie_core::{Backends, EntailmentBackend, MockBackend, OracleTable, RuleTagger, RunConfig, Tagger};
use zsie_remote::{ClientConfig, HttpEntailmentBackend, HttpTagger};

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    /// In-process table; `None` answers every pair with the neutral default.
    Mock(Option<String>),
    Http(String),
}

impl BackendSpec {
    pub fn parse(s: &str) -> anyhow::Result<BackendSpec> {
        match s.split_once(':') {
            None if s == "mock" => Ok(BackendSpec::Mock(None)),
            Some(("mock", path)) if !path.is_empty() => Ok(BackendSpec::Mock(Some(path.to_string()))),
            Some(("http", rest)) if !rest.is_empty() => {
                // Accept both `http:host:port` and `http:http://host:port`.
                let url = if rest.starts_with("http://") || rest.starts_with("https://") {
                    rest.to_string()
                } else {
                    format!("http://{}", rest.trim_start_matches("//"))
                };
                Ok(BackendSpec::Http(url))
            }
            _ => bail!("invalid backend {s:?}; expected mock, mock:<oracle file> or http:<url>"),
        }
    }
}

fn client_config(config: &RunConfig) -> ClientConfig {
    ClientConfig {
        max_batch: config.max_batch,
        max_in_flight: config.max_in_flight,
        ..ClientConfig::default()
    }
}

/// Resolves backends from flags, falling back to the URLs in the run config
/// and finally to the mock and the rule tagger.
pub fn build(backend: Option<&str>, tagger: Option<&str>, config: &RunConfig) -> anyhow::Result<Backends> {
    let spec = match (backend, &config.entailment_url) {
        (Some(s), _) => BackendSpec::parse(s)?,
        (None, Some(url)) => BackendSpec::Http(url.clone()),
        (None, None) => BackendSpec::Mock(None),
    };
    let entailment: Arc<dyn EntailmentBackend> = match spec {
        BackendSpec::Mock(None) => Arc::new(MockBackend::new(OracleTable::new())),
        BackendSpec::Mock(Some(path)) => {
            let bytes = std::fs::read(&path).with_context(|| format!("reading oracle {path}"))?;
            Arc::new(MockBackend::new(load_oracle(&bytes).with_context(|| format!("loading oracle {path}"))?))
        }
        BackendSpec::Http(url) => Arc::new(HttpEntailmentBackend::new(&url, client_config(config))?),
    };
    let tagger: Arc<dyn Tagger> = match tagger.or(config.tagger_url.as_deref()) {
        Some(url) => Arc::new(HttpTagger::new(url, client_config(config))?),
        None => Arc::new(RuleTagger),
    };
    Ok(Backends::new(entailment, tagger))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(BackendSpec::parse("mock").unwrap(), BackendSpec::Mock(None));
        assert_eq!(BackendSpec::parse("mock:o.json").unwrap(), BackendSpec::Mock(Some("o.json".into())));
        assert_eq!(
            BackendSpec::parse("http://localhost:9000").unwrap(),
            BackendSpec::Http("http://localhost:9000".into())
        );
        assert_eq!(
            BackendSpec::parse("http:localhost:9000").unwrap(),
            BackendSpec::Http("http://localhost:9000".into())
        );
        for bad in ["", "mock:", "grpc:x", "http:", "mocks"] {
            assert!(BackendSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
