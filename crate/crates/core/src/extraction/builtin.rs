//! Deterministic stand-in extractors. They derive features from raw bytes so
//! the engine can be exercised without real models.

use std::sync::Arc;
use std::time::Duration;

use super::{ExtractionError, ExtractionService, Extractor, ExtractorSpec, ModelSerial, SemanticKind, SemanticValue, SubKey};

fn spec(sub: &SubKey, serial: u32, kind: SemanticKind) -> ExtractorSpec {
    ExtractorSpec { sub_key: sub.clone(), serial: ModelSerial(serial), kind }
}

/// First `dim` bytes divided by 255. Fails on shorter payloads.
#[derive(Debug, Clone)]
pub struct FirstBytesVector {
    sub: SubKey,
    serial: u32,
    dim: usize,
}

impl FirstBytesVector {
    pub fn new(sub: &str, serial: u32, dim: usize) -> Self {
        FirstBytesVector { sub: SubKey::new(sub), serial, dim }
    }
}

impl Extractor for FirstBytesVector {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Vector(self.dim))
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        if bytes.len() < self.dim {
            return Err(format!("need {} bytes, got {}", self.dim, bytes.len()));
        }
        Ok(SemanticValue::Vector(bytes[..self.dim].iter().map(|b| *b as f32 / 255.0).collect()))
    }
}

/// Splits the payload into `dim` equal segments and averages each, scaled to [0, 1].
#[derive(Debug, Clone)]
pub struct ByteMeanVector {
    sub: SubKey,
    serial: u32,
    dim: usize,
}

impl ByteMeanVector {
    pub fn new(sub: &str, serial: u32, dim: usize) -> Self {
        ByteMeanVector { sub: SubKey::new(sub), serial, dim }
    }
}

impl Extractor for ByteMeanVector {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Vector(self.dim))
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        let mut out = vec![0f32; self.dim];
        if bytes.is_empty() {
            return Ok(SemanticValue::Vector(out));
        }
        for (i, slot) in out.iter_mut().enumerate() {
            let lo = i * bytes.len() / self.dim;
            let hi = ((i + 1) * bytes.len() / self.dim).max(lo + 1).min(bytes.len());
            let seg = &bytes[lo.min(bytes.len() - 1)..hi];
            *slot = seg.iter().map(|b| *b as f32).sum::<f32>() / (seg.len() as f32 * 255.0);
        }
        Ok(SemanticValue::Vector(out))
    }
}

/// Payload length in bytes.
#[derive(Debug, Clone)]
pub struct ByteLength {
    sub: SubKey,
    serial: u32,
}

impl ByteLength {
    pub fn new(sub: &str, serial: u32) -> Self {
        ByteLength { sub: SubKey::new(sub), serial }
    }
}

impl Extractor for ByteLength {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Number)
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        Ok(SemanticValue::Number(bytes.len() as f64))
    }
}

/// The payload decoded as lossy UTF-8.
#[derive(Debug, Clone)]
pub struct Utf8Text {
    sub: SubKey,
    serial: u32,
}

impl Utf8Text {
    pub fn new(sub: &str, serial: u32) -> Self {
        Utf8Text { sub: SubKey::new(sub), serial }
    }
}

impl Extractor for Utf8Text {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Text)
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        Ok(SemanticValue::Text(String::from_utf8_lossy(bytes).into_owned()))
    }
}

/// First alphanumeric token of the payload, lowercased.
#[derive(Debug, Clone)]
pub struct FirstToken {
    sub: SubKey,
    serial: u32,
}

impl FirstToken {
    pub fn new(sub: &str, serial: u32) -> Self {
        FirstToken { sub: SubKey::new(sub), serial }
    }
}

impl Extractor for FirstToken {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Categorical)
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        let text = String::from_utf8_lossy(bytes);
        let token = super::tokenize(&text).find(|t| t.chars().all(char::is_alphabetic));
        token.map(SemanticValue::Categorical).ok_or_else(|| "no token in payload".to_string())
    }
}

/// First run of decimal digits in the payload.
#[derive(Debug, Clone)]
pub struct FirstNumber {
    sub: SubKey,
    serial: u32,
}

impl FirstNumber {
    pub fn new(sub: &str, serial: u32) -> Self {
        FirstNumber { sub: SubKey::new(sub), serial }
    }
}

impl Extractor for FirstNumber {
    fn spec(&self) -> ExtractorSpec {
        spec(&self.sub, self.serial, SemanticKind::Number)
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        let digits: String = bytes
            .iter()
            .skip_while(|b| !b.is_ascii_digit())
            .take_while(|b| b.is_ascii_digit())
            .map(|b| *b as char)
            .collect();
        digits.parse::<f64>().map(SemanticValue::Number).map_err(|_| "no number in payload".to_string())
    }
}

/// Wraps an extractor with a fixed artificial latency.
pub struct Delayed {
    inner: Arc<dyn Extractor>,
    delay: Duration,
}

impl Delayed {
    pub fn new(inner: Arc<dyn Extractor>, delay: Duration) -> Self {
        Delayed { inner, delay }
    }
}

impl Extractor for Delayed {
    fn spec(&self) -> ExtractorSpec {
        self.inner.spec()
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        std::thread::sleep(self.delay);
        self.inner.extract(bytes)
    }
}

/// Registers `face` (16-dim byte means), `animal` (first word), `jerseyNumber`
/// (first number), `content` (text) and `size` (byte length), all at serial 1.
pub fn register_defaults(svc: &ExtractionService) -> Result<(), ExtractionError> {
    svc.register_extractor(Arc::new(ByteMeanVector::new("face", 1, 16)))?;
    svc.register_extractor(Arc::new(FirstToken::new("animal", 1)))?;
    svc.register_extractor(Arc::new(FirstNumber::new("jerseyNumber", 1)))?;
    svc.register_extractor(Arc::new(Utf8Text::new("content", 1)))?;
    svc.register_extractor(Arc::new(ByteLength::new("size", 1)))?;
    Ok(())
}
