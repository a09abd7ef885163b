//! Stateless resumption tokens.
//!
//! A token is `base64url(json payload) "." base64url(HMAC-SHA256(payload))`.
//! The payload repeats the list arguments, the identifier of the last item
//! already sent (lists are ordered by identifier), the cursor, the store
//! sequence number the list is pinned to, the list size and an expiry.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Utc};
use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::Verb;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenState {
    pub verb: String,
    pub prefix: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    pub after: String,
    pub cursor: usize,
    pub snapshot: u64,
    pub size: usize,
    pub expires: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenError {
    Malformed,
    BadSignature,
    Expired,
    WrongVerb,
}

impl TokenState {
    pub fn expiry(&self) -> Option<DateTime<Utc>> {
        DateTime::from_timestamp(self.expires, 0)
    }
}

fn mac(secret: &[u8]) -> HmacSha256 {
    <HmacSha256 as KeyInit>::new_from_slice(secret).expect("HMAC accepts any key length")
}

pub fn encode(state: &TokenState, secret: &[u8]) -> String {
    let payload = serde_json::to_vec(state).expect("token state serializes");
    let mut m = mac(secret);
    m.update(&payload);
    let sig = m.finalize().into_bytes();
    format!("{}.{}", URL_SAFE_NO_PAD.encode(&payload), URL_SAFE_NO_PAD.encode(sig))
}

pub fn decode(token: &str, secret: &[u8], verb: Verb, now: DateTime<Utc>) -> Result<TokenState, TokenError> {
    let (payload, sig) = token.split_once('.').ok_or(TokenError::Malformed)?;
    let payload = URL_SAFE_NO_PAD.decode(payload).map_err(|_| TokenError::Malformed)?;
    let sig = URL_SAFE_NO_PAD.decode(sig).map_err(|_| TokenError::Malformed)?;
    let mut m = mac(secret);
    m.update(&payload);
    m.verify_slice(&sig).map_err(|_| TokenError::BadSignature)?;
    let state: TokenState = serde_json::from_slice(&payload).map_err(|_| TokenError::Malformed)?;
    if state.verb != verb.as_str() {
        return Err(TokenError::WrongVerb);
    }
    if now.timestamp() > state.expires {
        return Err(TokenError::Expired);
    }
    Ok(state)
}
