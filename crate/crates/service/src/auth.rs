use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::api::UserToken;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("unknown user or wrong secret")]
    BadCredentials,
    #[error("missing bearer token")]
    MissingToken,
    #[error("token is unknown or expired")]
    InvalidToken,
}

pub fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

struct Grant {
    user_id: String,
    expires: SystemTime,
}

/// Static user table plus the live token set.
pub struct Auth {
    users: BTreeMap<String, String>,
    ttl: Duration,
    tokens: Mutex<HashMap<String, Grant>>,
}

impl Auth {
    pub fn new(users: BTreeMap<String, String>, ttl: Duration) -> Self {
        Self {
            users,
            ttl,
            tokens: Mutex::new(HashMap::new()),
        }
    }

    pub fn login(&self, user_id: &str, secret: &str) -> Result<UserToken, AuthError> {
        match self.users.get(user_id) {
            Some(s) if s == secret => {}
            _ => return Err(AuthError::BadCredentials),
        }
        let now = SystemTime::now();
        let expires = now + self.ttl;
        let token = uuid::Uuid::new_v4().simple().to_string();
        let mut tokens = self.tokens.lock().expect("token table poisoned");
        tokens.retain(|_, g| g.expires > now);
        tokens.insert(
            token.clone(),
            Grant {
                user_id: user_id.to_string(),
                expires,
            },
        );
        Ok(UserToken {
            user_id: user_id.to_string(),
            token,
            expires_at: unix_seconds(expires),
        })
    }

    /// User id behind a live token. Expired tokens are dropped.
    pub fn verify(&self, token: &str) -> Result<String, AuthError> {
        let mut tokens = self.tokens.lock().expect("token table poisoned");
        match tokens.get(token) {
            Some(g) if g.expires > SystemTime::now() => Ok(g.user_id.clone()),
            Some(_) => {
                tokens.remove(token);
                Err(AuthError::InvalidToken)
            }
            None => Err(AuthError::InvalidToken),
        }
    }
}
