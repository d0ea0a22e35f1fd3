use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::RngCore;
use textlab_core::classroom::{encode_token, UserId};

use crate::error::ApiError;

const WINDOW: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
struct Session {
    user_id: UserId,
    created_at: Instant,
    window_start: Instant,
    requests: u32,
}

/// Opaque bearer tokens mapped to users, held in memory.
#[derive(Debug)]
pub struct Sessions {
    ttl: Duration,
    request_cap: u32,
    inner: Mutex<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(ttl: Duration, request_cap: u32) -> Self {
        Sessions {
            ttl,
            request_cap,
            inner: Mutex::new(HashMap::new()),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Session>> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create(&self, user_id: UserId) -> String {
        let now = Instant::now();
        let mut map = self.lock();
        map.retain(|_, s| now.duration_since(s.created_at) < self.ttl);
        loop {
            let mut bytes = [0u8; 16];
            rand::rng().fill_bytes(&mut bytes);
            let token = encode_token(bytes);
            if !map.contains_key(&token) {
                map.insert(
                    token.clone(),
                    Session {
                        user_id,
                        created_at: now,
                        window_start: now,
                        requests: 0,
                    },
                );
                return token;
            }
        }
    }

    /// The user behind `token`, counting the request against the session cap.
    pub fn resolve(&self, token: &str) -> Result<UserId, ApiError> {
        let now = Instant::now();
        let mut map = self.lock();
        let session = map.get_mut(token).ok_or_else(ApiError::unauthenticated)?;
        if now.duration_since(session.created_at) >= self.ttl {
            map.remove(token);
            return Err(ApiError::session_expired());
        }
        if self.request_cap > 0 {
            if now.duration_since(session.window_start) >= WINDOW {
                session.window_start = now;
                session.requests = 0;
            }
            session.requests += 1;
            if session.requests > self.request_cap {
                return Err(ApiError::rate_limited());
            }
        }
        Ok(session.user_id)
    }

    pub fn revoke(&self, token: &str) {
        self.lock().remove(token);
    }
}
