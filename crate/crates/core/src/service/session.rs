use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::pipeline::Turn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTurn {
    pub user: String,
    pub answer: String,
    pub trace_id: String,
}

#[derive(Debug)]
pub struct Session {
    pub session_id: String,
    history: Vec<SessionTurn>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    last_active: Instant,
}

impl Session {
    fn new(session_id: String) -> Self {
        Self {
            session_id,
            history: Vec::new(),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            last_active: Instant::now(),
        }
    }

    /// Append-only.
    pub fn push(&mut self, turn: SessionTurn) {
        self.history.push(turn);
        self.last_active = Instant::now();
    }

    pub fn history(&self) -> &[SessionTurn] {
        &self.history
    }

    pub fn turns(&self) -> Vec<Turn> {
        self.history
            .iter()
            .map(|t| Turn {
                user: t.user.clone(),
                answer: t.answer.clone(),
            })
            .collect()
    }
}

type Slot = Arc<tokio::sync::Mutex<Session>>;

struct Entry {
    session: Slot,
    touched: Instant,
}

/// Live sessions. Each sits behind its own async mutex so a session's chats
/// run one after another.
pub struct Sessions {
    idle_timeout: Duration,
    map: Mutex<HashMap<String, Entry>>,
}

impl Sessions {
    pub fn new(idle_timeout: Duration) -> Self {
        Self {
            idle_timeout,
            map: Mutex::new(HashMap::new()),
        }
    }

    fn expire(&self, map: &mut HashMap<String, Entry>) {
        let timeout = self.idle_timeout;
        map.retain(|_, e| e.touched.elapsed() < timeout);
    }

    pub fn create(&self) -> Slot {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let slot = Arc::new(tokio::sync::Mutex::new(Session::new(id.clone())));
        let mut map = self.map.lock();
        self.expire(&mut map);
        map.insert(
            id,
            Entry {
                session: slot.clone(),
                touched: Instant::now(),
            },
        );
        slot
    }

    /// The session, if it exists and has not been idle past the timeout.
    pub fn get(&self, id: &str) -> Option<Slot> {
        let mut map = self.map.lock();
        self.expire(&mut map);
        let entry = map.get_mut(id)?;
        entry.touched = Instant::now();
        Some(entry.session.clone())
    }

    pub fn len(&self) -> usize {
        let mut map = self.map.lock();
        self.expire(&mut map);
        map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_sessions_expire() {
        let sessions = Sessions::new(Duration::from_millis(20));
        let slot = sessions.create();
        let id = slot.try_lock().unwrap().session_id.clone();
        assert!(sessions.get(&id).is_some());
        std::thread::sleep(Duration::from_millis(40));
        assert!(sessions.get(&id).is_none());
        assert!(sessions.is_empty());
    }

    #[test]
    fn history_is_append_only() {
        let sessions = Sessions::new(Duration::from_secs(60));
        let slot = sessions.create();
        let mut s = slot.try_lock().unwrap();
        s.push(SessionTurn { user: "a".into(), answer: "b".into(), trace_id: "t1".into() });
        s.push(SessionTurn { user: "c".into(), answer: "d".into(), trace_id: "t2".into() });
        assert_eq!(s.turns().iter().map(|t| t.user.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(s.history()[1].trace_id, "t2");
    }
}
