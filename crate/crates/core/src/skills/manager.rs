use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::descriptor::{Entities, EntityKind, SkillDescriptor};
use super::registry::SkillRegistry;
use crate::flowcore::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManagerConfig {
    pub confidence_floor: f64,
    pub reprompt_limit: u32,
    pub followup_timeout_us: u64,
    /// A followup naming another known skill aborts the session and is handled afresh.
    pub barge_in: bool,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        Self {
            confidence_floor: 0.5,
            reprompt_limit: 2,
            followup_timeout_us: 10_000_000,
            barge_in: true,
        }
    }
}

/// Output of the semantic interpreter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub skill_id: String,
    #[serde(default)]
    pub entities: Entities,
    pub confidence: f64,
    #[serde(default)]
    pub timestamp: Timestamp,
}

impl Interpretation {
    pub fn new(skill_id: impl Into<String>, entities: Entities, confidence: f64) -> Self {
        Self {
            skill_id: skill_id.into(),
            entities,
            confidence,
            timestamp: Timestamp::ZERO,
        }
    }

    pub fn at(mut self, t: Timestamp) -> Self {
        self.timestamp = t;
        self
    }
}

pub type SessionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Filling,
    Ready,
    Executing,
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSession {
    pub session_id: SessionId,
    pub descriptor: SkillDescriptor,
    pub filled: Entities,
    /// Still-needed required entities, in declaration order.
    pub missing: Vec<String>,
    pub reprompts_used: u32,
    pub state: SessionState,
    pub last_activity: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    UnknownSkill { skill_id: String },
    LowConfidence { confidence: f64, floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    Timeout,
    RepromptLimit,
    BargeIn { skill_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Execute {
        session: Option<SessionId>,
        skill_id: String,
        entities: Entities,
    },
    Prompt {
        session: SessionId,
        entity: String,
        text: String,
    },
    Reject {
        #[serde(flatten)]
        reason: RejectReason,
    },
    /// The session ended without executing; `notice` is for the user.
    Abort {
        session: SessionId,
        #[serde(flatten)]
        reason: AbortReason,
        notice: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Followup {
    Interpretation(Interpretation),
    Timeout(Timestamp),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    Unknown(SessionId),
    #[error("session {session} is {state:?}, not filling")]
    Closed { session: SessionId, state: SessionState },
}

fn prompt_text(skill: &SkillDescriptor, entity: &str) -> String {
    let what = match skill.entity(entity).map(|e| e.kind) {
        Some(EntityKind::PersonName) => "Who".to_string(),
        Some(EntityKind::ObjectLabel) => "Which object".to_string(),
        Some(EntityKind::Duration) => "How long".to_string(),
        _ => format!("What {}", entity.replace('_', " ")),
    };
    format!("{what}? ({} needs {entity})", skill.id)
}

/// Turns interpretations into actions, prompting for missing entities.
pub struct SkillManager {
    registry: Arc<SkillRegistry>,
    config: ManagerConfig,
    sessions: BTreeMap<SessionId, SkillSession>,
    next_id: SessionId,
}

impl SkillManager {
    pub fn new(registry: Arc<SkillRegistry>, config: ManagerConfig) -> Self {
        Self {
            registry,
            config,
            sessions: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.config
    }

    pub fn registry(&self) -> &Arc<SkillRegistry> {
        &self.registry
    }

    pub fn session(&self, id: SessionId) -> Option<&SkillSession> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SkillSession> {
        self.sessions.values()
    }

    /// The most recently opened session still collecting entities.
    pub fn active_session(&self) -> Option<SessionId> {
        self.sessions
            .values()
            .rev()
            .find(|s| s.state == SessionState::Filling)
            .map(|s| s.session_id)
    }

    fn accept(descriptor: &SkillDescriptor, entities: &Entities, into: &mut Entities) -> usize {
        let mut n = 0;
        for (name, value) in entities {
            if let Some(spec) = descriptor.entity(name) {
                if value.fits(spec.kind) && !into.contains_key(name) {
                    into.insert(name.clone(), value.clone());
                    n += 1;
                }
            }
        }
        n
    }

    /// Top-level handling of a fresh interpretation.
    pub fn handle(&mut self, interp: &Interpretation) -> Action {
        let Some(descriptor) = self.registry.descriptor(&interp.skill_id) else {
            return Action::Reject {
                reason: RejectReason::UnknownSkill {
                    skill_id: interp.skill_id.clone(),
                },
            };
        };
        // NaN fails this comparison too
        if !(interp.confidence >= self.config.confidence_floor && interp.confidence <= 1.0) {
            return Action::Reject {
                reason: RejectReason::LowConfidence {
                    confidence: interp.confidence,
                    floor: self.config.confidence_floor,
                },
            };
        }
        let mut filled = Entities::new();
        Self::accept(descriptor, &interp.entities, &mut filled);
        let missing = descriptor.missing(&filled);
        if missing.is_empty() {
            return Action::Execute {
                session: None,
                skill_id: interp.skill_id.clone(),
                entities: filled,
            };
        }
        let id = self.next_id;
        self.next_id += 1;
        let text = prompt_text(descriptor, &missing[0]);
        let entity = missing[0].clone();
        self.sessions.insert(
            id,
            SkillSession {
                session_id: id,
                descriptor: descriptor.clone(),
                filled,
                missing,
                reprompts_used: 0,
                state: SessionState::Filling,
                last_activity: interp.timestamp,
            },
        );
        Action::Prompt {
            session: id,
            entity,
            text,
        }
    }

    /// Routes to the active session if there is one, otherwise handles afresh.
    pub fn submit(&mut self, interp: &Interpretation) -> Vec<Action> {
        match self.active_session() {
            Some(id) => self
                .followup(id, Followup::Interpretation(interp.clone()))
                .expect("active session is filling"),
            None => vec![self.handle(interp)],
        }
    }

    pub fn followup(&mut self, id: SessionId, input: Followup) -> Result<Vec<Action>, SessionError> {
        let session = self.sessions.get_mut(&id).ok_or(SessionError::Unknown(id))?;
        if session.state != SessionState::Filling {
            return Err(SessionError::Closed {
                session: id,
                state: session.state,
            });
        }
        let (now, progressed, timed_out) = match &input {
            Followup::Timeout(at) => (*at, false, true),
            Followup::Interpretation(interp) => {
                let other = !interp.skill_id.is_empty() && interp.skill_id != session.descriptor.id;
                if other && self.config.barge_in && self.registry.contains(&interp.skill_id) {
                    session.state = SessionState::Aborted;
                    session.last_activity = interp.timestamp;
                    let abort = Action::Abort {
                        session: id,
                        reason: AbortReason::BargeIn {
                            skill_id: interp.skill_id.clone(),
                        },
                        notice: format!("Cancelled {}.", session.descriptor.id),
                    };
                    let next = self.handle(interp);
                    return Ok(vec![abort, next]);
                }
                let confident = interp.confidence >= self.config.confidence_floor && interp.confidence <= 1.0;
                let n = if confident && !other {
                    let wanted: Entities = interp
                        .entities
                        .iter()
                        .filter(|(k, _)| session.missing.contains(k))
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect();
                    Self::accept(&session.descriptor, &wanted, &mut session.filled)
                } else {
                    0
                };
                (interp.timestamp, n > 0, false)
            }
        };
        session.last_activity = now;

        if progressed {
            let filled = &session.filled;
            session.missing.retain(|m| !filled.contains_key(m));
            if session.missing.is_empty() {
                session.state = SessionState::Done;
                return Ok(vec![Action::Execute {
                    session: Some(id),
                    skill_id: session.descriptor.id.clone(),
                    entities: session.filled.clone(),
                }]);
            }
        } else if session.reprompts_used >= self.config.reprompt_limit {
            session.state = SessionState::Aborted;
            return Ok(vec![Action::Abort {
                session: id,
                reason: if timed_out {
                    AbortReason::Timeout
                } else {
                    AbortReason::RepromptLimit
                },
                notice: format!("Sorry, I could not complete {}.", session.descriptor.id),
            }]);
        } else {
            session.reprompts_used += 1;
        }
        let entity = session.missing[0].clone();
        Ok(vec![Action::Prompt {
            session: id,
            text: prompt_text(&session.descriptor, &entity),
            entity,
        }])
    }

    /// Applies a timeout to every filling session idle for the configured time.
    pub fn expire(&mut self, now: Timestamp) -> Vec<Action> {
        let due: Vec<SessionId> = self
            .sessions
            .values()
            .filter(|s| {
                s.state == SessionState::Filling
                    && now.micros_since(s.last_activity) >= self.config.followup_timeout_us
            })
            .map(|s| s.session_id)
            .collect();
        due.into_iter()
            .flat_map(|id| self.followup(id, Followup::Timeout(now)).expect("filling"))
            .collect()
    }

    /// Earliest time at which `expire` would act, if any session is filling.
    pub fn next_deadline(&self) -> Option<Timestamp> {
        self.sessions
            .values()
            .filter(|s| s.state == SessionState::Filling)
            .map(|s| s.last_activity + self.config.followup_timeout_us)
            .min()
    }
}
