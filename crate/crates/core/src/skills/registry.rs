use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::descriptor::{DescriptorError, Entities, EntityKind, ExecutionPolicy, SkillDescriptor, SkillLevel};
use crate::flowcore::Timestamp;
use crate::robotics::LocomotionCommand;

/// Observable side effect of a skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Speak { text: String },
    Notify { text: String },
    Locomotion { command: LocomotionCommand },
}

/// Key-value store shared by every skill of one registry.
#[derive(Debug, Clone, Default)]
pub struct SkillState(Arc<Mutex<BTreeMap<String, serde_json::Value>>>);

impl SkillState {
    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    pub fn set(&self, key: &str, value: serde_json::Value) {
        self.0
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key.to_string(), value);
    }

    pub fn snapshot(&self) -> BTreeMap<String, serde_json::Value> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Everything a handler may touch. Device access depends on the skill level.
pub struct SkillContext {
    skill_id: String,
    entities: Entities,
    level: SkillLevel,
    now: Timestamp,
    state: SkillState,
    effects: Vec<Effect>,
}

/// Device outputs available to low-level skills.
pub struct Devices<'a> {
    effects: &'a mut Vec<Effect>,
}

impl Devices<'_> {
    pub fn locomotion(&mut self, command: LocomotionCommand) {
        self.effects.push(Effect::Locomotion { command });
    }
}

impl SkillContext {
    pub fn skill_id(&self) -> &str {
        &self.skill_id
    }

    pub fn entities(&self) -> &Entities {
        &self.entities
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.entities.get(name).and_then(|v| v.as_text())
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.entities.get(name).and_then(|v| v.as_number())
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn speak(&mut self, text: impl Into<String>) {
        self.effects.push(Effect::Speak { text: text.into() });
    }

    pub fn notify(&mut self, text: impl Into<String>) {
        self.effects.push(Effect::Notify { text: text.into() });
    }

    pub fn query_state(&self, key: &str) -> Option<serde_json::Value> {
        self.state.get(key)
    }

    pub fn update_state(&mut self, key: &str, value: serde_json::Value) {
        self.state.set(key, value);
    }

    /// `None` for high-level skills.
    pub fn devices(&mut self) -> Option<Devices<'_>> {
        match self.level {
            SkillLevel::LowLevel => Some(Devices {
                effects: &mut self.effects,
            }),
            SkillLevel::HighLevel => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct SkillError(pub String);

impl SkillError {
    pub fn new(msg: impl Into<String>) -> Self {
        SkillError(msg.into())
    }
}

pub type Handler = Arc<dyn Fn(&mut SkillContext) -> Result<(), SkillError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub skill_id: String,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SkillEvent {
    SkillInvoked {
        id: String,
        entities: Entities,
        policy: ExecutionPolicy,
        at: Timestamp,
    },
    SkillFailed {
        id: String,
        cause: String,
        at: Timestamp,
    },
}

#[derive(Debug, Default)]
pub struct SkillLog(Mutex<Vec<SkillEvent>>);

impl SkillLog {
    pub fn push(&self, e: SkillEvent) {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).push(e);
    }

    pub fn events(&self) -> Vec<SkillEvent> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn invocations(&self, id: &str) -> usize {
        self.events()
            .iter()
            .filter(|e| matches!(e, SkillEvent::SkillInvoked { id: i, .. } if i == id))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("skill `{0}` is already registered")]
    DuplicateSkill(String),
    #[error(transparent)]
    Invalid(#[from] DescriptorError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("no skill `{0}`")]
    NotFound(String),
    #[error("missing required entities: {0:?}")]
    MissingEntities(Vec<String>),
    #[error("entity `{name}` is not a valid {expected:?}")]
    InvalidEntity { name: String, expected: EntityKind },
    #[error("skill `{skill}` takes no entity `{name}`")]
    UnknownEntity { skill: String, name: String },
}

type Job = Box<dyn FnOnce() + Send>;

/// Dedicated worker thread for deferred skills. Jobs run in submission order.
pub struct SkillExecutor {
    tx: Option<mpsc::Sender<Job>>,
    worker: Option<JoinHandle<()>>,
}

impl SkillExecutor {
    pub fn new() -> Self {
        let (tx, rx) = mpsc::channel::<Job>();
        let worker = std::thread::Builder::new()
            .name("skill-executor".into())
            .spawn(move || {
                for job in rx {
                    job();
                }
            })
            .expect("spawn skill executor");
        Self {
            tx: Some(tx),
            worker: Some(worker),
        }
    }

    fn submit(&self, job: Job) {
        self.tx
            .as_ref()
            .expect("executor alive until drop")
            .send(job)
            .expect("worker outlives sender");
    }
}

impl Default for SkillExecutor {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for SkillExecutor {
    fn drop(&mut self) {
        drop(self.tx.take());
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

pub enum InvocationHandle {
    Ready(Result<SkillOutcome, SkillError>),
    Pending(mpsc::Receiver<Result<SkillOutcome, SkillError>>),
}

impl InvocationHandle {
    /// Blocks until the handler has finished.
    pub fn wait(self) -> Result<SkillOutcome, SkillError> {
        match self {
            InvocationHandle::Ready(r) => r,
            InvocationHandle::Pending(rx) => rx
                .recv()
                .unwrap_or_else(|_| Err(SkillError::new("skill executor stopped"))),
        }
    }

    pub fn is_ready(&self) -> bool {
        matches!(self, InvocationHandle::Ready(_))
    }
}

struct Entry {
    descriptor: SkillDescriptor,
    handler: Handler,
}

/// Exact-match map from skill id to descriptor and handler.
#[derive(Default)]
pub struct SkillRegistry {
    skills: HashMap<String, Entry>,
    log: Arc<SkillLog>,
    state: SkillState,
}

impl SkillRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, descriptor: SkillDescriptor, handler: F) -> Result<(), RegistryError>
    where
        F: Fn(&mut SkillContext) -> Result<(), SkillError> + Send + Sync + 'static,
    {
        self.register_shared(descriptor, Arc::new(handler))
    }

    pub fn register_shared(&mut self, descriptor: SkillDescriptor, handler: Handler) -> Result<(), RegistryError> {
        descriptor.validate()?;
        if self.skills.contains_key(&descriptor.id) {
            return Err(RegistryError::DuplicateSkill(descriptor.id));
        }
        self.skills
            .insert(descriptor.id.clone(), Entry { descriptor, handler });
        Ok(())
    }

    pub fn lookup(&self, id: &str) -> Result<(&SkillDescriptor, &Handler), DispatchError> {
        self.skills
            .get(id)
            .map(|e| (&e.descriptor, &e.handler))
            .ok_or_else(|| DispatchError::NotFound(id.to_string()))
    }

    pub fn descriptor(&self, id: &str) -> Option<&SkillDescriptor> {
        self.skills.get(id).map(|e| &e.descriptor)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.skills.contains_key(id)
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.skills.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    pub fn log(&self) -> &Arc<SkillLog> {
        &self.log
    }

    pub fn state(&self) -> &SkillState {
        &self.state
    }

    /// Checks entities against the descriptor: all required present, every
    /// value declared and of the declared kind.
    pub fn check_entities(descriptor: &SkillDescriptor, entities: &Entities) -> Result<(), DispatchError> {
        let missing = descriptor.missing(entities);
        if !missing.is_empty() {
            return Err(DispatchError::MissingEntities(missing));
        }
        for (name, value) in entities {
            let spec = descriptor.entity(name).ok_or_else(|| DispatchError::UnknownEntity {
                skill: descriptor.id.clone(),
                name: name.clone(),
            })?;
            if !value.fits(spec.kind) {
                return Err(DispatchError::InvalidEntity {
                    name: name.clone(),
                    expected: spec.kind,
                });
            }
        }
        Ok(())
    }

    /// Runs skill `id` under its execution policy. Logs exactly one
    /// `SkillInvoked` when the entities pass validation, and a `SkillFailed`
    /// if the handler errors or panics.
    pub fn dispatch(
        &self,
        id: &str,
        entities: Entities,
        at: Timestamp,
        executor: &SkillExecutor,
    ) -> Result<InvocationHandle, DispatchError> {
        let (descriptor, handler) = self.lookup(id)?;
        Self::check_entities(descriptor, &entities)?;
        let policy = descriptor.execution_policy;
        self.log.push(SkillEvent::SkillInvoked {
            id: id.to_string(),
            entities: entities.clone(),
            policy,
            at,
        });
        let ctx = SkillContext {
            skill_id: id.to_string(),
            entities,
            level: descriptor.level,
            now: at,
            state: self.state.clone(),
            effects: Vec::new(),
        };
        let handler = Arc::clone(handler);
        let log = Arc::clone(&self.log);
        match policy {
            ExecutionPolicy::Inline => Ok(InvocationHandle::Ready(run_handler(&handler, ctx, &log))),
            ExecutionPolicy::Deferred => {
                let (tx, rx) = mpsc::channel();
                executor.submit(Box::new(move || {
                    let _ = tx.send(run_handler(&handler, ctx, &log));
                }));
                Ok(InvocationHandle::Pending(rx))
            }
        }
    }
}

fn run_handler(handler: &Handler, mut ctx: SkillContext, log: &SkillLog) -> Result<SkillOutcome, SkillError> {
    let result = match catch_unwind(AssertUnwindSafe(|| handler(&mut ctx))) {
        Ok(r) => r,
        Err(p) => Err(SkillError(
            p.downcast_ref::<&str>()
                .map(|s| format!("handler panicked: {s}"))
                .or_else(|| p.downcast_ref::<String>().map(|s| format!("handler panicked: {s}")))
                .unwrap_or_else(|| "handler panicked".into()),
        )),
    };
    match result {
        Ok(()) => Ok(SkillOutcome {
            skill_id: ctx.skill_id,
            effects: ctx.effects,
        }),
        Err(e) => {
            log.push(SkillEvent::SkillFailed {
                id: ctx.skill_id,
                cause: e.0.clone(),
                at: ctx.now,
            });
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::descriptor::{entities, EntityKind};

    fn registry() -> SkillRegistry {
        let mut r = SkillRegistry::new();
        r.register(SkillDescriptor::new("get_time"), |ctx| {
            let t = ctx.now().as_secs_f64();
            ctx.speak(format!("t={t}"));
            Ok(())
        })
        .unwrap();
        r.register(
            SkillDescriptor::new("find_object").require("object_label", EntityKind::ObjectLabel),
            |ctx| {
                let label = ctx.text("object_label").unwrap().to_string();
                ctx.speak(label);
                Ok(())
            },
        )
        .unwrap();
        r
    }

    #[test]
    fn register_and_lookup() {
        let mut r = registry();
        assert!(r.lookup("get_time").is_ok());
        assert_eq!(
            r.register(SkillDescriptor::new("get_time"), |_| Ok(())),
            Err(RegistryError::DuplicateSkill("get_time".into()))
        );
        assert!(matches!(r.lookup("unknown"), Err(DispatchError::NotFound(_))));
        // exact match only
        assert!(r.lookup("get_tim").is_err() && r.lookup("GET_TIME").is_err());
    }

    #[test]
    fn inline_dispatch_logs_once() {
        let r = registry();
        let ex = SkillExecutor::new();
        let out = r
            .dispatch("get_time", Entities::new(), Timestamp::from_secs_f64(2.0), &ex)
            .unwrap();
        assert!(out.is_ready());
        assert_eq!(out.wait().unwrap().effects, vec![Effect::Speak { text: "t=2".into() }]);
        assert_eq!(r.log().invocations("get_time"), 1);
    }

    #[test]
    fn missing_entities() {
        let r = registry();
        let ex = SkillExecutor::new();
        assert_eq!(
            r.dispatch("find_object", Entities::new(), Timestamp::ZERO, &ex).err(),
            Some(DispatchError::MissingEntities(vec!["object_label".into()]))
        );
        assert!(r.log().events().is_empty());
    }

    #[test]
    fn wrong_kind_and_unknown_entity() {
        let r = registry();
        let ex = SkillExecutor::new();
        assert!(matches!(
            r.dispatch("find_object", entities([("object_label", 3.0)]), Timestamp::ZERO, &ex),
            Err(DispatchError::InvalidEntity { .. })
        ));
        assert!(matches!(
            r.dispatch("get_time", entities([("zone", "utc")]), Timestamp::ZERO, &ex),
            Err(DispatchError::UnknownEntity { .. })
        ));
    }

    #[test]
    fn deferred_matches_inline() {
        let make = |policy| {
            let mut r = SkillRegistry::new();
            r.register(
                SkillDescriptor::new("find_object")
                    .require("object_label", EntityKind::ObjectLabel)
                    .policy(policy),
                |ctx| {
                    let label = ctx.text("object_label").unwrap().to_uppercase();
                    ctx.speak(label);
                    Ok(())
                },
            )
            .unwrap();
            r
        };
        let ex = SkillExecutor::new();
        let e = entities([("object_label", "cup")]);
        let inline = make(ExecutionPolicy::Inline);
        let deferred = make(ExecutionPolicy::Deferred);
        let a = inline.dispatch("find_object", e.clone(), Timestamp::ZERO, &ex).unwrap();
        let b = deferred.dispatch("find_object", e, Timestamp::ZERO, &ex).unwrap();
        assert!(!b.is_ready());
        assert_eq!(a.wait(), b.wait());
    }

    #[test]
    fn failures_are_logged() {
        let mut r = SkillRegistry::new();
        r.register(SkillDescriptor::new("bad"), |_| Err(SkillError::new("nope")))
            .unwrap();
        r.register(
            SkillDescriptor::new("boom").policy(ExecutionPolicy::Deferred),
            |_| panic!("kaboom"),
        )
        .unwrap();
        let ex = SkillExecutor::new();
        assert!(r.dispatch("bad", Entities::new(), Timestamp::ZERO, &ex).unwrap().wait().is_err());
        let err = r.dispatch("boom", Entities::new(), Timestamp::ZERO, &ex).unwrap().wait().unwrap_err();
        assert!(err.0.contains("kaboom"));
        let failed = r
            .log()
            .events()
            .into_iter()
            .filter(|e| matches!(e, SkillEvent::SkillFailed { .. }))
            .count();
        assert_eq!(failed, 2);
    }

    #[test]
    fn high_level_skills_get_no_devices() {
        let mut r = SkillRegistry::new();
        r.register(SkillDescriptor::new("hi"), |ctx| {
            assert!(ctx.devices().is_none());
            Ok(())
        })
        .unwrap();
        r.register(SkillDescriptor::new("lo").level(SkillLevel::LowLevel), |ctx| {
            let cmd = LocomotionCommand::stop(crate::robotics::Direction::LeftForward);
            ctx.devices().expect("low-level").locomotion(cmd);
            Ok(())
        })
        .unwrap();
        let ex = SkillExecutor::new();
        assert!(r.dispatch("hi", Entities::new(), Timestamp::ZERO, &ex).unwrap().wait().is_ok());
        let out = r.dispatch("lo", Entities::new(), Timestamp::ZERO, &ex).unwrap().wait().unwrap();
        assert_eq!(out.effects.len(), 1);
    }
}
