//! Skill registry, deferred skill executor, slot-filling skill manager and demo skills.

mod demo;
mod descriptor;
mod manager;
mod registry;

pub use demo::{demo_descriptors, demo_handler, drive_commands, register_catalog, register_demo_skills, CatalogBindError};
pub use descriptor::{
    entities, load_catalog, CatalogError, DescriptorError, Entities, EntityKind, EntitySpec, EntityValue,
    ExecutionPolicy, SkillDescriptor, SkillLevel,
};
pub use manager::{
    AbortReason, Action, Followup, Interpretation, ManagerConfig, RejectReason, SessionError, SessionId,
    SessionState, SkillManager, SkillSession,
};
pub use registry::{
    Devices, DispatchError, Effect, Handler, InvocationHandle, RegistryError, SkillContext, SkillError, SkillEvent,
    SkillExecutor, SkillLog, SkillOutcome, SkillRegistry, SkillState,
};
