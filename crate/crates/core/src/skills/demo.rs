//! Built-in demo skills. Side effects are simulated: speech and notifications
//! are recorded, locomotion commands are emitted as effects.

use std::sync::Arc;

use serde_json::json;

use super::descriptor::{EntityKind, ExecutionPolicy, SkillDescriptor, SkillLevel};
use super::registry::{Handler, RegistryError, SkillContext, SkillError, SkillRegistry};
use crate::robotics::{Direction, LocomotionCommand};

pub fn demo_descriptors() -> Vec<SkillDescriptor> {
    vec![
        SkillDescriptor::new("get_time"),
        SkillDescriptor::new("find_object").require("object_label", EntityKind::ObjectLabel),
        SkillDescriptor::new("find_person").require("person_name", EntityKind::PersonName),
        SkillDescriptor::new("call_phone")
            .require("person_name", EntityKind::PersonName)
            .policy(ExecutionPolicy::Deferred),
        SkillDescriptor::new("drive")
            .require("direction", EntityKind::Text)
            .require("speed", EntityKind::Number)
            .level(SkillLevel::LowLevel),
        SkillDescriptor::new("schedule")
            .require("task", EntityKind::Text)
            .optional("in", EntityKind::Duration),
        SkillDescriptor::new("agenda"),
    ]
}

/// Handler for a demo skill id.
pub fn demo_handler(id: &str) -> Option<Handler> {
    let h: Handler = match id {
        "get_time" => Arc::new(get_time),
        "find_object" => Arc::new(|ctx: &mut SkillContext| find(ctx, "object_label", "the")),
        "find_person" => Arc::new(|ctx: &mut SkillContext| find(ctx, "person_name", "")),
        "call_phone" => Arc::new(call_phone),
        "drive" => Arc::new(drive),
        "schedule" => Arc::new(schedule),
        "agenda" => Arc::new(agenda),
        _ => return None,
    };
    Some(h)
}

pub fn register_demo_skills(registry: &mut SkillRegistry) -> Result<(), RegistryError> {
    for d in demo_descriptors() {
        let h = demo_handler(&d.id).expect("every demo descriptor has a handler");
        registry.register_shared(d, h)?;
    }
    Ok(())
}

/// Registers catalog descriptors, binding each id to its demo handler.
pub fn register_catalog(registry: &mut SkillRegistry, catalog: Vec<SkillDescriptor>) -> Result<(), CatalogBindError> {
    for d in catalog {
        let h = demo_handler(&d.id).ok_or_else(|| CatalogBindError::NoHandler(d.id.clone()))?;
        registry.register_shared(d, h)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogBindError {
    #[error("no handler available for skill `{0}`")]
    NoHandler(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn get_time(ctx: &mut SkillContext) -> Result<(), SkillError> {
    let secs = ctx.now().as_micros() / 1_000_000;
    let (h, m, s) = (secs / 3600 % 24, secs / 60 % 60, secs % 60);
    ctx.speak(format!("It is {h:02}:{m:02}:{s:02}."));
    Ok(())
}

fn find(ctx: &mut SkillContext, entity: &str, article: &str) -> Result<(), SkillError> {
    let target = ctx
        .text(entity)
        .ok_or_else(|| SkillError::new(format!("no {entity}")))?
        .to_string();
    let name = if article.is_empty() {
        target.clone()
    } else {
        format!("{article} {target}")
    };
    match ctx.query_state(&format!("last_seen/{target}")) {
        Some(place) => ctx.speak(format!("I last saw {name} {}.", place.as_str().unwrap_or("somewhere"))),
        None => ctx.speak(format!("Looking for {name}.")),
    }
    Ok(())
}

fn call_phone(ctx: &mut SkillContext) -> Result<(), SkillError> {
    let who = ctx
        .text("person_name")
        .ok_or_else(|| SkillError::new("no person_name"))?
        .to_string();
    ctx.notify(format!("dialing {who}"));
    ctx.speak(format!("Calling {who}."));
    Ok(())
}

/// One packet per wheel side addressed: a side-specific direction sends one,
/// whole-robot motions send one per side.
pub fn drive_commands(direction: &str, speed: f64) -> Result<Vec<LocomotionCommand>, SkillError> {
    if !(0.0..=255.0).contains(&speed) || speed.fract() != 0.0 {
        return Err(SkillError::new(format!("speed must be an integer in 0..=255, got {speed}")));
    }
    let v = speed as i64;
    let mk = |d| LocomotionCommand::new(d, v).expect("range checked");
    use Direction::*;
    let dirs: Vec<Direction> = match direction {
        "forward" => vec![LeftForward, RightForward],
        "backward" => vec![LeftBackward, RightBackward],
        "turn_left" => vec![LeftBackward, RightForward],
        "turn_right" => vec![LeftForward, RightBackward],
        "stop" => return Ok(vec![LocomotionCommand::stop(LeftForward), LocomotionCommand::stop(RightForward)]),
        other => vec![Direction::parse(other)
            .ok_or_else(|| SkillError::new(format!("unknown direction `{other}`")))?],
    };
    Ok(dirs.into_iter().map(mk).collect())
}

fn drive(ctx: &mut SkillContext) -> Result<(), SkillError> {
    let direction = ctx
        .text("direction")
        .ok_or_else(|| SkillError::new("no direction"))?
        .to_string();
    let speed = ctx.number("speed").ok_or_else(|| SkillError::new("no speed"))?;
    let cmds = drive_commands(&direction, speed)?;
    let mut dev = ctx
        .devices()
        .ok_or_else(|| SkillError::new("drive needs device access"))?;
    for c in cmds {
        dev.locomotion(c);
    }
    Ok(())
}

fn schedule(ctx: &mut SkillContext) -> Result<(), SkillError> {
    let task = ctx.text("task").ok_or_else(|| SkillError::new("no task"))?.to_string();
    let due_s = ctx.now().as_secs_f64() + ctx.number("in").unwrap_or(0.0);
    let mut list = ctx
        .query_state("schedule")
        .and_then(|v| v.as_array().cloned())
        .unwrap_or_default();
    list.push(json!({"task": task, "due_s": due_s}));
    ctx.update_state("schedule", json!(list));
    ctx.speak(format!("Scheduled {task}."));
    Ok(())
}

fn agenda(ctx: &mut SkillContext) -> Result<(), SkillError> {
    let list = ctx
        .query_state("schedule")
        .and_then(|v| v.as_array().cloned())
        .unwrap_or_default();
    if list.is_empty() {
        ctx.speak("Nothing scheduled.");
    } else {
        let tasks: Vec<&str> = list.iter().filter_map(|e| e["task"].as_str()).collect();
        ctx.speak(format!("You have: {}.", tasks.join(", ")));
    }
    Ok(())
}
