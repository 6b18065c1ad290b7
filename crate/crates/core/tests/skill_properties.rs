use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use latchflow::flowcore::Timestamp;
use latchflow::skills::{
    Action, Entities, EntityKind, ExecutionPolicy, Followup, Interpretation, ManagerConfig, SessionState,
    SkillDescriptor, SkillEvent, SkillExecutor, SkillManager, SkillRegistry,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Input {
    Say { entities: Vec<usize>, confidence: f64 },
    Silence,
}

fn inputs() -> impl Strategy<Value = Vec<Input>> {
    prop::collection::vec(
        prop_oneof![
            3 => (prop::collection::vec(0usize..6, 0..4), 0.0f64..1.0)
                .prop_map(|(entities, confidence)| Input::Say { entities, confidence }),
            1 => Just(Input::Silence),
        ],
        0..25,
    )
}

fn names(ix: &[usize]) -> Entities {
    ix.iter().map(|i| (format!("e{i}"), format!("v{i}").into())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Handlers only ever see complete required entities, and every opened
    /// session ends in exactly one Execute or Abort.
    #[test]
    fn sessions_terminate_and_handlers_see_required(
        required in 0usize..5,
        optional in 0usize..2,
        reprompts in 0u32..3,
        inputs in inputs(),
    ) {
        let mut d = SkillDescriptor::new("task");
        for i in 0..required {
            d = d.require(&format!("e{i}"), EntityKind::Text);
        }
        for i in required..required + optional {
            d = d.optional(&format!("e{i}"), EntityKind::Text);
        }
        let violations = Arc::new(AtomicUsize::new(0));
        let seen = Arc::clone(&violations);
        let mut reg = SkillRegistry::new();
        reg.register(d, move |ctx| {
            if (0..required).any(|i| ctx.text(&format!("e{i}")).is_none()) {
                seen.fetch_add(1, Ordering::SeqCst);
            }
            Ok(())
        }).unwrap();
        let reg = Arc::new(reg);
        let exec = SkillExecutor::new();
        let mut mgr = SkillManager::new(Arc::clone(&reg), ManagerConfig { reprompt_limit: reprompts, ..Default::default() });

        let mut endings: BTreeMap<u64, usize> = BTreeMap::new();
        let mut t = 0u64;
        let mut record = |actions: Vec<Action>| {
            for a in actions {
                match a {
                    Action::Execute { session, skill_id, entities } => {
                        if let Some(s) = session {
                            *endings.entry(s).or_default() += 1;
                        }
                        reg.dispatch(&skill_id, entities, Timestamp::from_micros(0), &exec).unwrap().wait().unwrap();
                    }
                    Action::Abort { session, .. } => *endings.entry(session).or_default() += 1,
                    Action::Prompt { .. } | Action::Reject { .. } => {}
                }
            }
        };
        for input in &inputs {
            t += 1_000_000;
            let now = Timestamp::from_micros(t);
            match input {
                Input::Say { entities, confidence } => {
                    record(mgr.submit(&Interpretation::new("task", names(entities), *confidence).at(now)));
                }
                Input::Silence => {
                    if let Some(id) = mgr.active_session() {
                        record(mgr.followup(id, Followup::Timeout(now)).unwrap());
                    }
                }
            }
        }
        // drain: silence until no session is filling
        for _ in 0..=reprompts + 1 {
            if let Some(id) = mgr.active_session() {
                t += 1_000_000;
                record(mgr.followup(id, Followup::Timeout(Timestamp::from_micros(t))).unwrap());
            }
        }
        prop_assert!(mgr.active_session().is_none());
        prop_assert_eq!(violations.load(Ordering::SeqCst), 0);
        for s in mgr.sessions() {
            prop_assert!(matches!(s.state, SessionState::Done | SessionState::Aborted));
            prop_assert_eq!(endings.get(&s.session_id).copied(), Some(1));
        }
    }

    /// A pure handler gives the same outcome and the same invocation record
    /// inline and deferred.
    #[test]
    fn inline_and_deferred_agree(x in -1e6f64..1e6, word in "[a-z]{1,8}") {
        let build = |policy| {
            let mut reg = SkillRegistry::new();
            reg.register(
                SkillDescriptor::new("echo").require("x", EntityKind::Number).optional("w", EntityKind::Text).policy(policy),
                |ctx| {
                    let msg = format!("{} {}", ctx.number("x").unwrap() * 2.0, ctx.text("w").unwrap_or(""));
                    ctx.speak(msg);
                    Ok(())
                },
            ).unwrap();
            reg
        };
        let mut ents = Entities::new();
        ents.insert("x".into(), x.into());
        ents.insert("w".into(), word.clone().into());
        let exec = SkillExecutor::new();
        let (a, b) = (build(ExecutionPolicy::Inline), build(ExecutionPolicy::Deferred));
        let ra = a.dispatch("echo", ents.clone(), Timestamp::from_micros(1), &exec).unwrap().wait().unwrap();
        let rb = b.dispatch("echo", ents.clone(), Timestamp::from_micros(2), &exec).unwrap().wait().unwrap();
        prop_assert_eq!(ra, rb);
        let strip = |r: &SkillRegistry| -> Vec<(String, Entities)> {
            r.log().events().into_iter().filter_map(|e| match e {
                SkillEvent::SkillInvoked { id, entities, .. } => Some((id, entities)),
                _ => None,
            }).collect()
        };
        prop_assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn lookup_is_exact_match() {
    let mut reg = SkillRegistry::new();
    reg.register(SkillDescriptor::new("get_time"), |_| Ok(())).unwrap();
    assert!(reg.lookup("get_time").is_ok());
    for near in ["get_tim", "Get_Time", "get_time ", "get"] {
        assert!(reg.lookup(near).is_err(), "{near}");
    }
}
