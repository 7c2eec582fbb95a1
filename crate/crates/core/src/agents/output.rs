use super::{AgentDecision, AgentError};
use crate::action::{parse_action, Action};
use crate::dataset::ScenarioType;
use crate::metaknowledge::NO_QUERY;

/// Parses the two-line reply contract:
///
/// ```text
/// Scenario: <label>
/// Action: <action>
/// ```
///
/// Surrounding whitespace and code fences are ignored. A `Query: <q>` line
/// may stand in for the action line and is read as `ASK[q]`. Anything else
/// is unparseable.
pub fn parse_agent_output(text: &str) -> Result<AgentDecision, AgentError> {
    let fail = |reason: &str| AgentError::Unparseable { raw: text.to_string(), reason: reason.to_string() };

    let mut scenario = None;
    let mut action = None;
    let mut query = None;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let (key, value) = line.split_once(':').ok_or_else(|| fail("line is not `Key: value`"))?;
        let slot = match key.trim() {
            "Scenario" => &mut scenario,
            "Action" => &mut action,
            "Query" => &mut query,
            _ => return Err(fail(&format!("unexpected line `{line}`"))),
        };
        if slot.replace(value.trim()).is_some() {
            return Err(fail(&format!("repeated `{}` line", key.trim())));
        }
    }

    let scenario = scenario
        .ok_or_else(|| fail("missing `Scenario:` line"))?
        .parse::<ScenarioType>()
        .map_err(|e| fail(&e.to_string()))?;
    let action = match (action, query) {
        (Some(a), None) => parse_action(a).map_err(|e| fail(&e.to_string()))?,
        (None, Some(q)) if q != NO_QUERY => Action::ask(q).map_err(|e| fail(e.message()))?,
        (None, Some(_)) => return Err(fail("query line without a query")),
        (Some(_), Some(_)) => return Err(fail("both `Action:` and `Query:` lines")),
        (None, None) => return Err(fail("missing `Action:` line")),
    };
    Ok(AgentDecision { scenario, action, raw_output: text.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reason(text: &str) -> String {
        match parse_agent_output(text) {
            Err(AgentError::Unparseable { raw, reason }) => {
                assert_eq!(raw, text);
                reason
            }
            other => panic!("expected unparseable, got {other:?}"),
        }
    }

    #[test]
    fn two_line_replies() {
        let d = parse_agent_output("Scenario: normal\nAction: CLICK[10,20]").unwrap();
        assert_eq!((d.scenario, d.action), (ScenarioType::Normal, Action::click(10, 20)));

        let d = parse_agent_output("Scenario: sensitive_action\nAction: ASK[Proceed with granting location?]").unwrap();
        assert_eq!(d.scenario, ScenarioType::SensitiveAction);
        assert_eq!(d.action, Action::ask("Proceed with granting location?").unwrap());
        assert_eq!(d.raw_output, "Scenario: sensitive_action\nAction: ASK[Proceed with granting location?]");
    }

    #[test]
    fn fences_and_whitespace() {
        let d = parse_agent_output("  ```\nScenario: MC\n\n  Action: SWIPE[UP]  \n```\n").unwrap();
        assert_eq!(d.scenario, ScenarioType::MultipleChoice);
        assert_eq!(d.action, Action::swipe(crate::action::Direction::Up));
        assert!(parse_agent_output("```text\nScenario: normal\nAction: WAIT\n```").is_ok());
    }

    #[test]
    fn query_line_reads_as_ask() {
        let d = parse_agent_output("Scenario: information_missing\nQuery: Which city?").unwrap();
        assert_eq!(d.action, Action::ask("Which city?").unwrap());
        assert!(reason("Scenario: normal\nQuery: NONE").contains("without a query"));
    }

    #[test]
    fn contract_violations() {
        assert!(reason("I think we should click somewhere").contains("Key: value"));
        assert!(reason("Scenario: normal").contains("missing `Action:`"));
        assert!(reason("Action: WAIT").contains("missing `Scenario:`"));
        assert!(reason("Scenario: calm\nAction: WAIT").contains("calm"));
        assert!(reason("Scenario: normal\nAction: TAP[1,2]").contains("TAP"));
        assert!(reason("Scenario: normal\nAction: WAIT\nAction: WAIT").contains("repeated"));
        assert!(reason("Scenario: normal\nAction: WAIT\nNote: done").contains("unexpected"));
        assert!(reason("").contains("missing"));
    }
}
