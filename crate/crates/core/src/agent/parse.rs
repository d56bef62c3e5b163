//! Extraction of decisions and tool calls from free-form backend text.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::net::PhaseId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("missing JSON decision block")]
    MissingBlock,
    #[error("decision block must have exactly the keys action and justification, found: {0}")]
    WrongKeys(String),
    #[error("action {0} is not a phase id (expected \"P<k>\" or an integer k >= 1)")]
    BadAction(String),
    #[error("justification must be a string")]
    BadJustification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDecision {
    pub action: PhaseId,
    pub justification: String,
}

/// Every JSON object embedded in `text`, outermost only, in order.
pub fn json_objects(text: &str) -> Vec<Map<String, Value>> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(pos) = text[i..].find('{') {
        let start = i + pos;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => {
                out.push(map);
                i = start + stream.byte_offset();
            }
            _ => i = start + 1,
        }
    }
    out
}

/// Reads `"P<k>"`, `"k"` or an integer k >= 1 as a phase id.
pub fn phase_from_value(v: &Value) -> Option<PhaseId> {
    let k = match v {
        Value::Number(n) => n.as_u64()?,
        Value::String(s) => {
            let s = s.trim();
            let digits = s.strip_prefix(['P', 'p']).unwrap_or(s);
            digits.parse::<u64>().ok()?
        }
        _ => return None,
    };
    (1..=u16::MAX as u64).contains(&k).then_some(PhaseId(k as u16))
}

/// The last well-formed `{"action", "justification"}` object in `text`.
pub fn parse_decision(text: &str) -> Result<ParsedDecision, FormatError> {
    let objects = json_objects(text);
    let exact = objects.iter().rev().find(|o| {
        o.len() == 2 && o.contains_key("action") && o.contains_key("justification")
    });
    let Some(obj) = exact else {
        return match objects.iter().rev().find(|o| o.contains_key("action")) {
            Some(o) => Err(FormatError::WrongKeys(
                o.keys().cloned().collect::<Vec<_>>().join(", "),
            )),
            None => Err(FormatError::MissingBlock),
        };
    };
    let action = phase_from_value(&obj["action"]).ok_or_else(|| FormatError::BadAction(obj["action"].to_string()))?;
    let justification = obj["justification"]
        .as_str()
        .ok_or(FormatError::BadJustification)?
        .to_string();
    Ok(ParsedDecision { action, justification })
}

/// First embedded `{"tool": <name>, "args": {...}}` object, if any.
pub fn parse_tool_call(text: &str) -> Option<(String, Value)> {
    json_objects(text).into_iter().find_map(|o| {
        let tool = o.get("tool")?.as_str()?.to_string();
        let args = o.get("args").cloned().unwrap_or(Value::Object(Map::new()));
        Some((tool, args))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_examples() {
        let d = parse_decision(r#"I will choose. {"action":"P2","justification":"EMV on m4"}"#).unwrap();
        assert_eq!(d, ParsedDecision { action: PhaseId(2), justification: "EMV on m4".into() });
        let d = parse_decision(r#"{"action":2,"justification":"x"}"#).unwrap();
        assert_eq!(d.action, PhaseId(2));
        assert_eq!(parse_decision("set green for the busy road"), Err(FormatError::MissingBlock));
        assert_eq!(parse_decision("set green for the busy road").unwrap_err().to_string(), "missing JSON decision block");
    }

    #[test]
    fn last_block_wins_and_errors_are_specific() {
        let d = parse_decision(r#"{"action":"P1","justification":"a"} then {"action":"P3","justification":"b"}"#).unwrap();
        assert_eq!(d.action, PhaseId(3));
        assert!(matches!(parse_decision(r#"{"action":"P1"}"#), Err(FormatError::WrongKeys(_))));
        assert!(matches!(
            parse_decision(r#"{"action":"north","justification":"x"}"#),
            Err(FormatError::BadAction(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"action":0,"justification":"x"}"#),
            Err(FormatError::BadAction(_))
        ));
        assert!(matches!(
            parse_decision(r#"{"action":"P1","justification":3}"#),
            Err(FormatError::BadJustification)
        ));
    }

    #[test]
    fn tool_calls_in_text_and_fences() {
        let text = "Let me look.\n```json\n{\"tool\":\"Get_Occupancy\",\"args\":{\"junction_id\":\"J1\"}}\n```";
        let (tool, args) = parse_tool_call(text).unwrap();
        assert_eq!(tool, "Get_Occupancy");
        assert_eq!(args["junction_id"], "J1");
        assert!(parse_tool_call(r#"{"action":"P1","justification":"x"}"#).is_none());
        assert!(parse_tool_call("{ broken").is_none());
    }

    #[test]
    fn nested_objects_are_not_split() {
        let objs = json_objects(r#"x {"a":{"b":1}} y {"c":2}"#);
        assert_eq!(objs.len(), 2);
    }
}
