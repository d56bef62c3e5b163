use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Text,
    /// `"P<k>"` or an integer.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
    pub description: &'static str,
}

/// Prompt card and argument list of one tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub input: Vec<ParamSpec>,
    pub output: &'static str,
    pub example: &'static str,
}

impl ToolSpec {
    pub fn input_text(&self) -> String {
        self.input
            .iter()
            .map(|p| {
                format!(
                    "{} ({}{}): {}",
                    p.name,
                    match p.kind {
                        ParamKind::Text => "string",
                        ParamKind::Phase => "phase id",
                    },
                    if p.required { "" } else { ", optional" },
                    p.description
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Prompt rendering of the four card parts.
    pub fn render(&self) -> String {
        format!(
            "{}\n  Description: {}\n  Input: {}\n  Output: {}\n  Example: {}",
            self.name,
            self.description,
            self.input_text(),
            self.output,
            self.example
        )
    }

    pub fn parameters_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.input {
            let schema = match p.kind {
                ParamKind::Text => json!({"type": "string", "description": p.description}),
                ParamKind::Phase => json!({
                    "anyOf": [{"type": "string", "pattern": "^[Pp]?[1-9][0-9]*$"}, {"type": "integer", "minimum": 1}],
                    "description": p.description
                }),
            };
            props.insert(p.name.to_string(), schema);
        }
        let required: Vec<&str> = self.input.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({
            "type": "object",
            "properties": props,
            "required": required,
            "additionalProperties": false
        })
    }

    pub fn to_catalog_entry(&self) -> Value {
        json!({
            "name": self.name,
            "description": self.description,
            "parameters": self.parameters_schema(),
            "output": self.output,
            "example": self.example,
        })
    }
}

const JUNCTION: ParamSpec = ParamSpec {
    name: "junction_id",
    kind: ParamKind::Text,
    required: true,
    description: "identifier of the intersection, e.g. \"J1\"",
};

fn junction_only(
    name: &'static str,
    description: &'static str,
    output: &'static str,
    example: &'static str,
) -> ToolSpec {
    ToolSpec {
        name,
        description,
        input: vec![JUNCTION],
        output,
        example,
    }
}

pub(super) fn all() -> Vec<ToolSpec> {
    vec![
        junction_only(
            super::GET_INTERSECTION_LAYOUT,
            "Lists the signalized movements of an intersection with the approach each one enters from, its turning direction and how many incoming lanes serve it.",
            "object keyed by movement id; each value has approach, direction (l, s or r) and number_of_lanes",
            "{\"junction_id\": \"J1\"} -> {\"m1\": {\"approach\": \"E1\", \"direction\": \"s\", \"number_of_lanes\": 2}, \"m2\": {\"approach\": \"E1\", \"direction\": \"l\", \"number_of_lanes\": 1}, ...}",
        ),
        junction_only(
            super::GET_SIGNAL_PHASE_STRUCTURE,
            "Gives the signal plan: every phase in cycle order and the movements that get green together in it.",
            "ordered object keyed by phase id; each value is the list of movement ids in that phase",
            "{\"junction_id\": \"J1\"} -> {\"P1\": [\"m1\", \"m5\"], \"P2\": [\"m2\", \"m6\"], \"P3\": [\"m3\", \"m7\"], \"P4\": [\"m4\", \"m8\"]}",
        ),
        junction_only(
            super::GET_OCCUPANCY,
            "Reports the share of road space filled by vehicles within 150 m of the stop line for each movement. A broken detector reports -100%.",
            "object keyed by movement id with the occupancy in percent",
            "{\"junction_id\": \"J1\"} -> {\"m1\": 12.5, \"m2\": 30.0, \"m3\": -100.0, ...}",
        ),
        junction_only(
            super::GET_QUEUE_LENGTH,
            "Counts the stopped vehicles lined up from the stop line for each movement, up to 150 m back. A broken detector reports -1.",
            "object keyed by movement id with the number of queued vehicles",
            "{\"junction_id\": \"J1\"} -> {\"m1\": 4, \"m2\": 9, \"m3\": -1, ...}",
        ),
        junction_only(
            super::GET_PHASE_ID,
            "Tells which phase is showing now, whether it is green or in its yellow change interval, and how long the green has lasted.",
            "object with phase, mode (green or yellow), green_elapsed seconds, and next_phase and remaining seconds while yellow",
            "{\"junction_id\": \"J1\"} -> {\"phase\": \"P2\", \"mode\": \"green\", \"green_elapsed\": 27}",
        ),
        junction_only(
            super::GET_JUNCTION_SITUATION,
            "Scans for emergency vehicles approaching within 150 m and for blocked exit roads. Detector faults are not listed here.",
            "list of items; EMV items carry vehicle, movement, distance in m and queued_ahead; ROADBLOCK items carry link and the movements that cannot leave",
            "{\"junction_id\": \"J1\"} -> [{\"kind\": \"EMV\", \"vehicle\": 17, \"movement\": \"m4\", \"label\": \"E4-l\", \"distance\": 80.0, \"queued_ahead\": 3}]",
        ),
        junction_only(
            super::GET_AUXILIARY_DECISION,
            "Asks a max-pressure controller for its choice. Useful as a reference; it reads broken detectors as empty queues and ignores roadblocks.",
            "object with recommended phase, source, per-phase pressures, downstream queues per movement and the minimum green in seconds",
            "{\"junction_id\": \"J1\"} -> {\"recommended\": \"P3\", \"source\": \"maxpressure\", \"pressures\": {\"P1\": 1, \"P2\": 6, \"P3\": 8, \"P4\": 6}, ...}",
        ),
        junction_only(
            super::GET_AVAILABLE_ACTIONS,
            "Lists the phase ids that may be chosen at this intersection.",
            "list of phase ids",
            "{\"junction_id\": \"J1\"} -> [\"P1\", \"P2\", \"P3\", \"P4\"]",
        ),
        ToolSpec {
            name: super::EVALUATE_ACTION_FEASIBILITY,
            description: "Checks a drafted decision before it is sent: it must contain the JSON decision block and name an existing phase.",
            input: vec![
                JUNCTION,
                ParamSpec {
                    name: "proposed",
                    kind: ParamKind::Text,
                    required: true,
                    description: "the full decision text to check",
                },
            ],
            output: "object with ok (true or false), reason and the parsed action",
            example: "{\"junction_id\": \"J1\", \"proposed\": \"{\\\"action\\\": \\\"P7\\\", \\\"justification\\\": \\\"...\\\"}\"} -> {\"ok\": false, \"reason\": \"unknown phase P7 (available: P1, P2, P3, P4)\", \"action\": null}",
        },
        ToolSpec {
            name: super::JUSTIFY_DECISION_LOGIC,
            description: "Stores the reasoning behind a decision together with the tools consulted and the current situation at the intersection.",
            input: vec![
                JUNCTION,
                ParamSpec {
                    name: "decision",
                    kind: ParamKind::Phase,
                    required: true,
                    description: "the chosen phase",
                },
                ParamSpec {
                    name: "justification",
                    kind: ParamKind::Text,
                    required: false,
                    description: "why this phase was chosen",
                },
            ],
            output: "the stored record with clock, junction, decision, justification, tool trail and situation items",
            example: "{\"junction_id\": \"J1\", \"decision\": \"P4\", \"justification\": \"ambulance waiting on m4\"} -> {\"clock\": 615, \"decision\": \"P4\", ...}",
        },
    ]
}
