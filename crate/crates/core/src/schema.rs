//! Extraction schema: entity, relation, event and argument-role types with
//! their verbalization templates and type constraints.
//!
//! A [`Schema`] is an immutable snapshot. Editing produces a new value with a
//! bumped version; readers share snapshots behind an `Arc`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A template slot. `{X}` binds the primary span (entity, trigger, left
/// relation argument); `{Y}` binds the secondary span (right relation
/// argument, argument filler).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placeholder {
    X,
    Y,
}

impl Placeholder {
    pub fn token(self) -> &'static str {
        match self {
            Placeholder::X => "{X}",
            Placeholder::Y => "{Y}",
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Problems found while scanning template text for placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateSyntaxError {
    Empty,
    RepeatedPlaceholder(Placeholder),
    StrayBrace(usize),
}

impl fmt::Display for TemplateSyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateSyntaxError::Empty => f.write_str("template text is empty"),
            TemplateSyntaxError::RepeatedPlaceholder(p) => {
                write!(f, "placeholder {p} appears more than once")
            }
            TemplateSyntaxError::StrayBrace(at) => {
                write!(f, "literal brace at character {at} (only {{X}} and {{Y}} are allowed)")
            }
        }
    }
}

/// Scans `text` and returns the placeholders in order of appearance.
pub fn scan_placeholders(text: &str) -> Result<Vec<Placeholder>, TemplateSyntaxError> {
    if text.trim().is_empty() {
        return Err(TemplateSyntaxError::Empty);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut found = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' => {
                let slot = match (chars.get(i + 1), chars.get(i + 2)) {
                    (Some('X'), Some('}')) => Placeholder::X,
                    (Some('Y'), Some('}')) => Placeholder::Y,
                    _ => return Err(TemplateSyntaxError::StrayBrace(i)),
                };
                if found.contains(&slot) {
                    return Err(TemplateSyntaxError::RepeatedPlaceholder(slot));
                }
                found.push(slot);
                i += 3;
            }
            '}' => return Err(TemplateSyntaxError::StrayBrace(i)),
            _ => i += 1,
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    /// Stable identifier within the owning type. Filled with `t<index>` on
    /// load when absent.
    #[serde(default)]
    pub id: String,
    pub text: String,
    /// Derived from `text` on load when absent.
    #[serde(default)]
    pub placeholders: Vec<Placeholder>,
}

impl Template {
    /// Builds a template, deriving placeholders from the text. Syntax errors
    /// are left for [`validate_schema`] to report; placeholders stay empty.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let placeholders = scan_placeholders(&text).unwrap_or_default();
        Template {
            id: id.into(),
            text,
            placeholders,
        }
    }

    pub fn uses(&self, slot: Placeholder) -> bool {
        self.placeholders.contains(&slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTypeDef {
    pub name: String,
    pub templates: Vec<Template>,
}

/// Directional (left, right) entity type constraint for a relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypePair {
    pub left: String,
    pub right: String,
}

impl TypePair {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        TypePair {
            left: left.into(),
            right: right.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTypeDef {
    pub name: String,
    pub templates: Vec<Template>,
    pub allowed_pairs: Vec<TypePair>,
}

impl RelationTypeDef {
    pub fn admits(&self, left: &str, right: &str) -> bool {
        self.allowed_pairs
            .iter()
            .any(|p| p.left == left && p.right == right)
    }
}

/// Whether an event type classifies whole sentences or typed trigger spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerMode {
    #[default]
    SentenceLevel,
    TriggerSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTypeDef {
    pub name: String,
    pub templates: Vec<Template>,
    #[serde(default)]
    pub trigger_mode: TriggerMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentRoleDef {
    pub name: String,
    pub owning_event: String,
    pub templates: Vec<Template>,
    pub allowed_filler_types: Vec<String>,
}

impl ArgumentRoleDef {
    pub fn admits_filler(&self, entity_type: &str) -> bool {
        self.allowed_filler_types.iter().any(|t| t == entity_type)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub entity_types: Vec<EntityTypeDef>,
    #[serde(default)]
    pub relation_types: Vec<RelationTypeDef>,
    #[serde(default)]
    pub event_types: Vec<EventTypeDef>,
    #[serde(default)]
    pub argument_roles: Vec<ArgumentRoleDef>,
}

impl Schema {
    pub fn is_empty(&self) -> bool {
        self.entity_types.is_empty()
            && self.relation_types.is_empty()
            && self.event_types.is_empty()
            && self.argument_roles.is_empty()
    }

    pub fn entity_type(&self, name: &str) -> Option<&EntityTypeDef> {
        self.entity_types.iter().find(|t| t.name == name)
    }

    pub fn relation_type(&self, name: &str) -> Option<&RelationTypeDef> {
        self.relation_types.iter().find(|t| t.name == name)
    }

    pub fn event_type(&self, name: &str) -> Option<&EventTypeDef> {
        self.event_types.iter().find(|t| t.name == name)
    }

    /// Roles owned by `event`, in declaration order.
    pub fn roles_for<'a>(&'a self, event: &'a str) -> impl Iterator<Item = &'a ArgumentRoleDef> + 'a {
        self.argument_roles
            .iter()
            .filter(move |r| r.owning_event == event)
    }

    /// Relations admitting the ordered pair, in declaration order.
    pub fn relations_admitting<'a>(
        &'a self,
        left: &'a str,
        right: &'a str,
    ) -> impl Iterator<Item = &'a RelationTypeDef> + 'a {
        self.relation_types
            .iter()
            .filter(move |r| r.admits(left, right))
    }

    /// Returns true when the name is declared as any kind of type (entity,
    /// relation, event or role).
    pub fn declares(&self, name: &str) -> bool {
        self.entity_type(name).is_some()
            || self.relation_type(name).is_some()
            || self.event_type(name).is_some()
            || self.argument_roles.iter().any(|r| r.name == name)
    }

    /// Produces the successor snapshot: same content, version + 1.
    pub fn bump(mut self) -> Schema {
        self.version += 1;
        self
    }

    /// Fills missing template ids (`t<index>`) and placeholder lists.
    fn normalize(&mut self) {
        fn fill(templates: &mut [Template]) {
            for (i, t) in templates.iter_mut().enumerate() {
                if t.id.is_empty() {
                    t.id = format!("t{i}");
                }
                if t.placeholders.is_empty() {
                    t.placeholders = scan_placeholders(&t.text).unwrap_or_default();
                }
            }
        }
        self.entity_types.iter_mut().for_each(|t| fill(&mut t.templates));
        self.relation_types.iter_mut().for_each(|t| fill(&mut t.templates));
        self.event_types.iter_mut().for_each(|t| fill(&mut t.templates));
        self.argument_roles.iter_mut().for_each(|t| fill(&mut t.templates));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Location of the offending element, e.g. `relation_types[0].allowed_pairs[1].right`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Which slots a template kind requires and permits.
struct SlotRule {
    required: &'static [Placeholder],
    allowed: &'static [Placeholder],
}

const ENTITY_SLOTS: SlotRule = SlotRule {
    required: &[Placeholder::X],
    allowed: &[Placeholder::X],
};
const RELATION_SLOTS: SlotRule = SlotRule {
    required: &[Placeholder::X, Placeholder::Y],
    allowed: &[Placeholder::X, Placeholder::Y],
};
const SENTENCE_EVENT_SLOTS: SlotRule = SlotRule {
    required: &[],
    allowed: &[],
};
const TRIGGER_EVENT_SLOTS: SlotRule = SlotRule {
    required: &[Placeholder::X],
    allowed: &[Placeholder::X],
};
const ROLE_SLOTS: SlotRule = SlotRule {
    required: &[Placeholder::Y],
    allowed: &[Placeholder::X, Placeholder::Y],
};

fn check_templates(report: &mut ValidationReport, owner: &str, templates: &[Template], rule: &SlotRule) {
    if templates.is_empty() {
        report.push(format!("{owner}.templates"), "at least one template is required");
    }
    let mut ids = HashSet::new();
    for (i, t) in templates.iter().enumerate() {
        let path = format!("{owner}.templates[{i}]");
        if t.id.is_empty() {
            report.push(format!("{path}.id"), "template id is empty");
        } else if !ids.insert(t.id.as_str()) {
            report.push(format!("{path}.id"), format!("duplicate template id {}", t.id));
        }
        let found = match scan_placeholders(&t.text) {
            Ok(found) => found,
            Err(e) => {
                report.push(format!("{path}.text"), e.to_string());
                continue;
            }
        };
        if !t.placeholders.is_empty() && t.placeholders != found {
            report.push(
                format!("{path}.placeholders"),
                "placeholders do not match the template text",
            );
        }
        for slot in rule.required {
            if !found.contains(slot) {
                report.push(format!("{path}.text"), format!("missing placeholder {slot}"));
            }
        }
        for slot in &found {
            if !rule.allowed.contains(slot) {
                report.push(format!("{path}.text"), format!("placeholder {slot} not allowed here"));
            }
        }
    }
}

fn check_name<'a>(report: &mut ValidationReport, path: &str, name: &'a str, seen: &mut HashSet<&'a str>, kind: &str) {
    if name.trim().is_empty() {
        report.push(format!("{path}.name"), format!("{kind} name is empty"));
    } else if !seen.insert(name) {
        report.push(format!("{path}.name"), format!("duplicate {kind} name {name}"));
    }
}

/// Returns every invariant violation in `schema`. An empty report means the
/// schema is valid.
pub fn validate_schema(schema: &Schema) -> ValidationReport {
    let mut report = ValidationReport::default();
    let entity_names: HashSet<&str> = schema.entity_types.iter().map(|t| t.name.as_str()).collect();
    let event_names: HashSet<&str> = schema.event_types.iter().map(|t| t.name.as_str()).collect();

    let mut seen = HashSet::new();
    for (i, t) in schema.entity_types.iter().enumerate() {
        let path = format!("entity_types[{i}]");
        check_name(&mut report, &path, &t.name, &mut seen, "entity type");
        check_templates(&mut report, &path, &t.templates, &ENTITY_SLOTS);
    }

    let mut seen = HashSet::new();
    for (i, t) in schema.relation_types.iter().enumerate() {
        let path = format!("relation_types[{i}]");
        check_name(&mut report, &path, &t.name, &mut seen, "relation type");
        check_templates(&mut report, &path, &t.templates, &RELATION_SLOTS);
        if t.allowed_pairs.is_empty() {
            report.push(format!("{path}.allowed_pairs"), "at least one allowed pair is required");
        }
        for (j, pair) in t.allowed_pairs.iter().enumerate() {
            for (side, name) in [("left", &pair.left), ("right", &pair.right)] {
                if !entity_names.contains(name.as_str()) {
                    report.push(
                        format!("{path}.allowed_pairs[{j}].{side}"),
                        format!("unresolved entity type {name}"),
                    );
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, t) in schema.event_types.iter().enumerate() {
        let path = format!("event_types[{i}]");
        check_name(&mut report, &path, &t.name, &mut seen, "event type");
        let rule = match t.trigger_mode {
            TriggerMode::SentenceLevel => &SENTENCE_EVENT_SLOTS,
            TriggerMode::TriggerSpan => &TRIGGER_EVENT_SLOTS,
        };
        check_templates(&mut report, &path, &t.templates, rule);
    }

    let mut seen = HashSet::new();
    for (i, r) in schema.argument_roles.iter().enumerate() {
        let path = format!("argument_roles[{i}]");
        if r.name.trim().is_empty() {
            report.push(format!("{path}.name"), "argument role name is empty");
        } else if !seen.insert((r.owning_event.as_str(), r.name.as_str())) {
            report.push(
                format!("{path}.name"),
                format!("duplicate argument role {} for event {}", r.name, r.owning_event),
            );
        }
        if !event_names.contains(r.owning_event.as_str()) {
            report.push(
                format!("{path}.owning_event"),
                format!("unresolved event type {}", r.owning_event),
            );
        }
        check_templates(&mut report, &path, &r.templates, &ROLE_SLOTS);
        if r.allowed_filler_types.is_empty() {
            report.push(
                format!("{path}.allowed_filler_types"),
                "at least one filler type is required",
            );
        }
        for (j, name) in r.allowed_filler_types.iter().enumerate() {
            if !entity_names.contains(name.as_str()) {
                report.push(
                    format!("{path}.allowed_filler_types[{j}]"),
                    format!("unresolved entity type {name}"),
                );
            }
        }
    }
    report
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid schema: {0}")]
    Invalid(ValidationReport),
}

impl From<serde_json::Error> for SchemaError {
    fn from(e: serde_json::Error) -> Self {
        SchemaError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Parses and validates a schema file.
pub fn load_schema(source: &[u8]) -> Result<Schema, SchemaError> {
    let mut schema: Schema = serde_json::from_slice(source)?;
    schema.normalize();
    let report = validate_schema(&schema);
    if report.is_valid() {
        Ok(schema)
    } else {
        Err(SchemaError::Invalid(report))
    }
}

/// Serializes a schema in the file format accepted by [`load_schema`].
pub fn save_schema(schema: &Schema) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(schema).expect("schema serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person() -> EntityTypeDef {
        EntityTypeDef {
            name: "PERSON".into(),
            templates: vec![Template::new("t0", "{X} is a person")],
        }
    }

    #[test]
    fn scan_finds_slots_in_order() {
        assert_eq!(scan_placeholders("{Y} works for {X}").unwrap(), vec![Placeholder::Y, Placeholder::X]);
        assert_eq!(scan_placeholders("Someone died").unwrap(), vec![]);
        assert_eq!(
            scan_placeholders("{X} and {X}"),
            Err(TemplateSyntaxError::RepeatedPlaceholder(Placeholder::X))
        );
        assert_eq!(scan_placeholders("{Z} is"), Err(TemplateSyntaxError::StrayBrace(0)));
        assert_eq!(scan_placeholders("a } b"), Err(TemplateSyntaxError::StrayBrace(2)));
        assert_eq!(scan_placeholders("  "), Err(TemplateSyntaxError::Empty));
    }

    #[test]
    fn person_schema_is_valid() {
        let schema = Schema {
            entity_types: vec![person()],
            ..Default::default()
        };
        assert!(validate_schema(&schema).is_valid());
    }

    #[test]
    fn empty_schema_is_valid() {
        assert!(validate_schema(&Schema::default()).is_valid());
    }

    #[test]
    fn dangling_relation_type_reported_once() {
        let schema = Schema {
            entity_types: vec![person()],
            relation_types: vec![RelationTypeDef {
                name: "per:date_of_death".into(),
                templates: vec![Template::new("t0", "{X} died on {Y}")],
                allowed_pairs: vec![TypePair::new("PERSON", "DATE")],
            }],
            ..Default::default()
        };
        let report = validate_schema(&schema);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].message, "unresolved entity type DATE");
        assert_eq!(report.violations[0].path, "relation_types[0].allowed_pairs[0].right");
    }

    #[test]
    fn slot_rules_per_kind() {
        let mut schema = Schema {
            entity_types: vec![EntityTypeDef {
                name: "PERSON".into(),
                templates: vec![Template::new("t0", "A person")],
            }],
            event_types: vec![
                EventTypeDef {
                    name: "Life.Die".into(),
                    templates: vec![Template::new("t0", "Someone died")],
                    trigger_mode: TriggerMode::SentenceLevel,
                },
                EventTypeDef {
                    name: "Attack".into(),
                    templates: vec![Template::new("t0", "An attack")],
                    trigger_mode: TriggerMode::TriggerSpan,
                },
            ],
            ..Default::default()
        };
        let report = validate_schema(&schema);
        let paths: Vec<_> = report.violations.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(paths, vec!["entity_types[0].templates[0].text", "event_types[1].templates[0].text"]);

        schema.entity_types[0].templates[0] = Template::new("t0", "{X} is a person");
        schema.event_types[1].templates[0] = Template::new("t0", "{X} is an attack");
        assert!(validate_schema(&schema).is_valid());
    }

    #[test]
    fn role_templates_need_filler_slot() {
        let schema = Schema {
            entity_types: vec![person()],
            event_types: vec![EventTypeDef {
                name: "Life.Die".into(),
                templates: vec![Template::new("t0", "Someone died")],
                trigger_mode: TriggerMode::SentenceLevel,
            }],
            argument_roles: vec![ArgumentRoleDef {
                name: "Victim".into(),
                owning_event: "Life.Die".into(),
                templates: vec![
                    Template::new("t0", "{Y} died"),
                    Template::new("t1", "{X} happened to {Y}"),
                    Template::new("t2", "{X} happened"),
                ],
                allowed_filler_types: vec!["PERSON".into()],
            }],
            ..Default::default()
        };
        let report = validate_schema(&schema);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, "argument_roles[0].templates[2].text");
    }

    #[test]
    fn load_fills_ids_and_placeholders() {
        let src = br#"{"entity_types":[{"name":"PERSON","templates":[{"text":"{X} is a person"}]}]}"#;
        let schema = load_schema(src).unwrap();
        assert_eq!(schema.entity_types.len(), 1);
        let t = &schema.entity_types[0].templates[0];
        assert_eq!(t.id, "t0");
        assert_eq!(t.placeholders, vec![Placeholder::X]);
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(load_schema(b""), Err(SchemaError::Parse { .. })));
    }

    #[test]
    fn parse_error_carries_position() {
        match load_schema(b"{\n  \"entity_types\": [,]\n}") {
            Err(SchemaError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_type_is_validation_error() {
        let src = br#"{"entity_types":[
            {"name":"PERSON","templates":[{"text":"{X} is a person"}]},
            {"name":"PERSON","templates":[{"text":"{X} is someone"}]}]}"#;
        match load_schema(src) {
            Err(SchemaError::Invalid(report)) => {
                assert_eq!(report.violations[0].path, "entity_types[1].name")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn literal_braces_rejected() {
        let src = br#"{"entity_types":[{"name":"P","templates":[{"text":"{X} is {a} person"}]}]}"#;
        assert!(matches!(load_schema(src), Err(SchemaError::Invalid(_))));
    }

    #[test]
    fn same_type_on_both_sides_allowed() {
        let schema = Schema {
            entity_types: vec![person()],
            relation_types: vec![RelationTypeDef {
                name: "per:spouse".into(),
                templates: vec![Template::new("t0", "{X} is married to {Y}")],
                allowed_pairs: vec![TypePair::new("PERSON", "PERSON")],
            }],
            ..Default::default()
        };
        assert!(validate_schema(&schema).is_valid());
    }
}
