//! Physical plans.
//!
//! One step per line:
//!
//! ```text
//! step    := name "=" op [ "(" [ arg { "," arg } ] ")" ] "<-" input
//! arg     := key ":" value
//! value   := integer | ident | "[" ident { "," ident } "]"
//! input   := ident            (an earlier step or a catalog relation)
//! ```
//!
//! `#` starts a comment. Example:
//!
//! ```text
//! s   = seq_scan() <- R
//! p   = project_hash(attrs:[a, b], seed:7, M:4) <- s
//! out = output() <- p
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::ProjectionSpec;
use crate::sort::SortKey;
use crate::storage::{Catalog, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    SeqScan,
    Materialize,
    ExternalSort {
        key: Vec<String>,
        #[serde(rename = "M", alias = "m", default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    ProjectSortNaive {
        attrs: Vec<String>,
        #[serde(rename = "M", alias = "m", default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    ProjectSortFused {
        attrs: Vec<String>,
        #[serde(rename = "M", alias = "m", default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    ProjectHash {
        attrs: Vec<String>,
        #[serde(rename = "M", alias = "m", default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    ProjectViaIndex {
        key: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prefix: Option<usize>,
    },
    Output,
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::SeqScan => "seq_scan",
            Operation::Materialize => "materialize",
            Operation::ExternalSort { .. } => "external_sort",
            Operation::ProjectSortNaive { .. } => "project_sort_naive",
            Operation::ProjectSortFused { .. } => "project_sort_fused",
            Operation::ProjectHash { .. } => "project_hash",
            Operation::ProjectViaIndex { .. } => "project_via_index",
            Operation::Output => "output",
        }
    }

    /// Per-step buffer override.
    pub fn buffers(&self) -> Option<usize> {
        match self {
            Operation::ExternalSort { m, .. }
            | Operation::ProjectSortNaive { m, .. }
            | Operation::ProjectSortFused { m, .. }
            | Operation::ProjectHash { m, .. } => *m,
            _ => None,
        }
    }

    /// Whether the input is a catalog relation rather than a step.
    pub fn reads_relation(&self) -> bool {
        matches!(self, Operation::SeqScan | Operation::ProjectViaIndex { .. })
    }

    fn args(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[String]| format!("[{}]", v.join(", "));
        let mut args = Vec::new();
        match self {
            Operation::ExternalSort { key, m } => {
                args.push(("key", list(key)));
                args.extend(m.map(|m| ("M", m.to_string())));
            }
            Operation::ProjectSortNaive { attrs, m } | Operation::ProjectSortFused { attrs, m } => {
                args.push(("attrs", list(attrs)));
                args.extend(m.map(|m| ("M", m.to_string())));
            }
            Operation::ProjectHash { attrs, m, seed } => {
                args.push(("attrs", list(attrs)));
                args.extend(seed.map(|s| ("seed", s.to_string())));
                args.extend(m.map(|m| ("M", m.to_string())));
            }
            Operation::ProjectViaIndex { key, prefix } => {
                args.push(("key", list(key)));
                args.extend(prefix.map(|p| ("prefix", p.to_string())));
            }
            Operation::SeqScan | Operation::Materialize | Operation::Output => {}
        }
        args
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub name: String,
    #[serde(flatten)]
    pub op: Operation,
    pub input: String,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .op
            .args()
            .into_iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect();
        write!(f, "{} = {}({}) <- {}", self.name, self.op.name(), args.join(", "), self.input)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalPlan {
    pub steps: Vec<PlanStep>,
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

/// A plan checked against a catalog, in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundPlan {
    /// Indices into `PhysicalPlan::steps`, leaf first, `output` last.
    pub order: Vec<usize>,
    /// Output schema of each step, by step index.
    pub schemas: Vec<Option<Schema>>,
}

fn invalid(step: usize, message: impl Into<String>) -> Error {
    Error::PlanValidation {
        step,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && !"=()[],:#<".contains(c))
}

impl PhysicalPlan {
    pub fn parse(text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let number = steps.len() + 1;
            steps.push(parse_step(line).map_err(|m| invalid(number, m))?);
        }
        Ok(PhysicalPlan { steps })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(0, format!("malformed JSON plan: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    /// Structural checks and schema propagation. Errors name the 1-based
    /// step they concern; 0 means the plan as a whole.
    pub fn bind(&self, catalog: &Catalog) -> Result<BoundPlan> {
        if self.steps.is_empty() {
            return Err(invalid(0, "plan has no steps"));
        }
        let mut by_name: HashMap<&str, usize> = HashMap::new();
        for (i, step) in self.steps.iter().enumerate() {
            if catalog.relations.contains_key(&step.name) {
                return Err(invalid(i + 1, format!("step name `{}` shadows a relation", step.name)));
            }
            if by_name.insert(&step.name, i).is_some() {
                return Err(invalid(i + 1, format!("step name `{}` is used twice", step.name)));
            }
        }
        let outputs: Vec<usize> = (0..self.steps.len())
            .filter(|&i| self.steps[i].op == Operation::Output)
            .collect();
        let out = match outputs.as_slice() {
            [one] => *one,
            [] => return Err(invalid(0, "plan has no output step")),
            [_, second, ..] => return Err(invalid(second + 1, "plan has more than one output step")),
        };

        // Walk back from the output; every op has one input, so the plan
        // must be a single chain.
        let mut order = vec![out];
        let mut seen = vec![false; self.steps.len()];
        seen[out] = true;
        let mut current = out;
        loop {
            let step = &self.steps[current];
            match by_name.get(step.input.as_str()) {
                Some(&prev) => {
                    if step.op.reads_relation() {
                        return Err(invalid(
                            current + 1,
                            format!("{} reads a relation, `{}` is a step", step.op.name(), step.input),
                        ));
                    }
                    if seen[prev] {
                        return Err(invalid(current + 1, format!("cycle through `{}`", step.input)));
                    }
                    seen[prev] = true;
                    order.push(prev);
                    current = prev;
                }
                None => {
                    catalog.relation(&step.input).map_err(|_| {
                        invalid(current + 1, format!("unknown relation or step `{}`", step.input))
                    })?;
                    if !step.op.reads_relation() {
                        return Err(invalid(
                            current + 1,
                            format!(
                                "{} takes a step as input; scan `{}` first",
                                step.op.name(),
                                step.input
                            ),
                        ));
                    }
                    break;
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(invalid(i + 1, format!("step `{}` does not feed the output", self.steps[i].name)));
        }
        order.reverse();

        let mut schemas: Vec<Option<Schema>> = vec![None; self.steps.len()];
        let mut input_schema: Option<Schema> = None;
        for &i in &order {
            let step = &self.steps[i];
            let number = i + 1;
            let at = |e: Error| invalid(number, e.to_string());
            if let Some(m) = step.op.buffers() {
                if m < crate::buffer::MIN_FRAMES {
                    return Err(invalid(number, format!("M must be at least {}, got {m}", crate::buffer::MIN_FRAMES)));
                }
            }
            let schema = match &step.op {
                Operation::SeqScan => catalog.relation(&step.input).map_err(at)?.schema.clone(),
                Operation::ProjectViaIndex { key, prefix } => {
                    let entry = catalog.relation(&step.input).map_err(at)?;
                    if entry.index(key).is_none() {
                        return Err(invalid(
                            number,
                            format!("no index on `{}`({})", step.input, key.join(", ")),
                        ));
                    }
                    let len = prefix.unwrap_or(key.len());
                    if len == 0 || len > key.len() {
                        return Err(invalid(number, format!("prefix {len} outside 1..={}", key.len())));
                    }
                    ProjectionSpec::new(&entry.schema, &key[..len]).map_err(at)?.output_schema().clone()
                }
                op => {
                    let input = input_schema.clone().expect("chain has a leaf");
                    match op {
                        Operation::ExternalSort { key, .. } => {
                            SortKey::new(&input, key).map_err(at)?;
                            input
                        }
                        Operation::ProjectSortNaive { attrs, .. }
                        | Operation::ProjectSortFused { attrs, .. }
                        | Operation::ProjectHash { attrs, .. } => {
                            ProjectionSpec::new(&input, attrs).map_err(at)?.output_schema().clone()
                        }
                        _ => input,
                    }
                }
            };
            input_schema = Some(schema.clone());
            schemas[i] = Some(schema);
        }
        Ok(BoundPlan { order, schemas })
    }
}

fn parse_step(line: &str) -> std::result::Result<PlanStep, String> {
    let (lhs, input) = line
        .rsplit_once("<-")
        .ok_or("missing `<- input`")?;
    let input = input.trim();
    if !is_ident(input) {
        return Err(format!("bad input name `{input}`"));
    }
    let (name, call) = lhs.split_once('=').ok_or("missing `name =`")?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(format!("bad step name `{name}`"));
    }
    let call = call.trim();
    let (op, args) = match call.find('(') {
        Some(open) => {
            let body = call[open + 1..]
                .strip_suffix(')')
                .ok_or("unbalanced parentheses")?;
            (call[..open].trim(), parse_args(body)?)
        }
        None => (call, BTreeMap::new()),
    };
    let op = build_operation(op, args)?;
    Ok(PlanStep {
        name: name.to_string(),
        op,
        input: input.to_string(),
    })
}

#[derive(Debug)]
enum ArgValue {
    Atom(String),
    List(Vec<String>),
}

fn parse_args(body: &str) -> std::result::Result<BTreeMap<String, ArgValue>, String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.checked_sub(1).ok_or("unbalanced brackets")?,
            ',' if depth == 0 => {
                parts.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err("unbalanced brackets".into());
    }
    parts.push(&body[start..]);
    if parts.len() == 1 && parts[0].trim().is_empty() {
        parts.clear();
    }

    let mut args = BTreeMap::new();
    for part in parts {
        let (key, value) = part
            .split_once(':')
            .ok_or_else(|| format!("argument `{}` is not key:value", part.trim()))?;
        let key = key.trim();
        let value = value.trim();
        let value = if let Some(inner) = value.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or("unbalanced brackets")?;
            let items: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
            if items.iter().any(|s| !is_ident(s)) {
                return Err(format!("bad attribute list for `{key}`"));
            }
            ArgValue::List(items)
        } else if is_ident(value) {
            ArgValue::Atom(value.to_string())
        } else {
            return Err(format!("bad value for `{key}`"));
        };
        let key = if key == "m" { "M" } else { key };
        if args.insert(key.to_string(), value).is_some() {
            return Err(format!("argument `{key}` given twice"));
        }
    }
    Ok(args)
}

fn build_operation(op: &str, mut args: BTreeMap<String, ArgValue>) -> std::result::Result<Operation, String> {
    let mut list = |key: &str| match args.remove(key) {
        Some(ArgValue::List(v)) => Ok(v),
        Some(ArgValue::Atom(a)) => Ok(vec![a]),
        None => Err(format!("{op} needs `{key}:[...]`")),
    };
    let operation = match op {
        "seq_scan" => Operation::SeqScan,
        "materialize" => Operation::Materialize,
        "output" => Operation::Output,
        "external_sort" => Operation::ExternalSort {
            key: list("key")?,
            m: None,
        },
        "project_sort_naive" => Operation::ProjectSortNaive {
            attrs: list("attrs")?,
            m: None,
        },
        "project_sort_fused" => Operation::ProjectSortFused {
            attrs: list("attrs")?,
            m: None,
        },
        "project_hash" => Operation::ProjectHash {
            attrs: list("attrs")?,
            m: None,
            seed: None,
        },
        "project_via_index" => Operation::ProjectViaIndex {
            key: list("key")?,
            prefix: None,
        },
        other => return Err(format!("unknown operation `{other}`")),
    };
    let mut number = |key: &str| -> std::result::Result<Option<u64>, String> {
        match args.remove(key) {
            None => Ok(None),
            Some(ArgValue::Atom(a)) => a
                .parse()
                .map(Some)
                .map_err(|_| format!("`{key}` must be a non-negative integer, got `{a}`")),
            Some(ArgValue::List(_)) => Err(format!("`{key}` must be a number")),
        }
    };
    let operation = match operation {
        Operation::ExternalSort { key, .. } => Operation::ExternalSort {
            key,
            m: number("M")?.map(|m| m as usize),
        },
        Operation::ProjectSortNaive { attrs, .. } => Operation::ProjectSortNaive {
            attrs,
            m: number("M")?.map(|m| m as usize),
        },
        Operation::ProjectSortFused { attrs, .. } => Operation::ProjectSortFused {
            attrs,
            m: number("M")?.map(|m| m as usize),
        },
        Operation::ProjectHash { attrs, .. } => Operation::ProjectHash {
            attrs,
            m: number("M")?.map(|m| m as usize),
            seed: number("seed")?,
        },
        Operation::ProjectViaIndex { key, .. } => Operation::ProjectViaIndex {
            key,
            prefix: number("prefix")?.map(|p| p as usize),
        },
        other => other,
    };
    if let Some(key) = args.keys().next() {
        return Err(format!("{op} does not take `{key}`"));
    }
    Ok(operation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::{CatalogEntry, IndexDescriptor};
    use proptest::prelude::*;

    fn catalog() -> Catalog {
        let mut c = Catalog::new(4096, 8);
        c.relations.insert(
            "R".into(),
            CatalogEntry {
                name: "R".into(),
                file: "R.heap".into(),
                schema: Schema::parse("a:int,b:str8,c:int").unwrap(),
                page_count: 3,
                tuple_count: 100,
                indexes: vec![IndexDescriptor {
                    key_attrs: vec!["a".into(), "b".into()],
                    file: "R.a+b.idx".into(),
                    entry_count: 100,
                    page_count: 2,
                }],
            },
        );
        c
    }

    fn step_of(err: Error) -> usize {
        match err {
            Error::PlanValidation { step, .. } => step,
            other => panic!("not a validation error: {other}"),
        }
    }

    #[test]
    fn minimal_plan() {
        let plan = PhysicalPlan::parse("s = seq_scan() <- R\nout = output() <- s\n").unwrap();
        assert_eq!(plan.steps.len(), 2);
        let bound = plan.bind(&catalog()).unwrap();
        assert_eq!(bound.order, vec![0, 1]);
    }

    #[test]
    fn comments_blank_lines_and_bare_ops() {
        let text = "# header\n\nout = output <- s   # last\ns = seq_scan <- R\n";
        let plan = PhysicalPlan::parse(text).unwrap();
        assert_eq!(plan.bind(&catalog()).unwrap().order, vec![1, 0]);
    }

    #[test]
    fn arguments_are_typed() {
        let plan = PhysicalPlan::parse(
            "p = project_hash(attrs:[c, a], seed:7, m:4) <- s\nq = project_via_index(key:[a,b], prefix:1) <- R",
        )
        .unwrap();
        assert_eq!(
            plan.steps[0].op,
            Operation::ProjectHash {
                attrs: vec!["c".into(), "a".into()],
                m: Some(4),
                seed: Some(7)
            }
        );
        assert_eq!(
            plan.steps[1].op,
            Operation::ProjectViaIndex {
                key: vec!["a".into(), "b".into()],
                prefix: Some(1)
            }
        );
    }

    #[test]
    fn syntax_errors_name_the_step() {
        for (text, step) in [
            ("s = seq_scan() <- R\nx = frobnicate() <- s", 2),
            ("s = seq_scan() R", 1),
            ("s = seq_scan() <- R\nt = external_sort(M:4) <- s", 2),
            ("s = seq_scan() <- R\nt = external_sort(key:[a], M:x) <- s", 2),
            ("s = seq_scan() <- R\nt = external_sort(key:[a], seed:1) <- s", 2),
            ("s = seq_scan() <- R\nt = external_sort(key:[a, b <- s", 2),
            ("s = seq_scan() <- R\nt = materialize() <- s\nu = materialize(M:3, M:4) <- t", 3),
        ] {
            assert_eq!(step_of(PhysicalPlan::parse(text).unwrap_err()), step, "{text}");
        }
    }

    #[test]
    fn binding_errors_name_the_step() {
        let c = catalog();
        for (text, step) in [
            ("s = seq_scan() <- Missing\nout = output() <- s", 1),
            ("s = seq_scan() <- R\nt = external_sort(key:[z]) <- s\nout = output() <- t", 2),
            ("s = seq_scan() <- R\np = project_hash(attrs:[a, a]) <- s\nout = output() <- p", 2),
            ("s = seq_scan() <- R\nt = external_sort(key:[a], M:2) <- s\nout = output() <- t", 2),
            ("s = seq_scan() <- R\nout = output() <- s\nx = output() <- s", 3),
            ("s = seq_scan() <- R\nt = materialize() <- s", 0),
            ("s = seq_scan() <- R\nt = materialize() <- s\nout = output() <- s", 2),
            ("a = materialize() <- b\nb = materialize() <- a\nout = output() <- a", 2),
            ("p = materialize() <- R\nout = output() <- p", 1),
            ("s = seq_scan() <- R\nt = seq_scan() <- s\nout = output() <- t", 2),
            ("i = project_via_index(key:[b]) <- R\nout = output() <- i", 1),
            ("i = project_via_index(key:[a, b], prefix:3) <- R\nout = output() <- i", 1),
            ("R = seq_scan() <- R\nout = output() <- R", 1),
        ] {
            let plan = PhysicalPlan::parse(text).unwrap();
            assert_eq!(step_of(plan.bind(&c).unwrap_err()), step, "{text}");
        }
    }

    #[test]
    fn schemas_propagate() {
        let plan = PhysicalPlan::parse(
            "s = seq_scan() <- R\np = project_sort_fused(attrs:[c, b]) <- s\nt = external_sort(key:[b]) <- p\nout = output() <- t",
        )
        .unwrap();
        let bound = plan.bind(&catalog()).unwrap();
        assert_eq!(bound.schemas[3].as_ref().unwrap().to_string(), "c:int,b:str8");
        let plan = PhysicalPlan::parse("i = project_via_index(key:[a, b], prefix:1) <- R\nout = output() <- i").unwrap();
        assert_eq!(plan.bind(&catalog()).unwrap().schemas[1].as_ref().unwrap().to_string(), "a:int");
    }

    #[test]
    fn json_mirror() {
        let text = "s = seq_scan() <- R\np = project_hash(attrs:[a], seed:3, M:5) <- s\nout = output() <- p\n";
        let plan = PhysicalPlan::parse(text).unwrap();
        let json = plan.to_json();
        assert!(json.contains("\"op\": \"project_hash\""), "{json}");
        assert!(json.contains("\"M\": 5"), "{json}");
        assert_eq!(PhysicalPlan::from_json(&json).unwrap(), plan);
        assert_eq!(plan.to_string(), text);
        assert!(matches!(PhysicalPlan::from_json("{"), Err(Error::PlanValidation { step: 0, .. })));
    }

    fn ident() -> BoxedStrategy<String> {
        "[a-z][a-z0-9_]{0,6}".boxed()
    }

    fn operation() -> impl Strategy<Value = Operation> {
        let attrs = prop::collection::vec(ident(), 1..4);
        let m = prop::option::of(3usize..64);
        prop_oneof![
            Just(Operation::SeqScan),
            Just(Operation::Materialize),
            Just(Operation::Output),
            (attrs.clone(), m.clone()).prop_map(|(key, m)| Operation::ExternalSort { key, m }),
            (attrs.clone(), m.clone()).prop_map(|(attrs, m)| Operation::ProjectSortNaive { attrs, m }),
            (attrs.clone(), m.clone()).prop_map(|(attrs, m)| Operation::ProjectSortFused { attrs, m }),
            (attrs.clone(), m, prop::option::of(any::<u64>()))
                .prop_map(|(attrs, m, seed)| Operation::ProjectHash { attrs, m, seed }),
            (attrs, prop::option::of(1usize..4))
                .prop_map(|(key, prefix)| Operation::ProjectViaIndex { key, prefix }),
        ]
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(steps in prop::collection::vec((ident(), operation(), ident()), 1..8)) {
            let plan = PhysicalPlan {
                steps: steps
                    .into_iter()
                    .map(|(name, op, input)| PlanStep { name, op, input })
                    .collect(),
            };
            prop_assert_eq!(PhysicalPlan::parse(&plan.to_string()).unwrap(), plan.clone());
            prop_assert_eq!(PhysicalPlan::from_json(&plan.to_json()).unwrap(), plan);
        }
    }
}
