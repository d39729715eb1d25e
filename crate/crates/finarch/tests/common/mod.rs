//! Shared builders for integration tests: deterministic synthetic corpora
//! in the upstream dataset schemas.
#![allow(dead_code)] // each test target compiles its own copy

use std::path::Path;

use serde_json::{json, Value};

/// Deterministic pseudo-random stream without external deps; good enough
/// for shaping fixture content.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    pub fn pick(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

fn doc_fields(d: usize, rng: &mut Lcg) -> (Value, Value, Value) {
    let base = 100 + rng.pick(900);
    let growth = 1 + rng.pick(80);
    let pre = json!([
        format!("Company C{d} reported steady performance across fiscal 2021."),
        format!("Segment S{d} volumes improved by roughly {growth} units."),
    ]);
    let post = json!([format!("Figures for company C{d} are in millions.")]);
    let table = json!([
        ["", "2020", "2021"],
        [format!("metric-{d}-revenue"), format!("{base}"), format!("{}", base + growth)],
        [
            format!("metric-{d}-margin"),
            format!("{}.{}%", 10 + rng.pick(10), rng.pick(10)),
            format!("{}.{}%", 10 + rng.pick(10), rng.pick(10))
        ],
        [format!("metric-{d}-costs"), format!("{}", base / 2), format!("{}", base / 2 + 7)],
    ]);
    (pre, table, post)
}

/// Upstream-schema ConvFinQA JSON with `n_dialogs` dialogs of 2 or 3
/// turns; first turns are self-contained, later turns referential.
pub fn upstream_convfinqa_json(n_dialogs: usize, seed: u64) -> Value {
    let mut rng = Lcg::new(seed);
    let mut items = Vec::new();
    for d in 0..n_dialogs {
        let (pre, table, post) = doc_fields(d, &mut rng);
        let turns = 2 + (rng.pick(2) as usize);
        let mut questions = vec![format!(
            "what was the reported revenue of company C{d} in 2021?"
        )];
        let mut answers = vec![json!(format!("{}", 100 + rng.pick(900)))];
        if turns >= 2 {
            questions.push("and what was it in the previous year?".into());
            answers.push(json!(format!("{}", 100 + rng.pick(900))));
        }
        if turns >= 3 {
            questions.push("what is the percentage change between those values?".into());
            answers.push(json!(format!("{}.{}%", rng.pick(30), rng.pick(10))));
        }
        items.push(json!({
            "id": format!("conv-{d:04}"),
            "pre_text": pre,
            "post_text": post,
            "table": table,
            "annotation": {
                "dialogue_break": questions,
                "exe_ans_list": answers,
            }
        }));
    }
    Value::Array(items)
}

/// Upstream-schema FinQA JSON with `n` single-question items.
pub fn upstream_finqa_json(n: usize, seed: u64) -> Value {
    let mut rng = Lcg::new(seed);
    let mut items = Vec::new();
    for d in 0..n {
        let (pre, table, post) = doc_fields(d, &mut rng);
        let percentish = rng.pick(3) == 0;
        let (question, answer) = if percentish {
            (
                format!("what was the percentage margin of company C{d} in 2021?"),
                json!(format!("{}.{}%", 10 + rng.pick(10), rng.pick(10))),
            )
        } else {
            (
                format!("what was the reported revenue of company C{d} in 2021?"),
                json!(format!("{}", 100 + rng.pick(900))),
            )
        };
        items.push(json!({
            "id": format!("fin-{d:04}"),
            "pre_text": pre,
            "post_text": post,
            "table": table,
            "qa": {"question": question, "answer": answer, "program": "none"}
        }));
    }
    Value::Array(items)
}

pub fn write_json(path: &Path, value: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}
