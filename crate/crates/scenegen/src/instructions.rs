//! Templated instruction grammars, tokenization, and semantic parsing into
//! machine-checkable constraints.
//!
//! Two domains share one fixed vocabulary:
//! - digit painting: `<Action> <ClassLabel>.` with five action verbs and the
//!   label written as a numeral or a word (100 strings total);
//! - scene building: `There is a <Attribute> <Shape>.` with 8 colors + 2
//!   sizes and 3 shapes (30 strings total).

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::scene::{Color, SceneState, Shape, Size};
use crate::rng::{derive, Stream};

pub const ACTION_VERBS: [&str; 5] = ["Draw", "Put", "Paint", "Add", "Create"];
pub const DIGIT_WORDS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Token id reserved for out-of-vocabulary words.
pub const UNKNOWN_ID: u32 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum InstructionError {
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("cannot parse instruction: {0:?}")]
    Parse(String),
    #[error("invalid record count: {0}")]
    InvalidCount(i64),
    #[error("image source missing: {0}")]
    SourceMissing(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Mnist,
    Scene,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Mnist => write!(f, "mnist"),
            DomainKind::Scene => write!(f, "scene"),
        }
    }
}

impl DomainKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mnist" => Some(DomainKind::Mnist),
            "scene" => Some(DomainKind::Scene),
            _ => None,
        }
    }
}

/// Scene attribute named by an instruction: exactly one of color or size.
/// The unspecified attribute is the diversity axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SceneAttr {
    Color(Color),
    Size(Size),
}

/// Parsed semantic content of an instruction, the oracle input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    Digit { class: u8 },
    Scene { shape: Shape, attr: SceneAttr },
}

impl Constraint {
    /// True iff the scene satisfies the constraint: some object matches the
    /// shape and the specified attribute ("there is a ..." is existential).
    pub fn check_scene(&self, state: &SceneState) -> bool {
        match self {
            Constraint::Digit { .. } => false,
            Constraint::Scene { shape, attr } => state.objects().iter().any(|o| {
                o.shape == *shape
                    && match attr {
                        SceneAttr::Color(c) => o.color == *c,
                        SceneAttr::Size(s) => o.size == *s,
                    }
            }),
        }
    }
}

/// An instruction string with its token ids and domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub text: String,
    pub tokens: Vec<u32>,
    pub domain: DomainKind,
}

impl Instruction {
    pub fn new(text: &str, vocab: &Vocabulary) -> Result<Self, InstructionError> {
        let domain = if text.starts_with("There is") {
            DomainKind::Scene
        } else {
            DomainKind::Mnist
        };
        Ok(Instruction {
            text: text.to_string(),
            tokens: vocab.tokenize(text)?,
            domain,
        })
    }
}

/// All 100 digit-painting instructions:
/// 5 verbs x 10 classes x 2 label formats (numeral, word).
pub fn mnist_grammar_enumerate() -> Vec<String> {
    let mut out = Vec::with_capacity(100);
    for verb in ACTION_VERBS {
        for class in 0..10usize {
            out.push(format!("{verb} {class}."));
            out.push(format!("{verb} {}.", DIGIT_WORDS[class]));
        }
    }
    out
}

/// All 30 scene instructions: (8 colors + 2 sizes) x 3 shapes.
pub fn scene_grammar_enumerate() -> Vec<String> {
    let mut out = Vec::with_capacity(30);
    for color in Color::ALL {
        for shape in Shape::ALL {
            out.push(format!("There is a {} {}.", color.name(), shape.name()));
        }
    }
    for size in Size::ALL {
        for shape in Shape::ALL {
            out.push(format!("There is a {} {}.", size.name(), shape.name()));
        }
    }
    out
}

/// Fixed vocabulary built from both grammars: lowercased, punctuation
/// stripped, alphabetically ordered, with id 0 reserved for unknown words.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::build()
    }
}

impl Vocabulary {
    pub fn build() -> Self {
        let mut words: Vec<String> = Vec::new();
        for s in mnist_grammar_enumerate().iter().chain(scene_grammar_enumerate().iter()) {
            for w in split_words(s) {
                if !words.contains(&w) {
                    words.push(w);
                }
            }
        }
        words.sort();
        let mut ids = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            ids.insert(w.clone(), (i + 1) as u32);
        }
        Vocabulary { words, ids }
    }

    /// Number of ids including the reserved unknown id.
    pub fn len(&self) -> usize {
        self.words.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> u32 {
        *self.ids.get(word).unwrap_or(&UNKNOWN_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        if id == UNKNOWN_ID {
            None
        } else {
            self.words.get(id as usize - 1).map(|s| s.as_str())
        }
    }

    /// Lowercases, strips punctuation, splits on whitespace, and maps each
    /// word through the vocabulary. Unknown words map to [`UNKNOWN_ID`].
    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, InstructionError> {
        let words = split_words(text);
        if words.is_empty() {
            return Err(InstructionError::EmptyInstruction);
        }
        Ok(words.iter().map(|w| self.id(w)).collect())
    }
}

fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Inverse of the template instantiation: total on both grammars.
pub fn parse_constraint(text: &str) -> Result<Constraint, InstructionError> {
    let words = split_words(text);
    if words.is_empty() {
        return Err(InstructionError::EmptyInstruction);
    }
    let err = || InstructionError::Parse(text.to_string());

    if words.len() == 2 {
        // "<verb> <label>."
        let verb_ok = ACTION_VERBS.iter().any(|v| v.to_lowercase() == words[0]);
        if !verb_ok {
            return Err(err());
        }
        let label = &words[1];
        if label.len() == 1 {
            if let Some(d) = label.chars().next().unwrap().to_digit(10) {
                return Ok(Constraint::Digit { class: d as u8 });
            }
        }
        if let Some(pos) = DIGIT_WORDS.iter().position(|w| w == label) {
            return Ok(Constraint::Digit { class: pos as u8 });
        }
        return Err(err());
    }

    if words.len() == 5 && words[0] == "there" && words[1] == "is" && words[2] == "a" {
        let shape = Shape::ALL
            .into_iter()
            .find(|s| s.name() == words[4])
            .ok_or_else(err)?;
        if let Some(color) = Color::ALL.into_iter().find(|c| c.name() == words[3]) {
            return Ok(Constraint::Scene {
                shape,
                attr: SceneAttr::Color(color),
            });
        }
        if let Some(size) = Size::ALL.into_iter().find(|s| s.name() == words[3]) {
            return Ok(Constraint::Scene {
                shape,
                attr: SceneAttr::Size(size),
            });
        }
        return Err(err());
    }
    Err(err())
}

// ── datasets ─────────────────────────────────────────────────────────

/// Image reference carried by a dataset record. Scene goals are identified
/// by the object placed in the scene (the renderer is deterministic, so the
/// tuple pins the image bit-exactly); digit goals reference an index into
/// the labeled digit set.
#[derive(Clone, Debug, PartialEq)]
pub enum GoalRef {
    DigitIndex(usize),
    SceneObject {
        shape: Shape,
        size: Size,
        color: Color,
        gx: u16,
        gy: u16,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub instruction: String,
    pub goal: GoalRef,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub domain: DomainKind,
    pub seed: u64,
    pub grid: u16,
    pub records: Vec<Record>,
    /// record indices per instruction string
    pub by_instruction: HashMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn assemble(domain: DomainKind, seed: u64, grid: u16, records: Vec<Record>) -> Self {
        let mut by_instruction: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            by_instruction.entry(r.instruction.clone()).or_default().push(i);
        }
        Dataset {
            domain,
            seed,
            grid,
            records,
            by_instruction,
        }
    }
}

/// Labeled digit images: `labels[i]` is the class of image `i`.
pub trait DigitSource {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn label(&self, idx: usize) -> u8;
}

/// Samples `count` (instruction, goal) records. An instruction is drawn
/// uniformly from the domain grammar, then a goal consistent with it:
/// a uniformly-chosen image of that class for digits, or a uniformly-chosen
/// unspecified attribute and grid location for scenes. Deterministic given
/// the seed; record `i` depends only on `(seed, i)`.
pub fn build_dataset(
    domain: DomainKind,
    count: i64,
    seed: u64,
    grid: u16,
    digits: Option<&dyn DigitSource>,
) -> Result<Dataset, InstructionError> {
    if count <= 0 {
        return Err(InstructionError::InvalidCount(count));
    }
    let records = match domain {
        DomainKind::Mnist => {
            let src = digits.ok_or_else(|| {
                InstructionError::SourceMissing("mnist dataset needs a digit source".into())
            })?;
            if src.is_empty() {
                return Err(InstructionError::SourceMissing("digit source is empty".into()));
            }
            // index images by class once
            let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); 10];
            for i in 0..src.len() {
                per_class[src.label(i) as usize].push(i);
            }
            if let Some(c) = per_class.iter().position(|v| v.is_empty()) {
                return Err(InstructionError::SourceMissing(format!(
                    "digit source has no images of class {c}"
                )));
            }
            let grammar = mnist_grammar_enumerate();
            (0..count as usize)
                .map(|i| {
                    let mut rng = record_rng(seed, i);
                    let instruction = grammar[rng.gen_range(0..grammar.len())].clone();
                    let class = match parse_constraint(&instruction).unwrap() {
                        Constraint::Digit { class } => class,
                        _ => unreachable!(),
                    };
                    let pool = &per_class[class as usize];
                    let goal = GoalRef::DigitIndex(pool[rng.gen_range(0..pool.len())]);
                    Record { instruction, goal }
                })
                .collect()
        }
        DomainKind::Scene => {
            let grammar = scene_grammar_enumerate();
            (0..count as usize)
                .map(|i| {
                    let mut rng = record_rng(seed, i);
                    let instruction = grammar[rng.gen_range(0..grammar.len())].clone();
                    let (shape, attr) = match parse_constraint(&instruction).unwrap() {
                        Constraint::Scene { shape, attr } => (shape, attr),
                        _ => unreachable!(),
                    };
                    let (color, size) = match attr {
                        SceneAttr::Color(c) => (c, Size::ALL[rng.gen_range(0..Size::ALL.len())]),
                        SceneAttr::Size(s) => {
                            (Color::ALL[rng.gen_range(0..Color::ALL.len())], s)
                        }
                    };
                    let gx = rng.gen_range(0..grid);
                    let gy = rng.gen_range(0..grid);
                    Record {
                        instruction,
                        goal: GoalRef::SceneObject {
                            shape,
                            size,
                            color,
                            gx,
                            gy,
                        },
                    }
                })
                .collect()
        }
    };
    Ok(Dataset::assemble(domain, seed, grid, records))
}

fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    derive(seed, Stream::Data, &[index as u64])
}
