//! Deterministic generator for the bundled mini fixture set.
//!
//! The mini fixtures are a small, self-contained review corpus plus a toy
//! embedding table and a ready-to-run configuration. They are committed under
//! `fixtures/mini/` so that examples, integration tests, and first-time users
//! have something to run the full pipeline against without downloading
//! anything. This module is the single source of truth for those files: the
//! committed bytes are regenerated with the `generate_fixtures` example and a
//! test asserts they never drift from the generator output.
//!
//! The corpus is synthetic but deliberately structured:
//!
//! * three balanced topics (`Restaurant`, `Hotel`, `Beauty`) stored in
//!   message metadata and recoverable by topic modelling;
//! * label 1 marks complaints (negative opinion words), label 0 marks
//!   non-complaints, with a small deterministic fraction of flipped labels so
//!   a trained classifier produces false positives and false negatives;
//! * message lengths spread across all four default length buckets;
//! * a few messages made mostly of invented words that the embedding table
//!   does not know, so the out-of-vocabulary segmentation has both sides;
//! * raw-text snippets (prices, times, phone numbers) that the structured
//!   pattern rules collapse into `tag_*` tokens;
//! * an embedding table with planted structure: a gender direction shared
//!   with the default anchor words, a sentiment direction separating the
//!   opinion vocabularies, and one direction per topic. A handful of
//!   occupation words carry calibrated gender components so the association
//!   scan finds both strong and significant leans, while the rest of the
//!   vocabulary stays under the flagging threshold.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::SeglensError;
use crate::Result;

/// Knobs for the mini fixture generator.
#[derive(Debug, Clone)]
pub struct MiniSpec {
    /// Number of messages to generate.
    pub messages: usize,
    /// Seed for the generator's random stream.
    pub seed: u64,
}

impl Default for MiniSpec {
    fn default() -> Self {
        MiniSpec {
            messages: 300,
            seed: 7,
        }
    }
}

/// The generated fixture files, as in-memory text.
#[derive(Debug, Clone)]
pub struct MiniFixture {
    /// JSON-lines corpus (`corpus.jsonl`).
    pub corpus_jsonl: String,
    /// Text-format embedding table (`embeddings.txt`).
    pub embeddings_txt: String,
    /// Pipeline configuration pointing at the two files (`config.json`).
    pub config_json: String,
}

const TOPICS: [&str; 3] = ["Restaurant", "Hotel", "Beauty"];

const RESTAURANT_WORDS: [&str; 20] = [
    "restaurant",
    "food",
    "menu",
    "pizza",
    "plate",
    "pasta",
    "coffee",
    "table",
    "dinner",
    "lunch",
    "meal",
    "chef",
    "dish",
    "sauce",
    "soup",
    "salad",
    "dessert",
    "kitchen",
    "portion",
    "burger",
];

const HOTEL_WORDS: [&str; 20] = [
    "hotel",
    "room",
    "bathroom",
    "bed",
    "lobby",
    "window",
    "carpet",
    "desk",
    "shower",
    "towels",
    "elevator",
    "breakfast",
    "suite",
    "view",
    "pillow",
    "blanket",
    "parking",
    "pool",
    "luggage",
    "hallway",
];

const BEAUTY_WORDS: [&str; 20] = [
    "salon",
    "hair",
    "nail",
    "dryer",
    "brush",
    "manicure",
    "polish",
    "spa",
    "massage",
    "facial",
    "appointment",
    "chair",
    "scissors",
    "shampoo",
    "mirror",
    "brows",
    "lashes",
    "wax",
    "color",
    "trim",
];

/// Staff-role words per topic. Complaints mention staff roles more often
/// than praise does, which pushes these words into the class-1 importance
/// tables where the gender-association scan will see them.
const ROLE_WORDS: [&[&str]; 3] = [
    &["waitress", "hostess", "waiter"],
    &["maid", "porter"],
    &["barber", "stylist"],
];

/// Words present in the corpus but deliberately absent from the embedding
/// table, so ordinary messages carry a small nonzero out-of-vocabulary
/// fraction.
const EMBEDDING_GAPS: [&str; 3] = ["brows", "lashes", "luggage"];

/// Positive opinion words; every entry is in the bundled positive lexicon.
const POSITIVE_WORDS: [&str; 15] = [
    "amazing",
    "delicious",
    "attentive",
    "comfortable",
    "wonderful",
    "friendly",
    "great",
    "excellent",
    "lovely",
    "perfect",
    "awesome",
    "charming",
    "spotless",
    "cozy",
    "best",
];

/// Negative opinion words; every entry is in the bundled negative lexicon.
const NEGATIVE_WORDS: [&str; 15] = [
    "awful",
    "horrible",
    "rude",
    "dirty",
    "terrible",
    "disgusting",
    "bland",
    "cold",
    "broken",
    "crappy",
    "filthy",
    "slow",
    "stale",
    "noisy",
    "worst",
];

/// Topic-neutral filler vocabulary.
const FILLER_WORDS: [&str; 28] = [
    "service",
    "staff",
    "place",
    "time",
    "experience",
    "visit",
    "day",
    "night",
    "week",
    "manager",
    "price",
    "value",
    "quality",
    "location",
    "area",
    "really",
    "very",
    "definitely",
    "extremely",
    "stay",
    "eat",
    "recommend",
    "avoid",
    "complain",
    "waited",
    "minutes",
    "hours",
    "problems",
];

/// Invented words with no embedding, used to build high out-of-vocabulary
/// messages.
const GIBBERISH_WORDS: [&str; 10] = [
    "zorblat", "quizzet", "vexume", "brintle", "squimb", "dravel", "plonk", "yindle", "crumph",
    "tazzle",
];

/// Person words that appear in running text now and then.
const PERSON_WORDS: [&str; 4] = ["gentleman", "lady", "man", "woman"];

/// Stopwords woven into the raw text for texture; normalization removes them.
const STOPWORD_TEXTURE: [&str; 8] = ["the", "was", "a", "and", "it", "so", "of", "to"];

/// Raw-text snippets that the bundled pattern rules turn into `tag_*` tokens.
const PATTERN_SNIPPETS: [&str; 5] = [
    "we paid $42 for this",
    "called 555-201-4417 twice",
    "booked for 7:30pm on 2024-11-03",
    "waited 45 minutes in line",
    "see www.example.com/reviews for photos",
];

/// Length targets cycled per message, covering all four default length
/// buckets: five short, eight medium, four long, three very long per cycle
/// of twenty.
const LENGTH_CYCLE: [(usize, usize); 20] = [
    (8, 18),
    (22, 48),
    (52, 78),
    (22, 48),
    (82, 108),
    (8, 18),
    (22, 48),
    (52, 78),
    (22, 48),
    (82, 108),
    (8, 18),
    (22, 48),
    (52, 78),
    (22, 48),
    (8, 18),
    (22, 48),
    (52, 78),
    (82, 108),
    (8, 18),
    (22, 48),
];

/// Embedding dimensionality of the mini table.
const DIM: usize = 16;

/// Axis indices inside the embedding space.
const AXIS_GENDER: usize = 0;
const AXIS_PERSON: usize = 1;
const AXIS_SENTIMENT: usize = 2;
const AXIS_TOPIC: [usize; 3] = [3, 4, 5];
const AXIS_COMMON: usize = 6;

/// Calibrated gender components. With the axis layout above, the
/// male-versus-female similarity difference of a word comes out near
/// `1.5 x component / norm`, so `0.15` lands well past the strong threshold
/// (|difference| > 0.2) and `0.08` lands between the significant and strong
/// thresholds (0.1 < |difference| <= 0.2). Positive values lean male.
const GENDER_PLANTS: [(&str, f64); 7] = [
    ("waitress", -0.16),
    ("maid", -0.15),
    ("hostess", -0.14),
    ("barber", 0.16),
    ("stylist", -0.08),
    ("waiter", 0.08),
    ("porter", 0.08),
];

const MALE_ANCHORS: [&str; 6] = ["man", "men", "he", "his", "sir", "gentleman"];
const FEMALE_ANCHORS: [&str; 6] = ["woman", "women", "she", "her", "madam", "lady"];

fn gender_component(word: &str) -> f64 {
    for (w, c) in GENDER_PLANTS {
        if w == word {
            return c;
        }
    }
    if MALE_ANCHORS.contains(&word) {
        return 0.8;
    }
    if FEMALE_ANCHORS.contains(&word) {
        return -0.8;
    }
    0.0
}

fn is_person_word(word: &str) -> bool {
    MALE_ANCHORS.contains(&word)
        || FEMALE_ANCHORS.contains(&word)
        || GENDER_PLANTS.iter().any(|(w, _)| *w == word)
}

/// Generate the mini fixture files in memory.
///
/// The same spec always produces byte-identical output.
#[must_use]
pub fn generate_mini(spec: &MiniSpec) -> MiniFixture {
    MiniFixture {
        corpus_jsonl: generate_corpus(spec),
        embeddings_txt: generate_embeddings(spec.seed),
        config_json: config_text(),
    }
}

/// Generate the fixture files and write them into `dir` as `corpus.jsonl`,
/// `embeddings.txt`, and `config.json`.
pub fn write_mini(dir: &Path, spec: &MiniSpec) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| SeglensError::WriteOutput {
        path: dir.display().to_string(),
        source,
    })?;
    let fixture = generate_mini(spec);
    for (name, text) in [
        ("corpus.jsonl", &fixture.corpus_jsonl),
        ("embeddings.txt", &fixture.embeddings_txt),
        ("config.json", &fixture.config_json),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

fn topic_pool(topic: &str) -> &'static [&'static str] {
    match topic {
        "Restaurant" => &RESTAURANT_WORDS,
        "Hotel" => &HOTEL_WORDS,
        _ => &BEAUTY_WORDS,
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn generate_corpus(spec: &MiniSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    for i in 0..spec.messages {
        let topic = TOPICS[i % 3];
        let true_label = ((i / 3) % 2) as u8;
        // A small deterministic fraction of stored labels disagrees with the
        // message content, so the reference classifier makes real errors.
        let flipped = i % 13 == 5;
        let label = if flipped { 1 - true_label } else { true_label };
        let oov_heavy = i % 37 == 7;
        let (lo, hi) = LENGTH_CYCLE[i % LENGTH_CYCLE.len()];
        let target = rng.gen_range(lo..=hi);

        let mut content: Vec<&str> = Vec::with_capacity(target + 4);
        if oov_heavy {
            // Mostly invented words: the out-of-vocabulary fraction clears
            // the default 0.5 boundary.
            let gibberish = target * 7 / 10;
            for _ in 0..gibberish {
                content.push(pick(&mut rng, &GIBBERISH_WORDS));
            }
            for _ in gibberish..target {
                content.push(pick(&mut rng, topic_pool(topic)));
            }
        } else {
            let opinion: &[&str] = if true_label == 1 {
                &NEGATIVE_WORDS
            } else {
                &POSITIVE_WORDS
            };
            let cross: &[&str] = if true_label == 1 {
                &POSITIVE_WORDS
            } else {
                &NEGATIVE_WORDS
            };
            let n_opinion = (2 + target / 12).min(target);
            for _ in 0..n_opinion {
                content.push(pick(&mut rng, opinion));
            }
            // Occasional mixed sentiment keeps some predictions uncertain.
            if rng.gen_bool(0.15) && content.len() < target {
                content.push(pick(&mut rng, cross));
            }
            // Complaints bring up staff roles far more often than praise
            // does, giving the role words a class-1 attribution skew.
            let roles = ROLE_WORDS[i % 3];
            let n_roles = if true_label == 1 {
                (1 + target / 30).min(target.saturating_sub(content.len()))
            } else {
                usize::from(rng.gen_bool(0.25))
            };
            for _ in 0..n_roles {
                content.push(pick(&mut rng, roles));
            }
            let n_topic = (target.saturating_sub(content.len())) * 3 / 5;
            for _ in 0..n_topic {
                content.push(pick(&mut rng, topic_pool(topic)));
            }
            if rng.gen_bool(0.2) && content.len() < target {
                content.push(pick(&mut rng, &PERSON_WORDS));
            }
            while content.len() < target {
                content.push(pick(&mut rng, &FILLER_WORDS));
            }
            content.shuffle(&mut rng);
        }

        let mut text = render_text(&mut rng, &content);
        if !oov_heavy && content.len() >= 12 && i % 9 == 4 {
            text.push(' ');
            text.push_str(PATTERN_SNIPPETS[(i / 9) % PATTERN_SNIPPETS.len()]);
            text.push('.');
        }

        let record = serde_json::json!({
            "id": format!("m{i:04}"),
            "text": text,
            "label": label,
            "metadata": {"topic": topic},
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

/// Join content words into sentence-cased raw text, weaving in stopwords
/// (which normalization later removes) and periods for texture.
fn render_text(rng: &mut ChaCha8Rng, content: &[&str]) -> String {
    let mut words: Vec<String> = Vec::with_capacity(content.len() * 3 / 2);
    for (i, w) in content.iter().enumerate() {
        if i > 0 && rng.gen_bool(0.22) {
            words.push(STOPWORD_TEXTURE[rng.gen_range(0..STOPWORD_TEXTURE.len())].to_string());
        }
        words.push((*w).to_string());
    }
    let mut text = String::new();
    let mut sentence_start = true;
    let mut since_break = 0usize;
    let n = words.len();
    for (i, w) in words.into_iter().enumerate() {
        let mut piece = w;
        if sentence_start {
            let mut chars = piece.chars();
            if let Some(first) = chars.next() {
                piece = first.to_uppercase().collect::<String>() + chars.as_str();
            }
            sentence_start = false;
        }
        since_break += 1;
        let last = i + 1 == n;
        let break_here = last || (since_break >= 9 && rng.gen_bool(0.5));
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(&piece);
        if break_here {
            text.push(if rng.gen_bool(0.15) { '!' } else { '.' });
            sentence_start = true;
            since_break = 0;
        }
    }
    text
}

/// Every embedded word, in a fixed order, tagged with its sentiment sign and
/// topic axis (if any).
fn embedded_vocabulary() -> Vec<(&'static str, f64, Option<usize>)> {
    let mut vocab: Vec<(&'static str, f64, Option<usize>)> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    let add = |vocab: &mut Vec<(&'static str, f64, Option<usize>)>,
                   seen: &mut Vec<&str>,
                   word: &'static str,
                   sentiment: f64,
                   topic: Option<usize>| {
        if EMBEDDING_GAPS.contains(&word) || seen.contains(&word) {
            return;
        }
        seen.push(word);
        vocab.push((word, sentiment, topic));
    };
    for (t, pool) in [RESTAURANT_WORDS, HOTEL_WORDS, BEAUTY_WORDS].iter().enumerate() {
        for w in *pool {
            add(&mut vocab, &mut seen, w, 0.0, Some(t));
        }
        for w in ROLE_WORDS[t] {
            add(&mut vocab, &mut seen, w, 0.0, Some(t));
        }
    }
    for w in POSITIVE_WORDS {
        add(&mut vocab, &mut seen, w, 0.55, None);
    }
    for w in NEGATIVE_WORDS {
        add(&mut vocab, &mut seen, w, -0.55, None);
    }
    for w in FILLER_WORDS {
        add(&mut vocab, &mut seen, w, 0.0, None);
    }
    for w in MALE_ANCHORS.iter().chain(&FEMALE_ANCHORS) {
        add(&mut vocab, &mut seen, w, 0.0, None);
    }
    for w in PERSON_WORDS {
        add(&mut vocab, &mut seen, w, 0.0, None);
    }
    vocab
}

fn generate_embeddings(seed: u64) -> String {
    // Separate stream from the corpus so adding messages never shifts vectors.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
    let mut out = String::new();
    for (word, sentiment, topic) in embedded_vocabulary() {
        let mut v = [0.0f64; DIM];
        v[AXIS_GENDER] = gender_component(word);
        if is_person_word(word) {
            v[AXIS_PERSON] = 0.45;
        }
        v[AXIS_SENTIMENT] = sentiment;
        if let Some(t) = topic {
            v[AXIS_TOPIC[t]] = 0.55;
        } else {
            // Mild topic flavor for non-topic words.
            for axis in AXIS_TOPIC {
                v[axis] = rng.gen_range(-0.08..0.08);
            }
        }
        // A component shared by every word keeps vector norms away from zero,
        // so per-word noise cannot dominate a direction and fake a gender
        // lean; it cancels in anchor-similarity differences.
        v[AXIS_COMMON] = 0.5;
        for slot in v.iter_mut().skip(7) {
            *slot = rng.gen_range(-0.12..0.12);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push_str(word);
        for x in v {
            out.push_str(&format!(" {:.6}", x / norm));
        }
        out.push('\n');
    }
    out
}

/// The checked-in pipeline configuration. Paths are relative to the config
/// file, so the fixture directory is self-contained; callers usually redirect
/// `out_dir` with a command-line override.
fn config_text() -> String {
    let value = serde_json::json!({
        "corpus": "corpus.jsonl",
        "embeddings": "embeddings.txt",
        "out_dir": "out",
        "seed": 7,
        "segmentation": {
            "metadata_field": "topic",
            "lda": {"topics": 3, "alpha": 0.5, "iterations": 300}
        },
        "aggregation": {"top_k": 40},
        "report": {"title": "Mini corpus diagnostics", "representatives": 3}
    });
    let mut text = serde_json::to_string_pretty(&value).expect("static config serializes");
    text.push('\n');
    text
}
