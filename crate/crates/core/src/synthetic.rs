//! Two generated URL families with clearly different byte statistics.
//!
//! Benign-looking URLs use dictionary-word hosts and shallow paths
//! (`https://www.gardenrecipes.com/news/travel.html`); malicious-looking URLs
//! use hex-heavy hosts and token-laden paths
//! (`http://9f3ac1e07b.d41c.net/a7e2/verify.php?token=…&session=…`).
//! Used for smoke runs and the end-to-end acceptance check when no real
//! corpus is at hand.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Label, LabeledUrl};

const WORDS: &[&str] = &[
    "garden", "recipes", "news", "travel", "music", "sports", "weather", "city", "library", "school",
    "market", "coffee", "bike", "photo", "family", "health", "science", "movie", "books", "house",
    "ocean", "mountain", "river", "forest", "kitchen", "design", "studio", "daily", "local", "world",
    "green", "blue", "summer", "winter", "market", "journal", "review", "guide", "story", "office",
    "support", "about", "contact", "events", "archive", "blog", "shop", "store", "games", "tech",
];

const TLDS: &[&str] = &["com", "org", "net", "jp", "co.uk", "edu", "io"];

const PAGES: &[&str] = &["index.html", "about.html", "list.php", "view", "home"];

const BAIT: &[&str] = &[
    "verify", "login", "signin", "update", "secure", "account", "webscr", "confirm", "auth", "billing",
];

const TOKEN_KEYS: &[&str] = &["token", "session", "id", "sid", "cmd", "ref", "hash", "key", "u", "ssl"];

fn hex(rng: &mut impl Rng, len: usize) -> String {
    const DIGITS: &[u8] = b"0123456789abcdef";
    (0..len).map(|_| DIGITS[rng.random_range(0..16)] as char).collect()
}

fn word(rng: &mut impl Rng) -> &'static str {
    WORDS.choose(rng).expect("word list is not empty")
}

fn benign(rng: &mut impl Rng) -> String {
    let scheme = if rng.random_bool(0.5) { "https" } else { "http" };
    let www = if rng.random_bool(0.6) { "www." } else { "" };
    let joiner = if rng.random_bool(0.2) { "-" } else { "" };
    let mut host = format!("{www}{}{joiner}{}", word(rng), word(rng));
    if rng.random_bool(0.3) {
        host.push_str(word(rng));
    }
    let tld = TLDS.choose(rng).expect("tld list is not empty");
    let path = match rng.random_range(0..5) {
        0 => String::new(),
        1 => "/".to_string(),
        2 => format!("/{}", word(rng)),
        3 => format!("/{}/{}.html", word(rng), word(rng)),
        _ => format!(
            "/{}/{}",
            word(rng),
            PAGES.choose(rng).expect("page list is not empty")
        ),
    };
    format!("{scheme}://{host}.{tld}{path}")
}

fn malicious(rng: &mut impl Rng) -> String {
    let scheme = if rng.random_bool(0.8) { "http" } else { "https" };
    let labels = rng.random_range(2..=3);
    let host: Vec<String> = (0..labels)
        .map(|i| {
            let len = if i == 0 { rng.random_range(8..=16) } else { rng.random_range(3..=6) };
            hex(rng, len)
        })
        .collect();
    let tld = TLDS.choose(rng).expect("tld list is not empty");
    let dir_len = rng.random_range(4..=8);
    let mut path = format!(
        "/{}/{}.php?",
        hex(rng, dir_len),
        BAIT.choose(rng).expect("bait list is not empty")
    );
    let params = rng.random_range(2..=4);
    for i in 0..params {
        if i > 0 {
            path.push('&');
        }
        let key = TOKEN_KEYS.choose(rng).expect("key list is not empty");
        let len = rng.random_range(8..=32);
        path.push_str(&format!("{key}={}", hex(rng, len)));
    }
    format!("{scheme}://{}.{tld}{path}", host.join("."))
}

/// Generates `per_class` URLs of each family: `(malicious, benign)`.
/// The output is a pure function of the arguments.
pub fn generate(per_class: usize, seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let black = (0..per_class)
        .map(|_| LabeledUrl::new(malicious(&mut rng), Label::Malicious))
        .collect();
    let white = (0..per_class)
        .map(|_| LabeledUrl::new(benign(&mut rng), Label::Benign))
        .collect();
    (
        Dataset::new(black, format!("synthetic malicious family (seed {seed})")),
        Dataset::new(white, format!("synthetic benign family (seed {seed})")),
    )
}
