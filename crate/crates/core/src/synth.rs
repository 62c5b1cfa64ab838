//! Synthetic product catalog with known values and spelling variants.
//!
//! Values are invented syllable words, optionally followed by a company-style
//! word. Titles mix a fixed product vocabulary with the value placed at the
//! start, after a product-line word, in the middle or after "by". Each title's
//! copy of the value passes through case mangling, special-character
//! variation, abbreviation and a one-character typo, in that order, each with
//! its own rate. The generator also returns the table mapping every emitted
//! variant to its canonical value.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeSpan, CorpusRecord, LabelAlphabet, Provenance, TaggedTitle, TokenizedTitle};
use crate::error::{Error, Result};
use crate::normalize::{key_form, NormalizationTable};

const ADJECTIVES: &[&str] = &[
    "Stainless", "Wireless", "Portable", "Classic", "Premium", "Deluxe", "Vintage", "Modern", "Rustic", "Compact",
    "Heavy", "Duty", "Soft", "Large", "Small", "Mini", "Ultra", "Slim", "Round", "Square", "Folding", "Adjustable",
    "Waterproof", "Organic", "Natural", "Cotton", "Leather", "Wooden", "Metal", "Glass", "Plastic", "Ceramic",
    "Digital", "Electric", "Outdoor", "Indoor", "Kids", "Womens", "Mens", "Unisex", "Decorative", "Engraved",
];

const NOUNS: &[&str] = &[
    "Bottle", "Lamp", "Chair", "Gloves", "Jacket", "Headphones", "Cable", "Mug", "Pillow", "Poster", "Scarf", "Ring",
    "Stool", "Light", "Charger", "Case", "Blanket", "Towel", "Backpack", "Wallet", "Watch", "Speaker", "Keyboard",
    "Mouse", "Table", "Shelf", "Rug", "Curtain", "Sneakers", "Boots", "Hat", "Socks", "Shirt", "Dress", "Jeans",
    "Belt", "Sunglasses", "Umbrella", "Tent", "Cooler", "Grill", "Pan", "Knife", "Blender", "Kettle", "Toaster",
    "Vacuum", "Drill", "Hammer", "Plaque", "Phone", "Print", "Card", "Strip", "Supply",
];

const COLORS: &[&str] = &[
    "Black", "White", "Red", "Blue", "Green", "Gray", "Silver", "Brown", "Pink", "Purple", "Navy", "Beige",
];

const UNITS: &[&str] = &["oz", "inch", "Pack", "Count", "Piece", "ft", "lb", "mm"];

const COMPANY_WORDS: &[&str] = &[
    "Global", "Home", "Lighting", "Industries", "Brands", "Outdoors", "Products", "Designs", "Co", "Inc", "Studio",
    "Works", "Group", "Labs",
];

const PRODUCT_LINES: usize = 25;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr", "pl", "gl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ee"];
const CODAS: &[&str] = &["", "", "", "n", "r", "x", "l", "m", "k", "s"];

/// How many titles mention each value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TitleCount {
    Fixed { count: usize },
    /// Geometric on `1, 2, ...` with the given mean.
    Geometric { mean: f64 },
    /// `Pr(n) ∝ n^-exponent` on `1..=max`.
    Zipf { exponent: f64, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub attribute: String,
    pub num_values: usize,
    pub titles_per_value: TitleCount,
    /// Relative weights of the value positions: start of title, after a
    /// recurring product-line word, middle, after "by" at the end.
    pub position_weights: [f64; 4],
    pub case_rate: f64,
    /// Rate of titles written entirely in upper or lower case.
    pub title_case_rate: f64,
    pub special_char_rate: f64,
    pub abbreviation_rate: f64,
    pub typo_rate: f64,
    /// Rate of an extra "for <other value> <noun>" phrase after the product noun.
    pub mention_rate: f64,
    /// Rate of made-up capitalized series names ahead of the product noun.
    pub series_rate: f64,
    /// Share of all titles that carry no value.
    pub unbranded_fraction: f64,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            attribute: "brand".into(),
            num_values: 500,
            titles_per_value: TitleCount::Geometric { mean: 3.6 },
            position_weights: [0.6, 0.1, 0.1, 0.2],
            case_rate: 0.1,
            title_case_rate: 0.1,
            special_char_rate: 0.1,
            abbreviation_rate: 0.05,
            typo_rate: 0.1,
            mention_rate: 0.1,
            series_rate: 0.35,
            unbranded_fraction: 0.1,
            rng_seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Every title carries its value verbatim at a random position.
    pub fn noiseless(self) -> Self {
        GeneratorConfig {
            case_rate: 0.0,
            title_case_rate: 0.0,
            special_char_rate: 0.0,
            abbreviation_rate: 0.0,
            typo_rate: 0.0,
            mention_rate: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_values == 0 {
            return Err(Error::InvalidConfig("at least one value is required".into()));
        }
        let rates = [
            self.case_rate,
            self.title_case_rate,
            self.special_char_rate,
            self.abbreviation_rate,
            self.typo_rate,
            self.mention_rate,
            self.series_rate,
            self.unbranded_fraction,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig("rates must lie in [0, 1]".into()));
        }
        if self.unbranded_fraction >= 1.0 {
            return Err(Error::InvalidConfig("unbranded fraction must be below 1".into()));
        }
        if self.position_weights.iter().any(|w| !(*w >= 0.0)) || self.position_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("position weights must be non-negative and not all zero".into()));
        }
        match self.titles_per_value {
            TitleCount::Fixed { count: 0 } => Err(Error::InvalidConfig("fixed count must be >= 1".into())),
            TitleCount::Geometric { mean } if !(mean >= 1.0) => Err(Error::InvalidConfig("geometric mean must be >= 1".into())),
            TitleCount::Zipf { exponent, max } if max == 0 || !(exponent >= 0.0) => {
                Err(Error::InvalidConfig("zipf needs max >= 1 and a non-negative exponent".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCatalog {
    pub records: Vec<CorpusRecord>,
    pub titles: Vec<TaggedTitle>,
    /// Canonical value of each title, `None` for unbranded ones.
    pub canonical: Vec<Option<String>>,
    /// Every emitted variant (and every canonical value) to its canonical value.
    pub table: NormalizationTable,
    pub values: Vec<String>,
}

struct Generator<'a> {
    rng: ChaCha8Rng,
    config: &'a GeneratorConfig,
    reserved: BTreeSet<String>,
    /// Recurring product-line names that may precede the value.
    lines: Vec<String>,
    /// Key form -> canonical value.
    owner: HashMap<String, String>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

impl Generator<'_> {
    fn pick<'b>(&mut self, items: &'b [&'b str]) -> &'b str {
        items[self.rng.gen_range(0..items.len())]
    }

    fn syllable_word(&mut self) -> String {
        let n = self.rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..n {
            w.push_str(self.pick(ONSETS));
            w.push_str(self.pick(VOWELS));
        }
        w.push_str(self.pick(CODAS));
        capitalize(&w)
    }

    fn value(&mut self) -> Vec<String> {
        loop {
            let extra = match self.rng.gen_range(0..100) {
                0..50 => 0,
                50..85 => 1,
                _ => 2,
            };
            let mut tokens = vec![self.syllable_word()];
            for _ in 0..extra {
                let t = if self.rng.gen_bool(0.8) { self.pick(COMPANY_WORDS).to_string() } else { self.syllable_word() };
                if !tokens.contains(&t) {
                    tokens.push(t);
                }
            }
            let key = key_form(&tokens.join(" "));
            let head = tokens[0].to_lowercase();
            if !self.reserved.contains(&head) && !self.owner.contains_key(&key) {
                self.reserved.insert(head);
                return tokens;
            }
        }
    }

    fn model_number(&mut self) -> String {
        let letters: String = (0..self.rng.gen_range(2..=3)).map(|_| self.rng.gen_range(b'A'..=b'Z') as char).collect();
        let digits: String = (0..self.rng.gen_range(3..=5)).map(|_| self.rng.gen_range(b'0'..=b'9') as char).collect();
        let mut code = format!("{letters}{digits}");
        if self.rng.gen_bool(0.3) {
            code.push(self.rng.gen_range(b'A'..=b'Z') as char);
        }
        code
    }

    /// A capitalized word that is never the first token of a value.
    fn series_word(&mut self) -> String {
        loop {
            let w = self.syllable_word();
            if !self.reserved.contains(&w.to_lowercase()) {
                return w;
            }
        }
    }

    /// Adjectives, an optional series name, and the product noun last.
    fn product_phrase(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        for _ in 0..self.rng.gen_range(0..=2) {
            out.push(self.pick(ADJECTIVES).to_string());
        }
        if self.rng.gen_bool(self.config.series_rate) {
            let w = self.series_word();
            out.push(w);
        }
        out.push(self.pick(NOUNS).to_string());
        out
    }

    fn extras(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        for _ in 0..self.rng.gen_range(0..=3) {
            match self.rng.gen_range(0..5) {
                0 => out.push(self.pick(COLORS).to_string()),
                1 => out.extend(["in".to_string(), self.pick(COLORS).to_string()]),
                2 => out.extend([self.rng.gen_range(1..=48).to_string(), self.pick(UNITS).to_string()]),
                3 => out.push(self.model_number()),
                _ => {
                    out.push("with".into());
                    out.extend(self.product_phrase());
                }
            }
        }
        out
    }

    /// Noisy copy of `value`. A variant that would collide with another
    /// value is redrawn a few times before falling back to the canonical form.
    fn variant(&mut self, value: &[String], canonical: &str) -> Vec<String> {
        for _ in 0..10 {
            let v = self.noisy(value);
            let key = key_form(&v.join(" "));
            let clean = !key.is_empty()
                && v.iter().all(|t| !t.is_empty() && !self.reserved_vocab(t))
                && self.owner.get(&key).is_none_or(|c| c == canonical);
            if clean {
                self.owner.insert(key, canonical.to_string());
                return v;
            }
        }
        value.to_vec()
    }

    fn noisy(&mut self, value: &[String]) -> Vec<String> {
        let cfg = self.config;
        let mut v: Vec<String> = value.to_vec();
        if self.rng.gen_bool(cfg.case_rate) {
            let upper = self.rng.gen_bool(0.5);
            v = v.iter().map(|t| if upper { t.to_uppercase() } else { t.to_lowercase() }).collect();
        }
        if self.rng.gen_bool(cfg.special_char_rate) {
            v = self.special_chars(v);
        }
        if self.rng.gen_bool(cfg.abbreviation_rate) {
            v = abbreviate(v);
        }
        if self.rng.gen_bool(cfg.typo_rate) {
            v = self.typo(v);
        }
        v
    }

    fn reserved_vocab(&self, token: &str) -> bool {
        let t = token.to_lowercase();
        ADJECTIVES.iter().chain(NOUNS).chain(COLORS).chain(UNITS).any(|w| w.to_lowercase() == t)
            || ["by", "for", "with", "in", "-"].contains(&t.as_str())
    }

    fn special_chars(&mut self, v: Vec<String>) -> Vec<String> {
        if v.len() > 1 {
            let glue = if self.rng.gen_bool(0.5) { "-" } else { "" };
            let mut out = vec![format!("{}{glue}{}", v[0], v[1])];
            out.extend(v[2..].iter().cloned());
            return out;
        }
        let w = &v[0];
        let chars: Vec<char> = w.chars().collect();
        if chars.len() < 4 {
            return v;
        }
        let at = self.rng.gen_range(2..chars.len() - 1);
        let mark = if self.rng.gen_bool(0.5) { '-' } else { '\'' };
        let mut s: String = chars[..at].iter().collect();
        s.push(mark);
        s.extend(&chars[at..]);
        vec![s]
    }

    fn typo(&mut self, mut v: Vec<String>) -> Vec<String> {
        let letter_count = |t: &String| t.chars().filter(|c| c.is_alphabetic()).count();
        let editable: Vec<usize> = (0..v.len()).filter(|&i| letter_count(&v[i]) >= 3).collect();
        let Some(&ti) = editable.get(self.rng.gen_range(0..editable.len().max(1))) else {
            return v;
        };
        let chars: Vec<char> = v[ti].chars().collect();
        let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphabetic()).collect();
        let mut c = chars.clone();
        let at = letters[self.rng.gen_range(1..letters.len())];
        match self.rng.gen_range(0..3) {
            0 => {
                let orig = c[at].to_ascii_lowercase();
                let mut sub = orig;
                while sub == orig {
                    sub = self.rng.gen_range(b'a'..=b'z') as char;
                }
                c[at] = if c[at].is_uppercase() { sub.to_ascii_uppercase() } else { sub };
            }
            1 => {
                c.remove(at);
            }
            _ => {
                if at + 1 < c.len() && c[at] != c[at + 1] {
                    c.swap(at, at + 1);
                } else {
                    c.remove(at);
                }
            }
        }
        v[ti] = c.into_iter().collect();
        v
    }

    fn count(&mut self) -> usize {
        match self.config.titles_per_value {
            TitleCount::Fixed { count } => count,
            TitleCount::Geometric { mean } => {
                let stop = 1.0 / mean;
                let mut n = 1;
                while !self.rng.gen_bool(stop) {
                    n += 1;
                }
                n
            }
            TitleCount::Zipf { exponent, max } => {
                let weights: Vec<f64> = (1..=max).map(|n| (n as f64).powf(-exponent)).collect();
                let total: f64 = weights.iter().sum();
                let mut u = self.rng.gen::<f64>() * total;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        return i + 1;
                    }
                    u -= w;
                }
                max
            }
        }
    }

    fn position(&mut self) -> usize {
        let w = self.config.position_weights;
        let mut u = self.rng.gen::<f64>() * w.iter().sum::<f64>();
        for (i, x) in w.iter().enumerate() {
            if u < *x {
                return i;
            }
            u -= x;
        }
        0
    }

    /// Title tokens and the value span, if any.
    fn title(&mut self, value: Option<&[String]>, others: &[Vec<String>]) -> (Vec<String>, Option<(usize, usize)>) {
        let mut tokens = Vec::new();
        let mut span = None;
        let mut place = |tokens: &mut Vec<String>, v: &[String]| {
            span = Some((tokens.len(), tokens.len() + v.len() - 1));
            tokens.extend(v.iter().cloned());
        };
        let mut phrase = self.product_phrase();
        let mention = self.mention(value, others);
        let extras = self.extras();
        match value {
            None => {
                tokens.extend(phrase);
                tokens.extend(mention);
                tokens.extend(extras);
            }
            Some(v) => match self.position() {
                0 => {
                    place(&mut tokens, v);
                    if self.rng.gen_bool(0.2) {
                        tokens.push(self.model_number());
                    }
                    tokens.extend(phrase);
                    tokens.extend(mention);
                    tokens.extend(extras);
                }
                1 => {
                    let line = self.lines[self.rng.gen_range(0..self.lines.len())].clone();
                    tokens.push(line);
                    place(&mut tokens, v);
                    tokens.extend(phrase);
                    tokens.extend(mention);
                    tokens.extend(extras);
                }
                2 => {
                    let noun = phrase.pop().unwrap_or_default();
                    tokens.extend(phrase);
                    tokens.push(self.pick(COLORS).to_string());
                    place(&mut tokens, v);
                    tokens.push(noun);
                    tokens.extend(mention);
                    tokens.extend(extras);
                }
                _ => {
                    tokens.extend(phrase);
                    tokens.extend(mention);
                    tokens.extend(extras);
                    tokens.push("by".into());
                    place(&mut tokens, v);
                    if self.rng.gen_bool(0.3) {
                        tokens.push("-".into());
                        tokens.push(self.model_number());
                    }
                }
            },
        }
        (tokens, span)
    }

    /// "for <other value> <noun>", naming a value the title is not about.
    fn mention(&mut self, value: Option<&[String]>, others: &[Vec<String>]) -> Vec<String> {
        if others.is_empty() || !self.rng.gen_bool(self.config.mention_rate) {
            return Vec::new();
        }
        let other = &others[self.rng.gen_range(0..others.len())];
        if value == Some(other.as_slice()) {
            return Vec::new();
        }
        let mut out = vec!["for".to_string()];
        out.extend(other.iter().cloned());
        out.push(self.pick(NOUNS).to_string());
        out
    }
}

fn abbreviate(v: Vec<String>) -> Vec<String> {
    if v.len() > 1 {
        return v[..v.len() - 1].to_vec();
    }
    let chars: Vec<char> = v[0].chars().collect();
    if chars.len() < 6 {
        return v;
    }
    let mut s: String = chars[..1].iter().collect();
    s.extend(chars[1..].iter().filter(|c| !"aeiouAEIOU".contains(**c)).take(2));
    vec![s]
}

pub fn generate_catalog(config: &GeneratorConfig) -> Result<SyntheticCatalog> {
    config.validate()?;
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        config,
        reserved: BTreeSet::new(),
        lines: Vec::new(),
        owner: HashMap::new(),
    };
    for w in ADJECTIVES.iter().chain(NOUNS).chain(COLORS).chain(UNITS).chain(COMPANY_WORDS) {
        g.reserved.insert(w.to_lowercase());
    }
    let mut values = Vec::with_capacity(config.num_values);
    for _ in 0..config.num_values {
        let v = g.value();
        let canonical = v.join(" ");
        g.owner.insert(key_form(&canonical), canonical.clone());
        values.push(v);
    }
    g.lines = (0..PRODUCT_LINES).map(|_| g.series_word()).collect();

    let mut plan: Vec<Option<usize>> = Vec::new();
    for i in 0..values.len() {
        for _ in 0..g.count() {
            plan.push(Some(i));
        }
    }
    let unbranded =
        (plan.len() as f64 * config.unbranded_fraction / (1.0 - config.unbranded_fraction)).round() as usize;
    plan.extend(std::iter::repeat_n(None, unbranded));
    plan.shuffle(&mut g.rng);

    let mut table = NormalizationTable::new();
    for v in &values {
        let c = v.join(" ");
        table.insert(&c, &c)?;
    }
    let alphabet = LabelAlphabet::new(config.attribute.clone());
    let mut records = Vec::with_capacity(plan.len());
    let mut titles = Vec::with_capacity(plan.len());
    let mut canonical = Vec::with_capacity(plan.len());
    for (n, slot) in plan.into_iter().enumerate() {
        let variant = slot.map(|i| {
            let c = values[i].join(" ");
            let v = g.variant(&values[i], &c);
            (v, c)
        });
        let (mut tokens, span) = g.title(variant.as_ref().map(|(v, _)| v.as_slice()), &values);
        if g.rng.gen_bool(config.title_case_rate) {
            let upper = g.rng.gen_bool(0.5);
            for t in &mut tokens {
                *t = if upper { t.to_uppercase() } else { t.to_lowercase() };
            }
        }
        let title = TokenizedTitle::from_tokens(&tokens);
        let span = span.map(|(s, e)| AttributeSpan::new(&title, s, e)).transpose()?;
        let tagged = TaggedTitle::from_span(title, span.as_ref(), Provenance::Synthetic)?;
        if let Some((v, c)) = &variant {
            table.insert(&v.join(" "), c)?;
        }
        let mut record = CorpusRecord::from_tagged(&tagged, &alphabet, tagged.value());
        record.id = Some(format!("synth-{n:06}"));
        records.push(record);
        canonical.push(variant.map(|(_, c)| c));
        titles.push(tagged);
    }
    Ok(SyntheticCatalog {
        records,
        titles,
        canonical,
        table,
        values: values.into_iter().map(|v| v.join(" ")).collect(),
    })
}
