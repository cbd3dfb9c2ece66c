//! Porter stemmer with the NLTK extensions, the variant the reference ROUGE scorer applies
//! when stemming is enabled. Input is expected to be lowercase ASCII.

use alloc::string::{String, ToString};

const IRREGULAR: [(&str, &str); 16] = [
    ("sky", "sky"),
    ("skies", "sky"),
    ("dying", "die"),
    ("lying", "lie"),
    ("tying", "tie"),
    ("news", "news"),
    ("innings", "inning"),
    ("inning", "inning"),
    ("outings", "outing"),
    ("outing", "outing"),
    ("cannings", "canning"),
    ("canning", "canning"),
    ("howe", "howe"),
    ("proceed", "proceed"),
    ("exceed", "exceed"),
    ("succeed", "succeed"),
];

pub fn stem(word: &str) -> String {
    if let Some((_, base)) = IRREGULAR.iter().find(|(form, _)| *form == word) {
        return (*base).to_string();
    }
    if word.len() <= 2 || !word.is_ascii() {
        return word.to_string();
    }
    let w = step1a(word.as_bytes());
    let w = step1b(&w);
    let w = step1c(&w);
    let w = step2(&w);
    let w = step3(&w);
    let w = step4(&w);
    let w = step5a(&w);
    let w = step5b(&w);
    // Only ASCII bytes are ever produced.
    String::from_utf8(w).expect("ascii in, ascii out")
}

type Word = alloc::vec::Vec<u8>;

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of vowel-consonant sequences.
fn measure(stem: &[u8]) -> usize {
    (1..stem.len()).filter(|&i| !is_consonant(stem, i - 1) && is_consonant(stem, i)).count()
}

fn contains_vowel(stem: &[u8]) -> bool {
    (0..stem.len()).any(|i| !is_consonant(stem, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    (n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y'))
        || (n == 2 && !is_consonant(w, 0) && is_consonant(w, 1))
}

fn replace(w: &[u8], suffix_len: usize, replacement: &str) -> Word {
    let mut out = w[..w.len() - suffix_len].to_vec();
    out.extend_from_slice(replacement.as_bytes());
    out
}

enum Cond {
    Always,
    PositiveMeasure,
}

impl Cond {
    fn holds(&self, stem: &[u8]) -> bool {
        match self {
            Cond::Always => true,
            Cond::PositiveMeasure => measure(stem) > 0,
        }
    }
}

/// First rule whose suffix matches decides: it applies if its condition holds, otherwise
/// the word is returned unchanged.
fn apply_rules(w: &[u8], rules: &[(&str, &str, Cond)]) -> Word {
    for (suffix, replacement, cond) in rules {
        if w.ends_with(suffix.as_bytes()) {
            let stem = &w[..w.len() - suffix.len()];
            return if cond.holds(stem) { replace(w, suffix.len(), replacement) } else { w.to_vec() };
        }
    }
    w.to_vec()
}

fn step1a(w: &[u8]) -> Word {
    if w.ends_with(b"ies") && w.len() == 4 {
        return replace(w, 3, "ie");
    }
    apply_rules(w, &[("sses", "ss", Cond::Always), ("ies", "i", Cond::Always), ("ss", "ss", Cond::Always), ("s", "", Cond::Always)])
}

fn step1b(w: &[u8]) -> Word {
    if w.ends_with(b"ied") {
        return if w.len() == 4 { replace(w, 3, "ie") } else { replace(w, 3, "i") };
    }
    if w.ends_with(b"eed") {
        let stem = &w[..w.len() - 3];
        return if measure(stem) > 0 { replace(w, 3, "ee") } else { w.to_vec() };
    }
    let Some(stem) = [&b"ed"[..], b"ing"]
        .iter()
        .filter(|s| w.ends_with(s))
        .map(|s| &w[..w.len() - s.len()])
        .find(|stem| contains_vowel(stem))
    else {
        return w.to_vec();
    };
    for (suffix, replacement) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
        if stem.ends_with(suffix.as_bytes()) {
            return replace(stem, suffix.len(), replacement);
        }
    }
    if ends_double_consonant(stem) {
        let last = stem[stem.len() - 1];
        return if matches!(last, b'l' | b's' | b'z') { stem.to_vec() } else { stem[..stem.len() - 1].to_vec() };
    }
    if measure(stem) == 1 && ends_cvc(stem) {
        return replace(stem, 0, "e");
    }
    stem.to_vec()
}

fn step1c(w: &[u8]) -> Word {
    if let Some(stem) = w.strip_suffix(b"y") {
        if stem.len() > 1 && is_consonant(stem, stem.len() - 1) {
            return replace(w, 1, "i");
        }
    }
    w.to_vec()
}

fn step2(w: &[u8]) -> Word {
    if let Some(stem) = w.strip_suffix(b"alli") {
        if measure(stem) > 0 {
            return step2(&replace(w, 4, "al"));
        }
    }
    const RULES: [(&str, &str); 22] = [
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("bli", "ble"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
        ("fulli", "ful"),
        ("logi", "log"),
    ];
    for (suffix, replacement) in RULES {
        if w.ends_with(suffix.as_bytes()) {
            // The 'l' of "logi" stays with the stem for the measure check.
            let stem = if suffix == "logi" { &w[..w.len() - 3] } else { &w[..w.len() - suffix.len()] };
            return if measure(stem) > 0 { replace(w, suffix.len(), replacement) } else { w.to_vec() };
        }
    }
    w.to_vec()
}

fn step3(w: &[u8]) -> Word {
    apply_rules(
        w,
        &[
            ("icate", "ic", Cond::PositiveMeasure),
            ("ative", "", Cond::PositiveMeasure),
            ("alize", "al", Cond::PositiveMeasure),
            ("iciti", "ic", Cond::PositiveMeasure),
            ("ical", "ic", Cond::PositiveMeasure),
            ("ful", "", Cond::PositiveMeasure),
            ("ness", "", Cond::PositiveMeasure),
        ],
    )
}

fn step4(w: &[u8]) -> Word {
    const SUFFIXES: [&str; 19] = [
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate",
        "iti", "ous", "ive", "ize",
    ];
    for suffix in SUFFIXES {
        if w.ends_with(suffix.as_bytes()) {
            let stem = &w[..w.len() - suffix.len()];
            let ok = measure(stem) > 1 && (suffix != "ion" || matches!(stem.last(), Some(b's' | b't')));
            return if ok { stem.to_vec() } else { w.to_vec() };
        }
    }
    w.to_vec()
}

fn step5a(w: &[u8]) -> Word {
    if let Some(stem) = w.strip_suffix(b"e") {
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            return stem.to_vec();
        }
    }
    w.to_vec()
}

fn step5b(w: &[u8]) -> Word {
    if w.ends_with(b"ll") && measure(&w[..w.len() - 1]) > 1 {
        return w[..w.len() - 1].to_vec();
    }
    w.to_vec()
}
