//! Corpus preprocessing: vocabulary construction, frequency-based word
//! classes, and sentence encoding.
//!
//! A corpus is a sequence of sentences, one per line, tokens separated by
//! whitespace. The vocabulary keeps every token that occurs at least
//! `min_count` times plus three special tokens; everything else becomes the
//! unknown token. Words are partitioned into classes by square-root
//! frequency binning, which is what lets the output layer factor
//! `P(word) = P(class) * P(word | class)` with small per-class softmaxes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const START_TOKEN: &str = "<s>";
pub const END_TOKEN: &str = "</s>";
pub const UNKNOWN_TOKEN: &str = "<unk>";

/// A partition of word ids into contiguous-by-frequency classes, together
/// with the row layout used by class-grouped output matrices: all words of
/// class 0 first (ascending id), then class 1, and so on.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassAssignment {
    class_of: Vec<u32>,
    members: Vec<Vec<u32>>,
    offsets: Vec<usize>,
    row_in_class: Vec<usize>,
}

impl ClassAssignment {
    /// Build the layout from a per-word class vector. Every class in
    /// `0..num_classes` must be non-empty.
    pub fn from_class_of(class_of: Vec<u32>, num_classes: usize) -> Result<ClassAssignment> {
        if num_classes == 0 || num_classes > class_of.len() {
            return Err(Error::InvalidClassCount {
                requested: num_classes,
                vocab_size: class_of.len(),
            });
        }
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
        for (w, &c) in class_of.iter().enumerate() {
            if c as usize >= num_classes {
                return Err(Error::InvalidValue(format!(
                    "word {w} assigned to class {c}, but there are only {num_classes} classes"
                )));
            }
            members[c as usize].push(w as u32);
        }
        let mut offsets = Vec::with_capacity(num_classes);
        let mut row_in_class = vec![0usize; class_of.len()];
        let mut next = 0usize;
        for (c, ms) in members.iter().enumerate() {
            if ms.is_empty() {
                return Err(Error::InvalidValue(format!("class {c} has no members")));
            }
            offsets.push(next);
            for (k, &w) in ms.iter().enumerate() {
                row_in_class[w as usize] = k;
            }
            next += ms.len();
        }
        Ok(ClassAssignment { class_of, members, offsets, row_in_class })
    }

    pub fn vocab_size(&self) -> usize {
        self.class_of.len()
    }

    pub fn num_classes(&self) -> usize {
        self.members.len()
    }

    pub fn class_of(&self, word: u32) -> u32 {
        self.class_of[word as usize]
    }

    pub fn members(&self, class: u32) -> &[u32] {
        &self.members[class as usize]
    }

    pub fn class_size(&self, class: u32) -> usize {
        self.members[class as usize].len()
    }

    /// `(first_row, len)` of the class's block in a class-grouped matrix.
    pub fn block(&self, class: u32) -> (usize, usize) {
        (self.offsets[class as usize], self.members[class as usize].len())
    }

    /// Row of `word` in a class-grouped matrix.
    pub fn row_of(&self, word: u32) -> usize {
        self.offsets[self.class_of(word) as usize] + self.row_in_class[word as usize]
    }

    /// Position of `word` inside its own class block.
    pub fn index_in_class(&self, word: u32) -> usize {
        self.row_in_class[word as usize]
    }
}

/// Partition words into `num_classes` bins of roughly equal total
/// square-root frequency.
///
/// Words are walked in descending count (ties broken by ascending id) and a
/// new bin starts whenever the accumulated sqrt-count mass passes the next
/// equal share of the total. A bin is also forced to close early when the
/// remaining words are only just enough to give every remaining class one
/// word, so no class ever ends up empty. Frequent words land in small
/// classes, rare words in large ones.
pub fn assign_classes(counts: &[u64], num_classes: usize) -> Result<ClassAssignment> {
    let n = counts.len();
    if num_classes == 0 || num_classes > n {
        return Err(Error::InvalidClassCount { requested: num_classes, vocab_size: n });
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b))
    });
    let total_mass: f64 = counts.iter().map(|&c| (c as f64).sqrt()).sum();

    let mut class_of = vec![0u32; n];
    let mut class = 0usize;
    let mut in_class = 0usize;
    let mut mass = 0.0f64;
    for (k, &w) in order.iter().enumerate() {
        if class + 1 < num_classes && in_class > 0 {
            let boundary = total_mass * (class + 1) as f64 / num_classes as f64;
            let must_advance = n - k == num_classes - 1 - class;
            if mass >= boundary || must_advance {
                class += 1;
                in_class = 0;
            }
        }
        class_of[w as usize] = class as u32;
        in_class += 1;
        mass += (counts[w as usize] as f64).sqrt();
    }
    ClassAssignment::from_class_of(class_of, num_classes)
}

/// Vocabulary over a training corpus: kept words, their counts, the class
/// partition, and the three special tokens.
///
/// Ids are assigned by descending count with ties broken lexicographically,
/// special tokens included (start and end count once per sentence, unknown
/// counts its replaced occurrences), so ids are a deterministic function of
/// the corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    word_to_id: HashMap<String, u32>,
    counts: Vec<u64>,
    classes: ClassAssignment,
    start: u32,
    end: u32,
    unknown: u32,
    min_count: u32,
}

impl Vocabulary {
    /// Build a vocabulary from tokenized sentences.
    ///
    /// Tokens occurring fewer than `min_count` times fold into the unknown
    /// token. Literal occurrences of the special tokens inside a sentence
    /// are reserved and also fold into unknown, which keeps re-encoding a
    /// canonicalized corpus (where rare tokens were already rewritten to
    /// `<unk>`) stable.
    pub fn build(
        sentences: &[Vec<String>],
        min_count: u32,
        num_classes: usize,
    ) -> Result<Vocabulary> {
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_count == 0 {
            return Err(Error::InvalidValue("min_count must be at least 1".into()));
        }
        let mut raw_counts: HashMap<&str, u64> = HashMap::new();
        let mut reserved_hits = 0u64;
        for sentence in sentences {
            for token in sentence {
                if token == START_TOKEN || token == END_TOKEN {
                    reserved_hits += 1;
                } else {
                    *raw_counts.entry(token.as_str()).or_insert(0) += 1;
                }
            }
        }

        let mut unknown_count = reserved_hits;
        let mut entries: Vec<(String, u64)> = Vec::new();
        for (token, count) in raw_counts {
            if token == UNKNOWN_TOKEN || count < u64::from(min_count) {
                unknown_count += count;
            } else {
                entries.push((token.to_owned(), count));
            }
        }
        let n_sentences = sentences.len() as u64;
        entries.push((START_TOKEN.to_owned(), n_sentences));
        entries.push((END_TOKEN.to_owned(), n_sentences));
        entries.push((UNKNOWN_TOKEN.to_owned(), unknown_count));
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let words: Vec<String> = entries.iter().map(|(w, _)| w.clone()).collect();
        let counts: Vec<u64> = entries.iter().map(|&(_, c)| c).collect();
        let word_to_id: HashMap<String, u32> =
            words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let classes = assign_classes(&counts, num_classes)?;
        let start = word_to_id[START_TOKEN];
        let end = word_to_id[END_TOKEN];
        let unknown = word_to_id[UNKNOWN_TOKEN];
        Ok(Vocabulary { words, word_to_id, counts, classes, start, end, unknown, min_count })
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.num_classes()
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn unknown(&self) -> u32 {
        self.unknown
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn classes(&self) -> &ClassAssignment {
        &self.classes
    }

    /// Id of a content token: reserved sentence markers and anything
    /// out-of-vocabulary map to the unknown id.
    pub fn id_of(&self, token: &str) -> u32 {
        if token == START_TOKEN || token == END_TOKEN {
            return self.unknown;
        }
        self.word_to_id.get(token).copied().unwrap_or(self.unknown)
    }

    /// Expected size of the class a random scorable token falls into:
    /// `sum_w p(w) * |class(w)|` with `p` the unigram distribution over
    /// everything that can appear as a prediction target (the start token
    /// is never a target and is excluded; the end token is included).
    pub fn expected_in_class_size(&self) -> f64 {
        let mut total = 0.0f64;
        let mut acc = 0.0f64;
        for w in 0..self.words.len() as u32 {
            if w == self.start {
                continue;
            }
            let c = self.counts[w as usize] as f64;
            total += c;
            acc += c * self.classes.class_size(self.classes.class_of(w)) as f64;
        }
        if total == 0.0 {
            // No scorable token ever observed; every class is equally likely
            // to be asked about, so fall back to the mean class size.
            return self.words.len() as f64 / self.classes.num_classes() as f64;
        }
        acc / total
    }

    /// Serialize in the vocabulary file format: a `V C min_count` header,
    /// then one `word<TAB>count<TAB>class` line per id, in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.size(), self.num_classes(), self.min_count);
        for (id, word) in self.words.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                word,
                self.counts[id],
                self.classes.class_of(id as u32)
            );
        }
        out
    }

    /// Parse the format produced by [`Vocabulary::to_text`].
    pub fn from_text(text: &str) -> Result<Vocabulary> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(Error::VocabParse { line: 1, message: "empty file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::VocabParse {
                line: 1,
                message: format!("expected header `V C min_count`, got {header:?}"),
            });
        }
        let parse_usize = |s: &str, line: usize, what: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::VocabParse {
                line,
                message: format!("cannot parse {what} from {s:?}"),
            })
        };
        let v = parse_usize(fields[0], 1, "vocabulary size")?;
        let c = parse_usize(fields[1], 1, "class count")?;
        let min_count = parse_usize(fields[2], 1, "min_count")? as u32;

        let mut words = Vec::with_capacity(v);
        let mut counts = Vec::with_capacity(v);
        let mut class_of = Vec::with_capacity(v);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if words.len() == v {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::VocabParse {
                    line: lineno,
                    message: format!("more than the {v} entries declared in the header"),
                });
            }
            let mut parts = line.split('\t');
            let (word, count, class) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(w), Some(c), Some(k), None) => (w, c, k),
                _ => {
                    return Err(Error::VocabParse {
                        line: lineno,
                        message: "expected `word<TAB>count<TAB>class`".into(),
                    })
                }
            };
            if word.is_empty() {
                return Err(Error::VocabParse { line: lineno, message: "empty word".into() });
            }
            words.push(word.to_owned());
            counts.push(parse_usize(count, lineno, "count")? as u64);
            class_of.push(parse_usize(class, lineno, "class")? as u32);
        }
        if words.len() != v {
            return Err(Error::VocabParse {
                line: words.len() + 2,
                message: format!("header declares {v} entries but file has {}", words.len()),
            });
        }

        let mut word_to_id = HashMap::with_capacity(v);
        for (id, w) in words.iter().enumerate() {
            if word_to_id.insert(w.clone(), id as u32).is_some() {
                return Err(Error::VocabParse {
                    line: id + 2,
                    message: format!("duplicate word {w:?}"),
                });
            }
        }
        let lookup = |tok: &str| -> Result<u32> {
            word_to_id.get(tok).copied().ok_or_else(|| Error::VocabParse {
                line: 1,
                message: format!("special token {tok:?} missing"),
            })
        };
        let start = lookup(START_TOKEN)?;
        let end = lookup(END_TOKEN)?;
        let unknown = lookup(UNKNOWN_TOKEN)?;
        let classes = ClassAssignment::from_class_of(class_of, c)?;
        Ok(Vocabulary { words, word_to_id, counts, classes, start, end, unknown, min_count })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let text = fs::read_to_string(path)?;
        Vocabulary::from_text(&text)
    }

    /// Encode tokenized sentences: each becomes `[start, ids..., end]` with
    /// out-of-vocabulary tokens mapped to unknown. An empty token sequence
    /// encodes to just `[start, end]`.
    pub fn encode(&self, sentences: &[Vec<String>]) -> Dataset {
        let mut encoded = Vec::with_capacity(sentences.len());
        let mut token_count = 0usize;
        for sentence in sentences {
            let mut ids = Vec::with_capacity(sentence.len() + 2);
            ids.push(self.start);
            ids.extend(sentence.iter().map(|t| self.id_of(t)));
            ids.push(self.end);
            token_count += ids.len();
            encoded.push(ids);
        }
        Dataset { sentences: encoded, token_count }
    }

    /// Map a dataset back to tokens, dropping the start/end markers.
    pub fn decode(&self, data: &Dataset) -> Vec<Vec<String>> {
        data.sentences
            .iter()
            .map(|s| s[1..s.len() - 1].iter().map(|&id| self.word(id).to_owned()).collect())
            .collect()
    }
}

/// An encoded corpus: every sentence starts with the start id, ends with
/// the end id, and contains neither marker in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sentences: Vec<Vec<u32>>,
    token_count: usize,
}

impl Dataset {
    /// Wrap already-encoded sentences, validating the marker contract.
    pub fn from_sentences(sentences: Vec<Vec<u32>>, start: u32, end: u32) -> Result<Dataset> {
        for (i, s) in sentences.iter().enumerate() {
            if s.len() < 2 {
                return Err(Error::MalformedSentence(format!(
                    "sentence {i} has {} tokens; need at least start + end",
                    s.len()
                )));
            }
            if s[0] != start || *s.last().unwrap() != end {
                return Err(Error::MalformedSentence(format!(
                    "sentence {i} is not wrapped in start/end markers"
                )));
            }
            if s[1..s.len() - 1].iter().any(|&t| t == start || t == end) {
                return Err(Error::MalformedSentence(format!(
                    "sentence {i} contains an interior start/end marker"
                )));
            }
        }
        let token_count = sentences.iter().map(Vec::len).sum();
        Ok(Dataset { sentences, token_count })
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Total tokens including the start/end markers.
    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Tokens the model is scored on: everything after each start marker.
    pub fn scorable_tokens(&self) -> usize {
        self.token_count - self.sentences.len()
    }
}

/// Split a line into whitespace-separated tokens.
pub fn tokenize_line(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

/// Read a corpus file: one sentence per line. Blank lines are kept as
/// empty sentences (they still carry a start/end transition).
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(tokenize_line).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| tokenize_line(l)).collect()
    }

    #[test]
    fn single_sentence_vocab_has_specials_and_count_ordered_ids() {
        let v = Vocabulary::build(&toks(&["a a b"]), 1, 1).unwrap();
        assert_eq!(v.size(), 5, "a, b, start, end, unknown");
        // Counts: a=2, start=1, end=1, b=1, unknown=0; ties lexicographic.
        assert_eq!(v.word(0), "a");
        assert_eq!(v.word(1), END_TOKEN);
        assert_eq!(v.word(2), START_TOKEN);
        assert_eq!(v.word(3), "b");
        assert_eq!(v.word(4), UNKNOWN_TOKEN);
        assert_eq!(v.count(v.start()), 1);
        assert_eq!(v.count(v.unknown()), 0);
    }

    #[test]
    fn min_count_boundary_keeps_exactly_at_threshold() {
        let mut lines: Vec<String> = Vec::new();
        for _ in 0..30 {
            lines.push("kept".to_owned());
        }
        for _ in 0..29 {
            lines.push("folded".to_owned());
        }
        let sentences: Vec<Vec<String>> = lines.iter().map(|l| tokenize_line(l)).collect();
        let v = Vocabulary::build(&sentences, 30, 2).unwrap();
        assert_eq!(v.id_of("kept"), v.word_to_id["kept"]);
        assert_eq!(v.id_of("folded"), v.unknown(), "29 occurrences is below the threshold");
        assert_eq!(v.count(v.unknown()), 29);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        match Vocabulary::build(&[], 1, 1) {
            Err(Error::EmptyCorpus) => {}
            other => panic!("expected EmptyCorpus, got {other:?}"),
        }
    }

    #[test]
    fn class_count_must_fit_vocabulary() {
        let sentences = toks(&["a b"]);
        match Vocabulary::build(&sentences, 1, 99) {
            Err(Error::InvalidClassCount { requested: 99, vocab_size: 5 }) => {}
            other => panic!("expected InvalidClassCount, got {other:?}"),
        }
        assert!(Vocabulary::build(&sentences, 1, 5).is_ok(), "C = V is allowed");
    }

    #[test]
    fn one_class_puts_everything_together() {
        let counts = [50u64, 20, 5, 1];
        let ca = assign_classes(&counts, 1).unwrap();
        assert_eq!(ca.num_classes(), 1);
        assert_eq!(ca.class_size(0), 4);
        assert_eq!(ca.members(0), &[0, 1, 2, 3]);
    }

    #[test]
    fn classes_equal_vocab_gives_singletons() {
        let counts = [50u64, 20, 5, 1];
        let ca = assign_classes(&counts, 4).unwrap();
        for w in 0..4 {
            assert_eq!(ca.class_size(ca.class_of(w)), 1, "word {w}");
        }
    }

    #[test]
    fn sqrt_binning_matches_brute_force_on_zipf_counts() {
        // Zipf-ish counts for 10 words, 3 classes; oracle below recomputes
        // the rule from scratch with explicit prefix sums.
        let counts: Vec<u64> = (1..=10u64).map(|r| 1000 / r).collect();
        let ca = assign_classes(&counts, 3).unwrap();

        let n = counts.len();
        let c = 3usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let total: f64 = counts.iter().map(|&x| (x as f64).sqrt()).sum();
        let mut expected = vec![0u32; n];
        let mut cls = 0usize;
        let mut filled = 0usize;
        let mut acc = 0.0;
        for (k, &w) in order.iter().enumerate() {
            if cls + 1 < c
                && filled > 0
                && (acc >= total * (cls + 1) as f64 / c as f64 || n - k == c - 1 - cls)
            {
                cls += 1;
                filled = 0;
            }
            expected[w] = cls as u32;
            filled += 1;
            acc += (counts[w] as f64).sqrt();
        }
        for w in 0..n {
            assert_eq!(ca.class_of(w as u32), expected[w], "word {w}");
        }
        // Frequent words get the small classes under this rule.
        assert!(ca.class_size(ca.class_of(0)) <= ca.class_size(ca.class_of(9)));
    }

    #[test]
    fn every_class_nonempty_and_sizes_sum_to_vocab() {
        let mut rng = crate::numerics::Rng::new(3);
        for trial in 0..20 {
            let n = 3 + rng.below(40);
            let counts: Vec<u64> = (0..n).map(|_| rng.below(1000) as u64).collect();
            let c = 1 + rng.below(n);
            let ca = assign_classes(&counts, c).unwrap();
            let mut sum = 0;
            for k in 0..c as u32 {
                assert!(ca.class_size(k) > 0, "trial {trial}: class {k} empty");
                sum += ca.class_size(k);
            }
            assert_eq!(sum, n, "trial {trial}");
        }
    }

    #[test]
    fn class_grouped_rows_cover_all_words_once() {
        let counts = [9u64, 9, 4, 4, 1, 1, 1];
        let ca = assign_classes(&counts, 3).unwrap();
        let mut seen = vec![false; 7];
        for w in 0..7u32 {
            let r = ca.row_of(w);
            assert!(!seen[r], "row {r} assigned twice");
            seen[r] = true;
            let (off, len) = ca.block(ca.class_of(w));
            assert!(r >= off && r < off + len);
            assert_eq!(ca.members(ca.class_of(w))[ca.index_in_class(w)], w);
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn expected_in_class_size_closed_forms() {
        let sentences = toks(&["a a b", "a c"]);
        // One class: every word's class has size V, so E[O] = V.
        let v1 = Vocabulary::build(&sentences, 1, 1).unwrap();
        assert!((v1.expected_in_class_size() - v1.size() as f64).abs() < 1e-12);
        // Singleton classes: E[O] = 1 regardless of the distribution.
        let vv = Vocabulary::build(&sentences, 1, 6).unwrap();
        assert!((vv.expected_in_class_size() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_in_class_size_matches_direct_sum() {
        let sentences = toks(&["the cat sat", "the dog sat down", "the end", "a cat"]);
        let v = Vocabulary::build(&sentences, 1, 3).unwrap();
        let mut total = 0.0;
        let mut acc = 0.0;
        for id in 0..v.size() as u32 {
            if id == v.start() {
                continue;
            }
            total += v.count(id) as f64;
            acc += v.count(id) as f64 * v.classes().class_size(v.classes().class_of(id)) as f64;
        }
        let direct = acc / total;
        assert!((v.expected_in_class_size() - direct).abs() < 1e-12);
        let eo = v.expected_in_class_size();
        assert!(eo >= 1.0 && eo <= v.size() as f64, "E[O] = {eo} out of range");
    }

    #[test]
    fn encode_wraps_and_maps_oov_to_unknown() {
        let v = Vocabulary::build(&toks(&["a a b"]), 1, 2).unwrap();
        let data = v.encode(&toks(&["a zzz"]));
        let s = &data.sentences()[0];
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], v.start());
        assert_eq!(s[1], v.id_of("a"));
        assert_eq!(s[2], v.unknown());
        assert_eq!(s[3], v.end());

        let empty = v.encode(&toks(&[""]));
        assert_eq!(empty.sentences()[0], vec![v.start(), v.end()]);
        assert_eq!(empty.scorable_tokens(), 1, "the end marker is still scorable");

        let one = v.encode(&toks(&["a"]));
        assert_eq!(one.sentences()[0], vec![v.start(), v.id_of("a"), v.end()]);
    }

    #[test]
    fn literal_markers_in_content_fold_to_unknown() {
        let v = Vocabulary::build(&toks(&["a a b <s> </s>"]), 1, 2).unwrap();
        let data = v.encode(&toks(&["a <s> </s> <unk>"]));
        let s = &data.sentences()[0];
        assert_eq!(&s[1..s.len() - 1], &[v.id_of("a"), v.unknown(), v.unknown(), v.unknown()]);
        // The two reserved literals counted toward unknown during build.
        assert_eq!(v.count(v.unknown()), 2);
    }

    #[test]
    fn decode_then_encode_is_identity() {
        let sentences = toks(&["a a b c", "b rare-word a", ""]);
        let v = Vocabulary::build(&sentences, 2, 2).unwrap();
        let data = v.encode(&sentences);
        let decoded = v.decode(&data);
        let reencoded = v.encode(&decoded);
        assert_eq!(data, reencoded);
        assert!(decoded[1].contains(&UNKNOWN_TOKEN.to_owned()), "rare word decodes as <unk>");
    }

    #[test]
    fn build_is_deterministic() {
        let sentences = toks(&["c b a", "b a", "a"]);
        let v1 = Vocabulary::build(&sentences, 1, 2).unwrap();
        let v2 = Vocabulary::build(&sentences, 1, 2).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.to_text(), v2.to_text());
    }

    #[test]
    fn vocab_file_round_trips() {
        let sentences = toks(&["the cat sat on the mat", "the dog sat", "a cat"]);
        let v = Vocabulary::build(&sentences, 1, 3).unwrap();
        let text = v.to_text();
        let back = Vocabulary::from_text(&text).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn vocab_parse_errors_carry_line_numbers() {
        match Vocabulary::from_text("nonsense header\n") {
            Err(Error::VocabParse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
        match Vocabulary::from_text("2 1 1\n<s>\t1\t0\n") {
            Err(Error::VocabParse { line: 3, .. }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
        match Vocabulary::from_text("2 1 1\n<s>\t1\t0\nbad line without tabs\n") {
            Err(Error::VocabParse { line: 3, .. }) => {}
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_malformed_sentences() {
        let v = Vocabulary::build(&toks(&["a b"]), 1, 2).unwrap();
        let bad = vec![vec![v.start()]];
        assert!(matches!(
            Dataset::from_sentences(bad, v.start(), v.end()),
            Err(Error::MalformedSentence(_))
        ));
        let interior = vec![vec![v.start(), v.end(), v.id_of("a"), v.end()]];
        assert!(matches!(
            Dataset::from_sentences(interior, v.start(), v.end()),
            Err(Error::MalformedSentence(_))
        ));
        let unwrapped = vec![vec![v.id_of("a"), v.end()]];
        assert!(matches!(
            Dataset::from_sentences(unwrapped, v.start(), v.end()),
            Err(Error::MalformedSentence(_))
        ));
    }

    #[test]
    fn token_counts_add_up() {
        let v = Vocabulary::build(&toks(&["a b", "a", ""]), 1, 2).unwrap();
        let data = v.encode(&toks(&["a b", "a", ""]));
        assert_eq!(data.token_count(), 4 + 3 + 2);
        assert_eq!(data.scorable_tokens(), 3 + 2 + 1);
        assert_eq!(data.len(), 3);
    }
}
