//! Two-story interleaving with entity renaming.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::parse::raw_tokens;
use super::{DataError, EntityLexicon, Line, Story};

/// Alternate proper names, used for capitalized entities.
pub const ALTERNATE_NAMES: [&str; 12] = [
    "david", "emma", "lucy", "peter", "oliver", "sophie", "henry", "grace", "victor", "alice", "oscar", "nora",
];

/// Alternate common nouns, used for lowercase entities.
pub const ALTERNATE_NOUNS: [&str; 16] = [
    "juice", "cellar", "attic", "garage", "library", "studio", "porch", "pantry", "balcony", "ball", "pear",
    "book", "key", "cup", "hat", "lamp",
];

/// Bijection from story-B entity strings (lowercase) to alternates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RenameMap {
    pub forward: BTreeMap<String, String>,
}

impl RenameMap {
    pub fn inverse(&self) -> RenameMap {
        RenameMap {
            forward: self.forward.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    /// True iff no two sources share an image.
    pub fn is_injective(&self) -> bool {
        let images: BTreeSet<&String> = self.forward.values().collect();
        images.len() == self.forward.len()
    }

    pub fn images(&self) -> BTreeSet<String> {
        self.forward.values().cloned().collect()
    }

    /// Renames one word, keeping an initial capital.
    fn word(&self, w: &str) -> Option<String> {
        let alt = self.forward.get(&w.to_lowercase())?;
        if w.chars().next().is_some_and(char::is_uppercase) {
            let mut c = alt.chars();
            Some(c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default())
        } else {
            Some(alt.clone())
        }
    }

    /// Renames every mapped word of a raw sentence; punctuation and
    /// spacing conventions of the bAbi text are kept.
    pub fn apply_text(&self, text: &str) -> String {
        text.split(' ')
            .map(|word| {
                let core = word.trim_end_matches(['.', '?', '!', ',']);
                match self.word(core) {
                    Some(alt) => format!("{alt}{}", &word[core.len()..]),
                    None => word.to_string(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn apply_answer(&self, answer: &str) -> String {
        answer
            .split(',')
            .map(|a| self.word(a).unwrap_or_else(|| a.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn apply_story(&self, story: &Story) -> Story {
        Story {
            lines: story
                .lines
                .iter()
                .map(|l| match l {
                    Line::Statement(t) => Line::Statement(self.apply_text(t)),
                    Line::Question { text, answer, supporting } => Line::Question {
                        text: self.apply_text(text),
                        answer: self.apply_answer(answer),
                        supporting: supporting.clone(),
                    },
                })
                .collect(),
        }
    }
}

/// A mixed story plus what it took to build it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedStory {
    pub story: Story,
    pub rename: RenameMap,
    /// For each mixed line, `true` if it came from story A.
    pub from_a: Vec<bool>,
}

fn words_of(story: &Story) -> BTreeSet<String> {
    story
        .lines
        .iter()
        .flat_map(|l| {
            let mut w = raw_tokens(l.text());
            if let Line::Question { answer, .. } = l {
                w.extend(answer.split(',').map(str::to_string));
            }
            w
        })
        .map(|w| w.to_lowercase())
        .collect()
}

fn is_capitalized_in(story: &Story, word: &str) -> bool {
    story.lines.iter().any(|l| {
        raw_tokens(l.text())
            .iter()
            .any(|t| t.to_lowercase() == word && t.chars().next().is_some_and(char::is_uppercase))
    })
}

/// Draws a rename map for the lexicon entities of `b`, avoiding every word
/// that occurs in `a` or `b`.
pub fn draw_rename<R: Rng>(a: &Story, b: &Story, lexicon: &EntityLexicon, rng: &mut R) -> Result<RenameMap, DataError> {
    let b_words = words_of(b);
    let mut taken = words_of(a);
    taken.extend(b_words.iter().cloned());
    let mut names: Vec<&str> = ALTERNATE_NAMES.iter().copied().filter(|w| !taken.contains(*w)).collect();
    let mut nouns: Vec<&str> = ALTERNATE_NOUNS.iter().copied().filter(|w| !taken.contains(*w)).collect();
    names.shuffle(rng);
    nouns.shuffle(rng);

    let mut forward = BTreeMap::new();
    for entity in b_words.iter().filter(|w| lexicon.contains(w)) {
        let pool = if is_capitalized_in(b, entity) { &mut names } else { &mut nouns };
        let alt = pool.pop().ok_or_else(|| DataError::PoolExhausted(entity.clone()))?;
        forward.insert(entity.clone(), alt.to_string());
    }
    Ok(RenameMap { forward })
}

/// Uniformly random merge pattern of `na` A-lines and `nb` B-lines.
pub fn draw_interleave<R: Rng>(na: usize, nb: usize, rng: &mut R) -> Vec<bool> {
    let mut pattern: Vec<bool> = std::iter::repeat(true)
        .take(na)
        .chain(std::iter::repeat(false).take(nb))
        .collect();
    pattern.shuffle(rng);
    pattern
}

/// Merges `a` and `renamed_b` line by line following `pattern`,
/// renumbering lines and remapping supporting-fact ids.
pub fn interleave(a: &Story, renamed_b: &Story, pattern: &[bool]) -> Result<Story, DataError> {
    let na = pattern.iter().filter(|&&x| x).count();
    if na != a.lines.len() || pattern.len() - na != renamed_b.lines.len() {
        return Err(DataError::Mix("merge pattern does not fit the stories".into()));
    }
    let (mut ia, mut ib) = (0, 0);
    let mut new_a = vec![0; a.lines.len()];
    let mut new_b = vec![0; renamed_b.lines.len()];
    let mut order = Vec::with_capacity(pattern.len());
    for (k, &take_a) in pattern.iter().enumerate() {
        if take_a {
            new_a[ia] = k + 1;
            order.push((true, ia));
            ia += 1;
        } else {
            new_b[ib] = k + 1;
            order.push((false, ib));
            ib += 1;
        }
    }
    let lines = order
        .into_iter()
        .map(|(is_a, i)| {
            let (src, map) = if is_a { (a, &new_a) } else { (renamed_b, &new_b) };
            match &src.lines[i] {
                Line::Statement(t) => Line::Statement(t.clone()),
                Line::Question { text, answer, supporting } => Line::Question {
                    text: text.clone(),
                    answer: answer.clone(),
                    supporting: supporting.iter().map(|&s| map[s - 1]).collect(),
                },
            }
        })
        .collect();
    Ok(Story { lines })
}

/// Renames the entities of `b`, then interleaves its lines with `a`'s in
/// uniformly random order, each story keeping its internal order.
pub fn generate_babi_mix<R: Rng>(
    a: &Story,
    b: &Story,
    lexicon: &EntityLexicon,
    rng: &mut R,
) -> Result<MixedStory, DataError> {
    let rename = draw_rename(a, b, lexicon, rng)?;
    let renamed = rename.apply_story(b);
    let pattern = draw_interleave(a.lines.len(), b.lines.len(), rng);
    let story = interleave(a, &renamed, &pattern)?;
    Ok(MixedStory {
        story,
        rename,
        from_a: pattern,
    })
}

/// Pairs consecutive stories `(0,1), (2,3), …` and mixes each pair. A
/// trailing unpaired story is dropped.
pub fn mix_stories<R: Rng>(stories: &[Story], lexicon: &EntityLexicon, rng: &mut R) -> Result<Vec<MixedStory>, DataError> {
    stories
        .chunks_exact(2)
        .map(|pair| generate_babi_mix(&pair[0], &pair[1], lexicon, rng))
        .collect()
}

/// Drops every line mentioning a renamed entity and renumbers the rest.
pub fn unmix(mixed: &Story, rename: &RenameMap) -> Story {
    let images = rename.images();
    let keep: Vec<bool> = mixed
        .lines
        .iter()
        .map(|l| !raw_tokens(l.text()).iter().any(|t| images.contains(&t.to_lowercase())))
        .collect();
    let mut new_id = vec![0; mixed.lines.len()];
    let mut next = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            next += 1;
            new_id[i] = next;
        }
    }
    let lines = mixed
        .lines
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(l, _)| match l {
            Line::Statement(t) => Line::Statement(t.clone()),
            Line::Question { text, answer, supporting } => Line::Question {
                text: text.clone(),
                answer: answer.clone(),
                supporting: supporting.iter().map(|&s| new_id[s - 1]).collect(),
            },
        })
        .collect();
    Story { lines }
}
