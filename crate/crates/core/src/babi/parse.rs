use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use super::DataError;

/// One numbered line of a story block, kept as raw text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Line {
    Statement(String),
    Question {
        text: String,
        answer: String,
        /// Line numbers (1-based, within the block) of the supporting facts.
        supporting: Vec<usize>,
    },
}

impl Line {
    pub fn text(&self) -> &str {
        match self {
            Line::Statement(t) => t,
            Line::Question { text, .. } => text,
        }
    }

    pub fn is_question(&self) -> bool {
        matches!(self, Line::Question { .. })
    }
}

/// A story block: lines numbered 1..=n in order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Story {
    pub lines: Vec<Line>,
}

impl fmt::Display for Story {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, line) in self.lines.iter().enumerate() {
            match line {
                Line::Statement(t) => writeln!(f, "{} {}", i + 1, t)?,
                Line::Question { text, answer, supporting } => {
                    let ids: Vec<String> = supporting.iter().map(usize::to_string).collect();
                    writeln!(f, "{} {}\t{}\t{}", i + 1, text, answer, ids.join(" "))?
                }
            }
        }
        Ok(())
    }
}

/// A question with every statement of its story that precedes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BabiExample {
    pub task: u8,
    /// Index of the story block in its file.
    pub story_index: usize,
    /// Lowercased statement tokens, one list per sentence.
    pub story: Vec<Vec<String>>,
    /// Line number of each story sentence inside its block.
    pub story_lines: Vec<usize>,
    pub question: Vec<String>,
    /// Answer tokens; multi-answer tasks separate them with commas.
    pub answer: Vec<String>,
    /// Supporting line numbers as given in the file.
    pub supporting: Vec<usize>,
}

impl BabiExample {
    pub fn story_len(&self) -> usize {
        self.story.iter().map(Vec::len).sum()
    }

    /// Index into `story` of each supporting line, when it is a statement.
    pub fn supporting_sentences(&self) -> Vec<usize> {
        self.supporting
            .iter()
            .filter_map(|l| self.story_lines.iter().position(|x| x == l))
            .collect()
    }
}

/// Whitespace tokens with trailing `.`, `?`, `!` and `,` split off,
/// lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    raw_tokens(text)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect()
}

/// Like [`tokenize`] but keeps the original case.
pub fn raw_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let core = word.trim_end_matches(['.', '?', '!', ',']);
        if !core.is_empty() {
            out.push(core.to_string());
        }
        for c in word[core.len()..].chars() {
            out.push(c.to_string());
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses story blocks. A line numbered 1 starts a new block; numbers
/// must otherwise increase by one.
pub fn parse_stories<R: BufRead>(reader: R) -> Result<Vec<Story>, DataError> {
    let mut stories: Vec<Story> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let (num, rest) = line
            .trim_start()
            .split_once(' ')
            .ok_or_else(|| parse_err(lineno, "expected `<n> <text>`"))?;
        let n: usize = num
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric line prefix `{num}`")))?;
        if n == 1 {
            stories.push(Story::default());
        }
        let story = stories
            .last_mut()
            .ok_or_else(|| parse_err(lineno, "first story does not start at 1"))?;
        if n != story.lines.len() + 1 {
            return Err(parse_err(
                lineno,
                format!("expected line number {}, found {n}", story.lines.len() + 1),
            ));
        }
        let parsed = if rest.contains('\t') {
            let mut fields = rest.split('\t');
            let text = fields.next().unwrap_or("").trim().to_string();
            let answer = fields
                .next()
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .ok_or_else(|| parse_err(lineno, "question without an answer"))?
                .to_string();
            let supporting = fields
                .next()
                .unwrap_or("")
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad supporting fact id `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Line::Question {
                text,
                answer,
                supporting,
            }
        } else {
            let text = rest.trim();
            if text.ends_with('?') {
                return Err(parse_err(lineno, "question line without tab-separated answer"));
            }
            Line::Statement(text.to_string())
        };
        story.lines.push(parsed);
    }
    Ok(stories)
}

/// Expands story blocks into one example per question.
pub fn examples_from_stories(stories: &[Story], task: u8) -> Vec<BabiExample> {
    let mut out = Vec::new();
    for (si, story) in stories.iter().enumerate() {
        let mut sentences = Vec::new();
        let mut line_ids = Vec::new();
        for (i, line) in story.lines.iter().enumerate() {
            match line {
                Line::Statement(text) => {
                    sentences.push(tokenize(text));
                    line_ids.push(i + 1);
                }
                Line::Question {
                    text,
                    answer,
                    supporting,
                } => out.push(BabiExample {
                    task,
                    story_index: si,
                    story: sentences.clone(),
                    story_lines: line_ids.clone(),
                    question: tokenize(text),
                    answer: answer.split(',').map(|a| a.trim().to_lowercase()).collect(),
                    supporting: supporting.clone(),
                }),
            }
        }
    }
    out
}

pub fn parse_babi<R: BufRead>(reader: R, task: u8) -> Result<Vec<BabiExample>, DataError> {
    Ok(examples_from_stories(&parse_stories(reader)?, task))
}

/// Task number from a file name such as `qa2_two-supporting-facts_train.txt`.
pub fn task_from_path(path: &Path) -> Option<u8> {
    let name = path.file_name()?.to_str()?;
    let digits: String = name.strip_prefix("qa")?.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok().filter(|t| (1..=20).contains(t))
}

pub fn parse_babi_file(path: &Path, task: Option<u8>) -> Result<Vec<BabiExample>, DataError> {
    let task = task
        .or_else(|| task_from_path(path))
        .ok_or_else(|| DataError::UnknownTask(path.display().to_string()))?;
    let file = std::fs::File::open(path)?;
    parse_babi(std::io::BufReader::new(file), task)
}

pub fn read_stories_file(path: &Path) -> Result<Vec<Story>, DataError> {
    parse_stories(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_stories<W: Write>(mut w: W, stories: &[Story]) -> Result<(), DataError> {
    for s in stories {
        write!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_question() {
        let text = "1 Mary moved to the bathroom.\n2 Where is Mary?\tbathroom\t1\n";
        let ex = parse_babi(text.as_bytes(), 1).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].story, vec![vec!["mary", "moved", "to", "the", "bathroom", "."]]);
        assert_eq!(ex[0].question, vec!["where", "is", "mary", "?"]);
        assert_eq!(ex[0].answer, vec!["bathroom"]);
        assert_eq!(ex[0].supporting, vec![1]);
        assert_eq!(ex[0].supporting_sentences(), vec![0]);
    }

    #[test]
    fn numbering_reset_starts_new_story() {
        let text = "1 Mary moved to the bathroom.\n2 Where is Mary? \tbathroom\t1\n\
                    1 John went to the hallway.\n2 Where is John? \thallway\t1\n";
        let ex = parse_babi(text.as_bytes(), 1).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[1].story_index, 1);
        assert_eq!(ex[1].story.len(), 1);
        assert_eq!(ex[1].story[0][0], "john");
    }

    #[test]
    fn questions_see_only_preceding_statements() {
        let text = "1 Mary moved to the bathroom.\n2 John went to the hallway.\n3 Where is Mary? \tbathroom\t1\n\
                    4 Daniel went back to the hallway.\n5 Where is Daniel? \thallway\t4\n";
        let ex = parse_babi(text.as_bytes(), 1).unwrap();
        assert_eq!(ex[0].story.len(), 2);
        assert_eq!(ex[1].story.len(), 3);
        assert_eq!(ex[1].story_lines, vec![1, 2, 4]);
        assert_eq!(ex[1].supporting_sentences(), vec![2]);
    }

    #[test]
    fn empty_input() {
        assert!(parse_babi("".as_bytes(), 1).unwrap().is_empty());
    }

    #[test]
    fn malformed_lines() {
        let err = parse_babi("1 Where is Mary?\n".as_bytes(), 1).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        let err = parse_babi("1 Mary moved.\nx John went.\n".as_bytes(), 1).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = parse_babi("1 Mary moved.\n3 John went.\n".as_bytes(), 1).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn serialization_round_trips() {
        let text = "1 Mary moved to the bathroom.\n2 John went to the hallway.\n3 Where is Mary?\tbathroom\t1\n";
        let stories = parse_stories(text.as_bytes()).unwrap();
        assert_eq!(stories[0].to_string(), text);
    }

    #[test]
    fn task_number_from_file_name() {
        assert_eq!(task_from_path(Path::new("/d/qa2_two-supporting-facts_train.txt")), Some(2));
        assert_eq!(task_from_path(Path::new("qa20_x.txt")), Some(20));
        assert_eq!(task_from_path(Path::new("stories.txt")), None);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(raw_tokens("Mary got the football there."), ["Mary", "got", "the", "football", "there", "."]);
        assert_eq!(tokenize("Is Mary in the office? "), ["is", "mary", "in", "the", "office", "?"]);
    }
}
