//! Template stories in the style of bAbi tasks 1 and 2.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, Line, Story};

const ACTORS: [&str; 4] = ["Mary", "John", "Daniel", "Sandra"];
const LOCATIONS: [&str; 6] = ["bathroom", "bedroom", "garden", "hallway", "kitchen", "office"];
const OBJECTS: [&str; 3] = ["football", "apple", "milk"];
const MOVES: [&str; 5] = ["moved to", "went to", "went back to", "journeyed to", "travelled to"];
const GRABS: [&str; 4] = ["got", "grabbed", "picked up", "took"];
const DROPS: [&str; 4] = ["dropped", "discarded", "put down", "left"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    /// 1 (single supporting fact) or 2 (two supporting facts).
    pub task: u8,
    pub stories: usize,
    pub questions_per_story: usize,
    /// Inclusive range of statements before each question.
    pub statements_between: (usize, usize),
    pub seed: u64,
}

impl SynthConfig {
    /// The 1K-style layout: 200 stories of 5 questions.
    pub fn task(task: u8, seed: u64) -> Self {
        let statements_between = if task == 2 { (2, 5) } else { (2, 2) };
        SynthConfig {
            task,
            stories: 200,
            questions_per_story: 5,
            statements_between,
            seed,
        }
    }
}

#[derive(Default)]
struct World {
    actor_at: [Option<(usize, usize)>; 4],
    /// Holder actor and the line that grabbed it.
    held_by: [Option<(usize, usize)>; 3],
    /// Location and the supporting lines when lying on the floor.
    object_at: [Option<(usize, Vec<usize>)>; 3],
    lines: Vec<Line>,
}

impl World {
    fn line_no(&self) -> usize {
        self.lines.len() + 1
    }

    fn move_actor<R: Rng>(&mut self, rng: &mut R, a: usize) {
        let from = self.actor_at[a].map(|(l, _)| l);
        let to = loop {
            let l = rng.gen_range(0..LOCATIONS.len());
            if Some(l) != from {
                break l;
            }
        };
        let verb = MOVES.choose(rng).unwrap();
        self.actor_at[a] = Some((to, self.line_no()));
        self.lines
            .push(Line::Statement(format!("{} {verb} the {}.", ACTORS[a], LOCATIONS[to])));
    }

    fn grab<R: Rng>(&mut self, rng: &mut R, a: usize, o: usize) {
        self.held_by[o] = Some((a, self.line_no()));
        self.object_at[o] = None;
        let verb = GRABS.choose(rng).unwrap();
        self.lines
            .push(Line::Statement(format!("{} {verb} the {} there.", ACTORS[a], OBJECTS[o])));
    }

    fn drop<R: Rng>(&mut self, rng: &mut R, a: usize, o: usize) {
        let (loc, moved) = self.actor_at[a].expect("holder has a location");
        self.held_by[o] = None;
        self.object_at[o] = Some((loc, vec![self.line_no(), moved]));
        let verb = DROPS.choose(rng).unwrap();
        self.lines
            .push(Line::Statement(format!("{} {verb} the {}.", ACTORS[a], OBJECTS[o])));
    }

    /// One random event. Actors without a location always move first.
    fn task2_event<R: Rng>(&mut self, rng: &mut R) {
        let a = rng.gen_range(0..ACTORS.len());
        let Some((here, _)) = self.actor_at[a] else {
            return self.move_actor(rng, a);
        };
        let holding: Vec<usize> = (0..OBJECTS.len())
            .filter(|&o| self.held_by[o].is_some_and(|(h, _)| h == a))
            .collect();
        let grabbable: Vec<usize> = (0..OBJECTS.len())
            .filter(|&o| {
                self.held_by[o].is_none() && self.object_at[o].as_ref().is_none_or(|(l, _)| *l == here)
            })
            .collect();
        let roll: f64 = rng.gen();
        if roll < 0.5 {
            self.move_actor(rng, a);
        } else if roll < 0.8 && !grabbable.is_empty() {
            let o = *grabbable.choose(rng).unwrap();
            self.grab(rng, a, o);
        } else if !holding.is_empty() {
            let o = *holding.choose(rng).unwrap();
            self.drop(rng, a, o);
        } else {
            self.move_actor(rng, a);
        }
    }

    /// Answer and supporting lines for "Where is the <o>?", if known.
    fn object_answer(&self, o: usize) -> Option<(usize, Vec<usize>)> {
        if let Some((a, grabbed)) = self.held_by[o] {
            let (loc, moved) = self.actor_at[a]?;
            let mut sup = vec![grabbed, moved];
            sup.sort_unstable();
            return Some((loc, sup));
        }
        self.object_at[o].clone()
    }
}

fn task1_story<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Story {
    let mut w = World::default();
    for _ in 0..cfg.questions_per_story {
        let n = rng.gen_range(cfg.statements_between.0..=cfg.statements_between.1);
        for _ in 0..n {
            let a = rng.gen_range(0..ACTORS.len());
            w.move_actor(rng, a);
        }
        let known: Vec<usize> = (0..ACTORS.len()).filter(|&a| w.actor_at[a].is_some()).collect();
        let a = *known.choose(rng).expect("at least one statement per question");
        let (loc, line) = w.actor_at[a].unwrap();
        w.lines.push(Line::Question {
            text: format!("Where is {}?", ACTORS[a]),
            answer: LOCATIONS[loc].to_string(),
            supporting: vec![line],
        });
    }
    Story { lines: w.lines }
}

fn task2_story<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Story {
    let mut w = World::default();
    for _ in 0..cfg.questions_per_story {
        let n = rng.gen_range(cfg.statements_between.0..=cfg.statements_between.1);
        for _ in 0..n {
            w.task2_event(rng);
        }
        // keep going until some object has a known place
        while (0..OBJECTS.len()).all(|o| w.object_answer(o).is_none()) {
            w.task2_event(rng);
        }
        let known: Vec<usize> = (0..OBJECTS.len()).filter(|&o| w.object_answer(o).is_some()).collect();
        let o = *known.choose(rng).unwrap();
        let (loc, supporting) = w.object_answer(o).unwrap();
        w.lines.push(Line::Question {
            text: format!("Where is the {}?", OBJECTS[o]),
            answer: LOCATIONS[loc].to_string(),
            supporting,
        });
    }
    Story { lines: w.lines }
}

/// Generates `cfg.stories` story blocks; the seed fixes the output.
pub fn generate_stories(cfg: &SynthConfig) -> Result<Vec<Story>, DataError> {
    let make: fn(&SynthConfig, &mut ChaCha8Rng) -> Story = match cfg.task {
        1 => task1_story,
        2 => task2_story,
        t => return Err(DataError::NoGenerator(t)),
    };
    if cfg.statements_between.0 == 0 || cfg.statements_between.0 > cfg.statements_between.1 {
        return Err(DataError::Mix(format!(
            "bad statement range {:?}",
            cfg.statements_between
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.stories).map(|_| make(cfg, &mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::super::{examples_from_stories, parse_stories, write_stories};
    use super::*;

    fn replay_task2(story: &Story) {
        // independent replay of the text: track actor places and holders
        use std::collections::HashMap;
        let mut actor: HashMap<String, String> = HashMap::new();
        let mut holder: HashMap<String, String> = HashMap::new();
        let mut floor: HashMap<String, String> = HashMap::new();
        for line in &story.lines {
            let words: Vec<&str> = line.text().trim_end_matches(['.', '?']).split(' ').collect();
            match line {
                Line::Question { answer, .. } => {
                    let obj = words[3];
                    let expect = match holder.get(obj) {
                        Some(h) => actor[h].clone(),
                        None => floor[obj].clone(),
                    };
                    assert_eq!(&expect, answer, "{story}");
                }
                Line::Statement(_) => {
                    let (who, obj) = (words[0].to_string(), words[words.len() - 1]);
                    if words.contains(&"there") {
                        holder.insert(words[words.len() - 2].to_string(), who);
                    } else if LOCATIONS.contains(&obj) {
                        actor.insert(who, obj.to_string());
                    } else {
                        holder.remove(obj);
                        floor.insert(obj.to_string(), actor[&who].clone());
                    }
                }
            }
        }
    }

    #[test]
    fn task1_layout_and_answers() {
        let stories = generate_stories(&SynthConfig::task(1, 7)).unwrap();
        assert_eq!(stories.len(), 200);
        for s in &stories {
            assert_eq!(s.lines.len(), 15);
            for (i, l) in s.lines.iter().enumerate() {
                if let Line::Question { text, answer, supporting } = l {
                    let who = text.trim_start_matches("Where is ").trim_end_matches('?');
                    let last = s.lines[..i]
                        .iter()
                        .rposition(|m| m.text().starts_with(who))
                        .unwrap();
                    assert_eq!(supporting, &vec![last + 1]);
                    assert!(s.lines[last].text().ends_with(&format!("{answer}.")));
                }
            }
        }
    }

    #[test]
    fn task2_answers_follow_the_world() {
        for s in generate_stories(&SynthConfig::task(2, 11)).unwrap() {
            replay_task2(&s);
        }
    }

    #[test]
    fn output_parses_and_is_seeded() {
        let cfg = SynthConfig::task(2, 3);
        let a = generate_stories(&cfg).unwrap();
        assert_eq!(a, generate_stories(&cfg).unwrap());
        let mut buf = Vec::new();
        write_stories(&mut buf, &a).unwrap();
        let back = parse_stories(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        assert_eq!(examples_from_stories(&back, 2).len(), 1000);
    }

    #[test]
    fn unknown_task_errors() {
        assert!(matches!(
            generate_stories(&SynthConfig::task(5, 0)),
            Err(DataError::NoGenerator(5))
        ));
    }
}
