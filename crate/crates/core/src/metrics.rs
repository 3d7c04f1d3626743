//! HitRatio@1 / ValidRatio bookkeeping.

use alloc::string::String;

/// How one instance ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Correct,
    /// Parsed to a candidate other than the ground truth.
    Wrong,
    /// Did not parse to any candidate.
    Invalid,
    /// The backend failed after retries.
    TransportError,
}

/// Counts that merge associatively, so concurrent evaluation can tally in
/// any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tally {
    pub total: usize,
    pub valid: usize,
    pub correct: usize,
    pub errors: usize,
}

impl Tally {
    pub fn record(&mut self, outcome: Outcome) {
        self.total += 1;
        match outcome {
            Outcome::Correct => {
                self.valid += 1;
                self.correct += 1;
            }
            Outcome::Wrong => self.valid += 1,
            Outcome::Invalid => {}
            Outcome::TransportError => self.errors += 1,
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.total += other.total;
        self.valid += other.valid;
        self.correct += other.correct;
        self.errors += other.errors;
        self
    }

    pub fn hit_ratio(&self) -> f64 {
        ratio(self.correct, self.total)
    }

    pub fn valid_ratio(&self) -> f64 {
        ratio(self.valid, self.total)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl FromIterator<Outcome> for Tally {
    fn from_iter<I: IntoIterator<Item = Outcome>>(iter: I) -> Self {
        let mut t = Tally::default();
        iter.into_iter().for_each(|o| t.record(o));
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub mode: String,
    pub task: String,
    pub instances: usize,
    pub hit_ratio: f64,
    pub valid_ratio: f64,
    pub correct: usize,
    pub valid: usize,
    pub invalid: usize,
    pub transport_errors: usize,
    pub wall_time_secs: f64,
}

impl EvalReport {
    pub fn from_tally(mode: &str, task: &str, tally: Tally) -> Self {
        Self {
            mode: mode.into(),
            task: task.into(),
            instances: tally.total,
            hit_ratio: tally.hit_ratio(),
            valid_ratio: tally.valid_ratio(),
            correct: tally.correct,
            valid: tally.valid,
            invalid: tally.total - tally.valid - tally.errors,
            transport_errors: tally.errors,
            wall_time_secs: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_fixture() {
        let t: Tally = [Outcome::Correct, Outcome::Correct, Outcome::Wrong, Outcome::Invalid].into_iter().collect();
        assert_eq!(t.hit_ratio(), 0.5);
        assert_eq!(t.valid_ratio(), 0.75);
        let r = EvalReport::from_tally("normal", "pairwise", t);
        assert_eq!(r.invalid, 1);
        assert!(r.hit_ratio <= r.valid_ratio);
    }

    #[test]
    fn errors_are_their_own_bucket() {
        let t: Tally = [Outcome::TransportError, Outcome::Correct].into_iter().collect();
        let r = EvalReport::from_tally("normal", "pairwise", t);
        assert_eq!((r.transport_errors, r.invalid, r.valid), (1, 0, 1));
        assert_eq!(r.hit_ratio, 0.5);
        assert_eq!(Tally::default().hit_ratio(), 0.0);
    }
}
