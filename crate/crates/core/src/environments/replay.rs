use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::FullInfoRound;
use crate::error::{Error, Result};
use crate::policy::Policy;

/// One logged impression: the context, the arm that was shown and whether it
/// was clicked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRound {
    pub context: Vec<f64>,
    pub displayed_arm: usize,
    pub clicked: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    /// Matched rounds without a click.
    pub loss: u64,
    /// Rounds where the policy chose the logged arm.
    pub matched: u64,
    /// Logged rounds read.
    pub rounds: u64,
}

impl ReplayOutcome {
    /// Loss per matched round, or `None` when nothing matched.
    pub fn loss_rate(&self) -> Option<f64> {
        (self.matched > 0).then(|| self.loss as f64 / self.matched as f64)
    }

    pub fn click_rate(&self) -> Option<f64> {
        self.loss_rate().map(|l| 1.0 - l)
    }
}

/// Scores `policy` on logged data. Rounds where the policy's choice differs
/// from the displayed arm are skipped without feedback, so the policy only
/// learns from outcomes that were actually observed.
pub fn replay_evaluate<P: Policy + ?Sized>(
    policy: &mut P,
    log: &[LoggedRound],
    rng: &mut dyn RngCore,
) -> Result<ReplayOutcome> {
    let mut out = ReplayOutcome::default();
    for (i, round) in log.iter().enumerate() {
        if round.displayed_arm >= policy.arms() {
            return Err(Error::domain(format!(
                "logged round {i} shows arm {} but the policy has {} arms",
                round.displayed_arm,
                policy.arms()
            )));
        }
        out.rounds += 1;
        let decision = policy.select(&round.context, rng)?;
        if decision.arm != round.displayed_arm {
            continue;
        }
        let loss = if round.clicked { 0.0 } else { 1.0 };
        policy.update(&decision, loss)?;
        out.matched += 1;
        if !round.clicked {
            out.loss += 1;
        }
    }
    Ok(out)
}

/// A log produced by showing a uniformly random arm on every round of a
/// full-information stream; a click is a zero loss.
pub fn uniform_logged_stream<R: Rng + ?Sized>(
    rounds: &[FullInfoRound],
    rng: &mut R,
) -> Vec<LoggedRound> {
    rounds
        .iter()
        .map(|r| {
            let arm = rng.gen_range(0..r.losses.len());
            LoggedRound {
                context: r.context.clone(),
                displayed_arm: arm,
                clicked: r.losses[arm] == 0.0,
            }
        })
        .collect()
}

/// Parses a log with a header row and columns `x_0, ..., x_{n-1}, arm,
/// clicked`. `clicked` accepts `0`/`1`/`true`/`false`. Errors carry the
/// 1-based line number of the offending row.
pub fn parse_logged_csv<R: Read>(input: R) -> Result<Vec<LoggedRound>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let width = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .len();
    if width < 3 {
        return Err(Error::Parse {
            line: 1,
            message: "expected at least one context column plus arm and clicked".into(),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        let n = record.len();
        let context = (0..n - 2)
            .map(|i| {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("context column {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let displayed_arm = record[n - 2]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("arm: {e}")))?;
        let clicked = match record[n - 1].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(format!("clicked must be 0 or 1, got {other:?}"))),
        };
        out.push(LoggedRound {
            context,
            displayed_arm,
            clicked,
        });
    }
    Ok(out)
}

pub fn read_logged_csv(path: &Path) -> Result<Vec<LoggedRound>> {
    parse_logged_csv(File::open(path)?)
}

pub fn write_logged_csv<W: Write>(log: &[LoggedRound], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dims = log.first().map_or(1, |r| r.context.len());
    let mut header: Vec<String> = (0..dims).map(|i| format!("x{i}")).collect();
    header.push("arm".into());
    header.push("clicked".into());
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for r in log {
        let mut row: Vec<String> = r.context.iter().map(|x| x.to_string()).collect();
        row.push(r.displayed_arm.to_string());
        row.push(u8::from(r.clicked).to_string());
        w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ArmDecision;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Always shows arm 0 and records what it was told.
    struct Fixed {
        seen: Vec<f64>,
    }

    impl Policy for Fixed {
        fn arms(&self) -> usize {
            3
        }
        fn select(&mut self, _: &[f64], _: &mut dyn RngCore) -> Result<ArmDecision> {
            Ok(ArmDecision {
                arm: 0,
                simplex: vec![1.0, 0.0, 0.0],
                cell: 0,
                round: 0,
            })
        }
        fn update(&mut self, _: &ArmDecision, loss: f64) -> Result<()> {
            self.seen.push(loss);
            Ok(())
        }
    }

    fn round(arm: usize, clicked: bool) -> LoggedRound {
        LoggedRound {
            context: vec![0.5],
            displayed_arm: arm,
            clicked,
        }
    }

    #[test]
    fn trace_of_five_rounds() {
        let log = vec![
            round(1, true),
            round(0, true),
            round(2, false),
            round(0, false),
            round(1, false),
        ];
        let mut p = Fixed { seen: vec![] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = replay_evaluate(&mut p, &log, &mut rng).unwrap();
        assert_eq!((out.matched, out.loss, out.rounds), (2, 1, 5));
        assert_eq!(p.seen, vec![0.0, 1.0]);
        assert_eq!(out.click_rate(), Some(0.5));
    }

    #[test]
    fn empty_log() {
        let mut p = Fixed { seen: vec![] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = replay_evaluate(&mut p, &[], &mut rng).unwrap();
        assert_eq!(out, ReplayOutcome::default());
        assert_eq!(out.loss_rate(), None);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let log = vec![round(1, true), round(0, false)];
        let mut buf = Vec::new();
        write_logged_csv(&log, &mut buf).unwrap();
        assert_eq!(parse_logged_csv(&buf[..]).unwrap(), log);

        let bad = "x0,arm,clicked\n0.1,0,1\n0.2,zero,1\n";
        match parse_logged_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "x0,arm,clicked\n0.1,0,2\n";
        assert!(matches!(parse_logged_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
