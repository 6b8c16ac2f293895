//! Log ingestion. One canonical comma-separated format with a header row;
//! thin adapters map other exports (ASSISTments) onto it.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Interaction, InteractionRecord, UserSequence, Vocabulary};

/// Which columns to read and how to treat gaps.
#[derive(Debug, Clone)]
pub struct LogFormat {
    pub user_col: String,
    pub exercise_col: String,
    pub correct_col: String,
    pub timestamp_col: Option<String>,
    /// Fallbacks tried when `exercise_col` is missing from the header.
    pub exercise_col_fallbacks: Vec<String>,
    /// Skip rows whose exercise cell is empty instead of rejecting them
    /// (ASSIST exports leave skill_id blank for untagged problems).
    pub skip_missing_exercise: bool,
}

impl LogFormat {
    /// Canonical format: header `user_id,exercise_id,correct,timestamp`
    /// (timestamp optional), `correct` strictly `0` or `1`.
    pub fn canonical() -> Self {
        Self {
            user_col: "user_id".into(),
            exercise_col: "exercise_id".into(),
            correct_col: "correct".into(),
            timestamp_col: Some("timestamp".into()),
            exercise_col_fallbacks: vec![],
            skip_missing_exercise: false,
        }
    }

    /// ASSISTments skill-builder export: skill ids play the exercise role,
    /// `order_id` is the ordering key.
    pub fn assist() -> Self {
        Self {
            user_col: "user_id".into(),
            exercise_col: "skill_id".into(),
            correct_col: "correct".into(),
            timestamp_col: Some("order_id".into()),
            exercise_col_fallbacks: vec!["problem_id".into()],
            skip_missing_exercise: true,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "canonical" => Ok(Self::canonical()),
            "assist" => Ok(Self::assist()),
            other => Err(Error::RunConfig(format!(
                "unknown dataset adapter `{other}` (expected `canonical` or `assist`)"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct IngestReport {
    pub sequences: Vec<UserSequence>,
    pub vocabulary: Vocabulary,
    /// Users dropped for having fewer than 2 usable interactions.
    pub users_dropped: usize,
    /// Rows skipped for a missing exercise id (adapter-dependent).
    pub rows_skipped: usize,
}

fn find_col(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Parse a delimiter-separated log into per-user sequences plus a fresh
/// vocabulary built from every non-missing exercise id in row order.
pub fn parse_interaction_log(reader: impl Read, format: &LogFormat) -> Result<IngestReport> {
    let (records, rows_skipped) = read_records(reader, format)?;
    let mut vocabulary = Vocabulary::new();
    for r in &records {
        vocabulary.intern(&r.exercise_id);
    }
    let (sequences, users_dropped) = assemble(records, &vocabulary)?;
    Ok(IngestReport {
        sequences,
        vocabulary,
        users_dropped,
        rows_skipped,
    })
}

/// Like [`parse_interaction_log`] but remaps through an existing vocabulary,
/// as required when scoring a log against a trained checkpoint. Unknown
/// exercise ids are an error.
pub fn parse_with_vocabulary(
    reader: impl Read,
    format: &LogFormat,
    vocabulary: &Vocabulary,
) -> Result<IngestReport> {
    let (records, rows_skipped) = read_records(reader, format)?;
    for r in &records {
        if vocabulary.index_of(&r.exercise_id).is_none() {
            return Err(Error::UnknownExercise(r.exercise_id.clone()));
        }
    }
    let (sequences, users_dropped) = assemble(records, vocabulary)?;
    Ok(IngestReport {
        sequences,
        vocabulary: vocabulary.clone(),
        users_dropped,
        rows_skipped,
    })
}

fn read_records(
    reader: impl Read,
    format: &LogFormat,
) -> Result<(Vec<InteractionRecord>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput);
    }

    let missing = |col: &str| Error::MalformedRow {
        line: 1,
        reason: format!("header is missing column `{col}`"),
    };
    let user_ix = find_col(&headers, &format.user_col).ok_or_else(|| missing(&format.user_col))?;
    let exercise_ix = find_col(&headers, &format.exercise_col)
        .or_else(|| {
            format
                .exercise_col_fallbacks
                .iter()
                .find_map(|c| find_col(&headers, c))
        })
        .ok_or_else(|| missing(&format.exercise_col))?;
    let correct_ix =
        find_col(&headers, &format.correct_col).ok_or_else(|| missing(&format.correct_col))?;
    let timestamp_ix = match &format.timestamp_col {
        Some(col) => find_col(&headers, col), // absent timestamp column is fine
        None => None,
    };

    let mut records = Vec::new();
    let mut rows_skipped = 0usize;
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != headers.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} columns, got {}", headers.len(), row.len()),
            });
        }
        let exercise_id = row[exercise_ix].trim();
        if exercise_id.is_empty() || exercise_id.eq_ignore_ascii_case("na") {
            if format.skip_missing_exercise {
                rows_skipped += 1;
                continue;
            }
            return Err(Error::MalformedRow {
                line,
                reason: "empty exercise id".into(),
            });
        }
        let correct = match row[correct_ix].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("correct must be 0 or 1, got `{other}`"),
                })
            }
        };
        let timestamp = match timestamp_ix {
            Some(ix) => row[ix].trim().parse::<i64>().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("timestamp is not an integer: `{}`", &row[ix]),
            })?,
            None => 0,
        };
        records.push(InteractionRecord {
            user_id: row[user_ix].trim().to_string(),
            exercise_id: exercise_id.to_string(),
            correct,
            timestamp,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok((records, rows_skipped))
}

/// Group by user (first-appearance order), sort each user's rows by
/// timestamp with a stable sort so file order breaks ties, remap ids, and
/// drop users with fewer than 2 interactions.
fn assemble(
    records: Vec<InteractionRecord>,
    vocabulary: &Vocabulary,
) -> Result<(Vec<UserSequence>, usize)> {
    let mut user_order: Vec<String> = Vec::new();
    let mut by_user: std::collections::HashMap<String, Vec<(i64, u32, u8)>> =
        std::collections::HashMap::new();
    for r in records {
        let index = vocabulary
            .index_of(&r.exercise_id)
            .ok_or_else(|| Error::UnknownExercise(r.exercise_id.clone()))?;
        by_user
            .entry(r.user_id.clone())
            .or_insert_with(|| {
                user_order.push(r.user_id.clone());
                Vec::new()
            })
            .push((r.timestamp, index, r.correct));
    }

    let mut sequences = Vec::new();
    let mut users_dropped = 0usize;
    for user_id in user_order {
        let mut rows = by_user.remove(&user_id).unwrap();
        rows.sort_by_key(|&(ts, _, _)| ts); // stable: ties keep file order
        if rows.len() < 2 {
            users_dropped += 1;
            continue;
        }
        sequences.push(UserSequence {
            user_id,
            interactions: rows
                .into_iter()
                .map(|(_, exercise, correct)| Interaction { exercise, correct })
                .collect(),
        });
    }
    Ok((sequences, users_dropped))
}

/// Write sequences in the canonical format. `timestamps` are synthesized as
/// the per-user step index; exercise indices are mapped back through the
/// vocabulary.
pub fn write_canonical(
    mut w: impl Write,
    sequences: &[UserSequence],
    vocabulary: &Vocabulary,
) -> Result<()> {
    writeln!(w, "user_id,exercise_id,correct,timestamp")?;
    for seq in sequences {
        for (t, it) in seq.interactions.iter().enumerate() {
            let id = vocabulary
                .id_of(it.exercise)
                .ok_or(Error::ExerciseOutOfRange {
                    index: it.exercise,
                    max: vocabulary.exercise_count(),
                })?;
            writeln!(w, "{},{},{},{}", seq.user_id, id, it.correct, t)?;
        }
    }
    Ok(())
}
