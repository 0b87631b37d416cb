use std::io::{BufRead, Write};

use emoprofile_core::session::run_turn;
use emoprofile_core::{
    Classifier, ConversationSession, Registry, ScreeningOptions, SessionExport, TurnResponse, DISCLAIMER,
};

const PROMPT: &str = "> ";
const TOP_EMOTIONS: usize = 5;

/// What a finished REPL session leaves behind.
#[derive(Debug)]
pub struct ReplOutcome {
    pub export: SessionExport,
    /// Lines that failed and were not recorded.
    pub failed_lines: usize,
}

/// Runs the chat loop until `input` ends.
///
/// Each non-empty line becomes one turn. The transcript goes to `out`; the
/// prompt, the banner and per-line errors go to `err`. A failed line leaves the
/// session as it was and the loop carries on.
pub fn repl(
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    classifier: &Classifier,
    registry: &Registry,
    options: &ScreeningOptions,
) -> std::io::Result<ReplOutcome> {
    let mut session = ConversationSession::new(format!("repl-{}", std::process::id()));
    let mut failed_lines = 0;
    writeln!(err, "{DISCLAIMER}")?;
    if registry.is_empty() {
        writeln!(err, "no registry loaded; screening is off")?;
    }
    let mut line = String::new();
    loop {
        write!(err, "{PROMPT}")?;
        err.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match run_turn(&mut session, text, classifier, registry, options) {
            Ok(response) => print_turn(out, &response)?,
            Err(e) => {
                failed_lines += 1;
                writeln!(err, "error: {e}")?;
            }
        }
    }
    writeln!(err)?;
    Ok(ReplOutcome {
        export: session.export(),
        failed_lines,
    })
}

fn print_turn(out: &mut dyn Write, response: &TurnResponse) -> std::io::Result<()> {
    let emotion = response.predicted_emotion.map_or("-", |e| e.label());
    writeln!(out, "emotion: {emotion} (turn: {})", response.turn_emotion.label())?;
    writeln!(out, "reply: {}", response.reply)?;
    let profile = match &response.profile {
        Some(p) => p
            .top(TOP_EMOTIONS)
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(e, w)| format!("{} {w:.3}", e.label()))
            .collect::<Vec<_>>()
            .join(", "),
        None => "-".to_string(),
    };
    writeln!(out, "profile: {profile}")?;
    let screening = match &response.screening {
        Some(s) => s.combined_label.to_string(),
        None => "unavailable".to_string(),
    };
    writeln!(out, "screening: {screening}")?;
    out.flush()
}
