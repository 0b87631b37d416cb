//! The three-block turn format used to talk to generative classifiers.
//!
//! Every turn is laid out as
//! `<|prompter|>{prompt}<|endoftext|><|emotion|>{emotion}<|endoftext|><|assistant|>{response}<|endoftext|>`
//! with no separators between blocks. A query ends with an open marker that
//! the backend is expected to continue from.

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::error::{Error, Result};

pub const PROMPTER: &str = "<|prompter|>";
pub const EMOTION: &str = "<|emotion|>";
pub const ASSISTANT: &str = "<|assistant|>";
pub const END_OF_TEXT: &str = "<|endoftext|>";

const RESERVED: [&str; 4] = [PROMPTER, EMOTION, ASSISTANT, END_OF_TEXT];

/// One prompt with its emotion label and reply. The emotion is kept as a raw
/// string so that training data can be parsed before it is validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub prompt: String,
    pub emotion: Option<String>,
    pub response: Option<String>,
}

impl ConversationTurn {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            emotion: None,
            response: None,
        }
    }

    pub fn complete(prompt: impl Into<String>, emotion: Emotion, response: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            emotion: Some(emotion.label().to_string()),
            response: Some(response.into()),
        }
    }

    /// The emotion parsed against the vocabulary, if one is set.
    pub fn emotion_label(&self) -> Result<Option<Emotion>> {
        self.emotion.as_deref().map(str::parse).transpose()
    }

    pub fn is_complete(&self) -> bool {
        self.emotion.is_some() && self.response.is_some()
    }
}

/// Rejects text that contains any of the special-token literals.
pub fn check_text(text: &str) -> Result<()> {
    match RESERVED.iter().find(|t| text.contains(*t)) {
        Some(token) => Err(Error::ReservedToken(token)),
        None => Ok(()),
    }
}

fn check_prompt(prompt: &str) -> Result<()> {
    if prompt.trim().is_empty() {
        return Err(Error::EmptyPrompt);
    }
    check_text(prompt)
}

fn push_block(out: &mut String, marker: &str, body: &str) {
    out.push_str(marker);
    out.push_str(body);
    out.push_str(END_OF_TEXT);
}

fn encode_history(history: &[ConversationTurn], out: &mut String) -> Result<()> {
    for (index, turn) in history.iter().enumerate() {
        check_prompt(&turn.prompt)?;
        let emotion = turn.emotion.as_deref().ok_or(Error::IncompleteHistoryTurn {
            index,
            missing: "emotion",
        })?;
        let response = turn.response.as_deref().ok_or(Error::IncompleteHistoryTurn {
            index,
            missing: "response",
        })?;
        check_text(emotion)?;
        check_text(response)?;
        push_block(out, PROMPTER, &turn.prompt);
        push_block(out, EMOTION, emotion);
        push_block(out, ASSISTANT, response);
    }
    Ok(())
}

/// Prefix that asks the backend for the emotion of `prompt`.
pub fn encode_emotion_query(history: &[ConversationTurn], prompt: &str) -> Result<String> {
    check_prompt(prompt)?;
    let mut out = String::new();
    encode_history(history, &mut out)?;
    push_block(&mut out, PROMPTER, prompt);
    out.push_str(EMOTION);
    Ok(out)
}

/// Prefix that asks the backend for the reply to `prompt` given its emotion.
pub fn encode_reply_query(history: &[ConversationTurn], prompt: &str, emotion: Emotion) -> Result<String> {
    let mut out = encode_emotion_query(history, prompt)?;
    out.push_str(emotion.label());
    out.push_str(END_OF_TEXT);
    out.push_str(ASSISTANT);
    Ok(out)
}

/// Serializes a whole conversation; only the last turn may be partial.
pub fn encode_conversation(turns: &[ConversationTurn]) -> Result<String> {
    let Some((last, history)) = turns.split_last() else {
        return Ok(String::new());
    };
    let mut out = String::new();
    encode_history(history, &mut out)?;
    check_prompt(&last.prompt)?;
    push_block(&mut out, PROMPTER, &last.prompt);
    match (&last.emotion, &last.response) {
        (None, None) => {}
        (Some(emotion), response) => {
            check_text(emotion)?;
            push_block(&mut out, EMOTION, emotion);
            if let Some(response) = response {
                check_text(response)?;
                push_block(&mut out, ASSISTANT, response);
            }
        }
        (None, Some(_)) => {
            return Err(Error::IncompleteHistoryTurn {
                index: turns.len() - 1,
                missing: "emotion",
            })
        }
    }
    Ok(out)
}

/// Cuts a generation at its first end-of-text marker.
pub fn truncate_generation(generation: &str) -> &str {
    match generation.find(END_OF_TEXT) {
        Some(end) => &generation[..end],
        None => generation,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Prompter,
    Emotion,
    Assistant,
}

fn marker_at(input: &str, offset: usize) -> Option<(Role, usize)> {
    let rest = &input[offset..];
    [
        (PROMPTER, Role::Prompter),
        (EMOTION, Role::Emotion),
        (ASSISTANT, Role::Assistant),
    ]
    .into_iter()
    .find(|(m, _)| rest.starts_with(m))
    .map(|(m, role)| (role, m.len()))
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedFormat {
        offset,
        reason: reason.into(),
    }
}

/// Parses the turn format back into turns.
///
/// Whitespace between blocks is tolerated. The final block may be left open,
/// as in a query prefix; an open block with no text leaves its field unset.
pub fn parse_conversation(input: &str) -> Result<Vec<ConversationTurn>> {
    let mut turns: Vec<ConversationTurn> = Vec::new();
    let mut pos = 0;
    loop {
        let skipped = input[pos..].len() - input[pos..].trim_start().len();
        pos += skipped;
        if pos == input.len() {
            break;
        }
        let block_start = pos;
        let Some((role, marker_len)) = marker_at(input, pos) else {
            return Err(malformed(pos, "expected a special-token block"));
        };
        pos += marker_len;

        let body_end = input[pos..].find(END_OF_TEXT).map(|i| pos + i);
        let body = &input[pos..body_end.unwrap_or(input.len())];
        if let Some(nested) = RESERVED[..3].iter().filter_map(|m| body.find(m)).min() {
            return Err(malformed(pos + nested, "block is not terminated"));
        }
        let open = body_end.is_none();
        let value = (!open || !body.is_empty()).then(|| body.to_string());
        pos = body_end.map_or(input.len(), |end| end + END_OF_TEXT.len());

        let expects_prompt = turns.last().is_none_or(|t| t.response.is_some());
        match role {
            Role::Prompter => {
                if !expects_prompt {
                    return Err(malformed(block_start, "prompt before the previous turn ended"));
                }
                let prompt = value.unwrap_or_default();
                if prompt.trim().is_empty() {
                    return Err(malformed(block_start, "empty prompt"));
                }
                turns.push(ConversationTurn::new(prompt));
            }
            Role::Emotion => match turns.last_mut() {
                Some(turn) if turn.emotion.is_none() && !expects_prompt => {
                    turn.emotion = value;
                }
                _ => return Err(malformed(block_start, "emotion without a preceding prompt")),
            },
            Role::Assistant => match turns.last_mut() {
                Some(turn) if turn.emotion.is_some() && turn.response.is_none() => {
                    turn.response = value;
                }
                _ => return Err(malformed(block_start, "response before prompt and emotion")),
            },
        }
        if open {
            break;
        }
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONCERT: &str = "I couldn't wait to go to the concert.";
    const U2: &str = "The U2 concert. Tickets were really expensive and I never thought we would be able to go, but somehow we did!!!";

    fn e(label: &str) -> Emotion {
        label.parse().unwrap()
    }

    #[test]
    fn emotion_query_without_history() {
        assert_eq!(
            encode_emotion_query(&[], CONCERT).unwrap(),
            "<|prompter|>I couldn't wait to go to the concert.<|endoftext|><|emotion|>"
        );
    }

    #[test]
    fn emotion_query_with_history() {
        let history = [ConversationTurn::complete(
            CONCERT,
            e("anticipating"),
            "What concert was it?",
        )];
        let query = encode_emotion_query(&history, U2).unwrap();
        assert_eq!(
            query,
            format!(
                "<|prompter|>{CONCERT}<|endoftext|><|emotion|>anticipating<|endoftext|>\
                 <|assistant|>What concert was it?<|endoftext|><|prompter|>{U2}<|endoftext|><|emotion|>"
            )
        );
    }

    #[test]
    fn reply_query_extends_emotion_query() {
        let q = encode_reply_query(&[], "P", e("afraid")).unwrap();
        assert_eq!(
            q,
            "<|prompter|>P<|endoftext|><|emotion|>afraid<|endoftext|><|assistant|>"
        );
        assert!(q.starts_with(&encode_emotion_query(&[], "P").unwrap()));

        let completed = format!("{q}hello<|endoftext|>");
        let turns = parse_conversation(&completed).unwrap();
        assert_eq!(turns, [ConversationTurn::complete("P", e("afraid"), "hello")]);
    }

    #[test]
    fn incomplete_history_is_rejected() {
        let history = [ConversationTurn::new("hi")];
        assert!(matches!(
            encode_emotion_query(&history, "next"),
            Err(Error::IncompleteHistoryTurn {
                index: 0,
                missing: "emotion"
            })
        ));
        let mut turn = ConversationTurn::new("hi");
        turn.emotion = Some("sad".into());
        assert!(matches!(
            encode_emotion_query(&[turn], "next"),
            Err(Error::IncompleteHistoryTurn {
                index: 0,
                missing: "response"
            })
        ));
    }

    #[test]
    fn reserved_tokens_and_empty_prompts_are_rejected() {
        assert!(matches!(
            encode_emotion_query(&[], "a <|endoftext|> b"),
            Err(Error::ReservedToken(END_OF_TEXT))
        ));
        assert!(matches!(encode_emotion_query(&[], "   "), Err(Error::EmptyPrompt)));
        let history = [ConversationTurn::complete("hi", e("sad"), "<|prompter|>")];
        assert!(encode_emotion_query(&history, "x").is_err());
    }

    #[test]
    fn parse_edge_cases() {
        assert!(parse_conversation("").unwrap().is_empty());
        assert!(matches!(
            parse_conversation("<|assistant|>x"),
            Err(Error::MalformedFormat { offset: 0, .. })
        ));
        assert!(matches!(
            parse_conversation("hello"),
            Err(Error::MalformedFormat { offset: 0, .. })
        ));
        assert!(matches!(
            parse_conversation("<|prompter|>a<|endoftext|><|prompter|>b<|endoftext|>"),
            Err(Error::MalformedFormat { offset: 26, .. })
        ));
        assert!(matches!(
            parse_conversation("<|prompter|>a<|emotion|>"),
            Err(Error::MalformedFormat { offset: 13, .. })
        ));
        assert!(matches!(
            parse_conversation("<|prompter|>a<|endoftext|>junk"),
            Err(Error::MalformedFormat { offset: 26, .. })
        ));
    }

    #[test]
    fn parse_query_prefixes() {
        let q = encode_emotion_query(&[], "P").unwrap();
        assert_eq!(parse_conversation(&q).unwrap(), [ConversationTurn::new("P")]);

        let q = encode_reply_query(&[], "P", e("sad")).unwrap();
        let mut turn = ConversationTurn::new("P");
        turn.emotion = Some("sad".into());
        assert_eq!(parse_conversation(&q).unwrap(), [turn]);
    }

    #[test]
    fn parse_tolerates_whitespace_between_blocks() {
        let text = "<|prompter|>hi<|endoftext|>\n<|emotion|>sad<|endoftext|> <|assistant|>oh<|endoftext|>\n";
        assert_eq!(
            parse_conversation(text).unwrap(),
            [ConversationTurn::complete("hi", e("sad"), "oh")]
        );
    }

    #[test]
    fn parse_keeps_unvalidated_emotions() {
        let text = "<|prompter|>so dull<|endoftext|><|emotion|>bored<|endoftext|><|assistant|>ok<|endoftext|>";
        let turns = parse_conversation(text).unwrap();
        assert_eq!(turns[0].emotion.as_deref(), Some("bored"));
        assert!(turns[0].emotion_label().is_err());
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_generation("sad<|endoftext|>junk"), "sad");
        assert_eq!(truncate_generation("sad"), "sad");
        assert_eq!(truncate_generation("<|endoftext|>"), "");
    }
}
