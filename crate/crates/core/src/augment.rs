//! Per-turn expansion of conversations into training samples with loss
//! masks, rendered through a chat template whose specials are atomic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{is_blank, Role, SftSample};
use crate::tok::TokenizerModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolePrefixes {
    pub user: String,
    pub assistant: String,
}

impl Default for RolePrefixes {
    fn default() -> Self {
        RolePrefixes {
            user: "User:".into(),
            assistant: "Assistant:".into(),
        }
    }
}

impl RolePrefixes {
    pub fn get(&self, role: Role) -> &str {
        match role {
            Role::User => &self.user,
            Role::Assistant => &self.assistant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatTemplate {
    pub bos: String,
    pub eos: String,
    pub role_prefixes: RolePrefixes,
    /// Whether earlier (masked) assistant turns are followed by eos.
    pub eos_after_intermediate: bool,
    /// Rendered samples longer than this are rejected.
    pub max_len: Option<usize>,
}

impl Default for ChatTemplate {
    fn default() -> Self {
        ChatTemplate {
            bos: "<s>".into(),
            eos: "</s>".into(),
            role_prefixes: RolePrefixes::default(),
            eos_after_intermediate: true,
            max_len: None,
        }
    }
}

impl ChatTemplate {
    /// Returns the (bos, eos) ids, failing unless each surface is a special
    /// token that encodes to exactly one id.
    pub fn special_ids(&self, tok: &TokenizerModel) -> Result<(u32, u32)> {
        let atomic = |surface: &str| -> Result<u32> {
            let ids = tok.encode(surface);
            match (ids.as_slice(), tok.is_special(surface)) {
                ([id], true) => Ok(*id),
                _ => Err(Error::NonAtomicSpecial(surface.to_string())),
            }
        };
        Ok((atomic(&self.bos)?, atomic(&self.eos)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub source_id: String,
    /// 1-based index of the assistant turn this sample supervises.
    pub turn_index: usize,
    pub token_ids: Vec<u32>,
    pub loss_mask: Vec<u8>,
}

impl TrainingSample {
    /// Ids under the loss mask.
    pub fn masked_ids(&self) -> Vec<u32> {
        self.token_ids
            .iter()
            .zip(&self.loss_mask)
            .filter(|(_, &m)| m == 1)
            .map(|(&id, _)| id)
            .collect()
    }
}

struct Encoded {
    role: Role,
    prefix: Vec<u32>,
    text: Vec<u32>,
}

struct Prepared {
    bos: u32,
    eos: u32,
    turns: Vec<Encoded>,
}

fn prepare(sample: &SftSample, template: &ChatTemplate, tok: &TokenizerModel) -> Result<Prepared> {
    let (bos, eos) = template.special_ids(tok)?;
    sample.validate()?;
    let mut assistant = 0;
    let mut turns = Vec::with_capacity(sample.conversation.len());
    for t in &sample.conversation {
        if t.role == Role::Assistant {
            assistant += 1;
            if is_blank(&t.text) {
                return Err(Error::EmptyAssistantTurn {
                    id: sample.id.clone(),
                    turn: assistant,
                });
            }
        }
        turns.push(Encoded {
            role: t.role,
            prefix: tok.encode(template.role_prefixes.get(t.role)),
            text: tok.encode(&t.text),
        });
    }
    Ok(Prepared { bos, eos, turns })
}

/// Builds the ids for turns up to the `upto`-th assistant turn (or only the
/// first user turn when `upto` is 0) together with the loss mask.
fn assemble(p: &Prepared, template: &ChatTemplate, upto: usize) -> (Vec<u32>, Vec<u8>) {
    let mut ids = vec![p.bos];
    let mut mask = vec![0u8];
    let mut seen = 0;
    for (i, t) in p.turns.iter().enumerate() {
        if upto == 0 && i > 0 {
            break;
        }
        ids.extend(&t.prefix);
        mask.resize(ids.len(), 0);
        if t.role == Role::User {
            ids.extend(&t.text);
            mask.resize(ids.len(), 0);
            continue;
        }
        seen += 1;
        let target = seen == upto;
        ids.extend(&t.text);
        if target || template.eos_after_intermediate {
            ids.push(p.eos);
        }
        mask.resize(ids.len(), u8::from(target));
        if target {
            break;
        }
    }
    (ids, mask)
}

fn check_len(id: &str, len: usize, template: &ChatTemplate) -> Result<()> {
    match template.max_len {
        Some(max) if len > max => Err(Error::TooLong {
            id: id.to_string(),
            len,
            max,
        }),
        _ => Ok(()),
    }
}

/// Renders bos, then each turn's role prefix and text, with eos after
/// assistant turns, stopping after the `upto_turn`-th assistant turn.
pub fn render(
    sample: &SftSample,
    template: &ChatTemplate,
    tok: &TokenizerModel,
    upto_turn: usize,
) -> Result<Vec<u32>> {
    let p = prepare(sample, template, tok)?;
    let available = sample.assistant_turns();
    if upto_turn > available {
        return Err(Error::InvalidParameter(format!(
            "upto_turn {upto_turn} exceeds the {available} assistant turns of {}",
            sample.id
        )));
    }
    let (ids, _) = assemble(&p, template, upto_turn);
    check_len(&sample.id, ids.len(), template)?;
    Ok(ids)
}

/// One sample per assistant turn; only that turn's text and its eos are
/// loss-active.
pub fn augment_turns(
    sample: &SftSample,
    template: &ChatTemplate,
    tok: &TokenizerModel,
) -> Result<Vec<TrainingSample>> {
    let p = prepare(sample, template, tok)?;
    (1..=sample.assistant_turns())
        .map(|k| {
            let (token_ids, loss_mask) = assemble(&p, template, k);
            check_len(&sample.id, token_ids.len(), template)?;
            Ok(TrainingSample {
                source_id: sample.id.clone(),
                turn_index: k,
                token_ids,
                loss_mask,
            })
        })
        .collect()
}

/// [`augment_turns`] over many conversations, in input order.
pub fn augment_all(
    samples: &[SftSample],
    template: &ChatTemplate,
    tok: &TokenizerModel,
) -> Result<Vec<TrainingSample>> {
    let per: Vec<Vec<TrainingSample>> = samples
        .par_iter()
        .map(|s| augment_turns(s, template, tok))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}
