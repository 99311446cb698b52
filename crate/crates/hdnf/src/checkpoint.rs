//! Policy checkpoints: a magic line, a one-line JSON header describing the
//! architecture, then every parameter and optimizer moment as
//! little-endian f32 in header order.

use std::fs;
use std::path::Path;

use hdnf_core::deployment::{PolicyBundle, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &str = "HDNF-POLICY";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub version: u32,
    pub seed: u64,
    pub num_agents: usize,
    pub obs_dim: usize,
    pub grid_dim: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub critic_updates: u64,
    /// Step counters of the actor optimizers, then the two critic ones.
    pub adam_steps: Vec<u64>,
    pub sections: Vec<Section>,
    pub config: TrainConfig,
}

fn sections(b: &mut PolicyBundle) -> Vec<(String, &mut Vec<f32>)> {
    let mut out = Vec::new();
    for (i, n) in b.actor.nets_mut().enumerate() {
        out.push((format!("actor.{i}"), &mut n.params));
    }
    for (i, n) in b.actor_target.nets_mut().enumerate() {
        out.push((format!("actor_target.{i}"), &mut n.params));
    }
    for (i, c) in b.critics.iter_mut().enumerate() {
        out.push((format!("critic.{i}"), &mut c.params));
    }
    for (i, c) in b.critic_targets.iter_mut().enumerate() {
        out.push((format!("critic_target.{i}"), &mut c.params));
    }
    let opts = b.actor_opts.iter_mut().chain(b.critic_opts.iter_mut());
    for (i, o) in opts.enumerate() {
        out.push((format!("adam.{i}.m"), &mut o.m));
        out.push((format!("adam.{i}.v"), &mut o.v));
    }
    out
}

fn header(b: &PolicyBundle) -> Header {
    let mut copy = b.clone();
    let env = &b.config.env;
    Header {
        version: VERSION,
        seed: b.config.seed,
        num_agents: env.num_agents,
        obs_dim: env.obs_dim(),
        grid_dim: env.grid_dim(),
        state_dim: env.state_dim(),
        action_dim: env.action_dim(),
        critic_updates: b.critic_updates,
        adam_steps: b.actor_opts.iter().chain(&b.critic_opts).map(|o| o.t).collect(),
        sections: sections(&mut copy)
            .into_iter()
            .map(|(name, v)| Section { name, len: v.len() })
            .collect(),
        config: b.config.clone(),
    }
}

pub fn encode(b: &PolicyBundle) -> Vec<u8> {
    let h = header(b);
    let mut out = format!("{MAGIC} {VERSION}\n").into_bytes();
    out.extend(serde_json::to_vec(&h).expect("header serializes"));
    out.push(b'\n');
    let mut copy = b.clone();
    for (_, v) in sections(&mut copy) {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(format!("checkpoint: {}", msg.into()))
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let i = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..i], &bytes[i + 1..]))
}

/// Only the header, for inspection without reading the body.
pub fn decode_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let (magic, rest) = split_line(bytes).ok_or_else(|| bad("missing magic line"))?;
    if magic != format!("{MAGIC} {VERSION}").as_bytes() {
        return Err(bad(format!("unsupported magic line `{}`", String::from_utf8_lossy(magic))));
    }
    let (head, body) = split_line(rest).ok_or_else(|| bad("missing header line"))?;
    let text = std::str::from_utf8(head).map_err(|_| bad("header is not UTF-8"))?;
    let h: Header = crate::config::from_str_strict(text).map_err(|e| match e {
        Error::Config(m) => bad(m),
        e => e,
    })?;
    Ok((h, body))
}

pub fn decode(bytes: &[u8]) -> Result<PolicyBundle> {
    let (h, body) = decode_header(bytes)?;
    if h.version != VERSION {
        return Err(bad(format!("version {} is not {VERSION}", h.version)));
    }
    let mut b = PolicyBundle::new(&h.config, &mut ChaCha8Rng::seed_from_u64(0));
    let expected = header(&b);
    let dims = |x: &Header| (x.num_agents, x.obs_dim, x.grid_dim, x.state_dim, x.action_dim);
    if dims(&h) != dims(&expected) {
        return Err(bad(format!(
            "dims {:?} disagree with the stored config {:?}",
            dims(&h),
            dims(&expected)
        )));
    }
    if h.sections != expected.sections {
        return Err(bad("section layout does not match the stored config"));
    }
    if h.adam_steps.len() != expected.adam_steps.len() {
        return Err(bad("optimizer count does not match the stored config"));
    }
    let total: usize = h.sections.iter().map(|s| s.len).sum();
    if body.len() != 4 * total {
        return Err(bad(format!("body holds {} bytes, expected {}", body.len(), 4 * total)));
    }
    let mut words = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for (_, v) in sections(&mut b) {
        for x in v.iter_mut() {
            *x = words.next().expect("length checked");
        }
    }
    for (o, &t) in b.actor_opts.iter_mut().chain(b.critic_opts.iter_mut()).zip(&h.adam_steps) {
        o.t = t;
    }
    b.critic_updates = h.critic_updates;
    Ok(b)
}

pub fn save(path: &Path, b: &PolicyBundle) -> Result<()> {
    fs::write(path, encode(b)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicyBundle> {
    let bytes = fs::read(path).map_err(|e| Error::input(path, e))?;
    decode(&bytes).map_err(|e| e.in_file(path))
}
