//! Mutation backends: given a context, propose a SEARCH/REPLACE diff.

use std::fmt::Write as _;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diff::{render_diff, DiffBlock};
use super::population::MutationContext;
use crate::error::{Error, Result};

pub trait Mutator {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String>;
}

impl<M: Mutator + ?Sized> Mutator for Box<M> {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String> {
        (**self).propose(ctx)
    }
}

/// Replays a fixed list of diffs, cycling when exhausted.
pub struct ScriptedMutator {
    diffs: Vec<String>,
    next: usize,
}

impl ScriptedMutator {
    pub fn new(diffs: Vec<String>) -> Self {
        ScriptedMutator { diffs, next: 0 }
    }
}

impl Mutator for ScriptedMutator {
    fn propose(&mut self, _ctx: &MutationContext) -> Result<String> {
        if self.diffs.is_empty() {
            return Err(Error::Mutator("script is empty".into()));
        }
        let d = self.diffs[self.next % self.diffs.len()].clone();
        self.next += 1;
        Ok(d)
    }
}

/// Wraps a closure; handy for tests.
pub struct FnMutator<F>(pub F);

impl<F: FnMut(&MutationContext) -> Result<String>> Mutator for FnMutator<F> {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String> {
        (self.0)(ctx)
    }
}

/// Toy programs are lines of words; fitness counts the marker word.
/// Every program ends with [`TOY_END`], which anchors appends.
pub const TOY_MARKER: &str = "MARK";
pub const TOY_END: &str = "<end>";

pub fn toy_seed() -> String {
    format!("# toy program\n{TOY_END}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyMutatorConfig {
    pub p_add: f64,
    /// The remaining `1 - p_add - p_remove` appends a filler line.
    pub p_remove: f64,
    pub seed: u64,
}

impl Default for ToyMutatorConfig {
    fn default() -> Self {
        ToyMutatorConfig {
            p_add: 0.6,
            p_remove: 0.2,
            seed: 0,
        }
    }
}

/// Deterministic mock that edits toy programs: appends a marker line,
/// deletes one, or appends filler. With `p_add = 1` every proposal
/// strictly improves the toy fitness.
pub struct ToyMutator {
    cfg: ToyMutatorConfig,
    rng: ChaCha8Rng,
}

impl ToyMutator {
    pub fn new(cfg: ToyMutatorConfig) -> Self {
        ToyMutator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        }
    }

    /// Always appends a marker.
    pub fn always_improving(seed: u64) -> Self {
        ToyMutator::new(ToyMutatorConfig {
            p_add: 1.0,
            p_remove: 0.0,
            seed,
        })
    }

    fn tag(&mut self) -> String {
        format!("{:08x}", self.rng.gen::<u32>())
    }
}

impl Mutator for ToyMutator {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String> {
        let program = &ctx.parent.program;
        let r: f64 = self.rng.gen();
        let block = if r < self.cfg.p_add {
            let tag = self.tag();
            DiffBlock::new(TOY_END, format!("{TOY_MARKER} {tag}\n{TOY_END}"))
        } else if r < self.cfg.p_add + self.cfg.p_remove {
            let marked: Vec<&str> = program
                .lines()
                .filter(|l| l.split_whitespace().next() == Some(TOY_MARKER))
                .collect();
            match marked.choose(&mut self.rng) {
                Some(line) => DiffBlock::new(format!("{line}\n"), ""),
                None => return Err(Error::Mutator("nothing to remove".into())),
            }
        } else {
            let tag = self.tag();
            DiffBlock::new(TOY_END, format!("pad {tag}\n{TOY_END}"))
        };
        Ok(render_diff(&[block]))
    }
}

/// Multiplicatively perturbs one numeric field of a pretty-printed JSON
/// scorer configuration (one `"key": value` per line).
pub struct ParamJitterMutator {
    rng: ChaCha8Rng,
    /// Factors are `exp(u)` with `u` uniform in `[-scale, scale]`.
    scale: f64,
}

impl ParamJitterMutator {
    pub fn new(seed: u64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParam(format!("jitter scale must be positive, got {scale}")));
        }
        Ok(ParamJitterMutator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale,
        })
    }
}

impl Mutator for ParamJitterMutator {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String> {
        let program = &ctx.parent.program;
        let numeric: Vec<(&str, &str, f64)> = program
            .lines()
            .filter_map(|line| {
                let (key, rest) = line.split_once(':')?;
                let value = rest.trim().trim_end_matches(',');
                let v: f64 = value.parse().ok()?;
                // Integers are left alone: they are usually counts.
                value.contains('.').then_some((line, key, v))
            })
            .collect();
        let &(line, key, v) = numeric
            .choose(&mut self.rng)
            .ok_or_else(|| Error::Mutator("no numeric parameter to perturb".into()))?;
        let factor = self.rng.gen_range(-self.scale..=self.scale).exp();
        let mut nv = v * factor;
        if v == 0.0 {
            nv = self.rng.gen_range(-0.1..=0.1);
        }
        let comma = if line.trim_end().ends_with(',') { "," } else { "" };
        let new_line = format!("{key}: {nv:?}{comma}");
        Ok(render_diff(&[DiffBlock::new(line, new_line)]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpMutatorConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_tokens: Option<u32>,
}

impl Default for HttpMutatorConfig {
    fn default() -> Self {
        HttpMutatorConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.85,
            api_key_env: "LEXEVOLVE_API_KEY".into(),
            timeout_secs: 120,
            max_retries: 3,
            backoff_ms: 1000,
            max_tokens: None,
        }
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct HttpMutator {
    cfg: HttpMutatorConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpMutator {
    /// Fails when the API key variable is unset or empty.
    pub fn new(cfg: HttpMutatorConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::InvalidParam(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Ok(HttpMutator { cfg, api_key, agent })
    }

    fn request(&self, body: &serde_json::Value) -> std::result::Result<serde_json::Value, (bool, String)> {
        let resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        match resp {
            Ok(mut r) => r.body_mut().read_json().map_err(|e| (false, e.to_string())),
            Err(ureq::Error::StatusCode(code)) => {
                let transient = code == 408 || code == 429 || code >= 500;
                Err((transient, format!("HTTP {code}")))
            }
            Err(e @ (ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                Err((true, e.to_string()))
            }
            Err(e) => Err((false, e.to_string())),
        }
    }
}

impl Mutator for HttpMutator {
    fn propose(&mut self, ctx: &MutationContext) -> Result<String> {
        let (system, user) = render_prompt(ctx);
        let mut body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        if let Some(n) = self.cfg.max_tokens {
            body["max_tokens"] = n.into();
        }
        let mut attempt = 0;
        loop {
            match self.request(&body) {
                Ok(v) => {
                    return v["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| Error::Mutator("response has no message content".into()));
                }
                Err((true, _)) if attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(wait));
                }
                Err((_, msg)) => return Err(Error::Mutator(msg)),
            }
        }
    }
}

pub const SYSTEM_PROMPT: &str = "You improve a lexical retrieval program. Propose one focused change \
as one or more SEARCH/REPLACE blocks. Each SEARCH section must copy text that occurs exactly once \
in the current program.";

/// System and user messages for a mutation request.
pub fn render_prompt(ctx: &MutationContext) -> (String, String) {
    let mut u = String::new();
    let fitness = |f: Option<f64>| f.map_or("n/a".to_owned(), |f| format!("{f:.6}"));
    let _ = writeln!(u, "# Current program (fitness {})\n", fitness(ctx.parent.fitness));
    if let Some(m) = &ctx.parent.metrics {
        let _ = writeln!(
            u,
            "Mean nDCG@10 {:.4}, mean Recall@100 {:.4}\n",
            m.mean_ndcg10, m.mean_recall100
        );
    }
    let _ = writeln!(u, "```\n{}\n```\n", ctx.parent.program);
    if !ctx.prior_changes.is_empty() {
        let _ = writeln!(u, "# Prior changes in this lineage (most recent first)\n");
        for c in &ctx.prior_changes {
            let _ = writeln!(u, "- {c}");
        }
        u.push('\n');
    }
    for (title, group) in [("Top programs", &ctx.top), ("Other programs", &ctx.random)] {
        if group.is_empty() {
            continue;
        }
        let _ = writeln!(u, "# {title}\n");
        for c in group {
            let _ = writeln!(u, "## fitness {}\n```\n{}\n```\n", fitness(c.fitness), c.program);
        }
    }
    let _ = writeln!(
        u,
        "# Task\n\nImprove the fitness (0.8 x Recall@100 + 0.2 x nDCG@10). Reply with blocks of the form:\n\n\
         <<<<<<< SEARCH\n<exact existing text>\n=======\n<new text>\n>>>>>>> REPLACE"
    );
    (SYSTEM_PROMPT.to_owned(), u)
}
