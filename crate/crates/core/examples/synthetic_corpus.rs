//! Writes a synthetic gold-labeled corpus as JSONL to stdout.
//!
//! cargo run -p evcoref-core --example synthetic_corpus -- [mentions] [topics] [seed]

use std::io::{self, Write};

use evcoref_core::synthetic::{generate, SyntheticConfig};
use evcoref_core::write_mentions;

fn main() -> io::Result<()> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("arguments are integers"))
        .collect();
    let cfg = SyntheticConfig {
        mentions: args.first().copied().unwrap_or(200) as usize,
        topics: args.get(1).copied().unwrap_or(4) as usize,
        seed: args.get(2).copied().unwrap_or(1),
        ..SyntheticConfig::default()
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    write_mentions(&mut out, &generate(&cfg))?;
    out.flush()
}
