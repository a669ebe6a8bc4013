//! Uniform random search speaking the line-delimited oracle protocol.
//! Spends the whole budget and reports the best point seen.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut out = io::stdout().lock();
    let header: Value = match lines.next() {
        Some(l) => serde_json::from_str(&l?).map_err(io::Error::other)?,
        None => return Ok(()),
    };
    let p = &header["problem"];
    let dim = p["dimension"].as_u64().unwrap_or(0) as usize;
    let lo = p["bounds"][0].as_f64().unwrap_or(-5.0);
    let hi = p["bounds"][1].as_f64().unwrap_or(5.0);
    let budget = p["budget"].as_u64().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(p["seed"].as_u64().unwrap_or(0));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..budget {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..=hi)).collect();
        writeln!(out, "{}", json!({ "eval": x }))?;
        out.flush()?;
        let Some(reply) = lines.next() else { return Ok(()) };
        let reply: Value = serde_json::from_str(&reply?).map_err(io::Error::other)?;
        let Some(v) = reply["value"].as_f64() else { break };
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let point = best.map(|(_, x)| x).unwrap_or_else(|| vec![0.0; dim]);
    writeln!(out, "{}", json!({ "final": point }))?;
    out.flush()
}
