//! Serves OpenAI-style chat completions from a gold corpus, for offline runs.
//!
//!     cargo run -p phee-cli --example mock_llm_server -- corpus.jsonl [ADDR] [RATE_LIMITED]

mod server;

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(corpus) = args.next().map(PathBuf::from) else {
        eprintln!("usage: mock_llm_server CORPUS.jsonl [ADDR] [RATE_LIMITED]");
        std::process::exit(2);
    };
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8089".into());
    let limited: usize = args.next().map_or(0, |n| n.parse().expect("RATE_LIMITED is a count"));
    let dataset = phee_core::corpus::load_dataset(&corpus).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        std::process::exit(1);
    });
    let srv = server::spawn(&addr, server::MockState::new(&dataset, limited)).expect("bind");
    println!("listening on {}", srv.url());
    loop {
        std::thread::park();
    }
}
