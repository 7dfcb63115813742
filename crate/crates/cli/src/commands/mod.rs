pub mod evaluate;
pub mod extract;
pub mod filter;
pub mod prepare;
pub mod report;
pub mod retrieve;
pub mod synthesize;
