use std::process::ExitCode;

use revlab::verify::run_acceptance;

fn main() -> ExitCode {
    let results = run_acceptance();
    for r in &results {
        println!("{}", r.line());
        for (k, v) in &r.metrics {
            println!("    {k} = {v:.6}");
        }
        for n in &r.notes {
            println!("    {n}");
        }
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
