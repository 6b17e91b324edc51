//! Running a scenario file through the command-line entry point.

use std::fs;

const SCENARIO: &str = r#"
version = 1

[[run]]
name = "ex2_sliding"
plant = "ex2"
algorithm = "fixed"
mode = "feasibility_only"
u0 = [-0.4, 0.1]
max_iterations = 300

[[run]]
name = "ex4_autotuned"
plant = "ex4"
algorithm = "random"
mode = "full"
u0 = [0.0, 0.4]
seed = 11

[run.params]
lower_bracket = 1e-6
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("scfo-scenario-example");
    fs::create_dir_all(&dir)?;
    let file = dir.join("scenario.toml");
    fs::write(&file, SCENARIO)?;
    let out = dir.join("out");
    let args = [
        "scfo",
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let code = scfo::cli::main_with_args(args, &mut std::io::stdout());
    println!("exit code {code}");
    println!("{}", fs::read_to_string(out.join("summary.csv"))?);
    Ok(())
}
