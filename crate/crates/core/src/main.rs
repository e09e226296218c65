use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use lexbeam::cli::{run, Settings, KEYS};

const COMMANDS: [(&str, &str); 4] = [
    ("decode", "decode every manifest entry"),
    ("align", "forced-align manifest references"),
    ("fsa-export", "write one sentence automaton per manifest reference"),
    ("wer", "word error rate of hypothesis against reference transcriptions"),
];

fn command() -> Command {
    let mut cmd = Command::new("lexbeam")
        .about("Beam-search decoding over a lexical prefix tree")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat `key = value` settings, overridden by command-line keys"),
        );
        for k in KEYS.iter().filter(|k| k.commands.contains(&name)) {
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true)
                    .help(format!("{} [default: {}]", k.help, k.default)),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let (name, args) = matches.subcommand().expect("subcommand is required");
    let cli: Vec<(String, String)> = KEYS
        .iter()
        .filter(|k| k.commands.contains(&name))
        .filter_map(|k| args.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let file = match args.get_one::<String>("config").map(std::fs::read_to_string).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("lexbeam: config file: {e}");
            return ExitCode::from(2);
        }
    };
    let report = Settings::resolve(name, file.as_deref(), &cli).and_then(|s| run(name, s));
    match report {
        Ok(r) if name == "wer" => {
            println!("{}", r.summary);
            ExitCode::SUCCESS
        }
        Ok(r) => {
            eprintln!("{name}: {}", r.summary);
            if r.failures > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("lexbeam {name}: {e}");
            ExitCode::from(2)
        }
    }
}
