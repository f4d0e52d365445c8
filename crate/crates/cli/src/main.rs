use cbn_cli::args::{Cli, Cmd};
use cbn_cli::commands;
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::GenData(args) => commands::gen_data(&args),
        Cmd::Train(args) => commands::train(&args),
        Cmd::Eval(args) => commands::eval(&args),
        Cmd::Gradcheck(args) => commands::gradcheck(&args),
    };
    if let Err(e) = result {
        if !e.message.is_empty() {
            eprintln!("error: {}", e.message);
        }
        std::process::exit(e.code);
    }
}
