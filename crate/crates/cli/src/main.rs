use clap::Parser;

use harnack_cli::{report, run, Cli, EXIT_INVALID};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (cfg, out) = match run(&cli) {
        Ok(done) => done,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_INVALID);
        }
    };
    match (&out.envelope, &out.csv) {
        (Some(env), _) => print!("{}", report::to_json(env)),
        (None, Some((_, body))) => print!("{body}"),
        (None, None) => {}
    }
    if let Some(dir) = &cfg.output_dir {
        if let Err(e) = out.persist(dir, cli.command.slug()) {
            eprintln!("error: {e}");
            std::process::exit(EXIT_INVALID);
        }
    }
    std::process::exit(out.exit_code());
}
