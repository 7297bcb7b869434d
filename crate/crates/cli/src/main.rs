use clap::Parser;

fn main() {
    let cli = demandstack_cli::Cli::parse();
    if let Err(err) = demandstack_cli::run(&cli) {
        // library errors already include their cause in the message
        let mut lines: Vec<String> = Vec::new();
        for cause in err.chain() {
            let msg = cause.to_string();
            if !lines.last().is_some_and(|prev| prev.contains(&msg)) {
                lines.push(msg);
            }
        }
        eprintln!("error: {}", lines.join(": "));
        std::process::exit(1);
    }
}
