fn main() {
    std::process::exit(agentbank_cli::run(std::env::args_os()));
}
