fn main() {
    std::process::exit(redsched_cli::run(std::env::args_os()));
}
