fn main() {
    std::process::exit(jumpsync_cli::run(std::env::args_os()));
}
