fn main() {
    std::process::exit(mixaug_cli::run(std::env::args_os()));
}
