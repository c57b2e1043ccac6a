fn main() {
    std::process::exit(splitdr_cli::run(std::env::args_os()));
}
