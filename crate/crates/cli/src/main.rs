fn main() {
    std::process::exit(l3go_cli::run(std::env::args_os()));
}
