fn main() {
    std::process::exit(rvq_cli::run(std::env::args_os()));
}
