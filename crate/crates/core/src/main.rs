fn main() {
    std::process::exit(foxh::cli::run(std::env::args_os()));
}
