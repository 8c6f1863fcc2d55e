fn main() {
    std::process::exit(tlmbridge::cli::run(std::env::args_os()));
}
