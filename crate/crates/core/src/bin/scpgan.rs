fn main() {
    std::process::exit(scpgan::cli::run(std::env::args_os()));
}
