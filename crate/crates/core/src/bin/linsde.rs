fn main() {
    std::process::exit(linsde::cli::run(std::env::args_os()));
}
