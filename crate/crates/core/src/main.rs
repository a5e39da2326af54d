fn main() {
    std::process::exit(fracperim::cli::run(std::env::args_os()));
}
