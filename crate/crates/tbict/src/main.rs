fn main() {
    std::process::exit(tbict::cli::run_from_args(std::env::args_os()));
}
