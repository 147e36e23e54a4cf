fn main() {
    std::process::exit(obsplit::cli::main_with_args(std::env::args_os()));
}
