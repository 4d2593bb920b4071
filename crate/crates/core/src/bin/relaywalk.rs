fn main() {
    std::process::exit(relaywalk::cli::main_with_args(std::env::args_os()));
}
