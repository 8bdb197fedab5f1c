fn main() {
    std::process::exit(unishrink::cli::main_with_args(std::env::args_os()));
}
