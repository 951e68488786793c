fn main() {
    std::process::exit(sno::cli::main_with_args(std::env::args_os()));
}
