fn main() {
    std::process::exit(gentess::cli::main_with_args(std::env::args_os()));
}
