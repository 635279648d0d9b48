fn main() {
    std::process::exit(oodgen::cli::main_with_args(std::env::args_os()));
}
