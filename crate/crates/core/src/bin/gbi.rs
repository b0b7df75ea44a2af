fn main() {
    std::process::exit(gbi::cli::main_with_args(std::env::args_os()));
}
