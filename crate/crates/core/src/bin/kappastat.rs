fn main() {
    std::process::exit(kappastat::cli::main_with_args(std::env::args_os()));
}
