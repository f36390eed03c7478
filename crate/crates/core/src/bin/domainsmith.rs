fn main() {
    std::process::exit(domainsmith::cli::main_with_args(std::env::args_os()));
}
