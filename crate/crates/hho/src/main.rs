fn main() {
    std::process::exit(hho::cli::main_with_args());
}
