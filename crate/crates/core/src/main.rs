fn main() {
    std::process::exit(cornerlab::cli::main_from(std::env::args_os()));
}
