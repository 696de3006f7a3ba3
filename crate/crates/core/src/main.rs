fn main() {
    std::process::exit(fmhom::cli::main_exit_code());
}
